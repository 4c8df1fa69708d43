//! Sparse multivariate polynomials over a fixed variable set. Used to expand
//! composed test functions (radial and linear-feature families) into monomial
//! coefficients, and as exact oracles for dictionary Jacobians.

use std::collections::BTreeMap;

/// Binomial coefficient `C(n, k)` with overflow checks.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc
            .checked_mul(n - i)
            .expect("binomial overflow")
            / (i + 1);
    }
    acc
}

/// All multi-indices in `m` variables with total degree at most `d`, in
/// graded lexicographic order (by total degree, then lexicographic).
pub fn multi_indices(m: usize, d: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for deg in 0..=d {
        let mut idx = vec![0u32; m];
        fill(&mut out, &mut idx, 0, deg);
    }
    out
}

fn fill(out: &mut Vec<Vec<u32>>, idx: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos + 1 == idx.len() {
        idx[pos] = remaining;
        out.push(idx.clone());
        idx[pos] = 0;
        return;
    }
    for v in (0..=remaining).rev() {
        idx[pos] = v;
        fill(out, idx, pos + 1, remaining - v);
        idx[pos] = 0;
    }
}

/// A sparse polynomial `sum c_alpha x^alpha` in a fixed number of variables.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly {
    vars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl MultiPoly {
    pub fn zero(vars: usize) -> Self {
        Self {
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: usize, c: f64) -> Self {
        let mut p = Self::zero(vars);
        if c != 0.0 {
            p.terms.insert(vec![0; vars], c);
        }
        p
    }

    /// The coordinate polynomial `x_i`.
    pub fn var(vars: usize, i: usize) -> Self {
        assert!(i < vars);
        let mut alpha = vec![0; vars];
        alpha[i] = 1;
        let mut p = Self::zero(vars);
        p.terms.insert(alpha, 1.0);
        p
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, f64> {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|a| a.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn add_term(&mut self, alpha: Vec<u32>, c: f64) {
        assert_eq!(alpha.len(), self.vars);
        let entry = self.terms.entry(alpha.clone()).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&alpha);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.vars, other.vars);
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.add_term(a.clone(), *c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.vars);
        if s != 0.0 {
            for (a, c) in &self.terms {
                out.terms.insert(a.clone(), c * s);
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.vars, other.vars);
        let mut out = Self::zero(self.vars);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let sum: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                out.add_term(sum, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::constant(self.vars, 1.0);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.vars);
        let mut acc = 0.0;
        for (a, c) in &self.terms {
            let mut t = *c;
            for (xi, &ai) in x.iter().zip(a) {
                t *= xi.powi(ai as i32);
            }
            acc += t;
        }
        acc
    }

    /// Partial derivative with respect to variable `i`.
    pub fn derivative(&self, i: usize) -> Self {
        assert!(i < self.vars);
        let mut out = Self::zero(self.vars);
        for (a, c) in &self.terms {
            if a[i] == 0 {
                continue;
            }
            let mut b = a.clone();
            b[i] -= 1;
            out.add_term(b, c * f64::from(a[i]));
        }
        out
    }

    /// Substitute `args[i]` for variable `i`; all args share one variable set.
    pub fn compose(&self, args: &[MultiPoly]) -> Self {
        assert_eq!(args.len(), self.vars);
        let target_vars = args.first().map_or(0, MultiPoly::vars);
        let mut out = Self::zero(target_vars);
        for (a, c) in &self.terms {
            let mut term = Self::constant(target_vars, *c);
            for (arg, &ai) in args.iter().zip(a) {
                if ai > 0 {
                    term = term.mul(&arg.pow(ai));
                }
            }
            out = out.add(&term);
        }
        out
    }

    /// Dense coefficients against a multi-index list (graded-lex order from
    /// [`multi_indices`]). Panics if a term falls outside the list.
    pub fn dense_coeffs(&self, indices: &[Vec<u32>]) -> Vec<f64> {
        let lookup: BTreeMap<&[u32], usize> = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.as_slice(), i))
            .collect();
        let mut out = vec![0.0; indices.len()];
        for (a, c) in &self.terms {
            let i = *lookup
                .get(a.as_slice())
                .expect("term degree exceeds the index list");
            out[i] = *c;
        }
        out
    }
}
