//! Finite-dimensional dictionaries of C^1 functions `R^m -> R^n` with
//! analytic evaluation and Jacobians. Models are linear combinations
//! `F(x) = sum_i c_i F_i(x)` of dictionary entries.

use crate::error::{Error, Result};
use crate::poly::{binomial, multi_indices, MultiPoly};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Hard cap on dictionary size; guards accidental combinatorial blowups.
pub const SIZE_CAP: usize = 50_000;

/// A single C^1 basis function with an analytic Jacobian.
pub trait BasisFn: Send + Sync {
    fn eval(&self, x: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// Serializable dictionary identity; byte-stable across runs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DictionaryDescriptor {
    Poly { m: usize, n: usize, d: u32 },
    Named { id: String },
}

struct Monomial {
    alpha: Vec<u32>,
    out: usize,
    out_dim: usize,
}

impl BasisFn for Monomial {
    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut v = 1.0;
        for (xi, &ai) in x.iter().zip(&self.alpha) {
            v *= xi.powi(ai as i32);
        }
        let mut out = DVector::zeros(self.out_dim);
        out[self.out] = v;
        out
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let m = self.alpha.len();
        let mut jac = DMatrix::zeros(self.out_dim, m);
        for j in 0..m {
            if self.alpha[j] == 0 {
                continue;
            }
            let mut v = f64::from(self.alpha[j]);
            for (k, (xk, &ak)) in x.iter().zip(&self.alpha).enumerate() {
                let e = if k == j { ak - 1 } else { ak };
                v *= xk.powi(e as i32);
            }
            jac[(self.out, j)] = v;
        }
        jac
    }
}

struct LinearEntry {
    row: usize,
    col: usize,
    out_dim: usize,
    in_dim: usize,
}

impl BasisFn for LinearEntry {
    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.out_dim);
        out[self.row] = x[self.col];
        out
    }

    fn jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.out_dim, self.in_dim);
        jac[(self.row, self.col)] = 1.0;
        jac
    }
}

/// An ordered dictionary of basis functions sharing input and output
/// dimensions. Immutable after construction.
#[derive(Clone)]
pub struct Dictionary {
    input_dim: usize,
    output_dim: usize,
    entries: Vec<Arc<dyn BasisFn>>,
    indices: Option<Vec<Vec<u32>>>,
    degree: Option<u32>,
    descriptor: DictionaryDescriptor,
}

impl std::fmt::Debug for Dictionary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dictionary")
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.output_dim)
            .field("len", &self.entries.len())
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

impl Dictionary {
    /// All monomials `x^alpha e_j` with `|alpha| <= d`, ordered graded-lex in
    /// `alpha` with the output index varying fastest. Size `n * C(m+d, d)`.
    pub fn polynomial(m: usize, n: usize, d: u32) -> Result<Self> {
        if m < 1 || n < 1 {
            return Err(Error::InvalidInput("dictionary dims must be positive".into()));
        }
        let count = n
            .checked_mul(binomial(m + d as usize, d as usize))
            .filter(|&c| c <= SIZE_CAP)
            .ok_or_else(|| {
                Error::SizeCap(format!("polynomial dictionary ({m}, {n}, {d})"))
            })?;
        let indices = multi_indices(m, d);
        let mut entries: Vec<Arc<dyn BasisFn>> = Vec::with_capacity(count);
        for alpha in &indices {
            for out in 0..n {
                entries.push(Arc::new(Monomial {
                    alpha: alpha.clone(),
                    out,
                    out_dim: n,
                }));
            }
        }
        Ok(Self {
            input_dim: m,
            output_dim: n,
            entries,
            indices: Some(indices),
            degree: Some(d),
            descriptor: DictionaryDescriptor::Poly { m, n, d },
        })
    }

    /// All matrix units `x -> x_b e_a`, row-major; models are `F(x) = A x`
    /// with `A` read off the coefficient vector.
    pub fn linear(m: usize, n: usize) -> Result<Self> {
        if m < 1 || n < 1 {
            return Err(Error::InvalidInput("dictionary dims must be positive".into()));
        }
        let count = n.checked_mul(m).filter(|&c| c <= SIZE_CAP).ok_or_else(|| {
            Error::SizeCap(format!("linear dictionary ({m}, {n})"))
        })?;
        let mut entries: Vec<Arc<dyn BasisFn>> = Vec::with_capacity(count);
        for row in 0..n {
            for col in 0..m {
                entries.push(Arc::new(LinearEntry {
                    row,
                    col,
                    out_dim: n,
                    in_dim: m,
                }));
            }
        }
        Ok(Self {
            input_dim: m,
            output_dim: n,
            entries,
            indices: None,
            degree: Some(1),
            descriptor: DictionaryDescriptor::Named {
                id: format!("linear:{n}x{m}"),
            },
        })
    }

    /// Custom named dictionary; callers supply analytic Jacobians.
    pub fn custom(
        m: usize,
        n: usize,
        entries: Vec<Arc<dyn BasisFn>>,
        id: impl Into<String>,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("empty dictionary".into()));
        }
        if entries.len() > SIZE_CAP {
            return Err(Error::SizeCap(format!("custom dictionary ({})", entries.len())));
        }
        Ok(Self {
            input_dim: m,
            output_dim: n,
            entries,
            indices: None,
            degree: None,
            descriptor: DictionaryDescriptor::Named { id: id.into() },
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Polynomial degree bound when known (polynomial and linear dictionaries).
    pub fn degree(&self) -> Option<u32> {
        self.degree
    }

    pub fn descriptor(&self) -> &DictionaryDescriptor {
        &self.descriptor
    }

    /// Graded-lex multi-indices for polynomial dictionaries.
    pub fn multi_indices(&self) -> Option<&[Vec<u32>]> {
        self.indices.as_deref()
    }

    pub fn eval_entry(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        self.entries[i].eval(x)
    }

    pub fn jacobian_entry(&self, i: usize, x: &DVector<f64>) -> DMatrix<f64> {
        self.entries[i].jacobian(x)
    }

    fn check_coeffs(&self, coeffs: &DVector<f64>) -> Result<()> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients, got {}",
                self.len(),
                coeffs.len()
            )));
        }
        Ok(())
    }

    /// `F(x) = sum_i c_i F_i(x)`.
    pub fn evaluate_model(&self, coeffs: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_coeffs(coeffs)?;
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "expected input of dim {}, got {}",
                self.input_dim,
                x.len()
            )));
        }
        let mut out = DVector::zeros(self.output_dim);
        for (i, c) in coeffs.iter().enumerate() {
            if *c != 0.0 {
                out.axpy(*c, &self.entries[i].eval(x), 1.0);
            }
        }
        Ok(out)
    }

    /// `dF/dx` at `x`, the analytic sum of entry Jacobians.
    pub fn jacobian_model(&self, coeffs: &DVector<f64>, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_coeffs(coeffs)?;
        let mut out = DMatrix::zeros(self.output_dim, self.input_dim);
        for (i, c) in coeffs.iter().enumerate() {
            if *c != 0.0 {
                out += self.entries[i].jacobian(x) * *c;
            }
        }
        Ok(out)
    }

    /// Coefficients of a polynomial map given per-component polynomials.
    /// Requires a polynomial dictionary of sufficient degree.
    pub fn coeffs_from_polys(&self, comps: &[MultiPoly]) -> Result<DVector<f64>> {
        let indices = self.indices.as_ref().ok_or_else(|| {
            Error::InvalidInput("coeffs_from_polys needs a polynomial dictionary".into())
        })?;
        if comps.len() != self.output_dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} component polynomials, got {}",
                self.output_dim,
                comps.len()
            )));
        }
        let n = self.output_dim;
        let mut coeffs = DVector::zeros(self.len());
        for (j, p) in comps.iter().enumerate() {
            if p.degree() > self.degree.unwrap_or(0) {
                return Err(Error::InvalidInput(format!(
                    "component degree {} exceeds dictionary degree {}",
                    p.degree(),
                    self.degree.unwrap_or(0)
                )));
            }
            for (ai, c) in p.dense_coeffs(indices).into_iter().enumerate() {
                coeffs[ai * n + j] = c;
            }
        }
        Ok(coeffs)
    }

    /// For a linear dictionary: the matrix `A` with `F(x) = A x`.
    pub fn matrix_from_coeffs(&self, coeffs: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_coeffs(coeffs)?;
        Ok(DMatrix::from_fn(self.output_dim, self.input_dim, |a, b| {
            coeffs[a * self.input_dim + b]
        }))
    }

    /// Inverse of [`Dictionary::matrix_from_coeffs`].
    pub fn coeffs_from_matrix(&self, a: &DMatrix<f64>) -> Result<DVector<f64>> {
        if a.shape() != (self.output_dim, self.input_dim) {
            return Err(Error::DimensionMismatch(format!(
                "expected {}x{} matrix, got {}x{}",
                self.output_dim,
                self.input_dim,
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(DVector::from_fn(self.len(), |i, _| {
            a[(i / self.input_dim, i % self.input_dim)]
        }))
    }
}
