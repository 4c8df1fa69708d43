//! Convex symmetry-promoting penalties and solvers: the discrete
//! sum-of-norms penalty over group elements, the nuclear norm of the
//! Lie-operator image, ADMM for regularized regression, and
//! interpolation-constrained nuclear-norm recovery.

use crate::error::{Error, Result};
use crate::fnspace::Dictionary;
use crate::linalg::{lstsq, nuclear_norm, nuclear_subgradient_direction, singular_value_shrink, svd_nullspace};
use crate::operators::{ActionPair, LieOperatorTensor, SampledInnerProduct};
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// ADMM solver options.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub rho: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iter: 5000,
            tol: 1e-8,
        }
    }
}

/// Output of a fit or recovery solve.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub coefficients: DVector<f64>,
    pub objective_trace: Vec<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `||Z - sum c_i L_i|| / max(1, ||sum c_i L_i||)` at termination.
    pub consensus_residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub success: Option<bool>,
}

/// Nuclear norm of `sum_i c_i L[i]` and its subgradient in `c`, via the
/// adjoint of the tensor contraction applied to `U V^T`.
pub fn nuclear_penalty(
    tensor: &LieOperatorTensor,
    coeffs: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    let z = tensor.operator_matrix(coeffs)?;
    let value = nuclear_norm(&z);
    let dir = nuclear_subgradient_direction(&z);
    let sub = DVector::from_fn(tensor.len(), |i, _| tensor.slices()[i].dot(&dir));
    Ok((value, sub))
}

/// Discrete symmetry penalty `sum_g ||K_g F - F||` under the sampled norm.
pub fn discrete_penalty(
    pair: &ActionPair,
    dict: &Dictionary,
    coeffs: &DVector<f64>,
    elements: &[DMatrix<f64>],
    inner: &SampledInnerProduct,
) -> Result<f64> {
    discrete_penalty_layers(&[(pair, dict, coeffs)], elements, inner)
}

/// Group-sparsity form over a layer stack:
/// `sum_g sqrt(sum_l ||K_g F_l - F_l||^2)`.
pub fn discrete_penalty_layers(
    layers: &[(&ActionPair, &Dictionary, &DVector<f64>)],
    elements: &[DMatrix<f64>],
    inner: &SampledInnerProduct,
) -> Result<f64> {
    let mut total = 0.0;
    for g in elements {
        let mut sq = 0.0;
        for (pair, dict, coeffs) in layers {
            let vals: Result<Vec<DVector<f64>>> = inner
                .points()
                .iter()
                .map(|x| {
                    Ok(pair.finite_transform_eval(dict, coeffs, g, x)?
                        - dict.evaluate_model(coeffs, x)?)
                })
                .collect();
            let n = inner.norm(&vals?);
            sq += n * n;
        }
        total += sq.sqrt();
    }
    Ok(total)
}

/// A regularized regression problem
/// `min_c (1/M) sum_j ||y_j - F(x_j)||^2 + gamma ||sum_i c_i L[i]||_*`.
pub struct PromoteProblem<'a> {
    pub tensor: &'a LieOperatorTensor,
    pub dict: &'a Dictionary,
    pub data: &'a [(DVector<f64>, DVector<f64>)],
    pub gamma: f64,
    pub options: SolverOptions,
}

fn design_matrix(dict: &Dictionary, data: &[(DVector<f64>, DVector<f64>)]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n_out = dict.output_dim();
    let rows = data.len() * n_out;
    let mut phi = DMatrix::zeros(rows, dict.len());
    let mut y = DVector::zeros(rows);
    for (j, (x, yv)) in data.iter().enumerate() {
        if x.len() != dict.input_dim() || yv.len() != n_out {
            return Err(Error::DimensionMismatch("data pair dims".into()));
        }
        y.rows_mut(j * n_out, n_out).copy_from(yv);
        for i in 0..dict.len() {
            let v = dict.eval_entry(i, x);
            phi.view_mut((j * n_out, i), (n_out, 1)).copy_from(&v);
        }
    }
    Ok((phi, y))
}

/// `G` with column `i = vec(L[i])` (column-major), so `G c = vec(sum c_i L[i])`.
fn contraction_matrix(tensor: &LieOperatorTensor) -> DMatrix<f64> {
    let np = tensor.n_prime();
    let dg = tensor.dim_g();
    let mut g = DMatrix::zeros(np * dg, tensor.len());
    for (i, s) in tensor.slices().iter().enumerate() {
        for k in 0..dg {
            for j in 0..np {
                g[(k * np + j, i)] = s[(j, k)];
            }
        }
    }
    g
}

fn unvec(v: &DVector<f64>, np: usize, dg: usize) -> DMatrix<f64> {
    DMatrix::from_fn(np, dg, |j, k| v[k * np + j])
}

fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    let (np, dg) = m.shape();
    DVector::from_fn(np * dg, |i, _| m[(i % np, i / np)])
}

fn ridge_cholesky(mut a: DMatrix<f64>) -> Cholesky<f64, nalgebra::Dyn> {
    let n = a.nrows();
    let bump = 1e-12 * (a.trace() / n as f64).max(1.0);
    loop {
        match a.clone().cholesky() {
            Some(c) => return c,
            None => {
                for i in 0..n {
                    a[(i, i)] += bump;
                }
            }
        }
    }
}

/// Solve the regularized regression by ADMM with the splitting
/// `Z = sum_i c_i L[i]`: the `c`-update is a cached linear solve, the
/// `Z`-update is singular-value soft-thresholding at `gamma / rho`.
pub fn fit_regularized(p: &PromoteProblem) -> Result<FitResult> {
    if p.gamma < 0.0 {
        return Err(Error::InvalidInput("gamma must be nonnegative".into()));
    }
    if p.data.is_empty() {
        return Err(Error::InvalidInput("need at least one data pair".into()));
    }
    if p.tensor.len() != p.dict.len() {
        return Err(Error::DimensionMismatch(
            "tensor and dictionary sizes differ".into(),
        ));
    }
    let (phi, y) = design_matrix(p.dict, p.data)?;
    let m_data = p.data.len() as f64;

    let objective = |c: &DVector<f64>| -> Result<f64> {
        let mse = (&phi * c - &y).norm_squared() / m_data;
        let nuc = nuclear_norm(&p.tensor.operator_matrix(c)?);
        Ok(mse + p.gamma * nuc)
    };

    if p.gamma == 0.0 {
        let c = lstsq(&phi, &DMatrix::from_column_slice(y.len(), 1, y.as_slice()), 1e-12)
            .column(0)
            .clone_owned();
        let obj = objective(&c)?;
        return Ok(FitResult {
            coefficients: c,
            objective_trace: vec![obj],
            primal_residual: 0.0,
            dual_residual: 0.0,
            consensus_residual: 0.0,
            converged: true,
            iterations: 0,
            success: None,
        });
    }

    let g = contraction_matrix(p.tensor);
    let np = p.tensor.n_prime();
    let dg = p.tensor.dim_g();
    let rho = p.options.rho;
    let lhs = phi.transpose() * &phi * (2.0 / m_data) + g.transpose() * &g * rho;
    let chol = ridge_cholesky(lhs);
    let rhs_data = phi.transpose() * &y * (2.0 / m_data);

    let mut c = DVector::zeros(p.dict.len());
    let mut z = DMatrix::zeros(np, dg);
    let mut u = DVector::zeros(np * dg);
    let mut trace = Vec::new();
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iterations = p.options.max_iter;
    for it in 0..p.options.max_iter {
        let rhs = &rhs_data + g.transpose() * (vec_of(&z) - &u) * rho;
        c = chol.solve(&rhs);
        let gc = &g * &c;
        let (z_new, _) = singular_value_shrink(&unvec(&(&gc + &u), np, dg), p.gamma / rho);
        let dz = vec_of(&z_new) - vec_of(&z);
        z = z_new;
        let r = &gc - vec_of(&z);
        u += &r;
        primal = r.norm();
        dual = rho * (g.transpose() * dz).norm();
        if it % 25 == 0 {
            trace.push(objective(&c)?);
        }
        let scale = gc.norm().max(1.0);
        if primal <= p.options.tol * scale && dual <= p.options.tol * scale {
            iterations = it + 1;
            break;
        }
    }
    trace.push(objective(&c)?);
    let gc = &g * &c;
    let consensus = (vec_of(&z) - &gc).norm() / gc.norm().max(1.0);
    let converged = iterations < p.options.max_iter
        || (primal <= p.options.tol * gc.norm().max(1.0)
            && dual <= p.options.tol * gc.norm().max(1.0));
    Ok(FitResult {
        coefficients: c,
        objective_trace: trace,
        primal_residual: primal,
        dual_residual: dual,
        consensus_residual: consensus,
        converged,
        iterations,
        success: None,
    })
}

/// Minimize `||sum c_i L[i]||_*` subject to exact interpolation
/// `F(x_j) = y_j`. The affine feasible set is parametrized as
/// `c = c0 + Q z` with `Q` a nullspace basis of the evaluation matrix, so
/// every iterate is feasible; ADMM then runs over `z`.
pub fn recover_interpolating(
    tensor: &LieOperatorTensor,
    dict: &Dictionary,
    samples: &[(DVector<f64>, DVector<f64>)],
    options: SolverOptions,
) -> Result<FitResult> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let (e, y) = design_matrix(dict, samples)?;
    let c0 = lstsq(&e, &DMatrix::from_column_slice(y.len(), 1, y.as_slice()), 1e-12)
        .column(0)
        .clone_owned();
    let defect = (&e * &c0 - &y).norm();
    if defect > 1e-8 * (1.0 + y.norm()) {
        return Err(Error::Infeasible(format!(
            "interpolation system is inconsistent (residual {defect:.3e})"
        )));
    }
    let (_, q) = svd_nullspace(&e, 1e-10, None);
    let free = q.ncols();
    let objective = |c: &DVector<f64>| -> Result<f64> {
        Ok(nuclear_norm(&tensor.operator_matrix(c)?))
    };
    if free == 0 {
        let obj = objective(&c0)?;
        return Ok(FitResult {
            coefficients: c0,
            objective_trace: vec![obj],
            primal_residual: 0.0,
            dual_residual: 0.0,
            consensus_residual: 0.0,
            converged: true,
            iterations: 0,
            success: None,
        });
    }

    let g = contraction_matrix(tensor);
    let h = &g * &q;
    let h0 = &g * &c0;
    let np = tensor.n_prime();
    let dg = tensor.dim_g();
    let rho = options.rho;
    let chol = ridge_cholesky(h.transpose() * &h);

    let mut zvar = DVector::zeros(free);
    let mut z = unvec(&h0, np, dg);
    let mut u = DVector::zeros(np * dg);
    let mut trace = Vec::new();
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iterations = options.max_iter;
    for it in 0..options.max_iter {
        let rhs = h.transpose() * (vec_of(&z) - &u - &h0);
        zvar = chol.solve(&rhs);
        let img = &h * &zvar + &h0;
        let (z_new, _) = singular_value_shrink(&unvec(&(&img + &u), np, dg), 1.0 / rho);
        let dz = vec_of(&z_new) - vec_of(&z);
        z = z_new;
        let r = &img - vec_of(&z);
        u += &r;
        primal = r.norm();
        dual = rho * (h.transpose() * dz).norm();
        trace.push(objective(&(&c0 + &q * &zvar))?);
        let scale = img.norm().max(1.0);
        if primal <= options.tol * scale && dual <= options.tol * scale {
            iterations = it + 1;
            break;
        }
    }
    let c = &c0 + &q * &zvar;
    let img = &g * &c;
    let consensus = (vec_of(&z) - &img).norm() / img.norm().max(1.0);
    Ok(FitResult {
        coefficients: c,
        objective_trace: trace,
        primal_residual: primal,
        dual_residual: dual,
        consensus_residual: consensus,
        converged: iterations < options.max_iter,
        iterations,
        success: None,
    })
}

/// Recovery criterion: `max_i |c_hat_i - c_star_i| <= 5e-3 max_i |c_star_i|`.
pub fn recovery_success(fitted: &DVector<f64>, truth: &DVector<f64>) -> bool {
    if fitted.len() != truth.len() {
        return false;
    }
    let scale = truth.amax();
    (fitted - truth).amax() <= 5e-3 * scale
}
