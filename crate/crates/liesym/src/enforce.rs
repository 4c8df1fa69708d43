//! Bases of exactly equivariant models: dictionary functions, MLP layer
//! weights, and integral-operator kernels, each obtained as the joint
//! nullspace of the Lie-derivative and component-transform constraints.

use crate::error::{Error, Result};
use crate::fnspace::Dictionary;
use crate::liegroup::MatrixLieGroup;
use crate::linalg::svd_nullspace;
use crate::operators::{ActionPair, LieOperatorTensor, Representation, SampledInnerProduct};
use nalgebra::{DMatrix, DVector};

/// Orthonormal coefficient vectors spanning the equivariant subspace, with
/// the constraint spectrum and per-column residuals.
#[derive(Clone, Debug)]
pub struct EquivariantBasis {
    pub columns: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub cutoff: f64,
}

impl EquivariantBasis {
    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }
}

fn nullspace_basis(constraints: &DMatrix<f64>, tol_rel: f64) -> EquivariantBasis {
    let (singular_values, columns) = svd_nullspace(constraints, tol_rel, None);
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let residuals = (0..columns.ncols())
        .map(|j| (constraints * columns.column(j)).norm())
        .collect();
    EquivariantBasis {
        columns,
        singular_values,
        residuals,
        cutoff: tol_rel * sigma_max,
    }
}

/// Coefficient basis of `{F in span(dict) : L_{xi_k} F = 0, K_{g_j} F = F}`.
///
/// Continuous constraints come from the assembled tensor; component
/// constraints are discretized on the tensor's own sample points so both
/// blocks share one inner product. Default rank cutoff 1e-8 relative.
pub fn equivariant_function_basis(
    tensor: &LieOperatorTensor,
    pair: &ActionPair,
    dict: &Dictionary,
    tol_rel: Option<f64>,
) -> Result<EquivariantBasis> {
    if dict.is_empty() {
        return Err(Error::InvalidInput("empty dictionary".into()));
    }
    if tensor.len() != dict.len() {
        return Err(Error::DimensionMismatch(
            "tensor was assembled for a different dictionary".into(),
        ));
    }
    let n = dict.len();
    let dim_g = tensor.dim_g();
    let n_prime = tensor.n_prime();
    let inner = tensor.inner();
    let comps = pair.group().component_reps();
    let sample_dim = inner.len() * dict.output_dim();

    let lie_rows = n_prime * dim_g;
    let mut constraints = DMatrix::zeros(lie_rows + comps.len() * sample_dim, n);
    for (i, slice) in tensor.slices().iter().enumerate() {
        for j in 0..n_prime {
            for k in 0..dim_g {
                constraints[(j * dim_g + k, i)] = slice[(j, k)];
            }
        }
    }
    for (ci, g) in comps.iter().enumerate() {
        let row0 = lie_rows + ci * sample_dim;
        for i in 0..n {
            let coeffs = DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
            let vals: Result<Vec<DVector<f64>>> = inner
                .points()
                .iter()
                .map(|x| {
                    Ok(pair.finite_transform_eval(dict, &coeffs, g, x)?
                        - dict.eval_entry(i, x))
                })
                .collect();
            let col = inner.embed_values(&vals?);
            constraints
                .view_mut((row0, i), (sample_dim, 1))
                .copy_from(&col);
        }
    }
    Ok(nullspace_basis(&constraints, tol_rel.unwrap_or(1e-8)))
}

/// Basis of equivariant affine layers `x -> W x + b` between two linear
/// representations of one group: `phi_next W = W phi_prev`,
/// `Phi_next(g) W = W Phi_prev(g)`, `phi_next b = 0`, `Phi_next(g) b = b`.
#[derive(Clone, Debug)]
pub struct LayerBasis {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: DMatrix<f64>,
    pub weight_spectrum: Vec<f64>,
}

pub fn equivariant_layer_basis(
    group: &MatrixLieGroup,
    rep_prev: &Representation,
    rep_next: &Representation,
) -> Result<LayerBasis> {
    let np = rep_prev.vec_dim();
    let nn = rep_next.vec_dim();
    let id_p = DMatrix::identity(np, np);
    let id_n = DMatrix::identity(nn, nn);
    let dim_g = group.dim();
    let n_comp = group.component_reps().len();

    // vec is column-major: vec(A W) = (I (x) A) vec(W), vec(W B) = (B^T (x) I) vec(W)
    let mut w_rows = DMatrix::zeros((dim_g + n_comp) * np * nn, np * nn);
    let mut b_rows = DMatrix::zeros((dim_g + n_comp) * nn, nn);
    let mut row_w = 0;
    let mut row_b = 0;
    let mut push = |phi_p: DMatrix<f64>, phi_n: DMatrix<f64>, bias_rhs_identity: bool,
                    w_rows: &mut DMatrix<f64>, b_rows: &mut DMatrix<f64>| {
        let block = id_p.kronecker(&phi_n) - phi_p.transpose().kronecker(&id_n);
        w_rows
            .view_mut((row_w, 0), (np * nn, np * nn))
            .copy_from(&block);
        row_w += np * nn;
        let bias = if bias_rhs_identity {
            phi_n - &id_n
        } else {
            phi_n
        };
        b_rows.view_mut((row_b, 0), (nn, nn)).copy_from(&bias);
        row_b += nn;
    };
    for k in 0..dim_g {
        let xi = group.basis_element(k);
        let phi_p = rep_prev.algebra_affine(&xi.matrix).0;
        let phi_n = rep_next.algebra_affine(&xi.matrix).0;
        push(phi_p, phi_n, false, &mut w_rows, &mut b_rows);
    }
    for g in group.component_reps() {
        let phi_p = rep_prev.group_affine(g).0;
        let phi_n = rep_next.group_affine(g).0;
        push(phi_p, phi_n, true, &mut w_rows, &mut b_rows);
    }

    let (weight_spectrum, w_null) = svd_nullspace(&w_rows, 1e-8, None);
    let weights = (0..w_null.ncols())
        .map(|j| {
            DMatrix::from_fn(nn, np, |r, c| w_null[(c * nn + r, j)])
        })
        .collect();
    let (_, biases) = svd_nullspace(&b_rows, 1e-8, None);
    Ok(LayerBasis {
        weights,
        biases,
        weight_spectrum,
    })
}

/// Representations defining an integral-operator kernel problem:
/// `K : R^n x R^m -> W (x) V*` with group actions on all four spaces.
#[derive(Clone, Debug)]
pub struct KernelActions {
    pub group: MatrixLieGroup,
    pub rep_x: Representation,
    pub rep_y: Representation,
    pub rep_w: Representation,
    pub rep_v: Representation,
}

impl KernelActions {
    fn dims(&self) -> (usize, usize, usize, usize) {
        (
            self.rep_x.vec_dim(),
            self.rep_y.vec_dim(),
            self.rep_w.vec_dim(),
            self.rep_v.vec_dim(),
        )
    }

    /// Kernel value at a concatenated point, as a `p x q` matrix; dictionary
    /// outputs are row-major flattenings.
    fn reshape(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let (_, _, p, q) = self.dims();
        DMatrix::from_fn(p, q, |r, c| v[r * q + c])
    }

    fn flatten(&self, m: &DMatrix<f64>) -> DVector<f64> {
        let (_, _, _, q) = self.dims();
        DVector::from_fn(m.nrows() * m.ncols(), |i, _| m[(i / q, i % q)])
    }
}

/// Evaluate the kernel Lie derivative of a single dictionary entry at `(x, y)`:
/// `phi_W K - K phi_V - K Tr[phi_m] - dK/dx phi_n x - dK/dy phi_m y`.
fn kernel_lie_derivative_entry(
    actions: &KernelActions,
    dict: &Dictionary,
    i: usize,
    xi: &DMatrix<f64>,
    z: &DVector<f64>,
) -> DVector<f64> {
    let (n, m, _, _) = actions.dims();
    let val = dict.eval_entry(i, z);
    let jac = dict.jacobian_entry(i, z);
    let kmat = actions.reshape(&val);
    let phi_w = actions.rep_w.algebra_affine(xi).0;
    let phi_v = actions.rep_v.algebra_affine(xi).0;
    let (a_n, b_n) = actions.rep_x.algebra_affine(xi);
    let (a_m, b_m) = actions.rep_y.algebra_affine(xi);
    let x = z.rows(0, n).clone_owned();
    let y = z.rows(n, m).clone_owned();
    let gen_x = -(&a_n * x + b_n);
    let gen_y = -(&a_m * y + b_m);
    let matrix_part = &phi_w * &kmat - &kmat * phi_v - &kmat * a_m.trace();
    let dir = jac.columns(0, n) * gen_x + jac.columns(n, m) * gen_y;
    actions.flatten(&matrix_part) + dir
}

/// Evaluate `K_g K - K` for a single dictionary entry at `(x, y)`:
/// `Phi_W(g) K(Phi_n(g)^{-1} x, Phi_m(g)^{-1} y) Phi_V(g)^{-1} det[Phi_m(g)]^{-1} - K(x, y)`.
fn kernel_transform_defect_entry(
    actions: &KernelActions,
    dict: &Dictionary,
    i: usize,
    g: &DMatrix<f64>,
    z: &DVector<f64>,
) -> Result<DVector<f64>> {
    let (n, m, _, _) = actions.dims();
    let x = z.rows(0, n).clone_owned();
    let y = z.rows(n, m).clone_owned();
    let xt = actions.rep_x.apply_group_inv(g, &x)?;
    let yt = actions.rep_y.apply_group_inv(g, &y)?;
    let mut zt = DVector::zeros(n + m);
    zt.rows_mut(0, n).copy_from(&xt);
    zt.rows_mut(n, m).copy_from(&yt);
    let kmat = actions.reshape(&dict.eval_entry(i, &zt));
    let phi_w = actions.rep_w.group_affine(g).0;
    let phi_v_inv = actions
        .rep_v
        .group_affine(g)
        .0
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("singular value-space representation".into()))?;
    let det = actions.rep_y.group_matrix(g).determinant();
    if det == 0.0 {
        return Err(Error::InvalidInput("singular input-space representation".into()));
    }
    let transformed = &phi_w * kmat * phi_v_inv / det;
    Ok(actions.flatten(&transformed) - dict.eval_entry(i, z))
}

/// Coefficient basis of equivariant integral-operator kernels over the
/// polynomial kernel dictionary of the given degree. Returns the dictionary
/// alongside the basis so callers can evaluate the kernels.
pub fn equivariant_kernel_basis(
    actions: &KernelActions,
    degree: u32,
    inner: &SampledInnerProduct,
    tol_rel: Option<f64>,
) -> Result<(Dictionary, EquivariantBasis)> {
    let (n, m, p, q) = actions.dims();
    let dict = Dictionary::polynomial(n + m, p * q, degree)?;
    if inner.domain().dim != n + m {
        return Err(Error::DimensionMismatch(
            "kernel sampling domain must cover the concatenated input".into(),
        ));
    }
    let need = crate::poly::binomial(n + m + degree as usize, n + m);
    if inner.len() < need {
        return Err(Error::InsufficientSamples {
            got: inner.len(),
            need,
        });
    }
    inner.check_dictionary_gram(&dict)?;

    let group = &actions.group;
    let dim_g = group.dim();
    let comps = group.component_reps();
    let sample_dim = inner.len() * dict.output_dim();
    let rows = (dim_g + comps.len()) * sample_dim;
    let mut constraints = DMatrix::zeros(rows, dict.len());
    for i in 0..dict.len() {
        let mut row0 = 0;
        for k in 0..dim_g {
            let xi = group.basis_element(k);
            let vals: Vec<DVector<f64>> = inner
                .points()
                .iter()
                .map(|z| kernel_lie_derivative_entry(actions, &dict, i, &xi.matrix, z))
                .collect();
            constraints
                .view_mut((row0, i), (sample_dim, 1))
                .copy_from(&inner.embed_values(&vals));
            row0 += sample_dim;
        }
        for g in comps {
            let vals: Result<Vec<DVector<f64>>> = inner
                .points()
                .iter()
                .map(|z| kernel_transform_defect_entry(actions, &dict, i, g, z))
                .collect();
            constraints
                .view_mut((row0, i), (sample_dim, 1))
                .copy_from(&inner.embed_values(&vals?));
            row0 += sample_dim;
        }
    }
    Ok((dict, nullspace_basis(&constraints, tol_rel.unwrap_or(1e-8))))
}
