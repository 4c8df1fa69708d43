//! Symmetry discovery: the connected symmetry subgroup of a model, layer
//! stack, point cloud, input-output dataset, or dynamical system is found as
//! the nullspace of a linear operator on the candidate Lie algebra.

use crate::enforce::EquivariantBasis;
use crate::error::{Error, Result};
use crate::fnspace::Dictionary;
use crate::liegroup::{LieAlgebraElement, MatrixLieGroup};
use crate::linalg::svd_nullspace;
use crate::operators::{ActionPair, LieOperatorTensor, Representation, SampledInnerProduct};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Where a report's numbers came from.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub samples: usize,
    pub detail: String,
}

/// Result of a symmetry computation: the singular spectrum of the operator,
/// the rank cutoff used, and an orthonormal basis of the detected
/// subalgebra with per-generator residuals.
#[derive(Clone, Debug)]
pub struct SymmetryReport {
    pub singular_values: Vec<f64>,
    pub cutoff: f64,
    pub dim_g: usize,
    pub subalgebra: Vec<LieAlgebraElement>,
    pub residuals: Vec<f64>,
    pub provenance: Provenance,
}

impl SymmetryReport {
    pub fn nullity(&self) -> usize {
        self.subalgebra.len()
    }

    /// Generator coefficients as columns of a `dimG x nullity` matrix.
    pub fn coeff_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim_g, self.subalgebra.len());
        for (j, xi) in self.subalgebra.iter().enumerate() {
            m.set_column(j, &xi.coeffs);
        }
        m
    }

    pub fn artifact(&self) -> ReportArtifact {
        ReportArtifact {
            singular_values: self.singular_values.clone(),
            cutoff: self.cutoff,
            nullity: self.nullity(),
            generators: self
                .subalgebra
                .iter()
                .map(|xi| xi.coeffs.iter().copied().collect())
                .collect(),
            residuals: self.residuals.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Serializable form of a [`SymmetryReport`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportArtifact {
    pub singular_values: Vec<f64>,
    pub cutoff: f64,
    pub nullity: usize,
    pub generators: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub provenance: Provenance,
}

/// Rank cutoff policy: relative to the largest singular value (default
/// 1e-8), or an absolute threshold for noisy data.
#[derive(Clone, Copy, Debug)]
pub enum Cutoff {
    Relative(f64),
    Absolute(f64),
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff::Relative(1e-8)
    }
}

/// `scale` floors the reference magnitude of a relative cutoff: for a fully
/// symmetric object the operator is numerically zero and `tol * sigma_max`
/// would never classify anything as null, so the caller supplies the natural
/// size of the unprojected problem instead.
fn report_from_operator(
    a: &DMatrix<f64>,
    group: &MatrixLieGroup,
    cutoff: Cutoff,
    scale: f64,
    provenance: Provenance,
) -> Result<SymmetryReport> {
    if a.ncols() != group.dim() {
        return Err(Error::DimensionMismatch(format!(
            "operator has {} columns, group algebra dimension is {}",
            a.ncols(),
            group.dim()
        )));
    }
    let (tol_rel, tol_abs) = match cutoff {
        Cutoff::Relative(t) => (t, None),
        Cutoff::Absolute(t) => (0.0, Some(t)),
    };
    let (singular_values, mut basis) = svd_nullspace(a, tol_rel, tol_abs);
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let cutoff_val = tol_abs.unwrap_or(tol_rel * sigma_max.max(scale));
    if tol_abs.is_none() && scale > sigma_max {
        basis = svd_nullspace(a, 0.0, Some(cutoff_val)).1;
    }
    let mut subalgebra = Vec::with_capacity(basis.ncols());
    let mut residuals = Vec::with_capacity(basis.ncols());
    for j in 0..basis.ncols() {
        let coeffs = basis.column(j).clone_owned();
        residuals.push((a * &coeffs).norm());
        subalgebra.push(group.element(coeffs)?);
    }
    Ok(SymmetryReport {
        singular_values,
        cutoff: cutoff_val,
        dim_g: group.dim(),
        subalgebra,
        residuals,
        provenance,
    })
}

fn tensor_scale(tensor: &LieOperatorTensor, coeffs: &DVector<f64>) -> f64 {
    let slice_max = tensor
        .slices()
        .iter()
        .map(|s| s.norm())
        .fold(0.0_f64, f64::max);
    coeffs.norm() * slice_max
}

/// `sym_G(F) = Null(L_F)` for a dictionary model `F = sum c_i F_i`.
pub fn function_symmetries(
    tensor: &LieOperatorTensor,
    group: &MatrixLieGroup,
    coeffs: &DVector<f64>,
    cutoff: Cutoff,
) -> Result<SymmetryReport> {
    let op = tensor.operator_matrix(coeffs)?;
    let provenance = Provenance {
        seed: Some(tensor.inner().seed()),
        samples: tensor.inner().len(),
        detail: "function".into(),
    };
    report_from_operator(&op, group, cutoff, tensor_scale(tensor, coeffs), provenance)
}

/// Intersection of per-layer symmetry algebras: the nullspace of the
/// vertically stacked operator matrices.
pub fn shared_symmetries(
    tensors: &[&LieOperatorTensor],
    group: &MatrixLieGroup,
    coeffs: &[DVector<f64>],
    cutoff: Cutoff,
) -> Result<SymmetryReport> {
    if tensors.is_empty() || tensors.len() != coeffs.len() {
        return Err(Error::InvalidInput(
            "need one coefficient vector per tensor".into(),
        ));
    }
    let dim_g = group.dim();
    if tensors.iter().any(|t| t.dim_g() != dim_g) {
        return Err(Error::DimensionMismatch(
            "tensors were assembled over different groups".into(),
        ));
    }
    let total: usize = tensors.iter().map(|t| t.n_prime()).sum();
    let mut stacked = DMatrix::zeros(total, dim_g);
    let mut row = 0;
    for (t, c) in tensors.iter().zip(coeffs) {
        let op = t.operator_matrix(c)?;
        stacked
            .view_mut((row, 0), (t.n_prime(), dim_g))
            .copy_from(&op);
        row += t.n_prime();
    }
    let provenance = Provenance {
        seed: tensors.first().map(|t| t.inner().seed()),
        samples: tensors.iter().map(|t| t.inner().len()).sum(),
        detail: format!("stack of {}", tensors.len()),
    };
    let scale = tensors
        .iter()
        .zip(coeffs)
        .map(|(t, c)| tensor_scale(t, c))
        .fold(0.0_f64, f64::max);
    report_from_operator(&stacked, group, cutoff, scale, provenance)
}

/// A sampled submanifold: points with optional orthonormal tangent frames.
#[derive(Clone, Debug)]
pub struct PointCloud {
    points: Vec<DVector<f64>>,
    frames: Option<Vec<DMatrix<f64>>>,
    intrinsic_dim: usize,
}

impl PointCloud {
    pub fn new(points: Vec<DVector<f64>>, intrinsic_dim: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("empty point cloud".into()));
        }
        let d = points[0].len();
        if points.iter().any(|p| p.len() != d) || intrinsic_dim > d {
            return Err(Error::DimensionMismatch("inconsistent point cloud".into()));
        }
        Ok(Self {
            points,
            frames: None,
            intrinsic_dim,
        })
    }

    /// Attach tangent frames (`d x m`, orthonormal columns).
    pub fn with_frames(mut self, frames: Vec<DMatrix<f64>>) -> Result<Self> {
        if frames.len() != self.points.len() {
            return Err(Error::DimensionMismatch(
                "one frame per point required".into(),
            ));
        }
        let d = self.ambient_dim();
        for u in &frames {
            if u.shape() != (d, self.intrinsic_dim) {
                return Err(Error::DimensionMismatch("frame shape mismatch".into()));
            }
            let gram = u.transpose() * u;
            if (gram - DMatrix::identity(self.intrinsic_dim, self.intrinsic_dim)).norm() > 1e-10 {
                return Err(Error::InvalidInput("frames must be orthonormal".into()));
            }
        }
        self.frames = Some(frames);
        Ok(self)
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn frames(&self) -> Option<&[DMatrix<f64>]> {
        self.frames.as_deref()
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Default neighborhood size for local PCA.
pub fn default_k_neighbors(intrinsic_dim: usize) -> usize {
    (2 * intrinsic_dim + 2).max(10)
}

/// Estimate tangent frames by local principal component analysis: for each
/// point, the top `m` principal directions of its `k` nearest neighbors
/// (the point itself excluded) after centering.
pub fn estimate_tangent_frames(cloud: &PointCloud, k_neighbors: usize) -> Result<PointCloud> {
    let m = cloud.intrinsic_dim();
    if k_neighbors < m {
        return Err(Error::InvalidInput(format!(
            "k_neighbors {} below intrinsic dimension {}",
            k_neighbors, m
        )));
    }
    if cloud.len() < k_neighbors + 1 {
        return Err(Error::InsufficientSamples {
            got: cloud.len(),
            need: k_neighbors + 1,
        });
    }
    let d = cloud.ambient_dim();
    let mut frames = Vec::with_capacity(cloud.len());
    for (idx, p) in cloud.points().iter().enumerate() {
        let mut order: Vec<usize> = (0..cloud.len()).filter(|&i| i != idx).collect();
        order.sort_by(|&a, &b| {
            let da = (&cloud.points()[a] - p).norm_squared();
            let db = (&cloud.points()[b] - p).norm_squared();
            da.partial_cmp(&db).expect("finite distances")
        });
        let neighbors = &order[..k_neighbors];
        let mut mean = DVector::zeros(d);
        for &i in neighbors {
            mean += &cloud.points()[i];
        }
        mean /= k_neighbors as f64;
        let mut centered = DMatrix::zeros(d, k_neighbors);
        for (c, &i) in neighbors.iter().enumerate() {
            centered.set_column(c, &(&cloud.points()[i] - &mean));
        }
        let mut svd = centered.svd(true, false);
        svd.sort_by_singular_values();
        let u = svd.u.expect("svd u");
        frames.push(u.columns(0, m).clone_owned());
    }
    PointCloud::new(cloud.points().to_vec(), m)?.with_frames(frames)
}

/// Symmetries of a sampled submanifold: the nullspace of the operator whose
/// `(k)`-th column stacks the normal components `(I - U U^T) theta(xi_k)_z`
/// over all sample points (scaled by `1/sqrt(M)`), so its Gram matrix is the
/// positive-semidefinite `S` operator.
pub fn pointcloud_symmetries(
    cloud: &PointCloud,
    group: &MatrixLieGroup,
    rep: &Representation,
    cutoff: Cutoff,
) -> Result<SymmetryReport> {
    let frames = cloud
        .frames()
        .ok_or_else(|| Error::InvalidInput("point cloud has no tangent frames".into()))?;
    if rep.vec_dim() != cloud.ambient_dim() {
        return Err(Error::DimensionMismatch(
            "representation does not act on the cloud's ambient space".into(),
        ));
    }
    let d = cloud.ambient_dim();
    let m = cloud.len();
    let dim_g = group.dim();
    let scale = 1.0 / (m as f64).sqrt();
    let mut op = DMatrix::zeros(m * d, dim_g);
    let mut gen_scale = 0.0_f64;
    for k in 0..dim_g {
        let xi = group.basis_element(k);
        let (a, b) = rep.algebra_affine(&xi.matrix);
        let mut col_sq = 0.0;
        for (p, (z, u)) in cloud.points().iter().zip(frames).enumerate() {
            let gen = -(&a * z + &b);
            col_sq += (scale * gen.norm()).powi(2);
            let normal = &gen - u * (u.transpose() * &gen);
            op.view_mut((p * d, k), (d, 1)).copy_from(&(normal * scale));
        }
        gen_scale = gen_scale.max(col_sq.sqrt());
    }
    let provenance = Provenance {
        seed: None,
        samples: m,
        detail: "point cloud".into(),
    };
    report_from_operator(&op, group, cutoff, gen_scale, provenance)
}

/// How tangent frames of the graph `{(x, F(x))}` are obtained.
pub enum GraphFrames<'a> {
    /// `U = [I; J_F(x)]` from a known model.
    Analytic {
        dict: &'a Dictionary,
        coeffs: &'a DVector<f64>,
    },
    /// Local PCA on the concatenated pairs.
    Estimated { k_neighbors: usize },
}

/// Symmetries of an input-output dataset viewed as a graph submanifold of
/// `R^m x R^n`, using graph-adapted projections `P = U (E U)^{-1} E` with
/// `E = [I 0]`.
pub fn graph_symmetries(
    pairs: &[(DVector<f64>, DVector<f64>)],
    pair_action: &ActionPair,
    frames: GraphFrames,
    cutoff: Cutoff,
) -> Result<SymmetryReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no data pairs".into()));
    }
    let m_in = pairs[0].0.len();
    let n_out = pairs[0].1.len();
    let d = m_in + n_out;
    let count = pairs.len();
    let group = pair_action.group();
    let dim_g = group.dim();

    // tall frames (not necessarily orthonormal) spanning each tangent space
    let tall_frames: Vec<DMatrix<f64>> = match frames {
        GraphFrames::Analytic { dict, coeffs } => pairs
            .iter()
            .map(|(x, _)| {
                let jac = dict.jacobian_model(coeffs, x)?;
                let mut u = DMatrix::zeros(d, m_in);
                u.view_mut((0, 0), (m_in, m_in)).fill_with_identity();
                u.view_mut((m_in, 0), (n_out, m_in)).copy_from(&jac);
                Ok(u)
            })
            .collect::<Result<_>>()?,
        GraphFrames::Estimated { k_neighbors } => {
            let points = pairs
                .iter()
                .map(|(x, y)| {
                    let mut z = DVector::zeros(d);
                    z.rows_mut(0, m_in).copy_from(x);
                    z.rows_mut(m_in, n_out).copy_from(y);
                    z
                })
                .collect();
            let cloud = estimate_tangent_frames(&PointCloud::new(points, m_in)?, k_neighbors)?;
            cloud.frames().expect("frames just estimated").to_vec()
        }
    };

    let scale = 1.0 / (count as f64).sqrt();
    let mut op = DMatrix::zeros(count * d, dim_g);
    let mut gen_scale = 0.0_f64;
    for k in 0..dim_g {
        let xi = group.basis_element(k);
        let (a_in, b_in) = pair_action.rep_in().algebra_affine(&xi.matrix);
        let (a_out, b_out) = pair_action.rep_out().algebra_affine(&xi.matrix);
        let mut col_sq = 0.0;
        for (p, ((x, y), u)) in pairs.iter().zip(&tall_frames).enumerate() {
            let mut theta = DVector::zeros(d);
            theta.rows_mut(0, m_in).copy_from(&-(&a_in * x + &b_in));
            theta.rows_mut(m_in, n_out).copy_from(&-(&a_out * y + &b_out));
            col_sq += (scale * theta.norm()).powi(2);
            // P = U (E U)^{-1} E with E = [I 0]
            let eu = u.rows(0, m_in).clone_owned();
            let eu_inv = eu.try_inverse().ok_or_else(|| {
                Error::InvalidInput("singular E*U: frame is not graph-like".into())
            })?;
            let p_theta = u * (eu_inv * theta.rows(0, m_in).clone_owned());
            let normal = (&theta - p_theta) * scale;
            op.view_mut((p * d, k), (d, 1)).copy_from(&normal);
        }
        gen_scale = gen_scale.max(col_sq.sqrt());
    }
    let provenance = Provenance {
        seed: None,
        samples: count,
        detail: "graph".into(),
    };
    report_from_operator(&op, group, cutoff, gen_scale, provenance)
}

/// Conserved quantities of `dx/dt = F(x)`: the nullspace of the sampled
/// operator `f -> (df/dx) F` over a scalar candidate dictionary.
pub fn conserved_quantities(
    field_dict: &Dictionary,
    field_coeffs: &DVector<f64>,
    candidate_dict: &Dictionary,
    inner: &SampledInnerProduct,
    tol_rel: f64,
) -> Result<EquivariantBasis> {
    if candidate_dict.input_dim() != field_dict.input_dim() {
        return Err(Error::DimensionMismatch(
            "candidates and field live on different spaces".into(),
        ));
    }
    let fields: Vec<DVector<f64>> = inner
        .points()
        .iter()
        .map(|x| field_dict.evaluate_model(field_coeffs, x))
        .collect::<Result<_>>()?;
    let out_dim = candidate_dict.output_dim();
    let mut op = DMatrix::zeros(inner.len() * out_dim, candidate_dict.len());
    for j in 0..candidate_dict.len() {
        let vals: Vec<DVector<f64>> = inner
            .points()
            .iter()
            .zip(&fields)
            .map(|(x, f)| candidate_dict.jacobian_entry(j, x) * f)
            .collect();
        op.set_column(j, &inner.embed_values(&vals));
    }
    let (singular_values, columns) = svd_nullspace(&op, tol_rel, None);
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let residuals = (0..columns.ncols())
        .map(|j| (&op * columns.column(j)).norm())
        .collect();
    Ok(EquivariantBasis {
        columns,
        singular_values,
        residuals,
        cutoff: tol_rel * sigma_max,
    })
}

/// Symmetries of the vector field `F`: the nullspace of
/// `xi -> [theta(xi), F] = J_F theta(xi) - J_theta F`, discretized on the
/// sample points. `rep` is the (linear) action on the state space.
pub fn vectorfield_symmetries(
    field_dict: &Dictionary,
    field_coeffs: &DVector<f64>,
    group: &MatrixLieGroup,
    rep: &Representation,
    inner: &SampledInnerProduct,
    cutoff: Cutoff,
) -> Result<SymmetryReport> {
    let dim = field_dict.input_dim();
    if field_dict.output_dim() != dim || rep.vec_dim() != dim {
        return Err(Error::DimensionMismatch(
            "vector field must map the state space to itself".into(),
        ));
    }
    let points = inner.points();
    let fields: Vec<DVector<f64>> = points
        .iter()
        .map(|x| field_dict.evaluate_model(field_coeffs, x))
        .collect::<Result<_>>()?;
    let jacs: Vec<DMatrix<f64>> = points
        .iter()
        .map(|x| field_dict.jacobian_model(field_coeffs, x))
        .collect::<Result<_>>()?;
    let dim_g = group.dim();
    let mut op = DMatrix::zeros(inner.len() * dim, dim_g);
    let mut gen_scale = 0.0_f64;
    for k in 0..dim_g {
        let xi = group.basis_element(k);
        let (a, b) = rep.algebra_affine(&xi.matrix);
        let push: Vec<DVector<f64>> = points
            .iter()
            .enumerate()
            .map(|(p, _)| &a * &fields[p])
            .collect();
        let drag: Vec<DVector<f64>> = points
            .iter()
            .enumerate()
            .map(|(p, x)| &jacs[p] * (&a * x + &b))
            .collect();
        let vals: Vec<DVector<f64>> = push.iter().zip(&drag).map(|(u, v)| u - v).collect();
        gen_scale = gen_scale
            .max(inner.embed_values(&push).norm())
            .max(inner.embed_values(&drag).norm());
        op.set_column(k, &inner.embed_values(&vals));
    }
    let provenance = Provenance {
        seed: Some(inner.seed()),
        samples: inner.len(),
        detail: "vector field".into(),
    };
    report_from_operator(&op, group, cutoff, gen_scale, provenance)
}
