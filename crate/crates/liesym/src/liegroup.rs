//! Matrix Lie groups, their Lie algebras, exponential maps, and brackets.
//!
//! Each group carries an explicit orthonormal basis of its Lie algebra under
//! the Frobenius inner product `<xi, eta> = Tr(xi^T eta)`, plus one group
//! element per non-identity connected component. Basis ordering is
//! deterministic:
//!
//! - `so(n)` / `o(n)`: `(E_ij - E_ji)/sqrt(2)` for `i < j` in lexicographic
//!   order of `(i, j)`;
//! - `se(n)`: the `so(n)` basis embedded in the top-left block, followed by
//!   the translation generators `E_{i,n}` for `i = 0..n`;
//! - `t(n)`: translation generators `E_{i,n}` in homogeneous coordinates;
//! - `gl(n)`: the matrix units `E_ij` in row-major order;
//! - direct products: factor bases embedded block-diagonally, in factor order.

use crate::error::{Error, Result};
use crate::linalg::expm;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKind {
    #[serde(rename = "SO")]
    SpecialOrthogonal,
    #[serde(rename = "SE")]
    SpecialEuclidean,
    #[serde(rename = "O")]
    Orthogonal,
    #[serde(rename = "GL")]
    GeneralLinear,
    #[serde(rename = "T")]
    Translation,
    #[serde(rename = "product")]
    DirectProduct,
}

/// A matrix Lie group with an orthonormal algebra basis and representatives
/// of its non-identity connected components. Immutable after construction.
#[derive(Clone, Debug)]
pub struct MatrixLieGroup {
    kind: GroupKind,
    n: usize,
    ambient_dim: usize,
    algebra_basis: Vec<DMatrix<f64>>,
    component_reps: Vec<DMatrix<f64>>,
    factors: Vec<MatrixLieGroup>,
}

/// An element of a group's Lie algebra, stored both as coefficients in the
/// group's algebra basis and as the induced ambient matrix.
#[derive(Clone, Debug)]
pub struct LieAlgebraElement {
    pub coeffs: DVector<f64>,
    pub matrix: DMatrix<f64>,
}

fn unit(n: usize, i: usize, j: usize, v: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    m[(i, j)] = v;
    m
}

fn so_basis(n: usize, ambient: usize) -> Vec<DMatrix<f64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut basis = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let mut m = DMatrix::zeros(ambient, ambient);
            m[(i, j)] = s;
            m[(j, i)] = -s;
            basis.push(m);
        }
    }
    basis
}

impl MatrixLieGroup {
    /// Build a group of the given kind acting on `R^n`. For `SE(n)` and
    /// `T(n)` the ambient matrices are `(n+1) x (n+1)` homogeneous blocks.
    pub fn new(kind: GroupKind, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::UnsupportedGroup(format!("{kind:?} with n = {n}")));
        }
        let (ambient, algebra_basis, component_reps) = match kind {
            GroupKind::SpecialOrthogonal => (n, so_basis(n, n), Vec::new()),
            GroupKind::Orthogonal => {
                let mut refl = DMatrix::identity(n, n);
                refl[(0, 0)] = -1.0;
                (n, so_basis(n, n), vec![refl])
            }
            GroupKind::SpecialEuclidean => {
                let mut basis = so_basis(n, n + 1);
                for i in 0..n {
                    basis.push(unit(n + 1, i, n, 1.0));
                }
                (n + 1, basis, Vec::new())
            }
            GroupKind::Translation => {
                let basis = (0..n).map(|i| unit(n + 1, i, n, 1.0)).collect();
                (n + 1, basis, Vec::new())
            }
            GroupKind::GeneralLinear => {
                let mut basis = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        basis.push(unit(n, i, j, 1.0));
                    }
                }
                let mut refl = DMatrix::identity(n, n);
                refl[(0, 0)] = -1.0;
                (n, basis, vec![refl])
            }
            GroupKind::DirectProduct => {
                return Err(Error::UnsupportedGroup(
                    "direct products are built with MatrixLieGroup::direct_product".into(),
                ))
            }
        };
        Ok(Self {
            kind,
            n,
            ambient_dim: ambient,
            algebra_basis,
            component_reps,
            factors: Vec::new(),
        })
    }

    /// Block-diagonal direct product of the given factors. The algebra basis
    /// is the union of block-embedded factor bases; component representatives
    /// are all non-identity combinations of factor representatives.
    pub fn direct_product(factors: Vec<MatrixLieGroup>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::UnsupportedGroup("empty direct product".into()));
        }
        let ambient: usize = factors.iter().map(|f| f.ambient_dim).sum();
        let mut basis = Vec::new();
        let mut offset = 0;
        for f in &factors {
            for b in &f.algebra_basis {
                let mut m = DMatrix::zeros(ambient, ambient);
                m.view_mut((offset, offset), (f.ambient_dim, f.ambient_dim))
                    .copy_from(b);
                basis.push(m);
            }
            offset += f.ambient_dim;
        }
        // every non-identity combination of per-factor components
        let mut reps: Vec<DMatrix<f64>> = vec![DMatrix::identity(ambient, ambient)];
        let mut offset = 0;
        for f in &factors {
            let mut next = Vec::new();
            for base in &reps {
                next.push(base.clone());
                for r in &f.component_reps {
                    let mut m = base.clone();
                    m.view_mut((offset, offset), (f.ambient_dim, f.ambient_dim))
                        .copy_from(r);
                    next.push(m);
                }
            }
            reps = next;
            offset += f.ambient_dim;
        }
        reps.remove(0); // the all-identity combination
        let n = factors.iter().map(|f| f.n).sum();
        Ok(Self {
            kind: GroupKind::DirectProduct,
            n,
            ambient_dim: ambient,
            algebra_basis: basis,
            component_reps: reps,
            factors,
        })
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Side length of the ambient matrices.
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Dimension of the Lie algebra.
    pub fn dim(&self) -> usize {
        self.algebra_basis.len()
    }

    pub fn algebra_basis(&self) -> &[DMatrix<f64>] {
        &self.algebra_basis
    }

    pub fn component_reps(&self) -> &[DMatrix<f64>] {
        &self.component_reps
    }

    pub fn factors(&self) -> &[MatrixLieGroup] {
        &self.factors
    }

    /// True when the group's action on points uses homogeneous coordinates
    /// `x -> (x, 1)` (affine actions of SE(n), T(n), and their products).
    pub fn is_homogeneous(&self) -> bool {
        match self.kind {
            GroupKind::SpecialEuclidean | GroupKind::Translation => true,
            GroupKind::DirectProduct => self.factors.iter().any(|f| f.is_homogeneous()),
            _ => false,
        }
    }

    /// Element from coefficients in the algebra basis.
    pub fn element(&self, coeffs: DVector<f64>) -> Result<LieAlgebraElement> {
        if coeffs.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients, got {}",
                self.dim(),
                coeffs.len()
            )));
        }
        let mut matrix = DMatrix::zeros(self.ambient_dim, self.ambient_dim);
        for (c, b) in coeffs.iter().zip(&self.algebra_basis) {
            matrix += b * *c;
        }
        Ok(LieAlgebraElement { coeffs, matrix })
    }

    pub fn basis_element(&self, k: usize) -> LieAlgebraElement {
        let mut coeffs = DVector::zeros(self.dim());
        coeffs[k] = 1.0;
        self.element(coeffs).expect("basis element")
    }

    /// Random algebra element with standard-normal coefficients.
    pub fn random_element<R: Rng>(&self, rng: &mut R) -> LieAlgebraElement {
        let coeffs = DVector::from_fn(self.dim(), |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        self.element(coeffs).expect("random element")
    }

    /// `exp(t * xi)` via scaling and squaring.
    pub fn exp_map(&self, xi: &LieAlgebraElement, t: f64) -> Result<DMatrix<f64>> {
        if !t.is_finite() {
            return Err(Error::NonFinite("exp_map parameter t".into()));
        }
        expm(&(&xi.matrix * t))
    }

    /// Commutator `[xi, eta] = xi eta - eta xi`, re-expressed in the algebra
    /// basis. Fails when the commutator does not close in the algebra, which
    /// also catches elements from mismatched groups.
    pub fn bracket(
        &self,
        xi: &LieAlgebraElement,
        eta: &LieAlgebraElement,
    ) -> Result<LieAlgebraElement> {
        if xi.matrix.nrows() != self.ambient_dim || eta.matrix.nrows() != self.ambient_dim {
            return Err(Error::DimensionMismatch(
                "bracket arguments not in this group's ambient space".into(),
            ));
        }
        let comm = &xi.matrix * &eta.matrix - &eta.matrix * &xi.matrix;
        let elem = self.project(&comm)?;
        let residual = (&comm - &elem.matrix).norm();
        if residual > 1e-10 * comm.norm().max(1.0) {
            return Err(Error::NotInAlgebra(residual));
        }
        Ok(elem)
    }

    /// Orthogonal projection of an ambient matrix onto the Lie algebra under
    /// the Frobenius inner product.
    pub fn project(&self, a: &DMatrix<f64>) -> Result<LieAlgebraElement> {
        if a.nrows() != self.ambient_dim || a.ncols() != self.ambient_dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {0}x{0} matrix, got {1}x{2}",
                self.ambient_dim,
                a.nrows(),
                a.ncols()
            )));
        }
        let coeffs = DVector::from_fn(self.dim(), |k, _| self.algebra_basis[k].dot(a));
        self.element(coeffs)
    }
}

/// Serializable group descriptor: `{kind, n}` or
/// `{kind: "product", factors: [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDescriptor {
    pub kind: GroupKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<GroupDescriptor>>,
}

impl GroupDescriptor {
    pub fn simple(kind: GroupKind, n: usize) -> Self {
        Self {
            kind,
            n: Some(n),
            factors: None,
        }
    }

    pub fn build(&self) -> Result<MatrixLieGroup> {
        match self.kind {
            GroupKind::DirectProduct => {
                let factors = self
                    .factors
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("product group needs factors".into()))?
                    .iter()
                    .map(|d| d.build())
                    .collect::<Result<Vec<_>>>()?;
                MatrixLieGroup::direct_product(factors)
            }
            kind => {
                let n = self
                    .n
                    .ok_or_else(|| Error::InvalidInput("group descriptor needs n".into()))?;
                MatrixLieGroup::new(kind, n)
            }
        }
    }
}
