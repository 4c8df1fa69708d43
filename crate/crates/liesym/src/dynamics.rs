//! A gravitationally forced spring-mass network used as the worked
//! dynamical system: affine dynamics on a homogeneous state vector, an
//! SE(3) action on that state, a fixed-step RK4 integrator, and initial
//! condition samplers.

use crate::error::{Error, Result};
use crate::fnspace::Dictionary;
use crate::liegroup::{GroupKind, MatrixLieGroup};
use crate::operators::Representation;
use crate::rng::{seeded_rng, streams};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Pairwise-coupled point masses in R^3 under uniform gravity `(0, 0, -1)`.
///
/// The state is `z = (q_1, .., q_n, p_1, .., p_n, 1)` with a trailing
/// homogeneous coordinate, so `dz/dt = A z` is linear even though the force
/// law is affine.
#[derive(Clone, Debug)]
pub struct SpringMassSystem {
    n_particles: usize,
    stiffness: DMatrix<f64>,
    a: DMatrix<f64>,
}

/// Dimension of the homogeneous state vector: `6 n + 1`.
pub fn state_dim(n_particles: usize) -> usize {
    6 * n_particles + 1
}

/// Build a random spring network: `B` has entries uniform on `[0.1, 1]` and
/// the stiffness is `K_ij = sum_k B_ik B_jk` off the diagonal, zero on it.
pub fn make_spring_mass(n_particles: usize, seed: u64) -> Result<SpringMassSystem> {
    if n_particles < 2 {
        return Err(Error::InvalidInput("need at least two particles".into()));
    }
    let mut rng = seeded_rng(seed, streams::STIFFNESS);
    let b = DMatrix::from_fn(n_particles, n_particles, |_, _| rng.gen_range(0.1..1.0));
    let mut k = &b * b.transpose();
    k.fill_diagonal(0.0);
    Ok(SpringMassSystem::from_stiffness(k))
}

impl SpringMassSystem {
    pub fn from_stiffness(stiffness: DMatrix<f64>) -> Self {
        let n = stiffness.nrows();
        let dim = state_dim(n);
        let q = |i: usize| 3 * i;
        let p = |i: usize| 3 * (n + i);
        let mut a = DMatrix::zeros(dim, dim);
        for i in 0..n {
            for r in 0..3 {
                a[(q(i) + r, p(i) + r)] = 1.0;
            }
            let mut row_sum = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let kij = stiffness[(i, j)];
                row_sum += kij;
                for r in 0..3 {
                    a[(p(i) + r, q(j) + r)] = kij;
                }
            }
            for r in 0..3 {
                a[(p(i) + r, q(i) + r)] = -row_sum;
            }
            a[(p(i) + 2, dim - 1)] = -1.0;
        }
        Self {
            n_particles: n,
            stiffness,
            a,
        }
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn state_dim(&self) -> usize {
        state_dim(self.n_particles)
    }

    /// The generator matrix of `dz/dt = A z`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn derivative(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.a * z
    }

    /// The dynamics as coefficients over the linear dictionary on the state
    /// space, for use with the discovery routines.
    pub fn field(&self) -> Result<(Dictionary, DVector<f64>)> {
        let dict = Dictionary::linear(self.state_dim(), self.state_dim())?;
        let coeffs = dict.coeffs_from_matrix(&self.a)?;
        Ok((dict, coeffs))
    }

    pub fn simulate(&self, z0: &DVector<f64>, dt: f64, steps: usize) -> Result<Trajectory> {
        rk4(|z| self.derivative(z), z0, dt, steps)
    }

    /// Total mechanical energy; conserved when gravity is balanced by the
    /// potential term `sum_i q_i^z`.
    pub fn energy(&self, z: &DVector<f64>) -> f64 {
        let n = self.n_particles;
        let mut e = 0.0;
        for i in 0..n {
            let qi = z.fixed_rows::<3>(3 * i);
            let pi = z.fixed_rows::<3>(3 * (n + i));
            e += 0.5 * pi.norm_squared() + qi[2];
            for j in (i + 1)..n {
                let qj = z.fixed_rows::<3>(3 * j);
                e += 0.5 * self.stiffness[(i, j)] * (qi - qj).norm_squared();
            }
        }
        e
    }
}

/// SE(3) acting on the spring-mass state: rotations turn both positions and
/// momenta, translations shift positions through the homogeneous coordinate.
pub fn se3_state_action(n_particles: usize) -> Result<(MatrixLieGroup, Representation)> {
    let group = MatrixLieGroup::new(GroupKind::SpecialEuclidean, 3)?;
    let dim = state_dim(n_particles);
    let n = n_particles;
    let group_map = move |g: &DMatrix<f64>| {
        let mut m = DMatrix::zeros(dim, dim);
        let rot = g.view((0, 0), (3, 3));
        let trans = g.view((0, 3), (3, 1));
        for i in 0..n {
            m.view_mut((3 * i, 3 * i), (3, 3)).copy_from(&rot);
            m.view_mut((3 * i, dim - 1), (3, 1)).copy_from(&trans);
            m.view_mut((3 * (n + i), 3 * (n + i)), (3, 3)).copy_from(&rot);
        }
        m[(dim - 1, dim - 1)] = 1.0;
        m
    };
    let algebra_map = move |xi: &DMatrix<f64>| {
        let mut m = DMatrix::zeros(dim, dim);
        let spin = xi.view((0, 0), (3, 3));
        let shift = xi.view((0, 3), (3, 1));
        for i in 0..n {
            m.view_mut((3 * i, 3 * i), (3, 3)).copy_from(&spin);
            m.view_mut((3 * i, dim - 1), (3, 1)).copy_from(&shift);
            m.view_mut((3 * (n + i), 3 * (n + i)), (3, 3)).copy_from(&spin);
        }
        m
    };
    Ok((group, Representation::from_linear_maps(dim, group_map, algebra_map)))
}

/// States of a fixed-step integration, including the initial state.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

/// Classic fourth-order Runge-Kutta with a fixed step. Fails with a
/// numerical error if the state stops being finite.
pub fn rk4(
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
    z0: &DVector<f64>,
    dt: f64,
    steps: usize,
) -> Result<Trajectory> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidInput("step size must be positive".into()));
    }
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut z = z0.clone();
    times.push(0.0);
    states.push(z.clone());
    for s in 0..steps {
        let k1 = f(&z);
        let k2 = f(&(&z + &k1 * (dt / 2.0)));
        let k3 = f(&(&z + &k2 * (dt / 2.0)));
        let k4 = f(&(&z + &k3 * dt));
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "trajectory diverged at step {}",
                s + 1
            )));
        }
        times.push(dt * (s + 1) as f64);
        states.push(z.clone());
    }
    Ok(Trajectory { times, states })
}

fn gaussian_state(
    n_particles: usize,
    seed: u64,
    q_std: [f64; 3],
    p_std: [f64; 3],
) -> DVector<f64> {
    let mut rng = seeded_rng(seed, streams::INITIAL_CONDITIONS);
    let dim = state_dim(n_particles);
    let mut z = DVector::zeros(dim);
    for i in 0..n_particles {
        for r in 0..3 {
            let g: f64 = rng.sample(StandardNormal);
            z[3 * i + r] = q_std[r] * g;
        }
        for r in 0..3 {
            let g: f64 = rng.sample(StandardNormal);
            z[3 * (n_particles + i) + r] = p_std[r] * g;
        }
    }
    z[dim - 1] = 1.0;
    z
}

/// Initial state confined to the x-z plane: positions have unit standard
/// deviation, momenta 0.1, and all y components are exactly zero.
pub fn planar_initial_state(n_particles: usize, seed: u64) -> DVector<f64> {
    gaussian_state(n_particles, seed, [1.0, 0.0, 1.0], [0.1, 0.0, 0.1])
}

/// Fully three-dimensional initial state with the same scales.
pub fn general_initial_state(n_particles: usize, seed: u64) -> DVector<f64> {
    gaussian_state(n_particles, seed, [1.0, 1.0, 1.0], [0.1, 0.1, 0.1])
}

/// Sample `(z, dz/dt)` training pairs along an exact-derivative trajectory.
pub fn trajectory_pairs(
    system: &SpringMassSystem,
    z0: &DVector<f64>,
    dt: f64,
    steps: usize,
) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
    let traj = system.simulate(z0, dt, steps)?;
    Ok(traj
        .states
        .into_iter()
        .map(|z| {
            let dz = system.derivative(&z);
            (z, dz)
        })
        .collect())
}
