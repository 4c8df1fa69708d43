//! End-to-end acceptance checks. Each test covers one numbered criterion and
//! prints a single PASS line when it holds; run with `--nocapture` to see
//! them.

use liesym::discover::{
    conserved_quantities, estimate_tangent_frames, function_symmetries, pointcloud_symmetries,
    Cutoff, PointCloud,
};
use liesym::dynamics::{make_spring_mass, se3_state_action};
use liesym::enforce::equivariant_function_basis;
use liesym::experiments::{
    feature_symmetry_dim, function_symmetry_scan, linear_recovery_sweep, radial_generator_defect,
    random_radial_function, spring_mass_experiment,
};
use liesym::linalg::max_principal_angle;
use liesym::operators::{assemble_lie_tensor, lie_derivative_matrix};
use liesym::poly::MultiPoly;
use liesym::rng::{seeded_rng, streams};
use liesym::{
    ActionPair, Cube, Dictionary, GroupKind, MatrixLieGroup, Representation,
    SampledInnerProduct, SolverOptions,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[test]
fn criterion_01_symmetry_dimension_oracle() {
    let configs = [(3usize, 1usize), (4, 2), (5, 2)];
    for trial in 0..10u64 {
        let (n, r) = configs[trial as usize % configs.len()];
        let mut rng = seeded_rng(100 + trial, streams::EXPERIMENT);
        let inst = random_radial_function(n, r, 2, &mut rng).unwrap();
        let group = MatrixLieGroup::new(GroupKind::SpecialEuclidean, n).unwrap();
        let samples = 3 * inst.dict.len();
        let (report, _) = function_symmetry_scan(
            &inst.dict,
            &inst.coeffs,
            &group,
            samples,
            200 + trial,
            Cutoff::default(),
        )
        .unwrap();
        assert_eq!(
            report.nullity(),
            feature_symmetry_dim(n, r),
            "(n, r) = ({n}, {r}), trial {trial}"
        );
        for xi in &report.subalgebra {
            let defect = radial_generator_defect(&inst.centers, &xi.matrix);
            assert!(defect < 1e-6, "generator defect {defect:.3e}");
        }
    }
    println!("PASS: criterion 1 - radial-feature symmetry dimensions and generator conditions");
}

#[test]
fn criterion_02_spring_mass_symmetry() {
    let sys = make_spring_mass(5, 7).unwrap();
    let (dict, coeffs) = sys.field().unwrap();
    let (group, rep) = se3_state_action(5).unwrap();
    let inner = SampledInnerProduct::build(Cube::symmetric(31), 120, 11, None).unwrap();
    let report = liesym::discover::vectorfield_symmetries(
        &dict,
        &coeffs,
        &group,
        &rep,
        &inner,
        Cutoff::default(),
    )
    .unwrap();
    assert_eq!(report.nullity(), 4);
    let mut expected = DMatrix::zeros(6, 4);
    expected[(0, 0)] = 1.0; // rotation in the x-y plane
    expected[(3, 1)] = 1.0;
    expected[(4, 2)] = 1.0;
    expected[(5, 3)] = 1.0;
    let angle = max_principal_angle(&report.coeff_matrix(), &expected);
    assert!(angle <= 1e-6, "principal angle {angle:.3e}");
    println!("PASS: criterion 2 - spring-mass SE(3) scan finds translations plus the vertical rotation");
}

#[test]
fn criterion_03_recovery_sample_complexity() {
    let group = MatrixLieGroup::new(GroupKind::Translation, 3).unwrap();
    let options = SolverOptions {
        tol: 1e-9,
        ..SolverOptions::default()
    };
    let mut means = Vec::new();
    for r in [1usize, 2] {
        let sweep = linear_recovery_sweep(3, r, 2, &group, 10, 60, 33, options, 4).unwrap();
        assert_eq!(sweep.baseline, 10);
        for trial in &sweep.trials {
            let n_star = trial.n_star.expect("recovery at the full sample count");
            assert!(n_star <= 10, "r = {r}: N* = {n_star}");
            assert!(trial.successes[9], "r = {r}: failure at N = 10");
        }
        means.push(sweep.mean_n_star().unwrap());
    }
    assert!(
        means[0] < means[1],
        "mean N* not ordered: r=1 gives {:.2}, r=2 gives {:.2}",
        means[0],
        means[1]
    );
    println!(
        "PASS: criterion 3 - constrained recovery needs fewer samples (mean N* {:.1} < {:.1} <= 10)",
        means[0], means[1]
    );
}

#[test]
fn criterion_04_planar_extrapolation() {
    let options = SolverOptions {
        tol: 1e-6,
        max_iter: 500,
        ..SolverOptions::default()
    };
    let out = spring_mass_experiment(42, &[1e-4, 1e-3, 1e-2], options).unwrap();
    assert!(out.nuclear.train_mse < 1e-4);
    assert!(
        2.0 * out.nuclear.frobenius_error <= out.l1.frobenius_error,
        "Frobenius errors {:.3} vs {:.3}",
        out.nuclear.frobenius_error,
        out.l1.frobenius_error
    );
    assert!(
        out.nuclear.trajectory_error < out.l1.trajectory_error,
        "trajectory errors {:.3} vs {:.3}",
        out.nuclear.trajectory_error,
        out.l1.trajectory_error
    );
    // y rows and columns are invisible in the planar data; the symmetry
    // penalty must reconstruct them with the right signs
    let n = 5;
    for i in 0..2 * n {
        for j in 0..2 * n {
            let (r, c) = (3 * i + 1, 3 * j + 1);
            let truth = out.a_true[(r, c)];
            if truth.abs() > 0.1 {
                let fitted = out.nuclear.matrix[(r, c)];
                assert!(
                    fitted * truth > 0.0,
                    "y-block entry ({r}, {c}): fitted {fitted:.3}, true {truth:.3}"
                );
            }
        }
    }
    println!("PASS: criterion 4 - planar training extrapolates to 3-D under the nuclear penalty");
}

#[test]
fn criterion_05_operator_algebra_identities() {
    let group = MatrixLieGroup::new(GroupKind::SpecialEuclidean, 3).unwrap();
    let rep = Representation::identity(&group);
    let pair = ActionPair::new(group.clone(), rep.clone(), rep);
    let dict = Dictionary::polynomial(3, 3, 3).unwrap();
    let inner = SampledInnerProduct::build(Cube::symmetric(3), 200, 5, None).unwrap();
    let mut rng = seeded_rng(55, streams::EXPERIMENT);
    for _ in 0..20 {
        let xi = group.random_element(&mut rng);
        let eta = group.random_element(&mut rng);
        let (m_xi, r1) = lie_derivative_matrix(&pair, &dict, &inner, &xi).unwrap();
        let (m_eta, r2) = lie_derivative_matrix(&pair, &dict, &inner, &eta).unwrap();
        assert!(r1 < 1e-8 && r2 < 1e-8, "span not closed: {r1:.3e}, {r2:.3e}");
        // linearity
        let a = rng.gen_range(-2.0..2.0);
        let b = rng.gen_range(-2.0..2.0);
        let combo = group
            .element(&xi.coeffs * a + &eta.coeffs * b)
            .unwrap();
        let (m_combo, _) = lie_derivative_matrix(&pair, &dict, &inner, &combo).unwrap();
        assert!((&m_combo - (&m_xi * a + &m_eta * b)).norm() < 1e-8);
        // commutator
        let bracket = group.bracket(&xi, &eta).unwrap();
        let (m_bracket, _) = lie_derivative_matrix(&pair, &dict, &inner, &bracket).unwrap();
        let commutator = &m_xi * &m_eta - &m_eta * &m_xi;
        assert!(
            (&m_bracket - commutator).norm() < 1e-8,
            "commutator identity violated"
        );
    }
    println!("PASS: criterion 5 - discretized Lie derivatives are linear and respect the bracket");
}

#[test]
fn criterion_06_enforce_discover_duality() {
    for n in [2usize, 3] {
        let group = MatrixLieGroup::new(GroupKind::SpecialOrthogonal, n).unwrap();
        let pair = ActionPair::new(
            group.clone(),
            Representation::identity(&group),
            Representation::trivial(1),
        );
        let dict = Dictionary::polynomial(n, 1, 2).unwrap();
        let inner = SampledInnerProduct::build(Cube::symmetric(n), 200, 66, None).unwrap();
        let tensor = assemble_lie_tensor(&pair, &dict, &inner).unwrap();
        let basis = equivariant_function_basis(&tensor, &pair, &dict, None).unwrap();
        assert!(basis.dim() >= 2);
        let mut rng = seeded_rng(67, streams::EXPERIMENT);
        for col in 0..basis.dim() {
            let coeffs: DVector<f64> = basis.columns.column(col).clone_owned();
            for _ in 0..20 {
                let g = group
                    .exp_map(&group.random_element(&mut rng), rng.gen_range(-2.0..2.0))
                    .unwrap();
                let vals: Vec<DVector<f64>> = inner
                    .points()
                    .iter()
                    .map(|x| {
                        pair.finite_transform_eval(&dict, &coeffs, &g, x).unwrap()
                            - dict.evaluate_model(&coeffs, x).unwrap()
                    })
                    .collect();
                let res = inner.norm(&vals);
                assert!(res <= 1e-7, "SO({n}) column {col}: residual {res:.3e}");
            }
            let report =
                function_symmetries(&tensor, &group, &coeffs, Cutoff::default()).unwrap();
            assert_eq!(report.nullity(), group.dim(), "SO({n}) column {col}");
        }
    }
    println!("PASS: criterion 6 - enforced bases are transform-invariant and fully symmetric");
}

fn circle_cloud(count: usize, with_frames: bool) -> PointCloud {
    let pts: Vec<DVector<f64>> = (0..count)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
            DVector::from_vec(vec![t.cos(), t.sin()])
        })
        .collect();
    let cloud = PointCloud::new(pts, 1).unwrap();
    if with_frames {
        let frames = (0..count)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                DMatrix::from_column_slice(2, 1, &[-t.sin(), t.cos()])
            })
            .collect();
        cloud.with_frames(frames).unwrap()
    } else {
        cloud
    }
}

fn sphere_cloud(count: usize, seed: u64) -> PointCloud {
    let mut rng = seeded_rng(seed, streams::EXPERIMENT);
    let mut pts = Vec::with_capacity(count);
    let mut frames = Vec::with_capacity(count);
    while pts.len() < count {
        let v = DVector::from_fn(3, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        if v.norm() < 1e-3 {
            continue;
        }
        let x = &v / v.norm();
        // tangent frame orthogonal to the radial direction
        let helper = if x[0].abs() < 0.9 {
            DVector::from_vec(vec![1.0, 0.0, 0.0])
        } else {
            DVector::from_vec(vec![0.0, 1.0, 0.0])
        };
        let u1 = {
            let u = &helper - &x * x.dot(&helper);
            &u / u.norm()
        };
        let u2 = DVector::from_vec(vec![
            x[1] * u1[2] - x[2] * u1[1],
            x[2] * u1[0] - x[0] * u1[2],
            x[0] * u1[1] - x[1] * u1[0],
        ]);
        let mut f = DMatrix::zeros(3, 2);
        f.set_column(0, &u1);
        f.set_column(1, &u2);
        pts.push(x);
        frames.push(f);
    }
    PointCloud::new(pts, 2).unwrap().with_frames(frames).unwrap()
}

#[test]
fn criterion_07_pointcloud_discovery() {
    let se2 = MatrixLieGroup::new(GroupKind::SpecialEuclidean, 2).unwrap();
    let rep2 = Representation::identity(&se2);
    let se3 = MatrixLieGroup::new(GroupKind::SpecialEuclidean, 3).unwrap();
    let rep3 = Representation::identity(&se3);

    for count in [200usize, 400] {
        let report =
            pointcloud_symmetries(&circle_cloud(count, true), &se2, &rep2, Cutoff::default())
                .unwrap();
        assert_eq!(report.nullity(), 1, "circle with {count} points");
    }
    for count in [500usize, 1000] {
        let report =
            pointcloud_symmetries(&sphere_cloud(count, 70), &se3, &rep3, Cutoff::default())
                .unwrap();
        assert_eq!(report.nullity(), 3, "sphere with {count} points");
    }
    let estimated = estimate_tangent_frames(&circle_cloud(200, false), 12).unwrap();
    let report =
        pointcloud_symmetries(&estimated, &se2, &rep2, Cutoff::Absolute(1e-4)).unwrap();
    assert_eq!(report.nullity(), 1, "circle with PCA tangents");
    println!("PASS: criterion 7 - point-cloud scans report circle/sphere symmetry dimensions");
}

#[test]
fn criterion_08_sampling_certificate() {
    for (m, d) in [(2usize, 3u32), (3, 2)] {
        let dict = Dictionary::polynomial(m, 1, d).unwrap();
        let count = dict.len(); // C(d + m, m)
        for draw in 0..100u64 {
            let inner =
                SampledInnerProduct::build(Cube::symmetric(m), count, 8000 + draw, None).unwrap();
            let (min_sv, max_sv) = inner
                .check_dictionary_gram(&dict)
                .unwrap_or_else(|e| panic!("(m, d) = ({m}, {d}), draw {draw}: {e}"));
            assert!(min_sv > 0.0 && max_sv.is_finite());
        }
    }
    println!("PASS: criterion 8 - certified sample counts give nonsingular Gram matrices");
}

#[test]
fn criterion_09_conserved_quantities() {
    let field_dict = Dictionary::polynomial(2, 2, 1).unwrap();
    let field_coeffs = field_dict
        .coeffs_from_polys(&[MultiPoly::var(2, 1), MultiPoly::var(2, 0).scale(-1.0)])
        .unwrap();
    let candidates = Dictionary::polynomial(2, 1, 2).unwrap();
    let inner = SampledInnerProduct::build(Cube::symmetric(2), 200, 99, None).unwrap();
    let basis =
        conserved_quantities(&field_dict, &field_coeffs, &candidates, &inner, 1e-8).unwrap();
    assert_eq!(basis.dim(), 2);
    let constant = candidates
        .coeffs_from_polys(&[MultiPoly::constant(2, 1.0)])
        .unwrap();
    let radius = candidates
        .coeffs_from_polys(&[MultiPoly::var(2, 0).pow(2).add(&MultiPoly::var(2, 1).pow(2))])
        .unwrap();
    let mut expected = DMatrix::zeros(candidates.len(), 2);
    expected.set_column(0, &(&constant / constant.norm()));
    expected.set_column(1, &(&radius / radius.norm()));
    let angle = max_principal_angle(&basis.columns, &expected);
    assert!(angle <= 1e-6, "principal angle {angle:.3e}");
    println!("PASS: criterion 9 - oscillator conserved quantities span the constants and the radius");
}

#[test]
fn criterion_10_solver_correctness() {
    use liesym::promote::{fit_regularized, nuclear_penalty, PromoteProblem};

    let group = MatrixLieGroup::new(GroupKind::SpecialOrthogonal, 2).unwrap();
    let pair = ActionPair::new(
        group.clone(),
        Representation::identity(&group),
        Representation::trivial(1),
    );
    let dict = Dictionary::polynomial(2, 1, 2).unwrap();
    let inner = SampledInnerProduct::build(Cube::symmetric(2), 12, 101, None).unwrap();
    let tensor = assemble_lie_tensor(&pair, &dict, &inner).unwrap();
    let mut rng = seeded_rng(10, streams::EXPERIMENT);
    let truth = DVector::from_fn(dict.len(), |_, _| rng.gen_range(-1.0..1.0));
    let data: Vec<_> = inner
        .points()
        .iter()
        .map(|x| (x.clone(), dict.evaluate_model(&truth, x).unwrap()))
        .collect();

    // gamma = 0 against the normal equations
    let fit0 = fit_regularized(&PromoteProblem {
        tensor: &tensor,
        dict: &dict,
        data: &data,
        gamma: 0.0,
        options: SolverOptions::default(),
    })
    .unwrap();
    let mut phi = DMatrix::zeros(data.len(), dict.len());
    let mut y = DVector::zeros(data.len());
    for (j, (x, yv)) in data.iter().enumerate() {
        y[j] = yv[0];
        for i in 0..dict.len() {
            phi[(j, i)] = dict.eval_entry(i, x)[0];
        }
    }
    let oracle = (phi.transpose() * &phi)
        .cholesky()
        .unwrap()
        .solve(&(phi.transpose() * &y));
    assert!((&fit0.coefficients - oracle).norm() < 1e-8);

    // convexity of the penalty
    for _ in 0..10 {
        let a = DVector::from_fn(dict.len(), |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(dict.len(), |_, _| rng.gen_range(-1.0..1.0));
        let lam: f64 = rng.gen_range(0.0..1.0);
        let (vm, _) = nuclear_penalty(&tensor, &(&a * lam + &b * (1.0 - lam))).unwrap();
        let (va, _) = nuclear_penalty(&tensor, &a).unwrap();
        let (vb, _) = nuclear_penalty(&tensor, &b).unwrap();
        assert!(vm <= lam * va + (1.0 - lam) * vb + 1e-10);
    }

    // training error monotone in gamma, consensus residual at convergence
    let mut last = -1.0;
    for gamma in [0.0, 1e-3, 1e-2, 1e-1, 1.0] {
        let fit = fit_regularized(&PromoteProblem {
            tensor: &tensor,
            dict: &dict,
            data: &data,
            gamma,
            options: SolverOptions {
                max_iter: 20000,
                ..SolverOptions::default()
            },
        })
        .unwrap();
        let mse: f64 = data
            .iter()
            .map(|(x, yv)| {
                (dict.evaluate_model(&fit.coefficients, x).unwrap() - yv).norm_squared()
            })
            .sum::<f64>()
            / data.len() as f64;
        assert!(mse >= last - 1e-7, "gamma {gamma}: mse {mse} < {last}");
        last = mse;
        if gamma > 0.0 {
            assert!(fit.converged);
            assert!(fit.consensus_residual <= 1e-6);
        }
    }
    println!("PASS: criterion 10 - solver matches the least-squares oracle and behaves convexly");
}
