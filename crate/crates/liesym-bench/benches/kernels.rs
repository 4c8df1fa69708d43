use criterion::{criterion_group, criterion_main, Criterion};
use liesym::discover::{estimate_tangent_frames, pointcloud_symmetries, Cutoff};
use liesym::liegroup::{GroupKind, MatrixLieGroup};
use liesym::operators::assemble_lie_tensor;
use liesym::promote::{fit_regularized, PromoteProblem};
use liesym::{
    ActionPair, Cube, Dictionary, PointCloud, Representation, SampledInnerProduct, SolverOptions,
};
use nalgebra::DVector;

fn scalar_pair(n: usize) -> (MatrixLieGroup, ActionPair) {
    let g = MatrixLieGroup::new(GroupKind::SpecialEuclidean, n).unwrap();
    let pair = ActionPair::new(
        g.clone(),
        Representation::identity(&g),
        Representation::trivial(1),
    );
    (g, pair)
}

fn bench_exp_map(c: &mut Criterion) {
    let g = MatrixLieGroup::new(GroupKind::SpecialEuclidean, 3).unwrap();
    let coeffs = DVector::from_fn(g.dim(), |i, _| 0.3 + 0.1 * i as f64);
    let xi = g.element(coeffs).unwrap();
    c.bench_function("exp_map se3", |b| {
        b.iter(|| std::hint::black_box(g.exp_map(&xi, 1.0).unwrap()))
    });
}

fn bench_tensor_assembly(c: &mut Criterion) {
    let (_, pair) = scalar_pair(3);
    let dict = Dictionary::polynomial(3, 1, 3).unwrap();
    let inner = SampledInnerProduct::build(Cube::symmetric(3), 3 * dict.len(), 7, None).unwrap();
    c.bench_function("assemble tensor se3 p3", |b| {
        b.iter(|| std::hint::black_box(assemble_lie_tensor(&pair, &dict, &inner).unwrap()))
    });
}

fn bench_admm_fit(c: &mut Criterion) {
    let (_, pair) = scalar_pair(3);
    let dict = Dictionary::polynomial(3, 1, 2).unwrap();
    let inner = SampledInnerProduct::build(Cube::symmetric(3), 3 * dict.len(), 7, None).unwrap();
    let tensor = assemble_lie_tensor(&pair, &dict, &inner).unwrap();
    let mut truth = DVector::zeros(dict.len());
    for (i, slot) in truth.iter_mut().enumerate() {
        *slot = ((i * 7 + 3) % 11) as f64 / 11.0;
    }
    let data: Vec<_> = inner
        .points()
        .iter()
        .take(40)
        .map(|x| (x.clone(), dict.evaluate_model(&truth, x).unwrap()))
        .collect();
    let options = SolverOptions {
        max_iter: 200,
        tol: 1e-6,
        ..Default::default()
    };
    c.bench_function("admm fit gamma 1e-2", |b| {
        b.iter(|| {
            std::hint::black_box(
                fit_regularized(&PromoteProblem {
                    tensor: &tensor,
                    dict: &dict,
                    data: &data,
                    gamma: 1e-2,
                    options,
                })
                .unwrap(),
            )
        })
    });
}

fn bench_pointcloud(c: &mut Criterion) {
    let m = 200;
    let points: Vec<DVector<f64>> = (0..m)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
            DVector::from_vec(vec![t.cos(), t.sin()])
        })
        .collect();
    let cloud = PointCloud::new(points, 1).unwrap();
    let framed = estimate_tangent_frames(&cloud, 12).unwrap();
    let g = MatrixLieGroup::new(GroupKind::SpecialEuclidean, 2).unwrap();
    let rep = Representation::identity(&g);
    c.bench_function("pointcloud scan circle 200", |b| {
        b.iter(|| {
            std::hint::black_box(
                pointcloud_symmetries(&framed, &g, &rep, Cutoff::Absolute(1e-4)).unwrap(),
            )
        })
    });
}

criterion_group!(
    benches,
    bench_exp_map,
    bench_tensor_assembly,
    bench_admm_fit,
    bench_pointcloud
);
criterion_main!(benches);
