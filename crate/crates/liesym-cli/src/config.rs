//! Config schemas and command execution. Configs are strict JSON: unknown
//! keys are rejected so typos fail fast.

use crate::output::{config_hash, matrix_rows, run_dir, write_csv, write_json, Provenance};
use crate::{Failure, RunArgs};
use liesym::discover::{
    default_k_neighbors, estimate_tangent_frames, pointcloud_symmetries, vectorfield_symmetries,
    Cutoff, PointCloud, SymmetryReport,
};
use liesym::dynamics::{make_spring_mass, se3_state_action};
use liesym::enforce::equivariant_function_basis;
use liesym::experiments::{function_symmetry_scan, linear_recovery_sweep, spring_mass_experiment};
use liesym::operators::assemble_lie_tensor;
use liesym::promote::{fit_regularized, nuclear_penalty, PromoteProblem};
use liesym::{
    ActionPair, Cube, Dictionary, GroupDescriptor, Representation, SampledInnerProduct,
    SolverOptions,
};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CutoffSpec {
    #[serde(default)]
    relative: Option<f64>,
    #[serde(default)]
    absolute: Option<f64>,
}

impl CutoffSpec {
    fn build(&self) -> Result<Cutoff, Failure> {
        match (self.relative, self.absolute) {
            (Some(_), Some(_)) => Err(Failure::Config(
                "cutoff: set either relative or absolute, not both".into(),
            )),
            (None, Some(a)) => Ok(Cutoff::Absolute(a)),
            (Some(r), None) => Ok(Cutoff::Relative(r)),
            (None, None) => Ok(Cutoff::default()),
        }
    }
}

fn default_cutoff() -> Result<Cutoff, Failure> {
    Ok(Cutoff::default())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DictSpec {
    input_dim: usize,
    output_dim: usize,
    degree: u32,
}

impl DictSpec {
    fn build(&self) -> Result<Dictionary, Failure> {
        Ok(Dictionary::polynomial(
            self.input_dim,
            self.output_dim,
            self.degree,
        )?)
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
enum DiscoverInput {
    /// A fixed polynomial model given by dictionary coefficients.
    Polynomial {
        dictionary: DictSpec,
        coefficients: Vec<f64>,
        samples: usize,
        seed: u64,
    },
    /// A point cloud loaded from CSV (one ambient point per row).
    PointCloud {
        csv: PathBuf,
        intrinsic_dim: usize,
        #[serde(default)]
        k_neighbors: Option<usize>,
    },
    /// The assembled spring-mass vector field under the SE(3) state action.
    SpringMass {
        particles: usize,
        system_seed: u64,
        samples: usize,
        seed: u64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscoverConfig {
    #[serde(default)]
    #[allow(dead_code)]
    command: Option<String>,
    group: GroupDescriptor,
    #[serde(default)]
    cutoff: Option<CutoffSpec>,
    input: DiscoverInput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnforceConfig {
    #[serde(default)]
    #[allow(dead_code)]
    command: Option<String>,
    group: GroupDescriptor,
    dictionary: DictSpec,
    samples: usize,
    seed: u64,
    #[serde(default)]
    tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
enum DataSpec {
    /// CSV rows `x_1..x_m, y_1..y_n` with dimensions from the dictionary.
    Csv { path: PathBuf },
    /// Noiseless samples of a dictionary model at random points.
    Synthetic {
        coefficients: Vec<f64>,
        samples: usize,
        seed: u64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitConfig {
    #[serde(default)]
    #[allow(dead_code)]
    command: Option<String>,
    group: GroupDescriptor,
    dictionary: DictSpec,
    data: DataSpec,
    gammas: Vec<f64>,
    samples: usize,
    seed: u64,
    #[serde(default)]
    solver: SolverOptions,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyrecConfig {
    #[serde(default)]
    #[allow(dead_code)]
    command: Option<String>,
    group: GroupDescriptor,
    n: usize,
    r_values: Vec<usize>,
    degree_phi: u32,
    trials: usize,
    samples: usize,
    seed: u64,
    #[serde(default)]
    solver: SolverOptions,
    #[serde(default = "one")]
    workers: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpringMassConfig {
    #[serde(default)]
    #[allow(dead_code)]
    command: Option<String>,
    seed: u64,
    gammas: Vec<f64>,
    #[serde(default)]
    solver: SolverOptions,
}

fn load<T: serde::de::DeserializeOwned>(bytes: &[u8], command: &str) -> Result<T, Failure> {
    let parsed: T = serde_json::from_slice(bytes)
        .map_err(|e| Failure::Config(format!("parsing config: {e}")))?;
    // cross-check an embedded command name when present
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(declared) = value.get("command").and_then(|v| v.as_str()) {
        if declared != command {
            return Err(Failure::Config(format!(
                "config declares command {declared:?} but {command:?} was invoked"
            )));
        }
    }
    Ok(parsed)
}

pub fn run(command: &str, args: &RunArgs) -> Result<PathBuf, Failure> {
    let bytes = std::fs::read(&args.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    let hash = config_hash(&bytes);
    let dir = run_dir(&args.out, &hash, &bytes)?;
    match command {
        "discover" => cmd_discover(load(&bytes, command)?, &dir, &hash)?,
        "enforce" => cmd_enforce(load(&bytes, command)?, &dir, &hash)?,
        "fit" => cmd_fit(load(&bytes, command)?, &dir, &hash)?,
        "exp-polyrec" => cmd_polyrec(load(&bytes, command)?, &dir, &hash)?,
        "exp-springmass" => cmd_springmass(load(&bytes, command)?, &dir, &hash)?,
        other => return Err(Failure::Config(format!("unknown command {other}"))),
    }
    Ok(dir)
}

#[derive(Serialize)]
struct ReportFile {
    provenance: Provenance,
    report: liesym::discover::ReportArtifact,
}

fn emit_report(
    dir: &Path,
    prov: Provenance,
    report: &SymmetryReport,
) -> Result<(), Failure> {
    let rows: Vec<Vec<String>> = report
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, s)| vec![i.to_string(), format!("{s:e}")])
        .collect();
    write_csv(dir, "spectrum.csv", &prov, "index,singular_value", &rows)?;
    write_json(
        dir,
        "report.json",
        &ReportFile {
            provenance: prov,
            report: report.artifact(),
        },
    )
}

fn read_pointcloud_csv(path: &Path, intrinsic_dim: usize) -> Result<PointCloud, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse()).collect();
        match vals {
            Ok(v) => points.push(DVector::from_vec(v)),
            Err(_) if lineno == 0 => continue, // header row
            Err(e) => {
                return Err(Failure::Config(format!(
                    "{}:{}: {e}",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(PointCloud::new(points, intrinsic_dim)?)
}

fn cmd_discover(cfg: DiscoverConfig, dir: &Path, hash: &str) -> Result<(), Failure> {
    let group = cfg.group.build()?;
    let cutoff = cfg.cutoff.as_ref().map_or_else(default_cutoff, CutoffSpec::build)?;
    let (report, seed) = match &cfg.input {
        DiscoverInput::Polynomial {
            dictionary,
            coefficients,
            samples,
            seed,
        } => {
            let dict = dictionary.build()?;
            if coefficients.len() != dict.len() {
                return Err(Failure::Config(format!(
                    "expected {} coefficients, got {}",
                    dict.len(),
                    coefficients.len()
                )));
            }
            let coeffs = DVector::from_vec(coefficients.clone());
            let (report, _) =
                function_symmetry_scan(&dict, &coeffs, &group, *samples, *seed, cutoff)?;
            (report, Some(*seed))
        }
        DiscoverInput::PointCloud {
            csv,
            intrinsic_dim,
            k_neighbors,
        } => {
            let cloud = read_pointcloud_csv(csv, *intrinsic_dim)?;
            let k = k_neighbors.unwrap_or_else(|| default_k_neighbors(*intrinsic_dim));
            let framed = estimate_tangent_frames(&cloud, k)?;
            let rep = Representation::identity(&group);
            (pointcloud_symmetries(&framed, &group, &rep, cutoff)?, None)
        }
        DiscoverInput::SpringMass {
            particles,
            system_seed,
            samples,
            seed,
        } => {
            let sys = make_spring_mass(*particles, *system_seed)?;
            let (dict, coeffs) = sys.field()?;
            let (g, rep) = se3_state_action(*particles)?;
            let inner = SampledInnerProduct::build(
                Cube::symmetric(sys.state_dim()),
                *samples,
                *seed,
                None,
            )?;
            let report = vectorfield_symmetries(&dict, &coeffs, &g, &rep, &inner, cutoff)?;
            (report, Some(*seed))
        }
    };
    emit_report(dir, Provenance::new("discover", hash, seed), &report)
}

#[derive(Serialize)]
struct BasisFile {
    provenance: Provenance,
    columns: Vec<Vec<f64>>,
    singular_values: Vec<f64>,
    residuals: Vec<f64>,
    cutoff: f64,
}

fn cmd_enforce(cfg: EnforceConfig, dir: &Path, hash: &str) -> Result<(), Failure> {
    let group = cfg.group.build()?;
    let dict = cfg.dictionary.build()?;
    let pair = ActionPair::new(
        group.clone(),
        Representation::identity(&group),
        Representation::trivial(dict.output_dim()),
    );
    let inner = SampledInnerProduct::build(
        Cube::symmetric(dict.input_dim()),
        cfg.samples,
        cfg.seed,
        None,
    )?;
    let tensor = assemble_lie_tensor(&pair, &dict, &inner)?;
    let basis = equivariant_function_basis(&tensor, &pair, &dict, cfg.tol)?;
    let prov = Provenance::new("enforce", hash, Some(cfg.seed));
    let spectrum: Vec<Vec<String>> = basis
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, s)| vec![i.to_string(), format!("{s:e}")])
        .collect();
    write_csv(dir, "spectrum.csv", &prov, "index,singular_value", &spectrum)?;
    let residuals: Vec<Vec<String>> = basis
        .residuals
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i.to_string(), format!("{r:e}")])
        .collect();
    write_csv(dir, "residuals.csv", &prov, "column,residual", &residuals)?;
    write_json(
        dir,
        "basis.json",
        &BasisFile {
            provenance: prov,
            columns: (0..basis.dim())
                .map(|j| basis.columns.column(j).iter().copied().collect())
                .collect(),
            singular_values: basis.singular_values.clone(),
            residuals: basis.residuals.clone(),
            cutoff: basis.cutoff,
        },
    )
}

fn read_data_csv(
    path: &Path,
    dict: &Dictionary,
) -> Result<Vec<(DVector<f64>, DVector<f64>)>, Failure> {
    let m = dict.input_dim();
    let n = dict.output_dim();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse()).collect();
        let vals = match vals {
            Ok(v) => v,
            Err(_) if lineno == 0 => continue,
            Err(e) => {
                return Err(Failure::Config(format!(
                    "{}:{}: {e}",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        if vals.len() != m + n {
            return Err(Failure::Config(format!(
                "{}:{}: expected {} columns, got {}",
                path.display(),
                lineno + 1,
                m + n,
                vals.len()
            )));
        }
        out.push((
            DVector::from_vec(vals[..m].to_vec()),
            DVector::from_vec(vals[m..].to_vec()),
        ));
    }
    Ok(out)
}

#[derive(Serialize)]
struct FitFile {
    provenance: Provenance,
    gammas: Vec<f64>,
    coefficients: Vec<Vec<f64>>,
}

fn cmd_fit(cfg: FitConfig, dir: &Path, hash: &str) -> Result<(), Failure> {
    let group = cfg.group.build()?;
    let dict = cfg.dictionary.build()?;
    let data = match &cfg.data {
        DataSpec::Csv { path } => read_data_csv(path, &dict)?,
        DataSpec::Synthetic {
            coefficients,
            samples,
            seed,
        } => {
            if coefficients.len() != dict.len() {
                return Err(Failure::Config(format!(
                    "expected {} coefficients, got {}",
                    dict.len(),
                    coefficients.len()
                )));
            }
            let truth = DVector::from_vec(coefficients.clone());
            let sampler = SampledInnerProduct::build(
                Cube::symmetric(dict.input_dim()),
                *samples,
                *seed,
                None,
            )?;
            sampler
                .points()
                .iter()
                .map(|x| Ok((x.clone(), dict.evaluate_model(&truth, x)?)))
                .collect::<Result<Vec<_>, liesym::Error>>()?
        }
    };
    let pair = ActionPair::new(
        group.clone(),
        Representation::identity(&group),
        Representation::trivial(dict.output_dim()),
    );
    let inner = SampledInnerProduct::build(
        Cube::symmetric(dict.input_dim()),
        cfg.samples,
        cfg.seed,
        None,
    )?;
    let tensor = assemble_lie_tensor(&pair, &dict, &inner)?;
    let prov = Provenance::new("fit", hash, Some(cfg.seed));
    let mut rows = Vec::new();
    let mut all_coeffs = Vec::new();
    let mut any_diverged = false;
    for &gamma in &cfg.gammas {
        let fit = fit_regularized(&PromoteProblem {
            tensor: &tensor,
            dict: &dict,
            data: &data,
            gamma,
            options: cfg.solver,
        })?;
        let mse: f64 = data
            .iter()
            .map(|(x, y)| {
                Ok::<f64, liesym::Error>(
                    (dict.evaluate_model(&fit.coefficients, x)? - y).norm_squared(),
                )
            })
            .sum::<Result<f64, _>>()?
            / data.len() as f64;
        let (penalty, _) = nuclear_penalty(&tensor, &fit.coefficients)?;
        any_diverged |= !fit.converged;
        rows.push(vec![
            format!("{gamma:e}"),
            format!("{mse:e}"),
            format!("{penalty:e}"),
            fit.iterations.to_string(),
            fit.converged.to_string(),
        ]);
        all_coeffs.push(fit.coefficients.iter().copied().collect());
    }
    write_csv(
        dir,
        "fits.csv",
        &prov,
        "gamma,mse,penalty,iterations,converged",
        &rows,
    )?;
    write_json(
        dir,
        "coefficients.json",
        &FitFile {
            provenance: prov,
            gammas: cfg.gammas.clone(),
            coefficients: all_coeffs,
        },
    )?;
    if any_diverged {
        return Err(Failure::Numerical(
            "solver did not converge for at least one gamma".into(),
        ));
    }
    Ok(())
}

fn cmd_polyrec(cfg: PolyrecConfig, dir: &Path, hash: &str) -> Result<(), Failure> {
    let group = cfg.group.build()?;
    let prov = Provenance::new("exp-polyrec", hash, Some(cfg.seed));
    let mut sweep_rows = Vec::new();
    let mut summary_rows = Vec::new();
    for &r in &cfg.r_values {
        let sweep = linear_recovery_sweep(
            cfg.n,
            r,
            cfg.degree_phi,
            &group,
            cfg.trials,
            cfg.samples,
            cfg.seed,
            cfg.solver,
            cfg.workers,
        )?;
        let mut stars = Vec::new();
        for (t, trial) in sweep.trials.iter().enumerate() {
            let shown = trial
                .n_star
                .map_or("unrecovered".to_string(), |n| n.to_string());
            sweep_rows.push(vec![r.to_string(), t.to_string(), shown]);
            if let Some(n) = trial.n_star {
                stars.push(n);
            }
        }
        let (min, max) = (
            stars.iter().min().copied(),
            stars.iter().max().copied(),
        );
        let mean = if stars.is_empty() {
            f64::NAN
        } else {
            stars.iter().sum::<usize>() as f64 / stars.len() as f64
        };
        summary_rows.push(vec![
            r.to_string(),
            min.map_or("nan".into(), |v| v.to_string()),
            format!("{mean}"),
            max.map_or("nan".into(), |v| v.to_string()),
            sweep.baseline.to_string(),
        ]);
    }
    write_csv(dir, "sweep.csv", &prov, "r,trial,n_star", &sweep_rows)?;
    write_csv(
        dir,
        "summary.csv",
        &prov,
        "r,min_n_star,mean_n_star,max_n_star,baseline",
        &summary_rows,
    )
}

#[derive(Serialize)]
struct SpringMassFile {
    provenance: Provenance,
    nuclear: BranchSummary,
    l1: BranchSummary,
}

#[derive(Serialize)]
struct BranchSummary {
    gamma: f64,
    train_mse: f64,
    frobenius_error: f64,
    trajectory_error: f64,
    converged: bool,
}

fn cmd_springmass(cfg: SpringMassConfig, dir: &Path, hash: &str) -> Result<(), Failure> {
    let out = spring_mass_experiment(cfg.seed, &cfg.gammas, cfg.solver)?;
    let prov = Provenance::new("exp-springmass", hash, Some(cfg.seed));
    let summary = |b: &liesym::experiments::SpringMassBranch| BranchSummary {
        gamma: b.gamma,
        train_mse: b.train_mse,
        frobenius_error: b.frobenius_error,
        trajectory_error: b.trajectory_error,
        converged: b.converged,
    };
    write_csv(
        dir,
        "errors.csv",
        &prov,
        "branch,gamma,train_mse,frobenius_error,trajectory_error",
        &[
            vec![
                "nuclear".into(),
                format!("{:e}", out.nuclear.gamma),
                format!("{:e}", out.nuclear.train_mse),
                format!("{:e}", out.nuclear.frobenius_error),
                format!("{:e}", out.nuclear.trajectory_error),
            ],
            vec![
                "l1".into(),
                format!("{:e}", out.l1.gamma),
                format!("{:e}", out.l1.train_mse),
                format!("{:e}", out.l1.frobenius_error),
                format!("{:e}", out.l1.trajectory_error),
            ],
        ],
    )?;
    write_csv(dir, "a_true.csv", &prov, "", &matrix_rows(&out.a_true))?;
    write_csv(
        dir,
        "a_nuclear.csv",
        &prov,
        "",
        &matrix_rows(&out.nuclear.matrix),
    )?;
    write_csv(dir, "a_l1.csv", &prov, "", &matrix_rows(&out.l1.matrix))?;
    write_json(
        dir,
        "report.json",
        &SpringMassFile {
            provenance: prov,
            nuclear: summary(&out.nuclear),
            l1: summary(&out.l1),
        },
    )?;
    Ok(())
}
