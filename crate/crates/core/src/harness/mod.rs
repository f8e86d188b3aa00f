//! Configuration-driven experiment runner.
//!
//! A run is split in two halves that communicate through files only:
//!
//! * [`run_quasi_real`] solves the forward problem on a fine Crank–Nicolson
//!   grid and stores the observation `ψ` (plus a manifest describing how it
//!   was generated);
//! * [`run_identification`] reads `ψ` back, refuses it if the manifest does
//!   not match the configuration, runs the selected iteration on the coarser
//!   implicit grid and writes per-iteration errors.
//!
//! [`run_table`] and [`run_sweep`] loop over both halves. Every output file is
//! written to a temporary name first and renamed into place.

mod config;
mod io;

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{ExperimentConfig, InitKind, Method, OmegaKind, SourceKind};
pub use io::{read_field, write_field, Manifest};

use crate::fem::{assemble, interpolate, project_l2, Coefficients, DiscreteOperator, Field, Mesh};
use crate::forward::{solve_cauchy, SourceTerm, TimeGrid, WeightedValueSum};
use crate::inverse::{
    identify_integral, identify_multiplicative, identify_nonlocal, identify_rhs, InitialGuess,
    IterationOptions, IterationReport, ObservationData, Reference,
};
use crate::linalg::SolveOptions;

pub const OBSERVATION_FILE: &str = "observation.txt";
pub const ERRORS_FILE: &str = "errors.csv";
pub const SOURCE_FILE: &str = "source.txt";

/// Errors below this fraction of the initial error are treated as noise when
/// measuring contraction.
const RATIO_NOISE_FLOOR: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Solver(crate::Error),
}

impl HarnessError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status: 2 for bad input, 3 for numerical failures, 1 for
    /// I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Solver(_) => 3,
            HarnessError::Io { .. } => 1,
        }
    }
}

impl From<crate::Error> for HarnessError {
    fn from(e: crate::Error) -> Self {
        use crate::Error as E;
        match e {
            E::InvalidArgument(_) | E::DimensionMismatch { .. } | E::InvalidCoefficient { .. } => {
                HarnessError::Config(e.to_string())
            }
            other => HarnessError::Solver(other),
        }
    }
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;

/// `f(x) = 1 / (1 + exp(γ (x1 - x2)))`.
pub fn exact_source(gamma: f64) -> impl Fn([f64; 2]) -> f64 + Copy {
    move |x: [f64; 2]| 1.0 / (1.0 + (gamma * (x[0] - x[1])).exp())
}

fn source_fn(cfg: &ExperimentConfig) -> Box<dyn Fn([f64; 2]) -> f64> {
    match cfg.source {
        SourceKind::Logistic => Box::new(exact_source(cfg.gamma)),
        SourceKind::Constant(v) => Box::new(move |_| v),
    }
}

/// Mesh and operator of the configured problem.
pub fn discretize(cfg: &ExperimentConfig) -> HarnessResult<(Mesh, DiscreteOperator)> {
    let mesh = Mesh::unit_square(cfg.m)?;
    let mut op = assemble(&mesh, &Coefficients::constant(cfg.k, cfg.c, cfg.mu))?
        .with_solve_options(SolveOptions::with_rel_tol(cfg.cg_rel_tol))?;
    if cfg.lumped_mass {
        op = op.with_lumped_mass()?;
    }
    Ok((mesh, op))
}

/// `ω(t_n)` on `grid` for the integral observation.
pub fn omega_samples(kind: OmegaKind, grid: &TimeGrid) -> Vec<f64> {
    match kind {
        OmegaKind::Uniform => vec![1.0 / grid.final_time(); grid.steps() + 1],
        OmegaKind::Delta => {
            let mut w = vec![0.0; grid.steps() + 1];
            w[grid.steps()] = 1.0 / grid.tau();
            w
        }
    }
}

/// `β(t_n) = exp(α (t_n - T))`, with the last sample pinned to exactly 1.
pub fn beta_samples(alpha: f64, grid: &TimeGrid) -> Vec<f64> {
    let t_end = grid.final_time();
    let mut b = grid.sample(|t| (alpha * (t - t_end)).exp());
    b[grid.steps()] = 1.0;
    b
}

/// A stored observation.
#[derive(Debug, Clone)]
pub struct Observation {
    pub psi: Field,
    pub manifest: Manifest,
    pub path: PathBuf,
}

/// Generates synthetic data on the fine forward grid and writes
/// `observation.txt`, `observation.manifest` and `forward.config` to
/// `out_dir`.
pub fn run_quasi_real(cfg: &ExperimentConfig, out_dir: &Path) -> HarnessResult<Observation> {
    cfg.validate()?;
    let (mesh, op) = discretize(cfg)?;
    let grid = TimeGrid::covering(cfg.final_time, cfg.tau_forward)?;
    let f = project_l2(&op, source_fn(cfg), &mesh)?;
    let w0 = Field::constant(op.dof(), cfg.initial_value);

    let mut psi = match cfg.solver {
        Method::Integral => {
            let mut avg = WeightedValueSum::new(omega_samples(cfg.omega, &grid));
            let source = SourceTerm::Constant(f);
            solve_cauchy(
                &op,
                &w0,
                &source,
                &grid,
                cfg.scheme_forward,
                &mut [&mut avg],
            )?;
            avg.sum()
        }
        Method::Multiplicative => {
            let source = SourceTerm::modulated(f, beta_samples(cfg.beta_alpha, &grid))?;
            solve_cauchy(&op, &w0, &source, &grid, cfg.scheme_forward, &mut [])?
        }
        Method::Nonlocal | Method::Rhs => solve_cauchy(
            &op,
            &w0,
            &SourceTerm::Constant(f),
            &grid,
            cfg.scheme_forward,
            &mut [],
        )?,
    };

    if cfg.noise_level > 0.0 {
        let amplitude = cfg.noise_level * psi.max_abs();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for v in psi.values_mut() {
            *v += amplitude * rng.random_range(-1.0..=1.0);
        }
    }

    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let path = out_dir.join(OBSERVATION_FILE);
    let manifest = Manifest::for_observation(cfg);
    write_field(&path, &mesh, &psi)?;
    io::write_atomic(
        &path.with_extension("manifest"),
        manifest.to_text().as_bytes(),
    )?;
    io::write_atomic(&out_dir.join("forward.config"), cfg.to_text().as_bytes())?;
    info!("observation written to {}", path.display());
    Ok(Observation {
        psi,
        manifest,
        path,
    })
}

/// Per-iteration error metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub k: usize,
    pub eps_inf: f64,
    pub eps_l2: f64,
    /// `‖φ^k - φ^K‖ / ‖φ^{k-1} - φ^K‖`, measured against the final iterate.
    pub ratio: Option<f64>,
    pub eps_l2_nodal: f64,
}

#[derive(Debug, Clone)]
pub struct Identification {
    pub records: Vec<ErrorRecord>,
    pub source: Field,
    pub report: IterationReport,
    /// See [`measured_contraction`].
    pub measured_ratio: Option<f64>,
}

fn initial_guess(kind: InitKind) -> InitialGuess {
    match kind {
        InitKind::APsi => InitialGuess::APsi,
        InitKind::MinusChi => InitialGuess::MinusChi,
        InitKind::Zero => InitialGuess::Zero,
    }
}

/// Geometric mean of the measured ratios `d_{k+1}/d_k`, `k = 1..=4`, where
/// `d_k = ‖φ^k - φ^K‖`. Ratios whose numerator has dropped below a tiny
/// fraction of `d_0` are dominated by round-off and skipped; if none is left
/// the `k = 0` ratio is used.
pub fn measured_contraction(
    report: &IterationReport,
    op: &DiscreteOperator,
) -> HarnessResult<Option<f64>> {
    let d = report.distances_to_final(op)?;
    let ratios = report.measured_ratios(op)?;
    let floor = RATIO_NOISE_FLOOR * d.first().copied().unwrap_or(0.0);
    let valid: Vec<f64> = (1..=4)
        .filter(|&k| k + 1 < d.len() && d[k + 1] > floor)
        .filter_map(|k| ratios.get(k).copied().flatten())
        .collect();
    if valid.is_empty() {
        return Ok(ratios.first().copied().flatten());
    }
    let log_mean = valid.iter().map(|r| r.ln()).sum::<f64>() / valid.len() as f64;
    Ok(Some(log_mean.exp()))
}

/// Runs the configured iteration against a stored observation and writes
/// `errors.csv`, `source.txt` and `invert.config` to `out_dir`.
pub fn run_identification(
    cfg: &ExperimentConfig,
    observation: &Path,
    out_dir: &Path,
) -> HarnessResult<Identification> {
    cfg.validate()?;
    let manifest_path = observation.with_extension("manifest");
    let manifest = Manifest::read(&manifest_path)?;
    manifest.check_compatible(&Manifest::for_observation(cfg))?;

    let (mesh, op) = discretize(cfg)?;
    let psi = read_field(observation, &mesh)?;
    let grid = TimeGrid::covering(cfg.final_time, cfg.tau_inverse)?;
    let f = source_fn(cfg);
    let reference = Reference {
        nodal: interpolate(&mesh, &f),
        projected: project_l2(&op, &f, &mesh)?,
    };
    let data = ObservationData::new(Field::constant(op.dof(), cfg.initial_value), psi);
    let opts = IterationOptions {
        max_iters: cfg.max_iters,
        stop_tol: cfg.stop_tol,
        init: initial_guess(cfg.init),
        delta: cfg.delta,
        reference: Some(reference),
    };
    let (source, report) = match cfg.solver {
        Method::Nonlocal => identify_nonlocal(&op, &data, &grid, &opts)?,
        Method::Rhs => identify_rhs(&op, &data, &grid, &opts)?,
        Method::Integral => {
            let data = data.with_omega(omega_samples(cfg.omega, &grid));
            identify_integral(&op, &data, &grid, &opts)?
        }
        Method::Multiplicative => {
            let data = data.with_beta(beta_samples(cfg.beta_alpha, &grid));
            identify_multiplicative(&op, &data, &grid, &opts)?
        }
    };

    let ratios = report.measured_ratios(&op)?;
    let records: Vec<ErrorRecord> = report
        .errors
        .iter()
        .enumerate()
        .map(|(k, e)| ErrorRecord {
            k,
            eps_inf: e.eps_inf,
            eps_l2: e.eps_l2,
            ratio: if k == 0 {
                None
            } else {
                ratios.get(k - 1).copied().flatten()
            },
            eps_l2_nodal: e.eps_l2_nodal,
        })
        .collect();
    let measured_ratio = measured_contraction(&report, &op)?;

    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    io::write_errors_csv(&out_dir.join(ERRORS_FILE), &records)?;
    write_field(&out_dir.join(SOURCE_FILE), &mesh, &source)?;
    io::write_atomic(&out_dir.join("invert.config"), cfg.to_text().as_bytes())?;
    info!(
        "{} iterations, rho = {:.6}, eps_inf = {:.3e}",
        report.iterations(),
        report.rho_bar,
        records.last().map_or(f64::NAN, |r| r.eps_inf)
    );
    Ok(Identification {
        records,
        source,
        report,
        measured_ratio,
    })
}

/// Forward + inverse run in `out_dir`.
pub fn run_pipeline(cfg: &ExperimentConfig, out_dir: &Path) -> HarnessResult<Identification> {
    let obs = run_quasi_real(cfg, out_dir)?;
    run_identification(cfg, &obs.path, out_dir)
}

pub const DEFAULT_GAMMAS: [f64; 4] = [5.0, 10.0, 20.0, 100.0];
pub const TABLE_ROWS: usize = 6;

/// `eps_inf[k][j]` and `eps_l2[k][j]` for `k = 0..=5` and the `j`-th γ.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub gammas: Vec<f64>,
    pub eps_inf: Vec<Vec<Option<f64>>>,
    pub eps_l2: Vec<Vec<Option<f64>>>,
}

/// Error decay for each γ; writes `table_eps_inf.csv`, `table_eps_l2.csv` and
/// one `gamma_<γ>` directory per run.
pub fn run_table(
    template: &ExperimentConfig,
    gammas: &[f64],
    out_dir: &Path,
) -> HarnessResult<ErrorTable> {
    if gammas.is_empty() {
        return Err(HarnessError::config("gamma list is empty"));
    }
    let mut table = ErrorTable {
        gammas: gammas.to_vec(),
        eps_inf: vec![Vec::new(); TABLE_ROWS],
        eps_l2: vec![Vec::new(); TABLE_ROWS],
    };
    for &gamma in gammas {
        let mut cfg = template.clone();
        cfg.gamma = gamma;
        cfg.max_iters = cfg.max_iters.max(TABLE_ROWS - 1);
        let run = run_pipeline(&cfg, &out_dir.join(format!("gamma_{gamma}")))?;
        for k in 0..TABLE_ROWS {
            let rec = run.records.get(k);
            table.eps_inf[k].push(rec.map(|r| r.eps_inf));
            table.eps_l2[k].push(rec.map(|r| r.eps_l2));
        }
    }
    io::write_table_csv(
        &out_dir.join("table_eps_inf.csv"),
        &table.gammas,
        &table.eps_inf,
    )?;
    io::write_table_csv(
        &out_dir.join("table_eps_l2.csv"),
        &table.gammas,
        &table.eps_l2,
    )?;
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    FinalTime,
    Reaction,
    TauInverse,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::FinalTime => "T",
            SweepParam::Reaction => "c",
            SweepParam::TauInverse => "tau",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T" => Ok(SweepParam::FinalTime),
            "c" => Ok(SweepParam::Reaction),
            "tau" => Ok(SweepParam::TauInverse),
            _ => Err(HarnessError::config(format!(
                "unknown sweep parameter '{s}' (T, c or tau)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub rho_theory: f64,
    pub measured_ratio: Option<f64>,
    pub iterations: usize,
    pub final_eps_inf: f64,
    pub final_eps_l2: f64,
}

/// One pipeline per value of `param`; writes `<param>_<value>/errors.csv` for
/// each value and `sweep_<param>.csv` with measured vs theoretical rates.
///
/// A `tau` sweep reuses one observation, since only the inverse grid changes.
/// A `c` sweep always estimates `δ` from the operator, because a supplied
/// value would belong to the template's `c`.
pub fn run_sweep(
    template: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    out_dir: &Path,
) -> HarnessResult<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(HarnessError::config("sweep value list is empty"));
    }
    let shared = match param {
        SweepParam::TauInverse => Some(run_quasi_real(template, &out_dir.join("observation"))?),
        _ => None,
    };
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut cfg = template.clone();
        match param {
            SweepParam::FinalTime => cfg.final_time = value,
            SweepParam::Reaction => {
                cfg.c = value;
                cfg.delta = None;
            }
            SweepParam::TauInverse => cfg.tau_inverse = value,
        }
        cfg.validate()?;
        let dir = out_dir.join(format!("{}_{value}", param.name()));
        let run = match &shared {
            Some(obs) => run_identification(&cfg, &obs.path, &dir)?,
            None => run_pipeline(&cfg, &dir)?,
        };
        let last = run.records.last().expect("at least the initial iterate");
        rows.push(SweepRow {
            value,
            rho_theory: run.report.rho_bar,
            measured_ratio: run.measured_ratio,
            iterations: run.report.iterations(),
            final_eps_inf: last.eps_inf,
            final_eps_l2: last.eps_l2,
        });
    }
    io::write_sweep_csv(
        &out_dir.join(format!("sweep_{}.csv", param.name())),
        param.name(),
        &rows,
    )?;
    Ok(rows)
}
