//! Field dumps, observation manifests and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::{ExperimentConfig, InitKind, Method, OmegaKind, SourceKind};
use super::{ErrorRecord, HarnessError, HarnessResult, SweepRow};
use crate::fem::{Field, Mesh};
use crate::forward::Scheme;

/// Manifest keys that must agree between the observation and the
/// identification config.
const CHECKED_KEYS: [&str; 11] = [
    "m",
    "k",
    "c",
    "mu",
    "source",
    "gamma",
    "initial_value",
    "T",
    "observation",
    "omega",
    "beta_alpha",
];

const COORD_TOL: f64 = 1e-12;

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> HarnessResult<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, bytes).map_err(|e| HarnessError::io(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| HarnessError::io(path, e))
}

/// `x1 x2 value` per node in mesh order, 17 significant digits.
pub fn write_field(path: &Path, mesh: &Mesh, field: &Field) -> HarnessResult<()> {
    if field.len() != mesh.node_count() {
        return Err(HarnessError::config(format!(
            "field has {} values for {} nodes",
            field.len(),
            mesh.node_count()
        )));
    }
    let mut s = String::with_capacity(72 * field.len());
    for (p, v) in mesh.nodes().iter().zip(field.values()) {
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", p[0], p[1], v);
    }
    write_atomic(path, s.as_bytes())
}

/// Reads a field dump and checks that its coordinates are the nodes of `mesh`.
pub fn read_field(path: &Path, mesh: &Mesh) -> HarnessResult<Field> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let bad = |line: usize, what: &str| {
        HarnessError::config(format!("{}:{}: {what}", path.display(), line + 1))
    };
    let mut values = Vec::with_capacity(mesh.node_count());
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| bad(i, "unparsable number"))?;
        let [x, y, v] = cols[..] else {
            return Err(bad(i, "expected three columns"));
        };
        let node = mesh
            .nodes()
            .get(values.len())
            .ok_or_else(|| bad(i, "more values than mesh nodes"))?;
        if (node[0] - x).abs() > COORD_TOL || (node[1] - y).abs() > COORD_TOL {
            return Err(bad(i, "coordinates do not match the configured mesh"));
        }
        values.push(v);
    }
    if values.len() != mesh.node_count() {
        return Err(HarnessError::config(format!(
            "{}: {} values for {} mesh nodes",
            path.display(),
            values.len(),
            mesh.node_count()
        )));
    }
    Ok(Field::from_vec(values))
}

/// Ordered `key = value` record of how an observation was generated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn for_observation(cfg: &ExperimentConfig) -> Self {
        let (source, gamma) = match cfg.source {
            SourceKind::Logistic => ("logistic".to_string(), format!("{:?}", cfg.gamma)),
            SourceKind::Constant(v) => (format!("constant:{v:?}"), "none".to_string()),
        };
        let observation = match cfg.solver {
            Method::Integral => "integral",
            _ => "final",
        };
        let omega = match (cfg.solver, cfg.omega) {
            (Method::Integral, OmegaKind::Uniform) => "uniform",
            (Method::Integral, OmegaKind::Delta) => "delta",
            _ => "none",
        };
        let beta_alpha = match cfg.solver {
            Method::Multiplicative => format!("{:?}", cfg.beta_alpha),
            _ => "none".to_string(),
        };
        let scheme = match cfg.scheme_forward {
            Scheme::CrankNicolson => "cn",
            Scheme::Implicit => "implicit",
        };
        let init = match cfg.init {
            InitKind::APsi => "a_psi",
            InitKind::MinusChi => "minus_chi",
            InitKind::Zero => "zero",
        };
        let entries = [
            ("m", cfg.m.to_string()),
            ("k", format!("{:?}", cfg.k)),
            ("c", format!("{:?}", cfg.c)),
            ("mu", format!("{:?}", cfg.mu)),
            ("source", source),
            ("gamma", gamma),
            ("initial_value", format!("{:?}", cfg.initial_value)),
            ("T", format!("{:?}", cfg.final_time)),
            ("observation", observation.to_string()),
            ("omega", omega.to_string()),
            ("beta_alpha", beta_alpha),
            ("tau_forward", format!("{:?}", cfg.tau_forward)),
            ("scheme_forward", scheme.to_string()),
            ("cg_rel_tol", format!("{:?}", cfg.cg_rel_tol)),
            ("lumped_mass", cfg.lumped_mass.to_string()),
            ("noise_level", format!("{:?}", cfg.noise_level)),
            ("seed", cfg.seed.to_string()),
            ("init", init.to_string()),
        ];
        Self {
            entries: entries
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn parse(text: &str) -> HarnessResult<Self> {
        let mut entries = Vec::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::config(format!("malformed manifest line '{line}'")))?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> HarnessResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    /// Fails unless every problem-defining key matches `expected`.
    pub fn check_compatible(&self, expected: &Manifest) -> HarnessResult<()> {
        let mismatches: Vec<String> = CHECKED_KEYS
            .iter()
            .filter(|key| self.get(key) != expected.get(key))
            .map(|key| {
                format!(
                    "{key}: observation has {}, config expects {}",
                    self.get(key).unwrap_or("<missing>"),
                    expected.get(key).unwrap_or("<missing>")
                )
            })
            .collect();
        if mismatches.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::config(format!(
                "observation manifest does not match the configuration ({})",
                mismatches.join("; ")
            )))
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> HarnessResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let to_err = |e: csv::Error| HarnessError::io(path, e.into());
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(row).map_err(to_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

pub(crate) fn write_errors_csv(path: &Path, records: &[ErrorRecord]) -> HarnessResult<()> {
    let header = ["k", "eps_inf", "eps_l2", "ratio", "eps_l2_nodal"].map(String::from);
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                num(r.eps_inf),
                num(r.eps_l2),
                opt(r.ratio),
                num(r.eps_l2_nodal),
            ]
        })
        .collect();
    write_csv(path, &header, &rows)
}

pub(crate) fn write_table_csv(
    path: &Path,
    gammas: &[f64],
    cells: &[Vec<Option<f64>>],
) -> HarnessResult<()> {
    let header: Vec<String> = std::iter::once("k".to_string())
        .chain(gammas.iter().map(|g| format!("gamma_{g}")))
        .collect();
    let rows: Vec<Vec<String>> = cells
        .iter()
        .enumerate()
        .map(|(k, row)| {
            std::iter::once(k.to_string())
                .chain(row.iter().map(|v| opt(*v)))
                .collect()
        })
        .collect();
    write_csv(path, &header, &rows)
}

pub(crate) fn write_sweep_csv(path: &Path, param: &str, rows: &[SweepRow]) -> HarnessResult<()> {
    let header = [
        param,
        "rho_theory",
        "measured_ratio",
        "iterations",
        "final_eps_inf",
        "final_eps_l2",
    ]
    .map(String::from);
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                format!("{:?}", r.value),
                num(r.rho_theory),
                opt(r.measured_ratio),
                r.iterations.to_string(),
                num(r.final_eps_inf),
                num(r.final_eps_l2),
            ]
        })
        .collect();
    write_csv(path, &header, &rows)
}
