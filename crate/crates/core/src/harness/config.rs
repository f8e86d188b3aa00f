//! Flat `key = value` experiment configuration.
//!
//! Grammar: one `key = value` pair per line; blank lines and lines starting
//! with `#` are ignored; keys are case-sensitive; unknown keys are rejected.
//! Every key has a default, so an empty file describes the base case.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use super::HarnessError;
use crate::forward::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Nonlocal,
    Rhs,
    Integral,
    Multiplicative,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Nonlocal => "nonlocal",
            Method::Rhs => "rhs",
            Method::Integral => "integral",
            Method::Multiplicative => "multiplicative",
        }
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nonlocal" => Ok(Method::Nonlocal),
            "rhs" => Ok(Method::Rhs),
            "integral" => Ok(Method::Integral),
            "multiplicative" => Ok(Method::Multiplicative),
            _ => Err(HarnessError::config(format!("unknown solver '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaKind {
    /// `ω ≡ 1/T`
    Uniform,
    /// All weight on the final layer, `ω_N = 1/τ`.
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceKind {
    /// `f = 1 / (1 + exp(γ (x1 - x2)))`
    Logistic,
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    APsi,
    MinusChi,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub m: usize,
    pub k: f64,
    pub c: f64,
    pub mu: f64,
    pub source: SourceKind,
    pub gamma: f64,
    /// Constant initial value `u₀`.
    pub initial_value: f64,
    pub final_time: f64,
    pub tau_forward: f64,
    pub tau_inverse: f64,
    pub scheme_forward: Scheme,
    pub solver: Method,
    pub omega: OmegaKind,
    /// `β(t) = exp(α (t - T))`, used by the multiplicative solver only.
    pub beta_alpha: f64,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub init: InitKind,
    /// `None` estimates δ from the assembled operator.
    pub delta: Option<f64>,
    pub cg_rel_tol: f64,
    pub lumped_mass: bool,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub noise_level: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m: 50,
            k: 1.0,
            c: 10.0,
            mu: 0.0,
            source: SourceKind::Logistic,
            gamma: 10.0,
            initial_value: 0.0,
            final_time: 0.1,
            tau_forward: 1e-4,
            tau_inverse: 1e-3,
            scheme_forward: Scheme::CrankNicolson,
            solver: Method::Nonlocal,
            omega: OmegaKind::Uniform,
            beta_alpha: 0.0,
            max_iters: 30,
            stop_tol: 1e-12,
            init: InitKind::APsi,
            delta: None,
            cg_rel_tol: 1e-10,
            lumped_mass: false,
            out_dir: PathBuf::from("out"),
            seed: 0,
            noise_level: 0.0,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .parse()
        .map_err(|_| HarnessError::config(format!("{key}: cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, HarnessError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(HarnessError::config(format!(
            "{key}: expected true/false, got '{value}'"
        ))),
    }
}

fn steps_are_integral(final_time: f64, tau: f64) -> bool {
    let r = final_time / tau;
    r.round() >= 1.0 && (r - r.round()).abs() <= 1e-9 * r.round()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        match key {
            "m" => self.m = parse_num(key, value)?,
            "k" => self.k = parse_num(key, value)?,
            "c" => self.c = parse_num(key, value)?,
            "mu" => self.mu = parse_num(key, value)?,
            "source" => {
                self.source = match value {
                    "logistic" => SourceKind::Logistic,
                    v => match v.strip_prefix("constant:") {
                        Some(c) => SourceKind::Constant(parse_num(key, c.trim())?),
                        None => {
                            return Err(HarnessError::config(format!(
                                "source: expected 'logistic' or 'constant:<value>', got '{v}'"
                            )))
                        }
                    },
                }
            }
            "gamma" => self.gamma = parse_num(key, value)?,
            "initial_value" => self.initial_value = parse_num(key, value)?,
            "T" => self.final_time = parse_num(key, value)?,
            "tau_forward" => self.tau_forward = parse_num(key, value)?,
            "tau_inverse" => self.tau_inverse = parse_num(key, value)?,
            "scheme_forward" => {
                self.scheme_forward = match value {
                    "cn" => Scheme::CrankNicolson,
                    "implicit" => Scheme::Implicit,
                    _ => {
                        return Err(HarnessError::config(format!(
                            "scheme_forward: unknown '{value}'"
                        )))
                    }
                }
            }
            "solver" => self.solver = value.parse()?,
            "omega" => {
                self.omega = match value {
                    "uniform" => OmegaKind::Uniform,
                    "delta" => OmegaKind::Delta,
                    _ => return Err(HarnessError::config(format!("omega: unknown '{value}'"))),
                }
            }
            "beta_alpha" => self.beta_alpha = parse_num(key, value)?,
            "max_iters" => self.max_iters = parse_num(key, value)?,
            "stop_tol" => self.stop_tol = parse_num(key, value)?,
            "init" => {
                self.init = match value {
                    "a_psi" => InitKind::APsi,
                    "minus_chi" => InitKind::MinusChi,
                    "zero" => InitKind::Zero,
                    _ => return Err(HarnessError::config(format!("init: unknown '{value}'"))),
                }
            }
            "delta" => {
                self.delta = match value {
                    "auto" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "cg_rel_tol" => self.cg_rel_tol = parse_num(key, value)?,
            "lumped_mass" => self.lumped_mass = parse_bool(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = parse_num(key, value)?,
            "noise_level" => self.noise_level = parse_num(key, value)?,
            _ => return Err(HarnessError::config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::config(msg));
        if self.m == 0 {
            return fail("m must be positive".into());
        }
        if !(self.k > 0.0) || !(self.c >= 0.0) || !(self.mu >= 0.0) {
            return fail("coefficients need k > 0, c >= 0, mu >= 0".into());
        }
        if !self.gamma.is_finite() {
            return fail("gamma must be finite".into());
        }
        for (name, tau) in [
            ("tau_forward", self.tau_forward),
            ("tau_inverse", self.tau_inverse),
        ] {
            if !(tau > 0.0) {
                return fail(format!("{name} must be positive"));
            }
            if !(self.final_time > 0.0) || !steps_are_integral(self.final_time, tau) {
                return fail(format!(
                    "T = {} is not an integer multiple of {name} = {tau}",
                    self.final_time
                ));
            }
        }
        if !(self.beta_alpha >= 0.0) {
            return fail("beta_alpha must be non-negative".into());
        }
        if self.max_iters == 0 {
            return fail("max_iters must be at least 1".into());
        }
        if !(self.stop_tol >= 0.0) {
            return fail("stop_tol must be non-negative".into());
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return fail("delta must be positive or 'auto'".into());
            }
        }
        if !(self.cg_rel_tol > 0.0 && self.cg_rel_tol < 1.0) {
            return fail("cg_rel_tol must lie in (0, 1)".into());
        }
        if !(self.noise_level >= 0.0) || !self.noise_level.is_finite() {
            return fail("noise_level must be >= 0".into());
        }
        Ok(())
    }

    /// Resolved configuration in the same grammar `parse` accepts.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let source = match self.source {
            SourceKind::Logistic => "logistic".to_string(),
            SourceKind::Constant(v) => format!("constant:{v:?}"),
        };
        let scheme = match self.scheme_forward {
            Scheme::CrankNicolson => "cn",
            Scheme::Implicit => "implicit",
        };
        let omega = match self.omega {
            OmegaKind::Uniform => "uniform",
            OmegaKind::Delta => "delta",
        };
        let init = match self.init {
            InitKind::APsi => "a_psi",
            InitKind::MinusChi => "minus_chi",
            InitKind::Zero => "zero",
        };
        let delta = self.delta.map_or("auto".to_string(), |d| format!("{d:?}"));
        let _ = writeln!(s, "m = {}", self.m);
        let _ = writeln!(s, "k = {:?}", self.k);
        let _ = writeln!(s, "c = {:?}", self.c);
        let _ = writeln!(s, "mu = {:?}", self.mu);
        let _ = writeln!(s, "source = {source}");
        let _ = writeln!(s, "gamma = {:?}", self.gamma);
        let _ = writeln!(s, "initial_value = {:?}", self.initial_value);
        let _ = writeln!(s, "T = {:?}", self.final_time);
        let _ = writeln!(s, "tau_forward = {:?}", self.tau_forward);
        let _ = writeln!(s, "tau_inverse = {:?}", self.tau_inverse);
        let _ = writeln!(s, "scheme_forward = {scheme}");
        let _ = writeln!(s, "solver = {}", self.solver.name());
        let _ = writeln!(s, "omega = {omega}");
        let _ = writeln!(s, "beta_alpha = {:?}", self.beta_alpha);
        let _ = writeln!(s, "max_iters = {}", self.max_iters);
        let _ = writeln!(s, "stop_tol = {:?}", self.stop_tol);
        let _ = writeln!(s, "init = {init}");
        let _ = writeln!(s, "delta = {delta}");
        let _ = writeln!(s, "cg_rel_tol = {:?}", self.cg_rel_tol);
        let _ = writeln!(s, "lumped_mass = {}", self.lumped_mass);
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "noise_level = {:?}", self.noise_level);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_base_case() {
        let cfg = ExperimentConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.m, 50);
        assert_eq!(cfg.c, 10.0);
        assert_eq!(cfg.final_time, 0.1);
        assert_eq!(cfg.gamma, 10.0);
    }

    #[test]
    fn resolved_text_round_trips() {
        let text = "m = 8\nc = 30\nsolver = multiplicative\nbeta_alpha = 5\nsource = constant:2.5\ndelta = 30\nlumped_mass = true\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.source, SourceKind::Constant(2.5));
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "m = 0",
            "bogus = 1",
            "m 5",
            "tau_inverse = 0.03",
            "noise_level = -1",
            "gamma = inf",
            "solver = adjoint",
            "k = 0",
            "delta = -2",
        ] {
            assert!(
                matches!(ExperimentConfig::parse(text), Err(HarnessError::Config(_))),
                "{text}"
            );
        }
    }
}
