//! Picard-type iterations recovering a time-independent source.
//!
//! Every iteration solves one standard Cauchy problem with the fully implicit
//! scheme. Four variants:
//!
//! * [`identify_nonlocal`]: iterates the initial value of `v = dw/dt`, which
//!   solves the homogeneous equation under the non-local condition
//!   `v_N - v_0 = χ`, `χ = A(ϕ - ψ)`.
//! * [`identify_rhs`]: refines the source directly from the equation at `t = T`,
//!   `φ ← (w_N - w_{N-1})/τ + Aψ`.
//! * [`identify_integral`]: the same refinement for a time-weighted
//!   observation `ψ = τ Σ ω_n w_n`.
//! * [`identify_multiplicative`]: source `β(t) φ(x)` with known `β`, `β(T) = 1`.
//!
//! The error contracts by `ρ̄ = (1 + τδ)^(-N)` per iteration for the first two
//! variants, where `δ` is the coercivity constant of `A`.

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::fem::{apply_a, DiscreteOperator, Field};
use crate::forward::{
    march, LastTwo, Scheme, SourceTerm, TimeGrid, TimeStepper, WeightedDerivativeSum,
};
use crate::linalg::estimate_delta;

const DELTA_TOL: f64 = 1e-10;

/// Inputs of an identification run.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationData {
    /// Initial state `ϕ = P u₀`.
    pub phi: Field,
    /// Observation: `P u_T`, or the weighted time average for the integral
    /// variant.
    pub psi: Field,
    /// `ω(t_n)`, `n = 0..=N`.
    pub omega: Option<Vec<f64>>,
    /// `β(t_n)`, `n = 0..=N`.
    pub beta: Option<Vec<f64>>,
}

impl ObservationData {
    pub fn new(phi: Field, psi: Field) -> Self {
        Self {
            phi,
            psi,
            omega: None,
            beta: None,
        }
    }

    pub fn with_omega(mut self, omega: Vec<f64>) -> Self {
        self.omega = Some(omega);
        self
    }

    pub fn with_beta(mut self, beta: Vec<f64>) -> Self {
        self.beta = Some(beta);
        self
    }
}

/// Starting point of the iteration.
///
/// [`identify_nonlocal`] iterates `v_0` and maps it to the source by
/// `φ = Aϕ + v_0`; the other variants iterate `φ` itself.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// `v_0 = -χ`, i.e. `φ⁰ = Aϕ - χ = Aψ`.
    MinusChi,
    /// `v_0 = Aψ` for the non-local variant, `φ⁰ = Aψ` otherwise.
    APsi,
    Zero,
    /// An explicit initial source `φ⁰`.
    Given(Field),
}

/// Exact source used to report per-iteration errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    /// Nodal values `f(x_i)`.
    pub nodal: Field,
    /// L2 projection `P f`.
    pub projected: Field,
}

#[derive(Debug, Clone)]
pub struct IterationOptions {
    pub max_iters: usize,
    /// Stop once `‖φ^{k+1} - φ^k‖ ≤ stop_tol`.
    pub stop_tol: f64,
    pub init: InitialGuess,
    /// Known coercivity constant; estimated from `(K, M)` when `None`.
    pub delta: Option<f64>,
    pub reference: Option<Reference>,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            max_iters: 30,
            stop_tol: 1e-12,
            init: InitialGuess::APsi,
            delta: None,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaSource {
    Supplied,
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationError {
    /// `max_i |φ^k_i - f(x_i)|`
    pub eps_inf: f64,
    /// `‖φ^k - P f‖`
    pub eps_l2: f64,
    /// `‖φ^k - I f‖` against the nodal interpolant.
    pub eps_l2_nodal: f64,
}

#[derive(Debug, Clone)]
pub struct IterationReport {
    /// `φ^0, φ^1, …, φ^K`.
    pub iterates: Vec<Field>,
    /// `‖φ^k - φ^{k-1}‖` for `k = 1..=K`.
    pub norm_deltas: Vec<f64>,
    /// Quotients of successive `norm_deltas`.
    pub contraction_ratios: Vec<f64>,
    /// Theoretical contraction rate of the variant that ran.
    pub rho_bar: f64,
    pub delta: f64,
    pub delta_source: DeltaSource,
    /// First `k` with `‖φ^k - φ^{k-1}‖ ≤ stop_tol`.
    pub converged_at: Option<usize>,
    /// Per-iterate errors, when a reference was supplied.
    pub errors: Vec<IterationError>,
}

impl IterationReport {
    pub fn iterations(&self) -> usize {
        self.norm_deltas.len()
    }

    pub fn converged(&self) -> bool {
        self.converged_at.is_some()
    }

    pub fn final_iterate(&self) -> &Field {
        self.iterates
            .last()
            .expect("report holds at least the initial guess")
    }

    /// `‖φ^k - φ^K‖` for every `k`, with the last iterate as proxy limit.
    pub fn distances_to_final(&self, op: &DiscreteOperator) -> Result<Vec<f64>> {
        let last = self.final_iterate();
        self.iterates
            .iter()
            .map(|x| op.m_norm(&(x - last)))
            .collect()
    }

    /// Measured contraction `‖φ^{k+1} - φ^K‖ / ‖φ^k - φ^K‖` for
    /// `k = 0..K-2`; `None` where the denominator vanishes.
    pub fn measured_ratios(&self, op: &DiscreteOperator) -> Result<Vec<Option<f64>>> {
        let d = self.distances_to_final(op)?;
        let k_max = d.len().saturating_sub(2);
        Ok((0..k_max)
            .map(|k| (d[k] > 0.0).then(|| d[k + 1] / d[k]))
            .collect())
    }
}

/// `ρ̄ = (1 + τδ)^(-N)`.
pub fn contraction_bound(delta: f64, grid: &TimeGrid) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!(
            "delta must be positive for a contractive iteration, got {delta}"
        )));
    }
    Ok((1.0 + grid.tau() * delta).powf(-(grid.steps() as f64)))
}

/// `ρ = Σ_{n=1}^{N} ω_n τ (1 + τδ)^(-n)` for the integral observation.
pub fn integral_rate(delta: f64, grid: &TimeGrid, omega: &[f64]) -> Result<f64> {
    contraction_bound(delta, grid)?;
    if omega.len() != grid.steps() + 1 {
        return Err(Error::dims(grid.steps() + 1, omega.len()));
    }
    let q = 1.0 / (1.0 + grid.tau() * delta);
    Ok((1..=grid.steps())
        .map(|n| omega[n] * grid.tau() * q.powi(n as i32))
        .sum())
}

/// `ρ = 1 - β(0) (1 - exp(-δT))` for the multiplicative source.
pub fn multiplicative_rate(delta: f64, final_time: f64, beta0: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!(
            "delta must be positive, got {delta}"
        )));
    }
    Ok(1.0 - beta0 * (1.0 - (-delta * final_time).exp()))
}

fn check_data(op: &DiscreteOperator, data: &ObservationData) -> Result<()> {
    op.check_len(data.phi.len())?;
    op.check_len(data.psi.len())
}

fn resolve_delta(op: &DiscreteOperator, opts: &IterationOptions) -> Result<(f64, DeltaSource)> {
    let (delta, source) = match opts.delta {
        Some(d) => (d, DeltaSource::Supplied),
        None => (estimate_delta(op, DELTA_TOL)?, DeltaSource::Estimated),
    };
    if !(delta > 0.0) {
        return Err(Error::DegenerateOperator(format!(
            "delta = {delta} is not positive"
        )));
    }
    Ok((delta, source))
}

fn validate_options(opts: &IterationOptions, dof: usize) -> Result<()> {
    if opts.max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    if !(opts.stop_tol >= 0.0) {
        return Err(Error::invalid("stop_tol must be non-negative"));
    }
    if let InitialGuess::Given(f) = &opts.init {
        if f.len() != dof {
            return Err(Error::dims(dof, f.len()));
        }
    }
    if let Some(r) = &opts.reference {
        if r.nodal.len() != dof || r.projected.len() != dof {
            return Err(Error::invalid(
                "reference fields do not match the operator size",
            ));
        }
    }
    Ok(())
}

fn errors_for(op: &DiscreteOperator, phi: &Field, reference: &Reference) -> Result<IterationError> {
    Ok(IterationError {
        eps_inf: phi.max_abs_diff(&reference.nodal),
        eps_l2: op.m_norm(&(phi - &reference.projected))?,
        eps_l2_nodal: op.m_norm(&(phi - &reference.nodal))?,
    })
}

/// Shared Picard loop over an internal state `S` that maps to a source.
struct Picard<'a> {
    op: &'a DiscreteOperator,
    opts: &'a IterationOptions,
    rho_bar: f64,
    delta: f64,
    delta_source: DeltaSource,
}

impl Picard<'_> {
    fn run<S>(
        &self,
        state0: S,
        to_source: impl Fn(&S) -> Result<Field>,
        mut step: impl FnMut(&S) -> Result<S>,
    ) -> Result<(Field, IterationReport)> {
        let mut report = IterationReport {
            iterates: Vec::new(),
            norm_deltas: Vec::new(),
            contraction_ratios: Vec::new(),
            rho_bar: self.rho_bar,
            delta: self.delta,
            delta_source: self.delta_source,
            converged_at: None,
            errors: Vec::new(),
        };
        let mut state = state0;
        let first = to_source(&state)?;
        self.record(&mut report, first)?;

        for k in 1..=self.opts.max_iters {
            state = step(&state)?;
            let phi = to_source(&state)?;
            let change = self.op.m_norm(&(&phi - report.final_iterate()))?;
            if let Some(prev) = report.norm_deltas.last() {
                report
                    .contraction_ratios
                    .push(if *prev > 0.0 { change / prev } else { 0.0 });
            }
            report.norm_deltas.push(change);
            self.record(&mut report, phi)?;
            debug!("iteration {k}: |dphi| = {change:e}");
            if change <= self.opts.stop_tol {
                report.converged_at = Some(k);
                break;
            }
        }
        if report.converged_at.is_none() {
            warn!(
                "no convergence to {:e} within {} iterations (last change {:e})",
                self.opts.stop_tol,
                self.opts.max_iters,
                report.norm_deltas.last().copied().unwrap_or(f64::NAN)
            );
        }
        Ok((report.final_iterate().clone(), report))
    }

    fn record(&self, report: &mut IterationReport, phi: Field) -> Result<()> {
        if let Some(r) = &self.opts.reference {
            report.errors.push(errors_for(self.op, &phi, r)?);
        }
        report.iterates.push(phi);
        Ok(())
    }
}

/// Initial source for the variants that iterate `φ` directly.
fn initial_source(
    op: &DiscreteOperator,
    data: &ObservationData,
    a_psi: &Field,
    init: &InitialGuess,
) -> Result<Field> {
    Ok(match init {
        InitialGuess::APsi => a_psi.clone(),
        InitialGuess::MinusChi => {
            // Aϕ - A(ϕ - ψ)
            let chi = apply_a(op, &(&data.phi - &data.psi))?;
            &apply_a(op, &data.phi)? - &chi
        }
        InitialGuess::Zero => Field::zeros(op.dof()),
        InitialGuess::Given(f) => f.clone(),
    })
}

/// Iterates `v_0^{k+1} = v_N^k - χ` over the homogeneous implicit march and
/// reports `φ^k = Aϕ + v_0^k`.
pub fn identify_nonlocal(
    op: &DiscreteOperator,
    data: &ObservationData,
    grid: &TimeGrid,
    opts: &IterationOptions,
) -> Result<(Field, IterationReport)> {
    check_data(op, data)?;
    validate_options(opts, op.dof())?;
    let (delta, delta_source) = resolve_delta(op, opts)?;
    let rho_bar = contraction_bound(delta, grid)?;

    let a_phi = apply_a(op, &data.phi)?;
    let chi = apply_a(op, &(&data.phi - &data.psi))?;
    let v0 = match &opts.init {
        InitialGuess::MinusChi => &chi * -1.0,
        InitialGuess::APsi => apply_a(op, &data.psi)?,
        InitialGuess::Zero => Field::zeros(op.dof()),
        InitialGuess::Given(f) => f - &a_phi,
    };

    let stepper = TimeStepper::new(op, grid.tau(), Scheme::Implicit)?;
    let picard = Picard {
        op,
        opts,
        rho_bar,
        delta,
        delta_source,
    };
    picard.run(
        v0,
        |v| Ok(&a_phi + v),
        |v| {
            let vn = march(&stepper, v, &SourceTerm::Zero, grid, &mut [])?;
            Ok(&vn - &chi)
        },
    )
}

/// Marches from `ϕ` with the given source and returns the backward
/// difference `(w_N - w_{N-1})/τ`.
fn final_derivative(
    stepper: &TimeStepper<'_>,
    phi: &Field,
    source: &SourceTerm,
    grid: &TimeGrid,
) -> Result<Field> {
    let mut last = LastTwo::new();
    march(stepper, phi, source, grid, &mut [&mut last])?;
    Ok(last
        .backward_difference(grid.tau())
        .expect("grid has at least one step"))
}

/// Refines `φ^{k+1} = (w_N^k - w_{N-1}^k)/τ + Aψ`, where `w^k` solves the
/// implicit scheme from `w_0 = ϕ` with source `φ^k`.
pub fn identify_rhs(
    op: &DiscreteOperator,
    data: &ObservationData,
    grid: &TimeGrid,
    opts: &IterationOptions,
) -> Result<(Field, IterationReport)> {
    check_data(op, data)?;
    validate_options(opts, op.dof())?;
    let (delta, delta_source) = resolve_delta(op, opts)?;
    let rho_bar = contraction_bound(delta, grid)?;

    let a_psi = apply_a(op, &data.psi)?;
    let phi0 = initial_source(op, data, &a_psi, &opts.init)?;
    let stepper = TimeStepper::new(op, grid.tau(), Scheme::Implicit)?;
    let picard = Picard {
        op,
        opts,
        rho_bar,
        delta,
        delta_source,
    };
    picard.run(
        phi0,
        |f| Ok(f.clone()),
        |f| {
            let dw = final_derivative(&stepper, &data.phi, &SourceTerm::Constant(f.clone()), grid)?;
            Ok(&dw + &a_psi)
        },
    )
}

fn validate_omega(omega: &[f64], grid: &TimeGrid) -> Result<()> {
    if omega.len() != grid.steps() + 1 {
        return Err(Error::invalid(format!(
            "omega has {} samples, grid needs {}",
            omega.len(),
            grid.steps() + 1
        )));
    }
    if omega.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("omega must be finite and non-negative"));
    }
    if omega[0] > 0.0 && omega[1..].iter().all(|w| *w == 0.0) {
        warn!("omega is concentrated at t = 0; the iteration cannot contract");
        return Err(Error::NonContractive { rate: 1.0 });
    }
    let mass: f64 = omega[1..].iter().sum::<f64>() * grid.tau();
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!(
            "omega must satisfy tau * sum(omega[1..=N]) = 1, got {mass}"
        )));
    }
    Ok(())
}

/// Refinement for the integral observation `ψ = τ Σ_{n=1}^{N} ω_n w_n`:
/// `φ^{k+1} = Σ_{n=1}^{N} ω_n (w_n^k - w_{n-1}^k) + Aψ`.
pub fn identify_integral(
    op: &DiscreteOperator,
    data: &ObservationData,
    grid: &TimeGrid,
    opts: &IterationOptions,
) -> Result<(Field, IterationReport)> {
    check_data(op, data)?;
    validate_options(opts, op.dof())?;
    let omega = data
        .omega
        .as_ref()
        .ok_or_else(|| Error::invalid("integral observation needs omega samples"))?;
    validate_omega(omega, grid)?;
    let (delta, delta_source) = resolve_delta(op, opts)?;
    let rho = integral_rate(delta, grid, omega)?;

    let a_psi = apply_a(op, &data.psi)?;
    let phi0 = initial_source(op, data, &a_psi, &opts.init)?;
    let stepper = TimeStepper::new(op, grid.tau(), Scheme::Implicit)?;
    let picard = Picard {
        op,
        opts,
        rho_bar: rho,
        delta,
        delta_source,
    };
    picard.run(
        phi0,
        |f| Ok(f.clone()),
        |f| {
            let mut sum = WeightedDerivativeSum::new(omega.clone());
            march(
                &stepper,
                &data.phi,
                &SourceTerm::Constant(f.clone()),
                grid,
                &mut [&mut sum],
            )?;
            Ok(&sum.sum() + &a_psi)
        },
    )
}

fn validate_beta(beta: &[f64], grid: &TimeGrid) -> Result<()> {
    if beta.len() != grid.steps() + 1 {
        return Err(Error::invalid(format!(
            "beta has {} samples, grid needs {}",
            beta.len(),
            grid.steps() + 1
        )));
    }
    if beta.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
        return Err(Error::invalid("beta must be positive"));
    }
    if beta.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("beta must be non-decreasing"));
    }
    if (beta[grid.steps()] - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "beta(T) must equal 1, got {}",
            beta[grid.steps()]
        )));
    }
    Ok(())
}

/// Source `β(t) φ(x)`: march with `β_{n+1} φ^k` in step `n → n+1`, then
/// `φ^{k+1} = (w_N^k - w_{N-1}^k)/τ + Aψ`.
pub fn identify_multiplicative(
    op: &DiscreteOperator,
    data: &ObservationData,
    grid: &TimeGrid,
    opts: &IterationOptions,
) -> Result<(Field, IterationReport)> {
    check_data(op, data)?;
    validate_options(opts, op.dof())?;
    let beta = data
        .beta
        .as_ref()
        .ok_or_else(|| Error::invalid("multiplicative source needs beta samples"))?;
    validate_beta(beta, grid)?;
    let (delta, delta_source) = resolve_delta(op, opts)?;
    let rho = multiplicative_rate(delta, grid.final_time(), beta[0])?;

    let a_psi = apply_a(op, &data.psi)?;
    let phi0 = initial_source(op, data, &a_psi, &opts.init)?;
    let stepper = TimeStepper::new(op, grid.tau(), Scheme::Implicit)?;
    let picard = Picard {
        op,
        opts,
        rho_bar: rho,
        delta,
        delta_source,
    };
    picard.run(
        phi0,
        |f| Ok(f.clone()),
        |f| {
            let source = SourceTerm::Modulated {
                field: f.clone(),
                beta: beta.clone(),
            };
            let dw = final_derivative(&stepper, &data.phi, &source, grid)?;
            Ok(&dw + &a_psi)
        },
    )
}
