//! Semi-discrete Cauchy problems `dw/dt + A w = s(t)` on uniform time grids.
//!
//! A march keeps only the current and previous layer. Anything the inverse
//! iterations need from the trajectory is accumulated by [`Observer`]s as the
//! march streams past.

use crate::error::{Error, Result};
use crate::fem::{DiscreteOperator, Field};
use crate::linalg::{cg_solve_with_guess, SparseMatrix};

/// Uniform grid `t_n = n τ`, `n = 0..=N`, with `T = N τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    tau: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(tau: f64, steps: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!(
                "time step must be positive, got {tau}"
            )));
        }
        if steps == 0 {
            return Err(Error::invalid("time grid needs at least one step"));
        }
        Ok(Self { tau, steps })
    }

    /// Grid covering `[0, final_time]`; `final_time / tau` must be an integer.
    pub fn covering(final_time: f64, tau: f64) -> Result<Self> {
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(Error::invalid(format!(
                "final time must be positive, got {final_time}"
            )));
        }
        let ratio = final_time / tau;
        let steps = ratio.round();
        if !(steps >= 1.0) || (ratio - steps).abs() > 1e-9 * steps {
            return Err(Error::invalid(format!(
                "T = {final_time} is not an integer multiple of tau = {tau}"
            )));
        }
        Self::new(tau, steps as usize)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn final_time(&self) -> f64 {
        self.tau * self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        self.tau * n as f64
    }

    /// `f(t_n)` for `n = 0..=N`.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..=self.steps).map(|n| f(self.time(n))).collect()
    }
}

/// Right-hand side of the Cauchy problem.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceTerm {
    Zero,
    Constant(Field),
    /// `β(t_n) φ`, with `beta[n] = β(t_n)` and `β(T) = 1`.
    Modulated {
        field: Field,
        beta: Vec<f64>,
    },
}

impl SourceTerm {
    pub fn modulated(field: Field, beta: Vec<f64>) -> Result<Self> {
        match beta.last() {
            Some(last) if (last - 1.0).abs() <= 1e-12 => Ok(Self::Modulated { field, beta }),
            Some(last) => Err(Error::invalid(format!("beta(T) must equal 1, got {last}"))),
            None => Err(Error::invalid("beta samples are empty")),
        }
    }

    fn validate(&self, grid: &TimeGrid, dof: usize) -> Result<()> {
        match self {
            SourceTerm::Zero => Ok(()),
            SourceTerm::Constant(f) => check_dof(f.len(), dof),
            SourceTerm::Modulated { field, beta } => {
                check_dof(field.len(), dof)?;
                if beta.len() != grid.steps() + 1 {
                    return Err(Error::invalid(format!(
                        "beta has {} samples, grid needs {}",
                        beta.len(),
                        grid.steps() + 1
                    )));
                }
                let last = beta[grid.steps()];
                if (last - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid(format!("beta(T) must equal 1, got {last}")));
                }
                Ok(())
            }
        }
    }

    /// `(β_n, φ)` at layer `n`; `None` for the zero source.
    fn at(&self, n: usize) -> Option<(f64, &Field)> {
        match self {
            SourceTerm::Zero => None,
            SourceTerm::Constant(f) => Some((1.0, f)),
            SourceTerm::Modulated { field, beta } => Some((beta[n], field)),
        }
    }
}

fn check_dof(len: usize, dof: usize) -> Result<()> {
    if len == dof {
        Ok(())
    } else {
        Err(Error::dims(dof, len))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Backward Euler: `(w_{n+1} - w_n)/τ + A w_{n+1} = s_{n+1}`.
    Implicit,
    /// `(w_{n+1} - w_n)/τ + A (w_n + w_{n+1})/2 = (s_n + s_{n+1})/2`.
    CrankNicolson,
}

/// Receives every pair of consecutive layers during a march.
pub trait Observer {
    /// Called once before the first step.
    fn start(&mut self, grid: &TimeGrid, w0: &Field) -> Result<()>;
    /// Called after layer `n` (≥ 1) has been computed from `prev = w_{n-1}`.
    fn observe(&mut self, n: usize, prev: &Field, current: &Field);
}

/// Keeps `w_{N-1}` and `w_N`.
#[derive(Debug, Clone, Default)]
pub struct LastTwo {
    pub previous: Option<Field>,
    pub last: Option<Field>,
}

impl LastTwo {
    pub fn new() -> Self {
        Self::default()
    }

    /// `(w_N - w_{N-1}) / τ`.
    pub fn backward_difference(&self, tau: f64) -> Option<Field> {
        match (&self.previous, &self.last) {
            (Some(p), Some(l)) => Some(&(l - p) * (1.0 / tau)),
            _ => None,
        }
    }
}

impl Observer for LastTwo {
    fn start(&mut self, _grid: &TimeGrid, w0: &Field) -> Result<()> {
        self.previous = None;
        self.last = Some(w0.clone());
        Ok(())
    }

    fn observe(&mut self, _n: usize, prev: &Field, current: &Field) {
        // prev is the previous `last`; swap instead of cloning it again
        match self.last.take() {
            Some(mut old) if old.len() == prev.len() => {
                old.values_mut().copy_from_slice(prev.values());
                self.previous = Some(old);
            }
            _ => self.previous = Some(prev.clone()),
        }
        self.last = Some(current.clone());
    }
}

/// Streams `Σ_{n=1}^{N} ω_n (w_n - w_{n-1})`.
#[derive(Debug, Clone)]
pub struct WeightedDerivativeSum {
    weights: Vec<f64>,
    sum: Vec<f64>,
}

impl WeightedDerivativeSum {
    /// `weights[n] = ω(t_n)`, `n = 0..=N`; `weights[0]` never contributes.
    pub fn new(weights: Vec<f64>) -> Self {
        Self {
            weights,
            sum: Vec::new(),
        }
    }

    pub fn sum(&self) -> Field {
        Field::from_vec(self.sum.clone())
    }
}

impl Observer for WeightedDerivativeSum {
    fn start(&mut self, grid: &TimeGrid, w0: &Field) -> Result<()> {
        if self.weights.len() != grid.steps() + 1 {
            return Err(Error::dims(grid.steps() + 1, self.weights.len()));
        }
        self.sum = vec![0.0; w0.len()];
        Ok(())
    }

    fn observe(&mut self, n: usize, prev: &Field, current: &Field) {
        let w = self.weights[n];
        if w == 0.0 {
            return;
        }
        for ((s, a), b) in self.sum.iter_mut().zip(current.values()).zip(prev.values()) {
            *s += w * (a - b);
        }
    }
}

/// Streams `τ Σ_{n=1}^{N} ω_n w_n`, the right-endpoint quadrature of
/// `∫ ω(t) w(t) dt`.
#[derive(Debug, Clone)]
pub struct WeightedValueSum {
    weights: Vec<f64>,
    tau: f64,
    sum: Vec<f64>,
}

impl WeightedValueSum {
    pub fn new(weights: Vec<f64>) -> Self {
        Self {
            weights,
            tau: 0.0,
            sum: Vec::new(),
        }
    }

    pub fn sum(&self) -> Field {
        Field::from_vec(self.sum.clone())
    }
}

impl Observer for WeightedValueSum {
    fn start(&mut self, grid: &TimeGrid, w0: &Field) -> Result<()> {
        if self.weights.len() != grid.steps() + 1 {
            return Err(Error::dims(grid.steps() + 1, self.weights.len()));
        }
        self.tau = grid.tau();
        self.sum = vec![0.0; w0.len()];
        Ok(())
    }

    fn observe(&mut self, n: usize, _prev: &Field, current: &Field) {
        let w = self.weights[n] * self.tau;
        if w == 0.0 {
            return;
        }
        for (s, a) in self.sum.iter_mut().zip(current.values()) {
            *s += w * a;
        }
    }
}

/// Captures the layer closest to a requested time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    time: f64,
    step: usize,
    value: Option<Field>,
}

impl Snapshot {
    pub fn at_time(time: f64) -> Self {
        Self {
            time,
            step: 0,
            value: None,
        }
    }

    pub fn value(&self) -> Option<&Field> {
        self.value.as_ref()
    }
}

impl Observer for Snapshot {
    fn start(&mut self, grid: &TimeGrid, w0: &Field) -> Result<()> {
        if !(self.time >= 0.0 && self.time <= grid.final_time() * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!(
                "snapshot time {} outside the grid",
                self.time
            )));
        }
        self.step = ((self.time / grid.tau()).round() as usize).min(grid.steps());
        self.value = (self.step == 0).then(|| w0.clone());
        Ok(())
    }

    fn observe(&mut self, n: usize, _prev: &Field, current: &Field) {
        if n == self.step {
            self.value = Some(current.clone());
        }
    }
}

/// Pre-built system matrices for repeated steps with a fixed `τ`.
#[derive(Debug, Clone)]
pub struct TimeStepper<'a> {
    op: &'a DiscreteOperator,
    tau: f64,
    scheme: Scheme,
    lhs: SparseMatrix,
    lhs_diag: Vec<f64>,
    /// `M - τ/2 K` for Crank–Nicolson
    explicit_part: Option<SparseMatrix>,
}

impl<'a> TimeStepper<'a> {
    pub fn new(op: &'a DiscreteOperator, tau: f64, scheme: Scheme) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!(
                "time step must be positive, got {tau}"
            )));
        }
        let theta = match scheme {
            Scheme::Implicit => tau,
            Scheme::CrankNicolson => 0.5 * tau,
        };
        let lhs = op.mass().linear_combination(1.0, op.stiffness(), theta)?;
        let explicit_part = match scheme {
            Scheme::Implicit => None,
            Scheme::CrankNicolson => {
                Some(op.mass().linear_combination(1.0, op.stiffness(), -theta)?)
            }
        };
        let lhs_diag = lhs.diagonal();
        if lhs_diag.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::invalid(
                "time-step matrix has a non-positive diagonal",
            ));
        }
        Ok(Self {
            op,
            tau,
            scheme,
            lhs,
            lhs_diag,
            explicit_part,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// One step from `w` with source values `rhs_n = s(t_n)` and
    /// `rhs_np1 = s(t_{n+1})`, each given as `(β, φ)`. The implicit scheme
    /// only reads `rhs_np1`.
    pub fn step(
        &self,
        w: &Field,
        rhs_n: Option<(f64, &Field)>,
        rhs_np1: Option<(f64, &Field)>,
    ) -> Result<Field> {
        let dof = self.op.dof();
        check_dof(w.len(), dof)?;
        for (_, f) in rhs_n.iter().chain(rhs_np1.iter()) {
            check_dof(f.len(), dof)?;
        }
        let mass = self.op.mass();
        let mut b = vec![0.0; dof];
        match self.scheme {
            Scheme::Implicit => {
                // M (w + τ s_{n+1})
                let mut v = w.values().to_vec();
                if let Some((beta, f)) = rhs_np1 {
                    crate::linalg::axpy(self.tau * beta, f.values(), &mut v);
                }
                mass.mul_unchecked(&v, &mut b);
            }
            Scheme::CrankNicolson => {
                let explicit = self
                    .explicit_part
                    .as_ref()
                    .expect("built for Crank-Nicolson");
                explicit.mul_unchecked(w.values(), &mut b);
                let mut s = vec![0.0; dof];
                let mut any = false;
                for (beta, f) in rhs_n.into_iter().chain(rhs_np1) {
                    crate::linalg::axpy(0.5 * self.tau * beta, f.values(), &mut s);
                    any = true;
                }
                if any {
                    let mut ms = vec![0.0; dof];
                    mass.mul_unchecked(&s, &mut ms);
                    crate::linalg::axpy(1.0, &ms, &mut b);
                }
            }
        }
        let out = cg_solve_with_guess(
            &self.lhs,
            &b,
            w.values(),
            self.op.solve_options(),
            Some(&self.lhs_diag),
        )?;
        Ok(Field::from_vec(out.x))
    }
}

/// One fully implicit step: `(M + τK) w_{n+1} = M w_n + τ M rhs`.
pub fn step_implicit(op: &DiscreteOperator, w: &Field, tau: f64, rhs: &Field) -> Result<Field> {
    TimeStepper::new(op, tau, Scheme::Implicit)?.step(w, None, Some((1.0, rhs)))
}

/// One Crank–Nicolson step:
/// `(M + τ/2 K) w_{n+1} = (M - τ/2 K) w_n + τ/2 M (rhs_n + rhs_np1)`.
pub fn step_crank_nicolson(
    op: &DiscreteOperator,
    w: &Field,
    tau: f64,
    rhs_n: &Field,
    rhs_np1: &Field,
) -> Result<Field> {
    TimeStepper::new(op, tau, Scheme::CrankNicolson)?.step(
        w,
        Some((1.0, rhs_n)),
        Some((1.0, rhs_np1)),
    )
}

/// Marches from `w0` over `grid` and returns `w_N`. Memory stays `O(dof)`;
/// observers see each consecutive pair of layers.
pub fn solve_cauchy(
    op: &DiscreteOperator,
    w0: &Field,
    source: &SourceTerm,
    grid: &TimeGrid,
    scheme: Scheme,
    observers: &mut [&mut dyn Observer],
) -> Result<Field> {
    let stepper = TimeStepper::new(op, grid.tau(), scheme)?;
    march(&stepper, w0, source, grid, observers)
}

/// [`solve_cauchy`] with a stepper that is reused across marches.
pub fn march(
    stepper: &TimeStepper<'_>,
    w0: &Field,
    source: &SourceTerm,
    grid: &TimeGrid,
    observers: &mut [&mut dyn Observer],
) -> Result<Field> {
    let dof = stepper.op.dof();
    check_dof(w0.len(), dof)?;
    if (stepper.tau() - grid.tau()).abs() > 1e-15 * grid.tau() {
        return Err(Error::invalid("stepper and grid disagree on tau"));
    }
    source.validate(grid, dof)?;
    for obs in observers.iter_mut() {
        obs.start(grid, w0)?;
    }
    let mut current = w0.clone();
    for n in 0..grid.steps() {
        let next = stepper.step(&current, source.at(n), source.at(n + 1))?;
        for obs in observers.iter_mut() {
            obs.observe(n + 1, &current, &next);
        }
        current = next;
    }
    Ok(current)
}
