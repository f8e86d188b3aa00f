//! Smallest generalized eigenvalue of `K y = λ M y` by inverse power iteration.

use super::{cg_solve_with_guess, dot, SolveOptions, SparseMatrix};
use crate::error::{Error, Result};
use crate::fem::DiscreteOperator;

const MAX_POWER_STEPS: usize = 500;

#[derive(Debug, Clone)]
pub struct EigenEstimate {
    pub value: f64,
    /// M-normalised eigenvector.
    pub vector: Vec<f64>,
    pub iterations: usize,
}

/// Coercivity constant `δ` of `A = M⁻¹K`, i.e. the largest `δ` with
/// `A ≥ δ I` in the discrete L2 inner product.
pub fn estimate_delta(op: &DiscreteOperator, tol: f64) -> Result<f64> {
    let solve = SolveOptions {
        rel_tol: op.solve_options().rel_tol.min(1e-12),
        max_iters: op.solve_options().max_iters,
    };
    smallest_generalized_eigenvalue(op.stiffness(), op.mass(), tol, &solve).map(|e| e.value)
}

pub fn smallest_generalized_eigenvalue(
    stiffness: &SparseMatrix,
    mass: &SparseMatrix,
    tol: f64,
    solve: &SolveOptions,
) -> Result<EigenEstimate> {
    let n = stiffness.n();
    if mass.n() != n {
        return Err(Error::dims(n, mass.n()));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("eigenvalue tolerance must be positive"));
    }
    if n == 0 {
        return Err(Error::invalid("empty operator"));
    }

    let k_diag = stiffness.diagonal();
    let m_diag = mass.diagonal();
    let scale = k_diag
        .iter()
        .zip(&m_diag)
        .map(|(k, m)| (k / m).abs())
        .fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::DegenerateOperator(
            "stiffness matrix has a zero diagonal".into(),
        ));
    }

    // Constants are the kernel of the pure Neumann operator without reaction;
    // catch that before handing a singular system to CG.
    let ones = vec![1.0; n];
    let k1 = stiffness.spmv(&ones)?;
    let m1 = mass.spmv(&ones)?;
    if dot(&k1, &ones) <= 1e-13 * scale * dot(&m1, &ones) {
        return Err(Error::DegenerateOperator(
            "constant vector lies in the kernel of the stiffness matrix".into(),
        ));
    }

    let precond = k_diag.iter().all(|d| *d > 0.0).then_some(k_diag.as_slice());
    let m_normalize = |y: &mut Vec<f64>| -> Result<()> {
        let my = mass.spmv(y)?;
        let norm = dot(&my, y).sqrt();
        if !(norm > 0.0) {
            return Err(Error::DegenerateOperator(
                "iterate collapsed to zero".into(),
            ));
        }
        y.iter_mut().for_each(|v| *v /= norm);
        Ok(())
    };
    let rayleigh = |y: &[f64]| -> Result<f64> {
        let ky = stiffness.spmv(y)?;
        Ok(dot(&ky, y))
    };

    // deterministic start with components on every mode
    let mut y: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.25 * ((i as f64) * 0.7).sin())
        .collect();
    m_normalize(&mut y)?;
    let mut lambda = rayleigh(&y)?;

    for step in 1..=MAX_POWER_STEPS {
        let rhs = mass.spmv(&y)?;
        let guess: Vec<f64> = y
            .iter()
            .map(|v| v / lambda.max(f64::MIN_POSITIVE))
            .collect();
        let next = match cg_solve_with_guess(stiffness, &rhs, &guess, solve, precond) {
            Ok(out) => out.x,
            Err(Error::SolverFailure { .. }) => {
                return Err(Error::DegenerateOperator(
                    "stiffness solve failed; matrix is singular or indefinite".into(),
                ))
            }
            Err(e) => return Err(e),
        };
        y = next;
        m_normalize(&mut y)?;
        let next_lambda = rayleigh(&y)?;
        let change = (next_lambda - lambda).abs();
        lambda = next_lambda;
        if change <= tol * lambda.abs() {
            if lambda <= 1e-12 * scale {
                return Err(Error::DegenerateOperator(format!(
                    "smallest eigenvalue {lambda:e} is not positive"
                )));
            }
            return Ok(EigenEstimate {
                value: lambda,
                vector: y,
                iterations: step,
            });
        }
    }
    Err(Error::SolverFailure {
        iterations: MAX_POWER_STEPS,
        relative_residual: f64::NAN,
    })
}
