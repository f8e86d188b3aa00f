//! Sparse symmetric linear algebra.

mod cg;
mod eigen;
mod sparse;

pub use cg::{cg_solve, cg_solve_monitored, cg_solve_with_guess, CgOutcome, SolveOptions};
pub use eigen::{estimate_delta, smallest_generalized_eigenvalue, EigenEstimate};
pub use sparse::SparseMatrix;

use crate::error::{Error, Result};

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Discrete L2 inner product `xᵀ M y`.
pub fn m_inner(mass: &SparseMatrix, x: &[f64], y: &[f64]) -> Result<f64> {
    if y.len() != x.len() {
        return Err(Error::dims(x.len(), y.len()));
    }
    let mx = mass.spmv(x)?;
    Ok(dot(&mx, y))
}

/// Discrete L2 norm `sqrt(xᵀ M x)`.
pub fn m_norm(mass: &SparseMatrix, x: &[f64]) -> Result<f64> {
    // Round-off can leave a tiny negative value for x close to zero.
    Ok(m_inner(mass, x, x)?.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spd_3x3() -> SparseMatrix {
        SparseMatrix::from_triplets(
            3,
            &[
                (0, 0, 4.0),
                (0, 1, 1.0),
                (1, 0, 1.0),
                (1, 1, 3.0),
                (1, 2, -0.5),
                (2, 1, -0.5),
                (2, 2, 2.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn m_norm_of_zero_is_zero() {
        assert_eq!(m_norm(&spd_3x3(), &[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn m_inner_rejects_mismatched_lengths() {
        assert!(matches!(
            m_inner(&spd_3x3(), &[1.0; 3], &[1.0; 2]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(m_norm(&spd_3x3(), &[1.0; 4]).is_err());
    }

    proptest! {
        #[test]
        fn cauchy_schwarz(x in prop::collection::vec(-10.0f64..10.0, 3),
                          y in prop::collection::vec(-10.0f64..10.0, 3)) {
            let m = spd_3x3();
            let lhs = m_inner(&m, &x, &y).unwrap().abs();
            let rhs = m_norm(&m, &x).unwrap() * m_norm(&m, &y).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn m_norm_vanishes_only_at_zero(x in prop::collection::vec(-1.0f64..1.0, 3)) {
            let n = m_norm(&spd_3x3(), &x).unwrap();
            if x.iter().any(|v| *v != 0.0) {
                prop_assert!(n > 0.0);
            } else {
                prop_assert_eq!(n, 0.0);
            }
        }
    }
}
