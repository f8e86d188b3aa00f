use super::{load_vector, Field, Mesh};
use crate::error::{Error, Result};
use crate::linalg::{self, cg_solve, SolveOptions, SparseMatrix};

/// The discrete elliptic operator `A = M⁻¹K`, held as the pair `(M, K)`.
///
/// With mass lumping enabled, `M` is replaced everywhere by its row-sum
/// diagonal and `lumped_mass` holds that diagonal.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    lumped_mass: Option<Vec<f64>>,
    mass_diag: Vec<f64>,
    solve_opts: SolveOptions,
}

impl DiscreteOperator {
    pub fn from_matrices(mass: SparseMatrix, stiffness: SparseMatrix) -> Result<Self> {
        if mass.n() != stiffness.n() {
            return Err(Error::dims(mass.n(), stiffness.n()));
        }
        let mass_diag = mass.diagonal();
        if mass_diag.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::invalid("mass matrix must have a positive diagonal"));
        }
        Ok(Self {
            mass,
            stiffness,
            lumped_mass: None,
            mass_diag,
            solve_opts: SolveOptions::default(),
        })
    }

    /// Replaces `M` by `diag(row sums of M)`.
    pub fn with_lumped_mass(mut self) -> Result<Self> {
        let lumped = self.mass.row_sums();
        if lumped.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::invalid("lumped mass must be positive"));
        }
        self.mass = SparseMatrix::from_diagonal(&lumped);
        self.mass_diag = lumped.clone();
        self.lumped_mass = Some(lumped);
        Ok(self)
    }

    pub fn with_solve_options(mut self, opts: SolveOptions) -> Result<Self> {
        opts.validate()?;
        self.solve_opts = opts;
        Ok(self)
    }

    pub fn dof(&self) -> usize {
        self.mass.n()
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn lumped_mass(&self) -> Option<&[f64]> {
        self.lumped_mass.as_deref()
    }

    pub fn solve_options(&self) -> &SolveOptions {
        &self.solve_opts
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len == self.dof() {
            Ok(())
        } else {
            Err(Error::dims(self.dof(), len))
        }
    }

    /// `M⁻¹ b`.
    pub fn mass_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b.len())?;
        if let Some(d) = &self.lumped_mass {
            return Ok(b.iter().zip(d).map(|(v, m)| v / m).collect());
        }
        Ok(cg_solve(&self.mass, b, &self.solve_opts, Some(&self.mass_diag))?.x)
    }

    pub fn m_norm(&self, x: &Field) -> Result<f64> {
        linalg::m_norm(&self.mass, x.values())
    }

    pub fn m_inner(&self, x: &Field, y: &Field) -> Result<f64> {
        linalg::m_inner(&self.mass, x.values(), y.values())
    }
}

/// L2 projection of `g` onto the P1 space: `M⁻¹ b` with `b_i = ∫ g χ_i`.
pub fn project_l2(
    op: &DiscreteOperator,
    g: impl Fn([f64; 2]) -> f64,
    mesh: &Mesh,
) -> Result<Field> {
    op.check_len(mesh.node_count())?;
    let b = load_vector(mesh, g);
    op.mass_solve(&b).map(Field::from_vec)
}

/// `A y = M⁻¹ K y`.
pub fn apply_a(op: &DiscreteOperator, y: &Field) -> Result<Field> {
    op.check_len(y.len())?;
    let ky = op.stiffness.spmv(y.values())?;
    op.mass_solve(&ky).map(Field::from_vec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, interpolate, Coefficients};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn base_op(m: usize) -> (Mesh, DiscreteOperator) {
        let mesh = Mesh::unit_square(m).unwrap();
        let op = assemble(&mesh, &Coefficients::constant(1.0, 10.0, 0.0)).unwrap();
        (mesh, op)
    }

    #[test]
    fn projection_of_zero_and_constants() {
        let (mesh, op) = base_op(6);
        let zero = project_l2(&op, |_| 0.0, &mesh).unwrap();
        assert!(zero.values().iter().all(|v| *v == 0.0));
        let five = project_l2(&op, |_| 5.0, &mesh).unwrap();
        assert!(five.values().iter().all(|v| (v - 5.0).abs() < 1e-9));
    }

    #[test]
    fn projection_is_idempotent_on_p1() {
        let (mesh, op) = base_op(8);
        let g = |p: [f64; 2]| 1.0 + 2.0 * p[0] - 0.5 * p[1];
        // the load vector of a P1 function is M times its nodal values
        let interp = interpolate(&mesh, g);
        let projected = project_l2(&op, g, &mesh).unwrap();
        assert!(projected.max_abs_diff(&interp) < 1e-9);
    }

    #[test]
    fn logistic_projection_is_close_to_interpolant() {
        let (mesh, op) = base_op(50);
        let g = |p: [f64; 2]| 1.0 / (1.0 + (10.0 * (p[0] - p[1])).exp());
        let diff = &project_l2(&op, g, &mesh).unwrap() - &interpolate(&mesh, g);
        assert!(op.m_norm(&diff).unwrap() < 1e-2);
    }

    #[test]
    fn apply_a_on_constants() {
        let (mesh, op) = base_op(5);
        let ones = Field::constant(mesh.node_count(), 1.0);
        let a1 = apply_a(&op, &ones).unwrap();
        assert!(a1.values().iter().all(|v| (v - 10.0).abs() < 1e-8));
        let zero = apply_a(&op, &Field::zeros(mesh.node_count())).unwrap();
        assert!(zero.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn apply_a_matches_dense_solve() {
        let (mesh, op) = base_op(2);
        let op = op
            .with_solve_options(SolveOptions::with_rel_tol(1e-14))
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = Field::from_vec((0..9).map(|_| rng.random_range(-1.0..1.0)).collect());
        let got = apply_a(&op, &y).unwrap();

        let m = nalgebra::DMatrix::from_fn(9, 9, |i, j| op.mass().get(i, j));
        let k = nalgebra::DMatrix::from_fn(9, 9, |i, j| op.stiffness().get(i, j));
        let yv = nalgebra::DVector::from_column_slice(y.values());
        let expected = m.lu().solve(&(k * yv)).unwrap();
        for i in 0..mesh.node_count() {
            assert!((got.values()[i] - expected[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn lumped_mass_uses_row_sums() {
        let (mesh, op) = base_op(4);
        let sums = op.mass().row_sums();
        let lumped = op.with_lumped_mass().unwrap();
        assert_eq!(lumped.lumped_mass().unwrap(), sums.as_slice());
        let ones = Field::constant(mesh.node_count(), 1.0);
        // constants stay exact: K 1 = c M 1 and row sums agree
        let a1 = apply_a(&lumped, &ones).unwrap();
        assert!(a1.values().iter().all(|v| (v - 10.0).abs() < 1e-10));
        assert!((lumped.m_norm(&ones).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn m_norm_of_unit_constant_is_area() {
        let (mesh, op) = base_op(9);
        let ones = Field::constant(mesh.node_count(), 1.0);
        assert!((op.m_norm(&ones).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let (mesh, op) = base_op(2);
        assert!(apply_a(&op, &Field::zeros(3)).is_err());
        let other = Mesh::unit_square(3).unwrap();
        assert!(project_l2(&op, |_| 1.0, &other).is_err());
        let _ = mesh;
    }
}
