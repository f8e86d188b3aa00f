//! Dense all-at-once solves of the discrete systems whose fixed points the
//! iterations compute. Independent of the library's time stepping and CG.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srcid::fem::{assemble, Coefficients, DiscreteOperator, Field, Mesh};
use srcid::linalg::{SolveOptions, SparseMatrix};

pub fn dense(a: &SparseMatrix) -> DMatrix<f64> {
    let rows = a.to_dense();
    DMatrix::from_fn(a.n(), a.n(), |i, j| rows[i][j])
}

pub fn vec_of(f: &Field) -> DVector<f64> {
    DVector::from_column_slice(f.values())
}

pub fn max_abs_diff(a: &Field, b: &DVector<f64>) -> f64 {
    a.values()
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Small random problem: constant coefficients with `c ≥ 2`, random `ϕ, ψ`.
pub struct SmallProblem {
    pub op: DiscreteOperator,
    pub phi: Field,
    pub psi: Field,
}

pub fn small_problem(seed: u64, m: usize) -> SmallProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(0.5..2.0);
    let c = rng.random_range(2.0..5.0);
    let mu = rng.random_range(0.0..1.0);
    let mesh = Mesh::unit_square(m).unwrap();
    let op = assemble(&mesh, &Coefficients::constant(k, c, mu))
        .unwrap()
        .with_solve_options(SolveOptions {
            rel_tol: 1e-14,
            max_iters: Some(1000),
        })
        .unwrap();
    let n = op.dof();
    let mut field = || Field::from_vec((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
    let phi = field();
    let psi = field();
    SmallProblem { op, phi, psi }
}

struct Blocks {
    n: usize,
    mat: DMatrix<f64>,
    rhs: DVector<f64>,
}

impl Blocks {
    fn new(n: usize, blocks: usize) -> Self {
        Self {
            n,
            mat: DMatrix::zeros(n * blocks, n * blocks),
            rhs: DVector::zeros(n * blocks),
        }
    }

    fn add(&mut self, row: usize, col: usize, b: &DMatrix<f64>) {
        let n = self.n;
        let mut view = self.mat.view_mut((row * n, col * n), (n, n));
        view += b;
    }

    fn set_rhs(&mut self, row: usize, v: &DVector<f64>) {
        self.rhs.rows_mut(row * self.n, self.n).copy_from(v);
    }

    fn solve(self) -> DVector<f64> {
        self.mat
            .lu()
            .solve(&self.rhs)
            .expect("nonsingular block system")
    }

    fn block(x: &DVector<f64>, n: usize, i: usize) -> DVector<f64> {
        x.rows(i * n, n).into_owned()
    }
}

/// `A = M⁻¹ K`, densely.
pub fn dense_a(op: &DiscreteOperator) -> DMatrix<f64> {
    let m = dense(op.mass());
    m.clone().lu().solve(&dense(op.stiffness())).unwrap()
}

/// Non-local problem: `(M + τK) v_{n+1} = M v_n`, `v_N - v_0 = χ`,
/// `χ = A(ϕ - ψ)`; returns `Aϕ + v_0`.
pub fn oracle_nonlocal(
    op: &DiscreteOperator,
    phi: &Field,
    psi: &Field,
    tau: f64,
    steps: usize,
) -> DVector<f64> {
    let n = op.dof();
    let m = dense(op.mass());
    let b = &m + dense(op.stiffness()) * tau;
    let a = dense_a(op);
    let chi = &a * (vec_of(phi) - vec_of(psi));
    // unknowns v_0..v_N
    let mut sys = Blocks::new(n, steps + 1);
    for s in 0..steps {
        sys.add(s, s + 1, &b);
        sys.add(s, s, &(-&m));
    }
    let id = DMatrix::identity(n, n);
    sys.add(steps, steps, &id);
    sys.add(steps, 0, &(-&id));
    sys.set_rhs(steps, &chi);
    let x = sys.solve();
    &a * vec_of(phi) + Blocks::block(&x, n, 0)
}

/// Implicit march with source `β_{n+1} φ` from `w_0 = ϕ` and an observation
/// constraint; unknowns `φ, w_1..w_N`. `weights` selects the constraint
/// `Σ_n weights[n] w_n = ψ` (the `n = 0` weight multiplies the known `ϕ`).
fn oracle_source(
    op: &DiscreteOperator,
    phi0: &Field,
    psi: &Field,
    tau: f64,
    beta: &[f64],
    weights: &[f64],
) -> DVector<f64> {
    let n = op.dof();
    let steps = beta.len() - 1;
    let m = dense(op.mass());
    let b = &m + dense(op.stiffness()) * tau;
    let w0 = vec_of(phi0);
    let id = DMatrix::<f64>::identity(n, n);
    // block 0 = φ, block j = w_j
    let mut sys = Blocks::new(n, steps + 1);
    for s in 0..steps {
        sys.add(s, s + 1, &b);
        sys.add(s, 0, &(&m * (-tau * beta[s + 1])));
        if s == 0 {
            sys.set_rhs(0, &(&m * &w0));
        } else {
            sys.add(s, s, &(-&m));
        }
    }
    for (j, w) in weights.iter().enumerate().skip(1) {
        if *w != 0.0 {
            sys.add(steps, j, &(&id * *w));
        }
    }
    sys.set_rhs(steps, &(vec_of(psi) - &w0 * weights[0]));
    Blocks::block(&sys.solve(), n, 0)
}

/// `w_N = ψ` with a constant source.
pub fn oracle_rhs(
    op: &DiscreteOperator,
    phi: &Field,
    psi: &Field,
    tau: f64,
    steps: usize,
) -> DVector<f64> {
    let mut weights = vec![0.0; steps + 1];
    weights[steps] = 1.0;
    oracle_source(op, phi, psi, tau, &vec![1.0; steps + 1], &weights)
}

/// `τ Σ_{n=1}^{N} ω_n w_n = ψ` with a constant source.
pub fn oracle_integral(
    op: &DiscreteOperator,
    phi: &Field,
    psi: &Field,
    tau: f64,
    omega: &[f64],
) -> DVector<f64> {
    let mut weights: Vec<f64> = omega.iter().map(|w| w * tau).collect();
    weights[0] = 0.0;
    oracle_source(op, phi, psi, tau, &vec![1.0; omega.len()], &weights)
}

/// `w_N = ψ` with source `β(t) φ`.
pub fn oracle_multiplicative(
    op: &DiscreteOperator,
    phi: &Field,
    psi: &Field,
    tau: f64,
    beta: &[f64],
) -> DVector<f64> {
    let steps = beta.len() - 1;
    let mut weights = vec![0.0; steps + 1];
    weights[steps] = 1.0;
    oracle_source(op, phi, psi, tau, beta, &weights)
}
