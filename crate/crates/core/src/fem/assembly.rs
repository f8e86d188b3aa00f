use std::fmt;
use std::sync::Arc;

use super::{DiscreteOperator, Field, Mesh};
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

pub type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

/// Barycentric coordinates of the 3-point rule (weights 1/3), exact for
/// quadratics.
const TRI_POINTS: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

/// Two-point Gauss rule on [0, 1], weights 1/2.
fn edge_points() -> [f64; 2] {
    let h = 0.5 / 3f64.sqrt();
    [0.5 - h, 0.5 + h]
}

/// Diffusivity `k > 0`, reaction `c ≥ 0` and Robin weight `mu ≥ 0`.
#[derive(Clone)]
pub struct Coefficients {
    pub k: ScalarFn,
    pub c: ScalarFn,
    pub mu: ScalarFn,
}

impl Coefficients {
    pub fn new(k: ScalarFn, c: ScalarFn, mu: ScalarFn) -> Self {
        Self { k, c, mu }
    }

    pub fn constant(k: f64, c: f64, mu: f64) -> Self {
        Self {
            k: Arc::new(move |_| k),
            c: Arc::new(move |_| c),
            mu: Arc::new(move |_| mu),
        }
    }
}

impl fmt::Debug for Coefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficients").finish_non_exhaustive()
    }
}

fn at_bary(v: &[[f64; 2]; 3], l: &[f64; 3]) -> [f64; 2] {
    [
        l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
        l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
    ]
}

fn check(name: &'static str, value: f64, p: [f64; 2], strictly_positive: bool) -> Result<f64> {
    let ok = value.is_finite()
        && if strictly_positive {
            value > 0.0
        } else {
            value >= 0.0
        };
    if ok {
        Ok(value)
    } else {
        Err(Error::InvalidCoefficient {
            name,
            value,
            x: p[0],
            y: p[1],
        })
    }
}

/// Assembles the consistent mass matrix `M` and the stiffness matrix `K` of
///
/// ```text
/// a(u, v) = ∫ (k ∇u·∇v + c u v) dx + ∮ mu u v ds
/// ```
///
/// Element blocks are symmetric, so both matrices are symmetric to round-off.
/// `K` stores every mesh coupling even where it is numerically zero, so `M`
/// and `K` share one sparsity pattern.
pub fn assemble(mesh: &Mesh, coeffs: &Coefficients) -> Result<DiscreteOperator> {
    let n = mesh.node_count();
    let mut mass = Vec::with_capacity(9 * mesh.triangles().len());
    let mut stiff =
        Vec::with_capacity(9 * mesh.triangles().len() + 4 * mesh.boundary_edges().len());

    for (t, tri) in mesh.triangles().iter().enumerate() {
        let v = mesh.triangle_vertices(t);
        let area = mesh.signed_area(t);
        if !(area > 0.0) {
            return Err(Error::invalid(format!(
                "triangle {t} has non-positive area"
            )));
        }
        let inv2a = 1.0 / (2.0 * area);
        let grads = [
            [(v[1][1] - v[2][1]) * inv2a, (v[2][0] - v[1][0]) * inv2a],
            [(v[2][1] - v[0][1]) * inv2a, (v[0][0] - v[2][0]) * inv2a],
            [(v[0][1] - v[1][1]) * inv2a, (v[1][0] - v[0][0]) * inv2a],
        ];

        let mut k_mean = 0.0;
        let mut mass_block = [[0.0; 3]; 3];
        let mut react_block = [[0.0; 3]; 3];
        for l in &TRI_POINTS {
            let p = at_bary(&v, l);
            let w = area / 3.0;
            k_mean += w * check("k", (coeffs.k)(p), p, true)?;
            let c = check("c", (coeffs.c)(p), p, false)?;
            for a in 0..3 {
                for b in 0..3 {
                    mass_block[a][b] += w * l[a] * l[b];
                    react_block[a][b] += w * c * l[a] * l[b];
                }
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                let diffusion = k_mean * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                mass.push((tri[a], tri[b], mass_block[a][b]));
                stiff.push((tri[a], tri[b], diffusion + react_block[a][b]));
            }
        }
    }

    let gauss = edge_points();
    for edge in mesh.boundary_edges() {
        let [i, j] = edge.nodes;
        let (pi, pj) = (mesh.nodes()[i], mesh.nodes()[j]);
        let length = ((pj[0] - pi[0]).powi(2) + (pj[1] - pi[1]).powi(2)).sqrt();
        let mut block = [[0.0; 2]; 2];
        for s in gauss {
            let p = [pi[0] + s * (pj[0] - pi[0]), pi[1] + s * (pj[1] - pi[1])];
            let mu = check("mu", (coeffs.mu)(p), p, false)?;
            let phi = [1.0 - s, s];
            for a in 0..2 {
                for b in 0..2 {
                    block[a][b] += 0.5 * length * mu * phi[a] * phi[b];
                }
            }
        }
        let ids = [i, j];
        for a in 0..2 {
            for b in 0..2 {
                stiff.push((ids[a], ids[b], block[a][b]));
            }
        }
    }

    DiscreteOperator::from_matrices(
        SparseMatrix::from_triplets(n, &mass)?,
        SparseMatrix::from_triplets(n, &stiff)?,
    )
}

/// `b_i = ∫ g χ_i dx` with the same 3-point rule as the assembly.
pub fn load_vector(mesh: &Mesh, g: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; mesh.node_count()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let v = mesh.triangle_vertices(t);
        let w = mesh.signed_area(t) / 3.0;
        for l in &TRI_POINTS {
            let gp = g(at_bary(&v, l));
            for a in 0..3 {
                b[tri[a]] += w * gp * l[a];
            }
        }
    }
    b
}

/// Nodal interpolant of `g`.
pub fn interpolate(mesh: &Mesh, g: impl Fn([f64; 2]) -> f64) -> Field {
    Field::from_vec(mesh.nodes().iter().map(|&p| g(p)).collect())
}
