use std::io::{self, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

/// Boundary edge, oriented counter-clockwise around the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub side: Side,
    /// The single triangle containing the edge.
    pub triangle: usize,
}

/// Structured triangulation of an axis-aligned rectangle.
///
/// Nodes are numbered row-major (`x1` fastest). Each cell is split along its
/// lower-left to upper-right diagonal, and all triangles are counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    m: usize,
}

impl Mesh {
    pub fn unit_square(m: usize) -> Result<Self> {
        Self::rectangle(m, [0.0, 0.0], [1.0, 1.0])
    }

    /// `m` subdivisions per axis of `[lower, upper]`.
    pub fn rectangle(m: usize, lower: [f64; 2], upper: [f64; 2]) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid(
                "mesh needs at least one subdivision per axis",
            ));
        }
        if !(upper[0] > lower[0] && upper[1] > lower[1]) {
            return Err(Error::invalid(
                "rectangle corners must satisfy lower < upper",
            ));
        }
        let stride = m + 1;
        let coord = |lo: f64, hi: f64, i: usize| {
            if i == m {
                hi
            } else {
                lo + (hi - lo) * (i as f64) / (m as f64)
            }
        };
        let mut nodes = Vec::with_capacity(stride * stride);
        for j in 0..=m {
            for i in 0..=m {
                nodes.push([coord(lower[0], upper[0], i), coord(lower[1], upper[1], j)]);
            }
        }

        let mut triangles = Vec::with_capacity(2 * m * m);
        let mut boundary_edges = Vec::with_capacity(4 * m);
        for j in 0..m {
            for i in 0..m {
                let a = j * stride + i;
                let b = a + 1;
                let c = a + stride + 1;
                let d = a + stride;
                let lower_tri = triangles.len();
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
                let upper_tri = lower_tri + 1;
                if j == 0 {
                    boundary_edges.push(BoundaryEdge {
                        nodes: [a, b],
                        side: Side::Bottom,
                        triangle: lower_tri,
                    });
                }
                if i == m - 1 {
                    boundary_edges.push(BoundaryEdge {
                        nodes: [b, c],
                        side: Side::Right,
                        triangle: lower_tri,
                    });
                }
                if j == m - 1 {
                    boundary_edges.push(BoundaryEdge {
                        nodes: [c, d],
                        side: Side::Top,
                        triangle: upper_tri,
                    });
                }
                if i == 0 {
                    boundary_edges.push(BoundaryEdge {
                        nodes: [d, a],
                        side: Side::Left,
                        triangle: upper_tri,
                    });
                }
            }
        }
        Ok(Self {
            nodes,
            triangles,
            boundary_edges,
            m,
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn subdivisions(&self) -> usize {
        self.m
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_vertices(&self, t: usize) -> [[f64; 2]; 3] {
        self.triangles[t].map(|v| self.nodes[v])
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_vertices(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    /// Plain-text dump: `node_count triangle_count`, then one `x1 x2` line per
    /// node, then one index triple per triangle.
    pub fn write_debug<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{} {}", self.nodes.len(), self.triangles.len())?;
        for [x, y] in &self.nodes {
            writeln!(out, "{x:.16e} {y:.16e}")?;
        }
        for [a, b, c] in &self.triangles {
            writeln!(out, "{a} {b} {c}")?;
        }
        Ok(())
    }
}
