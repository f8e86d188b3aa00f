use std::ops::{Add, Mul, Sub};

/// Nodal coefficient vector of a P1 function.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self {
            values: vec![value; n],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Field) {
        assert_eq!(self.len(), other.len(), "field length mismatch");
        crate::linalg::axpy(alpha, &other.values, &mut self.values);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        assert_eq!(self.len(), other.len(), "field length mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl From<Vec<f64>> for Field {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

impl Add for &Field {
    type Output = Field;

    fn add(self, rhs: &Field) -> Field {
        assert_eq!(self.len(), rhs.len(), "field length mismatch");
        Field::from_vec(
            self.values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Sub for &Field {
    type Output = Field;

    fn sub(self, rhs: &Field) -> Field {
        assert_eq!(self.len(), rhs.len(), "field length mismatch");
        Field::from_vec(
            self.values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

impl Mul<f64> for &Field {
    type Output = Field;

    fn mul(self, s: f64) -> Field {
        Field::from_vec(self.values.iter().map(|v| v * s).collect())
    }
}
