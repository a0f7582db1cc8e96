use serde::{Deserialize, Serialize};

use super::SimError;

/// Concatenated robot and object configuration and velocity.
///
/// Stored flat in the order `[q_r | qd_r | q_o | qd_o]`; planar tasks use
/// scalar angles so configuration and velocity blocks have equal length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    n_r: usize,
    n_o: usize,
    data: Vec<f64>,
}

impl SystemState {
    pub fn zeros(n_r: usize, n_o: usize) -> Self {
        Self {
            n_r,
            n_o,
            data: vec![0.0; 2 * (n_r + n_o)],
        }
    }

    pub fn from_flat(n_r: usize, n_o: usize, data: Vec<f64>) -> Result<Self, SimError> {
        let expected = 2 * (n_r + n_o);
        if data.len() != expected {
            return Err(SimError::Dimension {
                what: "state",
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { n_r, n_o, data })
    }

    pub fn from_parts(q_r: &[f64], qd_r: &[f64], q_o: &[f64], qd_o: &[f64]) -> Result<Self, SimError> {
        if q_r.len() != qd_r.len() {
            return Err(SimError::Dimension {
                what: "robot velocity",
                expected: q_r.len(),
                actual: qd_r.len(),
            });
        }
        if q_o.len() != qd_o.len() {
            return Err(SimError::Dimension {
                what: "object velocity",
                expected: q_o.len(),
                actual: qd_o.len(),
            });
        }
        let mut data = Vec::with_capacity(2 * (q_r.len() + q_o.len()));
        data.extend_from_slice(q_r);
        data.extend_from_slice(qd_r);
        data.extend_from_slice(q_o);
        data.extend_from_slice(qd_o);
        Ok(Self {
            n_r: q_r.len(),
            n_o: q_o.len(),
            data,
        })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_o(&self) -> usize {
        self.n_o
    }

    /// Total state dimension `n_s`.
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn q_r(&self) -> &[f64] {
        &self.data[..self.n_r]
    }

    pub fn qd_r(&self) -> &[f64] {
        &self.data[self.n_r..2 * self.n_r]
    }

    pub fn q_o(&self) -> &[f64] {
        let o = 2 * self.n_r;
        &self.data[o..o + self.n_o]
    }

    pub fn qd_o(&self) -> &[f64] {
        let o = 2 * self.n_r + self.n_o;
        &self.data[o..o + self.n_o]
    }

    pub fn q_r_mut(&mut self) -> &mut [f64] {
        &mut self.data[..self.n_r]
    }

    pub fn qd_r_mut(&mut self) -> &mut [f64] {
        let n = self.n_r;
        &mut self.data[n..2 * n]
    }

    pub fn q_o_mut(&mut self) -> &mut [f64] {
        let o = 2 * self.n_r;
        let n = self.n_o;
        &mut self.data[o..o + n]
    }

    pub fn qd_o_mut(&mut self) -> &mut [f64] {
        let o = 2 * self.n_r + self.n_o;
        let n = self.n_o;
        &mut self.data[o..o + n]
    }

    /// Index of the first object-configuration coordinate in the flat layout.
    pub fn object_offset(&self) -> usize {
        2 * self.n_r
    }

    /// First non-finite coordinate, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    pub fn is_finite(&self) -> bool {
        self.first_non_finite().is_none()
    }

    pub fn max_abs_diff(&self, other: &SystemState) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
