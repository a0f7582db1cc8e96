use serde::{Deserialize, Serialize};

/// Running per-coordinate mean and variance for input standardization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub count: f64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
    pub clip: f64,
    /// Lower bound on the standard deviation used to scale inputs.
    pub std_floor: f64,
}

impl Normalizer {
    pub fn new(dim: usize, clip: f64) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            clip,
            std_floor: 1e-2,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Merges a batch of rows into the running statistics.
    pub fn update<'a, I>(&mut self, rows: I)
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let dim = self.dim();
        let mut n = 0.0;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for row in rows {
            assert_eq!(row.len(), dim, "normalizer input width");
            n += 1.0;
            for i in 0..dim {
                let d = row[i] - mean[i];
                mean[i] += d / n;
                m2[i] += d * (row[i] - mean[i]);
            }
        }
        self.merge(n, &mean, &m2);
    }

    /// Parallel combination with another set of statistics.
    pub fn merge(&mut self, n_b: f64, mean_b: &[f64], m2_b: &[f64]) {
        if n_b == 0.0 {
            return;
        }
        let n_a = self.count;
        let n = n_a + n_b;
        for i in 0..self.dim() {
            let delta = mean_b[i] - self.mean[i];
            self.mean[i] += delta * n_b / n;
            self.m2[i] += m2_b[i] + delta * delta * n_a * n_b / n;
        }
        self.count = n;
    }

    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0.0 {
            return vec![0.0; self.dim()];
        }
        self.m2.iter().map(|m| (m / self.count).max(0.0)).collect()
    }

    pub fn std(&self) -> Vec<f64> {
        self.variance().iter().map(|v| v.sqrt().max(self.std_floor)).collect()
    }

    /// `clip((x - mean) / std)`; identity before the first update.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.normalize_into(x, &mut out);
        out
    }

    pub fn normalize_into(&self, x: &[f64], out: &mut [f64]) {
        if self.count == 0.0 {
            out.copy_from_slice(x);
            return;
        }
        for i in 0..self.dim() {
            let std = (self.m2[i] / self.count).max(0.0).sqrt().max(self.std_floor);
            out[i] = ((x[i] - self.mean[i]) / std).clamp(-self.clip, self.clip);
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn identity_before_update() {
        let n = Normalizer::new(3, 5.0);
        assert_eq!(n.normalize(&[10.0, -20.0, 0.5]), vec![10.0, -20.0, 0.5]);
    }

    #[test]
    fn constant_stream_maps_to_zero() {
        let mut n = Normalizer::new(2, 5.0);
        let row = [3.0, -1.0];
        n.update(std::iter::repeat(&row[..]).take(50));
        assert_eq!(n.normalize(&row), vec![0.0, 0.0]);
    }

    #[test]
    fn streaming_matches_two_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data: Vec<Vec<f64>> = (0..1000).map(|_| vec![rng.gen_range(-3.0..8.0), rng.gen::<f64>() * 1e3]).collect();
        let mut n = Normalizer::new(2, 5.0);
        for chunk in data.chunks(37) {
            n.update(chunk.iter().map(|r| r.as_slice()));
        }
        for i in 0..2 {
            let mean = data.iter().map(|r| r[i]).sum::<f64>() / data.len() as f64;
            let var = data.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / data.len() as f64;
            assert!((n.mean[i] - mean).abs() < 1e-10 * mean.abs().max(1.0));
            assert!((n.variance()[i] - var).abs() < 1e-10 * var.max(1.0));
        }
    }

    #[test]
    fn outputs_are_clipped() {
        let mut n = Normalizer::new(1, 5.0);
        n.update([&[0.0][..], &[1.0][..]]);
        assert_eq!(n.normalize(&[100.0]), vec![5.0]);
        assert_eq!(n.normalize(&[-100.0]), vec![-5.0]);
    }
}
