//! L2-regularized linear SVM (hinge loss) fitted by dual coordinate descent.
//!
//! The bias is learned as the weight of a constant feature. Visiting order is
//! a seeded permutation, so a fit is reproducible given its inputs and seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::featurizer::{DenseEmbedding, SparseVector};

/// A feature vector the solver can work with.
pub trait FeatureVector {
    fn dot(&self, w: &[f64]) -> f64;
    fn add_scaled(&self, scale: f64, w: &mut [f64]);
    fn squared_norm(&self) -> f64;
}

impl FeatureVector for SparseVector {
    fn dot(&self, w: &[f64]) -> f64 {
        SparseVector::dot(self, w)
    }

    fn add_scaled(&self, scale: f64, w: &mut [f64]) {
        for &(i, v) in self.entries() {
            w[i as usize] += scale * v;
        }
    }

    fn squared_norm(&self) -> f64 {
        self.entries().iter().map(|(_, v)| v * v).sum()
    }
}

impl FeatureVector for DenseEmbedding {
    fn dot(&self, w: &[f64]) -> f64 {
        DenseEmbedding::dot(self, w)
    }

    fn add_scaled(&self, scale: f64, w: &mut [f64]) {
        for (wi, x) in w.iter_mut().zip(self.as_slice()) {
            *wi += scale * x;
        }
    }

    fn squared_norm(&self) -> f64 {
        self.as_slice().iter().map(|x| x * x).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvmParams {
    /// Hinge-loss penalty.
    pub c: f64,
    pub max_epochs: usize,
    /// Stop once the projected-gradient spread falls below this.
    pub tolerance: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            max_epochs: 1000,
            tolerance: 1e-4,
        }
    }
}

/// Fits `w, b` on examples with labels in {-1, +1}. Returns `(weights, bias)`.
pub fn fit<X: FeatureVector>(
    xs: &[&X],
    labels: &[f64],
    dim: usize,
    params: &SvmParams,
    seed: u64,
) -> (Vec<f64>, f64) {
    assert_eq!(xs.len(), labels.len());
    let n = xs.len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    if n == 0 {
        return (w, b);
    }
    let diag: Vec<f64> = xs.iter().map(|x| x.squared_norm() + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..params.max_epochs {
        order.shuffle(&mut rng);
        let mut max_pg = f64::NEG_INFINITY;
        let mut min_pg = f64::INFINITY;
        for &i in &order {
            let y = labels[i];
            let g = y * (xs[i].dot(&w) + b) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == params.c {
                g.max(0.0)
            } else {
                g
            };
            max_pg = max_pg.max(pg);
            min_pg = min_pg.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / diag[i]).clamp(0.0, params.c);
                let delta = (alpha[i] - old) * y;
                if delta != 0.0 {
                    xs[i].add_scaled(delta, &mut w);
                    b += delta;
                }
            }
        }
        if max_pg - min_pg < params.tolerance {
            break;
        }
    }
    (w, b)
}
