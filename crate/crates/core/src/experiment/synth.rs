//! Seeded synthetic multi-graph datasets.
//!
//! Each graph is a random spanning tree plus independent extra edges. Its
//! features are a shared linear mix of a few latent graph signals, each the
//! sum of a smooth low-pass part and a band-limited high-frequency part drawn
//! in the graph's own eigenbasis, plus a little white noise.

use super::dataset::{Dataset, GraphRecord};
use crate::graph::{normalized_laplacian, FeatureMatrix, Graph};
use crate::oracle::{eigendecompose, SpectralDecomposition};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub graphs: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Probability of each non-tree edge.
    pub edge_density: f64,
    pub d_features: usize,
    pub latent: usize,
    /// Share of latent-signal energy placed above `lambda = 1`.
    pub high_band: f64,
    /// Standard deviation of the white noise relative to unit-energy signals.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            graphs: 200,
            min_nodes: 10,
            max_nodes: 60,
            edge_density: 0.08,
            d_features: 8,
            latent: 3,
            high_band: 0.25,
            noise: 0.05,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.graphs == 0 || self.d_features == 0 || self.latent == 0 {
            return Err("graph count, feature count and latent count must be positive".into());
        }
        if self.min_nodes < 2 || self.min_nodes > self.max_nodes {
            return Err(format!("bad node range [{}, {}]", self.min_nodes, self.max_nodes));
        }
        if !(0.0..=1.0).contains(&self.edge_density) || !(0.0..=1.0).contains(&self.high_band) || self.noise < 0.0 {
            return Err("edge density and high band share must lie in [0, 1]; noise must be nonnegative".into());
        }
        Ok(())
    }
}

fn random_graph(n: usize, density: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    let tree: std::collections::HashSet<_> = edges.iter().copied().collect();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < density && !tree.contains(&(u, v)) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges).expect("tree plus distinct extra edges is simple")
}

/// A unit-energy signal with a fixed share of its energy above `lambda = 1`.
fn latent_signal(sd: &SpectralDecomposition, high_band: f64, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let mut band = |pick_high: bool| {
        let coeffs = Array1::from_iter(sd.eigenvalues.iter().map(|&l| {
            let xi: f64 = rng.sample(StandardNormal);
            let shape = if pick_high {
                if l > 1.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (-4.0 * l).exp()
            };
            xi * shape
        }));
        let s = sd.eigenvectors.dot(&coeffs);
        let e = s.dot(&s);
        if e > 0.0 {
            s / e.sqrt()
        } else {
            s
        }
    };
    let low = band(false);
    let high = band(true);
    low * (1.0 - high_band).sqrt() + high * high_band.sqrt()
}

fn features_for(
    sd: &SpectralDecomposition,
    loadings: &Array2<f64>,
    spec: &SyntheticSpec,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let n = sd.dim();
    let scale = (n as f64).sqrt();
    let mut latent = Array2::zeros((n, spec.latent));
    for r in 0..spec.latent {
        latent.column_mut(r).assign(&(latent_signal(sd, spec.high_band, rng) * scale));
    }
    let noise =
        Array2::from_shape_simple_fn((n, spec.d_features), || spec.noise * rng.sample::<f64, _>(StandardNormal));
    latent.dot(loadings) + noise
}

/// Share of the feature energy carried by eigenvalues above 1.
pub fn high_frequency_fraction(features: &Array2<f64>, sd: &SpectralDecomposition) -> f64 {
    let coeffs = sd.eigenvectors.t().dot(features);
    let mut high = 0.0;
    let mut total = 0.0;
    for (i, row) in coeffs.rows().into_iter().enumerate() {
        let e = row.dot(&row);
        total += e;
        if sd.eigenvalues[i] > 1.0 {
            high += e;
        }
    }
    if total > 0.0 {
        high / total
    } else {
        0.0
    }
}

pub fn synthesize(spec: &SyntheticSpec) -> Result<Dataset, String> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let loadings = Array2::from_shape_simple_fn((spec.latent, spec.d_features), || {
        rng.sample::<f64, _>(StandardNormal) / (spec.latent as f64).sqrt()
    });
    let mut graphs = Vec::with_capacity(spec.graphs);
    for _ in 0..spec.graphs {
        let n = rng.random_range(spec.min_nodes..=spec.max_nodes);
        let graph = random_graph(n, spec.edge_density, &mut rng);
        let sd = eigendecompose(&normalized_laplacian(&graph)).map_err(|e| e.to_string())?;
        let values = features_for(&sd, &loadings, spec, &mut rng);
        let features = FeatureMatrix::new(values).map_err(|e| e.to_string())?;
        graphs.push(GraphRecord { graph, features });
    }
    Ok(Dataset { graphs })
}
