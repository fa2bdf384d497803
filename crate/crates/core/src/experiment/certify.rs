use super::{derive_seed, Dataset, ExperimentError};
use crate::frame::{apply_filter, build_frame, uniform_grid, verify_tightness, FilterBank, FrameSpec};
use crate::graph::{normalized_laplacian, Laplacian};
use crate::oracle::{
    approximation_bound, eigendecompose, exact_wavelet_transform, parseval_check, spectral_entropy, wavelet_entropy,
};
use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Largest graph used for certificates.
pub const CERTIFICATE_MAX_NODES: usize = 64;
pub const SIGNALS_PER_GRAPH: usize = 100;
pub const TIGHTNESS_GRID: usize = 10_000;

/// Oracle checks of energy preservation, the entropy approximation bound
/// and the polynomial filters, on random signals over a set of graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub graphs: usize,
    pub signals: usize,
    /// Largest `|sum_m g_m(lambda)^2 - 1|` on a uniform grid over the spectrum.
    pub tightness_error: f64,
    /// Largest relative energy gap with exact kernels.
    pub parseval_exact: f64,
    /// Largest relative energy gap with the fitted encoder filters.
    pub parseval_fitted: f64,
    /// Twice the largest filter fit error.
    pub parseval_fitted_limit: f64,
    /// Number of (graph, signal) pairs checked against the entropy bound.
    pub entropy_cases: usize,
    pub entropy_violations: usize,
    /// Largest `|spectral entropy - wavelet entropy|` seen.
    pub entropy_max_gap: f64,
    /// Smallest `bound - gap`.
    pub entropy_min_slack: f64,
    /// Largest ratio of filter/oracle deviation to `fit_error * |z|_inf + 1e-8`.
    pub filter_deviation_ratio: f64,
    pub passed: bool,
}

/// Certificates over the dataset graphs with at most
/// [`CERTIFICATE_MAX_NODES`] nodes, taking at most `max_graphs` of them.
pub fn certify(
    data: &Dataset,
    spec: &FrameSpec,
    filters: &FilterBank,
    max_graphs: usize,
) -> Result<Certificates, ExperimentError> {
    let laplacians: Vec<Laplacian> = data
        .graphs
        .iter()
        .filter(|g| g.graph.n_nodes() <= CERTIFICATE_MAX_NODES)
        .take(max_graphs)
        .map(|g| normalized_laplacian(&g.graph))
        .collect();
    certify_laplacians(&laplacians, spec, filters, SIGNALS_PER_GRAPH, 0)
}

pub fn certify_laplacians(
    laplacians: &[Laplacian],
    spec: &FrameSpec,
    filters: &FilterBank,
    signals: usize,
    seed: u64,
) -> Result<Certificates, ExperimentError> {
    let frame = build_frame(spec)?;
    let kernels = frame.kernels();
    if filters.channels() != kernels.len() {
        return Err(ExperimentError::Config(format!(
            "filter bank has {} channels, frame has {}",
            filters.channels(),
            kernels.len()
        )));
    }
    let numerical = |e: crate::oracle::OracleError| ExperimentError::Numerical(e.to_string());
    let mut c = Certificates {
        graphs: laplacians.len(),
        signals,
        tightness_error: verify_tightness(&kernels, &uniform_grid(0.0, spec.spectrum_bound, TIGHTNESS_GRID)),
        parseval_exact: 0.0,
        parseval_fitted: 0.0,
        parseval_fitted_limit: 2.0 * filters.fit_budget(),
        entropy_cases: 0,
        entropy_violations: 0,
        entropy_max_gap: 0.0,
        entropy_min_slack: f64::INFINITY,
        filter_deviation_ratio: 0.0,
        passed: false,
    };
    for (g, l) in laplacians.iter().enumerate() {
        let sd = eigendecompose(l).map_err(numerical)?;
        let bound = approximation_bound(&kernels, &sd.eigenvalues);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, g as u64));
        let z = Array2::from_shape_simple_fn((l.dim(), signals), || StandardNormal.sample(&mut rng));
        let mut fitted_energy = Array1::<f64>::zeros(signals);
        for (m, (pf, k)) in filters.encoder.iter().zip(&kernels).enumerate() {
            let fast = apply_filter(pf, l, z.view())?;
            fitted_energy += &fast.map_axis(Axis(0), |col| col.dot(&col));
            for (j, col) in z.columns().into_iter().enumerate() {
                let exact = exact_wavelet_transform(col, &sd, k).map_err(numerical)?;
                let dev = (&exact - &fast.column(j)).iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let zinf = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let ratio = dev / (filters.encoder[m].fit_error * zinf + 1e-8);
                c.filter_deviation_ratio = c.filter_deviation_ratio.max(ratio);
            }
        }
        for (j, col) in z.columns().into_iter().enumerate() {
            let (ew, es) = parseval_check(col, &sd, &kernels).map_err(numerical)?;
            c.parseval_exact = c.parseval_exact.max((ew - es).abs() / es);
            let norm2 = col.dot(&col);
            c.parseval_fitted = c.parseval_fitted.max((fitted_energy[j] - norm2).abs() / norm2);
            let gap = (spectral_entropy(col, &sd).map_err(numerical)?
                - wavelet_entropy(col, &sd, &kernels).map_err(numerical)?)
            .abs();
            c.entropy_cases += 1;
            c.entropy_max_gap = c.entropy_max_gap.max(gap);
            c.entropy_min_slack = c.entropy_min_slack.min(bound - gap);
            if gap > bound + 1e-9 {
                c.entropy_violations += 1;
            }
        }
    }
    c.passed = c.tightness_error < 1e-6
        && c.parseval_exact < 1e-6
        && c.parseval_fitted < c.parseval_fitted_limit
        && c.entropy_violations == 0
        && c.filter_deviation_ratio <= 1.0;
    Ok(c)
}
