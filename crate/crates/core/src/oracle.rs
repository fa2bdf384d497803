//! Exact spectral reference computations.
//!
//! Everything here goes through a dense eigendecomposition of the Laplacian,
//! so it is only meant for graphs of up to [`ORACLE_MAX_NODES`] nodes. The
//! fast polynomial filters in [`crate::frame`] are certified against these
//! routines.
//!
//! Repeated eigenvalues are treated as distinct indices: spectral entropy is
//! a sum over all `N` eigenpairs with multiplicity.

use crate::graph::Laplacian;
use crate::kernel::{IntervalKernel, Kernel};
use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest graph the oracle will decompose.
pub const ORACLE_MAX_NODES: usize = 2048;

/// `|g(lambda)|` above this counts as an active kernel.
pub const ACTIVATION_THRESHOLD: f64 = 1e-9;

/// Signals with `||x||^2` at or below this have no defined entropy.
pub const MIN_ENERGY: f64 = 1e-24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("graph has {0} nodes; the oracle is limited to {ORACLE_MAX_NODES}")]
    TooLarge(usize),
    #[error("matrix is not symmetric: |L[{i},{j}] - L[{j},{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("signal energy {0:e} is too small for entropy to be defined")]
    ZeroEnergy(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("frame has no kernels")]
    EmptyFrame,
}

/// Ascending eigenvalues with orthonormal eigenvectors stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Graph Fourier transform `U^T x`.
    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>, OracleError> {
        self.check_dim(x.len())?;
        Ok(self.eigenvectors.t().dot(&x))
    }

    /// Inverse transform `U c`.
    pub fn inverse(&self, coeffs: ArrayView1<'_, f64>) -> Result<Array1<f64>, OracleError> {
        self.check_dim(coeffs.len())?;
        Ok(self.eigenvectors.dot(&coeffs))
    }

    /// `U diag(lambda) U^T`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.eigenvectors * &Array1::from(self.eigenvalues.clone());
        scaled.dot(&self.eigenvectors.t())
    }

    fn check_dim(&self, got: usize) -> Result<(), OracleError> {
        if got == self.dim() {
            Ok(())
        } else {
            Err(OracleError::DimensionMismatch { expected: self.dim(), got })
        }
    }
}

pub fn eigendecompose(l: &Laplacian) -> Result<SpectralDecomposition, OracleError> {
    eigendecompose_dense(&l.to_dense())
}

/// Dense symmetric eigendecomposition with ascending eigenvalues.
pub fn eigendecompose_dense(m: &Array2<f64>) -> Result<SpectralDecomposition, OracleError> {
    let n = m.nrows();
    if n > ORACLE_MAX_NODES {
        return Err(OracleError::TooLarge(n));
    }
    if m.ncols() != n {
        return Err(OracleError::DimensionMismatch { expected: n, got: m.ncols() });
    }
    for i in 0..n {
        for j in i + 1..n {
            let gap = (m[[i, j]] - m[[j, i]]).abs();
            if gap > 1e-12 {
                return Err(OracleError::NotSymmetric { i, j, gap });
            }
        }
    }
    let dm = DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
    let eig = dm.try_symmetric_eigen(1e-15, 10_000).ok_or(OracleError::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = Array2::from_shape_fn((n, n), |(i, c)| eig.eigenvectors[(i, order[c])]);
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

/// Shannon entropy of a nonnegative weight vector after normalization,
/// with `0 log 0 = 0`.
pub(crate) fn shannon_entropy(weights: impl IntoIterator<Item = f64>, total: f64) -> f64 {
    weights
        .into_iter()
        .filter(|&w| w > 0.0)
        .map(|w| {
            let p = w / total;
            -p * p.ln()
        })
        .sum()
}

/// Entropy of the energy distribution of `x` over the Laplacian eigenbasis.
pub fn spectral_entropy(x: ArrayView1<'_, f64>, sd: &SpectralDecomposition) -> Result<f64, OracleError> {
    let coeffs = sd.forward(x)?;
    let energies: Vec<f64> = coeffs.iter().map(|c| c * c).collect();
    let total: f64 = energies.iter().sum();
    if total <= MIN_ENERGY {
        return Err(OracleError::ZeroEnergy(total));
    }
    Ok(shannon_entropy(energies, total))
}

/// `U g(Lambda) U^T x`.
pub fn exact_wavelet_transform<K: Kernel + ?Sized>(
    x: ArrayView1<'_, f64>,
    sd: &SpectralDecomposition,
    kernel: &K,
) -> Result<Array1<f64>, OracleError> {
    let mut coeffs = sd.forward(x)?;
    for (c, &lambda) in coeffs.iter_mut().zip(&sd.eigenvalues) {
        *c *= kernel.response(lambda);
    }
    sd.inverse(coeffs.view())
}

/// Block version of [`exact_wavelet_transform`] applied column by column.
pub fn exact_wavelet_transform_block<K: Kernel + ?Sized>(
    z: &Array2<f64>,
    sd: &SpectralDecomposition,
    kernel: &K,
) -> Result<Array2<f64>, OracleError> {
    if z.nrows() != sd.dim() {
        return Err(OracleError::DimensionMismatch { expected: sd.dim(), got: z.nrows() });
    }
    let response = Array1::from_iter(sd.eigenvalues.iter().map(|&l| kernel.response(l)));
    let coeffs = sd.eigenvectors.t().dot(z) * &response.insert_axis(ndarray::Axis(1));
    Ok(sd.eigenvectors.dot(&coeffs))
}

/// Squared norm of each channel's exact wavelet coefficients, computed in
/// the eigenbasis as `sum_i g(lambda_i)^2 xhat_i^2`.
pub fn wavelet_energies<K: Kernel>(
    x: ArrayView1<'_, f64>,
    sd: &SpectralDecomposition,
    frame: &[K],
) -> Result<Vec<f64>, OracleError> {
    let coeffs = sd.forward(x)?;
    Ok(frame
        .iter()
        .map(|k| coeffs.iter().zip(&sd.eigenvalues).map(|(c, &l)| (k.response(l) * c).powi(2)).sum())
        .collect())
}

/// Entropy of the signal's energy distribution across the frame channels.
pub fn wavelet_entropy<K: Kernel>(
    x: ArrayView1<'_, f64>,
    sd: &SpectralDecomposition,
    frame: &[K],
) -> Result<f64, OracleError> {
    if frame.is_empty() {
        return Err(OracleError::EmptyFrame);
    }
    let energies = wavelet_energies(x, sd, frame)?;
    let total: f64 = energies.iter().sum();
    if total <= MIN_ENERGY {
        return Err(OracleError::ZeroEnergy(total));
    }
    Ok(shannon_entropy(energies, total))
}

/// Coverage `C_m` (eigenvalues where kernel `m` is active) and crossness
/// `R_i` (kernels active at eigenvalue `i`).
pub fn coverage_crossness<K: Kernel>(frame: &[K], eigenvalues: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut coverage = vec![0usize; frame.len()];
    let mut crossness = vec![0usize; eigenvalues.len()];
    for (m, k) in frame.iter().enumerate() {
        for (i, &lambda) in eigenvalues.iter().enumerate() {
            if k.response(lambda).abs() > ACTIVATION_THRESHOLD {
                coverage[m] += 1;
                crossness[i] += 1;
            }
        }
    }
    (coverage, crossness)
}

/// Worst-case gap between spectral and wavelet entropy for a tight frame:
/// the largest `log C_m` or `log R_i`. Zero counts are skipped.
pub fn approximation_bound<K: Kernel>(frame: &[K], eigenvalues: &[f64]) -> f64 {
    let (coverage, crossness) = coverage_crossness(frame, eigenvalues);
    coverage.iter().chain(&crossness).filter(|&&c| c > 0).map(|&c| (c as f64).ln()).fold(0.0, f64::max)
}

/// Total wavelet energy and total spectral energy of `x`, the former from
/// the node-domain transform of every channel.
pub fn parseval_check<K: Kernel>(
    x: ArrayView1<'_, f64>,
    sd: &SpectralDecomposition,
    frame: &[K],
) -> Result<(f64, f64), OracleError> {
    let coeffs = sd.forward(x)?;
    let spectral = coeffs.dot(&coeffs);
    let mut wavelet = 0.0;
    for k in frame {
        let w = exact_wavelet_transform(x, sd, k)?;
        wavelet += w.dot(&w);
    }
    Ok((wavelet, spectral))
}

/// Disjoint indicator kernels, one per distinct eigenvalue, splitting the
/// real line at midpoints between consecutive distinct eigenvalues.
///
/// When every eigenvalue is simple this is the `M = N` frame for which
/// coverage and crossness are all one and the entropy bound is zero.
pub fn indicator_frame(eigenvalues: &[f64], merge_tol: f64) -> Vec<IntervalKernel> {
    let mut distinct: Vec<f64> = Vec::new();
    let mut sorted = eigenvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    for l in sorted {
        if distinct.last().is_none_or(|&d| l - d > merge_tol) {
            distinct.push(l);
        }
    }
    let mut cuts = vec![f64::NEG_INFINITY];
    cuts.extend(distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    cuts.push(f64::INFINITY);
    cuts.windows(2).map(|w| IntervalKernel { lo: w[0], hi: w[1] }).collect()
}

/// Full set of spectral measurements for one signal and frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub spectral_energies: Vec<f64>,
    pub total_energy: f64,
    pub spectral_entropy: f64,
    pub wavelet_entropy: f64,
    pub coverage: Vec<usize>,
    pub crossness: Vec<usize>,
    pub bound: f64,
}

pub fn spectrum_report<K: Kernel>(
    x: ArrayView1<'_, f64>,
    sd: &SpectralDecomposition,
    frame: &[K],
) -> Result<SpectrumReport, OracleError> {
    let coeffs = sd.forward(x)?;
    let spectral_energies: Vec<f64> = coeffs.iter().map(|c| c * c).collect();
    let total_energy = spectral_energies.iter().sum();
    let (coverage, crossness) = coverage_crossness(frame, &sd.eigenvalues);
    Ok(SpectrumReport {
        spectral_entropy: spectral_entropy(x, sd)?,
        wavelet_entropy: wavelet_entropy(x, sd, frame)?,
        bound: approximation_bound(frame, &sd.eigenvalues),
        spectral_energies,
        total_energy,
        coverage,
        crossness,
    })
}
