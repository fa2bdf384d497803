//! Tight wavelet frames on the normalized Laplacian spectrum and their
//! polynomial approximations.
//!
//! The frame is built from uniform translates of a cosine-sum mother
//! wavelet in a log-warped spectral coordinate. Channel 0 is the low-pass
//! residual `sqrt(C - sum_{m>=1} g_m^2)`, which closes the frame at the low
//! end of the spectrum. Every kernel is divided by `sqrt(C)`, so the squared
//! responses sum to exactly one:
//!
//! ```
//! use megae::frame::{build_frame, uniform_grid, verify_tightness, FrameSpec};
//!
//! let frame = build_frame(&FrameSpec::default()).unwrap();
//! let grid = uniform_grid(0.0, 2.0, 1_000);
//! assert!(verify_tightness(&frame.kernels(), &grid) < 1e-9);
//! ```

mod poly;

pub use poly::{
    apply_filter, apply_filters, fit_polynomial, FilterBank, FilterConfig, FitOptions, InverseKernelPolicy, PolyFilter,
};

use crate::kernel::{frame_energy, Kernel};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("invalid frame spec: {0}")]
    InvalidSpec(String),
    #[error("cosine coefficients violate the alternating-sum constraint (sum = {0:e})")]
    AlternatingSum(f64),
    #[error("residual kernel is negative ({value:e}) at lambda = {lambda}")]
    NegativeResidual { lambda: f64, value: f64 },
    #[error("polynomial order must be at least 1")]
    InvalidOrder,
    #[error("fitting grid of {grid} points is too small for order {order} (need at least {min})")]
    GridTooSmall { grid: usize, order: usize, min: usize },
    #[error("ill-conditioned polynomial fit: {0}")]
    IllConditioned(String),
    #[error("fit error {error:e} exceeds tolerance {tolerance:e} on channel {channel}")]
    FitTolerance { channel: usize, error: f64, tolerance: f64 },
    #[error("dimension mismatch: operator has {expected} rows, signal has {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Parameters of the tight frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    /// Number of kernels M (at least 3).
    pub channels: usize,
    /// Number of translates overlapping each point, `2 < T <= M`.
    pub overlap: usize,
    /// Cosine-sum coefficients `a_0..a_Q`, with `Q < T/2` and
    /// `sum (-1)^q a_q = 0`.
    pub cosine_coefficients: Vec<f64>,
    /// Upper end of the spectrum (2 for the normalized Laplacian).
    pub spectrum_bound: f64,
    /// Eigenvalues below this are clamped before the log warp; it is also
    /// the left end of the warped translate domain.
    pub log_floor: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self { channels: 9, overlap: 4, cosine_coefficients: vec![0.5, 0.5], spectrum_bound: 2.0, log_floor: 0.2 }
    }
}

impl FrameSpec {
    /// Default spec with `M` channels; the overlap drops to `M` when `M < 4`.
    pub fn with_channels(channels: usize) -> Self {
        let base = Self::default();
        Self { channels, overlap: base.overlap.min(channels), ..base }
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        let bad = |msg: String| Err(FrameError::InvalidSpec(msg));
        if self.channels < 3 {
            return bad(format!("need at least 3 channels, got {}", self.channels));
        }
        if self.overlap <= 2 || self.overlap > self.channels {
            return bad(format!(
                "overlap must satisfy 2 < T <= M, got T = {} with M = {}",
                self.overlap, self.channels
            ));
        }
        let q = self.cosine_coefficients.len();
        if q == 0 || 2 * (q - 1) >= self.overlap {
            return bad(format!("need 1 + Q coefficients with Q < T/2, got {q} for T = {}", self.overlap));
        }
        if !(self.spectrum_bound.is_finite() && self.spectrum_bound > 0.0) {
            return bad(format!("spectrum bound must be positive, got {}", self.spectrum_bound));
        }
        if !(self.log_floor > 0.0 && self.log_floor < self.spectrum_bound) {
            return bad(format!("log floor must lie in (0, {}), got {}", self.spectrum_bound, self.log_floor));
        }
        let alternating: f64 =
            self.cosine_coefficients.iter().enumerate().map(|(q, a)| if q % 2 == 0 { *a } else { -*a }).sum();
        if alternating.abs() > 1e-12 {
            return Err(FrameError::AlternatingSum(alternating));
        }
        Ok(())
    }
}

/// A constructed tight frame. Channels are indexed `0..M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightFrame {
    spec: FrameSpec,
    /// Translate step in the warped coordinate.
    step: f64,
    /// Unnormalized frame constant `T a_0^2 + T/2 sum_{q>=1} a_q^2`.
    frame_constant: f64,
}

/// Grid resolution used to check the residual kernel at construction.
const RESIDUAL_CHECK_POINTS: usize = 10_000;

pub fn build_frame(spec: &FrameSpec) -> Result<TightFrame, FrameError> {
    spec.validate()?;
    let t = spec.overlap as f64;
    let a = &spec.cosine_coefficients;
    let frame_constant = t * a[0] * a[0] + 0.5 * t * a[1..].iter().map(|x| x * x).sum::<f64>();
    let step = (spec.spectrum_bound / spec.log_floor).ln() / (spec.channels - 1) as f64;
    let frame = TightFrame { spec: spec.clone(), step, frame_constant };
    for lambda in uniform_grid(0.0, spec.spectrum_bound, RESIDUAL_CHECK_POINTS) {
        let value = frame.residual(lambda);
        if value < -1e-9 {
            return Err(FrameError::NegativeResidual { lambda, value });
        }
    }
    Ok(frame)
}

impl TightFrame {
    pub fn spec(&self) -> &FrameSpec {
        &self.spec
    }

    pub fn channels(&self) -> usize {
        self.spec.channels
    }

    pub fn frame_constant(&self) -> f64 {
        self.frame_constant
    }

    /// Log-warped coordinate, shifted so that the first band-pass translate
    /// starts exactly at `log_floor`.
    fn warp(&self, lambda: f64) -> f64 {
        let floor = self.spec.log_floor;
        (lambda.max(floor) / floor).ln() + (2.0 - self.spec.overlap as f64) * self.step
    }

    /// Mother wavelet, supported on `[-T step, 0)`.
    fn mother(&self, t: f64) -> f64 {
        let width = self.spec.overlap as f64 * self.step;
        if !(-width..0.0).contains(&t) {
            return 0.0;
        }
        self.spec
            .cosine_coefficients
            .iter()
            .enumerate()
            .map(|(q, a)| a * (2.0 * PI * q as f64 * (t / width + 0.5)).cos())
            .sum()
    }

    /// Channel `c >= 1` is the translate by `(c + 1)` steps; the translate by
    /// one step and everything below it are folded into the residual channel.
    fn translate(&self, channel: usize, lambda: f64) -> f64 {
        self.mother(self.warp(lambda) - (channel + 1) as f64 * self.step)
    }

    /// `C - sum_{m>=1} g_m^2` before normalization.
    fn residual(&self, lambda: f64) -> f64 {
        let band: f64 = (1..self.channels()).map(|m| self.translate(m, lambda).powi(2)).sum();
        self.frame_constant - band
    }

    /// Normalized response of `channel` at `lambda`.
    pub fn response(&self, channel: usize, lambda: f64) -> f64 {
        assert!(channel < self.channels(), "channel {channel} out of range");
        let raw = if channel == 0 { self.residual(lambda).max(0.0).sqrt() } else { self.translate(channel, lambda) };
        raw / self.frame_constant.sqrt()
    }

    pub fn kernel(&self, channel: usize) -> FrameKernel<'_> {
        assert!(channel < self.channels(), "channel {channel} out of range");
        FrameKernel { frame: self, channel }
    }

    pub fn kernels(&self) -> Vec<FrameKernel<'_>> {
        (0..self.channels()).map(|m| self.kernel(m)).collect()
    }
}

/// One channel of a [`TightFrame`].
#[derive(Debug, Clone, Copy)]
pub struct FrameKernel<'a> {
    frame: &'a TightFrame,
    channel: usize,
}

impl FrameKernel<'_> {
    pub fn channel(&self) -> usize {
        self.channel
    }
}

impl Kernel for FrameKernel<'_> {
    fn response(&self, lambda: f64) -> f64 {
        self.frame.response(self.channel, lambda)
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Largest `|G(lambda) - 1|` over `points`.
pub fn verify_tightness<K: Kernel>(frame: &[K], points: &[f64]) -> f64 {
    points.iter().map(|&l| (frame_energy(frame, l) - 1.0).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ConstantKernel;
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_frame_is_tight_on_dense_grid() {
        let frame = build_frame(&FrameSpec::default()).unwrap();
        let grid = uniform_grid(0.0, 2.0, 10_000);
        assert!(verify_tightness(&frame.kernels(), &grid) < 1e-6);
    }

    #[test]
    fn frame_constant_matches_hann_sum() {
        // T = 4 overlapping raised cosines: 4/4 + 2/4 = 1.5.
        let frame = build_frame(&FrameSpec::default()).unwrap();
        assert_abs_diff_eq!(frame.frame_constant(), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn band_translates_already_sum_to_constant_in_the_interior() {
        // Away from the low end the residual channel is zero and the
        // translates alone produce G = 1.
        let frame = build_frame(&FrameSpec::default()).unwrap();
        for lambda in uniform_grid(1.0, 2.0, 50) {
            assert_abs_diff_eq!(frame.response(0, lambda), 0.0, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(frame.response(0, 0.0), 1.0, epsilon = 1e-12);
        for m in 1..9 {
            assert_eq!(frame.response(m, 0.0), 0.0);
        }
    }

    #[test]
    fn kernels_are_nonnegative() {
        for m in [3, 6, 9, 14, 20] {
            let frame = build_frame(&FrameSpec::with_channels(m)).unwrap();
            for lambda in uniform_grid(0.0, 2.0, 2_000) {
                for k in frame.kernels() {
                    assert!(k.response(lambda) >= 0.0);
                }
            }
            assert!(verify_tightness(&frame.kernels(), &uniform_grid(0.0, 2.0, 10_000)) < 1e-6);
        }
    }

    #[test]
    fn violating_alternating_sum_is_rejected() {
        let spec = FrameSpec { cosine_coefficients: vec![0.5, 0.4], ..FrameSpec::default() };
        assert!(matches!(build_frame(&spec), Err(FrameError::AlternatingSum(_))));
    }

    #[test]
    fn structural_constraints() {
        let too_few = FrameSpec { channels: 2, ..FrameSpec::default() };
        assert!(matches!(build_frame(&too_few), Err(FrameError::InvalidSpec(_))));
        let overlap = FrameSpec { overlap: 2, ..FrameSpec::default() };
        assert!(matches!(build_frame(&overlap), Err(FrameError::InvalidSpec(_))));
        let big_q = FrameSpec { cosine_coefficients: vec![0.5, 0.25, -0.25], ..FrameSpec::default() };
        assert!(matches!(build_frame(&big_q), Err(FrameError::InvalidSpec(_))));
        let floor = FrameSpec { log_floor: 0.0, ..FrameSpec::default() };
        assert!(matches!(build_frame(&floor), Err(FrameError::InvalidSpec(_))));
    }

    #[test]
    fn higher_order_cosine_sums_are_tight() {
        // Q = 2 needs T >= 5; a_0 - a_1 + a_2 = 0.
        let spec = FrameSpec { overlap: 6, cosine_coefficients: vec![0.4, 0.5, 0.1], ..FrameSpec::default() };
        let frame = build_frame(&spec).unwrap();
        assert!(verify_tightness(&frame.kernels(), &uniform_grid(0.0, 2.0, 10_000)) < 1e-6);
    }

    #[test]
    fn tightness_of_simple_frames() {
        let grid = uniform_grid(0.0, 2.0, 101);
        assert_eq!(verify_tightness(&[ConstantKernel(1.0)], &grid), 0.0);
        let frame = build_frame(&FrameSpec::default()).unwrap();
        let frame = &frame;
        let doubled: Vec<_> = (0..9).map(|m| move |l: f64| 2.0 * frame.response(m, l)).collect();
        assert_abs_diff_eq!(verify_tightness(&doubled, &grid), 3.0, epsilon = 1e-9);
    }
}
