//! Polynomial filters `p(L) = sum_k c_k (L - s I)^k`.
//!
//! Coefficients are fitted by least squares in a Chebyshev basis on a uniform
//! grid over `[0, spectrum_bound]`, pinned to the kernel at both ends, and
//! then re-expanded as a power series about the expansion point `s`. With
//! `s = 0` this is the plain Maclaurin form in `L`; the default
//! `s = spectrum_bound / 2` keeps the power-series coefficients small enough
//! to evaluate accurately in double precision up to order 32 or so.
//! Application uses Horner's scheme, one sparse product per order.

use super::{FrameError, TightFrame};
use crate::graph::LinearOperator;
use crate::kernel::Kernel;
use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// Largest tolerated condition number of the least-squares design matrix.
const MAX_CONDITION: f64 = 1e10;

/// Disagreement between the Chebyshev fit and its power-series
/// re-expansion that is always tolerated, relative to the fit's magnitude.
const REEXPANSION_TOLERANCE: f64 = 1e-8;

/// Beyond that, the re-expansion may lose at most this share of the
/// Chebyshev fit's own error.
const REEXPANSION_SHARE: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFilter {
    pub channel: usize,
    /// Expansion point `s`.
    pub center: f64,
    /// `c_0..c_K`; the order is `coefficients.len() - 1`.
    pub coefficients: Vec<f64>,
    /// Largest absolute deviation from the target kernel on the fitting grid.
    pub fit_error: f64,
}

impl PolyFilter {
    pub fn new(channel: usize, center: f64, coefficients: Vec<f64>) -> Self {
        assert!(!coefficients.is_empty(), "a polynomial needs at least one coefficient");
        Self { channel, center, coefficients, fit_error: 0.0 }
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Scalar evaluation `p(lambda)`.
    pub fn eval(&self, lambda: f64) -> f64 {
        let y = lambda - self.center;
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * y + c)
    }
}

impl Kernel for PolyFilter {
    fn response(&self, lambda: f64) -> f64 {
        self.eval(lambda)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub spectrum_bound: f64,
    pub center: f64,
    /// When false the polynomial has no `(L - s I)^0 = I` term... with
    /// `center = 0` this is the `sum_{k>=1} c_k L^k` form, which forces
    /// `p(0) = 0`.
    pub include_constant: bool,
    /// Reject fits whose grid error exceeds this.
    pub max_error: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { spectrum_bound: 2.0, center: 1.0, include_constant: true, max_error: None }
    }
}

/// Coefficients of a polynomial in `y`, lowest degree first.
type Poly = Vec<f64>;

fn poly_axpy(acc: &mut Poly, scale: f64, p: &[f64]) {
    if acc.len() < p.len() {
        acc.resize(p.len(), 0.0);
    }
    for (a, b) in acc.iter_mut().zip(p) {
        *a += scale * b;
    }
}

/// `(alpha y + beta) p(y)`.
fn poly_mul_linear(p: &[f64], alpha: f64, beta: f64) -> Poly {
    let mut out = vec![0.0; p.len() + 1];
    for (k, c) in p.iter().enumerate() {
        out[k] += beta * c;
        out[k + 1] += alpha * c;
    }
    out
}

/// Chebyshev polynomials `T_0..T_n` of `u = alpha y + beta`, as polynomials
/// in `y`.
fn chebyshev_in_shifted(n: usize, alpha: f64, beta: f64) -> Vec<Poly> {
    let mut out: Vec<Poly> = vec![vec![1.0]];
    if n >= 1 {
        out.push(vec![beta, alpha]);
    }
    for j in 1..n {
        let mut next = poly_mul_linear(&out[j], 2.0 * alpha, 2.0 * beta);
        poly_axpy(&mut next, -1.0, &out[j - 1]);
        out.push(next);
    }
    out
}

fn chebyshev_values(n: usize, u: f64) -> Vec<f64> {
    let mut t = vec![1.0; n + 1];
    if n >= 1 {
        t[1] = u;
    }
    for j in 2..=n {
        t[j] = 2.0 * u * t[j - 1] - t[j - 2];
    }
    t
}

/// Least-squares polynomial approximation of `kernel` of order `order` on a
/// uniform grid of `grid` points.
///
/// From order 2 on, the fit matches the kernel exactly at `0` and at
/// `spectrum_bound` (except in the no-constant form).
pub fn fit_polynomial<K: Kernel + ?Sized>(
    kernel: &K,
    order: usize,
    grid: usize,
    opts: &FitOptions,
) -> Result<PolyFilter, FrameError> {
    if order == 0 {
        return Err(FrameError::InvalidOrder);
    }
    if grid < 10 * order {
        return Err(FrameError::GridTooSmall { grid, order, min: 10 * order });
    }
    let bound = opts.spectrum_bound;
    let lambdas = super::uniform_grid(0.0, bound, grid);
    let targets: Vec<f64> = lambdas.iter().map(|&l| kernel.response(l)).collect();

    // Basis T_j(u), or lambda T_j(u) when the constant term is excluded.
    let (n_cheb, lift) = if opts.include_constant { (order, false) } else { (order - 1, true) };
    let basis_at = |i: usize| {
        let l = lambdas[i];
        let t = chebyshev_values(n_cheb, 2.0 * l / bound - 1.0);
        if lift {
            t.into_iter().map(|v| l * v).collect()
        } else {
            t
        }
    };
    let rows: Vec<Vec<f64>> = (0..grid).map(basis_at).collect();
    // With T_0 and T_1 available the fit interpolates both ends of the
    // spectrum: w_0 and w_1 are eliminated through
    // sum_j (-1)^j w_j = g(0) and sum_j w_j = g(bound).
    let pinned = !lift && n_cheb >= 2;
    let (first, rhs) = if pinned {
        let (g0, g1) = (targets[0], targets[grid - 1]);
        let offset: Vec<f64> = rows.iter().map(|r| 0.5 * (g0 + g1) * r[0] + 0.5 * (g1 - g0) * r[1]).collect();
        (2, DVector::from_iterator(grid, targets.iter().zip(&offset).map(|(t, o)| t - o)))
    } else {
        (0, DVector::from_vec(targets.clone()))
    };
    let reduced = DMatrix::from_fn(grid, n_cheb + 1 - first, |i, j| {
        let j = j + first;
        let r = &rows[i];
        if pinned {
            r[j] - r[j % 2]
        } else {
            r[j]
        }
    });
    let svd = reduced.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin.is_nan() || smin <= 0.0 || smax / smin > MAX_CONDITION {
        return Err(FrameError::IllConditioned(format!("design matrix condition number {:e}", smax / smin)));
    }
    let free = svd.solve(&rhs, 0.0).map_err(|e| FrameError::IllConditioned(e.to_string()))?;
    let mut weights = DVector::zeros(n_cheb + 1);
    weights.rows_mut(first, n_cheb + 1 - first).copy_from(&free);
    if pinned {
        let (g0, g1) = (targets[0], targets[grid - 1]);
        let even: f64 = free.iter().step_by(2).sum();
        let odd: f64 = free.iter().skip(1).step_by(2).sum();
        weights[0] = 0.5 * (g0 + g1) - even;
        weights[1] = 0.5 * (g1 - g0) - odd;
    }
    let design = DMatrix::from_fn(grid, n_cheb + 1, |i, j| rows[i][j]);
    let fitted = &design * &weights;

    // Re-expand sum_j w_j T_j(u) (times lambda) about the center.
    let alpha = 2.0 / bound;
    let beta = 2.0 * opts.center / bound - 1.0;
    let basis = chebyshev_in_shifted(n_cheb, alpha, beta);
    let mut coefficients: Poly = vec![0.0];
    for (w, p) in weights.iter().zip(&basis) {
        poly_axpy(&mut coefficients, *w, p);
    }
    if lift {
        coefficients = poly_mul_linear(&coefficients, 1.0, opts.center);
    }
    coefficients.resize(order + 1, 0.0);
    let filter = PolyFilter::new(0, opts.center, coefficients);

    let scale = fitted.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut reexpansion_gap = 0.0f64;
    let mut cheb_error = 0.0f64;
    let mut fit_error = 0.0f64;
    for (i, &l) in lambdas.iter().enumerate() {
        let p = filter.eval(l);
        reexpansion_gap = reexpansion_gap.max((p - fitted[i]).abs());
        cheb_error = cheb_error.max((fitted[i] - targets[i]).abs());
        fit_error = fit_error.max((p - targets[i]).abs());
    }
    if reexpansion_gap > (REEXPANSION_TOLERANCE * scale).max(REEXPANSION_SHARE * cheb_error) {
        return Err(FrameError::IllConditioned(format!(
            "power series about {} loses {reexpansion_gap:e} at order {order}",
            opts.center
        )));
    }
    if let Some(tolerance) = opts.max_error {
        if fit_error > tolerance {
            return Err(FrameError::FitTolerance { channel: 0, error: fit_error, tolerance });
        }
    }
    Ok(PolyFilter { fit_error, ..filter })
}

/// `p(L) z` for an `N x H` block, using exactly `order` block products.
pub fn apply_filter<A: LinearOperator + ?Sized>(
    pf: &PolyFilter,
    op: &A,
    z: ArrayView2<'_, f64>,
) -> Result<Array2<f64>, FrameError> {
    if z.nrows() != op.dim() {
        return Err(FrameError::DimensionMismatch { expected: op.dim(), got: z.nrows() });
    }
    let k = pf.order();
    let mut acc = z.to_owned() * pf.coefficients[k];
    let mut tmp = Array2::zeros(z.raw_dim());
    for c in pf.coefficients[..k].iter().rev() {
        op.apply_block(acc.view(), tmp.view_mut());
        // acc <- (L - s I) acc + c z
        ndarray::Zip::from(&mut acc).and(&tmp).and(&z).for_each(|a, &t, &x| {
            *a = t - pf.center * *a + c * x;
        });
    }
    Ok(acc)
}

/// `p_m(L) z_m` for several filters at once.
///
/// When all filters share an expansion point and order the blocks are placed
/// side by side and run through one Horner recurrence, so the total number
/// of single-column products is the same as filtering them one by one.
pub fn apply_filters<A: LinearOperator + ?Sized>(
    filters: &[PolyFilter],
    op: &A,
    blocks: &[ArrayView2<'_, f64>],
) -> Result<Vec<Array2<f64>>, FrameError> {
    assert_eq!(filters.len(), blocks.len(), "one block per filter");
    let Some(first) = filters.first() else {
        return Ok(Vec::new());
    };
    let uniform = filters.iter().all(|f| f.center == first.center && f.order() == first.order());
    if !uniform {
        return filters.iter().zip(blocks).map(|(f, z)| apply_filter(f, op, *z)).collect();
    }
    for z in blocks {
        if z.nrows() != op.dim() {
            return Err(FrameError::DimensionMismatch { expected: op.dim(), got: z.nrows() });
        }
    }
    let k = first.order();
    let s = first.center;
    let width: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut z = Array2::zeros((op.dim(), width));
    let mut start = 0;
    for b in blocks {
        z.slice_mut(ndarray::s![.., start..start + b.ncols()]).assign(b);
        start += b.ncols();
    }
    // coef[j][col]: coefficient of order j for the filter owning column col.
    let coef: Vec<Vec<f64>> = (0..=k)
        .map(|j| {
            filters.iter().zip(blocks).flat_map(|(f, b)| std::iter::repeat_n(f.coefficients[j], b.ncols())).collect()
        })
        .collect();
    let mut acc = z.clone();
    for mut row in acc.rows_mut() {
        for (a, c) in row.iter_mut().zip(&coef[k]) {
            *a *= c;
        }
    }
    let mut tmp = Array2::zeros(z.raw_dim());
    for cj in coef[..k].iter().rev() {
        op.apply_block(acc.view(), tmp.view_mut());
        let (a, t, zz) = (
            acc.as_slice_mut().expect("standard layout"),
            tmp.as_slice().expect("standard layout"),
            z.as_slice().expect("standard layout"),
        );
        for ((ar, tr), zr) in a.chunks_exact_mut(width).zip(t.chunks_exact(width)).zip(zz.chunks_exact(width)) {
            for col in 0..width {
                ar[col] = tr[col] - s * ar[col] + cj[col] * zr[col];
            }
        }
    }
    let mut out = Vec::with_capacity(blocks.len());
    let mut start = 0;
    for b in blocks {
        out.push(acc.slice(ndarray::s![.., start..start + b.ncols()]).to_owned());
        start += b.ncols();
    }
    Ok(out)
}

/// How the decoder's inverse kernels are formed from the frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InverseKernelPolicy {
    /// Synthesis with the analysis kernels themselves; exact for a tight
    /// frame since `sum_m g_m(L)^2 = I`.
    Adjoint,
    /// `g / (g^2 + epsilon)`.
    RegularizedReciprocal { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub order: usize,
    pub grid: usize,
    pub center: f64,
    pub inverse_policy: InverseKernelPolicy,
    /// Whether decoder filters keep the zeroth-order term.
    pub decoder_constant: bool,
    pub max_error: Option<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            order: 24,
            grid: 2001,
            center: 1.0,
            inverse_policy: InverseKernelPolicy::Adjoint,
            decoder_constant: true,
            max_error: None,
        }
    }
}

/// Fitted encoder and decoder filters for every channel of a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub encoder: Vec<PolyFilter>,
    pub decoder: Vec<PolyFilter>,
    pub inverse_policy: InverseKernelPolicy,
}

impl FilterBank {
    pub fn fit(frame: &TightFrame, cfg: &FilterConfig) -> Result<Self, FrameError> {
        let bound = frame.spec().spectrum_bound;
        let enc_opts =
            FitOptions { spectrum_bound: bound, center: cfg.center, include_constant: true, max_error: None };
        let dec_opts = FitOptions { include_constant: cfg.decoder_constant, ..enc_opts.clone() };
        let fit = |kernel: &dyn Kernel, opts: &FitOptions, channel: usize| -> Result<PolyFilter, FrameError> {
            let mut pf = fit_polynomial(kernel, cfg.order, cfg.grid, opts)?;
            pf.channel = channel;
            match cfg.max_error {
                Some(tolerance) if pf.fit_error > tolerance => {
                    Err(FrameError::FitTolerance { channel, error: pf.fit_error, tolerance })
                }
                _ => Ok(pf),
            }
        };
        let mut encoder = Vec::with_capacity(frame.channels());
        let mut decoder = Vec::with_capacity(frame.channels());
        for m in 0..frame.channels() {
            let kernel = frame.kernel(m);
            encoder.push(fit(&kernel, &enc_opts, m)?);
            let dec = match cfg.inverse_policy {
                InverseKernelPolicy::Adjoint => fit(&kernel, &dec_opts, m)?,
                InverseKernelPolicy::RegularizedReciprocal { epsilon } => {
                    let inv = move |l: f64| {
                        let g = kernel.response(l);
                        g / (g * g + epsilon)
                    };
                    fit(&inv, &dec_opts, m)?
                }
            };
            decoder.push(dec);
        }
        Ok(Self { encoder, decoder, inverse_policy: cfg.inverse_policy })
    }

    pub fn channels(&self) -> usize {
        self.encoder.len()
    }

    /// Largest encoder fit error.
    pub fn fit_budget(&self) -> f64 {
        self.encoder.iter().map(|p| p.fit_error).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{build_frame, uniform_grid, FrameSpec};
    use crate::graph::{normalized_laplacian, CountingOperator, Graph, Laplacian};
    use crate::kernel::ConstantKernel;
    use crate::oracle::{eigendecompose, exact_wavelet_transform_block};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn maclaurin() -> FitOptions {
        FitOptions { center: 0.0, ..FitOptions::default() }
    }

    fn random_connected(n: usize, seed: u64) -> Laplacian {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < 0.1 && !edges.contains(&(u, v)) {
                    edges.push((u, v));
                }
            }
        }
        normalized_laplacian(&Graph::new(n, edges).unwrap())
    }

    #[test]
    fn constant_kernel_fits_exactly() {
        for opts in [FitOptions::default(), maclaurin()] {
            let pf = fit_polynomial(&ConstantKernel(0.7), 6, 100, &opts).unwrap();
            assert_abs_diff_eq!(pf.coefficients[0], 0.7, epsilon = 1e-12);
            assert!(pf.coefficients[1..].iter().all(|c| c.abs() < 1e-12));
            assert!(pf.fit_error < 1e-12);
        }
    }

    #[test]
    fn identity_kernel_order_one() {
        let pf = fit_polynomial(&|l: f64| l, 1, 10, &maclaurin()).unwrap();
        assert_abs_diff_eq!(pf.coefficients[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pf.coefficients[1], 1.0, epsilon = 1e-12);
        assert!(pf.fit_error < 1e-12);
        // About the default center the same line is 1 + (lambda - 1).
        let centered = fit_polynomial(&|l: f64| l, 1, 10, &FitOptions::default()).unwrap();
        assert_abs_diff_eq!(centered.coefficients[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(centered.coefficients[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn no_constant_form_vanishes_at_zero() {
        let opts = FitOptions { include_constant: false, ..maclaurin() };
        let pf = fit_polynomial(&|l: f64| 1.0 + l * l, 4, 100, &opts).unwrap();
        assert_abs_diff_eq!(pf.coefficients[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pf.eval(0.0), 0.0, epsilon = 1e-14);
        assert!(pf.fit_error > 0.1);
    }

    #[test]
    fn precondition_errors() {
        assert_eq!(fit_polynomial(&ConstantKernel(1.0), 0, 100, &FitOptions::default()), Err(FrameError::InvalidOrder));
        assert!(matches!(
            fit_polynomial(&ConstantKernel(1.0), 10, 99, &FitOptions::default()),
            Err(FrameError::GridTooSmall { min: 100, .. })
        ));
    }

    #[test]
    fn high_order_maclaurin_about_zero_is_ill_conditioned() {
        let frame = build_frame(&FrameSpec::default()).unwrap();
        let err = fit_polynomial(&frame.kernel(4), 24, 2001, &maclaurin()).unwrap_err();
        assert!(matches!(err, FrameError::IllConditioned(_)), "{err:?}");
    }

    #[test]
    fn orders_up_to_32_fit_and_very_high_orders_are_refused() {
        let frame = build_frame(&FrameSpec::default()).unwrap();
        let default = FilterBank::fit(&frame, &FilterConfig::default()).unwrap();
        let cfg = FilterConfig { order: 32, grid: 4001, ..FilterConfig::default() };
        let bank = FilterBank::fit(&frame, &cfg).unwrap();
        assert!(bank.fit_budget() < default.fit_budget(), "{} vs {}", bank.fit_budget(), default.fit_budget());
        let cfg = FilterConfig { order: 60, grid: 4001, ..FilterConfig::default() };
        assert!(matches!(FilterBank::fit(&frame, &cfg), Err(FrameError::IllConditioned(_))));
    }

    #[test]
    fn default_frame_channel_five_fits_at_order_24() {
        let frame = build_frame(&FrameSpec::default()).unwrap();
        let pf = fit_polynomial(&frame.kernel(4), 24, 2001, &FitOptions::default()).unwrap();
        assert!(pf.fit_error < 1e-2, "{}", pf.fit_error);
        let grid = uniform_grid(0.0, 2.0, 2001);
        let worst = grid.iter().map(|&l| (pf.eval(l) - frame.response(4, l)).abs()).fold(0.0, f64::max);
        assert_abs_diff_eq!(worst, pf.fit_error, epsilon = 1e-15);
    }

    #[test]
    fn tolerance_is_enforced() {
        let frame = build_frame(&FrameSpec::default()).unwrap();
        let opts = FitOptions { max_error: Some(1e-6), ..FitOptions::default() };
        assert!(matches!(fit_polynomial(&frame.kernel(1), 24, 2001, &opts), Err(FrameError::FitTolerance { .. })));
    }

    #[test]
    fn identity_and_laplacian_filters() {
        let l = random_connected(15, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = Array2::from_shape_fn((15, 3), |_| rng.random_range(-1.0..1.0));
        let mut id = vec![0.0; 6];
        id[0] = 1.0;
        let out = apply_filter(&PolyFilter::new(0, 0.0, id), &l, z.view()).unwrap();
        for (a, b) in out.iter().zip(z.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        // L on degree-scaled constants: L D^{1/2} 1 = 0 for the normalized Laplacian on a
        // regular graph this is just the constant vector.
        let cycle = normalized_laplacian(&Graph::new(6, (0..6).map(|i| (i, (i + 1) % 6))).unwrap());
        let ones = Array2::from_elem((6, 2), 3.0);
        let out = apply_filter(&PolyFilter::new(0, 0.0, vec![0.0, 1.0]), &cycle, ones.view()).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn dimension_mismatch() {
        let l = random_connected(5, 1);
        let z = Array2::zeros((4, 2));
        assert_eq!(
            apply_filter(&PolyFilter::new(0, 0.0, vec![1.0]), &l, z.view()),
            Err(FrameError::DimensionMismatch { expected: 5, got: 4 })
        );
    }

    #[test]
    fn uses_exactly_k_products_per_column() {
        let l = random_connected(20, 3);
        let counter = CountingOperator::new(&l);
        let pf = PolyFilter::new(0, 1.0, vec![0.1; 25]);
        let z = Array2::ones((20, 7));
        apply_filter(&pf, &counter, z.view()).unwrap();
        assert_eq!(counter.column_products(), 24 * 7);
    }

    #[test]
    fn stacked_filters_match_individual_ones() {
        let l = random_connected(20, 5);
        let frame = build_frame(&FrameSpec::with_channels(4)).unwrap();
        let bank = FilterBank::fit(&frame, &FilterConfig { order: 10, grid: 400, ..FilterConfig::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let blocks: Vec<Array2<f64>> =
            (0..4).map(|m| Array2::from_shape_fn((20, m + 1), |_| rng.random_range(-1.0..1.0))).collect();
        let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
        let counter = CountingOperator::new(&l);
        let stacked = apply_filters(&bank.encoder, &counter, &views).unwrap();
        assert_eq!(counter.column_products(), 10 * (1 + 2 + 3 + 4));
        for ((pf, b), out) in bank.encoder.iter().zip(&blocks).zip(&stacked) {
            let single = apply_filter(pf, &l, b.view()).unwrap();
            assert!((&single - out).iter().all(|v| v.abs() < 1e-13));
        }
        let mixed = [PolyFilter::new(0, 0.0, vec![1.0, 2.0]), PolyFilter::new(1, 1.0, vec![0.5])];
        let out = apply_filters(&mixed, &l, &views[..2]).unwrap();
        assert_eq!(out[1], blocks[1].map(|v| 0.5 * v));
        assert!(apply_filters(&[], &l, &[]).unwrap().is_empty());
    }

    #[test]
    fn fitted_channel_matches_oracle() {
        let l = random_connected(32, 4);
        let sd = eigendecompose(&l).unwrap();
        let frame = build_frame(&FrameSpec::default()).unwrap();
        let pf = fit_polynomial(&frame.kernel(2), 24, 2001, &FitOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = Array2::from_shape_fn((32, 4), |_| rng.random_range(-1.0..1.0));
        let fast = apply_filter(&pf, &l, z.view()).unwrap();
        let exact = exact_wavelet_transform_block(&z, &sd, &frame.kernel(2)).unwrap();
        let zmax = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dev = (&fast - &exact).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(dev <= pf.fit_error * zmax + 1e-8, "{dev} vs {}", pf.fit_error * zmax);
        // The fitted polynomial evaluated through the eigenbasis is the same operator.
        let via_eig = exact_wavelet_transform_block(&z, &sd, &pf).unwrap();
        assert!((&fast - &via_eig).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn filter_bank_policies() {
        let frame = build_frame(&FrameSpec::default()).unwrap();
        let bank = FilterBank::fit(&frame, &FilterConfig::default()).unwrap();
        assert_eq!(bank.channels(), 9);
        assert!(bank.fit_budget() < 0.05, "{}", bank.fit_budget());
        assert_eq!(bank.encoder, bank.decoder);

        let maclaurin_form =
            FilterConfig { center: 0.0, decoder_constant: false, order: 8, grid: 200, ..FilterConfig::default() };
        let bank = FilterBank::fit(&frame, &maclaurin_form).unwrap();
        assert!(bank.decoder.iter().all(|p| p.coefficients[0] == 0.0));

        let recip = FilterConfig {
            inverse_policy: InverseKernelPolicy::RegularizedReciprocal { epsilon: 0.1 },
            ..FilterConfig::default()
        };
        let bank = FilterBank::fit(&frame, &recip).unwrap();
        assert_ne!(bank.encoder, bank.decoder);
        assert!(bank.decoder.iter().enumerate().all(|(m, p)| p.channel == m));
    }
}
