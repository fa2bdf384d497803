use super::{check_shape, ModelError, ModelParams};
use crate::frame::{apply_filters, FilterBank, PolyFilter};
use crate::graph::{LinearOperator, MaskMatrix};
use crate::oracle::shannon_entropy;
use ndarray::{concatenate, Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

pub(crate) fn leaky(a: &Array2<f64>, slope: f64) -> Array2<f64> {
    a.mapv(|v| if v > 0.0 { v } else { slope * v })
}

/// Form of the reconstruction term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Frobenius norm of the hidden-entry residual.
    #[default]
    Norm,
    /// Its square.
    Squared,
}

/// Every intermediate of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct LatentState {
    /// Masked input `X . R`, shared by all channels.
    pub z0: Array2<f64>,
    /// `p_m(L) Z0`.
    pub filtered: Vec<Array2<f64>>,
    pub a1: Vec<Array2<f64>>,
    pub z1: Vec<Array2<f64>>,
    pub a2: Vec<Array2<f64>>,
    pub z2: Vec<Array2<f64>>,
    /// `q_m(L) Z2_m`.
    pub synthesized: Vec<Array2<f64>>,
    pub a3: Vec<Array2<f64>>,
    pub z3: Vec<Array2<f64>>,
    pub z_agg: Array2<f64>,
    pub a4: Array2<f64>,
    pub x_tilde: Array2<f64>,
}

fn check_filters(params: &ModelParams, filters: &[PolyFilter], what: &str) -> Result<(), ModelError> {
    if filters.len() != params.dims.channels {
        return Err(ModelError::Config(format!(
            "{} {what} filters for {} channels",
            filters.len(),
            params.dims.channels
        )));
    }
    Ok(())
}

struct Encoded {
    filtered: Vec<Array2<f64>>,
    a1: Vec<Array2<f64>>,
    z1: Vec<Array2<f64>>,
    a2: Vec<Array2<f64>>,
    z2: Vec<Array2<f64>>,
}

fn encode_full<A: LinearOperator + ?Sized>(
    params: &ModelParams,
    op: &A,
    filters: &[PolyFilter],
    z0: &Array2<f64>,
) -> Result<Encoded, ModelError> {
    check_filters(params, filters, "encoder")?;
    check_shape("masked input", z0, (op.dim(), params.dims.d_in))?;
    let mut enc = Encoded { filtered: vec![], a1: vec![], z1: vec![], a2: vec![], z2: vec![] };
    let inputs = vec![z0.view(); filters.len()];
    for (w, f) in params.channels.iter().zip(apply_filters(filters, op, &inputs)?) {
        let a1 = f.dot(&w.w0);
        let z1 = leaky(&a1, params.slope);
        let a2 = z1.dot(&w.w1);
        let z2 = leaky(&a2, params.slope);
        enc.filtered.push(f);
        enc.a1.push(a1);
        enc.z1.push(z1);
        enc.a2.push(a2);
        enc.z2.push(z2);
    }
    Ok(enc)
}

struct Decoded {
    synthesized: Vec<Array2<f64>>,
    a3: Vec<Array2<f64>>,
    z3: Vec<Array2<f64>>,
    z_agg: Array2<f64>,
    a4: Array2<f64>,
    x_tilde: Array2<f64>,
}

fn decode_full<A: LinearOperator + ?Sized>(
    params: &ModelParams,
    op: &A,
    filters: &[PolyFilter],
    z2: &[Array2<f64>],
) -> Result<Decoded, ModelError> {
    check_filters(params, filters, "decoder")?;
    if z2.len() != params.dims.channels {
        return Err(ModelError::Config(format!("{} latent blocks for {} channels", z2.len(), params.dims.channels)));
    }
    let mut synthesized = Vec::with_capacity(z2.len());
    let mut a3 = Vec::with_capacity(z2.len());
    let mut z3 = Vec::with_capacity(z2.len());
    for z in z2 {
        check_shape("latent", z, (op.dim(), params.dims.h2))?;
    }
    let views: Vec<_> = z2.iter().map(|z| z.view()).collect();
    for (w, g) in params.channels.iter().zip(apply_filters(filters, op, &views)?) {
        let a = g.dot(&w.w2);
        z3.push(leaky(&a, params.slope));
        synthesized.push(g);
        a3.push(a);
    }
    let views: Vec<_> = z3.iter().map(|z| z.view()).collect();
    let z_agg = concatenate(Axis(1), &views).expect("equal row counts");
    let a4 = z_agg.dot(&params.w3);
    let x_tilde = leaky(&a4, params.slope);
    Ok(Decoded { synthesized, a3, z3, z_agg, a4, x_tilde })
}

/// Per-channel latent codes `Z2_m` for a masked input.
pub fn encode<A: LinearOperator + ?Sized>(
    params: &ModelParams,
    op: &A,
    filters: &FilterBank,
    x_masked: &Array2<f64>,
) -> Result<Vec<Array2<f64>>, ModelError> {
    Ok(encode_full(params, op, &filters.encoder, x_masked)?.z2)
}

/// Reconstruction `X~` from per-channel latent codes.
pub fn decode<A: LinearOperator + ?Sized>(
    params: &ModelParams,
    op: &A,
    filters: &FilterBank,
    z2: &[Array2<f64>],
) -> Result<Array2<f64>, ModelError> {
    Ok(decode_full(params, op, &filters.decoder, z2)?.x_tilde)
}

/// Full forward pass on `X . R`.
pub fn forward<A: LinearOperator + ?Sized>(
    params: &ModelParams,
    op: &A,
    filters: &FilterBank,
    x: &Array2<f64>,
    mask: &MaskMatrix,
) -> Result<LatentState, ModelError> {
    check_shape("features", x, (op.dim(), params.dims.d_in))?;
    check_mask(mask, x)?;
    let z0 = x * &mask.to_f64();
    let enc = encode_full(params, op, &filters.encoder, &z0)?;
    let dec = decode_full(params, op, &filters.decoder, &enc.z2)?;
    Ok(LatentState {
        z0,
        filtered: enc.filtered,
        a1: enc.a1,
        z1: enc.z1,
        a2: enc.a2,
        z2: enc.z2,
        synthesized: dec.synthesized,
        a3: dec.a3,
        z3: dec.z3,
        z_agg: dec.z_agg,
        a4: dec.a4,
        x_tilde: dec.x_tilde,
    })
}

pub(crate) fn check_mask(mask: &MaskMatrix, x: &Array2<f64>) -> Result<(), ModelError> {
    if mask.shape() == x.dim() {
        Ok(())
    } else {
        Err(ModelError::ShapeMismatch { what: "mask".into(), expected: x.dim(), got: mask.shape() })
    }
}

/// `X . R + X~ . (1 - R)`: observed entries pass through untouched.
pub fn impute<A: LinearOperator + ?Sized>(
    params: &ModelParams,
    op: &A,
    filters: &FilterBank,
    x: &Array2<f64>,
    mask: &MaskMatrix,
) -> Result<Array2<f64>, ModelError> {
    let state = forward(params, op, filters, x, mask)?;
    let mut out = state.x_tilde;
    Zip::from(&mut out).and(x).and(mask.observed()).for_each(|o, &v, &seen| {
        if seen {
            *o = v;
        }
    });
    Ok(out)
}

/// Residual over hidden entries, `(X~ - X) . (1 - R)`.
pub(crate) fn hidden_residual(x_tilde: &Array2<f64>, x: &Array2<f64>, mask: &MaskMatrix) -> Array2<f64> {
    let mut r = x_tilde - x;
    Zip::from(&mut r).and(mask.observed()).for_each(|v, &seen| {
        if seen {
            *v = 0.0;
        }
    });
    r
}

pub fn reconstruction_loss(x_tilde: &Array2<f64>, x: &Array2<f64>, mask: &MaskMatrix, kind: LossKind) -> f64 {
    let sq: f64 = hidden_residual(x_tilde, x, mask).iter().map(|v| v * v).sum();
    match kind {
        LossKind::Norm => sq.sqrt(),
        LossKind::Squared => sq,
    }
}

/// `M x H2` matrix of per-channel energy shares for each latent dimension.
/// A dimension with no energy in any channel gets an all-zero column.
pub fn channel_energies(z2: &[Array2<f64>]) -> Array2<f64> {
    let h2 = z2.first().map_or(0, |z| z.ncols());
    let mut p = Array2::zeros((z2.len(), h2));
    for (m, z) in z2.iter().enumerate() {
        for (d, col) in z.axis_iter(Axis(1)).enumerate() {
            p[[m, d]] = col.dot(&col);
        }
    }
    for mut col in p.axis_iter_mut(Axis(1)) {
        let total = col.sum();
        if total > 0.0 {
            col /= total;
        }
    }
    p
}

/// Mean over latent dimensions of the entropy of the channel energy shares.
pub fn entropy_loss(z2: &[Array2<f64>]) -> f64 {
    let p = channel_energies(z2);
    if p.ncols() == 0 {
        return 0.0;
    }
    let sum: f64 = p.axis_iter(Axis(1)).map(|col| shannon_entropy(col.iter().copied(), 1.0)).sum();
    sum / p.ncols() as f64
}

pub fn total_loss(reconstruction: f64, entropy: f64, gamma: f64) -> f64 {
    reconstruction - gamma * entropy
}
