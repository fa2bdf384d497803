use super::forward::{channel_energies, check_mask, entropy_loss, forward, hidden_residual, LatentState, LossKind};
use super::{ModelError, ModelParams};
use crate::frame::{apply_filters, FilterBank};
use crate::graph::{LinearOperator, MaskMatrix};
use ndarray::{s, Array2, Axis, Zip};

/// Losses of one forward pass together with their exact gradients.
#[derive(Debug, Clone)]
pub struct GradientReport {
    pub reconstruction: f64,
    pub entropy: f64,
    pub total: f64,
    pub grads: ModelParams,
    pub state: LatentState,
}

/// `upstream . phi'(a)`, taking the left slope at the kink.
fn through_leaky(upstream: Array2<f64>, a: &Array2<f64>, slope: f64) -> Array2<f64> {
    let mut out = upstream;
    Zip::from(&mut out).and(a).for_each(|g, &v| {
        if v <= 0.0 {
            *g *= slope;
        }
    });
    out
}

/// `d L_S / d Z2_m` for every channel.
fn entropy_gradient(z2: &[Array2<f64>]) -> Vec<Array2<f64>> {
    let p = channel_energies(z2);
    let h2 = p.ncols();
    let mut totals = vec![0.0; h2];
    for z in z2 {
        for (d, col) in z.axis_iter(Axis(1)).enumerate() {
            totals[d] += col.dot(&col);
        }
    }
    let h: Vec<f64> =
        p.axis_iter(Axis(1)).map(|col| col.iter().filter(|&&q| q > 0.0).map(|q| -q * q.ln()).sum()).collect();
    z2.iter()
        .enumerate()
        .map(|(m, z)| {
            let mut g = z.clone();
            for (d, mut col) in g.axis_iter_mut(Axis(1)).enumerate() {
                let pm = p[[m, d]];
                let scale =
                    if pm > 0.0 && totals[d] > 0.0 { -2.0 * (pm.ln() + h[d]) / (totals[d] * h2 as f64) } else { 0.0 };
                col *= scale;
            }
            g
        })
        .collect()
}

/// Exact gradients of `L_R - gamma L_S` for one graph.
///
/// The mask both hides input entries and selects the entries the
/// reconstruction term is measured on.
pub fn gradients<A: LinearOperator + ?Sized>(
    params: &ModelParams,
    op: &A,
    filters: &FilterBank,
    x: &Array2<f64>,
    mask: &MaskMatrix,
    gamma: f64,
    kind: LossKind,
) -> Result<GradientReport, ModelError> {
    gradients_masked(params, op, filters, x, mask, mask, gamma, kind)
}

/// Like [`gradients`], with the reconstruction term measured on the hidden
/// entries of `loss_mask` instead of those of `input_mask`.
#[allow(clippy::too_many_arguments)]
pub fn gradients_masked<A: LinearOperator + ?Sized>(
    params: &ModelParams,
    op: &A,
    filters: &FilterBank,
    x: &Array2<f64>,
    input_mask: &MaskMatrix,
    loss_mask: &MaskMatrix,
    gamma: f64,
    kind: LossKind,
) -> Result<GradientReport, ModelError> {
    check_mask(loss_mask, x)?;
    let state = forward(params, op, filters, x, input_mask)?;
    let slope = params.slope;
    let h3 = params.dims.h3;

    let resid = hidden_residual(&state.x_tilde, x, loss_mask);
    let sq: f64 = resid.iter().map(|v| v * v).sum();
    let (reconstruction, d_xt) = match kind {
        LossKind::Norm => {
            let norm = sq.sqrt();
            let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
            (norm, resid * scale)
        }
        LossKind::Squared => (sq, resid * 2.0),
    };
    let entropy = entropy_loss(&state.z2);
    let total = reconstruction - gamma * entropy;

    let mut grads = params.zeros_like();
    let d_a4 = through_leaky(d_xt, &state.a4, slope);
    grads.w3 = state.z_agg.t().dot(&d_a4);
    let d_agg = d_a4.dot(&params.w3.t());
    let d_entropy = if gamma != 0.0 { Some(entropy_gradient(&state.z2)) } else { None };

    let mut d_a3 = Vec::with_capacity(params.channels.len());
    let mut d_syn = Vec::with_capacity(params.channels.len());
    for (m, (w, g)) in params.channels.iter().zip(grads.channels.iter_mut()).enumerate() {
        let d_z3 = d_agg.slice(s![.., m * h3..(m + 1) * h3]).to_owned();
        let d = through_leaky(d_z3, &state.a3[m], slope);
        g.w2 = state.synthesized[m].t().dot(&d);
        d_syn.push(d.dot(&w.w2.t()));
        d_a3.push(d);
    }
    // The filters are polynomials in a symmetric operator, so each is its own adjoint.
    let views: Vec<_> = d_syn.iter().map(|d| d.view()).collect();
    let d_z2_all = apply_filters(&filters.decoder, op, &views)?;
    for (m, ((w, g), mut d_z2)) in params.channels.iter().zip(grads.channels.iter_mut()).zip(d_z2_all).enumerate() {
        if let Some(de) = &d_entropy {
            d_z2.scaled_add(-gamma, &de[m]);
        }
        let d_a2 = through_leaky(d_z2, &state.a2[m], slope);
        g.w1 = state.z1[m].t().dot(&d_a2);
        let d_z1 = d_a2.dot(&w.w1.t());
        let d_a1 = through_leaky(d_z1, &state.a1[m], slope);
        g.w0 = state.filtered[m].t().dot(&d_a1);
    }

    for (name, t) in grads.tensor_names().into_iter().zip(grads.tensors()) {
        let count = t.iter().filter(|v| !v.is_finite()).count();
        if count > 0 {
            return Err(ModelError::NonFiniteGradient { tensor: name, count });
        }
    }
    Ok(GradientReport { reconstruction, entropy, total, grads, state })
}
