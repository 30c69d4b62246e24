use super::ModelParams;
use crate::clustering::{argmax, AntecedentVector};
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::soft_entity::LinkDistribution;

/// Activations kept for the backward pass.
pub(crate) struct Forward {
    h_a: Vec<Vec<f64>>,
    /// Packed by `pair_index`.
    h_p: Vec<Vec<f64>>,
    pub scores: Vec<Vec<f64>>,
}

fn check_dims(doc: &Document, params: &ModelParams) -> Result<()> {
    let d = params.dims();
    if doc.d_a() != d.d_a || doc.d_p() != d.d_p {
        return Err(Error::Shape(format!(
            "document {} has (d_a={}, d_p={}) but the model expects (d_a={}, d_p={})",
            doc.id(),
            doc.d_a(),
            doc.d_p(),
            d.d_a,
            d.d_p
        )));
    }
    Ok(())
}

fn dense_tanh(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(r, &bias)| {
            let row = &w[r * cols..(r + 1) * cols];
            let z: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias;
            z.tanh()
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn forward(doc: &Document, params: &ModelParams) -> Result<Forward> {
    check_dims(doc, params)?;
    let n = doc.len();
    let h_a_dim = params.dims().h_a;
    let (u_a, u_p) = params.u().split_at(h_a_dim);
    let (u0, v, v0) = (params.u0(), params.v(), params.v0());

    let h_a: Vec<Vec<f64>> = doc
        .mentions()
        .iter()
        .map(|m| dense_tanh(params.w_a(), params.b_a(), &m.features))
        .collect();
    let h_p: Vec<Vec<f64>> = doc
        .packed_pair_features()
        .iter()
        .map(|phi| dense_tanh(params.w_p(), params.b_p(), phi))
        .collect();

    let mut scores = Vec::with_capacity(n);
    let mut pairs = h_p.iter();
    for (i, hi) in h_a.iter().enumerate() {
        let anaphor = dot(u_a, hi) + u0;
        let mut row: Vec<f64> = pairs
            .by_ref()
            .take(i)
            .map(|hp| anaphor + dot(u_p, hp))
            .collect();
        row.push(dot(v, hi) + v0);
        scores.push(row);
    }
    Ok(Forward { h_a, h_p, scores })
}

/// Lower-triangular scores `s(a_i = j)`, `j <= i`.
pub fn score_pairs(doc: &Document, params: &ModelParams) -> Result<Vec<Vec<f64>>> {
    Ok(forward(doc, params)?.scores)
}

/// Highest-scoring antecedent of each mention (ties to the earliest).
pub fn predict_antecedents(doc: &Document, params: &ModelParams) -> Result<AntecedentVector> {
    let scores = score_pairs(doc, params)?;
    AntecedentVector::new(scores.iter().map(|row| argmax(row)).collect())
}

/// Row softmax of a score matrix.
pub fn link_probabilities(scores: &[Vec<f64>]) -> LinkDistribution {
    LinkDistribution::from_scores(scores)
}

/// Accumulates `d(rows of a tanh layer)` into weight and bias gradients.
fn dense_tanh_backward(
    grad_h: &[f64],
    h: &[f64],
    x: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) {
    let cols = x.len();
    for (r, (&g, &hv)) in grad_h.iter().zip(h).enumerate() {
        let pre = g * (1.0 - hv * hv);
        if pre == 0.0 {
            continue;
        }
        grad_b[r] += pre;
        for (gw, &xv) in grad_w[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *gw += pre * xv;
        }
    }
}

/// Maps `dL/ds` to parameter gradients.
pub(crate) fn backward(
    doc: &Document,
    params: &ModelParams,
    fwd: &Forward,
    grad_scores: &[Vec<f64>],
) -> ModelParams {
    let dims = params.dims();
    let layout = params.layout();
    let mut grad = ModelParams::zeros(dims);
    let (u_a, u_p) = params.u().split_at(dims.h_a);
    let v = params.v();

    let mut g_u = vec![0.0; dims.h_a + dims.h_p];
    let mut g_u0 = 0.0;
    let mut g_v = vec![0.0; dims.h_a];
    let mut g_v0 = 0.0;
    let mut g_wa = vec![0.0; layout.w_a.len()];
    let mut g_ba = vec![0.0; dims.h_a];
    let mut g_wp = vec![0.0; layout.w_p.len()];
    let mut g_bp = vec![0.0; dims.h_p];

    let mut k = 0;
    let mut g_hp = vec![0.0; dims.h_p];
    for (i, row) in grad_scores.iter().enumerate() {
        let h_a = &fwd.h_a[i];
        let mut g_ha = vec![0.0; dims.h_a];
        let mut anaphor_total = 0.0;
        for &g in &row[..i] {
            let h_p = &fwd.h_p[k];
            anaphor_total += g;
            for (gu, &hv) in g_u[dims.h_a..].iter_mut().zip(h_p) {
                *gu += g * hv;
            }
            for (gh, &uv) in g_hp.iter_mut().zip(u_p) {
                *gh = g * uv;
            }
            dense_tanh_backward(
                &g_hp,
                h_p,
                doc.packed_pair_features()[k].as_slice(),
                &mut g_wp,
                &mut g_bp,
            );
            k += 1;
        }
        g_u0 += anaphor_total;
        for ((gu, gh), (&hv, &uv)) in g_u[..dims.h_a]
            .iter_mut()
            .zip(g_ha.iter_mut())
            .zip(h_a.iter().zip(u_a))
        {
            *gu += anaphor_total * hv;
            *gh += anaphor_total * uv;
        }
        let g_self = row[i];
        g_v0 += g_self;
        for ((gv, gh), (&hv, &vv)) in g_v.iter_mut().zip(g_ha.iter_mut()).zip(h_a.iter().zip(v)) {
            *gv += g_self * hv;
            *gh += g_self * vv;
        }
        dense_tanh_backward(
            &g_ha,
            h_a,
            &doc.mentions()[i].features,
            &mut g_wa,
            &mut g_ba,
        );
    }

    let data = grad.as_mut_slice();
    data[layout.w_a].copy_from_slice(&g_wa);
    data[layout.b_a].copy_from_slice(&g_ba);
    data[layout.w_p].copy_from_slice(&g_wp);
    data[layout.b_p].copy_from_slice(&g_bp);
    data[layout.u].copy_from_slice(&g_u);
    data[layout.u0.start] = g_u0;
    data[layout.v].copy_from_slice(&g_v);
    data[layout.v0.start] = g_v0;
    grad
}
