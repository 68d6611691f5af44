//! Two-view contrastive link sign model with hand-derived gradients.
//!
//! A shared one-layer signed encoder maps each graph view to node
//! embeddings: `Z = tanh(D+^-1 A+ X W_pos + D-^-1 A- X W_neg + X W_self)`,
//! where `A+`/`A-` split the adjacency by sign and rows with no neighbors of
//! a kind normalize by 1. The poisoned graph is the negative view; the
//! augmenter's balance-enhanced sample is the positive view. Row-normalized
//! embeddings feed an InfoNCE alignment term and a per-view uniformity term;
//! the concatenated raw embeddings pass through a sigmoid output layer and a
//! 2-layer MLP edge scorer trained with binary cross-entropy. Everything is
//! plain `f64` ndarray code, sequential and deterministic, with reverse-mode
//! gradients written out by hand and checked against finite differences.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::augment::{
    optimize_delta, sample_positive_view, select_nd_percent, AugmenterState, DEFAULT_STEP_SIZE,
};
use crate::balance::balance_degree;
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, SignedMatrix};

/// Warmup steps used to pre-optimize the augmenter when `nd_percent` is
/// auto-selected.
const ND_WARMUP_STEPS: usize = 200;

/// Parameter update rule. Plain gradient descent is the reproducibility
/// default; Adam is available for faster desk-scale convergence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Contrastive weight in the combined objective.
    pub alpha: f64,
    /// Softmax temperature.
    pub tau: f64,
    /// Weight of the intra-view uniformity term.
    pub lambda_intra: f64,
    /// Number of contrasted views; this implementation fixes 2.
    pub k_views: usize,
    /// Sampling budget in percent; `None` auto-selects the smallest budget
    /// whose positive view is balanced enough.
    pub nd_percent: Option<f64>,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Input feature dimension.
    pub d_in: usize,
    /// Encoder output dimension per view.
    pub d_hid: usize,
    /// Fused embedding dimension.
    pub d_emb: usize,
    /// Hidden width of the edge scorer.
    pub mlp_hidden: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            alpha: 1.0,
            tau: 0.5,
            lambda_intra: 1.0,
            k_views: 2,
            nd_percent: None,
            learning_rate: 0.001,
            epochs: 100,
            d_in: 64,
            d_hid: 64,
            d_emb: 64,
            mlp_hidden: 32,
            optimizer: Optimizer::Sgd,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 {
            return Err(Error::InvalidConfig(format!("alpha {} < 0", self.alpha)));
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidConfig(format!("tau {} <= 0", self.tau)));
        }
        if self.lambda_intra < 0.0 {
            return Err(Error::InvalidConfig("lambda_intra < 0".into()));
        }
        if self.k_views != 2 {
            return Err(Error::InvalidConfig("k_views must be 2".into()));
        }
        if let Some(nd) = self.nd_percent {
            if !(0.0..=100.0).contains(&nd) {
                return Err(Error::InvalidConfig(format!(
                    "nd_percent {nd} outside [0,100]"
                )));
            }
        }
        if self.d_in == 0 || self.d_hid == 0 || self.d_emb == 0 || self.mlp_hidden == 0 {
            return Err(Error::InvalidConfig("zero model dimension".into()));
        }
        Ok(())
    }
}

/// Encoder, fusion, and scorer weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub w_pos: Array2<f64>,
    pub w_neg: Array2<f64>,
    pub w_self: Array2<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

fn xavier(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..=bound))
}

impl ModelParams {
    /// Uniform Xavier init for the weight matrices, zero biases.
    pub fn init(hyper: &HyperParams, seed: u64) -> ModelParams {
        let mut rng = crate::rng::stream(seed);
        let (d_in, d_hid, d_emb, h) = (hyper.d_in, hyper.d_hid, hyper.d_emb, hyper.mlp_hidden);
        ModelParams {
            w_pos: xavier(&mut rng, d_in, d_hid),
            w_neg: xavier(&mut rng, d_in, d_hid),
            w_self: xavier(&mut rng, d_in, d_hid),
            w_out: xavier(&mut rng, 2 * d_hid, d_emb),
            b_out: Array1::zeros(d_emb),
            w1: xavier(&mut rng, 2 * d_emb, h),
            b1: Array1::zeros(h),
            w2: xavier(&mut rng, h, 1).column(0).to_owned(),
            b2: 0.0,
        }
    }

    pub fn zeros(hyper: &HyperParams) -> ModelParams {
        let (d_in, d_hid, d_emb, h) = (hyper.d_in, hyper.d_hid, hyper.d_emb, hyper.mlp_hidden);
        ModelParams {
            w_pos: Array2::zeros((d_in, d_hid)),
            w_neg: Array2::zeros((d_in, d_hid)),
            w_self: Array2::zeros((d_in, d_hid)),
            w_out: Array2::zeros((2 * d_hid, d_emb)),
            b_out: Array1::zeros(d_emb),
            w1: Array2::zeros((2 * d_emb, h)),
            b1: Array1::zeros(h),
            w2: Array1::zeros(h),
            b2: 0.0,
        }
    }

    /// Named parameter arrays in checkpoint order.
    pub fn array_names() -> [&'static str; 9] {
        [
            "w_pos", "w_neg", "w_self", "w_out", "b_out", "w1", "b1", "w2", "b2",
        ]
    }

    /// All parameters flattened in checkpoint order.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend(self.w_pos.iter());
        out.extend(self.w_neg.iter());
        out.extend(self.w_self.iter());
        out.extend(self.w_out.iter());
        out.extend(self.b_out.iter());
        out.extend(self.w1.iter());
        out.extend(self.b1.iter());
        out.extend(self.w2.iter());
        out.push(self.b2);
        out
    }

    /// Overwrite all parameters from a flat vector in checkpoint order.
    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut k = 0;
        for arr in [&mut self.w_pos, &mut self.w_neg, &mut self.w_self, &mut self.w_out] {
            for v in arr.iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }
        for v in self.b_out.iter_mut() {
            *v = flat[k];
            k += 1;
        }
        for v in self.w1.iter_mut() {
            *v = flat[k];
            k += 1;
        }
        for v in self.b1.iter_mut() {
            *v = flat[k];
            k += 1;
        }
        for v in self.w2.iter_mut() {
            *v = flat[k];
            k += 1;
        }
        self.b2 = flat[k];
        debug_assert_eq!(k + 1, flat.len());
    }

    pub fn is_finite(&self) -> bool {
        self.flat().iter().all(|v| v.is_finite())
    }
}

/// Per-parameter gradients, same layout as [`ModelParams`].
pub type ModelGrads = ModelParams;

/// Sign-split mean aggregation of node features over one graph view.
#[derive(Clone, Debug)]
pub struct ViewAggregates {
    /// Mean feature of positive out-neighbors, per node.
    pub xp: Array2<f64>,
    /// Mean feature of negative out-neighbors, per node.
    pub xq: Array2<f64>,
}

pub fn aggregates(adj: &SignedMatrix, x: &FeatureMatrix) -> Result<ViewAggregates> {
    let n = adj.dim();
    if x.nrows() != n {
        return Err(Error::ShapeMismatch(format!(
            "features have {} rows for a {n}-node graph",
            x.nrows()
        )));
    }
    let d = x.ncols();
    let mut xp = Array2::zeros((n, d));
    let mut xq = Array2::zeros((n, d));
    for i in 0..n {
        let mut pos = 0usize;
        let mut neg = 0usize;
        for &(j, v) in adj.out_row(i as u32) {
            let w = v.abs();
            if v > 0.0 {
                pos += 1;
                let row = x.row(j as usize);
                for (k, xv) in row.iter().enumerate() {
                    xp[(i, k)] += w * xv;
                }
            } else if v < 0.0 {
                neg += 1;
                let row = x.row(j as usize);
                for (k, xv) in row.iter().enumerate() {
                    xq[(i, k)] += w * xv;
                }
            }
        }
        if pos > 1 {
            let inv = 1.0 / pos as f64;
            for k in 0..d {
                xp[(i, k)] *= inv;
            }
        }
        if neg > 1 {
            let inv = 1.0 / neg as f64;
            for k in 0..d {
                xq[(i, k)] *= inv;
            }
        }
    }
    Ok(ViewAggregates { xp, xq })
}

/// Shared encoder forward: `Z = tanh(XP W_pos + XQ W_neg + X W_self)`.
pub fn encode(params: &ModelParams, adj: &SignedMatrix, x: &FeatureMatrix) -> Result<Array2<f64>> {
    let agg = aggregates(adj, x)?;
    encode_from_aggregates(params, &agg, x)
}

fn encode_from_aggregates(
    params: &ModelParams,
    agg: &ViewAggregates,
    x: &FeatureMatrix,
) -> Result<Array2<f64>> {
    if x.ncols() != params.w_self.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "features are {}-dimensional, encoder expects {}",
            x.ncols(),
            params.w_self.nrows()
        )));
    }
    let u = agg.xp.dot(&params.w_pos) + agg.xq.dot(&params.w_neg) + x.dot(&params.w_self);
    Ok(u.mapv(f64::tanh))
}

/// Row-normalized copy plus the effective norms (zero rows normalize by 1).
fn normalize_rows(z: &Array2<f64>) -> (Array2<f64>, Vec<f64>) {
    let mut out = z.clone();
    let mut norms = Vec::with_capacity(z.nrows());
    for mut row in out.rows_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let eff = if norm > 0.0 { norm } else { 1.0 };
        row.mapv_inplace(|v| v / eff);
        norms.push(eff);
    }
    (out, norms)
}

fn check_same_shape(z1: &Array2<f64>, z2: &Array2<f64>) -> Result<()> {
    if z1.shape() != z2.shape() {
        return Err(Error::ShapeMismatch(format!(
            "embedding shapes {:?} vs {:?}",
            z1.shape(),
            z2.shape()
        )));
    }
    if z1.nrows() < 2 {
        return Err(Error::ShapeMismatch(
            "contrastive losses need at least 2 nodes".into(),
        ));
    }
    Ok(())
}

fn logsumexp(row: &[f64]) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// InfoNCE alignment across views: anchors in view 1, candidates in view 2.
/// Rows are L2-normalized before the dot products.
pub fn inter_view_loss(z1: &Array2<f64>, z2: &Array2<f64>, tau: f64) -> Result<f64> {
    check_same_shape(z1, z2)?;
    let (n1, _) = normalize_rows(z1);
    let (n2, _) = normalize_rows(z2);
    let s = n1.dot(&n2.t()) / tau;
    let n = s.nrows();
    let mut loss = 0.0;
    for u in 0..n {
        let row: Vec<f64> = s.row(u).to_vec();
        loss += logsumexp(&row) - s[(u, u)];
    }
    let loss = loss / n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("inter_view_loss"));
    }
    Ok(loss)
}

/// Uniformity term inside each view: mean log-sum of off-diagonal pair
/// similarities; minimizing it pushes distinct nodes apart.
pub fn intra_view_loss(views: &[&Array2<f64>], tau: f64) -> Result<f64> {
    if views.is_empty() {
        return Err(Error::ShapeMismatch("intra_view_loss needs >= 1 view".into()));
    }
    let mut total = 0.0;
    for z in views {
        check_same_shape(z, z)?;
        let (nk, _) = normalize_rows(z);
        let s = nk.dot(&nk.t()) / tau;
        let n = s.nrows();
        let mut view_loss = 0.0;
        for u in 0..n {
            let row: Vec<f64> = s
                .row(u)
                .iter()
                .enumerate()
                .filter(|(v, _)| *v != u)
                .map(|(_, x)| *x)
                .collect();
            view_loss += logsumexp(&row);
        }
        total += view_loss / n as f64;
    }
    let loss = total / views.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("intra_view_loss"));
    }
    Ok(loss)
}

/// Combined contrastive objective: alignment plus weighted uniformity.
pub fn contrastive_loss(
    z1: &Array2<f64>,
    z2: &Array2<f64>,
    tau: f64,
    lambda_intra: f64,
) -> Result<f64> {
    Ok(inter_view_loss(z1, z2, tau)? + lambda_intra * intra_view_loss(&[z1, z2], tau)?)
}

/// Fused node embeddings: `R = sigma([Z1 || Z2] W_out + B_out)`.
pub fn fuse_embeddings(
    z1: &Array2<f64>,
    z2: &Array2<f64>,
    params: &ModelParams,
) -> Result<Array2<f64>> {
    check_same_shape(z1, z2)?;
    if 2 * z1.ncols() != params.w_out.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "fusion expects {} concatenated columns, got {}",
            params.w_out.nrows(),
            2 * z1.ncols()
        )));
    }
    let n = z1.nrows();
    let mut cat = Array2::zeros((n, 2 * z1.ncols()));
    cat.slice_mut(ndarray::s![.., ..z1.ncols()]).assign(z1);
    cat.slice_mut(ndarray::s![.., z1.ncols()..]).assign(z2);
    let pre = cat.dot(&params.w_out) + &params.b_out;
    Ok(pre.mapv(|v| 1.0 / (1.0 + (-v).exp())))
}

/// Raw sign score of one edge: a 2-layer MLP over the concatenated fused
/// embeddings of its endpoints (hidden tanh, linear output).
pub fn predict_sign_score(r: &Array2<f64>, edge: (u32, u32), params: &ModelParams) -> f64 {
    let (i, j) = edge;
    let d = r.ncols();
    let mut f = Vec::with_capacity(2 * d);
    f.extend(r.row(i as usize).iter());
    f.extend(r.row(j as usize).iter());
    let h = params.mlp_hidden_forward(&f);
    h.iter().zip(params.w2.iter()).map(|(a, b)| a * b).sum::<f64>() + params.b2
}

impl ModelParams {
    fn mlp_hidden_forward(&self, f: &[f64]) -> Vec<f64> {
        let h = self.w1.ncols();
        let mut out = vec![0.0; h];
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = self.b1[k];
            for (a, fv) in f.iter().enumerate() {
                acc += fv * self.w1[(a, k)];
            }
            *o = acc.tanh();
        }
        out
    }
}

/// Numerically stable mean binary cross-entropy on raw scores:
/// `softplus(s) - y*s` per edge.
pub fn label_loss(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut total = 0.0;
    for (&s, &y) in scores.iter().zip(labels) {
        total += softplus(s) - y * s;
    }
    let loss = total / scores.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("label_loss"));
    }
    Ok(loss)
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        (1.0 + x.exp()).ln()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Combined objective `alpha * L_con + L_label`.
pub fn total_loss(alpha: f64, contrastive: f64, label: f64) -> f64 {
    alpha * contrastive + label
}

/// Everything the forward/backward pass needs for one step.
pub struct Batch<'a> {
    pub features: &'a FeatureMatrix,
    pub negative_view: &'a SignedMatrix,
    pub positive_view: &'a SignedMatrix,
    /// Training edges with binary labels (1 = positive sign).
    pub edges: &'a [(u32, u32)],
    pub labels: &'a [f64],
    pub alpha: f64,
    pub tau: f64,
    pub lambda_intra: f64,
}

/// Loss components of one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub label: f64,
    pub inter: f64,
    pub intra: f64,
}

impl LossBreakdown {
    pub fn contrastive(&self, lambda_intra: f64) -> f64 {
        self.inter + lambda_intra * self.intra
    }
}

/// Forward pass only; used by the finite-difference oracle.
pub fn forward(params: &ModelParams, batch: &Batch) -> Result<LossBreakdown> {
    let z1 = encode(params, batch.negative_view, batch.features)?;
    let z2 = encode(params, batch.positive_view, batch.features)?;
    let inter = inter_view_loss(&z1, &z2, batch.tau)?;
    let intra = intra_view_loss(&[&z1, &z2], batch.tau)?;
    let r = fuse_embeddings(&z1, &z2, params)?;
    let scores: Vec<f64> = batch
        .edges
        .iter()
        .map(|&e| predict_sign_score(&r, e, params))
        .collect();
    let label = label_loss(&scores, batch.labels)?;
    let total = total_loss(batch.alpha, inter + batch.lambda_intra * intra, label);
    Ok(LossBreakdown {
        total,
        label,
        inter,
        intra,
    })
}

/// Forward plus hand-derived reverse-mode gradients for every parameter.
pub fn backward(params: &ModelParams, batch: &Batch) -> Result<(LossBreakdown, ModelGrads)> {
    let x = batch.features;
    let n = x.nrows();
    let agg_n = aggregates(batch.negative_view, x)?;
    let agg_p = aggregates(batch.positive_view, x)?;
    let z1 = encode_from_aggregates(params, &agg_n, x)?;
    let z2 = encode_from_aggregates(params, &agg_p, x)?;
    let (n1, norms1) = normalize_rows(&z1);
    let (n2, norms2) = normalize_rows(&z2);
    let tau = batch.tau;

    // inter-view: softmax over candidates per anchor
    let s = n1.dot(&n2.t()) / tau;
    let mut p = Array2::zeros((n, n));
    let mut inter = 0.0;
    for u in 0..n {
        let row: Vec<f64> = s.row(u).to_vec();
        let lse = logsumexp(&row);
        inter += lse - s[(u, u)];
        for v in 0..n {
            p[(u, v)] = (s[(u, v)] - lse).exp();
        }
    }
    inter /= n as f64;

    // intra-view: off-diagonal softmax weights per view
    let mut intra = 0.0;
    let mut q1 = Array2::zeros((n, n));
    let mut q2 = Array2::zeros((n, n));
    for (nk, qk) in [(&n1, &mut q1), (&n2, &mut q2)] {
        let sk = nk.dot(&nk.t()) / tau;
        let mut view_loss = 0.0;
        for u in 0..n {
            let row: Vec<f64> = sk
                .row(u)
                .iter()
                .enumerate()
                .filter(|(v, _)| *v != u)
                .map(|(_, x)| *x)
                .collect();
            let lse = logsumexp(&row);
            view_loss += lse;
            for v in 0..n {
                if v != u {
                    qk[(u, v)] = (sk[(u, v)] - lse).exp();
                }
            }
        }
        intra += view_loss / n as f64;
    }
    intra /= 2.0;

    // fusion + scorer forward
    let d_hid = z1.ncols();
    let mut cat = Array2::zeros((n, 2 * d_hid));
    cat.slice_mut(ndarray::s![.., ..d_hid]).assign(&z1);
    cat.slice_mut(ndarray::s![.., d_hid..]).assign(&z2);
    let pre = cat.dot(&params.w_out) + &params.b_out;
    let r = pre.mapv(sigmoid);
    let d_emb = r.ncols();
    let h_width = params.w1.ncols();

    let m = batch.edges.len();
    if m == 0 || m != batch.labels.len() {
        return Err(Error::LengthMismatch(m, batch.labels.len()));
    }
    let mut label = 0.0;
    let mut grads = ModelParams::zeros(&HyperParams {
        d_in: x.ncols(),
        d_hid,
        d_emb,
        mlp_hidden: h_width,
        ..HyperParams::default()
    });
    let mut d_r = Array2::zeros((n, d_emb));

    for (&(i, j), &y) in batch.edges.iter().zip(batch.labels) {
        let mut f = Vec::with_capacity(2 * d_emb);
        f.extend(r.row(i as usize).iter());
        f.extend(r.row(j as usize).iter());
        let hidden = params.mlp_hidden_forward(&f);
        let score = hidden
            .iter()
            .zip(params.w2.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + params.b2;
        label += softplus(score) - y * score;

        let d_score = (sigmoid(score) - y) / m as f64;
        grads.b2 += d_score;
        for (k, h_val) in hidden.iter().enumerate() {
            grads.w2[k] += d_score * h_val;
        }
        // back through the hidden tanh layer
        let mut d_f = vec![0.0; 2 * d_emb];
        for (k, h_val) in hidden.iter().enumerate() {
            let d_hidden = d_score * params.w2[k];
            let d_pre = d_hidden * (1.0 - h_val * h_val);
            grads.b1[k] += d_pre;
            for (a, fv) in f.iter().enumerate() {
                grads.w1[(a, k)] += fv * d_pre;
                d_f[a] += params.w1[(a, k)] * d_pre;
            }
        }
        for a in 0..d_emb {
            d_r[(i as usize, a)] += d_f[a];
            d_r[(j as usize, a)] += d_f[d_emb + a];
        }
    }
    label /= m as f64;

    // fusion backward
    let d_pre = &d_r * &r.mapv(|v| v * (1.0 - v));
    grads.w_out = cat.t().dot(&d_pre);
    grads.b_out = d_pre.sum_axis(Axis(0));
    let d_cat = d_pre.dot(&params.w_out.t());
    let mut d_z1 = d_cat.slice(ndarray::s![.., ..d_hid]).to_owned();
    let mut d_z2 = d_cat.slice(ndarray::s![.., d_hid..]).to_owned();

    // contrastive backward (alpha-scaled)
    let alpha = batch.alpha;
    let lambda = batch.lambda_intra;
    if alpha != 0.0 {
        // inter: dL/dS_uv = (alpha/n)(p_uv - delta_uv)
        let mut d_s = p.clone();
        for u in 0..n {
            d_s[(u, u)] -= 1.0;
        }
        d_s.mapv_inplace(|v| v * alpha / n as f64);
        let d_n1_inter = d_s.dot(&n2) / tau;
        let d_n2_inter = d_s.t().dot(&n1) / tau;

        // intra per view: dL/dS_uv = (alpha*lambda/(2n)) q_uv, S symmetric in rows
        let scale = alpha * lambda / (2.0 * n as f64);
        let d_n1_intra = (q1.mapv(|v| v * scale) + q1.t().mapv(|v| v * scale)).dot(&n1) / tau;
        let d_n2_intra = (q2.mapv(|v| v * scale) + q2.t().mapv(|v| v * scale)).dot(&n2) / tau;

        let d_n1 = d_n1_inter + d_n1_intra;
        let d_n2 = d_n2_inter + d_n2_intra;

        // through row normalization: dz = (dn - (dn . nhat) nhat) / norm
        for (dz, (dn, (nk, norms))) in [
            (&mut d_z1, (&d_n1, (&n1, &norms1))),
            (&mut d_z2, (&d_n2, (&n2, &norms2))),
        ] {
            for (u, norm) in norms.iter().enumerate() {
                let dn_row = dn.row(u);
                let n_row = nk.row(u);
                let dot: f64 = dn_row.iter().zip(n_row.iter()).map(|(a, b)| a * b).sum();
                for k in 0..d_hid {
                    (*dz)[(u, k)] += (dn_row[k] - dot * n_row[k]) / norm;
                }
            }
        }
    }

    // encoder backward, both views through the shared parameters
    for (z, dz, agg) in [(&z1, &d_z1, &agg_n), (&z2, &d_z2, &agg_p)] {
        let d_u = dz * &z.mapv(|v| 1.0 - v * v);
        grads.w_pos = grads.w_pos + agg.xp.t().dot(&d_u);
        grads.w_neg = grads.w_neg + agg.xq.t().dot(&d_u);
        grads.w_self = grads.w_self + x.t().dot(&d_u);
    }

    let total = total_loss(alpha, inter + lambda * intra, label);
    let breakdown = LossBreakdown {
        total,
        label,
        inter,
        intra,
    };
    if !total.is_finite() || !grads.is_finite() {
        return Err(Error::NonFinite("backward"));
    }
    Ok((breakdown, grads))
}

/// Losses recorded for one training epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub total: f64,
    pub label: f64,
    pub contrastive: f64,
    pub balance: f64,
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub augmenter: Option<AugmenterState>,
    pub history: Vec<EpochStats>,
    /// The positive view in effect after the final epoch.
    pub positive_view: SignedMatrix,
    pub hyper: HyperParams,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
}

/// Joint training: each epoch refreshes the positive view from the current
/// flip probabilities, encodes both views with the shared parameters,
/// updates the encoder/scorer from the combined loss, and updates the
/// probabilities from the balance loss. With a zero sampling budget the
/// augmenter is never built and training reduces to supervised link sign
/// prediction on the input graph.
pub fn train(
    poisoned: &SignedMatrix,
    features: &FeatureMatrix,
    hyper: &HyperParams,
) -> Result<TrainOutput> {
    hyper.validate()?;
    let edges: Vec<(u32, u32)> = poisoned.entries().map(|(i, j, _)| (i, j)).collect();
    let labels: Vec<f64> = poisoned
        .entries()
        .map(|(_, _, v)| if v > 0.0 { 1.0 } else { 0.0 })
        .collect();

    let mut params = ModelParams::init(hyper, crate::rng::named_seed(hyper.seed, crate::rng::STREAM_INIT));
    let aug_seed = crate::rng::named_seed(hyper.seed, crate::rng::STREAM_AUGMENTER);

    // augmenter setup; a zero budget disables augmentation entirely
    let mut augmenter = match hyper.nd_percent {
        Some(nd) => {
            if nd == 0.0 {
                None
            } else {
                Some(AugmenterState::init(poisoned, nd))
            }
        }
        None => {
            // warm up the probabilities, then pick the smallest budget that
            // yields a balanced enough view
            let mut st = optimize_delta(poisoned, ND_WARMUP_STEPS, DEFAULT_STEP_SIZE, aug_seed)?;
            st.nd_percent = select_nd_percent(poisoned, &st);
            Some(st)
        }
    };

    let mut adam = match hyper.optimizer {
        Optimizer::Adam => {
            let len = params.flat().len();
            Some(AdamState {
                m: vec![0.0; len],
                v: vec![0.0; len],
                t: 0,
            })
        }
        Optimizer::Sgd => None,
    };

    let mut history = Vec::with_capacity(hyper.epochs);
    let mut positive_view = poisoned.clone();

    for epoch in 0..hyper.epochs {
        positive_view = match &augmenter {
            Some(st) => sample_positive_view(poisoned, st, aug_seed)?,
            None => poisoned.clone(),
        };
        let batch = Batch {
            features,
            negative_view: poisoned,
            positive_view: &positive_view,
            edges: &edges,
            labels: &labels,
            alpha: hyper.alpha,
            tau: hyper.tau,
            lambda_intra: hyper.lambda_intra,
        };
        let (losses, grads) = backward(&params, &batch)?;
        apply_update(&mut params, &grads, hyper, &mut adam);
        if !params.is_finite() {
            return Err(Error::NonFiniteLoss { step: epoch });
        }

        // concurrent augmenter update from the balance loss
        let balance = match &mut augmenter {
            Some(st) => {
                let grad = crate::augment::balance_loss_gradient(poisoned, st)?;
                let g: Vec<f64> = grad.entries().map(|(_, _, v)| v).collect();
                let mut k = 0;
                st.delta = st.delta.map_values(|_, _, v| {
                    let nv = (v - DEFAULT_STEP_SIZE * g[k]).clamp(0.0, 1.0);
                    k += 1;
                    nv
                });
                let loss = crate::augment::balance_loss(poisoned, st)?;
                st.loss_trace.push(loss);
                loss
            }
            None => -balance_degree(poisoned).d3,
        };

        history.push(EpochStats {
            epoch,
            total: losses.total,
            label: losses.label,
            contrastive: losses.contrastive(hyper.lambda_intra),
            balance,
        });
    }

    Ok(TrainOutput {
        params,
        augmenter,
        history,
        positive_view,
        hyper: hyper.clone(),
    })
}

fn apply_update(
    params: &mut ModelParams,
    grads: &ModelGrads,
    hyper: &HyperParams,
    adam: &mut Option<AdamState>,
) {
    let mut flat = params.flat();
    let gflat = grads.flat();
    match adam {
        None => {
            for (p, g) in flat.iter_mut().zip(&gflat) {
                *p -= hyper.learning_rate * g;
            }
        }
        Some(state) => {
            let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
            state.t += 1;
            let bias1 = 1.0 - b1.powi(state.t as i32);
            let bias2 = 1.0 - b2.powi(state.t as i32);
            for (k, (p, g)) in flat.iter_mut().zip(&gflat).enumerate() {
                state.m[k] = b1 * state.m[k] + (1.0 - b1) * g;
                state.v[k] = b2 * state.v[k] + (1.0 - b2) * g * g;
                let mhat = state.m[k] / bias1;
                let vhat = state.v[k] / bias2;
                *p -= hyper.learning_rate * mhat / (vhat.sqrt() + eps);
            }
        }
    }
    params.assign_flat(&flat);
}

/// Score arbitrary node pairs with a trained model.
pub fn score_edges(
    params: &ModelParams,
    negative_view: &SignedMatrix,
    positive_view: &SignedMatrix,
    features: &FeatureMatrix,
    pairs: &[(u32, u32)],
) -> Result<Vec<f64>> {
    let z1 = encode(params, negative_view, features)?;
    let z2 = encode(params, positive_view, features)?;
    let r = fuse_embeddings(&z1, &z2, params)?;
    Ok(pairs
        .iter()
        .map(|&e| predict_sign_score(&r, e, params))
        .collect())
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"SGNCKPT1";

#[derive(Serialize, Deserialize)]
struct CheckpointManifest {
    hyper: HyperParams,
    epoch: usize,
    arrays: Vec<(String, Vec<usize>)>,
}

/// Write a checkpoint: a JSON manifest followed by length-prefixed flat
/// little-endian f64 arrays in declaration order.
pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    hyper: &HyperParams,
    epoch: usize,
) -> Result<()> {
    let arrays: Vec<(String, Vec<usize>, Vec<f64>)> = checkpoint_arrays(params);
    let manifest = CheckpointManifest {
        hyper: hyper.clone(),
        epoch,
        arrays: arrays
            .iter()
            .map(|(n, s, _)| (n.clone(), s.clone()))
            .collect(),
    };
    let manifest_bytes = serde_json::to_vec(&manifest)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(manifest_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&manifest_bytes)?;
    for (_, _, data) in &arrays {
        w.write_all(&(data.len() as u64).to_le_bytes())?;
        for v in data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn checkpoint_arrays(params: &ModelParams) -> Vec<(String, Vec<usize>, Vec<f64>)> {
    vec![
        (
            "w_pos".into(),
            params.w_pos.shape().to_vec(),
            params.w_pos.iter().cloned().collect(),
        ),
        (
            "w_neg".into(),
            params.w_neg.shape().to_vec(),
            params.w_neg.iter().cloned().collect(),
        ),
        (
            "w_self".into(),
            params.w_self.shape().to_vec(),
            params.w_self.iter().cloned().collect(),
        ),
        (
            "w_out".into(),
            params.w_out.shape().to_vec(),
            params.w_out.iter().cloned().collect(),
        ),
        (
            "b_out".into(),
            vec![params.b_out.len()],
            params.b_out.to_vec(),
        ),
        (
            "w1".into(),
            params.w1.shape().to_vec(),
            params.w1.iter().cloned().collect(),
        ),
        ("b1".into(), vec![params.b1.len()], params.b1.to_vec()),
        ("w2".into(), vec![params.w2.len()], params.w2.to_vec()),
        ("b2".into(), vec![1], vec![params.b2]),
    ]
}

/// Read a checkpoint back, validating shapes against the manifest.
pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, HyperParams, usize)> {
    let mut rdr = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    rdr.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::BadCheckpoint("magic mismatch".into()));
    }
    let mut len4 = [0u8; 4];
    rdr.read_exact(&mut len4)?;
    let mlen = u32::from_le_bytes(len4) as usize;
    let mut manifest_bytes = vec![0u8; mlen];
    rdr.read_exact(&mut manifest_bytes)?;
    let manifest: CheckpointManifest = serde_json::from_slice(&manifest_bytes)?;

    let mut arrays: Vec<Vec<f64>> = Vec::with_capacity(manifest.arrays.len());
    for (name, shape) in &manifest.arrays {
        let mut len8 = [0u8; 8];
        rdr.read_exact(&mut len8)?;
        let count = u64::from_le_bytes(len8) as usize;
        let expected: usize = shape.iter().product();
        if count != expected {
            return Err(Error::BadCheckpoint(format!(
                "array {name}: {count} values for shape {shape:?}"
            )));
        }
        let mut data = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            rdr.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        arrays.push(data);
    }

    let names = ModelParams::array_names();
    if manifest.arrays.len() != names.len()
        || manifest
            .arrays
            .iter()
            .zip(names.iter())
            .any(|((n, _), want)| n != want)
    {
        return Err(Error::BadCheckpoint("unexpected array list".into()));
    }
    let shape2 = |k: usize| -> Result<(usize, usize)> {
        let s = &manifest.arrays[k].1;
        if s.len() != 2 {
            return Err(Error::BadCheckpoint(format!(
                "array {} is not 2-d",
                manifest.arrays[k].0
            )));
        }
        Ok((s[0], s[1]))
    };
    let to2 = |k: usize, shape: (usize, usize)| -> Result<Array2<f64>> {
        Array2::from_shape_vec(shape, arrays[k].clone())
            .map_err(|e| Error::BadCheckpoint(e.to_string()))
    };
    let params = ModelParams {
        w_pos: to2(0, shape2(0)?)?,
        w_neg: to2(1, shape2(1)?)?,
        w_self: to2(2, shape2(2)?)?,
        w_out: to2(3, shape2(3)?)?,
        b_out: Array1::from_vec(arrays[4].clone()),
        w1: to2(5, shape2(5)?)?,
        b1: Array1::from_vec(arrays[6].clone()),
        w2: Array1::from_vec(arrays[7].clone()),
        b2: arrays[8][0],
    };
    let h = &manifest.hyper;
    if params.w_pos.shape() != [h.d_in, h.d_hid]
        || params.w_out.shape() != [2 * h.d_hid, h.d_emb]
        || params.w1.shape() != [2 * h.d_emb, h.mlp_hidden]
    {
        return Err(Error::BadCheckpoint(
            "parameter shapes disagree with hyperparameters".into(),
        ));
    }
    Ok((params, manifest.hyper, manifest.epoch))
}
