//! Evaluation metrics and the poison-train-evaluate pipeline.

use serde::{Deserialize, Serialize};

use crate::attack::{balance_attack, random_attack, AttackBudget};
use crate::balance::balance_degree;
use crate::defense::balance_learning_restore;
use crate::error::{Error, Result};
use crate::graph::{overlap_ratio, random_features, split_edges, SignedDiGraph};
use crate::model::{score_edges, train, HyperParams};
use crate::rng;

/// Area under the ROC curve via the exact rank statistic: the probability
/// that a random positive outranks a random negative, ties counting 1/2.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    // average ranks over tie groups, 1-based
    let mut rank_sum_pos = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        let avg_rank = (k + 1 + end) as f64 / 2.0;
        for &idx in &order[k..end] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        k = end;
    }
    Ok((rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64))
}

/// Binary confusion counts; class 1 is positive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(predictions: &[u8], labels: &[u8]) -> Result<Confusion> {
        if predictions.len() != labels.len() {
            return Err(Error::LengthMismatch(predictions.len(), labels.len()));
        }
        let mut c = Confusion::default();
        for (&p, &y) in predictions.iter().zip(labels) {
            match (p, y) {
                (1, 1) => c.tp += 1,
                (1, 0) => c.fp += 1,
                (0, 0) => c.tn += 1,
                (0, 1) => c.fn_ += 1,
                _ => {
                    return Err(Error::InvalidConfig(
                        "predictions and labels must be 0/1".into(),
                    ))
                }
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize, present: bool, class: &str) -> f64 {
    if !present && tp + fp == 0 {
        log::warn!("class {class} absent from labels and predictions; its F1 counts as 0");
        return 0.0;
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// F1 family for binary predictions: positive-class F1, micro-F1 (equal to
/// accuracy in the binary setting), and macro-F1 (unweighted per-class mean).
pub fn f1_suite(predictions: &[u8], labels: &[u8]) -> Result<(f64, f64, f64, Confusion)> {
    let c = Confusion::from_predictions(predictions, labels)?;
    let pos_present = c.tp + c.fn_ > 0;
    let neg_present = c.tn + c.fp > 0;
    let binary = f1_from_counts(c.tp, c.fp, c.fn_, pos_present, "positive");
    // negative class viewed as the detection target
    let f1_neg = f1_from_counts(c.tn, c.fn_, c.fp, neg_present, "negative");
    let micro = c.accuracy();
    let macro_ = (binary + f1_neg) / 2.0;
    Ok((binary, micro, macro_, c))
}

/// Full evaluation of one scored test set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub binary_f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub n_test: usize,
    pub misclassified_positive_fraction: f64,
}

/// Score-based report: predictions take `score >= 0` as positive.
pub fn eval_scores(scores: &[f64], labels: &[u8]) -> Result<EvalReport> {
    let predictions: Vec<u8> = scores.iter().map(|&s| u8::from(s >= 0.0)).collect();
    let (binary_f1, micro_f1, macro_f1, c) = f1_suite(&predictions, labels)?;
    let auc = auc(scores, labels)?;
    let miscl = predictions
        .iter()
        .zip(labels)
        .filter(|(p, y)| **p != **y)
        .count();
    let miscl_pos = predictions
        .iter()
        .zip(labels)
        .filter(|(p, y)| **p != **y && **y == 1)
        .count();
    Ok(EvalReport {
        auc,
        macro_f1,
        micro_f1,
        binary_f1,
        tp: c.tp,
        fp: c.fp,
        tn: c.tn,
        fn_: c.fn_,
        n_test: labels.len(),
        misclassified_positive_fraction: if miscl == 0 {
            0.0
        } else {
            miscl_pos as f64 / miscl as f64
        },
    })
}

/// Poisoning attack applied to the training graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    None,
    Balance,
    Random,
}

/// What the defender trains on the poisoned graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefenseKind {
    /// Supervised encoder only.
    None,
    /// Restore balance greedily, then train the supervised encoder.
    BalanceLearning,
    /// Contrastive training against the balance-augmented view.
    BaSgcl,
}

impl DefenseKind {
    pub fn label(&self) -> &'static str {
        match self {
            DefenseKind::None => "none",
            DefenseKind::BalanceLearning => "balance-learning",
            DefenseKind::BaSgcl => "ba-sgcl",
        }
    }
}

/// One experiment cell: attack, defense, and training settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalConfig {
    pub dataset: String,
    pub attack: AttackKind,
    pub ptb_rate: f64,
    pub defense: DefenseKind,
    pub hyper: HyperParams,
    pub train_ratio: f64,
    pub seeds: Vec<u64>,
}

/// Per-seed pipeline outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub eval: EvalReport,
    pub d3_clean_train: f64,
    pub d3_poisoned: f64,
    pub d3_model_input: f64,
    pub d3_positive_view: f64,
    pub overlap_poisoned_clean: f64,
    pub overlap_model_input_clean: f64,
    pub nd_percent_used: f64,
    pub final_label_loss: f64,
}

/// For each seed: split the clean graph, poison the training part, train the
/// configured arm on the poisoned training graph, and score the held-out
/// edges against their clean signs.
pub fn evaluate_attack(clean: &SignedDiGraph, cfg: &EvalConfig) -> Result<Vec<SeedReport>> {
    cfg.hyper.validate()?;
    if cfg.seeds.is_empty() {
        return Err(Error::InvalidConfig("no seeds given".into()));
    }
    let mut out = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        out.push(run_seed(clean, cfg, seed)?);
    }
    Ok(out)
}

fn run_seed(clean: &SignedDiGraph, cfg: &EvalConfig, seed: u64) -> Result<SeedReport> {
    run_seed_detailed(clean, cfg, seed).map(|(report, _)| report)
}

/// Like [`evaluate_attack`] for a single seed, but also returns the trained
/// model (for checkpointing).
pub fn run_seed_detailed(
    clean: &SignedDiGraph,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<(SeedReport, crate::model::TrainOutput)> {
    let split = split_edges(clean, cfg.train_ratio, rng::named_seed(seed, rng::STREAM_SPLIT))?;
    let clean_train = split.train_graph.to_adjacency();
    let d3_clean_train = balance_degree(&clean_train).d3;

    let poisoned = match cfg.attack {
        AttackKind::None => clean_train.clone(),
        AttackKind::Balance => {
            balance_attack(&clean_train, AttackBudget::Rate(cfg.ptb_rate))?.final_matrix
        }
        AttackKind::Random => {
            random_attack(
                &clean_train,
                AttackBudget::Rate(cfg.ptb_rate),
                rng::named_seed(seed, rng::STREAM_ATTACK),
            )?
            .final_matrix
        }
    };
    let d3_poisoned = balance_degree(&poisoned).d3;

    let model_input = match cfg.defense {
        DefenseKind::BalanceLearning => {
            balance_learning_restore(
                &poisoned,
                crate::defense::DEFAULT_TARGET_D3,
                poisoned.nnz(),
            )
            .restored_matrix
        }
        _ => poisoned.clone(),
    };
    let d3_model_input = balance_degree(&model_input).d3;

    let mut hyper = cfg.hyper.clone();
    hyper.seed = seed;
    if cfg.defense != DefenseKind::BaSgcl {
        // supervised arm: no contrastive term, no augmentation
        hyper.alpha = 0.0;
        hyper.nd_percent = Some(0.0);
    }

    let features = random_features(
        clean.node_count(),
        hyper.d_in,
        rng::named_seed(seed, rng::STREAM_FEATURES),
    );
    let trained = train(&model_input, &features, &hyper)?;

    let pairs: Vec<(u32, u32)> = split.test_edges.iter().map(|e| (e.src, e.dst)).collect();
    let labels: Vec<u8> = split
        .test_edges
        .iter()
        .map(|e| u8::from(e.sign > 0))
        .collect();
    let scores = score_edges(
        &trained.params,
        &model_input,
        &trained.positive_view,
        &features,
        &pairs,
    )?;
    let eval = eval_scores(&scores, &labels)?;

    let report = SeedReport {
        seed,
        eval,
        d3_clean_train,
        d3_poisoned,
        d3_model_input,
        d3_positive_view: balance_degree(&trained.positive_view).d3,
        overlap_poisoned_clean: overlap_ratio(&poisoned, &clean_train)?,
        overlap_model_input_clean: overlap_ratio(&model_input, &clean_train)?,
        nd_percent_used: trained
            .augmenter
            .as_ref()
            .map(|a| a.nd_percent)
            .unwrap_or(0.0),
        final_label_loss: trained.history.last().map(|h| h.label).unwrap_or(f64::NAN),
    };
    Ok((report, trained))
}

/// CSV row matching the result-table layout.
pub fn csv_header() -> &'static str {
    "dataset,ptb_rate,model,auc,macro_f1,micro_f1,binary_f1"
}

/// Mean metrics over seeds as one CSV row.
pub fn csv_row(cfg: &EvalConfig, reports: &[SeedReport]) -> String {
    let n = reports.len().max(1) as f64;
    let mean = |f: fn(&SeedReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    format!(
        "{},{},{},{:.6},{:.6},{:.6},{:.6}",
        cfg.dataset,
        cfg.ptb_rate,
        cfg.defense.label(),
        mean(|r| r.eval.auc),
        mean(|r| r.eval.macro_f1),
        mean(|r| r.eval.micro_f1),
        mean(|r| r.eval.binary_f1),
    )
}
