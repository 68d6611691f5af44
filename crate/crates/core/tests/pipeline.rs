//! Slow end-to-end pipeline properties beyond the acceptance gate.

mod common;

use signet::metrics::{evaluate_attack, AttackKind, DefenseKind, EvalConfig, SeedReport};
use signet::model::{HyperParams, Optimizer};
use signet::synth::{two_faction_graph, FactionConfig};

fn mean_auc(reports: &[SeedReport]) -> f64 {
    reports.iter().map(|r| r.eval.auc).sum::<f64>() / reports.len() as f64
}

fn pipeline_hyper() -> HyperParams {
    HyperParams {
        alpha: 0.5,
        epochs: 300,
        learning_rate: 0.01,
        optimizer: Optimizer::Adam,
        d_in: 32,
        d_hid: 32,
        d_emb: 32,
        mlp_hidden: 16,
        nd_percent: None,
        ..HyperParams::default()
    }
}

/// Poisoning hurts every arm, and the contrastive arm holds up at least as
/// well as the supervised one on clean input.
#[test]
fn poisoning_degrades_auc_and_clean_training_is_unharmed() {
    let cfg_graph = FactionConfig {
        n: 200,
        p_in: 0.1,
        p_out: 0.1,
        sign_noise: 0.05,
        seed: 3,
    };
    let graph = two_faction_graph(&cfg_graph).unwrap();
    let seeds: Vec<u64> = (0..3).collect();
    let run = |defense: DefenseKind, attack: AttackKind, ptb: f64| -> f64 {
        let cfg = EvalConfig {
            dataset: "synthetic".into(),
            attack,
            ptb_rate: ptb,
            defense,
            hyper: pipeline_hyper(),
            train_ratio: 0.8,
            seeds: seeds.clone(),
        };
        mean_auc(&evaluate_attack(&graph, &cfg).unwrap())
    };

    let clean_none = run(DefenseKind::None, AttackKind::None, 0.0);
    let clean_contrastive = run(DefenseKind::BaSgcl, AttackKind::None, 0.0);
    let poisoned_none = run(DefenseKind::None, AttackKind::Balance, 0.2);
    let poisoned_contrastive = run(DefenseKind::BaSgcl, AttackKind::Balance, 0.2);

    // the attack bites: both arms lose AUC at 20% poisoning
    assert!(
        poisoned_none < clean_none,
        "supervised arm: {poisoned_none} !< {clean_none}"
    );
    assert!(
        poisoned_contrastive < clean_contrastive,
        "contrastive arm: {poisoned_contrastive} !< {clean_contrastive}"
    );
    // on clean graphs the contrastive arm keeps pace with the supervised one
    assert!(
        clean_contrastive >= clean_none - 0.01,
        "clean: contrastive {clean_contrastive} vs supervised {clean_none}"
    );
    // under attack it is the better arm
    assert!(
        poisoned_contrastive > poisoned_none,
        "poisoned: contrastive {poisoned_contrastive} vs supervised {poisoned_none}"
    );
}

/// The restoration defense trains end to end and reports its graph surgery.
#[test]
fn balance_learning_arm_reports_restoration() {
    let cfg_graph = FactionConfig {
        n: 120,
        p_in: 0.1,
        p_out: 0.1,
        sign_noise: 0.05,
        seed: 5,
    };
    let graph = two_faction_graph(&cfg_graph).unwrap();
    let cfg = EvalConfig {
        dataset: "synthetic".into(),
        attack: AttackKind::Balance,
        ptb_rate: 0.2,
        defense: DefenseKind::BalanceLearning,
        hyper: HyperParams {
            epochs: 30,
            d_in: 16,
            d_hid: 16,
            d_emb: 16,
            mlp_hidden: 8,
            learning_rate: 0.01,
            optimizer: Optimizer::Adam,
            ..HyperParams::default()
        },
        train_ratio: 0.8,
        seeds: vec![0],
    };
    let reports = evaluate_attack(&graph, &cfg).unwrap();
    let r = &reports[0];
    // restoration raised the balance degree of what the model trained on
    assert!(r.d3_model_input > r.d3_poisoned);
    assert!(r.d3_model_input >= 0.9);
    // supervised arm: no augmentation happened
    assert_eq!(r.nd_percent_used, 0.0);
    // report determinism
    let again = evaluate_attack(&graph, &cfg).unwrap();
    assert_eq!(reports, again);
}
