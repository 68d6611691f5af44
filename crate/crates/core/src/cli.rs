//! Experiment assembly behind the `signet` binary: config resolution,
//! subcommand bodies, and the sweep runner.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::{balance_attack, random_attack, AttackBudget};
use crate::balance::{balance_degree, BalanceReport};
use crate::defense::{balance_learning_restore, DEFAULT_TARGET_D3};
use crate::error::{Error, Result};
use crate::graph::{EdgeListFormat, SignedDiGraph};
use crate::metrics::{
    csv_header, csv_row, evaluate_attack, AttackKind, DefenseKind, EvalConfig, SeedReport,
};
use crate::model::{save_checkpoint, HyperParams, Optimizer};
use crate::rng;
use crate::synth::{two_faction_graph, FactionConfig};

/// Worker pool size for sweeps; `SIGNET_THREADS` overrides.
pub fn sweep_threads() -> usize {
    std::env::var("SIGNET_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(4)
}

/// Fully resolved experiment settings. Flags win over config-file keys,
/// which win over the defaults here.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    pub input: Option<PathBuf>,
    pub input_format: EdgeListFormat,
    pub synth: Option<String>,
    pub attack: AttackKind,
    pub ptb_rate: f64,
    pub defense: DefenseKind,
    pub alpha: f64,
    pub tau: f64,
    pub lambda_intra: f64,
    /// `None` auto-selects the augmentation budget.
    pub nd_percent: Option<f64>,
    pub epochs: usize,
    pub lr: f64,
    pub dim: usize,
    pub mlp_hidden: usize,
    pub optimizer: Optimizer,
    pub train_ratio: f64,
    pub seeds: Vec<u64>,
    pub deterministic: bool,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub save_model: Option<PathBuf>,
    pub target_d3: f64,
    pub max_flips: Option<usize>,
    // sweep axes; ignored by the scalar commands
    pub attacks: Option<Vec<AttackKind>>,
    pub ptb_rates: Option<Vec<f64>>,
    pub defenses: Option<Vec<DefenseKind>>,
    pub alphas: Option<Vec<f64>>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            input: None,
            input_format: EdgeListFormat::Signed,
            synth: None,
            attack: AttackKind::Balance,
            ptb_rate: 0.1,
            defense: DefenseKind::BaSgcl,
            alpha: 1.0,
            tau: 0.5,
            lambda_intra: 1.0,
            nd_percent: None,
            epochs: 100,
            lr: 0.001,
            dim: 64,
            mlp_hidden: 32,
            optimizer: Optimizer::Sgd,
            train_ratio: 0.8,
            seeds: vec![0],
            deterministic: true,
            out: None,
            format: OutputFormat::Json,
            save_model: None,
            target_d3: DEFAULT_TARGET_D3,
            max_flips: None,
            attacks: None,
            ptb_rates: None,
            defenses: None,
            alphas: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl Settings {
    /// Load a JSON config file; unknown keys are rejected.
    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path)?;
        let s: Settings = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Ok(s)
    }

    pub fn hyper(&self) -> HyperParams {
        HyperParams {
            alpha: self.alpha,
            tau: self.tau,
            lambda_intra: self.lambda_intra,
            k_views: 2,
            nd_percent: self.nd_percent,
            learning_rate: self.lr,
            epochs: self.epochs,
            d_in: self.dim,
            d_hid: self.dim,
            d_emb: self.dim,
            mlp_hidden: self.mlp_hidden,
            optimizer: self.optimizer,
            seed: self.seeds.first().copied().unwrap_or(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.is_some() && self.synth.is_some() {
            return Err(Error::InvalidConfig(
                "give either --input or --synth, not both".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.ptb_rate) {
            return Err(Error::InvalidConfig(format!(
                "ptb_rate {} outside [0,1]",
                self.ptb_rate
            )));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_ratio {} outside (0,1)",
                self.train_ratio
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("need at least one seed".into()));
        }
        self.hyper().validate()
    }

    /// Load the input graph and a short dataset label.
    pub fn load_graph(&self) -> Result<(SignedDiGraph, String)> {
        match (&self.input, &self.synth) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path)?;
                let g = SignedDiGraph::parse_edge_list(&text, self.input_format)?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into());
                Ok((g, name))
            }
            (None, Some(spec)) => {
                let root = self.seeds.first().copied().unwrap_or(0);
                let cfg = parse_synth_spec(spec, rng::named_seed(root, rng::STREAM_SYNTH))?;
                Ok((two_faction_graph(&cfg)?, "synthetic".into()))
            }
            (None, None) => Err(Error::InvalidConfig(
                "no input: give --input FILE or --synth SPEC".into(),
            )),
            (Some(_), Some(_)) => unreachable!("validated above"),
        }
    }
}

/// Parse `n=150,p_in=0.1,p_out=0.1,rho=0.05[,seed=7]`.
pub fn parse_synth_spec(spec: &str, default_seed: u64) -> Result<FactionConfig> {
    let mut cfg = FactionConfig {
        seed: default_seed,
        ..FactionConfig::default()
    };
    for part in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("synth field {part:?} is not key=value")))?;
        let key = key.trim();
        let value = value.trim();
        let parse_f = || -> Result<f64> {
            value
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("synth {key}={value:?} not a number")))
        };
        match key {
            "n" => {
                cfg.n = value.parse().map_err(|_| {
                    Error::InvalidConfig(format!("synth n={value:?} not an integer"))
                })?
            }
            "p_in" => cfg.p_in = parse_f()?,
            "p_out" => cfg.p_out = parse_f()?,
            "rho" | "sign_noise" => cfg.sign_noise = parse_f()?,
            "seed" => {
                cfg.seed = value.parse().map_err(|_| {
                    Error::InvalidConfig(format!("synth seed={value:?} not an integer"))
                })?
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown synth field {other:?}"
                )))
            }
        }
    }
    Ok(cfg)
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, content)?;
            Ok(())
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            if !content.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct AnalyzeOutput {
    dataset: String,
    nodes: usize,
    edges: usize,
    positive_edges: usize,
    negative_edges: usize,
    balance: BalanceReport,
}

/// `signet analyze`: balance report for a graph.
pub fn cmd_analyze(settings: &Settings) -> Result<()> {
    settings.validate()?;
    let (graph, dataset) = settings.load_graph()?;
    let report = balance_degree(&graph.to_adjacency());
    let payload = AnalyzeOutput {
        dataset,
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        positive_edges: graph.positive_edge_count(),
        negative_edges: graph.negative_edge_count(),
        balance: report,
    };
    write_output(&settings.out, &serde_json::to_string_pretty(&payload)?)
}

#[derive(Serialize)]
struct AttackOutput {
    dataset: String,
    attack: AttackKind,
    ptb_rate: f64,
    budget: usize,
    flips_executed: usize,
    d3_before: f64,
    d3_after: f64,
    poisoned_edges: Option<String>,
    plan: serde_json::Value,
}

/// `signet attack`: poison a graph and emit the plan plus the edge list.
pub fn cmd_attack(settings: &Settings) -> Result<()> {
    settings.validate()?;
    let (graph, dataset) = settings.load_graph()?;
    let m = graph.to_adjacency();
    let budget = AttackBudget::Rate(settings.ptb_rate);
    let seed = settings.seeds.first().copied().unwrap_or(0);
    let plan = match settings.attack {
        AttackKind::Balance => balance_attack(&m, budget)?,
        AttackKind::Random => random_attack(&m, budget, rng::named_seed(seed, rng::STREAM_ATTACK))?,
        AttackKind::None => {
            return Err(Error::InvalidConfig(
                "attack command needs --attack balance or random".into(),
            ))
        }
    };
    let poisoned = graph.with_signs_from(&plan.final_matrix)?;
    let edge_text = poisoned.to_canonical();

    let (poisoned_inline, plan_path) = match &settings.out {
        Some(path) => {
            std::fs::write(path, &edge_text)?;
            let plan_path = path.with_extension("plan.json");
            (None, Some(plan_path))
        }
        None => (Some(edge_text.clone()), None),
    };
    let payload = AttackOutput {
        dataset,
        attack: settings.attack,
        ptb_rate: settings.ptb_rate,
        budget: budget.resolve(m.nnz())?,
        flips_executed: plan.flips_executed(),
        d3_before: plan.initial_d3(),
        d3_after: plan.final_d3(),
        poisoned_edges: poisoned_inline,
        plan: serde_json::to_value(&plan)?,
    };
    let json = serde_json::to_string_pretty(&payload)?;
    if let Some(plan_path) = plan_path {
        std::fs::write(&plan_path, &json)?;
        println!("{}", json);
        Ok(())
    } else {
        write_output(&None, &json)
    }
}

#[derive(Serialize)]
struct DefendOutput {
    dataset: String,
    d3_before: f64,
    d3_after: f64,
    flips_used: usize,
    target_d3: f64,
    restored_edges: Option<String>,
}

/// `signet defend`: balance-learning restoration of a (poisoned) graph.
pub fn cmd_defend(settings: &Settings) -> Result<()> {
    settings.validate()?;
    let (graph, dataset) = settings.load_graph()?;
    let m = graph.to_adjacency();
    let max_flips = settings.max_flips.unwrap_or(m.nnz());
    let report = balance_learning_restore(&m, settings.target_d3, max_flips);
    let restored = graph.with_signs_from(&report.restored_matrix)?;
    let edge_text = restored.to_canonical();
    let inline = match &settings.out {
        Some(path) => {
            std::fs::write(path, &edge_text)?;
            None
        }
        None => Some(edge_text),
    };
    let payload = DefendOutput {
        dataset,
        d3_before: report.d3_before,
        d3_after: report.d3_after,
        flips_used: report.flips_used,
        target_d3: settings.target_d3,
        restored_edges: inline,
    };
    println!("{}", serde_json::to_string_pretty(&payload)?);
    Ok(())
}

#[derive(Serialize)]
struct TrainEvalOutput {
    dataset: String,
    attack: AttackKind,
    ptb_rate: f64,
    defense: DefenseKind,
    train_ratio: f64,
    seeds: Vec<u64>,
    per_seed: Vec<SeedReport>,
    mean_auc: f64,
    mean_macro_f1: f64,
    mean_micro_f1: f64,
    mean_binary_f1: f64,
}

fn eval_config(settings: &Settings, dataset: String) -> EvalConfig {
    EvalConfig {
        dataset,
        attack: settings.attack,
        ptb_rate: settings.ptb_rate,
        defense: settings.defense,
        hyper: settings.hyper(),
        train_ratio: settings.train_ratio,
        seeds: settings.seeds.clone(),
    }
}

fn render_train_eval(cfg: &EvalConfig, reports: Vec<SeedReport>, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => Ok(format!("{}\n{}\n", csv_header(), csv_row(cfg, &reports))),
        OutputFormat::Json => {
            let n = reports.len().max(1) as f64;
            let mean = |f: fn(&SeedReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
            let payload = TrainEvalOutput {
                dataset: cfg.dataset.clone(),
                attack: cfg.attack,
                ptb_rate: cfg.ptb_rate,
                defense: cfg.defense,
                train_ratio: cfg.train_ratio,
                seeds: cfg.seeds.clone(),
                mean_auc: mean(|r| r.eval.auc),
                mean_macro_f1: mean(|r| r.eval.macro_f1),
                mean_micro_f1: mean(|r| r.eval.micro_f1),
                mean_binary_f1: mean(|r| r.eval.binary_f1),
                per_seed: reports,
            };
            Ok(serde_json::to_string_pretty(&payload)?)
        }
    }
}

/// `signet train-eval`: the full poison-train-evaluate pipeline.
pub fn cmd_train_eval(settings: &Settings) -> Result<()> {
    settings.validate()?;
    let (graph, dataset) = settings.load_graph()?;
    let cfg = eval_config(settings, dataset);
    let reports = evaluate_attack(&graph, &cfg)?;

    if let Some(model_path) = &settings.save_model {
        // persist the model trained under the last seed
        let seed = *cfg.seeds.last().expect("validated nonempty");
        let (_, trained) = crate::metrics::run_seed_detailed(&graph, &cfg, seed)?;
        save_checkpoint(model_path, &trained.params, &trained.hyper, trained.history.len())?;
    }

    let rendered = render_train_eval(&cfg, reports, settings.format)?;
    write_output(&settings.out, &rendered)
}

/// One sweep cell, resolved.
#[derive(Clone, Debug, Serialize)]
struct SweepCell {
    index: usize,
    attack: AttackKind,
    ptb_rate: f64,
    defense: DefenseKind,
    alpha: f64,
}

fn cell_hash(cfg: &EvalConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    hex_string(&digest[..16])
}

fn hex_string(bytes: &[u8]) -> String {
    use std::fmt::Write as _;
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// `signet sweep`: cartesian product over the configured axes, worker pool
/// sized by `SIGNET_THREADS`, resumable through a sidecar state file that
/// maps finished cell hashes to their CSV rows. The CSV is rewritten in cell
/// order on every run, so byte-identical output survives resumption.
pub fn cmd_sweep(settings: &Settings) -> Result<()> {
    settings.validate()?;
    let out = settings
        .out
        .clone()
        .ok_or_else(|| Error::InvalidConfig("sweep needs --out FILE".into()))?;
    let (graph, dataset) = settings.load_graph()?;

    let attacks = settings
        .attacks
        .clone()
        .unwrap_or_else(|| vec![settings.attack]);
    let rates = settings
        .ptb_rates
        .clone()
        .unwrap_or_else(|| vec![settings.ptb_rate]);
    let defenses = settings
        .defenses
        .clone()
        .unwrap_or_else(|| vec![settings.defense]);
    let alphas = settings.alphas.clone().unwrap_or_else(|| vec![settings.alpha]);

    let mut cells = Vec::new();
    for &attack in &attacks {
        for &ptb_rate in &rates {
            for &defense in &defenses {
                for &alpha in &alphas {
                    cells.push(SweepCell {
                        index: cells.len(),
                        attack,
                        ptb_rate,
                        defense,
                        alpha,
                    });
                }
            }
        }
    }

    let configs: Vec<EvalConfig> = cells
        .iter()
        .map(|cell| {
            let mut s = settings.clone();
            s.attack = cell.attack;
            s.ptb_rate = cell.ptb_rate;
            s.defense = cell.defense;
            s.alpha = cell.alpha;
            eval_config(&s, dataset.clone())
        })
        .collect();
    let hashes: Vec<String> = configs.iter().map(cell_hash).collect();

    // resume: load previously completed rows keyed by cell hash
    let state_path = out.with_extension("cells.json");
    let mut done: BTreeMap<String, String> = if state_path.exists() {
        serde_json::from_str(&std::fs::read_to_string(&state_path)?)?
    } else {
        BTreeMap::new()
    };

    let pending: Vec<usize> = (0..cells.len())
        .filter(|&k| !done.contains_key(&hashes[k]))
        .collect();
    log::info!(
        "sweep: {} cells total, {} already done, {} to run",
        cells.len(),
        cells.len() - pending.len(),
        pending.len()
    );

    let results: Mutex<Vec<(usize, String)>> = Mutex::new(Vec::new());
    let queue: Mutex<std::collections::VecDeque<usize>> =
        Mutex::new(pending.iter().copied().collect());
    let threads = sweep_threads().min(pending.len().max(1));
    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for _ in 0..threads {
            handles.push(scope.spawn(|| -> Result<()> {
                loop {
                    let k = {
                        let mut q = queue.lock().expect("queue lock");
                        match q.pop_front() {
                            Some(k) => k,
                            None => return Ok(()),
                        }
                    };
                    let reports = evaluate_attack(&graph, &configs[k])?;
                    let row = csv_row(&configs[k], &reports);
                    results.lock().expect("results lock").push((k, row));
                }
            }));
        }
        for h in handles {
            h.join().expect("sweep worker panicked")?;
        }
        Ok(())
    })?;

    for (k, row) in results.into_inner().expect("results lock") {
        done.insert(hashes[k].clone(), row);
    }
    std::fs::write(&state_path, serde_json::to_string_pretty(&done)?)?;

    // deterministic output: rows in cell order
    let mut csv = String::from(csv_header());
    csv.push('\n');
    for (k, _) in cells.iter().enumerate() {
        if let Some(row) = done.get(&hashes[k]) {
            csv.push_str(row);
            csv.push('\n');
        }
    }
    std::fs::write(&out, csv)?;
    Ok(())
}
