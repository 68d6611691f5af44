//! `signet` — analyze, attack, defend, train and sweep signed digraphs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use signet::cli::{self, OutputFormat, Settings};
use signet::graph::EdgeListFormat;
use signet::metrics::{AttackKind, DefenseKind};
use signet::model::Optimizer;

#[derive(Parser)]
#[command(
    name = "signet",
    about = "Structural balance analysis and robust link sign prediction for signed directed graphs",
    version
)]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Balance report (d3, triangle census, traces) for a graph
    Analyze(CommonArgs),
    /// Poison a graph by flipping edge signs under a budget
    Attack(CommonArgs),
    /// Restore balance greedily (balance learning)
    Defend(CommonArgs),
    /// Poison, train, and evaluate link sign prediction
    TrainEval(CommonArgs),
    /// Run a grid of train-eval cells into one CSV
    Sweep(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Edge-list file to load
    #[arg(long)]
    input: Option<PathBuf>,
    /// Parse mode for --input: signed (+1/-1 column) or rated (sign of value)
    #[arg(long, value_parser = parse_input_format)]
    input_format: Option<EdgeListFormat>,
    /// Synthetic graph spec, e.g. "n=150,p_in=0.1,p_out=0.1,rho=0.05"
    #[arg(long)]
    synth: Option<String>,
    /// JSON config file; explicit flags win over its keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Attack kind: balance, random, none
    #[arg(long, value_parser = parse_attack)]
    attack: Option<AttackKind>,
    /// Fraction of edges the attacker may flip
    #[arg(long)]
    ptb_rate: Option<f64>,
    /// Defense arm: none, balance-learning, ba-sgcl
    #[arg(long, value_parser = parse_defense)]
    defense: Option<DefenseKind>,
    /// Contrastive loss weight
    #[arg(long)]
    alpha: Option<f64>,
    /// Softmax temperature
    #[arg(long)]
    tau: Option<f64>,
    /// Intra-view term weight
    #[arg(long)]
    lambda_intra: Option<f64>,
    /// Augmentation budget in percent; omit for auto-selection
    #[arg(long)]
    nd_percent: Option<f64>,
    /// Training epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// Feature and embedding dimension
    #[arg(long)]
    dim: Option<usize>,
    /// Hidden width of the edge scorer
    #[arg(long)]
    mlp_hidden: Option<usize>,
    /// Parameter update rule: sgd or adam
    #[arg(long, value_parser = parse_optimizer)]
    optimizer: Option<Optimizer>,
    /// Fraction of edges kept for training
    #[arg(long)]
    train_ratio: Option<f64>,
    /// Root seed (repeatable runs come from --seeds)
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated list of root seeds
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Deterministic mode (byte-identical reruns); currently always honored
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    deterministic: bool,
    /// Output path (stdout when omitted; required for sweep)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json or csv
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
    /// Save the trained model checkpoint here (train-eval)
    #[arg(long)]
    save_model: Option<PathBuf>,
    /// Balance degree the restorer aims for (defend)
    #[arg(long)]
    target_d3: Option<f64>,
    /// Restoration flip cap (defend); defaults to the edge count
    #[arg(long)]
    max_flips: Option<usize>,
}

fn parse_attack(s: &str) -> Result<AttackKind, String> {
    match s {
        "balance" => Ok(AttackKind::Balance),
        "random" => Ok(AttackKind::Random),
        "none" => Ok(AttackKind::None),
        other => Err(format!("unknown attack {other:?} (balance|random|none)")),
    }
}

fn parse_defense(s: &str) -> Result<DefenseKind, String> {
    match s {
        "none" => Ok(DefenseKind::None),
        "balance-learning" => Ok(DefenseKind::BalanceLearning),
        "ba-sgcl" => Ok(DefenseKind::BaSgcl),
        other => Err(format!(
            "unknown defense {other:?} (none|balance-learning|ba-sgcl)"
        )),
    }
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "json" => Ok(OutputFormat::Json),
        "csv" => Ok(OutputFormat::Csv),
        other => Err(format!("unknown format {other:?} (json|csv)")),
    }
}

fn parse_input_format(s: &str) -> Result<EdgeListFormat, String> {
    match s {
        "signed" => Ok(EdgeListFormat::Signed),
        "rated" => Ok(EdgeListFormat::Rated),
        other => Err(format!("unknown input format {other:?} (signed|rated)")),
    }
}

fn parse_optimizer(s: &str) -> Result<Optimizer, String> {
    match s {
        "sgd" => Ok(Optimizer::Sgd),
        "adam" => Ok(Optimizer::Adam),
        other => Err(format!("unknown optimizer {other:?} (sgd|adam)")),
    }
}

impl CommonArgs {
    /// Config file first, explicit flags on top.
    fn resolve(self) -> Result<Settings, signet::Error> {
        let mut s = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    s.$field = v;
                }
            };
        }
        if let Some(v) = self.input {
            s.input = Some(v);
        }
        if let Some(v) = self.synth {
            s.synth = Some(v);
        }
        take!(input_format);
        take!(attack);
        take!(ptb_rate);
        take!(defense);
        take!(alpha);
        take!(tau);
        take!(lambda_intra);
        if let Some(v) = self.nd_percent {
            s.nd_percent = Some(v);
        }
        take!(epochs);
        take!(lr);
        take!(dim);
        take!(mlp_hidden);
        take!(optimizer);
        take!(train_ratio);
        if let Some(seed) = self.seed {
            s.seeds = vec![seed];
        }
        if let Some(seeds) = self.seeds {
            s.seeds = seeds;
        }
        s.deterministic = self.deterministic;
        if let Some(v) = self.out {
            s.out = Some(v);
        }
        take!(format);
        if let Some(v) = self.save_model {
            s.save_model = Some(v);
        }
        take!(target_d3);
        if let Some(v) = self.max_flips {
            s.max_flips = Some(v);
        }
        Ok(s)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = CliArgs::parse();
    let run = || -> Result<(), signet::Error> {
        match args.command {
            Command::Analyze(a) => cli::cmd_analyze(&a.resolve()?),
            Command::Attack(a) => cli::cmd_attack(&a.resolve()?),
            Command::Defend(a) => cli::cmd_defend(&a.resolve()?),
            Command::TrainEval(a) => cli::cmd_train_eval(&a.resolve()?),
            Command::Sweep(a) => cli::cmd_sweep(&a.resolve()?),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
