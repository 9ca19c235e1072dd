mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Validation failure raised by the front end itself.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Parser)]
#[command(name = "robustptf", version, about = "Adversarial examples, certificates and robust learning for PTFs and two-layer ReLU nets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Master seed; per-example streams derive from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file with default values for this command's flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "PTF_ROBUST_JOBS")]
    pub jobs: Option<usize>,
    /// Leave wall-clock timings out of the report.
    #[arg(long)]
    pub no_timings: bool,
}

#[derive(Copy, Clone, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Label,
    Model,
}

#[derive(Copy, Clone, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalizerArg {
    Ellipsoid,
    CuttingPlane,
}

#[derive(Copy, Clone, ValueEnum, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Main,
    Appendix,
    Redundant,
}

#[derive(Copy, Clone, ValueEnum, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseArg {
    Yes,
    No,
}

#[derive(Copy, Clone, ValueEnum, PartialEq, Eq)]
pub enum CheckArg {
    Counts,
    Robustness,
    Rank,
    Pairs,
    All,
}

#[derive(Args, Clone)]
pub struct AttackArgs {
    /// PTF model JSON `{"n", "A", "b", "c"}`.
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled CSV with header `x_1,...,x_n,label`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Compare against the data label or the model's own prediction.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Clip rounded perturbations back into the δ-box.
    #[arg(long)]
    pub clip: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Search for adversarial perturbations of a PTF at every data point.
    Attack(AttackArgs),
    /// Same batch as `attack`, reported as robustness certification.
    Certify(AttackArgs),
    /// SDP attack on a two-layer ReLU net at every data point.
    AttackNet {
        /// Net JSON `{"W", "V", "v_prime"}`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        delta: Option<f64>,
        /// Solve the relaxation at `α·δ` and accept only `‖z‖∞ ≤ δ`.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Class pair `i,j` for multi-output nets.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        target: Option<Vec<usize>>,
        /// Also run the PGD baseline.
        #[arg(long)]
        pgd: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Robustly learn a degree-1 or degree-2 PTF.
    Learn {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, value_enum)]
        localizer: Option<LocalizerArg>,
        /// Model JSON output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Line-delimited JSON transcript of cuts.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Sample size for the learner's generalization bound.
    SampleSize {
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a hardness gadget from a random QP instance.
    GenGadget {
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        #[arg(long)]
        n: Option<usize>,
        /// Whether the QP instance is a yes or a no instance.
        #[arg(long, value_enum)]
        case: Option<CaseArg>,
        /// Surface points (appendix).
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the labeled set as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Jitter repeated points (redundant).
        #[arg(long)]
        jitter: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Check structural properties of a gadget file.
    VerifyGadget {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        check: Vec<CheckArg>,
        /// Robustness radius; the gadget's δ by default.
        #[arg(long)]
        delta_prime: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Paired SDP-vs-PGD success counts on random nets.
    Bench {
        /// Cells as `NxK`, comma separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<String>>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Render a report or transcript as SVG.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<robustptf::Error>() {
            return match e {
                robustptf::Error::NonConvergence { .. } | robustptf::Error::NetNonConvergence { .. } => 3,
                _ => 2,
            };
        }
        if cause.is::<Invalid>() || cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Attack(a) => commands::attack(a, "attack"),
        Command::Certify(a) => commands::attack(a, "certify"),
        Command::AttackNet { model, data, delta, alpha, trials, target, pgd, out, common } => {
            commands::attack_net(model, data, delta, alpha, trials, target, pgd, out, common)
        }
        Command::Learn { data, degree, delta, epsilon, eta, budget, localizer, out, transcript, report, common } => {
            commands::learn(data, degree, delta, epsilon, eta, budget, localizer, out, transcript, report, common)
        }
        Command::SampleSize { degree, n, epsilon, eta, out, common } => commands::sample_size(degree, n, epsilon, eta, out, common),
        Command::GenGadget { kind, n, case, m, delta, out, csv, jitter, common } => {
            commands::gen_gadget(kind, n, case, m, delta, out, csv, jitter, common)
        }
        Command::VerifyGadget { input, check, delta_prime, out, common } => commands::verify_gadget(input, check, delta_prime, out, common),
        Command::Bench { sizes, instances, delta, out, common } => commands::bench(sizes, instances, delta, out, common),
        Command::Plot { input, out } => plot::plot(&input, &out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
