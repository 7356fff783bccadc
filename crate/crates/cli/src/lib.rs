//! Command-line surface binding datasets, concept vectors, corrections,
//! and the experiment protocols into reproducible workflows.
//!
//! Exit codes: 0 success, 1 user error (bad flags, files, config), 2
//! internal error.

mod commands;
mod resolver;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

pub use resolver::Resolver;

#[derive(Debug)]
pub struct CmdError {
    pub code: i32,
    pub message: String,
}

impl CmdError {
    pub fn user(message: impl ToString) -> Self {
        Self {
            code: 1,
            message: message.to_string(),
        }
    }

    pub fn internal(message: impl ToString) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }

    /// Core errors triggered by user-supplied inputs map to exit 1; errors
    /// that indicate a broken computation map to exit 2.
    pub fn from_core(e: pcav::Error) -> Self {
        use pcav::Error::*;
        match e {
            InvalidConfig(_) | Io(_) | Format(_) | ClassAbsent(_) | EmptyInput => Self::user(e),
            _ => Self::internal(e),
        }
    }
}

pub type CmdResult = Result<(), CmdError>;

#[derive(Parser)]
#[command(name = "pcav", version, about = "Concept-vector artifact modeling and model correction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory; all artifacts land here.
    #[arg(short, long, global = true, default_value = "out")]
    out: PathBuf,
    /// Flat key = value config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)] // one-shot dispatch value
enum Command {
    /// Toy-data figure: fitted directions, boundary, correction trajectories.
    Toy {
        #[command(flatten)]
        common: Common,
        /// Distractor rotation in degrees (repeatable; default 0, 45, 135).
        #[arg(long = "tau")]
        taus: Vec<f64>,
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        artifact_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate the pattern-template train/test datasets.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also export CSV copies.
        #[arg(long)]
        csv: bool,
    },
    /// Poison a dataset (clever-hans | backdoor | test).
    Poison {
        #[command(flatten)]
        common: Common,
        /// One of: clever-hans, backdoor, test.
        mode: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        target: Option<i32>,
        #[arg(long)]
        rate: Option<f64>,
        /// Artifact kind: box, shift, color.
        #[arg(long)]
        artifact: Option<String>,
        #[arg(long)]
        box_size: Option<usize>,
        #[arg(long)]
        box_value: Option<f64>,
        #[arg(long)]
        factor: Option<f64>,
        #[arg(long)]
        color_index: Option<usize>,
        /// Dataset file whose first sample is the additive-shift template
        /// (defaults to the built-in figure-eight template).
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a classifier.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// conv | linear | mlp
        #[arg(long)]
        arch: Option<String>,
        #[arg(long)]
        c1: Option<usize>,
        #[arg(long)]
        c2: Option<usize>,
        #[arg(long)]
        dense: Option<usize>,
        /// Hidden widths for --arch mlp, comma separated.
        #[arg(long)]
        hidden: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        /// adadelta | sgd
        #[arg(long)]
        optimizer: Option<String>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Evaluation dataset(s), evaluated after each epoch.
        #[arg(long = "eval")]
        evals: Vec<PathBuf>,
    },
    /// Fit a concept vector on a trained model's features.
    FitCav {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// filter | pattern
        #[arg(long)]
        kind: Option<String>,
        /// gt | predicted
        #[arg(long)]
        labels: Option<String>,
        /// input | layer1
        #[arg(long)]
        hook: Option<String>,
        #[arg(long)]
        target: Option<i32>,
        #[arg(long)]
        svm_lambda: Option<f64>,
        #[arg(long)]
        svm_epochs: Option<usize>,
        #[arg(long)]
        variance_floor: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Correct a model with a fitted concept vector.
    Correct {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cav: PathBuf,
        /// aclarc | pclarc
        #[arg(long)]
        mode: Option<String>,
        /// Training data (required for aclarc fine-tuning).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        subset_fraction: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a model, optionally through a projective correction hook.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Apply this concept vector as a projective hook at evaluation.
        #[arg(long)]
        cav: Option<PathBuf>,
    },
    /// Probe softmax shifts when a concept direction is added.
    Logits {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        cav: PathBuf,
        #[arg(long)]
        target: Option<i32>,
        /// Addition magnitude; defaults to |z+ - z-| of the vector.
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Rank dataset samples by cosine similarity to a concept vector.
    Neighbors {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cav: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Needed when the vector lives at a latent hook point.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run the controlled poisoning/correction suite end to end.
    Suite {
        #[command(flatten)]
        common: Common,
        /// clever-hans | backdoor
        #[arg(long)]
        attack: Option<String>,
        /// box | shift | color
        #[arg(long)]
        artifact: Option<String>,
        #[arg(long)]
        r_ch: Option<f64>,
        #[arg(long)]
        r_bd: Option<f64>,
        #[arg(long)]
        r_p: Option<f64>,
        /// Target classes to sweep, comma separated.
        #[arg(long)]
        targets: Option<String>,
        /// Number of seeds (0..n).
        #[arg(long)]
        seeds: Option<u64>,
        /// filter, pattern-gt, pattern-pred (comma separated).
        #[arg(long)]
        kinds: Option<String>,
        /// baseline, pclarc, aclarc (comma separated).
        #[arg(long)]
        corrections: Option<String>,
        /// input, layer1 (comma separated).
        #[arg(long)]
        hooks: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        ft_epochs: Option<usize>,
        #[arg(long)]
        subset_fraction: Option<f64>,
        #[arg(long)]
        box_size: Option<usize>,
        #[arg(long)]
        factor: Option<f64>,
        #[arg(long)]
        color_index: Option<usize>,
        /// Parallel cells (0 = library default).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Finite-difference validation of the backprop gradients.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// conv | dense
        #[arg(long)]
        arch: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

pub fn run(args: Vec<String>) -> i32 {
    let argv = std::iter::once("pcav".to_string()).chain(args);
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub(crate) use Command as CliCommand;
pub(crate) use Common as CommonArgs;
