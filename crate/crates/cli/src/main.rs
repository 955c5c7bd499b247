//! `madiff`: sprite corpora, training, translation, transfer and evaluation.

mod commands;
mod config;
mod fail;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use madiff_core::translator::CamMode;

#[derive(Parser, Debug)]
#[command(name = "madiff", version, about = "Cross-domain makeup diffusion on procedural sprites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags every command shares.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every randomized step of the run.
    #[arg(long)]
    seed: Option<u64>,
}

/// Sampling flags for the translation commands.
#[derive(Args, Debug, Clone)]
pub struct Sampling {
    /// Number of denoising steps from the noised input.
    #[arg(long = "K", value_name = "N")]
    k: Option<usize>,
    /// Injected-noise scale in [0, 1]; 0 is deterministic.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Cam {
    Default,
    Off,
    Literal,
}

impl From<Cam> for CamMode {
    fn from(c: Cam) -> Self {
        match c {
            Cam::Default => CamMode::Default,
            Cam::Off => CamMode::Off,
            Cam::Literal => CamMode::Literal,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Task {
    Removal,
    Transfer,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a two-domain sprite corpus with masks, landmarks and a manifest.
    GenData {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of sprites (at least 2).
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Side length: 16, 32 or 64.
        #[arg(long, default_value_t = 32)]
        size: usize,
        /// Fraction of makeup-domain sprites.
        #[arg(long, default_value_t = 0.5)]
        ratio: f64,
    },
    /// Train a denoiser on a corpus; writes the model and a loss CSV.
    Train {
        /// Corpus directory or its manifest.json.
        #[arg(long)]
        data: PathBuf,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Override the number of iterations.
        #[arg(long)]
        iterations: Option<usize>,
        /// Loss log path (defaults to the model path with a .csv extension).
        #[arg(long)]
        loss_log: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Translate an image between domains or tags.
    Translate {
        #[arg(long)]
        model: PathBuf,
        /// Input PPM.
        #[arg(long)]
        input: PathBuf,
        /// Source condition: nomakeup, makeup or tag:<name>.
        #[arg(long)]
        from: String,
        /// Target condition: nomakeup, makeup or tag:<name>.
        #[arg(long)]
        to: String,
        /// PGM mask of pixels kept from the input.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        common: Common,
        /// Output PPM.
        #[arg(long)]
        out: PathBuf,
    },
    /// Transfer makeup from a reference face onto a source face.
    Transfer {
        #[arg(long)]
        model: PathBuf,
        /// Source PPM.
        #[arg(long)]
        source: PathBuf,
        /// Reference PPM.
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Source landmarks JSON.
        #[arg(long)]
        lm_source: PathBuf,
        /// Reference landmarks JSON.
        #[arg(long)]
        lm_ref: PathBuf,
        /// Prefix of the source component masks: <PREFIX>_{face,eyes,lips,eyebrows}.pgm.
        #[arg(long, value_name = "PREFIX")]
        source_masks: PathBuf,
        #[arg(long)]
        alpha_face: Option<f64>,
        #[arg(long)]
        alpha_eyes: Option<f64>,
        #[arg(long)]
        alpha_lips: Option<f64>,
        #[arg(long)]
        alpha_brows: Option<f64>,
        /// Which chain pins components before their release step.
        #[arg(long, value_enum)]
        cam: Option<Cam>,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        common: Common,
        /// Output PPM.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a multi-reference transfer job described in JSON.
    MultiTransfer {
        /// Job file; its paths are relative to its directory.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Override the job's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output PPM.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score removal or transfer over corpus pairs; writes a JSON report.
    Eval {
        #[arg(long, value_enum)]
        task: Task,
        /// Corpus directory or its manifest.json.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Number of (non-makeup, makeup) pairs.
        #[arg(long)]
        pairs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Score transfers across a list of step counts K.
    SweepK {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated step counts, e.g. 40,80,120.
        #[arg(long, value_name = "LIST")]
        k_list: Option<String>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        pairs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("MADIFF-E2: {e}");
            return ExitCode::from(2);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("MADIFF-E{}: {:#}", f.code, f.error);
            ExitCode::from(f.code)
        }
    }
}
