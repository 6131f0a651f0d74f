use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mespot_cli::{
    cmd_evaluate, cmd_loso, cmd_spot, cmd_synth, cmd_train, CliError, Manifest, Options,
};
use mespot_core::fusion::Method;

#[derive(Parser)]
#[command(
    name = "mespot",
    version,
    about = "Micro-expression spotting in long videos"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Dataset preset (samm or casme2); overrides the manifest.
    #[arg(long)]
    dataset: Option<String>,
    /// key = value config file; overrides --dataset and the manifest.
    #[arg(long)]
    config: Option<PathBuf>,
    /// LBP-χ² threshold ratio.
    #[arg(long)]
    tau: Option<f64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Training {
    /// SVM cost.
    #[arg(long = "c", default_value_t = 1.0)]
    c_param: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Disable rejection of instants with an active nose ROI.
    #[arg(long)]
    no_nose_veto: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Spot intervals in every video of a manifest.
    Spot {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "lbp-chi2")]
        method: String,
        /// Trained model; required for ltp-ml.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        no_nose_veto: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Train one classifier on every video of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
        #[command(flatten)]
        training: Training,
        #[command(flatten)]
        common: Common,
    },
    /// Leave-one-subject-out training, spotting and evaluation.
    Loso {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = mespot_core::metrics::DEFAULT_K)]
        k: f64,
        #[command(flatten)]
        training: Training,
        #[command(flatten)]
        common: Common,
    },
    /// Score spotted intervals against ground truth.
    Evaluate {
        #[arg(long)]
        spotted: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Adds the manifest's videos to the evaluated set.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = mespot_core::metrics::DEFAULT_K)]
        k: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render synthetic videos with ground truth and a manifest.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

fn options(common: Common) -> Options {
    Options {
        dataset: common.dataset,
        config: common.config,
        tau: common.tau,
        jobs: common.jobs,
        out: common.out,
        ..Options::default()
    }
}

fn with_training(mut opts: Options, t: Training) -> Options {
    opts.c_param = t.c_param;
    opts.seed = t.seed;
    opts.nose_veto = !t.no_nose_veto;
    opts
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Spot {
            manifest,
            method,
            model,
            no_nose_veto,
            common,
        } => {
            let method: Method = method.parse().map_err(|_| {
                CliError::Usage(format!("unknown method `{method}`; use ltp-ml or lbp-chi2"))
            })?;
            let mut opts = options(common);
            opts.nose_veto = !no_nose_veto;
            let found = cmd_spot(&manifest, method, model.as_deref(), &opts)?;
            eprintln!("{} intervals spotted", found.len());
        }
        Command::Train {
            manifest,
            model_out,
            training,
            common,
        } => {
            cmd_train(
                &manifest,
                &model_out,
                &with_training(options(common), training),
            )?;
            eprintln!("model written to {}", model_out.display());
        }
        Command::Loso {
            manifest,
            k,
            training,
            common,
        } => {
            let mut opts = with_training(options(common), training);
            opts.k = k;
            let outcome = cmd_loso(&manifest, &opts)?;
            print!("{}", report_line(&outcome.report));
        }
        Command::Evaluate {
            spotted,
            gt,
            manifest,
            k,
            out,
        } => {
            let extra = match manifest {
                Some(p) => Manifest::load(&p)?
                    .videos
                    .into_iter()
                    .map(|v| v.video_id)
                    .collect(),
                None => Vec::new(),
            };
            let opts = Options {
                k,
                out,
                ..Options::default()
            };
            let report = cmd_evaluate(&spotted, &gt, &extra, &opts)?;
            print!("{}", report_line(&report));
        }
        Command::Synth { spec, out, jobs } => {
            let opts = Options {
                jobs,
                ..Options::default()
            };
            let manifest = cmd_synth(&spec, &out, &opts)?;
            eprintln!("manifest written to {}", manifest.display());
        }
    }
    Ok(())
}

fn report_line(r: &mespot_core::metrics::EvalReport) -> String {
    let f = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.4}"));
    format!(
        "M={} N={} A={} FP={} FN={} recall={} precision={} F1={}\n",
        r.ground_truth,
        r.spotted,
        r.tp,
        r.fp,
        r.fn_,
        f(r.recall),
        f(r.precision),
        f(r.f1)
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
