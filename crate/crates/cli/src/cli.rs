//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::bench::{bench_clocks, default_sizes};
use crate::commands::{cmd_compare, cmd_gen_sbm, cmd_sweep, cmd_train, cmd_validate_data};
use crate::error::{CliError, CliResult};
use crate::settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "sgnn", version, about = "Poisson-clock GNN training engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model and write run.csv and manifest.txt.
    Train(RunArgs),
    /// Run every method over a seed list and print a results table.
    Compare(RunArgs),
    /// Train over a hyperparameter grid and report the best point.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Grid axes such as `lambda=0.5,1,2 tcut=0.3,0.7,1.0`.
        #[arg(long, num_args = 1..)]
        grid: Vec<String>,
    },
    /// Time clock initialisation, activation and renewal against node count.
    BenchClocks {
        /// Comma-separated node counts; defaults to 10^4 … 10^7.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Minimum timed repetitions per size.
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Activation time used for the active-set step.
        #[arg(long, default_value_t = 0.5)]
        dt: f64,
    },
    /// Write a stochastic block model graph in the dataset text format.
    GenSbm {
        /// Shape, e.g. `sbm:3x100`.
        #[arg(long, default_value = "sbm:3x100")]
        spec: String,
        #[arg(long)]
        out: PathBuf,
        /// Extra `key=value` settings, e.g. `sbm.seed=7`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Check a dataset file and print its statistics.
    ValidateData {
        #[arg(long)]
        data: PathBuf,
    },
}

/// Options shared by the training commands. Each flag sets the config key
/// named in its help text; flags override `--config`.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// Config or manifest file of `key=value` lines.
    #[arg(long, alias = "manifest")]
    pub config: Option<PathBuf>,
    /// Dataset file (`data`); repeat for several datasets.
    #[arg(long)]
    pub data: Vec<String>,
    /// Synthetic dataset such as `sbm:3x100` (`data`).
    #[arg(long)]
    pub synthetic: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `reg.kind`: none, dropout, drop_edge, drop_node or sgnn.
    #[arg(long)]
    pub reg: Option<String>,
    /// `reg.p`.
    #[arg(long)]
    pub p: Option<String>,
    /// `reg.lambda`.
    #[arg(long)]
    pub lambda: Option<String>,
    /// `reg.t_cut`.
    #[arg(long)]
    pub tcut: Option<String>,
    /// `reg.rate_mode`: uniform or degree.
    #[arg(long)]
    pub rate_mode: Option<String>,
    /// `reg.renormalize`.
    #[arg(long)]
    pub renormalize: bool,
    /// `model.hidden`.
    #[arg(long)]
    pub hidden: Option<String>,
    /// `opt.lr`.
    #[arg(long)]
    pub lr: Option<String>,
    /// `opt.weight_decay`.
    #[arg(long)]
    pub weight_decay: Option<String>,
    /// `train.regime`: epoch or poisson_dynamic.
    #[arg(long)]
    pub regime: Option<String>,
    /// `train.epochs`.
    #[arg(long)]
    pub epochs: Option<String>,
    /// `train.T`.
    #[arg(long = "T")]
    pub total_time: Option<String>,
    /// `train.dt`.
    #[arg(long)]
    pub dt: Option<String>,
    /// `train.anchor`: event or firing.
    #[arg(long)]
    pub anchor: Option<String>,
    /// `train.clock_mode`: persistent or fresh.
    #[arg(long)]
    pub clock_mode: Option<String>,
    /// `eval.every`.
    #[arg(long)]
    pub eval_every: Option<String>,
    /// `eval.select_best_val`.
    #[arg(long)]
    pub best_val: bool,
    /// `train.record_timing`; fills the ms column and makes output
    /// timing-dependent.
    #[arg(long)]
    pub record_timing: bool,
    /// `seed`.
    #[arg(long)]
    pub seed: Option<String>,
    /// `seeds`, comma-separated.
    #[arg(long)]
    pub seeds: Option<String>,
    /// `methods`, comma-separated.
    #[arg(long)]
    pub methods: Option<String>,
    /// Any other `key=value` setting.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

fn apply_pairs(settings: &mut Settings, pairs: &[String]) -> CliResult<()> {
    for pair in pairs {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{pair}`")))?;
        settings.apply(k, v)?;
    }
    Ok(())
}

impl RunArgs {
    /// Starts from `base`, applies `--config`, then the flags.
    pub fn resolve(&self, base: Settings) -> CliResult<Settings> {
        let mut s = base;
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            s.apply_text(&text)?;
        }
        if !self.data.is_empty() || !self.synthetic.is_empty() {
            s.data = self.data.iter().chain(&self.synthetic).cloned().collect();
            // new sources invalidate checksums carried over from a manifest
            s.checksums.clear();
        }
        let flags = [
            ("reg.kind", &self.reg),
            ("reg.p", &self.p),
            ("reg.lambda", &self.lambda),
            ("reg.t_cut", &self.tcut),
            ("reg.rate_mode", &self.rate_mode),
            ("model.hidden", &self.hidden),
            ("opt.lr", &self.lr),
            ("opt.weight_decay", &self.weight_decay),
            ("train.regime", &self.regime),
            ("train.epochs", &self.epochs),
            ("train.T", &self.total_time),
            ("train.dt", &self.dt),
            ("train.anchor", &self.anchor),
            ("train.clock_mode", &self.clock_mode),
            ("eval.every", &self.eval_every),
            ("seed", &self.seed),
            ("seeds", &self.seeds),
            ("methods", &self.methods),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                s.apply(key, v)?;
            }
        }
        for (key, on) in [
            ("reg.renormalize", self.renormalize),
            ("eval.select_best_val", self.best_val),
            ("train.record_timing", self.record_timing),
        ] {
            if on {
                s.apply(key, "true")?;
            }
        }
        apply_pairs(&mut s, &self.set)?;
        Ok(s)
    }
}

/// Parses `args` (program name first) and runs the command. Returns the text
/// for standard output, which for `--help` is the help text.
pub fn run<I, T>(args: I) -> CliResult<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => return Ok(e.to_string()),
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    execute(cli.command)
}

pub fn execute(command: Command) -> CliResult<String> {
    match command {
        Command::Train(args) => {
            let s = args.resolve(Settings::default())?;
            let out = cmd_train(&s, args.out.as_deref())?;
            let (val, test) = out.record.reported;
            Ok(format!(
                "steps={} skipped={} mean_active_frac={:.4} val_acc={val:.4} test_acc={test:.4}\n",
                out.record.rows.len(),
                out.record.skipped_steps.len(),
                out.record.mean_active_frac
            ))
        }
        Command::Compare(args) => {
            let s = args.resolve(Settings::default())?;
            Ok(cmd_compare(&s, args.out.as_deref())?.table)
        }
        Command::Sweep { run, grid } => {
            let mut base = Settings::default();
            base.apply("reg.kind", "sgnn")?;
            let mut s = run.resolve(base)?;
            if !grid.is_empty() {
                s.apply("grid", &grid.join(";"))?;
            }
            let out = cmd_sweep(&s, run.out.as_deref())?;
            Ok(format!("{}{}", out.csv, out.summary))
        }
        Command::BenchClocks {
            sizes,
            reps,
            lambda,
            dt,
        } => {
            let sizes = if sizes.is_empty() {
                default_sizes()
            } else {
                sizes
            };
            Ok(bench_clocks(&sizes, reps, lambda, dt)?.render())
        }
        Command::GenSbm { spec, out, set } => {
            let mut s = Settings::default();
            apply_pairs(&mut s, &set)?;
            cmd_gen_sbm(&s, &spec, &out)
        }
        Command::ValidateData { data } => cmd_validate_data(&data),
    }
}
