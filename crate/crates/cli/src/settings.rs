//! Resolved run configuration and its plain-text manifest form.
//!
//! Every knob has a dotted key (`reg.lambda`, `train.epochs`, ...). A
//! manifest is one `key=value` line per key, written in a fixed order with
//! every value spelled out, so feeding it back through [`Settings::apply`]
//! reproduces the run exactly. Command-line flags use the same keys.

use std::fmt::Write as _;
use std::str::FromStr;

use sgnn_core::data::SbmConfig;
use sgnn_core::regularizers::RegularizerKind;
use sgnn_core::trainer::TrainConfig;

use crate::error::{CliError, CliResult};

/// Version of the CSV layouts and manifest keys written by this crate.
pub const CSV_SCHEMA: u32 = 1;

/// Seeds used by `compare` and `sweep` unless overridden.
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// The methods compared in the results table.
pub const DEFAULT_METHODS: [RegularizerKind; 4] = [
    RegularizerKind::Dropout,
    RegularizerKind::DropEdge,
    RegularizerKind::DropNode,
    RegularizerKind::Sgnn,
];

/// One swept axis: a config key and the values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// Dataset sources: file paths, or `sbm:<blocks>x<size>` for synthetic
    /// graphs.
    pub data: Vec<String>,
    /// Expected dataset checksums, checked on load when present.
    pub checksums: Vec<String>,
    /// Parameters for synthetic sources; block count and size come from the
    /// source string.
    pub sbm: SbmConfig,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub methods: Vec<RegularizerKind>,
    pub grid: Vec<GridAxis>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            data: Vec::new(),
            checksums: Vec::new(),
            sbm: SbmConfig::default(),
            train: TrainConfig::default(),
            seeds: DEFAULT_SEEDS.to_vec(),
            methods: DEFAULT_METHODS.to_vec(),
            grid: Vec::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Usage(format!("bad value `{value}` for `{key}`"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> CliResult<Vec<T>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Expands the short names accepted in grid specs.
pub fn canonical_key(name: &str) -> &str {
    match name {
        "lambda" => "reg.lambda",
        "tcut" | "t_cut" => "reg.t_cut",
        "p" => "reg.p",
        "dt" => "train.dt",
        "T" => "train.T",
        "lr" => "opt.lr",
        "hidden" => "model.hidden",
        other => other,
    }
}

/// Keys that describe a run rather than configure it. They are written to
/// manifests and skipped when a manifest is read back.
const INFORMATIONAL: [&str; 4] = ["command", "output_dir", "data.name", "data.origin"];

impl Settings {
    /// Sets one key. Unknown keys and unparsable values are usage errors.
    pub fn apply(&mut self, key: &str, value: &str) -> CliResult<()> {
        let t = &mut self.train;
        match key {
            "csv_schema" => {
                let v: u32 = parse(key, value)?;
                if v != CSV_SCHEMA {
                    return Err(CliError::Usage(format!(
                        "manifest schema {v} is not supported (expected {CSV_SCHEMA})"
                    )));
                }
            }
            k if INFORMATIONAL.contains(&k) => {}
            "data" => self.data = parse_list(key, value)?,
            "data.checksum" => self.checksums = parse_list(key, value)?,
            "sbm.p_in" => self.sbm.p_in = parse(key, value)?,
            "sbm.p_out" => self.sbm.p_out = parse(key, value)?,
            "sbm.feature_dim" => self.sbm.feature_dim = parse(key, value)?,
            "sbm.noise" => self.sbm.noise = parse(key, value)?,
            "sbm.per_class_train" => self.sbm.per_class_train = parse(key, value)?,
            "sbm.val" => {
                self.sbm.val = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "sbm.seed" => self.sbm.seed = parse(key, value)?,
            "reg.kind" => t.reg.kind = parse(key, value)?,
            "reg.p" => t.reg.p = parse(key, value)?,
            "reg.lambda" => t.reg.lambda = parse(key, value)?,
            "reg.t_cut" => t.reg.t_cut = parse(key, value)?,
            "reg.rate_mode" => t.reg.rate_mode = parse(key, value)?,
            "reg.renormalize" => t.reg.renormalize_subgraph = parse_bool(key, value)?,
            "model.hidden" => t.model.hidden = parse(key, value)?,
            "model.bias" => t.model.bias = parse_bool(key, value)?,
            "opt.lr" => t.adam.lr = parse(key, value)?,
            "opt.beta1" => t.adam.beta1 = parse(key, value)?,
            "opt.beta2" => t.adam.beta2 = parse(key, value)?,
            "opt.eps" => t.adam.eps = parse(key, value)?,
            "opt.weight_decay" => t.weight_decay = parse(key, value)?,
            "train.regime" => t.regime = parse(key, value)?,
            "train.epochs" => t.epochs = parse(key, value)?,
            "train.T" => t.total_time = parse(key, value)?,
            "train.dt" => t.dt = parse(key, value)?,
            "train.anchor" => t.anchor = parse(key, value)?,
            "train.clock_mode" => t.clock_mode = parse(key, value)?,
            "train.record_timing" => t.record_timing = parse_bool(key, value)?,
            "eval.every" => t.eval_every = parse(key, value)?,
            "eval.select_best_val" => t.select_best_val = parse_bool(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "methods" => self.methods = parse_list(key, value)?,
            "grid" => self.grid = parse_grid(value)?,
            other => return Err(CliError::Usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every `key=value` line of a manifest or config file. Blank
    /// lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key=value", i + 1))
            })?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Fully resolved `key=value` lines for every key that affects a run.
    pub fn manifest_body(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("data", join(&self.data));
        kv("data.checksum", join(&self.checksums));
        kv("sbm.p_in", self.sbm.p_in.to_string());
        kv("sbm.p_out", self.sbm.p_out.to_string());
        kv("sbm.feature_dim", self.sbm.feature_dim.to_string());
        kv("sbm.noise", self.sbm.noise.to_string());
        kv("sbm.per_class_train", self.sbm.per_class_train.to_string());
        kv(
            "sbm.val",
            self.sbm
                .val
                .map_or_else(|| "auto".to_string(), |v| v.to_string()),
        );
        kv("sbm.seed", self.sbm.seed.to_string());
        kv("reg.kind", t.reg.kind.to_string());
        kv("reg.p", t.reg.p.to_string());
        kv("reg.lambda", t.reg.lambda.to_string());
        kv("reg.t_cut", t.reg.t_cut.to_string());
        kv("reg.rate_mode", t.reg.rate_mode.to_string());
        kv("reg.renormalize", t.reg.renormalize_subgraph.to_string());
        kv("model.hidden", t.model.hidden.to_string());
        kv("model.bias", t.model.bias.to_string());
        kv("opt.lr", t.adam.lr.to_string());
        kv("opt.beta1", t.adam.beta1.to_string());
        kv("opt.beta2", t.adam.beta2.to_string());
        kv("opt.eps", t.adam.eps.to_string());
        kv("opt.weight_decay", t.weight_decay.to_string());
        kv("train.regime", t.regime.to_string());
        kv("train.epochs", t.epochs.to_string());
        kv("train.T", t.total_time.to_string());
        kv("train.dt", t.dt.to_string());
        kv("train.anchor", t.anchor.to_string());
        kv("train.clock_mode", t.clock_mode.to_string());
        kv("train.record_timing", t.record_timing.to_string());
        kv("eval.every", t.eval_every.to_string());
        kv("eval.select_best_val", t.select_best_val.to_string());
        kv("seed", t.seed.to_string());
        kv("seeds", join(&self.seeds));
        kv("methods", join(&self.methods));
        kv("grid", render_grid(&self.grid));
        s
    }
}

/// Parses `lambda=0.5,1,2;tcut=0.3,0.7`. Axes may also be separated by
/// whitespace.
pub fn parse_grid(spec: &str) -> CliResult<Vec<GridAxis>> {
    let mut axes = Vec::new();
    for part in spec.split([';', ' ']).filter(|p| !p.is_empty()) {
        let (name, values) = part
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("grid axis `{part}` needs name=values")))?;
        let values: Vec<String> = values
            .split(',')
            .filter(|v| !v.is_empty())
            .map(str::to_string)
            .collect();
        if values.is_empty() {
            return Err(CliError::Usage(format!("grid axis `{name}` has no values")));
        }
        let key = canonical_key(name).to_string();
        if axes.iter().any(|a: &GridAxis| a.key == key) {
            return Err(CliError::Usage(format!("grid axis `{name}` given twice")));
        }
        // reject unknown keys and bad values now rather than mid-sweep
        let mut probe = Settings::default();
        for v in &values {
            probe.apply(&key, v)?;
        }
        axes.push(GridAxis { key, values });
    }
    Ok(axes)
}

fn render_grid(grid: &[GridAxis]) -> String {
    grid.iter()
        .map(|a| format!("{}={}", a.key, a.values.join(",")))
        .collect::<Vec<_>>()
        .join(";")
}
