//! The work behind each subcommand. Functions return their outputs as
//! strings and write files only under the requested output directory; the
//! binary decides what to print.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use sgnn_core::data::{generate_sbm, load_dataset, DatasetBundle, SbmConfig};
use sgnn_core::regularizers::RegularizerKind;
use sgnn_core::trainer::{train, RunRecord, TrainConfig};

use crate::error::{CliError, CliResult};
use crate::settings::{Settings, CSV_SCHEMA};

/// Environment variable capping worker threads for `compare` and `sweep`.
pub const THREADS_ENV: &str = "SGNN_THREADS";

/// Worker pool sized by `SGNN_THREADS`, or rayon's default when unset.
pub fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "{THREADS_ENV} must be a positive integer, got `{v}`"
                ))
            })?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

fn is_synthetic(source: &str) -> bool {
    source.starts_with("sbm:")
}

/// Loads a dataset file, or generates the graph for an `sbm:BxS` source
/// using the `sbm.*` settings.
pub fn load_source(source: &str, settings: &Settings) -> CliResult<DatasetBundle> {
    if is_synthetic(source) {
        let shape = SbmConfig::from_spec(source)?;
        let cfg = SbmConfig {
            blocks: shape.blocks,
            block_size: shape.block_size,
            ..settings.sbm.clone()
        };
        Ok(generate_sbm(&cfg)?)
    } else {
        load_file(Path::new(source))
    }
}

/// Loads a dataset file, naming the file in data errors.
fn load_file(path: &Path) -> CliResult<DatasetBundle> {
    load_dataset(path).map_err(|e| match CliError::from(e) {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Loads every configured source and checks it against any expected
/// checksum. Records the actual checksums in the returned settings.
fn load_all(settings: &Settings) -> CliResult<(Vec<DatasetBundle>, Settings)> {
    if settings.data.is_empty() {
        return Err(CliError::Usage(
            "no dataset given; pass --data FILE or --synthetic sbm:BxS".into(),
        ));
    }
    if !settings.checksums.is_empty() && settings.checksums.len() != settings.data.len() {
        return Err(CliError::Usage(format!(
            "{} checksums given for {} datasets",
            settings.checksums.len(),
            settings.data.len()
        )));
    }
    let bundles = settings
        .data
        .iter()
        .map(|s| load_source(s, settings))
        .collect::<CliResult<Vec<_>>>()?;
    for (i, b) in bundles.iter().enumerate() {
        if let Some(expected) = settings.checksums.get(i) {
            if *expected != b.checksum {
                return Err(CliError::Data(format!(
                    "dataset `{}` has checksum {} but the manifest expects {expected}",
                    settings.data[i], b.checksum
                )));
            }
        }
    }
    let mut resolved = settings.clone();
    resolved.checksums = bundles.iter().map(|b| b.checksum.clone()).collect();
    Ok((bundles, resolved))
}

fn manifest(command: &str, out: Option<&Path>, bundles: &[DatasetBundle], s: &Settings) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "csv_schema={CSV_SCHEMA}");
    let _ = writeln!(m, "command={command}");
    let _ = writeln!(
        m,
        "output_dir={}",
        out.map_or_else(String::new, |p| p.display().to_string())
    );
    let names: Vec<&str> = bundles.iter().map(|b| b.name.as_str()).collect();
    let _ = writeln!(m, "data.name={}", names.join(","));
    let origins: Vec<&str> = bundles.iter().map(|b| b.source.as_str()).collect();
    let _ = writeln!(m, "data.origin={}", origins.join(" | "));
    m.push_str(&s.manifest_body());
    m
}

fn write_outputs(out: Option<&Path>, files: &[(&str, &str)]) -> CliResult<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        for (name, contents) in files {
            std::fs::write(dir.join(name), contents)?;
        }
    }
    Ok(())
}

fn record_csv(record: &RunRecord) -> String {
    let mut buf = Vec::new();
    record
        .write_csv(&mut buf)
        .expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv is ascii")
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub record: RunRecord,
    pub csv: String,
    pub manifest: String,
}

/// One training run; writes `run.csv` and `manifest.txt` under `out`.
pub fn cmd_train(settings: &Settings, out: Option<&Path>) -> CliResult<TrainOutput> {
    if settings.data.len() != 1 {
        return Err(CliError::Usage(format!(
            "train takes exactly one dataset, got {}",
            settings.data.len()
        )));
    }
    let (bundles, resolved) = load_all(settings)?;
    let (_, record) = train(&bundles[0].graph, &resolved.train)?;
    let csv = record_csv(&record);
    let manifest = manifest("train", out, &bundles, &resolved);
    write_outputs(out, &[("run.csv", &csv), ("manifest.txt", &manifest)])?;
    Ok(TrainOutput {
        record,
        csv,
        manifest,
    })
}

/// Final accuracies of one run inside a comparison or sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub active_frac: f64,
}

fn summarize(seed: u64, record: &RunRecord) -> RunSummary {
    RunSummary {
        seed,
        val_acc: record.reported.0,
        test_acc: record.reported.1,
        active_frac: record.mean_active_frac,
    }
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `jobs` on the worker pool and returns results in job order.
fn run_jobs<J: Sync, T: Send>(
    jobs: &[J],
    f: impl Fn(&J) -> CliResult<T> + Sync + Send,
) -> CliResult<Vec<T>> {
    let pool = thread_pool()?;
    let results: Vec<CliResult<T>> = pool.install(|| jobs.par_iter().map(&f).collect());
    results.into_iter().collect()
}

#[derive(Debug, Clone)]
pub struct CompareCell {
    pub dataset: String,
    pub method: RegularizerKind,
    pub runs: Vec<RunSummary>,
}

impl CompareCell {
    pub fn val(&self) -> (f64, f64) {
        mean_std(&self.runs.iter().map(|r| r.val_acc).collect::<Vec<_>>())
    }

    pub fn test(&self) -> (f64, f64) {
        mean_std(&self.runs.iter().map(|r| r.test_acc).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone)]
pub struct CompareOutput {
    /// Dataset-major, then method, in configuration order.
    pub cells: Vec<CompareCell>,
    pub table: String,
    pub csv: String,
    pub manifest: String,
}

impl CompareOutput {
    pub fn cell(&self, dataset: &str, method: RegularizerKind) -> Option<&CompareCell> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.method == method)
    }
}

/// Every method on every dataset for every seed. Writes `compare.csv`,
/// `table.txt` and `manifest.txt` under `out`.
pub fn cmd_compare(settings: &Settings, out: Option<&Path>) -> CliResult<CompareOutput> {
    if settings.methods.is_empty() || settings.seeds.is_empty() {
        return Err(CliError::Usage("compare needs methods and seeds".into()));
    }
    let (bundles, resolved) = load_all(settings)?;
    let mut jobs = Vec::new();
    for d in 0..bundles.len() {
        for &method in &resolved.methods {
            for &seed in &resolved.seeds {
                jobs.push((d, method, seed));
            }
        }
    }
    let summaries = run_jobs(&jobs, |&(d, method, seed)| {
        let mut cfg: TrainConfig = resolved.train.clone();
        cfg.reg.kind = method;
        cfg.seed = seed;
        let (_, record) = train(&bundles[d].graph, &cfg)?;
        Ok(summarize(seed, &record))
    })?;

    let mut cells: Vec<CompareCell> = Vec::new();
    for (&(d, method, _), run) in jobs.iter().zip(summaries) {
        match cells.last_mut() {
            Some(c) if c.dataset == resolved.data[d] && c.method == method => c.runs.push(run),
            _ => cells.push(CompareCell {
                dataset: resolved.data[d].clone(),
                method,
                runs: vec![run],
            }),
        }
    }

    let mut csv = String::from("dataset,method,seed,val_acc,test_acc,active_frac\n");
    for c in &cells {
        for r in &c.runs {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                c.dataset, c.method, r.seed, r.val_acc, r.test_acc, r.active_frac
            );
        }
    }
    let table = compare_table(&resolved, &bundles, &cells);
    let manifest = manifest("compare", out, &bundles, &resolved);
    write_outputs(
        out,
        &[
            ("compare.csv", &csv),
            ("table.txt", &table),
            ("manifest.txt", &manifest),
        ],
    )?;
    Ok(CompareOutput {
        cells,
        table,
        csv,
        manifest,
    })
}

/// Method rows, a validation and a test column per dataset, `mean±std`.
fn compare_table(s: &Settings, bundles: &[DatasetBundle], cells: &[CompareCell]) -> String {
    let mut header = vec!["method".to_string()];
    for b in bundles {
        header.push(format!("{} val", b.name));
        header.push(format!("{} test", b.name));
    }
    let mut rows = vec![header];
    for &method in &s.methods {
        let mut row = vec![method.to_string()];
        for d in &s.data {
            let cell = cells
                .iter()
                .find(|c| &c.dataset == d && c.method == method)
                .expect("every method ran on every dataset");
            for (m, sd) in [cell.val(), cell.test()] {
                row.push(format!("{m:.4}±{sd:.4}"));
            }
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    let _ = writeln!(out, "seeds: {}", s.seeds.len());
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// `(key, value)` for each grid axis.
    pub point: Vec<(String, String)>,
    pub run: RunSummary,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    /// Grid points with the first axis varying slowest, seeds ascending
    /// within each point.
    pub rows: Vec<SweepRow>,
    /// Point with the highest mean validation accuracy, with its mean
    /// validation and test accuracy.
    pub best: (Vec<(String, String)>, f64, f64),
    pub csv: String,
    pub summary: String,
    pub manifest: String,
}

fn grid_points(s: &Settings) -> Vec<Vec<(String, String)>> {
    let mut points = vec![Vec::new()];
    for axis in &s.grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((axis.key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

/// Trains at every grid point for every seed. Writes `sweep.csv`,
/// `best.txt` and `manifest.txt` under `out`.
pub fn cmd_sweep(settings: &Settings, out: Option<&Path>) -> CliResult<SweepOutput> {
    if settings.grid.is_empty() {
        return Err(CliError::Usage("sweep needs a non-empty --grid".into()));
    }
    if settings.seeds.is_empty() {
        return Err(CliError::Usage("sweep needs at least one seed".into()));
    }
    if settings.data.len() != 1 {
        return Err(CliError::Usage(format!(
            "sweep takes exactly one dataset, got {}",
            settings.data.len()
        )));
    }
    let (bundles, resolved) = load_all(settings)?;
    let points = grid_points(&resolved);
    let mut jobs = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let mut at = resolved.clone();
        for (k, v) in p {
            at.apply(k, v)?;
        }
        for &seed in &resolved.seeds {
            jobs.push((i, at.train.clone(), seed));
        }
    }
    let summaries = run_jobs(&jobs, |(_, cfg, seed)| {
        let cfg = TrainConfig {
            seed: *seed,
            ..cfg.clone()
        };
        let (_, record) = train(&bundles[0].graph, &cfg)?;
        Ok(summarize(*seed, &record))
    })?;

    let mut rows: Vec<(usize, SweepRow)> = jobs
        .iter()
        .zip(summaries)
        .map(|((i, _, _), run)| {
            (
                *i,
                SweepRow {
                    point: points[*i].clone(),
                    run,
                },
            )
        })
        .collect();
    rows.sort_by(|(a, ra), (b, rb)| a.cmp(b).then(ra.run.seed.cmp(&rb.run.seed)));

    let mut best: Option<(usize, f64, f64)> = None;
    for i in 0..points.len() {
        let runs: Vec<&RunSummary> = rows
            .iter()
            .filter(|(j, _)| *j == i)
            .map(|(_, r)| &r.run)
            .collect();
        let val = mean_std(&runs.iter().map(|r| r.val_acc).collect::<Vec<_>>()).0;
        let test = mean_std(&runs.iter().map(|r| r.test_acc).collect::<Vec<_>>()).0;
        if best.is_none_or(|(_, bv, bt)| val > bv || (val == bv && test > bt)) {
            best = Some((i, val, test));
        }
    }
    let (bi, bv, bt) = best.expect("grid has at least one point");
    let rows: Vec<SweepRow> = rows.into_iter().map(|(_, r)| r).collect();

    let mut csv = String::new();
    for axis in &resolved.grid {
        let _ = write!(csv, "{},", axis.key);
    }
    csv.push_str("seed,val_acc,test_acc,active_frac\n");
    for r in &rows {
        for (_, v) in &r.point {
            let _ = write!(csv, "{v},");
        }
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            r.run.seed, r.run.val_acc, r.run.test_acc, r.run.active_frac
        );
    }
    let point_text = |p: &[(String, String)]| {
        p.iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let summary = format!(
        "best {} mean_val={bv:.4} mean_test={bt:.4} over {} seeds\n",
        point_text(&points[bi]),
        resolved.seeds.len()
    );
    let manifest = manifest("sweep", out, &bundles, &resolved);
    write_outputs(
        out,
        &[
            ("sweep.csv", &csv),
            ("best.txt", &summary),
            ("manifest.txt", &manifest),
        ],
    )?;
    Ok(SweepOutput {
        rows,
        best: (points[bi].clone(), bv, bt),
        csv,
        summary,
        manifest,
    })
}

/// Writes the synthetic graph for `spec` (e.g. `sbm:3x100`) to `path`.
pub fn cmd_gen_sbm(settings: &Settings, spec: &str, path: &Path) -> CliResult<String> {
    if !is_synthetic(spec) {
        return Err(CliError::Usage(format!("expected sbm:BxS, got `{spec}`")));
    }
    let bundle = load_source(spec, settings)?;
    bundle.save(path)?;
    Ok(format!(
        "wrote {} nodes={} edges={} checksum={}\n",
        path.display(),
        bundle.graph.num_nodes(),
        bundle.graph.num_edges(),
        bundle.checksum
    ))
}

/// Loads and validates a dataset file and describes it.
pub fn cmd_validate_data(path: &Path) -> CliResult<String> {
    let bundle = load_file(path)?;
    let g = &bundle.graph;
    let s = g.splits();
    let mut out = String::new();
    let _ = writeln!(out, "name={}", bundle.name);
    let _ = writeln!(out, "source={}", bundle.source);
    let _ = writeln!(out, "nodes={}", g.num_nodes());
    let _ = writeln!(out, "edges={}", g.num_edges());
    if let Some(d) = bundle.directed_edges {
        let _ = writeln!(out, "directed_edges={d}");
    }
    let _ = writeln!(out, "classes={}", g.num_classes());
    let _ = writeln!(out, "features={}", g.feature_dim());
    let _ = writeln!(
        out,
        "train={} val={} test={}",
        s.train.count(),
        s.val.count(),
        s.test.count()
    );
    let _ = writeln!(out, "checksum={} (verified)", bundle.checksum);
    for w in &bundle.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    Ok(out)
}
