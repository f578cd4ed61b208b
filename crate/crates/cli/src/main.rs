use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use haarpsi::harness::{
    build_report, load_manifest, score_manifest, scatter_file_name, write_scatter_csv, ManifestEntry, MetricSpec,
    Polarity, ReportOptions,
};
use haarpsi::tuner::{tune_manifest, TuneCache, TuneConfig};
use haarpsi::{decode_image, haarpsi, Boundary, ColorMode, FilterBank2D, MetricParams, Orientation, WaveletId};

#[derive(Parser, Debug)]
#[command(name = "haarpsi", version, about = "Haar wavelet-based perceptual similarity index")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score a distorted image against a reference
    Compare(CompareArgs),
    /// Score every row of a manifest with one or more metrics
    Batch(BatchArgs),
    /// Correlate metric scores with opinion scores
    Evaluate(EvaluateArgs),
    /// Select C and alpha by grid search and Nelder-Mead refinement
    Tune(TuneArgs),
    /// Print the 2D filter taps of a wavelet at one scale
    Filters(FiltersArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BoundaryArg {
    Zero,
    Symmetric,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Zero => Boundary::Zero,
            BoundaryArg::Symmetric => Boundary::Symmetric,
        }
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {s}"))
    }
}

fn fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in (0, 1], got {s}"))
    }
}

fn metric_spec(s: &str) -> Result<MetricSpec, String> {
    s.parse().map_err(|e: haarpsi::Error| e.to_string())
}

fn wavelet(s: &str) -> Result<WaveletId, String> {
    s.parse().map_err(|e: haarpsi::Error| e.to_string())
}

#[derive(Args, Debug)]
struct MetricFlags {
    /// Use the colour variant (HaarPSIC) instead of grayscale
    #[arg(long)]
    color: bool,
    /// Wavelet family
    #[arg(long, default_value = "haar", value_parser = wavelet)]
    wavelet: WaveletId,
    /// Border handling of the convolutions
    #[arg(long, value_enum, default_value = "zero")]
    boundary: BoundaryArg,
}

impl MetricFlags {
    fn params(&self) -> MetricParams {
        MetricParams::default()
            .with_wavelet(self.wavelet)
            .with_boundary(self.boundary.into())
            .with_color_mode(if self.color { ColorMode::Color } else { ColorMode::Grayscale })
    }
}

#[derive(Args, Debug)]
struct CompareArgs {
    reference: PathBuf,
    distorted: PathBuf,
    #[command(flatten)]
    metric: MetricFlags,
    /// Similarity stabilising constant
    #[arg(long = "c", default_value_t = haarpsi::DEFAULT_C, value_parser = positive)]
    c: f64,
    /// Logistic steepness
    #[arg(long, default_value_t = haarpsi::DEFAULT_ALPHA, value_parser = positive)]
    alpha: f64,
    /// Write normalised similarity and weight maps into this directory
    #[arg(long, value_name = "DIR")]
    dump_maps: Option<PathBuf>,
    /// Print a JSON object instead of the bare score
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct JobsFlag {
    /// Worker threads used for scoring
    #[arg(long, env = "HAARPSI_JOBS")]
    jobs: Option<usize>,
}

impl JobsFlag {
    fn get(&self) -> usize {
        self.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}

#[derive(Args, Debug)]
struct BatchArgs {
    manifest: PathBuf,
    /// Comma-separated metric labels (haarpsi, haarpsic, psnr, haarpsi-<wavelet>, ...)
    #[arg(long, value_delimiter = ',', default_value = "haarpsi", value_parser = metric_spec)]
    metrics: Vec<MetricSpec>,
    /// Output CSV (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    jobs: JobsFlag,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "haarpsi", value_parser = metric_spec)]
    metrics: Vec<MetricSpec>,
    /// Metric every other metric is tested against
    #[arg(long, value_parser = metric_spec)]
    baseline: Option<MetricSpec>,
    /// Report JSON path
    #[arg(long)]
    report: Option<PathBuf>,
    /// Directory for per-database scatter CSVs
    #[arg(long, value_name = "DIR")]
    scatter: Option<PathBuf>,
    /// Also write the score CSV
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Databases whose opinion scores are DMOS (higher is worse)
    #[arg(long, value_delimiter = ',')]
    dmos: Vec<String>,
    #[command(flatten)]
    jobs: JobsFlag,
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[arg(required = true)]
    manifests: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.25, value_parser = fraction)]
    subset_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5.0, value_parser = positive)]
    c_step: f64,
    #[arg(long, default_value_t = 0.5, value_parser = positive)]
    alpha_step: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// TuneResult JSON path
    #[arg(long, default_value = "tune.json")]
    out: PathBuf,
    /// Keep decoded images instead of filter responses (slower, less memory)
    #[arg(long)]
    low_memory: bool,
    #[command(flatten)]
    metric: MetricFlags,
    #[command(flatten)]
    jobs: JobsFlag,
}

#[derive(Args, Debug)]
struct FiltersArgs {
    #[arg(long, default_value = "haar", value_parser = wavelet)]
    wavelet: WaveletId,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    scale: u8,
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn compare(args: &CompareArgs) -> anyhow::Result<()> {
    let params = MetricParams {
        c: args.c,
        alpha: args.alpha,
        ..args.metric.params()
    };
    let reference = decode_image(&args.reference)?;
    let distorted = decode_image(&args.distorted)?;
    let result = haarpsi(&reference, &distorted, &params, args.dump_maps.is_some())?;
    if let (Some(dir), Some(maps)) = (&args.dump_maps, &result.maps) {
        haarpsi::maps::write_maps(maps, dir)?;
    }
    if args.json {
        let out = serde_json::json!({
            "score": result.score,
            "C": params.c,
            "alpha": params.alpha,
            "wavelet": params.wavelet,
            "color_mode": params.color_mode,
            "boundary": params.boundary,
            "degenerate_weights": result.degenerate_weights,
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("{:.6}", result.score);
    }
    Ok(())
}

fn load_nonempty(path: &Path) -> anyhow::Result<Vec<ManifestEntry>> {
    let entries = load_manifest(path)?;
    if entries.is_empty() {
        bail!("{}: no entries", path.display());
    }
    Ok(entries)
}

fn report_row_errors(table: &haarpsi::harness::ScoreTable) {
    for row in table.rows.iter().filter(|r| !r.is_ok()) {
        eprintln!("warning: {}", row.error.as_deref().unwrap_or_default());
    }
}

fn batch(args: &BatchArgs) -> anyhow::Result<()> {
    let entries = load_nonempty(&args.manifest)?;
    let table = score_manifest(&entries, &args.metrics, args.jobs.get())?;
    report_row_errors(&table);
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            table.write_csv(&mut w)?;
            w.flush()?;
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> anyhow::Result<()> {
    let mut metrics = args.metrics.clone();
    if let Some(b) = &args.baseline {
        if !metrics.contains(b) {
            metrics.push(*b);
        }
    }
    let entries = load_nonempty(&args.manifest)?;
    let table = score_manifest(&entries, &metrics, args.jobs.get())?;
    report_row_errors(&table);
    if let Some(path) = &args.scores {
        let mut w = create(path)?;
        table.write_csv(&mut w)?;
        w.flush()?;
    }
    let options = ReportOptions {
        baseline: args.baseline.map(|b| b.label()),
        polarity: args.dmos.iter().map(|d| (d.clone(), Polarity::Dmos)).collect(),
        ..ReportOptions::default()
    };
    let report = build_report(&table, &options)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    if let Some(dir) = &args.scatter {
        for series in &report.scatter {
            let path = dir.join(scatter_file_name(&series.database));
            let mut w = create(&path)?;
            write_scatter_csv(series, &mut w)?;
            w.flush()?;
        }
    }

    let mut out = io::stdout().lock();
    writeln!(out, "{:<16} {:<16} {:>6} {:>9} {:>9} {:>9}", "database", "metric", "n", "srocc", "pearson", "kendall")?;
    for (db, cells) in &report.per_database {
        for (metric, c) in cells {
            writeln!(
                out,
                "{db:<16} {metric:<16} {:>6} {:>9.6} {:>9.6} {:>9.6}",
                c.n, c.srocc, c.pearson, c.kendall
            )?;
        }
    }
    for s in report.significance.iter().filter(|s| s.distortion.is_none()) {
        writeln!(
            out,
            "{}: {} vs {}: z = {:.3}{}",
            s.database,
            s.metric,
            s.baseline,
            s.z_stat,
            if s.significant_05 { " (significant)" } else { "" }
        )?;
    }
    Ok(())
}

fn tune(args: &TuneArgs) -> anyhow::Result<()> {
    let mut entries = Vec::new();
    for m in &args.manifests {
        entries.extend(load_manifest(m)?);
    }
    if entries.is_empty() {
        bail!("no entries in the given manifests");
    }
    let cfg = TuneConfig {
        c_step: args.c_step,
        alpha_step: args.alpha_step,
        subset_fraction: args.subset_fraction,
        seed: args.seed,
        max_iters: args.max_iters,
        tol: args.tol,
        ..TuneConfig::default()
    };
    let cache = if args.low_memory { TuneCache::Images } else { TuneCache::Responses };
    let result = match tune_manifest(&cfg, &entries, &args.metric.params(), cache, args.jobs.get()) {
        Ok(r) => r,
        Err(haarpsi::Error::Tuning { message, trace }) => {
            let mut trace_path = args.out.clone().into_os_string();
            trace_path.push(".trace.json");
            let trace_path = PathBuf::from(trace_path);
            write_json(&trace_path, &trace)?;
            bail!("tuning failed: {message} (trace written to {})", trace_path.display());
        }
        Err(e) => return Err(e.into()),
    };
    write_json(&args.out, &result)?;
    println!("C = {}", result.c_final);
    println!("alpha = {:.1}", result.alpha_final);
    for (db, srocc) in &result.full_set_srocc {
        match srocc {
            Some(r) => println!("{db}: SROCC {r:.6}"),
            None => println!("{db}: SROCC undefined"),
        }
    }
    Ok(())
}

/// `%.12g`-style formatting.
fn sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').unwrap_or((&sci, "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..12).contains(&exp) {
        trim(&format!("{v:.*}", (11 - exp) as usize))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

fn filters(args: &FiltersArgs) -> anyhow::Result<()> {
    let bank = FilterBank2D::shared(args.wavelet);
    let mut out = io::stdout().lock();
    for (k, orientation) in Orientation::BOTH.iter().enumerate() {
        let kernel = bank.filter(*orientation, args.scale as usize).to_kernel();
        let name = match orientation {
            Orientation::Horizontal => "horizontal",
            Orientation::Vertical => "vertical",
        };
        if k > 0 {
            writeln!(out)?;
        }
        writeln!(out, "# {name} {} scale {} ({}x{})", args.wavelet, args.scale, kernel.rows(), kernel.cols())?;
        for r in 0..kernel.rows() {
            let line: Vec<String> = (0..kernel.cols()).map(|c| sig12(kernel.get(r, c))).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let outcome = match &cli.command {
        Command::Compare(a) => compare(a),
        Command::Batch(a) => batch(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Tune(a) => tune(a),
        Command::Filters(a) => filters(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
