//! The `skna` command-line tool: argument definitions and the commands
//! behind them. Every command writes through temp-then-rename, records a
//! `manifest.json`, and removes what it wrote if it fails part way.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SknaError};
use crate::fsio::{read_to_string, write_atomic};
use crate::indices::{build_index_table_with, BaselinePolicy, IndexTable};
use crate::pipeline::{compute_kinds, default_config, Notch, PipelineConfig, SknaKind, SknaSeries};
use crate::plot::{render_svg, Panel, Shade};
use crate::provenance::RunManifest;
use crate::recording::{load_annotations, load_recording, sidecar_path, RecordingFormat, Task};
use crate::stats::{compare_rates, evaluate_table, EvaluateOptions, IccForm, ResultsGrid};
use crate::synth::{annotation_path, participant_id, write_cohort, SynthSpec};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(
    name = "skna",
    version,
    about = "SKNA extraction from ECG and cross-rate evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort from a TOML spec.
    Synth(SynthArgs),
    /// Write iSKNA/TVSKNA series for one recording.
    Extract(ExtractArgs),
    /// Build the per-segment index table for a set of recordings.
    Indices(IndicesArgs),
    /// Mixed-model statistics, AUC and ICC for an index table.
    Evaluate(EvaluateArgs),
    /// Compare results grids across sampling rates.
    CompareRates(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Csv,
    Binary,
}

impl From<FormatArg> for RecordingFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => RecordingFormat::Csv,
            FormatArg::Binary => RecordingFormat::RawBinary,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    /// Override `n_participants`.
    #[arg(long)]
    pub participants: Option<usize>,
    /// Override `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override `burst.amplitude_mv`.
    #[arg(long)]
    pub burst_amplitude: Option<f64>,
}

/// Pipeline options shared by `extract` and `indices`; flags override the
/// `--config` file, which overrides the built-in defaults.
#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// TOML file with `rates`, `kinds`, `smoothing_window_s`, `filter_order`,
    /// `notches_hz`, `notch_iskna` and a `[baseline]` table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub kinds: Option<Vec<String>>,
    #[arg(long)]
    pub smoothing_window: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub recording: PathBuf,
    /// Segment annotations; validated against the recording and shaded in plots.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write one SVG per channel overlaying the rates for each kind.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct IndicesArgs {
    /// Directory of recordings, each with a `<id>_annotations.csv` beside it.
    #[arg(long, conflicts_with_all = ["recording", "annotations"])]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub recording: Vec<PathBuf>,
    /// One per `--recording`, in the same order.
    #[arg(long)]
    pub annotations: Vec<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long)]
    pub baseline_gap: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long, default_value = "two-way")]
    pub icc_form: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Results grid CSV; repeat for grids written separately per rate.
    #[arg(long, required = true)]
    pub grid: Vec<PathBuf>,
    /// Index table, for per-segment correlations between rates.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Files a command has written. Unless [`Outputs::commit`] is reached they
/// are deleted on drop, together with the directory if this run created it.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir).map_err(|e| SknaError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
            committed: false,
        })
    }

    fn file(&mut self, name: impl AsRef<Path>) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn commit(mut self, mut manifest: RunManifest) -> Result<PathBuf> {
        let mut written: Vec<PathBuf> = self.files.iter().filter(|p| p.exists()).cloned().collect();
        written.sort();
        for f in &written {
            manifest.add_output(f)?;
        }
        let path = self.file(MANIFEST);
        manifest.write(&path)?;
        self.committed = true;
        Ok(path)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        if self.created_dir {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| {
        use std::io::Write;
        w.write_all(text.as_bytes())
    })
}

/// Reads a config file; a missing or unreadable one is a usage error.
fn read_config_file(path: &Path) -> Result<String> {
    read_to_string(path)
        .map_err(|e| SknaError::config(format!("cannot read {}: {e}", path.display())))
}

pub fn run(cli: Cli) -> Result<PathBuf> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Extract(a) => cmd_extract(&a),
        Command::Indices(a) => cmd_indices(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::CompareRates(a) => cmd_compare_rates(&a),
    }
}

pub fn cmd_synth(args: &SynthArgs) -> Result<PathBuf> {
    let mut spec: SynthSpec = toml::from_str(&read_config_file(&args.spec)?)
        .map_err(|e| SknaError::config(format!("{}: {e}", args.spec.display())))?;
    if let Some(n) = args.participants {
        spec.n_participants = n;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(a) = args.burst_amplitude {
        spec.burst.amplitude_mv = a;
    }
    spec.validate()?;
    let format = RecordingFormat::from(args.format);
    let mut out = Outputs::new(&args.out)?;
    for i in 0..spec.n_participants {
        let id = participant_id(i);
        let rec = out.file(format!("{id}.{}", format.extension()));
        if format == RecordingFormat::RawBinary {
            let side = sidecar_path(&rec);
            out.files.push(side);
        }
        let ann = annotation_path(&args.out, &id);
        out.files.push(ann);
    }
    out.file("ground_truth.json");
    write_cohort(&spec, &args.out, format)?;

    #[derive(Serialize)]
    struct Config<'a> {
        spec: &'a SynthSpec,
        format: FormatArg,
    }
    let manifest = RunManifest::new(
        "synth",
        vec![args.spec.clone()],
        &args.out,
        &Config {
            spec: &spec,
            format: args.format,
        },
    );
    out.commit(manifest)
}

/// Optional overrides read from `--config`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub rates: Option<Vec<f64>>,
    pub kinds: Option<Vec<SknaKind>>,
    pub smoothing_window_s: Option<f64>,
    pub filter_order: Option<usize>,
    pub notches_hz: Option<Vec<f64>>,
    pub notch_iskna: Option<bool>,
    pub baseline: Option<BaselinePolicy>,
}

/// Fully resolved pipeline settings; this is what manifests digest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub rates: Vec<f64>,
    pub kinds: Vec<SknaKind>,
    pub pipelines: Vec<PipelineConfig>,
    pub baseline: BaselinePolicy,
}

pub fn resolve(args: &PipelineArgs, baseline_gap: Option<f64>) -> Result<Resolved> {
    let file = match &args.config {
        Some(p) => toml::from_str::<RunConfig>(&read_config_file(p)?)
            .map_err(|e| SknaError::config(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    let rates = args
        .rates
        .clone()
        .or(file.rates)
        .unwrap_or_else(|| crate::pipeline::SUPPORTED_RATES.to_vec());
    let kinds = match &args.kinds {
        Some(k) => k
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<SknaKind>>>()?,
        None => file.kinds.unwrap_or_else(|| SknaKind::ALL.to_vec()),
    };
    if rates.is_empty() || kinds.is_empty() {
        return Err(SknaError::config(
            "at least one rate and one kind are required",
        ));
    }
    let unique: BTreeSet<u64> = rates.iter().map(|r| r.to_bits()).collect();
    if unique.len() != rates.len() {
        return Err(SknaError::config("duplicate rate"));
    }
    let pipelines = rates
        .iter()
        .map(|&r| {
            let mut cfg = default_config(r)?;
            if let Some(w) = args.smoothing_window.or(file.smoothing_window_s) {
                cfg.smoothing_window_s = w;
            }
            if let Some(o) = file.filter_order {
                cfg.filter_order = o;
            }
            if let Some(n) = &file.notches_hz {
                let q = crate::dsp::DEFAULT_NOTCH_Q;
                cfg.notches = n.iter().map(|&freq_hz| Notch { freq_hz, q }).collect();
            }
            if let Some(b) = file.notch_iskna {
                cfg.notch_iskna = b;
            }
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut baseline = file.baseline.unwrap_or_default();
    if let Some(g) = baseline_gap {
        baseline.gap_s = g;
    }
    if !(baseline.gap_s.is_finite() && baseline.gap_s >= 0.0) {
        return Err(SknaError::config(format!(
            "baseline gap {} must be >= 0",
            baseline.gap_s
        )));
    }
    Ok(Resolved {
        rates,
        kinds,
        pipelines,
        baseline,
    })
}

fn rate_label(rate: f64) -> String {
    format!("{rate}Hz")
}

pub fn series_file_name(participant: &str, channel: usize, rate: f64, kind: SknaKind) -> String {
    format!("{participant}_ch{channel}_{}_{kind}.csv", rate_label(rate))
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<PathBuf> {
    let resolved = resolve(&args.pipeline, None)?;
    let rec = load_recording(&args.recording, RecordingFormat::from_path(&args.recording))?;
    let annotations = match &args.annotations {
        Some(p) => {
            let anns = load_annotations(p)?;
            for a in &anns {
                rec.check_annotation(a)?;
            }
            anns
        }
        None => Vec::new(),
    };
    let units: Vec<(usize, &PipelineConfig)> = (0..rec.channels().len())
        .flat_map(|c| resolved.pipelines.iter().map(move |p| (c, p)))
        .collect();
    let computed: Vec<Vec<SknaSeries>> = units
        .par_iter()
        .map(|&(c, cfg)| compute_kinds(&rec.channels()[c].series, cfg, &resolved.kinds))
        .collect::<Result<_>>()?;

    let mut out = Outputs::new(&args.out)?;
    let pid = rec.participant_id();
    for (&(c, _), series) in units.iter().zip(&computed) {
        for s in series {
            let path = out.file(series_file_name(pid, c + 1, s.rate(), s.kind));
            write_atomic(&path, |w| s.write_csv(w))?;
        }
    }
    if args.plot {
        let shades: Vec<Shade> = annotations
            .iter()
            .filter(|a| a.label != Task::Baseline)
            .map(|a| Shade {
                start_s: a.start_s,
                end_s: a.end_s(),
                label: a.label.to_string(),
            })
            .collect();
        for (c, channel) in rec.channels().iter().enumerate() {
            let panels: Vec<Panel> = resolved
                .kinds
                .iter()
                .map(|&kind| Panel {
                    title: match kind {
                        SknaKind::Iskna => "iSKNA".to_string(),
                        SknaKind::Tvskna => "TVSKNA".to_string(),
                    },
                    traces: units
                        .iter()
                        .zip(&computed)
                        .filter(|((uc, _), _)| *uc == c)
                        .flat_map(|(_, ss)| ss.iter().filter(|s| s.kind == kind))
                        .map(|s| (format!("{} kHz", s.rate() / 1000.0), s.series.clone()))
                        .collect(),
                })
                .collect();
            let svg = render_svg(&format!("{pid} {}", channel.name), &panels, &shades);
            write_text(&out.file(format!("{pid}_ch{}.svg", c + 1)), &svg)?;
        }
    }
    let mut inputs = vec![args.recording.clone()];
    inputs.extend(args.annotations.clone());
    #[derive(Serialize)]
    struct Config<'a> {
        pipeline: &'a Resolved,
        plot: bool,
    }
    let manifest = RunManifest::new(
        "extract",
        inputs,
        &args.out,
        &Config {
            pipeline: &resolved,
            plot: args.plot,
        },
    );
    out.commit(manifest)
}

/// Recording files in `dir` that have a `<stem>_annotations.csv` beside them,
/// sorted by name.
pub fn discover_cohort(dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| SknaError::config(format!("cannot read {}: {e}", dir.display())))?;
    let mut found = Vec::new();
    for e in entries {
        let path = e.map_err(|e| SknaError::io(dir, e))?.path();
        let ext = path.extension().and_then(|x| x.to_str()).unwrap_or("");
        let stem = path.file_stem().and_then(|x| x.to_str()).unwrap_or("");
        if !matches!(ext, "csv" | "bin") || stem.ends_with("_annotations") {
            continue;
        }
        let ann = annotation_path(dir, stem);
        if ann.is_file() {
            found.push((path, ann));
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(SknaError::config(format!(
            "no recordings with annotation files found in {}",
            dir.display()
        )));
    }
    Ok(found)
}

pub const INDEX_TABLE: &str = "index_table.csv";
pub const EXCLUSIONS: &str = "exclusions.csv";

pub fn cmd_indices(args: &IndicesArgs) -> Result<PathBuf> {
    let resolved = resolve(&args.pipeline, args.baseline_gap)?;
    let pairs = match &args.data {
        Some(dir) => discover_cohort(dir)?,
        None => {
            if args.recording.is_empty() || args.recording.len() != args.annotations.len() {
                return Err(SknaError::config(
                    "give --data, or one --annotations per --recording",
                ));
            }
            args.recording
                .iter()
                .cloned()
                .zip(args.annotations.iter().cloned())
                .collect()
        }
    };
    let table = build_index_table_with(
        pairs.len(),
        |i| {
            let (r, a) = &pairs[i];
            Ok((
                load_recording(r, RecordingFormat::from_path(r))?,
                load_annotations(a)?,
            ))
        },
        &resolved.pipelines,
        &resolved.kinds,
        &resolved.baseline,
    )?;
    let mut out = Outputs::new(&args.out)?;
    table.save(&out.file(INDEX_TABLE))?;
    write_atomic(&out.file(EXCLUSIONS), |w| table.write_exclusions_csv(w))?;
    let mut manifest = RunManifest::new(
        "indices",
        pairs
            .iter()
            .flat_map(|(r, a)| [r.clone(), a.clone()])
            .collect(),
        &args.out,
        &resolved,
    );
    manifest.assumptions.push(resolved.baseline.describe());
    manifest.assumptions.push(format!(
        "{} rows, {} excluded segments",
        table.rows.len(),
        table.excluded.len()
    ));
    out.commit(manifest)
}

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_TXT: &str = "results.txt";

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<PathBuf> {
    let icc_form: IccForm = args.icc_form.parse()?;
    let table = IndexTable::load(&args.table)?;
    let opts = EvaluateOptions { icc_form };
    let grid = evaluate_table(&table, &opts)?;
    let mut out = Outputs::new(&args.out)?;
    write_atomic(&out.file(RESULTS_CSV), |w| {
        grid.write_csv(w)
            .map_err(|e| std::io::Error::other(e.to_string()))
    })?;
    write_text(&out.file(RESULTS_TXT), &grid.to_text_table())?;
    let mut manifest = RunManifest::new("evaluate", vec![args.table.clone()], &args.out, &opts);
    manifest.assumptions.push(format!(
        "{icc_form}; ICC floored at 0 in the text table, raw value kept in the CSV"
    ));
    let unavailable = grid.cells.iter().filter(|c| !c.is_available()).count();
    if unavailable > 0 {
        manifest
            .assumptions
            .push(format!("{unavailable} cells unavailable"));
    }
    out.commit(manifest)
}

pub const RATE_DELTAS: &str = "rate_deltas.csv";
pub const RATE_CORRELATIONS: &str = "rate_correlations.csv";
pub const RATE_SUMMARY: &str = "rate_summary.txt";

pub fn load_grid(path: &Path) -> Result<ResultsGrid> {
    let file = std::fs::File::open(path).map_err(|e| SknaError::io(path, e))?;
    ResultsGrid::read_csv(std::io::BufReader::new(file))
}

pub fn cmd_compare_rates(args: &CompareArgs) -> Result<PathBuf> {
    let grids = args
        .grid
        .iter()
        .map(|p| load_grid(p))
        .collect::<Result<Vec<_>>>()?;
    let table = args.table.as_deref().map(IndexTable::load).transpose()?;
    let cmp = compare_rates(&ResultsGrid::merge(grids), table.as_ref())?;
    let mut out = Outputs::new(&args.out)?;
    write_atomic(&out.file(RATE_DELTAS), |w| {
        cmp.write_deltas_csv(w)
            .map_err(|e| std::io::Error::other(e.to_string()))
    })?;
    if table.is_some() {
        write_atomic(&out.file(RATE_CORRELATIONS), |w| {
            cmp.write_correlations_csv(w)
                .map_err(|e| std::io::Error::other(e.to_string()))
        })?;
    }
    write_text(&out.file(RATE_SUMMARY), &cmp.summary())?;
    let mut inputs = args.grid.clone();
    inputs.extend(args.table.clone());
    #[derive(Serialize)]
    struct Config {
        reference_rate: f64,
        rates: Vec<f64>,
    }
    let manifest = RunManifest::new(
        "compare-rates",
        inputs,
        &args.out,
        &Config {
            reference_rate: cmp.rates[0],
            rates: cmp.rates.clone(),
        },
    );
    out.commit(manifest)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
