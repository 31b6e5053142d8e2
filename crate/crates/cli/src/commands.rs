use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ludict_core::archive::{bundle_checksums, load_bundle, save_bundle};
use ludict_core::dump::{write_binary, write_text};
use ludict_core::features::FeatureScheme;
use ludict_core::sizing::search_sizes;
use serde::Serialize;

use crate::bench;
use crate::error::invalid;
use crate::manifest::{CorpusManifest, Split};
use crate::pipeline::{
    classify_inputs, confusion, feature_records, manifest_inputs, path_inputs, scan_inputs, summarize_scan,
    train_manifest, training_signals, Extraction, InputFile, SizeSpec, TrainSettings, TRAIN_FRAGMENT_BYTES,
};
use crate::synth::{generate_container_corpus, generate_corpus, ContainerCorpusSpec, SyntheticSourceSpec};

#[derive(Parser, Debug)]
#[command(
    name = "ludict",
    version,
    about = "Byte-content classification with randomized LU dictionaries"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic corpus and its manifest.
    Synth(SynthArgs),
    /// Feature dumps.
    #[command(subcommand)]
    Features(FeaturesCommand),
    /// Dictionary size search.
    #[command(subcommand)]
    Sizes(SizesCommand),
    /// Train a dictionary bundle from a manifest.
    Train(TrainArgs),
    /// Classify files with a trained bundle.
    Classify(ClassifyArgs),
    /// Count payload-class fragments in container files.
    Scan(ScanArgs),
    /// Time training and classification on random matrices.
    Bench(BenchArgs),
}

#[derive(Subcommand, Debug)]
pub enum FeaturesCommand {
    /// Extract feature vectors to a dump file.
    Extract(ExtractArgs),
}

#[derive(Subcommand, Debug)]
pub enum SizesCommand {
    /// Build pairwise error matrices and pick one size per class.
    Search(SearchArgs),
}

fn parse_scheme(s: &str) -> Result<FeatureScheme, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub classes: usize,
    #[arg(long, default_value_t = 200)]
    pub files: usize,
    #[arg(long, default_value_t = 64 * 1024)]
    pub bytes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Generate the container corpus with planted payloads instead.
    #[arg(long)]
    pub containers: bool,
}

/// Files to process: a manifest split or explicit paths.
#[derive(Args, Debug)]
pub struct InputArgs {
    #[arg(long, conflicts_with = "paths")]
    pub manifest: Option<PathBuf>,
    /// Manifest split to use.
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    pub paths: Vec<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

impl InputArgs {
    fn inputs(&self) -> Result<Vec<InputFile>> {
        match &self.manifest {
            Some(p) => {
                let m = CorpusManifest::load(p)?;
                Ok(match self.split {
                    SplitArg::Train => manifest_inputs(&m, Split::Train),
                    SplitArg::Test => manifest_inputs(&m, Split::Test),
                    SplitArg::All => {
                        let mut v = manifest_inputs(&m, Split::Train);
                        v.extend(manifest_inputs(&m, Split::Test));
                        v
                    }
                })
            }
            None if self.paths.is_empty() => Err(invalid("give --manifest or at least one path")),
            None => Ok(path_inputs(&self.paths)),
        }
    }
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: FeatureScheme,
    /// Fragments per file; whole files when omitted.
    #[arg(long)]
    pub fragments: Option<usize>,
    #[arg(long, default_value_t = TRAIN_FRAGMENT_BYTES)]
    pub fragment_bytes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the sparse text form instead of binary records.
    #[arg(long)]
    pub text: bool,
}

/// Shared training flags.
#[derive(Args, Debug)]
pub struct TrainingArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_parser = parse_scheme, default_value = "mw")]
    pub scheme: FeatureScheme,
    /// `auto`, a size for every class, `label=size,...`, or a grid to search.
    #[arg(long, default_value = "auto")]
    pub k: SizeSpec,
    #[arg(long, default_value_t = 5)]
    pub l_extra: usize,
    /// Size of the one training fragment per file.
    #[arg(long, default_value_t = TRAIN_FRAGMENT_BYTES)]
    pub fragment_bytes: usize,
    /// Use whole files instead of one fragment per file.
    #[arg(long)]
    pub whole_file: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TrainingArgs {
    fn settings(&self) -> Result<TrainSettings> {
        let mut s = TrainSettings::new(self.scheme, self.k.clone(), self.seed);
        s.oversampling = self.l_extra;
        s.extraction = if self.whole_file {
            Extraction::WholeFile
        } else {
            Extraction::fragments(1, self.fragment_bytes)?
        };
        Ok(s)
    }
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Directory for error matrices and the chosen sizes.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Bundle file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    File,
    Fragments,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = Mode::Fragments)]
    pub mode: Mode,
    #[arg(long, default_value_t = 10)]
    pub fragments: usize,
    #[arg(long, default_value_t = 2000)]
    pub fragment_bytes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for confusion matrix and per-file reports.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    /// Label of the payload dictionary.
    #[arg(long)]
    pub payload: String,
    #[arg(long, default_value_t = 10)]
    pub threshold: usize,
    #[arg(long, default_value_t = 40)]
    pub fragments: usize,
    #[arg(long, default_value_t = 5000)]
    pub fragment_bytes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON-lines report file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Comma-separated `ROWSxCOLS` shapes.
    #[arg(long, default_value = "512x500,512x2000,4096x500")]
    pub sizes: String,
    /// Comma-separated dictionary sizes.
    #[arg(long, default_value = "10,50")]
    pub ranks: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    Ok(w.flush()?)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Features(FeaturesCommand::Extract(a)) => extract(a),
        Command::Sizes(SizesCommand::Search(a)) => sizes_search(a),
        Command::Train(a) => train(a),
        Command::Classify(a) => classify(a),
        Command::Scan(a) => scan(a),
        Command::Bench(a) => bench_cmd(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let m = if a.containers {
        let spec = ContainerCorpusSpec {
            seed: a.seed,
            ..ContainerCorpusSpec::default()
        };
        generate_container_corpus(&spec, &a.out)?
    } else {
        let spec = SyntheticSourceSpec::new(a.classes, a.files, a.bytes, a.seed);
        generate_corpus(&spec, &a.out)?
    };
    println!(
        "wrote {} files ({} train, {} test) and {}",
        m.entries.len(),
        m.split(Split::Train).count(),
        m.split(Split::Test).count(),
        a.out.join("manifest.json").display()
    );
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<()> {
    let inputs = a.input.inputs()?;
    let extraction = match a.fragments {
        Some(n) => Extraction::fragments(n, a.fragment_bytes)?,
        None => Extraction::WholeFile,
    };
    let records = feature_records(&inputs, a.scheme, extraction, a.seed)?;
    let f = fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut w = BufWriter::new(f);
    for r in &records {
        if a.text {
            write_text(&mut w, r)?;
        } else {
            write_binary(&mut w, r)?;
        }
    }
    w.flush()?;
    println!("wrote {} records to {}", records.len(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct Heatmap<'a> {
    class_a: &'a str,
    class_b: &'a str,
    grid: &'a [usize],
    errors: &'a [Vec<Option<usize>>],
}

fn sizes_search(a: SearchArgs) -> Result<()> {
    let settings = a.training.settings()?;
    let grid = match &settings.sizes {
        SizeSpec::Auto(g) => g.clone(),
        _ => return Err(invalid("sizes search takes --k auto or a grid such as 10,20,40")),
    };
    let manifest = CorpusManifest::load(&a.training.manifest)?;
    let classes = training_signals(&manifest, settings.scheme, settings.extraction, settings.seed)?;
    let out = search_sizes(&classes, grid.as_deref(), &settings.sizing_config())?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut heatmaps = Vec::new();
    for m in &out.matrices {
        write_file(
            &a.out.join(format!("errors_{}_{}.csv", m.class_a, m.class_b)),
            m.to_csv(),
        )?;
        heatmaps.push(Heatmap {
            class_a: &m.class_a,
            class_b: &m.class_b,
            grid: &m.grid,
            errors: &m.errors,
        });
    }
    write_file(
        &a.out.join("errors.json"),
        serde_json::to_string_pretty(&heatmaps)?,
    )?;
    let summary = serde_json::json!({
        "grid": out.grid,
        "sizes": out.assignment.sizes,
        "total_error": out.assignment.total_error,
        "strategy": format!("{:?}", out.assignment.strategy),
        "global_validation_errors": out.evaluation.global_errors,
        "validation_signals": out.evaluation.validation_signals,
        "numerical_ranks": out.numerical_ranks,
    });
    write_file(&a.out.join("sizes.json"), serde_json::to_string_pretty(&summary)?)?;
    println!("grid {:?}", out.grid);
    for (l, k) in &out.assignment.sizes {
        println!("{l}\t{k}");
    }
    println!(
        "pairwise validation errors {}; with all dictionaries {}/{}",
        out.assignment.total_error, out.evaluation.global_errors, out.evaluation.validation_signals
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let settings = a.training.settings()?;
    let manifest = CorpusManifest::load(&a.training.manifest)?;
    let out = train_manifest(&manifest, &settings)?;
    save_bundle(&out.dictionaries, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(s) = &out.sizing {
        println!("size grid {:?}", s.grid);
    }
    for (label, sum) in bundle_checksums(&out.dictionaries)? {
        println!("{label}\tk={}\tchecksum={sum:016x}", out.sizes[&label]);
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn classify(a: ClassifyArgs) -> Result<()> {
    let set = load_bundle(&a.bundle).with_context(|| format!("loading {}", a.bundle.display()))?;
    let inputs = a.input.inputs()?;
    let extraction = match a.mode {
        Mode::File => Extraction::WholeFile,
        Mode::Fragments => Extraction::fragments(a.fragments, a.fragment_bytes)?,
    };
    let reports = classify_inputs(&inputs, &set, extraction, a.seed)?;
    let cm = confusion(&reports, &set);
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_file(&dir.join("confusion.csv"), cm.to_csv()?)?;
        write_file(&dir.join("confusion.json"), cm.to_json()?)?;
        write_json_lines(&dir.join("reports.jsonl"), &reports)?;
    }
    if cm.total() > 0 {
        print!("{}", cm.render());
        println!("accuracy {:.4} ({}/{})", cm.accuracy(), cm.correct(), cm.total());
    } else {
        for r in &reports {
            println!("{}\t{}\tmargin={:.6}", r.path, r.predicted, r.margin);
        }
    }
    Ok(())
}

fn scan(a: ScanArgs) -> Result<()> {
    let set = load_bundle(&a.bundle).with_context(|| format!("loading {}", a.bundle.display()))?;
    let inputs = a.input.inputs()?;
    let extraction = Extraction::fragments(a.fragments, a.fragment_bytes)?;
    let files = scan_inputs(&inputs, &set, &a.payload, a.threshold, extraction, a.seed)?;
    if let Some(p) = &a.out {
        write_json_lines(p, &files)?;
    }
    for f in &files {
        println!(
            "{}\t{}/{}\t{}",
            f.path,
            f.payload_fragments,
            f.fragments,
            if f.flagged { "FLAGGED" } else { "clean" }
        );
    }
    if let Some(s) = summarize_scan(&files, &a.payload) {
        println!(
            "detected {}/{} ({:.1}%), false alarms {}/{} ({:.1}%)",
            s.detected,
            s.positives,
            100.0 * s.detection_rate,
            s.false_alarms,
            s.negatives,
            100.0 * s.false_alarm_rate
        );
    }
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let shapes = a
        .sizes
        .split(',')
        .map(bench::parse_shape)
        .collect::<Result<Vec<_>>>()?;
    let ranks = a
        .ranks
        .split(',')
        .map(|r| {
            r.trim()
                .parse::<usize>()
                .map_err(|_| invalid(format!("bad rank {r:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = bench::run(&shapes, &ranks, a.seed)?;
    print!("{}", bench::render(&rows));
    if let Some(p) = &a.out {
        write_file(p, serde_json::to_string_pretty(&rows)?)?;
    }
    Ok(())
}
