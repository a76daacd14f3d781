use std::error::Error as StdError;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dmdforge_core::composer::dataset::DEFAULT_MIN_AREA_FRACTION;
use dmdforge_core::composer::{
    curate_backgrounds, generate_dataset, load_foregrounds, read_manifest, CommandHarmonizer, ComposeJob, FopaScorer,
    HarmonizeHook, Harmonizer, IdentityHarmonizer, PlacementScorer, RandomScorer, ScorerKind,
};
use dmdforge_core::dictionaries::{save_dictionary, DictionarySpec};
use dmdforge_core::display::roi::PromptPicker;
use dmdforge_core::display::{
    define_rois_in_file, write_display_batch, DisplayIndexEntry, DisplayTemplate, FontSet, DISPLAY_INDEX_FILE,
};
use dmdforge_core::evaluation::{run_benchmark, ScoringOptions, DEFAULT_TAU};
use dmdforge_core::labeling::{
    annotate_interactive, annotate_real, label_annotations, label_dataset, read_annotations, write_annotations,
    write_pairs, PairFormat, TemplateSet,
};
use dmdforge_core::pipeline::{run_pipeline, validate_config, PipelineError, RunOptions, Stage};
use dmdforge_core::renderer::batch::{read_render_records, render_batch, RenderBatch};
use dmdforge_core::renderer::backend::BLENDER_ENV;
use dmdforge_core::renderer::{load_device_registry, BackendKind, Palette, Passes, RenderRanges, DEFAULT_MAX_ATTEMPTS};
use dmdforge_core::rng::{stage, stream};
use dmdforge_core::sample::write_sample_project;

#[derive(Parser)]
#[command(name = "dmdforge", version, about = "Synthetic VQA datasets of digital measurement devices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Value dictionaries.
    #[command(subcommand)]
    Dict(DictCommand),
    /// Synthetic display images.
    #[command(subcommand)]
    Display(DisplayCommand),
    /// Render device foregrounds with masks.
    Render(RenderArgs),
    /// Paste foregrounds onto backgrounds.
    Compose(ComposeArgs),
    /// Emit question/answer pairs.
    Label(LabelArgs),
    /// Record readings of real images.
    Annotate(AnnotateArgs),
    /// Score model predictions.
    Eval(EvalArgs),
    /// Run pipeline stages from a config file.
    Run(RunArgs),
    /// Check a config file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a small sample project that runs on the mock backend.
    Init { dir: PathBuf },
}

#[derive(Subcommand)]
enum DictCommand {
    /// Generate `<name>.txt` from a spec file, or from every spec in a directory.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum DisplayCommand {
    /// Generate displays for one template.
    Gen {
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        dicts: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// TTF/OTF directory; the built-in seven-segment faces otherwise.
        #[arg(long)]
        fonts: Option<PathBuf>,
    },
    /// Define a template's ROIs by typing rectangles at a prompt.
    Rois {
        #[arg(long)]
        template: PathBuf,
    },
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    devices: PathBuf,
    /// Directory holding displays.jsonl and the display images.
    #[arg(long)]
    displays: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// `blender` reads the engine path from the DMDFORGE_BLENDER variable.
    #[arg(long, default_value = "mock")]
    backend: BackendKind,
    /// JSON file with render ranges; defaults otherwise.
    #[arg(long)]
    ranges: Option<PathBuf>,
    #[arg(long)]
    palette: Option<PathBuf>,
    /// Device to leave out; repeatable.
    #[arg(long)]
    exclude: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    max_attempts: usize,
}

#[derive(Args)]
struct ComposeArgs {
    /// Render output root containing renders.csv.
    #[arg(long)]
    fg: PathBuf,
    #[arg(long)]
    bg: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value = "random")]
    scorer: ScorerKind,
    /// Placement model program for `--scorer fopa`.
    #[arg(long)]
    fopa: Option<PathBuf>,
    /// Leading argument for the placement model; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    fopa_arg: Vec<String>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MIN_AREA_FRACTION)]
    min_fraction: f64,
    #[arg(long)]
    harmonize: bool,
    /// Harmonization program; the composite passes through unchanged without one.
    #[arg(long)]
    harmonizer: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Full,
    OneWord,
}

impl From<FormatArg> for PairFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Full => PairFormat::Full,
            FormatArg::OneWord => PairFormat::OneWord,
        }
    }
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long, required_unless_present = "annotations", requires = "records")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    records: Option<PathBuf>,
    /// Annotation JSONL of real images, instead of a manifest.
    #[arg(long, conflicts_with_all = ["manifest", "records"])]
    annotations: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "full")]
    format: FormatArg,
    #[arg(long, default_value_t = 1)]
    per_image: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnnotateArgs {
    /// CSV with columns image, device, mode, measurement_type, value, unit.
    #[arg(long, conflicts_with = "images")]
    csv: Option<PathBuf>,
    /// Images to annotate at the prompt.
    #[arg(long, num_args = 1.., required_unless_present = "csv")]
    images: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    /// Ground truths may list alternatives separated by `|`.
    #[arg(long)]
    multi_truth: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated subset of dict,display,render,compose,label.
    #[arg(long, value_delimiter = ',')]
    stages: Vec<Stage>,
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    backend: Option<BackendKind>,
}

/// Failures split by exit code: bad input is 2, a failed stage is 3.
enum Failure {
    Config(Box<dyn StdError>),
    Stage(Box<dyn StdError>),
}

impl Failure {
    fn config(e: impl Into<Box<dyn StdError>>) -> Self {
        Failure::Config(e.into())
    }

    fn stage(e: impl Into<Box<dyn StdError>>) -> Self {
        Failure::Stage(e.into())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_) => Failure::config(e),
            _ => Failure::stage(e),
        }
    }
}

fn report(e: &dyn StdError) -> String {
    let mut msg = e.to_string();
    let mut src = e.source();
    while let Some(s) = src {
        let text = s.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
        src = s.source();
    }
    msg
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {}", report(e.as_ref()));
            ExitCode::from(2)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {}", report(e.as_ref()));
            ExitCode::from(3)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Dict(DictCommand::Gen { spec, out }) => dict_gen(&spec, &out),
        Command::Display(DisplayCommand::Gen {
            template,
            dicts,
            count,
            seed,
            out,
            fonts,
        }) => display_gen(&template, &dicts, count, seed, &out, fonts.as_deref()),
        Command::Display(DisplayCommand::Rois { template }) => {
            let stdin = io::stdin();
            let mut picker = PromptPicker::new(stdin.lock(), io::stderr());
            let rois = define_rois_in_file(&template, &mut picker).map_err(Failure::stage)?;
            println!("{} ROIs stored in {}", rois.len(), template.display());
            Ok(())
        }
        Command::Render(args) => render(args),
        Command::Compose(args) => compose(args),
        Command::Label(args) => label(args),
        Command::Annotate(args) => annotate(args),
        Command::Eval(args) => eval(args),
        Command::Run(args) => {
            let config = validate_config(&args.config).map_err(Failure::config)?;
            let opts = RunOptions {
                stages: args.stages,
                resume: args.resume,
                backend: args.backend,
            };
            for summary in run_pipeline(&config, &opts)? {
                println!("{summary}");
            }
            Ok(())
        }
        Command::Validate { config } => {
            validate_config(&config).map_err(Failure::config)?;
            println!("{}: ok", config.display());
            Ok(())
        }
        Command::Init { dir } => {
            let config = write_sample_project(&dir).map_err(Failure::config)?;
            println!("sample project written; run `dmdforge run --config {}`", config.display());
            Ok(())
        }
    }
}

fn dict_gen(spec: &Path, out: &Path) -> Result<(), Failure> {
    let specs = if spec.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(spec)
            .map_err(Failure::config)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        v.sort();
        v
    } else {
        vec![spec.to_owned()]
    };
    let specs = specs
        .iter()
        .map(|p| DictionarySpec::load(p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::config)?;
    fs::create_dir_all(out).map_err(Failure::stage)?;
    for s in specs {
        let dict = s.generate().map_err(Failure::stage)?;
        let path = out.join(format!("{}.txt", dict.name()));
        save_dictionary(&dict, &path).map_err(Failure::stage)?;
        println!("{}: {} entries", path.display(), dict.len());
    }
    Ok(())
}

fn display_gen(
    template_path: &Path,
    dicts: &Path,
    count: usize,
    seed: u64,
    out: &Path,
    fonts: Option<&Path>,
) -> Result<(), Failure> {
    let template = DisplayTemplate::load(template_path).map_err(Failure::config)?;
    let dictionaries = dmdforge_core::dictionaries::load_dictionary_dir(dicts).map_err(Failure::config)?;
    let fonts = match fonts {
        Some(dir) => FontSet::from_dir(dir).map_err(Failure::config)?,
        None => FontSet::builtin(),
    };
    let device = template.metadata.device_name(template_path);
    let mut rng = stream(seed, &[stage::DISPLAY, 0]);
    let entries = write_display_batch(&template, &device, &dictionaries, &fonts, count, &mut rng, out)
        .map_err(Failure::stage)?;
    println!(
        "{} displays for {device}/{} in {}",
        entries.len(),
        template.metadata.mode,
        out.display()
    );
    Ok(())
}

fn render(a: RenderArgs) -> Result<(), Failure> {
    let devices = load_device_registry(&a.devices).map_err(Failure::config)?;
    let displays = DisplayIndexEntry::read_all(&a.displays.join(DISPLAY_INDEX_FILE)).map_err(Failure::config)?;
    let ranges = match &a.ranges {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(Failure::config)?;
            serde_json::from_str::<RenderRanges>(&text).map_err(Failure::config)?
        }
        None => RenderRanges::default(),
    };
    ranges.validate().map_err(Failure::config)?;
    let palette = match &a.palette {
        Some(p) => Palette::load(p).map_err(Failure::config)?,
        None => Palette::default(),
    };
    let engine = a.backend.create().map_err(|e| {
        Failure::config(format!("{e} (set {BLENDER_ENV} to the engine binary)"))
    })?;
    let batch = RenderBatch {
        devices: &devices,
        displays: &displays,
        displays_dir: &a.displays,
        ranges: &ranges,
        palette: &palette,
        exclude: &a.exclude,
        count: a.count,
        seed: a.seed,
        workers: a.workers,
        max_attempts: a.max_attempts,
        passes: Passes::default(),
    };
    let summary = render_batch(&batch, engine.as_ref(), &a.out).map_err(Failure::stage)?;
    println!(
        "render: {} accepted, {} skipped, {} blurred",
        summary.records.len(),
        summary.skipped,
        summary.blurred()
    );
    Ok(())
}

fn compose(a: ComposeArgs) -> Result<(), Failure> {
    let foregrounds = load_foregrounds(&a.fg).map_err(Failure::config)?;
    let backgrounds = curate_backgrounds(&a.bg).map_err(Failure::config)?;
    let scorer: Box<dyn PlacementScorer> = match a.scorer {
        ScorerKind::Random => Box::new(RandomScorer::default()),
        ScorerKind::Fopa => {
            let program = a.fopa.ok_or_else(|| Failure::config("--scorer fopa needs --fopa <program>"))?;
            Box::new(FopaScorer::new(program, a.fopa_arg))
        }
    };
    let harmonize = if a.harmonize {
        let adapter: Arc<dyn Harmonizer> = match a.harmonizer {
            Some(program) => Arc::new(CommandHarmonizer { program, args: Vec::new() }),
            None => Arc::new(IdentityHarmonizer),
        };
        HarmonizeHook::Enabled(Some(adapter))
    } else {
        HarmonizeHook::Disabled
    };
    if a.workers == 0 {
        return Err(Failure::config("--workers must be at least 1"));
    }
    let job = ComposeJob {
        foregrounds: &foregrounds,
        backgrounds: &backgrounds,
        scorer: scorer.as_ref(),
        count: a.n,
        seed: a.seed,
        workers: a.workers,
        min_area_fraction: a.min_fraction,
        harmonize,
    };
    let records = generate_dataset(&job, &a.out).map_err(Failure::stage)?;
    println!(
        "compose: {} composites, {} clamped",
        records.len(),
        records.iter().filter(|r| r.clamped).count()
    );
    Ok(())
}

fn label(a: LabelArgs) -> Result<(), Failure> {
    let templates = match &a.templates {
        Some(p) => TemplateSet::load(p).map_err(Failure::config)?,
        None => TemplateSet::builtin(),
    };
    let format = PairFormat::from(a.format);
    let pairs = match (&a.annotations, &a.manifest, &a.records) {
        (Some(ann), _, _) => {
            let records = read_annotations(ann).map_err(Failure::config)?;
            label_annotations(&templates, &records, format, a.per_image, a.seed).map_err(Failure::stage)?
        }
        (None, Some(manifest), Some(records)) => {
            let manifest = read_manifest(manifest).map_err(Failure::config)?;
            let renders = read_render_records(records).map_err(Failure::config)?;
            label_dataset(&templates, &manifest, &renders, format, a.per_image, a.seed).map_err(Failure::stage)?
        }
        _ => return Err(Failure::config("give --manifest with --records, or --annotations")),
    };
    write_pairs(&a.out, &pairs).map_err(Failure::stage)?;
    println!("label: {} pairs written to {}", pairs.len(), a.out.display());
    Ok(())
}

fn annotate(a: AnnotateArgs) -> Result<(), Failure> {
    let records = match &a.csv {
        Some(csv) => annotate_real(csv).map_err(Failure::config)?,
        None => {
            let stdin = io::stdin();
            annotate_interactive(&a.images, stdin.lock(), io::stderr()).map_err(Failure::stage)?
        }
    };
    write_annotations(&a.out, &records).map_err(Failure::stage)?;
    println!("annotate: {} images written to {}", records.len(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&a.tau) {
        return Err(Failure::config("--tau must be in [0, 1]"));
    }
    let opts = ScoringOptions {
        tau: a.tau,
        multi_truth: a.multi_truth,
    };
    let report = run_benchmark(&a.pred, a.out.as_deref(), &opts).map_err(Failure::stage)?;
    let pct = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |v| format!("{:.2}%", 100.0 * v));
    println!("items: {}", report.overall.n_items);
    println!("ANLS: {:.2}", 100.0 * report.overall.anls);
    println!("numeric accuracy: {}", pct(report.overall.numeric_accuracy));
    println!("unit accuracy: {}", pct(report.overall.unit_accuracy));
    println!("word-level accuracy: {}", pct(report.overall.word_level_accuracy));
    for (device, s) in &report.per_device {
        println!("  {device}: n={} ANLS {:.2}", s.n_items, 100.0 * s.anls);
    }
    Ok(())
}
