//! `conjunct` command line.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use conjunct_core::encoder::HashedConfig;
use conjunct_core::evaluation::{render_summary, render_table, summarize_runs, Averaging, EvalOptions};
use conjunct_core::encoder::EncoderSpec;
use conjunct_core::lexicon::PairedLexicon;
use conjunct_core::models::{train_detector, train_detector_with, train_identifier, DetectorLoss, OptimizerKind};
use conjunct_core::pipeline::Pipeline;
use conjunct_core::treebank::{augment, AugmentOutcome, Complexity, ExceptionList};

use crate::checkpoint::{self, build_encoder};
use crate::config::Config;
use crate::formats::{self, InstanceFormat};
use crate::synth::synthetic_treebank;
use crate::workflow::{self, WorkflowError};

pub const MODEL_DIR_ENV: &str = "CONJUNCT_MODEL_DIR";
const IDENTIFIER_FILE: &str = "identifier.ckpt";
const DETECTOR_FILE: &str = "detector.ckpt";

#[derive(Debug)]
pub enum CliError {
    /// Bad input data: exit 1.
    Data(String),
    /// Bad invocation: exit 2.
    Usage(String),
    /// Bug or environment failure: exit 3.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Data(m) | CliError::Usage(m) | CliError::Internal(m) => m,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn internal<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Internal(e.to_string())
}

impl From<WorkflowError> for CliError {
    fn from(e: WorkflowError) -> Self {
        match e {
            WorkflowError::Threads(_) => internal(e),
            other => data(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "conjunct", version, about = "Coordination recognition: coordinators, conjunct boundaries, sentence splitting")]
pub struct Cli {
    /// Worker threads for per-sentence work; 0 uses every logical core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a bracketed treebank into training instances.
    Labelgen(LabelgenArgs),
    /// Train the identifier or the detector.
    Train(TrainArgs),
    /// Recognize coordinations in JSONL input.
    Predict(PredictArgs),
    /// Score the pipeline against gold annotations.
    Evaluate(EvaluateArgs),
    /// Split annotated sentences into simple sub-sentences.
    Split(SplitArgs),
    /// Add conjunct-swapped copies of training instances.
    Augment(AugmentArgs),
    /// Write a seeded synthetic treebank.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct LabelgenArgs {
    /// Treebank with one or more bracketed trees.
    pub treebank: PathBuf,
    /// Instance output file.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = InstanceFormat::Jsonl)]
    pub format: InstanceFormat,
    /// Manual corrections, tab separated.
    #[arg(long)]
    pub exceptions: Option<PathBuf>,
    /// Also write gold annotated sentences (JSONL).
    #[arg(long)]
    pub sentences: Option<PathBuf>,
    /// Replacement paired-coordinator lexicon.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Identifier,
    Detector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    CrfNll,
    TokenCe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    /// Hashed encoder dimension.
    #[arg(long)]
    pub dim: Option<usize>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<Config, CliError> {
        let mut cfg = match &self.config {
            Some(p) => {
                require(p)?;
                Config::load(p).map_err(|e| CliError::Usage(e.to_string()))?
            }
            None => Config::default(),
        };
        let t = &mut cfg.train;
        if let Some(v) = self.epochs {
            t.epochs = v;
        }
        if let Some(v) = self.seed {
            t.seed = v;
        }
        if let Some(v) = self.learning_rate {
            t.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.loss {
            t.loss = match v {
                LossArg::CrfNll => DetectorLoss::CrfNll,
                LossArg::TokenCe => DetectorLoss::TokenCe,
            };
        }
        if let Some(v) = self.optimizer {
            t.optimizer = match v {
                OptimizerArg::Sgd => OptimizerKind::Sgd,
                OptimizerArg::Adam => OptimizerKind::Adam,
            };
        }
        if let Some(dim) = self.dim {
            match &mut cfg.encoder {
                EncoderSpec::Hashed(h) => h.dim = dim,
                EncoderSpec::External { .. } => {
                    return Err(CliError::Usage("--dim applies to the hashed encoder only".into()))
                }
            }
        }
        if let EncoderSpec::Hashed(HashedConfig { dim: 0, .. }) = cfg.encoder {
            return Err(CliError::Usage("encoder dimension must be positive".into()));
        }
        cfg.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(value_enum)]
    pub task: Task,
    /// Training instances (JSONL, or CoNLL for `.conll` files).
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Flag coordinators predicted by this identifier instead of gold ones
    /// (detector only).
    #[arg(long)]
    pub predicted_coordinators: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Directory holding identifier.ckpt and detector.ckpt.
    #[arg(long, env = MODEL_DIR_ENV)]
    pub models: Option<PathBuf>,
    #[arg(long)]
    pub identifier: Option<PathBuf>,
    #[arg(long)]
    pub detector: Option<PathBuf>,
    /// Use the coordinators given in the input instead of the identifier.
    #[arg(long)]
    pub gold_coordinators: bool,
}

impl ModelArgs {
    fn path(&self, explicit: &Option<PathBuf>, file: &str) -> Result<PathBuf, CliError> {
        match (explicit, &self.models) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(dir)) => Ok(dir.join(file)),
            (None, None) => Err(CliError::Usage(format!(
                "no model given: pass --models, --{} or set {MODEL_DIR_ENV}",
                file.trim_end_matches(".ckpt")
            ))),
        }
    }

    pub fn load(&self) -> Result<Pipeline, CliError> {
        let det_path = self.path(&self.detector, DETECTOR_FILE)?;
        require(&det_path)?;
        let detector = checkpoint::load_detector(&det_path).map_err(|e| data(format!("{}: {e}", det_path.display())))?;
        let identifier = if self.gold_coordinators {
            None
        } else {
            let p = self.path(&self.identifier, IDENTIFIER_FILE)?;
            require(&p)?;
            Some(checkpoint::load_identifier(&p).map_err(|e| data(format!("{}: {e}", p.display())))?)
        };
        Ok(Pipeline {
            identifier,
            detector,
            lexicon: PairedLexicon::default(),
        })
    }
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// JSONL with `tokens` or `text` per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub models: ModelArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SubsetArg {
    Simple,
    Complex,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Gold annotated sentences (JSONL).
    #[arg(long)]
    pub gold: PathBuf,
    /// Score these predictions instead of running models.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Retrain from these instances for every run (seed + run index).
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long, value_enum)]
    pub subset: Option<SubsetArg>,
    /// Average per sentence instead of over all spans.
    #[arg(long = "macro")]
    pub macro_average: bool,
    /// Score target coordinator spans as well as conjuncts.
    #[arg(long)]
    pub score_targets: bool,
    /// Leave inference time out of the report.
    #[arg(long)]
    pub omit_timing: bool,
    /// Write the report as JSON here.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub models: ModelArgs,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Annotated sentences (JSONL), e.g. `predict` output.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Write only the swapped copies, not the originals.
    #[arg(long)]
    pub only_swapped: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub sentences: usize,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
}

fn require(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{}: no such file", path.display())))
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    require(path)?;
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| data(format!("{}: {e}", path.display())))
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| internal(format!("{}: {e}", dir.display())))
        }
        _ => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    ensure_parent(path)?;
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| internal(format!("{}: {e}", path.display())))
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    require(path)?;
    std::fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn load_instances(path: &Path) -> Result<Vec<conjunct_core::treebank::TrainingInstance>, CliError> {
    let r = open(path)?;
    formats::read_instances(r, InstanceFormat::from_path(path)).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn cmd_labelgen(a: &LabelgenArgs) -> Result<(), CliError> {
    let text = read_text(&a.treebank)?;
    let exceptions = match &a.exceptions {
        Some(p) => Some(ExceptionList::parse(&read_text(p)?).map_err(|e| data(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let lexicon = match &a.lexicon {
        Some(p) => PairedLexicon::parse(&read_text(p)?).map_err(|e| data(format!("{}: {e}", p.display())))?,
        None => PairedLexicon::default(),
    };
    let out = workflow::labelgen(&text, &a.treebank.display().to_string(), exceptions.as_ref(), &lexicon)?;
    for (tree, w) in &out.warnings {
        log::warn!("tree {tree}: {w}");
    }
    formats::write_instances(create(&a.output)?, &out.instances, a.format).map_err(internal)?;
    if let Some(p) = &a.sentences {
        formats::write_jsonl(create(p)?, &out.sentences).map_err(internal)?;
    }
    eprintln!("{}", serde_json::to_string(&out.summary).map_err(internal)?);
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let cfg = a.overrides.resolve()?;
    let instances = load_instances(&a.data)?;
    let encoder = build_encoder(&cfg.encoder).map_err(|e| CliError::Usage(e.to_string()))?;
    let log = match a.task {
        Task::Identifier => {
            if a.predicted_coordinators.is_some() {
                return Err(CliError::Usage("--predicted-coordinators applies to the detector".into()));
            }
            let m = train_identifier(&instances, encoder, &cfg.train).map_err(data)?;
            ensure_parent(&a.out)?;
            checkpoint::save_identifier(&a.out, &m, &cfg).map_err(|e| internal(format!("{}: {e}", a.out.display())))?;
            m.log().clone()
        }
        Task::Detector => {
            let m = match &a.predicted_coordinators {
                Some(p) => {
                    require(p)?;
                    let id = checkpoint::load_identifier(p).map_err(|e| data(format!("{}: {e}", p.display())))?;
                    let lexicon = PairedLexicon::default();
                    train_detector_with(&instances, encoder, cfg.detector.flags, &cfg.train, |inst| {
                        let mut coords = id.identify(&inst.tokens, &lexicon)?;
                        if !coords.contains(&inst.target) {
                            coords.push(inst.target);
                            coords.sort_by_key(|c| c.span);
                        }
                        Ok(coords)
                    })
                }
                None => train_detector(&instances, encoder, cfg.detector.flags, &cfg.train),
            }
            .map_err(data)?;
            ensure_parent(&a.out)?;
            checkpoint::save_detector(&a.out, &m, &cfg).map_err(|e| internal(format!("{}: {e}", a.out.display())))?;
            m.log().clone()
        }
    };
    log::info!("initial loss {:.6}", log.initial_loss);
    for (i, l) in log.epoch_losses.iter().enumerate() {
        log::info!("epoch {} loss {l:.6}", i + 1);
    }
    log::info!("final loss {:.6}", log.final_loss);
    Ok(())
}

fn cmd_predict(a: &PredictArgs, threads: usize) -> Result<(), CliError> {
    let inputs = formats::read_inputs(open(&a.input)?).map_err(|e| data(format!("{}: {e}", a.input.display())))?;
    let pipeline = a.models.load()?;
    let out = workflow::predict(&pipeline, &inputs, a.models.gold_coordinators, threads)?;
    let lines: Vec<formats::Prediction> = inputs
        .into_iter()
        .zip(out)
        .map(|(i, sentence)| formats::Prediction { id: i.id, sentence })
        .collect();
    formats::write_jsonl(output(&a.output)?, &lines).map_err(internal)
}

fn cmd_evaluate(a: &EvaluateArgs, threads: usize) -> Result<(), CliError> {
    let gold = formats::read_annotations(open(&a.gold)?).map_err(|e| data(format!("{}: {e}", a.gold.display())))?;
    let options = EvalOptions {
        averaging: if a.macro_average { Averaging::Macro } else { Averaging::Micro },
        score_targets: a.score_targets,
    };
    let subset = a.subset.map(|s| match s {
        SubsetArg::Simple => Complexity::Simple,
        SubsetArg::Complex => Complexity::Complex,
    });
    if a.runs == 0 {
        return Err(CliError::Usage("--runs must be positive".into()));
    }
    if a.runs > 1 && a.train.is_none() {
        return Err(CliError::Usage("--runs > 1 needs --train to retrain with per-run seeds".into()));
    }

    let mut reports = Vec::new();
    if let Some(p) = &a.pred {
        let pred = formats::read_annotations(open(p)?).map_err(|e| data(format!("{}: {e}", p.display())))?;
        reports.push(conjunct_core::evaluation::score_dataset(&gold, &pred, options).map_err(data)?);
    } else if let Some(train) = &a.train {
        let base = a.overrides.resolve()?;
        let instances = load_instances(train)?;
        for run in 0..a.runs {
            let mut cfg = base.clone();
            cfg.train.seed = base.train.seed.wrapping_add(run as u64);
            let encoder = build_encoder(&cfg.encoder).map_err(|e| CliError::Usage(e.to_string()))?;
            let detector = train_detector(&instances, encoder.clone(), cfg.detector.flags, &cfg.train).map_err(data)?;
            let identifier = if a.models.gold_coordinators {
                None
            } else {
                Some(train_identifier(&instances, encoder, &cfg.train).map_err(data)?)
            };
            let pipeline = Pipeline {
                identifier,
                detector,
                lexicon: PairedLexicon::default(),
            };
            let (r, _) = workflow::evaluate_dataset(&pipeline, &gold, options, a.models.gold_coordinators, threads)?;
            log::info!("run {} (seed {}): F1 {:.2}", run + 1, cfg.train.seed, r.overall.f1);
            reports.push(r);
        }
    } else {
        let pipeline = a.models.load()?;
        let (r, _) = workflow::evaluate_dataset(&pipeline, &gold, options, a.models.gold_coordinators, threads)?;
        reports.push(r);
    }
    if a.omit_timing {
        for r in &mut reports {
            r.inference_seconds = None;
        }
    }

    let mut out = BufWriter::new(io::stdout().lock());
    let json = if reports.len() == 1 {
        print!("{}", render_table(&reports[0], subset));
        serde_json::to_string_pretty(&reports[0])
    } else {
        let summary = summarize_runs(&reports).map_err(internal)?;
        print!("{}", render_summary(&summary));
        serde_json::to_string_pretty(&serde_json::json!({ "runs": reports, "summary": summary }))
    }
    .map_err(internal)?;
    out.flush().map_err(internal)?;
    if let Some(p) = &a.json {
        let mut w = create(p)?;
        writeln!(w, "{json}").map_err(internal)?;
        w.flush().map_err(internal)?;
    }
    Ok(())
}

fn cmd_split(a: &SplitArgs) -> Result<(), CliError> {
    let stats = formats::split_corpus(open(&a.input)?, output(&a.output)?).map_err(data)?;
    if stats.skipped > 0 {
        log::warn!("{} malformed line(s) skipped", stats.skipped);
    }
    log::info!("{} sentence(s), {} sub-sentence(s)", stats.sentences, stats.written);
    Ok(())
}

fn cmd_augment(a: &AugmentArgs) -> Result<(), CliError> {
    let instances = load_instances(&a.input)?;
    let mut out = Vec::with_capacity(instances.len() * 2);
    let mut swapped = 0;
    for inst in &instances {
        let (aug, outcome) = augment(inst).map_err(data)?;
        if !a.only_swapped {
            out.push(inst.clone());
        }
        if outcome == AugmentOutcome::Swapped {
            swapped += 1;
            out.push(aug);
        }
    }
    formats::write_instances(create(&a.output)?, &out, InstanceFormat::from_path(&a.output)).map_err(internal)?;
    log::info!("{swapped} of {} instance(s) swapped", instances.len());
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    let mut w = create(&a.output)?;
    for t in synthetic_treebank(a.sentences, a.seed) {
        writeln!(w, "{t}").map_err(internal)?;
    }
    w.flush().map_err(internal)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Labelgen(a) => cmd_labelgen(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a, cli.threads),
        Command::Evaluate(a) => cmd_evaluate(a, cli.threads),
        Command::Split(a) => cmd_split(a),
        Command::Augment(a) => cmd_augment(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Parses arguments, runs, and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
