//! The `cxrpair` command line tool.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 empty pool or failed
//! precondition, 4 parse error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::attention::{residual_map, to_attention, DEFAULT_ALPHA};
use crate::blend::{poisson_blend, BlendMode, BlendRequest, Solver, DEFAULT_TOL};
use crate::config::CliConfig;
use crate::dataset::{
    generate_phantom_pool_with, image_path_for_id, load_annotations_scaled, load_class_info, load_image,
    save_annotations, save_image, write_atomic, AnnotationSet, Label, PoolOptions,
};
use crate::error::Error;
use crate::eval::{dataset_map, join_records, load_submission, EvalOptions, ThresholdSet};
use crate::image::{apply_affine, BBox, Image};
use crate::registration::{align, AlignOptions};
use crate::retrieval::Class;
use crate::schedule::{parse_schedule, phase_table, run_schedule, ScheduleError};
use crate::synthesis::{
    synthesize_batch, write_synthesis, Direction, DonorPool, PoolItem, SynthInput, SynthOptions, SynthesisManifest,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_PARSE: i32 = 4;

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } => EXIT_IO,
            Error::Parse { .. } | Error::Csv(_) | Error::Corrupt { .. } | Error::UnsupportedFormat(_) => EXIT_PARSE,
            _ => EXIT_PRECONDITION,
        };
        Self::new(code, e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "cxrpair", version, about = "Pseudo-pair synthesis, alignment and detection scoring for chest radiographs")]
pub struct Cli {
    /// `key = value` config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Log per-item progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded phantom pool with annotations.
    Phantom(PhantomArgs),
    /// Build pseudo-normal or pseudo-abnormal counterparts.
    Synth(SynthArgs),
    /// Score predictions with the challenge metric.
    Evaluate(EvaluateArgs),
    /// Align an image to a reference.
    Align(AlignArgs),
    /// Blend a source region into a target image.
    Blend(BlendArgs),
    /// Write residual and attention maps for an input/counterpart pair.
    Attention(AttentionArgs),
    /// Print a detector/generator alternation schedule.
    Schedule(ScheduleArgs),
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.5)]
    pub abnormal_fraction: f64,
    /// Side length in pixels.
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    /// Opacities per abnormal phantom.
    #[arg(long, default_value_t = 1)]
    pub opacities: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    /// Abnormal inputs, normal donors.
    Normal,
    /// Normal inputs, abnormal donors.
    Abnormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BlendArg {
    Paste,
    Poisson,
}

impl From<BlendArg> for BlendMode {
    fn from(b: BlendArg) -> Self {
        match b {
            BlendArg::Paste => BlendMode::Paste,
            BlendArg::Poisson => BlendMode::Poisson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Cg,
    GaussSeidel,
}

impl From<SolverArg> for Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Cg => Solver::ConjugateGradient,
            SolverArg::GaussSeidel => Solver::GaussSeidel,
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct AlignFlags {
    #[arg(long = "align-levels", value_name = "N")]
    pub levels: Option<usize>,
    #[arg(long = "align-max-iters", value_name = "N")]
    pub max_iters: Option<usize>,
    #[arg(long = "align-step", value_name = "STEP")]
    pub step: Option<f64>,
    #[arg(long = "align-tol", value_name = "TOL")]
    pub tol: Option<f64>,
    #[arg(long = "align-fd-step", value_name = "H")]
    pub fd_step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BlendFlags {
    #[arg(long, value_enum)]
    pub blend: Option<BlendArg>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    #[arg(long)]
    pub blend_tol: Option<f64>,
    #[arg(long)]
    pub blend_max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub direction: DirectionArg,
    /// Directory of `<patientId>.pgm` / `.png` images.
    #[arg(long)]
    pub images: PathBuf,
    /// Annotation CSV (`patientId,x,y,width,height,Target`).
    #[arg(long)]
    pub annotations: PathBuf,
    /// Optional class-info CSV (`patientId,class`).
    #[arg(long)]
    pub class_info: Option<PathBuf>,
    /// Reference image; defaults to the first normal image by id.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Donors per normal input (abnormal direction).
    #[arg(long)]
    pub k: Option<usize>,
    /// Scale factor applied to annotation coordinates.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Also use "not normal, no opacity" images as normal donors.
    #[arg(long)]
    pub widen_normal_pool: bool,
    #[command(flatten)]
    pub blend: BlendFlags,
    #[command(flatten)]
    pub align: AlignFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gt: PathBuf,
    /// Submission CSV (`patientId,PredictionString`).
    #[arg(long)]
    pub pred: PathBuf,
    /// `start:step:stop` (default 0.4:0.05:0.75).
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Leave false negatives out of the denominator.
    #[arg(long)]
    pub no_fn: bool,
    /// Require IoU strictly above the threshold.
    #[arg(long)]
    pub exclusive: bool,
    #[arg(long)]
    pub scale: Option<f64>,
    /// Write the `metric,value` report here as well as printing it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[command(flatten)]
    pub align: AlignFlags,
    /// Parameter CSV destination (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the aligned image.
    #[arg(long)]
    pub warped: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BlendArgs {
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub source: PathBuf,
    /// `x,y,width,height` in pixels.
    #[arg(long)]
    pub region: String,
    #[command(flatten)]
    pub blend: BlendFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AttentionArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub counterpart: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub feat_w: usize,
    #[arg(long, default_value_t = 16)]
    pub feat_h: usize,
    /// Modulation strength reported for `f * (1 + alpha * a)`.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Directory for `residual.pgm` and `attention.pgm`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// `joint` or `N:M`.
    #[arg(long)]
    pub plan: String,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(p) => CliConfig::load(p)?,
        None => CliConfig::default(),
    };
    let jobs = cli.jobs.or(config.jobs).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::new(EXIT_USAGE, format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Phantom(a) => cmd_phantom(a, &config),
        Command::Synth(a) => cmd_synth(a, &config),
        Command::Evaluate(a) => cmd_evaluate(a, &config),
        Command::Align(a) => cmd_align(a, &config),
        Command::Blend(a) => cmd_blend(a, &config),
        Command::Attention(a) => cmd_attention(a, &config),
        Command::Schedule(a) => cmd_schedule(a),
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn align_options(flags: &AlignFlags, config: &CliConfig) -> AlignOptions {
    let d = AlignOptions::default();
    AlignOptions {
        levels: flags.levels.or(config.align_levels).unwrap_or(d.levels),
        max_iters: flags.max_iters.or(config.align_max_iters).unwrap_or(d.max_iters),
        step: flags.step.or(config.align_step).unwrap_or(d.step),
        tol: flags.tol.or(config.align_tol).unwrap_or(d.tol),
        fd_step: flags.fd_step.or(config.align_fd_step).unwrap_or(d.fd_step),
    }
}

fn blend_settings(flags: &BlendFlags, config: &CliConfig) -> (BlendMode, Solver, f64, Option<usize>) {
    (
        flags.blend.map(BlendMode::from).or(config.blend).unwrap_or(BlendMode::Poisson),
        flags.solver.map(Solver::from).or(config.solver).unwrap_or(Solver::ConjugateGradient),
        flags.blend_tol.or(config.blend_tol).unwrap_or(DEFAULT_TOL),
        flags.blend_max_iters.or(config.blend_max_iters),
    )
}

fn cmd_phantom(a: &PhantomArgs, config: &CliConfig) -> CliResult<()> {
    let seed = a.seed.or(config.seed).unwrap_or(0);
    let opts = PoolOptions {
        size: a.size,
        opacity_count: a.opacities,
    };
    let pool = generate_phantom_pool_with(a.count as usize, seed, a.abnormal_fraction, &opts)
        .map_err(|e| CliError::new(EXIT_USAGE, e.to_string()))?;
    create_dir(&a.out)?;
    for (id, img) in &pool.images {
        save_image(img, a.out.join(format!("{id}.pgm")))?;
    }
    save_annotations(&pool.annotations, a.out.join("annotations.csv"))?;
    println!(
        "wrote {} phantoms ({} abnormal, {} normal) to {}",
        pool.images.len(),
        pool.annotations.count(Label::Abnormal),
        pool.annotations.count(Label::Normal),
        a.out.display()
    );
    Ok(())
}

fn load_annotation_set(path: &Path, class_info: Option<&Path>, scale: f64) -> CliResult<AnnotationSet> {
    let mut set = load_annotations_scaled(path, scale)?;
    if let Some(ci) = class_info {
        set.apply_class_info(&load_class_info(ci)?)?;
    }
    Ok(set)
}

fn cmd_synth(a: &SynthArgs, config: &CliConfig) -> CliResult<()> {
    let scale = a.scale.or(config.scale).unwrap_or(1.0);
    let set = load_annotation_set(&a.annotations, a.class_info.as_deref(), scale)?;
    let (blend_mode, solver, blend_tol, blend_max_iters) = blend_settings(&a.blend, config);
    let opts = SynthOptions {
        align: align_options(&a.align, config),
        blend_mode,
        solver,
        blend_tol,
        blend_max_iters,
    };
    let k = a.k.or(config.k).unwrap_or(1);
    let direction = match a.direction {
        DirectionArg::Normal => Direction::ToNormal,
        DirectionArg::Abnormal => Direction::ToAbnormal,
    };
    let class_of = |label: Label| match label {
        Label::Normal => Some(Class::Normal),
        Label::Abnormal => Some(Class::Abnormal),
        Label::NoOpacityNotNormal if a.widen_normal_pool => Some(Class::Normal),
        Label::NoOpacityNotNormal => None,
    };

    let mut images: Vec<(String, Class, Image, Vec<BBox>)> = Vec::new();
    let mut missing = 0usize;
    for (id, rec) in &set.records {
        let Some(class) = class_of(rec.label) else { continue };
        match image_path_for_id(&a.images, id) {
            Some(p) => images.push((id.clone(), class, load_image(&p)?, rec.boxes.clone())),
            None => {
                log::warn!("no image for `{id}` under {}", a.images.display());
                missing += 1;
            }
        }
    }
    let inputs_of = |c: Class| images.iter().filter(move |(_, cl, _, _)| *cl == c);
    let n_inputs = inputs_of(direction.input_class()).count();
    let n_donors = inputs_of(direction.donor_class()).count();
    if n_inputs == 0 {
        return Err(CliError::new(
            EXIT_PRECONDITION,
            format!("no {} input images", direction.input_class()),
        ));
    }
    if n_donors == 0 {
        return Err(CliError::new(
            EXIT_PRECONDITION,
            format!("empty {} donor pool", direction.donor_class()),
        ));
    }

    let reference = match a.reference.as_ref().or(config.reference.as_ref()) {
        Some(p) => load_image(p)?,
        None => match inputs_of(Class::Normal).next() {
            Some((id, _, img, _)) => {
                log::info!("using `{id}` as the reference");
                img.clone()
            }
            None => return Err(CliError::new(EXIT_PRECONDITION, "no normal image to use as reference")),
        },
    };
    let items: Vec<PoolItem> = images
        .iter()
        .map(|(id, class, image, boxes)| PoolItem {
            id,
            class: *class,
            image,
            boxes,
        })
        .collect();
    let pool = DonorPool::build(&items, &reference, &opts.align)?;
    let usable = pool.donor_count(direction.donor_class());
    let needed = if direction == Direction::ToAbnormal { k } else { 1 };
    if usable < needed {
        return Err(CliError::new(
            EXIT_PRECONDITION,
            format!("{usable} usable {} donors, need {needed}", direction.donor_class()),
        ));
    }

    let inputs: Vec<SynthInput> = inputs_of(direction.input_class())
        .map(|(id, _, image, boxes)| SynthInput { id, image, boxes })
        .collect();
    let (pairs, mut skipped) = synthesize_batch(&pool, &inputs, direction, k, &opts);
    let mut manifest = SynthesisManifest::from_pairs(&pairs);
    let failures = write_synthesis(&pairs, &manifest, &a.out)?;
    if !failures.is_empty() {
        let failed: Vec<&str> = failures.iter().map(|f| f.input_id.as_str()).collect();
        manifest.rows.retain(|r| !failed.contains(&r.input_id.as_str()));
        skipped.extend(failures);
        write_atomic(a.out.join("manifest.csv"), &manifest.to_csv()?)?;
    }
    println!(
        "{direction}: {} inputs, {} pairs, {} manifest rows, {} skipped, {} missing images, {} pool members rejected",
        inputs.len(),
        manifest.pair_count(),
        manifest.rows.len(),
        skipped.len(),
        missing,
        pool.rejected().len()
    );
    for s in &skipped {
        println!("skipped {}: {}", s.input_id, s.reason);
    }
    if manifest.rows.is_empty() {
        return Err(CliError::new(EXIT_PRECONDITION, "no pair was synthesized"));
    }
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs, config: &CliConfig) -> CliResult<()> {
    let thresholds = match &a.thresholds {
        Some(s) => s.parse::<ThresholdSet>().map_err(|e| CliError::new(EXIT_USAGE, e.to_string()))?,
        None => config.thresholds.unwrap_or_default(),
    };
    let scale = a.scale.or(config.scale).unwrap_or(1.0);
    let gt = load_annotations_scaled(&a.gt, scale)?;
    let preds = load_submission(&a.pred)?;
    let records = join_records(&gt, &preds)?;
    let opts = EvalOptions {
        thresholds,
        count_fn: !(a.no_fn || config.no_fn.unwrap_or(false)),
        inclusive: !a.exclusive,
    };
    let report = dataset_map(&records, &opts)?;
    print!("{}", report.to_text());
    if let Some(out) = &a.out {
        write_atomic(out, &report.to_csv()?)?;
    }
    Ok(())
}

fn cmd_align(a: &AlignArgs, config: &CliConfig) -> CliResult<()> {
    let img = load_image(&a.image)?;
    let reference = match a.reference.as_ref().or(config.reference.as_ref()) {
        Some(p) => load_image(p)?,
        None => return Err(CliError::new(EXIT_USAGE, "align needs --reference (or `reference` in the config)")),
    };
    let opts = align_options(&a.align, config);
    let res = align(&img, &reference, &opts)?;
    let p = res.transform.params();
    let csv = format!(
        "a11,a12,a21,a22,tx,ty,finalLoss\n{},{},{},{},{},{},{}\n",
        p[0], p[1], p[2], p[3], p[4], p[5], res.final_loss
    );
    match &a.out {
        Some(out) => write_atomic(out, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    if let Some(w) = &a.warped {
        save_image(&apply_affine(&img, &res.transform, reference.width(), reference.height())?, w)?;
    }
    eprintln!(
        "loss {:.6} -> {:.6} in {} iterations ({})",
        res.initial_loss,
        res.final_loss,
        res.iterations,
        if res.converged { "converged" } else { "iteration limit" }
    );
    Ok(())
}

fn parse_region(s: &str) -> CliResult<BBox> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::new(EXIT_USAGE, format!("region `{s}` is not x,y,width,height")))?;
    match v.as_slice() {
        &[x, y, w, h] => BBox::new(x, y, w, h).map_err(|e| CliError::new(EXIT_USAGE, e.to_string())),
        _ => Err(CliError::new(EXIT_USAGE, format!("region `{s}` is not x,y,width,height"))),
    }
}

fn cmd_blend(a: &BlendArgs, config: &CliConfig) -> CliResult<()> {
    let target = load_image(&a.target)?;
    let source = load_image(&a.source)?;
    let region = parse_region(&a.region)?;
    let (mode, solver, tol, max_iters) = blend_settings(&a.blend, config);
    let mut req = BlendRequest::new(&target, &source, region).mode(mode).solver(solver).tol(tol);
    req.max_iters = max_iters;
    let out = poisson_blend(&req)?;
    save_image(&out, &a.out)?;
    println!("{mode} blend of {:?} written to {}", region, a.out.display());
    Ok(())
}

fn cmd_attention(a: &AttentionArgs, config: &CliConfig) -> CliResult<()> {
    let input = load_image(&a.input)?;
    let counterpart = load_image(&a.counterpart)?;
    let g = move |_: &Image| counterpart.clone();
    let residual = residual_map(&input, &g)?;
    let attn = to_attention(&residual, a.feat_w, a.feat_h)?;
    let alpha = a.alpha.or(config.alpha).unwrap_or(DEFAULT_ALPHA);
    create_dir(&a.out)?;
    save_image(&residual, a.out.join("residual.pgm"))?;
    save_image(&attn.to_image()?, a.out.join("attention.pgm"))?;
    let (cx, cy) = attn.argmax();
    println!(
        "residual max {:.6}; attention {}x{}, peak cell ({cx},{cy}) = {:.6}; feature gain in [1, {}]",
        residual.max(),
        attn.width,
        attn.height,
        attn.get(cx, cy),
        1.0 + alpha
    );
    Ok(())
}

fn cmd_schedule(a: &ScheduleArgs) -> CliResult<()> {
    let spec = parse_schedule(&a.plan).map_err(|e| CliError::new(EXIT_USAGE, e.to_string()))?;
    let trace = run_schedule(
        &spec,
        a.epochs as usize,
        |_| Ok::<_, std::convert::Infallible>(()),
        |_| Ok(()),
    )
    .map_err(|e: ScheduleError<_>| CliError::new(EXIT_USAGE, e.to_string()))?;
    print!("{}", phase_table(&trace.phases));
    println!("{}", trace.sequence());
    Ok(())
}
