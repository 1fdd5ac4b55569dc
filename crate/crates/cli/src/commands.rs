//! Command implementations. Results go to standard output; wall-clock
//! timings go to the timing log only.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use uapg::attack::{madc_attack, train_uap, write_training_log, DirectorySource, MadcConfig, TrainConfig};
use uapg::imaging::io::{read_perturbation, write_perturbation};
use uapg::imaging::{
    apply_perturbation, apply_to_video, contrast_mask, mse, scale_to_amplitude, Perturbation, DEFAULT_MASK_WINDOW,
};
use uapg::metrics::parse_metric_spec;
use uapg::stability::{
    run_stability_pipeline, write_csv_exports, EvalConfig, EvalVideo, ScoreCache, StabilityReport, TargetMetric,
    DEFAULT_AMPLITUDES,
};

use crate::args::{ApplyArgs, AttackArgs, Cli, Command, EvalArgs, ReportArgs, TrainArgs};
use crate::config::{default_rate_points, RunConfig};
use crate::error::CliError;
use crate::media;
use crate::timing::TimingLog;

pub const REPORT_FILE: &str = "report.json";

/// Global settings after merging flags over the config file.
struct Context {
    config: RunConfig,
    seed: u64,
    jobs: usize,
    out: PathBuf,
    cache_dir: Option<PathBuf>,
    timing: TimingLog,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self, CliError> {
        let mut config = match &cli.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if cli.seed.is_some() {
            config.seed = cli.seed;
        }
        if cli.jobs.is_some() {
            config.jobs = cli.jobs;
        }
        if let Some(out) = &cli.out {
            config.out = Some(out.to_string_lossy().into_owned());
        }
        if let Some(dir) = &cli.cache_dir {
            config.cache_dir = Some(dir.to_string_lossy().into_owned());
        }
        Ok(Self {
            seed: config.seed.unwrap_or(0),
            jobs: config.jobs.unwrap_or(0),
            out: PathBuf::from(config.out.clone().unwrap_or_else(|| "out".into())),
            cache_dir: config.cache_dir.clone().map(PathBuf::from),
            timing: TimingLog::new(cli.timing_log.clone()),
            config,
        })
    }
}

/// Run one invocation, printing results to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut ctx = Context::new(&cli)?;
    match cli.command {
        Command::TrainUap(a) => train(&mut ctx, a, stdout),
        Command::ApplyUap(a) => apply(&mut ctx, a, stdout),
        Command::AttackImage(a) => attack(&mut ctx, a, stdout),
        Command::EvalStability(a) => eval(&mut ctx, a, stdout),
        Command::ReportCsv(a) => report_csv(&ctx, a, stdout),
    }
}

fn required<T>(value: Option<T>, field: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::config(format!("{field} is required (flag or config file)")))
}

fn train(ctx: &mut Context, a: TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let started = Instant::now();
    let s = &mut ctx.config.train;
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        epochs: a.epochs.or(s.epochs).unwrap_or(defaults.epochs),
        batch_size: a.batch_size.or(s.batch_size).unwrap_or(defaults.batch_size),
        learning_rate: a.learning_rate.or(s.learning_rate).unwrap_or(defaults.learning_rate),
        clip_bound: a.clip_bound.or(s.clip_bound).unwrap_or(defaults.clip_bound),
        seed: ctx.seed,
        shuffle: !a.no_shuffle && s.shuffle.unwrap_or(defaults.shuffle),
        tile: a.tile.or(s.tile).unwrap_or(defaults.tile),
    };
    cfg.validate()?;
    let spec = required(a.metric.or(s.metric.clone()), "train.metric")?;
    let images = required(a.images.or(s.images.clone()), "train.images")?;
    let output = a
        .output
        .or(s.output.clone().map(PathBuf::from))
        .unwrap_or_else(|| ctx.out.join("uap.uapp"));
    let log_path = output.with_extension("log.csv");

    let metric = parse_metric_spec(&spec).map_err(|e| CliError::from(e).context("train.metric"))?;
    let outcome = if media::is_synthetic(&images) {
        let data = media::synthetic_images(&images, ctx.seed)?;
        train_uap(&metric, &data, &cfg)?
    } else {
        let dir = Path::new(&images);
        if !dir.is_dir() {
            return Err(CliError::config(format!("train.images: directory {} does not exist", dir.display())));
        }
        let data = DirectorySource::open(dir, cfg.tile)?;
        if data.paths().is_empty() {
            return Err(CliError::config(format!("train.images: no PNG files in {}", dir.display())));
        }
        let outcome = train_uap(&metric, &data, &cfg)?;
        if data.adjusted_count() > 0 {
            writeln!(out, "note: {} images were resized/cropped to {}x{}", data.adjusted_count(), cfg.tile, cfg.tile)?;
        }
        outcome
    };
    ctx.timing.record("train-uap", "train", started);

    media::create_parent(&output)?;
    let mut w = BufWriter::new(File::create(&output)?);
    write_perturbation(&mut w, &outcome.perturbation)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(&log_path)?);
    write_training_log(&mut w, &outcome.log)?;
    w.flush()?;

    let final_loss = outcome.epoch_losses.last().copied().unwrap_or(f64::NAN);
    writeln!(out, "metric: {spec}")?;
    writeln!(out, "steps: {}", outcome.log.len())?;
    writeln!(out, "final max|p|: {}", outcome.perturbation.max_abs())?;
    writeln!(out, "mean final-epoch loss: {final_loss}")?;
    writeln!(out, "perturbation: {}", output.display())?;
    writeln!(out, "training log: {}", log_path.display())?;
    Ok(())
}

fn load_perturbation(path: &Path, owner: &str) -> Result<Perturbation, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::config(format!("{owner}: cannot open perturbation {}: {e}", path.display())))?;
    read_perturbation(std::io::BufReader::new(file))
        .map_err(|e| CliError::config(format!("{owner}: {}: {e}", path.display())))
}

fn apply(ctx: &mut Context, a: ApplyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let s = &ctx.config.apply;
    let p_path = required(a.perturbation.or(s.perturbation.clone().map(PathBuf::from)), "apply.perturbation")?;
    let input = required(a.input.or(s.input.clone()), "apply.input")?;
    let amplitude = required(a.amplitude.or(s.amplitude), "apply.amplitude")?;
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(CliError::config(format!("apply.amplitude must be > 0, got {amplitude}")));
    }
    let csf = a.csf || s.csf.unwrap_or(false);
    let window = a.mask_window.or(s.mask_window).unwrap_or(DEFAULT_MASK_WINDOW);
    let video = media::is_video(&input);
    let output = a.output.or(s.output.clone().map(PathBuf::from)).unwrap_or_else(|| {
        ctx.out.join(if video { "attacked.y4m" } else { "attacked.png" })
    });

    let p = load_perturbation(&p_path, "apply.perturbation")?;
    let scaled = scale_to_amplitude(&p, amplitude)?;
    let started = Instant::now();
    let (err, frames) = if video {
        let original = media::load_video(&input)?;
        let attacked = apply_to_video(&original, &scaled, csf.then_some(window))?;
        let total: f64 = original
            .frames()
            .iter()
            .zip(attacked.frames())
            .map(|(x, y)| mse(x, y))
            .sum::<Result<f64, _>>()?;
        media::save_video(&output, &attacked)?;
        (total / original.len() as f64, original.len())
    } else {
        let original = media::load_image(&input)?;
        let mask = if csf { Some(contrast_mask(&original, window)?) } else { None };
        let attacked = apply_perturbation(&original, &scaled, mask.as_ref())?;
        let err = mse(&original, &attacked)?;
        media::save_image(&output, &attacked)?;
        (err, 1)
    };
    ctx.timing.record("apply-uap", "apply", started);
    let psnr = if err == 0.0 { f64::INFINITY } else { 10.0 * (1.0 / err).log10() };
    writeln!(out, "amplitude: {amplitude}")?;
    writeln!(out, "csf mask: {}", if csf { format!("window {window}") } else { "off".into() })?;
    writeln!(out, "frames: {frames}")?;
    writeln!(out, "mse: {err}")?;
    writeln!(out, "psnr: {psnr} dB")?;
    writeln!(out, "metric evaluations: 0")?;
    writeln!(out, "output: {}", output.display())?;
    Ok(())
}

fn attack(ctx: &mut Context, a: AttackArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let s = &ctx.config.attack;
    let spec = required(a.metric.or(s.metric.clone()), "attack.metric")?;
    let input = required(a.input.or(s.input.clone()), "attack.input")?;
    let mut cfg = MadcConfig::new(required(a.budget.or(s.budget), "attack.budget")?);
    cfg.steps = a.steps.or(s.steps).unwrap_or(cfg.steps);
    cfg.step_size = a.step_size.or(s.step_size).unwrap_or(cfg.step_size);
    let output = a
        .output
        .or(s.output.clone().map(PathBuf::from))
        .unwrap_or_else(|| ctx.out.join("attacked.png"));

    let metric = parse_metric_spec(&spec).map_err(|e| CliError::from(e).context("attack.metric"))?;
    let img = media::load_image(&input)?;
    let started = Instant::now();
    let outcome = madc_attack(&metric, &img, &cfg)?;
    ctx.timing.record("attack-image", "attack", started);
    media::save_image(&output, &outcome.image)?;

    writeln!(out, "metric: {spec}")?;
    writeln!(out, "before: {}", outcome.initial_score)?;
    writeln!(out, "after: {}", outcome.final_score)?;
    writeln!(out, "gain: {}", outcome.final_score - outcome.initial_score)?;
    writeln!(out, "mse: {} (budget {})", outcome.mse, cfg.mse_budget)?;
    writeln!(out, "steps: {}", cfg.steps)?;
    writeln!(out, "evaluations: {}", outcome.evaluations.total())?;
    if outcome.zero_gradient {
        writeln!(out, "note: gradient vanished at the input; image unchanged")?;
    }
    writeln!(out, "output: {}", output.display())?;
    Ok(())
}

fn eval(ctx: &mut Context, a: EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let started = Instant::now();
    let s = ctx.config.eval.clone();
    if s.metrics.is_empty() {
        return Err(CliError::config("eval.metrics must list at least one metric with its perturbation"));
    }
    if s.videos.is_empty() {
        return Err(CliError::config("eval.videos must list at least one video"));
    }
    let mut targets = Vec::with_capacity(s.metrics.len());
    for entry in &s.metrics {
        let owner = format!("eval.metrics {}", entry.spec);
        let perturbation = load_perturbation(Path::new(&entry.perturbation), &owner)?;
        let handle = parse_metric_spec(&entry.spec).map_err(|e| CliError::from(e).context(&owner))?;
        targets.push(TargetMetric { id: entry.spec.clone(), handle, perturbation });
    }
    let mut videos = Vec::with_capacity(s.videos.len());
    for source in &s.videos {
        videos.push(EvalVideo { id: media::video_id(source), source: source.clone(), video: media::load_video(source)? });
    }

    let csf = a.csf || s.csf.unwrap_or(false);
    ctx.config.eval.csf = Some(csf);
    // Where results are written and how many threads compute them does
    // not change them, so those settings are left out of the report.
    let mut provenance = ctx.config.clone();
    provenance.out = None;
    provenance.cache_dir = None;
    provenance.jobs = None;
    let amplitudes = s.amplitudes.clone().unwrap_or_else(|| DEFAULT_AMPLITUDES.to_vec());
    let rate_points = s.rate_points.clone().unwrap_or_else(default_rate_points);
    let mask_window = csf.then(|| s.mask_window.unwrap_or(DEFAULT_MASK_WINDOW));
    provenance.eval.amplitudes = Some(amplitudes.clone());
    provenance.eval.rate_points = Some(rate_points.clone());
    provenance.eval.mask_window = mask_window;
    let cfg = EvalConfig {
        amplitudes,
        rate_points,
        mask_window,
        jobs: ctx.jobs,
        provenance: serde_json::to_value(&provenance).map_err(|e| CliError::Internal(e.to_string()))?,
    };
    let cache = ctx.cache_dir.as_ref().map(ScoreCache::open).transpose()?;
    let outcome = run_stability_pipeline(&cfg, &videos, &targets, cache.as_ref())?;
    ctx.timing.record("eval-stability", "pipeline", started);

    std::fs::create_dir_all(&ctx.out)?;
    let report_path = ctx.out.join(REPORT_FILE);
    std::fs::write(&report_path, outcome.report.to_json()?)?;
    write_csv_exports(&outcome.report, &ctx.out)?;

    print_table(&outcome.report, out)?;
    let st = outcome.stats;
    writeln!(
        out,
        "grid: {} variants ({} distinct), {} tasks, {} compressions, {} metric evaluations",
        st.variants, st.unique_variants, st.tasks, st.compressions, st.metric_evaluations
    )?;
    if cache.is_some() {
        writeln!(out, "cache: {} hits, {} misses", st.cache_hits, st.cache_misses)?;
    }
    writeln!(out, "report: {}", report_path.display())?;
    Ok(())
}

fn print_table(report: &StabilityReport, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = report.ranking();
    let width = rows.iter().map(|(id, _)| id.len()).max().unwrap_or(6).max(6);
    writeln!(out, "{:<width$}  {:>10}", "metric", "stability")?;
    for (id, score) in rows {
        writeln!(out, "{id:<width$}  {score:>10.4}")?;
    }
    writeln!(out, "common proxy-loss interval: [{}, {}]", report.common_interval[0], report.common_interval[1])?;
    Ok(())
}

fn report_csv(ctx: &Context, a: ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let path = a.report.unwrap_or_else(|| ctx.out.join(REPORT_FILE));
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::config(format!("cannot read report {}: {e}", path.display())))?;
    let report = StabilityReport::from_json(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if a.verify {
        let again = report.recompute()?;
        if again.to_json()? != text {
            return Err(CliError::Grid(format!(
                "{}: derived values do not match a recomputation from the stored curves",
                path.display()
            )));
        }
        writeln!(out, "verified: derived values recompute exactly")?;
    }
    for written in write_csv_exports(&report, &ctx.out)? {
        writeln!(out, "wrote {}", written.display())?;
    }
    print_table(&report, out)
}
