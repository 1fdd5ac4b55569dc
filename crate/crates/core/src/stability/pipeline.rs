//! The evaluation grid: perturb, compress, score, assemble.

use std::collections::HashMap;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::cache::{hex, CacheKey, ScoreCache};
use super::report::{assemble_report, MetricRuns, RawRun, RawSample, ReportInputs, StabilityReport, VideoInfo};
use super::{CellFailure, StabilityError};
use crate::codec::{compress, CodecSpec};
use crate::imaging::{apply_to_video, psnr, scale_to_amplitude, Perturbation, VideoFrames};
use crate::metrics::MetricHandle;

pub const DEFAULT_AMPLITUDES: [f64; 4] = [0.02, 0.04, 0.06, 0.08];

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Strictly increasing, positive.
    pub amplitudes: Vec<f64>,
    /// At least two codec settings.
    pub rate_points: Vec<CodecSpec>,
    /// Apply perturbations through a contrast mask of this window.
    pub mask_window: Option<usize>,
    /// Worker threads; 0 lets the runtime decide.
    pub jobs: usize,
    /// Embedded verbatim in the report.
    pub provenance: serde_json::Value,
}

impl EvalConfig {
    pub fn new(amplitudes: Vec<f64>, rate_points: Vec<CodecSpec>) -> Self {
        Self { amplitudes, rate_points, mask_window: None, jobs: 0, provenance: serde_json::Value::Null }
    }

    pub fn validate(&self) -> Result<(), StabilityError> {
        let bad = |m: String| Err(StabilityError::Config(m));
        if self.amplitudes.is_empty() {
            return bad("at least one amplitude is required".into());
        }
        if let Some(a) = self.amplitudes.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return bad(format!("amplitudes must be positive, got {a}"));
        }
        if self.amplitudes.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("amplitudes must be strictly increasing, got {:?}", self.amplitudes));
        }
        if self.rate_points.len() < 2 {
            return bad(format!("at least two rate points are required, got {}", self.rate_points.len()));
        }
        let mut labels = std::collections::HashSet::new();
        for spec in &self.rate_points {
            spec.validate().map_err(|e| StabilityError::Config(e.to_string()))?;
            if !labels.insert(spec.label()) {
                return bad(format!("duplicate rate point {}", spec.label()));
            }
        }
        Ok(())
    }
}

/// A named source video.
#[derive(Debug, Clone)]
pub struct EvalVideo {
    pub id: String,
    /// Where it came from (path or generator spec), for the report.
    pub source: String,
    pub video: VideoFrames,
}

/// A metric under evaluation and the perturbation trained against it.
#[derive(Debug, Clone)]
pub struct TargetMetric {
    /// Stable identifier (its spec string); also the cache namespace.
    pub id: String,
    pub handle: MetricHandle,
    pub perturbation: Perturbation,
}

/// Work counters for one run. Not part of the report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PipelineStats {
    /// metric × video × (amplitudes + 1).
    pub variants: usize,
    /// Distinct variant contents.
    pub unique_variants: usize,
    /// Unique variants × rate points.
    pub tasks: usize,
    /// Tasks that actually ran the codec.
    pub compressions: usize,
    /// Target-metric score calls (frames).
    pub metric_evaluations: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub report: StabilityReport,
    pub stats: PipelineStats,
}

/// SHA-256 over shape, frame rate and every sample's bits.
pub fn video_hash(video: &VideoFrames) -> String {
    let mut h = Sha256::new();
    let shape = video.shape();
    h.update(b"uapg-video/1");
    for n in [video.len(), shape.height, shape.width, shape.channels] {
        h.update((n as u64).to_le_bytes());
    }
    h.update(video.frame_rate().to_le_bytes());
    for frame in video.frames() {
        for v in frame.data() {
            h.update(v.to_le_bytes());
        }
    }
    hex(&h.finalize())
}

/// (metric, video, amplitude index) of one grid row; `None` = unattacked.
#[derive(Debug, Clone, Copy)]
struct Coord {
    metric: usize,
    video: usize,
    amplitude: Option<usize>,
}

struct Variant {
    coord: Coord,
    hash: String,
    /// Metrics that score this content.
    metrics: Vec<usize>,
}

struct TaskResult {
    bitrate: f64,
    proxy: f64,
    targets: Vec<(usize, f64)>,
    compressed: bool,
}

struct Grid<'a> {
    cfg: &'a EvalConfig,
    videos: &'a [EvalVideo],
    metrics: &'a [TargetMetric],
    source_hashes: Vec<String>,
}

impl Grid<'_> {
    fn amplitude(&self, coord: Coord) -> Option<f64> {
        coord.amplitude.map(|k| self.cfg.amplitudes[k])
    }

    fn cell_error(&self, coord: Coord, metric: usize, rate: usize, source: CellFailure) -> StabilityError {
        StabilityError::Cell {
            metric: self.metrics[metric].id.clone(),
            video: self.videos[coord.video].id.clone(),
            amplitude: self.amplitude(coord),
            rate: self.cfg.rate_points.get(rate).map_or_else(|| "-".into(), CodecSpec::label),
            source: Box::new(source),
        }
    }

    /// The video fed to the codec at `coord`. A zero perturbation is a no-op.
    fn render(&self, coord: Coord) -> Result<VideoFrames, StabilityError> {
        let original = &self.videos[coord.video].video;
        let Some(amplitude) = self.amplitude(coord) else { return Ok(original.clone()) };
        let p = &self.metrics[coord.metric].perturbation;
        if p.is_zero() {
            return Ok(original.clone());
        }
        scale_to_amplitude(p, amplitude)
            .and_then(|scaled| apply_to_video(original, &scaled, self.cfg.mask_window))
            .map_err(|e| self.cell_error(coord, coord.metric, usize::MAX, e.into()))
    }

    fn run_task(&self, variant: &Variant, rate: usize, cache: Option<&ScoreCache>) -> Result<TaskResult, StabilityError> {
        let spec = &self.cfg.rate_points[rate];
        let label = spec.label();
        let coord = variant.coord;
        let key = |quantity: String| CacheKey::new(quantity, variant.hash.clone(), label.clone());
        let bitrate_key = key("bitrate".into());
        let proxy_key = key(format!("proxy-psnr:{}", self.source_hashes[coord.video]));
        let target_keys: Vec<_> = variant.metrics.iter().map(|&m| key(format!("target:{}", self.metrics[m].id))).collect();

        let lookup = |k: &CacheKey| cache.and_then(|c| c.get(k));
        let mut bitrate = lookup(&bitrate_key);
        let mut proxy = lookup(&proxy_key);
        let mut targets: Vec<Option<f64>> = target_keys.iter().map(lookup).collect();
        let complete = bitrate.is_some() && proxy.is_some() && targets.iter().all(Option::is_some);

        if !complete {
            let first = variant.metrics[0];
            let input = self.render(coord)?;
            let out = compress(&input, spec).map_err(|e| self.cell_error(coord, first, rate, e.into()))?;
            if !(out.measured_bitrate.is_finite() && out.measured_bitrate > 0.0) {
                return Err(self.cell_error(
                    coord,
                    first,
                    rate,
                    CellFailure::Codec(crate::codec::CodecError::Output(format!(
                        "non-positive bitrate {}",
                        out.measured_bitrate
                    ))),
                ));
            }
            let store = |k: &CacheKey, v: f64| cache.map_or(Ok(()), |c| c.put(k, v));
            if bitrate.is_none() {
                bitrate = Some(out.measured_bitrate);
                store(&bitrate_key, out.measured_bitrate)?;
            }
            if proxy.is_none() {
                let pristine = &self.videos[coord.video].video;
                let mut total = 0.0;
                for (reference, decoded) in pristine.frames().iter().zip(out.video.frames()) {
                    total += psnr(reference, decoded).map_err(|e| self.cell_error(coord, first, rate, e.into()))?;
                }
                let value = total / pristine.len() as f64;
                proxy = Some(value);
                store(&proxy_key, value)?;
            }
            for ((slot, &m), k) in targets.iter_mut().zip(&variant.metrics).zip(&target_keys) {
                if slot.is_none() {
                    let score = self.metrics[m]
                        .handle
                        .score_video(&out.video)
                        .map_err(|e| self.cell_error(coord, m, rate, e.into()))?;
                    if !score.is_finite() {
                        return Err(self.cell_error(
                            coord,
                            m,
                            rate,
                            CellFailure::Metric(crate::metrics::MetricError::Bridge {
                                message: format!("non-finite score {score}"),
                                retryable: false,
                            }),
                        ));
                    }
                    *slot = Some(score);
                    store(k, score)?;
                }
            }
        }
        Ok(TaskResult {
            bitrate: bitrate.expect("filled above"),
            proxy: proxy.expect("filled above"),
            targets: variant.metrics.iter().copied().zip(targets.into_iter().map(|t| t.expect("filled above"))).collect(),
            compressed: !complete,
        })
    }
}

/// Evaluate every metric × video × amplitude × rate point and assemble the
/// stability report.
///
/// Identical variant contents (e.g. the unattacked videos, shared by every
/// metric) are compressed once. With a cache, a task whose every value is
/// cached skips the codec entirely.
pub fn run_stability_pipeline(
    cfg: &EvalConfig,
    videos: &[EvalVideo],
    metrics: &[TargetMetric],
    cache: Option<&ScoreCache>,
) -> Result<PipelineOutcome, StabilityError> {
    cfg.validate()?;
    if videos.is_empty() || metrics.is_empty() {
        return Err(StabilityError::Config("at least one video and one target metric are required".into()));
    }
    for (what, ids) in [
        ("video", videos.iter().map(|v| v.id.as_str()).collect::<Vec<_>>()),
        ("metric", metrics.iter().map(|m| m.id.as_str()).collect()),
    ] {
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
            return Err(StabilityError::Config(format!("duplicate {what} id {dup}")));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| StabilityError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_grid(cfg, videos, metrics, cache))
}

fn run_grid(
    cfg: &EvalConfig,
    videos: &[EvalVideo],
    metrics: &[TargetMetric],
    cache: Option<&ScoreCache>,
) -> Result<PipelineOutcome, StabilityError> {
    let evaluations_before: u64 = metrics.iter().map(|m| m.handle.evaluations().scores).sum();
    let cache_before = cache.map(ScoreCache::stats).unwrap_or_default();

    let source_hashes: Vec<String> = videos.par_iter().map(|v| video_hash(&v.video)).collect();
    let grid = Grid { cfg, videos, metrics, source_hashes };

    let coords: Vec<Coord> = (0..metrics.len())
        .flat_map(|metric| {
            (0..videos.len()).flat_map(move |video| {
                std::iter::once(None)
                    .chain((0..cfg.amplitudes.len()).map(Some))
                    .map(move |amplitude| Coord { metric, video, amplitude })
            })
        })
        .collect();
    let hashes: Vec<String> = coords
        .par_iter()
        .map(|&c| {
            if grid.amplitude(c).is_none() || metrics[c.metric].perturbation.is_zero() {
                Ok(grid.source_hashes[c.video].clone())
            } else {
                grid.render(c).map(|v| video_hash(&v))
            }
        })
        .collect::<Result<_, _>>()?;

    let mut variants: Vec<Variant> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut variant_of = Vec::with_capacity(coords.len());
    for (&coord, hash) in coords.iter().zip(&hashes) {
        let i = *index.entry(hash.as_str()).or_insert_with(|| {
            variants.push(Variant { coord, hash: hash.clone(), metrics: Vec::new() });
            variants.len() - 1
        });
        if !variants[i].metrics.contains(&coord.metric) {
            variants[i].metrics.push(coord.metric);
        }
        variant_of.push(i);
    }

    let rates = cfg.rate_points.len();
    let results: Vec<TaskResult> = (0..variants.len() * rates)
        .into_par_iter()
        .map(|t| grid.run_task(&variants[t / rates], t % rates, cache))
        .collect::<Result<_, _>>()?;

    let mut metric_runs: Vec<MetricRuns> = metrics
        .iter()
        .map(|m| {
            let d = m.handle.descriptor();
            MetricRuns { id: m.id.clone(), name: d.name.clone(), score_range: [d.score_lo, d.score_hi], runs: Vec::new() }
        })
        .collect();
    for (&coord, &v) in coords.iter().zip(&variant_of) {
        let mut samples: Vec<RawSample> = (0..rates)
            .map(|r| {
                let res = &results[v * rates + r];
                let target_score = res
                    .targets
                    .iter()
                    .find(|(m, _)| *m == coord.metric)
                    .map(|(_, s)| *s)
                    .expect("every variant is scored by the metrics that produced it");
                RawSample { rate: cfg.rate_points[r].label(), bitrate: res.bitrate, target_score, proxy_score: res.proxy }
            })
            .collect();
        samples.sort_by(|a, b| a.bitrate.total_cmp(&b.bitrate));
        if let Some(w) = samples.windows(2).find(|w| w[0].bitrate == w[1].bitrate) {
            return Err(StabilityError::InvalidCurve(format!(
                "{}/{}@{}: rate points {} and {} produced the same bitrate {}",
                metrics[coord.metric].id,
                videos[coord.video].id,
                grid.amplitude(coord).map_or("none".into(), |a| a.to_string()),
                w[0].rate,
                w[1].rate,
                w[0].bitrate
            )));
        }
        metric_runs[coord.metric].runs.push(RawRun {
            video: videos[coord.video].id.clone(),
            amplitude: grid.amplitude(coord),
            samples,
        });
    }

    let video_infos = videos
        .iter()
        .zip(&grid.source_hashes)
        .map(|(v, hash)| {
            let shape = v.video.shape();
            VideoInfo {
                id: v.id.clone(),
                source: v.source.clone(),
                sha256: hash.clone(),
                frames: v.video.len(),
                height: shape.height,
                width: shape.width,
                frame_rate: v.video.frame_rate(),
            }
        })
        .collect();
    let report = assemble_report(ReportInputs {
        config: cfg.provenance.clone(),
        videos: video_infos,
        amplitudes: cfg.amplitudes.clone(),
        rate_points: cfg.rate_points.iter().map(CodecSpec::label).collect(),
        metrics: metric_runs,
    })?;

    let cache_after = cache.map(ScoreCache::stats).unwrap_or_default();
    let stats = PipelineStats {
        variants: coords.len(),
        unique_variants: variants.len(),
        tasks: results.len(),
        compressions: results.iter().filter(|r| r.compressed).count(),
        metric_evaluations: metrics.iter().map(|m| m.handle.evaluations().scores).sum::<u64>() - evaluations_before,
        cache_hits: cache_after.hits - cache_before.hits,
        cache_misses: cache_after.misses - cache_before.misses,
    };
    Ok(PipelineOutcome { report, stats })
}
