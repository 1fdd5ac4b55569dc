//! The stability report and its deterministic assembly from raw RD samples.
//!
//! Everything derived (normalised curves, gains, losses, dependence, scores)
//! is computed by [`assemble_report`] from the raw samples it stores, so a
//! report can always be recomputed and checked bit-for-bit.

use serde::{Deserialize, Serialize};

use super::curve::{gain, normalize_proxy_curves, normalize_target_curves, Extrema, RDCurve, RdPoint};
use super::dependence::{build_dependence, stability_score, DependencePoint, GainLoss};
use super::StabilityError;

pub const REPORT_SCHEMA: &str = "uapg-report/1";

/// Fixed measurement conventions, stored so readers need not guess.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub proxy_metric: String,
    pub proxy_color_space: String,
    pub proxy_reference: String,
    pub psnr_cap_db: f64,
    pub video_score: String,
    pub proxy_loss_sign: String,
    pub bitrate_unit: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            proxy_metric: "psnr".into(),
            proxy_color_space: "rgb".into(),
            proxy_reference: "pristine-uncompressed".into(),
            psnr_cap_db: crate::imaging::DEFAULT_PSNR_CAP,
            video_score: "mean-over-frames".into(),
            proxy_loss_sign: "baseline-minus-attacked".into(),
            bitrate_unit: "bits/second".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoInfo {
    pub id: String,
    pub source: String,
    pub sha256: String,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub frame_rate: f64,
}

/// One compressed variant's measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub rate: String,
    pub bitrate: f64,
    pub target_score: f64,
    pub proxy_score: f64,
}

/// All rate points of one video at one amplitude, ordered by bitrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRun {
    pub video: String,
    pub amplitude: Option<f64>,
    pub samples: Vec<RawSample>,
}

/// Raw results for one target metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRuns {
    pub id: String,
    pub name: String,
    pub score_range: [f64; 2],
    pub runs: Vec<RawRun>,
}

/// Everything [`assemble_report`] needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportInputs {
    pub config: serde_json::Value,
    pub videos: Vec<VideoInfo>,
    pub amplitudes: Vec<f64>,
    pub rate_points: Vec<String>,
    pub metrics: Vec<MetricRuns>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSample {
    pub bitrate: f64,
    pub target: f64,
    pub proxy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRun {
    pub video: String,
    pub amplitude: Option<f64>,
    pub samples: Vec<NormalizedSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub video: String,
    pub amplitude: f64,
    pub target_gain: f64,
    pub proxy_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSection {
    pub id: String,
    pub name: String,
    pub score_range: [f64; 2],
    pub target_extrema: Extrema,
    pub runs: Vec<RawRun>,
    pub normalized: Vec<NormalizedRun>,
    pub cells: Vec<CellOutcome>,
    pub dependence: Vec<DependencePoint>,
    pub stability_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub schema: String,
    pub conventions: Conventions,
    pub config: serde_json::Value,
    pub videos: Vec<VideoInfo>,
    pub amplitudes: Vec<f64>,
    pub rate_points: Vec<String>,
    pub proxy_extrema: Extrema,
    pub common_interval: [f64; 2],
    pub metrics: Vec<MetricSection>,
}

fn curves_of(metric: &MetricRuns, pick: impl Fn(&RawSample) -> f64) -> Result<Vec<RDCurve>, StabilityError> {
    metric
        .runs
        .iter()
        .map(|run| {
            let points = run.samples.iter().map(|s| RdPoint { bitrate: s.bitrate, score: pick(s) }).collect();
            RDCurve::new(run.video.clone(), metric.id.clone(), run.amplitude, points)
        })
        .collect()
}

/// Normalise, compute gains/losses, average over videos and score.
pub fn assemble_report(inputs: ReportInputs) -> Result<StabilityReport, StabilityError> {
    let ReportInputs { config, videos, amplitudes, rate_points, metrics } = inputs;
    if metrics.is_empty() {
        return Err(StabilityError::Config("report needs at least one metric".into()));
    }
    let video_ids: Vec<String> = videos.iter().map(|v| v.id.clone()).collect();

    let mut target = Vec::with_capacity(metrics.len());
    let mut proxy_raw = Vec::new();
    for m in &metrics {
        target.push(normalize_target_curves(&curves_of(m, |s| s.target_score)?)?);
        proxy_raw.extend(curves_of(m, |s| s.proxy_score)?);
    }
    let (proxy_norm, proxy_extrema) = normalize_proxy_curves(&proxy_raw)?;

    let mut sections = Vec::with_capacity(metrics.len());
    let mut dependences = Vec::with_capacity(metrics.len());
    let mut proxy_offset = 0;
    for (m, (target_norm, target_extrema)) in metrics.into_iter().zip(target) {
        let proxy = &proxy_norm[proxy_offset..proxy_offset + m.runs.len()];
        proxy_offset += m.runs.len();

        let find = |video: &str, amplitude: Option<f64>| m.runs.iter().position(|r| r.video == video && r.amplitude == amplitude);
        let mut grid = vec![vec![None; amplitudes.len()]; video_ids.len()];
        let mut cells = Vec::new();
        for (v, video) in video_ids.iter().enumerate() {
            let Some(base) = find(video, None) else { continue };
            for (k, &a) in amplitudes.iter().enumerate() {
                let Some(att) = find(video, Some(a)) else { continue };
                let target_gain = gain(&target_norm[att], &target_norm[base])?;
                let proxy_loss = -gain(&proxy[att], &proxy[base])?;
                grid[v][k] = Some(GainLoss { target_gain, proxy_loss });
                cells.push(CellOutcome { video: video.clone(), amplitude: a, target_gain, proxy_loss });
            }
        }
        let dependence = build_dependence(&m.id, &video_ids, &amplitudes, &grid)?;
        dependences.push((m.id.clone(), dependence.clone()));

        let normalized = m
            .runs
            .iter()
            .zip(target_norm.iter().zip(proxy))
            .map(|(run, (t, p))| NormalizedRun {
                video: run.video.clone(),
                amplitude: run.amplitude,
                samples: t
                    .points()
                    .iter()
                    .zip(p.points())
                    .map(|(t, p)| NormalizedSample { bitrate: t.bitrate, target: t.score, proxy: p.score })
                    .collect(),
            })
            .collect();
        sections.push(MetricSection {
            id: m.id,
            name: m.name,
            score_range: m.score_range,
            target_extrema,
            runs: m.runs,
            normalized,
            cells,
            dependence,
            stability_score: f64::NAN,
        });
    }

    let scores = stability_score(&dependences)?;
    for (section, score) in sections.iter_mut().zip(&scores.scores) {
        section.stability_score = *score;
    }
    Ok(StabilityReport {
        schema: REPORT_SCHEMA.to_string(),
        conventions: Conventions::default(),
        config,
        videos,
        amplitudes,
        rate_points,
        proxy_extrema,
        common_interval: scores.interval,
        metrics: sections,
    })
}

impl StabilityReport {
    /// The raw inputs stored in this report.
    pub fn inputs(&self) -> ReportInputs {
        ReportInputs {
            config: self.config.clone(),
            videos: self.videos.clone(),
            amplitudes: self.amplitudes.clone(),
            rate_points: self.rate_points.clone(),
            metrics: self
                .metrics
                .iter()
                .map(|m| MetricRuns { id: m.id.clone(), name: m.name.clone(), score_range: m.score_range, runs: m.runs.clone() })
                .collect(),
        }
    }

    /// Recompute every derived quantity from the stored raw samples.
    pub fn recompute(&self) -> Result<StabilityReport, StabilityError> {
        let mut again = assemble_report(self.inputs())?;
        again.conventions = self.conventions.clone();
        Ok(again)
    }

    /// `(metric id, score)` sorted by descending score (ties by id).
    pub fn ranking(&self) -> Vec<(&str, f64)> {
        let mut rows: Vec<_> = self.metrics.iter().map(|m| (m.id.as_str(), m.stability_score)).collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        rows
    }

    pub fn metric(&self, id: &str) -> Option<&MetricSection> {
        self.metrics.iter().find(|m| m.id == id)
    }

    /// Pretty JSON with a trailing newline, after schema validation.
    pub fn to_json(&self) -> Result<String, StabilityError> {
        let value = serde_json::to_value(self)?;
        super::schema::validate_report(&value)?;
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        Ok(text)
    }

    /// Parse and schema-validate a report.
    pub fn from_json(text: &str) -> Result<Self, StabilityError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        super::schema::validate_report(&value)?;
        Ok(serde_json::from_value(value)?)
    }
}
