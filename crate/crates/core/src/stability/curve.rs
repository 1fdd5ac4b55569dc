//! Rate–distortion curves, min/max normalisation and normalised areas.

use serde::{Deserialize, Serialize};

use super::StabilityError;

/// One point of an RD curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    /// Bits per second.
    pub bitrate: f64,
    pub score: f64,
}

/// Score as a function of bitrate, for one video × metric × amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RDCurve {
    pub video: String,
    pub metric: String,
    /// `None` for the unattacked curve.
    pub amplitude: Option<f64>,
    points: Vec<RdPoint>,
}

impl RDCurve {
    /// Points must have strictly increasing bitrates, at least two of them,
    /// and finite values.
    pub fn new(
        video: impl Into<String>,
        metric: impl Into<String>,
        amplitude: Option<f64>,
        points: Vec<RdPoint>,
    ) -> Result<Self, StabilityError> {
        let curve = Self { video: video.into(), metric: metric.into(), amplitude, points };
        curve.check()?;
        Ok(curve)
    }

    fn check(&self) -> Result<(), StabilityError> {
        let fail = |why: String| Err(StabilityError::InvalidCurve(format!("{}: {why}", self.label())));
        if self.points.len() < 2 {
            return fail(format!("needs at least 2 points, has {}", self.points.len()));
        }
        if let Some(p) = self.points.iter().find(|p| !p.bitrate.is_finite() || !p.score.is_finite()) {
            return fail(format!("non-finite point ({}, {})", p.bitrate, p.score));
        }
        if let Some(w) = self.points.windows(2).find(|w| w[1].bitrate <= w[0].bitrate) {
            return fail(format!(
                "bitrates must strictly increase, got {} then {}",
                w[0].bitrate, w[1].bitrate
            ));
        }
        Ok(())
    }

    /// "metric/video@amplitude" for messages.
    pub fn label(&self) -> String {
        match self.amplitude {
            Some(a) => format!("{}/{}@{a}", self.metric, self.video),
            None => format!("{}/{}@none", self.metric, self.video),
        }
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    pub fn bitrate_span(&self) -> (f64, f64) {
        (self.points[0].bitrate, self.points[self.points.len() - 1].bitrate)
    }

    fn score_range(&self) -> (f64, f64) {
        self.points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.score), hi.max(p.score)))
    }

    fn with_scores(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            video: self.video.clone(),
            metric: self.metric.clone(),
            amplitude: self.amplitude,
            points: self.points.iter().map(|p| RdPoint { bitrate: p.bitrate, score: f(p.score) }).collect(),
        }
    }

    /// Linear interpolation of the score at `bitrate`, which must lie inside
    /// the curve's span.
    pub fn interpolate(&self, bitrate: f64) -> f64 {
        interpolate(self.points.iter().map(|p| (p.bitrate, p.score)), bitrate)
    }

    /// The piece of the curve over `[lo, hi]`, with interpolated endpoints.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self, StabilityError> {
        let (b0, b1) = self.bitrate_span();
        if !(lo < hi && b0 <= lo && hi <= b1) {
            return Err(StabilityError::InvalidCurve(format!(
                "{}: cannot restrict span [{b0}, {b1}] to [{lo}, {hi}]",
                self.label()
            )));
        }
        let mut points = Vec::with_capacity(self.points.len() + 2);
        points.push(RdPoint { bitrate: lo, score: self.interpolate(lo) });
        points.extend(self.points.iter().filter(|p| p.bitrate > lo && p.bitrate < hi).copied());
        points.push(RdPoint { bitrate: hi, score: self.interpolate(hi) });
        Self::new(self.video.clone(), self.metric.clone(), self.amplitude, points)
    }
}

/// Piecewise-linear interpolation through `(x, y)` knots sorted by `x`.
/// Where several knots share the query abscissa, the first one wins.
pub(crate) fn interpolate(knots: impl IntoIterator<Item = (f64, f64)>, x: f64) -> f64 {
    let mut prev: Option<(f64, f64)> = None;
    let mut last = (f64::NAN, f64::NAN);
    for (kx, ky) in knots {
        if kx == x {
            return ky;
        }
        if let Some((px, py)) = prev {
            if px < x && x < kx {
                return py + (ky - py) * ((x - px) / (kx - px));
            }
        }
        prev = Some((kx, ky));
        last = (kx, ky);
    }
    // Only reachable for x outside the knot span; clamp to the nearest end.
    last.1
}

/// Extrema used for a min/max normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub min: f64,
    pub max: f64,
}

/// Map every score of `curves` through `(s − min)/(max − min)`, with the
/// extrema taken over the whole set.
pub fn normalize_curves(curves: &[RDCurve], what: &str) -> Result<(Vec<RDCurve>, Extrema), StabilityError> {
    let (min, max) = curves
        .iter()
        .map(RDCurve::score_range)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)));
    if !(max > min) {
        return Err(StabilityError::Degenerate(format!(
            "{what} is constant over the evaluation set (min = max = {min})"
        )));
    }
    let extrema = Extrema { min, max };
    Ok((curves.iter().map(|c| normalize_with(c, extrema)).collect(), extrema))
}

/// Normalise one curve with given extrema.
pub fn normalize_with(curve: &RDCurve, extrema: Extrema) -> RDCurve {
    let span = extrema.max - extrema.min;
    curve.with_scores(|s| (s - extrema.min) / span)
}

/// Normalise all target-metric curves of one metric together.
pub fn normalize_target_curves(curves: &[RDCurve]) -> Result<(Vec<RDCurve>, Extrema), StabilityError> {
    let name = curves.first().map(|c| c.metric.as_str()).unwrap_or("target metric");
    normalize_curves(curves, &format!("target metric {name}"))
}

/// Normalise the proxy curves of every metric's runs with pooled extrema.
pub fn normalize_proxy_curves(curves: &[RDCurve]) -> Result<(Vec<RDCurve>, Extrema), StabilityError> {
    normalize_curves(curves, "proxy metric")
}

/// Trapezoidal area under the curve with its bitrate span mapped onto [0, 1].
pub fn curve_area(curve: &RDCurve) -> f64 {
    let (b0, b1) = curve.bitrate_span();
    let span = b1 - b0;
    curve
        .points()
        .windows(2)
        .map(|w| {
            let x0 = (w[0].bitrate - b0) / span;
            let x1 = (w[1].bitrate - b0) / span;
            (x1 - x0) * (w[0].score + w[1].score) * 0.5
        })
        .sum()
}

/// Area of `attacked` minus area of `baseline`, both restricted to the
/// bitrate range on which both are defined.
pub fn gain(attacked: &RDCurve, baseline: &RDCurve) -> Result<f64, StabilityError> {
    let (a0, a1) = attacked.bitrate_span();
    let (c0, c1) = baseline.bitrate_span();
    let lo = a0.max(c0);
    let hi = a1.min(c1);
    if !(lo < hi) {
        return Err(StabilityError::NoOverlap(format!(
            "{} spans [{a0}, {a1}] and {} spans [{c0}, {c1}]",
            attacked.label(),
            baseline.label()
        )));
    }
    Ok(curve_area(&attacked.restrict(lo, hi)?) - curve_area(&baseline.restrict(lo, hi)?))
}
