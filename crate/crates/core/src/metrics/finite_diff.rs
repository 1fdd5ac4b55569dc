use super::{GradientField, MetricError, MetricHandle};
use crate::imaging::{Field, ImagingError};

/// Central-difference gradient `(f(x + h·e) − f(x − h·e)) / 2h`, one element
/// at a time. Perturbed inputs are not clamped, so the quotient is taken on
/// the same unconstrained function the analytic gradient differentiates.
///
/// Costs `2·len` score evaluations.
pub fn finite_diff_gradient(
    m: &MetricHandle,
    x: &Field,
    h: f64,
) -> Result<GradientField, MetricError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(ImagingError::Parameter(format!("step h must be positive, got {h}")).into());
    }
    let mut probe = x.clone();
    let mut out = Vec::with_capacity(x.data().len());
    for i in 0..x.data().len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = m.score(&probe)?;
        probe.data_mut()[i] = orig - h;
        let minus = m.score(&probe)?;
        probe.data_mut()[i] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(Field::new(x.shape(), out)?)
}
