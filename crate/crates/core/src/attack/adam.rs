use super::AttackError;

/// Bias-corrected Adam moments for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Zero moments with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(len: usize) -> Self {
        Self::with_constants(len, 0.9, 0.999, 1e-8)
    }

    pub fn with_constants(len: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        AdamState {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// One descent step: `params ← params − lr · m̂ / (√v̂ + ε)`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<(), AttackError> {
        if params.len() != grad.len() || params.len() != self.first_moment.len() {
            return Err(AttackError::Parameter(format!(
                "adam shape mismatch: params {}, grad {}, state {}",
                params.len(),
                grad.len(),
                self.first_moment.len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let correction1 = 1.0 - b1.powi(t);
        let correction2 = 1.0 - b2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.first_moment[i] = b1 * self.first_moment[i] + (1.0 - b1) * g;
            self.second_moment[i] = b2 * self.second_moment[i] + (1.0 - b2) * g * g;
            let m_hat = self.first_moment[i] / correction1;
            let v_hat = self.second_moment[i] / correction2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}
