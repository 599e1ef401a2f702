use crate::nn::model::Model;

/// Floating-point operations charged per parameter per sample-step:
/// 2 for the forward pass and 4 for the backward pass.
pub const FLOS_PER_PARAM_SAMPLE: f64 = 6.0;

pub fn count_flos_for(param_count: usize, num_samples: usize, num_steps: usize) -> f64 {
    FLOS_PER_PARAM_SAMPLE * param_count as f64 * num_samples as f64 * num_steps as f64
}

/// `6 * P * num_samples * num_steps`.
pub fn count_flos(model: &Model, num_samples: usize, num_steps: usize) -> f64 {
    count_flos_for(model.param_count(), num_samples, num_steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convention() {
        assert_eq!(count_flos_for(1000, 10, 5), 3.0e5);
        assert_eq!(count_flos_for(1000, 10, 0), 0.0);
        assert_eq!(count_flos_for(2000, 10, 5), 2.0 * count_flos_for(1000, 10, 5));
    }
}
