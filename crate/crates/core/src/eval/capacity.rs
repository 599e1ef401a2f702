use crate::error::{Error, Result};

/// Largest deletion ratio whose test accuracy stays within `tolerance` of
/// `baseline_acc`, scanning ratios upward and stopping at the first failure.
/// Returns 0 when the smallest ratio already fails.
pub fn deletion_capacity(sweep: &[(u32, f64)], baseline_acc: f64, tolerance: f64) -> Result<u32> {
    if sweep.is_empty() {
        return Err(Error::config("deletion capacity needs a non-empty sweep"));
    }
    if sweep.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::config("sweep must be sorted by strictly increasing ratio"));
    }
    let mut capacity = 0;
    for &(ratio, acc) in sweep {
        if acc < baseline_acc - tolerance {
            break;
        }
        capacity = ratio;
    }
    Ok(capacity)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sweep_from_drops(baseline: f64, drops: &[f64]) -> Vec<(u32, f64)> {
        drops.iter().enumerate().map(|(i, d)| (i as u32 + 1, baseline - d)).collect()
    }

    #[test]
    fn definition_examples() {
        let s = sweep_from_drops(90.0, &[0.5, 1.0, 3.0, 6.0]);
        assert_eq!(deletion_capacity(&s, 90.0, 2.0).unwrap(), 2);
        let s = sweep_from_drops(90.0, &[0.5, 1.0, 1.5, 1.9]);
        assert_eq!(deletion_capacity(&s, 90.0, 2.0).unwrap(), 4);
        let s = sweep_from_drops(90.0, &[2.5, 1.0]);
        assert_eq!(deletion_capacity(&s, 90.0, 2.0).unwrap(), 0);
    }

    #[test]
    fn empty_or_unsorted_rejected() {
        assert!(deletion_capacity(&[], 90.0, 1.0).is_err());
        assert!(deletion_capacity(&[(2, 90.0), (1, 90.0)], 90.0, 1.0).is_err());
    }
}
