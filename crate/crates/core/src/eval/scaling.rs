use crate::unlearn::Trace;

/// `(cumulative flos, acc_f)` points of a trace, keeping only rows where the
/// FLO count strictly increased. The first point is the starting model.
pub fn scaling_curve(trace: &Trace) -> Vec<(f64, Option<f64>)> {
    let mut out: Vec<(f64, Option<f64>)> = Vec::new();
    for row in &trace.rows {
        match out.last() {
            Some(&(f, _)) if row.flos <= f => {
                if row.flos == f {
                    out.last_mut().expect("non-empty").1 = row.acc_f;
                }
            }
            _ => out.push((row.flos, row.acc_f)),
        }
    }
    out
}

/// Smallest FLO count on the curve at which `acc_f <= target`.
pub fn flos_to_reach(curve: &[(f64, Option<f64>)], target: f64) -> Option<f64> {
    curve
        .iter()
        .find(|(_, acc)| acc.is_some_and(|a| a <= target))
        .map(|&(f, _)| f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unlearn::{Phase, TraceRow};

    fn row(epoch: usize, flos: f64, acc_f: f64) -> TraceRow {
        TraceRow {
            epoch,
            phase: Phase::Train,
            loss_f: None,
            loss_r: 0.0,
            acc_test: 0.0,
            acc_f: Some(acc_f),
            acc_r: 0.0,
            flos,
            seconds: 0.0,
        }
    }

    #[test]
    fn repeated_flos_keep_latest_point() {
        let trace = Trace { rows: vec![row(0, 0.0, 100.0), row(1, 10.0, 80.0), row(1, 10.0, 70.0), row(2, 20.0, 30.0)] };
        let c = scaling_curve(&trace);
        assert_eq!(c, vec![(0.0, Some(100.0)), (10.0, Some(70.0)), (20.0, Some(30.0))]);
        assert_eq!(flos_to_reach(&c, 40.0), Some(20.0));
        assert_eq!(flos_to_reach(&c, 10.0), None);
    }
}
