//! Aggregation of finished runs into leaderboard tables.
//!
//! Runs are grouped by data spec first. Averages are only ever taken inside
//! one group, and a report with more than one group says so at the top.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::eval::report::EvalReport;
use crate::unlearn::Method;

pub const COMPOSITE_DOC: &str = "Composite = (acc_test + acc_r + (100 - |acc_f - chance|) + (100 - mia_success)) / 4, \
chance = 100 / num_classes. Higher is better.";

/// One finished run as read back from its artifact directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub del_ratio: u32,
    /// Canonical description of the data spec the run used.
    pub data_key: String,
    pub num_classes: usize,
    pub report: EvalReport,
}

/// Mean of the defined values, `None` if there are none.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn composite(acc_test: f64, acc_r: f64, acc_f: Option<f64>, mia: Option<f64>, chance: f64) -> Option<f64> {
    let (acc_f, mia) = (acc_f?, mia?);
    Some((acc_test + acc_r + (100.0 - (acc_f - chance).abs()) + (100.0 - mia)) / 4.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodRow {
    pub data_key: String,
    pub method: Method,
    pub runs: usize,
    pub acc_test: f64,
    pub acc_f: Option<f64>,
    pub acc_r: f64,
    pub mia_success: Option<f64>,
    pub seconds: f64,
    pub composite: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub data_key: String,
    pub method: Method,
    pub del_ratio: u32,
    pub runs: usize,
    pub acc_test: f64,
    pub acc_f: Option<f64>,
    pub acc_r: f64,
    pub mia_success: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaderboard {
    /// Ranked by composite within each data group, undefined composites last.
    pub rows: Vec<MethodRow>,
    pub curves: Vec<CurveRow>,
    pub data_keys: Vec<String>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl Leaderboard {
    pub fn build(runs: &[RunSummary]) -> Self {
        let mut by_method: BTreeMap<(&str, Method), Vec<&RunSummary>> = BTreeMap::new();
        let mut by_ratio: BTreeMap<(&str, Method, u32), Vec<&RunSummary>> = BTreeMap::new();
        for r in runs {
            by_method.entry((&r.data_key, r.method)).or_default().push(r);
            by_ratio.entry((&r.data_key, r.method, r.del_ratio)).or_default().push(r);
        }
        let mut rows: Vec<MethodRow> = by_method
            .into_iter()
            .map(|((key, method), group)| {
                let chance = 100.0 / group[0].num_classes as f64;
                let acc_test = mean(group.iter().map(|r| r.report.acc_test));
                let acc_r = mean(group.iter().map(|r| r.report.acc_r));
                let acc_f = mean_defined(group.iter().map(|r| r.report.acc_f));
                let mia_success = mean_defined(group.iter().map(|r| r.report.mia_success));
                MethodRow {
                    data_key: key.to_string(),
                    method,
                    runs: group.len(),
                    acc_test,
                    acc_f,
                    acc_r,
                    mia_success,
                    seconds: mean(group.iter().map(|r| r.report.seconds)),
                    composite: composite(acc_test, acc_r, acc_f, mia_success, chance),
                }
            })
            .collect();
        rows.sort_by(|a, b| {
            a.data_key.cmp(&b.data_key).then_with(|| match (a.composite, b.composite) {
                (Some(x), Some(y)) => y.total_cmp(&x),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => std::cmp::Ordering::Equal,
            })
            .then(a.method.cmp(&b.method))
        });
        let curves = by_ratio
            .into_iter()
            .map(|((key, method, del_ratio), group)| CurveRow {
                data_key: key.to_string(),
                method,
                del_ratio,
                runs: group.len(),
                acc_test: mean(group.iter().map(|r| r.report.acc_test)),
                acc_f: mean_defined(group.iter().map(|r| r.report.acc_f)),
                acc_r: mean(group.iter().map(|r| r.report.acc_r)),
                mia_success: mean_defined(group.iter().map(|r| r.report.mia_success)),
            })
            .collect();
        let mut data_keys: Vec<String> = runs.iter().map(|r| r.data_key.clone()).collect();
        data_keys.sort();
        data_keys.dedup();
        Leaderboard { rows, curves, data_keys }
    }

    pub fn mixed_specs(&self) -> bool {
        self.data_keys.len() > 1
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("# Unlearning leaderboard\n\n");
        let _ = writeln!(s, "{COMPOSITE_DOC}\n");
        if self.mixed_specs() {
            let _ = writeln!(
                s,
                "**Warning: runs use {} different data specs. Each spec is ranked separately and never averaged together.**\n",
                self.data_keys.len()
            );
        }
        for key in &self.data_keys {
            let _ = writeln!(s, "## Data: `{key}`\n");
            s.push_str("| Rank | Method | Runs | acc_test | acc_f | acc_r | MIA success | Seconds | Composite |\n");
            s.push_str("|---:|---|---:|---:|---:|---:|---:|---:|---:|\n");
            for (i, r) in self.rows.iter().filter(|r| &r.data_key == key).enumerate() {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                    i + 1,
                    r.method.display_name(),
                    r.runs,
                    fmt1(Some(r.acc_test)),
                    fmt1(r.acc_f),
                    fmt1(Some(r.acc_r)),
                    fmt1(r.mia_success),
                    format_seconds(r.seconds),
                    fmt1(r.composite),
                );
            }
            s.push('\n');
        }
        s
    }

    /// Two-column table of mean unlearning time in hours per method.
    pub fn time_table(&self) -> String {
        let mut s = String::from("| Method | Unlearning time (hrs) (↓) |\n|---|---:|\n");
        for (method, hours) in self.per_method(|r| Some(r.seconds / 3600.0)) {
            let _ = writeln!(s, "| {} | {} |", method.display_name(), format_hours(hours));
        }
        s
    }

    /// Two-column table of mean membership-inference success per method.
    pub fn mia_table(&self) -> String {
        let mut s = String::from("| Method | Success Rate (%) (↓) |\n|---|---:|\n");
        for (method, mia) in self.per_method(|r| r.mia_success) {
            let _ = writeln!(s, "| {} | {} |", method.display_name(), fmt1(mia));
        }
        s
    }

    /// Averages across data groups for the two-column tables.
    fn per_method(&self, f: impl Fn(&MethodRow) -> Option<f64>) -> Vec<(Method, Option<f64>)> {
        let mut by: BTreeMap<Method, Vec<Option<f64>>> = BTreeMap::new();
        for r in &self.rows {
            by.entry(r.method).or_default().push(f(r));
        }
        by.into_iter().map(|(m, v)| (m, mean_defined(v))).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("data,method,runs,acc_test,acc_f,acc_r,mia_success,seconds,composite\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                csv_field(&r.data_key),
                r.method,
                r.runs,
                r.acc_test,
                opt(r.acc_f),
                r.acc_r,
                opt(r.mia_success),
                r.seconds,
                opt(r.composite)
            );
        }
        s
    }

    pub fn curves_csv(&self) -> String {
        let mut s = String::from("data,method,del_ratio,runs,acc_test,acc_f,acc_r,mia_success\n");
        for r in &self.curves {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                csv_field(&r.data_key),
                r.method,
                r.del_ratio,
                r.runs,
                r.acc_test,
                opt(r.acc_f),
                r.acc_r,
                opt(r.mia_success)
            );
        }
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt1(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "n/a".into())
}

fn format_seconds(s: f64) -> String {
    format!("{s:.3}")
}

/// One decimal once runs take at least 0.1 h, otherwise
/// enough significant digits to tell desk-scale runs apart.
fn format_hours(h: Option<f64>) -> String {
    match h {
        None => "n/a".into(),
        Some(h) if h >= 0.1 => format!("{h:.1}"),
        Some(h) => format!("{h:.2e}"),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(method: Method, key: &str, mia: f64) -> RunSummary {
        RunSummary {
            method,
            del_ratio: 5,
            data_key: key.into(),
            num_classes: 3,
            report: EvalReport {
                acc_test: 90.0,
                acc_f: Some(40.0),
                acc_r: 95.0,
                seconds: 1.0,
                flos: 1e9,
                mia_success: Some(mia),
                transfer_acc: None,
                config_hash: "x".into(),
                seed: 0,
            },
        }
    }

    #[test]
    fn mean_of_forty_and_sixty() {
        let lb = Leaderboard::build(&[summary(Method::NegGrad, "a", 40.0), summary(Method::NegGrad, "a", 60.0)]);
        assert_eq!(lb.rows.len(), 1);
        assert_eq!(lb.rows[0].mia_success, Some(50.0));
        assert!(lb.mia_table().contains("| NegGrad | 50.0 |"));
    }

    #[test]
    fn mixed_specs_are_flagged_not_averaged() {
        let lb = Leaderboard::build(&[summary(Method::NegGrad, "a", 40.0), summary(Method::NegGrad, "b", 60.0)]);
        assert!(lb.mixed_specs());
        assert_eq!(lb.rows.len(), 2);
        assert!(lb.to_markdown().contains("Warning"));
    }

    #[test]
    fn undefined_values_are_skipped() {
        assert_eq!(mean_defined([None, Some(2.0), Some(4.0)]), Some(3.0));
        assert_eq!(mean_defined([None, None]), None);
        assert_eq!(composite(90.0, 90.0, None, Some(50.0), 33.3), None);
    }
}
