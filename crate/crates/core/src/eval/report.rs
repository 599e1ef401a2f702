use serde::{Deserialize, Serialize};

use crate::data::DatasetSplit;
use crate::error::Result;
use crate::eval::metrics::evaluate;
use crate::eval::mia::mia_success;
use crate::nn::Model;

/// Nominal throughput used to turn a FLO count into report seconds.
pub const REFERENCE_FLOS_PER_SECOND: f64 = 1.0e9;

/// Metric bundle for one unlearning run. Percentages are in `[0, 100]`;
/// undefined metrics serialize as `null`.
///
/// `seconds` is `flos / REFERENCE_FLOS_PER_SECOND` so the report stays a pure
/// function of its inputs. Measured wall time lives next to it in the run
/// directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc_test: f64,
    pub acc_f: Option<f64>,
    pub acc_r: f64,
    pub seconds: f64,
    pub flos: f64,
    pub mia_success: Option<f64>,
    pub transfer_acc: Option<f64>,
    pub config_hash: String,
    pub seed: u64,
}

impl EvalReport {
    pub fn compute(
        model: &Model,
        split: &DatasetSplit,
        flos: f64,
        transfer_acc: Option<f64>,
        config_hash: &str,
        seed: u64,
    ) -> Result<Self> {
        let acc = evaluate(model, split)?;
        let mia = mia_success(model, split)?;
        Ok(EvalReport {
            acc_test: acc.acc_test,
            acc_f: acc.acc_f,
            acc_r: acc.acc_r,
            seconds: flos / REFERENCE_FLOS_PER_SECOND,
            flos,
            mia_success: mia.success,
            transfer_acc,
            config_hash: config_hash.to_string(),
            seed,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
