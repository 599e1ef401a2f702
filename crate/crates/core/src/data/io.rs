//! Split export/import: one CSV of rows plus a JSON sidecar.
//!
//! CSV columns: `partition,index,x0..x{d-1},label,is_deleted` where
//! `partition` is `train` or `test`. Floats use the shortest round-trip
//! representation so an import reproduces the split bit for bit.

use std::fs::{self, File};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::split::DatasetSplit;
use crate::data::synth::SynthSpec;
use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSidecar {
    pub format_version: u32,
    pub spec: SynthSpec,
    pub seed: u64,
    pub del_ratio: u32,
    pub train_len: usize,
    pub test_len: usize,
}

pub fn export_split(split: &DatasetSplit, csv_path: &Path, sidecar_path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(csv_path)?);
    let d = split.dim();
    let mut header = vec!["partition".to_string(), "index".to_string()];
    header.extend((0..d).map(|j| format!("x{j}")));
    header.push("label".into());
    header.push("is_deleted".into());
    w.write_record(&header)?;

    let deleted = split.is_deleted_mask();
    let parts = [
        ("train", split.train_x(), split.train_y()),
        ("test", split.test_x(), split.test_y()),
    ];
    for (name, x, y) in parts {
        for i in 0..y.len() {
            let mut rec = vec![name.to_string(), i.to_string()];
            rec.extend(x.row(i).iter().map(f64::to_string));
            rec.push(y[i].to_string());
            let flag = name == "train" && deleted[i];
            rec.push(u8::from(flag).to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;

    let sidecar = SplitSidecar {
        format_version: 1,
        spec: split.spec().clone(),
        seed: split.del_seed(),
        del_ratio: split.del_ratio(),
        train_len: split.train_len(),
        test_len: split.test_len(),
    };
    fs::write(sidecar_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn import_split(csv_path: &Path, sidecar_path: &Path) -> Result<DatasetSplit> {
    let sidecar: SplitSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path)?)?;
    let mut r = csv::Reader::from_reader(File::open(csv_path)?);
    let d = r.headers()?.len().checked_sub(4).ok_or_else(|| Error::shape("too few columns"))?;
    let (mut train_x, mut train_y, mut test_x, mut test_y) = (vec![], vec![], vec![], vec![]);
    let mut deleted = Vec::new();
    let parse_err = |what: &str| Error::shape(format!("malformed {what} in split csv"));
    for rec in r.records() {
        let rec = rec?;
        let feats: Vec<f64> = (0..d)
            .map(|j| rec[2 + j].parse::<f64>().map_err(|_| parse_err("feature")))
            .collect::<Result<_>>()?;
        let label: usize = rec[2 + d].parse().map_err(|_| parse_err("label"))?;
        let flag = &rec[3 + d] == "1";
        match &rec[0] {
            "train" => {
                if flag {
                    deleted.push(train_y.len());
                }
                train_x.extend(feats);
                train_y.push(label);
            }
            "test" => {
                test_x.extend(feats);
                test_y.push(label);
            }
            _ => return Err(parse_err("partition")),
        }
    }
    if train_y.len() != sidecar.train_len || test_y.len() != sidecar.test_len {
        return Err(Error::shape("row counts disagree with sidecar"));
    }
    let split = DatasetSplit::new(
        sidecar.spec,
        Tensor::new(vec![train_y.len(), d], train_x)?,
        train_y,
        Tensor::new(vec![test_y.len(), d], test_x)?,
        test_y,
    )?;
    split.with_del_indices(deleted, sidecar.del_ratio, sidecar.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::generate;

    #[test]
    fn export_import_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let split = generate(&SynthSpec::blobs(3, 20, 0.37, 3, 8))
            .unwrap()
            .with_deletion(7, 8)
            .unwrap();
        let (c, s) = (dir.path().join("split.csv"), dir.path().join("split.json"));
        export_split(&split, &c, &s).unwrap();
        let back = import_split(&c, &s).unwrap();
        assert_eq!(back, split);
    }
}
