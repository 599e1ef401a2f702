//! Flat `key = value` run configuration with command-line overrides.
//!
//! A file sets any subset of the keys below; overrides given on the command
//! line (`--key value`, `--key=value` or `key=value`) win over the file.
//! Unset unlearning knobs take the defaults of the chosen `unlearn_method`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unlearnkit::data::{Generator, ShiftKind, SynthSpec};
use unlearnkit::nn::{Activation, OptimizerKind};
use unlearnkit::unlearn::{Method, TrainConfig, UnlearnConfig};

/// Bad configuration input; maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub const DATA_KEYS: &[&str] = &["data_name", "num_classes", "samples_per_class", "noise", "dim", "data_seed"];

pub const TRAIN_KEYS: &[&str] = &[
    "backbone",
    "activation",
    "train_epochs",
    "train_learning_rate",
    "train_batch_size",
    "train_optimizer",
];

pub const UNLEARN_KEYS: &[&str] = &[
    "unlearn_method",
    "del_ratio",
    "epochs",
    "learning_rate",
    "batch_size",
    "optimizer",
    "bad_teacher_seed",
    "temperature",
    "scrub_max_steps",
    "scrub_min_steps",
    "scrub_rep_weight",
    "salun_sparsity",
    "l1_lambda",
    "curriculum",
    "curriculum_lambda",
    "curriculum_decay",
    "adapter_rank",
    "adapter_scale",
    "enforce_budget",
    "shift_kind",
    "shift_magnitude",
];

pub fn all_keys() -> impl Iterator<Item = &'static str> {
    DATA_KEYS
        .iter()
        .chain(TRAIN_KEYS)
        .chain(std::iter::once(&"seed"))
        .chain(UNLEARN_KEYS)
        .copied()
}

fn known(key: &str) -> bool {
    all_keys().any(|k| k == key)
}

/// Raw key/value pairs before interpretation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap(pub BTreeMap<String, String>);

impl ConfigMap {
    pub fn parse_file_text(text: &str) -> anyhow::Result<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected key = value, got '{line}'", n + 1)))?;
            let (k, v) = (k.trim(), v.trim().trim_matches('"'));
            check_key(k)?;
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(bad(format!("line {}: duplicate key '{k}'", n + 1)));
            }
        }
        Ok(ConfigMap(map))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_file_text(&text)
    }

    /// Applies `--key value`, `--key=value` and `key=value` overrides.
    pub fn apply_overrides(&mut self, args: &[String]) -> anyhow::Result<()> {
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let (k, v) = if let Some(flag) = arg.strip_prefix("--") {
                match flag.split_once('=') {
                    Some((k, v)) => (k.to_string(), v.to_string()),
                    None => {
                        let v = it.next().ok_or_else(|| bad(format!("flag --{flag} needs a value")))?;
                        (flag.to_string(), v.clone())
                    }
                }
            } else if let Some((k, v)) = arg.split_once('=') {
                (k.to_string(), v.to_string())
            } else {
                return Err(bad(format!("unexpected argument '{arg}' (use --key value or key=value)")));
            };
            check_key(&k)?;
            self.0.insert(k, v);
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

fn check_key(k: &str) -> anyhow::Result<()> {
    if known(k) {
        Ok(())
    } else {
        Err(bad(format!(
            "unknown config key '{k}'; known keys: {}",
            all_keys().collect::<Vec<_>>().join(", ")
        )))
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> anyhow::Result<T> {
    v.parse().map_err(|_| bad(format!("invalid value '{v}' for {key}")))
}

fn parse_bool(key: &str, v: &str) -> anyhow::Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(bad(format!("invalid boolean '{v}' for {key}"))),
    }
}

fn parse_opt<T: std::str::FromStr>(key: &str, v: &str) -> anyhow::Result<Option<T>> {
    if v == "none" {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

fn core<T>(r: unlearnkit::Result<T>) -> anyhow::Result<T> {
    r.map_err(|e| bad(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub kind: ShiftKind,
    pub magnitude: f64,
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: SynthSpec,
    pub train: TrainConfig,
    pub unlearn: UnlearnConfig,
    pub shift: Option<ShiftSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_map(&ConfigMap::default()).expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn from_map(map: &ConfigMap) -> anyhow::Result<Self> {
        let get = |k: &str| map.get(k);
        let mut data = SynthSpec::blobs(3, 250, 0.5, 64, 0);
        if let Some(v) = get("data_name") {
            data.generator = core(Generator::parse(v))?;
        }
        if let Some(v) = get("num_classes") {
            data.num_classes = parse("num_classes", v)?;
        }
        if let Some(v) = get("samples_per_class") {
            data.samples_per_class = parse("samples_per_class", v)?;
        }
        if let Some(v) = get("noise") {
            data.noise = parse("noise", v)?;
        }
        if let Some(v) = get("dim") {
            data.dim = parse("dim", v)?;
        }
        if let Some(v) = get("data_seed") {
            data.seed = parse("data_seed", v)?;
        }
        core(data.validate())?;

        let seed: u64 = get("seed").map(|v| parse("seed", v)).transpose()?.unwrap_or(0);
        let mut train = TrainConfig { seed, ..TrainConfig::default() };
        if let Some(v) = get("backbone") {
            train.hidden = core(TrainConfig::parse_backbone(v))?;
        }
        if let Some(v) = get("activation") {
            train.activation = core(Activation::parse(v))?;
        }
        if let Some(v) = get("train_epochs") {
            train.epochs = parse("train_epochs", v)?;
        }
        if let Some(v) = get("train_learning_rate") {
            train.learning_rate = parse("train_learning_rate", v)?;
        }
        if let Some(v) = get("train_batch_size") {
            train.batch_size = parse("train_batch_size", v)?;
        }
        if let Some(v) = get("train_optimizer") {
            train.optimizer = core(OptimizerKind::parse(v))?;
        }
        core(train.validate())?;

        let method: Method = match get("unlearn_method") {
            Some(v) => core(v.parse())?,
            None => Method::RandLabel,
        };
        let mut u = UnlearnConfig { seed, ..UnlearnConfig::for_method(method) };
        for &key in UNLEARN_KEYS {
            let Some(v) = get(key) else { continue };
            match key {
                "del_ratio" => u.del_ratio = parse(key, v)?,
                "epochs" => u.epochs = parse(key, v)?,
                "learning_rate" => u.learning_rate = parse(key, v)?,
                "batch_size" => u.batch_size = parse(key, v)?,
                "optimizer" => u.optimizer = core(OptimizerKind::parse(v))?,
                "bad_teacher_seed" => u.bad_teacher_seed = parse_opt(key, v)?,
                "temperature" => u.temperature = parse(key, v)?,
                "scrub_max_steps" => u.scrub_max_steps = parse(key, v)?,
                "scrub_min_steps" => u.scrub_min_steps = parse(key, v)?,
                "scrub_rep_weight" => u.scrub_rep_weight = parse(key, v)?,
                "salun_sparsity" => u.salun_sparsity = parse(key, v)?,
                "l1_lambda" => u.l1_lambda = parse(key, v)?,
                "curriculum" => u.curriculum = parse_bool(key, v)?,
                "curriculum_lambda" => u.curriculum_lambda = parse(key, v)?,
                "curriculum_decay" => u.curriculum_decay = parse(key, v)?,
                "adapter_rank" => u.adapter_rank = parse_opt(key, v)?,
                "adapter_scale" => u.adapter_scale = parse(key, v)?,
                "enforce_budget" => u.enforce_budget = parse_bool(key, v)?,
                _ => {}
            }
        }
        core(u.validate())?;
        if !(1..=10).contains(&u.del_ratio) {
            return Err(bad(format!("del_ratio must be in 1..=10, got {}", u.del_ratio)));
        }

        let shift = match get("shift_kind") {
            None | Some("none") => None,
            Some(v) => {
                let magnitude = get("shift_magnitude")
                    .map(|m| parse("shift_magnitude", m))
                    .transpose()?
                    .unwrap_or(0.5);
                Some(ShiftSpec { kind: core(ShiftKind::parse(v))?, magnitude })
            }
        };
        Ok(RunConfig { data, train, unlearn: u, shift })
    }

    pub fn seed(&self) -> u64 {
        self.unlearn.seed
    }

    pub fn method(&self) -> Method {
        self.unlearn.unlearn_method
    }

    /// Every key with its resolved value.
    pub fn resolved(&self) -> BTreeMap<&'static str, String> {
        let d = &self.data;
        let t = &self.train;
        let u = &self.unlearn;
        let opt = |v: Option<u64>| v.map_or("none".to_string(), |x| x.to_string());
        let mut m = BTreeMap::new();
        m.insert("data_name", d.generator.as_str().to_string());
        m.insert("num_classes", d.num_classes.to_string());
        m.insert("samples_per_class", d.samples_per_class.to_string());
        m.insert("noise", d.noise.to_string());
        m.insert("dim", d.dim.to_string());
        m.insert("data_seed", d.seed.to_string());
        m.insert("backbone", t.backbone());
        m.insert("activation", t.activation.as_str().to_string());
        m.insert("train_epochs", t.epochs.to_string());
        m.insert("train_learning_rate", t.learning_rate.to_string());
        m.insert("train_batch_size", t.batch_size.to_string());
        m.insert("train_optimizer", t.optimizer.as_str().to_string());
        m.insert("seed", u.seed.to_string());
        m.insert("unlearn_method", u.unlearn_method.as_str().to_string());
        m.insert("del_ratio", u.del_ratio.to_string());
        m.insert("epochs", u.epochs.to_string());
        m.insert("learning_rate", u.learning_rate.to_string());
        m.insert("batch_size", u.batch_size.to_string());
        m.insert("optimizer", u.optimizer.as_str().to_string());
        m.insert("bad_teacher_seed", opt(u.bad_teacher_seed));
        m.insert("temperature", u.temperature.to_string());
        m.insert("scrub_max_steps", u.scrub_max_steps.to_string());
        m.insert("scrub_min_steps", u.scrub_min_steps.to_string());
        m.insert("scrub_rep_weight", u.scrub_rep_weight.to_string());
        m.insert("salun_sparsity", u.salun_sparsity.to_string());
        m.insert("l1_lambda", u.l1_lambda.to_string());
        m.insert("curriculum", u.curriculum.to_string());
        m.insert("curriculum_lambda", u.curriculum_lambda.to_string());
        m.insert("curriculum_decay", u.curriculum_decay.to_string());
        m.insert("adapter_rank", opt(u.adapter_rank.map(|r| r as u64)));
        m.insert("adapter_scale", u.adapter_scale.to_string());
        m.insert("enforce_budget", u.enforce_budget.to_string());
        match &self.shift {
            Some(s) => {
                m.insert("shift_kind", s.kind.as_str().to_string());
                m.insert("shift_magnitude", s.magnitude.to_string());
            }
            None => {
                m.insert("shift_kind", "none".to_string());
                m.insert("shift_magnitude", "none".to_string());
            }
        }
        m
    }

    /// Hash of every resolved key; names the run directory.
    pub fn hash(&self) -> String {
        hash_pairs(self.resolved().iter())
    }

    /// Hash of the keys that determine the original model; names its directory.
    pub fn original_hash(&self) -> String {
        let r = self.resolved();
        hash_pairs(
            r.iter()
                .filter(|(k, _)| DATA_KEYS.contains(k) || TRAIN_KEYS.contains(k) || **k == "seed"),
        )
    }

    /// Human-readable identity of the data spec, used to group leaderboard rows.
    pub fn data_key(&self) -> String {
        data_key(&self.data)
    }

    /// Resolved config as `key = value` lines, loadable as a config file.
    pub fn to_text(&self) -> String {
        self.resolved().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub fn data_key(d: &SynthSpec) -> String {
    format!(
        "{} C={} n={} noise={} dim={} data_seed={}",
        d.generator.as_str(),
        d.num_classes,
        d.samples_per_class,
        d.noise,
        d.dim,
        d.seed
    )
}

fn hash_pairs<'a>(pairs: impl Iterator<Item = (&'a &'static str, &'a String)>) -> String {
    let mut h = Sha256::new();
    for (k, v) in pairs {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    hex::encode(&h.finalize()[..8])
}
