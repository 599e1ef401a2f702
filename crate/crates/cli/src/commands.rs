use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Mutex};
use std::time::Instant;

use anyhow::{bail, Context};
use unlearnkit::data::{export_split, generate, shift_testset};
use unlearnkit::eval::{scaling_curve, transfer_eval, EvalReport, Leaderboard, RunSummary};
use unlearnkit::nn::Model;
use unlearnkit::unlearn::{train_original, unlearn, Method, Trace};

use crate::artifacts::{
    load_original, original_exists, read_json, run_complete, write_atomic, write_json, Root, Timing,
    TrainRecord, RUN_FILES,
};
use crate::config::{ConfigError, ConfigMap, RunConfig};
use crate::manifest::{now, Entry, Manifest, Status};

/// Trains the original model for `cfg` unless it already exists.
pub fn train(root: &Root, cfg: &RunConfig, force: bool) -> anyhow::Result<PathBuf> {
    let dir = root.original_dir(cfg);
    if original_exists(&dir) && !force {
        eprintln!("original already trained at {}", dir.display());
        return Ok(dir);
    }
    let split = generate(&cfg.data)?;
    let trained = train_original(&split, &cfg.train)?;
    fs::create_dir_all(&dir)?;
    trained.model.save(&dir.join("model.json"))?;
    export_split(&split, &dir.join("split.csv"), &dir.join("split.json"))?;
    let record = TrainRecord {
        data: cfg.data.clone(),
        recipe: cfg.train.clone(),
        seconds: trained.seconds,
        flos: trained.flos,
    };
    write_json(&dir.join("train.json"), &record)?;
    let mut text = String::new();
    for (k, v) in cfg.resolved() {
        if crate::config::DATA_KEYS.contains(&k) || crate::config::TRAIN_KEYS.contains(&k) || k == "seed" {
            let _ = writeln!(text, "{k} = {v}");
        }
    }
    write_atomic(&dir.join("config.txt"), text.as_bytes())?;
    eprintln!(
        "trained original in {:.3}s ({:.3e} FLOs) -> {}",
        trained.seconds,
        trained.flos,
        dir.display()
    );
    Ok(dir)
}

/// Runs unlearning and evaluation for `cfg` and writes every run artifact.
/// Returns the artifact file names.
pub fn execute_run(root: &Root, cfg: &RunConfig) -> anyhow::Result<Vec<String>> {
    let (original, split) = load_original(root, cfg)?;
    let split = split.with_deletion(cfg.unlearn.del_ratio, cfg.seed())?;
    let dir = root.run_dir(cfg);
    fs::create_dir_all(&dir)?;

    let started = Instant::now();
    let run = match unlearn(&original, &split, &cfg.unlearn) {
        Ok(run) => run,
        Err(unlearnkit::Error::Budget { what, spent, limit, trace }) => {
            trace.write_csv(&dir.join("trace.partial.csv"))?;
            return Err(unlearnkit::Error::Budget { what, spent, limit, trace }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let wall = started.elapsed().as_secs_f64();

    let transfer_acc = match &cfg.shift {
        Some(s) => {
            let shifted = shift_testset(&split, s.kind, s.magnitude, cfg.seed())?;
            Some(transfer_eval(&original.model, &run.model, &shifted, split.test_y())?.1)
        }
        None => None,
    };
    let hash = cfg.hash();
    let report = EvalReport::compute(&run.model, &split, run.flos, transfer_acc, &hash, cfg.seed())?;

    write_json(&dir.join("config.json"), cfg)?;
    write_atomic(&dir.join("config.txt"), cfg.to_text().as_bytes())?;
    write_atomic(&dir.join("model.json"), run.model.to_checkpoint_json()?.as_bytes())?;
    write_atomic(&dir.join("trace.csv"), run.trace.to_csv().as_bytes())?;
    write_json(
        &dir.join("timing.json"),
        &Timing {
            unlearn_seconds: wall,
            original_train_seconds: original.seconds,
            flos: run.flos,
            trainable_params: run.trainable_params,
        },
    )?;
    // written last: its presence marks the run complete
    write_json(&dir.join("report.json"), &report)?;
    let _ = fs::remove_file(dir.join("trace.partial.csv"));
    Ok(RUN_FILES.iter().map(|s| s.to_string()).collect())
}

fn entry_for(root: &Root, cfg: &RunConfig) -> Entry {
    Entry {
        config_hash: cfg.hash(),
        method: cfg.method(),
        del_ratio: cfg.unlearn.del_ratio,
        seed: cfg.seed(),
        status: Status::Pending,
        run_dir: root.relative(&root.run_dir(cfg)),
        artifacts: vec![],
        created_at: now(),
        started_at: None,
        finished_at: None,
        error: None,
    }
}

pub enum UnlearnOutcome {
    Ran(PathBuf),
    AlreadyDone(PathBuf),
}

/// `unlearn` subcommand: a no-op when the run is already complete, unless `force`.
pub fn unlearn_cmd(root: &Root, cfg: &RunConfig, force: bool) -> anyhow::Result<UnlearnOutcome> {
    let dir = root.run_dir(cfg);
    let hash = cfg.hash();
    let manifest_path = root.manifest();
    if run_complete(&dir) && !force {
        return Ok(UnlearnOutcome::AlreadyDone(dir));
    }
    // resolve inputs before touching the manifest
    load_original(root, cfg)?;
    let mut manifest = Manifest::load(&manifest_path)?;
    manifest.schedule(entry_for(root, cfg));
    manifest.mark_started(&hash);
    manifest.save(&manifest_path)?;
    match execute_run(root, cfg) {
        Ok(files) => {
            manifest.mark_done(&hash, files);
            manifest.save(&manifest_path)?;
            Ok(UnlearnOutcome::Ran(dir))
        }
        Err(e) => {
            manifest.mark_failed(&hash, format!("{e:#}"));
            manifest.save(&manifest_path)?;
            Err(e)
        }
    }
}

/// Recomputes the report of a finished run, or of its original model.
pub fn evaluate(root: &Root, run_dir: &Path, original: bool) -> anyhow::Result<EvalReport> {
    let cfg: RunConfig = read_json(&run_dir.join("config.json"))
        .map_err(|_| unlearnkit::Error::Resolution { what: "run config", path: run_dir.join("config.json") })?;
    let (orig, split) = load_original(root, &cfg)?;
    let split = split.with_deletion(cfg.unlearn.del_ratio, cfg.seed())?;
    let (model, flos) = if original {
        (orig.model.clone(), 0.0)
    } else {
        let model = Model::load(&run_dir.join("model.json"))?;
        let stored: Option<EvalReport> = read_json(&run_dir.join("report.json")).ok();
        (model, stored.map_or(0.0, |r| r.flos))
    };
    let transfer_acc = match &cfg.shift {
        Some(s) => {
            let shifted = shift_testset(&split, s.kind, s.magnitude, cfg.seed())?;
            Some(transfer_eval(&orig.model, &model, &shifted, split.test_y())?.1)
        }
        None => None,
    };
    Ok(EvalReport::compute(&model, &split, flos, transfer_acc, &cfg.hash(), cfg.seed())?)
}

/// Parses `1..10`, `1-10` or `1,2,5` into a list.
pub fn parse_list<T: std::str::FromStr + Copy + Into<u64> + TryFrom<u64>>(s: &str, what: &str) -> anyhow::Result<Vec<T>> {
    let bad = || anyhow::Error::new(ConfigError(format!("invalid {what} list '{s}'")));
    let one = |p: &str| p.trim().parse::<T>().map_err(|_| bad());
    let range = s.split_once("..=").or_else(|| s.split_once("..")).or_else(|| s.split_once('-'));
    if let Some((a, b)) = range {
        let (a, b): (u64, u64) = (one(a)?.into(), one(b)?.into());
        if a > b {
            return Err(bad());
        }
        return (a..=b).map(|v| T::try_from(v).map_err(|_| bad())).collect();
    }
    s.split(',').filter(|p| !p.trim().is_empty()).map(one).collect()
}

pub struct SweepSpec {
    pub methods: Vec<Method>,
    pub ratios: Vec<u32>,
    pub seeds: Vec<u64>,
    pub jobs: usize,
}

/// Expands the grid into resolved configs, dropping duplicates with a warning.
pub fn expand_grid(base: &ConfigMap, spec: &SweepSpec) -> anyhow::Result<Vec<RunConfig>> {
    if spec.methods.is_empty() || spec.ratios.is_empty() || spec.seeds.is_empty() {
        bail!(ConfigError("sweep grid is empty".into()));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut dupes = 0usize;
    for &seed in &spec.seeds {
        for &method in &spec.methods {
            for &ratio in &spec.ratios {
                let mut m = base.clone();
                m.set("unlearn_method", method);
                m.set("del_ratio", ratio);
                m.set("seed", seed);
                let cfg = RunConfig::from_map(&m)?;
                if seen.insert(cfg.hash()) {
                    out.push(cfg);
                } else {
                    dupes += 1;
                }
            }
        }
    }
    if dupes > 0 {
        eprintln!("warning: dropped {dupes} duplicate grid entr{}", if dupes == 1 { "y" } else { "ies" });
    }
    Ok(out)
}

enum Event {
    Started(String),
    Finished(String, Result<Vec<String>, String>),
}

pub struct SweepSummary {
    pub scheduled: usize,
    pub skipped: usize,
    pub done: usize,
    pub failed: usize,
}

/// Runs every grid entry not already done, `jobs` at a time. Manifest
/// updates go through this thread only.
pub fn sweep(root: &Root, base: &ConfigMap, spec: &SweepSpec) -> anyhow::Result<SweepSummary> {
    let configs = expand_grid(base, spec)?;
    let manifest_path = root.manifest();
    let mut manifest = Manifest::load(&manifest_path)?;

    let mut todo = Vec::new();
    let mut skipped = 0;
    for cfg in &configs {
        manifest.schedule(entry_for(root, cfg));
        let e = &manifest.entries[&cfg.hash()];
        if e.status == Status::Done && run_complete(&root.run_dir(cfg)) {
            skipped += 1;
        } else {
            todo.push(cfg.clone());
        }
    }
    manifest.save(&manifest_path)?;
    eprintln!("sweep: {} runs, {} already done, {} to run", configs.len(), skipped, todo.len());

    // originals first, one per distinct original hash
    let mut originals: BTreeMap<String, RunConfig> = BTreeMap::new();
    for cfg in &todo {
        originals.entry(cfg.original_hash()).or_insert_with(|| cfg.clone());
    }
    let jobs = spec.jobs.max(1);
    let failures = Mutex::new(Vec::new());
    let queue = Mutex::new(originals.into_values().collect::<VecDeque<_>>());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let Some(cfg) = queue.lock().expect("queue lock").pop_front() else { break };
                if let Err(e) = train(root, &cfg, false) {
                    failures.lock().expect("failure lock").push((cfg.original_hash(), format!("{e:#}")));
                }
            });
        }
    });
    let failed_originals: BTreeMap<String, String> = failures.into_inner().expect("failure lock").into_iter().collect();

    let queue = Mutex::new(todo.into_iter().collect::<VecDeque<_>>());
    let (tx, rx) = mpsc::channel::<Event>();
    let (mut done, mut failed) = (0, 0);
    std::thread::scope(|s| -> anyhow::Result<()> {
        for _ in 0..jobs {
            let tx = tx.clone();
            let queue = &queue;
            let failed_originals = &failed_originals;
            s.spawn(move || loop {
                let Some(cfg) = queue.lock().expect("queue lock").pop_front() else { break };
                let hash = cfg.hash();
                let _ = tx.send(Event::Started(hash.clone()));
                let result = match failed_originals.get(&cfg.original_hash()) {
                    Some(msg) => Err(format!("original training failed: {msg}")),
                    None => execute_run(root, &cfg).map_err(|e| format!("{e:#}")),
                };
                let _ = tx.send(Event::Finished(hash, result));
            });
        }
        drop(tx);
        for ev in rx {
            match ev {
                Event::Started(h) => manifest.mark_started(&h),
                Event::Finished(h, Ok(files)) => {
                    done += 1;
                    manifest.mark_done(&h, files);
                }
                Event::Finished(h, Err(msg)) => {
                    failed += 1;
                    eprintln!("run {h} failed: {msg}");
                    manifest.mark_failed(&h, msg);
                }
            }
            manifest.save(&manifest_path)?;
        }
        Ok(())
    })?;
    eprintln!(
        "manifest: {} done, {} failed, {} pending",
        manifest.count(Status::Done),
        manifest.count(Status::Failed),
        manifest.count(Status::Pending)
    );
    Ok(SweepSummary { scheduled: configs.len(), skipped, done, failed })
}

/// Reads one finished run directory back into a leaderboard row.
pub fn load_summary(dir: &Path) -> anyhow::Result<RunSummary> {
    let cfg: RunConfig = read_json(&dir.join("config.json"))?;
    let report: EvalReport = read_json(&dir.join("report.json"))?;
    Ok(RunSummary {
        method: cfg.method(),
        del_ratio: cfg.unlearn.del_ratio,
        data_key: cfg.data_key(),
        num_classes: cfg.data.num_classes,
        report,
    })
}

/// Run directories recorded as done in the manifest.
pub fn completed_runs(root: &Root) -> anyhow::Result<Vec<PathBuf>> {
    let manifest = Manifest::load(&root.manifest())?;
    Ok(manifest
        .entries
        .values()
        .filter(|e| e.status == Status::Done)
        .map(|e| root.path().join(&e.run_dir))
        .filter(|d| run_complete(d))
        .collect())
}

/// Writes the leaderboard files into `out` and returns the Markdown.
pub fn report(run_dirs: &[PathBuf], out: &Path) -> anyhow::Result<String> {
    let mut summaries = Vec::new();
    let mut scaling = String::from("config_hash,method,del_ratio,seed,flos,acc_f\n");
    for dir in run_dirs {
        if !run_complete(dir) {
            eprintln!("warning: skipping incomplete run {}", dir.display());
            continue;
        }
        let s = load_summary(dir).with_context(|| format!("loading run {}", dir.display()))?;
        let trace = Trace::from_csv(&fs::read_to_string(dir.join("trace.csv"))?)?;
        for (flos, acc_f) in scaling_curve(&trace) {
            let _ = writeln!(
                scaling,
                "{},{},{},{},{},{}",
                s.report.config_hash,
                s.method,
                s.del_ratio,
                s.report.seed,
                flos,
                acc_f.map(|a| a.to_string()).unwrap_or_default()
            );
        }
        summaries.push(s);
    }
    if summaries.is_empty() {
        bail!(ConfigError("report needs at least one completed run".into()));
    }
    let lb = Leaderboard::build(&summaries);
    if lb.mixed_specs() {
        eprintln!("warning: runs use {} different data specs; ranked separately", lb.data_keys.len());
    }
    let mut md = lb.to_markdown();
    md.push_str("## Unlearning time\n\n");
    md.push_str(&lb.time_table());
    md.push_str("\n## Membership inference\n\n");
    md.push_str(&lb.mia_table());
    fs::create_dir_all(out)?;
    write_atomic(&out.join("leaderboard.md"), md.as_bytes())?;
    write_atomic(&out.join("leaderboard.csv"), lb.to_csv().as_bytes())?;
    write_atomic(&out.join("curves.csv"), lb.curves_csv().as_bytes())?;
    write_atomic(&out.join("time_table.md"), lb.time_table().as_bytes())?;
    write_atomic(&out.join("mia_table.md"), lb.mia_table().as_bytes())?;
    write_atomic(&out.join("scaling.csv"), scaling.as_bytes())?;
    Ok(md)
}
