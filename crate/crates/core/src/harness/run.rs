//! Artifact layout of a run directory:
//!
//! ```text
//! config.toml        resolved configuration (rerun with --config)
//! manifest.json      config hash, seeds, failures, sha256 of every artifact
//! seed_<s>/          plan: progress.csv, tree.jsonl, trajectory.csv
//!                    train: metrics.csv, eval.csv, checkpoint.bin
//!                    pretrain-eval: pretrain.csv, checkpoint.bin
//!                    error.txt when the seed failed
//! cell_<i>/seed_<s>/ same, per sweep cell
//! summary.csv        one row per seed (or per sweep job in sweep_raw.csv)
//! progress.csv / success.csv / sweep.csv and a matching .svg
//! ```
//!
//! Aggregate CSVs are recomputed from the per-seed CSVs after every run and
//! by `report`; a mismatch is an error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Value;

use super::plot::{render_bars, render_heatmap, render_plot, PlotStyle, Series};
use super::{parse_config, ExperimentConfig, HarnessError, Mode};
use crate::learner::{
    evaluate, pretrain, successful_demos, train, write_metrics_csv, Agent, DemoMode, DemoSet, Policies, PretrainMode,
};
use crate::nn::save_checkpoint;
use crate::planner::{best_trajectory, plan, write_trajectory_csv, write_tree_jsonl};

/// Offset between a run seed and the seed of its demonstration trees.
const DEMO_SEED_OFFSET: u64 = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub out: PathBuf,
    pub jobs: usize,
    /// `(job directory, error)` per failed or skipped job.
    pub failures: Vec<(String, String)>,
    pub exit_code: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct PretrainRow {
    demos: usize,
    samples: usize,
    policy_loss: f64,
    value_loss: Option<f64>,
    eval_success: f64,
    eval_reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
enum SeedData {
    Plan(Vec<f64>),
    Train { success: Vec<f64>, final_eval: Option<f64> },
    Pretrain(PretrainRow),
}

struct Job {
    cell: Option<usize>,
    seed: u64,
    mode: Mode,
    cfg: ExperimentConfig,
    dir: String,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: String,
    task: String,
    mode: String,
    seeds: Vec<u64>,
    config: String,
    config_sha256: String,
    rerun: String,
    jobs: usize,
    failures: Vec<FailureRecord>,
    artifacts: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct FailureRecord {
    job: String,
    error: String,
}

/// Mean of the progress samples, one per added node.
pub fn average_progress(progress: &[f64]) -> f64 {
    if progress.is_empty() {
        return 0.0;
    }
    progress.iter().sum::<f64>() / progress.len() as f64
}

/// Mean success over `n_epochs`; epochs after an early stop hold the last rate.
pub fn average_success(success: &[f64], n_epochs: usize) -> f64 {
    let Some(last) = success.last() else {
        return 0.0;
    };
    let n = n_epochs.max(success.len());
    let held = (n - success.len()) as f64 * last;
    (success.iter().sum::<f64>() + held) / n as f64
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Some((mean, var.sqrt()))
}

fn num(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

fn label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn jobs(cfg: &ExperimentConfig) -> Result<Vec<Job>, HarnessError> {
    let mut out = Vec::new();
    match (&cfg.sweep, cfg.mode) {
        (Some(spec), Mode::Sweep) => {
            for (i, (v, w)) in spec.cells().iter().enumerate() {
                let c = cfg.cell(spec, v, w.as_ref())?;
                for &seed in &c.seeds {
                    out.push(Job {
                        cell: Some(i),
                        seed,
                        mode: spec.base,
                        cfg: c.clone(),
                        dir: format!("cell_{i:02}/seed_{seed}"),
                    });
                }
            }
        }
        (None, Mode::Sweep) => return Err(HarnessError::Config {
            location: "sweep".into(),
            message: "sweep mode needs sweep.param and sweep.values".into(),
        }),
        (_, mode) => {
            for &seed in &cfg.seeds {
                out.push(Job {
                    cell: None,
                    seed,
                    mode,
                    cfg: cfg.clone(),
                    dir: format!("seed_{seed}"),
                });
            }
        }
    }
    Ok(out)
}

fn create(path: &Path) -> Result<fs::File, HarnessError> {
    Ok(fs::File::create(path)?)
}

fn demo_set(cfg: &ExperimentConfig, seed: u64, force: bool) -> Result<Option<DemoSet>, HarnessError> {
    let l = &cfg.learner;
    if !force && l.demo_mode == DemoMode::None && l.pretrain == PretrainMode::None {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(DEMO_SEED_OFFSET));
    Ok(Some(DemoSet::build(&cfg.env, l, &cfg.planner, &mut rng)?))
}

fn execute(job: &Job, dir: &Path) -> Result<SeedData, HarnessError> {
    fs::create_dir_all(dir)?;
    let (cfg, seed) = (&job.cfg, job.seed);
    let env = &cfg.env;
    match job.mode {
        Mode::Plan | Mode::Sweep => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tree = plan(env, &env.start, &env.goal, &cfg.planner, &mut rng)?;
            let mut w = csv::Writer::from_writer(create(&dir.join("progress.csv"))?);
            w.write_record(["nodes", "progress"])?;
            for (i, p) in tree.stats.progress.iter().enumerate() {
                w.write_record([(i + 1).to_string(), p.to_string()])?;
            }
            w.flush()?;
            write_tree_jsonl(&tree, std::io::BufWriter::new(create(&dir.join("tree.jsonl"))?))?;
            write_trajectory_csv(&best_trajectory(&tree, &env.goal), create(&dir.join("trajectory.csv"))?)?;
            Ok(SeedData::Plan(tree.stats.progress.clone()))
        }
        Mode::Train => {
            let demos = demo_set(cfg, seed, false)?;
            let out = train(env, demos.as_ref(), &cfg.learner, seed)?;
            write_metrics_csv(&out.metrics, create(&dir.join("metrics.csv"))?)?;
            let mut w = csv::Writer::from_writer(create(&dir.join("eval.csv"))?);
            w.write_record(["final_eval"])?;
            w.write_record([num(out.final_eval)])?;
            w.flush()?;
            let mut ck = out.agent.checkpoint();
            if let Some(il) = &out.imitation {
                ck.nets.push(("imitation".into(), il.clone()));
            }
            save_checkpoint(&ck, std::io::BufWriter::new(create(&dir.join("checkpoint.bin"))?))?;
            Ok(SeedData::Train {
                success: out.metrics.iter().map(|m| m.success_rate).collect(),
                final_eval: out.final_eval,
            })
        }
        Mode::PretrainEval => {
            let mut l = cfg.learner.clone();
            if l.pretrain == PretrainMode::None {
                l.pretrain = PretrainMode::Policy;
            }
            let set = demo_set(cfg, seed, true)?.expect("forced");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let demos = successful_demos(env, &set, &l, &mut rng)?;
            let mut agent = Agent::new(env, &l, &mut rng);
            let pre = pretrain(&mut agent, &demos, &l, &l.goal_weights.clone(), &mut rng)?;
            l.eval_runs = l.final_eval_runs;
            let (eval_success, eval_reward) = evaluate(env, Policies { agent: &agent, imitation: None }, &l, &mut rng)?;
            let row = PretrainRow {
                demos: demos.len(),
                samples: pre.n_samples,
                policy_loss: pre.policy_loss,
                value_loss: pre.value_loss,
                eval_success,
                eval_reward,
            };
            let mut w = csv::Writer::from_writer(create(&dir.join("pretrain.csv"))?);
            w.serialize(&row)?;
            w.flush()?;
            save_checkpoint(&agent.checkpoint(), std::io::BufWriter::new(create(&dir.join("checkpoint.bin"))?))?;
            Ok(SeedData::Pretrain(row))
        }
    }
}

fn column(path: &Path, name: &str) -> Result<Vec<String>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let idx = r
        .headers()?
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| HarnessError::Report(format!("{} has no column {name}", path.display())))?;
    let mut out = Vec::new();
    for rec in r.records() {
        out.push(rec?.get(idx).unwrap_or_default().to_string());
    }
    Ok(out)
}

fn floats(path: &Path, name: &str) -> Result<Vec<f64>, HarnessError> {
    column(path, name)?
        .iter()
        .map(|s| s.parse().map_err(|_| HarnessError::Report(format!("{}: bad number {s:?} in {name}", path.display()))))
        .collect()
}

/// Per-seed result read back from its CSVs; `Err` carries the recorded failure.
fn load(job: &Job, dir: &Path) -> Result<Result<SeedData, String>, HarnessError> {
    if let Ok(msg) = fs::read_to_string(dir.join("error.txt")) {
        return Ok(Err(msg.trim_end().to_string()));
    }
    Ok(Ok(match job.mode {
        Mode::Plan | Mode::Sweep => SeedData::Plan(floats(&dir.join("progress.csv"), "progress")?),
        Mode::Train => {
            let fe = column(&dir.join("eval.csv"), "final_eval")?;
            let final_eval = match fe.first().map(String::as_str) {
                None | Some("") => None,
                Some(s) => Some(s.parse().map_err(|_| HarnessError::Report(format!("bad final_eval {s:?}")))?),
            };
            SeedData::Train {
                success: floats(&dir.join("metrics.csv"), "success_rate")?,
                final_eval,
            }
        }
        Mode::PretrainEval => {
            let mut r = csv::Reader::from_path(dir.join("pretrain.csv"))?;
            let row = r.deserialize().next().ok_or_else(|| HarnessError::Report("empty pretrain.csv".into()))??;
            SeedData::Pretrain(row)
        }
    }))
}

fn job_metric(job: &Job, data: &SeedData) -> f64 {
    match data {
        SeedData::Plan(p) => average_progress(p),
        SeedData::Train { success, .. } => average_success(success, job.cfg.learner.n_epochs),
        SeedData::Pretrain(row) => row.eval_success,
    }
}

/// Curve of length `len`, holding the last value past the end of `xs`.
fn held(xs: &[f64], len: usize) -> Vec<f64> {
    let last = xs.last().copied().unwrap_or(0.0);
    (0..len).map(|i| xs.get(i).copied().unwrap_or(last)).collect()
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Mean and std band of equal-length curves at every index.
fn band(curves: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let len = curves.first().map_or(0, Vec::len);
    (0..len)
        .map(|i| mean_std(&curves.iter().map(|c| c[i]).collect::<Vec<_>>()).unwrap_or((0.0, 0.0)))
        .unzip()
}

fn curve_file(x_name: &str, x0: usize, curves: &[Vec<f64>]) -> Result<(Vec<u8>, Series), HarnessError> {
    let (mean, std) = band(curves);
    let rows: Vec<Vec<String>> = mean
        .iter()
        .zip(&std)
        .enumerate()
        .map(|(i, (m, s))| vec![(i + x0).to_string(), m.to_string(), s.to_string(), curves.len().to_string()])
        .collect();
    let bytes = csv_bytes(&strings(&[x_name, "mean", "std", "n"]), &rows)?;
    let series = Series {
        label: format!("mean of {} seeds", curves.len()),
        x: (0..mean.len()).map(|i| (i + x0) as f64).collect(),
        y: mean,
        std: Some(std),
    };
    Ok((bytes, series))
}

/// Aggregate artifacts from per-job results, keyed by file name.
fn aggregate(cfg: &ExperimentConfig, jobs: &[Job], results: &[Result<SeedData, String>]) -> Result<BTreeMap<String, Vec<u8>>, HarnessError> {
    let mut files = BTreeMap::new();
    let status = |r: &Result<SeedData, String>| if r.is_ok() { "ok" } else { "failed" }.to_string();
    let task = cfg.task.as_str();
    match cfg.mode {
        Mode::Plan => {
            let mut rows = Vec::new();
            let mut curves = Vec::new();
            for (job, r) in jobs.iter().zip(results) {
                let (nodes, fin, avg) = match r {
                    Ok(SeedData::Plan(p)) => {
                        curves.push(p.clone());
                        (Some(p.len() as f64), p.last().copied(), Some(average_progress(p)))
                    }
                    _ => (None, None, None),
                };
                rows.push(vec![job.seed.to_string(), status(r), num(nodes), num(fin), num(avg)]);
            }
            files.insert(
                "summary.csv".into(),
                csv_bytes(&strings(&["seed", "status", "nodes", "final_progress", "average_progress"]), &rows)?,
            );
            let len = curves.iter().map(Vec::len).max().unwrap_or(0);
            let curves: Vec<Vec<f64>> = curves.iter().map(|c| held(c, len)).collect();
            let (bytes, mut series) = curve_file("nodes", 1, &curves)?;
            series.label = task.to_string();
            files.insert("progress.csv".into(), bytes);
            let style = PlotStyle {
                title: format!("{task}: search progress"),
                x_label: "nodes".into(),
                y_label: "progress toward goal".into(),
                y_range: Some((0.0, 1.0)),
            };
            files.insert("progress.svg".into(), render_plot(&[series], &style).into_bytes());
        }
        Mode::Train => {
            let n_epochs = cfg.learner.n_epochs;
            let mut rows = Vec::new();
            let mut curves = Vec::new();
            for (job, r) in jobs.iter().zip(results) {
                let row = match r {
                    Ok(SeedData::Train { success, final_eval }) => {
                        if !success.is_empty() {
                            curves.push(held(success, n_epochs.max(success.len())));
                        }
                        vec![
                            success.len().to_string(),
                            num(success.last().copied()),
                            num(Some(average_success(success, n_epochs))),
                            num(*final_eval),
                        ]
                    }
                    _ => vec![String::new(); 4],
                };
                let mut full = vec![job.seed.to_string(), status(r)];
                full.extend(row);
                rows.push(full);
            }
            files.insert(
                "summary.csv".into(),
                csv_bytes(&strings(&["seed", "status", "epochs", "final_success", "average_success", "final_eval"]), &rows)?,
            );
            let (bytes, mut series) = curve_file("epoch", 0, &curves)?;
            series.label = format!("{task} b_p={} ({})", cfg.learner.b_p, cfg.learner.demo_mode.as_str());
            files.insert("success.csv".into(), bytes);
            let style = PlotStyle {
                title: format!("{task}: evaluation success"),
                x_label: "epoch".into(),
                y_label: "success rate".into(),
                y_range: Some((0.0, 1.0)),
            };
            files.insert("success.svg".into(), render_plot(&[series], &style).into_bytes());
        }
        Mode::PretrainEval => {
            let header = strings(&["seed", "status", "demos", "samples", "policy_loss", "value_loss", "eval_success", "eval_reward"]);
            let mut rows = Vec::new();
            let mut succ = Vec::new();
            for (job, r) in jobs.iter().zip(results) {
                let mut row = vec![job.seed.to_string(), status(r)];
                match r {
                    Ok(SeedData::Pretrain(p)) => {
                        succ.push(p.eval_success);
                        row.extend([
                            p.demos.to_string(),
                            p.samples.to_string(),
                            p.policy_loss.to_string(),
                            num(p.value_loss),
                            p.eval_success.to_string(),
                            p.eval_reward.to_string(),
                        ]);
                    }
                    _ => row.extend(vec![String::new(); 6]),
                }
                rows.push(row);
            }
            files.insert("summary.csv".into(), csv_bytes(&header, &rows)?);
            let ms = mean_std(&succ);
            let row = vec![num(ms.map(|m| m.0)), num(ms.map(|m| m.1)), succ.len().to_string()];
            files.insert("eval_success.csv".into(), csv_bytes(&strings(&["mean", "std", "n"]), &[row])?);
        }
        Mode::Sweep => {
            let spec = cfg.sweep.as_ref().expect("sweep mode has a spec");
            let cells = spec.cells();
            let mut raw = Vec::new();
            let mut per_cell: Vec<(Vec<f64>, usize)> = vec![(Vec::new(), 0); cells.len()];
            for (job, r) in jobs.iter().zip(results) {
                let i = job.cell.expect("sweep job");
                let (v, w) = &cells[i];
                let metric = r.as_ref().ok().map(|d| job_metric(job, d));
                match metric {
                    Some(m) => per_cell[i].0.push(m),
                    None => per_cell[i].1 += 1,
                }
                raw.push(vec![
                    i.to_string(),
                    label(v),
                    w.as_ref().map(label).unwrap_or_default(),
                    job.seed.to_string(),
                    status(r),
                    num(metric),
                ]);
            }
            let metric_name = if spec.base == Mode::Plan { "average_progress" } else { "average_success" };
            files.insert(
                "sweep_raw.csv".into(),
                csv_bytes(&strings(&["cell", "value", "value2", "seed", "status", metric_name]), &raw)?,
            );
            let mut header = vec!["cell".to_string(), spec.param.clone()];
            header.extend(spec.param2.clone());
            header.extend(strings(&["mean", "std", "n_ok", "n_failed"]));
            let mut rows = Vec::new();
            let mut means = Vec::new();
            let mut stds = Vec::new();
            for (i, ((v, w), (ms, failed))) in cells.iter().zip(&per_cell).enumerate() {
                let stat = mean_std(ms);
                means.push(stat.map(|s| s.0));
                stds.push(stat.map_or(0.0, |s| s.1));
                let mut row = vec![i.to_string(), label(v)];
                row.extend(w.as_ref().map(label));
                row.extend([num(stat.map(|s| s.0)), num(stat.map(|s| s.1)), ms.len().to_string(), failed.to_string()]);
                rows.push(row);
            }
            files.insert("sweep.csv".into(), csv_bytes(&header, &rows)?);
            let style = PlotStyle {
                title: format!("{task}: {metric_name} over {}", spec.param),
                x_label: spec.param.clone(),
                y_label: metric_name.replace('_', " "),
                y_range: None,
            };
            let svg = match &spec.param2 {
                None => render_bars(&spec.values.iter().map(label).collect::<Vec<_>>(), &means, &stds, &style),
                Some(p2) => {
                    let cols = spec.values2.len();
                    let grid: Vec<Vec<Option<f64>>> = means.chunks(cols).map(<[_]>::to_vec).collect();
                    let style = PlotStyle {
                        title: format!("{task}: {metric_name} over {} (rows) and {p2} (columns)", spec.param),
                        ..style
                    };
                    render_heatmap(&spec.values2.iter().map(label).collect::<Vec<_>>(), &spec.values.iter().map(label).collect::<Vec<_>>(), &grid, &style)
                }
            };
            files.insert("sweep.svg".into(), svg.into_bytes());
        }
    }
    Ok(files)
}

fn pool<T: Send>(n: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("result slot").expect("every job ran")).collect()
}

fn prepare_dir(out: &Path, force: bool) -> Result<(), HarnessError> {
    if out.exists() {
        let empty = fs::read_dir(out)?.next().is_none();
        if !empty {
            let ours = out.join("manifest.json").exists() || out.join("config.toml").exists();
            if !(force && ours) {
                return Err(HarnessError::OutputExists(out.to_path_buf()));
            }
            fs::remove_dir_all(out)?;
        }
    }
    fs::create_dir_all(out)?;
    Ok(())
}

fn artifact_hashes(out: &Path) -> Result<BTreeMap<String, String>, HarnessError> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<String, String>) -> Result<(), HarnessError> {
        for entry in fs::read_dir(dir)? {
            let p = entry?.path();
            if p.is_dir() {
                walk(root, &p, acc)?;
            } else {
                let rel: Vec<String> = p.strip_prefix(root).expect("inside root").iter().map(|c| c.to_string_lossy().into_owned()).collect();
                let rel = rel.join("/");
                if rel != "manifest.json" {
                    acc.insert(rel, sha256_hex(&fs::read(&p)?));
                }
            }
        }
        Ok(())
    }
    let mut acc = BTreeMap::new();
    walk(out, out, &mut acc)?;
    Ok(acc)
}

fn cross_check(cfg: &ExperimentConfig, jobs: &[Job], out: &Path) -> Result<(), HarnessError> {
    let loaded = jobs.iter().map(|j| load(j, &out.join(&j.dir))).collect::<Result<Vec<_>, _>>()?;
    for (name, bytes) in aggregate(cfg, jobs, &loaded)? {
        if fs::read(out.join(&name))? != bytes {
            return Err(HarnessError::Report(format!("{name} differs from its recomputation from per-seed CSVs")));
        }
    }
    Ok(())
}

/// Runs every seed (and sweep cell) of `cfg` into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path, force: bool) -> Result<RunReport, HarnessError> {
    prepare_dir(out, force)?;
    let snapshot = cfg.to_toml();
    fs::write(out.join("config.toml"), &snapshot)?;
    let jobs = jobs(cfg)?;
    let deadline = cfg.budget.wall_clock_s.map(|s| Instant::now() + Duration::from_secs_f64(s));
    let done = AtomicUsize::new(0);
    let results: Vec<Result<SeedData, String>> = pool(jobs.len(), cfg.workers, |i| {
        let job = &jobs[i];
        let dir = out.join(&job.dir);
        let r = if deadline.is_some_and(|d| Instant::now() >= d) {
            Err(format!("skipped: wall-clock budget of {} s exhausted", cfg.budget.wall_clock_s.unwrap_or_default()))
        } else {
            match catch_unwind(AssertUnwindSafe(|| execute(job, &dir))) {
                Ok(r) => r.map_err(|e| e.to_string()),
                Err(p) => Err(p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into())),
            }
        };
        if let Err(msg) = &r {
            let _ = fs::create_dir_all(&dir).and_then(|_| fs::write(dir.join("error.txt"), format!("{msg}\n")));
        }
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        eprintln!("[{k}/{}] {}: {}", jobs.len(), job.dir, r.as_ref().map_or_else(|e| e.as_str(), |_| "ok"));
        r
    });
    for (name, bytes) in aggregate(cfg, &jobs, &results)? {
        fs::File::create(out.join(name))?.write_all(&bytes)?;
    }
    cross_check(cfg, &jobs, out)?;

    let failures: Vec<(String, String)> = jobs
        .iter()
        .zip(&results)
        .filter_map(|(j, r)| r.as_ref().err().map(|e| (j.dir.clone(), e.clone())))
        .collect();
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        task: cfg.task.as_str().into(),
        mode: cfg.mode.as_str().into(),
        seeds: cfg.seeds.clone(),
        config: "config.toml".into(),
        config_sha256: sha256_hex(snapshot.as_bytes()),
        rerun: format!("dexsearch {} --config config.toml", cfg.mode.as_str()),
        jobs: jobs.len(),
        failures: failures.iter().map(|(job, error)| FailureRecord { job: job.clone(), error: error.clone() }).collect(),
        artifacts: artifact_hashes(out)?,
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(RunReport {
        out: out.to_path_buf(),
        jobs: jobs.len(),
        exit_code: if failures.is_empty() { 0 } else { 1 },
        failures,
    })
}

/// Re-checks a finished run directory: config hash, artifact hashes, and
/// aggregates recomputed from the per-seed CSVs.
pub fn report(out: &Path) -> Result<RunReport, HarnessError> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json"))?)?;
    let snapshot = fs::read_to_string(out.join(&manifest.config))?;
    if sha256_hex(snapshot.as_bytes()) != manifest.config_sha256 {
        return Err(HarnessError::Report("config.toml does not match its recorded hash".into()));
    }
    for (name, hash) in &manifest.artifacts {
        let bytes = fs::read(out.join(name)).map_err(|e| HarnessError::Report(format!("{name}: {e}")))?;
        if &sha256_hex(&bytes) != hash {
            return Err(HarnessError::Report(format!("{name} does not match its recorded hash")));
        }
    }
    let cfg = parse_config(&snapshot)?;
    let jobs = jobs(&cfg)?;
    cross_check(&cfg, &jobs, out)?;
    let failures: Vec<(String, String)> = manifest.failures.into_iter().map(|f| (f.job, f.error)).collect();
    Ok(RunReport {
        out: out.to_path_buf(),
        jobs: jobs.len(),
        exit_code: if failures.is_empty() { 0 } else { 1 },
        failures,
    })
}
