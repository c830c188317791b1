//! Subcommand bodies. Every command that writes files also writes a manifest listing the
//! sha256 of each input and output, with paths relative to the workspace.

use crate::config::{config_error, Provider, RunConfig};
use anyhow::{bail, Context, Result};
use lam_core::agent::{run_task, AgentConfig, Clock, FixedClock, LearnedPolicy, Outcome, RunRecord, WallClock};
use lam_core::dataflow::pipeline::{fixture_corpus, INSTANTIATED_FILE, RAW_FILE, TASKPLAN_FILE, TRAINING_FILE};
use lam_core::dataflow::{run_pipeline, InstantiatedTask, Stage, TaskPlanRecord, TrainingRecord};
use lam_core::eval::{
    action_table, eval_actions, eval_online, eval_plans, online_table, plan_table, predict_offline, truth_from_records,
    ActionEvalResult, Matcher, OnlineEvalResult, PlanEvalResult, PlanPair,
};
use lam_core::io;
use lam_core::oracle::{Oracle, RemoteOracle, RuleOracle};
use lam_core::policy::{ModelParams, SelectMode};
use lam_core::suite;
use lam_core::training::phases::{checkpoint_dir, checkpoint_path, MANIFEST_FILE};
use lam_core::training::{load_checkpoint, run_phase, PhaseData};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const CORPUS_DIR: &str = "corpus";
pub const CHECKPOINTS_DIR: &str = "checkpoints";
pub const RUNS_DIR: &str = "runs";
pub const REPORTS_DIR: &str = "reports";
pub const PLAN_RESULTS: &str = "plan.json";
pub const ACTION_RESULTS: &str = "actions.json";
pub const ONLINE_RESULTS: &str = "online.json";
pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_CSV: &str = "report.csv";

pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join(CORPUS_DIR)
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join(CHECKPOINTS_DIR)
    }

    pub fn runs(&self) -> PathBuf {
        self.root.join(RUNS_DIR)
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join(REPORTS_DIR)
    }

    fn ensure(&self) -> Result<()> {
        for d in [self.corpus(), self.checkpoints(), self.runs(), self.reports()] {
            std::fs::create_dir_all(&d).with_context(|| format!("create {}", d.display()))?;
        }
        Ok(())
    }

    fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.root).unwrap_or(path).to_string_lossy().replace('\\', "/")
    }

    fn digests(&self, paths: &[PathBuf]) -> Result<BTreeMap<String, String>> {
        paths
            .iter()
            .filter(|p| p.exists())
            .map(|p| Ok((self.relative(p), io::sha256_file(p)?)))
            .collect()
    }

    /// Trained phases present, in order.
    pub fn phases(&self) -> Vec<u8> {
        (1..=4).filter(|n| checkpoint_path(&self.checkpoints(), *n).exists()).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub details: Value,
}

/// Config snapshot without the workspace location, so equal runs in different
/// directories produce equal manifests.
fn config_snapshot(cfg: &RunConfig) -> Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Some(o) = v.as_object_mut() {
        o.remove("workspace");
    }
    v
}

fn write_manifest(ws: &Workspace, cfg: &RunConfig, path: &Path, command: &str, inputs: &[PathBuf], outputs: &[PathBuf], details: Value) -> Result<()> {
    let m = RunManifest {
        command: command.into(),
        seed: cfg.seed,
        config: config_snapshot(cfg),
        inputs: ws.digests(inputs)?,
        outputs: ws.digests(outputs)?,
        details,
    };
    write_json(path, &m)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    io::write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parse {}", path.display()))
}

fn require(path: &Path, hint: &str) -> Result<()> {
    if !path.exists() {
        bail!("{} is missing; {hint}", path.display());
    }
    Ok(())
}

pub fn oracle(cfg: &RunConfig) -> Result<Box<dyn Oracle>> {
    Ok(match cfg.oracle.provider {
        Provider::Mock => Box::new(RuleOracle),
        Provider::Remote => Box::new(RemoteOracle::new(cfg.oracle.remote.clone()).map_err(|e| config_error(e.to_string()))?),
    })
}

fn label(phase: u8) -> String {
    format!("LAM{phase}")
}

pub fn init(cfg: &RunConfig, with_suite: bool, force: bool) -> Result<String> {
    let ws = Workspace::new(&cfg.workspace);
    ws.ensure()?;
    let corpus = ws.corpus();
    let marker = corpus.join(if with_suite { TASKPLAN_FILE } else { RAW_FILE });
    if marker.exists() && !force {
        bail!("{} already exists; pass --force to overwrite", marker.display());
    }
    let written: Vec<PathBuf> = if with_suite {
        let c = suite::build_corpus(&RuleOracle)?;
        suite::write_corpus(&corpus, &c)?;
        [TASKPLAN_FILE, INSTANTIATED_FILE, lam_core::dataflow::pipeline::TRAJECTORIES_FILE, lam_core::dataflow::pipeline::VERDICTS_FILE, TRAINING_FILE]
            .iter()
            .map(|f| corpus.join(f))
            .collect()
    } else {
        io::write_jsonl(&marker, &fixture_corpus())?;
        vec![marker]
    };
    write_manifest(&ws, cfg, &corpus.join("init.manifest.json"), "init", &[], &written, json!({ "suite": with_suite }))?;
    Ok(format!("initialized {} with {} corpus file(s)", ws.root.display(), written.len()))
}

pub fn dataflow(cfg: &RunConfig, stage: &str) -> Result<String> {
    let stages: Vec<Stage> = if stage == "all" {
        Stage::ALL.to_vec()
    } else {
        vec![stage.parse().map_err(config_error)?]
    };
    let ws = Workspace::new(&cfg.workspace);
    ws.ensure()?;
    let corpus = ws.corpus();
    require(&corpus.join(stages[0].input_file()), "run `lam init` or the earlier stages first")?;
    let oracle = oracle(cfg)?;
    let inputs: Vec<PathBuf> = stages.iter().map(|s| corpus.join(s.input_file())).collect();
    let report = run_pipeline(&corpus, &stages, &cfg.pipeline, oracle.as_ref())?;
    let outputs: Vec<PathBuf> = report.outputs().iter().map(|f| corpus.join(f)).collect();
    let name = if stage == "all" { "dataflow".to_string() } else { format!("dataflow.{stage}") };
    write_manifest(&ws, cfg, &corpus.join(format!("{name}.manifest.json")), &format!("dataflow run --stage {stage}"), &inputs, &outputs, serde_json::to_value(&report)?)?;
    let summary: Vec<String> = report.stages.iter().map(|s| format!("{}: {} -> {}", s.stage.as_str(), s.input, s.output)).collect();
    Ok(summary.join("\n"))
}

pub fn train(cfg: &RunConfig, phase: u8) -> Result<String> {
    let ws = Workspace::new(&cfg.workspace);
    ws.ensure()?;
    let tcfg = cfg.training_config()?;
    let data = PhaseData::from_corpus(&ws.corpus())?;
    let oracle = oracle(cfg)?;
    let m = run_phase(phase, &data, &tcfg, &ws.checkpoints(), oracle.as_ref())?;
    Ok(format!("trained {} on {} {} ({})", m.checkpoint, m.size, m.data_type, ws.relative(&checkpoint_dir(&ws.checkpoints(), phase).join(MANIFEST_FILE))))
}

fn load_phase(ws: &Workspace, phase: Option<u8>) -> Result<(u8, ModelParams)> {
    let n = match phase {
        Some(n) => n,
        None => *ws.phases().last().context("no trained checkpoint; run `lam train --phase 1` first")?,
    };
    require(&checkpoint_path(&ws.checkpoints(), n), "train that phase first")?;
    Ok((n, load_checkpoint(&ws.checkpoints(), n)?))
}

fn clock(cfg: &RunConfig) -> Box<dyn Clock> {
    if cfg.online.wall_clock {
        Box::new(WallClock)
    } else {
        Box::new(FixedClock(cfg.online.fixed_step_seconds))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Timing {
    pub task_id: String,
    pub outcome: Outcome,
    pub steps: usize,
    pub step_seconds: Vec<f64>,
    pub total_seconds: f64,
}

fn timing(r: &RunRecord) -> Timing {
    Timing {
        task_id: r.trajectory.task_id.clone(),
        outcome: r.outcome,
        steps: r.steps(),
        step_seconds: r.step_seconds.clone(),
        total_seconds: r.total_seconds,
    }
}

pub fn agent_run(cfg: &RunConfig, task: &str, template: &str, task_id: &str, phase: Option<u8>, sample: bool) -> Result<String> {
    let ws = Workspace::new(&cfg.workspace);
    ws.ensure()?;
    let (n, params) = load_phase(&ws, phase)?;
    let mode = if sample { SelectMode::Sample { seed: cfg.seed, temperature: 1.0 } } else { SelectMode::Argmax };
    let policy = LearnedPolicy { params, mode };
    let run = run_task(&policy, clock(cfg).as_ref(), &cfg.agent, task_id, template, task)?;
    let dir = ws.runs().join("agent").join(task_id);
    std::fs::create_dir_all(&dir)?;
    let traj = dir.join("trajectory.json");
    let time = dir.join("timing.json");
    write_json(&traj, &run.trajectory)?;
    write_json(&time, &timing(&run))?;
    let ck = checkpoint_path(&ws.checkpoints(), n);
    write_manifest(&ws, cfg, &dir.join("manifest.json"), "agent run", &[ck], &[traj, time], json!({ "phase": n, "task": task, "template": template }))?;
    let mut out = format!("{}: {:?} after {} step(s)", label(n), run.outcome, run.steps());
    for s in &run.trajectory.steps {
        let target = if s.control_name.is_empty() { String::new() } else { format!(" on `{}`", s.control_name) };
        out.push_str(&format!("\n  {}. {}{target} [{}]{}", s.step_no, s.action.function, s.action.status.as_str(), if s.result.ok { "" } else { " failed" }));
    }
    Ok(out)
}

fn phases_to_eval(ws: &Workspace, phase: Option<u8>) -> Result<Vec<u8>> {
    let phases = match phase {
        Some(n) => vec![n],
        None => ws.phases(),
    };
    if phases.is_empty() {
        bail!("no trained checkpoint; run `lam train --phase 1` first");
    }
    Ok(phases)
}

pub fn eval_plan(cfg: &RunConfig, phase: Option<u8>, judge: bool) -> Result<String> {
    let ws = Workspace::new(&cfg.workspace);
    ws.ensure()?;
    let path = ws.corpus().join(TASKPLAN_FILE);
    require(&path, "run the normalize stage first")?;
    let plans: Vec<TaskPlanRecord> = io::read_jsonl(&path)?;
    let oracle = oracle(cfg)?;
    let matcher = if judge { Matcher::Oracle(oracle.as_ref()) } else { Matcher::Exact };
    let mut results: Vec<(String, PlanEvalResult)> = Vec::new();
    let mut inputs = vec![path];
    for n in phases_to_eval(&ws, phase)? {
        let (_, params) = load_phase(&ws, Some(n))?;
        inputs.push(checkpoint_path(&ws.checkpoints(), n));
        let pairs: Vec<PlanPair> = plans
            .par_iter()
            .map(|r| PlanPair { task: r.task.clone(), pred: params.generate_plan(&r.task), truth: r.plan.clone() })
            .collect();
        results.push((label(n), eval_plans(&pairs, &matcher)?));
    }
    finish_eval(&ws, cfg, "eval plan", PLAN_RESULTS, &inputs, &results, plan_table(&results).to_text())
}

pub fn eval_actions_cmd(cfg: &RunConfig, phase: Option<u8>) -> Result<String> {
    let ws = Workspace::new(&cfg.workspace);
    ws.ensure()?;
    let path = ws.corpus().join(TRAINING_FILE);
    require(&path, "run the postprocess stage first")?;
    let records: Vec<TrainingRecord> = io::read_jsonl(&path)?;
    let truth = truth_from_records(&records);
    let mut results: Vec<(String, ActionEvalResult)> = Vec::new();
    let mut inputs = vec![path];
    for n in phases_to_eval(&ws, phase)? {
        let (_, params) = load_phase(&ws, Some(n))?;
        inputs.push(checkpoint_path(&ws.checkpoints(), n));
        results.push((label(n), eval_actions(&predict_offline(&params, &records), &truth)?));
    }
    finish_eval(&ws, cfg, "eval actions", ACTION_RESULTS, &inputs, &results, action_table(&results).to_text())
}

pub fn eval_online_cmd(cfg: &RunConfig, phase: Option<u8>) -> Result<String> {
    let ws = Workspace::new(&cfg.workspace);
    ws.ensure()?;
    let path = ws.corpus().join(INSTANTIATED_FILE);
    require(&path, "run the instantiate stage first")?;
    let tasks: Vec<InstantiatedTask> = io::read_jsonl(&path)?;
    let oracle = oracle(cfg)?;
    let clock = clock(cfg);
    let agent: AgentConfig = cfg.agent;
    let mut results: Vec<(String, OnlineEvalResult)> = Vec::new();
    let mut inputs = vec![path];
    let mut outputs = Vec::new();
    for n in phases_to_eval(&ws, phase)? {
        let (_, params) = load_phase(&ws, Some(n))?;
        inputs.push(checkpoint_path(&ws.checkpoints(), n));
        let policy = LearnedPolicy { params, mode: SelectMode::Argmax };
        let runs: Vec<RunRecord> = tasks
            .par_iter()
            .map(|t| run_task(&policy, clock.as_ref(), &agent, &t.origin_task_id, &t.template_id, &t.instantiated_task))
            .collect::<Result<_, _>>()?;
        let dir = ws.runs().join(format!("lam{n}"));
        std::fs::create_dir_all(&dir)?;
        let trajs: Vec<_> = runs.iter().map(|r| r.trajectory.clone()).collect();
        let times: Vec<Timing> = runs.iter().map(timing).collect();
        io::write_jsonl(&dir.join("trajectories.jsonl"), &trajs)?;
        io::write_jsonl(&dir.join("timing.jsonl"), &times)?;
        outputs.push(dir.join("trajectories.jsonl"));
        outputs.push(dir.join("timing.jsonl"));
        results.push((label(n), eval_online(&runs, oracle.as_ref())?));
    }
    let text = online_table(&results).to_text();
    let out = finish_eval(&ws, cfg, "eval online", ONLINE_RESULTS, &inputs, &results, text)?;
    // Run files are listed in their own manifest as well.
    write_manifest(&ws, cfg, &ws.runs().join("online.manifest.json"), "eval online", &inputs, &outputs, json!({}))?;
    Ok(out)
}

fn finish_eval<T: Serialize>(ws: &Workspace, cfg: &RunConfig, command: &str, file: &str, inputs: &[PathBuf], results: &T, text: String) -> Result<String> {
    let path = ws.reports().join(file);
    write_json(&path, results)?;
    let stem = file.trim_end_matches(".json");
    write_manifest(ws, cfg, &ws.reports().join(format!("{stem}.manifest.json")), command, inputs, &[path], json!({}))?;
    Ok(text)
}

fn read_results<T: DeserializeOwned>(path: &Path) -> Result<Vec<(String, T)>> {
    if path.exists() {
        read_json(path)
    } else {
        Ok(Vec::new())
    }
}

pub fn report(cfg: &RunConfig) -> Result<String> {
    let ws = Workspace::new(&cfg.workspace);
    ws.ensure()?;
    let r = ws.reports();
    let (pp, ap, op) = (r.join(PLAN_RESULTS), r.join(ACTION_RESULTS), r.join(ONLINE_RESULTS));
    if !pp.exists() && !ap.exists() && !op.exists() {
        bail!("no evaluation results in {}; run `lam eval` first", r.display());
    }
    let tables = [
        plan_table(&read_results::<PlanEvalResult>(&pp)?),
        action_table(&read_results::<ActionEvalResult>(&ap)?),
        online_table(&read_results::<OnlineEvalResult>(&op)?),
    ];
    let text = tables.iter().map(|t| t.to_text()).collect::<Vec<_>>().join("\n");
    let csv = tables.iter().map(|t| format!("{}\n{}", t.title, t.to_csv())).collect::<Vec<_>>().join("\n");
    io::write_atomic(&r.join(REPORT_TXT), text.as_bytes())?;
    io::write_atomic(&r.join(REPORT_CSV), csv.as_bytes())?;
    write_manifest(&ws, cfg, &r.join("report.manifest.json"), "report", &[pp, ap, op], &[r.join(REPORT_TXT), r.join(REPORT_CSV)], json!({}))?;
    Ok(text)
}
