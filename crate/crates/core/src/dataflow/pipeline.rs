//! Stage runner over line-delimited record files in one corpus directory.

use super::evolve::{evolve_corpus, EvolutionConfig};
use super::execute::{execute_trajectory, judge_trajectory};
use super::instantiate::instantiate;
use super::normalize::{normalize_sources, NormalizeConfig};
use super::postprocess::postprocess;
use super::records::*;
use super::DataflowError;
use crate::env_sim::templates;
use crate::io;
use crate::oracle::Oracle;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const RAW_FILE: &str = "raw.jsonl";
pub const TASKPLAN_FILE: &str = "taskplan.jsonl";
pub const EVOLVED_FILE: &str = "evolved.jsonl";
pub const INSTANTIATED_FILE: &str = "instantiated.jsonl";
pub const TRAJECTORIES_FILE: &str = "trajectories.jsonl";
pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const TRAINING_FILE: &str = "training.jsonl";

/// The bundled 20-record raw corpus.
pub const FIXTURE_CORPUS: &str = include_str!("../../assets/corpus/raw.jsonl");

pub fn fixture_corpus() -> Vec<RawRecord> {
    io::parse_jsonl(Path::new("fixture"), FIXTURE_CORPUS).expect("bundled corpus parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Normalize,
    Evolve,
    Instantiate,
    Execute,
    Judge,
    Postprocess,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::Normalize, Stage::Evolve, Stage::Instantiate, Stage::Execute, Stage::Judge, Stage::Postprocess];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Normalize => "normalize",
            Stage::Evolve => "evolve",
            Stage::Instantiate => "instantiate",
            Stage::Execute => "execute",
            Stage::Judge => "judge",
            Stage::Postprocess => "postprocess",
        }
    }

    pub fn input_file(self) -> &'static str {
        match self {
            Stage::Normalize => RAW_FILE,
            Stage::Evolve => TASKPLAN_FILE,
            Stage::Instantiate => EVOLVED_FILE,
            Stage::Execute => INSTANTIATED_FILE,
            Stage::Judge | Stage::Postprocess => TRAJECTORIES_FILE,
        }
    }

    pub fn output_file(self) -> &'static str {
        match self {
            Stage::Normalize => TASKPLAN_FILE,
            Stage::Evolve => EVOLVED_FILE,
            Stage::Instantiate => INSTANTIATED_FILE,
            Stage::Execute => TRAJECTORIES_FILE,
            Stage::Judge => VERDICTS_FILE,
            Stage::Postprocess => TRAINING_FILE,
        }
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|st| st.as_str() == s).ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub normalize: NormalizeConfig,
    pub evolution: EvolutionConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub input: usize,
    pub output: usize,
    /// Reason → count for records that did not make it through.
    pub dropped: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub stages: Vec<StageReport>,
}

impl PipelineReport {
    /// Files written, relative to the corpus directory.
    pub fn outputs(&self) -> Vec<&'static str> {
        self.stages.iter().map(|s| s.stage.output_file()).collect()
    }
}

fn bump(map: &mut BTreeMap<String, usize>, key: impl Into<String>) {
    *map.entry(key.into()).or_insert(0) += 1;
}

fn path(dir: &Path, file: &str) -> PathBuf {
    dir.join(file)
}

pub fn run_stage(dir: &Path, stage: Stage, cfg: &PipelineConfig, oracle: &dyn Oracle) -> Result<StageReport, DataflowError> {
    let input = path(dir, stage.input_file());
    let output = path(dir, stage.output_file());
    let mut dropped = BTreeMap::new();
    let (n_in, n_out) = match stage {
        Stage::Normalize => {
            let raw: Vec<RawRecord> = io::read_jsonl(&input)?;
            let (kept, drops) = normalize_sources(&raw, &cfg.normalize);
            for (why, n) in drops {
                dropped.insert(format!("{why:?}"), n);
            }
            io::write_jsonl(&output, &kept)?;
            (raw.len(), kept.len())
        }
        Stage::Evolve => {
            let records: Vec<TaskPlanRecord> = io::read_jsonl(&input)?;
            let (all, stats) = evolve_corpus(&records, oracle, &cfg.evolution);
            if stats.rejected > 0 {
                dropped.insert("Rejected".into(), stats.rejected);
            }
            io::write_jsonl(&output, &all)?;
            (records.len(), all.len())
        }
        Stage::Instantiate => {
            let records: Vec<TaskPlanRecord> = io::read_jsonl(&input)?;
            let results: Vec<_> = records.par_iter().map(|r| instantiate(r, templates::templates(), oracle)).collect();
            let mut out = Vec::new();
            for (r, res) in records.iter().zip(results) {
                match res {
                    Ok(inst) => out.push(inst),
                    Err(e) => {
                        tracing::debug!(task_id = %r.task_id, %e, "instantiation failed");
                        bump(&mut dropped, error_kind(&e));
                    }
                }
            }
            out.sort_by(|a, b| a.origin_task_id.cmp(&b.origin_task_id));
            io::write_jsonl(&output, &out)?;
            (records.len(), out.len())
        }
        Stage::Execute => {
            let insts: Vec<InstantiatedTask> = io::read_jsonl(&input)?;
            let mut out = insts.par_iter().map(execute_trajectory).collect::<Result<Vec<_>, _>>()?;
            out.sort_by(|a, b| a.task_id.cmp(&b.task_id));
            for t in out.iter().filter(|t| t.final_status != FinalStatus::Success) {
                bump(&mut dropped, format!("{:?}", t.final_status));
            }
            io::write_jsonl(&output, &out)?;
            (insts.len(), out.len())
        }
        Stage::Judge => {
            let trajs: Vec<Trajectory> = io::read_jsonl(&input)?;
            let success: Vec<&Trajectory> = trajs.iter().filter(|t| t.final_status == FinalStatus::Success).collect();
            let mut out = success.par_iter().map(|t| judge_trajectory(t, oracle)).collect::<Result<Vec<_>, _>>()?;
            out.sort_by(|a, b| a.task_id.cmp(&b.task_id));
            for v in out.iter().filter(|v| v.task_complete != TaskComplete::Yes) {
                bump(&mut dropped, format!("{:?}", v.task_complete));
            }
            io::write_jsonl(&output, &out)?;
            (trajs.len(), out.len())
        }
        Stage::Postprocess => {
            let trajs: Vec<Trajectory> = io::read_jsonl(&input)?;
            let verdicts: Vec<EvaluationVerdict> = io::read_jsonl(&path(dir, VERDICTS_FILE))?;
            let by_id: BTreeMap<&str, &EvaluationVerdict> = verdicts.iter().map(|v| (v.task_id.as_str(), v)).collect();
            let mut out = Vec::new();
            let mut kept = 0;
            for t in &trajs {
                match by_id.get(t.task_id.as_str()) {
                    Some(v) if v.task_complete == TaskComplete::Yes => {
                        out.extend(postprocess(t, v));
                        kept += 1;
                    }
                    Some(_) => bump(&mut dropped, "NotComplete"),
                    None => bump(&mut dropped, "Unjudged"),
                }
            }
            io::write_jsonl(&output, &out)?;
            (trajs.len(), kept)
        }
    };
    tracing::info!(stage = stage.as_str(), input = n_in, output = n_out, "stage finished");
    Ok(StageReport { stage, input: n_in, output: n_out, dropped })
}

fn error_kind(e: &DataflowError) -> &'static str {
    match e {
        DataflowError::NoTemplateMatch(_) => "NoTemplateMatch",
        DataflowError::Oracle(_) => "OracleFailure",
        DataflowError::Parse(_) => "ParseFailure",
        DataflowError::Validation(_) => "ValidationFailure",
        DataflowError::Io(_) => "Io",
        DataflowError::Env(_) => "Env",
    }
}

/// Runs `stages` in order against the files in `dir`.
pub fn run_pipeline(
    dir: &Path,
    stages: &[Stage],
    cfg: &PipelineConfig,
    oracle: &dyn Oracle,
) -> Result<PipelineReport, DataflowError> {
    let mut report = PipelineReport::default();
    for &stage in stages {
        report.stages.push(run_stage(dir, stage, cfg, oracle)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::RuleOracle;

    #[test]
    fn fixture_corpus_has_twenty_records() {
        let raw = fixture_corpus();
        assert_eq!(raw.len(), 20);
        assert!(raw.iter().any(|r| r.id == "word_032"));
    }

    #[test]
    fn stage_names_roundtrip() {
        for s in Stage::ALL {
            assert_eq!(s.as_str().parse::<Stage>().unwrap(), s);
        }
        assert!("crawl".parse::<Stage>().is_err());
    }

    #[test]
    fn full_run_on_fixture() {
        let dir = tempfile::tempdir().unwrap();
        io::write_jsonl(&dir.path().join(RAW_FILE), &fixture_corpus()).unwrap();
        let report = run_pipeline(dir.path(), &Stage::ALL, &PipelineConfig::default(), &RuleOracle).unwrap();
        for s in &report.stages {
            if s.stage != Stage::Evolve {
                assert!(s.output <= s.input, "{:?} grew", s.stage);
            }
        }
        let counts: Vec<(usize, usize)> = report.stages.iter().map(|s| (s.input, s.output)).collect();
        assert_eq!(counts[0], (20, 14));
        assert_eq!(counts[1], (14, 35));
        assert_eq!(report.stages[2].dropped.get("NoTemplateMatch"), Some(&3));
        assert_eq!(report.stages[3].dropped.get("Discarded"), Some(&1));
        let training: Vec<TrainingRecord> = io::read_jsonl(&dir.path().join(TRAINING_FILE)).unwrap();
        let verdicts: Vec<EvaluationVerdict> = io::read_jsonl(&dir.path().join(VERDICTS_FILE)).unwrap();
        let mut by_task: BTreeMap<&str, Vec<TrainingRecord>> = BTreeMap::new();
        for r in &training {
            by_task.entry(r.task_id.as_str()).or_default().push(r.clone());
        }
        for (id, recs) in &by_task {
            let v = verdicts.iter().find(|v| v.task_id == *id).unwrap();
            assert_eq!(v.task_complete, TaskComplete::Yes);
            crate::dataflow::schema::validate_sequence(recs).unwrap();
        }
        assert_eq!(by_task.len(), report.stages[5].output);
    }
}
