//! CSV and NDJSON writers for run results.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::agent::StepLog;
use crate::error::Result;

use super::alarm::AlarmEvent;
use super::env::StepRecord;
use super::run::{RunReport, TrainedAgent};

pub const SUMMARY_HEADER: [&str; 8] = [
    "controller",
    "scenario",
    "slice",
    "mean_thr_bps",
    "mean_bfs",
    "outage_frames",
    "soft_frames",
    "reliability",
];

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// One row per (controller, slice).
pub fn write_summary<W: Write>(reports: &[RunReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in reports {
        for s in &r.slices {
            w.write_record([
                r.controller.label().to_string(),
                r.scenario.clone(),
                s.name.clone(),
                s.mean_thr_bps.to_string(),
                s.mean_bfs.to_string(),
                s.outage_frames.to_string(),
                s.soft_frames.to_string(),
                opt(s.reliability),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-frame trace, one row per (frame, slice).
pub fn write_trace<W: Write>(trace: &[StepRecord], slice_names: &[String], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "step",
        "action",
        "scheduler",
        "reward",
        "kind",
        "slice",
        "p_final",
        "thr_bps",
        "offered_bps",
        "bfs",
        "rsh",
        "btx",
        "tdp",
        "outage",
        "soft",
        "h",
    ])?;
    for r in trace {
        for (j, name) in slice_names.iter().enumerate() {
            let a = &r.kpm.slices[j];
            w.write_record([
                r.step.to_string(),
                r.action.map_or(String::new(), |a| a.to_string()),
                r.scheduler.label().to_string(),
                r.reward.to_string(),
                r.outcome.kind.label().to_string(),
                name.clone(),
                r.p_final[j].to_string(),
                a.thr_bps.to_string(),
                a.offered_bps.to_string(),
                a.bfs.to_string(),
                a.rsh.to_string(),
                a.btx.to_string(),
                a.tdp.to_string(),
                u8::from(r.outcome.phi[j]).to_string(),
                u8::from(r.outcome.rho[j]).to_string(),
                r.outcome.h[j].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reward curve of a training run.
pub fn write_training_log<W: Write>(log: &[StepLog], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    StepLog::write_csv_header(&mut w)?;
    for l in log {
        l.write_csv(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_alarms<W: Write>(alarms: &[AlarmEvent], out: W) -> Result<()> {
    AlarmEvent::write_ndjson(alarms, out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `<prefix>_summary.csv`, `<prefix>_trace.csv` and
/// `<prefix>_alarms.ndjson` into `dir`.
pub fn save_run(report: &RunReport, slice_names: &[String], dir: &Path, prefix: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_summary(std::slice::from_ref(report), create(&dir.join(format!("{prefix}_summary.csv")))?)?;
    write_trace(&report.trace, slice_names, create(&dir.join(format!("{prefix}_trace.csv")))?)?;
    write_alarms(&report.alarms, create(&dir.join(format!("{prefix}_alarms.ndjson")))?)?;
    Ok(())
}

/// Writes the checkpoint, `train_log.csv`, `train_trace.csv` and
/// `train_alarms.ndjson` into `dir`.
pub fn save_training(agent: &TrainedAgent, slice_names: &[String], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    crate::agent::checkpoint::save(&agent.net, &dir.join(checkpoint_name(agent)))?;
    write_training_log(&agent.log, create(&dir.join("train_log.csv"))?)?;
    write_trace(&agent.history, slice_names, create(&dir.join("train_trace.csv"))?)?;
    write_alarms(&agent.alarms, create(&dir.join("train_alarms.ndjson"))?)?;
    Ok(())
}

pub fn checkpoint_name(agent: &TrainedAgent) -> String {
    format!("{}.ckpt", agent.kind.label())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::{run_eval, Controller, ControllerKind};
    use crate::harness::Scenario;

    #[test]
    fn summary_schema() {
        let sc = Scenario::preset("normal").unwrap();
        let r = run_eval(&sc, &Controller::fixed(ControllerKind::Rr).unwrap(), 5).unwrap();
        let mut buf = Vec::new();
        write_summary(&[r.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SUMMARY_HEADER.join(","));
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("rr,normal,URLLC,"));

        let names: Vec<String> = r.slices.iter().map(|s| s.name.clone()).collect();
        let mut buf = Vec::new();
        write_trace(&r.trace, &names, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 5 * 3);
    }

    #[test]
    fn empty_reliability_is_blank() {
        let sc = Scenario::preset("normal").unwrap();
        let r = run_eval(&sc, &Controller::fixed(ControllerKind::Pf).unwrap(), 0).unwrap();
        let mut buf = Vec::new();
        write_summary(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",0,0,"));
    }
}
