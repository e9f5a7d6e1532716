//! Drives the cell simulator of a preset under a fixed split and scheduler
//! and writes the per-UE frame trace as CSV to stdout.
//!
//! cargo run --release --example simulate_frames -- congestion PF 100 > trace.csv

use rslaq::action_space::{AllocationPlan, SchedulerKind};
use rslaq::harness::Scenario;
use rslaq::ransim::{FrameStats, Simulator};
use rslaq::telemetry;

fn main() -> rslaq::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let sc = Scenario::preset(args.first().map_or("normal", String::as_str))?;
    let sch = args.get(1).and_then(|s| SchedulerKind::from_label(s)).unwrap_or(SchedulerKind::RoundRobin);
    let frames: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(50);

    let mut sim = Simulator::new(sc.sim_config().clone(), sc.roster().to_vec(), sc.num_slices())?;
    let plan = AllocationPlan::weighted(&sc.policy().weights())?;
    let mut w = csv::Writer::from_writer(std::io::stdout());
    FrameStats::write_trace_header(&mut w)?;
    let mut thr = vec![0.0; sc.num_slices()];
    for _ in 0..frames {
        let st = sim.step_frame(&plan, sch)?;
        st.write_trace(&mut w)?;
        for (t, s) in thr.iter_mut().zip(&telemetry::collect(&st).slices) {
            *t += s.thr_bps / frames as f64;
        }
    }
    w.flush()?;
    for (s, t) in sc.policy().slices().iter().zip(thr) {
        eprintln!("{:6} mean throughput {:.2} Mbit/s", s.name, t / 1e6);
    }
    Ok(())
}
