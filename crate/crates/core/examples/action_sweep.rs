//! Holds every action fixed for a number of frames and prints how often
//! each slice is in outage. Useful for checking which allocations can meet
//! a scenario's SLAs at all.
//!
//! cargo run --release --example action_sweep -- normal 300

use rslaq::action_space::{AllocationPlan, SchedulerKind};
use rslaq::agent::Environment;
use rslaq::harness::{RewardMode, Scenario, SlicingEnv};

fn main() -> rslaq::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "normal".into());
    let frames: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);
    let scenario = Scenario::preset(&name)?;
    let base = SlicingEnv::new(&scenario, scenario.seed(), RewardMode::SlaAware)?.with_history(false);
    let j = scenario.num_slices();

    let run = |plan: &AllocationPlan, sch: SchedulerKind| -> rslaq::Result<(Vec<usize>, f64, Vec<f64>)> {
        let mut env = base.clone();
        env.reset()?;
        let mut outages = vec![0; j];
        let mut reward = 0.0;
        let mut thr = vec![0.0; j];
        for _ in 0..frames {
            let (_, rec) = env.step_plan(plan, sch)?;
            for (n, &phi) in outages.iter_mut().zip(&rec.outcome.phi) {
                *n += usize::from(phi);
            }
            reward += rec.reward;
            for (t, s) in thr.iter_mut().zip(&rec.kpm.slices) {
                *t += s.thr_bps / 1e6;
            }
        }
        Ok((outages, reward / frames as f64, thr.iter().map(|t| t / frames as f64).collect()))
    };

    println!("action,composition,scheduler,outages,mean_reward,mean_thr_mbps");
    let mut clean = 0;
    for a in base.action_space().iter() {
        let (plan, sch) = base.plan_for(a.id)?;
        let (out, r, thr) = run(&plan, sch)?;
        clean += usize::from(out.iter().all(|&n| n == 0));
        println!(
            "{},{:?},{},{:?},{:.4},{:.2?}",
            a.id,
            a.composition.tenths(),
            sch.label(),
            out,
            r,
            thr
        );
    }
    let weights = scenario.policy().weights();
    for sch in SchedulerKind::ALL {
        let (out, r, thr) = run(&AllocationPlan::weighted(&weights)?, sch)?;
        println!("static,{weights:.3?},{},{:?},{:.4},{:.2?}", sch.label(), out, r, thr);
    }
    eprintln!("{clean} of {} actions never hit an outage", base.action_space().len());
    Ok(())
}
