//! Trains RSLAQ on a preset, then evaluates the greedy policy next to the
//! three static schedulers on a fresh seed.
//!
//! cargo run --release --example train_and_evaluate -- congestion

use rslaq::harness::{run_eval, run_training, Controller, ControllerKind, Scenario};

fn main() -> rslaq::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "normal".into());
    let mut scenario = Scenario::preset(&name)?;
    if let Some(seed) = args.next().and_then(|s| s.parse().ok()) {
        scenario = scenario.with_seed(seed);
    }
    let frames = scenario.harness().eval_frames;

    let agent = run_training(&scenario, ControllerKind::Rslaq)?;
    println!(
        "trained {} steps in {:.1}s, last-50 mean reward {:.3}, {} alarm(s)",
        agent.log.len(),
        agent.wall_clock_s,
        agent.tail_mean(50).unwrap_or(f64::NAN),
        agent.alarms.len()
    );
    for a in &agent.alarms {
        println!("  alarm at step {}: {} `{}` (evidence {:.2})", a.frame, a.slice_name, a.predicate, a.evidence);
    }

    let mut controllers = vec![agent.controller()];
    for k in [ControllerKind::Rr, ControllerKind::Pf, ControllerKind::Bcqi] {
        controllers.push(Controller::fixed(k)?);
    }
    for c in &controllers {
        let r = run_eval(&scenario, c, frames)?;
        let rel: Vec<String> = r
            .slices
            .iter()
            .map(|s| format!("{} {:.3}", s.name, s.reliability.unwrap_or(f64::NAN)))
            .collect();
        println!("{:6} reliability: {}", c.kind().label(), rel.join(", "));
    }
    Ok(())
}
