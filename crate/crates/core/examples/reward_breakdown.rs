//! Steps the environment under one action and prints how each frame's reward
//! is composed.
//!
//! cargo run --release --example reward_breakdown -- normal 30

use rslaq::harness::{RewardMode, Scenario, SlicingEnv};

fn main() -> rslaq::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let sc = Scenario::preset(args.first().map_or("normal", String::as_str))?;
    let frames: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let mut env = SlicingEnv::new(&sc, sc.seed(), RewardMode::SlaAware)?;
    let (plan, sch) = env.plan_for(0)?;
    println!("action 0: p_final {:.3?} {sch}", plan.p_final());
    println!("{:>5} {:>15} {:>7} {:>6} {:>24} {:>8}", "frame", "kind", "reward", "1/cost", "h", "r_opt");
    for _ in 0..frames {
        let (_, rec) = env.step_plan(&plan, sch)?;
        let o = &rec.outcome;
        println!(
            "{:>5} {:>15} {:>7.3} {:>6.2} {:>24} {:>8.3}",
            rec.step,
            o.kind.label(),
            o.value,
            o.inv_cost,
            format!("{:.3?}", o.h),
            o.r_opt
        );
    }
    Ok(())
}
