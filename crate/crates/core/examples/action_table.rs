//! Enumerates the action space and shows the PRB split each action yields
//! for a given set of operator weights.
//!
//! cargo run --example action_table -- 0.3333 0.4 0.2667

use rslaq::action_space::{compose_allocation, enumerate_actions, static_share, SchedulerKind};

fn main() -> rslaq::Result<()> {
    let mut weights: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if weights.is_empty() {
        weights = vec![0.3333, 0.4, 0.2667];
    }
    let p_sta = static_share(&weights)?;
    let space = enumerate_actions(weights.len(), &SchedulerKind::ALL)?;
    println!("{} slices -> {} actions", weights.len(), space.len());
    println!("p_sta {p_sta:.4?}");
    println!("{:>4}  {:12} {:5} p_final", "id", "tenths", "sch");
    for a in space.iter().filter(|a| a.scheduler == SchedulerKind::RoundRobin).take(12) {
        let plan = compose_allocation(&a.composition, &p_sta)?;
        println!("{:>4}  {:12} {:5} {:.4?}", a.id, format!("{:?}", a.composition.tenths()), a.scheduler, plan.p_final());
    }
    println!("...");
    Ok(())
}
