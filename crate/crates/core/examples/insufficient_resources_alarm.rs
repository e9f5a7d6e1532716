//! Trains on the insufficient-resources preset, where the URLLC target cannot
//! be met even with the whole dynamic pool, and prints the raised alarms as
//! newline-delimited JSON.
//!
//! cargo run --release --example insufficient_resources_alarm

use rslaq::harness::report::write_alarms;
use rslaq::harness::{run_training, ControllerKind, Scenario};

fn main() -> rslaq::Result<()> {
    let sc = Scenario::preset("insufficient_resources")?;
    let agent = run_training(&sc, ControllerKind::Rslaq)?;
    eprintln!(
        "last-50 mean reward {:.3} over {} steps",
        agent.tail_mean(50).unwrap_or(f64::NAN),
        agent.log.len()
    );
    write_alarms(&agent.alarms, std::io::stdout())
}
