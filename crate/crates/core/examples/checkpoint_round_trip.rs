//! Trains briefly, saves the network, reloads it and checks that the greedy
//! decisions survive the round trip.
//!
//! cargo run --release --example checkpoint_round_trip

use rslaq::agent::{checkpoint, QFunction};
use rslaq::harness::{run_training, ControllerKind, RewardMode, Scenario, SlicingEnv};

fn main() -> rslaq::Result<()> {
    let mut spec = Scenario::preset("low_traffic")?.into_spec();
    spec.hyperparams.total_steps = 60;
    let sc = Scenario::new(spec)?;
    let agent = run_training(&sc, ControllerKind::Rslaq)?;

    let path = std::env::temp_dir().join("rslaq_example.ckpt");
    checkpoint::save(&agent.net, &path)?;
    let loaded = checkpoint::load(&path)?;
    println!("{} bytes at {}", std::fs::metadata(&path)?.len(), path.display());

    let env = SlicingEnv::new(&sc, sc.seed(), RewardMode::SlaAware)?;
    let s = env.initial_state();
    let (a, b) = (agent.net.q_values(s)?, loaded.q_values(s)?);
    let same = a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
    println!("q-values bit-identical after reload: {same}");
    println!("greedy action {}", rslaq::agent::argmax(&b));
    Ok(())
}
