//! Trains RSLAQ and Opt on a preset, evaluates all five controllers on a fresh
//! seed and prints the summary CSV.
//!
//! cargo run --release --example compare_controllers -- congestion

use rslaq::harness::report::write_summary;
use rslaq::harness::{compare, Scenario};

fn main() -> rslaq::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "congestion".into());
    let sc = Scenario::preset(&name)?;
    let cmp = compare(&sc, sc.harness().eval_frames)?;
    for t in &cmp.trained {
        eprintln!("{}: last-50 mean reward {:.3}", t.kind.label(), t.tail_mean(50).unwrap_or(f64::NAN));
    }
    write_summary(&cmp.reports, std::io::stdout())
}
