//! Parses an A1 policy document and prints what the controller will enforce.
//!
//! cargo run --example validate_policy -- fixtures/a1_policy_example.json

use rslaq::policy::parse_a1_policy;

fn main() -> rslaq::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/a1_policy_example.json").into());
    let policy = parse_a1_policy(&std::fs::read_to_string(&path)?)?;
    for s in policy.slices() {
        println!("{} (weight {:.2}, optimises {})", s.name, s.weight, s.optimization_kpi.label());
        match &s.sla {
            None => println!("  no SLA"),
            Some(sla) => {
                println!("  reliability {}", sla.reliability);
                for k in &sla.outage_kpis {
                    println!("  outage: {k}");
                }
                for k in &sla.soft_kpis {
                    println!("  soft:   {k}");
                }
            }
        }
        for k in &s.ignored_kpis {
            println!("  ignored ({:?}): {}", k.kind, k.text);
        }
    }
    println!("\ncanonical form:\n{}", policy.to_json_string());
    Ok(())
}
