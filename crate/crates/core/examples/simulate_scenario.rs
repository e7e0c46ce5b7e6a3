//! Runs all five mechanisms on the desk-scale scenario and prints the mean
//! value and payment of each.
//!
//! `cargo run --release --example simulate_scenario -- [reps] [seed]`

use crowdsense::sim::{run_comparison, summarize, ScenarioConfig};

fn main() -> crowdsense::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);
    let config = ScenarioConfig { seed, ..ScenarioConfig::scaled() };

    let started = std::time::Instant::now();
    let rows = run_comparison(&config, reps)?;
    println!("{reps} replications in {:.1?} (OMZ on the zero-interval variant)", started.elapsed());
    println!("{:<11} {:>10} {:>8} {:>10} {:>8}", "mechanism", "value", "sd", "payment", "sd");
    for s in summarize(&rows) {
        println!(
            "{:<11} {:>10.1} {:>8.1} {:>10.2} {:>8.2}",
            s.mechanism.name(),
            s.value_mean,
            s.value_sd,
            s.payment_mean,
            s.payment_sd
        );
    }
    Ok(())
}
