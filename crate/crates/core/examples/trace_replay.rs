//! Replays both five-user walkthroughs step by step and checks each against
//! its expected trace.

use crowdsense::online::{diff_traces, run_omg, run_omz};
use crowdsense::rational::format;
use crowdsense::scenarios::{example1, example2};

fn main() -> crowdsense::Result<()> {
    for (example, general) in [(example1(), false), (example2(), true)] {
        let bids = example.bids();
        let run = if general {
            run_omg(&bids, &example.universe, &example.config)?
        } else {
            run_omz(&bids, &example.universe, &example.config)?
        };
        println!("{} ({})", example.name, if general { "OMG" } else { "OMZ" });
        for (step, row) in run.trace.iter().zip(run.rows()) {
            let raised: Vec<String> = step.updates.iter().map(|u| format!("p{}={}", u.user, format(&u.payment))).collect();
            let learned = if step.threshold_updated { format!("rho*={}", format(&step.threshold)) } else { String::new() };
            println!("  t={} committed={:<3} {:<10} {}", row.t, format(&row.committed), learned, raised.join(" "));
        }
        match diff_traces(&run.rows(), &example.expected_trace()) {
            None => println!("  matches the expected trace"),
            Some(m) => println!("  MISMATCH {m}"),
        }
    }
    Ok(())
}
