//! Utility curves for one user under bid and time deviations, then a short
//! randomized certification run.

use crowdsense::harness::{
    bid_deviation_sweep, bid_grid, time_deviation_sweep, DeviationAxis, Instance, Mechanism,
};
use crowdsense::model::UserId;
use crowdsense::scenarios::example2;
use crowdsense::verify::truthfulness_suite;

fn main() -> crowdsense::Result<()> {
    let instance = Instance::from_example(&example2());
    let user = UserId(1);
    let grid = bid_grid(&instance, Mechanism::Omg, user)?;
    let sweep = bid_deviation_sweep(&instance, Mechanism::Omg, user, &grid)?;
    println!("user 1, truthful utility {}", sweep.truthful.utility);
    for point in sweep.points.iter().step_by(4) {
        println!("  bid {:>7}  won {:<5}  utility {}", point.value, point.won, point.utility);
    }
    let late = time_deviation_sweep(&instance, user, DeviationAxis::Arrival, &[1, 2, 3, 4, 5])?;
    for point in &late.points {
        println!("  arrival {}  payment {}  utility {}", point.value, point.payment, point.utility);
    }

    let report = truthfulness_suite(20, 7)?;
    println!("{} instances, {} runs, {} profitable deviations", report.instances, report.runs, report.failures.len());
    for line in report.failures.iter().take(3) {
        println!("  {line}");
    }
    Ok(())
}
