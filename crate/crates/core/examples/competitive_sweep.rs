//! Mean value of each mechanism and offline/online ratios over budget and
//! arrival-rate grids on the desk-scale scenario.

use crowdsense::harness::competitive_comparison;
use crowdsense::rational::int;
use crowdsense::sim::ScenarioConfig;

fn main() -> crowdsense::Result<()> {
    let base = ScenarioConfig::scaled();
    let budgets = [int(200), int(400), int(800), int(1600)];
    let table = competitive_comparison(&base, &budgets, &[0.2, 0.4, 0.8], 8)?;
    println!("{:<8} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9}", "axis", "point", "omz", "omg", "prop", "greedy", "random", "prop/omz");
    for row in table {
        println!(
            "{:<8} {:>6} {:>8.1} {:>8.1} {:>8.1} {:>8.1} {:>8.1} {:>9.3}",
            format!("{:?}", row.axis),
            row.point,
            row.omz,
            row.omg,
            row.prop_share,
            row.greedy,
            row.random,
            row.prop_share_over_omz
        );
    }
    Ok(())
}
