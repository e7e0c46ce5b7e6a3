//! Offline benchmarks on a random 12-user instance: proportional share with
//! critical payments, seed-enumeration greedy, and the exhaustive optimum.

use crowdsense::offline::{brute_force_optimal, greedy_budgeted_max_coverage, payment_records, proportional_share_offline};
use crowdsense::rational::format;
use crowdsense::verify::{random_instance, InstanceShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> crowdsense::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let instance = random_instance(&mut rng, InstanceShape { max_users: 12, max_pois: 30, zero_interval: false });
    let bids = instance.truthful_bids();
    let budget = &instance.config.budget;
    println!("{} users, {} tasks, budget {}", bids.len(), instance.universe.task_count(), format(budget));

    let prop = proportional_share_offline(&bids, &instance.universe, budget)?;
    println!("proportional share: value {} paying {}", prop.total_value, format(&prop.total_payment));
    for winner in &prop.winners {
        let bid = bids.iter().find(|b| b.id == *winner).expect("winner bid");
        let records = payment_records(bid, &bids, &instance.universe, budget);
        println!(
            "  user {winner}: bid {} paid {} ({} candidate prices)",
            format(&bid.bid),
            format(&prop.payment(*winner)),
            records.len()
        );
    }
    let greedy = greedy_budgeted_max_coverage(&bids, &instance.universe, budget)?;
    println!("greedy: value {} spending {}", greedy.total_value, format(&greedy.total_payment));
    let best = brute_force_optimal(&bids, &instance.universe, budget, 15)?;
    println!("optimum: value {} spending {}", best.total_value, format(&best.total_payment));
    Ok(())
}
