use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crowdsense::harness::{Instance, Mechanism};
use crowdsense::model::{Coverage, DeclaredBid, TaskUniverse};
use crowdsense::offline::proportional_share_offline;
use crowdsense::online::{run_omg, run_omz};
use crowdsense::rational::{int, ratio, Rational};
use crowdsense::verify::{check_run_safety, random_instance, InstanceShape};

fn small_instance(seed: u64, zero_interval: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_instance(&mut rng, InstanceShape { max_users: 12, max_pois: 20, zero_interval })
}

/// Coverage value counted from scratch.
fn recount(requirements: &[u32], sets: &[&Vec<usize>]) -> u64 {
    let mut counts = vec![0u32; requirements.len()];
    for set in sets {
        for &j in set.iter() {
            counts[j] += 1;
        }
    }
    counts.iter().zip(requirements).map(|(&c, &r)| c.min(r) as u64).sum()
}

fn with_bid(bids: &[DeclaredBid], index: usize, bid: Rational) -> Vec<DeclaredBid> {
    let mut out = bids.to_vec();
    out[index].bid = bid;
    out
}

fn cent() -> Rational {
    ratio(1, 100)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn incremental_coverage_matches_recount(
        requirements in prop::collection::vec(1u32..=3, 1..12),
        raw in prop::collection::vec(prop::collection::btree_set(0usize..12, 0..6), 1..8),
    ) {
        let m = requirements.len();
        let sets: Vec<Vec<usize>> = raw.iter().map(|s| s.iter().copied().filter(|&j| j < m).collect()).collect();
        let universe = TaskUniverse::new(requirements.clone()).unwrap();
        let mut coverage = Coverage::new(&universe);
        for (k, set) in sets.iter().enumerate() {
            let before: Vec<&Vec<usize>> = sets[..k].iter().collect();
            let after: Vec<&Vec<usize>> = sets[..=k].iter().collect();
            prop_assert_eq!(coverage.marginal(set), recount(&requirements, &after) - recount(&requirements, &before));
            coverage.insert(set);
            prop_assert_eq!(coverage.value(), recount(&requirements, &after));
            prop_assert_eq!(coverage.marginal_without(set), recount(&requirements, &after) - recount(&requirements, &before));
        }
    }

    #[test]
    fn online_runs_are_safe(seed in any::<u64>(), skew in 1i64..4) {
        for (zero_interval, mechanisms) in [(true, &[Mechanism::Omz, Mechanism::Omg][..]), (false, &[Mechanism::Omg][..])] {
            let instance = small_instance(seed, zero_interval);
            let truthful = instance.truthful_bids();
            let skewed: Vec<DeclaredBid> = truthful
                .iter()
                .enumerate()
                .map(|(k, b)| DeclaredBid { bid: &b.bid * int(1 + (k as i64 % skew)) / int(skew), ..b.clone() })
                .collect();
            for &mechanism in mechanisms {
                for bids in [&truthful, &skewed] {
                    let run = if mechanism == Mechanism::Omz {
                        run_omz(bids, &instance.universe, &instance.config)
                    } else {
                        run_omg(bids, &instance.universe, &instance.config)
                    }
                    .unwrap();
                    let problems = check_run_safety(&instance, bids, &run);
                    prop_assert!(problems.is_empty(), "{:?}: {:?}\n{}", mechanism, problems, instance.dump());
                }
            }
        }
    }

    #[test]
    fn proportional_share_is_budget_feasible_and_individually_rational(seed in any::<u64>()) {
        let instance = small_instance(seed, false);
        let bids = instance.truthful_bids();
        let outcome = proportional_share_offline(&bids, &instance.universe, &instance.config.budget).unwrap();
        prop_assert!(outcome.total_payment <= instance.config.budget);
        for bid in &bids {
            if outcome.is_winner(bid.id) {
                prop_assert!(outcome.payment(bid.id) >= bid.bid);
            } else {
                prop_assert_eq!(outcome.payment(bid.id), int(0));
            }
        }
    }

    /// A winner paid `p` loses above `p` and, anywhere below, still wins at
    /// the same payment.
    #[test]
    fn proportional_share_pays_the_critical_bid(seed in any::<u64>()) {
        let instance = small_instance(seed, false);
        let bids = instance.truthful_bids();
        let budget = &instance.config.budget;
        let outcome = proportional_share_offline(&bids, &instance.universe, budget).unwrap();
        for (k, bid) in bids.iter().enumerate() {
            if !outcome.is_winner(bid.id) {
                continue;
            }
            let p = outcome.payment(bid.id);
            let above = proportional_share_offline(&with_bid(&bids, k, &p + cent()), &instance.universe, budget).unwrap();
            prop_assert!(!above.is_winner(bid.id), "user {} still wins above {}", bid.id, p);
            for lower in [&p - cent(), &bid.bid / int(2), (&bid.bid + &p) / int(2)] {
                if lower <= int(0) {
                    continue;
                }
                let below = proportional_share_offline(&with_bid(&bids, k, lower.clone()), &instance.universe, budget).unwrap();
                prop_assert!(below.is_winner(bid.id), "user {} loses at {}", bid.id, lower);
                prop_assert_eq!(below.payment(bid.id), p.clone());
            }
        }
    }

    #[test]
    fn omz_bid_deviations_never_help(seed in any::<u64>()) {
        let instance = small_instance(seed, true);
        let truthful = instance.truthful_bids();
        let run = instance.run(Mechanism::Omz, &truthful).unwrap();
        let mut grid: Vec<Rational> = (1..=80).map(|k| ratio(k, 4)).collect();
        for price in &run.prices {
            grid.extend([price - cent(), price.clone(), price + cent()]);
        }
        grid.retain(|b| *b > int(0));
        for (k, profile) in instance.profiles.iter().enumerate() {
            let honest = run.outcome.utility(profile.id, &profile.cost);
            for bid in &grid {
                let lied = instance.run(Mechanism::Omz, &with_bid(&truthful, k, bid.clone())).unwrap();
                let gained = lied.outcome.utility(profile.id, &profile.cost);
                prop_assert!(gained <= honest, "user {} bid {} gains {} over {}\n{}", profile.id, bid, gained, honest, instance.dump());
            }
        }
    }

    #[test]
    fn runs_are_deterministic(seed in any::<u64>()) {
        let instance = small_instance(seed, false);
        let bids = instance.truthful_bids();
        let a = run_omg(&bids, &instance.universe, &instance.config).unwrap();
        let b = run_omg(&bids, &instance.universe, &instance.config).unwrap();
        prop_assert_eq!(a.outcome, b.outcome);
        prop_assert_eq!(a.trace, b.trace);
        prop_assert_eq!(small_instance(seed, false), instance);
    }
}
