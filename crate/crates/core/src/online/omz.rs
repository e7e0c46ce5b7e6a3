use std::collections::BTreeMap;

use num_traits::Zero;

use super::{sum, validate_stream, Learner, OnlineConfig, OnlineRun, Offer, PaymentUpdate, StepRecord};
use crate::error::{invalid, Result};
use crate::model::{AuctionOutcome, Coverage, DeclaredBid, TaskUniverse};
use crate::rational::{int, Rational};

/// Online mechanism for the zero arrival-departure interval case.
///
/// At its arrival step user `i` is accepted iff
/// `b_i <= V_i(S) / rho* <= B' - sum_{j in S} p_j` and is then paid
/// `V_i(S) / rho*`. Every arrival joins the sample set. Arrivals at a
/// stage-end step are decided before the threshold update.
///
/// Requires `arrival == departure` for every user and at most one arrival
/// per step.
pub fn run_omz(stream: &[DeclaredBid], universe: &TaskUniverse, config: &OnlineConfig) -> Result<OnlineRun> {
    validate_stream(stream, universe, config)?;
    let mut by_step: BTreeMap<u32, &DeclaredBid> = BTreeMap::new();
    for bid in stream {
        if bid.arrival != bid.departure {
            return Err(invalid(format!(
                "user {} has a nonzero interval {}..{}; use the general mechanism",
                bid.id, bid.arrival, bid.departure
            )));
        }
        if let Some(other) = by_step.insert(bid.arrival, bid) {
            return Err(invalid(format!("users {} and {} both arrive at step {}", other.id, bid.id, bid.arrival)));
        }
    }

    let mut learner = Learner::new(config)?;
    let mut coverage = Coverage::new(universe);
    let mut winners = Vec::new();
    let mut payments: BTreeMap<_, Rational> = BTreeMap::new();
    let mut committed = Rational::zero();
    let mut offers = Vec::new();
    let mut trace = Vec::with_capacity(config.deadline as usize);

    for t in 1..=config.deadline {
        let mut updates = Vec::new();
        let mut decision_evaluations = 0;
        let online = usize::from(by_step.contains_key(&t));
        if let Some(&user) = by_step.get(&t) {
            decision_evaluations += 1;
            let marginal = coverage.marginal(&user.tasks);
            let price = int(marginal as i64) / &learner.threshold;
            let available = learner.stage_budget() - &committed;
            let accepted = user.bid <= price && price <= available;
            offers.push(Offer { t, user: user.id, marginal, price: price.clone(), available, accepted });
            if accepted {
                committed += &price;
                coverage.insert(&user.tasks);
                winners.push(user.id);
                payments.insert(user.id, price.clone());
                updates.push(PaymentUpdate { user: user.id, payment: price });
            }
            learner.sample.push(user);
        }
        let threshold_evaluations = learner.end_step(t, universe, &config.delta);
        trace.push(StepRecord {
            t,
            stage: learner.stage,
            threshold: learner.threshold.clone(),
            stage_budget: learner.stage_budget().clone(),
            committed: committed.clone(),
            sample_size: learner.sample.len(),
            online,
            decision_evaluations,
            threshold_evaluations: threshold_evaluations.unwrap_or(0),
            threshold_updated: threshold_evaluations.is_some(),
            updates,
        });
    }

    debug_assert_eq!(committed, sum(payments.values()));
    Ok(OnlineRun {
        outcome: AuctionOutcome::from_payments(winners, payments, coverage.value()),
        trace,
        offers,
        stage_timings: learner.timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UserId;
    use crate::online::{DeltaPolicy, OnlineConfig};
    use crate::rational::{one, ratio};
    use crate::scenarios::example1;

    #[test]
    fn example_one_replay() {
        let ex = example1();
        let run = run_omz(&ex.bids(), &ex.universe, &ex.config).unwrap();
        assert_eq!(run.outcome.winners, vec![UserId(1), UserId(4), UserId(5)]);
        let paid: Vec<Rational> = [1, 2, 3, 4, 5].iter().map(|&k| run.outcome.payment(UserId(k))).collect();
        assert_eq!(paid, vec![int(2), int(0), int(0), int(4), int(4)]);
        let learned: Vec<Rational> =
            run.trace.iter().filter(|s| s.threshold_updated).map(|s| s.threshold.clone()).collect();
        assert_eq!(learned, vec![ratio(1, 2), ratio(1, 4), ratio(1, 4)]);
        assert_eq!(run.outcome.total_value, 3);
    }

    #[test]
    fn empty_stream() {
        let universe = TaskUniverse::uniform(1, 1).unwrap();
        let run = run_omz(&[], &universe, &OnlineConfig::new(int(10), 5)).unwrap();
        assert!(run.outcome.winners.is_empty());
        assert_eq!(run.outcome.total_payment, int(0));
        assert_eq!(run.trace.len(), 5);
    }

    #[test]
    fn rejects_interval_and_collisions() {
        let universe = TaskUniverse::uniform(2, 1).unwrap();
        let config = OnlineConfig::new(int(10), 8);
        let spread = vec![DeclaredBid::new(UserId(1), 1, 2, vec![0], one()).unwrap()];
        assert!(run_omz(&spread, &universe, &config).is_err());
        let clash = vec![
            DeclaredBid::new(UserId(1), 3, 3, vec![0], one()).unwrap(),
            DeclaredBid::new(UserId(2), 3, 3, vec![1], one()).unwrap(),
        ];
        assert!(run_omz(&clash, &universe, &config).is_err());
    }

    #[test]
    fn zero_marginal_user_never_wins() {
        let universe = TaskUniverse::uniform(1, 1).unwrap();
        let config = OnlineConfig::new(int(100), 4).with_delta(DeltaPolicy::fixed(one()));
        let stream = vec![
            DeclaredBid::new(UserId(1), 1, 1, vec![0], one()).unwrap(),
            DeclaredBid::new(UserId(2), 3, 3, vec![0], ratio(1, 1000)).unwrap(),
        ];
        let run = run_omz(&stream, &universe, &config).unwrap();
        assert!(run.outcome.is_winner(UserId(1)));
        assert!(!run.outcome.is_winner(UserId(2)));
    }
}
