use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use num_traits::Zero;

use super::{validate_stream, Learner, Offer, OnlineConfig, OnlineRun, PaymentUpdate, StepRecord};
use crate::error::Result;
use crate::model::{AuctionOutcome, Coverage, DeclaredBid, TaskUniverse, UserId};
use crate::rational::{int, Rational};

/// Lazy max-marginal ordering over a set of online users.
///
/// Keys are `V_j(S)` for non-winners and `V_j(S - j)` for winners; both only
/// shrink as `S` grows, so a stale key is an upper bound.
struct ValueQueue<'a> {
    heap: BinaryHeap<(u64, Reverse<UserId>, u64)>,
    users: HashMap<UserId, &'a DeclaredBid>,
    evaluations: u64,
}

impl<'a> ValueQueue<'a> {
    fn new(users: impl Iterator<Item = &'a DeclaredBid>, key: impl Fn(&DeclaredBid) -> u64, version: u64) -> Self {
        let mut queue = Self { heap: BinaryHeap::new(), users: HashMap::new(), evaluations: 0 };
        for user in users {
            queue.evaluations += 1;
            queue.heap.push((key(user), Reverse(user.id), version));
            queue.users.insert(user.id, user);
        }
        queue
    }

    fn pop(&mut self, key: impl Fn(&DeclaredBid) -> u64, version: u64) -> Option<(&'a DeclaredBid, u64)> {
        loop {
            let (stale, id, seen) = self.heap.pop()?;
            let user = self.users[&id.0];
            if seen == version {
                return Some((user, stale));
            }
            self.evaluations += 1;
            let fresh = (key(user), id, version);
            match self.heap.peek() {
                Some(next) if *next > fresh => self.heap.push(fresh),
                _ => return Some((user, fresh.0)),
            }
        }
    }
}

/// Online mechanism for the general case.
///
/// Each step: arrivals join the online set `O`; every online non-winner is
/// decided in nonincreasing `V_j(S)` order with the posted-price rule; users
/// departing now leave `O` and join the sample set. At the end of a stage
/// (except the last) the threshold is re-learned, the stage budget doubles,
/// and all of `O` is re-decided in nonincreasing `V_j(S - j)` order, raising
/// a payment to `V_i(S - i) / rho*` only when the new price is strictly
/// higher and still fits the budget.
pub fn run_omg(stream: &[DeclaredBid], universe: &TaskUniverse, config: &OnlineConfig) -> Result<OnlineRun> {
    validate_stream(stream, universe, config)?;
    let mut arrivals: BTreeMap<u32, Vec<&DeclaredBid>> = BTreeMap::new();
    for bid in stream {
        arrivals.entry(bid.arrival).or_default().push(bid);
    }

    let mut learner = Learner::new(config)?;
    let mut coverage = Coverage::new(universe);
    let mut online: BTreeMap<UserId, &DeclaredBid> = BTreeMap::new();
    let mut winners = Vec::new();
    let mut payments: BTreeMap<UserId, Rational> = BTreeMap::new();
    let mut committed = Rational::zero();
    let mut offers = Vec::new();
    let mut trace = Vec::with_capacity(config.deadline as usize);

    for t in 1..=config.deadline {
        let mut updates = Vec::new();
        for &user in arrivals.get(&t).into_iter().flatten() {
            online.insert(user.id, user);
        }
        let online_count = online.len();

        let mut queue = ValueQueue::new(
            online.values().copied().filter(|u| !payments.contains_key(&u.id)),
            |u| coverage.marginal(&u.tasks),
            coverage.version(),
        );
        while let Some((user, marginal)) = queue.pop(|u| coverage.marginal(&u.tasks), coverage.version()) {
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
        }
        let mut decision_evaluations = queue.evaluations;

        online.retain(|_, user| {
            if user.departure == t {
                learner.sample.push(*user);
                false
            } else {
                true
            }
        });

        let threshold_evaluations = learner.end_step(t, universe, &config.delta);
        if threshold_evaluations.is_some() {
            let key = |u: &DeclaredBid| {
                if payments.contains_key(&u.id) {
                    coverage.marginal_without(&u.tasks)
                } else {
                    coverage.marginal(&u.tasks)
                }
            };
            let mut queue = ValueQueue::new(online.values().copied(), key, coverage.version());
            loop {
                let key = |u: &DeclaredBid| {
                    if payments.contains_key(&u.id) {
                        coverage.marginal_without(&u.tasks)
                    } else {
                        coverage.marginal(&u.tasks)
                    }
                };
                let Some((user, marginal)) = queue.pop(key, coverage.version()) else { break };
                let held = payments.get(&user.id).cloned().unwrap_or_else(Rational::zero);
                let price = int(marginal as i64) / &learner.threshold;
                let available = learner.stage_budget() - &committed + &held;
                let accepted = user.bid <= price && price <= available && price > held;
                offers.push(Offer { t, user: user.id, marginal, price: price.clone(), available, accepted });
                if accepted {
                    committed += &price - &held;
                    if !payments.contains_key(&user.id) {
                        coverage.insert(&user.tasks);
                        winners.push(user.id);
                    }
                    payments.insert(user.id, price.clone());
                    updates.push(PaymentUpdate { user: user.id, payment: price });
                }
            }
            decision_evaluations += queue.evaluations;
        }

        trace.push(StepRecord {
            t,
            stage: learner.stage,
            threshold: learner.threshold.clone(),
            stage_budget: learner.stage_budget().clone(),
            committed: committed.clone(),
            sample_size: learner.sample.len(),
            online: online_count,
            decision_evaluations,
            threshold_evaluations: threshold_evaluations.unwrap_or(0),
            threshold_updated: threshold_evaluations.is_some(),
            updates,
        });
    }

    Ok(OnlineRun {
        outcome: AuctionOutcome::from_payments(winners, payments, coverage.value()),
        trace,
        offers,
        stage_timings: learner.timings,
    })
}
