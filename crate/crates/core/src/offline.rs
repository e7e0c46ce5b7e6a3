//! Offline benchmarks: every declaration is known up front.
//!
//! * [`proportional_share_offline`]: the truthful budget-feasible
//!   proportional-share mechanism with critical payments.
//! * [`greedy_budgeted_max_coverage`]: cost-effectiveness greedy for budgeted
//!   maximum coverage, paying bids. A value benchmark, not a mechanism.
//! * [`brute_force_optimal`]: exhaustive optimum for tiny instances.
//! * [`random_threshold_mechanism`]: online posted density with a fixed,
//!   uninformed threshold.

use std::collections::{BTreeMap, HashSet};

use num_traits::Zero;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::greedy::{proportional_share_greedy, DensityQueue};
use crate::model::{AuctionOutcome, Coverage, DeclaredBid, TaskUniverse, UserId};
use crate::rational::{self, int, ratio, Rational};

/// Default user cap for [`brute_force_optimal`].
pub const BRUTE_FORCE_LIMIT: usize = 15;

/// Instances at or below this size get the three-element seed enumeration in
/// [`greedy_budgeted_max_coverage`].
pub const SEED_ENUMERATION_LIMIT: usize = 30;

fn check_inputs(users: &[DeclaredBid], universe: &TaskUniverse, budget: &Rational) -> Result<()> {
    if !rational::is_positive(budget) {
        return Err(invalid("budget must be positive"));
    }
    let mut seen = HashSet::new();
    for user in users {
        if !seen.insert(user.id) {
            return Err(invalid(format!("duplicate user id {}", user.id)));
        }
        if !rational::is_positive(&user.bid) {
            return Err(invalid(format!("user {}: bid must be positive", user.id)));
        }
        universe.check_tasks(user.id, &user.tasks)?;
    }
    Ok(())
}

/// One position in the payment-determination ordering of a winner.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaymentSortRecord {
    /// 1-based position `j`.
    pub position: usize,
    /// Competitor at position `j`; `None` for the virtual slot past the end.
    pub competitor: Option<UserId>,
    /// Competitor's marginal value `V_{i_j}(Q_{j-1})`.
    pub competitor_marginal: u64,
    /// `V(Q_j)`, the prefix value once the competitor is taken.
    pub prefix_value: u64,
    /// Winner's own marginal value `V_{i(j)}(Q_{j-1})`.
    pub own_marginal: u64,
    /// Bid at which the winner ties the competitor's density; `None` when
    /// the competitor adds nothing and so never blocks.
    pub tie_bid: Option<Rational>,
    /// Proportional-share cap `V_{i(j)}(Q_{j-1}) * B / V(Q_{j-1} + i)`.
    pub share_cap: Rational,
}

impl PaymentSortRecord {
    /// `min(tie_bid, share_cap)`.
    pub fn price(&self) -> Rational {
        match &self.tie_bid {
            Some(tie) if *tie < self.share_cap => tie.clone(),
            _ => self.share_cap.clone(),
        }
    }
}

/// Critical-payment records for `winner`: positions `1..=k'+1` of the
/// max-density ordering of everyone else.
pub fn payment_records(
    winner: &DeclaredBid,
    users: &[DeclaredBid],
    universe: &TaskUniverse,
    budget: &Rational,
) -> Vec<PaymentSortRecord> {
    let others: Vec<&DeclaredBid> = users.iter().filter(|u| u.id != winner.id).collect();
    let mut coverage = Coverage::new(universe);
    let mut queue = DensityQueue::new(&others, &coverage);
    let mut records = Vec::new();
    loop {
        let position = records.len() + 1;
        let own = coverage.marginal(&winner.tasks);
        let share_cap = if own == 0 {
            Rational::zero()
        } else {
            int(own as i64) * budget / int((coverage.value() + own) as i64)
        };
        let Some((competitor, marginal)) = queue.pop_best(&coverage) else {
            records.push(PaymentSortRecord {
                position,
                competitor: None,
                competitor_marginal: 0,
                prefix_value: coverage.value(),
                own_marginal: own,
                tie_bid: None,
                share_cap,
            });
            break;
        };
        let tie_bid = (marginal > 0).then(|| int(own as i64) * &competitor.bid / int(marginal as i64));
        let prefix_value = coverage.value() + marginal;
        let passes = marginal > 0
            && competitor.bid <= int(marginal as i64) * budget / int(prefix_value as i64);
        records.push(PaymentSortRecord {
            position,
            competitor: Some(competitor.id),
            competitor_marginal: marginal,
            prefix_value,
            own_marginal: own,
            tie_bid,
            share_cap,
        });
        if !passes {
            break;
        }
        coverage.insert(&competitor.tasks);
    }
    records
}

/// Proportional-share mechanism with critical payments.
///
/// Winners are the greedy prefix of the max-density ordering kept while
/// `b_k <= V_k(S_{k-1}) * B / V(S_k)`. Each winner is paid
/// `max_{j <= k'+1} min(b_{i(j)}, eta_{i(j)})` over the ordering of the other
/// users, where `k'` is the last position of that ordering still passing the
/// stop rule.
pub fn proportional_share_offline(users: &[DeclaredBid], universe: &TaskUniverse, budget: &Rational) -> Result<AuctionOutcome> {
    check_inputs(users, universe, budget)?;
    let pool: Vec<&DeclaredBid> = users.iter().collect();
    let selection = proportional_share_greedy(&pool, universe, budget);
    let by_id: BTreeMap<UserId, &DeclaredBid> = users.iter().map(|u| (u.id, u)).collect();
    let mut payments = BTreeMap::new();
    for id in &selection.selected {
        let records = payment_records(by_id[id], users, universe, budget);
        let price = records.iter().map(PaymentSortRecord::price).max().unwrap_or_else(Rational::zero);
        payments.insert(*id, price);
    }
    Ok(AuctionOutcome::from_payments(selection.selected, payments, selection.value))
}

struct Candidate {
    set: Vec<usize>,
    value: u64,
    cost: Rational,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        self.value > other.value || self.value == other.value && self.cost < other.cost
    }
}

fn greedy_extend(users: &[DeclaredBid], universe: &TaskUniverse, budget: &Rational, seed: &[usize]) -> Candidate {
    let mut coverage = Coverage::new(universe);
    let mut spent = Rational::zero();
    for &k in seed {
        coverage.insert(&users[k].tasks);
        spent += &users[k].bid;
    }
    let mut set = seed.to_vec();
    let taken: HashSet<usize> = seed.iter().copied().collect();
    let index_of: BTreeMap<UserId, usize> = users.iter().enumerate().map(|(k, u)| (u.id, k)).collect();
    let pool: Vec<&DeclaredBid> = users.iter().enumerate().filter(|(k, _)| !taken.contains(k)).map(|(_, u)| u).collect();
    let mut queue = DensityQueue::new(&pool, &coverage);
    // Remaining budget only shrinks, so an unaffordable user stays unaffordable.
    while let Some((user, marginal)) = queue.pop_best(&coverage) {
        if marginal == 0 {
            break;
        }
        if &spent + &user.bid > *budget {
            continue;
        }
        spent += &user.bid;
        coverage.insert(&user.tasks);
        set.push(index_of[&user.id]);
    }
    Candidate { set, value: coverage.value(), cost: spent }
}

fn subset_value(users: &[DeclaredBid], universe: &TaskUniverse, set: &[usize]) -> (u64, Rational) {
    let mut coverage = Coverage::new(universe);
    let mut cost = Rational::zero();
    for &k in set {
        coverage.insert(&users[k].tasks);
        cost += &users[k].bid;
    }
    (coverage.value(), cost)
}

fn paid_at_bid(users: &[DeclaredBid], candidate: Candidate) -> AuctionOutcome {
    let winners: Vec<UserId> = candidate.set.iter().map(|&k| users[k].id).collect();
    let payments = candidate.set.iter().map(|&k| (users[k].id, users[k].bid.clone())).collect();
    AuctionOutcome::from_payments(winners, payments, candidate.value)
}

/// Budgeted maximum coverage by partial enumeration plus greedy completion.
///
/// Every affordable set of fewer than `seed_size` users is a candidate, and
/// every affordable set of exactly `seed_size` users is completed greedily by
/// marginal value per cost among affordable users. `seed_size = 3` gives the
/// `(1 - 1/e)` guarantee; `seed_size = 1` runs the greedy from every single
/// user, which includes the plain greedy and the best single user.
pub fn greedy_with_seed_enumeration(
    users: &[DeclaredBid],
    universe: &TaskUniverse,
    budget: &Rational,
    seed_size: usize,
) -> Result<AuctionOutcome> {
    check_inputs(users, universe, budget)?;
    let n = users.len();
    let mut best = Candidate { set: Vec::new(), value: 0, cost: Rational::zero() };
    let mut seed: Vec<usize> = Vec::new();
    enumerate_seeds(n, seed_size, &mut seed, 0, &mut |seed| {
        let (value, cost) = subset_value(users, universe, seed);
        if cost > *budget {
            return false;
        }
        let candidate = if seed.len() == seed_size {
            greedy_extend(users, universe, budget, seed)
        } else {
            Candidate { set: seed.to_vec(), value, cost }
        };
        if candidate.beats(&best) {
            best = candidate;
        }
        true
    });
    if seed_size == 0 {
        best = greedy_extend(users, universe, budget, &[]);
    }
    Ok(paid_at_bid(users, best))
}

/// Visits seeds of size `1..=max` in lexicographic order; the visitor returns
/// `false` to prune supersets of an unaffordable seed.
fn enumerate_seeds(n: usize, max: usize, seed: &mut Vec<usize>, start: usize, visit: &mut dyn FnMut(&[usize]) -> bool) {
    if seed.len() == max {
        return;
    }
    for k in start..n {
        seed.push(k);
        if visit(seed) {
            enumerate_seeds(n, max, seed, k + 1, visit);
        }
        seed.pop();
    }
}

/// The greedy value benchmark. Small instances (at most
/// [`SEED_ENUMERATION_LIMIT`] users) use three-element seed enumeration; larger
/// ones take the better of the plain greedy and the best affordable single user.
pub fn greedy_budgeted_max_coverage(users: &[DeclaredBid], universe: &TaskUniverse, budget: &Rational) -> Result<AuctionOutcome> {
    if users.len() <= SEED_ENUMERATION_LIMIT {
        return greedy_with_seed_enumeration(users, universe, budget, 3);
    }
    check_inputs(users, universe, budget)?;
    let plain = greedy_extend(users, universe, budget, &[]);
    let single = users
        .iter()
        .enumerate()
        .filter(|(_, u)| u.bid <= *budget)
        .map(|(k, u)| {
            let coverage = Coverage::new(universe);
            Candidate { set: vec![k], value: coverage.marginal(&u.tasks), cost: u.bid.clone() }
        })
        .fold(None::<Candidate>, |best, c| match best {
            Some(b) if !c.beats(&b) => Some(b),
            _ => Some(c),
        });
    let best = match single {
        Some(s) if s.beats(&plain) => s,
        _ => plain,
    };
    Ok(paid_at_bid(users, best))
}

/// Exhaustive maximum of `V(S)` subject to total cost (bids) within budget.
/// Ties go to the cheaper set, then to the first subset in bitmask order.
pub fn brute_force_optimal(users: &[DeclaredBid], universe: &TaskUniverse, budget: &Rational, limit: usize) -> Result<AuctionOutcome> {
    if users.len() > limit {
        return Err(Error::SizeLimit { actual: users.len(), limit });
    }
    check_inputs(users, universe, budget)?;
    let n = users.len();
    let mut best = Candidate { set: Vec::new(), value: 0, cost: Rational::zero() };
    for mask in 1u32..(1u32 << n) {
        let set: Vec<usize> = (0..n).filter(|&k| mask & (1 << k) != 0).collect();
        let (value, cost) = subset_value(users, universe, &set);
        if cost > *budget {
            continue;
        }
        let candidate = Candidate { set, value, cost };
        if candidate.beats(&best) {
            best = candidate;
        }
    }
    Ok(paid_at_bid(users, best))
}

/// Posted-density baseline: in arrival order (ties by id), user `i` wins iff
/// `b_i <= V_i(S) / rho <= remaining budget`, and is paid `V_i(S) / rho`.
pub fn random_threshold_mechanism(
    stream: &[DeclaredBid],
    universe: &TaskUniverse,
    budget: &Rational,
    threshold: &Rational,
) -> Result<AuctionOutcome> {
    check_inputs(stream, universe, budget)?;
    if !rational::is_positive(threshold) {
        return Err(invalid("fixed threshold density must be positive"));
    }
    let mut order: Vec<&DeclaredBid> = stream.iter().collect();
    order.sort_by_key(|u| (u.arrival, u.id));
    let mut coverage = Coverage::new(universe);
    let mut spent = Rational::zero();
    let mut winners = Vec::new();
    let mut payments = BTreeMap::new();
    for user in order {
        let marginal = coverage.marginal(&user.tasks);
        let price = int(marginal as i64) / threshold;
        if user.bid <= price && price <= budget - &spent {
            spent += &price;
            coverage.insert(&user.tasks);
            winners.push(user.id);
            payments.insert(user.id, price);
        }
    }
    Ok(AuctionOutcome::from_payments(winners, payments, coverage.value()))
}

/// Mean value and payment of the posted-density baseline over `draws`
/// thresholds drawn uniformly from `[lo, hi]` at 1/100 resolution.
pub fn random_baseline(
    stream: &[DeclaredBid],
    universe: &TaskUniverse,
    budget: &Rational,
    draws: usize,
    range: (u32, u32),
    rng: &mut impl Rng,
) -> Result<RandomBaseline> {
    let mut values = Vec::with_capacity(draws);
    let mut payments = Vec::with_capacity(draws);
    for _ in 0..draws {
        let cents = rng.random_range(range.0 * 100..=range.1 * 100);
        let outcome = random_threshold_mechanism(stream, universe, budget, &ratio(cents as i64, 100))?;
        values.push(outcome.total_value as f64);
        payments.push(rational::to_f64(&outcome.total_payment));
    }
    let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    Ok(RandomBaseline { mean_value: mean(&values), mean_payment: mean(&payments), draws })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomBaseline {
    pub mean_value: f64,
    pub mean_payment: f64,
    pub draws: usize,
}
