//! Lazy max-density ordering over a candidate pool.
//!
//! Marginal values only shrink as the selected set grows, so a stale density is
//! an upper bound on the fresh one. A popped entry whose refreshed key still
//! beats the heap top is the true argmax of `V_j(S) / b_j`, ties going to the
//! lower user id.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_traits::Zero;

use crate::model::{Coverage, DeclaredBid, UserId};
use crate::rational::{int, Rational};

struct Entry {
    density: Rational,
    id: UserId,
    index: usize,
    marginal: u64,
    version: u64,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.density.cmp(&other.density).then_with(|| other.id.cmp(&self.id))
    }
}

pub(crate) struct DensityQueue<'a> {
    pool: &'a [&'a DeclaredBid],
    heap: BinaryHeap<Entry>,
    pub(crate) evaluations: u64,
}

fn density(marginal: u64, price: &Rational) -> Rational {
    if marginal == 0 {
        Rational::zero()
    } else {
        int(marginal as i64) / price
    }
}

impl<'a> DensityQueue<'a> {
    pub(crate) fn new(pool: &'a [&'a DeclaredBid], coverage: &Coverage<'_>) -> Self {
        let mut evaluations = 0;
        let heap = pool
            .iter()
            .enumerate()
            .map(|(index, bid)| {
                evaluations += 1;
                let marginal = coverage.marginal(&bid.tasks);
                Entry { density: density(marginal, &bid.bid), id: bid.id, index, marginal, version: coverage.version() }
            })
            .collect();
        Self { pool, heap, evaluations }
    }

    /// Removes and returns the remaining candidate with the highest density
    /// against `coverage`, with its fresh marginal value.
    pub(crate) fn pop_best(&mut self, coverage: &Coverage<'_>) -> Option<(&'a DeclaredBid, u64)> {
        loop {
            let top = self.heap.pop()?;
            if top.version == coverage.version() {
                return Some((self.pool[top.index], top.marginal));
            }
            let bid = self.pool[top.index];
            self.evaluations += 1;
            let marginal = coverage.marginal(&bid.tasks);
            let fresh = Entry {
                density: density(marginal, &bid.bid),
                id: top.id,
                index: top.index,
                marginal,
                version: coverage.version(),
            };
            match self.heap.peek() {
                Some(next) if *next > fresh => self.heap.push(fresh),
                _ => return Some((bid, marginal)),
            }
        }
    }
}

/// Result of the proportional-share greedy: the selected prefix of the
/// max-density ordering and its value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GreedySelection {
    pub selected: Vec<UserId>,
    pub value: u64,
    pub evaluations: u64,
}

/// Walks the max-density ordering of `pool`, keeping each user while
/// `b_i <= V_i(S) * budget / V(S + i)`, and stops at the first user failing
/// the rule. A zero-marginal head ends the walk since nothing after it adds
/// value.
pub fn proportional_share_greedy(
    pool: &[&DeclaredBid],
    universe: &crate::model::TaskUniverse,
    budget: &Rational,
) -> GreedySelection {
    let mut coverage = Coverage::new(universe);
    let mut queue = DensityQueue::new(pool, &coverage);
    let mut selected = Vec::new();
    while let Some((bid, marginal)) = queue.pop_best(&coverage) {
        if marginal == 0 {
            break;
        }
        let share = int(marginal as i64) * budget / int((coverage.value() + marginal) as i64);
        if bid.bid > share {
            break;
        }
        coverage.insert(&bid.tasks);
        selected.push(bid.id);
    }
    GreedySelection { selected, value: coverage.value(), evaluations: queue.evaluations }
}
