//! Users, tasks and the coverage value function.
//!
//! The crowdsourcer's value for a selected set `S` is
//! `V(S) = sum_j min(r_j, |{i in S : task j in tasks(i)}|)`, a monotone
//! submodular function. [`Coverage`] evaluates it incrementally; the
//! [`CoverageInstance`] and [`check_submodular_and_monotone`] entry points are
//! the exhaustive, table-driven versions used as test oracles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rational::{self, Rational};

/// Default user-count cap for exhaustive set-function checks.
pub const SUBMODULARITY_CHECK_LIMIT: usize = 8;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The task set with a coverage requirement `r_j >= 1` per task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskUniverse {
    requirements: Vec<u32>,
}

impl TaskUniverse {
    pub fn new(requirements: Vec<u32>) -> Result<Self> {
        if requirements.is_empty() {
            return Err(invalid("task universe must contain at least one task"));
        }
        if let Some(j) = requirements.iter().position(|&r| r == 0) {
            return Err(invalid(format!("task {j} has zero coverage requirement")));
        }
        Ok(Self { requirements })
    }

    /// `m` tasks, each requiring `requirement` coverings.
    pub fn uniform(task_count: usize, requirement: u32) -> Result<Self> {
        Self::new(vec![requirement; task_count])
    }

    pub fn task_count(&self) -> usize {
        self.requirements.len()
    }

    pub fn requirement(&self, task: usize) -> u32 {
        self.requirements[task]
    }

    pub fn requirements(&self) -> &[u32] {
        &self.requirements
    }

    pub(crate) fn check_tasks(&self, owner: UserId, tasks: &[usize]) -> Result<()> {
        match tasks.iter().find(|&&j| j >= self.task_count()) {
            Some(j) => Err(invalid(format!(
                "user {owner} covers task {j}, universe has {} tasks",
                self.task_count()
            ))),
            None => Ok(()),
        }
    }
}

fn normalize_tasks(mut tasks: Vec<usize>) -> Vec<usize> {
    tasks.sort_unstable();
    tasks.dedup();
    tasks
}

/// A user's true type: arrival, departure, coverable tasks and private cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserProfile {
    pub id: UserId,
    pub arrival: u32,
    pub departure: u32,
    pub tasks: Vec<usize>,
    pub cost: Rational,
}

impl UserProfile {
    pub fn new(id: UserId, arrival: u32, departure: u32, tasks: Vec<usize>, cost: Rational) -> Result<Self> {
        if arrival == 0 || arrival > departure {
            return Err(invalid(format!(
                "user {id}: need 1 <= arrival <= departure, got {arrival}..{departure}"
            )));
        }
        if !rational::is_positive(&cost) {
            return Err(invalid(format!("user {id}: cost must be positive")));
        }
        Ok(Self { id, arrival, departure, tasks: normalize_tasks(tasks), cost })
    }

    /// The declaration of a user who reports its type truthfully.
    pub fn truthful(&self) -> DeclaredBid {
        DeclaredBid {
            id: self.id,
            arrival: self.arrival,
            departure: self.departure,
            tasks: self.tasks.clone(),
            bid: self.cost.clone(),
        }
    }
}

/// A possibly untruthful declaration. Tasks cannot be misreported.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeclaredBid {
    pub id: UserId,
    pub arrival: u32,
    pub departure: u32,
    pub tasks: Vec<usize>,
    pub bid: Rational,
}

impl DeclaredBid {
    pub fn new(id: UserId, arrival: u32, departure: u32, tasks: Vec<usize>, bid: Rational) -> Result<Self> {
        if arrival == 0 || arrival > departure {
            return Err(invalid(format!(
                "bid {id}: need 1 <= arrival <= departure, got {arrival}..{departure}"
            )));
        }
        if !rational::is_positive(&bid) {
            return Err(invalid(format!("bid {id}: bid must be positive")));
        }
        Ok(Self { id, arrival, departure, tasks: normalize_tasks(tasks), bid })
    }

    /// A user may only delay its arrival or advance its departure:
    /// `a <= a_hat <= d_hat <= d`.
    pub fn is_admissible_for(&self, profile: &UserProfile) -> bool {
        self.id == profile.id
            && self.tasks == profile.tasks
            && profile.arrival <= self.arrival
            && self.arrival <= self.departure
            && self.departure <= profile.departure
            && rational::is_positive(&self.bid)
    }
}

/// Winners in selection order and their payments.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuctionOutcome {
    pub winners: Vec<UserId>,
    pub payments: BTreeMap<UserId, Rational>,
    pub total_value: u64,
    pub total_payment: Rational,
}

impl AuctionOutcome {
    pub(crate) fn from_payments(winners: Vec<UserId>, payments: BTreeMap<UserId, Rational>, total_value: u64) -> Self {
        let total_payment = payments.values().fold(Rational::zero(), |acc, p| acc + p);
        Self { winners, payments, total_value, total_payment }
    }

    pub fn is_winner(&self, id: UserId) -> bool {
        self.payments.contains_key(&id)
    }

    /// Zero for losers.
    pub fn payment(&self, id: UserId) -> Rational {
        self.payments.get(&id).cloned().unwrap_or_else(Rational::zero)
    }

    /// `p_i - c_i` for winners, zero otherwise.
    pub fn utility(&self, id: UserId, cost: &Rational) -> Rational {
        match self.payments.get(&id) {
            Some(p) => p - cost,
            None => Rational::zero(),
        }
    }

    /// Winner ids in ascending order.
    pub fn sorted_winners(&self) -> Vec<UserId> {
        self.payments.keys().copied().collect()
    }
}

/// Incremental coverage counts for a growing selected set.
#[derive(Clone, Debug)]
pub struct Coverage<'u> {
    universe: &'u TaskUniverse,
    counts: Vec<u32>,
    value: u64,
    version: u64,
}

impl<'u> Coverage<'u> {
    pub fn new(universe: &'u TaskUniverse) -> Self {
        Self { universe, counts: vec![0; universe.task_count()], value: 0, version: 0 }
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    /// Bumped on every insertion; lets lazy greedy detect stale marginals.
    pub(crate) fn version(&self) -> u64 {
        self.version
    }

    /// `V(S + i) - V(S)` for a user not yet in the set.
    pub fn marginal(&self, tasks: &[usize]) -> u64 {
        tasks.iter().filter(|&&j| self.counts[j] < self.universe.requirement(j)).count() as u64
    }

    /// `V(S) - V(S - i)` for a user already counted in the set.
    pub fn marginal_without(&self, tasks: &[usize]) -> u64 {
        tasks.iter().filter(|&&j| self.counts[j] <= self.universe.requirement(j)).count() as u64
    }

    pub fn insert(&mut self, tasks: &[usize]) {
        self.value += self.marginal(tasks);
        for &j in tasks {
            self.counts[j] += 1;
        }
        self.version += 1;
    }
}

/// A user table bound to a universe, addressed by user id.
#[derive(Clone, Debug)]
pub struct CoverageInstance {
    universe: TaskUniverse,
    users: BTreeMap<UserId, Vec<usize>>,
}

impl CoverageInstance {
    pub fn new(universe: TaskUniverse, users: impl IntoIterator<Item = (UserId, Vec<usize>)>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (id, tasks) in users {
            universe.check_tasks(id, &tasks)?;
            if table.insert(id, normalize_tasks(tasks)).is_some() {
                return Err(invalid(format!("duplicate user id {id}")));
            }
        }
        Ok(Self { universe, users: table })
    }

    pub fn from_bids(universe: TaskUniverse, bids: &[DeclaredBid]) -> Result<Self> {
        Self::new(universe, bids.iter().map(|b| (b.id, b.tasks.clone())))
    }

    pub fn universe(&self) -> &TaskUniverse {
        &self.universe
    }

    pub fn user_ids(&self) -> Vec<UserId> {
        self.users.keys().copied().collect()
    }

    fn tasks(&self, id: UserId) -> Result<&[usize]> {
        self.users
            .get(&id)
            .map(Vec::as_slice)
            .ok_or_else(|| invalid(format!("unknown user id {id}")))
    }

    /// `V(S)`. Duplicate ids in `set` are counted once.
    pub fn coverage_value(&self, set: &[UserId]) -> Result<u64> {
        let distinct: BTreeSet<UserId> = set.iter().copied().collect();
        let mut coverage = Coverage::new(&self.universe);
        for id in distinct {
            coverage.insert(self.tasks(id)?);
        }
        Ok(coverage.value())
    }

    /// `V(S + i) - V(S)`; `i` must not already be in `S`.
    pub fn marginal_value(&self, user: UserId, set: &[UserId]) -> Result<u64> {
        if set.contains(&user) {
            return Err(invalid(format!("user {user} is already in the set")));
        }
        self.tasks(user)?;
        let mut with = set.to_vec();
        with.push(user);
        Ok(self.coverage_value(&with)? - self.coverage_value(set)?)
    }
}

/// A witness that a set function breaks monotonicity or submodularity.
/// Sets are given as indices into the ground set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SetFunctionViolation {
    /// `f(smaller) > f(larger)` with `smaller` a subset of `larger`.
    NotMonotone { smaller: Vec<usize>, larger: Vec<usize> },
    /// `f(X + x) - f(X) < f(Y + x) - f(Y)` with `X` a subset of `Y`, `x` not in `Y`.
    NotSubmodular { smaller: Vec<usize>, larger: Vec<usize>, element: usize },
}

fn members(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&k| mask & (1 << k) != 0).collect()
}

/// Exhaustively checks a set function over a ground set of `ground_size`
/// elements, given as a lookup from subset bitmask to value.
///
/// Returns the first violation found, or `None` when the function is monotone
/// submodular.
pub fn check_set_function(
    ground_size: usize,
    limit: usize,
    value: impl Fn(u32) -> i64,
) -> Result<Option<SetFunctionViolation>> {
    if ground_size > limit {
        return Err(Error::SizeLimit { actual: ground_size, limit });
    }
    let full = 1u32 << ground_size;
    let table: Vec<i64> = (0..full).map(&value).collect();

    for x_set in 0..full {
        for x in 0..ground_size {
            let bit = 1 << x;
            if x_set & bit == 0 && table[x_set as usize] > table[(x_set | bit) as usize] {
                return Ok(Some(SetFunctionViolation::NotMonotone {
                    smaller: members(x_set, ground_size),
                    larger: members(x_set | bit, ground_size),
                }));
            }
        }
    }

    for y_set in 0..full {
        // Enumerate every subset X of Y.
        let mut x_set = y_set;
        loop {
            for x in 0..ground_size {
                let bit = 1 << x;
                if y_set & bit != 0 {
                    continue;
                }
                let gain_small = table[(x_set | bit) as usize] - table[x_set as usize];
                let gain_large = table[(y_set | bit) as usize] - table[y_set as usize];
                if gain_small < gain_large {
                    return Ok(Some(SetFunctionViolation::NotSubmodular {
                        smaller: members(x_set, ground_size),
                        larger: members(y_set, ground_size),
                        element: x,
                    }));
                }
            }
            if x_set == 0 {
                break;
            }
            x_set = (x_set - 1) & y_set;
        }
    }
    Ok(None)
}

/// Exhaustive Definition-1 check of a coverage instance's value function.
/// Ground-set indices follow ascending user id.
pub fn check_submodular_and_monotone(instance: &CoverageInstance, limit: usize) -> Result<Option<SetFunctionViolation>> {
    let ids = instance.user_ids();
    if ids.len() > limit {
        return Err(Error::SizeLimit { actual: ids.len(), limit });
    }
    check_set_function(ids.len(), limit, |mask| {
        let set: Vec<UserId> = members(mask, ids.len()).into_iter().map(|k| ids[k]).collect();
        instance.coverage_value(&set).expect("ids come from the instance") as i64
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn two_task_instance() -> CoverageInstance {
        let universe = TaskUniverse::new(vec![1, 2]).unwrap();
        CoverageInstance::new(universe, [(UserId(1), vec![0, 1]), (UserId(2), vec![1])]).unwrap()
    }

    #[test]
    fn universe_rejects_zero_requirement_and_empty() {
        assert!(TaskUniverse::new(vec![]).is_err());
        assert!(TaskUniverse::new(vec![1, 0]).is_err());
    }

    #[test]
    fn value_of_empty_set_is_zero() {
        assert_eq!(two_task_instance().coverage_value(&[]).unwrap(), 0);
    }

    #[test]
    fn value_saturates_at_requirement() {
        // min(1, 1) + min(2, 2)
        let inst = two_task_instance();
        assert_eq!(inst.coverage_value(&[UserId(1), UserId(2)]).unwrap(), 3);
        assert_eq!(inst.coverage_value(&[UserId(2)]).unwrap(), 1);
    }

    #[test]
    fn unknown_user_is_invalid_input() {
        let err = two_task_instance().coverage_value(&[UserId(9)]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn marginal_of_saturated_task_is_zero() {
        let universe = TaskUniverse::new(vec![1, 1]).unwrap();
        let inst = CoverageInstance::new(universe, [(UserId(1), vec![0]), (UserId(2), vec![0])]).unwrap();
        assert_eq!(inst.marginal_value(UserId(2), &[UserId(1)]).unwrap(), 0);
        assert_eq!(inst.marginal_value(UserId(2), &[]).unwrap(), 1);
    }

    #[test]
    fn marginal_rejects_member() {
        let inst = two_task_instance();
        assert!(inst.marginal_value(UserId(1), &[UserId(1)]).is_err());
    }

    #[test]
    fn incremental_coverage_matches_table() {
        let universe = TaskUniverse::new(vec![1, 2]).unwrap();
        let mut cov = Coverage::new(&universe);
        assert_eq!(cov.marginal(&[0, 1]), 2);
        cov.insert(&[0, 1]);
        assert_eq!(cov.marginal(&[1]), 1);
        assert_eq!(cov.marginal_without(&[0, 1]), 2);
        cov.insert(&[1]);
        assert_eq!(cov.value(), 3);
        assert_eq!(cov.marginal(&[1]), 0);
        // Removing either holder of task 1 loses one unit.
        assert_eq!(cov.marginal_without(&[1]), 1);
    }

    #[test]
    fn declared_bid_admissibility() {
        let p = UserProfile::new(UserId(3), 2, 6, vec![1], int(5)).unwrap();
        let mut b = p.truthful();
        assert!(b.is_admissible_for(&p));
        b.arrival = 1;
        assert!(!b.is_admissible_for(&p));
        b.arrival = 4;
        b.departure = 5;
        assert!(b.is_admissible_for(&p));
        b.departure = 7;
        assert!(!b.is_admissible_for(&p));
    }

    #[test]
    fn profile_validation() {
        assert!(UserProfile::new(UserId(1), 3, 2, vec![], int(1)).is_err());
        assert!(UserProfile::new(UserId(1), 0, 2, vec![], int(1)).is_err());
        assert!(UserProfile::new(UserId(1), 1, 2, vec![], int(0)).is_err());
    }

    #[test]
    fn coverage_instance_passes_exhaustive_check() {
        assert_eq!(check_submodular_and_monotone(&two_task_instance(), 8).unwrap(), None);
    }

    #[test]
    fn corrupted_table_is_caught() {
        // f = |S|^2 is supermodular.
        let v = check_set_function(3, 8, |mask| (mask.count_ones() as i64).pow(2)).unwrap();
        assert!(matches!(v, Some(SetFunctionViolation::NotSubmodular { .. })));
        let v = check_set_function(2, 8, |mask| -(mask.count_ones() as i64)).unwrap();
        assert!(matches!(v, Some(SetFunctionViolation::NotMonotone { .. })));
    }

    #[test]
    fn size_limit_enforced() {
        let universe = TaskUniverse::uniform(1, 1).unwrap();
        let inst = CoverageInstance::new(universe, (1..=9).map(|k| (UserId(k), vec![0]))).unwrap();
        assert!(matches!(
            check_submodular_and_monotone(&inst, SUBMODULARITY_CHECK_LIMIT),
            Err(Error::SizeLimit { actual: 9, limit: 8 })
        ));
    }
}
