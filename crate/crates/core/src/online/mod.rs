//! Online multi-stage sampling-accepting mechanisms.
//!
//! Time runs over steps `1..=T`, split into doubling stages ([`StagePlan`]).
//! During a stage a user is accepted when its marginal density reaches the
//! current threshold `rho*` and the stage budget still covers its price
//! `V_i(S) / rho*`. At the end of every stage but the last, `rho*` is
//! re-learned from the sample set with [`density_threshold`] and the stage
//! budget doubles.
//!
//! [`run_omz`] handles impatient users (arrival equals departure). [`run_omg`]
//! handles arbitrary intervals and is also time-truthful.

mod omg;
mod omz;
mod stage;
mod trace;

use std::collections::HashSet;
use std::time::Duration;

use num_traits::Zero;

use crate::error::{invalid, Result};
use crate::greedy::proportional_share_greedy;
use crate::model::{AuctionOutcome, DeclaredBid, TaskUniverse, UserId};
use crate::rational::{self, int, one, Rational};

pub use omg::run_omg;
pub use omz::run_omz;
pub use stage::{Stage, StagePlan};
pub use trace::{diff_traces, parse_trace_csv, render_trace_csv, TraceMismatch, TraceRow, TRACE_SCHEMA};

/// Step function for `delta`: `initial` until the sample set holds more than
/// `switch_size` users, `target` afterwards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaPolicy {
    pub initial: Rational,
    pub target: Rational,
    pub switch_size: usize,
}

impl DeltaPolicy {
    pub fn fixed(delta: Rational) -> Self {
        Self { initial: delta.clone(), target: delta, switch_size: usize::MAX }
    }

    pub fn delta_for(&self, sample_size: usize) -> &Rational {
        if sample_size > self.switch_size {
            &self.target
        } else {
            &self.initial
        }
    }

    fn validate(&self) -> Result<()> {
        if self.initial < one() || self.target < one() {
            return Err(invalid("delta must be at least 1"));
        }
        Ok(())
    }
}

impl Default for DeltaPolicy {
    fn default() -> Self {
        Self { initial: one(), target: int(4), switch_size: 240 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OnlineConfig {
    pub budget: Rational,
    pub deadline: u32,
    /// Threshold used before the first stage ends.
    pub epsilon: Rational,
    pub delta: DeltaPolicy,
}

impl OnlineConfig {
    pub fn new(budget: Rational, deadline: u32) -> Self {
        Self { budget, deadline, epsilon: one(), delta: DeltaPolicy::default() }
    }

    pub fn with_epsilon(mut self, epsilon: Rational) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_delta(mut self, delta: DeltaPolicy) -> Self {
        self.delta = delta;
        self
    }

    fn validate(&self) -> Result<()> {
        if !rational::is_positive(&self.budget) {
            return Err(invalid("budget must be positive"));
        }
        if self.deadline == 0 {
            return Err(invalid("deadline must be at least 1"));
        }
        if !rational::is_positive(&self.epsilon) {
            return Err(invalid("initial threshold must be positive"));
        }
        self.delta.validate()
    }
}

/// `rho* = V(J) / (delta * B')` where `J` is the proportional-share greedy set
/// of the sample under stage budget `B'`.
///
/// Returns `None` when `J` is empty; the mechanisms then keep their previous
/// threshold, since a zero threshold would make every price infinite.
pub fn density_threshold(
    stage_budget: &Rational,
    sample: &[&DeclaredBid],
    universe: &TaskUniverse,
    delta: &Rational,
) -> Option<Rational> {
    threshold_with_work(stage_budget, sample, universe, delta).0
}

fn threshold_with_work(
    stage_budget: &Rational,
    sample: &[&DeclaredBid],
    universe: &TaskUniverse,
    delta: &Rational,
) -> (Option<Rational>, u64) {
    let selection = proportional_share_greedy(sample, universe, stage_budget);
    let threshold = (selection.value > 0).then(|| int(selection.value as i64) / (stage_budget * delta));
    (threshold, selection.evaluations)
}

/// A user's payment after it was set or raised.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaymentUpdate {
    pub user: UserId,
    pub payment: Rational,
}

/// State after time step `t` completed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub t: u32,
    /// Stage in effect for the next step.
    pub stage: u32,
    pub threshold: Rational,
    /// Stage budget in effect for the next step.
    pub stage_budget: Rational,
    /// Sum of payments committed so far.
    pub committed: Rational,
    pub sample_size: usize,
    /// Users online while decisions were made at this step.
    pub online: usize,
    /// Marginal-value evaluations spent on allocation decisions.
    pub decision_evaluations: u64,
    /// Marginal-value evaluations spent on learning the threshold.
    pub threshold_evaluations: u64,
    pub threshold_updated: bool,
    pub updates: Vec<PaymentUpdate>,
}

/// A price quoted to a user at a decision point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Offer {
    pub t: u32,
    pub user: UserId,
    pub marginal: u64,
    pub price: Rational,
    /// Budget still uncommitted for this user, including any payment it
    /// already holds.
    pub available: Rational,
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct OnlineRun {
    pub outcome: AuctionOutcome,
    pub trace: Vec<StepRecord>,
    pub offers: Vec<Offer>,
    /// Wall-clock time of each threshold update, in stage order.
    pub stage_timings: Vec<Duration>,
}

impl OnlineRun {
    pub fn marginal_evaluations(&self) -> u64 {
        self.trace.iter().map(|s| s.decision_evaluations + s.threshold_evaluations).sum()
    }

    /// Cumulative per-step rows for display or export.
    pub fn rows(&self) -> Vec<TraceRow> {
        TraceRow::from_steps(&self.trace)
    }
}

fn validate_stream(stream: &[DeclaredBid], universe: &TaskUniverse, config: &OnlineConfig) -> Result<()> {
    config.validate()?;
    let mut seen = HashSet::new();
    for bid in stream {
        if !seen.insert(bid.id) {
            return Err(invalid(format!("duplicate user id {}", bid.id)));
        }
        if bid.arrival == 0 || bid.arrival > bid.departure || bid.departure > config.deadline {
            return Err(invalid(format!(
                "user {}: declared interval {}..{} outside 1..{}",
                bid.id, bid.arrival, bid.departure, config.deadline
            )));
        }
        if !rational::is_positive(&bid.bid) {
            return Err(invalid(format!("user {}: bid must be positive", bid.id)));
        }
        universe.check_tasks(bid.id, &bid.tasks)?;
    }
    Ok(())
}

/// Stage cursor plus the learned threshold, shared by both mechanisms.
struct Learner<'a> {
    plan: StagePlan,
    stage: u32,
    threshold: Rational,
    sample: Vec<&'a DeclaredBid>,
    timings: Vec<Duration>,
}

impl<'a> Learner<'a> {
    fn new(config: &OnlineConfig) -> Result<Self> {
        Ok(Self {
            plan: StagePlan::new(config.deadline, &config.budget)?,
            stage: 1,
            threshold: config.epsilon.clone(),
            sample: Vec::new(),
            timings: Vec::new(),
        })
    }

    fn stage_budget(&self) -> &Rational {
        &self.plan.stage(self.stage).budget
    }

    /// At the end of any stage but the last, re-learns the threshold from the
    /// sample under the ending stage's budget and moves to the next stage.
    /// Returns the evaluation count when an update happened.
    fn end_step(&mut self, t: u32, universe: &TaskUniverse, delta: &DeltaPolicy) -> Option<u64> {
        let stage = self.plan.stage(self.stage);
        if t != stage.end_time || self.stage as usize == self.plan.stage_count() {
            return None;
        }
        let started = std::time::Instant::now();
        let (learned, evaluations) =
            threshold_with_work(&stage.budget, &self.sample, universe, delta.delta_for(self.sample.len()));
        self.timings.push(started.elapsed());
        if let Some(threshold) = learned {
            self.threshold = threshold;
        }
        self.stage += 1;
        Some(evaluations)
    }
}

fn sum<'a>(values: impl Iterator<Item = &'a Rational>) -> Rational {
    values.fold(Rational::zero(), |acc, v| acc + v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::scenarios::example1;

    fn sample_of<'a>(bids: &'a [DeclaredBid], ids: &[u32]) -> Vec<&'a DeclaredBid> {
        bids.iter().filter(|b| ids.contains(&b.id.0)).collect()
    }

    #[test]
    fn thresholds_from_example_samples() {
        let ex = example1();
        let bids = ex.bids();
        let d = one();
        assert_eq!(density_threshold(&int(2), &sample_of(&bids, &[1]), &ex.universe, &d), Some(ratio(1, 2)));
        assert_eq!(density_threshold(&int(4), &sample_of(&bids, &[1, 2]), &ex.universe, &d), Some(ratio(1, 4)));
        assert_eq!(density_threshold(&int(8), &sample_of(&bids, &[1, 2, 3]), &ex.universe, &d), Some(ratio(1, 4)));
    }

    #[test]
    fn empty_greedy_set_gives_no_threshold() {
        let ex = example1();
        let bids = ex.bids();
        assert_eq!(density_threshold(&int(1), &sample_of(&bids, &[3]), &ex.universe, &one()), None);
        assert_eq!(density_threshold(&int(1), &[], &ex.universe, &one()), None);
    }

    #[test]
    fn delta_scales_threshold_down() {
        let ex = example1();
        let bids = ex.bids();
        let t = density_threshold(&int(2), &sample_of(&bids, &[1]), &ex.universe, &int(4));
        assert_eq!(t, Some(ratio(1, 8)));
    }

    #[test]
    fn delta_policy_switches_after_threshold_size() {
        let policy = DeltaPolicy { initial: one(), target: int(4), switch_size: 3 };
        assert_eq!(policy.delta_for(3), &one());
        assert_eq!(policy.delta_for(4), &int(4));
        assert_eq!(DeltaPolicy::default().switch_size, 240);
    }

    #[test]
    fn config_validation() {
        let ex = example1();
        let bad = OnlineConfig::new(int(0), 8);
        assert!(run_omz(&ex.bids(), &ex.universe, &bad).is_err());
        let bad = OnlineConfig::new(int(1), 8).with_delta(DeltaPolicy::fixed(ratio(1, 2)));
        assert!(run_omz(&ex.bids(), &ex.universe, &bad).is_err());
        let bad = OnlineConfig::new(int(1), 6);
        assert!(run_omg(&ex.bids(), &ex.universe, &bad).is_err(), "departure 7 beyond deadline 6");
    }
}
