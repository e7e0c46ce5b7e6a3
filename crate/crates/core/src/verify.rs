//! Randomized invariant suites over small instances.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::greedy::proportional_share_greedy;
use crate::harness::{certify_instance, DeviationAxis, Instance, Mechanism, ReproCase};
use crate::model::{
    check_submodular_and_monotone, CoverageInstance, DeclaredBid, TaskUniverse, UserId, UserProfile,
    SUBMODULARITY_CHECK_LIMIT,
};
use crate::offline::{brute_force_optimal, greedy_with_seed_enumeration, proportional_share_offline, BRUTE_FORCE_LIMIT};
use crate::online::{run_omg, run_omz, DeltaPolicy, OnlineConfig, OnlineRun};
use crate::rational::{int, ratio, Rational};
use crate::sim::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Suite {
    Truthfulness,
    Safety,
    Submodularity,
    Halving,
    Greedy,
    Equivalence,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] =
        [Suite::Truthfulness, Suite::Safety, Suite::Submodularity, Suite::Halving, Suite::Greedy, Suite::Equivalence];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Truthfulness => "truthfulness",
            Suite::Safety => "safety",
            Suite::Submodularity => "submodularity",
            Suite::Halving => "halving",
            Suite::Greedy => "greedy",
            Suite::Equivalence => "equivalence",
            Suite::All => "all",
        }
    }
}

/// Size caps for generated instances.
#[derive(Clone, Copy, Debug)]
pub struct InstanceShape {
    pub max_users: usize,
    pub max_pois: usize,
    /// Every user departs on arrival and arrivals are distinct.
    pub zero_interval: bool,
}

impl Default for InstanceShape {
    fn default() -> Self {
        Self { max_users: 30, max_pois: 60, zero_interval: false }
    }
}

/// Users cover short windows of a line of PoIs (so neighbours overlap), with
/// requirements in {1, 2}, cent costs in [1, 10] and a mix of initial
/// thresholds and delta policies.
pub fn random_instance(rng: &mut impl Rng, shape: InstanceShape) -> Instance {
    let m = rng.random_range(4..=shape.max_pois.max(4));
    let requirements: Vec<u32> = (0..m).map(|_| rng.random_range(1..=2)).collect();
    let universe = TaskUniverse::new(requirements).expect("requirements are positive");
    let n = rng.random_range(1..=shape.max_users.max(1));
    let deadline = if shape.zero_interval { rng.random_range(n..=n + 10) } else { rng.random_range(4..=40) } as u32;
    let mut slots: Vec<u32> = (1..=deadline).collect();
    slots.shuffle(rng);
    let profiles = (0..n)
        .map(|k| {
            let width = rng.random_range(1..=6.min(m));
            let start = rng.random_range(0..=m - width);
            let mut tasks: Vec<usize> = (start..start + width).collect();
            if rng.random_bool(0.2) {
                tasks.push(rng.random_range(0..m));
            }
            let (arrival, departure) = if shape.zero_interval {
                (slots[k], slots[k])
            } else {
                let a = rng.random_range(1..=deadline);
                (a, (a + rng.random_range(0..=8)).min(deadline))
            };
            let cost = ratio(rng.random_range(100..=1000), 100);
            UserProfile::new(UserId(k as u32 + 1), arrival, departure, tasks, cost).expect("generated profile is valid")
        })
        .collect();
    let epsilon = [ratio(1, 2), int(1), int(2)][rng.random_range(0..3)].clone();
    let delta = if rng.random_bool(0.5) {
        DeltaPolicy::fixed(int(1))
    } else {
        DeltaPolicy { initial: int(1), target: int(4), switch_size: rng.random_range(2..=10) }
    };
    let config = OnlineConfig::new(int(rng.random_range(5..=60)), deadline).with_epsilon(epsilon).with_delta(delta);
    Instance { universe, profiles, config }
}

/// Budget, rationality and monotone-payment checks on one online run.
pub fn check_run_safety(instance: &Instance, bids: &[DeclaredBid], run: &OnlineRun) -> Vec<String> {
    let mut problems = Vec::new();
    let budget = &instance.config.budget;
    if run.outcome.total_payment > *budget {
        problems.push(format!("total payment {} exceeds B = {}", run.outcome.total_payment, budget));
    }
    let mut held: BTreeMap<UserId, Rational> = BTreeMap::new();
    for step in &run.trace {
        if step.committed > step.stage_budget {
            problems.push(format!("t={}: committed {} exceeds stage budget {}", step.t, step.committed, step.stage_budget));
        }
        for update in &step.updates {
            if let Some(previous) = held.get(&update.user) {
                if update.payment < *previous {
                    problems.push(format!("t={}: payment of user {} fell", step.t, update.user));
                }
            }
            held.insert(update.user, update.payment.clone());
        }
        let sum: Rational = held.values().fold(int(0), |acc, p| acc + p);
        if sum != step.committed {
            problems.push(format!("t={}: committed {} differs from payment sum {}", step.t, step.committed, sum));
        }
    }
    for bid in bids {
        let paid = run.outcome.payment(bid.id);
        if run.outcome.is_winner(bid.id) {
            if paid < bid.bid {
                problems.push(format!("winner {} paid {} below bid {}", bid.id, paid, bid.bid));
            }
        } else if paid != int(0) {
            problems.push(format!("loser {} paid {}", bid.id, paid));
        }
    }
    problems
}

#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub instances: usize,
    pub runs: usize,
    pub failures: Vec<String>,
    pub repros: Vec<ReproCase>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn merge(mut self, other: SuiteReport) -> SuiteReport {
        self.instances += other.instances;
        self.runs += other.runs;
        self.failures.extend(other.failures);
        self.repros.extend(other.repros);
        self
    }
}

fn per_instance(
    suite: &'static str,
    count: usize,
    seed: u64,
    check: impl Fn(usize, &mut ChaCha8Rng) -> Result<SuiteReport> + Sync,
) -> Result<SuiteReport> {
    let reports: Vec<SuiteReport> = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
            check(k, &mut rng)
        })
        .collect::<Result<_>>()?;
    Ok(reports.into_iter().fold(SuiteReport { suite, ..SuiteReport::default() }, SuiteReport::merge))
}

fn grid_runs(instance: &Instance, mechanism: Mechanism, axes: &[DeviationAxis]) -> usize {
    // One truthful run plus one per grid point, per user and axis; counted
    // from the grid sizes actually used.
    let mut runs = 0;
    for p in &instance.profiles {
        for &axis in axes {
            runs += match axis {
                DeviationAxis::Bid => {
                    1 + crate::harness::bid_grid(instance, mechanism, p.id).map(|g| g.len()).unwrap_or(0)
                }
                _ => 1 + (p.departure - p.arrival + 1) as usize,
            };
        }
    }
    runs
}

/// OMZ on the bid axis (zero-interval instances), OMG on all three axes, and
/// the offline proportional-share mechanism on the bid axis.
pub fn truthfulness_suite(count: usize, seed: u64) -> Result<SuiteReport> {
    per_instance("truthfulness", count, seed, |_, rng| {
        let impatient = random_instance(rng, InstanceShape { zero_interval: true, ..InstanceShape::default() });
        let general = random_instance(rng, InstanceShape::default());
        let all_axes = [DeviationAxis::Bid, DeviationAxis::Arrival, DeviationAxis::Departure];
        let mut repros = certify_instance(&impatient, Mechanism::Omz, &[DeviationAxis::Bid])?;
        repros.extend(certify_instance(&general, Mechanism::Omg, &all_axes)?);
        let runs = grid_runs(&impatient, Mechanism::Omz, &[DeviationAxis::Bid]) + grid_runs(&general, Mechanism::Omg, &all_axes);
        let failures = repros
            .iter()
            .map(|r| {
                format!(
                    "{} {:?} user {}: deviation {} gives utility {} > truthful {}",
                    r.mechanism.name(),
                    r.axis,
                    r.user,
                    r.value,
                    r.deviated_utility,
                    r.truthful_utility
                )
            })
            .collect();
        Ok(SuiteReport { suite: "truthfulness", instances: 2, runs, failures, repros })
    })
}

/// Truthful and randomly misreported runs of both online mechanisms, each
/// checked with [`check_run_safety`], plus offline rationality and budget.
pub fn safety_suite(count: usize, seed: u64) -> Result<SuiteReport> {
    per_instance("safety", count, seed, |k, rng| {
        let mut report = SuiteReport { suite: "safety", instances: 2, ..SuiteReport::default() };
        for (instance, mechanism) in [
            (random_instance(rng, InstanceShape { zero_interval: true, ..InstanceShape::default() }), Mechanism::Omz),
            (random_instance(rng, InstanceShape::default()), Mechanism::Omg),
        ] {
            for variant in 0..10 {
                let mut bids = instance.truthful_bids();
                if variant > 0 {
                    for bid in &mut bids {
                        bid.bid = ratio(rng.random_range(1..=2000), 100);
                    }
                }
                let run = if mechanism == Mechanism::Omz {
                    run_omz(&bids, &instance.universe, &instance.config)?
                } else {
                    run_omg(&bids, &instance.universe, &instance.config)?
                };
                report.runs += 1;
                for problem in check_run_safety(&instance, &bids, &run) {
                    report.failures.push(format!("instance {k} {} variant {variant}: {problem}", mechanism.name()));
                }
                let offline = proportional_share_offline(&bids, &instance.universe, &instance.config.budget)?;
                report.runs += 1;
                if offline.total_payment > instance.config.budget {
                    report.failures.push(format!("instance {k}: offline payment exceeds budget"));
                }
                for bid in &bids {
                    if offline.is_winner(bid.id) && offline.payment(bid.id) < bid.bid {
                        report.failures.push(format!("instance {k}: offline winner {} paid below bid", bid.id));
                    }
                }
            }
        }
        Ok(report)
    })
}

/// Exhaustive monotonicity and submodularity of coverage on instances of at
/// most six users and ten tasks.
pub fn submodularity_suite(count: usize, seed: u64) -> Result<SuiteReport> {
    per_instance("submodularity", count, seed, |k, rng| {
        let instance = random_instance(
            rng,
            InstanceShape { max_users: 6, max_pois: 10, zero_interval: false },
        );
        let table = CoverageInstance::new(
            instance.universe.clone(),
            instance.profiles.iter().map(|p| (p.id, p.tasks.clone())),
        )?;
        let failures = check_submodular_and_monotone(&table, SUBMODULARITY_CHECK_LIMIT)?
            .map(|v| vec![format!("instance {k}: {v:?}")])
            .unwrap_or_default();
        Ok(SuiteReport { suite: "submodularity", instances: 1, runs: 1, failures, ..SuiteReport::default() })
    })
}

/// The threshold learner's greedy value under `B'/2` is at least half its
/// value under `B'`, for one random sample set and budget per instance.
///
/// This fails whenever a sample's best users each bid more than `B'/2` but
/// at most their share of `B'`; the suite reports such cases as found.
pub fn halving_suite(count: usize, seed: u64) -> Result<SuiteReport> {
    per_instance("halving", count, seed, |k, rng| {
        let instance = random_instance(rng, InstanceShape::default());
        let bids = instance.truthful_bids();
        let mut report = SuiteReport { suite: "halving", instances: 1, ..SuiteReport::default() };
        {
            let sample: Vec<&DeclaredBid> = bids.iter().filter(|_| rng.random_bool(0.7)).collect();
            let budget = ratio(rng.random_range(100..=8000), 100);
            let full = proportional_share_greedy(&sample, &instance.universe, &budget).value;
            let half = proportional_share_greedy(&sample, &instance.universe, &(&budget / int(2))).value;
            report.runs += 2;
            if 2 * half < full {
                report.failures.push(format!(
                    "instance {k}: budget {budget} gives value {full}, half budget gives {half} (sample {:?})",
                    sample.iter().map(|b| b.id.0).collect::<Vec<_>>()
                ));
            }
        }
        Ok(report)
    })
}

/// Seed-enumeration greedy reaches `(1 - 1/e)` of the exhaustive optimum
/// and the proportional-share value never exceeds it.
pub fn greedy_suite(count: usize, seed: u64) -> Result<SuiteReport> {
    let bound = 1.0 - (-1.0f64).exp();
    per_instance("greedy", count, seed, |k, rng| {
        let instance = random_instance(rng, InstanceShape { max_users: BRUTE_FORCE_LIMIT, ..InstanceShape::default() });
        let bids = instance.truthful_bids();
        let budget = &instance.config.budget;
        let optimum = brute_force_optimal(&bids, &instance.universe, budget, BRUTE_FORCE_LIMIT)?.total_value;
        let greedy = greedy_with_seed_enumeration(&bids, &instance.universe, budget, 3)?;
        let prop = proportional_share_offline(&bids, &instance.universe, budget)?.total_value;
        let mut failures = Vec::new();
        if (greedy.total_value as f64) < bound * optimum as f64 - 1e-9 {
            failures.push(format!("instance {k}: greedy {} below (1-1/e) x optimum {optimum}", greedy.total_value));
        }
        if greedy.total_value > optimum || prop > optimum {
            failures.push(format!("instance {k}: value above the exhaustive optimum {optimum}"));
        }
        if greedy.total_payment > *budget {
            failures.push(format!("instance {k}: greedy spends over budget"));
        }
        Ok(SuiteReport { suite: "greedy", instances: 1, runs: 3, failures, ..SuiteReport::default() })
    })
}

/// On zero-interval streams with distinct arrivals the general mechanism
/// reproduces OMZ step for step.
pub fn equivalence_suite(count: usize, seed: u64) -> Result<SuiteReport> {
    per_instance("equivalence", count, seed, |k, rng| {
        let instance = random_instance(rng, InstanceShape { zero_interval: true, ..InstanceShape::default() });
        let bids = instance.truthful_bids();
        let omz = run_omz(&bids, &instance.universe, &instance.config)?;
        let omg = run_omg(&bids, &instance.universe, &instance.config)?;
        let mut failures = Vec::new();
        if omz.outcome != omg.outcome || omz.rows() != omg.rows() {
            failures.push(format!("instance {k}: OMG and OMZ outcomes differ"));
        }
        Ok(SuiteReport { suite: "equivalence", instances: 1, runs: 2, failures, ..SuiteReport::default() })
    })
}

pub fn run_suite(suite: Suite, count: usize, seed: u64) -> Result<Vec<SuiteReport>> {
    Ok(match suite {
        Suite::Truthfulness => vec![truthfulness_suite(count, seed)?],
        Suite::Safety => vec![safety_suite(count, seed)?],
        Suite::Submodularity => vec![submodularity_suite(count, seed)?],
        Suite::Halving => vec![halving_suite(count, seed)?],
        Suite::Greedy => vec![greedy_suite(count, seed)?],
        Suite::Equivalence => vec![equivalence_suite(count, seed)?],
        Suite::All => Suite::EACH.iter().map(|&s| run_suite(s, count, seed).map(|mut r| r.remove(0))).collect::<Result<_>>()?,
    })
}

/// Distinct user ids that appear in any repro case.
pub fn implicated_users(report: &SuiteReport) -> BTreeSet<UserId> {
    report.repros.iter().map(|r| r.user).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_respects_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let inst = random_instance(&mut rng, InstanceShape { zero_interval: true, ..InstanceShape::default() });
            assert!(inst.profiles.len() <= 30 && inst.universe.task_count() <= 60);
            let arrivals: BTreeSet<u32> = inst.profiles.iter().map(|p| p.arrival).collect();
            assert_eq!(arrivals.len(), inst.profiles.len());
            assert!(inst.profiles.iter().all(|p| p.arrival == p.departure && p.departure <= inst.config.deadline));
        }
    }

    #[test]
    fn small_suites_pass() {
        for suite in [Suite::Submodularity, Suite::Greedy, Suite::Equivalence, Suite::Safety] {
            let report = run_suite(suite, 10, 1).unwrap().remove(0);
            assert!(report.passed(), "{}: {:?}", report.suite, report.failures);
        }
    }

    #[test]
    fn safety_flags_corrupted_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let instance = random_instance(&mut rng, InstanceShape::default());
        let bids = instance.truthful_bids();
        let mut run = run_omg(&bids, &instance.universe, &instance.config).unwrap();
        assert!(check_run_safety(&instance, &bids, &run).is_empty());
        run.trace[0].committed = &instance.config.budget * int(2);
        assert!(!check_run_safety(&instance, &bids, &run).is_empty());
    }
}
