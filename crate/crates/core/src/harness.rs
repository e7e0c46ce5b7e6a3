//! Unilateral-deviation sweeps and offline/online comparisons.
//!
//! A sweep freezes every other user's truthful declaration, re-runs the full
//! mechanism for each deviated declaration of one target user, and records
//! the target's utility against its true cost.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::{AuctionOutcome, DeclaredBid, TaskUniverse, UserId, UserProfile};
use crate::offline::{payment_records, proportional_share_offline};
use crate::online::{run_omg, run_omz, DeltaPolicy, OnlineConfig, StepRecord};
use crate::rational::{self, int, ratio, Rational};
use crate::scenarios::WorkedExample;
use crate::sim::{mean_sd, run_comparison, MechanismKind, ScenarioConfig};

/// Mechanisms a deviation sweep can drive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Omz,
    Omg,
    ProportionalShare,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Omz => "omz",
            Mechanism::Omg => "omg",
            Mechanism::ProportionalShare => "prop_share",
        }
    }

    fn parse(text: &str) -> Result<Self> {
        match text {
            "omz" => Ok(Mechanism::Omz),
            "omg" => Ok(Mechanism::Omg),
            "prop_share" => Ok(Mechanism::ProportionalShare),
            _ => Err(invalid(format!("unknown mechanism '{text}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationAxis {
    Bid,
    Arrival,
    Departure,
}

/// A fully specified small instance: true user types plus mechanism config.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub universe: TaskUniverse,
    pub profiles: Vec<UserProfile>,
    pub config: OnlineConfig,
}

/// One mechanism run with every price it quoted or paid.
#[derive(Clone, Debug)]
pub struct InstanceRun {
    pub outcome: AuctionOutcome,
    pub prices: Vec<Rational>,
    pub trace: Vec<StepRecord>,
}

const INSTANCE_SCHEMA: &str = "crowdsense-instance/1";

impl Instance {
    pub fn from_example(example: &WorkedExample) -> Self {
        Self { universe: example.universe.clone(), profiles: example.profiles.clone(), config: example.config.clone() }
    }

    pub fn truthful_bids(&self) -> Vec<DeclaredBid> {
        self.profiles.iter().map(UserProfile::truthful).collect()
    }

    pub fn profile(&self, user: UserId) -> Result<&UserProfile> {
        self.profiles.iter().find(|p| p.id == user).ok_or_else(|| invalid(format!("no user {user}")))
    }

    pub fn run(&self, mechanism: Mechanism, bids: &[DeclaredBid]) -> Result<InstanceRun> {
        match mechanism {
            Mechanism::Omz | Mechanism::Omg => {
                let run = if mechanism == Mechanism::Omz {
                    run_omz(bids, &self.universe, &self.config)?
                } else {
                    run_omg(bids, &self.universe, &self.config)?
                };
                let prices = run.offers.iter().map(|o| o.price.clone()).collect();
                Ok(InstanceRun { outcome: run.outcome, prices, trace: run.trace })
            }
            Mechanism::ProportionalShare => {
                let outcome = proportional_share_offline(bids, &self.universe, &self.config.budget)?;
                let mut prices: Vec<Rational> = outcome.payments.values().cloned().collect();
                for bid in bids {
                    prices.extend(
                        payment_records(bid, bids, &self.universe, &self.config.budget).iter().map(|r| r.price()),
                    );
                }
                Ok(InstanceRun { outcome, prices, trace: Vec::new() })
            }
        }
    }

    /// Text form used for repro cases and `trace --config`.
    pub fn dump(&self) -> String {
        let f = rational::format;
        let c = &self.config;
        let mut out = format!("# {INSTANCE_SCHEMA}\n");
        let requirements = self.universe.requirements().iter().map(u32::to_string).collect::<Vec<_>>().join(";");
        let lines = [
            format!("budget = {}", f(&c.budget)),
            format!("deadline = {}", c.deadline),
            format!("epsilon = {}", f(&c.epsilon)),
            format!("delta = {},{},{}", f(&c.delta.initial), f(&c.delta.target), c.delta.switch_size),
            format!("requirements = {requirements}"),
        ];
        for line in lines {
            out.push_str(&line);
            out.push('\n');
        }
        for p in &self.profiles {
            let tasks = p.tasks.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
            writeln!(out, "user = {},{},{},{},{}", p.id.0, p.arrival, p.departure, f(&p.cost), tasks)
                .expect("writing to a String");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = OnlineConfig::new(int(1), 1);
        let mut requirements = None;
        let mut users = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or_default().trim();
            if content.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Config { line, message };
            let (key, value) = content.split_once('=').ok_or_else(|| bad(format!("expected key = value: '{content}'")))?;
            let value = value.trim();
            let exact = |v: &str| rational::parse(v).map_err(|e| bad(e.to_string()));
            let whole = |v: &str| v.trim().parse::<u64>().map_err(|_| bad(format!("bad integer '{v}'")));
            match key.trim() {
                "budget" => config.budget = exact(value)?,
                "deadline" => config.deadline = whole(value)? as u32,
                "epsilon" => config.epsilon = exact(value)?,
                "delta" => {
                    let parts: Vec<&str> = value.split(',').collect();
                    if parts.len() != 3 {
                        return Err(bad("delta = initial,target,switch".into()));
                    }
                    config.delta = DeltaPolicy {
                        initial: exact(parts[0])?,
                        target: exact(parts[1])?,
                        switch_size: whole(parts[2])? as usize,
                    };
                }
                "requirements" => {
                    requirements = Some(value.split(';').map(|r| whole(r).map(|r| r as u32)).collect::<Result<Vec<_>>>()?)
                }
                "user" => {
                    let parts: Vec<&str> = value.split(',').collect();
                    if parts.len() != 5 {
                        return Err(bad("user = id,arrival,departure,cost,tasks".into()));
                    }
                    let tasks = parts[4]
                        .split(';')
                        .filter(|t| !t.trim().is_empty())
                        .map(|t| whole(t).map(|t| t as usize))
                        .collect::<Result<Vec<_>>>()?;
                    let id = UserId(whole(parts[0])? as u32);
                    let profile =
                        UserProfile::new(id, whole(parts[1])? as u32, whole(parts[2])? as u32, tasks, exact(parts[3])?)
                            .map_err(|e| bad(e.to_string()))?;
                    users.push(profile);
                }
                other => return Err(bad(format!("unknown key '{other}'"))),
            }
        }
        let requirements = requirements.ok_or_else(|| invalid("instance has no requirements line"))?;
        let universe = TaskUniverse::new(requirements)?;
        for p in &users {
            universe.check_tasks(p.id, &p.tasks)?;
        }
        Ok(Self { universe, profiles: users, config })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeviationPoint {
    /// Deviated bid, or deviated time step for the time axes.
    pub value: String,
    pub won: bool,
    pub payment: String,
    pub utility: String,
    #[serde(skip)]
    pub utility_exact: Rational,
}

#[derive(Clone, Debug)]
pub struct DeviationSweep {
    pub mechanism: Mechanism,
    pub user: UserId,
    pub axis: DeviationAxis,
    pub truthful: DeviationPoint,
    pub points: Vec<DeviationPoint>,
}

impl DeviationSweep {
    /// Grid points where the deviation strictly beats the truthful report.
    pub fn violations(&self) -> Vec<&DeviationPoint> {
        self.points.iter().filter(|p| p.utility_exact > self.truthful.utility_exact).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for point in &self.points {
            writer.serialize(point)?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn point(value: String, outcome: &AuctionOutcome, profile: &UserProfile) -> DeviationPoint {
    let utility = outcome.utility(profile.id, &profile.cost);
    DeviationPoint {
        value,
        won: outcome.is_winner(profile.id),
        payment: rational::format(&outcome.payment(profile.id)),
        utility: rational::format(&utility),
        utility_exact: utility,
    }
}

fn sweep(
    instance: &Instance,
    mechanism: Mechanism,
    user: UserId,
    axis: DeviationAxis,
    declarations: impl Iterator<Item = (String, DeclaredBid)>,
) -> Result<DeviationSweep> {
    let profile = instance.profile(user)?;
    let mut bids = instance.truthful_bids();
    let slot = bids.iter().position(|b| b.id == user).expect("profile exists");
    let truthful_run = instance.run(mechanism, &bids)?;
    let truthful = point(rational::format(&profile.cost), &truthful_run.outcome, profile);
    let mut points = Vec::new();
    for (label, declaration) in declarations {
        if !declaration.is_admissible_for(profile) {
            return Err(invalid(format!("declaration {label} is not admissible for user {user}")));
        }
        bids[slot] = declaration;
        let run = instance.run(mechanism, &bids)?;
        points.push(point(label, &run.outcome, profile));
    }
    Ok(DeviationSweep { mechanism, user, axis, truthful, points })
}

/// Re-runs `mechanism` once per bid in `grid`, only the target's bid changed.
pub fn bid_deviation_sweep(
    instance: &Instance,
    mechanism: Mechanism,
    user: UserId,
    grid: &[Rational],
) -> Result<DeviationSweep> {
    let truth = instance.profile(user)?.truthful();
    let declarations =
        grid.iter().map(|b| (rational::format(b), DeclaredBid { bid: b.clone(), ..truth.clone() }));
    sweep(instance, mechanism, user, DeviationAxis::Bid, declarations)
}

/// OMG sweep over reported arrival (departure fixed at truth) or reported
/// departure (arrival fixed at truth). Every grid value must lie in the
/// user's true interval.
pub fn time_deviation_sweep(instance: &Instance, user: UserId, axis: DeviationAxis, grid: &[u32]) -> Result<DeviationSweep> {
    let profile = instance.profile(user)?;
    let truth = profile.truthful();
    let mut declarations = Vec::new();
    for &t in grid {
        if t < profile.arrival || t > profile.departure {
            return Err(invalid(format!(
                "time {t} outside user {user}'s interval {}..{}",
                profile.arrival, profile.departure
            )));
        }
        let declaration = match axis {
            DeviationAxis::Arrival => DeclaredBid { arrival: t, ..truth.clone() },
            DeviationAxis::Departure => DeclaredBid { departure: t, ..truth.clone() },
            DeviationAxis::Bid => return Err(invalid("time sweep needs the arrival or departure axis")),
        };
        declarations.push((t.to_string(), declaration));
    }
    sweep(instance, Mechanism::Omg, user, axis, declarations.into_iter())
}

/// Cent-aligned quarter steps up to twice the largest cost, plus every price
/// seen in the truthful run, each one cent either side, and the user's cost
/// one cent either side.
pub fn bid_grid(instance: &Instance, mechanism: Mechanism, user: UserId) -> Result<Vec<Rational>> {
    let profile = instance.profile(user)?;
    let run = instance.run(mechanism, &instance.truthful_bids())?;
    let cent = ratio(1, 100);
    let top = instance.profiles.iter().map(|p| p.cost.clone()).max().unwrap_or_else(|| int(1)) * int(2);
    let mut grid = BTreeSet::new();
    let mut step = ratio(1, 4);
    while step <= top {
        grid.insert(step.clone());
        step += ratio(1, 4);
    }
    grid.insert(cent.clone());
    for anchor in run.prices.iter().chain(std::iter::once(&profile.cost)) {
        for candidate in [anchor - &cent, anchor.clone(), anchor + &cent] {
            if rational::is_positive(&candidate) {
                grid.insert(candidate);
            }
        }
    }
    grid.remove(&profile.cost);
    Ok(grid.into_iter().collect())
}

/// A deviation that strictly beat truth, with everything needed to replay it.
#[derive(Clone, Debug)]
pub struct ReproCase {
    pub mechanism: Mechanism,
    pub axis: DeviationAxis,
    pub user: UserId,
    pub value: String,
    pub truthful_utility: String,
    pub deviated_utility: String,
    pub instance: Instance,
}

impl ReproCase {
    pub fn dump(&self) -> String {
        format!(
            "# violation: mechanism={} axis={:?} user={} value={} truthful_utility={} deviated_utility={}\n# mechanism = {}\n{}",
            self.mechanism.name(),
            self.axis,
            self.user,
            self.value,
            self.truthful_utility,
            self.deviated_utility,
            self.mechanism.name(),
            self.instance.dump()
        )
    }

    /// Reads the mechanism tag and instance back from [`ReproCase::dump`] output.
    pub fn parse_instance(text: &str) -> Result<(Mechanism, Instance)> {
        let tag = text
            .lines()
            .find_map(|l| l.strip_prefix("# mechanism = "))
            .ok_or_else(|| invalid("repro case has no mechanism line"))?;
        Ok((Mechanism::parse(tag.trim())?, Instance::parse(text)?))
    }
}

/// Every user, every axis in `axes`; returns all strict improvements found.
pub fn certify_instance(instance: &Instance, mechanism: Mechanism, axes: &[DeviationAxis]) -> Result<Vec<ReproCase>> {
    let mut found = Vec::new();
    for profile in &instance.profiles {
        for &axis in axes {
            let sweep = match axis {
                DeviationAxis::Bid => {
                    let grid = bid_grid(instance, mechanism, profile.id)?;
                    bid_deviation_sweep(instance, mechanism, profile.id, &grid)?
                }
                DeviationAxis::Arrival | DeviationAxis::Departure => {
                    if mechanism != Mechanism::Omg {
                        continue;
                    }
                    let grid: Vec<u32> = (profile.arrival..=profile.departure).collect();
                    time_deviation_sweep(instance, profile.id, axis, &grid)?
                }
            };
            for bad in sweep.violations() {
                found.push(ReproCase {
                    mechanism,
                    axis,
                    user: profile.id,
                    value: bad.value.clone(),
                    truthful_utility: sweep.truthful.utility.clone(),
                    deviated_utility: bad.utility.clone(),
                    instance: instance.clone(),
                });
            }
        }
    }
    Ok(found)
}

/// Which parameter a comparison row varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Budget,
    Lambda,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioRow {
    pub axis: SweepAxis,
    pub point: f64,
    pub replications: u64,
    pub omz: f64,
    pub omg: f64,
    pub prop_share: f64,
    pub greedy: f64,
    pub random: f64,
    pub prop_share_over_omz: f64,
    pub greedy_over_omz: f64,
    pub prop_share_over_omg: f64,
    pub greedy_over_omg: f64,
}

impl RatioRow {
    pub fn from_rows(axis: SweepAxis, point: f64, replications: u64, rows: &[crate::sim::MetricsRow]) -> Self {
        let mean = |kind: MechanismKind| mean_sd(rows.iter().filter(|r| r.mechanism == kind).map(|r| r.value)).0;
        let (omz, omg) = (mean(MechanismKind::Omz), mean(MechanismKind::Omg));
        let (prop_share, greedy) = (mean(MechanismKind::ProportionalShare), mean(MechanismKind::Greedy));
        let over = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::INFINITY };
        RatioRow {
            axis,
            point,
            replications,
            omz,
            omg,
            prop_share,
            greedy,
            random: mean(MechanismKind::Random),
            prop_share_over_omz: over(prop_share, omz),
            greedy_over_omz: over(greedy, omz),
            prop_share_over_omg: over(prop_share, omg),
            greedy_over_omg: over(greedy, omg),
        }
    }
}

/// Mean values of all five mechanisms and offline/online ratios at every
/// budget in `budgets` and every rate in `lambdas`, other parameters from
/// `base`. OMZ runs on each stream's zero-interval variant.
pub fn competitive_comparison(
    base: &ScenarioConfig,
    budgets: &[Rational],
    lambdas: &[f64],
    replications: u64,
) -> Result<Vec<RatioRow>> {
    let mut table = Vec::new();
    for budget in budgets {
        let config = ScenarioConfig { budget: budget.clone(), ..base.clone() };
        let rows = run_comparison(&config, replications)?;
        table.push(RatioRow::from_rows(SweepAxis::Budget, rational::to_f64(budget), replications, &rows));
    }
    for &lambda in lambdas {
        let config = ScenarioConfig { lambda, ..base.clone() };
        let rows = run_comparison(&config, replications)?;
        table.push(RatioRow::from_rows(SweepAxis::Lambda, lambda, replications, &rows));
    }
    Ok(table)
}

pub fn write_ratio_csv<W: Write>(out: W, rows: &[RatioRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{example1, example2};

    #[test]
    fn example_one_bid_sweep_peaks_at_truth() {
        let inst = Instance::from_example(&example1());
        for user in 1..=5 {
            let grid = bid_grid(&inst, Mechanism::Omz, UserId(user)).unwrap();
            let sweep = bid_deviation_sweep(&inst, Mechanism::Omz, UserId(user), &grid).unwrap();
            assert!(sweep.violations().is_empty(), "user {user}");
        }
    }

    #[test]
    fn overbidding_past_the_price_loses() {
        let inst = Instance::from_example(&example1());
        let sweep = bid_deviation_sweep(&inst, Mechanism::Omz, UserId(4), &[ratio(401, 100), int(9)]).unwrap();
        assert!(sweep.points.iter().all(|p| !p.won && p.utility == "0"));
        assert_eq!(sweep.truthful.utility, "3");
    }

    #[test]
    fn zero_marginal_user_has_zero_utility_everywhere() {
        // User 2 only covers a task user 1 already saturates.
        let universe = TaskUniverse::uniform(1, 1).unwrap();
        let profiles = vec![
            UserProfile::new(UserId(1), 1, 1, vec![0], int(1)).unwrap(),
            UserProfile::new(UserId(2), 3, 3, vec![0], int(1)).unwrap(),
        ];
        let inst = Instance { universe, profiles, config: OnlineConfig::new(int(40), 4) };
        let grid: Vec<Rational> = (1..=40).map(|k| ratio(k, 4)).collect();
        let sweep = bid_deviation_sweep(&inst, Mechanism::Omz, UserId(2), &grid).unwrap();
        assert!(sweep.points.iter().all(|p| p.utility_exact == int(0)));
    }

    #[test]
    fn example_two_late_arrival_report() {
        let inst = Instance::from_example(&example2());
        let arrive = time_deviation_sweep(&inst, UserId(1), DeviationAxis::Arrival, &[1, 2, 3, 4, 5]).unwrap();
        assert!(arrive.violations().is_empty());
        assert_eq!(arrive.truthful.utility, "6");
        let depart = time_deviation_sweep(&inst, UserId(1), DeviationAxis::Departure, &[1, 2, 3, 4, 5]).unwrap();
        assert!(depart.violations().is_empty());
        assert!(time_deviation_sweep(&inst, UserId(1), DeviationAxis::Departure, &[6]).is_err());
    }

    #[test]
    fn instance_dump_round_trip() {
        let inst = Instance::from_example(&example2());
        assert_eq!(Instance::parse(&inst.dump()).unwrap(), inst);
        let case = ReproCase {
            mechanism: Mechanism::Omg,
            axis: DeviationAxis::Bid,
            user: UserId(1),
            value: "3".into(),
            truthful_utility: "0".into(),
            deviated_utility: "1".into(),
            instance: inst.clone(),
        };
        let (mechanism, back) = ReproCase::parse_instance(&case.dump()).unwrap();
        assert_eq!((mechanism, back), (Mechanism::Omg, inst));
        assert!(Instance::parse("budget = 1\n").is_err());
        assert!(matches!(Instance::parse("requirements = 1\nuser = 1,2\n"), Err(Error::Config { line: 2, .. })));
    }

    #[test]
    fn certify_examples() {
        let one = Instance::from_example(&example1());
        assert!(certify_instance(&one, Mechanism::Omz, &[DeviationAxis::Bid]).unwrap().is_empty());
        let two = Instance::from_example(&example2());
        let axes = [DeviationAxis::Bid, DeviationAxis::Arrival, DeviationAxis::Departure];
        assert!(certify_instance(&two, Mechanism::Omg, &axes).unwrap().is_empty());
        assert!(certify_instance(&one, Mechanism::ProportionalShare, &[DeviationAxis::Bid]).unwrap().is_empty());
    }
}
