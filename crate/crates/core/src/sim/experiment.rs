use std::io::Write;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{derive_seed, generate_user_stream, zero_interval_variant, PoiGrid, ScenarioConfig};
use crate::error::{invalid, Result};
use crate::model::{AuctionOutcome, DeclaredBid, TaskUniverse, UserProfile};
use crate::offline::{greedy_budgeted_max_coverage, proportional_share_offline, random_baseline};
use crate::online::{run_omg, run_omz};
use crate::rational;

/// Version tag on the first line of metrics CSV files.
pub const METRICS_SCHEMA: &str = "crowdsense-metrics/1";

/// Draws averaged by the random baseline.
pub const RANDOM_DRAWS: usize = 50;
/// Threshold range of the random baseline: at most 29 PoIs per user and bids
/// of at least 1 bound any density by 29.
pub const RANDOM_RANGE: (u32, u32) = (1, 29);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    Omz,
    Omg,
    #[value(name = "prop_share")]
    ProportionalShare,
    Greedy,
    Random,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 5] = [
        MechanismKind::Omz,
        MechanismKind::Omg,
        MechanismKind::ProportionalShare,
        MechanismKind::Greedy,
        MechanismKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Omz => "omz",
            MechanismKind::Omg => "omg",
            MechanismKind::ProportionalShare => "prop_share",
            MechanismKind::Greedy => "greedy",
            MechanismKind::Random => "random",
        }
    }
}

/// One (replication, mechanism) measurement. Wall-clock fields are kept out
/// of the CSV so identical inputs give identical files.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub replication: u64,
    pub seed: u64,
    pub mechanism: MechanismKind,
    pub users: usize,
    pub pois: usize,
    /// Empty for the random baseline, which reports means over draws.
    pub winners: Option<usize>,
    pub value: f64,
    pub payment: f64,
    pub payment_exact: Option<String>,
    pub utility_total: Option<f64>,
    pub utility_min: Option<f64>,
    pub marginal_evaluations: u64,
    #[serde(skip)]
    pub stage_timings: Vec<Duration>,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Geometry and universe shared by all replications of a config.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: PoiGrid,
    pub universe: TaskUniverse,
}

impl Scenario {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let grid = PoiGrid::generate(&config.geometry)?;
        let universe = grid.universe(1)?;
        Ok(Self { config: config.clone(), grid, universe })
    }

    pub fn replication_seed(&self, replication: u64) -> u64 {
        derive_seed(self.config.seed, replication)
    }

    pub fn stream(&self, replication: u64) -> Result<Vec<UserProfile>> {
        generate_user_stream(&self.config, &self.grid, self.replication_seed(replication))
    }

    /// Runs one mechanism on truthful declarations of `profiles`.
    pub fn measure(&self, kind: MechanismKind, profiles: &[UserProfile], replication: u64) -> Result<MetricsRow> {
        let bids: Vec<DeclaredBid> = profiles.iter().map(UserProfile::truthful).collect();
        let seed = self.replication_seed(replication);
        let started = Instant::now();
        let budget = &self.config.budget;
        let (outcome, evaluations, timings) = match kind {
            MechanismKind::Omz | MechanismKind::Omg => {
                let config = self.config.online_config();
                let run = if kind == MechanismKind::Omz {
                    run_omz(&bids, &self.universe, &config)?
                } else {
                    run_omg(&bids, &self.universe, &config)?
                };
                let evaluations = run.marginal_evaluations();
                (run.outcome, evaluations, run.stage_timings)
            }
            MechanismKind::ProportionalShare => (proportional_share_offline(&bids, &self.universe, budget)?, 0, vec![]),
            MechanismKind::Greedy => (greedy_budgeted_max_coverage(&bids, &self.universe, budget)?, 0, vec![]),
            MechanismKind::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
                let mean = random_baseline(&bids, &self.universe, budget, RANDOM_DRAWS, RANDOM_RANGE, &mut rng)?;
                return Ok(MetricsRow {
                    replication,
                    seed,
                    mechanism: kind,
                    users: profiles.len(),
                    pois: self.grid.len(),
                    winners: None,
                    value: mean.mean_value,
                    payment: mean.mean_payment,
                    payment_exact: None,
                    utility_total: None,
                    utility_min: None,
                    marginal_evaluations: 0,
                    stage_timings: vec![],
                    elapsed: started.elapsed(),
                });
            }
        };
        let utilities = utilities(&outcome, profiles);
        Ok(MetricsRow {
            replication,
            seed,
            mechanism: kind,
            users: profiles.len(),
            pois: self.grid.len(),
            winners: Some(outcome.winners.len()),
            value: outcome.total_value as f64,
            payment: rational::to_f64(&outcome.total_payment),
            payment_exact: Some(rational::format(&outcome.total_payment)),
            utility_total: Some(utilities.iter().sum()),
            utility_min: Some(utilities.iter().copied().fold(f64::INFINITY, f64::min)).filter(|m| m.is_finite()),
            marginal_evaluations: evaluations,
            stage_timings: timings,
            elapsed: started.elapsed(),
        })
    }
}

fn utilities(outcome: &AuctionOutcome, profiles: &[UserProfile]) -> Vec<f64> {
    profiles
        .iter()
        .filter(|p| outcome.is_winner(p.id))
        .map(|p| rational::to_f64(&(outcome.payment(p.id) - &p.cost)))
        .collect::<Vec<_>>()
}

/// Runs every mechanism in `kinds` on `replications` independent streams, in
/// parallel over replications. Rows come back ordered by replication, then by
/// the order of `kinds`.
///
/// OMZ requires a zero-interval config.
pub fn run_experiment(config: &ScenarioConfig, kinds: &[MechanismKind], replications: u64) -> Result<Vec<MetricsRow>> {
    if kinds.contains(&MechanismKind::Omz) && config.interval_max > 0 {
        return Err(invalid("OMZ needs interval_max = 0; use the general mechanism for nonzero intervals"));
    }
    let scenario = Scenario::new(config)?;
    let per_rep: Vec<Vec<MetricsRow>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let profiles = scenario.stream(rep)?;
            kinds.iter().map(|&kind| scenario.measure(kind, &profiles, rep)).collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_rep.into_iter().flatten().collect())
}

/// All five mechanisms on each stream, with OMZ run on the stream's
/// zero-interval variant.
pub fn run_comparison(config: &ScenarioConfig, replications: u64) -> Result<Vec<MetricsRow>> {
    let scenario = Scenario::new(config)?;
    let per_rep: Vec<Vec<MetricsRow>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let profiles = scenario.stream(rep)?;
            let impatient = zero_interval_variant(&profiles, config.deadline);
            MechanismKind::ALL
                .iter()
                .map(|&kind| {
                    let stream = if kind == MechanismKind::Omz { &impatient } else { &profiles };
                    scenario.measure(kind, stream, rep)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_rep.into_iter().flatten().collect())
}

pub fn write_metrics_csv<W: Write>(mut out: W, rows: &[MetricsRow]) -> Result<()> {
    writeln!(out, "# {METRICS_SCHEMA}")?;
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub mechanism: MechanismKind,
    pub replications: usize,
    pub value_mean: f64,
    pub value_sd: f64,
    pub payment_mean: f64,
    pub payment_sd: f64,
}

/// Mean and sample standard deviation per mechanism.
pub fn summarize(rows: &[MetricsRow]) -> Vec<SummaryRow> {
    let mut kinds: Vec<MechanismKind> = rows.iter().map(|r| r.mechanism).collect();
    kinds.sort();
    kinds.dedup();
    kinds
        .into_iter()
        .map(|kind| {
            let mine: Vec<&MetricsRow> = rows.iter().filter(|r| r.mechanism == kind).collect();
            let (value_mean, value_sd) = mean_sd(mine.iter().map(|r| r.value));
            let (payment_mean, payment_sd) = mean_sd(mine.iter().map(|r| r.payment));
            SummaryRow { mechanism: kind, replications: mine.len(), value_mean, value_sd, payment_mean, payment_sd }
        })
        .collect()
}

pub fn mean_sd(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let xs: Vec<f64> = values.collect();
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::RoiGeometry;

    fn tiny(interval_max: u32) -> ScenarioConfig {
        ScenarioConfig {
            geometry: RoiGeometry { roads_h: 1, roads_v: 1, length_m: 60.0, width_m: 40.0, spacing_m: 1.0 },
            deadline: 120,
            budget: rational::int(60),
            lambda: 0.3,
            interval_max,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn zero_replications_is_empty() {
        assert!(run_experiment(&tiny(0), &[MechanismKind::Omz], 0).unwrap().is_empty());
    }

    #[test]
    fn omz_rejects_interval_configs() {
        assert!(run_experiment(&tiny(10), &[MechanismKind::Omz], 1).is_err());
        assert!(run_experiment(&tiny(10), &[MechanismKind::Omg], 1).is_ok());
    }

    #[test]
    fn metrics_are_reproducible() {
        let run = || {
            let rows = run_experiment(&tiny(0), &MechanismKind::ALL, 3).unwrap();
            let mut buf = Vec::new();
            write_metrics_csv(&mut buf, &rows).unwrap();
            buf
        };
        let first = run();
        assert_eq!(first, run());
        let text = String::from_utf8(first).unwrap();
        assert!(text.starts_with("# crowdsense-metrics/1\nreplication,seed,mechanism,"));
        assert_eq!(text.lines().count(), 2 + 3 * 5);
    }

    #[test]
    fn comparison_respects_budget_and_rationality() {
        let rows = run_comparison(&tiny(15), 4).unwrap();
        assert_eq!(rows.len(), 20);
        for row in &rows {
            assert!(row.payment <= 60.0 + 1e-9, "{row:?}");
            if let Some(min) = row.utility_min {
                assert!(min >= 0.0, "{row:?}");
            }
        }
        let summary = summarize(&rows);
        assert_eq!(summary.len(), 5);
        assert!(summary.iter().all(|s| s.replications == 4));
    }

    #[test]
    fn mean_and_sd() {
        let (m, s) = mean_sd([2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0].into_iter());
        assert_eq!(m, 5.0);
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    }
}
