use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::{PoiGrid, ScenarioConfig};
use crate::error::{invalid, Result};
use crate::model::{UserId, UserProfile};
use crate::rational::{self, ratio, Rational};

/// SplitMix64 finalizer over `(master, index)`; gives independent sub-seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn cents(value: &Rational, round_up: bool) -> i64 {
    let scaled = value * rational::int(100);
    let whole = if round_up { scaled.ceil() } else { scaled.floor() };
    whole.to_integer().try_into().unwrap_or(i64::MAX)
}

/// Poisson arrivals over steps `1..=T`, each user at a uniformly random PoI
/// with cent-granular uniform cost and uniform integer interval.
///
/// Intervals come from their own RNG stream, so configs differing only in
/// `interval_max` share arrivals, locations and costs. With
/// `interval_max = 0` surplus arrivals in a step move to the next free step
/// and users pushed past `T` are dropped, giving distinct arrivals.
pub fn generate_user_stream(config: &ScenarioConfig, grid: &PoiGrid, seed: u64) -> Result<Vec<UserProfile>> {
    config.validate()?;
    if grid.is_empty() {
        return Err(invalid("PoI grid is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut interval_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
    let arrivals = Poisson::new(config.lambda).map_err(|e| invalid(format!("lambda: {e}")))?;
    let (lo, hi) = (cents(&config.cost_lo, true), cents(&config.cost_hi, false));
    if lo > hi {
        return Err(invalid("cost range holds no whole cent"));
    }
    let mut profiles = Vec::new();
    for t in 1..=config.deadline {
        let count = arrivals.sample(&mut rng) as u64;
        for _ in 0..count {
            let poi = rng.random_range(0..grid.len());
            let cost = ratio(rng.random_range(lo..=hi), 100);
            let interval = interval_rng.random_range(0..=config.interval_max);
            let id = UserId(profiles.len() as u32 + 1);
            let departure = t.saturating_add(interval).min(config.deadline);
            profiles.push(UserProfile::new(id, t, departure, grid.covered(poi, config.radius_m), cost)?);
        }
    }
    if config.interval_max == 0 {
        profiles = distinct_arrivals(profiles, config.deadline);
    }
    Ok(profiles)
}

/// Zero-interval copy of a stream with distinct arrivals: every user departs
/// on arrival, surplus arrivals shift to the next free step, and users
/// shifted past `deadline` are dropped.
pub fn zero_interval_variant(profiles: &[UserProfile], deadline: u32) -> Vec<UserProfile> {
    let zeroed = profiles.iter().map(|p| UserProfile { departure: p.arrival, ..p.clone() }).collect();
    distinct_arrivals(zeroed, deadline)
}

fn distinct_arrivals(mut profiles: Vec<UserProfile>, deadline: u32) -> Vec<UserProfile> {
    profiles.sort_by_key(|p| (p.arrival, p.id));
    let mut next_free = 0;
    profiles.retain_mut(|p| {
        let slot = p.arrival.max(next_free);
        if slot > deadline {
            return false;
        }
        p.arrival = slot;
        p.departure = slot;
        next_free = slot + 1;
        true
    });
    profiles
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::RoiGeometry;
    use std::collections::BTreeSet;

    fn small() -> (ScenarioConfig, PoiGrid) {
        let config = ScenarioConfig {
            geometry: RoiGeometry { roads_h: 1, roads_v: 1, length_m: 40.0, width_m: 30.0, spacing_m: 1.0 },
            deadline: 200,
            lambda: 0.8,
            interval_max: 20,
            ..ScenarioConfig::default()
        };
        let grid = PoiGrid::generate(&config.geometry).unwrap();
        (config, grid)
    }

    #[test]
    fn deterministic_per_seed() {
        let (config, grid) = small();
        let a = generate_user_stream(&config, &grid, 7).unwrap();
        assert_eq!(a, generate_user_stream(&config, &grid, 7).unwrap());
        assert_ne!(a, generate_user_stream(&config, &grid, 8).unwrap());
    }

    #[test]
    fn profiles_are_well_formed() {
        let (config, grid) = small();
        let users = generate_user_stream(&config, &grid, 3).unwrap();
        assert!(!users.is_empty());
        for u in &users {
            assert!(!u.tasks.is_empty());
            assert!(u.tasks.len() <= 29);
            assert!(u.arrival >= 1 && u.arrival <= u.departure && u.departure <= config.deadline);
            assert!(u.departure - u.arrival <= config.interval_max);
            assert!(u.cost >= config.cost_lo && u.cost <= config.cost_hi);
            assert!((&u.cost * rational::int(100)).is_integer());
        }
    }

    #[test]
    fn zero_interval_streams_have_distinct_arrivals() {
        let (mut config, grid) = small();
        config.interval_max = 0;
        config.lambda = 1.5;
        let users = generate_user_stream(&config, &grid, 11).unwrap();
        let arrivals: BTreeSet<u32> = users.iter().map(|u| u.arrival).collect();
        assert_eq!(arrivals.len(), users.len());
        assert!(users.iter().all(|u| u.arrival == u.departure && u.departure <= config.deadline));
    }

    #[test]
    fn interval_draws_do_not_disturb_other_fields() {
        let (config, grid) = small();
        let spread = generate_user_stream(&config, &grid, 5).unwrap();
        let narrow = generate_user_stream(&ScenarioConfig { interval_max: 3, ..config.clone() }, &grid, 5).unwrap();
        assert_eq!(spread.len(), narrow.len());
        for (a, b) in spread.iter().zip(&narrow) {
            assert_eq!((a.arrival, &a.tasks, &a.cost), (b.arrival, &b.tasks, &b.cost));
        }
    }

    #[test]
    fn variant_shifts_and_drops() {
        let tasks = vec![0];
        let mk = |id, a, d| UserProfile::new(UserId(id), a, d, tasks.clone(), rational::int(1)).unwrap();
        let users = vec![mk(1, 1, 3), mk(2, 1, 1), mk(3, 2, 4), mk(4, 4, 4), mk(5, 4, 4)];
        let shifted = zero_interval_variant(&users, 4);
        let slots: Vec<(u32, u32)> = shifted.iter().map(|u| (u.id.0, u.arrival)).collect();
        assert_eq!(slots, vec![(1, 1), (2, 2), (3, 3), (4, 4)]);
    }

    #[test]
    fn sub_seeds_differ() {
        let seeds: BTreeSet<u64> = (0..1000).map(|k| derive_seed(42, k)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
