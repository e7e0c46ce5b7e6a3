use std::fmt::Write as _;
use std::str::FromStr;

use super::RoiGeometry;
use crate::error::{invalid, Error, Result};
use crate::online::{DeltaPolicy, OnlineConfig};
use crate::rational::{self, int, ratio, Rational};

/// Everything needed to generate and run one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub geometry: RoiGeometry,
    /// Deadline `T` in one-second steps.
    pub deadline: u32,
    pub budget: Rational,
    /// Poisson arrival rate per step.
    pub lambda: f64,
    /// Sensing radius in metres.
    pub radius_m: f64,
    pub cost_lo: Rational,
    pub cost_hi: Rational,
    /// Arrival-departure intervals are uniform on `0..=interval_max` steps.
    pub interval_max: u32,
    pub epsilon: Rational,
    pub delta: DeltaPolicy,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            geometry: RoiGeometry::default(),
            deadline: 1800,
            budget: int(5000),
            lambda: 0.6,
            radius_m: 7.0,
            cost_lo: int(1),
            cost_hi: int(10),
            interval_max: 300,
            epsilon: int(1),
            delta: DeltaPolicy::default(),
            seed: 1,
        }
    }
}

const KEYS: [&str; 17] = [
    "roads_h",
    "roads_v",
    "length_m",
    "width_m",
    "spacing_m",
    "T",
    "B",
    "lambda",
    "R",
    "cost_lo",
    "cost_hi",
    "interval_max",
    "epsilon",
    "delta_initial",
    "delta_target",
    "delta_switch",
    "seed",
];

impl ScenarioConfig {
    /// Desk-scale variant: 500 PoIs, `T = 600`, `lambda = 0.4`, `B = 800`.
    pub fn scaled() -> Self {
        Self { geometry: RoiGeometry::scaled(), deadline: 600, budget: int(800), lambda: 0.4, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.deadline == 0 {
            return Err(invalid("T must be at least 1"));
        }
        if !rational::is_positive(&self.budget) {
            return Err(invalid("B must be positive"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(invalid("lambda must be positive"));
        }
        if !(self.radius_m.is_finite() && self.radius_m > 0.0) {
            return Err(invalid("R must be positive"));
        }
        if self.cost_lo < ratio(1, 100) || self.cost_hi < self.cost_lo {
            return Err(invalid("costs need 0.01 <= cost_lo <= cost_hi"));
        }
        if !rational::is_positive(&self.epsilon) {
            return Err(invalid("epsilon must be positive"));
        }
        if self.delta.initial < int(1) || self.delta.target < int(1) {
            return Err(invalid("delta must be at least 1"));
        }
        Ok(())
    }

    pub fn online_config(&self) -> OnlineConfig {
        OnlineConfig::new(self.budget.clone(), self.deadline)
            .with_epsilon(self.epsilon.clone())
            .with_delta(self.delta.clone())
    }

    /// Parses `key = value` lines; `#` starts a comment. Keys not given keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or_default().trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Config { line, message: format!("expected key = value, got '{content}'") })?;
            config.set(key.trim(), value.trim()).map_err(|message| Error::Config { line, message })?;
        }
        config.validate()?;
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value.parse().map_err(|_| format!("{key}: cannot parse '{value}'"))
        }
        let exact = |value: &str| rational::parse(value).map_err(|e| format!("{key}: {e}"));
        match key {
            "roads_h" => self.geometry.roads_h = num(key, value)?,
            "roads_v" => self.geometry.roads_v = num(key, value)?,
            "length_m" => self.geometry.length_m = num(key, value)?,
            "width_m" => self.geometry.width_m = num(key, value)?,
            "spacing_m" => self.geometry.spacing_m = num(key, value)?,
            "T" => self.deadline = num(key, value)?,
            "B" => self.budget = exact(value)?,
            "lambda" => self.lambda = num(key, value)?,
            "R" => self.radius_m = num(key, value)?,
            "cost_lo" => self.cost_lo = exact(value)?,
            "cost_hi" => self.cost_hi = exact(value)?,
            "interval_max" => self.interval_max = num(key, value)?,
            "epsilon" => self.epsilon = exact(value)?,
            "delta_initial" => self.delta.initial = exact(value)?,
            "delta_target" => self.delta.target = exact(value)?,
            "delta_switch" => self.delta.switch_size = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            _ => return Err(format!("unknown key '{key}' (expected one of {})", KEYS.join(", "))),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let g = &self.geometry;
        let f = rational::format;
        let mut out = String::new();
        let values = [
            g.roads_h.to_string(),
            g.roads_v.to_string(),
            g.length_m.to_string(),
            g.width_m.to_string(),
            g.spacing_m.to_string(),
            self.deadline.to_string(),
            f(&self.budget),
            self.lambda.to_string(),
            self.radius_m.to_string(),
            f(&self.cost_lo),
            f(&self.cost_hi),
            self.interval_max.to_string(),
            f(&self.epsilon),
            f(&self.delta.initial),
            f(&self.delta.target),
            self.delta.switch_size.to_string(),
            self.seed.to_string(),
        ];
        for (key, value) in KEYS.iter().zip(values) {
            writeln!(out, "{key} = {value}").expect("writing to a String");
        }
        out
    }
}
