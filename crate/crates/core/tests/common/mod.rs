#![allow(dead_code)]

use crowdsense::calibration::{constraint_residual, CalibrationModel};

/// Brute-force optimum of `2 alpha / delta` for the oracle comparison.
///
/// Walks `alpha` on a 1e-4 grid; for each, scans `delta` upward from 1 in
/// 1e-3 steps to the first sign change of the constraint residual and
/// interpolates linearly. No use of the quadratic form.
pub fn grid_oracle(model: CalibrationModel, omega: f64) -> Option<(f64, f64, f64)> {
    let mut best: Option<(f64, f64, f64)> = None;
    let mut k = 1;
    while (k as f64) * 1e-4 < 0.5 {
        let alpha = k as f64 * 1e-4;
        k += 1;
        let mut prev_delta = 1.0;
        let mut prev = constraint_residual(model, omega, alpha, prev_delta);
        let mut step = 1;
        while step <= 60_000 {
            let delta = 1.0 + step as f64 * 1e-3;
            let here = constraint_residual(model, omega, alpha, delta);
            if prev < 0.0 && here >= 0.0 {
                let root = prev_delta + (delta - prev_delta) * (-prev) / (here - prev);
                let ratio = 2.0 * alpha / root;
                if best.is_none_or(|b| ratio > b.2) {
                    best = Some((alpha, root, ratio));
                }
                break;
            }
            prev = here;
            prev_delta = delta;
            step += 1;
        }
    }
    best
}
