//! Ratio-maximizing delta for both arrival models over a sweep of omega.

use crowdsense::calibration::{omega_sweep, solve_optimal_delta, CalibrationModel, CalibrationParams};

fn main() {
    for model in [CalibrationModel::Iid, CalibrationModel::Secretary] {
        println!("{}:", model.name());
        for omega in omega_sweep(10.0, 1e9, 17) {
            match solve_optimal_delta(CalibrationParams { omega, model }) {
                Some(r) => println!("  omega {omega:>12.1}  delta {:>9.5}  ratio {:.6}", r.delta, r.ratio),
                None => println!("  omega {omega:>12.1}  infeasible"),
            }
        }
    }
}
