//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use ehw_recovery::analog::Benchmark;
use ehw_recovery::device::{find_builtin, Configuration, DeviceProfile};

pub const DIVIDER_WEIGHTS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
pub const DIVIDER_TARGET: f64 = 0.5;
pub const DIVIDER_WORST: f64 = 1.0;

/// Divider fitness from series/parallel reasoning: closed switches on each
/// side add conductance, and `ratio = G_top / (G_top + G_bottom)`. Bit `i` of
/// `closed` is switch `s_i`; switches in `stuck_open` never conduct.
pub fn divider_fitness(closed: u8, stuck_open: &[usize]) -> f64 {
    let on = |i: usize| closed & (1 << i) != 0 && !stuck_open.contains(&i);
    let top: f64 = (0..4).filter(|&i| on(i)).map(|i| DIVIDER_WEIGHTS[i]).sum();
    let bottom: f64 = (0..4)
        .filter(|&i| on(i + 4))
        .map(|i| DIVIDER_WEIGHTS[i])
        .sum();
    if top + bottom == 0.0 {
        // output floats: nothing to measure
        return DIVIDER_WORST;
    }
    (top / (top + bottom) - DIVIDER_TARGET).abs()
}

/// `(fitness, configurations achieving it)` over all 256 switch settings.
pub fn divider_optimum(stuck_open: &[usize]) -> (f64, Vec<u8>) {
    let best = (0..=255u8)
        .map(|c| divider_fitness(c, stuck_open))
        .fold(f64::INFINITY, f64::min);
    let winners = (0..=255u8)
        .filter(|&c| divider_fitness(c, stuck_open) == best)
        .collect();
    (best, winners)
}

/// Bitstring with `s0` first, as accepted by `Configuration::set_prefix`.
pub fn switch_string(closed: u8) -> String {
    (0..8)
        .map(|i| if closed & (1 << i) != 0 { '1' } else { '0' })
        .collect()
}

pub fn config_for(benchmark: &Benchmark, device: &str) -> Configuration {
    let device: Arc<DeviceProfile> = Arc::new(find_builtin(device).unwrap());
    let map = Arc::new(benchmark.decode_map(&device).unwrap());
    Configuration::zeros(device, map).unwrap()
}

/// Unit step response of `wn^2 / (s^2 + 2 zeta wn s + wn^2)` for `zeta < 1`.
pub fn underdamped_step(t: f64, zeta: f64, wn: f64) -> f64 {
    let wd = wn * (1.0 - zeta * zeta).sqrt();
    let phi = zeta.acos();
    1.0 - (-zeta * wn * t).exp() / (1.0 - zeta * zeta).sqrt() * (wd * t + phi).sin()
}

/// First sample time after the last sample outside `band` around `final_value`,
/// scanning `f` on a uniform grid of `n + 1` points over `[0, window]`.
pub fn brute_force_settling(
    f: impl Fn(f64) -> f64,
    final_value: f64,
    band: f64,
    window: f64,
    n: usize,
) -> Option<f64> {
    let dt = window / n as f64;
    let tol = band * final_value.abs();
    let mut last_outside = None;
    for i in 0..=n {
        if (f(i as f64 * dt) - final_value).abs() > tol {
            last_outside = Some(i);
        }
    }
    match last_outside {
        None => Some(0.0),
        Some(i) if i == n => None,
        Some(i) => Some((i + 1) as f64 * dt),
    }
}

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.scenario"))
}

pub const BUNDLED_SCENARIOS: [&str; 3] = ["example2", "fpta-divider", "ispPAC10-infeasible"];
