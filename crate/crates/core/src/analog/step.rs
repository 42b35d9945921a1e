use std::io;
use std::time::Duration;

use super::tf::{StateSpace, TransferFunction};
use super::SimError;

/// Default number of integration steps per observation window.
pub const DEFAULT_STEPS: usize = 4096;
/// Default settling band, as a fraction of the final value.
pub const DEFAULT_BAND: f64 = 0.02;
/// Responses whose magnitude exceeds this multiple of `max(1, |final|)` are
/// treated as diverging.
pub const DEFAULT_DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse {
    /// Sample instants in model seconds, uniform step starting at 0.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Asymptotic output (DC gain); `None` when the system has a pole at 0.
    pub final_value: Option<f64>,
    /// `None` means did-not-settle.
    pub settling_time: Option<f64>,
    /// Hardware time the test occupies.
    pub test_duration: Duration,
    /// Set when the trace diverged and integration stopped early.
    pub unstable: bool,
}

impl StepResponse {
    /// Writes `time,value` rows.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "value"])?;
        for (t, y) in self.times.iter().zip(&self.values) {
            w.write_record([t.to_string(), y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub band: f64,
    pub divergence_factor: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            band: DEFAULT_BAND,
            divergence_factor: DEFAULT_DIVERGENCE_FACTOR,
        }
    }
}

/// Smallest sample time after which every sample stays within
/// `band·|final|` of `final` (absolute `band` when `final` is 0).
pub fn settling_time(times: &[f64], values: &[f64], final_value: f64, band: f64) -> Option<f64> {
    debug_assert_eq!(times.len(), values.len());
    let tol = if final_value == 0.0 {
        band
    } else {
        band * final_value.abs()
    };
    let outside = |y: &f64| y.is_nan() || (y - final_value).abs() > tol;
    match values.iter().rposition(outside) {
        None => times.first().copied(),
        Some(last) if last + 1 == values.len() => None,
        Some(last) => Some(times[last + 1]),
    }
}

/// Unit-step response over `[0, window]` by classical fixed-step RK4 on the
/// controllable canonical realization.
pub fn step_response(
    tf: &TransferFunction,
    window: f64,
    dt: f64,
) -> Result<StepResponse, SimError> {
    step_response_with(tf, window, dt, StepOptions::default())
}

pub fn step_response_with(
    tf: &TransferFunction,
    window: f64,
    dt: f64,
    opts: StepOptions,
) -> Result<StepResponse, SimError> {
    if !(window.is_finite() && window > 0.0) {
        return Err(SimError::InvalidWindow(format!(
            "window {window} must be positive"
        )));
    }
    if !(dt.is_finite() && dt > 0.0 && dt < window) {
        return Err(SimError::InvalidWindow(format!(
            "dt {dt} must lie in (0, window)"
        )));
    }
    let ss = StateSpace::controllable_canonical(tf);
    let n = ss.order();
    let steps = (window / dt).round() as usize;
    let final_value = tf.dc_gain();
    let bound = opts.divergence_factor * final_value.map_or(1.0, f64::abs).max(1.0);

    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let mut x = vec![0.0; n];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let u = 1.0;
    let mut unstable = false;

    for i in 0..=steps {
        let y = ss.output(&x, u);
        times.push(i as f64 * dt);
        values.push(y);
        if y.is_nan() || y.abs() > bound {
            unstable = true;
            break;
        }
        if i == steps {
            break;
        }
        ss.derivative(&x, u, &mut k1);
        for j in 0..n {
            tmp[j] = x[j] + 0.5 * dt * k1[j];
        }
        ss.derivative(&tmp, u, &mut k2);
        for j in 0..n {
            tmp[j] = x[j] + 0.5 * dt * k2[j];
        }
        ss.derivative(&tmp, u, &mut k3);
        for j in 0..n {
            tmp[j] = x[j] + dt * k3[j];
        }
        ss.derivative(&tmp, u, &mut k4);
        for j in 0..n {
            x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }

    let settling = match (unstable, final_value) {
        (false, Some(f)) => settling_time(&times, &values, f, opts.band),
        _ => None,
    };
    Ok(StepResponse {
        times,
        values,
        final_value,
        settling_time: settling,
        test_duration: Duration::from_secs_f64(window),
        unstable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_order() -> TransferFunction {
        TransferFunction::new(vec![1.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn first_order_settles_at_ln50() {
        let window = 10.0;
        let dt = window / DEFAULT_STEPS as f64;
        let r = step_response(&first_order(), window, dt).unwrap();
        let expected = 50f64.ln();
        let ts = r.settling_time.unwrap();
        assert!(
            (ts - expected).abs() <= dt,
            "ts = {ts}, expected {expected}"
        );
        assert_eq!(r.times.len(), DEFAULT_STEPS + 1);
        assert_eq!(r.final_value, Some(1.0));
    }

    #[test]
    fn pure_gain_settles_immediately() {
        let r = step_response(&TransferFunction::gain(1.0), 1.0, 0.01).unwrap();
        assert_eq!(r.settling_time, Some(0.0));
        assert!(r.values.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn integrator_never_settles() {
        let integ = TransferFunction::new(vec![1.0], vec![1.0, 0.0]).unwrap();
        for window in [1.0, 100.0, 1e4] {
            let r = step_response(&integ, window, window / 512.0).unwrap();
            assert_eq!(r.settling_time, None);
            assert!(!r.unstable);
        }
    }

    #[test]
    fn unstable_is_flagged_and_truncated() {
        let unstable = TransferFunction::new(vec![1.0], vec![1.0, -5.0]).unwrap();
        let r = step_response(&unstable, 10.0, 0.001).unwrap();
        assert!(r.unstable);
        assert_eq!(r.settling_time, None);
        assert_eq!(r.times.len(), r.values.len());
        assert!(r.times.len() < 10_001);
    }

    #[test]
    fn bad_windows() {
        assert!(step_response(&first_order(), 0.0, 0.1).is_err());
        assert!(step_response(&first_order(), 1.0, 1.0).is_err());
        assert!(step_response(&first_order(), 1.0, -0.1).is_err());
    }

    #[test]
    fn settling_scan_edge_cases() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(settling_time(&t, &[1.0; 4], 1.0, 0.02), Some(0.0));
        assert_eq!(settling_time(&t, &[1.0, 1.0, 1.0, 1.5], 1.0, 0.02), None);
        assert_eq!(
            settling_time(&t, &[0.0, 0.5, 0.99, 1.01], 1.0, 0.02),
            Some(2.0)
        );
        // absolute band around zero
        assert_eq!(
            settling_time(&t, &[1.0, 0.5, 0.01, -0.01], 0.0, 0.02),
            Some(2.0)
        );
        assert_eq!(
            settling_time(&t, &[f64::NAN, 1.0, 1.0, 1.0], 1.0, 0.02),
            Some(1.0)
        );
    }

    #[test]
    fn final_value_matches_dc_gain() {
        let tfs = [
            TransferFunction::new(vec![3.0], vec![1.0, 2.0]).unwrap(),
            TransferFunction::new(vec![2.0, 5.0], vec![1.0, 3.0, 4.0]).unwrap(),
        ];
        for tf in tfs {
            let dc = tf.dc_gain().unwrap();
            // slowest time constant is at most 1 s for both
            let r = step_response(&tf, 20.0, 20.0 / 4096.0).unwrap();
            let last = *r.values.last().unwrap();
            assert!(((last - dc) / dc).abs() < 1e-6, "{last} vs {dc}");
        }
    }

    #[test]
    fn csv_export() {
        let r = step_response(&TransferFunction::gain(2.0), 1.0, 0.5).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time,value\n0,2\n0.5,2\n1,2\n"
        );
    }
}
