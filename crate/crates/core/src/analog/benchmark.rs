use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::network::{ElementSpec, NetworkSpec, ResistiveNetwork};
use super::step::{step_response_with, StepOptions, StepResponse, DEFAULT_BAND, DEFAULT_STEPS};
use super::tf::TransferFunction;
use super::{BenchmarkError, SimError};
use crate::device::{
    apply_faults, gray_decode, read_field, Configuration, DecodeMap, DeviceKind, DeviceProfile,
    EffectiveCircuitState, FaultSpec, FieldDef, FieldKind, FieldSpec,
};
use crate::time::parse_duration;

/// Physical parameter: gain of the controlled plant.
pub const PLANT_GAIN: &str = "plant_gain";
/// Physical parameter: on-conductance of FPTA switches.
pub const SWITCH_CONDUCTANCE: &str = "g_on";

/// Multiple of the simulation horizon charged as fitness when a response
/// never settles or the configuration cannot be decoded.
pub const NO_SETTLE_PENALTY: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangePolicy {
    /// Out-of-range codes saturate at the last level.
    #[default]
    Clamp,
    /// Out-of-range codes are decode errors.
    Reject,
}

/// What the decoded circuit must do.
#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    /// Evolve PID-type gains (`kp`, `ki`, `kd` fields) around a fixed plant
    /// under unity feedback; fitness is the closed-loop settling time.
    StepResponse {
        plant: TransferFunction,
        /// Simulated span of the test, in model seconds.
        horizon: f64,
        steps: usize,
        max_settling_time: f64,
    },
    /// Configure a switched resistive network; fitness is the DC ratio error.
    DcRatio {
        network: NetworkSpec,
        target_ratio: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub id: String,
    pub device_kind: DeviceKind,
    pub fields: Vec<FieldDef>,
    pub task: Task,
    /// Hardware duration of one fitness test.
    pub test_window: Duration,
    pub band: f64,
    pub out_of_range: RangePolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecodedCircuit {
    Controller {
        gains: ControllerGains,
        closed_loop: TransferFunction,
    },
    Network(ResistiveNetwork),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Measurement {
    /// Settling time in model seconds; `None` = did not settle.
    Settling(Option<f64>),
    DcRatio(f64),
    /// Decode or simulation failure, scored as worst fitness.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Lower is better.
    pub fitness: f64,
    pub logically_correct: bool,
    /// Hardware time the test occupied.
    pub t_eval: Duration,
    pub measurement: Measurement,
}

const CONTROLLER_GAINS: [&str; 3] = ["kp", "ki", "kd"];

impl Benchmark {
    pub fn validate(&self) -> Result<(), BenchmarkError> {
        let invalid = |m: String| {
            Err(BenchmarkError::Invalid {
                id: self.id.clone(),
                reason: m,
            })
        };
        if self.test_window.is_zero() {
            return invalid("test_window must be positive".into());
        }
        if !(self.band > 0.0 && self.band < 1.0) {
            return invalid(format!("band {} must lie in (0, 1)", self.band));
        }
        // field layout problems surface here rather than at run time
        DecodeMap::layout(&self.fields, self.active_bits(), self.physical_parameters()).map_err(
            |e| BenchmarkError::Invalid {
                id: self.id.clone(),
                reason: e.to_string(),
            },
        )?;
        match &self.task {
            Task::StepResponse {
                horizon,
                steps,
                max_settling_time,
                ..
            } => {
                if !(horizon.is_finite() && *horizon > 0.0) || *steps < 2 {
                    return invalid(
                        "step benchmarks need a positive horizon and at least 2 steps".into(),
                    );
                }
                if max_settling_time.is_nan() || *max_settling_time < 0.0 {
                    return invalid("max_settling_time must be nonnegative".into());
                }
                let mut any = false;
                for f in &self.fields {
                    match (&f.kind, CONTROLLER_GAINS.contains(&f.name.as_str())) {
                        (FieldKind::Param { .. }, true) => any = true,
                        (FieldKind::Reserved, _) => {}
                        _ => {
                            return invalid(format!(
                                "field `{}` is not a controller gain (kp, ki, kd)",
                                f.name
                            ))
                        }
                    }
                }
                if !any {
                    return invalid("no controller gain fields".into());
                }
            }
            Task::DcRatio {
                network,
                target_ratio,
            } => {
                network.validate().map_err(|e| BenchmarkError::Invalid {
                    id: self.id.clone(),
                    reason: e.to_string(),
                })?;
                if !(*target_ratio > 0.0 && *target_ratio < 1.0) {
                    return invalid(format!("target ratio {target_ratio} must lie in (0, 1)"));
                }
                for e in &network.elements {
                    if let Some(s) = &e.switch {
                        if !self
                            .fields
                            .iter()
                            .any(|f| &f.name == s && f.kind == FieldKind::Switch)
                        {
                            return invalid(format!("element references unknown switch `{s}`"));
                        }
                    }
                }
                if let Some(f) = self
                    .fields
                    .iter()
                    .find(|f| matches!(f.kind, FieldKind::Param { .. }))
                {
                    return invalid(format!(
                        "parameter field `{}` has no meaning in a network benchmark",
                        f.name
                    ));
                }
            }
        }
        Ok(())
    }

    fn active_bits(&self) -> usize {
        self.fields.iter().map(|f| f.width).sum()
    }

    pub fn physical_parameters(&self) -> Vec<String> {
        match self.task {
            Task::StepResponse { .. } => vec![PLANT_GAIN.to_string()],
            Task::DcRatio { .. } => vec![SWITCH_CONDUCTANCE.to_string()],
        }
    }

    /// Bitstream layout of this benchmark on `device`: the benchmark fields
    /// from bit 0, the remainder reserved.
    pub fn decode_map(&self, device: &DeviceProfile) -> Result<DecodeMap, BenchmarkError> {
        if device.kind() != self.device_kind {
            return Err(BenchmarkError::DeviceMismatch {
                benchmark: self.id.clone(),
                expected: self.device_kind,
                device: device.name().to_string(),
                actual: device.kind(),
            });
        }
        DecodeMap::layout(
            &self.fields,
            device.config_bits(),
            self.physical_parameters(),
        )
        .map_err(|e| BenchmarkError::Invalid {
            id: self.id.clone(),
            reason: e.to_string(),
        })
    }

    /// Fitness assigned to circuits that cannot be decoded or simulated.
    pub fn worst_fitness(&self) -> f64 {
        match self.task {
            Task::StepResponse { horizon, .. } => NO_SETTLE_PENALTY * horizon,
            Task::DcRatio { .. } => 1.0,
        }
    }

    fn param_value(&self, f: &FieldSpec, state: &EffectiveCircuitState) -> Result<f64, SimError> {
        let FieldKind::Param { min, max, .. } = f.kind else {
            unreachable!("only parameter fields are decoded to values");
        };
        if f.module.is_some_and(|m| state.dead_modules.contains(&m)) {
            return Ok(0.0);
        }
        let levels = f.level_count();
        let mut level = gray_decode(read_field(&state.bits, f.offset, f.width));
        if level >= levels {
            match self.out_of_range {
                RangePolicy::Clamp => level = levels - 1,
                RangePolicy::Reject => {
                    return Err(SimError::Decode(format!(
                        "`{}` level {level} exceeds {}",
                        f.name,
                        levels - 1
                    )))
                }
            }
        }
        let value = min + (max - min) * level as f64 / (levels - 1) as f64;
        Ok(value * state.drift_of(&f.name))
    }

    pub fn decode(&self, state: &EffectiveCircuitState) -> Result<DecodedCircuit, SimError> {
        let map = &state.decode_map;
        match &self.task {
            Task::StepResponse { plant, .. } => {
                let mut gains = ControllerGains::default();
                let mut has_integral = false;
                for f in map
                    .fields()
                    .iter()
                    .filter(|f| matches!(f.kind, FieldKind::Param { .. }))
                {
                    let v = self.param_value(f, state)?;
                    match f.name.as_str() {
                        "kp" => gains.kp = v,
                        "ki" => {
                            gains.ki = v;
                            has_integral = true;
                        }
                        "kd" => gains.kd = v,
                        other => {
                            return Err(SimError::Decode(format!("unexpected parameter `{other}`")))
                        }
                    }
                }
                let plant = plant.scale(state.drift_of(PLANT_GAIN));
                let closed_loop = if has_integral {
                    TransferFunction::closed_loop(
                        &[gains.kd, gains.kp, gains.ki],
                        &[1.0, 0.0],
                        &plant,
                    )?
                } else {
                    TransferFunction::closed_loop(&[gains.kd, gains.kp], &[1.0], &plant)?
                };
                Ok(DecodedCircuit::Controller { gains, closed_loop })
            }
            Task::DcRatio { network, .. } => {
                let g_on = state.drift_of(SWITCH_CONDUCTANCE);
                let closed = |e: &ElementSpec| -> Option<f64> {
                    match &e.switch {
                        None => Some(1.0),
                        Some(name) => {
                            let f = map.field(name)?;
                            let dead = f.module.is_some_and(|m| state.dead_modules.contains(&m));
                            (state.bits[f.offset] && !dead).then_some(g_on)
                        }
                    }
                };
                Ok(DecodedCircuit::Network(network.realize(closed)?))
            }
        }
    }

    fn step_options(&self) -> StepOptions {
        StepOptions {
            band: self.band,
            ..StepOptions::default()
        }
    }

    /// Closed-loop step trace for a step-response benchmark.
    pub fn simulate(&self, closed_loop: &TransferFunction) -> Result<StepResponse, SimError> {
        let Task::StepResponse { horizon, steps, .. } = &self.task else {
            return Err(SimError::Decode(format!(
                "`{}` is not a step-response benchmark",
                self.id
            )));
        };
        let mut r = step_response_with(
            closed_loop,
            *horizon,
            horizon / *steps as f64,
            self.step_options(),
        )?;
        r.test_duration = self.test_window;
        Ok(r)
    }

    /// Scores an effective circuit state. Failures become worst-fitness
    /// evaluations; the hardware test window is charged regardless.
    pub fn evaluate_state(&self, state: &EffectiveCircuitState) -> Evaluation {
        let failed = |msg: String| Evaluation {
            fitness: self.worst_fitness(),
            logically_correct: false,
            t_eval: self.test_window,
            measurement: Measurement::Failed(msg),
        };
        let decoded = match self.decode(state) {
            Ok(d) => d,
            Err(e) => return failed(e.to_string()),
        };
        match (&self.task, decoded) {
            (
                Task::StepResponse {
                    max_settling_time, ..
                },
                DecodedCircuit::Controller { closed_loop, .. },
            ) => {
                let response = match self.simulate(&closed_loop) {
                    Ok(r) => r,
                    Err(e) => return failed(e.to_string()),
                };
                let fitness = response.settling_time.unwrap_or(self.worst_fitness());
                Evaluation {
                    fitness,
                    logically_correct: response
                        .settling_time
                        .is_some_and(|t| t <= *max_settling_time),
                    t_eval: self.test_window,
                    measurement: Measurement::Settling(response.settling_time),
                }
            }
            (Task::DcRatio { target_ratio, .. }, DecodedCircuit::Network(net)) => {
                match net.dc_ratio() {
                    Ok(ratio) => {
                        let fitness = (ratio - target_ratio).abs();
                        Evaluation {
                            fitness,
                            logically_correct: fitness <= self.band,
                            t_eval: self.test_window,
                            measurement: Measurement::DcRatio(ratio),
                        }
                    }
                    Err(e) => failed(e.to_string()),
                }
            }
            _ => unreachable!("decode yields the circuit type of the task"),
        }
    }

    /// Checks that `config` was laid out for this benchmark.
    pub fn check_configuration(&self, config: &Configuration) -> Result<(), BenchmarkError> {
        let expected = self.decode_map(config.device())?;
        if **config.decode_map() != expected {
            return Err(BenchmarkError::LayoutMismatch(self.id.clone()));
        }
        Ok(())
    }
}

/// Decodes, simulates and scores `config` running on hardware with `faults`.
pub fn evaluate(
    benchmark: &Benchmark,
    config: &Configuration,
    faults: &[FaultSpec],
) -> Result<Evaluation, BenchmarkError> {
    benchmark.check_configuration(config)?;
    let state = apply_faults(config, faults)?;
    Ok(benchmark.evaluate_state(&state))
}

/// Step-response benchmark standing in for an aging-compensation loop: a PD
/// controller around `1/(s^2 + 0.6 s + 1)`. The 20 s simulated horizon maps
/// onto a 625 ms hardware test.
pub fn example2_compensator() -> Benchmark {
    Benchmark {
        id: "example2-compensator".into(),
        device_kind: DeviceKind::Fpaa,
        fields: vec![
            FieldDef {
                name: "kp".into(),
                width: 8,
                kind: FieldKind::Param {
                    min: 1.0,
                    max: 26.5,
                    levels: None,
                },
                module: Some(0),
            },
            FieldDef {
                name: "kd".into(),
                width: 8,
                kind: FieldKind::Param {
                    min: 0.0,
                    max: 12.75,
                    levels: None,
                },
                module: Some(1),
            },
        ],
        task: Task::StepResponse {
            plant: TransferFunction::new(vec![1.0], vec![1.0, 0.6, 1.0]).expect("static plant"),
            horizon: 20.0,
            steps: DEFAULT_STEPS,
            max_settling_time: 1.3,
        },
        test_window: Duration::from_millis(625),
        band: DEFAULT_BAND,
        out_of_range: RangePolicy::Clamp,
    }
}

/// Eight-switch FPTA voltage divider: four binary-weighted transistor
/// conductances (1, 2, 4, 8 units) from the input to the output node, four
/// more from the output to ground. Target ratio 0.5.
pub fn fpta_divider() -> Benchmark {
    let weights = [1.0, 2.0, 4.0, 8.0];
    let mut fields = Vec::new();
    let mut elements = Vec::new();
    for (side, (from, to)) in [("in", "out"), ("out", "gnd")].into_iter().enumerate() {
        for (i, w) in weights.iter().enumerate() {
            let name = format!("s{}", side * 4 + i);
            fields.push(FieldDef {
                name: name.clone(),
                width: 1,
                kind: FieldKind::Switch,
                module: Some(side as u32),
            });
            elements.push(ElementSpec {
                from: from.into(),
                to: to.into(),
                conductance: *w,
                switch: Some(name),
            });
        }
    }
    Benchmark {
        id: "fpta-divider".into(),
        device_kind: DeviceKind::Fpta,
        fields,
        task: Task::DcRatio {
            network: NetworkSpec {
                nodes: vec!["in".into(), "out".into(), "gnd".into()],
                source: "in".into(),
                ground: "gnd".into(),
                output: "out".into(),
                elements,
            },
            target_ratio: 0.5,
        },
        test_window: Duration::from_millis(1),
        band: DEFAULT_BAND,
        out_of_range: RangePolicy::Clamp,
    }
}

pub fn builtin_benchmarks() -> Vec<Benchmark> {
    vec![example2_compensator(), fpta_divider()]
}

pub fn find_benchmark(id: &str) -> Option<Benchmark> {
    builtin_benchmarks().into_iter().find(|b| b.id == id)
}

/// Serializable benchmark description used by scenario files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkDef {
    pub id: String,
    pub kind: DeviceKind,
    pub test_window: String,
    #[serde(default = "default_band")]
    pub band: f64,
    #[serde(default)]
    pub out_of_range: RangePolicy,
    pub fields: Vec<FieldDef>,
    #[serde(default)]
    pub step: Option<StepDef>,
    #[serde(default)]
    pub dc: Option<DcDef>,
}

fn default_band() -> f64 {
    DEFAULT_BAND
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDef {
    pub plant: TransferFunction,
    pub horizon_s: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    pub max_settling_s: f64,
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcDef {
    pub network: NetworkSpec,
    pub target_ratio: f64,
}

impl TryFrom<BenchmarkDef> for Benchmark {
    type Error = BenchmarkError;

    fn try_from(d: BenchmarkDef) -> Result<Self, BenchmarkError> {
        let invalid = |reason: String| BenchmarkError::Invalid {
            id: d.id.clone(),
            reason,
        };
        let test_window =
            parse_duration(&d.test_window, "ms").map_err(|e| invalid(e.to_string()))?;
        let task = match (d.step, d.dc) {
            (Some(s), None) => Task::StepResponse {
                plant: s.plant,
                horizon: s.horizon_s,
                steps: s.steps,
                max_settling_time: s.max_settling_s,
            },
            (None, Some(dc)) => Task::DcRatio {
                network: dc.network,
                target_ratio: dc.target_ratio,
            },
            _ => {
                return Err(invalid(
                    "exactly one of `step` or `dc` must be given".into(),
                ))
            }
        };
        let b = Benchmark {
            id: d.id,
            device_kind: d.kind,
            fields: d.fields,
            task,
            test_window,
            band: d.band,
            out_of_range: d.out_of_range,
        };
        b.validate()?;
        Ok(b)
    }
}
