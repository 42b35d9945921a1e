//! Scenario files: TOML documents binding a device, a benchmark, injected
//! faults, EA parameters, a recovery requirement and a list of seeds.
//!
//! ```toml
//! schema = 1
//! device = "FPTA2"
//! benchmark = "fpta-divider"
//! seeds = { start = 1, count = 50 }
//!
//! [[faults]]
//! switch = 0
//! mode = "stuck_open"
//!
//! [ea]
//! preset = "high-pressure-mutation"
//! population_size = 10
//! max_generations = 30
//! mutation_rate = 0.15
//!
//! [requirement]
//! deadline = "1s"
//! classification = "hard"
//! ```

use std::collections::BTreeSet;
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use toml::Spanned;

use super::ScenarioError;
use crate::analog::{find_benchmark, Benchmark, BenchmarkDef};
use crate::device::{
    find_builtin, Configuration, DeviceProfile, FaultMode, FaultSpec, FaultTarget, ProfileRecord,
};
use crate::evolution::{EAParams, Preset, Selection};
use crate::ledger::{Criticality, DeadlineBoundary, RecoveryRequirement};
use crate::time::parse_duration;

pub const SCHEMA_VERSION: i64 = 1;

/// A validated scenario with every reference resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub device: Arc<DeviceProfile>,
    pub benchmark: Benchmark,
    pub faults: Vec<FaultSpec>,
    /// `rng_seed` is replaced by each campaign seed.
    pub ea: EAParams,
    /// Active-prefix bits of the pre-fault configuration, used as one
    /// generation-0 individual.
    pub warm_start: Option<String>,
    pub requirement: RecoveryRequirement,
    pub seeds: Vec<u64>,
}

impl Scenario {
    /// Parameters for one seed of the campaign.
    pub fn params_for(&self, seed: u64) -> EAParams {
        EAParams {
            rng_seed: seed,
            ..self.ea.clone()
        }
    }

    /// The pre-fault configuration, if any.
    pub fn warm_start_configuration(&self) -> Result<Option<Configuration>, ScenarioError> {
        let Some(bits) = &self.warm_start else {
            return Ok(None);
        };
        let invalid = |m: String| ScenarioError::Invalid {
            origin: self.name.clone(),
            message: m,
        };
        let map = Arc::new(
            self.benchmark
                .decode_map(&self.device)
                .map_err(|e| invalid(e.to_string()))?,
        );
        let mut c =
            Configuration::zeros(self.device.clone(), map).map_err(|e| invalid(e.to_string()))?;
        c.set_prefix(bits)
            .map_err(|e| invalid(format!("warm_start: {e}")))?;
        Ok(Some(c))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema: Spanned<i64>,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: Option<String>,
    device: Spanned<toml::Value>,
    benchmark: Spanned<toml::Value>,
    #[serde(default)]
    faults: Vec<Spanned<FaultDef>>,
    ea: Spanned<EaDef>,
    requirement: Spanned<RequirementDef>,
    seeds: Spanned<toml::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FaultDef {
    #[serde(default)]
    switch: Option<usize>,
    #[serde(default)]
    module: Option<u32>,
    #[serde(default)]
    parameter: Option<String>,
    mode: String,
    #[serde(default)]
    multiplier: Option<f64>,
    #[serde(default)]
    onset: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EaDef {
    #[serde(default)]
    preset: Option<Preset>,
    #[serde(default)]
    population_size: Option<usize>,
    #[serde(default)]
    max_generations: Option<usize>,
    #[serde(default)]
    selection: Option<Selection>,
    mutation_rate: f64,
    #[serde(default)]
    crossover_rate: Option<f64>,
    #[serde(default)]
    elitism: Option<usize>,
    #[serde(default)]
    stop_on_success: Option<bool>,
    #[serde(default)]
    warm_start: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RequirementDef {
    /// Bare numbers are seconds.
    deadline: String,
    classification: Criticality,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    boundary: DeadlineBoundary,
}

struct Locator<'a> {
    origin: &'a str,
    text: &'a str,
}

impl Locator<'_> {
    fn at(&self, span: Range<usize>, message: impl Into<String>) -> ScenarioError {
        let start = span.start.min(self.text.len());
        let before = &self.text[..start];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        ScenarioError::At {
            origin: self.origin.to_string(),
            line,
            column,
            message: message.into(),
        }
    }
}

fn resolve_device(loc: &Locator, v: Spanned<toml::Value>) -> Result<DeviceProfile, ScenarioError> {
    let span = v.span();
    match v.into_inner() {
        toml::Value::String(id) => find_builtin(&id).ok_or_else(|| {
            loc.at(
                span,
                format!("unknown device `{id}` (built-in: ispPAC10, AN220E04, FPTA2)"),
            )
        }),
        toml::Value::Table(t) => {
            let record: ProfileRecord =
                toml::Value::Table(t)
                    .try_into()
                    .map_err(|e: toml::de::Error| {
                        loc.at(span.clone(), format!("device: {}", e.message()))
                    })?;
            DeviceProfile::try_from(record).map_err(|e| loc.at(span, e.to_string()))
        }
        _ => Err(loc.at(span, "device must be a profile name or an inline table")),
    }
}

fn resolve_benchmark(loc: &Locator, v: Spanned<toml::Value>) -> Result<Benchmark, ScenarioError> {
    let span = v.span();
    match v.into_inner() {
        toml::Value::String(id) => find_benchmark(&id).ok_or_else(|| {
            loc.at(
                span,
                format!("unknown benchmark `{id}` (built-in: example2-compensator, fpta-divider)"),
            )
        }),
        toml::Value::Table(t) => {
            let def: BenchmarkDef =
                toml::Value::Table(t)
                    .try_into()
                    .map_err(|e: toml::de::Error| {
                        loc.at(span.clone(), format!("benchmark: {}", e.message()))
                    })?;
            Benchmark::try_from(def).map_err(|e| loc.at(span, e.to_string()))
        }
        _ => Err(loc.at(span, "benchmark must be a benchmark id or an inline table")),
    }
}

fn resolve_seeds(loc: &Locator, v: Spanned<toml::Value>) -> Result<Vec<u64>, ScenarioError> {
    let span = v.span();
    let as_seed = |x: &toml::Value| -> Result<u64, ScenarioError> {
        x.as_integer()
            .and_then(|i| u64::try_from(i).ok())
            .ok_or_else(|| {
                loc.at(
                    span.clone(),
                    format!("seed `{x}` must be a nonnegative integer"),
                )
            })
    };
    let seeds: Vec<u64> = match v.get_ref() {
        toml::Value::Array(items) => items.iter().map(as_seed).collect::<Result<_, _>>()?,
        toml::Value::Table(t) => {
            let extra: Vec<&String> = t
                .keys()
                .filter(|k| *k != "start" && *k != "count")
                .collect();
            if !extra.is_empty() {
                return Err(loc.at(
                    span,
                    format!(
                        "unknown seed range key `{}` (expected start, count)",
                        extra[0]
                    ),
                ));
            }
            let field = |k: &str| {
                t.get(k)
                    .ok_or_else(|| loc.at(span.clone(), format!("seed range needs `{k}`")))
            };
            let start = as_seed(field("start")?)?;
            let count = as_seed(field("count")?)?;
            let end = start
                .checked_add(count)
                .ok_or_else(|| loc.at(span.clone(), "seed range overflows"))?;
            (start..end).collect()
        }
        other => {
            return Err(loc.at(
                span,
                format!(
                    "seeds must be a list or {{ start, count }}, found {}",
                    other.type_str()
                ),
            ))
        }
    };
    if seeds.is_empty() {
        return Err(loc.at(span, "at least one seed is required"));
    }
    let unique: BTreeSet<u64> = seeds.iter().copied().collect();
    if unique.len() != seeds.len() {
        return Err(loc.at(span, "seeds must be distinct"));
    }
    Ok(seeds)
}

fn resolve_fault(loc: &Locator, f: Spanned<FaultDef>) -> Result<FaultSpec, ScenarioError> {
    let span = f.span();
    let f = f.into_inner();
    let target = match (f.switch, f.module, f.parameter) {
        (Some(b), None, None) => FaultTarget::Switch(b),
        (None, Some(m), None) => FaultTarget::Module(m),
        (None, None, Some(p)) => FaultTarget::Parameter(p),
        _ => {
            return Err(loc.at(
                span,
                "a fault needs exactly one of `switch`, `module` or `parameter`",
            ))
        }
    };
    let mode = match (f.mode.as_str(), f.multiplier) {
        ("stuck_open", None) => FaultMode::StuckOpen,
        ("stuck_closed", None) => FaultMode::StuckClosed,
        ("module_dead", None) => FaultMode::ModuleDead,
        ("parameter_drift", Some(multiplier)) => FaultMode::ParameterDrift { multiplier },
        ("parameter_drift", None) => return Err(loc.at(span, "parameter_drift needs a `multiplier`")),
        ("stuck_open" | "stuck_closed" | "module_dead", Some(_)) => {
            return Err(loc.at(span, format!("`multiplier` only applies to parameter_drift, not {}", f.mode)))
        }
        (other, _) => {
            return Err(loc.at(
                span,
                format!("unknown fault mode `{other}` (expected stuck_open, stuck_closed, module_dead, parameter_drift)"),
            ))
        }
    };
    let onset = match f.onset {
        Some(t) => {
            parse_duration(&t, "s").map_err(|e| loc.at(span.clone(), format!("onset: {e}")))?
        }
        None => std::time::Duration::ZERO,
    };
    Ok(FaultSpec {
        target,
        mode,
        onset,
    })
}

fn resolve_ea(
    loc: &Locator,
    ea: Spanned<EaDef>,
) -> Result<(EAParams, Option<String>), ScenarioError> {
    let span = ea.span();
    let d = ea.into_inner();
    let mut p = match d.preset {
        Some(Preset::PlainGa) => EAParams::plain_ga(d.mutation_rate, 0),
        _ => {
            let need = |v: Option<usize>, k: &str| {
                v.ok_or_else(|| {
                    loc.at(
                        span.clone(),
                        format!("[ea] needs `{k}` unless preset = \"plain-ga\""),
                    )
                })
            };
            let mut p = EAParams::high_pressure_mutation(
                need(d.population_size, "population_size")?,
                need(d.max_generations, "max_generations")?,
                d.mutation_rate,
                0,
            );
            p.preset = d.preset;
            p
        }
    };
    if let Some(v) = d.population_size {
        p.population_size = v;
    }
    if let Some(v) = d.max_generations {
        p.max_generations = v;
    }
    if let Some(v) = d.selection {
        p.selection = v;
    }
    if let Some(v) = d.crossover_rate {
        p.crossover_rate = v;
    }
    if let Some(v) = d.elitism {
        p.elitism = v;
    }
    if let Some(v) = d.stop_on_success {
        p.stop_on_success = v;
    }
    if d.preset == Some(Preset::HighPressureMutation) {
        let conflicting_selection = d
            .selection
            .is_some_and(|s| !matches!(s, Selection::Truncation { fraction } if fraction <= 0.25));
        if conflicting_selection || d.crossover_rate.is_some_and(|c| c != 0.0) {
            return Err(loc.at(
                span,
                "preset high-pressure-mutation requires truncation selection (fraction <= 0.25) and crossover_rate = 0",
            ));
        }
    }
    p.apply_preset();
    p.validate().map_err(|e| loc.at(span, e.to_string()))?;
    Ok((p, d.warm_start))
}

/// Parses and validates scenario text. `origin` names the source in errors.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, ScenarioError> {
    let loc = Locator { origin, text };
    let raw: RawScenario = toml::from_str(text).map_err(|e| match e.span() {
        Some(span) => loc.at(span, e.message()),
        None => ScenarioError::Invalid {
            origin: origin.to_string(),
            message: e.message().to_string(),
        },
    })?;

    if *raw.schema.get_ref() != SCHEMA_VERSION {
        return Err(loc.at(
            raw.schema.span(),
            format!(
                "unsupported schema version {} (this build reads {SCHEMA_VERSION})",
                raw.schema.get_ref()
            ),
        ));
    }
    let device = Arc::new(resolve_device(&loc, raw.device)?);
    let benchmark_span = raw.benchmark.span();
    let benchmark = resolve_benchmark(&loc, raw.benchmark)?;
    let map = benchmark
        .decode_map(&device)
        .map_err(|e| loc.at(benchmark_span.clone(), e.to_string()))?;

    let mut faults = Vec::with_capacity(raw.faults.len());
    for f in raw.faults {
        let span = f.span();
        let fault = resolve_fault(&loc, f)?;
        fault
            .validate(&device, &map)
            .map_err(|e| loc.at(span, e.to_string()))?;
        faults.push(fault);
    }

    let ea_span = raw.ea.span();
    let (ea, warm_start) = resolve_ea(&loc, raw.ea)?;

    let req_span = raw.requirement.span();
    let r = raw.requirement.into_inner();
    let deadline =
        parse_duration(&r.deadline, "s").map_err(|e| loc.at(req_span, format!("deadline: {e}")))?;
    let requirement = RecoveryRequirement::new(
        deadline,
        r.classification,
        r.description.unwrap_or_default(),
    )
    .with_boundary(r.boundary);

    let seeds = resolve_seeds(&loc, raw.seeds)?;

    let name = raw.name.unwrap_or_else(|| {
        Path::new(origin)
            .file_stem()
            .map_or_else(|| origin.to_string(), |s| s.to_string_lossy().into_owned())
    });
    let scenario = Scenario {
        name,
        description: raw.description,
        device,
        benchmark,
        faults,
        ea,
        warm_start,
        requirement,
        seeds,
    };
    if scenario.warm_start.is_some() {
        scenario
            .warm_start_configuration()
            .map_err(|e| loc.at(ea_span, e.to_string()))?;
    }
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text, &path.display().to_string())
}
