use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;

use super::format::Scenario;
use super::ScenarioError;
use crate::analog::{DecodedCircuit, Measurement};
use crate::device::{apply_faults, FaultMode, FaultSpec, FaultTarget};
use crate::evolution::{RunResult, Search, Termination};
use crate::ledger::{DeadlineBoundary, RecoveryVerdict};
use crate::time::{format_hours, format_ms, format_secs};

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub result: RunResult,
    pub verdict: RecoveryVerdict,
}

#[derive(Debug, Clone)]
pub struct Campaign {
    /// Sorted by seed.
    pub runs: Vec<SeedRun>,
    pub report: CampaignReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    pub termination: Termination,
    pub evaluations: u64,
    pub reconfiguration_time: Duration,
    pub best_fitness: Option<f64>,
    pub verdict: RecoveryVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub seeds: Vec<SeedSummary>,
    pub effective: usize,
    pub success_rate: f64,
    pub t_r_min: Duration,
    /// Lower median.
    pub t_r_median: Duration,
    pub t_r_max: Duration,
    /// Seed counts keyed by `(logically_correct, temporally_correct)`.
    pub verdict_counts: BTreeMap<(bool, bool), usize>,
}

impl CampaignReport {
    pub fn from_runs(runs: &[SeedRun]) -> Self {
        assert!(!runs.is_empty(), "a campaign has at least one seed");
        let seeds: Vec<SeedSummary> = runs
            .iter()
            .map(|r| SeedSummary {
                seed: r.seed,
                termination: r.result.termination,
                evaluations: r.result.evaluations,
                reconfiguration_time: r.result.ledger.total(),
                best_fitness: r.result.best_fitness(),
                verdict: r.verdict,
            })
            .collect();
        let effective = seeds.iter().filter(|s| s.verdict.effective).count();
        let mut times: Vec<Duration> = seeds.iter().map(|s| s.reconfiguration_time).collect();
        times.sort();
        let mut verdict_counts = BTreeMap::new();
        for s in &seeds {
            *verdict_counts
                .entry((s.verdict.logically_correct, s.verdict.temporally_correct))
                .or_insert(0) += 1;
        }
        Self {
            effective,
            success_rate: effective as f64 / seeds.len() as f64,
            t_r_min: times[0],
            t_r_median: times[(times.len() - 1) / 2],
            t_r_max: times[times.len() - 1],
            verdict_counts,
            seeds,
        }
    }

    pub fn all_effective(&self) -> bool {
        self.effective == self.seeds.len()
    }

    /// `seed,termination,evaluations,T_r_ns,logical,temporal,effective`
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "seed",
            "termination",
            "evaluations",
            "T_r_ns",
            "logical",
            "temporal",
            "effective",
        ])?;
        for s in &self.seeds {
            w.write_record([
                s.seed.to_string(),
                s.termination.to_string(),
                s.evaluations.to_string(),
                s.reconfiguration_time.as_nanos().to_string(),
                s.verdict.logically_correct.to_string(),
                s.verdict.temporally_correct.to_string(),
                s.verdict.effective.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn run_seed(scenario: &Scenario, seed: u64) -> Result<SeedRun, ScenarioError> {
    let warm = scenario.warm_start_configuration()?;
    let search = Search::new(
        &scenario.benchmark,
        scenario.device.clone(),
        &scenario.faults,
    )?
    .with_deadline(Some(scenario.requirement.deadline))
    .with_warm_start(warm.into_iter().collect())?;
    let result = search.run(&scenario.params_for(seed))?;
    let verdict = result.verdict(&scenario.requirement);
    Ok(SeedRun {
        seed,
        result,
        verdict,
    })
}

/// Runs every seed of `scenario`. Parallel execution yields the same runs.
pub fn run_campaign(scenario: &Scenario, parallel: bool) -> Result<Campaign, ScenarioError> {
    let mut seeds = scenario.seeds.clone();
    seeds.sort_unstable();
    let runs: Vec<SeedRun> = if parallel {
        seeds
            .par_iter()
            .map(|&s| run_seed(scenario, s))
            .collect::<Result<_, _>>()?
    } else {
        seeds
            .iter()
            .map(|&s| run_seed(scenario, s))
            .collect::<Result<_, _>>()?
    };
    let report = CampaignReport::from_runs(&runs);
    Ok(Campaign { runs, report })
}

fn describe_fault(f: &FaultSpec) -> String {
    let target = match &f.target {
        FaultTarget::Switch(b) => format!("switch bit {b}"),
        FaultTarget::Module(m) => format!("module {m}"),
        FaultTarget::Parameter(p) => format!("parameter {p}"),
    };
    match f.mode {
        FaultMode::StuckOpen => format!("{target} stuck open"),
        FaultMode::StuckClosed => format!("{target} stuck closed"),
        FaultMode::ModuleDead => format!("{target} dead"),
        FaultMode::ParameterDrift { multiplier } => format!("{target} drifted x{multiplier}"),
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn fitness_text(f: Option<f64>) -> String {
    f.map_or_else(|| "n/a".to_string(), |f| format!("{f:.6}"))
}

/// Human-readable campaign summary. Deterministic for a given campaign.
pub fn render_report(scenario: &Scenario, campaign: &Campaign, per_seed: bool) -> String {
    let mut out = String::new();
    let d = &scenario.device;
    let cost = d.t_program() + scenario.benchmark.test_window;
    let req = &scenario.requirement;
    let r = &campaign.report;
    let _ = writeln!(out, "scenario: {}", scenario.name);
    if let Some(desc) = &scenario.description {
        let _ = writeln!(out, "  {desc}");
    }
    let _ = writeln!(
        out,
        "device: {} ({}, {} {})",
        d.name(),
        d.kind(),
        d.size(),
        d.kind().size_unit()
    );
    let _ = writeln!(out, "benchmark: {}", scenario.benchmark.id);
    let _ = writeln!(
        out,
        "per-evaluation cost: {} ms (t_program {} ms + t_eval {} ms)",
        format_ms(cost),
        format_ms(d.t_program()),
        format_ms(scenario.benchmark.test_window)
    );
    let boundary = match req.boundary {
        DeadlineBoundary::Inclusive => "inclusive",
        DeadlineBoundary::Strict => "strict",
    };
    let _ = writeln!(
        out,
        "requirement: {} deadline {} s ({} h, {boundary}){}",
        req.classification,
        format_secs(req.deadline),
        format_hours(req.deadline),
        if req.description.is_empty() {
            String::new()
        } else {
            format!(" - {}", req.description)
        }
    );
    if scenario.faults.is_empty() {
        let _ = writeln!(out, "faults: none");
    } else {
        let list: Vec<String> = scenario.faults.iter().map(describe_fault).collect();
        let _ = writeln!(out, "faults: {}", list.join("; "));
    }
    let ea = &scenario.ea;
    let _ = writeln!(
        out,
        "ea: population {} x {} generations, mutation rate {}, crossover rate {}, elitism {}",
        ea.population_size, ea.max_generations, ea.mutation_rate, ea.crossover_rate, ea.elitism
    );
    if per_seed {
        for (s, run) in r.seeds.iter().zip(&campaign.runs) {
            let best = run
                .result
                .best
                .as_ref()
                .map(|c| c.active_bitstring())
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "seed {}: {} after {} evaluations, T_r {} s ({} h), best fitness {} [{}], {}",
                s.seed,
                s.termination,
                s.evaluations,
                format_secs(s.reconfiguration_time),
                format_hours(s.reconfiguration_time),
                fitness_text(s.best_fitness),
                best,
                s.verdict
            );
        }
    }
    let _ = writeln!(
        out,
        "seeds: {}, effective: {}, success_rate: {:.3}",
        r.seeds.len(),
        r.effective,
        r.success_rate
    );
    let _ = writeln!(
        out,
        "T_r min/median/max: {} / {} / {} s",
        format_secs(r.t_r_min),
        format_secs(r.t_r_median),
        format_secs(r.t_r_max)
    );
    let counts: Vec<String> = r
        .verdict_counts
        .iter()
        .map(|((l, t), n)| format!("logical={} temporal={}: {n}", yes_no(*l), yes_no(*t)))
        .collect();
    let _ = writeln!(out, "verdicts: {}", counts.join(", "));
    out
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ScenarioError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Writes `campaign.csv`, `report.txt` and per-seed `ledger.csv`,
/// `fitness.csv`, `best.txt` (plus `best_response.csv` for step-response
/// benchmarks) under `dir`.
pub fn write_artifacts(
    scenario: &Scenario,
    campaign: &Campaign,
    dir: &Path,
) -> Result<(), ScenarioError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut buf = Vec::new();
    campaign
        .report
        .write_csv(&mut buf)
        .map_err(|e| io_err(dir, e))?;
    write_file(&dir.join("campaign.csv"), &buf)?;
    write_file(
        &dir.join("report.txt"),
        render_report(scenario, campaign, true).as_bytes(),
    )?;

    for run in &campaign.runs {
        let seed_dir = dir.join(format!("seed-{}", run.seed));
        fs::create_dir_all(&seed_dir).map_err(|e| io_err(&seed_dir, e))?;
        let mut buf = Vec::new();
        run.result
            .ledger
            .write_csv(&mut buf)
            .map_err(|e| io_err(&seed_dir, e))?;
        write_file(&seed_dir.join("ledger.csv"), &buf)?;
        let mut buf = Vec::new();
        run.result
            .write_fitness_csv(&mut buf)
            .map_err(|e| io_err(&seed_dir, e))?;
        write_file(&seed_dir.join("fitness.csv"), &buf)?;

        let mut best = String::new();
        match (&run.result.best, &run.result.best_evaluation) {
            (Some(config), Some(eval)) => {
                let _ = writeln!(best, "bits: {}", config.active_bitstring());
                let _ = writeln!(best, "fitness: {}", eval.fitness);
                let measurement = match &eval.measurement {
                    Measurement::Settling(Some(t)) => format!("settling time {t} s"),
                    Measurement::Settling(None) => "did not settle".to_string(),
                    Measurement::DcRatio(r) => format!("dc ratio {r}"),
                    Measurement::Failed(m) => format!("failed: {m}"),
                };
                let _ = writeln!(best, "measurement: {measurement}");
                let _ = writeln!(best, "logically_correct: {}", eval.logically_correct);
                let state = apply_faults(config, &scenario.faults)?;
                if let Ok(DecodedCircuit::Controller { gains, closed_loop }) =
                    scenario.benchmark.decode(&state)
                {
                    let _ = writeln!(
                        best,
                        "gains: kp={} ki={} kd={}",
                        gains.kp, gains.ki, gains.kd
                    );
                    if let Ok(response) = scenario.benchmark.simulate(&closed_loop) {
                        let mut buf = Vec::new();
                        response
                            .write_csv(&mut buf)
                            .map_err(|e| io_err(&seed_dir, e))?;
                        write_file(&seed_dir.join("best_response.csv"), &buf)?;
                    }
                }
            }
            _ => best.push_str("no evaluation fit within the deadline\n"),
        }
        write_file(&seed_dir.join("best.txt"), best.as_bytes())?;
    }
    Ok(())
}
