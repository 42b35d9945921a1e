use std::collections::HashMap;
use std::fmt;
use std::io;
use std::sync::Arc;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::operators::{rank, reproduce, select, Mutator};
use super::params::EAParams;
use super::EngineError;
use crate::analog::{Benchmark, Evaluation};
use crate::device::{apply_faults, Bits, Configuration, DecodeMap, DeviceProfile, FaultSpec};
use crate::ledger::{check, RecoveryRequirement, RecoveryVerdict, TimeLedger};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// A logically correct configuration was found with `stop_on_success`.
    Success,
    GenerationCap,
    /// The next evaluation would have pushed `T_r` past the deadline.
    DeadlineExhausted,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Success => "success",
            Termination::GenerationCap => "generation-cap",
            Termination::DeadlineExhausted => "deadline-exhausted",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    /// Individuals evaluated in this generation.
    pub evaluated: usize,
    pub best: f64,
    pub mean: f64,
    pub cumulative_evaluations: u64,
    pub cumulative_time: Duration,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Best individual seen over the whole run; earliest wins ties.
    pub best: Option<Configuration>,
    pub best_evaluation: Option<Evaluation>,
    pub generations_executed: usize,
    pub evaluations: u64,
    pub ledger: TimeLedger,
    pub termination: Termination,
    pub history: Vec<GenerationStats>,
}

impl RunResult {
    pub fn best_fitness(&self) -> Option<f64> {
        self.best_evaluation.as_ref().map(|e| e.fitness)
    }

    pub fn logically_correct(&self) -> bool {
        self.best_evaluation
            .as_ref()
            .is_some_and(|e| e.logically_correct)
    }

    pub fn reconfiguration_time(&self) -> Duration {
        self.ledger.total()
    }

    pub fn verdict(&self, requirement: &RecoveryRequirement) -> RecoveryVerdict {
        check(self.ledger.total(), requirement, self.logically_correct())
    }

    /// `generation,best,mean,cumulative_T_r_ns`, one row per generation that
    /// evaluated at least one individual.
    pub fn write_fitness_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["generation", "best", "mean", "cumulative_T_r_ns"])?;
        for g in &self.history {
            w.write_record([
                g.generation.to_string(),
                g.best.to_string(),
                g.mean.to_string(),
                g.cumulative_time.as_nanos().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A recovery search: one benchmark on one faulty device, optionally bounded
/// by a deadline on accumulated reconfiguration time.
#[derive(Debug, Clone)]
pub struct Search<'a> {
    benchmark: &'a Benchmark,
    device: Arc<DeviceProfile>,
    map: Arc<DecodeMap>,
    faults: Vec<FaultSpec>,
    deadline: Option<Duration>,
    warm_start: Vec<Configuration>,
}

impl<'a> Search<'a> {
    pub fn new(
        benchmark: &'a Benchmark,
        device: Arc<DeviceProfile>,
        faults: &[FaultSpec],
    ) -> Result<Self, EngineError> {
        benchmark.validate()?;
        let map = Arc::new(benchmark.decode_map(&device)?);
        for f in faults {
            f.validate(&device, &map)?;
        }
        Ok(Self {
            benchmark,
            device,
            map,
            faults: faults.to_vec(),
            deadline: None,
            warm_start: Vec::new(),
        })
    }

    pub fn with_deadline(mut self, deadline: Option<Duration>) -> Self {
        self.deadline = deadline;
        self
    }

    /// Individuals placed at the front of generation 0, e.g. the
    /// configuration that was running when the fault struck.
    pub fn with_warm_start(mut self, individuals: Vec<Configuration>) -> Result<Self, EngineError> {
        for c in &individuals {
            self.benchmark.check_configuration(c)?;
            if c.device() != &self.device {
                return Err(EngineError::InvalidParams(
                    "warm-start individual targets another device".into(),
                ));
            }
        }
        self.warm_start = individuals;
        Ok(self)
    }

    pub fn decode_map(&self) -> &Arc<DecodeMap> {
        &self.map
    }

    pub fn device(&self) -> &Arc<DeviceProfile> {
        &self.device
    }

    /// Hardware time charged per candidate.
    pub fn evaluation_cost(&self) -> Duration {
        self.device.t_program() + self.benchmark.test_window
    }

    pub fn run(&self, params: &EAParams) -> Result<RunResult, EngineError> {
        params.validate()?;
        if self.warm_start.len() > params.population_size {
            return Err(EngineError::InvalidParams(format!(
                "{} warm-start individuals exceed population_size {}",
                self.warm_start.len(),
                params.population_size
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
        let mut population: Vec<Configuration> = self.warm_start.clone();
        while population.len() < params.population_size {
            population.push(Configuration::random(
                self.device.clone(),
                self.map.clone(),
                &mut rng,
            )?);
        }

        let active = self.map.active_len();
        let mutator = Mutator::new(params.mutation_rate, self.device.config_bits());
        let t_program = self.device.t_program();
        let cost = self.evaluation_cost();
        // Evaluation depends only on the active prefix; the cache saves
        // simulation work but every candidate is still charged to the ledger.
        let mut cache: HashMap<Bits, Evaluation> = HashMap::new();

        let mut ledger = TimeLedger::new();
        let mut best: Option<(Configuration, Evaluation)> = None;
        let mut history = Vec::new();
        let mut generations_executed = 0;
        let mut termination = None;

        for generation in 0..params.max_generations {
            let mut fitness = Vec::with_capacity(population.len());
            for individual in &population {
                if self.deadline.is_some_and(|d| ledger.total() + cost > d) {
                    termination = Some(Termination::DeadlineExhausted);
                    break;
                }
                if fitness.is_empty() {
                    generations_executed += 1;
                }
                let key = individual.bits()[..active].to_bitvec();
                let evaluation = match cache.get(&key) {
                    Some(e) => e.clone(),
                    None => {
                        let state = apply_faults(individual, &self.faults)?;
                        let e = self.benchmark.evaluate_state(&state);
                        cache.insert(key, e.clone());
                        e
                    }
                };
                ledger.charge(t_program, evaluation.t_eval);
                fitness.push(evaluation.fitness);
                if best
                    .as_ref()
                    .is_none_or(|(_, b)| evaluation.fitness < b.fitness)
                {
                    best = Some((individual.clone(), evaluation.clone()));
                }
                if params.stop_on_success && evaluation.logically_correct {
                    termination = Some(Termination::Success);
                    break;
                }
            }
            if !fitness.is_empty() {
                history.push(GenerationStats {
                    generation,
                    evaluated: fitness.len(),
                    best: fitness.iter().copied().fold(f64::INFINITY, f64::min),
                    mean: fitness.iter().sum::<f64>() / fitness.len() as f64,
                    cumulative_evaluations: ledger.len() as u64,
                    cumulative_time: ledger.total(),
                });
            }
            if termination.is_some() || generation + 1 == params.max_generations {
                break;
            }

            let ranked = rank(&fitness);
            let mut next: Vec<Configuration> = ranked[..params.elitism]
                .iter()
                .map(|&i| population[i].clone())
                .collect();
            let parents = select(
                &fitness,
                params.selection,
                params.offspring_count(),
                &mut rng,
            );
            let pool: Vec<&Configuration> = parents.iter().map(|&i| &population[i]).collect();
            next.extend(reproduce(&pool, params, &mutator, &mut rng));
            population = next;
        }

        let (best, best_evaluation) = best.map_or((None, None), |(c, e)| (Some(c), Some(e)));
        Ok(RunResult {
            best,
            best_evaluation,
            generations_executed,
            evaluations: ledger.len() as u64,
            ledger,
            termination: termination.unwrap_or(Termination::GenerationCap),
            history,
        })
    }
}

/// Runs one search with no warm start.
pub fn run(
    params: &EAParams,
    benchmark: &Benchmark,
    device: Arc<DeviceProfile>,
    faults: &[FaultSpec],
    deadline: Option<Duration>,
) -> Result<RunResult, EngineError> {
    Search::new(benchmark, device, faults)?
        .with_deadline(deadline)
        .run(params)
}


#[cfg(test)]
mod proptests {
    use proptest::prelude::*;

    use super::*;
    use crate::analog::fpta_divider;
    use crate::device::find_builtin;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn run_invariants(
            seed in any::<u64>(),
            pop in 2usize..12,
            gens in 1usize..8,
            deadline_us in proptest::option::of(0u64..80_000),
            stop in any::<bool>(),
            stuck in 0usize..8,
        ) {
            let bench = fpta_divider();
            let dev = Arc::new(find_builtin("FPTA2").unwrap());
            let mut p = EAParams::high_pressure_mutation(pop, gens, 0.2, seed);
            p.stop_on_success = stop;
            let deadline = deadline_us.map(Duration::from_micros);
            let search = Search::new(&bench, dev, &[FaultSpec::stuck_closed(stuck)]).unwrap().with_deadline(deadline);
            let cost = search.evaluation_cost();
            let r = search.run(&p).unwrap();
            prop_assert!(r.evaluations <= (pop * gens) as u64);
            prop_assert_eq!(r.ledger.total(), cost * r.evaluations as u32);
            prop_assert!(r.generations_executed <= gens);
            if let Some(d) = deadline {
                prop_assert!(r.ledger.total() <= d);
            }
            match r.termination {
                Termination::DeadlineExhausted => {
                    let d = deadline.unwrap();
                    prop_assert!(d < r.ledger.total() + cost);
                }
                Termination::Success => prop_assert!(stop && r.logically_correct()),
                Termination::GenerationCap => {
                    prop_assert_eq!(r.generations_executed, gens);
                    prop_assert_eq!(r.evaluations, (pop * gens) as u64);
                }
            }
            for w in r.history.windows(2) {
                prop_assert!(w[1].best <= w[0].best);
            }
        }
    }
}
