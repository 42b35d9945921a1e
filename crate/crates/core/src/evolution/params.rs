use serde::{Deserialize, Serialize};

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Selection {
    /// Best of `k` distinct individuals drawn uniformly.
    Tournament { k: usize },
    /// Uniform draws from the top `ceil(fraction · N)` individuals.
    Truncation { fraction: f64 },
    /// Draw probability proportional to `worst − fitness + ε`.
    RouletteWheel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// High selection pressure, mutation-only reproduction: truncation to at
    /// most the top quarter and no crossover.
    HighPressureMutation,
    /// Generational GA: tournament selection, single-point crossover plus
    /// mutation, population 100 for 500 generations.
    PlainGa,
}

/// Largest truncation fraction allowed under [`Preset::HighPressureMutation`].
pub const HIGH_PRESSURE_MAX_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EAParams {
    pub population_size: usize,
    pub max_generations: usize,
    pub selection: Selection,
    /// Per-bit flip probability.
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub elitism: usize,
    pub rng_seed: u64,
    pub stop_on_success: bool,
    pub preset: Option<Preset>,
}

impl EAParams {
    pub fn high_pressure_mutation(
        population_size: usize,
        max_generations: usize,
        mutation_rate: f64,
        rng_seed: u64,
    ) -> Self {
        Self {
            population_size,
            max_generations,
            selection: Selection::Truncation {
                fraction: HIGH_PRESSURE_MAX_FRACTION,
            },
            mutation_rate,
            crossover_rate: 0.0,
            elitism: 1,
            rng_seed,
            stop_on_success: true,
            preset: Some(Preset::HighPressureMutation),
        }
    }

    pub fn plain_ga(mutation_rate: f64, rng_seed: u64) -> Self {
        Self {
            population_size: 100,
            max_generations: 500,
            selection: Selection::Tournament { k: 2 },
            mutation_rate,
            crossover_rate: 0.7,
            elitism: 1,
            rng_seed,
            stop_on_success: false,
            preset: Some(Preset::PlainGa),
        }
    }

    /// Forces the settings a preset implies.
    pub fn apply_preset(&mut self) {
        if self.preset == Some(Preset::HighPressureMutation) {
            self.crossover_rate = 0.0;
            match self.selection {
                Selection::Truncation { fraction } if fraction <= HIGH_PRESSURE_MAX_FRACTION => {}
                _ => {
                    self.selection = Selection::Truncation {
                        fraction: HIGH_PRESSURE_MAX_FRACTION,
                    }
                }
            }
        }
    }

    pub fn offspring_count(&self) -> usize {
        self.population_size - self.elitism
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidParams(m));
        if self.population_size == 0 {
            return bad("population_size must be positive".into());
        }
        if self.max_generations == 0 {
            return bad("max_generations must be positive".into());
        }
        if !(self.mutation_rate > 0.0 && self.mutation_rate < 1.0) {
            return bad(format!(
                "mutation_rate {} must lie in (0, 1)",
                self.mutation_rate
            ));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return bad(format!(
                "crossover_rate {} must lie in [0, 1]",
                self.crossover_rate
            ));
        }
        if self.elitism >= self.population_size {
            return bad(format!(
                "elitism {} must be smaller than population_size {}",
                self.elitism, self.population_size
            ));
        }
        match self.selection {
            Selection::Tournament { k } if k == 0 || k > self.population_size => {
                return bad(format!(
                    "tournament size {k} must lie in 1..={}",
                    self.population_size
                ));
            }
            Selection::Truncation { fraction } if !(fraction > 0.0 && fraction <= 1.0) => {
                return bad(format!("truncation fraction {fraction} must lie in (0, 1]"));
            }
            _ => {}
        }
        if self.preset == Some(Preset::HighPressureMutation) {
            let pressure_ok = matches!(self.selection, Selection::Truncation { fraction } if fraction <= HIGH_PRESSURE_MAX_FRACTION);
            if !pressure_ok || self.crossover_rate != 0.0 {
                return bad(
                    "high-pressure-mutation preset needs truncation <= 0.25 and no crossover"
                        .into(),
                );
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        EAParams::high_pressure_mutation(10, 30, 0.1, 1)
            .validate()
            .unwrap();
        let ga = EAParams::plain_ga(0.01, 1);
        ga.validate().unwrap();
        assert_eq!((ga.population_size, ga.max_generations), (100, 500));
    }

    #[test]
    fn preset_forces_pressure_and_no_crossover() {
        let mut p = EAParams::plain_ga(0.01, 1);
        p.preset = Some(Preset::HighPressureMutation);
        assert!(p.validate().is_err());
        p.apply_preset();
        p.validate().unwrap();
        assert_eq!(p.crossover_rate, 0.0);
        assert_eq!(p.selection, Selection::Truncation { fraction: 0.25 });

        let mut q = EAParams::high_pressure_mutation(10, 5, 0.1, 0);
        q.selection = Selection::Truncation { fraction: 0.1 };
        q.apply_preset();
        assert_eq!(q.selection, Selection::Truncation { fraction: 0.1 });
    }

    #[test]
    fn rejects_invalid() {
        let base = EAParams::high_pressure_mutation(10, 5, 0.1, 0);
        type Edit = Box<dyn Fn(&mut EAParams)>;
        let cases: Vec<Edit> = vec![
            Box::new(|p| p.population_size = 0),
            Box::new(|p| p.max_generations = 0),
            Box::new(|p| p.mutation_rate = 0.0),
            Box::new(|p| p.mutation_rate = 1.0),
            Box::new(|p| p.elitism = 10),
            Box::new(|p| p.selection = Selection::Truncation { fraction: 0.0 }),
            Box::new(|p| {
                p.preset = None;
                p.selection = Selection::Tournament { k: 11 }
            }),
            Box::new(|p| {
                p.preset = None;
                p.crossover_rate = 1.5
            }),
        ];
        for (i, mutate) in cases.iter().enumerate() {
            let mut p = base.clone();
            mutate(&mut p);
            assert!(p.validate().is_err(), "case {i}");
        }
    }
}
