//! Real-time accounting for intrinsic reconfiguration.
//!
//! Every candidate evaluated on the device costs a programming time plus the
//! length of the fitness test. The [`TimeLedger`] accumulates those costs; its
//! total is the reconfiguration time `T_r`. A recovery is effective only when
//! it is both logically correct (function restored) and temporally correct
//! (`T_r` within the recovery deadline), see [`check`].

use std::fmt;
use std::io;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SignedDuration;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error(
        "negative duration charged to ledger: t_program={t_program_ns} ns, t_eval={t_eval_ns} ns"
    )]
    NegativeDuration { t_program_ns: i64, t_eval_ns: i64 },
    #[error("an evaluation must cost a positive amount of time (t_program + t_eval = 0)")]
    ZeroCostEvaluation,
    #[error("population size must be positive")]
    EmptyPopulation,
}

/// One device evaluation: program the configuration, then run the test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerEntry {
    pub evaluation_index: u64,
    pub t_program: Duration,
    pub t_eval: Duration,
}

impl LedgerEntry {
    pub fn cost(&self) -> Duration {
        self.t_program + self.t_eval
    }
}

/// Append-only account of hardware time. Single writer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TimeLedger {
    entries: Vec<LedgerEntry>,
    total: Duration,
}

impl TimeLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends one evaluation and returns the new total.
    pub fn charge(&mut self, t_program: Duration, t_eval: Duration) -> Duration {
        let entry = LedgerEntry {
            evaluation_index: self.entries.len() as u64,
            t_program,
            t_eval,
        };
        self.total += entry.cost();
        self.entries.push(entry);
        self.total
    }

    /// Signed-nanosecond variant of [`charge`](Self::charge) for callers
    /// holding raw, unvalidated values.
    pub fn try_charge_nanos(
        &mut self,
        t_program_ns: i64,
        t_eval_ns: i64,
    ) -> Result<Duration, LedgerError> {
        if t_program_ns < 0 || t_eval_ns < 0 {
            return Err(LedgerError::NegativeDuration {
                t_program_ns,
                t_eval_ns,
            });
        }
        Ok(self.charge(
            Duration::from_nanos(t_program_ns as u64),
            Duration::from_nanos(t_eval_ns as u64),
        ))
    }

    /// Reconfiguration time `T_r`.
    pub fn total(&self) -> Duration {
        self.total
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes `index,t_program_ns,t_eval_ns,cumulative_ns` rows.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "t_program_ns", "t_eval_ns", "cumulative_ns"])?;
        let mut cumulative: u128 = 0;
        for e in &self.entries {
            cumulative += e.cost().as_nanos();
            w.write_record([
                e.evaluation_index.to_string(),
                e.t_program.as_nanos().to_string(),
                e.t_eval.as_nanos().to_string(),
                cumulative.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    /// Missing the deadline is catastrophic.
    Hard,
    /// Missing the deadline only degrades service.
    Soft,
}

impl fmt::Display for Criticality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criticality::Hard => "hard",
            Criticality::Soft => "soft",
        })
    }
}

/// Whether finishing exactly at the deadline counts as on time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeadlineBoundary {
    #[default]
    Inclusive,
    Strict,
}

/// A recovery deadline measured from fault detection, typically the output of
/// a failure modes and effects analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveryRequirement {
    pub deadline: Duration,
    pub classification: Criticality,
    pub description: String,
    pub boundary: DeadlineBoundary,
}

impl RecoveryRequirement {
    pub fn new(
        deadline: Duration,
        classification: Criticality,
        description: impl Into<String>,
    ) -> Self {
        Self {
            deadline,
            classification,
            description: description.into(),
            boundary: DeadlineBoundary::Inclusive,
        }
    }

    pub fn with_boundary(mut self, boundary: DeadlineBoundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn meets(&self, elapsed: Duration) -> bool {
        match self.boundary {
            DeadlineBoundary::Inclusive => elapsed <= self.deadline,
            DeadlineBoundary::Strict => elapsed < self.deadline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecoveryVerdict {
    pub logically_correct: bool,
    pub temporally_correct: bool,
    pub effective: bool,
    /// `deadline - T_r`.
    pub margin: SignedDuration,
}

impl fmt::Display for RecoveryVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let yn = |b: bool| if b { "yes" } else { "no" };
        write!(
            f,
            "logical={} temporal={} effective={} margin={}",
            yn(self.logically_correct),
            yn(self.temporally_correct),
            yn(self.effective),
            self.margin
        )
    }
}

/// Judges a recovery: effective iff logically and temporally correct.
pub fn check(
    ledger_total: Duration,
    requirement: &RecoveryRequirement,
    logically_correct: bool,
) -> RecoveryVerdict {
    let temporally_correct = requirement.meets(ledger_total);
    RecoveryVerdict {
        logically_correct,
        temporally_correct,
        effective: logically_correct && temporally_correct,
        margin: SignedDuration::between(requirement.deadline, ledger_total),
    }
}

/// Largest number of evaluations that fit in `deadline`:
/// `floor(deadline / (t_program + t_eval))`.
pub fn evaluation_budget(
    t_program: Duration,
    t_eval: Duration,
    deadline: Duration,
) -> Result<u64, LedgerError> {
    let cost = (t_program + t_eval).as_nanos();
    if cost == 0 {
        return Err(LedgerError::ZeroCostEvaluation);
    }
    Ok(u64::try_from(deadline.as_nanos() / cost).unwrap_or(u64::MAX))
}

/// Largest whole number of generations guaranteed to finish by `deadline`.
pub fn plan(
    deadline: Duration,
    t_program: Duration,
    t_eval: Duration,
    population_size: u64,
) -> Result<u64, LedgerError> {
    if population_size == 0 {
        return Err(LedgerError::EmptyPopulation);
    }
    Ok(evaluation_budget(t_program, t_eval, deadline)? / population_size)
}

/// Hardware time of a fixed search plan, `evaluations × (t_program + t_eval)`.
pub fn planned_reconfiguration_time(
    t_program: Duration,
    t_eval: Duration,
    evaluations: u64,
) -> Option<Duration> {
    let nanos = (t_program + t_eval)
        .as_nanos()
        .checked_mul(evaluations as u128)?;
    crate::time::nanos_to_duration(nanos)
}
