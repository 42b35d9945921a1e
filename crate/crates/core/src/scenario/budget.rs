use std::fmt::Write as _;
use std::time::Duration;

use crate::device::DeviceProfile;
use crate::ledger::{
    evaluation_budget, planned_reconfiguration_time, Criticality, DeadlineBoundary, LedgerError,
    RecoveryRequirement,
};
use crate::time::{format_hours, format_ms, format_secs, SignedDuration};

/// A fixed search plan to check against a deadline.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetQuery {
    pub device: Option<String>,
    pub t_program: Duration,
    pub t_eval: Duration,
    pub population: u64,
    pub generations: u64,
    pub deadline: Option<Duration>,
    pub boundary: DeadlineBoundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    pub query: BudgetQuery,
    pub cost: Duration,
    pub evaluations: u64,
    pub reconfiguration_time: Duration,
    pub margin: Option<SignedDuration>,
    /// Evaluations that finish within the deadline.
    pub max_evaluations: Option<u64>,
    /// Whole generations that finish within the deadline.
    pub max_generations: Option<u64>,
    /// True when there is no deadline.
    pub feasible: bool,
}

/// The evaluation count that goes with the 8.7 h figure for a 100 × 500 run.
pub const REFERENCE_EVALUATIONS: u64 = 50_000;
/// The larger evaluation count sometimes quoted for the same run.
pub const QUOTED_EVALUATIONS: u64 = 500_000;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BudgetError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("plan of {0} evaluations overflows the time range")]
    Overflow(u64),
}

impl BudgetQuery {
    pub fn for_device(
        device: &DeviceProfile,
        t_eval: Duration,
        population: u64,
        generations: u64,
    ) -> Self {
        Self {
            device: Some(device.name().to_string()),
            t_program: device.t_program(),
            t_eval,
            population,
            generations,
            deadline: None,
            boundary: DeadlineBoundary::Inclusive,
        }
    }

    pub fn analyze(&self) -> Result<BudgetReport, BudgetError> {
        let cost = self.t_program + self.t_eval;
        if cost.is_zero() {
            return Err(LedgerError::ZeroCostEvaluation.into());
        }
        let evaluations = self
            .population
            .checked_mul(self.generations)
            .ok_or(BudgetError::Overflow(u64::MAX))?;
        let t_r = planned_reconfiguration_time(self.t_program, self.t_eval, evaluations)
            .ok_or(BudgetError::Overflow(evaluations))?;
        let (margin, max_evaluations, max_generations, feasible) = match self.deadline {
            None => (None, None, None, true),
            Some(deadline) => {
                let req = RecoveryRequirement::new(deadline, Criticality::Hard, "")
                    .with_boundary(self.boundary);
                let mut budget = evaluation_budget(self.t_program, self.t_eval, deadline)?;
                // under a strict boundary an evaluation ending exactly at the deadline is late
                if self.boundary == DeadlineBoundary::Strict
                    && budget > 0
                    && cost.as_nanos() * budget as u128 == deadline.as_nanos()
                {
                    budget -= 1;
                }
                let gens = (self.population > 0).then(|| budget / self.population);
                (
                    Some(SignedDuration::between(deadline, t_r)),
                    Some(budget),
                    gens,
                    req.meets(t_r),
                )
            }
        };
        Ok(BudgetReport {
            query: self.clone(),
            cost,
            evaluations,
            reconfiguration_time: t_r,
            margin,
            max_evaluations,
            max_generations,
            feasible,
        })
    }
}

impl BudgetReport {
    pub fn render(&self) -> String {
        let q = &self.query;
        let mut out = String::new();
        if let Some(d) = &q.device {
            let _ = writeln!(out, "device: {d}");
        }
        let _ = writeln!(out, "t_program: {} ms", format_ms(q.t_program));
        let _ = writeln!(out, "t_eval: {} ms", format_ms(q.t_eval));
        let _ = writeln!(out, "per-evaluation cost: {} ms", format_ms(self.cost));
        let _ = writeln!(
            out,
            "plan: {} x {} = {} evaluations",
            q.population, q.generations, self.evaluations
        );
        let _ = writeln!(
            out,
            "T_r: {} s ({} h)",
            format_secs(self.reconfiguration_time),
            format_hours(self.reconfiguration_time)
        );
        if let Some(deadline) = q.deadline {
            let boundary = match q.boundary {
                DeadlineBoundary::Inclusive => "inclusive",
                DeadlineBoundary::Strict => "strict",
            };
            let _ = writeln!(
                out,
                "deadline: {} s ({} h, {boundary})",
                format_secs(deadline),
                format_hours(deadline)
            );
            if let Some(m) = self.margin {
                let _ = writeln!(out, "margin: {m}");
            }
            if let Some(e) = self.max_evaluations {
                let _ = writeln!(out, "max evaluations within deadline: {e}");
            }
            if let Some(g) = self.max_generations {
                let _ = writeln!(out, "max generations within deadline: {g}");
            }
            let _ = writeln!(
                out,
                "verdict: {}",
                if self.feasible {
                    "feasible"
                } else {
                    "infeasible"
                }
            );
        } else {
            let _ = writeln!(out, "verdict: no deadline given");
        }
        if self.evaluations == REFERENCE_EVALUATIONS {
            if let Some(quoted) =
                planned_reconfiguration_time(q.t_program, q.t_eval, QUOTED_EVALUATIONS)
            {
                let _ = writeln!(
                    out,
                    "note: {} evaluations give the {} h figure; a count of {} at the same cost would need {} s ({} h)",
                    REFERENCE_EVALUATIONS,
                    format_hours(self.reconfiguration_time),
                    QUOTED_EVALUATIONS,
                    format_secs(quoted),
                    format_hours(quoted)
                );
            }
        }
        out
    }
}

/// One row per profile: name, kind, size, t_program and transfer details.
pub fn render_device_table(profiles: &[DeviceProfile]) -> String {
    let rows: Vec<[String; 5]> = profiles
        .iter()
        .map(|p| {
            let transfer = match p.transfer() {
                Some(t) => format!(
                    "{}-bit @ {} MHz, {} B bitstream, transfer {} ms",
                    t.bus_width,
                    t.clock_hz as f64 / 1e6,
                    t.bitstream_bytes,
                    format_ms(t.transfer_time())
                ),
                None => "-".to_string(),
            };
            [
                p.name().to_string(),
                p.kind().to_string(),
                format!("{} {}", p.size(), p.kind().size_unit()),
                format!("{} ms", format_ms(p.t_program())),
                transfer,
            ]
        })
        .collect();
    let header = ["name", "kind", "size", "t_program", "transfer"];
    let mut widths = header.map(str::len);
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: [&str; 5]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i + 1 == cells.len() {
                s.push_str(c);
            } else {
                let _ = write!(s, "{c:<w$}  ", w = widths[i]);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    for r in &rows {
        out.push_str(&line([&r[0], &r[1], &r[2], &r[3], &r[4]]));
    }
    for p in profiles {
        if let Some(n) = p.note() {
            let _ = writeln!(out, "  {}: {n}", p.name());
        }
    }
    out
}
