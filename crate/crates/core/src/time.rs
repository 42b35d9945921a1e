//! Exact duration parsing and formatting.
//!
//! All hardware time is carried as [`std::time::Duration`], which stores whole
//! nanoseconds. Decimal inputs such as `3.8ms` or `0.008ms` are converted
//! without passing through floating point.

use std::fmt;
use std::time::Duration;

use thiserror::Error;

const NANOS_PER_MS: u128 = 1_000_000;
const NANOS_PER_S: u128 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DurationParseError {
    #[error("empty duration")]
    Empty,
    #[error("invalid number in duration `{0}`")]
    BadNumber(String),
    #[error("unknown duration unit `{unit}` (expected ns, us, ms, s, min, h, d)")]
    BadUnit { unit: String },
    #[error("duration `{0}` is not a whole number of nanoseconds")]
    SubNanosecond(String),
    #[error("duration `{0}` overflows")]
    Overflow(String),
    #[error("negative duration `{0}`")]
    Negative(String),
}

fn unit_nanos(unit: &str) -> Option<u128> {
    Some(match unit {
        "ns" => 1,
        "us" | "µs" => 1_000,
        "ms" => NANOS_PER_MS,
        "s" | "sec" => NANOS_PER_S,
        "min" | "m" => 60 * NANOS_PER_S,
        "h" => 3_600 * NANOS_PER_S,
        "d" | "days" => 86_400 * NANOS_PER_S,
        _ => return None,
    })
}

/// Parses a duration such as `625`, `3.8ms`, `10h` or `0.008 ms`.
///
/// A bare number is read in `default_unit`.
pub fn parse_duration(text: &str, default_unit: &str) -> Result<Duration, DurationParseError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(DurationParseError::Empty);
    }
    if text.starts_with('-') {
        return Err(DurationParseError::Negative(text.to_string()));
    }
    let split = text
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '_'))
        .unwrap_or(text.len());
    let (number, unit) = text.split_at(split);
    let unit = unit.trim();
    let unit = if unit.is_empty() { default_unit } else { unit };
    let scale = unit_nanos(unit).ok_or_else(|| DurationParseError::BadUnit {
        unit: unit.to_string(),
    })?;
    let nanos = scale_decimal(number, scale).map_err(|e| match e {
        DecimalError::Syntax => DurationParseError::BadNumber(text.to_string()),
        DecimalError::Inexact => DurationParseError::SubNanosecond(text.to_string()),
        DecimalError::Overflow => DurationParseError::Overflow(text.to_string()),
    })?;
    nanos_to_duration(nanos).ok_or_else(|| DurationParseError::Overflow(text.to_string()))
}

/// Converts a millisecond count given as a float to whole nanoseconds,
/// rounding to the nearest nanosecond. Used for numeric profile fields.
pub fn duration_from_ms_f64(ms: f64) -> Option<Duration> {
    if !ms.is_finite() || ms < 0.0 {
        return None;
    }
    let nanos = (ms * 1e6).round();
    if nanos > u64::MAX as f64 {
        return None;
    }
    Some(Duration::from_nanos(nanos as u64))
}

pub(crate) fn nanos_to_duration(nanos: u128) -> Option<Duration> {
    let secs = u64::try_from(nanos / NANOS_PER_S).ok()?;
    Some(Duration::new(secs, (nanos % NANOS_PER_S) as u32))
}

enum DecimalError {
    Syntax,
    Inexact,
    Overflow,
}

fn scale_decimal(number: &str, scale: u128) -> Result<u128, DecimalError> {
    let number: String = number.chars().filter(|c| *c != '_').collect();
    let (int_part, frac_part) = match number.split_once('.') {
        Some((i, f)) => (i, f),
        None => (number.as_str(), ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(DecimalError::Syntax);
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(DecimalError::Syntax);
    }
    let int_value: u128 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| DecimalError::Overflow)?
    };
    let mut total = int_value.checked_mul(scale).ok_or(DecimalError::Overflow)?;
    let frac = frac_part.trim_end_matches('0');
    if !frac.is_empty() {
        if frac.len() > 30 {
            return Err(DecimalError::Inexact);
        }
        let digits: u128 = frac.parse().map_err(|_| DecimalError::Syntax)?;
        let denom = 10u128.pow(frac.len() as u32);
        let scaled = digits.checked_mul(scale).ok_or(DecimalError::Overflow)?;
        if scaled % denom != 0 {
            return Err(DecimalError::Inexact);
        }
        total = total
            .checked_add(scaled / denom)
            .ok_or(DecimalError::Overflow)?;
    }
    Ok(total)
}

fn trimmed_fraction(value: u128, unit: u128) -> String {
    let whole = value / unit;
    let rem = value % unit;
    if rem == 0 {
        return whole.to_string();
    }
    let width = (unit as f64).log10().round() as usize;
    let frac = format!("{rem:0width$}");
    format!("{whole}.{}", frac.trim_end_matches('0'))
}

/// Exact millisecond rendering, e.g. `628.8` for 628 800 000 ns.
pub fn format_ms(d: Duration) -> String {
    trimmed_fraction(d.as_nanos(), NANOS_PER_MS)
}

/// Exact second rendering, e.g. `31440` or `0.0038`.
pub fn format_secs(d: Duration) -> String {
    trimmed_fraction(d.as_nanos(), NANOS_PER_S)
}

/// Hours rounded to three decimals, for human summaries only.
pub fn format_hours(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64() / 3600.0)
}

/// A duration that may be negative, e.g. a deadline margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedDuration {
    nanos: i128,
}

impl SignedDuration {
    pub fn between(later: Duration, earlier: Duration) -> Self {
        Self {
            nanos: later.as_nanos() as i128 - earlier.as_nanos() as i128,
        }
    }

    pub fn as_nanos(self) -> i128 {
        self.nanos
    }

    pub fn is_negative(self) -> bool {
        self.nanos < 0
    }

    pub fn abs(self) -> Duration {
        nanos_to_duration(self.nanos.unsigned_abs()).unwrap_or(Duration::MAX)
    }
}

impl fmt::Display for SignedDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.nanos < 0 { "-" } else { "+" };
        write!(f, "{sign}{} s", format_secs(self.abs()))
    }
}
