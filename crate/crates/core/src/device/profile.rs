use std::fmt;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::DeviceError;
use crate::time::duration_from_ms_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DeviceKind {
    /// Field programmable analog array: configurable analog modules plus routing.
    Fpaa,
    /// Field programmable transistor array: MOSFET switches in a cell array.
    Fpta,
}

impl DeviceKind {
    /// Unit of the `size` field.
    pub fn size_unit(self) -> &'static str {
        match self {
            DeviceKind::Fpaa => "modules",
            DeviceKind::Fpta => "cells",
        }
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeviceKind::Fpaa => "FPAA",
            DeviceKind::Fpta => "FPTA",
        })
    }
}

/// How a bitstream reaches the device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransferGeometry {
    /// Bits moved per transfer clock.
    pub bus_width: u32,
    pub clock_hz: u64,
    pub bitstream_bytes: u64,
}

impl TransferGeometry {
    /// `bitstream_bytes × 8 / (bus_width × clock_hz)`, rounded up to the
    /// next nanosecond.
    pub fn transfer_time(&self) -> Duration {
        let bits = self.bitstream_bytes as u128 * 8;
        let per_second = self.bus_width as u128 * self.clock_hz as u128;
        let nanos = (bits * 1_000_000_000).div_ceil(per_second);
        Duration::from_nanos(nanos as u64)
    }
}

/// A reconfigurable analog device.
///
/// `t_program` is the full cost of loading one configuration, download
/// included. The transfer time is reported separately for analysis only and is
/// never charged on top of it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeviceProfile {
    name: String,
    kind: DeviceKind,
    size: u32,
    t_program: Duration,
    transfer: Option<TransferGeometry>,
    note: Option<String>,
}

impl DeviceProfile {
    pub fn new(
        name: impl Into<String>,
        kind: DeviceKind,
        size: u32,
        t_program: Duration,
        transfer: Option<TransferGeometry>,
    ) -> Result<Self, DeviceError> {
        let name = name.into();
        let invalid = |reason: String| DeviceError::InvalidProfile {
            name: name.clone(),
            reason,
        };
        if name.trim().is_empty() {
            return Err(invalid("name is empty".into()));
        }
        if size == 0 {
            return Err(invalid("size must be positive".into()));
        }
        if t_program.is_zero() {
            return Err(invalid("t_program must be positive".into()));
        }
        if let Some(t) = &transfer {
            if t.bus_width == 0 || t.clock_hz == 0 {
                return Err(invalid(
                    "transfer bus_width and clock_hz must be positive".into(),
                ));
            }
            let tt = t.transfer_time();
            if tt > t_program {
                return Err(invalid(format!(
                    "transfer time {} ns exceeds t_program {} ns",
                    tt.as_nanos(),
                    t_program.as_nanos()
                )));
            }
        }
        Ok(Self {
            name,
            kind,
            size,
            t_program,
            transfer,
            note: None,
        })
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> DeviceKind {
        self.kind
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn t_program(&self) -> Duration {
        self.t_program
    }

    pub fn transfer(&self) -> Option<&TransferGeometry> {
        self.transfer.as_ref()
    }

    pub fn note(&self) -> Option<&str> {
        self.note.as_deref()
    }

    /// Bitstream size; `8 × size` bytes when no transfer geometry is known.
    pub fn bitstream_bytes(&self) -> u64 {
        self.transfer
            .map(|t| t.bitstream_bytes)
            .unwrap_or(8 * self.size as u64)
    }

    /// Number of configuration bits.
    pub fn config_bits(&self) -> usize {
        (self.bitstream_bytes() * 8) as usize
    }
}

pub fn transfer_time(profile: &DeviceProfile) -> Result<Duration, DeviceError> {
    profile
        .transfer
        .map(|t| t.transfer_time())
        .ok_or_else(|| DeviceError::MissingTransferGeometry(profile.name.clone()))
}

/// The three reference devices with their published programming times.
pub fn builtin_profiles() -> Vec<DeviceProfile> {
    let ms = |v: f64| duration_from_ms_f64(v).expect("static value");
    vec![
        DeviceProfile::new("ispPAC10", DeviceKind::Fpaa, 4, ms(100.0), None)
            .expect("static profile")
            .with_note("Lattice Semiconductor"),
        DeviceProfile::new(
            "AN220E04",
            DeviceKind::Fpaa,
            4,
            ms(3.8),
            Some(TransferGeometry {
                bus_width: 1,
                clock_hz: 10_000_000,
                bitstream_bytes: 18 * 256,
            }),
        )
        .expect("static profile")
        .with_note(
            "Anadigm; all 18 banks reloaded with 256 bytes/bank; serial transfer with 10 MHz clock",
        ),
        // bitstream size is not published; 8 bytes per cell is an assumption
        DeviceProfile::new(
            "FPTA2",
            DeviceKind::Fpta,
            64,
            ms(0.008),
            Some(TransferGeometry {
                bus_width: 8,
                clock_hz: 160_000_000,
                bitstream_bytes: 8 * 64,
            }),
        )
        .expect("static profile")
        .with_note("JPL, fabricated by MOSIS; byte-wide transfers with 160 MHz clock"),
    ]
}

pub fn find_builtin(name: &str) -> Option<DeviceProfile> {
    builtin_profiles()
        .into_iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
}

/// On-disk profile record. `t_program_ms` is rounded to whole nanoseconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileRecord {
    pub name: String,
    pub kind: DeviceKind,
    pub size: u32,
    pub t_program_ms: f64,
    #[serde(default)]
    pub transfer: Option<TransferGeometry>,
    #[serde(default)]
    pub note: Option<String>,
}

impl TryFrom<ProfileRecord> for DeviceProfile {
    type Error = DeviceError;

    fn try_from(r: ProfileRecord) -> Result<Self, Self::Error> {
        let t_program =
            duration_from_ms_f64(r.t_program_ms).ok_or_else(|| DeviceError::InvalidProfile {
                name: r.name.clone(),
                reason: format!("t_program_ms = {} is not a valid duration", r.t_program_ms),
            })?;
        let p = DeviceProfile::new(r.name, r.kind, r.size, t_program, r.transfer)?;
        Ok(match r.note {
            Some(n) => p.with_note(n),
            None => p,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    #[serde(default)]
    device: Vec<ProfileRecord>,
}

/// Parses a profile file: a TOML document of `[[device]]` tables.
pub fn parse_profiles(text: &str) -> Result<Vec<DeviceProfile>, DeviceError> {
    let file: ProfileFile =
        toml::from_str(text).map_err(|e| DeviceError::ProfileSyntax(e.to_string()))?;
    file.device
        .into_iter()
        .map(DeviceProfile::try_from)
        .collect()
}

pub fn load_profiles(path: &Path) -> Result<Vec<DeviceProfile>, DeviceError> {
    let text = std::fs::read_to_string(path).map_err(|e| DeviceError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_profiles(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_match_table() {
        let all = builtin_profiles();
        assert_eq!(all.len(), 3);
        let tp = |n: &str| find_builtin(n).unwrap().t_program().as_nanos();
        assert_eq!(tp("AN220E04"), 3_800_000);
        assert_eq!(tp("ispPAC10"), 100_000_000);
        assert_eq!(tp("FPTA2"), 8_000);
        let fpta = find_builtin("fpta2").unwrap();
        assert_eq!(fpta.kind(), DeviceKind::Fpta);
        assert_eq!(fpta.size(), 64);
        assert_eq!(
            find_builtin("AN220E04")
                .unwrap()
                .transfer()
                .unwrap()
                .bitstream_bytes,
            4608
        );
    }

    #[test]
    fn transfer_times() {
        let an = find_builtin("AN220E04").unwrap();
        assert_eq!(transfer_time(&an).unwrap(), Duration::from_nanos(3_686_400));
        let pac = find_builtin("ispPAC10").unwrap();
        assert!(matches!(
            transfer_time(&pac),
            Err(DeviceError::MissingTransferGeometry(_))
        ));

        let empty = TransferGeometry {
            bus_width: 1,
            clock_hz: 10,
            bitstream_bytes: 0,
        };
        assert_eq!(empty.transfer_time(), Duration::ZERO);

        let fpta_1280 = TransferGeometry {
            bus_width: 8,
            clock_hz: 160_000_000,
            bitstream_bytes: 1280,
        };
        assert_eq!(fpta_1280.transfer_time(), Duration::from_nanos(8_000));
    }

    #[test]
    fn transfer_never_exceeds_program_time() {
        for p in builtin_profiles() {
            if let Ok(t) = transfer_time(&p) {
                assert!(t <= p.t_program(), "{}", p.name());
            }
        }
    }

    #[test]
    fn config_lengths() {
        assert_eq!(find_builtin("AN220E04").unwrap().config_bits(), 36_864);
        assert_eq!(find_builtin("ispPAC10").unwrap().config_bits(), 256);
        assert_eq!(find_builtin("FPTA2").unwrap().config_bits(), 4096);
    }

    #[test]
    fn rejects_invalid_profiles() {
        let slow = TransferGeometry {
            bus_width: 1,
            clock_hz: 1_000,
            bitstream_bytes: 1_000,
        };
        assert!(DeviceProfile::new(
            "x",
            DeviceKind::Fpaa,
            1,
            Duration::from_millis(1),
            Some(slow)
        )
        .is_err());
        assert!(DeviceProfile::new("x", DeviceKind::Fpaa, 1, Duration::ZERO, None).is_err());
        assert!(
            DeviceProfile::new("x", DeviceKind::Fpaa, 0, Duration::from_millis(1), None).is_err()
        );
        assert!(
            DeviceProfile::new("", DeviceKind::Fpaa, 1, Duration::from_millis(1), None).is_err()
        );
    }

    #[test]
    fn profile_file_roundtrip() {
        let text = r#"
[[device]]
name = "AN220E04"
kind = "FPAA"
size = 4
t_program_ms = 3.8
transfer = { bus_width = 1, clock_hz = 10000000, bitstream_bytes = 4608 }

[[device]]
name = "FPTA2-1280"
kind = "FPTA"
size = 64
t_program_ms = 0.008
transfer = { bus_width = 8, clock_hz = 160000000, bitstream_bytes = 1280 }
"#;
        let profiles = parse_profiles(text).unwrap();
        assert_eq!(profiles.len(), 2);
        assert_eq!(
            profiles[0].t_program(),
            find_builtin("AN220E04").unwrap().t_program()
        );
        assert_eq!(
            transfer_time(&profiles[1]).unwrap(),
            Duration::from_nanos(8_000)
        );

        let bad = "[[device]]\nname = \"x\"\nkind = \"FPGA\"\nsize = 1\nt_program_ms = 1.0\n";
        assert!(matches!(
            parse_profiles(bad),
            Err(DeviceError::ProfileSyntax(_))
        ));
    }
}
