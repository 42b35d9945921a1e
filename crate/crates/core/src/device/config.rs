use std::sync::Arc;

use bitvec::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DeviceError, DeviceProfile};

pub type Bits = BitVec<u64, Lsb0>;

/// What a contiguous range of configuration bits controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldKind {
    /// Gray-coded fixed-point parameter spanning `[min, max]` over `levels`
    /// quantization steps (default `2^width`). Codes beyond the last level are
    /// out of range.
    Param {
        min: f64,
        max: f64,
        #[serde(default)]
        levels: Option<u64>,
    },
    /// A single programmable switch; 1 = closed.
    Switch,
    /// Bits present in the bitstream but irrelevant to the circuit under test.
    Reserved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub name: String,
    pub offset: usize,
    pub width: usize,
    pub kind: FieldKind,
    /// FPAA module or FPTA cell that realizes this field.
    pub module: Option<u32>,
}

impl FieldSpec {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.width
    }

    pub fn level_count(&self) -> u64 {
        match self.kind {
            FieldKind::Param {
                levels: Some(l), ..
            } => l,
            _ => 1u64 << self.width.min(63),
        }
    }
}

/// Layout of a configuration bitstream. Every bit belongs to exactly one field.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeMap {
    fields: Vec<FieldSpec>,
    len: usize,
    /// Physical parameters of the realized circuit (e.g. plant gain) that are
    /// not configured but can drift.
    physical: Vec<String>,
}

/// A field definition before it is placed in the bitstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDef {
    pub name: String,
    pub width: usize,
    #[serde(flatten)]
    pub kind: FieldKind,
    #[serde(default)]
    pub module: Option<u32>,
}

impl DecodeMap {
    pub fn new(
        mut fields: Vec<FieldSpec>,
        len: usize,
        physical: Vec<String>,
    ) -> Result<Self, DeviceError> {
        fields.sort_by_key(|f| f.offset);
        let mut cursor = 0;
        for f in &fields {
            if f.width == 0 {
                return Err(DeviceError::DecodeMap(format!(
                    "field `{}` has zero width",
                    f.name
                )));
            }
            if f.offset < cursor {
                return Err(DeviceError::DecodeMap(format!(
                    "field `{}` overlaps bit {}",
                    f.name, f.offset
                )));
            }
            if f.offset > cursor {
                return Err(DeviceError::DecodeMap(format!(
                    "bits {}..{} are unmapped",
                    cursor, f.offset
                )));
            }
            if let FieldKind::Param { min, max, levels } = f.kind {
                if f.width > 63 {
                    return Err(DeviceError::DecodeMap(format!(
                        "parameter `{}` is wider than 63 bits",
                        f.name
                    )));
                }
                if !(min.is_finite() && max.is_finite() && min <= max) {
                    return Err(DeviceError::DecodeMap(format!(
                        "parameter `{}` has invalid range",
                        f.name
                    )));
                }
                if let Some(l) = levels {
                    if l < 2 || l > 1u64 << f.width {
                        return Err(DeviceError::DecodeMap(format!(
                            "parameter `{}`: levels must lie in 2..=2^width",
                            f.name
                        )));
                    }
                }
            }
            if matches!(f.kind, FieldKind::Switch) && f.width != 1 {
                return Err(DeviceError::DecodeMap(format!(
                    "switch `{}` must be one bit wide",
                    f.name
                )));
            }
            cursor = f.offset + f.width;
        }
        if cursor != len {
            return Err(DeviceError::DecodeMap(format!(
                "bits {cursor}..{len} are unmapped"
            )));
        }
        let mut names: Vec<&str> = fields
            .iter()
            .filter(|f| !matches!(f.kind, FieldKind::Reserved))
            .map(|f| f.name.as_str())
            .chain(physical.iter().map(String::as_str))
            .collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(DeviceError::DecodeMap(format!("duplicate name `{}`", w[0])));
        }
        Ok(Self {
            fields,
            len,
            physical,
        })
    }

    /// Places `defs` back to back from bit 0 and fills the rest of a
    /// `len`-bit stream with a single reserved field.
    pub fn layout(
        defs: &[FieldDef],
        len: usize,
        physical: Vec<String>,
    ) -> Result<Self, DeviceError> {
        let mut fields = Vec::with_capacity(defs.len() + 1);
        let mut offset = 0;
        for d in defs {
            fields.push(FieldSpec {
                name: d.name.clone(),
                offset,
                width: d.width,
                kind: d.kind.clone(),
                module: d.module,
            });
            offset += d.width;
        }
        if offset > len {
            return Err(DeviceError::DecodeMap(format!(
                "fields need {offset} bits but the device bitstream has {len}"
            )));
        }
        if offset < len {
            fields.push(FieldSpec {
                name: "reserved".into(),
                offset,
                width: len - offset,
                kind: FieldKind::Reserved,
                module: None,
            });
        }
        Self::new(fields, len, physical)
    }

    /// A map with no circuit meaning: the whole stream is reserved.
    pub fn opaque(len: usize) -> Self {
        Self::layout(&[], len, Vec::new()).expect("opaque layout is always valid")
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }

    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields
            .iter()
            .find(|f| f.name == name && !matches!(f.kind, FieldKind::Reserved))
    }

    pub fn physical(&self) -> &[String] {
        &self.physical
    }

    /// Names that a drift fault may target.
    pub fn has_parameter(&self, id: &str) -> bool {
        self.physical.iter().any(|p| p == id)
            || self
                .fields
                .iter()
                .any(|f| f.name == id && matches!(f.kind, FieldKind::Param { .. }))
    }

    /// Number of leading bits that carry circuit meaning.
    pub fn active_len(&self) -> usize {
        self.fields
            .iter()
            .filter(|f| !matches!(f.kind, FieldKind::Reserved))
            .map(|f| f.offset + f.width)
            .max()
            .unwrap_or(0)
    }
}

pub fn gray_encode(level: u64) -> u64 {
    level ^ (level >> 1)
}

pub fn gray_decode(mut code: u64) -> u64 {
    let mut shift = 1;
    while shift < 64 {
        code ^= code >> shift;
        shift <<= 1;
    }
    code
}

/// Reads `width` bits starting at `offset`, least significant bit first.
pub fn read_field(bits: &BitSlice<u64, Lsb0>, offset: usize, width: usize) -> u64 {
    bits[offset..offset + width].load_le::<u64>()
}

pub fn write_field(bits: &mut BitSlice<u64, Lsb0>, offset: usize, width: usize, value: u64) {
    bits[offset..offset + width].store_le::<u64>(value);
}

/// A genome: one bitstream for one device.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    device: Arc<DeviceProfile>,
    decode_map: Arc<DecodeMap>,
    bits: Bits,
}

impl Configuration {
    pub fn new(
        device: Arc<DeviceProfile>,
        decode_map: Arc<DecodeMap>,
        bits: Bits,
    ) -> Result<Self, DeviceError> {
        let expected = device.config_bits();
        if decode_map.len() != expected {
            return Err(DeviceError::LengthMismatch {
                expected,
                actual: decode_map.len(),
            });
        }
        if bits.len() != expected {
            return Err(DeviceError::LengthMismatch {
                expected,
                actual: bits.len(),
            });
        }
        Ok(Self {
            device,
            decode_map,
            bits,
        })
    }

    pub fn zeros(
        device: Arc<DeviceProfile>,
        decode_map: Arc<DecodeMap>,
    ) -> Result<Self, DeviceError> {
        let len = device.config_bits();
        Self::new(device, decode_map, bitvec![u64, Lsb0; 0; len])
    }

    pub fn random<R: RngCore>(
        device: Arc<DeviceProfile>,
        decode_map: Arc<DecodeMap>,
        rng: &mut R,
    ) -> Result<Self, DeviceError> {
        let len = device.config_bits();
        let words = len.div_ceil(64);
        let mut bits = Bits::from_vec((0..words).map(|_| rng.next_u64()).collect());
        bits.truncate(len);
        Self::new(device, decode_map, bits)
    }

    pub fn device(&self) -> &Arc<DeviceProfile> {
        &self.device
    }

    pub fn decode_map(&self) -> &Arc<DecodeMap> {
        &self.decode_map
    }

    pub fn bits(&self) -> &Bits {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut Bits {
        &mut self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn same_layout(&self, other: &Configuration) -> bool {
        (Arc::ptr_eq(&self.device, &other.device) || self.device == other.device)
            && (Arc::ptr_eq(&self.decode_map, &other.decode_map)
                || self.decode_map == other.decode_map)
    }

    /// Writes a Gray-coded quantization level into a parameter field.
    pub fn set_level(&mut self, field: &str, level: u64) -> Result<(), DeviceError> {
        let f = self
            .decode_map
            .field(field)
            .ok_or_else(|| DeviceError::InvalidTarget(format!("no field `{field}`")))?
            .clone();
        write_field(&mut self.bits, f.offset, f.width, gray_encode(level));
        Ok(())
    }

    /// Bits of the circuit-relevant prefix as a `0`/`1` string, bit 0 first.
    pub fn active_bitstring(&self) -> String {
        self.bits[..self.decode_map.active_len()]
            .iter()
            .map(|b| if *b { '1' } else { '0' })
            .collect()
    }

    /// Sets the leading bits from a `0`/`1` string, bit 0 first.
    pub fn set_prefix(&mut self, text: &str) -> Result<(), DeviceError> {
        if text.len() > self.bits.len() {
            return Err(DeviceError::LengthMismatch {
                expected: self.bits.len(),
                actual: text.len(),
            });
        }
        for (i, c) in text.chars().enumerate() {
            let v = match c {
                '0' => false,
                '1' => true,
                other => {
                    return Err(DeviceError::InvalidTarget(format!(
                        "invalid bit character `{other}`"
                    )))
                }
            };
            self.bits.set(i, v);
        }
        Ok(())
    }
}

/// Uniformly random bitstream for `profile`, reproducible from `rng_seed`.
pub fn random_configuration(profile: &DeviceProfile, rng_seed: u64) -> Configuration {
    let device = Arc::new(profile.clone());
    let map = Arc::new(DecodeMap::opaque(profile.config_bits()));
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Configuration::random(device, map, &mut rng).expect("opaque map matches device length")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::find_builtin;

    #[test]
    fn gray_roundtrip_and_adjacency() {
        for level in 0..1024u64 {
            assert_eq!(gray_decode(gray_encode(level)), level);
            let diff = gray_encode(level) ^ gray_encode(level + 1);
            assert_eq!(diff.count_ones(), 1);
        }
    }

    #[test]
    fn random_is_deterministic() {
        let p = find_builtin("AN220E04").unwrap();
        let a = random_configuration(&p, 7);
        let b = random_configuration(&p, 7);
        assert_eq!(a.bits(), b.bits());
        assert_eq!(a.len(), 36_864);
        let c = random_configuration(&p, 8);
        assert_ne!(a.bits(), c.bits());
    }

    #[test]
    fn random_is_frozen_across_platforms() {
        // first word of the ChaCha8 stream for seed 42
        let p = find_builtin("FPTA2").unwrap();
        let c = random_configuration(&p, 42);
        assert_eq!(read_field(c.bits(), 0, 64), 12_578_764_544_318_200_737);
    }

    #[test]
    fn decode_map_validation() {
        let sw = |name: &str, offset| FieldSpec {
            name: name.into(),
            offset,
            width: 1,
            kind: FieldKind::Switch,
            module: None,
        };
        assert!(DecodeMap::new(vec![sw("a", 0), sw("b", 1)], 2, vec![]).is_ok());
        assert!(
            DecodeMap::new(vec![sw("a", 0), sw("b", 2)], 3, vec![]).is_err(),
            "gap"
        );
        assert!(
            DecodeMap::new(vec![sw("a", 0), sw("b", 0)], 1, vec![]).is_err(),
            "overlap"
        );
        assert!(
            DecodeMap::new(vec![sw("a", 0)], 2, vec![]).is_err(),
            "tail unmapped"
        );
        assert!(
            DecodeMap::new(vec![sw("a", 0), sw("a", 1)], 2, vec![]).is_err(),
            "duplicate"
        );
        let defs = vec![FieldDef {
            name: "k".into(),
            width: 8,
            kind: FieldKind::Param {
                min: 0.0,
                max: 1.0,
                levels: None,
            },
            module: None,
        }];
        let m = DecodeMap::layout(&defs, 64, vec!["plant_gain".into()]).unwrap();
        assert_eq!(m.fields().len(), 2);
        assert_eq!(m.active_len(), 8);
        assert!(
            m.has_parameter("k") && m.has_parameter("plant_gain") && !m.has_parameter("reserved")
        );
        assert!(DecodeMap::layout(&defs, 4, vec![]).is_err());
    }

    #[test]
    fn field_io() {
        let mut bits = bitvec![u64, Lsb0; 0; 100];
        write_field(&mut bits, 60, 8, 0xA5);
        assert_eq!(read_field(&bits, 60, 8), 0xA5);
        assert!(bits[60]);
        assert!(!bits[61]);
    }
}
