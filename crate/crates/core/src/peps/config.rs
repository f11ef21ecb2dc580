use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Up/down pattern of `L <= 64` spins; bit `i` set means site `i` is up.
///
/// Ordering is lexicographic on the bit string `s_0 s_1 ... s_{L-1}`
/// (`0 < 1`), which is also how configurations are printed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinConfiguration {
    len: u8,
    bits: u64,
}

impl SpinConfiguration {
    pub fn new(len: usize, bits: u64) -> Result<Self> {
        if len == 0 || len > 64 {
            return Err(Error::invalid(format!("configuration length {len} not in 1..=64")));
        }
        if len < 64 && bits >> len != 0 {
            return Err(Error::invalid("bits set beyond configuration length"));
        }
        Ok(SpinConfiguration {
            len: len as u8,
            bits,
        })
    }

    pub fn from_bools(spins: &[bool]) -> Result<Self> {
        let bits = spins
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &up)| acc | ((up as u64) << i));
        Self::new(spins.len(), bits)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Basis index of the configuration in a statevector.
    pub fn index(&self) -> usize {
        self.bits as usize
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn is_up(&self, site: usize) -> bool {
        (self.bits >> site) & 1 == 1
    }

    pub fn flipped(&self, site: usize) -> Self {
        SpinConfiguration {
            len: self.len,
            bits: self.bits ^ (1 << site),
        }
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.is_up(i)).collect()
    }
}

impl Ord for SpinConfiguration {
    fn cmp(&self, other: &Self) -> Ordering {
        let diff = self.bits ^ other.bits;
        if diff == 0 {
            return self.len.cmp(&other.len);
        }
        let first = diff.trailing_zeros();
        if (self.bits >> first) & 1 == 0 {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }
}

impl PartialOrd for SpinConfiguration {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SpinConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.is_up(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for SpinConfiguration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spins = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::invalid(format!("bad spin character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bools(&spins)
    }
}

impl serde::Serialize for SpinConfiguration {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for SpinConfiguration {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
