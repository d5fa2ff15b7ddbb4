//! Chain geometry: sensor count, boundary policy, and neighbor arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum Boundary {
    /// Indices wrap modulo `n`.
    #[default]
    Ring,
    /// Ghost sensors on both sides run the algorithm with `x = 0`.
    /// `depth = None` means one ghost per simulated round.
    ZeroHalo {
        #[serde(default)]
        depth: Option<usize>,
    },
    /// Missing neighbors contribute zero to every term.
    Truncated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n: usize,
    #[serde(default)]
    pub boundary: Boundary,
    pub rounds: usize,
    #[serde(default)]
    pub master_seed: u64,
}

impl ChainConfig {
    pub fn ring(n: usize, rounds: usize) -> Self {
        ChainConfig {
            n,
            boundary: Boundary::Ring,
            rounds,
            master_seed: 0,
        }
    }

    pub fn zero_halo(n: usize, rounds: usize) -> Self {
        ChainConfig {
            n,
            boundary: Boundary::ZeroHalo { depth: None },
            rounds,
            master_seed: 0,
        }
    }

    pub fn truncated(n: usize, rounds: usize) -> Self {
        ChainConfig {
            n,
            boundary: Boundary::Truncated,
            rounds,
            master_seed: 0,
        }
    }

    pub fn halo_depth(&self) -> usize {
        match self.boundary {
            Boundary::ZeroHalo { depth } => depth.unwrap_or(self.rounds),
            _ => 0,
        }
    }

    /// Checks the invariants that do not depend on the algorithm.
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::validation("chain.n", format!("need at least 3 sensors, got {}", self.n)));
        }
        if let Boundary::ZeroHalo { depth: Some(d) } = self.boundary {
            if d < self.rounds {
                return Err(Error::validation(
                    "chain.boundary.depth",
                    format!("halo depth {d} is smaller than rounds {}", self.rounds),
                ));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Layout {
            n: self.n,
            halo: self.halo_depth(),
            periodic: self.boundary == Boundary::Ring,
        }
    }
}

/// Index arithmetic for one simulation. Internal slots `0..len()` map to
/// sensor ids `slot - halo`; real sensors have ids `0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub halo: usize,
    pub periodic: bool,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.n + 2 * self.halo
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sensor_id(&self, slot: usize) -> i64 {
        slot as i64 - self.halo as i64
    }

    pub fn is_real(&self, slot: usize) -> bool {
        slot >= self.halo && slot < self.halo + self.n
    }

    /// `(left, right)` neighbor slots; `None` past a non-periodic edge.
    pub fn neighbors(&self, slot: usize) -> (Option<usize>, Option<usize>) {
        let len = self.len();
        if self.periodic {
            (Some((slot + len - 1) % len), Some((slot + 1) % len))
        } else {
            let left = slot.checked_sub(1);
            let right = if slot + 1 < len { Some(slot + 1) } else { None };
            (left, right)
        }
    }
}

/// Hop distance between two sensor ids under a boundary policy.
pub fn hop_distance(boundary: &Boundary, n: usize, a: i64, b: i64) -> u64 {
    let d = a.abs_diff(b);
    match boundary {
        Boundary::Ring => {
            let n = n as u64;
            let r = d % n;
            r.min(n - r)
        }
        _ => d,
    }
}

/// Maps a sensor id onto the real chain for periodic lookups.
pub fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_neighbors_wrap() {
        let l = ChainConfig::ring(5, 3).layout();
        assert_eq!(l.neighbors(0), (Some(4), Some(1)));
        assert_eq!(l.neighbors(4), (Some(3), Some(0)));
        assert_eq!(l.len(), 5);
    }

    #[test]
    fn halo_layout() {
        let c = ChainConfig::zero_halo(4, 3);
        let l = c.layout();
        assert_eq!(l.len(), 10);
        assert_eq!(l.sensor_id(0), -3);
        assert!(l.is_real(3) && l.is_real(6) && !l.is_real(7));
        assert_eq!(l.neighbors(0), (None, Some(1)));
        assert_eq!(l.neighbors(9), (Some(8), None));
    }

    #[test]
    fn validation() {
        assert!(ChainConfig::ring(2, 1).validate().is_err());
        let mut c = ChainConfig::zero_halo(8, 10);
        c.boundary = Boundary::ZeroHalo { depth: Some(4) };
        assert!(c.validate().is_err());
        c.boundary = Boundary::ZeroHalo { depth: Some(10) };
        assert!(c.validate().is_ok());
    }

    #[test]
    fn ring_distance() {
        assert_eq!(hop_distance(&Boundary::Ring, 8, 0, 7), 1);
        assert_eq!(hop_distance(&Boundary::Ring, 8, 5, 2), 3);
        assert_eq!(hop_distance(&Boundary::Truncated, 8, 0, 7), 7);
    }
}
