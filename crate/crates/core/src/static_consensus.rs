//! Transition functions for measurements that are constant in time.
//!
//! All four schemes share one two-sided recursion. With `b` and `f` the
//! weights applied to the backward (`i-1`) and forward (`i+1`) neighbor,
//! a sensor computes
//!
//! ```text
//! y(0)   = s x
//! y(1)   = y(0) + b yl(0) + f yr(0)
//! y(2)   = y(1) + b (yl(1) - yl(0)) + f (yr(1) - yr(0)) - 2 b f y(0)
//! y(k+1) = y(k) + b (yl(k) - yl(k-1)) + f (yr(k) - yr(k-1)) - b f (y(k-1) - y(k-2))
//! ```
//!
//! which adds exactly the measurements `k` hops away at round `k`.
//! Histories are passed newest first: `own[0] = y(k)`, `own[1] = y(k-1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight `rho` strictly inside `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Rho(f64);

impl Rho {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(Rho(value))
        } else {
            Err(Error::validation("rho", format!("must lie in (0, 1), got {value}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// `(1 - rho) / (1 + rho)`: the scale that passes constant fields unchanged.
    pub fn lambda(self) -> f64 {
        (1.0 - self.0) / (1.0 + self.0)
    }
}

impl TryFrom<f64> for Rho {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Rho::new(value)
    }
}

impl From<Rho> for f64 {
    fn from(r: Rho) -> f64 {
        r.0
    }
}

/// What a sensor knows when producing its next value.
#[derive(Clone, Copy, Debug)]
pub struct Neighborhood<'a> {
    pub own: &'a [f64],
    pub left: &'a [f64],
    pub right: &'a [f64],
}

impl<'a> Neighborhood<'a> {
    pub const EMPTY: Neighborhood<'static> = Neighborhood {
        own: &[],
        left: &[],
        right: &[],
    };

    pub(crate) fn require(&self, round: usize, own: usize, neighbor: usize) -> Result<()> {
        if self.own.len() < own {
            return Err(Error::InsufficientHistory {
                round,
                what: "own",
                needed: own,
                available: self.own.len(),
            });
        }
        let avail = self.left.len().min(self.right.len());
        if avail < neighbor {
            return Err(Error::InsufficientHistory {
                round,
                what: "neighbor",
                needed: neighbor,
                available: avail,
            });
        }
        Ok(())
    }
}

/// Coefficients of the shared recursion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoSided {
    pub scale: f64,
    pub backward: f64,
    pub forward: f64,
}

impl TwoSided {
    pub fn exponential(rho: Rho) -> Self {
        TwoSided {
            scale: rho.lambda(),
            backward: rho.get(),
            forward: rho.get(),
        }
    }

    pub fn asymmetric(rho_b: Rho, rho_f: Rho) -> Self {
        let (b, f) = (rho_b.get(), rho_f.get());
        TwoSided {
            scale: (1.0 - b) * (1.0 - f) / (1.0 - b * f),
            backward: b,
            forward: f,
        }
    }

    pub fn window(l: usize) -> Self {
        TwoSided {
            scale: 1.0 / (2 * l + 1) as f64,
            backward: 1.0,
            forward: 1.0,
        }
    }

    /// Produces `y(round)`; `round = 0` is the initialization from `x`.
    pub fn step(&self, round: usize, nb: &Neighborhood<'_>, x: f64) -> Result<f64> {
        let (b, f) = (self.backward, self.forward);
        match round {
            0 => Ok(self.scale * x),
            1 => {
                nb.require(round, 1, 1)?;
                Ok(nb.own[0] + b * nb.left[0] + f * nb.right[0])
            }
            2 => {
                nb.require(round, 2, 2)?;
                Ok(nb.own[0] + b * (nb.left[0] - nb.left[1]) + f * (nb.right[0] - nb.right[1])
                    - b * f * 2.0 * nb.own[1])
            }
            _ => {
                nb.require(round, 3, 2)?;
                Ok(nb.own[0] + b * (nb.left[0] - nb.left[1]) + f * (nb.right[0] - nb.right[1])
                    - b * f * (nb.own[1] - nb.own[2]))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum StaticAlgoParams {
    Exponential { rho: Rho },
    Asymmetric { rho_b: Rho, rho_f: Rho },
    Window { l: usize },
    VariableWindow { l: Vec<usize> },
}

impl StaticAlgoParams {
    pub fn validate(&self) -> Result<()> {
        match self {
            StaticAlgoParams::Exponential { .. } | StaticAlgoParams::Asymmetric { .. } => Ok(()),
            StaticAlgoParams::Window { l } => validate_window(*l),
            StaticAlgoParams::VariableWindow { l } => validate_window_profile(l, false),
        }
    }
}

pub(crate) fn validate_window(l: usize) -> Result<()> {
    if l == 0 {
        Err(Error::validation("algorithm.L", "window half-width must be at least 1"))
    } else {
        Ok(())
    }
}

/// Checks `L_i >= 1` and `|L_i - L_{i+1}| <= 1`, including the wrap pair on a ring.
pub fn validate_window_profile(l: &[usize], periodic: bool) -> Result<()> {
    if l.is_empty() {
        return Err(Error::validation("algorithm.L", "empty window profile"));
    }
    if let Some(pos) = l.iter().position(|&v| v == 0) {
        return Err(Error::validation("algorithm.L", format!("L[{pos}] must be at least 1")));
    }
    let mut pairs: Vec<(usize, usize)> = (0..l.len() - 1).map(|i| (i, i + 1)).collect();
    if periodic && l.len() > 1 {
        pairs.push((l.len() - 1, 0));
    }
    for (a, b) in pairs {
        if l[a].abs_diff(l[b]) > 1 {
            return Err(Error::validation(
                "algorithm.L",
                format!("adjacent window lengths differ by more than one: L[{a}]={}, L[{b}]={}", l[a], l[b]),
            ));
        }
    }
    Ok(())
}

/// Symmetric exponential weighting.
pub fn exp_transition(round: usize, nb: &Neighborhood<'_>, x: f64, rho: Rho) -> Result<f64> {
    TwoSided::exponential(rho).step(round, nb, x)
}

/// Separate backward (`rho_b`) and forward (`rho_f`) rates.
pub fn asym_transition(round: usize, nb: &Neighborhood<'_>, x: f64, rho_b: Rho, rho_f: Rho) -> Result<f64> {
    TwoSided::asymmetric(rho_b, rho_f).step(round, nb, x)
}

/// Uniform window of half-width `l`; rounds past `l` are rejected.
pub fn window_transition(round: usize, nb: &Neighborhood<'_>, x: f64, l: usize) -> Result<f64> {
    validate_window(l)?;
    if round > l {
        return Err(Error::Terminated {
            last: l,
            requested: round,
        });
    }
    TwoSided::window(l).step(round, nb, x)
}

/// Per-sensor window length `l_own`; the neighbor lengths must satisfy the
/// adjacency constraint.
pub fn variable_window_transition(
    round: usize,
    nb: &Neighborhood<'_>,
    x: f64,
    l_own: usize,
    l_left: usize,
    l_right: usize,
) -> Result<f64> {
    validate_window_profile(&[l_left, l_own, l_right], false)?;
    window_transition(round, nb, x, l_own)
}

/// Final-value weight sum `1/(2L_i+1) + sum_j (1/(2L_{i-j}+1) + 1/(2L_{i+j}+1))`
/// for each sensor of a ring profile. Equals 1 only when the profile is flat
/// across the window.
pub fn variable_window_weight_sums(l: &[usize]) -> Vec<f64> {
    let n = l.len() as i64;
    let w = |j: i64| 1.0 / (2 * l[j.rem_euclid(n) as usize] + 1) as f64;
    (0..n)
        .map(|i| {
            let li = l[i as usize] as i64;
            w(i) + (1..=li).map(|j| w(i - j) + w(i + j)).sum::<f64>()
        })
        .collect()
}
