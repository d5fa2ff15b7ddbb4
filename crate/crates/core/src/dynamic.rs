//! Transitions for measurements that change every round.
//!
//! The exponential scheme adds two own-measurement correction terms to the
//! static recursion. The window scheme keeps `L+1` slots per sensor; slot `j`
//! restarts from the current measurement whenever `k = j (mod L+1)` and then
//! replays the static window recursion for `L` rounds, so each measurement is
//! carried by exactly one slot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::static_consensus::{validate_window, Neighborhood, Rho};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DynamicAlgoParams {
    Exponential { rho: Rho },
    Window { l: usize },
}

impl DynamicAlgoParams {
    pub fn validate(&self) -> Result<()> {
        match self {
            DynamicAlgoParams::Exponential { .. } => Ok(()),
            DynamicAlgoParams::Window { l } => validate_window(*l),
        }
    }
}

/// Produces `y(round)`. `xs` holds own measurements newest first, starting
/// at `x(round)`; up to four are consumed. Neighbor measurements are never used.
pub fn dyn_exp_transition(round: usize, nb: &Neighborhood<'_>, xs: &[f64], rho: Rho) -> Result<f64> {
    let (r, lam) = (rho.get(), rho.lambda());
    let need_x = (round + 1).min(4);
    if xs.len() < need_x {
        return Err(Error::InsufficientHistory {
            round,
            what: "measurement",
            needed: need_x,
            available: xs.len(),
        });
    }
    match round {
        0 => Ok(lam * xs[0]),
        1 => {
            nb.require(round, 1, 1)?;
            Ok(nb.own[0] + r * (nb.left[0] + nb.right[0]) + lam * (xs[0] - xs[1]))
        }
        2 => {
            nb.require(round, 2, 2)?;
            Ok(nb.own[0] + r * (nb.left[0] - nb.left[1]) + r * (nb.right[0] - nb.right[1])
                - r * r * 2.0 * nb.own[1]
                + lam * (xs[0] - xs[1]))
        }
        _ => {
            nb.require(round, 3, 2)?;
            Ok(nb.own[0] + r * (nb.left[0] - nb.left[1]) + r * (nb.right[0] - nb.right[1])
                - r * r * (nb.own[1] - nb.own[2])
                + lam * (xs[0] - xs[1])
                - r * r * lam * (xs[2] - xs[3]))
        }
    }
}

/// Position of slot `slot` within its cycle at `round`, or `None` before its first restart.
pub fn slot_phase(round: usize, slot: usize, l: usize) -> Option<usize> {
    (round >= slot).then(|| (round - slot) % (l + 1))
}

/// Produces `z_slot(round)` for one sensor. `nb` carries the same slot's own
/// and neighbor histories, newest first.
pub fn z_slot_transition(round: usize, slot: usize, nb: &Neighborhood<'_>, x: f64, l: usize) -> Result<f64> {
    if slot > l {
        return Err(Error::PhaseMismatch {
            slot,
            round,
            reason: format!("only {} slots exist", l + 1),
        });
    }
    let Some(phase) = slot_phase(round, slot, l) else {
        return Ok(0.0);
    };
    let short = |needed: usize| Error::PhaseMismatch {
        slot,
        round,
        reason: format!(
            "phase {phase} needs {needed} values per history (own {}, left {}, right {})",
            nb.own.len(),
            nb.left.len(),
            nb.right.len()
        ),
    };
    let have = |own: usize, nbr: usize| nb.own.len() >= own && nb.left.len() >= nbr && nb.right.len() >= nbr;
    match phase {
        0 => Ok(x / (2 * l + 1) as f64),
        1 => {
            if !have(1, 1) {
                return Err(short(1));
            }
            Ok(nb.own[0] + nb.left[0] + nb.right[0])
        }
        2 => {
            if !have(2, 2) {
                return Err(short(2));
            }
            Ok(nb.own[0] + (nb.left[0] - nb.left[1]) + (nb.right[0] - nb.right[1]) - 2.0 * nb.own[1])
        }
        _ => {
            if !have(3, 2) {
                return Err(short(3));
            }
            Ok(nb.own[0] + (nb.left[0] - nb.left[1]) + (nb.right[0] - nb.right[1]) - (nb.own[1] - nb.own[2]))
        }
    }
}

/// `y(k) = z_j(k) + sum_{l != j} (z_l(k) - z_l(k-1))` with `j = k mod (L+1)`.
/// `previous` is `None` at round 0, where every slot's prior value is zero.
pub fn assemble_y(current: &[f64], previous: Option<&[f64]>, round: usize, l: usize) -> f64 {
    let j = round % (l + 1);
    let mut y = current[j];
    for (slot, &z) in current.iter().enumerate() {
        if slot != j {
            y += z - previous.map_or(0.0, |p| p[slot]);
        }
    }
    y
}
