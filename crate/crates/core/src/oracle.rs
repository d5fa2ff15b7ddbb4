//! Direct evaluation of every consensus target from its closed form.
//!
//! Nothing here calls the transition functions; agreement between a trace and
//! these sums is a check between two independent implementations.

use serde::{Deserialize, Serialize};

use crate::algorithm::AlgorithmSpec;
use crate::arbitrary::WeightTable;
use crate::chain::{wrap, Boundary, ChainConfig};
use crate::error::{Error, Result};
use crate::field::MeasurementField;
use crate::static_consensus::Rho;

/// Index semantics for sensors outside `0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// Indices wrap modulo `n`.
    Ring(usize),
    /// Measurements outside `0..n` are zero.
    Line(usize),
}

impl Domain {
    /// Truncated chains have no closed-form target.
    pub fn for_chain(config: &ChainConfig) -> Result<Domain> {
        match config.boundary {
            Boundary::Ring => Ok(Domain::Ring(config.n)),
            Boundary::ZeroHalo { .. } => Ok(Domain::Line(config.n)),
            Boundary::Truncated => Err(Error::validation(
                "chain.boundary",
                "a truncated chain has no closed-form target",
            )),
        }
    }

    fn x(self, field: &MeasurementField, i: i64, k: usize) -> Result<f64> {
        match self {
            Domain::Ring(n) => field.evaluate(wrap(i, n) as i64, k),
            Domain::Line(n) if i < 0 || i >= n as i64 => Ok(0.0),
            Domain::Line(_) => field.evaluate(i, k),
        }
    }

    fn require_window(self, l: usize) -> Result<()> {
        match self {
            Domain::Ring(n) if n < 2 * l + 1 => Err(Error::validation(
                "chain.n",
                format!("ring of {n} sensors is shorter than a window of {}", 2 * l + 1),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Truncation {
    /// Keep offsets up to `k`.
    Rounds(usize),
    /// Keep offsets until the remaining tail is below this bound.
    Tail(f64),
}

/// A truncated infinite sum with a bound on what was dropped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub value: f64,
    pub terms: usize,
    pub tail_bound: f64,
}

/// Offsets kept and the bound on the omitted tail for decay rate `r`.
fn cutoff(r: f64, scale: f64, bound: f64, trunc: Truncation) -> (usize, f64) {
    let tail = |k: usize| scale * 2.0 * bound * r.powi(k as i32 + 1) / (1.0 - r);
    match trunc {
        Truncation::Rounds(k) => (k, tail(k)),
        Truncation::Tail(eps) => {
            let mut k = 0;
            while tail(k) >= eps && k < 1 << 20 {
                k += 1;
            }
            (k, tail(k))
        }
    }
}

/// `lambda (x_i + sum_j rho^j (x_{i-j} + x_{i+j}))`.
pub fn exp_target(field: &MeasurementField, i: i64, rho: Rho, trunc: Truncation, domain: Domain) -> Result<Target> {
    asym_target(field, i, rho, rho, trunc, domain)
}

/// `c (x_i + sum_j rho_b^j x_{i-j} + rho_f^j x_{i+j})` with
/// `c = (1-rho_b)(1-rho_f)/(1-rho_b rho_f)`.
pub fn asym_target(
    field: &MeasurementField,
    i: i64,
    rho_b: Rho,
    rho_f: Rho,
    trunc: Truncation,
    domain: Domain,
) -> Result<Target> {
    let (b, f) = (rho_b.get(), rho_f.get());
    let c = (1.0 - b) * (1.0 - f) / (1.0 - b * f);
    let (k, tail_bound) = cutoff(b.max(f), c, field.bound(), trunc);
    let mut sum = domain.x(field, i, 0)?;
    let (mut pb, mut pf) = (1.0, 1.0);
    for j in 1..=k as i64 {
        pb *= b;
        pf *= f;
        sum += pb * domain.x(field, i - j, 0)? + pf * domain.x(field, i + j, 0)?;
    }
    Ok(Target {
        value: c * sum,
        terms: 2 * k + 1,
        tail_bound,
    })
}

/// Window mean after `k` rounds: offsets up to `min(k, L)`, divided by `2L+1`.
pub fn window_target(field: &MeasurementField, i: i64, l: usize, k: usize, domain: Domain) -> Result<f64> {
    domain.require_window(l)?;
    let reach = k.min(l) as i64;
    let mut sum = 0.0;
    for j in -reach..=reach {
        sum += domain.x(field, i + j, 0)?;
    }
    Ok(sum / (2 * l + 1) as f64)
}

/// `x_i/(2L_i+1) + sum_{j<=L_i} x_{i+-j}/(2L_{i+-j}+1)` after `k` rounds.
/// Lengths beyond the line reuse the nearest edge entry.
pub fn variable_window_target(field: &MeasurementField, i: i64, l: &[usize], k: usize, domain: Domain) -> Result<f64> {
    let n = l.len() as i64;
    let len_at = |s: i64| match domain {
        Domain::Ring(_) => l[s.rem_euclid(n) as usize],
        Domain::Line(_) => l[s.clamp(0, n - 1) as usize],
    };
    domain.require_window(l.iter().copied().max().unwrap_or(0))?;
    let reach = k.min(len_at(i)) as i64;
    let mut sum = 0.0;
    for j in -reach..=reach {
        sum += domain.x(field, i + j, 0)? / (2 * len_at(i + j) + 1) as f64;
    }
    Ok(sum)
}

/// `(1/K)(a_ii x_i + sum_{j<=k} a_{i,i-j} x_{i-j} + a_{i,i+j} x_{i+j})`, `k` capped at the radius.
pub fn arbitrary_target(field: &MeasurementField, i: i64, table: &WeightTable, k: usize, domain: Domain) -> Result<f64> {
    let periodic = matches!(domain, Domain::Ring(_));
    let reach = k.min(table.radius()) as i64;
    let mut sum = 0.0;
    for j in -reach..=reach {
        sum += table.weight(i, j, periodic)? * domain.x(field, i + j, 0)?;
    }
    Ok(sum / table.k())
}

/// `lambda (x_i(k) + sum_{j<=k} rho^j (x_{i-j}(k-j) + x_{i+j}(k-j)))`.
pub fn dyn_exp_target(field: &MeasurementField, i: i64, k: usize, rho: Rho, domain: Domain) -> Result<f64> {
    let r = rho.get();
    let mut sum = domain.x(field, i, k)?;
    let mut p = 1.0;
    for j in 1..=k {
        p *= r;
        let s = j as i64;
        sum += p * (domain.x(field, i - s, k - j)? + domain.x(field, i + s, k - j)?);
    }
    Ok(rho.lambda() * sum)
}

/// `(1/(2L+1)) (x_i(k) + sum_{j<=min(k,L)} (x_{i-j}(k-j) + x_{i+j}(k-j)))`.
pub fn dyn_window_target(field: &MeasurementField, i: i64, k: usize, l: usize, domain: Domain) -> Result<f64> {
    domain.require_window(l)?;
    let mut sum = domain.x(field, i, k)?;
    for j in 1..=k.min(l) {
        let s = j as i64;
        sum += domain.x(field, i - s, k - j)? + domain.x(field, i + s, k - j)?;
    }
    Ok(sum / (2 * l + 1) as f64)
}

/// Target `y[i][k]` for every real sensor and round of `config`.
pub fn oracle_trace(config: &ChainConfig, field: &MeasurementField, algo: &AlgorithmSpec) -> Result<Vec<Vec<f64>>> {
    let domain = Domain::for_chain(config)?;
    let mut out = vec![Vec::with_capacity(config.rounds + 1); config.n];
    for (i, row) in out.iter_mut().enumerate() {
        let i = i as i64;
        for k in 0..=config.rounds {
            let v = match algo {
                AlgorithmSpec::Exponential { rho } => exp_target(field, i, *rho, Truncation::Rounds(k), domain)?.value,
                AlgorithmSpec::Asymmetric { rho_b, rho_f } => {
                    asym_target(field, i, *rho_b, *rho_f, Truncation::Rounds(k), domain)?.value
                }
                AlgorithmSpec::Window { l } => window_target(field, i, *l, k, domain)?,
                AlgorithmSpec::VariableWindow { l } => variable_window_target(field, i, l, k, domain)?,
                AlgorithmSpec::Arbitrary { table } => arbitrary_target(field, i, table, k, domain)?,
                AlgorithmSpec::DynExponential { rho } => dyn_exp_target(field, i, k, *rho, domain)?,
                AlgorithmSpec::DynWindow { l } => dyn_window_target(field, i, k, *l, domain)?,
            };
            row.push(v);
        }
    }
    Ok(out)
}
