//! Random inter-sensor spacing.
//!
//! With gap `d` between neighbors the weight of a reading `j` sensors away is
//! `rho^(d_1 + ... + d_j)`. A single constant `K` can only make the output
//! unbiased, so the output has a variance driven by the moments of
//! `xi = rho^d`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arbitrary::WeightTable;
use crate::error::{Error, Result};
use crate::field::{derive_seed, MeasurementField};
use crate::static_consensus::Rho;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpacingLaw {
    /// Density `e^{-d}`: exponential gaps of mean 1.
    ExpDensity,
    /// Uniform on `[1-eta, 1+eta]`.
    Uniform { eta: f64 },
}

impl SpacingLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SpacingLaw::ExpDensity => Ok(()),
            SpacingLaw::Uniform { eta } if eta > 0.0 && eta < 1.0 => Ok(()),
            SpacingLaw::Uniform { eta } => Err(Error::validation("spacing.eta", format!("must lie in (0, 1), got {eta}"))),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            SpacingLaw::ExpDensity => loop {
                // zero has probability zero but is representable
                let d: f64 = rng.sample(Exp1);
                if d > 0.0 {
                    return d;
                }
            },
            SpacingLaw::Uniform { eta } => rng.random_range(1.0 - eta..=1.0 + eta),
        }
    }

    /// `E[rho^d]`.
    pub fn mean_xi(&self, rho: Rho) -> f64 {
        let lr = rho.get().ln();
        match *self {
            SpacingLaw::ExpDensity => 1.0 / (1.0 - lr),
            SpacingLaw::Uniform { eta } => {
                // (rho^{1+eta} - rho^{1-eta}) / (2 eta log rho) = rho sinh(t)/t, t = eta log rho
                let t = eta * lr;
                let shape = if t.abs() < 1e-8 { 1.0 + t * t / 6.0 } else { t.sinh() / t };
                rho.get() * shape
            }
        }
    }

    /// `E[rho^{2d}]`.
    pub fn mean_xi2(&self, rho: Rho) -> f64 {
        let r2 = Rho::new(rho.get() * rho.get()).expect("square of a value in (0,1)");
        self.mean_xi(r2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingModel {
    #[serde(flatten)]
    pub law: SpacingLaw,
    pub seed: u64,
}

impl SpacingModel {
    pub fn sample(&self, count: usize) -> Result<SpacingDraw> {
        sample_spacings(self.law, count, self.seed)
    }
}

/// Sensors `0..=gaps.len()` along a line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingDraw {
    /// `gaps[i]` separates sensors `i` and `i+1`.
    pub gaps: Vec<f64>,
    /// Cumulative position of each sensor, starting at 0.
    pub positions: Vec<f64>,
}

impl SpacingDraw {
    pub fn from_gaps(gaps: Vec<f64>) -> Self {
        let mut positions = Vec::with_capacity(gaps.len() + 1);
        positions.push(0.0);
        let mut acc = 0.0;
        for g in &gaps {
            acc += g;
            positions.push(acc);
        }
        SpacingDraw { gaps, positions }
    }

    pub fn sensors(&self) -> usize {
        self.positions.len()
    }

    /// Distance between sensors `i` and `j`, the sum of the gaps between them.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.gaps[a..b].iter().sum()
    }
}

pub fn sample_spacings(law: SpacingLaw, count: usize, seed: u64) -> Result<SpacingDraw> {
    law.validate()?;
    if count == 0 {
        return Err(Error::validation("spacing.count", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(SpacingDraw::from_gaps((0..count).map(|_| law.sample(&mut rng)).collect()))
}

/// `(-log rho) / (2 - log rho)`.
pub fn k_poisson(rho: Rho) -> f64 {
    let a = -rho.get().ln();
    a / (2.0 + a)
}

/// `(1 - E[xi]) / (1 + E[xi])` for gaps uniform on `[1-eta, 1+eta]`.
pub fn k_uniform(rho: Rho, eta: f64) -> Result<f64> {
    let law = SpacingLaw::Uniform { eta };
    law.validate()?;
    Ok(k_for_law(law, rho))
}

pub fn k_for_law(law: SpacingLaw, rho: Rho) -> f64 {
    let m = law.mean_xi(rho);
    (1.0 - m) / (1.0 + m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingMoments {
    pub e_xi: f64,
    pub e_xi2: f64,
    pub var_xi: f64,
    pub var_u: f64,
    pub var_y: f64,
}

/// Closed-form moments for exponential gaps.
pub fn spacing_moments(rho: Rho) -> SpacingMoments {
    let lr = rho.get().ln();
    let e_xi = 1.0 / (1.0 - lr);
    let e_xi2 = 1.0 / (1.0 - 2.0 * lr);
    SpacingMoments {
        e_xi,
        e_xi2,
        var_xi: e_xi2 - e_xi * e_xi,
        var_u: -1.0 / (2.0 * lr),
        var_y: -lr / (2.0 - lr).powi(2),
    }
}

/// Moments for any law through the fixed point `var_u = var_xi E[u]^2 / (1 - E[xi^2])`,
/// `E[u] = 1/(1 - E[xi])`.
pub fn law_moments(law: SpacingLaw, rho: Rho) -> SpacingMoments {
    let e_xi = law.mean_xi(rho);
    let e_xi2 = law.mean_xi2(rho);
    let var_xi = e_xi2 - e_xi * e_xi;
    let e_u = 1.0 / (1.0 - e_xi);
    let var_u = var_xi * e_u * e_u / (1.0 - e_xi2);
    let k = k_for_law(law, rho);
    SpacingMoments {
        e_xi,
        e_xi2,
        var_xi,
        var_u,
        var_y: 2.0 * k * k * var_u,
    }
}

pub const DEFAULT_TAIL: f64 = 1e-12;

/// `K [x_i + sum_j rho^{d(i,i+j)} x_{i+j} + rho^{d(i,i-j)} x_{i-j}]`, each side
/// summed until `rho^d < tail`. Sensor `j` of the draw reads `field` at `(j, 0)`.
pub fn weighted_target(
    draw: &SpacingDraw,
    field: &MeasurementField,
    i: usize,
    rho: Rho,
    k: f64,
    tail: f64,
) -> Result<f64> {
    let n = draw.sensors();
    if i >= n {
        return Err(Error::validation("spacing.sensor", format!("{i} is outside a draw of {n} sensors")));
    }
    let lr = rho.get().ln();
    let reach = tail.ln() / lr;
    let short = || {
        let mean_gap = draw.positions[n - 1] / draw.gaps.len() as f64;
        Error::NeedMoreSensors {
            required: 2 * (reach / mean_gap).ceil() as usize + 1,
            available: n,
        }
    };
    let mut sum = field.evaluate(i as i64, 0)?;
    for dir in [-1i64, 1] {
        let mut j = i as i64;
        loop {
            j += dir;
            if j < 0 || j >= n as i64 {
                return Err(short());
            }
            let d = (draw.positions[j as usize] - draw.positions[i]).abs();
            let w = (d * lr).exp();
            if w < tail {
                break;
            }
            sum += w * field.evaluate(j, 0)?;
        }
    }
    Ok(k * sum)
}

/// `a[i][i+j] = rho^{d(i, i+j)}` with `K = 1`. The draw must extend `radius`
/// sensors past both ends of the chain; row `i` is draw sensor `radius + i`.
pub fn spacing_weight_table(draw: &SpacingDraw, rho: Rho, radius: usize) -> Result<WeightTable> {
    let total = draw.sensors();
    if total < 2 * radius + 1 {
        return Err(Error::NeedMoreSensors {
            required: 2 * radius + 1,
            available: total,
        });
    }
    let n = total - 2 * radius;
    let lr = rho.get().ln();
    let rows = (0..n)
        .map(|i| {
            let c = radius + i;
            (c - radius..=c + radius)
                .map(|j| (draw.distance(c, j) * lr).exp())
                .collect()
        })
        .collect();
    WeightTable::new(rows, 1.0, radius)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Normalization {
    /// Multiply raw sums by an analytic constant.
    Constant { k: f64 },
    /// Divide each sensor's raw sum by its own row sum.
    RowSums,
}

/// Post-step for raw weighted sums produced with `K = 1`.
pub fn normalize(raw: &[f64], table: &WeightTable, mode: Normalization) -> Vec<f64> {
    match mode {
        Normalization::Constant { k } => raw.iter().map(|v| v * k).collect(),
        Normalization::RowSums => raw.iter().zip(table.row_sums()).map(|(v, s)| v / s).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SpacingReport {
    pub rho: f64,
    pub law: SpacingLaw,
    pub K_analytic: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub var_analytic: f64,
    pub var_sampled: f64,
    pub var_se: f64,
    pub replicates: usize,
}

pub const MIN_SPACING_REPLICATES: usize = 1000;

/// Mean and variance of the all-ones target over independent draws.
pub fn monte_carlo_spacing(rho: Rho, law: SpacingLaw, replicates: usize, seed: u64) -> Result<SpacingReport> {
    law.validate()?;
    if replicates < MIN_SPACING_REPLICATES {
        return Err(Error::validation(
            "analysis.replicates",
            format!("need at least {MIN_SPACING_REPLICATES}, got {replicates}"),
        ));
    }
    let k = k_for_law(law, rho);
    let ones = MeasurementField::constant(1.0);
    let side = (DEFAULT_TAIL.ln() / rho.get().ln()).ceil() as usize * 2 + 16;
    let samples: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut half = side;
            for attempt in 0u64.. {
                let draw = sample_spacings(law, 2 * half, derive_seed(seed, r as u64, attempt))?;
                match weighted_target(&draw, &ones, half, rho, k, DEFAULT_TAIL) {
                    Err(Error::NeedMoreSensors { .. }) => half *= 2,
                    other => return other,
                }
            }
            unreachable!()
        })
        .collect::<Result<_>>()?;

    let r = replicates as f64;
    let mean = samples.iter().sum::<f64>() / r;
    let m2 = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / r;
    let m4 = samples.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / r;
    let var = m2 * r / (r - 1.0);
    Ok(SpacingReport {
        rho: rho.get(),
        law,
        K_analytic: k,
        mean,
        mean_se: (var / r).sqrt(),
        var_analytic: law_moments(law, rho).var_y,
        var_sampled: var,
        var_se: ((m4 - m2 * m2 * (r - 3.0) / (r - 1.0)) / r).max(0.0).sqrt(),
        replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{exp_target, Domain, Truncation};

    fn rho(v: f64) -> Rho {
        Rho::new(v).unwrap()
    }

    #[test]
    fn k_values() {
        let e = rho((-1.0f64).exp());
        assert!((k_poisson(e) - 1.0 / 3.0).abs() < 1e-15);
        for x in [0.01, 0.05] {
            let r = rho(1.0 - x);
            assert!((k_poisson(r) - x / 2.0).abs() / (x / 2.0) <= 0.05);
            for eta in [0.1, 0.3, 0.9] {
                assert!((k_uniform(r, eta).unwrap() - x / 2.0).abs() / (x / 2.0) <= 0.05);
            }
        }
        let lim = k_uniform(rho(0.7), 1e-12).unwrap();
        assert!((lim - 0.3 / 1.7).abs() < 1e-12);
        assert!(k_uniform(rho(0.7), 1.0).is_err());
    }

    #[test]
    fn uniform_k_matches_printed_form() {
        let (r, eta) = (0.9f64, 0.5f64);
        let lr = r.ln();
        let a = r.powf(1.0 + eta) - r.powf(1.0 - eta);
        let printed = (2.0 * eta * lr - a) / (2.0 * eta * lr + a);
        assert!((k_uniform(rho(r), eta).unwrap() - printed).abs() < 1e-14);
    }

    #[test]
    fn moments_at_inverse_e() {
        let m = spacing_moments(rho((-1.0f64).exp()));
        assert!((m.e_xi - 0.5).abs() < 1e-15);
        assert!((m.e_xi2 - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.var_u - 0.5).abs() < 1e-15);
        assert!((m.var_y - 1.0 / 9.0).abs() < 1e-15);
        let g = law_moments(SpacingLaw::ExpDensity, rho((-1.0f64).exp()));
        assert!((g.var_u - m.var_u).abs() < 1e-14);
    }

    #[test]
    fn variance_identity_over_grid() {
        for s in 1..=50 {
            let r = rho(s as f64 / 51.0);
            let m = spacing_moments(r);
            let k = k_poisson(r);
            assert!((m.var_y - 2.0 * k * k * m.var_u).abs() < 1e-14);
        }
    }

    #[test]
    fn draws() {
        let a = sample_spacings(SpacingLaw::ExpDensity, 100_000, 4).unwrap();
        assert_eq!(a, sample_spacings(SpacingLaw::ExpDensity, 100_000, 4).unwrap());
        let mean = a.positions.last().unwrap() / 100_000.0;
        assert!((mean - 1.0).abs() < 0.01);
        assert!(a.gaps.iter().all(|&g| g > 0.0));
        let u = sample_spacings(SpacingLaw::Uniform { eta: 0.3 }, 1000, 1).unwrap();
        assert!(u.gaps.iter().all(|&g| (0.7..=1.3).contains(&g)));
        assert!(sample_spacings(SpacingLaw::Uniform { eta: 0.0 }, 10, 1).is_err());
    }

    #[test]
    fn unit_spacing_is_exponential_target() {
        let draw = sample_spacings(SpacingLaw::Uniform { eta: 1e-12 }, 200, 9).unwrap();
        let vals: Vec<f64> = (0..201).map(|i| ((i * 7 % 13) as f64 - 6.0) / 6.0).collect();
        let field = MeasurementField::table(vec![vals]);
        let r = rho(0.7);
        let y = weighted_target(&draw, &field, 100, r, r.lambda(), 1e-13).unwrap();
        let e = exp_target(&field, 100, r, Truncation::Tail(1e-13), Domain::Line(201)).unwrap();
        assert!((y - e.value).abs() < 1e-10, "{y} {}", e.value);
    }

    #[test]
    fn short_draw_reports_required_count() {
        let draw = SpacingDraw::from_gaps(vec![1.0; 10]);
        let err = weighted_target(&draw, &MeasurementField::constant(1.0), 5, rho(0.5), 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::NeedMoreSensors { required: 81, available: 11 }), "{err}");
    }

    #[test]
    fn single_reading() {
        let draw = SpacingDraw::from_gaps([0.4, 1.3, 0.2, 2.0].repeat(40));
        let field = MeasurementField::impulse(82);
        let y = weighted_target(&draw, &field, 80, rho(0.6), 0.25, 1e-12).unwrap();
        assert!((y - 0.25 * 0.6f64.powf(1.7)).abs() < 1e-15);
    }
}
