//! Measurement fields: rules mapping `(sensor, round)` to a measured value.
//!
//! Deterministic kinds are pure functions of `(i, k)`. Optional additive noise
//! is drawn from a counter-based stream keyed by `(seed, i, k)`, so a value
//! never depends on the order in which the field is evaluated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldKind {
    Constant {
        value: f64,
    },
    /// 1 at `center`, 0 elsewhere, for every round.
    Impulse {
        center: i64,
    },
    /// `amplitude * cos(omega * i + phase)`, constant in time.
    SpatialCosine {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude * cos(omega * k + phase)`, uniform in space.
    TemporalCosine {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Explicit values, `values[k][i]`.
    Table {
        values: Vec<Vec<f64>>,
    },
    Sum {
        terms: Vec<FieldKind>,
    },
    Scaled {
        factor: f64,
        field: Box<FieldKind>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    #[default]
    Gaussian,
    /// Uniform on `[-sqrt(3) sigma, sqrt(3) sigma]`.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma: f64,
    #[serde(default)]
    pub distribution: NoiseDistribution,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementField {
    #[serde(flatten)]
    pub kind: FieldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

impl From<FieldKind> for MeasurementField {
    fn from(kind: FieldKind) -> Self {
        MeasurementField { kind, noise: None }
    }
}

impl MeasurementField {
    pub fn constant(value: f64) -> Self {
        FieldKind::Constant { value }.into()
    }

    pub fn impulse(center: i64) -> Self {
        FieldKind::Impulse { center }.into()
    }

    pub fn spatial_cosine(amplitude: f64, omega: f64, phase: f64) -> Self {
        FieldKind::SpatialCosine {
            amplitude,
            omega,
            phase,
        }
        .into()
    }

    pub fn temporal_cosine(amplitude: f64, omega: f64, phase: f64) -> Self {
        FieldKind::TemporalCosine {
            amplitude,
            omega,
            phase,
        }
        .into()
    }

    pub fn table(values: Vec<Vec<f64>>) -> Self {
        FieldKind::Table { values }.into()
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = Some(noise);
        self
    }

    /// `a * self + b * other`. Noise terms are not combined; both inputs must be noise-free.
    pub fn combine(a: f64, first: &MeasurementField, b: f64, second: &MeasurementField) -> Result<Self> {
        if first.noise.is_some() || second.noise.is_some() {
            return Err(Error::validation("field", "cannot combine noisy fields"));
        }
        Ok(FieldKind::Sum {
            terms: vec![
                FieldKind::Scaled {
                    factor: a,
                    field: Box::new(first.kind.clone()),
                },
                FieldKind::Scaled {
                    factor: b,
                    field: Box::new(second.kind.clone()),
                },
            ],
        }
        .into())
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if let Some(noise) = &self.noise {
            ensure_finite("field.noise.sigma", noise.sigma)?;
            if noise.sigma < 0.0 {
                return Err(Error::validation("field.noise.sigma", "must be non-negative"));
            }
        }
        Ok(())
    }

    /// True when no value depends on the round index.
    pub fn is_static(&self) -> bool {
        self.noise.is_none() && self.kind.is_static()
    }

    /// Evaluates `x_i(k)`.
    pub fn evaluate(&self, i: i64, k: usize) -> Result<f64> {
        let mut value = self.kind.evaluate(i, k)?;
        if let Some(noise) = &self.noise {
            value += noise_sample(noise, i, k);
        }
        if !value.is_finite() {
            return Err(Error::validation(
                "field",
                format!("non-finite value {value} at sensor {i}, round {k}"),
            ));
        }
        Ok(value)
    }

    /// Supremum of `|x|` over the deterministic part plus a generous noise
    /// allowance (10 sigma for Gaussian, the support edge for uniform).
    pub fn bound(&self) -> f64 {
        let noise = match &self.noise {
            None => 0.0,
            Some(n) => match n.distribution {
                NoiseDistribution::Gaussian => 10.0 * n.sigma,
                NoiseDistribution::Uniform => 3f64.sqrt() * n.sigma,
            },
        };
        self.kind.bound() + noise
    }
}

/// Validates `field` and evaluates `x_i(k)`.
pub fn evaluate_field(field: &MeasurementField, i: i64, k: usize) -> Result<f64> {
    field.validate()?;
    field.evaluate(i, k)
}

impl FieldKind {
    fn validate(&self) -> Result<()> {
        match self {
            FieldKind::Constant { value } => ensure_finite("field.value", *value),
            FieldKind::Impulse { .. } => Ok(()),
            FieldKind::SpatialCosine {
                amplitude,
                omega,
                phase,
            }
            | FieldKind::TemporalCosine {
                amplitude,
                omega,
                phase,
            } => {
                ensure_finite("field.amplitude", *amplitude)?;
                ensure_finite("field.omega", *omega)?;
                ensure_finite("field.phase", *phase)
            }
            FieldKind::Table { values } => {
                if values.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::validation("field.values", "table contains non-finite entries"));
                }
                Ok(())
            }
            FieldKind::Sum { terms } => terms.iter().try_for_each(FieldKind::validate),
            FieldKind::Scaled { factor, field } => {
                ensure_finite("field.factor", *factor)?;
                field.validate()
            }
        }
    }

    /// True when the deterministic part ignores the round index.
    pub fn is_static(&self) -> bool {
        match self {
            FieldKind::TemporalCosine { omega, .. } => *omega == 0.0,
            FieldKind::Table { values } => values.windows(2).all(|w| w[0] == w[1]),
            FieldKind::Sum { terms } => terms.iter().all(FieldKind::is_static),
            FieldKind::Scaled { field, .. } => field.is_static(),
            _ => true,
        }
    }

    fn evaluate(&self, i: i64, k: usize) -> Result<f64> {
        Ok(match self {
            FieldKind::Constant { value } => *value,
            FieldKind::Impulse { center } => {
                if i == *center {
                    1.0
                } else {
                    0.0
                }
            }
            FieldKind::SpatialCosine {
                amplitude,
                omega,
                phase,
            } => amplitude * (omega * i as f64 + phase).cos(),
            FieldKind::TemporalCosine {
                amplitude,
                omega,
                phase,
            } => amplitude * (omega * k as f64 + phase).cos(),
            FieldKind::Table { values } => usize::try_from(i)
                .ok()
                .and_then(|col| values.get(k).and_then(|row| row.get(col)))
                .copied()
                .ok_or(Error::OutOfDomain { sensor: i, round: k })?,
            FieldKind::Sum { terms } => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.evaluate(i, k)?;
                }
                acc
            }
            FieldKind::Scaled { factor, field } => factor * field.evaluate(i, k)?,
        })
    }

    fn bound(&self) -> f64 {
        match self {
            FieldKind::Constant { value } => value.abs(),
            FieldKind::Impulse { .. } => 1.0,
            FieldKind::SpatialCosine { amplitude, .. } | FieldKind::TemporalCosine { amplitude, .. } => {
                amplitude.abs()
            }
            FieldKind::Table { values } => values.iter().flatten().fold(0.0, |m, v| m.max(v.abs())),
            FieldKind::Sum { terms } => terms.iter().map(FieldKind::bound).sum(),
            FieldKind::Scaled { factor, field } => factor.abs() * field.bound(),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream key from a parent seed and two counters.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(seed ^ splitmix64(a ^ splitmix64(b.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

fn noise_sample(noise: &NoiseSpec, i: i64, k: usize) -> f64 {
    if noise.sigma == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(noise.seed, i as u64, k as u64));
    match noise.distribution {
        NoiseDistribution::Gaussian => {
            let z: f64 = rng.sample(StandardNormal);
            noise.sigma * z
        }
        NoiseDistribution::Uniform => {
            let u: f64 = rng.random();
            noise.sigma * 3f64.sqrt() * (2.0 * u - 1.0)
        }
    }
}
