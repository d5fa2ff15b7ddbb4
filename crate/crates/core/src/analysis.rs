//! Frequency response, bandwidth and noise propagation.
//!
//! Closed-form gains for the spatial and temporal schemes, plus estimators
//! that recover the same quantities from simulated traces.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithm::AlgorithmSpec;
use crate::chain::{Boundary, ChainConfig};
use crate::error::{Error, Result};
use crate::field::{derive_seed, FieldKind, MeasurementField, NoiseDistribution, NoiseSpec};
use crate::harness::{run, ConsensusTrace};
use crate::static_consensus::Rho;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferSample {
    pub omega: f64,
    pub gain: f64,
    pub phase: f64,
}

impl TransferSample {
    fn from_complex(omega: f64, v: Complex64) -> Self {
        TransferSample {
            omega,
            gain: v.norm(),
            phase: v.arg(),
        }
    }
}

/// Spatial gain of exponential weighting, `(1-rho)^2 / (1 + rho^2 - 2 rho cos w)`.
pub fn h_exp(rho: Rho, omega: f64) -> f64 {
    let r = rho.get();
    let d = (1.0 - r).powi(2);
    // 1 + r^2 - 2r cos w, written without cancellation near w = 0
    d / (d + 4.0 * r * (omega / 2.0).sin().powi(2))
}

/// The same transfer function at an arbitrary point of the Z-plane.
pub fn h_exp_z(rho: Rho, z: Complex64) -> Complex64 {
    let r = rho.get();
    let one = Complex64::new(1.0, 0.0);
    Complex64::from((1.0 - r).powi(2)) / ((one - r / z) * (one - r * z))
}

/// Signed Dirichlet kernel `sin((L+1/2) w) / ((2L+1) sin(w/2))`.
pub fn h_window(l: usize, omega: f64) -> f64 {
    let m = (2 * l + 1) as f64;
    let s = (omega / 2.0).sin();
    if s.abs() < 1e-6 {
        // cosine-sum form has no removable singularity
        (1.0 + 2.0 * (1..=l).map(|j| (j as f64 * omega).cos()).sum::<f64>()) / m
    } else {
        ((l as f64 + 0.5) * omega).sin() / (m * s)
    }
}

/// Temporal response of the time-varying exponential scheme,
/// `lambda (1 - rho^2 e^{-2jw}) / (1 - rho e^{-jw})^2`.
pub fn k_temporal_exp(rho: Rho, omega: f64) -> TransferSample {
    let r = rho.get();
    let e1 = Complex64::from_polar(1.0, -omega);
    let one = Complex64::new(1.0, 0.0);
    let v = rho.lambda() * (one - r * r * e1 * e1) / ((one - r * e1) * (one - r * e1));
    TransferSample::from_complex(omega, v)
}

/// Temporal response of the time-varying window, `(1 + 2 sum_m e^{-jmw}) / (2L+1)`.
pub fn k_temporal_window(l: usize, omega: f64) -> TransferSample {
    let mut acc = Complex64::new(1.0, 0.0);
    for m in 1..=l {
        acc += 2.0 * Complex64::from_polar(1.0, -(m as f64) * omega);
    }
    TransferSample::from_complex(omega, acc / (2 * l + 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    SpatialExp { rho: Rho },
    SpatialWindow { l: usize },
    TemporalExp { rho: Rho },
    TemporalWindow { l: usize },
}

impl Scheme {
    /// Gain magnitude at `omega`.
    pub fn gain(&self, omega: f64) -> f64 {
        match *self {
            Scheme::SpatialExp { rho } => h_exp(rho, omega),
            Scheme::SpatialWindow { l } => h_window(l, omega).abs(),
            Scheme::TemporalExp { rho } => k_temporal_exp(rho, omega).gain,
            Scheme::TemporalWindow { l } => k_temporal_window(l, omega).gain,
        }
    }

    /// Approximate half-gain frequency quoted for each scheme.
    pub fn rule_of_thumb(&self) -> f64 {
        match *self {
            Scheme::SpatialExp { rho } | Scheme::TemporalExp { rho } => 1.0 - rho.get(),
            Scheme::SpatialWindow { l } => 1.7 / (l as f64 + 0.5),
            Scheme::TemporalWindow { l } => 4.0 / (l as f64 + 0.5),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    /// First frequency in `(0, pi]` where the gain falls to 1/2.
    pub omega_half: Option<f64>,
    /// Gain stays above 1/2 on the whole interval.
    pub saturated: bool,
    pub rule_of_thumb: f64,
}

impl Bandwidth {
    /// `omega_half / rule_of_thumb - 1`.
    pub fn relative_deviation(&self) -> Option<f64> {
        self.omega_half.map(|w| w / self.rule_of_thumb - 1.0)
    }
}

pub const BISECTION_TOL: f64 = 1e-10;

pub fn bandwidth(scheme: Scheme) -> Result<Bandwidth> {
    if let Scheme::SpatialWindow { l } | Scheme::TemporalWindow { l } = scheme {
        crate::static_consensus::validate_window(l)?;
    }
    let f = |w: f64| scheme.gain(w) - 0.5;
    let grid = 4096;
    let mut prev = 0.0;
    let mut omega_half = None;
    for s in 1..=grid {
        let w = PI * s as f64 / grid as f64;
        if f(w) <= 0.0 {
            let (mut lo, mut hi) = (prev, w);
            while hi - lo > BISECTION_TOL {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            omega_half = Some(0.5 * (lo + hi));
            break;
        }
        prev = w;
    }
    Ok(Bandwidth {
        omega_half,
        saturated: omega_half.is_none(),
        rule_of_thumb: scheme.rule_of_thumb(),
    })
}

/// `(1-rho)(1+rho^2)/(1+rho)^3 sigma^2`.
pub fn noise_var_exp(rho: Rho, sigma2: f64) -> f64 {
    let r = rho.get();
    (1.0 - r) * (1.0 + r * r) / (1.0 + r).powi(3) * sigma2
}

pub fn noise_var_window(l: usize, sigma2: f64) -> f64 {
    sigma2 / (2 * l + 1) as f64
}

pub fn noise_var_global(n: usize, sigma2: f64) -> f64 {
    sigma2 / n as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceMatch {
    pub l: usize,
    pub rho: f64,
    /// Unit-noise variance of exponential weighting at `rho`, `(4L^2-4L+5)/(2L-1)^3`.
    pub exp_variance: f64,
    pub window_variance: f64,
    pub ratio: f64,
}

/// `rho = (2L-3)/(2L+1)`, the decay whose noise variance approaches that of a window of half-width `L`.
pub fn variance_match_rho(l: usize) -> Result<VarianceMatch> {
    if l < 2 {
        return Err(Error::validation("L", format!("must be at least 2, got {l}")));
    }
    let lf = l as f64;
    let rho = (2.0 * lf - 3.0) / (2.0 * lf + 1.0);
    let exp_variance = (4.0 * lf * lf - 4.0 * lf + 5.0) / (2.0 * lf - 1.0).powi(3);
    let window_variance = 1.0 / (2.0 * lf + 1.0);
    Ok(VarianceMatch {
        l,
        rho,
        exp_variance,
        window_variance,
        ratio: exp_variance / window_variance,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    Spatial,
    Temporal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    pub gain: f64,
    pub phase: f64,
    pub samples: usize,
    pub warnings: Vec<String>,
}

/// Fits `y` against the input sinusoid over rounds `settle..=rounds`.
///
/// Spatial mode fits across sensors (ring only, `omega` a harmonic of `n`);
/// temporal mode fits across rounds. Gain is the amplitude ratio and phase
/// the lead of the output over the input.
pub fn measure_gain(
    trace: &ConsensusTrace,
    field: &MeasurementField,
    omega: f64,
    mode: GainMode,
    settle: usize,
) -> Result<GainEstimate> {
    let (amplitude, field_omega, phase0) = match (&field.kind, mode) {
        (
            FieldKind::SpatialCosine {
                amplitude,
                omega,
                phase,
            },
            GainMode::Spatial,
        )
        | (
            FieldKind::TemporalCosine {
                amplitude,
                omega,
                phase,
            },
            GainMode::Temporal,
        ) => (*amplitude, *omega, *phase),
        _ => {
            return Err(Error::validation(
                "field.kind",
                format!("{mode:?} gain needs a matching pure cosine field"),
            ))
        }
    };
    if (field_omega - omega).abs() > 1e-15 || amplitude == 0.0 {
        return Err(Error::validation(
            "analysis.omega",
            "omega must equal the field frequency and the amplitude must be non-zero",
        ));
    }
    if mode == GainMode::Spatial {
        if trace.boundary != Boundary::Ring {
            return Err(Error::validation("chain.boundary", "spatial gain needs a ring"));
        }
        let m = omega * trace.n as f64 / (2.0 * PI);
        if (m - m.round()).abs() > 1e-9 {
            return Err(Error::validation(
                "analysis.omega",
                format!("{omega} is not a harmonic 2 pi m / {}", trace.n),
            ));
        }
    }
    if settle > trace.rounds {
        return Err(Error::validation(
            "analysis.settle",
            format!("settle {settle} exceeds the {} simulated rounds", trace.rounds),
        ));
    }
    let mut warnings = Vec::new();
    if let Some(w) = settle_warning(&trace.algorithm, settle) {
        warnings.push(w);
    }

    // normal equations for y ~ a cos(t) + b sin(t), t the input argument
    let (mut cc, mut ss, mut cs, mut yc, mut ys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut samples = 0;
    for (i, row) in trace.y.iter().enumerate() {
        for (k, &y) in row.iter().enumerate().skip(settle) {
            let idx = if mode == GainMode::Spatial { i } else { k };
            let t = omega * idx as f64 + phase0;
            let (s, c) = t.sin_cos();
            cc += c * c;
            ss += s * s;
            cs += c * s;
            yc += y * c;
            ys += y * s;
            samples += 1;
        }
    }
    let det = cc * ss - cs * cs;
    let (a, b) = if det > 1e-12 * (cc + ss).powi(2) {
        ((yc * ss - ys * cs) / det, (ys * cc - yc * cs) / det)
    } else if cc > 0.0 {
        // degenerate basis (omega = 0 or sampling at the zeros of sin)
        (yc / cc, 0.0)
    } else {
        return Err(Error::validation("analysis.omega", "input is identically zero on the fitted samples"));
    };
    // y = G cos(t + theta) = G cos(theta) cos t - G sin(theta) sin t
    let (a, b) = (a / amplitude, b / amplitude);
    Ok(GainEstimate {
        gain: a.hypot(b),
        phase: (-b).atan2(a),
        samples,
        warnings,
    })
}

fn settle_warning(algo: &AlgorithmSpec, settle: usize) -> Option<String> {
    let exact_after = match algo {
        AlgorithmSpec::Exponential { rho } | AlgorithmSpec::DynExponential { rho } => {
            return (rho.get().powi(settle as i32) >= 1e-9)
                .then(|| format!("rho^settle = {:e} is not below 1e-9", rho.get().powi(settle as i32)));
        }
        AlgorithmSpec::Asymmetric { rho_b, rho_f } => {
            let r = rho_b.get().max(rho_f.get());
            return (r.powi(settle as i32) >= 1e-9)
                .then(|| format!("rho^settle = {:e} is not below 1e-9", r.powi(settle as i32)));
        }
        AlgorithmSpec::Window { l } | AlgorithmSpec::DynWindow { l } => *l,
        AlgorithmSpec::VariableWindow { l } => l.iter().copied().max().unwrap_or(0),
        AlgorithmSpec::Arbitrary { table } => table.radius(),
    };
    (settle < exact_after).then(|| format!("settle {settle} is before the window completes at round {exact_after}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum NoiseScheme {
    Exponential { rho: Rho },
    Window { l: usize },
    /// Plain mean of `n` independent readings.
    Global { n: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub scheme: NoiseScheme,
    pub sigma: f64,
    pub analytic_variance: f64,
    pub sampled_variance: f64,
    pub replicates: usize,
    /// `sampled_variance * sqrt(2 / (replicates - 1))`.
    pub standard_error: f64,
}

impl NoiseReport {
    pub fn relative_error(&self) -> f64 {
        (self.sampled_variance - self.analytic_variance).abs() / self.analytic_variance
    }
}

pub const MIN_NOISE_REPLICATES: usize = 100;

/// Sample variance at sensor 0 of the converged value under i.i.d. noise on
/// a zero field. Replicate `r` draws its noise from `derive_seed(master_seed, r, 0)`.
pub fn monte_carlo_noise(
    scheme: NoiseScheme,
    sigma: f64,
    distribution: NoiseDistribution,
    replicates: usize,
    master_seed: u64,
) -> Result<NoiseReport> {
    if replicates < MIN_NOISE_REPLICATES {
        return Err(Error::validation(
            "analysis.replicates",
            format!("need at least {MIN_NOISE_REPLICATES}, got {replicates}"),
        ));
    }
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::validation("analysis.sigma", format!("must be finite and non-negative, got {sigma}")));
    }
    let sigma2 = sigma * sigma;
    let (analytic, setup) = match scheme {
        NoiseScheme::Exponential { rho } => {
            // residual weight beyond `rounds` hops below 1e-13; ring long enough not to wrap
            let rounds = ((1e-13f64).ln() / rho.get().ln()).ceil() as usize;
            (
                noise_var_exp(rho, sigma2),
                Some((ChainConfig::ring(2 * rounds + 1, rounds), AlgorithmSpec::Exponential { rho })),
            )
        }
        NoiseScheme::Window { l } => (
            noise_var_window(l, sigma2),
            Some((ChainConfig::ring(2 * l + 3, l), AlgorithmSpec::Window { l })),
        ),
        NoiseScheme::Global { n } => {
            if n == 0 {
                return Err(Error::validation("analysis.N", "must be positive"));
            }
            (noise_var_global(n, sigma2), None)
        }
    };
    if let Some((cfg, algo)) = &setup {
        algo.validate(cfg)?;
    }

    let samples: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let noise = NoiseSpec {
                sigma,
                distribution,
                seed: derive_seed(master_seed, r as u64, 0),
            };
            let field = MeasurementField::constant(0.0).with_noise(noise);
            match (&setup, scheme) {
                (Some((cfg, algo)), _) => {
                    let trace = run(cfg, &field, algo)?;
                    Ok(trace.y[0][cfg.rounds])
                }
                (None, NoiseScheme::Global { n }) => {
                    let mut sum = 0.0;
                    for i in 0..n {
                        sum += field.evaluate(i as i64, 0)?;
                    }
                    Ok(sum / n as f64)
                }
                (None, _) => unreachable!("only the global baseline runs without a chain"),
            }
        })
        .collect::<Result<_>>()?;

    // sequential merge keeps the result independent of the thread count
    let (mut mean, mut m2) = (0.0, 0.0);
    for (count, &v) in samples.iter().enumerate() {
        let d = v - mean;
        mean += d / (count + 1) as f64;
        m2 += d * (v - mean);
    }
    let sampled = m2 / (replicates - 1) as f64;
    Ok(NoiseReport {
        scheme,
        sigma,
        analytic_variance: analytic,
        sampled_variance: sampled,
        replicates,
        standard_error: sampled * (2.0 / (replicates - 1) as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rho(v: f64) -> Rho {
        Rho::new(v).unwrap()
    }

    #[test]
    fn h_exp_values() {
        for r in [0.1, 0.5, 0.9] {
            assert_abs_diff_eq!(h_exp(rho(r), 0.0), 1.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(h_exp(rho(0.5), PI), 1.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h_exp(rho(0.9), 0.1), 0.5265, epsilon = 1e-4);
    }

    #[test]
    fn h_exp_is_monotone_and_matches_z_form() {
        let mut worst: f64 = 0.0;
        for r in [0.05, 0.3, 0.7, 0.95, 0.99] {
            let mut prev = f64::INFINITY;
            for s in 0..=2000 {
                let w = PI * s as f64 / 2000.0;
                let g = h_exp(rho(r), w);
                assert!(g <= prev);
                prev = g;
                let z = h_exp_z(rho(r), Complex64::from_polar(1.0, w));
                worst = worst.max((z.re - g).abs()).max(z.im.abs());
            }
        }
        assert!(worst < 1e-14, "{worst:e}");
    }

    #[test]
    fn dirichlet_values() {
        assert_abs_diff_eq!(h_window(4, 0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h_window(4, 1e-9), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h_window(4, 2.0 * PI / 9.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h_window(1, PI), -1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn temporal_values() {
        assert_abs_diff_eq!(k_temporal_exp(rho(0.7), 0.0).gain, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(k_temporal_exp(rho(0.5), PI).gain, 1.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k_temporal_window(3, 0.0).gain, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k_temporal_window(1, PI).gain, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn temporal_exp_gain_at_one_minus_rho_is_near_inverse_sqrt2() {
        // |K| at w = 1 - rho tends to 1/sqrt(2), not 1/2
        let g = k_temporal_exp(rho(0.9), 0.1).gain;
        assert!((g - 0.7249).abs() < 1e-3, "{g}");
        let g = k_temporal_exp(rho(0.999), 0.001).gain;
        assert!((g - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3, "{g}");
    }

    #[test]
    fn temporal_exp_rational_form() {
        // (1 - r^2 e^{-2jw}) / (1 - r e^{-jw})^2 = (1 + r e^{-jw}) / (1 - r e^{-jw})
        let r = 0.8;
        for w in [0.01, 0.3, 1.0, 2.5] {
            let e = Complex64::from_polar(1.0, -w);
            let one = Complex64::new(1.0, 0.0);
            let v = rho(r).lambda() * (one + r * e) / (one - r * e);
            let s = k_temporal_exp(rho(r), w);
            assert!((s.gain - v.norm()).abs() < 1e-13);
            assert!((s.phase - v.arg()).abs() < 1e-13);
        }
    }

    #[test]
    fn bandwidths() {
        let b = bandwidth(Scheme::SpatialExp { rho: rho(0.9) }).unwrap();
        let w = b.omega_half.unwrap();
        assert!((h_exp(rho(0.9), w) - 0.5).abs() < 1e-9);
        assert!((w - 0.1).abs() < 0.01);
        assert!(bandwidth(Scheme::SpatialExp { rho: rho(0.1) }).unwrap().saturated);
        let b = bandwidth(Scheme::TemporalWindow { l: 5 }).unwrap();
        assert!(b.relative_deviation().unwrap().abs() < 0.15);
    }

    #[test]
    fn temporal_exp_bandwidth_is_wider_than_spatial() {
        // temporal half-gain sits near sqrt(3)(1 - rho), not near 1 - rho
        for r in [0.9, 0.95, 0.99] {
            let s = bandwidth(Scheme::SpatialExp { rho: rho(r) }).unwrap().omega_half.unwrap();
            let t = bandwidth(Scheme::TemporalExp { rho: rho(r) }).unwrap().omega_half.unwrap();
            let ratio = t / s;
            assert!((1.6..1.8).contains(&ratio), "rho {r}: ratio {ratio}");
        }
    }

    #[test]
    fn noise_formulas() {
        assert_abs_diff_eq!(noise_var_exp(rho(0.5), 1.0), 0.185_185_185_185_185, epsilon = 1e-14);
        assert_abs_diff_eq!(noise_var_exp(rho(1e-9), 1.0), 1.0, epsilon = 1e-8);
        for s in 1..100 {
            let r = s as f64 / 100.0;
            let v = noise_var_exp(rho(r), 1.0);
            assert!(v > (1.0 - r) / 4.0 && v < 1.0 - r);
        }
        assert_eq!(noise_var_window(2, 1.0), 0.2);
        assert_eq!(noise_var_global(100, 1.0), 0.01);
    }

    #[test]
    fn variance_match() {
        assert_abs_diff_eq!(variance_match_rho(2).unwrap().rho, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(variance_match_rho(10).unwrap().rho, 17.0 / 21.0, epsilon = 1e-15);
        assert!(variance_match_rho(1).is_err());
        for l in [2, 5, 10, 40] {
            let m = variance_match_rho(l).unwrap();
            let direct = noise_var_exp(rho(m.rho), 1.0);
            assert_abs_diff_eq!(m.exp_variance, direct, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_sigma_gives_zero_variance() {
        let r = monte_carlo_noise(
            NoiseScheme::Exponential { rho: rho(0.5) },
            0.0,
            NoiseDistribution::Gaussian,
            200,
            3,
        )
        .unwrap();
        assert_eq!(r.sampled_variance, 0.0);
        assert!(monte_carlo_noise(NoiseScheme::Window { l: 2 }, 1.0, NoiseDistribution::Gaussian, 50, 1).is_err());
    }
}
