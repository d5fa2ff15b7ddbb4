//! One function per subcommand. Each writes its artifacts under `output.dir`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use local_consensus::acceptance::{self, CriterionResult};
use local_consensus::analysis::{
    h_exp, h_window, k_temporal_exp, k_temporal_window, measure_gain, monte_carlo_noise, GainMode, NoiseScheme,
};
use local_consensus::arbitrary::validate_weights;
use local_consensus::export::{fmt_f64, write_trace_csv};
use local_consensus::field::derive_seed;
use local_consensus::figures::{write_figures, FIGURES};
use local_consensus::spacing::{law_moments, monte_carlo_spacing, MIN_SPACING_REPLICATES};
use local_consensus::static_consensus::variable_window_weight_sums;
use local_consensus::{run, AlgorithmSpec, Boundary, ChainConfig, MeasurementField, Rho};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;
const NOISE_REPLICATES: usize = 10_000;
const SPACING_REPLICATES: usize = 20_000;

/// Raised by `verify` when a criterion fails.
#[derive(Debug)]
pub struct AcceptanceFailed(pub Vec<u8>);

impl std::fmt::Display for AcceptanceFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "acceptance criteria failed: {:?}", self.0)
    }
}

impl std::error::Error for AcceptanceFailed {}

fn metadata(command: &str, cfg: &ExperimentConfig, extra: Value) -> Result<Value> {
    let mut meta = json!({
        "schema_version": SCHEMA_VERSION,
        "generator": concat!("local-consensus ", env!("CARGO_PKG_VERSION")),
        "command": command,
        "master_seed": cfg.chain.master_seed,
        "config": cfg,
        "config_toml": cfg.to_toml()?,
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut meta, extra) {
        m.extend(e);
    }
    Ok(meta)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    let dir = cfg.output.dir.as_path();
    fs::create_dir_all(dir).with_context(|| format!("config key `output.dir`: creating {}", dir.display()))?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn sidecar(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

fn core<T>(r: local_consensus::Result<T>) -> Result<T> {
    r.map_err(anyhow::Error::from)
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let weight_check = match &cfg.algorithm {
        AlgorithmSpec::Arbitrary { table } => {
            let report = validate_weights(table, cfg.analysis.weight_tolerance);
            if !report.ok && cfg.analysis.check_weights {
                return Err(anyhow!(
                    "config key `algorithm.table`: {} zero entries and {} rows whose sum misses K = {} by more than {} \
                     (set analysis.check_weights = false to run anyway)",
                    report.zero_entries.len(),
                    report.row_sum_violations.len(),
                    report.k,
                    report.tolerance
                ));
            }
            Some(report)
        }
        _ => None,
    };
    let trace = core(run(&cfg.chain, &cfg.field, &cfg.algorithm))?;
    let dir = out_dir(cfg)?;
    let csv = dir.join("trace.csv");
    let file = fs::File::create(&csv).with_context(|| format!("creating {}", csv.display()))?;
    core(write_trace_csv(&trace, BufWriter::new(file)))?;
    let mut extra = json!({ "columns": trace_columns(&trace) });
    if let AlgorithmSpec::VariableWindow { l } = &cfg.algorithm {
        // variable windows do not preserve constants; report each sensor's weight sum
        extra["weight_sums"] = json!(variable_window_weight_sums(l));
        extra["weights_normalized"] = json!(false);
    }
    if let Some(report) = weight_check {
        extra["weight_check"] = json!(report);
    }
    let meta = sidecar(&csv);
    write_json(&meta, &metadata("simulate", cfg, extra)?)?;
    Ok(vec![csv, meta])
}

fn trace_columns(trace: &local_consensus::ConsensusTrace) -> Vec<String> {
    let slots = trace.z.as_ref().map_or(0, |z| z[0][0].len());
    let mut cols = vec!["round".to_string(), "sensor".into(), "y".into()];
    cols.extend((0..slots).map(|s| format!("z{s}")));
    cols
}

fn rounds_below(rho: f64, eps: f64) -> usize {
    (eps.ln() / rho.ln()).ceil() as usize
}

fn require_ring(cfg: &ExperimentConfig, command: &str) -> Result<()> {
    if cfg.chain.boundary != Boundary::Ring {
        return Err(anyhow!("config key `chain.boundary`: `{command}` needs policy = \"ring\""));
    }
    Ok(())
}

struct FreqRow {
    omega: f64,
    analytic_gain: f64,
    analytic_phase: f64,
    measured_gain: f64,
    measured_phase: f64,
    settle: usize,
    samples: usize,
}

const FREQ_HEADER: &str = "omega,analytic_gain,analytic_phase,measured_gain,measured_phase,abs_error,settle,samples";

fn write_freq(cfg: &ExperimentConfig, command: &str, file: &str, rows: &[FreqRow], warnings: Vec<String>) -> Result<Vec<PathBuf>> {
    let dir = out_dir(cfg)?;
    let mut text = String::from(FREQ_HEADER);
    text.push('\n');
    for r in rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r.omega),
            fmt_f64(r.analytic_gain),
            fmt_f64(r.analytic_phase),
            fmt_f64(r.measured_gain),
            fmt_f64(r.measured_phase),
            fmt_f64((r.measured_gain - r.analytic_gain).abs()),
            r.settle,
            r.samples
        );
    }
    let csv = dir.join(file);
    fs::write(&csv, text).with_context(|| format!("writing {}", csv.display()))?;
    let meta = sidecar(&csv);
    let extra = json!({ "columns": FREQ_HEADER.split(',').collect::<Vec<_>>(), "warnings": warnings });
    write_json(&meta, &metadata(command, cfg, extra)?)?;
    Ok(vec![csv, meta])
}

pub fn freq_spatial(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    require_ring(cfg, "freq-spatial")?;
    let n = cfg.chain.n;
    let (settle, analytic): (usize, Box<dyn Fn(f64) -> f64>) = match &cfg.algorithm {
        AlgorithmSpec::Exponential { rho } => {
            let r = *rho;
            (cfg.analysis.settle.unwrap_or(rounds_below(r.get(), 1e-12)), Box::new(move |w| h_exp(r, w)))
        }
        AlgorithmSpec::Window { l } => {
            let l = *l;
            (cfg.analysis.settle.unwrap_or(l), Box::new(move |w| h_window(l, w)))
        }
        other => {
            return Err(anyhow!(
                "config key `algorithm.variant`: freq-spatial supports exponential and window, got {}",
                other.name()
            ))
        }
    };
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &m in &cfg.analysis.harmonics {
        if 2 * m > n {
            return Err(anyhow!("config key `analysis.harmonics`: harmonic {m} exceeds n/2 = {}", n / 2));
        }
        let omega = 2.0 * PI * m as f64 / n as f64;
        let field = MeasurementField::spatial_cosine(1.0, omega, 0.0);
        let chain = ChainConfig { rounds: settle, ..cfg.chain.clone() };
        let trace = core(run(&chain, &field, &cfg.algorithm))?;
        let g = core(measure_gain(&trace, &field, omega, GainMode::Spatial, settle))?;
        let h = analytic(omega);
        warnings.extend(g.warnings.iter().map(|w| format!("omega {omega}: {w}")));
        rows.push(FreqRow {
            omega,
            analytic_gain: h.abs(),
            analytic_phase: if h < 0.0 { PI } else { 0.0 },
            measured_gain: g.gain,
            measured_phase: g.phase,
            settle,
            samples: g.samples,
        });
    }
    write_freq(cfg, "freq-spatial", "freq_spatial.csv", &rows, warnings)
}

pub fn freq_temporal(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    require_ring(cfg, "freq-temporal")?;
    let settle = match &cfg.algorithm {
        AlgorithmSpec::DynExponential { rho } => cfg.analysis.settle.unwrap_or(rounds_below(rho.get(), 1e-12)),
        AlgorithmSpec::DynWindow { l } => cfg.analysis.settle.unwrap_or(*l),
        other => {
            return Err(anyhow!(
                "config key `algorithm.variant`: freq-temporal supports dyn_exponential and dyn_window, got {}",
                other.name()
            ))
        }
    };
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &omega in &cfg.analysis.omegas {
        if !(0.0..=PI).contains(&omega) {
            return Err(anyhow!("config key `analysis.omegas`: {omega} lies outside [0, pi]"));
        }
        // at least four periods past the transient
        let span = if omega > 0.0 { (8.0 * PI / omega).ceil() as usize } else { 0 };
        let chain = ChainConfig {
            rounds: settle + span.max(400),
            ..cfg.chain.clone()
        };
        let field = MeasurementField::temporal_cosine(1.0, omega, 0.0);
        let trace = core(run(&chain, &field, &cfg.algorithm))?;
        let g = core(measure_gain(&trace, &field, omega, GainMode::Temporal, settle))?;
        let k = match &cfg.algorithm {
            AlgorithmSpec::DynExponential { rho } => k_temporal_exp(*rho, omega),
            AlgorithmSpec::DynWindow { l } => k_temporal_window(*l, omega),
            _ => unreachable!("checked above"),
        };
        warnings.extend(g.warnings.iter().map(|w| format!("omega {omega}: {w}")));
        rows.push(FreqRow {
            omega,
            analytic_gain: k.gain,
            analytic_phase: k.phase,
            measured_gain: g.gain,
            measured_phase: g.phase,
            settle,
            samples: g.samples,
        });
    }
    write_freq(cfg, "freq-temporal", "freq_temporal.csv", &rows, warnings)
}

pub fn noise(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let seed = cfg.require_seed("noise")?;
    let a = &cfg.analysis;
    let scheme = match &cfg.algorithm {
        AlgorithmSpec::Exponential { rho } => NoiseScheme::Exponential { rho: *rho },
        AlgorithmSpec::Window { l } => NoiseScheme::Window { l: *l },
        other => {
            return Err(anyhow!(
                "config key `algorithm.variant`: noise supports exponential and window, got {}",
                other.name()
            ))
        }
    };
    let replicates = a.replicates.unwrap_or(NOISE_REPLICATES);
    let mut reports = vec![core(monte_carlo_noise(scheme, a.sigma, a.distribution, replicates, seed))?];
    if a.global_n > 0 {
        let global = NoiseScheme::Global { n: a.global_n };
        reports.push(core(monte_carlo_noise(global, a.sigma, a.distribution, replicates, derive_seed(seed, 0, 1)))?);
    }
    let rel: Vec<f64> = reports.iter().map(|r| r.relative_error()).collect();
    let path = out_dir(cfg)?.join("noise.json");
    write_json(&path, &metadata("noise", cfg, json!({ "reports": reports, "relative_errors": rel }))?)?;
    Ok(vec![path])
}

pub fn spacing(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let seed = cfg.require_seed("spacing")?;
    let rho: Rho = match &cfg.algorithm {
        AlgorithmSpec::Exponential { rho } => *rho,
        other => {
            return Err(anyhow!(
                "config key `algorithm.variant`: spacing uses the exponential rho, got {}",
                other.name()
            ))
        }
    };
    let law = cfg.analysis.spacing;
    core(law.validate()).context("config key `analysis.spacing`")?;
    let replicates = cfg.analysis.replicates.unwrap_or(SPACING_REPLICATES).max(MIN_SPACING_REPLICATES);
    let report = core(monte_carlo_spacing(rho, law, replicates, seed))?;
    let moments = law_moments(law, rho);
    let z_mean = (report.mean - 1.0) / report.mean_se;
    let path = out_dir(cfg)?.join("spacing.json");
    let extra = json!({ "report": report, "moments": moments, "mean_z_score": z_mean });
    write_json(&path, &metadata("spacing", cfg, extra)?)?;
    Ok(vec![path])
}

pub fn figures(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = out_dir(cfg)?;
    let mut paths = core(write_figures(dir))?;
    let grids: Vec<Value> = FIGURES
        .iter()
        .map(|f| json!({ "file": f.file, "omega_max": f.span, "points": f.points, "params": f.params() }))
        .collect();
    let meta = dir.join("figures.meta.json");
    write_json(&meta, &metadata("figures", cfg, json!({ "columns": ["omega", "gain", "param"], "figures": grids }))?)?;
    paths.push(meta);
    Ok(paths)
}

pub fn verify(ids: &[u8]) -> Result<Vec<CriterionResult>> {
    let results = if ids.is_empty() {
        acceptance::run_all()
    } else {
        ids.iter()
            .map(|&id| acceptance::criterion(id).ok_or_else(|| anyhow!("--criterion {id}: no such criterion (1-10)")))
            .collect::<Result<_>>()?
    };
    Ok(results)
}
