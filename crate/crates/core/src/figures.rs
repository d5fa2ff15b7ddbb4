//! Analytic curves for the frequency-response figures.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::analysis::{h_exp, k_temporal_exp, k_temporal_window};
use crate::error::Result;
use crate::export::fmt_f64;
use crate::static_consensus::Rho;

pub const FIG_RHOS: [f64; 4] = [0.8, 0.9, 0.95, 0.99];
pub const FIG_LS: [usize; 4] = [2, 5, 10, 20];
pub const ORIGIN_SPAN: f64 = 0.5;
pub const ORIGIN_POINTS: usize = 501;
pub const FULL_POINTS: usize = 1001;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Curve {
    SpatialExp,
    TemporalExp,
    TemporalWindow,
}

impl Curve {
    pub fn gain(self, param: f64, omega: f64) -> f64 {
        match self {
            Curve::SpatialExp => h_exp(Rho::new(param).expect("figure rho"), omega),
            Curve::TemporalExp => k_temporal_exp(Rho::new(param).expect("figure rho"), omega).gain,
            Curve::TemporalWindow => k_temporal_window(param as usize, omega).gain,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Figure {
    pub file: &'static str,
    pub curve: Curve,
    /// Upper end of the grid, which starts at 0.
    pub span: f64,
    pub points: usize,
}

impl Figure {
    pub fn params(&self) -> Vec<f64> {
        match self.curve {
            Curve::TemporalWindow => FIG_LS.iter().map(|&l| l as f64).collect(),
            _ => FIG_RHOS.to_vec(),
        }
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(move |s| self.span * s as f64 / (self.points - 1) as f64)
    }

    /// `omega,gain,param` rows, one block per parameter, each starting at 0.
    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega", "gain", "param"])?;
        for p in self.params() {
            for omega in self.grid() {
                let param = if self.curve == Curve::TemporalWindow {
                    (p as usize).to_string()
                } else {
                    p.to_string()
                };
                w.write_record([fmt_f64(omega), fmt_f64(self.curve.gain(p, omega)), param])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub const FIGURES: [Figure; 5] = [
    Figure {
        file: "fig_h_exp_origin.csv",
        curve: Curve::SpatialExp,
        span: ORIGIN_SPAN,
        points: ORIGIN_POINTS,
    },
    Figure {
        file: "fig_h_exp.csv",
        curve: Curve::SpatialExp,
        span: PI,
        points: FULL_POINTS,
    },
    Figure {
        file: "fig_k_exp_origin.csv",
        curve: Curve::TemporalExp,
        span: ORIGIN_SPAN,
        points: ORIGIN_POINTS,
    },
    Figure {
        file: "fig_k_exp.csv",
        curve: Curve::TemporalExp,
        span: PI,
        points: FULL_POINTS,
    },
    Figure {
        file: "fig_k_window.csv",
        curve: Curve::TemporalWindow,
        span: PI,
        points: FULL_POINTS,
    },
];

/// Writes every figure CSV into `dir` and returns the paths.
pub fn write_figures(dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    FIGURES
        .iter()
        .map(|f| {
            let path = dir.join(f.file);
            f.write(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_rows_are_one() {
        for f in &FIGURES {
            let mut buf = Vec::new();
            f.write(&mut buf).unwrap();
            let mut r = csv::Reader::from_reader(buf.as_slice());
            let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
            assert_eq!(rows.len(), f.points * 4);
            for block in rows.chunks(f.points) {
                assert_eq!(block[0][0].parse::<f64>().unwrap(), 0.0);
                let g: f64 = block[0][1].parse().unwrap();
                assert!((g - 1.0).abs() < 1e-14, "{} {g}", f.file);
            }
        }
    }
}
