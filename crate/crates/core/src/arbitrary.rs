//! Arbitrary banded weights through separate forward and backward variables.
//!
//! Sensor `i` keeps `yF` (fed only by `i+1`) and `yB` (fed only by `i-1`).
//! At round `k` the forward variable gains `(1/K) a[i][i+k] x[i+k]`, obtained
//! by rescaling the forward neighbor's last increment with
//! `a[i][i+k] / a[i+1][i+k]`. The two halves are glued by subtracting the
//! doubly counted own term.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `a[i][i+j]` for `|j| <= radius`, one row per real sensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct WeightTable {
    rows: Vec<Vec<f64>>,
    k: f64,
    radius: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    rows: Vec<Vec<f64>>,
    #[serde(alias = "K")]
    k: f64,
    radius: usize,
}

impl TryFrom<RawTable> for WeightTable {
    type Error = Error;
    fn try_from(raw: RawTable) -> Result<Self> {
        WeightTable::new(raw.rows, raw.k, raw.radius)
    }
}

impl WeightTable {
    /// `rows[i][j + radius] = a[i][i+j]`.
    pub fn new(rows: Vec<Vec<f64>>, k: f64, radius: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::validation("weights", "table has no rows"));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != 2 * radius + 1) {
            return Err(Error::validation(
                "weights",
                format!("row {bad} has {} entries, expected {}", rows[bad].len(), 2 * radius + 1),
            ));
        }
        if !k.is_finite() || k == 0.0 {
            return Err(Error::validation("weights.K", format!("must be finite and non-zero, got {k}")));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("weights", "non-finite entry"));
        }
        Ok(WeightTable { rows, k, radius })
    }

    /// `a[i][i+j] = rho^|j|`, `K = (1+rho)/(1-rho)`.
    pub fn geometric(n: usize, rho: f64, radius: usize) -> Result<Self> {
        let row: Vec<f64> = (0..=2 * radius)
            .map(|c| rho.powi((c as i64 - radius as i64).unsigned_abs() as i32))
            .collect();
        WeightTable::new(vec![row; n], (1.0 + rho) / (1.0 - rho), radius)
    }

    /// Reads `sensor,offset,weight` records. Every `(sensor, offset)` pair with
    /// `sensor < n` and `|offset| <= radius` must appear exactly once.
    pub fn from_csv<R: Read>(reader: R, n: usize, radius: usize, k: f64) -> Result<Self> {
        #[derive(Deserialize)]
        struct Record {
            sensor: usize,
            offset: i64,
            weight: f64,
        }
        let mut rows = vec![vec![f64::NAN; 2 * radius + 1]; n];
        let mut rdr = csv::Reader::from_reader(reader);
        for rec in rdr.deserialize() {
            let rec: Record = rec?;
            if rec.sensor >= n || rec.offset.unsigned_abs() as usize > radius {
                return Err(Error::validation(
                    "weights",
                    format!("entry ({}, {}) outside table shape", rec.sensor, rec.offset),
                ));
            }
            let slot = &mut rows[rec.sensor][(rec.offset + radius as i64) as usize];
            if !slot.is_nan() {
                return Err(Error::validation(
                    "weights",
                    format!("duplicate entry ({}, {})", rec.sensor, rec.offset),
                ));
            }
            *slot = rec.weight;
        }
        for (i, row) in rows.iter().enumerate() {
            if let Some(c) = row.iter().position(|v| v.is_nan()) {
                return Err(Error::validation(
                    "weights",
                    format!("missing entry ({i}, {})", c as i64 - radius as i64),
                ));
            }
        }
        WeightTable::new(rows, k, radius)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn with_k(mut self, k: f64) -> Result<Self> {
        if !k.is_finite() || k == 0.0 {
            return Err(Error::validation("weights.K", format!("must be finite and non-zero, got {k}")));
        }
        self.k = k;
        Ok(self)
    }

    /// `a[row][row+offset]`. Rows outside `0..n` wrap when `periodic`, and
    /// otherwise reuse the nearest edge row.
    pub fn weight(&self, row: i64, offset: i64, periodic: bool) -> Result<f64> {
        if offset.unsigned_abs() as usize > self.radius {
            return Err(Error::validation(
                "weights",
                format!("offset {offset} beyond truncation radius {}", self.radius),
            ));
        }
        let n = self.rows.len() as i64;
        let r = if periodic {
            row.rem_euclid(n)
        } else {
            row.clamp(0, n - 1)
        };
        Ok(self.rows[r as usize][(offset + self.radius as i64) as usize])
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn scale_row(&mut self, row: usize, factor: f64) {
        for v in &mut self.rows[row] {
            *v *= factor;
        }
    }

    pub fn set(&mut self, row: usize, offset: i64, value: f64) {
        self.rows[row][(offset + self.radius as i64) as usize] = value;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub ok: bool,
    pub k: f64,
    pub tolerance: f64,
    /// `(sensor, offset)` of every zero entry.
    pub zero_entries: Vec<(usize, i64)>,
    /// `(sensor, row_sum)` of every row whose sum misses `K` by more than the tolerance.
    pub row_sum_violations: Vec<(usize, f64)>,
}

/// Checks that no stored weight is zero and every row sums to `K` within `tol_k`.
pub fn validate_weights(table: &WeightTable, tol_k: f64) -> WeightReport {
    let r = table.radius as i64;
    let mut report = WeightReport {
        ok: true,
        k: table.k,
        tolerance: tol_k,
        ..Default::default()
    };
    for (i, row) in table.rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v == 0.0 {
                report.zero_entries.push((i, c as i64 - r));
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - table.k).abs() > tol_k {
            report.row_sum_violations.push((i, sum));
        }
    }
    report.ok = report.zero_entries.is_empty() && report.row_sum_violations.is_empty();
    report
}

/// Forward and backward consensus values of one sensor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FbState {
    pub forward: f64,
    pub backward: f64,
}

/// Histories newest first. `forward_nbr` holds the `i+1` sensor's states,
/// `backward_nbr` the `i-1` sensor's.
#[derive(Clone, Copy, Debug)]
pub struct FbNeighborhood<'a> {
    pub own: &'a [FbState],
    pub backward_nbr: &'a [FbState],
    pub forward_nbr: &'a [FbState],
}

/// Produces the state at `round` for sensor `i`.
pub fn fb_transition(
    round: usize,
    i: i64,
    nb: &FbNeighborhood<'_>,
    x: f64,
    table: &WeightTable,
    periodic: bool,
) -> Result<FbState> {
    if round == 0 {
        let v = table.weight(i, 0, periodic)? * x / table.k;
        return Ok(FbState {
            forward: v,
            backward: v,
        });
    }
    let depth = if round == 1 { 1 } else { 2 };
    let avail = nb.backward_nbr.len().min(nb.forward_nbr.len());
    if nb.own.is_empty() || avail < depth {
        return Err(Error::InsufficientHistory {
            round,
            what: "forward/backward",
            needed: depth,
            available: if nb.own.is_empty() { 0 } else { avail },
        });
    }
    let k = round as i64;
    // increment of the neighbor over its previous round; its value before round 0 is zero
    let delta = |h: &[FbState], pick: fn(&FbState) -> f64| {
        if round == 1 {
            pick(&h[0])
        } else {
            pick(&h[0]) - pick(&h[1])
        }
    };
    let f_ratio = table.weight(i, k, periodic)? / table.weight(i + 1, k - 1, periodic)?;
    let b_ratio = table.weight(i, -k, periodic)? / table.weight(i - 1, -(k - 1), periodic)?;
    Ok(FbState {
        forward: nb.own[0].forward + f_ratio * delta(nb.forward_nbr, |s| s.forward),
        backward: nb.own[0].backward + b_ratio * delta(nb.backward_nbr, |s| s.backward),
    })
}

/// `y = yF + yB - (1/K) a[i][i] x`.
pub fn glue(state: &FbState, i: i64, x: f64, table: &WeightTable, periodic: bool) -> Result<f64> {
    Ok(state.forward + state.backward - table.weight(i, 0, periodic)? * x / table.k)
}
