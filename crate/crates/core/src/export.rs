//! Trace CSV output.

use std::io::Write;

use crate::error::Result;
use crate::harness::ConsensusTrace;

/// Round-trip-exact decimal form (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `round,sensor,y` rows (plus `z0..zL` when present), round-major.
pub fn write_trace_csv<W: Write>(trace: &ConsensusTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let slots = trace.z.as_ref().map_or(0, |z| z[0][0].len());
    let mut header = vec!["round".to_string(), "sensor".to_string(), "y".to_string()];
    header.extend((0..slots).map(|s| format!("z{s}")));
    w.write_record(&header)?;
    for k in 0..=trace.rounds {
        for i in 0..trace.n {
            let mut rec = vec![k.to_string(), i.to_string(), fmt_f64(trace.y[i][k])];
            if let Some(z) = &trace.z {
                rec.extend(z[i][k].iter().map(|v| fmt_f64(*v)));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace CSV back into `y[i][k]`.
pub fn read_trace_y<R: std::io::Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_reader(input);
    let mut y: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |idx: usize, what: &str| -> Result<f64> {
            rec.get(idx)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| crate::Error::validation("trace.csv", format!("bad {what} in record {rec:?}")))
        };
        let sensor = parse(1, "sensor")? as usize;
        let value = parse(2, "y")?;
        if y.len() <= sensor {
            y.resize(sensor + 1, Vec::new());
        }
        y[sensor].push(value);
    }
    Ok(y)
}
