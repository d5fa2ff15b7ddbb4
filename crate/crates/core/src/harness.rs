//! Synchronous round-based execution of per-sensor transitions.
//!
//! Each round every sensor first broadcasts its latest state to its two
//! neighbors, then all sensors compute their next state from the same
//! snapshot. A sensor only ever sees its own recent states, its own
//! measurements, and the last two messages received from each side; the
//! harness logs every delivered message so locality can be audited.

use serde::{Deserialize, Serialize};

use crate::algorithm::AlgorithmSpec;
use crate::chain::{hop_distance, Boundary, ChainConfig};
use crate::error::{Error, Result};
use crate::field::MeasurementField;

/// Received-message cache depth per side.
pub const NEIGHBOR_DEPTH: usize = 2;
/// Largest own-history depth any transition may consume.
pub const MAX_OWN_DEPTH: usize = 3;

/// One sensor program run by the harness.
pub trait Protocol {
    /// Per-sensor state; also the payload broadcast to both neighbors.
    type State: Clone;

    /// State assumed for a neighbor that does not exist.
    fn zero_state(&self) -> Self::State;
    fn payload_len(&self, state: &Self::State) -> usize;
    /// Number of own past states the transition reads.
    fn own_depth(&self) -> usize;
    /// Number of own measurements the transition reads, newest first.
    fn measurement_depth(&self) -> usize {
        1
    }
    /// Static protocols read `x_i(0)` only.
    fn time_varying(&self) -> bool {
        false
    }
    /// Last round at which `sensor` updates; later rounds keep the value.
    fn last_round(&self, _sensor: i64) -> Option<usize> {
        None
    }
    fn initial(&self, sensor: i64, x: f64) -> Result<Self::State>;
    fn step(&self, round: usize, sensor: i64, view: &LocalView<'_, Self::State>, xs: &[f64]) -> Result<Self::State>;
    /// Consensus value from the own history (newest first) at `round`.
    fn output(&self, round: usize, sensor: i64, own: &[Self::State], xs: &[f64]) -> Result<f64>;
    /// Extra per-round values exported alongside `y` (the z-vector).
    fn slots(&self, _state: &Self::State) -> Option<Vec<f64>> {
        None
    }
}

/// Newest-first histories visible to one sensor.
pub struct LocalView<'a, S> {
    pub own: &'a [S],
    pub left: &'a [S],
    pub right: &'a [S],
}

/// Fixed-capacity newest-first buffer.
#[derive(Clone, Debug)]
struct Recent<T> {
    items: Vec<T>,
    cap: usize,
}

impl<T: Clone> Recent<T> {
    fn new(cap: usize) -> Self {
        Recent {
            items: Vec::with_capacity(cap + 1),
            cap,
        }
    }

    fn push(&mut self, v: T) {
        self.items.insert(0, v);
        self.items.truncate(self.cap);
    }

    fn latest(&self) -> &T {
        &self.items[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRecord {
    /// Round whose value the message carries.
    pub round: usize,
    pub receiver: i64,
    pub sender: i64,
    pub payload: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusTrace {
    pub n: usize,
    pub boundary: Boundary,
    pub rounds: usize,
    pub algorithm: AlgorithmSpec,
    /// `y[i][k]` for real sensors `0..n`, rounds `0..=rounds`.
    pub y: Vec<Vec<f64>>,
    /// `z[i][k][slot]`, present for the time-varying window.
    pub z: Option<Vec<Vec<Vec<f64>>>>,
    pub audit: Vec<MessageRecord>,
    pub own_history_depth: usize,
}

impl ConsensusTrace {
    /// Values of all real sensors at round `k`.
    pub fn round(&self, k: usize) -> Vec<f64> {
        self.y.iter().map(|row| row[k]).collect()
    }
}

/// Runs `algo` on `config` with measurements from `field`.
pub fn run(config: &ChainConfig, field: &MeasurementField, algo: &AlgorithmSpec) -> Result<ConsensusTrace> {
    algo.validate(config)?;
    crate::algorithm::dispatch(config, field, algo)
}

/// Runs an arbitrary protocol under the harness.
pub fn run_protocol<P: Protocol>(
    config: &ChainConfig,
    field: &MeasurementField,
    protocol: &P,
    algorithm: AlgorithmSpec,
) -> Result<ConsensusTrace> {
    config.validate()?;
    field.validate()?;
    if protocol.own_depth() > MAX_OWN_DEPTH {
        return Err(Error::validation(
            "protocol",
            format!("own history depth {} exceeds {MAX_OWN_DEPTH}", protocol.own_depth()),
        ));
    }
    let layout = config.layout();
    let len = layout.len();
    let time_varying = protocol.time_varying();
    let measure = |slot: usize, k: usize| -> Result<f64> {
        if layout.is_real(slot) {
            field.evaluate(layout.sensor_id(slot), if time_varying { k } else { 0 })
        } else {
            Ok(0.0)
        }
    };

    let own_cap = protocol.own_depth().max(1);
    let mut own: Vec<Recent<P::State>> = vec![Recent::new(own_cap); len];
    let mut inbox_left: Vec<Recent<P::State>> = vec![Recent::new(NEIGHBOR_DEPTH); len];
    let mut inbox_right: Vec<Recent<P::State>> = vec![Recent::new(NEIGHBOR_DEPTH); len];
    let mut xs: Vec<Recent<f64>> = vec![Recent::new(protocol.measurement_depth().max(1)); len];

    let n = config.n;
    let mut y = vec![Vec::with_capacity(config.rounds + 1); n];
    let mut z: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n];
    let mut has_slots = false;
    let mut audit = Vec::with_capacity(2 * len * config.rounds);

    for slot in 0..len {
        let x0 = measure(slot, 0)?;
        xs[slot].push(x0);
        own[slot].push(protocol.initial(layout.sensor_id(slot), x0)?);
    }

    let mut record = |round: usize, own: &[Recent<P::State>], xs: &[Recent<f64>]| -> Result<()> {
        for slot in layout.halo..layout.halo + n {
            let id = layout.sensor_id(slot);
            let v = protocol.output(round, id, &own[slot].items, &xs[slot].items)?;
            if !v.is_finite() {
                return Err(Error::Diverged {
                    sensor: id,
                    round,
                    value: v,
                });
            }
            y[slot - layout.halo].push(v);
            if let Some(s) = protocol.slots(own[slot].latest()) {
                if let Some(bad) = s.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Diverged {
                        sensor: id,
                        round,
                        value: *bad,
                    });
                }
                has_slots = true;
                z[slot - layout.halo].push(s);
            }
        }
        Ok(())
    };
    record(0, &own, &xs)?;

    let zero = protocol.zero_state();
    let mut next: Vec<P::State> = Vec::with_capacity(len);
    for k in 0..config.rounds {
        // deliver round-k states
        for slot in 0..len {
            let (left, right) = layout.neighbors(slot);
            let state = own[slot].latest();
            let payload = protocol.payload_len(state);
            let sender = layout.sensor_id(slot);
            match left {
                Some(ls) => {
                    inbox_right[ls].push(state.clone());
                    audit.push(MessageRecord {
                        round: k,
                        receiver: layout.sensor_id(ls),
                        sender,
                        payload,
                    });
                }
                None => inbox_left[slot].push(zero.clone()),
            }
            match right {
                Some(rs) => {
                    inbox_left[rs].push(state.clone());
                    audit.push(MessageRecord {
                        round: k,
                        receiver: layout.sensor_id(rs),
                        sender,
                        payload,
                    });
                }
                None => inbox_right[slot].push(zero.clone()),
            }
        }

        let round = k + 1;
        next.clear();
        for slot in 0..len {
            let id = layout.sensor_id(slot);
            if time_varying {
                let x = measure(slot, round)?;
                xs[slot].push(x);
            }
            let active = protocol.last_round(id).is_none_or(|last| round <= last);
            let state = if active {
                let view = LocalView {
                    own: &own[slot].items,
                    left: &inbox_left[slot].items,
                    right: &inbox_right[slot].items,
                };
                protocol.step(round, id, &view, &xs[slot].items)?
            } else {
                own[slot].latest().clone()
            };
            next.push(state);
        }
        for (slot, state) in next.drain(..).enumerate() {
            own[slot].push(state);
        }
        record(round, &own, &xs)?;
    }

    Ok(ConsensusTrace {
        n,
        boundary: config.boundary,
        rounds: config.rounds,
        algorithm,
        y,
        z: has_slots.then_some(z),
        audit,
        own_history_depth: protocol.own_depth(),
    })
}

/// Number of audit records between non-adjacent sensors, plus one if the
/// transition consumed more than three rounds of its own history.
pub fn audit_locality(trace: &ConsensusTrace) -> usize {
    let far = trace
        .audit
        .iter()
        .filter(|m| hop_distance(&trace.boundary, trace.n, m.receiver, m.sender) != 1)
        .count();
    far + usize::from(trace.own_history_depth > MAX_OWN_DEPTH)
}

/// Number of audit records whose payload size differs from `expected`.
pub fn audit_payloads(trace: &ConsensusTrace, expected: usize) -> usize {
    trace.audit.iter().filter(|m| m.payload != expected).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::static_consensus::Rho;

    #[test]
    fn forged_record_is_counted() {
        let cfg = ChainConfig::ring(8, 2);
        let algo = AlgorithmSpec::Exponential {
            rho: Rho::new(0.5).unwrap(),
        };
        let mut trace = run(&cfg, &MeasurementField::constant(1.0), &algo).unwrap();
        assert_eq!(audit_locality(&trace), 0);
        trace.audit.push(MessageRecord {
            round: 0,
            receiver: 5,
            sender: 2,
            payload: 1,
        });
        assert_eq!(audit_locality(&trace), 1);
    }

    #[test]
    fn zero_rounds_has_no_messages() {
        let cfg = ChainConfig::ring(8, 0);
        let algo = AlgorithmSpec::Exponential {
            rho: Rho::new(0.5).unwrap(),
        };
        let trace = run(&cfg, &MeasurementField::impulse(3), &algo).unwrap();
        assert!(trace.audit.is_empty());
        assert_eq!(audit_locality(&trace), 0);
        assert_eq!(trace.y[3], vec![1.0 / 3.0]);
    }

    #[test]
    fn message_count() {
        let cfg = ChainConfig::truncated(6, 4);
        let algo = AlgorithmSpec::Window { l: 4 };
        let trace = run(&cfg, &MeasurementField::constant(1.0), &algo).unwrap();
        // 5 links, two directions, 4 rounds
        assert_eq!(trace.audit.len(), 5 * 2 * 4);
    }

    struct Blowup;

    impl Protocol for Blowup {
        type State = f64;
        fn zero_state(&self) -> f64 {
            0.0
        }
        fn payload_len(&self, _: &f64) -> usize {
            1
        }
        fn own_depth(&self) -> usize {
            1
        }
        fn initial(&self, _: i64, x: f64) -> Result<f64> {
            Ok(x)
        }
        fn step(&self, _: usize, _: i64, view: &LocalView<'_, f64>, _: &[f64]) -> Result<f64> {
            Ok(view.own[0] * 1e200)
        }
        fn output(&self, _: usize, _: i64, own: &[f64], _: &[f64]) -> Result<f64> {
            Ok(own[0])
        }
    }

    #[test]
    fn overflow_reports_sensor_and_round() {
        let cfg = ChainConfig::ring(4, 5);
        let algo = AlgorithmSpec::Window { l: 1 };
        let err = run_protocol(&cfg, &MeasurementField::impulse(2), &Blowup, algo).unwrap_err();
        assert!(matches!(err, Error::Diverged { sensor: 2, round: 2, .. }), "{err}");
    }
}
