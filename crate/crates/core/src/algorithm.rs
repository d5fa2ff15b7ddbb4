//! The seven update schemes and their bindings to the harness.

use serde::{Deserialize, Serialize};

use crate::arbitrary::{fb_transition, glue, FbNeighborhood, FbState, WeightTable};
use crate::chain::{Boundary, ChainConfig};
use crate::dynamic::{assemble_y, dyn_exp_transition, z_slot_transition};
use crate::error::{Error, Result};
use crate::field::MeasurementField;
use crate::harness::{run_protocol, ConsensusTrace, LocalView, Protocol};
use crate::static_consensus::{validate_window, validate_window_profile, Neighborhood, Rho, TwoSided};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Exponential {
        rho: Rho,
    },
    Asymmetric {
        rho_b: Rho,
        rho_f: Rho,
    },
    Window {
        #[serde(alias = "L")]
        l: usize,
    },
    /// One window half-width per real sensor.
    VariableWindow {
        #[serde(alias = "L")]
        l: Vec<usize>,
    },
    /// Terminates after `table.radius()` rounds.
    Arbitrary {
        table: WeightTable,
    },
    DynExponential {
        rho: Rho,
    },
    DynWindow {
        #[serde(alias = "L")]
        l: usize,
    },
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::Exponential { .. } => "exponential",
            AlgorithmSpec::Asymmetric { .. } => "asymmetric",
            AlgorithmSpec::Window { .. } => "window",
            AlgorithmSpec::VariableWindow { .. } => "variable_window",
            AlgorithmSpec::Arbitrary { .. } => "arbitrary",
            AlgorithmSpec::DynExponential { .. } => "dyn_exponential",
            AlgorithmSpec::DynWindow { .. } => "dyn_window",
        }
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(self, AlgorithmSpec::DynExponential { .. } | AlgorithmSpec::DynWindow { .. })
    }

    /// Largest window half-width, for window schemes.
    pub fn max_window(&self) -> Option<usize> {
        match self {
            AlgorithmSpec::Window { l } | AlgorithmSpec::DynWindow { l } => Some(*l),
            AlgorithmSpec::VariableWindow { l } => l.iter().copied().max(),
            _ => None,
        }
    }

    pub fn validate(&self, config: &ChainConfig) -> Result<()> {
        config.validate()?;
        match self {
            AlgorithmSpec::Window { l } | AlgorithmSpec::DynWindow { l } => validate_window(*l)?,
            AlgorithmSpec::VariableWindow { l } => {
                if l.len() != config.n {
                    return Err(Error::validation(
                        "algorithm.L",
                        format!("profile has {} entries for {} sensors", l.len(), config.n),
                    ));
                }
                validate_window_profile(l, config.boundary == Boundary::Ring)?;
            }
            AlgorithmSpec::Arbitrary { table } if table.n() != config.n => {
                return Err(Error::validation(
                    "algorithm.weights",
                    format!("table has {} rows for {} sensors", table.n(), config.n),
                ));
            }
            _ => {}
        }
        if let (Boundary::Ring, Some(l)) = (config.boundary, self.max_window()) {
            if config.n < 2 * l + 1 {
                return Err(Error::validation(
                    "chain.n",
                    format!("ring of {} sensors is shorter than a window of {}", config.n, 2 * l + 1),
                ));
            }
        }
        Ok(())
    }
}

pub(crate) fn dispatch(config: &ChainConfig, field: &MeasurementField, algo: &AlgorithmSpec) -> Result<ConsensusTrace> {
    // static schemes read the round-0 measurement, noise included
    if !algo.is_dynamic() && !field.kind.is_static() {
        return Err(Error::validation(
            "field",
            format!("{} reads x_i(0) only and needs a field constant in time", algo.name()),
        ));
    }
    let spec = algo.clone();
    match algo {
        AlgorithmSpec::Exponential { rho } => run_protocol(config, field, &Uniform(TwoSided::exponential(*rho), None), spec),
        AlgorithmSpec::Asymmetric { rho_b, rho_f } => {
            run_protocol(config, field, &Uniform(TwoSided::asymmetric(*rho_b, *rho_f), None), spec)
        }
        AlgorithmSpec::Window { l } => run_protocol(config, field, &Uniform(TwoSided::window(*l), Some(*l)), spec),
        AlgorithmSpec::VariableWindow { l } => run_protocol(
            config,
            field,
            &VariableWindow {
                l: l.clone(),
                periodic: config.boundary == Boundary::Ring,
            },
            spec,
        ),
        AlgorithmSpec::Arbitrary { table } => run_protocol(
            config,
            field,
            &ForwardBackward {
                table,
                periodic: config.boundary == Boundary::Ring,
            },
            spec,
        ),
        AlgorithmSpec::DynExponential { rho } => run_protocol(config, field, &DynExponential(*rho), spec),
        AlgorithmSpec::DynWindow { l } => run_protocol(config, field, &DynWindow(*l), spec),
    }
}

/// Same coefficients at every sensor, optionally terminating.
struct Uniform(TwoSided, Option<usize>);

impl Protocol for Uniform {
    type State = f64;
    fn zero_state(&self) -> f64 {
        0.0
    }
    fn payload_len(&self, _: &f64) -> usize {
        1
    }
    fn own_depth(&self) -> usize {
        3
    }
    fn last_round(&self, _: i64) -> Option<usize> {
        self.1
    }
    fn initial(&self, _: i64, x: f64) -> Result<f64> {
        self.0.step(0, &Neighborhood::EMPTY, x)
    }
    fn step(&self, round: usize, _: i64, view: &LocalView<'_, f64>, xs: &[f64]) -> Result<f64> {
        let nb = Neighborhood {
            own: view.own,
            left: view.left,
            right: view.right,
        };
        self.0.step(round, &nb, xs[0])
    }
    fn output(&self, _: usize, _: i64, own: &[f64], _: &[f64]) -> Result<f64> {
        Ok(own[0])
    }
}

struct VariableWindow {
    l: Vec<usize>,
    periodic: bool,
}

impl VariableWindow {
    /// Ghost sensors beyond the chain reuse the nearest edge length.
    fn l_at(&self, sensor: i64) -> usize {
        let n = self.l.len() as i64;
        let idx = if self.periodic {
            sensor.rem_euclid(n)
        } else {
            sensor.clamp(0, n - 1)
        };
        self.l[idx as usize]
    }
}

impl Protocol for VariableWindow {
    type State = f64;
    fn zero_state(&self) -> f64 {
        0.0
    }
    fn payload_len(&self, _: &f64) -> usize {
        1
    }
    fn own_depth(&self) -> usize {
        3
    }
    fn last_round(&self, sensor: i64) -> Option<usize> {
        Some(self.l_at(sensor))
    }
    fn initial(&self, sensor: i64, x: f64) -> Result<f64> {
        TwoSided::window(self.l_at(sensor)).step(0, &Neighborhood::EMPTY, x)
    }
    fn step(&self, round: usize, sensor: i64, view: &LocalView<'_, f64>, xs: &[f64]) -> Result<f64> {
        let nb = Neighborhood {
            own: view.own,
            left: view.left,
            right: view.right,
        };
        crate::static_consensus::variable_window_transition(
            round,
            &nb,
            xs[0],
            self.l_at(sensor),
            self.l_at(sensor - 1),
            self.l_at(sensor + 1),
        )
    }
    fn output(&self, _: usize, _: i64, own: &[f64], _: &[f64]) -> Result<f64> {
        Ok(own[0])
    }
}

struct ForwardBackward<'a> {
    table: &'a WeightTable,
    periodic: bool,
}

impl Protocol for ForwardBackward<'_> {
    type State = FbState;
    fn zero_state(&self) -> FbState {
        FbState::default()
    }
    fn payload_len(&self, _: &FbState) -> usize {
        // each neighbor needs one half: i-1 reads yF, i+1 reads yB
        1
    }
    fn own_depth(&self) -> usize {
        1
    }
    fn last_round(&self, _: i64) -> Option<usize> {
        Some(self.table.radius())
    }
    fn initial(&self, sensor: i64, x: f64) -> Result<FbState> {
        let empty = FbNeighborhood {
            own: &[],
            backward_nbr: &[],
            forward_nbr: &[],
        };
        fb_transition(0, sensor, &empty, x, self.table, self.periodic)
    }
    fn step(&self, round: usize, sensor: i64, view: &LocalView<'_, FbState>, xs: &[f64]) -> Result<FbState> {
        let nb = FbNeighborhood {
            own: view.own,
            backward_nbr: view.left,
            forward_nbr: view.right,
        };
        fb_transition(round, sensor, &nb, xs[0], self.table, self.periodic)
    }
    fn output(&self, _: usize, sensor: i64, own: &[FbState], xs: &[f64]) -> Result<f64> {
        glue(&own[0], sensor, xs[0], self.table, self.periodic)
    }
}

struct DynExponential(Rho);

impl Protocol for DynExponential {
    type State = f64;
    fn zero_state(&self) -> f64 {
        0.0
    }
    fn payload_len(&self, _: &f64) -> usize {
        1
    }
    fn own_depth(&self) -> usize {
        3
    }
    fn measurement_depth(&self) -> usize {
        4
    }
    fn time_varying(&self) -> bool {
        true
    }
    fn initial(&self, _: i64, x: f64) -> Result<f64> {
        dyn_exp_transition(0, &Neighborhood::EMPTY, &[x], self.0)
    }
    fn step(&self, round: usize, _: i64, view: &LocalView<'_, f64>, xs: &[f64]) -> Result<f64> {
        let nb = Neighborhood {
            own: view.own,
            left: view.left,
            right: view.right,
        };
        dyn_exp_transition(round, &nb, xs, self.0)
    }
    fn output(&self, _: usize, _: i64, own: &[f64], _: &[f64]) -> Result<f64> {
        Ok(own[0])
    }
}

struct DynWindow(usize);

impl DynWindow {
    fn column(hist: &[Vec<f64>], slot: usize) -> Vec<f64> {
        hist.iter().map(|z| z[slot]).collect()
    }
}

impl Protocol for DynWindow {
    type State = Vec<f64>;
    fn zero_state(&self) -> Vec<f64> {
        vec![0.0; self.0 + 1]
    }
    fn payload_len(&self, state: &Vec<f64>) -> usize {
        state.len()
    }
    fn own_depth(&self) -> usize {
        3
    }
    fn time_varying(&self) -> bool {
        true
    }
    fn initial(&self, _: i64, x: f64) -> Result<Vec<f64>> {
        (0..=self.0)
            .map(|slot| z_slot_transition(0, slot, &Neighborhood::EMPTY, x, self.0))
            .collect()
    }
    fn step(&self, round: usize, _: i64, view: &LocalView<'_, Vec<f64>>, xs: &[f64]) -> Result<Vec<f64>> {
        (0..=self.0)
            .map(|slot| {
                let own = Self::column(view.own, slot);
                let left = Self::column(view.left, slot);
                let right = Self::column(view.right, slot);
                let nb = Neighborhood {
                    own: &own,
                    left: &left,
                    right: &right,
                };
                z_slot_transition(round, slot, &nb, xs[0], self.0)
            })
            .collect()
    }
    fn output(&self, round: usize, _: i64, own: &[Vec<f64>], _: &[f64]) -> Result<f64> {
        let prev = if round == 0 { None } else { own.get(1).map(Vec::as_slice) };
        Ok(assemble_y(&own[0], prev, round, self.0))
    }
    fn slots(&self, state: &Vec<f64>) -> Option<Vec<f64>> {
        Some(state.clone())
    }
}
