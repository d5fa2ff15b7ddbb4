use local_consensus::arbitrary::WeightTable;
use local_consensus::oracle::oracle_trace;
use local_consensus::{run, AlgorithmSpec, ChainConfig, MeasurementField, Rho};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-10;

fn random_field(n: usize, rounds: usize, seed: u64, time_varying: bool) -> MeasurementField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rows = (0..=rounds)
        .map(|_| {
            if time_varying {
                (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
            } else {
                first.clone()
            }
        })
        .collect();
    MeasurementField::table(rows)
}

fn rho(v: f64) -> Rho {
    Rho::new(v).unwrap()
}

fn check(algo: AlgorithmSpec, rounds: usize, time_varying: bool) {
    let n = 64;
    for seed in [1, 2, 3] {
        let field = random_field(n, rounds, seed, time_varying);
        for cfg in [ChainConfig::ring(n, rounds), ChainConfig::zero_halo(n, rounds)] {
            let trace = run(&cfg, &field, &algo).unwrap();
            let target = oracle_trace(&cfg, &field, &algo).unwrap();
            for i in 0..n {
                for k in 0..=rounds {
                    let d = (trace.y[i][k] - target[i][k]).abs();
                    assert!(
                        d <= TOL,
                        "{} {:?} seed {seed}: sensor {i} round {k} differs by {d:e}",
                        algo.name(),
                        cfg.boundary
                    );
                }
            }
        }
    }
}

#[test]
fn exponential() {
    check(AlgorithmSpec::Exponential { rho: rho(0.8) }, 40, false);
}

#[test]
fn asymmetric() {
    check(
        AlgorithmSpec::Asymmetric {
            rho_b: rho(0.5),
            rho_f: rho(0.25),
        },
        30,
        false,
    );
}

#[test]
fn window_including_frozen_rounds() {
    check(AlgorithmSpec::Window { l: 5 }, 9, false);
}

#[test]
fn variable_window() {
    let l = (0..64).map(|i| 2 + (i % 8).min(8 - i % 8)).collect();
    check(AlgorithmSpec::VariableWindow { l }, 8, false);
}

#[test]
fn arbitrary_geometric() {
    let table = WeightTable::geometric(64, 0.7, 20).unwrap();
    check(AlgorithmSpec::Arbitrary { table }, 24, false);
}

#[test]
fn arbitrary_irregular_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rows = (0..64).map(|_| (0..41).map(|_| rng.random_range(0.1..2.0)).collect()).collect();
    let table = WeightTable::new(rows, 20.0, 20).unwrap();
    check(AlgorithmSpec::Arbitrary { table }, 22, false);
}

#[test]
fn dyn_exponential() {
    check(AlgorithmSpec::DynExponential { rho: rho(0.8) }, 30, true);
}

#[test]
fn dyn_window() {
    check(AlgorithmSpec::DynWindow { l: 3 }, 17, true);
}

#[test]
fn dyn_schemes_on_static_field_match_static_schemes() {
    let n = 32;
    let field = random_field(n, 12, 5, false);
    let cfg = ChainConfig::ring(n, 12);
    let a = run(&cfg, &field, &AlgorithmSpec::DynExponential { rho: rho(0.6) }).unwrap();
    let b = run(&cfg, &field, &AlgorithmSpec::Exponential { rho: rho(0.6) }).unwrap();
    for i in 0..n {
        for k in 0..=12 {
            assert!((a.y[i][k] - b.y[i][k]).abs() < 1e-12);
        }
    }
    let cfg = ChainConfig::ring(n, 3);
    let a = run(&cfg, &field, &AlgorithmSpec::DynWindow { l: 3 }).unwrap();
    let b = run(&cfg, &field, &AlgorithmSpec::Window { l: 3 }).unwrap();
    for i in 0..n {
        assert!((a.y[i][3] - b.y[i][3]).abs() < 1e-12);
    }
}
