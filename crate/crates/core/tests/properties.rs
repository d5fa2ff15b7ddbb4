use local_consensus::acceptance::random_table_field;
use local_consensus::arbitrary::WeightTable;
use local_consensus::field::FieldKind;
use local_consensus::oracle::{exp_target, Domain, Truncation};
use local_consensus::{audit_locality, run, AlgorithmSpec, ChainConfig, MeasurementField, Rho};
use proptest::prelude::*;

fn algo_strategy() -> impl Strategy<Value = AlgorithmSpec> {
    prop_oneof![
        (0.05f64..0.95).prop_map(|r| AlgorithmSpec::Exponential { rho: Rho::new(r).unwrap() }),
        (0.05f64..0.95, 0.05f64..0.95).prop_map(|(b, f)| AlgorithmSpec::Asymmetric {
            rho_b: Rho::new(b).unwrap(),
            rho_f: Rho::new(f).unwrap(),
        }),
        (1usize..6).prop_map(|l| AlgorithmSpec::Window { l }),
        (0.05f64..0.95).prop_map(|r| AlgorithmSpec::DynExponential { rho: Rho::new(r).unwrap() }),
        (1usize..5).prop_map(|l| AlgorithmSpec::DynWindow { l }),
        (0.2f64..0.9, 1usize..8).prop_map(|(r, radius)| AlgorithmSpec::Arbitrary {
            table: WeightTable::geometric(24, r, radius).unwrap(),
        }),
    ]
}

fn shifted(field: &MeasurementField, s: usize) -> MeasurementField {
    let FieldKind::Table { values } = &field.kind else {
        unreachable!()
    };
    let n = values[0].len();
    let rows = values
        .iter()
        .map(|row| (0..n).map(|i| row[(i + n - s) % n]).collect())
        .collect();
    MeasurementField::table(rows)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn superposition(algo in algo_strategy(), a in -3.0f64..3.0, b in -3.0f64..3.0, s1 in 0u64..1000, s2 in 0u64..1000) {
        let (n, rounds) = (24, 10);
        let tv = algo.is_dynamic();
        let f = random_table_field(n, rounds, s1, tv);
        let g = random_table_field(n, rounds, s2, tv);
        let mix = MeasurementField::combine(a, &f, b, &g).unwrap();
        let cfg = ChainConfig::ring(n, rounds);
        let (tf, tg, tm) = (run(&cfg, &f, &algo).unwrap(), run(&cfg, &g, &algo).unwrap(), run(&cfg, &mix, &algo).unwrap());
        for i in 0..n {
            for k in 0..=rounds {
                prop_assert!((tm.y[i][k] - a * tf.y[i][k] - b * tg.y[i][k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ring_shift_equivariance(algo in algo_strategy(), s in 0usize..24, seed in 0u64..1000) {
        let (n, rounds) = (24, 9);
        let f = random_table_field(n, rounds, seed, algo.is_dynamic());
        let cfg = ChainConfig::ring(n, rounds);
        let t0 = run(&cfg, &f, &algo).unwrap();
        let t1 = run(&cfg, &shifted(&f, s), &algo).unwrap();
        for i in 0..n {
            // geometric tables are identical in every row, so shifting is exact
            prop_assert_eq!(&t1.y[(i + s) % n], &t0.y[i]);
        }
    }

    #[test]
    fn locality_and_determinism(algo in algo_strategy(), seed in 0u64..1000, halo in any::<bool>()) {
        let (n, rounds) = (24, 8);
        let f = random_table_field(n, rounds, seed, algo.is_dynamic());
        let cfg = if halo { ChainConfig::zero_halo(n, rounds) } else { ChainConfig::truncated(n, rounds) };
        let a = run(&cfg, &f, &algo).unwrap();
        let b = run(&cfg, &f, &algo).unwrap();
        prop_assert_eq!(audit_locality(&a), 0);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn exponential_geometric_convergence(r in 0.1f64..0.9, k in 1usize..30, seed in 0u64..1000) {
        let n = 64;
        let rho = Rho::new(r).unwrap();
        let f = random_table_field(n, 0, seed, false);
        let trace = run(&ChainConfig::ring(n, k), &f, &AlgorithmSpec::Exponential { rho }).unwrap();
        let bound = rho.lambda() * 2.0 * f.bound() * r.powi(k as i32 + 1) / (1.0 - r);
        for i in 0..n {
            let limit = exp_target(&f, i as i64, rho, Truncation::Tail(1e-15), Domain::Ring(n)).unwrap().value;
            prop_assert!((trace.y[i][k] - limit).abs() <= bound + 1e-14);
        }
    }
}

#[test]
fn exponential_round_increments() {
    // y_i(k) - y_i(k-1) = rho^k lambda (x_{i-k} + x_{i+k})
    let (n, r) = (40, 0.7);
    let rho = Rho::new(r).unwrap();
    let f = random_table_field(n, 0, 77, false);
    for cfg in [ChainConfig::ring(n, 15), ChainConfig::zero_halo(n, 15)] {
        let t = run(&cfg, &f, &AlgorithmSpec::Exponential { rho }).unwrap();
        let x = |i: i64| match cfg.boundary {
            local_consensus::Boundary::Ring => f.evaluate(i.rem_euclid(n as i64), 0).unwrap(),
            _ if i < 0 || i >= n as i64 => 0.0,
            _ => f.evaluate(i, 0).unwrap(),
        };
        for i in 0..n {
            for k in 1..=15usize {
                let d = t.y[i][k] - t.y[i][k - 1];
                let e = rho.lambda() * r.powi(k as i32) * (x(i as i64 - k as i64) + x(i as i64 + k as i64));
                assert!((d - e).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn direction_separation() {
    use local_consensus::arbitrary::{fb_transition, FbNeighborhood, FbState};
    // perturbing x_{i+m} never moves the backward variable of sensor i
    let n = 16;
    let table = WeightTable::geometric(n, 0.6, 6).unwrap();
    let run_fb = |x: &[f64]| -> Vec<Vec<FbState>> {
        let mut hist: Vec<Vec<FbState>> = vec![(0..n)
            .map(|i| fb_transition(0, i as i64, &FbNeighborhood { own: &[], backward_nbr: &[], forward_nbr: &[] }, x[i], &table, true).unwrap())
            .collect()];
        for k in 1..=6 {
            let prev2 = if k >= 2 { Some(hist[k - 2].clone()) } else { None };
            let prev = hist[k - 1].clone();
            let next = (0..n)
                .map(|i| {
                    let h = |j: usize| {
                        let mut v = vec![prev[j]];
                        if let Some(p) = &prev2 {
                            v.push(p[j]);
                        }
                        v
                    };
                    let own = h(i);
                    let back = h((i + n - 1) % n);
                    let fwd = h((i + 1) % n);
                    let nb = FbNeighborhood { own: &own, backward_nbr: &back, forward_nbr: &fwd };
                    fb_transition(k, i as i64, &nb, x[i], &table, true).unwrap()
                })
                .collect();
            hist.push(next);
        }
        hist
    };
    let x0: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
    let mut x1 = x0.clone();
    x1[7] += 5.0;
    let (a, b) = (run_fb(&x0), run_fb(&x1));
    for k in 0..=6 {
        // sensors 1..=6 lie within 6 hops behind 7 but the ring wraps past 7 only for i > 7
        for i in 1..7 {
            assert_eq!(a[k][i].backward, b[k][i].backward, "sensor {i} round {k}");
        }
    }
    assert_ne!(a[6][1].forward, b[6][1].forward);
}
