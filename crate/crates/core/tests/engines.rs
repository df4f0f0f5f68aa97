use proptest::prelude::*;

use hybridkinetics_core::conservation::detect_conservation_laws;
use hybridkinetics_core::models::{builtin, cook_model, CookParams};
use hybridkinetics_core::ode::{integrate, FlowField};
use hybridkinetics_core::pdmp::HybridModel;
use hybridkinetics_core::ssa::SsaOptions;
use hybridkinetics_core::{
    simulate_ode, simulate_pdmp, simulate_ssa, uniform_grid, IntegratorConfig, Kinetics,
    ModelDocument, Partition, PdmpConfig,
};

fn kinetics(doc: &ModelDocument) -> Kinetics {
    Kinetics::new(&doc.network, doc.partition.as_ref().unwrap().scale()).unwrap()
}

fn dot(v: &[i64], x: &[i64]) -> i64 {
    v.iter().zip(x).map(|(a, b)| a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ssa_keeps_conservation_laws_exactly(seed in any::<u64>(), which in 0usize..2) {
        let doc = builtin(["cook", "lambda_phage_b"][which]).unwrap();
        let laws = detect_conservation_laws(&doc.network);
        let k = kinetics(&doc);
        let opts = SsaOptions { record_jumps: true, ..SsaOptions::default() };
        let tr = simulate_ssa(&k, &doc.initial, 5.0, seed, &uniform_grid(5.0, 50), opts).unwrap();
        for v in &laws {
            let c0 = dot(v, doc.initial.counts());
            for j in tr.jumps.as_ref().unwrap() {
                prop_assert_eq!(dot(v, &j.state), c0);
            }
            for s in tr.samples() {
                prop_assert_eq!(dot(v, s), c0);
            }
        }
    }

    #[test]
    fn pdmp_operator_site_is_conserved(seed in any::<u64>()) {
        let doc = builtin("lambda_phage_b").unwrap();
        let m = HybridModel::new(&doc.network, doc.partition.as_ref().unwrap()).unwrap();
        let cfg = PdmpConfig { record_jumps: true, ..PdmpConfig::default() };
        let tr = simulate_pdmp(&m, &doc.initial, 100.0, seed, &cfg, &uniform_grid(100.0, 101)).unwrap();
        for i in 0..tr.sample_times.len() {
            prop_assert_eq!(tr.discrete(i).iter().sum::<i64>(), 1);
            prop_assert!(tr.continuous(i).iter().all(|&x| x >= 0.0));
        }
        for j in tr.jumps.as_ref().unwrap() {
            prop_assert_eq!(j.x_d_after.iter().sum::<i64>(), 1);
            prop_assert!(j.hazard_gap <= 1e-9 * (1.0 + 50.0));
        }
    }
}

#[test]
fn ssa_reproducible() {
    let doc = builtin("lambda_phage_b").unwrap();
    let k = kinetics(&doc);
    let grid = uniform_grid(50.0, 200);
    let a = simulate_ssa(&k, &doc.initial, 50.0, 11, &grid, SsaOptions::default()).unwrap();
    let b = simulate_ssa(&k, &doc.initial, 50.0, 11, &grid, SsaOptions::default()).unwrap();
    assert_eq!(a, b);
    let c = simulate_ssa(&k, &doc.initial, 50.0, 12, &grid, SsaOptions::default()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn ode_conserves_operator_total() {
    let doc = builtin("lambda_phage_a").unwrap();
    let p = doc.partition.clone().unwrap();
    let cfg = IntegratorConfig::default();
    let grid = uniform_grid(500.0, 501);
    let tr = simulate_ode(&doc.network, &p, &doc.initial, 500.0, cfg, &grid).unwrap();
    let total = |x: &[f64]| x[2] + x[3] + x[4];
    let t0 = total(tr.sample(0));
    for i in 0..grid.len() {
        let drift = (total(tr.sample(i)) - t0).abs() / t0;
        assert!(drift < 10.0 * cfg.rtol, "drift {drift} at t = {}", grid[i]);
    }
    let again = simulate_ode(&doc.network, &p, &doc.initial, 500.0, cfg, &grid).unwrap();
    assert_eq!(tr.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
               again.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}

#[test]
fn ode_rejects_discrete_species() {
    let doc = builtin("cook").unwrap();
    let p = doc.partition.clone().unwrap();
    let r = simulate_ode(&doc.network, &p, &doc.initial, 1.0, IntegratorConfig::default(), &[0.0]);
    assert!(r.is_err());
}

#[test]
fn pdmp_without_jumps_is_the_ode() {
    let doc = builtin("lambda_phage_a").unwrap();
    let p = doc.partition.clone().unwrap();
    let m = HybridModel::new(&doc.network, &p).unwrap();
    assert!(m.jump_reactions().is_empty());
    let grid = uniform_grid(300.0, 301);
    let cfg = PdmpConfig::default();
    let hybrid = simulate_pdmp(&m, &doc.initial, 300.0, 5, &cfg, &grid).unwrap();
    let ode = simulate_ode(&doc.network, &p, &doc.initial, 300.0, cfg.ode, &grid).unwrap();
    assert_eq!(hybrid.jump_count, 0);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(hybrid.continuous_values()), bits(&ode.values));
}

/// Between recorded jumps the discrete state is frozen and `x_C` follows the
/// flow: re-integrating each segment at a tighter tolerance lands on the
/// recorded pre-jump state.
fn check_segments(doc: &ModelDocument, t_max: f64, seed: u64) {
    let p = doc.partition.as_ref().unwrap();
    let m = HybridModel::new(&doc.network, p).unwrap();
    let cfg = PdmpConfig {
        record_jumps: true,
        ..PdmpConfig::default()
    };
    let tr = simulate_pdmp(&m, &doc.initial, t_max, seed, &cfg, &[t_max]).unwrap();
    let jumps = tr.jumps.as_ref().unwrap();
    assert!(jumps.len() > 3);
    let start = p.to_hybrid(doc.initial.counts());
    let mut t = 0.0;
    let mut x_c = start.x_c;
    let mut x_d = start.x_d;
    let tight = IntegratorConfig {
        rtol: 1e-10,
        atol: 1e-12,
        ..IntegratorConfig::default()
    };
    for j in jumps {
        let field = FlowField::new(m.scaled(), &x_d);
        let sol = integrate(&field, &x_c, t, j.time, tight, &[]).unwrap();
        for (a, b) in sol.final_state.iter().zip(&j.x_c_before) {
            assert!((a - b).abs() <= 1e-5 * (1.0 + a.abs()), "{a} vs {b} at t = {}", j.time);
        }
        t = j.time;
        x_c = j.x_c_after.clone();
        x_d = j.x_d_after.clone();
    }
    assert_eq!(tr.discrete(0), x_d.as_slice());
}

#[test]
fn pdmp_segments_follow_the_flow() {
    check_segments(&builtin("cook").unwrap(), 5.0, 3);
    check_segments(&builtin("lambda_phage_b").unwrap(), 300.0, 3);
}

#[test]
fn pdmp_reproducible() {
    let doc = builtin("lambda_phage_b").unwrap();
    let m = HybridModel::new(&doc.network, doc.partition.as_ref().unwrap()).unwrap();
    let grid = uniform_grid(100.0, 101);
    let cfg = PdmpConfig::default();
    let a = simulate_pdmp(&m, &doc.initial, 100.0, 8, &cfg, &grid).unwrap();
    let b = simulate_pdmp(&m, &doc.initial, 100.0, 8, &cfg, &grid).unwrap();
    assert_eq!(a, b);
}

#[test]
fn displacement_switch() {
    let doc = builtin("lambda_phage_b").unwrap();
    let m = HybridModel::new(&doc.network, doc.partition.as_ref().unwrap()).unwrap();
    let cfg = PdmpConfig {
        record_jumps: true,
        displacement: false,
        ..PdmpConfig::default()
    };
    let tr = simulate_pdmp(&m, &doc.initial, 100.0, 4, &cfg, &[100.0]).unwrap();
    for j in tr.jumps.as_ref().unwrap() {
        assert_eq!(j.x_c_before, j.x_c_after);
    }
}

#[test]
fn pdmp_needs_continuous_species_only_in_table_free_reactions() {
    // A state table on a continuous species cannot be scaled.
    let doc = hybridkinetics_core::parse_model(
        "MODEL t\nA -> B @ table(A) 1:2\nPARTITION CONTINUOUS A DISCRETE B SCALE 10\n",
    )
    .unwrap();
    assert!(HybridModel::new(&doc.network, doc.partition.as_ref().unwrap()).is_err());
}

#[test]
fn all_discrete_pdmp_runs_the_jump_chain() {
    let doc = cook_model(&CookParams::default()).unwrap();
    let p = Partition::all_discrete(3);
    let m = HybridModel::new(&doc.network, &p).unwrap();
    assert!(m.flow_reactions().is_empty());
    let tr = simulate_pdmp(&m, &doc.initial, 1.0, 2, &PdmpConfig::default(), &[1.0]).unwrap();
    assert!(tr.jump_count > 1000);
    assert!(tr.continuous_species.is_empty());
}
