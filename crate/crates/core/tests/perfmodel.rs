use dasgd_core::algorithms::{DelayedAveraging, LocalSgd, MiniBatchSgd};
use dasgd_core::perfmodel::{
    comm_time, lookup, recommend, select_delay, select_tau, speedup_curve, time_breakdown, total_time, Butterfly,
    CommCost, ComputeCost, Hardware, PerfInputs, SchemeRegistry, Tree, CATALOG,
};
use proptest::prelude::*;

#[test]
fn catalog_delays_and_periods_reproduce() {
    for e in &CATALOG {
        for hw in Hardware::ALL {
            let t = e.timing(hw);
            assert_eq!(select_delay(t.t_c_tree, t.t_p), t.delay, "{} {}", e.model, hw.key());
            assert_eq!(select_tau(t.delay), t.tau, "{} {}", e.model, hw.key());
            let r = recommend(e, hw, "tree").unwrap();
            assert_eq!((r.d, r.tau), (t.delay, t.tau));
            assert!(r.feasible);
        }
    }
}

#[test]
fn resnet50_communication_share() {
    let schemes = SchemeRegistry::with_builtins();
    let inputs = lookup("ResNet-50").unwrap().inputs(Hardware::Titan, "tree").unwrap();
    let mb = total_time(&MiniBatchSgd, &inputs, 1, 0, &schemes).unwrap();
    let local = total_time(&LocalSgd, &inputs, 4, 0, &schemes).unwrap();
    let da = total_time(&DelayedAveraging, &inputs, 2, 1, &schemes).unwrap();
    assert!((mb.comm_fraction - 0.459).abs() <= 0.001, "{}", mb.comm_fraction);
    assert!((local.comm_fraction - 0.175).abs() <= 0.001, "{}", local.comm_fraction);
    assert_eq!(da.comm_fraction, 0.0);
}

#[test]
fn tree_costs_twice_butterfly() {
    for m in [2, 3, 8, 100, 256, 1000] {
        let t = comm_time(1e7, 4.0, 1e9, m, &Tree);
        let b = comm_time(1e7, 4.0, 1e9, m, &Butterfly);
        assert_eq!(t, 2.0 * b);
    }
    assert_eq!(comm_time(1e7, 4.0, 1e9, 1, &Tree), 0.0);
}

fn bandwidth_inputs(t_f: f64, bw: f64) -> PerfInputs {
    PerfInputs {
        n_params: 2.5e7,
        bytes_per_param: 4.0,
        workers: 1,
        parallel_samples: 1,
        local_batch: 64,
        dataset_size: 1.28e6,
        compute: ComputeCost::PerSample { t_forward: t_f, t_backward: 2.0 * t_f, t_local: 1e-3 },
        comm: CommCost::Bandwidth { bandwidth: bw },
        scheme: "butterfly".into(),
    }
}

#[test]
fn feasible_delay_scales_linearly() {
    let schemes = SchemeRegistry::with_builtins();
    let inputs = lookup("resnet50").unwrap().inputs(Hardware::Titan, "tree").unwrap();
    let ms: Vec<usize> = (1..=128).map(|i| 2 * i).collect();
    let curve = speedup_curve(&inputs, &DelayedAveraging, &ms, 2, 1, &schemes).unwrap();
    for (m, s) in curve {
        assert_eq!(s, m as f64, "m = {m}");
    }
    let pow2: Vec<usize> = (1..=8).map(|k| 1 << k).collect();
    let mb = speedup_curve(&inputs, &MiniBatchSgd, &pow2, 1, 0, &schemes).unwrap();
    for w in mb.windows(2) {
        assert!(w[1].1 / (w[1].0 as f64) < w[0].1 / (w[0].0 as f64), "{w:?}");
    }
}

#[test]
fn recommendation_is_json() {
    let r = recommend(lookup("vgg16").unwrap(), Hardware::K80, "Tree").unwrap();
    let v: serde_json::Value = serde_json::to_value(&r).unwrap();
    assert_eq!(v["d"], 2);
    assert_eq!(v["tau"], 3);
    assert_eq!(v["scheme"], "tree");
}

proptest! {
    #[test]
    fn delayed_never_slower(t_iter in 1e-3f64..10.0, t_comm in 0.0f64..50.0, tau in 2usize..10, d_frac in 0.0f64..1.0) {
        let d = 1 + ((tau - 2) as f64 * d_frac).round() as usize;
        let mb = time_breakdown(&MiniBatchSgd, t_iter, t_comm, 100.0, tau, d).unwrap();
        let local = time_breakdown(&LocalSgd, t_iter, t_comm, 100.0, tau, d).unwrap();
        let da = time_breakdown(&DelayedAveraging, t_iter, t_comm, 100.0, tau, d).unwrap();
        prop_assert!(da.t_total <= local.t_total);
        prop_assert!(local.t_total <= mb.t_total);
    }

    #[test]
    fn time_is_homogeneous(t_iter in 1e-3f64..10.0, t_comm in 0.0f64..50.0, c in 0.1f64..100.0) {
        for alg in [&MiniBatchSgd as &dyn dasgd_core::algorithms::Algorithm, &LocalSgd, &DelayedAveraging] {
            let a = time_breakdown(alg, t_iter, t_comm, 10.0, 4, 2).unwrap();
            let b = time_breakdown(alg, c * t_iter, c * t_comm, 10.0, 4, 2).unwrap();
            prop_assert!((b.t_total - c * a.t_total).abs() <= 1e-12 * b.t_total.max(1e-300));
        }
    }

    #[test]
    fn schemes_differ_by_factor_two(n in 1e3f64..1e9, bw in 1e6f64..1e11, m in 1usize..5000) {
        prop_assert_eq!(comm_time(n, 4.0, bw, m, &Tree), 2.0 * comm_time(n, 4.0, bw, m, &Butterfly));
    }

    #[test]
    fn speedup_bounded_by_workers(t_f in 1e-4f64..1e-2, bw in 1e8f64..1e10, m in 1usize..512) {
        let schemes = SchemeRegistry::with_builtins();
        let inputs = bandwidth_inputs(t_f, bw);
        for alg in [&MiniBatchSgd as &dyn dasgd_core::algorithms::Algorithm, &LocalSgd, &DelayedAveraging] {
            let s = speedup_curve(&inputs, alg, &[m], 4, 2, &schemes).unwrap()[0].1;
            prop_assert!(s <= m as f64 * (1.0 + 1e-12) && s > 0.0);
        }
    }
}
