use riemann_arc::arc::{self, SolverConfig, StoppingRule, Variant};
use riemann_arc::jd::JdInstance;
use riemann_arc::manifold::Manifold;
use riemann_arc::oracle::SeparableObjective;
use riemann_arc::trace::{self, check_laws, Outcome, SolverKind, TraceLaws};
use riemann_arc::trust_region;

fn config(variant: Variant) -> SolverConfig {
    let base = SolverConfig {
        grad_sample_size: 15,
        hess_sample_size: 6,
        stopping: StoppingRule::GradSquaredThreshold(1e-4),
        max_iters: Some(500),
        seed: 9,
        ..SolverConfig::default()
    };
    variant.configure(&base)
}

fn laws(cfg: &SolverConfig, kind: SolverKind, n: usize) -> TraceLaws {
    let bundle = cfg.bundle(n).unwrap();
    TraceLaws {
        kind,
        gamma: cfg.gamma,
        rho_th: cfg.rho_th,
        delta_max: Some(cfg.delta_max()),
        grad_sample_size: Some(bundle.grad_sample_size() as u64),
        hess_sample_size: Some(bundle.hess_sample_size() as u64),
    }
}

#[test]
fn every_variant_decreases_the_jd_objective() {
    let inst = JdInstance::generate(60, 5, 3, 4, 0.05).unwrap();
    let x0 = inst.manifold().random_point(5);
    let f0 = inst.value(&x0);
    for variant in [Variant::Racr, Variant::Sracr, Variant::Ssracr] {
        let cfg = config(variant);
        let t = arc::run(&inst, x0.clone(), &cfg).unwrap();
        assert!(t.final_f < f0, "{}", variant.name());
        assert!(
            check_laws(&t.records, &laws(&cfg, SolverKind::Cubic, 60)).is_empty(),
            "{}",
            variant.name()
        );
        assert!(inst.manifold().feasibility_residual(t.final_point.data()) < 1e-10);
    }
    let cfg = config(Variant::Ssracr);
    let t = trust_region::run(&inst, x0, &cfg).unwrap();
    assert!(t.final_f < f0);
    assert!(check_laws(&t.records, &laws(&cfg, SolverKind::TrustRegion, 60)).is_empty());
}

#[test]
fn exact_run_reaches_the_gradient_threshold() {
    let inst = JdInstance::generate(40, 4, 4, 1, 0.05).unwrap();
    let cfg = config(Variant::Racr);
    let t = arc::run(&inst, inst.manifold().random_point(2), &cfg).unwrap();
    assert_eq!(t.outcome, Outcome::OptimalityReached);
    assert!(t.final_grad_norm.powi(2) <= 1e-4);
    let exact = inst.rgrad(&t.final_point, None).unwrap().norm();
    assert_eq!(exact, t.final_grad_norm);
}

#[test]
fn stored_instance_reproduces_the_run() {
    let inst = JdInstance::generate(30, 4, 2, 12, 0.1).unwrap();
    let mut buf = Vec::new();
    inst.write_json(&mut buf).unwrap();
    let back = JdInstance::read_json(buf.as_slice()).unwrap();
    let cfg = config(Variant::Ssracr);
    let x0 = inst.manifold().random_point(3);
    let untimed = |mut t: trace::RunTrace| {
        t.records.iter_mut().for_each(|r| r.millis = 0.0);
        t.records
    };
    let a = untimed(arc::run(&inst, x0.clone(), &cfg).unwrap());
    let b = untimed(arc::run(&back, x0, &cfg).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn trace_csv_round_trip_keeps_the_laws() {
    let inst = JdInstance::generate(30, 5, 2, 6, 0.1).unwrap();
    let cfg = config(Variant::Sracr);
    let t = arc::run(&inst, inst.manifold().random_point(7), &cfg).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let (kind, records) = trace::read_csv(buf.as_slice()).unwrap();
    assert_eq!(kind, SolverKind::Cubic);
    assert_eq!(records.len(), t.records.len());
    for (r, s) in records.iter().zip(&t.records) {
        assert_eq!(
            (r.k, r.f, r.param, r.rho, r.success, r.grad_evals),
            (s.k, s.f, s.param, s.rho, s.success, s.grad_evals)
        );
    }
    assert!(check_laws(&records, &laws(&cfg, SolverKind::Cubic, 30)).is_empty());
}
