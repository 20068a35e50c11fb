use cmm::cmm_core::solver::RestartRule;
use cmm::cmm_core::Variant;
use cmm::{compare, Arm, ComparePlan, Error, GeneratorSpec, MeshSource, RunConfig};

fn small() -> RunConfig {
    let mut cfg = RunConfig::new(MeshSource::Generate(GeneratorSpec::LShape { m: 4 }));
    cfg.solver.k = 4;
    cfg.solver.mu = 0.02;
    cfg
}

fn arm(variant: Variant) -> Arm {
    Arm {
        variant,
        restart_rule: RestartRule::Paper,
    }
}

#[test]
fn self_comparison_is_zero() {
    let plan = ComparePlan {
        fast: arm(Variant::FastAdmm),
        vanilla: arm(Variant::FastAdmm),
    };
    let r = compare(&small(), &[3, 4, 5], plan).unwrap();
    assert_eq!(r.completed, 3);
    for p in &r.pairs {
        let (f, v) = (p.fast.as_ref().unwrap(), p.vanilla.as_ref().unwrap());
        assert_eq!(f.iterations, v.iterations);
        assert_eq!(f.objective, v.objective);
        assert_eq!(p.iteration_reduction(), Some(0.0));
    }
    let it = r.iterations.unwrap();
    assert_eq!((it.mean, it.median), (0.0, 0.0));
}

#[test]
fn repeated_seed_gives_identical_rows() {
    let cfg = small();
    let r = compare(&cfg, &[1, 1], ComparePlan::standard(&cfg)).unwrap();
    let (a, b) = (&r.pairs[0], &r.pairs[1]);
    assert_eq!(a.init_checksum, b.init_checksum);
    assert_eq!(
        a.fast.as_ref().unwrap().iterations,
        b.fast.as_ref().unwrap().iterations
    );
    assert_eq!(
        a.vanilla.as_ref().unwrap().iterations,
        b.vanilla.as_ref().unwrap().iterations
    );
    assert_eq!(
        a.fast.as_ref().unwrap().objective,
        b.fast.as_ref().unwrap().objective
    );
    assert_eq!(a.iteration_reduction(), b.iteration_reduction());
}

#[test]
fn rows_follow_seed_order() {
    let cfg = small();
    let seeds = [9, 2, 7];
    let r = compare(&cfg, &seeds, ComparePlan::standard(&cfg)).unwrap();
    let got: Vec<u64> = r.pairs.iter().map(|p| p.seed).collect();
    assert_eq!(got, seeds);
    assert!(r.pairs.iter().all(|p| p.init_checksum.is_some()));
}

#[test]
fn single_seed_is_rejected() {
    let cfg = small();
    let err = compare(&cfg, &[1], ComparePlan::standard(&cfg)).unwrap_err();
    assert!(matches!(&err, Error::Config { field, .. } if field == "--seeds"));
}

#[test]
fn failures_are_recorded_per_seed() {
    // eigen init needs the dense eigensolver; a cap of 1 makes every arm fail
    let mut cfg = small();
    cfg.solver.init = cmm::cmm_core::solver::InitPolicy::Eigen;
    cfg.solver.dense_eig_cap = 1;
    let r = compare(&cfg, &[1, 2], ComparePlan::standard(&cfg)).unwrap();
    assert_eq!((r.completed, r.failed), (0, 2));
    assert!(r
        .pairs
        .iter()
        .all(|p| p.error.as_deref().is_some_and(|e| e.contains("fast arm"))));
    assert!(r.iterations.is_none());
}
