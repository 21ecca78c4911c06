use lowrank_core::convex::{admm_solve, fbs_continuation, ConvexOptions};
use lowrank_core::factored::{pgd_solve, wirtinger_flow, PgdOptions, WfOptions};
use lowrank_core::hankel::{fiht_solve, HankelMode, HankelOptions, PartialSignal, SpectralSignal};
use lowrank_core::manifold::{iht_solve, rcg_solve, rgrad_phase, rgrad_solve, ManifoldOptions, ManifoldStep};
use lowrank_core::measurements::{generate_instance, sample_without_replacement};
use lowrank_core::rpca::{accaltproj_solve, RpcaInstance, RpcaOptions, ThresholdSchedule};
use lowrank_core::{NoClock, Scenario, Status};

fn dof(n: usize, r: usize) -> usize {
    (2 * n - r) * r
}

#[test]
fn nonconvex_solvers_recover_sensing() {
    let (n, r) = (12, 2);
    let p = generate_instance(Scenario::Sensing, n, r, 4 * dof(n, r), 1).unwrap();
    let niht = ManifoldOptions {
        step: ManifoldStep::Niht,
        ..ManifoldOptions::default()
    };
    let reports = [
        ("niht", iht_solve(&p, &niht, &NoClock).unwrap().map(|z| z.to_dense())),
        ("rgrad", rgrad_solve(&p, &ManifoldOptions::default(), &NoClock).unwrap().map(|z| z.to_dense())),
        ("rcg", rcg_solve(&p, &ManifoldOptions::default(), &NoClock).unwrap().map(|z| z.to_dense())),
        ("pgd", pgd_solve(&p, &PgdOptions::bench(), &NoClock).unwrap().map(|s| s.to_dense())),
    ];
    for (name, rep) in reports {
        assert_eq!(rep.status, Status::Converged, "{name}");
        assert!(p.rel_error(&rep.estimate) < 1e-4, "{name}: {}", p.rel_error(&rep.estimate));
        assert_eq!(rep.trace[0].iter, 0);
    }
}

#[test]
fn convex_solvers_approach_the_truth() {
    let (n, r) = (10, 2);
    let p = generate_instance(Scenario::Sensing, n, r, 5 * dof(n, r), 2).unwrap();
    let opts = ConvexOptions {
        tol: 1e-9,
        max_iters: 5000,
        ..ConvexOptions::default()
    };
    let fbs = fbs_continuation(&p, 1.0, 1e-6, 6, &opts, &NoClock).unwrap();
    assert!(p.rel_error(&fbs.estimate) < 1e-3, "fbs {}", p.rel_error(&fbs.estimate));
    let admm = admm_solve(&p, 1e-6, &opts, &NoClock).unwrap();
    assert!(p.rel_error(&admm.estimate) < 1e-3, "admm {}", p.rel_error(&admm.estimate));
}

#[test]
fn phase_retrieval_solvers_agree() {
    let p = generate_instance(Scenario::PhaseRetrieval, 16, 1, 160, 3).unwrap();
    let wf = wirtinger_flow(&p, &WfOptions::default(), &NoClock).unwrap();
    assert!(p.signal_rel_error(&wf.estimate).unwrap() < 1e-6);
    let tight = ManifoldOptions {
        tol: 1e-10,
        ..ManifoldOptions::default()
    };
    let rg = rgrad_phase(&p, &tight, &NoClock).unwrap();
    assert!(p.signal_rel_error(&rg.estimate.signal()).unwrap() < 1e-6);
}

#[test]
fn hankel_modes_complete_a_signal() {
    let n = 63;
    let sig = SpectralSignal::random(n, 2, 4).unwrap();
    let obs = PartialSignal::observe(&sig.samples, sample_without_replacement(n, 30, 5)).unwrap();
    for mode in [HankelMode::Iht, HankelMode::Fiht] {
        let opts = HankelOptions {
            mode,
            ..HankelOptions::default()
        };
        let rep = fiht_solve(&obs, 2, &opts, &NoClock).unwrap();
        assert!(obs.rel_error(&rep.estimate).unwrap() < 1e-5, "{mode:?}");
    }
}

#[test]
fn rpca_separates_components() {
    let p = RpcaInstance::generate(60, 3, 0.05, 6).unwrap();
    let rep = accaltproj_solve(&p, &ThresholdSchedule::default_for(&p), &RpcaOptions::default(), &NoClock).unwrap();
    let (ez, es) = p.rel_errors(&rep.estimate.lowrank.to_dense(), &rep.estimate.sparse).unwrap();
    assert!(ez < 1e-6 && es < 1e-6, "{ez} {es}");
}
