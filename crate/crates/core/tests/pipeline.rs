use sdna::composite::{run_composite, CompositeStepper, SeparableTerm};
use sdna::data::{generate_synthetic, load_libsvm, write_libsvm, SyntheticConfig, TargetKind};
use sdna::erm::{run_erm, ErmProblem, ErmRunOptions, ErmSolver, ErmSolverKind, GramStrategy};
use sdna::fixtures::random_pd;
use sdna::rates::{ErmInputs, RateInputs, RateReport};
use sdna::sampling::seeded_rng;
use sdna::smooth::{
    run_smooth, QuadraticForm, QuadraticObjective, RunOptions, SmoothMethod, SmoothStepper,
};
use sdna::{EsoStrategy, LossKind, PseudoinverseMode, SamplingSpec};

fn classification(d: usize, n: usize, seed: u64, density: f64) -> sdna::data::RawDataset {
    generate_synthetic(&SyntheticConfig {
        d,
        n,
        seed,
        density,
        label_noise: 0.05,
        target: TargetKind::Classification,
    })
    .unwrap()
}

#[test]
fn libsvm_file_round_trip_gives_the_same_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.svm");
    let data = classification(20, 40, 1, 0.3);
    write_libsvm(&data, &path).unwrap();
    let loaded = load_libsvm(&path, Some(20)).unwrap();
    assert_eq!(loaded, data);

    let spec = SamplingSpec::tau_nice(40, 5).unwrap();
    let opts = ErmRunOptions::from_epochs(10.0, 1.0, 40, 5.0, 3);
    let traces: Vec<_> = [data, loaded]
        .into_iter()
        .map(|d| {
            let p =
                ErmProblem::new(d, LossKind::Logistic, 1.0 / 40.0, GramStrategy::OnTheFly).unwrap();
            let solver = ErmSolver::prepare(ErmSolverKind::Sdna, &p, &spec).unwrap();
            run_erm(&solver, &p, &spec, &opts, &mut seeded_rng(3)).unwrap()
        })
        .collect();
    assert_eq!(traces[0].len(), 10);
    for (a, b) in traces[0].iter().zip(&traces[1]) {
        assert_eq!((a.primal, a.dual), (b.primal, b.dual));
    }
    let gaps: Vec<f64> = traces[0].iter().map(|r| r.gap).collect();
    assert!(gaps[9] < 0.1 * gaps[0], "{gaps:?}");
}

#[test]
fn sdna_beats_sdca_per_epoch_on_correlated_data() {
    // few features, many examples: the dual Hessian is far from diagonal
    let data = generate_synthetic(&SyntheticConfig {
        d: 4,
        n: 64,
        seed: 9,
        density: 1.0,
        label_noise: 0.1,
        target: TargetKind::Regression,
    })
    .unwrap();
    let p = ErmProblem::new(data, LossKind::Quadratic, 1e-3, GramStrategy::Precompute).unwrap();
    let spec = SamplingSpec::tau_nice(64, 16).unwrap();
    let opts = ErmRunOptions::from_epochs(5.0, 5.0, 64, 16.0, 1);
    let last_gap = |kind| {
        let solver = ErmSolver::prepare(kind, &p, &spec).unwrap();
        run_erm(&solver, &p, &spec, &opts, &mut seeded_rng(1))
            .unwrap()
            .last()
            .unwrap()
            .gap
    };
    let (sdna, sdca) = (last_gap(ErmSolverKind::Sdna), last_gap(ErmSolverKind::Sdca));
    assert!(sdna < 0.05 * sdca, "sdna {sdna:e} sdca {sdca:e}");
}

#[test]
fn smooth_methods_reach_the_minimizer() {
    let m = random_pd(8, 5);
    let c: Vec<f64> = (0..8).map(|i| (i as f64 - 3.5) / 4.0).collect();
    let obj = QuadraticObjective::new(m.clone(), c).unwrap();
    let spec = SamplingSpec::tau_nice(8, 3).unwrap();
    let v = spec.eso_vector(&m, EsoStrategy::CertifiedScaling).unwrap();
    for method in [
        SmoothMethod::Method1,
        SmoothMethod::Method2,
        SmoothMethod::Method3,
    ] {
        let stepper = SmoothStepper::new(method, &m, &spec, Some(&v)).unwrap();
        let opts = RunOptions::new(200_000, 1000).with_eps(1e-12);
        let trace =
            run_smooth(&stepper, &obj, &spec, &[0.0; 8], &opts, &mut seeded_rng(2)).unwrap();
        let last = trace.last().unwrap();
        assert!(last.residual <= 1e-12, "{method:?}: {}", last.residual);
        assert_eq!(trace[0].iteration, 0);
    }
}

#[test]
fn composite_solvers_agree_on_the_minimizer() {
    let m = random_pd(6, 8);
    let c: Vec<f64> = (0..6).map(|i| 0.3 * i as f64 - 1.0).collect();
    let f = QuadraticForm::new(m.clone(), c).unwrap();
    let psi = SeparableTerm::quadratic(&[0.5; 6], &[0.1, -0.2, 0.0, 0.3, 0.0, -0.1]).unwrap();
    let spec = SamplingSpec::tau_nice(6, 2).unwrap();
    let v = spec.eso_vector(&m, EsoStrategy::CertifiedScaling).unwrap();
    let opts = RunOptions::new(20_000, 500).with_eps(1e-12);
    for stepper in [
        CompositeStepper::Alg1 { m: m.clone() },
        CompositeStepper::Pcdm { v },
    ] {
        let trace = run_composite(
            &stepper,
            &f,
            &psi,
            &spec,
            &[1.0; 6],
            &opts,
            &mut seeded_rng(4),
        )
        .unwrap();
        assert!(
            trace.last().unwrap().residual <= 1e-12,
            "{:?}",
            stepper.algorithm()
        );
    }
}

#[test]
fn rate_report_json_round_trips() {
    let m = random_pd(5, 12);
    let spec = SamplingSpec::tau_nice(5, 2).unwrap();
    let report = RateReport::compute(RateInputs {
        context: "random".into(),
        m: &m,
        g: &m,
        gamma: vec![0.5; 5],
        v: None,
        spec: &spec,
        mode: PseudoinverseMode::ExactEnumeration,
        erm: Some(ErmInputs {
            gram: &m,
            lambda: 0.1,
            gamma_loss: 1.0,
        }),
    })
    .unwrap();
    assert!(report.checks.all_hold());
    let back: RateReport = serde_json::from_str(&report.to_json_pretty()).unwrap();
    assert_eq!(back, report);
}

/// Runs only when `SDNA_MUSHROOMS` points at the LIBSVM mushrooms file.
#[test]
fn mushrooms_dimensions() {
    let Ok(path) = std::env::var("SDNA_MUSHROOMS") else {
        eprintln!("SDNA_MUSHROOMS not set; skipping");
        return;
    };
    let data = load_libsvm(&path, None).unwrap();
    assert_eq!((data.n(), data.d()), (8124, 112));
}
