use std::fs;
use std::path::Path;

use isskit::examples::{
    closed_form, run_counterexample, run_coupled_linear, run_coupled_nonlinear, run_neumann_hurwitz,
    run_semilinear_energy, CounterexampleParams, CoupledLinearParams, CoupledNonlinearParams, ExampleConfig,
    NeumannParams, SemilinearParams,
};
use proptest::prelude::*;

fn small() -> ExampleConfig {
    ExampleConfig { n_interior: 40, samples: 100, trajectories: 4, t_end: Some(1.0), ..Default::default() }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn every_example_is_reproducible() {
    let cfg = small();
    let runs: Vec<Box<dyn Fn() -> isskit::examples::ExampleReport>> = vec![
        Box::new(|| run_counterexample(&CounterexampleParams::default()).unwrap()),
        Box::new(|| run_neumann_hurwitz(&NeumannParams::new(vec![vec![-1.0, 0.5], vec![0.0, -2.0]], 1.0), &cfg).unwrap()),
        Box::new(|| run_semilinear_energy(&SemilinearParams::default(), &cfg).unwrap()),
        Box::new(|| run_coupled_linear(&CoupledLinearParams::default(), &cfg).unwrap()),
        Box::new(|| run_coupled_nonlinear(&CoupledNonlinearParams::default(), &cfg).unwrap()),
    ];
    for run in runs {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let da = run().write(a.path()).unwrap().parent().unwrap().to_path_buf();
        let db = run().write(b.path()).unwrap().parent().unwrap().to_path_buf();
        assert_eq!(files(&da), files(&db), "{}", da.display());
        assert!(da.join("report.json").exists());
    }
}

#[test]
fn coupled_linear_small_gain_implies_negative_spectrum() {
    let cfg = ExampleConfig { n_interior: 30, samples: 50, trajectories: 2, t_end: Some(0.5), ..Default::default() };
    for (a12, a21) in [(0.0, 2.0), (0.5, 0.5), (0.9, 0.9), (0.3, 2.5), (1.1, 1.1), (-0.9, 0.9)] {
        let p = CoupledLinearParams { a12, a21, ..Default::default() };
        let r = run_coupled_linear(&p, &cfg).unwrap();
        let sg = r.certificate("small_gain").unwrap().verdict;
        let abscissa = r.details["spectral_abscissa"].as_f64().unwrap();
        if sg {
            assert!(abscissa < 0.0, "a12 = {a12}, a21 = {a21}: abscissa {abscissa}");
        }
        if a12 == 0.0 {
            assert!(sg && abscissa < 0.0);
        }
    }
}

#[test]
fn coupled_linear_unstable_side_grows() {
    let cfg = ExampleConfig { n_interior: 60, samples: 50, trajectories: 2, ..Default::default() };
    let r = run_coupled_linear(&CoupledLinearParams { a12: 1.1, a21: 1.1, ..Default::default() }, &cfg).unwrap();
    assert!(!r.verdict);
    assert!(r.headline.starts_with("no small-gain conclusion"));
    let top = r.details["spectral_abscissa"].as_f64().unwrap();
    assert!((top - 0.1).abs() < 1e-3, "{top}");
}

#[test]
fn weak_nonlinear_coupling_reports_no_conclusion() {
    let r = run_coupled_nonlinear(&CoupledNonlinearParams { b: 0.5, ..Default::default() }, &small()).unwrap();
    assert!(r.headline.starts_with("no small-gain conclusion"));
    assert!(r.certificate("subsystem_2_zero_branch").unwrap().verdict);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counterexample_sup_nondecreasing(a in 0.05f64..5.0) {
        let p = CounterexampleParams { a, t_grid: vec![0.0, 1.0, 5.0, 20.0, 60.0], s_truncation: 120.0, ..Default::default() };
        let r = run_counterexample(&p).unwrap();
        prop_assert!(r.certificate("forced_sup_nondecreasing").unwrap().verdict);
        if a >= p.bump {
            let full: Vec<f64> = serde_json::from_value(r.details["sup_forced"].clone()).unwrap();
            prop_assert!(full.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn closed_form_solves_the_ode(a in 0.0f64..3.0, x0 in -2.0f64..2.0, s in -50.0f64..50.0, t in 0.0f64..20.0) {
        let k = 1.0 + s.abs();
        let h = 1e-5;
        let dx = (closed_form(a, x0, s, t + h) - closed_form(a, x0, s, t - h.min(t))) / (h + h.min(t));
        let rhs = -closed_form(a, x0, s, t) / k + a / k.sqrt();
        prop_assert!((dx - rhs).abs() < 1e-4 * (1.0 + rhs.abs()));
    }
}
