use emgm::harness::{breakpoint, extract_contour, linspace, strict_solver, ExperimentGrid, ScalingSpec, BREAKPOINT_DB};
use emgm::{
    nmse_db, preset, run_grid, run_nmse_sweep, run_ptc, run_scaling, MatrixKind, Preset, SignalKind, SolverConfig,
};

#[test]
fn nmse_of_a_constructed_perturbation() {
    let x = [1.0, -2.0, 2.0];
    let norm = 3.0;
    let est = [x[0] + 0.1 * norm, x[1], x[2]];
    assert!((nmse_db(&x, &est).unwrap() + 20.0).abs() < 1e-12);
    assert_eq!(nmse_db(&x, &x).unwrap(), -320.0);
    assert_eq!(nmse_db(&x, &[0.0; 3]).unwrap(), 0.0);
}

#[test]
fn empty_support_row_always_succeeds() {
    let grid = ExperimentGrid::ptc(200, &[0.3, 0.6], &[0.0, 0.1], 4, SignalKind::BernoulliGaussian);
    let table = run_grid(&grid, Some(2)).unwrap();
    for p in table.points.iter().filter(|p| p.k == 0) {
        assert_eq!(p.success_rate, 1.0);
    }
    assert_eq!(table.points.len(), 4);
}

#[test]
fn identical_grids_give_identical_tables() {
    let grid = ExperimentGrid {
        snr_db: Some(20.0),
        ..ExperimentGrid::ptc(150, &[0.4, 0.7], &[0.1, 0.3], 3, SignalKind::BernoulliRademacher)
    };
    let a = run_grid(&grid, Some(1)).unwrap();
    let b = run_grid(&grid, Some(3)).unwrap();
    assert_eq!(a.payload_csv(), b.payload_csv());
    for (p, q) in a.points.iter().zip(&b.points) {
        for (r, s) in p.runs.iter().zip(&q.runs) {
            assert_eq!(
                (r.seed, r.nmse_db.to_bits(), r.success),
                (s.seed, s.nmse_db.to_bits(), s.success)
            );
        }
    }
    let shifted = ExperimentGrid { base_seed: 1, ..grid };
    assert_ne!(run_grid(&shifted, Some(1)).unwrap().payload_csv(), a.payload_csv());
}

#[test]
fn success_rate_is_a_multiple_of_one_over_r() {
    let grid = ExperimentGrid::ptc(100, &[0.5], &[0.2, 0.5], 7, SignalKind::BernoulliGaussian);
    for p in run_grid(&grid, None).unwrap().points {
        let hits = p.success_rate * 7.0;
        assert!((hits - hits.round()).abs() < 1e-12 && (0.0..=1.0).contains(&p.success_rate));
    }
}

#[test]
fn square_noiseless_systems_are_solved_exactly() {
    let grid = ExperimentGrid {
        snr_db: None,
        solver: strict_solver(),
        ..ExperimentGrid::sweep(200, 20, &[1.0], 0.0, 5, SignalKind::BernoulliGaussian)
    };
    let table = run_grid(&grid, None).unwrap();
    assert!(
        table.points[0].median_nmse_db < -100.0,
        "{}",
        table.points[0].median_nmse_db
    );
}

#[test]
fn bernoulli_gaussian_noisy_recovery_at_half_sampling() {
    let grid = ExperimentGrid::sweep(1000, 100, &[0.5], 25.0, 50, SignalKind::BernoulliGaussian);
    let sweep = run_nmse_sweep(&grid, None).unwrap();
    assert!(
        sweep.table.points[0].median_nmse_db <= -20.0,
        "{}",
        sweep.table.points[0].median_nmse_db
    );
}

#[test]
fn bernoulli_rademacher_breakpoint() {
    let Preset::Sweep { grid } = preset("desk-br", false).unwrap() else {
        panic!("desk-br is a sweep")
    };
    let sweep = run_nmse_sweep(&grid, None).unwrap();
    let b = sweep.breakpoint.expect("some M/N reaches the threshold");
    assert!(b <= 0.40, "breakpoint {b}");
    assert_eq!(breakpoint(&sweep.table, BREAKPOINT_DB), Some(b));
}

#[test]
fn success_does_not_rise_with_sparsity() {
    // one column, R = 100; flag any step up in K/M that a one-sided
    // two-proportion test finds significant at 5%
    let rhos = linspace(0.1, 0.6, 6);
    let grid = ExperimentGrid {
        solver: strict_solver(),
        ..ExperimentGrid::ptc(100, &[0.5], &rhos, 100, SignalKind::BernoulliGaussian)
    };
    let table = run_grid(&grid, None).unwrap();
    let rates: Vec<f64> = table.points.iter().map(|p| p.success_rate).collect();
    for w in rates.windows(2) {
        let pooled = 0.5 * (w[0] + w[1]);
        let se = (2.0 * pooled * (1.0 - pooled) / 100.0).sqrt();
        if se > 0.0 {
            assert!((w[1] - w[0]) / se < 1.645, "success rates {rates:?}");
        } else {
            assert!(w[1] <= w[0]);
        }
    }
    assert!(rates[0] > rates[5]);
}

#[test]
fn contour_tracks_the_success_boundary() {
    let grid = ExperimentGrid {
        solver: strict_solver(),
        ..ExperimentGrid::ptc(100, &[0.5], &linspace(0.1, 0.9, 5), 10, SignalKind::BernoulliGaussian)
    };
    let res = run_ptc(&grid, None).unwrap();
    assert_eq!(res.contour.len(), 1);
    let c = res.contour[0];
    assert_eq!(extract_contour(&res.table, 0.5), res.contour);
    assert!(c.k_over_m > 0.1 && c.k_over_m < 0.9);
    assert!(res.contour_csv().starts_with("m_over_n,k_over_m\n"));
}

#[test]
fn single_size_scaling_returns_one_record() {
    let spec = ScalingSpec {
        ns: vec![256],
        m_over_n: 0.5,
        k_over_n: 0.1,
        realizations: 2,
        base_seed: 3,
        signal: SignalKind::BernoulliGaussian,
        matrix: MatrixKind::IidGaussian,
        snr_db: Some(25.0),
        solver: SolverConfig::sparse(),
    };
    let res = run_scaling(&spec).unwrap();
    assert_eq!(res.records.len(), 1);
    assert_eq!(res.slope, None);
    assert_eq!((res.records[0].m, res.records[0].k), (128, 26));
    assert_eq!(res.records[0].runtimes_s.len(), 2);
}

#[test]
fn invalid_grids_are_rejected() {
    let mut grid = ExperimentGrid::ptc(100, &[0.5], &[0.2], 1, SignalKind::Bernoulli);
    grid.points[0].k = 60;
    assert!(run_grid(&grid, None).unwrap_err().to_string().contains("K <= M"));
    grid.points[0].k = 10;
    grid.realizations = 0;
    assert!(run_grid(&grid, None).is_err());
}
