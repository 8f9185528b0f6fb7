use std::fs;
use std::path::PathBuf;

use randabc::bench::{fit_rates, records_csv, run_convergence, RECORDS_HEADER};
use randabc::config::ExperimentConfig;
use randabc::correctors::{compute_correctors, CorrectorOptions, HomogenizedModel};
use randabc::field::{build_spectrum, coefficient_field, sample_field, torus_extents, CoefficientMap, CovarianceSpec};
use randabc::lattice::{restrict_edge_field, restrict_field, ChargeSpec, EdgeField, LatticeBox};
use randabc::multipole::{u_hom_eval, GreenEvaluator, Variant};
use randabc::optimality::{conditional_variance, lattice_green, optimality_charge, CorrelationModel};

#[test]
fn homogenized_solution_matches_discrete_green_convolution() {
    let green = lattice_green(3, 24).unwrap();
    let model = HomogenizedModel::isotropic(3, 1.0).unwrap();
    let eval = GreenEvaluator::new(&model);
    let charge = ChargeSpec::unit_dipole().edge_charge(3).unwrap();
    for x in [[20, 0, 0], [12, 16, 0], [0, 0, 20], [-12, 0, 16]] {
        let continuum = u_hom_eval(&charge, &eval, &[x[0] as f64, x[1] as f64, x[2] as f64], 0).unwrap()[0];
        let discrete = green.at(&x) - green.at(&[x[0] - 1, x[1], x[2]]);
        if continuum.abs() < 1e-12 {
            assert!(discrete.abs() < 1e-6, "{x:?}: {discrete}");
        } else {
            let rel = (continuum - discrete).abs() / continuum.abs();
            assert!(rel < 0.02, "{x:?}: continuum {continuum}, lattice {discrete}");
        }
    }
}

#[test]
fn layered_medium_has_harmonic_and_arithmetic_means() {
    // layers normal to axis 0 alternating between 1 and 4
    let bx = LatticeBox::cube(2, 64).unwrap();
    let a = EdgeField::from_fn(bx, |p, _| if p[0].rem_euclid(2) == 0 { 1.0 } else { 4.0 });
    let set = compute_correctors(&a, 32, &CorrectorOptions::default()).unwrap();
    let m = set.homogenized.raw();
    assert!((m[(0, 0)] - 1.6).abs() < 0.1, "{m}");
    assert!((m[(1, 1)] - 2.5).abs() < 0.1, "{m}");
    assert!(m[(0, 1)].abs() < 1e-8 && m[(1, 0)].abs() < 1e-8, "{m}");
}

#[test]
fn nested_realizations_share_coefficients_bitwise() {
    let cov = CovarianceSpec::Gaussian { theta: 8.0 };
    let big = LatticeBox::cube(3, 16).unwrap();
    let small = LatticeBox::cube(3, 4).unwrap();
    let spectrum = build_spectrum(&cov, &torus_extents(&cov, &big), Some(1e-3)).unwrap();
    let g = sample_field(&spectrum, &big, 5).unwrap().g;
    let a = coefficient_field(&g, &CoefficientMap::Logistic);
    let from_restricted = coefficient_field(&restrict_field(&g, &small).unwrap(), &CoefficientMap::Logistic);
    let restricted = restrict_edge_field(&a, &small).unwrap();
    for k in 0..3 {
        assert_eq!(restricted.dir(k), from_restricted.dir(k));
    }
}

#[test]
fn three_dimensional_smoke_run() {
    let cfg = ExperimentConfig::parse("dim = 3\nL = 2, 4, 6\nseeds = 4\n").unwrap();
    let records = run_convergence(&cfg, None).unwrap();
    assert_eq!(records.len(), 4 * 3 * 4);
    assert!(records.iter().all(|r| r.err.is_finite() && r.err >= 0.0));
    let (fits, _) = fit_rates(&records);
    assert_eq!(fits.len(), 4);
}

#[test]
fn constant_coefficient_boundary_beats_zero_boundary() {
    let cfg =
        ExperimentConfig::parse("dim = 2\nL = 4, 8, 16\ncoefficient = constant\nvalue = 2.5\nseeds = 1\n").unwrap();
    let records = run_convergence(&cfg, None).unwrap();
    for l in [4, 8, 16] {
        let err = |v: Variant| {
            records
                .iter()
                .find(|r| r.half_width == l && r.variant == v)
                .unwrap()
                .err
        };
        assert!(err(Variant::Zero) > 0.0);
        for v in [Variant::NoPole, Variant::Dipole, Variant::Full] {
            assert!(err(v) < 0.05 * err(Variant::Zero), "L = {l}, {}", v.name());
        }
    }
}

#[test]
fn golden_two_dimensional_records() {
    let cfg = ExperimentConfig::parse("dim = 2\nL = 4, 6, 8\nseeds = 2\ntheta = 4\n").unwrap();
    let csv = records_csv(&run_convergence(&cfg, None).unwrap());
    assert_eq!(csv.lines().next(), Some(RECORDS_HEADER));
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/records_d2.csv");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, &csv).unwrap();
    }
    let golden = fs::read_to_string(&path).expect("golden file; regenerate with UPDATE_GOLDEN=1");
    assert_eq!(csv, golden);
}

#[test]
fn repeated_runs_are_identical() {
    let cfg = ExperimentConfig::parse("dim = 2\nL = 4, 6, 8\nseeds = 1\nrecipes = zero, dipole\n").unwrap();
    let first = records_csv(&run_convergence(&cfg, None).unwrap());
    let second = records_csv(&run_convergence(&cfg, None).unwrap());
    assert_eq!(first, second);
}

#[test]
fn partial_records_survive_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("partial.csv");
    let cfg = ExperimentConfig::parse("dim = 2\nL = 4, 6, 8\nseeds = 2\nrecipes = zero\n").unwrap();
    let records = run_convergence(&cfg, Some(&path)).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + records.len());
}

#[test]
fn conditional_variance_decreases_with_box_size() {
    for (dim, grid, rt) in [(2, vec![2, 3, 4, 6], 24), (3, vec![1, 2, 3], 12)] {
        let green = lattice_green(dim, rt + 3).unwrap();
        let charge = optimality_charge(dim, 1).unwrap();
        for beta in [4.0, 20.0] {
            let model = CorrelationModel::new(dim, beta).unwrap();
            let mut prev = f64::INFINITY;
            for &l in &grid {
                let v = conditional_variance(model, &charge, l, rt, &green).unwrap();
                assert!(v.estimate >= -1e-10);
                assert!(v.estimate <= prev, "d = {dim}, β = {beta}, L = {l}");
                prev = v.estimate;
            }
        }
    }
}
