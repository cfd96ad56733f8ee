use super::*;
use crate::matrix::to_rows;

fn state(v: [f64; 6]) -> VscState {
    VscState::from_slice(&v)
}

fn deriv_vec(x: &VscState, m: [f64; 2], v: [f64; 2], p: &VscParams) -> Vec<f64> {
    vsc_dynamics(x, m, v, p).to_array().to_vec()
}

#[test]
fn origin_is_an_equilibrium_of_the_unforced_model() {
    let p = VscParams::default();
    let d = deriv_vec(&VscState::default(), [0.0, 0.0], [0.0, 0.0], &p);
    assert!(d.iter().all(|&v| v == 0.0));
}

#[test]
fn q_current_couples_into_d_axis() {
    let p = VscParams::default();
    let x = state([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let d = vsc_dynamics(&x, [0.0, 0.0], [0.0, 0.0], &p);
    assert_eq!(d.i_d1, p.omega0);
    assert_eq!(d.i_q1, -p.r1 / p.l1);
}

#[test]
fn jacobian_matches_coefficient_matrix() {
    let p = VscParams::default();
    let (a, bm, bv) = vsc_matrices(&p);
    for j in 0..6 {
        let mut e = [0.0; 6];
        e[j] = 1.0;
        let d = deriv_vec(&state(e), [0.0, 0.0], [0.0, 0.0], &p);
        for i in 0..6 {
            assert_eq!(d[i], a[(i, j)], "A[{i},{j}]");
        }
    }
    for j in 0..2 {
        let mut m = [0.0; 2];
        m[j] = 1.0;
        let d = deriv_vec(&VscState::default(), m, [0.0, 0.0], &p);
        let dv = deriv_vec(&VscState::default(), [0.0, 0.0], m, &p);
        for i in 0..6 {
            assert_eq!(d[i], bm[(i, j)]);
            assert_eq!(dv[i], bv[(i, j)]);
        }
    }
}

#[test]
fn rotation_terms_are_skew_symmetric() {
    let p = VscParams::default();
    let still = VscParams { omega0: 1e-300, ..p };
    let w = vsc_matrices(&p).0 - vsc_matrices(&still).0;
    assert!((&w + w.transpose()).amax() < 1e-9);
    assert!(w.amax() > 300.0);
}

#[test]
fn operating_point_is_stationary() {
    let p = VscParams::default();
    for (pr, qr) in [(0.0, 0.0), (20e3, 0.0), (15e3, -5e3)] {
        let (x, m) = operating_point(&p, pr, qr).unwrap();
        let d = deriv_vec(&x, m, p.grid_voltage(), &p);
        let scale = x.to_array().iter().fold(1.0f64, |s, v| s.max(v.abs()));
        assert!(d.iter().all(|v| v.abs() < 1e-10 * scale / p.l1.min(p.cf)), "{d:?}");
        let (pp, qq) = powers(p.grid_voltage(), [x.i_gd, x.i_gq]);
        assert!((pp - pr).abs() < 1e-8 * pr.abs().max(1.0));
        assert!((qq - qr).abs() < 1e-8 * qr.abs().max(1.0));
    }
}

#[test]
fn power_formula() {
    assert_eq!(powers([1.0, 0.0], [2.0, 0.0]), (3.0, 0.0));
    assert_eq!(powers([0.0, 1.0], [2.0, 0.0]), (0.0, 3.0));
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn apparent_power_identity(vd in -5.0..5.0f64, vq in -5.0..5.0f64, id in -5.0..5.0f64, iq in -5.0..5.0f64) {
            let (p, q) = powers([vd, vq], [id, iq]);
            let lhs = p * p + q * q;
            let rhs = 2.25 * (vd * vd + vq * vq) * (id * id + iq * iq);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
        }
    }
}

#[test]
fn lossless_filter_conserves_stored_energy() {
    let p = VscParams {
        r1: 0.0,
        r2: 0.0,
        ..VscParams::default()
    };
    let energy = |x: &VscState| {
        0.5 * (p.l1 * (x.i_d1.powi(2) + x.i_q1.powi(2))
            + p.l2 * (x.i_gd.powi(2) + x.i_gq.powi(2))
            + p.cf * (x.v_cfd.powi(2) + x.v_cfq.powi(2)))
    };
    let mut x = state([3.0, -1.0, 2.0, 0.5, 100.0, -40.0]);
    let e0 = energy(&x);
    let h = 1e-6;
    let f = |x: &VscState| vsc_dynamics(x, [0.0, 0.0], [0.0, 0.0], &p).to_array();
    let add = |x: &VscState, k: &[f64; 6], s: f64| {
        let a = x.to_array();
        VscState::from_slice(&std::array::from_fn::<f64, 6, _>(|i| a[i] + s * k[i]))
    };
    for _ in 0..20_000 {
        let k1 = f(&x);
        let k2 = f(&add(&x, &k1, h / 2.0));
        let k3 = f(&add(&x, &k2, h / 2.0));
        let k4 = f(&add(&x, &k3, h));
        let k: [f64; 6] = std::array::from_fn(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0);
        x = add(&x, &k, h);
    }
    assert!((energy(&x) - e0).abs() < 1e-8 * e0, "{} vs {e0}", energy(&x));
}

#[test]
fn sag_factor_and_window() {
    let p = VscParams::default();
    let f = FaultScenario::new(0.1, 0.12, 0.16).unwrap();
    let k = f.sag_factor(p.omega0);
    let expected = 0.1 / ((0.15f64).powi(2) + (p.omega0 * 1e-3).powi(2)).sqrt();
    assert!((k.norm() - expected).abs() < 1e-12);
    assert_eq!(f.voltage(0.1, &p), p.grid_voltage());
    assert_ne!(f.voltage(0.13, &p), p.grid_voltage());
    assert_eq!(f.voltage(0.16, &p), p.grid_voltage());
    let weaker = FaultScenario::new(0.2, 0.12, 0.16).unwrap();
    assert!(weaker.sag_factor(p.omega0).norm() > k.norm());
    assert!(FaultScenario::new(0.0, 0.12, 0.16).is_err());
    assert!(FaultScenario::new(0.1, 0.16, 0.12).is_err());
}

#[test]
fn invalid_parameters_rejected() {
    let p = VscParams {
        l1: 0.0,
        ..VscParams::default()
    };
    assert!(p.validate().is_err());
    assert!(nominal_controller(&p, &PowerControllerGains::default()).is_err());
}

#[test]
fn destabilizing_gains_rejected() {
    let study = VscStudy {
        gains: PowerControllerGains {
            ki: -150.0,
            ..PowerControllerGains::default()
        },
        ..VscStudy::default()
    };
    assert!(matches!(
        build_vsc_loop(&study, None, None),
        Err(VscError::UnstableNominal { .. })
    ));
}

#[test]
fn nominal_loop_tracks_power_step() {
    let study = VscStudy {
        horizon: 0.12,
        ..VscStudy::default()
    };
    let tr = simulate(&build_vsc_loop(&study, None, None).unwrap()).unwrap();
    let at = |t: f64| (t / study.step).round() as usize;
    assert!(tr.y_meas[at(0.079)][0].abs() < 1.0);
    let k = at(0.12);
    assert!((tr.y_meas[k][0] - study.p_nominal).abs() < 0.02 * study.p_nominal);
    assert!(tr.y_meas[k][1].abs() < 0.02 * study.p_nominal);
    // the nominal run stays below the current limit
    let lim = study.current_limit().unwrap();
    assert!(tr.x.iter().all(|x| x[2].abs() <= lim && x[3].abs() <= lim));
}

#[test]
fn fault_studies() {
    let study = VscStudy {
        horizon: 0.2,
        ..VscStudy::default()
    };
    let clean = simulate(&build_vsc_loop(&study, None, None).unwrap()).unwrap();
    // zero-length window leaves the run unchanged
    let empty = FaultScenario::new(0.1, 0.12, 0.12).unwrap();
    let (tr0, _) = run_fault_study(&empty, &study, None).unwrap();
    assert_eq!(tr0.x, clean.x);

    let f = FaultScenario::new(0.1, 0.12, 0.16).unwrap();
    let (tr, m) = run_fault_study(&f, &study, None).unwrap();
    let k0 = (0.12 / study.step).round() as usize;
    // the last stage of the step ending at 0.12 s already sees the sag
    let first = (0..tr.len()).find(|&k| tr.x[k] != clean.x[k]).unwrap();
    assert!(first.abs_diff(k0) <= 1, "{first} vs {k0}");
    assert!(m.peak_fault_current > m.current_limit);

    let weaker = FaultScenario::new(0.2, 0.12, 0.16).unwrap();
    let (_, mw) = run_fault_study(&weaker, &study, None).unwrap();
    assert!(mw.peak_fault_current < m.peak_fault_current);
    assert!(m.peak_applied_modulation <= study.modulation_bound);
}

#[test]
fn controller_shape_and_stability() {
    let p = VscParams::default();
    let k = nominal_controller(&p, &PowerControllerGains::default()).unwrap();
    assert_eq!(k.ninputs(), 4);
    assert_eq!(k.noutputs(), 2);
    assert!(nominal_abscissa(&p, &k).unwrap() < -50.0);
    let rows = to_rows(&k.a);
    assert!(rows.iter().flatten().all(|&v| v == 0.0));
}
