use super::*;
use crate::cases::{controller, joint_weight, plant, static_weight, PID_GAINS};
use crate::lti::{frequency_response, hinf_norm, is_hurwitz};
use crate::matrix::{eigenvalues, from_rows};

fn oantw_weights(c: f64) -> (StateSpaceModel, StateSpaceModel) {
    (static_weight(10.0 * c, 2), static_weight(0.01 * c, 1))
}

fn static_gmy(k1: f64, k2: f64) -> StateSpaceModel {
    StateSpaceModel::static_gain(from_rows(&[&[k1, k2]]))
}

fn quick_opts(starts: usize, evals: usize) -> SynthOptions {
    SynthOptions {
        starts,
        max_evaluations: evals,
        threads: Some(1),
        ..SynthOptions::default()
    }
}

fn isantw() -> GeneralizedPlant {
    build_isantw_plant(
        &plant(),
        &controller(PID_GAINS),
        &joint_weight(1),
        &joint_weight(2),
    )
    .unwrap()
}

fn assert_response_eq(a: &StateSpaceModel, b: &StateSpaceModel, tol: f64) {
    for w in [0.01, 0.3, 1.0, 4.0, 50.0, 700.0] {
        let ha = frequency_response(a, w).unwrap();
        let hb = frequency_response(b, w).unwrap();
        assert!((&ha - &hb).norm() <= tol * hb.norm().max(1.0), "at {w}");
    }
}

#[test]
fn oantw_plant_partition() {
    let (w1, w2) = oantw_weights(1.0);
    let p = build_oantw_plant(&plant(), &w1, &w2).unwrap();
    assert_eq!((p.n_exo, p.n_ctrl, p.n_perf, p.n_meas), (3, 1, 3, 2));
    assert!(build_oantw_plant(&plant(), &w2, &w1).is_err());
}

#[test]
fn mixed_sensitivity_matches_lft() {
    let g = plant();
    let (w1, w2) = oantw_weights(1.0);
    let p = build_oantw_plant(&g, &w1, &w2).unwrap();
    // the last gain once stalled the eigenvalue iteration on the
    // Hamiltonian of the non-minimal direct realization
    for (k1, k2) in [(0.5, 0.2), (1.3, 0.95), (3.0, -0.4), (3.6651451841103477, -0.8189204877920191)] {
        let gmy = static_gmy(k1, k2);
        let direct = mixed_sensitivity(&g, &gmy, &w1, &w2).unwrap();
        let lft = closed_loop(&p, &gmy).unwrap();
        assert_response_eq(&direct, &lft, 1e-9);
        let na = hinf_norm(&direct, 1e-10).unwrap().value().unwrap();
        let nb = hinf_norm(&lft, 1e-8).unwrap().value().unwrap();
        assert!((na - nb).abs() <= 1e-6 * nb, "{na} vs {nb}");
    }
}

#[test]
fn zero_compensator_error_channel_is_identity() {
    let (w1, w2) = oantw_weights(1.0);
    let p = build_oantw_plant(&plant(), &w1, &w2).unwrap();
    let ch = p.model.select(&[3, 4], &[0, 1]).unwrap();
    assert_response_eq(&ch, &StateSpaceModel::identity(2), 1e-14);
}

#[test]
fn zero_compensator_closed_loop_is_p11() {
    let p = isantw();
    let cl = closed_loop(&p, &StateSpaceModel::zero(p.n_ctrl, p.n_meas)).unwrap();
    assert_response_eq(&cl, &p.p11(), 1e-12);
}

#[test]
fn affine_lft_for_scalar_plant() {
    // P = [[p11, p12], [p21, 0]] static: F_l = p11 + p12 c p21
    let p = StateSpaceModel::static_gain(from_rows(&[&[0.7, 2.0], &[-3.0, 0.0]]));
    let gp = GeneralizedPlant::new(p, 1, 1, 1, 1).unwrap();
    let c = StateSpaceModel::static_gain(from_rows(&[&[0.25]]));
    let cl = closed_loop(&gp, &c).unwrap();
    assert_eq!(cl.d[(0, 0)], 0.7 + 2.0 * 0.25 * -3.0);
}

#[test]
fn isantw_channel_counts_and_weight_poles() {
    let p = isantw();
    // yhat(2), d(2), e(2), uhat(1) | u_my(1), u_mu(2)
    assert_eq!((p.n_exo, p.n_ctrl), (7, 3));
    // Wy(2), Wu(1) | yhat - y (2), uhat - u (1)
    assert_eq!((p.n_perf, p.n_meas), (3, 3));
    let eig = eigenvalues(&p.model.a).unwrap();
    let hits = eig
        .values
        .iter()
        .filter(|z| (z.re + 22.74).abs() < 1e-9 && z.im.abs() < 1e-9)
        .count();
    assert_eq!(hits, 3);
}

#[test]
fn input_error_from_e_is_minus_k() {
    let p = isantw();
    let k = controller(PID_GAINS);
    // uhat - u is the last measurement row; e occupies inputs 4..6
    let ch = p.model.select(&[p.n_perf + 2], &[4, 5]).unwrap();
    assert_response_eq(&ch, &k.scaled(-1.0), 1e-12);
}

#[test]
fn weight_scaling_scales_the_norm() {
    let g = plant();
    let gmy = static_gmy(1.0, 0.5);
    let base = {
        let (w1, w2) = oantw_weights(1.0);
        let p = build_oantw_plant(&g, &w1, &w2).unwrap();
        hinf_norm(&closed_loop(&p, &gmy).unwrap(), 1e-9).unwrap().value().unwrap()
    };
    let (w1, w2) = oantw_weights(3.5);
    let p = build_oantw_plant(&g, &w1, &w2).unwrap();
    let scaled = hinf_norm(&closed_loop(&p, &gmy).unwrap(), 1e-9).unwrap().value().unwrap();
    assert!((scaled - 3.5 * base).abs() <= 1e-6 * scaled);
}

#[test]
fn degenerate_static_problem_returns_zero_gain() {
    // z = [w; u], y = w: any nonzero gain only adds to the norm
    let p = StateSpaceModel::static_gain(from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]]));
    let gp = GeneralizedPlant::new(p, 1, 1, 2, 1).unwrap();
    let s = CompensatorStructure::static_gain(1, 1);
    let r = synth_fixed_structure(&gp, &s, &quick_opts(3, 400)).unwrap();
    assert!(r.params.iter().all(|v| v.abs() < 1e-5), "{:?}", r.params);
    assert!((r.achieved_norm - 1.0).abs() < 1e-9);
}

#[test]
fn oantw_order_two_improves_on_zero_compensator() {
    let (w1, w2) = oantw_weights(1.0);
    let p = build_oantw_plant(&plant(), &w1, &w2).unwrap();
    let s = CompensatorStructure::full(2, 1, vec![1, 1]);
    let r = synth_fixed_structure(&p, &s, &quick_opts(2, 300)).unwrap();
    assert!(r.stable);
    assert!(r.achieved_norm < r.zero_norm.unwrap());
    let cl = closed_loop(&p, &r.compensator).unwrap();
    assert!(is_hurwitz(&cl, 0.0));
    let n = hinf_norm(&cl, 1e-8).unwrap().value().unwrap();
    assert!((n - r.achieved_norm).abs() <= 1e-5 * n);
    assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(r.starts.len(), 2);
}

#[test]
fn full_matrix_is_no_worse_than_diagonal() {
    let p = isantw();
    let diag = CompensatorStructure::block_diagonal(&[(2, 1), (1, 2)], &[1, 1]);
    let opts = quick_opts(2, 150);
    let d = synth_fixed_structure(&p, &diag, &opts).unwrap();
    let f = synth_full_matrix(&p, &diag.orders, &opts, Some(&d)).unwrap();
    assert!(f.achieved_norm <= d.achieved_norm + 1e-6);
    // the nominal integrator leaves the zero-compensator loop marginal
    assert!(d.zero_norm.map_or(true, |z| d.achieved_norm < z));
}

#[test]
fn threaded_starts_match_sequential() {
    let (w1, w2) = oantw_weights(1.0);
    let p = build_oantw_plant(&plant(), &w1, &w2).unwrap();
    let s = CompensatorStructure::static_gain(2, 1);
    let a = synth_fixed_structure(&p, &s, &quick_opts(3, 100)).unwrap();
    let mut o = quick_opts(3, 100);
    o.threads = Some(2);
    let b = synth_fixed_structure(&p, &s, &o).unwrap();
    assert_eq!(a, b);
}

#[test]
fn incompatible_structure_rejected() {
    let p = isantw();
    let s = CompensatorStructure::static_gain(2, 2);
    assert!(matches!(
        synth_fixed_structure(&p, &s, &quick_opts(1, 10)),
        Err(SynthError::Structure(_))
    ));
}

#[test]
fn transfer_design_partition() {
    let (w1, w2) = oantw_weights(1.0);
    let p = build_oantw_plant(&plant(), &w1, &w2).unwrap();
    let s = CompensatorStructure::static_gain(2, 1);
    let r = synth_fixed_structure(&p, &s, &quick_opts(1, 50)).unwrap();
    let t = r.to_transfer_design(2, 1);
    assert_eq!((t.n_input_err, t.n_u_mu), (0, 0));
}
