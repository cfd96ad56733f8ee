use antiwindup::lti::{
    frequency_response, frequency_sweep_max, hinf_norm, log_grid, series, Network,
    RationalTransfer, Source, StateSpaceModel,
};
use antiwindup::matrix::{from_rows, CMatrix, Matrix, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random stable SISO transfer function from random pole locations.
fn random_stable_siso(seed: u64, order: usize) -> StateSpaceModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut den = vec![1.0];
    let mut k = 0;
    while k < order {
        if order - k >= 2 && rng.gen_bool(0.5) {
            let re = -rng.gen_range(0.05..3.0);
            let im = rng.gen_range(0.1..5.0);
            den = poly_mul(&den, &[1.0, -2.0 * re, re * re + im * im]);
            k += 2;
        } else {
            den = poly_mul(&den, &[1.0, rng.gen_range(0.1..5.0)]);
            k += 1;
        }
    }
    let num: Vec<f64> = (0..order).map(|_| rng.gen_range(-2.0..2.0)).collect();
    RationalTransfer::siso(&num, &den)
        .unwrap()
        .to_state_space()
        .unwrap()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn cinv(m: &CMatrix) -> CMatrix {
    m.clone().try_inverse().expect("invertible at probe frequency")
}

fn cmat(m: &Matrix) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}

fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-12)
}

#[test]
fn saturation_error_splits_into_sensitivity_terms() {
    for seed in 0..8u64 {
        let g = random_stable_siso(seed, 3);
        let k = 0.2 + seed as f64 * 0.3;
        // loop: y = G (u + u_my), u_my = k (y_hat - y)
        let mut net = Network::new();
        let gp = net.add("G", &g);
        let mp = net.add("G_my", &StateSpaceModel::static_gain(from_rows(&[&[k]])));
        let yhat = net.input("yhat");
        let u = net.input("u");
        net.feed(u, gp, 0, 1.0);
        net.link(mp, 0, gp, 0, 1.0);
        net.feed(yhat, mp, 0, 1.0);
        net.link(gp, 0, mp, 0, -1.0);
        let e = net.output("err");
        net.tap(e, Source::External(yhat), 1.0);
        net.tap(e, Source::Part(gp, 0), -1.0);
        let lp = net.build().unwrap();
        for w in log_grid(1e-2, 1e2, 5).into_iter().take(20) {
            let gj = frequency_response(&g, w).unwrap()[(0, 0)];
            let s = C64::new(1.0, 0.0) / (C64::new(1.0, 0.0) + gj * k);
            let expected = DMatrix::from_row_slice(1, 2, &[s, -s * gj]);
            let got = frequency_response(&lp, w).unwrap();
            assert!(rel_err(&got, &expected) <= 1e-8, "seed {seed} w {w}");
        }
    }
}

#[test]
fn joint_loop_matches_closed_form_errors() {
    // two measured states, one input; G_my is 1x2, G_mu is 2x1
    let g = StateSpaceModel::new(
        from_rows(&[&[-1.0, -1.0], &[1.0, 0.0]]),
        from_rows(&[&[1.0], &[0.0]]),
        Matrix::identity(2, 2),
        Matrix::zeros(2, 1),
    )
    .unwrap();
    let k = StateSpaceModel::new(
        from_rows(&[&[0.0]]),
        from_rows(&[&[0.0, 1.0]]),
        from_rows(&[&[2.0]]),
        from_rows(&[&[0.8, 3.0]]),
    )
    .unwrap();
    let gmy = from_rows(&[&[0.4, 1.1]]);
    let gmu = from_rows(&[&[0.3], &[-0.2]]);
    let mut net = Network::new();
    let gp = net.add("G", &g);
    let kp = net.add("K", &k);
    let myp = net.add("G_my", &StateSpaceModel::static_gain(gmy.clone()));
    let mup = net.add("G_mu", &StateSpaceModel::static_gain(gmu.clone()));
    let yhat = net.inputs("yhat", 2);
    let e = net.inputs("e", 2);
    let uhat = net.input("uhat");
    // u = K (e + u_mu) + u_my ; y = G u
    for i in 0..2 {
        net.feed(e[i], kp, i, 1.0);
        net.link(mup, i, kp, i, 1.0);
    }
    net.link(kp, 0, gp, 0, 1.0);
    net.link(myp, 0, gp, 0, 1.0);
    // G_my sees y_hat - y, G_mu sees u_hat - u with u = K out + G_my out
    for i in 0..2 {
        net.feed(yhat[i], myp, i, 1.0);
        net.link(gp, i, myp, i, -1.0);
    }
    net.feed(uhat, mup, 0, 1.0);
    net.link(kp, 0, mup, 0, -1.0);
    net.link(myp, 0, mup, 0, -1.0);
    let ey = net.outputs("ey", 2);
    for i in 0..2 {
        net.tap(ey[i], Source::External(yhat[i]), 1.0);
        net.tap(ey[i], Source::Part(gp, i), -1.0);
    }
    let eu = net.output("eu");
    net.tap(eu, Source::External(uhat), 1.0);
    net.tap(eu, Source::Part(kp, 0), -1.0);
    net.tap(eu, Source::Part(myp, 0), -1.0);
    let lp = net.build().unwrap();

    let (gmy_c, gmu_c) = (cmat(&gmy), cmat(&gmu));
    let i2 = CMatrix::identity(2, 2);
    let i1 = CMatrix::identity(1, 1);
    for w in [0.05, 0.3, 0.9, 2.0, 7.5, 30.0] {
        let gj = frequency_response(&g, w).unwrap();
        let kj = frequency_response(&k, w).unwrap();
        let sy = cinv(&(&i2 + &gj * &gmy_c));
        let su = cinv(&(&i1 + &kj * &gmu_c));
        let gk = &gj * &kj;
        let my = cinv(&(&i2 - &sy * &gk * &gmu_c * &su * &gmy_c));
        let mu = cinv(&(&i1 - &su * &gmy_c * &sy * &gk * &gmu_c));
        let y_yhat = &my * &sy;
        let y_e = -(&my * &sy * &gk * (&i2 - &gmu_c * &su * &kj));
        let y_uhat = -(&my * &sy * &gk * &gmu_c * &su);
        let u_uhat = &mu * &su;
        let u_e = -(&mu * &su * (&kj - &gmy_c * &sy * &gk));
        let u_yhat = -(&mu * &su * &gmy_c * &sy);
        let got = frequency_response(&lp, w).unwrap();
        let pairs = [
            (got.view((0, 0), (2, 2)).into_owned(), y_yhat),
            (got.view((0, 2), (2, 2)).into_owned(), y_e),
            (got.view((0, 4), (2, 1)).into_owned(), y_uhat),
            (got.view((2, 0), (1, 2)).into_owned(), u_yhat),
            (got.view((2, 2), (1, 2)).into_owned(), u_e),
            (got.view((2, 4), (1, 1)).into_owned(), u_uhat),
        ];
        for (idx, (a, b)) in pairs.iter().enumerate() {
            assert!(rel_err(a, b) <= 1e-6, "block {idx} at {w}");
        }
    }
}

#[test]
fn norm_agrees_with_dense_sweep() {
    // DC is included since low-pass peaks sit at zero frequency
    let mut grid = vec![0.0];
    grid.extend(log_grid(1e-3, 1e4, 2000));
    let tol = 1e-6;
    for seed in 0..6u64 {
        let g = random_stable_siso(100 + seed, 4);
        let v = hinf_norm(&g, tol).unwrap().value().unwrap();
        let sweep = frequency_sweep_max(&g, &grid).unwrap().0;
        assert!(v >= sweep - tol * sweep, "seed {seed}: {v} < {sweep}");
        assert!(v <= sweep * (1.0 + 10.0 * tol), "seed {seed}: {v} > {sweep}");
    }
}

#[test]
fn realization_probe_grid() {
    let w1 = RationalTransfer::siso(&[1.0, 155.5], &[1.0, 15.24]).unwrap();
    let s = w1.to_state_space().unwrap();
    for w in log_grid(1e-2, 1e4, 4) {
        let a = frequency_response(&s, w).unwrap()[(0, 0)];
        let b = w1.eval(C64::new(0.0, w))[0][0];
        assert!((a - b).norm() <= 1e-8 * b.norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn norm_is_submultiplicative(s1 in 0u64..10_000, s2 in 0u64..10_000, o1 in 1usize..4, o2 in 1usize..4) {
        let tol = 1e-6;
        let g1 = random_stable_siso(s1, o1);
        let g2 = random_stable_siso(s2 + 1_000_000, o2);
        let n1 = hinf_norm(&g1, tol).unwrap().value().unwrap();
        let n2 = hinf_norm(&g2, tol).unwrap().value().unwrap();
        let n12 = hinf_norm(&series(&g1, &g2).unwrap(), tol).unwrap().value().unwrap();
        prop_assert!(n12 <= n1 * n2 * (1.0 + tol) + 1e-12);
    }

    #[test]
    fn norm_above_any_sampled_gain(seed in 0u64..10_000, order in 1usize..6) {
        let g = random_stable_siso(seed, order);
        let v = hinf_norm(&g, 1e-6).unwrap().value().unwrap();
        for w in log_grid(1e-2, 1e2, 8) {
            let gain = frequency_response(&g, w).unwrap()[(0, 0)].norm();
            prop_assert!(gain <= v * (1.0 + 1e-6));
        }
    }
}

