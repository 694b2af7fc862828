use std::f64::consts::PI;

use multisym::bundle::{FnSection, SectionPatch};
use multisym::lagrangian::{LagrangianDensity, Potential};
use multisym::multihamiltonian::{ddw_residual, euler_lagrange_residual};
use multisym::patterns::*;
use multisym::Error;

mod common;
use common::{brute_force, oracle_slope};

fn duffing(gamma: f64) -> LagrangianDensity {
    LagrangianDensity::nonlinear_wave(0, 1, Potential::Duffing { lambda: -1.0, gamma })
}

#[test]
fn duffing_index_matches_oracle() {
    for gamma in [0.5, -0.3] {
        let a = 0.8;
        let report = hessian_index(&duffing(gamma), &[1.0], a, &IndexOptions::default()).unwrap();
        let slope = oracle_slope(-1.0, gamma, a);
        let expected = usize::from(slope < 0.0);
        assert_eq!(report.index, expected, "gamma {gamma}");
        assert!(!report.degenerate);
        let h = report.hessian[(0, 0)];
        assert!((h - slope).abs() < 1e-4 * slope.abs(), "{h} vs {slope}");
        let (t, i) = brute_force(-1.0, gamma, a);
        assert!((report.k[0] - 2.0 * PI / t).abs() < 1e-8);
        assert!((report.levels[0] - i).abs() < 1e-7);
    }
}

#[test]
fn duffing_frequency_is_monotone_in_amplitude() {
    for gamma in [0.5, -0.3] {
        let red = reduce_diagonal(&duffing(gamma), &[1.0]).unwrap();
        let omegas: Vec<f64> = [0.2, 0.4, 0.6, 0.8, 1.0]
            .iter()
            .map(|a| find_periodic_orbit(&red, *a, 0).unwrap().k()[0])
            .collect();
        let increasing = omegas.windows(2).all(|w| w[1] > w[0]);
        let decreasing = omegas.windows(2).all(|w| w[1] < w[0]);
        assert!(increasing || decreasing, "{omegas:?}");
        assert_eq!(decreasing, gamma > 0.0);
    }
}

#[test]
fn wave_hessian_is_symmetric_and_stable() {
    let cases = [
        LagrangianDensity::nonlinear_wave(1, 1, Potential::SineGordon),
        LagrangianDensity::nonlinear_wave(1, 1, Potential::Duffing { lambda: -1.0, gamma: 0.4 }),
    ];
    for l in cases {
        let opts = IndexOptions::default();
        let r = hessian_index(&l, &[1.2, 0.5], 0.7, &opts).unwrap();
        assert!(r.asymmetry <= 1e-4, "{} asymmetry {}", l.name(), r.asymmetry);
        assert!(r.index <= 2);
        let halved = IndexOptions {
            deltas: vec![0.35e-3, 0.25e-3],
            ..opts
        };
        let r2 = hessian_index(&l, &[1.2, 0.5], 0.7, &halved).unwrap();
        assert_eq!(r.index, r2.index);
        assert!((&r.hessian - &r2.hessian).amax() < 1e-5 * r.hessian.amax());
    }
}

#[test]
fn linear_wave_is_degenerate() {
    let l = LagrangianDensity::nonlinear_wave(1, 1, Potential::KleinGordon { mass: 1.0 });
    let r = hessian_index(&l, &[1.5, 0.6], 1.0, &IndexOptions::default()).unwrap();
    assert!(r.degenerate);
}

#[test]
fn reduced_residual_matches_full_residual() {
    for l in [
        LagrangianDensity::nonlinear_wave(1, 1, Potential::SineGordon),
        LagrangianDensity::elliptic_pattern(2, 1, Potential::Duffing { lambda: 1.0, gamma: -0.5 }),
    ] {
        let nb = l.spec().base_dim();
        let k: Vec<f64> = (0..nb).map(|m| 1.1 - 0.3 * m as f64).collect();
        let red = reduce_diagonal(&l, &k).unwrap();
        let kk = k.clone();
        let phase = move |x: &[f64]| kk.iter().zip(x).map(|(k, x)| k * x).sum::<f64>();
        let f = |c: f64| c.sin() + 0.3 * (2.0 * c).cos();
        let d2f = |c: f64| -c.sin() - 1.2 * (2.0 * c).cos();
        let ph = phase.clone();
        let patch = SectionPatch::new(FnSection::new(nb, 1, move |x| vec![f(ph(x))]));
        for j in 0..5 {
            let x: Vec<f64> = (0..nb).map(|m| 0.3 * j as f64 + 0.1 * m as f64).collect();
            let e = euler_lagrange_residual(&l, &patch, &x).unwrap()[0];
            let c = phase(&x);
            let r = red.reduced_residual(f(c), d2f(c));
            assert!((e - r).abs() < 1e-5 * (1.0 + r.abs()), "{e} vs {r}");
        }
    }
}

#[test]
fn reconstructed_sections_solve_the_field_equations() {
    let cases = [
        (LagrangianDensity::nonlinear_wave(1, 1, Potential::SineGordon), vec![1.3, 0.4]),
        (
            LagrangianDensity::elliptic_pattern(1, 1, Potential::Duffing { lambda: 1.0, gamma: 0.3 }),
            vec![0.9, 0.5],
        ),
    ];
    for (l, k) in cases {
        let red = reduce_diagonal(&l, &k).unwrap();
        let orbit = find_periodic_orbit(&red, 0.9, 0).unwrap();
        let patch = orbit.section();
        for j in 0..20 {
            let x = vec![0.37 * j as f64, -0.21 * j as f64 + 0.05];
            let r = ddw_residual(&l, &patch, &x).unwrap();
            assert!(r.norm_y <= 1e-8 && r.norm_p <= 1e-8, "{} {:?}", l.name(), r);
        }
    }
}

#[test]
fn level_gauge_invariance_and_quadrature_convergence() {
    let l = LagrangianDensity::nonlinear_wave(1, 1, Potential::SineGordon);
    let red = reduce_diagonal(&l, &[1.4, 0.3]).unwrap();
    let orbit = find_periodic_orbit(&red, 1.2, 0).unwrap();
    let a = constraint_levels(&orbit, Primitive::MomentumDphi);
    let b = constraint_levels(&orbit, Primitive::PhiDmomentum);
    for (a, b) in a.iter().zip(&b) {
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }
    // trapezoid with every 2^m-th sample
    let h = |stride: usize| 2.0 * PI / (orbit.chi.len() / stride) as f64;
    let q = |stride: usize| orbit.df.iter().step_by(stride).map(|u| u * u).sum::<f64>() * h(stride);
    let exact = q(1);
    let errs: Vec<f64> = [1024usize, 512, 256, 128].iter().map(|s| (q(*s) - exact).abs()).collect();
    assert!(errs[1] < errs[0] * 1e-2 && errs[3] < 1e-12, "{errs:?}");
}

#[test]
fn unsupported_inputs() {
    let l = LagrangianDensity::nonlinear_wave(1, 1, Potential::SineGordon);
    assert!(matches!(reduce_diagonal(&l, &[1.0]), Err(Error::ShapeMismatch { .. })));
    let red = reduce_diagonal(&l, &[0.3, 1.0]).unwrap();
    assert!(matches!(
        find_periodic_orbit(&red, 0.5, 0),
        Err(Error::HyperbolicEquilibrium { .. })
    ));
    let l = LagrangianDensity::nonlinear_wave(1, 1, Potential::Zero);
    assert!(reduce_diagonal(&l, &[1.0, 0.0]).and_then(|r| find_periodic_orbit(&r, 1.0, 0)).is_err());
}
