use std::f64::consts::PI;

use proptest::prelude::*;

use greensign::cone::{check_h2, SampleLattice};
use greensign::expr::Expression;
use greensign::gamma::{
    gamma_dirichlet_closed, gamma_periodic_closed, gamma_quadrature, GammaOptions, Weight,
};
use greensign::greens::GreensKernel;
use greensign::problem::{BoundaryKind, Potential};
use greensign::solver::{solve_linear, SolveOptions};
use greensign::spectral::{principal_eigenfunction, smallest_eigenvalue};

fn periodic(rho: f64) -> GreensKernel {
    GreensKernel::closed_form(
        &Potential::constant(rho, 1.0).unwrap(),
        BoundaryKind::Periodic,
    )
    .unwrap()
}

/// `rho` in `(0.1, 12)` at least 0.05 away from the resonances `2 k pi`.
fn nonresonant_periodic_rho() -> impl Strategy<Value = f64> {
    (0.1..12.0f64).prop_filter("near resonance", |r| {
        (r / (2.0 * PI) - (r / (2.0 * PI)).round()).abs() * 2.0 * PI > 0.05
    })
}

fn dirichlet_rho() -> impl Strategy<Value = f64> {
    (PI + 0.05..6.0 * PI - 0.05).prop_filter("near resonance", |r: &f64| {
        (r / PI - (r / PI).round()).abs() * PI > 0.05
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn periodic_kernel_is_translation_invariant(
        rho in nonresonant_periodic_rho(),
        t in 0.0..1.0f64,
        s in 0.0..1.0f64,
        c in 0.0..1.0f64,
    ) {
        let k = periodic(rho);
        let g = k.eval(t, s);
        let shifted = k.eval((t + c) % 1.0, (s + c) % 1.0);
        prop_assert!((g - shifted).abs() <= 1e-10 * g.abs().max(1.0), "{g} vs {shifted}");
    }

    #[test]
    fn periodic_kernel_is_reflection_invariant(
        rho in nonresonant_periodic_rho(),
        t in 0.0..1.0f64,
        s in 0.0..1.0f64,
    ) {
        let k = periodic(rho);
        let g = k.eval(t, s);
        prop_assert!((g - k.eval(1.0 - t, 1.0 - s)).abs() <= 1e-10 * g.abs().max(1.0));
        prop_assert!((g - k.eval(s, t)).abs() <= 1e-10 * g.abs().max(1.0));
    }

    #[test]
    fn closed_form_periodic_gamma_exceeds_one(x in 1.01..12.0f64) {
        prop_assume!((x / 2.0 - (x / 2.0).round()).abs() > 1e-3);
        let g = gamma_periodic_closed(x * PI, 1.0).unwrap().value;
        prop_assert!(g > 1.0 && g.is_finite(), "x = {x}: {g}");
    }

    #[test]
    fn closed_form_dirichlet_gamma_exceeds_one(rho in dirichlet_rho()) {
        let g = gamma_dirichlet_closed(rho).unwrap().value;
        prop_assert!(g > 1.0 && g.is_finite(), "rho = {rho}: {g}");
    }

    #[test]
    fn expressions_survive_display(a in -5.0..5.0f64, b in 0.1..3.0f64) {
        let src = format!("{a}*sin(pi*t) + x^2/({b}) - exp(-t)");
        let e = Expression::parse(&src).unwrap();
        let again = Expression::parse(&e.to_string()).unwrap();
        for (t, x) in [(0.0, 0.0), (0.3, 1.5), (1.0, -2.0)] {
            prop_assert_eq!(e.eval(t, x, 1.0), again.eval(t, x, 1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gamma_ignores_weight_scale(rho in dirichlet_rho(), c in -6.0..6.0f64) {
        let c = 10f64.powf(c);
        let p = Potential::constant(rho, 1.0).unwrap();
        let k = GreensKernel::closed_form(&p, BoundaryKind::Dirichlet).unwrap();
        let ef = principal_eigenfunction(&p, BoundaryKind::Dirichlet, 401).unwrap();
        let grid: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
        let w = |scale: f64| {
            Weight::sampled(grid.clone(), grid.iter().map(|&t| scale * ef.eval(t)).collect()).unwrap()
        };
        let opts = GammaOptions { t_grid: 11, ..GammaOptions::default() };
        let g0 = gamma_quadrature(&k, &w(1.0), &opts).unwrap().value;
        let g1 = gamma_quadrature(&k, &w(c), &opts).unwrap().value;
        prop_assert!((g1 - g0).abs() <= 1e-12 * g0, "{g0} vs {g1}");
    }

    #[test]
    fn linear_solve_is_linear(
        rho in dirichlet_rho(),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
        p0 in -1.0..1.0f64,
        p1 in -1.0..1.0f64,
        freq in 0.5..6.0f64,
    ) {
        let k = GreensKernel::closed_form(&Potential::constant(rho, 1.0).unwrap(), BoundaryKind::Dirichlet).unwrap();
        let opts = SolveOptions { grid_size: 401, ..SolveOptions::default() };
        let s1 = |t: f64| p0 + p1 * t * t;
        let s2 = |t: f64| (freq * t).sin();
        let u1 = solve_linear(&k, s1, &opts).unwrap();
        let u2 = solve_linear(&k, s2, &opts).unwrap();
        let u = solve_linear(&k, |t| a * s1(t) + b * s2(t), &opts).unwrap();
        let scale = u1.values.iter().chain(&u2.values).fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..u.values.len() {
            let expect = a * u1.values[i] + b * u2.values[i];
            prop_assert!((u.values[i] - expect).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn h2_verdict_ignores_scaling_of_f(c in -4.0..4.0f64) {
        let c = 10f64.powf(c);
        let rho = 60f64.sqrt();
        let p = Potential::constant(rho, 1.0).unwrap();
        let w = Weight::Eigenfunction(principal_eigenfunction(&p, BoundaryKind::Dirichlet, 2001).unwrap());
        let gamma = gamma_dirichlet_closed(rho).unwrap().value;
        let lattice = SampleLattice::standard(1.0);
        let base = check_h2(&Expression::parse("t*(1-t)").unwrap(), &w, gamma, 1.0, &lattice).unwrap();
        let scaled = check_h2(&Expression::parse(&format!("{c}*t*(1-t)")).unwrap(), &w, gamma, 1.0, &lattice).unwrap();
        prop_assert_eq!(base.passed, scaled.passed);
        prop_assert!((base.ratio - scaled.ratio).abs() <= 1e-9 * base.ratio);
        prop_assert!((scaled.m - c * base.m).abs() <= 1e-9 * c * base.m);
    }

    #[test]
    fn eigenvalues_respect_the_inclusion_order(
        c0 in -30.0..30.0f64,
        c1 in -5.0..5.0f64,
        c2 in -5.0..5.0f64,
    ) {
        let p = Potential::sample_fn(1.0, 201, |t| c0 + c1 * (2.0 * PI * t).sin() + c2 * (4.0 * PI * t).cos()).unwrap();
        let l = |bc| smallest_eigenvalue(&p, bc).unwrap().lambda;
        let (n, per, d) = (l(BoundaryKind::Neumann), l(BoundaryKind::Periodic), l(BoundaryKind::Dirichlet));
        let (m1, m2) = (l(BoundaryKind::Mixed1), l(BoundaryKind::Mixed2));
        let tol = 1e-7 * (1.0 + c0.abs());
        prop_assert!(n <= per + tol && per <= d + tol, "N {n} P {per} D {d}");
        prop_assert!(n <= m1 + tol && m1 <= d + tol, "N {n} M1 {m1} D {d}");
        prop_assert!(n <= m2 + tol && m2 <= d + tol, "N {n} M2 {m2} D {d}");
    }
}
