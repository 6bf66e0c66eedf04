use std::sync::Arc;

use crossdiff::coefficients::{
    regularize, CoefficientSet, GeneralCoefficients, PowerLawCoefficients, RegularizedCoefficients, ScalarFn,
};
use crossdiff::entropy::{
    beta_alpha, entropy_functional, matrix_a, quadratic_form, quadratic_form_expanded, EntropyMap,
};
use crossdiff::spatial::SpatialSpace;
use proptest::prelude::*;

fn sqrt_reg(eps: f64) -> Arc<RegularizedCoefficients> {
    Arc::new(regularize(&CoefficientSet::PowerLaw(PowerLawCoefficients::sqrt_cross()), eps).unwrap())
}

fn power_reg(alpha: [f64; 2], amp: [f64; 2], eps: f64) -> Arc<RegularizedCoefficients> {
    let mut p = PowerLawCoefficients::sqrt_cross();
    p.alpha[0][1] = alpha[0];
    p.alpha[1][0] = alpha[1];
    p.a[0][1] = amp[0];
    p.a[1][0] = amp[1];
    Arc::new(regularize(&CoefficientSet::PowerLaw(p), eps).unwrap())
}

/// The same coefficients handed over as opaque functions, forcing the quadrature route.
fn general_sqrt(eps: f64) -> Arc<RegularizedCoefficients> {
    let g = GeneralCoefficients {
        r: [0.0; 2],
        cross: [ScalarFn::power(1.0, 0.5), ScalarFn::power(1.0, 0.5)],
        self_rate: [ScalarFn::constant(1.0), ScalarFn::constant(1.0)],
        s: [
            [ScalarFn::constant(0.0), ScalarFn::constant(0.0)],
            [ScalarFn::constant(0.0), ScalarFn::constant(0.0)],
        ],
    };
    Arc::new(regularize(&CoefficientSet::General(g), eps).unwrap())
}

#[test]
fn phi_examples() {
    let m = EntropyMap::new(sqrt_reg(0.0), 0).unwrap();
    assert!(m.is_closed_form());
    assert_eq!(m.phi(1.0).unwrap(), 0.0);
    assert!((m.phi(4.0).unwrap() - 0.5).abs() < 1e-15);
    let q = EntropyMap::new(general_sqrt(0.0), 0).unwrap();
    assert!(!q.is_closed_form());
    assert!((q.phi(4.0).unwrap() - 0.5).abs() < 1e-12);
    let me = EntropyMap::new(sqrt_reg(0.1), 0).unwrap();
    assert_eq!(me.phi(1.0).unwrap(), 0.0);
    assert!(m.phi(0.0).is_err());
}

#[test]
fn psi_examples() {
    for reg in [sqrt_reg(0.0), general_sqrt(0.0)] {
        let m = EntropyMap::new(reg, 0).unwrap();
        assert!((m.psi(4.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((m.psi(0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(m.psi(1.0).unwrap().abs() < 1e-15);
        assert!(m.psi(-1.0).is_err());
    }
    // the constant offset keeps ψ^ε(1) = 0 and places ψ^ε(0) at a(1) + ε
    let m = EntropyMap::new(sqrt_reg(0.1), 1).unwrap();
    assert!(m.psi(1.0).unwrap().abs() < 1e-15);
    assert!((m.psi(0.0).unwrap() - 1.1).abs() < 1e-15);
}

#[test]
fn inverse_examples() {
    let m = EntropyMap::new(sqrt_reg(0.1), 0).unwrap();
    assert!((m.phi_inverse(0.0).unwrap() - 1.0).abs() < 1e-15);
    let y = 0.5 + 0.1 * 4f64.ln();
    assert!((m.phi(4.0).unwrap() - y).abs() < 1e-15);
    assert!((m.phi_inverse(y).unwrap() - 4.0).abs() < 1e-12);
    let deep = -1e6;
    let x = m.phi_inverse(deep).unwrap();
    assert!(x > 0.0 && x < 1.0);
    assert!((m.phi(x).unwrap() - deep).abs() <= 1e-12 * (1.0 + deep.abs()));
    assert!(m.phi_inverse(f64::NAN).is_err());
    assert!(m.phi_inverse(f64::INFINITY).is_err());
}

#[test]
fn entropy_functional_examples() {
    let maps = EntropyMap::pair(&sqrt_reg(0.0)).unwrap();
    let space = SpatialSpace::new_1d(1.0, 4).unwrap();
    let nq = space.num_nodes();
    let ones = vec![1.0; nq];
    assert_eq!(entropy_functional(&maps, [&ones, &ones], &space).unwrap(), 0.0);
    let fours = vec![4.0; nq];
    let e = entropy_functional(&maps, [&fours, &fours], &space).unwrap();
    assert!((e - 2.0).abs() < 1e-12);
    let wide = SpatialSpace::new_1d(2.0, 4).unwrap();
    let e2 = entropy_functional(&maps, [&fours, &fours], &wide).unwrap();
    assert!((e2 - 2.0 * e).abs() < 1e-12);
    let mut bad = fours.clone();
    bad[2] = 0.0;
    assert!(entropy_functional(&maps, [&bad, &fours], &space).is_err());
}

#[test]
fn diffusion_matrix_example() {
    let m = matrix_a(&sqrt_reg(0.0), 1.0, 1.0);
    assert!((m.a11 - 4.0).abs() < 1e-15 && (m.a22 - 4.0).abs() < 1e-15);
    assert_eq!(m.a12, 1.0);
    assert_eq!(m.a21, m.a12);
    assert!((m.det - 15.0).abs() < 1e-14);
}

#[test]
fn quadratic_form_examples() {
    let reg = sqrt_reg(0.0);
    let zero = quadratic_form(&reg, [2.0, 3.0], [&[0.0], &[0.0]]);
    assert_eq!((zero.q, zero.bound1, zero.bound2), (0.0, 0.0, 0.0));
    let qf = quadratic_form(&reg, [1.0, 1.0], [&[1.0], &[0.0]]);
    assert!((qf.q - 4.0).abs() < 1e-15);
    assert!((qf.bound1 - 2.0).abs() < 1e-15);
    assert!(qf.q >= qf.bound1 && qf.q >= qf.bound2);
}

#[test]
fn beta_examples() {
    assert_eq!(beta_alpha(0.0, 0.5), 0.0);
    assert_eq!(beta_alpha(1.0, 0.3), 1.0);
    assert!((beta_alpha(16.0, 0.5) - (0.25 * 16f64.ln()).exp()).abs() < 1e-15);
    assert!((beta_alpha(16.0, 0.5) - 2.0).abs() < 1e-15);
}

#[test]
fn lemma_constants_stable_across_eps() {
    let b: Vec<f64> = [1e-1, 1e-3, 1e-6]
        .iter()
        .map(|&e| EntropyMap::new(sqrt_reg(e), 0).unwrap().b_const())
        .collect();
    let d: Vec<f64> = [1e-1, 1e-3, 1e-6]
        .iter()
        .map(|&e| EntropyMap::new(sqrt_reg(e), 0).unwrap().d_const())
        .collect();
    assert!(b.windows(2).all(|w| w[0] == w[1]), "{b:?}");
    assert!(d.windows(2).all(|w| w[0] == w[1]), "{d:?}");
    assert!(b[0] < 0.0 && d[0] > 0.0);
}

fn eps_choice() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![1e-1, 1e-3, 1e-6])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3400))]

    #[test]
    fn inverse_round_trip(y in -50.0f64..50.0, eps in eps_choice(), alpha in 0.05f64..0.95, species in 0usize..2) {
        let m = EntropyMap::new(power_reg([alpha, alpha], [1.0, 1.0], eps), species).unwrap();
        // beyond φ^ε(f64::MAX) no representable preimage exists
        if y >= m.phi_log(f64::MAX.ln()) {
            prop_assert!(m.phi_inverse(y).is_err());
            return Ok(());
        }
        let x = m.phi_inverse(y).unwrap();
        prop_assert!(x > 0.0);
        prop_assert!((m.phi(x).unwrap() - y).abs() <= 1e-12 * (1.0 + y.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn psi_convex(alpha in 0.05f64..0.95, amp in 0.1f64..3.0, eps in eps_choice(), lx in -3.0f64..3.0) {
        let m = EntropyMap::new(power_reg([alpha, alpha], [amp, amp], eps), 0).unwrap();
        let x = 10f64.powf(lx);
        let h = 0.05 * x;
        let d2 = (m.psi(x + h).unwrap() - 2.0 * m.psi(x).unwrap() + m.psi(x - h).unwrap()) / (h * h);
        prop_assert!(d2 >= -1e-9);
    }

    #[test]
    fn lower_and_linear_bounds(alpha in 0.05f64..0.95, amp in 0.1f64..3.0, eps in eps_choice(), lx in -8.0f64..6.0) {
        let m = EntropyMap::new(power_reg([alpha, alpha], [amp, amp], eps), 1).unwrap();
        let x = 10f64.powf(lx);
        // ψ^ε' = φ^ε
        let xdpsi = x * m.phi(x).unwrap();
        prop_assert!(xdpsi >= m.b_const() - eps / std::f64::consts::E - 1e-12);
        let cap = m.d_const() * (1.0 + eps) * (1.0 + m.psi(x).unwrap());
        for a in [0.0, 0.5, 1.0] {
            prop_assert!(x.powf(a) + m.cross(x) <= cap * (1.0 + 1e-12));
        }
        prop_assert!(xdpsi <= cap * (1.0 + 1e-12));
    }

    #[test]
    fn matrix_cross_part_nonnegative(alpha in prop::array::uniform2(0.05f64..0.95), u1 in 1e-3f64..1e3, u2 in 1e-3f64..1e3, eps in eps_choice()) {
        let reg = power_reg(alpha, [1.0, 1.0], eps);
        let m = matrix_a(&reg, u1, u2);
        // C = [[a12 u1/a21', u1u2],[u1u2, a21 u2/a12']]
        let c11 = reg.a(0, 1, u2) * u1 / reg.a_d1(1, 0, u1);
        let c22 = reg.a(1, 0, u1) * u2 / reg.a_d1(0, 1, u2);
        let det_c = c11 * c22 - (u1 * u2).powi(2);
        prop_assert!(det_c >= -1e-12 * c11 * c22);
        prop_assert!(m.det >= det_c - 1e-9 * m.det.abs());
        prop_assert!(m.a11 > 0.0 && m.det > 0.0);
    }

    #[test]
    fn quadratic_form_matches_expansion(alpha in prop::array::uniform2(0.05f64..0.95), u1 in 1e-3f64..1e3, u2 in 1e-3f64..1e3, g in prop::array::uniform4(-2.0f64..2.0), eps in eps_choice()) {
        let reg = power_reg(alpha, [1.0, 1.0], eps);
        let gw0 = [g[0], g[1]];
        let gw1 = [g[2], g[3]];
        let qf = quadratic_form(&reg, [u1, u2], [&gw0, &gw1]);
        let e = quadratic_form_expanded(&reg, [u1, u2], [&gw0, &gw1]);
        prop_assert!((qf.q - e).abs() <= 1e-12 * qf.q.abs().max(1e-300));
        prop_assert!(qf.q >= qf.bound1 * (1.0 - 1e-9));
        prop_assert!(qf.q >= qf.bound2 * (1.0 - 1e-9));
    }
}
