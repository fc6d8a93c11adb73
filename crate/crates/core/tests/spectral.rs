use gevrey_bea::models::{Nonlinearity, PdeModel, Potential};
use gevrey_bea::spectral::{abs_a_power, gevrey_norm, project, Cutoff, FourierGrid, GevreyIndex, Spectrum};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn models() -> Vec<PdeModel> {
    vec![
        PdeModel::new(Nonlinearity::PowerNls { lambda: 1.0, sigma: 1 }, 6).unwrap(),
        PdeModel::new(Nonlinearity::Wave(Potential::SineGordon { gamma: 1.0 }), 6).unwrap(),
    ]
}

fn coeffs() -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 11).prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval(c in coeffs(), extra in 0usize..9) {
        // five modes each side, any grid that resolves them
        let grid = FourierGrid::new(5, 11 + extra).unwrap();
        let values = grid.to_physical(&c);
        let physical: f64 = values.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.quadrature_weight();
        let spectral: f64 = c.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((physical - spectral).abs() <= 1e-12 * (1.0 + spectral));
        let back = grid.from_physical(&values);
        for (a, b) in back.iter().zip(&c) {
            prop_assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn projectors_compose_to_the_smaller_band(a in 0u64..40, b in 0u64..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for model in models() {
            let u = model.random_band_state(Cutoff::Full, 1.0, &mut rng);
            let (pa, pb) = (Cutoff::At(a), Cutoff::At(b));
            let lhs = model.project(&model.project(&u, pb), pa);
            let rhs = model.project(&u, pa.min(pb));
            prop_assert_eq!(&lhs, &rhs);
            prop_assert_eq!(model.project(&lhs, pa), lhs.clone());
            // P_m and its complement split u
            let rest = &u - &model.project(&u, pa);
            prop_assert_eq!(model.project(&rest, pa).max_abs(), 0.0);
        }
    }

    #[test]
    fn j_inverse_commutes_with_projection(m in 0u64..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for model in models() {
            let u = model.random_band_state(Cutoff::Full, 1.0, &mut rng);
            let a = model.apply_j_inv(&model.project(&u, Cutoff::At(m))).unwrap();
            let b = model.project(&model.apply_j_inv(&u).unwrap(), Cutoff::At(m));
            prop_assert!((&a - &b).max_abs() < 1e-15);
        }
    }

    #[test]
    fn symplectic_form_is_skew(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for model in models() {
            let a = model.random_band_state(Cutoff::Full, 1.0, &mut rng);
            let b = model.random_band_state(Cutoff::Full, 1.0, &mut rng);
            let s = model.symplectic_form(&a, &b) + model.symplectic_form(&b, &a);
            prop_assert!(s.abs() < 1e-12);
            // ω(a, b) = ⟨J⁻¹a, b⟩_Y
            let via_y = model.y_inner(&model.apply_j_inv(&a).unwrap(), &b);
            prop_assert!((via_y - model.symplectic_form(&a, &b)).abs() < 1e-11);
        }
    }

    #[test]
    fn gevrey_norm_grows_with_tau(t1 in 0.0f64..2.0, dt in 0.0f64..1.0, ell in 0.0f64..3.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for model in models() {
            let u = model.random_band_state(Cutoff::Full, 1.0, &mut rng);
            let lo = gevrey_norm(&u, &GevreyIndex::new(t1, ell, model.q()).unwrap(), model.layout()).unwrap();
            let hi = gevrey_norm(&u, &GevreyIndex::new(t1 + dt, ell, model.q()).unwrap(), model.layout()).unwrap();
            prop_assert!(lo <= hi * (1.0 + 1e-14));
        }
    }

    #[test]
    fn operator_powers_compose(p in 0u32..4, r in 0u32..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for model in models() {
            let s = model.spectrum();
            let u = model.random_band_state(Cutoff::Full, 1.0, &mut rng);
            let a = abs_a_power(&abs_a_power(&u, p, s), r, s);
            let b = abs_a_power(&u, p + r, s);
            prop_assert!((&a - &b).max_abs() <= 1e-12 * b.max_abs().max(1.0));
        }
    }
}

#[test]
fn abs_a_power_examples() {
    let mut u = gevrey_bea::spectral::FourierState::zeros(3, 1);
    u.set(0, -2, Complex64::new(1.0, 1.0));
    u.set(0, 0, Complex64::new(5.0, 0.0));
    let w = abs_a_power(&u, 2, Spectrum::Linear);
    assert_eq!(w.get(0, -2), Complex64::new(4.0, 4.0));
    assert_eq!(w.get(0, 0), Complex64::new(0.0, 0.0));
    let n = abs_a_power(&u, 1, Spectrum::Quadratic);
    assert_eq!(n.get(0, -2), Complex64::new(4.0, 4.0));
    assert_eq!(project(&u, Cutoff::At(0), Spectrum::Quadratic).get(0, -2), Complex64::new(0.0, 0.0));
}
