use gevrey_bea::bea::{default_anchor, modified_flow_with, ModifiedField, ModifiedHamiltonian};
use gevrey_bea::hjet::expand_step_map;
use gevrey_bea::models::{Nonlinearity, PdeModel, Potential};
use gevrey_bea::ode::{integrate, ExtrapolationOptions};
use gevrey_bea::rk::{StageSolveConfig, Stepper};
use gevrey_bea::spectral::{Cutoff, FourierState};
use gevrey_bea::tableau::gauss_legendre;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn nls(k: usize) -> PdeModel {
    PdeModel::new(Nonlinearity::PowerNls { lambda: 1.0, sigma: 1 }, k).unwrap()
}

fn sine_gordon(k: usize) -> PdeModel {
    PdeModel::new(Nonlinearity::Wave(Potential::SineGordon { gamma: 1.0 }), k).unwrap()
}

fn quartic_wave(k: usize) -> PdeModel {
    PdeModel::new(Nonlinearity::Wave(Potential::Polynomial(vec![0.0, 0.0, 0.5, 0.0, 0.25])), k).unwrap()
}

fn tight() -> StageSolveConfig {
    StageSolveConfig { tol: 1e-15, max_iter: 500, ..Default::default() }
}

fn mass(u: &FourierState) -> f64 {
    u.data().iter().map(|c| c.norm_sqr()).sum()
}

/// `∫ u_x v dx` in Fourier variables.
fn momentum(u: &FourierState) -> f64 {
    u.modes().map(|k| (Complex64::new(0.0, k as f64) * u.get(0, k) * u.get(1, k).conj()).re).sum()
}

#[test]
fn exact_flow_conserves_h() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let nonlocal = PdeModel::new(Nonlinearity::Nonlocal { kappa: 0.5, rho_min: 1e-3 }, 4).unwrap();
    let mut w = nonlocal.random_band_state(Cutoff::Full, 0.1, &mut rng);
    w.set(0, 0, Complex64::new(1.0, 0.0));
    let cases = [
        (nls(5), None),
        (sine_gordon(5), None),
        (quartic_wave(5), None),
        (nonlocal, Some(w)),
    ];
    for (model, start) in cases {
        let u = start.unwrap_or_else(|| model.random_band_state(Cutoff::Full, 0.2, &mut rng));
        let h0 = model.hamiltonian(&u).unwrap();
        let end = integrate(|x| model.vector_field(x, Cutoff::Full), &u, 1.0, ExtrapolationOptions::default()).unwrap();
        let h1 = model.hamiltonian(&end).unwrap();
        assert!((h1 - h0).abs() <= 1e-10 * h0.abs().max(1.0), "{:?}: {h0} -> {h1}", model.kind());
        assert!((&end - &u).max_abs() > 1e-3, "the flow should move the state");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gauss_methods_conserve_quadratic_invariants(s in 1usize..=3, h in 0.01f64..0.2, seed in any::<u64>()) {
        let tab = gauss_legendre(s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let model = nls(5);
        let u = model.random_band_state(Cutoff::Full, 0.3, &mut rng);
        let st = Stepper::new(&model, &tab, h, Cutoff::Full, tight()).unwrap();
        let traj = st.trajectory(&u, 10).unwrap();
        let m0 = mass(&u);
        prop_assert!((mass(traj.last().unwrap()) - m0).abs() <= 1e-12 * m0);

        // polynomial potential on a dealiased grid keeps the discrete system translation invariant
        let model = quartic_wave(5);
        let u = model.random_band_state(Cutoff::Full, 0.3, &mut rng);
        let st = Stepper::new(&model, &tab, h, Cutoff::Full, tight()).unwrap();
        let traj = st.trajectory(&u, 10).unwrap();
        let p0 = momentum(&u);
        prop_assert!((momentum(traj.last().unwrap()) - p0).abs() <= 1e-12 * (1.0 + p0.abs()));
    }

    #[test]
    fn step_stays_in_band_and_ignores_modes_outside(m in 1u64..25, seed in any::<u64>()) {
        let tab = gauss_legendre(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = nls(5);
        let u = model.random_band_state(Cutoff::Full, 0.3, &mut rng);
        let st = Stepper::new(&model, &tab, 0.05, Cutoff::At(m), tight()).unwrap();
        let a = st.step(&u).unwrap();
        let b = st.step(&model.project(&u, Cutoff::At(m))).unwrap();
        prop_assert!((&a - &b).max_abs() < 1e-14);
        prop_assert_eq!(model.project(&a, Cutoff::At(m)), a);
    }
}

#[test]
fn step_map_jet_matches_the_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (model, s) in [(nls(4), 1), (sine_gordon(4), 2)] {
        let tab = gauss_legendre(s).unwrap();
        let u = model.random_band_state(Cutoff::Full, 0.3, &mut rng);
        let jet = expand_step_map(&model, &tab, &u, Cutoff::Full, 6).unwrap();
        let err = |h: f64| {
            let step = Stepper::new(&model, &tab, h, Cutoff::Full, tight()).unwrap().step(&u).unwrap();
            (&jet.evaluate(h) - &step).l2_norm()
        };
        let (e1, e2) = (err(0.04), err(0.02));
        let slope = (e1 / e2).log2();
        assert!(slope > 6.5, "{:?} gauss{s}: errors {e1:e}, {e2:e}", model.kind());
    }
}

#[test]
fn modified_field_even_terms_vanish_for_symmetric_methods() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for (model, s) in [(nls(3), 1), (sine_gordon(3), 1), (sine_gordon(3), 2)] {
        let tab = gauss_legendre(s).unwrap();
        let u = model.random_band_state(Cutoff::Full, 0.3, &mut rng);
        let f = ModifiedField::new(&model, &tab, 6, Cutoff::Full).unwrap().coefficients(&u).unwrap();
        let scale = f[0].max_abs();
        // cancellation in the log leaves roundoff of the size of the odd neighbour
        let near = |j: usize| f[j - 2].max_abs().max(f.get(j).map_or(0.0, |c| c.max_abs()));
        for j in [2, 4, 6] {
            assert!(f[j - 1].max_abs() <= 1e-10 * near(j), "gauss{s} f^{j}");
        }
        // below the order only f^1 survives
        let first = f[tab.order].max_abs().max(scale);
        for j in 2..=tab.order {
            assert!(f[j - 1].max_abs() <= 1e-10 * first, "gauss{s} f^{j}");
        }
        assert!(f[tab.order].max_abs() > 1e-6 * scale);
    }
}

#[test]
fn modified_flow_conserves_modified_hamiltonian() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tab = gauss_legendre(1).unwrap();
    for model in [nls(4), sine_gordon(4)] {
        let u = model.random_band_state(Cutoff::Full, 0.3, &mut rng);
        let h = 0.1;
        let field = ModifiedField::new(&model, &tab, 4, Cutoff::Full).unwrap();
        let end = modified_flow_with(&field, &u, h, ExtrapolationOptions::default()).unwrap();
        let ham = ModifiedHamiltonian::new(ModifiedField::new(&model, &tab, 4, Cutoff::Full).unwrap(), default_anchor(&model));
        let (a, b) = (ham.eval(&u, h).unwrap(), ham.eval(&end, h).unwrap());
        assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0), "{:?}: {a} -> {b}", model.kind());
        // while H itself moves at this step size
        let dh = (model.hamiltonian(&end).unwrap() - model.hamiltonian(&u).unwrap()).abs();
        assert!(dh > 100.0 * (a - b).abs());
    }
}
