//! Initial states from their configured description.

use gevrey_bea::models::{plane_wave_coefficient, PdeModel};
use gevrey_bea::spectral::{tail_bound_check, FourierState, GevreyIndex};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, InitialCondition};
use crate::error::{HarnessError, Result};

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

/// The configured initial state, checked against the model domain.
pub fn build(cfg: &ExperimentConfig, model: &PdeModel) -> Result<FourierState> {
    let k_max = model.n_modes() as i64;
    let u = match &cfg.run.initial {
        InitialCondition::GevreyDecay { tau, ell, amplitude, seed } => {
            let idx = GevreyIndex::new(*tau, *ell, model.q()).map_err(|e| config_err(e.to_string()))?;
            if !(amplitude.is_finite() && *ell >= 0.0) {
                return Err(config_err("gevrey_decay needs a finite amplitude and ell >= 0"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let u = model.gevrey_state(&idx, *amplitude, &mut rng);
            for m in 1..=model.band_max().min(4) {
                let (lhs, rhs) = tail_bound_check(&u, &idx, model.layout(), m).map_err(|e| config_err(e.to_string()))?;
                if lhs > rhs * (1.0 + 1e-12) + 1e-300 {
                    return Err(config_err(format!("gevrey_decay state violates its tail bound at m = {m}")));
                }
            }
            u
        }
        InitialCondition::PlaneWave { k, amplitude } => {
            if k.abs() > k_max {
                return Err(config_err(format!("plane wave mode {k} outside the band {k_max}")));
            }
            let mut u = model.zeros();
            let c = plane_wave_coefficient(*amplitude);
            if model.is_real() {
                if *k == 0 {
                    u.set(0, 0, Complex64::new(c, 0.0));
                } else {
                    u.set(0, *k, Complex64::new(0.5 * c, 0.0));
                    u.set(0, -*k, Complex64::new(0.5 * c, 0.0));
                }
            } else {
                u.set(0, *k, Complex64::new(c, 0.0));
            }
            u
        }
        InitialCondition::Explicit { coefficients } => {
            let mut u = model.zeros();
            for c in coefficients {
                if c.k.abs() > k_max || c.component >= model.n_comps() {
                    return Err(config_err(format!(
                        "coefficient (k = {}, component = {}) outside the state",
                        c.k, c.component
                    )));
                }
                let v = Complex64::new(c.re, c.im);
                if model.is_real() {
                    if c.k < 0 || (c.k == 0 && c.im != 0.0) {
                        return Err(config_err("real fields take k >= 0 coefficients with a real k = 0 entry"));
                    }
                    u.set(c.component, -c.k, v.conj());
                }
                u.set(c.component, c.k, v);
            }
            u
        }
    };
    if !u.is_finite() {
        return Err(config_err("initial state is not finite"));
    }
    model
        .hamiltonian(&u)
        .map_err(|e| config_err(format!("initial state outside the model domain: {e}")))?;
    Ok(u)
}
