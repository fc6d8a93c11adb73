//! Power series in the step size with Fourier-state coefficients.
//!
//! The numerical map is expanded as `Ψ^h(Y(h)) = Σ_j h^j Ψ_j` by solving the
//! stage equations order by order: the explicit factor `h` in
//! `W^i = Y + h Σ_l a_il f(W^l)` makes coefficient `j` of every stage depend
//! only on lower coefficients.

use crate::error::{Error, Result};
use crate::models::PdeModel;
use crate::spectral::{Cutoff, FourierState};
use crate::tableau::ButcherTableau;

/// Largest expansion order accepted unless a caller raises it.
pub const DEFAULT_ORDER_CAP: usize = 12;

/// `Σ_{j=0}^{n} h^j c_j` on band `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct HJet {
    coeffs: Vec<FourierState>,
    band: Cutoff,
}

impl HJet {
    pub fn new(coeffs: Vec<FourierState>, band: Cutoff) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.same_shape(&coeffs[0])) {
            return Err(Error::InvalidArgument("jet needs at least one coefficient of uniform shape".into()));
        }
        Ok(HJet { coeffs, band })
    }

    /// The constant jet `u + 0 h + … + 0 h^order`.
    pub fn constant(u: &FourierState, order: usize, band: Cutoff) -> Self {
        let mut coeffs = vec![u.zeros_like(); order + 1];
        coeffs[0] = u.clone();
        HJet { coeffs, band }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn band(&self) -> Cutoff {
        self.band
    }

    pub fn coeff(&self, j: usize) -> &FourierState {
        &self.coeffs[j]
    }

    pub fn coeffs(&self) -> &[FourierState] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<FourierState> {
        self.coeffs
    }

    /// Horner evaluation at a numerical step size.
    pub fn evaluate(&self, h: f64) -> FourierState {
        let mut acc = self.coeffs[self.order()].clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc.scaled(h);
            acc += c;
        }
        acc
    }

    /// `Σ_i w_i jets_i` coefficient-wise.
    pub fn linear_combination(jets: &[&HJet], weights: &[f64]) -> Result<HJet> {
        let first = jets
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?;
        let order = jets.iter().map(|j| j.order()).min().unwrap_or(0);
        let mut coeffs = vec![first.coeffs[0].zeros_like(); order + 1];
        for (jet, w) in jets.iter().zip(weights) {
            for (dst, src) in coeffs.iter_mut().zip(&jet.coeffs) {
                dst.axpy(*w, src);
            }
        }
        Ok(HJet {
            coeffs,
            band: first.band,
        })
    }
}

/// Jet of `P_m B(u(h))` to the order of `u`.
pub fn jet_lift_nonlinearity(model: &PdeModel, u: &HJet) -> Result<HJet> {
    let coeffs = model.nonlinearity_jet(&u.coeffs, u.band)?;
    Ok(HJet { coeffs, band: u.band })
}

/// Jet of `Ψ_m^h(U)` to the given order.
pub fn expand_step_map(
    model: &PdeModel,
    tab: &ButcherTableau,
    u: &FourierState,
    m: Cutoff,
    order: usize,
) -> Result<HJet> {
    if order > DEFAULT_ORDER_CAP {
        return Err(Error::OrderCap {
            requested: order,
            cap: DEFAULT_ORDER_CAP,
        });
    }
    let y = HJet::constant(&model.project(u, m), order, m);
    expand_step_map_jet(model, tab, &y)
}

/// Jet of `Ψ_m^h(Y(h))` for a jet input `Y`, to the order of `Y`.
pub fn expand_step_map_jet(model: &PdeModel, tab: &ButcherTableau, y: &HJet) -> Result<HJet> {
    let n = y.order();
    let m = y.band;
    let s = tab.stages();
    let y0 = model.project(&y.coeffs[0], m);
    let mut w: Vec<Vec<FourierState>> = vec![vec![y0.clone()]; s];
    // f(W^l)_{j-1} for the current j, recomputed from the stage coefficients so far
    let mut fw: Vec<FourierState> = Vec::with_capacity(s);
    for j in 1..=n {
        fw.clear();
        for wl in &w {
            let b = model.nonlinearity_jet(wl, m)?;
            let mut f = model.apply_a(&wl[j - 1])?;
            f += &b[j - 1];
            fw.push(f);
        }
        let yj = model.project(&y.coeffs[j], m);
        for (i, wi) in w.iter_mut().enumerate() {
            let mut c = yj.clone();
            for (l, fl) in fw.iter().enumerate() {
                c.axpy(tab.a[i][l], fl);
            }
            wi.push(c);
        }
    }
    // Ψ_j = Y_j + Σ_i b_i f(W^i)_{j-1}
    let mut psi = Vec::with_capacity(n + 1);
    psi.push(y0);
    if n > 0 {
        let bjets: Vec<Vec<FourierState>> = w
            .iter()
            .map(|wi| model.nonlinearity_jet(&wi[..n], m))
            .collect::<Result<_>>()?;
        for j in 1..=n {
            let mut c = model.project(&y.coeffs[j], m);
            for (i, wi) in w.iter().enumerate() {
                let mut f = model.apply_a(&wi[j - 1])?;
                f += &bjets[i][j - 1];
                c.axpy(tab.b[i], &f);
            }
            psi.push(c);
        }
    }
    Ok(HJet { coeffs: psi, band: m })
}

/// Default base step of [`lie_derivative`].
pub const LIE_EPS0: f64 = 1e-5;

/// `DF(U) G(U)` by fourth-order central differences along `G(U)` with step
/// `ε = ε₀ (1 + ‖U‖) / (1 + ‖G(U)‖)`.
pub fn lie_derivative<F, G>(f: F, g: G, u: &FourierState, eps0: f64) -> Result<FourierState>
where
    F: FnMut(&FourierState) -> Result<FourierState>,
    G: FnOnce(&FourierState) -> Result<FourierState>,
{
    let dir = g(u)?;
    directional_derivative(f, u, &dir, eps0)
}

/// `DF(U) d` by fourth-order central differences.
pub fn directional_derivative<F>(mut f: F, u: &FourierState, dir: &FourierState, eps0: f64) -> Result<FourierState>
where
    F: FnMut(&FourierState) -> Result<FourierState>,
{
    let dn = dir.l2_norm();
    if dn == 0.0 {
        return Ok(f(u)?.zeros_like());
    }
    let eps = eps0 * (1.0 + u.l2_norm()) / (1.0 + dn);
    crate::fd::derivative_state(|t| f(&crate::fd::along(u, dir, t)), eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Nonlinearity;
    use crate::rk::{step, StageSolveConfig};
    use crate::tableau::gauss_legendre;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nls(k: usize, lambda: f64) -> PdeModel {
        PdeModel::new(Nonlinearity::PowerNls { lambda, sigma: 1 }, k).unwrap()
    }

    #[test]
    fn order_zero_and_one() {
        let model = nls(6, 1.0);
        let tab = gauss_legendre(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = model.random_band_state(Cutoff::Full, 0.4, &mut rng);
        let j0 = expand_step_map(&model, &tab, &u, Cutoff::Full, 0).unwrap();
        assert_eq!(j0.coeffs(), &[u.clone()]);
        let j1 = expand_step_map(&model, &tab, &u, Cutoff::At(16), 1).unwrap();
        let f = model.vector_field(&u, Cutoff::At(16)).unwrap();
        assert!((j1.coeff(1) - &f).max_abs() < 1e-14);
        assert!(matches!(
            expand_step_map(&model, &tab, &u, Cutoff::Full, 13),
            Err(Error::OrderCap { .. })
        ));
    }

    #[test]
    fn linear_midpoint_taylor_coefficients() {
        // (1 + z/2)/(1 - z/2) = 1 + Σ_{j≥1} 2^{1-j} z^j
        let model = nls(4, 0.0);
        let tab = gauss_legendre(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = model.random_band_state(Cutoff::Full, 1.0, &mut rng);
        let jet = expand_step_map(&model, &tab, &u, Cutoff::Full, 6).unwrap();
        for j in 1..=6 {
            for k in u.modes() {
                let z = Complex64::new(0.0, -((k * k) as f64));
                let expect = u.get(0, k) * z.powi(j as i32) * 2f64.powi(1 - j as i32);
                assert!((jet.coeff(j).get(0, k) - expect).norm() < 1e-12 * (1.0 + expect.norm()));
            }
        }
    }

    #[test]
    fn jet_matches_step() {
        let model = nls(4, 1.0);
        let tab = gauss_legendre(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = model.random_band_state(Cutoff::Full, 0.3, &mut rng);
        let jet = expand_step_map(&model, &tab, &u, Cutoff::Full, 4).unwrap();
        let cfg = StageSolveConfig { tol: 1e-15, ..Default::default() };
        let errs: Vec<f64> = [0.004, 0.002, 0.001]
            .iter()
            .map(|&h| (&jet.evaluate(h) - &step(&model, &tab, &u, h, Cutoff::Full, cfg).unwrap()).l2_norm())
            .collect();
        let slope = (errs[0] / errs[2]).log2() / 2.0;
        assert!(slope > 4.8, "slope {slope}, errors {errs:?}");
    }

    #[test]
    fn lie_derivative_examples() {
        let model = nls(5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = model.random_band_state(Cutoff::Full, 0.5, &mut rng);
        let w = model.random_band_state(Cutoff::Full, 0.5, &mut rng);
        let lin = lie_derivative(|x| model.apply_a(x), |_| Ok(w.clone()), &u, LIE_EPS0).unwrap();
        let exact = model.apply_a(&w).unwrap();
        assert!((&lin - &exact).max_abs() < 1e-8 * exact.max_abs());
        let zero = lie_derivative(|x| model.apply_b(x, Cutoff::Full), |x| Ok(x.zeros_like()), &u, LIE_EPS0).unwrap();
        assert_eq!(zero.max_abs(), 0.0);

        // DB(U)W = -iλ(2|u|²w + u²w̄) pointwise
        let d = lie_derivative(|x| model.apply_b(x, Cutoff::Full), |_| Ok(w.clone()), &u, LIE_EPS0).unwrap();
        let g = model.grid();
        let up = g.to_physical(u.component(0));
        let wp = g.to_physical(w.component(0));
        let vals: Vec<Complex64> = up
            .iter()
            .zip(&wp)
            .map(|(a, b)| -Complex64::i() * (2.0 * a.norm_sqr() * b + a * a * b.conj()))
            .collect();
        let exact = g.from_physical(&vals);
        for (x, y) in d.component(0).iter().zip(&exact) {
            assert!((x - y).norm() < 1e-7 * (1.0 + y.norm()));
        }
    }
}
