//! Semilinear Hamiltonian PDEs `U' = AU + B(U)` on the circle.
//!
//! Three equations are provided:
//!
//! * the semilinear wave equation `u_tt = u_xx - V'(u)` written for `(u, v)`,
//!   with base space `H¹ × L²`;
//! * the power-law Schrödinger equation `i u_t = -u_xx + λ|u|^{2σ} u`, with
//!   base space `H¹`;
//! * the nonlocal Schrödinger equation whose potential `V(r) = κ/r` acts on
//!   the mass `r = ∫|u|²`.
//!
//! The inverse structure operator `J⁻¹` and every gradient are taken with
//! respect to the base-space inner product, so `J⁻¹(AU + B(U)) = ∇H(U)`
//! holds with the Hamiltonian evaluated by grid quadrature.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fd;
use crate::series::{scalar_powf, GridJet};
use crate::spectral::{
    gevrey_decay_state, project, y_inner, y_norm, Cutoff, FourierGrid, FourierState, GevreyIndex,
    NormLayout, Spectrum,
};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Potential of the wave equation.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// `V(u) = Σ_j c_j u^j`, degree at most 8.
    Polynomial(Vec<f64>),
    /// `V(u) = γ (1 - cos u)`.
    SineGordon { gamma: f64 },
}

impl Potential {
    fn derivative_coeffs(c: &[f64]) -> Vec<f64> {
        c.iter().enumerate().skip(1).map(|(j, cj)| j as f64 * cj).collect()
    }

    /// Degree used to size the dealiasing grid for `V'(u)`.
    fn force_degree(&self) -> usize {
        match self {
            Potential::Polynomial(c) => c.len().saturating_sub(2).max(1),
            Potential::SineGordon { .. } => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    Wave(Potential),
    /// `B(u) = -iλ|u|^{2σ}u` from `V = λ/(σ+1) |u|^{2σ+2}`.
    PowerNls { lambda: f64, sigma: u32 },
    /// `B(u) = -iV'(r)u`, `V(r) = κ/r`, `r = ∫|u|²`, guarded by `r ≥ ρ_min`.
    Nonlocal { kappa: f64, rho_min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Wave,
    Nls,
    NonlocalNls,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Wave => "wave",
            ModelKind::Nls => "nls",
            ModelKind::NonlocalNls => "nonlocal_nls",
        }
    }
}

/// One equation on a fixed Fourier band `|k| ≤ K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeModel {
    nonlinearity: Nonlinearity,
    grid: FourierGrid,
    layout: NormLayout,
}

impl PdeModel {
    pub fn new(nonlinearity: Nonlinearity, n_modes: usize) -> Result<Self> {
        let degree = match &nonlinearity {
            Nonlinearity::Wave(p) => p.force_degree(),
            Nonlinearity::PowerNls { sigma, .. } => 2 * *sigma as usize + 1,
            Nonlinearity::Nonlocal { .. } => 1,
        };
        let grid = FourierGrid::dealiased(n_modes, degree)?;
        Self::with_grid(nonlinearity, grid)
    }

    pub fn with_grid(nonlinearity: Nonlinearity, grid: FourierGrid) -> Result<Self> {
        let layout = match &nonlinearity {
            Nonlinearity::Wave(p) => {
                match p {
                    Potential::Polynomial(c) => {
                        if c.len() > 9 {
                            return Err(Error::InvalidArgument(format!(
                                "polynomial potential of degree {} exceeds 8",
                                c.len() - 1
                            )));
                        }
                        if c.iter().any(|x| !x.is_finite()) {
                            return Err(Error::InvalidArgument("non-finite potential coefficient".into()));
                        }
                    }
                    Potential::SineGordon { gamma } => {
                        if !gamma.is_finite() {
                            return Err(Error::InvalidArgument("non-finite sine-Gordon gamma".into()));
                        }
                    }
                }
                NormLayout {
                    spectrum: Spectrum::Linear,
                    offsets: vec![1.0, 0.0],
                }
            }
            Nonlinearity::PowerNls { lambda, sigma } => {
                if *sigma < 1 || !lambda.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "power NLS needs sigma >= 1 and finite lambda, got sigma = {sigma}, lambda = {lambda}"
                    )));
                }
                NormLayout {
                    spectrum: Spectrum::Quadratic,
                    offsets: vec![1.0],
                }
            }
            Nonlinearity::Nonlocal { kappa, rho_min } => {
                if !(*rho_min > 0.0) || !kappa.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "nonlocal NLS needs rho_min > 0 and finite kappa, got rho_min = {rho_min}"
                    )));
                }
                NormLayout {
                    spectrum: Spectrum::Quadratic,
                    offsets: vec![1.0],
                }
            }
        };
        Ok(PdeModel {
            nonlinearity,
            grid,
            layout,
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self.nonlinearity {
            Nonlinearity::Wave(_) => ModelKind::Wave,
            Nonlinearity::PowerNls { .. } => ModelKind::Nls,
            Nonlinearity::Nonlocal { .. } => ModelKind::NonlocalNls,
        }
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn layout(&self) -> &NormLayout {
        &self.layout
    }

    pub fn n_modes(&self) -> usize {
        self.grid.n_modes()
    }

    pub fn n_comps(&self) -> usize {
        self.layout.offsets.len()
    }

    pub fn spectrum(&self) -> Spectrum {
        self.layout.spectrum
    }

    /// Gevrey exponent: 1 for the wave equation, 2 for Schrödinger.
    pub fn q(&self) -> f64 {
        match self.kind() {
            ModelKind::Wave => 1.0,
            _ => 2.0,
        }
    }

    /// Whether every component is a real field (conjugate-symmetric coefficients).
    pub fn is_real(&self) -> bool {
        self.kind() == ModelKind::Wave
    }

    /// Largest `|A|`-eigenvalue on the working band.
    pub fn band_max(&self) -> u64 {
        self.spectrum().eigenvalue(self.n_modes() as i64)
    }

    pub fn zeros(&self) -> FourierState {
        FourierState::zeros(self.n_modes(), self.n_comps())
    }

    pub fn project(&self, state: &FourierState, m: Cutoff) -> FourierState {
        project(state, m, self.spectrum())
    }

    pub fn in_band(&self, k: i64, m: Cutoff) -> bool {
        m.contains(self.spectrum(), k)
    }

    fn check(&self, state: &FourierState) -> Result<()> {
        if state.n_comps() != self.n_comps() || state.n_modes() != self.n_modes() {
            return Err(Error::InvalidArgument(format!(
                "state shape ({} comps, K = {}) does not match the {} model ({} comps, K = {})",
                state.n_comps(),
                state.n_modes(),
                self.kind().name(),
                self.n_comps(),
                self.n_modes()
            )));
        }
        Ok(())
    }

    /// Symbol of `A` on mode `k` as a row-major `c × c` block.
    pub fn a_symbol(&self, k: i64) -> Vec<Complex64> {
        match self.kind() {
            ModelKind::Wave => {
                if k == 0 {
                    vec![ZERO; 4]
                } else {
                    let k2 = (k * k) as f64;
                    vec![ZERO, Complex64::new(1.0, 0.0), Complex64::new(-k2, 0.0), ZERO]
                }
            }
            _ => vec![Complex64::new(0.0, -((k * k) as f64))],
        }
    }

    pub fn apply_a(&self, state: &FourierState) -> Result<FourierState> {
        self.check(state)?;
        let mut out = state.zeros_like();
        match self.kind() {
            ModelKind::Wave => {
                for k in state.modes() {
                    if k == 0 {
                        continue;
                    }
                    let (u, v) = (state.get(0, k), state.get(1, k));
                    out.set(0, k, v);
                    out.set(1, k, -u * (k * k) as f64);
                }
            }
            _ => {
                for k in state.modes() {
                    out.set(0, k, state.get(0, k) * Complex64::new(0.0, -((k * k) as f64)));
                }
            }
        }
        Ok(out)
    }

    /// `P_m B(P_m U)`.
    pub fn apply_b(&self, state: &FourierState, m: Cutoff) -> Result<FourierState> {
        let mut jet = self.nonlinearity_jet(std::slice::from_ref(state), m)?;
        Ok(jet.swap_remove(0))
    }

    /// The truncated vector field `f_m(U) = A P_m U + P_m B(P_m U)`.
    pub fn vector_field(&self, state: &FourierState, m: Cutoff) -> Result<FourierState> {
        let mut out = self.apply_a(&self.project(state, m))?;
        out += &self.apply_b(state, m)?;
        Ok(out)
    }

    /// Taylor coefficients in `h` of `P_m B(P_m U(h))` given those of `U(h)`.
    pub fn nonlinearity_jet(&self, u: &[FourierState], m: Cutoff) -> Result<Vec<FourierState>> {
        if u.is_empty() {
            return Err(Error::InvalidArgument("empty jet".into()));
        }
        for c in u {
            self.check(c)?;
        }
        let order = u.len() - 1;
        let u: Vec<FourierState> = u.iter().map(|c| self.project(c, m)).collect();
        let mut out: Vec<FourierState> = match &self.nonlinearity {
            Nonlinearity::Wave(pot) => {
                let uj = self.physical_jet(&u, 0).real_part();
                let force = match pot {
                    Potential::Polynomial(c) => uj.polynomial(&Potential::derivative_coeffs(c)),
                    Potential::SineGordon { gamma } => uj.sin_cos().0.scale(Complex64::new(*gamma, 0.0)),
                };
                let mut out = Vec::with_capacity(order + 1);
                for (j, vals) in force.coeffs.iter().enumerate() {
                    let mut st = self.zeros();
                    let hat = self.grid.from_physical(vals);
                    for (dst, src) in st.component_mut(1).iter_mut().zip(&hat) {
                        *dst = -src;
                    }
                    // zero-mode Jordan coupling û₀' = v̂₀
                    st.set(0, 0, u[j].get(1, 0));
                    out.push(st);
                }
                out
            }
            Nonlinearity::PowerNls { lambda, sigma } => {
                let uj = self.physical_jet(&u, 0);
                let rho = uj.mul(&uj.conj());
                let val = rho.powi(*sigma).mul(&uj).scale(-I * *lambda);
                val.coeffs
                    .iter()
                    .map(|vals| {
                        FourierState::from_components(self.n_modes(), vec![self.grid.from_physical(vals)])
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            Nonlinearity::Nonlocal { kappa, rho_min } => {
                let mut r = vec![0.0; order + 1];
                for (n, rn) in r.iter_mut().enumerate() {
                    for i in 0..=n {
                        *rn += u[i]
                            .data()
                            .iter()
                            .zip(u[n - i].data())
                            .map(|(a, b)| (a * b.conj()).re)
                            .sum::<f64>();
                    }
                }
                if !(r[0] >= *rho_min) {
                    return Err(Error::Domain(format!(
                        "mass {:e} below the guard rho_min = {rho_min:e}",
                        r[0]
                    )));
                }
                // V'(r) = -κ r^{-2}
                let dv: Vec<f64> = scalar_powf(&r, -2.0).into_iter().map(|x| -kappa * x).collect();
                (0..=order)
                    .map(|n| {
                        let mut st = self.zeros();
                        for i in 0..=n {
                            st.axpy(dv[i], &u[n - i]);
                        }
                        st.scaled_complex(-I)
                    })
                    .collect()
            }
        };
        for st in &mut out {
            *st = self.project(st, m);
            if self.is_real() {
                st.enforce_conjugate_symmetry();
            }
            if !st.is_finite() {
                return Err(Error::Domain("non-finite nonlinearity value".into()));
            }
        }
        Ok(out)
    }

    fn physical_jet(&self, u: &[FourierState], comp: usize) -> GridJet {
        GridJet {
            coeffs: u.iter().map(|c| self.grid.to_physical(c.component(comp))).collect(),
        }
    }

    /// Grid values of one component.
    pub fn to_physical(&self, state: &FourierState, comp: usize) -> Vec<Complex64> {
        self.grid.to_physical(state.component(comp))
    }

    pub fn hamiltonian(&self, state: &FourierState) -> Result<f64> {
        self.check(state)?;
        let mut kinetic = 0.0;
        for k in state.modes() {
            kinetic += 0.5 * (k * k) as f64 * state.get(0, k).norm_sqr();
        }
        let w = self.grid.quadrature_weight();
        let potential = match &self.nonlinearity {
            Nonlinearity::Wave(pot) => {
                kinetic += 0.5 * state.component(1).iter().map(|z| z.norm_sqr()).sum::<f64>();
                let u = self.to_physical(state, 0);
                match pot {
                    Potential::Polynomial(c) => u
                        .iter()
                        .map(|x| c.iter().rev().fold(0.0, |acc, cj| acc * x.re + cj))
                        .sum::<f64>()
                        * w,
                    Potential::SineGordon { gamma } => {
                        u.iter().map(|x| gamma * (1.0 - x.re.cos())).sum::<f64>() * w
                    }
                }
            }
            Nonlinearity::PowerNls { lambda, sigma } => {
                let u = self.to_physical(state, 0);
                let e = *sigma as i32 + 1;
                0.5 * w * u.iter().map(|x| lambda / e as f64 * x.norm_sqr().powi(e)).sum::<f64>()
            }
            Nonlinearity::Nonlocal { kappa, rho_min } => {
                let r: f64 = state.data().iter().map(|z| z.norm_sqr()).sum();
                if !(r >= *rho_min) {
                    return Err(Error::Domain(format!(
                        "mass {r:e} below the guard rho_min = {rho_min:e}"
                    )));
                }
                0.5 * kappa / r
            }
        };
        let h = kinetic + potential;
        if !h.is_finite() {
            return Err(Error::Domain("non-finite Hamiltonian".into()));
        }
        Ok(h)
    }

    /// Base-space weight `δ_{k0} + k²` of the `H¹` component.
    fn h1_weight(k: i64) -> f64 {
        if k == 0 {
            1.0
        } else {
            (k * k) as f64
        }
    }

    pub fn apply_j_inv(&self, state: &FourierState) -> Result<FourierState> {
        self.check(state)?;
        let mut out = state.zeros_like();
        match self.kind() {
            ModelKind::Wave => {
                for k in state.modes() {
                    out.set(0, k, -state.get(1, k) / Self::h1_weight(k));
                    out.set(1, k, state.get(0, k));
                }
            }
            _ => {
                for k in state.modes() {
                    out.set(0, k, I * state.get(0, k) / Self::h1_weight(k));
                }
            }
        }
        Ok(out)
    }

    /// `ω(U₁, U₂) = ⟨J⁻¹U₁, U₂⟩_Y`.
    pub fn symplectic_form(&self, a: &FourierState, b: &FourierState) -> f64 {
        match self.kind() {
            ModelKind::Wave => a
                .modes()
                .map(|k| (a.get(0, k) * b.get(1, k).conj() - a.get(1, k) * b.get(0, k).conj()).re)
                .sum(),
            _ => a.modes().map(|k| (I * a.get(0, k) * b.get(0, k).conj()).re).sum(),
        }
    }

    pub fn y_inner(&self, a: &FourierState, b: &FourierState) -> f64 {
        y_inner(a, b, &self.layout)
    }

    pub fn y_norm(&self, a: &FourierState) -> f64 {
        y_norm(a, &self.layout)
    }

    /// Random state with Gevrey-type decay on the full band.
    pub fn gevrey_state<R: Rng>(&self, idx: &GevreyIndex, amplitude: f64, rng: &mut R) -> FourierState {
        gevrey_decay_state(self.n_modes(), &self.layout, idx, amplitude, self.is_real(), rng)
    }

    /// Gaussian random state supported on band `m`, real fields where required.
    pub fn random_band_state<R: Rng>(&self, m: Cutoff, scale: f64, rng: &mut R) -> FourierState {
        let mut st = self.zeros();
        for c in 0..self.n_comps() {
            for k in st.modes().collect::<Vec<_>>() {
                if !self.in_band(k, m) {
                    continue;
                }
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                st.set(c, k, Complex64::new(re, im) * scale);
            }
        }
        if self.is_real() {
            st.enforce_conjugate_symmetry();
        }
        st
    }
}

/// Real coordinates on the phase space of band `m`.
///
/// The directions are orthogonal both for the plain coefficient pairing and
/// for the base-space inner product.
#[derive(Debug, Clone)]
pub struct RealBasis {
    dirs: Vec<FourierState>,
    norms2: Vec<f64>,
}

impl RealBasis {
    pub fn new(model: &PdeModel, m: Cutoff) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let mut dirs = Vec::new();
        let kmax = model.n_modes() as i64;
        for c in 0..model.n_comps() {
            if model.is_real() {
                for k in 0..=kmax {
                    if !model.in_band(k, m) {
                        continue;
                    }
                    let mut e = model.zeros();
                    e.set(c, k, one);
                    if k == 0 {
                        dirs.push(e);
                        continue;
                    }
                    e.set(c, -k, one);
                    dirs.push(e);
                    let mut e = model.zeros();
                    e.set(c, k, I);
                    e.set(c, -k, -I);
                    dirs.push(e);
                }
            } else {
                for k in -kmax..=kmax {
                    if !model.in_band(k, m) {
                        continue;
                    }
                    for z in [one, I] {
                        let mut e = model.zeros();
                        e.set(c, k, z);
                        dirs.push(e);
                    }
                }
            }
        }
        let norms2 = dirs.iter().map(|e| e.l2_norm().powi(2)).collect();
        RealBasis { dirs, norms2 }
    }

    pub fn dim(&self) -> usize {
        self.dirs.len()
    }

    pub fn direction(&self, a: usize) -> &FourierState {
        &self.dirs[a]
    }

    pub fn to_real(&self, state: &FourierState) -> Vec<f64> {
        self.dirs
            .iter()
            .zip(&self.norms2)
            .map(|(e, n2)| {
                state
                    .data()
                    .iter()
                    .zip(e.data())
                    .map(|(x, y)| (x * y.conj()).re)
                    .sum::<f64>()
                    / n2
            })
            .collect()
    }

    pub fn from_real(&self, x: &[f64]) -> FourierState {
        let mut out = self.dirs[0].zeros_like();
        for (e, xi) in self.dirs.iter().zip(x) {
            out.axpy(*xi, e);
        }
        out
    }
}

/// Finite-difference step along `w` at `u`, scaled to the state sizes.
fn fd_step(u: &FourierState, w: &FourierState, eps0: f64) -> f64 {
    eps0 * (1.0 + u.l2_norm()) / w.l2_norm().max(1e-300)
}

/// Largest relative defect of `⟨J⁻¹DB(U)W₁, W₂⟩_Y = ⟨W₁, J⁻¹DB(U)W₂⟩_Y`
/// over random band-limited direction pairs, with `DB` from finite differences.
pub fn check_h2_selfadjoint<R: Rng>(
    model: &PdeModel,
    state: &FourierState,
    m: Cutoff,
    n_dirs: usize,
    rng: &mut R,
) -> Result<f64> {
    let u = model.project(state, m);
    let db = |w: &FourierState| -> Result<FourierState> {
        let eps = fd_step(&u, w, 1e-3);
        fd::derivative_state(|t| model.apply_b(&fd::along(&u, w, t), m), eps)
    };
    let mut worst: f64 = 0.0;
    for _ in 0..n_dirs {
        let w1 = model.random_band_state(m, 1.0, rng);
        let w2 = model.random_band_state(m, 1.0, rng);
        let g1 = model.apply_j_inv(&db(&w1)?)?;
        let g2 = model.apply_j_inv(&db(&w2)?)?;
        let lhs = model.y_inner(&g1, &w2);
        let rhs = model.y_inner(&w1, &g2);
        let scale = model.y_norm(&g1) * model.y_norm(&w2) + model.y_norm(&w1) * model.y_norm(&g2);
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(worst)
}

/// Base-space gradient of a scalar function on band `m`, by finite differences
/// along the real basis.
pub fn fd_gradient<F>(model: &PdeModel, state: &FourierState, m: Cutoff, eps0: f64, mut f: F) -> Result<FourierState>
where
    F: FnMut(&FourierState) -> Result<f64>,
{
    let basis = RealBasis::new(model, m);
    let u = model.project(state, m);
    let mut grad = model.zeros();
    for a in 0..basis.dim() {
        let e = basis.direction(a);
        let eps = fd_step(&u, e, eps0);
        let d = fd::derivative_scalar(|t| f(&fd::along(&u, e, t)), eps)?;
        let ynorm2 = model.y_inner(e, e);
        grad.axpy(d / ynorm2, e);
    }
    Ok(grad)
}

/// Relative defect `‖J⁻¹ f_m(U) - ∇H(U)‖_Y / ‖∇H(U)‖_Y` with `∇H` from
/// finite differences of the Hamiltonian on band `m`.
pub fn grad_h_consistency(model: &PdeModel, state: &FourierState, m: Cutoff) -> Result<f64> {
    let grad = fd_gradient(model, state, m, 1e-3, |x| model.hamiltonian(x))?;
    let jf = model.apply_j_inv(&model.vector_field(state, m)?)?;
    let diff = model.y_norm(&(&jf - &grad));
    let scale = model.y_norm(&grad).max(model.y_norm(&jf));
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// Amplitude of `e^{ikx}` in coefficient units: `u = a e^{ikx}` has `û_k = a√(2π)`.
pub fn plane_wave_coefficient(amplitude: f64) -> f64 {
    amplitude * (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nls(k: usize, lambda: f64) -> PdeModel {
        PdeModel::new(Nonlinearity::PowerNls { lambda, sigma: 1 }, k).unwrap()
    }

    fn wave(k: usize, pot: Potential) -> PdeModel {
        PdeModel::new(Nonlinearity::Wave(pot), k).unwrap()
    }

    #[test]
    fn a_examples() {
        let m = nls(4, 1.0);
        assert_eq!(m.apply_a(&m.zeros()).unwrap(), m.zeros());
        let mut u = m.zeros();
        u.set(0, 1, Complex64::new(1.0, 0.0));
        assert_eq!(m.apply_a(&u).unwrap().get(0, 1), Complex64::new(0.0, -1.0));

        let w = wave(4, Potential::Polynomial(vec![]));
        let mut u = w.zeros();
        u.set(0, 1, Complex64::new(1.0, 0.0));
        let au = w.apply_a(&u).unwrap();
        assert_eq!(au.get(0, 1), ZERO);
        assert_eq!(au.get(1, 1), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn b_examples() {
        let m = nls(4, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = m.random_band_state(Cutoff::Full, 1.0, &mut rng);
        assert_eq!(m.apply_b(&u, Cutoff::Full).unwrap().max_abs(), 0.0);

        // constant field u ≡ c: B = -ic|c|² at mode 0
        let m = nls(4, 1.0);
        let c = Complex64::new(0.3, -0.4);
        let mut u = m.zeros();
        u.set(0, 0, c * (2.0 * PI).sqrt());
        let b = m.apply_b(&u, Cutoff::Full).unwrap();
        let expect = -I * c * c.norm_sqr() * (2.0 * PI).sqrt();
        assert!((b.get(0, 0) - expect).norm() < 1e-14);
        assert!(b.get(0, 1).norm() < 1e-14);

        // linear force V = u²/2, u = cos x
        let w = wave(4, Potential::Polynomial(vec![0.0, 0.0, 0.5]));
        let mut u = w.zeros();
        let a = (2.0 * PI).sqrt() / 2.0;
        u.set(0, 1, Complex64::new(a, 0.0));
        u.set(0, -1, Complex64::new(a, 0.0));
        u.set(1, 0, Complex64::new(0.7, 0.0));
        let b = w.apply_b(&u, Cutoff::Full).unwrap();
        assert!((b.get(1, 1) + a).norm() < 1e-14);
        assert!((b.get(1, -1) + a).norm() < 1e-14);
        assert!((b.get(0, 0) - 0.7).norm() < 1e-15);
    }

    #[test]
    fn nonlocal_guard() {
        let m = PdeModel::new(Nonlinearity::Nonlocal { kappa: 1.0, rho_min: 1e-3 }, 4).unwrap();
        assert!(matches!(m.apply_b(&m.zeros(), Cutoff::Full), Err(Error::Domain(_))));
        assert!(matches!(m.hamiltonian(&m.zeros()), Err(Error::Domain(_))));
    }

    #[test]
    fn hamiltonian_examples() {
        let w = wave(4, Potential::Polynomial(vec![]));
        assert_eq!(w.hamiltonian(&w.zeros()).unwrap(), 0.0);
        // u = sin x: ½∫cos² = π/2
        let mut u = w.zeros();
        let a = (2.0 * PI).sqrt() / 2.0;
        u.set(0, 1, Complex64::new(0.0, -a));
        u.set(0, -1, Complex64::new(0.0, a));
        assert!((w.hamiltonian(&u).unwrap() - PI / 2.0).abs() < 1e-14);

        let m = nls(4, 0.0);
        let mut u = m.zeros();
        u.set(0, 1, Complex64::new(plane_wave_coefficient(1.0), 0.0));
        assert!((m.hamiltonian(&u).unwrap() - PI).abs() < 1e-13);
    }

    #[test]
    fn j_inverse_examples() {
        let m = nls(3, 1.0);
        let mut u = m.zeros();
        u.set(0, 1, Complex64::new(1.0, 0.0));
        assert_eq!(m.apply_j_inv(&u).unwrap().get(0, 1), I);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for model in [m, wave(3, Potential::SineGordon { gamma: 1.0 })] {
            let u = model.random_band_state(Cutoff::Full, 1.0, &mut rng);
            let j = model.apply_j_inv(&u).unwrap();
            assert!(model.y_inner(&j, &u).abs() < 1e-12);
        }
    }

    #[test]
    fn real_basis_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for model in [nls(3, 1.0), wave(3, Potential::SineGordon { gamma: 1.0 })] {
            let b = RealBasis::new(&model, Cutoff::At(4));
            let u = model.random_band_state(Cutoff::At(4), 1.0, &mut rng);
            let back = b.from_real(&b.to_real(&u));
            assert!((&back - &u).max_abs() < 1e-14);
        }
        assert_eq!(RealBasis::new(&nls(3, 1.0), Cutoff::At(4)).dim(), 10);
        assert_eq!(RealBasis::new(&wave(3, Potential::SineGordon { gamma: 1.0 }), Cutoff::At(2)).dim(), 10);
    }

    #[test]
    fn h2_selfadjoint_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = nls(6, 1.0);
        let u = m.random_band_state(Cutoff::At(4), 0.5, &mut rng);
        assert!(check_h2_selfadjoint(&m, &u, Cutoff::At(4), 5, &mut rng).unwrap() < 1e-6);
        let m0 = nls(6, 0.0);
        assert_eq!(check_h2_selfadjoint(&m0, &u, Cutoff::At(4), 3, &mut rng).unwrap(), 0.0);
        let w = wave(4, Potential::Polynomial(vec![0.0, 0.0, 0.5]));
        let u = w.random_band_state(Cutoff::Full, 0.5, &mut rng);
        assert!(check_h2_selfadjoint(&w, &u, Cutoff::Full, 5, &mut rng).unwrap() < 1e-9);
    }

    #[test]
    fn gradient_consistency_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sg = wave(6, Potential::SineGordon { gamma: 1.0 });
        assert_eq!(grad_h_consistency(&sg, &sg.zeros(), Cutoff::At(4)).unwrap(), 0.0);
        let u = sg.random_band_state(Cutoff::At(4), 0.3, &mut rng);
        assert!(grad_h_consistency(&sg, &u, Cutoff::At(4)).unwrap() < 1e-6);

        let m = nls(4, 1.0);
        let mut u = m.zeros();
        u.set(0, 1, Complex64::new(0.8, 0.2));
        assert!(grad_h_consistency(&m, &u, Cutoff::At(2)).unwrap() < 1e-6);

        let nl = PdeModel::new(Nonlinearity::Nonlocal { kappa: 0.5, rho_min: 1e-3 }, 4).unwrap();
        let mut u = nl.random_band_state(Cutoff::Full, 0.2, &mut rng);
        u.set(0, 0, Complex64::new(1.0, 0.0));
        assert!(grad_h_consistency(&nl, &u, Cutoff::Full).unwrap() < 1e-6);

        let quartic = wave(4, Potential::Polynomial(vec![0.0, 0.0, 0.5, 0.0, 0.25]));
        let u = quartic.random_band_state(Cutoff::Full, 0.3, &mut rng);
        assert!(grad_h_consistency(&quartic, &u, Cutoff::Full).unwrap() < 1e-6);
    }

    #[test]
    fn jet_first_order_is_directional_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = nls(5, 1.0);
        let u0 = m.random_band_state(Cutoff::Full, 0.5, &mut rng);
        let u1 = m.random_band_state(Cutoff::Full, 0.5, &mut rng);
        let jet = m.nonlinearity_jet(&[u0.clone(), u1.clone()], Cutoff::Full).unwrap();
        let fd = fd::derivative_state(|t| m.apply_b(&fd::along(&u0, &u1, t), Cutoff::Full), 1e-3).unwrap();
        assert!((&jet[1] - &fd).max_abs() < 1e-8 * (1.0 + fd.max_abs()));
    }
}
