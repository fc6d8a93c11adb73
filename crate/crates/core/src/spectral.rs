//! Fourier representation of periodic fields on the circle `[0, 2π)`.
//!
//! A field is stored through its coefficients on the symmetric band
//! `k ∈ {-K, …, K}` under the normalisation
//! `u(x) = (2π)^{-1/2} Σ_k û_k e^{ikx}`, so that `∫|u|² dx = Σ_k |û_k|²`.
//!
//! Norms follow the Gevrey scale built on the spectrum of the model's linear
//! operator: a mode `k ≠ 0` with `|A|`-eigenvalue `μ_k` carries the weight
//! `μ_k^{2ℓ} e^{2τ μ_k^{1/q}} |k|^{2o_c}` where `o_c` is the Sobolev offset of
//! component `c` in the base space, and the zero mode is unweighted.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// How the modulus of the `|A|`-eigenvalue depends on the mode index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spectrum {
    /// `μ_k = |k|` (wave equation, plain scalar fields).
    Linear,
    /// `μ_k = k²` (Schrödinger-type equations).
    Quadratic,
}

impl Spectrum {
    pub fn eigenvalue(self, k: i64) -> u64 {
        let a = k.unsigned_abs();
        match self {
            Spectrum::Linear => a,
            Spectrum::Quadratic => a * a,
        }
    }
}

/// Galerkin cutoff measured in `|A|`-eigenvalue units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cutoff {
    /// Keep the full working band.
    Full,
    /// Keep modes with `μ_k ≤ m`.
    At(u64),
}

impl Cutoff {
    pub fn contains(self, spectrum: Spectrum, k: i64) -> bool {
        match self {
            Cutoff::Full => true,
            Cutoff::At(m) => spectrum.eigenvalue(k) <= m,
        }
    }

    /// Smaller of two cutoffs (`P_m P_m' = P_min(m, m')`).
    pub fn min(self, other: Cutoff) -> Cutoff {
        match (self, other) {
            (Cutoff::Full, c) | (c, Cutoff::Full) => c,
            (Cutoff::At(a), Cutoff::At(b)) => Cutoff::At(a.min(b)),
        }
    }

    /// Largest mode index `|k| ≤ n_modes` retained by this cutoff.
    pub fn max_mode(self, spectrum: Spectrum, n_modes: usize) -> usize {
        (0..=n_modes)
            .rev()
            .find(|&k| self.contains(spectrum, k as i64))
            .unwrap_or(0)
    }
}

/// Physical grid and FFT plans for one band.
#[derive(Clone)]
pub struct FourierGrid {
    n_modes: usize,
    n_phys: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FourierGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierGrid")
            .field("n_modes", &self.n_modes)
            .field("n_phys", &self.n_phys)
            .finish()
    }
}

impl PartialEq for FourierGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_modes == other.n_modes && self.n_phys == other.n_phys
    }
}

impl FourierGrid {
    pub fn new(n_modes: usize, n_phys: usize) -> Result<Self> {
        if n_phys < 2 * n_modes + 1 {
            return Err(Error::InvalidArgument(format!(
                "n_phys = {n_phys} cannot resolve the band |k| <= {n_modes}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(FourierGrid {
            n_modes,
            n_phys,
            forward: planner.plan_fft_forward(n_phys),
            inverse: planner.plan_fft_inverse(n_phys),
        })
    }

    /// Grid large enough that products of `degree + 1` band-limited factors
    /// are projected back onto the band without aliasing.
    pub fn dealiased(n_modes: usize, degree: usize) -> Result<Self> {
        let need = ((degree + 1) * n_modes + 1).max(2 * n_modes + 1).max(8);
        Self::new(n_modes, need.next_power_of_two())
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_phys(&self) -> usize {
        self.n_phys
    }

    pub fn width(&self) -> usize {
        2 * self.n_modes + 1
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_phys)
            .map(|j| 2.0 * PI * j as f64 / self.n_phys as f64)
            .collect()
    }

    /// Weight of the trapezoidal rule on the grid.
    pub fn quadrature_weight(&self) -> f64 {
        2.0 * PI / self.n_phys as f64
    }

    /// Band coefficients (`2K + 1` entries, `k = -K..=K`) to grid values.
    pub fn to_physical(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(coeffs.len(), self.width());
        let n = self.n_phys;
        let k_max = self.n_modes as i64;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (i, c) in coeffs.iter().enumerate() {
            let k = i as i64 - k_max;
            buf[k.rem_euclid(n as i64) as usize] = *c;
        }
        self.inverse.process(&mut buf);
        let s = 1.0 / (2.0 * PI).sqrt();
        for v in &mut buf {
            *v *= s;
        }
        buf
    }

    /// Grid values to band coefficients; modes outside the band are dropped.
    pub fn from_physical(&self, values: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.n_phys);
        let n = self.n_phys;
        let mut buf = values.to_vec();
        self.forward.process(&mut buf);
        let s = (2.0 * PI).sqrt() / n as f64;
        let k_max = self.n_modes as i64;
        (-k_max..=k_max)
            .map(|k| buf[k.rem_euclid(n as i64) as usize] * s)
            .collect()
    }
}

/// Complex Fourier coefficients of a (possibly multi-component) field.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierState {
    n_modes: usize,
    n_comps: usize,
    data: Vec<Complex64>,
}

impl FourierState {
    pub fn zeros(n_modes: usize, n_comps: usize) -> Self {
        FourierState {
            n_modes,
            n_comps,
            data: vec![Complex64::new(0.0, 0.0); n_comps * (2 * n_modes + 1)],
        }
    }

    pub fn from_components(n_modes: usize, comps: Vec<Vec<Complex64>>) -> Result<Self> {
        let width = 2 * n_modes + 1;
        if comps.is_empty() || comps.iter().any(|c| c.len() != width) {
            return Err(Error::InvalidArgument(format!(
                "components must be non-empty with {width} coefficients each"
            )));
        }
        let n_comps = comps.len();
        Ok(FourierState {
            n_modes,
            n_comps,
            data: comps.into_iter().flatten().collect(),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.n_modes, self.n_comps)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_comps(&self) -> usize {
        self.n_comps
    }

    pub fn width(&self) -> usize {
        2 * self.n_modes + 1
    }

    fn index(&self, c: usize, k: i64) -> usize {
        debug_assert!(c < self.n_comps && k.unsigned_abs() as usize <= self.n_modes);
        c * self.width() + (k + self.n_modes as i64) as usize
    }

    pub fn get(&self, c: usize, k: i64) -> Complex64 {
        self.data[self.index(c, k)]
    }

    pub fn set(&mut self, c: usize, k: i64, v: Complex64) {
        let i = self.index(c, k);
        self.data[i] = v;
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let w = self.width();
        &self.data[c * w..(c + 1) * w]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let w = self.width();
        &mut self.data[c * w..(c + 1) * w]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> {
        let k = self.n_modes as i64;
        -k..=k
    }

    pub fn same_shape(&self, other: &FourierState) -> bool {
        self.n_modes == other.n_modes && self.n_comps == other.n_comps
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &FourierState) {
        debug_assert!(self.same_shape(other));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += y * a;
        }
    }

    pub fn scaled(&self, a: f64) -> FourierState {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= a);
        out
    }

    pub fn scaled_complex(&self, a: Complex64) -> FourierState {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= a);
        out
    }

    /// Euclidean norm of the raw coefficient vector.
    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest violation of `û_{-k} = conj(û_k)` over all components.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..self.n_comps {
            for k in 0..=self.n_modes as i64 {
                let d = self.get(c, -k) - self.get(c, k).conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// Replace the state by the coefficients of its real part.
    pub fn enforce_conjugate_symmetry(&mut self) {
        for c in 0..self.n_comps {
            for k in 0..=self.n_modes as i64 {
                let avg = (self.get(c, k) + self.get(c, -k).conj()) * 0.5;
                self.set(c, k, avg);
                self.set(c, -k, avg.conj());
            }
        }
    }

    /// Copy onto a band of a different width, dropping or zero-filling modes.
    pub fn resized(&self, n_modes: usize) -> FourierState {
        let mut out = FourierState::zeros(n_modes, self.n_comps);
        let k_common = self.n_modes.min(n_modes) as i64;
        for c in 0..self.n_comps {
            for k in -k_common..=k_common {
                out.set(c, k, self.get(c, k));
            }
        }
        out
    }
}

impl Add<&FourierState> for &FourierState {
    type Output = FourierState;
    fn add(self, rhs: &FourierState) -> FourierState {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub<&FourierState> for &FourierState {
    type Output = FourierState;
    fn sub(self, rhs: &FourierState) -> FourierState {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&FourierState> for FourierState {
    fn add_assign(&mut self, rhs: &FourierState) {
        debug_assert!(self.same_shape(rhs));
        for (x, y) in self.data.iter_mut().zip(&rhs.data) {
            *x += y;
        }
    }
}

impl SubAssign<&FourierState> for FourierState {
    fn sub_assign(&mut self, rhs: &FourierState) {
        debug_assert!(self.same_shape(rhs));
        for (x, y) in self.data.iter_mut().zip(&rhs.data) {
            *x -= y;
        }
    }
}

impl Neg for &FourierState {
    type Output = FourierState;
    fn neg(self) -> FourierState {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &FourierState {
    type Output = FourierState;
    fn mul(self, rhs: f64) -> FourierState {
        self.scaled(rhs)
    }
}

/// Gevrey index `(τ, ℓ, q)` of a weighted norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GevreyIndex {
    pub tau: f64,
    pub ell: f64,
    pub q: f64,
}

impl GevreyIndex {
    pub fn new(tau: f64, ell: f64, q: f64) -> Result<Self> {
        if !(tau >= 0.0) {
            return Err(Error::InvalidArgument(format!("tau must be >= 0, got {tau}")));
        }
        if !(ell >= 0.0) {
            return Err(Error::InvalidArgument(format!("ell must be >= 0, got {ell}")));
        }
        if !(q > 0.0) {
            return Err(Error::InvalidArgument(format!("q must be > 0, got {q}")));
        }
        Ok(GevreyIndex { tau, ell, q })
    }

    /// Base space `Y = Y_{0,0}`.
    pub fn base(q: f64) -> Self {
        GevreyIndex { tau: 0.0, ell: 0.0, q }
    }
}

/// Per-component weighting of the base space together with the spectrum
/// convention used for projectors and Gevrey weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NormLayout {
    pub spectrum: Spectrum,
    /// Sobolev offset `o_c` of each component in the base space.
    pub offsets: Vec<f64>,
}

impl NormLayout {
    /// Scalar `L²`-based layout with `μ_k = |k|`.
    pub fn plain() -> Self {
        NormLayout {
            spectrum: Spectrum::Linear,
            offsets: vec![0.0],
        }
    }

    pub fn weight(&self, c: usize, k: i64, idx: &GevreyIndex) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let mu = self.spectrum.eigenvalue(k) as f64;
        let ak = k.unsigned_abs() as f64;
        mu.powf(2.0 * idx.ell) * ak.powf(2.0 * self.offsets[c]) * (2.0 * idx.tau * mu.powf(1.0 / idx.q)).exp()
    }

    fn check(&self, state: &FourierState) -> Result<()> {
        if state.n_comps() != self.offsets.len() {
            return Err(Error::InvalidArgument(format!(
                "state has {} components, layout expects {}",
                state.n_comps(),
                self.offsets.len()
            )));
        }
        Ok(())
    }
}

/// `‖U‖_{τ,ℓ}` on the layout's Gevrey scale.
pub fn gevrey_norm(state: &FourierState, idx: &GevreyIndex, layout: &NormLayout) -> Result<f64> {
    if idx.tau < 0.0 {
        return Err(Error::InvalidArgument(format!("negative tau {}", idx.tau)));
    }
    layout.check(state)?;
    let mut acc = 0.0;
    for c in 0..state.n_comps() {
        for k in state.modes() {
            let z = state.get(c, k);
            if z.norm_sqr() > 0.0 {
                acc += layout.weight(c, k, idx) * z.norm_sqr();
            }
        }
    }
    Ok(acc.sqrt())
}

/// Real inner product of the base space `Y`.
pub fn y_inner(a: &FourierState, b: &FourierState, layout: &NormLayout) -> f64 {
    debug_assert!(a.same_shape(b));
    let base = GevreyIndex::base(1.0);
    let mut acc = 0.0;
    for c in 0..a.n_comps() {
        for k in a.modes() {
            acc += layout.weight(c, k, &base) * (a.get(c, k) * b.get(c, k).conj()).re;
        }
    }
    acc
}

/// Norm of the base space `Y`.
pub fn y_norm(state: &FourierState, layout: &NormLayout) -> f64 {
    y_inner(state, state, layout).max(0.0).sqrt()
}

/// Spectral projector `P_m`: zero every mode with `μ_k > m`.
pub fn project(state: &FourierState, m: Cutoff, spectrum: Spectrum) -> FourierState {
    let mut out = state.clone();
    if let Cutoff::At(_) = m {
        for c in 0..out.n_comps() {
            for k in state.modes() {
                if !m.contains(spectrum, k) {
                    out.set(c, k, Complex64::new(0.0, 0.0));
                }
            }
        }
    }
    out
}

/// `|A|^p U`: every mode scaled by `μ_k^p`.
pub fn abs_a_power(state: &FourierState, p: u32, spectrum: Spectrum) -> FourierState {
    let mut out = state.clone();
    for c in 0..out.n_comps() {
        for k in state.modes() {
            let mu = spectrum.eigenvalue(k) as f64;
            out.set(c, k, state.get(c, k) * mu.powi(p as i32));
        }
    }
    out
}

/// Both sides of `‖Q_m U‖_Y ≤ m^{-ℓ} e^{-τ m^{1/q}} ‖U‖_{τ,ℓ}`.
pub fn tail_bound_check(
    state: &FourierState,
    idx: &GevreyIndex,
    layout: &NormLayout,
    m: u64,
) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::InvalidArgument("tail bound needs m >= 1".into()));
    }
    let full = gevrey_norm(state, idx, layout)?;
    let tail = state - &project(state, Cutoff::At(m), layout.spectrum);
    let lhs = gevrey_norm(&tail, &GevreyIndex::base(idx.q), layout)?;
    let mf = m as f64;
    let rhs = mf.powf(-idx.ell) * (-idx.tau * mf.powf(1.0 / idx.q)).exp() * full;
    Ok((lhs, rhs))
}

/// Upper bound `(pq / (e(σ-τ)))^{pq}` on `‖A^p‖` from `Y_{σ,ℓ}` to `Y_{τ,ℓ}`.
pub fn operator_power_bound(sigma: f64, tau: f64, p: u32, q: f64) -> Result<f64> {
    if !(sigma > tau) {
        return Err(Error::InvalidArgument(format!(
            "need sigma > tau, got sigma = {sigma}, tau = {tau}"
        )));
    }
    if p == 0 {
        return Ok(1.0);
    }
    let pq = p as f64 * q;
    Ok((pq / (std::f64::consts::E * (sigma - tau))).powf(pq))
}

/// Random-phase state with `|û_{c,k}| = amplitude · e^{-τ μ_k^{1/q}} (1+|k|)^{-ℓ}`.
///
/// With `real = true` the coefficients are made conjugate-symmetric so that
/// every component is a real field.
pub fn gevrey_decay_state<R: Rng>(
    n_modes: usize,
    layout: &NormLayout,
    idx: &GevreyIndex,
    amplitude: f64,
    real: bool,
    rng: &mut R,
) -> FourierState {
    let n_comps = layout.offsets.len();
    let mut st = FourierState::zeros(n_modes, n_comps);
    for c in 0..n_comps {
        for k in st.modes() {
            if real && k < 0 {
                continue;
            }
            let mu = layout.spectrum.eigenvalue(k) as f64;
            let mag = amplitude * (-idx.tau * mu.powf(1.0 / idx.q)).exp()
                * (1.0 + k.unsigned_abs() as f64).powf(-idx.ell);
            let phase = if real && k == 0 {
                if rng.random::<bool>() {
                    0.0
                } else {
                    PI
                }
            } else {
                rng.random_range(0.0..2.0 * PI)
            };
            st.set(c, k, Complex64::from_polar(mag, phase));
        }
        if real {
            for k in 1..=n_modes as i64 {
                let v = st.get(c, k).conj();
                st.set(c, -k, v);
            }
        }
    }
    st
}
