//! Backward error analysis of the truncated Runge–Kutta map.
//!
//! The modified field `f̃ = Σ_j h^{j-1} f^j` is the generator whose time-`h`
//! flow reproduces `Ψ_m^h` as a formal series. Two constructions are offered.
//!
//! * [`ModifiedField`] uses the identity `h f̃ = log(Ψ*) id`, i.e.
//!   `h f̃(y) = Σ_{k≥1} (-1)^{k+1}/k Σ_i C(k,i) (-1)^{k-i} Ψ^{∘i}(y)`,
//!   with every iterate expanded exactly in `h`. No finite differences enter.
//! * [`modified_field_coefficient`] runs the classical recursion
//!   `f^j = g^j - Σ_{i≥2} 1/i! Σ_{k_1+…+k_i=j} D_{k_1}⋯D_{k_{i-1}} f^{k_i}`
//!   with finite-difference Lie derivatives and reports its noise.
//!
//! The modified Hamiltonian integrates `ω(f^j, ·)` along the segment from an
//! anchor state, `H^j(y) = ∫_0^1 ω(f^j(y_0 + t(y - y_0)), y - y_0) dt`.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::hjet::{expand_step_map, expand_step_map_jet, HJet, DEFAULT_ORDER_CAP};
use crate::models::{ModelKind, PdeModel};
use crate::ode::{integrate, ExtrapolationOptions};
use crate::quadrature::gauss_legendre_unit;
use crate::spectral::{gevrey_norm, Cutoff, FourierState, GevreyIndex};
use crate::tableau::ButcherTableau;

/// Default cap on the modified-field order.
pub const DEFAULT_N_MAX: usize = 6;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Weight of `Ψ^{∘i}` in `log(Ψ*) id` truncated after `Δ^n`.
fn log_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            (i.max(1)..=n)
                .map(|k| {
                    let sign = if (k + 1 + k - i) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binomial(k, i) / k as f64
                })
                .sum()
        })
        .collect()
}

/// Truncated modified vector field `f̃^n` on band `m`.
#[derive(Debug, Clone)]
pub struct ModifiedField<'a> {
    model: &'a PdeModel,
    tab: &'a ButcherTableau,
    n: usize,
    m: Cutoff,
}

impl<'a> ModifiedField<'a> {
    pub fn new(model: &'a PdeModel, tab: &'a ButcherTableau, n: usize, m: Cutoff) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("modified-field order must be >= 1".into()));
        }
        if n > DEFAULT_ORDER_CAP {
            return Err(Error::OrderCap {
                requested: n,
                cap: DEFAULT_ORDER_CAP,
            });
        }
        Ok(ModifiedField { model, tab, n, m })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn cutoff(&self) -> Cutoff {
        self.m
    }

    pub fn model(&self) -> &'a PdeModel {
        self.model
    }

    pub fn tableau(&self) -> &'a ButcherTableau {
        self.tab
    }

    /// `[f^1(U), …, f^n(U)]` on `P_m U`.
    pub fn coefficients(&self, u: &FourierState) -> Result<Vec<FourierState>> {
        let n = self.n;
        let y = self.model.project(u, self.m);
        let mut iterates = vec![HJet::constant(&y, n, self.m)];
        for i in 1..=n {
            let next = expand_step_map_jet(self.model, self.tab, &iterates[i - 1])?;
            iterates.push(next);
        }
        let refs: Vec<&HJet> = iterates.iter().collect();
        let log = HJet::linear_combination(&refs, &log_weights(n))?;
        let mut out = log.into_coeffs();
        out.remove(0);
        if self.model.is_real() {
            out.iter_mut().for_each(|c| c.enforce_conjugate_symmetry());
        }
        Ok(out)
    }

    /// `f̃^n(U; h) = f(U) + Σ_{j=p}^{n-1} h^j f^{j+1}(U)`.
    pub fn eval(&self, u: &FourierState, h: f64) -> Result<FourierState> {
        let coeffs = self.coefficients(u)?;
        Ok(self.assemble(&coeffs, h))
    }

    fn assemble(&self, coeffs: &[FourierState], h: f64) -> FourierState {
        let p = self.tab.order;
        let mut out = coeffs[0].clone();
        for j in p..self.n {
            out.axpy(h.powi(j as i32), &coeffs[j]);
        }
        out
    }
}

/// Flow of `f̃^n` over time `h`, by extrapolation with the given options.
pub fn modified_flow_with(
    field: &ModifiedField<'_>,
    u: &FourierState,
    h: f64,
    opts: ExtrapolationOptions,
) -> Result<FourierState> {
    let y = field.model.project(u, field.m);
    integrate(|x| field.eval(x, h), &y, h, opts)
}

/// `Φ̃^h(U)` for the resolved policy, with the default extrapolation settings.
pub fn modified_flow(
    model: &PdeModel,
    tab: &ButcherTableau,
    policy: &TruncationPolicy,
    u: &FourierState,
    h: f64,
) -> Result<FourierState> {
    let r = resolve_policy(policy, h, tab, model)?;
    let field = ModifiedField::new(model, tab, r.n, r.m)?;
    modified_flow_with(&field, u, h, ExtrapolationOptions::default())
}

/// Anchor of the Hamiltonian line integral: zero, or a unit-mass constant
/// field for the nonlocal model whose domain excludes zero.
pub fn default_anchor(model: &PdeModel) -> FourierState {
    let mut a = model.zeros();
    if model.kind() == ModelKind::NonlocalNls {
        a.set(0, 0, num_complex::Complex64::new(1.0, 0.0));
    }
    a
}

/// Modified Hamiltonian `H̃ = H + Σ_{j=p}^{n-1} h^j H^{j+1}` on band `m`.
#[derive(Debug, Clone)]
pub struct ModifiedHamiltonian<'a> {
    field: ModifiedField<'a>,
    anchor: FourierState,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    check_nodes: Vec<f64>,
    check_weights: Vec<f64>,
}

impl<'a> ModifiedHamiltonian<'a> {
    pub fn new(field: ModifiedField<'a>, anchor: FourierState) -> Self {
        let (nodes, weights) = gauss_legendre_unit(16);
        let (check_nodes, check_weights) = gauss_legendre_unit(24);
        let anchor = field.model.project(&anchor, field.m);
        ModifiedHamiltonian {
            field,
            anchor,
            nodes,
            weights,
            check_nodes,
            check_weights,
        }
    }

    pub fn field(&self) -> &ModifiedField<'a> {
        &self.field
    }

    pub fn anchor(&self) -> &FourierState {
        &self.anchor
    }

    fn line_integrals(&self, u: &FourierState, nodes: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        let model = self.field.model;
        let y = model.project(u, self.field.m);
        let dy = &y - &self.anchor;
        let mut acc = vec![0.0; self.field.n];
        if dy.max_abs() == 0.0 {
            return Ok(acc);
        }
        for (t, w) in nodes.iter().zip(weights) {
            let pt = crate::fd::along(&self.anchor, &dy, *t);
            let coeffs = self.field.coefficients(&pt)?;
            for (a, c) in acc.iter_mut().zip(&coeffs) {
                *a += w * model.symplectic_form(c, &dy);
            }
        }
        Ok(acc)
    }

    /// `[H^1(U), …, H^n(U)]`.
    pub fn coefficients(&self, u: &FourierState) -> Result<Vec<f64>> {
        self.line_integrals(u, &self.nodes, &self.weights)
    }

    fn assemble(&self, u: &FourierState, hj: &[f64], h: f64) -> Result<f64> {
        let y = self.field.model.project(u, self.field.m);
        let mut val = self.field.model.hamiltonian(&y)?;
        for j in self.field.tab.order..self.field.n {
            val += h.powi(j as i32) * hj[j];
        }
        Ok(val)
    }

    pub fn eval(&self, u: &FourierState, h: f64) -> Result<f64> {
        let hj = self.coefficients(u)?;
        self.assemble(u, &hj, h)
    }

    /// Value together with its difference from a 24-node evaluation.
    pub fn eval_checked(&self, u: &FourierState, h: f64) -> Result<(f64, f64)> {
        let v16 = self.eval(u, h)?;
        let hj = self.line_integrals(u, &self.check_nodes, &self.check_weights)?;
        let v24 = self.assemble(u, &hj, h)?;
        Ok((v16, (v16 - v24).abs()))
    }
}

pub fn modified_hamiltonian_eval(
    model: &PdeModel,
    tab: &ButcherTableau,
    policy: &TruncationPolicy,
    u: &FourierState,
    h: f64,
) -> Result<f64> {
    let r = resolve_policy(policy, h, tab, model)?;
    let field = ModifiedField::new(model, tab, r.n, r.m)?;
    ModifiedHamiltonian::new(field, default_anchor(model)).eval(u, h)
}

/// Largest relative defect of `DH̃(U)W = ⟨J⁻¹ f̃(U), W⟩_Y` over random
/// band-limited directions, with `DH̃` from finite differences.
pub fn gradient_consistency<R: Rng>(
    model: &PdeModel,
    tab: &ButcherTableau,
    policy: &TruncationPolicy,
    u: &FourierState,
    h: f64,
    n_dirs: usize,
    rng: &mut R,
) -> Result<f64> {
    let r = resolve_policy(policy, h, tab, model)?;
    let field = ModifiedField::new(model, tab, r.n, r.m)?;
    let y = model.project(u, r.m);
    let jf = model.apply_j_inv(&field.eval(&y, h)?)?;
    let ham = ModifiedHamiltonian::new(field, default_anchor(model));
    let mut worst: f64 = 0.0;
    for _ in 0..n_dirs {
        let w = model.random_band_state(r.m, 1.0, rng);
        let eps = 1e-3 * (1.0 + y.l2_norm()) / w.l2_norm();
        let d = crate::fd::derivative_scalar(|t| ham.eval(&crate::fd::along(&y, &w, t), h), eps)?;
        let pairing = model.y_inner(&jf, &w);
        let scale = model.y_norm(&jf) * model.y_norm(&w);
        if scale > 0.0 {
            worst = worst.max((d - pairing).abs() / scale);
        }
    }
    Ok(worst)
}

/// Options of the finite-difference recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionOptions {
    /// Base step of every Lie derivative.
    pub eps0: f64,
    /// Repeat the evaluation with `2 ε₀` to estimate the noise.
    pub estimate_noise: bool,
}

impl Default for RecursionOptions {
    fn default() -> Self {
        RecursionOptions {
            eps0: 2e-3,
            estimate_noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientEstimate {
    pub value: FourierState,
    /// `‖f^j(ε₀) - f^j(2ε₀)‖`, zero when not estimated.
    pub noise: f64,
    /// Set when the noise exceeds 10% of the result.
    pub noisy: bool,
}

fn state_key(u: &FourierState) -> Vec<u64> {
    u.data().iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect()
}

/// Memoised evaluation context of the recursion at one band and order.
struct Recursion<'a> {
    model: &'a PdeModel,
    tab: &'a ButcherTableau,
    m: Cutoff,
    order: usize,
    eps0: f64,
    g_cache: RefCell<HashMap<Vec<u64>, Vec<FourierState>>>,
    f_cache: RefCell<HashMap<(usize, Vec<u64>), FourierState>>,
}

impl<'a> Recursion<'a> {
    fn g(&self, j: usize, y: &FourierState) -> Result<FourierState> {
        let key = state_key(y);
        if let Some(c) = self.g_cache.borrow().get(&key) {
            return Ok(c[j].clone());
        }
        let jet = expand_step_map(self.model, self.tab, y, self.m, self.order)?.into_coeffs();
        let out = jet[j].clone();
        self.g_cache.borrow_mut().insert(key, jet);
        Ok(out)
    }

    fn f(&self, j: usize, y: &FourierState) -> Result<FourierState> {
        let key = (j, state_key(y));
        if let Some(v) = self.f_cache.borrow().get(&key) {
            return Ok(v.clone());
        }
        let mut val = self.g(j, y)?;
        let mut fact = 1.0;
        for i in 2..=j {
            fact *= i as f64;
            for ks in compositions(j, i) {
                val.axpy(-1.0 / fact, &self.nested(&ks, y)?);
            }
        }
        if self.model.is_real() {
            val.enforce_conjugate_symmetry();
        }
        self.f_cache.borrow_mut().insert(key, val.clone());
        Ok(val)
    }

    /// `(D_{k_1} ⋯ D_{k_{i-1}} f^{k_i})(y)`.
    fn nested(&self, ks: &[usize], y: &FourierState) -> Result<FourierState> {
        if ks.len() == 1 {
            return self.f(ks[0], y);
        }
        let dir = self.f(ks[0], y)?;
        crate::hjet::directional_derivative(|z| self.nested(&ks[1..], z), y, &dir, self.eps0)
    }
}

/// Ordered tuples of `parts` positive integers summing to `total`.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 1..=total.saturating_sub(parts - 1) {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `f^j(U)` by the finite-difference recursion with default options.
pub fn modified_field_coefficient(
    model: &PdeModel,
    tab: &ButcherTableau,
    j: usize,
    u: &FourierState,
    m: Cutoff,
) -> Result<CoefficientEstimate> {
    modified_field_coefficient_with(model, tab, j, u, m, RecursionOptions::default())
}

pub fn modified_field_coefficient_with(
    model: &PdeModel,
    tab: &ButcherTableau,
    j: usize,
    u: &FourierState,
    m: Cutoff,
    opts: RecursionOptions,
) -> Result<CoefficientEstimate> {
    if j == 0 {
        return Err(Error::InvalidArgument("coefficient index starts at 1".into()));
    }
    if j > DEFAULT_N_MAX {
        return Err(Error::OrderCap {
            requested: j,
            cap: DEFAULT_N_MAX,
        });
    }
    let y = model.project(u, m);
    let run = |eps0: f64| {
        Recursion {
            model,
            tab,
            m,
            order: j,
            eps0,
            g_cache: RefCell::new(HashMap::new()),
            f_cache: RefCell::new(HashMap::new()),
        }
        .f(j, &y)
    };
    let value = run(opts.eps0)?;
    let noise = if opts.estimate_noise && j > 1 {
        (&value - &run(2.0 * opts.eps0)?).l2_norm()
    } else {
        0.0
    };
    let noisy = noise > 0.1 * value.l2_norm();
    Ok(CoefficientEstimate { value, noise, noisy })
}

/// Choice of the truncation order `n` and cutoff `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationPolicy {
    Explicit { n: usize, m: Cutoff },
    /// `m(h) = (χ/(τh))^{q/(1+q)}`, `n(h) = ⌊τ^{q/(1+q)} (χ/h)^{1/(1+q)} / 4⌋`.
    Coupled { tau: f64, chi: f64, n_max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedPolicy {
    pub n: usize,
    pub m: Cutoff,
    /// Whether `n` or `m` was moved onto its admissible range.
    pub clamped: bool,
}

/// `χ = δ / (2 e η c_F)`.
pub fn chi(delta: f64, eta: f64, c_f: f64) -> f64 {
    delta / (2.0 * std::f64::consts::E * eta * c_f)
}

/// `sup ‖U‖_{Y₁} + ‖B(U)‖_Y` over sample states.
pub fn measure_c_f(model: &PdeModel, samples: &[FourierState]) -> Result<f64> {
    let y1 = GevreyIndex::new(0.0, 1.0, model.q())?;
    let mut worst: f64 = 0.0;
    for u in samples {
        let b = model.apply_b(u, Cutoff::Full)?;
        worst = worst.max(gevrey_norm(u, &y1, model.layout())? + model.y_norm(&b));
    }
    Ok(worst)
}

pub fn resolve_policy(
    policy: &TruncationPolicy,
    h: f64,
    tab: &ButcherTableau,
    model: &PdeModel,
) -> Result<ResolvedPolicy> {
    match *policy {
        TruncationPolicy::Explicit { n, m } => Ok(ResolvedPolicy { n, m, clamped: false }),
        TruncationPolicy::Coupled { tau, chi, n_max } => {
            if !(h > 0.0) || !(tau > 0.0) || !(chi > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "coupled policy needs h, tau, chi > 0 (h = {h}, tau = {tau}, chi = {chi})"
                )));
            }
            let q = model.q();
            let e = q / (1.0 + q);
            // guard against representation error pushing exact values across an integer
            let m_real = (chi / (tau * h)).powf(e);
            let n_real = tau.powf(e) * (chi / h).powf(1.0 / (1.0 + q)) / 4.0;
            let m_raw = (m_real * (1.0 - 1e-12)).ceil().max(0.0) as u64;
            let n_raw = (n_real * (1.0 + 1e-12)).floor().max(0.0) as usize;
            let p = tab.order;
            let band_max = model.band_max().max(1);
            let m = m_raw.clamp(1, band_max);
            let n_hi = n_max.max(p + 1);
            let n = n_raw.clamp(p + 1, n_hi);
            Ok(ResolvedPolicy {
                n,
                m: Cutoff::At(m),
                clamped: m != m_raw || n != n_raw,
            })
        }
    }
}
