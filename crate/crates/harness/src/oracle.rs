//! Independent constructions of `f³` and `H³` on one-mode truncations.
//!
//! Both systems are coded here from scratch in real coordinates and share
//! nothing with the library's modified-field code. The modified field is
//! recovered from the numerical map itself: its Taylor coefficients in `h`
//! are fitted from evaluations at many step sizes and matched against the
//! expansion of an exact flow,
//!
//! ```text
//! g² = f² + ½ f′f
//! g³ = f³ + ½ (f′f² + f²′f) + ⅙ (f″(f,f) + f′f′f).
//! ```

use gevrey_bea::quadrature::gauss_legendre_unit;
use gevrey_bea::tableau::ButcherTableau;
use nalgebra::{DMatrix, DVector};

/// Fits `Σ_{j=1}^{deg} c_j h^j` to `values(h) - values(0)` on symmetric
/// Chebyshev points in `[-h0, h0]` and returns `c_1..c_deg`.
fn taylor_fit<const D: usize>(mut values: impl FnMut(f64) -> [f64; D], h0: f64, deg: usize, points: usize) -> Vec<[f64; D]> {
    let base = values(0.0);
    let hs: Vec<f64> = (0..points)
        .map(|i| h0 * (std::f64::consts::PI * (i as f64 + 0.5) / points as f64).cos())
        .collect();
    // scaled variable s = h / h0 keeps the Vandermonde matrix well conditioned
    let v = DMatrix::from_fn(points, deg, |i, j| (hs[i] / h0).powi(j as i32 + 1));
    let svd = v.svd(true, true);
    let samples: Vec<[f64; D]> = hs.iter().map(|&h| values(h)).collect();
    let mut out = vec![[0.0; D]; deg];
    for d in 0..D {
        let rhs = DVector::from_fn(points, |i, _| samples[i][d] - base[d]);
        let c = svd.solve(&rhs, 1e-14).expect("least-squares solve");
        for j in 0..deg {
            out[j][d] = c[j] / h0.powi(j as i32 + 1);
        }
    }
    out
}

fn axpy<const D: usize>(y: &[f64; D], a: f64, x: &[f64; D]) -> [f64; D] {
    std::array::from_fn(|i| y[i] + a * x[i])
}

fn norm<const D: usize>(x: &[f64; D]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `DF(y) d` by a fourth-order central stencil.
fn directional<const D: usize>(mut f: impl FnMut(&[f64; D]) -> [f64; D], y: &[f64; D], d: &[f64; D], eps: f64) -> [f64; D] {
    let e = eps / norm(d).max(1e-300);
    let p1 = f(&axpy(y, e, d));
    let m1 = f(&axpy(y, -e, d));
    let p2 = f(&axpy(y, 2.0 * e, d));
    let m2 = f(&axpy(y, -2.0 * e, d));
    std::array::from_fn(|i| (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * e))
}

/// `D²F(y)(d, d)` by a fourth-order central stencil.
fn second_directional<const D: usize>(mut f: impl FnMut(&[f64; D]) -> [f64; D], y: &[f64; D], d: &[f64; D], eps: f64) -> [f64; D] {
    let e = eps / norm(d).max(1e-300);
    let c = f(y);
    let p1 = f(&axpy(y, e, d));
    let m1 = f(&axpy(y, -e, d));
    let p2 = f(&axpy(y, 2.0 * e, d));
    let m2 = f(&axpy(y, -2.0 * e, d));
    std::array::from_fn(|i| (16.0 * (p1[i] + m1[i]) - (p2[i] + m2[i]) - 30.0 * c[i]) / (12.0 * e * e))
}

/// A Runge–Kutta step on `ẏ = f(y)` with stages solved by plain iteration.
fn rk_step<const D: usize>(f: &impl Fn(&[f64; D]) -> [f64; D], tab: &ButcherTableau, y: &[f64; D], h: f64) -> [f64; D] {
    let s = tab.stages();
    let mut k: Vec<[f64; D]> = vec![f(y); s];
    for _ in 0..500 {
        let next: Vec<[f64; D]> = (0..s)
            .map(|i| {
                let mut w = *y;
                for j in 0..s {
                    w = axpy(&w, h * tab.a[i][j], &k[j]);
                }
                f(&w)
            })
            .collect();
        let change = next
            .iter()
            .zip(&k)
            .map(|(a, b)| norm(&std::array::from_fn::<f64, D, _>(|i| a[i] - b[i])))
            .fold(0.0, f64::max);
        k = next;
        if change <= 1e-17 * (1.0 + norm(&k[0])) {
            break;
        }
    }
    let mut out = *y;
    for (bi, ki) in tab.b.iter().zip(&k) {
        out = axpy(&out, h * bi, ki);
    }
    out
}

/// Brute-force `f¹, f², f³` of an RK method applied to `ẏ = f(y)`.
pub struct BruteForce<'a, const D: usize, F: Fn(&[f64; D]) -> [f64; D]> {
    pub field: F,
    pub tab: &'a ButcherTableau,
    /// Half-width of the step-size interval of the fit.
    pub h0: f64,
    pub degree: usize,
    pub points: usize,
    /// Base step of the finite differences in `y`.
    pub eps: f64,
}

impl<'a, const D: usize, F: Fn(&[f64; D]) -> [f64; D]> BruteForce<'a, D, F> {
    pub fn new(field: F, tab: &'a ButcherTableau) -> Self {
        BruteForce {
            field,
            tab,
            h0: 0.1,
            degree: 12,
            points: 25,
            eps: 1e-3,
        }
    }

    /// Taylor coefficients `g¹, g², g³` of `Ψ^h(y)`.
    pub fn map_coefficients(&self, y: &[f64; D]) -> [[f64; D]; 3] {
        let g = taylor_fit(|h| rk_step(&self.field, self.tab, y, h), self.h0, self.degree, self.points);
        [g[0], g[1], g[2]]
    }

    fn f2(&self, y: &[f64; D]) -> [f64; D] {
        let g = self.map_coefficients(y);
        let f = (self.field)(y);
        let ff = directional(&self.field, y, &f, self.eps);
        axpy(&g[1], -0.5, &ff)
    }

    /// `f³(y)` by term matching.
    pub fn f3(&self, y: &[f64; D]) -> [f64; D] {
        let g = self.map_coefficients(y);
        let f = (self.field)(y);
        let ff = directional(&self.field, y, &f, self.eps);
        let f2 = axpy(&g[1], -0.5, &ff);
        let fff = directional(&self.field, y, &ff, self.eps);
        let f_ff = second_directional(&self.field, y, &f, self.eps);
        let f_f2 = directional(&self.field, y, &f2, self.eps);
        let f2_f = directional(|x| self.f2(x), y, &f, self.eps);
        let mut out = g[2];
        out = axpy(&out, -1.0 / 6.0, &f_ff);
        out = axpy(&out, -1.0 / 6.0, &fff);
        out = axpy(&out, -0.5, &f_f2);
        axpy(&out, -0.5, &f2_f)
    }

    /// `H³(y) = ∫_0^1 ω(f³(t y), y) dt` for a constant bilinear form `ω`.
    pub fn h3(&self, y: &[f64; D], omega: impl Fn(&[f64; D], &[f64; D]) -> f64) -> f64 {
        let (nodes, weights) = gauss_legendre_unit(16);
        nodes
            .iter()
            .zip(&weights)
            .map(|(t, w)| w * omega(&self.f3(&std::array::from_fn(|i| t * y[i])), y))
            .sum()
    }
}

/// Cubic NLS restricted to the single mode `k = 1`: `ċ = -i(1 + λ|c|²/(2π)) c`
/// in coordinates `(Re c, Im c)`.
pub fn nls_single_mode_field(lambda: f64) -> impl Fn(&[f64; 2]) -> [f64; 2] {
    move |y| {
        let w = 1.0 + lambda * (y[0] * y[0] + y[1] * y[1]) / (2.0 * std::f64::consts::PI);
        [w * y[1], -w * y[0]]
    }
}

/// Closed form of `f³` for the implicit midpoint rule on the single NLS mode.
///
/// The map is a rotation `c ↦ e^{-iθ}c` with `tan(θ/2) = (h/2) ω(|c|² cos²(θ/2))`,
/// `ω(r) = 1 + βr`, `β = λ/(2π)`. Expanding `θ/h = a₀ + a₂h² + …` gives
/// `a₀ = ω₀ = ω(|c|²)` and `a₂ = -ω₀³/12 - β|c|²ω₀²/4`, so `f³ = -i a₂ c`.
pub fn nls_midpoint_f3_closed_form(lambda: f64, y: &[f64; 2]) -> [f64; 2] {
    let beta = lambda / (2.0 * std::f64::consts::PI);
    let r = y[0] * y[0] + y[1] * y[1];
    let w0 = 1.0 + beta * r;
    let a2 = -w0.powi(3) / 12.0 - beta * r * w0 * w0 / 4.0;
    // -i a2 (y0 + i y1) = a2 y1 - i a2 y0
    [a2 * y[1], -a2 * y[0]]
}

/// Sine-Gordon `u_tt = u_xx - γ sin u` on the single real mode `|k| = 1`
/// with zero mean, in coordinates `(Re û₁, Im û₁, Re v̂₁, Im v̂₁)`.
///
/// The force coefficient `(sin u)^₁` is a trapezoid sum on `quad` points.
pub fn sine_gordon_single_mode_field(gamma: f64, quad: usize) -> impl Fn(&[f64; 4]) -> [f64; 4] {
    use std::f64::consts::PI;
    let scale = 1.0 / (2.0 * PI).sqrt();
    move |y| {
        let (mut sr, mut si) = (0.0, 0.0);
        for j in 0..quad {
            let x = 2.0 * PI * j as f64 / quad as f64;
            let (sx, cx) = x.sin_cos();
            // u = 2 Re(û₁ e^{ix}) / √(2π)
            let u = 2.0 * scale * (y[0] * cx - y[1] * sx);
            let s = u.sin();
            sr += s * cx;
            si -= s * sx;
        }
        let w = scale * 2.0 * PI / quad as f64;
        [y[2], y[3], -y[0] - gamma * w * sr, -y[1] - gamma * w * si]
    }
}
