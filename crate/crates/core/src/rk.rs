//! Implicit Runge–Kutta stepping of the truncated system `U' = AU + P_m B(U)`.
//!
//! Stages are solved in the resolvent form
//! `W = (I - h a⊗A)⁻¹ (𝟙U + h a B(W))`, where the linear solve is exact and
//! mode-diagonal, and the step is assembled as
//! `Ψ(U) = S(hA)U + h bᵀ(I - h a⊗A)⁻¹ B(W)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fd;
use crate::models::{PdeModel, RealBasis};
use crate::spectral::{Cutoff, FourierState};
use crate::tableau::{condition_estimate, ButcherTableau};

const POLE_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StageScheme {
    #[default]
    FixedPoint,
    /// Newton iteration with a dense Jacobian in real band coordinates.
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSolveConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub scheme: StageScheme,
    /// Relaxation factor of the fixed-point update, in `(0, 1]`.
    pub damping: f64,
}

impl Default for StageSolveConfig {
    fn default() -> Self {
        StageSolveConfig {
            tol: 1e-12,
            max_iter: 200,
            scheme: StageScheme::FixedPoint,
            damping: 1.0,
        }
    }
}

impl StageSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!("invalid stage solver settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageVector {
    pub stages: Vec<FourierState>,
    pub iterations: usize,
    pub residual: f64,
}

/// Per-mode factorisations for one `(h, m)`.
#[derive(Debug, Clone)]
struct ModeBlock {
    k: i64,
    /// `(I - h a⊗A_k)⁻¹`, size `sc × sc`, index `stage * c + comp`.
    inv: DMatrix<Complex64>,
    /// `S(hA_k)`, size `c × c`.
    stab: DMatrix<Complex64>,
    /// `(bᵀ⊗I) (I - h a⊗A_k)⁻¹`, size `c × sc`.
    update: DMatrix<Complex64>,
}

/// Runge–Kutta map `Ψ_m^h` with cached mode blocks.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    model: &'a PdeModel,
    tab: &'a ButcherTableau,
    h: f64,
    cutoff: Cutoff,
    cfg: StageSolveConfig,
    blocks: Vec<ModeBlock>,
}

fn symbol_matrix(model: &PdeModel, k: i64) -> DMatrix<Complex64> {
    let c = model.n_comps();
    DMatrix::from_row_slice(c, c, &model.a_symbol(k))
}

impl<'a> Stepper<'a> {
    pub fn new(
        model: &'a PdeModel,
        tab: &'a ButcherTableau,
        h: f64,
        cutoff: Cutoff,
        cfg: StageSolveConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if !h.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite step {h}")));
        }
        let s = tab.stages();
        let c = model.n_comps();
        let n = model.n_modes() as i64;
        let mut blocks = Vec::new();
        for k in -n..=n {
            if !model.in_band(k, cutoff) {
                continue;
            }
            let ak = symbol_matrix(model, k);
            let l = DMatrix::from_fn(s * c, s * c, |r, q| {
                let (i, ci) = (r / c, r % c);
                let (j, cj) = (q / c, q % c);
                let id = if r == q { 1.0 } else { 0.0 };
                Complex64::new(id, 0.0) - ak[(ci, cj)] * (h * tab.a[i][j])
            });
            if condition_estimate(&l) > POLE_CONDITION {
                return Err(Error::Pole(format!("stage block for mode {k} is singular at h = {h}")));
            }
            let inv = l
                .try_inverse()
                .ok_or_else(|| Error::Pole(format!("stage block for mode {k} is singular at h = {h}")))?;
            let bt = DMatrix::from_fn(c, s * c, |ci, q| {
                if q % c == ci {
                    Complex64::new(tab.b[q / c], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            let update = &bt * &inv;
            let ones_z = DMatrix::from_fn(s * c, c, |r, cj| ak[(r % c, cj)] * h);
            let stab = DMatrix::identity(c, c) + &update * ones_z;
            blocks.push(ModeBlock { k, inv, stab, update });
        }
        Ok(Stepper {
            model,
            tab,
            h,
            cutoff,
            cfg,
            blocks,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn model(&self) -> &PdeModel {
        self.model
    }

    pub fn tableau(&self) -> &ButcherTableau {
        self.tab
    }

    fn stage_norm(&self, w: &[FourierState]) -> f64 {
        w.iter().map(|x| self.model.y_inner(x, x)).sum::<f64>().sqrt()
    }

    /// `Π(W) = (I - h a⊗A)⁻¹ (𝟙U + h a B(W))` from precomputed `B(W^j)`.
    fn resolvent_apply(&self, u: &FourierState, bw: Option<&[FourierState]>) -> Vec<FourierState> {
        let s = self.tab.stages();
        let c = self.model.n_comps();
        let mut out = vec![self.model.zeros(); s];
        let mut rhs = DVector::from_element(s * c, Complex64::new(0.0, 0.0));
        for blk in &self.blocks {
            for i in 0..s {
                for ci in 0..c {
                    let mut v = u.get(ci, blk.k);
                    if let Some(bw) = bw {
                        for j in 0..s {
                            v += bw[j].get(ci, blk.k) * (self.h * self.tab.a[i][j]);
                        }
                    }
                    rhs[i * c + ci] = v;
                }
            }
            let w = &blk.inv * &rhs;
            for i in 0..s {
                for ci in 0..c {
                    out[i].set(ci, blk.k, w[i * c + ci]);
                }
            }
        }
        out
    }

    fn eval_b(&self, w: &[FourierState]) -> Result<Vec<FourierState>> {
        w.iter().map(|x| self.model.apply_b(x, self.cutoff)).collect()
    }

    pub fn solve_stages(&self, u: &FourierState) -> Result<StageVector> {
        let u = self.model.project(u, self.cutoff);
        let scale = self.model.y_norm(&u).max(1.0);
        let target = self.cfg.tol * scale;
        let mut w = self.resolvent_apply(&u, None);
        match self.cfg.scheme {
            StageScheme::FixedPoint => self.fixed_point(&u, &mut w, target).map(|(iterations, residual)| StageVector {
                stages: w,
                iterations,
                residual,
            }),
            StageScheme::Newton => self.newton(&u, &mut w, target).map(|(iterations, residual)| StageVector {
                stages: w,
                iterations,
                residual,
            }),
        }
    }

    fn fixed_point(&self, u: &FourierState, w: &mut Vec<FourierState>, target: f64) -> Result<(usize, f64)> {
        let theta = self.cfg.damping;
        let mut prev = f64::INFINITY;
        let mut residual = f64::INFINITY;
        for it in 1..=self.cfg.max_iter {
            let bw = self.eval_b(w)?;
            let next = self.resolvent_apply(u, Some(&bw));
            let diff: Vec<FourierState> = next.iter().zip(w.iter()).map(|(a, b)| a - b).collect();
            residual = self.stage_norm(&diff);
            if !residual.is_finite() {
                break;
            }
            for (wi, di) in w.iter_mut().zip(&diff) {
                wi.axpy(theta, di);
            }
            // accept when converged, or when rounding stalls the iteration just above the target
            if residual <= target || (residual <= 100.0 * target && residual > 0.9 * prev) {
                return Ok((it, residual));
            }
            prev = residual;
        }
        Err(Error::Convergence {
            iterations: self.cfg.max_iter,
            residual,
        })
    }

    fn newton(&self, u: &FourierState, w: &mut [FourierState], target: f64) -> Result<(usize, f64)> {
        let s = self.tab.stages();
        let basis = RealBasis::new(self.model, self.cutoff);
        let d = basis.dim();
        let mut residual = f64::INFINITY;
        for it in 1..=self.cfg.max_iter {
            let bw = self.eval_b(w)?;
            let pi = self.resolvent_apply(u, Some(&bw));
            let g: Vec<FourierState> = w.iter().zip(&pi).map(|(a, b)| a - b).collect();
            residual = self.stage_norm(&g);
            if residual <= target {
                return Ok((it, residual));
            }
            if !residual.is_finite() {
                break;
            }
            let mut jac = DMatrix::<f64>::zeros(s * d, s * d);
            for l in 0..s {
                for a in 0..d {
                    let e = basis.direction(a);
                    let db = self.model.nonlinearity_jet(&[w[l].clone(), e.clone()], self.cutoff)?;
                    let mut x = vec![self.model.zeros(); s];
                    x[l] = db[1].clone();
                    let zero = self.model.zeros();
                    // DΠ(W)V = (I - h a⊗A)⁻¹ h a X; the 𝟙U part is absent for a derivative
                    let dpi = self.resolvent_apply(&zero, Some(&x));
                    let col = l * d + a;
                    for i in 0..s {
                        let xi = basis.to_real(&dpi[i]);
                        for (r, v) in xi.iter().enumerate() {
                            jac[(i * d + r, col)] = if i == l && r == a { 1.0 } else { 0.0 } - v;
                        }
                    }
                }
            }
            let mut rhs = DVector::<f64>::zeros(s * d);
            for i in 0..s {
                for (r, v) in basis.to_real(&g[i]).into_iter().enumerate() {
                    rhs[i * d + r] = v;
                }
            }
            let delta = jac
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Pole("singular Newton matrix in the stage solve".into()))?;
            for i in 0..s {
                let step = basis.from_real(&delta.as_slice()[i * d..(i + 1) * d]);
                w[i] -= &step;
            }
        }
        Err(Error::Convergence {
            iterations: self.cfg.max_iter,
            residual,
        })
    }

    /// `Ψ_m^h(U)` through the resolvent update.
    pub fn step(&self, u: &FourierState) -> Result<FourierState> {
        let stages = self.solve_stages(u)?;
        self.update(u, &stages.stages)
    }

    fn update(&self, u: &FourierState, w: &[FourierState]) -> Result<FourierState> {
        let s = self.tab.stages();
        let c = self.model.n_comps();
        let bw = self.eval_b(w)?;
        let mut out = self.model.zeros();
        let mut uk = DVector::from_element(c, Complex64::new(0.0, 0.0));
        let mut bk = DVector::from_element(s * c, Complex64::new(0.0, 0.0));
        for blk in &self.blocks {
            for ci in 0..c {
                uk[ci] = u.get(ci, blk.k);
                for i in 0..s {
                    bk[i * c + ci] = bw[i].get(ci, blk.k) * self.h;
                }
            }
            let psi = &blk.stab * &uk + &blk.update * &bk;
            for ci in 0..c {
                out.set(ci, blk.k, psi[ci]);
            }
        }
        if self.model.is_real() {
            out.enforce_conjugate_symmetry();
        }
        if !out.is_finite() {
            return Err(Error::Domain("non-finite step result".into()));
        }
        Ok(out)
    }

    /// Classical update `U + h Σ_i b_i f(W^i)` from solved stages.
    pub fn classical_update(&self, u: &FourierState, w: &[FourierState]) -> Result<FourierState> {
        let mut out = self.model.project(u, self.cutoff);
        for (bi, wi) in self.tab.b.iter().zip(w) {
            out.axpy(self.h * bi, &self.model.vector_field(wi, self.cutoff)?);
        }
        Ok(out)
    }

    /// `S(hA)` on one mode, or `None` outside the band.
    pub fn stability_block(&self, k: i64) -> Option<&DMatrix<Complex64>> {
        self.blocks.iter().find(|b| b.k == k).map(|b| &b.stab)
    }

    /// `n` steps from `u`, returning every iterate including `u`.
    pub fn trajectory(&self, u: &FourierState, n: usize) -> Result<Vec<FourierState>> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(self.model.project(u, self.cutoff));
        for _ in 0..n {
            let next = self.step(out.last().expect("non-empty"))?;
            out.push(next);
        }
        Ok(out)
    }
}

pub fn solve_stages(
    model: &PdeModel,
    tab: &ButcherTableau,
    u: &FourierState,
    h: f64,
    m: Cutoff,
    cfg: StageSolveConfig,
) -> Result<StageVector> {
    Stepper::new(model, tab, h, m, cfg)?.solve_stages(u)
}

pub fn step(
    model: &PdeModel,
    tab: &ButcherTableau,
    u: &FourierState,
    h: f64,
    m: Cutoff,
    cfg: StageSolveConfig,
) -> Result<FourierState> {
    Stepper::new(model, tab, h, m, cfg)?.step(u)
}

/// Symplectic form on the real coordinates of band `m`.
pub fn symplectic_matrix(model: &PdeModel, basis: &RealBasis) -> DMatrix<f64> {
    let d = basis.dim();
    DMatrix::from_fn(d, d, |a, b| model.symplectic_form(basis.direction(a), basis.direction(b)))
}

/// Jacobian of a band map in real coordinates by central differences.
pub fn fd_jacobian<F>(basis: &RealBasis, u: &FourierState, eps: f64, mut map: F) -> Result<DMatrix<f64>>
where
    F: FnMut(&FourierState) -> Result<FourierState>,
{
    let d = basis.dim();
    let mut jac = DMatrix::zeros(d, d);
    for a in 0..d {
        let e = basis.direction(a);
        let col = fd::derivative_state(|t| map(&fd::along(u, e, t)), eps)?;
        for (r, v) in basis.to_real(&col).into_iter().enumerate() {
            jac[(r, a)] = v;
        }
    }
    Ok(jac)
}

/// `max |DΨᵀ Ω DΨ - Ω|` over the real coordinates of band `m`.
pub fn symplecticity_residual(
    model: &PdeModel,
    tab: &ButcherTableau,
    u: &FourierState,
    h: f64,
    m: Cutoff,
) -> Result<f64> {
    let cfg = StageSolveConfig {
        tol: 1e-15,
        scheme: StageScheme::Newton,
        ..StageSolveConfig::default()
    };
    let stepper = Stepper::new(model, tab, h, m, cfg)?;
    let basis = RealBasis::new(model, m);
    let u = model.project(u, m);
    let eps = 1e-3 * (1.0 + u.l2_norm());
    let jac = fd_jacobian(&basis, &u, eps, |x| stepper.step(x))?;
    let omega = symplectic_matrix(model, &basis);
    let defect = jac.transpose() * &omega * &jac - &omega;
    Ok(defect.iter().fold(0.0, |acc: f64, x| acc.max(x.abs())))
}

/// Measured norms of the linear stage operators on the base space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearBounds {
    /// `sup_k ‖(I - h a⊗A_k)⁻¹‖`.
    pub lambda: f64,
    /// `1 + sup_k ‖h a⊗A_k (I - h a⊗A_k)⁻¹‖`.
    pub one_plus_lambda: f64,
    /// `sup_k ‖S(hA_k)‖`.
    pub c_s: f64,
}

pub fn linear_operator_bounds(model: &PdeModel, tab: &ButcherTableau, h: f64, m: Cutoff) -> Result<LinearBounds> {
    let stepper = Stepper::new(model, tab, h, m, StageSolveConfig::default())?;
    let s = tab.stages();
    let c = model.n_comps();
    let base = crate::spectral::GevreyIndex::base(model.q());
    let spectral_norm = |x: DMatrix<Complex64>| x.singular_values().iter().fold(0.0, |a: f64, v| a.max(*v));
    let mut out = LinearBounds {
        lambda: 0.0,
        one_plus_lambda: 1.0,
        c_s: 0.0,
    };
    for blk in &stepper.blocks {
        // conjugate by the square roots of the base-space weights
        let w: Vec<f64> = (0..c).map(|ci| model.layout().weight(ci, blk.k, &base).sqrt()).collect();
        let scale = |x: &DMatrix<Complex64>| {
            DMatrix::from_fn(x.nrows(), x.ncols(), |r, q| x[(r, q)] * (w[r % c] / w[q % c]))
        };
        let inv = scale(&blk.inv);
        let prod = &inv - DMatrix::identity(s * c, s * c);
        out.lambda = out.lambda.max(spectral_norm(inv));
        out.one_plus_lambda = out.one_plus_lambda.max(1.0 + spectral_norm(prod));
        out.c_s = out.c_s.max(spectral_norm(scale(&blk.stab)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Nonlinearity;
    use crate::tableau::gauss_legendre;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nls(k: usize, lambda: f64) -> PdeModel {
        PdeModel::new(Nonlinearity::PowerNls { lambda, sigma: 1 }, k).unwrap()
    }

    #[test]
    fn zero_step_is_identity() {
        let model = nls(6, 1.0);
        let tab = gauss_legendre(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = model.random_band_state(Cutoff::Full, 0.3, &mut rng);
        let w = solve_stages(&model, &tab, &u, 0.0, Cutoff::Full, StageSolveConfig::default()).unwrap();
        for wi in &w.stages {
            assert_eq!(wi, &u);
        }
        let psi = step(&model, &tab, &u, 0.0, Cutoff::At(9), StageSolveConfig::default()).unwrap();
        assert_eq!(psi, model.project(&u, Cutoff::At(9)));
    }

    #[test]
    fn linear_problem_converges_immediately() {
        let model = nls(6, 0.0);
        let tab = gauss_legendre(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = model.random_band_state(Cutoff::Full, 1.0, &mut rng);
        let w = solve_stages(&model, &tab, &u, 0.3, Cutoff::Full, StageSolveConfig::default()).unwrap();
        assert_eq!(w.iterations, 1);
        assert_eq!(w.residual, 0.0);
    }

    #[test]
    fn linear_schrodinger_midpoint_multiplier() {
        let model = nls(5, 0.0);
        let tab = gauss_legendre(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = model.random_band_state(Cutoff::Full, 1.0, &mut rng);
        let h = 0.37;
        let psi = step(&model, &tab, &u, h, Cutoff::Full, StageSolveConfig::default()).unwrap();
        for k in u.modes() {
            let z = Complex64::new(0.0, 0.5 * h * (k * k) as f64);
            let mult = (Complex64::new(1.0, 0.0) - z) / (Complex64::new(1.0, 0.0) + z);
            assert!((psi.get(0, k) - mult * u.get(0, k)).norm() < 1e-14);
        }
    }

    #[test]
    fn cubic_nls_stage_solve() {
        let model = nls(8, 1.0);
        let tab = gauss_legendre(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = model.random_band_state(Cutoff::At(8), 0.2, &mut rng);
        let w = solve_stages(&model, &tab, &u, 0.01, Cutoff::At(8), StageSolveConfig::default()).unwrap();
        assert!(w.residual <= 1e-12 * model.y_norm(&u).max(1.0));
        assert!(w.iterations < 50);

        let newton = StageSolveConfig {
            scheme: StageScheme::Newton,
            ..StageSolveConfig::default()
        };
        let wn = solve_stages(&model, &tab, &u, 0.01, Cutoff::At(8), newton).unwrap();
        for (a, b) in w.stages.iter().zip(&wn.stages) {
            assert!((a - b).max_abs() < 1e-11);
        }
    }

    #[test]
    fn resolvent_update_matches_classical_update() {
        let model = nls(6, 1.0);
        let tab = gauss_legendre(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = model.random_band_state(Cutoff::Full, 0.3, &mut rng);
        let st = Stepper::new(&model, &tab, 0.02, Cutoff::Full, StageSolveConfig::default()).unwrap();
        let w = st.solve_stages(&u).unwrap();
        let a = st.update(&u, &w.stages).unwrap();
        let b = st.classical_update(&u, &w.stages).unwrap();
        assert!((&a - &b).max_abs() < 1e-10);
    }

    #[test]
    fn symmetric_method_reverses() {
        let model = nls(6, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = model.random_band_state(Cutoff::Full, 0.3, &mut rng);
        for s in 1..=3 {
            let tab = gauss_legendre(s).unwrap();
            let cfg = StageSolveConfig::default();
            let fwd = step(&model, &tab, &u, 0.05, Cutoff::Full, cfg).unwrap();
            let back = step(&model, &tab, &fwd, -0.05, Cutoff::Full, cfg).unwrap();
            assert!(model.y_norm(&(&back - &u)) < 10.0 * cfg.tol * model.y_norm(&u).max(1.0));
        }
    }

    #[test]
    fn band_is_invariant() {
        let model = nls(8, 1.0);
        let tab = gauss_legendre(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = model.random_band_state(Cutoff::Full, 0.3, &mut rng);
        let psi = step(&model, &tab, &u, 0.05, Cutoff::At(10), StageSolveConfig::default()).unwrap();
        for k in psi.modes() {
            if k * k > 10 {
                assert_eq!(psi.get(0, k), Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn symplecticity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tab = gauss_legendre(1).unwrap();
        let lin = nls(3, 0.0);
        let u = lin.random_band_state(Cutoff::Full, 0.5, &mut rng);
        assert!(symplecticity_residual(&lin, &tab, &u, 0.1, Cutoff::Full).unwrap() <= 1e-10);
        assert!(symplecticity_residual(&lin, &tab, &u, 0.0, Cutoff::Full).unwrap() <= 1e-12);
        let cubic = nls(3, 1.0);
        let u = cubic.random_band_state(Cutoff::At(9), 0.5, &mut rng);
        assert!(symplecticity_residual(&cubic, &tab, &u, 0.01, Cutoff::At(9)).unwrap() <= 1e-6);
    }

    #[test]
    fn linear_bounds() {
        let model = nls(16, 1.0);
        let tab = gauss_legendre(1).unwrap();
        let b = linear_operator_bounds(&model, &tab, 0.0, Cutoff::Full).unwrap();
        assert!((b.lambda - 1.0).abs() < 1e-15 && b.one_plus_lambda == 1.0 && (b.c_s - 1.0).abs() < 1e-15);
        let b = linear_operator_bounds(&model, &tab, 0.3, Cutoff::Full).unwrap();
        assert!((b.c_s - 1.0).abs() < 1e-12);
        let g2 = gauss_legendre(2).unwrap();
        let b = linear_operator_bounds(&model, &g2, 0.3, Cutoff::Full).unwrap();
        assert!(b.lambda.is_finite() && b.c_s <= 1.0 + 1e-12);
    }
}
