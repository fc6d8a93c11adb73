//! Drift, convergence, projection and backward-error studies.
//!
//! Parameter points run as a parallel map; rows are gathered in the order of
//! the configured parameter lists, so output does not depend on scheduling.

use gevrey_bea::bea::{
    chi, default_anchor, gradient_consistency, measure_c_f, modified_flow_with, resolve_policy, ModifiedField,
    ModifiedHamiltonian, ResolvedPolicy, TruncationPolicy,
};
use gevrey_bea::models::PdeModel;
use gevrey_bea::ode::ExtrapolationOptions;
use gevrey_bea::rk::{StageSolveConfig, Stepper};
use gevrey_bea::spectral::{gevrey_norm, Cutoff, FourierState, GevreyIndex};
use gevrey_bea::tableau::{gauss_legendre, ButcherTableau};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, InitialCondition, PolicyName};
use crate::error::Result;
use crate::fit::{linear_fit, loglog_fit, pairwise_slopes};
use crate::table::{Cell, Provenance, Table};

/// Everything derived once from a validated configuration.
pub struct Setup {
    pub cfg: ExperimentConfig,
    pub model: PdeModel,
    pub tab: ButcherTableau,
    pub stage: StageSolveConfig,
    pub u0: FourierState,
    pub prov: Provenance,
    pub verbose: bool,
}

pub fn m_label(m: Cutoff) -> String {
    match m {
        Cutoff::Full => "full".to_string(),
        Cutoff::At(m) => m.to_string(),
    }
}

fn status(r: &gevrey_bea::Result<()>) -> String {
    match r {
        Ok(()) => "ok".to_string(),
        Err(e) => e.to_string(),
    }
}

/// Number of steps of size `h` covering `[0, t]`.
fn step_count(t: f64, h: f64) -> usize {
    ((t / h).round() as usize).max(1)
}

impl Setup {
    pub fn new(cfg: ExperimentConfig, verbose: bool) -> Result<Self> {
        cfg.validate()?;
        let model = cfg.build_model()?;
        let tab = cfg.build_tableau()?;
        let u0 = crate::initial::build(&cfg, &model)?;
        let prov = Provenance {
            config_hash: cfg.hash()?,
            tableau: tab.id.clone(),
            stage_tol: cfg.method.stage_tol,
        };
        Ok(Setup {
            stage: cfg.stage_config(),
            cfg,
            model,
            tab,
            u0,
            prov,
            verbose,
        })
    }

    fn log(&self, msg: impl FnOnce() -> String) {
        if self.verbose {
            eprintln!("{}", msg());
        }
    }

    /// Explicit band: the largest configured cutoff, or the full band.
    pub fn band(&self) -> Cutoff {
        self.cfg.bea.m.iter().max().map_or(Cutoff::Full, |&m| Cutoff::At(m))
    }

    /// `χ` from the configuration, or `δ / (2 e η c_F)` with `c_F` measured on the initial state.
    pub fn chi(&self) -> Result<f64> {
        match self.cfg.bea.chi {
            Some(c) => Ok(c),
            None => {
                let c_f = measure_c_f(&self.model, std::slice::from_ref(&self.u0))?;
                Ok(chi(self.cfg.bea.delta, self.tab.eta(), c_f))
            }
        }
    }

    pub fn coupled_policy(&self) -> Result<TruncationPolicy> {
        Ok(TruncationPolicy::Coupled {
            tau: self.cfg.bea.tau,
            chi: self.chi()?,
            n_max: self.cfg.bea.n_max,
        })
    }

    /// Policy of the drift study, or `None` when no modified energy is tracked.
    pub fn drift_policy(&self) -> Result<Option<TruncationPolicy>> {
        match self.cfg.bea.policy {
            PolicyName::Coupled => Ok(Some(self.coupled_policy()?)),
            PolicyName::Explicit => Ok(self.cfg.bea.n.first().map(|&n| TruncationPolicy::Explicit { n, m: self.band() })),
        }
    }

    fn stepper(&self, h: f64, m: Cutoff) -> gevrey_bea::Result<Stepper<'_>> {
        Stepper::new(&self.model, &self.tab, h, m, self.stage)
    }

    /// `(τ, ℓ)` declared by the initial data, or the policy `τ` with `ℓ = 0`.
    fn data_index(&self) -> (f64, f64) {
        match self.cfg.run.initial {
            InitialCondition::GevreyDecay { tau, ell, .. } => (tau, ell),
            _ => (self.cfg.bea.tau, 0.0),
        }
    }

    fn orders(&self) -> Vec<usize> {
        if self.cfg.bea.n.is_empty() {
            vec![1, 2, 3, 4]
        } else {
            self.cfg.bea.n.clone()
        }
    }
}

/// Time series of `H` along the numerical trajectory for every `h`.
pub fn run_integrate(s: &Setup) -> Result<Table> {
    let mut table = Table::new("integrate", &["h", "step", "t", "H", "y_norm", "l2_norm", "status"]);
    let m = s.band();
    let every = s.cfg.run.sample_every;
    let parts: Vec<Vec<Vec<Cell>>> = s
        .cfg
        .steps()
        .par_iter()
        .map(|&h| {
            s.log(|| format!("integrate h = {h:e}"));
            let mut rows = Vec::new();
            let n_steps = step_count(s.cfg.run.t_final, h);
            let res = (|| -> gevrey_bea::Result<()> {
                let st = s.stepper(h, m)?;
                let mut u = s.model.project(&s.u0, m);
                for j in 0..=n_steps {
                    if j > 0 {
                        u = st.step(&u)?;
                    }
                    if j % every == 0 || j == n_steps {
                        rows.push(vec![
                            h.into(),
                            j.into(),
                            (j as f64 * h).into(),
                            s.model.hamiltonian(&u)?.into(),
                            s.model.y_norm(&u).into(),
                            u.l2_norm().into(),
                            "ok".into(),
                        ]);
                    }
                }
                Ok(())
            })();
            if res.is_err() {
                rows.push(vec![h.into(), 0usize.into(), f64::NAN.into(), f64::NAN.into(), f64::NAN.into(), f64::NAN.into(), status(&res).into()]);
            }
            rows
        })
        .collect();
    for rows in parts {
        for r in rows {
            table.push(r, None, m_label(m));
        }
    }
    Ok(table)
}

/// `H` and `H̃` along the trajectory; drift measured from the initial values.
pub fn run_drift(s: &Setup) -> Result<Table> {
    let mut table = Table::new(
        "drift",
        &["h", "step", "t", "H", "H_tilde", "H_drift", "H_tilde_drift", "n_used", "m_used", "noise_floor", "status"],
    );
    let policy = s.drift_policy()?;
    let every = s.cfg.run.sample_every;
    let parts: Vec<(Vec<Vec<Cell>>, Option<usize>, Cutoff)> = s
        .cfg
        .steps()
        .par_iter()
        .map(|&h| {
            s.log(|| format!("drift h = {h:e}"));
            let resolved = match &policy {
                Some(p) => resolve_policy(p, h, &s.tab, &s.model).map(Some),
                None => Ok(None),
            };
            let (n, m) = match &resolved {
                Ok(Some(r)) => (Some(r.n), r.m),
                _ => (None, s.band()),
            };
            let n_steps = step_count(s.cfg.run.t_final, h);
            let mut rows = Vec::new();
            let res = (|| -> gevrey_bea::Result<()> {
                let r: Option<ResolvedPolicy> = resolved.clone()?;
                let st = s.stepper(h, m)?;
                let ham = match r {
                    Some(r) => Some(ModifiedHamiltonian::new(
                        ModifiedField::new(&s.model, &s.tab, r.n, r.m)?,
                        default_anchor(&s.model),
                    )),
                    None => None,
                };
                let mut u = s.model.project(&s.u0, m);
                let h0 = s.model.hamiltonian(&u)?;
                let (ht0, quad) = match &ham {
                    Some(hm) => hm.eval_checked(&u, h)?,
                    None => (f64::NAN, 0.0),
                };
                let floor = quad + 1e-15 * (1.0 + h0.abs());
                for j in 0..=n_steps {
                    if j > 0 {
                        u = st.step(&u)?;
                    }
                    if j % every == 0 || j == n_steps {
                        let hv = s.model.hamiltonian(&u)?;
                        let htv = match &ham {
                            Some(hm) => hm.eval(&u, h)?,
                            None => f64::NAN,
                        };
                        rows.push(vec![
                            h.into(),
                            j.into(),
                            (j as f64 * h).into(),
                            hv.into(),
                            htv.into(),
                            (hv - h0).into(),
                            (htv - ht0).into(),
                            n.unwrap_or(0).into(),
                            m_label(m).into(),
                            floor.into(),
                            "ok".into(),
                        ]);
                    }
                }
                Ok(())
            })();
            if res.is_err() {
                let nan = Cell::Float(f64::NAN);
                rows.push(vec![
                    h.into(),
                    0usize.into(),
                    nan.clone(),
                    nan.clone(),
                    nan.clone(),
                    nan.clone(),
                    nan.clone(),
                    n.unwrap_or(0).into(),
                    m_label(m).into(),
                    nan,
                    status(&res).into(),
                ]);
            }
            (rows, n, m)
        })
        .collect();
    for (rows, n, m) in parts {
        for r in rows {
            table.push(r, n, m_label(m));
        }
    }
    Ok(table)
}

/// Largest `|H_drift|` and `|H_tilde_drift|` per step size, from a drift table.
pub fn max_drifts(drift: &Table) -> Vec<(f64, f64, f64)> {
    let hs = drift.column("h");
    let hd = drift.column("H_drift");
    let htd = drift.column("H_tilde_drift");
    let mut out: Vec<(f64, f64, f64)> = Vec::new();
    for i in 0..hs.len() {
        match out.last_mut() {
            Some(last) if last.0 == hs[i] => {
                last.1 = last.1.max(hd[i].abs());
                last.2 = last.2.max(htd[i].abs());
            }
            _ => out.push((hs[i], hd[i].abs(), htd[i].abs())),
        }
    }
    out
}

/// Global error at `T` against a Gauss-3 reference with `h_ref = h_min / 20`.
pub fn run_convergence(s: &Setup) -> Result<Table> {
    let mut table = Table::new("converge", &["h", "steps", "error", "slope_estimate", "status"]);
    let m = s.band();
    let t = s.cfg.run.t_final;
    let hs = s.cfg.steps();
    let h_min = hs.iter().cloned().fold(f64::INFINITY, f64::min);
    let h_ref = h_min / 20.0;
    let gauss3 = gauss_legendre(3)?;
    let ref_cfg = StageSolveConfig {
        tol: s.stage.tol.min(1e-14),
        ..s.stage
    };
    s.log(|| format!("reference: gauss3, h = {h_ref:e}"));
    let n_ref = step_count(t, h_ref);
    let reference = {
        let st = Stepper::new(&s.model, &gauss3, t / n_ref as f64, m, ref_cfg)?;
        let mut u = s.model.project(&s.u0, m);
        for _ in 0..n_ref {
            u = st.step(&u)?;
        }
        u
    };
    let results: Vec<(usize, gevrey_bea::Result<f64>)> = hs
        .par_iter()
        .map(|&h| {
            s.log(|| format!("converge h = {h:e}"));
            let n_steps = step_count(t, h);
            let res = (|| -> gevrey_bea::Result<f64> {
                let st = s.stepper(h, m)?;
                let mut u = s.model.project(&s.u0, m);
                for _ in 0..n_steps {
                    u = st.step(&u)?;
                }
                Ok(s.model.y_norm(&(&u - &reference)))
            })();
            (n_steps, res)
        })
        .collect();
    let errs: Vec<f64> = results.iter().map(|(_, r)| *r.as_ref().unwrap_or(&f64::NAN)).collect();
    let slopes = pairwise_slopes(&hs, &errs);
    for (i, (n_steps, r)) in results.iter().enumerate() {
        let st = match r {
            Ok(_) => "ok".to_string(),
            Err(e) => e.to_string(),
        };
        table.push(
            vec![hs[i].into(), (*n_steps).into(), errs[i].into(), slopes[i].into(), st.into()],
            None,
            m_label(m),
        );
    }
    Ok(table)
}

/// `‖Ψ^h(U) − Ψ_m^h(U)‖_{Y₁}` over the configured cutoffs, against the full band.
///
/// Returns the scan and a one-row fit of `log error` against `m^{1/q}`.
pub fn run_projection_scan(s: &Setup) -> Result<(Table, Table)> {
    let mut table = Table::new("projscan", &["m", "m_root", "error_Y1", "bound_shape", "status"]);
    let hs = s.cfg.steps();
    let h = hs.iter().cloned().fold(f64::INFINITY, f64::min);
    let q = s.model.q();
    let (tau, ell) = s.data_index();
    let y1 = GevreyIndex::new(0.0, 1.0, q)?;
    let full = s.stepper(h, Cutoff::Full)?.step(&s.u0)?;
    let ms: Vec<u64> = if s.cfg.bea.m.is_empty() {
        (1..=s.model.band_max()).collect()
    } else {
        s.cfg.bea.m.clone()
    };
    let errs: Vec<gevrey_bea::Result<f64>> = ms
        .par_iter()
        .map(|&m| {
            s.log(|| format!("projscan m = {m}"));
            let cut = Cutoff::At(m);
            let um = s.stepper(h, cut)?.step(&s.model.project(&s.u0, cut))?;
            gevrey_norm(&(&full - &um), &y1, s.model.layout())
        })
        .collect();
    let band_max = s.model.band_max();
    let (mut fx, mut fy) = (Vec::new(), Vec::new());
    for (m, e) in ms.iter().zip(&errs) {
        let mf = *m as f64;
        let root = mf.powf(1.0 / q);
        let (err, st) = match e {
            Ok(v) => (*v, "ok".to_string()),
            Err(err) => (f64::NAN, err.to_string()),
        };
        if *m < band_max && err > 0.0 {
            fx.push(root);
            fy.push(err.ln());
        }
        let shape = mf.powf(-ell) * (-tau * root).exp();
        table.push(vec![(*m).into(), root.into(), err.into(), shape.into(), st.into()], None, m.to_string());
    }
    let fit = linear_fit(&fx, &fy);
    let mut summary = Table::new("projscan_fit", &["h", "tau", "slope", "intercept", "r2", "points"]);
    summary.push(
        vec![h.into(), tau.into(), fit.slope.into(), fit.intercept.into(), fit.r2.into(), fit.points.into()],
        None,
        "full",
    );
    Ok((table, summary))
}

/// The tables of the backward-error verification, in output order.
pub struct BeaReport {
    pub embedding: Table,
    pub closeness: Table,
    pub gradient: Table,
    pub expfit: Table,
    pub summary: Table,
}

impl BeaReport {
    pub fn tables(&self) -> [&Table; 5] {
        [&self.embedding, &self.closeness, &self.gradient, &self.expfit, &self.summary]
    }
}

/// Embedding order, closeness, gradient consistency and the exponential fit.
pub fn run_bea_verify(s: &Setup) -> Result<BeaReport> {
    let hs = s.cfg.steps();
    let m = s.band();
    let p = s.tab.order;
    let ml = m_label(m);
    let mut summary = Table::new("bea_summary", &["metric", "value"]);

    // embedding: ‖Ψ^h − Φ̃^h‖ per (n, h)
    let u = s.model.project(&s.u0, m);
    let ode = ExtrapolationOptions::default();
    let floor = (ode.rel_tol + s.stage.tol) * (1.0 + s.model.y_norm(&u));
    let orders = s.orders();
    let pairs: Vec<(usize, f64)> = orders.iter().flat_map(|&n| hs.iter().map(move |&h| (n, h))).collect();
    let errs: Vec<gevrey_bea::Result<f64>> = pairs
        .par_iter()
        .map(|&(n, h)| {
            s.log(|| format!("embedding n = {n}, h = {h:e}"));
            let psi = s.stepper(h, m)?.step(&u)?;
            let field = ModifiedField::new(&s.model, &s.tab, n, m)?;
            let phi = modified_flow_with(&field, &u, h, ode)?;
            Ok(s.model.y_norm(&(&psi - &phi)))
        })
        .collect();
    let mut embedding = Table::new("bea_embedding", &["h", "error", "slope_estimate", "noise_floor", "status"]);
    for (i, &n) in orders.iter().enumerate() {
        let chunk = &errs[i * hs.len()..(i + 1) * hs.len()];
        let e: Vec<f64> = chunk.iter().map(|r| *r.as_ref().unwrap_or(&f64::NAN)).collect();
        let slopes = pairwise_slopes(&hs, &e);
        for (j, r) in chunk.iter().enumerate() {
            let st = r.as_ref().map_or_else(|e| e.to_string(), |_| "ok".to_string());
            embedding.push(vec![hs[j].into(), e[j].into(), slopes[j].into(), floor.into(), st.into()], Some(n), ml.clone());
        }
        let (fh, fe): (Vec<f64>, Vec<f64>) = hs.iter().zip(&e).filter(|(_, e)| **e > 10.0 * floor).map(|(h, e)| (*h, *e)).unzip();
        summary.push(vec!["embedding_slope".into(), loglog_fit(&fh, &fe).slope.into()], Some(n), ml.clone());
    }

    // closeness of H̃ to H and the per-step drift hierarchy at n = p + 2
    let nc = s.cfg.bea.closeness_n.unwrap_or(p + 2);
    let ham = ModifiedHamiltonian::new(ModifiedField::new(&s.model, &s.tab, nc, m)?, default_anchor(&s.model));
    let h_u = s.model.hamiltonian(&u)?;
    let coeffs = ham.coefficients(&u)?;
    let (_, quad) = ham.eval_checked(&u, hs[0])?;
    let rows: Vec<gevrey_bea::Result<(f64, f64, f64)>> = hs
        .par_iter()
        .map(|&h| {
            s.log(|| format!("closeness h = {h:e}"));
            let mut ht = h_u;
            for j in p..nc {
                ht += h.powi(j as i32) * coeffs[j];
            }
            let u1 = s.stepper(h, m)?.step(&u)?;
            let dh = (s.model.hamiltonian(&u1)? - h_u).abs();
            let dht = (ham.eval(&u1, h)? - ht).abs();
            Ok((ht, dh, dht))
        })
        .collect();
    let mut closeness = Table::new(
        "bea_closeness",
        &["h", "H", "H_tilde", "difference", "slope_estimate", "step_H_drift", "step_H_tilde_drift", "quadrature_check", "status"],
    );
    let vals: Vec<(f64, f64, f64)> = rows.iter().map(|r| *r.as_ref().unwrap_or(&(f64::NAN, f64::NAN, f64::NAN))).collect();
    let diffs: Vec<f64> = vals.iter().map(|v| (v.0 - h_u).abs()).collect();
    let slopes = pairwise_slopes(&hs, &diffs);
    for (j, r) in rows.iter().enumerate() {
        let st = r.as_ref().map_or_else(|e| e.to_string(), |_| "ok".to_string());
        closeness.push(
            vec![
                hs[j].into(),
                h_u.into(),
                vals[j].0.into(),
                diffs[j].into(),
                slopes[j].into(),
                vals[j].1.into(),
                vals[j].2.into(),
                quad.into(),
                st.into(),
            ],
            Some(nc),
            ml.clone(),
        );
    }
    let dh: Vec<f64> = vals.iter().map(|v| v.1).collect();
    let dht: Vec<f64> = vals.iter().map(|v| v.2).collect();
    summary.push(vec!["closeness_slope".into(), loglog_fit(&hs, &diffs).slope.into()], Some(nc), ml.clone());
    summary.push(vec!["step_H_drift_slope".into(), loglog_fit(&hs, &dh).slope.into()], Some(nc), ml.clone());
    summary.push(vec!["step_H_tilde_drift_slope".into(), loglog_fit(&hs, &dht).slope.into()], Some(nc), ml.clone());

    // F̃ = J∇H̃ on the explicit band
    let h_grad = hs.iter().cloned().fold(0.0, f64::max);
    let grad_orders: Vec<usize> = orders.iter().cloned().filter(|&n| n <= 4).collect();
    let residuals: Vec<gevrey_bea::Result<f64>> = grad_orders
        .par_iter()
        .map(|&n| {
            s.log(|| format!("gradient n = {n}"));
            let mut rng = ChaCha8Rng::seed_from_u64(s.cfg.run.seed.wrapping_add(n as u64));
            let pol = TruncationPolicy::Explicit { n, m };
            gradient_consistency(&s.model, &s.tab, &pol, &u, h_grad, s.cfg.bea.gradient_dirs, &mut rng)
        })
        .collect();
    let mut gradient = Table::new("bea_gradient", &["h", "residual", "status"]);
    let mut worst: f64 = 0.0;
    for (n, r) in grad_orders.iter().zip(&residuals) {
        let (v, st) = match r {
            Ok(v) => (*v, "ok".to_string()),
            Err(e) => (f64::NAN, e.to_string()),
        };
        worst = worst.max(if v.is_nan() { f64::INFINITY } else { v });
        gradient.push(vec![h_grad.into(), v.into(), st.into()], Some(*n), ml.clone());
    }
    summary.push(vec!["gradient_max_residual".into(), worst.into()], None, ml.clone());

    // per-step H̃ drift under the coupled policy against h^{-1/(1+q)}
    let expfit = exponential_fit_table(s)?;
    let x = expfit.column("x");
    let d: Vec<f64> = expfit.column("drift").iter().map(|v| if *v > 0.0 { v.ln() } else { f64::NAN }).collect();
    let fit = linear_fit(&x, &d);
    summary.push(vec!["expfit_slope".into(), fit.slope.into()], None, "coupled");
    summary.push(vec!["expfit_r2".into(), fit.r2.into()], None, "coupled");
    summary.push(vec!["chi".into(), s.chi()?.into()], None, "coupled");

    Ok(BeaReport {
        embedding,
        closeness,
        gradient,
        expfit,
        summary,
    })
}

/// Per-step drift `|H̃(Ψ^h U) − H̃(U)|` with `(n, m)` from the coupled policy.
pub fn exponential_fit_table(s: &Setup) -> Result<Table> {
    let hs = s.cfg.bea.expfit_h.clone().unwrap_or_else(|| s.cfg.steps());
    let policy = s.coupled_policy()?;
    let q = s.model.q();
    let rows: Vec<(gevrey_bea::Result<(f64, f64)>, Option<ResolvedPolicy>)> = hs
        .par_iter()
        .map(|&h| {
            s.log(|| format!("expfit h = {h:e}"));
            let r = match resolve_policy(&policy, h, &s.tab, &s.model) {
                Ok(r) => r,
                Err(e) => return (Err(e), None),
            };
            let res = (|| -> gevrey_bea::Result<(f64, f64)> {
                let ham = ModifiedHamiltonian::new(ModifiedField::new(&s.model, &s.tab, r.n, r.m)?, default_anchor(&s.model));
                let u = s.model.project(&s.u0, r.m);
                let u1 = s.stepper(h, r.m)?.step(&u)?;
                let drift = (ham.eval(&u1, h)? - ham.eval(&u, h)?).abs();
                let dh = (s.model.hamiltonian(&u1)? - s.model.hamiltonian(&u)?).abs();
                Ok((drift, dh))
            })();
            (res, Some(r))
        })
        .collect();
    let mut table = Table::new("bea_expfit", &["h", "x", "n_used", "m_used", "clamped", "drift", "H_drift", "status"]);
    for (h, (res, r)) in hs.iter().zip(rows) {
        let (drift, dh, st) = match res {
            Ok((a, b)) => (a, b, "ok".to_string()),
            Err(e) => (f64::NAN, f64::NAN, e.to_string()),
        };
        let (n, m, clamped) = r.map_or((0, Cutoff::Full, false), |r| (r.n, r.m, r.clamped));
        table.push(
            vec![
                (*h).into(),
                h.powf(-1.0 / (1.0 + q)).into(),
                n.into(),
                m_label(m).into(),
                (clamped as i64).into(),
                drift.into(),
                dh.into(),
                st.into(),
            ],
            Some(n),
            m_label(m),
        );
    }
    Ok(table)
}

/// Looks up a metric in a summary table, optionally for one order `n`.
pub fn summary_value(summary: &Table, metric: &str, n: Option<usize>) -> Option<f64> {
    let names = summary.text_column("metric");
    let vals = summary.column("value");
    (0..names.len())
        .find(|&i| names[i] == metric && (n.is_none() || summary.rows[i].n == n))
        .map(|i| vals[i])
}
