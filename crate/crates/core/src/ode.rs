//! Gragg–Bulirsch–Stoer extrapolation for smooth autonomous fields on a band.

use crate::error::{Error, Result};
use crate::spectral::FourierState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrapolationOptions {
    /// Local error target relative to `1 + ‖y‖`.
    pub rel_tol: f64,
    /// The interval is split into at least this many macro steps.
    pub min_steps: usize,
    /// How often a rejected macro step may be halved.
    pub max_halvings: usize,
}

impl Default for ExtrapolationOptions {
    fn default() -> Self {
        ExtrapolationOptions {
            rel_tol: 1e-13,
            min_steps: 50,
            max_halvings: 10,
        }
    }
}

const SEQUENCE: [usize; 8] = [2, 4, 6, 8, 10, 12, 14, 16];

fn modified_midpoint<F>(f: &mut F, y0: &FourierState, f0: &FourierState, big_h: f64, n: usize) -> Result<FourierState>
where
    F: FnMut(&FourierState) -> Result<FourierState>,
{
    let hs = big_h / n as f64;
    let mut prev = y0.clone();
    let mut cur = y0.clone();
    cur.axpy(hs, f0);
    for _ in 1..n {
        let mut next = prev;
        next.axpy(2.0 * hs, &f(&cur)?);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// One extrapolated macro step; `None` when the tableau does not settle.
fn macro_step<F>(f: &mut F, y0: &FourierState, big_h: f64, tol: f64) -> Result<Option<FourierState>>
where
    F: FnMut(&FourierState) -> Result<FourierState>,
{
    let f0 = f(y0)?;
    let scale = 1.0 + y0.l2_norm();
    let mut rows: Vec<Vec<FourierState>> = Vec::new();
    for (j, &nj) in SEQUENCE.iter().enumerate() {
        let mut row = vec![modified_midpoint(f, y0, &f0, big_h, nj)?];
        for k in 1..=j {
            let ratio = (nj as f64 / SEQUENCE[j - k] as f64).powi(2);
            let mut t = row[k - 1].clone();
            let diff = &row[k - 1] - &rows[j - 1][k - 1];
            t.axpy(1.0 / (ratio - 1.0), &diff);
            row.push(t);
        }
        if j >= 2 {
            let err = (&row[j] - &row[j - 1]).l2_norm() / scale;
            if !err.is_finite() {
                return Ok(None);
            }
            if err <= tol {
                return Ok(Some(row.swap_remove(j)));
            }
        }
        rows.push(row);
    }
    Ok(None)
}

/// Flow of `y' = f(y)` over `[0, t]`.
pub fn integrate<F>(mut f: F, y0: &FourierState, t: f64, opts: ExtrapolationOptions) -> Result<FourierState>
where
    F: FnMut(&FourierState) -> Result<FourierState>,
{
    if t == 0.0 {
        return Ok(y0.clone());
    }
    let n = opts.min_steps.max(1);
    let mut y = y0.clone();
    for _ in 0..n {
        y = advance(&mut f, &y, t / n as f64, opts, 0)?;
    }
    Ok(y)
}

fn advance<F>(f: &mut F, y: &FourierState, big_h: f64, opts: ExtrapolationOptions, depth: usize) -> Result<FourierState>
where
    F: FnMut(&FourierState) -> Result<FourierState>,
{
    if let Some(next) = macro_step(f, y, big_h, opts.rel_tol)? {
        return Ok(next);
    }
    if depth >= opts.max_halvings {
        return Err(Error::Integrator(format!(
            "extrapolation did not reach tolerance {:e} with step {big_h:e}",
            opts.rel_tol
        )));
    }
    let mid = advance(f, y, 0.5 * big_h, opts, depth + 1)?;
    advance(f, &mid, 0.5 * big_h, opts, depth + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn rotation_is_exact() {
        // y' = i y on one coefficient
        let mut y0 = FourierState::zeros(0, 1);
        y0.set(0, 0, Complex64::new(1.0, 0.0));
        let y = integrate(|y| Ok(y.scaled_complex(Complex64::i())), &y0, 1.3, ExtrapolationOptions::default()).unwrap();
        let expect = Complex64::new(0.0, 1.3).exp();
        assert!((y.get(0, 0) - expect).norm() < 1e-13);
    }

    #[test]
    fn logistic_growth() {
        let mut y0 = FourierState::zeros(0, 1);
        y0.set(0, 0, Complex64::new(0.1, 0.0));
        let y = integrate(
            |y| {
                let v = y.get(0, 0);
                let mut out = y.zeros_like();
                out.set(0, 0, v * (1.0 - v));
                Ok(out)
            },
            &y0,
            2.0,
            ExtrapolationOptions::default(),
        )
        .unwrap();
        let expect = 1.0 / (1.0 + 9.0 * (-2.0f64).exp());
        assert!((y.get(0, 0).re - expect).abs() < 1e-13);
    }
}
