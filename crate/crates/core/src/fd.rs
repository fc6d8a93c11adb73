//! Fourth-order central finite differences.

use crate::error::Result;
use crate::spectral::FourierState;

/// `d/dt F(t)` at `t = 0` from the stencil `(-F(2ε) + 8F(ε) - 8F(-ε) + F(-2ε)) / 12ε`.
pub fn derivative_state<F>(mut f: F, eps: f64) -> Result<FourierState>
where
    F: FnMut(f64) -> Result<FourierState>,
{
    let p2 = f(2.0 * eps)?;
    let p1 = f(eps)?;
    let m1 = f(-eps)?;
    let m2 = f(-2.0 * eps)?;
    let mut out = m2;
    out -= &p2;
    out.axpy(8.0, &p1);
    out.axpy(-8.0, &m1);
    Ok(out.scaled(1.0 / (12.0 * eps)))
}

pub fn derivative_scalar<F>(mut f: F, eps: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let p2 = f(2.0 * eps)?;
    let p1 = f(eps)?;
    let m1 = f(-eps)?;
    let m2 = f(-2.0 * eps)?;
    Ok((-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * eps))
}

/// `U + t W` without allocating a closure-captured copy at the call site.
pub fn along(u: &FourierState, w: &FourierState, t: f64) -> FourierState {
    let mut out = u.clone();
    out.axpy(t, w);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_quartics() {
        // the stencil differentiates polynomials up to degree 4 exactly
        let d = derivative_scalar(|t| Ok(1.0 + 2.0 * t + t.powi(3) - 0.5 * t.powi(4)), 0.1).unwrap();
        assert!((d - 2.0).abs() < 1e-13);
    }
}
