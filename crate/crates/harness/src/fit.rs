//! Least-squares lines used by the slope and exponential-fit tables.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Ordinary least squares `y ≈ slope x + intercept`.
///
/// Non-finite pairs are skipped; fewer than two points give NaN fields.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LineFit {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    let n = pts.len();
    if n < 2 {
        return LineFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            r2: f64::NAN,
            points: n,
        };
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LineFit {
        slope,
        intercept: my - slope * mx,
        r2,
        points: n,
    }
}

/// Slope of `log y` against `log x`, skipping non-positive values.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> LineFit {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    linear_fit(&lx, &ly)
}

/// Slopes between consecutive points in log–log scale; the first entry is NaN.
pub fn pairwise_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; x.len()];
    for i in 1..x.len() {
        if x[i] > 0.0 && x[i - 1] > 0.0 && y[i] > 0.0 && y[i - 1] > 0.0 {
            out[i] = (y[i] / y[i - 1]).ln() / (x[i] / x[i - 1]).ln();
        }
    }
    out
}
