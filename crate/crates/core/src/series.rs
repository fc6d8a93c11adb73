//! Truncated power series in the step size, stored pointwise on a grid.
//!
//! A [`GridJet`] holds `order + 1` coefficient vectors, each with one value
//! per grid point. Products keep only the terms up to the common order.

use num_complex::Complex64;

/// `coeffs[j][p]` is the `h^j` coefficient at grid point `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridJet {
    pub coeffs: Vec<Vec<Complex64>>,
}

impl GridJet {
    pub fn zeros(order: usize, n_points: usize) -> Self {
        GridJet {
            coeffs: vec![vec![Complex64::new(0.0, 0.0); n_points]; order + 1],
        }
    }

    pub fn constant(values: Vec<Complex64>, order: usize) -> Self {
        let n = values.len();
        let mut j = Self::zeros(order, n);
        j.coeffs[0] = values;
        j
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn n_points(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn mul(&self, other: &GridJet) -> GridJet {
        let order = self.order().min(other.order());
        let np = self.n_points();
        let mut out = GridJet::zeros(order, np);
        for n in 0..=order {
            let dst = &mut out.coeffs[n];
            for i in 0..=n {
                let a = &self.coeffs[i];
                let b = &other.coeffs[n - i];
                for p in 0..np {
                    dst[p] += a[p] * b[p];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &GridJet) -> GridJet {
        let order = self.order().min(other.order());
        let mut out = GridJet::zeros(order, self.n_points());
        for n in 0..=order {
            for (p, d) in out.coeffs[n].iter_mut().enumerate() {
                *d = self.coeffs[n][p] + other.coeffs[n][p];
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> GridJet {
        GridJet {
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.iter().map(|z| z * s).collect())
                .collect(),
        }
    }

    pub fn add_constant(&mut self, c: Complex64) {
        self.coeffs[0].iter_mut().for_each(|z| *z += c);
    }

    /// Coefficient-wise complex conjugate (the expansion variable is real).
    pub fn conj(&self) -> GridJet {
        GridJet {
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.iter().map(|z| z.conj()).collect())
                .collect(),
        }
    }

    pub fn real_part(&self) -> GridJet {
        GridJet {
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.iter().map(|z| Complex64::new(z.re, 0.0)).collect())
                .collect(),
        }
    }

    pub fn powi(&self, e: u32) -> GridJet {
        let mut out = GridJet::constant(vec![Complex64::new(1.0, 0.0); self.n_points()], self.order());
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Evaluate `Σ_j c_j u^j` by Horner's rule.
    pub fn polynomial(&self, c: &[f64]) -> GridJet {
        let np = self.n_points();
        let mut acc = GridJet::zeros(self.order(), np);
        for &cj in c.iter().rev() {
            acc = acc.mul(self);
            acc.add_constant(Complex64::new(cj, 0.0));
        }
        acc
    }

    /// `(sin u, cos u)` via the coupled recurrences
    /// `n s_n = Σ_j j u_j c_{n-j}`, `n c_n = -Σ_j j u_j s_{n-j}`.
    pub fn sin_cos(&self) -> (GridJet, GridJet) {
        let order = self.order();
        let np = self.n_points();
        let mut s = GridJet::zeros(order, np);
        let mut c = GridJet::zeros(order, np);
        for p in 0..np {
            s.coeffs[0][p] = self.coeffs[0][p].sin();
            c.coeffs[0][p] = self.coeffs[0][p].cos();
        }
        for n in 1..=order {
            for p in 0..np {
                let mut sn = Complex64::new(0.0, 0.0);
                let mut cn = Complex64::new(0.0, 0.0);
                for j in 1..=n {
                    let ju = self.coeffs[j][p] * j as f64;
                    sn += ju * c.coeffs[n - j][p];
                    cn -= ju * s.coeffs[n - j][p];
                }
                s.coeffs[n][p] = sn / n as f64;
                c.coeffs[n][p] = cn / n as f64;
            }
        }
        (s, c)
    }
}

/// Real scalar series `r^α` via `n r_0 p_n = Σ_{j=1}^n (α j - (n - j)) r_j p_{n-j}`.
pub fn scalar_powf(r: &[f64], alpha: f64) -> Vec<f64> {
    let mut p = vec![0.0; r.len()];
    if r.is_empty() {
        return p;
    }
    p[0] = r[0].powf(alpha);
    for n in 1..r.len() {
        let mut acc = 0.0;
        for j in 1..=n {
            acc += (alpha * j as f64 - (n - j) as f64) * r[j] * p[n - j];
        }
        p[n] = acc / (n as f64 * r[0]);
    }
    p
}
