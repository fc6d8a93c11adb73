//! Butcher tableaux and their scalar characteristics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_unit;

/// Coefficients of an `s`-stage Runge–Kutta method.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub id: String,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub order: usize,
}

impl ButcherTableau {
    pub fn new(id: impl Into<String>, a: Vec<Vec<f64>>, b: Vec<f64>, order: usize) -> Result<Self> {
        let s = b.len();
        if s == 0 || a.len() != s || a.iter().any(|r| r.len() != s) {
            return Err(Error::InvalidArgument("tableau must be s x s with s weights".into()));
        }
        let c = a.iter().map(|r| r.iter().sum()).collect();
        Ok(ButcherTableau {
            id: id.into(),
            a,
            b,
            c,
            order,
        })
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// `max_i Σ_j |a_ij|`.
    pub fn norm_a(&self) -> f64 {
        self.a
            .iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `Σ_i |b_i|`.
    pub fn norm_b(&self) -> f64 {
        self.b.iter().map(|x| x.abs()).sum()
    }

    /// `η = 2 max(‖a‖, ‖b‖ / (2 ln 2 - 1))`.
    pub fn eta(&self) -> f64 {
        2.0 * self
            .norm_a()
            .max(self.norm_b() / (2.0 * std::f64::consts::LN_2 - 1.0))
    }

    /// `γ = e (2 + 1.65 η + ‖b‖)`.
    pub fn gamma(&self) -> f64 {
        std::f64::consts::E * (2.0 + 1.65 * self.eta() + self.norm_b())
    }

    /// `max_{ij} |b_i a_ij + b_j a_ji - b_i b_j|`.
    pub fn symplecticity_residual(&self) -> f64 {
        let s = self.stages();
        let mut worst: f64 = 0.0;
        for i in 0..s {
            for j in 0..s {
                let r = self.b[i] * self.a[i][j] + self.b[j] * self.a[j][i] - self.b[i] * self.b[j];
                worst = worst.max(r.abs());
            }
        }
        worst
    }

    pub fn is_symplectic(&self) -> bool {
        self.symplecticity_residual() < 1e-13
    }

    pub fn det_a(&self) -> f64 {
        let s = self.stages();
        DMatrix::from_fn(s, s, |i, j| self.a[i][j]).determinant()
    }

    pub fn a_matrix(&self) -> DMatrix<f64> {
        let s = self.stages();
        DMatrix::from_fn(s, s, |i, j| self.a[i][j])
    }

    /// `S(z) = 1 + z bᵀ(I - z a)⁻¹ 𝟙`.
    pub fn stability_function(&self, z: Complex64) -> Result<Complex64> {
        let s = self.stages();
        let m = DMatrix::from_fn(s, s, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            Complex64::new(d, 0.0) - z * self.a[i][j]
        });
        let lu = m.clone().lu();
        let x = lu
            .solve(&DVector::from_element(s, Complex64::new(1.0, 0.0)))
            .ok_or_else(|| Error::Pole(format!("I - z a is singular at z = {z}")))?;
        if condition_estimate(&m) > 1e14 {
            return Err(Error::Pole(format!("I - z a is numerically singular at z = {z}")));
        }
        let bx: Complex64 = self.b.iter().zip(x.iter()).map(|(b, x)| x * *b).sum();
        Ok(Complex64::new(1.0, 0.0) + z * bx)
    }
}

/// `‖M‖₁ ‖M⁻¹‖₁`, or infinity when `M` is singular.
pub fn condition_estimate(m: &DMatrix<Complex64>) -> f64 {
    let norm1 = |x: &DMatrix<Complex64>| {
        (0..x.ncols())
            .map(|j| x.column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    match m.clone().try_inverse() {
        Some(inv) => norm1(m) * norm1(&inv),
        None => f64::INFINITY,
    }
}

/// Lagrange basis polynomial `ℓ_j` on the nodes `c`.
fn lagrange(c: &[f64], j: usize, x: f64) -> f64 {
    c.iter()
        .enumerate()
        .filter(|(i, _)| *i != j)
        .map(|(_, ci)| (x - ci) / (c[j] - ci))
        .product()
}

/// `s`-stage Gauss–Legendre collocation method of order `2s`.
pub fn gauss_legendre(s: usize) -> Result<ButcherTableau> {
    if !(1..=3).contains(&s) {
        return Err(Error::InvalidArgument(format!("Gauss-Legendre stages must be 1..=3, got {s}")));
    }
    let (c, _) = gauss_legendre_unit(s);
    let (qx, qw) = gauss_legendre_unit(s);
    // a_ij = ∫_0^{c_i} ℓ_j, b_j = ∫_0^1 ℓ_j, both exact with s-point rules
    let integral = |upper: f64, j: usize| -> f64 {
        qx.iter()
            .zip(&qw)
            .map(|(x, w)| w * upper * lagrange(&c, j, upper * x))
            .sum()
    };
    let a = (0..s).map(|i| (0..s).map(|j| integral(c[i], j)).collect()).collect();
    let b = (0..s).map(|j| integral(1.0, j)).collect();
    let mut tab = ButcherTableau::new(format!("gauss{s}"), a, b, 2 * s)?;
    tab.c = c;
    Ok(tab)
}

/// Tableau by identifier: `midpoint` or `gauss1`..`gauss3`.
pub fn tableau_by_id(id: &str) -> Result<ButcherTableau> {
    match id {
        "midpoint" | "gauss1" => gauss_legendre(1),
        "gauss2" => gauss_legendre(2),
        "gauss3" => gauss_legendre(3),
        other => Err(Error::InvalidArgument(format!("unknown tableau '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_coefficients() {
        let t = gauss_legendre(1).unwrap();
        assert_eq!(t.a, vec![vec![0.5]]);
        assert_eq!(t.b, vec![1.0]);
        assert_eq!(t.order, 2);
        assert_eq!(t.symplecticity_residual(), 0.0);
    }

    #[test]
    fn gauss2_closed_form() {
        let t = gauss_legendre(2).unwrap();
        let r = 3f64.sqrt() / 6.0;
        let expect = [[0.25, 0.25 - r], [0.25 + r, 0.25]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((t.a[i][j] - expect[i][j]).abs() < 1e-15);
            }
            assert!((t.b[i] - 0.5).abs() < 1e-15);
        }
    }

    /// Order conditions up to order 4 (the trees of order ≤ 4).
    #[test]
    fn order_conditions() {
        for s in 1..=3 {
            let t = gauss_legendre(s).unwrap();
            let n = t.stages();
            let (a, b, c) = (&t.a, &t.b, &t.c);
            let ac: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[i][j] * c[j]).sum()).collect();
            let conds: Vec<(usize, f64, f64)> = vec![
                (1, b.iter().sum(), 1.0),
                (2, (0..n).map(|i| b[i] * c[i]).sum(), 0.5),
                (3, (0..n).map(|i| b[i] * c[i] * c[i]).sum(), 1.0 / 3.0),
                (3, (0..n).map(|i| b[i] * ac[i]).sum(), 1.0 / 6.0),
                (4, (0..n).map(|i| b[i] * c[i].powi(3)).sum(), 0.25),
                (4, (0..n).map(|i| b[i] * c[i] * ac[i]).sum(), 0.125),
                (4, (0..n).map(|i| b[i] * (0..n).map(|j| a[i][j] * c[j] * c[j]).sum::<f64>()).sum(), 1.0 / 12.0),
                (4, (0..n).map(|i| b[i] * (0..n).map(|j| a[i][j] * ac[j]).sum::<f64>()).sum(), 1.0 / 24.0),
            ];
            for (ord, got, want) in conds {
                if ord <= t.order {
                    assert!((got - want).abs() < 1e-14, "s = {s}, order {ord}");
                }
            }
        }
    }

    #[test]
    fn stability_examples() {
        let t = gauss_legendre(1).unwrap();
        assert_eq!(t.stability_function(Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(1.0, 0.0));
        let z = Complex64::new(0.3, -1.7);
        let s = t.stability_function(z).unwrap();
        let expect = (1.0 + z / 2.0) / (1.0 - z / 2.0);
        assert!((s - expect).norm() < 1e-14);
        assert!((t.stability_function(Complex64::new(0.0, 1.0)).unwrap().norm() - 1.0).abs() < 1e-15);
        assert!(matches!(t.stability_function(Complex64::new(2.0, 0.0)), Err(Error::Pole(_))));
    }

    #[test]
    fn method_constants() {
        let t = gauss_legendre(1).unwrap();
        let eta = 2.0 / (2.0 * std::f64::consts::LN_2 - 1.0);
        assert!((t.eta() - eta).abs() < 1e-14);
        assert!((t.gamma() - std::f64::consts::E * (3.0 + 1.65 * eta)).abs() < 1e-13);
    }
}
