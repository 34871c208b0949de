//! Independent reference implementations for cross-checking the main crate.
//!
//! Everything here deliberately avoids the warped-product shortcuts used by
//! the library: curvature is computed by brute-force tensor calculus in a
//! Cartesian chart, integrals by adaptive quadrature, and heat solutions by
//! explicit kernel convolution.  Slow and simple on purpose; test-only.

/// Dense matrix inverse by Gauss-Jordan elimination with partial pivoting.
/// Panics on singular input; intended for tiny (n x n, n <= 6) systems.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        assert!(m[pivot][col].abs() > 1e-300, "singular matrix");
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                if f != 0.0 {
                    for j in 0..2 * n {
                        m[row][j] -= f * m[col][j];
                    }
                }
            }
        }
    }
    m.into_iter().map(|row| row[n..].to_vec()).collect()
}

/// Adaptive Simpson quadrature of `f` on [a, b] to absolute tolerance `tol`.
/// The interval is pre-split into fixed panels so a feature much narrower
/// than the whole range cannot slip between the first probe points.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 16;
    let hp = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|k| {
            let lo = a + k as f64 * hp;
            adaptive_simpson_panel(f, lo, lo + hp, tol / PANELS as f64)
        })
        .sum()
}

fn adaptive_simpson_panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Rotationally symmetric metric in a Cartesian chart:
/// g_ij(x) = A(r) delta_ij + B(r) x_i x_j / r^2 with r = |x|.
pub struct CartesianMetric {
    pub dim: usize,
    pub a: Box<dyn Fn(f64) -> f64>,
    pub b: Box<dyn Fn(f64) -> f64>,
}

impl CartesianMetric {
    fn at(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        let a = (self.a)(r);
        let b = (self.b)(r);
        let n = self.dim;
        let mut g = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                g[i][j] = b * x[i] * x[j] / r2;
                if i == j {
                    g[i][j] += a;
                }
            }
        }
        g
    }

    /// 4th-order central difference of the metric components along axis k.
    fn d_metric(&self, x: &[f64], k: usize, h: f64) -> Vec<Vec<f64>> {
        let shift = |t: f64| {
            let mut y = x.to_vec();
            y[k] += t;
            self.at(&y)
        };
        let (p1, m1, p2, m2) = (shift(h), shift(-h), shift(2.0 * h), shift(-2.0 * h));
        let n = self.dim;
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                d[i][j] =
                    (8.0 * (p1[i][j] - m1[i][j]) - (p2[i][j] - m2[i][j])) / (12.0 * h);
            }
        }
        d
    }

    /// Christoffel symbols Gamma^k_ij at x.
    fn christoffel(&self, x: &[f64], h: f64) -> Vec<Vec<Vec<f64>>> {
        let n = self.dim;
        let g = self.at(x);
        let ginv = invert(&g);
        let dg: Vec<Vec<Vec<f64>>> = (0..n).map(|k| self.d_metric(x, k, h)).collect();
        let mut gamma = vec![vec![vec![0.0; n]; n]; n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut sum = 0.0;
                    for l in 0..n {
                        sum += ginv[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                    }
                    gamma[k][i][j] = 0.5 * sum;
                }
            }
        }
        gamma
    }

    /// Scalar curvature at radius r by nested finite differences:
    /// R = g^{ij} (d_k Gamma^k_ij - d_i Gamma^k_kj
    ///             + Gamma^k_kl Gamma^l_ij - Gamma^k_il Gamma^l_kj).
    /// The sample point sits off every coordinate axis so all tensor
    /// components participate.
    pub fn scalar_curvature(&self, r: f64, h: f64) -> f64 {
        let n = self.dim;
        let mut x = vec![0.0; n];
        // direction with distinct nonzero components
        let mut dir: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * i as f64).collect();
        let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (xi, d) in x.iter_mut().zip(dir.iter_mut()) {
            *d /= norm;
            *xi = r * *d;
        }
        let g = self.at(&x);
        let ginv = invert(&g);
        let gamma = self.christoffel(&x, h);
        // d_gamma[m][k][i][j] = d_m Gamma^k_ij, 4th-order central in x_m
        let mut d_gamma = vec![vec![vec![vec![0.0; n]; n]; n]; n];
        for m in 0..n {
            let shift = |t: f64| {
                let mut y = x.clone();
                y[m] += t;
                self.christoffel(&y, h)
            };
            let (p1, m1, p2, m2) = (shift(h), shift(-h), shift(2.0 * h), shift(-2.0 * h));
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        d_gamma[m][k][i][j] = (8.0 * (p1[k][i][j] - m1[k][i][j])
                            - (p2[k][i][j] - m2[k][i][j]))
                            / (12.0 * h);
                    }
                }
            }
        }
        let mut ricci = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut val = 0.0;
                for k in 0..n {
                    val += d_gamma[k][k][i][j] - d_gamma[i][k][k][j];
                    for l in 0..n {
                        val += gamma[k][k][l] * gamma[l][i][j] - gamma[k][i][l] * gamma[l][k][j];
                    }
                }
                ricci[i][j] = val;
            }
        }
        let mut r_scal = 0.0;
        for i in 0..n {
            for j in 0..n {
                r_scal += ginv[i][j] * ricci[i][j];
            }
        }
        r_scal
    }
}

/// Scalar curvature of the conformally flat 3-metric g = U^4 delta for a
/// radial conformal factor: R = -8 U^(-5) (U'' + 2 U'/r), derivatives by
/// high-order central differences in r.
pub fn conformal_scalar_curvature_n3(u: &dyn Fn(f64) -> f64, r: f64, h: f64) -> f64 {
    let d1 = (8.0 * (u(r + h) - u(r - h)) - (u(r + 2.0 * h) - u(r - 2.0 * h))) / (12.0 * h);
    let d2 = (16.0 * (u(r + h) + u(r - h)) - (u(r + 2.0 * h) + u(r - 2.0 * h)) - 30.0 * u(r))
        / (12.0 * h * h);
    let lap = d2 + 2.0 * d1 / r;
    -8.0 * u(r).powi(-5) * lap
}

/// Euclidean heat kernel in n dimensions at squared distance d2.
pub fn heat_kernel(dim: usize, t: f64, d2: f64) -> f64 {
    (4.0 * std::f64::consts::PI * t).powf(-(dim as f64) / 2.0) * (-d2 / (4.0 * t)).exp()
}

/// Solution of the flat-space radial heat equation in R^3 by kernel
/// convolution:
///   u(r,t) = (4 pi t)^(-1/2) / r * Int_0^inf rho u0(rho)
///            [exp(-(r-rho)^2/4t) - exp(-(r+rho)^2/4t)] d rho,
/// with the r -> 0 limit taken analytically.
pub fn radial_heat_convolution_n3(u0: &dyn Fn(f64) -> f64, r: f64, t: f64, tol: f64) -> f64 {
    let width = (4.0 * t).sqrt();
    let cut = r + 14.0 * width + 1.0;
    if r < 1e-8 {
        let f = |rho: f64| {
            4.0 * std::f64::consts::PI * rho * rho * u0(rho)
                * heat_kernel(3, t, rho * rho)
        };
        return adaptive_simpson(&f, 0.0, cut, tol);
    }
    let pref = 1.0 / (r * (4.0 * std::f64::consts::PI * t).sqrt());
    let f = |rho: f64| {
        let a = (-(r - rho) * (r - rho) / (4.0 * t)).exp();
        let b = (-(r + rho) * (r + rho) / (4.0 * t)).exp();
        rho * u0(rho) * (a - b)
    };
    pref * adaptive_simpson(&f, 0.0, cut, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_spd_matrix() {
        let a = vec![
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ];
        let inv = invert(&a);
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += a[i][k] * inv[k][j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn simpson_integrates_gaussian() {
        let v = adaptive_simpson(&|x: f64| (-x * x).exp(), 0.0, 10.0, 1e-12);
        assert!((v - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn flat_metric_has_zero_curvature() {
        let m = CartesianMetric {
            dim: 3,
            a: Box::new(|_| 1.0),
            b: Box::new(|_| 0.0),
        };
        assert!(m.scalar_curvature(2.0, 0.02).abs() < 1e-10);
    }

    #[test]
    fn tensor_route_agrees_with_conformal_formula() {
        // Two unrelated routes to R for a conformally flat 3-metric: the
        // nested-difference tensor contraction and -8 U^-5 Lap U.
        let u = |r: f64| 1.0 + 0.1 * (-(r / 2.0) * (r / 2.0)).exp();
        let m = CartesianMetric {
            dim: 3,
            a: Box::new(move |r| u(r).powi(4)),
            b: Box::new(|_| 0.0),
        };
        let r = 1.3;
        let direct = m.scalar_curvature(r, 0.01);
        let conf = conformal_scalar_curvature_n3(&u, r, 1e-3);
        assert!(
            (direct - conf).abs() <= 1e-6 * (1.0 + conf.abs()),
            "direct {direct} vs conformal {conf}"
        );
    }

    #[test]
    fn kernel_convolution_reproduces_spreading_gaussian() {
        // u0 = heat kernel at time t0 evolves to the kernel at t0 + t.
        let t0 = 0.3;
        let u0 = move |rho: f64| heat_kernel(3, t0, rho * rho);
        for &r in &[0.0, 0.5, 1.7] {
            let got = radial_heat_convolution_n3(&u0, r, 0.7, 1e-12);
            let want = heat_kernel(3, 1.0, r * r);
            assert!((got - want).abs() < 1e-9, "r = {r}: {got} vs {want}");
        }
    }
}
