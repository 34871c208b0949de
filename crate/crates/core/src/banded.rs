//! Banded LU with partial pivoting, LAPACK gbtrf-style storage.
//!
//! The Newton polish in the entropy module solves systems whose matrix is the
//! discretized Schroedinger-type operator, banded with two sub- and two
//! super-diagonals in the mapped coordinate.  Row pivoting can push fill into
//! `kl` extra super-diagonals, so the working array holds `2*kl + ku + 1`
//! diagonals.

pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    /// column-major band storage: entry (i, j) lives at ab[j][ku + kl + i - j]
    ab: Vec<Vec<f64>>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Banded {
            n,
            kl,
            ku,
            ab: vec![vec![0.0; 2 * kl + ku + 1]; n],
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i.max(j) - i.min(j) <= self.kl.max(self.ku));
        self.ab[j][self.ku + self.kl + i - j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.ab[j][self.ku + self.kl + i - j] += v;
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        let d = self.ku + self.kl + i - j;
        self.ab[j][d]
    }

    /// Factor in place; returns the pivot rows or the index of a zero pivot.
    pub fn factor(mut self) -> Result<BandedLu, usize> {
        let n = self.n;
        let kl = self.kl;
        let ku_w = self.ku + self.kl; // working upper bandwidth after pivoting
        let mut piv = vec![0usize; n];
        for k in 0..n {
            // pivot among rows k..=k+kl
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(k);
            }
            piv[k] = p;
            if p != k {
                // swap rows k and p across the reachable columns
                let jmax = (k + ku_w).min(n - 1);
                for j in k..=jmax {
                    let d_k = self.ku + self.kl + k;
                    let d_p = self.ku + self.kl + p;
                    if d_p >= j && d_p - j < self.ab[j].len() && d_k >= j {
                        let a = self.ab[j][d_k - j];
                        let b = self.ab[j][d_p - j];
                        self.ab[j][d_k - j] = b;
                        self.ab[j][d_p - j] = a;
                    }
                }
            }
            let pivot = self.get(k, k);
            let last_col = (k + ku_w).min(n - 1);
            for i in k + 1..=last {
                let m = self.get(i, k) / pivot;
                self.set(i, k, m);
                for j in k + 1..=last_col {
                    let v = self.get(i, j) - m * self.get(k, j);
                    self.set_w(i, j, v);
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku_w,
            ab: self.ab,
            piv,
        })
    }

    #[inline]
    fn set_w(&mut self, i: usize, j: usize, v: f64) {
        self.ab[j][self.ku + self.kl + i - j] = v;
    }
}

pub struct BandedLu {
    n: usize,
    kl: usize,
    ku_w: usize,
    ab: Vec<Vec<f64>>,
    piv: Vec<usize>,
}

impl BandedLu {
    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.ab[j][self.ku_w + i - j]
    }

    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        // forward with pivots
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let last = (k + self.kl).min(n - 1);
            for i in k + 1..=last {
                b[i] -= self.get(i, k) * b[k];
            }
        }
        // back substitution
        for k in (0..n).rev() {
            let last = (k + self.ku_w).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=last {
                s -= self.get(k, j) * b[j];
            }
            b[k] = s / self.get(k, k);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let mut p = k;
            for i in k + 1..n {
                if a[i][k].abs() > a[p][k].abs() {
                    p = i;
                }
            }
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let m = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= m * a[k][j];
                }
                b[i] -= m * b[k];
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..n {
                s -= a[k][j] * b[j];
            }
            b[k] = s / a[k][k];
        }
        b
    }

    #[test]
    fn matches_dense_solver_on_random_band() {
        let n = 40;
        let (kl, ku) = (2, 2);
        // deterministic pseudo-random entries
        let mut seed = 0x2545F4914F6CDD1Du64;
        let mut rnd = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut band = Banded::zeros(n, kl, ku);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = if i == j { 4.0 + rnd() } else { rnd() };
                band.set(i, j, v);
                dense[i][j] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let lu = band.factor().expect("nonsingular");
        let mut x = b.clone();
        lu.solve(&mut x);
        let y = dense_solve(dense, b);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn reports_singular_matrix() {
        let mut band = Banded::zeros(3, 1, 1);
        band.set(0, 0, 1.0);
        band.set(1, 1, 0.0);
        band.set(2, 2, 1.0);
        assert!(band.factor().is_err());
    }
}
