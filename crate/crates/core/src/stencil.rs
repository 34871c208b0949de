//! Finite-difference stencils on a uniform grid in the mapped coordinate.
//!
//! All spatial derivatives in this crate are taken on the uniform mapped
//! coordinate `xi = i / n_cells` and converted to radial or arclength
//! derivatives by the chain rule at the call site.  Interior nodes use
//! 4th-order centered stencils; the outer boundary uses biased or fully
//! one-sided stencils of the same order.  The origin is handled by parity
//! ghost nodes supplied by the caller (odd for `psi` and `r`, even for `phi`
//! and scalar radial fields).

/// Parity of a radial field under reflection through the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Finite-difference weights for the m-th derivative at `x0` given node
/// offsets, via Fornberg's recursion.  Exact for polynomials up to
/// `offsets.len() - 1`, so generated weights carry no transcription risk.
pub fn fd_weights(x0: f64, offsets: &[f64], m: usize) -> Vec<f64> {
    let n = offsets.len();
    assert!(m < n, "need more nodes than derivative order");
    // c[k][j]: weight of node j for the k-th derivative, built incrementally.
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = offsets[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i] - x0;
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c[m].clone()
}

fn weights_centered(m: usize) -> [f64; 5] {
    let offs = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let w = fd_weights(0.0, &offs, m);
    [w[0], w[1], w[2], w[3], w[4]]
}

/// A radial field extended by two ghost nodes at each end.
///
/// Inner ghosts come from the parity of the field; outer ghosts are supplied
/// by the caller (power-law continuation for evolution, unused when the
/// one-sided boundary scheme is selected).
pub struct Extended {
    /// values[k] holds node `k - 2`, so interior node i sits at `values[i + 2]`.
    pub values: Vec<f64>,
}

impl Extended {
    pub fn new(field: &[f64], parity: Parity, outer: [f64; 2]) -> Self {
        let n = field.len();
        assert!(n >= 5, "field too short for 4th-order stencils");
        let mut values = Vec::with_capacity(n + 4);
        let sign = match parity {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        };
        values.push(sign * field[2]);
        values.push(sign * field[1]);
        values.extend_from_slice(field);
        values.push(outer[0]);
        values.push(outer[1]);
        Extended { values }
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.values[i + 2]
    }
}

/// How the last two interior nodes are differentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterScheme {
    /// Centered stencils throughout; outer ghost values must be meaningful.
    Ghost,
    /// Biased / fully one-sided 4th-order stencils; ghosts are ignored.
    OneSided,
}

/// First and second xi-derivative sweeps over all interior nodes.
///
/// `h` is the uniform xi spacing.  Boundary rows follow `scheme`.
pub struct DerivOps {
    h: f64,
    c1: [f64; 5],
    c2: [f64; 5],
    // biased rows for node n-1 (offsets -3..=1) and one-sided for node n (offsets -4..=0
    // for d1, -5..=0 for d2 to keep 4th order).
    d1_b1: [f64; 5],
    d1_b0: [f64; 5],
    d2_b1: [f64; 6],
    d2_b0: [f64; 6],
}

impl DerivOps {
    pub fn new(h: f64) -> Self {
        let offs5 = [-3.0, -2.0, -1.0, 0.0, 1.0];
        let offs5e = [-4.0, -3.0, -2.0, -1.0, 0.0];
        let offs6 = [-4.0, -3.0, -2.0, -1.0, 0.0, 1.0];
        let offs6e = [-5.0, -4.0, -3.0, -2.0, -1.0, 0.0];
        let to5 = |v: Vec<f64>| -> [f64; 5] { [v[0], v[1], v[2], v[3], v[4]] };
        let to6 = |v: Vec<f64>| -> [f64; 6] { [v[0], v[1], v[2], v[3], v[4], v[5]] };
        DerivOps {
            h,
            c1: weights_centered(1),
            c2: weights_centered(2),
            d1_b1: to5(fd_weights(0.0, &offs5, 1)),
            d1_b0: to5(fd_weights(0.0, &offs5e, 1)),
            d2_b1: to6(fd_weights(0.0, &offs6, 2)),
            d2_b0: to6(fd_weights(0.0, &offs6e, 2)),
        }
    }

    /// Centered first-derivative weights (offsets -2..=2); single-node
    /// parity-folded evaluations at the origin use these directly.
    pub fn centered_d1_weights(&self) -> &[f64; 5] {
        &self.c1
    }

    /// Antisymmetric pairing so constant fields difference to exact zero;
    /// the flow's flat fixed point depends on this.
    #[inline]
    fn centered_d1(&self, v: &[f64], j: usize) -> f64 {
        self.c1[3] * (v[j + 1] - v[j - 1]) + self.c1[4] * (v[j + 2] - v[j - 2])
    }

    #[inline]
    fn centered_d2(&self, v: &[f64], j: usize) -> f64 {
        self.c2[3] * (v[j + 1] + v[j - 1]) + self.c2[4] * (v[j + 2] + v[j - 2])
            + self.c2[2] * v[j]
    }

    /// d/dxi into `out`, one value per interior node.
    pub fn d1(&self, ext: &Extended, scheme: OuterScheme, out: &mut [f64]) {
        let v = &ext.values;
        let n = v.len() - 4;
        debug_assert_eq!(out.len(), n);
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = self.centered_d1(v, i + 2) / self.h;
        }
        if scheme == OuterScheme::OneSided {
            let j = n + 1; // extended index of last interior node
            out[n - 2] = self
                .d1_b1
                .iter()
                .zip(&v[j - 4..=j])
                .map(|(c, x)| c * x)
                .sum::<f64>()
                / self.h;
            out[n - 1] = self
                .d1_b0
                .iter()
                .zip(&v[j - 4..=j])
                .map(|(c, x)| c * x)
                .sum::<f64>()
                / self.h;
        }
    }

    /// d2/dxi2 into `out`, one value per interior node.
    pub fn d2(&self, ext: &Extended, scheme: OuterScheme, out: &mut [f64]) {
        let v = &ext.values;
        let n = v.len() - 4;
        debug_assert_eq!(out.len(), n);
        let h2 = self.h * self.h;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = self.centered_d2(v, i + 2) / h2;
        }
        if scheme == OuterScheme::OneSided {
            let j = n + 1;
            out[n - 2] = self
                .d2_b1
                .iter()
                .zip(&v[j - 5..=j])
                .map(|(c, x)| c * x)
                .sum::<f64>()
                / h2;
            out[n - 1] = self
                .d2_b0
                .iter()
                .zip(&v[j - 5..=j])
                .map(|(c, x)| c * x)
                .sum::<f64>()
                / h2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_match_known_centered_tables() {
        let w1 = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let expect1 = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w1.iter().zip(expect1) {
            assert!((a - b).abs() < 1e-14);
        }
        let w2 = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let expect2 = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w2.iter().zip(expect2) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn quartic_is_differentiated_exactly() {
        // 4th-order stencils must be exact on degree-4 polynomials, including
        // the biased boundary rows.
        let n = 12;
        let h = 0.1;
        let f: Vec<f64> = (0..=n)
            .map(|i| {
                let x = i as f64 * h;
                1.0 + x - 2.0 * x * x + 0.5 * x * x * x + 0.25 * x * x * x * x
            })
            .collect();
        let df = |x: f64| 1.0 - 4.0 * x + 1.5 * x * x + x * x * x;
        let d2f = |x: f64| -4.0 + 3.0 * x + 3.0 * x * x;
        // Even parity is wrong for this f near 0; only check the outer rows.
        let ext = Extended::new(&f, Parity::Even, [0.0, 0.0]);
        let ops = DerivOps::new(h);
        let mut out1 = vec![0.0; n + 1];
        let mut out2 = vec![0.0; n + 1];
        ops.d1(&ext, OuterScheme::OneSided, &mut out1);
        ops.d2(&ext, OuterScheme::OneSided, &mut out2);
        for i in 2..=n {
            let x = i as f64 * h;
            assert!((out1[i] - df(x)).abs() < 1e-10, "d1 node {i}");
            assert!((out2[i] - d2f(x)).abs() < 1e-9, "d2 node {i}");
        }
    }

    #[test]
    fn parity_ghosts_reproduce_symmetric_derivatives() {
        let n = 20;
        let h = 0.05;
        // even field: cos(x); odd field: sin(x)
        let even: Vec<f64> = (0..=n).map(|i| (i as f64 * h).cos()).collect();
        let odd: Vec<f64> = (0..=n).map(|i| (i as f64 * h).sin()).collect();
        let ops = DerivOps::new(h);
        let ee = Extended::new(
            &even,
            Parity::Even,
            [((n + 1) as f64 * h).cos(), ((n + 2) as f64 * h).cos()],
        );
        let eo = Extended::new(
            &odd,
            Parity::Odd,
            [((n + 1) as f64 * h).sin(), ((n + 2) as f64 * h).sin()],
        );
        // 4th-order truncation at h = 0.05 sits near h^4/30 ~ 2e-7
        let mut out = vec![0.0; n + 1];
        ops.d1(&ee, OuterScheme::Ghost, &mut out);
        assert!(max_abs_err(&out, |x: f64| -x.sin(), h) < 1e-6);
        ops.d1(&eo, OuterScheme::Ghost, &mut out);
        assert!(max_abs_err(&out, |x: f64| x.cos(), h) < 1e-6);
    }

    fn max_abs_err(vals: &[f64], f: impl Fn(f64) -> f64, h: f64) -> f64 {
        vals.iter()
            .enumerate()
            .map(|(i, v)| (v - f(i as f64 * h)).abs())
            .fold(0.0, f64::max)
    }
}
