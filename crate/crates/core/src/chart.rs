//! Calculus on a radial profile in the mapped coordinate.
//!
//! A `Chart` bundles the xi-derivative sweeps of the node positions and the
//! profile functions, converted to arclength derivatives by the chain rule
//! with J = phi * dr/dxi.  Because dr/dxi is differenced with the same
//! stencils as psi, the flat profile (phi = 1, psi = r) cancels exactly:
//! psi_s is the ratio of identical arrays and psi_ss vanishes to rounding.
//!
//! The origin uses parity ghost nodes (r and psi odd, phi even).  Ratios
//! that are 0/0 at the center are evaluated by their smooth limits:
//! psi_ss/psi -> psi_sss(0)/psi_s(0), and the Laplacian of an even scalar
//! u picks up the full dimension factor, Delta u(0) = n * u_ss(0).

use crate::stencil::{DerivOps, Extended, OuterScheme, Parity};

/// Outer-boundary treatment for the metric arrays.
#[derive(Debug, Clone, Copy)]
pub enum OuterBc {
    /// Ghost nodes filled by the decay law r d/dr q = -sigma q for
    /// q in {phi - 1, psi/r - 1}; centered stencils everywhere.
    Robin { sigma: f64 },
    /// No assumption on the tail: biased 4th-order rows at the last nodes.
    OneSided,
}

/// Outer-boundary treatment for scalar fields on the same grid.
#[derive(Debug, Clone, Copy)]
pub enum ScalarBc {
    /// u continues as u(r_max) * (r_max / r)^exponent.
    PowerLaw { exponent: f64 },
    /// u vanishes beyond the boundary.
    Zero,
    /// Biased stencils, no tail assumption.
    OneSided,
}

/// Degree-4 polynomial continuation of the last five samples.
pub fn extrapolate_two(values: &[f64]) -> [f64; 2] {
    let n = values.len() - 1;
    let (a, b, c, d, e) = (
        values[n],
        values[n - 1],
        values[n - 2],
        values[n - 3],
        values[n - 4],
    );
    [
        5.0 * a - 10.0 * b + 10.0 * c - 5.0 * d + e,
        15.0 * a - 40.0 * b + 45.0 * c - 24.0 * d + 5.0 * e,
    ]
}

pub struct Chart {
    pub h: f64,
    pub dim: usize,
    ops: DerivOps,
    scheme: OuterScheme,
    /// node radii with parity/extrapolated ghosts
    pub r_ext: Extended,
    /// ds/dxi = phi * dr/dxi at the nodes
    pub j: Vec<f64>,
    /// d(J)/dxi at the nodes
    pub j_xi: Vec<f64>,
    pub psi_s: Vec<f64>,
    pub psi_ss: Vec<f64>,
    /// limit of psi_ss / psi at the origin
    pub w0: f64,
    phi_ext: Extended,
    psi_ext: Extended,
}

impl Chart {
    pub fn new(radii: &[f64], phi: &[f64], psi: &[f64], dim: usize, bc: OuterBc) -> Self {
        let n = radii.len() - 1;
        let h = 1.0 / n as f64;
        let ops = DerivOps::new(h);
        let r_ghosts = extrapolate_two(radii);
        let r_ext = Extended::new(radii, Parity::Odd, r_ghosts);
        let (scheme, phi_ghosts, psi_ghosts) = match bc {
            OuterBc::Robin { sigma } => {
                let rn = radii[n];
                let q_phi = phi[n] - 1.0;
                let q_psi = psi[n] / rn - 1.0;
                let fill = |rg: f64| {
                    let decay = (rn / rg).powf(sigma);
                    (1.0 + q_phi * decay, rg * (1.0 + q_psi * decay))
                };
                let (p0, s0) = fill(r_ghosts[0]);
                let (p1, s1) = fill(r_ghosts[1]);
                (OuterScheme::Ghost, [p0, p1], [s0, s1])
            }
            OuterBc::OneSided => (OuterScheme::OneSided, [0.0, 0.0], [0.0, 0.0]),
        };
        let phi_ext = Extended::new(phi, Parity::Even, phi_ghosts);
        let psi_ext = Extended::new(psi, Parity::Odd, psi_ghosts);

        let len = n + 1;
        let mut r_xi = vec![0.0; len];
        let mut r_xixi = vec![0.0; len];
        let mut phi_xi = vec![0.0; len];
        let mut psi_xi = vec![0.0; len];
        let mut psi_xixi = vec![0.0; len];
        ops.d1(&r_ext, scheme, &mut r_xi);
        ops.d2(&r_ext, scheme, &mut r_xixi);
        ops.d1(&phi_ext, scheme, &mut phi_xi);
        ops.d1(&psi_ext, scheme, &mut psi_xi);
        ops.d2(&psi_ext, scheme, &mut psi_xixi);

        let mut j = vec![0.0; len];
        let mut j_xi = vec![0.0; len];
        let mut psi_s = vec![0.0; len];
        let mut psi_ss = vec![0.0; len];
        for i in 0..len {
            j[i] = phi[i] * r_xi[i];
            j_xi[i] = phi_xi[i] * r_xi[i] + phi[i] * r_xixi[i];
            psi_s[i] = psi_xi[i] / j[i];
            psi_ss[i] = (psi_xixi[i] - psi_xi[i] * j_xi[i] / j[i]) / (j[i] * j[i]);
        }
        // psi_ss is odd through the origin; its xi-derivative at node 0 gives
        // psi_sss(0) and with it the centered limit of psi_ss / psi.
        let w0 = {
            let ext = Extended::new(&psi_ss, Parity::Odd, [0.0, 0.0]);
            let mut d = vec![0.0; len];
            ops.d1(&ext, OuterScheme::OneSided, &mut d);
            let psi_sss0 = d[0] / j[0];
            psi_sss0 / psi_s[0]
        };
        Chart {
            h,
            dim,
            ops,
            scheme,
            r_ext,
            j,
            j_xi,
            psi_s,
            psi_ss,
            w0,
            phi_ext,
            psi_ext,
        }
    }

    pub fn len(&self) -> usize {
        self.j.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn phi(&self, i: usize) -> f64 {
        self.phi_ext.node(i)
    }

    #[inline]
    pub fn psi(&self, i: usize) -> f64 {
        self.psi_ext.node(i)
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        self.r_ext.node(i)
    }

    /// First and second arclength derivatives of a scalar radial field.
    pub fn scalar_derivs(&self, u: &[f64], bc: ScalarBc) -> (Vec<f64>, Vec<f64>) {
        let len = self.len();
        assert_eq!(u.len(), len, "field length must match the grid");
        let (scheme, ghosts) = match bc {
            ScalarBc::PowerLaw { exponent } => {
                let rn = self.r(len - 1);
                let g = [
                    u[len - 1] * (rn / self.r_ext.values[len + 2]).powf(exponent),
                    u[len - 1] * (rn / self.r_ext.values[len + 3]).powf(exponent),
                ];
                (OuterScheme::Ghost, g)
            }
            ScalarBc::Zero => (OuterScheme::Ghost, [0.0, 0.0]),
            ScalarBc::OneSided => (OuterScheme::OneSided, [0.0, 0.0]),
        };
        let ext = Extended::new(u, Parity::Even, ghosts);
        let mut u_xi = vec![0.0; len];
        let mut u_xixi = vec![0.0; len];
        self.ops.d1(&ext, scheme, &mut u_xi);
        self.ops.d2(&ext, scheme, &mut u_xixi);
        let mut u_s = vec![0.0; len];
        let mut u_ss = vec![0.0; len];
        for i in 0..len {
            u_s[i] = u_xi[i] / self.j[i];
            u_ss[i] = (u_xixi[i] - u_xi[i] * self.j_xi[i] / self.j[i]) / (self.j[i] * self.j[i]);
        }
        (u_s, u_ss)
    }

    /// d/ds of an even scalar already given at the nodes (e.g. curvature
    /// eigenvalues); the result is odd through the origin.
    pub fn d_s_even(&self, f: &[f64]) -> Vec<f64> {
        let len = self.len();
        let ghosts = match self.scheme {
            OuterScheme::Ghost => extrapolate_two(f),
            OuterScheme::OneSided => [0.0, 0.0],
        };
        let ext = Extended::new(f, Parity::Even, ghosts);
        let mut d = vec![0.0; len];
        self.ops.d1(&ext, self.scheme, &mut d);
        for i in 0..len {
            d[i] /= self.j[i];
        }
        d
    }

    /// d/ds of an odd scalar (vanishing at the origin).
    pub fn d_s_odd(&self, f: &[f64]) -> Vec<f64> {
        let len = self.len();
        let ghosts = match self.scheme {
            OuterScheme::Ghost => extrapolate_two(f),
            OuterScheme::OneSided => [0.0, 0.0],
        };
        let ext = Extended::new(f, Parity::Odd, ghosts);
        let mut d = vec![0.0; len];
        self.ops.d1(&ext, self.scheme, &mut d);
        for i in 0..len {
            d[i] /= self.j[i];
        }
        d
    }

    /// Laplace-Beltrami of an even scalar: u_ss + (n-1) (psi_s/psi) u_s,
    /// with the isotropic limit n * u_ss at the center.
    pub fn laplacian(&self, u: &[f64], bc: ScalarBc) -> Vec<f64> {
        let (u_s, u_ss) = self.scalar_derivs(u, bc);
        self.laplacian_from_derivs(&u_s, &u_ss)
    }

    pub fn laplacian_from_derivs(&self, u_s: &[f64], u_ss: &[f64]) -> Vec<f64> {
        let len = self.len();
        let nm1 = (self.dim - 1) as f64;
        let mut out = vec![0.0; len];
        out[0] = self.dim as f64 * u_ss[0];
        for i in 1..len {
            out[i] = u_ss[i] + nm1 * self.psi_s[i] / self.psi(i) * u_s[i];
        }
        out
    }
}
