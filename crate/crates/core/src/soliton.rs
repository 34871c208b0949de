//! Residual audits for gradient Ricci solitons.
//!
//! A candidate consists of a profile, a radial potential f, and the soliton
//! constant lambda (0 steady, -1 shrinking, +1 expanding).  The defining
//! identity Rc + Hess f + (lambda/2) g = 0 has two independent components on
//! a rotationally symmetric metric, the radial one and the spherical one;
//! both are evaluated per node in the orthonormal frame of g.  No search is
//! attempted here, the module only measures how far a supplied candidate is
//! from satisfying the identities.

use crate::chart::{OuterBc, ScalarBc};
use crate::curvature::sectional_from_chart;
use crate::profile::MetricProfile;

#[derive(Debug, Clone)]
pub struct SolitonCandidate {
    pub profile: MetricProfile,
    /// potential values at the grid nodes, f = f(r)
    pub f: Vec<f64>,
    /// 0 steady, -1 shrinking, +1 expanding
    pub lambda: f64,
}

#[derive(Debug)]
pub enum SolitonError {
    LengthMismatch { field: usize, grid: usize },
    NonFinitePotential(usize),
    /// Hamilton's identity only applies to steady candidates.
    NotSteady(f64),
}

impl std::fmt::Display for SolitonError {
    fn fmt(&self, w: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolitonError::LengthMismatch { field, grid } => {
                write!(w, "potential has {field} nodes, grid has {grid}")
            }
            SolitonError::NonFinitePotential(i) => {
                write!(w, "potential is not finite at node {i}")
            }
            SolitonError::NotSteady(l) => {
                write!(w, "Hamilton identity requires lambda = 0, got {l}")
            }
        }
    }
}

impl std::error::Error for SolitonError {}

impl SolitonCandidate {
    pub fn new(profile: MetricProfile, f: Vec<f64>, lambda: f64) -> Result<Self, SolitonError> {
        if f.len() != profile.grid.nodes.len() {
            return Err(SolitonError::LengthMismatch {
                field: f.len(),
                grid: profile.grid.nodes.len(),
            });
        }
        if let Some(i) = f.iter().position(|v| !v.is_finite()) {
            return Err(SolitonError::NonFinitePotential(i));
        }
        Ok(SolitonCandidate { profile, f, lambda })
    }
}

#[derive(Debug, Clone)]
pub struct SolitonResidual {
    /// node-wise norm of Rc + Hess f + (lambda/2) g in the g-orthonormal frame
    pub field: Vec<f64>,
    /// sup of the field over r <= r_max / 2; the tail is excluded because
    /// one-sided outer stencils pollute the last few nodes
    pub sup_residual: f64,
}

/// Defect of the soliton identity for a candidate.
///
/// For radial f the Hessian is diagonal in the orthonormal frame with
/// eigenvalue f_ss in the radial direction and (psi_s/psi) f_s on the
/// sphere block; the latter tends to f_ss(0) at the center.
pub fn soliton_residual(cand: &SolitonCandidate) -> SolitonResidual {
    let chart = cand.profile.chart(OuterBc::OneSided);
    let (k_rad, k_sph) = sectional_from_chart(&chart);
    let (f_s, f_ss) = chart.scalar_derivs(&cand.f, ScalarBc::OneSided);
    let len = chart.len();
    let nf = cand.profile.dim as f64;
    let half_lambda = 0.5 * cand.lambda;

    let mut field = vec![0.0; len];
    for i in 0..len {
        let ric_rad = (nf - 1.0) * k_rad[i];
        let ric_sph = k_rad[i] + (nf - 2.0) * k_sph[i];
        let hess_sph = if i == 0 {
            f_ss[0]
        } else {
            chart.psi_s[i] / chart.psi(i) * f_s[i]
        };
        let d_rad = ric_rad + f_ss[i] + half_lambda;
        let d_sph = ric_sph + hess_sph + half_lambda;
        field[i] = (d_rad * d_rad + (nf - 1.0) * d_sph * d_sph).sqrt();
    }

    let half = cand.profile.grid.r_max / 2.0;
    let sup_residual = cand
        .profile
        .grid
        .nodes
        .iter()
        .zip(&field)
        .filter(|(r, _)| **r <= half)
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    SolitonResidual {
        field,
        sup_residual,
    }
}

#[derive(Debug, Clone)]
pub struct HamiltonIdentity {
    /// median of R + |grad f|^2 over r <= r_max / 2
    pub lambda_fit: f64,
    /// sup deviation from the median on the same region
    pub deviation: f64,
}

/// Steady-soliton first integral: R + |grad f|^2 is constant on a steady
/// gradient soliton.  Reports the median as the constant and the sup
/// deviation from it; a large deviation means the candidate is not steady.
pub fn hamilton_identity_check(cand: &SolitonCandidate) -> Result<HamiltonIdentity, SolitonError> {
    if cand.lambda != 0.0 {
        return Err(SolitonError::NotSteady(cand.lambda));
    }
    let chart = cand.profile.chart(OuterBc::OneSided);
    let (k_rad, k_sph) = sectional_from_chart(&chart);
    let (f_s, _) = chart.scalar_derivs(&cand.f, ScalarBc::OneSided);
    let nf = cand.profile.dim as f64;
    let c_rad = 2.0 * (nf - 1.0);
    let c_sph = (nf - 1.0) * (nf - 2.0);

    let half = cand.profile.grid.r_max / 2.0;
    let mut values: Vec<f64> = cand
        .profile
        .grid
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, r)| **r <= half)
        .map(|(i, _)| c_rad * k_rad[i] + c_sph * k_sph[i] + f_s[i] * f_s[i])
        .collect();
    values.sort_by(f64::total_cmp);
    let lambda_fit = values[values.len() / 2];
    let deviation = values
        .iter()
        .map(|v| (v - lambda_fit).abs())
        .fold(0.0, f64::max);
    Ok(HamiltonIdentity {
        lambda_fit,
        deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use proptest::prelude::*;

    fn flat(n: usize) -> MetricProfile {
        let grid = RadialGrid::sinh(1000.0, n, 6.0).unwrap();
        MetricProfile::flat(grid, 3, 1.0).unwrap()
    }

    /// The Gaussian trio on flat space: steady with f = 0, shrinking with
    /// f = r^2/4, expanding with f = -r^2/4.  Hess(r^2/4) = g/2 cancels
    /// (lambda/2) g exactly for lambda = -1, and mirrored for +1.
    #[test]
    fn gaussian_trio_has_vanishing_residual() {
        let p = flat(2000);
        let quarter_sq: Vec<f64> = p.grid.nodes.iter().map(|r| 0.25 * r * r).collect();
        let zero = vec![0.0; p.grid.nodes.len()];
        let neg: Vec<f64> = quarter_sq.iter().map(|v| -v).collect();
        for (f, lambda) in [(zero, 0.0), (quarter_sq, -1.0), (neg, 1.0)] {
            let cand = SolitonCandidate::new(p.clone(), f, lambda).unwrap();
            let res = soliton_residual(&cand);
            assert!(
                res.sup_residual <= 1e-10,
                "lambda {lambda}: residual {:.3e}",
                res.sup_residual
            );
        }
    }

    #[test]
    fn hamilton_identity_flat_and_linear_tail() {
        let p = flat(400);
        let zero = vec![0.0; p.grid.nodes.len()];
        let cand = SolitonCandidate::new(p.clone(), zero, 0.0).unwrap();
        let id = hamilton_identity_check(&cand).unwrap();
        assert!(id.lambda_fit.abs() < 1e-12);
        assert!(id.deviation < 1e-12);

        // f = a r past a smooth cap: R + f_s^2 = a^2 on the linear region,
        // so the median lands on a^2 while the cap shows up in the deviation
        let a = 0.7;
        let f: Vec<f64> = p
            .grid
            .nodes
            .iter()
            .map(|&r| {
                if r < 1.0 {
                    a * (0.375 + 0.75 * r * r - 0.125 * r.powi(4))
                } else {
                    a * r
                }
            })
            .collect();
        let cand = SolitonCandidate::new(p.clone(), f, 0.0).unwrap();
        let id = hamilton_identity_check(&cand).unwrap();
        assert!((id.lambda_fit - a * a).abs() < 1e-8, "{}", id.lambda_fit);
        assert!(id.deviation > 0.1 * a * a);

        let cand = SolitonCandidate::new(p, vec![0.0; 401], 1.0).unwrap();
        assert!(hamilton_identity_check(&cand).is_err());
    }

    #[test]
    fn rejects_malformed_candidates() {
        let p = flat(160);
        assert!(SolitonCandidate::new(p.clone(), vec![0.0; 7], 0.0).is_err());
        let mut f = vec![0.0; 161];
        f[5] = f64::NAN;
        assert!(SolitonCandidate::new(p, f, 0.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        /// Only derivatives of f enter the identity, so shifting the
        /// potential by a constant cannot change the residual.
        #[test]
        fn residual_ignores_constant_shifts(c in -50.0f64..50.0, lambda in prop::sample::select(vec![0.0f64, -1.0, 1.0])) {
            let p = flat(160);
            let f: Vec<f64> = p.grid.nodes.iter().map(|r| 0.01 * r * r / (1.0 + 0.1 * r)).collect();
            let shifted: Vec<f64> = f.iter().map(|v| v + c).collect();
            let base = soliton_residual(&SolitonCandidate::new(p.clone(), f, lambda).unwrap());
            let moved = soliton_residual(&SolitonCandidate::new(p, shifted, lambda).unwrap());
            for (a, b) in base.field.iter().zip(&moved.field) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }
    }
}
