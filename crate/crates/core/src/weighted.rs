//! Weighted sup-norms for asymptotic decay bookkeeping.
//!
//! The order-k weight-beta norm of a radial field u is built from the terms
//! sup_(r >= r_floor) r^(-beta+i) |d^i u/dr^i| for i = 0..k, with the value
//! taken as the largest term.  Derivatives are plain coordinate derivatives
//! in r, obtained on the mapped grid by repeated first-derivative sweeps.

use thiserror::Error;

use crate::chart::Chart;

#[derive(Debug, Error)]
pub enum WeightedError {
    #[error("order {k} requested but only {have} derivative arrays supplied")]
    MissingDerivatives { k: usize, have: usize },
    #[error("r_floor must be positive, got {0}")]
    BadFloor(f64),
}

#[derive(Debug, Clone)]
pub struct WeightedNormReport {
    pub k: usize,
    pub beta: f64,
    /// the norm: max over per_term
    pub value: f64,
    /// per_term[i] = sup r^(-beta+i) |d^i u/dr^i| over r >= r_floor
    pub per_term: Vec<f64>,
}

/// Successive coordinate r-derivatives of an even radial field:
/// out[i] = d^i u/dr^i at the nodes, i = 0..=k.
pub fn radial_derivatives(chart: &Chart, u: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(u.to_vec());
    for i in 0..k {
        let prev = &out[i];
        // d/dr = phi * d/ds; parity alternates with each derivative
        let mut d = if i % 2 == 0 {
            chart.d_s_even(prev)
        } else {
            chart.d_s_odd(prev)
        };
        for (j, v) in d.iter_mut().enumerate() {
            *v *= chart.phi(j);
        }
        out.push(d);
    }
    out
}

/// Weighted norm from precomputed derivative arrays; derivs[i] must hold
/// d^i u/dr^i. Nodes below r_floor are excluded (the weight degenerates at
/// the center).
pub fn weighted_norm(
    radii: &[f64],
    derivs: &[Vec<f64>],
    beta: f64,
    k: usize,
    r_floor: f64,
) -> Result<WeightedNormReport, WeightedError> {
    if !(r_floor > 0.0) {
        return Err(WeightedError::BadFloor(r_floor));
    }
    if derivs.len() < k + 1 {
        return Err(WeightedError::MissingDerivatives {
            k,
            have: derivs.len(),
        });
    }
    let mut per_term = Vec::with_capacity(k + 1);
    for (i, d) in derivs.iter().take(k + 1).enumerate() {
        let w = -beta + i as f64;
        let mut sup: f64 = 0.0;
        for (&r, &v) in radii.iter().zip(d) {
            if r >= r_floor {
                sup = sup.max(r.powf(w) * v.abs());
            }
        }
        per_term.push(sup);
    }
    let value = per_term.iter().cloned().fold(0.0, f64::max);
    Ok(WeightedNormReport {
        k,
        beta,
        value,
        per_term,
    })
}

/// Convenience wrapper: norm of a field sampled on a chart's grid.
pub fn weighted_norm_on_chart(
    chart: &Chart,
    u: &[f64],
    beta: f64,
    k: usize,
    r_floor: f64,
) -> Result<WeightedNormReport, WeightedError> {
    let derivs = radial_derivatives(chart, u, k);
    let radii: Vec<f64> = (0..chart.len()).map(|i| chart.r(i)).collect();
    weighted_norm(&radii, &derivs, beta, k, r_floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::OuterBc;
    use crate::grid::RadialGrid;
    use crate::profile::MetricProfile;

    #[test]
    fn power_field_has_unit_norm_at_matching_weight() {
        let p = MetricProfile::flat(RadialGrid::sinh(1000.0, 800, 6.0).unwrap(), 3, 1.0).unwrap();
        let u: Vec<f64> = p
            .grid
            .nodes
            .iter()
            .map(|&r| if r == 0.0 { 0.0 } else { r.powf(-1.0) })
            .collect();
        let rep = weighted_norm(&p.grid.nodes, &[u], -1.0, 0, 1.0).unwrap();
        assert!((rep.value - 1.0).abs() < 1e-12, "norm = {}", rep.value);
    }

    #[test]
    fn derivative_terms_enter_with_shifted_weights() {
        // u = r^-1 on r >= 1: |u'| = r^-2, so the k = 1 term with weight
        // -beta+1 = 2 also sups to 1.
        let p = MetricProfile::flat(RadialGrid::sinh(1000.0, 1600, 6.0).unwrap(), 3, 1.0).unwrap();
        let chart = p.chart(OuterBc::OneSided);
        let u: Vec<f64> = p
            .grid
            .nodes
            .iter()
            .map(|&r| 1.0 / (1.0 + r))
            .collect();
        let rep = weighted_norm_on_chart(&chart, &u, -1.0, 1, 5.0).unwrap();
        // both terms approach 1 from below as r -> inf
        assert!(rep.per_term[0] < 1.0 && rep.per_term[0] > 0.98);
        assert!(rep.per_term[1] < 1.01 && rep.per_term[1] > 0.97, "{:?}", rep.per_term);
        assert_eq!(rep.value, rep.per_term[0].max(rep.per_term[1]));
    }

    #[test]
    fn arity_and_floor_contracts() {
        let radii = vec![0.0, 1.0, 2.0];
        let field = vec![vec![1.0, 1.0, 1.0]];
        assert!(matches!(
            weighted_norm(&radii, &field, 0.0, 2, 1.0),
            Err(WeightedError::MissingDerivatives { .. })
        ));
        assert!(matches!(
            weighted_norm(&radii, &field, 0.0, 0, 0.0),
            Err(WeightedError::BadFloor(_))
        ));
    }
}
