//! Least-squares fits used by the monitors: straight lines in log-log space
//! and the three-parameter tail model `m(r) = m_inf + a * r^(-p)`.

/// Straight-line fit y = slope * x + intercept with RMS residual.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "line fit needs at least two points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let e = y - (slope * x + intercept);
        ss += e * e;
    }
    LineFit {
        slope,
        intercept,
        rms: (ss / n).sqrt(),
    }
}

/// Result of the power-law tail fit.
#[derive(Debug, Clone, Copy)]
pub struct PowerTailFit {
    pub limit: f64,
    pub amplitude: f64,
    pub exponent: f64,
    pub rms: f64,
}

/// Fit data (r_k, m_k) to `m_inf + a * r^(-p)`.
///
/// For fixed p the problem is linear in (m_inf, a); p is then minimized by a
/// golden-section search started around `p_init`.  Deterministic and free of
/// external solver state.
pub fn fit_power_tail(rs: &[f64], ms: &[f64], p_init: f64) -> PowerTailFit {
    assert_eq!(rs.len(), ms.len());
    assert!(rs.len() >= 3, "tail fit needs at least three radii");
    let solve_for = |p: f64| -> (f64, f64, f64) {
        // normal equations for the design matrix [1, r^-p]
        let n = rs.len() as f64;
        let mut sb = 0.0;
        let mut sbb = 0.0;
        let mut sy = 0.0;
        let mut sby = 0.0;
        for (r, m) in rs.iter().zip(ms) {
            let b = r.powf(-p);
            sb += b;
            sbb += b * b;
            sy += m;
            sby += b * m;
        }
        let det = n * sbb - sb * sb;
        let m_inf = (sbb * sy - sb * sby) / det;
        let a = (n * sby - sb * sy) / det;
        let mut ss = 0.0;
        for (r, m) in rs.iter().zip(ms) {
            let e = m - (m_inf + a * r.powf(-p));
            ss += e * e;
        }
        (m_inf, a, (ss / n).sqrt())
    };
    // bracket the exponent around the declared decay order
    let mut lo = (0.2 * p_init).max(0.05);
    let mut hi = 3.0 * p_init + 2.0;
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = solve_for(x1).2;
    let mut f2 = solve_for(x2).2;
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = solve_for(x1).2;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = solve_for(x2).2;
        }
    }
    let p = 0.5 * (lo + hi);
    let (m_inf, a, rms) = solve_for(p);
    PowerTailFit {
        limit: m_inf,
        amplitude: a,
        exponent: p,
        rms,
    }
}
