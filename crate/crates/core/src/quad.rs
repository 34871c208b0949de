//! Quadrature on the uniform mapped coordinate.
//!
//! Integrands are sampled at grid nodes; radial integrals carry the mapping
//! Jacobian in the sample values.  The composite rule is Simpson with a 3/8
//! tail when the cell count is odd, 4th order throughout.  The cumulative
//! rule integrates the local cubic through each cell so running integrals
//! (arclength, enclosed volume) keep the same order.

/// Integral of node samples over the full uniform grid with spacing `h`.
pub fn integrate(h: f64, f: &[f64]) -> f64 {
    let n = f.len() - 1;
    assert!(n >= 4, "too few cells to integrate at 4th order");
    let simpson = |f: &[f64]| -> f64 {
        // f spans an even number of cells
        let m = f.len() - 1;
        let mut s = f[0] + f[m];
        for (i, v) in f.iter().enumerate().take(m).skip(1) {
            s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        s * h / 3.0
    };
    if n % 2 == 0 {
        simpson(f)
    } else {
        let split = f.len() - 4; // leave exactly 3 cells for the 3/8 rule
        let head = simpson(&f[..=split]);
        let t = &f[split..];
        head + 3.0 * h / 8.0 * (t[0] + 3.0 * t[1] + 3.0 * t[2] + t[3])
    }
}

/// Node weights w with sum_i w[i] f[i] == integrate(h, f) for every f.
/// Needed when an integral enters a linear system (constraint rows).
pub fn weights(h: f64, len: usize) -> Vec<f64> {
    let n = len - 1;
    assert!(n >= 4, "too few cells to integrate at 4th order");
    let mut w = vec![0.0; len];
    let simpson_into = |w: &mut [f64], lo: usize, hi: usize| {
        w[lo] += h / 3.0;
        w[hi] += h / 3.0;
        for i in lo + 1..hi {
            w[i] += if (i - lo) % 2 == 1 { 4.0 } else { 2.0 } * h / 3.0;
        }
    };
    if n % 2 == 0 {
        simpson_into(&mut w, 0, n);
    } else {
        let split = len - 4;
        simpson_into(&mut w, 0, split);
        let c = 3.0 * h / 8.0;
        w[split] += c;
        w[split + 1] += 3.0 * c;
        w[split + 2] += 3.0 * c;
        w[split + 3] += c;
    }
    w
}

/// Running integral at every node: out[i] = integral of f over [x0, x_i].
///
/// Cell increments use the cubic through the four surrounding nodes
/// (weights -1,13,13,-1 over 24); end cells use the one-sided counterpart.
pub fn cumulative(h: f64, f: &[f64], out: &mut [f64]) {
    let n = f.len() - 1;
    assert!(n >= 4);
    assert_eq!(out.len(), f.len());
    out[0] = 0.0;
    for i in 0..n {
        let inc = if i == 0 {
            // nodes i..i+3, integrated over the leading cell
            h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if i == n - 1 {
            h / 24.0 * (f[n - 3] - 5.0 * f[n - 2] + 19.0 * f[n - 1] + 9.0 * f[n])
        } else {
            h / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2])
        };
        out[i + 1] = out[i] + inc;
    }
}

/// Integral of f from node `i` to mapped coordinate `xi` inside cell `i`,
/// using the cubic through nodes i-1..i+2 (clamped at the ends) and 3-point
/// Gauss-Legendre, exact for that cubic.
pub fn partial_cell(h: f64, f: &[f64], i: usize, frac: f64) -> f64 {
    let n = f.len() - 1;
    let base = i.saturating_sub(1).min(n - 3);
    let idx = [base, base + 1, base + 2, base + 3];
    let xs: [f64; 4] = [
        idx[0] as f64 - i as f64,
        idx[1] as f64 - i as f64,
        idx[2] as f64 - i as f64,
        idx[3] as f64 - i as f64,
    ];
    let lagrange = |t: f64| -> f64 {
        let mut s = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (t - xs[b]) / (xs[a] - xs[b]);
                }
            }
            s += w * f[idx[a]];
        }
        s
    };
    let half = frac / 2.0;
    let g = (3.0f64 / 5.0).sqrt();
    let pts = [half * (1.0 - g), half, half * (1.0 + g)];
    let wts = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
    let mut s = 0.0;
    for (p, w) in pts.iter().zip(wts) {
        s += w * lagrange(*p);
    }
    s * frac * h
}
