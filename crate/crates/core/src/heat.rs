//! Heat flow on an evolving rotationally symmetric background, with the
//! decay diagnostics built on top of it: sup-norm decay, the Li-Yau
//! gradient quantity, Harnack margins, L^p-mass dissipation, and the
//! curvature-to-solution ratio |Rm|^2 / u^2.
//!
//! The solver integrates u_t = Delta_{g(t)} u with RK4 on the shared
//! mapped grid, reading the metric from a flow trajectory.  Inside each
//! snapshot interval the chain-rule arrays J and J_xi are interpolated
//! linearly in time; both are linear functions of (phi, psi), so this is
//! exactly linear interpolation of the metric.  Only the ratio
//! psi_s / psi is interpolated as a ratio, which differs from the exact
//! value at the same O(dt_snap^2) order as the interpolation itself.
//!
//! The center row of the Laplacian carries the full dimension factor
//! (Delta u(0) = n u_ss(0)), so the parabolic step bound divides the
//! flow's bound by n.
//!
//! The reference initial datum is r^(-2-sigma) outside r = 1 with an even
//! quartic cap inside matching value and two derivatives at the seam.
//! The cap is strictly decreasing on [0, 1] for every sigma > 0, so the
//! datum stays positive, and evenness in r keeps it smooth at the center.
//! Scalar ghost nodes past the outer boundary continue u with the same
//! power law.
//!
//! Diagnostic suprema are taken over nodes carrying at least 1e-30 of
//! sup u; below that the field is representation noise (a Gaussian tail
//! underflows to isolated denormals whose difference quotients are pure
//! rounding).

use crate::chart::{Chart, OuterBc, ScalarBc};
use crate::curvature;
use crate::fit;
use crate::flow::{FlowTrajectory, DEFAULT_CFL};
use crate::measure::{integrate_dv, radial_distance_table};
use crate::profile::MetricProfile;
use crate::stencil::{DerivOps, Extended, OuterScheme, Parity};
use thiserror::Error;

/// Relative floor under which nodes are excluded from diagnostic suprema.
const SUPPORT_FLOOR: f64 = 1e-30;

/// The Li-Yau bound degenerates as t -> 0; fits and Harnack pairs only use
/// instants at or past this time.
pub const LI_YAU_T_MIN: f64 = 0.1;

#[derive(Debug, Error)]
pub enum HeatError {
    #[error("datum decay order must be positive, got {0}")]
    BadSigma(f64),
    #[error("L^p exponent {p} outside the dissipation interval ({lo}, {hi})")]
    BadExponent { p: f64, lo: f64, hi: f64 },
    #[error("datum has {field} nodes, grid has {grid}")]
    LengthMismatch { field: usize, grid: usize },
    #[error("datum is non-finite, negative, or identically zero (node {0})")]
    BadDatum(usize),
    #[error("u turned negative or non-finite by t = {time}")]
    PositivityLoss { time: f64 },
    #[error("fit needs a decade of data past the transient, got [{lo}, {hi}]")]
    ShortWindow { lo: f64, hi: f64 },
}

#[derive(Debug, Clone)]
pub struct HeatControls {
    /// fraction of the parabolic step bound
    pub cfl: f64,
    /// L^p monitor exponent; None picks the midpoint of (n/(2+sigma), n/2)
    pub lp_exponent: Option<f64>,
    /// power-law order continuing u past the outer boundary; None picks
    /// 2 + sigma to match the reference datum
    pub tail_exponent: Option<f64>,
}

impl Default for HeatControls {
    fn default() -> Self {
        HeatControls {
            cfl: DEFAULT_CFL,
            lp_exponent: None,
            tail_exponent: None,
        }
    }
}

/// Node values of u at every trajectory snapshot plus the per-snapshot
/// diagnostic series.  `epsilon` is the Type-III constant of the driving
/// trajectory, reused by the Harnack and ratio-bound checks.
#[derive(Debug, Clone)]
pub struct HeatSolution {
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub dim: usize,
    /// decay order of the initial datum
    pub sigma: f64,
    /// exponent of the L^p-mass series
    pub lp_exponent: f64,
    /// smallest eps with sup |Rm| <= eps / (1 + t) over the run
    pub epsilon: f64,
    pub sup_u: Vec<f64>,
    /// t * sup(|grad u|^2 / u^2 - 2 u_t / u)
    pub li_yau: Vec<f64>,
    /// sup |Rm|^2 / u^2
    pub w_ratio_sup: Vec<f64>,
    /// integral of u^p over the manifold
    pub lp_mass: Vec<f64>,
}

/// The reference datum: r^(-2-sigma) outside r = 1, even quartic
/// a + b r^2 + c r^4 inside, matching value and first two derivatives at
/// the seam.  The interior critical point of the cap sits at
/// r^2 = 1 + 2/(4+sigma) > 1, so the cap decreases monotonically on
/// [0, 1] and the datum is positive everywhere.
pub fn initial_datum(profile: &MetricProfile, sigma: f64) -> Result<Vec<f64>, HeatError> {
    if !(sigma > 0.0) {
        return Err(HeatError::BadSigma(sigma));
    }
    let q = 2.0 + sigma;
    let c = q * (4.0 + sigma) / 8.0;
    let b = -q * (6.0 + sigma) / 4.0;
    let a = 1.0 + q * (8.0 + sigma) / 8.0;
    Ok(profile
        .grid
        .nodes
        .iter()
        .map(|&r| {
            if r >= 1.0 {
                r.powf(-q)
            } else {
                let r2 = r * r;
                a + r2 * (b + r2 * c)
            }
        })
        .collect())
}

/// Chain-rule coefficient arrays of one snapshot chart.
struct Coeffs {
    j: Vec<f64>,
    j_xi: Vec<f64>,
    /// psi_s / psi; entry 0 unused (the center uses the n u_ss limit)
    lam: Vec<f64>,
}

impl Coeffs {
    fn from_chart(chart: &Chart) -> Coeffs {
        let len = chart.len();
        let mut lam = vec![0.0; len];
        for i in 1..len {
            lam[i] = chart.psi_s[i] / chart.psi(i);
        }
        Coeffs {
            j: chart.j.clone(),
            j_xi: chart.j_xi.clone(),
            lam,
        }
    }
}

/// Everything the stage evaluator needs that does not change in time.
struct HeatOps {
    ops: DerivOps,
    dim: usize,
    exponent: f64,
    r_last: f64,
    ghost_r: [f64; 2],
}

struct StageBufs {
    u_xi: Vec<f64>,
    u_xixi: Vec<f64>,
}

impl HeatOps {
    /// Laplace-Beltrami of u in the metric interpolated between the
    /// bracketing snapshots a and b with weight w.
    fn laplacian(
        &self,
        u: &[f64],
        a: &Coeffs,
        b: &Coeffs,
        w: f64,
        bufs: &mut StageBufs,
        out: &mut [f64],
    ) {
        let len = u.len();
        let un = u[len - 1];
        let ghosts = [
            un * (self.r_last / self.ghost_r[0]).powf(self.exponent),
            un * (self.r_last / self.ghost_r[1]).powf(self.exponent),
        ];
        let ext = Extended::new(u, Parity::Even, ghosts);
        self.ops.d1(&ext, OuterScheme::Ghost, &mut bufs.u_xi);
        self.ops.d2(&ext, OuterScheme::Ghost, &mut bufs.u_xixi);
        let nm1 = (self.dim - 1) as f64;
        for i in 0..len {
            let j = a.j[i] + w * (b.j[i] - a.j[i]);
            let j_xi = a.j_xi[i] + w * (b.j_xi[i] - a.j_xi[i]);
            let u_s = bufs.u_xi[i] / j;
            let u_ss = (bufs.u_xixi[i] - bufs.u_xi[i] * j_xi / j) / (j * j);
            out[i] = if i == 0 {
                self.dim as f64 * u_ss
            } else {
                let lam = a.lam[i] + w * (b.lam[i] - a.lam[i]);
                u_ss + nm1 * lam * u_s
            };
        }
    }
}

struct SnapData {
    chart: Chart,
    coeffs: Coeffs,
    rm: Vec<f64>,
}

fn snap_data(trajectory: &FlowTrajectory, k: usize) -> SnapData {
    let profile = &trajectory.snapshots[k].profile;
    let chart = profile.chart(OuterBc::Robin {
        sigma: profile.sigma,
    });
    let mut rm = curvature::curvature_from_chart(&chart).rm_norm;
    // second-derivative rounding scales as eps / ds^2; curvature below
    // that is grid noise and must not leak into the |Rm|^2 / u^2 ratio,
    // whose denominator can be legitimately tiny
    for (i, v) in rm.iter_mut().enumerate() {
        let ds = chart.j[i] * chart.h;
        if *v <= 64.0 * f64::EPSILON / (ds * ds) {
            *v = 0.0;
        }
    }
    let coeffs = Coeffs::from_chart(&chart);
    SnapData { chart, coeffs, rm }
}

fn step_bound(a: &Coeffs, b: &Coeffs, h: f64, cfl: f64, dim: usize) -> f64 {
    let min_j = a
        .j
        .iter()
        .chain(&b.j)
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let ds = min_j * h;
    cfl * ds * ds / dim as f64
}

/// Solve with the reference capped power-law datum.
pub fn solve_heat(
    trajectory: &FlowTrajectory,
    sigma: f64,
    controls: &HeatControls,
) -> Result<HeatSolution, HeatError> {
    let u0 = initial_datum(&trajectory.snapshots[0].profile, sigma)?;
    solve_heat_from(trajectory, sigma, u0, controls)
}

/// Solve from an arbitrary positive datum given at the snapshot-0 nodes.
pub fn solve_heat_from(
    trajectory: &FlowTrajectory,
    sigma: f64,
    u0: Vec<f64>,
    controls: &HeatControls,
) -> Result<HeatSolution, HeatError> {
    if !(sigma > 0.0) {
        return Err(HeatError::BadSigma(sigma));
    }
    let first = &trajectory.snapshots[0].profile;
    let len = first.grid.nodes.len();
    if u0.len() != len {
        return Err(HeatError::LengthMismatch {
            field: u0.len(),
            grid: len,
        });
    }
    // a Gaussian-type far field underflows to exact zeros; those are fine,
    // a negative or non-finite entry is not
    if let Some(i) = u0.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(HeatError::BadDatum(i));
    }
    if u0.iter().all(|v| *v == 0.0) {
        return Err(HeatError::BadDatum(0));
    }
    let dim = first.dim;
    let nf = dim as f64;
    let (p_lo, p_hi) = (nf / (2.0 + sigma), nf / 2.0);
    let p = controls
        .lp_exponent
        .unwrap_or_else(|| 0.5 * (p_lo + p_hi));
    if !(p > p_lo && p < p_hi) {
        return Err(HeatError::BadExponent {
            p,
            lo: p_lo,
            hi: p_hi,
        });
    }
    let exponent = controls.tail_exponent.unwrap_or(2.0 + sigma);

    let mut cur = snap_data(trajectory, 0);
    let heat_ops = HeatOps {
        ops: DerivOps::new(cur.chart.h),
        dim,
        exponent,
        r_last: cur.chart.r(len - 1),
        ghost_r: [
            cur.chart.r_ext.values[len + 2],
            cur.chart.r_ext.values[len + 3],
        ],
    };

    let times = &trajectory.times;
    let mut sol = HeatSolution {
        times: times.clone(),
        u: Vec::with_capacity(times.len()),
        dim,
        sigma,
        lp_exponent: p,
        epsilon: trajectory.type_iii_epsilon(),
        sup_u: Vec::with_capacity(times.len()),
        li_yau: Vec::with_capacity(times.len()),
        w_ratio_sup: Vec::with_capacity(times.len()),
        lp_mass: Vec::with_capacity(times.len()),
    };

    let mut u = u0;
    record(&mut sol, times[0], &u, &cur, p, exponent);

    let mut bufs = StageBufs {
        u_xi: vec![0.0; len],
        u_xixi: vec![0.0; len],
    };
    let mut k1 = vec![0.0; len];
    let mut k2 = vec![0.0; len];
    let mut k3 = vec![0.0; len];
    let mut k4 = vec![0.0; len];
    let mut stage = vec![0.0; len];

    for k in 0..times.len() - 1 {
        let next = snap_data(trajectory, k + 1);
        let (t0, t1) = (times[k], times[k + 1]);
        let span = t1 - t0;
        let bound = step_bound(&cur.coeffs, &next.coeffs, cur.chart.h, controls.cfl, dim);
        let m = (span / bound).ceil().max(1.0) as usize;
        let dt = span / m as f64;
        for step in 0..m {
            let t = t0 + dt * step as f64;
            let w0 = (t - t0) / span;
            let wh = (t - t0 + 0.5 * dt) / span;
            let w1 = (t - t0 + dt) / span;
            let (a, b) = (&cur.coeffs, &next.coeffs);
            heat_ops.laplacian(&u, a, b, w0, &mut bufs, &mut k1);
            for i in 0..len {
                stage[i] = u[i] + 0.5 * dt * k1[i];
            }
            heat_ops.laplacian(&stage, a, b, wh, &mut bufs, &mut k2);
            for i in 0..len {
                stage[i] = u[i] + 0.5 * dt * k2[i];
            }
            heat_ops.laplacian(&stage, a, b, wh, &mut bufs, &mut k3);
            for i in 0..len {
                stage[i] = u[i] + dt * k3[i];
            }
            heat_ops.laplacian(&stage, a, b, w1, &mut bufs, &mut k4);
            for i in 0..len {
                u[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
            }
        }
        // an unstable step flips signs at the scale of sup u; undershoots
        // at the dispersive edge of an underflowed tail sit hundreds of
        // orders below that and are clamped back to zero
        let sup = u.iter().cloned().fold(0.0f64, f64::max);
        if !sup.is_finite() || sup <= 0.0 {
            return Err(HeatError::PositivityLoss { time: t1 });
        }
        for v in u.iter_mut() {
            if !v.is_finite() || *v < -1e-13 * sup {
                return Err(HeatError::PositivityLoss { time: t1 });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        cur = next;
        record(&mut sol, t1, &u, &cur, p, exponent);
    }
    Ok(sol)
}

fn record(sol: &mut HeatSolution, t: f64, u: &[f64], snap: &SnapData, p: f64, exponent: f64) {
    let chart = &snap.chart;
    let (u_s, u_ss) = chart.scalar_derivs(u, ScalarBc::PowerLaw { exponent });
    let lap = chart.laplacian_from_derivs(&u_s, &u_ss);
    let sup = u.iter().cloned().fold(0.0f64, f64::max);
    let floor = sup * SUPPORT_FLOOR;
    let mut ly = f64::NEG_INFINITY;
    let mut ratio = 0.0f64;
    for i in 0..u.len() {
        if u[i] <= floor {
            continue;
        }
        let q = (u_s[i] * u_s[i] - 2.0 * u[i] * lap[i]) / (u[i] * u[i]);
        ly = ly.max(q);
        let w = snap.rm[i] / u[i];
        ratio = ratio.max(w * w);
    }
    let up: Vec<f64> = u.iter().map(|v| v.powf(p)).collect();
    sol.sup_u.push(sup);
    sol.li_yau.push(t * ly);
    sol.w_ratio_sup.push(ratio);
    sol.lp_mass.push(integrate_dv(chart, &up));
    sol.u.push(u.to_vec());
}

/// The constant bounding the Li-Yau series past the transient.
#[derive(Debug, Clone)]
pub struct LiYauFit {
    /// sup over t >= t_min of t * sup(|grad u|^2/u^2 - 2 u_t/u)
    pub c1: f64,
    pub window: (f64, f64),
}

pub fn li_yau_check(sol: &HeatSolution) -> Result<LiYauFit, HeatError> {
    let mut c1 = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (k, &t) in sol.times.iter().enumerate() {
        if t < LI_YAU_T_MIN {
            continue;
        }
        c1 = c1.max(sol.li_yau[k]);
        lo = lo.min(t);
        hi = hi.max(t);
    }
    if !c1.is_finite() {
        return Err(HeatError::ShortWindow { lo: 0.0, hi: 0.0 });
    }
    Ok(LiYauFit {
        c1,
        window: (lo, hi),
    })
}

/// One Harnack comparison: the solution at (node_early, snap_early)
/// against the later value at (node_late, snap_late).
#[derive(Debug, Clone, Copy)]
pub struct HarnackPair {
    pub node_early: usize,
    pub snap_early: usize,
    pub node_late: usize,
    pub snap_late: usize,
}

/// Per-pair margin
///   log u(y, t2) - log u(x, t1) + (c1/2) log(t2/t1)
///     + d_{g(t1)}(x, y)^2 (1 + t2 - t1)^(2 eps) / (2 (t2 - t1));
/// the Harnack inequality holds when every margin is nonnegative.
pub fn harnack_margins(
    sol: &HeatSolution,
    trajectory: &FlowTrajectory,
    pairs: &[HarnackPair],
    c1: f64,
) -> Vec<f64> {
    let mut table: Option<(usize, Vec<f64>)> = None;
    pairs
        .iter()
        .map(|pair| {
            assert!(pair.snap_early < pair.snap_late, "pairs must look forward");
            let t1 = sol.times[pair.snap_early];
            let t2 = sol.times[pair.snap_late];
            assert!(t1 > 0.0, "the early instant must be positive");
            if table.as_ref().map(|(k, _)| *k) != Some(pair.snap_early) {
                let profile = &trajectory.snapshots[pair.snap_early].profile;
                let chart = profile.chart(OuterBc::Robin {
                    sigma: profile.sigma,
                });
                table = Some((pair.snap_early, radial_distance_table(&chart)));
            }
            let dist = &table.as_ref().unwrap().1;
            let d = (dist[pair.node_late] - dist[pair.node_early]).abs();
            let du = t2 - t1;
            let late = sol.u[pair.snap_late][pair.node_late].max(1e-300).ln();
            let early = sol.u[pair.snap_early][pair.node_early].max(1e-300).ln();
            late - early
                + 0.5 * c1 * (t2 / t1).ln()
                + d * d * (1.0 + du).powf(2.0 * sol.epsilon) / (2.0 * du)
        })
        .collect()
}

/// Deterministic pair sampler.  Early instants sit at or past the Li-Yau
/// transient; half the pairs reuse the early node as the late node, which
/// is the binding case (zero distance, pure time comparison).  Nodes are
/// drawn from the representable support of u at their snapshot: past the
/// underflow edge log u reads the clamp floor, not the solution.
pub fn random_pairs(sol: &HeatSolution, count: usize, seed: u64) -> Vec<HarnackPair> {
    let eligible: Vec<usize> = (0..sol.times.len() - 1)
        .filter(|&k| sol.times[k] >= LI_YAU_T_MIN)
        .collect();
    if eligible.is_empty() {
        return Vec::new();
    }
    let support: Vec<Vec<usize>> = sol
        .u
        .iter()
        .zip(&sol.sup_u)
        .map(|(u, &sup)| {
            let floor = sup * SUPPORT_FLOOR;
            (0..u.len()).filter(|&i| u[i] > floor).collect()
        })
        .collect();
    let total = sol.times.len();
    let mut state = seed ^ 0x9e37_79b9_7f4a_7c15;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 33) as usize
    };
    (0..count)
        .map(|_| {
            let snap_early = eligible[next() % eligible.len()];
            let snap_late = snap_early + 1 + next() % (total - snap_early - 1);
            let early = &support[snap_early];
            let late = &support[snap_late];
            let node_early = early[next() % early.len()];
            let node_late = if next() % 2 == 0 && late.binary_search(&node_early).is_ok() {
                node_early
            } else {
                late[next() % late.len()]
            };
            HarnackPair {
                node_early,
                snap_early,
                node_late,
                snap_late,
            }
        })
        .collect()
}

/// Least-squares decay law sup u = C (1 + t)^slope past the transient.
#[derive(Debug, Clone)]
pub struct HeatDecayFit {
    pub c: f64,
    /// decay surplus: slope = -(1 + delta)
    pub delta: f64,
    pub slope: f64,
    pub window: (f64, f64),
    /// integrability of the datum asks for slope <= -1
    pub pass: bool,
}

pub fn decay_fit(sol: &HeatSolution) -> Result<HeatDecayFit, HeatError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (k, &t) in sol.times.iter().enumerate() {
        if t < 1.0 {
            continue;
        }
        xs.push((1.0 + t).ln());
        ys.push(sol.sup_u[k].max(1e-300).ln());
        lo = lo.min(t);
        hi = hi.max(t);
    }
    if xs.len() < 2 || (1.0 + hi) / (1.0 + lo) < 10.0 {
        return Err(HeatError::ShortWindow {
            lo: if lo.is_finite() { lo } else { 0.0 },
            hi: if hi.is_finite() { hi } else { 0.0 },
        });
    }
    let line = fit::fit_line(&xs, &ys);
    Ok(HeatDecayFit {
        c: line.intercept.exp(),
        delta: -line.slope - 1.0,
        slope: line.slope,
        window: (lo, hi),
        pass: line.slope <= -1.0,
    })
}

/// The growth bound on sup |Rm|^2 / u^2: the series scaled by
/// (1 + t)^(-16 eps) and its sup, the constant of the bound.
#[derive(Debug, Clone)]
pub struct RmOverUBound {
    pub normalized: Vec<f64>,
    pub bound: f64,
}

pub fn rm_over_u_bound(sol: &HeatSolution) -> RmOverUBound {
    let normalized: Vec<f64> = sol
        .times
        .iter()
        .zip(&sol.w_ratio_sup)
        .map(|(&t, &w)| w * (1.0 + t).powf(-16.0 * sol.epsilon))
        .collect();
    let bound = normalized.iter().cloned().fold(0.0, f64::max);
    RmOverUBound { normalized, bound }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{self, FlowControls, FlowState};
    use crate::grid::RadialGrid;
    use aeflow_testkit as testkit;
    use proptest::prelude::*;

    fn flat(n: usize, r_max: f64) -> MetricProfile {
        let grid = RadialGrid::sinh(r_max, n, 3.0).unwrap();
        MetricProfile::flat(grid, 3, 1.0).unwrap()
    }

    fn bump(n: usize, amp: f64, r_max: f64) -> MetricProfile {
        let grid = RadialGrid::sinh(r_max, n, 3.0).unwrap();
        MetricProfile::from_fn(grid, 3, 1.0, |r| {
            let u = 1.0 + amp / (1.0 + (r / 2.0) * (r / 2.0)).sqrt();
            (u * u, u * u)
        })
        .unwrap()
    }

    #[test]
    fn flat_kernel_reproduces_the_closed_form_evolution() {
        let p = flat(600, 40.0);
        let times = vec![0.25, 0.5, 1.0];
        let traj = FlowTrajectory::frozen(&p, &times);
        let u0: Vec<f64> = p
            .grid
            .nodes
            .iter()
            .map(|&r| testkit::heat_kernel(3, 0.25, r * r))
            .collect();
        let sol = solve_heat_from(&traj, 1.0, u0, &HeatControls::default()).unwrap();
        let err = p
            .grid
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &r)| (sol.u[2][i] - testkit::heat_kernel(3, 1.0, r * r)).abs())
            .fold(0.0f64, f64::max);
        assert!(err <= 1e-6, "kernel mismatch {err:.3e}");
        // the kernel saturates the bound: t * sup(...) = n at every instant
        for &v in &sol.li_yau {
            assert!((v - 3.0).abs() < 1e-3, "li_yau entry {v}");
        }
        let fit = li_yau_check(&sol).unwrap();
        assert!((fit.c1 - 3.0).abs() < 1e-3, "c1 = {}", fit.c1);
        // flat background: the curvature ratio vanishes identically
        assert!(sol.w_ratio_sup.iter().all(|v| *v == 0.0));
        // Harnack margins on sampled pairs, flat case (epsilon = 0)
        let pairs = random_pairs(&sol, 60, 7);
        assert_eq!(pairs.len(), 60);
        let margins = harnack_margins(&sol, &traj, &pairs, fit.c1);
        for m in &margins {
            assert!(*m >= -1e-6, "margin {m}");
        }
        // determinism of the sampler
        let again = random_pairs(&sol, 60, 7);
        assert!(pairs
            .iter()
            .zip(&again)
            .all(|(a, b)| a.node_early == b.node_early && a.snap_late == b.snap_late));
    }

    #[test]
    fn capped_power_datum_keeps_its_decay_rate() {
        let p = flat(600, 200.0);
        let times = vec![0.0, 0.25, 0.5, 1.0];
        let traj = FlowTrajectory::frozen(&p, &times);
        let sol = solve_heat(&traj, 1.0, &HeatControls::default()).unwrap();
        // independent route: radial convolution of the same datum on flat
        // space (coefficients of the sigma = 1 cap written out)
        let cap = |r: f64| {
            if r >= 1.0 {
                r.powi(-3)
            } else {
                4.375 + r * r * (-5.25 + r * r * 1.875)
            }
        };
        for idx in [0, 120, 240, 330] {
            let r = p.grid.nodes[idx];
            let want = testkit::radial_heat_convolution_n3(&cap, r, 1.0, 1e-10);
            let got = sol.u[3][idx];
            assert!(
                (got - want).abs() <= 1e-5 * want,
                "r = {r:.3}: {got:.8e} vs {want:.8e}"
            );
        }
        // the datum's decay rate survives: u(1) * r^3 pinched on [10, 100]
        let last = sol.u.last().unwrap();
        let mut ratio_min = f64::INFINITY;
        let mut ratio_max = 0.0f64;
        for (i, &r) in p.grid.nodes.iter().enumerate() {
            if r < 10.0 || r > 100.0 {
                continue;
            }
            let ratio = last[i] * r.powi(3);
            ratio_min = ratio_min.min(ratio);
            ratio_max = ratio_max.max(ratio);
        }
        assert!(ratio_min > 0.5 && ratio_max < 2.0, "{ratio_min} {ratio_max}");
        // L^p mass dissipates
        for w in sol.lp_mass.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{} -> {}", w[0], w[1]);
        }
        assert!((sol.lp_exponent - 1.25).abs() < 1e-12);
    }

    #[test]
    fn constant_datum_is_stationary_and_flagged_as_non_decaying() {
        let p = flat(100, 10.0);
        let times = vec![0.0, 1.0, 19.0];
        let traj = FlowTrajectory::frozen(&p, &times);
        let len = p.grid.nodes.len();
        let controls = HeatControls {
            tail_exponent: Some(0.0),
            ..HeatControls::default()
        };
        let sol = solve_heat_from(&traj, 1.0, vec![1.0; len], &controls).unwrap();
        let drift = sol
            .u
            .last()
            .unwrap()
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0f64, f64::max);
        assert!(drift <= 1e-9, "drift {drift:.3e}");
        let fit = decay_fit(&sol).unwrap();
        assert!(!fit.pass);
        assert!(fit.slope.abs() < 1e-6, "slope {}", fit.slope);
    }

    #[test]
    fn evolving_background_dissipates_lp_mass() {
        let p = bump(200, 0.3, 40.0);
        let state = FlowState::new(p);
        let controls = FlowControls {
            snapshot_dt: 0.5,
            monitor_mass: false,
            monitor_ae: false,
            ..FlowControls::default()
        };
        let traj = flow::run(&state, 2.0, &controls).unwrap();
        let sol = solve_heat(&traj, 1.0, &HeatControls::default()).unwrap();
        // R >= 0 for this family, so the L^p mass genuinely dissipates
        for w in sol.lp_mass.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{} -> {}", w[0], w[1]);
        }
        assert!(sol.epsilon > 0.0);
        assert!(sol
            .w_ratio_sup
            .iter()
            .all(|v| v.is_finite() && *v > 0.0));
        assert!(sol.li_yau.iter().all(|v| v.is_finite()));
        let bound = rm_over_u_bound(&sol);
        assert!(bound.bound > 0.0 && bound.bound.is_finite());
    }

    #[test]
    fn contract_checks() {
        let p = flat(100, 10.0);
        let times = vec![0.0, 0.5, 1.0];
        let traj = FlowTrajectory::frozen(&p, &times);
        let len = p.grid.nodes.len();
        assert!(matches!(
            solve_heat(&traj, -1.0, &HeatControls::default()),
            Err(HeatError::BadSigma(_))
        ));
        assert!(matches!(
            solve_heat_from(&traj, 1.0, vec![1.0; 3], &HeatControls::default()),
            Err(HeatError::LengthMismatch { .. })
        ));
        let mut bad = vec![1.0; len];
        bad[7] = -0.25;
        assert!(matches!(
            solve_heat_from(&traj, 1.0, bad, &HeatControls::default()),
            Err(HeatError::BadDatum(7))
        ));
        assert!(matches!(
            solve_heat_from(&traj, 1.0, vec![0.0; len], &HeatControls::default()),
            Err(HeatError::BadDatum(0))
        ));
        let controls = HeatControls {
            lp_exponent: Some(2.0),
            ..HeatControls::default()
        };
        assert!(matches!(
            solve_heat(&traj, 1.0, &controls),
            Err(HeatError::BadExponent { .. })
        ));
        // the run above spans less than a decade past t = 1
        let sol = solve_heat(&traj, 1.0, &HeatControls::default()).unwrap();
        assert!(matches!(
            decay_fit(&sol),
            Err(HeatError::ShortWindow { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        /// Positivity and the maximum principle on a frozen background:
        /// a smooth positive bump datum stays positive and never exceeds
        /// its initial supremum.
        #[test]
        fn smooth_datum_stays_positive_below_its_initial_sup(
            amp in 0.1f64..1.0,
            center in 0.0f64..4.0,
            width in 0.8f64..2.0,
        ) {
            let p = flat(120, 12.0);
            let times = vec![0.0, 0.5];
            let traj = FlowTrajectory::frozen(&p, &times);
            let u0: Vec<f64> = p
                .grid
                .nodes
                .iter()
                .map(|&r| 1.0 + amp * (-((r - center) / width).powi(2)).exp())
                .collect();
            let sup0 = u0.iter().cloned().fold(0.0f64, f64::max);
            let controls = HeatControls {
                tail_exponent: Some(0.0),
                ..HeatControls::default()
            };
            let sol = solve_heat_from(&traj, 1.0, u0, &controls).unwrap();
            let last = sol.u.last().unwrap();
            prop_assert!(last.iter().all(|v| *v > 0.0));
            let sup1 = last.iter().cloned().fold(0.0f64, f64::max);
            prop_assert!(sup1 <= sup0 * (1.0 + 1e-9));
        }
    }
}
