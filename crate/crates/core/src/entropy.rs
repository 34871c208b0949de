//! The W functional and its constrained infimum mu on a fixed profile.
//!
//! With the substitution u = e^(-f/2) the functional reads
//!   W(g,u,tau) = Int [tau(|grad f|^2 + R) + f - n] e^(-f) dm,
//! over the normalized measure dm = (4 pi tau)^(-n/2) dV, and the
//! Euler-Lagrange equation divides through by u to become
//!   mu_pt(f) := tau (2 Lap f - |grad f|^2 + R) + f - n = mu,
//! a constant.  Solving in f instead of u keeps every quantity finite on
//! the far grid, where u underflows: f grows like d^2/(4 tau) and the
//! weight e^(-f) simply vanishes.  Positivity of u holds by construction,
//! so no flooring is ever needed.
//!
//! The minimization runs in two phases as follows.  A short projected
//! gradient descent (step size CFL-limited by the 2 tau Lap stiffness)
//! shapes the Gaussian initial guess, then Newton iterates on the bordered
//! system {E-L residual, normalization}.  The Jacobian is banded and is
//! assembled by finite-differencing the residual along striped probe
//! vectors, which keeps it exactly consistent with the residual code path;
//! the constraint multiplier mu enters every residual row linearly with
//! coefficient -1, so the border solve reduces to two banded solves.
//!
//! At the outermost two nodes the E-L rows are replaced by the far-field
//! balance of the deviation w = f - d^2/(4 tau) - mu, namely
//! w - d w' = G(d) with G = -mu_pt evaluated on the Gaussian reference.
//! On a curved profile the minimizer genuinely carries a linear far-field
//! correction w ~ A d (the pole-regular solution of the linearized
//! equation continues to such a tail; only the e^(d^2/4 tau) layer mode
//! is excluded), and this closure is chosen because it annihilates the
//! A d mode exactly, leaving the interior equations to set A, while
//! rejecting the layer mode with an O(d^2/tau) penalty.  On the flat
//! profile G = 0 and the closure is exact.
//!
//! Far out on a stretched grid the drift outruns the diffusion at the
//! cell scale (d ds / 2 > 2 tau), where centered stencils on an
//! advection-dominated equation admit sawtooth-carrying roots.  An
//! artificial viscosity on the deviation tops the diffusion up to the
//! drift scale there; it only activates where e^(-f) is far below
//! rounding, so the minimizer and mu are unaffected.

use crate::banded::Banded;
use crate::chart::{Chart, OuterBc, ScalarBc};
use crate::curvature::curvature_from_chart;
use crate::flow::FlowTrajectory;
use crate::measure::{radial_distance_table, volume_density};
use crate::profile::MetricProfile;
use crate::quad;

#[derive(Debug, Clone, Copy)]
pub struct EntropyControls {
    /// projected-descent warmup iterations before Newton
    pub descent_iters: usize,
    /// Newton iteration cap
    pub newton_iters: usize,
    /// sup-norm stop for the Newton residual
    pub newton_tol: f64,
    /// converged additionally requires the true E-L defect below this
    pub el_tol: f64,
}

impl Default for EntropyControls {
    fn default() -> Self {
        EntropyControls {
            descent_iters: 20,
            newton_iters: 40,
            newton_tol: 1e-9,
            el_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EntropySolution {
    pub tau: f64,
    /// minimizer test function at the nodes, u = e^(-f/2) >= 0
    pub u: Vec<f64>,
    pub mu_value: f64,
    /// W evaluated on the minimizer; matches mu_value up to quadrature
    pub w_value: f64,
    /// sup-norm of the pointwise Euler-Lagrange defect over the nodes
    /// carrying the minimizer's measure (relative weight above 1e-30);
    /// farther out the equation rows carry stabilization terms and the
    /// outermost two nodes carry boundary rows, none of which touch the
    /// measure
    pub el_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug)]
pub enum EntropyError {
    BadTau(f64),
    /// the supplied test function violates the unit-mass constraint
    NotNormalized(f64),
    LengthMismatch { field: usize, grid: usize },
    /// the banded Newton matrix lost rank at the given row
    SingularSystem(usize),
}

impl std::fmt::Display for EntropyError {
    fn fmt(&self, w: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EntropyError::BadTau(t) => write!(w, "tau must be positive, got {t}"),
            EntropyError::NotNormalized(m) => {
                write!(w, "test function has mass {m}, expected 1")
            }
            EntropyError::LengthMismatch { field, grid } => {
                write!(w, "field has {field} nodes, grid has {grid}")
            }
            EntropyError::SingularSystem(row) => {
                write!(w, "Newton system singular at row {row}")
            }
        }
    }
}

impl std::error::Error for EntropyError {}

/// Shared per-profile data for one (profile, tau) solve.
struct Solver {
    chart: Chart,
    tau: f64,
    dim: usize,
    /// scalar curvature at the nodes
    r_field: Vec<f64>,
    /// geodesic distance from the center
    dist: Vec<f64>,
    /// constraint quadrature weights: composite rule x volume density
    /// x (4 pi tau)^(-n/2)
    qw: Vec<f64>,
    /// Gaussian reference exponent d^2 / (4 tau)
    f_ref: Vec<f64>,
    /// right side of the far-field balance rows at the last two nodes
    g_tail: [f64; 2],
    /// artificial viscosity capping the cell Peclet number of the
    /// Gaussian drift; zero wherever e^(-f_ref) is above rounding
    chi: Vec<f64>,
}

const BAND: usize = 5;

impl Solver {
    fn new(profile: &MetricProfile, tau: f64) -> Self {
        let chart = profile.chart(OuterBc::Robin {
            sigma: profile.sigma,
        });
        let curv = curvature_from_chart(&chart);
        let dist = radial_distance_table(&chart);
        let density = volume_density(&chart);
        let len = chart.len();
        let norm = (4.0 * std::f64::consts::PI * tau).powf(-(profile.dim as f64) / 2.0);
        let qw: Vec<f64> = quad::weights(chart.h, len)
            .iter()
            .zip(&density)
            .map(|(w, d)| w * d * norm)
            .collect();
        let f_ref: Vec<f64> = dist.iter().map(|d| d * d / (4.0 * tau)).collect();
        // the linearized E-L operator advects the deviation with speed d
        // against diffusion 2 tau; where d ds / 2 exceeds 2 tau, centered
        // stencils admit oscillatory roots and unresolved boundary layers,
        // so the viscosity below tops the diffusion up to the advection
        // scale.  The threshold d^2 > 8 tau / (ds/d) keeps it strictly
        // outside the support of e^(-f_ref).
        let chi: Vec<f64> = dist
            .iter()
            .zip(&chart.j)
            .map(|(d, j)| (0.5 * d * j * chart.h - 2.0 * tau).max(0.0))
            .collect();
        let mut solver = Solver {
            chart,
            tau,
            dim: profile.dim,
            r_field: curv.r,
            dist,
            qw,
            f_ref,
            g_tail: [0.0, 0.0],
            chi,
        };
        let mu_ref = solver.mu_pointwise(&solver.f_ref);
        solver.g_tail = [-mu_ref[len - 2], -mu_ref[len - 1]];
        solver
    }

    /// Pointwise Euler-Lagrange value tau(2 Lap f - |grad f|^2 + R) + f - n.
    fn mu_pointwise(&self, f: &[f64]) -> Vec<f64> {
        let (f_s, f_ss) = self.chart.scalar_derivs(f, ScalarBc::OneSided);
        let lap = self.chart.laplacian_from_derivs(&f_s, &f_ss);
        let nf = self.dim as f64;
        (0..f.len())
            .map(|i| {
                self.tau * (2.0 * lap[i] - f_s[i] * f_s[i] + self.r_field[i]) + f[i] - nf
            })
            .collect()
    }

    /// Newton residual: E-L rows plus the Peclet-capping viscosity on the
    /// deviation from the Gaussian reference inside, far-field balance
    /// rows for the deviation at the two outermost nodes.  The viscosity
    /// vanishes identically when f - f_ref is affine, so the flat
    /// minimizer is untouched.
    fn residual(&self, f: &[f64], mu: f64) -> Vec<f64> {
        let len = f.len();
        let mut out = self.mu_pointwise(f);
        for v in out.iter_mut() {
            *v -= mu;
        }
        let dev: Vec<f64> = f.iter().zip(&self.f_ref).map(|(a, b)| a - b).collect();
        let (dev_s, dev_ss) = self.chart.scalar_derivs(&dev, ScalarBc::OneSided);
        for i in 0..len {
            out[i] += self.chi[i] * dev_ss[i];
        }
        for (k, j) in [len - 2, len - 1].into_iter().enumerate() {
            out[j] = dev[j] - mu - self.dist[j] * dev_s[j] - self.g_tail[k];
        }
        out
    }

    /// Constraint mass Int e^(-f) dm.
    fn mass(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.qw).map(|(v, q)| (-v).exp() * q).sum()
    }

    /// Shift (f, mu) jointly so the constraint holds exactly; the residual
    /// is invariant because every row carries f - mu.
    fn renormalize(&self, f: &mut [f64], mu: &mut f64) {
        let a = self.mass(f).ln();
        for v in f.iter_mut() {
            *v += a;
        }
        *mu += a;
    }

    /// Banded Jacobian of the residual in f by striped finite differences.
    /// Stripes spaced wider than the bandwidth never share a row, so each
    /// probe resolves its columns exactly; mu enters linearly and needs no
    /// probing.
    fn jacobian(&self, f: &[f64], mu: f64, base: &[f64]) -> Banded {
        let len = f.len();
        let stride = 2 * BAND + 1;
        let mut jac = Banded::zeros(len, BAND, BAND);
        let mut probe = vec![0.0; len];
        for color in 0..stride {
            probe.copy_from_slice(f);
            let mut deltas = vec![0.0; len];
            let mut k = color;
            while k < len {
                deltas[k] = 1e-7 * (1.0 + f[k].abs());
                probe[k] += deltas[k];
                k += stride;
            }
            let shifted = self.residual(&probe, mu);
            let mut k = color;
            while k < len {
                let lo = k.saturating_sub(BAND);
                let hi = (k + BAND).min(len - 1);
                for j in lo..=hi {
                    jac.set(j, k, (shifted[j] - base[j]) / deltas[k]);
                }
                k += stride;
            }
        }
        jac
    }
}

/// W(g, u, tau) for a supplied normalized test function, in the u form
///   Int [tau(4 u_s^2 + R u^2) - u^2 log u^2 - n u^2] dm,
/// with u^2 log u^2 continued by 0 where u vanishes.
pub fn w_functional(profile: &MetricProfile, u: &[f64], tau: f64) -> Result<f64, EntropyError> {
    if !(tau > 0.0) {
        return Err(EntropyError::BadTau(tau));
    }
    let len = profile.grid.nodes.len();
    if u.len() != len {
        return Err(EntropyError::LengthMismatch {
            field: u.len(),
            grid: len,
        });
    }
    let solver = Solver::new(profile, tau);
    let mass: f64 = u
        .iter()
        .zip(&solver.qw)
        .map(|(v, q)| v * v * q)
        .sum();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(EntropyError::NotNormalized(mass));
    }
    Ok(w_of_u(&solver, u))
}

fn w_of_u(solver: &Solver, u: &[f64]) -> f64 {
    let (u_s, _) = solver.chart.scalar_derivs(u, ScalarBc::OneSided);
    let nf = solver.dim as f64;
    u.iter()
        .enumerate()
        .map(|(i, &ui)| {
            let sq = ui * ui;
            let log_term = if sq > 0.0 { sq * sq.ln() } else { 0.0 };
            let val = solver.tau * (4.0 * u_s[i] * u_s[i] + solver.r_field[i] * sq)
                - log_term
                - nf * sq;
            val * solver.qw[i]
        })
        .sum()
}

/// Constrained minimization of W at scale tau: projected descent from the
/// Gaussian, then bordered-Newton polish of the Euler-Lagrange system.
pub fn minimize_mu(
    profile: &MetricProfile,
    tau: f64,
    controls: &EntropyControls,
) -> Result<EntropySolution, EntropyError> {
    if !(tau > 0.0) {
        return Err(EntropyError::BadTau(tau));
    }
    let solver = Solver::new(profile, tau);
    let len = solver.chart.len();
    let min_ds = solver
        .chart
        .j
        .iter()
        .map(|j| j * solver.chart.h)
        .fold(f64::INFINITY, f64::min);

    let mut f = solver.f_ref.clone();
    let mut mu = 0.0;
    solver.renormalize(&mut f, &mut mu);

    // phase one: steepest descent in the constraint tangent; the direction
    // mu_pt - mean(mu_pt) lowers W and preserves unit mass to first order
    let eta = 0.05 * min_ds * min_ds / tau.max(min_ds * min_ds);
    for _ in 0..controls.descent_iters {
        let mu_pt = solver.mu_pointwise(&f);
        let mean: f64 = mu_pt
            .iter()
            .zip(f.iter().zip(&solver.qw))
            .map(|(m, (v, q))| m * (-v).exp() * q)
            .sum();
        for i in 0..len {
            f[i] += eta * (mu_pt[i] - mean);
        }
        solver.renormalize(&mut f, &mut mu);
    }

    // phase two: Newton on {residual = 0, mass = 1} with mu bordered
    {
        let mu_pt = solver.mu_pointwise(&f);
        mu = mu_pt
            .iter()
            .zip(f.iter().zip(&solver.qw))
            .map(|(m, (v, q))| m * (-v).exp() * q)
            .sum();
    }
    // the residual of the far rows is a difference of terms of size
    // d_max^2 / (4 tau), so its evaluation carries a rounding floor
    // proportional to that scale; the stop test cannot sit below it
    let f_scale = solver.f_ref.iter().fold(0.0f64, |a, &b| a.max(b));
    let tol = controls.newton_tol.max(2e-13 * (1.0 + f_scale));
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..controls.newton_iters {
        iterations += 1;
        let base = solver.residual(&f, mu);
        let res_norm = base.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if std::env::var("AEFLOW_ENTROPY_TRACE").is_ok() {
            let arg = base
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .unwrap()
                .0;
            eprintln!("newton iter {iterations}: |F| = {res_norm:.3e} at row {arg}, mu = {mu:.6e}");
        }
        if res_norm <= tol {
            converged = true;
            break;
        }
        let jac = solver.jacobian(&f, mu, &base);
        let lu = match jac.factor() {
            Ok(lu) => lu,
            Err(row) => return Err(EntropyError::SingularSystem(row)),
        };
        let mut x1 = base.clone();
        lu.solve(&mut x1);
        let mut x2 = vec![-1.0; len];
        lu.solve(&mut x2);
        // constraint row: c . df = 0 with c_k = -qw_k e^(-f_k); the mass is
        // kept exact separately by renormalize
        let dot = |v: &[f64]| -> f64 {
            v.iter()
                .zip(f.iter().zip(&solver.qw))
                .map(|(x, (fv, q))| x * (-fv).exp() * q)
                .sum()
        };
        // with x1 = J^-1 F and x2 = J^-1 (-1): df = -x1 + dmu x2 keeps
        // c . df = 0, and the linearized rows then force dmu onto mu with
        // the opposite sign
        let denom = dot(&x2);
        let dmu = if denom.abs() > 1e-300 {
            dot(&x1) / denom
        } else {
            0.0
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let trial_f: Vec<f64> = (0..len)
                .map(|i| f[i] + alpha * (-x1[i] + dmu * x2[i]))
                .collect();
            let trial_mu = mu - alpha * dmu;
            if trial_f.iter().all(|v| v.is_finite()) {
                let trial_res = solver.residual(&trial_f, trial_mu);
                let trial_norm = trial_res.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                if trial_norm < res_norm {
                    f = trial_f;
                    mu = trial_mu;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        solver.renormalize(&mut f, &mut mu);
    }

    let mu_pt = solver.mu_pointwise(&f);
    let f_min = f.iter().cloned().fold(f64::INFINITY, f64::min);
    let el_residual = (0..len - 2)
        .filter(|&i| f[i] - f_min <= 69.0)
        .map(|i| (mu_pt[i] - mu).abs())
        .fold(0.0, f64::max);
    if std::env::var("AEFLOW_ENTROPY_TRACE").is_ok() {
        eprintln!("el defect {el_residual:.3e} after {iterations} iterations, mu = {mu:.6e}");
    }
    if el_residual > controls.el_tol {
        converged = false;
    }
    let u: Vec<f64> = f.iter().map(|v| (-v / 2.0).exp()).collect();
    let w_value = w_of_u(&solver, &u);
    Ok(EntropySolution {
        tau,
        u,
        mu_value: mu,
        w_value,
        el_residual,
        iterations,
        converged,
    })
}

/// Reporting conversion between mu at unit scale and the lambda
/// normalization: lambda = mu(g,1) + (n/2) log(4 pi) + n.
pub fn lambda_from_mu(mu_at_one: f64, dim: usize) -> f64 {
    let nf = dim as f64;
    mu_at_one + nf / 2.0 * (4.0 * std::f64::consts::PI).ln() + nf
}

#[derive(Debug, Clone)]
pub struct MuTail {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    pub all_converged: bool,
}

/// mu along an increasing tau ladder on a fixed profile.
pub fn mu_tail(
    profile: &MetricProfile,
    taus: &[f64],
    controls: &EntropyControls,
) -> Result<MuTail, EntropyError> {
    let mut values = Vec::with_capacity(taus.len());
    let mut all_converged = true;
    for &tau in taus {
        let sol = minimize_mu(profile, tau, controls)?;
        all_converged &= sol.converged;
        values.push(sol.mu_value);
    }
    Ok(MuTail {
        taus: taus.to_vec(),
        values,
        all_converged,
    })
}

#[derive(Debug, Clone)]
pub struct MonotonicityCheck {
    pub mu_early: f64,
    pub mu_late: f64,
    /// mu_late - mu_early; monotonicity along the flow demands this be
    /// nonnegative up to solver tolerance
    pub margin: f64,
    pub pass: bool,
    pub both_converged: bool,
}

/// Entropy monotonicity probe: compares mu(g(t1), tau_bar - t1) with
/// mu(g(t2), tau_bar - t2) on a trajectory, interpolating the metric.
pub fn monotonicity_check(
    trajectory: &FlowTrajectory,
    tau_bar: f64,
    t1: f64,
    t2: f64,
    tol: f64,
    controls: &EntropyControls,
) -> Result<MonotonicityCheck, EntropyError> {
    assert!(t1 <= t2 && t2 < tau_bar, "need t1 <= t2 < tau_bar");
    let reference = &trajectory.snapshots[0].profile;
    let solve_at = |t: f64| -> Result<EntropySolution, EntropyError> {
        let (phi, psi) = trajectory.metric_at(t);
        let profile = MetricProfile::new(
            reference.grid.clone(),
            reference.dim,
            reference.sigma,
            phi,
            psi,
        )
        .expect("interpolated flow state is a valid profile");
        minimize_mu(&profile, tau_bar - t, controls)
    };
    let early = solve_at(t1)?;
    let late = solve_at(t2)?;
    let margin = late.mu_value - early.mu_value;
    Ok(MonotonicityCheck {
        mu_early: early.mu_value,
        mu_late: late.mu_value,
        margin,
        pass: margin >= -tol,
        both_converged: early.converged && late.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;

    fn flat(n: usize) -> MetricProfile {
        let grid = RadialGrid::sinh(1000.0, n, 6.0).unwrap();
        MetricProfile::flat(grid, 3, 1.0).unwrap()
    }

    fn bump(n: usize, amp: f64) -> MetricProfile {
        let grid = RadialGrid::sinh(1000.0, n, 6.0).unwrap();
        MetricProfile::from_fn(grid, 3, 1.0, |r| {
            let u = 1.0 + amp / (1.0 + (r / 2.0) * (r / 2.0)).sqrt();
            (u * u, u * u)
        })
        .unwrap()
    }

    #[test]
    fn flat_gaussian_is_the_exact_minimizer() {
        let p = flat(800);
        for tau in [0.5, 1.0, 10.0] {
            let sol = minimize_mu(&p, tau, &EntropyControls::default()).unwrap();
            assert!(sol.converged, "tau {tau} did not converge");
            assert!(sol.mu_value.abs() < 1e-8, "tau {tau}: mu {}", sol.mu_value);
            let dist = radial_distance_table(&p.chart(OuterBc::OneSided));
            for (i, &d) in dist.iter().enumerate() {
                let gauss = (-d * d / (8.0 * tau)).exp();
                assert!(
                    (sol.u[i] - gauss).abs() < 1e-6,
                    "tau {tau} node {i}: {} vs {gauss}",
                    sol.u[i]
                );
            }
            assert!((sol.w_value - sol.mu_value).abs() < 1e-7);
        }
    }

    #[test]
    fn curved_profile_has_negative_mu_and_consistent_w() {
        let p = bump(800, 0.1);
        let sol = minimize_mu(&p, 1.0, &EntropyControls::default()).unwrap();
        assert!(sol.converged, "el residual {}", sol.el_residual);
        assert!(sol.mu_value < -1e-4, "mu {}", sol.mu_value);
        assert!(sol.u.iter().all(|&v| v >= 0.0));
        // minimizer mass sits on the constraint
        let solver = Solver::new(&p, 1.0);
        let mass: f64 = sol
            .u
            .iter()
            .zip(&solver.qw)
            .map(|(v, q)| v * v * q)
            .sum();
        assert!((mass - 1.0).abs() < 1e-10, "mass {mass}");
        assert!(
            (sol.w_value - sol.mu_value).abs() < 1e-6,
            "w {} vs mu {}",
            sol.w_value,
            sol.mu_value
        );
    }

    #[test]
    fn mu_is_dilation_invariant() {
        let p = bump(800, 0.1);
        let c: f64 = 1.3;
        let base = minimize_mu(&p, 1.0, &EntropyControls::default()).unwrap();
        let scaled = minimize_mu(&p.dilate(c), c * c, &EntropyControls::default()).unwrap();
        assert!(base.converged && scaled.converged);
        assert!(
            (base.mu_value - scaled.mu_value).abs() < 1e-6,
            "{} vs {}",
            base.mu_value,
            scaled.mu_value
        );
    }

    #[test]
    fn w_functional_contract_checks() {
        let p = flat(400);
        let len = p.grid.nodes.len();
        assert!(matches!(
            w_functional(&p, &vec![1.0; len], 1.0),
            Err(EntropyError::NotNormalized(_))
        ));
        assert!(matches!(
            w_functional(&p, &vec![0.0; 3], 1.0),
            Err(EntropyError::LengthMismatch { .. })
        ));
        assert!(matches!(
            minimize_mu(&p, -1.0, &EntropyControls::default()),
            Err(EntropyError::BadTau(_))
        ));
        // normalized Gaussian passes and scores ~0 on flat
        let sol = minimize_mu(&p, 1.0, &EntropyControls::default()).unwrap();
        let w = w_functional(&p, &sol.u, 1.0).unwrap();
        assert!(w.abs() < 1e-6, "w {w}");
    }

    #[test]
    fn tail_trends_toward_zero_from_below() {
        // mu(tau) stays negative and relaxes toward 0 for large tau.  The
        // curve is not globally monotone: it dips where the minimizer width
        // sqrt(2 tau) matches the bump width, then rises, so the increase is
        // asserted on the tail side of the dip.
        let p = bump(600, 0.1);
        let tail =
            mu_tail(&p, &[1.0, 10.0, 100.0, 1000.0], &EntropyControls::default()).unwrap();
        assert!(tail.all_converged);
        assert!(tail.values[0] < -1e-4);
        assert!(tail.values.iter().all(|v| *v < 0.0), "{:?}", tail.values);
        assert!(tail.values[1] < tail.values[2] && tail.values[2] < tail.values[3]);
        assert!(tail.values[3].abs() < 0.05, "mu(1000) = {}", tail.values[3]);
    }
}
