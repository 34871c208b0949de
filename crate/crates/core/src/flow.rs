//! Ricci flow for rotationally symmetric asymptotically Euclidean metrics.
//!
//! The evolution of g = phi^2 dr^2 + psi^2 g_(S^(n-1)) reduces to
//!   d psi/dt = psi_ss + (n-2)(psi_s^2 - 1)/psi,
//!   d phi/dt = (n-1) phi psi_ss / psi,
//! with s arclength (d/ds = (1/phi) d/dr).  The coordinate r is inert, so
//! the phi equation is a pointwise ODE driven by the curvature ratio
//! psi_ss/psi.  At the center the psi right side vanishes and the ratio
//! takes its smooth limit psi_sss(0)/psi_s(0).
//!
//! Time stepping is explicit RK4 under a parabolic step cap
//! dt <= c_cfl min(ds)^2.  The outer boundary keeps the declared tail law:
//! ghost nodes continue q(r) ~ r^(-sigma) for q in {phi - 1, psi/r - 1}.

use thiserror::Error;

use crate::chart::OuterBc;
use crate::curvature;
use crate::fit;
use crate::grid::RadialGrid;
use crate::mass;
use crate::measure;
use crate::profile::MetricProfile;
use crate::stencil::{DerivOps, Extended, OuterScheme, Parity};
use crate::weighted;

pub const DEFAULT_CFL: f64 = 0.2;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("singularity at node {node} (r = {r:.6}), t = {time:.6}: {what}")]
    Singularity {
        node: usize,
        r: f64,
        time: f64,
        what: &'static str,
        /// snapshots accumulated before the failure
        partial: Box<FlowTrajectory>,
    },
    #[error("dt = {dt} exceeds the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("t_end = {t_end} does not lie ahead of t = {time}")]
    BadWindow { t_end: f64, time: f64 },
    #[error("decay fit needs a decade of data past the transient, got [{lo}, {hi}]")]
    ShortWindow { lo: f64, hi: f64 },
    #[error("weight exponent {sigma_prime} outside ((n-2)/2, sigma) = ({lo}, {hi})")]
    BadWeight { sigma_prime: f64, lo: f64, hi: f64 },
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub profile: MetricProfile,
    pub time: f64,
    pub step_count: u64,
}

impl FlowState {
    pub fn new(profile: MetricProfile) -> Self {
        FlowState {
            profile,
            time: 0.0,
            step_count: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowControls {
    /// parabolic step fraction: dt = cfl * min(ds)^2
    pub cfl: f64,
    /// cadence of snapshots and monitor samples
    pub snapshot_dt: f64,
    /// weight exponent for the flatness norm series; None picks 0.9 sigma
    pub sigma_prime: Option<f64>,
    /// derivative order of the flatness norm series
    pub weighted_k: usize,
    /// evaluate the ADM mass per snapshot (requires integrable curvature)
    pub monitor_mass: bool,
    /// evaluate the tail-order certificate per snapshot (needs r_max >= 100)
    pub monitor_ae: bool,
}

impl Default for FlowControls {
    fn default() -> Self {
        FlowControls {
            cfl: DEFAULT_CFL,
            snapshot_dt: 1.0,
            sigma_prime: None,
            weighted_k: 1,
            monitor_mass: true,
            monitor_ae: true,
        }
    }
}

/// Time-stamped snapshots plus the monitor series sampled at the same
/// instants.  `min_r_steps` tracks min R over every accepted step, not just
/// the snapshot times.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub snapshots: Vec<FlowState>,
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub min_r: Vec<f64>,
    pub sup_rm: Vec<f64>,
    /// sup over the manifold of (1 + t) |Rm|
    pub sup_t_rm: Vec<f64>,
    /// flatness norm: weighted distance of (A, B) components from flat
    pub weighted_norm_sigma_prime: Vec<f64>,
    pub integral_r_dv: Vec<f64>,
    pub integral_2ric2_minus_r2: Vec<f64>,
    pub ae_pass: Vec<bool>,
    /// min R over all accepted steps (stage-one values)
    pub min_r_steps: f64,
    /// sup |R| of the initial state
    pub sup_r_initial: f64,
}

impl FlowTrajectory {
    pub fn series_names() -> &'static [&'static str] {
        &[
            "mass",
            "min_R",
            "sup_rm",
            "sup_t_rm",
            "weighted_norm_sigma_prime",
            "integral_R_dV",
            "integral_2Ric2_minus_R2",
        ]
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        match name {
            "mass" => Some(&self.mass),
            "min_R" => Some(&self.min_r),
            "sup_rm" => Some(&self.sup_rm),
            "sup_t_rm" => Some(&self.sup_t_rm),
            "weighted_norm_sigma_prime" => Some(&self.weighted_norm_sigma_prime),
            "integral_R_dV" => Some(&self.integral_r_dv),
            "integral_2Ric2_minus_R2" => Some(&self.integral_2ric2_minus_r2),
            _ => None,
        }
    }

    /// A constant-in-time trajectory over the given instants; the heat
    /// solver uses this to run on a frozen background.
    pub fn frozen(profile: &MetricProfile, times: &[f64]) -> FlowTrajectory {
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        let snapshots: Vec<FlowState> = times
            .iter()
            .map(|&t| FlowState {
                profile: profile.clone(),
                time: t,
                step_count: 0,
            })
            .collect();
        let curv = curvature::curvature(profile);
        let sup = curv.sup_rm();
        let len = times.len();
        FlowTrajectory {
            times: times.to_vec(),
            mass: vec![f64::NAN; len],
            min_r: vec![curv.min_r(); len],
            sup_rm: vec![sup; len],
            sup_t_rm: times.iter().map(|&t| (1.0 + t) * sup).collect(),
            weighted_norm_sigma_prime: vec![f64::NAN; len],
            integral_r_dv: vec![f64::NAN; len],
            integral_2ric2_minus_r2: vec![f64::NAN; len],
            ae_pass: Vec::new(),
            min_r_steps: curv.min_r(),
            sup_r_initial: curv.r.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            snapshots,
        }
    }

    /// Metric arrays at an arbitrary time inside the span, linear in t
    /// between the bracketing snapshots.
    pub fn metric_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let times = &self.times;
        let k = match times.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(k) => {
                let p = &self.snapshots[k].profile;
                return (p.phi.clone(), p.psi.clone());
            }
            Err(k) => k.clamp(1, times.len() - 1),
        };
        let (t0, t1) = (times[k - 1], times[k]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let a = &self.snapshots[k - 1].profile;
        let b = &self.snapshots[k].profile;
        let phi: Vec<f64> = a
            .phi
            .iter()
            .zip(&b.phi)
            .map(|(x, y)| x + w * (y - x))
            .collect();
        let psi: Vec<f64> = a
            .psi
            .iter()
            .zip(&b.psi)
            .map(|(x, y)| x + w * (y - x))
            .collect();
        (phi, psi)
    }

    /// Smallest epsilon with sup |Rm(t)| <= epsilon / (1 + t) over the run.
    pub fn type_iii_epsilon(&self) -> f64 {
        self.sup_t_rm.iter().cloned().fold(0.0, f64::max)
    }
}

/// Number of axis nodes whose lapse drive comes from the anchored fit
/// rather than the pointwise ratio.
const DRIVE_GUARD: usize = 7;
/// Number of nodes just outside the guard band anchoring that fit.
const DRIVE_ANCHORS: usize = 8;
/// Strength of the sixth-difference dissipation; its damping eigenvalue
/// scales as this over the local spacing, well inside the step bound.
const DISSIPATION: f64 = 1.0;

/// Preallocated buffers for right-side evaluation; the grid (and with it
/// the mapping derivatives of r) is fixed for the whole run.
struct Workspace {
    ops: DerivOps,
    h: f64,
    dim: usize,
    sigma: f64,
    radii: Vec<f64>,
    r_xi: Vec<f64>,
    r_xixi: Vec<f64>,
    phi_ext: Vec<f64>,
    psi_ext: Vec<f64>,
    slope_ext: Vec<f64>,
    phi_xi: Vec<f64>,
    psi_xi: Vec<f64>,
    psi_xixi: Vec<f64>,
    j: Vec<f64>,
    j_xi: Vec<f64>,
    psi_s: Vec<f64>,
    psi_ss: Vec<f64>,
    drive_ss: Vec<f64>,
}

/// Extremes of the state a right-side evaluation just visited: min R feeds
/// the per-step positivity monitor, min ds the parabolic step bound.
#[derive(Clone, Copy)]
struct StageStats {
    min_r: f64,
    min_ds: f64,
}

impl Workspace {
    fn new(grid: &RadialGrid, dim: usize, sigma: f64) -> Self {
        let len = grid.nodes.len();
        let n = len - 1;
        let h = 1.0 / n as f64;
        let ops = DerivOps::new(h);
        let ghosts = crate::chart::extrapolate_two(&grid.nodes);
        let r_ext = Extended::new(&grid.nodes, Parity::Odd, ghosts);
        let mut r_xi = vec![0.0; len];
        let mut r_xixi = vec![0.0; len];
        ops.d1(&r_ext, OuterScheme::Ghost, &mut r_xi);
        ops.d2(&r_ext, OuterScheme::Ghost, &mut r_xixi);
        Workspace {
            ops,
            h,
            dim,
            sigma,
            radii: grid.nodes.clone(),
            r_xi,
            r_xixi,
            phi_ext: vec![0.0; len + 4],
            psi_ext: vec![0.0; len + 4],
            slope_ext: vec![0.0; len + 4],
            phi_xi: vec![0.0; len],
            psi_xi: vec![0.0; len],
            psi_xixi: vec![0.0; len],
            j: vec![0.0; len],
            j_xi: vec![0.0; len],
            psi_s: vec![0.0; len],
            psi_ss: vec![0.0; len],
            drive_ss: vec![0.0; len],
        }
    }

    /// Evolution right side for the state (phi, psi); also returns the
    /// curvature extremes of that state so the caller can monitor every
    /// stage without extra sweeps.
    fn rhs(
        &mut self,
        phi: &[f64],
        psi: &[f64],
        out_phi: &mut [f64],
        out_psi: &mut [f64],
    ) -> StageStats {
        let len = phi.len();
        let n = len - 1;
        let nf = self.dim as f64;
        // ghost fill: parity inside, declared tail law outside
        self.phi_ext[0] = phi[2];
        self.phi_ext[1] = phi[1];
        self.psi_ext[0] = -psi[2];
        self.psi_ext[1] = -psi[1];
        self.phi_ext[2..2 + len].copy_from_slice(phi);
        self.psi_ext[2..2 + len].copy_from_slice(psi);
        let rn = self.radii[n];
        let q_phi = phi[n] - 1.0;
        let q_psi = psi[n] / rn - 1.0;
        let rg0 = crate::chart::extrapolate_two(&self.radii);
        for (k, rg) in rg0.iter().enumerate() {
            let decay = (rn / rg).powf(self.sigma);
            self.phi_ext[2 + len + k] = 1.0 + q_phi * decay;
            self.psi_ext[2 + len + k] = rg * (1.0 + q_psi * decay);
        }
        let phi_ext = Extended {
            values: std::mem::take(&mut self.phi_ext),
        };
        let psi_ext = Extended {
            values: std::mem::take(&mut self.psi_ext),
        };
        self.ops.d1(&phi_ext, OuterScheme::Ghost, &mut self.phi_xi);
        self.ops.d1(&psi_ext, OuterScheme::Ghost, &mut self.psi_xi);
        self.ops.d2(&psi_ext, OuterScheme::Ghost, &mut self.psi_xixi);
        self.phi_ext = phi_ext.values;
        self.psi_ext = psi_ext.values;

        let mut min_ds = f64::INFINITY;
        for i in 0..len {
            let j = phi[i] * self.r_xi[i];
            self.j[i] = j;
            self.j_xi[i] = self.phi_xi[i] * self.r_xi[i] + phi[i] * self.r_xixi[i];
            self.psi_s[i] = self.psi_xi[i] / j;
            self.psi_ss[i] = (self.psi_xixi[i] - self.psi_xi[i] * self.j_xi[i] / j) / (j * j);
            let ds = j * self.h;
            if ds < min_ds {
                min_ds = ds;
            }
        }
        // lapse drive field: the arclength derivative applied to the slope.
        // Composing two first derivatives instead of reusing psi_ss leaves
        // the drive blind to node-to-node oscillation, which the pointwise
        // ratio below would otherwise amplify near the axis.
        self.slope_ext[0] = self.psi_s[2];
        self.slope_ext[1] = self.psi_s[1];
        self.slope_ext[2..2 + len].copy_from_slice(&self.psi_s);
        let sg = crate::chart::extrapolate_two(&self.psi_s);
        self.slope_ext[2 + len] = sg[0];
        self.slope_ext[3 + len] = sg[1];
        let slope_ext = Extended {
            values: std::mem::take(&mut self.slope_ext),
        };
        self.ops.d1(&slope_ext, OuterScheme::Ghost, &mut self.drive_ss);
        self.slope_ext = slope_ext.values;
        for i in 0..len {
            self.drive_ss[i] /= self.j[i];
        }

        // evolve psi first: its right side (dissipation included) fixes the
        // origin value of the lapse drive below
        out_psi[0] = 0.0;
        for i in 1..len {
            let slope = self.psi_s[i];
            out_psi[i] = self.psi_ss[i] + (nf - 2.0) * (slope * slope - 1.0) / psi[i];
        }
        // sixth-difference dissipation on the deviation fields, scaled by the
        // local arclength spacing: one order beyond the stencils, so the
        // scheme stays fourth-order accurate, and an exact zero on the flat
        // profile.  Deviations extend across the pole by parity (psi - r odd,
        // phi - 1 even).
        let w6 = [1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0];
        if len > 4 {
            let dev_psi = |k: isize| -> f64 {
                let a = k.unsigned_abs();
                let d = psi[a] - self.radii[a];
                if k < 0 {
                    -d
                } else {
                    d
                }
            };
            for i in 1..len - 3 {
                let mut q = 0.0;
                for (o, w) in w6.iter().enumerate() {
                    q += w * dev_psi(i as isize + o as isize - 3);
                }
                out_psi[i] += DISSIPATION / (64.0 * self.j[i] * self.h) * q;
            }
        }

        // center value of the drive ratio, chosen so the discrete unit slope
        // at the origin is exactly stationary: with J = phi * r_xi,
        //   d/dt (psi_xi(0)/J(0)) = psi_dot_xi(0)/J(0) - psi_s(0) phi_dot(0)/phi(0),
        // which vanishes for phi_dot(0) = (n-1) phi(0) w0 with the w0 below.
        // out_psi is odd across the pole, so its centered first derivative
        // there folds onto the two inner nodes.
        let c1 = self.ops.centered_d1_weights();
        let psi_dot_xi0 = 2.0 * (c1[3] * out_psi[1] + c1[4] * out_psi[2]) / self.h;
        let w0 = psi_dot_xi0 / ((nf - 1.0) * self.j[0] * self.psi_s[0]);

        let guard = DRIVE_GUARD.min(len.saturating_sub(DRIVE_ANCHORS + 2));
        let mut beta = 0.0;
        if guard > 0 {
            // one-parameter least squares through (0, w0): the anchor nodes
            // set only the radial curvature of the near-axis drive
            let (mut sxx, mut sxy) = (0.0, 0.0);
            for i in guard..guard + DRIVE_ANCHORS {
                let x = self.radii[i] * self.radii[i];
                let y = self.drive_ss[i] / psi[i] - w0;
                sxx += x * x;
                sxy += x * y;
            }
            beta = sxy / sxx;
        }

        out_phi[0] = (nf - 1.0) * phi[0] * w0;
        let c_rad = 2.0 * (nf - 1.0);
        let c_sph = (nf - 1.0) * (nf - 2.0);
        let mut min_r = (c_rad + c_sph) * -w0;
        for i in 1..len {
            let w = if i < guard {
                w0 + beta * self.radii[i] * self.radii[i]
            } else {
                self.drive_ss[i] / psi[i]
            };
            out_phi[i] = (nf - 1.0) * phi[i] * w;
            let slope = self.psi_s[i];
            let k_sph = (1.0 - slope * slope) / (psi[i] * psi[i]);
            let r_val = -c_rad * w + c_sph * k_sph;
            if r_val < min_r {
                min_r = r_val;
            }
        }
        if len > 4 {
            let dev_phi = |k: isize| -> f64 { phi[k.unsigned_abs()] - 1.0 };
            for i in 1..len - 3 {
                let mut q = 0.0;
                for (o, w) in w6.iter().enumerate() {
                    q += w * dev_phi(i as isize + o as isize - 3);
                }
                out_phi[i] += DISSIPATION / (64.0 * self.j[i] * self.h) * q;
            }
        }
        StageStats { min_r, min_ds }
    }
}

/// Parabolic stability bound for the current state: c_cfl * min(ds)^2.
pub fn stability_bound(profile: &MetricProfile, cfl: f64) -> f64 {
    let chart = profile.chart(OuterBc::Robin {
        sigma: profile.sigma,
    });
    let min_ds = chart
        .j
        .iter()
        .map(|j| j * chart.h)
        .fold(f64::INFINITY, f64::min);
    cfl * min_ds * min_ds
}

fn rk4_step(
    ws: &mut Workspace,
    phi: &mut Vec<f64>,
    psi: &mut Vec<f64>,
    dt: f64,
    bufs: &mut StepBuffers,
) -> StageStats {
    let len = phi.len();
    let StepBuffers {
        k_phi,
        k_psi,
        tmp_phi,
        tmp_psi,
    } = bufs;
    let stats = ws.rhs(phi, psi, &mut k_phi[0], &mut k_psi[0]);
    for stage in 1..4 {
        let c = if stage == 3 { dt } else { 0.5 * dt };
        for i in 0..len {
            tmp_phi[i] = phi[i] + c * k_phi[stage - 1][i];
            tmp_psi[i] = psi[i] + c * k_psi[stage - 1][i];
        }
        ws.rhs(tmp_phi, tmp_psi, &mut k_phi[stage], &mut k_psi[stage]);
    }
    for i in 0..len {
        phi[i] += dt / 6.0
            * (k_phi[0][i] + 2.0 * k_phi[1][i] + 2.0 * k_phi[2][i] + k_phi[3][i]);
        psi[i] += dt / 6.0
            * (k_psi[0][i] + 2.0 * k_psi[1][i] + 2.0 * k_psi[2][i] + k_psi[3][i]);
    }
    stats
}

struct StepBuffers {
    k_phi: [Vec<f64>; 4],
    k_psi: [Vec<f64>; 4],
    tmp_phi: Vec<f64>,
    tmp_psi: Vec<f64>,
}

impl StepBuffers {
    fn new(len: usize) -> Self {
        StepBuffers {
            k_phi: std::array::from_fn(|_| vec![0.0; len]),
            k_psi: std::array::from_fn(|_| vec![0.0; len]),
            tmp_phi: vec![0.0; len],
            tmp_psi: vec![0.0; len],
        }
    }

}

fn find_bad_node(phi: &[f64], psi: &[f64]) -> Option<(usize, &'static str)> {
    for (i, (&p, &q)) in phi.iter().zip(psi).enumerate() {
        if !p.is_finite() || !q.is_finite() {
            return Some((i, "non-finite value"));
        }
        if p <= 0.0 {
            return Some((i, "lapse collapsed"));
        }
        if i > 0 && q <= 0.0 {
            return Some((i, "sphere radius collapsed"));
        }
    }
    None
}

/// One explicit RK4 step.  `dt` must respect the default stability bound;
/// `run` manages the bound adaptively and should be preferred for spans.
pub fn step(state: &FlowState, dt: f64) -> Result<FlowState, FlowError> {
    let profile = &state.profile;
    let bound = stability_bound(profile, DEFAULT_CFL);
    if dt > bound * (1.0 + 1e-12) {
        return Err(FlowError::StepTooLarge { dt, bound });
    }
    let mut ws = Workspace::new(&profile.grid, profile.dim, profile.sigma);
    let mut bufs = StepBuffers::new(profile.phi.len());
    let mut phi = profile.phi.clone();
    let mut psi = profile.psi.clone();
    rk4_step(&mut ws, &mut phi, &mut psi, dt, &mut bufs);
    if let Some((node, what)) = find_bad_node(&phi, &psi) {
        return Err(FlowError::Singularity {
            node,
            r: profile.grid.nodes[node],
            time: state.time + dt,
            what,
            partial: Box::new(FlowTrajectory::frozen(profile, &[state.time])),
        });
    }
    let next = MetricProfile {
        grid: profile.grid.clone(),
        dim: profile.dim,
        sigma: profile.sigma,
        phi,
        psi,
    };
    Ok(FlowState {
        profile: next,
        time: state.time + dt,
        step_count: state.step_count + 1,
    })
}

fn record_snapshot(
    traj: &mut FlowTrajectory,
    state: &FlowState,
    controls: &FlowControls,
) {
    let profile = &state.profile;
    let chart = profile.chart(OuterBc::OneSided);
    let curv = curvature::curvature_from_chart(&chart);
    let t = state.time;
    traj.times.push(t);
    traj.min_r.push(curv.min_r());
    let sup = curv.sup_rm();
    traj.sup_rm.push(sup);
    traj.sup_t_rm.push((1.0 + t) * sup);

    let nf = profile.dim as f64;
    let len = chart.len();
    let mut r_integrand = vec![0.0; len];
    let mut rigidity = vec![0.0; len];
    for i in 0..len {
        let ric2 =
            curv.ric_rad[i] * curv.ric_rad[i] + (nf - 1.0) * curv.ric_sph[i] * curv.ric_sph[i];
        r_integrand[i] = curv.r[i];
        rigidity[i] = 2.0 * ric2 - curv.r[i] * curv.r[i];
    }
    traj.integral_r_dv
        .push(measure::integrate_dv(&chart, &r_integrand));
    traj.integral_2ric2_minus_r2
        .push(measure::integrate_dv(&chart, &rigidity));

    let sigma_prime = controls.sigma_prime.unwrap_or(0.9 * profile.sigma);
    traj.weighted_norm_sigma_prime.push(flatness_norm(
        profile,
        sigma_prime,
        controls.weighted_k,
    ));

    if controls.monitor_mass {
        let m = mass::adm_mass(profile)
            .map(|r| r.extrapolated)
            .unwrap_or(f64::NAN);
        traj.mass.push(m);
    } else {
        traj.mass.push(f64::NAN);
    }
    if controls.monitor_ae {
        let pass = measure::ae_order_check(profile, profile.sigma)
            .map(|r| r.pass)
            .unwrap_or(false);
        traj.ae_pass.push(pass);
    }
    traj.snapshots.push(state.clone());
}

/// Weighted distance from the flat metric: the larger of the two component
/// norms of (A - 1, B) in the order-k weight -sigma' norm, r_floor = 1.
pub fn flatness_norm(profile: &MetricProfile, sigma_prime: f64, k: usize) -> f64 {
    let chart = profile.chart(OuterBc::OneSided);
    let len = chart.len();
    let mut a_dev = vec![0.0; len];
    let mut b_dev = vec![0.0; len];
    let ratio0 = chart.psi_s[0] * chart.phi(0);
    a_dev[0] = ratio0 * ratio0 - 1.0;
    b_dev[0] = chart.phi(0) * chart.phi(0) - 1.0 - a_dev[0];
    for i in 1..len {
        let ratio = chart.psi(i) / chart.r(i);
        a_dev[i] = ratio * ratio - 1.0;
        b_dev[i] = chart.phi(i) * chart.phi(i) - 1.0 - a_dev[i];
    }
    let na = weighted::weighted_norm_on_chart(&chart, &a_dev, -sigma_prime, k, 1.0)
        .map(|r| r.value)
        .unwrap_or(f64::NAN);
    let nb = weighted::weighted_norm_on_chart(&chart, &b_dev, -sigma_prime, k, 1.0)
        .map(|r| r.value)
        .unwrap_or(f64::NAN);
    na.max(nb)
}

/// Integrate to `t_end`, sampling snapshots and monitors every
/// `snapshot_dt`.  On singularity the partial trajectory rides inside the
/// error.
pub fn run(
    state: &FlowState,
    t_end: f64,
    controls: &FlowControls,
) -> Result<FlowTrajectory, FlowError> {
    if !(t_end > state.time) {
        return Err(FlowError::BadWindow {
            t_end,
            time: state.time,
        });
    }
    let profile = &state.profile;
    let mut traj = FlowTrajectory {
        snapshots: Vec::new(),
        times: Vec::new(),
        mass: Vec::new(),
        min_r: Vec::new(),
        sup_rm: Vec::new(),
        sup_t_rm: Vec::new(),
        weighted_norm_sigma_prime: Vec::new(),
        integral_r_dv: Vec::new(),
        integral_2ric2_minus_r2: Vec::new(),
        ae_pass: Vec::new(),
        min_r_steps: f64::INFINITY,
        sup_r_initial: 0.0,
    };
    {
        let curv = curvature::curvature(profile);
        traj.sup_r_initial = curv.r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    let mut current = state.clone();
    record_snapshot(&mut traj, &current, controls);

    let mut ws = Workspace::new(&profile.grid, profile.dim, profile.sigma);
    let mut bufs = StepBuffers::new(profile.phi.len());
    let mut phi = profile.phi.clone();
    let mut psi = profile.psi.clone();
    let mut time = state.time;
    let mut step_count = state.step_count;

    // probe the initial state once for the step size
    let mut stats = ws.rhs(&phi, &psi, &mut bufs.k_phi[0], &mut bufs.k_psi[0]);
    let n_snaps = ((t_end - state.time) / controls.snapshot_dt).round() as usize;
    let mut next_snap_index = 1usize;
    loop {
        let t_snap = (state.time + next_snap_index as f64 * controls.snapshot_dt).min(t_end);
        while time < t_snap - 1e-12 {
            let bound = controls.cfl * stats.min_ds * stats.min_ds;
            let dt = bound.min(t_snap - time);
            stats = rk4_step(&mut ws, &mut phi, &mut psi, dt, &mut bufs);
            traj.min_r_steps = traj.min_r_steps.min(stats.min_r);
            time += dt;
            step_count += 1;
            if let Some((node, what)) = find_bad_node(&phi, &psi) {
                return Err(FlowError::Singularity {
                    node,
                    r: profile.grid.nodes[node],
                    time,
                    what,
                    partial: Box::new(traj),
                });
            }
        }
        time = t_snap;
        current = FlowState {
            profile: MetricProfile {
                grid: profile.grid.clone(),
                dim: profile.dim,
                sigma: profile.sigma,
                phi: phi.clone(),
                psi: psi.clone(),
            },
            time,
            step_count,
        };
        record_snapshot(&mut traj, &current, controls);
        if next_snap_index >= n_snaps.max(1) || time >= t_end - 1e-12 {
            break;
        }
        next_snap_index += 1;
    }
    traj.min_r_steps = traj.min_r_steps.min(
        traj.min_r
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min),
    );
    Ok(traj)
}

#[derive(Debug, Clone)]
pub struct DecayFit {
    /// amplitude of the fitted law sup = C0 (1 + t)^(slope)
    pub c0: f64,
    /// decay surplus: slope = -(1 + delta0 + k/2)
    pub delta0: f64,
    pub k: usize,
    pub slope: f64,
    pub window: (f64, f64),
    pub residual: f64,
    /// set when the series is identically zero (nothing to fit)
    pub degenerate: bool,
}

/// Least-squares decay law of sup |D^k Rm| against (1 + t) past the
/// transient (t >= 1).  Needs a decade of usable data.
pub fn monitor_decay(trajectory: &FlowTrajectory, k: usize) -> Result<DecayFit, FlowError> {
    let mut ts = Vec::new();
    let mut vals = Vec::new();
    for (idx, &t) in trajectory.times.iter().enumerate() {
        if t < 1.0 {
            continue;
        }
        let sup = if k == 0 {
            trajectory.sup_rm[idx]
        } else {
            let norms = curvature::grad_rm_norms(&trajectory.snapshots[idx].profile, k);
            norms[k].iter().cloned().fold(0.0, f64::max)
        };
        ts.push(t);
        vals.push(sup);
    }
    if ts.is_empty() {
        return Err(FlowError::ShortWindow { lo: 0.0, hi: 0.0 });
    }
    let (lo, hi) = (ts[0], *ts.last().unwrap());
    if (1.0 + hi) / (1.0 + lo) < 10.0 {
        return Err(FlowError::ShortWindow { lo, hi });
    }
    let scale = vals.iter().cloned().fold(0.0, f64::max);
    if scale <= 1e-13 * (1.0 + trajectory.sup_r_initial) {
        return Ok(DecayFit {
            c0: 0.0,
            delta0: 0.0,
            k,
            slope: 0.0,
            window: (lo, hi),
            residual: 0.0,
            degenerate: true,
        });
    }
    let xs: Vec<f64> = ts.iter().map(|t| (1.0 + t).ln()).collect();
    let ys: Vec<f64> = vals.iter().map(|v| v.max(1e-300).ln()).collect();
    let line = fit::fit_line(&xs, &ys);
    Ok(DecayFit {
        c0: line.intercept.exp(),
        delta0: -line.slope - 1.0 - k as f64 / 2.0,
        k,
        slope: line.slope,
        window: (lo, hi),
        residual: line.rms,
        degenerate: false,
    })
}

#[derive(Debug, Clone)]
pub struct WeightedConvergence {
    pub series: Vec<(f64, f64)>,
    /// non-increasing after the transient (t >= 1)
    pub decreasing: bool,
}

/// Weighted-norm distance of every snapshot from the final one; the tail
/// must decrease for a converging flow.
pub fn monitor_weighted_convergence(
    trajectory: &FlowTrajectory,
    sigma_prime: f64,
    k: usize,
) -> Result<WeightedConvergence, FlowError> {
    let last = trajectory
        .snapshots
        .last()
        .expect("trajectory has at least the initial snapshot");
    let profile0 = &trajectory.snapshots[0].profile;
    let nf = profile0.dim as f64;
    let lo = (nf - 2.0) / 2.0;
    let hi = profile0.sigma;
    if !(sigma_prime > lo && sigma_prime < hi) {
        return Err(FlowError::BadWeight {
            sigma_prime,
            lo,
            hi,
        });
    }
    let ref_chart = last.profile.chart(OuterBc::OneSided);
    let len = ref_chart.len();
    let component_fields = |p: &MetricProfile| -> (Vec<f64>, Vec<f64>) {
        let chart = p.chart(OuterBc::OneSided);
        let mut a = vec![0.0; len];
        let mut b = vec![0.0; len];
        let ratio0 = chart.psi_s[0] * chart.phi(0);
        a[0] = ratio0 * ratio0;
        b[0] = chart.phi(0) * chart.phi(0) - a[0];
        for i in 1..len {
            let ratio = chart.psi(i) / chart.r(i);
            a[i] = ratio * ratio;
            b[i] = chart.phi(i) * chart.phi(i) - a[i];
        }
        (a, b)
    };
    let (a_ref, b_ref) = component_fields(&last.profile);
    let mut series = Vec::with_capacity(trajectory.snapshots.len());
    for snap in &trajectory.snapshots {
        let (a, b) = component_fields(&snap.profile);
        let da: Vec<f64> = a.iter().zip(&a_ref).map(|(x, y)| x - y).collect();
        let db: Vec<f64> = b.iter().zip(&b_ref).map(|(x, y)| x - y).collect();
        let chart = snap.profile.chart(OuterBc::OneSided);
        let na = weighted::weighted_norm_on_chart(&chart, &da, -sigma_prime, k, 1.0)
            .map(|r| r.value)
            .unwrap_or(f64::NAN);
        let nb = weighted::weighted_norm_on_chart(&chart, &db, -sigma_prime, k, 1.0)
            .map(|r| r.value)
            .unwrap_or(f64::NAN);
        series.push((snap.time, na.max(nb)));
    }
    let scale = series.iter().map(|p| p.1).fold(0.0, f64::max);
    let tol = 1e-9 * scale;
    let mut decreasing = true;
    let mut prev: Option<f64> = None;
    for &(t, v) in &series {
        if t < 1.0 {
            continue;
        }
        if let Some(p) = prev {
            if v > p + tol {
                decreasing = false;
            }
        }
        prev = Some(v);
    }
    Ok(WeightedConvergence { series, decreasing })
}

#[derive(Debug, Clone)]
pub struct RigidityReport {
    pub times: Vec<f64>,
    /// int (2|Rc|^2 - R^2) dV, the time derivative of int R dV
    pub series: Vec<f64>,
    /// pointwise floor -((n-2)/n) int R^2 dV
    pub lower_bound: Vec<f64>,
    pub integral_r: Vec<f64>,
}

/// Rigidity integrand series along a trajectory, with the Cauchy-Schwarz
/// floor that forces int R dV upward unless R vanishes identically.
pub fn rigidity_integrand(trajectory: &FlowTrajectory) -> RigidityReport {
    let nf = trajectory.snapshots[0].profile.dim as f64;
    let mut lower = Vec::with_capacity(trajectory.times.len());
    for snap in &trajectory.snapshots {
        let chart = snap.profile.chart(OuterBc::OneSided);
        let curv = curvature::curvature_from_chart(&chart);
        let r2: Vec<f64> = curv.r.iter().map(|v| v * v).collect();
        lower.push(-(nf - 2.0) / nf * measure::integrate_dv(&chart, &r2));
    }
    RigidityReport {
        times: trajectory.times.clone(),
        series: trajectory.integral_2ric2_minus_r2.clone(),
        lower_bound: lower,
        integral_r: trajectory.integral_r_dv.clone(),
    }
}
