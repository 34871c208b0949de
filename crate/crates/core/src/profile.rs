//! Rotationally symmetric metric profiles g = phi^2 dr^2 + psi^2 g_(S^(n-1)).
//!
//! A profile is the pair (phi, psi) sampled on a radial grid together with
//! the dimension and the declared asymptotic decay order sigma.  Smoothness
//! at the center requires psi(0) = 0 and psi_s(0) = 1; asymptotic flatness
//! is a property of the data, checked separately by `measure::ae_order_check`.
//!
//! Profile files are plain CSV with `r,phi,psi` columns, `#` comments and
//! `# key=value` metadata; values are written with 17 significant digits so
//! a write/read cycle reproduces every f64 bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::chart::{Chart, OuterBc};
use crate::grid::{GridError, Mapping, RadialGrid};

/// Tolerance on the discretized smooth-center condition psi_s(0) = 1.
pub const CENTER_SLOPE_TOL: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("dimension must be at least 3, got {0}")]
    BadDimension(usize),
    #[error("decay order must lie in (0, n-2], got sigma = {sigma} for n = {dim}")]
    BadOrder { sigma: f64, dim: usize },
    #[error("lapse must be positive and finite (node {node}: phi = {value})")]
    BadLapse { node: usize, value: f64 },
    #[error("sphere radius must vanish at the center and be positive outside (node {node}: psi = {value})")]
    BadSphereRadius { node: usize, value: f64 },
    #[error("center slope psi_s(0) = {0} is not 1 within {CENTER_SLOPE_TOL}")]
    CenterSlope(f64),
    #[error("field length {got} does not match grid ({want} nodes)")]
    LengthMismatch { got: usize, want: usize },
    #[error("profile file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct MetricProfile {
    pub grid: RadialGrid,
    /// manifold dimension n >= 3
    pub dim: usize,
    /// declared asymptotic decay order
    pub sigma: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl MetricProfile {
    pub fn new(
        grid: RadialGrid,
        dim: usize,
        sigma: f64,
        phi: Vec<f64>,
        psi: Vec<f64>,
    ) -> Result<Self, ProfileError> {
        let want = grid.nodes.len();
        if phi.len() != want || psi.len() != want {
            return Err(ProfileError::LengthMismatch {
                got: phi.len().min(psi.len()),
                want,
            });
        }
        let p = MetricProfile {
            grid,
            dim,
            sigma,
            phi,
            psi,
        };
        p.validate()?;
        Ok(p)
    }

    /// Build from closures giving (phi, psi/r) at each radius; the psi/r form
    /// pins psi(0) = 0 exactly.
    pub fn from_fn(
        grid: RadialGrid,
        dim: usize,
        sigma: f64,
        f: impl Fn(f64) -> (f64, f64),
    ) -> Result<Self, ProfileError> {
        let mut phi = Vec::with_capacity(grid.nodes.len());
        let mut psi = Vec::with_capacity(grid.nodes.len());
        for &r in &grid.nodes {
            let (p, ratio) = f(r);
            phi.push(p);
            psi.push(r * ratio);
        }
        Self::new(grid, dim, sigma, phi, psi)
    }

    /// Euclidean profile: phi = 1, psi = r.
    pub fn flat(grid: RadialGrid, dim: usize, sigma: f64) -> Result<Self, ProfileError> {
        let phi = vec![1.0; grid.nodes.len()];
        let psi = grid.nodes.clone();
        Self::new(grid, dim, sigma, phi, psi)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.dim < 3 {
            return Err(ProfileError::BadDimension(self.dim));
        }
        let max_order = (self.dim - 2) as f64;
        if !(self.sigma > 0.0 && self.sigma <= max_order) {
            return Err(ProfileError::BadOrder {
                sigma: self.sigma,
                dim: self.dim,
            });
        }
        for (i, &v) in self.phi.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(ProfileError::BadLapse { node: i, value: v });
            }
        }
        if self.psi[0] != 0.0 {
            return Err(ProfileError::BadSphereRadius {
                node: 0,
                value: self.psi[0],
            });
        }
        for (i, &v) in self.psi.iter().enumerate().skip(1) {
            if !(v.is_finite() && v > 0.0) {
                return Err(ProfileError::BadSphereRadius { node: i, value: v });
            }
        }
        let chart = self.chart(OuterBc::OneSided);
        let slope = chart.psi_s[0];
        if !((slope - 1.0).abs() <= CENTER_SLOPE_TOL) {
            return Err(ProfileError::CenterSlope(slope));
        }
        Ok(())
    }

    pub fn chart(&self, bc: OuterBc) -> Chart {
        Chart::new(&self.grid.nodes, &self.phi, &self.psi, self.dim, bc)
    }

    /// Area of the unit (n-1)-sphere.
    pub fn sphere_area(&self) -> f64 {
        unit_sphere_area(self.dim)
    }

    /// The profile of c^2 g in the dilated chart r -> c r.  Flow trajectories
    /// of the two profiles correspond under t -> c^2 t.
    pub fn dilate(&self, c: f64) -> MetricProfile {
        assert!(c.is_finite() && c > 0.0);
        let nodes: Vec<f64> = self.grid.nodes.iter().map(|r| c * r).collect();
        let mapping = match self.grid.mapping {
            Mapping::Sinh { stretch } => Mapping::Sinh { stretch },
            Mapping::Custom => Mapping::Custom,
        };
        let grid = RadialGrid::from_nodes(nodes, mapping).expect("dilation preserves grid validity");
        MetricProfile {
            grid,
            dim: self.dim,
            sigma: self.sigma,
            phi: self.phi.clone(),
            psi: self.psi.iter().map(|p| c * p).collect(),
        }
    }

    pub fn write_csv(&self, path: &Path, time: f64) -> Result<(), ProfileError> {
        let mut out = String::new();
        out.push_str("# aeflow profile\n");
        writeln!(out, "# n={}", self.dim).unwrap();
        writeln!(out, "# sigma={:.16e}", self.sigma).unwrap();
        writeln!(out, "# time={:.16e}", time).unwrap();
        match self.grid.mapping {
            Mapping::Sinh { stretch } => writeln!(out, "# mapping=sinh {:.16e}", stretch).unwrap(),
            Mapping::Custom => writeln!(out, "# mapping=custom").unwrap(),
        }
        out.push_str("r,phi,psi\n");
        for i in 0..self.grid.nodes.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e}",
                self.grid.nodes[i], self.phi[i], self.psi[i]
            )
            .unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<(Self, f64), ProfileError> {
        let text = std::fs::read_to_string(path)?;
        let mut dim: Option<usize> = None;
        let mut sigma: Option<f64> = None;
        let mut time = 0.0f64;
        let mut mapping = Mapping::Custom;
        let mut saw_header = false;
        let mut r = Vec::new();
        let mut phi = Vec::new();
        let mut psi = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some((key, value)) = rest.split_once('=') {
                    match key.trim() {
                        "n" => {
                            dim = Some(value.trim().parse().map_err(|_| {
                                ProfileError::Format(format!("line {}: bad n", lineno + 1))
                            })?)
                        }
                        "sigma" => {
                            sigma = Some(value.trim().parse().map_err(|_| {
                                ProfileError::Format(format!("line {}: bad sigma", lineno + 1))
                            })?)
                        }
                        "time" => {
                            time = value.trim().parse().map_err(|_| {
                                ProfileError::Format(format!("line {}: bad time", lineno + 1))
                            })?
                        }
                        "mapping" => {
                            let v = value.trim();
                            mapping = if let Some(s) = v.strip_prefix("sinh") {
                                let stretch = s.trim().parse().map_err(|_| {
                                    ProfileError::Format(format!(
                                        "line {}: bad mapping stretch",
                                        lineno + 1
                                    ))
                                })?;
                                Mapping::Sinh { stretch }
                            } else {
                                Mapping::Custom
                            };
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if !saw_header {
                if line != "r,phi,psi" {
                    return Err(ProfileError::Format(format!(
                        "line {}: expected header 'r,phi,psi', got '{line}'",
                        lineno + 1
                    )));
                }
                saw_header = true;
                continue;
            }
            let mut cols = line.split(',');
            let mut next = |what: &str| -> Result<f64, ProfileError> {
                cols.next()
                    .ok_or_else(|| {
                        ProfileError::Format(format!("line {}: missing {what}", lineno + 1))
                    })?
                    .trim()
                    .parse()
                    .map_err(|_| ProfileError::Format(format!("line {}: bad {what}", lineno + 1)))
            };
            r.push(next("r")?);
            phi.push(next("phi")?);
            psi.push(next("psi")?);
            if cols.next().is_some() {
                return Err(ProfileError::Format(format!(
                    "line {}: too many columns",
                    lineno + 1
                )));
            }
        }
        let dim = dim.ok_or_else(|| ProfileError::Format("missing '# n=' metadata".into()))?;
        let sigma =
            sigma.ok_or_else(|| ProfileError::Format("missing '# sigma=' metadata".into()))?;
        let grid = RadialGrid::from_nodes(r, mapping)?;
        let profile = Self::new(grid, dim, sigma, phi, psi)?;
        Ok((profile, time))
    }
}

/// Area of the unit (n-1)-sphere, omega_(n-1) = 2 pi^(n/2) / Gamma(n/2).
pub fn unit_sphere_area(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * std::f64::consts::PI.powf(n / 2.0) / gamma_half_integer(dim)
}

/// Volume of the unit n-ball.
pub fn unit_ball_volume(dim: usize) -> f64 {
    unit_sphere_area(dim) / dim as f64
}

/// Gamma(n/2) for integer n, exact recursion down to Gamma(1) = 1 and
/// Gamma(1/2) = sqrt(pi).
fn gamma_half_integer(n: usize) -> f64 {
    let mut x = n as f64 / 2.0;
    let mut acc = 1.0;
    while x > 1.0 {
        x -= 1.0;
        acc *= x;
    }
    if x == 1.0 {
        acc
    } else {
        acc * std::f64::consts::PI.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> RadialGrid {
        RadialGrid::sinh(100.0, 200, 4.0).unwrap()
    }

    #[test]
    fn sphere_area_matches_low_dimensions() {
        assert!((unit_sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((unit_sphere_area(4) - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_low_dimension_and_bad_order() {
        assert!(matches!(
            MetricProfile::flat(grid(), 2, 0.5),
            Err(ProfileError::BadDimension(2))
        ));
        assert!(matches!(
            MetricProfile::flat(grid(), 3, 1.5),
            Err(ProfileError::BadOrder { .. })
        ));
        assert!(MetricProfile::flat(grid(), 4, 1.5).is_ok());
    }

    #[test]
    fn rejects_nonpositive_lapse_and_center_slope_violation() {
        let g = grid();
        let mut phi = vec![1.0; g.nodes.len()];
        phi[7] = -0.2;
        let psi = g.nodes.clone();
        assert!(matches!(
            MetricProfile::new(g.clone(), 3, 1.0, phi, psi),
            Err(ProfileError::BadLapse { node: 7, .. })
        ));
        // psi = 1.1 r violates psi_s(0) = 1
        let bad = MetricProfile::from_fn(g, 3, 1.0, |_| (1.0, 1.1));
        assert!(matches!(bad, Err(ProfileError::CenterSlope(_))));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join("aeflow-profile-roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("p.csv");
        let p = MetricProfile::from_fn(grid(), 3, 0.9, |r| {
            let u = 1.0 + 0.1 / (1.0 + r * r).sqrt();
            (u * u, u * u)
        })
        .unwrap();
        p.write_csv(&path, 1.25).unwrap();
        let (q, time) = MetricProfile::read_csv(&path).unwrap();
        assert_eq!(time, 1.25);
        assert_eq!(q.dim, 3);
        assert_eq!(q.sigma.to_bits(), p.sigma.to_bits());
        for i in 0..p.grid.nodes.len() {
            assert_eq!(p.grid.nodes[i].to_bits(), q.grid.nodes[i].to_bits());
            assert_eq!(p.phi[i].to_bits(), q.phi[i].to_bits());
            assert_eq!(p.psi[i].to_bits(), q.psi[i].to_bits());
        }
    }

    #[test]
    fn dilation_scales_nodes_and_sphere_radius() {
        let p = MetricProfile::flat(grid(), 3, 1.0).unwrap();
        let q = p.dilate(2.5);
        assert!((q.grid.r_max - 250.0).abs() < 1e-9);
        let i = 120;
        assert!((q.psi[i] - 2.5 * p.psi[i]).abs() < 1e-12);
        assert_eq!(q.phi[i], p.phi[i]);
    }
}
