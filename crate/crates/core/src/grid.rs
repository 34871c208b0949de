//! Radial grid on [0, r_max] with a smooth node mapping.
//!
//! Nodes are the image of a uniform grid in xi under r(xi); derivatives and
//! integrals are taken in xi, so all that is required of the mapping is
//! smoothness and odd extendability through the origin.  The built-in
//! mapping is r(xi) = r_max * sinh(L*xi) / sinh(L): near-uniform spacing
//! r_max*L/sinh(L)/N at the origin, exponential stretching toward r_max.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs at least {min} cells, got {got}")]
    TooFewCells { min: usize, got: usize },
    #[error("r_max must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("stretching parameter must be positive and finite, got {0}")]
    BadStretch(f64),
    #[error("nodes must start at 0 and increase strictly (violated at index {0})")]
    NotMonotone(usize),
    #[error("dyadic annulus [{lo}, {hi}] holds only {count} nodes (need >= 4)")]
    UnderResolved { lo: f64, hi: f64, count: usize },
}

/// How the node positions were produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Mapping {
    Sinh { stretch: f64 },
    /// Nodes loaded from a file or supplied directly.
    Custom,
}

#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
    pub r_max: f64,
    pub mapping: Mapping,
}

impl RadialGrid {
    /// Sinh-stretched grid with `n_cells` cells (so `n_cells + 1` nodes).
    pub fn sinh(r_max: f64, n_cells: usize, stretch: f64) -> Result<Self, GridError> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(GridError::BadRadius(r_max));
        }
        if !(stretch.is_finite() && stretch > 0.0) {
            return Err(GridError::BadStretch(stretch));
        }
        let denom = stretch.sinh();
        let nodes: Vec<f64> = (0..=n_cells)
            .map(|i| {
                let xi = i as f64 / n_cells as f64;
                r_max * (stretch * xi).sinh() / denom
            })
            .collect();
        Self::from_nodes(nodes, Mapping::Sinh { stretch })
    }

    /// Wrap an explicit node list (first node must be 0, strictly increasing).
    pub fn from_nodes(nodes: Vec<f64>, mapping: Mapping) -> Result<Self, GridError> {
        if nodes.len() < 9 {
            return Err(GridError::TooFewCells {
                min: 8,
                got: nodes.len().saturating_sub(1),
            });
        }
        if nodes[0] != 0.0 {
            return Err(GridError::NotMonotone(0));
        }
        for i in 1..nodes.len() {
            if !(nodes[i].is_finite() && nodes[i] > nodes[i - 1]) {
                return Err(GridError::NotMonotone(i));
            }
        }
        let r_max = *nodes.last().unwrap();
        let grid = RadialGrid {
            nodes,
            r_max,
            mapping,
        };
        grid.check_dyadic_resolution()?;
        Ok(grid)
    }

    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Uniform spacing of the mapped coordinate.
    pub fn h(&self) -> f64 {
        1.0 / self.n_cells() as f64
    }

    /// Extrapolation and tail fits sample dyadic annuli; require at least 4
    /// nodes in every annulus [2^k, 2^(k+1)] between unit scale and r_max.
    /// (Below unit scale an origin-clustered grid is near-uniform and the
    /// literal count is impossible for any mapping; tail ops never look
    /// there.)
    fn check_dyadic_resolution(&self) -> Result<(), GridError> {
        let mut lo = 1.0f64;
        while 2.0 * lo <= self.r_max {
            let hi = 2.0 * lo;
            let count = self
                .nodes
                .iter()
                .filter(|&&r| r >= lo && r <= hi)
                .count();
            if count < 4 {
                return Err(GridError::UnderResolved { lo, hi, count });
            }
            lo = hi;
        }
        Ok(())
    }

    /// Index of the node nearest to radius `r`.
    pub fn nearest_node(&self, r: f64) -> usize {
        match self
            .nodes
            .binary_search_by(|x| x.partial_cmp(&r).unwrap())
        {
            Ok(i) => i,
            Err(i) => {
                if i == 0 {
                    0
                } else if i >= self.nodes.len() {
                    self.nodes.len() - 1
                } else if (self.nodes[i] - r).abs() < (r - self.nodes[i - 1]).abs() {
                    i
                } else {
                    i - 1
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinh_grid_spans_and_resolves() {
        let g = RadialGrid::sinh(1000.0, 2000, 6.0).unwrap();
        assert_eq!(g.nodes.len(), 2001);
        assert_eq!(g.nodes[0], 0.0);
        assert!((g.nodes[2000] - 1000.0).abs() < 1e-9);
        // near-origin spacing close to r_max * L / sinh(L) / N
        let expect = 1000.0 * 6.0 / 6.0f64.sinh() / 2000.0;
        assert!((g.nodes[1] - expect).abs() / expect < 1e-3);
    }

    #[test]
    fn rejects_unresolved_dyadic_annulus() {
        // 16 uniform cells over [0, 1000]: spacing 62.5, annulus [64, 128] has 1 node
        let nodes: Vec<f64> = (0..=16).map(|i| i as f64 * 62.5).collect();
        match RadialGrid::from_nodes(nodes, Mapping::Custom) {
            Err(GridError::UnderResolved { .. }) => {}
            other => panic!("expected under-resolution error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_monotone_nodes() {
        let mut nodes: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        nodes[50] = nodes[49];
        assert!(matches!(
            RadialGrid::from_nodes(nodes, Mapping::Custom),
            Err(GridError::NotMonotone(50))
        ));
    }

    #[test]
    fn nearest_node_picks_the_closer_side() {
        let g = RadialGrid::sinh(100.0, 200, 3.0).unwrap();
        for &r in &[0.0, 1.7, 44.4, 99.9, 150.0] {
            let i = g.nearest_node(r);
            for j in [i.saturating_sub(1), (i + 1).min(g.n_cells())] {
                assert!((g.nodes[i] - r).abs() <= (g.nodes[j] - r).abs() + 1e-12);
            }
        }
    }
}
