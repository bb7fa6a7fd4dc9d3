//! Spatial domain and the uniform midpoint quadrature grid.

use serde::{Deserialize, Serialize};

use crate::error::{DgpError, Result};

/// Closed interval `[lo, hi]` on which the evolving function lives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lo: f64,
    hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(DgpError::InvalidParameter {
                name: "domain",
                reason: format!("need finite lo < hi, got [{lo}, {hi}]"),
            });
        }
        Ok(Self { lo, hi })
    }

    /// The interval `[-1, 1]`.
    pub fn symmetric_unit() -> Self {
        Self { lo: -1.0, hi: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Returns `x` if it lies in the domain.
    pub fn check(&self, x: f64) -> Result<f64> {
        if self.contains(x) {
            Ok(x)
        } else {
            Err(DgpError::OutsideDomain {
                x,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    pub fn check_all(&self, xs: &[f64]) -> Result<()> {
        xs.iter().try_for_each(|&x| self.check(x).map(|_| ()))
    }
}

impl Default for Domain {
    fn default() -> Self {
        Self::symmetric_unit()
    }
}

/// How off-node locations are mapped onto a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snap {
    /// Any in-domain location maps to its nearest node.
    Nearest,
    /// The location must sit on a node, up to `tolerance` in domain units.
    Strict { tolerance: f64 },
}

impl Snap {
    /// Strict snapping with a tolerance of `1e-9` grid spacings.
    pub fn strict(grid: &QuadratureGrid) -> Self {
        Snap::Strict {
            tolerance: 1e-9 * grid.spacing(),
        }
    }
}

/// Midpoints of `n` equal subintervals of the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    domain: Domain,
    nodes: Vec<f64>,
    spacing: f64,
}

impl QuadratureGrid {
    pub fn new(domain: Domain, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(DgpError::InvalidParameter {
                name: "grid size",
                reason: "need at least one node".into(),
            });
        }
        let spacing = domain.length() / n as f64;
        let nodes = (0..n)
            .map(|q| domain.lo() + (q as f64 + 0.5) * spacing)
            .collect();
        Ok(Self {
            domain,
            nodes,
            spacing,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Uniform node spacing `Δx`, which is also the midpoint-rule weight.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Index of the node nearest to `x`; ties resolve to the lower node.
    pub fn nearest_index(&self, x: f64) -> Result<usize> {
        self.domain.check(x)?;
        let pos = (x - self.domain.lo()) / self.spacing - 0.5;
        let idx = pos.round().clamp(0.0, (self.len() - 1) as f64) as usize;
        // round() sends exact half-way points up; prefer the lower node on ties.
        if idx > 0 && (x - self.nodes[idx - 1]).abs() <= (x - self.nodes[idx]).abs() {
            return Ok(idx - 1);
        }
        Ok(idx)
    }

    pub fn snap(&self, x: f64, mode: Snap) -> Result<usize> {
        let idx = self.nearest_index(x)?;
        if let Snap::Strict { tolerance } = mode {
            let distance = (x - self.nodes[idx]).abs();
            if distance > tolerance {
                return Err(DgpError::OffGrid {
                    x,
                    distance,
                    tolerance,
                });
            }
        }
        Ok(idx)
    }
}
