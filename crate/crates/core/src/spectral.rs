//! Inequalities for `(n, k, lambda)`-graphs: neighbor variance, edge mixing,
//! and the hinge (ordered 2-path) count.
//!
//! Everything here is stated against [`RegularGraph`], so the checks apply to
//! any regular graph with a known second-eigenvalue bound. Vertex ids are
//! integers in `[0, n)`; for graphs on `F_p^d` they are point ranks.
//!
//! Left-hand sides are exact integers or exact rationals; only the bound
//! sides go through floating point, and comparisons allow [`BOUND_TOL`].

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive};
use thiserror::Error;

/// Absolute slack on every `lhs <= rhs` comparison against a real bound.
pub const BOUND_TOL: f64 = 1e-9;

/// Largest set accepted by the cubic hinge oracle.
pub const HINGE_ORACLE_MAX: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpectralError {
    #[error("vertex {vertex} is out of range for a graph on {n} vertices")]
    VertexOutOfRange { vertex: u64, n: u64 },
    #[error("set of size {size} exceeds the oracle limit of {limit}")]
    TooLarge { size: usize, limit: usize },
}

/// A `k`-regular undirected simple graph on vertices `0..n`.
pub trait RegularGraph: Sync {
    fn vertex_count(&self) -> u64;
    fn degree(&self) -> u64;
    /// Replaces the contents of `out` with the neighbors of `v`.
    fn neighbors_into(&self, v: u64, out: &mut Vec<u64>);
    fn is_adjacent(&self, u: u64, v: u64) -> bool;
}

/// A regular graph paired with the eigenvalue bound used in the checks.
#[derive(Clone, Copy)]
pub struct RegularGraphView<'g> {
    graph: &'g dyn RegularGraph,
    lambda: f64,
}

impl<'g> RegularGraphView<'g> {
    pub fn new(graph: &'g dyn RegularGraph, lambda: f64) -> Self {
        Self { graph, lambda }
    }

    pub fn n(&self) -> u64 {
        self.graph.vertex_count()
    }

    pub fn k(&self) -> u64 {
        self.graph.degree()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            graph: self.graph,
            lambda,
        }
    }

    pub fn graph(&self) -> &'g dyn RegularGraph {
        self.graph
    }
}

/// A duplicate-free vertex subset with O(1) membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexSet {
    members: Vec<u64>,
    mask: Vec<bool>,
}

impl VertexSet {
    /// Duplicates are dropped; first occurrence order is kept.
    pub fn new(n: u64, vertices: impl IntoIterator<Item = u64>) -> Result<Self, SpectralError> {
        let mut mask = vec![false; n as usize];
        let mut members = Vec::new();
        for v in vertices {
            if v >= n {
                return Err(SpectralError::VertexOutOfRange { vertex: v, n });
            }
            if !mask[v as usize] {
                mask[v as usize] = true;
                members.push(v);
            }
        }
        Ok(Self { members, mask })
    }

    pub fn full(n: u64) -> Self {
        Self {
            members: (0..n).collect(),
            mask: vec![true; n as usize],
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[u64] {
        &self.members
    }

    #[inline]
    pub fn contains(&self, v: u64) -> bool {
        self.mask.get(v as usize).copied().unwrap_or(false)
    }

    fn universe(&self) -> u64 {
        self.mask.len() as u64
    }
}

fn check_universe(view: &RegularGraphView<'_>, set: &VertexSet) -> Result<(), SpectralError> {
    let n = view.n();
    if set.universe() != n {
        // A set built for a larger universe may hold out-of-range vertices.
        if let Some(&v) = set.members.iter().find(|&&v| v >= n) {
            return Err(SpectralError::VertexOutOfRange { vertex: v, n });
        }
    }
    Ok(())
}

/// `|N(v) ∩ E|` for every `v` in `E`, in member order.
pub fn inner_degrees(view: &RegularGraphView<'_>, set: &VertexSet) -> Vec<u64> {
    let mut buf = Vec::with_capacity(view.k() as usize);
    set.members
        .iter()
        .map(|&v| {
            view.graph.neighbors_into(v, &mut buf);
            buf.iter().filter(|&&u| set.contains(u)).count() as u64
        })
        .collect()
}

/// Ordered triples `(u, v, w)` in `E^3` with `uv` and `vw` edges; `u = w`
/// is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct HingeCount {
    pub p2: u128,
}

/// `sum_{v in E} |N(v) ∩ E|^2` in one pass over `E`.
pub fn hinge_count(
    view: &RegularGraphView<'_>,
    set: &VertexSet,
) -> Result<HingeCount, SpectralError> {
    check_universe(view, set)?;
    let p2 = inner_degrees(view, set)
        .into_iter()
        .map(|d| d as u128 * d as u128)
        .sum();
    Ok(HingeCount { p2 })
}

/// Literal triple loop over `E^3`, testing both adjacencies.
pub fn hinge_count_oracle(
    view: &RegularGraphView<'_>,
    set: &VertexSet,
) -> Result<HingeCount, SpectralError> {
    check_universe(view, set)?;
    if set.len() > HINGE_ORACLE_MAX {
        return Err(SpectralError::TooLarge {
            size: set.len(),
            limit: HINGE_ORACLE_MAX,
        });
    }
    let g = view.graph;
    let mut p2 = 0u128;
    for &u in &set.members {
        for &v in &set.members {
            if !g.is_adjacent(u, v) {
                continue;
            }
            for &w in &set.members {
                if g.is_adjacent(v, w) {
                    p2 += 1;
                }
            }
        }
    }
    Ok(HingeCount { p2 })
}

/// `m (k m / n + lambda)^2`.
pub fn hinge_bound(n: u64, k: u64, lambda: f64, m: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let density = Ratio::new(k as i128 * m as i128, n as i128)
        .to_f64()
        .expect("finite ratio");
    let t = density + lambda;
    m as f64 * t * t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HingeCheck {
    pub p2: u128,
    pub bound: f64,
    pub holds: bool,
}

pub fn hinge_check(
    view: &RegularGraphView<'_>,
    set: &VertexSet,
) -> Result<HingeCheck, SpectralError> {
    let p2 = hinge_count(view, set)?.p2;
    let bound = hinge_bound(view.n(), view.k(), view.lambda, set.len() as u64);
    Ok(HingeCheck {
        p2,
        bound,
        holds: p2 as f64 <= bound + BOUND_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `sum_{v in V} (|N_B(v)| - k|B|/n)^2 <= (lambda^2/n) |B| (n - |B|)`.
///
/// The left side is evaluated exactly as `(n * sum c_v^2 - (k|B|)^2) / n`,
/// using `sum c_v = k|B|` for a regular graph.
pub fn variance_check(
    view: &RegularGraphView<'_>,
    set: &VertexSet,
) -> Result<VarianceCheck, SpectralError> {
    check_universe(view, set)?;
    let n = view.n();
    let k = view.k();
    let mut counts = vec![0u32; n as usize];
    let mut buf = Vec::with_capacity(k as usize);
    for &u in &set.members {
        view.graph.neighbors_into(u, &mut buf);
        for &v in &buf {
            counts[v as usize] += 1;
        }
    }
    let sum_sq: i128 = counts.iter().map(|&c| c as i128 * c as i128).sum();
    let b = set.len() as i128;
    let kb = k as i128 * b;
    let lhs = Ratio::new(n as i128 * sum_sq - kb * kb, n as i128)
        .to_f64()
        .expect("finite ratio");
    let rhs = view.lambda * view.lambda / n as f64 * b as f64 * (n as i128 - b) as f64;
    Ok(VarianceCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingCheck {
    pub e: u128,
    pub expected: f64,
    pub deviation: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `|e(B, C) - k|B||C|/n| <= lambda sqrt(|B||C|)` with `e(B, C)` counting
/// ordered pairs `(u, v)`, `u in B`, `v in C`, `uv` an edge.
pub fn mixing_check(
    view: &RegularGraphView<'_>,
    b: &VertexSet,
    c: &VertexSet,
) -> Result<MixingCheck, SpectralError> {
    check_universe(view, b)?;
    check_universe(view, c)?;
    let mut buf = Vec::with_capacity(view.k() as usize);
    let mut e = 0u128;
    for &u in &b.members {
        view.graph.neighbors_into(u, &mut buf);
        e += buf.iter().filter(|&&v| c.contains(v)).count() as u128;
    }
    let bc = b.len() as i128 * c.len() as i128;
    let expected_exact = Ratio::new(view.k() as i128 * bc, view.n() as i128);
    let deviation = (Ratio::from_integer(e as i128) - expected_exact)
        .abs()
        .to_f64()
        .expect("finite ratio");
    let expected = expected_exact.to_f64().expect("finite ratio");
    let bound = view.lambda * (bc as f64).sqrt();
    Ok(MixingCheck {
        e,
        expected,
        deviation,
        bound,
        holds: deviation <= bound + BOUND_TOL,
    })
}

/// The intermediate step of the hinge estimate:
/// `sum_{v in E} |N_E(v)| <= k|E|^2/n + lambda |E|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerDegreeCheck {
    pub degree_sum: u128,
    pub bound: f64,
    pub holds: bool,
}

pub fn inner_degree_check(
    view: &RegularGraphView<'_>,
    set: &VertexSet,
) -> Result<InnerDegreeCheck, SpectralError> {
    check_universe(view, set)?;
    let degree_sum: u128 = inner_degrees(view, set).into_iter().map(u128::from).sum();
    let m = set.len() as i128;
    let bound = Ratio::new(view.k() as i128 * m * m, view.n() as i128)
        .to_f64()
        .expect("finite ratio")
        + view.lambda * m as f64;
    Ok(InnerDegreeCheck {
        degree_sum,
        bound,
        holds: degree_sum as f64 <= bound + BOUND_TOL,
    })
}
