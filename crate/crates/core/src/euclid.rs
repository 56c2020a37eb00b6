//! The finite Euclidean graph `G_p(a)` on `F_p^d`: `x ~ y` iff `x != y` and
//! `||x - y|| = a`, for a fixed `a != 0`.
//!
//! `G_p(a)` is the Cayley graph of `(F_p^d, +)` with connection set the sphere
//! `S_a = {s : ||s|| = a}`, so its eigenvectors are the additive characters
//! `x -> e(m.x / p)` and the eigenvalue at frequency `m` is the character sum
//! `sum_{s in S_a} e(m.s / p)`. The sphere is closed under negation, so every
//! such sum is real.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::field::{Fe, PrimeField};
use crate::geometry::{check_dim, distance, sphere_points, GeometryError, Point};
use crate::limits::{space_size, Limits};
use crate::spectral::RegularGraph;

/// Largest tolerated imaginary part of a character sum.
pub const IMAG_TOL: f64 = 1e-8;
/// Eigenvalues closer than this are reported as one multiplicity class.
pub const GROUP_TOL: f64 = 1e-6;
/// Relative tolerance on the trace identities, scaled by `n * k`.
pub const TRACE_TOL: f64 = 1e-6;
/// Eigenvector residual tolerance, scaled by the valency.
pub const EIGVEC_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EuclidError {
    #[error("radius must be nonzero")]
    ZeroRadius,
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error(
        "spectrum of a graph on {size} vertices exceeds the guardrail of {limit} (use --force)"
    )]
    TooLarge { size: u128, limit: u64 },
    #[error("character sum at m = {m} has imaginary part {residual:e}")]
    ImagResidualTooLarge { m: String, residual: f64 },
    #[error("spectrum verification failed: {check} residual {residual:e} exceeds {tolerance:e}")]
    VerificationFailed {
        check: &'static str,
        residual: f64,
        tolerance: f64,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `cos(2 pi t / p)` and `sin(2 pi t / p)` for every residue `t`.
#[derive(Debug, Clone)]
pub struct CharacterTable {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl CharacterTable {
    pub fn new(p: u32) -> Self {
        let step = std::f64::consts::TAU / p as f64;
        let (cos, sin) = (0..p)
            .map(|t| {
                let angle = step * t as f64;
                (angle.cos(), angle.sin())
            })
            .unzip();
        Self { cos, sin }
    }

    #[inline]
    pub fn cos(&self, t: u32) -> f64 {
        self.cos[t as usize]
    }

    #[inline]
    pub fn sin(&self, t: u32) -> f64 {
        self.sin[t as usize]
    }
}

/// `G_p(a)` in dimension `dim`, with its connection set enumerated.
#[derive(Debug, Clone)]
pub struct EuclidGraph {
    field: PrimeField,
    dim: usize,
    radius: Fe,
    n: u64,
    sphere: Vec<Point>,
    /// Sphere coordinates, row-major `valency x dim`.
    offsets: Vec<u32>,
}

impl EuclidGraph {
    pub fn new(
        field: PrimeField,
        dim: usize,
        radius: Fe,
        limits: &Limits,
    ) -> Result<Self, EuclidError> {
        if dim < 2 {
            return Err(EuclidError::DimensionTooSmall(dim));
        }
        if radius.is_zero() {
            return Err(EuclidError::ZeroRadius);
        }
        let sphere = sphere_points(&field, dim, radius, limits)?;
        let n = space_size(field.modulus(), dim).expect("guarded by sphere enumeration");
        let offsets = sphere
            .iter()
            .flat_map(|s| s.coords().iter().map(|c| c.value()))
            .collect();
        Ok(Self {
            field,
            dim,
            radius,
            n,
            sphere,
            offsets,
        })
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> Fe {
        self.radius
    }

    pub fn valency(&self) -> u64 {
        self.sphere.len() as u64
    }

    pub fn vertex_count(&self) -> u64 {
        self.n
    }

    /// The connection set `S_a`, in lexicographic order.
    pub fn sphere(&self) -> &[Point] {
        &self.sphere
    }

    /// `2 p^((dim - 1) / 2)`.
    pub fn ramanujan_bound(&self) -> f64 {
        ramanujan_bound(self.field.modulus(), self.dim)
    }

    pub fn adjacent(&self, x: &Point, y: &Point) -> Result<bool, EuclidError> {
        check_dim(self.dim, x.dim())?;
        check_dim(self.dim, y.dim())?;
        Ok(x != y && distance(&self.field, x, y)? == self.radius)
    }

    fn offset(&self, j: usize) -> &[u32] {
        &self.offsets[j * self.dim..(j + 1) * self.dim]
    }

    fn digits(&self, mut rank: u64, out: &mut [u32]) {
        let p = self.field.modulus() as u64;
        for d in out.iter_mut() {
            *d = (rank % p) as u32;
            rank /= p;
        }
    }

    /// Histogram of `m.s mod p` over the sphere.
    fn dot_histogram(&self, m: &[u32]) -> Vec<u64> {
        let p = self.field.modulus() as u64;
        let mut hist = vec![0u64; p as usize];
        for j in 0..self.sphere.len() {
            let dot = self
                .offset(j)
                .iter()
                .zip(m)
                .fold(0u64, |acc, (&s, &mi)| (acc + s as u64 * mi as u64) % p);
            hist[dot as usize] += 1;
        }
        hist
    }

    fn character_sum(&self, table: &CharacterTable, m: &[u32]) -> (f64, f64) {
        let hist = self.dot_histogram(m);
        hist.iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .fold((0.0, 0.0), |(re, im), (t, &c)| {
                (
                    re + c as f64 * table.cos(t as u32),
                    im + c as f64 * table.sin(t as u32),
                )
            })
    }

    /// The eigenvalue for the character at frequency `m`.
    pub fn eigenvalue_at(&self, m: &Point) -> Result<f64, EuclidError> {
        check_dim(self.dim, m.dim())?;
        let table = CharacterTable::new(self.field.modulus());
        let coords: Vec<u32> = m.coords().iter().map(|c| c.value()).collect();
        let (re, im) = self.character_sum(&table, &coords);
        if im.abs() > IMAG_TOL {
            return Err(EuclidError::ImagResidualTooLarge {
                m: m.to_string(),
                residual: im.abs(),
            });
        }
        Ok(re)
    }

    /// All `p^dim` eigenvalues, indexed by the rank of their frequency.
    pub fn spectrum(&self, limits: &Limits) -> Result<SpectralSummary, EuclidError> {
        if self.n > limits.spectrum_space {
            return Err(EuclidError::TooLarge {
                size: self.n as u128,
                limit: limits.spectrum_space,
            });
        }
        let table = CharacterTable::new(self.field.modulus());
        let sums: Vec<(f64, f64)> = (0..self.n)
            .into_par_iter()
            .map_init(
                || vec![0u32; self.dim],
                |m, rank| {
                    self.digits(rank, m);
                    self.character_sum(&table, m)
                },
            )
            .collect();
        let max_imag_residual = sums.iter().map(|&(_, im)| im.abs()).fold(0.0, f64::max);
        if max_imag_residual > IMAG_TOL {
            let (rank, _) = sums
                .iter()
                .enumerate()
                .find(|(_, &(_, im))| im.abs() == max_imag_residual)
                .expect("maximum is attained");
            return Err(EuclidError::ImagResidualTooLarge {
                m: Point::from_rank(rank as u64, self.field.modulus(), self.dim).to_string(),
                residual: max_imag_residual,
            });
        }
        let values: Vec<f64> = sums.into_iter().map(|(re, _)| re).collect();
        let second_eigenvalue = values[1..].iter().map(|v| v.abs()).fold(0.0, f64::max);
        Ok(SpectralSummary {
            p: self.field.modulus(),
            dim: self.dim,
            radius: self.radius,
            valency: self.valency(),
            n: self.n,
            classes: group_eigenvalues(&values),
            trivial_eigenvalue: values[0],
            second_eigenvalue,
            ramanujan_bound: self.ramanujan_bound(),
            max_imag_residual,
            values,
        })
    }

    /// Checks a computed spectrum against the graph itself: the closed-walk
    /// identities `sum lambda = 0` and `sum lambda^2 = n k`, and the
    /// eigenvector equation `A v_m = lambda_m v_m` at `sample_count` random
    /// frequencies, with `A v` summed over explicit neighbors.
    pub fn verify_spectrum(
        &self,
        summary: &SpectralSummary,
        sample_count: usize,
        seed: u64,
    ) -> Result<SpectrumDiagnostics, EuclidError> {
        let n = self.n;
        let k = self.valency();
        let scale = n as f64 * k as f64;
        let trace1: f64 = summary.values.iter().sum();
        let trace2: f64 = summary.values.iter().map(|v| v * v).sum();
        let trace1_residual = trace1.abs();
        let trace2_residual = (trace2 - scale).abs();
        let trace_tol = TRACE_TOL * scale;
        if trace1_residual > trace_tol {
            return Err(EuclidError::VerificationFailed {
                check: "trace",
                residual: trace1_residual,
                tolerance: trace_tol,
            });
        }
        if trace2_residual > trace_tol {
            return Err(EuclidError::VerificationFailed {
                check: "trace of square",
                residual: trace2_residual,
                tolerance: trace_tol,
            });
        }

        let p = self.field.modulus();
        let table = CharacterTable::new(p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max_eigvec_residual: f64 = 0.0;
        let mut neighbors = Vec::with_capacity(k as usize);
        for _ in 0..sample_count {
            let m_rank = rng.random_range(0..n);
            let m = Point::from_rank(m_rank, p, self.dim);
            let lambda = summary.values[m_rank as usize];
            let phase = |x: &Point| m.dot(&self.field, x).value();
            for x_rank in 0..n {
                let x = Point::from_rank(x_rank, p, self.dim);
                self.neighbors_into(x_rank, &mut neighbors);
                let (mut re, mut im) = (0.0, 0.0);
                for &y_rank in &neighbors {
                    let t = phase(&Point::from_rank(y_rank, p, self.dim));
                    re += table.cos(t);
                    im += table.sin(t);
                }
                let t = phase(&x);
                let dr = re - lambda * table.cos(t);
                let di = im - lambda * table.sin(t);
                max_eigvec_residual = max_eigvec_residual.max(dr.hypot(di));
            }
        }
        let eig_tol = EIGVEC_TOL * k as f64;
        if max_eigvec_residual > eig_tol {
            return Err(EuclidError::VerificationFailed {
                check: "eigenvector",
                residual: max_eigvec_residual,
                tolerance: eig_tol,
            });
        }
        Ok(SpectrumDiagnostics {
            trace1_residual,
            trace2_residual,
            trace_scale: scale,
            samples: sample_count,
            max_eigvec_residual,
        })
    }
}

pub fn ramanujan_bound(p: u32, dim: usize) -> f64 {
    2.0 * (p as f64).powf((dim as f64 - 1.0) / 2.0)
}

impl RegularGraph for EuclidGraph {
    fn vertex_count(&self) -> u64 {
        self.n
    }

    fn degree(&self) -> u64 {
        self.valency()
    }

    fn neighbors_into(&self, v: u64, out: &mut Vec<u64>) {
        out.clear();
        let p = self.field.modulus() as u64;
        let mut x = vec![0u32; self.dim];
        self.digits(v, &mut x);
        for j in 0..self.sphere.len() {
            let s = self.offset(j);
            let rank = x.iter().zip(s).rev().fold(0u64, |acc, (&xi, &si)| {
                acc * p + (xi as u64 + si as u64) % p
            });
            out.push(rank);
        }
    }

    fn is_adjacent(&self, u: u64, v: u64) -> bool {
        if u == v {
            return false;
        }
        let p = self.field.modulus();
        let x = Point::from_rank(u, p, self.dim);
        let y = Point::from_rank(v, p, self.dim);
        distance(&self.field, &x, &y)
            .map(|d| d == self.radius)
            .unwrap_or(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenClass {
    pub value: f64,
    pub multiplicity: u64,
}

/// Sorts descending and merges values within [`GROUP_TOL`] of the first
/// member of their class.
pub fn group_eigenvalues(values: &[f64]) -> Vec<EigenClass> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut classes: Vec<EigenClass> = Vec::new();
    for v in sorted {
        match classes.last_mut() {
            Some(c) if (c.value - v).abs() <= GROUP_TOL => c.multiplicity += 1,
            _ => classes.push(EigenClass {
                value: v,
                multiplicity: 1,
            }),
        }
    }
    classes
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub p: u32,
    pub dim: usize,
    pub radius: Fe,
    pub valency: u64,
    pub n: u64,
    /// `values[r]` is the eigenvalue at the frequency of rank `r`.
    pub values: Vec<f64>,
    pub classes: Vec<EigenClass>,
    pub trivial_eigenvalue: f64,
    /// `max_{m != 0} |lambda_m|`.
    pub second_eigenvalue: f64,
    pub ramanujan_bound: f64,
    pub max_imag_residual: f64,
}

impl SpectralSummary {
    pub fn within_ramanujan_bound(&self) -> bool {
        self.second_eigenvalue <= self.ramanujan_bound + crate::spectral::BOUND_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumDiagnostics {
    pub trace1_residual: f64,
    pub trace2_residual: f64,
    pub trace_scale: f64,
    pub samples: usize,
    pub max_eigvec_residual: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_field;

    fn graph(p: u64, dim: usize, a: i64) -> EuclidGraph {
        let f = make_field(p).unwrap();
        let a = f.elem(a);
        EuclidGraph::new(f, dim, a, &Limits::default()).unwrap()
    }

    fn pt(g: &EuclidGraph, c: &[i64]) -> Point {
        Point::from_ints(g.field(), c)
    }

    #[test]
    fn construction_errors() {
        let f = make_field(3).unwrap();
        assert_eq!(
            EuclidGraph::new(f.clone(), 2, Fe::ZERO, &Limits::default()).unwrap_err(),
            EuclidError::ZeroRadius
        );
        assert_eq!(
            EuclidGraph::new(f, 1, Fe::ZERO, &Limits::default()).unwrap_err(),
            EuclidError::DimensionTooSmall(1)
        );
    }

    #[test]
    fn adjacency_examples() {
        let g = graph(3, 2, 1);
        assert!(g.adjacent(&pt(&g, &[0, 0]), &pt(&g, &[0, 1])).unwrap());
        assert!(!g.adjacent(&pt(&g, &[1, 2]), &pt(&g, &[1, 2])).unwrap());
        assert!(!g.adjacent(&pt(&g, &[0, 0]), &pt(&g, &[1, 1])).unwrap());
        assert!(matches!(
            g.adjacent(&pt(&g, &[0, 0]), &pt(&g, &[1, 1, 1])),
            Err(EuclidError::Geometry(
                GeometryError::DimensionMismatch { .. }
            ))
        ));
    }

    #[test]
    fn eigenvalue_examples() {
        let g = graph(3, 2, 1);
        assert!((g.eigenvalue_at(&pt(&g, &[0, 0])).unwrap() - 4.0).abs() < 1e-12);
        assert!((g.eigenvalue_at(&pt(&g, &[1, 0])).unwrap() - 1.0).abs() < 1e-12);
        assert!((g.eigenvalue_at(&pt(&g, &[1, 1])).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_of_g3() {
        let g = graph(3, 2, 1);
        let s = g.spectrum(&Limits::default()).unwrap();
        let got: Vec<(f64, u64)> = s
            .classes
            .iter()
            .map(|c| (c.value, c.multiplicity))
            .collect();
        let want = [(4.0, 1), (1.0, 4), (-2.0, 4)];
        assert_eq!(got.len(), 3);
        for ((v, m), (wv, wm)) in got.iter().zip(want) {
            assert!((v - wv).abs() < 1e-9);
            assert_eq!(*m, wm);
        }
        assert!((s.second_eigenvalue - 2.0).abs() < 1e-12);
        assert!((s.ramanujan_bound - 12f64.sqrt()).abs() < 1e-12);
        assert!(s.values.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn neighbors_match_adjacency() {
        for (p, dim) in [(3, 2), (7, 2), (3, 3), (5, 3)] {
            for a in 1..p as i64 {
                let g = graph(p, dim, a);
                let mut buf = Vec::new();
                for v in 0..g.vertex_count() {
                    g.neighbors_into(v, &mut buf);
                    assert_eq!(buf.len() as u64, g.valency());
                    let mut sorted = buf.clone();
                    sorted.sort_unstable();
                    sorted.dedup();
                    assert_eq!(sorted.len(), buf.len());
                    let brute: Vec<u64> = (0..g.vertex_count())
                        .filter(|&u| g.is_adjacent(v, u))
                        .collect();
                    assert_eq!(sorted, brute);
                }
            }
        }
    }

    #[test]
    fn negation_symmetry_and_ramanujan() {
        for (p, dim) in [(7u64, 2usize), (11, 2), (3, 3), (7, 3)] {
            let f = make_field(p).unwrap();
            for a in f.nonzero_elements() {
                let g = EuclidGraph::new(f.clone(), dim, a, &Limits::default()).unwrap();
                let s = g.spectrum(&Limits::default()).unwrap();
                assert_eq!(s.trivial_eigenvalue, g.valency() as f64);
                assert!(s.within_ramanujan_bound());
                let mult: u64 = s.classes.iter().map(|c| c.multiplicity).sum();
                assert_eq!(mult, g.vertex_count());
                for r in 0..g.vertex_count() {
                    let m = Point::from_rank(r, f.modulus(), dim);
                    let neg = m.neg(&f).rank(f.modulus());
                    assert!((s.values[r as usize] - s.values[neg as usize]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn verification_passes_and_detects_corruption() {
        let g = graph(7, 2, 1);
        let s = g.spectrum(&Limits::default()).unwrap();
        let d = g.verify_spectrum(&s, 5, 42).unwrap();
        assert!((d.trace_scale - 392.0).abs() < 1e-12);
        assert!(d.trace2_residual < 1e-6);
        assert!(d.max_eigvec_residual < 1e-8 * 8.0);

        let mut bad = s.clone();
        bad.values[3] += 0.5;
        bad.values[4] -= 0.5;
        assert!(matches!(
            g.verify_spectrum(&bad, 0, 0),
            Err(EuclidError::VerificationFailed {
                check: "trace of square",
                ..
            })
        ));
        let mut swapped = s.clone();
        swapped.values.swap(1, 8);
        if (s.values[1] - s.values[8]).abs() > 1e-3 {
            // A permuted spectrum keeps both traces but breaks eigenvectors.
            assert!(matches!(
                g.verify_spectrum(&swapped, 200, 1),
                Err(EuclidError::VerificationFailed {
                    check: "eigenvector",
                    ..
                })
            ));
        }
    }

    #[test]
    fn spectrum_guardrail() {
        let g = graph(11, 2, 1);
        let lim = Limits {
            spectrum_space: 100,
            ..Limits::default()
        };
        assert!(matches!(
            g.spectrum(&lim),
            Err(EuclidError::TooLarge { .. })
        ));
    }

    #[test]
    fn grouping_merges_close_values() {
        let c = group_eigenvalues(&[1.0, -2.0, 1.0 + 1e-9, 4.0, -2.0 - 1e-7]);
        let pairs: Vec<(f64, u64)> = c.iter().map(|c| (c.value, c.multiplicity)).collect();
        assert_eq!(pairs, vec![(4.0, 1), (1.0 + 1e-9, 2), (-2.0, 2)]);
    }
}
