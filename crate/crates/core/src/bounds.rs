//! The squared-multiplicity statistic `f(E)` of a point set, its distance set,
//! and the two-sided bounds on `f(E)`.
//!
//! `deg(p, r)` counts the points of `E` at distance `r` from `p`, and
//! `f(E) = sum_{r != 0} sum_{p in E} deg(p, r)^2`. Since `sum_p deg(p, a)^2`
//! is exactly the hinge count of `E` in `G_q(a)`, the hinge estimate applied
//! per radius bounds `f` from above; Cauchy-Schwarz over points and radii
//! bounds it from below.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::euclid::{ramanujan_bound, SpectralSummary};
use crate::field::PrimeField;
use crate::geometry::{check_dim, GeometryError, PointSet};
use crate::limits::Limits;
use crate::spectral::{hinge_bound, BOUND_TOL};

pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("no spectrum supplied for radius {0}")]
    MissingSpectrum(u32),
    #[error("spectrum for radius {radius} belongs to p={p}, dim={dim}")]
    SpectrumMismatch { radius: u32, p: u32, dim: usize },
    #[error("pair profile of {size} points exceeds the guardrail of {limit} pairs (use --force)")]
    TooLarge { size: usize, limit: u64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Refuses pairwise work on sets with `|E|^2` above the guardrail.
pub fn guard_pairs(set_size: usize, limits: &Limits) -> Result<(), BoundsError> {
    let work = (set_size as u128) * (set_size as u128);
    if work > limits.pair_work as u128 {
        Err(BoundsError::TooLarge {
            size: set_size,
            limit: limits.pair_work,
        })
    } else {
        Ok(())
    }
}

/// `deg[i][r]` for the `i`-th point of `E` and every residue `r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeProfile {
    q: u32,
    set_size: usize,
    deg: Vec<u32>,
    /// Ordered pairs `x != y` with `||x - y|| = 0`.
    pub null_pair_count: u128,
}

impl DegreeProfile {
    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn set_size(&self) -> usize {
        self.set_size
    }

    pub fn row(&self, i: usize) -> &[u32] {
        let q = self.q as usize;
        &self.deg[i * q..(i + 1) * q]
    }

    pub fn deg(&self, i: usize, r: u32) -> u32 {
        self.row(i)[r as usize]
    }

    /// `sum_{r != 0} sum_p deg(p, r)^2`.
    pub fn f_value(&self) -> u128 {
        (0..self.set_size)
            .map(|i| {
                self.row(i)[1..]
                    .iter()
                    .map(|&d| d as u128 * d as u128)
                    .sum::<u128>()
            })
            .sum()
    }

    /// Ordered pairs at nonzero distance, `sum_{r != 0} sum_p deg(p, r)`.
    pub fn nonzero_pair_count(&self) -> u128 {
        (0..self.set_size)
            .map(|i| self.row(i)[1..].iter().map(|&d| d as u128).sum::<u128>())
            .sum()
    }

    pub fn distance_set(&self) -> DistanceSet {
        let mut seen = vec![false; self.q as usize];
        for i in 0..self.set_size {
            for (r, &d) in self.row(i).iter().enumerate() {
                if d > 0 {
                    seen[r] = true;
                }
            }
        }
        DistanceSet {
            values: seen
                .iter()
                .enumerate()
                .filter(|(_, &s)| s)
                .map(|(r, _)| r as u32)
                .collect(),
        }
    }
}

/// One pass over ordered pairs. The diagonal `x = y` is skipped, so every
/// row sums to `|E| - 1`.
pub fn degree_profile(field: &PrimeField, set: &PointSet) -> DegreeProfile {
    let q = field.modulus() as usize;
    let p = q as u64;
    let m = set.len();
    let pts = set.points();
    let mut deg = vec![0u32; m * q];
    if m > 0 {
        deg.par_chunks_mut(q).enumerate().for_each(|(i, row)| {
            let x = pts[i].coords();
            for (j, y) in pts.iter().enumerate() {
                if i == j {
                    continue;
                }
                let r = x.iter().zip(y.coords()).fold(0u64, |acc, (a, b)| {
                    let d = field.sub(*a, *b).value() as u64;
                    (acc + d * d) % p
                });
                row[r as usize] += 1;
            }
        });
    }
    let null_pair_count = (0..m).map(|i| deg[i * q] as u128).sum();
    DegreeProfile {
        q: q as u32,
        set_size: m,
        deg,
        null_pair_count,
    }
}

pub fn f_count(field: &PrimeField, set: &PointSet) -> u128 {
    degree_profile(field, set).f_value()
}

/// Distances realized by ordered pairs of distinct points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceSet {
    pub values: BTreeSet<u32>,
}

impl DistanceSet {
    pub fn contains_zero(&self) -> bool {
        self.values.contains(&0)
    }

    pub fn nonzero(&self) -> impl Iterator<Item = u32> + '_ {
        self.values.iter().copied().filter(|&r| r != 0)
    }

    pub fn nonzero_len(&self) -> usize {
        self.nonzero().count()
    }
}

pub fn distance_set(field: &PrimeField, set: &PointSet) -> DistanceSet {
    degree_profile(field, set).distance_set()
}

/// `N^2 / ((q - 1) |E|)` with `N` the number of ordered nonzero-distance
/// pairs. Without null pairs `N = |E|(|E| - 1)`; `0` for the empty set.
pub fn lower_bound_f(profile: &DegreeProfile, q: u32) -> Rational {
    let m = profile.set_size as i128;
    if m == 0 {
        return Rational::zero();
    }
    let n = profile.nonzero_pair_count() as i128;
    Rational::new(n * n, (q as i128 - 1) * m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperBounds {
    /// `sum_{a != 0} |E| (k_a |E| / q^d + lambda_a)^2`.
    pub exact: f64,
    /// `(q - 1) |E| (max_a k_a |E| / q^d + 2 q^((d-1)/2))^2`.
    pub asymptotic: f64,
}

/// Needs one spectrum per nonzero radius, for the same `(q, dim)`.
pub fn upper_bound_f(
    q: u32,
    dim: usize,
    set_size: usize,
    spectra: &[SpectralSummary],
) -> Result<UpperBounds, BoundsError> {
    let mut by_radius: Vec<Option<&SpectralSummary>> = vec![None; q as usize];
    for s in spectra {
        if s.p != q || s.dim != dim {
            return Err(BoundsError::SpectrumMismatch {
                radius: s.radius.value(),
                p: s.p,
                dim: s.dim,
            });
        }
        by_radius[s.radius.value() as usize] = Some(s);
    }
    let m = set_size as u64;
    let mut exact = 0.0;
    let mut max_k = 0u64;
    let mut n = 0u64;
    for a in 1..q {
        let s = by_radius[a as usize].ok_or(BoundsError::MissingSpectrum(a))?;
        exact += hinge_bound(s.n, s.valency, s.second_eigenvalue, m);
        max_k = max_k.max(s.valency);
        n = s.n;
    }
    let asymptotic = if m == 0 || q < 2 {
        0.0
    } else {
        let density = Ratio::new(max_k as i128 * m as i128, n as i128)
            .to_f64()
            .expect("finite ratio");
        let t = density + ramanujan_bound(q, dim);
        (q - 1) as f64 * m as f64 * t * t
    };
    Ok(UpperBounds { exact, asymptotic })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `|E| >= q^((d+1)/2)`.
    A,
    /// `|E| < q^((d+1)/2)`.
    B,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::A => "a",
            Regime::B => "b",
        })
    }
}

pub fn regime_threshold(q: u32, dim: usize) -> f64 {
    (q as f64).powf((dim as f64 + 1.0) / 2.0)
}

pub fn classify_regime(q: u32, dim: usize, set_size: usize) -> Regime {
    if set_size as f64 >= regime_threshold(q, dim) {
        Regime::A
    } else {
        Regime::B
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Verdicts {
    /// `lower_bound <= f`, exact.
    pub lower: bool,
    /// `f <= upper_exact`.
    pub upper: bool,
    /// `upper_exact <= upper_asymptotic`.
    pub asymptotic: bool,
    /// `delta_implied <= |Delta(E) \ {0}|`, exact.
    pub remark: bool,
}

impl Verdicts {
    pub fn all(&self) -> bool {
        self.lower && self.upper && self.asymptotic && self.remark
    }
}

/// Slack for comparing two computed reals: [`BOUND_TOL`], scaled up for
/// magnitudes past one.
fn real_le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + BOUND_TOL * rhs.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub q: u32,
    pub dim: usize,
    pub set_size: usize,
    pub f_value: u128,
    /// Nonzero distances realized by `E`.
    pub distance_set: Vec<u32>,
    pub zero_distance_realized: bool,
    /// `N`, ordered pairs at nonzero distance.
    pub nonzero_pairs: u128,
    /// `|E| (|E| - 1)`; equals `N` when there are no null pairs.
    pub distinct_pairs: u128,
    pub null_pair_count: u128,
    pub lower_bound: Rational,
    pub upper_exact: f64,
    pub upper_asymptotic: f64,
    /// `N^2 / (|E| f)`.
    pub delta_implied: Rational,
    pub threshold: f64,
    pub regime: Regime,
    /// `f q / |E|^3`.
    pub ratio_cubic: f64,
    /// `f / (|E| q^d)`.
    pub ratio_linear: f64,
    pub verdicts: Verdicts,
}

impl BoundReport {
    pub fn distance_count(&self) -> usize {
        self.distance_set.len()
    }
}

/// Assembles `f(E)`, the distance set, both bounds, the implied distance-set
/// lower bound, and the regime of `E`.
pub fn check_main_theorem(
    field: &PrimeField,
    dim: usize,
    set: &PointSet,
    spectra: &[SpectralSummary],
) -> Result<BoundReport, BoundsError> {
    if !set.is_empty() {
        check_dim(dim, set.dim())?;
    }
    let q = field.modulus();
    let profile = degree_profile(field, set);
    let f_value = profile.f_value();
    let ds = profile.distance_set();
    let m = set.len();
    let nonzero_pairs = profile.nonzero_pair_count();
    let lower_bound = lower_bound_f(&profile, q);
    let upper = upper_bound_f(q, dim, m, spectra)?;
    let delta_implied = if f_value == 0 {
        Rational::zero()
    } else {
        let n = nonzero_pairs as i128;
        Rational::new(n * n, m as i128 * f_value as i128)
    };
    let distance_set: Vec<u32> = ds.nonzero().collect();
    let n_space = (q as f64).powi(dim as i32);
    let (ratio_cubic, ratio_linear) = if m == 0 {
        (0.0, 0.0)
    } else {
        let mf = m as f64;
        (
            f_value as f64 * q as f64 / (mf * mf * mf),
            f_value as f64 / (mf * n_space),
        )
    };
    let verdicts = Verdicts {
        lower: lower_bound <= Rational::from_integer(f_value as i128),
        upper: real_le(f_value as f64, upper.exact),
        asymptotic: real_le(upper.exact, upper.asymptotic),
        remark: delta_implied <= Rational::from_integer(distance_set.len() as i128),
    };
    Ok(BoundReport {
        q,
        dim,
        set_size: m,
        f_value,
        zero_distance_realized: ds.contains_zero(),
        distance_set,
        nonzero_pairs,
        distinct_pairs: m as u128 * (m as u128).saturating_sub(1),
        null_pair_count: profile.null_pair_count,
        lower_bound,
        upper_exact: upper.exact,
        upper_asymptotic: upper.asymptotic,
        delta_implied,
        threshold: regime_threshold(q, dim),
        regime: classify_regime(q, dim, m),
        ratio_cubic,
        ratio_linear,
        verdicts,
    })
}
