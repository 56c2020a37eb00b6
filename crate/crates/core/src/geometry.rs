//! Vectors in `F_p^d`, the quadratic distance form, spheres, and point sets.
//!
//! Points are identified by their rank `sum x_i * p^i` (first coordinate least
//! significant). Ranks order generated point sets, key membership lookups,
//! and are the vertex ids of the graphs built on `F_p^d`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::field::{Fe, PrimeField};
use crate::limits::{space_size, Limits};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("enumeration of {size} points exceeds the guardrail of {limit} (use --force)")]
    TooLarge { size: u128, limit: u64 },
    #[error("requested {requested} distinct points but only {available} exist")]
    InfeasibleSize { requested: u64, available: u64 },
    #[error("bad generator spec: {0}")]
    BadSpec(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate point {0}")]
    DuplicatePoint(Point),
    #[error("dimension must be at least 1")]
    ZeroDimension,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    coords: Vec<Fe>,
}

impl Point {
    pub fn new(coords: Vec<Fe>) -> Self {
        Self { coords }
    }

    /// Builds a point from raw integers, reducing each coordinate mod `p`.
    pub fn from_ints(field: &PrimeField, coords: &[i64]) -> Self {
        Self::new(coords.iter().map(|&c| field.elem(c)).collect())
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(vec![Fe::ZERO; dim])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Fe] {
        &self.coords
    }

    /// `sum x_i p^i`; the caller guarantees `p^dim` fits in 64 bits.
    pub fn rank(&self, p: u32) -> u64 {
        self.coords
            .iter()
            .rev()
            .fold(0u64, |acc, c| acc * p as u64 + c.value() as u64)
    }

    pub fn from_rank(mut rank: u64, p: u32, dim: usize) -> Self {
        let mut coords = Vec::with_capacity(dim);
        for _ in 0..dim {
            coords.push(Fe::from_reduced((rank % p as u64) as u32));
            rank /= p as u64;
        }
        Self::new(coords)
    }

    pub fn add(&self, field: &PrimeField, other: &Point) -> Point {
        Point::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| field.add(a, b))
                .collect(),
        )
    }

    pub fn sub(&self, field: &PrimeField, other: &Point) -> Point {
        Point::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| field.sub(a, b))
                .collect(),
        )
    }

    pub fn neg(&self, field: &PrimeField) -> Point {
        Point::new(self.coords.iter().map(|&a| field.neg(a)).collect())
    }

    pub fn scale(&self, field: &PrimeField, t: Fe) -> Point {
        Point::new(self.coords.iter().map(|&a| field.mul(a, t)).collect())
    }

    /// `sum x_i y_i` in the field.
    pub fn dot(&self, field: &PrimeField, other: &Point) -> Fe {
        let p = field.modulus() as u64;
        let s = self
            .coords
            .iter()
            .zip(&other.coords)
            .fold(0u64, |acc, (a, b)| {
                (acc + a.value() as u64 * b.value() as u64) % p
            });
        field.elem_unchecked(s as u32)
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// `x_1^2 + ... + x_d^2`.
pub fn norm(field: &PrimeField, x: &Point) -> Fe {
    x.dot(field, x)
}

/// `||x - y||`.
pub fn distance(field: &PrimeField, x: &Point, y: &Point) -> Result<Fe, GeometryError> {
    check_dim(x.dim(), y.dim())?;
    let p = field.modulus() as u64;
    let s = x.coords.iter().zip(&y.coords).fold(0u64, |acc, (a, b)| {
        let d = field.sub(*a, *b).value() as u64;
        (acc + d * d) % p
    });
    Ok(field.elem_unchecked(s as u32))
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<(), GeometryError> {
    if expected == found {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, found })
    }
}

/// `sizes[a]` is the number of `x` in `F_p^dim` with `||x|| = a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SphereTable {
    pub sizes: Vec<u128>,
}

impl SphereTable {
    pub fn size(&self, a: Fe) -> u128 {
        self.sizes[a.value() as usize]
    }

    pub fn total(&self) -> u128 {
        self.sizes.iter().sum()
    }
}

/// Sphere sizes for every dimension `0..=dim`, by repeated convolution with
/// the square-count table.
fn sphere_tables_upto(field: &PrimeField, dim: usize) -> Vec<Vec<u128>> {
    let p = field.modulus() as usize;
    let c = field.square_counts();
    let mut tables = Vec::with_capacity(dim + 1);
    let mut cur = vec![0u128; p];
    cur[0] = 1;
    tables.push(cur.clone());
    for _ in 0..dim {
        let mut next = vec![0u128; p];
        for (t, &n) in cur.iter().enumerate() {
            if n == 0 {
                continue;
            }
            for (x, &cx) in c.iter().enumerate() {
                if cx != 0 {
                    next[(t + x) % p] += n * cx as u128;
                }
            }
        }
        tables.push(next.clone());
        cur = next;
    }
    tables
}

pub fn sphere_table(field: &PrimeField, dim: usize) -> SphereTable {
    let mut tables = sphere_tables_upto(field, dim);
    SphereTable {
        sizes: tables.pop().expect("at least the dimension-0 table"),
    }
}

pub fn sphere_size(field: &PrimeField, dim: usize, a: Fe) -> u128 {
    sphere_table(field, dim).size(a)
}

fn guard_space(field: &PrimeField, dim: usize, limit: u64) -> Result<u64, GeometryError> {
    match space_size(field.modulus(), dim) {
        Some(n) if n <= limit => Ok(n),
        Some(n) => Err(GeometryError::TooLarge {
            size: n as u128,
            limit,
        }),
        None => Err(GeometryError::TooLarge {
            size: u128::MAX,
            limit,
        }),
    }
}

/// Points of norm `a` in lexicographic order (first coordinate most
/// significant).
pub fn sphere_points(
    field: &PrimeField,
    dim: usize,
    a: Fe,
    limits: &Limits,
) -> Result<Vec<Point>, GeometryError> {
    if dim == 0 {
        return Err(GeometryError::ZeroDimension);
    }
    guard_space(field, dim, limits.sphere_space)?;
    if dim <= 3 {
        Ok(LexPoints::new(field.modulus(), dim)
            .filter(|x| norm(field, x) == a)
            .collect())
    } else {
        Ok(sphere_points_descent(field, dim, a))
    }
}

/// Coordinate-by-coordinate descent, pruning prefixes whose remaining norm
/// cannot be reached by the coordinates still free.
fn sphere_points_descent(field: &PrimeField, dim: usize, a: Fe) -> Vec<Point> {
    let tables = sphere_tables_upto(field, dim);
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(dim);
    descend(field, &tables, dim, a, &mut prefix, &mut out);
    out
}

fn descend(
    field: &PrimeField,
    tables: &[Vec<u128>],
    dim: usize,
    remaining: Fe,
    prefix: &mut Vec<Fe>,
    out: &mut Vec<Point>,
) {
    let free = dim - prefix.len();
    if free == 0 {
        if remaining.is_zero() {
            out.push(Point::new(prefix.clone()));
        }
        return;
    }
    for x in field.elements() {
        let rest = field.sub(remaining, field.square(x));
        if tables[free - 1][rest.value() as usize] == 0 {
            continue;
        }
        prefix.push(x);
        descend(field, tables, dim, rest, prefix, out);
        prefix.pop();
    }
}

/// All of `F_p^dim` in lexicographic order.
pub struct LexPoints {
    p: u32,
    current: Option<Vec<Fe>>,
}

impl LexPoints {
    pub fn new(p: u32, dim: usize) -> Self {
        Self {
            p,
            current: Some(vec![Fe::ZERO; dim]),
        }
    }
}

impl Iterator for LexPoints {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        let cur = self.current.as_mut()?;
        let out = Point::new(cur.clone());
        let mut i = cur.len();
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            let v = cur[i].value() + 1;
            if v < self.p {
                cur[i] = Fe::from_reduced(v);
                break;
            }
            cur[i] = Fe::ZERO;
        }
        Some(out)
    }
}

/// A duplicate-free list of points of one dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    dim: usize,
    points: Vec<Point>,
    origin_label: String,
}

impl PointSet {
    pub fn new(
        dim: usize,
        points: Vec<Point>,
        origin_label: impl Into<String>,
    ) -> Result<Self, GeometryError> {
        let mut seen = HashSet::with_capacity(points.len());
        for x in &points {
            check_dim(dim, x.dim())?;
            if !seen.insert(x) {
                return Err(GeometryError::DuplicatePoint(x.clone()));
            }
        }
        Ok(Self {
            dim,
            points,
            origin_label: origin_label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn origin_label(&self) -> &str {
        &self.origin_label
    }

    pub fn ranks(&self, p: u32) -> Vec<u64> {
        self.points.iter().map(|x| x.rank(p)).collect()
    }

    /// Serializes in the one-point-per-line text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# {}\n", self.origin_label));
        for x in &self.points {
            let line: Vec<String> = x.coords.iter().map(|c| c.to_string()).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

/// Parses the text format: comma-separated residues, one point per line,
/// `#` comments and blank lines skipped, dimension fixed by the first point.
pub fn parse_point_set(
    field: &PrimeField,
    text: &str,
    origin_label: &str,
) -> Result<PointSet, GeometryError> {
    let mut dim = None;
    let mut seen = HashSet::new();
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let coords = line
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                let v: u64 = tok.parse().map_err(|_| GeometryError::Parse {
                    line: line_no,
                    message: format!("invalid coordinate {tok:?}"),
                })?;
                field.try_elem(v).ok_or_else(|| GeometryError::Parse {
                    line: line_no,
                    message: format!("coordinate {v} is not a residue mod {}", field.modulus()),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let d = *dim.get_or_insert(coords.len());
        if coords.len() != d {
            return Err(GeometryError::Parse {
                line: line_no,
                message: format!("expected {d} coordinates, found {}", coords.len()),
            });
        }
        let x = Point::new(coords);
        if !seen.insert(x.clone()) {
            return Err(GeometryError::Parse {
                line: line_no,
                message: format!("duplicate point {x}"),
            });
        }
        points.push(x);
    }
    Ok(PointSet {
        dim: dim.unwrap_or(0),
        points,
        origin_label: origin_label.to_string(),
    })
}

/// How to build a point set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorSpec {
    /// Every point of `F_p^dim`.
    All,
    /// `n` points drawn uniformly without replacement.
    Random(u64),
    /// Coordinates in `[0, s)`.
    Box(u32),
    /// Points of norm `a`.
    Sphere(u32),
    /// `{point + t * direction : t in F_p}`.
    Line {
        point: Vec<u32>,
        direction: Vec<u32>,
    },
    Union(Vec<GeneratorSpec>),
}

fn parse_coord_list(s: &str) -> Result<Vec<u32>, GeometryError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| GeometryError::BadSpec(format!("invalid coordinate {t:?}")))
        })
        .collect()
}

impl FromStr for GeneratorSpec {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.contains('+') {
            let parts = s
                .split('+')
                .map(str::parse::<GeneratorSpec>)
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(GeneratorSpec::Union(parts));
        }
        if s == "all" {
            return Ok(GeneratorSpec::All);
        }
        let bad = || GeometryError::BadSpec(format!("unrecognized generator {s:?}"));
        let open = s.find('(').ok_or_else(bad)?;
        let inner = s
            .strip_suffix(')')
            .map(|t| &t[open + 1..])
            .ok_or_else(bad)?
            .trim();
        let num = |what: &str| {
            inner.parse::<u64>().map_err(|_| {
                GeometryError::BadSpec(format!("{what} needs an integer, got {inner:?}"))
            })
        };
        match &s[..open] {
            "random" => Ok(GeneratorSpec::Random(num("random")?)),
            "box" => Ok(GeneratorSpec::Box(
                u32::try_from(num("box")?).map_err(|_| bad())?,
            )),
            "sphere" => Ok(GeneratorSpec::Sphere(
                u32::try_from(num("sphere")?).map_err(|_| bad())?,
            )),
            "line" => {
                let (pt, dir) = inner.split_once(';').ok_or_else(|| {
                    GeometryError::BadSpec("line needs `point;direction`".to_string())
                })?;
                Ok(GeneratorSpec::Line {
                    point: parse_coord_list(pt)?,
                    direction: parse_coord_list(dir)?,
                })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[u32]| {
            v.iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            GeneratorSpec::All => write!(f, "all"),
            GeneratorSpec::Random(n) => write!(f, "random({n})"),
            GeneratorSpec::Box(s) => write!(f, "box({s})"),
            GeneratorSpec::Sphere(a) => write!(f, "sphere({a})"),
            GeneratorSpec::Line { point, direction } => {
                write!(f, "line({};{})", join(point), join(direction))
            }
            GeneratorSpec::Union(parts) => {
                for (i, part) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{part}")?;
                }
                Ok(())
            }
        }
    }
}

/// Builds the point set described by `spec`. Output is sorted by rank, and
/// depends only on `(spec, seed)`.
pub fn generate_point_set(
    field: &PrimeField,
    dim: usize,
    spec: &GeneratorSpec,
    seed: u64,
    limits: &Limits,
) -> Result<PointSet, GeometryError> {
    if dim == 0 {
        return Err(GeometryError::ZeroDimension);
    }
    let p = field.modulus();
    let total = space_size(p, dim).ok_or(GeometryError::TooLarge {
        size: u128::MAX,
        limit: u64::MAX,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ranks = HashSet::new();
    collect_ranks(field, dim, spec, total, &mut rng, &mut ranks, limits)?;
    let mut ranks: Vec<u64> = ranks.into_iter().collect();
    ranks.sort_unstable();
    let points = ranks
        .into_iter()
        .map(|r| Point::from_rank(r, p, dim))
        .collect();
    Ok(PointSet {
        dim,
        points,
        origin_label: spec.to_string(),
    })
}

fn collect_ranks(
    field: &PrimeField,
    dim: usize,
    spec: &GeneratorSpec,
    total: u64,
    rng: &mut ChaCha8Rng,
    out: &mut HashSet<u64>,
    limits: &Limits,
) -> Result<(), GeometryError> {
    let p = field.modulus();
    match spec {
        GeneratorSpec::All => {
            guard_space(field, dim, limits.sphere_space)?;
            out.extend(0..total);
        }
        GeneratorSpec::Random(n) => {
            out.extend(sample_ranks(total, *n, rng)?);
        }
        GeneratorSpec::Box(s) => {
            if *s > p {
                return Err(GeometryError::BadSpec(format!(
                    "box side {s} exceeds the modulus {p}"
                )));
            }
            let count = space_size(*s, dim).unwrap_or(u64::MAX);
            if count > limits.sphere_space {
                return Err(GeometryError::TooLarge {
                    size: count as u128,
                    limit: limits.sphere_space,
                });
            }
            out.extend(LexPoints::new(*s, dim).map(|x| x.rank(p)));
        }
        GeneratorSpec::Sphere(a) => {
            let a = field.try_elem(*a as u64).ok_or_else(|| {
                GeometryError::BadSpec(format!("radius {a} is not a residue mod {p}"))
            })?;
            out.extend(
                sphere_points(field, dim, a, limits)?
                    .iter()
                    .map(|x| x.rank(p)),
            );
        }
        GeneratorSpec::Line { point, direction } => {
            if point.len() != dim || direction.len() != dim {
                return Err(GeometryError::BadSpec(format!(
                    "line needs {dim} coordinates for point and direction"
                )));
            }
            let to_point = |v: &[u32]| -> Result<Point, GeometryError> {
                v.iter()
                    .map(|&c| {
                        field.try_elem(c as u64).ok_or_else(|| {
                            GeometryError::BadSpec(format!("{c} is not a residue mod {p}"))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map(Point::new)
            };
            let base = to_point(point)?;
            let dir = to_point(direction)?;
            if dir.is_zero() {
                return Err(GeometryError::BadSpec("line direction is zero".to_string()));
            }
            for t in field.elements() {
                out.insert(base.add(field, &dir.scale(field, t)).rank(p));
            }
        }
        GeneratorSpec::Union(parts) => {
            for part in parts {
                collect_ranks(field, dim, part, total, rng, out, limits)?;
            }
        }
    }
    Ok(())
}

/// `n` distinct ranks in `[0, total)`, uniformly, by rejection against the
/// set drawn so far.
pub fn sample_ranks<R: Rng>(total: u64, n: u64, rng: &mut R) -> Result<Vec<u64>, GeometryError> {
    if n > total {
        return Err(GeometryError::InfeasibleSize {
            requested: n,
            available: total,
        });
    }
    let mut seen = HashSet::with_capacity(n as usize);
    let mut order = Vec::with_capacity(n as usize);
    while (order.len() as u64) < n {
        let r = rng.random_range(0..total);
        if seen.insert(r) {
            order.push(r);
        }
    }
    Ok(order)
}
