//! Parameter sweeps: one record per `(p, dim, generator, size, seed)` cell.
//!
//! Output is a pure function of the configuration. Cells run in parallel but
//! are sorted canonically before emission, per-cell seeds are derived by
//! hashing the configuration digest with the cell key, and no wall-clock
//! data enters the records.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bounds::{check_main_theorem, guard_pairs, Regime};
use crate::euclid::{ramanujan_bound, EuclidGraph, SpectralSummary};
use crate::field::{make_field, PrimeField};
use crate::geometry::{generate_point_set, GeneratorSpec};
use crate::limits::{space_size, Limits};
use crate::spectral::{
    hinge_check, inner_degree_check, mixing_check, variance_check, RegularGraphView, VertexSet,
};

use super::record::{report_fields, Record, Value};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SweepError {
    #[error("invalid sweep config: {0}")]
    Config(String),
}

fn config_err(msg: impl Into<String>) -> SweepError {
    SweepError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Spectrum,
    Variance,
    Mixing,
    Hinge,
    Main,
    Remark,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::Spectrum,
        Check::Variance,
        Check::Mixing,
        Check::Hinge,
        Check::Main,
        Check::Remark,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Spectrum => "spectrum",
            Check::Variance => "variance",
            Check::Mixing => "mixing",
            Check::Hinge => "hinge",
            Check::Main => "main",
            Check::Remark => "remark",
        }
    }
}

impl FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| format!("unknown check {s:?}"))
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A cardinality expression such as `q`, `0.5*q^2`, `2*t` or `17`, where
/// `t = q^((dim+1)/2)` and `n = q^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeExpr {
    coef: f64,
    base: SizeBase,
    exp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SizeBase {
    One,
    Q,
    Threshold,
    Space,
}

impl FromStr for SizeExpr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("bad size expression {s:?}");
        let s = s.trim();
        let (coef, term) = match s.split_once('*') {
            Some((c, t)) => (c.trim().parse::<f64>().map_err(|_| bad())?, t.trim()),
            None => (1.0, s),
        };
        if let Ok(v) = term.parse::<f64>() {
            return Ok(SizeExpr {
                coef: coef * v,
                base: SizeBase::One,
                exp: 1.0,
            });
        }
        let (base, exp) = match term.split_once('^') {
            Some((b, e)) => (b.trim(), e.trim().parse::<f64>().map_err(|_| bad())?),
            None => (term, 1.0),
        };
        let base = match base {
            "q" => SizeBase::Q,
            "t" => SizeBase::Threshold,
            "n" => SizeBase::Space,
            _ => return Err(bad()),
        };
        if !coef.is_finite() || coef < 0.0 || !exp.is_finite() {
            return Err(bad());
        }
        Ok(SizeExpr { coef, base, exp })
    }
}

impl SizeExpr {
    pub fn eval(&self, q: u32, dim: usize) -> f64 {
        let q = q as f64;
        let base = match self.base {
            SizeBase::One => 1.0,
            SizeBase::Q => q,
            SizeBase::Threshold => q.powf((dim as f64 + 1.0) / 2.0),
            SizeBase::Space => q.powi(dim as i32),
        };
        self.coef * base.powf(self.exp)
    }

    /// Rounded and clamped to `[1, q^dim]`.
    pub fn count(&self, q: u32, dim: usize) -> u64 {
        let total = space_size(q, dim).unwrap_or(u64::MAX);
        (self.eval(q, dim).round() as u64).clamp(1, total)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorEntry {
    /// A full generator spec, or `random` / `box` when `sizes` is given.
    pub spec: String,
    /// Target cardinalities; for `box` the side is `round(size^(1/dim))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<String>>,
}

impl GeneratorEntry {
    fn fixed(spec: &str) -> Self {
        Self {
            spec: spec.to_string(),
            sizes: None,
        }
    }

    fn sized(spec: &str, sizes: &[&str]) -> Self {
        Self {
            spec: spec.to_string(),
            sizes: Some(sizes.iter().map(|s| s.to_string()).collect()),
        }
    }

    /// `(size label, resolver)` pairs; fixed specs have a single empty label.
    fn schedule(&self) -> Result<Vec<(String, Resolver)>, SweepError> {
        match &self.sizes {
            None => {
                let spec: GeneratorSpec =
                    self.spec.parse().map_err(|e| config_err(format!("{e}")))?;
                Ok(vec![(String::new(), Resolver::Fixed(spec))])
            }
            Some(sizes) => {
                if sizes.is_empty() {
                    return Err(config_err(format!(
                        "generator {:?} has an empty size list",
                        self.spec
                    )));
                }
                let kind = match self.spec.as_str() {
                    "random" => SizedKind::Random,
                    "box" => SizedKind::Box,
                    other => {
                        return Err(config_err(format!(
                            "size schedules apply to random or box, not {other:?}"
                        )))
                    }
                };
                sizes
                    .iter()
                    .map(|s| {
                        let expr: SizeExpr = s.parse().map_err(config_err)?;
                        Ok((s.clone(), Resolver::Sized(kind, expr)))
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SizedKind {
    Random,
    Box,
}

#[derive(Debug, Clone)]
enum Resolver {
    Fixed(GeneratorSpec),
    Sized(SizedKind, SizeExpr),
}

impl Resolver {
    fn resolve(&self, q: u32, dim: usize) -> GeneratorSpec {
        match self {
            Resolver::Fixed(spec) => spec.clone(),
            Resolver::Sized(SizedKind::Random, e) => GeneratorSpec::Random(e.count(q, dim)),
            Resolver::Sized(SizedKind::Box, e) => {
                let side = (e.eval(q, dim).max(1.0).powf(1.0 / dim as f64)).round() as u32;
                GeneratorSpec::Box(side.clamp(1, q))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl Seeds {
    pub fn values(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range { start, count } => (*start..start + count).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub primes: Vec<u64>,
    pub dims: Vec<usize>,
}

fn default_checks() -> Vec<Check> {
    Check::ALL.to_vec()
}

fn default_samples() -> usize {
    4
}

/// A sweep: the product `primes x dims` plus any extra `grid` blocks, times
/// every generator size, times every seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub primes: Vec<u64>,
    #[serde(default)]
    pub dims: Vec<usize>,
    #[serde(default)]
    pub grid: Vec<Grid>,
    pub generators: Vec<GeneratorEntry>,
    pub seeds: Seeds,
    #[serde(default = "default_checks")]
    pub checks: Vec<Check>,
    /// Random frequencies per graph for the eigenvector check.
    #[serde(default = "default_samples")]
    pub spectrum_samples: usize,
    #[serde(default)]
    pub allow_1mod4: bool,
    #[serde(default)]
    pub force: bool,
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
}

impl SweepConfig {
    /// Planes over four primes `= 3 (mod 4)` and 3-space over two, with
    /// sizes on both sides of `q^((dim+1)/2)`, five seeds.
    pub fn default_sweep() -> Self {
        Self {
            primes: vec![3, 7, 11, 19],
            dims: vec![2],
            grid: vec![Grid {
                primes: vec![3, 7],
                dims: vec![3],
            }],
            generators: vec![
                GeneratorEntry::fixed("all"),
                GeneratorEntry::sized("box", &["0.5*t", "2*t"]),
                GeneratorEntry::fixed("sphere(1)"),
                GeneratorEntry::sized("random", &["0.5*t", "t", "2*t"]),
            ],
            seeds: Seeds::Range { start: 0, count: 5 },
            checks: default_checks(),
            spectrum_samples: default_samples(),
            allow_1mod4: false,
            force: false,
            output: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, SweepError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form (output path excluded).
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn limits(&self) -> Limits {
        Limits::with_force(self.force)
    }

    fn has(&self, c: Check) -> bool {
        self.checks.contains(&c)
    }

    /// Distinct `(p, dim)` pairs in ascending order.
    pub fn instances(&self) -> Result<Vec<(u64, usize)>, SweepError> {
        let mut pairs: Vec<(u64, usize)> = Vec::new();
        let blocks = std::iter::once((&self.primes, &self.dims))
            .chain(self.grid.iter().map(|g| (&g.primes, &g.dims)));
        for (primes, dims) in blocks {
            for &p in primes {
                for &d in dims {
                    pairs.push((p, d));
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        if pairs.is_empty() {
            return Err(config_err(
                "no (prime, dim) pairs; primes and dims must be non-empty",
            ));
        }
        Ok(pairs)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.generators.is_empty() {
            return Err(config_err("generators list is empty"));
        }
        if self.seeds.values().is_empty() {
            return Err(config_err("seed list is empty"));
        }
        if self.checks.is_empty() {
            return Err(config_err("checks list is empty"));
        }
        for g in &self.generators {
            g.schedule()?;
        }
        let limits = self.limits();
        for (p, dim) in self.instances()? {
            let field = make_field(p).map_err(|e| config_err(e.to_string()))?;
            if !field.hypothesis_holds() && !self.allow_1mod4 {
                return Err(config_err(format!(
                    "p = {p} is 1 mod 4, so -1 is a square; set allow_1mod4 to run it"
                )));
            }
            if dim < 2 {
                return Err(config_err(format!("dim {dim} < 2")));
            }
            let n = space_size(field.modulus(), dim).unwrap_or(u64::MAX);
            if n > limits.spectrum_space {
                return Err(config_err(format!(
                    "p^dim = {n} exceeds the spectrum guardrail {} (set force)",
                    limits.spectrum_space
                )));
            }
        }
        Ok(())
    }
}

/// Everything shared by the cells of one `(p, dim)`.
struct Instance {
    field: PrimeField,
    dim: usize,
    graphs: Vec<EuclidGraph>,
    spectra: Vec<SpectralSummary>,
    spectrum_error: Option<String>,
}

impl Instance {
    fn build(p: u64, dim: usize, config: &SweepConfig, digest: &str) -> Result<Self, String> {
        let limits = config.limits();
        let field = make_field(p).map_err(|e| e.to_string())?;
        let graphs = field
            .nonzero_elements()
            .map(|a| EuclidGraph::new(field.clone(), dim, a, &limits))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let spectra = graphs
            .iter()
            .map(|g| g.spectrum(&limits))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let mut spectrum_error = None;
        if config.has(Check::Spectrum) {
            for (g, s) in graphs.iter().zip(&spectra) {
                let seed = derive_seed(digest, &format!("spectrum|{p}|{dim}|{}", g.radius()));
                if let Err(e) = g.verify_spectrum(s, config.spectrum_samples, seed) {
                    spectrum_error = Some(format!("a={}: {e}", g.radius()));
                    break;
                }
                if !s.within_ramanujan_bound() {
                    spectrum_error = Some(format!(
                        "a={}: second eigenvalue {} exceeds {}",
                        g.radius(),
                        s.second_eigenvalue,
                        s.ramanujan_bound
                    ));
                    break;
                }
            }
        }
        Ok(Self {
            field,
            dim,
            graphs,
            spectra,
            spectrum_error,
        })
    }

    fn max_second_eigenvalue(&self) -> f64 {
        self.spectra
            .iter()
            .map(|s| s.second_eigenvalue)
            .fold(0.0, f64::max)
    }
}

/// First 8 bytes (little endian) of `SHA-256(digest | key)`.
pub fn derive_seed(digest: &str, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(digest.as_bytes());
    h.update(b"|");
    h.update(key.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct CellKey {
    p: u64,
    dim: usize,
    generator: usize,
    size: usize,
    seed: u64,
}

pub const SWEEP_FIELDS: &[&str] = &[
    "record_type",
    "status",
    "q",
    "dim",
    "generator",
    "size_expr",
    "resolved",
    "seed",
    "cell_seed",
    "hypothesis_holds",
    "set_size",
    "f_value",
    "distance_count",
    "distance_set",
    "zero_distance_realized",
    "nonzero_pairs",
    "distinct_pairs",
    "null_pair_count",
    "lower_bound",
    "upper_exact",
    "upper_asymptotic",
    "delta_implied",
    "threshold",
    "regime",
    "ratio_cubic",
    "ratio_linear",
    "lower_ok",
    "upper_ok",
    "asymptotic_ok",
    "remark_ok",
    "spectrum_ok",
    "max_second_eigenvalue",
    "ramanujan_bound",
    "hinge_ok",
    "inner_degree_ok",
    "variance_ok",
    "mixing_ok",
    "ceiling_ok",
    "error",
    "replay",
    "config_digest",
    "tool_version",
];

#[derive(Debug, Clone, Default)]
struct GraphVerdicts {
    hinge: bool,
    inner_degree: bool,
    variance: bool,
    mixing: bool,
}

fn graph_checks(
    inst: &Instance,
    set: &VertexSet,
    config: &SweepConfig,
    ceiling: bool,
) -> Result<GraphVerdicts, String> {
    let mut v = GraphVerdicts {
        hinge: true,
        inner_degree: true,
        variance: true,
        mixing: true,
    };
    let bound = ramanujan_bound(inst.field.modulus(), inst.dim);
    for (g, s) in inst.graphs.iter().zip(&inst.spectra) {
        let lambda = if ceiling { bound } else { s.second_eigenvalue };
        let view = RegularGraphView::new(g, lambda);
        let err = |e: crate::spectral::SpectralError| e.to_string();
        if config.has(Check::Hinge) {
            v.hinge &= hinge_check(&view, set).map_err(err)?.holds;
            v.inner_degree &= inner_degree_check(&view, set).map_err(err)?.holds;
        }
        if config.has(Check::Variance) {
            v.variance &= variance_check(&view, set).map_err(err)?.holds;
        }
        if config.has(Check::Mixing) {
            v.mixing &= mixing_check(&view, set, set).map_err(err)?.holds;
        }
    }
    Ok(v)
}

fn run_cell(
    inst: &Instance,
    key: &CellKey,
    label: &str,
    size_expr: &str,
    spec: &GeneratorSpec,
    config: &SweepConfig,
    digest: &str,
) -> (Record, bool) {
    let q = inst.field.modulus();
    let cell_seed = derive_seed(
        digest,
        &format!("{}|{}|{}|{}|{}", key.p, key.dim, label, size_expr, key.seed),
    );
    let mut rec = Record::new()
        .with("record_type", "cell")
        .with("q", q)
        .with("dim", inst.dim)
        .with("generator", label)
        .with("size_expr", size_expr)
        .with("resolved", spec.to_string())
        .with("seed", key.seed)
        .with("cell_seed", cell_seed)
        .with("hypothesis_holds", inst.field.hypothesis_holds())
        .with("max_second_eigenvalue", inst.max_second_eigenvalue())
        .with("ramanujan_bound", ramanujan_bound(q, inst.dim))
        .with("config_digest", digest)
        .with("tool_version", TOOL_VERSION);

    let limits = config.limits();
    let outcome = (|| -> Result<bool, String> {
        let set = generate_point_set(&inst.field, inst.dim, spec, cell_seed, &limits)
            .map_err(|e| e.to_string())?;
        guard_pairs(set.len(), &limits).map_err(|e| e.to_string())?;
        let mut ok = true;
        if config.has(Check::Spectrum) {
            rec.set("spectrum_ok", inst.spectrum_error.is_none());
            ok &= inst.spectrum_error.is_none();
        }
        if config.has(Check::Main) || config.has(Check::Remark) {
            let report = check_main_theorem(&inst.field, inst.dim, &set, &inst.spectra)
                .map_err(|e| e.to_string())?;
            report_fields(&mut rec, &report);
            if config.has(Check::Main) {
                ok &= report.verdicts.lower && report.verdicts.upper && report.verdicts.asymptotic;
            }
            if config.has(Check::Remark) {
                ok &= report.verdicts.remark;
            }
        } else {
            rec.set("set_size", set.len());
        }
        if [Check::Hinge, Check::Variance, Check::Mixing]
            .iter()
            .any(|&c| config.has(c))
        {
            let n = space_size(q, inst.dim).expect("validated");
            let vs = VertexSet::new(n, set.ranks(q)).map_err(|e| e.to_string())?;
            let exact = graph_checks(inst, &vs, config, false)?;
            let ceil = graph_checks(inst, &vs, config, true)?;
            if config.has(Check::Hinge) {
                rec.set("hinge_ok", exact.hinge)
                    .set("inner_degree_ok", exact.inner_degree);
            }
            if config.has(Check::Variance) {
                rec.set("variance_ok", exact.variance);
            }
            if config.has(Check::Mixing) {
                rec.set("mixing_ok", exact.mixing);
            }
            let ceiling_ok = ceil.hinge && ceil.inner_degree && ceil.variance && ceil.mixing;
            rec.set("ceiling_ok", ceiling_ok);
            ok &= exact.hinge && exact.inner_degree && exact.variance && exact.mixing && ceiling_ok;
        }
        Ok(ok)
    })();
    let ok = match outcome {
        Ok(ok) => {
            rec.set("status", if ok { "ok" } else { "violation" });
            ok
        }
        Err(e) => {
            rec.set("status", "error").set("error", e);
            false
        }
    };
    if !ok {
        let checks: Vec<&str> = config.checks.iter().map(|c| c.name()).collect();
        rec.set(
            "replay",
            format!(
                "fqlab verify --q {q} --dim {} --gen '{spec}' --gen-seed {cell_seed} --checks {}{}",
                inst.dim,
                checks.join(","),
                if config.allow_1mod4 {
                    " --allow-1mod4"
                } else {
                    ""
                }
            ),
        );
    }
    (rec, ok)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub q: u32,
    pub dim: usize,
    pub regime: Regime,
    pub cells: usize,
    pub ratio_cubic: (f64, f64),
    pub ratio_linear: (f64, f64),
}

/// Ranges of the two dimensionless ratios per `(q, dim, regime)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSummary {
    pub rows: Vec<SummaryRow>,
}

impl SweepSummary {
    pub fn from_records(records: &[Record]) -> Self {
        let mut groups: BTreeMap<(i128, i128, String), SummaryRow> = BTreeMap::new();
        for r in records {
            let (Some(Value::Int(q)), Some(Value::Int(dim)), Some(Value::Str(regime))) =
                (r.get("q"), r.get("dim"), r.get("regime"))
            else {
                continue;
            };
            let (Some(Value::Real(rc)), Some(Value::Real(rl))) =
                (r.get("ratio_cubic"), r.get("ratio_linear"))
            else {
                continue;
            };
            let regime_v = if regime == "a" { Regime::A } else { Regime::B };
            let row = groups
                .entry((*q, *dim, regime.clone()))
                .or_insert(SummaryRow {
                    q: *q as u32,
                    dim: *dim as usize,
                    regime: regime_v,
                    cells: 0,
                    ratio_cubic: (f64::INFINITY, f64::NEG_INFINITY),
                    ratio_linear: (f64::INFINITY, f64::NEG_INFINITY),
                });
            row.cells += 1;
            row.ratio_cubic = (row.ratio_cubic.0.min(*rc), row.ratio_cubic.1.max(*rc));
            row.ratio_linear = (row.ratio_linear.0.min(*rl), row.ratio_linear.1.max(*rl));
        }
        Self {
            rows: groups.into_values().collect(),
        }
    }

    /// `(min, max)` of `f q / |E|^3` over every regime-a cell.
    pub fn regime_a_band(&self) -> Option<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.regime == Regime::A)
            .map(|r| r.ratio_cubic)
            .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:>5} {:>4} {:>6} {:>6}  {:>25}  {:>25}",
            "q", "dim", "regime", "cells", "f*q/|E|^3 [min, max]", "f/(|E| q^d) [min, max]"
        )
        .unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{:>5} {:>4} {:>6} {:>6}  [{:>10.4}, {:>10.4}]  [{:>10.4}, {:>10.4}]",
                r.q,
                r.dim,
                r.regime.to_string(),
                r.cells,
                r.ratio_cubic.0,
                r.ratio_cubic.1,
                r.ratio_linear.0,
                r.ratio_linear.1
            )
            .unwrap();
        }
        if let Some((lo, hi)) = self.regime_a_band() {
            writeln!(s, "regime a band for f*q/|E|^3: [{lo:.4}, {hi:.4}]").unwrap();
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<Record>,
    pub summary: SweepSummary,
    pub failed_cells: usize,
    pub config_digest: String,
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutcome, SweepError> {
    config.validate()?;
    let digest = config.digest();
    let seeds = config.seeds.values();
    let schedules: Vec<Vec<(String, Resolver)>> = config
        .generators
        .iter()
        .map(GeneratorEntry::schedule)
        .collect::<Result<_, _>>()?;

    let instances: Vec<((u64, usize), Result<Instance, String>)> = config
        .instances()?
        .into_par_iter()
        .map(|(p, dim)| ((p, dim), Instance::build(p, dim, config, &digest)))
        .collect();

    let mut jobs = Vec::new();
    for ((p, dim), inst) in &instances {
        for (gi, schedule) in schedules.iter().enumerate() {
            for (si, (size_expr, resolver)) in schedule.iter().enumerate() {
                for &seed in &seeds {
                    let key = CellKey {
                        p: *p,
                        dim: *dim,
                        generator: gi,
                        size: si,
                        seed,
                    };
                    jobs.push((key, inst, &config.generators[gi].spec, size_expr, resolver));
                }
            }
        }
    }

    let mut results: Vec<(CellKey, Record, bool)> = jobs
        .into_par_iter()
        .map(|(key, inst, label, size_expr, resolver)| match inst {
            Ok(inst) => {
                let spec = resolver.resolve(inst.field.modulus(), inst.dim);
                let (rec, ok) = run_cell(inst, &key, label, size_expr, &spec, config, &digest);
                (key, rec, ok)
            }
            Err(e) => {
                let rec = Record::new()
                    .with("record_type", "cell")
                    .with("status", "error")
                    .with("q", key.p)
                    .with("dim", key.dim)
                    .with("generator", label.as_str())
                    .with("size_expr", size_expr.as_str())
                    .with("seed", key.seed)
                    .with("error", e.as_str())
                    .with("config_digest", digest.as_str())
                    .with("tool_version", TOOL_VERSION);
                (key, rec, false)
            }
        })
        .collect();
    results.sort_by(|a, b| a.0.cmp(&b.0));

    let failed_cells = results.iter().filter(|(_, _, ok)| !ok).count();
    let records: Vec<Record> = results.into_iter().map(|(_, r, _)| r).collect();
    let summary = SweepSummary::from_records(&records);
    Ok(SweepOutcome {
        records,
        summary,
        failed_cells,
        config_digest: digest,
    })
}
