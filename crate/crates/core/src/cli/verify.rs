//! Check batteries on `G_q(a)` for one `(q, dim)`.
//!
//! Each trial draws three vertex sets `B`, `C`, `E` with sizes uniform in
//! `1..=n` from a seed derived from `(seed, trial)`, so any single trial can be
//! replayed by rerunning the same command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bounds::{check_main_theorem, guard_pairs};
use crate::euclid::{ramanujan_bound, EuclidGraph, SpectralSummary};
use crate::field::{make_field, PrimeField};
use crate::geometry::{generate_point_set, sample_ranks, GeneratorSpec, Point, PointSet};
use crate::limits::{space_size, Limits};
use crate::spectral::{
    hinge_check, inner_degree_check, mixing_check, variance_check, RegularGraphView, VertexSet,
};

use super::record::{format_real, report_fields, Record, REPORT_FIELDS};
use super::sweep::{derive_seed, Check, TOOL_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Builds `F_q`, refusing `q = 1 (mod 4)` unless explicitly allowed.
pub fn open_field(q: u64, allow_1mod4: bool) -> Result<PrimeField, UsageError> {
    let field = make_field(q).map_err(|e| UsageError(e.to_string()))?;
    if !field.hypothesis_holds() && !allow_1mod4 {
        return Err(UsageError(format!(
            "q = {q} is 1 mod 4, so -1 is a square in F_{q} and the distance bounds \
             do not apply; pass --allow-1mod4 to run anyway"
        )));
    }
    Ok(field)
}

/// Four decimals, trailing zeros dropped down to one.
pub fn format_short(x: f64) -> String {
    let s = format!("{x:.4}");
    let t = s.trim_end_matches('0');
    if t.ends_with('.') {
        format!("{t}0")
    } else {
        t.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyArgs {
    pub q: u64,
    pub dim: usize,
    pub a: Option<u64>,
    pub checks: Vec<Check>,
    pub trials: usize,
    pub seed: u64,
    /// Random frequencies for the eigenvector check.
    pub samples: usize,
    /// Check one generated set instead of random trials.
    pub generator: Option<(GeneratorSpec, u64)>,
    pub allow_1mod4: bool,
    pub force: bool,
}

impl VerifyArgs {
    pub fn new(q: u64, dim: usize) -> Self {
        Self {
            q,
            dim,
            a: None,
            checks: Check::ALL.to_vec(),
            trials: 50,
            seed: 0,
            samples: 4,
            generator: None,
            allow_1mod4: false,
            force: false,
        }
    }

    fn has(&self, c: Check) -> bool {
        self.checks.contains(&c)
    }

    fn needs_sets(&self) -> bool {
        self.checks.iter().any(|c| *c != Check::Spectrum)
    }
}

pub const VERIFY_FIELDS: &[&str] = &[
    "record_type",
    "status",
    "q",
    "dim",
    "a",
    "seed",
    "trial",
    "trial_seed",
    "generator",
    "valency",
    "second_eigenvalue",
    "ramanujan_bound",
    "trace1_residual",
    "trace2_residual",
    "eigvec_residual",
    "b_size",
    "c_size",
    "e_size",
    "variance_lhs",
    "variance_rhs",
    "variance_ok",
    "mixing_deviation",
    "mixing_bound",
    "mixing_ok",
    "hinge_p2",
    "hinge_bound",
    "hinge_ok",
    "inner_degree_sum",
    "inner_degree_bound",
    "inner_degree_ok",
    "ceiling_ok",
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
    "error",
    "tool_version",
];

#[derive(Debug, Clone, Default)]
pub struct VerifyOutcome {
    pub records: Vec<Record>,
    pub summary: Vec<String>,
    pub failures: usize,
}

struct Trial {
    index: usize,
    seed: u64,
    b: VertexSet,
    c: VertexSet,
    e: VertexSet,
}

fn random_set(n: u64, rng: &mut ChaCha8Rng) -> VertexSet {
    let size = rng.random_range(1..=n);
    let ranks = sample_ranks(n, size, rng).expect("size within 1..=n");
    VertexSet::new(n, ranks).expect("ranks below n")
}

fn trial(n: u64, seed: u64, index: usize) -> Trial {
    let seed = derive_seed(&seed.to_string(), &format!("trial|{index}"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = random_set(n, &mut rng);
    let c = random_set(n, &mut rng);
    let e = random_set(n, &mut rng);
    Trial {
        index,
        seed,
        b,
        c,
        e,
    }
}

fn set_from_ranks(field: &PrimeField, dim: usize, set: &VertexSet) -> PointSet {
    let p = field.modulus();
    let pts = set
        .members()
        .iter()
        .map(|&r| Point::from_rank(r, p, dim))
        .collect();
    PointSet::new(dim, pts, "trial").expect("distinct ranks")
}

fn usage(e: impl ToString) -> UsageError {
    UsageError(e.to_string())
}

pub fn run_verify(args: &VerifyArgs) -> Result<VerifyOutcome, UsageError> {
    let field = open_field(args.q, args.allow_1mod4)?;
    let q = field.modulus();
    let dim = args.dim;
    if dim < 2 {
        return Err(UsageError(format!("--dim must be at least 2, got {dim}")));
    }
    if args.checks.is_empty() {
        return Err(UsageError("--checks selects nothing".to_string()));
    }
    if args.needs_sets() && args.generator.is_none() && args.trials == 0 {
        return Err(UsageError("--trials must be positive".to_string()));
    }
    let limits = Limits::with_force(args.force);
    let n = space_size(q, dim).ok_or_else(|| usage("q^dim overflows"))?;
    let radii: Vec<_> = match args.a {
        Some(a) => {
            let fe = field.try_elem(a).filter(|x| !x.is_zero()).ok_or_else(|| {
                UsageError(format!("--a must be a nonzero residue below {q}, got {a}"))
            })?;
            vec![fe]
        }
        None => field.nonzero_elements().collect(),
    };
    let all_graphs = args.has(Check::Main) || args.has(Check::Remark);
    let graph_radii: Vec<_> = if all_graphs {
        field.nonzero_elements().collect()
    } else {
        radii.clone()
    };
    let mut graphs = Vec::new();
    let mut spectra: Vec<SpectralSummary> = Vec::new();
    for &a in &graph_radii {
        let g = EuclidGraph::new(field.clone(), dim, a, &limits).map_err(usage)?;
        spectra.push(g.spectrum(&limits).map_err(usage)?);
        graphs.push(g);
    }
    let checked: Vec<usize> = graph_radii
        .iter()
        .enumerate()
        .filter(|(_, a)| radii.contains(a))
        .map(|(i, _)| i)
        .collect();

    let mut out = VerifyOutcome::default();
    let bound = ramanujan_bound(q, dim);
    let base = || {
        Record::new()
            .with("q", q)
            .with("dim", dim)
            .with("seed", args.seed)
            .with("tool_version", TOOL_VERSION)
    };

    if args.has(Check::Spectrum) {
        for &i in &checked {
            let (g, s) = (&graphs[i], &spectra[i]);
            let a = g.radius().value();
            let mut rec = base()
                .with("record_type", "spectrum")
                .with("a", a)
                .with("valency", g.valency())
                .with("second_eigenvalue", s.second_eigenvalue)
                .with("ramanujan_bound", bound);
            let spectrum_seed = derive_seed(&args.seed.to_string(), &format!("spectrum|{a}"));
            let mut ok = s.within_ramanujan_bound();
            match g.verify_spectrum(s, args.samples, spectrum_seed) {
                Ok(d) => {
                    rec.set("trace1_residual", d.trace1_residual)
                        .set("trace2_residual", d.trace2_residual)
                        .set("eigvec_residual", d.max_eigvec_residual);
                }
                Err(e) => {
                    ok = false;
                    rec.set("error", e.to_string());
                }
            }
            let rel = if ok { "≤" } else { ">" };
            out.summary.push(format!(
                "a = {a}: k = {}, λ = {} {rel} {} ({})",
                g.valency(),
                format_short(s.second_eigenvalue),
                format_short(bound),
                if ok { "ok" } else { "FAIL" }
            ));
            rec.set("status", if ok { "ok" } else { "violation" });
            out.failures += usize::from(!ok);
            out.records.push(rec);
        }
    }

    if !args.needs_sets() {
        return Ok(out);
    }

    let trials: Vec<Trial> = match &args.generator {
        Some((spec, gen_seed)) => {
            let set = generate_point_set(&field, dim, spec, *gen_seed, &limits).map_err(usage)?;
            let vs = VertexSet::new(n, set.ranks(q)).map_err(usage)?;
            vec![Trial {
                index: 0,
                seed: *gen_seed,
                b: vs.clone(),
                c: vs.clone(),
                e: vs,
            }]
        }
        None => (0..args.trials).map(|t| trial(n, args.seed, t)).collect(),
    };
    let label = args.generator.as_ref().map(|(s, _)| s.to_string());

    let graph_checks = [Check::Variance, Check::Mixing, Check::Hinge]
        .iter()
        .any(|&c| args.has(c));
    let mut graph_failures = 0usize;
    let mut graph_runs = 0usize;
    if graph_checks {
        for t in &trials {
            for &i in &checked {
                let (g, s) = (&graphs[i], &spectra[i]);
                let mut rec = base()
                    .with("record_type", "graph")
                    .with("a", g.radius().value())
                    .with("trial", t.index)
                    .with("trial_seed", t.seed)
                    .with("generator", label.clone())
                    .with("valency", g.valency())
                    .with("second_eigenvalue", s.second_eigenvalue)
                    .with("ramanujan_bound", bound)
                    .with("b_size", t.b.len())
                    .with("c_size", t.c.len())
                    .with("e_size", t.e.len());
                let mut ok = true;
                let mut ceiling_ok = true;
                for (lambda, exact) in [(s.second_eigenvalue, true), (bound, false)] {
                    let view = RegularGraphView::new(g, lambda);
                    if args.has(Check::Variance) {
                        let v = variance_check(&view, &t.b).map_err(usage)?;
                        if exact {
                            rec.set("variance_lhs", v.lhs)
                                .set("variance_rhs", v.rhs)
                                .set("variance_ok", v.holds);
                            ok &= v.holds;
                        } else {
                            ceiling_ok &= v.holds;
                        }
                    }
                    if args.has(Check::Mixing) {
                        let m = mixing_check(&view, &t.b, &t.c).map_err(usage)?;
                        if exact {
                            rec.set("mixing_deviation", m.deviation)
                                .set("mixing_bound", m.bound)
                                .set("mixing_ok", m.holds);
                            ok &= m.holds;
                        } else {
                            ceiling_ok &= m.holds;
                        }
                    }
                    if args.has(Check::Hinge) {
                        let h = hinge_check(&view, &t.e).map_err(usage)?;
                        let d = inner_degree_check(&view, &t.e).map_err(usage)?;
                        if exact {
                            rec.set("hinge_p2", h.p2)
                                .set("hinge_bound", h.bound)
                                .set("hinge_ok", h.holds)
                                .set("inner_degree_sum", d.degree_sum)
                                .set("inner_degree_bound", d.bound)
                                .set("inner_degree_ok", d.holds);
                            ok &= h.holds && d.holds;
                        } else {
                            ceiling_ok &= h.holds && d.holds;
                        }
                    }
                }
                rec.set("ceiling_ok", ceiling_ok);
                ok &= ceiling_ok;
                rec.set("status", if ok { "ok" } else { "violation" });
                graph_runs += 1;
                graph_failures += usize::from(!ok);
                out.records.push(rec);
            }
        }
        let names: Vec<&str> = [Check::Variance, Check::Mixing, Check::Hinge]
            .into_iter()
            .filter(|&c| args.has(c))
            .map(Check::name)
            .collect();
        out.summary.push(format!(
            "{}: {} of {graph_runs} (radius, trial) runs hold with exact λ and with the ceiling {}",
            names.join(", "),
            graph_runs - graph_failures,
            format_short(bound)
        ));
        out.failures += graph_failures;
    }

    if all_graphs {
        let mut main_failures = 0usize;
        for t in &trials {
            let set = set_from_ranks(&field, dim, &t.e);
            let mut rec = base()
                .with("record_type", "main")
                .with("trial", t.index)
                .with("trial_seed", t.seed)
                .with("generator", label.clone());
            let ok = match guard_pairs(set.len(), &limits)
                .and_then(|_| check_main_theorem(&field, dim, &set, &spectra))
            {
                Ok(report) => {
                    report_fields(&mut rec, &report);
                    let mut ok = true;
                    if args.has(Check::Main) {
                        ok &= report.verdicts.lower
                            && report.verdicts.upper
                            && report.verdicts.asymptotic;
                    }
                    if args.has(Check::Remark) {
                        ok &= report.verdicts.remark;
                    }
                    ok
                }
                Err(e) => {
                    rec.set("error", e.to_string());
                    false
                }
            };
            rec.set("status", if ok { "ok" } else { "violation" });
            main_failures += usize::from(!ok);
            out.records.push(rec);
        }
        let names: Vec<&str> = [Check::Main, Check::Remark]
            .into_iter()
            .filter(|&c| args.has(c))
            .map(Check::name)
            .collect();
        out.summary.push(format!(
            "{}: {} of {} sets satisfy the distance-statistic bounds",
            names.join(", "),
            trials.len() - main_failures,
            trials.len()
        ));
        out.failures += main_failures;
    }

    debug_assert!(REPORT_FIELDS.iter().all(|k| VERIFY_FIELDS.contains(k)));
    Ok(out)
}

/// One line per failing record, naming the command that replays it.
pub fn replay_hints(args: &VerifyArgs, outcome: &VerifyOutcome) -> Vec<String> {
    outcome
        .records
        .iter()
        .filter(|r| r.get("status") != Some(&"ok".into()))
        .map(|r| {
            let field = |k: &str| {
                r.get(k).map(|v| match v {
                    super::record::Value::Int(i) => i.to_string(),
                    super::record::Value::Str(s) => s.clone(),
                    super::record::Value::Real(x) => format_real(*x).unwrap_or_default(),
                    other => format!("{other:?}"),
                })
            };
            let mut cmd = format!("fqlab verify --q {} --dim {}", args.q, args.dim);
            if let Some(a) = field("a") {
                cmd.push_str(&format!(" --a {a}"));
            }
            cmd.push_str(&format!(" --seed {} --trials {}", args.seed, args.trials));
            if let Some((spec, s)) = &args.generator {
                cmd.push_str(&format!(" --gen '{spec}' --gen-seed {s}"));
            }
            format!(
                "{} failed (trial {}): replay with `{cmd}`",
                field("record_type").unwrap_or_default(),
                field("trial").unwrap_or_else(|| "-".to_string())
            )
        })
        .collect()
}
