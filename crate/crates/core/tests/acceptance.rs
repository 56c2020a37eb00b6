//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::BTreeMap;
use std::process::ExitCode;

use fqlab::bounds::{check_main_theorem, degree_profile};
use fqlab::cli::record::{emit, Format, Value};
use fqlab::cli::sweep::{run_sweep, Check, SweepConfig, SweepOutcome, SWEEP_FIELDS};
use fqlab::cli::verify::{run_verify, VerifyArgs};
use fqlab::euclid::{ramanujan_bound, EuclidGraph, SpectralSummary};
use fqlab::geometry::{generate_point_set, sphere_points, sphere_table, GeneratorSpec};
use fqlab::spectral::{hinge_count, hinge_count_oracle, RegularGraphView, VertexSet};
use fqlab::{make_field, Limits, Point, PointSet, PrimeField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every graph instance the spectral criteria range over.
const INSTANCES: &[(u64, usize)] = &[(3, 2), (7, 2), (11, 2), (19, 2), (3, 3), (7, 3)];

struct Outcome {
    ok: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome {
        ok: true,
        detail: detail.into(),
    }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome {
        ok: false,
        detail: detail.into(),
    }
}

fn coords(rank: u64, p: u64, dim: usize) -> Vec<u64> {
    let mut r = rank;
    (0..dim)
        .map(|_| {
            let c = r % p;
            r /= p;
            c
        })
        .collect()
}

/// `sum (x_i - y_i)^2 mod p` on plain integers.
fn dist_oracle(x: &[u64], y: &[u64], p: u64) -> u64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = (a + p - b) % p;
            d * d
        })
        .sum::<u64>()
        % p
}

fn spectra(field: &PrimeField, dim: usize) -> Vec<(EuclidGraph, SpectralSummary)> {
    let limits = Limits::default();
    field
        .nonzero_elements()
        .map(|a| {
            let g = EuclidGraph::new(field.clone(), dim, a, &limits).unwrap();
            let s = g.spectrum(&limits).unwrap();
            (g, s)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut cases: Vec<(u64, usize, Vec<u128>)> = [3u64, 7, 11, 19]
        .iter()
        .map(|&p| {
            let mut k = vec![p as u128 + 1; p as usize];
            k[0] = 1;
            (p, 2, k)
        })
        .collect();
    cases.push((3, 3, vec![9, 6, 12]));
    for (p, dim, expected) in cases {
        let field = make_field(p).unwrap();
        let n = p.pow(dim as u32);
        let mut counted = vec![0u128; p as usize];
        let zero = vec![0; dim];
        for r in 0..n {
            counted[dist_oracle(&coords(r, p, dim), &zero, p) as usize] += 1;
        }
        let table = sphere_table(&field, dim);
        let computed: Vec<u128> = field.elements().map(|a| table.size(a)).collect();
        let listed: Vec<u128> = field
            .elements()
            .map(|a| {
                sphere_points(&field, dim, a, &Limits::default())
                    .unwrap()
                    .len() as u128
            })
            .collect();
        if counted != expected || computed != expected || listed != expected {
            return fail(format!(
                "p={p} dim={dim}: expected {expected:?}, enumeration {counted:?}, table {computed:?}, listing {listed:?}"
            ));
        }
    }
    pass("k_0 = 1, k_a = p+1 for p in {3,7,11,19}; k = [9, 6, 12] for F_3^3")
}

fn criterion_2() -> Outcome {
    let field = make_field(3).unwrap();
    let (_, s) = &spectra(&field, 2)[0];
    let mut got = s.values.clone();
    got.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let want = [4.0, 1.0, 1.0, 1.0, 1.0, -2.0, -2.0, -2.0, -2.0];
    let worst = got
        .iter()
        .zip(want)
        .map(|(g, w)| (g - w).abs())
        .fold(0.0, f64::max);
    if got.len() != want.len() || worst > 1e-9 {
        return fail(format!("G_3(1) spectrum {got:?}"));
    }
    let mut max_trace = 0.0f64;
    let mut max_eig = 0.0f64;
    let mut graphs = 0;
    for &(p, dim) in INSTANCES {
        let field = make_field(p).unwrap();
        for (g, s) in spectra(&field, dim) {
            let nk = s.n as f64 * s.valency as f64;
            let t1: f64 = s.values.iter().sum();
            let t2: f64 = s.values.iter().map(|v| v * v).sum();
            let rel = (t1.abs() / nk).max((t2 - nk).abs() / nk);
            max_trace = max_trace.max(rel);
            if rel > 1e-6 {
                return fail(format!(
                    "p={p} dim={dim} a={}: trace residual {rel:e}",
                    g.radius().value()
                ));
            }
            match g.verify_spectrum(&s, 4, p * 1000 + g.radius().value() as u64) {
                Ok(d) => max_eig = max_eig.max(d.max_eigvec_residual / s.valency as f64),
                Err(e) => return fail(format!("p={p} dim={dim} a={}: {e}", g.radius().value())),
            }
            graphs += 1;
        }
    }
    pass(format!(
        "G_3(1) = {{4 x1, 1 x4, -2 x4}} (max error {worst:.1e}); {graphs} graphs, max relative trace residual {max_trace:.1e}, max eigenvector residual / k {max_eig:.1e}"
    ))
}

fn criterion_3() -> Outcome {
    let mut worst_ratio = 0.0f64;
    for &(p, dim) in INSTANCES {
        let field = make_field(p).unwrap();
        let bound = 2.0 * (p as f64).powf((dim as f64 - 1.0) / 2.0);
        if (bound - ramanujan_bound(p as u32, dim)).abs() > 1e-12 {
            return fail(format!("bound mismatch at p={p} dim={dim}"));
        }
        for (g, s) in spectra(&field, dim) {
            if s.second_eigenvalue > bound + 1e-9 {
                return fail(format!(
                    "p={p} dim={dim} a={}: second eigenvalue {} > {bound}",
                    g.radius().value(),
                    s.second_eigenvalue
                ));
            }
            worst_ratio = worst_ratio.max(s.second_eigenvalue / bound);
        }
    }
    pass(format!(
        "every second eigenvalue within 2 p^((d-1)/2); max ratio {worst_ratio:.4}"
    ))
}

fn criterion_4() -> Outcome {
    let mut runs = 0usize;
    let mut sizes = (u64::MAX, 0u64);
    for &(p, dim) in INSTANCES {
        let mut args = VerifyArgs::new(p, dim);
        args.checks = vec![Check::Variance, Check::Mixing, Check::Hinge];
        args.trials = 50;
        args.seed = 2024 + p;
        let out = match run_verify(&args) {
            Ok(o) => o,
            Err(e) => return fail(format!("p={p} dim={dim}: {e}")),
        };
        if out.failures > 0 {
            return fail(format!("p={p} dim={dim}: {} failed runs", out.failures));
        }
        for r in &out.records {
            for key in ["b_size", "c_size", "e_size"] {
                if let Some(Value::Int(s)) = r.get(key) {
                    sizes = (sizes.0.min(*s as u64), sizes.1.max(*s as u64));
                }
            }
            let all_set = [
                "variance_ok",
                "mixing_ok",
                "hinge_ok",
                "inner_degree_ok",
                "ceiling_ok",
            ]
            .iter()
            .all(|k| r.get(k) == Some(&Value::Bool(true)));
            if !all_set {
                return fail(format!("p={p} dim={dim}: incomplete record {r:?}"));
            }
        }
        runs += out.records.len();
    }
    pass(format!(
        "{runs} (radius, trial) runs over 50 trials per instance, set sizes {}..{}: variance, mixing, hinge and inner-degree hold with exact lambda and the ceiling",
        sizes.0, sizes.1
    ))
}

fn random_set(field: &PrimeField, dim: usize, size: u64, rng: &mut ChaCha8Rng) -> PointSet {
    let seed = rng.random();
    generate_point_set(
        field,
        dim,
        &GeneratorSpec::Random(size),
        seed,
        &Limits::default(),
    )
    .unwrap()
}

/// Ordered triples `(x, y, z)` with `||x - y|| = ||y - z|| != 0`.
fn f_by_triples(set: &PointSet, p: u64) -> u128 {
    let pts: Vec<Vec<u64>> = set
        .points()
        .iter()
        .map(|x| x.coords().iter().map(|c| c.value() as u64).collect())
        .collect();
    let mut f = 0u128;
    for x in &pts {
        for y in &pts {
            let r = dist_oracle(x, y, p);
            if r == 0 {
                continue;
            }
            f += pts.iter().filter(|z| dist_oracle(y, z, p) == r).count() as u128;
        }
    }
    f
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let hinge_instances: &[(u64, usize)] = &[(11, 2), (19, 2), (7, 3)];
    let mut hinge_cases = 0;
    for &(p, dim) in hinge_instances {
        let field = make_field(p).unwrap();
        let gs = spectra(&field, dim);
        let n = p.pow(dim as u32);
        for _ in 0..100 {
            let (g, s) = &gs[rng.random_range(0..gs.len())];
            let view = RegularGraphView::new(g, s.second_eigenvalue);
            let set = random_set(&field, dim, rng.random_range(1..=60), &mut rng);
            let vs = VertexSet::new(n, set.ranks(p as u32)).unwrap();
            let fast = hinge_count(&view, &vs).unwrap();
            let slow = hinge_count_oracle(&view, &vs).unwrap();
            if fast != slow {
                return fail(format!(
                    "p={p} dim={dim}: hinge {fast:?} vs oracle {slow:?}"
                ));
            }
            hinge_cases += 1;
        }
    }
    let mut f_cases = 0;
    for &(p, dim) in &[(7u64, 2usize), (11, 2), (3, 3), (7, 3)] {
        let field = make_field(p).unwrap();
        let gs = spectra(&field, dim);
        let n = p.pow(dim as u32);
        for _ in 0..25 {
            let size = rng.random_range(1..=40.min(n));
            let set = random_set(&field, dim, size, &mut rng);
            let via_profile = degree_profile(&field, &set).f_value();
            let vs = VertexSet::new(n, set.ranks(p as u32)).unwrap();
            let via_hinges: u128 = gs
                .iter()
                .map(|(g, s)| {
                    hinge_count(&RegularGraphView::new(g, s.second_eigenvalue), &vs)
                        .unwrap()
                        .p2
                })
                .sum();
            let via_triples = f_by_triples(&set, p);
            if via_profile != via_hinges || via_profile != via_triples {
                return fail(format!(
                    "p={p} dim={dim} |E|={size}: profile {via_profile}, hinges {via_hinges}, triples {via_triples}"
                ));
            }
            f_cases += 1;
        }
    }
    pass(format!(
        "{hinge_cases} hinge counts match the triple loop (|E| <= 60); {f_cases} sets agree on f across profile, per-radius hinges and triples (|E| <= 40)"
    ))
}

fn flag(r: &fqlab::cli::record::Record, key: &str) -> bool {
    r.get(key) == Some(&Value::Bool(true))
}

fn anchors() -> Result<(), String> {
    let field = make_field(3).unwrap();
    let sp: Vec<SpectralSummary> = spectra(&field, 2).into_iter().map(|(_, s)| s).collect();
    let all = generate_point_set(&field, 2, &GeneratorSpec::All, 0, &Limits::default()).unwrap();
    let r = check_main_theorem(&field, 2, &all, &sp).map_err(|e| e.to_string())?;
    if r.f_value != 288
        || r.lower_bound != fqlab::bounds::Rational::from_integer(288)
        || (r.upper_exact - 648.0).abs() > 1e-9
    {
        return Err(format!(
            "F_3^2: f {}, lower {}, upper {}",
            r.f_value, r.lower_bound, r.upper_exact
        ));
    }
    Ok(())
}

fn criterion_6(sweep: &SweepOutcome) -> Outcome {
    if let Err(e) = anchors() {
        return fail(e);
    }
    let bad: Vec<_> = sweep
        .records
        .iter()
        .filter(|r| !(flag(r, "lower_ok") && flag(r, "upper_ok") && flag(r, "asymptotic_ok")))
        .collect();
    if !bad.is_empty() || sweep.records.len() != 210 {
        return fail(format!(
            "{} of {} cells violate the sandwich",
            bad.len(),
            sweep.records.len()
        ));
    }
    pass(format!(
        "lower <= f <= upper_exact <= upper_asymptotic on all {} default-sweep cells; F_3^2 gives f = 288 = lower, upper_exact = 648",
        sweep.records.len()
    ))
}

fn criterion_7(sweep: &SweepOutcome) -> Outcome {
    let field = make_field(3).unwrap();
    let sp: Vec<SpectralSummary> = spectra(&field, 2).into_iter().map(|(_, s)| s).collect();
    let pts = [[0, 0], [0, 1], [1, 0]]
        .iter()
        .map(|c| Point::from_ints(&field, c))
        .collect();
    let three = PointSet::new(2, pts, "three").unwrap();
    let r = check_main_theorem(&field, 2, &three, &sp).unwrap();
    if r.delta_implied != fqlab::bounds::Rational::new(3, 2) || r.distance_count() != 2 {
        return fail(format!(
            "three-point anchor: delta_implied {}, |Delta| {}",
            r.delta_implied,
            r.distance_count()
        ));
    }
    let bad = sweep
        .records
        .iter()
        .filter(|r| !flag(r, "remark_ok"))
        .count();
    if bad > 0 {
        return fail(format!(
            "{bad} cells have delta_implied > |Delta(E) \\ {{0}}|"
        ));
    }
    pass(format!(
        "delta_implied <= |Delta(E) \\ {{0}}| on all {} cells; three-point set gives 3/2 <= 2",
        sweep.records.len()
    ))
}

fn criterion_8(sweep: &SweepOutcome) -> Outcome {
    let table = sweep.summary.render();
    let Some((lo, hi)) = sweep.summary.regime_a_band() else {
        return fail("no regime-a cells in the default sweep");
    };
    let mut per_regime: BTreeMap<String, usize> = BTreeMap::new();
    for r in &sweep.records {
        if let Some(Value::Str(reg)) = r.get("regime") {
            *per_regime.entry(reg.clone()).or_default() += 1;
            if reg == "a"
                && !(flag(r, "lower_ok") && flag(r, "upper_ok") && flag(r, "asymptotic_ok"))
            {
                return fail("a regime-a cell violates the sandwich");
            }
        }
    }
    if table.lines().count() < 2 || !lo.is_finite() || !hi.is_finite() || lo <= 0.0 {
        return fail(format!("summary table malformed:\n{table}"));
    }
    print!("{table}");
    pass(format!(
        "f q / |E|^3 over {} regime-a cells lies in [{lo:.4}, {hi:.4}] ({} regime-b cells); summary emitted above",
        per_regime.get("a").copied().unwrap_or(0),
        per_regime.get("b").copied().unwrap_or(0)
    ))
}

fn criterion_9(first: &[u8]) -> Outcome {
    // Rerun on a single worker so a scheduling difference would show.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let again = pool.install(|| run_sweep(&SweepConfig::default_sweep()).unwrap());
    let second = emit(SWEEP_FIELDS, &again.records, Format::Jsonl);
    if first != second.as_slice() {
        return fail("rerun of the default sweep produced different bytes");
    }
    pass(format!(
        "default sweep JSONL reproduced byte for byte ({} bytes, parallel vs one worker)",
        first.len()
    ))
}

fn main() -> ExitCode {
    let start = std::time::Instant::now();
    let sweep = run_sweep(&SweepConfig::default_sweep()).expect("default sweep runs");
    let bytes = emit(SWEEP_FIELDS, &sweep.records, Format::Jsonl);
    let results = [
        ("1 sphere counts", criterion_1()),
        ("2 spectrum and trace identities", criterion_2()),
        ("3 second-eigenvalue bound", criterion_3()),
        ("4 variance / mixing / hinge batteries", criterion_4()),
        ("5 oracle equivalence", criterion_5()),
        ("6 main-theorem sandwich", criterion_6(&sweep)),
        ("7 distance-set chain", criterion_7(&sweep)),
        ("8 regime ratios", criterion_8(&sweep)),
        ("9 determinism", criterion_9(&bytes)),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!(
            "[{}] criterion {name}: {}",
            if o.ok { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.ok);
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
