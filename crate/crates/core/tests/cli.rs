use std::fs;
use std::process::{Command, Output};

fn fqlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fqlab"))
        .args(args)
        .env_remove("FQLAB_JOBS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_spectrum_g3() {
    let o = fqlab(&["verify", "--q", "3", "--dim", "2", "--checks", "spectrum"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("λ = 2.0 ≤ 3.4641"), "{}", stdout(&o));
}

#[test]
fn verify_rejects_composite_and_1mod4() {
    let o = fqlab(&["verify", "--q", "4", "--dim", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not an odd prime"));
    let o = fqlab(&["verify", "--q", "9", "--dim", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not prime"));
    let o = fqlab(&["verify", "--q", "13", "--dim", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1 mod 4"), "{}", stderr(&o));
    let o = fqlab(&[
        "verify",
        "--q",
        "13",
        "--dim",
        "2",
        "--allow-1mod4",
        "--checks",
        "hinge",
        "--trials",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn bad_arguments_exit_two() {
    assert_eq!(
        fqlab(&["verify", "--q", "7", "--checks", "bogus"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fqlab(&["verify", "--q", "7", "--a", "7"]).status.code(),
        Some(2)
    );
    assert_eq!(fqlab(&["fcount", "--q", "7"]).status.code(), Some(2));
    assert_eq!(
        fqlab(&["fcount", "--q", "3", "--gen", "random(10)"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fqlab(&["--jobs", "0", "sphere", "--q", "3"]).status.code(),
        Some(2)
    );
}

#[test]
fn guardrails_and_force() {
    let o = fqlab(&["spectrum", "--q", "1019", "--dim", "2", "--a", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--force"), "{}", stderr(&o));
    let o = fqlab(&["fcount", "--q", "103", "--dim", "2", "--gen", "all"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fcount_full_plane_line() {
    let o = fqlab(&["fcount", "--q", "3", "--gen", "all"]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o);
    assert!(line.contains("\"f_value\":288,"), "{line}");
    assert!(line.contains("\"lower_bound\":\"288/1\""), "{line}");
    assert!(line.contains("\"upper_exact\":648,"), "{line}");
}

#[test]
fn fcount_points_file_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("three.txt");
    fs::write(&pts, "# three points\n0,0\n0,1\n1,0\n").unwrap();
    let o = fqlab(&[
        "fcount",
        "--q",
        "3",
        "--points",
        pts.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let get = |k: &str| {
        row.get(headers.iter().position(|h| h == k).unwrap())
            .unwrap()
            .to_string()
    };
    assert_eq!(get("f_value"), "8");
    assert_eq!(get("delta_implied"), "3/2");
    assert_eq!(get("distance_count"), "2");
}

#[test]
fn sphere_table_and_listing() {
    let o = fqlab(&["sphere", "--q", "3", "--dim", "3", "--format", "csv"]);
    assert_eq!(stdout(&o), "q,dim,a,size\n3,3,0,9\n3,3,1,6\n3,3,2,12\n");
    let o = fqlab(&["sphere", "--q", "7", "--dim", "2", "--points", "3"]);
    assert_eq!(
        stdout(&o).lines().filter(|l| !l.starts_with('#')).count(),
        8
    );
}

#[test]
fn sweep_is_byte_reproducible_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(
        &cfg,
        "primes = [3, 7, 11]\ndims = [2]\nseeds = { start = 0, count = 5 }\n\n\
         [[generators]]\nspec = \"random\"\nsizes = [\"q\", \"q^1.5\", \"0.5*q^2\"]\n",
    )
    .unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let o = fqlab(&[
        "--jobs",
        "1",
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("regime"), "summary table missing");
    let o = fqlab(&[
        "--jobs",
        "4",
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (ra, rb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ra, rb);
    let text = String::from_utf8(ra).unwrap();
    assert_eq!(text.lines().count(), 45);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["status"], "ok");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.jsonl.meta.json")).unwrap())
            .unwrap();
    assert!(meta["timestamp_unix"].as_u64().unwrap() > 0);
}

#[test]
fn sweep_bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(
        &cfg,
        "primes = [3]\ndims = [2]\nseeds = [0]\ngenerators = []\n",
    )
    .unwrap();
    let o = fqlab(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("generators"));
    fs::write(
        &cfg,
        "primes = [3]\ndims = [2]\nseeds = [0]\nbogus = 1\n[[generators]]\nspec = \"all\"\n",
    )
    .unwrap();
    assert_eq!(
        fqlab(&["sweep", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn failing_cell_exits_one_with_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("over.toml");
    fs::write(
        &cfg,
        "primes = [3]\ndims = [2]\nseeds = [0]\nchecks = [\"main\"]\n\
         [[generators]]\nspec = \"random(10)\"\n[[generators]]\nspec = \"all\"\n",
    )
    .unwrap();
    let out = dir.path().join("r.jsonl");
    let o = fqlab(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let text = fs::read_to_string(&out).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["status"], "error");
    assert!(first["replay"]
        .as_str()
        .unwrap()
        .starts_with("fqlab verify --q 3 --dim 2 --gen 'random(10)'"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn verify_generated_set_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.jsonl");
    let o = fqlab(&[
        "verify",
        "--q",
        "7",
        "--dim",
        "2",
        "--gen",
        "box(4)",
        "--gen-seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    // 6 spectrum records, 6 graph records, 1 distance record.
    assert_eq!(text.lines().count(), 13);
    assert!(text.lines().all(|l| l.contains("\"status\":\"ok\"")));
}
