use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use haarpsi::harness::{read_scatter_csv, EvaluationReport, ScoreTable};
use haarpsi::maps::read_bounds;
use haarpsi::tuner::{tune_manifest, TuneCache, TuneConfig, TuneResult};
use haarpsi::{decode_image, haarpsi, DecodedImage, ImagePlane, MetricParams};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haarpsi"))
        .args(args)
        .env_remove("HAARPSI_JOBS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn texture(w: usize, h: usize, phase: f64) -> ImagePlane {
    ImagePlane::from_fn(w, h, |x, y| {
        let (x, y) = (x as f64, y as f64);
        127.5 + 60.0 * (0.4 * x + phase).sin() + 50.0 * (0.23 * y - 0.7 * phase).cos() + 15.0 * ((x * y) * 0.05).sin()
    })
}

fn save(dir: &Path, name: &str, plane: ImagePlane) -> PathBuf {
    let path = dir.join(name);
    DecodedImage::Gray(plane).save(&path).unwrap();
    path
}

/// `n` distorted versions of one texture split over two databases, with
/// opinion scores equal to the default grayscale metric.
fn scored_fixture(dir: &Path, n: usize) -> PathBuf {
    let reference = texture(40, 40, 0.0);
    let ref_path = save(dir, "ref.png", reference.clone());
    let ref_img = decode_image(&ref_path).unwrap();
    let mut rows = vec!["reference_path,distorted_path,mos,database,distortion".to_string()];
    for k in 0..n {
        let shifted = texture(40, 40, 0.15 * (k + 1) as f64);
        let mix = 0.96 * (k + 1) as f64 / n as f64;
        let img = ImagePlane::from_fn(40, 40, |x, y| (1.0 - mix) * reference.get(x, y) + mix * shifted.get(x, y));
        let name = format!("d{k}.png");
        let dist = save(dir, &name, img);
        let mos = haarpsi(&ref_img, &decode_image(&dist).unwrap(), &MetricParams::default(), false)
            .unwrap()
            .score;
        let db = if k % 2 == 0 { "even" } else { "odd" };
        let kind = if k < n / 2 { "low" } else { "high" };
        rows.push(format!("ref.png,{name},{mos:.17},{db},{kind}"));
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, rows.join("\n") + "\n").unwrap();
    path
}

#[test]
fn compare_identical_prints_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = save(dir.path(), "f.png", texture(32, 32, 0.3));
    let o = run(&["compare", s(&f), s(&f)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "1.000000\n");
    let o = run(&["compare", s(&f), s(&f), "--color"]);
    assert_eq!(stdout(&o), "1.000000\n");
}

#[test]
fn compare_rejects_bad_constants_as_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let f = save(dir.path(), "f.png", texture(16, 16, 0.0));
    for bad in [["--c", "0"], ["--alpha", "-1"], ["--c", "abc"], ["--wavelet", "nosuch"]] {
        let o = run(&["compare", s(&f), s(&f), bad[0], bad[1]]);
        assert_eq!(o.status.code(), Some(1), "{bad:?}");
    }
    assert_eq!(run(&["compare", s(&f)]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
}

#[test]
fn compare_json_reports_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let a = save(dir.path(), "a.png", texture(32, 32, 0.0));
    let b = save(dir.path(), "b.png", texture(32, 32, 0.5));
    let o = run(&["compare", s(&a), s(&b), "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["C"].as_f64(), Some(30.0));
    assert_eq!(v["alpha"].as_f64(), Some(4.2));
    let score = v["score"].as_f64().unwrap();
    assert!(score > 0.0 && score < 1.0);
    assert_eq!(v["degenerate_weights"].as_bool(), Some(false));
    let plain = run(&["compare", s(&a), s(&b)]);
    assert_eq!(stdout(&plain).trim(), format!("{score:.6}"));
}

#[test]
fn compare_data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let a = save(dir.path(), "a.png", texture(32, 32, 0.0));
    let b = save(dir.path(), "b.png", texture(32, 30, 0.0));
    let o = run(&["compare", s(&a), s(&b)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("32x32"), "{}", stderr(&o));
    let o = run(&["compare", s(&a), s(&dir.path().join("none.png"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_dumps_maps() {
    let dir = tempfile::tempdir().unwrap();
    let a = save(dir.path(), "a.png", texture(32, 24, 0.0));
    let b = save(dir.path(), "b.png", texture(32, 24, 0.4));
    let maps = dir.path().join("maps");
    let o = run(&["compare", s(&a), s(&b), "--color", "--dump-maps", s(&maps)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in ["hs1", "hs2", "hs3", "w1", "w2", "w3"] {
        let img = decode_image(maps.join(format!("{name}.png"))).unwrap();
        assert_eq!(img.dims(), (16, 12));
    }
    assert_eq!(read_bounds(maps.join("maps.txt")).unwrap().len(), 6);
}

#[test]
fn batch_writes_one_column_per_metric() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = scored_fixture(dir.path(), 8);
    let text = std::fs::read_to_string(&manifest).unwrap();
    let three: Vec<&str> = text.lines().take(4).collect();
    let small = dir.path().join("three.csv");
    std::fs::write(&small, three.join("\n")).unwrap();
    let out = dir.path().join("scores.csv");
    let o = run(&["batch", s(&small), "--metrics", "haarpsi,psnr", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = ScoreTable::read_csv(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(table.metrics, vec!["haarpsi", "psnr"]);
    assert_eq!(table.rows.len(), 3);
    assert!(table.rows.iter().all(|r| r.scores.len() == 2));
}

#[test]
fn batch_is_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = scored_fixture(dir.path(), 8);
    let one = dir.path().join("one.csv");
    let eight = dir.path().join("eight.csv");
    run(&["batch", s(&manifest), "--metrics", "haarpsi,haarpsic,psnr", "--jobs", "1", "--out", s(&one)]);
    let o = Command::new(env!("CARGO_BIN_EXE_haarpsi"))
        .args(["batch", s(&manifest), "--metrics", "haarpsi,haarpsic,psnr", "--out", s(&eight)])
        .env("HAARPSI_JOBS", "8")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(&one).unwrap(), std::fs::read(&eight).unwrap());
}

#[test]
fn batch_manifest_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "reference_path,distorted_path,mos,database\n").unwrap();
    let o = run(&["batch", s(&empty)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no entries"));

    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, "reference_path,distorted_path,mos,database\na.png,b.png,,X\na.png,c.png,1,X\na.png,d.png,x,X\n").unwrap();
    let o = run(&["batch", s(&broken)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("row 1") && err.contains("row 3"), "{err}");
    assert_eq!(run(&["batch", s(&empty), "--metrics", "ssim"]).status.code(), Some(1));
}

#[test]
fn evaluate_perfect_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = scored_fixture(dir.path(), 8);
    let report_path = dir.path().join("out/report.json");
    let scatter = dir.path().join("scatter");
    let o = run(&[
        "evaluate",
        s(&manifest),
        "--metrics",
        "haarpsi",
        "--baseline",
        "haarpsi",
        "--report",
        s(&report_path),
        "--scatter",
        s(&scatter),
        "--dmos",
        "odd",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: EvaluationReport = serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    assert!(report.significance.is_empty());
    for cells in report.per_database.values() {
        let c = cells["haarpsi"];
        assert_eq!((c.srocc, c.pearson, c.kendall), (1.0, 1.0, 1.0));
    }
    // two samples per distortion and database: cells omitted with a warning
    assert!(stderr(&o).contains("need 4"));
    for series in &report.scatter {
        let path = scatter.join(haarpsi::harness::scatter_file_name(&series.database));
        let back = read_scatter_csv(std::fs::File::open(path).unwrap()).unwrap();
        assert_eq!(&back, series);
        let c = back.correlations(0, None).unwrap();
        assert!((c.srocc - report.per_database[&series.database]["haarpsi"].srocc).abs() <= 1e-12);
    }
    assert_eq!(report.scatter.iter().find(|s| s.database == "odd").unwrap().polarity, haarpsi::harness::Polarity::Dmos);
}

#[test]
fn evaluate_compares_against_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = scored_fixture(dir.path(), 8);
    let report_path = dir.path().join("report.json");
    let o = run(&["evaluate", s(&manifest), "--metrics", "haarpsi-daub2", "--baseline", "psnr", "--report", s(&report_path)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: EvaluationReport = serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    assert_eq!(report.metrics, vec!["haarpsi-daub2", "psnr"]);
    assert!(stdout(&o).contains("srocc"));
}

fn tune_args<'a>(manifest: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "tune", manifest, "--seed", "7", "--subset-fraction", "0.5", "--c-step", "19", "--alpha-step", "2",
        "--max-iters", "20", "--out", out,
    ]
}

#[test]
fn tune_is_deterministic_and_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = scored_fixture(dir.path(), 16);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let o = run(&tune_args(s(&manifest), s(&a)));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    run(&tune_args(s(&manifest), s(&b)));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let from_cli: TuneResult = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    let cfg = TuneConfig {
        seed: 7,
        subset_fraction: 0.5,
        c_step: 19.0,
        alpha_step: 2.0,
        max_iters: 20,
        ..TuneConfig::default()
    };
    let entries = haarpsi::harness::load_manifest(&manifest).unwrap();
    let lib = tune_manifest(&cfg, &entries, &MetricParams::default(), TuneCache::Responses, 2).unwrap();
    assert_eq!(from_cli, lib);
    let text = stdout(&o);
    assert!(text.contains(&format!("C = {}", lib.c_final)), "{text}");
    assert!(text.contains(&format!("alpha = {:.1}", lib.alpha_final)), "{text}");
    assert!(text.contains("even: SROCC"));
}

#[test]
fn tune_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let o = run(&["tune", s(&dir.path().join("missing.csv")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));

    // constant opinion scores: every grid node is undefined
    let manifest = scored_fixture(dir.path(), 8);
    let text = std::fs::read_to_string(&manifest).unwrap();
    let flat: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                return l.to_string();
            }
            let mut f: Vec<&str> = l.split(',').collect();
            f[2] = "3";
            f.join(",")
        })
        .collect();
    let flat_path = dir.path().join("flat.csv");
    std::fs::write(&flat_path, flat.join("\n")).unwrap();
    let o = run(&["tune", s(&flat_path), "--subset-fraction", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("t.json.trace.json"), "{err}");
    let trace: Vec<serde_json::Value> = serde_json::from_slice(&std::fs::read(dir.path().join("t.json.trace.json")).unwrap()).unwrap();
    assert_eq!(trace.len(), 20 * 13);
    assert_eq!(run(&["tune"]).status.code(), Some(1));
}

#[test]
fn filters_print_tap_grids() {
    let o = run(&["filters", "--wavelet", "haar", "--scale", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let grids: Vec<Vec<Vec<f64>>> = stdout(&o)
        .split("\n\n")
        .map(|block| {
            block
                .lines()
                .filter(|l| !l.starts_with('#'))
                .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
                .collect()
        })
        .collect();
    assert_eq!(grids[0], vec![vec![-0.5, -0.5], vec![0.5, 0.5]]);
    assert_eq!(grids[1], vec![vec![-0.5, 0.5], vec![-0.5, 0.5]]);

    let o = run(&["filters", "--wavelet", "haar", "--scale", "3"]);
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).collect();
    assert_eq!(rows.len(), 16);
    assert_eq!(rows[0], ["-0.125"; 8].join(" "));
    assert_eq!(rows[7], ["0.125"; 8].join(" "));
    assert_eq!(rows[8], [["-0.125"; 4].join(" "), ["0.125"; 4].join(" ")].join(" "));

    let o = run(&["filters", "--wavelet", "daub2", "--scale", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("# horizontal daub2 scale 2 (10x10)\n"), "{text}");
    assert_eq!(text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).count(), 20);

    assert_eq!(run(&["filters", "--wavelet", "nosuch"]).status.code(), Some(1));
    assert_eq!(run(&["filters", "--scale", "4"]).status.code(), Some(1));
}
