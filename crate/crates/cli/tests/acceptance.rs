//! End-to-end acceptance report: one PASS/FAIL line per criterion.
//!
//! The run is a report, not a gate: it exits 0 so the regular test suite can
//! be run while an unmet criterion is still under investigation. Set
//! `RAMANQUANT_ACCEPTANCE_STRICT=1` to turn any FAIL into a non-zero exit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use ramanquant::bench::{run_comparison, run_grid, spearman, ComparisonSpec, GridSpec, BAYES_LABEL};
use ramanquant::diagnostics::{
    gibbs_moment_checks, prior_recovery_check, reversibility_checks, split_jacobian_check, tiny_oracle_check,
};
use ramanquant::model::ModelConfig;
use ramanquant::preprocess::{median_repeats, savitzky_golay};
use ramanquant::spectral::{Spectrum, WavenumberGrid};

/// Chain length of the corner cells, as stated with their tolerance band.
const CORNER_ITERATIONS: usize = 10_000;
/// Chain length for the trend check; at 10 000 the run-to-run variance of
/// single hard mixtures is enough to reorder neighbouring cells.
const TREND_ITERATIONS: usize = 30_000;
const SEED: u64 = 0;

struct Report {
    lines: Vec<(String, bool, String)>,
}

impl Report {
    fn record(&mut self, id: &str, ok: bool, detail: String) {
        println!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" });
        self.lines.push((id.to_string(), ok, detail));
    }
}

fn model(iterations: usize) -> ModelConfig {
    ModelConfig { iterations, ..ModelConfig::default() }
}

fn corners(r: &mut Report) {
    let t = Instant::now();
    for (n, sigma, lo, hi) in [(1, 1.0, 0.6, 1.6), (7, 5.0, 6.5, 13.0)] {
        let spec = GridSpec {
            n_interferents: vec![n],
            sigmas: vec![sigma],
            mixtures: 100,
            seed: SEED,
            model: model(CORNER_ITERATIONS),
            ..GridSpec::default()
        };
        match run_grid(&spec, None) {
            Ok(g) => {
                let rmse = g.cells[0].rmse;
                r.record(
                    &format!("1 corner (N_I={n}, sigma={sigma})"),
                    (lo..=hi).contains(&rmse),
                    format!("RMSE {rmse:.3}, required [{lo}, {hi}], 100 mixtures, I={CORNER_ITERATIONS}"),
                );
            }
            Err(e) => r.record(&format!("1 corner (N_I={n}, sigma={sigma})"), false, e.to_string()),
        }
    }
    println!("     ({:.0} s)", t.elapsed().as_secs_f64());
}

fn grid(r: &mut Report) {
    let t = Instant::now();
    let spec = GridSpec { mixtures: 50, seed: SEED, model: model(TREND_ITERATIONS), ..GridSpec::default() };
    let g = match run_grid(&spec, None) {
        Ok(g) => g,
        Err(e) => {
            r.record("2 trend", false, e.to_string());
            r.record("3 ceiling", false, e.to_string());
            return;
        }
    };
    for line in g.table1_csv().lines() {
        println!("     {line}");
    }
    let m = g.rmse_matrix();
    let n_axis: Vec<f64> = g.n_interferents.iter().map(|&n| n as f64).collect();
    let mut worst = (f64::INFINITY, String::new());
    for (s, row) in g.sigmas.iter().zip(&m) {
        let rho = spearman(&n_axis, row).unwrap_or(f64::NAN);
        if !(rho >= worst.0) {
            worst = (rho, format!("sigma={s} row"));
        }
    }
    for (j, n) in g.n_interferents.iter().enumerate() {
        let col: Vec<f64> = m.iter().map(|row| row[j]).collect();
        let rho = spearman(&g.sigmas, &col).unwrap_or(f64::NAN);
        if !(rho >= worst.0) {
            worst = (rho, format!("N_I={n} column"));
        }
    }
    r.record(
        "2 trend",
        worst.0 > 0.9,
        format!("min Spearman {:.3} ({}), required > 0.9, 50 mixtures/cell, I={TREND_ITERATIONS}", worst.0, worst.1),
    );
    let max = g.cells.iter().map(|c| c.rmse).fold(f64::NEG_INFINITY, f64::max);
    r.record("3 ceiling", max < 10.2, format!("max cell RMSE {max:.3}, required < 10.2"));
    println!("     ({:.0} s)", t.elapsed().as_secs_f64());
}

fn comparison(r: &mut Report) {
    let t = Instant::now();
    let spec = ComparisonSpec {
        training_sizes: vec![6, 24],
        n_interferents: vec![1, 3, 5],
        repeats: 10,
        seed: SEED,
        ..ComparisonSpec::default()
    };
    let c = match run_comparison(&spec, None, None) {
        Ok(c) => c,
        Err(e) => {
            r.record("4 comparison", false, e.to_string());
            return;
        }
    };
    for line in c.table2_csv().lines() {
        println!("     {line}");
    }
    let methods: Vec<&str> = spec.methods.iter().map(|m| m.name()).collect();
    let mean = |n: usize, m: &str, s: usize| c.row(n, m, Some(s)).map_or(f64::NAN, |row| row.mean);
    for n in [1, 3, 5] {
        let bayes = mean(n, BAYES_LABEL, 6);
        let best = methods.iter().map(|m| mean(n, m, 6)).fold(f64::INFINITY, f64::min);
        r.record(
            &format!("4 size 6, N_I={n}"),
            bayes < best,
            format!("Bayes {bayes:.3} vs best baseline {best:.3}; Bayes must be lower"),
        );
    }
    let bayes = mean(1, BAYES_LABEL, 24);
    let (best_m, best) = methods
        .iter()
        .map(|m| (*m, mean(1, m, 24)))
        .fold(("", f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    r.record(
        "4 size 24, N_I=1",
        best <= bayes,
        format!("best baseline {best_m} {best:.3} vs Bayes {bayes:.3}; a baseline must match or beat Bayes"),
    );
    println!("     ({:.0} s)", t.elapsed().as_secs_f64());
}

fn sampler(r: &mut Report) {
    match gibbs_moment_checks(100_000, 7) {
        Ok(checks) => {
            let worst = checks.iter().max_by(|a, b| a.z().abs().total_cmp(&b.z().abs())).unwrap();
            r.record(
                "5 Gibbs moments",
                checks.iter().all(|c| c.z().abs() < 3.0),
                format!("{} moments, worst |z| {:.2} ({}), required < 3 at 1e5 draws", checks.len(), worst.z().abs(), worst.name),
            );
        }
        Err(e) => r.record("5 Gibbs moments", false, e.to_string()),
    }
    match reversibility_checks(2000, 3) {
        Ok(checks) => {
            let worst = checks.iter().map(|c| c.max_error).fold(0.0, f64::max);
            let pairs: Vec<String> = checks.iter().map(|c| format!("{} x{}", c.pair, c.trials)).collect();
            r.record(
                "5 reversibility",
                worst < 1e-12,
                format!("max |A·A_rev − 1| {worst:.1e} over {}, required < 1e-12", pairs.join(", ")),
            );
        }
        Err(e) => r.record("5 reversibility", false, e.to_string()),
    }
    let jac = split_jacobian_check(1000, 5);
    r.record("5 split Jacobian", jac < 1e-8, format!("max relative deviation from 8·δl·δw {jac:.1e}, required < 1e-8"));
    match tiny_oracle_check(200_000, 1) {
        Ok(o) => r.record(
            "5 tiny oracle",
            o.total_variation < 0.1,
            format!(
                "TV {:.3} (quadrature {:.3?}, chain {:.3?}), required < 0.1",
                o.total_variation, o.quadrature, o.chain
            ),
        ),
        Err(e) => r.record("5 tiny oracle", false, e.to_string()),
    }
    for (poisson, label) in [(false, "sorted-configuration count prior"), (true, "Poisson count prior")] {
        match prior_recovery_check(poisson, 2_000_000, 200, 11) {
            Ok(p) => r.record(
                &format!("5 prior recovery ({label})"),
                p.min_p() > 0.01,
                format!(
                    "p-values k {:.3}, location {:.3}, width {:.3}, weight {:.3} over {} draws; required > 0.01",
                    p.count_p, p.location_p, p.width_p, p.weight_p, p.samples
                ),
            ),
            Err(e) => r.record(&format!("5 prior recovery ({label})"), false, e.to_string()),
        }
    }
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ramanquant"))
        .args(args)
        .env("RAMANQUANT_LOG", "error")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("`{}` exited {:?}: {}", args.join(" "), out.status.code(), String::from_utf8_lossy(&out.stderr)))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn read_csv(path: &Path) -> Result<Vec<BTreeMap<String, String>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty csv")?.split(',').collect();
    Ok(lines
        .map(|l| header.iter().map(|h| h.to_string()).zip(l.split(',').map(str::to_string)).collect())
        .collect())
}

/// Simulate the glucose-analog campaign, preprocess, fit and quantify it with
/// ten runs per sample. Returns (RMSE, concentration range, SEMs).
fn glucose_pipeline(dir: &Path) -> Result<(f64, f64, Vec<f64>), String> {
    let raw = dir.join("raw");
    let pre = dir.join("pre");
    cli(&["simulate", "--scenario", "glucose", "--seed", "0", "--out", p(&raw)])?;
    let water = raw.join("water.csv");
    cli(&["preprocess", "--input", p(&raw.join("reference.csv")), "--background", p(&water), "--out", p(&pre.join("reference.csv"))])?;
    let truth = read_csv(&raw.join("truth.csv"))?;
    let mut samples = Vec::new();
    for row in &truth {
        let name = format!("{}.csv", row["sample"]);
        let out = pre.join(&name);
        cli(&["preprocess", "--input", p(&raw.join("samples").join(&name)), "--background", p(&water), "--out", p(&out)])?;
        samples.push(out);
    }
    let model = dir.join("model.json");
    cli(&["fit-reference", "--reference", p(&pre.join("reference.csv")), "--c-pure", "40", "--seed", "0", "--out", p(&model)])?;
    let q = dir.join("quant");
    let mut args = vec!["quantify", "--model", p(&model), "--out", p(&q), "--runs", "10", "--seed", "0"];
    args.extend(samples.iter().map(|s| p(s)));
    cli(&args)?;
    let summary = read_csv(&q.join("summary.csv"))?;
    let num = |row: &BTreeMap<String, String>, key: &str| -> Result<f64, String> {
        row.get(key).ok_or(format!("missing {key}"))?.parse::<f64>().map_err(|e| format!("{key}: {e}"))
    };
    let (mut se, mut sems) = (0.0, Vec::new());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in &truth {
        let c = num(t, "concentration")?;
        lo = lo.min(c);
        hi = hi.max(c);
        let s = summary.iter().find(|s| s["mixture"] == t["sample"]).ok_or("sample missing from summary")?;
        if num(s, "runs")? != 10.0 {
            return Err("summary does not report 10 runs".into());
        }
        se += (num(s, "c_mix_mean")? - c).powi(2);
        sems.push(num(s, "c_mix_sem")?);
    }
    Ok(((se / truth.len() as f64).sqrt(), hi - lo, sems))
}

fn glucose(r: &mut Report) {
    let t = Instant::now();
    let dir = tempfile::tempdir().expect("temp dir");
    match glucose_pipeline(dir.path()) {
        Ok((rmse, range, sems)) => {
            let sem_ok = sems.iter().all(|s| s.is_finite() && *s >= 0.0);
            r.record(
                "6 glucose analog",
                rmse < 0.15 * range && sem_ok,
                format!(
                    "RMSE {rmse:.3} vs limit {:.3} (15% of range {range:.2}); SEM over 10 runs reported for {} samples (max {:.3})",
                    0.15 * range,
                    sems.len(),
                    sems.iter().copied().fold(0.0, f64::max)
                ),
            );
        }
        Err(e) => r.record("6 glucose analog", false, e),
    }
    println!("     ({:.0} s)", t.elapsed().as_secs_f64());
}

/// Every CSV/JSON under `dir`; manifests lose their wall-clock block.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
            if !matches!(ext, "csv" | "json" | "jsonl") {
                continue;
            }
            let mut bytes = std::fs::read(&path).expect("readable file");
            if path.to_string_lossy().contains("manifest") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).expect("manifest json");
                v.as_object_mut().map(|o| o.remove("timing"));
                bytes = serde_json::to_vec(&v).expect("json");
            }
            out.insert(path.strip_prefix(dir).expect("under dir").to_path_buf(), bytes);
        }
    }
    out
}

fn every_command(dir: &Path) -> Result<(), String> {
    let sim = dir.join("sim");
    cli(&["simulate", "--out", p(&sim), "--mixtures", "3", "--seed", "5"])?;
    let gl = dir.join("glucose");
    cli(&["simulate", "--scenario", "glucose", "--out", p(&gl), "--seed", "5"])?;
    cli(&["preprocess", "--input", p(&gl.join("samples/day_01.csv")), "--background", p(&gl.join("water.csv")), "--out", p(&dir.join("pre.csv"))])?;
    let cfg = dir.join("model_config.json");
    std::fs::write(&cfg, r#"{"iterations": 2000}"#).map_err(|e| e.to_string())?;
    let model = dir.join("model.json");
    cli(&["fit-reference", "--reference", p(&sim.join("reference.csv")), "--c-pure", "30", "--config", p(&cfg), "--seed", "2", "--out", p(&model), "--trace", p(&dir.join("trace.jsonl"))])?;
    cli(&[
        "quantify", "--model", p(&model), "--config", p(&cfg), "--out", p(&dir.join("quant")), "--runs", "2", "--seed", "3",
        p(&sim.join("mixtures/000.csv")), p(&sim.join("mixtures/001.csv")),
    ])?;
    let bench_cfg = dir.join("bench_config.json");
    std::fs::write(
        &bench_cfg,
        r#"{"grid": {"n_interferents": [1, 2], "sigmas": [1.0, 2.0], "mixtures": 10, "model": {"iterations": 1000}},
            "comparison": {"training_sizes": [6, 9], "n_interferents": [1], "test_size": 4, "repeats": 2, "model": {"iterations": 1000}}}"#,
    )
    .map_err(|e| e.to_string())?;
    cli(&["benchmark", "--config", p(&bench_cfg), "--seed", "1", "--out", p(&dir.join("bench"))])
}

fn determinism(r: &mut Report) {
    let dir = tempfile::tempdir().expect("temp dir");
    let result = every_command(dir.path()).and_then(|_| {
        let first = snapshot(dir.path());
        every_command(dir.path())?;
        Ok((first, snapshot(dir.path())))
    });
    match result {
        Ok((a, b)) => {
            let differing: Vec<String> =
                a.keys().chain(b.keys()).filter(|k| a.get(*k) != b.get(*k)).map(|k| k.display().to_string()).collect();
            r.record(
                "7 determinism",
                differing.is_empty() && !a.is_empty(),
                if differing.is_empty() {
                    format!("{} CSV/JSON outputs of all five commands byte-identical on rerun (manifest wall-clock excluded)", a.len())
                } else {
                    format!("differing outputs: {}", differing.join(", "))
                },
            );
        }
        Err(e) => r.record("7 determinism", false, e),
    }
}

fn preprocessing(r: &mut Report) {
    let n = 120;
    let grid = WavenumberGrid::uniform(400.0, 1600.0, n).expect("grid");
    let mut worst: f64 = 0.0;
    for coefs in [[1.0, -2.0, 0.5, 3.0], [-4.0, 0.3, 2.2, -1.7], [10.0, 0.0, 0.0, 0.0]] {
        let y: Vec<f64> = grid
            .values()
            .iter()
            .map(|v| {
                let t = (v - 1000.0) / 600.0;
                coefs[0] + coefs[1] * t + coefs[2] * t * t + coefs[3] * t * t * t
            })
            .collect();
        let s = savitzky_golay(&Spectrum::new(grid.clone(), y.clone()).expect("spectrum"), 21, 3).expect("smoothing");
        worst = s.intensity().iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    r.record("8 Savitzky-Golay", worst < 1e-10, format!("max error on cubics incl. edges {worst:.1e}, required < 1e-10"));

    let base: Vec<f64> = grid.values().iter().map(|v| 5.0 + (v / 90.0).sin()).collect();
    let mut repeats = vec![Spectrum::new(grid.clone(), base.clone()).expect("spectrum"); 5];
    let mut spiked = base.clone();
    spiked[37] += 800.0;
    repeats[2] = Spectrum::new(grid, spiked).expect("spectrum");
    let med = median_repeats(&repeats).expect("median");
    r.record("8 median spike removal", med.intensity() == &base[..], "single +800 spike in 1 of 5 repeats".into());
}

fn main() {
    // `cargo test -- --list` and filters are not meaningful for a report
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let t = Instant::now();
    let mut r = Report { lines: Vec::new() };
    preprocessing(&mut r);
    sampler(&mut r);
    determinism(&mut r);
    glucose(&mut r);
    corners(&mut r);
    grid(&mut r);
    comparison(&mut r);
    let passed = r.lines.iter().filter(|l| l.1).count();
    println!("acceptance: {passed}/{} checks passed in {:.0} s", r.lines.len(), t.elapsed().as_secs_f64());
    for (id, ok, _) in &r.lines {
        if !ok {
            println!("  failing: {id}");
        }
    }
    if passed < r.lines.len() && std::env::var("RAMANQUANT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
