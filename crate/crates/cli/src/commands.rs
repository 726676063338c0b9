use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ramanquant::bench::{
    run_comparison, run_grid, write_comparison_outputs, write_grid_outputs, ComparisonSpec, GridSpec,
};
use ramanquant::io::{json_hash, load_json, load_repeats, load_spectrum, save_json, save_repeats, save_spectrum, write_atomic};
use ramanquant::model::ModelConfig;
use ramanquant::preprocess::{median_repeats, preprocess as run_pipeline, PreprocessConfig};
use ramanquant::simulator::{derive_seed, gen_dataset, GlucoseScenario, SimProtocol};
use ramanquant::two_stage::{learn_target_traced, quantify as run_quantify, QuantResult, TargetModel};
use ramanquant::{Error, Result};

use crate::manifest::{display, Clock, RunManifest};
use crate::{BenchmarkArgs, FitReferenceArgs, PreprocessArgs, QuantifyArgs, Scenario, SimulateArgs, Study};

/// 0 ok, 1 partial failure, 2 usage/config, 3 IO, 4 numerical.
pub fn exit_code(e: &Error) -> ExitCode {
    let code = match e {
        Error::Io(_) => 3,
        e if e.is_numerical() => 4,
        Error::Internal(_) => 1,
        _ => 2,
    };
    ExitCode::from(code)
}

fn load_config<T: Default + serde::de::DeserializeOwned>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", p.display())))
        }
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn simulate(a: &SimulateArgs, argv: &[String]) -> Result<ExitCode> {
    let clock = Clock::start();
    std::fs::create_dir_all(&a.out)?;
    let mut m = RunManifest::new("simulate", argv, &clock);
    match a.scenario {
        Scenario::Mixtures => {
            let mut protocol: SimProtocol = load_config(a.config.as_deref())?;
            if let Some(s) = a.seed {
                protocol.seed = s;
            }
            let ds = gen_dataset(&protocol, a.mixtures)?;
            ds.save(&a.out)?;
            m.seed = Some(protocol.seed);
            m.config_hash = Some(json_hash(&protocol));
            m.outputs = vec!["meta.json".into(), "reference.csv".into(), "mixtures/".into(), "truth.csv".into()];
        }
        Scenario::Glucose => {
            let mut sc: GlucoseScenario = load_config(a.config.as_deref())?;
            if let Some(s) = a.seed {
                sc.seed = s;
            }
            let data = sc.generate()?;
            save_repeats(&a.out.join("reference.csv"), &data.reference)?;
            save_repeats(&a.out.join("water.csv"), &data.water)?;
            let mut truth = String::from("sample,concentration\n");
            for (d, (reps, c)) in data.samples.iter().zip(&data.truth).enumerate() {
                let name = format!("day_{:02}", d + 1);
                save_repeats(&a.out.join("samples").join(format!("{name}.csv")), reps)?;
                let _ = writeln!(truth, "{name},{c}");
            }
            write_atomic(&a.out.join("truth.csv"), truth.as_bytes())?;
            save_json(&a.out.join("scenario.json"), &sc)?;
            m.seed = Some(sc.seed);
            m.config_hash = Some(json_hash(&sc));
            m.outputs =
                vec!["reference.csv".into(), "water.csv".into(), "samples/".into(), "truth.csv".into(), "scenario.json".into()];
        }
    }
    m.timing = clock.timing();
    m.write(&a.out.join("run_manifest.json"))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct Provenance<'a> {
    input: String,
    background: Option<String>,
    config: &'a PreprocessConfig,
    steps: Vec<ramanquant::preprocess::Step>,
}

pub fn preprocess(a: &PreprocessArgs, argv: &[String]) -> Result<ExitCode> {
    let clock = Clock::start();
    let mut config: PreprocessConfig = load_config(a.config.as_deref())?;
    let repeats = load_repeats(&a.input)?;
    if let Some(b) = &a.background {
        config.background = Some(median_repeats(&load_repeats(b)?)?);
    }
    let (y, mut steps) = run_pipeline(&repeats, &config)?;
    if let Some(ramanquant::preprocess::Step::SubtractBackground { source }) = steps.last_mut() {
        *source = a.background.as_deref().map(display);
    }
    save_spectrum(&a.out, &y)?;
    let prov = Provenance {
        input: display(&a.input),
        background: a.background.as_deref().map(display),
        config: &config,
        steps,
    };
    save_json(&sidecar(&a.out, ".provenance.json"), &prov)?;
    let mut m = RunManifest::new("preprocess", argv, &clock);
    m.config_hash = Some(json_hash(&config));
    m.inputs = std::iter::once(display(&a.input)).chain(a.background.as_deref().map(display)).collect();
    m.outputs = vec![display(&a.out), display(&sidecar(&a.out, ".provenance.json"))];
    m.timing = clock.timing();
    m.write(&sidecar(&a.out, ".manifest.json"))?;
    Ok(ExitCode::SUCCESS)
}

pub fn fit_reference(a: &FitReferenceArgs, argv: &[String]) -> Result<ExitCode> {
    let clock = Clock::start();
    if !(a.c_pure > 0.0 && a.c_pure.is_finite()) {
        return Err(Error::InvalidParameter(format!("--c-pure must be positive, got {}", a.c_pure)));
    }
    let config: ModelConfig = load_config(a.config.as_deref())?;
    config.validate()?;
    let reference = load_spectrum(&a.reference)?;
    let (model, trace, fit) = learn_target_traced(&reference, a.c_pure, &config, a.seed)?;
    log::info!("reference: k̂ = {}, {} samples used", fit.k_hat, fit.samples_used);
    save_json(&a.out, &model)?;
    let mut outputs = vec![display(&a.out)];
    if let Some(t) = &a.trace {
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf)?;
        write_atomic(t, &buf)?;
        outputs.push(display(t));
    }
    let mut m = RunManifest::new("fit-reference", argv, &clock);
    m.seed = Some(a.seed);
    m.config_hash = Some(config.hash());
    m.inputs = vec![display(&a.reference)];
    m.outputs = outputs;
    m.timing = clock.timing();
    m.write(&sidecar(&a.out, ".manifest.json"))?;
    Ok(ExitCode::SUCCESS)
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "mixture".into(), |s| s.to_string_lossy().into_owned())
}

pub fn quantify(a: &QuantifyArgs, jobs: Option<usize>, argv: &[String]) -> Result<ExitCode> {
    let clock = Clock::start();
    if a.mixtures.is_empty() {
        return Err(Error::InvalidParameter("no mixture files given".into()));
    }
    if a.runs == 0 {
        return Err(Error::InvalidParameter("--runs must be at least 1".into()));
    }
    let names: Vec<String> = a.mixtures.iter().map(|p| stem(p)).collect();
    if names.iter().collect::<HashSet<_>>().len() != names.len() {
        return Err(Error::InvalidParameter("mixture file names must have distinct stems".into()));
    }
    let config: ModelConfig = load_config(a.config.as_deref())?;
    config.validate()?;
    let target: TargetModel = load_json(&a.model)?;
    std::fs::create_dir_all(&a.out)?;

    let run_seed = |r: usize| if a.runs == 1 { a.seed } else { derive_seed(a.seed, &[r as u64]) };
    let items: Vec<(usize, usize)> = (0..a.mixtures.len()).flat_map(|i| (0..a.runs).map(move |r| (i, r))).collect();
    let work = || {
        items
            .par_iter()
            .map(|&(i, r)| {
                let y = load_spectrum(&a.mixtures[i])?;
                run_quantify(&y, &target, &config, run_seed(r))
            })
            .collect::<Vec<Result<QuantResult>>>()
    };
    let outcomes = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?
            .install(work),
        None => work(),
    };

    let mut per_file: BTreeMap<usize, Vec<QuantResult>> = BTreeMap::new();
    let mut failures: Vec<(usize, Error)> = Vec::new();
    for (&(i, _), res) in items.iter().zip(outcomes) {
        match res {
            Ok(q) => per_file.entry(i).or_default().push(q),
            Err(e) => failures.push((i, e)),
        }
    }
    let failed: HashSet<usize> = failures.iter().map(|(i, _)| *i).collect();
    for (i, e) in &failures {
        eprintln!("error: {}: {e}", a.mixtures[*i].display());
    }

    let mut outputs = Vec::new();
    let mut summary = String::from("mixture,runs,c_mix_mean,c_mix_sem,c_mix_sd_mean,c_mix_reported\n");
    for (i, results) in &per_file {
        if failed.contains(i) {
            continue;
        }
        let name = &names[*i];
        if a.runs == 1 {
            let p = a.out.join(format!("{name}.json"));
            save_json(&p, &results[0])?;
            outputs.push(display(&p));
        } else {
            for (r, q) in results.iter().enumerate() {
                let p = a.out.join(format!("{name}.run_{:02}.json", r + 1));
                save_json(&p, q)?;
                outputs.push(display(&p));
            }
        }
        let c: Vec<f64> = results.iter().map(|q| q.c_mix_hat).collect();
        let n = c.len() as f64;
        let mean = c.iter().sum::<f64>() / n;
        let sem = (c.len() > 1)
            .then(|| (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt());
        let sd_mean = results.iter().map(|q| q.c_mix_sd).sum::<f64>() / n;
        let _ = writeln!(
            summary,
            "{name},{},{mean},{},{sd_mean},{}",
            c.len(),
            sem.map_or(String::new(), |s| s.to_string()),
            mean.max(0.0)
        );
    }
    let summary_path = a.out.join("summary.csv");
    write_atomic(&summary_path, summary.as_bytes())?;
    outputs.push(display(&summary_path));

    let mut m = RunManifest::new("quantify", argv, &clock);
    m.seed = Some(a.seed);
    m.config_hash = Some(config.hash());
    m.inputs = std::iter::once(display(&a.model)).chain(a.mixtures.iter().map(|p| display(p))).collect();
    m.outputs = outputs;
    m.timing = clock.timing();
    m.write(&a.out.join("run_manifest.json"))?;

    if failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else if per_file.keys().all(|i| failed.contains(i)) && failures.iter().all(|(_, e)| e.is_numerical()) {
        Ok(ExitCode::from(4))
    } else {
        Ok(ExitCode::from(1))
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BenchConfig {
    grid: GridSpec,
    comparison: ComparisonSpec,
    /// Restrict the Bayesian comparison runs to these N_I values.
    bayes_n_interferents: Option<Vec<usize>>,
}

pub fn benchmark(a: &BenchmarkArgs, jobs: Option<usize>, argv: &[String]) -> Result<ExitCode> {
    let clock = Clock::start();
    let mut cfg: BenchConfig = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.grid.seed = s;
        cfg.comparison.seed = s;
    }
    if a.paper_scale {
        cfg.grid.mixtures = 1000;
        cfg.comparison.repeats = 100;
    }
    std::fs::create_dir_all(&a.out)?;
    let mut outputs = Vec::new();
    if matches!(a.study, Study::All | Study::Grid) {
        let r = run_grid(&cfg.grid, jobs)?;
        outputs.extend(write_grid_outputs(&r, &a.out)?);
        save_json(&a.out.join("grid_details.json"), &r)?;
        outputs.push("grid_details.json".into());
    }
    if matches!(a.study, Study::All | Study::Comparison) {
        let r = run_comparison(&cfg.comparison, cfg.bayes_n_interferents.as_deref(), jobs)?;
        outputs.extend(write_comparison_outputs(&r, &a.out)?);
        save_json(&a.out.join("comparison_details.json"), &r)?;
        outputs.push("comparison_details.json".into());
    }
    let mut m = RunManifest::new("benchmark", argv, &clock);
    m.seed = Some(cfg.grid.seed);
    m.config_hash = Some(json_hash(&cfg));
    m.inputs = a.config.iter().map(|p| display(p)).collect();
    m.outputs = outputs;
    m.timing = clock.timing();
    m.write(&a.out.join("run_manifest.json"))?;
    Ok(ExitCode::SUCCESS)
}
