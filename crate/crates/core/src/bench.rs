//! Experiment drivers: the (N_I, σ) error grid and the training-size
//! comparison against regression baselines, with CSV and SVG writers.
//!
//! Work items are independent chains; they run on a rayon pool and are
//! merged back in input order, so results never depend on scheduling.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{cross_validate, rmse, CvPlan, Method, RegressionDataset};
use crate::error::{invalid, Error, Result};
use crate::io;
use crate::model::ModelConfig;
use crate::simulator::{
    derive_seed, protocol_interferents, protocol_mixture, protocol_reference, protocol_target, SimProtocol,
};
use crate::spectral::Spectrum;
use crate::two_stage::{learn_target, quantify, TargetModel};

const KEY_STAGE1: u64 = 11;
const KEY_CHAIN: u64 = 12;
const KEY_REPEAT: u64 = 13;
const KEY_CV: u64 = 14;
/// Test mixtures are indexed from here so they never coincide with training ones.
const TEST_OFFSET: usize = 1_000_000;

/// One mixture to be quantified.
pub struct MixtureJob<'a> {
    pub protocol: &'a SimProtocol,
    pub index: usize,
    pub spectrum: &'a Spectrum,
    pub seed: u64,
}

/// Anything that turns a mixture spectrum into a target concentration.
pub trait Quantifier: Sync {
    fn quantify(&self, job: &MixtureJob<'_>) -> Result<f64>;
}

/// The two-stage Bayesian method with a fixed learned target.
pub struct BayesQuantifier {
    pub target: TargetModel,
    pub config: ModelConfig,
}

impl Quantifier for BayesQuantifier {
    fn quantify(&self, job: &MixtureJob<'_>) -> Result<f64> {
        quantify(job.spectrum, &self.target, &self.config, job.seed).map(|r| r.c_mix_hat)
    }
}

/// Regenerates the ground truth; a zero-error reference for harness checks.
pub struct OracleQuantifier;

impl Quantifier for OracleQuantifier {
    fn quantify(&self, job: &MixtureJob<'_>) -> Result<f64> {
        let target = protocol_target(job.protocol);
        let shared = (!job.protocol.redraw_interferents).then(|| protocol_interferents(job.protocol));
        Ok(protocol_mixture(job.protocol, &target, shared.as_deref(), job.index)?.1.concentrations[0])
    }
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Internal(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Outcome of one quantification; numerical failures are kept, not raised.
fn attempt(q: &dyn Quantifier, job: &MixtureJob<'_>) -> Result<Option<f64>> {
    match q.quantify(job) {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_numerical() => {
            log::warn!("mixture {} excluded: {e}", job.index);
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Learn the target of `protocol` from its simulated reference.
pub fn learn_protocol_target(protocol: &SimProtocol, config: &ModelConfig) -> Result<TargetModel> {
    let target = protocol_target(protocol);
    let reference = protocol_reference(protocol, &target)?;
    learn_target(&reference, protocol.c_pure, config, derive_seed(protocol.seed, &[KEY_STAGE1]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n_interferents: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub mixtures: usize,
    pub seed: u64,
    pub protocol: SimProtocol,
    pub model: ModelConfig,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_interferents: (1..=7).collect(),
            sigmas: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            mixtures: 100,
            seed: 0,
            protocol: SimProtocol::default(),
            model: ModelConfig::default(),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_interferents.is_empty() || self.sigmas.is_empty() {
            return Err(invalid("grid needs at least one N_I and one σ value"));
        }
        if self.mixtures < 10 {
            return Err(invalid("grid cells need at least 10 mixtures"));
        }
        self.protocol.validate()?;
        self.model.validate()
    }

    fn cell_protocol(&self, n_interferents: usize, sigma: f64) -> SimProtocol {
        SimProtocol { n_interferents, sigma_mix: sigma, seed: self.seed, redraw_interferents: true, ..self.protocol.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n_interferents: usize,
    pub sigma: f64,
    pub rmse: f64,
    pub used: usize,
    pub excluded: usize,
    pub estimates: Vec<Option<f64>>,
    pub truth: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub n_interferents: Vec<usize>,
    pub sigmas: Vec<f64>,
    /// σ-major, N_I-minor.
    pub cells: Vec<CellResult>,
}

impl GridResult {
    pub fn cell(&self, n_interferents: usize, sigma: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.n_interferents == n_interferents && c.sigma == sigma)
    }

    /// RMSE matrix, rows σ, columns N_I.
    pub fn rmse_matrix(&self) -> Vec<Vec<f64>> {
        self.sigmas
            .iter()
            .map(|&s| self.n_interferents.iter().map(|&n| self.cell(n, s).map_or(f64::NAN, |c| c.rmse)).collect())
            .collect()
    }

    /// Table 1 layout: one row per σ, one column per N_I.
    pub fn table1_csv(&self) -> String {
        let mut out = String::from("sigma");
        for n in &self.n_interferents {
            let _ = write!(out, ",N_I={n}");
        }
        out.push('\n');
        for (s, row) in self.sigmas.iter().zip(self.rmse_matrix()) {
            let _ = write!(out, "{s}");
            for v in row {
                let _ = write!(out, ",{v:.4}");
            }
            out.push('\n');
        }
        out
    }
}

/// Quantify every mixture of every cell with `q`. The chain seed depends on
/// the mixture index only, so cells share random numbers.
pub fn run_grid_with(spec: &GridSpec, q: &dyn Quantifier, jobs: Option<usize>) -> Result<GridResult> {
    spec.validate()?;
    let cells: Vec<(usize, f64)> =
        spec.sigmas.iter().flat_map(|&s| spec.n_interferents.iter().map(move |&n| (n, s))).collect();
    let target = protocol_target(&spec.protocol_for_target());
    let items: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..spec.mixtures).map(move |i| (c, i))).collect();
    let outcomes: Vec<Result<(Option<f64>, f64)>> = with_pool(jobs, || {
        items
            .par_iter()
            .map(|&(c, i)| {
                let (n, s) = cells[c];
                let protocol = spec.cell_protocol(n, s);
                let (spectrum, truth) = protocol_mixture(&protocol, &target, None, i)?;
                let job = MixtureJob { protocol: &protocol, index: i, spectrum: &spectrum, seed: derive_seed(spec.seed, &[KEY_CHAIN, i as u64]) };
                Ok((attempt(q, &job)?, truth.concentrations[0]))
            })
            .collect()
    })?;
    let mut results = Vec::with_capacity(cells.len());
    let mut it = outcomes.into_iter();
    for &(n, s) in &cells {
        let mut estimates = Vec::with_capacity(spec.mixtures);
        let mut truth = Vec::with_capacity(spec.mixtures);
        for _ in 0..spec.mixtures {
            let (e, t) = it.next().expect("one outcome per item")?;
            estimates.push(e);
            truth.push(t);
        }
        let (p, t): (Vec<f64>, Vec<f64>) =
            estimates.iter().zip(&truth).filter_map(|(e, t)| e.map(|e| (e, *t))).unzip();
        let excluded = spec.mixtures - p.len();
        if excluded * 100 > spec.mixtures {
            return Err(Error::Internal(format!(
                "cell N_I={n}, σ={s}: {excluded} of {} mixtures failed",
                spec.mixtures
            )));
        }
        results.push(CellResult { n_interferents: n, sigma: s, rmse: rmse(&p, &t)?, used: p.len(), excluded, estimates, truth });
    }
    Ok(GridResult { n_interferents: spec.n_interferents.clone(), sigmas: spec.sigmas.clone(), cells: results })
}

impl GridSpec {
    fn protocol_for_target(&self) -> SimProtocol {
        SimProtocol { seed: self.seed, ..self.protocol.clone() }
    }
}

/// The grid with the Bayesian method. The target analyte and its reference
/// depend on the seed only, so one stage-1 fit serves every cell.
pub fn run_grid(spec: &GridSpec, jobs: Option<usize>) -> Result<GridResult> {
    spec.validate()?;
    let target = learn_protocol_target(&spec.protocol_for_target(), &spec.model)?;
    log::info!("grid: learned target with {} peaks", target.k_hat());
    run_grid_with(spec, &BayesQuantifier { target, config: spec.model.clone() }, jobs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparisonSpec {
    pub training_sizes: Vec<usize>,
    pub n_interferents: Vec<usize>,
    pub sigma: f64,
    pub test_size: usize,
    pub repeats: usize,
    pub seed: u64,
    pub protocol: SimProtocol,
    pub model: ModelConfig,
    pub cv: CvPlan,
    pub methods: Vec<Method>,
}

impl Default for ComparisonSpec {
    fn default() -> Self {
        Self {
            training_sizes: (6..=24).step_by(3).collect(),
            n_interferents: vec![1, 3, 5, 7, 9],
            sigma: 3.0,
            test_size: 100,
            repeats: 10,
            seed: 0,
            protocol: SimProtocol::default(),
            model: ModelConfig::default(),
            cv: CvPlan::default(),
            methods: vec![Method::Pls, Method::Pcr, Method::Ridge],
        }
    }
}

impl ComparisonSpec {
    pub fn validate(&self) -> Result<()> {
        if self.training_sizes.is_empty() || self.n_interferents.is_empty() || self.methods.is_empty() {
            return Err(invalid("comparison needs training sizes, N_I values and methods"));
        }
        if self.training_sizes.iter().any(|&s| s < self.cv.folds) {
            return Err(invalid("every training size must be at least the fold count"));
        }
        if self.repeats < 2 || self.test_size < 2 {
            return Err(invalid("comparison needs at least two repeats and two test mixtures"));
        }
        self.protocol.validate()?;
        self.model.validate()
    }

    fn dataset_protocol(&self, n_interferents: usize, repeat: usize) -> SimProtocol {
        SimProtocol {
            n_interferents,
            sigma_mix: self.sigma,
            seed: derive_seed(self.seed, &[KEY_REPEAT, repeat as u64]),
            redraw_interferents: false,
            ..self.protocol.clone()
        }
    }
}

/// Mean and sd of per-dataset RMSE for one method at one (N_I, size).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n_interferents: usize,
    pub method: String,
    /// Absent for the Bayesian method, which uses no training mixtures.
    pub training_size: Option<usize>,
    pub mean: f64,
    pub sd: f64,
    pub rmses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub training_sizes: Vec<usize>,
    pub rows: Vec<ComparisonRow>,
}

pub const BAYES_LABEL: &str = "This work";

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, v.sqrt())
}

impl ComparisonResult {
    pub fn row(&self, n_interferents: usize, method: &str, size: Option<usize>) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.n_interferents == n_interferents && r.method == method && (r.training_size == size || r.training_size.is_none()))
    }

    /// Table 2 layout: per (N_I, method) a row of mean and sd per training size.
    pub fn table2_csv(&self) -> String {
        let mut out = String::from("N_I,method");
        for s in &self.training_sizes {
            let _ = write!(out, ",mean_{s},sd_{s}");
        }
        out.push('\n');
        let mut keys: Vec<(usize, String)> = Vec::new();
        for r in &self.rows {
            let k = (r.n_interferents, r.method.clone());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        for (n, m) in keys {
            let _ = write!(out, "{n},{m}");
            for &s in &self.training_sizes {
                match self.row(n, &m, Some(s)) {
                    Some(r) => {
                        let _ = write!(out, ",{:.4},{:.4}", r.mean, r.sd);
                    }
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out
    }
}

struct Repeat {
    reference_target: TargetModel,
    test: Vec<(Spectrum, f64)>,
    train: Vec<(Spectrum, f64)>,
}

fn build_repeat(spec: &ComparisonSpec, n: usize, r: usize, bayes: bool) -> Result<Repeat> {
    let protocol = spec.dataset_protocol(n, r);
    let target = protocol_target(&protocol);
    let shared = protocol_interferents(&protocol);
    let draw = |i: usize| protocol_mixture(&protocol, &target, Some(&shared), i).map(|(s, t)| (s, t.concentrations[0]));
    let max_size = spec.training_sizes.iter().copied().max().unwrap_or(0);
    let train = (0..max_size).map(draw).collect::<Result<Vec<_>>>()?;
    let test = (0..spec.test_size).map(|i| draw(TEST_OFFSET + i)).collect::<Result<Vec<_>>>()?;
    let reference_target = if bayes {
        learn_protocol_target(&protocol, &spec.model)?
    } else {
        TargetModel::from_peaks(protocol.grid()?, Vec::new(), Vec::new(), protocol.c_pure)?
    };
    Ok(Repeat { reference_target, test, train })
}

fn rows_of(spectra: &[(Spectrum, f64)]) -> Result<RegressionDataset> {
    let x: Vec<Vec<f64>> = spectra.iter().map(|(s, _)| s.intensity().to_vec()).collect();
    let c: Vec<f64> = spectra.iter().map(|(_, c)| *c).collect();
    RegressionDataset::from_rows(&x, &c)
}

/// Run the comparison. `bayes_n_interferents` limits the (expensive)
/// Bayesian evaluation to a subset of N_I values; `None` means all.
pub fn run_comparison(spec: &ComparisonSpec, bayes_n_interferents: Option<&[usize]>, jobs: Option<usize>) -> Result<ComparisonResult> {
    spec.validate()?;
    let wants_bayes = |n: usize| bayes_n_interferents.map_or(true, |b| b.contains(&n));
    let datasets: Vec<(usize, usize)> =
        spec.n_interferents.iter().flat_map(|&n| (0..spec.repeats).map(move |r| (n, r))).collect();
    let repeats: Vec<Repeat> = with_pool(jobs, || {
        datasets.par_iter().map(|&(n, r)| build_repeat(spec, n, r, wants_bayes(n))).collect::<Result<Vec<_>>>()
    })??;

    // regression baselines: per dataset, per size, per method
    let reg: Vec<Vec<Vec<f64>>> = with_pool(jobs, || {
        repeats
            .par_iter()
            .zip(&datasets)
            .map(|(rep, &(_, r))| {
                let test = rows_of(&rep.test)?;
                spec.training_sizes
                    .iter()
                    .map(|&size| {
                        let train = rows_of(&rep.train[..size])?;
                        let plan = CvPlan { seed: derive_seed(spec.seed, &[KEY_CV, r as u64, size as u64]), ..spec.cv.clone() };
                        spec.methods
                            .iter()
                            .map(|&m| {
                                let fit = cross_validate(&train, &plan, m)?;
                                let pred = fit.model.predict_rows(test.x())?;
                                rmse(pred.as_slice(), test.c().as_slice())
                            })
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;

    // Bayesian: every test mixture of every selected dataset
    let items: Vec<(usize, usize)> = datasets
        .iter()
        .enumerate()
        .filter(|(_, (n, _))| wants_bayes(*n))
        .flat_map(|(d, _)| (0..spec.test_size).map(move |i| (d, i)))
        .collect();
    let config = &spec.model;
    let estimates: Vec<Result<Option<f64>>> = with_pool(jobs, || {
        items
            .par_iter()
            .map(|&(d, i)| {
                let (n, r) = datasets[d];
                let rep = &repeats[d];
                let protocol = spec.dataset_protocol(n, r);
                let q = BayesQuantifier { target: rep.reference_target.clone(), config: config.clone() };
                let job = MixtureJob {
                    protocol: &protocol,
                    index: TEST_OFFSET + i,
                    spectrum: &rep.test[i].0,
                    seed: derive_seed(spec.seed, &[KEY_CHAIN, r as u64, i as u64]),
                };
                attempt(&q, &job)
            })
            .collect()
    })?;
    let mut bayes_rmse: Vec<Option<f64>> = vec![None; datasets.len()];
    let mut it = estimates.into_iter();
    let mut d_prev = None;
    let mut buf: Vec<(f64, f64)> = Vec::new();
    let mut excluded = 0usize;
    let flush = |d: usize, buf: &mut Vec<(f64, f64)>, bayes_rmse: &mut Vec<Option<f64>>| -> Result<()> {
        let (p, t): (Vec<f64>, Vec<f64>) = buf.drain(..).unzip();
        bayes_rmse[d] = Some(rmse(&p, &t)?);
        Ok(())
    };
    for &(d, i) in &items {
        if d_prev.is_some_and(|p| p != d) {
            flush(d_prev.expect("checked"), &mut buf, &mut bayes_rmse)?;
        }
        d_prev = Some(d);
        match it.next().expect("one estimate per item")? {
            Some(e) => buf.push((e, repeats[d].test[i].1)),
            None => excluded += 1,
        }
    }
    if let Some(d) = d_prev {
        flush(d, &mut buf, &mut bayes_rmse)?;
    }
    if excluded * 100 > items.len().max(1) {
        return Err(Error::Internal(format!("{excluded} of {} Bayesian quantifications failed", items.len())));
    }

    let mut rows = Vec::new();
    for &n in &spec.n_interferents {
        let ds: Vec<usize> = (0..datasets.len()).filter(|&d| datasets[d].0 == n).collect();
        if wants_bayes(n) {
            let v: Vec<f64> = ds.iter().filter_map(|&d| bayes_rmse[d]).collect();
            let (mean, sd) = mean_sd(&v);
            rows.push(ComparisonRow { n_interferents: n, method: BAYES_LABEL.into(), training_size: None, mean, sd, rmses: v });
        }
        for (mi, m) in spec.methods.iter().enumerate() {
            for (si, &size) in spec.training_sizes.iter().enumerate() {
                let v: Vec<f64> = ds.iter().map(|&d| reg[d][si][mi]).collect();
                let (mean, sd) = mean_sd(&v);
                rows.push(ComparisonRow { n_interferents: n, method: m.name().into(), training_size: Some(size), mean, sd, rmses: v });
            }
        }
    }
    Ok(ComparisonResult { training_sizes: spec.training_sizes.clone(), rows })
}

/// Average-rank Spearman correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("spearman needs two equal-length samples of size >= 2"));
    }
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::UndefinedMetric("spearman of a constant sample".into()));
    }
    Ok(cov / (vx * vy).sqrt())
}

fn svg_header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// Heatmap of a row-major matrix with labelled axes.
pub fn heatmap_svg(title: &str, rows: &[String], cols: &[String], values: &[Vec<f64>]) -> String {
    let (cw, ch, left, top) = (60.0, 36.0, 70.0, 40.0);
    let w = left + cw * cols.len() as f64 + 20.0;
    let h = top + ch * rows.len() as f64 + 40.0;
    let finite = values.iter().flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = svg_header(w, h);
    let _ = writeln!(s, "<text x=\"{left}\" y=\"20\" font-weight=\"bold\">{title}</text>");
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let t = if v.is_finite() { (v - lo) / span } else { 0.0 };
            let (r, g, b) = ((255.0 * t) as u8, (80.0 + 100.0 * (1.0 - t)) as u8, (255.0 * (1.0 - t)) as u8);
            let (x, y) = (left + cw * j as f64, top + ch * i as f64);
            let _ = writeln!(s, "<rect x=\"{x}\" y=\"{y}\" width=\"{cw}\" height=\"{ch}\" fill=\"rgb({r},{g},{b})\" stroke=\"white\"/>");
            let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"white\">{v:.1}</text>", x + cw / 2.0, y + ch / 2.0 + 4.0);
        }
    }
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{r}</text>", left - 6.0, top + ch * i as f64 + ch / 2.0 + 4.0);
    }
    for (j, c) in cols.iter().enumerate() {
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{c}</text>", left + cw * j as f64 + cw / 2.0, top + ch * rows.len() as f64 + 16.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Line series sharing an x axis; optional symmetric error bars.
pub struct Series {
    pub label: String,
    pub y: Vec<f64>,
    pub err: Option<Vec<f64>>,
}

pub fn line_svg(title: &str, x_label: &str, y_label: &str, x: &[f64], series: &[Series]) -> String {
    let (w, h, left, right, top, bottom) = (560.0, 360.0, 60.0, 150.0, 36.0, 44.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let (x0, x1) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let y1 = series
        .iter()
        .flat_map(|s| s.y.iter().enumerate().map(move |(i, v)| v + s.err.as_ref().map_or(0.0, |e| e[i])))
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max)
        .max(1e-9)
        * 1.05;
    let xs = |v: f64| left + if x1 > x0 { (v - x0) / (x1 - x0) * pw } else { pw / 2.0 };
    let ys = |v: f64| top + ph - v / y1 * ph;
    let mut s = svg_header(w, h);
    let _ = writeln!(s, "<text x=\"{left}\" y=\"20\" font-weight=\"bold\">{title}</text>");
    let _ = writeln!(s, "<rect x=\"{left}\" y=\"{top}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>");
    for &v in x {
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{v}</text>", xs(v), top + ph + 16.0);
    }
    for k in 0..=4 {
        let v = y1 * k as f64 / 4.0;
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{v:.1}</text>", left - 6.0, ys(v) + 4.0);
    }
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>", left + pw / 2.0, h - 8.0);
    let _ = writeln!(s, "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">{y_label}</text>", top + ph / 2.0, top + ph / 2.0);
    for (k, se) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = x.iter().zip(&se.y).map(|(&a, &b)| format!("{:.2},{:.2}", xs(a), ys(b))).collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>", pts.join(" "));
        if let Some(err) = &se.err {
            for ((&a, &b), &e) in x.iter().zip(&se.y).zip(err) {
                let _ = writeln!(s, "<line x1=\"{0:.2}\" x2=\"{0:.2}\" y1=\"{1:.2}\" y2=\"{2:.2}\" stroke=\"{color}\"/>", xs(a), ys(b - e), ys(b + e));
            }
        }
        let ly = top + 16.0 * k as f64 + 8.0;
        let _ = writeln!(s, "<line x1=\"{0}\" x2=\"{1}\" y1=\"{ly}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>", w - right + 10.0, w - right + 30.0);
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\">{}</text>", w - right + 36.0, ly + 4.0, se.label);
    }
    s.push_str("</svg>\n");
    s
}

/// `table1.csv` and its plots.
pub fn write_grid_outputs(result: &GridResult, dir: &Path) -> Result<Vec<String>> {
    io::write_atomic(&dir.join("table1.csv"), result.table1_csv().as_bytes())?;
    let rows: Vec<String> = result.sigmas.iter().map(|s| format!("σ = {s}")).collect();
    let cols: Vec<String> = result.n_interferents.iter().map(|n| format!("N_I = {n}")).collect();
    let m = result.rmse_matrix();
    io::write_atomic(&dir.join("plots/table1_heatmap.svg"), heatmap_svg("RMSE", &rows, &cols, &m).as_bytes())?;
    let x: Vec<f64> = result.n_interferents.iter().map(|&n| n as f64).collect();
    let series: Vec<Series> = result.sigmas.iter().zip(&m).map(|(s, row)| Series { label: format!("σ = {s}"), y: row.clone(), err: None }).collect();
    io::write_atomic(&dir.join("plots/rmse_vs_n_interferents.svg"), line_svg("RMSE vs N_I", "N_I", "RMSE", &x, &series).as_bytes())?;
    let x: Vec<f64> = result.sigmas.clone();
    let series: Vec<Series> = result
        .n_interferents
        .iter()
        .enumerate()
        .map(|(j, n)| Series { label: format!("N_I = {n}"), y: m.iter().map(|row| row[j]).collect(), err: None })
        .collect();
    io::write_atomic(&dir.join("plots/rmse_vs_sigma.svg"), line_svg("RMSE vs σ", "σ", "RMSE", &x, &series).as_bytes())?;
    Ok(vec!["table1.csv".into(), "plots/table1_heatmap.svg".into(), "plots/rmse_vs_n_interferents.svg".into(), "plots/rmse_vs_sigma.svg".into()])
}

/// `table2.csv` and one plot per N_I.
pub fn write_comparison_outputs(result: &ComparisonResult, dir: &Path) -> Result<Vec<String>> {
    io::write_atomic(&dir.join("table2.csv"), result.table2_csv().as_bytes())?;
    let mut written = vec!["table2.csv".to_string()];
    let x: Vec<f64> = result.training_sizes.iter().map(|&s| s as f64).collect();
    let mut ns: Vec<usize> = result.rows.iter().map(|r| r.n_interferents).collect();
    ns.dedup();
    for n in ns {
        let mut methods: Vec<String> = Vec::new();
        for r in result.rows.iter().filter(|r| r.n_interferents == n) {
            if !methods.contains(&r.method) {
                methods.push(r.method.clone());
            }
        }
        let series: Vec<Series> = methods
            .iter()
            .map(|m| {
                let rows: Vec<&ComparisonRow> =
                    result.training_sizes.iter().filter_map(|&s| result.row(n, m, Some(s))).collect();
                Series { label: m.clone(), y: rows.iter().map(|r| r.mean).collect(), err: Some(rows.iter().map(|r| r.sd).collect()) }
            })
            .collect();
        let name = format!("plots/comparison_n_interferents_{n}.svg");
        let svg = line_svg(&format!("RMSE vs training size, N_I = {n}"), "training mixtures", "RMSE", &x, &series);
        io::write_atomic(&dir.join(&name), svg.as_bytes())?;
        written.push(name);
    }
    Ok(written)
}
