//! Synthetic analytes, baselines, mixtures and reference measurements.
//!
//! All randomness flows from explicit seeds: every generated object draws
//! from its own ChaCha8 stream keyed by (seed, role, …), so datasets are
//! reproducible and independent of generation order.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io;
use crate::model::WidthSampling;
use crate::sampler::draw_inv_gamma;
use crate::spectral::{PeakParams, Spectrum, WavenumberGrid};

/// Smooth background: a least-squares polynomial through jittered control points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSpec {
    pub control_points: usize,
    pub order: usize,
    pub height_lo: f64,
    pub height_hi: f64,
    pub jitter_sd: f64,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        Self { control_points: 5, order: 3, height_lo: 5.0, height_hi: 25.0, jitter_sd: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimProtocol {
    pub wavenumber_lo: f64,
    pub wavenumber_hi: f64,
    pub points: usize,
    pub peaks_per_analyte: usize,
    pub conc_lo: f64,
    pub conc_hi: f64,
    pub c_pure: f64,
    pub sigma_ref: f64,
    pub sigma_mix: f64,
    pub n_interferents: usize,
    pub baseline: BaselineSpec,
    pub width: WidthSampling,
    /// Draw fresh interferents for every mixture; otherwise one set is
    /// shared by the whole dataset.
    pub redraw_interferents: bool,
    pub seed: u64,
}

impl Default for SimProtocol {
    fn default() -> Self {
        Self {
            wavenumber_lo: 400.0,
            wavenumber_hi: 1600.0,
            points: 300,
            peaks_per_analyte: 10,
            conc_lo: 0.0,
            conc_hi: 60.0,
            c_pure: 30.0,
            sigma_ref: 1.0,
            sigma_mix: 1.0,
            n_interferents: 1,
            baseline: BaselineSpec::default(),
            width: WidthSampling::default(),
            redraw_interferents: true,
            seed: 0,
        }
    }
}

impl SimProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavenumber_lo < self.wavenumber_hi) || self.points < 2 {
            return Err(invalid("protocol grid must have at least two points over a nonempty range"));
        }
        if !(self.conc_lo >= 0.0 && self.conc_lo < self.conc_hi) {
            return Err(invalid("concentration range must satisfy 0 <= lo < hi"));
        }
        if !(self.c_pure > 0.0) || self.sigma_ref < 0.0 || self.sigma_mix < 0.0 {
            return Err(invalid("c_pure must be positive and noise levels non-negative"));
        }
        let b = &self.baseline;
        if b.control_points <= b.order || b.height_lo > b.height_hi || b.jitter_sd < 0.0 {
            return Err(invalid("baseline needs more control points than its order and a valid height range"));
        }
        if !(self.width.shape > 0.0 && self.width.scale > 0.0) {
            return Err(invalid("width distribution parameters must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<WavenumberGrid> {
        WavenumberGrid::uniform(self.wavenumber_lo, self.wavenumber_hi, self.points)
    }
}

/// A random analyte: peak shapes and their amplitudes at unit concentration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAnalyte {
    pub peaks: Vec<PeakParams>,
    pub amplitudes: Vec<f64>,
}

impl SyntheticAnalyte {
    /// Spectrum at unit concentration.
    pub fn unit_signal(&self, nu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; nu.len()];
        for (p, a) in self.peaks.iter().zip(&self.amplitudes) {
            for (o, &v) in out.iter_mut().zip(nu) {
                *o += a * p.eval(v);
            }
        }
        out
    }
}

/// Mix `keys` into `base` (SplitMix64 finalizer per key).
pub fn derive_seed(base: u64, keys: &[u64]) -> u64 {
    let mut h = base;
    for &k in keys {
        h = h.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(k.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

pub fn stream(base: u64, keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, keys))
}

const ROLE_TARGET: u64 = 1;
const ROLE_REFERENCE: u64 = 2;
const ROLE_MIXTURE: u64 = 3;
const ROLE_INTERFERENTS: u64 = 4;

pub fn gen_analyte<R: Rng + ?Sized>(protocol: &SimProtocol, rng: &mut R) -> SyntheticAnalyte {
    let (lo, hi) = (protocol.wavenumber_lo, protocol.wavenumber_hi);
    let mut peaks = Vec::with_capacity(protocol.peaks_per_analyte);
    let mut amplitudes = Vec::with_capacity(protocol.peaks_per_analyte);
    for _ in 0..protocol.peaks_per_analyte {
        let l = rng.gen_range(lo..=hi);
        let w = draw_inv_gamma(rng, protocol.width.shape, protocol.width.scale);
        let rho: f64 = rng.gen();
        let a: f64 = rng.gen();
        peaks.push(PeakParams::new(l, w, rho));
        amplitudes.push(a);
    }
    SyntheticAnalyte { peaks, amplitudes }
}

/// Least-squares polynomial coefficients (ascending powers) of `ys` on `xs`.
pub fn fit_polynomial(xs: &[f64], ys: &[f64], order: usize) -> Result<Vec<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), found: ys.len() });
    }
    if xs.len() <= order {
        return Err(invalid("need more points than the polynomial order"));
    }
    let v = DMatrix::from_fn(xs.len(), order + 1, |i, j| xs[i].powi(j as i32));
    let svd = v.svd(true, true);
    let c = svd
        .solve(&DVector::from_column_slice(ys), 1e-12)
        .map_err(|e| Error::Internal(e.to_string()))?;
    Ok(c.as_slice().to_vec())
}

pub fn eval_polynomial(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Baseline through control `heights` placed evenly over the grid span.
/// Positions are mapped to [-1, 1] for conditioning.
pub fn baseline_from_controls(nu: &[f64], heights: &[f64], order: usize) -> Result<Vec<f64>> {
    let (lo, hi) = (nu[0], nu[nu.len() - 1]);
    let m = heights.len();
    let ts: Vec<f64> = (0..m).map(|j| -1.0 + 2.0 * j as f64 / (m - 1) as f64).collect();
    let coefs = fit_polynomial(&ts, heights, order)?;
    Ok(nu
        .iter()
        .map(|&v| eval_polynomial(&coefs, -1.0 + 2.0 * (v - lo) / (hi - lo)))
        .collect())
}

pub fn gen_baseline<R: Rng + ?Sized>(protocol: &SimProtocol, rng: &mut R) -> Result<Vec<f64>> {
    let b = &protocol.baseline;
    let jitter = Normal::new(0.0, b.jitter_sd).map_err(|e| invalid(e.to_string()))?;
    let heights: Vec<f64> = (0..b.control_points)
        .map(|_| rng.gen_range(b.height_lo..=b.height_hi) + jitter.sample(rng))
        .collect();
    baseline_from_controls(protocol.grid()?.values(), &heights, b.order)
}

fn add_noise<R: Rng + ?Sized>(y: &mut [f64], sigma: f64, rng: &mut R) -> Result<()> {
    if sigma > 0.0 {
        let n = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
        for v in y.iter_mut() {
            *v += n.sample(rng);
        }
    }
    Ok(())
}

/// Everything that went into one mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Target first, then the interferents.
    pub concentrations: Vec<f64>,
    pub target_signal: Vec<f64>,
    pub interferent_signal: Vec<f64>,
    pub baseline: Vec<f64>,
}

/// y = Σ c_a f_a(ν) + baseline + N(0, σ²_mix).
pub fn gen_mixture<R: Rng + ?Sized>(
    target: &SyntheticAnalyte,
    interferents: &[SyntheticAnalyte],
    concentrations: &[f64],
    protocol: &SimProtocol,
    rng: &mut R,
) -> Result<(Spectrum, GroundTruth)> {
    if concentrations.len() != interferents.len() + 1 {
        return Err(Error::DimensionMismatch { expected: interferents.len() + 1, found: concentrations.len() });
    }
    let grid = protocol.grid()?;
    let nu = grid.values();
    let target_signal: Vec<f64> = target.unit_signal(nu).iter().map(|v| v * concentrations[0]).collect();
    let mut interferent_signal = vec![0.0; nu.len()];
    for (a, &c) in interferents.iter().zip(&concentrations[1..]) {
        for (o, v) in interferent_signal.iter_mut().zip(a.unit_signal(nu)) {
            *o += c * v;
        }
    }
    let baseline = gen_baseline(protocol, rng)?;
    let mut y: Vec<f64> = (0..nu.len()).map(|i| target_signal[i] + interferent_signal[i] + baseline[i]).collect();
    add_noise(&mut y, protocol.sigma_mix, rng)?;
    let truth = GroundTruth { concentrations: concentrations.to_vec(), target_signal, interferent_signal, baseline };
    Ok((Spectrum::new(grid, y)?, truth))
}

/// c_pure · f_target + baseline + N(0, σ²_ref).
pub fn gen_reference<R: Rng + ?Sized>(target: &SyntheticAnalyte, protocol: &SimProtocol, rng: &mut R) -> Result<Spectrum> {
    let grid = protocol.grid()?;
    let baseline = gen_baseline(protocol, rng)?;
    let mut y: Vec<f64> = target
        .unit_signal(grid.values())
        .iter()
        .zip(&baseline)
        .map(|(s, b)| protocol.c_pure * s + b)
        .collect();
    add_noise(&mut y, protocol.sigma_ref, rng)?;
    Spectrum::new(grid, y)
}

/// Concentrations of one mixture as stored in `truth.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureTruth {
    pub id: usize,
    pub concentrations: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub protocol: SimProtocol,
    pub mixtures: usize,
    pub target: SyntheticAnalyte,
    /// Present when the interferents are shared across the dataset.
    pub interferents: Option<Vec<SyntheticAnalyte>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub reference: Spectrum,
    pub mixtures: Vec<Spectrum>,
    pub truth: Vec<MixtureTruth>,
}

/// The target analyte of a protocol; it depends on the seed only, so every
/// dataset generated from one seed shares it.
pub fn protocol_target(protocol: &SimProtocol) -> SyntheticAnalyte {
    gen_analyte(protocol, &mut stream(protocol.seed, &[ROLE_TARGET]))
}

pub fn protocol_reference(protocol: &SimProtocol, target: &SyntheticAnalyte) -> Result<Spectrum> {
    gen_reference(target, protocol, &mut stream(protocol.seed, &[ROLE_REFERENCE]))
}

/// Shared interferent set for the fixed-component mode.
pub fn protocol_interferents(protocol: &SimProtocol) -> Vec<SyntheticAnalyte> {
    let mut rng = stream(protocol.seed, &[ROLE_INTERFERENTS, protocol.n_interferents as u64]);
    (0..protocol.n_interferents).map(|_| gen_analyte(protocol, &mut rng)).collect()
}

/// Mixture `index` of the dataset defined by `protocol`.
///
/// Each ingredient has its own stream keyed by (seed, index, ingredient), so
/// cells that differ only in N_I or σ share their common ingredients: the
/// first interferents, the concentrations, the baseline and the standardized
/// noise pattern.
pub fn protocol_mixture(
    protocol: &SimProtocol,
    target: &SyntheticAnalyte,
    shared: Option<&[SyntheticAnalyte]>,
    index: usize,
) -> Result<(Spectrum, GroundTruth)> {
    let sub = |key: u64| stream(protocol.seed, &[ROLE_MIXTURE, index as u64, key]);
    let mut conc = vec![sub(0).gen_range(protocol.conc_lo..=protocol.conc_hi)];
    let mut drawn = Vec::new();
    for j in 0..protocol.n_interferents {
        let mut rng = sub(2 + j as u64);
        if shared.is_none() {
            drawn.push(gen_analyte(protocol, &mut rng));
        }
        conc.push(rng.gen_range(protocol.conc_lo..=protocol.conc_hi));
    }
    let interferents = shared.unwrap_or(&drawn);
    gen_mixture(target, interferents, &conc, protocol, &mut sub(1))
}

pub fn gen_dataset(protocol: &SimProtocol, mixtures: usize) -> Result<Dataset> {
    protocol.validate()?;
    let target = protocol_target(protocol);
    let reference = protocol_reference(protocol, &target)?;
    let shared = (!protocol.redraw_interferents).then(|| protocol_interferents(protocol));
    let mut specs = Vec::with_capacity(mixtures);
    let mut truth = Vec::with_capacity(mixtures);
    for id in 0..mixtures {
        let (s, t) = protocol_mixture(protocol, &target, shared.as_deref(), id)?;
        specs.push(s);
        truth.push(MixtureTruth { id, concentrations: t.concentrations });
    }
    Ok(Dataset {
        meta: DatasetMeta { protocol: protocol.clone(), mixtures, target, interferents: shared },
        reference,
        mixtures: specs,
        truth,
    })
}

fn mixture_file(dir: &Path, id: usize) -> std::path::PathBuf {
    dir.join("mixtures").join(format!("{id:03}.csv"))
}

impl Dataset {
    /// `meta.json`, `reference.csv`, `mixtures/NNN.csv`, `truth.csv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("mixtures"))?;
        io::save_json(&dir.join("meta.json"), &self.meta)?;
        io::save_spectrum(&dir.join("reference.csv"), &self.reference)?;
        for (id, m) in self.mixtures.iter().enumerate() {
            io::save_spectrum(&mixture_file(dir, id), m)?;
        }
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let mut header = vec!["mixture".to_string(), "target".to_string()];
            header.extend((1..=self.meta.protocol.n_interferents).map(|i| format!("interferent_{i}")));
            w.write_record(&header).map_err(|e| Error::Internal(e.to_string()))?;
            for t in &self.truth {
                let mut row = vec![t.id.to_string()];
                row.extend(t.concentrations.iter().map(f64::to_string));
                w.write_record(&row).map_err(|e| Error::Internal(e.to_string()))?;
            }
            w.flush()?;
        }
        io::write_atomic(&dir.join("truth.csv"), &buf)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: DatasetMeta = io::load_json(&dir.join("meta.json"))?;
        let reference = io::load_spectrum(&dir.join("reference.csv"))?;
        let mixtures = (0..meta.mixtures)
            .map(|id| io::load_spectrum(&mixture_file(dir, id)))
            .collect::<Result<Vec<_>>>()?;
        let mut rdr = csv::Reader::from_path(dir.join("truth.csv")).map_err(|e| Error::Parse(e.to_string()))?;
        let mut truth = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let mut fields = rec.iter();
            let id = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse("bad mixture id in truth.csv".into()))?;
            let concentrations = fields
                .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad concentration '{s}'"))))
                .collect::<Result<Vec<_>>>()?;
            truth.push(MixtureTruth { id, concentrations });
        }
        Ok(Self { meta, reference, mixtures, truth })
    }

    pub fn target_truth(&self) -> Vec<f64> {
        self.truth.iter().map(|t| t.concentrations[0]).collect()
    }
}

/// One cell of the environment study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub n_interferents: usize,
    pub sigma: f64,
    pub mixtures: usize,
    pub seed: u64,
}

impl DatasetDescriptor {
    pub fn protocol(&self, base: &SimProtocol) -> SimProtocol {
        SimProtocol {
            n_interferents: self.n_interferents,
            sigma_mix: self.sigma,
            seed: self.seed,
            redraw_interferents: true,
            ..base.clone()
        }
    }
}

/// Row-major (σ outer, N_I inner) list of environment cells.
pub fn grid_descriptors(n_interferents: &[usize], sigmas: &[f64], mixtures: usize, seed: u64) -> Vec<DatasetDescriptor> {
    sigmas
        .iter()
        .flat_map(|&sigma| {
            n_interferents
                .iter()
                .map(move |&n| DatasetDescriptor { n_interferents: n, sigma, mixtures, seed })
        })
        .collect()
}

/// A process-monitoring analog: a pure reference of the target at a known
/// concentration and daily culture samples whose target level falls while
/// medium components drift and the baseline wanders. Every measurement is a
/// stack of noisy repeats over a wider raw window, one repeat carrying a
/// cosmic-ray spike, all on top of a water/optics background that is also
/// measured on its own.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlucoseScenario {
    pub days: usize,
    pub c_pure: f64,
    pub conc_start: f64,
    pub conc_end: f64,
    pub medium_components: usize,
    pub repeats: usize,
    pub sigma_repeat: f64,
    pub raw_lo: f64,
    pub raw_hi: f64,
    pub raw_points: usize,
    pub seed: u64,
}

impl Default for GlucoseScenario {
    fn default() -> Self {
        Self {
            days: 10,
            c_pure: 40.0,
            conc_start: 35.0,
            conc_end: 4.0,
            medium_components: 4,
            repeats: 10,
            sigma_repeat: 2.0,
            raw_lo: 200.0,
            raw_hi: 1800.0,
            raw_points: 400,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlucoseData {
    pub reference: Vec<Spectrum>,
    pub water: Vec<Spectrum>,
    pub samples: Vec<Vec<Spectrum>>,
    pub truth: Vec<f64>,
}

impl GlucoseScenario {
    fn analyte_protocol(&self) -> SimProtocol {
        SimProtocol { wavenumber_lo: 420.0, wavenumber_hi: 1580.0, seed: self.seed, ..SimProtocol::default() }
    }

    pub fn target(&self) -> SyntheticAnalyte {
        gen_analyte(&self.analyte_protocol(), &mut stream(self.seed, &[ROLE_TARGET, 40]))
    }

    pub fn generate(&self) -> Result<GlucoseData> {
        if self.days < 2 || self.repeats < 1 || !(self.c_pure > 0.0) {
            return Err(invalid("scenario needs at least two days, one repeat and c_pure > 0"));
        }
        let grid = WavenumberGrid::uniform(self.raw_lo, self.raw_hi, self.raw_points)?;
        let nu = grid.values();
        let proto = self.analyte_protocol();
        let target = self.target();
        let mut rng = stream(self.seed, &[ROLE_INTERFERENTS, 40]);
        let medium: Vec<SyntheticAnalyte> =
            (0..self.medium_components).map(|_| gen_analyte(&proto, &mut rng)).collect();
        // each medium component drifts linearly between two random levels
        let levels: Vec<(f64, f64)> = (0..self.medium_components)
            .map(|_| (rng.gen_range(2.0..25.0), rng.gen_range(2.0..25.0)))
            .collect();
        // water bands plus a smooth optical background, common to every measurement
        let water_bands = [
            (PeakParams::new(1640.0, 90.0, 0.6), 25.0),
            (PeakParams::new(500.0, 250.0, 0.3), 15.0),
        ];
        let background: Vec<f64> = nu
            .iter()
            .map(|&v| {
                let t = (v - self.raw_lo) / (self.raw_hi - self.raw_lo);
                water_bands.iter().map(|(p, a)| a * p.eval(v)).sum::<f64>() + 8.0 + 4.0 * t
            })
            .collect();
        let baseline_at = |day: f64, rng: &mut ChaCha8Rng| -> Result<Vec<f64>> {
            let heights: Vec<f64> = (0..5)
                .map(|j| 6.0 + 10.0 * day + 3.0 * (j as f64 * 0.7 + day * 2.0).sin() + 0.5 * rng.gen::<f64>())
                .collect();
            baseline_from_controls(nu, &heights, 3)
        };
        let noise = Normal::new(0.0, self.sigma_repeat).map_err(|e| invalid(e.to_string()))?;
        let measure = |clean: &[f64], rng: &mut ChaCha8Rng| -> Result<Vec<Spectrum>> {
            let spiked = rng.gen_range(0..self.repeats);
            let at = rng.gen_range(0..clean.len());
            (0..self.repeats)
                .map(|r| {
                    let mut y: Vec<f64> = clean.iter().map(|c| c + noise.sample(rng)).collect();
                    if r == spiked && self.repeats > 2 {
                        y[at] += 500.0;
                    }
                    Spectrum::new(grid.clone(), y)
                })
                .collect()
        };

        let mut rng = stream(self.seed, &[ROLE_REFERENCE, 40]);
        let unit = target.unit_signal(nu);
        let ref_base = baseline_at(0.0, &mut rng)?;
        let ref_clean: Vec<f64> = (0..nu.len())
            .map(|i| self.c_pure * unit[i] + 0.3 * ref_base[i] + background[i])
            .collect();
        let reference = measure(&ref_clean, &mut rng)?;
        let water = measure(&background, &mut rng)?;

        let mut samples = Vec::with_capacity(self.days);
        let mut truth = Vec::with_capacity(self.days);
        for d in 0..self.days {
            let mut rng = stream(self.seed, &[ROLE_MIXTURE, 40, d as u64]);
            let frac = d as f64 / (self.days - 1) as f64;
            let c = (self.conc_start + (self.conc_end - self.conc_start) * frac.powf(0.8) + rng.gen_range(-1.0..1.0))
                .max(0.5);
            let base = baseline_at(frac, &mut rng)?;
            let mut clean: Vec<f64> = (0..nu.len()).map(|i| c * unit[i] + base[i] + background[i]).collect();
            for (a, (l0, l1)) in medium.iter().zip(&levels) {
                let level = l0 + (l1 - l0) * frac;
                for (o, s) in clean.iter_mut().zip(a.unit_signal(nu)) {
                    *o += level * s;
                }
            }
            samples.push(measure(&clean, &mut rng)?);
            truth.push(c);
        }
        Ok(GlucoseData { reference, water, samples, truth })
    }
}
