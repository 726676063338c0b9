//! Classical multivariate calibration: OLS, ridge, PCR and PLS1, with
//! seeded k-fold cross-validation over their complexity parameter.
//!
//! All fitters mean-center the spectra and the concentrations, so a constant
//! offset added to every spectrum never changes a prediction.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative singular-value cutoff used for ranks and pseudo-inverses.
const RANK_RTOL: f64 = 1e-10;

/// Training spectra as rows with their target concentrations.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionDataset {
    x: DMatrix<f64>,
    c: DVector<f64>,
}

impl RegressionDataset {
    pub fn new(x: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        if x.nrows() != c.len() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), found: c.len() });
        }
        if x.nrows() == 0 {
            return Err(Error::Empty("regression dataset has no rows".into()));
        }
        if x.iter().chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("regression dataset contains non-finite values"));
        }
        Ok(Self { x, c })
    }

    pub fn from_rows(rows: &[Vec<f64>], c: &[f64]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid("spectra rows differ in length"));
        }
        Self::new(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]), DVector::from_column_slice(c))
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    fn subset(&self, rows: &[usize]) -> Self {
        Self { x: self.x.select_rows(rows), c: self.c.select_rows(rows) }
    }

    fn centered(&self) -> Centered {
        let x_mean = self.x.row_mean().transpose();
        let c_mean = self.c.mean();
        let mut xc = self.x.clone();
        for mut row in xc.row_iter_mut() {
            row -= x_mean.transpose();
        }
        Centered { xc, cc: self.c.add_scalar(-c_mean), x_mean, c_mean }
    }
}

struct Centered {
    xc: DMatrix<f64>,
    cc: DVector<f64>,
    x_mean: DVector<f64>,
    c_mean: f64,
}

impl Centered {
    fn model(&self, coef: DVector<f64>) -> LinearModel {
        LinearModel { x_mean: self.x_mean.clone(), c_mean: self.c_mean, coef }
    }
}

/// ĉ(x) = c̄ + (x − x̄)ᵀ b
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub x_mean: DVector<f64>,
    pub c_mean: f64,
    pub coef: DVector<f64>,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.coef.len() {
            return Err(Error::DimensionMismatch { expected: self.coef.len(), found: x.len() });
        }
        Ok(self.c_mean + x.iter().zip(self.x_mean.iter()).zip(self.coef.iter()).map(|((a, m), b)| (a - m) * b).sum::<f64>())
    }

    pub fn predict_rows(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.coef.len() {
            return Err(Error::DimensionMismatch { expected: self.coef.len(), found: x.ncols() });
        }
        let offset = self.c_mean - self.x_mean.dot(&self.coef);
        Ok((x * &self.coef).add_scalar(offset))
    }
}

/// b = V diag(f(s)) Uᵀ c over the numerically nonzero singular values.
fn spectral_fit(d: &Centered, keep: Option<usize>, filter: impl Fn(f64) -> f64) -> (LinearModel, usize) {
    let svd = d.xc.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref().expect("u requested"), svd.v_t.as_ref().expect("v_t requested"));
    let smax = svd.singular_values.max();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let rank = order.iter().filter(|&&i| svd.singular_values[i] > RANK_RTOL * smax).count();
    let used = keep.map_or(rank, |k| k.min(rank));
    let mut coef = DVector::zeros(d.xc.ncols());
    for &i in &order[..used] {
        let s = svd.singular_values[i];
        let proj = u.column(i).dot(&d.cc) * filter(s);
        coef += vt.row(i).transpose() * proj;
    }
    (d.model(coef), used)
}

/// Minimum-norm least squares.
pub fn fit_ols(ds: &RegressionDataset) -> Result<LinearModel> {
    Ok(spectral_fit(&ds.centered(), None, |s| 1.0 / s).0)
}

/// (XᵀX + λI)⁻¹Xᵀc on centered data; λ = 0 is the minimum-norm solution.
pub fn fit_ridge(ds: &RegressionDataset, lambda: f64) -> Result<LinearModel> {
    if !(lambda >= 0.0) {
        return Err(invalid("ridge penalty must be non-negative"));
    }
    Ok(spectral_fit(&ds.centered(), None, |s| s / (s * s + lambda)).0)
}

/// Least squares on the leading `n_comp` principal components.
pub fn fit_pcr(ds: &RegressionDataset, n_comp: usize) -> Result<LinearModel> {
    if n_comp == 0 {
        return Err(invalid("PCR needs at least one component"));
    }
    let (m, used) = spectral_fit(&ds.centered(), Some(n_comp), |s| 1.0 / s);
    if used < n_comp {
        log::debug!("PCR: {n_comp} components requested, data rank {used}");
    }
    Ok(m)
}

/// PLS1 fit with its score vectors (columns of T), for diagnostics.
pub fn fit_pls1_scores(ds: &RegressionDataset, n_comp: usize) -> Result<(LinearModel, DMatrix<f64>)> {
    if n_comp == 0 {
        return Err(invalid("PLS needs at least one component"));
    }
    let d = ds.centered();
    let mut x = d.xc.clone();
    let scale = x.norm().max(f64::MIN_POSITIVE);
    let mut ws: Vec<DVector<f64>> = Vec::new();
    let mut ps: Vec<DVector<f64>> = Vec::new();
    let mut qs: Vec<f64> = Vec::new();
    let mut ts: Vec<DVector<f64>> = Vec::new();
    for _ in 0..n_comp {
        let w = x.tr_mul(&d.cc);
        let wn = w.norm();
        if wn <= RANK_RTOL * scale * d.cc.norm().max(f64::MIN_POSITIVE) {
            log::debug!("PLS: stopped after {} of {n_comp} components", ws.len());
            break;
        }
        let w = w / wn;
        let t = &x * &w;
        let tt = t.norm_squared();
        if tt <= (RANK_RTOL * scale).powi(2) {
            break;
        }
        let p = x.tr_mul(&t) / tt;
        qs.push(d.cc.dot(&t) / tt);
        x -= &t * p.transpose();
        ws.push(w);
        ps.push(p);
        ts.push(t);
    }
    let a = ws.len();
    let mut coef = DVector::zeros(d.xc.ncols());
    let mut scores = DMatrix::zeros(d.xc.nrows(), a);
    if a > 0 {
        let w = DMatrix::from_columns(&ws);
        let p = DMatrix::from_columns(&ps);
        let ptw = p.tr_mul(&w);
        let inv = ptw.try_inverse().ok_or_else(|| Error::Internal("singular PLS loading system".into()))?;
        coef = w * inv * DVector::from_vec(qs);
        scores = DMatrix::from_columns(&ts);
    }
    Ok((d.model(coef), scores))
}

/// PLS1 by NIPALS, deflating X only.
pub fn fit_pls1(ds: &RegressionDataset, n_comp: usize) -> Result<LinearModel> {
    fit_pls1_scores(ds, n_comp).map(|(m, _)| m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ols,
    Ridge,
    Pcr,
    Pls,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ols => "OLS",
            Method::Ridge => "RR",
            Method::Pcr => "PCR",
            Method::Pls => "PLSR",
        }
    }

    pub fn fit(self, ds: &RegressionDataset, hyper: f64) -> Result<LinearModel> {
        match self {
            Method::Ols => fit_ols(ds),
            Method::Ridge => fit_ridge(ds, hyper),
            Method::Pcr => fit_pcr(ds, hyper as usize),
            Method::Pls => fit_pls1(ds, hyper as usize),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvPlan {
    pub folds: usize,
    /// Candidate component counts; empty means 1..=min(10, M − 1).
    pub components: Vec<usize>,
    pub ridge_lambdas: Vec<f64>,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self { folds: 3, components: Vec::new(), ridge_lambdas: logspace(-6.0, 3.0, 10), seed: 0 }
    }
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![10f64.powf(lo)],
        _ => (0..n).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect(),
    }
}

impl CvPlan {
    /// Candidates ordered from least to most complex.
    pub fn grid(&self, method: Method, samples: usize) -> Vec<f64> {
        match method {
            Method::Ols => vec![0.0],
            Method::Ridge => {
                let mut l = self.ridge_lambdas.clone();
                l.sort_by(|a, b| b.total_cmp(a));
                l
            }
            Method::Pcr | Method::Pls => {
                if self.components.is_empty() {
                    (1..=10.min(samples.saturating_sub(1)).max(1)).map(|k| k as f64).collect()
                } else {
                    self.components.iter().map(|&k| k as f64).collect()
                }
            }
        }
    }

    /// Fold label of every sample after a seeded shuffle.
    pub fn fold_assignment(&self, samples: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..samples).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let mut fold = vec![0; samples];
        for (pos, &i) in idx.iter().enumerate() {
            fold[i] = pos % self.folds;
        }
        fold
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvOutcome {
    pub method: Method,
    pub hyper: f64,
    pub cv_rmse: f64,
    pub model: LinearModel,
}

/// Grid search by mean fold RMSE, then refit on all samples. Ties keep the
/// less complex candidate.
pub fn cross_validate(ds: &RegressionDataset, plan: &CvPlan, method: Method) -> Result<CvOutcome> {
    if plan.folds < 2 || ds.len() < plan.folds {
        return Err(invalid(format!("need folds >= 2 and at least {} samples", plan.folds)));
    }
    let grid = plan.grid(method, ds.len());
    if grid.is_empty() {
        return Err(invalid("empty hyperparameter grid"));
    }
    let fold = plan.fold_assignment(ds.len());
    let splits: Vec<(RegressionDataset, RegressionDataset)> = (0..plan.folds)
        .map(|f| {
            let train: Vec<usize> = (0..ds.len()).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..ds.len()).filter(|&i| fold[i] == f).collect();
            (ds.subset(&train), ds.subset(&test))
        })
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for &h in &grid {
        let mut total = 0.0;
        for (train, test) in &splits {
            let pred = method.fit(train, h)?.predict_rows(&test.x)?;
            total += ((pred - &test.c).norm_squared() / test.len() as f64).sqrt();
        }
        let score = total / plan.folds as f64;
        if best.map_or(true, |(s, _)| score < s) {
            best = Some((score, h));
        }
    }
    let (cv_rmse, hyper) = best.expect("grid is nonempty");
    Ok(CvOutcome { method, hyper, cv_rmse, model: method.fit(ds, hyper)? })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), found: pred.len() });
    }
    if pred.is_empty() {
        return Err(Error::Empty("no predictions".into()));
    }
    Ok((pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64).sqrt())
}

/// RMSE, MAE and R² = 1 − SS_res/SS_tot.
pub fn metrics(pred: &[f64], truth: &[f64]) -> Result<Metrics> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), found: pred.len() });
    }
    if pred.len() < 2 {
        return Err(invalid("metrics need at least two points"));
    }
    let n = pred.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedMetric("R² is undefined for constant truth".into()));
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    let mae = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
    Ok(Metrics { rmse: (ss_res / n).sqrt(), mae, r2: 1.0 - ss_res / ss_tot })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn noiseless_ols_fits_training_rows() {
        let x = random(8, 20, 1);
        let beta = random(20, 1, 2).column(0).into_owned();
        let c = &x * &beta;
        let ds = RegressionDataset::new(x.clone(), c.clone()).unwrap();
        let pred = fit_ols(&ds).unwrap().predict_rows(&x).unwrap();
        assert!((pred - c).amax() < 1e-9);
    }

    #[test]
    fn ridge_zero_is_ols() {
        let x = random(30, 5, 3);
        let c = random(30, 1, 4).column(0).into_owned();
        let ds = RegressionDataset::new(x.clone(), c).unwrap();
        let a = fit_ols(&ds).unwrap().predict_rows(&x).unwrap();
        let b = fit_ridge(&ds, 0.0).unwrap().predict_rows(&x).unwrap();
        assert!((a - b).amax() < 1e-8);
    }

    #[test]
    fn ridge_matches_normal_equations() {
        let x = random(12, 6, 5);
        let c = random(12, 1, 6).column(0).into_owned();
        let ds = RegressionDataset::new(x, c).unwrap();
        let d = ds.centered();
        let want = (d.xc.tr_mul(&d.xc) + DMatrix::identity(6, 6) * 0.7).try_inverse().unwrap() * d.xc.tr_mul(&d.cc);
        let got = fit_ridge(&ds, 0.7).unwrap().coef;
        assert!((got - want).amax() < 1e-10);
    }

    #[test]
    fn pls_rank_one_exact() {
        let s = random(1, 15, 7).row(0).into_owned();
        let a = [0.5, -1.0, 2.0, 0.3, 1.7, -0.2];
        let x = DMatrix::from_fn(6, 15, |i, j| a[i] * s[j]);
        let c = DVector::from_fn(6, |i, _| 3.0 * a[i] + 1.0);
        let ds = RegressionDataset::new(x.clone(), c.clone()).unwrap();
        let pred = fit_pls1(&ds, 1).unwrap().predict_rows(&x).unwrap();
        assert!((pred - c).amax() < 1e-10);
    }

    #[test]
    fn pls_scores_orthogonal() {
        let x = random(20, 40, 8);
        let c = random(20, 1, 9).column(0).into_owned();
        let ds = RegressionDataset::new(x, c).unwrap();
        let (_, t) = fit_pls1_scores(&ds, 6).unwrap();
        let g = t.tr_mul(&t);
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert!(g[(i, j)].abs() < 1e-10 * g[(i, i)].max(1.0));
                }
            }
        }
    }

    #[test]
    fn full_rank_pcr_is_ols() {
        let x = random(25, 6, 10);
        let c = random(25, 1, 11).column(0).into_owned();
        let ds = RegressionDataset::new(x.clone(), c).unwrap();
        let a = fit_ols(&ds).unwrap().predict_rows(&x).unwrap();
        let b = fit_pcr(&ds, 6).unwrap().predict_rows(&x).unwrap();
        assert!((a - b).amax() < 1e-8);
    }

    #[test]
    fn offset_invariance() {
        let x = random(15, 10, 12);
        let c = random(15, 1, 13).column(0).into_owned();
        let ds = RegressionDataset::new(x.clone(), c.clone()).unwrap();
        let shifted = RegressionDataset::new(x.add_scalar(5.0), c).unwrap();
        let probe = random(3, 10, 14);
        for m in [Method::Ols, Method::Ridge, Method::Pcr, Method::Pls] {
            let h = if m == Method::Ridge { 0.1 } else { 3.0 };
            let a = m.fit(&ds, h).unwrap().predict_rows(&probe).unwrap();
            let b = m.fit(&shifted, h).unwrap().predict_rows(&probe.add_scalar(5.0)).unwrap();
            assert!((a - b).amax() < 1e-8, "{m:?}");
        }
    }

    #[test]
    fn cv_single_candidate_and_determinism() {
        let x = random(12, 8, 15);
        let c = random(12, 1, 16).column(0).into_owned();
        let ds = RegressionDataset::new(x, c).unwrap();
        let plan = CvPlan { components: vec![2], ..CvPlan::default() };
        let r = cross_validate(&ds, &plan, Method::Pls).unwrap();
        assert_eq!(r.hyper, 2.0);
        assert_eq!(cross_validate(&ds, &CvPlan::default(), Method::Ridge).unwrap(), cross_validate(&ds, &CvPlan::default(), Method::Ridge).unwrap());
    }

    #[test]
    fn cv_prefers_recovering_complexity() {
        // two latent factors, noiseless: two components predict exactly
        let f = random(18, 2, 17);
        let load = random(2, 30, 18);
        let x = &f * &load;
        let c = f.column(0) * 2.0 - f.column(1);
        let ds = RegressionDataset::new(x, c).unwrap();
        let plan = CvPlan { components: vec![1, 2], ..CvPlan::default() };
        assert_eq!(cross_validate(&ds, &plan, Method::Pcr).unwrap().hyper, 2.0);
    }

    #[test]
    fn folds_are_balanced() {
        let plan = CvPlan::default();
        let f = plan.fold_assignment(10);
        assert_eq!((0..3).map(|k| f.iter().filter(|&&v| v == k).count()).collect::<Vec<_>>(), vec![4, 3, 3]);
    }

    #[test]
    fn metric_definitions() {
        let t = [1.0, 2.0, 3.0, 4.0, 5.0];
        let m = metrics(&t, &t).unwrap();
        assert_eq!((m.rmse, m.mae, m.r2), (0.0, 0.0, 1.0));
        let p: Vec<f64> = t.iter().map(|v| v + 1.0).collect();
        let m = metrics(&p, &t).unwrap();
        assert_abs_diff_eq!(m.rmse, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mae, 1.0, epsilon = 1e-15);
        // hand computation: residuals (0.5, -1, 0, 2, -0.5), SS_tot = 10
        let p = [1.5, 1.0, 3.0, 6.0, 4.5];
        let m = metrics(&p, &t).unwrap();
        assert_abs_diff_eq!(m.rmse, (5.5f64 / 5.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(m.mae, 4.0 / 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.r2, 1.0 - 5.5 / 10.0, epsilon = 1e-15);
        assert!(matches!(metrics(&[1.0, 2.0], &[3.0, 3.0]), Err(Error::UndefinedMetric(_))));
    }
}
