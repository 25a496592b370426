//! Universal Kriging with a polynomial trend and anisotropic Gaussian
//! correlation, plus the expected-improvement acquisition.
//!
//! Responses are standardized to zero mean and unit variance before fitting;
//! correlation length-scales come from maximizing the concentrated
//! log-likelihood with multi-start L-BFGS in log space.

use std::sync::Mutex;

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use log::{debug, info, warn};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendKind {
    Constant,
    Linear,
    Quadratic,
}

impl TrendKind {
    pub fn n_terms(self, d: usize) -> usize {
        match self {
            TrendKind::Constant => 1,
            TrendKind::Linear => d + 1,
            TrendKind::Quadratic => (d + 1) * (d + 2) / 2,
        }
    }

    /// Trend regressors at `x`: 1, then x_i, then x_i x_j for i <= j.
    pub fn basis(self, x: &[f64]) -> Vec<f64> {
        let mut g = Vec::with_capacity(self.n_terms(x.len()));
        g.push(1.0);
        if self != TrendKind::Constant {
            g.extend_from_slice(x);
        }
        if self == TrendKind::Quadratic {
            for i in 0..x.len() {
                for j in i..x.len() {
                    g.push(x[i] * x[j]);
                }
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendSelection {
    /// Quadratic when the data over-determine it, else linear, else constant.
    Auto,
    Constant,
    Linear,
    Quadratic,
}

impl TrendSelection {
    pub fn resolve(self, n: usize, d: usize) -> TrendKind {
        match self {
            TrendSelection::Constant => TrendKind::Constant,
            TrendSelection::Linear => TrendKind::Linear,
            TrendSelection::Quadratic => TrendKind::Quadratic,
            TrendSelection::Auto => {
                if n > TrendKind::Quadratic.n_terms(d) {
                    TrendKind::Quadratic
                } else {
                    if d > 1 {
                        info!(
                            "{n} samples cannot support a {}-term quadratic trend; using linear trend",
                            TrendKind::Quadratic.n_terms(d)
                        );
                    }
                    if n > TrendKind::Linear.n_terms(d) {
                        TrendKind::Linear
                    } else {
                        TrendKind::Constant
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrigingOptions {
    pub trend: TrendSelection,
    pub nugget: f64,
    pub max_nugget: f64,
    /// Likelihood-search starts; a supplied warm start counts as one of them.
    pub n_starts: usize,
    pub max_iters: u64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub seed: u64,
}

impl Default for KrigingOptions {
    fn default() -> Self {
        Self {
            trend: TrendSelection::Auto,
            nugget: 1e-8,
            max_nugget: 1e-6,
            n_starts: 8,
            max_iters: 50,
            theta_min: 1e-3,
            theta_max: 1e2,
            seed: 0,
        }
    }
}

/// Factorized training data at fixed hyperparameters.
#[derive(Debug, Clone)]
struct Factorization {
    nugget: f64,
    l: DMatrix<f64>,
    /// Q factor of `L^-1 F`, columns = trend terms.
    q: DMatrix<f64>,
    /// R factor of `L^-1 F`.
    rf: DMatrix<f64>,
    beta: DVector<f64>,
    /// `R^-1 (y - F beta)`.
    alpha: DVector<f64>,
    sigma2: f64,
    log_det_half: f64,
}

fn correlation(theta: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..theta.len() {
        let d = a[k] - b[k];
        s += theta[k] * d * d;
    }
    (-s).exp()
}

fn correlation_matrix(x: &[Vec<f64>], theta: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut r = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            let c = correlation(theta, &x[i], &x[j]);
            r[(i, j)] = c;
            r[(j, i)] = c;
        }
    }
    r
}

fn factorize(
    x: &[Vec<f64>],
    y: &DVector<f64>,
    f: &DMatrix<f64>,
    theta: &[f64],
    nugget: f64,
    max_nugget: f64,
) -> Result<Factorization> {
    let rc = correlation_matrix(x, theta);
    let n = x.len();
    let mut nugget = nugget;
    let chol = loop {
        let mut r = rc.clone();
        for i in 0..n {
            r[(i, i)] += nugget;
        }
        if let Some(c) = Cholesky::<f64, Dyn>::new(r) {
            break c;
        }
        if nugget * 10.0 > max_nugget * (1.0 + 1e-9) {
            return Err(Error::Numerical(format!(
                "correlation matrix not positive definite with nugget {nugget:e}"
            )));
        }
        nugget *= 10.0;
        debug!("escalating nugget to {nugget:e}");
    };
    let l = chol.l();
    let ft = l
        .solve_lower_triangular(f)
        .expect("Cholesky factor is invertible");
    let yt = l
        .solve_lower_triangular(y)
        .expect("Cholesky factor is invertible");
    let qr = ft.clone().qr();
    let (q, rf) = (qr.q(), qr.r());
    let qty = q.transpose() * &yt;
    let beta = rf
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("trend regressors are linearly dependent".into()))?;
    let resid = &yt - &ft * &beta;
    let sigma2 = resid.norm_squared() / n as f64;
    let alpha = l
        .transpose()
        .solve_upper_triangular(&resid)
        .expect("Cholesky factor is invertible");
    let log_det_half = l.diagonal().iter().map(|d| d.ln()).sum();
    Ok(Factorization {
        nugget,
        l,
        q,
        rf,
        beta,
        alpha,
        sigma2,
        log_det_half,
    })
}

struct Likelihood<'a> {
    x: &'a [Vec<f64>],
    y: &'a DVector<f64>,
    f: &'a DMatrix<f64>,
    nugget: f64,
    max_nugget: f64,
    lo: f64,
    hi: f64,
    cache: Mutex<Option<CachedEval>>,
}

/// Last `(z, cost, gradient)` evaluated.
type CachedEval = (Vec<f64>, f64, Vec<f64>);

impl Likelihood<'_> {
    fn sigmoid(z: f64) -> f64 {
        1.0 / (1.0 + (-z).exp())
    }

    fn to_log_theta(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .map(|&z| self.lo + (self.hi - self.lo) * Self::sigmoid(z))
            .collect()
    }

    fn z_of_log_theta(&self, eta: &[f64]) -> Vec<f64> {
        eta.iter()
            .map(|&e| {
                let p = ((e - self.lo) / (self.hi - self.lo)).clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            })
            .collect()
    }

    /// Negative concentrated log-likelihood and its gradient in log-theta.
    fn neg_log_likelihood(&self, log_theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let theta: Vec<f64> = log_theta.iter().map(|e| e.exp()).collect();
        let fac = factorize(self.x, self.y, self.f, &theta, self.nugget, self.max_nugget)?;
        let n = self.x.len();
        let sigma2 = fac.sigma2.max(1e-300);
        let nll = 0.5 * n as f64 * sigma2.ln() + fac.log_det_half;

        // W = R^-1 - alpha alpha^T / sigma2; dNLL/dtheta_k = -1/2 sum W_ij D_k,ij Rc_ij
        let l_inv = fac
            .l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("Cholesky factor is invertible");
        let r_inv = l_inv.transpose() * &l_inv;
        let d = theta.len();
        let mut grad = vec![0.0; d];
        for i in 0..n {
            for j in 0..i {
                let w = r_inv[(i, j)] - fac.alpha[i] * fac.alpha[j] / sigma2;
                let rc = correlation(&theta, &self.x[i], &self.x[j]);
                let wr = w * rc;
                for (g, (a, b)) in grad.iter_mut().zip(self.x[i].iter().zip(&self.x[j])) {
                    *g -= wr * (a - b) * (a - b);
                }
            }
        }
        for k in 0..d {
            grad[k] *= theta[k];
        }
        Ok((nll, grad))
    }

    fn evaluate(&self, z: &[f64]) -> std::result::Result<(f64, Vec<f64>), argmin::core::Error> {
        if let Some((pz, c, g)) = self.cache.lock().unwrap().as_ref() {
            if pz.as_slice() == z {
                return Ok((*c, g.clone()));
            }
        }
        let eta = self.to_log_theta(z);
        let (c, g_eta) = self
            .neg_log_likelihood(&eta)
            .map_err(|e| argmin::core::Error::msg(e.to_string()))?;
        let g: Vec<f64> = z
            .iter()
            .zip(&g_eta)
            .map(|(&z, &g)| {
                let s = Self::sigmoid(z);
                g * (self.hi - self.lo) * s * (1.0 - s)
            })
            .collect();
        *self.cache.lock().unwrap() = Some((z.to_vec(), c, g.clone()));
        Ok((c, g))
    }
}

impl CostFunction for &Likelihood<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, z: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.evaluate(z)?.0)
    }
}

impl Gradient for &Likelihood<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, z: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        Ok(self.evaluate(z)?.1)
    }
}

/// Serializable snapshot of a fitted model; refactorized on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigingDocument {
    pub inputs: Vec<Vec<f64>>,
    pub responses: Vec<f64>,
    pub theta: Vec<f64>,
    pub trend: TrendKind,
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub nugget: f64,
    pub y_mean: f64,
    pub y_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone)]
pub struct KrigingModel {
    x: Vec<Vec<f64>>,
    y_raw: Vec<f64>,
    y_mean: f64,
    y_std: f64,
    theta: Vec<f64>,
    trend: TrendKind,
    /// `None` for a constant response.
    fac: Option<Factorization>,
    log_likelihood: f64,
}

/// Merges rows closer than `1e-12` (max norm), averaging their responses.
fn deduplicate(x: &[Vec<f64>], y: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(x.len());
    let mut sums: Vec<(f64, usize)> = Vec::with_capacity(x.len());
    for (row, &v) in x.iter().zip(y) {
        let dup = xs
            .iter()
            .position(|r| r.iter().zip(row).all(|(a, b)| (a - b).abs() <= 1e-12));
        match dup {
            Some(i) => {
                sums[i].0 += v;
                sums[i].1 += 1;
            }
            None => {
                xs.push(row.clone());
                sums.push((v, 1));
            }
        }
    }
    let ys = sums.into_iter().map(|(s, c)| s / c as f64).collect();
    (xs, ys)
}

impl KrigingModel {
    /// Fits trend, variance and length-scales by maximum likelihood.
    pub fn fit(x: &[Vec<f64>], y: &[f64], opts: &KrigingOptions) -> Result<Self> {
        Self::fit_from(x, y, opts, None)
    }

    /// As [`KrigingModel::fit`], with `theta0` as the first likelihood start.
    pub fn fit_from(
        x: &[Vec<f64>],
        y: &[f64],
        opts: &KrigingOptions,
        theta0: Option<&[f64]>,
    ) -> Result<Self> {
        let (x, y_raw, y_mean, y_std, trend) = Self::prepare(x, y, opts)?;
        let d = x[0].len();
        if y_std == 0.0 {
            return Ok(Self::constant(x, y_raw, y_mean, d, trend));
        }
        let ys = DVector::from_iterator(x.len(), y_raw.iter().map(|v| (v - y_mean) / y_std));
        let f = Self::trend_matrix(&x, trend);
        let problem = Likelihood {
            x: &x,
            y: &ys,
            f: &f,
            nugget: opts.nugget,
            max_nugget: opts.max_nugget,
            lo: opts.theta_min.ln(),
            hi: opts.theta_max.ln(),
            cache: Mutex::new(None),
        };

        let mut starts: Vec<Vec<f64>> = Vec::new();
        if let Some(t0) = theta0.filter(|t| t.len() == d) {
            starts.push(t0.iter().map(|t| t.ln()).collect());
        }
        // default start: unit length-scale per scaled axis
        starts.push(vec![0.0; d]);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let n_extra = opts.n_starts.max(1).saturating_sub(starts.len());
        let strata: Vec<Vec<f64>> = (0..d)
            .map(|_| crate::wind_resource::lhs_column(n_extra, &mut rng))
            .collect();
        for s in 0..n_extra {
            starts.push(
                strata
                    .iter()
                    .map(|col| problem.lo + (problem.hi - problem.lo) * col[s])
                    .collect(),
            );
        }
        starts.truncate(opts.n_starts.max(1));

        let mut best: Option<(f64, Vec<f64>)> = None;
        for (i, eta0) in starts.iter().enumerate() {
            let z0 = problem.z_of_log_theta(eta0);
            let start_cost = problem.evaluate(&z0).ok().map(|r| r.0);
            let solver = LBFGS::new(MoreThuenteLineSearch::new(), 7)
                .with_tolerance_grad(1e-6)
                .and_then(|s| s.with_tolerance_cost(1e-10));
            let outcome = solver.and_then(|solver| {
                Executor::new(&problem, solver)
                    .configure(|st| st.param(z0.clone()).max_iters(opts.max_iters))
                    .run()
            });
            let candidate = match outcome {
                Ok(res) => {
                    let st = res.state();
                    st.get_best_param()
                        .cloned()
                        .map(|p| (st.get_best_cost(), p))
                }
                Err(e) => {
                    debug!("likelihood start {i} failed: {e}");
                    None
                }
            };
            let candidate = candidate
                .filter(|(c, _)| c.is_finite())
                .or_else(|| start_cost.map(|c| (c, z0.clone())));
            if let Some((c, z)) = candidate {
                // strict improvement keeps the earliest start on ties
                if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
                    best = Some((c, z));
                }
            }
        }
        let (_, z) = best.ok_or_else(|| {
            Error::Numerical("no likelihood start produced a valid factorization".into())
        })?;
        let theta: Vec<f64> = problem.to_log_theta(&z).iter().map(|e| e.exp()).collect();
        Self::assemble(x, y_raw, y_mean, y_std, ys, f, theta, trend, opts)
    }

    /// Builds the model at fixed length-scales `theta` (no likelihood search).
    pub fn fit_fixed(
        x: &[Vec<f64>],
        y: &[f64],
        theta: &[f64],
        opts: &KrigingOptions,
    ) -> Result<Self> {
        let (x, y_raw, y_mean, y_std, trend) = Self::prepare(x, y, opts)?;
        let d = x[0].len();
        if theta.len() != d {
            return Err(Error::Domain(format!(
                "theta has {} entries for {d}-dimensional inputs",
                theta.len()
            )));
        }
        if y_std == 0.0 {
            return Ok(Self::constant(x, y_raw, y_mean, d, trend));
        }
        let ys = DVector::from_iterator(x.len(), y_raw.iter().map(|v| (v - y_mean) / y_std));
        let f = Self::trend_matrix(&x, trend);
        Self::assemble(x, y_raw, y_mean, y_std, ys, f, theta.to_vec(), trend, opts)
    }

    #[allow(clippy::type_complexity)]
    fn prepare(
        x: &[Vec<f64>],
        y: &[f64],
        opts: &KrigingOptions,
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>, f64, f64, TrendKind)> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Domain(format!(
                "need matching non-empty inputs and responses ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        let d = x[0].len();
        if d == 0 || x.iter().any(|r| r.len() != d) {
            return Err(Error::Domain(
                "input rows must share a non-zero dimension".into(),
            ));
        }
        let (x, y_raw) = deduplicate(x, y);
        let n = x.len();
        let y_mean = y_raw.iter().sum::<f64>() / n as f64;
        let var = y_raw.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_std = if var.sqrt() <= 1e-12 * y_mean.abs().max(1e-300) || var == 0.0 {
            0.0
        } else {
            var.sqrt()
        };
        let trend = opts.trend.resolve(n, d);
        Ok((x, y_raw, y_mean, y_std, trend))
    }

    fn constant(
        x: Vec<Vec<f64>>,
        y_raw: Vec<f64>,
        y_mean: f64,
        d: usize,
        trend: TrendKind,
    ) -> Self {
        Self {
            x,
            y_raw,
            y_mean,
            y_std: 0.0,
            theta: vec![1.0; d],
            trend,
            fac: None,
            log_likelihood: f64::INFINITY,
        }
    }

    fn trend_matrix(x: &[Vec<f64>], trend: TrendKind) -> DMatrix<f64> {
        let p = trend.n_terms(x[0].len());
        let mut f = DMatrix::zeros(x.len(), p);
        for (i, row) in x.iter().enumerate() {
            for (j, v) in trend.basis(row).into_iter().enumerate() {
                f[(i, j)] = v;
            }
        }
        f
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        x: Vec<Vec<f64>>,
        y_raw: Vec<f64>,
        y_mean: f64,
        y_std: f64,
        ys: DVector<f64>,
        f: DMatrix<f64>,
        theta: Vec<f64>,
        trend: TrendKind,
        opts: &KrigingOptions,
    ) -> Result<Self> {
        let fac = factorize(&x, &ys, &f, &theta, opts.nugget, opts.max_nugget)?;
        if fac.nugget > opts.nugget {
            warn!("Kriging fit needed nugget {:e}", fac.nugget);
        }
        let n = x.len() as f64;
        let log_likelihood = -0.5 * n * fac.sigma2.max(1e-300).ln() - fac.log_det_half;
        Ok(Self {
            x,
            y_raw,
            y_mean,
            y_std,
            theta,
            trend,
            fac: Some(fac),
            log_likelihood,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn n_train(&self) -> usize {
        self.x.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn trend(&self) -> TrendKind {
        self.trend
    }

    pub fn nugget(&self) -> f64 {
        self.fac.as_ref().map_or(0.0, |f| f.nugget)
    }

    /// Process variance on the standardized scale.
    pub fn sigma2(&self) -> f64 {
        self.fac.as_ref().map_or(0.0, |f| f.sigma2)
    }

    pub fn beta(&self) -> Vec<f64> {
        self.fac
            .as_ref()
            .map_or_else(Vec::new, |f| f.beta.iter().copied().collect())
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn training_inputs(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn training_responses(&self) -> &[f64] {
        &self.y_raw
    }

    pub fn standardize(&self, y: f64) -> f64 {
        if self.y_std > 0.0 {
            (y - self.y_mean) / self.y_std
        } else {
            0.0
        }
    }

    pub fn y_scale(&self) -> (f64, f64) {
        (self.y_mean, self.y_std)
    }

    fn check_dim(&self, x: &[f64]) {
        assert_eq!(x.len(), self.dim(), "query dimension mismatch");
    }

    /// Mean on the standardized scale only (cheaper than [`Self::predict_standardized`]).
    pub fn predict_mean_standardized(&self, x: &[f64]) -> f64 {
        self.check_dim(x);
        let Some(fac) = &self.fac else { return 0.0 };
        let g = self.trend.basis(x);
        let trend: f64 = g.iter().zip(fac.beta.iter()).map(|(a, b)| a * b).sum();
        let resid: f64 = self
            .x
            .iter()
            .zip(fac.alpha.iter())
            .map(|(xi, a)| a * correlation(&self.theta, x, xi))
            .sum();
        trend + resid
    }

    /// Universal-Kriging mean and standard deviation on the standardized scale.
    pub fn predict_standardized(&self, x: &[f64]) -> Prediction {
        self.check_dim(x);
        let Some(fac) = &self.fac else {
            return Prediction { mean: 0.0, sd: 0.0 };
        };
        let n = self.x.len();
        let r = DVector::from_iterator(n, self.x.iter().map(|xi| correlation(&self.theta, x, xi)));
        let g = DVector::from_vec(self.trend.basis(x));
        let mean = g.dot(&fac.beta) + r.dot(&fac.alpha);
        let v = fac.l.solve_lower_triangular(&r).expect("invertible");
        // u = F~^T v - g with F~ = Q Rf, so (F~^T F~)^-1 = Rf^-1 Rf^-T
        let u = fac.rf.transpose() * (fac.q.transpose() * &v) - g;
        let w = fac
            .rf
            .transpose()
            .solve_lower_triangular(&u)
            .expect("trend factor is invertible");
        let var = fac.sigma2 * (1.0 - v.norm_squared() + w.norm_squared());
        Prediction {
            mean,
            sd: var.max(0.0).sqrt(),
        }
    }

    /// Prediction on the response scale.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        if self.fac.is_none() {
            self.check_dim(x);
            return Prediction {
                mean: self.y_mean,
                sd: 0.0,
            };
        }
        let p = self.predict_standardized(x);
        Prediction {
            mean: self.y_mean + self.y_std * p.mean,
            sd: self.y_std * p.sd,
        }
    }

    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        self.y_mean + self.y_std * self.predict_mean_standardized(x)
    }

    pub fn to_document(&self) -> KrigingDocument {
        KrigingDocument {
            inputs: self.x.clone(),
            responses: self.y_raw.clone(),
            theta: self.theta.clone(),
            trend: self.trend,
            beta: self.beta(),
            sigma2: self.sigma2(),
            nugget: self.nugget(),
            y_mean: self.y_mean,
            y_std: self.y_std,
        }
    }

    pub fn from_document(doc: &KrigingDocument) -> Result<Self> {
        let trend = match doc.trend {
            TrendKind::Constant => TrendSelection::Constant,
            TrendKind::Linear => TrendSelection::Linear,
            TrendKind::Quadratic => TrendSelection::Quadratic,
        };
        let opts = KrigingOptions {
            trend,
            nugget: doc.nugget.max(f64::MIN_POSITIVE),
            max_nugget: doc.nugget.max(f64::MIN_POSITIVE),
            ..KrigingOptions::default()
        };
        Self::fit_fixed(&doc.inputs, &doc.responses, &doc.theta, &opts)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Expected improvement of a Gaussian prediction over `f_best` (maximization).
pub fn expected_improvement(mean: f64, sd: f64, f_best: f64) -> f64 {
    let improvement = mean - f_best;
    if !(sd > 0.0) {
        return improvement.max(0.0);
    }
    let z = improvement / sd;
    (improvement * normal_cdf(z) + sd * normal_pdf(z)).max(0.0)
}

impl KrigingModel {
    /// EI at `x` with `f_best` on the standardized response scale.
    pub fn expected_improvement(&self, x: &[f64], f_best: f64) -> f64 {
        let p = self.predict_standardized(x);
        expected_improvement(p.mean, p.sd, f_best)
    }
}

/// Uniform draws in `[0, 1)^d`, for tests and diagnostics.
pub fn random_points(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect()
}
