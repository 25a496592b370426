//! Data-driven polynomial chaos for farm power over (direction, speed).
//!
//! Each marginal gets its own orthonormal family, built by the discretized
//! Stieltjes procedure against the binned wind-rose masses. The 2-D basis is
//! the total-degree-truncated tensor product; coefficients come from a
//! least-squares fit to Latin hypercube samples, and the expected farm power
//! is the constant coefficient.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::farm_model::{FarmModel, Layout};
use crate::wind_resource::{sample_conditions, ConditionSample, WindRose, HOURS_PER_YEAR};

/// Hard cap on the expansion order.
pub const MAX_ORDER: usize = 10;

/// Weighted point set standing in for a marginal probability measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Drops zero-weight points and normalizes the rest to unit mass.
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Domain("points and weights differ in length".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Domain("measure weights must be non-negative".into()));
        }
        let (points, weights): (Vec<f64>, Vec<f64>) = points
            .into_iter()
            .zip(weights)
            .filter(|(_, w)| *w > 0.0)
            .unzip();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Domain("measure has no mass".into()));
        }
        Ok(Self {
            points,
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Gauss-Legendre rule on [-1, 1] with weights normalized to the uniform
    /// probability measure; exact for polynomials up to degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> Self {
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            points[i] = x;
            weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
        Self { points, weights }
    }

    pub fn distinct_support(&self) -> usize {
        let mut p = self.points.clone();
        p.sort_by(f64::total_cmp);
        p.dedup();
        p.len()
    }

    pub fn mean(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

/// Affine map from `[lo, hi]` onto `[-1, 1]`; a degenerate range maps to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub lo: f64,
    pub hi: f64,
}

impl Standardizer {
    pub fn apply(&self, x: f64) -> f64 {
        if self.hi > self.lo {
            2.0 * (x - self.lo) / (self.hi - self.lo) - 1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Direction,
    Speed,
}

/// Orthonormal polynomials `phi_0 = 1, phi_1, ...` with respect to one marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthoBasis1D {
    pub variable: Variable,
    pub standardizer: Standardizer,
    /// Monic three-term recurrence `p_{k+1} = (t - a_k) p_k - b_k p_{k-1}`.
    recurrence_a: Vec<f64>,
    recurrence_b: Vec<f64>,
    /// Squared norms of the monic polynomials.
    norms_sq: Vec<f64>,
    /// Row `k` holds the monomial coefficients (ascending powers of the
    /// standardized variable) of `phi_k`.
    pub monomial_coefficients: Vec<Vec<f64>>,
}

impl OrthoBasis1D {
    pub fn max_degree(&self) -> usize {
        self.norms_sq.len() - 1
    }

    /// `phi_0 .. phi_max_degree` at physical value `x`.
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.norms_sq.len());
        self.eval_into(x, &mut out);
        out
    }

    fn eval_into(&self, x: f64, out: &mut Vec<f64>) {
        out.clear();
        let t = self.standardizer.apply(x);
        let (mut prev, mut cur) = (0.0, 1.0);
        for k in 0..self.norms_sq.len() {
            out.push(cur / self.norms_sq[k].sqrt());
            if k + 1 < self.norms_sq.len() {
                let next = (t - self.recurrence_a[k]) * cur
                    - if k > 0 {
                        self.recurrence_b[k] * prev
                    } else {
                        0.0
                    };
                prev = cur;
                cur = next;
            }
        }
    }

    /// Inner products `<phi_i, phi_j>` under a measure given in physical units.
    pub fn gram_matrix(&self, measure: &DiscreteMeasure) -> DMatrix<f64> {
        let n = self.norms_sq.len();
        let mut g = DMatrix::zeros(n, n);
        for (x, w) in measure.points.iter().zip(&measure.weights) {
            let v = self.eval_all(*x);
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        g
    }
}

/// Builds the orthonormal family for `measure` (physical units) up to
/// `max_degree`, reducing the degree when the measure cannot support it.
pub fn build_basis(
    variable: Variable,
    measure: &DiscreteMeasure,
    standardizer: Standardizer,
    max_degree: usize,
) -> OrthoBasis1D {
    let support = measure.distinct_support();
    let mut degree = max_degree;
    if support <= degree {
        warn!(
            "{variable:?} measure has {support} support points; reducing basis degree from {max_degree} to {}",
            support - 1
        );
        degree = support - 1;
    }
    let t: Vec<f64> = measure
        .points
        .iter()
        .map(|&x| standardizer.apply(x))
        .collect();
    let w = &measure.weights;

    let inner =
        |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(w).map(|((x, y), w)| w * x * y).sum() };

    let mut rec_a = Vec::new();
    let mut norms_sq = vec![1.0];
    let mut values_prev = vec![0.0; t.len()];
    let mut values = vec![1.0; t.len()];
    let mut mono_prev: Vec<f64> = vec![];
    let mut mono: Vec<f64> = vec![1.0];
    let mut monic = vec![mono.clone()];

    for k in 0..degree {
        let tp: Vec<f64> = t.iter().zip(&values).map(|(t, p)| t * p).collect();
        let a_k = inner(&tp, &values) / norms_sq[k];
        let b_k = if k > 0 {
            norms_sq[k] / norms_sq[k - 1]
        } else {
            0.0
        };
        let next: Vec<f64> = values
            .iter()
            .zip(&values_prev)
            .zip(&t)
            .map(|((p, q), t)| (t - a_k) * p - b_k * q)
            .collect();
        let h = inner(&next, &next);
        if !(h > 1e-28 * norms_sq[0]) {
            warn!(
                "{variable:?} basis is ill-conditioned at degree {}; stopping at {k}",
                k + 1
            );
            break;
        }
        let mut next_mono = vec![0.0; k + 2];
        for (i, c) in mono.iter().enumerate() {
            next_mono[i + 1] += c;
            next_mono[i] -= a_k * c;
        }
        for (i, c) in mono_prev.iter().enumerate() {
            next_mono[i] -= b_k * c;
        }
        rec_a.push(a_k);
        norms_sq.push(h);
        values_prev = std::mem::replace(&mut values, next);
        mono_prev = std::mem::replace(&mut mono, next_mono.clone());
        monic.push(next_mono);
    }
    // recurrence_b[k] multiplies p_{k-1} when forming p_{k+1}
    let mut recurrence_b = vec![0.0; norms_sq.len()];
    for k in 1..norms_sq.len() {
        recurrence_b[k] = norms_sq[k] / norms_sq[k - 1];
    }

    let monomial_coefficients = monic
        .iter()
        .zip(&norms_sq)
        .map(|(c, h)| c.iter().map(|v| v / h.sqrt()).collect())
        .collect();
    OrthoBasis1D {
        variable,
        standardizer,
        recurrence_a: rec_a,
        recurrence_b,
        norms_sq,
        monomial_coefficients,
    }
}

/// Direction and speed bases for a wind rose, built on its binned masses.
pub fn wind_rose_bases(rose: &WindRose, max_degree: usize) -> Result<(OrthoBasis1D, OrthoBasis1D)> {
    let (dirs, dfreq): (Vec<f64>, Vec<f64>) = rose.direction_bins().unzip();
    let (dlo, dhi) = rose.direction_domain();
    let dir_measure = DiscreteMeasure::new(dirs, dfreq)?;
    let (speeds, sfreq): (Vec<f64>, Vec<f64>) = rose.speed_bins().into_iter().unzip();
    let (slo, shi) = rose.speed_model().domain();
    let speed_measure = DiscreteMeasure::new(speeds, sfreq)?;
    Ok((
        build_basis(
            Variable::Direction,
            &dir_measure,
            Standardizer { lo: dlo, hi: dhi },
            max_degree,
        ),
        build_basis(
            Variable::Speed,
            &speed_measure,
            Standardizer { lo: slo, hi: shi },
            max_degree,
        ),
    ))
}

/// Total-degree-truncated product basis `phi_i(xi1) * phi_j(xi2)`, `i + j <= order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorBasis {
    pub direction: OrthoBasis1D,
    pub speed: OrthoBasis1D,
    pub order: usize,
    pub indices: Vec<(usize, usize)>,
}

impl TensorBasis {
    pub fn new(direction: OrthoBasis1D, speed: OrthoBasis1D, order: usize) -> Self {
        let indices = Self::index_set(direction.max_degree(), speed.max_degree(), order);
        Self {
            direction,
            speed,
            order,
            indices,
        }
    }

    /// Graded index set; within a total degree the direction degree descends.
    pub fn index_set(max_dir: usize, max_speed: usize, order: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for total in 0..=order {
            for i in (0..=total).rev() {
                let j = total - i;
                if i <= max_dir && j <= max_speed {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn with_order(&self, order: usize) -> Self {
        Self::new(self.direction.clone(), self.speed.clone(), order)
    }

    /// Basis row at `xi = [direction, speed]` (physical units).
    pub fn eval(&self, xi: [f64; 2]) -> Vec<f64> {
        let a = self.direction.eval_all(xi[0]);
        let b = self.speed.eval_all(xi[1]);
        self.indices.iter().map(|&(i, j)| a[i] * b[j]).collect()
    }

    pub fn design_matrix(&self, xi: &[[f64; 2]]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(xi.len(), self.len());
        for (r, x) in xi.iter().enumerate() {
            for (c, v) in self.eval(*x).into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceModel {
    pub order: usize,
    pub indices: Vec<(usize, usize)>,
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub rank: usize,
    /// Mean k-fold validation RMSE at the selected order, when selection ran.
    pub cv_rmse: Option<f64>,
    pub seed: Option<u64>,
    pub xi: Vec<[f64; 2]>,
    pub responses: Vec<f64>,
}

impl PceModel {
    /// Expected response: the coefficient of the constant basis function.
    pub fn mean(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn predict(&self, basis: &TensorBasis, xi: [f64; 2]) -> f64 {
        let a = basis.direction.eval_all(xi[0]);
        let b = basis.speed.eval_all(xi[1]);
        self.indices
            .iter()
            .zip(&self.coefficients)
            .map(|(&(i, j), c)| c * a[i] * b[j])
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("PCE model serializes")
    }
}

fn least_squares(phi: DMatrix<f64>, rhs: &DVector<f64>) -> (DVector<f64>, usize) {
    let (m, p) = phi.shape();
    let svd = phi.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * (m.max(p) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let alpha = svd.solve(rhs, tol).expect("u and v were computed");
    (alpha, rank)
}

/// Least-squares coefficients for `basis` at the sampled inputs.
pub fn fit_pce(xi: &[[f64; 2]], responses: &[f64], basis: &TensorBasis) -> Result<PceModel> {
    if xi.len() != responses.len() {
        return Err(Error::Domain("sample and response counts differ".into()));
    }
    if xi.len() < basis.len() {
        return Err(Error::Domain(format!(
            "{} samples cannot determine {} coefficients",
            xi.len(),
            basis.len()
        )));
    }
    let phi = basis.design_matrix(xi);
    let rhs = DVector::from_column_slice(responses);
    let (alpha, rank) = least_squares(phi.clone(), &rhs);
    if rank < basis.len() {
        warn!(
            "PCE design matrix is rank deficient ({rank} < {}); using minimum-norm solution",
            basis.len()
        );
    }
    let residual_norm = (&phi * &alpha - &rhs).norm();
    Ok(PceModel {
        order: basis.order,
        indices: basis.indices.clone(),
        coefficients: alpha.iter().copied().collect(),
        residual_norm,
        rank,
        cv_rmse: None,
        seed: None,
        xi: xi.to_vec(),
        responses: responses.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub order: usize,
    /// `(order, mean validation RMSE)` for every order tried.
    pub scores: Vec<(usize, f64)>,
}

/// K-fold cross-validated choice of expansion order in `1..=max_order`.
///
/// Fold `f` holds the samples with `index % k_folds == f`. Orders whose
/// coefficient count exceeds the smallest training fold are not tried.
/// Near-ties resolve to the lower order. Falls back to order 0 when no
/// order fits.
pub fn select_order(
    xi: &[[f64; 2]],
    responses: &[f64],
    bases: (&OrthoBasis1D, &OrthoBasis1D),
    k_folds: usize,
    max_order: usize,
) -> OrderSelection {
    let n = xi.len();
    let k = k_folds.max(2);
    let mut scores = Vec::new();
    if n < k {
        return OrderSelection { order: 0, scores };
    }
    let min_train = n - n.div_ceil(k);
    let mut last_len = 0;
    for order in 1..=max_order.min(MAX_ORDER) {
        let basis = TensorBasis::new(bases.0.clone(), bases.1.clone(), order);
        if basis.len() > min_train {
            break;
        }
        if basis.len() == last_len {
            // saturated index set: same model as the previous order
            continue;
        }
        last_len = basis.len();
        let mut fold_rmse = Vec::with_capacity(k);
        for f in 0..k {
            let (mut tx, mut ty, mut vx, mut vy) = (vec![], vec![], vec![], vec![]);
            for i in 0..n {
                if i % k == f {
                    vx.push(xi[i]);
                    vy.push(responses[i]);
                } else {
                    tx.push(xi[i]);
                    ty.push(responses[i]);
                }
            }
            let (alpha, _) =
                least_squares(basis.design_matrix(&tx), &DVector::from_column_slice(&ty));
            let pred = basis.design_matrix(&vx) * alpha;
            let mse = pred
                .iter()
                .zip(&vy)
                .map(|(p, y)| (p - y).powi(2))
                .sum::<f64>()
                / vy.len() as f64;
            fold_rmse.push(mse.sqrt());
        }
        scores.push((order, fold_rmse.iter().sum::<f64>() / k as f64));
    }
    if scores.is_empty() {
        return OrderSelection { order: 0, scores };
    }
    let scale = (responses.iter().map(|y| y * y).sum::<f64>() / n as f64).sqrt();
    let best = scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let cutoff = best * (1.0 + 1e-6) + 1e-9 * scale;
    let order = scores
        .iter()
        .find(|s| s.1 <= cutoff)
        .map(|s| s.0)
        .unwrap_or(0);
    OrderSelection { order, scores }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PceOptions {
    pub max_order: usize,
    pub k_folds: usize,
}

impl Default for PceOptions {
    fn default() -> Self {
        Self {
            max_order: MAX_ORDER,
            k_folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceEstimate {
    pub aep_wh: f64,
    pub farm_power_calls: usize,
    pub model: PceModel,
}

/// Bases for one wind rose, reused across layout evaluations.
#[derive(Debug, Clone)]
pub struct PceAepEstimator {
    rose: WindRose,
    direction: OrthoBasis1D,
    speed: OrthoBasis1D,
    options: PceOptions,
}

impl PceAepEstimator {
    pub fn new(rose: WindRose, options: PceOptions) -> Result<Self> {
        let (direction, speed) = wind_rose_bases(&rose, options.max_order.min(MAX_ORDER))?;
        Ok(Self {
            rose,
            direction,
            speed,
            options,
        })
    }

    pub fn rose(&self) -> &WindRose {
        &self.rose
    }

    pub fn bases(&self) -> (&OrthoBasis1D, &OrthoBasis1D) {
        (&self.direction, &self.speed)
    }

    /// Fits a PCE to `n_samples` farm-power evaluations and returns
    /// `8760 * alpha_0`. Performs exactly `n_samples` farm power calls.
    pub fn estimate(
        &self,
        layout: &Layout,
        model: &FarmModel,
        n_samples: usize,
        seed: u64,
    ) -> Result<PceEstimate> {
        if n_samples < 2 {
            return Err(Error::Domain(format!(
                "PCE needs at least 2 samples, got {n_samples}"
            )));
        }
        let sample: ConditionSample = sample_conditions(&self.rose, n_samples, seed);
        let responses: Vec<f64> = sample
            .conditions
            .par_iter()
            .map(|c| model.farm_power(layout, c).total_w)
            .collect();
        let selection = select_order(
            &sample.xi,
            &responses,
            (&self.direction, &self.speed),
            self.options.k_folds,
            self.options.max_order,
        );
        let basis = TensorBasis::new(self.direction.clone(), self.speed.clone(), selection.order);
        let mut fitted = fit_pce(&sample.xi, &responses, &basis)?;
        fitted.cv_rmse = selection
            .scores
            .iter()
            .find(|s| s.0 == selection.order)
            .map(|s| s.1);
        fitted.seed = Some(seed);
        Ok(PceEstimate {
            aep_wh: HOURS_PER_YEAR * fitted.mean(),
            farm_power_calls: n_samples,
            model: fitted,
        })
    }
}

/// One-shot PCE AEP estimate; builds the bases on every call.
pub fn estimate_aep(
    layout: &Layout,
    rose: &WindRose,
    n_samples: usize,
    seed: u64,
    model: &FarmModel,
) -> Result<PceEstimate> {
    PceAepEstimator::new(rose.clone(), PceOptions::default())?
        .estimate(layout, model, n_samples, seed)
}
