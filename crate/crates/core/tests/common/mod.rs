//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use windfarm_sbo::kriging::KrigingModel;

fn gauss(theta: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (-theta
        .iter()
        .zip(a.iter().zip(b))
        .map(|(t, (x, y))| t * (x - y).powi(2))
        .sum::<f64>())
    .exp()
}

/// Universal Kriging mean and sd on the standardized scale, from dense LU
/// solves with the model's length-scales and nugget.
pub fn dense_prediction(m: &KrigingModel, q: &[f64]) -> (f64, f64) {
    let x = m.training_inputs();
    let n = x.len();
    let theta = m.theta();
    let mut r = DMatrix::from_fn(n, n, |i, j| gauss(theta, &x[i], &x[j]));
    for i in 0..n {
        r[(i, i)] += m.nugget();
    }
    let lu = r.lu();
    let trend = m.trend();
    let p = trend.n_terms(m.dim());
    let f = DMatrix::from_fn(n, p, |i, j| trend.basis(&x[i])[j]);
    let y = DVector::from_iterator(n, m.training_responses().iter().map(|v| m.standardize(*v)));
    let rinv_f = lu.solve(&f).unwrap();
    let rinv_y = lu.solve(&y).unwrap();
    let ftrf = f.transpose() * &rinv_f;
    let ftrf_lu = ftrf.lu();
    let beta = ftrf_lu.solve(&(f.transpose() * &rinv_y)).unwrap();
    let resid = &y - &f * &beta;
    let rinv_resid = lu.solve(&resid).unwrap();
    let sigma2 = resid.dot(&rinv_resid) / n as f64;
    let rq = DVector::from_iterator(n, x.iter().map(|xi| gauss(theta, q, xi)));
    let rinv_rq = lu.solve(&rq).unwrap();
    let g = DVector::from_vec(trend.basis(q));
    let mean = g.dot(&beta) + rq.dot(&rinv_resid);
    let u = f.transpose() * &rinv_rq - &g;
    let var = sigma2 * (1.0 - rq.dot(&rinv_rq) + u.dot(&ftrf_lu.solve(&u).unwrap()));
    (mean, var.max(0.0).sqrt())
}

pub fn test_function(x: &[f64]) -> f64 {
    (6.0 * x[0]).sin() + 2.0 * (x[1] - 0.4).powi(2) + 0.5 * x[0] * x[2]
}
