//! Wind rose: empirical direction histogram times an independent speed
//! distribution, with Latin hypercube sampling and full-traversal AEP.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::farm_model::{FarmModel, Layout, WindCondition};

pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SpeedModel {
    /// Weibull speed truncated (and renormalized) to `[cut_in, cut_out]`.
    Weibull {
        shape: f64,
        scale: f64,
        cut_in: f64,
        cut_out: f64,
        bin_width: f64,
    },
    Constant {
        speed: f64,
    },
}

impl SpeedModel {
    pub fn weibull(shape: f64, scale: f64, cut_in: f64, cut_out: f64) -> Result<Self> {
        let m = SpeedModel::Weibull {
            shape,
            scale,
            cut_in,
            cut_out,
            bin_width: 1.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpeedModel::Weibull {
                shape,
                scale,
                cut_in,
                cut_out,
                bin_width,
            } => {
                if !(shape > 0.0 && scale > 0.0) {
                    return Err(Error::Config(format!(
                        "Weibull shape and scale must be positive (got {shape}, {scale})"
                    )));
                }
                if !(cut_in >= 0.0 && cut_out > cut_in) {
                    return Err(Error::Config(format!(
                        "need 0 <= cut_in < cut_out (got {cut_in}, {cut_out})"
                    )));
                }
                if !(bin_width > 0.0) {
                    return Err(Error::Config("speed bin width must be positive".into()));
                }
                let bins = (cut_out - cut_in) / bin_width;
                if (bins - bins.round()).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "speed range {cut_in}..{cut_out} is not a whole number of {bin_width} m/s bins"
                    )));
                }
                Ok(())
            }
            SpeedModel::Constant { speed } => {
                if !(speed >= 0.0) {
                    return Err(Error::Config(format!("constant speed {speed} is negative")));
                }
                Ok(())
            }
        }
    }

    fn weibull_cdf(shape: f64, scale: f64, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            -(-(u / scale).powf(shape)).exp_m1()
        }
    }

    /// Bin representative speeds (midpoints) and probabilities.
    pub fn bins(&self) -> Vec<(f64, f64)> {
        match *self {
            SpeedModel::Constant { speed } => vec![(speed, 1.0)],
            SpeedModel::Weibull {
                shape,
                scale,
                cut_in,
                cut_out,
                bin_width,
            } => {
                let n = ((cut_out - cut_in) / bin_width).round() as usize;
                let raw: Vec<(f64, f64)> = (0..n)
                    .map(|k| {
                        let a = cut_in + k as f64 * bin_width;
                        let b = a + bin_width;
                        let mass =
                            Self::weibull_cdf(shape, scale, b) - Self::weibull_cdf(shape, scale, a);
                        (0.5 * (a + b), mass)
                    })
                    .collect();
                let total: f64 = raw.iter().map(|b| b.1).sum();
                raw.into_iter().map(|(c, m)| (c, m / total)).collect()
            }
        }
    }

    /// Support of the continuous speed variable.
    pub fn domain(&self) -> (f64, f64) {
        match *self {
            SpeedModel::Constant { speed } => (speed, speed),
            SpeedModel::Weibull {
                cut_in, cut_out, ..
            } => (cut_in, cut_out),
        }
    }

    /// Inverse CDF of the truncated distribution; `p` in [0, 1].
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            SpeedModel::Constant { speed } => speed,
            SpeedModel::Weibull {
                shape,
                scale,
                cut_in,
                cut_out,
                ..
            } => {
                let fa = Self::weibull_cdf(shape, scale, cut_in);
                let fb = Self::weibull_cdf(shape, scale, cut_out);
                let f = fa + p.clamp(0.0, 1.0) * (fb - fa);
                let u = scale * (-(-f).ln_1p()).powf(1.0 / shape);
                u.clamp(cut_in, cut_out)
            }
        }
    }
}

/// Direction histogram (bin centers evenly spaced around the compass) and
/// speed distribution, assumed independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindRose {
    direction_centers: Vec<f64>,
    direction_freqs: Vec<f64>,
    speed: SpeedModel,
}

impl WindRose {
    pub fn new(
        direction_centers: Vec<f64>,
        frequencies: Vec<f64>,
        speed: SpeedModel,
    ) -> Result<Self> {
        speed.validate()?;
        let n = direction_centers.len();
        if n == 0 || n != frequencies.len() {
            return Err(Error::Format(
                "wind rose needs one frequency per direction bin".into(),
            ));
        }
        let width = 360.0 / n as f64;
        for (i, c) in direction_centers.iter().enumerate() {
            let expected = direction_centers[0] + i as f64 * width;
            if (c - expected).abs() > 1e-6 {
                return Err(Error::Format(format!(
                    "direction bins must be evenly spaced by {width} deg; row {} has {c}",
                    i + 1
                )));
            }
        }
        if let Some(f) = frequencies.iter().find(|f| !(**f >= 0.0) || !f.is_finite()) {
            return Err(Error::Format(format!("invalid direction frequency {f}")));
        }
        let total: f64 = frequencies.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Format(
                "direction frequencies sum to zero and cannot be normalized".into(),
            ));
        }
        Ok(Self {
            direction_centers,
            direction_freqs: frequencies.iter().map(|f| f / total).collect(),
            speed,
        })
    }

    /// Equal-frequency rose with `n_bins` directions starting at 0 deg.
    pub fn uniform(n_bins: usize, speed: SpeedModel) -> Result<Self> {
        let width = 360.0 / n_bins as f64;
        Self::new(
            (0..n_bins).map(|i| i as f64 * width).collect(),
            vec![1.0; n_bins],
            speed,
        )
    }

    /// Reads a `direction_deg,frequency` table.
    pub fn from_csv_str(text: &str, source: &Path, speed: SpeedModel) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            direction_deg: f64,
            frequency: f64,
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::Parse {
            path: source.to_path_buf(),
            line: 1,
            msg: e.to_string(),
        })?;
        if headers.iter().collect::<Vec<_>>() != ["direction_deg", "frequency"] {
            return Err(Error::Parse {
                path: source.to_path_buf(),
                line: 1,
                msg: "expected header `direction_deg,frequency`".into(),
            });
        }
        let (mut dirs, mut freqs) = (Vec::new(), Vec::new());
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                path: source.to_path_buf(),
                line: i + 2,
                msg: e.to_string(),
            })?;
            dirs.push(row.direction_deg);
            freqs.push(row.frequency);
        }
        Self::new(dirs, freqs, speed)
    }

    pub fn from_csv(path: &Path, speed: SpeedModel) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, path, speed)
    }

    pub fn speed_model(&self) -> &SpeedModel {
        &self.speed
    }

    pub fn bin_width_deg(&self) -> f64 {
        360.0 / self.direction_centers.len() as f64
    }

    pub fn direction_bins(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.direction_centers
            .iter()
            .copied()
            .zip(self.direction_freqs.iter().copied())
    }

    pub fn speed_bins(&self) -> Vec<(f64, f64)> {
        self.speed.bins()
    }

    /// All (direction, speed) cells with their joint probability.
    pub fn joint_cells(&self) -> Vec<(WindCondition, f64)> {
        let speeds = self.speed_bins();
        let mut cells = Vec::with_capacity(self.direction_centers.len() * speeds.len());
        for (dir, fd) in self.direction_bins() {
            for &(u, fu) in &speeds {
                cells.push((WindCondition::new(dir, u), fd * fu));
            }
        }
        cells
    }

    /// Unwrapped support of the direction variable: the first bin's lower edge
    /// through 360 deg later.
    pub fn direction_domain(&self) -> (f64, f64) {
        let lo = self.direction_centers[0] - 0.5 * self.bin_width_deg();
        (lo, lo + 360.0)
    }

    /// Direction bin centers, unwrapped so they increase from the first bin.
    pub fn unwrapped_direction_bins(&self) -> Vec<(f64, f64)> {
        let w = self.bin_width_deg();
        let c0 = self.direction_centers[0];
        self.direction_freqs
            .iter()
            .enumerate()
            .map(|(k, &f)| (c0 + k as f64 * w, f))
            .collect()
    }
}

/// Inverse of the step CDF of a binned distribution: the representative value
/// of the first bin whose cumulative mass exceeds `p`. Zero-mass bins are
/// never returned.
pub fn binned_quantile(bins: &[(f64, f64)], p: f64) -> f64 {
    let mut cum = 0.0;
    let mut last = bins[0].0;
    for &(value, mass) in bins {
        if mass > 0.0 {
            cum += mass;
            last = value;
            if p < cum {
                return value;
            }
        }
    }
    last
}

/// Wind conditions drawn for a PCE fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSample {
    pub conditions: Vec<WindCondition>,
    /// (unwrapped direction deg, speed m/s) pairs used as the polynomial inputs.
    pub xi: Vec<[f64; 2]>,
    pub seed: u64,
    pub method: String,
}

/// One stratified column: a permutation of the `n` strata plus uniform jitter.
pub fn lhs_column<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut strata: Vec<usize> = (0..n).collect();
    strata.shuffle(rng);
    strata
        .into_iter()
        .map(|s| (s as f64 + rng.random::<f64>()) / n as f64)
        .collect()
}

/// Latin hypercube sample of `n` conditions through the marginal inverse CDFs.
///
/// The marginals are the binned rose itself, so every sampled condition is a
/// traversal cell and the sample shares its measure with the PCE basis.
pub fn sample_conditions(rose: &WindRose, n: usize, seed: u64) -> ConditionSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir_u = lhs_column(n, &mut rng);
    let speed_u = lhs_column(n, &mut rng);
    let dir_bins = rose.unwrapped_direction_bins();
    let speed_bins = rose.speed_bins();
    let xi: Vec<[f64; 2]> = dir_u
        .iter()
        .zip(&speed_u)
        .map(|(&a, &b)| {
            [
                binned_quantile(&dir_bins, a),
                binned_quantile(&speed_bins, b),
            ]
        })
        .collect();
    ConditionSample {
        conditions: xi.iter().map(|x| WindCondition::new(x[0], x[1])).collect(),
        xi,
        seed,
        method: "lhs".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AepResult {
    pub aep_wh: f64,
    pub farm_power_calls: usize,
}

/// AEP by traversing every joint wind-rose cell.
pub fn baseline_aep(layout: &Layout, rose: &WindRose, model: &FarmModel) -> AepResult {
    let cells = rose.joint_cells();
    let powers: Vec<f64> = cells
        .par_iter()
        .map(|(cond, _)| model.farm_power(layout, cond).total_w)
        .collect();
    let mean_power: f64 = cells.iter().zip(&powers).map(|((_, f), p)| f * p).sum();
    AepResult {
        aep_wh: HOURS_PER_YEAR * mean_power,
        farm_power_calls: cells.len(),
    }
}
