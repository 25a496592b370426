//! Configuration file, layout files and the `power`, `aep` and `optimize`
//! commands.
//!
//! A run is described by one flat TOML file. Relative paths inside it are
//! resolved against the file's directory. Every `optimize` run writes a
//! `manifest.toml` holding the fully resolved configuration, which can be
//! passed back as `--config` to reproduce the run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::farm_model::{
    FarmGrid, FarmModel, Layout, Point, TurbineSpec, WakeParams, WindCondition,
    NREL_5MW_DIAMETER_M, NREL_5MW_HUB_HEIGHT_M,
};
use crate::kriging::{KrigingOptions, TrendSelection};
use crate::optimizer::{
    direct_optimize, sbo_run, write_archive_csv, write_history_csv, write_text, AepMode, EiScale,
    GaConfig, SboConfig, Siting,
};
use crate::pce::{PceAepEstimator, PceOptions};
use crate::wind_resource::{baseline_aep, SpeedModel, WindRose};

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "WFLO_OUTPUT_DIR";

const BUILTIN_ROSE: &str = include_str!("../data/wind_rose.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedMode {
    Weibull,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OptimizeMode {
    Direct,
    Sbo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectAep {
    Traversal,
    Pce,
}

/// Every key a config file may set. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// CSV `speed_ms,ct,power_w`; the built-in NREL 5 MW table when unset.
    pub turbine_file: Option<PathBuf>,
    pub rotor_diameter_m: f64,
    pub hub_height_m: f64,
    /// CSV `direction_deg,frequency`; the built-in rose when unset.
    pub wind_rose_file: Option<PathBuf>,
    pub speed_mode: SpeedMode,
    pub weibull_shape: f64,
    pub weibull_scale: f64,
    pub cut_in: f64,
    pub cut_out: f64,
    pub speed_bin_width: f64,
    pub constant_speed: f64,

    pub farm_width_d: f64,
    pub farm_height_d: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub n_turbines: usize,

    pub k_star: f64,
    pub rotor_grid_points: usize,

    pub pce_samples: usize,
    pub pce_max_order: usize,
    pub pce_folds: usize,

    pub kriging_trend: TrendSelection,
    pub kriging_nugget: f64,
    pub kriging_max_nugget: f64,
    pub kriging_starts: usize,
    pub kriging_max_iters: u64,
    pub kriging_theta_min: f64,
    pub kriging_theta_max: f64,

    pub ga_population: usize,
    pub ga_generations: usize,
    pub ga_crossover_rate: f64,
    pub ga_mutation_rate: f64,
    pub ga_tournament: usize,
    pub ga_penalty: f64,
    pub ga_elitism: usize,
    pub ga_stall_generations: usize,

    pub sbo_initial_multiplier: usize,
    pub sbo_use_ei: bool,
    pub sbo_ei_threshold: f64,
    pub sbo_ei_scale: EiScale,
    pub sbo_max_evaluations: Option<usize>,
    pub sbo_reoptimize_every: usize,
    pub sbo_duplicate_retries: usize,

    pub optimize_mode: OptimizeMode,
    pub direct_aep: DirectAep,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ga = GaConfig::default();
        let kr = KrigingOptions::default();
        let sbo = SboConfig::default();
        let pce = PceOptions::default();
        let wake = WakeParams::default();
        Self {
            turbine_file: None,
            rotor_diameter_m: NREL_5MW_DIAMETER_M,
            hub_height_m: NREL_5MW_HUB_HEIGHT_M,
            wind_rose_file: None,
            speed_mode: SpeedMode::Weibull,
            weibull_shape: 2.0,
            weibull_scale: 8.0,
            cut_in: 3.0,
            cut_out: 25.0,
            speed_bin_width: 1.0,
            constant_speed: 8.0,
            farm_width_d: 8.0,
            farm_height_d: 8.0,
            grid_nx: 9,
            grid_ny: 9,
            n_turbines: 8,
            k_star: wake.k_star,
            rotor_grid_points: wake.rotor_grid_points,
            pce_samples: sbo.n_pce_samples,
            pce_max_order: pce.max_order,
            pce_folds: pce.k_folds,
            kriging_trend: kr.trend,
            kriging_nugget: kr.nugget,
            kriging_max_nugget: kr.max_nugget,
            kriging_starts: kr.n_starts,
            kriging_max_iters: kr.max_iters,
            kriging_theta_min: kr.theta_min,
            kriging_theta_max: kr.theta_max,
            ga_population: ga.population_size,
            ga_generations: ga.max_generations,
            ga_crossover_rate: ga.crossover_rate,
            ga_mutation_rate: ga.mutation_rate,
            ga_tournament: ga.tournament_size,
            ga_penalty: ga.penalty_coefficient,
            ga_elitism: ga.elitism,
            ga_stall_generations: ga.stall_generations,
            sbo_initial_multiplier: sbo.initial_multiplier,
            sbo_use_ei: sbo.use_ei,
            sbo_ei_threshold: sbo.ei_threshold,
            sbo_ei_scale: sbo.ei_scale,
            sbo_max_evaluations: sbo.max_evaluations,
            sbo_reoptimize_every: sbo.reoptimize_every,
            sbo_duplicate_retries: sbo.max_duplicate_retries,
            optimize_mode: OptimizeMode::Sbo,
            direct_aep: DirectAep::Traversal,
            seed: 0,
            output_dir: PathBuf::from("output"),
            threads: 0,
        }
    }
}

/// Everything a command needs, built from a validated config.
pub struct Setup {
    pub config: RunConfig,
    pub model: FarmModel,
    pub rose: WindRose,
    pub siting: Siting,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, source: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| {
                text[..s.start.min(text.len())].matches('\n').count() + 1
            });
            Error::Parse {
                path: source.to_path_buf(),
                line,
                msg: e.message().to_string(),
            }
        })
    }

    /// Reads a config file and makes its paths absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text, path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = std::path::absolute(&base).map_err(|e| Error::io(&base, e))?;
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.turbine_file.as_mut() {
            fix(p);
        }
        if let Some(p) = self.wind_rose_file.as_mut() {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    /// Applies the output-directory environment override, if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            let dir = PathBuf::from(dir);
            self.output_dir = std::path::absolute(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn speed_model(&self) -> Result<SpeedModel> {
        let m = match self.speed_mode {
            SpeedMode::Weibull => SpeedModel::Weibull {
                shape: self.weibull_shape,
                scale: self.weibull_scale,
                cut_in: self.cut_in,
                cut_out: self.cut_out,
                bin_width: self.speed_bin_width,
            },
            SpeedMode::Constant => SpeedModel::Constant {
                speed: self.constant_speed,
            },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn ga(&self) -> GaConfig {
        GaConfig {
            population_size: self.ga_population,
            max_generations: self.ga_generations,
            crossover_rate: self.ga_crossover_rate,
            mutation_rate: self.ga_mutation_rate,
            tournament_size: self.ga_tournament,
            seed: self.seed,
            penalty_coefficient: self.ga_penalty,
            elitism: self.ga_elitism,
            stall_generations: self.ga_stall_generations,
        }
    }

    pub fn pce(&self) -> PceOptions {
        PceOptions {
            max_order: self.pce_max_order,
            k_folds: self.pce_folds,
        }
    }

    pub fn sbo(&self) -> SboConfig {
        SboConfig {
            initial_multiplier: self.sbo_initial_multiplier,
            n_pce_samples: self.pce_samples,
            pce: self.pce(),
            kriging: KrigingOptions {
                trend: self.kriging_trend,
                nugget: self.kriging_nugget,
                max_nugget: self.kriging_max_nugget,
                n_starts: self.kriging_starts,
                max_iters: self.kriging_max_iters,
                theta_min: self.kriging_theta_min,
                theta_max: self.kriging_theta_max,
                seed: self.seed,
            },
            ga: self.ga(),
            use_ei: self.sbo_use_ei,
            ei_threshold: self.sbo_ei_threshold,
            ei_scale: self.sbo_ei_scale,
            max_evaluations: self.sbo_max_evaluations,
            reoptimize_every: self.sbo_reoptimize_every,
            max_duplicate_retries: self.sbo_duplicate_retries,
            seed: self.seed,
        }
    }

    /// Loads the referenced files and checks that the farm is feasible.
    pub fn setup(&self) -> Result<Setup> {
        if self.pce_samples < 2 {
            return Err(Error::Config("pce_samples must be at least 2".into()));
        }
        let turbine = match &self.turbine_file {
            Some(p) => TurbineSpec::from_csv(p, self.rotor_diameter_m, self.hub_height_m)?,
            None => {
                let mut t = TurbineSpec::nrel_5mw();
                t.rotor_diameter_m = self.rotor_diameter_m;
                t.hub_height_m = self.hub_height_m;
                t
            }
        };
        let wake = WakeParams {
            k_star: self.k_star,
            rotor_grid_points: self.rotor_grid_points,
        };
        let model = FarmModel::new(turbine, wake)?;
        let speed = self.speed_model()?;
        let rose = match &self.wind_rose_file {
            Some(p) => WindRose::from_csv(p, speed)?,
            None => WindRose::from_csv_str(BUILTIN_ROSE, Path::new("<built-in wind rose>"), speed)?,
        };
        let d = self.rotor_diameter_m;
        let grid = FarmGrid::new(
            self.farm_width_d * d,
            self.farm_height_d * d,
            self.grid_nx,
            self.grid_ny,
        )?;
        let siting = Siting::new(grid, self.n_turbines, model.min_spacing_m())?;
        self.ga().validate()?;
        Ok(Setup {
            config: self.clone(),
            model,
            rose,
            siting,
        })
    }
}

/// Reads a layout CSV with columns `x_m,y_m` (an optional leading
/// `turbine_idx` column is ignored).
pub fn read_layout_csv(path: &Path) -> Result<Vec<Point>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_layout_csv(&text, path)
}

pub fn parse_layout_csv(text: &str, source: &Path) -> Result<Vec<Point>> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ix), Some(iy)) = (col("x_m"), col("y_m")) else {
        return Err(parse_err(1, "expected columns `x_m` and `y_m`".into()));
    };
    let mut points = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let field = |k: usize, name: &str| -> Result<f64> {
            let raw = rec
                .get(k)
                .ok_or_else(|| parse_err(line, format!("missing `{name}`")))?;
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(line, format!("`{name}` is not a number: {raw:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(line, format!("`{name}` is not finite")))
            }
        };
        points.push(Point::new(field(ix, "x_m")?, field(iy, "y_m")?));
    }
    if points.is_empty() {
        return Err(parse_err(1, "layout has no turbines".into()));
    }
    Ok(points)
}

pub fn layout_csv(layout: &Layout) -> String {
    let mut s = String::from("turbine_idx,x_m,y_m\n");
    for (i, p) in layout.positions.iter().enumerate() {
        writeln!(s, "{i},{},{}", p.x, p.y).expect("writing to a string");
    }
    s
}

/// Attaches the farm grid to a user layout and checks the layout invariants.
pub fn checked_layout(setup: &Setup, points: Vec<Point>) -> Result<Layout> {
    let grid = setup.siting.grid;
    let mut layout = Layout::new(points);
    layout.grid = Some(grid);
    let snapped: Vec<usize> = layout
        .positions
        .iter()
        .map(|p| grid.nearest_vertex(p))
        .collect();
    let on_grid = layout
        .positions
        .iter()
        .zip(&snapped)
        .all(|(p, &v)| p.distance(&grid.vertex(v)) < 1e-6);
    if on_grid {
        layout.vertices = Some(snapped);
    }
    layout.validate(setup.model.min_spacing_m())?;
    Ok(layout)
}

pub struct RasterSpec {
    pub step_m: f64,
    pub margin_m: f64,
}

/// Per-turbine table, plus an optional hub-height speed raster as CSV.
pub fn cmd_power(
    setup: &Setup,
    layout: &Layout,
    cond: WindCondition,
    raster: Option<&RasterSpec>,
) -> Result<(String, Option<String>)> {
    let fp = setup.model.farm_power(layout, &cond);
    let mut out = String::new();
    writeln!(
        out,
        "wind from {} deg at {} m/s",
        cond.direction_deg, cond.speed_ms
    )
    .expect("writing to a string");
    writeln!(out, "turbine_idx,x_m,y_m,u_eff_ms,power_w").expect("writing to a string");
    for (i, p) in layout.positions.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{:.6},{:.3}",
            p.x, p.y, fp.effective_speeds_ms[i], fp.turbine_powers_w[i]
        )
        .expect("writing to a string");
    }
    writeln!(out, "total_power_w,{:.3}", fp.total_w).expect("writing to a string");
    if fp.near_wake_clamps > 0 {
        writeln!(out, "near_wake_clamps,{}", fp.near_wake_clamps).expect("writing to a string");
    }
    let raster = raster.map(|r| {
        let g = setup.siting.grid;
        let axis = |len: f64| -> Vec<f64> {
            let n = ((len + 2.0 * r.margin_m) / r.step_m).floor() as usize;
            (0..=n).map(|k| -r.margin_m + k as f64 * r.step_m).collect()
        };
        let (xs, ys) = (axis(g.width_m), axis(g.height_m));
        let pts: Vec<Point> = ys
            .iter()
            .flat_map(|&y| xs.iter().map(move |&x| Point::new(x, y)))
            .collect();
        let u = setup.model.hub_height_field(layout, &cond, &pts);
        let mut s = String::from("x_m,y_m,u_ms\n");
        for (p, u) in pts.iter().zip(u) {
            writeln!(s, "{},{},{}", p.x, p.y, u).expect("writing to a string");
        }
        s
    });
    Ok((out, raster))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AepMethod {
    Baseline,
    Pce,
}

/// AEP in GWh to four significant digits.
pub fn format_gwh(aep_wh: f64) -> String {
    let gwh = aep_wh / 1e9;
    if gwh == 0.0 {
        return "0.000".into();
    }
    let digits = 3 - gwh.abs().log10().floor() as i32;
    format!("{:.*}", digits.max(0) as usize, gwh)
}

pub fn cmd_aep(setup: &Setup, layout: &Layout, method: AepMethod, seed: u64) -> Result<String> {
    let mut out = String::new();
    match method {
        AepMethod::Baseline => {
            let r = baseline_aep(layout, &setup.rose, &setup.model);
            writeln!(out, "method: baseline").expect("writing to a string");
            writeln!(out, "aep_gwh: {}", format_gwh(r.aep_wh)).expect("writing to a string");
            writeln!(out, "farm_power_calls: {}", r.farm_power_calls).expect("writing to a string");
        }
        AepMethod::Pce => {
            let est = PceAepEstimator::new(setup.rose.clone(), setup.config.pce())?;
            let r = est.estimate(layout, &setup.model, setup.config.pce_samples, seed)?;
            writeln!(out, "method: pce").expect("writing to a string");
            writeln!(out, "aep_gwh: {}", format_gwh(r.aep_wh)).expect("writing to a string");
            writeln!(out, "farm_power_calls: {}", r.farm_power_calls).expect("writing to a string");
            writeln!(out, "pce_order: {}", r.model.order).expect("writing to a string");
            writeln!(out, "seed: {seed}").expect("writing to a string");
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: OptimizeMode,
    pub converged: bool,
    pub n_turbines: usize,
    pub seed: u64,
    pub evaluations: usize,
    pub farm_power_calls: usize,
    pub best_aep_wh: f64,
    /// Full-traversal AEP of the returned layout.
    pub best_baseline_aep_wh: f64,
    pub best_vertices: Vec<usize>,
    pub msp_converged_at: Option<usize>,
    pub msp_best_aep_wh: Option<f64>,
}

/// Runs the configured optimization and writes its result bundle.
pub fn cmd_optimize(setup: &Setup) -> Result<RunSummary> {
    let cfg = &setup.config;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_text(&dir.join("manifest.toml"), &cfg.to_toml())?;

    let (layout, summary, calls_per_eval) = match cfg.optimize_mode {
        OptimizeMode::Direct => {
            let mode = match cfg.direct_aep {
                DirectAep::Traversal => AepMode::Traversal,
                DirectAep::Pce => AepMode::Pce {
                    n_samples: cfg.pce_samples,
                    seed: cfg.seed,
                },
            };
            let r = direct_optimize(&setup.siting, &setup.rose, &setup.model, &cfg.ga(), mode)?;
            write_history_csv(&dir.join("history.csv"), &r.history)?;
            let per = r.function_calls / r.evaluations.max(1);
            let summary = RunSummary {
                mode: cfg.optimize_mode,
                converged: true,
                n_turbines: cfg.n_turbines,
                seed: cfg.seed,
                evaluations: r.evaluations,
                farm_power_calls: r.function_calls,
                best_aep_wh: r.best_aep_wh,
                best_baseline_aep_wh: 0.0,
                best_vertices: r.best_vertices,
                msp_converged_at: None,
                msp_best_aep_wh: None,
            };
            (r.best_layout, summary, per)
        }
        OptimizeMode::Sbo => {
            let (layout, state, report) =
                sbo_run(&setup.siting, &setup.rose, &setup.model, &cfg.sbo())?;
            write_history_csv(&dir.join("history.csv"), &report.history)?;
            write_archive_csv(&dir.join("archive.csv"), &setup.siting, &state.archive)?;
            write_text(
                &dir.join("state.json"),
                &serde_json::to_string_pretty(&state).expect("state serializes"),
            )?;
            let summary = RunSummary {
                mode: cfg.optimize_mode,
                converged: report.converged,
                n_turbines: cfg.n_turbines,
                seed: cfg.seed,
                evaluations: report.evaluations,
                farm_power_calls: report.function_calls,
                best_aep_wh: report.best_aep_wh,
                best_baseline_aep_wh: 0.0,
                best_vertices: report.best_vertices,
                msp_converged_at: report.msp_converged_at,
                msp_best_aep_wh: report.msp_best_aep_wh,
            };
            (layout, summary, cfg.pce_samples)
        }
    };
    let summary = RunSummary {
        best_baseline_aep_wh: baseline_aep(&layout, &setup.rose, &setup.model).aep_wh,
        ..summary
    };
    write_text(&dir.join("best_layout.csv"), &layout_csv(&layout))?;
    write_text(
        &dir.join("function_calls.csv"),
        &format!(
            "mode,evaluations,farm_power_calls_per_evaluation,farm_power_calls\n{},{},{},{}\n",
            match summary.mode {
                OptimizeMode::Direct => "direct",
                OptimizeMode::Sbo => "sbo",
            },
            summary.evaluations,
            calls_per_eval,
            summary.farm_power_calls
        ),
    )?;
    write_text(
        &dir.join("summary.json"),
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let err =
            RunConfig::from_toml_str("seed = 1\nbogus = 2\n", Path::new("c.toml")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = RunConfig {
            sbo_max_evaluations: Some(120),
            wind_rose_file: Some(PathBuf::from("/tmp/rose.csv")),
            ..RunConfig::default()
        };
        cfg.resolve_paths(Path::new("/base"));
        let back = RunConfig::from_toml_str(&cfg.to_toml(), Path::new("m.toml")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.output_dir, PathBuf::from("/base/output"));
    }

    #[test]
    fn layout_parse_errors_carry_line_numbers() {
        let p = Path::new("l.csv");
        let ok = parse_layout_csv("turbine_idx,x_m,y_m\n0,0,0\n1,252,0\n", p).unwrap();
        assert_eq!(ok.len(), 2);
        assert!(matches!(
            parse_layout_csv("x_m,y_m\n0,0\n1,oops\n", p),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_layout_csv("a,b\n1,2\n", p),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_layout_csv("x_m,y_m\n", p).is_err());
    }

    #[test]
    fn gwh_formatting() {
        assert_eq!(format_gwh(123_456_789_000.0), "123.5");
        assert_eq!(format_gwh(43_800_000.0), "0.04380");
        assert_eq!(format_gwh(5_000_000_000.0), "5.000");
    }

    #[test]
    fn constant_speed_traversal_uses_directions_only() {
        let cfg = RunConfig {
            speed_mode: SpeedMode::Constant,
            ..RunConfig::default()
        };
        let setup = cfg.setup().unwrap();
        let layout =
            checked_layout(&setup, vec![Point::new(0.0, 0.0), Point::new(504.0, 0.0)]).unwrap();
        let out = cmd_aep(&setup, &layout, AepMethod::Baseline, 0).unwrap();
        assert!(out.contains("farm_power_calls: 72"), "{out}");
    }

    #[test]
    fn off_boundary_layout_is_rejected() {
        let setup = RunConfig::default().setup().unwrap();
        assert!(checked_layout(&setup, vec![Point::new(-50.0, 0.0)]).is_err());
        assert!(
            checked_layout(&setup, vec![Point::new(0.0, 0.0), Point::new(200.0, 0.0)]).is_err()
        );
    }
}
