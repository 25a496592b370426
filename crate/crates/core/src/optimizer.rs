//! Layout search on a discrete grid: a genetic algorithm, direct optimization
//! of the true AEP, and the surrogate-based driver.
//!
//! The surrogate driver keeps an archive of PCE-evaluated layouts, fits a
//! Kriging model to it each iteration and lets the GA search the model. The
//! first phase proposes the layout with the highest predicted mean; once that
//! proposal is already archived, the second phase proposes the layout with
//! the highest expected improvement until it drops below a threshold.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use log::{debug, info};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::farm_model::{FarmGrid, FarmModel, Layout, Point, TurbineSpec};
use crate::kriging::{expected_improvement, KrigingDocument, KrigingModel, KrigingOptions};
use crate::pce::{PceAepEstimator, PceOptions};
use crate::wind_resource::{baseline_aep, lhs_column, WindRose};

/// True iff every pair of turbines is at least two rotor diameters apart.
/// The bound is inclusive.
pub fn spacing_feasible(layout: &Layout, spec: &TurbineSpec) -> bool {
    layout.min_pairwise_distance() >= 2.0 * spec.rotor_diameter_m * (1.0 - 1e-12)
}

/// The placement problem: a grid, a turbine count and a minimum spacing.
///
/// Layouts are handled as vertex sets in canonical order, sorted by x and
/// then y, so permutations of the same farm compare equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Siting {
    pub grid: FarmGrid,
    pub n_turbines: usize,
    pub min_spacing_m: f64,
}

impl Siting {
    pub fn new(grid: FarmGrid, n_turbines: usize, min_spacing_m: f64) -> Result<Self> {
        if n_turbines == 0 {
            return Err(Error::Config("need at least one turbine".into()));
        }
        if n_turbines > grid.vertex_count() {
            return Err(Error::Config(format!(
                "{n_turbines} turbines do not fit on {} grid vertices",
                grid.vertex_count()
            )));
        }
        let s = Self {
            grid,
            n_turbines,
            min_spacing_m,
        };
        let packed = s.greedy_packing();
        if packed.len() < n_turbines {
            return Err(Error::Config(format!(
                "cannot place {n_turbines} turbines {min_spacing_m} m apart on a {}x{} grid \
                 (greedy packing fits {})",
                grid.nx,
                grid.ny,
                packed.len()
            )));
        }
        Ok(s)
    }

    /// Dimension of the layout vector seen by the surrogate.
    pub fn dim(&self) -> usize {
        2 * self.n_turbines
    }

    fn spaced(&self, a: usize, b: usize) -> bool {
        self.grid.vertex(a).distance(&self.grid.vertex(b)) >= self.min_spacing_m * (1.0 - 1e-12)
    }

    fn greedy_packing(&self) -> Vec<usize> {
        let mut placed = Vec::new();
        for v in 0..self.grid.vertex_count() {
            if placed.len() == self.n_turbines {
                break;
            }
            if placed.iter().all(|&u| self.spaced(u, v)) {
                placed.push(v);
            }
        }
        placed
    }

    pub fn canonicalize(&self, vertices: &mut [usize]) {
        let nx = self.grid.nx;
        vertices.sort_unstable_by_key(|&v| (v % nx, v / nx));
    }

    /// Sum over turbine pairs of the relative spacing shortfall.
    pub fn violation(&self, vertices: &[usize]) -> f64 {
        let s = self.min_spacing_m;
        if s <= 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        for (i, &a) in vertices.iter().enumerate() {
            for &b in &vertices[i + 1..] {
                if !self.spaced(a, b) {
                    let d = self.grid.vertex(a).distance(&self.grid.vertex(b));
                    total += (s - d) / s;
                }
            }
        }
        total
    }

    pub fn is_feasible(&self, vertices: &[usize]) -> bool {
        let n = self.grid.vertex_count();
        let mut seen = HashSet::with_capacity(vertices.len());
        vertices.len() == self.n_turbines
            && vertices.iter().all(|&v| v < n && seen.insert(v))
            && vertices
                .iter()
                .enumerate()
                .all(|(i, &a)| vertices[i + 1..].iter().all(|&b| self.spaced(a, b)))
    }

    pub fn layout(&self, vertices: &[usize]) -> Layout {
        Layout::from_vertices(self.grid, vertices).expect("vertex sets are validated on creation")
    }

    /// Canonically ordered `(x, y)` pairs scaled to `[0, 1]`.
    pub fn layout_vector(&self, vertices: &[usize]) -> Vec<f64> {
        let mut v = vertices.to_vec();
        self.canonicalize(&mut v);
        let mut out = Vec::with_capacity(2 * v.len());
        for i in v {
            let p = self.grid.vertex(i);
            out.push(p.x / self.grid.width_m);
            out.push(p.y / self.grid.height_m);
        }
        out
    }

    /// Unoccupied vertex nearest to `p` that keeps the spacing to `placed`.
    fn nearest_feasible(&self, p: Point, placed: &[usize]) -> Option<usize> {
        (0..self.grid.vertex_count())
            .filter(|v| !placed.contains(v) && placed.iter().all(|&u| self.spaced(u, *v)))
            .map(|v| (self.grid.vertex(v).distance(&p), v))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, v)| v)
    }

    fn place(&self, points: impl Iterator<Item = Point>) -> Option<Vec<usize>> {
        let mut placed = Vec::with_capacity(self.n_turbines);
        for p in points {
            placed.push(self.nearest_feasible(p, &placed)?);
        }
        self.canonicalize(&mut placed);
        Some(placed)
    }
}

const PLACEMENT_ATTEMPTS: usize = 200;

/// LHS over the `2N` coordinates, each point snapped to the nearest vertex
/// that is free and keeps the spacing. A sample that cannot be placed, or
/// that repeats an earlier one, is redrawn uniformly. With `strict`, running
/// out of attempts is an error; otherwise a repeat is accepted.
fn lhs_vertex_sets<R: Rng>(
    siting: &Siting,
    count: usize,
    rng: &mut R,
    strict: bool,
) -> Result<Vec<Vec<usize>>> {
    let n = siting.n_turbines;
    let (w, h) = (siting.grid.width_m, siting.grid.height_m);
    let cols: Vec<Vec<f64>> = (0..2 * n).map(|_| lhs_column(count, rng)).collect();
    let draws: Vec<Vec<Point>> = (0..count)
        .map(|s| {
            (0..n)
                .map(|k| Point::new(cols[2 * k][s] * w, cols[2 * k + 1][s] * h))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(count);
    let mut seen = HashSet::new();
    for (s, draw) in draws.into_iter().enumerate() {
        let mut chosen = None;
        let mut fallback = None;
        for attempt in 0..PLACEMENT_ATTEMPTS {
            let candidate = if attempt == 0 {
                siting.place(draw.iter().copied())
            } else {
                let pts: Vec<Point> = (0..n)
                    .map(|_| Point::new(rng.random::<f64>() * w, rng.random::<f64>() * h))
                    .collect();
                siting.place(pts.into_iter())
            };
            if let Some(v) = candidate {
                if !seen.contains(&v) {
                    chosen = Some(v);
                    break;
                }
                fallback.get_or_insert(v);
            }
        }
        let v = match (chosen, strict) {
            (Some(v), _) => v,
            (None, true) => {
                return Err(Error::Config(format!(
                    "could only generate {s} distinct feasible layouts out of {count}"
                )))
            }
            (None, false) => fallback.unwrap_or_else(|| {
                let mut g = siting.greedy_packing();
                siting.canonicalize(&mut g);
                g
            }),
        };
        seen.insert(v.clone());
        out.push(v);
    }
    Ok(out)
}

/// `n_samples` distinct feasible layouts from a Latin hypercube over the
/// turbine coordinates. Deterministic per seed.
pub fn lhs_initial_layouts(siting: &Siting, n_samples: usize, seed: u64) -> Result<Vec<Layout>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(lhs_vertex_sets(siting, n_samples, &mut rng, true)?
        .iter()
        .map(|v| siting.layout(v))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub seed: u64,
    pub penalty_coefficient: f64,
    /// Individuals copied unchanged into the next generation.
    pub elitism: usize,
    /// Stop after this many generations without a better feasible layout;
    /// 0 disables the check.
    pub stall_generations: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            max_generations: 200,
            crossover_rate: 0.9,
            mutation_rate: 0.05,
            tournament_size: 2,
            seed: 0,
            penalty_coefficient: 1.0,
            elitism: 2,
            stall_generations: 30,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Config("GA population must be at least 2".into()));
        }
        for (name, r) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        if self.tournament_size == 0 {
            return Err(Error::Config("tournament size must be at least 1".into()));
        }
        if !(self.penalty_coefficient > 0.0) {
            return Err(Error::Config("penalty coefficient must be positive".into()));
        }
        if self.elitism >= self.population_size {
            return Err(Error::Config(
                "elitism must be smaller than the population".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    /// Best feasible layout, canonical vertex order.
    pub best: Vec<usize>,
    pub best_score: f64,
    /// Best feasible score of each generation, starting with the initial one.
    pub generation_best: Vec<f64>,
    /// Best feasible score so far after each generation.
    pub history: Vec<f64>,
    /// Distinct layouts passed to the objective, cumulative per generation.
    pub evaluations_cum: Vec<usize>,
    pub evaluations: usize,
    pub generations: usize,
    pub final_population: Vec<Vec<usize>>,
}

struct Ga<'a, F> {
    objective: F,
    siting: &'a Siting,
    cfg: &'a GaConfig,
    rng: ChaCha8Rng,
    cache: HashMap<Vec<usize>, f64>,
}

impl<F: Fn(&[usize]) -> f64 + Sync> Ga<'_, F> {
    fn evaluate(&mut self, pop: &[Vec<usize>]) -> (Vec<f64>, Vec<bool>) {
        let feasible: Vec<bool> = pop.iter().map(|c| self.siting.is_feasible(c)).collect();
        let mut fresh: Vec<Vec<usize>> = Vec::new();
        let mut queued = HashSet::new();
        for (c, &ok) in pop.iter().zip(&feasible) {
            if ok && !self.cache.contains_key(c) && queued.insert(c.clone()) {
                fresh.push(c.clone());
            }
        }
        let objective = &self.objective;
        let scores: Vec<f64> = fresh.par_iter().map(|c| objective(c)).collect();
        self.cache.extend(fresh.into_iter().zip(scores));

        let floor = pop
            .iter()
            .zip(&feasible)
            .filter(|(_, ok)| **ok)
            .map(|(c, _)| self.cache[c])
            .fold(f64::INFINITY, f64::min);
        let floor = if floor.is_finite() { floor } else { 0.0 };
        let fitness = pop
            .iter()
            .zip(&feasible)
            .map(|(c, &ok)| {
                if ok {
                    self.cache[c]
                } else {
                    floor
                        - self.cfg.penalty_coefficient
                            * self.siting.violation(c).max(1e-12)
                            * (1.0 + floor.abs())
                }
            })
            .collect();
        (fitness, feasible)
    }

    fn tournament(&mut self, fitness: &[f64]) -> usize {
        let mut best = self.rng.random_range(0..fitness.len());
        for _ in 1..self.cfg.tournament_size {
            let c = self.rng.random_range(0..fitness.len());
            if fitness[c] > fitness[best] {
                best = c;
            }
        }
        best
    }

    /// Keeps the shared vertices and deals the rest out between the children.
    fn crossover(&mut self, a: &[usize], b: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let common: Vec<usize> = a.iter().copied().filter(|v| b.contains(v)).collect();
        let mut rest: Vec<usize> = a
            .iter()
            .chain(b)
            .copied()
            .filter(|v| !common.contains(v))
            .collect();
        rest.shuffle(&mut self.rng);
        let m = a.len() - common.len();
        let mut c1 = common.clone();
        c1.extend_from_slice(&rest[..m]);
        let mut c2 = common;
        c2.extend_from_slice(&rest[m..]);
        (c1, c2)
    }

    fn mutate(&mut self, c: &mut [usize]) {
        let n = self.siting.grid.vertex_count();
        for i in 0..c.len() {
            if self.rng.random::<f64>() < self.cfg.mutation_rate {
                let free: Vec<usize> = (0..n).filter(|v| !c.contains(v)).collect();
                if let Some(&v) = free.choose(&mut self.rng) {
                    c[i] = v;
                }
            }
        }
    }

    /// Moves each turbine that breaks the spacing to a free neighbouring
    /// vertex that clears it, when one exists.
    fn repair(&mut self, c: &mut [usize]) {
        for i in 0..c.len() {
            let clear = |c: &[usize], v: usize| {
                c.iter()
                    .enumerate()
                    .all(|(j, &u)| j == i || (u != v && self.siting.spaced(u, v)))
            };
            if clear(c, c[i]) {
                continue;
            }
            let options: Vec<usize> = self
                .siting
                .grid
                .neighbors(c[i])
                .into_iter()
                .filter(|&v| clear(c, v))
                .collect();
            if let Some(&v) = options.choose(&mut self.rng) {
                c[i] = v;
            }
        }
    }

    fn offspring(&mut self, pop: &[Vec<usize>], fitness: &[f64]) -> Vec<Vec<usize>> {
        let size = self.cfg.population_size;
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
        let mut next: Vec<Vec<usize>> = order[..self.cfg.elitism]
            .iter()
            .map(|&i| pop[i].clone())
            .collect();
        while next.len() < size {
            let (i, j) = (self.tournament(fitness), self.tournament(fitness));
            let (mut c1, mut c2) = if self.rng.random::<f64>() < self.cfg.crossover_rate {
                self.crossover(&pop[i], &pop[j])
            } else {
                (pop[i].clone(), pop[j].clone())
            };
            for c in [&mut c1, &mut c2] {
                self.mutate(c);
                self.repair(c);
                self.siting.canonicalize(c);
            }
            next.push(c1);
            if next.len() < size {
                next.push(c2);
            }
        }
        next
    }
}

/// Maximizes `objective` over feasible vertex sets.
///
/// The objective receives canonical vertex lists and is called at most once
/// per distinct layout. `seeds` join the initial population ahead of the LHS
/// draws; infeasible seeds are dropped.
pub fn ga_run<F>(
    objective: F,
    siting: &Siting,
    cfg: &GaConfig,
    seeds: &[Vec<usize>],
) -> Result<GaResult>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    cfg.validate()?;
    let mut ga = Ga {
        objective,
        siting,
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        cache: HashMap::new(),
    };
    let mut pop: Vec<Vec<usize>> = Vec::with_capacity(cfg.population_size);
    for s in seeds {
        let mut s = s.clone();
        siting.canonicalize(&mut s);
        if siting.is_feasible(&s) && !pop.contains(&s) && pop.len() < cfg.population_size {
            pop.push(s);
        }
    }
    let fill = cfg.population_size - pop.len();
    pop.extend(lhs_vertex_sets(siting, fill, &mut ga.rng, false)?);

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut generation_best = Vec::new();
    let mut history = Vec::new();
    let mut evaluations_cum = Vec::new();
    let mut stall = 0;
    let mut generation = 0;
    loop {
        let (fitness, feasible) = ga.evaluate(&pop);
        let mut gen_best: Option<(f64, usize)> = None;
        for (i, (&f, &ok)) in fitness.iter().zip(&feasible).enumerate() {
            if ok && gen_best.is_none_or(|(b, _)| f > b) {
                gen_best = Some((f, i));
            }
        }
        let improved = match (gen_best, &best) {
            (Some((f, _)), Some((b, _))) => f > *b,
            (Some(_), None) => true,
            _ => false,
        };
        if improved {
            let (f, i) = gen_best.expect("improvement implies a feasible individual");
            best = Some((f, pop[i].clone()));
            stall = 0;
        } else {
            stall += 1;
        }
        generation_best.push(gen_best.map_or(f64::NEG_INFINITY, |g| g.0));
        history.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0));
        evaluations_cum.push(ga.cache.len());
        if generation >= cfg.max_generations
            || (cfg.stall_generations > 0 && stall >= cfg.stall_generations)
        {
            break;
        }
        pop = ga.offspring(&pop, &fitness);
        generation += 1;
    }
    let (best_score, best) =
        best.ok_or_else(|| Error::Numerical("genetic algorithm found no feasible layout".into()))?;
    Ok(GaResult {
        best,
        best_score,
        generation_best,
        history,
        evaluations: ga.cache.len(),
        evaluations_cum,
        generations: generation,
        final_population: pop,
    })
}

/// One row of a run history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub phase: Phase,
    pub aep_wh: f64,
    pub best_aep_wh: f64,
    pub function_calls_cum: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Direct,
    Initial,
    Msp,
    Ei,
    Done,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Direct => "direct",
            Phase::Initial => "initial",
            Phase::Msp => "msp",
            Phase::Ei => "ei",
            Phase::Done => "done",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "aep_mode", rename_all = "snake_case")]
pub enum AepMode {
    Traversal,
    /// PCE with one fixed sampling seed for every layout.
    Pce {
        n_samples: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectResult {
    pub best_vertices: Vec<usize>,
    pub best_layout: Layout,
    pub best_aep_wh: f64,
    pub evaluations: usize,
    pub function_calls: usize,
    pub generations: usize,
    pub history: Vec<HistoryRow>,
}

/// GA on the AEP itself, by full traversal or by a fixed-seed PCE estimate.
pub fn direct_optimize(
    siting: &Siting,
    rose: &WindRose,
    model: &FarmModel,
    ga: &GaConfig,
    mode: AepMode,
) -> Result<DirectResult> {
    let (result, calls_per_eval) = match mode {
        AepMode::Traversal => {
            let objective = |v: &[usize]| baseline_aep(&siting.layout(v), rose, model).aep_wh;
            (
                ga_run(objective, siting, ga, &[])?,
                rose.joint_cells().len(),
            )
        }
        AepMode::Pce { n_samples, seed } => {
            let est = PceAepEstimator::new(rose.clone(), PceOptions::default())?;
            // a failed fit scores as no energy rather than aborting the search
            let objective = |v: &[usize]| {
                est.estimate(&siting.layout(v), model, n_samples, seed)
                    .map_or(0.0, |e| e.aep_wh)
            };
            (ga_run(objective, siting, ga, &[])?, n_samples)
        }
    };
    let history = result
        .generation_best
        .iter()
        .zip(&result.history)
        .zip(&result.evaluations_cum)
        .enumerate()
        .map(|(g, ((&gen, &best), &evals))| HistoryRow {
            iteration: g,
            phase: Phase::Direct,
            aep_wh: gen,
            best_aep_wh: best,
            function_calls_cum: evals * calls_per_eval,
        })
        .collect();
    info!(
        "direct optimization: {} generations, {} layouts, best AEP {:.4} GWh",
        result.generations,
        result.evaluations,
        result.best_score / 1e9
    );
    Ok(DirectResult {
        best_layout: siting.layout(&result.best),
        best_vertices: result.best,
        best_aep_wh: result.best_score,
        evaluations: result.evaluations,
        function_calls: result.evaluations * calls_per_eval,
        generations: result.generations,
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EiScale {
    /// Threshold and improvement measured in standardized response units.
    Standardized,
    /// Threshold in Wh.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SboConfig {
    /// Initial sample size as a multiple of the layout dimension.
    pub initial_multiplier: usize,
    pub n_pce_samples: usize,
    pub pce: PceOptions,
    pub kriging: KrigingOptions,
    pub ga: GaConfig,
    pub use_ei: bool,
    pub ei_threshold: f64,
    pub ei_scale: EiScale,
    /// Cap on archived layouts; defaults to 50 times the dimension.
    pub max_evaluations: Option<usize>,
    /// Full likelihood search after this many new layouts; in between, the
    /// model is refit at the previous length-scales.
    pub reoptimize_every: usize,
    pub max_duplicate_retries: usize,
    pub seed: u64,
}

impl Default for SboConfig {
    fn default() -> Self {
        Self {
            initial_multiplier: 5,
            n_pce_samples: 50,
            pce: PceOptions::default(),
            kriging: KrigingOptions::default(),
            ga: GaConfig::default(),
            use_ei: true,
            ei_threshold: 0.1,
            ei_scale: EiScale::Standardized,
            max_evaluations: None,
            reoptimize_every: 10,
            max_duplicate_retries: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub id: usize,
    pub vertices: Vec<usize>,
    pub aep_wh: f64,
    pub pce_seed: u64,
    pub pce_order: usize,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SboEvent {
    pub evaluations: usize,
    pub event: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SboState {
    pub seed: u64,
    pub phase: Phase,
    pub iteration: usize,
    pub archive: Vec<ArchiveEntry>,
    pub best_id: usize,
    pub kriging: Option<KrigingDocument>,
    pub log: Vec<SboEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SboReport {
    pub converged: bool,
    pub evaluations: usize,
    pub function_calls: usize,
    pub best_vertices: Vec<usize>,
    pub best_aep_wh: f64,
    /// Archive size when the mean-maximizing proposal was first a repeat.
    pub msp_converged_at: Option<usize>,
    pub msp_best_aep_wh: Option<f64>,
    pub kriging_fits: usize,
    pub likelihood_searches: usize,
    pub history: Vec<HistoryRow>,
}

struct Archive {
    entries: Vec<ArchiveEntry>,
    index: HashMap<Vec<usize>, usize>,
    best: usize,
}

impl Archive {
    fn contains(&self, v: &[usize]) -> bool {
        self.index.contains_key(v)
    }

    fn push(
        &mut self,
        vertices: Vec<usize>,
        aep_wh: f64,
        pce_seed: u64,
        pce_order: usize,
        phase: Phase,
    ) {
        let id = self.entries.len();
        self.index.insert(vertices.clone(), id);
        if self.entries.is_empty() || aep_wh > self.entries[self.best].aep_wh {
            self.best = id;
        }
        self.entries.push(ArchiveEntry {
            id,
            vertices,
            aep_wh,
            pce_seed,
            pce_order,
            phase,
        });
    }

    fn best(&self) -> &ArchiveEntry {
        &self.entries[self.best]
    }
}

struct Sbo<'a> {
    siting: &'a Siting,
    model: &'a FarmModel,
    cfg: &'a SboConfig,
    estimator: PceAepEstimator,
    master: ChaCha8Rng,
    archive: Archive,
    history: Vec<HistoryRow>,
    log: Vec<SboEvent>,
}

impl Sbo<'_> {
    fn note(&mut self, event: &str, detail: String) {
        info!(
            "[{} evaluations] {event}: {detail}",
            self.archive.entries.len()
        );
        self.log.push(SboEvent {
            evaluations: self.archive.entries.len(),
            event: event.into(),
            detail,
        });
    }

    fn evaluate(&mut self, batch: Vec<Vec<usize>>, phase: Phase) -> Result<()> {
        let seeds: Vec<u64> = batch.iter().map(|_| self.master.next_u64()).collect();
        let (est, model, n) = (&self.estimator, self.model, self.cfg.n_pce_samples);
        let results: Vec<_> = batch
            .par_iter()
            .zip(&seeds)
            .map(|(v, &s)| est.estimate(&self.siting.layout(v), model, n, s))
            .collect();
        for ((v, seed), r) in batch.into_iter().zip(seeds).zip(results) {
            let r = r?;
            self.archive.push(v, r.aep_wh, seed, r.model.order, phase);
            let count = self.archive.entries.len();
            self.history.push(HistoryRow {
                iteration: count,
                phase,
                aep_wh: r.aep_wh,
                best_aep_wh: self.archive.best().aep_wh,
                function_calls_cum: count * n,
            });
        }
        Ok(())
    }

    fn fit(&mut self, theta: Option<&[f64]>, full: bool) -> Result<KrigingModel> {
        let x: Vec<Vec<f64>> = self
            .archive
            .entries
            .iter()
            .map(|e| self.siting.layout_vector(&e.vertices))
            .collect();
        let y: Vec<f64> = self.archive.entries.iter().map(|e| e.aep_wh).collect();
        let mut opts = self.cfg.kriging;
        match (full, theta) {
            (false, Some(t)) => KrigingModel::fit_fixed(&x, &y, t, &opts),
            _ => {
                opts.seed = self.master.next_u64();
                KrigingModel::fit_from(&x, &y, &opts, theta)
            }
        }
    }

    fn ga_config(&mut self) -> GaConfig {
        GaConfig {
            seed: self.master.next_u64(),
            ..self.cfg.ga
        }
    }

    /// A single-vertex move of `v` that is feasible and not yet archived.
    fn perturb(&mut self, v: &[usize]) -> Option<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master.next_u64());
        let n = self.siting.grid.vertex_count();
        for _ in 0..self.cfg.max_duplicate_retries {
            let mut c = v.to_vec();
            let i = rng.random_range(0..c.len());
            let free: Vec<usize> = (0..n).filter(|u| !c.contains(u)).collect();
            let &u = free.choose(&mut rng)?;
            c[i] = u;
            self.siting.canonicalize(&mut c);
            if self.siting.is_feasible(&c) && !self.archive.contains(&c) {
                return Some(c);
            }
        }
        None
    }
}

/// Runs the surrogate-based optimization and returns the best archived
/// layout with the final state and a report.
pub fn sbo_run(
    siting: &Siting,
    rose: &WindRose,
    model: &FarmModel,
    cfg: &SboConfig,
) -> Result<(Layout, SboState, SboReport)> {
    cfg.ga.validate()?;
    let d = siting.dim();
    let cap = cfg.max_evaluations.unwrap_or(50 * d);
    let n0 = (cfg.initial_multiplier * d).min(cap);
    if n0 < d + 2 {
        return Err(Error::Config(format!(
            "initial sample of {n0} layouts is too small for a {d}-dimensional surrogate"
        )));
    }
    let mut sbo = Sbo {
        siting,
        model,
        cfg,
        estimator: PceAepEstimator::new(rose.clone(), cfg.pce)?,
        master: ChaCha8Rng::seed_from_u64(cfg.seed),
        archive: Archive {
            entries: Vec::new(),
            index: HashMap::new(),
            best: 0,
        },
        history: Vec::new(),
        log: Vec::new(),
    };

    let lhs_seed = sbo.master.next_u64();
    let initial = lhs_vertex_sets(siting, n0, &mut ChaCha8Rng::seed_from_u64(lhs_seed), true)?;
    sbo.note(
        "initial_sample",
        format!("{n0} layouts from LHS seed {lhs_seed}"),
    );
    sbo.evaluate(initial, Phase::Initial)?;

    let mut phase = Phase::Msp;
    let mut theta: Option<Vec<f64>> = None;
    let mut last_search = 0;
    let mut fits = 0;
    let mut searches = 0;
    let mut converged = false;
    let mut msp_converged_at = None;
    let mut msp_best = None;
    let mut surrogate = None;
    let mut iteration = 0;
    loop {
        if sbo.archive.entries.len() >= cap {
            sbo.note(
                "cap_reached",
                format!("{cap} evaluations without convergence"),
            );
            break;
        }
        iteration += 1;
        let n = sbo.archive.entries.len();
        let full = theta.is_none() || n - last_search >= cfg.reoptimize_every.max(1);
        let km = sbo.fit(theta.as_deref(), full)?;
        fits += 1;
        if full {
            searches += 1;
            last_search = n;
            debug!("length-scales {:?}", km.theta());
        }
        theta = Some(km.theta().to_vec());
        let best = sbo.archive.best().clone();
        let ga_cfg = sbo.ga_config();

        match phase {
            Phase::Msp => {
                let objective =
                    |v: &[usize]| km.predict_mean_standardized(&siting.layout_vector(v));
                let res = ga_run(
                    objective,
                    siting,
                    &ga_cfg,
                    std::slice::from_ref(&best.vertices),
                )?;
                if sbo.archive.contains(&res.best) {
                    msp_converged_at = Some(n);
                    msp_best = Some(best.aep_wh);
                    sbo.note(
                        "msp_converged",
                        format!(
                            "proposal {:?} already archived; best AEP {} Wh",
                            res.best, best.aep_wh
                        ),
                    );
                    surrogate = Some(km);
                    if cfg.use_ei {
                        phase = Phase::Ei;
                        continue;
                    }
                    converged = true;
                    break;
                }
                sbo.evaluate(vec![res.best], Phase::Msp)?;
            }
            Phase::Ei => {
                let (mean, sd) = km.y_scale();
                let f_best = match cfg.ei_scale {
                    EiScale::Standardized => km.standardize(best.aep_wh),
                    EiScale::Raw => best.aep_wh,
                };
                let objective = |v: &[usize]| {
                    let p = km.predict_standardized(&siting.layout_vector(v));
                    match cfg.ei_scale {
                        EiScale::Standardized => expected_improvement(p.mean, p.sd, f_best),
                        EiScale::Raw => expected_improvement(mean + sd * p.mean, sd * p.sd, f_best),
                    }
                };
                let res = ga_run(
                    objective,
                    siting,
                    &ga_cfg,
                    std::slice::from_ref(&best.vertices),
                )?;
                if res.best_score < cfg.ei_threshold {
                    sbo.note(
                        "ei_converged",
                        format!(
                            "max EI {} below threshold {}",
                            res.best_score, cfg.ei_threshold
                        ),
                    );
                    surrogate = Some(km);
                    converged = true;
                    break;
                }
                let mut proposal = res.best;
                if sbo.archive.contains(&proposal) {
                    match sbo.perturb(&proposal) {
                        Some(p) => {
                            sbo.note(
                                "ei_duplicate",
                                format!("{proposal:?} archived; moved to {p:?}"),
                            );
                            proposal = p;
                        }
                        None => {
                            sbo.note(
                                "ei_converged",
                                format!("{proposal:?} archived and no free move"),
                            );
                            surrogate = Some(km);
                            converged = true;
                            break;
                        }
                    }
                }
                sbo.evaluate(vec![proposal], Phase::Ei)?;
            }
            _ => unreachable!("loop only runs in search phases"),
        }
        surrogate = Some(km);
    }

    let best = sbo.archive.best().clone();
    let evaluations = sbo.archive.entries.len();
    let report = SboReport {
        converged,
        evaluations,
        function_calls: evaluations * cfg.n_pce_samples,
        best_vertices: best.vertices.clone(),
        best_aep_wh: best.aep_wh,
        msp_converged_at,
        msp_best_aep_wh: msp_best,
        kriging_fits: fits,
        likelihood_searches: searches,
        history: sbo.history,
    };
    let state = SboState {
        seed: cfg.seed,
        phase: Phase::Done,
        iteration,
        best_id: best.id,
        kriging: surrogate.map(|k| k.to_document()),
        archive: sbo.archive.entries,
        log: sbo.log,
    };
    Ok((siting.layout(&best.vertices), state, report))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

/// `iteration,phase,aep_wh,best_aep_wh,function_calls_cum`
pub fn write_history_csv(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record([
        "iteration",
        "phase",
        "aep_wh",
        "best_aep_wh",
        "function_calls_cum",
    ])
    .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            r.phase.as_str().to_string(),
            r.aep_wh.to_string(),
            r.best_aep_wh.to_string(),
            r.function_calls_cum.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `layout_id,turbine_idx,x_m,y_m,aep_wh`, one row per turbine.
pub fn write_archive_csv(path: &Path, siting: &Siting, archive: &[ArchiveEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["layout_id", "turbine_idx", "x_m", "y_m", "aep_wh"])
        .map_err(|e| csv_error(path, e))?;
    for e in archive {
        for (t, &v) in e.vertices.iter().enumerate() {
            let p = siting.grid.vertex(v);
            w.write_record([
                e.id.to_string(),
                t.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                e.aep_wh.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `text` to `path`, creating parent directories.
pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::farm_model::NREL_5MW_DIAMETER_M as D;

    fn case1() -> Siting {
        Siting::new(FarmGrid::square(8.0, 9, D).unwrap(), 8, 2.0 * D).unwrap()
    }

    #[test]
    fn spacing_boundary_is_inclusive() {
        let spec = TurbineSpec::nrel_5mw();
        let two = Layout::new(vec![Point::new(0.0, 0.0), Point::new(2.0 * D, 0.0)]);
        assert!(spacing_feasible(&two, &spec));
        let close = Layout::new(vec![Point::new(0.0, 0.0), Point::new(1.99 * D, 0.0)]);
        assert!(!spacing_feasible(&close, &spec));
    }

    #[test]
    fn perimeter_layout_is_feasible() {
        let s = case1();
        // corners and edge midpoints of the 9x9 grid
        let v = vec![0, 4, 8, 36, 44, 72, 76, 80];
        assert!(s.is_feasible(&v));
        assert!(spacing_feasible(&s.layout(&v), &TurbineSpec::nrel_5mw()));
    }

    #[test]
    fn infeasible_packing_is_rejected() {
        let grid = FarmGrid::square(2.0, 3, D).unwrap();
        assert!(Siting::new(grid, 2, 2.0 * D).is_ok());
        assert!(Siting::new(grid, 5, 2.0 * D).is_err());
        assert!(Siting::new(grid, 10, 0.0).is_err());
    }

    #[test]
    fn initial_layouts_are_distinct_and_feasible() {
        let s = case1();
        for n in [1, 80] {
            let layouts = lhs_initial_layouts(&s, n, 3).unwrap();
            assert_eq!(layouts.len(), n);
            let mut keys = HashSet::new();
            for l in &layouts {
                l.validate(2.0 * D).unwrap();
                assert!(keys.insert(l.vertices.clone().unwrap()));
            }
        }
        assert_eq!(
            lhs_initial_layouts(&s, 20, 9).unwrap(),
            lhs_initial_layouts(&s, 20, 9).unwrap()
        );
    }

    #[test]
    fn layout_vector_ignores_turbine_order() {
        let s = case1();
        assert_eq!(s.layout_vector(&[80, 0, 40]), s.layout_vector(&[40, 80, 0]));
        assert_eq!(s.layout_vector(&[0, 80]), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn ga_fills_marked_region() {
        // 5x5 grid at 2D pitch: any distinct vertices are spaced
        let grid = FarmGrid::square(8.0, 5, D).unwrap();
        let s = Siting::new(grid, 3, 2.0 * D).unwrap();
        let region: Vec<usize> = vec![0, 1, 5, 6];
        let objective = |v: &[usize]| v.iter().filter(|i| region.contains(i)).count() as f64;
        let cfg = GaConfig {
            population_size: 20,
            max_generations: 60,
            stall_generations: 0,
            seed: 5,
            ..GaConfig::default()
        };
        let res = ga_run(objective, &s, &cfg, &[]).unwrap();
        assert_eq!(res.best_score, 3.0);
        assert!(res.best.iter().all(|v| region.contains(v)));
        assert_eq!(res.final_population.len(), 20);
        assert!(res.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn single_turbine_direct_optimization() {
        let grid = FarmGrid::square(4.0, 3, D).unwrap();
        let s = Siting::new(grid, 1, 2.0 * D).unwrap();
        let rose = WindRose::uniform(8, crate::wind_resource::SpeedModel::Constant { speed: 9.0 })
            .unwrap();
        let model = FarmModel::new(TurbineSpec::nrel_5mw(), Default::default()).unwrap();
        let cfg = GaConfig {
            population_size: 4,
            max_generations: 3,
            ..GaConfig::default()
        };
        let r = direct_optimize(&s, &rose, &model, &cfg, AepMode::Traversal).unwrap();
        assert!(r.best_vertices[0] < 9);
        assert_eq!(r.function_calls, r.evaluations * 8);
        let single = 8760.0 * model.turbine.power(9.0);
        assert!((r.best_aep_wh - single).abs() < 1e-6 * single);
    }
}
