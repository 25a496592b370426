//! Gaussian-wake farm power model.
//!
//! A single wake follows the self-similar Gaussian deficit profile whose
//! width grows linearly downstream at rate `k*`. Farm wakes are combined by
//! linear superposition of freestream-relative deficits, with every emitter's
//! thrust coefficient looked up at its own effective inflow speed.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NREL_5MW_CSV: &str = include_str!("../data/nrel_5mw.csv");

/// NREL 5 MW rotor diameter in meters.
pub const NREL_5MW_DIAMETER_M: f64 = 126.0;
/// NREL 5 MW hub height in meters.
pub const NREL_5MW_HUB_HEIGHT_M: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub speed_ms: f64,
    pub ct: f64,
    pub power_w: f64,
}

/// Rotor geometry plus tabulated thrust and power curves.
///
/// Curves are linearly interpolated between breakpoints. The first and last
/// breakpoints define the cut-in and cut-out speeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurbineSpec {
    pub rotor_diameter_m: f64,
    pub hub_height_m: f64,
    pub cut_in_ms: f64,
    pub cut_out_ms: f64,
    curve: Vec<CurvePoint>,
}

impl TurbineSpec {
    pub fn new(rotor_diameter_m: f64, hub_height_m: f64, curve: Vec<CurvePoint>) -> Result<Self> {
        if !(rotor_diameter_m > 0.0) {
            return Err(Error::Turbine(format!(
                "rotor diameter must be positive, got {rotor_diameter_m}"
            )));
        }
        if !(hub_height_m > 0.0) {
            return Err(Error::Turbine(format!(
                "hub height must be positive, got {hub_height_m}"
            )));
        }
        if curve.len() < 2 {
            return Err(Error::Turbine(
                "performance table needs at least two breakpoints".into(),
            ));
        }
        for pair in curve.windows(2) {
            if !(pair[1].speed_ms > pair[0].speed_ms) {
                return Err(Error::Turbine(format!(
                    "speeds must be strictly increasing ({} then {})",
                    pair[0].speed_ms, pair[1].speed_ms
                )));
            }
        }
        for p in &curve {
            if !(p.ct > 0.0 && p.ct < 1.0) {
                return Err(Error::Turbine(format!(
                    "thrust coefficient {} at {} m/s is outside (0, 1)",
                    p.ct, p.speed_ms
                )));
            }
            if !(p.power_w >= 0.0) || !p.power_w.is_finite() {
                return Err(Error::Turbine(format!(
                    "power {} at {} m/s must be finite and non-negative",
                    p.power_w, p.speed_ms
                )));
            }
        }
        let cut_in_ms = curve[0].speed_ms;
        let cut_out_ms = curve[curve.len() - 1].speed_ms;
        if !(cut_in_ms > 0.0) {
            return Err(Error::Turbine(format!(
                "cut-in speed must be positive, got {cut_in_ms}"
            )));
        }
        Ok(Self {
            rotor_diameter_m,
            hub_height_m,
            cut_in_ms,
            cut_out_ms,
            curve,
        })
    }

    /// Parses a `speed_ms,ct,power_w` table.
    pub fn from_csv_str(
        text: &str,
        source: &Path,
        rotor_diameter_m: f64,
        hub_height_m: f64,
    ) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::Parse {
            path: source.to_path_buf(),
            line: 1,
            msg: e.to_string(),
        })?;
        if headers.iter().collect::<Vec<_>>() != ["speed_ms", "ct", "power_w"] {
            return Err(Error::Parse {
                path: source.to_path_buf(),
                line: 1,
                msg: "expected header `speed_ms,ct,power_w`".into(),
            });
        }
        let mut curve = Vec::new();
        for (i, record) in reader.deserialize::<CurvePoint>().enumerate() {
            let point = record.map_err(|e| Error::Parse {
                path: source.to_path_buf(),
                line: i + 2,
                msg: e.to_string(),
            })?;
            curve.push(point);
        }
        Self::new(rotor_diameter_m, hub_height_m, curve)
    }

    pub fn from_csv(path: &Path, rotor_diameter_m: f64, hub_height_m: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, path, rotor_diameter_m, hub_height_m)
    }

    /// Built-in NREL 5 MW reference turbine.
    pub fn nrel_5mw() -> Self {
        Self::from_csv_str(
            NREL_5MW_CSV,
            Path::new("<builtin nrel_5mw.csv>"),
            NREL_5MW_DIAMETER_M,
            NREL_5MW_HUB_HEIGHT_M,
        )
        .expect("builtin turbine table is valid")
    }

    pub fn curve(&self) -> &[CurvePoint] {
        &self.curve
    }

    fn interpolate(&self, speed: f64, field: impl Fn(&CurvePoint) -> f64) -> f64 {
        let c = &self.curve;
        if speed <= c[0].speed_ms {
            return field(&c[0]);
        }
        if speed >= c[c.len() - 1].speed_ms {
            return field(&c[c.len() - 1]);
        }
        // first breakpoint strictly above `speed`
        let hi = c.partition_point(|p| p.speed_ms <= speed);
        let (a, b) = (&c[hi - 1], &c[hi]);
        let t = (speed - a.speed_ms) / (b.speed_ms - a.speed_ms);
        field(a) + t * (field(b) - field(a))
    }

    /// Thrust coefficient; clamped to the table ends outside its range.
    pub fn thrust_coefficient(&self, speed_ms: f64) -> f64 {
        self.interpolate(speed_ms, |p| p.ct)
    }

    /// Electrical power in watts; zero outside `[cut_in, cut_out]`.
    pub fn power(&self, speed_ms: f64) -> f64 {
        if speed_ms < self.cut_in_ms || speed_ms > self.cut_out_ms {
            return 0.0;
        }
        self.interpolate(speed_ms, |p| p.power_w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WakeParams {
    /// Linear wake growth rate.
    pub k_star: f64,
    /// Points per axis of the square rotor-averaging stencil (n x n samples
    /// spanning half a radius either side of the hub; 1 = hub point only).
    pub rotor_grid_points: usize,
}

impl Default for WakeParams {
    fn default() -> Self {
        Self {
            k_star: 0.05,
            rotor_grid_points: 3,
        }
    }
}

impl WakeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_star > 0.0) {
            return Err(Error::Domain(format!(
                "wake growth rate must be positive, got {}",
                self.k_star
            )));
        }
        if self.rotor_grid_points == 0 {
            return Err(Error::Domain("rotor_grid_points must be at least 1".into()));
        }
        Ok(())
    }

    /// Stencil offsets in meters along one rotor axis.
    pub fn stencil_offsets(&self, rotor_diameter_m: f64) -> Vec<f64> {
        let n = self.rotor_grid_points;
        if n <= 1 {
            return vec![0.0];
        }
        let half_span = 0.25 * rotor_diameter_m;
        (0..n)
            .map(|k| half_span * (2.0 * k as f64 / (n - 1) as f64 - 1.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Evenly spaced candidate vertices covering a rectangle with its lower-left
/// corner at the origin. Vertex `i` sits at column `i % nx`, row `i / nx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarmGrid {
    pub width_m: f64,
    pub height_m: f64,
    pub nx: usize,
    pub ny: usize,
}

impl FarmGrid {
    pub fn new(width_m: f64, height_m: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(width_m > 0.0 && height_m > 0.0) {
            return Err(Error::Config(format!(
                "farm extent must be positive, got {width_m} x {height_m}"
            )));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 vertices per axis, got {nx} x {ny}"
            )));
        }
        Ok(Self {
            width_m,
            height_m,
            nx,
            ny,
        })
    }

    /// Square farm of `extent_d` rotor diameters per side with `n x n` vertices.
    pub fn square(extent_d: f64, n: usize, rotor_diameter_m: f64) -> Result<Self> {
        let side = extent_d * rotor_diameter_m;
        Self::new(side, side, n, n)
    }

    pub fn vertex_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn dx(&self) -> f64 {
        self.width_m / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.height_m / (self.ny - 1) as f64
    }

    pub fn vertex(&self, index: usize) -> Point {
        let (col, row) = (index % self.nx, index / self.nx);
        Point::new(col as f64 * self.dx(), row as f64 * self.dy())
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * self.width_m, 0.5 * self.height_m)
    }

    pub fn contains(&self, p: &Point) -> bool {
        let tol = 1e-9 * self.width_m.max(self.height_m);
        p.x >= -tol && p.x <= self.width_m + tol && p.y >= -tol && p.y <= self.height_m + tol
    }

    /// Nearest vertex to a point, clamping to the rectangle.
    pub fn nearest_vertex(&self, p: &Point) -> usize {
        let col = (p.x / self.dx()).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let row = (p.y / self.dy()).round().clamp(0.0, (self.ny - 1) as f64) as usize;
        row * self.nx + col
    }

    /// Vertices within one grid step (8-neighbourhood), excluding `index`.
    pub fn neighbors(&self, index: usize) -> Vec<usize> {
        let (col, row) = ((index % self.nx) as isize, (index / self.nx) as isize);
        let mut out = Vec::with_capacity(8);
        for dr in -1..=1isize {
            for dc in -1..=1isize {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (c, r) = (col + dc, row + dr);
                if c >= 0 && r >= 0 && (c as usize) < self.nx && (r as usize) < self.ny {
                    out.push(r as usize * self.nx + c as usize);
                }
            }
        }
        out
    }
}

/// Turbine positions, optionally tied to the grid vertices they occupy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub positions: Vec<Point>,
    pub grid: Option<FarmGrid>,
    pub vertices: Option<Vec<usize>>,
}

impl Layout {
    pub fn new(positions: Vec<Point>) -> Self {
        Self {
            positions,
            grid: None,
            vertices: None,
        }
    }

    pub fn from_vertices(grid: FarmGrid, vertices: &[usize]) -> Result<Self> {
        let n = grid.vertex_count();
        let mut seen = vec![false; n];
        for &v in vertices {
            if v >= n {
                return Err(Error::Layout(format!(
                    "vertex {v} outside grid of {n} vertices"
                )));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::Layout(format!("vertex {v} occupied twice")));
            }
        }
        Ok(Self {
            positions: vertices.iter().map(|&v| grid.vertex(v)).collect(),
            grid: Some(grid),
            vertices: Some(vertices.to_vec()),
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Rotation center: the grid center when known, else the bounding-box center.
    pub fn center(&self) -> Point {
        if let Some(g) = &self.grid {
            return g.center();
        }
        if self.positions.is_empty() {
            return Point::new(0.0, 0.0);
        }
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &self.positions {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        Point::new(0.5 * (x0 + x1), 0.5 * (y0 + y1))
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                best = best.min(a.distance(b));
            }
        }
        best
    }

    /// Checks boundary containment, vertex uniqueness and minimum spacing.
    pub fn validate(&self, min_spacing_m: f64) -> Result<()> {
        if let Some(g) = &self.grid {
            if let Some(p) = self.positions.iter().find(|p| !g.contains(p)) {
                return Err(Error::Layout(format!(
                    "turbine at ({:.3}, {:.3}) lies outside the farm boundary",
                    p.x, p.y
                )));
            }
            if let Some(vs) = &self.vertices {
                let mut sorted = vs.clone();
                sorted.sort_unstable();
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::Layout("two turbines share a grid vertex".into()));
                }
            }
        }
        let d = self.min_pairwise_distance();
        if d < min_spacing_m * (1.0 - 1e-12) {
            return Err(Error::Layout(format!(
                "minimum turbine spacing {d:.3} m is below {min_spacing_m:.3} m"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindCondition {
    /// Meteorological direction the wind blows FROM, degrees in [0, 360).
    pub direction_deg: f64,
    pub speed_ms: f64,
}

impl WindCondition {
    pub fn new(direction_deg: f64, speed_ms: f64) -> Self {
        Self {
            direction_deg: direction_deg.rem_euclid(360.0),
            speed_ms: speed_ms.max(0.0),
        }
    }
}

/// Initial wake width `epsilon` (in rotor diameters) from matching the mass
/// flow deficit just behind the rotor: `0.2 * sqrt(beta)` with
/// `beta = (1 + sqrt(1 - ct)) / (2 sqrt(1 - ct))`.
pub fn epsilon_init(ct: f64) -> Result<f64> {
    if !(ct > 0.0 && ct < 1.0) {
        return Err(Error::Domain(format!(
            "thrust coefficient {ct} outside (0, 1)"
        )));
    }
    let root = (1.0 - ct).sqrt();
    let beta = (1.0 + root) / (2.0 * root);
    Ok(0.2 * beta.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WakeDeficit {
    /// Deficit as a fraction of the freestream speed.
    pub fraction: f64,
    /// True when the amplitude radicand was negative and the amplitude was clamped to 1.
    pub clamped: bool,
}

/// Amplitude and normalized width of one wake at streamwise distance `dx_d`
/// (in rotor diameters, > 0).
#[inline]
fn wake_core(ct: f64, k_star: f64, eps: f64, dx_d: f64) -> (f64, f64, bool) {
    let sigma_d = k_star * dx_d + eps;
    let radicand = 1.0 - ct / (8.0 * sigma_d * sigma_d);
    if radicand < 0.0 {
        (1.0, sigma_d, true)
    } else {
        (1.0 - radicand.sqrt(), sigma_d, false)
    }
}

/// Fractional velocity deficit of a single wake at offset `(dx, dy, dz)` in
/// meters from the emitting rotor's hub. Upstream points (`dx <= 0`) see no deficit.
pub fn velocity_deficit(
    spec: &TurbineSpec,
    wp: &WakeParams,
    ct: f64,
    dx: f64,
    dy: f64,
    dz: f64,
) -> Result<WakeDeficit> {
    let eps = epsilon_init(ct)?;
    if !(dx > 0.0) {
        return Ok(WakeDeficit {
            fraction: 0.0,
            clamped: false,
        });
    }
    let d0 = spec.rotor_diameter_m;
    let (amp, sigma_d, clamped) = wake_core(ct, wp.k_star, eps, dx / d0);
    let (yd, zd) = (dy / d0, dz / d0);
    let gauss = (-(yd * yd + zd * zd) / (2.0 * sigma_d * sigma_d)).exp();
    Ok(WakeDeficit {
        fraction: amp * gauss,
        clamped,
    })
}

/// Maps positions into the wind frame: flow along +x, rotation about `center`.
///
/// For a meteorological direction `theta` the flow vector is
/// `(-sin theta, -cos theta)` in (east, north) coordinates.
pub fn rotate_to_wind_frame(positions: &[Point], center: Point, direction_deg: f64) -> Vec<Point> {
    let (s, c) = direction_deg.to_radians().sin_cos();
    positions
        .iter()
        .map(|p| {
            let (dx, dy) = (p.x - center.x, p.y - center.y);
            Point::new(-s * dx - c * dy, c * dx - s * dy)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarmPower {
    pub turbine_powers_w: Vec<f64>,
    pub effective_speeds_ms: Vec<f64>,
    pub total_w: f64,
    /// Number of wake/turbine pairs whose amplitude had to be clamped.
    pub near_wake_clamps: usize,
}

/// Turbine type plus wake parameters; evaluates farm flow for a layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarmModel {
    pub turbine: TurbineSpec,
    pub wake: WakeParams,
    #[serde(skip)]
    calls: CallCounter,
}

/// Running count of `farm_power` evaluations. Clones start from the current
/// count; equality ignores it.
#[derive(Debug, Default)]
struct CallCounter(AtomicUsize);

impl Clone for CallCounter {
    fn clone(&self) -> Self {
        Self(AtomicUsize::new(self.0.load(Ordering::Relaxed)))
    }
}

impl PartialEq for CallCounter {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

struct Sweep {
    frame: Vec<Point>,
    speeds: Vec<f64>,
    cts: Vec<f64>,
    clamps: usize,
}

impl FarmModel {
    pub fn new(turbine: TurbineSpec, wake: WakeParams) -> Result<Self> {
        wake.validate()?;
        Ok(Self {
            turbine,
            wake,
            calls: CallCounter::default(),
        })
    }

    /// Number of `farm_power` evaluations made through this model so far.
    pub fn farm_power_calls(&self) -> usize {
        self.calls.0.load(Ordering::Relaxed)
    }

    pub fn min_spacing_m(&self) -> f64 {
        2.0 * self.turbine.rotor_diameter_m
    }

    fn sweep(&self, layout: &Layout, cond: &WindCondition) -> Sweep {
        let n = layout.len();
        let frame = rotate_to_wind_frame(&layout.positions, layout.center(), cond.direction_deg);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| frame[a].x.total_cmp(&frame[b].x).then(a.cmp(&b)));

        let d0 = self.turbine.rotor_diameter_m;
        let offsets = self.wake.stencil_offsets(d0);
        let n_pts = (offsets.len() * offsets.len()) as f64;
        let u_inf = cond.speed_ms;

        let mut speeds = vec![u_inf; n];
        let mut cts = vec![0.0; n];
        let mut eps = vec![0.0; n];
        let mut clamps = 0;
        let mut gy = vec![0.0; offsets.len()];
        let mut gz = vec![0.0; offsets.len()];

        for (rank, &i) in order.iter().enumerate() {
            let mut total_deficit = 0.0;
            for &j in &order[..rank] {
                let dx = frame[i].x - frame[j].x;
                if dx <= 0.0 {
                    continue;
                }
                let (amp, sigma_d, clamped) = wake_core(cts[j], self.wake.k_star, eps[j], dx / d0);
                if clamped {
                    clamps += 1;
                }
                let inv = 1.0 / (2.0 * sigma_d * sigma_d * d0 * d0);
                let dy = frame[i].y - frame[j].y;
                for (k, off) in offsets.iter().enumerate() {
                    let yy = dy + off;
                    gy[k] = (-yy * yy * inv).exp();
                    gz[k] = (-off * off * inv).exp();
                }
                let sy: f64 = gy.iter().sum();
                let sz: f64 = gz.iter().sum();
                total_deficit += amp * sy * sz / n_pts;
            }
            speeds[i] = (u_inf * (1.0 - total_deficit)).max(0.0);
            cts[i] = self.turbine.thrust_coefficient(speeds[i]);
            eps[i] = epsilon_init(cts[i]).expect("table thrust coefficients lie in (0, 1)");
        }
        Sweep {
            frame,
            speeds,
            cts,
            clamps,
        }
    }

    /// Rotor-averaged effective inflow speed of turbine `idx`.
    pub fn effective_speed(&self, layout: &Layout, idx: usize, cond: &WindCondition) -> f64 {
        self.sweep(layout, cond).speeds[idx]
    }

    pub fn farm_power(&self, layout: &Layout, cond: &WindCondition) -> FarmPower {
        self.calls.0.fetch_add(1, Ordering::Relaxed);
        let sweep = self.sweep(layout, cond);
        let turbine_powers_w: Vec<f64> = sweep
            .speeds
            .iter()
            .map(|&u| self.turbine.power(u))
            .collect();
        let total_w = turbine_powers_w.iter().sum();
        FarmPower {
            turbine_powers_w,
            effective_speeds_ms: sweep.speeds,
            total_w,
            near_wake_clamps: sweep.clamps,
        }
    }

    /// Hub-height wind speed at arbitrary ground points, with every turbine's
    /// wake evaluated at its converged thrust coefficient.
    pub fn hub_height_field(
        &self,
        layout: &Layout,
        cond: &WindCondition,
        points: &[Point],
    ) -> Vec<f64> {
        let sweep = self.sweep(layout, cond);
        let center = layout.center();
        let probes = rotate_to_wind_frame(points, center, cond.direction_deg);
        let d0 = self.turbine.rotor_diameter_m;
        probes
            .iter()
            .map(|q| {
                let deficit: f64 = sweep
                    .frame
                    .iter()
                    .zip(&sweep.cts)
                    .map(|(src, &ct)| {
                        let (dx, dy) = (q.x - src.x, q.y - src.y);
                        if dx <= 0.0 {
                            return 0.0;
                        }
                        let eps = epsilon_init(ct).expect("table ct in (0, 1)");
                        let (amp, sigma_d, _) = wake_core(ct, self.wake.k_star, eps, dx / d0);
                        let yd = dy / d0;
                        amp * (-yd * yd / (2.0 * sigma_d * sigma_d)).exp()
                    })
                    .sum();
                (cond.speed_ms * (1.0 - deficit)).max(0.0)
            })
            .collect()
    }
}
