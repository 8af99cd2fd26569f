//! Mode-switching-point optimization.
//!
//! A single-beetle antennae search walks a candidate switching point around
//! the initial one chosen by the graph searches, scoring each candidate by
//! the local energy consequence of switching there plus a weighted terrain
//! gradient penalty. Three budget-matched baselines (lattice enumeration,
//! uniform random search, global-best PSO) share the same fitness interface
//! for the comparison harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyParams, Mode, Segment};
use crate::geom::Vec3;
use crate::ground::{feasible_node, MobilityLimits};
use crate::terrain::{GridIndex, TerrainGrid};

/// Optimizer hyperparameters. Distances are meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasParams {
    /// Antennae separation D.
    pub antennae_distance: f64,
    /// Initial step length.
    pub step: f64,
    /// Multiplicative step decay per iteration, (0, 1].
    pub step_decay: f64,
    pub iterations: u32,
    /// Weight of the gradient penalty, joules per unit of R.
    pub alpha: f64,
    pub w_a: f64,
    pub w_b: f64,
    pub w_c: f64,
    pub seed: u64,
    /// Candidates are confined to this radius around the initial point.
    pub search_radius: f64,
    /// Linear SOC schedule for alpha: effective alpha is
    /// `alpha * (alpha_soc_c0 + alpha_soc_c1 * soc)`.
    pub alpha_soc_c0: f64,
    pub alpha_soc_c1: f64,
}

impl BasParams {
    /// Scale-relative defaults for a given cell size.
    pub fn defaults_for_cell(cell: f64) -> Self {
        BasParams {
            antennae_distance: 4.0 * cell,
            step: 2.0 * cell,
            step_decay: 0.95,
            iterations: 50,
            alpha: 500.0,
            w_a: 1.0,
            w_b: 1.0,
            w_c: 2.0,
            seed: 1,
            search_radius: 8.0 * cell,
            alpha_soc_c0: 1.0,
            alpha_soc_c1: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.antennae_distance > 0.0) {
            return Err("antennae_distance must be positive".into());
        }
        if !(self.step > 0.0) {
            return Err("step must be positive".into());
        }
        if !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return Err(format!(
                "step_decay must be in (0, 1], got {}",
                self.step_decay
            ));
        }
        if self.iterations < 1 {
            return Err("iterations must be >= 1".into());
        }
        if !(self.search_radius > 0.0) {
            return Err("search_radius must be positive".into());
        }
        Ok(())
    }

    /// Effective gradient weight under the SOC schedule.
    pub fn alpha_at(&self, soc: f64) -> f64 {
        self.alpha * (self.alpha_soc_c0 + self.alpha_soc_c1 * soc)
    }
}

/// Fitness of a candidate switching point: `f = e_term + alpha * r_term`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchFitness {
    pub e_term: f64,
    pub r_term: f64,
    pub f: f64,
}

impl SwitchFitness {
    pub fn rejected() -> Self {
        SwitchFitness {
            e_term: f64::INFINITY,
            r_term: f64::INFINITY,
            f: f64::INFINITY,
        }
    }
}

/// Local plan context around a switch: where the robot approaches from (and
/// in which mode) and where it departs to after transforming.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchContext {
    pub approach: Vec3,
    pub approach_mode: Mode,
    pub departure: Vec3,
    pub departure_mode: Mode,
}

/// Pluggable fitness; shared by the beetle search and all baselines so the
/// harness can count evaluations uniformly.
pub trait FitnessFn {
    fn eval(&mut self, candidate: Vec3) -> SwitchFitness;
}

impl<F: FnMut(Vec3) -> SwitchFitness> FitnessFn for F {
    fn eval(&mut self, candidate: Vec3) -> SwitchFitness {
        self(candidate)
    }
}

/// Terrain-backed fitness: candidates snap to their containing cell,
/// infeasible or out-of-radius cells are rejected with infinite fitness,
/// and the energy term reroutes the local plan through the candidate
/// (approach leg, transform, departure leg).
pub struct SwitchPointFitness<'a> {
    pub grid: &'a TerrainGrid,
    pub limits: &'a MobilityLimits,
    pub energy: &'a EnergyParams,
    pub context: SwitchContext,
    pub center: Vec3,
    pub search_radius: f64,
    pub alpha: f64,
    pub w_a: f64,
    pub w_b: f64,
    pub w_c: f64,
}

impl SwitchPointFitness<'_> {
    fn eval_cell(&self, cell: GridIndex) -> SwitchFitness {
        if !feasible_node(self.grid, cell, self.limits) {
            return SwitchFitness::rejected();
        }
        let point = match self.grid.surface_point(cell) {
            Ok(p) => p,
            Err(_) => return SwitchFitness::rejected(),
        };
        if point.horizontal_distance(self.center) > self.search_radius {
            return SwitchFitness::rejected();
        }
        let grad = match self.grid.gradient_at(cell) {
            Ok(g) => g,
            Err(_) => return SwitchFitness::rejected(),
        };
        let r_term = self.w_a * grad.gx + self.w_b * grad.gy + self.w_c * grad.gz;

        let approach = segment_between(self.context.approach, point, self.context.approach_mode);
        let departure = segment_between(point, self.context.departure, self.context.departure_mode);
        let e_term = self.energy.segment_energy(&approach, false)
            + self.energy.transform_energy()
            + self.energy.segment_energy(&departure, false);

        SwitchFitness {
            e_term,
            r_term,
            f: e_term + self.alpha * r_term,
        }
    }
}

fn segment_between(from: Vec3, to: Vec3, mode: Mode) -> Segment {
    Segment::new(from.distance(to), to.z - from.z, mode)
}

impl FitnessFn for SwitchPointFitness<'_> {
    fn eval(&mut self, candidate: Vec3) -> SwitchFitness {
        match self.grid.cell_at(candidate.x, candidate.y) {
            Some(cell) => self.eval_cell(cell),
            None => SwitchFitness::rejected(),
        }
    }
}

/// Uniformly distributed unit vector, built by normalizing a standard
/// normal sample. Degenerate draws are resampled.
pub fn random_direction(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if let Some(unit) = v.normalized() {
            if v.norm() > 1e-12 {
                return unit;
            }
        }
    }
}

/// Antennae endpoints: half the separation along the direction either way.
pub fn antennae_positions(centroid: Vec3, b: Vec3, d: f64) -> (Vec3, Vec3) {
    let offset = b * (d / 2.0);
    (centroid + offset, centroid - offset)
}

/// Sign convention for the centroid update; ties hold the centroid still.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasTraceRow {
    pub iteration: u32,
    pub point: Vec3,
    pub fitness: SwitchFitness,
}

/// Optimizer state across iterations.
#[derive(Debug, Clone)]
pub struct BasState {
    pub centroid: Vec3,
    pub best_point: Vec3,
    pub best_fitness: SwitchFitness,
    pub iteration: u32,
    pub step: f64,
    pub history: Vec<BasTraceRow>,
}

#[derive(Debug, Clone)]
pub struct SwitchOptResult {
    pub point: GridIndex,
    pub position: Vec3,
    pub fitness: SwitchFitness,
    pub trace: Vec<BasTraceRow>,
    pub evaluations: usize,
}

/// Single-beetle antennae search around an initial on-terrain point.
pub struct BasOptimizer<'a> {
    grid: &'a TerrainGrid,
    params: BasParams,
    center: Vec3,
    rng: ChaCha8Rng,
}

impl<'a> BasOptimizer<'a> {
    pub fn new(grid: &'a TerrainGrid, initial: GridIndex, params: BasParams) -> Result<Self, crate::terrain::TerrainError> {
        let center = grid.surface_point(initial)?;
        Ok(BasOptimizer {
            grid,
            params,
            center,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
        })
    }

    /// Clamp into the search disc and project onto the terrain surface.
    fn project(&self, p: Vec3) -> Vec3 {
        let mut q = p;
        let dist = q.horizontal_distance(self.center);
        if dist > self.params.search_radius {
            let scale = self.params.search_radius / dist;
            q.x = self.center.x + (q.x - self.center.x) * scale;
            q.y = self.center.y + (q.y - self.center.y) * scale;
        }
        match self.grid.cell_at(q.x, q.y) {
            Some(cell) => match self.grid.surface_point(cell) {
                Ok(s) => Vec3::new(q.x, q.y, s.z),
                Err(_) => Vec3::new(q.x, q.y, self.center.z),
            },
            None => {
                // Outside the grid after the radius clamp: hold at center z.
                Vec3::new(q.x, q.y, self.center.z)
            }
        }
    }

    /// One iteration: probe both antennae, move the centroid toward the
    /// cheaper side, evaluate the new centroid, retain the best-so-far.
    /// Exactly three fitness evaluations.
    pub fn step(&mut self, state: &mut BasState, fitness: &mut dyn FitnessFn) -> usize {
        let b = random_direction(&mut self.rng);
        let (right, left) = antennae_positions(state.centroid, b, self.params.antennae_distance);
        let f_right = fitness.eval(right);
        let f_left = fitness.eval(left);

        let s = match (f_right.f.is_infinite(), f_left.f.is_infinite()) {
            (true, true) => 0.0,
            _ => sign(f_right.f - f_left.f),
        };
        let moved = state.centroid - b * (state.step * s);
        state.centroid = self.project(moved);

        let f_center = fitness.eval(state.centroid);
        state.iteration += 1;
        state.history.push(BasTraceRow {
            iteration: state.iteration,
            point: state.centroid,
            fitness: f_center,
        });
        if f_center.f < state.best_fitness.f {
            state.best_fitness = f_center;
            state.best_point = state.centroid;
        }
        state.step *= self.params.step_decay;
        3
    }

    /// Runs the configured number of iterations. The initial point is
    /// evaluated first and retained as the incumbent, so the result is
    /// never worse than the starting point.
    pub fn run(&mut self, fitness: &mut dyn FitnessFn) -> SwitchOptResult {
        let incumbent = fitness.eval(self.center);
        let mut state = BasState {
            centroid: self.center,
            best_point: self.center,
            best_fitness: incumbent,
            iteration: 0,
            step: self.params.step,
            history: vec![BasTraceRow {
                iteration: 0,
                point: self.center,
                fitness: incumbent,
            }],
        };
        let mut evaluations = 1usize;
        for _ in 0..self.params.iterations {
            evaluations += self.step(&mut state, fitness);
        }
        let point = self
            .grid
            .cell_at(state.best_point.x, state.best_point.y)
            .unwrap_or_else(|| nearest_cell(self.grid, state.best_point));
        SwitchOptResult {
            point,
            position: state.best_point,
            fitness: state.best_fitness,
            trace: state.history,
            evaluations,
        }
    }
}

fn nearest_cell(grid: &TerrainGrid, p: Vec3) -> GridIndex {
    let (ox, oy) = grid.origin();
    let cell = grid.cell_size();
    let col = ((p.x - ox) / cell - 0.5).round().clamp(0.0, (grid.ncols() - 1) as f64);
    let row = (grid.nrows() as f64 - 1.0 - ((p.y - oy) / cell - 0.5))
        .round()
        .clamp(0.0, (grid.nrows() - 1) as f64);
    GridIndex::new(col as usize, row as usize)
}

/// Convenience wrapper building the terrain fitness and running BAS.
#[allow(clippy::too_many_arguments)]
pub fn optimize_switch_point(
    grid: &TerrainGrid,
    initial: GridIndex,
    context: SwitchContext,
    params: &BasParams,
    limits: &MobilityLimits,
    energy: &EnergyParams,
    soc: f64,
) -> Result<SwitchOptResult, crate::terrain::TerrainError> {
    let center = grid.surface_point(initial)?;
    let mut fitness = SwitchPointFitness {
        grid,
        limits,
        energy,
        context,
        center,
        search_radius: params.search_radius,
        alpha: params.alpha_at(soc),
        w_a: params.w_a,
        w_b: params.w_b,
        w_c: params.w_c,
    };
    let mut opt = BasOptimizer::new(grid, initial, *params)?;
    Ok(opt.run(&mut fitness))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    ExhaustiveGrid,
    RandomSearch,
    ParticleSwarm,
}

impl std::fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BaselineMethod::ExhaustiveGrid => write!(f, "exhaustive-grid"),
            BaselineMethod::RandomSearch => write!(f, "random-search"),
            BaselineMethod::ParticleSwarm => write!(f, "particle-swarm"),
        }
    }
}

/// All in-radius cells around a center, in deterministic row-major order.
pub fn cells_in_radius(grid: &TerrainGrid, center: Vec3, radius: f64) -> Vec<GridIndex> {
    let mut out = Vec::new();
    for row in 0..grid.nrows() {
        for col in 0..grid.ncols() {
            let idx = GridIndex::new(col, row);
            let (x, y) = grid.cell_center(idx);
            let dx = x - center.x;
            let dy = y - center.y;
            if (dx * dx + dy * dy).sqrt() <= radius {
                out.push(idx);
            }
        }
    }
    out
}

/// Budget-matched comparison baselines. Every call consumes exactly
/// `budget` fitness evaluations.
pub fn baseline_optimize(
    grid: &TerrainGrid,
    initial: GridIndex,
    method: BaselineMethod,
    budget: usize,
    params: &BasParams,
    fitness: &mut dyn FitnessFn,
) -> Result<SwitchOptResult, crate::terrain::TerrainError> {
    assert!(budget >= 1, "budget must be at least 1");
    let center = grid.surface_point(initial)?;
    let mut best_point = center;
    let mut best = SwitchFitness::rejected();
    let mut trace = Vec::new();
    let consider = |point: Vec3, f: SwitchFitness, i: usize, best: &mut SwitchFitness, best_point: &mut Vec3, trace: &mut Vec<BasTraceRow>| {
        trace.push(BasTraceRow {
            iteration: i as u32,
            point,
            fitness: f,
        });
        if f.f < best.f || (best.f.is_infinite() && f.f.is_infinite() && i == 0) {
            *best = f;
            *best_point = point;
        }
    };

    match method {
        BaselineMethod::ExhaustiveGrid => {
            let lattice = cells_in_radius(grid, center, params.search_radius);
            let lattice = if lattice.is_empty() { vec![initial] } else { lattice };
            for i in 0..budget {
                let cell = lattice[i % lattice.len()];
                let p = grid.surface_point(cell).unwrap_or(center);
                let f = fitness.eval(p);
                consider(p, f, i, &mut best, &mut best_point, &mut trace);
            }
        }
        BaselineMethod::RandomSearch => {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(0x5eed_0001));
            for i in 0..budget {
                let p = random_in_disc(&mut rng, center, params.search_radius);
                let p = surface_at(grid, p, center);
                let f = fitness.eval(p);
                consider(p, f, i, &mut best, &mut best_point, &mut trace);
            }
        }
        BaselineMethod::ParticleSwarm => {
            // Steady-state global-best PSO evaluated round-robin so any
            // budget is consumed exactly.
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(0x5eed_0002));
            let swarm = budget.clamp(1, 10);
            let (w, c1, c2) = (0.7, 1.5, 1.5);
            let v_max = params.search_radius / 2.0;
            let mut pos: Vec<Vec3> = (0..swarm)
                .map(|_| surface_at(grid, random_in_disc(&mut rng, center, params.search_radius), center))
                .collect();
            let mut vel: Vec<Vec3> = vec![Vec3::ZERO; swarm];
            let mut pbest: Vec<(Vec3, SwitchFitness)> =
                vec![(center, SwitchFitness::rejected()); swarm];
            let mut initialized = vec![false; swarm];
            for i in 0..budget {
                let k = i % swarm;
                if initialized[k] {
                    let r1: f64 = rng.random();
                    let r2: f64 = rng.random();
                    let to_pbest = pbest[k].0 - pos[k];
                    let to_gbest = best_point - pos[k];
                    vel[k] = vel[k] * w + to_pbest * (c1 * r1) + to_gbest * (c2 * r2);
                    let speed = vel[k].norm();
                    if speed > v_max {
                        vel[k] = vel[k] * (v_max / speed);
                    }
                    let moved = pos[k] + vel[k];
                    let clamped = clamp_to_disc(moved, center, params.search_radius);
                    pos[k] = surface_at(grid, clamped, center);
                }
                initialized[k] = true;
                let f = fitness.eval(pos[k]);
                if f.f < pbest[k].1.f {
                    pbest[k] = (pos[k], f);
                }
                consider(pos[k], f, i, &mut best, &mut best_point, &mut trace);
            }
        }
    }

    let point = grid
        .cell_at(best_point.x, best_point.y)
        .unwrap_or_else(|| nearest_cell(grid, best_point));
    Ok(SwitchOptResult {
        point,
        position: best_point,
        fitness: best,
        trace,
        evaluations: budget,
    })
}

fn random_in_disc(rng: &mut impl Rng, center: Vec3, radius: f64) -> Vec3 {
    let u: f64 = rng.random();
    let theta: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let r = radius * u.sqrt();
    Vec3::new(center.x + r * theta.cos(), center.y + r * theta.sin(), center.z)
}

fn clamp_to_disc(p: Vec3, center: Vec3, radius: f64) -> Vec3 {
    let d = p.horizontal_distance(center);
    if d <= radius {
        return p;
    }
    let s = radius / d;
    Vec3::new(
        center.x + (p.x - center.x) * s,
        center.y + (p.y - center.y) * s,
        p.z,
    )
}

fn surface_at(grid: &TerrainGrid, p: Vec3, fallback: Vec3) -> Vec3 {
    match grid.cell_at(p.x, p.y) {
        Some(cell) => match grid.surface_point(cell) {
            Ok(s) => Vec3::new(p.x, p.y, s.z),
            Err(_) => Vec3::new(p.x, p.y, fallback.z),
        },
        None => Vec3::new(p.x, p.y, fallback.z),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_direction_is_unit_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let b = random_direction(&mut rng);
            assert!((b.norm() - 1.0).abs() < 1e-12);
        }
        let a = random_direction(&mut ChaCha8Rng::seed_from_u64(4));
        let b = random_direction(&mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    #[test]
    fn random_direction_is_isotropic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut sum = Vec3::ZERO;
        let n = 10_000;
        for _ in 0..n {
            sum = sum + random_direction(&mut rng);
        }
        let mean = sum * (1.0 / n as f64);
        assert!(mean.norm() < 0.05, "mean direction {mean:?}");
    }

    #[test]
    fn antennae_algebra() {
        let c = Vec3::ZERO;
        let b = Vec3::new(1.0, 0.0, 0.0);
        let (right, left) = antennae_positions(c, b, 2.0);
        assert_eq!(right, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(left, Vec3::new(-1.0, 0.0, 0.0));
        // Midpoint identity and separation for arbitrary inputs.
        let c = Vec3::new(3.0, -2.0, 7.0);
        let b = Vec3::new(0.6, 0.8, 0.0);
        let d = 5.0;
        let (r, l) = antennae_positions(c, b, d);
        let mid = (r + l) * 0.5;
        assert!((mid - c).norm() < 1e-12);
        assert!(((r - l).norm() - d).abs() < 1e-12);
        let diff = r - l;
        assert!((diff - b * d).norm() < 1e-12);
    }

    fn flat_grid() -> TerrainGrid {
        TerrainGrid::from_fn(40, 40, 12.0, |_, _| 0.0).unwrap()
    }

    #[test]
    fn bas_moves_toward_cheaper_antenna_and_holds_on_ties() {
        let grid = flat_grid();
        let params = BasParams {
            iterations: 1,
            ..BasParams::defaults_for_cell(12.0)
        };
        // Tie case: constant fitness, centroid must not move.
        let mut opt = BasOptimizer::new(&grid, GridIndex::new(20, 20), params).unwrap();
        let start = opt.center;
        let mut state = BasState {
            centroid: start,
            best_point: start,
            best_fitness: SwitchFitness {
                e_term: 1.0,
                r_term: 0.0,
                f: 1.0,
            },
            iteration: 0,
            step: params.step,
            history: Vec::new(),
        };
        let mut flatf = |_: Vec3| SwitchFitness {
            e_term: 1.0,
            r_term: 0.0,
            f: 1.0,
        };
        let evals = opt.step(&mut state, &mut flatf);
        assert_eq!(evals, 3);
        assert_eq!(state.centroid, start);

        // Gradient along +x: right antenna more expensive whenever b has a
        // +x component, so the centroid slides toward smaller x.
        let mut opt = BasOptimizer::new(&grid, GridIndex::new(20, 20), params).unwrap();
        let mut state = BasState {
            centroid: start,
            best_point: start,
            best_fitness: SwitchFitness {
                e_term: start.x,
                r_term: 0.0,
                f: start.x,
            },
            iteration: 0,
            step: params.step,
            history: Vec::new(),
        };
        let mut slope = |p: Vec3| SwitchFitness {
            e_term: p.x,
            r_term: 0.0,
            f: p.x,
        };
        opt.step(&mut state, &mut slope);
        assert!(state.centroid.x < start.x);
    }

    #[test]
    fn incumbent_retention_on_hostile_landscape() {
        // Fitness grows away from the initial point; BAS must still return
        // the initial point.
        let grid = flat_grid();
        let params = BasParams::defaults_for_cell(12.0);
        let center = grid.surface_point(GridIndex::new(20, 20)).unwrap();
        for seed in 0..20 {
            let p = BasParams { seed, ..params };
            let mut opt = BasOptimizer::new(&grid, GridIndex::new(20, 20), p).unwrap();
            let mut f = |q: Vec3| {
                let d = q.horizontal_distance(center);
                SwitchFitness {
                    e_term: d,
                    r_term: 0.0,
                    f: d,
                }
            };
            let result = opt.run(&mut f);
            assert!(result.fitness.f <= 1e-12, "seed {seed}: {:?}", result.fitness);
            assert_eq!(result.point, GridIndex::new(20, 20));
        }
    }

    #[test]
    fn eval_count_is_one_plus_three_per_iteration() {
        let grid = flat_grid();
        let params = BasParams {
            iterations: 13,
            ..BasParams::defaults_for_cell(12.0)
        };
        let mut count = 0usize;
        let mut f = |_: Vec3| {
            count += 1;
            SwitchFitness {
                e_term: 0.0,
                r_term: 0.0,
                f: 0.0,
            }
        };
        let mut opt = BasOptimizer::new(&grid, GridIndex::new(20, 20), params).unwrap();
        let result = opt.run(&mut f);
        assert_eq!(count, 1 + 3 * 13);
        assert_eq!(result.evaluations, count);
    }

    #[test]
    fn best_fitness_monotone_over_iterations() {
        let grid = flat_grid();
        let params = BasParams::defaults_for_cell(12.0);
        let target = Vec3::new(250.0, 250.0, 0.0);
        let mut f = |p: Vec3| {
            let d = p.horizontal_distance(target);
            SwitchFitness {
                e_term: d * d,
                r_term: 0.0,
                f: d * d,
            }
        };
        let mut opt = BasOptimizer::new(&grid, GridIndex::new(20, 20), params).unwrap();
        let result = opt.run(&mut f);
        let mut best = f64::INFINITY;
        for row in &result.trace {
            let running = row.fitness.f.min(best);
            assert!(running <= best);
            best = running;
        }
        assert!(result.fitness.f <= result.trace[0].fitness.f);
    }

    #[test]
    fn terrain_fitness_basics() {
        let grid = flat_grid();
        let limits = MobilityLimits::default();
        let energy = EnergyParams::default();
        let center = grid.surface_point(GridIndex::new(20, 20)).unwrap();
        let ctx = SwitchContext {
            approach: grid.surface_point(GridIndex::new(17, 20)).unwrap(),
            approach_mode: Mode::Drive,
            departure: grid.surface_point(GridIndex::new(35, 20)).unwrap(),
            departure_mode: Mode::Fly,
        };
        let mut fit = SwitchPointFitness {
            grid: &grid,
            limits: &limits,
            energy: &energy,
            context: ctx,
            center,
            search_radius: 8.0 * 12.0,
            alpha: 500.0,
            w_a: 1.0,
            w_b: 1.0,
            w_c: 2.0,
        };
        // Flat terrain: zero gradient penalty, f = e exactly.
        let f = fit.eval(center);
        assert_eq!(f.r_term, 0.0);
        assert_eq!(f.f, f.e_term);
        assert!(f.e_term > 0.0);
        // Out of radius is rejected.
        let far = grid.surface_point(GridIndex::new(35, 20)).unwrap();
        assert!(fit.eval(far).f.is_infinite());
        // Alpha 0 degenerates to the energy term alone.
        fit.alpha = 0.0;
        let f0 = fit.eval(center);
        assert_eq!(f0.f, f0.e_term);
    }

    #[test]
    fn fitness_prefers_gentler_gradient_at_equal_energy() {
        // Two candidate cells symmetric about the context so the energy
        // terms match; the steeper cell must score strictly worse.
        let cell = 12.0;
        let grid = TerrainGrid::from_fn(41, 41, cell, |_, y| {
            // Slope along y only in the upper half.
            if y > 246.0 {
                0.3 * (y - 246.0)
            } else {
                0.0
            }
        })
        .unwrap();
        let limits = MobilityLimits::default();
        let energy = EnergyParams::default();
        let center = grid.surface_point(GridIndex::new(20, 20)).unwrap();
        let ctx = SwitchContext {
            approach: center,
            approach_mode: Mode::Drive,
            departure: center,
            departure_mode: Mode::Fly,
        };
        let mut fit = SwitchPointFitness {
            grid: &grid,
            limits: &limits,
            energy: &energy,
            context: ctx,
            center,
            search_radius: 500.0,
            alpha: 500.0,
            w_a: 0.0,
            w_b: 0.0,
            w_c: 2.0,
        };
        let flat_cell = GridIndex::new(20, 25);
        let sloped_cell = GridIndex::new(20, 12);
        let f_flat = fit.eval(grid.surface_point(flat_cell).unwrap());
        let f_slope = fit.eval(grid.surface_point(sloped_cell).unwrap());
        assert!(f_flat.r_term < f_slope.r_term);
    }

    #[test]
    fn exhaustive_grid_finds_lattice_argmin() {
        let grid = flat_grid();
        let params = BasParams::defaults_for_cell(12.0);
        let initial = GridIndex::new(20, 20);
        let center = grid.surface_point(initial).unwrap();
        let target = grid.surface_point(GridIndex::new(23, 18)).unwrap();
        let cells = cells_in_radius(&grid, center, params.search_radius);
        let mut f = |p: Vec3| {
            let d = p.horizontal_distance(target);
            SwitchFitness {
                e_term: d * d,
                r_term: 0.0,
                f: d * d,
            }
        };
        let r = baseline_optimize(
            &grid,
            initial,
            BaselineMethod::ExhaustiveGrid,
            cells.len(),
            &params,
            &mut f,
        )
        .unwrap();
        assert_eq!(r.point, GridIndex::new(23, 18));
        assert_eq!(r.evaluations, cells.len());
    }

    #[test]
    fn alpha_schedule_scales_with_soc() {
        let params = BasParams {
            alpha: 500.0,
            alpha_soc_c0: 0.5,
            alpha_soc_c1: 1.0,
            ..BasParams::defaults_for_cell(12.0)
        };
        assert_eq!(params.alpha_at(1.0), 750.0);
        assert_eq!(params.alpha_at(0.5), 500.0);
        assert!(params.alpha_at(0.9) > params.alpha_at(0.2));
        // Default schedule is flat.
        let flat = BasParams::defaults_for_cell(12.0);
        assert_eq!(flat.alpha_at(1.0), flat.alpha);
        assert_eq!(flat.alpha_at(0.1), flat.alpha);
    }

    #[test]
    fn zero_iterations_returns_the_incumbent() {
        let grid = flat_grid();
        let params = BasParams {
            iterations: 0,
            ..BasParams::defaults_for_cell(12.0)
        };
        let mut evals = 0usize;
        let mut f = |p: Vec3| {
            evals += 1;
            SwitchFitness {
                e_term: p.x,
                r_term: 0.0,
                f: p.x,
            }
        };
        let mut opt = BasOptimizer::new(&grid, GridIndex::new(20, 20), params).unwrap();
        let r = opt.run(&mut f);
        assert_eq!(r.point, GridIndex::new(20, 20));
        assert_eq!(evals, 1);
    }

    #[test]
    fn fixed_seed_gives_bit_identical_traces() {
        let grid = flat_grid();
        let params = BasParams {
            seed: 77,
            iterations: 25,
            ..BasParams::defaults_for_cell(12.0)
        };
        let target = Vec3::new(270.0, 230.0, 0.0);
        let run = || {
            let mut f = |p: Vec3| {
                let d = p.horizontal_distance(target);
                SwitchFitness {
                    e_term: d,
                    r_term: 0.0,
                    f: d,
                }
            };
            let mut opt = BasOptimizer::new(&grid, GridIndex::new(20, 20), params).unwrap();
            opt.run(&mut f)
        };
        let a = run();
        let b = run();
        assert_eq!(a.trace.len(), b.trace.len());
        for (ra, rb) in a.trace.iter().zip(&b.trace) {
            assert_eq!(ra, rb);
        }
        assert_eq!(a.point, b.point);
    }

    #[test]
    fn bowl_one_cell_away_found_within_one_cell() {
        // Unimodal bowl with its minimum one cell from the start: the
        // search should land within one cell of it on nearly every seed
        // (the lattice argmin is the oracle by construction).
        let grid = flat_grid();
        let cell = 12.0;
        let initial = GridIndex::new(20, 20);
        let target = grid.surface_point(GridIndex::new(21, 20)).unwrap();
        let mut hits = 0;
        for seed in 0..100u64 {
            let params = BasParams {
                seed,
                ..BasParams::defaults_for_cell(cell)
            };
            let mut f = |p: Vec3| {
                let d = p.horizontal_distance(target);
                SwitchFitness {
                    e_term: d * d,
                    r_term: 0.0,
                    f: d * d,
                }
            };
            let mut opt = BasOptimizer::new(&grid, initial, params).unwrap();
            let r = opt.run(&mut f);
            let off = (r.point.col as i64 - 21).abs().max((r.point.row as i64 - 20).abs());
            if off <= 1 {
                hits += 1;
            }
        }
        assert!(hits >= 90, "within one cell on only {hits}/100 seeds");
    }

    #[test]
    fn baselines_respect_budget_and_determinism() {
        let grid = flat_grid();
        let params = BasParams::defaults_for_cell(12.0);
        let initial = GridIndex::new(20, 20);
        for method in [
            BaselineMethod::ExhaustiveGrid,
            BaselineMethod::RandomSearch,
            BaselineMethod::ParticleSwarm,
        ] {
            for budget in [1usize, 7, 40] {
                let mut count_a = 0usize;
                let mut fa = |p: Vec3| {
                    count_a += 1;
                    SwitchFitness {
                        e_term: p.x,
                        r_term: 0.0,
                        f: p.x,
                    }
                };
                let ra = baseline_optimize(&grid, initial, method, budget, &params, &mut fa)
                    .unwrap();
                assert_eq!(count_a, budget, "{method} budget {budget}");

                let mut fb = |p: Vec3| SwitchFitness {
                    e_term: p.x,
                    r_term: 0.0,
                    f: p.x,
                };
                let rb = baseline_optimize(&grid, initial, method, budget, &params, &mut fb)
                    .unwrap();
                assert_eq!(ra.position, rb.position, "{method} budget {budget}");
                assert_eq!(ra.fitness.f, rb.fitness.f);
            }
        }
    }
}
