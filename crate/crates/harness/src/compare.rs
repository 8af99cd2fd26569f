//! Scenario runs and the four-method switching-point comparison.
//!
//! Every optimizer is driven through an instrumented fitness wrapper so
//! evaluation budgets are counted by the harness, not trusted to the
//! implementations. The beetle search spends 1 + 3k evaluations for k
//! iterations; any budget remainder is burned on re-evaluating the initial
//! point so all methods consume exactly the same count.

use std::time::Instant;

use agplan_core::config::ResolvedConfig;
use agplan_core::energy::Mode;
use agplan_core::geom::Vec3;
use agplan_core::ground::{search_ground, GroundOutcome};
use agplan_core::planner::{account, plan, PlanError, PlannedPath};
use agplan_core::switch::{
    baseline_optimize, BasOptimizer, BasParams, BaselineMethod, FitnessFn, SwitchContext,
    SwitchFitness, SwitchOptResult, SwitchPointFitness,
};
use agplan_core::terrain::{GridIndex, TerrainGrid};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{MethodComparisonReport, MethodStats, PlanStats, ScenarioReport};
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario `{0}` never triggers a takeoff; nothing to compare")]
    NoSwitchingPoint(String),
    #[error("comparison budget must be at least 3 (one beetle iteration), got {0}")]
    BudgetTooSmall(usize),
    #[error(transparent)]
    Config(#[from] agplan_core::config::ConfigError),
    #[error(transparent)]
    Ground(#[from] agplan_core::ground::GroundError),
    #[error(transparent)]
    Terrain(#[from] agplan_core::terrain::TerrainError),
    #[error("planning failed: {0}")]
    Plan(String),
}

/// Fitness wrapper that counts evaluations.
pub struct CountingFitness<'a> {
    inner: &'a mut dyn FitnessFn,
    pub count: usize,
}

impl<'a> CountingFitness<'a> {
    pub fn new(inner: &'a mut dyn FitnessFn) -> Self {
        CountingFitness { inner, count: 0 }
    }
}

impl FitnessFn for CountingFitness<'_> {
    fn eval(&mut self, candidate: Vec3) -> SwitchFitness {
        self.count += 1;
        self.inner.eval(candidate)
    }
}

fn plan_stats(result: &Result<PlannedPath, PlanError>, cfg: &ResolvedConfig) -> PlanStats {
    match result {
        Ok(path) => {
            let soc_trace = path.soc_trace();
            // Replaying the ledger here keeps every reported number
            // double-entry checked.
            let consistent = account(path, &cfg.energy, &cfg.battery).is_ok();
            PlanStats {
                outcome: if consistent {
                    "ok".to_string()
                } else {
                    "accounting-mismatch".to_string()
                },
                total_energy: path.total_energy,
                total_distance: path.total_distance,
                switch_count: path.switch_count(),
                final_soc: path.final_soc,
                soc_trace,
            }
        }
        Err(e) => PlanStats {
            outcome: format!("error: {e}"),
            total_energy: 0.0,
            total_distance: 0.0,
            switch_count: 0,
            final_soc: 0.0,
            soc_trace: Vec::new(),
        },
    }
}

/// Plans the scenario twice, with and without switching-point optimization,
/// under the same seed.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioReport, HarnessError> {
    let with_cfg = sc.config.resolve(&sc.grid)?;
    let mut without = sc.config.clone();
    without
        .apply("planner.bas_enabled", "false")
        .expect("known key");
    let without_cfg = without.resolve(&sc.grid)?;

    let with_path = plan(&sc.grid, sc.start, sc.goal, &with_cfg);
    let without_path = plan(&sc.grid, sc.start, sc.goal, &without_cfg);

    let with_stats = plan_stats(&with_path, &with_cfg);
    let without_stats = plan_stats(&without_path, &without_cfg);

    let savings_fraction = match (&with_path, &without_path) {
        (Ok(w), Ok(o)) if o.total_energy > 0.0 => 1.0 - w.total_energy / o.total_energy,
        _ => 0.0,
    };

    Ok(ScenarioReport {
        scenario: sc.name.clone(),
        with_bas: with_stats,
        without_bas: without_stats,
        savings_fraction,
    })
}

/// The first takeoff point of a scenario, with the context the planner
/// would hand to the optimizer and the battery SOC at that moment.
pub struct TakeoffProblem {
    pub initial: GridIndex,
    pub context: SwitchContext,
    pub soc_at_switch: f64,
}

pub fn first_takeoff_problem(sc: &Scenario) -> Result<TakeoffProblem, HarnessError> {
    let cfg = sc.config.resolve(&sc.grid)?;
    let mut battery = cfg.battery.clone();
    let gres = search_ground(
        &sc.grid,
        sc.start,
        sc.goal,
        &cfg.mobility,
        &cfg.energy,
        &battery,
    )?;
    if gres.outcome != GroundOutcome::TakeoffRequired {
        return Err(HarnessError::NoSwitchingPoint(sc.name.clone()));
    }
    battery
        .debit(gres.path_energy)
        .map_err(|e| HarnessError::Plan(e.to_string()))?;
    let back = gres.path.len().saturating_sub(4).min(gres.path.len() - 1);
    let context = SwitchContext {
        approach: sc.grid.surface_point(gres.path[back])?,
        approach_mode: Mode::Drive,
        departure: sc.grid.surface_point(sc.goal)?,
        departure_mode: Mode::Fly,
    };
    Ok(TakeoffProblem {
        initial: gres.switching_point.expect("takeoff carries a point"),
        context,
        soc_at_switch: battery.soc(),
    })
}

pub const METHOD_NAMES: [&str; 4] = [
    "bas",
    "exhaustive-grid",
    "random-search",
    "particle-swarm",
];

/// Runs one optimizer under an exact evaluation budget.
pub fn run_method(
    grid: &TerrainGrid,
    initial: GridIndex,
    method: &str,
    budget: usize,
    params: &BasParams,
    fitness: &mut dyn FitnessFn,
) -> Result<SwitchOptResult, HarnessError> {
    if budget < 3 {
        return Err(HarnessError::BudgetTooSmall(budget));
    }
    let mut counting = CountingFitness::new(fitness);
    let result = match method {
        "bas" => {
            // 1 incumbent evaluation + 3 per iteration; the remainder is
            // burned on the incumbent to hit the budget exactly.
            let iterations = ((budget - 1) / 3) as u32;
            let waste = budget - 1 - 3 * iterations as usize;
            let center = grid.surface_point(initial)?;
            for _ in 0..waste {
                counting.eval(center);
            }
            let p = BasParams {
                iterations,
                ..*params
            };
            let mut opt = BasOptimizer::new(grid, initial, p)?;
            opt.run(&mut counting)
        }
        "exhaustive-grid" => baseline_optimize(
            grid,
            initial,
            BaselineMethod::ExhaustiveGrid,
            budget,
            params,
            &mut counting,
        )?,
        "random-search" => baseline_optimize(
            grid,
            initial,
            BaselineMethod::RandomSearch,
            budget,
            params,
            &mut counting,
        )?,
        "particle-swarm" => baseline_optimize(
            grid,
            initial,
            BaselineMethod::ParticleSwarm,
            budget,
            params,
            &mut counting,
        )?,
        other => return Err(HarnessError::Plan(format!("unknown method {other:?}"))),
    };
    let used = counting.count;
    if used != budget {
        return Err(HarnessError::Plan(format!(
            "method {method} consumed {used} evaluations, budget was {budget}"
        )));
    }
    Ok(SwitchOptResult {
        evaluations: used,
        ..result
    })
}

/// Runs all four methods with equal budgets on the scenario's first takeoff
/// point, then replans the whole mission through each method's chosen point
/// to report downstream path energy.
pub fn run_method_comparison(
    sc: &Scenario,
    budget: usize,
    seeds: &[u64],
    timings: bool,
) -> Result<MethodComparisonReport, HarnessError> {
    if budget < 3 {
        return Err(HarnessError::BudgetTooSmall(budget));
    }
    let cfg = sc.config.resolve(&sc.grid)?;
    let problem = first_takeoff_problem(sc)?;
    let center = sc.grid.surface_point(problem.initial)?;

    let mut methods = Vec::new();
    for method in METHOD_NAMES {
        let mut best: Option<SwitchOptResult> = None;
        let mut r_sum = 0.0;
        let mut f_sum = 0.0;
        let mut runs = 0usize;
        let started = Instant::now();
        for &seed in seeds {
            let params = BasParams {
                seed,
                ..cfg.bas
            };
            let mut fitness = SwitchPointFitness {
                grid: &sc.grid,
                limits: &cfg.mobility,
                energy: &cfg.energy,
                context: problem.context,
                center,
                search_radius: cfg.bas.search_radius,
                alpha: cfg.bas.alpha_at(problem.soc_at_switch),
                w_a: cfg.bas.w_a,
                w_b: cfg.bas.w_b,
                w_c: cfg.bas.w_c,
            };
            let result = run_method(&sc.grid, problem.initial, method, budget, &params, &mut fitness)?;
            if result.fitness.r_term.is_finite() {
                r_sum += result.fitness.r_term;
                f_sum += result.fitness.f;
                runs += 1;
            }
            let better = match &best {
                Some(b) => result.fitness.f < b.fitness.f,
                None => true,
            };
            if better {
                best = Some(result);
            }
        }
        let wall_time_ms = timings.then(|| started.elapsed().as_secs_f64() * 1e3);
        let best = best.expect("at least one seed");

        // Downstream energy: replay the full mission forced through this
        // method's selected takeoff point.
        let mut forced = sc.config.clone();
        forced.planner.first_switch_override = Some(best.point);
        let forced_cfg = forced.resolve(&sc.grid)?;
        let path_energy = plan(&sc.grid, sc.start, sc.goal, &forced_cfg)
            .ok()
            .map(|p| p.total_energy);

        methods.push(MethodStats {
            method: method.to_string(),
            evaluations: budget,
            best_f: best.fitness.f,
            best_e: best.fitness.e_term,
            best_r: best.fitness.r_term,
            mean_r: if runs > 0 { r_sum / runs as f64 } else { f64::NAN },
            mean_f: if runs > 0 { f_sum / runs as f64 } else { f64::NAN },
            point_col: best.point.col,
            point_row: best.point.row,
            path_energy,
            wall_time_ms,
        });
    }

    Ok(MethodComparisonReport {
        scenario: sc.name.clone(),
        budget,
        seeds: seeds.to_vec(),
        initial_col: problem.initial.col,
        initial_row: problem.initial.row,
        methods,
    })
}

/// Quantized unimodal bowl around a seeded in-radius target cell; the
/// benchmark landscape for optimizer convergence runs.
pub struct BowlLandscape<'a> {
    grid: &'a TerrainGrid,
    center: Vec3,
    radius: f64,
    target: Vec3,
    pub base: f64,
    pub k: f64,
}

impl<'a> BowlLandscape<'a> {
    pub fn new(grid: &'a TerrainGrid, initial: GridIndex, radius: f64, seed: u64) -> Self {
        let center = grid.surface_point(initial).expect("valid initial cell");
        // Deterministic target within half the radius, snapped to a cell.
        let mix = |s: u64, salt: u64| {
            let mut v = s.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(salt);
            v ^= v >> 31;
            v = v.wrapping_mul(0xbf58476d1ce4e5b9);
            (v >> 11) as f64 / (1u64 << 53) as f64
        };
        let angle = mix(seed, 1) * std::f64::consts::TAU;
        let dist = mix(seed, 2).sqrt() * radius / 2.0;
        let raw = Vec3::new(
            center.x + dist * angle.cos(),
            center.y + dist * angle.sin(),
            0.0,
        );
        let cell = grid
            .cell_at(raw.x, raw.y)
            .unwrap_or(initial);
        let target = grid.surface_point(cell).unwrap_or(center);
        BowlLandscape {
            grid,
            center,
            radius,
            target,
            base: 5000.0,
            k: 0.5,
        }
    }

    pub fn minimum(&self) -> f64 {
        self.base
    }
}

impl FitnessFn for BowlLandscape<'_> {
    fn eval(&mut self, candidate: Vec3) -> SwitchFitness {
        let Some(cell) = self.grid.cell_at(candidate.x, candidate.y) else {
            return SwitchFitness::rejected();
        };
        let Ok(p) = self.grid.surface_point(cell) else {
            return SwitchFitness::rejected();
        };
        if p.horizontal_distance(self.center) > self.radius {
            return SwitchFitness::rejected();
        }
        let d = p.horizontal_distance(self.target);
        let f = self.base + self.k * d * d;
        SwitchFitness {
            e_term: f,
            r_term: 0.0,
            f,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BowlRun {
    pub seed: u64,
    pub best_f: f64,
    pub optimum: f64,
}

/// Budget-matched bowl benchmark for one method over many seeds.
pub fn bowl_benchmark(
    sc: &Scenario,
    method: &str,
    budget: usize,
    seeds: &[u64],
) -> Result<Vec<BowlRun>, HarnessError> {
    let cfg = sc.config.resolve(&sc.grid)?;
    let problem = first_takeoff_problem(sc)?;
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let params = BasParams {
            seed,
            ..cfg.bas
        };
        let mut bowl = BowlLandscape::new(&sc.grid, problem.initial, cfg.bas.search_radius, seed);
        let optimum = bowl.minimum();
        let result = run_method(&sc.grid, problem.initial, method, budget, &params, &mut bowl)?;
        out.push(BowlRun {
            seed,
            best_f: result.fitness.f,
            optimum,
        });
    }
    Ok(out)
}
