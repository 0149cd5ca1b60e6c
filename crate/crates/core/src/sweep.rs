//! Parameter sweeps: one run per level of a schedule, with level-wise
//! diagnostics, inter-level distances and trend flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::basis::GalerkinBasis;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fixed_point::Trajectory;
use crate::mms::log_log_slope;
use crate::model::Model;
use crate::regularize::RegularizationDistances;
use crate::run::{raise_quadrature, simulate, write_outcome, RunOutcome};
use crate::spectral::ScalarSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Delta,
    /// Number of y modes `ky_max` of the velocity basis.
    N,
    Eps,
    Alpha,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Delta => "delta",
            SweepParam::N => "n",
            SweepParam::Eps => "eps",
            SweepParam::Alpha => "alpha",
        }
    }

    /// Levels must decrease, except `n`, which must increase.
    fn decreasing(self) -> bool {
        self != SweepParam::N
    }

    /// Configuration of one level.
    pub fn apply(self, base: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut cfg = base.clone();
        match self {
            SweepParam::Delta => cfg.params.delta = value,
            SweepParam::Eps => cfg.params.eps = value,
            SweepParam::Alpha => cfg.params.alpha = value,
            SweepParam::N => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Config(format!(
                        "n levels must be positive integers, got {value}"
                    )));
                }
                cfg.discretization.ky_max = value as usize;
                raise_quadrature(&mut cfg);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(SweepParam::Delta),
            "n" => Ok(SweepParam::N),
            "eps" => Ok(SweepParam::Eps),
            "alpha" => Ok(SweepParam::Alpha),
            _ => Err(Error::Argument(format!(
                "unknown sweep parameter {s:?}; expected delta, n, eps or alpha"
            ))),
        }
    }
}

/// Parses a comma-separated schedule.
pub fn parse_schedule(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Argument(format!("schedule entry {s:?}: {e}")))
        })
        .collect()
}

/// Checks that `schedule` has at least two entries and is strictly monotone
/// in the direction of `param`.
pub fn check_schedule(param: SweepParam, schedule: &[f64]) -> Result<()> {
    if schedule.len() < 2 {
        return Err(Error::Argument("a sweep needs at least two levels".into()));
    }
    let ok = schedule.windows(2).all(|w| {
        if param.decreasing() {
            w[1] < w[0]
        } else {
            w[1] > w[0]
        }
    });
    if !ok {
        let dir = if param.decreasing() {
            "decreasing"
        } else {
            "increasing"
        };
        return Err(Error::Argument(format!(
            "{} schedule {schedule:?} is not strictly {dir}",
            param.name()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub value: f64,
    pub energy_residual: f64,
    pub boundary_gap: f64,
    pub gap_bound: f64,
    /// Largest complementarity defect over both walls.
    pub defect: f64,
    pub defect_bound: f64,
    /// `int alpha rho^beta / (beta - 1)` at the final time.
    pub artificial_potential: f64,
    pub regularization: RegularizationDistances,
    pub iterations: usize,
    pub pass: bool,
    pub first_failure: Option<String>,
}

/// `L^2` space-time distances between consecutive levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDistance {
    pub from: f64,
    pub to: f64,
    pub rho: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFlags {
    /// Both distance sequences strictly decrease.
    pub distances_decreasing: bool,
    /// Boundary-dissipation gap within `(delta/4) int int g` at every level.
    pub gap_within_bound: bool,
    pub artificial_potential_decreasing: bool,
    /// Every initial-data distance strictly decreases, or stays at roundoff
    /// level (<= 1e-12) once the raw data needs no correction.
    pub regularization_decreasing: bool,
    /// Least-squares slope of `ln(defect)` against `ln(delta)`; only for
    /// delta sweeps with positive defects.
    pub defect_slope: Option<f64>,
    /// Defect decreases at least linearly in `delta` (slope >= 0.9, or
    /// non-increasing defects when some level has none).
    pub defect_linear: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub schedule: Vec<f64>,
    pub levels: Vec<LevelSummary>,
    pub distances: Vec<LevelDistance>,
    pub flags: SweepFlags,
    /// Set when a level failed hard; `levels` then holds the levels before it.
    pub aborted: Option<String>,
}

impl SweepReport {
    /// Every level verified and no hard failure.
    pub fn all_levels_pass(&self) -> bool {
        self.aborted.is_none() && self.levels.iter().all(|l| l.pass)
    }
}

fn summarize(value: f64, run: &RunOutcome) -> LevelSummary {
    let d = &run.diagnostics;
    let worst = d
        .complementarity
        .iter()
        .fold((0.0f64, 0.0f64), |(a, b), c| {
            (a.max(c.defect), b.max(c.defect_bound))
        });
    LevelSummary {
        value,
        energy_residual: d.ledger.max_relative_residual(),
        boundary_gap: d.boundary_gap.gap,
        gap_bound: d.boundary_gap.bound,
        defect: worst.0,
        defect_bound: worst.1,
        artificial_potential: *d
            .ledger
            .artificial_potential
            .last()
            .expect("non-empty ledger"),
        regularization: run.regularized.distances,
        iterations: run.solution.history.last().map_or(0, |r| r.iter),
        pass: run.verification().pass,
        first_failure: run.verification().first_failure.clone(),
    }
}

/// The level's model rebuilt on `geometry` (same modes, other quadrature).
fn on_grid(model: &Model, other: &Model) -> Result<(GalerkinBasis, ScalarSpace)> {
    let g = other.basis.geometry();
    let b = &model.basis;
    let basis = GalerkinBasis::new(g, b.kx_max(), b.ky_max(), b.interior_modes())?;
    let space = ScalarSpace::new(g, model.space.kx_max(), model.space.my_max())?;
    Ok((basis, space))
}

/// `L^2(0, T; L^2)` distances between two runs, evaluated on the finer of
/// the two quadrature grids. Symmetric in its arguments.
pub fn trajectory_distance(
    a: (&Model, &Trajectory),
    b: (&Model, &Trajectory),
) -> Result<(f64, f64)> {
    let size = |m: &Model| {
        let g = m.basis.geometry();
        (g.quad_x * g.quad_y, g.quad_x, g.quad_y)
    };
    let fine = if size(a.0) >= size(b.0) { a.0 } else { b.0 };
    let (ta, tb) = (a.1, b.1);
    if ta.times.len() != tb.times.len()
        || ta
            .times
            .iter()
            .zip(&tb.times)
            .any(|(x, y)| (x - y).abs() > 1e-12)
    {
        return Err(Error::Argument(
            "sweep levels have different time grids".into(),
        ));
    }
    let (basis_a, space_a) = on_grid(a.0, fine)?;
    let (basis_b, space_b) = on_grid(b.0, fine)?;
    let grid = basis_a.grid();
    let mut rho_rate = Vec::with_capacity(ta.len());
    let mut u_rate = Vec::with_capacity(ta.len());
    for k in 0..ta.len() {
        let dr = space_a.to_grid(&ta.rho[k]) - space_b.to_grid(&tb.rho[k]);
        rho_rate.push(grid.integrate(&dr.component_mul(&dr)));
        let ua = basis_a.evaluate_values(&ta.u[k]);
        let ub = basis_b.evaluate_values(&tb.u[k]);
        let du = [&ua[0] - &ub[0], &ua[1] - &ub[1]];
        u_rate.push(grid.integrate(&(du[0].component_mul(&du[0]) + du[1].component_mul(&du[1]))));
    }
    let total = |rate: &[f64]| {
        let mut acc = 0.0;
        for k in 1..rate.len() {
            acc += 0.5 * (ta.times[k] - ta.times[k - 1]) * (rate[k] + rate[k - 1]);
        }
        acc.max(0.0).sqrt()
    };
    Ok((total(&rho_rate), total(&u_rate)))
}

fn strictly_decreasing(v: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = v.collect();
    v.windows(2).all(|w| w[1] < w[0])
}

/// Distances below this count as zero.
const ZERO_DISTANCE: f64 = 1e-12;

fn decreasing_to_zero(v: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = v.collect();
    v.windows(2)
        .all(|w| w[1] < w[0] || (w[0] <= ZERO_DISTANCE && w[1] <= ZERO_DISTANCE))
}

fn flags(param: SweepParam, levels: &[LevelSummary], distances: &[LevelDistance]) -> SweepFlags {
    let (defect_slope, defect_linear) = if param == SweepParam::Delta && levels.len() >= 2 {
        let deltas: Vec<f64> = levels.iter().map(|l| l.value).collect();
        let defects: Vec<f64> = levels.iter().map(|l| l.defect).collect();
        if defects.iter().all(|d| *d > 0.0) {
            let s = log_log_slope(&deltas, &defects).ok();
            (s, s.map(|s| s >= 0.9))
        } else {
            (None, Some(defects.windows(2).all(|w| w[1] <= w[0])))
        }
    } else {
        (None, None)
    };
    let r = |f: fn(&RegularizationDistances) -> f64| {
        decreasing_to_zero(levels.iter().map(|l| f(&l.regularization)))
    };
    SweepFlags {
        distances_decreasing: strictly_decreasing(distances.iter().map(|d| d.rho))
            && strictly_decreasing(distances.iter().map(|d| d.u)),
        gap_within_bound: levels.iter().all(|l| l.boundary_gap <= l.gap_bound + 1e-12),
        artificial_potential_decreasing: strictly_decreasing(
            levels.iter().map(|l| l.artificial_potential),
        ),
        regularization_decreasing: r(|d| d.rho_lgamma)
            && r(|d| d.artificial_l1)
            && r(|d| d.q_l1)
            && r(|d| d.energy_l1),
        defect_slope,
        defect_linear,
    }
}

/// Runs every level of `schedule` on up to `workers` threads. When `out`
/// is given, level `i` is archived under `out/level_ii`. A level whose
/// solve fails aborts the sweep; the report then covers the levels before
/// it.
pub fn run_sweep(
    base: &RunConfig,
    param: SweepParam,
    schedule: &[f64],
    out: Option<&Path>,
    workers: usize,
) -> Result<SweepReport> {
    check_schedule(param, schedule)?;
    let configs = schedule
        .iter()
        .map(|&v| param.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    let slots: Vec<Mutex<Option<Result<RunOutcome>>>> =
        schedule.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let dir = |i: usize| -> Option<PathBuf> { out.map(|o| o.join(format!("level_{i:02}"))) };
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, schedule.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let result = simulate(&configs[i]).and_then(|run| {
                    if let Some(d) = dir(i) {
                        write_outcome(&run, &d)?;
                    }
                    Ok(run)
                });
                *slots[i].lock().expect("unpoisoned slot") = Some(result);
            });
        }
    });

    let mut runs = Vec::new();
    let mut aborted = None;
    for (i, slot) in slots.into_iter().enumerate() {
        match slot
            .into_inner()
            .expect("unpoisoned slot")
            .expect("every level ran")
        {
            Ok(run) => runs.push(run),
            Err(e) => {
                aborted = Some(format!(
                    "level {i} ({} = {}): {e}",
                    param.name(),
                    schedule[i]
                ));
                break;
            }
        }
    }
    let levels: Vec<LevelSummary> = runs
        .iter()
        .zip(schedule)
        .map(|(r, &v)| summarize(v, r))
        .collect();
    let mut distances = Vec::new();
    for (i, pair) in runs.windows(2).enumerate() {
        let (rho, u) = trajectory_distance(
            (&pair[0].model, pair[0].trajectory()),
            (&pair[1].model, pair[1].trajectory()),
        )?;
        distances.push(LevelDistance {
            from: schedule[i],
            to: schedule[i + 1],
            rho,
            u,
        });
    }
    let flags = flags(param, &levels, &distances);
    Ok(SweepReport {
        param,
        schedule: schedule.to_vec(),
        levels,
        distances,
        flags,
        aborted,
    })
}

/// [`run_sweep`] plus `sweep_report.json` in `out`.
pub fn run_sweep_to(
    base: &RunConfig,
    param: SweepParam,
    schedule: &[f64],
    out: &Path,
    workers: usize,
) -> Result<SweepReport> {
    std::fs::create_dir_all(out)?;
    let report = run_sweep(base, param, schedule, Some(out), workers)?;
    std::fs::write(
        out.join("sweep_report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundoff_distances_count_as_non_increasing() {
        assert!(decreasing_to_zero([3.0, 2.0, 1.0].into_iter()));
        assert!(decreasing_to_zero([1e-3, 1e-14, 0.0].into_iter()));
        assert!(decreasing_to_zero([0.0, 0.0].into_iter()));
        assert!(!decreasing_to_zero([1.0, 1.0].into_iter()));
        assert!(!decreasing_to_zero([0.0, 1e-6].into_iter()));
    }

    #[test]
    fn schedule_direction_follows_the_parameter() {
        assert!(check_schedule(SweepParam::Delta, &[0.1, 0.05]).is_ok());
        assert!(check_schedule(SweepParam::Delta, &[0.05, 0.1]).is_err());
        assert!(check_schedule(SweepParam::N, &[2.0, 4.0]).is_ok());
        assert!(check_schedule(SweepParam::N, &[4.0, 2.0]).is_err());
        assert!(check_schedule(SweepParam::Eps, &[0.1]).is_err());
    }
}
