//! Run orchestration: regularise the initial data, solve, verify, archive.

use std::path::Path;

use crate::archive::{
    read_archive, write_archive, ArchiveContents, ArchiveSummary, Verification, SCHEMA,
};
use crate::config::RunConfig;
use crate::density::check_density_bounds;
use crate::diagnostics::{
    alt_momentum_residual, boundary_gap, complementarity_report, continuity_residual,
    energy_ledger, initial_condition_check, renormalized_residual, weak_inequality_check,
    BoundaryGap, EnergyLedger, Renormalization, ResidualReport, TestClass, TestFunctionBattery,
    WallComplementarity,
};
use crate::error::{Error, Result};
use crate::fixed_point::{fixed_point_solve, FixedPointSolution, IterationRecord, Trajectory};
use crate::mms::{log_log_slope, manufactured_solution_residual, ManufacturedSolution, MmsOutcome};
use crate::model::Model;
use crate::regularize::{regularize_initial_data, RegularizedData};

/// Diagnostics of one trajectory.
#[derive(Debug, Clone)]
pub struct VerificationOutcome {
    pub ledger: EnergyLedger,
    pub complementarity: Vec<WallComplementarity>,
    pub boundary_gap: BoundaryGap,
    pub verification: Verification,
}

/// A completed run held in memory.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub model: Model,
    pub regularized: RegularizedData,
    pub solution: FixedPointSolution,
    pub diagnostics: VerificationOutcome,
    pub log: Vec<String>,
}

impl RunOutcome {
    pub fn verification(&self) -> &Verification {
        &self.diagnostics.verification
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.solution.trajectory
    }

    pub fn summary(&self) -> ArchiveSummary {
        let grid = self.model.basis.grid();
        let last = self.solution.history.last();
        let v = self.verification();
        ArchiveSummary {
            schema: SCHEMA.into(),
            fingerprint: self.config.fingerprint(),
            basis: self.model.basis.metadata(),
            density_shape: self.model.space.shape(),
            grid_x: grid.x.nodes.clone(),
            grid_y: grid.y.nodes.clone(),
            steps: self.trajectory().len() - 1,
            dt: self.trajectory().dt(),
            t_end: self.config.discretization.t_end,
            stride: self.config.output.stride,
            params: self.model.params.scalars(),
            iterations: last.map_or(0, |r| r.iter),
            fixed_point_residual: last.map_or(f64::NAN, |r| r.residual),
            regularization: self.regularized.distances,
            pass: v.pass,
            first_failure: v.first_failure.clone(),
        }
    }
}

/// Builds the model and the regularised initial data of `cfg`.
pub fn prepare(cfg: &RunConfig) -> Result<(Model, RegularizedData)> {
    cfg.validate()?;
    let model = cfg.model()?;
    let (rho, q) = cfg.initial_fields()?;
    let p = &model.params;
    let reg = regularize_initial_data(
        &model.basis,
        &model.space,
        &rho,
        &q,
        p.alpha,
        p.beta,
        p.gamma,
    )?;
    Ok((model, reg))
}

/// Runs the full diagnostics suite on a trajectory started from `reg`.
pub fn verify_trajectory(
    cfg: &RunConfig,
    model: &Model,
    traj: &Trajectory,
    reg: &RegularizedData,
    history: &[IterationRecord],
) -> Result<VerificationOutcome> {
    traj.validate()?;
    let v = &cfg.verify;
    let t_end = *traj.times.last().expect("validated trajectory");
    let mut reports = Vec::new();

    let fp = history.last().map_or(f64::INFINITY, |r| r.residual);
    reports.push(ResidualReport::at_most(
        "fixed_point",
        fp,
        cfg.solver.tol_fp,
        format!("{} iterations", history.last().map_or(0, |r| r.iter)),
    ));

    let mass0 = model.space.mass(&traj.rho[0]);
    let drift = traj
        .rho
        .iter()
        .map(|r| (model.space.mass(r) - mass0).abs())
        .fold(0.0, f64::max)
        / mass0.abs();
    reports.push(ResidualReport::at_most(
        "mass_drift",
        drift,
        v.tol_mass,
        format!("relative to initial mass {mass0:.6e}"),
    ));

    let rho0 = model.space.to_grid(&traj.rho[0]);
    let bounds = check_density_bounds(
        model,
        &traj.rho,
        &traj.times,
        rho0.min(),
        rho0.max(),
        &traj.u,
        1e-12,
    );
    let excess = bounds.first_violation.as_ref().map_or(0.0, |e| {
        (bounds.lower_envelope[e.node] - e.value).max(e.value - bounds.upper_envelope[e.node])
    });
    let context = match &bounds.first_violation {
        Some(e) => format!(
            "first violation at t={:.6}, x={:.6}, y={:.6}, value {:.6e}",
            e.t, e.x, e.y, e.value
        ),
        None => format!(
            "density range [{:.6e}, {:.6e}]",
            bounds.rho_min, bounds.rho_max
        ),
    };
    reports.push(ResidualReport::at_most(
        "density_envelope",
        excess,
        0.0,
        context,
    ));

    let ledger = energy_ledger(model, traj);
    reports.push(ResidualReport::at_most(
        "energy_balance",
        ledger.max_relative_residual(),
        v.tol_energy,
        format!("max |residual| / {:.6e} over all nodes", ledger.scale()),
    ));

    let battery =
        TestFunctionBattery::generate(&model.basis, t_end, v.zero_normal, v.interior, v.seed)?;
    battery.check(&model.basis, 1e-12)?;
    reports.extend(weak_inequality_check(
        model, traj, &ledger, &battery, t_end, v.tol_weak,
    )?);
    let interior: Vec<_> = battery.of_class(TestClass::Interior).cloned().collect();
    if !interior.is_empty() {
        reports.extend(alt_momentum_residual(
            model, traj, &ledger, &interior, v.tol_alt,
        )?);
    }

    reports.push(continuity_residual(model, traj, v.tol_continuity)?);
    for zeta in [Renormalization::Square, Renormalization::EntropyLike] {
        let r = renormalized_residual(model, traj, zeta, v.tol_renormalized, v.tol_renormalized)?;
        reports.extend(
            r.into_iter()
                .filter(|r| r.name.starts_with("renormalized_sign")),
        );
    }

    let complementarity = complementarity_report(model, traj)?;
    reports.extend(complementarity.iter().flat_map(|c| c.reports()));
    let gap = boundary_gap(model, &ledger);
    reports.push(gap.report());

    reports.extend(initial_condition_check(
        model,
        traj,
        &reg.q,
        &reg.rho0,
        &battery,
        v.tol_initial,
    )?);

    Ok(VerificationOutcome {
        ledger,
        complementarity,
        boundary_gap: gap,
        verification: Verification::from_reports(reports),
    })
}

fn format_report(r: &ResidualReport) -> String {
    format!(
        "{} {} value={:.6e} tol={:.3e} ({})",
        if r.pass { "PASS" } else { "FAIL" },
        r.name,
        r.value,
        r.tolerance,
        r.context
    )
}

/// Regularises, solves and verifies `cfg` without touching the disk.
pub fn simulate(cfg: &RunConfig) -> Result<RunOutcome> {
    let (model, reg) = prepare(cfg)?;
    let d = &cfg.discretization;
    let mut log = vec![
        format!("configuration {}", cfg.fingerprint()),
        format!(
            "velocity basis: kx_max={} ky_max={} interior_modes={:?} dimension={}",
            d.kx_max,
            d.ky_max,
            d.interior_modes,
            model.basis.dim()
        ),
        format!("density space: {:?} coefficients", model.space.shape()),
        format!(
            "time grid: {} steps of {:e} on [0, {}]",
            cfg.steps(),
            cfg.discretization.dt,
            d.t_end
        ),
        format!("regularisation: {:?}", reg.distances),
    ];
    let solution = fixed_point_solve(
        &model,
        &reg.rho0,
        &reg.u0,
        d.t_end,
        d.dt,
        &cfg.solver_options(),
    )?;
    for r in &solution.history {
        log.push(format!(
            "iteration {} residual {:.6e} damping {} max_coeff {:.6e} contraction {}",
            r.iter,
            r.residual,
            r.damping,
            r.max_coeff,
            r.contraction.map_or("-".into(), |c| format!("{c:.4}"))
        ));
    }
    let diagnostics =
        verify_trajectory(cfg, &model, &solution.trajectory, &reg, &solution.history)?;
    log.extend(diagnostics.verification.reports.iter().map(format_report));
    log.push(match &diagnostics.verification.first_failure {
        None => "verification passed".into(),
        Some(name) => format!("verification failed: first failure {name}"),
    });
    Ok(RunOutcome {
        config: cfg.clone(),
        model,
        regularized: reg,
        solution,
        diagnostics,
        log,
    })
}

/// [`simulate`] followed by writing the archive to `out`.
pub fn run_simulation(cfg: &RunConfig, out: &Path) -> Result<RunOutcome> {
    let outcome = simulate(cfg)?;
    write_outcome(&outcome, out)?;
    Ok(outcome)
}

pub fn write_outcome(outcome: &RunOutcome, out: &Path) -> Result<()> {
    let summary = outcome.summary();
    write_archive(
        out,
        &ArchiveContents {
            config: &outcome.config,
            summary: &summary,
            space: &outcome.model.space,
            trajectory: outcome.trajectory(),
            history: &outcome.solution.history,
            ledger: &outcome.diagnostics.ledger,
            verification: outcome.verification(),
            log: &outcome.log,
        },
    )
}

/// Re-runs the diagnostics on an archived trajectory. The archive itself is
/// left untouched.
pub fn verify_archive(dir: &Path) -> Result<Verification> {
    let a = read_archive(dir)?;
    let (model, reg) = prepare(&a.config)?;
    if a.velocity.first().map(|u| u.len()) != Some(model.basis.dim()) {
        return Err(Error::Archive(
            "velocity coefficients do not match the configured basis".into(),
        ));
    }
    let traj = Trajectory {
        times: a.times,
        rho: a.density,
        u: a.velocity,
        params: model.params.clone(),
        provenance: format!("archive {}", dir.display()),
    };
    Ok(verify_trajectory(&a.config, &model, &traj, &reg, &a.history)?.verification)
}

/// One level of a manufactured-solution study.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MmsLevel {
    /// `ky_max` for the spatial study, `K` for the temporal one.
    pub level: usize,
    pub outcome: MmsOutcome,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MmsStudy {
    pub spatial: Vec<MmsLevel>,
    /// Slope of `ln(error)` against `ln(ky_max)`.
    pub spatial_slope: f64,
    pub temporal: Vec<MmsLevel>,
    /// Slope of `ln(error)` against `ln(dt)`.
    pub temporal_order: f64,
    pub verification: Verification,
}

fn mms_model(cfg: &RunConfig, ky_max: usize) -> Result<Model> {
    let mut c = cfg.clone();
    c.discretization.ky_max = ky_max;
    raise_quadrature(&mut c);
    c.model()
}

/// Raises the quadrature to the dealiasing margin of the configured spaces.
pub fn raise_quadrature(cfg: &mut RunConfig) {
    for _ in 0..2 {
        match cfg.model() {
            Err(Error::Resolution {
                axis: "quad_x",
                need,
                ..
            }) => cfg.geometry.quad_x = need,
            Err(Error::Resolution {
                axis: "quad_y",
                need,
                ..
            }) => cfg.geometry.quad_y = need,
            _ => return,
        }
    }
}

/// Spatial and temporal convergence study against the manufactured
/// solutions in the `[mms]` section of `cfg`.
pub fn mms_study(cfg: &RunConfig) -> Result<MmsStudy> {
    cfg.validate()?;
    let m = cfg
        .mms
        .as_ref()
        .ok_or_else(|| Error::Config("configuration has no [mms] section".into()))?;
    let options = cfg.solver_options();
    let spatial_solution = ManufacturedSolution::parse(&m.rho, &m.ux, &m.uy)?;
    let mut spatial = Vec::new();
    for &ky in &m.ky_levels {
        let model = mms_model(cfg, ky)?;
        let outcome = manufactured_solution_residual(
            &model,
            &spatial_solution,
            m.t_end,
            m.dt,
            &options,
            f64::INFINITY,
        )?;
        spatial.push(MmsLevel { level: ky, outcome });
    }
    let temporal_solution = ManufacturedSolution::parse(&m.rho, &m.dt_ux, &m.dt_uy)?;
    let model = mms_model(cfg, m.dt_ky)?;
    let mut temporal = Vec::new();
    for &k in &m.steps {
        let dt = m.t_end / k as f64;
        let outcome = manufactured_solution_residual(
            &model,
            &temporal_solution,
            m.t_end,
            dt,
            &options,
            f64::INFINITY,
        )?;
        temporal.push(MmsLevel { level: k, outcome });
    }
    let levels: Vec<f64> = spatial.iter().map(|l| l.level as f64).collect();
    let errors: Vec<f64> = spatial.iter().map(|l| l.outcome.u_error).collect();
    let spatial_slope = log_log_slope(&levels, &errors)?;
    let steps: Vec<f64> = temporal.iter().map(|l| m.t_end / l.level as f64).collect();
    let errors: Vec<f64> = temporal.iter().map(|l| l.outcome.u_error).collect();
    let temporal_order = log_log_slope(&steps, &errors)?;
    let verification = Verification::from_reports(vec![
        ResidualReport::at_most(
            "mms_spatial_slope",
            spatial_slope,
            m.max_spectral_slope,
            format!("velocity error against ky_max {:?}", m.ky_levels),
        ),
        ResidualReport::at_least(
            "mms_temporal_order",
            temporal_order,
            m.min_order,
            format!("velocity error against dt for K = {:?}", m.steps),
        ),
    ]);
    Ok(MmsStudy {
        spatial,
        spatial_slope,
        temporal,
        temporal_order,
        verification,
    })
}
