//! On-disk run archive.
//!
//! Layout of an archive directory:
//!
//! | file | contents |
//! |------|----------|
//! | `summary.json` | schema tag, fingerprint, basis metadata, grids, shapes, outcome |
//! | `config.toml` | the configuration that produced the run |
//! | `velocity.csv` | `t, c0, c1, ...` for every time node |
//! | `density_coeffs.csv` | `t`, then the density coefficients row-major (x wavenumber, then y mode) for every node |
//! | `density_grid.csv` | `t`, then collocation values row-major (x node, then y node), every `stride`-th node |
//! | `ledger.csv` | energy ledger, columns as in [`EnergyLedger::COLUMNS`] |
//! | `iterations.csv` | `iter, residual, damping, max_coeff, contraction` |
//! | `verification.json` | every [`ResidualReport`] with the overall verdict |
//! | `log.txt` | plain-text run log |
//!
//! Floats are written in shortest round-trip form, so reading an archive
//! back reproduces the trajectory bit for bit. Nothing time-dependent
//! (clock, host) is recorded: identical configurations give identical
//! archives.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisMetadata, VelocityCoeffs};
use crate::config::RunConfig;
use crate::diagnostics::{EnergyLedger, ResidualReport};
use crate::error::{Error, Result};
use crate::fixed_point::{IterationRecord, Trajectory};
use crate::params::ParamScalars;
use crate::regularize::RegularizationDistances;
use crate::spectral::{ScalarSpace, ScalarSpectralField};

pub const SCHEMA: &str = "slipflow-archive/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub pass: bool,
    pub first_failure: Option<String>,
    pub reports: Vec<ResidualReport>,
}

impl Verification {
    pub fn from_reports(reports: Vec<ResidualReport>) -> Self {
        let first_failure = reports.iter().find(|r| !r.pass).map(|r| r.name.clone());
        Self {
            pass: first_failure.is_none(),
            first_failure,
            reports,
        }
    }

    /// The first failing report, if any.
    pub fn first_failing(&self) -> Option<&ResidualReport> {
        self.reports.iter().find(|r| !r.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveSummary {
    pub schema: String,
    pub fingerprint: String,
    pub basis: BasisMetadata,
    /// Shape of the density coefficient matrix.
    pub density_shape: (usize, usize),
    pub grid_x: Vec<f64>,
    pub grid_y: Vec<f64>,
    pub steps: usize,
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
    pub params: ParamScalars,
    pub iterations: usize,
    pub fixed_point_residual: f64,
    pub regularization: RegularizationDistances,
    pub pass: bool,
    pub first_failure: Option<String>,
}

/// Everything needed to write one archive.
pub struct ArchiveContents<'a> {
    pub config: &'a RunConfig,
    pub summary: &'a ArchiveSummary,
    pub space: &'a ScalarSpace,
    pub trajectory: &'a Trajectory,
    pub history: &'a [IterationRecord],
    pub ledger: &'a EnergyLedger,
    pub verification: &'a Verification,
    pub log: &'a [String],
}

/// An archive read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedArchive {
    pub config: RunConfig,
    pub summary: ArchiveSummary,
    pub times: Vec<f64>,
    pub velocity: Vec<VelocityCoeffs>,
    pub density: Vec<ScalarSpectralField>,
    pub history: Vec<IterationRecord>,
    pub verification: Verification,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Archive(e.to_string())
}

fn write_table(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::Archive(format!("{}: {e}", path.display())))?;
    let header = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = r
        .deserialize::<Vec<f64>>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Archive(format!("{}: {e}", path.display())))?;
    Ok((header, rows))
}

pub fn write_archive(dir: &Path, c: &ArchiveContents) -> Result<()> {
    fs::create_dir_all(dir)?;
    let traj = c.trajectory;
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(c.summary)? + "\n",
    )?;
    fs::write(dir.join("config.toml"), c.config.to_toml())?;

    let dim = c.summary.basis.dimension;
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..dim).map(|i| format!("c{i}")))
        .collect();
    write_table(
        &dir.join("velocity.csv"),
        &header,
        (0..traj.len()).map(|k| {
            std::iter::once(traj.times[k])
                .chain(traj.u[k].c.iter().copied())
                .collect()
        }),
    )?;

    let (nk, nm) = c.summary.density_shape;
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..nk).flat_map(|a| (0..nm).map(move |m| format!("a{a}_m{m}"))))
        .collect();
    write_table(
        &dir.join("density_coeffs.csv"),
        &header,
        (0..traj.len()).map(|k| {
            let a = &traj.rho[k].coeffs;
            std::iter::once(traj.times[k])
                .chain((0..nk).flat_map(|i| (0..nm).map(move |j| a[(i, j)])))
                .collect()
        }),
    )?;

    let (nx, ny) = (c.summary.grid_x.len(), c.summary.grid_y.len());
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..nx).flat_map(|i| (0..ny).map(move |j| format!("x{i}_y{j}"))))
        .collect();
    write_table(
        &dir.join("density_grid.csv"),
        &header,
        (0..traj.len()).step_by(c.summary.stride).map(|k| {
            let v = c.space.to_grid(&traj.rho[k]);
            let mut row = Vec::with_capacity(nx * ny + 1);
            row.push(traj.times[k]);
            row.extend(
                (0..nx)
                    .flat_map(|i| (0..ny).map(move |j| (i, j)))
                    .map(|ij| v[ij]),
            );
            row
        }),
    )?;

    let header: Vec<String> = EnergyLedger::COLUMNS
        .iter()
        .map(|s| s.to_string())
        .collect();
    write_table(
        &dir.join("ledger.csv"),
        &header,
        c.ledger.rows().into_iter().map(|r| r.to_vec()),
    )?;

    let mut w = csv::Writer::from_path(dir.join("iterations.csv")).map_err(csv_err)?;
    for rec in c.history {
        w.serialize(rec).map_err(csv_err)?;
    }
    w.flush()?;

    fs::write(
        dir.join("verification.json"),
        serde_json::to_string_pretty(c.verification)? + "\n",
    )?;
    fs::write(dir.join("log.txt"), c.log.join("\n") + "\n")?;
    Ok(())
}

fn time_column(rows: &[Vec<f64>], width: usize, file: &str) -> Result<Vec<f64>> {
    if let Some(bad) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::Archive(format!(
            "{file}: row {bad} has {} fields, expected {width}",
            rows[bad].len()
        )));
    }
    Ok(rows.iter().map(|r| r[0]).collect())
}

pub fn read_archive(dir: &Path) -> Result<LoadedArchive> {
    let text = fs::read_to_string(dir.join("summary.json")).map_err(|e| {
        Error::Archive(format!(
            "cannot read {}: {e}",
            dir.join("summary.json").display()
        ))
    })?;
    let summary: ArchiveSummary = serde_json::from_str(&text)?;
    if summary.schema != SCHEMA {
        return Err(Error::Archive(format!(
            "unsupported schema {:?}, expected {SCHEMA:?}",
            summary.schema
        )));
    }
    let config = RunConfig::load(&dir.join("config.toml"))?;
    if config.fingerprint() != summary.fingerprint {
        return Err(Error::Archive(
            "config.toml does not match the fingerprint in summary.json".into(),
        ));
    }

    let dim = summary.basis.dimension;
    let (_, rows) = read_table(&dir.join("velocity.csv"))?;
    let times = time_column(&rows, dim + 1, "velocity.csv")?;
    let velocity = rows
        .iter()
        .map(|r| VelocityCoeffs {
            c: DVector::from_column_slice(&r[1..]),
        })
        .collect();

    let (nk, nm) = summary.density_shape;
    let (_, rows) = read_table(&dir.join("density_coeffs.csv"))?;
    let rho_times = time_column(&rows, nk * nm + 1, "density_coeffs.csv")?;
    if rho_times != times {
        return Err(Error::Archive(
            "velocity and density time columns differ".into(),
        ));
    }
    let density = rows
        .iter()
        .map(|r| ScalarSpectralField::from_coeffs(DMatrix::from_row_slice(nk, nm, &r[1..])))
        .collect();

    let mut r = csv::Reader::from_path(dir.join("iterations.csv")).map_err(csv_err)?;
    let history = r
        .deserialize()
        .collect::<std::result::Result<Vec<IterationRecord>, _>>()
        .map_err(csv_err)?;
    let verification: Verification =
        serde_json::from_str(&fs::read_to_string(dir.join("verification.json"))?)?;
    Ok(LoadedArchive {
        config,
        summary,
        times,
        velocity,
        density,
        history,
        verification,
    })
}
