//! Run configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::{GalerkinBasis, InteriorModes};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::fixed_point::{step_count, Coupling, SolverOptions};
use crate::geometry::Geometry;
use crate::mms::ManufacturedSolution;
use crate::model::Model;
use crate::params::{BodyForce, FluidParams, Sources};
use crate::spectral::ScalarSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub h: f64,
    pub quad_x: usize,
    pub quad_y: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub kx_max: usize,
    pub ky_max: usize,
    #[serde(default)]
    pub interior_modes: InteriorModes,
    pub density_kx: usize,
    pub density_my: usize,
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub nu: f64,
    #[serde(default)]
    pub lambda: f64,
    pub a: f64,
    pub gamma: f64,
    pub beta: f64,
    pub alpha: f64,
    pub eps: f64,
    pub delta: f64,
    pub g_bottom: f64,
    pub g_top: f64,
    /// Body force components as expressions in `x`, `y`.
    #[serde(default = "zero_expr")]
    pub f_x: String,
    #[serde(default = "zero_expr")]
    pub f_y: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol_fp")]
    pub tol_fp: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default)]
    pub coupling: Coupling,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            tol_fp: o.tol_fp,
            max_iter: o.max_iter,
            damping: o.damping,
            coupling: o.coupling,
        }
    }
}

/// Raw initial density and momentum as expressions in `x`, `y`. They are
/// regularised with the configured `alpha` before the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub rho0: String,
    #[serde(default = "zero_expr")]
    pub qx: String,
    #[serde(default = "zero_expr")]
    pub qy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Every `stride`-th time node is written to the archive.
    #[serde(default = "one_usize")]
    pub stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_zero_normal")]
    pub zero_normal: usize,
    #[serde(default = "default_interior")]
    pub interior: usize,
    /// Relative energy residual at every node.
    #[serde(default = "default_tol_energy")]
    pub tol_energy: f64,
    #[serde(default = "default_tol_weak")]
    pub tol_weak: f64,
    #[serde(default = "default_tol_alt")]
    pub tol_alt: f64,
    /// `L^2` space-time continuity residual.
    #[serde(default = "default_tol_continuity")]
    pub tol_continuity: f64,
    /// Sign condition of the renormalised continuity equation.
    #[serde(default = "default_tol_renormalized")]
    pub tol_renormalized: f64,
    #[serde(default = "default_tol_mass")]
    pub tol_mass: f64,
    /// Extrapolated initial momentum gap.
    #[serde(default = "default_tol_initial")]
    pub tol_initial: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            zero_normal: default_zero_normal(),
            interior: default_interior(),
            tol_energy: default_tol_energy(),
            tol_weak: default_tol_weak(),
            tol_alt: default_tol_alt(),
            tol_continuity: default_tol_continuity(),
            tol_renormalized: default_tol_renormalized(),
            tol_mass: default_tol_mass(),
            tol_initial: default_tol_initial(),
        }
    }
}

/// Manufactured-solution study: a resolution study over `ky_levels` at
/// step `dt`, and a time-step study over `steps` at `ky_max = dt_ky`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmsConfig {
    pub rho: String,
    pub ux: String,
    pub uy: String,
    pub t_end: f64,
    pub dt: f64,
    pub ky_levels: Vec<usize>,
    /// Velocity pair used for the time-step study; must lie in the
    /// Galerkin space so that only the time error remains.
    pub dt_ux: String,
    pub dt_uy: String,
    pub dt_ky: usize,
    pub steps: Vec<usize>,
    #[serde(default = "default_max_spectral_slope")]
    pub max_spectral_slope: f64,
    #[serde(default = "default_min_order")]
    pub min_order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub discretization: DiscretizationConfig,
    pub params: ParamsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub mms: Option<MmsConfig>,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn zero_expr() -> String {
    "0".into()
}
fn default_tol_fp() -> f64 {
    SolverOptions::default().tol_fp
}
fn default_max_iter() -> usize {
    SolverOptions::default().max_iter
}
fn default_damping() -> f64 {
    SolverOptions::default().damping
}
fn default_seed() -> u64 {
    7
}
fn default_zero_normal() -> usize {
    100
}
fn default_interior() -> usize {
    50
}
fn default_tol_energy() -> f64 {
    1e-6
}
fn default_tol_weak() -> f64 {
    1e-5
}
fn default_tol_alt() -> f64 {
    1e-5
}
fn default_tol_continuity() -> f64 {
    1e-5
}
fn default_tol_renormalized() -> f64 {
    1e-6
}
fn default_tol_mass() -> f64 {
    1e-10
}
fn default_tol_initial() -> f64 {
    1e-6
}
fn default_max_spectral_slope() -> f64 {
    -3.0
}
fn default_min_order() -> f64 {
    1.8
}

fn parse_spatial(name: &str, src: &str) -> Result<Expr> {
    let e = Expr::parse(src).map_err(|e| Error::Config(format!("{name}: {e}")))?;
    if e.depends_on(Var::T) {
        return Err(Error::Config(format!("{name} must not depend on t")));
    }
    Ok(e)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// Checks everything that can be checked without building the spaces:
    /// the parameter gate, the time grid, the output stride and the
    /// expressions.
    pub fn validate(&self) -> Result<()> {
        self.fluid_params_unchecked()?.validate()?;
        self.solver_options().validate()?;
        let d = &self.discretization;
        if !(d.dt > 0.0 && d.t_end > 0.0) {
            return Err(Error::Config(format!(
                "dt > 0 and T_end > 0 violated (dt = {}, T_end = {})",
                d.dt, d.t_end
            )));
        }
        let steps = step_count(d.t_end, d.dt).map_err(|e| Error::Config(e.to_string()))?;
        let stride = self.output.stride;
        if stride == 0 || steps % stride != 0 {
            return Err(Error::Config(format!(
                "output stride {stride} does not divide the step count {steps}"
            )));
        }
        if d.ky_max < 1 {
            return Err(Error::Config("ky_max >= 1 violated".into()));
        }
        parse_spatial("initial.rho0", &self.initial.rho0)?;
        parse_spatial("initial.qx", &self.initial.qx)?;
        parse_spatial("initial.qy", &self.initial.qy)?;
        let v = &self.verify;
        if v.zero_normal == 0 && v.interior == 0 {
            return Err(Error::Config("verification battery is empty".into()));
        }
        if let Some(m) = &self.mms {
            ManufacturedSolution::parse(&m.rho, &m.ux, &m.uy)
                .map_err(|e| Error::Config(format!("mms: {e}")))?;
            ManufacturedSolution::parse(&m.rho, &m.dt_ux, &m.dt_uy)
                .map_err(|e| Error::Config(format!("mms: {e}")))?;
            if m.ky_levels.len() < 2 || m.ky_levels.windows(2).any(|p| p[1] <= p[0]) {
                return Err(Error::Config(
                    "mms.ky_levels must be strictly increasing with at least two entries".into(),
                ));
            }
            if m.steps.len() < 2 || m.steps.windows(2).any(|p| p[1] <= p[0]) {
                return Err(Error::Config(
                    "mms.steps must be strictly increasing with at least two entries".into(),
                ));
            }
            step_count(m.t_end, m.dt).map_err(|e| Error::Config(format!("mms: {e}")))?;
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        step_count(self.discretization.t_end, self.discretization.dt)
            .expect("validated configuration")
    }

    pub fn solver_options(&self) -> SolverOptions {
        let s = &self.solver;
        SolverOptions {
            tol_fp: s.tol_fp,
            max_iter: s.max_iter,
            damping: s.damping,
            coupling: s.coupling,
        }
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let g = &self.geometry;
        Geometry::new(g.lx, g.h, g.quad_x, g.quad_y)
    }

    fn fluid_params_unchecked(&self) -> Result<FluidParams> {
        let p = &self.params;
        let fx = parse_spatial("params.f_x", &p.f_x)?;
        let fy = parse_spatial("params.f_y", &p.f_y)?;
        let f = match (&fx, &fy) {
            (Expr::Num(a), Expr::Num(b)) if *a == 0.0 && *b == 0.0 => BodyForce::Zero,
            (Expr::Num(a), Expr::Num(b)) => BodyForce::Constant([*a, *b]),
            _ => {
                let grid = self.geometry()?.grid();
                BodyForce::Gridded(Box::new([fx.on_grid(&grid, 0.0), fy.on_grid(&grid, 0.0)]))
            }
        };
        Ok(FluidParams {
            nu: p.nu,
            lambda: p.lambda,
            a: p.a,
            gamma: p.gamma,
            beta: p.beta,
            alpha: p.alpha,
            eps: p.eps,
            delta: p.delta,
            g: [p.g_bottom, p.g_top],
            f,
        })
    }

    pub fn fluid_params(&self) -> Result<FluidParams> {
        let p = self.fluid_params_unchecked()?;
        p.validate()?;
        Ok(p)
    }

    /// Velocity space, density space and parameters, without sources.
    pub fn model(&self) -> Result<Model> {
        let geometry = self.geometry()?;
        let d = &self.discretization;
        let basis = GalerkinBasis::new(&geometry, d.kx_max, d.ky_max, d.interior_modes)?;
        let space = ScalarSpace::new(&geometry, d.density_kx, d.density_my)?;
        Model::new(basis, space, self.fluid_params()?, Sources::none())
    }

    /// Raw initial data sampled on the quadrature grid.
    pub fn initial_fields(&self) -> Result<(nalgebra::DMatrix<f64>, [nalgebra::DMatrix<f64>; 2])> {
        let grid = self.geometry()?.grid();
        let rho = parse_spatial("initial.rho0", &self.initial.rho0)?.on_grid(&grid, 0.0);
        let qx = parse_spatial("initial.qx", &self.initial.qx)?.on_grid(&grid, 0.0);
        let qy = parse_spatial("initial.qy", &self.initial.qy)?.on_grid(&grid, 0.0);
        Ok((rho, [qx, qy]))
    }

    /// Stable fingerprint of the configuration (FNV-1a of its TOML form).
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.to_toml().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const BASE: &str = r#"
[geometry]
quad_x = 12
quad_y = 16

[discretization]
kx_max = 1
ky_max = 3
interior_modes = "omit"
density_kx = 3
density_my = 6
dt = 0.01
t_end = 0.1

[params]
nu = 0.1
a = 1.0
gamma = 1.6666666666666667
beta = 4.5
alpha = 1e-3
eps = 1e-2
delta = 5e-2
g_bottom = 0.1
g_top = 0.1

[initial]
rho0 = "1"

[output]
stride = 5
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.steps(), 10);
        assert_eq!(cfg.solver_options(), SolverOptions::default());
        assert_eq!(cfg.verify.zero_normal, 100);
        assert!(cfg.fluid_params().unwrap().f.is_zero());
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.fingerprint(), cfg.fingerprint());
        cfg.model().unwrap();
    }

    #[test]
    fn gate_names_the_violated_condition() {
        let bad = BASE.replace("gamma = 1.6666666666666667", "gamma = 1.2");
        let err = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(err.contains("gamma > 3/2"), "{err}");
        let bad = BASE.replace("beta = 4.5", "beta = 3.5");
        assert!(RunConfig::from_toml(&bad)
            .unwrap_err()
            .to_string()
            .contains("beta > max(gamma, 4)"));
        let bad = BASE.replace("g_top = 0.1", "g_top = -0.1");
        assert!(RunConfig::from_toml(&bad)
            .unwrap_err()
            .to_string()
            .contains("g >= 0"));
    }

    #[test]
    fn time_grid_and_stride_are_checked() {
        let bad = BASE.replace("dt = 0.01", "dt = 0.03");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = BASE.replace("stride = 5", "stride = 3");
        assert!(RunConfig::from_toml(&bad)
            .unwrap_err()
            .to_string()
            .contains("stride"));
    }

    #[test]
    fn expressions_are_checked() {
        let bad = BASE.replace("rho0 = \"1\"", "rho0 = \"1 + t\"");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = BASE.replace("rho0 = \"1\"", "rho0 = \"1 +\"");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = BASE.replace("[initial]", "[initial]\nbogus = 1");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn body_force_kinds() {
        let cfg = RunConfig::from_toml(&BASE.replace("g_top = 0.1", "g_top = 0.1\nf_x = \"0.5\""))
            .unwrap();
        assert!(
            matches!(cfg.fluid_params().unwrap().f, BodyForce::Constant([a, b]) if a == 0.5 && b == 0.0)
        );
        let cfg = RunConfig::from_toml(
            &BASE.replace("g_top = 0.1", "g_top = 0.1\nf_x = \"sin(2*pi*x)\""),
        )
        .unwrap();
        assert!(matches!(
            cfg.fluid_params().unwrap().f,
            BodyForce::Gridded(_)
        ));
    }
}
