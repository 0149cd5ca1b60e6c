//! Bundles everything that is fixed for a run: the velocity space, the
//! density space, parameters and optional sources.

use nalgebra::DMatrix;

use crate::basis::GalerkinBasis;
use crate::error::{Error, Result};
use crate::friction::FrictionReg;
use crate::params::{FluidParams, Sources};
use crate::spectral::ScalarSpace;

#[derive(Debug, Clone)]
pub struct Model {
    pub basis: GalerkinBasis,
    pub space: ScalarSpace,
    pub params: FluidParams,
    pub sources: Sources,
    friction: FrictionReg,
    body: [DMatrix<f64>; 2],
}

impl Model {
    pub fn new(
        basis: GalerkinBasis,
        space: ScalarSpace,
        params: FluidParams,
        sources: Sources,
    ) -> Result<Self> {
        params.validate()?;
        if basis.geometry() != space.geometry() {
            return Err(Error::Argument(
                "velocity basis and density space must share the geometry".into(),
            ));
        }
        let friction = FrictionReg::new(params.delta)?;
        let grid = basis.grid();
        let body = params.f.on_grid((grid.nx(), grid.ny()));
        Ok(Self {
            basis,
            space,
            params,
            sources,
            friction,
            body,
        })
    }

    pub fn friction(&self) -> FrictionReg {
        self.friction
    }

    /// Body force samples on the quadrature grid.
    pub fn body_force(&self) -> &[DMatrix<f64>; 2] {
        &self.body
    }

    /// Copy with different scalar parameters (same spaces and sources).
    pub fn with_params(&self, params: FluidParams) -> Result<Self> {
        Self::new(
            self.basis.clone(),
            self.space.clone(),
            params,
            self.sources.clone(),
        )
    }
}
