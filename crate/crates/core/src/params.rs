use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::DampingExponent;

/// Constants of the damped Navier-Stokes-Voigt model.
///
/// `mu` is the Voigt length scale squared, `nu` the viscosity, `alpha` the
/// Darcy coefficient, `beta` and `r` the damping coefficient and exponent,
/// `horizon` the final time `T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub mu: f64,
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    pub horizon: f64,
}

impl ModelParams {
    pub fn new(mu: f64, nu: f64, alpha: f64, beta: f64, r: f64, horizon: f64) -> Result<Self> {
        let p = Self {
            mu,
            nu,
            alpha,
            beta,
            r,
            horizon,
        };
        p.validate()?;
        Ok(p)
    }

    /// `beta = 0` is accepted and switches the damping term off.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("mu", self.mu)?;
        positive("nu", self.nu)?;
        positive("alpha", self.alpha)?;
        positive("horizon T", self.horizon)?;
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::invalid(format!("beta must be >= 0, got {}", self.beta)));
        }
        DampingExponent::new(self.r)?;
        Ok(())
    }

    pub fn damping(&self) -> DampingExponent {
        DampingExponent::new(self.r).expect("validated exponent")
    }
}
