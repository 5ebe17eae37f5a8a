use serde::{Deserialize, Serialize};

use super::Architecture;
use crate::autodiff::Scalar;
use crate::error::{config, Result};
use crate::sampling::{Domain, Interval, Point, RhoSpec};

/// Input transformation applied before the first layer.
///
/// Standard networks map every input affinely onto `[0, 1]`. Wave networks
/// keep `x` as is, map `t` onto `[0, 1]`, and feed `(√ρ, ρ)` raw into the wave
/// layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mode: Architecture,
    pub x_range: Interval,
    pub t_range: Interval,
    /// Present for generalizing networks.
    pub rho_range: Option<Interval>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhoFeature {
    Absent,
    /// Standard architecture: ρ on the unit interval.
    Unit(f64),
    /// Wave architecture: multipliers of θ₁x and θ₂t.
    Wave { sqrt: f64, linear: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledPoint {
    pub x: f64,
    pub t: f64,
    pub rho: RhoFeature,
    /// `d x_scaled / d x`
    pub s_x: f64,
    /// `d t_scaled / d t`
    pub s_t: f64,
}

impl ScaledPoint {
    /// Factors multiplying θ₁ and θ₂ in the wave layer.
    pub fn wave_factors(&self) -> (f64, f64) {
        match self.rho {
            RhoFeature::Wave { sqrt, linear } => (sqrt, linear),
            _ => (1.0, 1.0),
        }
    }
}

impl FeatureScaler {
    pub fn new(mode: Architecture, domain: &Domain) -> Result<Self> {
        let check = |i: Interval, what: &str| {
            Interval::new(i.lo, i.hi).map_err(|_| config(format!("degenerate {what} range [{}, {}]", i.lo, i.hi)))
        };
        let rho_range = match domain.rho {
            RhoSpec::Fixed(_) => None,
            RhoSpec::Range(r) => Some(check(r, "rho")?),
        };
        Ok(FeatureScaler {
            mode,
            x_range: check(domain.x, "x")?,
            t_range: check(domain.t, "t")?,
            rho_range,
        })
    }

    pub fn s_x(&self) -> f64 {
        match self.mode {
            Architecture::Standard => 1.0 / self.x_range.width(),
            Architecture::Wave => 1.0,
        }
    }

    pub fn s_t(&self) -> f64 {
        1.0 / self.t_range.width()
    }

    /// The (x, t) part of [`FeatureScaler::scale`] in any scalar type.
    pub fn scale_xt<S: Scalar>(&self, x: S, t: S) -> (S, S) {
        let c = S::constant;
        let ts = (t - c(self.t_range.lo)) * c(self.s_t());
        match self.mode {
            Architecture::Standard => ((x - c(self.x_range.lo)) * c(self.s_x()), ts),
            Architecture::Wave => (x, ts),
        }
    }

    pub fn scale(&self, p: &Point) -> ScaledPoint {
        let (x, t) = self.scale_xt(p.x, p.t);
        let rho = match self.mode {
            Architecture::Standard => match self.rho_range {
                Some(r) => RhoFeature::Unit((p.rho - r.lo) / r.width()),
                None => RhoFeature::Absent,
            },
            Architecture::Wave => match self.rho_range {
                Some(_) => RhoFeature::Wave { sqrt: p.rho.sqrt(), linear: p.rho },
                None => RhoFeature::Absent,
            },
        };
        ScaledPoint { x, t, rho, s_x: self.s_x(), s_t: self.s_t() }
    }
}
