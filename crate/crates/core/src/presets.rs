//! Named coefficient fields shipped with the crate.

use serde::{Deserialize, Serialize};

use crate::domain::Domain2D;
use crate::error::{Error, Result};
use crate::field::{Coefs, CoefficientField, Profile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    Bilaplacian,
    Constant { alpha: f64, beta: f64, gamma: f64 },
    /// `alpha = gamma = 1`, `beta = q`.
    QConstant { q: f64 },
    #[serde(alias = "smooth_q_sweep")]
    QSweep { q_min: f64, q_max: f64, profile: Profile },
    SquareWaveAlpha { amplitude: f64, frequency: f64 },
}

impl Preset {
    pub fn build(&self, domain: Domain2D) -> Result<CoefficientField> {
        match *self {
            Preset::Bilaplacian => CoefficientField::bilaplacian(domain),
            Preset::Constant { alpha, beta, gamma } => CoefficientField::constant_real(domain, alpha, beta, gamma),
            Preset::QConstant { q } => CoefficientField::q_constant(domain, q),
            Preset::QSweep { q_min, q_max, profile } => CoefficientField::smooth_q_sweep(domain, q_min, q_max, profile),
            Preset::SquareWaveAlpha { amplitude, frequency } => {
                if !(amplitude.abs() < 1.0) {
                    return Err(Error::Parameter(format!("square-wave amplitude must lie in (-1, 1), got {amplitude}")));
                }
                CoefficientField::square_wave_alpha(domain, amplitude, frequency)
            }
        }
    }

    /// Constant coefficients, when the preset has them.
    pub fn constant_coefs(&self) -> Option<Coefs> {
        match *self {
            Preset::Bilaplacian => Some(Coefs::real(1.0, 1.0, 1.0)),
            Preset::Constant { alpha, beta, gamma } => Some(Coefs::real(alpha, beta, gamma)),
            Preset::QConstant { q } => Some(Coefs::real(1.0, q, 1.0)),
            _ => None,
        }
    }

    /// Looks up a shipped preset by name.
    pub fn named(name: &str) -> Result<Preset> {
        shipped()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, p)| p)
            .ok_or_else(|| {
                let names: Vec<&str> = shipped().iter().map(|(n, _)| *n).collect();
                Error::Parameter(format!("unknown preset {name:?}; known presets: {}", names.join(", ")))
            })
    }
}

/// The preset library.
pub fn shipped() -> Vec<(&'static str, Preset)> {
    vec![
        ("bilaplacian", Preset::Bilaplacian),
        ("q-negative", Preset::QConstant { q: -0.5 }),
        ("q-large", Preset::QConstant { q: 5.0 }),
        ("anisotropic", Preset::Constant { alpha: 1.0, beta: 0.5, gamma: 2.0 }),
        ("q-sweep", Preset::QSweep { q_min: -0.5, q_max: 5.0, profile: Profile::Tanh }),
        ("square-wave", Preset::SquareWaveAlpha { amplitude: 0.05, frequency: 1.0 }),
    ]
}
