//! Flat key-value configuration in TOML. Every rate is quoted as `ω/2π` in
//! kHz; missing keys take the figure-2 parameter set.
//!
//! ```toml
//! variant = "full-rwa"
//! lambda1_khz = 100.0
//! lambda2_khz = 50.0
//! g1_khz = 3.0
//! g2_khz = 20.0
//! kappa1_khz = 120.0
//! kappa2_khz = 120.0   # defaults to kappa1_khz
//! omega1_khz = 300.0
//! omega2_khz = 300.0   # or delta12_khz = omega1 - omega2
//! q1 = 1e9
//! q2 = 1e9             # defaults to q1
//! n1 = 2e7
//! n2 = 2e7             # defaults to n1
//! truncation = "auto"  # or an integer K
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sweep::Truncation;
use crate::system::{ModelVariant, Rates, SystemParams};

/// `2π · 10³`: converts kHz-per-2π to rad/s.
pub const KHZ: f64 = 2.0 * std::f64::consts::PI * 1e3;

/// Relative tolerance for `omega1 − omega2 = delta12` when all three are given.
pub const DETUNING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub variant: Option<ModelVariant>,
    pub lambda1_khz: Option<f64>,
    pub lambda2_khz: Option<f64>,
    pub g1_khz: Option<f64>,
    pub g2_khz: Option<f64>,
    pub kappa1_khz: Option<f64>,
    pub kappa2_khz: Option<f64>,
    pub omega1_khz: Option<f64>,
    pub omega2_khz: Option<f64>,
    pub delta12_khz: Option<f64>,
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub n1: Option<f64>,
    pub n2: Option<f64>,
    pub truncation: Option<Truncation>,
}

/// The figure-2 parameter set: `λ₁/2π = 100 kHz`, `λ₂/λ₁ = 0.5`,
/// `κ/2π = 120 kHz`, `g₁/2π = 3 kHz`, `g₂/2π = 20 kHz`, `Ω/2π = 300 kHz`,
/// `Q = 10⁹`, `n = 2×10⁷`.
pub fn default_rates() -> Rates {
    Rates {
        lambda1: 100.0 * KHZ,
        lambda2: 50.0 * KHZ,
        g1: 3.0 * KHZ,
        g2: 20.0 * KHZ,
        kappa1: 120.0 * KHZ,
        kappa2: 120.0 * KHZ,
        omega1: 300.0 * KHZ,
        omega2: 300.0 * KHZ,
        q1: 1e9,
        q2: 1e9,
        n1: 2e7,
        n2: 2e7,
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Keys set in `other` replace the ones here.
    pub fn merge(mut self, other: &Config) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f.clone(); } )* };
        }
        take!(
            variant,
            lambda1_khz,
            lambda2_khz,
            g1_khz,
            g2_khz,
            kappa1_khz,
            kappa2_khz,
            omega1_khz,
            omega2_khz,
            delta12_khz,
            q1,
            q2,
            n1,
            n2,
            truncation
        );
        self
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant.unwrap_or(ModelVariant::FullRwa)
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation.unwrap_or_default()
    }

    /// Rates in rad/s with defaults applied.
    pub fn rates(&self) -> Result<Rates> {
        let d = default_rates();
        let khz = |v: Option<f64>, default: f64| v.map_or(default, |x| x * KHZ);
        let kappa1 = khz(self.kappa1_khz, d.kappa1);
        let omega1 = khz(self.omega1_khz, d.omega1);
        let omega2 = match (self.omega2_khz, self.delta12_khz) {
            (Some(o2), Some(delta)) => {
                let o1 = omega1 / KHZ;
                if ((o1 - o2) - delta).abs() > DETUNING_TOL * o1.abs().max(o2.abs()) {
                    return Err(Error::Config(format!(
                        "delta12_khz = {delta} disagrees with omega1_khz - omega2_khz = {}",
                        o1 - o2
                    )));
                }
                o2 * KHZ
            }
            (Some(o2), None) => o2 * KHZ,
            (None, Some(delta)) => omega1 - delta * KHZ,
            (None, None) => omega1,
        };
        let q1 = self.q1.unwrap_or(d.q1);
        let n1 = self.n1.unwrap_or(d.n1);
        Ok(Rates {
            lambda1: khz(self.lambda1_khz, d.lambda1),
            lambda2: khz(self.lambda2_khz, d.lambda2),
            g1: khz(self.g1_khz, d.g1),
            g2: khz(self.g2_khz, d.g2),
            kappa1,
            kappa2: khz(self.kappa2_khz, kappa1),
            omega1,
            omega2,
            q1,
            q2: self.q2.unwrap_or(q1),
            n1,
            n2: self.n2.unwrap_or(n1),
        })
    }

    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(self.rates()?).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_set() {
        let c = Config::from_toml("").unwrap();
        assert_eq!(c.rates().unwrap(), default_rates());
        assert_eq!(c.variant(), ModelVariant::FullRwa);
        assert_eq!(c.truncation(), Truncation::Auto);
    }

    #[test]
    fn parses_units_and_derived_defaults() {
        let c = Config::from_toml(
            "variant = \"detuned-mode1-resonant\"\nkappa1_khz = 60\nq1 = 1e8\nn1 = 5\ndelta12_khz = 240\ntruncation = 4\n",
        )
        .unwrap();
        let r = c.rates().unwrap();
        assert_eq!(c.variant(), ModelVariant::DetunedMode1Resonant);
        assert_eq!(r.kappa2, 60.0 * KHZ);
        assert_eq!(r.q2, 1e8);
        assert_eq!(r.n2, 5.0);
        assert!((r.omega1 - r.omega2 - 240.0 * KHZ).abs() < 1e-6);
        assert_eq!(c.truncation(), Truncation::Fixed(4));
    }

    #[test]
    fn rejects_unknown_keys_and_inconsistent_detuning() {
        assert!(matches!(Config::from_toml("lambda_khz = 1"), Err(Error::Config(_))));
        let c = Config::from_toml("omega1_khz = 300\nomega2_khz = 200\ndelta12_khz = 50").unwrap();
        assert!(c.rates().is_err());
        let c = Config::from_toml("omega1_khz = 300\nomega2_khz = 200\ndelta12_khz = 100").unwrap();
        assert!(c.rates().is_ok());
        assert!(Config::from_toml("truncation = \"many\"").is_err());
        assert!(Config::from_toml("q1 = -1").unwrap().params().is_err());
    }

    #[test]
    fn merge_prefers_overrides() {
        let base = Config::from_toml("n1 = 1\nq1 = 1e8").unwrap();
        let over = Config {
            n1: Some(7.0),
            ..Config::default()
        };
        let merged = base.merge(&over);
        assert_eq!(merged.n1, Some(7.0));
        assert_eq!(merged.q1, Some(1e8));
    }
}
