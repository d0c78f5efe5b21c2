//! Single points, one-dimensional sweeps and the figure presets.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{default_rates, KHZ};
use crate::error::{Error, Result};
use crate::floquet::{auto_truncation, solve_floquet, DEFAULT_TRUNCATION, MAX_AUTO_TRUNCATION};
use crate::gaussian::CovarianceMatrix;
use crate::lyapunov::{residual, solve_lyapunov};
use crate::measures::{full_report, EntanglementReport};
use crate::system::{stability_check, ModelVariant, Rates, SystemParams};

/// Version of the CSV column set written by [`write_csv`].
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Column order of sweep CSV files.
pub const CSV_COLUMNS: [&str; 14] = [
    "series",
    "parameter",
    "value",
    "stable",
    "log_negativity",
    "nu_min",
    "epr_variance",
    "nrf",
    "purity",
    "mean_n1",
    "mean_n2",
    "k_used",
    "residual",
    "error",
];

/// Number of points on the default `λ₂/λ₁` grid.
pub const LAMBDA_GRID_POINTS: usize = 101;

/// Floquet truncation policy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TruncationRepr", into = "TruncationRepr")]
pub enum Truncation {
    /// Smallest `K` whose successive difference is below the convergence tolerance.
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TruncationRepr {
    Fixed(usize),
    Named(String),
}

impl TryFrom<TruncationRepr> for Truncation {
    type Error = String;

    fn try_from(r: TruncationRepr) -> std::result::Result<Self, String> {
        match r {
            TruncationRepr::Fixed(0) => Err("truncation must be >= 1".into()),
            TruncationRepr::Fixed(k) => Ok(Truncation::Fixed(k)),
            TruncationRepr::Named(s) if s == "auto" => Ok(Truncation::Auto),
            TruncationRepr::Named(s) => Err(format!("truncation must be \"auto\" or an integer, got `{s}`")),
        }
    }
}

impl From<Truncation> for TruncationRepr {
    fn from(t: Truncation) -> Self {
        match t {
            Truncation::Auto => TruncationRepr::Named("auto".into()),
            Truncation::Fixed(k) => TruncationRepr::Fixed(k),
        }
    }
}

impl FromStr for Truncation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Truncation::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(Truncation::Fixed(k)),
            _ => Err(Error::Config(format!(
                "truncation must be `auto` or an integer >= 1, got `{s}`"
            ))),
        }
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truncation::Auto => f.write_str("auto"),
            Truncation::Fixed(k) => write!(f, "{k}"),
        }
    }
}

/// Parameters that a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    /// `λ₂/λ₁` at fixed `λ₁`.
    LambdaRatio,
    /// `g₂/g₁` at fixed `g₁`.
    GRatio,
    /// `δ₁₂/2π` in kHz at fixed `Ω₁`. `Q₂` follows `Ω₂` so that the damping
    /// rate `γ₂` stays fixed and the detuning enters only through the coupling.
    Delta12Khz,
    /// `Q₁ = Q₂`.
    Q,
    /// `n₁ = n₂`.
    N,
}

impl SweptParameter {
    pub const ALL: [SweptParameter; 5] = [
        SweptParameter::LambdaRatio,
        SweptParameter::GRatio,
        SweptParameter::Delta12Khz,
        SweptParameter::Q,
        SweptParameter::N,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweptParameter::LambdaRatio => "lambda_ratio",
            SweptParameter::GRatio => "g_ratio",
            SweptParameter::Delta12Khz => "delta12_khz",
            SweptParameter::Q => "q",
            SweptParameter::N => "n",
        }
    }

    /// `base` with the swept value applied.
    pub fn apply(self, base: Rates, value: f64) -> Rates {
        let mut r = base;
        match self {
            SweptParameter::LambdaRatio => r.lambda2 = value * r.lambda1,
            SweptParameter::GRatio => r.g2 = value * r.g1,
            SweptParameter::Delta12Khz => {
                let omega2 = r.omega1 - value * KHZ;
                r.q2 *= omega2 / r.omega2;
                r.omega2 = omega2;
            }
            SweptParameter::Q => {
                r.q1 = value;
                r.q2 = value;
            }
            SweptParameter::N => {
                r.n1 = value;
                r.n2 = value;
            }
        }
        r
    }
}

impl fmt::Display for SweptParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweptParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown swept parameter `{s}`")))
    }
}

/// One series of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub series: String,
    pub variant: ModelVariant,
    pub parameter: SweptParameter,
    pub grid: Vec<f64>,
    pub fixed: Rates,
    pub truncation: Truncation,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config(format!("series `{}` has an empty grid", self.series)));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("grid values must be finite".into()));
        }
        let increasing = self.grid.windows(2).all(|w| w[1] > w[0]);
        let decreasing = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::Config("grid must be strictly monotone".into()));
        }
        match (self.parameter, self.variant) {
            (SweptParameter::Delta12Khz, v) if !v.is_detuned() => Err(Error::Config(format!(
                "a delta12_khz sweep needs a detuned variant, not {v}"
            ))),
            (SweptParameter::GRatio, ModelVariant::CsOnlyRwa) => {
                Err(Error::Config("a g_ratio sweep needs the dispersive cavity".into()))
            }
            (_, ModelVariant::Counterrotating) if self.fixed.omega1 != self.fixed.omega2 => Err(Error::Config(
                "the counterrotating variant needs omega1 = omega2".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Result of one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcome {
    pub report: EntanglementReport,
    pub covariance: Option<CovarianceMatrix>,
    /// Floquet truncation used; `None` for constant models.
    pub k_used: Option<usize>,
    /// Relative residual of the solved Lyapunov equation.
    pub residual: Option<f64>,
    /// `false` when the automatic truncation search hit its limit.
    pub converged: bool,
}

/// Build, solve and measure one point. Unstable points return a report with
/// `stable = false` rather than an error.
pub fn run_point(variant: ModelVariant, params: &SystemParams, truncation: Truncation) -> Result<PointOutcome> {
    let drift = variant.build_drift(params)?;
    let diffusion = variant.build_diffusion(params);
    let stability = stability_check(&drift);
    if !stability.stable {
        return Ok(PointOutcome {
            report: EntanglementReport::unstable(),
            covariance: None,
            k_used: None,
            residual: None,
            converged: true,
        });
    }
    let (v, k_used, res, converged) = if drift.is_constant() {
        let v = solve_lyapunov(drift.constant(), diffusion.matrix())?;
        let r = residual(drift.constant(), &v, diffusion.matrix())?.relative;
        (v, None, r, true)
    } else {
        match truncation {
            Truncation::Auto => {
                let a = auto_truncation(&drift, &diffusion, MAX_AUTO_TRUNCATION)?;
                (a.v, Some(a.truncation), a.residual, a.converged)
            }
            Truncation::Fixed(k) => {
                let sol = solve_floquet(&drift, &diffusion, k)?;
                (sol.dc_block(), Some(k), sol.residual, true)
            }
        }
    };
    let joint = CovarianceMatrix::new(drift.basis().clone(), v)?;
    // A Hurwitz drift with nonnegative noise has a physical steady state. A
    // solution that is not one means the eigenvalue test was fooled, as at
    // the defective point λ₂ = λ₁.
    if let Err(e) = joint.ensure_physical() {
        log::warn!("{variant}: steady state rejected ({e}); reporting the point as unstable");
        return Ok(PointOutcome {
            report: EntanglementReport::unstable(),
            covariance: None,
            k_used,
            residual: Some(res),
            converged,
        });
    }
    let report = full_report(&joint, drift.mechanical_modes()?, true)?;
    Ok(PointOutcome {
        report,
        covariance: Some(joint),
        k_used,
        residual: Some(res),
        converged,
    })
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub series: String,
    pub parameter: String,
    pub value: f64,
    pub stable: bool,
    pub log_negativity: Option<f64>,
    pub nu_min: Option<f64>,
    pub epr_variance: Option<f64>,
    pub nrf: Option<f64>,
    pub purity: Option<f64>,
    pub mean_n1: Option<f64>,
    pub mean_n2: Option<f64>,
    pub k_used: Option<usize>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn new(series: &str, parameter: &str, value: f64, outcome: Result<PointOutcome>) -> Self {
        let mut row = SweepRow {
            series: series.to_string(),
            parameter: parameter.to_string(),
            value,
            stable: false,
            log_negativity: None,
            nu_min: None,
            epr_variance: None,
            nrf: None,
            purity: None,
            mean_n1: None,
            mean_n2: None,
            k_used: None,
            residual: None,
            error: None,
        };
        match outcome {
            Ok(o) => {
                let r = o.report;
                row.stable = r.stable;
                row.log_negativity = r.log_negativity;
                row.nu_min = r.nu_min;
                row.epr_variance = r.epr_variance;
                row.nrf = r.nrf;
                row.purity = r.purity;
                row.mean_n1 = r.mean_phonons.map(|p| p.0);
                row.mean_n2 = r.mean_phonons.map(|p| p.1);
                row.k_used = o.k_used;
                row.residual = o.residual;
                if !o.converged {
                    row.error = Some(format!(
                        "Floquet truncation not converged at K = {}",
                        o.k_used.unwrap_or(0)
                    ));
                }
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Evaluates every grid point in parallel; rows keep grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let name = spec.parameter.name();
    Ok(spec
        .grid
        .par_iter()
        .map(|&value| {
            let outcome = SystemParams::new(spec.parameter.apply(spec.fixed, value))
                .and_then(|p| run_point(spec.variant, &p, spec.truncation));
            SweepRow::new(&spec.series, name, value, outcome)
        })
        .collect())
}

/// Runs several series and concatenates their rows.
pub fn run_sweeps(specs: &[SweepSpec]) -> Result<Vec<SweepRow>> {
    for s in specs {
        s.validate()?;
    }
    let mut rows = Vec::new();
    for s in specs {
        rows.extend(run_sweep(s)?);
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::Parse(format!(
            "unexpected CSV header `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// `count` evenly spaced points on `[a, b]`.
pub fn linear_grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..count)
            .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// `count` logarithmically spaced points on `[a, b]`, `a, b > 0`.
pub fn geometric_grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    linear_grid(a.ln(), b.ln(), count).into_iter().map(f64::exp).collect()
}

/// The default `λ₂/λ₁` grid: 101 points on `[0.01, 0.99]`.
pub fn lambda_ratio_grid() -> Vec<f64> {
    linear_grid(0.01, 0.99, LAMBDA_GRID_POINTS)
}

/// The `g₂/g₁` grid of the fig3 preset: 101 logarithmic points on `[0.5, 100]`.
pub fn g_ratio_grid() -> Vec<f64> {
    geometric_grid(0.5, 100.0, 101)
}

/// Figure-reproduction presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Fig2ad,
    Fig2eh,
    Fig3,
    Fig4ac,
    Fig4df,
    Fig5,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Fig2ad,
        Preset::Fig2eh,
        Preset::Fig3,
        Preset::Fig4ac,
        Preset::Fig4df,
        Preset::Fig5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2ad => "fig2ad",
            Preset::Fig2eh => "fig2eh",
            Preset::Fig3 => "fig3",
            Preset::Fig4ac => "fig4ac",
            Preset::Fig4df => "fig4df",
            Preset::Fig5 => "fig5",
        }
    }

    /// Panels plotted for this preset, as CSV column names.
    pub fn panels(self) -> &'static [&'static str] {
        match self {
            Preset::Fig2ad | Preset::Fig2eh => &["log_negativity", "epr_variance", "nrf", "purity"],
            _ => &["log_negativity", "epr_variance", "purity"],
        }
    }

    /// The series of the preset. All use the figure-2 rates unless stated.
    pub fn specs(self, truncation: Truncation) -> Vec<SweepSpec> {
        let base = default_rates();
        let lambda = |series: String, variant, fixed: Rates| SweepSpec {
            series,
            variant,
            parameter: SweptParameter::LambdaRatio,
            grid: lambda_ratio_grid(),
            fixed,
            truncation,
        };
        match self {
            Preset::Fig2ad => [0.0, 1.0, 1e6, 2e7]
                .into_iter()
                .map(|n| {
                    let fixed = Rates {
                        n1: n,
                        n2: n,
                        q1: 1e8,
                        q2: 1e8,
                        ..base
                    };
                    lambda(format!("n={n:e}"), ModelVariant::CsOnlyRwa, fixed)
                })
                .collect(),
            Preset::Fig2eh => [1e8, 1e9, 1e10]
                .into_iter()
                .map(|q| {
                    let fixed = Rates { q1: q, q2: q, ..base };
                    lambda(format!("Q={q:e}"), ModelVariant::FullRwa, fixed)
                })
                .collect(),
            Preset::Fig3 => [0.3, 3.0, 30.0]
                .into_iter()
                .map(|g1| SweepSpec {
                    series: format!("g1={g1}kHz"),
                    variant: ModelVariant::FullRwa,
                    parameter: SweptParameter::GRatio,
                    grid: g_ratio_grid(),
                    fixed: Rates {
                        g1: g1 * KHZ,
                        lambda2: 80.0 * KHZ,
                        ..base
                    },
                    truncation,
                })
                .collect(),
            Preset::Fig4ac => detuned_series(base, ModelVariant::DetunedMode2Resonant, &[0.0, 240.0], truncation),
            Preset::Fig4df => detuned_series(
                base,
                ModelVariant::DetunedMode1Resonant,
                &[0.0, 60.0, 120.0, 240.0],
                truncation,
            ),
            Preset::Fig5 => vec![
                lambda("rwa".into(), ModelVariant::FullRwa, base),
                lambda("counterrotating".into(), ModelVariant::Counterrotating, base),
            ],
        }
    }
}

/// Detuned series at fixed damping rates `γ₁ = γ₂ = Ω₁/Q`, as in figure 2.
fn detuned_series(base: Rates, variant: ModelVariant, deltas: &[f64], truncation: Truncation) -> Vec<SweepSpec> {
    deltas
        .iter()
        .map(|&d| SweepSpec {
            series: format!("delta12={d}kHz"),
            variant,
            parameter: SweptParameter::LambdaRatio,
            grid: lambda_ratio_grid(),
            fixed: SweptParameter::Delta12Khz.apply(base, d),
            truncation,
        })
        .collect()
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}`")))
    }
}

/// Default fixed truncation when the user opts out of the automatic search.
pub const FIXED_TRUNCATION_DEFAULT: Truncation = Truncation::Fixed(DEFAULT_TRUNCATION);

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(variant: ModelVariant, parameter: SweptParameter, grid: Vec<f64>) -> SweepSpec {
        SweepSpec {
            series: "s".into(),
            variant,
            parameter,
            grid,
            fixed: default_rates(),
            truncation: Truncation::Auto,
        }
    }

    #[test]
    fn run_point_examples() {
        let r = Rates {
            n1: 0.0,
            n2: 0.0,
            q1: 1e8,
            q2: 1e8,
            ..default_rates()
        };
        let p = SystemParams::new(r).unwrap();
        let out = run_point(ModelVariant::CsOnlyRwa, &p, Truncation::Auto).unwrap();
        assert!(out.report.log_negativity.unwrap() > 0.0);
        assert!(out.residual.unwrap() < 1e-8);

        let p = SystemParams::new(Rates {
            lambda2: r.lambda1,
            ..r
        })
        .unwrap();
        let out = run_point(ModelVariant::CsOnlyRwa, &p, Truncation::Auto).unwrap();
        assert!(!out.report.stable);

        let p = SystemParams::new(Rates {
            lambda2: 0.0,
            g1: 0.0,
            g2: 0.0,
            n1: 5.0,
            n2: 5.0,
            ..r
        })
        .unwrap();
        let out = run_point(ModelVariant::FullRwa, &p, Truncation::Auto).unwrap();
        assert_eq!(out.report.log_negativity, Some(0.0));
    }

    #[test]
    fn spec_validation() {
        let ok = spec(ModelVariant::FullRwa, SweptParameter::LambdaRatio, vec![0.1, 0.2]);
        assert!(ok.validate().is_ok());
        assert!(spec(ModelVariant::FullRwa, SweptParameter::LambdaRatio, vec![])
            .validate()
            .is_err());
        assert!(spec(ModelVariant::FullRwa, SweptParameter::LambdaRatio, vec![0.1, 0.1])
            .validate()
            .is_err());
        assert!(spec(ModelVariant::FullRwa, SweptParameter::Delta12Khz, vec![1.0])
            .validate()
            .is_err());
        assert!(spec(ModelVariant::CsOnlyRwa, SweptParameter::GRatio, vec![1.0])
            .validate()
            .is_err());
        assert!(spec(
            ModelVariant::DetunedMode1Resonant,
            SweptParameter::Delta12Khz,
            vec![2.0, 1.0]
        )
        .validate()
        .is_ok());
    }

    #[test]
    fn sweep_rows_keep_order_and_round_trip() {
        let s = spec(
            ModelVariant::FullRwa,
            SweptParameter::LambdaRatio,
            linear_grid(0.1, 1.2, 12),
        );
        let rows = run_sweep(&s).unwrap();
        assert_eq!(rows.len(), 12);
        for (row, v) in rows.iter().zip(&s.grid) {
            assert_eq!(row.value, *v);
            assert!(!row.failed());
        }
        assert!(!rows.last().unwrap().stable);
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&CSV_COLUMNS.join(",")));
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn swept_parameters_apply() {
        let base = default_rates();
        assert_eq!(SweptParameter::LambdaRatio.apply(base, 0.5).lambda2, 0.5 * base.lambda1);
        assert_eq!(SweptParameter::GRatio.apply(base, 2.0).g2, 2.0 * base.g1);
        let d = SweptParameter::Delta12Khz.apply(base, 60.0);
        assert!((base.omega1 - d.omega2 - 60.0 * KHZ).abs() < 1e-6);
        let gamma2 = |r: Rates| r.omega2 / r.q2;
        assert!((gamma2(d) / gamma2(base) - 1.0).abs() < 1e-12);
        assert_eq!(SweptParameter::Q.apply(base, 3.0).q2, 3.0);
        assert_eq!(SweptParameter::N.apply(base, 3.0).n1, 3.0);
        for p in SweptParameter::ALL {
            assert_eq!(p.name().parse::<SweptParameter>().unwrap(), p);
        }
    }

    #[test]
    fn presets_have_expected_series() {
        let counts: Vec<usize> = Preset::ALL.iter().map(|p| p.specs(Truncation::Auto).len()).collect();
        assert_eq!(counts, vec![4, 3, 3, 2, 4, 2]);
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
            for s in p.specs(Truncation::Auto) {
                s.validate().unwrap();
            }
        }
        let g = lambda_ratio_grid();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.01);
        assert!((g[100] - 0.99).abs() < 1e-15);
    }

    #[test]
    fn truncation_parsing() {
        assert_eq!("auto".parse::<Truncation>().unwrap(), Truncation::Auto);
        assert_eq!("7".parse::<Truncation>().unwrap(), Truncation::Fixed(7));
        assert!("0".parse::<Truncation>().is_err());
        assert_eq!(FIXED_TRUNCATION_DEFAULT.to_string(), "10");
    }
}
