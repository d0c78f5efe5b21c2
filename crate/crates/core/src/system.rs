//! Physical parameters and the linear Langevin model `dr = A(t) r dt + ξ`.
//!
//! All rates are angular frequencies in rad/s. Cavity quadratures come first,
//! then the mechanical ones: `(X₁,Y₁,x₁,p₁,x₂,p₂)` for the coherent-scattering
//! model and `(X₁,Y₁,X₂,Y₂,x₁,p₁,x₂,p₂)` once the dispersive cavity is added.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::QuadratureBasis;

/// Raw rates used to build [`SystemParams`]. Damping enters through the
/// quality factors, `γ_j = Ω_j / Q_j`; `Q_j = ∞` gives an undamped oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub lambda1: f64,
    pub lambda2: f64,
    pub g1: f64,
    pub g2: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub q1: f64,
    pub q2: f64,
    pub n1: f64,
    pub n2: f64,
}

/// Validated parameter set of the two-particle, two-cavity model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    rates: Rates,
    gamma1: f64,
    gamma2: f64,
    delta12: f64,
}

impl SystemParams {
    pub fn new(rates: Rates) -> Result<Self> {
        let nonneg = [
            ("lambda1", rates.lambda1),
            ("lambda2", rates.lambda2),
            ("g1", rates.g1),
            ("g2", rates.g2),
            ("kappa1", rates.kappa1),
            ("kappa2", rates.kappa2),
            ("n1", rates.n1),
            ("n2", rates.n2),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        for (name, v) in [("omega1", rates.omega1), ("omega2", rates.omega2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} = {v} must be finite and > 0")));
            }
        }
        for (name, v) in [("q1", rates.q1), ("q2", rates.q2)] {
            if !(v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} = {v} must be > 0")));
            }
        }
        Ok(Self {
            rates,
            gamma1: rates.omega1 / rates.q1,
            gamma2: rates.omega2 / rates.q2,
            delta12: rates.omega1 - rates.omega2,
        })
    }

    pub fn rates(&self) -> Rates {
        self.rates
    }

    pub fn lambda1(&self) -> f64 {
        self.rates.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.rates.lambda2
    }

    pub fn g1(&self) -> f64 {
        self.rates.g1
    }

    pub fn g2(&self) -> f64 {
        self.rates.g2
    }

    pub fn kappa1(&self) -> f64 {
        self.rates.kappa1
    }

    pub fn kappa2(&self) -> f64 {
        self.rates.kappa2
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    pub fn n1(&self) -> f64 {
        self.rates.n1
    }

    pub fn n2(&self) -> f64 {
        self.rates.n2
    }

    pub fn omega1(&self) -> f64 {
        self.rates.omega1
    }

    pub fn omega2(&self) -> f64 {
        self.rates.omega2
    }

    /// `Ω₁ − Ω₂`.
    pub fn delta12(&self) -> f64 {
        self.delta12
    }

    pub fn q1(&self) -> f64 {
        self.rates.q1
    }

    pub fn q2(&self) -> f64 {
        self.rates.q2
    }
}

/// The model variants supported by the builders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelVariant {
    /// Coherent scattering only, one cavity, rotating-wave approximation.
    CsOnlyRwa,
    /// Coherent scattering plus the dispersive cavity, rotating-wave approximation.
    FullRwa,
    /// Full model with the terms oscillating at `2Ω₁` retained.
    Counterrotating,
    /// Dispersive drive resonant with particle 2; `g₁` terms rotate at `δ₁₂`.
    DetunedMode2Resonant,
    /// Dispersive drive resonant with particle 1; `g₂` terms rotate at `δ₁₂`.
    DetunedMode1Resonant,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 5] = [
        ModelVariant::CsOnlyRwa,
        ModelVariant::FullRwa,
        ModelVariant::Counterrotating,
        ModelVariant::DetunedMode2Resonant,
        ModelVariant::DetunedMode1Resonant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::CsOnlyRwa => "cs-only-rwa",
            ModelVariant::FullRwa => "full-rwa",
            ModelVariant::Counterrotating => "counterrotating",
            ModelVariant::DetunedMode2Resonant => "detuned-mode2-resonant",
            ModelVariant::DetunedMode1Resonant => "detuned-mode1-resonant",
        }
    }

    pub fn cavity_count(self) -> usize {
        match self {
            ModelVariant::CsOnlyRwa => 1,
            _ => 2,
        }
    }

    pub fn is_detuned(self) -> bool {
        matches!(
            self,
            ModelVariant::DetunedMode2Resonant | ModelVariant::DetunedMode1Resonant
        )
    }

    pub fn build_drift(self, p: &SystemParams) -> Result<DriftModel> {
        match self {
            ModelVariant::CsOnlyRwa => Ok(build_rwa_cs_drift(p)),
            ModelVariant::FullRwa => Ok(build_rwa_full_drift(p)),
            ModelVariant::Counterrotating => build_counterrotating_drift(p),
            ModelVariant::DetunedMode2Resonant => Ok(build_detuned_drift_mode2_resonant(p)),
            ModelVariant::DetunedMode1Resonant => Ok(build_detuned_drift_mode1_resonant(p)),
        }
    }

    pub fn build_diffusion(self, p: &SystemParams) -> DiffusionMatrix {
        build_diffusion(p, self.cavity_count())
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::UnsupportedVariant(format!("unknown model variant `{s}`")))
    }
}

/// One Fourier component of a periodic drift.
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonic {
    pub order: usize,
    pub cos: DMatrix<f64>,
    pub sin: DMatrix<f64>,
}

/// `A(t) = A⁰ + √2 Σₙ [A_c⁽ⁿ⁾ cos(nωt) + A_s⁽ⁿ⁾ sin(nωt)]` with `ω` the base
/// frequency. The `√2` is part of the convention: stored harmonic matrices
/// are the plain Fourier coefficients divided by `√2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftModel {
    basis: QuadratureBasis,
    constant: DMatrix<f64>,
    harmonics: Vec<Harmonic>,
    base_frequency: f64,
}

impl DriftModel {
    pub fn new(
        basis: QuadratureBasis,
        constant: DMatrix<f64>,
        harmonics: Vec<Harmonic>,
        base_frequency: f64,
    ) -> Result<Self> {
        let d = basis.dim();
        let square = |m: &DMatrix<f64>| m.nrows() == d && m.ncols() == d;
        if !square(&constant) || harmonics.iter().any(|h| !square(&h.cos) || !square(&h.sin)) {
            return Err(Error::DimensionMismatch(format!("drift matrices must all be {d}x{d}")));
        }
        if harmonics.iter().any(|h| h.order == 0) {
            return Err(Error::InvalidParams("harmonic order must be >= 1".into()));
        }
        for (k, h) in harmonics.iter().enumerate() {
            if harmonics[..k].iter().any(|o| o.order == h.order) {
                return Err(Error::InvalidParams(format!("harmonic {} given twice", h.order)));
            }
        }
        if !harmonics.is_empty() && !(base_frequency.is_finite() && base_frequency > 0.0) {
            return Err(Error::InvalidParams(format!(
                "base frequency {base_frequency} must be > 0"
            )));
        }
        let mut harmonics = harmonics;
        harmonics.sort_by_key(|h| h.order);
        Ok(Self {
            basis,
            constant,
            harmonics,
            base_frequency,
        })
    }

    /// Time-independent model over an anonymous basis.
    pub fn constant_model(a: DMatrix<f64>) -> Result<Self> {
        if !a.nrows().is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!("odd dimension {}", a.nrows())));
        }
        Self::new(QuadratureBasis::anonymous(a.nrows() / 2), a, Vec::new(), 0.0)
    }

    pub fn basis(&self) -> &QuadratureBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn constant(&self) -> &DMatrix<f64> {
        &self.constant
    }

    pub fn harmonics(&self) -> &[Harmonic] {
        &self.harmonics
    }

    pub fn base_frequency(&self) -> f64 {
        self.base_frequency
    }

    pub fn is_constant(&self) -> bool {
        self.harmonics.is_empty()
    }

    pub fn max_order(&self) -> usize {
        self.harmonics.iter().map(|h| h.order).max().unwrap_or(0)
    }

    /// Period of the drift, `None` for a constant model.
    pub fn period(&self) -> Option<f64> {
        (!self.is_constant()).then(|| 2.0 * PI / self.base_frequency)
    }

    /// `A(t)` from the stored Fourier components.
    pub fn reconstruct(&self, t: f64) -> DMatrix<f64> {
        let mut a = self.constant.clone();
        for h in &self.harmonics {
            let phase = h.order as f64 * self.base_frequency * t;
            a += &h.cos * (SQRT_2 * phase.cos()) + &h.sin * (SQRT_2 * phase.sin());
        }
        a
    }

    /// The same model with every harmonic removed.
    pub fn without_harmonics(&self) -> Self {
        Self {
            basis: self.basis.clone(),
            constant: self.constant.clone(),
            harmonics: Vec::new(),
            base_frequency: 0.0,
        }
    }

    /// Every matrix and the base frequency multiplied by `c`; equivalent to
    /// measuring time in units of `1/c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            basis: self.basis.clone(),
            constant: &self.constant * c,
            harmonics: self
                .harmonics
                .iter()
                .map(|h| Harmonic {
                    order: h.order,
                    cos: &h.cos * c,
                    sin: &h.sin * c,
                })
                .collect(),
            base_frequency: self.base_frequency * c,
        }
    }

    /// Indices of the mechanical modes `b1`, `b2` in the basis.
    pub fn mechanical_modes(&self) -> Result<[usize; 2]> {
        let find = |name: &str| {
            self.basis
                .mode_index(name)
                .ok_or_else(|| Error::InvalidState(format!("basis has no mode `{name}`")))
        };
        Ok([find("b1")?, find("b2")?])
    }

    /// Frobenius norm of the largest-magnitude `A(t)` bound: `‖A⁰‖ + √2 Σ (‖A_c‖ + ‖A_s‖)`.
    pub fn norm_bound(&self) -> f64 {
        self.constant.norm() + SQRT_2 * self.harmonics.iter().map(|h| h.cos.norm() + h.sin.norm()).sum::<f64>()
    }
}

/// Diagonal, nonnegative input-noise matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionMatrix {
    entries: DMatrix<f64>,
}

impl DiffusionMatrix {
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if let Some(v) = diag.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParams(format!("diffusion entry {v} must be >= 0")));
        }
        Ok(Self {
            entries: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn diagonal(&self) -> DVector<f64> {
        self.entries.diagonal()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: &self.entries * c,
        }
    }
}

/// Effective coupling of the cooled Bogoliubov mode
/// `β₁ = (λ₁b₁ + λ₂b₂†)/λ_eff`, with `λ_eff = √(λ₁² − λ₂²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BogoliubovData {
    pub lambda_eff: f64,
    /// `(λ₁/λ_eff, λ₂/λ_eff)`, so `w₀² − w₁² = 1`.
    pub weights: (f64, f64),
}

pub fn bogoliubov(p: &SystemParams) -> Result<BogoliubovData> {
    let (l1, l2) = (p.lambda1(), p.lambda2());
    if !(l1 > l2) {
        return Err(Error::IllDefinedMode {
            lambda1: l1,
            lambda2: l2,
        });
    }
    let lambda_eff = ((l1 - l2) * (l1 + l2)).sqrt();
    Ok(BogoliubovData {
        lambda_eff,
        weights: (l1 / lambda_eff, l2 / lambda_eff),
    })
}

fn basis_one_cavity() -> QuadratureBasis {
    QuadratureBasis::new(["a1", "b1", "b2"])
}

fn basis_two_cavities() -> QuadratureBasis {
    QuadratureBasis::new(["a1", "a2", "b1", "b2"])
}

fn decay_diagonal(p: &SystemParams, two_cavities: bool) -> Vec<f64> {
    let mut d = vec![-p.kappa1() / 2.0; 2];
    if two_cavities {
        d.extend([-p.kappa2() / 2.0; 2]);
    }
    d.extend([-p.gamma1() / 2.0; 2]);
    d.extend([-p.gamma2() / 2.0; 2]);
    d
}

fn with_entries(diag: Vec<f64>, entries: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut a = DMatrix::from_diagonal(&DVector::from_vec(diag));
    for &(i, j, v) in entries {
        a[(i, j)] = v;
    }
    a
}

/// Coherent-scattering drift in the rotating-wave approximation, basis
/// `(X₁,Y₁,x₁,p₁,x₂,p₂)`.
pub fn build_rwa_cs_drift(p: &SystemParams) -> DriftModel {
    let (l1, l2) = (p.lambda1(), p.lambda2());
    #[rustfmt::skip]
    let a = with_entries(decay_diagonal(p, false), &[
        (0, 3, -l1), (0, 5, l2),
        (1, 2, l1), (1, 4, l2),
        (2, 1, -l1),
        (3, 0, l1),
        (4, 1, l2),
        (5, 0, l2),
    ]);
    DriftModel {
        basis: basis_one_cavity(),
        constant: a,
        harmonics: Vec::new(),
        base_frequency: 0.0,
    }
}

/// Coherent scattering plus dispersive coupling to a second cavity, basis
/// `(X₁,Y₁,X₂,Y₂,x₁,p₁,x₂,p₂)`.
pub fn build_rwa_full_drift(p: &SystemParams) -> DriftModel {
    DriftModel {
        basis: basis_two_cavities(),
        constant: rwa_full_matrix(p, p.g1(), p.g2()),
        harmonics: Vec::new(),
        base_frequency: 0.0,
    }
}

fn rwa_full_matrix(p: &SystemParams, g1: f64, g2: f64) -> DMatrix<f64> {
    let (l1, l2) = (p.lambda1(), p.lambda2());
    #[rustfmt::skip]
    let a = with_entries(decay_diagonal(p, true), &[
        (0, 5, -l1), (0, 7, l2),
        (1, 4, l1), (1, 6, l2),
        (2, 5, g1), (2, 7, g2),
        (3, 4, -g1), (3, 6, -g2),
        (4, 1, -l1), (4, 3, g1),
        (5, 0, l1), (5, 2, -g1),
        (6, 1, l2), (6, 3, g2),
        (7, 0, l2), (7, 2, -g2),
    ]);
    a
}

/// Time dependence of one entry of the counterrotating drift.
#[derive(Clone, Copy)]
enum Wave {
    /// `s(t) = sin(2Ω₁t)`
    S,
    /// `c₊(t) = 1 + cos(2Ω₁t)`
    CPlus,
    /// `c₋(t) = 1 − cos(2Ω₁t)`
    CMinus,
}

/// Drift with the counterrotating terms kept. The entries oscillate through
/// `s(t)` and `c±(t)`, so `A⁰` is the rotating-wave matrix and there is a
/// single harmonic at `2Ω₁`.
pub fn build_counterrotating_drift(p: &SystemParams) -> Result<DriftModel> {
    if p.omega1() != p.omega2() {
        return Err(Error::UnsupportedVariant(format!(
            "counterrotating model needs equal mechanical frequencies (detuning {} rad/s); use a detuned variant",
            p.delta12()
        )));
    }
    let (l1, l2, g1, g2) = (p.lambda1(), p.lambda2(), p.g1(), p.g2());
    use Wave::*;
    #[rustfmt::skip]
    let table = [
        (0, 4, -l1, S), (0, 5, -l1, CMinus), (0, 6, l2, S), (0, 7, l2, CMinus),
        (1, 4, l1, CPlus), (1, 5, l1, S), (1, 6, l2, CPlus), (1, 7, l2, S),
        (2, 4, g1, S), (2, 5, g1, CMinus), (2, 6, g2, S), (2, 7, g2, CMinus),
        (3, 4, -g1, CPlus), (3, 5, -g1, S), (3, 6, -g2, CPlus), (3, 7, -g2, S),
        (4, 0, -l1, S), (4, 1, -l1, CMinus), (4, 2, g1, S), (4, 3, g1, CMinus),
        (5, 0, l1, CPlus), (5, 1, l1, S), (5, 2, -g1, CPlus), (5, 3, -g1, S),
        (6, 0, -l2, S), (6, 1, l2, CMinus), (6, 2, g2, S), (6, 3, g2, CMinus),
        (7, 0, l2, CPlus), (7, 1, -l2, S), (7, 2, -g2, CPlus), (7, 3, -g2, S),
    ];
    let mut a0 = DMatrix::from_diagonal(&DVector::from_vec(decay_diagonal(p, true)));
    let mut ac = DMatrix::zeros(8, 8);
    let mut as_ = DMatrix::zeros(8, 8);
    for (i, j, v, w) in table {
        match w {
            S => as_[(i, j)] = v / SQRT_2,
            CPlus => {
                a0[(i, j)] = v;
                ac[(i, j)] = v / SQRT_2;
            }
            CMinus => {
                a0[(i, j)] = v;
                ac[(i, j)] = -v / SQRT_2;
            }
        }
    }
    Ok(DriftModel {
        basis: basis_two_cavities(),
        constant: a0,
        harmonics: vec![Harmonic {
            order: 1,
            cos: ac,
            sin: as_,
        }],
        base_frequency: 2.0 * p.omega1(),
    })
}

/// Detuned model with the dispersive drive on the red sideband of particle 2:
/// every `g₁` entry rotates at `δ₁₂`.
pub fn build_detuned_drift_mode2_resonant(p: &SystemParams) -> DriftModel {
    let g = p.g1();
    #[rustfmt::skip]
    let sin = [(2, 4, -g), (3, 5, -g), (4, 2, g), (5, 3, g)];
    #[rustfmt::skip]
    let cos = [(2, 5, g), (3, 4, -g), (4, 3, g), (5, 2, -g)];
    detuned(p, rwa_full_matrix(p, 0.0, p.g2()), g, &cos, &sin)
}

/// Detuned model with the dispersive drive on the red sideband of particle 1:
/// every `g₂` entry rotates at `δ₁₂`.
pub fn build_detuned_drift_mode1_resonant(p: &SystemParams) -> DriftModel {
    let g = p.g2();
    #[rustfmt::skip]
    let sin = [(2, 6, g), (3, 7, g), (6, 2, -g), (7, 3, -g)];
    #[rustfmt::skip]
    let cos = [(2, 7, g), (3, 6, -g), (6, 3, g), (7, 2, -g)];
    detuned(p, rwa_full_matrix(p, p.g1(), 0.0), g, &cos, &sin)
}

/// Shared tail of the detuned builders. Negative detuning keeps the base
/// frequency positive and flips the sine matrix instead.
fn detuned(
    p: &SystemParams,
    mut a0: DMatrix<f64>,
    g: f64,
    cos: &[(usize, usize, f64)],
    sin: &[(usize, usize, f64)],
) -> DriftModel {
    let delta = p.delta12();
    let basis = basis_two_cavities();
    if delta == 0.0 || g == 0.0 {
        // cos(0) = 1, sin(0) = 0
        for &(i, j, v) in cos {
            a0[(i, j)] = v;
        }
        return DriftModel {
            basis,
            constant: a0,
            harmonics: Vec::new(),
            base_frequency: 0.0,
        };
    }
    let sign = delta.signum();
    let mut ac = DMatrix::zeros(8, 8);
    let mut as_ = DMatrix::zeros(8, 8);
    for &(i, j, v) in cos {
        ac[(i, j)] = v / SQRT_2;
    }
    for &(i, j, v) in sin {
        as_[(i, j)] = sign * v / SQRT_2;
    }
    DriftModel {
        basis,
        constant: a0,
        harmonics: vec![Harmonic {
            order: 1,
            cos: ac,
            sin: as_,
        }],
        base_frequency: delta.abs(),
    }
}

/// `diag[κ₁, κ₁, (κ₂, κ₂,) γ₁(2n₁+1), γ₁(2n₁+1), γ₂(2n₂+1), γ₂(2n₂+1)]`.
pub fn build_diffusion(p: &SystemParams, cavity_count: usize) -> DiffusionMatrix {
    let mut d = vec![p.kappa1(); 2];
    if cavity_count >= 2 {
        d.extend([p.kappa2(); 2]);
    }
    d.extend([p.gamma1() * (2.0 * p.n1() + 1.0); 2]);
    d.extend([p.gamma2() * (2.0 * p.n2() + 1.0); 2]);
    DiffusionMatrix {
        entries: DMatrix::from_diagonal(&DVector::from_vec(d)),
    }
}

/// Outcome of a stability check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub stable: bool,
    /// Largest real part of the drift eigenvalues (constant models) or of the
    /// Floquet exponents (periodic models), in rad/s.
    pub abscissa: f64,
}

/// Relative margin below zero required of the spectral abscissa.
pub const HURWITZ_TOL: f64 = 1e-12;

pub(crate) fn hurwitz_threshold(a_norm: f64) -> f64 {
    -HURWITZ_TOL * a_norm.max(f64::MIN_POSITIVE)
}

/// Hurwitz test of the drift. Periodic models are judged by their Floquet
/// exponents, computed from the one-period monodromy matrix.
pub fn stability_check(m: &DriftModel) -> Stability {
    let abscissa = if m.is_constant() {
        spectral_abscissa(m.constant())
    } else {
        crate::floquet::floquet_exponents(m)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    };
    Stability {
        stable: abscissa < hurwitz_threshold(m.constant().norm()),
        abscissa,
    }
}

pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}
