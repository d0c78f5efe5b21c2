//! Entanglement and state diagnostics of the two mechanical modes.
//!
//! Inputs are two-mode covariance matrices in the order `(x₁,p₁,x₂,p₂)`,
//! vacuum-normalized. Ordinary variances are `V/2`; that factor appears in
//! each formula below and nowhere else.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::CovarianceMatrix;

/// Below this total mean phonon number the noise-reduction factor is 0/0.
pub const NRF_DENOMINATOR_MIN: f64 = 1e-12;

/// Diagnostics of one parameter point. Measure fields are `None` when the
/// model has no steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntanglementReport {
    pub stable: bool,
    /// `max(0, −ln ν̃₋)`, natural log.
    pub log_negativity: Option<f64>,
    /// Smallest symplectic eigenvalue of the partial transpose.
    pub nu_min: Option<f64>,
    pub epr_variance: Option<f64>,
    /// `None` both for unstable points and for the 0/0 case.
    pub nrf: Option<f64>,
    pub purity: Option<f64>,
    pub mean_phonons: Option<(f64, f64)>,
}

impl EntanglementReport {
    pub fn unstable() -> Self {
        Self {
            stable: false,
            log_negativity: None,
            nu_min: None,
            epr_variance: None,
            nrf: None,
            purity: None,
            mean_phonons: None,
        }
    }
}

fn two_mode(v: &CovarianceMatrix) -> Result<()> {
    if v.mode_count() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "expected a two-mode covariance matrix, got {} modes",
            v.mode_count()
        )));
    }
    v.ensure_physical()
}

/// Smallest symplectic eigenvalue of the state partially transposed on mode 2.
pub fn partial_transpose_nu_min(v: &CovarianceMatrix) -> Result<f64> {
    two_mode(v)?;
    let nus = v.partial_transpose(1)?.symplectic_eigenvalues()?;
    Ok(nus[0])
}

/// `E_N = max(0, −ln ν̃₋)`.
pub fn log_negativity(v: &CovarianceMatrix) -> Result<f64> {
    Ok(log_negativity_from_nu(partial_transpose_nu_min(v)?))
}

fn log_negativity_from_nu(nu: f64) -> f64 {
    (-nu.ln()).max(0.0)
}

/// `Δ_EPR = ½[Var(x₁+x₂) + Var(p₁−p₂)]` with `Var = V/2`:
/// `¼[V₁₁ + V₃₃ + 2V₁₃ + V₂₂ + V₄₄ − 2V₂₄]` (1-based indices).
pub fn epr_variance(v: &CovarianceMatrix) -> Result<f64> {
    two_mode(v)?;
    let m = v.matrix();
    Ok(0.25 * (m[(0, 0)] + m[(2, 2)] + 2.0 * m[(0, 2)] + m[(1, 1)] + m[(3, 3)] - 2.0 * m[(1, 3)]))
}

/// `⟨n₁⟩ = (V₁₁ + V₂₂ − 2)/4`, `⟨n₂⟩ = (V₃₃ + V₄₄ − 2)/4`.
pub fn mean_phonons(v: &CovarianceMatrix) -> Result<(f64, f64)> {
    if v.mode_count() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "expected a two-mode covariance matrix, got {} modes",
            v.mode_count()
        )));
    }
    let m = v.matrix();
    Ok(((m[(0, 0)] + m[(1, 1)] - 2.0) / 4.0, (m[(2, 2)] + m[(3, 3)] - 2.0) / 4.0))
}

/// Variance of `n₁ − n₂` from the Gaussian fourth-moment identity:
/// `⅛(V₁₁² + V₂₂² + V₃₃² + V₄₄²) + ¼(V₁₂² + V₃₄² − V₁₃² − V₁₄² − V₂₃² − V₂₄²) − ½`.
pub fn phonon_difference_variance(v: &CovarianceMatrix) -> Result<f64> {
    two_mode(v)?;
    let m = v.matrix();
    let sq = |i: usize, j: usize| m[(i, j)] * m[(i, j)];
    Ok(0.125 * (sq(0, 0) + sq(1, 1) + sq(2, 2) + sq(3, 3))
        + 0.25 * (sq(0, 1) + sq(2, 3) - sq(0, 2) - sq(0, 3) - sq(1, 2) - sq(1, 3))
        - 0.5)
}

/// Noise-reduction factor `Var(n₁ − n₂)/(⟨n₁⟩ + ⟨n₂⟩)`; `None` when the
/// denominator is below [`NRF_DENOMINATOR_MIN`].
pub fn nrf(v: &CovarianceMatrix) -> Result<Option<f64>> {
    let num = phonon_difference_variance(v)?;
    let (n1, n2) = mean_phonons(v)?;
    let den = n1 + n2;
    Ok((den >= NRF_DENOMINATOR_MIN).then(|| num / den))
}

/// Marginalizes `joint` onto `mech_modes` and evaluates every measure.
pub fn full_report(joint: &CovarianceMatrix, mech_modes: [usize; 2], stable: bool) -> Result<EntanglementReport> {
    if !stable {
        return Ok(EntanglementReport::unstable());
    }
    let v = joint.marginal(&mech_modes)?;
    let nu = partial_transpose_nu_min(&v)?;
    Ok(EntanglementReport {
        stable: true,
        log_negativity: Some(log_negativity_from_nu(nu)),
        nu_min: Some(nu),
        epr_variance: Some(epr_variance(&v)?),
        nrf: nrf(&v)?,
        purity: Some(v.purity()?),
        mean_phonons: Some(mean_phonons(&v)?),
    })
}
