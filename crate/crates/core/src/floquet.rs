//! Steady states of periodic drifts through the Floquet-space embedding.
//!
//! The periodic covariance is expanded in the orthonormal functions
//! `φ₀ = 1`, `φ_{c,k} = √2 cos kθ`, `φ_{s,k} = √2 sin kθ` (`θ = ωt`, ω the
//! base frequency), truncated at `k ≤ K`. Block 0 holds the DC part, blocks
//! `2k−1` and `2k` the cosine and sine parts of harmonic `k`. Since
//! `√2 cos nθ = φ_{c,n}`, the stored harmonic matrices couple block `m` to
//! block `m'` with weight `⟨φ_m φ_{c,n} φ_{m'}⟩` (resp. `φ_{s,n}`), which gives
//! full weight between the DC and first-harmonic blocks and `1/√2` between
//! harmonic blocks. Time derivatives of the basis add the rotation blocks
//! `∓k·ω·I`.
//!
//! The truncated embedding can carry spurious unstable eigenvalues at its
//! outermost blocks even when the periodic system is stable. Stability is
//! therefore decided from the Floquet exponents of the one-period monodromy
//! matrix, and the embedded Lyapunov equation is solved without a Hurwitz
//! test.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::gaussian::CovarianceMatrix;
use crate::lyapunov::{residual, solve_lyapunov_unchecked};
use crate::system::{stability_check, DiffusionMatrix, DriftModel};

/// Successive-truncation relative difference accepted as converged.
pub const CONVERGENCE_TOL: f64 = 1e-6;

/// Truncation used when none is requested.
pub const DEFAULT_TRUNCATION: usize = 10;

/// Largest truncation tried by [`auto_truncation`].
pub const MAX_AUTO_TRUNCATION: usize = 16;

/// Time-independent embedding of a periodic drift.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetSystem {
    pub base_dim: usize,
    pub truncation: usize,
    pub a_f: DMatrix<f64>,
    pub n_f: DMatrix<f64>,
    pub base_frequency: f64,
}

impl FloquetSystem {
    pub fn dim(&self) -> usize {
        self.a_f.nrows()
    }
}

/// The function `φ_m` as a sum of `coefficient · e^{i·frequency·θ}`.
fn exponential_terms(block: usize) -> Vec<(i64, Complex<f64>)> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    if block == 0 {
        return vec![(0, Complex::new(1.0, 0.0))];
    }
    let k = block.div_ceil(2) as i64;
    if block % 2 == 1 {
        vec![(k, Complex::new(h, 0.0)), (-k, Complex::new(h, 0.0))]
    } else {
        // √2 sin kθ = (e^{ikθ} − e^{−ikθ}) / (√2 i)
        vec![(k, Complex::new(0.0, -h)), (-k, Complex::new(0.0, h))]
    }
}

/// `⟨φ_a φ_b φ_c⟩` averaged over one period.
fn triple_product(a: usize, b: usize, c: usize) -> f64 {
    let (ta, tb, tc) = (exponential_terms(a), exponential_terms(b), exponential_terms(c));
    let mut sum = Complex::new(0.0, 0.0);
    for &(fa, ca) in &ta {
        for &(fb, cb) in &tb {
            for &(fc, cc) in &tc {
                if fa + fb + fc == 0 {
                    sum += ca * cb * cc;
                }
            }
        }
    }
    sum.re
}

/// Builds `A_F` and `N_F` for truncation `K`.
pub fn assemble_floquet_drift(m: &DriftModel, truncation: usize, n: &DiffusionMatrix) -> Result<FloquetSystem> {
    if truncation < 1 {
        return Err(Error::InvalidParams("Floquet truncation must be >= 1".into()));
    }
    if m.is_constant() {
        return Err(Error::Degenerate(
            "drift has no harmonics; solve the constant Lyapunov equation instead".into(),
        ));
    }
    let d = m.dim();
    if n.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "drift is {d}x{d}, diffusion is {}x{}",
            n.dim(),
            n.dim()
        )));
    }
    let blocks = 2 * truncation + 1;
    let size = d * blocks;
    let omega = m.base_frequency();
    let mut a_f = DMatrix::<f64>::zeros(size, size);
    let mut n_f = DMatrix::<f64>::zeros(size, size);
    for r in 0..blocks {
        a_f.view_mut((r * d, r * d), (d, d)).copy_from(m.constant());
        n_f.view_mut((r * d, r * d), (d, d)).copy_from(n.matrix());
        for c in 0..blocks {
            let mut block = DMatrix::<f64>::zeros(d, d);
            let mut touched = false;
            for h in m.harmonics() {
                let (bc, bs) = (2 * h.order - 1, 2 * h.order);
                let wc = triple_product(r, bc, c);
                let ws = triple_product(r, bs, c);
                if wc.abs() > 1e-15 {
                    block += &h.cos * wc;
                    touched = true;
                }
                if ws.abs() > 1e-15 {
                    block += &h.sin * ws;
                    touched = true;
                }
            }
            if touched {
                let mut target = a_f.view_mut((r * d, c * d), (d, d));
                target += block;
            }
        }
    }
    for k in 1..=truncation {
        let (bc, bs) = (2 * k - 1, 2 * k);
        let w = k as f64 * omega;
        for i in 0..d {
            a_f[(bc * d + i, bs * d + i)] -= w;
            a_f[(bs * d + i, bc * d + i)] += w;
        }
    }
    Ok(FloquetSystem {
        base_dim: d,
        truncation,
        a_f,
        n_f,
        base_frequency: omega,
    })
}

/// Full solution of the embedded equation.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetSolution {
    pub system: FloquetSystem,
    pub v_f: DMatrix<f64>,
    /// Relative residual of the embedded Lyapunov equation.
    pub residual: f64,
}

impl FloquetSolution {
    /// Block `(i, j)` of `V_F`.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let d = self.system.base_dim;
        self.v_f.view((i * d, j * d), (d, d)).into_owned()
    }

    /// The DC block, i.e. the period-averaged covariance.
    pub fn dc_block(&self) -> DMatrix<f64> {
        let dc = self.block(0, 0);
        (&dc + dc.transpose()) * 0.5
    }
}

/// Solves the embedded Lyapunov equation at truncation `K`. The caller is
/// responsible for stability; see [`solve_floquet_steady_state`].
pub fn solve_floquet(m: &DriftModel, n: &DiffusionMatrix, truncation: usize) -> Result<FloquetSolution> {
    let system = assemble_floquet_drift(m, truncation, n)?;
    let v_f = solve_lyapunov_unchecked(&system.a_f, &system.n_f)?;
    let residual = residual(&system.a_f, &v_f, &system.n_f)?.relative;
    Ok(FloquetSolution { system, v_f, residual })
}

/// Period-averaged steady-state covariance of a periodic model at truncation `K`.
pub fn solve_floquet_steady_state(m: &DriftModel, n: &DiffusionMatrix, truncation: usize) -> Result<CovarianceMatrix> {
    let stability = stability_check(m);
    if !stability.stable {
        return Err(Error::NoSteadyState {
            abscissa: stability.abscissa,
        });
    }
    let sol = solve_floquet(m, n, truncation)?;
    CovarianceMatrix::new(m.basis().clone(), sol.dc_block())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub truncation: usize,
    pub v: DMatrix<f64>,
    /// `‖V(K_{i+1}) − V(K_i)‖_F / ‖V(K_i)‖_F`; absent on the last row.
    pub difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ScanRow>,
    /// Smallest scanned `K` whose successive difference is below
    /// [`CONVERGENCE_TOL`].
    pub production: Option<usize>,
    /// Some difference after the production `K` rose back above the tolerance.
    pub non_monotone: bool,
}

impl ConvergenceReport {
    pub fn production_row(&self) -> Option<&ScanRow> {
        let k = self.production?;
        self.rows.iter().find(|r| r.truncation == k)
    }
}

/// DC blocks at every truncation in `k_list` and their successive differences.
pub fn convergence_scan(m: &DriftModel, n: &DiffusionMatrix, k_list: &[usize]) -> Result<ConvergenceReport> {
    if k_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("truncation list must be increasing".into()));
    }
    let mut rows: Vec<ScanRow> = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let v = solve_floquet(m, n, k)?.dc_block();
        if let Some(prev) = rows.last_mut() {
            prev.difference = Some(relative_difference(&prev.v, &v));
        }
        rows.push(ScanRow {
            truncation: k,
            v,
            difference: None,
        });
    }
    Ok(summarize(rows))
}

fn summarize(rows: Vec<ScanRow>) -> ConvergenceReport {
    let first = rows
        .iter()
        .position(|r| r.difference.is_some_and(|d| d < CONVERGENCE_TOL));
    let production = first.map(|i| rows[i].truncation);
    let non_monotone = first.is_some_and(|i| {
        rows[i + 1..]
            .iter()
            .any(|r| r.difference.is_some_and(|d| d >= CONVERGENCE_TOL))
    });
    ConvergenceReport {
        rows,
        production,
        non_monotone,
    }
}

fn relative_difference(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.norm();
    if scale == 0.0 {
        if b.norm() == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (b - a).norm() / scale
    }
}

/// Result of an automatic truncation search.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoTruncation {
    pub truncation: usize,
    pub v: DMatrix<f64>,
    pub converged: bool,
    pub residual: f64,
}

/// Raises `K` from 1 until the successive DC-block difference drops below
/// [`CONVERGENCE_TOL`], stopping at `k_max`.
pub fn auto_truncation(m: &DriftModel, n: &DiffusionMatrix, k_max: usize) -> Result<AutoTruncation> {
    let mut prev = solve_floquet(m, n, 1)?;
    for k in 2..=k_max.max(2) {
        let next = solve_floquet(m, n, k)?;
        let diff = relative_difference(&prev.dc_block(), &next.dc_block());
        if diff < CONVERGENCE_TOL {
            return Ok(AutoTruncation {
                truncation: k - 1,
                v: prev.dc_block(),
                converged: true,
                residual: prev.residual,
            });
        }
        prev = next;
    }
    log::warn!("Floquet truncation not converged at K = {}", prev.system.truncation);
    Ok(AutoTruncation {
        truncation: prev.system.truncation,
        v: prev.dc_block(),
        converged: false,
        residual: prev.residual,
    })
}

/// One-period fundamental matrix `Φ(T)` of `ẋ = A(t)x`, fourth-order
/// Runge–Kutta with at least 200 steps and `h‖A‖ ≤ 0.1`.
pub fn monodromy(m: &DriftModel) -> Option<DMatrix<f64>> {
    let period = m.period()?;
    let steps = ((10.0 * m.norm_bound() * period).ceil() as usize).max(200);
    let h = period / steps as f64;
    let d = m.dim();
    let mut phi = DMatrix::<f64>::identity(d, d);
    for s in 0..steps {
        let t = s as f64 * h;
        let a0 = m.reconstruct(t);
        let am = m.reconstruct(t + 0.5 * h);
        let a1 = m.reconstruct(t + h);
        let k1 = &a0 * &phi;
        let k2 = &am * (&phi + &k1 * (0.5 * h));
        let k3 = &am * (&phi + &k2 * (0.5 * h));
        let k4 = &a1 * (&phi + &k3 * h);
        phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Some(phi)
}

/// Real parts of the Floquet exponents, `ln|μ|/T` for each monodromy
/// eigenvalue `μ`. A constant model returns the real parts of its eigenvalues.
pub fn floquet_exponents(m: &DriftModel) -> Vec<f64> {
    match (monodromy(m), m.period()) {
        (Some(phi), Some(period)) => phi
            .complex_eigenvalues()
            .iter()
            .map(|mu| mu.norm().ln() / period)
            .collect(),
        _ => m.constant().complex_eigenvalues().iter().map(|z| z.re).collect(),
    }
}
