//! Independent checks of the solvers: direct integration of the Lyapunov ODE
//! `dV/dt = A(t)V + VA(t)ᵀ + N` and stochastic trajectories of the Langevin
//! equations.
//!
//! Random numbers come from ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded with
//! the user seed; trajectory `i` uses stream `i`. Results are reduced in
//! trajectory order, so they do not depend on the number of worker threads.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::CovarianceMatrix;
use crate::system::{DiffusionMatrix, DriftModel};

/// Largest admissible `dt` as a fraction of the fastest period in the model.
pub const STEP_FRACTION: f64 = 0.01;

/// Divergence factor relative to the natural scale of the problem.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

fn max_step(m: &DriftModel) -> f64 {
    let fastest = (m.base_frequency() * m.max_order() as f64).max(m.norm_bound());
    if fastest > 0.0 {
        STEP_FRACTION * 2.0 * std::f64::consts::PI / fastest
    } else {
        f64::INFINITY
    }
}

fn check_inputs(m: &DriftModel, n: &DiffusionMatrix, t_end: f64, dt: f64) -> Result<()> {
    if n.dim() != m.dim() {
        return Err(Error::DimensionMismatch(format!(
            "drift is {0}x{0}, diffusion is {1}x{1}",
            m.dim(),
            n.dim()
        )));
    }
    if !(t_end > 0.0 && dt > 0.0 && t_end.is_finite()) {
        return Err(Error::Integration(format!(
            "t_end = {t_end}, dt = {dt} must be positive"
        )));
    }
    let limit = max_step(m);
    if dt > limit {
        return Err(Error::Integration(format!(
            "dt = {dt:e} does not resolve the fastest scale (limit {limit:e})"
        )));
    }
    Ok(())
}

/// Solution of the Lyapunov ODE. For periodic models `samples` covers the
/// final period on a uniform grid (left end points) and `dc` is its average;
/// for constant models `samples` holds only the final state.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub samples: Vec<(f64, DMatrix<f64>)>,
    pub dc: DMatrix<f64>,
    pub final_state: DMatrix<f64>,
    pub steps: usize,
}

/// Fixed-step fourth-order Runge–Kutta integration of the Lyapunov ODE.
///
/// `dt` is an upper bound: periodic models take `⌈T/dt⌉` steps per period and
/// integrate a whole number `⌈t_end/T⌉` of periods.
pub fn integrate_lyapunov_ode(
    m: &DriftModel,
    n: &DiffusionMatrix,
    v0: &CovarianceMatrix,
    t_end: f64,
    dt: f64,
) -> Result<OdeSolution> {
    check_inputs(m, n, t_end, dt)?;
    if v0.dim() != m.dim() {
        return Err(Error::DimensionMismatch("initial covariance dimension".into()));
    }
    let nm = n.matrix();
    let rhs = |t: f64, v: &DMatrix<f64>| {
        let a = m.reconstruct(t);
        let av = &a * v;
        &av + av.transpose() + nm
    };
    let step = |t: f64, h: f64, v: &DMatrix<f64>| {
        let k1 = rhs(t, v);
        let k2 = rhs(t + h / 2.0, &(v + &k1 * (h / 2.0)));
        let k3 = rhs(t + h / 2.0, &(v + &k2 * (h / 2.0)));
        let k4 = rhs(t + h, &(v + &k3 * h));
        v + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    };
    let min_decay = m
        .constant()
        .diagonal()
        .iter()
        .map(|x| x.abs())
        .filter(|x| *x > 0.0)
        .fold(f64::INFINITY, f64::min);
    let natural = if min_decay.is_finite() {
        nm.norm() / min_decay
    } else {
        0.0
    };
    let limit = DIVERGENCE_FACTOR * v0.matrix().norm().max(natural).max(1.0);
    let diverged = |v: &DMatrix<f64>, t: f64| -> Result<()> {
        let norm = v.norm();
        if !norm.is_finite() || norm > limit {
            return Err(Error::Integration(format!(
                "covariance diverging (norm {norm:e} at t = {t:e}); model is unstable"
            )));
        }
        Ok(())
    };

    let mut v = v0.matrix().clone();
    let (steps_per_block, blocks, h) = match m.period() {
        Some(period) => {
            let per = (period / dt).ceil() as usize;
            let periods = ((t_end / period).ceil() as usize).max(1);
            (per, periods, period / per as f64)
        }
        None => {
            let total = (t_end / dt).ceil() as usize;
            (total, 1, t_end / total as f64)
        }
    };
    let periodic = m.period().is_some();
    let mut samples = Vec::new();
    let mut t = 0.0;
    for b in 0..blocks {
        let last = b + 1 == blocks;
        let t_block = b as f64 * steps_per_block as f64 * h;
        for s in 0..steps_per_block {
            t = t_block + s as f64 * h;
            if last && periodic {
                samples.push((t, v.clone()));
            }
            v = step(t, h, &v);
        }
        t = t_block + steps_per_block as f64 * h;
        diverged(&v, t)?;
    }
    let dc = if periodic {
        let mut acc = DMatrix::zeros(v.nrows(), v.ncols());
        for (_, s) in &samples {
            acc += s;
        }
        acc / samples.len() as f64
    } else {
        samples.push((t, v.clone()));
        v.clone()
    };
    Ok(OdeSolution {
        samples,
        dc: (&dc + dc.transpose()) * 0.5,
        final_state: v,
        steps: steps_per_block * blocks,
    })
}

/// Covariance at `t = 0` on the periodic steady-state orbit of a periodic
/// model, for use as the initial condition of [`integrate_lyapunov_ode`].
///
/// Integrates the fundamental matrix `Φ` and the zero-start covariance `Q`
/// over one period with the same step grid, then solves the discrete
/// Lyapunov equation `V = ΦVΦᵀ + Q` in Kronecker form. Starting there avoids
/// integrating over the mechanical relaxation time, which at high Q spans
/// millions of periods.
pub fn periodic_initial_state(m: &DriftModel, n: &DiffusionMatrix, dt: f64) -> Result<CovarianceMatrix> {
    let period = m
        .period()
        .ok_or_else(|| Error::InvalidParams("model is not periodic".into()))?;
    check_inputs(m, n, period, dt)?;
    let d = m.dim();
    let per = (period / dt).ceil() as usize;
    let h = period / per as f64;
    let nm = n.matrix();
    let mut phi = DMatrix::<f64>::identity(d, d);
    let mut q = DMatrix::<f64>::zeros(d, d);
    for s in 0..per {
        let t = s as f64 * h;
        let (a0, am, a1) = (m.reconstruct(t), m.reconstruct(t + 0.5 * h), m.reconstruct(t + h));
        let lyap = |a: &DMatrix<f64>, v: &DMatrix<f64>| {
            let av = a * v;
            &av + av.transpose() + nm
        };
        let k1 = &a0 * &phi;
        let k2 = &am * (&phi + &k1 * (0.5 * h));
        let k3 = &am * (&phi + &k2 * (0.5 * h));
        let k4 = &a1 * (&phi + &k3 * h);
        let l1 = lyap(&a0, &q);
        let l2 = lyap(&am, &(&q + &l1 * (0.5 * h)));
        let l3 = lyap(&am, &(&q + &l2 * (0.5 * h)));
        let l4 = lyap(&a1, &(&q + &l3 * h));
        phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        q += (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (h / 6.0);
    }
    let system = DMatrix::<f64>::identity(d * d, d * d) - phi.kronecker(&phi);
    let rhs = DVector::from_column_slice(q.as_slice());
    let x = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("monodromy has a unit-modulus multiplier".into()))?;
    let v = DMatrix::from_column_slice(d, d, x.as_slice());
    CovarianceMatrix::new(m.basis().clone(), (&v + v.transpose()) * 0.5)
}

/// Sample covariance with per-entry standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub v: DMatrix<f64>,
    pub stderr: DMatrix<f64>,
    pub trajectories: usize,
}

/// Euler–Maruyama integration of `dr = A(t) r dt + dW` from `r(0) = 0`.
///
/// The noise increments have covariance `(N/2) dt`: with the covariance
/// convention `V = 2⟨rrᵀ⟩`, this is the noise whose stationary `V` solves
/// `AV + VAᵀ + N = 0`. Returns `V = 2⟨r rᵀ⟩` at `t_end` (the mean vanishes by
/// symmetry and is not subtracted).
pub fn monte_carlo_covariance(
    m: &DriftModel,
    n: &DiffusionMatrix,
    n_traj: usize,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<McEstimate> {
    check_inputs(m, n, t_end, dt)?;
    if n_traj < 2 {
        return Err(Error::InvalidParams("need at least two trajectories".into()));
    }
    let d = m.dim();
    let steps = (t_end / dt).ceil() as usize;
    let h = t_end / steps as f64;
    let sigma: Vec<f64> = n.diagonal().iter().map(|x| (0.5 * x * h).sqrt()).collect();
    let constant = m.is_constant();
    let a0: Vec<f64> = m.constant().transpose().as_slice().to_vec();

    let finals: Vec<Vec<f64>> = (0..n_traj)
        .into_par_iter()
        .map(|traj| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(traj as u64);
            let mut r = vec![0.0; d];
            let mut dr = vec![0.0; d];
            let mut a_t = a0.clone();
            for s in 0..steps {
                if !constant {
                    let at = m.reconstruct(s as f64 * h);
                    a_t.copy_from_slice(at.transpose().as_slice());
                }
                for i in 0..d {
                    let row = &a_t[i * d..(i + 1) * d];
                    let drift: f64 = row.iter().zip(&r).map(|(a, x)| a * x).sum();
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    dr[i] = drift * h + sigma[i] * xi;
                }
                for (x, dx) in r.iter_mut().zip(&dr) {
                    *x += dx;
                }
            }
            r
        })
        .collect();

    let mut sum = DMatrix::<f64>::zeros(d, d);
    let mut sum_sq = DMatrix::<f64>::zeros(d, d);
    for r in &finals {
        for i in 0..d {
            for j in 0..d {
                let p = r[i] * r[j];
                sum[(i, j)] += p;
                sum_sq[(i, j)] += p * p;
            }
        }
    }
    let count = n_traj as f64;
    let mean = &sum / count;
    let var = (sum_sq / count - mean.component_mul(&mean)) * (count / (count - 1.0));
    let stderr = var.map(|x| 2.0 * (x.max(0.0) / count).sqrt());
    Ok(McEstimate {
        v: mean * 2.0,
        stderr,
        trajectories: n_traj,
    })
}

/// Draws `count` samples of the classical variables with covariance `V/2`,
/// one per row.
pub fn sample_gaussian(v: &CovarianceMatrix, count: usize, seed: u64) -> Result<DMatrix<f64>> {
    let half = v.matrix() * 0.5;
    let chol = half
        .cholesky()
        .ok_or_else(|| Error::InvalidState("covariance is not positive definite".into()))?;
    let l = chol.l();
    let d = v.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::<f64>::zeros(count, d);
    let mut z = DVector::<f64>::zeros(d);
    for k in 0..count {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let x = &l * &z;
        out.row_mut(k).copy_from(&x.transpose());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    /// Sample estimate of `⟨{r_i,{r_j,{r_k,r_l}}}⟩ = 8⟨r_i r_j r_k r_l⟩`.
    pub mean: f64,
    pub stderr: f64,
    /// Closed form `2(V_ij V_kl + V_ik V_jl + V_il V_jk)`.
    pub expected: f64,
}

impl MomentEstimate {
    /// Deviation from the closed form in units of the standard error.
    pub fn z_score(&self) -> f64 {
        (self.mean - self.expected).abs() / self.stderr
    }
}

/// Symmetrized fourth moment from Gaussian samples, compared with the closed form.
pub fn sample_fourth_moments(
    v: &CovarianceMatrix,
    indices: [usize; 4],
    n_samples: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    let [i, j, k, l] = indices;
    let expected = v.gaussian_fourth_moment(i, j, k, l)?;
    if n_samples < 2 {
        return Err(Error::InvalidParams("need at least two samples".into()));
    }
    let x = sample_gaussian(v, n_samples, seed)?;
    let vals: Vec<f64> = x.row_iter().map(|r| 8.0 * r[i] * r[j] * r[k] * r[l]).collect();
    let count = n_samples as f64;
    let mean = vals.iter().sum::<f64>() / count;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    Ok(MomentEstimate {
        mean,
        stderr: (var / count).sqrt(),
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::QuadratureBasis;
    use crate::lyapunov::solve_steady_state;

    fn thermal_model(gamma: f64, n: f64) -> (DriftModel, DiffusionMatrix) {
        let a = DMatrix::identity(2, 2) * (-gamma / 2.0);
        let d = DiffusionMatrix::from_diagonal(&[gamma * (2.0 * n + 1.0); 2]).unwrap();
        (DriftModel::constant_model(a).unwrap(), d)
    }

    #[test]
    fn ode_thermal_convergence() {
        let (m, n) = thermal_model(1.0, 3.0);
        let v0 = CovarianceMatrix::vacuum(QuadratureBasis::anonymous(1));
        let sol = integrate_lyapunov_ode(&m, &n, &v0, 40.0, 0.01).unwrap();
        assert!((sol.dc.clone() - DMatrix::identity(2, 2) * 7.0).amax() < 1e-6 * 7.0);
        let exact = solve_steady_state(&m, &n).unwrap();
        assert!((sol.final_state - exact.matrix()).amax() < 1e-6 * 7.0);
    }

    #[test]
    fn ode_pure_decay() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.5, 1.0, -1.0, -0.5]);
        let m = DriftModel::constant_model(a).unwrap();
        let n = DiffusionMatrix::from_diagonal(&[0.0, 0.0]).unwrap();
        let v0 = CovarianceMatrix::vacuum(QuadratureBasis::anonymous(1));
        let sol = integrate_lyapunov_ode(&m, &n, &v0, 50.0, 0.01).unwrap();
        assert!(sol.final_state.amax() < 1e-20);
    }

    #[test]
    fn ode_rejects_coarse_steps_and_detects_divergence() {
        let (m, n) = thermal_model(1.0, 0.0);
        let v0 = CovarianceMatrix::vacuum(QuadratureBasis::anonymous(1));
        assert!(integrate_lyapunov_ode(&m, &n, &v0, 1.0, 1.0).is_err());
        let grow = DriftModel::constant_model(DMatrix::identity(2, 2) * 0.5).unwrap();
        let err = integrate_lyapunov_ode(&grow, &n, &v0, 100.0, 0.01).unwrap_err();
        assert!(matches!(err, Error::Integration(_)));
    }

    #[test]
    fn mc_lone_cavity_is_vacuum_and_deterministic() {
        let (m, n) = thermal_model(1.0, 0.0);
        let est = monte_carlo_covariance(&m, &n, 4000, 12.0, 0.005, 7).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                let z = (est.v[(i, j)] - target).abs() / est.stderr[(i, j)];
                assert!(z < 4.0, "({i},{j}) z = {z}");
            }
        }
        let again = monte_carlo_covariance(&m, &n, 4000, 12.0, 0.005, 7).unwrap();
        assert_eq!(est, again);
        assert!(monte_carlo_covariance(&m, &n, 1, 1.0, 0.005, 7).is_err());
    }

    #[test]
    fn fourth_moments_of_vacuum() {
        let v = CovarianceMatrix::vacuum(QuadratureBasis::anonymous(1));
        let e = sample_fourth_moments(&v, [0, 0, 0, 0], 200_000, 3).unwrap();
        assert_eq!(e.expected, 6.0);
        assert!(e.z_score() < 4.0);
        let e = sample_fourth_moments(&v, [0, 0, 1, 1], 200_000, 4).unwrap();
        assert_eq!(e.expected, 2.0);
        assert!(e.z_score() < 4.0);
    }

    #[test]
    fn periodic_initial_state_is_a_fixed_point_of_one_period() {
        #[rustfmt::skip]
        let a0 = DMatrix::from_row_slice(2, 2, &[-0.3, 1.0, -1.0, -0.3]);
        let ac = DMatrix::from_row_slice(2, 2, &[0.0, 0.4, 0.4, 0.0]);
        let m = DriftModel::new(
            QuadratureBasis::anonymous(1),
            a0,
            vec![crate::system::Harmonic {
                order: 1,
                sin: ac.clone() * 0.5,
                cos: ac,
            }],
            2.0,
        )
        .unwrap();
        let n = DiffusionMatrix::from_diagonal(&[0.6, 0.6]).unwrap();
        let v0 = periodic_initial_state(&m, &n, 0.01).unwrap();
        let sol = integrate_lyapunov_ode(&m, &n, &v0, m.period().unwrap(), 0.01).unwrap();
        let drift = (&sol.final_state - v0.matrix()).amax() / v0.matrix().amax();
        assert!(drift < 1e-8, "{drift}");
        let long = integrate_lyapunov_ode(&m, &n, &v0.clone(), 60.0, 0.01).unwrap();
        assert!((&long.dc - &sol.dc).amax() < 1e-7 * sol.dc.amax());
        let constant = DriftModel::constant_model(DMatrix::identity(2, 2) * -1.0).unwrap();
        assert!(periodic_initial_state(&constant, &n, 0.01).is_err());
    }
}
