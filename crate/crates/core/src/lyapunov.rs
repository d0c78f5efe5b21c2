//! Continuous algebraic Lyapunov equation `AV + VAᵀ + N = 0`.
//!
//! Bartels–Stewart: reduce `A` to real Schur form `QTQᵀ`, solve the
//! quasi-triangular system block by block, transform back. One step of
//! iterative refinement reuses the factorization.

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::CovarianceMatrix;
use crate::system::{hurwitz_threshold, DiffusionMatrix, DriftModel};

/// Relative asymmetry of the raw solution above which a warning is logged.
pub const ASYMMETRY_WARN: f64 = 1e-8;

const REFINE_BELOW: f64 = 1e-13;
const MAX_REFINEMENTS: usize = 2;
const SINGULAR_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    /// `‖AV + VAᵀ + N‖_F`
    pub absolute: f64,
    /// `absolute / ‖N‖_F`
    pub relative: f64,
}

/// Steady-state covariance of a time-independent model.
pub fn solve_steady_state(model: &DriftModel, n: &DiffusionMatrix) -> Result<CovarianceMatrix> {
    if !model.is_constant() {
        return Err(Error::UnsupportedVariant(
            "drift has harmonics; use the Floquet solver".into(),
        ));
    }
    let v = solve_lyapunov(model.constant(), n.matrix())?;
    CovarianceMatrix::new(model.basis().clone(), v)
}

/// Solves `AV + VAᵀ + N = 0`, refusing drifts that are not Hurwitz.
pub fn solve_lyapunov(a: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let solver = SchurLyapunov::new(a, n)?;
    let abscissa = solver.abscissa();
    if !(abscissa < hurwitz_threshold(a.norm())) {
        return Err(Error::NoSteadyState { abscissa });
    }
    solver.solve(a, n)
}

/// Same as [`solve_lyapunov`] without the Hurwitz test. The only failure is a
/// singular Sylvester block, i.e. `λᵢ + λⱼ = 0` for two eigenvalues of `A`.
pub fn solve_lyapunov_unchecked(a: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    SchurLyapunov::new(a, n)?.solve(a, n)
}

pub fn residual(a: &DMatrix<f64>, v: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<Residual> {
    let d = a.nrows();
    let ok = |m: &DMatrix<f64>| m.nrows() == d && m.ncols() == d;
    if !ok(a) || !ok(v) || !ok(n) {
        return Err(Error::DimensionMismatch(format!(
            "A {}x{}, V {}x{}, N {}x{}",
            a.nrows(),
            a.ncols(),
            v.nrows(),
            v.ncols(),
            n.nrows(),
            n.ncols()
        )));
    }
    let absolute = raw_residual(a, v, n).norm();
    Ok(Residual {
        absolute,
        relative: absolute / n.norm(),
    })
}

fn raw_residual(a: &DMatrix<f64>, v: &DMatrix<f64>, n: &DMatrix<f64>) -> DMatrix<f64> {
    let av = a * v;
    &av + av.transpose() + n
}

/// Real Schur factors of `A` and the diagonal block layout of `T`.
struct SchurLyapunov {
    q: DMatrix<f64>,
    t: DMatrix<f64>,
    blocks: Vec<(usize, usize)>,
}

impl SchurLyapunov {
    fn new(a: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d || n.nrows() != d || n.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, N is {}x{}",
                a.nrows(),
                a.ncols(),
                n.nrows(),
                n.ncols()
            )));
        }
        if a.iter().chain(n.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("non-finite drift or diffusion entry".into()));
        }
        let (q, mut t) = Schur::try_new(a.clone(), f64::EPSILON, 10_000 * d.max(1))
            .ok_or(Error::SchurFailed)?
            .unpack();
        let mut blocks = Vec::with_capacity(d);
        let mut i = 0;
        while i < d {
            let two = i + 1 < d && {
                let sub = t[(i + 1, i)].abs();
                let scale = t[(i, i)].abs() + t[(i + 1, i + 1)].abs();
                sub > f64::EPSILON * scale.max(f64::MIN_POSITIVE)
            };
            if two {
                blocks.push((i, 2));
                i += 2;
            } else {
                if i + 1 < d {
                    t[(i + 1, i)] = 0.0;
                }
                blocks.push((i, 1));
                i += 1;
            }
        }
        Ok(Self { q, t, blocks })
    }

    /// Largest real part among the eigenvalues of `T`.
    fn abscissa(&self) -> f64 {
        self.blocks
            .iter()
            .map(|&(i, p)| {
                if p == 1 {
                    self.t[(i, i)]
                } else {
                    0.5 * (self.t[(i, i)] + self.t[(i + 1, i + 1)])
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn solve(&self, a: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n_norm = n.norm();
        let mut v = self.apply(&(-n))?;
        for _ in 0..MAX_REFINEMENTS {
            let r = raw_residual(a, &v, n);
            if r.norm() <= REFINE_BELOW * n_norm {
                break;
            }
            v += self.apply(&(-r))?;
        }
        let scale = v.amax().max(f64::MIN_POSITIVE);
        let asym = (&v - v.transpose()).amax() / scale;
        if asym > ASYMMETRY_WARN {
            log::warn!("Lyapunov solution asymmetry {asym:e} exceeds {ASYMMETRY_WARN:e}");
        }
        Ok((&v + v.transpose()) * 0.5)
    }

    /// Solves `AX + XAᵀ = C`.
    fn apply(&self, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let ct = self.q.transpose() * c * &self.q;
        let y = self.solve_triangular(&ct)?;
        Ok(&self.q * y * self.q.transpose())
    }

    /// Solves `TY + YTᵀ = C` for quasi-upper-triangular `T`, sweeping block
    /// rows and columns from the bottom-right corner.
    fn solve_triangular(&self, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let d = self.t.nrows();
        let t = &self.t;
        let t_norm = t.norm();
        let mut y = DMatrix::<f64>::zeros(d, d);
        for &(i0, p) in self.blocks.iter().rev() {
            let ie = i0 + p;
            for &(j0, q) in self.blocks.iter().rev() {
                let je = j0 + q;
                let mut rhs = c.view((i0, j0), (p, q)).into_owned();
                if ie < d {
                    rhs -= t.view((i0, ie), (p, d - ie)) * y.view((ie, j0), (d - ie, q));
                }
                if je < d {
                    rhs -= y.view((i0, je), (p, d - je)) * t.view((j0, je), (q, d - je)).transpose();
                }
                let tii = t.view((i0, i0), (p, p));
                let tjj = t.view((j0, j0), (q, q));
                let x = small_sylvester(&tii.into_owned(), &tjj.into_owned(), &rhs, t_norm)?;
                y.view_mut((i0, j0), (p, q)).copy_from(&x);
            }
        }
        Ok(y)
    }
}

/// Solves `P X + X Rᵀ = C` for blocks of size at most 2 via the Kronecker form
/// `(I ⊗ P + R ⊗ I) vec X = vec C`. The block counts as singular when the
/// geometric mean of its pivots falls below `SINGULAR_TOL · scale`.
fn small_sylvester(p: &DMatrix<f64>, r: &DMatrix<f64>, c: &DMatrix<f64>, scale: f64) -> Result<DMatrix<f64>> {
    let (m, n) = (p.nrows(), r.nrows());
    let k = m * n;
    let mut kron = DMatrix::<f64>::zeros(k, k);
    for j in 0..n {
        for i in 0..m {
            let row = j * m + i;
            for l in 0..m {
                kron[(row, j * m + l)] += p[(i, l)];
            }
            for l in 0..n {
                kron[(row, l * m + i)] += r[(j, l)];
            }
        }
    }
    let rhs = DVector::from_column_slice(c.as_slice());
    let lu = kron.lu();
    let det = lu.determinant().abs();
    if det.powf(1.0 / k as f64) <= SINGULAR_TOL * scale {
        return Err(Error::Singular("Sylvester block has λᵢ + λⱼ ≈ 0".into()));
    }
    let x = lu
        .solve(&rhs)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular("Sylvester block has λᵢ + λⱼ = 0".into()))?;
    Ok(DMatrix::from_column_slice(m, n, x.as_slice()))
}
