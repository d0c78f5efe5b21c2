//! Covariance-matrix algebra for Gaussian states.
//!
//! Convention: `V_jk = <r_j r_k + r_k r_j> - 2<r_j><r_k>`, so the vacuum has
//! `V = 1` and an ordinary quadrature variance is `V_jj / 2`. Every formula
//! that turns `V` into a moment states where the factor of two goes.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Asymmetry (relative to the largest entry) that is silently symmetrized away.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Relative tolerance used when checking that eigenvalues of the symplectic
/// problem come in degenerate pairs.
pub const PAIRING_TOL: f64 = 1e-9;

/// Slack allowed below 1 for the smallest symplectic eigenvalue of a state
/// that is still considered physical.
pub const PHYSICALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuadratureKind {
    Position,
    Momentum,
}

/// Ordered quadrature labels. Every mode contributes a position-like entry
/// immediately followed by its momentum-like entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureBasis {
    modes: Vec<String>,
}

impl QuadratureBasis {
    pub fn new<S: Into<String>>(modes: impl IntoIterator<Item = S>) -> Self {
        Self {
            modes: modes.into_iter().map(Into::into).collect(),
        }
    }

    /// Anonymous basis with modes named `m0`, `m1`, ...
    pub fn anonymous(mode_count: usize) -> Self {
        Self::new((0..mode_count).map(|i| format!("m{i}")))
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.modes.len()
    }

    pub fn modes(&self) -> &[String] {
        &self.modes
    }

    pub fn mode_index(&self, name: &str) -> Option<usize> {
        self.modes.iter().position(|m| m == name)
    }

    /// `(mode name, kind)` for every row of a matrix in this basis.
    pub fn labels(&self) -> impl Iterator<Item = (&str, QuadratureKind)> + '_ {
        self.modes.iter().flat_map(|m| {
            [
                (m.as_str(), QuadratureKind::Position),
                (m.as_str(), QuadratureKind::Momentum),
            ]
        })
    }

    pub fn subset(&self, modes: &[usize]) -> Result<Self> {
        check_distinct(modes, self.mode_count())?;
        Ok(Self {
            modes: modes.iter().map(|&i| self.modes[i].clone()).collect(),
        })
    }
}

fn check_distinct(modes: &[usize], len: usize) -> Result<()> {
    for (k, &i) in modes.iter().enumerate() {
        if i >= len {
            return Err(Error::IndexOutOfRange { index: i, len });
        }
        if modes[..k].contains(&i) {
            return Err(Error::InvalidState(format!("mode {i} selected twice")));
        }
    }
    Ok(())
}

/// Block-diagonal symplectic form with 2×2 blocks `[[0, 1], [-1, 0]]`.
pub fn symplectic_form(mode_count: usize) -> DMatrix<f64> {
    let n = 2 * mode_count;
    let mut omega = DMatrix::zeros(n, n);
    for m in 0..mode_count {
        omega[(2 * m, 2 * m + 1)] = 1.0;
        omega[(2 * m + 1, 2 * m)] = -1.0;
    }
    omega
}

/// Real symmetric covariance matrix over a [`QuadratureBasis`], vacuum-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    basis: QuadratureBasis,
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Symmetrizes `entries` if the asymmetry is below [`SYMMETRY_TOL`]
    /// (relative to the largest entry) and rejects it otherwise.
    pub fn new(basis: QuadratureBasis, entries: DMatrix<f64>) -> Result<Self> {
        let n = basis.dim();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "basis has dimension {n}, matrix is {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let scale = entries.amax().max(f64::MIN_POSITIVE);
        let asym = (&entries - entries.transpose()).amax() / scale;
        if asym > SYMMETRY_TOL {
            return Err(Error::InvalidState(format!(
                "matrix is not symmetric (relative asymmetry {asym:e})"
            )));
        }
        let entries = (&entries + entries.transpose()) * 0.5;
        Ok(Self { basis, entries })
    }

    /// Covariance over an anonymous basis.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.nrows().is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!("odd dimension {}", entries.nrows())));
        }
        Self::new(QuadratureBasis::anonymous(entries.nrows() / 2), entries)
    }

    pub fn vacuum(basis: QuadratureBasis) -> Self {
        let n = basis.dim();
        Self {
            basis,
            entries: DMatrix::identity(n, n),
        }
    }

    /// Product of thermal states with the given mean occupations.
    pub fn thermal(occupations: &[f64]) -> Result<Self> {
        if let Some(n) = occupations.iter().find(|n| !(**n >= 0.0)) {
            return Err(Error::InvalidState(format!("negative occupation {n}")));
        }
        let diag: Vec<f64> = occupations
            .iter()
            .flat_map(|n| [2.0 * n + 1.0, 2.0 * n + 1.0])
            .collect();
        Self::from_matrix(DMatrix::from_diagonal(&diag.into()))
    }

    /// Two-mode squeezed vacuum with squeezing `r`. The correlations are
    /// `x₁ ≈ −x₂`, `p₁ ≈ p₂`, so `x₁ + x₂` and `p₁ − p₂` are the squeezed
    /// combinations.
    pub fn two_mode_squeezed(r: f64) -> Self {
        let c = (2.0 * r).cosh();
        let s = (2.0 * r).sinh();
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            c, 0.0, -s, 0.0,
            0.0, c, 0.0, s,
            -s, 0.0, c, 0.0,
            0.0, s, 0.0, c,
        ]);
        Self {
            basis: QuadratureBasis::anonymous(2),
            entries: m,
        }
    }

    pub fn basis(&self) -> &QuadratureBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn mode_count(&self) -> usize {
        self.basis.mode_count()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn with_basis(self, basis: QuadratureBasis) -> Result<Self> {
        Self::new(basis, self.entries)
    }

    /// Moduli of the eigenvalues of `iΩV`, one per mode, ascending.
    ///
    /// Computed in real arithmetic: with `S = V^{1/2}`, the matrix `SΩS` is
    /// antisymmetric with eigenvalues `±iν`, so its singular values are the
    /// symplectic eigenvalues, each twice.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        let sqrt_v = self.sqrt_positive()?;
        let k = &sqrt_v * symplectic_form(self.mode_count()) * &sqrt_v;
        let mut sv: Vec<f64> = k.singular_values().iter().copied().collect();
        sv.sort_by(f64::total_cmp);
        let top = sv.last().copied().unwrap_or(0.0).max(1.0);
        let mut nus = Vec::with_capacity(sv.len() / 2);
        for pair in sv.chunks(2) {
            if (pair[1] - pair[0]).abs() > PAIRING_TOL * top {
                return Err(Error::InvalidState(format!(
                    "symplectic spectrum does not pair: {} vs {}",
                    pair[0], pair[1]
                )));
            }
            nus.push(0.5 * (pair[0] + pair[1]));
        }
        Ok(nus)
    }

    /// `V + iΩ ⪰ 0`, i.e. the smallest symplectic eigenvalue is at least one.
    pub fn is_physical(&self) -> bool {
        match self.symplectic_eigenvalues() {
            Ok(nus) => nus.first().is_none_or(|&nu| nu >= 1.0 - PHYSICALITY_TOL),
            Err(_) => false,
        }
    }

    pub fn ensure_physical(&self) -> Result<()> {
        let nus = self.symplectic_eigenvalues()?;
        match nus.first() {
            Some(&nu) if nu < 1.0 - PHYSICALITY_TOL => Err(Error::InvalidState(format!(
                "uncertainty principle violated: smallest symplectic eigenvalue {nu}"
            ))),
            _ => Ok(()),
        }
    }

    /// Flips the sign of the momentum row and column of `mode`.
    pub fn partial_transpose(&self, mode: usize) -> Result<Self> {
        let len = self.mode_count();
        if mode >= len {
            return Err(Error::IndexOutOfRange { index: mode, len });
        }
        let p = 2 * mode + 1;
        let mut m = self.entries.clone();
        m.row_mut(p).neg_mut();
        m.column_mut(p).neg_mut();
        Ok(Self {
            basis: self.basis.clone(),
            entries: m,
        })
    }

    /// Reduced state of the selected modes, in the order given.
    pub fn marginal(&self, modes: &[usize]) -> Result<Self> {
        let basis = self.basis.subset(modes)?;
        let rows: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let n = rows.len();
        let m = DMatrix::from_fn(n, n, |i, j| self.entries[(rows[i], rows[j])]);
        Ok(Self { basis, entries: m })
    }

    /// `1 / sqrt(det V)`.
    pub fn purity(&self) -> Result<f64> {
        let det = self.entries.determinant();
        if !(det > 0.0) {
            return Err(Error::InvalidState(format!("determinant {det:e} is not positive")));
        }
        Ok(1.0 / det.sqrt())
    }

    /// `<{r_i,{r_j,{r_k,r_l}}}> = 2 (V_ij V_kl + V_ik V_jl + V_il V_jk)` for a
    /// zero-mean Gaussian state.
    pub fn gaussian_fourth_moment(&self, i: usize, j: usize, k: usize, l: usize) -> Result<f64> {
        let n = self.dim();
        if let Some(&bad) = [i, j, k, l].iter().find(|&&x| x >= n) {
            return Err(Error::IndexOutOfRange { index: bad, len: n });
        }
        let v = &self.entries;
        Ok(2.0 * (v[(i, j)] * v[(k, l)] + v[(i, k)] * v[(j, l)] + v[(i, l)] * v[(j, k)]))
    }

    /// Symmetric square root; fails unless `V` is positive definite.
    fn sqrt_positive(&self) -> Result<DMatrix<f64>> {
        let eig = self.entries.clone().symmetric_eigen();
        let top = eig.eigenvalues.amax();
        if let Some(min) = eig.eigenvalues.iter().copied().reduce(f64::min) {
            if !(min > f64::EPSILON * top) {
                return Err(Error::InvalidState(format!(
                    "matrix is not positive definite (smallest eigenvalue {min:e})"
                )));
            }
        }
        let root = eig.eigenvalues.map(f64::sqrt);
        Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose())
    }

    /// Plain-text form: a `dim <n>` line, a `# basis:` comment, then `n` rows.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dim {}", self.dim());
        let labels: Vec<String> = self
            .basis
            .labels()
            .map(|(m, k)| match k {
                QuadratureKind::Position => format!("{m}/x"),
                QuadratureKind::Momentum => format!("{m}/p"),
            })
            .collect();
        let _ = writeln!(out, "# basis: {}", labels.join(" "));
        for row in self.entries.row_iter() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }
}

impl fmt::Display for CovarianceMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for CovarianceMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut dim = None;
        let mut basis = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(labels) = comment.trim().strip_prefix("basis:") {
                    basis = Some(parse_basis(labels)?);
                }
                continue;
            }
            if dim.is_none() {
                let n = line
                    .strip_prefix("dim")
                    .and_then(|r| r.trim().parse::<usize>().ok())
                    .ok_or_else(|| Error::Parse(format!("expected `dim <n>`, got `{line}`")))?;
                dim = Some(n);
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("`{t}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let n = dim.ok_or_else(|| Error::Parse("missing `dim` line".into()))?;
        if n % 2 != 0 {
            return Err(Error::Parse(format!("odd dimension {n}")));
        }
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parse(format!("expected {n} rows of {n} values")));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let basis = basis.unwrap_or_else(|| QuadratureBasis::anonymous(n / 2));
        Self::new(basis, m)
    }
}

fn parse_basis(labels: &str) -> Result<QuadratureBasis> {
    let tokens: Vec<&str> = labels.split_whitespace().collect();
    if !tokens.len().is_multiple_of(2) {
        return Err(Error::Parse("basis labels must come in x/p pairs".into()));
    }
    let mut modes = Vec::new();
    for pair in tokens.chunks(2) {
        let (mx, kx) = pair[0]
            .rsplit_once('/')
            .ok_or_else(|| Error::Parse(format!("bad label `{}`", pair[0])))?;
        let (mp, kp) = pair[1]
            .rsplit_once('/')
            .ok_or_else(|| Error::Parse(format!("bad label `{}`", pair[1])))?;
        if mx != mp || kx != "x" || kp != "p" {
            return Err(Error::Parse(format!(
                "labels `{}` `{}` are not an x/p pair of one mode",
                pair[0], pair[1]
            )));
        }
        modes.push(mx.to_string());
    }
    Ok(QuadratureBasis::new(modes))
}
