//! Dense complex linear algebra over labeled multipartite Hilbert spaces.
//!
//! Every state and operator carries an ordered list of [`SystemLabel`]s.
//! Coefficients are laid out row-major over that list with the last label
//! varying fastest, which is the convention of the Kronecker product: the
//! basis index of `|i_1 … i_n⟩` is `Σ_k i_k · stride_k` with
//! `stride_k = Π_{j>k} dim_j`.

mod dense;
mod operator;
mod random;
mod state;

pub use dense::{
    fidelity, herm_eig, is_hermitian, min_eigenvalue, psd_inv_sqrt, psd_sqrt, trace_distance,
    trace_norm, NEG_EIG_CLAMP,
};
pub(crate) use dense::{identity as identity_matrix, kernel_projector};
pub use operator::{Isometry, Operator};
pub use random::{random_density, random_density_with, random_pure, random_pure_with, seeded_rng};
pub use state::{LabeledState, StateKind};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// A named tensor factor with its dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SystemLabel {
    name: String,
    dim: usize,
}

impl SystemLabel {
    pub fn new(name: impl Into<String>, dim: usize) -> Result<Self> {
        let name = name.into();
        if dim == 0 {
            return Err(Error::InvalidDimension { name, dim });
        }
        Ok(Self { name, dim })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Same dimension, different name.
    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            dim: self.dim,
        }
    }
}

impl std::fmt::Display for SystemLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}[{}]", self.name, self.dim)
    }
}

pub(crate) fn total_dim(systems: &[SystemLabel]) -> usize {
    systems.iter().map(|s| s.dim).product()
}

pub(crate) fn check_unique(systems: &[SystemLabel]) -> Result<()> {
    for (i, s) in systems.iter().enumerate() {
        if systems[..i].iter().any(|t| t.name == s.name) {
            return Err(Error::DuplicateLabel(s.name.clone()));
        }
    }
    Ok(())
}

pub(crate) fn position(systems: &[SystemLabel], name: &str) -> Result<usize> {
    systems
        .iter()
        .position(|s| s.name == name)
        .ok_or_else(|| Error::UnknownLabel(name.to_string()))
}

pub(crate) fn positions(systems: &[SystemLabel], names: &[&str]) -> Result<Vec<usize>> {
    let idx = names
        .iter()
        .map(|n| position(systems, n))
        .collect::<Result<Vec<_>>>()?;
    for (i, p) in idx.iter().enumerate() {
        if idx[..i].contains(p) {
            return Err(Error::DuplicateLabel(systems[*p].name.clone()));
        }
    }
    Ok(idx)
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Flat offsets, in row-major order over the factors at `pos`, of the
/// sub-multi-index living on those factors.
pub(crate) fn offsets(dims: &[usize], pos: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let mut out = vec![0usize];
    for &p in pos {
        let mut next = Vec::with_capacity(out.len() * dims[p]);
        for &o in &out {
            for i in 0..dims[p] {
                next.push(o + i * st[p]);
            }
        }
        out = next;
    }
    out
}

pub(crate) fn complement(n: usize, pos: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !pos.contains(i)).collect()
}

/// Hermitian part `(M + M†)/2`.
pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub(crate) fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Sum of the `k` diagonal blocks of size `n` of a `(k n) × (k n)` matrix:
/// the partial trace over a leading factor of dimension `k`.
pub(crate) fn trace_leading(m: &CMatrix, k: usize, n: usize) -> CMatrix {
    let mut out = CMatrix::zeros(n, n);
    for a in 0..k {
        out += m.view((a * n, a * n), (n, n));
    }
    out
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strides_are_row_major() {
        assert_eq!(strides(&[2, 3, 4]), vec![12, 4, 1]);
        assert_eq!(strides(&[]), Vec::<usize>::new());
    }

    #[test]
    fn offsets_enumerate_selected_factors() {
        // factors (2,3): selecting factor 1 then 0 transposes the grid
        assert_eq!(offsets(&[2, 3], &[1, 0]), vec![0, 3, 1, 4, 2, 5]);
        assert_eq!(offsets(&[2, 3], &[]), vec![0]);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            SystemLabel::new("A", 0),
            Err(Error::InvalidDimension { .. })
        ));
    }
}
