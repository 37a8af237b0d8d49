use nalgebra::SymmetricEigen;

use super::{hermitize, max_abs, CMatrix, LabeledState, ONE, ZERO};
use crate::error::{Error, Result};

/// Eigenvalues down to `-NEG_EIG_CLAMP` (relative to `max(1, ‖M‖)`) are
/// treated as roundoff and clamped to zero; anything below is an error.
pub const NEG_EIG_CLAMP: f64 = 1e-8;

const HERMITIAN_TOL: f64 = 1e-10;

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - m.adjoint())) <= tol * max_abs(m).max(1.0)
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and a
/// unitary whose columns are the matching eigenvectors.
pub fn herm_eig(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            h.nrows(),
            h.ncols()
        )));
    }
    if !is_hermitian(h, HERMITIAN_TOL) {
        return Err(Error::NotHermitian(max_abs(&(h - h.adjoint()))));
    }
    Ok(eig_unchecked(h))
}

pub(crate) fn eig_unchecked(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitize(h));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (j, &i) in order.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// `U f(Λ) U†` for a Hermitian input.
pub(crate) fn map_eigen(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = values.len();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let fv = f(v);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    scaled * vectors.adjoint()
}

pub fn min_eigenvalue(h: &CMatrix) -> f64 {
    eig_unchecked(h).0.first().copied().unwrap_or(0.0)
}

fn checked_psd_eig(p: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let (vals, vecs) = herm_eig(p)?;
    let scale = vals.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if let Some(&lo) = vals.first() {
        if lo < -NEG_EIG_CLAMP * scale {
            return Err(Error::NotPositive(lo));
        }
    }
    Ok((vals, vecs))
}

/// Principal square root of a positive semidefinite matrix.
pub fn psd_sqrt(p: &CMatrix) -> Result<CMatrix> {
    let (vals, vecs) = checked_psd_eig(p)?;
    Ok(map_eigen(&vals, &vecs, |v| v.max(0.0).sqrt()))
}

/// Moore–Penrose inverse square root; eigenvalues at or below
/// `rel_cutoff · λ_max` are treated as kernel.
pub fn psd_inv_sqrt(p: &CMatrix, rel_cutoff: f64) -> CMatrix {
    let (vals, vecs) = eig_unchecked(p);
    let top = vals.last().copied().unwrap_or(0.0);
    let cut = rel_cutoff * top.max(0.0);
    map_eigen(&vals, &vecs, |v| if v > cut && v > 0.0 { 1.0 / v.sqrt() } else { 0.0 })
}

/// Kernel projector of a PSD matrix at the same cutoff as [`psd_inv_sqrt`].
pub(crate) fn kernel_projector(p: &CMatrix, rel_cutoff: f64) -> CMatrix {
    let (vals, vecs) = eig_unchecked(p);
    let top = vals.last().copied().unwrap_or(0.0);
    let cut = rel_cutoff * top.max(0.0);
    map_eigen(&vals, &vecs, |v| if v > cut && v > 0.0 { 0.0 } else { 1.0 })
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.iter().sum()
}

fn aligned(rho: &LabeledState, sigma: &LabeledState) -> Result<LabeledState> {
    if rho.systems() == sigma.systems() {
        return Ok(sigma.clone());
    }
    let names: Vec<&str> = rho.systems().iter().map(|s| s.name()).collect();
    let same_set = rho.systems().len() == sigma.systems().len()
        && rho.systems().iter().all(|s| sigma.systems().contains(s));
    if !same_set {
        return Err(Error::DimensionMismatch(format!(
            "states live on {:?} and {:?}",
            rho.systems(),
            sigma.systems()
        )));
    }
    sigma.permute_systems(&names)
}

/// Uhlmann fidelity `F(ρ,σ) = ‖√ρ √σ‖₁`, computed from the singular values
/// of `√ρ√σ`. Pure arguments use the overlap closed forms.
pub fn fidelity(rho: &LabeledState, sigma: &LabeledState) -> Result<f64> {
    let sigma = aligned(rho, sigma)?;
    let f = match (rho.as_pure(), sigma.as_pure()) {
        (Some(a), Some(b)) => a.dotc(b).norm(),
        (Some(a), None) => sandwich(a, sigma.density_ref()).sqrt(),
        (None, Some(b)) => sandwich(b, rho.density_ref()).sqrt(),
        (None, None) => {
            let sr = psd_sqrt(rho.density_ref())?;
            let ss = psd_sqrt(sigma.density_ref())?;
            trace_norm(&(sr * ss))
        }
    };
    Ok(f.clamp(0.0, 1.0))
}

fn sandwich(v: &super::CVector, m: &CMatrix) -> f64 {
    v.dotc(&(m * v)).re.max(0.0)
}

/// `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &LabeledState, sigma: &LabeledState) -> Result<f64> {
    let sigma = aligned(rho, sigma)?;
    let diff = rho.density() - sigma.density();
    let (vals, _) = eig_unchecked(&diff);
    Ok((0.5 * vals.iter().map(|v| v.abs()).sum::<f64>()).clamp(0.0, 1.0))
}

pub(crate) fn identity(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_density, random_pure, SystemLabel, C64};
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn qubit(name: &str) -> SystemLabel {
        SystemLabel::new(name, 2).unwrap()
    }

    #[test]
    fn eig_of_pauli_z_and_identity() {
        let z = CMatrix::from_row_slice(2, 2, &[c(1.0), ZERO, ZERO, c(-1.0)]);
        let (vals, _) = herm_eig(&z).unwrap();
        assert_abs_diff_eq!(vals[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-14);
        let (vals, _) = herm_eig(&identity(5)).unwrap();
        assert!(vals.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let rho = random_density(&[SystemLabel::new("A", 6).unwrap()], 6, 3).unwrap();
        let h = rho.density() * c(3.0) - identity(6);
        let (vals, u) = herm_eig(&h).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let rec = map_eigen(&vals, &u, |v| v);
        assert!((rec - &h).norm() <= 1e-9 * h.norm());
        let tr: f64 = vals.iter().sum();
        assert_abs_diff_eq!(tr, super::super::trace_re(&h), epsilon = 1e-10);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[ZERO, c(1.0), ZERO, ZERO]);
        assert!(matches!(herm_eig(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn sqrt_of_diagonal_and_projector() {
        let m = CMatrix::from_row_slice(2, 2, &[c(4.0), ZERO, ZERO, c(9.0)]);
        let s = psd_sqrt(&m).unwrap();
        assert_abs_diff_eq!(s[(0, 0)].re, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[(1, 1)].re, 3.0, epsilon = 1e-12);
        let p = CMatrix::from_row_slice(2, 2, &[c(0.5), c(0.5), c(0.5), c(0.5)]);
        assert!((psd_sqrt(&p).unwrap() - &p).norm() < 1e-12);
    }

    #[test]
    fn sqrt_rejects_negative_and_clamps_roundoff() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0), ZERO, ZERO, c(-1e-3)]);
        assert!(matches!(psd_sqrt(&m), Err(Error::NotPositive(_))));
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0), ZERO, ZERO, c(-1e-11)]);
        assert!(psd_sqrt(&m).is_ok());
    }

    #[test]
    fn sqrt_dominates_for_contractions() {
        // √Λ ⪰ Λ whenever 0 ⪯ Λ ⪯ 1
        for seed in 0..20 {
            let rho = random_density(&[SystemLabel::new("A", 4).unwrap()], 3, seed).unwrap();
            let p = rho.density_ref();
            let s = psd_sqrt(p).unwrap();
            assert!((&s * &s - p).norm() < 1e-9);
            assert!(min_eigenvalue(&(s - p)) >= -1e-10);
        }
    }

    #[test]
    fn fidelity_closed_forms() {
        let zero = LabeledState::basis_ket(&[qubit("A")], &[0]).unwrap();
        let one = LabeledState::basis_ket(&[qubit("A")], &[1]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = LabeledState::pure(
            super::super::CVector::from_vec(vec![c(h), c(h)]),
            vec![qubit("A")],
        )
        .unwrap();
        assert_abs_diff_eq!(fidelity(&zero, &zero).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&zero, &one).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&zero, &plus).unwrap(), h, epsilon = 1e-12);
        // mixed route agrees with pure closed form
        let f = fidelity(&zero.to_density(), &plus.to_density()).unwrap();
        assert_abs_diff_eq!(f, h, epsilon = 1e-7);
        assert_abs_diff_eq!(trace_distance(&zero, &zero).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(trace_distance(&zero, &one).unwrap(), 1.0, epsilon = 1e-12);
        let t = trace_distance(&zero, &plus).unwrap();
        assert_abs_diff_eq!(t, h, epsilon = 1e-12);
        assert_abs_diff_eq!(t * t + 0.5, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_symmetric_and_bounded_by_trace_distance() {
        let sys = [qubit("A"), SystemLabel::new("B", 3).unwrap()];
        for seed in 0..25 {
            let r = random_density(&sys, 1 + (seed as usize % 6), seed).unwrap();
            let s = random_density(&sys, 1 + ((seed as usize + 3) % 6), 100 + seed).unwrap();
            let f1 = fidelity(&r, &s).unwrap();
            let f2 = fidelity(&s, &r).unwrap();
            assert!((f1 - f2).abs() < 1e-9);
            let t = trace_distance(&r, &s).unwrap();
            assert!(t * t + f1 * f1 <= 1.0 + 1e-9);
        }
        let p = random_pure(&sys, 9).unwrap();
        let q = random_pure(&sys, 10).unwrap();
        let f = fidelity(&p, &q).unwrap();
        let t = trace_distance(&p, &q).unwrap();
        assert_abs_diff_eq!(t * t + f * f, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn fidelity_dimension_mismatch() {
        let a = random_pure(&[qubit("A")], 1).unwrap();
        let b = random_pure(&[SystemLabel::new("A", 3).unwrap()], 1).unwrap();
        assert!(matches!(fidelity(&a, &b), Err(Error::DimensionMismatch(_))));
    }
}
