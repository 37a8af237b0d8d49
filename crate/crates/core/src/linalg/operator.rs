use std::ops::Deref;

use super::dense::identity;
use super::state::apply_to_vector;
use super::{check_unique, max_abs, total_dim, CMatrix, SystemLabel};
use crate::error::{Error, Result};

/// A linear map from the space of `in_systems` to that of `out_systems`.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    data: CMatrix,
    in_systems: Vec<SystemLabel>,
    out_systems: Vec<SystemLabel>,
}

impl Operator {
    pub fn new(
        data: CMatrix,
        in_systems: Vec<SystemLabel>,
        out_systems: Vec<SystemLabel>,
    ) -> Result<Self> {
        check_unique(&in_systems)?;
        check_unique(&out_systems)?;
        let (r, c) = (total_dim(&out_systems), total_dim(&in_systems));
        if data.nrows() != r || data.ncols() != c {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for a map {:?} -> {:?}",
                data.nrows(),
                data.ncols(),
                in_systems,
                out_systems
            )));
        }
        Ok(Self {
            data,
            in_systems,
            out_systems,
        })
    }

    /// Square operator acting on `systems`.
    pub fn on(data: CMatrix, systems: Vec<SystemLabel>) -> Result<Self> {
        Self::new(data, systems.clone(), systems)
    }

    pub fn identity(systems: &[SystemLabel]) -> Result<Self> {
        Self::on(identity(total_dim(systems)), systems.to_vec())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn in_systems(&self) -> &[SystemLabel] {
        &self.in_systems
    }

    pub fn out_systems(&self) -> &[SystemLabel] {
        &self.out_systems
    }

    pub fn adjoint(&self) -> Self {
        Self {
            data: self.data.adjoint(),
            in_systems: self.out_systems.clone(),
            out_systems: self.in_systems.clone(),
        }
    }

    /// Kronecker product; input and output label lists are concatenated.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut ins = self.in_systems.clone();
        ins.extend(other.in_systems.iter().cloned());
        let mut outs = self.out_systems.clone();
        outs.extend(other.out_systems.iter().cloned());
        Self::new(self.data.kronecker(&other.data), ins, outs)
    }

    /// `next ∘ self`, where `next` acts on a subset of this operator's
    /// outputs (identity on the others). Output labels follow the same
    /// placement rule as [`super::LabeledState::apply`].
    pub fn then(&self, next: &Operator) -> Result<Self> {
        let mut out_systems = None;
        let mut cols = Vec::with_capacity(self.data.ncols());
        for j in 0..self.data.ncols() {
            let col = self.data.column(j).into_owned();
            let (labels, v) = apply_to_vector(&self.out_systems, &col, next)?;
            out_systems.get_or_insert(labels);
            cols.push(v);
        }
        let out_systems = match out_systems {
            Some(s) => s,
            None => return Err(Error::DimensionMismatch("composition of empty maps".into())),
        };
        let data = CMatrix::from_columns(&cols);
        Self::new(data, self.in_systems.clone(), out_systems)
    }

    /// `max |(V†V − 1)_{ij}|`.
    pub fn isometry_defect(&self) -> f64 {
        let g = self.data.adjoint() * &self.data;
        max_abs(&(g - identity(self.data.ncols())))
    }

    pub fn is_isometry(&self, tol: f64) -> bool {
        self.isometry_defect() <= tol
    }
}

/// An [`Operator`] with `V†V = 1` checked at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Isometry(Operator);

impl Isometry {
    pub const DEFAULT_TOL: f64 = 1e-9;

    pub fn new(op: Operator) -> Result<Self> {
        Self::with_tol(op, Self::DEFAULT_TOL)
    }

    pub fn with_tol(op: Operator, tol: f64) -> Result<Self> {
        let defect = op.isometry_defect();
        if defect > tol {
            return Err(Error::NotIsometry(defect));
        }
        Ok(Self(op))
    }

    /// Composition of isometries is an isometry; no re-check beyond roundoff.
    pub fn then(&self, next: &Isometry) -> Result<Self> {
        Self::new(self.0.then(&next.0)?)
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }
}

impl Deref for Isometry {
    type Target = Operator;

    fn deref(&self) -> &Operator {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{C64, ONE, ZERO};

    fn lab(name: &str, d: usize) -> SystemLabel {
        SystemLabel::new(name, d).unwrap()
    }

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn identity_tensor_identity() {
        let a = Operator::identity(&[lab("A", 2)]).unwrap();
        let b = Operator::identity(&[lab("B", 2)]).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.matrix(), &identity(4));
        assert!(matches!(a.tensor(&a), Err(Error::DuplicateLabel(_))));
    }

    #[test]
    fn z_tensor_x_hand_expansion() {
        let z = Operator::on(
            CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(-1.0)]),
            vec![lab("A", 2)],
        )
        .unwrap();
        let x = Operator::on(
            CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            vec![lab("B", 2)],
        )
        .unwrap();
        #[rustfmt::skip]
        let expected = CMatrix::from_row_slice(4, 4, &[
            ZERO, ONE, ZERO, ZERO,
            ONE, ZERO, ZERO, ZERO,
            ZERO, ZERO, ZERO, c(-1.0),
            ZERO, ZERO, c(-1.0), ZERO,
        ]);
        assert_eq!(z.tensor(&x).unwrap().matrix(), &expected);
    }

    #[test]
    fn shape_checked() {
        assert!(matches!(
            Operator::new(CMatrix::zeros(3, 2), vec![lab("A", 2)], vec![lab("A", 2)]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn then_composes_on_subsystems() {
        // copy A into C, then flip C
        let mut copy = CMatrix::zeros(4, 2);
        copy[(0, 0)] = ONE;
        copy[(3, 1)] = ONE;
        let u = Operator::new(copy, vec![lab("A", 2)], vec![lab("A", 2), lab("C", 2)]).unwrap();
        let flip = Operator::on(
            CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            vec![lab("C", 2)],
        )
        .unwrap();
        let w = u.then(&flip).unwrap();
        // |0⟩ ↦ |0 1⟩, |1⟩ ↦ |1 0⟩
        assert_eq!(w.matrix()[(1, 0)], ONE);
        assert_eq!(w.matrix()[(2, 1)], ONE);
        let iso = Isometry::new(w).unwrap();
        assert!(iso.isometry_defect() < 1e-15);
        assert!(Isometry::new(flip.tensor(&Operator::identity(&[lab("D", 2)]).unwrap()).unwrap()).is_ok());
        let not_iso = Operator::on(CMatrix::zeros(2, 2), vec![lab("A", 2)]).unwrap();
        assert!(matches!(Isometry::new(not_iso), Err(Error::NotIsometry(_))));
    }
}
