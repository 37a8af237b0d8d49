use nalgebra::DMatrix;

use super::dense::{eig_unchecked, identity};
use super::{
    check_unique, complement, hermitize, max_abs, offsets, position, positions, total_dim,
    trace_re, CMatrix, CVector, Operator, SystemLabel, C64, ONE,
};
use crate::error::{Error, Result};

const PURE_NORM_TOL: f64 = 1e-12;
const DENSITY_HERMITIAN_TOL: f64 = 1e-12;
const DENSITY_EIG_TOL: f64 = 1e-10;
const DENSITY_TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Pure,
    Density,
}

#[derive(Debug, Clone, PartialEq)]
enum StateData {
    Pure(CVector),
    Density(CMatrix),
}

/// A normalized pure or mixed state on an ordered list of labeled subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledState {
    data: StateData,
    systems: Vec<SystemLabel>,
}

impl LabeledState {
    /// Validated pure state.
    pub fn pure(vector: CVector, systems: Vec<SystemLabel>) -> Result<Self> {
        let s = Self {
            data: StateData::Pure(vector),
            systems,
        };
        s.validate()?;
        Ok(s)
    }

    /// Validated density operator.
    pub fn density_matrix(matrix: CMatrix, systems: Vec<SystemLabel>) -> Result<Self> {
        let s = Self {
            data: StateData::Density(matrix),
            systems,
        };
        s.validate()?;
        Ok(s)
    }

    pub(crate) fn pure_unchecked(vector: CVector, systems: Vec<SystemLabel>) -> Self {
        Self {
            data: StateData::Pure(vector),
            systems,
        }
    }

    pub(crate) fn density_unchecked(matrix: CMatrix, systems: Vec<SystemLabel>) -> Self {
        Self {
            data: StateData::Density(hermitize(&matrix)),
            systems,
        }
    }

    /// Computational basis ket `|i_1 … i_n⟩`.
    pub fn basis_ket(systems: &[SystemLabel], indices: &[usize]) -> Result<Self> {
        check_unique(systems)?;
        if indices.len() != systems.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} indices for {} subsystems",
                indices.len(),
                systems.len()
            )));
        }
        let dims: Vec<usize> = systems.iter().map(|s| s.dim()).collect();
        let mut flat = 0;
        for (k, (&i, &d)) in indices.iter().zip(&dims).enumerate() {
            if i >= d {
                return Err(Error::OutOfRange(format!(
                    "index {i} on subsystem {}",
                    systems[k]
                )));
            }
            flat = flat * d + i;
        }
        let mut v = CVector::zeros(total_dim(systems));
        v[flat] = ONE;
        Ok(Self::pure_unchecked(v, systems.to_vec()))
    }

    /// `I/D` on the given subsystems.
    pub fn maximally_mixed(systems: &[SystemLabel]) -> Result<Self> {
        check_unique(systems)?;
        let n = total_dim(systems);
        Ok(Self::density_unchecked(
            identity(n).unscale(n as f64),
            systems.to_vec(),
        ))
    }

    /// Checks every state invariant: unique labels, matching dimension, unit
    /// norm for pure states; Hermitian, PSD and unit trace for densities.
    pub fn validate(&self) -> Result<()> {
        check_unique(&self.systems)?;
        let n = total_dim(&self.systems);
        match &self.data {
            StateData::Pure(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "vector of length {} on subsystems of total dimension {n}",
                        v.len()
                    )));
                }
                let norm = v.norm();
                if (norm - 1.0).abs() > PURE_NORM_TOL {
                    return Err(Error::InvalidState(format!("norm {norm} is not 1")));
                }
            }
            StateData::Density(m) => {
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "{}x{} matrix on subsystems of total dimension {n}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                let dev = max_abs(&(m - m.adjoint()));
                if dev > DENSITY_HERMITIAN_TOL {
                    return Err(Error::NotHermitian(dev));
                }
                let tr = trace_re(m);
                if (tr - 1.0).abs() > DENSITY_TRACE_TOL {
                    return Err(Error::InvalidState(format!("trace {tr} is not 1")));
                }
                let lo = eig_unchecked(m).0.first().copied().unwrap_or(0.0);
                if lo < -DENSITY_EIG_TOL {
                    return Err(Error::NotPositive(lo));
                }
            }
        }
        Ok(())
    }

    pub fn systems(&self) -> &[SystemLabel] {
        &self.systems
    }

    pub fn dims(&self) -> Vec<usize> {
        self.systems.iter().map(|s| s.dim()).collect()
    }

    pub fn dim(&self) -> usize {
        total_dim(&self.systems)
    }

    pub fn kind(&self) -> StateKind {
        match self.data {
            StateData::Pure(_) => StateKind::Pure,
            StateData::Density(_) => StateKind::Density,
        }
    }

    pub fn is_pure(&self) -> bool {
        self.kind() == StateKind::Pure
    }

    pub fn label(&self, name: &str) -> Result<&SystemLabel> {
        Ok(&self.systems[position(&self.systems, name)?])
    }

    pub fn has_label(&self, name: &str) -> bool {
        self.systems.iter().any(|s| s.name() == name)
    }

    pub fn as_pure(&self) -> Option<&CVector> {
        match &self.data {
            StateData::Pure(v) => Some(v),
            StateData::Density(_) => None,
        }
    }

    pub(crate) fn density_ref(&self) -> &CMatrix {
        match &self.data {
            StateData::Density(m) => m,
            StateData::Pure(_) => panic!("density_ref called on a pure state"),
        }
    }

    /// Density matrix of the state (`|ψ⟩⟨ψ|` for pure states).
    pub fn density(&self) -> CMatrix {
        match &self.data {
            StateData::Pure(v) => v * v.adjoint(),
            StateData::Density(m) => m.clone(),
        }
    }

    pub fn to_density(&self) -> Self {
        Self {
            data: StateData::Density(self.density()),
            systems: self.systems.clone(),
        }
    }

    pub fn purity(&self) -> f64 {
        match &self.data {
            StateData::Pure(_) => 1.0,
            StateData::Density(m) => m.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// Kronecker product with concatenated labels.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut systems = self.systems.clone();
        systems.extend(other.systems.iter().cloned());
        check_unique(&systems)?;
        let data = match (&self.data, &other.data) {
            (StateData::Pure(a), StateData::Pure(b)) => StateData::Pure(a.kronecker(b)),
            _ => StateData::Density(self.density().kronecker(&other.density())),
        };
        Ok(Self { data, systems })
    }

    /// Reduced state on `keep`, with the kept subsystems in the order given.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self> {
        let pos = positions(&self.systems, keep)?;
        let dims = self.dims();
        let rest = complement(dims.len(), &pos);
        let off_k = offsets(&dims, &pos);
        let off_t = offsets(&dims, &rest);
        let systems: Vec<SystemLabel> = pos.iter().map(|&p| self.systems[p].clone()).collect();
        let reduced = match &self.data {
            StateData::Pure(v) => {
                let m = DMatrix::from_fn(off_k.len(), off_t.len(), |i, t| v[off_k[i] + off_t[t]]);
                &m * m.adjoint()
            }
            StateData::Density(rho) => DMatrix::from_fn(off_k.len(), off_k.len(), |i, j| {
                off_t
                    .iter()
                    .map(|&t| rho[(off_k[i] + t, off_k[j] + t)])
                    .sum::<C64>()
            }),
        };
        Ok(Self::density_unchecked(reduced, systems))
    }

    /// Traces out the named subsystems, keeping the rest in their order.
    pub fn trace_out(&self, names: &[&str]) -> Result<Self> {
        let pos = positions(&self.systems, names)?;
        let keep: Vec<&str> = complement(self.systems.len(), &pos)
            .into_iter()
            .map(|p| self.systems[p].name())
            .collect();
        self.partial_trace(&keep)
    }

    /// Same state with its subsystems reordered.
    pub fn permute_systems(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.systems.len() {
            return Err(Error::NotAPermutation);
        }
        let pos = positions(&self.systems, order).map_err(|e| match e {
            Error::UnknownLabel(_) | Error::DuplicateLabel(_) => Error::NotAPermutation,
            other => other,
        })?;
        let dims = self.dims();
        let off = offsets(&dims, &pos);
        let systems = pos.iter().map(|&p| self.systems[p].clone()).collect();
        let data = match &self.data {
            StateData::Pure(v) => StateData::Pure(CVector::from_fn(off.len(), |i, _| v[off[i]])),
            StateData::Density(m) => {
                StateData::Density(CMatrix::from_fn(off.len(), off.len(), |i, j| {
                    m[(off[i], off[j])]
                }))
            }
        };
        Ok(Self { data, systems })
    }

    pub fn rename(&self, from: &str, to: &str) -> Result<Self> {
        let p = position(&self.systems, from)?;
        let mut systems = self.systems.clone();
        systems[p] = systems[p].renamed(to);
        check_unique(&systems)?;
        Ok(Self {
            data: self.data.clone(),
            systems,
        })
    }

    /// Applies `op` (acting from `op.in_systems()` to `op.out_systems()`) to
    /// the matching subsystems. The output labels take the slot of the first
    /// input label in this state's order; the other subsystems keep theirs.
    pub fn apply(&self, op: &Operator) -> Result<Self> {
        let (systems, data) = match &self.data {
            StateData::Pure(v) => {
                let (s, w) = apply_to_vector(&self.systems, v, op)?;
                (s, StateData::Pure(w))
            }
            StateData::Density(m) => {
                let (s, w) = apply_to_matrix(&self.systems, m, op)?;
                (s, StateData::Density(hermitize(&w)))
            }
        };
        Ok(Self { data, systems })
    }

    /// `⟨self|other⟩` for pure states over the same set of subsystems.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        let a = self.as_pure().ok_or(Error::NotPure)?;
        let other = if other.systems == self.systems {
            other.clone()
        } else {
            let names: Vec<&str> = self.systems.iter().map(|s| s.name()).collect();
            other.permute_systems(&names).map_err(|_| {
                Error::DimensionMismatch("inner product of states on different subsystems".into())
            })?
        };
        if other.systems != self.systems {
            return Err(Error::DimensionMismatch(
                "inner product of states on different subsystems".into(),
            ));
        }
        let b = other.as_pure().ok_or(Error::NotPure)?;
        Ok(a.dotc(b))
    }

    /// `Tr[(O ⊗ 1) ρ]` for a square operator `O` on some of the subsystems.
    pub fn expectation(&self, op: &Operator) -> Result<f64> {
        if op.in_systems() != op.out_systems() {
            return Err(Error::DimensionMismatch(
                "expectation value needs an operator with equal input and output systems".into(),
            ));
        }
        let names: Vec<&str> = op.in_systems().iter().map(|s| s.name()).collect();
        let reduced = self.partial_trace(&names)?;
        if reduced.systems != op.in_systems() {
            return Err(Error::DimensionMismatch(format!(
                "operator on {:?} applied to subsystems {:?}",
                op.in_systems(),
                reduced.systems
            )));
        }
        Ok(trace_re(&(op.matrix() * reduced.density_ref())))
    }

    /// Purification on `self ⊗ new_label`, where the purifying system has the
    /// full dimension of the state. Pure inputs come back as `|ψ⟩ ⊗ |0⟩`.
    pub fn purify(&self, new_label: &str) -> Result<Self> {
        let n = self.dim();
        let anc = SystemLabel::new(new_label, n)?;
        let mut systems = self.systems.clone();
        systems.push(anc);
        check_unique(&systems)?;
        let v = match &self.data {
            StateData::Pure(v) => {
                let mut e0 = CVector::zeros(n);
                e0[0] = ONE;
                v.kronecker(&e0)
            }
            StateData::Density(m) => {
                let (vals, vecs) = eig_unchecked(m);
                let mut w = CVector::zeros(n * n);
                for (i, &lam) in vals.iter().enumerate() {
                    let amp = lam.max(0.0).sqrt();
                    if amp == 0.0 {
                        continue;
                    }
                    for a in 0..n {
                        w[a * n + i] = vecs[(a, i)] * amp;
                    }
                }
                let norm = w.norm();
                w.unscale(norm)
            }
        };
        Ok(Self::pure_unchecked(v, systems))
    }
}

fn operator_layout(
    systems: &[SystemLabel],
    op: &Operator,
) -> Result<(Vec<usize>, Vec<usize>, Vec<SystemLabel>, Vec<String>)> {
    let in_names: Vec<&str> = op.in_systems().iter().map(|s| s.name()).collect();
    let pos_in = positions(systems, &in_names)?;
    for (p, s) in pos_in.iter().zip(op.in_systems()) {
        if systems[*p].dim() != s.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator expects {s} but state has {}",
                systems[*p]
            )));
        }
    }
    let rest = complement(systems.len(), &pos_in);
    let mut inter: Vec<SystemLabel> = op.out_systems().to_vec();
    inter.extend(rest.iter().map(|&r| systems[r].clone()));
    check_unique(&inter)?;
    let anchor = pos_in.iter().copied().min().unwrap_or(0);
    let mut target: Vec<String> = Vec::with_capacity(inter.len());
    for (k, s) in systems.iter().enumerate() {
        if k == anchor {
            target.extend(op.out_systems().iter().map(|o| o.name().to_string()));
        }
        if !pos_in.contains(&k) {
            target.push(s.name().to_string());
        }
    }
    if pos_in.is_empty() && systems.is_empty() {
        target.extend(op.out_systems().iter().map(|o| o.name().to_string()));
    }
    Ok((pos_in, rest, inter, target))
}

pub(crate) fn apply_to_vector(
    systems: &[SystemLabel],
    v: &CVector,
    op: &Operator,
) -> Result<(Vec<SystemLabel>, CVector)> {
    let (pos_in, rest, inter, target) = operator_layout(systems, op)?;
    let dims: Vec<usize> = systems.iter().map(|s| s.dim()).collect();
    let off_in = offsets(&dims, &pos_in);
    let off_rest = offsets(&dims, &rest);
    let m = DMatrix::from_fn(off_in.len(), off_rest.len(), |i, r| v[off_in[i] + off_rest[r]]);
    let out = op.matrix() * m;
    let dr = off_rest.len();
    let flat = CVector::from_fn(out.nrows() * dr, |k, _| out[(k / dr, k % dr)]);
    let tmp = LabeledState::pure_unchecked(flat, inter);
    let names: Vec<&str> = target.iter().map(|s| s.as_str()).collect();
    let res = tmp.permute_systems(&names)?;
    let StateData::Pure(w) = res.data else {
        unreachable!()
    };
    Ok((res.systems, w))
}

fn apply_to_matrix(
    systems: &[SystemLabel],
    rho: &CMatrix,
    op: &Operator,
) -> Result<(Vec<SystemLabel>, CMatrix)> {
    let (pos_in, rest, inter, target) = operator_layout(systems, op)?;
    let dims: Vec<usize> = systems.iter().map(|s| s.dim()).collect();
    let mut pos = pos_in.clone();
    pos.extend(&rest);
    let off = offsets(&dims, &pos);
    let p = CMatrix::from_fn(off.len(), off.len(), |i, j| rho[(off[i], off[j])]);
    let dr: usize = rest.iter().map(|&r| dims[r]).product();
    let k = op.matrix().kronecker(&identity(dr));
    let out = &k * p * k.adjoint();
    let tmp = LabeledState::density_unchecked(out, inter);
    let names: Vec<&str> = target.iter().map(|s| s.as_str()).collect();
    let res = tmp.permute_systems(&names)?;
    let StateData::Density(w) = res.data else {
        unreachable!()
    };
    Ok((res.systems, w))
}
