//! Fixed operators and state families for the conjugate pair `(Z, X)` in
//! dimension `d`, with `ω = exp(2πi/d)`.
//!
//! Register conventions used across the crate: Alice's system is [`A`], the
//! `Z`-copy register is [`AP`] (A′), the `X`-copy register is [`APP`] (A″),
//! Bob holds [`B`] and the environment [`E`].

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, Isometry, LabeledState, Operator, SystemLabel, C64, ONE, ZERO};

pub const A: &str = "A";
pub const AP: &str = "Ap";
pub const APP: &str = "App";
pub const B: &str = "B";
pub const E: &str = "E";

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::OutOfRange(format!("dimension {d} < 2")));
    }
    Ok(())
}

fn label(name: &str, d: usize) -> SystemLabel {
    SystemLabel::new(name, d).expect("d >= 1 checked by caller")
}

/// The computational and Fourier bases of `C^d`.
#[derive(Debug, Clone)]
pub struct ConjugatePair {
    d: usize,
}

impl ConjugatePair {
    pub fn new(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self { d })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `ω^k`, with the exponent reduced mod `d` so the phase is exact at
    /// multiples of `d`.
    pub fn omega_pow(&self, k: i64) -> C64 {
        let r = k.rem_euclid(self.d as i64) as f64;
        C64::from_polar(1.0, 2.0 * PI * r / self.d as f64)
    }

    pub fn z_ket(&self, z: usize) -> CVector {
        let mut v = CVector::zeros(self.d);
        v[z % self.d] = ONE;
        v
    }

    /// `|x̃⟩ = d^{-1/2} Σ_z ω^{xz} |z⟩`.
    pub fn x_ket(&self, x: usize) -> CVector {
        let s = 1.0 / (self.d as f64).sqrt();
        CVector::from_fn(self.d, |z, _| self.omega_pow((x * z) as i64) * s)
    }

    /// Column `x` is `|x̃⟩`.
    pub fn fourier_matrix(&self) -> CMatrix {
        let s = 1.0 / (self.d as f64).sqrt();
        CMatrix::from_fn(self.d, self.d, |z, x| self.omega_pow((x * z) as i64) * s)
    }

    /// `Π̃_x = |x̃⟩⟨x̃|`, index taken mod `d`.
    pub fn x_projector(&self, x: i64) -> CMatrix {
        let v = self.x_ket(x.rem_euclid(self.d as i64) as usize);
        &v * v.adjoint()
    }
}

/// `X = Σ_z |z+1⟩⟨z|` on a system named `name`.
pub fn pauli_x_on(d: usize, name: &str) -> Result<Operator> {
    check_dim(d)?;
    let m = CMatrix::from_fn(d, d, |r, c| if r == (c + 1) % d { ONE } else { ZERO });
    Operator::on(m, vec![label(name, d)])
}

/// `Z = Σ_z ω^z |z⟩⟨z|` on a system named `name`.
pub fn pauli_z_on(d: usize, name: &str) -> Result<Operator> {
    let pair = ConjugatePair::new(d)?;
    Operator::on(z_power(&pair, 1), vec![label(name, d)])
}

pub fn pauli_x(d: usize) -> Result<Operator> {
    pauli_x_on(d, A)
}

pub fn pauli_z(d: usize) -> Result<Operator> {
    pauli_z_on(d, A)
}

/// `Z^k` as a bare matrix.
pub(crate) fn z_power(pair: &ConjugatePair, k: i64) -> CMatrix {
    let d = pair.dim();
    CMatrix::from_fn(d, d, |r, c| {
        if r == c {
            pair.omega_pow(k * r as i64)
        } else {
            ZERO
        }
    })
}

/// Coherent `Z` measurement `U_Z = Σ_z |z⟩⟨z|^A ⊗ |z⟩^{copy}`, mapping
/// `[measured]` to `[measured, copy]`.
pub fn u_z_between(d: usize, measured: &str, copy: &str) -> Result<Isometry> {
    check_dim(d)?;
    let mut m = CMatrix::zeros(d * d, d);
    for z in 0..d {
        m[(z * d + z, z)] = ONE;
    }
    Isometry::new(Operator::new(
        m,
        vec![label(measured, d)],
        vec![label(measured, d), label(copy, d)],
    )?)
}

/// Coherent `X` measurement `U_X = Σ_x |x̃⟩⟨x̃|^A ⊗ |x⟩^{copy}`.
pub fn u_x_between(d: usize, measured: &str, copy: &str) -> Result<Isometry> {
    let pair = ConjugatePair::new(d)?;
    let f = pair.fourier_matrix();
    let mut m = CMatrix::zeros(d * d, d);
    for x in 0..d {
        for a in 0..d {
            // ⟨x̃|a⟩ |x̃⟩ ⊗ |x⟩
            let amp = f[(a, x)].conj();
            for r in 0..d {
                m[(r * d + x, a)] += f[(r, x)] * amp;
            }
        }
    }
    Isometry::new(Operator::new(
        m,
        vec![label(measured, d)],
        vec![label(measured, d), label(copy, d)],
    )?)
}

pub fn u_z(d: usize) -> Result<Isometry> {
    u_z_between(d, A, AP)
}

pub fn u_x(d: usize) -> Result<Isometry> {
    u_x_between(d, A, APP)
}

/// `V = Σ_x |x⟩⟨x|^{A″} ⊗ (Z^x)^{A′}` as a diagonal unitary on `[A′, A″]`.
pub fn controlled_phase(d: usize) -> Result<Operator> {
    let pair = ConjugatePair::new(d)?;
    let m = CMatrix::from_fn(d * d, d * d, |r, c| {
        if r == c {
            let (a, x) = (r / d, r % d);
            pair.omega_pow((a * x) as i64)
        } else {
            ZERO
        }
    });
    Operator::on(m, vec![label(AP, d), label(APP, d)])
}

/// `W = d^{-1/2} Σ_x |x̃⟩^A ⊗ 𝟙^{A′|A} ⊗ |x⟩^{A″}`, mapping `[A]` to
/// `[A, A′, A″]`: moves A into A′ and prepares a maximally entangled pair on
/// A A″. Built from the closed form, not from the product `V U_X U_Z`.
pub fn w_operator(d: usize) -> Result<Isometry> {
    let pair = ConjugatePair::new(d)?;
    let f = pair.fourier_matrix();
    let s = 1.0 / (d as f64).sqrt();
    let mut m = CMatrix::zeros(d * d * d, d);
    for a in 0..d {
        for x in 0..d {
            for r in 0..d {
                m[((r * d + a) * d + x, a)] += f[(r, x)] * s;
            }
        }
    }
    Isometry::new(Operator::new(
        m,
        vec![label(A, d)],
        vec![label(A, d), label(AP, d), label(APP, d)],
    )?)
}

/// `V · U_X · U_Z`, composed from the three factors.
pub fn w_from_factors(d: usize) -> Result<Isometry> {
    let uz = u_z(d)?;
    let ux = u_x(d)?;
    let v = Isometry::new(controlled_phase(d)?)?;
    let w = uz.then(&ux)?.then(&v)?;
    // U_X puts A″ right after A, before A′; align with `w_operator`.
    let order = [A, AP, APP];
    reorder_outputs(&w, &order)
}

fn reorder_outputs(op: &Isometry, order: &[&str]) -> Result<Isometry> {
    let reorder = {
        let outs = op.out_systems().to_vec();
        let n: usize = outs.iter().map(|s| s.dim()).product();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = CVector::zeros(n);
            e[j] = ONE;
            let st = LabeledState::pure_unchecked(e, outs.clone()).permute_systems(order)?;
            cols.push(st.as_pure().cloned().expect("pure"));
        }
        let systems = LabeledState::pure_unchecked(CVector::zeros(n), outs.clone())
            .permute_systems(order)?
            .systems()
            .to_vec();
        Operator::new(CMatrix::from_columns(&cols), outs, systems)?
    };
    Isometry::new(Operator::then(op, &reorder)?)
}

/// `ψ_Z = U_Z ψ U_Z†`: copies the Z value of [`A`] into a fresh [`AP`]
/// register placed right after A.
pub fn psi_z(state: &LabeledState) -> Result<LabeledState> {
    let d = state.label(A)?.dim();
    state.apply(&*u_z_between(d, A, AP)?)
}

/// `Φ = d^{-1/2} Σ_z |z⟩^A |z⟩^B`.
pub fn max_entangled(d: usize) -> Result<LabeledState> {
    max_entangled_on(d, A, B)
}

pub fn max_entangled_on(d: usize, first: &str, second: &str) -> Result<LabeledState> {
    check_dim(d)?;
    let s = 1.0 / (d as f64).sqrt();
    let mut v = CVector::zeros(d * d);
    for z in 0..d {
        v[z * d + z] = C64::new(s, 0.0);
    }
    LabeledState::pure(v, vec![label(first, d), label(second, d)])
}

/// `d^{-1/2} Σ_z |z⟩^A |z⟩^B |z⟩^E`.
pub fn ghz(d: usize) -> Result<LabeledState> {
    check_dim(d)?;
    let s = 1.0 / (d as f64).sqrt();
    let mut v = CVector::zeros(d * d * d);
    for z in 0..d {
        v[(z * d + z) * d + z] = C64::new(s, 0.0);
    }
    LabeledState::pure(v, vec![label(A, d), label(B, d), label(E, d)])
}

/// The interpolating family `|θ⟩ = (cos θ |0⟩ + sin θ |0̃⟩)/√N`, θ ∈ [0, π/2].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaFamily {
    pub d: usize,
    pub theta: f64,
    pub normalization: f64,
}

impl ThetaFamily {
    pub fn new(d: usize, theta: f64) -> Result<Self> {
        check_dim(d)?;
        if !(0.0..=FRAC_PI_2).contains(&theta) {
            return Err(Error::OutOfRange(format!("theta {theta} outside [0, pi/2]")));
        }
        // ⟨0|0̃⟩ = 1/√d
        let normalization = 1.0 + (2.0 * theta).sin() / (d as f64).sqrt();
        Ok(Self {
            d,
            theta,
            normalization,
        })
    }

    pub fn ket(&self) -> CVector {
        let pair = ConjugatePair { d: self.d };
        let v = pair.z_ket(0) * C64::new(self.theta.cos(), 0.0)
            + pair.x_ket(0) * C64::new(self.theta.sin(), 0.0);
        v.unscale(self.normalization.sqrt())
    }

    pub fn state(&self) -> Result<LabeledState> {
        LabeledState::pure(self.ket(), vec![label(A, self.d)])
    }

    /// `max_z |⟨z|θ⟩|²`: deterministic guessing of Z for the lone pure state.
    pub fn p_z(&self) -> f64 {
        self.ket().iter().map(|a| a.norm_sqr()).fold(0.0, f64::max)
    }

    /// `max_x |⟨x̃|θ⟩|²`.
    pub fn p_x(&self) -> f64 {
        let pair = ConjugatePair { d: self.d };
        let k = self.ket();
        (0..self.d)
            .map(|x| pair.x_ket(x).dotc(&k).norm_sqr())
            .fold(0.0, f64::max)
    }
}

pub fn theta_state(d: usize, theta: f64) -> Result<LabeledState> {
    ThetaFamily::new(d, theta)?.state()
}
