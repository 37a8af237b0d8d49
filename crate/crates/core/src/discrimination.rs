//! Optimal guessing probabilities as minimum-error discrimination.
//!
//! The success probability of guessing `m` from an ensemble of subnormalized
//! states `ρ_m` is `max Σ_m tr Λ_m ρ_m` over POVMs `Λ`. Its dual is
//! `min tr Y` subject to `Y ⪰ ρ_m` for all `m`. [`solve`] runs a fixed-point
//! iteration on the optimality conditions and returns both a POVM (primal
//! lower bound) and a feasible `Y` (dual upper bound), so the true optimum
//! is always enclosed by `[p_primal, p_dual]`.

use crate::error::{Error, Result};
use crate::linalg::{
    check_unique, hermitize, identity_matrix, min_eigenvalue, psd_inv_sqrt, total_dim, trace_norm,
    trace_re, CMatrix, CVector, LabeledState, Operator, SystemLabel,
};
use crate::qops::ConjugatePair;

/// Relative eigenvalue cutoff for pseudo-inverses.
pub const PINV_CUTOFF: f64 = 1e-10;

const POVM_PSD_TOL: f64 = 1e-10;
const POVM_SUM_TOL: f64 = 1e-9;
const ENSEMBLE_TRACE_TOL: f64 = 1e-10;

/// Which eigenbasis of the measured system is guessed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    /// Computational basis `|z⟩`.
    Z,
    /// Fourier basis `|x̃⟩`.
    X,
}

impl Basis {
    pub fn ket(self, pair: &ConjugatePair, m: usize) -> CVector {
        match self {
            Basis::Z => pair.z_ket(m),
            Basis::X => pair.x_ket(m),
        }
    }
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Basis::Z => "Z",
            Basis::X => "X",
        })
    }
}

/// Subnormalized states `ρ_m` on a common set of systems, `Σ tr ρ_m = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    states: Vec<CMatrix>,
    systems: Vec<SystemLabel>,
}

impl Ensemble {
    pub fn new(states: Vec<CMatrix>, systems: Vec<SystemLabel>) -> Result<Self> {
        let n = total_dim(&systems);
        if states.is_empty() {
            return Err(Error::InvalidState("empty ensemble".into()));
        }
        let mut total = 0.0;
        for (m, rho) in states.iter().enumerate() {
            if rho.nrows() != n || rho.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "ensemble member {m} is {}x{}, expected {n}x{n}",
                    rho.nrows(),
                    rho.ncols()
                )));
            }
            let lo = min_eigenvalue(rho);
            if lo < -POVM_PSD_TOL {
                return Err(Error::NotPositive(lo));
            }
            total += trace_re(rho);
        }
        if (total - 1.0).abs() > ENSEMBLE_TRACE_TOL {
            return Err(Error::InvalidState(format!("ensemble total trace {total}")));
        }
        Ok(Self {
            states: states.iter().map(hermitize).collect(),
            systems,
        })
    }

    pub fn states(&self) -> &[CMatrix] {
        &self.states
    }

    pub fn systems(&self) -> &[SystemLabel] {
        &self.systems
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Dimension of the space the states act on.
    pub fn dim(&self) -> usize {
        total_dim(&self.systems)
    }

    /// `Σ_m ρ_m`.
    pub fn average(&self) -> CMatrix {
        let n = self.dim();
        self.states.iter().fold(CMatrix::zeros(n, n), |acc, r| acc + r)
    }
}

/// A finite POVM on a group of systems.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<CMatrix>,
    systems: Vec<SystemLabel>,
}

impl Povm {
    pub fn new(elements: Vec<CMatrix>, systems: Vec<SystemLabel>) -> Result<Self> {
        let n = total_dim(&systems);
        if elements.is_empty() {
            return Err(Error::InvalidPovm("no outcomes".into()));
        }
        let mut sum = CMatrix::zeros(n, n);
        for (m, e) in elements.iter().enumerate() {
            if e.nrows() != n || e.ncols() != n {
                return Err(Error::InvalidPovm(format!(
                    "element {m} is {}x{}, expected {n}x{n}",
                    e.nrows(),
                    e.ncols()
                )));
            }
            let lo = min_eigenvalue(e);
            if lo < -POVM_PSD_TOL {
                return Err(Error::InvalidPovm(format!(
                    "element {m} has eigenvalue {lo}"
                )));
            }
            sum += e;
        }
        let defect = crate::linalg::max_abs(&(sum - identity_matrix(n)));
        if defect > POVM_SUM_TOL {
            return Err(Error::InvalidPovm(format!(
                "elements sum to identity only within {defect:e}"
            )));
        }
        Ok(Self {
            elements: elements.iter().map(hermitize).collect(),
            systems,
        })
    }

    /// Projective measurement in `basis` of a single system.
    pub fn basis(basis: Basis, system: SystemLabel) -> Result<Self> {
        let pair = ConjugatePair::new(system.dim())?;
        let elements = (0..system.dim())
            .map(|m| {
                let v = basis.ket(&pair, m);
                &v * v.adjoint()
            })
            .collect();
        Self::new(elements, vec![system])
    }

    /// `k` outcomes, each `I/k`.
    pub fn trivial(k: usize, systems: Vec<SystemLabel>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidPovm("no outcomes".into()));
        }
        let n = total_dim(&systems);
        let e = identity_matrix(n).unscale(k as f64);
        Self::new(vec![e; k], systems)
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn systems(&self) -> &[SystemLabel] {
        &self.systems
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Success probability `Σ_m tr Λ_m ρ_m`, outcome `m` read as a guess of `m`.
    pub fn value(&self, ensemble: &Ensemble) -> Result<f64> {
        if self.len() != ensemble.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} outcomes for an ensemble of {}",
                self.len(),
                ensemble.len()
            )));
        }
        if self.systems != ensemble.systems {
            return Err(Error::DimensionMismatch(format!(
                "POVM on {:?}, ensemble on {:?}",
                self.systems, ensemble.systems
            )));
        }
        Ok(success(&self.elements, &ensemble.states))
    }
}

fn success(povm: &[CMatrix], states: &[CMatrix]) -> f64 {
    povm.iter()
        .zip(states)
        .map(|(l, r)| trace_re(&(l * r)))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target duality gap.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 10_000,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Rigorous enclosure `[p_primal, p_dual]` of an optimal guessing probability.
#[derive(Debug, Clone)]
pub struct GuessCertificate {
    /// Value achieved by `povm`.
    pub p_primal: f64,
    /// `tr Y` for the feasible `dual_op`.
    pub p_dual: f64,
    pub povm: Povm,
    /// `Y` with `Y ⪰ ρ_m` for every `m`.
    pub dual_op: Operator,
    pub gap: f64,
    pub iterations: usize,
    /// Value of the pretty good measurement used as the starting point.
    pub pgm_value: f64,
    pub converged: bool,
}

/// `ρ_m = (⟨m| ⊗ 1) ψ (|m⟩ ⊗ 1)` reduced to `guess_from`, for `m` running
/// over the chosen eigenbasis of `measured`. An empty `guess_from` gives
/// scalar "states", i.e. the bare outcome distribution.
pub fn conditional_ensemble(
    state: &LabeledState,
    measured: &str,
    basis: Basis,
    guess_from: &[&str],
) -> Result<Ensemble> {
    let mut keep = vec![measured];
    keep.extend_from_slice(guess_from);
    let reduced = state.partial_trace(&keep)?;
    // partial_trace rejects duplicates, which covers `measured ∈ guess_from`
    let d = reduced.systems()[0].dim();
    let pair = ConjugatePair::new(d)?;
    let systems = reduced.systems()[1..].to_vec();
    let n = total_dim(&systems);
    let rho = reduced.density();
    let states = (0..d)
        .map(|m| {
            let v = basis.ket(&pair, m);
            let mut out = CMatrix::zeros(n, n);
            for a in 0..d {
                for b in 0..d {
                    let c = v[a].conj() * v[b];
                    if c.norm() == 0.0 {
                        continue;
                    }
                    out += rho.view((a * n, b * n), (n, n)) * c;
                }
            }
            hermitize(&out)
        })
        .collect();
    Ensemble::new(states, systems)
}

/// Optimal guessing probability of `basis` on `measured` from `guess_from`.
/// Fails with [`Error::NonConvergence`] if the gap stays above `tol`.
pub fn guess_prob(
    state: &LabeledState,
    measured: &str,
    basis: Basis,
    guess_from: &[&str],
    tol: f64,
) -> Result<GuessCertificate> {
    let ensemble = conditional_ensemble(state, measured, basis, guess_from)?;
    let cert = solve(&ensemble, &SolverOptions::with_tol(tol))?;
    if !cert.converged {
        return Err(Error::NonConvergence {
            lower: cert.p_primal,
            upper: cert.p_dual,
            iterations: cert.iterations,
        });
    }
    Ok(cert)
}

/// `½(tr ρ₀ + tr ρ₁) + ½‖ρ₀ − ρ₁‖₁`: the optimum for two outcomes.
pub fn helstrom(rho0: &CMatrix, rho1: &CMatrix) -> f64 {
    0.5 * (trace_re(rho0) + trace_re(rho1)) + 0.5 * trace_norm(&(rho0 - rho1))
}

/// `Λ_m = ρ^{-1/2} ρ_m ρ^{-1/2}` with the kernel of `ρ = Σρ_m` split evenly.
pub fn pretty_good_measurement(ensemble: &Ensemble) -> Povm {
    let r = psd_inv_sqrt(&ensemble.average(), PINV_CUTOFF);
    let elements: Vec<CMatrix> = ensemble
        .states
        .iter()
        .map(|rho| hermitize(&(&r * rho * &r)))
        .collect();
    Povm {
        elements: complete(elements),
        systems: ensemble.systems.clone(),
    }
}

/// Adds `(1 − Σ Λ_m)/k` to each element. The deficit is a projector (up to
/// roundoff) in every use here, so positivity is preserved.
fn complete(mut elements: Vec<CMatrix>) -> Vec<CMatrix> {
    let k = elements.len();
    let n = elements[0].nrows();
    let sum = elements.iter().fold(CMatrix::zeros(n, n), |acc, e| acc + e);
    let deficit = hermitize(&(identity_matrix(n) - sum)).unscale(k as f64);
    for e in &mut elements {
        *e += &deficit;
    }
    elements
}

/// Dual certificate from a POVM: `Y₀ = herm(Σ Λ_m ρ_m)` shifted by the
/// smallest `ε ≥ 0` making `Y₀ + ε1 ⪰ ρ_m` for all `m`.
fn dual_certificate(povm: &[CMatrix], states: &[CMatrix]) -> (CMatrix, f64) {
    let n = states[0].nrows();
    let y0 = hermitize(
        &povm
            .iter()
            .zip(states)
            .fold(CMatrix::zeros(n, n), |acc, (l, r)| acc + l * r),
    );
    let eps = states
        .iter()
        .map(|r| -min_eigenvalue(&(&y0 - r)))
        .fold(0.0_f64, f64::max);
    let y = y0 + identity_matrix(n).scale(eps);
    let value = trace_re(&y);
    (y, value)
}

/// Maximizes the success probability. Always returns the best enclosure
/// found; `converged` reports whether the gap met `opts.tol`.
pub fn solve(ensemble: &Ensemble, opts: &SolverOptions) -> Result<GuessCertificate> {
    if !(opts.tol > 0.0) {
        return Err(Error::OutOfRange(format!("tolerance {}", opts.tol)));
    }
    let states = &ensemble.states;
    let n = ensemble.dim();
    let pgm = pretty_good_measurement(ensemble);
    let pgm_value = success(&pgm.elements, states);

    let mut povm = pgm.elements.clone();
    let mut best_primal = (pgm_value, povm.clone());
    let (y, yv) = dual_certificate(&povm, states);
    // Y = Σρ_m is always feasible with value 1
    let mut best_dual = if yv < 1.0 {
        (yv, y)
    } else {
        (1.0, ensemble.average())
    };
    let mut last = pgm_value;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let gap = best_dual.0 - best_primal.0;
        if gap <= opts.tol * 1e-6 {
            break;
        }
        iterations += 1;
        let weighted: Vec<CMatrix> = povm
            .iter()
            .zip(states)
            .map(|(l, r)| r * l * r)
            .collect();
        let g = weighted
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, w| acc + w);
        let gi = psd_inv_sqrt(&hermitize(&g), PINV_CUTOFF);
        povm = complete(
            weighted
                .iter()
                .map(|w| hermitize(&(&gi * w * &gi)))
                .collect(),
        );
        let value = success(&povm, states);
        if value > best_primal.0 {
            best_primal = (value, povm.clone());
        }
        let improvement = value - last;
        last = value;
        // certificates are the expensive part; refresh sparsely once warm
        if iterations <= 20 || iterations % 10 == 0 || iterations == opts.max_iter {
            let (y, yv) = dual_certificate(&povm, states);
            if yv < best_dual.0 {
                best_dual = (yv, y);
            }
            let gap = best_dual.0 - best_primal.0;
            if gap <= opts.tol && improvement.abs() < 1e-12 {
                break;
            }
        }
    }

    let (p_primal, elements) = best_primal;
    let (p_dual, y) = best_dual;
    let gap = (p_dual - p_primal).max(0.0);
    Ok(GuessCertificate {
        p_primal,
        p_dual,
        povm: Povm {
            elements,
            systems: ensemble.systems.clone(),
        },
        dual_op: Operator::on(y, ensemble.systems.clone())?,
        gap,
        iterations,
        pgm_value,
        converged: gap <= opts.tol,
    })
}

/// `Ξ_x = Σ_{x′} Π̃_{x′−x} ⊗ Γ_{x′}` on `[register] ++ Γ.systems()`: measure
/// `Γ` and the Fourier value of `register`, and report their difference.
pub fn shift_difference_measurement(gamma: &Povm, register: &str) -> Result<Povm> {
    let d = gamma.len();
    let pair = ConjugatePair::new(d)?;
    let reg = SystemLabel::new(register, d)?;
    let mut systems = vec![reg];
    systems.extend(gamma.systems.iter().cloned());
    check_unique(&systems)?;
    let n = d * total_dim(&gamma.systems);
    let elements = (0..d as i64)
        .map(|x| {
            (0..d as i64).fold(CMatrix::zeros(n, n), |acc, xp| {
                acc + pair.x_projector(xp - x).kronecker(&gamma.elements[xp as usize])
            })
        })
        .collect();
    Povm::new(elements, systems)
}
