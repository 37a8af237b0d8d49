//! Entanglement recovery: the coherent-measurement circuit, the optimal
//! recovery fidelity `F(A|B)`, and the fidelities `Q` against decoupled
//! states.
//!
//! `F(A|B)² = max_ℰ ⟨Φ|(id ⊗ ℰ)(ψ^{AB})|Φ⟩` over channels `ℰ: B → A′`. With
//! the Choi operator `J` of `ℰ` laid out as (output, input), this is the
//! semidefinite program `max tr(J C)` subject to `J ⪰ 0`, `tr_out J = 1`,
//! where `C = (ψ^{AB})ᵀ/d`. Its dual is `min tr Y` subject to `1 ⊗ Y ⪰ C`.

use crate::discrimination::{
    conditional_ensemble, solve, Basis, GuessCertificate, Povm, SolverOptions, PINV_CUTOFF,
};
use crate::enclosure::Enclosure;
use crate::error::{Error, Result};
use crate::linalg::{
    hermitize, identity_matrix, kernel_projector, min_eigenvalue, psd_inv_sqrt, psd_sqrt,
    total_dim, trace_leading, trace_norm, trace_re, CMatrix, Isometry, LabeledState, Operator,
    SystemLabel,
};
use crate::qops::{
    controlled_phase, psi_z, u_x, w_operator, A, AP, APP,
};

/// Label given to the purifying system of a mixed input.
pub const PURIFIER: &str = "R";

/// `V_M = Σ_m |m⟩^{register} ⊗ √Λ_m`, mapping `M.systems()` to
/// `[register] ++ M.systems()`.
pub fn coherent_isometry(povm: &Povm, register: &str) -> Result<Isometry> {
    let k = povm.len();
    let n = total_dim(povm.systems());
    let mut m = CMatrix::zeros(k * n, n);
    for (j, e) in povm.elements().iter().enumerate() {
        let root = psd_sqrt(e)?;
        m.view_mut((j * n, 0), (n, n)).copy_from(&root);
    }
    let mut outs = vec![SystemLabel::new(register, k)?];
    outs.extend(povm.systems().iter().cloned());
    Isometry::new(Operator::new(m, povm.systems().to_vec(), outs)?)
}

/// The three Bob-side stages: coherent `Z` guess into A′, coherent `X` guess
/// into A″, and the controlled phase on A′A″.
#[derive(Debug, Clone)]
pub struct RecoveryCircuit {
    pub d: usize,
    pub v_z: Isometry,
    pub v_x: Isometry,
    pub phase: Operator,
    pub composed: Isometry,
}

/// `Λ` guesses Z from Bob's systems; `Γ` guesses X from A′ together with
/// those systems.
pub fn build_recovery(lambda: &Povm, gamma: &Povm) -> Result<RecoveryCircuit> {
    let d = lambda.len();
    if gamma.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{d} Z outcomes but {} X outcomes",
            gamma.len()
        )));
    }
    let bob = lambda.systems();
    if bob.iter().any(|s| s.name() == A || s.name() == AP || s.name() == APP) {
        return Err(Error::DimensionMismatch(
            "Z-guessing POVM must act on Bob's systems only".into(),
        ));
    }
    let mut expected: Vec<&SystemLabel> = bob.iter().collect();
    let ap = SystemLabel::new(AP, d)?;
    expected.push(&ap);
    let gamma_sys = gamma.systems();
    if gamma_sys.len() != expected.len() || !expected.iter().all(|s| gamma_sys.contains(s)) {
        return Err(Error::DimensionMismatch(format!(
            "X-guessing POVM acts on {gamma_sys:?}, expected A′ plus {bob:?}"
        )));
    }
    let v_z = coherent_isometry(lambda, AP)?;
    let v_x = coherent_isometry(gamma, APP)?;
    let phase = controlled_phase(d)?;
    let composed = v_z.then(&v_x)?.then(&Isometry::new(phase.clone())?)?;
    Ok(RecoveryCircuit {
        d,
        v_z,
        v_x,
        phase,
        composed,
    })
}

fn as_pure(state: &LabeledState) -> Result<LabeledState> {
    if state.is_pure() {
        Ok(state.clone())
    } else {
        state.purify(PURIFIER)
    }
}

/// `|⟨W ψ | V V_X V_Z ψ⟩|`. Mixed inputs are purified first.
pub fn circuit_fidelity(state: &LabeledState, circuit: &RecoveryCircuit) -> Result<f64> {
    let psi = as_pure(state)?;
    let target = psi.apply(&*w_operator(circuit.d)?)?;
    let out = psi.apply(&circuit.composed)?;
    Ok(target.inner(&out)?.norm().min(1.0))
}

/// Factor fidelities of the triangle-inequality chain bounding the circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainFidelities {
    /// `F(|ψ_Z⟩, V_Z|ψ⟩)`.
    pub z_stage: f64,
    /// `F(U_X|ψ_Z⟩, V_X|ψ_Z⟩)`.
    pub x_stage: f64,
    /// `F(W|ψ⟩, V V_X V_Z|ψ⟩)`.
    pub total: f64,
}

pub fn chain_fidelities(state: &LabeledState, circuit: &RecoveryCircuit) -> Result<ChainFidelities> {
    let psi = as_pure(state)?;
    let pz = psi_z(&psi)?;
    let z_stage = pz.inner(&psi.apply(&circuit.v_z)?)?.norm().min(1.0);
    let ux = pz.apply(&*u_x(circuit.d)?)?;
    let x_stage = ux.inner(&pz.apply(&circuit.v_x)?)?.norm().min(1.0);
    let total = circuit_fidelity(&psi, circuit)?;
    Ok(ChainFidelities {
        z_stage,
        x_stage,
        total,
    })
}

/// Bob's systems: every label except [`A`].
pub fn bob_labels(state: &LabeledState) -> Vec<&str> {
    state
        .systems()
        .iter()
        .map(|s| s.name())
        .filter(|&n| n != A)
        .collect()
}

/// Recovery circuit built from optimal guessing measurements, with the
/// certificates that produced them.
#[derive(Debug, Clone)]
pub struct OptimalRecovery {
    pub circuit: RecoveryCircuit,
    /// `P(Z^A|B)_ψ`.
    pub z_guess: GuessCertificate,
    /// `P(X^A|A′B)_{ψ_Z}`.
    pub x_guess: GuessCertificate,
}

/// The guessing problems are solved to `tol`; an unconverged solve still
/// yields a POVM whose exact value is `p_primal`, so the circuit is built
/// either way and the gaps are left for the caller to inspect.
pub fn optimal_recovery(state: &LabeledState, tol: f64) -> Result<OptimalRecovery> {
    let bob = bob_labels(state);
    let opts = SolverOptions::with_tol(tol);
    let z_guess = solve(&conditional_ensemble(state, A, Basis::Z, &bob)?, &opts)?;
    let pz = psi_z(state)?;
    let mut with_copy = vec![AP];
    with_copy.extend_from_slice(&bob);
    let x_guess = solve(&conditional_ensemble(&pz, A, Basis::X, &with_copy)?, &opts)?;
    let circuit = build_recovery(&z_guess.povm, &x_guess.povm)?;
    Ok(OptimalRecovery {
        circuit,
        z_guess,
        x_guess,
    })
}

/// Choi operator of a channel, output factor first.
#[derive(Debug, Clone)]
pub struct ChannelChoi {
    pub choi: CMatrix,
    pub out_dim: usize,
    pub in_dim: usize,
    /// `max |tr_out J − 1|`.
    pub tp_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    /// Target width of the fidelity enclosure.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryFidelity {
    /// Encloses `F(A|B)` (not its square).
    pub fidelity: Enclosure,
    pub channel: ChannelChoi,
    pub iterations: usize,
    pub converged: bool,
}

/// `F(A|B)` for the split of `state` into [`A`] and everything else.
pub fn max_recovery_fidelity(state: &LabeledState, opts: &RecoveryOptions) -> Result<RecoveryFidelity> {
    let bob = bob_labels(state);
    let mut order = vec![A];
    order.extend_from_slice(&bob);
    let rho = state.partial_trace(&order)?;
    let d = rho.systems()[0].dim();
    let n = rho.dim() / d;
    solve_recovery(&rho.density(), d, n, opts)
}

/// Fixed-point iteration `J ← (1 ⊗ T^{-1/2}) C J C (1 ⊗ T^{-1/2})` with
/// `T = tr_out(C J C)`, completed on the kernel of `T` so `tr_out J = 1`
/// holds exactly. The lower bound is `tr(J C)` for the current channel; the
/// upper bound is `tr Y` for `Y = herm(tr_out(C J))` shifted to feasibility.
pub(crate) fn solve_recovery(
    rho: &CMatrix,
    d: usize,
    n: usize,
    opts: &RecoveryOptions,
) -> Result<RecoveryFidelity> {
    if !(opts.tol > 0.0) {
        return Err(Error::OutOfRange(format!("tolerance {}", opts.tol)));
    }
    let kn = d * n;
    if rho.nrows() != kn {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} state for a {d}x{n} split",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let c = rho.transpose().unscale(d as f64);
    let id_k = identity_matrix(d);
    let mut j = identity_matrix(kn).unscale(d as f64);

    let mut best_lo = (trace_re(&(&j * &c)), j.clone());
    let mut best_hi = upper_bound(&c, &j, d, n);
    let mut last = best_lo.0;
    let mut iterations = 0;
    let width = |lo: f64, hi: f64| hi.min(1.0).sqrt() - lo.max(0.0).sqrt();

    while iterations < opts.max_iter {
        if width(best_lo.0, best_hi) <= opts.tol * 1e-6 {
            break;
        }
        iterations += 1;
        let m = hermitize(&(&c * &j * &c));
        let t = hermitize(&trace_leading(&m, d, n));
        let ti = id_k.kronecker(&psd_inv_sqrt(&t, PINV_CUTOFF));
        let fill = id_k.unscale(d as f64).kronecker(&kernel_projector(&t, PINV_CUTOFF));
        j = hermitize(&(&ti * m * &ti)) + fill;
        let lo = trace_re(&(&j * &c));
        if lo > best_lo.0 {
            best_lo = (lo, j.clone());
        }
        let improvement = lo - last;
        last = lo;
        if iterations <= 20 || iterations % 10 == 0 || iterations == opts.max_iter {
            best_hi = best_hi.min(upper_bound(&c, &j, d, n));
            if width(best_lo.0, best_hi) <= opts.tol && improvement.abs() < 1e-12 {
                break;
            }
        }
    }

    let (lo, choi) = best_lo;
    let tp_residual = crate::linalg::max_abs(&(trace_leading(&choi, d, n) - identity_matrix(n)));
    let fidelity = Enclosure::new(lo.max(0.0).sqrt(), best_hi.min(1.0).max(0.0).sqrt());
    Ok(RecoveryFidelity {
        converged: fidelity.width() <= opts.tol,
        fidelity,
        channel: ChannelChoi {
            choi,
            out_dim: d,
            in_dim: n,
            tp_residual,
        },
        iterations,
    })
}

fn upper_bound(c: &CMatrix, j: &CMatrix, d: usize, n: usize) -> f64 {
    let y = hermitize(&trace_leading(&(c * j), d, n));
    let gap = identity_matrix(d).kronecker(&y) - c;
    let eps = (-min_eigenvalue(&gap)).max(0.0);
    trace_re(&y) + n as f64 * eps
}

/// The dephased state `Σ_m |m⟩⟨m| ⊗ ρ_m` as its blocks `ρ_m` on `versus`,
/// together with the marginal `ψ^C`.
fn dephased_blocks(
    state: &LabeledState,
    measured: &str,
    basis: Basis,
    versus: &[&str],
) -> Result<(Vec<CMatrix>, CMatrix, usize)> {
    let e = conditional_ensemble(state, measured, basis, versus)?;
    let marginal = e.average();
    Ok((e.states().to_vec(), marginal, e.len()))
}

fn matrix_fidelity(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    Ok(trace_norm(&(psd_sqrt(a)? * psd_sqrt(b)?)))
}

/// `Q(basis^measured | versus) = F(ψ_m^{AC}, π^A ⊗ ψ^C)`, where `ψ_m` has the
/// measured system dephased in `basis`.
pub fn q_fidelity(state: &LabeledState, measured: &str, basis: Basis, versus: &[&str]) -> Result<f64> {
    let (blocks, marginal, d) = dephased_blocks(state, measured, basis, versus)?;
    // block diagonal in the measured basis, and π^A is basis independent
    let sigma = marginal.unscale(d as f64);
    let mut f = 0.0;
    for b in &blocks {
        f += matrix_fidelity(b, &sigma)?;
    }
    Ok(f.clamp(0.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct SigmaFidelity {
    /// Encloses `max_σ F(ψ_m^{AE}, π^A ⊗ σ^E)`.
    pub fidelity: Enclosure,
    /// The best `σ` found.
    pub sigma: CMatrix,
    pub iterations: usize,
    /// Whether the semidefinite reformulation was needed to close the gap.
    pub used_sdp: bool,
    pub converged: bool,
}

/// `max_σ F(ψ_m^{AE}, π^A ⊗ σ^E)`.
///
/// Lower bounds come from alternating ascent on `σ`; the objective is
/// `d^{-1/2} Σ_m ‖√ρ_m √σ‖₁`, and each step picks the polar unitaries of the
/// blocks and then the best `√σ` for them, which never decreases it. The
/// upper bound is the linearization at the final iterate when `σ` is well
/// conditioned. Otherwise (or if that is not tight enough) the value is
/// enclosed through the identity `max_σ F(ρ^{AE}, π ⊗ σ)² = F(A|R)²`, with
/// `R` purifying `ρ^{AE}`.
pub fn max_sigma_fidelity(
    state: &LabeledState,
    measured: &str,
    basis: Basis,
    env: &[&str],
    opts: &RecoveryOptions,
) -> Result<SigmaFidelity> {
    let (blocks, marginal, d) = dephased_blocks(state, measured, basis, env)?;
    let n = marginal.nrows();
    let scale = 1.0 / (d as f64).sqrt();
    let roots = blocks.iter().map(psd_sqrt).collect::<Result<Vec<_>>>()?;
    let objective = |sigma: &CMatrix| -> Result<f64> {
        let s = psd_sqrt(sigma)?;
        Ok(roots.iter().map(|r| trace_norm(&(r * &s))).sum::<f64>() * scale)
    };

    // σ = ψ^E is the natural feasible point; start from the better of it and 1/n
    let mixed = identity_matrix(n).unscale(n as f64);
    let mut sigma = mixed.clone();
    let mut value = objective(&sigma)?;
    let at_marginal = objective(&marginal)?;
    let mut best = (value, sigma.clone());
    if at_marginal > value {
        best = (at_marginal, marginal.clone());
    }
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let s = psd_sqrt(&sigma)?;
        let mut k = CMatrix::zeros(n, n);
        for r in &roots {
            let x = r * &s;
            let svd = x.clone().svd(true, true);
            let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
            // W = V U† maximizes Re tr(W X)
            k += v_t.adjoint() * u.adjoint() * r;
        }
        let (vals, vecs) = crate::linalg::herm_eig(&hermitize(&k))?;
        let pos = map_positive(&vals, &vecs);
        let norm = pos.norm();
        if norm == 0.0 {
            break;
        }
        let s_new = pos.unscale(norm);
        let next = hermitize(&(&s_new * &s_new));
        let next = next.unscale(trace_re(&next));
        let next_value = objective(&next)?;
        let improvement = next_value - value;
        sigma = next;
        value = next_value;
        if value > best.0 {
            best = (value, sigma.clone());
        }
        if improvement.abs() < 1e-13 {
            break;
        }
    }

    let lo = best.0.min(1.0);
    let mut hi = 1.0_f64;
    if let Some(ub) = linearized_upper(&blocks, &roots, &best.1, best.0 / scale)? {
        hi = hi.min(ub * scale);
    }
    let mut used_sdp = false;
    if hi - lo > opts.tol {
        used_sdp = true;
        let sdp = sigma_by_recovery(&blocks, d, n, opts)?;
        hi = hi.min(sdp.hi);
        // the SDP lower bound is also a rigorous lower bound on the same value
        let lo2 = sdp.lo;
        let fidelity = Enclosure::new(lo.max(lo2), hi.max(lo.max(lo2)));
        return Ok(SigmaFidelity {
            converged: fidelity.width() <= opts.tol,
            fidelity,
            sigma: best.1,
            iterations,
            used_sdp,
        });
    }
    let fidelity = Enclosure::new(lo, hi.max(lo));
    Ok(SigmaFidelity {
        converged: fidelity.width() <= opts.tol,
        fidelity,
        sigma: best.1,
        iterations,
        used_sdp,
    })
}

fn map_positive(vals: &[f64], vecs: &CMatrix) -> CMatrix {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        for i in 0..n {
            scaled[(i, j)] *= v.max(0.0);
        }
    }
    scaled * vecs.adjoint()
}

/// For concave `g(σ) = Σ_m ‖√ρ_m √σ‖₁` with supergradient
/// `G = ½ Σ_m √ρ_m (√ρ_m σ √ρ_m)^{-1/2} √ρ_m`, every density `τ` satisfies
/// `g(τ) ≤ g(σ) + λ_max(G) − tr(G σ)`. Only used when `σ` is full rank, where
/// `G` is an honest gradient.
fn linearized_upper(
    blocks: &[CMatrix],
    roots: &[CMatrix],
    sigma: &CMatrix,
    g_sigma: f64,
) -> Result<Option<f64>> {
    let (vals, _) = crate::linalg::herm_eig(sigma)?;
    let top = vals.last().copied().unwrap_or(0.0);
    if vals.first().copied().unwrap_or(0.0) <= 1e-8 * top {
        return Ok(None);
    }
    let n = sigma.nrows();
    let mut g = CMatrix::zeros(n, n);
    for (b, r) in blocks.iter().zip(roots) {
        if trace_re(b) <= 0.0 {
            continue;
        }
        let m = hermitize(&(r * sigma * r));
        g += r * psd_inv_sqrt(&m, PINV_CUTOFF) * r;
    }
    let g = hermitize(&g.scale(0.5));
    let (gv, _) = crate::linalg::herm_eig(&g)?;
    let lmax = gv.last().copied().unwrap_or(0.0);
    Ok(Some(g_sigma + lmax - trace_re(&(&g * sigma))))
}

/// `max_σ F(ρ^{AE}, π ⊗ σ) = F(A|R)` for `R` purifying `ρ^{AE}`.
fn sigma_by_recovery(blocks: &[CMatrix], d: usize, n: usize, opts: &RecoveryOptions) -> Result<Enclosure> {
    // ρ^{AE} in the measured basis: block diagonal
    let mut rho = CMatrix::zeros(d * n, d * n);
    for (m, b) in blocks.iter().enumerate() {
        rho.view_mut((m * n, m * n), (n, n)).copy_from(b);
    }
    let st = LabeledState::density_matrix(
        rho,
        vec![SystemLabel::new(A, d)?, SystemLabel::new("E", n)?],
    )?;
    let pure = st.purify(PURIFIER)?;
    let rho_ar = pure.partial_trace(&[A, PURIFIER])?;
    let rec = solve_recovery(&rho_ar.density(), d, d * n, opts)?;
    Ok(rec.fidelity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrimination::guess_prob;
    use crate::linalg::{random_density, random_pure};
    use crate::qops::{ghz, max_entangled, u_z, B, E};
    use approx::assert_abs_diff_eq;

    fn lab(name: &str, d: usize) -> SystemLabel {
        SystemLabel::new(name, d).unwrap()
    }

    fn opts(tol: f64) -> RecoveryOptions {
        RecoveryOptions {
            tol,
            ..RecoveryOptions::default()
        }
    }

    #[test]
    fn coherent_isometry_of_basis_measurement_is_copy() {
        for d in 2..5 {
            let z = Povm::basis(Basis::Z, lab(A, d)).unwrap();
            let v = coherent_isometry(&z, AP).unwrap();
            // U_Z writes (A, A′); this writes (A′, A): compare via states
            let psi = random_pure(&[lab(A, d), lab(B, 2)], d as u64).unwrap();
            let a = psi.apply(&v).unwrap();
            let b = psi.apply(&*u_z(d).unwrap()).unwrap();
            assert_abs_diff_eq!(a.inner(&b).unwrap().norm(), 1.0, epsilon = 1e-12);
        }
        let t = Povm::trivial(3, vec![lab(B, 2)]).unwrap();
        let v = coherent_isometry(&t, AP).unwrap();
        let s = 1.0 / 3.0_f64.sqrt();
        for r in 0..6 {
            for c in 0..2 {
                let expected = if r % 2 == c { s } else { 0.0 };
                assert_abs_diff_eq!(v.matrix()[(r, c)].re, expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn solver_povms_give_isometries() {
        let psi = random_pure(&[lab(A, 3), lab(B, 3)], 4).unwrap();
        let rec = optimal_recovery(&psi, 1e-9).unwrap();
        for iso in [&rec.circuit.v_z, &rec.circuit.v_x, &rec.circuit.composed] {
            assert!(iso.isometry_defect() < 1e-9);
        }
        let names: Vec<&str> = rec.circuit.composed.out_systems().iter().map(|s| s.name()).collect();
        assert_eq!(names, vec![AP, APP, B]);
    }

    #[test]
    fn max_entangled_is_recovered_exactly() {
        for d in 2..=4 {
            let phi = max_entangled(d).unwrap();
            let rec = optimal_recovery(&phi, 1e-9).unwrap();
            let f = circuit_fidelity(&phi, &rec.circuit).unwrap();
            assert_abs_diff_eq!(f, 1.0, epsilon = 1e-9);
            let opt = max_recovery_fidelity(&phi, &opts(1e-9)).unwrap();
            assert!(opt.fidelity.lo >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn separable_recovery_fidelity_is_one_over_d() {
        for d in 2..=3 {
            let pi = LabeledState::maximally_mixed(&[lab(A, d)]).unwrap();
            let sigma = random_density(&[lab(B, 3)], 2, 8).unwrap();
            let st = pi.tensor(&sigma).unwrap();
            let r = max_recovery_fidelity(&st, &opts(1e-8)).unwrap();
            assert!(r.converged, "{:?}", r.fidelity);
            assert!(r.fidelity.contains(1.0 / d as f64) || (r.fidelity.mid() - 1.0 / d as f64).abs() < 1e-9);
            assert!(r.channel.tp_residual < 1e-9);
        }
    }

    #[test]
    fn pure_product_recovery_is_one_over_sqrt_d() {
        // |0⟩^A ⊗ σ^B: ⟨Φ|(|0⟩⟨0| ⊗ τ)|Φ⟩ = ⟨0|τ|0⟩/d ≤ 1/d
        let d = 3;
        let zero = LabeledState::basis_ket(&[lab(A, d)], &[0]).unwrap();
        let st = zero.tensor(&random_density(&[lab(B, 2)], 2, 1).unwrap()).unwrap();
        let r = max_recovery_fidelity(&st, &opts(1e-8)).unwrap();
        assert_abs_diff_eq!(r.fidelity.mid(), 1.0 / (d as f64).sqrt(), epsilon = 1e-8);
    }

    #[test]
    fn recovery_dominates_circuit_and_chain_holds() {
        for (d, db, seed) in [(2, 2, 1), (2, 3, 2), (3, 2, 3), (3, 4, 4)] {
            let psi = random_pure(&[lab(A, d), lab(B, db)], seed).unwrap();
            let rec = optimal_recovery(&psi, 1e-9).unwrap();
            let chain = chain_fidelities(&psi, &rec.circuit).unwrap();
            let opt = max_recovery_fidelity(&psi, &opts(1e-8)).unwrap();
            assert!(opt.converged);
            assert!(opt.fidelity.hi >= chain.total - 1e-9);
            assert!(chain.total.acos() <= chain.x_stage.acos() + chain.z_stage.acos() + 1e-7);
            assert!(chain.z_stage >= rec.z_guess.p_primal - 1e-9);
            assert!(chain.x_stage >= rec.x_guess.p_primal - 1e-9);
            let bound = (rec.z_guess.p_primal.acos() + rec.x_guess.p_primal.acos()).cos();
            assert!(chain.total >= bound - 1e-9);
        }
    }

    #[test]
    fn mixed_inputs_are_purified() {
        let st = random_density(&[lab(A, 2), lab(B, 2)], 2, 12).unwrap();
        let rec = optimal_recovery(&st, 1e-9).unwrap();
        let f = circuit_fidelity(&st, &rec.circuit).unwrap();
        let opt = max_recovery_fidelity(&st, &opts(1e-8)).unwrap();
        assert!(opt.fidelity.hi >= f - 1e-9);
    }

    #[test]
    fn circuit_shape_checks() {
        let lambda = Povm::basis(Basis::Z, lab(B, 2)).unwrap();
        let wrong = Povm::basis(Basis::X, lab(B, 2)).unwrap();
        assert!(build_recovery(&lambda, &wrong).is_err());
        let three = Povm::trivial(3, vec![lab(AP, 2), lab(B, 2)]).unwrap();
        assert!(build_recovery(&lambda, &three).is_err());
    }

    #[test]
    fn q_fidelity_closed_forms() {
        for d in 2..=4 {
            let z = LabeledState::basis_ket(&[lab(A, d)], &[1]).unwrap();
            assert_abs_diff_eq!(q_fidelity(&z, A, Basis::Z, &[]).unwrap(), 1.0 / (d as f64).sqrt(), epsilon = 1e-12);
            let phi = max_entangled(d).unwrap();
            assert_abs_diff_eq!(q_fidelity(&phi, A, Basis::Z, &[B]).unwrap(), 1.0 / (d as f64).sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn q_fidelity_matches_direct_fidelity() {
        // build ψ_Z^{AE} and π ⊗ ψ^E explicitly and compare with the generic routine
        let d = 3;
        let st = random_pure(&[lab(A, d), lab(B, 2), lab(E, 2)], 6).unwrap();
        let e = conditional_ensemble(&st, A, Basis::Z, &[E]).unwrap();
        let mut rho = CMatrix::zeros(3 * 2, 3 * 2);
        for (m, b) in e.states().iter().enumerate() {
            rho.view_mut((m * 2, m * 2), (2, 2)).copy_from(b);
        }
        let rho = LabeledState::density_matrix(rho, vec![lab(A, d), lab(E, 2)]).unwrap();
        let sigma = LabeledState::maximally_mixed(&[lab(A, d)])
            .unwrap()
            .tensor(&st.partial_trace(&[E]).unwrap())
            .unwrap();
        let direct = crate::linalg::fidelity(&rho, &sigma).unwrap();
        assert_abs_diff_eq!(q_fidelity(&st, A, Basis::Z, &[E]).unwrap(), direct, epsilon = 1e-10);
    }

    #[test]
    fn q_of_x_on_copy_equals_fidelity_with_dephased() {
        // Q(X^A|A′E)_{ψ_Z} = F(ψ^{A′E}, ψ_Z^{A′E})
        for (d, seed) in [(2, 1), (3, 2)] {
            let st = random_pure(&[lab(A, d), lab(B, 2), lab(E, 2)], seed).unwrap();
            let pz = psi_z(&st).unwrap();
            let q = q_fidelity(&pz, A, Basis::X, &[AP, E]).unwrap();
            let plain = st.partial_trace(&[A, E]).unwrap().rename(A, AP).unwrap();
            let dephased = pz.partial_trace(&[AP, E]).unwrap();
            let f = crate::linalg::fidelity(&plain, &dephased).unwrap();
            // both sides take square roots of rank-deficient matrices, which
            // turns 1e-16 eigenvalue noise into 1e-8 noise
            assert_abs_diff_eq!(q, f, epsilon = 1e-7);
        }
    }

    #[test]
    fn copy_register_carries_the_dephased_state() {
        let d = 3;
        let st = random_pure(&[lab(A, d), lab(B, 2), lab(E, 2)], 3).unwrap();
        let twice = psi_z(&st).unwrap().apply(&*u_x(d).unwrap()).unwrap();
        let marginal = twice.partial_trace(&[AP, B, E]).unwrap();
        let rho = st.density();
        let n = 4;
        let mut dephased = CMatrix::zeros(d * n, d * n);
        for z in 0..d {
            dephased
                .view_mut((z * n, z * n), (n, n))
                .copy_from(&rho.view((z * n, z * n), (n, n)));
        }
        assert!(crate::linalg::max_abs(&(marginal.density() - dephased)) < 1e-10);
    }

    #[test]
    fn ordering_chain_on_random_states() {
        for (d, seed) in [(2, 10), (3, 11)] {
            let st = random_pure(&[lab(A, d), lab(B, 2), lab(E, 3)], seed).unwrap();
            let pz = psi_z(&st).unwrap();
            let q_ze = q_fidelity(&st, A, Basis::Z, &[E]).unwrap();
            let q_xe = q_fidelity(&pz, A, Basis::X, &[AP, E]).unwrap();
            let p_x = guess_prob(&pz, A, Basis::X, &[AP, B], 1e-9).unwrap();
            let p_z = guess_prob(&st, A, Basis::Z, &[B], 1e-9).unwrap();
            assert!(q_ze >= p_x.p_primal - 1e-7, "{q_ze} {}", p_x.p_primal);
            assert!(q_xe >= p_z.p_primal - 1e-7, "{q_xe} {}", p_z.p_primal);
        }
    }

    #[test]
    fn sigma_fidelity_trivial_environment() {
        let d = 3;
        let st = random_pure(&[lab(A, d), lab(B, 2)], 2).unwrap();
        let s = max_sigma_fidelity(&st, A, Basis::Z, &[], &opts(1e-9)).unwrap();
        let q = q_fidelity(&st, A, Basis::Z, &[]).unwrap();
        assert!(s.fidelity.contains(q) || (s.fidelity.mid() - q).abs() < 1e-9);
    }

    #[test]
    fn sigma_fidelity_dominates_q_and_guessing() {
        for (d, seed) in [(2, 1), (2, 2), (3, 3), (3, 4)] {
            let st = random_pure(&[lab(A, d), lab(B, d), lab(E, d)], seed).unwrap();
            let s = max_sigma_fidelity(&st, A, Basis::Z, &[E], &opts(1e-7)).unwrap();
            assert!(s.converged, "{:?}", s.fidelity);
            let q = q_fidelity(&st, A, Basis::Z, &[E]).unwrap();
            assert!(s.fidelity.hi >= q - 1e-12);
            let px = guess_prob(&st, A, Basis::X, &[B], 1e-9).unwrap();
            assert!(s.fidelity.lo.powi(2) >= px.p_dual - 1e-6);
        }
    }

    #[test]
    fn sigma_routes_agree() {
        let d = 2;
        let st = random_pure(&[lab(A, d), lab(B, 2), lab(E, 2)], 21).unwrap();
        let (blocks, _, _) = dephased_blocks(&st, A, Basis::Z, &[E]).unwrap();
        let sdp = sigma_by_recovery(&blocks, d, 2, &opts(1e-9)).unwrap();
        let asc = max_sigma_fidelity(&st, A, Basis::Z, &[E], &opts(1e-9)).unwrap();
        assert!((sdp.mid() - asc.fidelity.mid()).abs() < 1e-7);
    }

    #[test]
    fn ghz_sigma_fidelity() {
        // ψ_Z^{AE} = ½Σ|zz⟩⟨zz|: F(σ) = ½ Σ_z √⟨z|σ|z⟩, at most 1/√2, so the
        // relation max_σ F² ≥ P(X|B) = 1/2 is tight
        let g = ghz(2).unwrap();
        let s = max_sigma_fidelity(&g, A, Basis::Z, &[E], &opts(1e-8)).unwrap();
        assert_abs_diff_eq!(s.fidelity.mid(), 0.5_f64.sqrt(), epsilon = 1e-8);
        let e = conditional_ensemble(&g, A, Basis::X, &[B]).unwrap();
        assert_abs_diff_eq!(solve(&e, &SolverOptions::default()).unwrap().p_dual, 0.5, epsilon = 1e-9);
    }
}
