//! One checker per uncertainty relation, each producing a
//! [`RelationReport`].
//!
//! Every relation is normalized to the form `lhs ≤ rhs`, with both sides
//! carried as [`Enclosure`]s of the exact (unknown) optima. The verdict is
//! conservative:
//! - PASS when `rhs.lo − lhs.hi ≥ −tol`, so the relation holds for every
//!   value consistent with the enclosures;
//! - FAIL when `rhs.hi − lhs.lo < −tol`, so it is violated for all of them;
//! - INCONCLUSIVE otherwise.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::discrimination::{
    conditional_ensemble, shift_difference_measurement, solve, Basis, GuessCertificate,
    SolverOptions,
};
use crate::enclosure::Enclosure;
use crate::error::{Error, Result};
use crate::linalg::LabeledState;
use crate::qops::{psi_z, ThetaFamily, A, AP, E};
use crate::recovery::{
    build_recovery, chain_fidelities, max_recovery_fidelity,
    max_sigma_fidelity, q_fidelity, ChainFidelities, RecoveryCircuit, RecoveryFidelity,
    RecoveryOptions, SigmaFidelity, PURIFIER,
};

/// Relations in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RelationId {
    /// `acos F(A|B) ≤ acos P(Z^A|B) + acos P(X^A|B)`.
    Eq3,
    /// Circuit fidelity `≥ cos(acos P(Z^A|B) + acos P(X^A|BA′)_{ψ_Z})`.
    Thm1,
    /// `P(X^A|B)_ψ ≤ P(X^A|BA′)_{ψ_Z}`.
    Lemma1,
    /// `acos F(A|B) ≤ acos P(Z^A|B) + acos Q(Z^A|E)`.
    Thm2a,
    /// `acos F(A|B) ≤ acos Q(X^A|A′E)_{ψ_Z} + acos Q(Z^A|E)`.
    Thm2b,
    /// `P(Z^A|E) + (P(X^A|B) − 1/d)² ≤ 1`.
    Thm3a,
    /// `P(X^A|B) + (P(Z^A|E) − 1/d)² ≤ 1`.
    Thm3b,
    /// `P(X^A|B) ≤ (max_σ F(ψ_Z^{AE}, π ⊗ σ))²`.
    Eq13,
    /// `(2P_Z − 1)² + (2P_X − 1)² = 1` on the qubit θ family.
    QubitCircle,
    /// The second guessing trade-off rewritten in distinguishability and
    /// visibility.
    Duality,
}

impl RelationId {
    pub const ALL: [RelationId; 10] = [
        RelationId::Eq3,
        RelationId::Thm1,
        RelationId::Lemma1,
        RelationId::Thm2a,
        RelationId::Thm2b,
        RelationId::Thm3a,
        RelationId::Thm3b,
        RelationId::Eq13,
        RelationId::QubitCircle,
        RelationId::Duality,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationId::Eq3 => "EQ3",
            RelationId::Thm1 => "THM1",
            RelationId::Lemma1 => "LEMMA1",
            RelationId::Thm2a => "THM2A",
            RelationId::Thm2b => "THM2B",
            RelationId::Thm3a => "THM3A",
            RelationId::Thm3b => "THM3B",
            RelationId::Eq13 => "EQ13",
            RelationId::QubitCircle => "QUBIT_CIRCLE",
            RelationId::Duality => "DUALITY",
        }
    }
}

impl std::fmt::Display for RelationId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl Verdict {
    /// Decides `lhs ≤ rhs` within `tol`.
    pub fn decide(lhs: Enclosure, rhs: Enclosure, tol: f64) -> Self {
        if rhs.lo - lhs.hi >= -tol {
            Verdict::Pass
        } else if rhs.hi - lhs.lo < -tol {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }
}

/// Outcome of one relation on one state. Serializes as one flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationReport {
    pub relation_id: RelationId,
    pub lhs_lo: f64,
    pub lhs_hi: f64,
    pub rhs_lo: f64,
    pub rhs_hi: f64,
    /// `rhs_lo − lhs_hi`; nonnegative means the relation holds outright.
    pub slack: f64,
    pub pass: bool,
    pub verdict: Verdict,
    pub tol: f64,
    pub seed: Option<u64>,
    pub state: Option<usize>,
    /// Solver gaps, iteration counts and auxiliary values, keyed by name.
    pub diagnostics: BTreeMap<String, f64>,
}

impl RelationReport {
    pub fn new(
        relation_id: RelationId,
        lhs: Enclosure,
        rhs: Enclosure,
        tol: f64,
        diagnostics: BTreeMap<String, f64>,
    ) -> Self {
        let verdict = Verdict::decide(lhs, rhs, tol);
        Self {
            relation_id,
            lhs_lo: lhs.lo,
            lhs_hi: lhs.hi,
            rhs_lo: rhs.lo,
            rhs_hi: rhs.hi,
            slack: rhs.lo - lhs.hi,
            pass: verdict == Verdict::Pass,
            verdict,
            tol,
            seed: None,
            state: None,
            diagnostics,
        }
    }

    pub fn lhs(&self) -> Enclosure {
        Enclosure::new(self.lhs_lo, self.lhs_hi)
    }

    pub fn rhs(&self) -> Enclosure {
        Enclosure::new(self.rhs_lo, self.rhs_hi)
    }

    pub fn with_origin(mut self, seed: Option<u64>, state: Option<usize>) -> Self {
        self.seed = seed;
        self.state = state;
        self
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reports contain only plain data")
    }
}

/// Tolerances shared by the checkers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    /// Allowed slack violation in a relation.
    pub tol: f64,
    /// Target gap for the guessing and fidelity solvers.
    pub solver_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            solver_tol: 1e-7,
        }
    }
}

impl Settings {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Roundoff allowance for `acos` arguments outside `[0, 1]`.
pub const ACOS_CLAMP: f64 = 1e-9;

/// `acos` of an argument clamped to `[0, 1]`. Excursions are recorded in
/// `diag` under `acos_clamp_excess` (largest distance clamped away).
pub fn acos_clamped(x: f64, diag: &mut BTreeMap<String, f64>) -> f64 {
    let c = x.clamp(0.0, 1.0);
    let excess = (x - c).abs();
    if excess > 0.0 {
        let e = diag.entry("acos_clamp_excess".to_string()).or_insert(0.0);
        *e = e.max(excess);
        if excess > ACOS_CLAMP {
            *diag.entry("acos_clamp_beyond_roundoff".to_string()).or_insert(0.0) += 1.0;
        }
    }
    c.acos()
}

fn acos_enclosure(e: Enclosure, diag: &mut BTreeMap<String, f64>) -> Enclosure {
    Enclosure::new(acos_clamped(e.hi, diag), acos_clamped(e.lo, diag))
}

fn guess_enclosure(c: &GuessCertificate) -> Enclosure {
    Enclosure::new(c.p_primal, c.p_dual.min(1.0).max(c.p_primal))
}

/// `(p − 1/d)²` for an enclosure of a guessing probability, which is at least `1/d`.
fn excess_squared(p: Enclosure, d: usize) -> Enclosure {
    let u = 1.0 / d as f64;
    Enclosure::new((p.lo - u).max(0.0).powi(2), (p.hi - u).max(0.0).powi(2))
}

fn cached<T>(cell: &OnceCell<T>, f: impl FnOnce() -> Result<T>) -> Result<&T> {
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let v = f()?;
    Ok(cell.get_or_init(|| v))
}

fn record(diag: &mut BTreeMap<String, f64>, prefix: &str, c: &GuessCertificate) {
    diag.insert(format!("{prefix}_gap"), c.gap);
    diag.insert(format!("{prefix}_iterations"), c.iterations as f64);
}

/// The constructive recovery and the values entering its bound.
#[derive(Debug, Clone)]
pub struct Theorem1Data {
    pub circuit: RecoveryCircuit,
    pub chain: ChainFidelities,
    /// `P(X^A|A′B)_{ψ_Z}` with the POVM that feeds `V_X`.
    pub x_prime: GuessCertificate,
}

/// A state split into Alice's system [`A`], Bob's systems (every label other
/// than `A`, `E` and the purifier label) and an environment. The environment
/// is `E` when present; mixed inputs are purified so that `ψ^{ABE}` is pure.
/// Quantities are computed on first use and shared between checkers.
pub struct Analysis {
    settings: Settings,
    d: usize,
    ab: LabeledState,
    abe: LabeledState,
    bob: Vec<String>,
    env: Vec<String>,
    pz_b: OnceCell<GuessCertificate>,
    px_b: OnceCell<GuessCertificate>,
    pz_e: OnceCell<GuessCertificate>,
    thm1: OnceCell<Theorem1Data>,
    f_ab: OnceCell<RecoveryFidelity>,
    q_ze: OnceCell<f64>,
    q_xe: OnceCell<f64>,
    sigma: OnceCell<SigmaFidelity>,
}

impl Analysis {
    pub fn new(state: &LabeledState, settings: Settings) -> Result<Self> {
        let d = state.label(A)?.dim();
        if d < 2 {
            return Err(Error::OutOfRange(format!("dimension of A is {d}")));
        }
        let is_env = |n: &str| n == E || n == PURIFIER;
        let bob: Vec<String> = state
            .systems()
            .iter()
            .map(|s| s.name().to_string())
            .filter(|n| n != A && !is_env(n))
            .collect();
        let abe = if state.is_pure() {
            state.clone()
        } else {
            state.purify(if state.has_label(E) { PURIFIER } else { E })?
        };
        let env: Vec<String> = abe
            .systems()
            .iter()
            .map(|s| s.name().to_string())
            .filter(|n| is_env(n))
            .collect();
        let mut keep = vec![A];
        keep.extend(bob.iter().map(String::as_str));
        let ab = state.partial_trace(&keep)?;
        Ok(Self {
            settings,
            d,
            ab,
            abe,
            bob,
            env,
            pz_b: OnceCell::new(),
            px_b: OnceCell::new(),
            pz_e: OnceCell::new(),
            thm1: OnceCell::new(),
            f_ab: OnceCell::new(),
            q_ze: OnceCell::new(),
            q_xe: OnceCell::new(),
            sigma: OnceCell::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn settings(&self) -> Settings {
        self.settings
    }

    fn bob(&self) -> Vec<&str> {
        self.bob.iter().map(String::as_str).collect()
    }

    fn env(&self) -> Vec<&str> {
        self.env.iter().map(String::as_str).collect()
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions::with_tol(self.settings.solver_tol)
    }

    fn recovery_options(&self) -> RecoveryOptions {
        RecoveryOptions {
            tol: self.settings.solver_tol,
            ..RecoveryOptions::default()
        }
    }

    /// `P(Z^A|B)`.
    pub fn p_z_given_b(&self) -> Result<&GuessCertificate> {
        cached(&self.pz_b, || {
            solve(&conditional_ensemble(&self.ab, A, Basis::Z, &self.bob())?, &self.solver())
        })
    }

    /// `P(X^A|B)`.
    pub fn p_x_given_b(&self) -> Result<&GuessCertificate> {
        cached(&self.px_b, || {
            solve(&conditional_ensemble(&self.ab, A, Basis::X, &self.bob())?, &self.solver())
        })
    }

    /// `P(Z^A|E)`.
    pub fn p_z_given_e(&self) -> Result<&GuessCertificate> {
        cached(&self.pz_e, || {
            solve(&conditional_ensemble(&self.abe, A, Basis::Z, &self.env())?, &self.solver())
        })
    }

    pub fn theorem1(&self) -> Result<&Theorem1Data> {
        cached(&self.thm1, || {
            let pz = self.p_z_given_b()?;
            let psi = psi_z(&self.ab)?;
            let mut from = vec![AP];
            from.extend(self.bob());
            let x_prime = solve(&conditional_ensemble(&psi, A, Basis::X, &from)?, &self.solver())?;
            let circuit = build_recovery(&pz.povm, &x_prime.povm)?;
            let chain = chain_fidelities(&self.ab, &circuit)?;
            Ok(Theorem1Data {
                circuit,
                chain,
                x_prime,
            })
        })
    }

    /// `F(A|B)`.
    pub fn recovery_fidelity(&self) -> Result<&RecoveryFidelity> {
        cached(&self.f_ab, || max_recovery_fidelity(&self.ab, &self.recovery_options()))
    }

    /// `Q(Z^A|E)`.
    pub fn q_z_given_e(&self) -> Result<f64> {
        cached(&self.q_ze, || q_fidelity(&self.abe, A, Basis::Z, &self.env())).copied()
    }

    /// `Q(X^A|A′E)_{ψ_Z}`.
    pub fn q_x_given_copy_e(&self) -> Result<f64> {
        cached(&self.q_xe, || {
            let mut versus = vec![AP];
            versus.extend(self.env());
            q_fidelity(&psi_z(&self.abe)?, A, Basis::X, &versus)
        })
        .copied()
    }

    /// `max_σ F(ψ_Z^{AE}, π ⊗ σ)`.
    pub fn sigma_fidelity(&self) -> Result<&SigmaFidelity> {
        cached(&self.sigma, || {
            max_sigma_fidelity(&self.abe, A, Basis::Z, &self.env(), &self.recovery_options())
        })
    }

    fn report(
        &self,
        id: RelationId,
        lhs: Enclosure,
        rhs: Enclosure,
        diag: BTreeMap<String, f64>,
    ) -> RelationReport {
        RelationReport::new(id, lhs, rhs, self.settings.tol, diag)
    }

    pub fn check_eq3(&self) -> Result<RelationReport> {
        let mut diag = BTreeMap::new();
        let f = self.recovery_fidelity()?;
        let pz = self.p_z_given_b()?;
        let px = self.p_x_given_b()?;
        record(&mut diag, "p_z_b", pz);
        record(&mut diag, "p_x_b", px);
        diag.insert("f_ab_width".into(), f.fidelity.width());
        let lhs = acos_enclosure(f.fidelity, &mut diag);
        let rhs = acos_enclosure(guess_enclosure(pz), &mut diag)
            .add(acos_enclosure(guess_enclosure(px), &mut diag));
        Ok(self.report(RelationId::Eq3, lhs, rhs, diag))
    }

    /// Compares `cos(acos p_Z + acos p_X′)` against the circuit built from the
    /// very POVMs achieving `p_Z` and `p_X′`, so both sides are exact values
    /// of explicit objects.
    pub fn check_theorem1(&self) -> Result<RelationReport> {
        let mut diag = BTreeMap::new();
        let pz = self.p_z_given_b()?;
        let t = self.theorem1()?;
        record(&mut diag, "p_z_b", pz);
        record(&mut diag, "p_x_prime", &t.x_prime);
        let angle = acos_clamped(pz.p_primal, &mut diag) + acos_clamped(t.x_prime.p_primal, &mut diag);
        let bound = angle.min(PI).cos();
        diag.insert("z_stage".into(), t.chain.z_stage);
        diag.insert("x_stage".into(), t.chain.x_stage);
        let f = self.recovery_fidelity()?;
        diag.insert("f_ab_hi".into(), f.fidelity.hi);
        diag.insert(
            "recovery_dominates_circuit".into(),
            if f.fidelity.hi >= t.chain.total - self.settings.tol { 1.0 } else { 0.0 },
        );
        Ok(self.report(
            RelationId::Thm1,
            Enclosure::point(bound),
            Enclosure::point(t.chain.total),
            diag,
        ))
    }

    /// The right side is `P(X^A|BA′)_{ψ_Z}`, whose lower end is raised to the
    /// value of the explicit Ξ measurement built from Bob's optimal `Γ`.
    pub fn check_lemma1(&self) -> Result<RelationReport> {
        let mut diag = BTreeMap::new();
        let px = self.p_x_given_b()?;
        let t = self.theorem1()?;
        record(&mut diag, "p_x_b", px);
        record(&mut diag, "p_x_prime", &t.x_prime);
        let xi = shift_difference_measurement(&px.povm, AP)?;
        let psi = psi_z(&self.ab)?;
        let from: Vec<&str> = xi.systems().iter().map(|s| s.name()).collect();
        let xi_value = xi.value(&conditional_ensemble(&psi, A, Basis::X, &from)?)?;
        diag.insert("xi_value".into(), xi_value);
        diag.insert("xi_slack".into(), xi_value - guess_enclosure(px).hi);
        let lhs = guess_enclosure(px);
        let prime = guess_enclosure(&t.x_prime);
        let rhs = Enclosure::new(prime.lo.max(xi_value), prime.hi.max(xi_value));
        Ok(self.report(RelationId::Lemma1, lhs, rhs, diag))
    }

    /// Both bounds, plus the cross-check that the right-hand sides are
    /// ordered `THM2B ≤ THM2A ≤` (the THM1 angle), up to enclosure width.
    pub fn check_theorem2(&self) -> Result<[RelationReport; 2]> {
        let mut diag = BTreeMap::new();
        let f = self.recovery_fidelity()?;
        let pz = self.p_z_given_b()?;
        record(&mut diag, "p_z_b", pz);
        diag.insert("f_ab_width".into(), f.fidelity.width());
        let q_ze = self.q_z_given_e()?;
        let q_xe = self.q_x_given_copy_e()?;
        diag.insert("q_z_e".into(), q_ze);
        diag.insert("q_x_copy_e".into(), q_xe);
        let lhs = acos_enclosure(f.fidelity, &mut diag);
        let a_qz = acos_clamped(q_ze, &mut diag);
        let rhs_a = acos_enclosure(guess_enclosure(pz), &mut diag).add(Enclosure::point(a_qz));
        let rhs_b = Enclosure::point(acos_clamped(q_xe, &mut diag) + a_qz);

        let t = self.theorem1()?;
        let rhs_1 = acos_enclosure(guess_enclosure(pz), &mut diag)
            .add(acos_enclosure(guess_enclosure(&t.x_prime), &mut diag));
        let slack = self.settings.tol;
        let ordered = rhs_b.lo <= rhs_a.hi + slack && rhs_a.lo <= rhs_1.hi + slack;
        diag.insert("rhs_ordering_ok".into(), if ordered { 1.0 } else { 0.0 });

        Ok([
            self.report(RelationId::Thm2a, lhs, rhs_a, diag.clone()),
            self.report(RelationId::Thm2b, lhs, rhs_b, diag),
        ])
    }

    pub fn check_theorem3(&self) -> Result<[RelationReport; 2]> {
        let mut diag = BTreeMap::new();
        let pze = self.p_z_given_e()?;
        let pxb = self.p_x_given_b()?;
        record(&mut diag, "p_z_e", pze);
        record(&mut diag, "p_x_b", pxb);
        let (pz, px) = (guess_enclosure(pze), guess_enclosure(pxb));
        let one = Enclosure::point(1.0);
        Ok([
            self.report(RelationId::Thm3a, pz.add(excess_squared(px, self.d)), one, diag.clone()),
            self.report(RelationId::Thm3b, px.add(excess_squared(pz, self.d)), one, diag),
        ])
    }

    pub fn check_eq13(&self) -> Result<RelationReport> {
        let mut diag = BTreeMap::new();
        let px = self.p_x_given_b()?;
        let s = self.sigma_fidelity()?;
        record(&mut diag, "p_x_b", px);
        diag.insert("sigma_width".into(), s.fidelity.width());
        diag.insert("sigma_iterations".into(), s.iterations as f64);
        diag.insert("sigma_used_sdp".into(), if s.used_sdp { 1.0 } else { 0.0 });
        let rhs = s.fidelity.map_increasing(|f| f * f);
        Ok(self.report(RelationId::Eq13, guess_enclosure(px), rhs, diag))
    }

    pub fn duality_point(&self) -> Result<DualityPoint> {
        DualityPoint::from_guessing(
            self.d,
            guess_enclosure(self.p_z_given_e()?),
            guess_enclosure(self.p_x_given_b()?),
        )
    }

    pub fn check_duality(&self) -> Result<RelationReport> {
        let p = self.duality_point()?;
        let mut diag = BTreeMap::new();
        diag.insert("distinguishability".into(), p.distinguishability.mid());
        diag.insert("visibility_fourier".into(), p.visibility_fourier.mid());
        diag.insert(
            "squared_norm".into(),
            p.distinguishability.mid().powi(2) + p.visibility_fourier.mid().powi(2),
        );
        Ok(self.report(RelationId::Duality, p.theorem3_lhs(), Enclosure::point(1.0), diag))
    }

    /// Every state-based relation, in [`RelationId`] order.
    pub fn check_all(&self) -> Result<Vec<RelationReport>> {
        let mut out = vec![self.check_eq3()?, self.check_theorem1()?, self.check_lemma1()?];
        out.extend(self.check_theorem2()?);
        out.extend(self.check_theorem3()?);
        out.push(self.check_eq13()?);
        out.push(self.check_duality()?);
        Ok(out)
    }
}

/// Distinguishability `𝒟 = (d P(Z^A|E) − 1)/(d − 1)` and visibility
/// `𝒱 = (d P(X^A|B) − 1)/(d − 1)`, the latter for the Fourier-conjugate `X`
/// only rather than maximized over every observable conjugate to `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityPoint {
    pub d: usize,
    pub distinguishability: Enclosure,
    pub visibility_fourier: Enclosure,
}

impl DualityPoint {
    pub fn from_guessing(d: usize, p_z_e: Enclosure, p_x_b: Enclosure) -> Result<Self> {
        if d < 2 {
            return Err(Error::OutOfRange(format!("dimension {d}")));
        }
        let affine = |p: f64| (d as f64 * p - 1.0) / (d as f64 - 1.0);
        Ok(Self {
            d,
            distinguishability: p_z_e.map_increasing(affine),
            visibility_fourier: p_x_b.map_increasing(affine),
        })
    }

    /// The larger of the two trade-off expressions after substituting
    /// `P = ((d − 1)·t + 1)/d`: `((d−1)𝒟 + 1)/d + ((d−1)𝒱/d)²` and its mirror.
    pub fn theorem3_lhs(&self) -> Enclosure {
        let d = self.d as f64;
        let lin = |t: Enclosure| t.map_increasing(|t| ((d - 1.0) * t + 1.0) / d);
        let sq = |t: Enclosure| {
            let s = |t: f64| ((d - 1.0) * t.max(0.0) / d).powi(2);
            Enclosure::new(s(t.lo), s(t.hi))
        };
        let a = lin(self.distinguishability).add(sq(self.visibility_fourier));
        let b = lin(self.visibility_fourier).add(sq(self.distinguishability));
        Enclosure::new(a.lo.max(b.lo), a.hi.max(b.hi))
    }
}

pub fn check_eq3(state: &LabeledState, tol: f64) -> Result<RelationReport> {
    Analysis::new(state, Settings::with_tol(tol))?.check_eq3()
}

pub fn check_theorem1(state: &LabeledState, tol: f64) -> Result<RelationReport> {
    Analysis::new(state, Settings::with_tol(tol))?.check_theorem1()
}

pub fn check_lemma1(state: &LabeledState, tol: f64) -> Result<RelationReport> {
    Analysis::new(state, Settings::with_tol(tol))?.check_lemma1()
}

pub fn check_theorem2(state: &LabeledState, tol: f64) -> Result<[RelationReport; 2]> {
    Analysis::new(state, Settings::with_tol(tol))?.check_theorem2()
}

pub fn check_theorem3(state: &LabeledState, tol: f64) -> Result<[RelationReport; 2]> {
    Analysis::new(state, Settings::with_tol(tol))?.check_theorem3()
}

pub fn check_eq13(state: &LabeledState, tol: f64) -> Result<RelationReport> {
    Analysis::new(state, Settings::with_tol(tol))?.check_eq13()
}

pub fn duality_point(state: &LabeledState) -> Result<DualityPoint> {
    Analysis::new(state, Settings::default())?.duality_point()
}

pub fn check_duality(state: &LabeledState, tol: f64) -> Result<RelationReport> {
    Analysis::new(state, Settings::with_tol(tol))?.check_duality()
}

/// Qubit θ state with trivial B and E: Bob and Eve guess deterministically,
/// and the pair `(2P_Z − 1, 2P_X − 1)` sits on the unit circle. Reported as
/// `|(2P_Z−1)² + (2P_X−1)² − 1| ≤ 0`.
pub fn check_qubit_circle(theta: f64, tol: f64) -> Result<RelationReport> {
    let fam = ThetaFamily::new(2, theta)?;
    let (pz, px) = (fam.p_z(), fam.p_x());
    let value = (2.0 * pz - 1.0).powi(2) + (2.0 * px - 1.0).powi(2);
    let mut diag = BTreeMap::new();
    diag.insert("theta".into(), theta);
    diag.insert("p_z".into(), pz);
    diag.insert("p_x".into(), px);
    Ok(RelationReport::new(
        RelationId::QubitCircle,
        Enclosure::point((value - 1.0).abs()),
        Enclosure::point(0.0),
        tol,
        diag,
    ))
}

/// `n` evenly spaced angles covering `[0, π/2]`, endpoints included.
pub fn theta_grid(n: usize) -> Vec<f64> {
    let step = std::f64::consts::FRAC_PI_2 / (n.max(2) - 1) as f64;
    (0..n.max(2))
        .map(|i| if i + 1 == n.max(2) { std::f64::consts::FRAC_PI_2 } else { i as f64 * step })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_density, random_pure, SystemLabel};
    use crate::qops::{ghz, max_entangled, B};
    use approx::assert_abs_diff_eq;

    fn lab(name: &str, d: usize) -> SystemLabel {
        SystemLabel::new(name, d).unwrap()
    }

    #[test]
    fn verdict_directions() {
        let tol = 1e-6;
        assert_eq!(Verdict::decide(Enclosure::new(0.1, 0.2), Enclosure::new(0.3, 0.4), tol), Verdict::Pass);
        assert_eq!(Verdict::decide(Enclosure::new(0.5, 0.6), Enclosure::new(0.3, 0.4), tol), Verdict::Fail);
        assert_eq!(Verdict::decide(Enclosure::new(0.3, 0.5), Enclosure::new(0.4, 0.45), tol), Verdict::Inconclusive);
        assert_eq!(Verdict::decide(Enclosure::point(1.0), Enclosure::point(1.0 - 5e-7), tol), Verdict::Pass);
    }

    #[test]
    fn json_has_fixed_fields() {
        let r = check_qubit_circle(0.3, 1e-9).unwrap().with_origin(Some(7), Some(2));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["relation_id", "lhs_lo", "lhs_hi", "rhs_lo", "rhs_hi", "slack", "pass", "seed"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["relation_id"], "QUBIT_CIRCLE");
        assert_eq!(v["seed"], 7);
        assert_eq!(v["verdict"], "PASS");
        assert_eq!(RelationId::Thm2a.as_str(), serde_json::to_value(RelationId::Thm2a).unwrap());
    }

    #[test]
    fn acos_clamp_records_excess() {
        let mut diag = BTreeMap::new();
        assert_eq!(acos_clamped(1.0 + 1e-12, &mut diag), 0.0);
        assert!(diag["acos_clamp_excess"] > 0.0);
        assert!(!diag.contains_key("acos_clamp_beyond_roundoff"));
        acos_clamped(1.1, &mut diag);
        assert_eq!(diag["acos_clamp_beyond_roundoff"], 1.0);
    }

    #[test]
    fn max_entangled_saturates_eq3_and_theorem1() {
        for d in 2..=3 {
            let a = Analysis::new(&max_entangled(d).unwrap(), Settings::default()).unwrap();
            let eq3 = a.check_eq3().unwrap();
            assert!(eq3.pass, "{eq3:?}");
            assert!(eq3.lhs_hi < 1e-4 && eq3.rhs_hi < 1e-4);
            let t1 = a.check_theorem1().unwrap();
            assert!(t1.pass);
            assert_abs_diff_eq!(t1.rhs_lo, 1.0, epsilon = 1e-9);
            for r in a.check_all().unwrap() {
                assert_ne!(r.verdict, Verdict::Fail, "{r:?}");
            }
        }
    }

    #[test]
    fn separable_eq3_values() {
        let d = 2;
        let st = LabeledState::maximally_mixed(&[lab(A, d)])
            .unwrap()
            .tensor(&random_density(&[lab(B, 2)], 2, 4).unwrap())
            .unwrap();
        let r = check_eq3(&st, 1e-6).unwrap();
        assert!(r.pass);
        let a = (1.0 / d as f64).acos();
        assert!((r.lhs().mid() - a).abs() < 1e-6);
        assert!((r.rhs().mid() - 2.0 * a).abs() < 1e-6);
    }

    #[test]
    fn theorem1_pure_product_bound_is_p_x_prime() {
        let d = 3;
        let st = LabeledState::basis_ket(&[lab(A, d), lab(B, 2)], &[0, 1]).unwrap();
        let a = Analysis::new(&st, Settings::default()).unwrap();
        let r = a.check_theorem1().unwrap();
        let t = a.theorem1().unwrap();
        assert_abs_diff_eq!(r.lhs_lo, t.x_prime.p_primal, epsilon = 1e-9);
        assert!(r.pass);
    }

    #[test]
    fn lemma1_on_z_eigenstate() {
        let d = 3;
        let st = LabeledState::basis_ket(&[lab(A, d)], &[0])
            .unwrap()
            .tensor(&random_density(&[lab(B, 2)], 2, 1).unwrap())
            .unwrap();
        let r = check_lemma1(&st, 1e-6).unwrap();
        assert!(r.pass);
        assert_abs_diff_eq!(r.lhs().mid(), 1.0 / d as f64, epsilon = 1e-7);
        assert_abs_diff_eq!(r.rhs().mid(), 1.0 / d as f64, epsilon = 1e-7);
    }

    #[test]
    fn ghz_corner_of_theorem3() {
        let a = Analysis::new(&ghz(2).unwrap(), Settings::default()).unwrap();
        assert_abs_diff_eq!(a.p_z_given_e().unwrap().p_primal, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(a.p_x_given_b().unwrap().p_dual, 0.5, epsilon = 1e-9);
        for r in a.check_theorem3().unwrap() {
            assert!(r.pass, "{r:?}");
        }
        let p = a.duality_point().unwrap();
        assert_abs_diff_eq!(p.distinguishability.mid(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.visibility_fourier.mid(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn theorem3_for_max_entangled_with_trivial_e() {
        let a = Analysis::new(&max_entangled(2).unwrap(), Settings::default()).unwrap();
        let [r, _] = a.check_theorem3().unwrap();
        assert_abs_diff_eq!(r.lhs().mid(), 0.75, epsilon = 1e-9);
    }

    #[test]
    fn mixed_inputs_get_an_environment() {
        let st = random_density(&[lab(A, 2), lab(B, 2)], 3, 5).unwrap();
        let a = Analysis::new(&st, Settings::default()).unwrap();
        assert_eq!(a.env(), vec![E]);
        for r in a.check_all().unwrap() {
            assert_ne!(r.verdict, Verdict::Fail, "{r:?}");
        }
    }

    #[test]
    fn random_states_never_fail() {
        for seed in 0..6 {
            let d = 2 + (seed as usize % 2);
            let st = random_pure(&[lab(A, d), lab(B, 2), lab(E, d)], seed).unwrap();
            let a = Analysis::new(&st, Settings::default()).unwrap();
            let reports = a.check_all().unwrap();
            let ids: Vec<RelationId> = reports.iter().map(|r| r.relation_id).collect();
            let mut sorted = ids.clone();
            sorted.sort();
            assert_eq!(ids, sorted);
            for r in reports {
                assert_ne!(r.verdict, Verdict::Fail, "{r:?}");
                if r.relation_id == RelationId::Thm2a {
                    assert_eq!(r.diagnostic("rhs_ordering_ok"), Some(1.0));
                }
            }
        }
    }

    #[test]
    fn qubit_circle_points() {
        for theta in theta_grid(33) {
            assert!(check_qubit_circle(theta, 1e-9).unwrap().pass);
        }
        let r = check_qubit_circle(0.0, 1e-9).unwrap();
        assert_eq!(r.diagnostic("p_z"), Some(1.0));
        assert_abs_diff_eq!(r.diagnostic("p_x").unwrap(), 0.5, epsilon = 1e-15);
        let r = check_qubit_circle(std::f64::consts::FRAC_PI_4, 1e-9).unwrap();
        assert_abs_diff_eq!(r.diagnostic("p_z").unwrap(), (2.0 + 2.0_f64.sqrt()) / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn theta_grid_endpoints() {
        let g = theta_grid(257);
        assert_eq!(g.len(), 257);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[256], std::f64::consts::FRAC_PI_2);
    }
}
