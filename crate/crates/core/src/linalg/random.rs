use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{check_unique, total_dim, CVector, LabeledState, SystemLabel, C64};
use crate::error::{Error, Result};

/// Portable seeded generator; identical streams on every platform.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Haar-random pure state: a normalized complex Gaussian vector.
pub fn random_pure(systems: &[SystemLabel], seed: u64) -> Result<LabeledState> {
    random_pure_with(systems, &mut seeded_rng(seed))
}

pub fn random_pure_with<R: Rng + ?Sized>(
    systems: &[SystemLabel],
    rng: &mut R,
) -> Result<LabeledState> {
    check_unique(systems)?;
    let n = total_dim(systems);
    let v = CVector::from_fn(n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let norm = v.norm();
    LabeledState::pure(v.unscale(norm), systems.to_vec())
}

/// Mixed state of the given rank: the marginal of a Haar-random pure state
/// on `systems ⊗ ancilla(rank)` (the induced Hilbert–Schmidt ensemble).
pub fn random_density(systems: &[SystemLabel], rank: usize, seed: u64) -> Result<LabeledState> {
    random_density_with(systems, rank, &mut seeded_rng(seed))
}

pub fn random_density_with<R: Rng + ?Sized>(
    systems: &[SystemLabel],
    rank: usize,
    rng: &mut R,
) -> Result<LabeledState> {
    let n = total_dim(systems);
    if rank == 0 || rank > n {
        return Err(Error::OutOfRange(format!(
            "rank {rank} for total dimension {n}"
        )));
    }
    let anc_name = (0..)
        .map(|i| format!("_anc{i}"))
        .find(|name| systems.iter().all(|s| s.name() != name))
        .expect("infinitely many candidate names");
    let mut all = systems.to_vec();
    all.push(SystemLabel::new(anc_name.clone(), rank)?);
    let psi = random_pure_with(&all, rng)?;
    psi.trace_out(&[anc_name.as_str()])
}
