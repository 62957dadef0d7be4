use super::{run, LoadVector, ProcessError, StandardEngine};
use crate::schedule::ScheduleModel;

/// Runs the standard process from `x` and, with every orientation negated,
/// from `k·1 − x`. Both traces include round 0.
pub fn coupled_flip_run(
    x: &LoadVector,
    k: i64,
    model: &ScheduleModel,
    rounds: u64,
    seed: u64,
) -> Result<(Vec<LoadVector>, Vec<LoadVector>), ProcessError> {
    let complement = x.complement(k)?;
    let mut original = Vec::with_capacity(rounds as usize + 1);
    let mut flipped = Vec::with_capacity(rounds as usize + 1);
    run(
        &mut StandardEngine::new(x.clone(), seed),
        model,
        rounds,
        |_, s| original.push(s.clone()),
    )?;
    run(
        &mut StandardEngine::new(complement, seed).flipped(),
        model,
        rounds,
        |_, s| flipped.push(s.clone()),
    )?;
    Ok((original, flipped))
}
