//! Influence lists and the unclean-particle probability estimator.
//!
//! After each batch step, the set of particles whose initial data can have
//! influenced particle `i` is the union of its batchmates' previous sets.
//! A particle stays "clean" while its batchmates were clean and carried
//! pairwise disjoint influence sets; the clean set therefore shrinks as
//! collisions between influence sets accumulate. The probability of being
//! unclean after `k` steps is estimated by Monte Carlo over batch plans,
//! using the same partition sampler as the simulator.

use crate::error::Result;
use crate::particle::{sample_batch_plan, BatchPlan};
use crate::rng;
use rayon::prelude::*;

/// Per-particle influence sets and clean flags after `k` batch steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfluenceLists {
    pub k: usize,
    pub p: usize,
    /// Sorted index sets, one per particle.
    pub lists: Vec<Vec<u32>>,
    pub clean: Vec<bool>,
}

impl InfluenceLists {
    /// Step zero: every particle has influenced only itself and is clean.
    pub fn new(n: usize, p: usize) -> Self {
        InfluenceLists {
            k: 0,
            p,
            lists: (0..n as u32).map(|i| vec![i]).collect(),
            clean: vec![true; n],
        }
    }

    /// Reset to step zero in place, keeping allocations.
    fn reset(&mut self) {
        self.k = 0;
        for (i, list) in self.lists.iter_mut().enumerate() {
            list.clear();
            list.push(i as u32);
        }
        self.clean.fill(true);
    }

    /// Largest possible list size after `k` steps, saturating.
    pub fn size_bound(&self) -> u64 {
        (self.p as u64).checked_pow(self.k as u32).unwrap_or(u64::MAX)
    }

    /// Check that list sizes respect the `p^k` bound with equality exactly
    /// for clean particles; returns the number of offending particles.
    pub fn invariant_violations(&self) -> usize {
        let bound = self.size_bound();
        self.lists
            .iter()
            .zip(&self.clean)
            .filter(|(list, &clean)| {
                let len = list.len() as u64;
                len > bound || (len == bound) != clean
            })
            .count()
    }
}

/// Reusable buffers for the influence update.
#[derive(Default)]
struct AdvanceScratch {
    union: Vec<u32>,
    members: Vec<usize>,
    offsets: Vec<usize>,
}

/// One update of the influence recursion: every batch member receives the
/// union of its batch's lists; the batch is clean when all members were
/// clean and their lists were pairwise disjoint.
pub fn advance_lists(state: &InfluenceLists, plan: &BatchPlan) -> InfluenceLists {
    let mut out = state.clone();
    let mut scratch = AdvanceScratch::default();
    advance_lists_into(state, plan, &mut out, &mut scratch);
    out
}

/// Allocation-reusing form of [`advance_lists`]; `out` must hold the same
/// particle count and is completely overwritten.
fn advance_lists_into(
    state: &InfluenceLists,
    plan: &BatchPlan,
    out: &mut InfluenceLists,
    scratch: &mut AdvanceScratch,
) {
    let n = state.lists.len();
    debug_assert_eq!(plan.n, n);
    plan.batches_into(&mut scratch.members, &mut scratch.offsets);
    let union = &mut scratch.union;
    for q in 0..scratch.offsets.len() - 1 {
        let members = &scratch.members[scratch.offsets[q]..scratch.offsets[q + 1]];
        union.clear();
        let mut combined = 0;
        for &i in members {
            combined += state.lists[i].len();
            union.extend_from_slice(&state.lists[i]);
        }
        union.sort_unstable();
        union.dedup();
        // Pairwise disjointness is equivalent to the union reaching the
        // full combined length.
        let disjoint = union.len() == combined;
        let all_clean = members.iter().all(|&i| state.clean[i]);
        let batch_clean = disjoint && all_clean;
        for &i in members {
            out.lists[i].clone_from(union);
            out.clean[i] = batch_clean;
        }
    }
    out.k = state.k + 1;
    out.p = state.p;
}

/// Monte Carlo estimate of the probability that a tagged particle is
/// unclean after `k` batch steps.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonEstimate {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub trials: usize,
    pub epsilon_hat: f64,
    pub stderr: f64,
    /// Set when `p^k > n`, where full-size lists (and hence cleanliness)
    /// are combinatorially impossible.
    pub cleanliness_impossible: bool,
    /// Particles whose list size violated the bound/equality invariant,
    /// summed over all trials and steps. Always zero unless the recursion
    /// itself is broken.
    pub invariant_violations: usize,
}

pub fn estimate_epsilon(n: usize, p: usize, k: usize, trials: usize, seed: u64) -> Result<EpsilonEstimate> {
    // Validate the partition parameters once up front.
    sample_batch_plan(n, p, 0, seed)?;
    if trials == 0 {
        return Err(crate::error::Error::config("estimate_epsilon: trials must be positive"));
    }
    let results: Result<Vec<(bool, usize)>> = (0..trials)
        .into_par_iter()
        .map_init(
            || (InfluenceLists::new(n, p), InfluenceLists::new(n, p), AdvanceScratch::default()),
            |(state, next, scratch), trial| {
                let trial_seed = rng::derive_seed(seed, &[0x65707369, trial as u64]);
                state.reset();
                let mut violations = 0;
                for step in 0..k {
                    let plan = sample_batch_plan(n, p, step as u64, trial_seed)?;
                    advance_lists_into(state, &plan, next, scratch);
                    std::mem::swap(state, next);
                    violations += state.invariant_violations();
                }
                Ok((!state.clean[0], violations))
            },
        )
        .collect();
    let results = results?;
    let unclean = results.iter().filter(|(u, _)| *u).count();
    let violations: usize = results.iter().map(|(_, v)| v).sum();
    let eps = unclean as f64 / trials as f64;
    let stderr = (eps * (1.0 - eps) / trials as f64).sqrt();
    let bound = (p as u64).checked_pow(k as u32).unwrap_or(u64::MAX);
    Ok(EpsilonEstimate {
        n,
        p,
        k,
        trials,
        epsilon_hat: eps,
        stderr,
        cleanliness_impossible: bound > n as u64,
        invariant_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_state_is_all_clean_singletons() {
        let state = InfluenceLists::new(5, 2);
        assert_eq!(state.k, 0);
        assert!(state.clean.iter().all(|&c| c));
        assert_eq!(state.lists[3], vec![3]);
        assert_eq!(state.invariant_violations(), 0);
    }

    #[test]
    fn first_step_keeps_everyone_clean() {
        // Distinct singletons are always disjoint, so one step yields lists
        // of size exactly p and a fully clean population.
        for seed in 0..20 {
            let plan = sample_batch_plan(8, 2, 0, seed).unwrap();
            let state = advance_lists(&InfluenceLists::new(8, 2), &plan);
            assert!(state.clean.iter().all(|&c| c));
            assert!(state.lists.iter().all(|l| l.len() == 2));
            assert_eq!(state.invariant_violations(), 0);
        }
    }

    #[test]
    fn repeated_pairing_breaks_cleanliness() {
        // Two identical pairings {0,1},{2,3}: after the second step the
        // batchmates' lists coincide, so nobody is clean and lists stay at
        // size 2 < p^2 = 4.
        let plan = BatchPlan { n: 4, p: 2, assignment: vec![0, 0, 1, 1], step_index: 0 };
        let s1 = advance_lists(&InfluenceLists::new(4, 2), &plan);
        assert_eq!(s1.lists[0], vec![0, 1]);
        assert!(s1.clean[0]);
        let s2 = advance_lists(&s1, &plan);
        assert!(!s2.clean[0]);
        assert_eq!(s2.lists[0], vec![0, 1]);
        assert_eq!(s2.lists[0].len(), 2);
        assert_eq!(s2.invariant_violations(), 0);
    }

    #[test]
    fn epsilon_is_exactly_zero_for_zero_and_one_steps() {
        for k in 0..2 {
            let est = estimate_epsilon(16, 2, k, 500, 7).unwrap();
            assert_eq!(est.epsilon_hat, 0.0);
            assert_eq!(est.stderr, 0.0);
            assert_eq!(est.invariant_violations, 0);
        }
    }

    #[test]
    fn single_trial_is_deterministic() {
        let a = estimate_epsilon(32, 2, 4, 50, 3).unwrap();
        let b = estimate_epsilon(32, 2, 4, 50, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn epsilon_decreases_with_population_size() {
        let trials = 4000;
        let small = estimate_epsilon(32, 2, 3, trials, 11).unwrap();
        let large = estimate_epsilon(256, 2, 3, trials, 11).unwrap();
        assert!(
            large.epsilon_hat <= small.epsilon_hat + 2.0 * (small.stderr + large.stderr),
            "{} vs {}",
            small.epsilon_hat,
            large.epsilon_hat
        );
        assert!(small.epsilon_hat > 0.0);
    }

    #[test]
    fn epsilon_grows_with_step_count() {
        let trials = 4000;
        let short = estimate_epsilon(64, 2, 2, trials, 13).unwrap();
        let long = estimate_epsilon(64, 2, 5, trials, 13).unwrap();
        assert!(long.epsilon_hat + 2.0 * (short.stderr + long.stderr) >= short.epsilon_hat);
    }

    #[test]
    fn impossible_regime_is_flagged() {
        // p^k = 2^5 = 32 > n = 16: nobody can stay clean.
        let est = estimate_epsilon(16, 2, 5, 200, 17).unwrap();
        assert!(est.cleanliness_impossible);
        assert_eq!(est.epsilon_hat, 1.0);
        assert_eq!(est.invariant_violations, 0);
    }

    #[test]
    fn invariants_hold_across_random_runs() {
        for trial in 0..30 {
            let mut state = InfluenceLists::new(64, 4);
            for step in 0..4 {
                let plan = sample_batch_plan(64, 4, step, 1000 + trial).unwrap();
                state = advance_lists(&state, &plan);
                assert_eq!(state.invariant_violations(), 0);
                let bound = state.size_bound();
                for (list, &clean) in state.lists.iter().zip(&state.clean) {
                    assert!((list.len() as u64) <= bound);
                    assert_eq!(list.len() as u64 == bound, clean);
                }
            }
        }
    }
}
