//! Brute-force nearest-neighbour matching with either a constant Hamming
//! threshold or the fuzzy decision.

use rayon::prelude::*;
use thiserror::Error;

use crate::features::{hamming_bits, BinaryDescriptor};
use crate::fuzzy::{decide_bits, FuzzyMatcherConfig};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchError {
    #[error("descriptor set B is empty")]
    EmptyTargetSet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchCandidate {
    pub index_a: usize,
    pub index_b: usize,
    pub distance_bits: u32,
    /// Set only by the fuzzy matcher.
    pub degree: Option<f64>,
}

/// Index and distance of the closest descriptor in `set`; ties go to the
/// smallest index.
pub fn nearest_neighbor(
    a: &BinaryDescriptor,
    set: &[BinaryDescriptor],
) -> Result<(usize, u32), MatchError> {
    let mut best = (usize::MAX, u32::MAX);
    for (j, b) in set.iter().enumerate() {
        let d = hamming_bits(a, b);
        if d < best.1 {
            best = (j, d);
        }
    }
    if set.is_empty() {
        Err(MatchError::EmptyTargetSet)
    } else {
        Ok(best)
    }
}

/// Decision rule applied to each nearest neighbour.
#[derive(Debug, Clone, Copy)]
pub enum Rule<'a> {
    /// Accept iff `distance < t`.
    Constant(u32),
    Fuzzy(&'a FuzzyMatcherConfig),
}

impl Rule<'_> {
    #[inline]
    fn apply(&self, index_a: usize, index_b: usize, distance_bits: u32) -> Option<MatchCandidate> {
        match *self {
            Rule::Constant(t) => (distance_bits < t).then_some(MatchCandidate {
                index_a,
                index_b,
                distance_bits,
                degree: None,
            }),
            Rule::Fuzzy(cfg) => {
                let dec = decide_bits(cfg, distance_bits);
                dec.is_match.then_some(MatchCandidate {
                    index_a,
                    index_b,
                    distance_bits,
                    degree: Some(dec.degree),
                })
            }
        }
    }
}

/// Runs `rule` over every descriptor of `set_a`. Output is ordered by
/// `index_a` whether or not `parallel` is set.
pub fn match_sets(
    set_a: &[BinaryDescriptor],
    set_b: &[BinaryDescriptor],
    rule: Rule<'_>,
    parallel: bool,
) -> Result<Vec<MatchCandidate>, MatchError> {
    if set_b.is_empty() {
        return Err(MatchError::EmptyTargetSet);
    }
    let one = |(i, a): (usize, &BinaryDescriptor)| {
        let (j, d) = nearest_neighbor(a, set_b).expect("set_b is non-empty");
        rule.apply(i, j, d)
    };
    Ok(if parallel {
        // indexed par_iter preserves order on collect
        set_a.par_iter().enumerate().filter_map(one).collect()
    } else {
        set_a.iter().enumerate().filter_map(one).collect()
    })
}

/// Constant-threshold matching: emit the nearest neighbour iff its distance
/// is strictly below `t`. Any `t > 256` accepts every nearest neighbour.
pub fn match_constant(
    set_a: &[BinaryDescriptor],
    set_b: &[BinaryDescriptor],
    t: u32,
) -> Result<Vec<MatchCandidate>, MatchError> {
    match_sets(set_a, set_b, Rule::Constant(t), false)
}

pub fn match_fuzzy(
    set_a: &[BinaryDescriptor],
    set_b: &[BinaryDescriptor],
    cfg: &FuzzyMatcherConfig,
) -> Result<Vec<MatchCandidate>, MatchError> {
    match_sets(set_a, set_b, Rule::Fuzzy(cfg), false)
}
