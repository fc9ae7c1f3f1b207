//! Permutations of site indices.
//!
//! Both the agent placement `s` and the action `a` are permutations of the
//! sites: component `i` is the (0-based) site occupied by agent `i`. Agents
//! `0..M` are the active servers, the rest are passive placeholders.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Hard ceiling on `N` for full permutation enumeration.
pub const ENUMERATION_GUARD: usize = 8;

/// A permutation of `{0, .., n-1}`; component `i` is the site of agent `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    /// Builds a permutation after checking bijectivity.
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &v in &mapping {
            if v >= n || seen[v] {
                return Err(Error::InvalidParameter(format!(
                    "not a permutation of 0..{n}: {mapping:?}"
                )));
            }
            seen[v] = true;
        }
        Ok(Self(mapping))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Site occupied by agent `i`.
    pub fn site_of(&self, agent: usize) -> usize {
        self.0[agent]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Agent occupying site `j`.
    pub fn agent_at(&self, site: usize) -> usize {
        self.0.iter().position(|&v| v == site).expect("valid site")
    }

    /// Lexicographic rank among all permutations of the same length.
    pub fn rank(&self) -> usize {
        let n = self.0.len();
        let mut rank = 0usize;
        let mut fact = factorial(n);
        for i in 0..n {
            fact /= n - i;
            let smaller = self.0[i + 1..].iter().filter(|&&v| v < self.0[i]).count();
            rank += smaller * fact;
        }
        rank
    }

    /// Inverse of [`Permutation::rank`] (Lehmer decoding).
    pub fn unrank(n: usize, mut rank: usize) -> Self {
        let mut avail: Vec<usize> = (0..n).collect();
        let mut fact = factorial(n);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            fact /= n - i;
            let idx = rank / fact;
            rank %= fact;
            out.push(avail.remove(idx));
        }
        Self(out)
    }
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// All `n!` permutations in lexicographic order. Guarded: full enumeration is
/// only meant for the exact oracle path.
pub fn enumerate_permutations(n: usize) -> Result<Vec<Permutation>> {
    if n == 0 || n > ENUMERATION_GUARD {
        return Err(Error::GuardExceeded(format!(
            "permutation enumeration supports 1..={ENUMERATION_GUARD} sites, got {n}"
        )));
    }
    let count = factorial(n);
    Ok((0..count).map(|r| Permutation::unrank(n, r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_element() {
        let perms = enumerate_permutations(1).unwrap();
        assert_eq!(perms, vec![Permutation::new(vec![0]).unwrap()]);
    }

    #[test]
    fn lexicographic_order_n3() {
        let perms = enumerate_permutations(3).unwrap();
        assert_eq!(perms.len(), 6);
        assert_eq!(perms[0].as_slice(), &[0, 1, 2]);
        assert_eq!(perms[5].as_slice(), &[2, 1, 0]);
        let mut sorted = perms.clone();
        sorted.sort();
        assert_eq!(sorted, perms);
    }

    #[test]
    fn count_n4() {
        assert_eq!(enumerate_permutations(4).unwrap().len(), 24);
    }

    #[test]
    fn guard_enforced() {
        assert!(enumerate_permutations(9).is_err());
        assert!(enumerate_permutations(0).is_err());
    }

    #[test]
    fn rank_unrank_roundtrip() {
        for n in 1..=5 {
            for r in 0..factorial(n) {
                let p = Permutation::unrank(n, r);
                assert_eq!(p.rank(), r);
            }
        }
    }

    #[test]
    fn rejects_non_permutation() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![1, 2]).is_err());
    }

    #[test]
    fn agent_at_inverts_site_of() {
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        for agent in 0..3 {
            assert_eq!(p.agent_at(p.site_of(agent)), agent);
        }
    }
}
