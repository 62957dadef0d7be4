use serde::Serialize;

use super::{orientation, LoadVector};
use crate::rng::{edge_stream, CounterRng, Purpose};
use crate::schedule::Matching;

/// Token locations and heights. `stacks[u]` lists the tokens on `u` from
/// height 1 upwards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenState {
    stacks: Vec<Vec<u32>>,
    location: Vec<usize>,
    height: Vec<u32>,
}

impl TokenState {
    /// Tokens numbered in node order, then bottom to top.
    pub fn new(x: &LoadVector) -> Self {
        let total = x.total() as usize;
        assert!(total <= u32::MAX as usize, "token count exceeds u32");
        let mut stacks = Vec::with_capacity(x.n());
        let mut location = Vec::with_capacity(total);
        let mut height = Vec::with_capacity(total);
        let mut next = 0u32;
        for (u, &load) in x.loads().iter().enumerate() {
            let stack: Vec<u32> = (next..next + load as u32).collect();
            for h in 1..=load as u32 {
                location.push(u);
                height.push(h);
            }
            next += load as u32;
            stacks.push(stack);
        }
        Self {
            stacks,
            location,
            height,
        }
    }

    /// State from explicit stacks (bottom first); token ids must be `0..count`, each once.
    pub fn from_stacks(stacks: Vec<Vec<u32>>) -> Result<Self, String> {
        let count: usize = stacks.iter().map(Vec::len).sum();
        let mut location = vec![usize::MAX; count];
        let mut height = vec![0; count];
        for (u, s) in stacks.iter().enumerate() {
            for (h, &tok) in s.iter().enumerate() {
                let slot = location
                    .get_mut(tok as usize)
                    .ok_or_else(|| format!("token id {tok} out of range"))?;
                if *slot != usize::MAX {
                    return Err(format!("token {tok} placed twice"));
                }
                *slot = u;
                height[tok as usize] = h as u32 + 1;
            }
        }
        Ok(Self {
            stacks,
            location,
            height,
        })
    }

    pub fn n(&self) -> usize {
        self.stacks.len()
    }

    pub fn token_count(&self) -> usize {
        self.location.len()
    }

    pub fn stack(&self, u: usize) -> &[u32] {
        &self.stacks[u]
    }

    pub fn location(&self, token: u32) -> usize {
        self.location[token as usize]
    }

    pub fn height(&self, token: u32) -> u32 {
        self.height[token as usize]
    }

    pub fn heights(&self) -> &[u32] {
        &self.height
    }

    pub fn locations(&self) -> &[usize] {
        &self.location
    }

    pub fn load(&self, u: usize) -> i64 {
        self.stacks[u].len() as i64
    }

    pub fn loads(&self) -> Vec<i64> {
        self.stacks.iter().map(|s| s.len() as i64).collect()
    }

    pub fn load_vector(&self) -> LoadVector {
        LoadVector::new(self.loads()).expect("token loads are valid")
    }

    /// Heights on each node are exactly `1..=load` and the cached location
    /// and height of every token agree with the stacks.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = vec![false; self.token_count()];
        for (u, s) in self.stacks.iter().enumerate() {
            for (h, &tok) in s.iter().enumerate() {
                let t = tok as usize;
                if t >= seen.len() || seen[t] {
                    return Err(format!("token {tok} missing or duplicated"));
                }
                seen[t] = true;
                if self.location[t] != u || self.height[t] != h as u32 + 1 {
                    return Err(format!("token {tok} bookkeeping is stale"));
                }
            }
        }
        Ok(())
    }

    fn reindex(&mut self, u: usize) {
        for (h, &tok) in self.stacks[u].iter().enumerate() {
            self.location[tok as usize] = u;
            self.height[tok as usize] = h as u32 + 1;
        }
    }
}

impl TokenState {
    /// Balances the edge `{a, b}` with explicit random choices: `swap` is
    /// asked once per sibling level from the bottom, and `excess_to_heavier`
    /// once when the pair's total is odd. Returns the node that played `u`.
    /// `a` must be the smaller id; on equal loads it plays `u`.
    pub fn balance_pair(
        &mut self,
        a: usize,
        b: usize,
        mut swap: impl FnMut() -> bool,
        excess_to_heavier: impl FnOnce() -> bool,
    ) -> usize {
        let (u, v) = if self.stacks[a].len() >= self.stacks[b].len() {
            (a, b)
        } else {
            (b, a)
        };
        let (xu, xv) = (self.stacks[u].len(), self.stacks[v].len());
        let moving = (xu - xv).div_ceil(2);
        let top = self.stacks[u].split_off(xu - moving);
        self.stacks[v].extend(top);
        for h in 0..self.stacks[u].len() {
            if swap() {
                let tu = self.stacks[u][h];
                self.stacks[u][h] = std::mem::replace(&mut self.stacks[v][h], tu);
            }
        }
        if (xu + xv) % 2 == 1 && excess_to_heavier() {
            let tok = self.stacks[v].pop().expect("odd pair has an excess token");
            self.stacks[u].push(tok);
        }
        self.reindex(u);
        self.reindex(v);
        u
    }
}

/// Number of random choices [`TokenState::balance_pair`] consumes for a pair
/// holding `total` tokens.
pub fn pair_choice_count(total: usize) -> u32 {
    (total / 2 + total % 2) as u32
}

/// One round of the height-sensitive process. The excess token follows the
/// standard orientation for `seed`, so loads agree with [`super::step_standard`].
pub fn step_height(s: &mut TokenState, m: &Matching, seed: u64) {
    for &(p, q) in &m.pairs {
        let (a, b) = (p.min(q), p.max(q));
        let mut bits = CounterRng::new(seed, m.round, edge_stream(a, b), Purpose::Shuffle).bits();
        let heavier_is_a = s.stacks[a].len() >= s.stacks[b].len();
        s.balance_pair(
            a,
            b,
            || bits.bit(),
            || {
                let ceil_to_smaller = orientation(seed, m.round, a, b) > 0;
                ceil_to_smaller == heavier_is_a
            },
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::step_standard;

    #[test]
    fn moving_step_matches_the_figure() {
        // u = node 0 holds tokens 0..7, v = node 1 holds 7, 8
        let mut s = TokenState::new(&LoadVector::new(vec![7, 2]).unwrap());
        assert_eq!(s.stack(1), &[7, 8]);
        let m = Matching::new(1, vec![(0, 1)]);
        step_height(&mut s, &m, 5);
        s.check_invariants().unwrap();
        let mut all: Vec<u32> = s.stack(0).iter().chain(s.stack(1)).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..9).collect::<Vec<_>>());
        // bottom four levels are siblings {0,7}, {1,8}, {2,4}, {3,5}; 6 is the excess
        for (h, pair) in [[0, 7], [1, 8], [2, 4], [3, 5]].iter().enumerate() {
            let mut got = [s.stack(0)[h], s.stack(1)[h]];
            got.sort_unstable();
            assert_eq!(&got, pair);
        }
        let top = if s.load(0) == 5 {
            s.stack(0)[4]
        } else {
            s.stack(1)[4]
        };
        assert_eq!(top, 6);
    }

    #[test]
    fn moving_step_without_shuffle_or_excess() {
        // with every random bit fixed, the moved block keeps its order
        let mut s = TokenState::from_stacks(vec![(0..7).collect(), vec![7, 8]]).unwrap();
        assert_eq!(s.balance_pair(0, 1, || false, || false), 0);
        assert_eq!(s.stack(0), &[0, 1, 2, 3]);
        assert_eq!(s.stack(1), &[7, 8, 4, 5, 6]);
    }

    #[test]
    fn equal_loads_only_shuffle() {
        for seed in 0..20 {
            let mut s = TokenState::new(&LoadVector::new(vec![3, 3]).unwrap());
            step_height(&mut s, &Matching::new(1, vec![(0, 1)]), seed);
            assert_eq!(s.loads(), vec![3, 3]);
            for t in 0..6 {
                assert_eq!(s.height(t), t % 3 + 1);
            }
        }
    }

    #[test]
    fn two_tokens_split() {
        let mut outcomes = std::collections::BTreeSet::new();
        for seed in 0..64 {
            let mut s = TokenState::new(&LoadVector::new(vec![2, 0]).unwrap());
            step_height(&mut s, &Matching::new(1, vec![(0, 1)]), seed);
            assert_eq!(s.loads(), vec![1, 1]);
            outcomes.insert((s.stack(0)[0], s.stack(1)[0]));
        }
        assert_eq!(
            outcomes.into_iter().collect::<Vec<_>>(),
            vec![(0, 1), (1, 0)]
        );
    }

    #[test]
    fn loads_agree_with_standard_engine() {
        for seed in 0..300 {
            for (a, b) in [(7, 2), (2, 7), (0, 1), (5, 5), (4, 1)] {
                let x = LoadVector::new(vec![a, b, 3]).unwrap();
                let m = Matching::new(3, vec![(0, 1)]);
                let mut s = TokenState::new(&x);
                step_height(&mut s, &m, seed);
                let mut y = x.clone();
                step_standard(&mut y, &m, seed, false, None).unwrap();
                assert_eq!(s.loads(), y.loads().to_vec());
            }
        }
    }
}
