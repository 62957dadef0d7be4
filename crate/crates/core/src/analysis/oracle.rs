use serde::Serialize;

use super::AnalysisError;
use crate::exact::Dyadic;
use crate::graph::Graph;
use crate::matrix::DenseMatrix;
use crate::process::{pair_choice_count, LoadVector, TokenState};
use crate::schedule::Matching;

/// Largest number of random choices along any enumerated path.
pub const BIT_BUDGET: u32 = 24;

/// One branch of the enumeration, with probability `2^-bits`.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub bits: u32,
    pub state: TokenState,
}

impl Outcome {
    /// Probability in units of `2^-BIT_BUDGET`.
    pub fn weight(&self) -> i128 {
        1i128 << (BIT_BUDGET - self.bits)
    }
}

fn extend(outcomes: &[Outcome], a: usize, b: usize) -> Result<Vec<Outcome>, AnalysisError> {
    let mut next = Vec::with_capacity(outcomes.len() * 2);
    for o in outcomes {
        let total = (o.state.load(a) + o.state.load(b)) as usize;
        let k = pair_choice_count(total);
        if o.bits + k > BIT_BUDGET {
            return Err(AnalysisError::BitBudget { budget: BIT_BUDGET });
        }
        for mask in 0u32..1 << k {
            let mut state = o.state.clone();
            let mut i = 0;
            state.balance_pair(
                a,
                b,
                || {
                    i += 1;
                    mask >> (i - 1) & 1 == 1
                },
                || mask >> (k - 1) & 1 == 1,
            );
            next.push(Outcome {
                bits: o.bits + k,
                state,
            });
        }
    }
    Ok(next)
}

/// Every outcome of the height process over `edges` (one edge per round)
/// from `initial`.
pub fn enumerate_outcomes(
    initial: &TokenState,
    edges: &[(usize, usize)],
) -> Result<Vec<Outcome>, AnalysisError> {
    let mut outcomes = vec![Outcome {
        bits: 0,
        state: initial.clone(),
    }];
    for &(u, v) in edges {
        outcomes = extend(&outcomes, u.min(v), u.max(v))?;
    }
    Ok(outcomes)
}

/// A fixed single-edge sequence, a start configuration, a token subset and a
/// destination set.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub graph: Graph,
    pub sequence: Vec<(usize, usize)>,
    pub initial: TokenState,
    pub subset: Vec<u32>,
    pub dest: Vec<usize>,
}

impl OracleInstance {
    fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |m: String| Err(AnalysisError::InvalidInstance(m));
        if self.initial.n() != self.graph.n() {
            return bad("token state and graph disagree on n".into());
        }
        if let Some(&(u, v)) = self
            .sequence
            .iter()
            .find(|&&(u, v)| !self.graph.has_edge(u, v))
        {
            return bad(format!("{{{u}, {v}}} is not an edge"));
        }
        if let Some(t) = self
            .subset
            .iter()
            .find(|&&t| t as usize >= self.initial.token_count())
        {
            return bad(format!("token {t} does not exist"));
        }
        if let Some(d) = self.dest.iter().find(|&&d| d >= self.graph.n()) {
            return bad(format!("node {d} does not exist"));
        }
        Ok(())
    }

    fn window(&self) -> DenseMatrix<Dyadic> {
        let mut m = DenseMatrix::identity(self.graph.n());
        for &(u, v) in &self.sequence {
            m.right_apply_matching(&[(u.min(v), u.max(v))]);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NaResult {
    pub joint: Dyadic,
    pub product: Dyadic,
    pub pass: bool,
}

/// Exact probability that every token of the subset ends in the destination
/// set, against the product of the window's row masses.
pub fn na_oracle(inst: &OracleInstance) -> Result<NaResult, AnalysisError> {
    inst.validate()?;
    let outcomes = enumerate_outcomes(&inst.initial, &inst.sequence)?;
    let in_dest = |v: usize| inst.dest.contains(&v);
    let hits: i128 = outcomes
        .iter()
        .filter(|o| inst.subset.iter().all(|&t| in_dest(o.state.location(t))))
        .map(Outcome::weight)
        .sum();
    let joint = Dyadic::new(hits, BIT_BUDGET);
    let m = inst.window();
    let product = inst.subset.iter().fold(Dyadic::ONE, |acc, &t| {
        acc * m.row_mass(inst.initial.location(t), inst.dest.iter().copied())
    });
    Ok(NaResult {
        pass: joint <= product,
        joint,
        product,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkLaw {
    pub distribution: Vec<Dyadic>,
    pub row: Vec<Dyadic>,
    pub equal: bool,
}

/// Exact location law of `token` against its start node's window row.
pub fn walk_law_oracle(inst: &OracleInstance, token: u32) -> Result<WalkLaw, AnalysisError> {
    inst.validate()?;
    if token as usize >= inst.initial.token_count() {
        return Err(AnalysisError::InvalidInstance(format!(
            "token {token} does not exist"
        )));
    }
    let outcomes = enumerate_outcomes(&inst.initial, &inst.sequence)?;
    let mut counts = vec![0i128; inst.graph.n()];
    for o in &outcomes {
        counts[o.state.location(token)] += o.weight();
    }
    let distribution: Vec<Dyadic> = counts
        .into_iter()
        .map(|c| Dyadic::new(c, BIT_BUDGET))
        .collect();
    let row = inst.window().row(inst.initial.location(token)).to_vec();
    Ok(WalkLaw {
        equal: distribution == row,
        distribution,
        row,
    })
}

/// Exact expected number of tokens sharing a node with the top token of `u`
/// after `matchings`, starting from the canonical token state of `x`.
pub fn collision_exact(
    x: &LoadVector,
    matchings: &[Matching],
    u: usize,
) -> Result<Dyadic, AnalysisError> {
    let state = TokenState::new(x);
    let token = *state
        .stack(u)
        .last()
        .ok_or(AnalysisError::NoTokenOnNode(u))?;
    let edges: Vec<(usize, usize)> = matchings
        .iter()
        .flat_map(|m| m.pairs.iter().copied())
        .collect();
    let outcomes = enumerate_outcomes(&state, &edges)?;
    let total: i128 = outcomes
        .iter()
        .map(|o| o.weight() * i128::from(o.state.load(o.state.location(token)) - 1))
        .sum();
    Ok(Dyadic::new(total, BIT_BUDGET))
}

/// All connected labelled graphs on `n` nodes.
pub fn connected_graphs(n: usize) -> Vec<Graph> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .collect();
    (0u32..1 << pairs.len())
        .filter_map(|mask| {
            let edges = pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &e)| e);
            Graph::from_edges(n, edges).ok()
        })
        .collect()
}

/// Load vectors of length `n` with total between 1 and `max_tokens`.
fn placements(n: usize, max_tokens: usize) -> Vec<Vec<i64>> {
    fn rec(n: usize, left: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur.push(k as i64);
            rec(n, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, max_tokens, &mut Vec::new(), &mut out);
    out.retain(|p| p.iter().sum::<i64>() > 0);
    out
}

/// Aggregate verdicts over the exhaustive family.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FamilySummary {
    pub graphs: usize,
    pub instances: usize,
    pub na_checks: u64,
    pub na_failures: u64,
    pub walk_checks: u64,
    pub walk_failures: u64,
    pub examples: Vec<String>,
}

impl FamilySummary {
    pub fn pass(&self) -> bool {
        self.na_failures == 0 && self.walk_failures == 0
    }

    fn record(
        &mut self,
        what: &str,
        graph: &Graph,
        seq: &[(usize, usize)],
        place: &[i64],
        detail: String,
    ) {
        if self.examples.len() < 10 {
            self.examples.push(format!(
                "{what}: edges {:?}, sequence {seq:?}, loads {place:?}: {detail}",
                graph.edges()
            ));
        }
    }

    /// Checks every token subset and destination set for one instance.
    fn check(
        &mut self,
        graph: &Graph,
        seq: &[(usize, usize)],
        place: &[i64],
        start: &[usize],
        m: &DenseMatrix<Dyadic>,
        outcomes: &[Outcome],
    ) {
        let n = graph.n();
        let tokens = start.len();
        let nb = 1usize << tokens;
        let nd = 1usize << n;
        // joint[b][l]: mass of outcomes whose subset b occupies exactly node set l
        let mut joint = vec![0i128; nb * nd];
        let mut occ = vec![0usize; nb];
        for o in outcomes {
            let w = o.weight();
            for b in 1..nb {
                let low = b.trailing_zeros() as usize;
                occ[b] = occ[b & (b - 1)] | 1 << o.state.location(low as u32);
                joint[b * nd + occ[b]] += w;
            }
        }
        for b in 1..nb {
            let row = &mut joint[b * nd..(b + 1) * nd];
            for bit in 0..n {
                for l in 0..nd {
                    if l >> bit & 1 == 1 {
                        row[l] += row[l ^ 1 << bit];
                    }
                }
            }
        }
        // mass[u][d] = Σ_{v ∈ d} M_{u,v}
        let mut mass = vec![Dyadic::ZERO; n * nd];
        for u in 0..n {
            for d in 1..nd {
                let low = d.trailing_zeros() as usize;
                mass[u * nd + d] = mass[u * nd + (d & (d - 1))] + *m.get(u, low);
            }
        }
        let mut prod = vec![Dyadic::ONE; nb];
        for d in 0..nd {
            for b in 1..nb {
                let low = b.trailing_zeros() as usize;
                prod[b] = prod[b & (b - 1)] * mass[start[low] * nd + d];
                let j = Dyadic::new(joint[b * nd + d], BIT_BUDGET);
                self.na_checks += 1;
                if j > prod[b] {
                    self.na_failures += 1;
                    self.record(
                        "joint exceeds product",
                        graph,
                        seq,
                        place,
                        format!("subset {b:b}, dest {d:b}: {j} > {}", prod[b]),
                    );
                }
            }
        }
        for (i, &w) in start.iter().enumerate() {
            let b = 1 << i;
            for v in 0..n {
                self.walk_checks += 1;
                let law = Dyadic::new(joint[b * nd + (1 << v)], BIT_BUDGET);
                if law != *m.get(w, v) {
                    self.walk_failures += 1;
                    self.record(
                        "walk law differs",
                        graph,
                        seq,
                        place,
                        format!("token {i} at node {v}: {law} vs {}", m.get(w, v)),
                    );
                }
            }
        }
    }
}

/// Negative association and walk-law checks over every connected graph with
/// up to `max_n` nodes, every single-edge sequence of length up to `max_len`,
/// every placement of up to `max_tokens` tokens, every token subset and every
/// destination set.
pub fn exhaustive_family(
    max_n: usize,
    max_len: usize,
    max_tokens: usize,
) -> Result<FamilySummary, AnalysisError> {
    assert!(
        max_n <= 8 && max_tokens <= 16,
        "family too large for bitmask bookkeeping"
    );
    let mut summary = FamilySummary::default();
    for n in 1..=max_n {
        for graph in connected_graphs(n) {
            summary.graphs += 1;
            for place in placements(n, max_tokens) {
                let x = LoadVector::new(place.clone()).expect("small placement");
                let initial = TokenState::new(&x);
                let start: Vec<usize> = initial.locations().to_vec();
                let root = vec![Outcome {
                    bits: 0,
                    state: initial,
                }];
                let mut seq = Vec::new();
                explore(
                    &graph,
                    &place,
                    &start,
                    max_len,
                    &mut seq,
                    &DenseMatrix::identity(n),
                    &root,
                    &mut summary,
                )?;
            }
        }
    }
    Ok(summary)
}

#[allow(clippy::too_many_arguments)]
fn explore(
    graph: &Graph,
    place: &[i64],
    start: &[usize],
    depth: usize,
    seq: &mut Vec<(usize, usize)>,
    m: &DenseMatrix<Dyadic>,
    outcomes: &[Outcome],
    summary: &mut FamilySummary,
) -> Result<(), AnalysisError> {
    summary.instances += 1;
    summary.check(graph, seq, place, start, m, outcomes);
    if depth == 0 {
        return Ok(());
    }
    for &(u, v) in graph.edges() {
        let next = extend(outcomes, u, v)?;
        let mut mm = m.clone();
        mm.right_apply_matching(&[(u, v)]);
        seq.push((u, v));
        explore(graph, place, start, depth - 1, seq, &mm, &next, summary)?;
        seq.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::complete;

    fn k2_two_on_u() -> OracleInstance {
        OracleInstance {
            graph: complete(2).unwrap(),
            sequence: vec![(0, 1)],
            initial: TokenState::new(&LoadVector::new(vec![2, 0]).unwrap()),
            subset: vec![0, 1],
            dest: vec![1],
        }
    }

    #[test]
    fn na_examples() {
        let r = na_oracle(&k2_two_on_u()).unwrap();
        assert_eq!(r.joint, Dyadic::ZERO);
        assert_eq!(r.product, Dyadic::new(1, 2));
        assert!(r.pass);

        let single = OracleInstance {
            subset: vec![1],
            ..k2_two_on_u()
        };
        let r = na_oracle(&single).unwrap();
        assert_eq!(r.joint, r.product);

        let everywhere = OracleInstance {
            dest: vec![0, 1],
            ..k2_two_on_u()
        };
        let r = na_oracle(&everywhere).unwrap();
        assert_eq!((r.joint, r.product), (Dyadic::ONE, Dyadic::ONE));
    }

    #[test]
    fn walk_law_examples() {
        let w = walk_law_oracle(&k2_two_on_u(), 0).unwrap();
        assert_eq!(w.distribution, vec![Dyadic::HALF, Dyadic::HALF]);
        assert!(w.equal);

        let idle = OracleInstance {
            sequence: vec![],
            ..k2_two_on_u()
        };
        let w = walk_law_oracle(&idle, 1).unwrap();
        assert_eq!(w.distribution, vec![Dyadic::ONE, Dyadic::ZERO]);

        let p3 = OracleInstance {
            graph: Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap(),
            sequence: vec![(0, 1), (1, 2)],
            initial: TokenState::new(&LoadVector::new(vec![1, 0, 0]).unwrap()),
            subset: vec![0],
            dest: vec![0],
        };
        let w = walk_law_oracle(&p3, 0).unwrap();
        assert_eq!(
            w.distribution,
            vec![Dyadic::HALF, Dyadic::new(1, 2), Dyadic::new(1, 2)]
        );
        assert!(w.equal);
    }

    #[test]
    fn budget_is_enforced() {
        let big = OracleInstance {
            graph: complete(2).unwrap(),
            sequence: vec![(0, 1); 4],
            initial: TokenState::new(&LoadVector::new(vec![7, 6]).unwrap()),
            subset: vec![0],
            dest: vec![0],
        };
        assert_eq!(
            na_oracle(&big).unwrap_err(),
            AnalysisError::BitBudget { budget: BIT_BUDGET }
        );
    }

    #[test]
    fn invalid_instances() {
        let bad = OracleInstance {
            graph: Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap(),
            sequence: vec![(0, 2)],
            initial: TokenState::new(&LoadVector::new(vec![1, 0, 0]).unwrap()),
            subset: vec![0],
            dest: vec![0],
        };
        assert!(matches!(
            na_oracle(&bad),
            Err(AnalysisError::InvalidInstance(_))
        ));
    }

    #[test]
    fn collision_examples() {
        let k2 = [Matching::new(1, vec![(0, 1)])];
        assert_eq!(
            collision_exact(&LoadVector::new(vec![1, 0]).unwrap(), &k2, 0).unwrap(),
            Dyadic::ZERO
        );
        assert_eq!(
            collision_exact(&LoadVector::new(vec![1, 1]).unwrap(), &k2, 0).unwrap(),
            Dyadic::ZERO
        );
        assert_eq!(
            collision_exact(&LoadVector::new(vec![3, 0]).unwrap(), &[], 0).unwrap(),
            Dyadic::from_int(2)
        );
        assert_eq!(
            collision_exact(&LoadVector::new(vec![0, 2]).unwrap(), &k2, 0).unwrap_err(),
            AnalysisError::NoTokenOnNode(0)
        );
    }

    #[test]
    fn connected_graph_counts() {
        let counts: Vec<usize> = (1..=4).map(|n| connected_graphs(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 4, 38]);
    }

    #[test]
    fn small_family_passes() {
        let s = exhaustive_family(3, 2, 3).unwrap();
        assert!(s.pass(), "{:?}", s.examples);
        assert!(s.na_checks > 1000);
    }
}
