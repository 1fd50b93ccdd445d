//! Choice of the products each university submits.
//!
//! Every researcher owes `quota` products and a publication may be presented
//! at most once per university, so the choice is a maximum-weight
//! degree-constrained matching on the researcher/publication bipartite
//! graph. [`solve_exact`] solves it as a min-cost flow; [`solve_greedy`] is
//! the heaviest-edge-first baseline.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, PublicationId, ResearcherId, UniversityId};
use crate::rules::ScoredProduct;

/// Weights are compared as integers in units of 1e-12.
const WEIGHT_SCALE: f64 = 1e12;
const MAX_WEIGHT: f64 = 1e12;

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("candidate ({researcher}, {publication}) has invalid weight {weight}")]
    InvalidWeight {
        researcher: ResearcherId,
        publication: PublicationId,
        weight: f64,
    },
    #[error("candidate ({0}, {1}) listed twice")]
    DuplicateCandidate(ResearcherId, PublicationId),
    #[error("candidate researcher {0} has no quota entry")]
    UnknownResearcher(ResearcherId),
    #[error("publication {publication} of researcher {researcher} was not scored")]
    Unscored {
        researcher: ResearcherId,
        publication: PublicationId,
    },
    #[error("unknown university {0}")]
    UnknownUniversity(UniversityId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Vqr,
    Faii,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub researcher_id: ResearcherId,
    pub publication_id: PublicationId,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionProblem {
    pub university_id: UniversityId,
    /// Sorted by (researcher, publication).
    candidates: Vec<Candidate>,
    quotas: BTreeMap<ResearcherId, u32>,
}

impl SelectionProblem {
    pub fn new(
        university_id: UniversityId,
        mut candidates: Vec<Candidate>,
        quotas: BTreeMap<ResearcherId, u32>,
    ) -> Result<Self, SelectionError> {
        candidates.sort_by(|a, b| (&a.researcher_id, &a.publication_id).cmp(&(&b.researcher_id, &b.publication_id)));
        for (i, c) in candidates.iter().enumerate() {
            if !(c.weight.is_finite() && (0.0..=MAX_WEIGHT).contains(&c.weight)) {
                return Err(SelectionError::InvalidWeight {
                    researcher: c.researcher_id.clone(),
                    publication: c.publication_id.clone(),
                    weight: c.weight,
                });
            }
            if !quotas.contains_key(&c.researcher_id) {
                return Err(SelectionError::UnknownResearcher(c.researcher_id.clone()));
            }
            if i > 0 {
                let prev = &candidates[i - 1];
                if prev.researcher_id == c.researcher_id && prev.publication_id == c.publication_id {
                    return Err(SelectionError::DuplicateCandidate(
                        c.researcher_id.clone(),
                        c.publication_id.clone(),
                    ));
                }
            }
        }
        Ok(Self {
            university_id,
            candidates,
            quotas,
        })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn quotas(&self) -> &BTreeMap<ResearcherId, u32> {
        &self.quotas
    }

    pub fn total_quota(&self) -> u32 {
        self.quotas.values().sum()
    }

    /// The same problem without candidate `index`.
    pub fn without_candidate(&self, index: usize) -> Self {
        let mut out = self.clone();
        out.candidates.remove(index);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub university_id: UniversityId,
    /// Chosen pairs sorted by (researcher, publication).
    pub chosen: Vec<Candidate>,
    pub total_weight: f64,
    pub per_researcher_counts: BTreeMap<ResearcherId, u32>,
    /// Total quota minus chosen pairs.
    pub missing: u32,
}

impl SelectionResult {
    fn from_chosen(problem: &SelectionProblem, mut chosen: Vec<Candidate>) -> Self {
        chosen.sort_by(|a, b| (&a.researcher_id, &a.publication_id).cmp(&(&b.researcher_id, &b.publication_id)));
        let mut per_researcher_counts: BTreeMap<ResearcherId, u32> =
            problem.quotas.keys().map(|r| (r.clone(), 0)).collect();
        for c in &chosen {
            *per_researcher_counts
                .get_mut(&c.researcher_id)
                .expect("validated researcher") += 1;
        }
        Self {
            university_id: problem.university_id.clone(),
            total_weight: chosen.iter().map(|c| c.weight).sum(),
            missing: problem.total_quota() - chosen.len() as u32,
            chosen,
            per_researcher_counts,
        }
    }

    /// The part of the selection made by researchers accepted by `keep`,
    /// with `missing` recomputed against their quotas.
    pub fn restrict(&self, quotas: &BTreeMap<ResearcherId, u32>, keep: impl Fn(&ResearcherId) -> bool) -> Self {
        let chosen: Vec<Candidate> = self.chosen.iter().filter(|c| keep(&c.researcher_id)).cloned().collect();
        let per_researcher_counts: BTreeMap<ResearcherId, u32> = self
            .per_researcher_counts
            .iter()
            .filter(|(r, _)| keep(r))
            .map(|(r, n)| (r.clone(), *n))
            .collect();
        let due: u32 = quotas.iter().filter(|(r, _)| keep(r)).map(|(_, q)| q).sum();
        Self {
            university_id: self.university_id.clone(),
            total_weight: chosen.iter().map(|c| c.weight).sum(),
            missing: due - chosen.len() as u32,
            chosen,
            per_researcher_counts,
        }
    }
}

/// Candidate edges of one university: one per authorship of a quota-owing
/// researcher on an indexed publication. `scores` must hold every such pair.
pub fn build_problem(
    corpus: &Corpus,
    scores: &HashMap<(ResearcherId, PublicationId), ScoredProduct>,
    university_id: &UniversityId,
    weight_kind: WeightKind,
) -> Result<SelectionProblem, SelectionError> {
    if corpus.university(university_id).is_none() {
        return Err(SelectionError::UnknownUniversity(university_id.clone()));
    }
    let mut quotas = BTreeMap::new();
    let mut candidates = Vec::new();
    for r in corpus.researchers_of(university_id) {
        quotas.insert(r.id.clone(), r.quota);
        if r.quota == 0 {
            continue;
        }
        for a in corpus.authorships_of(&r.id) {
            let p = corpus.publication(&a.publication_id).expect("validated reference");
            if !p.indexed {
                continue;
            }
            let key = (r.id.clone(), p.id.clone());
            let scored = scores.get(&key).ok_or_else(|| SelectionError::Unscored {
                researcher: r.id.clone(),
                publication: p.id.clone(),
            })?;
            candidates.push(Candidate {
                researcher_id: key.0,
                publication_id: key.1,
                weight: match weight_kind {
                    WeightKind::Vqr => scored.vqr_score,
                    WeightKind::Faii => scored.faii_score,
                },
            });
        }
    }
    SelectionProblem::new(university_id.clone(), candidates, quotas)
}

/// Heaviest feasible edge first; ties by (researcher, publication).
pub fn solve_greedy(problem: &SelectionProblem) -> SelectionResult {
    let mut order: Vec<&Candidate> = problem.candidates.iter().collect();
    // Candidates are already in key order; a stable sort keeps it for ties.
    order.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    let mut used: HashSet<&PublicationId> = HashSet::new();
    let mut load: HashMap<&ResearcherId, u32> = HashMap::new();
    let mut chosen = Vec::new();
    for c in order {
        let n = load.entry(&c.researcher_id).or_default();
        if *n < problem.quotas[&c.researcher_id] && !used.contains(&c.publication_id) {
            *n += 1;
            used.insert(&c.publication_id);
            chosen.push(c.clone());
        }
    }
    SelectionResult::from_chosen(problem, chosen)
}

/// Exact maximum-weight selection.
///
/// Among maximum-weight selections the one with the most pairs is returned,
/// and among those the lexicographically smallest list of
/// (researcher, publication) pairs.
pub fn solve_exact(problem: &SelectionProblem) -> SelectionResult {
    if problem.candidates.is_empty() {
        return SelectionResult::from_chosen(problem, Vec::new());
    }
    let mut net = FlowNetwork::new(problem);
    net.successive_shortest_paths();
    let dual = net.dual_potentials();
    net.lexicographic_refinement(&dual);
    let chosen = net
        .edge_arcs
        .iter()
        .zip(&problem.candidates)
        .filter(|(&arc, _)| net.flow(arc) > 0)
        .map(|(_, c)| c.clone())
        .collect();
    SelectionResult::from_chosen(problem, chosen)
}

const SOURCE: usize = 0;
const SINK: usize = 1;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: i64,
    cost: i128,
}

/// Residual network: arc `i ^ 1` is the reverse of arc `i`.
struct FlowNetwork {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
    /// Forward arc of every candidate, in candidate order.
    edge_arcs: Vec<usize>,
    /// Sink-to-source arc closing the flow into a circulation.
    return_arc: usize,
}

impl FlowNetwork {
    fn new(problem: &SelectionProblem) -> Self {
        let researchers: BTreeMap<&ResearcherId, usize> =
            problem.quotas.keys().enumerate().map(|(i, r)| (r, 2 + i)).collect();
        let mut publications: BTreeMap<&PublicationId, usize> = BTreeMap::new();
        for c in &problem.candidates {
            let next = 2 + researchers.len() + publications.len();
            publications.entry(&c.publication_id).or_insert(next);
        }
        let n = 2 + researchers.len() + publications.len();
        let mut net = Self {
            arcs: Vec::new(),
            adj: vec![Vec::new(); n],
            edge_arcs: Vec::new(),
            return_arc: 0,
        };
        for (r, &node) in &researchers {
            net.add_arc(SOURCE, node, problem.quotas[*r] as i64, 0);
        }
        // Lexicographic costs in one integer: the scaled weight dominates,
        // the trailing unit makes count the secondary objective.
        let count_base = problem.candidates.len() as i128 + 1;
        for c in &problem.candidates {
            let w = (c.weight * WEIGHT_SCALE).round() as i128;
            let arc = net.add_arc(
                researchers[&c.researcher_id],
                publications[&c.publication_id],
                1,
                -(w * count_base + 1),
            );
            net.edge_arcs.push(arc);
        }
        for &node in publications.values() {
            net.add_arc(node, SINK, 1, 0);
        }
        net.return_arc = net.add_arc(SINK, SOURCE, i64::MAX / 4, 0);
        // The return arc stays closed until the flow phase is over.
        net.arcs[net.return_arc].cap = 0;
        net
    }

    fn add_arc(&mut self, from: usize, to: usize, cap: i64, cost: i128) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap, cost });
        self.arcs.push(Arc {
            to: from,
            cap: 0,
            cost: -cost,
        });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    fn flow(&self, arc: usize) -> i64 {
        self.arcs[arc ^ 1].cap
    }

    fn push(&mut self, arc: usize, amount: i64) {
        self.arcs[arc].cap -= amount;
        self.arcs[arc ^ 1].cap += amount;
    }

    fn tail(&self, arc: usize) -> usize {
        self.arcs[arc ^ 1].to
    }

    /// Augments one unit at a time along cheapest paths while that lowers
    /// the total cost. Dijkstra on reduced costs, potentials seeded from the
    /// layered (acyclic) initial network.
    fn successive_shortest_paths(&mut self) {
        let n = self.adj.len();
        // Exact distances in the initial layered network; nodes unreachable
        // from the source stay unreachable and keep potential zero.
        let mut potential = vec![0i128; n];
        let mut reached = vec![false; n];
        for &a in &self.adj[SOURCE] {
            if self.arcs[a].cap > 0 {
                reached[self.arcs[a].to] = true;
            }
        }
        for &arc in &self.edge_arcs {
            let (from, to, cost) = (self.tail(arc), self.arcs[arc].to, self.arcs[arc].cost);
            if reached[from] && (!reached[to] || cost < potential[to]) {
                potential[to] = cost;
                reached[to] = true;
            }
        }
        let sink_dist = self.adj[SINK]
            .iter()
            .map(|&a| self.arcs[a].to)
            .filter(|&p| reached[p])
            .map(|p| potential[p])
            .min();
        if let Some(d) = sink_dist {
            potential[SINK] = d;
        }

        let mut dist = vec![i128::MAX; n];
        let mut parent = vec![usize::MAX; n];
        loop {
            dist.iter_mut().for_each(|d| *d = i128::MAX);
            parent.iter_mut().for_each(|p| *p = usize::MAX);
            dist[SOURCE] = 0;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((0i128, SOURCE)));
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &a in &self.adj[u] {
                    let arc = &self.arcs[a];
                    if arc.cap <= 0 {
                        continue;
                    }
                    let reduced = arc.cost + potential[u] - potential[arc.to];
                    debug_assert!(reduced >= 0, "negative reduced cost");
                    let nd = d + reduced;
                    if nd < dist[arc.to] {
                        dist[arc.to] = nd;
                        parent[arc.to] = a;
                        heap.push(Reverse((nd, arc.to)));
                    }
                }
            }
            if dist[SINK] == i128::MAX {
                break;
            }
            let path_cost = dist[SINK] + potential[SINK] - potential[SOURCE];
            for v in 0..n {
                if dist[v] != i128::MAX {
                    potential[v] += dist[v];
                }
            }
            if path_cost >= 0 {
                break;
            }
            let mut v = SINK;
            while v != SOURCE {
                let a = parent[v];
                self.push(a, 1);
                v = self.tail(a);
            }
        }
        let total: i64 = self.adj[SOURCE].iter().map(|&a| self.flow(a)).sum();
        self.arcs[self.return_arc].cap = i64::MAX / 4;
        self.push(self.return_arc, total);
    }

    /// Shortest-path potentials of the residual circulation network from a
    /// virtual root joined to every node. The network has no negative cycle
    /// once the flow is optimal, so every residual arc has a non-negative
    /// reduced cost and optimal selections use only zero-reduced-cost arcs.
    fn dual_potentials(&self) -> Vec<i128> {
        let n = self.adj.len();
        let mut d = vec![0i128; n];
        let mut queued = vec![true; n];
        let mut queue: VecDeque<usize> = (0..n).collect();
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            for &a in &self.adj[u] {
                let arc = &self.arcs[a];
                if arc.cap > 0 && d[u] + arc.cost < d[arc.to] {
                    d[arc.to] = d[u] + arc.cost;
                    if !queued[arc.to] {
                        queued[arc.to] = true;
                        queue.push_back(arc.to);
                    }
                }
            }
        }
        d
    }

    fn tight(&self, a: usize, dual: &[i128]) -> bool {
        let arc = &self.arcs[a];
        arc.cap > 0 && arc.cost + dual[self.tail(a)] - dual[arc.to] == 0
    }

    /// Walks candidates in key order and keeps each one in the selection if
    /// some optimal selection agrees with every earlier decision and
    /// contains it. Switching optimal selections follows zero-reduced-cost
    /// cycles through the candidate's arc.
    fn lexicographic_refinement(&mut self, dual: &[i128]) {
        #[derive(Clone, Copy, PartialEq)]
        enum State {
            Open,
            Fixed,
            Forbidden,
        }
        let n = self.adj.len();
        let mut state = vec![State::Open; self.arcs.len() / 2];
        let edge_index: HashMap<usize, usize> = self.edge_arcs.iter().enumerate().map(|(i, &a)| (a / 2, i)).collect();
        let mut parent = vec![usize::MAX; n];
        let mut seen = vec![false; n];

        for i in 0..self.edge_arcs.len() {
            let arc = self.edge_arcs[i];
            if self.flow(arc) > 0 {
                state[arc / 2] = State::Fixed;
                continue;
            }
            if !self.tight(arc, dual) {
                state[arc / 2] = State::Forbidden;
                continue;
            }
            let start = self.arcs[arc].to;
            let goal = self.tail(arc);
            seen.iter_mut().for_each(|s| *s = false);
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            let mut found = false;
            'bfs: while let Some(u) = queue.pop_front() {
                for &a in &self.adj[u] {
                    let to = self.arcs[a].to;
                    if seen[to] || !self.tight(a, dual) {
                        continue;
                    }
                    if let Some(&e) = edge_index.get(&(a / 2)) {
                        let s = state[self.edge_arcs[e] / 2];
                        let adds = a % 2 == 0;
                        let allowed = if adds { s == State::Open } else { s != State::Fixed };
                        if !allowed || a / 2 == arc / 2 {
                            continue;
                        }
                    }
                    seen[to] = true;
                    parent[to] = a;
                    if to == goal {
                        found = true;
                        break 'bfs;
                    }
                    queue.push_back(to);
                }
            }
            if found {
                self.push(arc, 1);
                let mut v = goal;
                while v != start {
                    let a = parent[v];
                    self.push(a, 1);
                    v = self.tail(a);
                }
                state[arc / 2] = State::Fixed;
            } else {
                state[arc / 2] = State::Forbidden;
            }
        }
    }
}
