//! The cascade Markov chain that reveals the configuration model while the
//! adoption process runs, and a brute-force closure oracle on explicit graphs.
//!
//! Half-edges are revealed one at a time: an active stub is picked uniformly,
//! paired with a uniform remaining stub of the matching pool, and the partner's
//! owner may cross its threshold. Inactive-inactive pairs are never revealed.

use std::collections::VecDeque;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::dist::DegreeSequences;
use crate::model::{Community, ModelSpec, MultiGraph, NodeInfo};
use crate::{Error, Result};

const REMOVED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeState {
    Inactive,
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeRecord {
    pub community: Community,
    pub d_internal: u32,
    pub d_cross: u32,
    pub u_internal: u32,
    pub u_cross: u32,
    pub k: f64,
    pub state: NodeState,
    /// First global stub id; internal stubs come first, then cross stubs.
    first_stub: u32,
}

impl NodeRecord {
    pub fn is_active(&self) -> bool {
        self.state == NodeState::Active
    }

    fn info(&self) -> NodeInfo {
        NodeInfo {
            community: self.community,
            d_internal: self.d_internal,
            d_cross: self.d_cross,
        }
    }
}

/// One of the four stub pools: internal stubs of a community or cross stubs
/// of a side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Pool {
    Internal(Community),
    Cross(Community),
}

impl Pool {
    fn index(self) -> usize {
        match self {
            Pool::Internal(c) => c.index(),
            Pool::Cross(c) => 2 + c.index(),
        }
    }

    /// Pool holding the partner of a stub drawn from `self`.
    fn partner(self) -> Pool {
        match self {
            Pool::Internal(c) => Pool::Internal(c),
            Pool::Cross(c) => Pool::Cross(c.other()),
        }
    }

    const ALL: [Pool; 4] = [
        Pool::Internal(Community::One),
        Pool::Internal(Community::Two),
        Pool::Cross(Community::One),
        Pool::Cross(Community::Two),
    ];
}

/// The six transitions of the chain. The community is that of the partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EventKind {
    /// 1.i: two active internal stubs of one community.
    ActiveInternal(Community),
    /// 1.ii: two active cross stubs.
    ActiveCross,
    /// 2.i: internal hit on an inactive node that stays inactive.
    InternalHit(Community),
    /// 2.ii: internal hit that activates the partner.
    InternalFlip(Community),
    /// 2.iii: cross hit on an inactive node that stays inactive.
    CrossHit(Community),
    /// 2.iv: cross hit that activates the partner.
    CrossFlip(Community),
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::ActiveInternal(_) => "1.i",
            EventKind::ActiveCross => "1.ii",
            EventKind::InternalHit(_) => "2.i",
            EventKind::InternalFlip(_) => "2.ii",
            EventKind::CrossHit(_) => "2.iii",
            EventKind::CrossFlip(_) => "2.iv",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Remaining stubs of one pool, stored as `[active | inactive]`.
#[derive(Debug, Clone, Default)]
struct StubPool {
    items: Vec<u32>,
    active: usize,
}

/// Scaled snapshot of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathRecord {
    pub k_over_n: f64,
    pub a1: f64,
    pub a2: f64,
    pub am1: f64,
    pub am2: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub phi1_hat: f64,
    pub phi2_hat: f64,
}

impl PathRecord {
    pub const COLUMNS: [&'static str; 9] = [
        "k_over_n", "a1", "a2", "am1", "am2", "tau1", "tau2", "phi1_hat", "phi2_hat",
    ];

    pub fn values(&self) -> [f64; 9] {
        [
            self.k_over_n,
            self.a1,
            self.a2,
            self.am1,
            self.am2,
            self.tau1,
            self.tau2,
            self.phi1_hat,
            self.phi2_hat,
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub active: [u64; 2],
    pub fraction: [f64; 2],
    pub steps: u64,
    pub seeds: u64,
    pub path: Vec<PathRecord>,
    /// Number of exact balance checks that were performed (all passed).
    pub balance_checks: u64,
    #[serde(skip)]
    pub edges: Vec<(u32, u32)>,
}

impl SimResult {
    /// Adoption over the whole population.
    pub fn total_fraction(&self, n1: usize, n2: usize) -> f64 {
        (self.active[0] + self.active[1]) as f64 / (n1 + n2) as f64
    }
}

/// State of the cascade chain.
#[derive(Debug, Clone)]
pub struct SimState {
    nodes: Vec<NodeRecord>,
    owner: Vec<u32>,
    pos: Vec<u32>,
    pools: [StubPool; 4],
    m: [u64; 2],
    m_cross: u64,
    t: [u64; 2],
    k: u64,
    n: [usize; 2],
    seeds: u64,
    initial: Vec<bool>,
    edges: Vec<(u32, u32)>,
    keep_edges: bool,
    check_every_step: bool,
    balance_checks: u64,
}

/// Seed each node independently with `α_c(d_own, d_cross)`; nodes with `K ≤ 0`
/// start active as well.
pub fn init_sim<R: Rng + ?Sized>(model: &ModelSpec, seqs: &DegreeSequences, rng: &mut R) -> Result<SimState> {
    let seeded: Vec<bool> = (0..seqs.n())
        .map(|i| {
            let (c, d_own, d_cross) = seqs.node(i);
            let a = model.alpha(c, d_own as usize, d_cross as usize);
            a >= 1.0 || (a > 0.0 && rng.random_bool(a))
        })
        .collect();
    SimState::build(model, seqs, &seeded)
}

/// Start from an explicit seed set (plus the `K ≤ 0` nodes).
pub fn init_sim_with_seeds(model: &ModelSpec, seqs: &DegreeSequences, seeds: &[usize]) -> Result<SimState> {
    let mut seeded = vec![false; seqs.n()];
    for &s in seeds {
        if s >= seqs.n() {
            return Err(Error::InvalidSequences(format!("seed {s} out of range")));
        }
        seeded[s] = true;
    }
    SimState::build(model, seqs, &seeded)
}

/// Start from explicit per-node thresholds and seeds, without a model.
pub fn init_sim_explicit(seqs: &DegreeSequences, thresholds: &[f64], seeds: &[usize]) -> Result<SimState> {
    if thresholds.len() != seqs.n() {
        return Err(Error::InvalidSequences("one threshold per node required".into()));
    }
    let mut seeded = vec![false; seqs.n()];
    for &s in seeds {
        seeded[s] = true;
    }
    SimState::from_parts(seqs, thresholds, &seeded)
}

impl SimState {
    fn build(model: &ModelSpec, seqs: &DegreeSequences, seeded: &[bool]) -> Result<Self> {
        let k = model.thresholds_for(seqs);
        SimState::from_parts(seqs, &k, seeded)
    }

    fn from_parts(seqs: &DegreeSequences, thresholds: &[f64], seeded: &[bool]) -> Result<Self> {
        seqs.validate()?;
        let n = seqs.n();
        let mut nodes = Vec::with_capacity(n);
        let mut owner = Vec::new();
        let mut first = 0u32;
        let mut seeds = 0;
        for i in 0..n {
            let (community, d_internal, d_cross) = seqs.node(i);
            if seeded[i] {
                seeds += 1;
            }
            let active = seeded[i] || thresholds[i] <= 0.0;
            nodes.push(NodeRecord {
                community,
                d_internal,
                d_cross,
                u_internal: 0,
                u_cross: 0,
                k: thresholds[i],
                state: if active { NodeState::Active } else { NodeState::Inactive },
                first_stub: first,
            });
            let deg = d_internal + d_cross;
            owner.extend(std::iter::repeat_n(i as u32, deg as usize));
            first += deg;
        }
        let mut pools: [StubPool; 4] = Default::default();
        let mut pos = vec![0u32; owner.len()];
        // actives first, then inactives, so the partition holds from the start
        for pass_active in [true, false] {
            for node in nodes.iter().filter(|r| r.is_active() == pass_active) {
                for s in node.first_stub..node.first_stub + node.d_internal + node.d_cross {
                    let pool = &mut pools[stub_pool(node, s).index()];
                    pos[s as usize] = pool.items.len() as u32;
                    pool.items.push(s);
                    if pass_active {
                        pool.active += 1;
                    }
                }
            }
        }
        let initial = nodes.iter().map(|r| r.is_active()).collect();
        Ok(SimState {
            nodes,
            owner,
            pos,
            pools,
            m: [seqs.internal_edges(Community::One), seqs.internal_edges(Community::Two)],
            m_cross: seqs.cross_edges(),
            t: [0, 0],
            k: 0,
            n: [seqs.n1(), seqs.n2()],
            seeds,
            initial,
            edges: Vec::new(),
            keep_edges: false,
            check_every_step: n <= 50,
            balance_checks: 0,
        })
    }

    /// Keep the revealed edges (needed for [`SimState::complete_matching`]).
    pub fn with_edge_log(mut self, keep: bool) -> Self {
        self.keep_edges = keep;
        self
    }

    /// Run the exact balance check after every step instead of only at
    /// recorded points.
    pub fn with_step_checks(mut self, every_step: bool) -> Self {
        self.check_every_step = every_step;
        self
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    /// Initially active nodes (seeds and `K ≤ 0` nodes).
    pub fn initial_active(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.initial[i]).collect()
    }

    pub fn active_set(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_active()).collect()
    }

    /// `A_1, A_2`.
    pub fn active_internal(&self, c: Community) -> u64 {
        self.pools[Pool::Internal(c).index()].active as u64
    }

    /// `A_m^(1), A_m^(2)`.
    pub fn active_cross(&self, c: Community) -> u64 {
        self.pools[Pool::Cross(c).index()].active as u64
    }

    pub fn total_active_stubs(&self) -> u64 {
        self.pools.iter().map(|p| p.active as u64).sum()
    }

    pub fn clock(&self, c: Community) -> u64 {
        self.t[c.index()]
    }

    pub fn step_index(&self) -> u64 {
        self.k
    }

    pub fn pool_len(&self, pool: Pool) -> usize {
        self.pools[pool.index()].items.len()
    }

    pub fn active_nodes(&self, c: Community) -> u64 {
        self.nodes.iter().filter(|r| r.community == c && r.is_active()).count() as u64
    }

    /// Population scale used for the path: the common community size, or the
    /// mean community size when they differ.
    pub fn scale(&self) -> f64 {
        (self.n[0] + self.n[1]) as f64 / 2.0
    }

    /// Exact integer check of both balance equations for both communities.
    pub fn check_balance(&self) -> Result<()> {
        let mut resid_int = [0u64; 2];
        let mut resid_cross = [0u64; 2];
        for r in self.nodes.iter().filter(|r| !r.is_active()) {
            let c = r.community.index();
            resid_int[c] += (r.d_internal - r.u_internal) as u64;
            resid_cross[c] += (r.d_cross - r.u_cross) as u64;
        }
        let cross_done = self.k - self.t[0] - self.t[1];
        for c in Community::BOTH {
            let j = c.index();
            let lhs = self.active_internal(c) + resid_int[j];
            let rhs = 2 * self.m[j] - 2 * self.t[j];
            if lhs != rhs {
                return Err(Error::BalanceViolation {
                    step: self.k,
                    detail: format!("internal {c:?}: {lhs} != {rhs}"),
                });
            }
            let lhs = self.active_cross(c) + resid_cross[j];
            let rhs = self.m_cross - cross_done;
            if lhs != rhs {
                return Err(Error::BalanceViolation {
                    step: self.k,
                    detail: format!("cross {c:?}: {lhs} != {rhs}"),
                });
            }
        }
        Ok(())
    }

    fn record(&self) -> PathRecord {
        let s = self.scale();
        let inactive = |c: Community| (self.n[c.index()] as u64 - self.active_nodes(c)) as f64;
        PathRecord {
            k_over_n: self.k as f64 / s,
            a1: self.active_internal(Community::One) as f64 / s,
            a2: self.active_internal(Community::Two) as f64 / s,
            am1: self.active_cross(Community::One) as f64 / s,
            am2: self.active_cross(Community::Two) as f64 / s,
            tau1: self.t[0] as f64 / s,
            tau2: self.t[1] as f64 / s,
            phi1_hat: inactive(Community::One) / self.n[0] as f64,
            phi2_hat: inactive(Community::Two) / self.n[1] as f64,
        }
    }

    fn remove(&mut self, stub: u32) {
        let pool = &mut self.pools[stub_pool_of(&self.nodes, &self.owner, stub).index()];
        let mut p = self.pos[stub as usize] as usize;
        if p < pool.active {
            let last_active = pool.active - 1;
            swap(pool, &mut self.pos, p, last_active);
            pool.active -= 1;
            p = last_active;
        }
        let last = pool.items.len() - 1;
        swap(pool, &mut self.pos, p, last);
        pool.items.pop();
        self.pos[stub as usize] = REMOVED;
    }

    fn activate(&mut self, v: usize) {
        self.nodes[v].state = NodeState::Active;
        let r = self.nodes[v];
        for s in r.first_stub..r.first_stub + r.d_internal + r.d_cross {
            let p = self.pos[s as usize];
            if p == REMOVED {
                continue;
            }
            let pool = &mut self.pools[stub_pool(&r, s).index()];
            let boundary = pool.active;
            swap(pool, &mut self.pos, p as usize, boundary);
            pool.active += 1;
        }
    }

    /// One transition of the chain.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<EventKind> {
        let total = self.total_active_stubs();
        if total == 0 {
            return Err(Error::NoActiveStubs);
        }
        let mut r = rng.random_range(0..total);
        let mut chosen_pool = Pool::ALL[0];
        for pool in Pool::ALL {
            let a = self.pools[pool.index()].active as u64;
            if r < a {
                chosen_pool = pool;
                break;
            }
            r -= a;
        }
        let chosen = self.pools[chosen_pool.index()].items[r as usize];
        self.remove(chosen);

        let target = chosen_pool.partner();
        let len = self.pools[target.index()].items.len();
        debug_assert!(len > 0, "balance guarantees a partner");
        let partner = self.pools[target.index()].items[rng.random_range(0..len)];
        self.remove(partner);

        let a = self.owner[chosen as usize];
        let v = self.owner[partner as usize];
        if self.keep_edges {
            self.edges.push((a, v));
        }
        self.k += 1;
        if let Pool::Internal(c) = chosen_pool {
            self.t[c.index()] += 1;
        }

        let rec = &mut self.nodes[v as usize];
        let c = rec.community;
        let event = if rec.is_active() {
            match chosen_pool {
                Pool::Internal(c) => EventKind::ActiveInternal(c),
                Pool::Cross(_) => EventKind::ActiveCross,
            }
        } else {
            let internal = matches!(chosen_pool, Pool::Internal(_));
            if internal {
                rec.u_internal += 1;
            } else {
                rec.u_cross += 1;
            }
            let flips = (rec.u_internal + rec.u_cross) as f64 >= rec.k;
            if flips {
                self.activate(v as usize);
            }
            match (internal, flips) {
                (true, false) => EventKind::InternalHit(c),
                (true, true) => EventKind::InternalFlip(c),
                (false, false) => EventKind::CrossHit(c),
                (false, true) => EventKind::CrossFlip(c),
            }
        };
        if self.check_every_step {
            self.check_balance()?;
            self.balance_checks += 1;
        }
        Ok(event)
    }

    /// Step until no active stub remains, recording the scaled state every
    /// `record_every` steps (and at both ends).
    pub fn run<R: Rng + ?Sized>(&mut self, rng: &mut R, record_every: u64) -> Result<SimResult> {
        let record_every = record_every.max(1);
        let mut path = vec![self.record()];
        self.check_balance()?;
        self.balance_checks += 1;
        while self.total_active_stubs() > 0 {
            self.step(rng)?;
            if self.k.is_multiple_of(record_every) {
                self.check_balance()?;
                self.balance_checks += 1;
                path.push(self.record());
            }
        }
        if !self.k.is_multiple_of(record_every) {
            self.check_balance()?;
            self.balance_checks += 1;
            path.push(self.record());
        }
        let active = [self.active_nodes(Community::One), self.active_nodes(Community::Two)];
        Ok(SimResult {
            active,
            fraction: [active[0] as f64 / self.n[0] as f64, active[1] as f64 / self.n[1] as f64],
            steps: self.k,
            seeds: self.seeds,
            path,
            balance_checks: self.balance_checks,
            edges: self.edges.clone(),
        })
    }

    /// Pair all remaining stubs uniformly within their pools and return the
    /// complete multigraph: revealed edges plus the completion.
    pub fn complete_matching<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MultiGraph> {
        if self.total_active_stubs() > 0 {
            return Err(Error::InvalidSequences("run has not finished".into()));
        }
        let mut g = MultiGraph {
            nodes: self.nodes.iter().map(NodeRecord::info).collect(),
            edges: self.edges.clone(),
        };
        g.edges.extend(self.completion_edges(rng)?);
        Ok(g)
    }

    /// Only the edges added by the completion.
    pub fn completion_edges<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<(u32, u32)>> {
        let owners = |p: Pool| -> Vec<u32> {
            self.pools[p.index()]
                .items
                .iter()
                .map(|&s| self.owner[s as usize])
                .collect()
        };
        let mut out = Vec::new();
        for c in Community::BOTH {
            let mut s = owners(Pool::Internal(c));
            if s.len() % 2 == 1 {
                return Err(Error::InvalidSequences(format!("odd residual internal pool in {c:?}")));
            }
            s.shuffle(rng);
            out.extend(s.chunks_exact(2).map(|p| (p[0], p[1])));
        }
        let left = owners(Pool::Cross(Community::One));
        let mut right = owners(Pool::Cross(Community::Two));
        if left.len() != right.len() {
            return Err(Error::InvalidSequences("unbalanced residual cross pools".into()));
        }
        right.shuffle(rng);
        out.extend(left.into_iter().zip(right));
        Ok(out)
    }
}

fn stub_pool(node: &NodeRecord, stub: u32) -> Pool {
    if stub < node.first_stub + node.d_internal {
        Pool::Internal(node.community)
    } else {
        Pool::Cross(node.community)
    }
}

fn stub_pool_of(nodes: &[NodeRecord], owner: &[u32], stub: u32) -> Pool {
    stub_pool(&nodes[owner[stub as usize] as usize], stub)
}

#[inline]
fn swap(pool: &mut StubPool, pos: &mut [u32], i: usize, j: usize) {
    if i == j {
        return;
    }
    pool.items.swap(i, j);
    pos[pool.items[i] as usize] = i as u32;
    pos[pool.items[j] as usize] = j as u32;
}

/// Least fixed point of threshold activation on an explicit multigraph:
/// activate any node whose number of active neighbours (with multiplicity,
/// self-loops excluded) reaches its threshold.
pub fn closure_oracle(graph: &MultiGraph, k: &[f64], seeds: &[usize]) -> Vec<usize> {
    let adj = adjacency_without_loops(graph);
    let n = graph.nodes.len();
    let mut active = vec![false; n];
    let mut hits = vec![0u32; n];
    let mut queue = VecDeque::new();
    for &s in seeds {
        if !active[s] {
            active[s] = true;
            queue.push_back(s);
        }
    }
    for v in 0..n {
        if !active[v] && k[v] <= 0.0 {
            active[v] = true;
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            let w = w as usize;
            if active[w] {
                continue;
            }
            hits[w] += 1;
            if hits[w] as f64 >= k[w] {
                active[w] = true;
                queue.push_back(w);
            }
        }
    }
    (0..n).filter(|&v| active[v]).collect()
}

/// The same closure computed by repeated sweeps in a caller-given node order.
pub fn closure_by_sweeps(graph: &MultiGraph, k: &[f64], seeds: &[usize], order: &[usize]) -> Vec<usize> {
    let adj = adjacency_without_loops(graph);
    let n = graph.nodes.len();
    let mut active = vec![false; n];
    for &s in seeds {
        active[s] = true;
    }
    loop {
        let mut changed = false;
        for &v in order {
            if active[v] {
                continue;
            }
            let count = adj[v].iter().filter(|&&w| active[w as usize]).count();
            if count as f64 >= k[v] {
                active[v] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..n).filter(|&v| active[v]).collect()
}

fn adjacency_without_loops(graph: &MultiGraph) -> Vec<Vec<u32>> {
    let mut adj = vec![Vec::new(); graph.nodes.len()];
    for &(a, b) in &graph.edges {
        if a != b {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
    }
    adj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{realize_full_graph, SeedingRule};
    use crate::rng;
    use crate::DegreeDistribution;

    fn seqs(i1: &[u32], i2: &[u32], c1: &[u32], c2: &[u32]) -> DegreeSequences {
        DegreeSequences::new(i1.to_vec(), i2.to_vec(), c1.to_vec(), c2.to_vec()).unwrap()
    }

    #[test]
    fn forced_active_internal_pair() {
        let s = seqs(&[1, 1], &[0], &[0, 0], &[0]);
        let mut st = init_sim_explicit(&s, &[1.0, 1.0, 1.0], &[0, 1]).unwrap();
        assert_eq!(st.active_internal(Community::One), 2);
        let ev = st.step(&mut rng::master(0)).unwrap();
        assert_eq!(ev, EventKind::ActiveInternal(Community::One));
        assert_eq!(st.active_internal(Community::One), 0);
        assert_eq!(st.clock(Community::One), 1);
        assert!(matches!(st.step(&mut rng::master(0)), Err(Error::NoActiveStubs)));
    }

    #[test]
    fn forced_cross_flip() {
        // node 0 (community 1) active with one cross stub; node 1 (community 2)
        // inactive with one cross stub and two internal stubs (a self-loop)
        let s = seqs(&[0], &[2], &[1], &[1]);
        let mut st = init_sim_explicit(&s, &[1.0, 1.0], &[0]).unwrap();
        assert_eq!(st.active_cross(Community::One), 1);
        let ev = st.step(&mut rng::master(0)).unwrap();
        assert_eq!(ev, EventKind::CrossFlip(Community::Two));
        assert_eq!(ev.label(), "2.iv");
        assert_eq!(st.active_cross(Community::One), 0);
        assert_eq!(st.active_internal(Community::Two), 2);
        st.check_balance().unwrap();
    }

    #[test]
    fn all_seeded_runs_every_edge() {
        let m = ModelSpec::poisson(3.0, 2.0, 1.0, 40, 0.25, SeedingRule::GlobalUniform(1.0)).unwrap();
        let mut r = rng::master(4);
        let s = DegreeSequences::sample(&m, &mut r);
        let mut st = init_sim(&m, &s, &mut r).unwrap();
        assert_eq!(
            st.active_internal(Community::One),
            s.internal1.iter().map(|&x| x as u64).sum::<u64>()
        );
        let res = st.run(&mut r, 1).unwrap();
        assert_eq!(res.fraction, [1.0, 1.0]);
        let edges = s.internal_edges(Community::One) + s.internal_edges(Community::Two) + s.cross_edges();
        assert_eq!(res.steps, edges);
    }

    #[test]
    fn no_seeds_no_steps() {
        let m = ModelSpec::poisson(3.0, 2.0, 1.0, 40, 0.25, SeedingRule::GlobalUniform(0.0)).unwrap();
        let mut r = rng::master(4);
        let mut s = DegreeSequences::sample(&m, &mut r);
        // make every threshold positive
        for d in s.internal1.iter_mut().chain(s.internal2.iter_mut()) {
            *d += 2;
        }
        let mut st = init_sim(&m, &s, &mut r).unwrap();
        let res = st.run(&mut r, 10).unwrap();
        assert_eq!(res.steps, 0);
        assert_eq!(res.active, [0, 0]);
    }

    #[test]
    fn path_closure() {
        // internal degrees (1, 2, 1), K = 1, seed the middle node: the
        // matching is either the path A - B - C or a loop at B plus A - C
        let s = seqs(&[1, 2, 1], &[0], &[0, 0, 0], &[0]);
        let mut seen = [0usize; 2];
        for seed in 0..60 {
            let mut r = rng::master(seed);
            let mut st = init_sim_explicit(&s, &[1.0; 4], &[1]).unwrap();
            match st.run(&mut r, 1).unwrap().active {
                [3, 0] => seen[0] += 1,
                [1, 0] => seen[1] += 1,
                other => panic!("impossible outcome {other:?}"),
            }
        }
        assert!(seen[0] > 0 && seen[1] > 0);
    }

    /// Exact event probabilities from the frozen counts.
    fn exact_probabilities(st: &SimState) -> Vec<(EventKind, f64)> {
        let total = st.total_active_stubs() as f64;
        let mut out: Vec<(EventKind, f64)> = Vec::new();
        let mut add = |e: EventKind, p: f64| {
            if let Some(x) = out.iter_mut().find(|(k, _)| *k == e) {
                x.1 += p;
            } else {
                out.push((e, p));
            }
        };
        for pool in Pool::ALL {
            let a = st.pools[pool.index()].active as f64;
            if a == 0.0 {
                continue;
            }
            let pick = a / total;
            let target = pool.partner();
            let tp = &st.pools[target.index()];
            let denom = tp.items.len() as f64 - if target == pool { 1.0 } else { 0.0 };
            let active_partners = tp.active as f64 - if target == pool { 1.0 } else { 0.0 };
            let both = match pool {
                Pool::Internal(c) => EventKind::ActiveInternal(c),
                Pool::Cross(_) => EventKind::ActiveCross,
            };
            add(both, pick * active_partners / denom);
            for &s in &tp.items[tp.active..] {
                let rec = st.nodes[st.owner[s as usize] as usize];
                let flips = (rec.u_internal + rec.u_cross + 1) as f64 >= rec.k;
                let c = rec.community;
                let e = match (pool, flips) {
                    (Pool::Internal(_), false) => EventKind::InternalHit(c),
                    (Pool::Internal(_), true) => EventKind::InternalFlip(c),
                    (Pool::Cross(_), false) => EventKind::CrossHit(c),
                    (Pool::Cross(_), true) => EventKind::CrossFlip(c),
                };
                add(e, pick / denom);
            }
        }
        out
    }

    #[test]
    fn event_frequencies_match_exact_probabilities() {
        let m = ModelSpec::poisson(3.0, 3.0, 1.5, 10, 0.4, SeedingRule::GlobalUniform(0.3)).unwrap();
        let mut r = rng::master(21);
        let s = DegreeSequences::sample(&m, &mut r);
        let mut frozen = init_sim(&m, &s, &mut r).unwrap();
        // advance a few steps so some inactive nodes carry partial counts
        for _ in 0..3 {
            if frozen.total_active_stubs() == 0 {
                break;
            }
            frozen.step(&mut r).unwrap();
        }
        assert!(frozen.total_active_stubs() > 0);
        let probs = exact_probabilities(&frozen);
        let total_p: f64 = probs.iter().map(|x| x.1).sum();
        assert!((total_p - 1.0).abs() < 1e-12);

        let trials = 100_000;
        let mut counts = vec![0usize; probs.len()];
        for _ in 0..trials {
            let mut st = frozen.clone();
            let e = st.step(&mut r).unwrap();
            let i = probs
                .iter()
                .position(|(k, _)| *k == e)
                .expect("event has positive probability");
            counts[i] += 1;
        }
        for ((e, p), c) in probs.iter().zip(&counts) {
            let sigma = (trials as f64 * p * (1.0 - p)).sqrt().max(1.0);
            assert!(
                (*c as f64 - trials as f64 * p).abs() < 4.0 * sigma,
                "{e:?}: {c} vs {}",
                trials as f64 * p
            );
        }
    }

    #[test]
    fn triangle_closures() {
        let s = seqs(&[2, 2, 2], &[0], &[0; 3], &[0]);
        let g = MultiGraph {
            nodes: MultiGraph::from_sequences(&s).nodes,
            edges: vec![(0, 1), (1, 2), (2, 0)],
        };
        g.validate().unwrap();
        assert_eq!(closure_oracle(&g, &[2.0; 4], &[0]), vec![0]);
        assert_eq!(closure_oracle(&g, &[1.0; 4], &[0]), vec![0, 1, 2]);
    }

    fn small_model(seed: u64) -> (ModelSpec, DegreeSequences, rng::SimRng) {
        let mut r = rng::stream(seed, 0, 0);
        let m = ModelSpec::new(
            DegreeDistribution::poisson(2.5).unwrap(),
            DegreeDistribution::table([(1, 0.3), (2, 0.3), (4, 0.4)]).unwrap(),
            DegreeDistribution::poisson(0.8).unwrap(),
            15,
            15,
            crate::ThresholdRule::Linear(0.3),
            SeedingRule::GlobalUniform(0.1),
        )
        .unwrap();
        let s = DegreeSequences::sample(&m, &mut r);
        (m, s, r)
    }

    #[test]
    fn closure_is_order_independent() {
        let (m, s, mut r) = small_model(3);
        let g = realize_full_graph(&s, &mut r).unwrap();
        let k = m.thresholds_for(&s);
        let seeds = vec![0, 7, 20];
        let base = closure_oracle(&g, &k, &seeds);
        let mut order: Vec<usize> = (0..g.len()).collect();
        for _ in 0..100 {
            order.shuffle(&mut r);
            assert_eq!(closure_by_sweeps(&g, &k, &seeds, &order), base);
        }
    }

    #[test]
    fn simulator_matches_closure() {
        for seed in 0..50 {
            let (m, s, mut r) = small_model(seed);
            let mut st = init_sim(&m, &s, &mut r).unwrap().with_edge_log(true);
            let initial = st.initial_active();
            let res = st.run(&mut r, 1).unwrap();
            let g = st.complete_matching(&mut r).unwrap();
            g.validate().unwrap();
            let oracle = closure_oracle(&g, &m.thresholds_for(&s), &initial);
            assert_eq!(st.active_set(), oracle, "seed {seed}");
            assert_eq!(res.active[0] + res.active[1], oracle.len() as u64);
        }
    }

    #[test]
    fn completion_is_empty_when_all_active() {
        let m = ModelSpec::poisson(2.0, 2.0, 1.0, 10, 0.25, SeedingRule::GlobalUniform(1.0)).unwrap();
        let mut r = rng::master(1);
        let s = DegreeSequences::sample(&m, &mut r);
        let mut st = init_sim(&m, &s, &mut r).unwrap().with_edge_log(true);
        let res = st.run(&mut r, 5).unwrap();
        assert!(st.completion_edges(&mut r).unwrap().is_empty());
        let g = st.complete_matching(&mut r).unwrap();
        assert_eq!(g.edges, res.edges);
    }

    #[test]
    fn closure_is_monotone_in_seeds() {
        let (m, s, mut r) = small_model(9);
        let g = realize_full_graph(&s, &mut r).unwrap();
        let k = m.thresholds_for(&s);
        for _ in 0..50 {
            let small: Vec<usize> = (0..g.len()).filter(|_| r.random_bool(0.1)).collect();
            let mut big = small.clone();
            big.extend((0..g.len()).filter(|_| r.random_bool(0.1)));
            let a = closure_oracle(&g, &k, &small);
            let b = closure_oracle(&g, &k, &big);
            assert!(a.iter().all(|v| b.contains(v)));
        }
    }

    #[test]
    fn initial_active_stubs_match_expectation() {
        let n = 100_000;
        let m = ModelSpec::poisson(8.0, 8.0, 1.0, n, 0.25, SeedingRule::GlobalUniform(0.05)).unwrap();
        let mut r = rng::master(2);
        let s = DegreeSequences::sample(&m, &mut r);
        let st = init_sim(&m, &s, &mut r).unwrap();
        let a1 = st.active_internal(Community::One) as f64 / (2 * n) as f64;
        // A_1 is a sum of n i.i.d. D·Bernoulli(α) terms
        let (alpha, lambda) = (0.05f64, 8.0f64);
        let var = alpha * (lambda + lambda * lambda) - (alpha * lambda).powi(2);
        let sigma = (n as f64 * var).sqrt() / (2 * n) as f64;
        let expected = alpha * lambda * 0.5;
        assert!((a1 - expected).abs() < 3.0 * sigma, "{a1} vs {expected}");
    }
}
