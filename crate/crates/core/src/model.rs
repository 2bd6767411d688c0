//! Model specification: degree laws, threshold and seeding rules, and explicit
//! configuration-model multigraphs.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{DegreeDistribution, DegreeSequences};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Community {
    One,
    Two,
}

impl Community {
    pub const BOTH: [Community; 2] = [Community::One, Community::Two];

    pub fn index(self) -> usize {
        match self {
            Community::One => 0,
            Community::Two => 1,
        }
    }

    pub fn other(self) -> Community {
        match self {
            Community::One => Community::Two,
            Community::Two => Community::One,
        }
    }

    pub fn from_index(i: usize) -> Community {
        if i == 0 {
            Community::One
        } else {
            Community::Two
        }
    }
}

/// Adoption threshold `K_j(d_own, d_cross)`.
///
/// A node stays inactive while its count of active neighbours is strictly
/// below `K`; thresholds are real valued and never rounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// `K = θ (d_own + d_cross)`.
    Linear(f64),
    Table(ThresholdTable),
}

/// Explicit thresholds keyed by `(community, d_own, d_cross)`; degrees absent
/// from the table use `fallback_theta · (d_own + d_cross)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub entries: Vec<ThresholdEntry>,
    pub fallback_theta: f64,
    #[serde(skip)]
    index: BTreeMap<(Community, usize, usize), f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub community: Community,
    pub d_own: usize,
    pub d_cross: usize,
    pub k: f64,
}

impl ThresholdTable {
    pub fn new(entries: Vec<ThresholdEntry>, fallback_theta: f64) -> Result<Self> {
        let mut t = ThresholdTable {
            entries,
            fallback_theta,
            index: BTreeMap::new(),
        };
        t.reindex()?;
        Ok(t)
    }

    fn reindex(&mut self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fallback_theta) {
            return Err(Error::InvalidModel(format!(
                "fallback θ {} outside [0,1]",
                self.fallback_theta
            )));
        }
        self.index.clear();
        for e in &self.entries {
            let total = (e.d_own + e.d_cross) as f64;
            if !(e.k >= 0.0 && e.k <= total) {
                return Err(Error::InvalidModel(format!(
                    "threshold {} outside [0, {}] at {:?}",
                    e.k, total, e
                )));
            }
            self.index.insert((e.community, e.d_own, e.d_cross), e.k);
        }
        Ok(())
    }

    fn get(&self, c: Community, d_own: usize, d_cross: usize) -> f64 {
        self.index
            .get(&(c, d_own, d_cross))
            .copied()
            .unwrap_or(self.fallback_theta * (d_own + d_cross) as f64)
    }
}

impl ThresholdRule {
    pub fn k(&self, c: Community, d_own: usize, d_cross: usize) -> f64 {
        match self {
            ThresholdRule::Linear(theta) => theta * (d_own + d_cross) as f64,
            ThresholdRule::Table(t) => t.get(c, d_own, d_cross),
        }
    }

    fn validate(&mut self) -> Result<()> {
        match self {
            ThresholdRule::Linear(theta) => {
                if !(*theta > 0.0 && *theta < 1.0) {
                    return Err(Error::InvalidModel(format!(
                        "linear threshold θ = {theta} outside (0,1)"
                    )));
                }
                Ok(())
            }
            ThresholdRule::Table(t) => t.reindex(),
        }
    }
}

/// Seeding probability `α_j(d_own, d_cross)` as a function of a node's
/// community and degrees.
pub type SeedingFn = dyn Fn(Community, usize, usize) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct CustomSeeding(pub Arc<SeedingFn>);

impl fmt::Debug for CustomSeeding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomSeeding(..)")
    }
}

impl PartialEq for CustomSeeding {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

/// How initial adopters are drawn. Each node is seeded independently with
/// probability `α_j(d_own, d_cross)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedingRule {
    /// Same `α` for every node.
    #[serde(rename = "global")]
    GlobalUniform(f64),
    /// `α_j` per community.
    PerCommunity([f64; 2]),
    /// Budgets as fractions of the whole population, spent on the
    /// highest-total-degree nodes of each community with one fractional
    /// boundary degree so that the budget is met exactly in expectation.
    DegreeTargeted([f64; 2]),
    #[serde(skip)]
    Custom(CustomSeeding),
}

impl SeedingRule {
    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(Community, usize, usize) -> f64 + Send + Sync + 'static,
    {
        SeedingRule::Custom(CustomSeeding(Arc::new(f)))
    }
}

/// Top-degree seeding profile within one community: `α = 1` above `cutoff`,
/// `boundary` at `cutoff`, `0` below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetCutoff {
    pub cutoff: usize,
    pub boundary: f64,
}

impl TargetCutoff {
    pub const NONE: TargetCutoff = TargetCutoff {
        cutoff: usize::MAX,
        boundary: 0.0,
    };

    /// Spend `fraction` of the population described by `total_law` on its
    /// highest degrees, scanning the tail from the top.
    pub fn solve(total_law: &[f64], fraction: f64) -> Self {
        if fraction <= 0.0 {
            return Self::NONE;
        }
        let mut above = 0.0;
        for d in (0..total_law.len()).rev() {
            let p = total_law[d];
            if p > 0.0 && above + p >= fraction {
                return TargetCutoff {
                    cutoff: d,
                    boundary: ((fraction - above) / p).clamp(0.0, 1.0),
                };
            }
            above += p;
        }
        TargetCutoff {
            cutoff: 0,
            boundary: 1.0,
        }
    }

    pub fn alpha(&self, total_degree: usize) -> f64 {
        use std::cmp::Ordering::*;
        match total_degree.cmp(&self.cutoff) {
            Greater => 1.0,
            Equal => self.boundary,
            Less => 0.0,
        }
    }
}

/// Law of `D_own + D_cross` for independent laws.
pub fn total_degree_law(own: &DegreeDistribution, cross: &DegreeDistribution) -> Vec<f64> {
    let a = own.pmf_slice();
    let b = cross.pmf_slice();
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, pa) in a.iter().enumerate() {
        for (j, pb) in b.iter().enumerate() {
            out[i + j] += pa * pb;
        }
    }
    out
}

/// The complete two-community model. Immutable; derived quantities (size-biased
/// laws, targeted cutoffs) are computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    laws: [DegreeDistribution; 2],
    cross: DegreeDistribution,
    n: [usize; 2],
    threshold: ThresholdRule,
    seeding: SeedingRule,
    biased: [Option<DegreeDistribution>; 2],
    cross_biased: Option<DegreeDistribution>,
    cutoffs: [TargetCutoff; 2],
}

impl ModelSpec {
    pub fn new(
        p1: DegreeDistribution,
        p2: DegreeDistribution,
        pm: DegreeDistribution,
        n1: usize,
        n2: usize,
        mut threshold: ThresholdRule,
        seeding: SeedingRule,
    ) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidModel("both communities need a node".into()));
        }
        threshold.validate()?;
        let biased = [p1.size_biased().ok(), p2.size_biased().ok()];
        let cross_biased = pm.size_biased().ok();
        let mut m = ModelSpec {
            laws: [p1, p2],
            cross: pm,
            n: [n1, n2],
            threshold,
            seeding: SeedingRule::GlobalUniform(0.0),
            biased,
            cross_biased,
            cutoffs: [TargetCutoff::NONE; 2],
        };
        m.set_seeding(seeding)?;
        Ok(m)
    }

    /// Symmetric Poisson model with linear thresholds.
    pub fn poisson(
        lambda1: f64,
        lambda2: f64,
        lambda_m: f64,
        n_per_community: usize,
        theta: f64,
        seeding: SeedingRule,
    ) -> Result<Self> {
        ModelSpec::new(
            DegreeDistribution::poisson(lambda1)?,
            DegreeDistribution::poisson(lambda2)?,
            DegreeDistribution::poisson(lambda_m)?,
            n_per_community,
            n_per_community,
            ThresholdRule::Linear(theta),
            seeding,
        )
    }

    fn set_seeding(&mut self, seeding: SeedingRule) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        self.cutoffs = [TargetCutoff::NONE; 2];
        match &seeding {
            SeedingRule::GlobalUniform(a) if !unit(*a) => {
                return Err(Error::InvalidModel(format!("α = {a} outside [0,1]")))
            }
            SeedingRule::PerCommunity(a) if !a.iter().all(|&x| unit(x)) => {
                return Err(Error::InvalidModel(format!("α = {a:?} outside [0,1]")))
            }
            SeedingRule::DegreeTargeted(b) => {
                if !b.iter().all(|&x| unit(x)) || b[0] + b[1] > 1.0 + 1e-12 {
                    return Err(Error::InvalidModel(format!(
                        "targeted budgets {b:?} must lie in [0,1] and sum to at most 1"
                    )));
                }
                let total = (self.n[0] + self.n[1]) as f64;
                for c in Community::BOTH {
                    let frac = b[c.index()] * total / self.n[c.index()] as f64;
                    if frac > 1.0 + 1e-12 {
                        return Err(Error::InvalidModel(format!(
                            "budget {} exceeds community {:?}",
                            b[c.index()],
                            c
                        )));
                    }
                    let law = total_degree_law(self.law(c), &self.cross);
                    self.cutoffs[c.index()] = TargetCutoff::solve(&law, frac.min(1.0));
                }
            }
            SeedingRule::Custom(f) => {
                for c in Community::BOTH {
                    for d_own in 0..=self.law(c).dmax() {
                        for d_cross in 0..=self.cross.dmax() {
                            let a = (f.0)(c, d_own, d_cross);
                            if !unit(a) {
                                return Err(Error::InvalidModel(format!(
                                    "custom α = {a} at {c:?} ({d_own}, {d_cross})"
                                )));
                            }
                        }
                    }
                }
            }
            _ => {}
        }
        self.seeding = seeding;
        Ok(())
    }

    pub fn with_seeding(&self, seeding: SeedingRule) -> Result<Self> {
        let mut m = self.clone();
        m.set_seeding(seeding)?;
        Ok(m)
    }

    pub fn with_threshold(&self, threshold: ThresholdRule) -> Result<Self> {
        ModelSpec::new(
            self.laws[0].clone(),
            self.laws[1].clone(),
            self.cross.clone(),
            self.n[0],
            self.n[1],
            threshold,
            self.seeding.clone(),
        )
    }

    pub fn with_sizes(&self, n1: usize, n2: usize) -> Result<Self> {
        ModelSpec::new(
            self.laws[0].clone(),
            self.laws[1].clone(),
            self.cross.clone(),
            n1,
            n2,
            self.threshold.clone(),
            self.seeding.clone(),
        )
    }

    pub fn law(&self, c: Community) -> &DegreeDistribution {
        &self.laws[c.index()]
    }

    pub fn cross_law(&self) -> &DegreeDistribution {
        &self.cross
    }

    /// Size-biased internal law of community `c`, absent when its mean is 0.
    pub fn biased_law(&self, c: Community) -> Option<&DegreeDistribution> {
        self.biased[c.index()].as_ref()
    }

    pub fn biased_cross_law(&self) -> Option<&DegreeDistribution> {
        self.cross_biased.as_ref()
    }

    pub fn n1(&self) -> usize {
        self.n[0]
    }

    pub fn n2(&self) -> usize {
        self.n[1]
    }

    pub fn size(&self, c: Community) -> usize {
        self.n[c.index()]
    }

    pub fn n(&self) -> usize {
        self.n[0] + self.n[1]
    }

    /// Mean internal degree `λ_j`.
    pub fn lambda(&self, c: Community) -> f64 {
        self.law(c).mean()
    }

    /// Mean cross degree `λ_m`.
    pub fn lambda_m(&self) -> f64 {
        self.cross.mean()
    }

    pub fn threshold(&self) -> &ThresholdRule {
        &self.threshold
    }

    pub fn seeding(&self) -> &SeedingRule {
        &self.seeding
    }

    pub fn cutoff(&self, c: Community) -> TargetCutoff {
        self.cutoffs[c.index()]
    }

    /// `K_c(d_own, d_cross)`.
    pub fn k(&self, c: Community, d_own: usize, d_cross: usize) -> f64 {
        self.threshold.k(c, d_own, d_cross)
    }

    /// `α_c(d_own, d_cross)`.
    pub fn alpha(&self, c: Community, d_own: usize, d_cross: usize) -> f64 {
        match &self.seeding {
            SeedingRule::GlobalUniform(a) => *a,
            SeedingRule::PerCommunity(a) => a[c.index()],
            SeedingRule::DegreeTargeted(_) => self.cutoffs[c.index()].alpha(d_own + d_cross),
            SeedingRule::Custom(f) => (f.0)(c, d_own, d_cross),
        }
    }

    /// Expected seeded fraction of community `c`.
    pub fn seed_fraction(&self, c: Community) -> f64 {
        let mut s = 0.0;
        for (d_own, p) in self.law(c).pmf_slice().iter().enumerate() {
            for (d_cross, q) in self.cross.pmf_slice().iter().enumerate() {
                s += p * q * self.alpha(c, d_own, d_cross);
            }
        }
        s
    }

    /// Regularity reports for `P_1`, `P_2`, `P_m`.
    pub fn regularity(&self) -> [crate::dist::RegularityReport; 3] {
        [
            self.laws[0].validate_regularity(),
            self.laws[1].validate_regularity(),
            self.cross.validate_regularity(),
        ]
    }

    /// Per-node thresholds for realized sequences.
    pub fn thresholds_for(&self, seqs: &DegreeSequences) -> Vec<f64> {
        (0..seqs.n())
            .map(|i| {
                let (c, d_own, d_cross) = seqs.node(i);
                self.k(c, d_own as usize, d_cross as usize)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub community: Community,
    pub d_internal: u32,
    pub d_cross: u32,
}

/// A configuration-model multigraph: self-loops and parallel edges allowed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MultiGraph {
    pub nodes: Vec<NodeInfo>,
    pub edges: Vec<(u32, u32)>,
}

impl MultiGraph {
    pub fn from_sequences(seqs: &DegreeSequences) -> Self {
        let nodes = (0..seqs.n())
            .map(|i| {
                let (community, d_internal, d_cross) = seqs.node(i);
                NodeInfo {
                    community,
                    d_internal,
                    d_cross,
                }
            })
            .collect();
        MultiGraph {
            nodes,
            edges: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adjacency lists with multiplicity; a self-loop appears twice in its
    /// node's list.
    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        adj
    }

    /// Check incident-edge counts against declared degrees and edge types
    /// against communities.
    pub fn validate(&self) -> Result<()> {
        let mut internal = vec![0u32; self.nodes.len()];
        let mut cross = vec![0u32; self.nodes.len()];
        for &(a, b) in &self.edges {
            let (na, nb) = (self.nodes[a as usize], self.nodes[b as usize]);
            if na.community == nb.community {
                internal[a as usize] += 1;
                internal[b as usize] += 1;
            } else {
                cross[a as usize] += 1;
                cross[b as usize] += 1;
            }
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if internal[i] != n.d_internal || cross[i] != n.d_cross {
                return Err(Error::InvalidSequences(format!(
                    "node {i}: incident ({}, {}) vs declared ({}, {})",
                    internal[i], cross[i], n.d_internal, n.d_cross
                )));
            }
        }
        Ok(())
    }
}

/// Pair all half-edges uniformly: a perfect matching inside each community and
/// a bipartite matching across.
pub fn realize_full_graph<R: Rng + ?Sized>(seqs: &DegreeSequences, rng: &mut R) -> Result<MultiGraph> {
    seqs.validate()?;
    let mut g = MultiGraph::from_sequences(seqs);
    let n1 = seqs.n1();
    let stubs = |degs: &[u32], offset: usize| -> Vec<u32> {
        degs.iter()
            .enumerate()
            .flat_map(|(i, &d)| std::iter::repeat_n((i + offset) as u32, d as usize))
            .collect()
    };
    for (degs, offset) in [(&seqs.internal1, 0), (&seqs.internal2, n1)] {
        let mut s = stubs(degs, offset);
        s.shuffle(rng);
        g.edges.extend(s.chunks_exact(2).map(|p| (p[0], p[1])));
    }
    let left = stubs(&seqs.cross1, 0);
    let mut right = stubs(&seqs.cross2, n1);
    right.shuffle(rng);
    g.edges.extend(left.into_iter().zip(right));
    Ok(g)
}
