//! Degree distributions, size-biasing, and degree-sequence sampling.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Community, ModelSpec};
use crate::{Error, Result};

/// Default truncation tolerance for infinite-support laws.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Declared shape of a degree law, as written in config files:
/// `{"poisson": λ}`, `{"regular": d}` or `{"table": {"d": p, ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    Poisson(f64),
    Regular(usize),
    Table(BTreeMap<usize, f64>),
}

/// A truncated, renormalized probability mass function on `0..=dmax`.
///
/// Immutable once built; cheap to clone and safe to share between threads.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeDistribution {
    kind: DistKind,
    pmf: Vec<f64>,
    mean: f64,
}

impl DegreeDistribution {
    pub fn build(kind: DistKind, tail_tol: f64) -> Result<Self> {
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "tail tolerance {tail_tol} outside (0,1)"
            )));
        }
        let raw = match &kind {
            DistKind::Poisson(lambda) => poisson_pmf(*lambda)?,
            DistKind::Regular(d) => {
                let mut v = vec![0.0; d + 1];
                v[*d] = 1.0;
                v
            }
            DistKind::Table(table) => table_pmf(table)?,
        };
        let pmf = truncate(raw, tail_tol);
        let mean = pmf.iter().enumerate().map(|(d, p)| d as f64 * p).sum();
        Ok(DegreeDistribution { kind, pmf, mean })
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        Self::build(DistKind::Poisson(lambda), DEFAULT_TAIL_TOL)
    }

    pub fn regular(d: usize) -> Result<Self> {
        Self::build(DistKind::Regular(d), DEFAULT_TAIL_TOL)
    }

    pub fn table<I: IntoIterator<Item = (usize, f64)>>(entries: I) -> Result<Self> {
        Self::build(DistKind::Table(entries.into_iter().collect()), DEFAULT_TAIL_TOL)
    }

    pub fn kind(&self) -> &DistKind {
        &self.kind
    }

    pub fn pmf(&self, d: usize) -> f64 {
        self.pmf.get(d).copied().unwrap_or(0.0)
    }

    pub fn pmf_slice(&self) -> &[f64] {
        &self.pmf
    }

    pub fn dmax(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Poisson rate if this is a Poisson law. `Regular(0)` counts as the
    /// degenerate Poisson(0).
    pub fn poisson_rate(&self) -> Option<f64> {
        match self.kind {
            DistKind::Poisson(l) => Some(l),
            DistKind::Regular(0) => Some(0.0),
            _ => None,
        }
    }

    /// `P*(d) = d P(d) / E[D]`, the degree law seen along a uniform edge.
    pub fn size_biased(&self) -> Result<Self> {
        if self.mean.is_nan() || self.mean <= 0.0 {
            return Err(Error::InvalidDistribution("size-biasing needs a positive mean".into()));
        }
        let pmf: Vec<f64> = self
            .pmf
            .iter()
            .enumerate()
            .map(|(d, p)| d as f64 * p / self.mean)
            .collect();
        let mean = pmf.iter().enumerate().map(|(d, p)| d as f64 * p).sum();
        let kind = DistKind::Table(
            pmf.iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(d, p)| (d, *p))
                .collect(),
        );
        Ok(DegreeDistribution { kind, pmf, mean })
    }

    /// First three raw moments of the truncated law.
    pub fn moments(&self) -> [f64; 3] {
        let mut m = [0.0; 3];
        for (d, p) in self.pmf.iter().enumerate() {
            let x = d as f64;
            m[0] += x * p;
            m[1] += x * x * p;
            m[2] += x * x * x * p;
        }
        m
    }

    /// Moment-form regularity check: positive finite mean, finite second and
    /// third moments.
    pub fn validate_regularity(&self) -> RegularityReport {
        let moments = self.moments();
        let mut failures = Vec::new();
        if !(moments[0].is_finite() && moments[0] > 0.0) {
            failures.push(format!("mean {} not in (0, inf)", moments[0]));
        }
        if !moments[1].is_finite() {
            failures.push("second moment not finite".into());
        }
        if !moments[2].is_finite() {
            failures.push("third moment not finite".into());
        }
        RegularityReport {
            moments,
            pass: failures.is_empty(),
            failures,
        }
    }

    pub(crate) fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(&self.pmf).expect("normalized pmf has positive mass")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub moments: [f64; 3],
    pub pass: bool,
    pub failures: Vec<String>,
}

fn poisson_pmf(lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidDistribution(format!(
            "Poisson rate must be positive, got {lambda}"
        )));
    }
    // far enough out that the discarded mass is below f64 resolution
    let top = (lambda + 20.0 * lambda.sqrt() + 60.0).ceil() as usize;
    let ln_l = lambda.ln();
    let mut ln_fact = 0.0;
    let mut pmf = Vec::with_capacity(top + 1);
    for d in 0..=top {
        if d > 0 {
            ln_fact += (d as f64).ln();
        }
        pmf.push((-lambda + d as f64 * ln_l - ln_fact).exp());
    }
    Ok(pmf)
}

fn table_pmf(table: &BTreeMap<usize, f64>) -> Result<Vec<f64>> {
    let Some((&top, _)) = table.iter().next_back() else {
        return Err(Error::InvalidDistribution("empty table".into()));
    };
    let mut pmf = vec![0.0; top + 1];
    let mut total = 0.0;
    for (&d, &p) in table {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::InvalidDistribution(format!("probability {p} at degree {d}")));
        }
        pmf[d] = p;
        total += p;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("table sums to {total}, expected 1")));
    }
    Ok(pmf)
}

/// Cut at the smallest `dmax` whose residual tail is below `tol`, then
/// renormalize.
fn truncate(mut pmf: Vec<f64>, tol: f64) -> Vec<f64> {
    let mut tail = 0.0;
    let mut dmax = pmf.len() - 1;
    // walk down while the mass strictly above d-1 stays below tol
    while dmax > 0 && tail + pmf[dmax] < tol {
        tail += pmf[dmax];
        dmax -= 1;
    }
    pmf.truncate(dmax + 1);
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|p| *p /= total);
    pmf
}

/// Realized degree sequences of a two-community instance.
///
/// Node `i < n1` lives in community 1, the rest in community 2; `internal*`
/// counts same-community half-edges and `cross*` half-edges to the other side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSequences {
    pub internal1: Vec<u32>,
    pub internal2: Vec<u32>,
    pub cross1: Vec<u32>,
    pub cross2: Vec<u32>,
    /// Half-edges added by the parity and balance repair.
    #[serde(default)]
    pub repairs: u64,
}

impl DegreeSequences {
    /// Explicit sequences, checked for parity and cross balance.
    pub fn new(internal1: Vec<u32>, internal2: Vec<u32>, cross1: Vec<u32>, cross2: Vec<u32>) -> Result<Self> {
        let s = DegreeSequences {
            internal1,
            internal2,
            cross1,
            cross2,
            repairs: 0,
        };
        s.validate()?;
        Ok(s)
    }

    /// Draw i.i.d. degrees from the model laws, then repair parity and cross
    /// balance by adding single half-edges to uniformly chosen nodes.
    pub fn sample<R: Rng + ?Sized>(model: &ModelSpec, rng: &mut R) -> Self {
        let (n1, n2) = (model.n1(), model.n2());
        let draw = |d: &DegreeDistribution, n: usize, rng: &mut R| -> Vec<u32> {
            let w = d.sampler();
            (0..n).map(|_| w.sample(rng) as u32).collect()
        };
        let mut internal1 = draw(model.law(Community::One), n1, rng);
        let mut internal2 = draw(model.law(Community::Two), n2, rng);
        let mut cross1 = draw(model.cross_law(), n1, rng);
        let mut cross2 = draw(model.cross_law(), n2, rng);
        let mut repairs = 0u64;

        for seq in [&mut internal1, &mut internal2] {
            if sum(seq) % 2 == 1 {
                let i = rng.random_range(0..seq.len());
                seq[i] += 1;
                repairs += 1;
            }
        }
        let (s1, s2) = (sum(&cross1), sum(&cross2));
        let (short, gap) = if s1 < s2 {
            (&mut cross1, s2 - s1)
        } else {
            (&mut cross2, s1 - s2)
        };
        for _ in 0..gap {
            let i = rng.random_range(0..short.len());
            short[i] += 1;
        }
        repairs += gap;

        DegreeSequences {
            internal1,
            internal2,
            cross1,
            cross2,
            repairs,
        }
    }

    pub fn n1(&self) -> usize {
        self.internal1.len()
    }

    pub fn n2(&self) -> usize {
        self.internal2.len()
    }

    pub fn n(&self) -> usize {
        self.n1() + self.n2()
    }

    /// Number of edges inside community `c`.
    pub fn internal_edges(&self, c: Community) -> u64 {
        match c {
            Community::One => sum(&self.internal1) / 2,
            Community::Two => sum(&self.internal2) / 2,
        }
    }

    pub fn cross_edges(&self) -> u64 {
        sum(&self.cross1)
    }

    /// `(community, internal degree, cross degree)` of node `i`.
    pub fn node(&self, i: usize) -> (Community, u32, u32) {
        let n1 = self.n1();
        if i < n1 {
            (Community::One, self.internal1[i], self.cross1[i])
        } else {
            (Community::Two, self.internal2[i - n1], self.cross2[i - n1])
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cross1.len() != self.n1() || self.cross2.len() != self.n2() {
            return Err(Error::InvalidSequences(
                "internal and cross sequences differ in length".into(),
            ));
        }
        if sum(&self.internal1) % 2 == 1 || sum(&self.internal2) % 2 == 1 {
            return Err(Error::InvalidSequences("odd internal half-edge total".into()));
        }
        if sum(&self.cross1) != sum(&self.cross2) {
            return Err(Error::InvalidSequences(format!(
                "cross totals differ: {} vs {}",
                sum(&self.cross1),
                sum(&self.cross2)
            )));
        }
        Ok(())
    }
}

fn sum(v: &[u32]) -> u64 {
    v.iter().map(|&x| x as u64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SeedingRule, ThresholdRule};
    use crate::rng;

    #[test]
    fn poisson_pmf_at_zero() {
        let d = DegreeDistribution::poisson(2.0).unwrap();
        assert!((d.pmf(0) - (-2.0f64).exp()).abs() < 1e-12);
        assert!((d.pmf(0) - 0.1353353).abs() < 1e-7);
    }

    #[test]
    fn regular_is_point_mass() {
        let d = DegreeDistribution::regular(3).unwrap();
        assert_eq!(d.pmf(3), 1.0);
        assert_eq!(d.mean(), 3.0);
        assert_eq!(d.dmax(), 3);
    }

    #[test]
    fn poisson_truncation_is_tight() {
        for lambda in [0.1, 1.0, 8.0, 17.0, 40.0] {
            let d = DegreeDistribution::poisson(lambda).unwrap();
            let total: f64 = d.pmf_slice().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            // untruncated tail beyond dmax, summed from the raw law
            let raw = poisson_pmf(lambda).unwrap();
            let tail: f64 = raw[d.dmax() + 1..].iter().sum();
            assert!(tail < 1e-12, "lambda {lambda}: tail {tail}");
            // and dmax is the smallest such cut
            let tail_one_less: f64 = raw[d.dmax()..].iter().sum();
            assert!(tail_one_less >= 1e-12);
            assert!((d.mean() - lambda).abs() < 1e-9);
        }
    }

    #[test]
    fn construction_errors() {
        assert!(DegreeDistribution::poisson(0.0).is_err());
        assert!(DegreeDistribution::poisson(-1.0).is_err());
        assert!(DegreeDistribution::table(Vec::<(usize, f64)>::new()).is_err());
        assert!(DegreeDistribution::table([(1, 1.2), (2, -0.2)]).is_err());
        assert!(DegreeDistribution::table([(1, 0.5), (2, 0.4)]).is_err());
    }

    #[test]
    fn size_bias_examples() {
        let p = DegreeDistribution::table([(1, 0.5), (3, 0.5)]).unwrap();
        let s = p.size_biased().unwrap();
        assert!((s.pmf(1) - 0.25).abs() < 1e-15);
        assert!((s.pmf(3) - 0.75).abs() < 1e-15);

        let r = DegreeDistribution::regular(3).unwrap().size_biased().unwrap();
        assert_eq!(r.pmf(3), 1.0);

        assert!(DegreeDistribution::regular(0).unwrap().size_biased().is_err());
    }

    #[test]
    fn size_biased_poisson_is_shifted_poisson() {
        let lambda = 3.7;
        let p = DegreeDistribution::poisson(lambda).unwrap();
        let s = p.size_biased().unwrap();
        assert_eq!(s.pmf(0), 0.0);
        for d in 1..=p.dmax() {
            assert!((s.pmf(d) - p.pmf(d - 1)).abs() < 1e-12, "d = {d}");
        }
        assert!((s.mean() - (lambda + 1.0)).abs() < 1e-9);
        let total: f64 = s.pmf_slice().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regularity_reports() {
        assert!(DegreeDistribution::poisson(8.0).unwrap().validate_regularity().pass);
        let zero = DegreeDistribution::regular(0).unwrap().validate_regularity();
        assert!(!zero.pass);

        let t = DegreeDistribution::table([(2, 0.1), (5, 0.2), (30, 0.7)]).unwrap();
        let r = t.validate_regularity();
        let hand = 0.1 * 8.0 + 0.2 * 125.0 + 0.7 * 27000.0;
        assert!((r.moments[2] - hand).abs() < 1e-9);
        assert!(r.pass);
    }

    fn model(p1: DegreeDistribution, pm: DegreeDistribution, n: usize) -> ModelSpec {
        ModelSpec::new(
            p1.clone(),
            p1,
            pm,
            n,
            n,
            ThresholdRule::Linear(0.25),
            SeedingRule::GlobalUniform(0.0),
        )
        .unwrap()
    }

    #[test]
    fn regular_sequences_need_no_repair() {
        let m = model(
            DegreeDistribution::regular(2).unwrap(),
            DegreeDistribution::regular(1).unwrap(),
            4,
        );
        let s = DegreeSequences::sample(&m, &mut rng::master(1));
        assert_eq!(s.internal_edges(Community::One) * 2, 8);
        assert_eq!(s.internal_edges(Community::Two) * 2, 8);
        assert_eq!(sum(&s.cross1), 4);
        assert_eq!(sum(&s.cross2), 4);
        assert_eq!(s.repairs, 0);
    }

    #[test]
    fn large_sample_mean_and_repairs() {
        let n = 100_000;
        let m = model(
            DegreeDistribution::poisson(8.0).unwrap(),
            DegreeDistribution::poisson(1.0).unwrap(),
            n,
        );
        let s = DegreeSequences::sample(&m, &mut rng::master(11));
        s.validate().unwrap();
        let mean = s.internal1.iter().map(|&x| x as f64).sum::<f64>() / n as f64;
        assert!((mean - 8.0).abs() < 4.0 * (8.0 / n as f64).sqrt(), "{mean}");
        assert!((s.repairs as f64) <= 5.0 * ((2 * n) as f64).sqrt());
    }

    #[test]
    fn repaired_sequences_always_valid() {
        let m = model(
            DegreeDistribution::poisson(1.3).unwrap(),
            DegreeDistribution::table([(0, 0.5), (3, 0.5)]).unwrap(),
            7,
        );
        let mut r = rng::master(5);
        for _ in 0..500 {
            DegreeSequences::sample(&m, &mut r).validate().unwrap();
        }
    }

    #[test]
    fn config_shape_round_trips() {
        let k: DistKind = serde_json::from_str(r#"{"poisson": 8.0}"#).unwrap();
        assert_eq!(k, DistKind::Poisson(8.0));
        let k: DistKind = serde_json::from_str(r#"{"regular": 3}"#).unwrap();
        assert_eq!(k, DistKind::Regular(3));
        let k: DistKind = serde_json::from_str(r#"{"table": {"1": 0.5, "3": 0.5}}"#).unwrap();
        assert_eq!(k, DistKind::Table([(1, 0.5), (3, 0.5)].into_iter().collect()));
    }
}
