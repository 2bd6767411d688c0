//! Contagion threshold: does a vanishing seed set trigger a cascade?
//!
//! The answer is read off the Perron root of `∇F` at the no-seed point
//! `(α = 0, μ = 1)`, where only pivotal nodes (`0 < K ≤ 1`) contribute.

use serde::Serialize;

use crate::meanfield::{Jacobian4, MeanField, MuState, PhiPair, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::model::{Community, ModelSpec, SeedingRule};
use crate::{Error, Result};

/// Half-width of the band around 1 reported as indeterminate.
pub const INDETERMINATE_BAND: f64 = 1e-9;

/// `∇F(0, 1)`: the Jacobian at `μ = 1` with seeding switched off.
pub fn grad_at_one(model: &ModelSpec) -> Result<Jacobian4> {
    let unseeded = model.with_seeding(SeedingRule::GlobalUniform(0.0))?;
    MeanField::new(&unseeded).jacobian(&MuState::ONE)
}

/// Closed-form pivotal sums for `∇F(0, 1)`.
///
/// Each nonzero entry is `Σ P_c(d_o) P_m(d_c) (d_a d_b / λ) 1{0 < K ≤ 1}` where
/// `d_a` counts the stubs of the parent-edge type, `d_b` the stubs pointing to
/// the differentiated child type (minus one when the types coincide), and `λ`
/// is the mean of the parent-edge law.
pub fn pivotal_masses(model: &ModelSpec) -> Jacobian4 {
    #[derive(Clone, Copy, PartialEq)]
    enum Axis {
        Own,
        Cross,
    }
    let sum = |c: Community, parent: Axis, child: Axis| -> f64 {
        let lam = match parent {
            Axis::Own => model.lambda(c),
            Axis::Cross => model.lambda_m(),
        };
        let mut s = 0.0;
        for (d_o, &p) in model.law(c).pmf_slice().iter().enumerate() {
            for (d_c, &q) in model.cross_law().pmf_slice().iter().enumerate() {
                let k = model.k(c, d_o, d_c);
                if !(k > 0.0 && k <= 1.0) {
                    continue;
                }
                let pick = |a: Axis| if a == Axis::Own { d_o } else { d_c };
                let d_a = pick(parent) as f64;
                let d_b = if parent == child {
                    pick(child).saturating_sub(1)
                } else {
                    pick(child)
                } as f64;
                s += p * q * d_a * d_b / lam;
            }
        }
        s
    };
    // parent axis for each row, falling back as the mean-field kernels do
    let parent = |c: Community, preferred: Axis| -> Option<Axis> {
        let ok = |a: Axis| match a {
            Axis::Own => model.lambda(c) > 0.0,
            Axis::Cross => model.lambda_m() > 0.0,
        };
        let other = if preferred == Axis::Own { Axis::Cross } else { Axis::Own };
        [preferred, other].into_iter().find(|&a| ok(a))
    };
    use Community::{One, Two};
    let mut j = Jacobian4::ZERO;
    // row, node community, preferred parent axis, own column, cross column
    let rows = [
        (0, One, Axis::Own, 0, 1),
        (1, Two, Axis::Cross, 3, 2),
        (2, One, Axis::Cross, 0, 1),
        (3, Two, Axis::Own, 3, 2),
    ];
    for (row, c, preferred, col_o, col_c) in rows {
        let Some(p) = parent(c, preferred) else {
            continue;
        };
        j.0[row][col_o] = sum(c, p, Axis::Own);
        j.0[row][col_c] = sum(c, p, Axis::Cross);
    }
    j
}

/// Perron root of a nonnegative matrix.
///
/// Each strongly connected block `B` is handled separately: power iteration
/// on the primitive matrix `B + I` from the all-ones vector, stopped when
/// successive Rayleigh quotients agree to `1e-13` (or after `1e5` rounds).
pub fn perron_root(m: &Jacobian4) -> Result<f64> {
    for i in 0..4 {
        for j in 0..4 {
            if m.0[i][j] < 0.0 || m.0[i][j].is_nan() {
                return Err(Error::NegativeEntry(i, j));
            }
        }
    }
    let mut reach = [[false; 4]; 4];
    for (i, row) in reach.iter_mut().enumerate() {
        for (j, r) in row.iter_mut().enumerate() {
            *r = i == j || m.0[i][j] > 0.0;
        }
    }
    for k in 0..4 {
        for i in 0..4 {
            for j in 0..4 {
                reach[i][j] |= reach[i][k] && reach[k][j];
            }
        }
    }
    let mut seen = [false; 4];
    let mut rho: f64 = 0.0;
    for i in 0..4 {
        if seen[i] {
            continue;
        }
        let block: Vec<usize> = (0..4).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &block {
            seen[j] = true;
        }
        rho = rho.max(block_root(m, &block));
    }
    Ok(rho)
}

fn block_root(m: &Jacobian4, block: &[usize]) -> f64 {
    let k = block.len();
    if k == 1 {
        return m.0[block[0]][block[0]];
    }
    let a = |i: usize, j: usize| m.0[block[i]][block[j]] + if i == j { 1.0 } else { 0.0 };
    let mut v = vec![1.0 / (k as f64).sqrt(); k];
    let mut prev = f64::NAN;
    for _ in 0..100_000 {
        let w: Vec<f64> = (0..k).map(|i| (0..k).map(|j| a(i, j) * v[j]).sum()).collect();
        let rayleigh: f64 = (0..k).map(|i| v[i] * w[i]).sum();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / norm).collect();
        if (rayleigh - prev).abs() < 1e-13 {
            return rayleigh - 1.0;
        }
        prev = rayleigh;
    }
    prev - 1.0
}

#[derive(Debug, Clone, Serialize)]
pub struct ContagionReport {
    pub jacobian: Jacobian4,
    pub pivotal: Jacobian4,
    pub rho: f64,
    pub contagious: bool,
    pub margin: f64,
    pub indeterminate: bool,
}

/// Assemble `∇F(0,1)`, its Perron root and the predicate `ρ > 1`.
pub fn is_contagious(model: &ModelSpec) -> Result<ContagionReport> {
    let jacobian = grad_at_one(model)?;
    let rho = perron_root(&jacobian)?;
    let margin = (rho - 1.0).abs();
    Ok(ContagionReport {
        jacobian,
        pivotal: pivotal_masses(model),
        rho,
        contagious: rho > 1.0,
        margin,
        indeterminate: margin < INDETERMINATE_BAND,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SmallSeedRow {
    pub alpha: f64,
    pub mu: MuState,
    pub phi: PhiPair,
    /// Population-weighted adopting fraction.
    pub adoption: f64,
    /// Adoption in excess of the seeds and of the unseeded baseline.
    pub excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallSeedTable {
    pub rows: Vec<SmallSeedRow>,
    /// Adoption of the unseeded fixed point, subtracted from every excess.
    pub baseline: f64,
    /// `Some(true)` when the excess adoption stays bounded away from 0,
    /// `Some(false)` when it vanishes with the seed, `None` for one row.
    pub contagion: Option<bool>,
}

/// Fixed points under uniform seeding `α` for a decreasing sequence of `α`.
///
/// Without contagion the excess adoption shrinks linearly with `α`; the
/// verdict is "contagion" when, across the sequence, the excess shrinks by
/// less than the square root of the `α` ratio.
pub fn small_seed_limit(model: &ModelSpec, alphas: &[f64]) -> Result<SmallSeedTable> {
    if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
        return Err(Error::InvalidModel("seed fractions must lie in (0,1]".into()));
    }
    if alphas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidModel("seed fractions must strictly decrease".into()));
    }
    let (n1, n2) = (model.n1() as f64, model.n2() as f64);
    let solve = |alpha: f64| -> Result<(MuState, PhiPair, f64)> {
        let m = model.with_seeding(SeedingRule::GlobalUniform(alpha))?;
        let fp = MeanField::new(&m).fixed_point(DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let ad = fp.phi.adoption();
        Ok((fp.mu, fp.phi, (n1 * ad[0] + n2 * ad[1]) / (n1 + n2)))
    };
    // nodes with K ≤ 0 adopt with no seeds at all
    let baseline = solve(0.0)?.2;
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let (mu, phi, adoption) = solve(alpha)?;
        rows.push(SmallSeedRow {
            alpha,
            mu,
            phi,
            adoption,
            excess: (adoption - alpha - baseline).max(0.0),
        });
    }
    let contagion = if rows.len() < 2 {
        None
    } else {
        let (first, last) = (rows[0], rows[rows.len() - 1]);
        let ratio = if first.excess > 0.0 {
            last.excess / first.excess
        } else {
            0.0
        };
        Some(ratio > (last.alpha / first.alpha).sqrt())
    };
    Ok(SmallSeedTable {
        rows,
        baseline,
        contagion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DegreeDistribution;
    use crate::model::ThresholdRule;
    use rand::Rng;

    fn sym(lambda: f64, lambda_m: f64, theta: f64) -> ModelSpec {
        ModelSpec::poisson(lambda, lambda, lambda_m, 1000, theta, SeedingRule::GlobalUniform(0.0)).unwrap()
    }

    #[test]
    fn perron_of_scaled_identity_and_zero() {
        let mut m = Jacobian4::ZERO;
        assert_eq!(perron_root(&m).unwrap(), 0.0);
        for i in 0..4 {
            m.0[i][i] = 2.5;
        }
        assert_eq!(perron_root(&m).unwrap(), 2.5);
    }

    #[test]
    fn perron_of_rank_one() {
        let mut r = crate::rng::master(3);
        for _ in 0..50 {
            let v: [f64; 4] = std::array::from_fn(|_| r.random_range(0.01..2.0));
            let w: [f64; 4] = std::array::from_fn(|_| r.random_range(0.01..2.0));
            let m = Jacobian4(std::array::from_fn(|i| std::array::from_fn(|j| v[i] * w[j])));
            let expect: f64 = (0..4).map(|i| v[i] * w[i]).sum();
            assert!((perron_root(&m).unwrap() - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn perron_rejects_negative_entries() {
        let mut m = Jacobian4::ZERO;
        m.0[1][2] = -1e-3;
        assert!(matches!(perron_root(&m), Err(Error::NegativeEntry(1, 2))));
    }

    #[test]
    fn perron_handles_reducible_blocks() {
        // upper-triangular: eigenvalues are the diagonal
        let m = Jacobian4([
            [0.5, 3.0, 0.0, 1.0],
            [0.0, 0.2, 7.0, 0.0],
            [0.0, 0.0, 1.7, 2.0],
            [0.0, 0.0, 0.0, 0.1],
        ]);
        assert!((perron_root(&m).unwrap() - 1.7).abs() < 1e-12);
    }

    #[test]
    fn pivotal_closed_form_matches_general_jacobian() {
        for (l1, l2, lm, th) in [(8.0, 8.0, 1.0, 0.25), (3.0, 6.0, 0.5, 0.3), (2.0, 2.0, 2.0, 0.45)] {
            let m = ModelSpec::poisson(l1, l2, lm, 10, th, SeedingRule::GlobalUniform(0.0)).unwrap();
            let a = grad_at_one(&m).unwrap();
            let b = pivotal_masses(&m);
            assert!(a.max_abs_diff(&b) < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn poisson_entry_oracle() {
        let m = sym(8.0, 1.0, 0.25);
        let j = grad_at_one(&m).unwrap();
        let (p, q) = (m.law(Community::One), m.cross_law());
        let mut s = 0.0;
        for d1 in 0..=p.dmax() {
            for d2 in 0..=q.dmax() {
                if d1 + d2 <= 4 {
                    s += p.pmf(d1) * q.pmf(d2) * (d1 as f64) * (d1 as f64 - 1.0);
                }
            }
        }
        // d1 + d2 = 0 contributes 0 through the d1 factor
        assert!((j.0[0][0] - s / 8.0).abs() < 1e-12);
    }

    #[test]
    fn high_threshold_is_never_contagious() {
        let m = ModelSpec::new(
            DegreeDistribution::table([(2, 0.5), (5, 0.5)]).unwrap(),
            DegreeDistribution::regular(3).unwrap(),
            DegreeDistribution::table([(0, 0.5), (1, 0.5)]).unwrap(),
            10,
            10,
            ThresholdRule::Linear(0.6),
            SeedingRule::GlobalUniform(0.0),
        )
        .unwrap();
        let r = is_contagious(&m).unwrap();
        assert_eq!(r.jacobian, Jacobian4::ZERO);
        assert_eq!(r.rho, 0.0);
        assert!(!r.contagious);
    }

    #[test]
    fn perron_bounds_and_window() {
        // single-community window for θ = 0.25 is roughly λ ∈ (1.1, 3.9)
        for (lam, inside) in [(0.6, false), (2.0, true), (3.0, true), (6.0, false)] {
            let r = is_contagious(&sym(lam * 0.8, lam * 0.2, 0.25)).unwrap();
            assert_eq!(r.contagious, inside, "λ = {lam}: ρ = {}", r.rho);
            let sums = r.jacobian.row_sums();
            let lo = sums.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = sums.iter().cloned().fold(0.0, f64::max);
            assert!(lo - 1e-12 <= r.rho && r.rho <= hi + 1e-12);
        }
    }

    #[test]
    fn rho_is_continuous_along_a_sweep() {
        let mut prev: Option<f64> = None;
        for i in 0..=200 {
            let lam = 1.0 + 0.01 * i as f64;
            let rho = is_contagious(&sym(lam, 1.0, 0.25)).unwrap().rho;
            if let Some(p) = prev {
                assert!((rho - p).abs() < 0.1, "λ = {lam}");
            }
            prev = Some(rho);
        }
    }

    #[test]
    fn small_seed_verdicts() {
        let alphas = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
        let off = small_seed_limit(&sym(5.0, 1.0, 0.25), &alphas).unwrap();
        assert_eq!(off.contagion, Some(false));
        assert!(off.rows.windows(2).all(|w| w[1].excess <= w[0].excess));
        let on = small_seed_limit(&sym(1.5, 1.0, 0.25), &alphas).unwrap();
        assert_eq!(on.contagion, Some(true));
        assert!(on.rows.iter().all(|r| r.excess > 0.1));
        let single = small_seed_limit(&sym(1.5, 1.0, 0.25), &[0.01]).unwrap();
        assert_eq!(single.rows.len(), 1);
        assert_eq!(single.contagion, None);
        assert!(small_seed_limit(&sym(1.5, 1.0, 0.25), &[0.01, 0.1]).is_err());
    }
}
