//! Mean-field equations on the two-type Galton-Watson tree.
//!
//! `μ = (μ11, μ12, μ21, μ22)` collects inactivity probabilities of a node
//! reached along an edge: `μ_{j,j'}` is the probability that a community-`j'`
//! child of a community-`j` parent stays inactive. `F` maps `μ` to the next
//! generation, `Φ` turns `μ` into per-community inactive fractions, and the
//! process limit is `F^∞(1)`.
//!
//! Every component of `F` and `Φ` is an instance of one kernel
//!
//! ```text
//! Σ_{d_o, d_c} w(d_o, d_c) (1 - α) P(Bin(d_o - s_o, x_o) + Bin(d_c - s_c, x_c) < K)
//! ```
//!
//! where `x = 1 - μ` are children's activation probabilities and the shifts
//! `s` remove the parent edge.

use serde::{Deserialize, Serialize};

use crate::binom::{max_below, BinomialTable, LnFactorial};
use crate::contagion::perron_root;
use crate::dist::DegreeDistribution;
use crate::model::{Community, ModelSpec};
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
const DOMAIN_SLACK: f64 = 1e-12;
const MONOTONE_SLACK: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MuState(pub [f64; 4]);

impl MuState {
    pub const ONE: MuState = MuState([1.0; 4]);
    pub const ZERO: MuState = MuState([0.0; 4]);

    pub fn new(mu11: f64, mu12: f64, mu21: f64, mu22: f64) -> Self {
        MuState([mu11, mu12, mu21, mu22])
    }

    pub fn mu11(&self) -> f64 {
        self.0[0]
    }
    pub fn mu12(&self) -> f64 {
        self.0[1]
    }
    pub fn mu21(&self) -> f64 {
        self.0[2]
    }
    pub fn mu22(&self) -> f64 {
        self.0[3]
    }

    /// `μ_{c,c}`.
    pub fn own(&self, c: Community) -> f64 {
        self.0[own_col(c)]
    }

    /// `μ_{c,-c}`.
    pub fn cross(&self, c: Community) -> f64 {
        self.0[cross_col(c)]
    }

    pub fn max_abs_diff(&self, other: &MuState) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &MuState) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    /// Check `[0,1]^4` up to rounding and clamp.
    pub fn checked(&self) -> Result<MuState> {
        if self
            .0
            .iter()
            .any(|&m| !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&m))
        {
            return Err(Error::OutOfDomain(self.0));
        }
        Ok(MuState(self.0.map(|m| m.clamp(0.0, 1.0))))
    }
}

/// Inactive fraction per community.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhiPair(pub [f64; 2]);

impl PhiPair {
    pub fn phi1(&self) -> f64 {
        self.0[0]
    }
    pub fn phi2(&self) -> f64 {
        self.0[1]
    }
    pub fn get(&self, c: Community) -> f64 {
        self.0[c.index()]
    }
    /// Adopting fraction per community.
    pub fn adoption(&self) -> [f64; 2] {
        [1.0 - self.0[0], 1.0 - self.0[1]]
    }
}

/// `∇F`, rows and columns in [`MuState`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Jacobian4(pub [[f64; 4]; 4]);

impl Jacobian4 {
    pub const ZERO: Jacobian4 = Jacobian4([[0.0; 4]; 4]);

    /// Columns each row of `∇F` may depend on.
    pub const PATTERN: [[bool; 4]; 4] = [
        [true, true, false, false],
        [false, false, true, true],
        [true, true, false, false],
        [false, false, true, true],
    ];

    pub fn row_sums(&self) -> [f64; 4] {
        self.0.map(|r| r.iter().sum())
    }

    pub fn max_abs_diff(&self, other: &Jacobian4) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                m = m.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        m
    }
}

/// Root-node census: `Φ` uses the full own degree; the reduced variant drops
/// one own stub as if the root had a parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiVariant {
    #[default]
    FullDegree,
    ReducedDegree,
}

fn own_col(c: Community) -> usize {
    match c {
        Community::One => 0,
        Community::Two => 3,
    }
}

fn cross_col(c: Community) -> usize {
    match c {
        Community::One => 1,
        Community::Two => 2,
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    n_o: usize,
    n_c: usize,
    kmax: usize,
    w: f64,
}

/// One component of `F` or `Φ` with its support precomputed.
#[derive(Debug, Clone)]
struct Kernel {
    cells: Vec<Cell>,
    col_o: usize,
    col_c: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shift {
    Own,
    Cross,
    None,
    /// Drop one own stub without size-biasing (reduced-degree census).
    OwnUnbiased,
}

impl Kernel {
    fn build(model: &ModelSpec, c: Community, shift: Shift) -> Kernel {
        let own = model.law(c);
        let cross = model.cross_law();
        let (own_w, cross_w): (&DegreeDistribution, &DegreeDistribution) = match shift {
            Shift::Own => (model.biased_law(c).expect("checked by caller"), cross),
            Shift::Cross => (own, model.biased_cross_law().expect("checked by caller")),
            Shift::None | Shift::OwnUnbiased => (own, cross),
        };
        let (s_o, s_c) = match shift {
            Shift::Own | Shift::OwnUnbiased => (1, 0),
            Shift::Cross => (0, 1),
            Shift::None => (0, 0),
        };
        let mut cells = Vec::new();
        for (d_o, &p_o) in own_w.pmf_slice().iter().enumerate() {
            if p_o == 0.0 {
                continue;
            }
            for (d_c, &p_c) in cross_w.pmf_slice().iter().enumerate() {
                let w = p_o * p_c * (1.0 - model.alpha(c, d_o, d_c));
                if p_c == 0.0 || w == 0.0 {
                    continue;
                }
                let Some(kmax) = max_below(model.k(c, d_o, d_c)) else {
                    continue;
                };
                let n_o = d_o.saturating_sub(s_o);
                let n_c = d_c.saturating_sub(s_c);
                cells.push(Cell {
                    n_o,
                    n_c,
                    kmax: kmax.min(n_o + n_c),
                    w,
                });
            }
        }
        Kernel {
            cells,
            col_o: own_col(c),
            col_c: cross_col(c),
        }
    }

    /// Size-biased along `preferred`, falling back to the other edge type and
    /// then to no shift when the corresponding mean degree is zero.
    fn edge_kernel(model: &ModelSpec, c: Community, preferred: Shift) -> Kernel {
        let has = |s: Shift| match s {
            Shift::Own => model.biased_law(c).is_some(),
            Shift::Cross => model.biased_cross_law().is_some(),
            _ => true,
        };
        let other = if preferred == Shift::Own {
            Shift::Cross
        } else {
            Shift::Own
        };
        let shift = [preferred, other, Shift::None].into_iter().find(|&s| has(s)).unwrap();
        Kernel::build(model, c, shift)
    }

    fn eval(&self, t: &Tables) -> f64 {
        let (to, tc) = (&t.0[self.col_o], &t.0[self.col_c]);
        let mut total = 0.0;
        for cell in &self.cells {
            let mut inner = 0.0;
            for u_c in 0..=cell.kmax.min(cell.n_c) {
                inner += tc.pmf(u_c, cell.n_c) * to.cdf(cell.kmax - u_c, cell.n_o);
            }
            total += cell.w * inner;
        }
        total
    }

    /// `(∂/∂μ_own, ∂/∂μ_cross)`.
    fn grad(&self, t: &Tables) -> (f64, f64) {
        let (to, tc) = (&t.0[self.col_o], &t.0[self.col_c]);
        let (mut g_o, mut g_c) = (0.0, 0.0);
        for cell in &self.cells {
            if cell.n_o > 0 {
                let mut s = 0.0;
                for u_c in 0..=cell.kmax.min(cell.n_c) {
                    s += tc.pmf(u_c, cell.n_c) * to.pmf(cell.kmax - u_c, cell.n_o - 1);
                }
                g_o += cell.w * cell.n_o as f64 * s;
            }
            if cell.n_c > 0 {
                let mut s = 0.0;
                for u_o in 0..=cell.kmax.min(cell.n_o) {
                    s += to.pmf(u_o, cell.n_o) * tc.pmf(cell.kmax - u_o, cell.n_c - 1);
                }
                g_c += cell.w * cell.n_c as f64 * s;
            }
        }
        (g_o, g_c)
    }

    /// `(Σ i, Σ (d_o - u_o) i, Σ (d_c - u_c) i)` by direct enumeration of the
    /// lattice `u_o + u_c < K`.
    fn census(&self, t: &Tables) -> [f64; 3] {
        let (to, tc) = (&t.0[self.col_o], &t.0[self.col_c]);
        let mut out = [0.0; 3];
        for cell in &self.cells {
            for u_o in 0..=cell.kmax.min(cell.n_o) {
                let bo = to.pmf(u_o, cell.n_o);
                for u_c in 0..=(cell.kmax - u_o).min(cell.n_c) {
                    let i = cell.w * bo * tc.pmf(u_c, cell.n_c);
                    out[0] += i;
                    out[1] += (cell.n_o - u_o) as f64 * i;
                    out[2] += (cell.n_c - u_c) as f64 * i;
                }
            }
        }
        out
    }
}

/// Binomial tables at `x = 1 - μ_i` for each component.
struct Tables([BinomialTable; 4]);

/// Census terms behind the observables of the reconstructed ODE state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Census {
    /// `φ_j = Σ i^(j)`.
    pub phi: [f64; 2],
    /// `Σ (d_j - u_j) i^(j)`: own stubs still held by inactive nodes.
    pub own_residual: [f64; 2],
    /// `Σ (d_{-j} - u_{-j}) i^(j)`: cross stubs still held by inactive nodes.
    pub cross_residual: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint {
    pub mu: MuState,
    pub phi: PhiPair,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationVerdict {
    /// `ρ(∇F(μ*)) < 1`: the process stops at `μ*`.
    Terminates,
    /// `ρ(∇F(μ*)) > 1`.
    DoesNotTerminate,
    /// `ρ` within `1e-9` of 1.
    Indeterminate,
}

/// Precomputed `F`, `Φ` and `∇F` for one model.
#[derive(Debug, Clone)]
pub struct MeanField {
    lf: LnFactorial,
    n_max: usize,
    f: [Kernel; 4],
    phi: [Kernel; 2],
    phi_reduced: [Kernel; 2],
    seed_mass: [f64; 2],
}

impl MeanField {
    pub fn new(model: &ModelSpec) -> Self {
        use Community::{One, Two};
        let n_max = model
            .law(One)
            .dmax()
            .max(model.law(Two).dmax())
            .max(model.cross_law().dmax());
        MeanField {
            lf: LnFactorial::new(n_max),
            n_max,
            f: [
                Kernel::edge_kernel(model, One, Shift::Own),
                Kernel::edge_kernel(model, Two, Shift::Cross),
                Kernel::edge_kernel(model, One, Shift::Cross),
                Kernel::edge_kernel(model, Two, Shift::Own),
            ],
            phi: [
                Kernel::build(model, One, Shift::None),
                Kernel::build(model, Two, Shift::None),
            ],
            phi_reduced: [
                Kernel::build(model, One, Shift::OwnUnbiased),
                Kernel::build(model, Two, Shift::OwnUnbiased),
            ],
            seed_mass: [model.seed_fraction(One), model.seed_fraction(Two)],
        }
    }

    fn tables(&self, mu: &MuState) -> Tables {
        Tables(mu.0.map(|m| BinomialTable::new(&self.lf, self.n_max, 1.0 - m)))
    }

    /// `F(μ)`.
    pub fn apply(&self, mu: &MuState) -> Result<MuState> {
        let t = self.tables(&mu.checked()?);
        Ok(MuState(std::array::from_fn(|i| self.f[i].eval(&t))))
    }

    /// `Φ(μ)` with the full own degree.
    pub fn phi(&self, mu: &MuState) -> Result<PhiPair> {
        self.phi_variant(mu, PhiVariant::FullDegree)
    }

    pub fn phi_variant(&self, mu: &MuState, variant: PhiVariant) -> Result<PhiPair> {
        let t = self.tables(&mu.checked()?);
        let k = match variant {
            PhiVariant::FullDegree => &self.phi,
            PhiVariant::ReducedDegree => &self.phi_reduced,
        };
        Ok(PhiPair([k[0].eval(&t), k[1].eval(&t)]))
    }

    /// `F(μ)` and `Φ(μ)` sharing one set of tables.
    pub fn apply_with_phi(&self, mu: &MuState) -> Result<(MuState, PhiPair)> {
        let t = self.tables(&mu.checked()?);
        Ok((
            MuState(std::array::from_fn(|i| self.f[i].eval(&t))),
            PhiPair([self.phi[0].eval(&t), self.phi[1].eval(&t)]),
        ))
    }

    /// Census sums over the inactive-node lattice at `μ`.
    pub fn census(&self, mu: &MuState) -> Result<Census> {
        let t = self.tables(&mu.checked()?);
        let a = self.phi[0].census(&t);
        let b = self.phi[1].census(&t);
        Ok(Census {
            phi: [a[0], b[0]],
            own_residual: [a[1], b[1]],
            cross_residual: [a[2], b[2]],
        })
    }

    /// Analytic `∇F(μ)`; entries outside [`Jacobian4::PATTERN`] are exactly 0.
    pub fn jacobian(&self, mu: &MuState) -> Result<Jacobian4> {
        let t = self.tables(&mu.checked()?);
        let mut j = Jacobian4::ZERO;
        for (row, k) in self.f.iter().enumerate() {
            let (g_o, g_c) = k.grad(&t);
            j.0[row][k.col_o] = g_o;
            j.0[row][k.col_c] = g_c;
        }
        Ok(j)
    }

    /// Expected seeded fraction per community.
    pub fn seed_mass(&self) -> [f64; 2] {
        self.seed_mass
    }

    /// Iterate `μ ← F(μ)` from `1`; every iterate must be componentwise
    /// no larger than the previous one.
    pub fn fixed_point(&self, tol: f64, max_iter: usize) -> Result<FixedPoint> {
        self.fixed_point_with(tol, max_iter, |_, _| {})
    }

    /// As [`MeanField::fixed_point`], handing every iterate to `observe`.
    pub fn fixed_point_with<O: FnMut(usize, &MuState)>(
        &self,
        tol: f64,
        max_iter: usize,
        mut observe: O,
    ) -> Result<FixedPoint> {
        let mut mu = MuState::ONE;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < max_iter {
            let next = self.apply(&mu)?;
            iterations += 1;
            for i in 0..4 {
                let excess = next.0[i] - mu.0[i];
                if excess > MONOTONE_SLACK {
                    return Err(Error::NonMonotone {
                        iteration: iterations,
                        component: i,
                        excess,
                    });
                }
            }
            observe(iterations, &next);
            let step = next.max_abs_diff(&mu);
            mu = next;
            if step < tol {
                converged = true;
                break;
            }
        }
        Ok(FixedPoint {
            mu,
            phi: self.phi(&mu)?,
            iterations,
            converged,
        })
    }

    /// Whether the process stops at the fixed point `mu_star`, decided by the
    /// Perron root of `∇F(mu_star)`.
    pub fn termination_check(&self, mu_star: &MuState) -> Result<(TerminationVerdict, f64)> {
        let residual = self.apply(mu_star)?.max_abs_diff(mu_star);
        if residual > 1e-10 {
            return Err(Error::NotFixedPoint(residual));
        }
        let rho = perron_root(&self.jacobian(mu_star)?)?;
        let verdict = if (rho - 1.0).abs() <= 1e-9 {
            TerminationVerdict::Indeterminate
        } else if rho < 1.0 {
            TerminationVerdict::Terminates
        } else {
            TerminationVerdict::DoesNotTerminate
        };
        Ok((verdict, rho))
    }
}

pub fn apply_f(model: &ModelSpec, mu: &MuState) -> Result<MuState> {
    MeanField::new(model).apply(mu)
}

pub fn phi(model: &ModelSpec, mu: &MuState) -> Result<PhiPair> {
    MeanField::new(model).phi(mu)
}

pub fn jacobian_f(model: &ModelSpec, mu: &MuState) -> Result<Jacobian4> {
    MeanField::new(model).jacobian(mu)
}

pub fn fixed_point(model: &ModelSpec, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    MeanField::new(model).fixed_point(tol, max_iter)
}

pub fn termination_check(model: &ModelSpec, mu_star: &MuState) -> Result<(TerminationVerdict, f64)> {
    MeanField::new(model).termination_check(mu_star)
}

/// Central finite-difference Jacobian of `F`.
pub fn jacobian_fd(mf: &MeanField, mu: &MuState, h: f64) -> Result<Jacobian4> {
    let mut j = Jacobian4::ZERO;
    for col in 0..4 {
        let (mut lo, mut hi) = (*mu, *mu);
        lo.0[col] = (mu.0[col] - h).max(0.0);
        hi.0[col] = (mu.0[col] + h).min(1.0);
        let span = hi.0[col] - lo.0[col];
        let (f_lo, f_hi) = (mf.apply(&lo)?, mf.apply(&hi)?);
        for row in 0..4 {
            j.0[row][col] = (f_hi.0[row] - f_lo.0[row]) / span;
        }
    }
    Ok(j)
}
