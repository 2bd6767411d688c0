//! The four-dimensional flow behind the scaled cascade chain.
//!
//! Two parameterizations trace the same curve in `μ`-space:
//!
//! * trajectory mode integrates `dμ/ds = F(μ) - μ` from `μ = 1`;
//! * physical mode integrates `dμ/dt = -a/(S λ μ)` in chain time `t = k/n`,
//!   with every `a`-term rebuilt from `(μ, t)` at each stage, and stops when
//!   the active-stub mass `S` drops below `ε`.
//!
//! Poisson and symmetric models collapse to two dimensions, and models that
//! satisfy both hypotheses to a single Poisson community.

use serde::{Deserialize, Serialize};

use crate::binom::{self, max_below, LnFactorial};
use crate::dist::DegreeDistribution;
use crate::meanfield::{MeanField, MuState, PhiPair, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::model::{Community, ModelSpec};
use crate::{Error, Result};

/// Accepted RK4 step: new state and, when sampled, drift and observables.
type PhysicalStep = Option<(MuState, Option<([f64; 4], Observables)>)>;

/// Residual below which the trajectory is declared stationary.
pub const STATIONARY_TOL: f64 = 1e-10;
const CLAMP_FLAG: f64 = 1e-9;
/// Largest relative decrease of a `μ` component in one physical step.
const MAX_REL_CHANGE: f64 = 0.02;
/// Cancellation allowance on reconstructed stub counts.
const NEGATIVE_STUBS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeMode {
    #[default]
    Trajectory,
    PhysicalTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdeConfig {
    pub step: f64,
    pub eps: f64,
    pub t_max: f64,
    pub mode: OdeMode,
    /// Keep every `sample_every`-th accepted step (first and last always).
    pub sample_every: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig {
            step: 1e-3,
            eps: 1e-6,
            t_max: 200.0,
            mode: OdeMode::Trajectory,
            sample_every: 10,
        }
    }
}

impl OdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step < 0.1) {
            return Err(Error::Config(format!("ODE step {} outside (0, 0.1)", self.step)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Config(format!("ODE ε {} outside (0, 1)", self.eps)));
        }
        if self.t_max.is_nan() || self.t_max <= 0.0 {
            return Err(Error::Config("t_max must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    DenominatorBelowEps,
    StationaryWithinTol,
    TMaxReached,
    /// A `μ` component fell below `ε` in physical mode.
    MuBelowEps,
}

/// Scaled observables rebuilt from `(μ, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observables {
    pub a: [f64; 2],
    pub am: [f64; 2],
    pub tau: [f64; 2],
    pub phi: [f64; 2],
    /// `S = a_1 + a_2 + a_m^(1) + a_m^(2)`.
    pub denom: f64,
}

impl Observables {
    /// Values in path order `a1, a2, am1, am2, tau1, tau2, phi1, phi2`.
    pub fn values(&self) -> [f64; 8] {
        [
            self.a[0],
            self.a[1],
            self.am[0],
            self.am[1],
            self.tau[0],
            self.tau[1],
            self.phi[0],
            self.phi[1],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeSample {
    /// Integration variable: trajectory parameter or physical time.
    pub t: f64,
    /// Chain time `k/n` (equal to `t` in physical mode).
    pub physical_t: f64,
    pub mu: MuState,
    pub obs: Observables,
}

impl OdeSample {
    pub const COLUMNS: [&'static str; 14] = [
        "t", "mu11", "mu12", "mu21", "mu22", "a1", "a2", "am1", "am2", "tau1", "tau2", "phi1", "phi2", "denom",
    ];

    pub fn values(&self) -> [f64; 14] {
        let m = self.mu.0;
        let o = &self.obs;
        [
            self.t, m[0], m[1], m[2], m[3], o.a[0], o.a[1], o.am[0], o.am[1], o.tau[0], o.tau[1], o.phi[0], o.phi[1],
            o.denom,
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OdeTrajectory {
    pub mode: OdeMode,
    pub samples: Vec<OdeSample>,
    pub terminal: MuState,
    pub terminal_t: f64,
    pub stop: StopReason,
    pub steps: usize,
    /// The state left `[0,1]^4` by more than `1e-9` and was clamped.
    pub clamped: bool,
}

impl OdeTrajectory {
    pub fn terminal_phi(&self) -> PhiPair {
        PhiPair(self.samples.last().map(|s| s.obs.phi).unwrap_or([1.0, 1.0]))
    }

    /// Observables at physical time `t`, linearly interpolated between
    /// samples and held constant past the last one.
    pub fn observables_at(&self, t: f64) -> [f64; 8] {
        let s = &self.samples;
        let idx = s.partition_point(|x| x.physical_t <= t);
        if idx == 0 {
            return s[0].obs.values();
        }
        if idx == s.len() {
            return s[s.len() - 1].obs.values();
        }
        let (a, b) = (&s[idx - 1], &s[idx]);
        let w = if b.physical_t > a.physical_t {
            (t - a.physical_t) / (b.physical_t - a.physical_t)
        } else {
            0.0
        };
        let (va, vb) = (a.obs.values(), b.obs.values());
        std::array::from_fn(|i| va[i] + w * (vb[i] - va[i]))
    }
}

/// A model bound to its precomputed mean-field kernels.
#[derive(Debug, Clone)]
pub struct OdeSystem {
    mf: MeanField,
    lambda: [f64; 2],
    lambda_m: f64,
}

impl OdeSystem {
    pub fn new(model: &ModelSpec) -> Self {
        OdeSystem {
            mf: MeanField::new(model),
            lambda: [model.lambda(Community::One), model.lambda(Community::Two)],
            lambda_m: model.lambda_m(),
        }
    }

    pub fn mean_field(&self) -> &MeanField {
        &self.mf
    }

    /// Scaled `a_j, a_m^(j), τ_j, φ_j` at `(μ, t)`.
    pub fn reconstruct(&self, mu: &MuState, t: f64) -> Result<Observables> {
        let c = self.mf.census(mu)?;
        let tau = [
            0.5 * self.lambda[0] * (1.0 - mu.mu11() * mu.mu11()),
            0.5 * self.lambda[1] * (1.0 - mu.mu22() * mu.mu22()),
        ];
        let cross_left = self.lambda_m - (t - tau[0] - tau[1]);
        let a = [
            self.lambda[0] - 2.0 * tau[0] - c.own_residual[0],
            self.lambda[1] - 2.0 * tau[1] - c.own_residual[1],
        ];
        let am = [cross_left - c.cross_residual[0], cross_left - c.cross_residual[1]];
        Ok(Observables {
            a,
            am,
            tau,
            phi: c.phi,
            denom: a[0] + a[1] + am[0] + am[1],
        })
    }

    /// Chain time implied by a point of the trajectory, from the cross-edge
    /// identity `λ_m μ21 μ12 = λ_m - (t - τ_1 - τ_2)`.
    pub fn implied_time(&self, mu: &MuState) -> f64 {
        0.5 * self.lambda[0] * (1.0 - mu.mu11() * mu.mu11())
            + 0.5 * self.lambda[1] * (1.0 - mu.mu22() * mu.mu22())
            + self.lambda_m * (1.0 - mu.mu21() * mu.mu12())
    }

    fn sample(&self, t: f64, physical_t: f64, mu: MuState) -> Result<OdeSample> {
        Ok(OdeSample {
            t,
            physical_t,
            mu,
            obs: self.reconstruct(&mu, physical_t)?,
        })
    }

    /// RK4 on `dμ/ds = F(μ) - μ` from `μ = 1`.
    pub fn integrate_trajectory(&self, cfg: &OdeConfig) -> Result<OdeTrajectory> {
        cfg.validate()?;
        let field = |mu: &MuState| -> Result<[f64; 4]> {
            let f = self.mf.apply(mu)?;
            Ok(std::array::from_fn(|i| f.0[i] - mu.0[i]))
        };
        let mut mu = MuState::ONE;
        let mut t = 0.0;
        let mut samples = vec![self.sample(0.0, 0.0, mu)?];
        let mut steps = 0;
        let mut clamped = false;
        let stop = loop {
            let k1 = field(&mu)?;
            if k1.iter().all(|v| v.abs() < STATIONARY_TOL) {
                break StopReason::StationaryWithinTol;
            }
            if t >= cfg.t_max - 1e-12 * cfg.step {
                break StopReason::TMaxReached;
            }
            let h = cfg.step.min(cfg.t_max - t);
            let k2 = field(&relaxed(axpy(&mu, 0.5 * h, &k1)))?;
            let k3 = field(&relaxed(axpy(&mu, 0.5 * h, &k2)))?;
            let k4 = field(&relaxed(axpy(&mu, h, &k3)))?;
            let raw: [f64; 4] =
                std::array::from_fn(|i| mu.0[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
            if raw.iter().any(|&m| !(-CLAMP_FLAG..=1.0 + CLAMP_FLAG).contains(&m)) {
                clamped = true;
            }
            let next = MuState(raw.map(|m| m.clamp(0.0, 1.0)));
            check_monotone(steps, &mu, &next)?;
            mu = next;
            t += h;
            steps += 1;
            if steps % cfg.sample_every.max(1) == 0 {
                samples.push(self.sample(t, self.implied_time(&mu), mu)?);
            }
        };
        if samples.last().map(|s| s.t) != Some(t) {
            samples.push(self.sample(t, self.implied_time(&mu), mu)?);
        }
        Ok(OdeTrajectory {
            mode: OdeMode::Trajectory,
            samples,
            terminal: mu,
            terminal_t: t,
            stop,
            steps,
            clamped,
        })
    }

    /// Physical-time derivative, or `None` where the flow is undefined
    /// (`S ≤ 0` or a divisor `μ ≤ 0`).
    fn physical_field(&self, mu: &MuState, t: f64) -> Result<Option<([f64; 4], Observables)>> {
        if mu.0.iter().any(|&m| !(0.0..=1.0).contains(&m)) {
            return Ok(None);
        }
        let o = self.reconstruct(mu, t)?;
        // a negative active stub count means the step ran past the stall;
        // rounding-level negatives are clamped, with S summed over the same
        // clamped terms so the drifts still add to 1
        if o.a.iter().chain(&o.am).any(|&x| x < -NEGATIVE_STUBS) {
            return Ok(None);
        }
        let s: f64 = o.a.iter().chain(&o.am).map(|x| x.max(0.0)).sum();
        if s.is_nan() || s <= 0.0 {
            return Ok(None);
        }
        let own = |a: f64, lam: f64, m: f64| -> Option<f64> {
            if lam == 0.0 {
                Some(0.0)
            } else if m > 0.0 {
                Some(-a.max(0.0) / (s * lam * m))
            } else {
                None
            }
        };
        let d = [
            own(o.a[0], self.lambda[0], mu.mu11()),
            own(o.am[1], self.lambda_m, mu.mu21()),
            own(o.am[0], self.lambda_m, mu.mu12()),
            own(o.a[1], self.lambda[1], mu.mu22()),
        ];
        if d.iter().any(Option::is_none) {
            return Ok(None);
        }
        Ok(Some((d.map(Option::unwrap), o)))
    }

    /// RK4 in chain time from `μ = 1`, `t = 0`, until `S < ε`.
    ///
    /// A step that would leave the domain of the flow, or move a component
    /// by more than 2% of its value, is retried with half the step size;
    /// the step grows back to `h` once the flow is gentle again.
    pub fn integrate_physical(&self, cfg: &OdeConfig) -> Result<OdeTrajectory> {
        cfg.validate()?;
        let mut mu = MuState::ONE;
        let mut t = 0.0;
        let mut h = cfg.step;
        let mut samples = Vec::new();
        let mut steps = 0;
        let mut clamped = false;
        let mut current = self.physical_field(&mu, t)?;
        samples.push(OdeSample {
            t,
            physical_t: t,
            mu,
            obs: self.reconstruct(&mu, t)?,
        });
        let stop = loop {
            let Some((k1, obs)) = current else {
                break StopReason::DenominatorBelowEps;
            };
            if obs.denom < cfg.eps {
                break StopReason::DenominatorBelowEps;
            }
            if mu.0.iter().any(|&m| m < cfg.eps) {
                break StopReason::MuBelowEps;
            }
            if t >= cfg.t_max - 1e-12 * cfg.step {
                break StopReason::TMaxReached;
            }
            if h < cfg.step * 1e-12 {
                break StopReason::DenominatorBelowEps;
            }
            let hh = h.min(cfg.t_max - t);
            let attempt = (|| -> Result<PhysicalStep> {
                let Some((k2, _)) = self.physical_field(&axpy(&mu, 0.5 * hh, &k1), t + 0.5 * hh)? else {
                    return Ok(None);
                };
                let Some((k3, _)) = self.physical_field(&axpy(&mu, 0.5 * hh, &k2), t + 0.5 * hh)? else {
                    return Ok(None);
                };
                let Some((k4, _)) = self.physical_field(&axpy(&mu, hh, &k3), t + hh)? else {
                    return Ok(None);
                };
                let raw: [f64; 4] =
                    std::array::from_fn(|i| mu.0[i] + hh / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
                if raw.iter().any(|&m| m.is_nan() || m <= 0.0 || m > 1.0 + CLAMP_FLAG) {
                    return Ok(None);
                }
                // μ ~ sqrt(t* - t) near a complete cascade
                if (0..4).any(|i| (raw[i] - mu.0[i]).abs() > MAX_REL_CHANGE * mu.0[i]) {
                    return Ok(None);
                }
                let next = MuState(raw.map(|m| m.min(1.0)));
                let field = self.physical_field(&next, t + hh)?;
                if field.is_none() {
                    return Ok(None);
                }
                Ok(Some((next, field)))
            })()?;
            let Some((next, field)) = attempt else {
                h *= 0.5;
                continue;
            };
            if next.0.iter().any(|&m| m > 1.0) {
                clamped = true;
            }
            check_monotone(steps, &mu, &next)?;
            let rel = (0..4)
                .map(|i| (mu.0[i] - next.0[i]).abs() / mu.0[i])
                .fold(0.0, f64::max);
            if rel < 0.25 * MAX_REL_CHANGE && h < cfg.step {
                h = (2.0 * h).min(cfg.step);
            }
            mu = next;
            t += hh;
            steps += 1;
            current = field;
            if steps % cfg.sample_every.max(1) == 0 {
                let obs = current.map(|c| c.1).unwrap();
                samples.push(OdeSample {
                    t,
                    physical_t: t,
                    mu,
                    obs,
                });
            }
        };
        if samples.last().map(|s| s.t) != Some(t) {
            samples.push(OdeSample {
                t,
                physical_t: t,
                mu,
                obs: self.reconstruct(&mu, t)?,
            });
        }
        Ok(OdeTrajectory {
            mode: OdeMode::PhysicalTime,
            samples,
            terminal: mu,
            terminal_t: t,
            stop,
            steps,
            clamped,
        })
    }

    pub fn integrate(&self, cfg: &OdeConfig) -> Result<OdeTrajectory> {
        match cfg.mode {
            OdeMode::Trajectory => self.integrate_trajectory(cfg),
            OdeMode::PhysicalTime => self.integrate_physical(cfg),
        }
    }
}

fn axpy(mu: &MuState, h: f64, k: &[f64; 4]) -> MuState {
    MuState(std::array::from_fn(|i| mu.0[i] + h * k[i]))
}

/// Intermediate RK stages may overshoot `[0,1]` by rounding.
fn relaxed(mu: MuState) -> MuState {
    MuState(mu.0.map(|m| m.clamp(0.0, 1.0)))
}

fn check_monotone(step: usize, prev: &MuState, next: &MuState) -> Result<()> {
    for i in 0..4 {
        let excess = next.0[i] - prev.0[i];
        if excess > 1e-12 {
            return Err(Error::NonMonotone {
                iteration: step,
                component: i,
                excess,
            });
        }
    }
    Ok(())
}

pub fn integrate_trajectory(model: &ModelSpec, cfg: &OdeConfig) -> Result<OdeTrajectory> {
    OdeSystem::new(model).integrate_trajectory(cfg)
}

pub fn integrate_physical(model: &ModelSpec, cfg: &OdeConfig) -> Result<OdeTrajectory> {
    OdeSystem::new(model).integrate_physical(cfg)
}

pub fn reconstruct(model: &ModelSpec, mu: &MuState, t: f64) -> Result<Observables> {
    OdeSystem::new(model).reconstruct(mu, t)
}

/// Hausdorff distance (max-norm) between two sampled point sets.
pub fn hausdorff(a: &[MuState], b: &[MuState]) -> f64 {
    let directed = |x: &[MuState], y: &[MuState]| -> f64 {
        x.iter()
            .map(|p| y.iter().map(|q| p.max_abs_diff(q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// RK4 on a planar system `dν/ds = G(ν) - ν` from `ν = 1`.
fn rk4_planar<G: Fn(&[f64; 2]) -> [f64; 2]>(g: G, step: f64, t_max: f64) -> ReducedTrajectory {
    let field = |v: &[f64; 2]| {
        let x = g(v);
        [x[0] - v[0], x[1] - v[1]]
    };
    let mut v = [1.0, 1.0];
    let mut t = 0.0;
    let mut samples = vec![(0.0, v)];
    let stop = loop {
        let k1 = field(&v);
        if k1.iter().all(|x| x.abs() < STATIONARY_TOL) {
            break StopReason::StationaryWithinTol;
        }
        if t >= t_max - 1e-12 * step {
            break StopReason::TMaxReached;
        }
        let h = step.min(t_max - t);
        let at = |k: &[f64; 2], c: f64| [(v[0] + c * k[0]).clamp(0.0, 1.0), (v[1] + c * k[1]).clamp(0.0, 1.0)];
        let k2 = field(&at(&k1, 0.5 * h));
        let k3 = field(&at(&k2, 0.5 * h));
        let k4 = field(&at(&k3, h));
        v = std::array::from_fn(|i| (v[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).clamp(0.0, 1.0));
        t += h;
        samples.push((t, v));
    };
    ReducedTrajectory {
        samples,
        terminal: v,
        stop,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReducedTrajectory {
    pub samples: Vec<(f64, [f64; 2])>,
    pub terminal: [f64; 2],
    pub stop: StopReason,
}

/// Grid of degrees on which degree-rule hypotheses are checked.
fn support_grid(model: &ModelSpec) -> impl Iterator<Item = (Community, usize, usize)> + '_ {
    Community::BOTH.into_iter().flat_map(move |c| {
        (0..=model.law(c).dmax()).flat_map(move |a| (0..=model.cross_law().dmax()).map(move |b| (c, a, b)))
    })
}

fn poisson_rates(model: &ModelSpec) -> Result<[f64; 3]> {
    let rate = |d: &DegreeDistribution, name: &str| {
        d.poisson_rate()
            .ok_or_else(|| Error::Hypothesis(format!("{name} is not Poisson")))
    };
    Ok([
        rate(model.law(Community::One), "P_1")?,
        rate(model.law(Community::Two), "P_2")?,
        rate(model.cross_law(), "P_m")?,
    ])
}

/// Planar reduction for Poisson laws with total-degree rules: `ν_j` is the
/// inactivity probability of a community-`j` node reached along any edge.
#[derive(Debug, Clone)]
pub struct PoissonReduction {
    lambda: [f64; 2],
    lambda_m: f64,
    /// Total-degree law `Poi(λ_j + λ_m)`.
    total: [Vec<f64>; 2],
    alpha: [Vec<f64>; 2],
    k: [Vec<f64>; 2],
    lf: LnFactorial,
}

pub fn reduce_poisson(model: &ModelSpec) -> Result<PoissonReduction> {
    let [l1, l2, lm] = poisson_rates(model)?;
    for (c, a, b) in support_grid(model) {
        if model.k(c, a, b) != model.k(c, a + b, 0) {
            return Err(Error::Hypothesis(format!(
                "threshold of {c:?} depends on more than total degree at ({a}, {b})"
            )));
        }
        if model.alpha(c, a, b) != model.alpha(c, a + b, 0) {
            return Err(Error::Hypothesis(format!(
                "seeding of {c:?} depends on more than total degree at ({a}, {b})"
            )));
        }
    }
    let law = |l: f64| -> Result<Vec<f64>> {
        if l + lm > 0.0 {
            Ok(DegreeDistribution::poisson(l + lm)?.pmf_slice().to_vec())
        } else {
            Ok(vec![1.0])
        }
    };
    let total = [law(l1)?, law(l2)?];
    let smax = total[0].len().max(total[1].len()) + 1;
    let rule = |f: &dyn Fn(Community, usize) -> f64, c: Community| (0..=smax).map(|s| f(c, s)).collect::<Vec<_>>();
    Ok(PoissonReduction {
        lambda: [l1, l2],
        lambda_m: lm,
        alpha: [
            rule(&|c, s| model.alpha(c, s, 0), Community::One),
            rule(&|c, s| model.alpha(c, s, 0), Community::Two),
        ],
        k: [
            rule(&|c, s| model.k(c, s, 0), Community::One),
            rule(&|c, s| model.k(c, s, 0), Community::Two),
        ],
        total,
        lf: LnFactorial::new(smax),
    })
}

impl PoissonReduction {
    fn p_active(&self, j: usize, nu: &[f64; 2]) -> f64 {
        let tot = self.lambda[j] + self.lambda_m;
        if tot == 0.0 {
            return 0.0;
        }
        (self.lambda[j] * (1.0 - nu[j]) + self.lambda_m * (1.0 - nu[1 - j])) / tot
    }

    /// `Σ_s Poi(s) (1 - α(s + shift)) P(Bin(s, p) < K(s + shift))`.
    fn thinned(&self, j: usize, p: f64, shift: usize) -> f64 {
        let mut out = 0.0;
        for (s, &w) in self.total[j].iter().enumerate() {
            let w = w * (1.0 - self.alpha[j][s + shift]);
            let Some(kmax) = max_below(self.k[j][s + shift]) else {
                continue;
            };
            let inner: f64 = (0..=kmax.min(s)).map(|u| binom::pmf(&self.lf, u, s, p)).sum();
            out += w * inner;
        }
        out
    }

    /// `G(ν)`.
    pub fn apply(&self, nu: &[f64; 2]) -> [f64; 2] {
        std::array::from_fn(|j| self.thinned(j, self.p_active(j, nu), 1))
    }

    pub fn phi(&self, nu: &[f64; 2]) -> PhiPair {
        PhiPair(std::array::from_fn(|j| self.thinned(j, self.p_active(j, nu), 0)))
    }

    /// `(ν_1, ν_2, ν_1, ν_2)`.
    pub fn lift(nu: &[f64; 2]) -> MuState {
        MuState([nu[0], nu[1], nu[0], nu[1]])
    }

    pub fn integrate(&self, step: f64, t_max: f64) -> ReducedTrajectory {
        rk4_planar(|v| self.apply(v), step, t_max)
    }

    pub fn fixed_point(&self, tol: f64, max_iter: usize) -> [f64; 2] {
        iterate_planar(|v| self.apply(v), tol, max_iter)
    }
}

fn iterate_planar<G: Fn(&[f64; 2]) -> [f64; 2]>(g: G, tol: f64, max_iter: usize) -> [f64; 2] {
    let mut v = [1.0, 1.0];
    for _ in 0..max_iter {
        let next = g(&v);
        let step = (next[0] - v[0]).abs().max((next[1] - v[1]).abs());
        v = next;
        if step < tol {
            break;
        }
    }
    v
}

/// Planar reduction for mirror-symmetric models: `(μ_same, μ_cross)` with
/// `μ11 = μ22 = μ_same` and `μ12 = μ21 = μ_cross`.
#[derive(Debug, Clone)]
pub struct SymmetricReduction {
    model: ModelSpec,
    lf: LnFactorial,
}

pub fn reduce_symmetric(model: &ModelSpec) -> Result<SymmetricReduction> {
    use Community::{One, Two};
    if model.law(One).pmf_slice() != model.law(Two).pmf_slice() {
        return Err(Error::Hypothesis("P_1 and P_2 differ".into()));
    }
    for a in 0..=model.law(One).dmax() {
        for b in 0..=model.cross_law().dmax() {
            if model.k(One, a, b) != model.k(Two, a, b) {
                return Err(Error::Hypothesis(format!("thresholds differ at ({a}, {b})")));
            }
            if model.alpha(One, a, b) != model.alpha(Two, a, b) {
                return Err(Error::Hypothesis(format!("seeding differs at ({a}, {b})")));
            }
        }
    }
    let n = model.law(One).dmax().max(model.cross_law().dmax());
    Ok(SymmetricReduction {
        model: model.clone(),
        lf: LnFactorial::new(n),
    })
}

impl SymmetricReduction {
    /// Community-1 node whose parent edge is internal (`own_edge`) or cross.
    fn component(&self, own_edge: bool, x_same: f64, x_cross: f64) -> f64 {
        let m = &self.model;
        let c = Community::One;
        let (wo, wc) = if own_edge {
            (m.biased_law(c), Some(m.cross_law()))
        } else {
            (Some(m.law(c)), m.biased_cross_law())
        };
        let (Some(wo), Some(wc)) = (wo, wc) else {
            return f64::NAN;
        };
        let (s_o, s_c) = if own_edge { (1, 0) } else { (0, 1) };
        let mut out = 0.0;
        for (d_o, &p) in wo.pmf_slice().iter().enumerate() {
            for (d_c, &q) in wc.pmf_slice().iter().enumerate() {
                let w = p * q * (1.0 - m.alpha(c, d_o, d_c));
                if w == 0.0 {
                    continue;
                }
                let Some(kmax) = max_below(m.k(c, d_o, d_c)) else {
                    continue;
                };
                let (n_o, n_c) = (d_o - s_o, d_c - s_c);
                let mut inner = 0.0;
                for u_o in 0..=kmax.min(n_o) {
                    let bo = binom::pmf(&self.lf, u_o, n_o, x_same);
                    for u_c in 0..=(kmax - u_o).min(n_c) {
                        inner += bo * binom::pmf(&self.lf, u_c, n_c, x_cross);
                    }
                }
                out += w * inner;
            }
        }
        out
    }

    /// `(H_same, H_cross)`.
    pub fn apply(&self, v: &[f64; 2]) -> [f64; 2] {
        let (xs, xc) = (1.0 - v[0], 1.0 - v[1]);
        let same = self.component(true, xs, xc);
        let cross = self.component(false, xs, xc);
        // zero-mean edge types borrow the other parent edge, as in `F`
        match (same.is_nan(), cross.is_nan()) {
            (false, false) => [same, cross],
            (true, false) => [cross, cross],
            (false, true) => [same, same],
            (true, true) => {
                let root = self.root(xs, xc);
                [root, root]
            }
        }
    }

    fn root(&self, x_same: f64, x_cross: f64) -> f64 {
        let m = &self.model;
        let c = Community::One;
        let mut out = 0.0;
        for (d_o, &p) in m.law(c).pmf_slice().iter().enumerate() {
            for (d_c, &q) in m.cross_law().pmf_slice().iter().enumerate() {
                let Some(kmax) = max_below(m.k(c, d_o, d_c)) else {
                    continue;
                };
                let mut inner = 0.0;
                for u_o in 0..=kmax.min(d_o) {
                    for u_c in 0..=(kmax - u_o).min(d_c) {
                        inner += binom::pmf(&self.lf, u_o, d_o, x_same) * binom::pmf(&self.lf, u_c, d_c, x_cross);
                    }
                }
                out += p * q * (1.0 - m.alpha(c, d_o, d_c)) * inner;
            }
        }
        out
    }

    /// Inactive fraction (equal in both communities).
    pub fn phi(&self, v: &[f64; 2]) -> f64 {
        self.root(1.0 - v[0], 1.0 - v[1])
    }

    /// `(μ_same, μ_cross, μ_cross, μ_same)`.
    pub fn lift(v: &[f64; 2]) -> MuState {
        MuState([v[0], v[1], v[1], v[0]])
    }

    pub fn integrate(&self, step: f64, t_max: f64) -> ReducedTrajectory {
        rk4_planar(|v| self.apply(v), step, t_max)
    }

    pub fn fixed_point(&self, tol: f64, max_iter: usize) -> [f64; 2] {
        iterate_planar(|v| self.apply(v), tol, max_iter)
    }
}

/// One Poisson community with total-degree rules, equivalent to a model that
/// satisfies both reductions.
#[derive(Debug, Clone)]
pub struct SingleCommunity {
    pub lambda: f64,
    pmf: Vec<f64>,
    alpha: Vec<f64>,
    k: Vec<f64>,
    lf: LnFactorial,
}

pub fn single_equivalent(model: &ModelSpec) -> Result<SingleCommunity> {
    let [l1, _, lm] = poisson_rates(model)?;
    reduce_poisson(model)?;
    reduce_symmetric(model)?;
    let lambda = l1 + lm;
    let law = DegreeDistribution::poisson(lambda)?;
    let smax = law.dmax() + 1;
    let c = Community::One;
    Ok(SingleCommunity {
        lambda,
        pmf: law.pmf_slice().to_vec(),
        alpha: (0..=smax).map(|s| model.alpha(c, s, 0)).collect(),
        k: (0..=smax).map(|s| model.k(c, s, 0)).collect(),
        lf: LnFactorial::new(smax),
    })
}

impl SingleCommunity {
    fn thinned(&self, x: f64, shift: usize) -> f64 {
        let mut out = 0.0;
        for (s, &p) in self.pmf.iter().enumerate() {
            let Some(kmax) = max_below(self.k[s + shift]) else {
                continue;
            };
            let inner: f64 = (0..=kmax.min(s)).map(|u| binom::pmf(&self.lf, u, s, x)).sum();
            out += p * (1.0 - self.alpha[s + shift]) * inner;
        }
        out
    }

    /// Scalar map `f(μ)` for a node reached along an edge.
    pub fn apply(&self, mu: f64) -> f64 {
        self.thinned(1.0 - mu, 1)
    }

    pub fn phi(&self, mu: f64) -> f64 {
        self.thinned(1.0 - mu, 0)
    }

    pub fn fixed_point(&self) -> f64 {
        let mut mu = 1.0;
        for _ in 0..DEFAULT_MAX_ITER {
            let next = self.apply(mu);
            let step = (next - mu).abs();
            mu = next;
            if step < DEFAULT_TOL {
                break;
            }
        }
        mu
    }

    /// `f'(1)` without seeding: `E[S 1{0 < K(S+1) ≤ 1}]`, `S ~ Poi(λ)`.
    pub fn rho(&self) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .filter(|&(s, _)| self.k[s + 1] > 0.0 && self.k[s + 1] <= 1.0)
            .map(|(s, p)| s as f64 * p)
            .sum()
    }

    pub fn contagious(&self) -> bool {
        self.rho() > 1.0
    }
}
