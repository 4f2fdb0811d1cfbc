//! Simulation designs with known ground truth.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{TargetDataset, TrialDataset};
use crate::numerics::{sigmoid, Matrix};
use crate::rng::{self, purpose, StreamRng};

/// Draws used for Monte Carlo oracles.
pub const DEFAULT_ORACLE_DRAWS: usize = 1_000_000;
/// Key for oracle Monte Carlo streams; oracles do not depend on the data seed.
pub const ORACLE_KEY: u64 = 0x5eed_0ac1e;
const ORACLE_CHUNKS: u64 = 64;

/// Ground-truth quantities of a design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DgpOracle {
    /// Target average treatment effect τ*.
    pub tau_star: f64,
    /// X-adjusted transport estimand τ_X.
    pub tau_x: f64,
    /// Moderation strength Γ* (the constant or baseline β).
    pub gamma_star: f64,
    /// Target-averaged moderator imbalance Δ_U* (signed).
    pub delta_u_star: f64,
    /// τ* − τ_X.
    pub bias: f64,
    /// True residual effect heterogeneity σ_τ|X in the trial.
    pub sigma_tau: f64,
}

/// A simulation design: a sampler plus its oracle.
pub trait Dgp: Sync {
    fn name(&self) -> &'static str;
    fn validate(&self) -> Result<()>;
    /// One trial/target draw; bit-identical for a given seed.
    fn sample(&self, seed: u64) -> Result<(TrialDataset, TargetDataset)>;
    fn oracle(&self) -> Result<DgpOracle>;
}

#[inline]
fn normal(r: &mut StreamRng) -> f64 {
    r.sample(StandardNormal)
}

fn names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite")))
    }
}

fn check_sizes(n_trial: usize, n_target: usize, p: usize) -> Result<()> {
    if p == 0 {
        return Err(invalid("p must be at least 1"));
    }
    if n_trial < 2 * (p + 2) {
        return Err(invalid(format!(
            "n_trial = {n_trial} is too small for p = {p} (need at least {})",
            2 * (p + 2)
        )));
    }
    if n_target == 0 {
        return Err(invalid("n_target must be positive"));
    }
    Ok(())
}

fn datasets(
    trial_x: Vec<f64>,
    a: Vec<u8>,
    y: Vec<f64>,
    target_x: Vec<f64>,
    n_trial: usize,
    n_target: usize,
    p: usize,
) -> Result<(TrialDataset, TargetDataset)> {
    let trial = TrialDataset::new(Matrix::from_row_major(n_trial, p, trial_x)?, a, y, names(p))?;
    let target = TargetDataset::new(Matrix::from_row_major(n_target, p, target_x)?, names(p))?;
    Ok((trial, target))
}

/// Mean of `draw` over `n` Monte Carlo draws, split into fixed chunks with
/// their own streams so the result does not depend on thread count.
pub fn mc_mean<const K: usize, F>(n: usize, key: u64, draw: F) -> [f64; K]
where
    F: Fn(&mut StreamRng) -> [f64; K] + Sync,
{
    let per = n.div_ceil(ORACLE_CHUNKS as usize);
    let sums: Vec<[f64; K]> = (0..ORACLE_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(key, c);
            let m = per.min(n.saturating_sub(c as usize * per));
            let mut s = [0.0; K];
            for _ in 0..m {
                let v = draw(&mut r);
                for k in 0..K {
                    s[k] += v[k];
                }
            }
            s
        })
        .collect();
    let mut total = [0.0; K];
    for s in sums {
        for k in 0..K {
            total[k] += s[k];
        }
    }
    total.map(|t| t / n as f64)
}

/// Linear-Gaussian design with a latent moderator whose conditional mean
/// given X₁ differs between trial and target:
///
/// * trial X ~ N(0, I), target X ~ N(μ·1, I);
/// * U | X ~ N(γ_s·X₁, 1) with γ_s = γ_r in the trial and γ_o in the target;
/// * A ~ Bernoulli(0.5) in the trial;
/// * Y = β₀ + β_Xᵀ X + A·(τ₀ + β_U·U) + ε, ε ~ N(0, σ²).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dgp1Config {
    pub n_trial: usize,
    pub n_target: usize,
    pub p: usize,
    pub mu_shift: f64,
    pub gamma_r: f64,
    pub gamma_o: f64,
    pub beta_u: f64,
    pub tau0: f64,
    pub sigma: f64,
    pub beta_x: Vec<f64>,
    pub beta0: f64,
}

impl Default for Dgp1Config {
    fn default() -> Self {
        Self {
            n_trial: 2000,
            n_target: 5000,
            p: 5,
            mu_shift: 0.5,
            gamma_r: 0.0,
            gamma_o: 0.5,
            beta_u: 0.5,
            tau0: 1.0,
            sigma: 1.0,
            beta_x: vec![0.5; 5],
            beta0: 0.0,
        }
    }
}

impl Dgp1Config {
    /// Defaults with `p` covariates and β_X = 0.5·1.
    pub fn with_p(p: usize) -> Self {
        Self {
            p,
            beta_x: vec![0.5; p],
            ..Self::default()
        }
    }

    /// Closed-form oracle.
    pub fn closed_form_oracle(&self) -> DgpOracle {
        let tau_x = self.tau0 + self.beta_u * self.gamma_r * self.mu_shift;
        let tau_star = self.tau0 + self.beta_u * self.gamma_o * self.mu_shift;
        let delta_u_star = (self.gamma_o - self.gamma_r) * self.mu_shift;
        DgpOracle {
            tau_star,
            tau_x,
            gamma_star: self.beta_u,
            delta_u_star,
            bias: self.beta_u * delta_u_star,
            sigma_tau: self.beta_u.abs(),
        }
    }
}

impl Dgp for Dgp1Config {
    fn name(&self) -> &'static str {
        "dgp1"
    }

    fn validate(&self) -> Result<()> {
        check_sizes(self.n_trial, self.n_target, self.p)?;
        if self.beta_x.len() != self.p {
            return Err(invalid(format!(
                "beta_x has length {} but p = {}",
                self.beta_x.len(),
                self.p
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma must be positive"));
        }
        check_finite(
            "parameters",
            &[
                self.mu_shift,
                self.gamma_r,
                self.gamma_o,
                self.beta_u,
                self.tau0,
                self.beta0,
            ],
        )?;
        check_finite("beta_x", &self.beta_x)
    }

    fn sample(&self, seed: u64) -> Result<(TrialDataset, TargetDataset)> {
        self.validate()?;
        let (nt, no, p) = (self.n_trial, self.n_target, self.p);
        let mut r = rng::stream(seed, purpose::DATA);
        let mut tx = Vec::with_capacity(nt * p);
        let mut a = Vec::with_capacity(nt);
        let mut y = Vec::with_capacity(nt);
        for _ in 0..nt {
            let start = tx.len();
            for _ in 0..p {
                tx.push(normal(&mut r));
            }
            let x = &tx[start..];
            let u = self.gamma_r * x[0] + normal(&mut r);
            let treat: u8 = r.random_bool(0.5).into();
            let base = self.beta0 + crate::numerics::dot(&self.beta_x, x);
            y.push(base + f64::from(treat) * (self.tau0 + self.beta_u * u) + self.sigma * normal(&mut r));
            a.push(treat);
        }
        let ox = (0..no * p).map(|_| self.mu_shift + normal(&mut r)).collect();
        datasets(tx, a, y, ox, nt, no, p)
    }

    fn oracle(&self) -> Result<DgpOracle> {
        self.validate()?;
        Ok(self.closed_form_oracle())
    }
}

pub fn gen_dgp1(config: &Dgp1Config, seed: u64) -> Result<(TrialDataset, TargetDataset, DgpOracle)> {
    let (trial, target) = config.sample(seed)?;
    Ok((trial, target, config.oracle()?))
}

/// Brute-force population quantities for the linear-Gaussian design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PopulationCheck {
    /// Mean of β(X)·Δ_U(X) over target draws.
    pub moderation_imbalance: f64,
    /// Mean of τ₀ + β_U·U over target draws.
    pub tau_star: f64,
    /// Mean over target draws of the trial's conditional effect E[τ | X, S = 1].
    pub tau_x: f64,
    /// Standard deviation of τ − E[τ | X, S = 1] over trial draws.
    pub sigma_tau: f64,
    /// sqrt(Var(Y | A = 1, X) + Var(Y | A = 0, X)) over trial draws.
    pub sigma_tau_upper: f64,
}

pub fn dgp1_population_check(config: &Dgp1Config, n: usize, key: u64) -> Result<PopulationCheck> {
    config.validate()?;
    let c = config;
    let [mi, ts, tx] = mc_mean(n, key, |r| {
        let x1 = c.mu_shift + normal(r);
        let u = c.gamma_o * x1 + normal(r);
        [
            c.beta_u * (c.gamma_o - c.gamma_r) * x1,
            c.tau0 + c.beta_u * u,
            c.tau0 + c.beta_u * c.gamma_r * x1,
        ]
    });
    // Residuals given X in the trial: the effect part β_U(U − γ_r X₁) and,
    // in each arm, the outcome noise around its conditional mean.
    let [v_tau, v1, v0] = mc_mean(n, key ^ 0x7a11, |r| {
        let x1 = normal(r);
        let u = c.gamma_r * x1 + normal(r);
        let eff = c.beta_u * (u - c.gamma_r * x1);
        let e1 = c.sigma * normal(r);
        let e0 = c.sigma * normal(r);
        [eff * eff, (eff + e1) * (eff + e1), e0 * e0]
    });
    Ok(PopulationCheck {
        moderation_imbalance: mi,
        tau_star: ts,
        tau_x: tx,
        sigma_tau: v_tau.sqrt(),
        sigma_tau_upper: (v1 + v0).sqrt(),
    })
}

/// Nonlinear baseline with X-varying moderation on the same sampling
/// skeleton as [`Dgp1Config`]:
///
/// Y = β₀ + sin(πX₁/2) + 0.5·X₂² + A·(τ₀ + (β_base + β_mod·X₁)·U) + ε.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dgp2Config {
    pub n_trial: usize,
    pub n_target: usize,
    pub p: usize,
    pub mu_shift: f64,
    pub gamma_r: f64,
    pub gamma_o: f64,
    pub beta_base: f64,
    pub beta_mod: f64,
    pub tau0: f64,
    pub sigma: f64,
    pub beta0: f64,
    pub oracle_draws: usize,
}

impl Default for Dgp2Config {
    fn default() -> Self {
        Self {
            n_trial: 2000,
            n_target: 5000,
            p: 5,
            mu_shift: 0.5,
            gamma_r: 0.0,
            gamma_o: 0.5,
            beta_base: 0.5,
            beta_mod: 0.3,
            tau0: 1.0,
            sigma: 1.0,
            beta0: 0.0,
            oracle_draws: DEFAULT_ORACLE_DRAWS,
        }
    }
}

impl Dgp2Config {
    fn moderation(&self, x1: f64) -> f64 {
        self.beta_base + self.beta_mod * x1
    }

    fn baseline(&self, x: &[f64]) -> f64 {
        self.beta0 + (std::f64::consts::FRAC_PI_2 * x[0]).sin() + 0.5 * x[1] * x[1]
    }
}

impl Dgp for Dgp2Config {
    fn name(&self) -> &'static str {
        "dgp2"
    }

    fn validate(&self) -> Result<()> {
        check_sizes(self.n_trial, self.n_target, self.p)?;
        if self.p < 2 {
            return Err(invalid("the nonlinear baseline needs p >= 2"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma must be positive"));
        }
        if self.oracle_draws == 0 {
            return Err(invalid("oracle_draws must be positive"));
        }
        check_finite(
            "parameters",
            &[
                self.mu_shift,
                self.gamma_r,
                self.gamma_o,
                self.beta_base,
                self.beta_mod,
                self.tau0,
                self.beta0,
            ],
        )
    }

    fn sample(&self, seed: u64) -> Result<(TrialDataset, TargetDataset)> {
        self.validate()?;
        let (nt, no, p) = (self.n_trial, self.n_target, self.p);
        let mut r = rng::stream(seed, purpose::DATA);
        let mut tx = Vec::with_capacity(nt * p);
        let mut a = Vec::with_capacity(nt);
        let mut y = Vec::with_capacity(nt);
        for _ in 0..nt {
            let start = tx.len();
            for _ in 0..p {
                tx.push(normal(&mut r));
            }
            let x = &tx[start..];
            let u = self.gamma_r * x[0] + normal(&mut r);
            let treat: u8 = r.random_bool(0.5).into();
            let effect = self.tau0 + self.moderation(x[0]) * u;
            y.push(self.baseline(x) + f64::from(treat) * effect + self.sigma * normal(&mut r));
            a.push(treat);
        }
        let ox = (0..no * p).map(|_| self.mu_shift + normal(&mut r)).collect();
        datasets(tx, a, y, ox, nt, no, p)
    }

    /// τ* and τ_X by Monte Carlo over target covariate draws, integrating U
    /// through its conditional mean. Γ* is β_base and Δ_U* is (γ_o − γ_r)·μ.
    fn oracle(&self) -> Result<DgpOracle> {
        self.validate()?;
        let c = self;
        let [ts, tx] = mc_mean(self.oracle_draws, ORACLE_KEY, |r| {
            let x1 = c.mu_shift + normal(r);
            let b = c.moderation(x1);
            [c.tau0 + b * c.gamma_o * x1, c.tau0 + b * c.gamma_r * x1]
        });
        let [v] = mc_mean(self.oracle_draws, ORACLE_KEY ^ 1, |r| {
            let x1 = normal(r);
            let e = c.moderation(x1) * normal(r);
            [e * e]
        });
        Ok(DgpOracle {
            tau_star: ts,
            tau_x: tx,
            gamma_star: self.beta_base,
            delta_u_star: (self.gamma_o - self.gamma_r) * self.mu_shift,
            bias: ts - tx,
            sigma_tau: v.sqrt(),
        })
    }
}

pub fn gen_dgp2(config: &Dgp2Config, seed: u64) -> Result<(TrialDataset, TargetDataset, DgpOracle)> {
    let (trial, target) = config.sample(seed)?;
    Ok((trial, target, config.oracle()?))
}

/// High-dimensional design. Units come from one population X ~ N(0, I_p)
/// and join the trial with probability sigmoid(α₀ + α·Σ_{j<k} X_j) over the
/// first `n_relevant` covariates. Given membership S the moderator is
/// U ~ N(γ_S·X₁, 1). Outcomes:
///
/// Y = sin(πX₁/2) + 0.5·X₂² + b·Σ_{j<k} X_j + A·(τ₀ + θᵀX + β_U·U) + ε,
///
/// with θ nonzero on the first `n_modifiers` covariates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dgp3Config {
    pub n_trial: usize,
    pub n_target: usize,
    pub p: usize,
    pub n_relevant: usize,
    pub selection_intercept: f64,
    pub selection_coef: f64,
    pub gamma_r: f64,
    pub gamma_o: f64,
    pub beta_u: f64,
    pub tau0: f64,
    pub main_effect: f64,
    pub n_modifiers: usize,
    pub modifier_effect: f64,
    pub sigma: f64,
    pub oracle_draws: usize,
}

impl Default for Dgp3Config {
    fn default() -> Self {
        Self {
            n_trial: 2000,
            n_target: 5000,
            p: 50,
            n_relevant: 10,
            selection_intercept: 0.0,
            selection_coef: 0.3,
            gamma_r: 0.0,
            gamma_o: 0.5,
            beta_u: 0.5,
            tau0: 1.0,
            main_effect: 0.5,
            n_modifiers: 3,
            modifier_effect: 0.2,
            sigma: 1.0,
            oracle_draws: DEFAULT_ORACLE_DRAWS,
        }
    }
}

impl Dgp3Config {
    fn selection_probability(&self, x: &[f64]) -> f64 {
        let lin: f64 = x[..self.n_relevant].iter().sum();
        sigmoid(self.selection_intercept + self.selection_coef * lin)
    }

    fn draw_unit(&self, r: &mut StreamRng, x: &mut [f64]) -> bool {
        for v in x.iter_mut() {
            *v = normal(r);
        }
        r.random::<f64>() < self.selection_probability(x)
    }

    fn conditional_effect(&self, x: &[f64]) -> f64 {
        self.tau0 + self.modifier_effect * x[..self.n_modifiers].iter().sum::<f64>()
    }

    fn outcome_baseline(&self, x: &[f64]) -> f64 {
        (std::f64::consts::FRAC_PI_2 * x[0]).sin()
            + 0.5 * x[1] * x[1]
            + self.main_effect * x[..self.n_relevant].iter().sum::<f64>()
    }
}

/// Draws before rejection sampling gives up on filling one population.
const MAX_REJECTION_FACTOR: usize = 1000;

impl Dgp for Dgp3Config {
    fn name(&self) -> &'static str {
        "dgp3"
    }

    fn validate(&self) -> Result<()> {
        check_sizes(self.n_trial, self.n_target, self.p)?;
        if self.p < 2 || self.n_relevant < 1 || self.n_relevant > self.p {
            return Err(invalid("need p >= 2 and 1 <= n_relevant <= p"));
        }
        if self.n_modifiers > self.p {
            return Err(invalid("n_modifiers exceeds p"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma must be positive"));
        }
        if self.oracle_draws == 0 {
            return Err(invalid("oracle_draws must be positive"));
        }
        check_finite(
            "parameters",
            &[
                self.selection_intercept,
                self.selection_coef,
                self.gamma_r,
                self.gamma_o,
                self.beta_u,
                self.tau0,
                self.main_effect,
                self.modifier_effect,
            ],
        )
    }

    fn sample(&self, seed: u64) -> Result<(TrialDataset, TargetDataset)> {
        self.validate()?;
        let (nt, no, p) = (self.n_trial, self.n_target, self.p);
        let mut r = rng::stream(seed, purpose::DATA);
        let mut tx = Vec::with_capacity(nt * p);
        let mut ox = Vec::with_capacity(no * p);
        let mut a = Vec::with_capacity(nt);
        let mut y = Vec::with_capacity(nt);
        let mut x = vec![0.0; p];
        let budget = MAX_REJECTION_FACTOR * (nt + no);
        let mut draws = 0;
        while a.len() < nt || ox.len() < no * p {
            draws += 1;
            if draws > budget {
                return Err(invalid("selection model too extreme to fill both samples"));
            }
            let in_trial = self.draw_unit(&mut r, &mut x);
            if in_trial && a.len() < nt {
                let u = self.gamma_r * x[0] + normal(&mut r);
                let treat: u8 = r.random_bool(0.5).into();
                let effect = self.conditional_effect(&x) + self.beta_u * u;
                y.push(self.outcome_baseline(&x) + f64::from(treat) * effect + self.sigma * normal(&mut r));
                a.push(treat);
                tx.extend_from_slice(&x);
            } else if !in_trial && ox.len() < no * p {
                ox.extend_from_slice(&x);
            }
        }
        datasets(tx, a, y, ox, nt, no, p)
    }

    /// Monte Carlo over target-population draws (rejection sampled), with U
    /// integrated through its conditional mean.
    fn oracle(&self) -> Result<DgpOracle> {
        self.validate()?;
        let c = self;
        // Each draw returns the target contribution and a 0/1 acceptance flag.
        let [ts, tx, x1, accepted] = mc_mean(self.oracle_draws, ORACLE_KEY, |r| {
            let mut x = vec![0.0; c.p];
            if c.draw_unit(r, &mut x) {
                return [0.0; 4];
            }
            let base = c.conditional_effect(&x);
            [
                base + c.beta_u * c.gamma_o * x[0],
                base + c.beta_u * c.gamma_r * x[0],
                x[0],
                1.0,
            ]
        });
        if accepted == 0.0 {
            return Err(invalid("no target-population draws accepted"));
        }
        let (tau_star, tau_x) = (ts / accepted, tx / accepted);
        let delta = (self.gamma_o - self.gamma_r) * x1 / accepted;
        Ok(DgpOracle {
            tau_star,
            tau_x,
            gamma_star: self.beta_u,
            delta_u_star: delta,
            bias: tau_star - tau_x,
            sigma_tau: self.beta_u.abs(),
        })
    }
}

pub fn gen_dgp3(config: &Dgp3Config, seed: u64) -> Result<(TrialDataset, TargetDataset, DgpOracle)> {
    let (trial, target) = config.sample(seed)?;
    Ok((trial, target, config.oracle()?))
}

/// Five observed effect modifiers, no latent moderator. One of them is
/// later hidden from the analysis:
///
/// * trial X ~ N(0, I), target X ~ N(shift, I);
/// * Y = β_m·1ᵀX + A·(τ₀ + θᵀX) + ε.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HideOneConfig {
    pub n_trial: usize,
    pub n_target: usize,
    pub shift: Vec<f64>,
    pub theta: Vec<f64>,
    pub main_effect: f64,
    pub tau0: f64,
    pub sigma: f64,
    /// Covariate treated as unobserved.
    pub hidden: usize,
}

impl Default for HideOneConfig {
    fn default() -> Self {
        Self {
            n_trial: 2000,
            n_target: 5000,
            shift: vec![0.5, 0.4, 0.3, 0.2, 0.1],
            theta: vec![0.5, 0.4, 0.3, 0.2, 0.1],
            main_effect: 1.0,
            tau0: 1.0,
            sigma: 1.0,
            hidden: 0,
        }
    }
}

impl Dgp for HideOneConfig {
    fn name(&self) -> &'static str {
        "hide-one"
    }

    fn validate(&self) -> Result<()> {
        let p = self.theta.len();
        check_sizes(self.n_trial, self.n_target, p)?;
        if self.shift.len() != p {
            return Err(invalid("shift and theta must have the same length"));
        }
        if p < 2 {
            return Err(invalid("hiding a covariate needs at least two"));
        }
        if self.hidden >= p {
            return Err(invalid(format!("hidden index {} out of range", self.hidden)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma must be positive"));
        }
        check_finite("shift", &self.shift)?;
        check_finite("theta", &self.theta)?;
        check_finite("parameters", &[self.main_effect, self.tau0])
    }

    fn sample(&self, seed: u64) -> Result<(TrialDataset, TargetDataset)> {
        self.validate()?;
        let (nt, no, p) = (self.n_trial, self.n_target, self.theta.len());
        let mut r = rng::stream(seed, purpose::DATA);
        let mut tx = Vec::with_capacity(nt * p);
        let mut a = Vec::with_capacity(nt);
        let mut y = Vec::with_capacity(nt);
        for _ in 0..nt {
            let start = tx.len();
            for _ in 0..p {
                tx.push(normal(&mut r));
            }
            let x = &tx[start..];
            let treat: u8 = r.random_bool(0.5).into();
            let effect = self.tau0 + crate::numerics::dot(&self.theta, x);
            let base = self.main_effect * x.iter().sum::<f64>();
            y.push(base + f64::from(treat) * effect + self.sigma * normal(&mut r));
            a.push(treat);
        }
        let mut ox = Vec::with_capacity(no * p);
        for _ in 0..no {
            for j in 0..p {
                ox.push(self.shift[j] + normal(&mut r));
            }
        }
        datasets(tx, a, y, ox, nt, no, p)
    }

    /// τ* = τ₀ + θᵀshift. Once the hidden covariate Z is dropped, the
    /// adjusted estimand loses θ_z·shift_z; the imbalance scale is shift_z.
    fn oracle(&self) -> Result<DgpOracle> {
        self.validate()?;
        let z = self.hidden;
        let tau_star = self.tau0 + crate::numerics::dot(&self.theta, &self.shift);
        let bias = self.theta[z] * self.shift[z];
        Ok(DgpOracle {
            tau_star,
            tau_x: tau_star - bias,
            gamma_star: self.theta[z],
            delta_u_star: self.shift[z],
            bias,
            sigma_tau: 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dgp1_default_oracle() {
        let o = Dgp1Config::default().oracle().unwrap();
        assert_eq!(o.tau_star, 1.125);
        assert_eq!(o.tau_x, 1.0);
        assert_eq!(o.gamma_star, 0.5);
        assert_eq!(o.delta_u_star, 0.25);
        assert_eq!(o.bias, 0.125);
        assert_eq!(o.bias, o.gamma_star * o.delta_u_star);
    }

    #[test]
    fn dgp1_no_imbalance() {
        let cfg = Dgp1Config {
            gamma_r: 0.3,
            gamma_o: 0.3,
            ..Dgp1Config::default()
        };
        let o = cfg.oracle().unwrap();
        assert_eq!(o.bias, 0.0);
        assert_eq!(o.tau_star, o.tau_x);
    }

    #[test]
    fn samples_are_deterministic() {
        let cfg = Dgp1Config::default();
        let (t1, o1) = cfg.sample(11).unwrap();
        let (t2, o2) = cfg.sample(11).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(o1, o2);
        assert_ne!(cfg.sample(12).unwrap().0, t1);
        assert_eq!((t1.n(), t1.p(), o1.n()), (2000, 5, 5000));
    }

    #[test]
    fn dgp2_constant_moderation_matches_closed_form() {
        let cfg = Dgp2Config {
            beta_mod: 0.0,
            oracle_draws: 200_000,
            ..Dgp2Config::default()
        };
        let o = cfg.oracle().unwrap();
        // β_base·Δ_U*; brute-force noise is well below the tolerance
        assert!((o.bias - 0.5 * 0.25).abs() < 0.01, "{}", o.bias);
        assert!((o.tau_x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let bad = Dgp1Config {
            beta_x: vec![0.5; 3],
            ..Dgp1Config::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        let tiny = Dgp1Config {
            n_trial: 5,
            ..Dgp1Config::default()
        };
        assert!(tiny.sample(0).is_err());
        let hide = HideOneConfig {
            hidden: 9,
            ..HideOneConfig::default()
        };
        assert!(hide.validate().is_err());
    }

    #[test]
    fn mc_mean_fixed_chunking() {
        let [m] = mc_mean(1000, 3, |r| [r.random::<f64>()]);
        let [m2] = mc_mean(1000, 3, |r| [r.random::<f64>()]);
        assert_eq!(m, m2);
        assert!((m - 0.5).abs() < 0.05);
    }

    #[test]
    fn hide_one_oracle() {
        let o = HideOneConfig::default().oracle().unwrap();
        assert!((o.tau_star - 1.55).abs() < 1e-12);
        assert!((o.bias - 0.25).abs() < 1e-15);
    }
}
