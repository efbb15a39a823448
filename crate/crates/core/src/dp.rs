//! Rényi-DP primitives: the Gaussian and exponential mechanisms, a
//! composition ledger and conversion to (ε, δ)-DP.
//!
//! Every mechanism here has an RDP curve linear in the order α,
//! `γ(α) = α·ρ`, so a cost is carried as the single number ρ and
//! composition is addition.
//!
//! Floating-point side channels in the noise samplers are not addressed;
//! this is a research implementation.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when comparing a spent budget against its limit.
pub const BUDGET_SLACK: f64 = 1e-12;

/// Default grid of Rényi orders used for conversion.
pub const DEFAULT_ALPHAS: [f64; 18] = [
    1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 24.0, 32.0, 48.0, 64.0,
];

/// [`DEFAULT_ALPHAS`] plus large orders, needed for small ε at small δ.
pub const EXTENDED_ALPHAS: [f64; 25] = [
    1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 24.0, 32.0, 48.0, 64.0, 96.0, 128.0,
    256.0, 512.0, 1024.0, 2048.0, 4096.0,
];

/// RDP cost with curve `γ(α) = α·rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdpCost {
    pub rho: f64,
}

impl RdpCost {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho >= 0.0) {
            return Err(Error::InvalidParameter(format!("rdp cost must be >= 0, got {rho}")));
        }
        Ok(RdpCost { rho })
    }

    pub fn gamma(&self, alpha: f64) -> f64 {
        alpha * self.rho
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

/// ρ of a Gaussian release with the given L2 sensitivity and noise scale.
pub fn gaussian_rho(sensitivity: f64, sigma: f64) -> Result<f64> {
    check_positive("sensitivity", sensitivity)?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    Ok(sensitivity * sensitivity / (2.0 * sigma * sigma))
}

/// Noise scale that makes one Gaussian release cost exactly `rho`.
pub fn gaussian_sigma_for(sensitivity: f64, rho: f64) -> Result<f64> {
    check_positive("sensitivity", sensitivity)?;
    check_positive("rho", rho)?;
    Ok(sensitivity / (2.0 * rho).sqrt())
}

pub fn gaussian_mechanism<R: Rng + ?Sized>(
    value: f64,
    sensitivity: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<(f64, RdpCost)> {
    let rho = gaussian_rho(sensitivity, sigma)?;
    let noise = if sigma.is_infinite() {
        return Err(Error::InvalidParameter("sigma must be finite to sample".into()));
    } else {
        Normal::new(0.0, sigma)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sample(rng)
    };
    Ok((value + noise, RdpCost { rho }))
}

/// Adds independent `N(0, σ²)` noise to every entry of a vector released as
/// one query of the given L2 sensitivity.
pub fn gaussian_vector<R: Rng + ?Sized>(
    values: &mut [f64],
    sensitivity: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<RdpCost> {
    let rho = gaussian_rho(sensitivity, sigma)?;
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    for v in values.iter_mut() {
        *v += normal.sample(rng);
    }
    Ok(RdpCost { rho })
}

/// RDP cost of one exponential-mechanism selection at privacy parameter ε.
///
/// Uses the bounded-range analysis `ρ = ε²/8`, which makes
/// `ε = √(8ρ/k)` spend exactly ρ over k selections.
pub fn exponential_rho(epsilon: f64) -> Result<f64> {
    check_positive("epsilon", epsilon)?;
    Ok(epsilon * epsilon / 8.0)
}

/// Selection probabilities `∝ exp(ε·s/(2Δ))`, computed with the maximum
/// score subtracted.
pub fn exponential_probabilities(scores: &[f64], epsilon: f64, sensitivity: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Empty("exponential mechanism needs at least one candidate".into()));
    }
    check_positive("epsilon", epsilon)?;
    check_positive("sensitivity", sensitivity)?;
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = scores
        .iter()
        .map(|&s| (epsilon * (s - max) / (2.0 * sensitivity)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

pub fn exponential_mechanism<R: Rng + ?Sized>(
    scores: &[f64],
    epsilon: f64,
    sensitivity: f64,
    rng: &mut R,
) -> Result<(usize, RdpCost)> {
    let probs = exponential_probabilities(scores, epsilon, sensitivity)?;
    let rho = exponential_rho(epsilon)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = probs.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            chosen = i;
            break;
        }
    }
    Ok((chosen, RdpCost { rho }))
}

/// An (ε, δ) guarantee and the Rényi order that achieved it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpGuarantee {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
}

fn check_grid(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::InvalidParameter("alpha grid is empty".into()));
    }
    if let Some(a) = alphas.iter().find(|&&a| !(a > 1.0) || !a.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha {a} is not > 1")));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("delta must lie in (0, 1], got {delta}")))
    }
}

/// `min over α of α·ρ + ln(1/δ)/(α−1)`; ties go to the smaller α.
pub fn rdp_to_dp(rho: f64, delta: f64, alphas: &[f64]) -> Result<DpGuarantee> {
    check_grid(alphas)?;
    check_delta(delta)?;
    if !(rho >= 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be >= 0, got {rho}")));
    }
    let log_inv_delta = (1.0 / delta).ln();
    let mut best: Option<(f64, f64)> = None;
    for &alpha in alphas {
        let eps = alpha * rho + log_inv_delta / (alpha - 1.0);
        best = match best {
            Some((be, ba)) if be < eps || (be == eps && ba <= alpha) => Some((be, ba)),
            _ => Some((eps, alpha)),
        };
    }
    let (epsilon, alpha) = best.expect("grid checked non-empty");
    Ok(DpGuarantee {
        epsilon,
        delta,
        alpha,
    })
}

/// Largest ρ whose conversion at `delta` does not exceed `epsilon_target`,
/// found by bisection to within 1e-9 in ε.
pub fn dp_to_rho(epsilon_target: f64, delta: f64, alphas: &[f64]) -> Result<f64> {
    check_positive("epsilon", epsilon_target)?;
    let eps_at = |rho: f64| rdp_to_dp(rho, delta, alphas).map(|g| g.epsilon);
    let floor = eps_at(0.0)?;
    if floor > epsilon_target {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon_target} is unattainable at delta {delta}: even rho = 0 gives {floor}"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while eps_at(hi)? < epsilon_target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::InvalidParameter(format!(
                "rho search bounds exhausted for epsilon {epsilon_target}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eps_at(mid)? <= epsilon_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "lowercase")]
pub enum Mechanism {
    Gaussian { sigma: f64, sensitivity: f64 },
    Exponential { epsilon: f64, sensitivity: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Charge {
    pub label: String,
    pub rho: f64,
    #[serde(flatten)]
    pub mechanism: Mechanism,
}

/// Single-writer ledger of RDP charges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RdpAccountant {
    entries: Vec<Charge>,
}

impl RdpAccountant {
    pub fn new() -> Self {
        RdpAccountant::default()
    }

    pub fn charge(&mut self, label: impl Into<String>, cost: RdpCost, mechanism: Mechanism) {
        self.entries.push(Charge {
            label: label.into(),
            rho: cost.rho,
            mechanism,
        });
    }

    pub fn entries(&self) -> &[Charge] {
        &self.entries
    }

    pub fn total_rho(&self) -> f64 {
        self.entries.iter().map(|c| c.rho).sum()
    }

    /// Fails when the running total exceeds `budget` (plus [`BUDGET_SLACK`]).
    pub fn assert_total(&self, budget: f64) -> Result<()> {
        let spent = self.total_rho();
        if spent <= budget + BUDGET_SLACK {
            Ok(())
        } else {
            Err(Error::BudgetExceeded { spent, budget })
        }
    }
}
