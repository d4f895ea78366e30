//! Synthetic trading desk: seeded price series, deterministic signal
//! agents, and the Sharpe-based coalition value function.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::MarketError;
use crate::game::{AgentId, FixedValue, SCALE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    DataAnalysis,
    MarketPerspective,
    Decision,
}

impl AgentRole {
    /// Role-dependent signal quality. Roles only shape signal generation;
    /// evaluation treats every agent identically.
    pub fn default_skill(self) -> f64 {
        match self {
            AgentRole::DataAnalysis => 0.8,
            AgentRole::Decision => 0.7,
            AgentRole::MarketPerspective => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAgent {
    pub id: AgentId,
    pub role: AgentRole,
    pub seed: u64,
    pub skill: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceParams {
    pub steps: usize,
    pub drift: f64,
    pub volatility: f64,
    pub start: f64,
}

impl Default for PriceParams {
    fn default() -> Self {
        PriceParams { steps: 256, drift: 0.0002, volatility: 0.02, start: 1000.0 }
    }
}

/// Seeded geometric random walk; all prices stay strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn generate(params: &PriceParams, seed: u64) -> Result<PriceSeries, MarketError> {
        if params.steps < 2 {
            return Err(MarketError::TooShort { steps: params.steps });
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut prices = Vec::with_capacity(params.steps);
        let mut p = params.start.max(f64::MIN_POSITIVE);
        prices.push(p);
        for _ in 1..params.steps {
            let z = standard_normal(&mut rng);
            let factor = (1.0 + params.drift + params.volatility * z).max(0.01);
            p *= factor;
            prices.push(p);
        }
        Ok(PriceSeries { prices })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }
}

fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    // Box-Muller; u1 is kept away from zero so the log stays finite.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Per-step trade signal in micro-units, clamped to [-1, +1] * SCALE.
pub type MicroSignal = i32;

/// Generates the agent's signal series over the price path. The signal at
/// step `t` is `clamp(skill * sign(next return) + (1 - skill) * noise)`;
/// `degradation` in [0, 1] scales the skill toward pure noise (1.0 makes
/// the agent indistinguishable from noise).
pub fn generate_signals(
    agent: &SyntheticAgent,
    prices: &PriceSeries,
    degradation: f64,
) -> Vec<MicroSignal> {
    let mut rng = ChaCha12Rng::seed_from_u64(agent.seed);
    let effective = (agent.skill * (1.0 - degradation)).clamp(0.0, 1.0);
    let p = prices.prices();
    let mut signals = Vec::with_capacity(p.len());
    for t in 0..p.len() {
        let noise: f64 = rng.random_range(-1.0..=1.0);
        let direction = if t + 1 < p.len() {
            (p[t + 1] - p[t]).signum()
        } else {
            0.0
        };
        let s = (effective * direction + (1.0 - effective) * noise).clamp(-1.0, 1.0);
        signals.push((s * SCALE as f64).round() as MicroSignal);
    }
    signals
}

/// Canonical output payload for a signal series:
/// `u32 BE count || i32 BE per step`.
pub fn signal_payload(signals: &[MicroSignal]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + signals.len() * 4);
    out.extend_from_slice(&(signals.len() as u32).to_be_bytes());
    for s in signals {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

/// Fresh per-agent seeds drawn from one master stream: the price seed
/// first, then one seed per agent in id order.
pub fn derive_seeds(master_seed: u64, agents: usize) -> (u64, Vec<u64>) {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    let price_seed = rng.next_u64();
    let agent_seeds = (0..agents).map(|_| rng.next_u64()).collect();
    (price_seed, agent_seeds)
}

/// Sharpe-based coalition value: members' signals are averaged with equal
/// weight, the lagged combined signal is applied to per-step returns, and
/// the value is `SCALE * mean(returns) / sample_std(returns)` (0 when the
/// standard deviation vanishes).
pub fn evaluate_coalition(
    member_signals: &[&[MicroSignal]],
    prices: &PriceSeries,
) -> Result<FixedValue, MarketError> {
    if member_signals.is_empty() {
        return Err(MarketError::EmptyCoalition);
    }
    let t_len = prices.len();
    for s in member_signals {
        if s.len() != t_len {
            return Err(MarketError::LengthMismatch { expected: t_len, got: s.len() });
        }
    }
    let members = member_signals.len() as f64;
    let p = prices.prices();
    let mut returns = Vec::with_capacity(t_len - 1);
    for t in 1..t_len {
        let mut sum: i64 = 0;
        for s in member_signals {
            sum += s[t - 1] as i64;
        }
        let combined = sum as f64 / (members * SCALE as f64);
        returns.push(combined * (p[t] / p[t - 1] - 1.0));
    }
    let count = returns.len();
    if count < 2 {
        return Ok(FixedValue::ZERO);
    }
    let mean = returns.iter().sum::<f64>() / count as f64;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (count as f64 - 1.0);
    let std = var.sqrt();
    if std == 0.0 {
        return Ok(FixedValue::ZERO);
    }
    Ok(FixedValue::from_f64(mean / std))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(id: u16, role: AgentRole, seed: u64) -> SyntheticAgent {
        SyntheticAgent { id: AgentId(id), role, seed, skill: role.default_skill() }
    }

    #[test]
    fn price_series_is_positive_and_deterministic() {
        let params = PriceParams::default();
        let a = PriceSeries::generate(&params, 5).unwrap();
        let b = PriceSeries::generate(&params, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 256);
        assert!(a.prices().iter().all(|&p| p > 0.0));
        let c = PriceSeries::generate(&params, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn too_short_series_rejected() {
        let params = PriceParams { steps: 1, ..PriceParams::default() };
        assert!(matches!(
            PriceSeries::generate(&params, 1),
            Err(MarketError::TooShort { steps: 1 })
        ));
    }

    #[test]
    fn all_zero_signals_give_zero_value() {
        let params = PriceParams::default();
        let prices = PriceSeries::generate(&params, 9).unwrap();
        let zeros = vec![0i32; prices.len()];
        let v = evaluate_coalition(&[&zeros], &prices).unwrap();
        assert_eq!(v, FixedValue::ZERO);
    }

    #[test]
    fn holding_long_on_rising_series_is_positive() {
        // Ten strictly rising prices, +1 signal throughout.
        let prices = PriceSeries {
            prices: (0..10).map(|i| 100.0 * 1.01f64.powi(i)).collect(),
        };
        let long = vec![SCALE as i32; 10];
        let v = evaluate_coalition(&[&long], &prices).unwrap();
        assert!(v.raw() > 0, "got {v}");
    }

    #[test]
    fn duplicate_member_signal_does_not_change_value() {
        let params = PriceParams::default();
        let prices = PriceSeries::generate(&params, 11).unwrap();
        let a = generate_signals(&agent(0, AgentRole::DataAnalysis, 31), &prices, 0.0);
        let solo = evaluate_coalition(&[&a], &prices).unwrap();
        let pair = evaluate_coalition(&[&a, &a], &prices).unwrap();
        assert_eq!(solo, pair);
    }

    #[test]
    fn signal_length_mismatch_rejected() {
        let params = PriceParams::default();
        let prices = PriceSeries::generate(&params, 12).unwrap();
        let short = vec![0i32; prices.len() - 1];
        assert!(matches!(
            evaluate_coalition(&[&short], &prices),
            Err(MarketError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn degradation_one_is_pure_noise() {
        let params = PriceParams::default();
        let prices = PriceSeries::generate(&params, 13).unwrap();
        let a = agent(0, AgentRole::DataAnalysis, 77);
        let degraded = generate_signals(&a, &prices, 1.0);
        let noise_twin =
            SyntheticAgent { skill: 0.0, ..a };
        let pure_noise = generate_signals(&noise_twin, &prices, 0.0);
        assert_eq!(degraded, pure_noise);
    }

    #[test]
    fn skilled_agent_beats_noise_agent() {
        let params = PriceParams::default();
        let mut skilled_better = 0;
        for seed in 0..20u64 {
            let prices = PriceSeries::generate(&params, seed).unwrap();
            let skilled = agent(0, AgentRole::DataAnalysis, 1000 + seed);
            let noise = SyntheticAgent { skill: 0.0, ..agent(1, AgentRole::MarketPerspective, 2000 + seed) };
            let vs = evaluate_coalition(&[&generate_signals(&skilled, &prices, 0.0)], &prices).unwrap();
            let vn = evaluate_coalition(&[&generate_signals(&noise, &prices, 0.0)], &prices).unwrap();
            if vs.raw() > vn.raw() {
                skilled_better += 1;
            }
        }
        assert!(skilled_better >= 17, "skilled agent won only {skilled_better}/20");
    }

    #[test]
    fn payload_is_canonical() {
        let signals = vec![1i32, -2, 3];
        let payload = signal_payload(&signals);
        assert_eq!(payload.len(), 4 + 12);
        assert_eq!(&payload[0..4], &3u32.to_be_bytes());
        assert_eq!(payload, signal_payload(&signals));
    }
}
