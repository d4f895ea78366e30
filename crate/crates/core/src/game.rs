//! Cooperative game representation and Shapley allocation.
//!
//! Values are fixed-point integers (millionths), so the efficiency axiom
//! holds as an exact integer identity: the sum of Shapley numerators equals
//! `n! * v(N).raw`, and rounded payouts sum to `v(N).raw` with no drift.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::GameError;

/// Fixed-point scale: 1.0 is represented as 1_000_000.
pub const SCALE: i64 = 1_000_000;

/// Exact Shapley computation is capped at 16 agents; `16! * |raw|` fits
/// comfortably in 128-bit accumulators for any in-range table value.
pub const MAX_EXACT_AGENTS: usize = 16;

/// Oracle enumeration of all `n!` agent orderings is capped at 8 agents.
pub const MAX_ORACLE_AGENTS: usize = 8;

/// Largest magnitude a table value may take. The cap keeps marginals
/// (differences of two values) and rounded payouts inside `i64`.
pub const MAX_ABS_RAW: i64 = i64::MAX / 4;

/// Dense agent index in `[0, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u16);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// Bitmask identifying a coalition: bit `i` set means agent `i` is a member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoalitionMask(pub u32);

impl CoalitionMask {
    pub const EMPTY: CoalitionMask = CoalitionMask(0);

    /// Grand coalition over `n` agents.
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= 32);
        if n == 32 {
            CoalitionMask(u32::MAX)
        } else {
            CoalitionMask((1u32 << n) - 1)
        }
    }

    pub fn singleton(agent: AgentId) -> Self {
        CoalitionMask(1u32 << agent.index())
    }

    pub fn contains(self, agent: AgentId) -> bool {
        self.0 & (1u32 << agent.index()) != 0
    }

    pub fn with(self, agent: AgentId) -> Self {
        CoalitionMask(self.0 | (1u32 << agent.index()))
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Member agents in ascending index order.
    pub fn members(self, n: usize) -> impl Iterator<Item = AgentId> {
        let bits = self.0;
        (0..n as u16).filter(move |i| bits & (1u32 << i) != 0).map(AgentId)
    }
}

impl fmt::Display for CoalitionMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0b{:b}", self.0)
    }
}

/// Signed fixed-point value, `raw = round(value * SCALE)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FixedValue {
    raw: i64,
}

impl FixedValue {
    pub const ZERO: FixedValue = FixedValue { raw: 0 };

    pub fn from_raw(raw: i64) -> Self {
        FixedValue { raw }
    }

    pub fn from_f64(v: f64) -> Self {
        FixedValue { raw: (v * SCALE as f64).round() as i64 }
    }

    pub fn raw(self) -> i64 {
        self.raw
    }

    pub fn to_f64(self) -> f64 {
        self.raw as f64 / SCALE as f64
    }
}

impl fmt::Display for FixedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.raw < 0 { "-" } else { "" };
        let abs = self.raw.unsigned_abs();
        write!(f, "{}{}.{:06}", sign, abs / SCALE as u64, abs % SCALE as u64)
    }
}

/// The characteristic function `v`: one fixed-point value per coalition,
/// indexed by ascending `CoalitionMask`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacteristicTable {
    n: usize,
    values: Vec<FixedValue>,
}

impl CharacteristicTable {
    pub fn new(n: usize, values: Vec<FixedValue>) -> Result<Self, GameError> {
        if n == 0 || n > MAX_EXACT_AGENTS {
            return Err(GameError::AgentCount { n });
        }
        let expected = 1usize << n;
        if values.len() != expected {
            return Err(GameError::TableSize { expected, got: values.len() });
        }
        for (mask, v) in values.iter().enumerate() {
            if v.raw.unsigned_abs() > MAX_ABS_RAW as u64 {
                return Err(GameError::ValueOutOfRange { mask: mask as u32, raw: v.raw });
            }
        }
        Ok(CharacteristicTable { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coalition_count(&self) -> usize {
        self.values.len()
    }

    pub fn value(&self, mask: CoalitionMask) -> FixedValue {
        self.values[mask.0 as usize]
    }

    pub fn grand_value(&self) -> FixedValue {
        self.values[self.values.len() - 1]
    }

    pub fn values(&self) -> &[FixedValue] {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.values[0].raw == 0
    }

    /// Shifts every coalition value by `-v(empty)` so that `v(empty) = 0`.
    pub fn normalize(&self) -> CharacteristicTable {
        let base = self.values[0].raw;
        if base == 0 {
            return self.clone();
        }
        let values = self
            .values
            .iter()
            .map(|v| FixedValue::from_raw(v.raw - base))
            .collect();
        CharacteristicTable { n: self.n, values }
    }

    /// Deterministic random table for tests and benchmarks: uniform raw
    /// values in `[-max_abs_raw, max_abs_raw]`, normalized to `v(empty)=0`.
    pub fn random(n: usize, seed: u64, max_abs_raw: i64) -> Result<Self, GameError> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let count = 1usize << n;
        let mut values = Vec::with_capacity(count);
        values.push(FixedValue::ZERO);
        for _ in 1..count {
            let raw = rng.random_range(-max_abs_raw..=max_abs_raw);
            values.push(FixedValue::from_raw(raw));
        }
        CharacteristicTable::new(n, values)
    }

    /// Canonical byte form: `CGAM` magic, version, agent count, then
    /// `2^n` signed 64-bit big-endian raw values in ascending mask order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + self.values.len() * 8);
        out.extend_from_slice(b"CGAM");
        out.push(1u8);
        out.push(self.n as u8);
        for v in &self.values {
            out.extend_from_slice(&v.raw.to_be_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GameError> {
        if bytes.len() < 6 || &bytes[0..4] != b"CGAM" {
            return Err(GameError::BadEncoding("missing CGAM header"));
        }
        if bytes[4] != 1 {
            return Err(GameError::BadEncoding("unsupported version"));
        }
        let n = bytes[5] as usize;
        if n == 0 || n > MAX_EXACT_AGENTS {
            return Err(GameError::AgentCount { n });
        }
        let count = 1usize << n;
        if bytes.len() != 6 + count * 8 {
            return Err(GameError::BadEncoding("truncated value block"));
        }
        let mut values = Vec::with_capacity(count);
        for i in 0..count {
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&bytes[6 + i * 8..6 + (i + 1) * 8]);
            values.push(FixedValue::from_raw(i64::from_be_bytes(buf)));
        }
        CharacteristicTable::new(n, values)
    }

    /// CSV fixture form: header `mask,value`, then one `mask,raw` row per
    /// coalition in ascending mask order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mask,value\n");
        for (mask, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", mask, v.raw));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, GameError> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("mask")) {
                continue;
            }
            let (mask_s, value_s) = line
                .split_once(',')
                .ok_or(GameError::BadEncoding("csv row is not mask,value"))?;
            let mask: u32 = mask_s
                .trim()
                .parse()
                .map_err(|_| GameError::BadEncoding("csv mask is not an integer"))?;
            let raw: i64 = value_s
                .trim()
                .parse()
                .map_err(|_| GameError::BadEncoding("csv value is not an integer"))?;
            rows.push((mask, raw));
        }
        if rows.is_empty() {
            return Err(GameError::BadEncoding("csv has no rows"));
        }
        let count = rows.len();
        if !count.is_power_of_two() {
            return Err(GameError::BadEncoding("csv row count is not a power of two"));
        }
        let n = count.trailing_zeros() as usize;
        let mut values = vec![None; count];
        for (mask, raw) in rows {
            let slot = values
                .get_mut(mask as usize)
                .ok_or(GameError::BadEncoding("csv mask out of range"))?;
            if slot.is_some() {
                return Err(GameError::BadEncoding("duplicate csv mask"));
            }
            *slot = Some(FixedValue::from_raw(raw));
        }
        let values = values
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or(GameError::BadEncoding("csv is missing a mask"))?;
        CharacteristicTable::new(n, values)
    }
}

pub(crate) fn factorial(k: usize) -> i128 {
    (1..=k as i128).product()
}

/// Exact Shapley allocation in rational form: per-agent integer numerators
/// over the implicit denominator `n! * SCALE`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapleyAllocation {
    n: usize,
    numerators: Vec<i128>,
    grand_raw: i64,
}

impl ShapleyAllocation {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn numerators(&self) -> &[i128] {
        &self.numerators
    }

    pub fn numerator(&self, agent: AgentId) -> i128 {
        self.numerators[agent.index()]
    }

    /// Denominator that turns a numerator into raw fixed-point units.
    pub fn denominator(&self) -> i128 {
        factorial(self.n)
    }

    pub fn grand_raw(&self) -> i64 {
        self.grand_raw
    }

    /// Per-agent fixed-point payouts under largest-remainder rounding.
    /// The rounded payouts always sum to `v(N).raw` exactly.
    pub fn payouts(&self) -> Vec<FixedValue> {
        largest_remainder_payouts(&self.numerators, self.denominator())
            .into_iter()
            .map(FixedValue::from_raw)
            .collect()
    }

    pub fn as_fixed(&self, agent: AgentId) -> FixedValue {
        self.payouts()[agent.index()]
    }
}

/// Largest-remainder rounding of `numerators[i] / denom` to integers whose
/// sum equals `sum(numerators) / denom` exactly. Ties on the remainder are
/// broken in favor of the lowest agent index.
pub fn largest_remainder_payouts(numerators: &[i128], denom: i128) -> Vec<i64> {
    debug_assert!(denom > 0);
    let mut floors = Vec::with_capacity(numerators.len());
    let mut remainders = Vec::with_capacity(numerators.len());
    let mut remainder_sum: i128 = 0;
    for &num in numerators {
        let q = num.div_euclid(denom);
        let r = num.rem_euclid(denom);
        floors.push(q);
        remainders.push(r);
        remainder_sum += r;
    }
    let extra = (remainder_sum / denom) as usize;
    let mut order: Vec<usize> = (0..numerators.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(remainders[i]), i));
    for &i in order.iter().take(extra) {
        floors[i] += 1;
    }
    floors.into_iter().map(|q| q as i64).collect()
}

fn check_exact_preconditions(table: &CharacteristicTable) -> Result<(), GameError> {
    if table.n > MAX_EXACT_AGENTS {
        return Err(GameError::AgentCount { n: table.n });
    }
    if !table.is_normalized() {
        return Err(GameError::NotNormalized);
    }
    Ok(())
}

/// Exact Shapley numerators: for each agent `i`,
/// `sum over S not containing i of (n-1-|S|)! * |S|! * (v(S+i) - v(S))`,
/// accumulated in ascending subset-mask order.
pub fn exact_shapley(table: &CharacteristicTable) -> Result<ShapleyAllocation, GameError> {
    check_exact_preconditions(table)?;
    let n = table.n;
    let full = 1u32 << n;
    let fact: Vec<i128> = (0..n).map(factorial).collect();
    let mut numerators = vec![0i128; n];
    for agent in 0..n {
        let bit = 1u32 << agent;
        let mut acc: i128 = 0;
        for mask in 0..full {
            if mask & bit != 0 {
                continue;
            }
            let size = mask.count_ones() as usize;
            let coeff = fact[n - 1 - size] * fact[size];
            let marginal =
                table.values[(mask | bit) as usize].raw as i128 - table.values[mask as usize].raw as i128;
            acc += coeff * marginal;
        }
        numerators[agent] = acc;
    }
    Ok(ShapleyAllocation { n, numerators, grand_raw: table.grand_value().raw })
}

/// Brute-force reference: sums each agent's marginal contribution over all
/// `n!` joining orders. The resulting numerators are the same exact
/// rationals as `exact_shapley` produces.
pub fn permutation_oracle(table: &CharacteristicTable) -> Result<ShapleyAllocation, GameError> {
    check_exact_preconditions(table)?;
    let n = table.n;
    if n > MAX_ORACLE_AGENTS {
        return Err(GameError::OracleTooLarge { n });
    }
    let mut numerators = vec![0i128; n];
    let mut perm: Vec<usize> = (0..n).collect();
    let add_perm = |perm: &[usize], numerators: &mut [i128]| {
        let mut mask = 0u32;
        let mut prev = 0i64;
        for &agent in perm {
            mask |= 1u32 << agent;
            let cur = table.values[mask as usize].raw;
            numerators[agent] += (cur - prev) as i128;
            prev = cur;
        }
    };
    // Heap's algorithm, iterative form.
    let mut c = vec![0usize; n];
    add_perm(&perm, &mut numerators);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            add_perm(&perm, &mut numerators);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(ShapleyAllocation { n, numerators, grand_raw: table.grand_value().raw })
}

/// Monte Carlo Shapley estimate from uniformly sampled joining orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloAllocation {
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    /// Rounded mean marginal contribution per agent.
    pub estimates: Vec<FixedValue>,
    /// Sample standard error per agent, in raw fixed-point units.
    pub std_errors: Vec<f64>,
}

fn div_round_nearest(num: i128, den: i128) -> i64 {
    debug_assert!(den > 0);
    let half = den / 2;
    let adj = if num >= 0 { num + half } else { num - half };
    (adj / den) as i64
}

/// Unbiased permutation-sampling estimator. Deterministic given `seed`.
pub fn monte_carlo_shapley(
    table: &CharacteristicTable,
    samples: u64,
    seed: u64,
) -> Result<MonteCarloAllocation, GameError> {
    use rand::{Rng, SeedableRng};
    check_exact_preconditions(table)?;
    if samples == 0 {
        return Err(GameError::ZeroSamples);
    }
    let n = table.n;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut sum = vec![0i128; n];
    let mut sum_sq = vec![0i128; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..samples {
        // Fisher-Yates with a fixed draw order for reproducibility.
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        let mut mask = 0u32;
        let mut prev = 0i64;
        for &agent in &perm {
            mask |= 1u32 << agent;
            let cur = table.values[mask as usize].raw;
            let marginal = (cur - prev) as i128;
            sum[agent] += marginal;
            sum_sq[agent] += marginal * marginal;
            prev = cur;
        }
    }
    let s = samples as i128;
    let mut estimates = Vec::with_capacity(n);
    let mut std_errors = Vec::with_capacity(n);
    for agent in 0..n {
        estimates.push(FixedValue::from_raw(div_round_nearest(sum[agent], s)));
        if samples < 2 {
            std_errors.push(0.0);
        } else {
            let mean = sum[agent] as f64 / samples as f64;
            let var = (sum_sq[agent] as f64 - samples as f64 * mean * mean) / (samples as f64 - 1.0);
            std_errors.push((var.max(0.0) / samples as f64).sqrt());
        }
    }
    Ok(MonteCarloAllocation { n, samples, seed, estimates, std_errors })
}

/// Superadditivity diagnostic: surplus of the grand coalition over the sum
/// of standalone values. Reported, never enforced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperadditivityReport {
    pub grand_raw: i64,
    pub singleton_sum_raw: i128,
    pub surplus_raw: i128,
    pub strict: bool,
}

pub fn check_superadditivity(table: &CharacteristicTable) -> SuperadditivityReport {
    let grand = table.grand_value().raw;
    let singleton_sum: i128 = (0..table.n)
        .map(|i| table.values[1usize << i].raw as i128)
        .sum();
    let surplus = grand as i128 - singleton_sum;
    SuperadditivityReport {
        grand_raw: grand,
        singleton_sum_raw: singleton_sum,
        surplus_raw: surplus,
        strict: surplus > 0,
    }
}

/// Aggregate payout delta of coalition `K` between two allocations,
/// compared against the proportional bound `|K|/n * v(N)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollusionReport {
    pub coalition: CoalitionMask,
    pub coalition_size: u32,
    /// Sum over K of (colluded payout - honest payout), raw units.
    pub gain_raw: i128,
    /// Proportional bound `|K|/n * v(N)` in raw units (rounded toward zero).
    pub bound_raw: i128,
    /// `gain - bound`; positive slack means the proportional bound was
    /// exceeded. Diagnostic only.
    pub slack_raw: i128,
    pub within_bound: bool,
}

pub fn collusion_gain(
    table: &CharacteristicTable,
    honest: &ShapleyAllocation,
    colluded: &ShapleyAllocation,
    coalition: CoalitionMask,
) -> Result<CollusionReport, GameError> {
    if honest.n != colluded.n || honest.n != table.n {
        return Err(GameError::AllocationMismatch);
    }
    let honest_payouts = honest.payouts();
    let colluded_payouts = colluded.payouts();
    let mut gain: i128 = 0;
    for agent in coalition.members(table.n) {
        gain += colluded_payouts[agent.index()].raw as i128 - honest_payouts[agent.index()].raw as i128;
    }
    let bound = coalition.len() as i128 * table.grand_value().raw as i128 / table.n as i128;
    Ok(CollusionReport {
        coalition,
        coalition_size: coalition.len(),
        gain_raw: gain,
        bound_raw: bound,
        slack_raw: gain - bound,
        within_bound: gain <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(n: usize, raws: &[i64]) -> CharacteristicTable {
        CharacteristicTable::new(n, raws.iter().map(|&r| FixedValue::from_raw(r)).collect()).unwrap()
    }

    #[test]
    fn normalize_identity_when_already_normalized() {
        let t = table(2, &[0, 1, 2, 3]);
        assert_eq!(t.normalize(), t);
    }

    #[test]
    fn normalize_shifts_by_empty_value() {
        let t = table(1, &[5 * SCALE, 8 * SCALE]);
        let norm = t.normalize();
        assert_eq!(norm.values()[0].raw(), 0);
        assert_eq!(norm.values()[1].raw(), 3 * SCALE);
    }

    #[test]
    fn normalize_postcondition_on_random_table() {
        let t = CharacteristicTable::random(5, 99, 10 * SCALE).unwrap();
        let shifted = CharacteristicTable::new(
            5,
            t.values().iter().map(|v| FixedValue::from_raw(v.raw() + 7)).collect(),
        )
        .unwrap();
        let norm = shifted.normalize();
        assert_eq!(norm.values()[0], FixedValue::ZERO);
        for (s, o) in norm.values().iter().zip(shifted.values()) {
            assert_eq!(s.raw(), o.raw() - 7);
        }
    }

    #[test]
    fn single_agent_gets_everything() {
        let t = table(1, &[0, 10 * SCALE]);
        let alloc = exact_shapley(&t).unwrap();
        assert_eq!(alloc.numerators(), &[10 * SCALE as i128]);
        assert_eq!(alloc.as_fixed(AgentId(0)).raw(), 10 * SCALE);
    }

    #[test]
    fn symmetric_thirds_game() {
        // Singletons worth 0, every pair and the grand coalition worth 1.
        let s = SCALE;
        let t = table(3, &[0, 0, 0, s, 0, s, s, s]);
        let alloc = exact_shapley(&t).unwrap();
        assert_eq!(alloc.numerators(), &[2 * s as i128; 3]);
        let payouts = alloc.payouts();
        assert_eq!(payouts.iter().map(|p| p.raw()).sum::<i64>(), s);
        // 1/3 each; the leftover unit goes to the lowest agent id.
        assert_eq!(payouts[0].raw(), 333_334);
        assert_eq!(payouts[1].raw(), 333_333);
        assert_eq!(payouts[2].raw(), 333_333);
    }

    #[test]
    fn two_agent_asymmetric_game_matches_hand_computation() {
        let s = SCALE;
        let t = table(2, &[0, s, 3 * s, 6 * s]);
        let alloc = exact_shapley(&t).unwrap();
        // Orders (0,1) and (1,0): phi_0 = (1+3)/2 = 2, phi_1 = (5+3)/2 = 4.
        assert_eq!(alloc.as_fixed(AgentId(0)).raw(), 2 * s);
        assert_eq!(alloc.as_fixed(AgentId(1)).raw(), 4 * s);
        let oracle = permutation_oracle(&t).unwrap();
        assert_eq!(alloc.numerators(), oracle.numerators());
    }

    #[test]
    fn glove_game_allocation() {
        // v({0,1}) = v({0,2}) = v(N) = 1, all else 0.
        let s = SCALE;
        let t = table(3, &[0, 0, 0, s, 0, s, 0, s]);
        let alloc = exact_shapley(&t).unwrap();
        // phi_0 = 2/3, phi_1 = phi_2 = 1/6 (denominator 3! * SCALE).
        assert_eq!(alloc.numerators(), &[4 * s as i128, s as i128, s as i128]);
        let oracle = permutation_oracle(&t).unwrap();
        assert_eq!(alloc.numerators(), oracle.numerators());
        let payouts = alloc.payouts();
        assert_eq!(payouts.iter().map(|p| p.raw()).sum::<i64>(), s);
        assert_eq!(payouts[0].raw(), 666_667);
        assert_eq!(payouts[1].raw(), 166_667);
        assert_eq!(payouts[2].raw(), 166_666);
    }

    #[test]
    fn efficiency_identity_holds_exactly() {
        for seed in 0..20 {
            let n = 2 + (seed as usize % 5);
            let t = CharacteristicTable::random(n, seed, 1_000 * SCALE).unwrap();
            let alloc = exact_shapley(&t).unwrap();
            let total: i128 = alloc.numerators().iter().sum();
            assert_eq!(total, factorial(n) * t.grand_value().raw() as i128);
            let payout_sum: i64 = alloc.payouts().iter().map(|p| p.raw()).sum();
            assert_eq!(payout_sum, t.grand_value().raw());
        }
    }

    #[test]
    fn oracle_rejects_large_games() {
        let t = CharacteristicTable::random(9, 1, SCALE).unwrap();
        assert!(matches!(permutation_oracle(&t), Err(GameError::OracleTooLarge { n: 9 })));
    }

    #[test]
    fn exact_rejects_unnormalized() {
        let t = table(1, &[5, 10]);
        assert!(matches!(exact_shapley(&t), Err(GameError::NotNormalized)));
    }

    #[test]
    fn table_rejects_out_of_range_values() {
        let err = CharacteristicTable::new(
            1,
            vec![FixedValue::ZERO, FixedValue::from_raw(MAX_ABS_RAW + 1)],
        );
        assert!(matches!(err, Err(GameError::ValueOutOfRange { .. })));
    }

    #[test]
    fn monte_carlo_single_sample_is_one_permutation() {
        use rand::{Rng, SeedableRng};
        let t = CharacteristicTable::random(4, 7, 100 * SCALE).unwrap();
        let mc = monte_carlo_shapley(&t, 1, 1234).unwrap();
        // Reproduce the single sampled permutation with the same stream.
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1234);
        let mut perm: Vec<usize> = (0..4).collect();
        for i in (1..4).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        let mut mask = 0u32;
        let mut prev = 0i64;
        let mut marginals = [0i64; 4];
        for &agent in &perm {
            mask |= 1 << agent;
            let cur = t.value(CoalitionMask(mask)).raw();
            marginals[agent] = cur - prev;
            prev = cur;
        }
        for agent in 0..4 {
            assert_eq!(mc.estimates[agent].raw(), marginals[agent]);
            assert_eq!(mc.std_errors[agent], 0.0);
        }
    }

    #[test]
    fn monte_carlo_deterministic_given_seed() {
        let t = CharacteristicTable::random(5, 3, 50 * SCALE).unwrap();
        let a = monte_carlo_shapley(&t, 500, 42).unwrap();
        let b = monte_carlo_shapley(&t, 500, 42).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_shapley(&t, 500, 43).unwrap();
        assert_ne!(a.estimates, c.estimates);
    }

    #[test]
    fn monte_carlo_tracks_exact_on_symmetric_game() {
        let s = SCALE;
        let t = table(3, &[0, 0, 0, s, 0, s, s, s]);
        let mc = monte_carlo_shapley(&t, 10_000, 7).unwrap();
        let exact = s / 3;
        for agent in 0..3 {
            let dev = (mc.estimates[agent].raw() - exact).abs() as f64;
            assert!(dev <= 4.0 * mc.std_errors[agent] + 1.0, "agent {agent} deviates");
        }
    }

    #[test]
    fn superadditivity_flags() {
        // Additive game: zero surplus, flag false.
        let w = [2 * SCALE, 5 * SCALE];
        let t = table(2, &[0, w[0], w[1], w[0] + w[1]]);
        let rep = check_superadditivity(&t);
        assert_eq!(rep.surplus_raw, 0);
        assert!(!rep.strict);

        let s = SCALE;
        let thirds = table(3, &[0, 0, 0, s, 0, s, s, s]);
        let rep = check_superadditivity(&thirds);
        assert_eq!(rep.surplus_raw, s as i128);
        assert!(rep.strict);
    }

    #[test]
    fn collusion_gain_zero_for_identical_allocations() {
        let t = CharacteristicTable::random(4, 11, 100 * SCALE).unwrap();
        let alloc = exact_shapley(&t).unwrap();
        let rep = collusion_gain(&t, &alloc, &alloc, CoalitionMask(0b0011)).unwrap();
        assert_eq!(rep.gain_raw, 0);
    }

    #[test]
    fn collusion_gain_zero_for_grand_coalition() {
        let t = CharacteristicTable::random(4, 12, 100 * SCALE).unwrap();
        let honest = exact_shapley(&t).unwrap();
        // A different game with the same grand value: payouts redistribute
        // but the total is pinned by efficiency.
        let mut raws: Vec<i64> = t.values().iter().map(|v| v.raw()).collect();
        let len = raws.len();
        raws[1] += SCALE;
        raws[len - 2] -= SCALE;
        let other = table(4, &raws);
        let colluded = exact_shapley(&other).unwrap();
        let rep = collusion_gain(&t, &honest, &colluded, CoalitionMask::full(4)).unwrap();
        assert_eq!(rep.gain_raw, 0);
    }

    #[test]
    fn cgam_roundtrip_and_csv_roundtrip() {
        let t = CharacteristicTable::random(4, 21, 77 * SCALE).unwrap();
        assert_eq!(CharacteristicTable::from_bytes(&t.to_bytes()).unwrap(), t);
        assert_eq!(CharacteristicTable::from_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn cgam_rejects_garbage() {
        assert!(CharacteristicTable::from_bytes(b"NOPE").is_err());
        let mut bytes = CharacteristicTable::random(2, 1, SCALE).unwrap().to_bytes();
        bytes.truncate(bytes.len() - 1);
        assert!(CharacteristicTable::from_bytes(&bytes).is_err());
    }

    #[test]
    fn largest_remainder_handles_negative_numerators() {
        // numerators / 6: -1/6, -1/6, 2/6 -> total 0.
        let payouts = largest_remainder_payouts(&[-1, -1, 2], 6);
        assert_eq!(payouts.iter().sum::<i64>(), 0);
        // floor(-1/6) = -1 with remainder 5; floor(2/6) = 0 with remainder 2.
        // Two +1 units go to the largest remainders (agents 0 and 1).
        assert_eq!(payouts, vec![0, 0, 0]);
    }
}
