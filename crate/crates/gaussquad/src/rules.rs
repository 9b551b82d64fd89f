//! The truncated trapezoidal rules: deterministic baseline, cut-off
//! strategies, and the randomized rule.
//!
//! A realization of the randomized rule is drawn in three independent
//! pieces: a node count uniform on `{floor(n/2), ..., n-2}`, a grid shift
//! uniform on (0,1) placing `m` equispaced nodes strictly inside `(-T, T)`,
//! and one truncated-normal node per tail, weighted by the tail mass so the
//! whole rule is an unbiased estimator of `∫ f ρ`. A realization uses
//! `m + 2 <= n` integrand evaluations.
//!
//! The rule is non-adaptive and linear: node positions, weights and count
//! are fixed once the randomness is drawn and never depend on integrand
//! values. Adaptive stopping or node placement is out of scope here.

use crate::error::{Error, Result};
use crate::oracle::KahanSum;
use crate::rng::{RngStream, TailSide};
use crate::special::{gaussian_pdf, upper_tail_mass};
use crate::test_functions::TestFunction;

/// How the cut-off half-width T grows with the budget n.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffMode {
    /// `T = sqrt((2 alpha + 1) / (1 - eps) * ln n)`, using a known
    /// smoothness order.
    SmoothnessAware { alpha: u32 },
    /// Same formula with alpha replaced by the slowly growing
    /// `gamma(n) = max(ln ln n, 0)`, so no smoothness knowledge is needed.
    SmoothnessFree,
}

/// A validated cut-off strategy: mode plus the tail-balance exponent
/// epsilon, which must lie strictly in (1/2, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffStrategy {
    mode: CutoffMode,
    epsilon: f64,
}

impl CutoffStrategy {
    pub fn smoothness_aware(alpha: u32, epsilon: f64) -> Result<Self> {
        if alpha < 1 {
            return Err(Error::AlphaOutOfRange("cut-off needs alpha >= 1"));
        }
        Self::validated(CutoffMode::SmoothnessAware { alpha }, epsilon)
    }

    pub fn smoothness_free(epsilon: f64) -> Result<Self> {
        Self::validated(CutoffMode::SmoothnessFree, epsilon)
    }

    fn validated(mode: CutoffMode, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.5 && epsilon < 1.0) {
            return Err(Error::EpsilonOutOfRange(epsilon));
        }
        Ok(Self { mode, epsilon })
    }

    pub fn mode(&self) -> CutoffMode {
        self.mode
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> Option<u32> {
        match self.mode {
            CutoffMode::SmoothnessAware { alpha } => Some(alpha),
            CutoffMode::SmoothnessFree => None,
        }
    }
}

/// Cut-off half-width for budget `n`.
pub fn cutoff_t(strategy: &CutoffStrategy, n: u64) -> Result<f64> {
    if n < 4 {
        return Err(Error::BudgetTooSmall { min: 4, got: n });
    }
    let ln_n = (n as f64).ln();
    let order = match strategy.mode {
        CutoffMode::SmoothnessAware { alpha } => alpha as f64,
        CutoffMode::SmoothnessFree => ln_n.ln().max(0.0),
    };
    Ok(((2.0 * order + 1.0) / (1.0 - strategy.epsilon) * ln_n).sqrt())
}

/// A validated rule configuration. The cut-off T depends only on
/// `(n, strategy)` and is computed once here, not per realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleConfig {
    n: u64,
    cutoff: CutoffStrategy,
    t: f64,
}

impl RuleConfig {
    pub fn new(n: u64, cutoff: CutoffStrategy) -> Result<Self> {
        let t = cutoff_t(&cutoff, n)?;
        Ok(Self { n, cutoff, t })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn cutoff(&self) -> &CutoffStrategy {
        &self.cutoff
    }

    pub fn cutoff_t(&self) -> f64 {
        self.t
    }
}

/// Baseline deterministic rule: `(2T/n) Σ_j f(ξ_j) ρ(ξ_j)` over the
/// equispaced grid `ξ_j = T (2j/n - 1)`, `j = 0, ..., n-1`.
pub fn deterministic_rule(f: &TestFunction, n: u64, t: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::BudgetTooSmall { min: 1, got: n });
    }
    let mut sum = KahanSum::new();
    for j in 0..n {
        let x = t * (2.0 * j as f64 / n as f64 - 1.0);
        let v = f.evaluate(x);
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand(x));
        }
        sum.add(v * gaussian_pdf(x));
    }
    Ok(2.0 * t / n as f64 * sum.value())
}

/// One drawn quadrature: node count, shift, nodes, weights, tail nodes.
#[derive(Debug, Clone)]
pub struct RuleRealization {
    m_star: u64,
    delta: f64,
    t: f64,
    interior_nodes: Vec<f64>,
    interior_weights: Vec<f64>,
    left_node: f64,
    right_node: f64,
    left_weight: f64,
    right_weight: f64,
}

impl RuleRealization {
    /// Assemble the deterministic part of a realization from its random
    /// draws. Interior node j is `T (2(j+delta)/m - 1)` with weight
    /// `(2T/m) ρ(node)`; both tail weights equal the tail mass `1 - Φ(T)`.
    pub fn from_draws(
        t: f64,
        m_star: u64,
        delta: f64,
        left_node: f64,
        right_node: f64,
    ) -> Result<Self> {
        if m_star < 1 {
            return Err(Error::BudgetTooSmall {
                min: 1,
                got: m_star,
            });
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::QuantileDomain(delta));
        }
        let m = m_star as f64;
        let scale = 2.0 * t / m;
        let mut interior_nodes = Vec::with_capacity(m_star as usize);
        let mut interior_weights = Vec::with_capacity(m_star as usize);
        for j in 0..m_star {
            let x = t * (2.0 * (j as f64 + delta) / m - 1.0);
            interior_nodes.push(x);
            interior_weights.push(scale * gaussian_pdf(x));
        }
        let tail_mass = upper_tail_mass(t);
        Ok(Self {
            m_star,
            delta,
            t,
            interior_nodes,
            interior_weights,
            left_node,
            right_node,
            left_weight: tail_mass,
            right_weight: tail_mass,
        })
    }

    pub fn m_star(&self) -> u64 {
        self.m_star
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cutoff_t(&self) -> f64 {
        self.t
    }

    pub fn interior_nodes(&self) -> &[f64] {
        &self.interior_nodes
    }

    pub fn interior_weights(&self) -> &[f64] {
        &self.interior_weights
    }

    pub fn left_node(&self) -> f64 {
        self.left_node
    }

    pub fn right_node(&self) -> f64 {
        self.right_node
    }

    /// `Φ(-T)`, the left tail-node weight.
    pub fn left_weight(&self) -> f64 {
        self.left_weight
    }

    /// `1 - Φ(T)`, the right tail-node weight.
    pub fn right_weight(&self) -> f64 {
        self.right_weight
    }

    /// Number of integrand evaluations one evaluation of this realization
    /// performs: the interior nodes plus the two tail nodes.
    pub fn node_count(&self) -> u64 {
        self.m_star + 2
    }
}

/// Draw a realization of the randomized rule: `m ~ U{floor(n/2), ..., n-2}`,
/// `delta ~ U(0,1)`, and one truncated-normal node per tail. The tail nodes
/// come from fresh sub-streams, so they are independent of the node count
/// by construction. Only the tail marginals and that independence matter
/// for unbiasedness; coupling the tails to `delta` through CDF inversion
/// would be an equally valid construction.
pub fn draw_realization(config: &RuleConfig, stream: &mut RngStream) -> Result<RuleRealization> {
    let n = config.n;
    let t = config.t;
    let m_star = stream.uniform_int((n / 2) as i64, (n - 2) as i64)? as u64;
    let delta = stream.uniform_open();
    let mut left_stream = stream.split();
    let mut right_stream = stream.split();
    let left_node = left_stream.truncated_normal_tail(t, TailSide::Left)?;
    let right_node = right_stream.truncated_normal_tail(t, TailSide::Right)?;
    RuleRealization::from_draws(t, m_star, delta, left_node, right_node)
}

/// A rule value together with the number of integrand evaluations spent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub evaluations: u64,
}

/// Evaluate the three-term rule
/// `(2T/m) Σ_j f(ξ_j) ρ(ξ_j) + Φ(-T) f(ξ_left) + (1-Φ(T)) f(ξ_right)`.
///
/// Interior terms accumulate left-to-right with compensated summation;
/// non-finite integrand values fail fast.
pub fn evaluate_realization(f: &TestFunction, real: &RuleRealization) -> Result<Evaluation> {
    let mut evaluations = 0u64;
    let mut eval_at = |x: f64| -> Result<f64> {
        let v = f.evaluate(x);
        evaluations += 1;
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand(x));
        }
        Ok(v)
    };
    let mut sum = KahanSum::new();
    for (&x, &w) in real.interior_nodes.iter().zip(&real.interior_weights) {
        sum.add(eval_at(x)? * w);
    }
    sum.add(real.left_weight * eval_at(real.left_node)?);
    sum.add(real.right_weight * eval_at(real.right_node)?);
    Ok(Evaluation {
        value: sum.value(),
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::test_functions::relu_power;

    fn aware(alpha: u32) -> CutoffStrategy {
        CutoffStrategy::smoothness_aware(alpha, 0.51).unwrap()
    }

    #[test]
    fn cutoff_frozen_values() {
        // sqrt(3/0.49 * ln 1024)
        let t = cutoff_t(&aware(1), 1024).unwrap();
        assert!((t - 6.514413441228762).abs() < 1e-12, "t = {t}");
        // alpha-free at n = 16: gamma = ln ln 16 ~ 1.0198
        let free = CutoffStrategy::smoothness_free(0.51).unwrap();
        let tf = cutoff_t(&free, 16).unwrap();
        assert!((tf - 4.147154855701168).abs() < 1e-12, "tf = {tf}");
        let lnln16 = (16f64).ln().ln();
        assert!((lnln16 - 1.0197814405382263).abs() < 1e-13);
    }

    #[test]
    fn cutoff_monotone_in_n() {
        for strategy in [aware(2), CutoffStrategy::smoothness_free(0.51).unwrap()] {
            let mut prev = 0.0;
            for k in 2..=20 {
                let t = cutoff_t(&strategy, 1 << k).unwrap();
                assert!(t > prev);
                prev = t;
            }
        }
    }

    #[test]
    fn cutoff_domain_errors() {
        assert!(cutoff_t(&aware(1), 3).is_err());
        assert!(CutoffStrategy::smoothness_aware(0, 0.51).is_err());
        assert!(CutoffStrategy::smoothness_aware(1, 0.5).is_err());
        assert!(CutoffStrategy::smoothness_aware(1, 1.0).is_err());
        assert!(CutoffStrategy::smoothness_free(0.49).is_err());
    }

    #[test]
    fn deterministic_rule_two_nodes() {
        // nodes at -1 and 0: value = rho(-1) + rho(0)
        let one = TestFunction::constant("one", 1.0);
        let v = deterministic_rule(&one, 2, 1.0).unwrap();
        assert!((v - 0.640_913_004_920_576).abs() < 1e-15, "v = {v}");
    }

    #[test]
    fn deterministic_rule_zero_function() {
        let zero = TestFunction::constant("zero", 0.0);
        for n in [1u64, 2, 7, 64] {
            assert_eq!(deterministic_rule(&zero, n, 3.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn deterministic_rule_odd_integrand_leaves_left_endpoint() {
        // On the grid T(2j/n - 1) with even n, nodes pair off symmetrically
        // except the unpaired left endpoint -T.
        let f = TestFunction::new("x^3", |x: f64| x * x * x, None, None, vec![]);
        let n = 8u64;
        let t = 1.7;
        let v = deterministic_rule(&f, n, t).unwrap();
        // independent direct summation
        let mut direct = 0.0;
        for j in 0..n {
            let x = t * (2.0 * j as f64 / n as f64 - 1.0);
            direct += f.evaluate(x) * gaussian_pdf(x);
        }
        direct *= 2.0 * t / n as f64;
        assert!((v - direct).abs() < 1e-15);
        let left_only = 2.0 * t / n as f64 * (-t) * (-t) * (-t) * gaussian_pdf(t);
        assert!((v - left_only).abs() < 1e-15, "{v} vs {left_only}");
    }

    #[test]
    fn config_requires_min_budget() {
        assert!(RuleConfig::new(3, aware(1)).is_err());
        assert!(RuleConfig::new(4, aware(1)).is_ok());
    }

    #[test]
    fn smallest_budget_has_constant_node_count() {
        let config = RuleConfig::new(4, aware(1)).unwrap();
        let mut stream = RngStream::new(0, 0);
        for _ in 0..200 {
            let real = draw_realization(&config, &mut stream).unwrap();
            assert_eq!(real.m_star(), 2);
        }
    }

    #[test]
    fn midpoint_shift_gives_symmetric_nodes() {
        let real = RuleRealization::from_draws(1.0, 2, 0.5, -1.5, 1.5).unwrap();
        assert_eq!(real.interior_nodes(), &[-0.5, 0.5]);
    }

    #[test]
    fn realization_invariants_hold() {
        let config = RuleConfig::new(64, aware(2)).unwrap();
        let t = config.cutoff_t();
        let mut stream = RngStream::new(7, 1);
        for _ in 0..200 {
            let real = draw_realization(&config, &mut stream).unwrap();
            let m = real.m_star();
            assert!((32..=62).contains(&m));
            assert!(real.delta() > 0.0 && real.delta() < 1.0);
            assert_eq!(real.node_count(), m + 2);
            assert!(real.node_count() <= 64);
            assert!(real.left_node() <= -t);
            assert!(real.right_node() >= t);
            let nodes = real.interior_nodes();
            assert_eq!(nodes.len() as u64, m);
            let gap = 2.0 * t / m as f64;
            for w in nodes.windows(2) {
                assert!((w[1] - w[0] - gap).abs() <= 1e-12 * t);
            }
            for (j, (&x, &w)) in nodes.iter().zip(real.interior_weights()).enumerate() {
                assert!(x > -t && x < t);
                let expect = t * (2.0 * (j as f64 + real.delta()) / m as f64 - 1.0);
                assert_eq!(x, expect);
                // weights recomputable from (T, m, node)
                assert_eq!(w, gap * gaussian_pdf(x));
            }
            let q = upper_tail_mass(t);
            assert_eq!(real.left_weight(), q);
            assert_eq!(real.right_weight(), q);
        }
    }

    #[test]
    fn node_count_distribution_uniform() {
        // n = 16: m uniform on {8, ..., 14}
        let config = RuleConfig::new(16, aware(1)).unwrap();
        let mut stream = RngStream::new(3, 0);
        let draws = 100_000;
        let mut counts = [0u64; 7];
        for _ in 0..draws {
            let real = draw_realization(&config, &mut stream).unwrap();
            counts[(real.m_star() - 8) as usize] += 1;
        }
        let p = 1.0 / 7.0;
        let expect = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - expect).abs() <= 3.0 * sigma,
                "cell {i}: {c} vs {expect}"
            );
        }
    }

    #[test]
    fn evaluate_zero_function_is_zero() {
        let zero = TestFunction::constant("zero", 0.0);
        let real = RuleRealization::from_draws(2.0, 5, 0.25, -2.5, 2.5).unwrap();
        let e = evaluate_realization(&zero, &real).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.evaluations, 7);
    }

    #[test]
    fn evaluate_constant_tends_to_one() {
        // Riemann sum of rho over [-T,T] plus the exact tail masses.
        let config = RuleConfig::new(4096, aware(1)).unwrap();
        let one = TestFunction::constant("one", 1.0);
        let mut stream = RngStream::new(11, 0);
        let real = draw_realization(&config, &mut stream).unwrap();
        let e = evaluate_realization(&one, &real).unwrap();
        assert!((e.value - 1.0).abs() < 1e-5, "value = {}", e.value);
    }

    #[test]
    fn evaluate_scales_linearly() {
        let f1 = TestFunction::new("g", |x: f64| (x * 1.3).sin() + 0.4, None, None, vec![]);
        let f2 = TestFunction::new(
            "2g",
            |x: f64| 2.0 * ((x * 1.3).sin() + 0.4),
            None,
            None,
            vec![],
        );
        let real = RuleRealization::from_draws(3.0, 257, 0.125, -3.5, 3.25).unwrap();
        let a = evaluate_realization(&f1, &real).unwrap().value;
        let b = evaluate_realization(&f2, &real).unwrap().value;
        let ulp_budget = 1e-16 * a.abs().max(1.0) * real.m_star() as f64;
        assert!((b - 2.0 * a).abs() <= ulp_budget, "{b} vs {}", 2.0 * a);
    }

    #[test]
    fn evaluate_rejects_non_finite_integrand() {
        let bad = TestFunction::new("bad", |x: f64| 1.0 / x, None, None, vec![]);
        // a node exactly at zero: m = 1, delta = 0.5 puts the node at 0
        let real = RuleRealization::from_draws(1.0, 1, 0.5, -1.5, 1.5).unwrap();
        assert!(matches!(
            evaluate_realization(&bad, &real),
            Err(Error::NonFiniteIntegrand(_))
        ));
    }

    #[test]
    fn interior_riemann_sum_converges_at_first_order_for_lipschitz() {
        // |x| is Lipschitz with a kink; the shifted rectangle sum converges
        // to the oracle integral at rate O(1/m) for fixed shift.
        let f = TestFunction::new("abs", |x: f64| x.abs(), None, None, vec![0.0]);
        let t = 2.0;
        let reference = oracle::integrate_gaussian_interval(|x| x.abs(), -t, t, 1e-13)
            .unwrap()
            .value;
        let delta = 0.3;
        let mut cap = f64::INFINITY;
        for &m in &[64u64, 256, 1024, 4096] {
            let real = RuleRealization::from_draws(t, m, delta, -2.5, 2.5).unwrap();
            let e = evaluate_realization(&f, &real).unwrap();
            let tail_l = real.left_weight() * f.evaluate(real.left_node());
            let tail_r = real.right_weight() * f.evaluate(real.right_node());
            let interior = e.value - tail_l - tail_r;
            let err = (interior - reference).abs();
            if cap.is_infinite() {
                cap = 1.5 * err * m as f64; // calibrate C from the coarsest m
            }
            assert!(err <= cap / m as f64, "m = {m}: err = {err}");
        }
    }

    #[test]
    fn unbiasedness_against_exhaustive_oracle() {
        // polynomials through degree 6, budgets through 32, both parities
        for degree in [2u32, 5, 6] {
            let f = TestFunction::monomial(degree);
            let expect = f.reference().unwrap().value;
            for n in [8u64, 9, 16, 32] {
                let config = RuleConfig::new(n, aware(1)).unwrap();
                let e = oracle::exhaustive_expectation(&f, &config, 256).unwrap();
                assert!((e - expect).abs() <= 1e-10, "deg {degree}, n = {n}: {e}");
            }
        }
        let f1 = relu_power(1).unwrap();
        let config = RuleConfig::new(8, aware(1)).unwrap();
        let e = oracle::exhaustive_expectation(&f1, &config, 256).unwrap();
        let reference = f1.reference().unwrap().value;
        assert!((e - reference).abs() <= 1e-10, "{e} vs {reference}");
    }
}
