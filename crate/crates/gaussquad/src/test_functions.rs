//! Benchmark integrands and lower-bound bump functions.
//!
//! The registry carries the experiment corpus: the kinked half-line powers
//! `relu_power(p) = max(x,0)^p`, the compactly supported smooth bump, and
//! `tanh(x)^2`, each with a reference integral (closed form where one
//! exists, otherwise cached from the oracle integrator at construction).
//!
//! [`FoolingFunction`] builds the compactly supported polynomial bumps used
//! to probe integration lower bounds: for a resolution parameter n, the
//! 10n intervals `((j-1)/n, j/n)` tile (-5, 5), and the bump on interval j
//! is `t^alpha (1-t)^alpha` in local coordinates. Its Lebesgue integral,
//! derivative polynomials, Sobolev norm and the closed-form Gaussian
//! integral lower bound are all available exactly or through the oracle.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::oracle;

/// Where a reference integral came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    Oracle,
}

/// A reference value for `I(f)` with its provenance.
#[derive(Debug, Clone, Copy)]
pub struct Reference {
    pub value: f64,
    pub provenance: Provenance,
}

/// An evaluatable integrand with metadata.
#[derive(Clone)]
pub struct TestFunction {
    id: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    smoothness: Option<u32>,
    reference: Option<Reference>,
    kinks: Vec<f64>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("id", &self.id)
            .field("smoothness", &self.smoothness)
            .field("reference", &self.reference)
            .field("kinks", &self.kinks)
            .finish()
    }
}

impl TestFunction {
    pub fn new(
        id: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        smoothness: Option<u32>,
        reference: Option<Reference>,
        kinks: Vec<f64>,
    ) -> Self {
        Self {
            id: id.into(),
            eval: Arc::new(eval),
            smoothness,
            reference,
            kinks,
        }
    }

    /// The constant integrand `x -> c`, with its exact integral.
    pub fn constant(id: &str, c: f64) -> Self {
        Self::new(
            id,
            move |_| c,
            None,
            Some(Reference {
                value: c,
                provenance: Provenance::ClosedForm,
            }),
            Vec::new(),
        )
    }

    /// The monomial `x -> x^k` with its Gaussian moment as reference:
    /// zero for odd k, the double factorial (k-1)!! for even k.
    pub fn monomial(k: u32) -> Self {
        let moment = if k % 2 == 1 {
            0.0
        } else {
            (1..=k / 2).map(|i| (2 * i - 1) as f64).product()
        };
        Self::new(
            format!("x^{k}"),
            move |x: f64| x.powi(k as i32),
            None,
            Some(Reference {
                value: moment,
                provenance: Provenance::ClosedForm,
            }),
            Vec::new(),
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    #[inline]
    pub fn evaluate(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    /// Largest known Sobolev order; `None` for infinitely smooth integrands.
    pub fn smoothness(&self) -> Option<u32> {
        self.smoothness
    }

    pub fn reference(&self) -> Option<Reference> {
        self.reference
    }

    /// Points where the integrand is not smooth; quadrature oracles split
    /// shift integrals there.
    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }
}

/// Half-line power `(max{x, 0})^p` for p in {1, 2, 3}.
pub fn f1(p: u32, x: f64) -> Result<f64> {
    if !(1..=3).contains(&p) {
        return Err(Error::UnsupportedExponent(p));
    }
    Ok(x.max(0.0).powi(p as i32))
}

/// Smooth compactly supported bump: `exp(-1/(1-x^2))` inside (-1, 1), zero
/// outside. Arguments within 1e-12 of the boundary return zero straight
/// away; the true value there is far below what doubles resolve.
pub fn f2(x: f64) -> f64 {
    if x.abs() >= 1.0 - 1e-12 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

/// `tanh(x)^2`.
pub fn f3(x: f64) -> f64 {
    let t = x.tanh();
    t * t
}

/// `f1` packaged as a registry function with its closed-form reference.
pub fn relu_power(p: u32) -> Result<TestFunction> {
    if !(1..=3).contains(&p) {
        return Err(Error::UnsupportedExponent(p));
    }
    // Half moments: ∫_0^∞ x^p ρ dx for p = 1, 2, 3.
    let reference = match p {
        1 => crate::special::FRAC_1_SQRT_2PI,
        2 => 0.5,
        _ => 2.0 * crate::special::FRAC_1_SQRT_2PI,
    };
    Ok(TestFunction::new(
        format!("f1p{p}"),
        move |x: f64| x.max(0.0).powi(p as i32),
        Some(p),
        Some(Reference {
            value: reference,
            provenance: Provenance::ClosedForm,
        }),
        vec![0.0],
    ))
}

/// The immutable function registry used by the experiment harness.
pub struct Registry {
    functions: Vec<TestFunction>,
}

impl Registry {
    /// Build the registry, computing oracle references for the integrands
    /// without closed forms. The oracle values are cached here because
    /// experiments reuse them thousands of times.
    pub fn new() -> Result<Self> {
        let mut functions = Vec::new();
        for p in 1..=3 {
            functions.push(relu_power(p)?);
        }
        let i_f2 = oracle::integrate_gaussian(f2, 1e-13)?.value;
        functions.push(TestFunction::new(
            "f2",
            f2,
            None,
            Some(Reference {
                value: i_f2,
                provenance: Provenance::Oracle,
            }),
            Vec::new(),
        ));
        let i_f3 = oracle::integrate_gaussian(f3, 1e-13)?.value;
        functions.push(TestFunction::new(
            "f3",
            f3,
            None,
            Some(Reference {
                value: i_f3,
                provenance: Provenance::Oracle,
            }),
            Vec::new(),
        ));
        // Hidden ids used by tests and smoke runs.
        functions.push(TestFunction::constant("zero", 0.0));
        functions.push(TestFunction::constant("one", 1.0));
        Ok(Self { functions })
    }

    pub fn lookup(&self, id: &str) -> Result<&TestFunction> {
        self.functions
            .iter()
            .find(|f| f.id() == id)
            .ok_or_else(|| Error::UnknownFunction(id.to_string()))
    }

    pub fn functions(&self) -> &[TestFunction] {
        &self.functions
    }
}

/// Exact factorial as f64 (exact through 18!, plenty for alpha <= 10 in the
/// ratio expressions where it appears).
fn factorial(k: u32) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `S_{alpha,tau}`: the exact double sum
/// `Σ_{l1,l2} (-1)^{l1+l2} C(α,l1) C(α,l2) (α+l1)!/(α+l1-τ)! (α+l2)!/(α+l2-τ)!`,
/// evaluated in 128-bit integers. It is the square of the inner alternating
/// sum, hence nonnegative — and exactly zero for τ < α.
pub fn s_constant(alpha: u32, tau: u32) -> Result<f64> {
    if !(1..=10).contains(&alpha) {
        return Err(Error::AlphaOutOfRange("s_constant needs 1 <= alpha <= 10"));
    }
    if tau > alpha {
        return Err(Error::AlphaOutOfRange("s_constant needs tau <= alpha"));
    }
    let binom = |n: u32, k: u32| -> i128 {
        let mut r: i128 = 1;
        for i in 0..k {
            r = r * (n - i) as i128 / (i + 1) as i128;
        }
        r
    };
    let falling = |a: u32, t: u32| -> i128 {
        let mut r: i128 = 1;
        for i in 0..t {
            r *= (a - i) as i128;
        }
        r
    };
    let mut total: i128 = 0;
    for l1 in 0..=alpha {
        for l2 in 0..=alpha {
            let sign = if (l1 + l2) % 2 == 0 { 1 } else { -1 };
            total += sign
                * binom(alpha, l1)
                * binom(alpha, l2)
                * falling(alpha + l1, tau)
                * falling(alpha + l2, tau);
        }
    }
    debug_assert!(total >= 0);
    Ok(total as f64)
}

/// A compactly supported polynomial bump on one of the 10n lower-bound
/// intervals tiling (-5, 5).
#[derive(Debug, Clone)]
pub struct FoolingFunction {
    alpha: u32,
    n: u32,
    j: i64,
    support: (f64, f64),
    /// derivs[tau] holds the coefficients of P^(tau) where
    /// P(t) = t^alpha (1-t)^alpha in the local coordinate.
    derivs: Vec<Vec<f64>>,
}

/// Construct the bump on interval `((j-1)/n, j/n)` for `j` in
/// `{-5n+1, ..., 5n}`.
pub fn fooling_bump(alpha: u32, n: u32, j: i64) -> Result<FoolingFunction> {
    if !(1..=10).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(
            "fooling_bump needs 1 <= alpha <= 10",
        ));
    }
    if n < 1 {
        return Err(Error::AlphaOutOfRange("fooling_bump needs n >= 1"));
    }
    let lo = -5 * n as i64 + 1;
    let hi = 5 * n as i64;
    if !(lo..=hi).contains(&j) {
        return Err(Error::IntervalIndexOutOfRange { j, n });
    }
    // t^alpha (1-t)^alpha = Σ_k (-1)^k C(alpha,k) t^{alpha+k}
    let mut coeffs = vec![0.0; 2 * alpha as usize + 1];
    let mut binom = 1.0;
    for k in 0..=alpha {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[(alpha + k) as usize] = sign * binom;
        binom = binom * (alpha - k) as f64 / (k + 1) as f64;
    }
    let mut derivs = vec![coeffs];
    for tau in 1..=alpha as usize {
        derivs.push(differentiate(&derivs[tau - 1]));
    }
    let nf = n as f64;
    Ok(FoolingFunction {
        alpha,
        n,
        j,
        support: ((j - 1) as f64 / nf, j as f64 / nf),
        derivs,
    })
}

impl FoolingFunction {
    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn resolution(&self) -> u32 {
        self.n
    }

    pub fn index(&self) -> i64 {
        self.j
    }

    /// Open support interval `((j-1)/n, j/n)`.
    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    #[inline]
    fn local(&self, x: f64) -> f64 {
        (x - self.support.0) * self.n as f64
    }

    /// Bump value; zero outside the open support, strictly positive inside.
    pub fn evaluate(&self, x: f64) -> f64 {
        let t = self.local(x);
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        horner(&self.derivs[0], t)
    }

    /// `tau`-th derivative (one-sided zero outside the support):
    /// `n^tau * P^(tau)(t)` for `tau <= alpha`.
    pub fn derivative(&self, tau: u32, x: f64) -> f64 {
        let t = self.local(x);
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        (self.n as f64).powi(tau as i32) * horner(&self.derivs[tau as usize], t)
    }

    /// Exact Lebesgue integral over the support:
    /// `(1/n) * (alpha!)^2 / (2 alpha + 1)!` (a Beta integral).
    pub fn lebesgue_integral(&self) -> f64 {
        let a = self.alpha;
        factorial(a) * factorial(a) / (self.n as f64 * factorial(2 * a + 1))
    }

    /// `∫ h_j ρ` over the support, by the oracle integrator.
    pub fn gaussian_integral(&self, tol: f64) -> Result<f64> {
        let (a, b) = self.support;
        Ok(oracle::integrate_gaussian_interval(|x| self.evaluate(x), a, b, tol)?.value)
    }

    /// Numerical squared Sobolev norm `Σ_τ ∫ |h^(τ)|² ρ`, using the exact
    /// derivative polynomials (no finite differences near the support
    /// endpoints, where one-sided derivatives jump).
    pub fn sobolev_norm_sq(&self, tol: f64) -> Result<f64> {
        let (a, b) = self.support;
        let mut total = 0.0;
        for tau in 0..=self.alpha {
            let part = oracle::integrate_gaussian_interval(
                |x| {
                    let d = self.derivative(tau, x);
                    d * d
                },
                a,
                b,
                tol,
            )?;
            total += part.value;
        }
        Ok(total)
    }

    /// `∫ |h^(τ)|² dx` over the support (unweighted), for the norm-chain
    /// property tests.
    pub fn derivative_l2_sq(&self, tau: u32, tol: f64) -> Result<f64> {
        let (a, b) = self.support;
        Ok(oracle::integrate(
            |x| {
                let d = self.derivative(tau, x);
                d * d
            },
            a,
            b,
            tol,
        )?
        .value)
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

fn differentiate(coeffs: &[f64]) -> Vec<f64> {
    if coeffs.len() <= 1 {
        return vec![0.0];
    }
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

/// Closed-form lower bound on `∫ h_j ρ`:
/// `(alpha!)^2 / (n (2 alpha+1)! sqrt(2 pi e^25))`.
pub fn fooling_gaussian_integral_lower_bound(alpha: u32, n: u32, j: i64) -> Result<f64> {
    // validate the same preconditions as the bump itself
    let _ = fooling_bump(alpha, n, j)?;
    let a = factorial(alpha);
    Ok(a * a
        / (n as f64
            * factorial(2 * alpha + 1)
            * (2.0 * std::f64::consts::PI * 25.0f64.exp()).sqrt()))
}

/// The constant `eta_alpha` in the normalized lower bound
/// `I(h_j / ||h_j||) >= eta_alpha * n^{-alpha-1/2}`:
/// the closed-form integral bound divided by the norm bound
/// `(Σ_τ S_{alpha,τ} / sqrt(2π))^{1/2}`.
pub fn eta_constant(alpha: u32) -> Result<f64> {
    let mut s_sum = 0.0;
    for tau in 0..=alpha {
        s_sum += s_constant(alpha, tau)?;
    }
    let a = factorial(alpha);
    let integral_part =
        a * a / (factorial(2 * alpha + 1) * (2.0 * std::f64::consts::PI * 25.0f64.exp()).sqrt());
    Ok(integral_part / (s_sum / (2.0 * std::f64::consts::PI).sqrt()).sqrt())
}
