#![allow(clippy::excessive_precision)]

//! Independent ground-truth machinery.
//!
//! Everything here is deliberately disjoint from the quadrature rules it is
//! used to check: an adaptive Gauss–Kronrod integrator for reference values
//! of `∫ f ρ`, Gauss–Legendre node generation for the shift average, and an
//! exhaustive-expectation evaluator that computes the exact mixture mean of
//! the randomized rule (uniform average over node counts, spectral
//! quadrature over the shift, analytic tail expectations).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::rules::RuleConfig;
use crate::special::gaussian_pdf;
use crate::test_functions::TestFunction;

/// Hard cap on adaptive panels.
const MAX_PANELS: usize = 1 << 16;

/// Polynomial-growth degree assumed of integrands when truncating the real
/// line: |f(x)| <= max(1, |x|)^TAIL_DEGREE. Callers assert this.
const TAIL_DEGREE: i32 = 12;

/// Result of one oracle integration.
#[derive(Debug, Clone, Copy)]
pub struct OracleResult {
    pub value: f64,
    pub error_estimate: f64,
    pub subdivisions: usize,
}

// 15-point Kronrod / 7-point Gauss pair on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// One Gauss–Kronrod 15-point pass over [a, b]: returns (value, error).
fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    // The (200|err|)^1.5 rescaling of QUADPACK is tuned for its round-off
    // tracking; a plain difference-based estimate is already conservative
    // for the smooth integrands this oracle sees.
    (value, err)
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integration of `f` over the finite interval [a, b]: bisect the
/// worst panel until the summed Gauss–Kronrod error estimate drops below
/// `tol`, or fail after 2^16 panels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<OracleResult> {
    if a == b {
        return Ok(OracleResult {
            value: 0.0,
            error_estimate: 0.0,
            subdivisions: 0,
        });
    }
    let (value, error) = qk15(&f, a, b);
    if !value.is_finite() || !error.is_finite() {
        return Err(Error::QuadratureDidNotConverge(format!(
            "non-finite panel result on [{a}, {b}]"
        )));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total_err = error;
    while total_err > tol {
        if heap.len() >= MAX_PANELS {
            return Err(Error::QuadratureDidNotConverge(format!(
                "error estimate {total_err:.3e} > tol {tol:.3e} after {MAX_PANELS} panels on [{a}, {b}]"
            )));
        }
        let worst = heap.pop().expect("heap nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval narrower than one ulp; cannot improve further.
            return Err(Error::QuadratureDidNotConverge(format!(
                "panel [{}, {}] collapsed below machine resolution",
                worst.a, worst.b
            )));
        }
        let (v1, e1) = qk15(&f, worst.a, mid);
        let (v2, e2) = qk15(&f, mid, worst.b);
        if !(v1.is_finite() && v2.is_finite() && e1.is_finite() && e2.is_finite()) {
            return Err(Error::QuadratureDidNotConverge(format!(
                "non-finite panel result near [{}, {}]",
                worst.a, worst.b
            )));
        }
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    let subdivisions = heap.len();
    // Re-sum panel values in interval order so the result does not depend on
    // heap internals.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut sum = KahanSum::new();
    for p in &panels {
        sum.add(p.value);
    }
    Ok(OracleResult {
        value: sum.value(),
        error_estimate: total_err,
        subdivisions,
    })
}

/// Cut-off radius R such that the discarded Gaussian tail of any integrand
/// with |f(x)| <= max(1,|x|)^12 stays below `budget`, via the Mills-ratio
/// bound on incomplete Gaussian moments.
fn tail_radius(budget: f64) -> f64 {
    let mut r = 12.0f64;
    loop {
        // ∫_R^∞ x^12 ρ dx <= 1.1 R^11 ρ(R) for R >= 12; doubled for two tails.
        let bound = 2.2 * r.powi(TAIL_DEGREE - 1) * gaussian_pdf(r);
        if bound < budget || r > 200.0 {
            return r;
        }
        r += 0.5;
    }
}

/// Reference value of `I(f) = ∫_R f(x) ρ(x) dx` for polynomially bounded f.
///
/// The line is truncated at a radius where the discarded tail is below
/// tol/10, then integrated adaptively until the error estimate is below tol.
pub fn integrate_gaussian<F: Fn(f64) -> f64>(f: F, tol: f64) -> Result<OracleResult> {
    if tol < 1e-13 {
        return Err(Error::ToleranceTooTight(tol));
    }
    let r = tail_radius(tol / 10.0);
    integrate(|x| f(x) * gaussian_pdf(x), -r, r, tol)
}

/// `∫_a^b f ρ` over a finite interval.
pub fn integrate_gaussian_interval<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<OracleResult> {
    if tol < 1e-13 {
        return Err(Error::ToleranceTooTight(tol));
    }
    integrate(|x| f(x) * gaussian_pdf(x), a, b, tol)
}

/// `∫_T^∞ f ρ` (or the mirror image) with the same tail-radius rule.
pub fn integrate_gaussian_tail<F: Fn(f64) -> f64>(
    f: F,
    t: f64,
    right: bool,
    tol: f64,
) -> Result<OracleResult> {
    if tol < 1e-13 {
        return Err(Error::ToleranceTooTight(tol));
    }
    let r = tail_radius(tol / 10.0).max(t + 1.0);
    let (a, b) = if right { (t, r) } else { (-r, -t) };
    integrate(|x| f(x) * gaussian_pdf(x), a, b, tol)
}

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence. Accurate to a few ulps for n up to at least 10^4.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p2, d2) = legendre(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Legendre P_n(x) and its derivative via the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Compensated (Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Exact mixture mean of the randomized rule applied to `f`:
/// the uniform average over admissible node counts of the shift integral of
/// the interior sum, plus the analytic tail-node expectations
/// `Φ(-T)·E[f(ξ_left)] = ∫_{-∞}^{-T} f ρ` and its right mirror.
///
/// The shift integral is done with `delta_points`-point Gauss–Legendre per
/// smooth piece; the (0,1) shift interval is split where a grid node crosses
/// one of the integrand's listed kinks, which restores spectral accuracy for
/// piecewise-smooth integrands.
pub fn exhaustive_expectation(
    f: &TestFunction,
    config: &RuleConfig,
    delta_points: u32,
) -> Result<f64> {
    if delta_points < 64 {
        return Err(Error::TooFewDeltaPoints(delta_points));
    }
    let t = config.cutoff_t();
    let n = config.n();
    let (gl_nodes, gl_weights) = gauss_legendre(delta_points as usize);

    let lo = n / 2;
    let hi = n - 2;
    let mut interior = KahanSum::new();
    for m_star in lo..=hi {
        // Shift values at which some interior node sits exactly on a kink:
        // delta = frac(m * (kink + T) / (2T)), one per kink location.
        let mut cuts = vec![0.0, 1.0];
        for &kink in f.kinks() {
            if kink.abs() < t {
                let d = (m_star as f64 * (kink + t) / (2.0 * t)).fract();
                if d > 0.0 && d < 1.0 {
                    cuts.push(d);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut shift_integral = KahanSum::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (&u, &gw) in gl_nodes.iter().zip(&gl_weights) {
                let delta = mid + half * u;
                let mut grid_sum = KahanSum::new();
                for j in 0..m_star {
                    let x = t * (2.0 * (j as f64 + delta) / m_star as f64 - 1.0);
                    grid_sum.add(f.evaluate(x) * gaussian_pdf(x));
                }
                shift_integral.add(gw * half * (2.0 * t / m_star as f64) * grid_sum.value());
            }
        }
        interior.add(shift_integral.value());
    }
    let interior_avg = interior.value() / (hi - lo + 1) as f64;

    let tol = 1e-12;
    let left = integrate_gaussian_tail(|x| f.evaluate(x), t, false, tol)?;
    let right = integrate_gaussian_tail(|x| f.evaluate(x), t, true, tol)?;
    Ok(interior_avg + left.value + right.value)
}
