//! The partial theta function θ(q, x) = Σ_{n≥0} q^{n(n+1)/2} x^n, its first two
//! x-derivatives, and the location of its real zeros and critical points.
//!
//! For x ≈ −q^{−2j} the terms of the series reach e^{πj}-ish magnitudes before
//! cancelling to an O(1) sum, so every evaluation first estimates the peak term
//! and raises its precision by that many digits. Results keep the raised
//! precision; their absolute error stays below the working-precision noise.

use std::cmp::Ordering;

use rug::ops::Pow;
use rug::{Assign, Float};

use crate::error::{Error, Result};
use crate::numerics::{
    bisect_bracket, newton_bracketed, PrecisionContext, RatioBound, RatioBoundedSum, SeriesResult,
};

const LN_10: f64 = std::f64::consts::LN_10;

/// A validated evaluation point, 0 < q < 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaQuery {
    q: Float,
    x: Float,
}

impl ThetaQuery {
    pub fn new(q: Float, x: Float) -> Result<Self> {
        check_q(&q)?;
        if !x.is_finite() {
            return Err(Error::Domain("x must be finite".into()));
        }
        Ok(Self { q, x })
    }

    /// Parses both coordinates at working precision.
    pub fn parse(q: &str, x: &str, ctx: &PrecisionContext) -> Result<Self> {
        Self::new(ctx.parse(q)?, ctx.parse(x)?)
    }

    pub fn q(&self) -> &Float {
        &self.q
    }

    pub fn x(&self) -> &Float {
        &self.x
    }
}

pub(crate) fn check_q(q: &Float) -> Result<()> {
    if q.is_finite() && *q > 0 && *q < 1 {
        Ok(())
    } else {
        Err(Error::Domain(format!("q = {} is not in (0, 1)", q.to_f64())))
    }
}

/// θ together with ∂θ/∂x and ∂²θ/∂x²; components not requested are `None`.
#[derive(Debug, Clone)]
pub struct ThetaJet {
    pub value: Option<SeriesResult>,
    pub dx: Option<SeriesResult>,
    pub dxx: Option<SeriesResult>,
}

#[derive(Debug, Clone, Copy)]
struct Orders {
    value: bool,
    dx: bool,
    dxx: bool,
}

const VALUE: Orders = Orders { value: true, dx: false, dxx: false };
const DX: Orders = Orders { value: false, dx: true, dxx: false };
const DXX: Orders = Orders { value: false, dx: false, dxx: true };
const SLOPES: Orders = Orders { value: false, dx: true, dxx: true };
const ALL: Orders = Orders { value: true, dx: true, dxx: true };

struct Plan {
    bits: u32,
    /// Ratio index for the value series (q^{n+1}|x| <= 1/2).
    value_from: usize,
    /// Ratio index for the derivative series (3 q^{n+1}|x| <= 1/2, n >= 2).
    deriv_from: usize,
}

/// Smallest n >= 0 with q^{n+1}|x| <= limit, padded by one against f64 rounding.
fn ratio_index(ln_q: f64, ln_x: f64, limit: f64) -> usize {
    let need = (ln_x - limit.ln()) / (-ln_q);
    if need <= 0.0 {
        0
    } else {
        need.ceil() as usize
    }
}

fn plan(q: &Float, x: &Float, ctx: &PrecisionContext) -> Result<Plan> {
    check_q(q)?;
    let input_bits = ctx.bits().max(q.prec()).max(x.prec());
    if x.is_zero() {
        return Ok(Plan {
            bits: input_bits,
            value_from: 0,
            deriv_from: 2,
        });
    }
    let ln_q = Float::with_val(64, q.ln_ref()).to_f64();
    let ln_x = Float::with_val(64, x.abs_ref()).ln().to_f64();
    let value_from = ratio_index(ln_q, ln_x, 0.5);
    let deriv_from = ratio_index(ln_q, ln_x, 1.0 / 6.0).max(2);

    // log|a_n| = n(n+1)/2 ln q + n ln|x|, maximal near n* = -ln|x|/ln q - 1/2.
    let log_term = |n: f64| 0.5 * n * (n + 1.0) * ln_q + n * ln_x;
    let log_deriv = |n: f64| log_term(n) - 2.0 * ln_x + 2.0 * (n + 1.0).ln();
    let n_star = (-ln_x / ln_q - 0.5).max(0.0);
    let mut peak: f64 = 0.0;
    for n in [0.0, 1.0, 2.0, n_star.floor(), n_star.ceil(), n_star.floor() + 1.0] {
        peak = peak.max(log_term(n)).max(log_deriv(n));
    }
    let n_est = (2.0 * n_star + value_from as f64 + 100.0).max(1.0);
    let extra_digits = peak / LN_10 + 2.0 * n_est.log10() + 4.0;
    let bits = ctx.elevated_bits(extra_digits)?.max(input_bits);
    Ok(Plan {
        bits,
        value_from,
        deriv_from,
    })
}

fn jet(q: &Float, x: &Float, orders: Orders, ctx: &PrecisionContext) -> Result<ThetaJet> {
    let plan = plan(q, x, ctx)?;
    let bits = plan.bits;
    if x.is_zero() {
        let exact = |v: Float| SeriesResult {
            value: v,
            tail_bound: Float::with_val(bits, 0),
            terms_used: 1,
        };
        let q = Float::with_val(bits, q);
        return Ok(ThetaJet {
            value: orders.value.then(|| exact(Float::with_val(bits, 1))),
            dx: orders.dx.then(|| exact(q.clone())),
            dxx: orders.dxx.then(|| exact(Float::with_val(bits, (&q).pow(3u32)) * 2u32)),
        });
    }

    let value_bound = RatioBound::half(plan.value_from);
    let deriv_bound = RatioBound::half(plan.deriv_from);
    let mut value = orders
        .value
        .then(|| RatioBoundedSum::new(&value_bound, bits, ctx))
        .transpose()?;
    let mut dx = orders
        .dx
        .then(|| RatioBoundedSum::new(&deriv_bound, bits, ctx))
        .transpose()?;
    let mut dxx = orders
        .dxx
        .then(|| RatioBoundedSum::new(&deriv_bound, bits, ctx))
        .transpose()?;

    let qf = Float::with_val(bits, q);
    let xf = Float::with_val(bits, x);
    let x_inv = Float::with_val(bits, xf.recip_ref());
    // a_n = q^{n(n+1)/2} x^n and the step a_{n+1}/a_n = q^{n+1} x.
    let mut a = Float::with_val(bits, 1);
    let mut step = Float::with_val(bits, &qf * &xf);
    let mut scaled = Float::new(bits);
    let mut term = Float::new(bits);
    let mut n: u64 = 0;
    loop {
        let mut pending = false;
        if let Some(acc) = value.as_mut() {
            if !acc.is_done() {
                pending |= !acc.push(&a)?;
            }
        }
        let need_dx = dx.as_ref().is_some_and(|acc| !acc.is_done());
        let need_dxx = dxx.as_ref().is_some_and(|acc| !acc.is_done());
        if need_dx || need_dxx {
            scaled.assign(&a * &x_inv);
            if need_dx {
                term.assign(&scaled * n);
                pending |= !dx.as_mut().unwrap().push(&term)?;
            }
            if need_dxx {
                scaled *= &x_inv;
                term.assign(&scaled * (n * n.saturating_sub(1)));
                pending |= !dxx.as_mut().unwrap().push(&term)?;
            }
        }
        if !pending {
            break;
        }
        a *= &step;
        step *= &qf;
        n += 1;
    }
    Ok(ThetaJet {
        value: value.map(RatioBoundedSum::finish),
        dx: dx.map(RatioBoundedSum::finish),
        dxx: dxx.map(RatioBoundedSum::finish),
    })
}

/// θ(q, x) with a certified tail bound.
pub fn theta_eval(query: &ThetaQuery, ctx: &PrecisionContext) -> Result<SeriesResult> {
    Ok(jet(&query.q, &query.x, VALUE, ctx)?.value.expect("requested"))
}

/// ∂θ/∂x (q, x), summed term by term.
pub fn theta_dx(query: &ThetaQuery, ctx: &PrecisionContext) -> Result<SeriesResult> {
    Ok(jet(&query.q, &query.x, DX, ctx)?.dx.expect("requested"))
}

/// ∂²θ/∂x² (q, x), summed term by term.
pub fn theta_dxx(query: &ThetaQuery, ctx: &PrecisionContext) -> Result<SeriesResult> {
    Ok(jet(&query.q, &query.x, DXX, ctx)?.dxx.expect("requested"))
}

/// θ, ∂θ/∂x and ∂²θ/∂x² from a single pass over the terms.
pub fn theta_jet(query: &ThetaQuery, ctx: &PrecisionContext) -> Result<ThetaJet> {
    jet(&query.q, &query.x, ALL, ctx)
}

pub(crate) fn theta_value(q: &Float, x: &Float, ctx: &PrecisionContext) -> Result<Float> {
    Ok(jet(q, x, VALUE, ctx)?.value.expect("requested").value)
}

pub(crate) fn theta_slope(q: &Float, x: &Float, ctx: &PrecisionContext) -> Result<Float> {
    Ok(jet(q, x, DX, ctx)?.dx.expect("requested").value)
}

fn theta_slopes(q: &Float, x: &Float, ctx: &PrecisionContext) -> Result<(Float, Float)> {
    let j = jet(q, x, SLOPES, ctx)?;
    Ok((j.dx.expect("requested").value, j.dxx.expect("requested").value))
}

fn theta_value_and_slope(q: &Float, x: &Float, ctx: &PrecisionContext) -> Result<(Float, Float)> {
    let j = jet(q, x, Orders { value: true, dx: true, dxx: false }, ctx)?;
    Ok((j.value.expect("requested").value, j.dx.expect("requested").value))
}

/// |θ(q,x) − 1 − q·x·θ(q,qx)|, computed at the precision of the evaluations.
/// Both sums are truncated at tail_tolerance/(4(1 + |qx|)) so that truncation
/// contributes at most half a tail_tolerance to the residual.
pub fn functional_equation_residual(query: &ThetaQuery, ctx: &PrecisionContext) -> Result<Float> {
    let q = &query.q;
    let x = &query.x;
    let qx = Float::with_val(q.prec() + x.prec(), q * x);
    let weight = Float::with_val(ctx.bits(), qx.abs_ref()) + 1u32;
    let ctx = &ctx.with_tail_tolerance(Float::with_val(ctx.bits(), ctx.tail_tolerance() / weight) / 4u32);
    let lhs = theta_value(q, x, ctx)?;
    let inner = theta_value(q, &qx, ctx)?;
    let bits = lhs.prec().max(inner.prec()).max(qx.prec());
    let rhs = Float::with_val(bits, &qx * &inner) + 1u32;
    Ok(Float::with_val(bits, &lhs - &rhs).abs())
}

/// −q^{e/2} for an integer `e`; half-integer powers go through √q.
pub fn neg_half_power(q: &Float, twice_exp: i32, bits: u32) -> Float {
    let q = Float::with_val(bits, q);
    let p = if twice_exp % 2 == 0 {
        q.pow(twice_exp / 2)
    } else {
        q.sqrt().pow(twice_exp)
    };
    -p
}

/// u_s = −q^{−2s+1/2}, the marker between ξ_{2s} and ξ_{2s−1}.
pub fn u_marker(q: &Float, s: usize, bits: u32) -> Float {
    neg_half_power(q, 1 - 4 * s as i32, bits)
}

/// v_s = −q^{−2s−1/2}, the marker between ξ_{2s+1} and ξ_{2s}.
pub fn v_marker(q: &Float, s: usize, bits: u32) -> Float {
    neg_half_power(q, -1 - 4 * s as i32, bits)
}

/// Interval (−q^{−2s}, −q^{−2s+1}) holding t_s and the zero pair ξ_{2s}, ξ_{2s−1}.
pub fn minimum_bracket(q: &Float, s: usize, bits: u32) -> (Float, Float) {
    let s = s as i32;
    (neg_half_power(q, -4 * s, bits), neg_half_power(q, 2 - 4 * s, bits))
}

/// Interval (−q^{−2s−1}, −q^{−2s}) holding the local maximum w_s.
pub fn maximum_bracket(q: &Float, s: usize, bits: u32) -> (Float, Float) {
    let s = s as i32;
    (neg_half_power(q, -4 * s - 2, bits), neg_half_power(q, -4 * s, bits))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    Minimum,
    Maximum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPointRecord {
    pub index: usize,
    pub kind: CriticalKind,
    /// t_s for a minimum, w_s for a maximum.
    pub location: Float,
    pub theta_value: Float,
    pub second_derivative: Float,
    pub bracket: (Float, Float),
}

/// Zero of ∂θ/∂x on `bracket`, checked to be of the requested kind.
pub fn locate_critical_point(
    q: &Float,
    index: usize,
    kind: CriticalKind,
    bracket: (&Float, &Float),
    guess: Option<&Float>,
    ctx: &PrecisionContext,
) -> Result<CriticalPointRecord> {
    let (lo, hi) = bracket;
    let d_lo = theta_slope(q, lo, ctx)?;
    let d_hi = theta_slope(q, hi, ctx)?;
    let expected = match kind {
        CriticalKind::Minimum => d_lo < 0 && d_hi > 0,
        CriticalKind::Maximum => d_lo > 0 && d_hi < 0,
    };
    if !expected {
        return Err(Error::MissingSignChange {
            index,
            q: q.to_f64(),
            what: format!("{kind:?} of theta in its power-of-q bracket").to_lowercase(),
        });
    }
    let location = newton_bracketed(|x| theta_slopes(q, x, ctx), lo, hi, guess, ctx)?;
    let jet = jet(q, &location, Orders { value: true, dx: false, dxx: true }, ctx)?;
    let theta_value = jet.value.expect("requested").value;
    let second_derivative = jet.dxx.expect("requested").value;
    let curvature_ok = match kind {
        CriticalKind::Minimum => second_derivative > 0,
        CriticalKind::Maximum => second_derivative < 0,
    };
    if !curvature_ok {
        return Err(Error::MissingSignChange {
            index,
            q: q.to_f64(),
            what: format!("{kind:?} (second derivative has the wrong sign)").to_lowercase(),
        });
    }
    Ok(CriticalPointRecord {
        index,
        kind,
        location,
        theta_value,
        second_derivative,
        bracket: (lo.clone(), hi.clone()),
    })
}

/// t_1, w_1, t_2, w_2, … up to `s_max`; failures are per point.
pub fn critical_points(q: &Float, s_max: usize, ctx: &PrecisionContext) -> Result<Vec<Result<CriticalPointRecord>>> {
    check_q(q)?;
    let bits = ctx.bits().max(q.prec());
    let mut out = Vec::with_capacity(2 * s_max);
    for s in 1..=s_max {
        let (lo, hi) = minimum_bracket(q, s, bits);
        out.push(locate_critical_point(q, s, CriticalKind::Minimum, (&lo, &hi), None, ctx));
        let (lo, hi) = maximum_bracket(q, s, bits);
        out.push(locate_critical_point(q, s, CriticalKind::Maximum, (&lo, &hi), None, ctx));
    }
    Ok(out)
}

/// Minimum of θ(q, ·) over (−q^{−2s}, −q^{−2s+1}).
#[derive(Debug, Clone)]
pub struct BracketMinimum {
    pub location: Float,
    pub value: Float,
    /// True when the minimum is a critical point rather than an endpoint.
    pub interior: bool,
    pub bracket: (Float, Float),
}

const MIN_SCAN_CELLS: usize = 32;

/// Minimum of θ over the bracket of t_s. When t_s exists (slope negative at
/// the left end, positive at the right) this is θ(q, t_s); otherwise the
/// slope is scanned for interior minima and endpoints compete. Both endpoint
/// values are positive for every q, so a non-positive minimum certifies a
/// real zero pair in the bracket.
pub fn bracket_minimum(q: &Float, s: usize, guess: Option<&Float>, ctx: &PrecisionContext) -> Result<BracketMinimum> {
    check_q(q)?;
    let bits = ctx.bits().max(q.prec());
    let (lo, hi) = minimum_bracket(q, s, bits);
    let d_lo = theta_slope(q, &lo, ctx)?;
    let d_hi = theta_slope(q, &hi, ctx)?;
    if d_lo < 0 && d_hi > 0 {
        let t = newton_bracketed(|x| theta_slopes(q, x, ctx), &lo, &hi, guess, ctx)?;
        let value = theta_value(q, &t, ctx)?;
        return Ok(BracketMinimum {
            location: t,
            value,
            interior: true,
            bracket: (lo, hi),
        });
    }

    let mut best = (lo.clone(), theta_value(q, &lo, ctx)?, false);
    let v_hi = theta_value(q, &hi, ctx)?;
    if v_hi < best.1 {
        best = (hi.clone(), v_hi, false);
    }
    let width = Float::with_val(bits, &hi - &lo);
    let mut prev = (lo.clone(), d_lo);
    for i in 1..=MIN_SCAN_CELLS {
        let x = if i == MIN_SCAN_CELLS {
            hi.clone()
        } else {
            Float::with_val(bits, &width * i as u32) / MIN_SCAN_CELLS as u32 + &lo
        };
        let d = if i == MIN_SCAN_CELLS { d_hi.clone() } else { theta_slope(q, &x, ctx)? };
        if prev.1 < 0 && d > 0 {
            let t = newton_bracketed(|y| theta_slopes(q, y, ctx), &prev.0, &x, None, ctx)?;
            let v = theta_value(q, &t, ctx)?;
            if v < best.1 {
                best = (t, v, true);
            }
        }
        prev = (x, d);
    }
    Ok(BracketMinimum {
        location: best.0,
        value: best.1,
        interior: best.2,
        bracket: (lo, hi),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroRecord {
    /// j in ξ_j.
    pub index: usize,
    pub location: Float,
    pub bracket: (Float, Float),
    pub residual: Float,
    /// The pair ξ_{2s−1}, ξ_{2s} is below noise apart; both report t_s.
    pub coalesced: bool,
}

/// Real zeros ξ_1 … ξ_count of θ(q, ·), one result per index. Pairs
/// (ξ_{2s}, ξ_{2s−1}) are split at the minimum t_s of their bracket; a pair
/// whose minimum is positive has left the real axis and is reported as a
/// missing sign change for both indices.
pub fn real_zeros(q: &Float, count: usize, ctx: &PrecisionContext) -> Result<Vec<Result<ZeroRecord>>> {
    check_q(q)?;
    let noise = ctx.residual_bound();
    let mut out: Vec<Result<ZeroRecord>> = Vec::with_capacity(count);
    for s in 1..=count.div_ceil(2) {
        let (odd, even) = zero_pair(q, s, &noise, ctx);
        out.push(odd);
        if 2 * s <= count {
            out.push(even);
        }
    }
    Ok(out)
}

fn zero_pair(q: &Float, s: usize, noise: &Float, ctx: &PrecisionContext) -> (Result<ZeroRecord>, Result<ZeroRecord>) {
    let min = match bracket_minimum(q, s, None, ctx) {
        Ok(m) => m,
        Err(e) => return (Err(e.clone()), Err(e)),
    };
    let missing = |index: usize| Error::MissingSignChange {
        index,
        q: q.to_f64(),
        what: "zero".into(),
    };
    if min.value.cmp_abs(noise) != Some(Ordering::Greater) && min.interior {
        let residual = Float::with_val(min.value.prec(), min.value.abs_ref());
        let record = |index| ZeroRecord {
            index,
            location: min.location.clone(),
            bracket: min.bracket.clone(),
            residual: residual.clone(),
            coalesced: true,
        };
        return (Ok(record(2 * s - 1)), Ok(record(2 * s)));
    }
    if min.value > 0 {
        return (Err(missing(2 * s - 1)), Err(missing(2 * s)));
    }
    let (lo, hi) = &min.bracket;
    let odd = refine_zero(q, 2 * s - 1, &min.location, hi, ctx);
    let even = refine_zero(q, 2 * s, lo, &min.location, ctx);
    (odd, even)
}

/// Bisection to the root tolerance followed by one Newton polish.
fn refine_zero(q: &Float, index: usize, lo: &Float, hi: &Float, ctx: &PrecisionContext) -> Result<ZeroRecord> {
    let (a, b) = bisect_bracket(|x| theta_value(q, x, ctx), lo, hi, ctx).map_err(|e| match e {
        Error::SameSign { .. } => Error::MissingSignChange {
            index,
            q: q.to_f64(),
            what: "zero in its power-of-q bracket".into(),
        },
        other => other,
    })?;
    let bits = a.prec().max(b.prec());
    let mid = Float::with_val(bits, &a + &b) / 2u32;
    let (f, df) = theta_value_and_slope(q, &mid, ctx)?;
    let mut location = mid;
    if !df.is_zero() {
        let polished = Float::with_val(bits, &location - Float::with_val(bits, &f / &df));
        if polished >= *lo && polished <= *hi {
            location = polished;
        }
    }
    let residual = theta_value(q, &location, ctx)?.abs();
    Ok(ZeroRecord {
        index,
        location,
        bracket: (lo.clone(), hi.clone()),
        residual,
        coalesced: false,
    })
}

/// Truncated Hadamard product ∏_{j≤m} (1 − x/ξ_j) over the supplied zeros.
pub fn theta_product_eval(x: &Float, zeros: &[ZeroRecord], ctx: &PrecisionContext) -> Float {
    let bits = ctx.bits().max(x.prec());
    let mut product = Float::with_val(bits, 1);
    for z in zeros {
        let ratio = Float::with_val(bits, x / &z.location);
        product *= Float::with_val(bits, 1 - ratio);
    }
    product
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    fn query(q: &str, x: &str) -> ThetaQuery {
        ThetaQuery::parse(q, x, &ctx()).unwrap()
    }

    #[test]
    fn query_rejects_boundary_q() {
        let c = ctx();
        assert!(ThetaQuery::new(c.float(0), c.float(1)).is_err());
        assert!(ThetaQuery::new(c.float(1), c.float(1)).is_err());
        assert!(ThetaQuery::new(c.float(-0.5), c.float(1)).is_err());
    }

    #[test]
    fn value_at_origin() {
        let r = theta_eval(&query("0.5", "0"), &ctx()).unwrap();
        assert_eq!(r.value, 1);
        assert!(r.tail_bound.is_zero());
        let d = theta_dx(&query("0.5", "0"), &ctx()).unwrap();
        assert_eq!(d.value, 0.5);
    }

    #[test]
    fn value_at_minus_one_matches_direct_partial_sum() {
        // Oracle: 60 terms of the defining series at 300 bits.
        let bits = 300;
        let q = Float::with_val(bits, 0.5);
        let mut direct = Float::with_val(bits, 0);
        for n in 0u32..60 {
            let t = Float::with_val(bits, (&q).pow(n * (n + 1) / 2));
            if n % 2 == 0 {
                direct += t;
            } else {
                direct -= t;
            }
        }
        let c = ctx();
        let r = theta_eval(&query("0.5", "-1"), &c).unwrap();
        let err = Float::with_val(bits, &r.value - &direct).abs();
        assert!(err < c.tail_tolerance().clone() * 3u32, "{}", err.to_f64());
        assert!(r.value.to_string().starts_with("6.10321518"));
        assert!(r.tail_bound <= *c.tail_tolerance());
    }

    #[test]
    fn golden_double_zero_is_a_zero() {
        let c = ctx();
        let q = query("0.3092493386", "-7.5032559833");
        let v = theta_eval(&q, &c).unwrap();
        assert!(v.value.clone().abs() < 1e-8, "{}", v.value.to_f64());
        let d = theta_dx(&q, &c).unwrap();
        assert!(d.value.clone().abs() < 1e-8, "{}", d.value.to_f64());
    }

    #[test]
    fn derivative_matches_central_difference() {
        let c = ctx();
        let bits = c.bits();
        let h = crate::numerics::pow10(bits, -10);
        let x = c.float(-2);
        let q = c.float(0.3);
        let xp = Float::with_val(bits, &x + &h);
        let xm = Float::with_val(bits, &x - &h);
        let fd = (theta_value(&q, &xp, &c).unwrap() - theta_value(&q, &xm, &c).unwrap()) / (h * 2u32);
        let d = theta_slope(&q, &x, &c).unwrap();
        let rel = Float::with_val(bits, &fd - &d).abs() / d.clone().abs();
        assert!(rel < 1e-15, "{}", rel.to_f64());

        // second derivative against a difference of first derivatives
        let h2 = crate::numerics::pow10(bits, -12);
        let xp = Float::with_val(bits, &x + &h2);
        let xm = Float::with_val(bits, &x - &h2);
        let fd2 = (theta_slope(&q, &xp, &c).unwrap() - theta_slope(&q, &xm, &c).unwrap()) / (h2 * 2u32);
        let dd = theta_dxx(&ThetaQuery::new(q, x).unwrap(), &c).unwrap().value;
        let rel = Float::with_val(bits, &fd2 - &dd).abs() / dd.abs();
        assert!(rel < 1e-15, "{}", rel.to_f64());
    }

    #[test]
    fn functional_equation_residuals() {
        let c = ctx();
        let bound = Float::with_val(c.bits(), c.tail_tolerance() * 3u32);
        assert!(functional_equation_residual(&query("0.5", "0"), &c).unwrap().is_zero());
        for (q, x) in [("0.7", "-5"), ("0.95", "10"), ("0.95", "-40")] {
            let r = functional_equation_residual(&query(q, x), &c).unwrap();
            assert!(r <= bound, "q={q} x={x}: {}", r.to_f64());
        }
    }

    #[test]
    fn first_zero_at_q_0_2_is_in_its_bracket() {
        let c = ctx();
        let q = c.float(0.2);
        let zeros = real_zeros(&q, 1, &c).unwrap();
        let z = zeros[0].as_ref().unwrap();
        let lo = -Float::with_val(c.bits(), (&q).pow(-1.5f64));
        assert!(z.location > lo && z.location < -5);
        assert!(z.residual <= c.residual_bound());
    }

    #[test]
    fn zeros_at_q_0_2_are_decreasing() {
        let c = ctx();
        let q = c.float(0.2);
        let zeros: Vec<_> = real_zeros(&q, 4, &c).unwrap().into_iter().map(Result::unwrap).collect();
        assert!(zeros[0].location < 0);
        for w in zeros.windows(2) {
            assert!(w[1].location < w[0].location);
            assert!(w[0].location > w[0].bracket.0 && w[0].location < w[0].bracket.1);
        }
    }

    #[test]
    fn zeros_match_sign_scan_oracle() {
        // Dense f64-free oracle: θ changes sign between consecutive points of a
        // 2000-cell grid around the reported zero.
        let c = ctx();
        let q = c.float(0.2);
        let zeros = real_zeros(&q, 2, &c).unwrap();
        for z in zeros.iter().map(|z| z.as_ref().unwrap()) {
            let width = Float::with_val(c.bits(), &z.bracket.1 - &z.bracket.0) / 2000u32;
            let left = Float::with_val(c.bits(), &z.location - &width);
            let right = Float::with_val(c.bits(), &z.location + &width);
            let fl = theta_value(&q, &left, &c).unwrap();
            let fr = theta_value(&q, &right, &c).unwrap();
            assert!(fl.is_sign_negative() != fr.is_sign_negative());
        }
    }

    #[test]
    fn critical_point_sign_pattern_at_q_0_2() {
        let c = ctx();
        let cps = critical_points(&c.float(0.2), 1, &c).unwrap();
        let t1 = cps[0].as_ref().unwrap();
        let w1 = cps[1].as_ref().unwrap();
        assert_eq!(t1.kind, CriticalKind::Minimum);
        assert_eq!(w1.kind, CriticalKind::Maximum);
        assert!(t1.theta_value < 0 && w1.theta_value > 0);
        assert!(w1.location < t1.location);
    }

    #[test]
    fn critical_points_respect_shift_inequalities() {
        let c = ctx();
        let q = c.float(0.25);
        let cps: Vec<_> = critical_points(&q, 2, &c).unwrap().into_iter().map(Result::unwrap).collect();
        let (t1, w1, t2) = (&cps[0].location, &cps[1].location, &cps[2].location);
        let w1_over_q = Float::with_val(c.bits(), w1 / &q);
        let t1_over_q = Float::with_val(c.bits(), t1 / &q);
        assert!(*t2 <= w1_over_q);
        assert!(*w1 <= t1_over_q);
    }

    fn golden_section_extremum(q: &Float, lo: &Float, hi: &Float, minimize: bool, c: &PrecisionContext) -> Float {
        // Oracle independent of the slope series: golden-section search on θ itself.
        let bits = c.bits() + 40;
        let ratio = (Float::with_val(bits, 5).sqrt() - 1u32) / 2u32;
        let mut a = Float::with_val(bits, lo);
        let mut b = Float::with_val(bits, hi);
        let f = |x: &Float| {
            let v = theta_value(q, x, c).unwrap();
            if minimize { v } else { -v }
        };
        let mut x1 = Float::with_val(bits, &b - Float::with_val(bits, &b - &a) * &ratio);
        let mut x2 = Float::with_val(bits, &a + Float::with_val(bits, &b - &a) * &ratio);
        let mut f1 = f(&x1);
        let mut f2 = f(&x2);
        // Golden section only resolves ~sqrt(eps) of the working precision.
        let stop = crate::numerics::pow10(bits, -25);
        while Float::with_val(bits, &b - &a) > stop {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = Float::with_val(bits, &b - Float::with_val(bits, &b - &a) * &ratio);
                f1 = f(&x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = Float::with_val(bits, &a + Float::with_val(bits, &b - &a) * &ratio);
                f2 = f(&x2);
            }
        }
        Float::with_val(bits, &a + &b) / 2u32
    }

    #[test]
    fn critical_points_match_golden_section_search() {
        let c = ctx();
        let q = c.float(0.3);
        let cps = critical_points(&q, 3, &c).unwrap();
        for cp in cps.iter().map(|r| r.as_ref().unwrap()) {
            let oracle = golden_section_extremum(&q, &cp.bracket.0, &cp.bracket.1, cp.kind == CriticalKind::Minimum, &c);
            let diff = Float::with_val(c.bits(), &oracle - &cp.location).abs();
            // θ is flat to second order at an extremum, so the value-only
            // search resolves the location to about sqrt(1e-50).
            let scale = cp.location.clone().abs();
            assert!(diff < scale * 1e-20, "{:?} {}: {}", cp.kind, cp.index, diff.to_f64());
        }
    }

    #[test]
    fn product_formula() {
        let c = ctx();
        let q = c.float(0.2);
        let zeros: Vec<_> = real_zeros(&q, 8, &c).unwrap().into_iter().map(Result::unwrap).collect();
        assert_eq!(theta_product_eval(&c.float(0), &zeros, &c), 1);
        assert!(theta_product_eval(&zeros[0].location, &zeros, &c).is_zero());
        let x = c.float(-1);
        let prod = theta_product_eval(&x, &zeros, &c);
        let series = theta_value(&q, &x, &c).unwrap();
        let rel = Float::with_val(c.bits(), &prod - &series).abs() / series.abs();
        assert!(rel < 1e-4, "{}", rel.to_f64());
    }

    #[test]
    fn bracket_minimum_positive_after_pair_leaves_axis() {
        let c = ctx();
        // q = 0.5 is past the first spectral value: the first pair is complex.
        let m = bracket_minimum(&c.float(0.5), 1, None, &c).unwrap();
        assert!(m.value > 0);
        let zeros = real_zeros(&c.float(0.5), 2, &c).unwrap();
        assert!(matches!(zeros[0], Err(Error::MissingSignChange { index: 1, .. })));
        assert!(matches!(zeros[1], Err(Error::MissingSignChange { index: 2, .. })));
    }
}
