//! The theta constant ψ(q) = 1 + 2Σ(−1)^j q^{j²} and its companions: the
//! shifted tails λ_s and χ_s, the functions τ, h, h1, h2 built from log ψ,
//! ζ_k, the partial geometric sums S_l and the estimator K_est.

use std::cmp::Ordering;

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{pow10, sum_ratio_bounded_series, PrecisionContext, RatioBound, SeriesResult};

/// Which representation of ψ produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiRoute {
    Series,
    Product,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiValue {
    pub q: Float,
    pub psi: Float,
    pub via: PsiRoute,
    /// Bound on the absolute truncation error of `psi`.
    pub tail_bound: Float,
}

/// τ(q) = (q − 1) log ψ(q) together with h, its split h1 + h2 and K_est.
#[derive(Debug, Clone, PartialEq)]
pub struct TauBundle {
    pub q: Float,
    pub tau: Float,
    pub h: Float,
    pub h1: Float,
    pub h2: Float,
    /// h2 summed from its own series, for the cross-check against h − h1.
    /// Direct series for h2, skipped when it would need too many terms.
    pub h2_series: Option<Float>,
    pub k_est: Float,
}

fn check_unit(q: &Float) -> Result<()> {
    if q.is_finite() && *q >= 0 && *q < 1 {
        Ok(())
    } else {
        Err(Error::Domain(format!("q = {} is not in [0, 1)", q.to_f64())))
    }
}

/// Rejects q so close to 1 that ψ is flatter than the working precision can
/// follow.
fn check_budget(q: &Float, ctx: &PrecisionContext) -> Result<()> {
    check_unit(q)?;
    let gap = Float::with_val(ctx.bits(), 1 - q);
    let limit = pow10(ctx.bits(), -((ctx.working_digits() / 4) as i32));
    if gap <= limit {
        return Err(Error::PrecisionBudget(format!(
            "q = {} is within 1e-{} of 1",
            q.to_f64(),
            ctx.working_digits() / 4
        )));
    }
    Ok(())
}

/// Guard bits for a sum of up to `terms` roundings.
fn guarded_bits(ctx: &PrecisionContext, terms: f64) -> u32 {
    ctx.bits() + terms.max(2.0).log2().ceil() as u32 + 8
}

/// Sum of an alternating series whose term magnitudes decrease; stops at the
/// first term below tolerance, which then bounds the tail.
fn sum_alternating<I>(magnitudes: I, bits: u32, ctx: &PrecisionContext) -> Result<SeriesResult>
where
    I: IntoIterator<Item = Float>,
{
    let mut sum = Float::with_val(bits, 0);
    let mut used = 0usize;
    for (n, term) in magnitudes.into_iter().enumerate() {
        if term <= *ctx.tail_tolerance() {
            return Ok(SeriesResult {
                value: sum,
                tail_bound: Float::with_val(bits, term),
                terms_used: used,
            });
        }
        if n % 2 == 0 {
            sum += &term;
        } else {
            sum -= &term;
        }
        used += 1;
        if used >= ctx.max_terms() {
            return Err(Error::NonConvergence { cap: ctx.max_terms() });
        }
    }
    Ok(SeriesResult {
        value: sum,
        tail_bound: Float::new(bits),
        terms_used: used,
    })
}

/// Rough count of terms before p^{e(n)} drops below the tolerance, with
/// e(n) growing at least like n.
/// Largest term count for which tau_bundle also sums h2 directly.
const SERIES_CHECK_TERMS: f64 = 1e5;

fn term_estimate(p: &Float, ctx: &PrecisionContext) -> f64 {
    let ln_p = -p.to_f64().ln();
    let digits = f64::from(ctx.working_digits()) * std::f64::consts::LN_10;
    if ln_p > 0.0 {
        (digits / ln_p).min(1e9)
    } else {
        1e9
    }
}

/// q^{j²} for j = 0, 1, 2, ...
fn square_powers(p: &Float, bits: u32) -> impl Iterator<Item = Float> {
    let p = Float::with_val(bits, p);
    let p2 = Float::with_val(bits, p.square_ref());
    let mut value = Float::with_val(bits, 1);
    let mut step = p;
    std::iter::from_fn(move || {
        let out = value.clone();
        value *= &step;
        step *= &p2;
        Some(out)
    })
}

/// ψ(q) by the alternating series or by the product ∏(1 − q^j)/(1 + q^j).
pub fn psi_eval(q: &Float, via: PsiRoute, ctx: &PrecisionContext) -> Result<PsiValue> {
    check_budget(q, ctx)?;
    let bits = guarded_bits(ctx, term_estimate(q, ctx));
    let (psi, tail_bound) = if q.is_zero() {
        (Float::with_val(bits, 1), Float::new(bits))
    } else {
        match via {
            PsiRoute::Series => psi_series(q, bits, ctx)?,
            PsiRoute::Product => psi_product(q, bits, ctx)?,
        }
    };
    Ok(PsiValue {
        q: q.clone(),
        psi,
        via,
        tail_bound,
    })
}

fn psi_series(q: &Float, bits: u32, ctx: &PrecisionContext) -> Result<(Float, Float)> {
    let doubled = square_powers(q, bits).skip(1).map(|t| t * 2u32);
    let tail = sum_alternating(doubled, bits, ctx)?;
    Ok((1 - tail.value, tail.tail_bound))
}

/// The omitted factors j > J change log ψ by at most
/// 2 Σ_{j>J} q^j/(1 − q^{2j}) ≤ 2q^{J+1}/((1 − q)(1 − q^{2J+2})).
fn psi_product(q: &Float, bits: u32, ctx: &PrecisionContext) -> Result<(Float, Float)> {
    let q = Float::with_val(bits, q);
    let one_minus_q = Float::with_val(bits, 1 - &q);
    let half_tol = Float::with_val(bits, ctx.tail_tolerance() / 2u32);
    let mut num = Float::with_val(bits, 1);
    let mut den = Float::with_val(bits, 1);
    let mut power = q.clone();
    let mut used = 0usize;
    loop {
        num *= Float::with_val(bits, 1 - &power);
        den *= Float::with_val(bits, 1 + &power);
        power *= &q;
        used += 1;
        let log_bound = Float::with_val(bits, &power * 2u32)
            / (Float::with_val(bits, &one_minus_q) * (1 - Float::with_val(bits, power.square_ref())));
        if log_bound <= half_tol {
            let psi = num / den;
            let tail = Float::with_val(bits, &psi * &log_bound) * 2u32;
            return Ok((psi, tail));
        }
        if used >= ctx.max_terms() {
            return Err(Error::NonConvergence { cap: ctx.max_terms() });
        }
    }
}

/// log ψ(q). Below q = 1/2 the artanh series is used, above it the Jacobi
/// imaginary transformation, which stays cheap all the way to the budget
/// limit.
pub fn log_psi(q: &Float, ctx: &PrecisionContext) -> Result<Float> {
    check_budget(q, ctx)?;
    if q.is_zero() {
        return Ok(ctx.float(0));
    }
    if *q < 0.5 {
        Ok(log_psi_series(q, ctx)?.value)
    } else {
        log_psi_modular(q, ctx)
    }
}

/// log ψ(q) = −2 Σ_{k≥0} q^{2k+1}/((2k+1)(1 − q^{2k+1})); term ratios are at
/// most q².
pub fn log_psi_series(q: &Float, ctx: &PrecisionContext) -> Result<SeriesResult> {
    check_budget(q, ctx)?;
    let bits = guarded_bits(ctx, term_estimate(q, ctx));
    let q = Float::with_val(bits, q);
    let q2 = Float::with_val(bits, q.square_ref());
    let mut power = q.clone();
    let mut k = 0u64;
    let terms = std::iter::from_fn(|| {
        let odd = 2 * k + 1;
        let denom = Float::with_val(bits, 1 - &power) * odd;
        let term = Float::with_val(bits, &power / &denom);
        power *= &q2;
        k += 1;
        Some(term)
    });
    let sum = sum_ratio_bounded_series(terms, &RatioBound::new(0, q2.clone()), &tail_ctx_half(ctx))?;
    Ok(SeriesResult {
        value: sum.value * -2i32,
        tail_bound: sum.tail_bound * 2u32,
        terms_used: sum.terms_used,
    })
}

/// The same context with half the tail tolerance, for sums that get doubled.
fn tail_ctx_half(ctx: &PrecisionContext) -> PrecisionContext {
    let half = Float::with_val(ctx.bits(), ctx.tail_tolerance() / 2u32);
    PrecisionContext::new(ctx.working_digits(), half.clone(), ctx.root_tolerance().clone().max(&half))
        .map(|c| c.with_max_terms(ctx.max_terms()))
        .unwrap_or_else(|_| ctx.clone())
}

/// With q = e^{−t}: ψ(q) = 2√(π/t) Σ_{n≥0} e^{−π²(n+1/2)²/t}, so
/// log ψ = log 2 + ½ log(π/t) − π²/(4t) + log Σ_{n≥0} r^{n(n+1)}, r = e^{−π²/t}.
pub fn log_psi_modular(q: &Float, ctx: &PrecisionContext) -> Result<Float> {
    check_budget(q, ctx)?;
    if *q < 0.5 {
        return Err(Error::Domain("modular form is used for q >= 1/2 only".into()));
    }
    let bits = ctx.bits() + 32;
    let t = -Float::with_val(bits, q.ln_ref());
    let pi = Float::with_val(bits, Constant::Pi);
    let pi2 = Float::with_val(bits, pi.square_ref());
    let r = Float::with_val(bits, -Float::with_val(bits, &pi2 / &t)).exp();
    let r2 = Float::with_val(bits, r.square_ref());
    let mut value = Float::with_val(bits, 1);
    let mut step = r2.clone();
    let terms = std::iter::from_fn(|| {
        let out = value.clone();
        value *= &step;
        step *= &r2;
        Some(out)
    });
    let theta2 = sum_ratio_bounded_series(terms, &RatioBound::new(0, r2.clone()), ctx)?;
    let ln2 = Float::with_val(bits, Constant::Log2);
    let half_log = Float::with_val(bits, Float::with_val(bits, &pi / &t).ln()) / 2u32;
    let main = Float::with_val(bits, &pi2 / &t) / 4u32;
    Ok(ln2 + half_log - main + theta2.value.ln())
}

/// χ_s(q) = Σ_{i≥0} (−1)^i q^{(i² + 4si)/2}, so that λ_s = q^{2s²} χ_s.
pub fn chi_s(q: &Float, s: usize, ctx: &PrecisionContext) -> Result<SeriesResult> {
    check_budget(q, ctx)?;
    if s == 0 {
        return Err(Error::Domain("s must be positive".into()));
    }
    let bits = guarded_bits(ctx, term_estimate(q, ctx));
    let p = Float::with_val(bits, q.sqrt_ref());
    let p2 = Float::with_val(bits, p.square_ref());
    let mut value = Float::with_val(bits, 1);
    let mut step = Float::with_val(bits, (&p).pow(4 * s as u32 + 1));
    let terms = std::iter::from_fn(|| {
        let out = value.clone();
        value *= &step;
        step *= &p2;
        Some(out)
    });
    sum_alternating(terms, bits, ctx)
}

/// λ_s(q) = Σ_{j≥2s} (−1)^j q^{j²/2}, summed directly.
pub fn lambda_s(q: &Float, s: usize, ctx: &PrecisionContext) -> Result<SeriesResult> {
    check_budget(q, ctx)?;
    if s == 0 {
        return Err(Error::Domain("s must be positive".into()));
    }
    let bits = guarded_bits(ctx, term_estimate(q, ctx));
    let p = Float::with_val(bits, q.sqrt_ref());
    let first = 2 * s as u32;
    let p2 = Float::with_val(bits, p.square_ref());
    let mut value = Float::with_val(bits, (&p).pow(first * first));
    let mut step = Float::with_val(bits, (&p).pow(2 * first + 1));
    let terms = std::iter::from_fn(|| {
        let out = value.clone();
        value *= &step;
        step *= &p2;
        Some(out)
    });
    sum_alternating(terms, bits, ctx)
}

/// λ_s through χ_s: q^{2s²} χ_s(q).
pub fn lambda_from_chi(q: &Float, s: usize, ctx: &PrecisionContext) -> Result<Float> {
    let chi = chi_s(q, s, ctx)?;
    let scale = Float::with_val(chi.value.prec(), q.pow(2 * (s as u32) * (s as u32)));
    Ok(scale * chi.value)
}

/// ζ_k(q) = q^{2k+1}(1 − q)/((2k+1)(1 − q^{2k+1})), with the limit 1/(2k+1)²
/// at q = 1.
pub fn zeta_k(q: &Float, k: u32, ctx: &PrecisionContext) -> Result<Float> {
    if !(q.is_finite() && *q >= 0 && *q <= 1) {
        return Err(Error::Domain(format!("q = {} is not in [0, 1]", q.to_f64())));
    }
    let bits = ctx.bits();
    let odd = 2 * k + 1;
    if *q == 1 {
        return Ok(Float::with_val(bits, 1) / (odd * odd));
    }
    if k == 0 {
        return Ok(Float::with_val(bits, q));
    }
    let q = Float::with_val(bits, q);
    let power = Float::with_val(bits, (&q).pow(odd));
    let numer = Float::with_val(bits, &power * Float::with_val(bits, 1 - &q));
    let denom = Float::with_val(bits, 1 - &power) * odd;
    Ok(numer / denom)
}

/// h(q) = 2Σ_{k≥0} q^{k+1}/(2k+1)² = √q (Li₂(√q) − Li₂(−√q)); h(1) = π²/4.
pub fn h(q: &Float, ctx: &PrecisionContext) -> Result<Float> {
    if !(q.is_finite() && *q >= 0 && *q <= 1) {
        return Err(Error::Domain(format!("q = {} is not in [0, 1]", q.to_f64())));
    }
    let bits = ctx.bits() + 16;
    let p = Float::with_val(bits, q.sqrt_ref());
    let plus = Float::with_val(bits, p.li2_ref());
    let minus = Float::with_val(bits, (-p.clone()).li2());
    Ok(Float::with_val(ctx.bits(), p * (plus - minus)))
}

/// The defining series of h, summed term by term.
pub fn h_series(q: &Float, ctx: &PrecisionContext) -> Result<SeriesResult> {
    check_budget(q, ctx)?;
    power_series(q, ctx, |k| {
        let odd = 2 * k + 1;
        [odd, odd, 1]
    })
}

/// Σ_{k≥0} 2q^{k+1}/d(k) for a denominator d(k), given as a product of
/// factors, growing with k; term ratios are at
/// most q.
fn power_series<D>(q: &Float, ctx: &PrecisionContext, denom: D) -> Result<SeriesResult>
where
    D: Fn(u64) -> [u64; 3],
{
    let bits = guarded_bits(ctx, term_estimate(q, ctx));
    let q = Float::with_val(bits, q);
    let mut power = q.clone();
    let mut k = 0u64;
    let terms = std::iter::from_fn(|| {
        let mut term = power.clone();
        for factor in denom(k) {
            term /= factor;
        }
        power *= &q;
        k += 1;
        Some(term)
    });
    let sum = sum_ratio_bounded_series(terms, &RatioBound::new(0, q.clone()), &tail_ctx_half(ctx))?;
    Ok(SeriesResult {
        value: sum.value * 2u32,
        tail_bound: sum.tail_bound * 2u32,
        terms_used: sum.terms_used,
    })
}

/// h1(q) = 2Σ q^{k+1}/((2k+1)(2k+2))
///       = (1 + √q) log(1 + √q) + (1 − √q) log(1 − √q).
pub fn h1(q: &Float, ctx: &PrecisionContext) -> Result<Float> {
    if !(q.is_finite() && *q >= 0 && *q <= 1) {
        return Err(Error::Domain(format!("q = {} is not in [0, 1]", q.to_f64())));
    }
    let bits = ctx.bits() + 16;
    let p = Float::with_val(bits, q.sqrt_ref());
    let plus = Float::with_val(bits, 1 + &p);
    let minus = Float::with_val(bits, 1 - &p);
    let left = Float::with_val(bits, plus.ln_ref()) * &plus;
    let right = if minus.is_zero() {
        Float::new(bits)
    } else {
        Float::with_val(bits, minus.ln_ref()) * &minus
    };
    Ok(Float::with_val(ctx.bits(), left + right))
}

/// h2(q) = 2Σ q^{k+1}/((2k+1)²(2k+2)).
pub fn h2_series(q: &Float, ctx: &PrecisionContext) -> Result<SeriesResult> {
    check_budget(q, ctx)?;
    power_series(q, ctx, |k| {
        let odd = 2 * k + 1;
        [odd, odd, odd + 1]
    })
}

/// τ(q) = (q − 1) log ψ(q).
pub fn tau(q: &Float, ctx: &PrecisionContext) -> Result<Float> {
    let log = log_psi(q, ctx)?;
    Ok(Float::with_val(ctx.bits(), q - 1u32) * log)
}

/// K_est(q) = (π²/4 + ½(1 − q) log(1 − q) − τ(q))/(1 − q).
pub fn k_estimate(q: &Float, tau: &Float, ctx: &PrecisionContext) -> Result<Float> {
    check_unit(q)?;
    let bits = ctx.bits();
    let gap = Float::with_val(bits, 1 - q);
    let pi = Float::with_val(bits, Constant::Pi);
    let quarter_pi2 = Float::with_val(bits, pi.square_ref()) / 4u32;
    let log_term = Float::with_val(bits, gap.ln_ref()) * &gap / 2u32;
    Ok((quarter_pi2 + log_term - tau) / gap)
}

/// All τ-related quantities at one q.
pub fn tau_bundle(q: &Float, ctx: &PrecisionContext) -> Result<TauBundle> {
    check_budget(q, ctx)?;
    let tau = tau(q, ctx)?;
    let h_value = h(q, ctx)?;
    let h1_value = h1(q, ctx)?;
    let h2 = Float::with_val(ctx.bits(), &h_value - &h1_value);
    let h2_series = if term_estimate(q, ctx) <= SERIES_CHECK_TERMS {
        Some(h2_series(q, ctx)?.value)
    } else {
        None
    };
    let k_est = k_estimate(q, &tau, ctx)?;
    Ok(TauBundle {
        q: q.clone(),
        tau,
        h: h_value,
        h1: h1_value,
        h2,
        h2_series,
        k_est,
    })
}

/// S_l(q) = 1 + q + ... + q^l.
pub fn partial_geometric(q: &Float, l: u32, bits: u32) -> Float {
    let mut sum = Float::with_val(bits, 0);
    let mut power = Float::with_val(bits, 1);
    for _ in 0..=l {
        sum += &power;
        power *= q;
    }
    sum
}

/// The smallest margins of (l − 2ν + 1) S_l − (l + 1) q^ν S_{l−2ν} over
/// 1 ≤ ν ≤ l/2 for each l in `ls`, divided by (l + 1) S_l. Returns
/// (l, ν, margin) of the worst case.
pub fn s_l_worst_margin(q: &Float, ls: std::ops::RangeInclusive<u32>, bits: u32) -> Option<(u32, u32, Float)> {
    let mut worst: Option<(u32, u32, Float)> = None;
    for l in ls {
        let s_l = partial_geometric(q, l, bits);
        for nu in 1..=l / 2 {
            let lhs = Float::with_val(bits, &s_l * (l - 2 * nu + 1));
            let rhs = partial_geometric(q, l - 2 * nu, bits) * Float::with_val(bits, q.pow(nu)) * (l + 1);
            let margin = (lhs - rhs) / Float::with_val(bits, &s_l * (l + 1));
            let replace = match &worst {
                None => true,
                Some((_, _, m)) => margin.partial_cmp(m) == Some(Ordering::Less),
            };
            if replace {
                worst = Some((l, nu, margin));
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    fn f(ctx: &PrecisionContext, v: f64) -> Float {
        ctx.float(v)
    }

    fn close(a: &Float, b: &Float, tol: f64) -> bool {
        Float::with_val(a.prec().max(b.prec()), a - b).abs() <= tol
    }

    #[test]
    fn psi_at_zero_is_one() {
        let c = ctx();
        for via in [PsiRoute::Series, PsiRoute::Product] {
            let v = psi_eval(&f(&c, 0.0), via, &c).unwrap();
            assert_eq!(v.psi, 1);
        }
    }

    #[test]
    fn psi_at_one_half_matches_partial_sum() {
        let c = ctx();
        let q = c.parse("0.5").unwrap();
        let mut oracle = Float::with_val(c.bits(), 1);
        for j in 1..=8u32 {
            let term = Float::with_val(c.bits(), (&q).pow(j * j)) * 2u32;
            if j % 2 == 1 {
                oracle -= term;
            } else {
                oracle += term;
            }
        }
        for via in [PsiRoute::Series, PsiRoute::Product] {
            let v = psi_eval(&q, via, &c).unwrap();
            // the ninth term, 2·2^{-81}, bounds the oracle's own error
            assert!(close(&v.psi, &oracle, 1e-24), "{via:?}");
            assert!((v.psi.to_f64() - 0.121_124_208_002_580_5).abs() < 1e-15);
        }
    }

    #[test]
    fn series_and_product_agree() {
        let c = ctx();
        let tol = c.tail_tolerance().to_f64() * 10.0;
        for i in 1..40 {
            let q = f(&c, i as f64 / 40.0);
            let s = psi_eval(&q, PsiRoute::Series, &c).unwrap();
            let p = psi_eval(&q, PsiRoute::Product, &c).unwrap();
            assert!(close(&s.psi, &p.psi, tol), "q = {}", q.to_f64());
        }
    }

    #[test]
    fn psi_above_lower_bound_near_one() {
        let c = ctx();
        let q = c.parse("0.99").unwrap();
        let v = psi_eval(&q, PsiRoute::Product, &c).unwrap();
        let pi = Float::with_val(c.bits(), Constant::Pi);
        let bound = (Float::with_val(c.bits(), pi.square_ref()) / (Float::with_val(c.bits(), &q - 1u32) * 4u32)).exp();
        assert!(bound < v.psi);
        assert!(v.psi > 0);
    }

    #[test]
    fn budget_rejects_flat_region() {
        let c = ctx();
        let q = Float::with_val(c.bits(), 1 - pow10(c.bits(), -16));
        assert!(matches!(psi_eval(&q, PsiRoute::Series, &c), Err(Error::PrecisionBudget(_))));
        assert!(matches!(log_psi(&q, &c), Err(Error::PrecisionBudget(_))));
    }

    #[test]
    fn log_routes_agree() {
        let c = ctx();
        for q in [0.5, 0.6, 0.8, 0.9, 0.97, 0.99] {
            let q = f(&c, q);
            let series = log_psi_series(&q, &c).unwrap();
            let modular = log_psi_modular(&q, &c).unwrap();
            assert!(close(&series.value, &modular, 1e-38), "q = {}", q.to_f64());
            let direct = psi_eval(&q, PsiRoute::Series, &c).unwrap().psi;
            assert!(close(&direct, &modular.exp(), 1e-39), "q = {}", q.to_f64());
        }
    }

    #[test]
    fn chi_and_lambda_limits_and_consistency() {
        let c = ctx();
        let zero = f(&c, 0.0);
        assert_eq!(lambda_s(&zero, 2, &c).unwrap().value, 0);
        assert_eq!(chi_s(&zero, 2, &c).unwrap().value, 1);
        for (q, s) in [(0.3, 1), (0.9, 2), (0.95, 3), (0.999, 5)] {
            let q = f(&c, q);
            let direct = lambda_s(&q, s, &c).unwrap().value;
            let via_chi = lambda_from_chi(&q, s, &c).unwrap();
            assert!(close(&direct, &via_chi, 1e-39));
        }
        let chi = chi_s(&f(&c, 0.9), 2, &c).unwrap().value;
        assert!(chi >= 0.5 && chi <= 1);
        let q = f(&c, 0.95);
        assert!(lambda_s(&q, 3, &c).unwrap().value <= lambda_s(&q, 2, &c).unwrap().value);
    }

    #[test]
    fn zeta_special_values_and_bounds() {
        let c = ctx();
        let q = f(&c, 0.37);
        assert_eq!(zeta_k(&q, 0, &c).unwrap(), q);
        let q = c.parse("0.9").unwrap();
        let z = zeta_k(&q, 3, &c).unwrap();
        let lo = Float::with_val(c.bits(), (&q).pow(7u32)) / 49u32;
        let hi = Float::with_val(c.bits(), (&q).pow(4u32)) / 49u32;
        assert!(lo <= z && z <= hi);
        assert_eq!(zeta_k(&f(&c, 1.0), 2, &c).unwrap(), Float::with_val(c.bits(), 1) / 25u32);
    }

    #[test]
    fn tau_equals_twice_zeta_sum() {
        let c = ctx();
        let q = c.parse("0.5").unwrap();
        let mut sum = Float::with_val(c.bits(), 0);
        for k in 0..=200 {
            sum += zeta_k(&q, k, &c).unwrap();
        }
        let t = tau(&q, &c).unwrap();
        assert!(close(&t, &(sum * 2u32), c.tail_tolerance().to_f64()));
    }

    #[test]
    fn h_closed_form_matches_series_and_split() {
        let c = ctx();
        for q in [0.1, 0.5, 0.9, 0.99] {
            let q = f(&c, q);
            let closed = h(&q, &c).unwrap();
            let series = h_series(&q, &c).unwrap();
            assert!(close(&closed, &series.value, 1e-39));
            let h1_series = power_series(&q, &c, |k| [2 * k + 1, 2 * k + 2, 1]).unwrap();
            assert!(close(&h1(&q, &c).unwrap(), &h1_series.value, 1e-39));
            let b = tau_bundle(&q, &c).unwrap();
            assert!(close(&b.h2, b.h2_series.as_ref().unwrap(), 1e-39));
        }
        let pi = Float::with_val(c.bits(), Constant::Pi);
        let quarter = Float::with_val(c.bits(), pi.square_ref()) / 4u32;
        assert!(close(&h(&f(&c, 1.0), &c).unwrap(), &quarter, 1e-50));
        assert!((quarter.to_f64() - 2.467401100).abs() < 1e-9);
        assert_eq!(h(&f(&c, 0.0), &c).unwrap(), 0);
    }

    #[test]
    fn k_estimate_near_one_is_in_band() {
        let c = ctx();
        let d = crate::numerics::MathConstants::new(&c).d.to_f64();
        let q = Float::with_val(c.bits(), 1 - pow10(c.bits(), -4));
        let b = tau_bundle(&q, &c).unwrap();
        let k = b.k_est.to_f64();
        assert!(k >= d - 0.01 && k <= d + 1.0 / 12.0 + 0.01, "K_est = {k}");
    }

    #[test]
    fn s_l_inequalities_hold() {
        let c = ctx();
        for q in [0.1, 0.5, 0.9, 0.999] {
            let (_, _, m) = s_l_worst_margin(&f(&c, q), 2..=40, c.bits()).unwrap();
            assert!(m >= 0);
        }
    }
}
