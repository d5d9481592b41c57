//! Working precision, fundamental constants, and the two engines every other
//! module is built on: certified summation of ratio-bounded series and
//! bracketed root finding.
//!
//! All reals are [`rug::Float`]. A [`PrecisionContext`] fixes the working
//! precision and the two tolerances; callers that need guard digits (the theta
//! series near its cancellation peak, for instance) raise the precision of
//! their terms and the engines follow the precision of what they are given.

use std::cmp::Ordering;

use rug::float::Constant;
use rug::ops::{NegAssign, Pow};
use rug::{Assign, Float};

use crate::error::{Error, Result};

/// Hard cap on the number of terms of a single series evaluation.
pub const MAX_SERIES_TERMS: usize = 10_000_000;

/// Largest number of decimal digits any evaluation may raise its precision to.
pub const MAX_ELEVATED_DIGITS: f64 = 60_000.0;

const LOG2_10: f64 = std::f64::consts::LOG2_10;

/// Working precision and tolerance policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionContext {
    working_digits: u32,
    tail_tolerance: Float,
    root_tolerance: Float,
    max_terms: usize,
}

impl PrecisionContext {
    pub const DEFAULT_DIGITS: u32 = 60;
    pub const MIN_DIGITS: u32 = 30;

    /// Context with explicit tolerances.
    pub fn new(working_digits: u32, tail_tolerance: Float, root_tolerance: Float) -> Result<Self> {
        if working_digits < Self::MIN_DIGITS {
            return Err(Error::InvalidContext(format!(
                "working_digits = {working_digits} < {}",
                Self::MIN_DIGITS
            )));
        }
        let bits = digits_to_bits(working_digits);
        let tail_tolerance = Float::with_val(bits, tail_tolerance);
        let root_tolerance = Float::with_val(bits, root_tolerance);
        if tail_tolerance.cmp0() != Some(Ordering::Greater) {
            return Err(Error::InvalidContext("tail_tolerance must be positive".into()));
        }
        let noise = pow10(bits, 5 - working_digits as i32);
        if tail_tolerance < noise {
            return Err(Error::InvalidContext(format!(
                "tail_tolerance {} is below representable noise 1e{}",
                tail_tolerance.to_f64(),
                5 - working_digits as i32
            )));
        }
        if root_tolerance < tail_tolerance {
            return Err(Error::InvalidContext(
                "root_tolerance must not be smaller than tail_tolerance".into(),
            ));
        }
        Ok(Self {
            working_digits,
            tail_tolerance,
            root_tolerance,
            max_terms: MAX_SERIES_TERMS,
        })
    }

    /// Context whose tolerances scale with the digit count:
    /// tail = 10^-(2d/3), root = 10^-(d/2). At 60 digits this gives the
    /// defaults 1e-40 and 1e-30.
    pub fn with_digits(working_digits: u32) -> Result<Self> {
        let bits = digits_to_bits(working_digits.max(1));
        let tail = pow10(bits, -((2 * working_digits / 3) as i32));
        let root = pow10(bits, -((working_digits / 2) as i32));
        Self::new(working_digits, tail, root)
    }

    /// Replaces the per-evaluation term cap.
    pub fn with_max_terms(mut self, max_terms: usize) -> Self {
        self.max_terms = max_terms.max(1);
        self
    }

    /// Same tolerances, `extra` more digits of working precision.
    pub fn with_guard_digits(&self, extra: u32) -> Self {
        let mut raised = self.clone();
        raised.working_digits += extra;
        raised
    }

    /// The same context with a different series tail tolerance.
    pub fn with_tail_tolerance(&self, tail_tolerance: Float) -> Self {
        let mut tightened = self.clone();
        tightened.tail_tolerance = tail_tolerance;
        tightened
    }

    pub fn working_digits(&self) -> u32 {
        self.working_digits
    }

    pub fn tail_tolerance(&self) -> &Float {
        &self.tail_tolerance
    }

    pub fn root_tolerance(&self) -> &Float {
        &self.root_tolerance
    }

    pub fn max_terms(&self) -> usize {
        self.max_terms
    }

    /// Mantissa bits of the working precision (with a small guard).
    pub fn bits(&self) -> u32 {
        digits_to_bits(self.working_digits)
    }

    /// Bits for a computation that needs `extra_digits` beyond working
    /// precision to absorb cancellation.
    pub fn elevated_bits(&self, extra_digits: f64) -> Result<u32> {
        let extra = extra_digits.max(0.0);
        if !extra.is_finite() || extra > MAX_ELEVATED_DIGITS {
            return Err(Error::PrecisionBudget(format!(
                "evaluation needs {extra:.0} guard digits (limit {MAX_ELEVATED_DIGITS})"
            )));
        }
        Ok(self.bits() + (extra * LOG2_10).ceil() as u32)
    }

    /// A float at working precision.
    pub fn float<T>(&self, value: T) -> Float
    where
        Float: Assign<T>,
    {
        Float::with_val(self.bits(), value)
    }

    /// Parses a decimal literal at working precision.
    pub fn parse(&self, text: &str) -> Result<Float> {
        let parsed = Float::parse(text.trim())
            .map_err(|e| Error::Domain(format!("cannot parse `{text}` as a real: {e}")))?;
        Ok(Float::with_val(self.bits(), parsed))
    }

    /// `10 * tail_tolerance`, the residual bound used by the root records.
    pub fn residual_bound(&self) -> Float {
        Float::with_val(self.bits(), &self.tail_tolerance * 10u32)
    }
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self::with_digits(Self::DEFAULT_DIGITS).expect("default context is valid")
    }
}

pub fn digits_to_bits(digits: u32) -> u32 {
    (digits as f64 * LOG2_10).ceil() as u32 + 16
}

/// `10^exp` at `bits` precision.
pub fn pow10(bits: u32, exp: i32) -> Float {
    let ten = Float::with_val(bits, 10);
    ten.pow(exp)
}

/// Constants that appear throughout: π, e^π and D = 1/2 + log 2 + π²/8.
#[derive(Debug, Clone)]
pub struct MathConstants {
    pub pi: Float,
    pub e_pi: Float,
    pub d: Float,
}

impl MathConstants {
    pub fn new(ctx: &PrecisionContext) -> Self {
        let bits = ctx.bits();
        let pi = Float::with_val(bits, Constant::Pi);
        let e_pi = Float::with_val(bits, pi.exp_ref());
        let ln2 = Float::with_val(bits, Constant::Log2);
        let pi2_8 = Float::with_val(bits, pi.square_ref()) / 8u32;
        let d = Float::with_val(bits, 0.5) + ln2 + pi2_8;
        Self { pi, e_pi, d }
    }
}

/// A summed series and its certified truncation bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesResult {
    pub value: Float,
    /// Upper bound on the absolute value of the omitted tail.
    pub tail_bound: Float,
    pub terms_used: usize,
}

/// Proof obligation supplied by the caller: for every index `n >= from_index`
/// the term ratio satisfies `|t_{n+1} / t_n| <= ratio`.
#[derive(Debug, Clone)]
pub struct RatioBound {
    pub from_index: usize,
    pub ratio: Float,
}

impl RatioBound {
    /// The standard rule: ratios at most 1/2 from `from_index` on, so the
    /// tail starting at term `n` is bounded by `2 |t_n|`.
    pub fn half(from_index: usize) -> Self {
        Self {
            from_index,
            ratio: Float::with_val(8, 0.5),
        }
    }

    pub fn new(from_index: usize, ratio: Float) -> Self {
        Self { from_index, ratio }
    }

    /// Multiplier turning the first omitted term into a tail bound.
    fn tail_factor(&self, bits: u32) -> Result<Float> {
        if !(self.ratio >= 0 && self.ratio < 1) {
            return Err(Error::Domain(format!(
                "ratio bound {} is not in [0, 1)",
                self.ratio.to_f64()
            )));
        }
        let one_minus = Float::with_val(bits, 1 - &self.ratio);
        Ok(Float::with_val(bits, one_minus.recip_ref()))
    }
}

/// Incremental form of [`sum_ratio_bounded_series`]; lets one loop feed several
/// related series (a function and its derivatives) that share term work.
#[derive(Debug)]
pub struct RatioBoundedSum {
    from_index: usize,
    tail_factor: Float,
    tolerance: Float,
    sum: Float,
    used: usize,
    cap: usize,
    tail: Option<Float>,
}

impl RatioBoundedSum {
    pub fn new(bound: &RatioBound, bits: u32, ctx: &PrecisionContext) -> Result<Self> {
        Ok(Self {
            from_index: bound.from_index,
            tail_factor: bound.tail_factor(bits)?,
            tolerance: Float::with_val(bits, ctx.tail_tolerance()),
            sum: Float::with_val(bits, 0),
            used: 0,
            cap: ctx.max_terms(),
            tail: None,
        })
    }

    /// Offers the next term (index = number of terms accepted so far).
    /// Returns `true` once the geometric tail bound starting at this term is
    /// within tolerance; the term is then not added.
    pub fn push(&mut self, term: &Float) -> Result<bool> {
        if self.tail.is_some() {
            return Ok(true);
        }
        if self.used >= self.from_index {
            let bound = Float::with_val(self.sum.prec(), term.abs_ref()) * &self.tail_factor;
            if bound <= self.tolerance {
                self.tail = Some(bound);
                return Ok(true);
            }
        }
        self.sum += term;
        self.used += 1;
        if self.used >= self.cap {
            return Err(Error::NonConvergence { cap: self.cap });
        }
        Ok(false)
    }

    pub fn is_done(&self) -> bool {
        self.tail.is_some()
    }

    pub fn terms_used(&self) -> usize {
        self.used
    }

    /// Closes the sum. A finite sequence that ran out before the tolerance
    /// test fired has an exact (zero) tail.
    pub fn finish(self) -> SeriesResult {
        let prec = self.sum.prec();
        SeriesResult {
            value: self.sum,
            tail_bound: self.tail.unwrap_or_else(|| Float::with_val(prec, 0)),
            terms_used: self.used,
        }
    }
}

/// Sums `terms` until the certified geometric tail bound falls below the
/// context's tail tolerance. The summation precision is the larger of the
/// working precision and the precision of the first term.
pub fn sum_ratio_bounded_series<I>(terms: I, bound: &RatioBound, ctx: &PrecisionContext) -> Result<SeriesResult>
where
    I: IntoIterator<Item = Float>,
{
    let mut terms = terms.into_iter().peekable();
    let bits = terms
        .peek()
        .map_or(ctx.bits(), |t| t.prec().max(ctx.bits()));
    let mut acc = RatioBoundedSum::new(bound, bits, ctx)?;
    for term in terms {
        if acc.push(&term)? {
            break;
        }
    }
    Ok(acc.finish())
}

fn sign_of(x: &Float) -> Ordering {
    x.cmp0().unwrap_or(Ordering::Equal)
}

fn same_sign_error(lo: &Float, hi: &Float, f_lo: &Float, f_hi: &Float) -> Error {
    Error::SameSign {
        lo: lo.to_f64(),
        hi: hi.to_f64(),
        f_lo: f_lo.to_f64(),
        f_hi: f_hi.to_f64(),
    }
}

const MAX_ROOT_ITERATIONS: usize = 20_000;

/// Brent–Dekker root search on `[lo, hi]`. Iterates stay inside the bracket;
/// the search stops once the enclosing bracket is narrower than
/// `root_tolerance`, then up to four secant steps confined to that final
/// bracket polish the residual.
pub fn bracket_root<F>(mut f: F, lo: &Float, hi: &Float, ctx: &PrecisionContext) -> Result<Float>
where
    F: FnMut(&Float) -> Result<Float>,
{
    if lo >= hi {
        return Err(Error::Domain(format!(
            "bracket [{}, {}] is empty",
            lo.to_f64(),
            hi.to_f64()
        )));
    }
    let bits = ctx.bits().max(lo.prec()).max(hi.prec());
    let mut a = Float::with_val(bits, lo);
    let mut b = Float::with_val(bits, hi);
    let mut fa = f(&a)?;
    let mut fb = f(&b)?;
    if fa.is_zero() {
        return Ok(a);
    }
    if fb.is_zero() {
        return Ok(b);
    }
    if sign_of(&fa) == sign_of(&fb) {
        return Err(same_sign_error(&a, &b, &fa, &fb));
    }

    let eps = Float::with_val(bits, Float::i_exp(1, 1 - bits as i32));
    let half_tol = Float::with_val(bits, ctx.root_tolerance() / 2u32);
    let mut c = a.clone();
    let mut fc = fa.clone();
    let mut d = Float::with_val(bits, &b - &a);
    let mut e = d.clone();

    for _ in 0..MAX_ROOT_ITERATIONS {
        if sign_of(&fb) == sign_of(&fc) {
            c.assign(&a);
            fc.assign(&fa);
            d.assign(&b - &a);
            e.assign(&d);
        }
        if fc.cmp_abs(&fb) == Some(Ordering::Less) {
            a.assign(&b);
            b.assign(&c);
            c.assign(&a);
            fa.assign(&fb);
            fb.assign(&fc);
            fc.assign(&fa);
        }
        let tol1 = Float::with_val(bits, b.abs_ref()) * &eps * 2u32 + &half_tol;
        let xm = Float::with_val(bits, &c - &b) / 2u32;
        if xm.cmp_abs(&tol1) != Some(Ordering::Greater) || fb.is_zero() {
            return Ok(secant_polish(&mut f, b, fb, c, fc, 4));
        }
        if e.cmp_abs(&tol1) != Some(Ordering::Less) && fa.cmp_abs(&fb) == Some(Ordering::Greater) {
            let s = Float::with_val(bits, &fb / &fa);
            let (mut p, mut q);
            if a == c {
                p = Float::with_val(bits, &xm * &s) * 2u32;
                q = Float::with_val(bits, 1 - &s);
            } else {
                let qq = Float::with_val(bits, &fa / &fc);
                let r = Float::with_val(bits, &fb / &fc);
                let t1 = Float::with_val(bits, &xm * &qq) * 2u32 * Float::with_val(bits, &qq - &r);
                let t2 = Float::with_val(bits, &b - &a) * Float::with_val(bits, &r - 1u32);
                p = s.clone() * (t1 - t2);
                q = Float::with_val(bits, &qq - 1u32)
                    * Float::with_val(bits, &r - 1u32)
                    * Float::with_val(bits, &s - 1u32);
            }
            if p > 0 {
                q.neg_assign();
            }
            p.abs_mut();
            let min1 = Float::with_val(bits, &xm * &q) * 3u32 - Float::with_val(bits, &tol1 * &q).abs();
            let min2 = Float::with_val(bits, &e * &q).abs();
            let min = if min1 < min2 { min1 } else { min2 };
            if Float::with_val(bits, &p * 2u32) < min {
                e.assign(&d);
                d.assign(&p / &q);
            } else {
                d.assign(&xm);
                e.assign(&d);
            }
        } else {
            d.assign(&xm);
            e.assign(&d);
        }
        a.assign(&b);
        fa.assign(&fb);
        if d.cmp_abs(&tol1) == Some(Ordering::Greater) {
            b += &d;
        } else if xm > 0 {
            b += &tol1;
        } else {
            b -= &tol1;
        }
        fb = f(&b)?;
    }
    Err(Error::NonConvergence {
        cap: MAX_ROOT_ITERATIONS,
    })
}

/// Secant steps between a bracketing pair; a step is only taken if it lands
/// strictly inside the bracket and lowers |f|. Evaluation errors stop the
/// polish and keep the best point found so far.
fn secant_polish<F>(f: &mut F, mut b: Float, mut fb: Float, mut c: Float, mut fc: Float, steps: usize) -> Float
where
    F: FnMut(&Float) -> Result<Float>,
{
    let bits = b.prec();
    for _ in 0..steps {
        if fb.is_zero() || fb == fc || sign_of(&fb) == sign_of(&fc) {
            break;
        }
        let slope_inv = Float::with_val(bits, &b - &c) / Float::with_val(bits, &fb - &fc);
        let x = Float::with_val(bits, &b - Float::with_val(bits, &fb * &slope_inv));
        let (left, right) = if b < c { (&b, &c) } else { (&c, &b) };
        if !(&x > left && &x < right) {
            break;
        }
        let Ok(fx) = f(&x) else { break };
        if fx.cmp_abs(&fb) != Some(Ordering::Less) {
            break;
        }
        if sign_of(&fx) != sign_of(&fb) {
            c = b;
            fc = fb;
        }
        b = x;
        fb = fx;
    }
    b
}

/// Plain bisection down to a bracket narrower than `root_tolerance`; returns
/// the final bracket `(lo, hi)`, which still straddles the sign change.
pub fn bisect_bracket<F>(mut f: F, lo: &Float, hi: &Float, ctx: &PrecisionContext) -> Result<(Float, Float)>
where
    F: FnMut(&Float) -> Result<Float>,
{
    let bits = ctx.bits().max(lo.prec()).max(hi.prec());
    let mut a = Float::with_val(bits, lo);
    let mut b = Float::with_val(bits, hi);
    let fa = f(&a)?;
    let fb = f(&b)?;
    if fa.is_zero() {
        return Ok((a.clone(), a));
    }
    if fb.is_zero() {
        return Ok((b.clone(), b));
    }
    if sign_of(&fa) == sign_of(&fb) {
        return Err(same_sign_error(&a, &b, &fa, &fb));
    }
    let sign_a = sign_of(&fa);
    for _ in 0..MAX_ROOT_ITERATIONS {
        let width = Float::with_val(bits, &b - &a);
        if width <= *ctx.root_tolerance() {
            return Ok((a, b));
        }
        let mid = Float::with_val(bits, &a + &b) / 2u32;
        if mid <= a || mid >= b {
            // Bracket is down to adjacent representable numbers.
            return Ok((a, b));
        }
        let fm = f(&mid)?;
        match sign_of(&fm) {
            Ordering::Equal => return Ok((mid.clone(), mid)),
            s if s == sign_a => a = mid,
            _ => b = mid,
        }
    }
    Err(Error::NonConvergence {
        cap: MAX_ROOT_ITERATIONS,
    })
}

/// Safeguarded Newton iteration for a root of `f` on `[lo, hi]` given
/// `fdf(x) = (f(x), f'(x))`. Falls back to bisection whenever the Newton step
/// would leave the bracket or converge too slowly; finishes with one Newton
/// polish step once the step size drops below `root_tolerance`.
pub fn newton_bracketed<F>(
    mut fdf: F,
    lo: &Float,
    hi: &Float,
    guess: Option<&Float>,
    ctx: &PrecisionContext,
) -> Result<Float>
where
    F: FnMut(&Float) -> Result<(Float, Float)>,
{
    let bits = ctx.bits().max(lo.prec()).max(hi.prec());
    let (f_lo, _) = fdf(lo)?;
    let (f_hi, _) = fdf(hi)?;
    if f_lo.is_zero() {
        return Ok(Float::with_val(bits, lo));
    }
    if f_hi.is_zero() {
        return Ok(Float::with_val(bits, hi));
    }
    if sign_of(&f_lo) == sign_of(&f_hi) {
        return Err(same_sign_error(lo, hi, &f_lo, &f_hi));
    }
    // Orient so that f(neg) < 0 < f(pos).
    let (mut neg, mut pos) = if f_lo < 0 {
        (Float::with_val(bits, lo), Float::with_val(bits, hi))
    } else {
        (Float::with_val(bits, hi), Float::with_val(bits, lo))
    };
    let mut x = match guess {
        Some(g) if (g > lo && g < hi) => Float::with_val(bits, g),
        _ => Float::with_val(bits, lo + hi) / 2u32,
    };
    let mut dx_old = Float::with_val(bits, hi - lo).abs();
    let mut dx = dx_old.clone();
    let (mut fx, mut dfx) = fdf(&x)?;
    let tol = ctx.root_tolerance();

    for _ in 0..MAX_ROOT_ITERATIONS {
        let t1 = Float::with_val(bits, &x - &pos) * &dfx - &fx;
        let t2 = Float::with_val(bits, &x - &neg) * &dfx - &fx;
        let out_of_range = sign_of(&t1) == sign_of(&t2) && !t1.is_zero();
        let too_slow = Float::with_val(bits, &fx * 2u32).cmp_abs(&Float::with_val(bits, &dx_old * &dfx))
            == Some(Ordering::Greater);
        if dfx.is_zero() || out_of_range || too_slow {
            dx_old.assign(&dx);
            dx.assign(Float::with_val(bits, &pos - &neg) / 2u32);
            x.assign(&neg + &dx);
        } else {
            dx_old.assign(&dx);
            dx.assign(&fx / &dfx);
            x -= &dx;
        }
        let converged = dx.cmp_abs(tol) == Some(Ordering::Less);
        let (f_new, df_new) = fdf(&x)?;
        fx = f_new;
        dfx = df_new;
        if converged {
            // One more Newton step, kept only if it stays in the bracket.
            if !dfx.is_zero() {
                let step = Float::with_val(bits, &fx / &dfx);
                let polished = Float::with_val(bits, &x - &step);
                let (left, right) = if neg < pos { (&neg, &pos) } else { (&pos, &neg) };
                if &polished >= left && &polished <= right {
                    return Ok(polished);
                }
            }
            return Ok(x);
        }
        if fx.is_zero() {
            return Ok(x);
        }
        if fx < 0 {
            neg.assign(&x);
        } else {
            pos.assign(&x);
        }
    }
    Err(Error::NonConvergence {
        cap: MAX_ROOT_ITERATIONS,
    })
}

/// Intervals `(grid[i], grid[i+1])` across which `f` changes sign. Zero values
/// count as a sign of their own, so an exact grid hit shows up as a crossing
/// on each side; callers scan with grids that avoid known roots.
pub fn sign_changes<F>(grid: &[f64], mut f: F) -> Vec<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &x in grid {
        let fx = f(x);
        if let Some((xp, fp)) = prev {
            if fp.is_finite() && fx.is_finite() && (fp > 0.0) != (fx > 0.0) {
                out.push((xp, x));
            }
        }
        prev = Some((x, fx));
    }
    out
}
