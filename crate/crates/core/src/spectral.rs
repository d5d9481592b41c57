//! Spectral values q̃_j (where the rightmost real zeros of θ(q, ·) coalesce
//! into the double zero y_j), the companion roots r̃_s of θ(q, u_s(q)) = 0,
//! and reports on their ordering and on the properties of the double zeros.

use std::cell::RefCell;
use std::f64::consts::{LN_10, PI};

use rayon::prelude::*;
use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{bracket_root, sign_changes, PrecisionContext};
use crate::psi::{chi_s, lambda_s, log_psi, psi_eval, PsiRoute};
use crate::theta::{
    bracket_minimum, locate_critical_point, maximum_bracket, neg_half_power, theta_jet, theta_value, u_marker,
    v_marker, CriticalKind, ThetaQuery,
};

/// Step of the coarse q-scans that bracket r̃_s.
pub const SCAN_STEP: f64 = 1e-3;

/// Offset used by the sign-flip check around q̃_j.
pub const FLIP_OFFSET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RTildeRecord {
    pub s: usize,
    pub r_tilde: Float,
    /// z_s = −r̃_s^{−2s+1/2}, the marker u_s at q = r̃_s.
    pub z: Float,
    pub u_s: Float,
    pub v_s: Float,
    /// |ψ(√r̃_s) − λ_s(r̃_s)|.
    pub residual: Float,
    /// |θ(r̃_s, z_s)|.
    pub theta_residual: Float,
    /// The coarse scan saw more than one crossing; the largest was kept.
    pub ambiguous: bool,
    pub candidates: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralRecord {
    pub j: usize,
    pub q_tilde: Float,
    pub y: Float,
    /// The minimum t_j of θ(q̃_j, ·); equals y at the solution.
    pub t_j: Float,
    pub theta_residual: Float,
    pub dtheta_residual: Float,
    pub second_derivative: Float,
    pub bracket: (Float, Float),
}

fn check_index(index: usize) -> Result<()> {
    if index == 0 {
        Err(Error::Domain("indices start at 1".into()))
    } else {
        Ok(())
    }
}

/// log ψ(p) in double precision, for coarse scans.
fn log_psi_f64(p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p < 0.5 {
        let mut sum = 0.0;
        let mut power = p;
        let p2 = p * p;
        let mut k = 0.0;
        while power > 1e-18 {
            sum += power / ((2.0 * k + 1.0) * (1.0 - power));
            power *= p2;
            k += 1.0;
        }
        -2.0 * sum
    } else {
        let t = -p.ln();
        let r = (-PI * PI / t).exp();
        let r2 = r * r;
        let mut sum = 1.0;
        let mut value = 1.0;
        let mut step = r2;
        while value > 1e-18 {
            value *= step;
            step *= r2;
            sum += value;
        }
        std::f64::consts::LN_2 + 0.5 * (PI / t).ln() - PI * PI / (4.0 * t) + sum.ln()
    }
}

/// log χ_s(q) in double precision.
fn log_chi_f64(q: f64, s: usize) -> f64 {
    let p = q.sqrt();
    let mut sum = 0.0;
    let mut value = 1.0;
    let mut step = p.powi(4 * s as i32 + 1);
    let p2 = p * p;
    let mut sign = 1.0;
    while value > 1e-18 {
        sum += sign * value;
        value *= step;
        step *= p2;
        sign = -sign;
    }
    sum.ln()
}

/// F_s(q) = log ψ(√q) − log λ_s(q); its zero on (0, 1) is r̃_s.
fn f_scan(q: f64, s: usize) -> f64 {
    let s2 = (s * s) as f64;
    log_psi_f64(q.sqrt()) - 2.0 * s2 * q.ln() - log_chi_f64(q, s)
}

/// Grid of step [`SCAN_STEP`] on (0, 1), continued geometrically toward 1
/// while `keep_going` says the crossing has not been passed.
fn scan_grid<F>(mut keep_going: F) -> Vec<f64>
where
    F: FnMut(f64) -> bool,
{
    let steps = (1.0 / SCAN_STEP).round() as usize;
    let mut grid: Vec<f64> = (1..steps).map(|i| i as f64 * SCAN_STEP).collect();
    let mut gap = SCAN_STEP;
    while gap > 1e-12 && keep_going(1.0 - gap) {
        gap *= 0.5;
        grid.push(1.0 - gap);
    }
    grid
}

/// Guard digits for solving at q ≈ `q0`: the log10 of the largest term of
/// θ(q, u_s), which is also the factor between θ(q, u_s) and
/// ψ(√q) − λ_s(q).
fn guard_digits(q0: f64, s: usize) -> u32 {
    let m = (2 * s - 1) as f64;
    let scale = -0.5 * m * m * q0.ln() + log_psi_f64(q0.sqrt());
    let magnitude = (2.0 * (s * s) as f64 * (-q0.ln())).max(1.0);
    ((scale.max(0.0) + magnitude.ln()) / LN_10).ceil() as u32 + 8
}

fn log_equation(q: &Float, s: usize, ctx: &PrecisionContext) -> Result<Float> {
    let bits = ctx.bits().max(q.prec());
    let p = Float::with_val(bits, q.sqrt_ref());
    let psi_part = log_psi(&p, ctx)?;
    let ln_q = Float::with_val(bits, q.ln_ref());
    let chi = chi_s(q, s, ctx)?.value.ln();
    Ok(psi_part - ln_q * (2 * s * s) as u32 - chi)
}

/// Widens a coarse bracket by whole scan cells until `f` changes sign at
/// working precision.
fn confirm_bracket<F>(mut f: F, cell: (f64, f64), ctx: &PrecisionContext) -> Result<(Float, Float)>
where
    F: FnMut(&Float) -> Result<Float>,
{
    let (mut a, mut b) = cell;
    let width = (b - a).max(1e-15);
    for _ in 0..4 {
        let lo = ctx.float(a);
        let hi = ctx.float(b);
        let (fa, fb) = (f(&lo)?, f(&hi)?);
        if fa.is_zero() || fb.is_zero() || (fa < 0) != (fb < 0) {
            return Ok((lo, hi));
        }
        a = (a - width).max(width * 1e-3);
        b = (b + width).min(1.0 - (1.0 - b) * 0.5);
    }
    Err(Error::SameSign {
        lo: a,
        hi: b,
        f_lo: f64::NAN,
        f_hi: f64::NAN,
    })
}

/// r̃_s: the root of ψ(√q) = λ_s(q), i.e. of θ(q, −q^{−2s+1/2}) = 0.
pub fn r_tilde(s: usize, ctx: &PrecisionContext) -> Result<RTildeRecord> {
    check_index(s)?;
    let grid = scan_grid(|q| f_scan(q, s) > 0.0);
    let candidates = sign_changes(&grid, |q| f_scan(q, s));
    let cell = *candidates.last().ok_or_else(|| Error::MissingSignChange {
        index: s,
        q: f64::NAN,
        what: "crossing of ψ(√q) and λ_s(q)".into(),
    })?;
    let ambiguous = candidates.len() > 1;

    let raised = ctx.with_guard_digits(guard_digits(0.5 * (cell.0 + cell.1), s));
    let (lo, hi) = confirm_bracket(|q| log_equation(q, s, &raised), cell, &raised)?;
    let r = bracket_root(|q| log_equation(q, s, &raised), &lo, &hi, &raised)?;
    rtilde_record(s, r, ambiguous, candidates, ctx)
}

fn rtilde_record(
    s: usize,
    r: Float,
    ambiguous: bool,
    candidates: Vec<(f64, f64)>,
    ctx: &PrecisionContext,
) -> Result<RTildeRecord> {
    let bits = r.prec();
    let z = u_marker(&r, s, bits);
    let v = v_marker(&r, s, bits);
    let p = Float::with_val(bits, r.sqrt_ref());
    let psi = psi_eval(&p, PsiRoute::Series, ctx)?.psi;
    let lambda = lambda_s(&r, s, ctx)?.value;
    let residual = Float::with_val(bits.max(psi.prec()), &psi - &lambda).abs();
    let theta_residual = theta_value(&r, &z, ctx)?.abs();
    Ok(RTildeRecord {
        s,
        r_tilde: r,
        u_s: z.clone(),
        z,
        v_s: v,
        residual,
        theta_residual,
        ambiguous,
        candidates,
    })
}

/// r̃_s found directly as a root of q ↦ θ(q, u_s(q)), with its own coarse
/// scan; the cross-check for [`r_tilde`].
pub fn r_tilde_via_theta(s: usize, ctx: &PrecisionContext) -> Result<Float> {
    check_index(s)?;
    let g = |q: &Float| -> Result<Float> {
        let x = u_marker(q, s, q.prec());
        theta_value(q, &x, ctx)
    };
    let signs = |q: f64| g(&ctx.float(q)).map(|v| v.to_f64()).unwrap_or(f64::NAN);
    let grid = scan_grid(|q| signs(q) < 0.0);
    let candidates = sign_changes(&grid, signs);
    let cell = *candidates.last().ok_or_else(|| Error::MissingSignChange {
        index: s,
        q: f64::NAN,
        what: "zero of θ(q, u_s(q))".into(),
    })?;
    let lo = ctx.float(cell.0);
    let hi = ctx.float(cell.1);
    bracket_root(g, &lo, &hi, ctx)
}

/// r̃_s for every s in `range`, in order; independent solves run on the
/// current rayon pool.
pub fn r_tilde_table(range: std::ops::RangeInclusive<usize>, ctx: &PrecisionContext) -> Vec<Result<RTildeRecord>> {
    range.collect::<Vec<_>>().into_par_iter().map(|s| r_tilde(s, ctx)).collect()
}

/// g(q): the minimum of θ(q, ·) over the bracket of t_j. Negative while the
/// pair ξ_{2j−1}, ξ_{2j} is real, positive once it has become complex.
pub fn coalescence_gap(q: &Float, j: usize, ctx: &PrecisionContext) -> Result<Float> {
    Ok(bracket_minimum(q, j, None, ctx)?.value)
}

/// q̃_j from the bracket [r̃_j, r̃_{j+1}]. For j = 1 an ambiguous r̃_1 scan
/// falls back to the bracket (0.2, 0.4).
pub fn spectral_value(j: usize, ctx: &PrecisionContext) -> Result<SpectralRecord> {
    check_index(j)?;
    let lower = r_tilde(j, ctx)?;
    let upper = r_tilde(j + 1, ctx)?;
    spectral_from_rtilde(j, &lower, &upper, ctx)
}

fn spectral_from_rtilde(j: usize, lower: &RTildeRecord, upper: &RTildeRecord, ctx: &PrecisionContext) -> Result<SpectralRecord> {
    if j == 1 && lower.ambiguous {
        return spectral_value_in(j, &ctx.float(0.2), &ctx.float(0.4), ctx);
    }
    spectral_value_in(j, &lower.r_tilde, &upper.r_tilde, ctx)
}

/// q̃_j as the sign change of g on [lo, hi]; t_j is re-located at every
/// trial q, warm-started from the previous one.
pub fn spectral_value_in(j: usize, lo: &Float, hi: &Float, ctx: &PrecisionContext) -> Result<SpectralRecord> {
    check_index(j)?;
    let warm: RefCell<Option<Float>> = RefCell::new(None);
    let g = |q: &Float| -> Result<Float> {
        let guess = warm.borrow().clone();
        let m = bracket_minimum(q, j, guess.as_ref(), ctx)?;
        if m.interior {
            *warm.borrow_mut() = Some(m.location.clone());
        }
        Ok(m.value)
    };
    let q_tilde = bracket_root(g, lo, hi, ctx).map_err(|e| match e {
        Error::SameSign { .. } => Error::BracketFailure {
            j,
            reason: format!(
                "g(q) keeps its sign on [{}, {}]",
                lo.to_f64(),
                hi.to_f64()
            ),
        },
        other => other,
    })?;
    let guess = warm.borrow().clone();
    let minimum = bracket_minimum(&q_tilde, j, guess.as_ref(), ctx)?;
    if !minimum.interior {
        return Err(Error::BracketFailure {
            j,
            reason: "no interior minimum at the coalescence point".into(),
        });
    }
    let y = minimum.location;
    let jet = theta_jet(&ThetaQuery::new(q_tilde.clone(), y.clone())?, ctx)?;
    let theta_residual = jet.value.expect("full jet").value.abs();
    let dtheta_residual = jet.dx.expect("full jet").value.abs();
    let second_derivative = jet.dxx.expect("full jet").value;
    if second_derivative <= 0 {
        return Err(Error::BracketFailure {
            j,
            reason: "double zero is not a local minimum".into(),
        });
    }
    Ok(SpectralRecord {
        j,
        q_tilde,
        t_j: y.clone(),
        y,
        theta_residual,
        dtheta_residual,
        second_derivative,
        bracket: (lo.clone(), hi.clone()),
    })
}

/// r̃_s for s in `first..=last + 1` and q̃_j for j in `first..=last`,
/// sharing the r̃ solves.
pub struct SpectralTable {
    pub r_tilde: Vec<Result<RTildeRecord>>,
    pub spectral: Vec<Result<SpectralRecord>>,
    pub first: usize,
}

impl SpectralTable {
    pub fn compute(first: usize, last: usize, ctx: &PrecisionContext) -> Result<Self> {
        check_index(first)?;
        if last < first {
            return Err(Error::Domain(format!("empty index range {first}..{last}")));
        }
        let r_tilde = r_tilde_table(first..=last + 1, ctx);
        let spectral = (first..=last)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|j| {
                let lower = r_tilde[j - first].as_ref().map_err(Clone::clone)?;
                let upper = r_tilde[j + 1 - first].as_ref().map_err(Clone::clone)?;
                spectral_from_rtilde(j, lower, upper, ctx)
            })
            .collect();
        Ok(Self {
            r_tilde,
            spectral,
            first,
        })
    }

    pub fn rtilde(&self, s: usize) -> Option<&RTildeRecord> {
        self.r_tilde.get(s.checked_sub(self.first)?)?.as_ref().ok()
    }

    pub fn record(&self, j: usize) -> Option<&SpectralRecord> {
        self.spectral.get(j.checked_sub(self.first)?)?.as_ref().ok()
    }
}

/// q̃_j for every j in `range`.
pub fn spectral_table(range: std::ops::RangeInclusive<usize>, ctx: &PrecisionContext) -> Result<Vec<Result<SpectralRecord>>> {
    let (first, last) = (*range.start(), *range.end());
    Ok(SpectralTable::compute(first, last, ctx)?.spectral)
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderingRow {
    pub j: usize,
    pub r_j: Option<f64>,
    pub q_tilde: Option<f64>,
    pub r_next: Option<f64>,
    /// g(r̃_j) ≤ 0: the pair is still real at r̃_j, so r̃_j ≤ q̃_j.
    pub lower_holds: bool,
    /// g(r̃_{j+1}) ≥ 0: the pair is complex at r̃_{j+1}, so q̃_j ≤ r̃_{j+1}.
    pub upper_holds: bool,
}

impl OrderingRow {
    pub fn holds(&self) -> bool {
        self.lower_holds && self.upper_holds
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderingReport {
    pub rows: Vec<OrderingRow>,
    /// Smallest j from which the chain holds for every computed index.
    pub threshold: Option<usize>,
    pub q_tilde_increasing: bool,
    pub r_tilde_increasing: bool,
}

/// Checks r̃_j ≤ q̃_j ≤ r̃_{j+1} for j = 1..=j_max through the sign of g at
/// the two ends, independently of whether the q̃_j solve succeeded.
pub fn verify_ordering(j_max: usize, ctx: &PrecisionContext) -> Result<OrderingReport> {
    let table = SpectralTable::compute(1, j_max, ctx)?;
    ordering_report(&table, ctx)
}

pub fn ordering_report(table: &SpectralTable, ctx: &PrecisionContext) -> Result<OrderingReport> {
    let last = table.first + table.spectral.len() - 1;
    let rows: Vec<OrderingRow> = (table.first..=last)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|j| {
            let lower = table.rtilde(j);
            let upper = table.rtilde(j + 1);
            let record = table.record(j);
            let lower_holds = lower
                .and_then(|r| coalescence_gap(&r.r_tilde, j, ctx).ok())
                .is_some_and(|g| g <= 0)
                && match (lower, record) {
                    (Some(r), Some(rec)) => r.r_tilde <= rec.q_tilde,
                    _ => true,
                };
            let upper_holds = upper
                .and_then(|r| coalescence_gap(&r.r_tilde, j, ctx).ok())
                .is_some_and(|g| g >= 0)
                && match (upper, record) {
                    (Some(r), Some(rec)) => rec.q_tilde <= r.r_tilde,
                    _ => true,
                };
            OrderingRow {
                j,
                r_j: lower.map(|r| r.r_tilde.to_f64()),
                q_tilde: record.map(|r| r.q_tilde.to_f64()),
                r_next: upper.map(|r| r.r_tilde.to_f64()),
                lower_holds,
                upper_holds,
            }
        })
        .collect();
    let threshold = rows
        .iter()
        .rposition(|r| !r.holds())
        .map_or(Some(table.first), |i| rows.get(i + 1).map(|r| r.j));
    let q_tilde_increasing = strictly_increasing(table.spectral.iter().map(|r| r.as_ref().ok().map(|r| &r.q_tilde)));
    let r_tilde_increasing = strictly_increasing(table.r_tilde.iter().map(|r| r.as_ref().ok().map(|r| &r.r_tilde)));
    Ok(OrderingReport {
        rows,
        threshold,
        q_tilde_increasing,
        r_tilde_increasing,
    })
}

fn strictly_increasing<'a, I>(values: I) -> bool
where
    I: Iterator<Item = Option<&'a Float>>,
{
    let mut prev: Option<&Float> = None;
    for v in values {
        let Some(v) = v else { return false };
        if prev.is_some_and(|p| p >= v) {
            return false;
        }
        prev = Some(v);
    }
    true
}

/// Ξ = √q/(1 + √q), the closed form of (−q^{−2j} − v_j)/(−q^{−2j} + q^{−2j−1}).
pub fn xi_closed_form(q: &Float) -> Float {
    let p = Float::with_val(q.prec(), q.sqrt_ref());
    let denom = Float::with_val(q.prec(), 1 + &p);
    p / denom
}

#[derive(Debug, Clone)]
pub struct RecordChecks {
    pub j: usize,
    /// θ(q̃_j, v_j) and whether it exceeds 1/3.
    pub theta_at_v: Float,
    pub v_exceeds_third: bool,
    /// Ξ_j from its defining ratio and from the closed form.
    pub xi: Float,
    pub xi_closed_form: Float,
    /// w_j = t_j/q̃_j and θ(q̃_j, w_j), which should equal 1.
    pub w: Float,
    pub theta_at_w: Float,
    /// Distance from w_j to the local maximum located independently.
    pub w_maximum_gap: Float,
    /// θ(q̃_j ∓ offset) evaluated through g: negative below, positive above.
    pub flip_below: Float,
    pub flip_above: Float,
}

impl RecordChecks {
    pub fn flip_holds(&self) -> bool {
        self.flip_below < 0 && self.flip_above > 0
    }
}

pub fn record_checks(record: &SpectralRecord, ctx: &PrecisionContext) -> Result<RecordChecks> {
    let q = &record.q_tilde;
    let j = record.j;
    let bits = q.prec().max(ctx.bits());
    let v = v_marker(q, j, bits);
    let theta_at_v = theta_value(q, &v, ctx)?;
    let third = Float::with_val(bits, 1) / 3u32;
    let v_exceeds_third = theta_at_v > third;

    let left = neg_half_power(q, -4 * j as i32, bits);
    let right = neg_half_power(q, -4 * j as i32 - 2, bits);
    let numer = Float::with_val(bits, &left - &v);
    let denom = Float::with_val(bits, &left - &right);
    let xi = numer / denom;

    let w = Float::with_val(bits.max(record.t_j.prec()), &record.t_j / q);
    let theta_at_w = theta_value(q, &w, ctx)?;
    let (lo, hi) = maximum_bracket(q, j, bits);
    let max = locate_critical_point(q, j, CriticalKind::Maximum, (&lo, &hi), Some(&w), ctx)?;
    let w_maximum_gap = Float::with_val(w.prec(), &w - &max.location).abs();

    let offset = ctx.float(FLIP_OFFSET);
    let below = Float::with_val(bits, q - &offset);
    let above = Float::with_val(bits, q + &offset);
    Ok(RecordChecks {
        j,
        theta_at_v,
        v_exceeds_third,
        xi,
        xi_closed_form: xi_closed_form(q),
        w,
        theta_at_w,
        w_maximum_gap,
        flip_below: coalescence_gap(&below, j, ctx)?,
        flip_above: coalescence_gap(&above, j, ctx)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    #[test]
    fn scan_function_matches_precise_equation() {
        let c = ctx();
        for (q, s) in [(0.3, 1), (0.6, 3), (0.95, 20), (0.995, 300)] {
            let precise = log_equation(&c.float(q), s, &c).unwrap().to_f64();
            let coarse = f_scan(q, s);
            assert!((precise - coarse).abs() < 1e-9 * (1.0 + precise.abs()), "{q} {s}");
        }
    }

    #[test]
    fn first_rtilde_solves_both_forms() {
        let c = ctx();
        let r = r_tilde(1, &c).unwrap();
        assert!(!r.ambiguous);
        assert!((r.r_tilde.to_f64() - 0.292_488_975_973).abs() < 1e-11);
        assert!(r.residual <= c.residual_bound());
        assert!(r.theta_residual <= c.residual_bound());
        let direct = r_tilde_via_theta(1, &c).unwrap();
        let gap = Float::with_val(c.bits(), &direct - &r.r_tilde).abs();
        assert!(gap <= Float::with_val(c.bits(), c.root_tolerance() * 2u32));
    }

    #[test]
    fn golden_spectral_value() {
        let c = ctx();
        let rec = spectral_value(1, &c).unwrap();
        assert!((rec.q_tilde.to_f64() - 0.309_249_338_6).abs() < 1e-9);
        // joint Newton solve of θ = θ_x = 0 at 50 digits
        assert!((rec.y.to_f64() + 7.503_255_964_244_192).abs() < 1e-12);
        assert!(rec.theta_residual <= c.residual_bound());
        assert!(rec.dtheta_residual <= c.residual_bound());
        assert!(rec.second_derivative > 0);
    }

    #[test]
    fn xi_limit() {
        let c = ctx();
        assert_eq!(xi_closed_form(&c.float(1)), 0.5);
    }
}
