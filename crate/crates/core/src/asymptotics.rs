//! Large-index expansions of q̃_j, y_j, r̃_s, z_s and extraction of their
//! constants from computed sequences:
//!
//! q̃_j = 1 − π/(2j) + (log j)/(8j²) + b/j² + o(1/j²),
//! y_j = −e^π e^{−(log j)/(4j) + α/j + o(1/j)},
//!
//! with b*, α* in the same roles for r̃_s, z_s.

use std::fmt;
use std::str::FromStr;

use rug::float::Constant;
use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::PrecisionContext;

/// Slack added on both sides of the reference intervals.
pub const INTERVAL_SLACK: f64 = 0.1;

/// Minimum number of sequence entries, and the smallest index they may have.
pub const MIN_ENTRIES: usize = 10;
pub const MIN_INDEX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    QTilde,
    Y,
    RTilde,
    Z,
}

impl SequenceKind {
    /// Sequences of q-values (as opposed to zero locations).
    pub fn is_parameter(self) -> bool {
        matches!(self, Self::QTilde | Self::RTilde)
    }

    pub fn constant_name(self) -> &'static str {
        match self {
            Self::QTilde => "b",
            Self::Y => "alpha",
            Self::RTilde => "b*",
            Self::Z => "alpha*",
        }
    }

    /// Reference interval for the constant before slack.
    pub fn reference_interval(self) -> (f64, f64) {
        match self {
            Self::QTilde => (1.735_469_700, 3.327_099_360),
            Self::RTilde => (1.735_469_700, 1.756_303_033),
            Self::Y => (-4.972_195_782, -1.788_936_462),
            Self::Z => (-1.830_603_128, -1.788_936_462),
        }
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::QTilde => "qtilde",
            Self::Y => "y",
            Self::RTilde => "rtilde",
            Self::Z => "z",
        })
    }
}

impl FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qtilde" => Ok(Self::QTilde),
            "y" => Ok(Self::Y),
            "rtilde" => Ok(Self::RTilde),
            "z" => Ok(Self::Z),
            other => Err(Error::Domain(format!("unknown sequence kind `{other}`"))),
        }
    }
}

/// α = −π/4 − 2b + π²/4.
pub fn alpha_from_b(b: &Float) -> Float {
    let bits = b.prec().max(64);
    let pi = Float::with_val(bits, Constant::Pi);
    let quarter_pi2 = Float::with_val(bits, pi.square_ref()) / 4u32;
    let quarter_pi = pi / 4u32;
    quarter_pi2 - quarter_pi - Float::with_val(bits, b * 2u32)
}

/// An expansion with its constants; `b` is b or b*, `alpha` is α or α*.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticModel {
    pub kind: SequenceKind,
    pub b: Option<Float>,
    pub alpha: Option<Float>,
}

impl AsymptoticModel {
    pub fn new(kind: SequenceKind) -> Self {
        Self {
            kind,
            b: None,
            alpha: None,
        }
    }

    /// Sets b and the α it determines.
    pub fn with_b(mut self, b: Float) -> Self {
        self.alpha = Some(alpha_from_b(&b));
        self.b = Some(b);
        self
    }

    pub fn with_alpha(mut self, alpha: Float) -> Self {
        self.alpha = Some(alpha);
        self
    }
}

/// The expansion at `index` with the o-terms dropped.
pub fn model_eval(model: &AsymptoticModel, index: usize, ctx: &PrecisionContext) -> Result<Float> {
    if index == 0 {
        return Err(Error::Domain("indices start at 1".into()));
    }
    let bits = ctx.bits();
    let j = Float::with_val(bits, index);
    let ln_j = Float::with_val(bits, j.ln_ref());
    let pi = Float::with_val(bits, Constant::Pi);
    if model.kind.is_parameter() {
        let b = model.b.as_ref().ok_or(Error::MissingConstant(model.kind.constant_name()))?;
        let j2 = Float::with_val(bits, j.square_ref());
        let first = Float::with_val(bits, &pi / &j) / 2u32;
        let second = Float::with_val(bits, &ln_j / &j2) / 8u32;
        let third = Float::with_val(bits, b / &j2);
        Ok(1 - first + second + third)
    } else {
        let alpha = model.alpha.as_ref().ok_or(Error::MissingConstant(model.kind.constant_name()))?;
        let exponent = Float::with_val(bits, alpha - Float::with_val(bits, &ln_j / 4u32)) / &j;
        Ok(-(pi + exponent).exp())
    }
}

/// Per-index estimate of the constant: for q-sequences
/// c_j = (v_j − 1 + π/(2j) − (log j)/(8j²))·j², for zero locations
/// c_j = (log(−v_j/e^π) + (log j)/(4j))·j.
pub fn constant_estimate(kind: SequenceKind, index: usize, value: &Float) -> Result<Float> {
    let bits = value.prec().max(64);
    let j = Float::with_val(bits, index);
    let ln_j = Float::with_val(bits, j.ln_ref());
    let pi = Float::with_val(bits, Constant::Pi);
    if kind.is_parameter() {
        let j2 = Float::with_val(bits, j.square_ref());
        let leading = Float::with_val(bits, &pi / &j) / 2u32;
        let log_term = Float::with_val(bits, &ln_j / &j2) / 8u32;
        let rest = Float::with_val(bits, value - 1u32) + leading - log_term;
        Ok(rest * j2)
    } else {
        if *value >= 0 {
            return Err(Error::Domain(format!("{kind} value {} is not negative", value.to_f64())));
        }
        let log_ratio = Float::with_val(bits, (-value.clone()).ln()) - pi;
        let log_term = Float::with_val(bits, &ln_j / &j) / 4u32;
        Ok((log_ratio + log_term) * j)
    }
}

/// h_s = s(1 − q), d_s = h_s − π/2, g_s = d_s + (log s)/(8s) for q = r̃_s
/// (or q̃_s).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReparamDiagnostics {
    pub s: usize,
    pub h_s: f64,
    pub d_s: f64,
    pub g_s: f64,
}

impl ReparamDiagnostics {
    pub fn new(s: usize, q: &Float) -> Self {
        let bits = q.prec().max(64);
        let sf = Float::with_val(bits, s);
        let h = Float::with_val(bits, 1 - q) * &sf;
        let half_pi = Float::with_val(bits, Constant::Pi) / 2u32;
        let d = Float::with_val(bits, &h - half_pi);
        let log_term = Float::with_val(bits, sf.ln_ref()) / Float::with_val(bits, &sf * 8u32);
        let g = Float::with_val(bits, &d + log_term);
        Self {
            s,
            h_s: h.to_f64(),
            d_s: d.to_f64(),
            g_s: g.to_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub constant_name: String,
    pub kind: SequenceKind,
    pub per_index_estimates: Vec<(usize, f64)>,
    pub extrapolated: f64,
    /// Mean of the last-quartile estimates, before the Richardson step.
    pub tail_average: f64,
    pub reference_interval: (f64, f64),
    pub slack: f64,
    pub in_interval: bool,
    pub diagnostics: Vec<ReparamDiagnostics>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn spread(values: &[(usize, f64)]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Estimates the constant of `kind` from `(index, value)` pairs: the mean
/// of the last-quartile per-index estimates, corrected by one Richardson
/// step in 1/j against the third quartile.
pub fn extract_constant(seq: &[(usize, Float)], kind: SequenceKind) -> Result<FitResult> {
    let mut entries: Vec<&(usize, Float)> = seq.iter().filter(|(j, _)| *j >= MIN_INDEX).collect();
    entries.sort_by_key(|(j, _)| *j);
    entries.dedup_by_key(|(j, _)| *j);
    if entries.len() < MIN_ENTRIES {
        return Err(Error::Domain(format!(
            "need at least {MIN_ENTRIES} entries with index >= {MIN_INDEX}, got {}",
            entries.len()
        )));
    }
    let estimates = entries
        .iter()
        .map(|(j, v)| Ok((*j, constant_estimate(kind, *j, v)?.to_f64())))
        .collect::<Result<Vec<_>>>()?;
    if estimates.iter().any(|(_, c)| !c.is_finite()) {
        return Err(Error::DegenerateSequence("non-finite per-index estimate".into()));
    }

    let quarter = estimates.len() / 4;
    let q4 = &estimates[estimates.len() - quarter..];
    let q3 = &estimates[estimates.len() - 2 * quarter..estimates.len() - quarter];
    let a4 = mean(q4.iter().map(|&(_, c)| c));
    let a3 = mean(q3.iter().map(|&(_, c)| c));
    let h4 = mean(q4.iter().map(|&(j, _)| 1.0 / j as f64));
    let h3 = mean(q3.iter().map(|&(j, _)| 1.0 / j as f64));

    let floor = 1e-9 * (1.0 + a4.abs());
    let (s4, s3) = (spread(q4), spread(q3));
    if s4 > 10.0 * s3.max(floor) {
        return Err(Error::DegenerateSequence(format!(
            "last-quartile spread {s4:e} exceeds ten times the previous quartile's {s3:e}"
        )));
    }
    let extrapolated = (a4 * h3 - a3 * h4) / (h3 - h4);
    if !extrapolated.is_finite() {
        return Err(Error::DegenerateSequence("extrapolation is not finite".into()));
    }

    let reference_interval = kind.reference_interval();
    let in_interval =
        extrapolated >= reference_interval.0 - INTERVAL_SLACK && extrapolated <= reference_interval.1 + INTERVAL_SLACK;
    let diagnostics = if kind.is_parameter() {
        entries.iter().map(|(j, v)| ReparamDiagnostics::new(*j, v)).collect()
    } else {
        Vec::new()
    };
    Ok(FitResult {
        constant_name: kind.constant_name().to_string(),
        kind,
        per_index_estimates: estimates,
        extrapolated,
        tail_average: a4,
        reference_interval,
        slack: INTERVAL_SLACK,
        in_interval,
        diagnostics,
    })
}

/// A sequence generated from the model itself, for round-trip checks.
pub fn synthetic_sequence(
    model: &AsymptoticModel,
    indices: impl IntoIterator<Item = usize>,
    ctx: &PrecisionContext,
) -> Result<Vec<(usize, Float)>> {
    indices.into_iter().map(|j| Ok((j, model_eval(model, j, ctx)?))).collect()
}
