//! Piecewise-constant functions on a half-open interval `[lo, hi)`.
//!
//! A function is stored as `t + 1` strictly increasing breakpoints
//! `a_1 < ... < a_{t+1}` (both endpoints included) and `t` values; segment
//! `i` covers `[a_i, a_{i+1})`. Values live in `[0, 1]` and adjacent equal
//! values are merged on construction, so the segment count of a
//! [`PiecewiseConstant`] is canonical.
//!
//! Breakpoints are compared exactly. Callers that produce breakpoints
//! numerically are expected to snap near-duplicates before building a
//! function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PiecewiseRepr", into = "PiecewiseRepr")]
pub struct PiecewiseConstant {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

/// Wire form: `{"lo":…, "hi":…, "breaks":[…], "values":[…]}` where `breaks`
/// includes both endpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PiecewiseRepr {
    pub lo: f64,
    pub hi: f64,
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl TryFrom<PiecewiseRepr> for PiecewiseConstant {
    type Error = Error;

    fn try_from(repr: PiecewiseRepr) -> Result<Self> {
        let first = repr.breaks.first().copied();
        let last = repr.breaks.last().copied();
        if first != Some(repr.lo) || last != Some(repr.hi) {
            return Err(Error::argument(format!(
                "breaks must start at lo={} and end at hi={}",
                repr.lo, repr.hi
            )));
        }
        PiecewiseConstant::new(repr.breaks, repr.values)
    }
}

impl From<PiecewiseConstant> for PiecewiseRepr {
    fn from(f: PiecewiseConstant) -> Self {
        PiecewiseRepr {
            lo: f.lo(),
            hi: f.hi(),
            breaks: f.breaks,
            values: f.values,
        }
    }
}

impl PiecewiseConstant {
    /// Builds a function from breakpoints (endpoints included) and per-segment
    /// values, merging adjacent segments that carry the same value.
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || breaks.len() != values.len() + 1 {
            return Err(Error::argument(format!(
                "need |breaks| = |values| + 1 >= 2, got {} breaks and {} values",
                breaks.len(),
                values.len()
            )));
        }
        if breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::argument("breakpoints must be finite"));
        }
        if let Some(w) = breaks.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::argument(format!(
                "breakpoints must be strictly increasing ({} >= {})",
                w[0], w[1]
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::argument(format!("value {v} outside [0, 1]")));
        }

        let mut merged_breaks = Vec::with_capacity(breaks.len());
        let mut merged_values: Vec<f64> = Vec::with_capacity(values.len());
        merged_breaks.push(breaks[0]);
        for (i, &v) in values.iter().enumerate() {
            if merged_values.last() == Some(&v) {
                *merged_breaks.last_mut().unwrap() = breaks[i + 1];
            } else {
                merged_values.push(v);
                merged_breaks.push(breaks[i + 1]);
            }
        }
        Ok(PiecewiseConstant {
            breaks: merged_breaks,
            values: merged_values,
        })
    }

    pub fn constant(lo: f64, hi: f64, value: f64) -> Result<Self> {
        Self::new(vec![lo, hi], vec![value])
    }

    /// Equal-width segments on `[lo, hi)` with the given values.
    pub fn uniform(lo: f64, hi: f64, values: &[f64]) -> Result<Self> {
        let t = values.len();
        if t == 0 {
            return Err(Error::argument("need at least one value"));
        }
        let width = hi - lo;
        let breaks = (0..=t)
            .map(|i| {
                if i == t {
                    hi
                } else {
                    lo + width * i as f64 / t as f64
                }
            })
            .collect();
        Self::new(breaks, values.to_vec())
    }

    pub fn lo(&self) -> f64 {
        self.breaks[0]
    }

    pub fn hi(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    pub fn length(&self) -> f64 {
        self.hi() - self.lo()
    }

    /// Breakpoints including both endpoints.
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of canonical segments.
    pub fn num_pieces(&self) -> usize {
        self.values.len()
    }

    pub fn is_constant(&self) -> bool {
        self.values.len() == 1
    }

    /// Iterates `(start, end, value)` over the segments.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breaks
            .windows(2)
            .zip(&self.values)
            .map(|(w, &v)| (w[0], w[1], v))
    }

    pub fn same_domain(&self, other: &Self) -> bool {
        self.lo() == other.lo() && self.hi() == other.hi()
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(self.lo() <= r && r < self.hi()) {
            return Err(Error::domain(format!(
                "r = {r} outside [{}, {})",
                self.lo(),
                self.hi()
            )));
        }
        // Index of the last breakpoint <= r; segment i starts at breaks[i].
        let idx = self.breaks.partition_point(|&b| b <= r) - 1;
        Ok(self.values[idx])
    }

    /// Sum of absolute jumps between adjacent segments.
    pub fn total_variation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    /// Measure of the set where `self` and `other` differ.
    pub fn disagreement_measure(&self, other: &Self) -> Result<f64> {
        let refined = common_refinement(self, other)?;
        Ok(refined
            .segments()
            .filter(|(_, _, (a, b))| a != b)
            .map(|(s, e, _)| e - s)
            .sum())
    }
}

/// Union of the breakpoints of two functions on the same domain, with the
/// pair of values taken on each refined segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub breaks: Vec<f64>,
    pub pairs: Vec<(f64, f64)>,
}

impl Refinement {
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, (f64, f64))> + '_ {
        self.breaks
            .windows(2)
            .zip(&self.pairs)
            .map(|(w, &p)| (w[0], w[1], p))
    }
}

pub fn common_refinement(f: &PiecewiseConstant, g: &PiecewiseConstant) -> Result<Refinement> {
    if !f.same_domain(g) {
        return Err(Error::domain(format!(
            "mismatched domains [{}, {}) and [{}, {})",
            f.lo(),
            f.hi(),
            g.lo(),
            g.hi()
        )));
    }
    let mut breaks = Vec::with_capacity(f.breaks.len() + g.breaks.len());
    let mut pairs = Vec::with_capacity(f.values.len() + g.values.len());
    breaks.push(f.lo());
    let (mut i, mut j) = (0, 0);
    while i < f.values.len() && j < g.values.len() {
        pairs.push((f.values[i], g.values[j]));
        let (fe, ge) = (f.breaks[i + 1], g.breaks[j + 1]);
        breaks.push(fe.min(ge));
        if fe <= ge {
            i += 1;
        }
        if ge <= fe {
            j += 1;
        }
    }
    Ok(Refinement { breaks, pairs })
}

/// `sup |f - g|`, exact as a maximum over refined segments.
pub fn linf_distance(f: &PiecewiseConstant, g: &PiecewiseConstant) -> Result<f64> {
    let refined = common_refinement(f, g)?;
    Ok(refined
        .pairs
        .iter()
        .map(|&(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// `(∫ |f - g|^p)^{1/p}` in closed form over refined segments.
pub fn lp_distance(f: &PiecewiseConstant, g: &PiecewiseConstant, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::argument(format!(
            "p must be finite and >= 1, got {p}"
        )));
    }
    let refined = common_refinement(f, g)?;
    let sum: f64 = refined
        .segments()
        .map(|(s, e, (a, b))| (a - b).abs().powf(p) * (e - s))
        .sum();
    Ok(sum.powf(1.0 / p))
}
