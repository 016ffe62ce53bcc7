//! Closed-form generalization bounds.
//!
//! All bounds are for `[0, 1]`-valued performance measures over `N`
//! training instances and hold with probability `1 - δ`:
//!
//! - [`massart_bound`] / [`pwc_rad_bound`]: Rademacher complexity of a finite
//!   vector set and of a family whose duals have at most `j` pieces.
//! - [`worst_case_bound`]: uses the `n^{2(κ+1)}` piece count of
//!   branch-and-bound duals; evaluated in log space.
//! - [`srm_bound`]: data-dependent bound minimized over the number of pieces
//!   `j` of the approximating duals.
//! - [`baseline_bound`]: the same bound at a single fixed `j*`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sqrt(2 ln|A| / N)`.
pub fn massart_bound(set_size: u64, n: u64) -> f64 {
    assert!(set_size >= 1 && n >= 1);
    (2.0 * (set_size as f64).ln() / n as f64).sqrt()
}

/// `sqrt(2 ln(N(j-1)+1) / N)`.
pub fn pwc_rad_bound(n: u64, j: u64) -> f64 {
    assert!(n >= 1 && j >= 1);
    let set_size = n as f64 * (j - 1) as f64 + 1.0;
    (2.0 * set_size.ln() / n as f64).sqrt()
}

/// `sqrt(ln(1/δ) / (2M))`.
pub fn hoeffding_slack(m: u64, delta: f64) -> f64 {
    assert!(m >= 1 && delta > 0.0 && delta <= 1.0);
    ((1.0 / delta).ln() / (2.0 * m as f64)).sqrt()
}

/// Exponents above this use the asymptotic log-space form.
pub const LOG_SPACE_THRESHOLD: f64 = 40.0;

/// `ln(N (n^{2(κ+1)} - 1) + 1)`.
pub fn worst_case_log_pieces(n: u64, n_vars: u64, kappa: u64) -> Result<f64> {
    if n_vars < 2 || kappa < 1 || n < 1 {
        return Err(Error::argument(format!(
            "need N >= 1, n_vars >= 2, kappa >= 1 (got N={n}, n_vars={n_vars}, kappa={kappa})"
        )));
    }
    let exponent = 2.0 * (kappa as f64 + 1.0);
    let log_pieces = exponent * (n_vars as f64).ln();
    let n = n as f64;
    if log_pieces > LOG_SPACE_THRESHOLD {
        // ln N + E ln n + ln(1 - n^-E + 1/(N n^E)); the last term is below
        // e^-40 in magnitude.
        let tiny = (-log_pieces).exp() * (1.0 / n - 1.0);
        Ok(n.ln() + log_pieces + tiny.ln_1p())
    } else {
        let pieces = log_pieces.exp().round();
        Ok((n * (pieces - 1.0) + 1.0).ln())
    }
}

pub fn worst_case_bound(n: u64, n_vars: u64, kappa: u64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let log_pieces = worst_case_log_pieces(n, n_vars, kappa)?;
    let n = n as f64;
    Ok(2.0 * (2.0 * log_pieces / n).sqrt() + 3.0 * ((2.0 / delta).ln() / (2.0 * n)).sqrt())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::argument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

/// Which constants the data-dependent bounds use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMode {
    /// `δ` is split evenly between the Hoeffding estimate of `ê_j` and the
    /// union bound over `j`; the slack is computed from `M`.
    #[default]
    Generic,
    /// Fixed constants: total `δ = 0.01`, slack `1/40`, baseline floor
    /// `0.023`.
    Reference,
}

pub const REFERENCE_DELTA: f64 = 0.01;
pub const REFERENCE_SLACK: f64 = 1.0 / 40.0;
pub const REFERENCE_BASELINE_FLOOR: f64 = 0.023;

/// Mean L∞ approximation error `ê_j` for each piece budget `j`, measured on
/// `samples` instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxProfile {
    pub e_hat: BTreeMap<usize, f64>,
    pub samples: u64,
    /// Largest canonical piece count among the measured duals.
    pub j_star: usize,
}

impl ApproxProfile {
    /// Checks `ê_j ∈ [0, 1]` and that `ê_j` is nonincreasing in `j`.
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::argument("approximation profile needs M >= 1"));
        }
        if let Some((j, e)) = self.e_hat.iter().find(|(_, e)| !(0.0..=1.0).contains(*e)) {
            return Err(Error::argument(format!("e_hat[{j}] = {e} outside [0, 1]")));
        }
        let mut prev: Option<(usize, f64)> = None;
        for (&j, &e) in &self.e_hat {
            if let Some((pj, pe)) = prev {
                if e > pe {
                    return Err(Error::argument(format!(
                        "e_hat must be nonincreasing: e_hat[{pj}] = {pe} < e_hat[{j}] = {e}"
                    )));
                }
            }
            prev = Some((j, e));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub n: u64,
    pub delta: f64,
    pub n_vars: u64,
    pub kappa: u64,
    pub profile: ApproxProfile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrmResult {
    pub value: f64,
    pub best_j: usize,
}

/// The data-dependent bound for a single piece budget `j`.
pub fn srm_term(inputs: &BoundInputs, j: usize, mode: BoundMode) -> Result<f64> {
    if j < 1 {
        return Err(Error::argument("piece budget j must be >= 1"));
    }
    let e_hat = *inputs.profile.e_hat.get(&j).ok_or_else(|| {
        Error::argument(format!("approximation profile has no entry for j = {j}"))
    })?;
    let n = inputs.n as f64;
    let jf = j as f64;
    let (slack, union_log) = match mode {
        BoundMode::Reference => (REFERENCE_SLACK, ((20.0 * PI * jf).powi(2) / 3.0).ln()),
        BoundMode::Generic => {
            check_delta(inputs.delta)?;
            let half = inputs.delta / 2.0;
            (
                hoeffding_slack(inputs.profile.samples, half),
                (2.0 * (PI * jf).powi(2) / (3.0 * half)).ln(),
            )
        }
    };
    Ok(2.0 * (e_hat + slack)
        + 2.0 * pwc_rad_bound(inputs.n, j as u64)
        + (2.0 / n * union_log).sqrt())
}

/// Minimum of [`srm_term`] over `j_range`; ties go to the smallest `j`.
pub fn srm_bound(
    inputs: &BoundInputs,
    j_range: RangeInclusive<usize>,
    mode: BoundMode,
) -> Result<SrmResult> {
    if j_range.is_empty() {
        return Err(Error::argument("empty j range"));
    }
    inputs.profile.validate()?;
    let mut best = SrmResult {
        value: f64::INFINITY,
        best_j: 0,
    };
    for j in j_range {
        let v = srm_term(inputs, j, mode)?;
        if v < best.value {
            best = SrmResult {
                value: v,
                best_j: j,
            };
        }
    }
    Ok(best)
}

/// Approximation-error floor used by [`baseline_bound`]: the fixed `0.023`
/// in reference mode, otherwise the Hoeffding slack over `m` samples at `δ/2`.
pub fn baseline_floor(mode: BoundMode, m: u64, delta: f64) -> f64 {
    match mode {
        BoundMode::Reference => REFERENCE_BASELINE_FLOOR,
        BoundMode::Generic => hoeffding_slack(m, delta / 2.0),
    }
}

/// `2(floor + sqrt(2 ln(N(j*-1)+1)/N)) + 3 sqrt(ln(2/(δ/2)) / (2N))`.
pub fn baseline_bound(n: u64, j_star: u64, floor: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if j_star < 1 || n < 1 {
        return Err(Error::argument("baseline needs N >= 1 and j* >= 1"));
    }
    let nf = n as f64;
    Ok(2.0 * (floor + pwc_rad_bound(n, j_star)) + 3.0 * ((4.0 / delta).ln() / (2.0 * nf)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub worst_case: f64,
    pub srm: f64,
    pub srm_best_j: usize,
    pub baseline: f64,
}

impl BoundRow {
    /// The reported bound: the better of the worst-case and SRM bounds.
    pub fn reported(&self) -> f64 {
        self.worst_case.min(self.srm)
    }
}

/// Everything except `N` needed to evaluate a [`BoundCurve`].
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSettings {
    pub delta: f64,
    pub n_vars: u64,
    pub kappa: u64,
    pub profile: ApproxProfile,
    pub j_range: RangeInclusive<usize>,
    pub mode: BoundMode,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundCurve {
    pub rows: Vec<BoundRow>,
}

pub const CURVE_CSV_HEADER: &str = "N,worst_case,srm,srm_best_j,baseline";

impl BoundCurve {
    pub fn compute(schedule: &[u64], settings: &CurveSettings) -> Result<Self> {
        if schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::argument("N schedule must be strictly increasing"));
        }
        let delta = match settings.mode {
            BoundMode::Reference => REFERENCE_DELTA,
            BoundMode::Generic => settings.delta,
        };
        let floor = baseline_floor(settings.mode, settings.profile.samples, delta);
        let j_star = settings.profile.j_star.max(1) as u64;
        let rows = schedule
            .iter()
            .map(|&n| {
                let inputs = BoundInputs {
                    n,
                    delta,
                    n_vars: settings.n_vars,
                    kappa: settings.kappa,
                    profile: settings.profile.clone(),
                };
                let srm = srm_bound(&inputs, settings.j_range.clone(), settings.mode)?;
                Ok(BoundRow {
                    n,
                    worst_case: worst_case_bound(n, settings.n_vars, settings.kappa, delta)?,
                    srm: srm.value,
                    srm_best_j: srm.best_j,
                    baseline: baseline_bound(n, j_star, floor, delta)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(BoundCurve { rows })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CURVE_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.n, r.worst_case, r.srm, r.srm_best_j, r.baseline
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let bad = |msg: String| Error::argument(format!("bound curve CSV: {msg}"));
        match lines.next() {
            Some(Ok(h)) if h.trim() == CURVE_CSV_HEADER => {}
            other => return Err(bad(format!("unexpected header {other:?}"))),
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(format!("line {} has {} fields", lineno + 2, f.len())));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(e.to_string()));
            rows.push(BoundRow {
                n: f[0]
                    .trim()
                    .parse()
                    .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                worst_case: num(f[1])?,
                srm: num(f[2])?,
                srm_best_j: f[3]
                    .trim()
                    .parse()
                    .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                baseline: num(f[4])?,
            });
        }
        Ok(BoundCurve { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    fn profile(values: &[(usize, f64)], samples: u64) -> ApproxProfile {
        ApproxProfile {
            e_hat: values.iter().copied().collect(),
            samples,
            j_star: values.last().map(|v| v.0).unwrap_or(1),
        }
    }

    #[test]
    fn massart_examples() {
        assert_eq!(massart_bound(1, 17), 0.0);
        assert!((massart_bound(7, 14) - 0.527_244_880_630_204_9).abs() < 1e-12);
        assert!((massart_bound(10, 100) - 0.214_596_602_628_934_7).abs() < 1e-12);
    }

    #[test]
    fn pwc_examples() {
        assert_eq!(pwc_rad_bound(1000, 1), 0.0);
        assert!((pwc_rad_bound(100, 5) - (2.0 * 401f64.ln() / 100.0).sqrt()).abs() < 1e-15);
        assert!((pwc_rad_bound(100, 5) - 0.3463).abs() < 1e-4);
    }

    #[test]
    fn hoeffding_examples() {
        let s = hoeffding_slack(6000, 0.005);
        assert!((s - 0.0210).abs() < 1e-4);
        assert!(s <= REFERENCE_SLACK);
        assert_eq!(hoeffding_slack(10, 1.0), 0.0);
        let ratio = hoeffding_slack(4000, 0.05) / hoeffding_slack(1000, 0.05);
        assert!((ratio - 0.5).abs() < 1e-12);
    }

    #[test]
    fn worst_case_large_scale() {
        let b = worst_case_bound(70_000_000, 400, 7314, 0.01).unwrap();
        assert!((0.08..=0.12).contains(&b), "{b}");
        let vacuous = worst_case_bound(100_000, 200, 6341, 0.01).unwrap();
        assert!(vacuous > 1.0);
        assert!((vacuous - 2.33).abs() < 0.01, "{vacuous}");
    }

    #[test]
    fn worst_case_halves_when_n_quadruples() {
        let a = worst_case_bound(70_000_000, 400, 7314, 0.01).unwrap();
        let b = worst_case_bound(280_000_000, 400, 7314, 0.01).unwrap();
        assert!((b / a - 0.5).abs() < 0.05 * 0.5);
    }

    #[test]
    fn worst_case_argument_checks() {
        assert!(worst_case_bound(10, 1, 5, 0.01).is_err());
        assert!(worst_case_bound(10, 5, 0, 0.01).is_err());
        assert!(worst_case_bound(10, 5, 5, 1.0).is_err());
    }

    /// ln of an exact big integer, via its leading 64 bits.
    fn big_ln(x: &BigUint) -> f64 {
        let bits = x.bits();
        let shift = bits.saturating_sub(64);
        let top = (x >> shift).to_u64_digits().first().copied().unwrap_or(0);
        (top as f64).ln() + shift as f64 * std::f64::consts::LN_2
    }

    #[test]
    fn worst_case_log_space_agrees_with_exact_integers() {
        for n_vars in 2u64..=10 {
            for kappa in 1u64..=10 {
                for n in [1u64, 7, 1000, 123_456_789] {
                    let e = 2 * (kappa + 1) as u32;
                    let exact = BigUint::from(n) * (BigUint::from(n_vars).pow(e) - 1u32) + 1u32;
                    let want = big_ln(&exact);
                    let got = worst_case_log_pieces(n, n_vars, kappa).unwrap();
                    assert!(
                        ((got - want) / want).abs() < 1e-10,
                        "n_vars={n_vars} kappa={kappa} N={n}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn log_space_threshold_is_continuous() {
        // 2(κ+1) ln n crosses 40 between κ = 8 and κ = 9 for n = 8.
        let below = worst_case_log_pieces(1000, 8, 8).unwrap();
        let above = worst_case_log_pieces(1000, 8, 9).unwrap();
        let step = 2.0 * 8f64.ln();
        assert!((above - below - step).abs() < 1e-12);
    }

    #[test]
    fn srm_reference_mode_single_j() {
        let inputs = BoundInputs {
            n: 10_000,
            delta: 0.01,
            n_vars: 20,
            kappa: 100,
            profile: profile(&[(1, 0.0)], 6000),
        };
        let r = srm_bound(&inputs, 1..=1, BoundMode::Reference).unwrap();
        let want = 2.0 * (1.0 / 40.0) + (2.0 / 10_000.0 * ((20.0 * PI).powi(2) / 3.0).ln()).sqrt();
        assert_eq!(r.best_j, 1);
        assert!((r.value - want).abs() < 1e-15);
    }

    #[test]
    fn reference_mode_matches_generic_at_reference_constants() {
        // (20πj)²/3 = 2(πj)²/(3·0.005); only the slack differs.
        let inputs = BoundInputs {
            n: 50_000,
            delta: 0.01,
            n_vars: 20,
            kappa: 100,
            profile: profile(&[(1, 0.2), (2, 0.1), (3, 0.05)], 6000),
        };
        for j in 1..=3 {
            let p = srm_term(&inputs, j, BoundMode::Reference).unwrap();
            let g = srm_term(&inputs, j, BoundMode::Generic).unwrap();
            let slack_diff = 2.0 * (REFERENCE_SLACK - hoeffding_slack(6000, 0.005));
            assert!((p - g - slack_diff).abs() < 1e-12);
        }
    }

    #[test]
    fn srm_interior_minimizer_matches_scan() {
        let values: Vec<(usize, f64)> = (1..=10)
            .map(|j| (j, (0.5 - 0.1 * j as f64).max(0.0)))
            .collect();
        let inputs = BoundInputs {
            n: 10_000,
            delta: 0.01,
            n_vars: 20,
            kappa: 100,
            profile: profile(&values, 500),
        };
        for mode in [BoundMode::Generic, BoundMode::Reference] {
            let r = srm_bound(&inputs, 1..=10, mode).unwrap();
            let scan: Vec<f64> = (1..=10)
                .map(|j| srm_term(&inputs, j, mode).unwrap())
                .collect();
            let (arg, min) = scan
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
                );
            assert_eq!(r.value, min);
            assert_eq!(r.best_j, arg + 1);
            assert!(r.best_j > 1 && r.best_j < 10, "{r:?}");
            assert!(scan.iter().all(|&v| r.value <= v));
        }
    }

    #[test]
    fn srm_errors() {
        let inputs = BoundInputs {
            n: 100,
            delta: 0.01,
            n_vars: 20,
            kappa: 10,
            profile: profile(&[(1, 0.3), (2, 0.1)], 10),
        };
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 2..=1;
        assert!(srm_bound(&inputs, empty, BoundMode::Generic).is_err());
        assert!(srm_bound(&inputs, 1..=3, BoundMode::Generic).is_err());
        let mut bad = inputs.clone();
        bad.profile = profile(&[(1, 0.1), (2, 0.3)], 10);
        assert!(srm_bound(&bad, 1..=2, BoundMode::Generic).is_err());
        bad.profile = profile(&[(1, 1.5)], 10);
        assert!(srm_bound(&bad, 1..=1, BoundMode::Generic).is_err());
    }

    #[test]
    fn baseline_reference_values() {
        for j_star in [2214u64, 296, 2224] {
            let mut prev = f64::INFINITY;
            for k in 0..=14 {
                let n = 10u64.pow(2) * 2u64.pow(k);
                let b =
                    baseline_bound(n, j_star, REFERENCE_BASELINE_FLOOR, REFERENCE_DELTA).unwrap();
                assert!(b.is_finite() && b > 2.0 * 0.023 && b < prev);
                prev = b;
            }
        }
        let b = baseline_bound(10_000, 2214, REFERENCE_BASELINE_FLOOR, REFERENCE_DELTA).unwrap();
        assert!((b - 0.214_242_889_695_960_1).abs() < 1e-9);
    }

    #[test]
    fn bounds_decrease_in_n() {
        let p = profile(&[(1, 0.3), (2, 0.2), (3, 0.1), (4, 0.0)], 50);
        let settings = CurveSettings {
            delta: 0.05,
            n_vars: 12,
            kappa: 30,
            profile: p,
            j_range: 1..=4,
            mode: BoundMode::Generic,
        };
        let schedule: Vec<u64> = (3..=40)
            .map(|k| (1.5f64.powi(k) as u64).max(8))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let curve = BoundCurve::compute(&schedule, &settings).unwrap();
        for w in curve.rows.windows(2) {
            assert!(w[1].worst_case < w[0].worst_case);
            assert!(w[1].srm < w[0].srm);
            assert!(w[1].baseline < w[0].baseline);
        }
        for j in 1..=4 {
            let single = CurveSettings {
                j_range: j..=j,
                ..settings.clone()
            };
            let c = BoundCurve::compute(&[1000], &single).unwrap();
            let inputs = BoundInputs {
                n: 1000,
                delta: 0.05,
                n_vars: 12,
                kappa: 30,
                profile: settings.profile.clone(),
            };
            assert_eq!(
                c.rows[0].srm,
                srm_term(&inputs, j, BoundMode::Generic).unwrap()
            );
        }
    }

    #[test]
    fn curve_csv_round_trip() {
        let settings = CurveSettings {
            delta: 0.01,
            n_vars: 20,
            kappa: 50,
            profile: profile(&[(1, 0.25), (2, 0.125)], 40),
            j_range: 1..=2,
            mode: BoundMode::Reference,
        };
        let curve = BoundCurve::compute(&[100, 1000, 100_000], &settings).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("N,worst_case,srm,srm_best_j,baseline\n"));
        let back = BoundCurve::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, curve);
        assert!(BoundCurve::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(BoundCurve::compute(&[10, 10], &settings).is_err());
    }
}
