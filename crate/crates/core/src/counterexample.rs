//! The cosine family `f_r(x) = ½(1 + cos(rx))`, `r ∈ (0, γ^p]`,
//! `x ≥ 1/(2γ^p)`.
//!
//! Every dual `r ↦ f_r(x)` is within L^p distance `γ` of the constant `½`,
//! yet the family shatters geometric samples `x_i = α^{-i}/(2γ^p)` well
//! enough that its empirical Rademacher complexity reaches any `c < ½`.
//! This module evaluates both sides numerically.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rademacher::vector_set_rad_exact;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineFamily {
    gamma: f64,
    p: f64,
}

impl CosineFamily {
    pub fn new(gamma: f64, p: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 0.25) {
            return Err(Error::argument(format!(
                "gamma must satisfy 0 < gamma < 1/4, got {gamma}"
            )));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::argument(format!(
                "p must be a finite value >= 1, got {p}"
            )));
        }
        Ok(CosineFamily { gamma, p })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Upper end `t = γ^p` of the parameter interval.
    pub fn t(&self) -> f64 {
        self.gamma.powf(self.p)
    }

    /// Smallest example `1/(2γ^p)`.
    pub fn x_min(&self) -> f64 {
        0.5 / self.t()
    }

    fn check_x(&self, x: f64) -> Result<()> {
        if !(x >= self.x_min() && x.is_finite()) {
            return Err(Error::domain(format!(
                "x = {x} below the example space start {}",
                self.x_min()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, r: f64, x: f64) -> Result<f64> {
        if !(r > 0.0 && r <= self.t()) {
            return Err(Error::domain(format!("r = {r} outside (0, {}]", self.t())));
        }
        self.check_x(x)?;
        Ok(0.5 * (1.0 + (r * x).cos()))
    }
}

const QUAD_REL_TOL: f64 = 1e-8;
const MAX_SIMPSON_DEPTH: u32 = 48;
/// Above this many periods the integral is reduced modulo the period `π`.
const PERIODIC_REDUCTION_PERIODS: f64 = 1e4;

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let diff = left + right - whole;
    if diff.abs() <= 15.0 * tol {
        return Ok(left + right + diff / 15.0);
    }
    if depth == 0 {
        return Err(Error::Numerical(format!(
            "adaptive Simpson did not converge on [{a}, {b}] (residual {diff:e}, tolerance {tol:e})"
        )));
    }
    Ok(
        simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?,
    )
}

/// `∫_a^b f` by adaptive Simpson on `pieces` equal subintervals, each to
/// absolute tolerance `tol_per_piece`.
fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    pieces: usize,
    tol_per_piece: f64,
) -> Result<f64> {
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for k in 0..pieces {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == pieces { b } else { lo + h };
        let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let whole = simpson(fa, fm, fb, hi - lo);
        total += simpson_rec(
            f,
            lo,
            hi,
            fa,
            fm,
            fb,
            whole,
            tol_per_piece,
            MAX_SIMPSON_DEPTH,
        )?;
    }
    Ok(total)
}

/// `∫_0^u |½ cos v|^p dv` to relative tolerance `1e-8`.
pub fn cosine_power_integral(p: f64, u: f64) -> Result<f64> {
    if !(u >= 0.0 && u.is_finite()) {
        return Err(Error::argument(format!(
            "upper limit must be finite and >= 0, got {u}"
        )));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    let f = |v: f64| (0.5 * v.cos()).abs().powf(p);
    // Mean of the integrand over one period, for scaling the tolerance.
    let mean = adaptive_simpson(&f, 0.0, PI, 64, 1e-6 * 0.5f64.powf(p))? / PI;
    let periods = u / PI;
    let per_unit_tol = QUAD_REL_TOL * 0.1 * mean;
    if periods > PERIODIC_REDUCTION_PERIODS {
        let whole = periods.floor();
        let rest = u - whole * PI;
        let one = adaptive_simpson(&f, 0.0, PI, 4, per_unit_tol * PI / 4.0)?;
        let tail_pieces = 4 * ((rest / PI).ceil() as usize).max(1);
        let tail = adaptive_simpson(
            &f,
            0.0,
            rest,
            tail_pieces,
            per_unit_tol * rest / tail_pieces as f64,
        )?;
        return Ok(whole * one + tail);
    }
    let pieces = 4 * (periods.ceil() as usize).max(1);
    adaptive_simpson(&f, 0.0, u, pieces, per_unit_tol * u / pieces as f64)
}

/// `‖f*_x - ½‖_p` over `r ∈ (0, γ^p]`.
///
/// `p = 2` uses the closed form `¼ sqrt(2t + sin(2tx)/x)`; other `p` use
/// quadrature after substituting `v = rx`.
pub fn lp_approx_error(fam: &CosineFamily, x: f64) -> Result<f64> {
    fam.check_x(x)?;
    let t = fam.t();
    if fam.p == 2.0 {
        return Ok(0.25 * (2.0 * t + (2.0 * t * x).sin() / x).sqrt());
    }
    lp_approx_error_quadrature(fam, x)
}

/// [`lp_approx_error`] by quadrature for every `p`, including `p = 2`.
pub fn lp_approx_error_quadrature(fam: &CosineFamily, x: f64) -> Result<f64> {
    fam.check_x(x)?;
    let integral = cosine_power_integral(fam.p, fam.t() * x)? / x;
    Ok(integral.powf(1.0 / fam.p))
}

/// `sup_r |f_r(x) - ½|` over `(0, t]`, evaluated on a uniform grid plus the
/// maximizers `r = kπ/x`.
pub fn linf_gap(fam: &CosineFamily, x: f64) -> Result<f64> {
    fam.check_x(x)?;
    let t = fam.t();
    let g = |r: f64| (0.5 * (r * x).cos()).abs();
    let mut best = g(t);
    let periods = (t * x / PI).floor();
    if periods >= 1.0 {
        // The first maximizer is enough; the rest repeat it.
        best = best.max(g(PI / x));
    }
    let pieces = 4 * ((t * x / PI).ceil() as usize).clamp(1, 1 << 16);
    for k in 1..=pieces {
        best = best.max(g(t * k as f64 / pieces as f64));
    }
    Ok(best)
}

/// Largest power of ½ strictly below `min{1/(2π+1), arccos(2c)/(π+arccos(2c))}`.
pub fn admissible_alpha(c: f64) -> Result<f64> {
    if !(c > 0.0 && c < 0.5) {
        return Err(Error::argument(format!(
            "c must satisfy 0 < c < 1/2, got {c}"
        )));
    }
    let a = (2.0 * c).acos();
    let bound = (1.0 / (2.0 * PI + 1.0)).min(a / (PI + a));
    let mut alpha = 0.5;
    while alpha >= bound {
        alpha *= 0.5;
    }
    Ok(alpha)
}

/// Points `x_i = α^{-i}/(2γ^p)`, `i = 1..=N`, on which the family reaches
/// correlation `c` with every sign pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialSample {
    pub family: CosineFamily,
    pub c: f64,
    pub alpha: f64,
    pub points: Vec<f64>,
}

/// Exhaustive demonstrations are limited to `2^16` sign patterns.
pub const DEMO_MAX_N: usize = 16;
/// Upper limit on `N` for single constructions, keeping `α^{-N}` finite.
pub const SAMPLE_MAX_N: usize = 60;

impl AdversarialSample {
    pub fn new(family: CosineFamily, n: usize, c: f64) -> Result<Self> {
        let alpha = admissible_alpha(c)?;
        Self::with_alpha(family, n, c, alpha)
    }

    /// Uses a caller-chosen `α`, which must be a power of ½ below the
    /// admissibility bound.
    pub fn with_alpha(family: CosineFamily, n: usize, c: f64, alpha: f64) -> Result<Self> {
        let largest = admissible_alpha(c)?;
        if n == 0 || n > SAMPLE_MAX_N {
            return Err(Error::argument(format!(
                "N must lie in 1..={SAMPLE_MAX_N}, got {n}"
            )));
        }
        let is_power_of_half = alpha > 0.0 && alpha < 1.0 && alpha.log2().fract() == 0.0;
        if !is_power_of_half || alpha > largest {
            return Err(Error::argument(format!(
                "alpha = {alpha} must be a power of 1/2 no larger than {largest}"
            )));
        }
        let points = (1..=n)
            .map(|i| alpha.powi(-(i as i32)) * family.x_min())
            .collect();
        Ok(AdversarialSample {
            family,
            c,
            alpha,
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `b_i = 0` for `σ_i = +1`, else `1`.
    fn bits(&self, sigma: &[i8]) -> Result<Vec<u8>> {
        if sigma.len() != self.len() {
            return Err(Error::argument(format!(
                "sign vector has length {}, sample has {}",
                sigma.len(),
                self.len()
            )));
        }
        sigma
            .iter()
            .map(|&s| match s {
                1 => Ok(0),
                -1 => Ok(1),
                other => Err(Error::argument(format!(
                    "signs must be +1 or -1, got {other}"
                ))),
            })
            .collect()
    }

    /// `r₀ = 2πγ^p (Σ_j α^j b_j + α^{N+1})`.
    pub fn r0(&self, sigma: &[i8]) -> Result<f64> {
        let b = self.bits(sigma)?;
        let n = self.len();
        let mut sum = self.alpha.powi(n as i32 + 1);
        for j in (1..=n).rev() {
            sum += self.alpha.powi(j as i32) * b[j - 1] as f64;
        }
        let r0 = 2.0 * PI * self.family.t() * sum;
        if !(r0 > 0.0 && r0 <= self.family.t()) {
            return Err(Error::Construction(format!(
                "r0 = {r0} left (0, {}] for alpha = {}",
                self.family.t(),
                self.alpha
            )));
        }
        Ok(r0)
    }

    /// `f_{r₀}(x_i)` for every `i`.
    ///
    /// `r₀ x_i = π φ_i` with `φ_i ≡ b_i + Σ_{j>i} α^{j-i} b_j + α^{N+1-i}`
    /// modulo 2, since the `j < i` terms are even integers. Evaluating
    /// `cos(πφ_i)` avoids the cancellation in `cos(r₀ x_i)` at large `x_i`.
    pub fn values_at_r0(&self, sigma: &[i8]) -> Result<Vec<f64>> {
        let b = self.bits(sigma)?;
        let n = self.len();
        Ok((1..=n)
            .map(|i| {
                let mut phase = self.alpha.powi((n + 1 - i) as i32);
                for j in (i + 1..=n).rev() {
                    phase += self.alpha.powi((j - i) as i32) * b[j - 1] as f64;
                }
                phase += b[i - 1] as f64;
                0.5 * (1.0 + (PI * phase).cos())
            })
            .collect())
    }

    /// Smallest margin `σ_i f_{r₀}(x_i) - (c + σ_i/2)` over `i`; negative
    /// means the construction failed for this `σ`.
    pub fn margin(&self, sigma: &[i8]) -> Result<f64> {
        let vals = self.values_at_r0(sigma)?;
        Ok(sigma
            .iter()
            .zip(&vals)
            .map(|(&s, &f)| {
                let s = s as f64;
                s * f - (self.c + s / 2.0)
            })
            .fold(f64::INFINITY, f64::min))
    }
}

/// `r₀` for `σ`, failing with a construction error unless every
/// `σ_i f_{r₀}(x_i) ≥ c + σ_i/2`.
pub fn adversarial_r0(sample: &AdversarialSample, sigma: &[i8]) -> Result<f64> {
    let r0 = sample.r0(sigma)?;
    let margin = sample.margin(sigma)?;
    if margin < 0.0 {
        return Err(Error::Construction(format!(
            "sign pattern {sigma:?} misses the target by {}",
            -margin
        )));
    }
    Ok(r0)
}

fn sign_vector(bits: u64, n: usize) -> Vec<i8> {
    (0..n)
        .map(|i| if bits >> i & 1 == 1 { -1 } else { 1 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadDemo {
    pub gamma: f64,
    pub p: f64,
    pub n: usize,
    pub c: f64,
    pub alpha: f64,
    /// `(1/N) 2^{-N} Σ_σ Σ_i σ_i f_{r₀(σ)}(x_i)`.
    pub value: f64,
    /// Smallest per-`σ`, per-`i` margin.
    pub min_margin: f64,
}

/// Averages the construction's correlation over all `2^N` sign vectors.
///
/// Fails with a construction error if any per-`σ` inequality fails or the
/// value leaves `[c, ½]`.
pub fn rad_lower_demo(fam: &CosineFamily, n: usize, c: f64) -> Result<RadDemo> {
    if n == 0 || n > DEMO_MAX_N {
        return Err(Error::argument(format!(
            "N must lie in 1..={DEMO_MAX_N}, got {n}"
        )));
    }
    let sample = AdversarialSample::new(*fam, n, c)?;
    let mut total = 0.0;
    let mut min_margin = f64::INFINITY;
    for bits in 0..1u64 << n {
        let sigma = sign_vector(bits, n);
        sample.r0(&sigma)?;
        let vals = sample.values_at_r0(&sigma)?;
        let margin = sample.margin(&sigma)?;
        if margin < 0.0 {
            return Err(Error::Construction(format!(
                "sign pattern {sigma:?} misses the target by {}",
                -margin
            )));
        }
        min_margin = min_margin.min(margin);
        total += sigma
            .iter()
            .zip(&vals)
            .map(|(&s, &f)| s as f64 * f)
            .sum::<f64>();
    }
    let value = total / (n as f64 * (1u64 << n) as f64);
    if !(value >= c && value <= 0.5) {
        return Err(Error::Construction(format!(
            "demonstrated complexity {value} outside [{c}, 1/2]"
        )));
    }
    Ok(RadDemo {
        gamma: fam.gamma,
        p: fam.p,
        n,
        c,
        alpha: sample.alpha,
        value,
        min_margin,
    })
}

/// Empirical Rademacher complexity of the constant class `{½}` on `n`
/// points.
pub fn constant_class_complexity(n: usize) -> Result<f64> {
    vector_set_rad_exact(&[vec![0.5; n]], n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxCheck {
    pub gamma: f64,
    pub p: f64,
    pub x: f64,
    pub error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoCheck {
    #[serde(flatten)]
    pub demo: RadDemo,
    /// Mean L^p approximation error over the demo's sample points.
    pub mean_lp_error: f64,
    /// Smallest `sup_r |f_r(x_i) - ½|` over the sample points.
    pub min_linf_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub approximation: Vec<ApproxCheck>,
    pub demos: Vec<DemoCheck>,
    pub constant_class_complexity: f64,
    pub all_pass: bool,
}

/// Multiples of `x_min` checked in the approximation sweep.
pub const SWEEP_MULTIPLES: [f64; 6] = [1.0, 2.0, 5.0, 10.0, 100.0, 1e4];

pub fn run_suite(gammas: &[f64], ps: &[f64], ns: &[usize], cs: &[f64]) -> Result<SuiteReport> {
    let families = gammas
        .iter()
        .flat_map(|&g| ps.iter().map(move |&p| CosineFamily::new(g, p)))
        .collect::<Result<Vec<_>>>()?;
    for &n in ns {
        if n == 0 || n > DEMO_MAX_N {
            return Err(Error::argument(format!(
                "N must lie in 1..={DEMO_MAX_N}, got {n}"
            )));
        }
    }
    for &c in cs {
        admissible_alpha(c)?;
    }

    let mut approximation = Vec::new();
    for fam in &families {
        for m in SWEEP_MULTIPLES {
            let x = m * fam.x_min();
            let error = lp_approx_error(fam, x)?;
            approximation.push(ApproxCheck {
                gamma: fam.gamma,
                p: fam.p,
                x,
                error,
                pass: error < fam.gamma,
            });
        }
    }

    let mut demos = Vec::new();
    for fam in &families {
        for &n in ns {
            for &c in cs {
                let demo = rad_lower_demo(fam, n, c)?;
                let sample = AdversarialSample::new(*fam, n, c)?;
                let mut lp_sum = 0.0;
                let mut min_gap = f64::INFINITY;
                for &x in &sample.points {
                    lp_sum += lp_approx_error(fam, x)?;
                    min_gap = min_gap.min(linf_gap(fam, x)?);
                }
                let mean_lp_error = lp_sum / n as f64;
                let pass = demo.value >= c
                    && demo.value <= 0.5
                    && mean_lp_error < fam.gamma
                    && min_gap >= 0.5 - 1e-6;
                demos.push(DemoCheck {
                    demo,
                    mean_lp_error,
                    min_linf_gap: min_gap,
                    pass,
                });
            }
        }
    }

    let max_n = ns.iter().copied().max().unwrap_or(1);
    let constant_class_complexity = constant_class_complexity(max_n)?;
    let all_pass = approximation.iter().all(|a| a.pass)
        && demos.iter().all(|d| d.pass)
        && constant_class_complexity == 0.0;
    Ok(SuiteReport {
        approximation,
        demos,
        constant_class_complexity,
        all_pass,
    })
}
