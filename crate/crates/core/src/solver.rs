//! Branch-and-bound for binary integer programs.
//!
//! Programs are in the normal form `max c·z  s.t.  A z ≤ b,  z ∈ [0,1]^n`,
//! with a subset of the variables required to be binary. LP relaxations are
//! solved by a dense bounded-variable primal simplex. Branching uses strong
//! branching: both child LPs of every fractional candidate are solved and the
//! candidate maximizing `(1 - r)·score₁ + r·score₂` is chosen.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `≤` constraint in sparse form: `Σ coef[k]·z[idx[k]] ≤ b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub idx: Vec<usize>,
    pub coef: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IpRepr")]
pub struct IntegerProgram {
    n: usize,
    m: usize,
    c: Vec<f64>,
    rows: Vec<Row>,
    binary: Vec<usize>,
}

#[derive(Deserialize)]
struct IpRepr {
    n: usize,
    m: usize,
    c: Vec<f64>,
    rows: Vec<Row>,
    binary: Vec<usize>,
}

impl TryFrom<IpRepr> for IntegerProgram {
    type Error = Error;

    fn try_from(r: IpRepr) -> Result<Self> {
        if r.n != r.c.len() || r.m != r.rows.len() {
            return Err(Error::argument(format!(
                "header says n={}, m={} but c has {} entries and there are {} rows",
                r.n,
                r.m,
                r.c.len(),
                r.rows.len()
            )));
        }
        IntegerProgram::new(r.c, r.rows, r.binary)
    }
}

impl IntegerProgram {
    /// Builds a program; `binary` is sorted and must hold distinct indices.
    pub fn new(c: Vec<f64>, rows: Vec<Row>, mut binary: Vec<usize>) -> Result<Self> {
        let n = c.len();
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("objective has non-finite entries"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.idx.len() != row.coef.len() {
                return Err(Error::argument(format!(
                    "row {i}: idx and coef lengths differ"
                )));
            }
            if let Some(&j) = row.idx.iter().find(|&&j| j >= n) {
                return Err(Error::argument(format!(
                    "row {i}: variable {j} out of range"
                )));
            }
            if !row.b.is_finite() || row.coef.iter().any(|v| !v.is_finite()) {
                return Err(Error::argument(format!("row {i}: non-finite data")));
            }
        }
        binary.sort_unstable();
        if binary.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::argument("duplicate binary index"));
        }
        if binary.last().is_some_and(|&j| j >= n) {
            return Err(Error::argument("binary index out of range"));
        }
        Ok(IntegerProgram {
            n,
            m: rows.len(),
            c,
            rows,
            binary,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn binary(&self) -> &[usize] {
        &self.binary
    }

    /// `c·z` summed in index order.
    pub fn objective(&self, z: &[f64]) -> f64 {
        self.c.iter().zip(z).map(|(c, z)| c * z).sum()
    }

    /// Whether `z` satisfies every row to within `tol`.
    pub fn is_feasible(&self, z: &[f64], tol: f64) -> bool {
        self.rows.iter().all(|row| {
            let lhs: f64 = row.idx.iter().zip(&row.coef).map(|(&j, a)| a * z[j]).sum();
            lhs <= row.b + tol
        })
    }

    fn l1_norm(&self) -> f64 {
        self.c.iter().map(|v| v.abs()).sum()
    }
}

/// Partial assignment: `None` leaves a variable free in `[0, 1]`.
pub type Fixings = Vec<Option<bool>>;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
}

impl LpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal(s) => Some(s.value),
            LpOutcome::Infeasible => None,
        }
    }
}

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;
const DEGENERATE_STREAK: usize = 50;

/// Solves the LP relaxation with `fixings` substituted.
pub fn solve_lp(ip: &IntegerProgram, fixings: &[Option<bool>]) -> Result<LpOutcome> {
    if fixings.len() != ip.n {
        return Err(Error::argument(format!(
            "fixings has length {}, program has {} variables",
            fixings.len(),
            ip.n
        )));
    }
    if let Some(j) =
        (0..ip.n).find(|&j| fixings[j].is_some() && ip.binary.binary_search(&j).is_err())
    {
        return Err(Error::argument(format!(
            "variable {j} is fixed but not binary"
        )));
    }
    let free: Vec<usize> = (0..ip.n).filter(|&j| fixings[j].is_none()).collect();
    let mut col_of = vec![usize::MAX; ip.n];
    for (k, &j) in free.iter().enumerate() {
        col_of[j] = k;
    }

    let mut dense_rows = Vec::new();
    let mut rhs = Vec::new();
    for row in &ip.rows {
        let mut a = vec![0.0; free.len()];
        let mut b = row.b;
        for (&j, &coef) in row.idx.iter().zip(&row.coef) {
            match fixings[j] {
                None => a[col_of[j]] += coef,
                Some(true) => b -= coef,
                Some(false) => {}
            }
        }
        if a.iter().all(|&v| v == 0.0) {
            if b < -PHASE1_TOL {
                return Ok(LpOutcome::Infeasible);
            }
            continue;
        }
        dense_rows.push(a);
        rhs.push(b);
    }

    let obj: Vec<f64> = free.iter().map(|&j| ip.c[j]).collect();
    let Some(x_free) = Simplex::new(free.len(), &dense_rows, &rhs).solve(&obj)? else {
        return Ok(LpOutcome::Infeasible);
    };
    let mut point: Vec<f64> = fixings
        .iter()
        .map(|f| if *f == Some(true) { 1.0 } else { 0.0 })
        .collect();
    for (k, &j) in free.iter().enumerate() {
        point[j] = x_free[k];
    }
    Ok(LpOutcome::Optimal(LpSolution {
        value: ip.objective(&point),
        point,
    }))
}

/// Dense tableau for `max obj·x  s.t.  A x ≤ b,  0 ≤ x ≤ 1`.
///
/// Columns are the structural variables, one slack per row, then one
/// artificial per row with negative right-hand side.
struct Simplex {
    m: usize,
    cols: usize,
    structural: usize,
    artificial_start: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
    x: Vec<f64>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    basic: Vec<bool>,
    barred: Vec<bool>,
    bland: bool,
    degenerate: usize,
    iterations: usize,
}

enum Step {
    Optimal,
    Moved,
}

impl Simplex {
    fn new(k: usize, a: &[Vec<f64>], b: &[f64]) -> Self {
        let m = a.len();
        let n_art = b.iter().filter(|&&v| v < 0.0).count();
        let cols = k + m + n_art;
        let mut t = vec![0.0; m * cols];
        let mut basis = vec![0; m];
        let mut x = vec![0.0; cols];
        let mut next_art = k + m;
        for i in 0..m {
            let row = &mut t[i * cols..(i + 1) * cols];
            let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..k {
                row[j] = sign * a[i][j];
            }
            row[k + i] = sign;
            if b[i] < 0.0 {
                row[next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            } else {
                basis[i] = k + i;
            }
            x[basis[i]] = sign * b[i];
        }
        let mut upper = vec![f64::INFINITY; cols];
        upper[..k].fill(1.0);
        let mut basic = vec![false; cols];
        for &j in &basis {
            basic[j] = true;
        }
        Simplex {
            m,
            cols,
            structural: k,
            artificial_start: k + m,
            t,
            basis,
            x,
            upper,
            at_upper: vec![false; cols],
            basic,
            barred: vec![false; cols],
            bland: false,
            degenerate: 0,
            iterations: 0,
        }
    }

    /// Returns the structural part of an optimal vertex, or `None` when
    /// infeasible.
    fn solve(mut self, obj: &[f64]) -> Result<Option<Vec<f64>>> {
        if self.artificial_start < self.cols {
            let mut phase1 = vec![0.0; self.cols];
            phase1[self.artificial_start..].fill(-1.0);
            self.optimize(&phase1)?;
            let infeasibility: f64 = self.x[self.artificial_start..].iter().sum();
            if infeasibility > PHASE1_TOL {
                return Ok(None);
            }
            for j in self.artificial_start..self.cols {
                self.upper[j] = 0.0;
                self.barred[j] = true;
                if !self.basic[j] {
                    self.x[j] = 0.0;
                }
            }
        }
        let mut full = vec![0.0; self.cols];
        full[..self.structural].copy_from_slice(obj);
        self.optimize(&full)?;
        Ok(Some(
            self.x[..self.structural]
                .iter()
                .map(|v| v.clamp(0.0, 1.0))
                .collect(),
        ))
    }

    fn optimize(&mut self, obj: &[f64]) -> Result<()> {
        let cap = 200 * (self.cols + self.m) + 1000;
        loop {
            if let Step::Optimal = self.step(obj)? {
                return Ok(());
            }
            self.iterations += 1;
            if self.iterations > cap {
                return Err(Error::Numerical(format!(
                    "simplex exceeded {cap} iterations ({} rows, {} columns)",
                    self.m, self.cols
                )));
            }
        }
    }

    fn reduced_costs(&self, obj: &[f64]) -> Vec<f64> {
        let mut d = obj.to_vec();
        for (i, &bi) in self.basis.iter().enumerate() {
            let cb = obj[bi];
            if cb != 0.0 {
                let row = &self.t[i * self.cols..(i + 1) * self.cols];
                for (dj, tij) in d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        d
    }

    #[allow(clippy::needless_range_loop)]
    fn step(&mut self, obj: &[f64]) -> Result<Step> {
        let d = self.reduced_costs(obj);
        let mut entering: Option<(usize, f64)> = None;
        for j in 0..self.cols {
            if self.basic[j] || self.barred[j] {
                continue;
            }
            let gain = if self.at_upper[j] { -d[j] } else { d[j] };
            if gain <= OPT_TOL {
                continue;
            }
            if self.bland {
                entering = Some((j, gain));
                break;
            }
            if entering.is_none_or(|(_, g)| gain > g) {
                entering = Some((j, gain));
            }
        }
        let Some((q, _)) = entering else {
            return Ok(Step::Optimal);
        };
        let s = if self.at_upper[q] { -1.0 } else { 1.0 };

        // Ratio test: (row, step, leaves at upper bound).
        let mut leave: Option<(usize, f64, bool)> = None;
        for i in 0..self.m {
            let alpha = s * self.t[i * self.cols + q];
            let bi = self.basis[i];
            let (limit, to_upper) = if alpha > PIVOT_TOL {
                (self.x[bi] / alpha, false)
            } else if alpha < -PIVOT_TOL && self.upper[bi].is_finite() {
                ((self.upper[bi] - self.x[bi]) / -alpha, true)
            } else {
                continue;
            };
            let limit = limit.max(0.0);
            let better = match leave {
                None => true,
                Some((r, best, _)) => {
                    if limit < best - 1e-12 {
                        true
                    } else if limit > best + 1e-12 {
                        false
                    } else if self.bland {
                        bi < self.basis[r]
                    } else {
                        let cur = self.t[r * self.cols + q].abs();
                        let a = alpha.abs();
                        a > cur || (a == cur && bi < self.basis[r])
                    }
                }
            };
            if better {
                leave = Some((i, limit, to_upper));
            }
        }

        let flip = self.upper[q];
        let theta = match leave {
            Some((_, lim, _)) if lim < flip => lim,
            _ if flip.is_finite() => flip,
            _ => {
                return Err(Error::Numerical(
                    "unbounded LP direction in a box-bounded problem".into(),
                ))
            }
        };
        if theta <= 1e-12 {
            self.degenerate += 1;
            if self.degenerate > DEGENERATE_STREAK {
                self.bland = true;
            }
        } else {
            self.degenerate = 0;
        }

        for i in 0..self.m {
            let bi = self.basis[i];
            self.x[bi] -= s * theta * self.t[i * self.cols + q];
        }
        self.x[q] += s * theta;

        match leave {
            Some((r, lim, to_upper)) if lim < flip => {
                let out = self.basis[r];
                self.x[out] = if to_upper { self.upper[out] } else { 0.0 };
                self.at_upper[out] = to_upper;
                self.basic[out] = false;
                self.basic[q] = true;
                self.basis[r] = q;
                self.pivot(r, q);
            }
            _ => {
                self.at_upper[q] = !self.at_upper[q];
                self.x[q] = if self.at_upper[q] { self.upper[q] } else { 0.0 };
            }
        }
        Ok(Step::Moved)
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let p = self.t[r * cols + q];
        for v in &mut self.t[r * cols..(r + 1) * cols] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * cols..(r + 1) * cols].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * cols + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * cols..(i + 1) * cols];
            for (v, pr) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            row[q] = 0.0;
        }
    }
}

/// Variable-scoring rules over child-LP objective changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScoringRule {
    /// Largest change.
    L,
    /// Smallest change.
    S,
    /// `L/6 + 5·S/6`.
    A,
    /// Product with each change floored at `1e-6`.
    P,
}

pub const PRODUCT_FLOOR: f64 = 1e-6;

impl ScoringRule {
    /// Scores a candidate from its two objective drops.
    pub fn score(self, down: f64, up: f64) -> f64 {
        let hi = down.max(up);
        let lo = down.min(up);
        match self {
            ScoringRule::L => hi,
            ScoringRule::S => lo,
            ScoringRule::A => hi / 6.0 + 5.0 * lo / 6.0,
            ScoringRule::P => down.max(PRODUCT_FLOOR) * up.max(PRODUCT_FLOOR),
        }
    }
}

impl fmt::Display for ScoringRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScoringRule::L => "L",
            ScoringRule::S => "S",
            ScoringRule::A => "A",
            ScoringRule::P => "P",
        };
        f.write_str(s)
    }
}

impl FromStr for ScoringRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "L" | "l" => Ok(ScoringRule::L),
            "S" | "s" => Ok(ScoringRule::S),
            "A" | "a" => Ok(ScoringRule::A),
            "P" | "p" => Ok(ScoringRule::P),
            other => Err(Error::argument(format!(
                "unknown scoring rule {other:?} (expected L, S, A or P)"
            ))),
        }
    }
}

/// An ordered pair of scoring rules, written `"L-S"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RulePair(pub ScoringRule, pub ScoringRule);

impl fmt::Display for RulePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

impl FromStr for RulePair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(['-', ','])
            .ok_or_else(|| Error::argument(format!("rule pair {s:?} should look like L-S")))?;
        Ok(RulePair(a.parse()?, b.parse()?))
    }
}

impl TryFrom<String> for RulePair {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RulePair> for String {
    fn from(p: RulePair) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodePolicy {
    /// Highest LP bound first; ties in creation order.
    #[default]
    BestBound,
    /// Most recently created first; the `z = 1` child is explored before
    /// `z = 0`.
    DepthFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnbConfig {
    pub rules: RulePair,
    pub r: f64,
    pub kappa: u64,
    #[serde(default)]
    pub node_policy: NodePolicy,
    #[serde(default = "default_fathom_tol")]
    pub fathom_tol: f64,
    #[serde(default = "default_int_tol")]
    pub int_tol: f64,
}

fn default_fathom_tol() -> f64 {
    1e-9
}

fn default_int_tol() -> f64 {
    1e-6
}

impl BnbConfig {
    pub fn new(rules: RulePair, r: f64, kappa: u64) -> Self {
        BnbConfig {
            rules,
            r,
            kappa,
            node_policy: NodePolicy::default(),
            fathom_tol: default_fathom_tol(),
            int_tol: default_int_tol(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::argument(format!(
                "mixture weight r = {} outside [0, 1]",
                self.r
            )));
        }
        if self.kappa == 0 {
            return Err(Error::argument("kappa must be >= 1"));
        }
        Ok(())
    }

    /// `(1 - r)·score₁ + r·score₂`, or exactly `score₁` when both rules agree.
    pub fn combined_score(&self, down: f64, up: f64) -> f64 {
        let s1 = self.rules.0.score(down, up);
        if self.rules.0 == self.rules.1 {
            return s1;
        }
        let s2 = self.rules.1.score(down, up);
        (1.0 - self.r) * s1 + self.r * s2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnbResult {
    pub tree_size: u64,
    pub capped: bool,
    pub incumbent_value: Option<f64>,
    pub incumbent_solution: Option<Vec<f64>>,
    /// `min(tree_size, κ) / κ`.
    pub normalized: f64,
    /// Branching variable of every branched node, in expansion order.
    pub branching: Vec<usize>,
}

/// Memoized LP relaxations keyed by fixings.
///
/// LP solutions depend only on the program and the fixings, so one cache can
/// be shared by every run on the same program.
#[derive(Debug, Default)]
pub struct LpCache {
    map: HashMap<Fixings, LpOutcome>,
}

impl LpCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn solve(&mut self, ip: &IntegerProgram, fixings: &Fixings) -> Result<LpOutcome> {
        if let Some(hit) = self.map.get(fixings) {
            return Ok(hit.clone());
        }
        let out = solve_lp(ip, fixings)?;
        self.map.insert(fixings.clone(), out.clone());
        Ok(out)
    }
}

/// Objective drops of a branching candidate's two children.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub var: usize,
    /// `c̆ - c̆(z_var = 0)`, or the infeasibility sentinel.
    pub down: f64,
    /// `c̆ - c̆(z_var = 1)`, or the infeasibility sentinel.
    pub up: f64,
    pub score: f64,
}

/// Objective drop assigned to an infeasible child: `2(‖c‖₁ + 1)`.
pub fn infeasible_sentinel(ip: &IntegerProgram) -> f64 {
    2.0 * (ip.l1_norm() + 1.0)
}

/// Unfixed binaries that are fractional at `point`, in index order.
pub fn fractional_candidates(
    ip: &IntegerProgram,
    fixings: &[Option<bool>],
    point: &[f64],
    int_tol: f64,
) -> Vec<usize> {
    ip.binary
        .iter()
        .copied()
        .filter(|&j| fixings[j].is_none() && (point[j] - point[j].round()).abs() > int_tol)
        .collect()
}

/// Strong-branching scores for every fractional candidate at a node.
///
/// An empty result means the node's LP optimum is integral on the binaries.
pub fn branch_scores(
    ip: &IntegerProgram,
    fixings: &Fixings,
    lp: &LpSolution,
    config: &BnbConfig,
    cache: &mut LpCache,
) -> Result<Vec<Candidate>> {
    let sentinel = infeasible_sentinel(ip);
    let mut out = Vec::new();
    let mut child = fixings.clone();
    for var in fractional_candidates(ip, fixings, &lp.point, config.int_tol) {
        let mut drop = |val: bool, child: &mut Fixings| -> Result<f64> {
            child[var] = Some(val);
            let d = match cache.solve(ip, child)? {
                LpOutcome::Optimal(s) => (lp.value - s.value).max(0.0),
                LpOutcome::Infeasible => sentinel,
            };
            child[var] = None;
            Ok(d)
        };
        let down = drop(false, &mut child)?;
        let up = drop(true, &mut child)?;
        out.push(Candidate {
            var,
            down,
            up,
            score: config.combined_score(down, up),
        });
    }
    Ok(out)
}

struct Node {
    fixings: Fixings,
    bound: f64,
    seq: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

enum Frontier {
    Best(BinaryHeap<Node>),
    Depth(Vec<Node>),
}

impl Frontier {
    fn push(&mut self, node: Node) {
        match self {
            Frontier::Best(h) => h.push(node),
            Frontier::Depth(s) => s.push(node),
        }
    }

    fn pop(&mut self) -> Option<Node> {
        match self {
            Frontier::Best(h) => h.pop(),
            Frontier::Depth(s) => s.pop(),
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Frontier::Best(h) => h.is_empty(),
            Frontier::Depth(s) => s.is_empty(),
        }
    }
}

pub fn branch_and_bound(ip: &IntegerProgram, config: &BnbConfig) -> Result<BnbResult> {
    branch_and_bound_cached(ip, config, &mut LpCache::new())
}

/// [`branch_and_bound`] reusing LP relaxations from `cache`, which must only
/// ever have been used with `ip`.
pub fn branch_and_bound_cached(
    ip: &IntegerProgram,
    config: &BnbConfig,
    cache: &mut LpCache,
) -> Result<BnbResult> {
    config.validate()?;
    let mut frontier = match config.node_policy {
        NodePolicy::BestBound => Frontier::Best(BinaryHeap::new()),
        NodePolicy::DepthFirst => Frontier::Depth(Vec::new()),
    };
    frontier.push(Node {
        fixings: vec![None; ip.n],
        bound: f64::INFINITY,
        seq: 0,
    });
    let mut seq = 1u64;
    let mut tree_size = 0u64;
    let mut capped = false;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut branching = Vec::new();

    while let Some(node) = frontier.pop() {
        if tree_size == config.kappa {
            capped = true;
            break;
        }
        tree_size += 1;
        let LpOutcome::Optimal(lp) = cache.solve(ip, &node.fixings)? else {
            continue;
        };
        if let Some((best, _)) = &incumbent {
            if lp.value <= best + config.fathom_tol {
                continue;
            }
        }
        let candidates = branch_scores(ip, &node.fixings, &lp, config, cache)?;
        if candidates.is_empty() {
            let mut z = lp.point.clone();
            for &j in &ip.binary {
                z[j] = z[j].round();
            }
            let value = ip.objective(&z);
            if incumbent.as_ref().is_none_or(|(best, _)| value > *best) {
                incumbent = Some((value, z));
            }
            continue;
        }
        let mut chosen = &candidates[0];
        for cand in &candidates[1..] {
            if cand.score > chosen.score {
                chosen = cand;
            }
        }
        let var = chosen.var;
        branching.push(var);
        for (val, drop) in [(false, chosen.down), (true, chosen.up)] {
            let mut fixings = node.fixings.clone();
            fixings[var] = Some(val);
            frontier.push(Node {
                fixings,
                bound: lp.value - drop,
                seq,
            });
            seq += 1;
        }
    }
    debug_assert!(!capped || !frontier.is_empty() || tree_size == config.kappa);

    let (incumbent_value, incumbent_solution) = match incumbent {
        Some((v, z)) => (Some(v), Some(z)),
        None => (None, None),
    };
    Ok(BnbResult {
        tree_size,
        capped,
        incumbent_value,
        incumbent_solution,
        normalized: tree_size.min(config.kappa) as f64 / config.kappa as f64,
        branching,
    })
}
