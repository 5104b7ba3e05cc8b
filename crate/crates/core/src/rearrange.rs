//! Constructive martingale rearrangement of a coupling.
//!
//! Mass is exchanged between rows of the coupling without touching either
//! marginal. When a row with a negative barycentre deviation charges a point
//! below a point charged by a row with a positive deviation, a single switch
//! moves mass between them. Otherwise a chain of rows that are already
//! martingale bridges the gap and a cascade of switches along the chain shifts
//! barycentre mass from one end to the other while leaving the interior
//! barycentres unchanged.
//!
//! Every movement is recorded, so the trace doubles as a certificate: it
//! induces a bicausal plan with identity outer plan whose cost is at most the
//! reported bound.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::measures::{
    classify, convex_order, locate, AtomDeviation, BarycentreClass, BarycentreReport, DiscreteCoupling,
};
use crate::nested::{project_to_martingale, BicausalPlan};
use crate::transport::TransportPlan;

/// Locations closer than this compare as equal in chain construction.
pub const ORDER_EPS: f64 = 1e-12;
/// A withdrawal within this much of the cell's mass empties the cell.
const MASS_SNAP: f64 = 1e-15;
/// Barycentre deviation below which no final projection is run.
const SNAP_FLOOR: f64 = 1e-14;

/// One switch: row `x1_minus` moves `lambda` from `x2_minus` up to
/// `x2_plus`, row `x1_plus` moves `lambda` from `x2_plus` down to `x2_minus`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchRecord {
    pub x1_minus: f64,
    pub x1_plus: f64,
    pub x2_minus: f64,
    pub x2_plus: f64,
    pub lambda: f64,
}

impl SwitchRecord {
    pub fn gap(&self) -> f64 {
        self.x2_plus - self.x2_minus
    }

    /// Nested (p = 1) cost of the two movements.
    pub fn moved_cost(&self) -> f64 {
        2.0 * self.lambda * self.gap()
    }

    /// `(row, from, to, mass)` for both movements.
    fn movements(&self) -> [(f64, f64, f64, f64); 2] {
        [
            (self.x1_minus, self.x2_minus, self.x2_plus, self.lambda),
            (self.x1_plus, self.x2_plus, self.x2_minus, self.lambda),
        ]
    }
}

/// Chain bridging the positive side to the negative side.
///
/// `t1 = (x1_plus, x1^{0,1}, ..., x1^{0,m}, x1_minus)` and
/// `t2 = (x2_plus, x2^{0,1,-}, x2^{0,1,+}, ..., x2^{0,m,-}, x2^{0,m,+}, x2_minus)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExchangeTuples {
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub m: usize,
    /// Set when a greedy pick or an interleaving comparison was decided by an
    /// equality at [`ORDER_EPS`].
    pub ties: bool,
}

impl ExchangeTuples {
    pub fn x2_plus(&self) -> f64 {
        self.t2[0]
    }

    pub fn x2_minus(&self) -> f64 {
        *self.t2.last().unwrap()
    }

    /// Upper point of node `k` (node 0 is `x1_plus`).
    fn upper(&self, k: usize) -> f64 {
        if k == 0 {
            self.t2[0]
        } else {
            self.t2[2 * k]
        }
    }

    /// Lower point of node `k` (node `m + 1` is `x1_minus`).
    fn lower(&self, k: usize) -> f64 {
        if k == self.m + 1 {
            self.x2_minus()
        } else {
            self.t2[2 * k - 1]
        }
    }

    /// `d_k = upper(k) - lower(k + 1)` for the `m + 1` links.
    pub fn link_gaps(&self) -> Vec<f64> {
        (0..=self.m).map(|k| self.upper(k) - self.lower(k + 1)).collect()
    }

    /// Checks the interleaving order
    /// `x2^{0,1,-} < x2^+ <= x2^{0,2,-} < x2^{0,1,+} <= ... <= x2^- < x2^{0,m,+}`
    /// and `x2^{0,i,-} < x1^{0,i} < x2^{0,i,+}`.
    pub fn is_interleaved(&self) -> bool {
        let m = self.m;
        if self.t1.len() != m + 2 || self.t2.len() != 2 * m + 2 {
            return false;
        }
        let lt = |a: f64, b: f64| a < b - ORDER_EPS;
        let le = |a: f64, b: f64| a <= b + ORDER_EPS;
        for k in 1..=m {
            if !(lt(self.lower(k), self.t1[k]) && lt(self.t1[k], self.upper(k))) {
                return false;
            }
        }
        // link k: lower(k + 1) < upper(k); separation: upper(k) <= lower(k + 2)
        for k in 0..=m {
            if !lt(self.lower(k + 1), self.upper(k)) {
                return false;
            }
            if k + 2 <= m + 1 && !le(self.upper(k), self.lower(k + 2)) {
                return false;
            }
        }
        true
    }
}

/// Which cap fixed the cascade mass `a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    PlusEndpoint,
    MinusEndpoint,
    /// Donor cell `(x1, x2)` of link `link`.
    Link { link: usize, x1: f64, x2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeRecord {
    pub tuples: ExchangeTuples,
    /// Barycentre mass moved across every link.
    pub a: f64,
    pub binding: Binding,
    /// Per-link switches, from the positive end toward the negative end.
    pub links: Vec<SwitchRecord>,
}

impl CascadeRecord {
    /// `2 (m + 1) a`.
    pub fn cost(&self) -> f64 {
        2.0 * (self.tuples.m as f64 + 1.0) * self.a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Step {
    Switch {
        #[serde(flatten)]
        record: SwitchRecord,
        epsilon_after: f64,
    },
    Cascade {
        #[serde(flatten)]
        cascade: CascadeRecord,
        epsilon_after: f64,
    },
}

impl Step {
    /// Cost charged to the bound: `2 lambda d` or `2 (m + 1) a`.
    pub fn cost(&self) -> f64 {
        match self {
            Self::Switch { record, .. } => record.moved_cost(),
            Self::Cascade { cascade, .. } => cascade.cost(),
        }
    }

    pub fn epsilon_after(&self) -> f64 {
        match self {
            Self::Switch { epsilon_after, .. } | Self::Cascade { epsilon_after, .. } => *epsilon_after,
        }
    }

    fn switches(&self) -> Vec<&SwitchRecord> {
        match self {
            Self::Switch { record, .. } => vec![record],
            Self::Cascade { cascade, .. } => cascade.links.iter().collect(),
        }
    }
}

/// `(minus row, plus row, minus column, plus column)`
type Cells = (usize, usize, usize, usize);

/// Dense working copy of a coupling.
#[derive(Debug, Clone)]
struct Work {
    x1: Vec<f64>,
    y: Vec<f64>,
    w1: Vec<f64>,
    mass: Vec<Vec<f64>>,
}

impl Work {
    fn new(pi: &DiscreteCoupling) -> Self {
        let g = pi.to_grid();
        Self {
            w1: pi.first_marginal().weights().to_vec(),
            x1: g.x1,
            y: g.x2,
            mass: g.mass,
        }
    }

    fn coupling(&self) -> Result<DiscreteCoupling> {
        DiscreteCoupling::from_grid(&self.x1, &self.y, &self.mass)
    }

    fn row(&self, x1: f64) -> Result<usize> {
        locate(&self.x1, x1).ok_or_else(|| invalid(format!("{x1} is not a first-coordinate atom")))
    }

    fn col(&self, x2: f64) -> Result<usize> {
        locate(&self.y, x2).ok_or_else(|| invalid(format!("{x2} is not a second-coordinate atom")))
    }

    fn wdev(&self, i: usize) -> f64 {
        let x = self.x1[i];
        self.mass[i].iter().zip(&self.y).map(|(m, y)| m * (y - x)).sum()
    }

    fn lo(&self, i: usize) -> usize {
        self.mass[i].iter().position(|&m| m > 0.0).expect("row has mass")
    }

    fn hi(&self, i: usize) -> usize {
        self.mass[i].iter().rposition(|&m| m > 0.0).expect("row has mass")
    }

    fn report(&self, tol: f64) -> BarycentreReport {
        let mut epsilon = 0.0;
        let per_atom = (0..self.x1.len())
            .map(|i| {
                let wd = self.wdev(i);
                epsilon += wd.abs();
                let deviation = wd / self.w1[i];
                AtomDeviation {
                    x1: self.x1[i],
                    mass: self.w1[i],
                    deviation,
                    class: classify(deviation, tol),
                }
            })
            .collect();
        BarycentreReport {
            per_atom,
            epsilon,
            tol_mart: tol,
        }
    }

    fn mv(&mut self, i: usize, from: usize, to: usize, amount: f64) {
        let avail = self.mass[i][from];
        let amt = if amount >= avail - MASS_SNAP { avail } else { amount };
        self.mass[i][from] -= amt;
        self.mass[i][to] += amt;
    }

    fn apply(&mut self, rec: &SwitchRecord) -> Result<()> {
        for (x1, from, to, m) in rec.movements() {
            let (i, a, b) = (self.row(x1)?, self.col(from)?, self.col(to)?);
            self.mv(i, a, b, m);
        }
        Ok(())
    }

    /// Case-(1) pair: the largest `x1_minus` that has one, a partner
    /// `x1_plus > x1_minus` when there is one (this keeps the dispersion
    /// tails nonnegative), then the widest gap, then the largest `x1_plus`.
    fn find_pair(&self, rep: &BarycentreReport) -> Option<(usize, usize, usize, usize)> {
        let rows = |c: BarycentreClass| -> Vec<usize> {
            (0..self.x1.len()).rev().filter(|&i| rep.per_atom[i].class == c).collect()
        };
        let (minus, plus) = (rows(BarycentreClass::Minus), rows(BarycentreClass::Plus));
        for &im in &minus {
            let jm = self.lo(im);
            let mut best: Option<(bool, f64, Cells)> = None;
            for &ip in &plus {
                let jp = self.hi(ip);
                let gap = self.y[jp] - self.y[jm];
                if gap <= ORDER_EPS {
                    continue;
                }
                let above = self.x1[ip] > self.x1[im];
                let better = match best {
                    None => true,
                    Some((b_above, g, _)) => (above && !b_above) || (above == b_above && gap > g + ORDER_EPS),
                };
                if better {
                    best = Some((above, gap, (im, ip, jm, jp)));
                }
            }
            if let Some((_, _, t)) = best {
                return Some(t);
            }
        }
        None
    }

    fn switch(&mut self, im: usize, ip: usize, jm: usize, jp: usize, lambda: Option<f64>) -> Result<SwitchRecord> {
        let d = self.y[jp] - self.y[jm];
        if d <= 0.0 {
            return Err(invalid("switch needs x2_minus < x2_plus"));
        }
        let (cell_m, cell_p) = (self.mass[im][jm], self.mass[ip][jp]);
        if cell_m <= 0.0 || cell_p <= 0.0 {
            return Err(invalid("switch endpoints must carry mass"));
        }
        let lambda = match lambda {
            Some(l) if !(l >= 0.0 && l <= cell_m.min(cell_p) + MASS_SNAP) => {
                return Err(invalid(format!("lambda {l} is negative or exceeds the available mass")));
            }
            Some(l) => l,
            None => {
                let l = (-self.wdev(im) / d).min(cell_m).min(self.wdev(ip) / d).min(cell_p);
                if !(l > 0.0) {
                    return Err(Error::Degenerate("every switch cap is zero".into()));
                }
                l
            }
        };
        let rec = SwitchRecord {
            x1_minus: self.x1[im],
            x1_plus: self.x1[ip],
            x2_minus: self.y[jm],
            x2_plus: self.y[jp],
            lambda,
        };
        if lambda > 0.0 {
            self.mv(im, jm, jp, lambda);
            self.mv(ip, jp, jm, lambda);
        }
        Ok(rec)
    }

    /// Endpoints and the greedy furthest-reach chain through martingale rows.
    fn exchange_tuples(&self, rep: &BarycentreReport) -> Result<(ExchangeTuples, Vec<usize>)> {
        let n = self.x1.len();
        let class = |i: usize| rep.per_atom[i].class;
        // largest x1 wins ties
        let mut plus_end: Option<(usize, usize)> = None;
        let mut minus_end: Option<(usize, usize)> = None;
        for i in (0..n).rev() {
            match class(i) {
                BarycentreClass::Plus => {
                    let j = self.hi(i);
                    if plus_end.is_none_or(|(_, bj)| self.y[j] > self.y[bj]) {
                        plus_end = Some((i, j));
                    }
                }
                BarycentreClass::Minus => {
                    let j = self.lo(i);
                    if minus_end.is_none_or(|(_, bj)| self.y[j] < self.y[bj]) {
                        minus_end = Some((i, j));
                    }
                }
                BarycentreClass::Zero => {}
            }
        }
        let (Some((ip, jp)), Some((im, jm))) = (plus_end, minus_end) else {
            return Err(Error::NoChain("one side of the deviation classes is empty".into()));
        };
        let target = self.y[jm];
        let mut reach = self.y[jp];
        let mut used = vec![false; n];
        let mut chain = Vec::new();
        let mut ties = false;
        while reach <= target + ORDER_EPS {
            let mut pick: Option<(usize, f64)> = None;
            for i in 0..n {
                if used[i] || class(i) != BarycentreClass::Zero {
                    continue;
                }
                let (l, h) = (self.y[self.lo(i)], self.y[self.hi(i)]);
                if (l - reach).abs() <= ORDER_EPS || (h - reach).abs() <= ORDER_EPS {
                    ties = true;
                }
                if l < reach - ORDER_EPS && h > reach + ORDER_EPS {
                    match pick {
                        Some((_, bh)) if (h - bh).abs() <= ORDER_EPS => ties = true,
                        Some((_, bh)) if h < bh => {}
                        _ => pick = Some((i, h)),
                    }
                }
            }
            let Some((i, h)) = pick else {
                return Err(Error::NoChain(format!(
                    "no martingale row reaches past {reach} toward {target}; marginals may not be in convex order"
                )));
            };
            used[i] = true;
            chain.push(i);
            reach = h;
        }
        if (reach - target).abs() <= 10.0 * ORDER_EPS {
            ties = true;
        }
        let mut t1 = vec![self.x1[ip]];
        let mut t2 = vec![self.y[jp]];
        for &i in &chain {
            t1.push(self.x1[i]);
            t2.push(self.y[self.lo(i)]);
            t2.push(self.y[self.hi(i)]);
        }
        t1.push(self.x1[im]);
        t2.push(target);
        let mut nodes = vec![ip];
        nodes.extend(&chain);
        nodes.push(im);
        Ok((
            ExchangeTuples {
                t1,
                t2,
                m: chain.len(),
                ties,
            },
            nodes,
        ))
    }

    fn cascade(&mut self, tuples: &ExchangeTuples) -> Result<CascadeRecord> {
        let m = tuples.m;
        let nodes: Vec<usize> = tuples.t1.iter().map(|&x| self.row(x)).collect::<Result<_>>()?;
        let upper: Vec<usize> = (0..=m).map(|k| self.col(tuples.upper(k))).collect::<Result<_>>()?;
        let lower: Vec<usize> = (1..=m + 1).map(|k| self.col(tuples.lower(k))).collect::<Result<_>>()?;
        let gaps = tuples.link_gaps();
        if gaps.iter().any(|&d| d <= 0.0) {
            return Err(invalid("exchange tuples have a non-positive link gap"));
        }
        let (ip, im) = (nodes[0], nodes[m + 1]);
        let mut a = self.wdev(ip);
        let mut binding = Binding::PlusEndpoint;
        if -self.wdev(im) < a {
            a = -self.wdev(im);
            binding = Binding::MinusEndpoint;
        }
        for k in 0..=m {
            for (row, col) in [(nodes[k], upper[k]), (nodes[k + 1], lower[k])] {
                let cap = gaps[k] * self.mass[row][col];
                if cap < a {
                    a = cap;
                    binding = Binding::Link {
                        link: k,
                        x1: self.x1[row],
                        x2: self.y[col],
                    };
                }
            }
        }
        if !(a > 0.0) {
            return Err(Error::Degenerate(format!("cascade mass is zero, bound by {binding:?}")));
        }
        let links: Vec<SwitchRecord> = (0..=m)
            .map(|k| SwitchRecord {
                x1_minus: self.x1[nodes[k + 1]],
                x1_plus: self.x1[nodes[k]],
                x2_minus: self.y[lower[k]],
                x2_plus: self.y[upper[k]],
                lambda: a / gaps[k],
            })
            .collect();
        for rec in &links {
            self.apply(rec)?;
        }
        Ok(CascadeRecord {
            tuples: tuples.clone(),
            a,
            binding,
            links,
        })
    }
}

/// Applies one switch to `pi`. Without `lambda` the mass moved is the largest
/// that neither overshoots either barycentre nor empties a cell below zero:
/// `min(mu(x1m)|dev(x1m)|/d, pi(x1m, x2m), mu(x1p)dev(x1p)/d, pi(x1p, x2p))`
/// with `d = x2p - x2m`.
pub fn switch_assignment(
    pi: &DiscreteCoupling,
    x1m: f64,
    x1p: f64,
    x2m: f64,
    x2p: f64,
    lambda: Option<f64>,
) -> Result<(DiscreteCoupling, SwitchRecord)> {
    let mut w = Work::new(pi);
    let (im, ip, jm, jp) = (w.row(x1m)?, w.row(x1p)?, w.col(x2m)?, w.col(x2p)?);
    let rec = w.switch(im, ip, jm, jp, lambda)?;
    if rec.lambda == 0.0 {
        return Ok((pi.clone(), rec));
    }
    Ok((w.coupling()?, rec))
}

/// A case-(1) quadruple `(x1m, x1p, x2m, x2p)`: a negative row charging a
/// point strictly below a point charged by a positive row.
pub fn find_switch_pair(pi: &DiscreteCoupling, report: &BarycentreReport) -> Option<(f64, f64, f64, f64)> {
    let w = Work::new(pi);
    w.find_pair(report)
        .map(|(im, ip, jm, jp)| (w.x1[im], w.x1[ip], w.y[jm], w.y[jp]))
}

pub fn find_exchange_tuples(pi: &DiscreteCoupling, report: &BarycentreReport) -> Result<ExchangeTuples> {
    Work::new(pi).exchange_tuples(report).map(|(t, _)| t)
}

/// Runs the switches of a cascade along `tuples`.
pub fn cascade(pi: &DiscreteCoupling, tuples: &ExchangeTuples) -> Result<(DiscreteCoupling, CascadeRecord)> {
    let mut w = Work::new(pi);
    let rec = w.cascade(tuples)?;
    Ok((w.coupling()?, rec))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RearrangementResult {
    /// Martingale coupling with the input's marginals.
    pub output: DiscreteCoupling,
    pub trace: Vec<Step>,
    /// Sum of step costs plus the value of the final projection, if any.
    pub cost_bound: f64,
    pub epsilon_initial: f64,
    /// `max |atom|` of the second marginal.
    pub support_radius: f64,
    /// Coupling reached by the trace before the final projection.
    pub pre_snap: DiscreteCoupling,
    /// Projection from `pre_snap` to `output`, when one was needed.
    pub snap: Option<(f64, BicausalPlan)>,
    /// A single switch became available again after a cascade.
    pub case1_after_case2: bool,
}

impl RearrangementResult {
    pub fn steps(&self) -> usize {
        self.trace.len()
    }

    /// `cost_bound / epsilon_initial`, when the input is not a martingale.
    pub fn ratio(&self) -> Option<f64> {
        (self.epsilon_initial > 0.0).then(|| self.cost_bound / self.epsilon_initial)
    }

    pub fn cascades(&self) -> impl Iterator<Item = &CascadeRecord> {
        self.trace.iter().filter_map(|s| match s {
            Step::Cascade { cascade, .. } => Some(cascade),
            Step::Switch { .. } => None,
        })
    }
}

/// Step-by-step driver; [`rearrange`] runs it to completion.
#[derive(Debug, Clone)]
pub struct Rearranger {
    input: DiscreteCoupling,
    work: Work,
    tol: f64,
    trace: Vec<Step>,
    in_case2: bool,
    case1_after_case2: bool,
    cap: usize,
    done: bool,
}

impl Rearranger {
    pub fn new(pi: &DiscreteCoupling, tol_mart: f64) -> Result<Self> {
        if !convex_order(pi.first_marginal(), pi.second_marginal()) {
            return Err(Error::ConvexOrder("rearrangement needs marginals in convex order".into()));
        }
        let n = pi.len();
        Ok(Self {
            input: pi.clone(),
            work: Work::new(pi),
            tol: tol_mart,
            trace: Vec::new(),
            in_case2: false,
            case1_after_case2: false,
            cap: n * n * n,
            done: false,
        })
    }

    pub fn report(&self) -> BarycentreReport {
        self.work.report(self.tol)
    }

    pub fn coupling(&self) -> Result<DiscreteCoupling> {
        self.work.coupling()
    }

    pub fn trace(&self) -> &[Step] {
        &self.trace
    }

    /// Performs one step; `None` once the coupling is martingale up to the
    /// tolerance.
    pub fn step(&mut self) -> Result<Option<&Step>> {
        if self.done {
            return Ok(None);
        }
        let rep = self.report();
        if rep.epsilon <= self.tol || rep.count(BarycentreClass::Plus) == 0 || rep.count(BarycentreClass::Minus) == 0
        {
            self.done = true;
            return Ok(None);
        }
        if self.trace.len() >= self.cap {
            return Err(Error::Invariant(format!("rearrangement exceeded {} iterations", self.cap)));
        }
        let step = match self.work.find_pair(&rep) {
            Some((im, ip, jm, jp)) => {
                self.case1_after_case2 |= self.in_case2;
                let record = self.work.switch(im, ip, jm, jp, None)?;
                Step::Switch {
                    record,
                    epsilon_after: self.work.report(self.tol).epsilon,
                }
            }
            None => {
                self.in_case2 = true;
                let (tuples, _) = self.work.exchange_tuples(&rep)?;
                let cascade = self.work.cascade(&tuples)?;
                Step::Cascade {
                    cascade,
                    epsilon_after: self.work.report(self.tol).epsilon,
                }
            }
        };
        self.trace.push(step);
        Ok(self.trace.last())
    }

    pub fn finish(mut self) -> Result<RearrangementResult> {
        while self.step()?.is_some() {}
        let epsilon_initial = Work::new(&self.input).report(self.tol).epsilon;
        let pre_snap = self.work.coupling()?;
        let mut cost_bound = self.trace.iter().map(Step::cost).fold(0.0, |a, c| a + c);
        let (output, snap) = if self.report().epsilon > SNAP_FLOOR {
            let proj = project_to_martingale(&pre_snap)?;
            cost_bound += proj.value;
            (proj.projected, Some((proj.value, proj.plan)))
        } else {
            (pre_snap.clone(), None)
        };
        let support_radius = self
            .input
            .second_marginal()
            .atoms()
            .iter()
            .fold(0.0f64, |acc, x| acc.max(x.abs()));
        Ok(RearrangementResult {
            output,
            trace: self.trace,
            cost_bound,
            epsilon_initial,
            support_radius,
            pre_snap,
            snap,
            case1_after_case2: self.case1_after_case2,
        })
    }
}

/// Rearranges `pi` into a martingale coupling with the same marginals.
pub fn rearrange(pi: &DiscreteCoupling, tol_mart: f64) -> Result<RearrangementResult> {
    Rearranger::new(pi, tol_mart)?.finish()
}

/// Assembles the bicausal plan certified by a rearrangement trace: identity
/// outer plan, inner plans composed from the recorded movements (split
/// proportionally over where the moved mass originally sat) and the final
/// projection.
pub fn trace_to_bicausal_plan(pi: &DiscreteCoupling, result: &RearrangementResult) -> Result<BicausalPlan> {
    let mismatch = |what: &str| Err(invalid(format!("trace does not belong to this coupling: {what}")));
    let mu = pi.first_marginal();
    let out = &result.output;
    if mu.atoms() != out.first_marginal().atoms() || pi.second_marginal().atoms() != out.second_marginal().atoms() {
        return mismatch("marginal supports differ");
    }
    let work = Work::new(pi);
    let (n1, ny) = (work.x1.len(), work.y.len());
    // flows[i][a][b]: mass of row i that started at y[a] and now sits at y[b]
    let mut flows: Vec<Vec<Vec<f64>>> = (0..n1)
        .map(|i| {
            let mut f = vec![vec![0.0; ny]; ny];
            for (a, &m) in work.mass[i].iter().enumerate() {
                f[a][a] = m;
            }
            f
        })
        .collect();
    for step in &result.trace {
        for rec in step.switches() {
            for (x1, from, to, amount) in rec.movements() {
                let (i, s, t) = (work.row(x1)?, work.col(from)?, work.col(to)?);
                let f = &mut flows[i];
                let cur: f64 = (0..ny).map(|a| f[a][s]).sum();
                if cur <= 0.0 {
                    return mismatch("a recorded movement draws from an empty cell");
                }
                let frac = (amount / cur).min(1.0);
                for row in f.iter_mut() {
                    let moved = row[s] * frac;
                    row[s] -= moved;
                    row[t] += moved;
                }
            }
        }
    }
    let pre = result.pre_snap.to_grid();
    for i in 0..n1 {
        for b in 0..ny {
            let cur: f64 = (0..ny).map(|a| flows[i][a][b]).sum();
            if (cur - pre.mass[i][b]).abs() > 1e-9 {
                return mismatch("replayed movements do not reproduce the recorded coupling");
            }
        }
    }
    if let Some((_, snap)) = &result.snap {
        for (i, ip) in snap.inner.iter().enumerate() {
            let mut next = vec![vec![0.0; ny]; ny];
            for (k, &src) in ip.plan.source.iter().enumerate() {
                let b = work.col(src)?;
                let row_total: f64 = ip.plan.mass[k].iter().sum();
                if row_total <= 0.0 {
                    continue;
                }
                for (t, &dst) in ip.plan.target.iter().enumerate() {
                    let share = ip.plan.mass[k][t] / row_total;
                    if share <= 0.0 {
                        continue;
                    }
                    let c = work.col(dst)?;
                    for a in 0..ny {
                        next[a][c] += flows[i][a][b] * share;
                    }
                }
            }
            flows[i] = next;
        }
    }
    let mut inner = Vec::with_capacity(n1);
    for i in 0..n1 {
        let w = mu.weights()[i];
        let source = pi.kernel()[i].atoms().to_vec();
        let target = out.kernel()[i].atoms().to_vec();
        let rows: Vec<usize> = source.iter().map(|&x| work.col(x)).collect::<Result<_>>()?;
        let cols: Vec<usize> = target.iter().map(|&x| work.col(x)).collect::<Result<_>>()?;
        let mass = rows
            .iter()
            .map(|&a| cols.iter().map(|&b| flows[i][a][b] / w).collect())
            .collect();
        inner.push(TransportPlan { source, target, mass });
    }
    Ok(BicausalPlan::diagonal(pi, inner, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{barycentre_report, is_martingale, DiscreteMeasure, DEFAULT_TOL_MART};

    fn family1(n: usize) -> DiscreteCoupling {
        let nf = n as f64;
        let h = 0.5 / nf;
        let mut pts = vec![(1.0, 1.0, h), (1.0, 2.0, h)];
        for i in 2..n {
            let x = i as f64;
            pts.extend([(x, x - 1.0, h), (x, x + 1.0, h)]);
        }
        pts.extend([(nf, nf - 1.0, h), (nf, nf, h)]);
        DiscreteCoupling::new(pts).unwrap()
    }

    fn anti() -> DiscreteCoupling {
        DiscreteCoupling::new([(0.0, 2.0, 0.5), (2.0, 0.0, 0.5)]).unwrap()
    }

    #[test]
    fn full_correction_switch() {
        let pi = anti();
        let rep = barycentre_report(&pi, DEFAULT_TOL_MART);
        assert_eq!(find_switch_pair(&pi, &rep), Some((2.0, 0.0, 0.0, 2.0)));
        let (out, rec) = switch_assignment(&pi, 2.0, 0.0, 0.0, 2.0, None).unwrap();
        assert_eq!(rec.lambda, 0.5);
        assert_eq!(out, DiscreteCoupling::identity(pi.first_marginal()));
    }

    #[test]
    fn zero_override_is_a_no_op() {
        let pi = anti();
        let (out, rec) = switch_assignment(&pi, 2.0, 0.0, 0.0, 2.0, Some(0.0)).unwrap();
        assert_eq!(out, pi);
        assert_eq!(rec.lambda, 0.0);
    }

    #[test]
    fn family1_n2_single_switch() {
        let r = rearrange(&family1(2), DEFAULT_TOL_MART).unwrap();
        assert_eq!(r.trace.len(), 1);
        assert!(matches!(&r.trace[0], Step::Switch { record, .. } if record.lambda == 0.25));
        assert!((r.cost_bound - 0.5).abs() < 1e-12);
        assert!(is_martingale(&r.output, 1e-12));
    }

    #[test]
    fn family1_n4_has_no_pair() {
        let pi = family1(4);
        let rep = barycentre_report(&pi, DEFAULT_TOL_MART);
        assert_eq!(find_switch_pair(&pi, &rep), None);
    }

    #[test]
    fn family1_n5_tuples_and_cascade() {
        let pi = family1(5);
        let rep = barycentre_report(&pi, DEFAULT_TOL_MART);
        let t = find_exchange_tuples(&pi, &rep).unwrap();
        assert_eq!(t.m, 3);
        assert_eq!(t.t1, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(t.t2, vec![2.0, 1.0, 3.0, 2.0, 4.0, 3.0, 5.0, 4.0]);
        assert!(t.is_interleaved());
        let (out, rec) = cascade(&pi, &t).unwrap();
        assert!((rec.a - 0.1).abs() < 1e-15);
        assert!((rec.cost() - 0.8).abs() < 1e-12);
        assert!(is_martingale(&out, 1e-12));
    }

    #[test]
    fn single_interior_bridge() {
        // X+ = {0} reaching up to 2, X- = {4} reaching down to 2, the row at 2 spans {1, 3}
        let s = 1.0 / 6.0;
        let pi = DiscreteCoupling::new([
            (0.0, -1.0, s),
            (0.0, 2.0, s),
            (2.0, 1.0, s),
            (2.0, 3.0, s),
            (4.0, 2.0, s),
            (4.0, 5.0, s),
        ])
        .unwrap();
        let rep = barycentre_report(&pi, DEFAULT_TOL_MART);
        assert_eq!(find_switch_pair(&pi, &rep), None);
        let t = find_exchange_tuples(&pi, &rep).unwrap();
        assert_eq!(t.m, 1);
        assert_eq!(t.t1, vec![0.0, 2.0, 4.0]);
        assert_eq!(t.t2, vec![2.0, 1.0, 3.0, 2.0]);
        assert!(t.is_interleaved());
    }

    #[test]
    fn endpoint_cap_binds() {
        // endpoint deviations are tiny compared with every link cap
        let third = 1.0 / 3.0;
        let pi = DiscreteCoupling::new([
            (0.0, -1.0, 0.22),
            (0.0, 2.0, third - 0.22),
            (2.0, 1.0, 0.5 * third),
            (2.0, 3.0, 0.5 * third),
            (4.0, 2.0, third - 0.22),
            (4.0, 5.0, 0.22),
        ])
        .unwrap();
        let rep = barycentre_report(&pi, DEFAULT_TOL_MART);
        let t = find_exchange_tuples(&pi, &rep).unwrap();
        let (out, rec) = cascade(&pi, &t).unwrap();
        assert!(matches!(rec.binding, Binding::PlusEndpoint | Binding::MinusEndpoint));
        let after = barycentre_report(&out, DEFAULT_TOL_MART);
        assert!(after.per_atom.iter().all(|a| a.class == BarycentreClass::Zero));
    }

    #[test]
    fn martingale_input_is_untouched() {
        let pi = DiscreteCoupling::product(&DiscreteMeasure::dirac(0.0), &DiscreteMeasure::new(&[-1.0, 1.0], &[0.5, 0.5]).unwrap());
        let r = rearrange(&pi, DEFAULT_TOL_MART).unwrap();
        assert!(r.trace.is_empty());
        assert_eq!(r.cost_bound, 0.0);
        assert_eq!(r.output, pi);
        let plan = trace_to_bicausal_plan(&pi, &r).unwrap();
        assert_eq!(plan.cost, 0.0);
    }

    #[test]
    fn family1_certificates() {
        for n in 2..=10 {
            let pi = family1(n);
            let r = rearrange(&pi, DEFAULT_TOL_MART).unwrap();
            let want = (n as f64 - 1.0) / n as f64;
            assert!((r.cost_bound - want).abs() < 1e-9, "n = {n}: {}", r.cost_bound);
            let plan = trace_to_bicausal_plan(&pi, &r).unwrap();
            plan.verify(&pi, &r.output, 1e-9).unwrap();
            assert!(plan.cost <= r.cost_bound + 1e-9);
        }
    }
}
