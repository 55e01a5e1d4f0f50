//! Monte Carlo harness tying simulation to the closed-form theory:
//! empirical delay CCDFs with distribution-free confidence bands,
//! bound-dominance checks, and exact sample-path verification of the
//! per-packet inequalities the service-curve results rest on.
//!
//! The sample-path checks are exact, not grid-approximate: every supremum /
//! infimum over a continuous variable is evaluated at the finitely many
//! candidate instants (arrival epochs, their left limits, endpoints) where a
//! step function can attain it. Tolerances exist only to absorb
//! floating-point rounding.

use std::fmt;
use std::path::Path;

use crate::bounds::DelayBound;
use crate::minplus::{BoundingFunction, Curve};
use crate::node_sim::{minplus_output, virtual_time, SimResult};
use crate::traffic::{
    generate_compound_poisson, sac_gap, sup_envelope_gap, CompoundPoissonSpec, FlowTag, Trace,
};
use crate::{Error, Result};

/// Relative tolerance of the exact sample-path checks: strictly a rounding
/// allowance, not a modeling slack.
pub const PATH_TOL: f64 = 1e-9;

/// Empirical tail estimate `p_hat(tau_j) = #{D > tau_j} / N` with a
/// two-sided DKW confidence band of half-width `sqrt(ln(2/delta) / (2N))`.
#[derive(Debug, Clone)]
pub struct EmpiricalCcdf {
    grid: Vec<f64>,
    p_hat: Vec<f64>,
    n: usize,
    halfwidth: f64,
}

impl EmpiricalCcdf {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn p_hat(&self) -> &[f64] {
        &self.p_hat
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    /// CSV export: `tau,p_emp,halfwidth,bound`.
    pub fn export_csv(&self, bound: &DelayBound, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["tau", "p_emp", "halfwidth", "bound"])?;
        for (tau, p) in self.grid.iter().zip(&self.p_hat) {
            w.write_record([
                tau.to_string(),
                p.to_string(),
                self.halfwidth.to_string(),
                bound.eval(*tau).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of one check: how many trials ran, how many violated the claimed
/// inequality, and the worst signed margin (positive = violation size).
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    pub worst_margin: f64,
    pub pass: bool,
    pub details: String,
}

impl CheckReport {
    fn new(name: impl Into<String>, trials: usize, violations: usize, worst_margin: f64) -> Self {
        CheckReport {
            name: name.into(),
            trials,
            violations,
            worst_margin,
            pass: violations == 0,
            details: String::new(),
        }
    }

    fn with_details(mut self, details: String) -> Self {
        self.details = details;
        self
    }

    /// Merge another report of the same kind into this one.
    pub fn absorb(&mut self, other: &CheckReport) {
        self.trials += other.trials;
        self.violations += other.violations;
        self.worst_margin = self.worst_margin.max(other.worst_margin);
        self.pass = self.pass && other.pass;
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check {}: trials={} violations={} worst_margin={:.3e} verdict={}",
            self.name,
            self.trials,
            self.violations,
            self.worst_margin,
            if self.pass { "PASS" } else { "FAIL" }
        )?;
        if !self.details.is_empty() {
            write!(f, " ({})", self.details)?;
        }
        Ok(())
    }
}

/// Drops a warm-up prefix (first 1% of samples, at least one packet when
/// there are enough) to reduce initial-idle bias in delay statistics.
pub fn discard_warmup(delays: &[f64]) -> &[f64] {
    if delays.len() < 100 {
        return delays;
    }
    &delays[delays.len() / 100..]
}

/// Empirical delay CCDF on `grid` with a DKW band at confidence `1 - delta`.
pub fn estimate_delay_ccdf(delays: &[f64], grid: &[f64], delta: f64) -> Result<EmpiricalCcdf> {
    if delays.is_empty() {
        return Err(Error::InvalidParameter("empty delay sample".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty CCDF grid".into()));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidGrid("CCDF grid must be strictly increasing".into()));
        }
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0,1), got {delta}")));
    }
    let mut sorted = delays.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("delay sample contains NaN"));
    let n = sorted.len();
    let p_hat: Vec<f64> = grid
        .iter()
        .map(|&tau| (n - sorted.partition_point(|&d| d <= tau)) as f64 / n as f64)
        .collect();
    let halfwidth = ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt();
    Ok(EmpiricalCcdf { grid: grid.to_vec(), p_hat, n, halfwidth })
}

/// Passes iff `p_hat(tau) - halfwidth <= bound(tau)` at every grid point.
pub fn check_dominance(emp: &EmpiricalCcdf, bound: &DelayBound) -> CheckReport {
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for (tau, p) in emp.grid.iter().zip(&emp.p_hat) {
        let margin = (p - emp.halfwidth) - bound.eval(*tau);
        worst = worst.max(margin);
        if margin > 0.0 {
            violations += 1;
        }
    }
    CheckReport::new(format!("dominance[{}]", bound.name()), emp.grid.len(), violations, worst)
        .with_details(format!("n={}, dkw_halfwidth={:.3e}", emp.n, emp.halfwidth))
}

fn rel_violates(lhs: f64, rhs: f64) -> bool {
    lhs > rhs + PATH_TOL * rhs.abs().max(1.0)
}

/// Sample-path check of the virtual-time comparison inequality
/// `A (x) beta (t) - A*(t) <= R (d_i - V_i(R)) + l_i` with `beta(t) = R t`
/// and `i = min{k : d_k >= t}`, for arbitrary `R > 0` under any scheduler.
/// Times past the last departure are skipped.
pub fn check_lemma1(
    trace: &Trace,
    sim: &SimResult,
    flow: FlowTag,
    rate: f64,
    times: &[f64],
) -> Result<CheckReport> {
    let beta = Curve::affine(0.0, rate)?;
    let v = virtual_time(trace, rate)?;
    let mut trials = 0;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for &t in times {
        let Some(i) = sim.index_at(flow, t) else { continue };
        trials += 1;
        let rec = sim.record(flow, i).expect("index_at returned a live index");
        let lhs = minplus_output(trace, &beta, t) - sim.departed_at(flow, t);
        let rhs = rate * (rec.departure - v[i - 1]) + rec.length;
        worst = worst.max(lhs - rhs);
        if rel_violates(lhs, rhs) {
            violations += 1;
        }
    }
    Ok(CheckReport::new("lemma-virtual-time-gap", trials, violations, worst))
}

/// Sample-path check of the single-flow shortfall bound
/// `A (x) beta (t) - A*(t) <= l_{i(t)}` with `beta(t) = C t`.
pub fn check_thm1_pathwise(
    trace: &Trace,
    sim: &SimResult,
    capacity: f64,
    times: &[f64],
) -> Result<CheckReport> {
    let beta = Curve::affine(0.0, capacity)?;
    let mut trials = 0;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for &t in times {
        let Some(i) = sim.index_at(FlowTag::Traversing, t) else { continue };
        trials += 1;
        let rec = sim.record(FlowTag::Traversing, i).expect("live index");
        let lhs = minplus_output(trace, &beta, t) - sim.departed_at(FlowTag::Traversing, t);
        let rhs = rec.length;
        worst = worst.max(lhs - rhs);
        if rel_violates(lhs, rhs) {
            violations += 1;
        }
    }
    Ok(CheckReport::new("single-flow-shortfall", trials, violations, worst))
}

fn empty_trace() -> Trace {
    Trace::new(Vec::new(), 0.0).expect("empty trace is valid")
}

/// Per-packet departure bound under cross traffic:
/// `d_i <= V_i(C - rc) + sup_{0<=s<=d_i} { A_c(s, d_i) - rc (d_i - s) } / (C - rc)`
/// for every traversing packet, under any scheduler.
pub fn check_lemma4(
    f_trace: &Trace,
    c_trace: Option<&Trace>,
    sim: &SimResult,
    capacity: f64,
    rc: f64,
) -> Result<CheckReport> {
    if !(rc >= 0.0) || rc >= capacity {
        return Err(Error::Precondition(format!(
            "needs 0 <= rc < capacity, got rc={rc}, capacity={capacity}"
        )));
    }
    let residual = capacity - rc;
    let envelope = Curve::affine(0.0, rc)?;
    let empty = empty_trace();
    let cross = c_trace.unwrap_or(&empty);
    let v = virtual_time(f_trace, residual)?;
    let mut trials = 0;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for rec in sim.flow_records(FlowTag::Traversing) {
        trials += 1;
        let sup = sup_envelope_gap(cross, &envelope, rec.departure).max(0.0);
        let rhs = v[rec.index - 1] + sup / residual;
        worst = worst.max(rec.departure - rhs);
        if rel_violates(rec.departure, rhs) {
            violations += 1;
        }
    }
    Ok(CheckReport::new("cross-traffic-departure-bound", trials, violations, worst))
}

/// Leftover-service shortfall bound under cross traffic:
/// `A_f (x) beta (t) - A_f*(t) <= sup_{0<=s<=d_{i(t)}} { A_c(s, d_{i(t)}) -
/// rc (d_{i(t)} - s) } + l_{i(t)}` with `beta(t) = (C - rc) t`.
pub fn check_lemma5(
    f_trace: &Trace,
    c_trace: Option<&Trace>,
    sim: &SimResult,
    capacity: f64,
    rc: f64,
    times: &[f64],
) -> Result<CheckReport> {
    if !(rc >= 0.0) || rc >= capacity {
        return Err(Error::Precondition(format!(
            "needs 0 <= rc < capacity, got rc={rc}, capacity={capacity}"
        )));
    }
    let beta = Curve::affine(0.0, capacity - rc)?;
    let envelope = Curve::affine(0.0, rc)?;
    let empty = empty_trace();
    let cross = c_trace.unwrap_or(&empty);
    let mut trials = 0;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for &t in times {
        let Some(i) = sim.index_at(FlowTag::Traversing, t) else { continue };
        trials += 1;
        let rec = sim.record(FlowTag::Traversing, i).expect("live index");
        let lhs = minplus_output(f_trace, &beta, t) - sim.departed_at(FlowTag::Traversing, t);
        let sup = sup_envelope_gap(cross, &envelope, rec.departure).max(0.0);
        let rhs = sup + rec.length;
        worst = worst.max(lhs - rhs);
        if rel_violates(lhs, rhs) {
            violations += 1;
        }
    }
    Ok(CheckReport::new("leftover-shortfall", trials, violations, worst))
}

/// Empirical check of the arrival-envelope predicate: over independent
/// replications, the frequency of `{gap over alpha at time t > x}` must not
/// exceed `fbar(x)` plus three binomial standard deviations at each `x`.
pub fn check_sac_empirical(
    spec: &CompoundPoissonSpec,
    alpha: &Curve,
    fbar: &BoundingFunction,
    replications: usize,
    t: f64,
    x_grid: &[f64],
    base_seed: u64,
) -> Result<CheckReport> {
    if replications == 0 {
        return Err(Error::InvalidParameter("needs at least one replication".into()));
    }
    if x_grid.is_empty() {
        return Err(Error::InvalidGrid("empty x grid".into()));
    }
    let mut gaps = Vec::with_capacity(replications);
    for rep in 0..replications {
        let trace = generate_compound_poisson(
            spec,
            FlowTag::Traversing,
            t,
            base_seed.wrapping_add(rep as u64),
        )?;
        gaps.push(sac_gap(&trace, alpha, t)?);
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = replications as f64;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for &x in x_grid {
        let freq = (gaps.len() - gaps.partition_point(|&g| g <= x)) as f64 / n;
        let p = fbar.eval(x).clamp(0.0, 1.0);
        let slack = 3.0 * (p * (1.0 - p) / n).sqrt();
        let margin = freq - (p + slack);
        worst = worst.max(margin);
        if margin > 0.0 {
            violations += 1;
        }
    }
    Ok(CheckReport::new("arrival-envelope-tail", x_grid.len(), violations, worst)
        .with_details(format!("replications={replications}, t={t}")))
}

/// Exact check of the aggregate departure recurrence
/// `d_j = max(a_j, d_{j-1}) + l_j / C` on the output-ordered aggregate, under
/// any scheduler. Also counts arrival-order inversions in the output order
/// (the aggregate arrival sequence need not be monotone).
pub fn check_aggregate_recurrence(sim: &SimResult, capacity: f64) -> CheckReport {
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut inversions = 0;
    let mut d_prev = 0.0_f64;
    let mut a_prev = f64::NEG_INFINITY;
    let records = sim.aggregate();
    for r in records {
        let expected = r.arrival.max(d_prev) + r.length / capacity;
        let margin = (r.departure - expected).abs() - PATH_TOL * expected.abs().max(1.0);
        worst = worst.max(margin);
        if margin > 0.0 {
            violations += 1;
        }
        if r.arrival < a_prev {
            inversions += 1;
        }
        d_prev = r.departure;
        a_prev = r.arrival;
    }
    CheckReport::new("aggregate-recurrence", records.len(), violations, worst)
        .with_details(format!("arrival_inversions={inversions}"))
}
