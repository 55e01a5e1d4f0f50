//! Packet-level simulation of the work-conserving constant-capacity node,
//! sample-path functionals and the folklore-output pitfall demonstration.
//!
//! The engine is a two-queue pointer advance: with one server and FIFO order
//! within each flow there is no need for a general event heap, and the exact
//! departure recurrence `d = max(a, d_prev) + l/C` is evaluated with the
//! same floating-point operations everywhere it appears (simulation, virtual
//! time, aggregate recurrence check), so the lemma checks compare equal
//! expressions bit for bit.
//!
//! At an instant where a service completion and an arrival coincide, the
//! completion is accounted first (the departing packet frees the server at
//! that instant); the arriving packet is then eligible for selection.

use std::path::Path;

use crate::minplus::Curve;
use crate::traffic::{FlowTag, Trace};
use crate::{Error, Result};

/// Inter-flow scheduling policy. FIFO within each flow always.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheduler {
    /// Serve packets in global arrival order (ties: traversing before
    /// crossing, then by index).
    AggregateFifo,
    /// At each selection instant serve the head-of-line packet of `high` if
    /// one has arrived, else the other flow. A packet in service is never
    /// interrupted.
    NonPreemptivePriority { high: FlowTag },
}

/// The node: constant capacity plus a scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeConfig {
    /// Serving capacity in bits/s.
    pub capacity: f64,
    pub scheduler: Scheduler,
}

impl NodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.capacity > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "capacity must be > 0, got {}",
                self.capacity
            )));
        }
        Ok(())
    }
}

/// Per-packet outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub flow: FlowTag,
    pub index: usize,
    pub arrival: f64,
    pub departure: f64,
    pub length: f64,
}

impl PacketRecord {
    pub fn delay(&self) -> f64 {
        self.departure - self.arrival
    }
}

/// Simulation outcome: records in output (departure) order, which is the
/// aggregate flow order, plus per-flow cumulative departure functions.
#[derive(Debug, Clone)]
pub struct SimResult {
    capacity: f64,
    records: Vec<PacketRecord>,
    /// Per flow: (departure, cumulative bits departed) in departure order.
    flow_departures: [Vec<(f64, f64)>; 2],
    /// Per flow: indices into `records` in FIFO (index) order.
    flow_order: [Vec<usize>; 2],
}

fn flow_slot(flow: FlowTag) -> usize {
    match flow {
        FlowTag::Traversing => 0,
        FlowTag::Crossing => 1,
    }
}

impl SimResult {
    fn from_records(records: Vec<PacketRecord>, capacity: f64) -> Self {
        let mut flow_departures: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
        let mut flow_order: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        let mut acc = [0.0_f64; 2];
        for (i, r) in records.iter().enumerate() {
            let s = flow_slot(r.flow);
            acc[s] += r.length;
            flow_departures[s].push((r.departure, acc[s]));
            flow_order[s].push(i);
        }
        SimResult { capacity, records, flow_departures, flow_order }
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Records in output order (the aggregate flow `g`).
    pub fn aggregate(&self) -> &[PacketRecord] {
        &self.records
    }

    /// Records of one flow in FIFO (index) order.
    pub fn flow_records(&self, flow: FlowTag) -> impl Iterator<Item = &PacketRecord> {
        self.flow_order[flow_slot(flow)].iter().map(move |&i| &self.records[i])
    }

    /// `A*(t)` for one flow: bits departed in `[0, t]`.
    pub fn departed_at(&self, flow: FlowTag, t: f64) -> f64 {
        let deps = &self.flow_departures[flow_slot(flow)];
        match deps.partition_point(|&(d, _)| d <= t) {
            0 => 0.0,
            k => deps[k - 1].1,
        }
    }

    /// `A*^g(t)`: aggregate bits departed in `[0, t]`.
    pub fn departed_aggregate_at(&self, t: f64) -> f64 {
        self.departed_at(FlowTag::Traversing, t) + self.departed_at(FlowTag::Crossing, t)
    }

    pub fn last_departure(&self) -> f64 {
        self.records.iter().map(|r| r.departure).fold(0.0, f64::max)
    }

    /// `i(t) = min { k : d^{f,k} >= t }`, or `None` past the last departure.
    pub fn index_at(&self, flow: FlowTag, t: f64) -> Option<usize> {
        let s = flow_slot(flow);
        let deps = &self.flow_departures[s];
        let k = deps.partition_point(|&(d, _)| d < t);
        if k == deps.len() {
            None
        } else {
            Some(self.records[self.flow_order[s][k]].index)
        }
    }

    /// Record of packet `index` (1-based) of `flow`.
    pub fn record(&self, flow: FlowTag, index: usize) -> Option<&PacketRecord> {
        self.flow_order[flow_slot(flow)].get(index - 1).map(|&i| &self.records[i])
    }

    /// Virtual delay `D(t) = inf { tau : A*(t+tau) >= A(t) }`, computed
    /// exactly from the step functions. `None` if the arrived traffic has
    /// not fully departed within the simulated horizon.
    pub fn virtual_delay(&self, flow: FlowTag, t: f64) -> Option<f64> {
        let s = flow_slot(flow);
        // A(t) from the flow's own arrival records (FIFO order)
        let mut target = 0.0;
        for &i in &self.flow_order[s] {
            let r = &self.records[i];
            if r.arrival <= t {
                target += r.length;
            } else {
                break;
            }
        }
        if target <= 0.0 {
            return Some(0.0);
        }
        // cumulative departures are the same partial sums, so an exact
        // >= comparison is safe up to one ulp; allow a relative epsilon
        let eps = 1e-12 * target;
        let deps = &self.flow_departures[s];
        let k = deps.partition_point(|&(_, cum)| cum < target - eps);
        if k == deps.len() {
            return None;
        }
        Some((deps[k].0 - t).max(0.0))
    }

    /// CSV export: `flow,index,arrival,departure,delay` in output order.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["flow", "index", "arrival", "departure", "delay"])?;
        for r in &self.records {
            w.write_record([
                r.flow.label().to_string(),
                r.index.to_string(),
                r.arrival.to_string(),
                r.departure.to_string(),
                r.delay().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the node on one or two flows until every packet has departed.
pub fn simulate(
    traversing: &Trace,
    crossing: Option<&Trace>,
    config: &NodeConfig,
) -> Result<SimResult> {
    config.validate()?;
    let c = config.capacity;
    let empty: &[crate::traffic::Packet] = &[];
    let f_packets = traversing.packets();
    let c_packets = crossing.map_or(empty, |t| t.packets());

    let mut records = Vec::with_capacity(f_packets.len() + c_packets.len());
    match config.scheduler {
        Scheduler::AggregateFifo => {
            // merge in (arrival, f-before-c, index) order
            let mut fi = 0usize;
            let mut ci = 0usize;
            let mut d_prev = 0.0_f64;
            while fi < f_packets.len() || ci < c_packets.len() {
                let take_f = match (f_packets.get(fi), c_packets.get(ci)) {
                    (Some(fp), Some(cp)) => fp.arrival <= cp.arrival,
                    (Some(_), None) => true,
                    _ => false,
                };
                let p = if take_f {
                    let p = &f_packets[fi];
                    fi += 1;
                    p
                } else {
                    let p = &c_packets[ci];
                    ci += 1;
                    p
                };
                let d = p.arrival.max(d_prev) + p.length / c;
                d_prev = d;
                records.push(PacketRecord {
                    flow: p.flow,
                    index: p.index,
                    arrival: p.arrival,
                    departure: d,
                    length: p.length,
                });
            }
        }
        Scheduler::NonPreemptivePriority { high } => {
            let (high_q, low_q) = if high == FlowTag::Traversing {
                (f_packets, c_packets)
            } else {
                (c_packets, f_packets)
            };
            let mut hi = 0usize;
            let mut li = 0usize;
            let mut t_free = 0.0_f64;
            while hi < high_q.len() || li < low_q.len() {
                let next_arrival = match (high_q.get(hi), low_q.get(li)) {
                    (Some(h), Some(l)) => h.arrival.min(l.arrival),
                    (Some(h), None) => h.arrival,
                    (None, Some(l)) => l.arrival,
                    (None, None) => unreachable!(),
                };
                if t_free < next_arrival {
                    t_free = next_arrival; // idle until the next arrival
                }
                // select the high-priority head if it has arrived by now
                let p = if high_q.get(hi).is_some_and(|h| h.arrival <= t_free) {
                    let p = &high_q[hi];
                    hi += 1;
                    p
                } else {
                    let p = &low_q[li];
                    li += 1;
                    p
                };
                let d = p.arrival.max(t_free) + p.length / c;
                t_free = d;
                records.push(PacketRecord {
                    flow: p.flow,
                    index: p.index,
                    arrival: p.arrival,
                    departure: d,
                    length: p.length,
                });
            }
        }
    }
    Ok(SimResult::from_records(records, c))
}

/// Virtual time sequence `V^i(R) = max { a^i, V^{i-1} } + l^i / R` with
/// `V^0 = 0`, one value per packet.
pub fn virtual_time(trace: &Trace, rate: f64) -> Result<Vec<f64>> {
    if !(rate > 0.0) {
        return Err(Error::InvalidParameter(format!("virtual time needs rate > 0, got {rate}")));
    }
    let mut values = Vec::with_capacity(trace.packets().len());
    let mut prev = 0.0_f64;
    for p in trace.packets() {
        let v = p.arrival.max(prev) + p.length / rate;
        values.push(v);
        prev = v;
    }
    Ok(values)
}

/// Closed-form virtual time `V^i(R) = max_{1<=j<=i} { a^j + sum_{k=j}^i l^k / R }`,
/// exposed for cross-checking against the recurrence.
pub fn virtual_time_closed_form(trace: &Trace, rate: f64) -> Result<Vec<f64>> {
    if !(rate > 0.0) {
        return Err(Error::InvalidParameter(format!("virtual time needs rate > 0, got {rate}")));
    }
    let packets = trace.packets();
    let mut values = Vec::with_capacity(packets.len());
    for i in 0..packets.len() {
        let mut best = f64::NEG_INFINITY;
        for j in 0..=i {
            let sum: f64 = packets[j..=i].iter().map(|p| p.length).sum();
            best = best.max(packets[j].arrival + sum / rate);
        }
        values.push(best);
    }
    Ok(values)
}

/// Exact `A (x) beta (t) = inf_{0<=s<=t} { A(s) + beta(t-s) }` on a sample
/// path: the infimum of a right-continuous step function plus a continuous
/// envelope is attained at arrival epochs, their left limits, or the
/// endpoints. `t` may exceed the horizon.
pub fn minplus_output(trace: &Trace, beta: &Curve, t: f64) -> f64 {
    let mut inf = (trace.cumulative_at(t) + beta.eval(0.0)).min(beta.eval(t));
    for p in trace.packets() {
        if p.arrival > t {
            break;
        }
        let dt = t - p.arrival;
        inf = inf.min(trace.cumulative_before(p.arrival) + beta.eval(dt));
        inf = inf.min(trace.cumulative_at(p.arrival) + beta.eval(dt));
    }
    inf
}

/// The *wrong* constant-capacity output claim
/// `inf_{0<=s<=t} { A(s) + C (t-s) }`, evaluated at arrival instants and the
/// endpoints the way the folklore formula is applied in discrete time. Kept
/// for side-by-side comparison with [`simulate`].
pub fn pitfall_output(trace: &Trace, capacity: f64, t: f64) -> f64 {
    let mut inf = trace.cumulative_at(t).min(capacity * t);
    for p in trace.packets() {
        if p.arrival > t {
            break;
        }
        inf = inf.min(trace.cumulative_at(p.arrival) + capacity * (t - p.arrival));
    }
    inf
}
