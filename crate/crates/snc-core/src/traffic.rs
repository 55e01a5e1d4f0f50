//! Arrival processes: compound Poisson generation, deterministic traces,
//! cumulative-arrival queries and the stochastic-arrival-curve gap.
//!
//! Cumulative arrivals are right-continuous: a packet arriving at `t` is
//! counted in `A(t)`. Concurrent arrivals are ordered traversing-flow-first,
//! then by index.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::minplus::Curve;
use crate::{Error, Result};

/// Flow identity at the node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowTag {
    /// The flow whose delay is analyzed (`f`).
    Traversing,
    /// The aggregate of cross traffic (`c`).
    Crossing,
}

impl FlowTag {
    pub fn label(self) -> &'static str {
        match self {
            FlowTag::Traversing => "f",
            FlowTag::Crossing => "c",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "f" => Some(FlowTag::Traversing),
            "c" => Some(FlowTag::Crossing),
            _ => None,
        }
    }
}

/// One arrival event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub flow: FlowTag,
    /// Arrival instant (the last bit has arrived), seconds.
    pub arrival: f64,
    /// Length in bits.
    pub length: f64,
    /// 1-based ordinal within its flow.
    pub index: usize,
}

/// Time-ordered packet sequence of one flow; induces the cumulative arrival
/// step function `A(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    packets: Vec<Packet>,
    horizon: f64,
    /// prefix_bits[i] = total bits of packets[..i]
    prefix_bits: Vec<f64>,
}

impl Trace {
    pub fn new(packets: Vec<Packet>, horizon: f64) -> Result<Self> {
        if !(horizon >= 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be >= 0, got {horizon}")));
        }
        let mut next_index = 1usize;
        for (row, p) in packets.iter().enumerate() {
            if !(p.length > 0.0) {
                return Err(Error::TraceFormat { row, msg: format!("non-positive length {}", p.length) });
            }
            if !(p.arrival >= 0.0) || p.arrival > horizon {
                return Err(Error::TraceFormat {
                    row,
                    msg: format!("arrival {} outside [0, {horizon}]", p.arrival),
                });
            }
            if p.index != next_index {
                return Err(Error::TraceFormat {
                    row,
                    msg: format!("index {} out of sequence (expected {next_index})", p.index),
                });
            }
            next_index += 1;
        }
        for w in packets.windows(2) {
            if w[1].arrival < w[0].arrival {
                return Err(Error::TraceFormat {
                    row: w[1].index,
                    msg: "arrivals not sorted".into(),
                });
            }
        }
        let mut prefix_bits = Vec::with_capacity(packets.len() + 1);
        let mut acc = 0.0;
        prefix_bits.push(0.0);
        for p in &packets {
            acc += p.length;
            prefix_bits.push(acc);
        }
        Ok(Trace { packets, horizon, prefix_bits })
    }

    pub fn packets(&self) -> &[Packet] {
        &self.packets
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn total_bits(&self) -> f64 {
        *self.prefix_bits.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// `A(t)`: bits arrived in `[0, t]`, with `A(t) = A(horizon)` past the
    /// horizon (the trace is the complete realization of its window).
    pub fn cumulative_at(&self, t: f64) -> f64 {
        assert!(t >= 0.0, "cumulative arrivals at negative time {t}");
        let k = self.packets.partition_point(|p| p.arrival <= t);
        self.prefix_bits[k]
    }

    /// Left limit `A(t-)`: bits arrived strictly before `t`.
    pub fn cumulative_before(&self, t: f64) -> f64 {
        let k = self.packets.partition_point(|p| p.arrival < t);
        self.prefix_bits[k]
    }
}

/// `A(t)` with an explicit range check (`0 <= t <= horizon`).
pub fn cumulative_arrivals(trace: &Trace, t: f64) -> Result<f64> {
    if !(0.0..=trace.horizon()).contains(&t) {
        return Err(Error::OutOfRange { t, horizon: trace.horizon() });
    }
    Ok(trace.cumulative_at(t))
}

/// Packet length distribution of a compound Poisson flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LengthDist {
    /// Exponential with mean `1/mu` bits.
    Exponential { mu: f64 },
    /// Every packet has the same length.
    Deterministic { length: f64 },
}

/// Compound Poisson arrival process: Poisson(lambda) arrival instants with
/// i.i.d. lengths, independent of the arrival times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompoundPoissonSpec {
    pub lambda: f64,
    pub length_dist: LengthDist,
}

impl CompoundPoissonSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be > 0, got {}", self.lambda)));
        }
        match self.length_dist {
            LengthDist::Exponential { mu } if !(mu > 0.0) => {
                Err(Error::InvalidParameter(format!("mu must be > 0, got {mu}")))
            }
            LengthDist::Deterministic { length } if !(length > 0.0) => {
                Err(Error::InvalidParameter(format!("length must be > 0, got {length}")))
            }
            _ => Ok(()),
        }
    }

    /// Mean rate in bits/s.
    pub fn mean_rate(&self) -> f64 {
        match self.length_dist {
            LengthDist::Exponential { mu } => self.lambda / mu,
            LengthDist::Deterministic { length } => self.lambda * length,
        }
    }
}

/// Draws one trace. Deterministic given `(spec, horizon, seed)`; distinct
/// replications should use distinct seeds.
pub fn generate_compound_poisson(
    spec: &CompoundPoissonSpec,
    flow: FlowTag,
    horizon: f64,
    seed: u64,
) -> Result<Trace> {
    spec.validate()?;
    if !(horizon >= 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be >= 0, got {horizon}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inter = Exp::new(spec.lambda).expect("lambda validated");
    let mut packets = Vec::new();
    let mut t = 0.0;
    let mut index = 1usize;
    loop {
        t += inter.sample(&mut rng);
        if t > horizon {
            break;
        }
        let length = match spec.length_dist {
            LengthDist::Exponential { mu } => {
                Exp::new(mu).expect("mu validated").sample(&mut rng)
            }
            LengthDist::Deterministic { length } => length,
        };
        packets.push(Packet { flow, arrival: t, length, index });
        index += 1;
    }
    Trace::new(packets, horizon)
}

/// `sup_{0<=s<=t} { A(s,t) - alpha(t-s) }` evaluated exactly over the
/// candidate instants where the step function can attain the supremum:
/// arrival epochs, their left limits and the endpoints. Not clamped.
///
/// `t` may exceed the horizon (no arrivals after the horizon); this is used
/// by the sample-path lemma checks where the supremum runs up to a departure
/// time.
pub fn sup_envelope_gap(trace: &Trace, alpha: &Curve, t: f64) -> f64 {
    let a_t = trace.cumulative_at(t);
    // s = 0 and s = t
    let mut sup = (a_t - alpha.eval(t)).max(-alpha.eval(0.0));
    for p in trace.packets() {
        if p.arrival > t {
            break;
        }
        let dt = t - p.arrival;
        // approach s -> arrival from the left: A(s) -> A(a-)
        sup = sup.max(a_t - trace.cumulative_before(p.arrival) - alpha.eval(dt));
        sup = sup.max(a_t - trace.cumulative_at(p.arrival) - alpha.eval(dt));
    }
    sup
}

/// Gap of the v.b.c. stochastic-arrival-curve predicate:
/// `A(t) - inf_{0<=s<=t} { A(s) + alpha(t-s) }`, clamped at 0.
pub fn sac_gap(trace: &Trace, alpha: &Curve, t: f64) -> Result<f64> {
    if !(0.0..=trace.horizon()).contains(&t) {
        return Err(Error::OutOfRange { t, horizon: trace.horizon() });
    }
    Ok(sup_envelope_gap(trace, alpha, t).max(0.0))
}

/// Writes the trace as CSV: header `flow,arrival,length`.
pub fn save_trace(trace: &Trace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["flow", "arrival", "length"])?;
    for p in trace.packets() {
        w.write_record([p.flow.label(), &p.arrival.to_string(), &p.length.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a single-flow or mixed trace CSV. Returns one trace per flow tag
/// present, with per-flow indices assigned in file order. The horizon is the
/// last arrival.
pub fn load_trace(path: &Path) -> Result<(Trace, Trace)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut by_flow: [Vec<Packet>; 2] = [Vec::new(), Vec::new()];
    let mut horizon = 0.0_f64;
    let mut prev_arrival = 0.0_f64;
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let fail = |msg: String| Error::TraceFormat { row, msg };
        if rec.len() != 3 {
            return Err(fail(format!("expected 3 fields, got {}", rec.len())));
        }
        let flow = FlowTag::parse(&rec[0])
            .ok_or_else(|| fail(format!("unknown flow tag {:?}", &rec[0])))?;
        let arrival: f64 =
            rec[1].parse().map_err(|_| fail(format!("bad arrival {:?}", &rec[1])))?;
        let length: f64 =
            rec[2].parse().map_err(|_| fail(format!("bad length {:?}", &rec[2])))?;
        if !(length > 0.0) {
            return Err(fail(format!("non-positive length {length}")));
        }
        if arrival < prev_arrival {
            return Err(fail(format!("arrival {arrival} not sorted (previous {prev_arrival})")));
        }
        prev_arrival = arrival;
        horizon = horizon.max(arrival);
        let slot = match flow {
            FlowTag::Traversing => &mut by_flow[0],
            FlowTag::Crossing => &mut by_flow[1],
        };
        let index = slot.len() + 1;
        slot.push(Packet { flow, arrival, length, index });
    }
    let [f_packets, c_packets] = by_flow;
    Ok((Trace::new(f_packets, horizon)?, Trace::new(c_packets, horizon)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn table1_trace() -> Trace {
        Trace::new(
            vec![Packet { flow: FlowTag::Traversing, arrival: 1.0, length: 2.0, index: 1 }],
            4.0,
        )
        .unwrap()
    }

    #[test]
    fn cumulative_arrivals_table1() {
        let tr = table1_trace();
        assert_eq!(cumulative_arrivals(&tr, 0.0).unwrap(), 0.0);
        assert_eq!(cumulative_arrivals(&tr, 1.0).unwrap(), 2.0);
        assert_eq!(cumulative_arrivals(&tr, 3.0).unwrap(), 2.0);
        assert_eq!(tr.cumulative_before(1.0), 0.0);
    }

    #[test]
    fn cumulative_arrivals_empty_and_ties() {
        let empty = Trace::new(vec![], 5.0).unwrap();
        assert_eq!(cumulative_arrivals(&empty, 3.0).unwrap(), 0.0);

        let tr = Trace::new(
            vec![
                Packet { flow: FlowTag::Traversing, arrival: 1.0, length: 2.0, index: 1 },
                Packet { flow: FlowTag::Traversing, arrival: 1.0, length: 3.0, index: 2 },
            ],
            2.0,
        )
        .unwrap();
        assert_eq!(cumulative_arrivals(&tr, 1.0).unwrap(), 5.0);
    }

    #[test]
    fn cumulative_arrivals_out_of_range() {
        let tr = table1_trace();
        assert!(cumulative_arrivals(&tr, 5.0).is_err());
    }

    #[test]
    fn generation_is_deterministic_and_respects_horizon() {
        let spec = CompoundPoissonSpec { lambda: 1.0, length_dist: LengthDist::Exponential { mu: 1.0 } };
        let a = generate_compound_poisson(&spec, FlowTag::Traversing, 100.0, 7).unwrap();
        let b = generate_compound_poisson(&spec, FlowTag::Traversing, 100.0, 7).unwrap();
        assert_eq!(a, b);
        let empty = generate_compound_poisson(&spec, FlowTag::Traversing, 0.0, 7).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn generation_long_run_rate() {
        let spec = CompoundPoissonSpec { lambda: 1.0, length_dist: LengthDist::Exponential { mu: 1.0 } };
        let horizon = 1e5;
        let tr = generate_compound_poisson(&spec, FlowTag::Traversing, horizon, 42).unwrap();
        let rate = tr.total_bits() / horizon;
        assert!((0.99..=1.01).contains(&rate), "rate {rate} outside [0.99, 1.01]");
    }

    #[test]
    fn generation_rejects_bad_spec() {
        let spec = CompoundPoissonSpec { lambda: 0.0, length_dist: LengthDist::Exponential { mu: 1.0 } };
        assert!(generate_compound_poisson(&spec, FlowTag::Traversing, 1.0, 0).is_err());
    }

    #[test]
    fn sac_gap_examples() {
        let alpha = Curve::affine(0.0, 1.0).unwrap();
        let empty = Trace::new(vec![], 5.0).unwrap();
        assert_eq!(sac_gap(&empty, &alpha, 3.0).unwrap(), 0.0);

        // one packet a=1, l=2, alpha = t, t = 1: gap 2 just below s = 1
        let tr = table1_trace();
        assert_relative_eq!(sac_gap(&tr, &alpha, 1.0).unwrap(), 2.0);

        let huge = Curve::affine(1e9, 0.0).unwrap();
        assert_eq!(sac_gap(&tr, &huge, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn sac_gap_matches_exhaustive_scan() {
        let spec = CompoundPoissonSpec { lambda: 0.8, length_dist: LengthDist::Exponential { mu: 1.0 } };
        let tr = generate_compound_poisson(&spec, FlowTag::Traversing, 20.0, 3).unwrap();
        let alpha = Curve::affine(0.5, 1.0).unwrap();
        let t = 17.0;
        // oracle: dense scan over s including points just below arrivals
        let mut sup = 0.0_f64;
        let a_t = tr.cumulative_at(t);
        let mut s = 0.0;
        while s <= t {
            sup = sup.max(a_t - tr.cumulative_at(s) - alpha.eval(t - s));
            s += 1e-4;
        }
        let exact = sac_gap(&tr, &alpha, t).unwrap();
        assert!(exact >= sup - 1e-9);
        assert!(exact <= sup + 1.1e-4 * 2.0 + 1e-9); // scan misses left limits by <= step * rate
    }

    #[test]
    fn trace_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let tr = Trace::new(
            vec![
                Packet { flow: FlowTag::Traversing, arrival: 0.5, length: 1.0, index: 1 },
                Packet { flow: FlowTag::Traversing, arrival: 1.5, length: 2.5, index: 2 },
                Packet { flow: FlowTag::Traversing, arrival: 1.5, length: 0.25, index: 3 },
            ],
            1.5,
        )
        .unwrap();
        save_trace(&tr, &path).unwrap();
        let (f, c) = load_trace(&path).unwrap();
        assert_eq!(f.packets(), tr.packets());
        assert!(c.is_empty());
    }

    #[test]
    fn trace_csv_rejects_negative_length_with_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "flow,arrival,length\nf,0.5,1.0\nf,0.7,-2\n").unwrap();
        match load_trace(&path) {
            Err(Error::TraceFormat { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected TraceFormat error, got {other:?}"),
        }
    }

    #[test]
    fn trace_csv_header_only_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "flow,arrival,length\n").unwrap();
        let (f, c) = load_trace(&path).unwrap();
        assert!(f.is_empty() && c.is_empty());
    }
}
