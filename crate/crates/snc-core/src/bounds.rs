//! Closed-form stochastic service curves and per-packet delay-tail bounds
//! for the constant-capacity node, plus the exact M/M/1 formulas used for
//! comparison.
//!
//! Notation: the traversing flow `f` is the one whose delay is analyzed, the
//! crossing flow `c` is everything it shares the server with. Arrival-side
//! assumptions come as [`FlowSac`] pairs (rate envelope `r t`, tail bound on
//! the burst above it); service-side results come as [`ServiceCurveResult`]
//! pairs (service curve, tail bound on the shortfall below it).

use crate::minplus::{
    convolve_bounding, minplus_bounding_at, stieltjes_convolve_tail, stieltjes_tail_at,
    BoundingFunction, Curve,
};
use crate::{Error, Result};

/// A flow's stochastic arrival envelope: `P{ sup_s (A(s,t) - rate (t-s)) > x }
/// <= bounding(x)`.
#[derive(Debug, Clone)]
pub struct FlowSac {
    /// Envelope rate in bits/s.
    pub rate: f64,
    pub bounding: BoundingFunction,
}

impl FlowSac {
    pub fn new(rate: f64, bounding: BoundingFunction) -> Result<Self> {
        if !(rate >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "arrival envelope rate must be >= 0, got {rate}"
            )));
        }
        Ok(FlowSac { rate, bounding })
    }

    /// The deterministic envelope `rate * t`.
    pub fn envelope(&self) -> Curve {
        Curve::affine(0.0, self.rate).expect("rate validated at construction")
    }
}

/// A stochastic service curve: `P{ A (x) curve (t) - A*(t) > x } <=
/// bounding(x)`.
#[derive(Debug, Clone)]
pub struct ServiceCurveResult {
    pub curve: Curve,
    pub bounding: BoundingFunction,
}

/// A delay-tail bound `tau -> P{D > tau}` with a human-readable name, for
/// feeding dominance checks and reports.
pub struct DelayBound {
    name: String,
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl DelayBound {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        DelayBound { name: name.into(), f: Box::new(f) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, tau: f64) -> f64 {
        (self.f)(tau)
    }
}

impl std::fmt::Debug for DelayBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DelayBound").field("name", &self.name).finish()
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be >= 0, got {tau}")));
    }
    Ok(())
}

/// Arrival envelope of a compound Poisson flow (Poisson packet arrivals of
/// intensity `lambda`, exponential lengths of mean `1/mu`): rate
/// `lambda/(mu - theta)` with tail `e^{-theta x}`, valid for `0 < theta < mu`.
pub fn sac_compound_poisson(lambda: f64, mu: f64, theta: f64) -> Result<FlowSac> {
    if !(lambda > 0.0) || !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "compound Poisson needs lambda > 0 and mu > 0, got lambda={lambda}, mu={mu}"
        )));
    }
    if !(theta > 0.0) || theta >= mu {
        return Err(Error::Precondition(format!(
            "arrival envelope needs 0 < theta < mu, got theta={theta}, mu={mu}"
        )));
    }
    FlowSac::new(lambda / (mu - theta), BoundingFunction::exponential(theta)?)
}

/// Service curve of the node serving a single flow: `C t` with the shortfall
/// bounded by the packet-length tail (only the packet in service is missing
/// from the fluid output).
pub fn ssc_single_flow(capacity: f64, packet_tail: BoundingFunction) -> Result<ServiceCurveResult> {
    if !(capacity > 0.0) {
        return Err(Error::InvalidParameter(format!("capacity must be > 0, got {capacity}")));
    }
    Ok(ServiceCurveResult { curve: Curve::affine(0.0, capacity)?, bounding: packet_tail })
}

/// Single-flow delay tail from the service-curve route:
/// `(packet_tail (x) ff.bounding)(C tau)`. Requires `ff.rate <= C`.
pub fn delay_bound_cor1(
    packet_tail: &BoundingFunction,
    ff: &FlowSac,
    capacity: f64,
    tau: f64,
) -> Result<f64> {
    check_tau(tau)?;
    if !(capacity > 0.0) || ff.rate > capacity {
        return Err(Error::Precondition(format!(
            "needs 0 < rate <= capacity, got rate={}, capacity={capacity}",
            ff.rate
        )));
    }
    Ok(minplus_bounding_at(packet_tail, &ff.bounding, capacity * tau))
}

/// Single-flow delay tail from the virtual-time route: `ff.bounding(C tau)`.
/// Tighter than [`delay_bound_cor1`] — the packetization term drops out.
/// Requires `ff.rate <= C`.
pub fn delay_bound_thm2(ff: &FlowSac, capacity: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if !(capacity > 0.0) || ff.rate > capacity {
        return Err(Error::Precondition(format!(
            "needs 0 < rate <= capacity, got rate={}, capacity={capacity}",
            ff.rate
        )));
    }
    Ok(ff.bounding.eval(capacity * tau).min(1.0))
}

/// Leftover service for the traversing flow from the aggregate behavior:
/// `(C - rc) t` with shortfall tail `fc.bounding (x) flg` evaluated on
/// `grid`, where `flg` is the packet-length tail of the *aggregate*.
/// Requires `fc.rate < C`.
pub fn ssc_leftover_thm3(
    fc: &FlowSac,
    aggregate_packet_tail: &BoundingFunction,
    capacity: f64,
    grid: &[f64],
) -> Result<ServiceCurveResult> {
    if !(capacity > 0.0) || fc.rate >= capacity {
        return Err(Error::Precondition(format!(
            "leftover service needs crossing rate < capacity, got rate={}, capacity={capacity}",
            fc.rate
        )));
    }
    Ok(ServiceCurveResult {
        curve: Curve::affine(0.0, capacity - fc.rate)?,
        bounding: convolve_bounding(&fc.bounding, aggregate_packet_tail, grid)?,
    })
}

/// Leftover service via the traversing flow's own virtual time: `(C - rc) t`
/// with shortfall tail `fc.bounding (x) fl` (dependent case) or the tail of
/// the distribution convolution `1 - Fc * Fl` (independent case), where `fl`
/// is the packet-length tail of the *traversing* flow only.
/// Requires `fc.rate < C`.
pub fn ssc_thm4(
    fc: &FlowSac,
    packet_tail: &BoundingFunction,
    capacity: f64,
    independent: bool,
    grid: &[f64],
) -> Result<ServiceCurveResult> {
    if !(capacity > 0.0) || fc.rate >= capacity {
        return Err(Error::Precondition(format!(
            "leftover service needs crossing rate < capacity, got rate={}, capacity={capacity}",
            fc.rate
        )));
    }
    let bounding = if independent {
        stieltjes_convolve_tail(&fc.bounding, packet_tail, grid)?
    } else {
        convolve_bounding(&fc.bounding, packet_tail, grid)?
    };
    Ok(ServiceCurveResult { curve: Curve::affine(0.0, capacity - fc.rate)?, bounding })
}

/// Scalar min-plus of two tail evaluators at `x`: coarse scan plus
/// golden-section refinement, with `extra` split candidates.
fn minplus_scalar(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    x: f64,
    extra: &[f64],
) -> f64 {
    if x <= 0.0 {
        return (f(0.0) + g(0.0)).min(1.0);
    }
    let obj = |y: f64| f(y) + g(x - y);
    let mut best = obj(0.0).min(obj(x));
    for &s in extra {
        if (0.0..=x).contains(&s) {
            best = best.min(obj(s));
        }
    }
    const M: usize = 512;
    let mut best_i = 0usize;
    let mut best_scan = f64::INFINITY;
    for i in 0..=M {
        let y = x * i as f64 / M as f64;
        let v = obj(y);
        if v < best_scan {
            best_scan = v;
            best_i = i;
        }
    }
    best = best.min(best_scan);
    let mut lo = x * best_i.saturating_sub(1) as f64 / M as f64;
    let mut hi = x * (best_i + 1).min(M) as f64 / M as f64;
    let phi = 0.618_033_988_749_894_9_f64;
    let mut y1 = hi - phi * (hi - lo);
    let mut y2 = lo + phi * (hi - lo);
    let (mut v1, mut v2) = (obj(y1), obj(y2));
    for _ in 0..80 {
        if v1 <= v2 {
            hi = y2;
            y2 = y1;
            v2 = v1;
            y1 = hi - phi * (hi - lo);
            v1 = obj(y1);
        } else {
            lo = y1;
            y1 = y2;
            v1 = v2;
            y2 = lo + phi * (hi - lo);
            v2 = obj(y2);
        }
    }
    best.min(v1).min(v2).min(1.0)
}

/// Triple min-plus convolution of tails at `x`. Equal-rate exponential
/// triples use the exact `3 e^{-theta x / 3}`; otherwise the outer infimum
/// runs over the split point between `(f1 (x) f2)` and `f3`.
fn triple_minplus_at(
    f1: &BoundingFunction,
    f2: &BoundingFunction,
    f3: &BoundingFunction,
    x: f64,
) -> f64 {
    if let (
        BoundingFunction::Exponential { theta: t1 },
        BoundingFunction::Exponential { theta: t2 },
        BoundingFunction::Exponential { theta: t3 },
    ) = (f1, f2, f3)
    {
        if t1 == t2 && t2 == t3 {
            return (3.0 * (-t1 * x / 3.0).exp()).min(1.0);
        }
    }
    minplus_scalar(
        |z| minplus_bounding_at(f1, f2, z),
        |z| f3.eval(z),
        x,
        &[],
    )
}

fn check_cross_stability(rf: f64, rc: f64, capacity: f64) -> Result<f64> {
    if !(capacity > 0.0) || rc >= capacity || rf >= capacity - rc {
        return Err(Error::Precondition(format!(
            "needs rate_f < capacity - rate_c, got rate_f={rf}, rate_c={rc}, capacity={capacity}"
        )));
    }
    Ok(capacity - rc)
}

/// Delay tail of the traversing flow under the aggregate-behavior leftover
/// service: `(Fc (x) Flg (x) Ff)((C - rc) tau)` with `Flg` the aggregate
/// packet-length tail. Requires `ff.rate < C - fc.rate`.
pub fn delay_bound_cor2(
    fc: &FlowSac,
    aggregate_packet_tail: &BoundingFunction,
    ff: &FlowSac,
    capacity: f64,
    tau: f64,
) -> Result<f64> {
    check_tau(tau)?;
    let residual = check_cross_stability(ff.rate, fc.rate, capacity)?;
    Ok(triple_minplus_at(&fc.bounding, aggregate_packet_tail, &ff.bounding, residual * tau))
}

/// Delay tail under the per-flow leftover service, with `fl` the traversing
/// flow's own packet-length tail: dependent case `(Fc (x) Fl (x) Ff)`,
/// independent case `((1 - Fc * Fl) (x) Ff)`, both at `(C - rc) tau`.
/// Requires `ff.rate < C - fc.rate`.
pub fn delay_bound_cor3(
    fc: &FlowSac,
    packet_tail: &BoundingFunction,
    ff: &FlowSac,
    capacity: f64,
    tau: f64,
    independent: bool,
) -> Result<f64> {
    check_tau(tau)?;
    let residual = check_cross_stability(ff.rate, fc.rate, capacity)?;
    let x = residual * tau;
    if independent {
        if !fc.bounding.is_proper() || !packet_tail.is_proper() {
            return Err(Error::ImproperTail);
        }
        Ok(minplus_scalar(
            |z| stieltjes_tail_at(&fc.bounding, packet_tail, z).unwrap_or(1.0),
            |z| ff.bounding.eval(z),
            x,
            &[],
        ))
    } else {
        Ok(triple_minplus_at(&fc.bounding, packet_tail, &ff.bounding, x))
    }
}

/// Packetization-free delay tail: dependent case `(Fc (x) Ff)((C - rc) tau)`,
/// independent case `(1 - Fc * Ff)((C - rc) tau)`.
/// Requires `ff.rate + fc.rate < C`.
pub fn delay_bound_thm5(
    fc: &FlowSac,
    ff: &FlowSac,
    capacity: f64,
    tau: f64,
    independent: bool,
) -> Result<f64> {
    check_tau(tau)?;
    if !(capacity > 0.0) || ff.rate + fc.rate >= capacity {
        return Err(Error::Precondition(format!(
            "needs rate_f + rate_c < capacity, got {} + {} vs {capacity}",
            ff.rate, fc.rate
        )));
    }
    let x = (capacity - fc.rate) * tau;
    if independent {
        stieltjes_tail_at(&fc.bounding, &ff.bounding, x)
    } else {
        Ok(minplus_bounding_at(&fc.bounding, &ff.bounding, x))
    }
}

/// Moment generating function of a compound Poisson flow at `theta`:
/// `E[e^{theta A(1)}] = exp(lambda theta / (mu - theta))`.
fn compound_poisson_log_mgf(lambda: f64, mu: f64, theta: f64) -> f64 {
    lambda * theta / (mu - theta)
}

/// Exponential delay tail `e^{-theta (C - rc) tau}` for independent compound
/// Poisson flows, with explicit `theta` and `rc`. The moment conditions
/// `E[e^{theta (A^c(1) - rc)}] <= 1` and `E[e^{theta (A^f(1)+A^c(1) - C)}] <= 1`
/// are verified and rejected if violated.
pub fn delay_bound_thm6_with(
    lambda_f: f64,
    lambda_c: f64,
    mu: f64,
    capacity: f64,
    theta: f64,
    rc: f64,
    tau: f64,
) -> Result<f64> {
    check_tau(tau)?;
    if !(lambda_f > 0.0) || !(lambda_c >= 0.0) || !(mu > 0.0) || !(capacity > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "needs lambda_f > 0, lambda_c >= 0, mu > 0, capacity > 0; got \
             lambda_f={lambda_f}, lambda_c={lambda_c}, mu={mu}, capacity={capacity}"
        )));
    }
    if !(theta > 0.0) || theta >= mu {
        return Err(Error::Precondition(format!(
            "needs 0 < theta < mu, got theta={theta}, mu={mu}"
        )));
    }
    if !(0.0..capacity).contains(&rc) {
        return Err(Error::Precondition(format!(
            "needs 0 <= rc < capacity, got rc={rc}, capacity={capacity}"
        )));
    }
    const TOL: f64 = 1e-9;
    let cross_margin = compound_poisson_log_mgf(lambda_c, mu, theta) - theta * rc;
    if cross_margin > TOL {
        return Err(Error::Precondition(format!(
            "crossing-flow moment condition fails: log E[e^(theta (A_c(1) - rc))] = {cross_margin:.3e} > 0"
        )));
    }
    let total_margin =
        compound_poisson_log_mgf(lambda_f + lambda_c, mu, theta) - theta * capacity;
    if total_margin > TOL {
        return Err(Error::Precondition(format!(
            "aggregate moment condition fails: log E[e^(theta (A_f(1)+A_c(1) - C))] = {total_margin:.3e} > 0"
        )));
    }
    Ok((-theta * (capacity - rc) * tau).exp().min(1.0))
}

/// [`delay_bound_thm6_with`] at the canonical parameter choice
/// `theta = mu - (lambda_f + lambda_c)/C` and
/// `rc = C lambda_c / (lambda_f + lambda_c)`, which satisfies both moment
/// conditions with equality.
pub fn delay_bound_thm6(
    lambda_f: f64,
    lambda_c: f64,
    mu: f64,
    capacity: f64,
    tau: f64,
) -> Result<f64> {
    if !(lambda_f > 0.0) || !(lambda_c >= 0.0) || !(capacity > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "needs lambda_f > 0, lambda_c >= 0, capacity > 0; got \
             lambda_f={lambda_f}, lambda_c={lambda_c}, capacity={capacity}"
        )));
    }
    let lambda = lambda_f + lambda_c;
    let theta = mu - lambda / capacity;
    let rc = capacity * lambda_c / lambda;
    delay_bound_thm6_with(lambda_f, lambda_c, mu, capacity, theta, rc, tau)
}

/// Exact M/M/1 system-delay tail `P{D > tau} = e^{-(mu - lambda) tau}`
/// (waiting plus service). Requires `lambda < mu`.
pub fn exact_mm1_delay_ccdf(lambda: f64, mu: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if !(lambda >= 0.0) || !(mu > 0.0) || lambda >= mu {
        return Err(Error::Precondition(format!(
            "M/M/1 needs 0 <= lambda < mu, got lambda={lambda}, mu={mu}"
        )));
    }
    Ok((-(mu - lambda) * tau).exp())
}

fn mm1_loads(lambda_f: f64, lambda_c: f64, mu: f64) -> Result<(f64, f64)> {
    if !(lambda_f >= 0.0) || !(lambda_c >= 0.0) || !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "needs lambda_f >= 0, lambda_c >= 0, mu > 0; got \
             lambda_f={lambda_f}, lambda_c={lambda_c}, mu={mu}"
        )));
    }
    let rho = (lambda_f + lambda_c) / mu;
    if rho >= 1.0 {
        return Err(Error::Precondition(format!("needs total load < 1, got rho={rho}")));
    }
    Ok((rho, lambda_c / mu))
}

/// Exact mean system delay of the low-priority flow in an M/M/1 queue with
/// non-preemptive priority to the crossing flow:
/// `rho / (mu (1 - rho_c)(1 - rho)) + 1/mu`.
pub fn exact_mm1_priority_mean_delay(lambda_f: f64, lambda_c: f64, mu: f64) -> Result<f64> {
    let (rho, rho_c) = mm1_loads(lambda_f, lambda_c, mu)?;
    Ok(rho / (mu * (1.0 - rho_c) * (1.0 - rho)) + 1.0 / mu)
}

fn mean_bound_base(lambda_f: f64, lambda_c: f64, mu: f64) -> Result<f64> {
    let (rho, rho_c) = mm1_loads(lambda_f, lambda_c, mu)?;
    if !(lambda_f > 0.0) {
        return Err(Error::Precondition("mean delay bound needs lambda_f > 0".into()));
    }
    let rho_f = rho - rho_c;
    Ok((1.0 + rho_c / rho_f) / (mu * (1.0 - rho)))
}

/// Mean-delay bound `(2 / (mu (1 - rho))) (1 + rho_c / rho_f)` obtained by
/// integrating the cruder exponential delay tail.
pub fn mean_delay_bound_eq43(lambda_f: f64, lambda_c: f64, mu: f64) -> Result<f64> {
    Ok(2.0 * mean_bound_base(lambda_f, lambda_c, mu)?)
}

/// Mean-delay bound `(1 / (mu (1 - rho))) (1 + rho_c / rho_f)`: half of
/// [`mean_delay_bound_eq43`], from the improved tail.
pub fn mean_delay_bound_eq45(lambda_f: f64, lambda_c: f64, mu: f64) -> Result<f64> {
    mean_bound_base(lambda_f, lambda_c, mu)
}

/// `E[D] = integral_0^inf P{D >= tau} d tau` by composite trapezoid with an
/// adaptive upper limit: integration stops once the tail falls below 1e-12
/// (or at a large cap for heavy tails).
pub fn mean_from_ccdf(ccdf: impl Fn(f64) -> f64) -> f64 {
    const STEP: f64 = 1e-3;
    const CAP: f64 = 1e6;
    let mut total = 0.0;
    let mut t = 0.0;
    let mut prev = ccdf(0.0).clamp(0.0, 1.0);
    loop {
        let next_t = t + STEP;
        let next = ccdf(next_t).clamp(0.0, 1.0);
        total += 0.5 * (prev + next) * STEP;
        t = next_t;
        prev = next;
        if prev < 1e-12 || t >= CAP {
            break;
        }
    }
    total
}
