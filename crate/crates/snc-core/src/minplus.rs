//! Min-plus algebra over envelope curves and bounding functions.
//!
//! A [`Curve`] is a non-negative, non-decreasing function of time used as a
//! traffic envelope or service envelope. A [`BoundingFunction`] is a
//! non-increasing, `[0, 1]`-valued tail bound attached to a stochastic
//! arrival or service curve. Both support min-plus convolution; curves also
//! support the horizontal-distance operator, and bounding functions the
//! Stieltjes convolution used for independent flows.
//!
//! All operations are pure functions on immutable values.
//!
//! Cumulative functions throughout the crate are right-continuous. The
//! alternative convention (defining them on half-open intervals) is not
//! implemented.

use crate::{Error, Result};

/// One affine piece of a piecewise-affine curve: `value + slope * (t - start)`
/// on `[start, next_start)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoint {
    pub start: f64,
    pub value: f64,
    pub slope: f64,
}

/// Deterministic envelope or service function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    /// `burst + rate * t` for `t >= 0` (value 0 at `t = 0` when `burst = 0`).
    Affine { burst: f64, rate: f64 },
    /// `rate * max(t - latency, 0)`.
    RateLatency { rate: f64, latency: f64 },
    /// Ordered affine pieces; starts strictly increasing, slopes >= 0.
    PiecewiseAffine(Vec<Breakpoint>),
}

impl Curve {
    pub fn affine(burst: f64, rate: f64) -> Result<Self> {
        if !(burst >= 0.0) || !(rate >= 0.0) {
            return Err(Error::InvalidCurve(format!(
                "affine curve needs burst >= 0 and rate >= 0, got burst={burst}, rate={rate}"
            )));
        }
        Ok(Curve::Affine { burst, rate })
    }

    pub fn rate_latency(rate: f64, latency: f64) -> Result<Self> {
        if !(rate >= 0.0) || !(latency >= 0.0) {
            return Err(Error::InvalidCurve(format!(
                "rate-latency curve needs rate >= 0 and latency >= 0, got rate={rate}, latency={latency}"
            )));
        }
        Ok(Curve::RateLatency { rate, latency })
    }

    pub fn piecewise(pieces: Vec<Breakpoint>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidCurve("no breakpoints".into()));
        }
        if pieces[0].start != 0.0 {
            return Err(Error::InvalidCurve("first breakpoint must start at t = 0".into()));
        }
        for w in pieces.windows(2) {
            if !(w[1].start > w[0].start) {
                return Err(Error::InvalidCurve("breakpoints must be strictly increasing in t".into()));
            }
            let end = w[0].value + w[0].slope * (w[1].start - w[0].start);
            if w[1].value + 1e-12 < end {
                return Err(Error::InvalidCurve("curve must be non-decreasing".into()));
            }
        }
        for p in &pieces {
            if !(p.slope >= 0.0) || !(p.value >= 0.0) {
                return Err(Error::InvalidCurve("values and slopes must be non-negative".into()));
            }
        }
        Ok(Curve::PiecewiseAffine(pieces))
    }

    /// Pointwise evaluation. Panics on negative `t`.
    pub fn eval(&self, t: f64) -> f64 {
        assert!(t >= 0.0, "curve evaluated at negative time {t}");
        match self {
            Curve::Affine { burst, rate } => burst + rate * t,
            Curve::RateLatency { rate, latency } => rate * (t - latency).max(0.0),
            Curve::PiecewiseAffine(pieces) => {
                let idx = match pieces.partition_point(|p| p.start <= t) {
                    0 => 0,
                    k => k - 1,
                };
                let p = &pieces[idx];
                p.value + p.slope * (t - p.start)
            }
        }
    }

    /// Canonical piecewise-affine view.
    pub fn pieces(&self) -> Vec<Breakpoint> {
        match self {
            Curve::Affine { burst, rate } => {
                vec![Breakpoint { start: 0.0, value: *burst, slope: *rate }]
            }
            Curve::RateLatency { rate, latency } => {
                if *latency == 0.0 {
                    vec![Breakpoint { start: 0.0, value: 0.0, slope: *rate }]
                } else {
                    vec![
                        Breakpoint { start: 0.0, value: 0.0, slope: 0.0 },
                        Breakpoint { start: *latency, value: 0.0, slope: *rate },
                    ]
                }
            }
            Curve::PiecewiseAffine(pieces) => pieces.clone(),
        }
    }

    /// Slope of the final affine piece.
    pub fn long_run_rate(&self) -> f64 {
        match self {
            Curve::Affine { rate, .. } => *rate,
            Curve::RateLatency { rate, .. } => *rate,
            Curve::PiecewiseAffine(pieces) => pieces.last().unwrap().slope,
        }
    }

    /// Smallest `t >= 0` with `f(t) >= v`, or `None` if `v` is never reached.
    pub fn time_to_reach(&self, v: f64) -> Option<f64> {
        let pieces = self.pieces();
        if pieces[0].value >= v {
            return Some(0.0);
        }
        for (k, p) in pieces.iter().enumerate() {
            if p.value >= v {
                return Some(p.start);
            }
            let end = pieces.get(k + 1).map(|n| n.start);
            match end {
                Some(end) => {
                    let reach = p.value + p.slope * (end - p.start);
                    if reach >= v && p.slope > 0.0 {
                        return Some(p.start + (v - p.value) / p.slope);
                    }
                }
                None => {
                    if p.slope > 0.0 {
                        return Some(p.start + (v - p.value) / p.slope);
                    }
                    return None;
                }
            }
        }
        None
    }
}

/// Result of the horizontal-distance operator. Divergence is a legal value,
/// not an error; downstream bound operations must propagate it as "no finite
/// bound".
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HorizontalDistance {
    Finite(f64),
    Infinite,
}

impl HorizontalDistance {
    pub fn finite(self) -> Option<f64> {
        match self {
            HorizontalDistance::Finite(d) => Some(d),
            HorizontalDistance::Infinite => None,
        }
    }
}

/// Min-plus convolution `h(y) = inf_{0<=x<=y} { f(x) + g(y-x) }`.
///
/// Exact closed forms for affine and rate-latency operands; a grid fallback
/// over a range derived from the operands' breakpoints otherwise.
pub fn minplus_convolve_curves(f: &Curve, g: &Curve) -> Curve {
    match (f, g) {
        (Curve::Affine { burst: b1, rate: r1 }, Curve::Affine { burst: b2, rate: r2 }) => {
            Curve::Affine { burst: b1 + b2, rate: r1.min(*r2) }
        }
        (
            Curve::RateLatency { rate: r1, latency: t1 },
            Curve::RateLatency { rate: r2, latency: t2 },
        ) => Curve::RateLatency { rate: r1.min(*r2), latency: t1 + t2 },
        (Curve::Affine { burst, rate }, Curve::RateLatency { rate: sr, latency })
        | (Curve::RateLatency { rate: sr, latency }, Curve::Affine { burst, rate }) => {
            // b + min(r, R) * (t - T)^+
            let slope = rate.min(*sr);
            if *latency == 0.0 {
                Curve::Affine { burst: *burst, rate: slope }
            } else {
                Curve::PiecewiseAffine(vec![
                    Breakpoint { start: 0.0, value: *burst, slope: 0.0 },
                    Breakpoint { start: *latency, value: *burst, slope },
                ])
            }
        }
        _ => {
            let last = |c: &Curve| c.pieces().last().unwrap().start;
            let t_max = 2.0 * (last(f) + last(g)) + 10.0;
            minplus_convolve_curves_on(f, g, t_max, 1024)
        }
    }
}

/// Grid evaluation of the min-plus convolution on `[0, t_max]` with `n`
/// uniform steps.
pub fn minplus_convolve_curves_on(f: &Curve, g: &Curve, t_max: f64, n: usize) -> Curve {
    let step = t_max / n as f64;
    let fv: Vec<f64> = (0..=n).map(|i| f.eval(i as f64 * step)).collect();
    let gv: Vec<f64> = (0..=n).map(|i| g.eval(i as f64 * step)).collect();
    let mut pieces = Vec::with_capacity(n + 1);
    let mut prev = f64::NAN;
    for i in 0..=n {
        let mut h = f64::INFINITY;
        for j in 0..=i {
            h = h.min(fv[j] + gv[i - j]);
        }
        let start = i as f64 * step;
        let slope = if i == n { g.long_run_rate().min(f.long_run_rate()) } else { 0.0 };
        if i > 0 {
            // retro-fit the slope of the previous sample
            let last = pieces.last_mut().unwrap();
            let last: &mut Breakpoint = last;
            last.slope = ((h - prev) / step).max(0.0);
        }
        pieces.push(Breakpoint { start, value: h, slope });
        prev = h;
    }
    Curve::PiecewiseAffine(pieces)
}

/// Maximum horizontal distance
/// `h(alpha, beta) = sup_{s>=0} inf { tau >= 0 : alpha(s) <= beta(s + tau) }`.
pub fn horizontal_distance(alpha: &Curve, beta: &Curve) -> HorizontalDistance {
    let ra = alpha.long_run_rate();
    let rb = beta.long_run_rate();
    if ra > rb {
        return HorizontalDistance::Infinite;
    }

    // The gap as a function of s is piecewise affine; its kinks sit at
    // alpha's breakpoints and where alpha(s) crosses a breakpoint value of
    // beta. Beyond the last kink the slope is ra/rb - 1 <= 0, so one probe
    // past every kink covers the tail.
    let mut candidates: Vec<f64> = alpha.pieces().iter().map(|p| p.start).collect();
    for bp in beta.pieces() {
        if let Some(s) = alpha.time_to_reach(bp.value) {
            candidates.push(s);
        }
    }
    let tail = candidates.iter().cloned().fold(0.0_f64, f64::max)
        + beta.pieces().last().unwrap().start
        + 1.0;
    candidates.push(tail);

    let mut sup = 0.0_f64;
    for s in candidates {
        let v = alpha.eval(s);
        match beta.time_to_reach(v) {
            Some(u) => sup = sup.max((u - s).max(0.0)),
            None => return HorizontalDistance::Infinite,
        }
    }
    HorizontalDistance::Finite(sup)
}

/// Non-increasing CCDF-like tail bound on `[0, inf)` with range `[0, 1]`.
/// Values at `x < 0` are treated as 1.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundingFunction {
    /// `e^{-theta x}`.
    Exponential { theta: f64 },
    /// Tail of the `stages`-fold convolution of `Exponential(theta)`
    /// (Erlang tail): `e^{-theta x} * sum_{j<stages} (theta x)^j / j!`.
    ErlangTail { theta: f64, stages: u32 },
    /// 1 for `x < length`, 0 for `x >= length`. `length = 0` is the zero
    /// function on `[0, inf)`.
    PointMassTail { length: f64 },
    /// Ordered `(x, p)` samples; left-hold (conservative) interpolation.
    EmpiricalGrid(Vec<(f64, f64)>),
    /// Wrapper forcing the range into `[0, 1]`.
    Clamped(Box<BoundingFunction>),
}

impl BoundingFunction {
    pub fn exponential(theta: f64) -> Result<Self> {
        if !(theta > 0.0) {
            return Err(Error::InvalidBounding(format!("exponential needs theta > 0, got {theta}")));
        }
        Ok(BoundingFunction::Exponential { theta })
    }

    pub fn erlang_tail(theta: f64, stages: u32) -> Result<Self> {
        if !(theta > 0.0) || stages == 0 {
            return Err(Error::InvalidBounding(format!(
                "erlang tail needs theta > 0 and stages >= 1, got theta={theta}, stages={stages}"
            )));
        }
        Ok(BoundingFunction::ErlangTail { theta, stages })
    }

    pub fn point_mass_tail(length: f64) -> Result<Self> {
        if !(length >= 0.0) {
            return Err(Error::InvalidBounding(format!("point mass needs length >= 0, got {length}")));
        }
        Ok(BoundingFunction::PointMassTail { length })
    }

    pub fn empirical(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidBounding("empirical grid is empty".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidBounding("empirical grid x must be strictly increasing".into()));
            }
            if w[1].1 > w[0].1 + 1e-12 {
                return Err(Error::InvalidBounding("empirical grid values must be non-increasing".into()));
            }
        }
        for &(_, p) in &points {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidBounding("empirical grid values must lie in [0, 1]".into()));
            }
        }
        Ok(BoundingFunction::EmpiricalGrid(points))
    }

    /// Pointwise evaluation; `x < 0` yields 1.
    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match self {
            BoundingFunction::Exponential { theta } => (-theta * x).exp(),
            BoundingFunction::ErlangTail { theta, stages } => {
                let mut term = 1.0;
                let mut sum = 1.0;
                for j in 1..*stages {
                    term *= theta * x / j as f64;
                    sum += term;
                }
                ((-theta * x).exp() * sum).min(1.0)
            }
            BoundingFunction::PointMassTail { length } => {
                if x < *length {
                    1.0
                } else {
                    0.0
                }
            }
            BoundingFunction::EmpiricalGrid(points) => {
                // hold the left value so interpolation never understates
                match points.partition_point(|&(gx, _)| gx <= x) {
                    0 => 1.0,
                    k => points[k - 1].1,
                }
            }
            BoundingFunction::Clamped(inner) => inner.eval(x).clamp(0.0, 1.0),
        }
    }

    /// X-positions where the function jumps; needed for exact infima in the
    /// min-plus convolution.
    fn step_points(&self) -> Vec<f64> {
        match self {
            BoundingFunction::PointMassTail { length } => vec![*length],
            BoundingFunction::EmpiricalGrid(points) => points.iter().map(|&(x, _)| x).collect(),
            BoundingFunction::Clamped(inner) => inner.step_points(),
            _ => Vec::new(),
        }
    }

    /// Whether this is the complement of a proper CDF, i.e. the tail
    /// vanishes at infinity.
    pub fn is_proper(&self) -> bool {
        match self {
            BoundingFunction::Exponential { .. }
            | BoundingFunction::ErlangTail { .. }
            | BoundingFunction::PointMassTail { .. } => true,
            BoundingFunction::EmpiricalGrid(points) => points.last().unwrap().1 <= 1e-9,
            BoundingFunction::Clamped(inner) => inner.is_proper(),
        }
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if grid[0] != 0.0 {
        return Err(Error::InvalidGrid("grid must start at 0".into()));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
        }
    }
    Ok(())
}

/// Uniform grid of `n` points spanning `[0, x_max]`.
pub fn uniform_grid(x_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| x_max * i as f64 / (n - 1) as f64).collect()
}

/// Min-plus convolution of two bounding functions at a single point:
/// `min(1, inf_{0<=y<=x} { f1(y) + f2(x-y) })`.
///
/// Equal-rate exponential pairs use the exact closed form `2 e^{-theta x/2}`;
/// otherwise a scan over jump candidates plus golden-section refinement.
pub fn minplus_bounding_at(f1: &BoundingFunction, f2: &BoundingFunction, x: f64) -> f64 {
    if x < 0.0 {
        return 1.0;
    }
    if let (
        BoundingFunction::Exponential { theta: t1 },
        BoundingFunction::Exponential { theta: t2 },
    ) = (f1, f2)
    {
        if t1 == t2 {
            return (2.0 * (-t1 * x / 2.0).exp()).min(1.0);
        }
    }

    let obj = |y: f64| f1.eval(y) + f2.eval(x - y);

    let mut best = obj(0.0).min(obj(x));
    for s in f1.step_points() {
        if (0.0..=x).contains(&s) {
            best = best.min(obj(s));
        }
    }
    for s in f2.step_points() {
        let y = x - s;
        if (0.0..=x).contains(&y) {
            best = best.min(obj(y));
        }
    }

    // coarse scan, then golden-section within the best bracket
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
    best = best.min(v1).min(v2);
    best.min(1.0)
}

/// Min-plus convolution of two bounding functions, evaluated on `grid`.
pub fn convolve_bounding(
    f1: &BoundingFunction,
    f2: &BoundingFunction,
    grid: &[f64],
) -> Result<BoundingFunction> {
    validate_grid(grid)?;
    let mut points = Vec::with_capacity(grid.len());
    let mut prev = 1.0_f64;
    for &x in grid {
        let v = minplus_bounding_at(f1, f2, x).min(prev);
        points.push((x, v));
        prev = v;
    }
    BoundingFunction::empirical(points)
}

/// Tail of the Stieltjes convolution of the underlying CDFs at one point:
/// `1 - (F1 * F2)(x)` with `Fi = 1 - FBari` and
/// `F1 * F2 (x) = int_0^x F1(x-y) dF2(y)`.
pub fn stieltjes_tail_at(f1: &BoundingFunction, f2: &BoundingFunction, x: f64) -> Result<f64> {
    if !f1.is_proper() || !f2.is_proper() {
        return Err(Error::ImproperTail);
    }
    if x < 0.0 {
        return Ok(1.0);
    }
    match (f1, f2) {
        (
            BoundingFunction::Exponential { theta: t1 },
            BoundingFunction::Exponential { theta: t2 },
        ) => {
            if t1 == t2 {
                // Erlang-2 tail
                Ok(((1.0 + t1 * x) * (-t1 * x).exp()).min(1.0))
            } else {
                // hypoexponential tail
                let v = (t2 * (-t1 * x).exp() - t1 * (-t2 * x).exp()) / (t2 - t1);
                Ok(v.clamp(0.0, 1.0))
            }
        }
        (BoundingFunction::Exponential { theta }, BoundingFunction::PointMassTail { length })
        | (BoundingFunction::PointMassTail { length }, BoundingFunction::Exponential { theta }) => {
            if x < *length {
                Ok(1.0)
            } else {
                Ok((-theta * (x - length)).exp())
            }
        }
        (
            BoundingFunction::PointMassTail { length: l1 },
            BoundingFunction::PointMassTail { length: l2 },
        ) => Ok(if x < l1 + l2 { 1.0 } else { 0.0 }),
        _ => {
            // numeric Stieltjes sum over the CDF of f2, with f2's jump
            // points inserted as grid nodes so point masses are captured
            let cdf1 = |y: f64| 1.0 - f1.eval(y);
            let cdf2 = |y: f64| 1.0 - f2.eval(y);
            const N: usize = 4000;
            let mut nodes: Vec<f64> = (0..=N).map(|i| x * i as f64 / N as f64).collect();
            for s in f2.step_points() {
                if (0.0..=x).contains(&s) {
                    nodes.push(s);
                }
            }
            nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut conv = cdf1(x) * cdf2(0.0); // mass of F2 at 0, if any
            for w in nodes.windows(2) {
                let mass = cdf2(w[1]) - cdf2(w[0]);
                if mass > 0.0 {
                    conv += cdf1(x - 0.5 * (w[0] + w[1])) * mass;
                }
            }
            Ok((1.0 - conv).clamp(0.0, 1.0))
        }
    }
}

/// Stieltjes-convolution tail evaluated on `grid`; rejects improper inputs.
pub fn stieltjes_convolve_tail(
    f1: &BoundingFunction,
    f2: &BoundingFunction,
    grid: &[f64],
) -> Result<BoundingFunction> {
    validate_grid(grid)?;
    let mut points = Vec::with_capacity(grid.len());
    let mut prev = 1.0_f64;
    for &x in grid {
        let v = stieltjes_tail_at(f1, f2, x)?.min(prev);
        points.push((x, v));
        prev = v;
    }
    BoundingFunction::empirical(points)
}
