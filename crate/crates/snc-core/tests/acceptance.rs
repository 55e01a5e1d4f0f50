//! End-to-end acceptance suite: one test per headline claim, each printing a
//! single PASS line when its assertions hold.
//!
//! The heavyweight simulations (single-flow M/M/1 and the two-flow priority
//! run, ~10^6 packets each) are built once and shared across tests.

use std::sync::OnceLock;

use snc_core::bounds::{
    self, delay_bound_cor1, delay_bound_cor2, delay_bound_cor3, delay_bound_thm2,
    delay_bound_thm5, delay_bound_thm6, exact_mm1_delay_ccdf, exact_mm1_priority_mean_delay,
    mean_delay_bound_eq43, mean_delay_bound_eq45, DelayBound, FlowSac,
};
use snc_core::minplus::{
    convolve_bounding, horizontal_distance, stieltjes_convolve_tail, uniform_grid,
    BoundingFunction, Curve,
};
use snc_core::node_sim::{pitfall_output, simulate, virtual_time, NodeConfig, Scheduler};
use snc_core::traffic::{
    generate_compound_poisson, CompoundPoissonSpec, FlowTag, LengthDist, Packet, Trace,
};
use snc_core::validation::{
    check_aggregate_recurrence, check_dominance, check_lemma1, check_lemma4, check_lemma5,
    check_sac_empirical, check_thm1_pathwise, discard_warmup, estimate_delay_ccdf,
};

const MU: f64 = 1.0;
const CAPACITY: f64 = 1.0;

fn cp_spec(lambda: f64) -> CompoundPoissonSpec {
    CompoundPoissonSpec { lambda, length_dist: LengthDist::Exponential { mu: MU } }
}

fn fifo() -> NodeConfig {
    NodeConfig { capacity: CAPACITY, scheduler: Scheduler::AggregateFifo }
}

fn priority_high_crossing() -> NodeConfig {
    NodeConfig {
        capacity: CAPACITY,
        scheduler: Scheduler::NonPreemptivePriority { high: FlowTag::Crossing },
    }
}

/// Delays of >= 10^6 packets through the single-flow node at lambda = 0.5
/// (an M/M/1 queue), warm-up removed.
fn single_flow_delays() -> &'static [f64] {
    static DELAYS: OnceLock<Vec<f64>> = OnceLock::new();
    DELAYS.get_or_init(|| {
        let trace =
            generate_compound_poisson(&cp_spec(0.5), FlowTag::Traversing, 2.1e6, 20_240_501)
                .unwrap();
        assert!(trace.packets().len() >= 1_000_000, "need at least 1e6 packets");
        let sim = simulate(&trace, None, &fifo()).unwrap();
        let delays: Vec<f64> =
            sim.flow_records(FlowTag::Traversing).map(|r| r.delay()).collect();
        discard_warmup(&delays).to_vec()
    })
}

/// Traversing-flow delays under non-preemptive priority to the crossing flow
/// at lambda_f = lambda_c = 0.25 (>= 10^6 packets total), warm-up removed.
fn priority_flow_delays() -> &'static [f64] {
    static DELAYS: OnceLock<Vec<f64>> = OnceLock::new();
    DELAYS.get_or_init(|| {
        let f = generate_compound_poisson(&cp_spec(0.25), FlowTag::Traversing, 2.1e6, 11)
            .unwrap();
        let c =
            generate_compound_poisson(&cp_spec(0.25), FlowTag::Crossing, 2.1e6, 12).unwrap();
        assert!(
            f.packets().len() + c.packets().len() >= 1_000_000,
            "need at least 1e6 packets in the aggregate"
        );
        let sim = simulate(&f, Some(&c), &priority_high_crossing()).unwrap();
        let delays: Vec<f64> =
            sim.flow_records(FlowTag::Traversing).map(|r| r.delay()).collect();
        discard_warmup(&delays).to_vec()
    })
}

#[test]
fn pitfall_table_reproduction() {
    let trace = Trace::new(
        vec![Packet { flow: FlowTag::Traversing, arrival: 1.0, length: 2.0, index: 1 }],
        4.0,
    )
    .unwrap();
    let sim = simulate(&trace, None, &fifo()).unwrap();

    let arrivals = [0.0, 2.0, 2.0, 2.0, 2.0];
    let departures = [0.0, 0.0, 0.0, 2.0, 2.0];
    let folklore = [0.0, 1.0, 2.0, 2.0, 2.0];
    for t in 0..=4usize {
        let tf = t as f64;
        assert_eq!(trace.cumulative_at(tf), arrivals[t], "A({t})");
        assert_eq!(sim.departed_at(FlowTag::Traversing, tf), departures[t], "A*({t})");
        assert_eq!(pitfall_output(&trace, CAPACITY, tf), folklore[t], "folklore({t})");
    }
    // the folklore formula overstates the real output exactly at t in {1, 2}
    for t in [1.0, 2.0] {
        assert!(pitfall_output(&trace, CAPACITY, t) > sim.departed_at(FlowTag::Traversing, t));
    }
    for t in [0.0, 3.0, 4.0] {
        assert_eq!(pitfall_output(&trace, CAPACITY, t), sim.departed_at(FlowTag::Traversing, t));
    }
    println!("PASS pitfall-table-reproduction: all three rows bit-exact, gap at t in {{1,2}}");
}

#[test]
fn mm1_exact_match() {
    let delays = single_flow_delays();
    let taus = [0.5, 1.0, 2.0, 4.0];
    let emp = estimate_delay_ccdf(delays, &taus, 0.01).unwrap();
    let mut worst: f64 = 0.0;
    for (tau, p) in taus.iter().zip(emp.p_hat()) {
        let exact = exact_mm1_delay_ccdf(0.5, MU, *tau).unwrap();
        let err = (p - exact).abs();
        worst = worst.max(err);
        assert!(
            err <= 0.01,
            "empirical CCDF off by {err:.4} at tau={tau} (emp={p}, exact={exact})"
        );
    }
    println!(
        "PASS mm1-exact-match: n={} packets, worst |emp - exact| = {worst:.2e} <= 0.01",
        delays.len()
    );
}

#[test]
fn lemma_suite_zero_violations() {
    let schedulers = [Scheduler::AggregateFifo, priority_high_crossing().scheduler];
    let horizon = 200.0; // ~100 packets across the two flows
    let times: Vec<f64> = (1..=20).map(|i| i as f64 * 10.0).collect();
    let rc = 0.5;
    let mut trials = 0usize;
    for seed in 0..1000u64 {
        let f = generate_compound_poisson(&cp_spec(0.25), FlowTag::Traversing, horizon, seed)
            .unwrap();
        let c = generate_compound_poisson(
            &cp_spec(0.25),
            FlowTag::Crossing,
            horizon,
            seed ^ 0xdead_beef,
        )
        .unwrap();
        if f.is_empty() {
            continue;
        }

        // single-flow facts: departure = virtual time at capacity (exact),
        // and the shortfall below C t never exceeds one packet
        let single = simulate(&f, None, &fifo()).unwrap();
        let v = virtual_time(&f, CAPACITY).unwrap();
        for (rec, vi) in single.flow_records(FlowTag::Traversing).zip(&v) {
            assert!(
                (rec.departure - vi).abs() <= 1e-9 * vi.abs().max(1.0),
                "departure != virtual time at capacity (seed {seed})"
            );
        }
        let r = check_thm1_pathwise(&f, &single, CAPACITY, &times).unwrap();
        assert!(r.pass, "single-flow shortfall violated (seed {seed}): {r}");

        for scheduler in schedulers {
            let sim = simulate(&f, Some(&c), &NodeConfig { capacity: CAPACITY, scheduler })
                .unwrap();
            for rate in [0.5 * CAPACITY, CAPACITY, 2.0 * CAPACITY] {
                let r = check_lemma1(&f, &sim, FlowTag::Traversing, rate, &times).unwrap();
                assert!(r.pass, "virtual-time gap violated (seed {seed}, rate {rate}): {r}");
                trials += r.trials;
            }
            let r4 = check_lemma4(&f, Some(&c), &sim, CAPACITY, rc).unwrap();
            assert!(r4.pass, "departure bound violated (seed {seed}): {r4}");
            trials += r4.trials;
            let r5 = check_lemma5(&f, Some(&c), &sim, CAPACITY, rc, &times).unwrap();
            assert!(r5.pass, "leftover shortfall violated (seed {seed}): {r5}");
            trials += r5.trials;
            let rr = check_aggregate_recurrence(&sim, CAPACITY);
            assert!(rr.pass, "aggregate recurrence violated (seed {seed}): {rr}");
            trials += rr.trials;
        }
    }
    println!("PASS lemma-suite: zero violations over 1000 traces ({trials} checks)");
}

#[test]
fn priority_example_means() {
    let exact = exact_mm1_priority_mean_delay(0.25, 0.25, MU).unwrap();
    assert!((exact - 7.0 / 3.0).abs() < 1e-12);
    let b45 = mean_delay_bound_eq45(0.25, 0.25, MU).unwrap();
    let b43 = mean_delay_bound_eq43(0.25, 0.25, MU).unwrap();
    assert!((b45 - 4.0).abs() < 1e-12);
    assert!((b43 - 8.0).abs() < 1e-12);

    let delays = priority_flow_delays();
    let n = delays.len();
    let mean: f64 = delays.iter().sum::<f64>() / n as f64;
    assert!(
        (mean - exact).abs() / exact <= 0.02,
        "simulated mean {mean:.4} not within 2% of {exact:.4}"
    );

    // batch-means confidence interval (delays are autocorrelated)
    let batches = 100;
    let per = n / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| delays[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
        .collect();
    let bm = means.iter().sum::<f64>() / batches as f64;
    let var =
        means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    let half = 1.984 * (var / batches as f64).sqrt();
    let (lo, hi) = (bm - half, bm + half);
    assert!(exact <= hi, "exact {exact:.4} above CI [{lo:.4}, {hi:.4}]");
    assert!(hi <= b45, "CI upper {hi:.4} above mean bound {b45}");
    assert!(b45 <= b43);
    println!(
        "PASS priority-example: exact={exact:.4} <= CI [{lo:.4}, {hi:.4}] <= {b45} <= {b43}, \
         sim mean {mean:.4} within 2%"
    );
}

#[test]
fn delay_bound_dominance() {
    let taus = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 80.0];

    // single flow, lambda = 0.5: both single-flow bounds at theta = mu - lambda
    let single = estimate_delay_ccdf(single_flow_delays(), &taus, 0.01).unwrap();
    let ff1 = bounds::sac_compound_poisson(0.5, MU, 0.5).unwrap();
    let packet_tail = BoundingFunction::exponential(MU).unwrap();
    let single_bounds = [
        DelayBound::new("packetized-service", {
            let ff = ff1.clone();
            let fl = packet_tail.clone();
            move |tau| delay_bound_cor1(&fl, &ff, CAPACITY, tau).unwrap()
        }),
        DelayBound::new("virtual-time", {
            let ff = ff1.clone();
            move |tau| delay_bound_thm2(&ff, CAPACITY, tau).unwrap()
        }),
    ];
    for b in &single_bounds {
        let r = check_dominance(&single, b);
        assert!(r.pass, "{r}");
        println!("PASS dominance[{}]: {r}", b.name());
    }

    // cross traffic, lambda_f = lambda_c = 0.25: the stability conditions
    // r_f < C - r_c and r_f + r_c < C force theta below mu - lambda; use
    // theta = 0.25 (rates 1/3) for the envelope-based bounds
    let emp = estimate_delay_ccdf(priority_flow_delays(), &taus, 0.01).unwrap();
    let theta = 0.25;
    let fc = bounds::sac_compound_poisson(0.25, MU, theta).unwrap();
    let ff = bounds::sac_compound_poisson(0.25, MU, theta).unwrap();
    let cross_bounds: Vec<DelayBound> = vec![
        DelayBound::new("aggregate-leftover", {
            let (fc, ff, fl) = (fc.clone(), ff.clone(), packet_tail.clone());
            move |tau| delay_bound_cor2(&fc, &fl, &ff, CAPACITY, tau).unwrap()
        }),
        DelayBound::new("flow-leftover-dependent", {
            let (fc, ff, fl) = (fc.clone(), ff.clone(), packet_tail.clone());
            move |tau| delay_bound_cor3(&fc, &fl, &ff, CAPACITY, tau, false).unwrap()
        }),
        DelayBound::new("flow-leftover-independent", {
            let (fc, ff, fl) = (fc.clone(), ff.clone(), packet_tail.clone());
            move |tau| delay_bound_cor3(&fc, &fl, &ff, CAPACITY, tau, true).unwrap()
        }),
        DelayBound::new("packetization-free-dependent", {
            let (fc, ff) = (fc.clone(), ff.clone());
            move |tau| delay_bound_thm5(&fc, &ff, CAPACITY, tau, false).unwrap()
        }),
        DelayBound::new("packetization-free-independent", {
            let (fc, ff) = (fc.clone(), ff.clone());
            move |tau| delay_bound_thm5(&fc, &ff, CAPACITY, tau, true).unwrap()
        }),
        DelayBound::new("moment-exponential", move |tau| {
            delay_bound_thm6(0.25, 0.25, MU, CAPACITY, tau).unwrap()
        }),
    ];
    for b in &cross_bounds {
        let r = check_dominance(&emp, b);
        assert!(r.pass, "{r}");
        println!("PASS dominance[{}]: {r}", b.name());
    }

    // negative control: an unjustified fast tail must fail
    let wrong = DelayBound::new("negative-control", |tau| (-10.0 * tau).exp());
    let r_single = check_dominance(&single, &wrong);
    let r_cross = check_dominance(&emp, &wrong);
    assert!(!r_single.pass && !r_cross.pass, "negative control did not fail");
    println!("PASS dominance-negative-control: e^(-10 tau) correctly rejected");
}

#[test]
fn algebra_oracles() {
    let theta = 0.5;
    let e = BoundingFunction::exponential(theta).unwrap();
    let grid = uniform_grid(20.0, 201);

    // min-plus of the equal-rate pair against a dense independent scan
    let conv = convolve_bounding(&e, &e, &grid).unwrap();
    for &x in &grid {
        let closed = (2.0 * (-theta * x / 2.0).exp()).min(1.0);
        let mut scan = f64::INFINITY;
        let steps = 200_000usize;
        for i in 0..=steps {
            let y = x * i as f64 / steps as f64;
            scan = scan.min((-theta * y).exp() + (-theta * (x - y)).exp());
        }
        let scan = scan.min(1.0);
        assert!((conv.eval(x) - closed).abs() <= 1e-9, "closed form mismatch at x={x}");
        assert!((closed - scan).abs() <= 1e-6, "oracle disagrees at x={x}");
    }

    // distribution convolution of equal exponentials against midpoint
    // quadrature of int_0^x (1 - e^{-theta(x-y)}) theta e^{-theta y} dy
    let tail = stieltjes_convolve_tail(&e, &e, &grid).unwrap();
    for &x in &grid {
        let closed = (1.0 + theta * x) * (-theta * x).exp();
        let steps = 20_000usize;
        let h = x / steps as f64;
        let mut cdf = 0.0;
        for i in 0..steps {
            let y = (i as f64 + 0.5) * h;
            cdf += (1.0 - (-theta * (x - y)).exp()) * theta * (-theta * y).exp() * h;
        }
        let quad = 1.0 - cdf;
        assert!((tail.eval(x) - closed).abs() <= 1e-9, "closed form mismatch at x={x}");
        assert!((closed - quad).abs() <= 1e-6, "quadrature disagrees at x={x}");
    }

    // horizontal distance between an affine envelope and a rate curve
    for (rate, burst, cap) in [(0.5, 2.0, 1.0), (1.0, 3.0, 1.0), (0.3, 1.0, 2.0), (1.0, 0.0, 1.0)]
    {
        let alpha = Curve::affine(burst, rate).unwrap();
        let beta = Curve::affine(0.0, cap).unwrap();
        let h = horizontal_distance(&alpha, &beta).finite().expect("finite distance");
        assert!((h - burst / cap).abs() <= 1e-9, "h={h}, expected {}", burst / cap);
    }
    println!("PASS algebra-oracles: closed forms within 1e-6 of independent oracles on [0,20]");
}

#[test]
fn sweep_bound_dominates_exact() {
    let mut cells = 0;
    let mut worst_ratio: f64 = 1.0;
    for i in 1..=9 {
        let rho = i as f64 * 0.1;
        for j in 0..=9 {
            let share = j as f64 * 0.1;
            let lambda_c = rho * share * MU;
            let lambda_f = rho * MU - lambda_c;
            let exact = exact_mm1_priority_mean_delay(lambda_f, lambda_c, MU).unwrap();
            let bound = mean_delay_bound_eq45(lambda_f, lambda_c, MU).unwrap();
            assert!(
                bound >= exact - 1e-12,
                "bound {bound:.4} below exact {exact:.4} at rho={rho}, share={share}"
            );
            worst_ratio = worst_ratio.max(bound / exact);
            cells += 1;
        }
    }
    println!(
        "PASS sweep: mean-delay bound >= exact at all {cells} cells (worst ratio {worst_ratio:.3})"
    );
}

#[test]
fn arrival_envelope_empirical() {
    let spec = cp_spec(0.5);
    let sac = bounds::sac_compound_poisson(0.5, MU, 0.5).unwrap();
    let alpha = sac.envelope();
    assert!((FlowSac::new(sac.rate, sac.bounding.clone()).unwrap().rate - 1.0).abs() < 1e-12);
    let x_grid = [1.0, 2.0, 4.0, 8.0];
    for t in [10.0, 100.0] {
        let r = check_sac_empirical(&spec, &alpha, &sac.bounding, 10_000, t, &x_grid, 777)
            .unwrap();
        assert!(r.pass, "{r}");
    }
    println!("PASS arrival-envelope: tail predicate holds at t in {{10,100}}, 1e4 replications");
}
