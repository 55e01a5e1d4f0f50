//! The experiment scenarios behind the CLI subcommands. Each returns
//! `Ok(true)` when every check passed, `Ok(false)` when a check failed, and
//! `Err` for configuration or I/O problems.

use std::error::Error;
use std::fs;
use std::path::Path;

use snc_core::bounds::{
    delay_bound_cor1, delay_bound_cor2, delay_bound_cor3, delay_bound_thm2, delay_bound_thm5,
    delay_bound_thm6, exact_mm1_delay_ccdf, exact_mm1_priority_mean_delay, mean_delay_bound_eq43,
    mean_delay_bound_eq45, sac_compound_poisson, DelayBound, FlowSac,
};
use snc_core::node_sim::{pitfall_output, simulate, NodeConfig, Scheduler, SimResult};
use snc_core::traffic::{
    generate_compound_poisson, CompoundPoissonSpec, FlowTag, LengthDist, Packet, Trace,
};
use snc_core::validation::{
    check_aggregate_recurrence, check_dominance, check_lemma1, check_lemma4, check_lemma5,
    check_sac_empirical, check_thm1_pathwise, discard_warmup, estimate_delay_ccdf, CheckReport,
    EmpiricalCcdf,
};

use crate::config::ExperimentConfig;

type RunResult = Result<bool, Box<dyn Error>>;

const TAUS: [f64; 9] = [0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 16.0, 32.0];

fn spec(lambda: f64, mu: f64) -> CompoundPoissonSpec {
    CompoundPoissonSpec { lambda, length_dist: LengthDist::Exponential { mu } }
}

fn flow_delays(sim: &SimResult, flow: FlowTag) -> Vec<f64> {
    let delays: Vec<f64> = sim.flow_records(flow).map(|r| r.delay()).collect();
    discard_warmup(&delays).to_vec()
}

fn report_all(reports: &[CheckReport]) -> bool {
    let mut pass = true;
    for r in reports {
        println!("{r}");
        pass &= r.pass;
    }
    pass
}

fn write_comparison_csv(
    path: &Path,
    emp: &EmpiricalCcdf,
    columns: &[(&str, Vec<f64>)],
) -> Result<(), Box<dyn Error>> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["tau".to_string(), "p_emp".into(), "halfwidth".into()];
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header)?;
    for (j, (tau, p)) in emp.grid().iter().zip(emp.p_hat()).enumerate() {
        let mut row = vec![tau.to_string(), p.to_string(), emp.halfwidth().to_string()];
        row.extend(columns.iter().map(|(_, v)| v[j].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Single flow through the node: simulated delay CCDF against the two
/// closed-form tail bounds and the exact M/M/1 result.
pub fn run_single_flow(cfg: &ExperimentConfig, out: &Path) -> RunResult {
    cfg.ensure_single_flow_stable()?;
    fs::create_dir_all(out)?;
    let (lambda, mu, c) = (cfg.lambda_f, cfg.mu, cfg.capacity);

    let trace =
        generate_compound_poisson(&spec(lambda, mu), FlowTag::Traversing, cfg.horizon, cfg.seed)?;
    let sim = simulate(
        &trace,
        None,
        &NodeConfig { capacity: c, scheduler: Scheduler::AggregateFifo },
    )?;
    let delays = flow_delays(&sim, FlowTag::Traversing);
    println!("single-flow: {} packets simulated (lambda={lambda}, mu={mu}, C={c})", delays.len());
    let emp = estimate_delay_ccdf(&delays, &TAUS, cfg.delta)?;

    // tightest admissible decay: arrival envelope rate exactly C
    let theta = mu - lambda / c;
    let ff = sac_compound_poisson(lambda, mu, theta)?;
    let packet_tail = snc_core::minplus::BoundingFunction::exponential(mu)?;

    let virtual_time_bound = DelayBound::new("virtual-time", {
        let ff = ff.clone();
        move |tau| delay_bound_thm2(&ff, c, tau).unwrap()
    });
    let packetized_bound = DelayBound::new("packetized-service", {
        let ff = ff.clone();
        let fl = packet_tail.clone();
        move |tau| delay_bound_cor1(&fl, &ff, c, tau).unwrap()
    });

    let columns: Vec<(&str, Vec<f64>)> = vec![
        ("bound_virtual_time", TAUS.iter().map(|&t| virtual_time_bound.eval(t)).collect()),
        ("bound_packetized", TAUS.iter().map(|&t| packetized_bound.eval(t)).collect()),
        (
            "exact",
            TAUS.iter().map(|&t| exact_mm1_delay_ccdf(lambda, mu * c, t).unwrap()).collect(),
        ),
    ];
    write_comparison_csv(&out.join("single_flow.csv"), &emp, &columns)?;

    let reports =
        [check_dominance(&emp, &virtual_time_bound), check_dominance(&emp, &packetized_bound)];
    Ok(report_all(&reports))
}

/// Two flows under non-preemptive priority to the crossing flow: traversing
/// delay CCDF and mean against all cross-traffic bounds and the exact
/// priority-queue mean.
pub fn run_cross_traffic(cfg: &ExperimentConfig, out: &Path) -> RunResult {
    cfg.ensure_cross_traffic_stable()?;
    fs::create_dir_all(out)?;
    let (lf, lc, mu, c) = (cfg.lambda_f, cfg.lambda_c, cfg.mu, cfg.capacity);
    let rho = cfg.rho();
    if rho >= 0.95 {
        println!(
            "warning: rho = {rho:.3} is close to saturation; long-run variance is high and \
             the configured horizon may be too short for stable estimates"
        );
    }

    let f = generate_compound_poisson(&spec(lf, mu), FlowTag::Traversing, cfg.horizon, cfg.seed)?;
    let cx = generate_compound_poisson(
        &spec(lc, mu),
        FlowTag::Crossing,
        cfg.horizon,
        cfg.seed.wrapping_add(1),
    )?;
    let sim = simulate(
        &f,
        Some(&cx),
        &NodeConfig {
            capacity: c,
            scheduler: Scheduler::NonPreemptivePriority { high: FlowTag::Crossing },
        },
    )?;
    let delays = flow_delays(&sim, FlowTag::Traversing);
    if delays.is_empty() {
        return Err("no traversing packets in the configured horizon".into());
    }
    println!(
        "cross-traffic: {} traversing packets (lambda_f={lf}, lambda_c={lc}, mu={mu}, C={c})",
        delays.len()
    );

    // mean with a batch-means confidence interval (delays are correlated)
    let n = delays.len();
    let mean = delays.iter().sum::<f64>() / n as f64;
    let batches = 100.min(n);
    let per = n / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| delays[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
        .collect();
    let bm = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (batches as f64 - 1.0).max(1.0);
    let half = 1.984 * (var / batches as f64).sqrt();

    let exact = exact_mm1_priority_mean_delay(lf, lc, mu * c)?;
    let b45 = mean_delay_bound_eq45(lf, lc, mu * c)?;
    let b43 = mean_delay_bound_eq43(lf, lc, mu * c)?;
    println!(
        "mean delay: simulated {mean:.4} (95% CI [{:.4}, {:.4}]), exact {exact:.4}, \
         bounds {b45:.4} <= {b43:.4}",
        bm - half,
        bm + half
    );
    let mut pass = exact <= b45 + 1e-12 && b45 <= b43 + 1e-12;
    if exact > bm + half || exact < bm - half {
        println!("warning: exact mean outside the simulated confidence interval");
    }

    // envelope-based bounds need strict stability, so split the admissible
    // decay range in half; the moment bound picks its own canonical choice
    let theta = 0.5 * (mu - (lf + lc) / c);
    let fc = sac_compound_poisson(lc.max(f64::MIN_POSITIVE), mu, theta)?;
    let ff = sac_compound_poisson(lf, mu, theta)?;
    let packet_tail = snc_core::minplus::BoundingFunction::exponential(mu)?;
    let emp = estimate_delay_ccdf(&delays, &TAUS, cfg.delta)?;

    let make = |name: &'static str,
                f: Box<dyn Fn(f64) -> f64 + Send + Sync>|
     -> DelayBound { DelayBound::new(name, move |tau| f(tau)) };
    let bounds: Vec<DelayBound> = vec![
        make("aggregate-leftover", {
            let (fc, ff, fl) = (fc.clone(), ff.clone(), packet_tail.clone());
            Box::new(move |tau| delay_bound_cor2(&fc, &fl, &ff, c, tau).unwrap())
        }),
        make("flow-leftover-dependent", {
            let (fc, ff, fl) = (fc.clone(), ff.clone(), packet_tail.clone());
            Box::new(move |tau| delay_bound_cor3(&fc, &fl, &ff, c, tau, false).unwrap())
        }),
        make("flow-leftover-independent", {
            let (fc, ff, fl) = (fc.clone(), ff.clone(), packet_tail.clone());
            Box::new(move |tau| delay_bound_cor3(&fc, &fl, &ff, c, tau, true).unwrap())
        }),
        make("packetization-free-dependent", {
            let (fc, ff) = (fc.clone(), ff.clone());
            Box::new(move |tau| delay_bound_thm5(&fc, &ff, c, tau, false).unwrap())
        }),
        make("packetization-free-independent", {
            let (fc, ff) = (fc.clone(), ff.clone());
            Box::new(move |tau| delay_bound_thm5(&fc, &ff, c, tau, true).unwrap())
        }),
        make(
            "moment-exponential",
            Box::new(move |tau| delay_bound_thm6(lf, lc, mu, c, tau).unwrap()),
        ),
    ];

    let columns: Vec<(&str, Vec<f64>)> = bounds
        .iter()
        .map(|b| (b.name(), TAUS.iter().map(|&t| b.eval(t)).collect()))
        .collect();
    write_comparison_csv(&out.join("cross_traffic.csv"), &emp, &columns)?;

    let reports: Vec<CheckReport> = bounds.iter().map(|b| check_dominance(&emp, b)).collect();
    pass &= report_all(&reports);
    Ok(pass)
}

/// Grid over total load and cross-traffic share: exact mean against the
/// closed-form mean bound, dominance asserted cell by cell.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> RunResult {
    fs::create_dir_all(out)?;
    let mu = cfg.mu;
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    w.write_record(["rho", "share", "exact", "bound", "ratio"])?;
    let mut pass = true;
    let mut worst: f64 = 1.0;
    for i in 1..=9 {
        let rho = i as f64 * 0.1;
        for j in 0..=9 {
            // the share grid stops at 0.9: at share = 1 the traversing flow
            // vanishes and the bound is unbounded
            let share = j as f64 * 0.1;
            let lambda_c = rho * share * mu;
            let lambda_f = rho * mu - lambda_c;
            let exact = exact_mm1_priority_mean_delay(lambda_f, lambda_c, mu)?;
            let bound = mean_delay_bound_eq45(lambda_f, lambda_c, mu)?;
            let ratio = bound / exact;
            worst = worst.max(ratio);
            if bound < exact - 1e-12 {
                println!("FAIL sweep cell rho={rho}, share={share}: bound {bound} < exact {exact}");
                pass = false;
            }
            w.write_record([
                rho.to_string(),
                share.to_string(),
                exact.to_string(),
                bound.to_string(),
                ratio.to_string(),
            ])?;
        }
    }
    w.flush()?;
    println!("sweep: 90 cells written, worst bound/exact ratio {worst:.3}, pass={pass}");
    Ok(pass)
}

/// The folklore constant-capacity output formula against the real output on
/// the one-packet counterexample.
pub fn run_pitfall(out: &Path) -> RunResult {
    fs::create_dir_all(out)?;
    let trace = Trace::new(
        vec![Packet { flow: FlowTag::Traversing, arrival: 1.0, length: 2.0, index: 1 }],
        4.0,
    )?;
    let sim = simulate(
        &trace,
        None,
        &NodeConfig { capacity: 1.0, scheduler: Scheduler::AggregateFifo },
    )?;
    let mut w = csv::Writer::from_path(out.join("pitfall.csv"))?;
    w.write_record(["t", "arrivals", "departures", "folklore_output"])?;
    println!("{:>3} {:>9} {:>11} {:>16}", "t", "A(t)", "A*(t)", "folklore A*(t)");
    let mut pass = true;
    for t in 0..=4 {
        let tf = t as f64;
        let a = trace.cumulative_at(tf);
        let d = sim.departed_at(FlowTag::Traversing, tf);
        let p = pitfall_output(&trace, 1.0, tf);
        let mark = if p != d { "  <- folklore overstates" } else { "" };
        println!("{t:>3} {a:>9} {d:>11} {p:>16}{mark}");
        w.write_record([tf.to_string(), a.to_string(), d.to_string(), p.to_string()])?;
        if p < d {
            pass = false; // the formula must never understate the output
        }
    }
    w.flush()?;
    let diverges = [1.0, 2.0]
        .iter()
        .all(|&t| pitfall_output(&trace, 1.0, t) > sim.departed_at(FlowTag::Traversing, t));
    println!(
        "folklore formula diverges from the real output at t in {{1,2}}: {}",
        if diverges { "yes" } else { "NO (unexpected)" }
    );
    Ok(pass && diverges)
}

/// Abridged everything-check: sample-path inequalities on randomized traces,
/// the arrival-envelope predicate, and single-flow bound dominance.
pub fn run_validate_all(cfg: &ExperimentConfig, out: &Path) -> RunResult {
    cfg.ensure_cross_traffic_stable()?;
    fs::create_dir_all(out)?;
    let mut pass = true;

    // sample-path inequalities over randomized two-flow traces
    let horizon = 200.0;
    let times: Vec<f64> = (1..=20).map(|i| i as f64 * 10.0).collect();
    let traces = 200usize;
    let rc = 0.5 * cfg.capacity;
    let mut merged: Vec<CheckReport> = Vec::new();
    for k in 0..traces {
        let seed = cfg.seed.wrapping_add(k as u64);
        let f = generate_compound_poisson(
            &spec(cfg.lambda_f, cfg.mu),
            FlowTag::Traversing,
            horizon,
            seed,
        )?;
        let cx = generate_compound_poisson(
            &spec(cfg.lambda_c.max(cfg.lambda_f), cfg.mu),
            FlowTag::Crossing,
            horizon,
            seed ^ 0x5ee3,
        )?;
        if f.is_empty() {
            continue;
        }
        for scheduler in [
            Scheduler::AggregateFifo,
            Scheduler::NonPreemptivePriority { high: FlowTag::Crossing },
        ] {
            let sim =
                simulate(&f, Some(&cx), &NodeConfig { capacity: cfg.capacity, scheduler })?;
            let reports = [
                check_lemma1(&f, &sim, FlowTag::Traversing, cfg.capacity, &times)?,
                check_lemma4(&f, Some(&cx), &sim, cfg.capacity, rc)?,
                check_lemma5(&f, Some(&cx), &sim, cfg.capacity, rc, &times)?,
                check_aggregate_recurrence(&sim, cfg.capacity),
            ];
            for r in reports {
                match merged.iter_mut().find(|m| m.name == r.name) {
                    Some(m) => m.absorb(&r),
                    None => merged.push(r),
                }
            }
        }
        let single = simulate(
            &f,
            None,
            &NodeConfig { capacity: cfg.capacity, scheduler: Scheduler::AggregateFifo },
        )?;
        let r = check_thm1_pathwise(&f, &single, cfg.capacity, &times)?;
        match merged.iter_mut().find(|m| m.name == r.name) {
            Some(m) => m.absorb(&r),
            None => merged.push(r),
        }
    }
    pass &= report_all(&merged);

    // arrival-envelope predicate for the traversing flow; any decay rate
    // below mu gives a valid (envelope, tail) pair
    let theta = 0.5 * cfg.mu;
    let sac = sac_compound_poisson(cfg.lambda_f, cfg.mu, theta)?;
    let envelope = FlowSac::new(sac.rate, sac.bounding.clone())?.envelope();
    let r = check_sac_empirical(
        &spec(cfg.lambda_f, cfg.mu),
        &envelope,
        &sac.bounding,
        cfg.replications.min(2000),
        50.0,
        &[1.0, 2.0, 4.0, 8.0],
        cfg.seed,
    )?;
    println!("{r}");
    pass &= r.pass;

    // single-flow bound dominance on a shorter run
    let short = ExperimentConfig { horizon: cfg.horizon.min(1e5), ..cfg.clone() };
    pass &= run_single_flow(&short, out)?;
    Ok(pass)
}
