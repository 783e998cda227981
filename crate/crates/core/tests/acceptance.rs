//! Acceptance criteria. Runs as a plain binary (`harness = false`) and prints
//! one PASS/FAIL line per criterion; exits nonzero if any fails.

use std::collections::BTreeMap;
use std::process::ExitCode;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fdrelay::coalition::{
    default_visit_order, form_coalitions, is_nash_stable, total_rate, FlowId, Partition, RateTable,
};
use fdrelay::experiment::{run_detailed, run_single, run_sweep, worked_example, SweepParam, SweepSpec};
use fdrelay::link_model::{
    rate_fd, rate_hd, received_power, AntennaPattern, LinkGeometry, RadioConfig, SPEED_OF_LIGHT,
};
use fdrelay::scheduler::{schedule_greedy, schedule_oracle, slot_demand, ScheduleOptions};
use fdrelay::{Policy, ScenarioConfig};

const SEEDS: usize = 100;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn golden_case() -> Outcome {
    let f = worked_example().expect("fixture runs");
    let sorted = f.sorted.schedule.satisfied_count();
    let unsorted = f.unsorted.schedule.satisfied_count();
    let only_a = f.unsorted.schedule.pairings.len() == 1 && f.unsorted.schedule.pairings[0].flow_id == FlowId(0);
    outcome(
        sorted == 4 && unsorted == 1 && only_a,
        format!("greedy {sorted}, unsorted {unsorted} (only A: {only_a})"),
    )
}

fn oracle_agreement() -> Outcome {
    let (mut close, mut above, total) = (0, 0, 200);
    let mut worst = 1.0f64;
    for k in 0..total {
        let cfg = ScenarioConfig { flow_count: 1 + k % 8, ..Default::default() };
        let seed = 10_000 + k as u64;
        let cg = run_single(&cfg, Policy::CgFd, seed, ScheduleOptions::default()).unwrap();
        let opt = run_single(&cfg, Policy::Oracle, seed, ScheduleOptions::default()).unwrap();
        let ratio = cg.sum_rate_bps / opt.sum_rate_bps;
        worst = worst.min(ratio);
        if ratio >= 0.98 {
            close += 1;
        }
        if cg.sum_rate_bps > opt.sum_rate_bps {
            above += 1;
        }
    }
    let frac = close as f64 / total as f64;
    outcome(
        frac >= 0.95 && above == 0,
        format!("{:.1}% within 2% of optimum, worst ratio {worst:.6}, {above} above optimum", frac * 100.0),
    )
}

fn sweep(param: SweepParam, policies: &[Policy]) -> fdrelay::experiment::SweepResult {
    let mut spec = SweepSpec::new(ScenarioConfig::default(), param, SEEDS);
    spec.policies = policies.to_vec();
    run_sweep(&spec).expect("sweep runs")
}

fn bandwidth_sweep() -> Outcome {
    let r = sweep(SweepParam::BsShare, &[Policy::CgFd]);
    let curve = r.curve(Policy::CgFd);
    let (best_a, best) = curve.iter().copied().fold((f64::NAN, f64::MIN), |acc, p| if p.1 > acc.1 { p } else { acc });
    let best_a = (best_a * 10.0).round() / 10.0;
    let pts: Vec<String> = curve.iter().map(|(a, v)| format!("{a:.1}:{:.3}", v / 1e9)).collect();
    outcome(
        [0.3, 0.4, 0.5].contains(&best_a),
        format!("argmax a = {best_a} ({:.3} Gb/s); curve [{}]", best / 1e9, pts.join(" ")),
    )
}

fn si_sweep() -> (Outcome, Outcome) {
    let r = sweep(SweepParam::SiLevel, &[Policy::CgFd, Policy::CgHd, Policy::Fbsc, Policy::Fmrc]);

    let fbsc: Vec<f64> = r.curve(Policy::Fbsc).iter().map(|p| p.1).collect();
    let (lo, hi) = fbsc.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    let fbsc_spread = (hi - lo) / lo;
    let fmrc = r.curve(Policy::Fmrc);
    let fmrc_decreasing = fmrc.windows(2).all(|w| w[1].1 < w[0].1);
    let fd = r.curve(Policy::CgFd);
    let hd = r.curve(Policy::CgHd);
    let crossover = fd.iter().zip(&hd).find(|(f, h)| h.1 > f.1).map(|(f, _)| f.0);
    let cross_ok = matches!(crossover, Some(b) if (-130.0..=-110.0).contains(&b));
    let c4 = outcome(
        fbsc_spread < 1e-4 && fmrc_decreasing && cross_ok,
        format!(
            "FBSC spread {:.2e}, FMRC strictly decreasing: {fmrc_decreasing}, CG_HD overtakes CG_FD at {}",
            fbsc_spread,
            crossover.map_or("never".to_string(), |b| format!("{b} dB")),
        ),
    );

    // per-seed dominance on every point of the sweep
    let mut by_run: BTreeMap<(i64, u64), BTreeMap<Policy, f64>> = BTreeMap::new();
    for rec in &r.raw {
        by_run.entry((rec.value as i64, rec.seed)).or_default().insert(rec.policy, rec.sum_rate_bps);
    }
    let violations = by_run
        .values()
        .filter(|m| m[&Policy::CgFd] < m[&Policy::Fbsc].max(m[&Policy::Fmrc]))
        .count();
    let fd150 = r.mean(Policy::CgFd, -150.0).unwrap().mean_sum_rate_bps;
    let hd150 = r.mean(Policy::CgHd, -150.0).unwrap().mean_sum_rate_bps;
    let fb150 = r.mean(Policy::Fbsc, -150.0).unwrap().mean_sum_rate_bps;
    let fm150 = r.mean(Policy::Fmrc, -150.0).unwrap().mean_sum_rate_bps;
    let gap = |x: f64| (fd150 - x) / x * 100.0;
    let c5 = outcome(
        violations == 0 && fd150 > hd150,
        format!(
            "{violations} per-seed violations over {} runs; at -150 dB CG_FD exceeds FBSC by {:.1}%, FMRC by {:.1}%, CG_HD by {:.1}%",
            by_run.len(),
            gap(fb150),
            gap(fm150),
            gap(hd150)
        ),
    );
    (c4, c5)
}

fn convergence() -> Outcome {
    let mut worst_mean = 0.0f64;
    let mut worst_at = 0;
    let mut max_ratio_ok = true;
    let mut non_increasing = 0;
    let mut means = Vec::new();
    for n in (20..=55).step_by(5) {
        let cfg = ScenarioConfig { flow_count: n, ..Default::default() };
        let mut total = 0usize;
        for seed in 0..SEEDS as u64 {
            let (_, eval) = run_detailed(&cfg, Policy::CgFd, seed, ScheduleOptions::default()).unwrap();
            let game = eval.association.game.as_ref().unwrap();
            total += game.switch_count;
            max_ratio_ok &= game.switch_count <= 2 * n;
            if game.trajectory.windows(2).any(|w| w[1] <= w[0]) {
                non_increasing += 1;
            }
        }
        let mean = total as f64 / SEEDS as f64;
        means.push(format!("{n}:{mean:.2}"));
        if mean > worst_mean {
            worst_mean = mean;
            worst_at = n;
        }
    }
    outcome(
        worst_mean <= 25.0 && max_ratio_ok && non_increasing == 0,
        format!(
            "largest mean switch count {worst_mean:.2} at N={worst_at}; max <= 2N: {max_ratio_ok}; \
             non-increasing trajectories: {non_increasing}; means [{}]",
            means.join(" ")
        ),
    )
}

fn scheduler_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=16usize);
        let m = rng.random_range(1..=100u64);
        let demands: Vec<_> = (0..n)
            .map(|i| {
                let rate = rng.random_range(1e8..3e9);
                let qos = rng.random_range(0.0..0.6 * rate);
                slot_demand(FlowId(i), qos, rate, m).unwrap()
            })
            .collect();
        if schedule_greedy(&demands, m).satisfied_count() != schedule_oracle(&demands, m).unwrap() {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over 1000 instances"))
}

fn nash_stability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut unstable, mut improvable) = (0, 0);
    for _ in 0..1000 {
        let n = rng.random_range(1..=24usize);
        let bs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3e9)).collect();
        let mr: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3e9)).collect();
        let rates = RateTable::new(bs, mr).unwrap();
        let start = Partition::random(n, &mut rng);
        let game = form_coalitions(&rates, start, &default_visit_order(n)).unwrap();
        if !is_nash_stable(&game.final_partition, &rates).unwrap() {
            unstable += 1;
        }
        let base = total_rate(&game.final_partition, &rates).unwrap();
        for f in 0..n {
            let mut p = game.final_partition.clone();
            p.switch(FlowId(f)).unwrap();
            if total_rate(&p, &rates).unwrap() > base {
                improvable += 1;
            }
        }
    }
    outcome(
        unstable == 0 && improvable == 0,
        format!("{unstable} unstable outcomes, {improvable} improving single-flow moves over 1000 instances"),
    )
}

fn link_model() -> Outcome {
    let mmw = RadioConfig::default();
    let legacy = RadioConfig { wavelength_m: SPEED_OF_LIGHT / 2.4e9, ..mmw };
    let geom = LinkGeometry { distance_m: 10.0, tx_gain_db: 0.0, rx_gain_db: 0.0 };
    let gap = 10.0 * (received_power(1.0, &geom, &legacy) / received_power(1.0, &geom, &mmw)).log10();
    let gap_ok = (gap - 27.96).abs() <= 0.01;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let cfg = RadioConfig { si_level: 0.0, efficiency: rng.random_range(0.1..1.0), ..mmw };
        let p_r = 10f64.powf(rng.random_range(-14.0..-4.0));
        let w = rng.random_range(1e7..2e9);
        let pt = rng.random_range(0.0..10.0);
        let (fd, hd) = (rate_fd(p_r, w, pt, &cfg), rate_hd(p_r, w, &cfg));
        worst = worst.max(((fd - hd) / hd).abs());
    }
    let rate_ok = worst <= 1e-12;

    let mut half_power_err = 0.0f64;
    for theta in [10.0, 30.0, 45.0, 60.0, 90.0, 120.0] {
        let pat = AntennaPattern::new(theta).unwrap();
        let g = pat.gain_db(theta / 2.0).unwrap();
        half_power_err = half_power_err.max((g - (pat.max_gain_db() - 3.01)).abs());
    }
    let hp_ok = half_power_err <= 1e-12;
    outcome(
        gap_ok && rate_ok && hp_ok,
        format!(
            "path-loss gap {gap:.4} dB; max |FD-HD|/HD at zero SI {worst:.1e}; half-power error {half_power_err:.1e} dB"
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 worked example: greedy 4, unsorted 1", golden_case()));
    results.push(("2 coalition game vs exhaustive optimum", oracle_agreement()));
    results.push(("3 bandwidth share argmax in {0.3, 0.4, 0.5}", bandwidth_sweep()));
    let (c4, c5) = si_sweep();
    results.push(("4 self-interference sweep trends", c4));
    results.push(("5 CG_FD dominance", c5));
    results.push(("6 switch-count convergence", convergence()));
    results.push(("7 greedy scheduler matches brute force", scheduler_exactness()));
    results.push(("8 Nash stability", nash_stability()));
    results.push(("9 link-model checks", link_model()));

    let mut failed = 0;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("INFO criterion 10 absolute sum-rate values: not asserted, trend and oracle checks only");
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
