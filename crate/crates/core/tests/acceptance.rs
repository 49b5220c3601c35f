//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use common::{policy_actions, RandomPlant, GAMMA};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rta_core::baseline::{interval_reach, CheckSet, Reach, ReachBox};
use rta_core::dynamics::{integrate, Model};
use rta_core::eval::{evaluate, EvalOptions, RtaTag};
use rta_core::fixtures::{self, goal};
use rta_core::lookahead::{lookahead_policy, recoverable_set, safe_set_lookahead};
use rta_core::plant::{run_reward, stationary_policy_value, StationaryPolicy};
use rta_core::qlearning::{plant_policy, train, train_plant, Hyper};
use rta_core::scenario::{Env, Mode, ScenarioConfig};
use rta_core::shaping::{shape, SafetyVerdict};
use rta_core::solver::{default_tolerance, synthesize_safe_optimal, value_iteration};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn certificate_agreement() -> Outcome {
    let start = Instant::now();
    let agree = (0..100u64)
        .filter(|&seed| {
            let rp = RandomPlant::generate(seed, 6);
            let res = synthesize_safe_optimal(&rp.plant(), &rp.rewards(), &rp.unsafe_set()).unwrap();
            (res.verdict == SafetyVerdict::SafeExists) == rp.oracle_best_safe().is_some()
        })
        .count();
    let secs = start.elapsed().as_secs_f64();
    outcome(agree == 100 && secs < 10.0, format!("{agree}/100 agree, {secs:.3} s"))
}

fn safe_optimality() -> Outcome {
    let mut total = 0;
    let mut ok = 0;
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let rp = RandomPlant::generate(seed, 6);
        let Some(best) = rp.oracle_best_safe() else { continue };
        total += 1;
        let res = synthesize_safe_optimal(&rp.plant(), &rp.rewards(), &rp.unsafe_set()).unwrap();
        let err = (res.unshaped_value - best).abs();
        worst = worst.max(err);
        if err <= 1e-9 && rp.oracle_safe(&policy_actions(&res.policy)) {
            ok += 1;
        }
    }
    outcome(ok == total, format!("{ok}/{total} safe-optimal, max |error| {worst:.2e}"))
}

fn left_fixture_lookahead() -> Outcome {
    let fx = fixtures::fig2_left();
    let la = safe_set_lookahead(&fx.plant, &fx.unsafe_set).unwrap();
    let run = fx.plant.unroll(&la, 2);
    let shown = run.display_with(fx.plant.state_names(), fx.plant.action_names());
    let unsafe_at_2 = fx.unsafe_set.contains(run.states()[2]);
    outcome(shown == "q0,U,q1,S,qB" && unsafe_at_2, format!("run {shown}"))
}

fn right_fixture_values() -> Outcome {
    let fx = fixtures::fig2_right();
    let r = recoverable_set(&fx.plant, &fx.unsafe_set).unwrap();
    let pi_r = lookahead_policy(&fx.plant, &r.members).unwrap();
    let v_r: f64 = stationary_policy_value(&fx.plant, &pi_r, &fx.reward);
    let all_u = StationaryPolicy::constant(3, fx.plant.untrusted_action().unwrap());
    let v_u: f64 = stationary_policy_value(&fx.plant, &all_u, &fx.reward);
    let expected = 1.0 / (1.0 - GAMMA);
    let set_ok = r.members.iter().copied().collect::<Vec<_>>() == vec![0];
    outcome(
        set_ok && v_r == 0.0 && (v_u - expected).abs() <= 1e-12,
        format!("R = {:?}, value(pi_R) = {v_r}, value(always U) = {v_u}", r.members),
    )
}

fn lookahead_safety() -> Outcome {
    let mut checked = 0;
    let mut safe = 0;
    let mut seed = 10_000u64;
    while checked < 100 {
        let rp = RandomPlant::generate(seed, 6);
        seed += 1;
        let plant = rp.plant();
        let r = recoverable_set(&plant, &rp.unsafe_set()).unwrap();
        if !r.contains(0) {
            continue;
        }
        checked += 1;
        let pol = lookahead_policy(&plant, &r.members).unwrap();
        if rp.oracle_safe(&policy_actions(&pol)) {
            safe += 1;
        }
    }
    outcome(safe == 100, format!("{safe}/{checked} lookahead policies safe"))
}

fn goal_fixture() -> Outcome {
    let variant = fixtures::sec6_goal_untrusted_use();
    let mut worst = 0.0f64;
    for k in 1..=10 {
        let run = fixtures::goal_detour_run(&variant.plant, k, 600);
        let r: f64 = run_reward(&run, &variant.reward);
        worst = worst.max((r - (1.0 / (1.0 - GAMMA) - GAMMA.powi(2 * k as i32))).abs());
    }
    // every stationary policy on the q_r-reward plant, simulated directly
    let fx = fixtures::sec6_goal();
    let mut goal_policies = 0;
    let mut nonzero = 0;
    for bits in 0..8usize {
        let actions: Vec<usize> = (0..3).map(|q| (bits >> q) & 1).collect();
        let mut q = goal::Q0;
        let mut reaches = false;
        let mut value = 0.0;
        let mut w = 1.0;
        for _ in 0..600 {
            reaches |= q == goal::QG;
            value += w * if q == goal::QR { 1.0 } else { 0.0 };
            w *= GAMMA;
            q = fx.plant.next(q, actions[q]);
        }
        if reaches {
            goal_policies += 1;
            if value != 0.0 {
                nonzero += 1;
            }
        }
    }
    outcome(
        worst <= 1e-12 && goal_policies > 0 && nonzero == 0,
        format!("k = 1..10 max |error| {worst:.2e}; {goal_policies} goal-reaching stationary policies, {nonzero} with nonzero reward"),
    )
}

fn circle_error(steps: usize) -> f64 {
    let x: Vec<f64> = integrate(Model::Dubins, &[1.0, 0.0, PI / 2.0, 1.0], &[1.0, 0.0], PI / steps as f64, steps).unwrap();
    (x[0] + 1.0).hypot(x[1])
}

fn dynamics() -> Outcome {
    let fine = circle_error(3142);
    let fine_half = circle_error(6284);
    // order measured where truncation dominates round-off
    let coarse = circle_error(16);
    let coarse_half = circle_error(32);
    let ratio = coarse / coarse_half;
    let acc: Vec<f64> = integrate(Model::Acc, &[0.0, 5.0], &[2.0], 0.01, 300).unwrap();
    let acc_err = (acc[0] - 24.0).abs().max((acc[1] - 11.0).abs());
    outcome(
        fine <= 1e-6 && ratio >= 8.0 && acc_err <= 1e-12,
        format!(
            "circle error {fine:.2e} at dt ~ 1e-3 (halved: {fine_half:.2e}, round-off floor); \
             dt pi/16 -> pi/32 ratio {ratio:.2}; acc error {acc_err:.2e}"
        ),
    )
}

/// Samples start points in the estimate box of the reset state and checks
/// every integrator step against the reach boxes, for joint U and joint S.
fn reach_soundness() -> Outcome {
    let mut escapes = 0;
    let mut checks = 0u64;
    let mut notes = Vec::new();
    for name in ScenarioConfig::builtin_names() {
        let env = Env::new(ScenarioConfig::builtin(name).unwrap()).unwrap();
        let lk = env.config().lookahead.clone();
        let period = env.config().control_period;
        let s = env.reset();
        let boxes: Vec<ReachBox> = s.followers.iter().map(|x| ReachBox::around(x, &lk, 0)).collect();
        for mode in [Mode::U, Mode::S] {
            let modes = vec![mode; env.agents()];
            let (horizon, trace) = (1..=lk.horizon)
                .rev()
                .find_map(|h| match interval_reach(&env, &boxes, 0, &modes, h, &lk) {
                    Reach::Bounded(t) => Some((h, t)),
                    Reach::Unknown { .. } => None,
                })
                .unwrap_or((0, rta_core::baseline::ReachTrace { boxes: vec![], control_period: period }));
            notes.push(format!("{name}/{mode:?}:{horizon}"));
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..100 {
                let mut f: Vec<Vec<f64>> = boxes
                    .iter()
                    .map(|b| b.lo.iter().zip(&b.hi).map(|(l, h)| if h > l { rng.gen_range(*l..=*h) } else { *l }).collect())
                    .collect();
                for step in 0..horizon {
                    for k in 0..period {
                        env.integrate_step(&mut f, env.time_of(step, k), &modes, false).unwrap();
                        let bs = &trace.boxes[step * period + k];
                        for (agent, x) in f.iter().enumerate() {
                            checks += 1;
                            if !bs[agent].contains(x) {
                                escapes += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    outcome(
        escapes == 0,
        format!("{escapes} escapes over {checks} point checks; bounded horizons {}", notes.join(" ")),
    )
}

fn acc_env() -> Env {
    Env::new(ScenarioConfig::builtin("acc-var1").unwrap()).unwrap()
}

fn trained_safety() -> Outcome {
    let env = acc_env();
    let start = Instant::now();
    let trained = train(&env, 20_000, 1).unwrap();
    let report = evaluate(&env, &EvalOptions::new(RtaTag::Qtable, 100, 11), Some(&trained.table)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut reach_opts = EvalOptions::new(RtaTag::Reach, 100, 11);
    reach_opts.check_set = Some(CheckSet::Recoverable);
    let reach = evaluate(&env, &reach_opts, None).unwrap();
    let (q, r) = (&report.aggregates, &reach.aggregates);
    outcome(
        q.fail_pct == 0.0 && secs < 300.0 && q.u_pct > r.u_pct,
        format!(
            "Fail% {}, U% {:.2} vs ReachRTA(recoverable) {:.2}, train+eval {secs:.1} s",
            q.fail_pct, q.u_pct, r.u_pct
        ),
    )
}

fn conservativeness() -> Outcome {
    let env = acc_env();
    let sim = evaluate(&env, &EvalOptions::new(RtaTag::Sim, 100, 5), None).unwrap();
    let reach = evaluate(&env, &EvalOptions::new(RtaTag::Reach, 100, 5), None).unwrap();
    let (s, r) = (sim.aggregates.u_pct, reach.aggregates.u_pct);
    outcome(r <= s + 2.0, format!("U% ReachRTA {r:.2} vs SimRTA {s:.2}"))
}

fn tabular_vs_exact() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for name in fixtures::NAMES {
        let fx = fixtures::by_name(name).unwrap();
        let n = fx.plant.num_states();
        let shaped = shape(&fx.reward, &fx.unsafe_set, n).unwrap();
        let exact = value_iteration(&fx.plant, &shaped, default_tolerance()).unwrap();
        let table = train_plant(&fx.plant, &fx.reward, &fx.unsafe_set, 10_000, 50, 3, Hyper::default()).unwrap();
        let learned = plant_policy(&table, &fx.plant).unwrap();
        let synth = synthesize_safe_optimal(&fx.plant, &fx.reward, &fx.unsafe_set).unwrap();
        let mut worst = 0.0f64;
        let mut mismatched = 0;
        for q in 0..n {
            // states where the exact action values tie admit either action
            let gap = exact.q(q, 0) - exact.q(q, 1);
            if gap.abs() > 1e-9 && learned.action(q) != synth.policy.action(q) {
                mismatched += 1;
            }
            for a in 0..2 {
                worst = worst.max((table.value(q, a) - exact.q(q, a)).abs());
            }
        }
        pass &= mismatched == 0 && worst <= 0.1;
        lines.push(format!("{name}: {mismatched} policy mismatches, max |Q error| {worst:.3}"));
    }
    outcome(pass, lines.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("certificate agrees with brute force on 100 random plants", certificate_agreement),
        ("synthesized policy is safe-optimal on 100 random plants", safe_optimality),
        ("safe-set lookahead on fig2-left runs into the unsafe state", left_fixture_lookahead),
        ("fig2-right recoverable set and values", right_fixture_values),
        ("recoverable-set lookahead is safe on 100 random plants", lookahead_safety),
        ("goal fixture: detour rewards and goal-reaching policies", goal_fixture),
        ("integrator accuracy and order", dynamics),
        ("interval reach contains sampled trajectories", reach_soundness),
        ("trained acc-var1 table: no failures, more U than ReachRTA(recoverable)", trained_safety),
        ("ReachRTA(safe) uses U no more than SimRTA + 2 points", conservativeness),
        ("tabular Q-learning recovers the exact policy on fixture plants", tabular_vs_exact),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{:>2}] {name}: {}", i + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
