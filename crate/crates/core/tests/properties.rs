mod common;

use common::{policy_actions, RandomPlant, GAMMA};
use proptest::prelude::*;
use rta_core::dynamics::Quantizer;
use rta_core::eval::{time_to_collision, TTC_SENTINEL};
use rta_core::interval::Interval;
use rta_core::lookahead::{lookahead_policy, recoverable_set};
use rta_core::plant::{stationary_policy_value, Reward, StationaryPolicy};
use rta_core::shaping::{certify, shape, SafetyVerdict};
use rta_core::solver::{default_tolerance, synthesize_safe_optimal, value_iteration};

fn interval() -> impl Strategy<Value = (Interval, f64)> {
    (-50.0..50.0f64, 0.0..10.0f64, 0.0..=1.0f64).prop_map(|(lo, w, t)| {
        let iv = Interval::new(lo, lo + w);
        (iv, (lo + t * w).min(lo + w))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn certificate_matches_enumeration(seed in any::<u64>()) {
        let rp = RandomPlant::generate(seed, 6);
        let res = synthesize_safe_optimal(&rp.plant(), &rp.rewards(), &rp.unsafe_set()).unwrap();
        let best = rp.oracle_best_safe();
        prop_assert_eq!(res.verdict == SafetyVerdict::SafeExists, best.is_some());
        if let Some(best) = best {
            prop_assert!(rp.oracle_safe(&policy_actions(&res.policy)));
            prop_assert!((res.unshaped_value - best).abs() < 1e-9, "{} vs {}", res.unshaped_value, best);
        }
    }

    #[test]
    fn shaping_only_touches_unsafe_states(seed in any::<u64>()) {
        let rp = RandomPlant::generate(seed, 6);
        let rs = rp.rewards();
        let shaped = shape(&rs, &rp.unsafe_set(), rp.n).unwrap();
        let bound = -rs.r_max().max(1.0) / (GAMMA.powi(rp.n as i32) * (1.0 - GAMMA));
        prop_assert!(shaped.penalty <= bound * (1.0 - 1e-12));
        for q in 0..rp.n {
            for a in 0..2 {
                let expected = if rp.unsafe_states[q] { shaped.penalty } else { rs.reward(q, a) };
                prop_assert_eq!(shaped.reward(q, a), expected);
            }
        }
    }

    #[test]
    fn greedy_value_dominates_every_stationary_policy(seed in any::<u64>()) {
        let rp = RandomPlant::generate(seed, 5);
        let plant = rp.plant();
        let rs = rp.rewards();
        let vf = value_iteration(&plant, &rs, default_tolerance()).unwrap();
        for p in rp.all_policies() {
            prop_assert!(vf.v[0] >= rp.oracle_value(&p) - 1e-9);
        }
    }

    #[test]
    fn recoverable_set_and_lookahead(seed in any::<u64>()) {
        let rp = RandomPlant::generate(seed, 6);
        let plant = rp.plant();
        let r = recoverable_set(&plant, &rp.unsafe_set()).unwrap();
        let oracle = rp.oracle_recoverable();
        for q in 0..rp.n {
            prop_assert_eq!(r.contains(q), oracle[q]);
            if r.contains(q) {
                prop_assert!(!rp.unsafe_states[q]);
                prop_assert!(r.contains(rp.delta[q].0));
            }
        }
        if r.contains(0) {
            let pol = lookahead_policy(&plant, &r.members).unwrap();
            prop_assert!(rp.oracle_safe(&policy_actions(&pol)));
        }
    }

    #[test]
    fn certify_sign_rule(v in -1e6..1e6f64) {
        let verdict = certify(v);
        prop_assert_eq!(verdict == SafetyVerdict::SafeExists, v >= 0.0);
    }

    #[test]
    fn library_value_matches_truncated_sum(seed in any::<u64>(), bits in any::<u8>()) {
        let rp = RandomPlant::generate(seed, 6);
        let actions: Vec<usize> = (0..rp.n).map(|q| ((bits >> q) & 1) as usize).collect();
        let v: f64 = stationary_policy_value(&rp.plant(), &StationaryPolicy::new(actions.clone()), &rp.rewards());
        prop_assert!((v - rp.oracle_value(&actions)).abs() < 1e-9);
    }

    #[test]
    fn interval_ops_contain_point_results(a in interval(), b in interval()) {
        let ((x, px), (y, py)) = (a, b);
        prop_assert!((x + y).contains(px + py));
        prop_assert!((x - y).contains(px - py));
        prop_assert!((x * y).contains(px * py));
        prop_assert!(x.sin().contains(px.sin()));
        prop_assert!(x.cos().contains(px.cos()));
        prop_assert!(x.sqr().contains(px * px));
        prop_assert!(x.hypot(y).contains(px.hypot(py)));
        prop_assert!(x.clamp(-3.0, 3.0).contains(px.clamp(-3.0, 3.0)));
        if !y.contains(0.0) || !x.contains(0.0) {
            prop_assert!(y.atan2(x).contains(py.atan2(px)));
        }
    }

    #[test]
    fn quantizer_cells_round_trip(cells in prop::collection::vec(1usize..8, 1..4), pick in any::<u64>()) {
        let d = cells.len();
        let qz = Quantizer::new(vec![-1.0; d], vec![2.0; d], cells.clone()).unwrap();
        let index = (pick % qz.num_cells() as u64) as usize;
        prop_assert_eq!(qz.quantize(&qz.dequantize(index)), index);
    }

    #[test]
    fn ttc_sign_follows_violation(mut dists in prop::collection::vec(0.0..50.0f64, 2..40), hit in any::<bool>()) {
        let times: Vec<f64> = (0..dists.len()).map(|k| 0.2 * k as f64).collect();
        if hit {
            *dists.last_mut().unwrap() = -0.5;
            prop_assert!(time_to_collision(&times, &dists) < 0.0);
        } else {
            let t = time_to_collision(&times, &dists);
            prop_assert!(t >= 0.0 && t <= TTC_SENTINEL);
        }
    }
}
