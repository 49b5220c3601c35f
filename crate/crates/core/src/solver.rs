//! Exact synthesis on finite models: value iteration, greedy extraction, a
//! brute-force enumeration oracle, and the shape-solve-certify pipeline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{
    is_safe_policy, is_safe_policy_mdp, stationary_policy_value, ActionId, Mdp, Plant, Reward,
    RewardStructure, StateId, StationaryPolicy, TransitionModel, UnsafeSet,
};
use crate::scalar::Scalar;
use crate::shaping::{certify, default_min_path_prob, shape, shape_mdp, SafetyVerdict};

pub const MAX_SWEEPS: usize = 10_000_000;
pub const MAX_ENUMERATED_POLICIES: u64 = 1_000_000;

/// Default value-iteration tolerance: `1e-10`, loosened for low-precision scalars.
pub fn default_tolerance<S: Scalar>() -> S {
    S::lit(1e-10).max(S::epsilon() * S::lit(1e4))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction<S> {
    pub v: Vec<S>,
    /// Row-major `[state][action]`.
    pub q: Vec<S>,
    pub num_actions: usize,
    /// Sup-norm change of the final sweep.
    pub residual: S,
    pub sweeps: usize,
    /// Action favoured on exact ties (the untrusted controller when present).
    pub preferred: Option<ActionId>,
}

impl<S: Scalar> ValueFunction<S> {
    pub fn q(&self, s: StateId, a: ActionId) -> S {
        self.q[s * self.num_actions + a]
    }

    pub fn num_states(&self) -> usize {
        self.v.len()
    }
}

/// Names the tie-break action of a model, if it has one.
pub trait PreferredAction {
    fn preferred_action(&self) -> Option<ActionId>;
}

impl PreferredAction for Plant {
    fn preferred_action(&self) -> Option<ActionId> {
        self.untrusted_action()
    }
}

impl<S: Scalar> PreferredAction for Mdp<S> {
    fn preferred_action(&self) -> Option<ActionId> {
        self.action_names().iter().position(|a| a == crate::plant::UNTRUSTED_ACTION)
    }
}

/// Bellman iteration until the sup-norm change drops below
/// `tol * (1 - gamma) / (2 gamma)`, so the greedy policy is `tol`-optimal.
pub fn value_iteration<S, M, R>(model: &M, reward: &R, tol: S) -> Result<ValueFunction<S>>
where
    S: Scalar,
    M: TransitionModel<S> + PreferredAction,
    R: Reward<S> + ?Sized,
{
    if !(tol > S::zero()) {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be positive")));
    }
    let n = model.num_states();
    let m = model.num_actions();
    let gamma = reward.gamma();
    let threshold = tol * (S::one() - gamma) / (gamma + gamma);
    let mut v = vec![S::zero(); n];
    let mut q = vec![S::zero(); n * m];
    let mut next_v = vec![S::zero(); n];

    for sweep in 1..=MAX_SWEEPS {
        for s in 0..n {
            let mut best = S::neg_infinity();
            for a in 0..m {
                let value = reward.reward(s, a) + gamma * model.expect(s, a, |t| v[t]);
                q[s * m + a] = value;
                best = best.max(value);
            }
            next_v[s] = best;
        }
        let mut residual = S::zero();
        let mut scale = S::zero();
        for s in 0..n {
            residual = residual.max((next_v[s] - v[s]).abs());
            scale = scale.max(next_v[s].abs());
        }
        std::mem::swap(&mut v, &mut next_v);
        // A few ulps of the largest value is the best a sweep can resolve.
        let floor = S::lit(4.0) * S::epsilon() * scale;
        if residual <= threshold.max(floor) {
            return Ok(ValueFunction {
                v,
                q,
                num_actions: m,
                residual,
                sweeps: sweep,
                preferred: model.preferred_action(),
            });
        }
    }
    Err(Error::Guard(format!(
        "value iteration did not converge within {MAX_SWEEPS} sweeps"
    )))
}

/// Greedy policy; exact ties go to the preferred action, then the lowest index.
pub fn extract_policy<S: Scalar>(vf: &ValueFunction<S>) -> StationaryPolicy {
    let m = vf.num_actions;
    let actions = (0..vf.num_states())
        .map(|s| {
            let row = &vf.q[s * m..(s + 1) * m];
            let best = row.iter().copied().fold(S::neg_infinity(), S::max);
            match vf.preferred {
                Some(p) if row[p] == best => p,
                _ => row.iter().position(|&x| x == best).unwrap_or(0),
            }
        })
        .collect();
    StationaryPolicy::new(actions)
}

/// Exhaustive search over all stationary policies for the best safe one.
pub fn brute_force_best_safe<S: Scalar>(
    plant: &Plant,
    rs: &RewardStructure<S>,
    unsafe_set: &UnsafeSet,
) -> Result<Option<(StationaryPolicy, S)>> {
    let n = plant.num_states();
    let m = plant.num_actions();
    let count = (m as f64).powi(n as i32);
    if count > MAX_ENUMERATED_POLICIES as f64 {
        return Err(Error::TooManyPolicies {
            count,
            limit: MAX_ENUMERATED_POLICIES,
        });
    }
    let mut best: Option<(StationaryPolicy, S)> = None;
    for index in 0..count as u64 {
        let policy = StationaryPolicy::from_index(index, n, m);
        if !is_safe_policy(plant, &policy, unsafe_set) {
            continue;
        }
        let value: S = stationary_policy_value(plant, &policy, rs);
        if best.as_ref().map_or(true, |(_, b)| value > *b) {
            best = Some((policy, value));
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult<S> {
    pub policy: StationaryPolicy,
    /// Exact shaped value of `policy` at the initial state.
    pub shaped_value: S,
    pub verdict: SafetyVerdict,
    /// Exact value of `policy` under the unshaped reward.
    pub unshaped_value: S,
    pub penalty: S,
    pub residual: S,
}

/// Shape with `n = |Q|`, solve, extract, and certify with the exact
/// cycle-detected value of the extracted policy.
pub fn synthesize_safe_optimal<S: Scalar>(
    plant: &Plant,
    rs: &RewardStructure<S>,
    unsafe_set: &UnsafeSet,
) -> Result<SynthesisResult<S>> {
    synthesize_safe_optimal_with_tol(plant, rs, unsafe_set, default_tolerance())
}

pub fn synthesize_safe_optimal_with_tol<S: Scalar>(
    plant: &Plant,
    rs: &RewardStructure<S>,
    unsafe_set: &UnsafeSet,
    tol: S,
) -> Result<SynthesisResult<S>> {
    let shaped = shape(rs, unsafe_set, plant.num_states())?;
    let vf = value_iteration(plant, &shaped, tol)?;
    let policy = extract_policy(&vf);
    let shaped_value: S = stationary_policy_value(plant, &policy, &shaped);
    let verdict = certify(shaped_value);
    let unshaped_value = stationary_policy_value(plant, &policy, rs);
    debug_assert!(
        verdict == SafetyVerdict::NoSafePolicy || is_safe_policy(plant, &policy, unsafe_set)
    );
    Ok(SynthesisResult {
        policy,
        shaped_value,
        verdict,
        unshaped_value,
        penalty: shaped.penalty,
        residual: vf.residual,
    })
}

/// Iterative evaluation of a stationary policy on any model.
pub fn evaluate_policy<S, M, R>(model: &M, policy: &StationaryPolicy, reward: &R, tol: S) -> Result<Vec<S>>
where
    S: Scalar,
    M: TransitionModel<S>,
    R: Reward<S> + ?Sized,
{
    let n = model.num_states();
    let gamma = reward.gamma();
    let threshold = tol * (S::one() - gamma) / gamma;
    let mut v = vec![S::zero(); n];
    let mut next = vec![S::zero(); n];
    for _ in 0..MAX_SWEEPS {
        let mut residual = S::zero();
        let mut scale = S::zero();
        for s in 0..n {
            let a = policy.action(s);
            next[s] = reward.reward(s, a) + gamma * model.expect(s, a, |t| v[t]);
            residual = residual.max((next[s] - v[s]).abs());
            scale = scale.max(next[s].abs());
        }
        std::mem::swap(&mut v, &mut next);
        if residual <= threshold.max(S::lit(4.0) * S::epsilon() * scale) {
            return Ok(v);
        }
    }
    Err(Error::Guard("policy evaluation did not converge".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpSynthesisResult<S> {
    pub policy: StationaryPolicy,
    /// Iterative optimal shaped value at the initial state.
    pub shaped_value: S,
    pub verdict: SafetyVerdict,
    pub unshaped_value: S,
    pub penalty: S,
    pub min_path_prob: S,
    /// Reported alongside the verdict: a value within `residual` of zero is
    /// not a reliable sign.
    pub residual: S,
    pub policy_is_safe: bool,
}

/// MDP pipeline. `min_path_prob` defaults to `b^n`.
pub fn synthesize_safe_optimal_mdp<S: Scalar>(
    mdp: &Mdp<S>,
    rs: &RewardStructure<S>,
    unsafe_set: &UnsafeSet,
    min_path_prob: Option<S>,
) -> Result<MdpSynthesisResult<S>> {
    let n = mdp.num_states();
    let mpp = min_path_prob.unwrap_or_else(|| default_min_path_prob(mdp, n));
    let shaped = shape_mdp(rs, unsafe_set, n, mpp)?;
    let tol = default_tolerance::<S>();
    let vf = value_iteration(mdp, &shaped, tol)?;
    let policy = extract_policy(&vf);
    let shaped_value = vf.v[mdp.initial()];
    let unshaped = evaluate_policy(mdp, &policy, rs, tol)?;
    Ok(MdpSynthesisResult {
        verdict: certify(shaped_value),
        policy_is_safe: is_safe_policy_mdp(mdp, &policy, unsafe_set),
        unshaped_value: unshaped[mdp.initial()],
        shaped_value,
        policy,
        penalty: shaped.penalty,
        min_path_prob: mpp,
        residual: vf.residual,
    })
}

/// On-disk policy: state name -> action name, plus certificate metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub policy: BTreeMap<String, String>,
    pub verdict: SafetyVerdict,
    pub value: f64,
    pub shaped_value: f64,
    pub gamma: f64,
    pub penalty: f64,
}

impl PolicyFile {
    pub fn new<S: Scalar>(
        states: &[String],
        actions: &[String],
        policy: &StationaryPolicy,
        verdict: SafetyVerdict,
        value: S,
        shaped_value: S,
        gamma: S,
        penalty: S,
    ) -> Self {
        Self {
            policy: states
                .iter()
                .enumerate()
                .map(|(q, name)| (name.clone(), actions[policy.action(q)].clone()))
                .collect(),
            verdict,
            value: value.as_f64(),
            shaped_value: shaped_value.as_f64(),
            gamma: gamma.as_f64(),
            penalty: penalty.as_f64(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy file serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::plant::Reward;

    fn shaped(fx: &crate::plant_file::PlantSpec<f64>) -> crate::shaping::ShapedReward<f64> {
        shape(&fx.reward, &fx.unsafe_set, fx.plant.num_states()).unwrap()
    }

    #[test]
    fn value_iteration_examples() {
        let right = fixtures::fig2_right();
        let vf = value_iteration(&right.plant, &shaped(&right), 1e-10).unwrap();
        assert!((vf.v[0] - 10.0).abs() <= 1e-10);
        let left = fixtures::fig2_left();
        let vf = value_iteration(&left.plant, &shaped(&left), 1e-10).unwrap();
        assert!(vf.v[0].abs() <= 1e-10);
        assert!(vf.residual <= 1e-10);
    }

    #[test]
    fn single_state_fixed_point() {
        let plant = Plant::switching(&[(0, 0)]).unwrap();
        let c = 2.5f64;
        let rs = RewardStructure::from_fn(1, 2, 0.8, |_, _| c).unwrap();
        let vf = value_iteration(&plant, &rs, 1e-12).unwrap();
        assert!((vf.v[0] - c / (1.0 - 0.8)).abs() < 1e-12);
    }

    #[test]
    fn zero_tolerance_rejected() {
        let plant = Plant::switching(&[(0, 0)]).unwrap();
        let rs = RewardStructure::from_fn(1, 2, 0.8, |_, _| 1.0).unwrap();
        assert!(value_iteration(&plant, &rs, 0.0).is_err());
    }

    #[test]
    fn extract_policy_examples() {
        let right = fixtures::fig2_right();
        let vf = value_iteration(&right.plant, &shaped(&right), 1e-10).unwrap();
        let pol = extract_policy(&vf);
        assert_eq!(pol.action(0), 1);
        assert_eq!(pol.action(1), 1);
        let left = fixtures::fig2_left();
        let vf = value_iteration(&left.plant, &shaped(&left), 1e-10).unwrap();
        assert_eq!(extract_policy(&vf).action(0), 0);
    }

    #[test]
    fn exact_ties_prefer_untrusted() {
        let vf = ValueFunction {
            v: vec![1.0, 2.0],
            q: vec![1.0, 1.0, 2.0, 2.0],
            num_actions: 2,
            residual: 0.0,
            sweeps: 1,
            preferred: Some(1),
        };
        assert_eq!(extract_policy(&vf).actions(), &[1, 1]);
        let no_pref = ValueFunction { preferred: None, ..vf };
        assert_eq!(extract_policy(&no_pref).actions(), &[0, 0]);
    }

    #[test]
    fn brute_force_examples() {
        let right = fixtures::fig2_right();
        let (pol, v) = brute_force_best_safe(&right.plant, &right.reward, &right.unsafe_set)
            .unwrap()
            .unwrap();
        assert_eq!(pol.action(0), 1);
        assert_eq!(pol.action(1), 1);
        assert!((v - 10.0).abs() < 1e-12);

        let left = fixtures::fig2_left();
        let (pol, v) = brute_force_best_safe(&left.plant, &left.reward, &left.unsafe_set)
            .unwrap()
            .unwrap();
        assert_eq!(pol.action(0), 0);
        assert_eq!(v, 0.0);

        let doomed = Plant::switching(&[(1, 1), (1, 1)]).unwrap();
        let b = UnsafeSet::from_states(2, [1]).unwrap();
        let rs = RewardStructure::untrusted_use(&doomed, 0.9).unwrap();
        assert!(brute_force_best_safe(&doomed, &rs, &b).unwrap().is_none());
    }

    #[test]
    fn brute_force_refuses_large_plants() {
        let table: Vec<_> = (0..21).map(|i| (i, (i + 1) % 21)).collect();
        let plant = Plant::switching(&table).unwrap();
        let rs = RewardStructure::untrusted_use(&plant, 0.9).unwrap();
        let err = brute_force_best_safe(&plant, &rs, &UnsafeSet::empty(21)).unwrap_err();
        assert!(matches!(err, Error::TooManyPolicies { .. }));
    }

    #[test]
    fn synthesis_examples() {
        let right = fixtures::fig2_right();
        let res = synthesize_safe_optimal(&right.plant, &right.reward, &right.unsafe_set).unwrap();
        assert_eq!(res.verdict, SafetyVerdict::SafeExists);
        assert_eq!(res.policy.actions()[..2], [1, 1]);
        assert!((res.unshaped_value - 10.0).abs() < 1e-12);

        let left = fixtures::fig2_left();
        let res = synthesize_safe_optimal(&left.plant, &left.reward, &left.unsafe_set).unwrap();
        assert_eq!(res.verdict, SafetyVerdict::SafeExists);
        assert_eq!(res.unshaped_value, 0.0);
        assert!(is_safe_policy(&left.plant, &res.policy, &left.unsafe_set));

        let doomed = Plant::switching(&[(1, 1), (1, 1)]).unwrap();
        let b = UnsafeSet::from_states(2, [1]).unwrap();
        let rs = RewardStructure::untrusted_use(&doomed, 0.9).unwrap();
        let res = synthesize_safe_optimal(&doomed, &rs, &b).unwrap();
        assert_eq!(res.verdict, SafetyVerdict::NoSafePolicy);
        assert!(res.shaped_value < 0.0);
    }

    #[test]
    fn synthesis_in_f32() {
        let right = fixtures::fig2_right();
        let rs = RewardStructure::<f32>::untrusted_use(&right.plant, 0.9).unwrap();
        let res = synthesize_safe_optimal(&right.plant, &rs, &right.unsafe_set).unwrap();
        assert_eq!(res.verdict, SafetyVerdict::SafeExists);
        assert!((res.unshaped_value - 10.0).abs() < 1e-4);
    }

    #[test]
    fn negative_reward_propagates() {
        let right = fixtures::fig2_right();
        let rs = right.reward.scaled(-1.0).unwrap();
        assert!(matches!(
            synthesize_safe_optimal(&right.plant, &rs, &right.unsafe_set),
            Err(Error::NegativeReward { .. })
        ));
    }

    #[test]
    fn mdp_pipeline_matches_plant_pipeline_on_deterministic_mdp() {
        let right = fixtures::fig2_right();
        let mdp = Mdp::<f64>::from_plant(&right.plant);
        let res = synthesize_safe_optimal_mdp(&mdp, &right.reward, &right.unsafe_set, None).unwrap();
        assert_eq!(res.verdict, SafetyVerdict::SafeExists);
        assert!(res.policy_is_safe);
        assert_eq!(res.min_path_prob, 1.0);
        assert!((res.unshaped_value - 10.0).abs() < 1e-9);
    }

    #[test]
    fn mdp_pipeline_avoids_risky_action() {
        // U from q0 reaches the reward loop q1 with prob 0.9 but B with prob 0.1.
        let names = ["q0", "q1", "qB"].map(String::from).to_vec();
        let mdp = Mdp::new(
            names,
            vec!["S".into(), "U".into()],
            0,
            vec![
                vec![(0, 1.0)],
                vec![(1, 0.9), (2, 0.1)],
                vec![(1, 1.0)],
                vec![(1, 1.0)],
                vec![(2, 1.0)],
                vec![(2, 1.0)],
            ],
        )
        .unwrap();
        let b = UnsafeSet::from_states(3, [2]).unwrap();
        let rs = RewardStructure::from_fn(3, 2, 0.9, |q, a| if q == 1 && a == 1 { 1.0 } else { 0.0 })
            .unwrap();
        let res = synthesize_safe_optimal_mdp(&mdp, &rs, &b, None).unwrap();
        assert_eq!(res.verdict, SafetyVerdict::SafeExists);
        assert!(res.policy_is_safe);
        assert_eq!(res.policy.action(0), 0);
        assert!((res.min_path_prob - 0.1f64.powi(3)).abs() < 1e-15);
        assert!(res.penalty < -1e4);
        assert_eq!(res.unshaped_value, 0.0);
        assert_eq!(rs.reward(1, 1), 1.0);
    }

    #[test]
    fn policy_file_lists_every_state() {
        let right = fixtures::fig2_right();
        let res = synthesize_safe_optimal(&right.plant, &right.reward, &right.unsafe_set).unwrap();
        let file = PolicyFile::new(
            right.plant.state_names(),
            right.plant.action_names(),
            &res.policy,
            res.verdict,
            res.unshaped_value,
            res.shaped_value,
            0.9,
            res.penalty,
        );
        assert_eq!(file.policy.len(), 3);
        assert_eq!(file.policy["q0"], "U");
        let back: PolicyFile = serde_json::from_str(&file.to_json()).unwrap();
        assert_eq!(back, file);
    }
}
