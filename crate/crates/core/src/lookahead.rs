//! Lookahead switching and recoverable sets.
//!
//! A set `R` is recoverable when it avoids `B` and is closed under the safety
//! action. The `R`-lookahead policy (use `U` only if its successor stays in
//! `R`) is then safe from any start in `R`, though generally not optimal.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{is_safe_policy, Plant, StateId, StationaryPolicy, UnsafeSet};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoverableSet {
    pub members: BTreeSet<StateId>,
    pub iterations_to_fixpoint: usize,
}

impl RecoverableSet {
    pub fn contains(&self, q: StateId) -> bool {
        self.members.contains(&q)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn designated(plant: &Plant) -> Result<(usize, usize)> {
    match (plant.safe_action(), plant.untrusted_action()) {
        (Some(s), Some(u)) => Ok((s, u)),
        _ => Err(Error::Precondition(
            "lookahead needs actions named `S` and `U`".into(),
        )),
    }
}

/// Largest recoverable set, by shrinking `Q \ B` until it is closed under `S`.
pub fn recoverable_set(plant: &Plant, unsafe_set: &UnsafeSet) -> Result<RecoverableSet> {
    let (s, _) = designated(plant)?;
    let n = plant.num_states();
    let mut member: Vec<bool> = (0..n).map(|q| !unsafe_set.contains(q)).collect();
    let mut iterations = 0;
    loop {
        let next: Vec<bool> = (0..n).map(|q| member[q] && member[plant.next(q, s)]).collect();
        iterations += 1;
        if next == member {
            break;
        }
        member = next;
    }
    Ok(RecoverableSet {
        members: (0..n).filter(|&q| member[q]).collect(),
        iterations_to_fixpoint: iterations,
    })
}

/// `pi_P(q) = U` iff `delta(q, U)` lies in `p`.
pub fn lookahead_policy(plant: &Plant, p: &BTreeSet<StateId>) -> Result<StationaryPolicy> {
    let (s, u) = designated(plant)?;
    Ok(StationaryPolicy::new(
        (0..plant.num_states())
            .map(|q| if p.contains(&plant.next(q, u)) { u } else { s })
            .collect(),
    ))
}

/// The lookahead on `Q \ B`.
pub fn safe_set_lookahead(plant: &Plant, unsafe_set: &UnsafeSet) -> Result<StationaryPolicy> {
    let p = (0..plant.num_states()).filter(|&q| !unsafe_set.contains(q)).collect();
    lookahead_policy(plant, &p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LookaheadSafetyCheck {
    pub holds: bool,
    /// The initial state is outside the recoverable set, so nothing was checked.
    pub vacuous: bool,
}

/// Builds `pi_R` for the largest recoverable set and checks that it is safe.
pub fn verify_lookahead_safety(plant: &Plant, unsafe_set: &UnsafeSet) -> Result<LookaheadSafetyCheck> {
    let r = recoverable_set(plant, unsafe_set)?;
    if !r.contains(plant.initial()) {
        return Ok(LookaheadSafetyCheck {
            holds: true,
            vacuous: true,
        });
    }
    let policy = lookahead_policy(plant, &r.members)?;
    Ok(LookaheadSafetyCheck {
        holds: is_safe_policy(plant, &policy, unsafe_set),
        vacuous: false,
    })
}

/// Braking-distance recoverability for car following: with the follower braking
/// at `a_max`, the gap stays above `c` iff `gap > c + max(0, v - v_lead)^2 / (2 a_max)`.
pub fn acc_recoverable<S: Scalar>(gap: S, v: S, v_lead: S, c: S, a_max: S) -> bool {
    let closing = (v - v_lead).max(S::zero());
    gap > c + closing * closing / (a_max + a_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::plant::{stationary_policy_value, Reward};

    #[test]
    fn recoverable_set_examples() {
        let right = fixtures::fig2_right();
        let r = recoverable_set(&right.plant, &right.unsafe_set).unwrap();
        assert_eq!(r.members, BTreeSet::from([0]));
        let left = fixtures::fig2_left();
        let r = recoverable_set(&left.plant, &left.unsafe_set).unwrap();
        assert_eq!(r.members, BTreeSet::from([0]));
        assert!(r.iterations_to_fixpoint <= 3);

        let loops = Plant::switching(&[(0, 1), (1, 2), (2, 0)]).unwrap();
        let r = recoverable_set(&loops, &UnsafeSet::empty(3)).unwrap();
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn missing_safe_action_is_a_precondition_error() {
        let plant = Plant::new(vec!["a".into()], vec!["go".into()], 0, vec![0]).unwrap();
        assert!(matches!(
            recoverable_set(&plant, &UnsafeSet::empty(1)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn lookahead_examples() {
        let left = fixtures::fig2_left();
        let pol = safe_set_lookahead(&left.plant, &left.unsafe_set).unwrap();
        assert_eq!(pol.action(0), 1);
        let run = left.plant.unroll(&pol, 2);
        assert_eq!(
            run.display_with(left.plant.state_names(), left.plant.action_names()),
            "q0,U,q1,S,qB"
        );

        let right = fixtures::fig2_right();
        let pol = lookahead_policy(&right.plant, &BTreeSet::from([0])).unwrap();
        assert_eq!(pol.action(0), 0);
        assert_eq!(pol.action(1), 1);

        let pol = lookahead_policy(&right.plant, &BTreeSet::new()).unwrap();
        assert!(pol.actions().iter().all(|&a| a == 0));
    }

    #[test]
    fn recoverable_lookahead_is_safe_but_suboptimal() {
        let right = fixtures::fig2_right();
        let r = recoverable_set(&right.plant, &right.unsafe_set).unwrap();
        let pi_r = lookahead_policy(&right.plant, &r.members).unwrap();
        let v_r: f64 = stationary_policy_value(&right.plant, &pi_r, &right.reward);
        let always_u = StationaryPolicy::constant(3, 1);
        let v_u: f64 = stationary_policy_value(&right.plant, &always_u, &right.reward);
        assert_eq!(v_r, 0.0);
        assert!((v_u - 1.0 / (1.0 - right.reward.gamma())).abs() < 1e-12);
    }

    #[test]
    fn lookahead_is_safe_on_fixtures() {
        for fx in [fixtures::fig2_left(), fixtures::fig2_right()] {
            let check = verify_lookahead_safety(&fx.plant, &fx.unsafe_set).unwrap();
            assert!(check.holds && !check.vacuous);
        }
        let doomed = Plant::switching(&[(1, 1), (1, 1)]).unwrap();
        let b = UnsafeSet::from_states(2, [1]).unwrap();
        let check = verify_lookahead_safety(&doomed, &b).unwrap();
        assert!(check.vacuous);
    }

    #[test]
    fn acc_predicate() {
        assert!(acc_recoverable(10.0, 20.0, 20.0, 4.0, 3.0));
        assert!(!acc_recoverable(4.0, 20.0, 20.0, 4.0, 3.0));
        // closing at 6 m/s needs 6 m of braking room on top of c
        assert!(!acc_recoverable(10.0, 26.0, 20.0, 4.0, 3.0));
        assert!(acc_recoverable(10.1, 26.0, 20.0, 4.0, 3.0));
    }
}
