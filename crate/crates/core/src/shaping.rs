//! Safety reward shaping: `r' = r[B -> p]` with `p = -r_max / (gamma^n (1 - gamma))`.
//!
//! With this penalty, an optimal stationary policy for `r'` whose value is
//! non-negative is safe and optimal among safe policies for `r`; a negative
//! optimal value certifies that no safe policy exists. For MDPs the penalty is
//! divided by a lower bound on the probability of any length-`n` path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{ActionId, Mdp, Reward, RewardStructure, StateId, UnsafeSet};
use crate::scalar::Scalar;

/// Penalties are never allowed below this magnitude.
pub const PENALTY_FLOOR: f64 = -1e300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapedReward<S> {
    pub base: RewardStructure<S>,
    pub penalty: S,
    pub unsafe_set: UnsafeSet,
    pub horizon_n: usize,
    pub min_path_prob: Option<S>,
    /// The raw penalty overflowed and was clamped to [`PENALTY_FLOOR`].
    pub clamped: bool,
}

impl<S: Scalar> Reward<S> for ShapedReward<S> {
    #[inline]
    fn reward(&self, q: StateId, a: ActionId) -> S {
        if self.unsafe_set.contains(q) {
            self.penalty
        } else {
            self.base.reward(q, a)
        }
    }

    fn gamma(&self) -> S {
        self.base.gamma()
    }
}

impl<S: Scalar> ShapedReward<S> {
    /// The shaped table `r'` materialized as a plain reward structure.
    pub fn to_structure(&self) -> RewardStructure<S> {
        let n = self.base.num_states();
        let m = self.base.num_actions();
        RewardStructure::from_fn(n, m, self.base.gamma(), |q, a| self.reward(q, a))
            .expect("shaped table keeps the base dimensions")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SafetyVerdict {
    SafeExists,
    NoSafePolicy,
}

/// `-r_max / (divisor * gamma^n * (1 - gamma))`, substituting `r_max = 1` when
/// the base reward is identically zero. Returns the value and whether it was clamped.
pub fn penalty_value<S: Scalar>(r_max: S, gamma: S, n: usize, divisor: S) -> (S, bool) {
    let r_max = if r_max > S::zero() { r_max } else { S::one() };
    let gamma_n = if n <= i32::MAX as usize {
        gamma.powi(n as i32)
    } else {
        gamma.powf(S::lit(n as f64))
    };
    let raw = -r_max / (divisor * gamma_n * (S::one() - gamma));
    let floor = S::lit(PENALTY_FLOOR).max(S::min_value());
    if raw.is_finite() && raw >= floor {
        (raw, false)
    } else {
        (floor, true)
    }
}

fn check_base<S: Scalar>(rs: &RewardStructure<S>, unsafe_set: &UnsafeSet, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Precondition("shaping horizon n must be at least 1".into()));
    }
    if unsafe_set.num_states() != rs.num_states() {
        return Err(Error::InvalidInput(format!(
            "unsafe set covers {} states, reward table {}",
            unsafe_set.num_states(),
            rs.num_states()
        )));
    }
    let m = rs.num_actions();
    if let Some((i, v)) = rs.table().iter().enumerate().find(|(_, v)| **v < S::zero()) {
        return Err(Error::NegativeReward {
            state: format!("state {}", i / m),
            action: format!("action {}", i % m),
            value: v.as_f64(),
        });
    }
    Ok(())
}

fn finish<S: Scalar>(
    rs: &RewardStructure<S>,
    unsafe_set: &UnsafeSet,
    n: usize,
    min_path_prob: Option<S>,
) -> ShapedReward<S> {
    let (penalty, clamped) = penalty_value(
        rs.r_max(),
        rs.gamma(),
        n,
        min_path_prob.unwrap_or_else(S::one),
    );
    if clamped {
        log::warn!(
            "shaping penalty for n = {n}, gamma = {} overflows; clamped to {PENALTY_FLOOR:e}",
            rs.gamma()
        );
    }
    ShapedReward {
        base: rs.clone(),
        penalty,
        unsafe_set: unsafe_set.clone(),
        horizon_n: n,
        min_path_prob,
        clamped,
    }
}

/// Shape a non-negative reward for a deterministic plant. Use `n = |Q|` for
/// plants and the episode cap for episodic training.
pub fn shape<S: Scalar>(
    rs: &RewardStructure<S>,
    unsafe_set: &UnsafeSet,
    n: usize,
) -> Result<ShapedReward<S>> {
    check_base(rs, unsafe_set, n)?;
    Ok(finish(rs, unsafe_set, n, None))
}

/// MDP variant: the penalty is further divided by `min_path_prob`.
pub fn shape_mdp<S: Scalar>(
    rs: &RewardStructure<S>,
    unsafe_set: &UnsafeSet,
    n: usize,
    min_path_prob: S,
) -> Result<ShapedReward<S>> {
    if !(min_path_prob > S::zero() && min_path_prob <= S::one()) {
        return Err(Error::InvalidInput(format!(
            "min_path_prob {min_path_prob} not in (0, 1]"
        )));
    }
    check_base(rs, unsafe_set, n)?;
    Ok(finish(rs, unsafe_set, n, Some(min_path_prob)))
}

/// Conservative path-probability bound `b^n`, with `b` the smallest nonzero
/// transition probability.
pub fn default_min_path_prob<S: Scalar>(mdp: &Mdp<S>, n: usize) -> S {
    mdp.min_transition_prob().powi(n.min(i32::MAX as usize) as i32)
}

/// A safe policy exists iff the optimal shaped value is non-negative.
pub fn certify<S: Scalar>(optimal_shaped_value: S) -> SafetyVerdict {
    if optimal_shaped_value >= S::zero() {
        SafetyVerdict::SafeExists
    } else {
        SafetyVerdict::NoSafePolicy
    }
}
