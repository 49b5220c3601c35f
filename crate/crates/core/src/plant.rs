//! Finite plants and MDPs, runs, switching policies, and run/policy rewards.
//!
//! States and actions are dense indices into the model's name tables. For
//! runtime-assurance models the action table holds `S` (safety controller) and
//! `U` (untrusted controller); see [`Plant::safe_action`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type StateId = usize;
pub type ActionId = usize;

/// Name of the action that selects the safety controller.
pub const SAFE_ACTION: &str = "S";
/// Name of the action that selects the untrusted controller.
pub const UNTRUSTED_ACTION: &str = "U";

/// Deterministic finite plant `(Q, q0, A, D)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plant {
    states: Vec<String>,
    actions: Vec<String>,
    initial: StateId,
    /// Row-major `[state][action] -> next state`.
    delta: Vec<StateId>,
}

impl Plant {
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        initial: StateId,
        delta: Vec<StateId>,
    ) -> Result<Self> {
        let n = states.len();
        let m = actions.len();
        if n == 0 {
            return Err(Error::InvalidInput("plant needs at least one state".into()));
        }
        if m == 0 {
            return Err(Error::InvalidInput("plant needs at least one action".into()));
        }
        if initial >= n {
            return Err(Error::InvalidInput(format!(
                "initial state {initial} out of range (n = {n})"
            )));
        }
        if delta.len() != n * m {
            return Err(Error::InvalidInput(format!(
                "transition table has {} entries, expected {}",
                delta.len(),
                n * m
            )));
        }
        if let Some(bad) = delta.iter().find(|&&q| q >= n) {
            return Err(Error::InvalidInput(format!(
                "transition target {bad} out of range (n = {n})"
            )));
        }
        Ok(Self {
            states,
            actions,
            initial,
            delta,
        })
    }

    /// Plant with states `q0..q{n-1}`, actions `S`, `U`, and a per-state
    /// `(next under S, next under U)` table.
    pub fn switching(table: &[(StateId, StateId)]) -> Result<Self> {
        let states = (0..table.len()).map(|i| format!("q{i}")).collect();
        let delta = table.iter().flat_map(|&(s, u)| [s, u]).collect();
        Self::new(
            states,
            vec![SAFE_ACTION.into(), UNTRUSTED_ACTION.into()],
            0,
            delta,
        )
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.actions[a]
    }

    pub fn state_index(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name)
    }

    pub fn action_index(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|s| s == name)
    }

    pub fn safe_action(&self) -> Option<ActionId> {
        self.action_index(SAFE_ACTION)
    }

    pub fn untrusted_action(&self) -> Option<ActionId> {
        self.action_index(UNTRUSTED_ACTION)
    }

    /// Checked transition lookup.
    pub fn step(&self, q: StateId, a: ActionId) -> Result<StateId> {
        if q >= self.num_states() || a >= self.num_actions() {
            return Err(Error::InvalidInput(format!(
                "({q}, {a}) outside {}x{} transition table",
                self.num_states(),
                self.num_actions()
            )));
        }
        Ok(self.next(q, a))
    }

    /// Unchecked transition lookup; panics on out-of-range indices.
    #[inline]
    pub fn next(&self, q: StateId, a: ActionId) -> StateId {
        self.delta[q * self.actions.len() + a]
    }

    /// The unique run of a stationary policy, truncated after `steps` transitions.
    pub fn unroll(&self, policy: &StationaryPolicy, steps: usize) -> FiniteRun {
        let mut run = FiniteRun::new(self.initial);
        for _ in 0..steps {
            let q = run.last_state();
            let a = policy.action(q);
            run.push(a, self.next(q, a));
        }
        run
    }
}

/// Probabilistic plant: each `(state, action)` maps to a distribution over states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mdp<S> {
    states: Vec<String>,
    actions: Vec<String>,
    initial: StateId,
    /// Row-major `[state][action] -> sparse distribution`.
    delta: Vec<Vec<(StateId, S)>>,
}

impl<S: Scalar> Mdp<S> {
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        initial: StateId,
        delta: Vec<Vec<(StateId, S)>>,
    ) -> Result<Self> {
        let n = states.len();
        let m = actions.len();
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput("MDP needs states and actions".into()));
        }
        if initial >= n {
            return Err(Error::InvalidInput(format!("initial state {initial} out of range")));
        }
        if delta.len() != n * m {
            return Err(Error::InvalidInput(format!(
                "transition table has {} rows, expected {}",
                delta.len(),
                n * m
            )));
        }
        let tol = S::lit(1e-12).max(S::epsilon() * S::lit(16.0));
        for (row, dist) in delta.iter().enumerate() {
            let mut total = S::zero();
            for &(q, p) in dist {
                if q >= n {
                    return Err(Error::InvalidInput(format!("successor {q} out of range")));
                }
                if !(p >= S::zero() && p <= S::one()) {
                    return Err(Error::InvalidInput(format!(
                        "probability {p} at ({}, {}) outside [0, 1]",
                        row / m,
                        row % m
                    )));
                }
                total += p;
            }
            if (total - S::one()).abs() > tol {
                return Err(Error::InvalidInput(format!(
                    "distribution at ({}, {}) sums to {total}",
                    row / m,
                    row % m
                )));
            }
        }
        Ok(Self {
            states,
            actions,
            initial,
            delta,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    pub fn distribution(&self, q: StateId, a: ActionId) -> &[(StateId, S)] {
        &self.delta[q * self.actions.len() + a]
    }

    /// Smallest nonzero transition probability.
    pub fn min_transition_prob(&self) -> S {
        self.delta
            .iter()
            .flatten()
            .map(|&(_, p)| p)
            .filter(|&p| p > S::zero())
            .fold(S::one(), S::min)
    }

    pub fn from_plant(plant: &Plant) -> Self {
        let m = plant.num_actions();
        let delta = (0..plant.num_states() * m)
            .map(|i| vec![(plant.next(i / m, i % m), S::one())])
            .collect();
        Self {
            states: plant.states.clone(),
            actions: plant.actions.clone(),
            initial: plant.initial,
            delta,
        }
    }
}

/// Common interface over deterministic plants and MDPs.
pub trait TransitionModel<S: Scalar> {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn initial(&self) -> StateId;

    /// `sum_{q'} P(q' | q, a) * f(q')`.
    fn expect(&self, q: StateId, a: ActionId, f: impl Fn(StateId) -> S) -> S;

    fn transition_prob(&self, q: StateId, a: ActionId, next: StateId) -> S;

    /// Successor drawn by inverse-CDF with the uniform variate `u` in `[0, 1)`.
    fn sample(&self, q: StateId, a: ActionId, u: f64) -> StateId;

    /// States with nonzero probability after `(q, a)`.
    fn support(&self, q: StateId, a: ActionId) -> Vec<StateId>;
}

impl<S: Scalar> TransitionModel<S> for Plant {
    fn num_states(&self) -> usize {
        Plant::num_states(self)
    }

    fn num_actions(&self) -> usize {
        Plant::num_actions(self)
    }

    fn initial(&self) -> StateId {
        self.initial
    }

    #[inline]
    fn expect(&self, q: StateId, a: ActionId, f: impl Fn(StateId) -> S) -> S {
        f(self.next(q, a))
    }

    fn transition_prob(&self, q: StateId, a: ActionId, next: StateId) -> S {
        if self.next(q, a) == next {
            S::one()
        } else {
            S::zero()
        }
    }

    fn sample(&self, q: StateId, a: ActionId, _u: f64) -> StateId {
        self.next(q, a)
    }

    fn support(&self, q: StateId, a: ActionId) -> Vec<StateId> {
        vec![self.next(q, a)]
    }
}

impl<S: Scalar> TransitionModel<S> for Mdp<S> {
    fn num_states(&self) -> usize {
        Mdp::num_states(self)
    }

    fn num_actions(&self) -> usize {
        Mdp::num_actions(self)
    }

    fn initial(&self) -> StateId {
        self.initial
    }

    fn expect(&self, q: StateId, a: ActionId, f: impl Fn(StateId) -> S) -> S {
        self.distribution(q, a)
            .iter()
            .map(|&(next, p)| p * f(next))
            .sum()
    }

    fn transition_prob(&self, q: StateId, a: ActionId, next: StateId) -> S {
        self.distribution(q, a)
            .iter()
            .filter(|&&(s, _)| s == next)
            .map(|&(_, p)| p)
            .sum()
    }

    fn sample(&self, q: StateId, a: ActionId, u: f64) -> StateId {
        let dist = self.distribution(q, a);
        let mut acc = 0.0;
        for &(next, p) in dist {
            acc += p.as_f64();
            if u < acc {
                return next;
            }
        }
        dist.iter()
            .rev()
            .find(|&&(_, p)| p > S::zero())
            .map(|&(s, _)| s)
            .unwrap_or(dist[0].0)
    }

    fn support(&self, q: StateId, a: ActionId) -> Vec<StateId> {
        self.distribution(q, a)
            .iter()
            .filter(|&&(_, p)| p > S::zero())
            .map(|&(s, _)| s)
            .collect()
    }
}

/// The unsafe set `B` as a membership table over state indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnsafeSet {
    member: Vec<bool>,
}

impl UnsafeSet {
    pub fn empty(num_states: usize) -> Self {
        Self {
            member: vec![false; num_states],
        }
    }

    pub fn from_states(num_states: usize, states: impl IntoIterator<Item = StateId>) -> Result<Self> {
        let mut set = Self::empty(num_states);
        for q in states {
            if q >= num_states {
                return Err(Error::InvalidInput(format!(
                    "unsafe state {q} out of range (n = {num_states})"
                )));
            }
            set.member[q] = true;
        }
        Ok(set)
    }

    #[inline]
    pub fn contains(&self, q: StateId) -> bool {
        self.member[q]
    }

    pub fn num_states(&self) -> usize {
        self.member.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = StateId> + '_ {
        self.member
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(q, _)| q)
    }

    pub fn is_empty(&self) -> bool {
        !self.member.iter().any(|&b| b)
    }
}

/// Anything that assigns a discounted reward to transitions.
pub trait Reward<S: Scalar> {
    fn reward(&self, q: StateId, a: ActionId) -> S;
    fn gamma(&self) -> S;
}

/// Reward table `r(q, a)` with discount `gamma` in `(0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardStructure<S> {
    num_actions: usize,
    table: Vec<S>,
    gamma: S,
}

impl<S: Scalar> RewardStructure<S> {
    pub fn new(num_states: usize, num_actions: usize, table: Vec<S>, gamma: S) -> Result<Self> {
        if !(gamma > S::zero() && gamma < S::one()) {
            return Err(Error::InvalidInput(format!("gamma {gamma} not in (0, 1)")));
        }
        if table.len() != num_states * num_actions {
            return Err(Error::InvalidInput(format!(
                "reward table has {} entries, expected {}",
                table.len(),
                num_states * num_actions
            )));
        }
        if let Some(v) = table.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite reward {v}")));
        }
        Ok(Self {
            num_actions,
            table,
            gamma,
        })
    }

    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        gamma: S,
        f: impl Fn(StateId, ActionId) -> S,
    ) -> Result<Self> {
        let table = (0..num_states * num_actions)
            .map(|i| f(i / num_actions, i % num_actions))
            .collect();
        Self::new(num_states, num_actions, table, gamma)
    }

    /// `r(q, a) = 1` exactly when `a` is the untrusted action.
    pub fn untrusted_use(plant: &Plant, gamma: S) -> Result<Self> {
        let u = plant.untrusted_action().ok_or_else(|| {
            Error::Precondition("plant has no action named `U`".into())
        })?;
        Self::from_fn(plant.num_states(), plant.num_actions(), gamma, |_, a| {
            if a == u {
                S::one()
            } else {
                S::zero()
            }
        })
    }

    pub fn num_states(&self) -> usize {
        self.table.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn r_max(&self) -> S {
        self.table.iter().copied().fold(S::neg_infinity(), S::max)
    }

    pub fn table(&self) -> &[S] {
        &self.table
    }

    /// Same table, different discount.
    pub fn with_gamma(&self, gamma: S) -> Result<Self> {
        Self::new(self.num_states(), self.num_actions, self.table.clone(), gamma)
    }

    /// Every entry multiplied by `k`.
    pub fn scaled(&self, k: S) -> Result<Self> {
        Self::new(
            self.num_states(),
            self.num_actions,
            self.table.iter().map(|&v| v * k).collect(),
            self.gamma,
        )
    }
}

impl<S: Scalar> Reward<S> for RewardStructure<S> {
    #[inline]
    fn reward(&self, q: StateId, a: ActionId) -> S {
        self.table[q * self.num_actions + a]
    }

    fn gamma(&self) -> S {
        self.gamma
    }
}

/// Borrowed prefix of a run: `states.len() == actions.len() + 1`.
#[derive(Clone, Copy, Debug)]
pub struct History<'a> {
    pub states: &'a [StateId],
    pub actions: &'a [ActionId],
}

impl History<'_> {
    pub fn last_state(&self) -> StateId {
        *self.states.last().expect("history always holds a state")
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Finite run `p0, a0, p1, ..., pk`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteRun {
    states: Vec<StateId>,
    actions: Vec<ActionId>,
}

impl FiniteRun {
    pub fn new(start: StateId) -> Self {
        Self {
            states: vec![start],
            actions: Vec::new(),
        }
    }

    /// Build from explicit sequences; `states` must be one longer than `actions`.
    pub fn from_parts(states: Vec<StateId>, actions: Vec<ActionId>) -> Result<Self> {
        if states.len() != actions.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "run has {} states and {} actions",
                states.len(),
                actions.len()
            )));
        }
        Ok(Self { states, actions })
    }

    pub fn push(&mut self, a: ActionId, next: StateId) {
        self.actions.push(a);
        self.states.push(next);
    }

    pub fn states(&self) -> &[StateId] {
        &self.states
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn last_state(&self) -> StateId {
        *self.states.last().unwrap()
    }

    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn history(&self) -> History<'_> {
        self.prefix(self.len())
    }

    /// The prefix holding the first `i` transitions.
    pub fn prefix(&self, i: usize) -> History<'_> {
        History {
            states: &self.states[..=i],
            actions: &self.actions[..i],
        }
    }

    /// Render as `q0,U,q1,S,qB` using the plant's name tables.
    pub fn display_with(&self, states: &[String], actions: &[String]) -> String {
        let mut parts = vec![states[self.states[0]].clone()];
        for (a, q) in self.actions.iter().zip(&self.states[1..]) {
            parts.push(actions[*a].clone());
            parts.push(states[*q].clone());
        }
        parts.join(",")
    }
}

/// Distribution over actions returned by a switching policy.
#[derive(Clone, Debug, PartialEq)]
pub enum ActionDist {
    Deterministic(ActionId),
    Mixed(Vec<f64>),
}

impl ActionDist {
    pub fn uniform(num_actions: usize) -> Self {
        ActionDist::Mixed(vec![1.0 / num_actions as f64; num_actions])
    }

    pub fn prob(&self, a: ActionId) -> f64 {
        match self {
            ActionDist::Deterministic(b) => {
                if *b == a {
                    1.0
                } else {
                    0.0
                }
            }
            ActionDist::Mixed(p) => p.get(a).copied().unwrap_or(0.0),
        }
    }

    pub fn sample(&self, u: f64) -> ActionId {
        match self {
            ActionDist::Deterministic(a) => *a,
            ActionDist::Mixed(p) => {
                let mut acc = 0.0;
                for (a, &pa) in p.iter().enumerate() {
                    acc += pa;
                    if u < acc {
                        return a;
                    }
                }
                p.iter().rposition(|&pa| pa > 0.0).unwrap_or(0)
            }
        }
    }
}

/// A general randomized, history-dependent switching policy.
pub trait HistoryPolicy {
    fn distribution(&self, history: History<'_>) -> ActionDist;
}

impl<F> HistoryPolicy for F
where
    F: Fn(History<'_>) -> ActionDist,
{
    fn distribution(&self, history: History<'_>) -> ActionDist {
        self(history)
    }
}

/// Memoryless deterministic policy `Q -> A`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StationaryPolicy {
    actions: Vec<ActionId>,
}

impl StationaryPolicy {
    pub fn new(actions: Vec<ActionId>) -> Self {
        Self { actions }
    }

    pub fn constant(num_states: usize, a: ActionId) -> Self {
        Self {
            actions: vec![a; num_states],
        }
    }

    /// The `index`-th policy in mixed-radix enumeration of `A^Q`.
    pub fn from_index(mut index: u64, num_states: usize, num_actions: usize) -> Self {
        let m = num_actions as u64;
        let actions = (0..num_states)
            .map(|_| {
                let a = (index % m) as ActionId;
                index /= m;
                a
            })
            .collect();
        Self { actions }
    }

    #[inline]
    pub fn action(&self, q: StateId) -> ActionId {
        self.actions[q]
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn num_states(&self) -> usize {
        self.actions.len()
    }
}

impl HistoryPolicy for StationaryPolicy {
    fn distribution(&self, history: History<'_>) -> ActionDist {
        ActionDist::Deterministic(self.actions[history.last_state()])
    }
}

/// Uniformly random choice among `num_actions` actions.
#[derive(Clone, Copy, Debug)]
pub struct UniformPolicy {
    pub num_actions: usize,
}

impl HistoryPolicy for UniformPolicy {
    fn distribution(&self, _history: History<'_>) -> ActionDist {
        ActionDist::uniform(self.num_actions)
    }
}

/// Sample a run of exactly `horizon` transitions; deterministic for a fixed seed.
pub fn generate_run<S, M, P>(model: &M, policy: &P, horizon: usize, seed: u64) -> FiniteRun
where
    S: Scalar,
    M: TransitionModel<S>,
    P: HistoryPolicy + ?Sized,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut run = FiniteRun::new(model.initial());
    for _ in 0..horizon {
        let dist = policy.distribution(run.history());
        let a = dist.sample(rng.gen::<f64>());
        let next = model.sample(run.last_state(), a, rng.gen::<f64>());
        run.push(a, next);
    }
    run
}

/// Discounted reward `sum_i gamma^i r(p_i, a_i)` over the run's transitions.
pub fn run_reward<S: Scalar, R: Reward<S> + ?Sized>(run: &FiniteRun, reward: &R) -> S {
    let gamma = reward.gamma();
    let mut discount = S::one();
    let mut total = S::zero();
    for (&q, &a) in run.states.iter().zip(&run.actions) {
        total += discount * reward.reward(q, a);
        discount *= gamma;
    }
    total
}

/// Exact infinite-horizon value of a stationary policy from `start`.
///
/// The unique run enters a cycle within `n` steps; the value is the prefix sum
/// plus `gamma^s * C / (1 - gamma^L)` for the cycle starting at step `s` with
/// length `L` and one-period discounted reward `C`.
pub fn stationary_value_from<S: Scalar, R: Reward<S> + ?Sized>(
    plant: &Plant,
    policy: &StationaryPolicy,
    reward: &R,
    start: StateId,
) -> S {
    let n = plant.num_states();
    let mut first_visit = vec![usize::MAX; n];
    let mut path = Vec::with_capacity(n + 1);
    let mut q = start;
    while first_visit[q] == usize::MAX {
        first_visit[q] = path.len();
        path.push(q);
        q = plant.next(q, policy.action(q));
    }
    let cycle_start = first_visit[q];
    let gamma = reward.gamma();

    let mut discount = S::one();
    let mut prefix = S::zero();
    for &p in &path[..cycle_start] {
        prefix += discount * reward.reward(p, policy.action(p));
        discount *= gamma;
    }
    let gamma_s = discount;
    let mut period = S::zero();
    let mut d = S::one();
    for &p in &path[cycle_start..] {
        period += d * reward.reward(p, policy.action(p));
        d *= gamma;
    }
    // d == gamma^L
    prefix + gamma_s * period / (S::one() - d)
}

/// Exact value of a stationary policy from the initial state.
pub fn stationary_policy_value<S: Scalar, R: Reward<S> + ?Sized>(
    plant: &Plant,
    policy: &StationaryPolicy,
    reward: &R,
) -> S {
    stationary_value_from(plant, policy, reward, plant.initial())
}

/// `P_pi(Cyl(tau))`, including transition probabilities for MDPs.
///
/// Runs that do not start at the initial state or leave the model's support get 0.
pub fn cylinder_probability<S, M, P>(model: &M, policy: &P, tau: &FiniteRun) -> S
where
    S: Scalar,
    M: TransitionModel<S>,
    P: HistoryPolicy + ?Sized,
{
    if tau.states[0] != model.initial() {
        return S::zero();
    }
    let mut prob = S::one();
    for i in 0..tau.len() {
        let (q, a, next) = (tau.states[i], tau.actions[i], tau.states[i + 1]);
        if q >= model.num_states() || a >= model.num_actions() || next >= model.num_states() {
            return S::zero();
        }
        let pa = S::lit(policy.distribution(tau.prefix(i)).prob(a));
        prob *= pa * model.transition_prob(q, a, next);
        if prob == S::zero() {
            break;
        }
    }
    prob
}

/// Whether the unique run of `policy` on a deterministic plant avoids `unsafe_set`.
pub fn is_safe_policy(plant: &Plant, policy: &StationaryPolicy, unsafe_set: &UnsafeSet) -> bool {
    let mut q = plant.initial();
    for _ in 0..plant.num_states() {
        if unsafe_set.contains(q) {
            return false;
        }
        q = plant.next(q, policy.action(q));
    }
    true
}

/// Safety of a stationary policy on an MDP: `B` unreachable in the policy's support graph.
pub fn is_safe_policy_mdp<S: Scalar>(
    mdp: &Mdp<S>,
    policy: &StationaryPolicy,
    unsafe_set: &UnsafeSet,
) -> bool {
    let mut seen = vec![false; mdp.num_states()];
    let mut stack = vec![mdp.initial()];
    seen[mdp.initial()] = true;
    while let Some(q) = stack.pop() {
        if unsafe_set.contains(q) {
            return false;
        }
        for next in TransitionModel::<S>::support(mdp, q, policy.action(q)) {
            if !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    true
}
