//! Online value iteration over predicted bound-refinement rewards.
//!
//! Each trajectory step builds the reward field
//! `rho(x, u) = (f_hat(x) + B(x)) / 2 * r(x, u)` once, applies `m`
//! synchronous sweeps `Q+(x, u) = rho(x, u) + max_u' Q(x + u, u')` to the
//! warm-started table, and moves greedily. There is no discount: the sweep
//! budget bounds the lookahead, so `Q` holds horizon-limited sums rather
//! than a converged fixed point.

use serde::Serialize;

use crate::bound::{is_strictly_closer, rebuild_bound, BoundField, GridGeometry, SampleSet};
use crate::error::{Error, Result};
use crate::simulator::{StepContext, StepDecision, StepPlanner};
use crate::world::{Action, ActionSet, GridPos, GridSpec};

/// Grid, action set and successor table shared by reward and Q fields.
#[derive(Debug, Clone)]
pub struct PlanningModel {
    geom: GridGeometry,
    actions: ActionSet,
    /// `successors[s * k + a]`, `None` where the action leaves the grid.
    successors: Vec<Option<usize>>,
}

impl PlanningModel {
    pub fn new(spec: &GridSpec) -> Self {
        Self {
            geom: GridGeometry::new(spec),
            actions: spec.action_set(),
            successors: spec.successor_table(),
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    pub fn spec(&self) -> &GridSpec {
        self.geom.spec()
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn n_states(&self) -> usize {
        self.geom.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    #[inline]
    pub fn successor(&self, state: usize, action: usize) -> Option<usize> {
        self.successors[state * self.actions.len() + action]
    }

    fn table_len(&self) -> usize {
        self.n_states() * self.n_actions()
    }
}

/// Rewards for every state and admissible action (inadmissible entries are 0).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardField {
    n_actions: usize,
    rewards: Vec<f64>,
    refinements: Vec<f64>,
    sample_count: usize,
}

impl RewardField {
    /// Field with hand-set rewards; refinements are left at zero.
    pub fn from_rewards(model: &PlanningModel, rewards: Vec<f64>) -> Result<Self> {
        if rewards.len() != model.table_len() {
            return Err(Error::GridMismatch(format!(
                "expected {} reward entries, got {}",
                model.table_len(),
                rewards.len()
            )));
        }
        Ok(Self {
            n_actions: model.n_actions(),
            refinements: vec![0.0; rewards.len()],
            rewards,
            sample_count: 0,
        })
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state * self.n_actions + action]
    }

    pub fn refinement(&self, state: usize, action: usize) -> f64 {
        self.refinements[state * self.n_actions + action]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.rewards.iter_mut().for_each(|r| *r *= factor);
        out
    }
}

/// Nearest-sample value and squared distance at every grid point.
fn nearest_field(samples: &SampleSet, geom: &GridGeometry) -> Vec<(f64, f64)> {
    (0..geom.len())
        .map(|y| {
            let (i, d2) = samples
                .nearest(geom.coords(y))
                .expect("nearest_field needs a nonempty sample set");
            (samples.as_slice()[i].value, d2)
        })
        .collect()
}

/// Reward field for the current samples and bound.
///
/// Per state the bound with the predicted sample at the state is formed
/// once; each action then only needs one pass over the grid to integrate
/// `max(0, B1 - cone(x+))`.
pub fn build_reward_field(
    samples: &SampleSet,
    bound: &BoundField,
    model: &PlanningModel,
) -> Result<RewardField> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let geom = &model.geom;
    if bound.values().len() != geom.len() {
        return Err(Error::GridMismatch(format!(
            "bound has {} points, grid has {}",
            bound.values().len(),
            geom.len()
        )));
    }
    let m = bound.lipschitz();
    let weights = geom.weights();
    let near = nearest_field(samples, geom);
    let k = model.n_actions();
    let mut rewards = vec![0.0; model.table_len()];
    let mut refinements = vec![0.0; model.table_len()];
    let mut b1 = vec![0.0; geom.len()];
    let mut row = Vec::with_capacity(geom.len());

    for s in 0..geom.len() {
        let f_x = near[s].0;
        geom.dist_row(s, &mut row);
        for ((slot, &b), &d) in b1.iter_mut().zip(bound.values()).zip(&row) {
            *slot = b.min(f_x + m * d);
        }
        let weight = 0.5 * (f_x + bound.at(s));
        for a in 0..k {
            let Some(t) = model.successor(s, a) else {
                continue;
            };
            let (near_t, near_d2) = near[t];
            let step = geom.dist(s, t);
            let f_next = if is_strictly_closer(step * step, near_d2) {
                f_x
            } else {
                near_t
            };
            geom.dist_row(t, &mut row);
            let r: f64 = b1
                .iter()
                .zip(&row)
                .zip(weights)
                .map(|((&b, &d), &w)| w * (b - (f_next + m * d)).max(0.0))
                .sum();
            refinements[s * k + a] = r;
            rewards[s * k + a] = weight * r;
        }
    }
    Ok(RewardField {
        n_actions: k,
        rewards,
        refinements,
        sample_count: samples.len(),
    })
}

/// Action values, warm-started across trajectory steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QTable {
    n_actions: usize,
    values: Vec<f64>,
    sweeps: usize,
}

impl QTable {
    pub fn zeros(model: &PlanningModel) -> Self {
        Self {
            n_actions: model.n_actions(),
            values: vec![0.0; model.table_len()],
            sweeps: 0,
        }
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Total sweeps applied since initialization.
    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// `max_u Q(state, u)` over admissible actions.
    pub fn state_value(&self, model: &PlanningModel, state: usize) -> f64 {
        (0..self.n_actions)
            .filter(|&a| model.successor(state, a).is_some())
            .map(|a| self.get(state, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `V(x) = max_u Q(x, u)` on every grid point.
    pub fn value_field(&self, model: &PlanningModel) -> Vec<f64> {
        (0..model.n_states())
            .map(|s| self.state_value(model, s))
            .collect()
    }

    /// First admissible maximizer at `state` in canonical action order.
    pub fn greedy_action(&self, model: &PlanningModel, state: usize) -> usize {
        let mut best: Option<(usize, f64)> = None;
        for a in 0..self.n_actions {
            if model.successor(state, a).is_none() {
                continue;
            }
            let q = self.get(state, a);
            if best.map_or(true, |(_, b)| q > b) {
                best = Some((a, q));
            }
        }
        best.expect("every grid state has an admissible action").0
    }
}

/// One synchronous Bellman backup; every entry reads only the pre-sweep table.
pub fn vi_sweep(q: &QTable, rho: &RewardField, model: &PlanningModel) -> QTable {
    let k = model.n_actions();
    let v: Vec<f64> = q.value_field(model);
    let mut values = vec![0.0; q.values.len()];
    for s in 0..model.n_states() {
        for a in 0..k {
            if let Some(t) = model.successor(s, a) {
                values[s * k + a] = rho.reward(s, a) + v[t];
            }
        }
    }
    QTable {
        n_actions: k,
        values,
        sweeps: q.sweeps + 1,
    }
}

/// Per-step planner outputs kept for logging.
#[derive(Debug, Clone, Serialize)]
pub struct PlanDiagnostics {
    pub predicted_refinement: f64,
    pub reward: f64,
    /// Q values at the current state in canonical action order (`None` = inadmissible).
    pub q_at_state: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct PlanStep {
    pub action: Action,
    pub q: QTable,
    pub rewards: RewardField,
    pub diagnostics: PlanDiagnostics,
}

/// Full planning step: rebuild `B` from `S`, form the rewards once, run `m`
/// sweeps from the warm-start table and pick the greedy action.
pub fn plan_step(
    samples: &SampleSet,
    q: &QTable,
    model: &PlanningModel,
    position: &GridPos,
    lipschitz: f64,
    sweeps: usize,
) -> Result<PlanStep> {
    let bound = rebuild_bound(samples, model.spec(), lipschitz);
    plan_with_bound(samples, &bound, q, model, position, sweeps, 1.0)
}

fn plan_with_bound(
    samples: &SampleSet,
    bound: &BoundField,
    q: &QTable,
    model: &PlanningModel,
    position: &GridPos,
    sweeps: usize,
    reward_scale: f64,
) -> Result<PlanStep> {
    if sweeps == 0 {
        return Err(Error::Config("sweep count must be at least 1".into()));
    }
    let mut rewards = build_reward_field(samples, bound, model)?;
    if reward_scale != 1.0 {
        rewards = rewards.scaled(reward_scale);
    }
    let mut q = q.clone();
    for _ in 0..sweeps {
        q = vi_sweep(&q, &rewards, model);
    }
    let state = model.spec().flat(position);
    let a = q.greedy_action(model, state);
    let diagnostics = PlanDiagnostics {
        predicted_refinement: rewards.refinement(state, a),
        reward: rewards.reward(state, a),
        q_at_state: (0..model.n_actions())
            .map(|b| model.successor(state, b).map(|_| q.get(state, b)))
            .collect(),
    };
    Ok(PlanStep {
        action: model.actions().get(a),
        q,
        rewards,
        diagnostics,
    })
}

/// Path-aware optimistic optimization as a step planner.
#[derive(Debug, Clone)]
pub struct OopaPlanner {
    model: PlanningModel,
    q: QTable,
    sweeps: usize,
    reward_scale: f64,
    last: Option<PlanStep>,
}

impl OopaPlanner {
    pub fn new(spec: &GridSpec, sweeps: usize) -> Result<Self> {
        if sweeps == 0 {
            return Err(Error::Config("sweep count must be at least 1".into()));
        }
        let model = PlanningModel::new(spec);
        let q = QTable::zeros(&model);
        Ok(Self {
            model,
            q,
            sweeps,
            reward_scale: 1.0,
            last: None,
        })
    }

    /// Multiplies every reward by a positive constant before the sweeps.
    pub fn with_reward_scale(mut self, scale: f64) -> Self {
        self.reward_scale = scale;
        self
    }

    pub fn q_table(&self) -> &QTable {
        &self.q
    }

    pub fn model(&self) -> &PlanningModel {
        &self.model
    }

    /// Outputs of the most recent step.
    pub fn last_step(&self) -> Option<&PlanStep> {
        self.last.as_ref()
    }
}

impl StepPlanner for OopaPlanner {
    fn name(&self) -> &'static str {
        "oopa"
    }

    fn decide(&mut self, ctx: &StepContext<'_>) -> Result<StepDecision> {
        let step = plan_with_bound(
            ctx.samples,
            ctx.bound,
            &self.q,
            &self.model,
            &ctx.position,
            self.sweeps,
            self.reward_scale,
        )?;
        self.q = step.q.clone();
        let decision = StepDecision {
            action: step.action,
            predicted_refinement: Some(step.diagnostics.predicted_refinement),
            settled: false,
        };
        self.last = Some(step);
        Ok(decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound::refinement;
    use crate::objective::{Objective, RbfObjective};

    fn chain() -> PlanningModel {
        PlanningModel::new(&GridSpec::new(vec![0.0], vec![2.0], 3).unwrap())
    }

    #[test]
    fn zero_rewards_are_a_fixed_point() {
        let model = PlanningModel::new(&GridSpec::square(0.0, 1.0, 3).unwrap());
        let rho = RewardField::from_rewards(&model, vec![0.0; 36]).unwrap();
        let q = QTable::zeros(&model);
        let q1 = vi_sweep(&q, &rho, &model);
        assert_eq!(q1.values(), q.values());
        assert_eq!(q1.sweeps(), 1);
    }

    #[test]
    fn constant_rewards_accumulate() {
        let model = PlanningModel::new(&GridSpec::square(0.0, 1.0, 5).unwrap());
        let rho = RewardField::from_rewards(&model, vec![1.0; 100]).unwrap();
        let mut q = QTable::zeros(&model);
        for k in 1..=4 {
            q = vi_sweep(&q, &rho, &model);
            for s in 0..25 {
                for a in 0..4 {
                    if model.successor(s, a).is_some() {
                        assert_eq!(q.get(s, a), k as f64);
                    }
                }
            }
        }
    }

    #[test]
    fn chain_two_sweeps_by_hand() {
        // States 0,1,2; actions (left, right). Inadmissible: 0-left, 2-right.
        let model = chain();
        let rho = RewardField::from_rewards(&model, vec![0.0, 1.0, 2.0, 5.0, 3.0, 0.0]).unwrap();
        let q2 = vi_sweep(&vi_sweep(&QTable::zeros(&model), &rho, &model), &rho, &model);
        // Q1 = rho; V1 = [1, 5, 3]
        // Q2(0,R) = 1 + V1(1) = 6; Q2(1,L) = 2 + V1(0) = 3; Q2(1,R) = 5 + V1(2) = 8; Q2(2,L) = 3 + V1(1) = 8
        assert_eq!(q2.get(0, 1), 6.0);
        assert_eq!(q2.get(1, 0), 3.0);
        assert_eq!(q2.get(1, 1), 8.0);
        assert_eq!(q2.get(2, 0), 8.0);
        assert_eq!(q2.greedy_action(&model, 1), 1);
        assert_eq!(q2.greedy_action(&model, 0), 1);
    }

    #[test]
    fn ties_pick_first_admissible_action() {
        let model = PlanningModel::new(&GridSpec::square(0.0, 1.0, 3).unwrap());
        let q = QTable::zeros(&model);
        // Corner (0,0): up and right admissible; up comes first.
        assert_eq!(q.greedy_action(&model, 0), 0);
        // Corner (2,2): down and left admissible.
        assert_eq!(q.greedy_action(&model, 8), 1);
    }

    #[test]
    fn two_point_reward_is_weighted_refinement() {
        let spec = GridSpec::new(vec![0.0], vec![1.0], 2).unwrap();
        let model = PlanningModel::new(&spec);
        let mut s = SampleSet::new();
        s.insert(vec![0.0], 0.0);
        let b = rebuild_bound(&s, &spec, 1.0);
        let rho = build_reward_field(&s, &b, &model).unwrap();
        // right from 0: r = 0.5, weight (0 + 0) / 2
        assert_eq!(rho.refinement(0, 1), 0.5);
        assert_eq!(rho.reward(0, 1), 0.0);
        // left from 1: f_hat(1) = 0 already lowers B1 to [0, 0], so r = 0
        assert_eq!(rho.refinement(1, 0), 0.0);
    }

    #[test]
    fn fast_rewards_match_generic_refinement() {
        let spec = GridSpec::square(0.0, 4.0, 9).unwrap();
        let model = PlanningModel::new(&spec);
        let f = RbfObjective::reference_3rbf();
        let mut s = SampleSet::new();
        for p in [[2.0, 2.0], [2.5, 2.0], [2.5, 2.5], [1.0, 3.5]] {
            s.insert(p.to_vec(), f.eval(&p));
        }
        let b = rebuild_bound(&s, &spec, 364.54);
        let rho = build_reward_field(&s, &b, &model).unwrap();
        for (flat, pos) in spec.enumerate().iter().enumerate() {
            for (a, &u) in model.actions().iter().enumerate() {
                match refinement(&s, &b, model.geometry(), pos, u) {
                    Ok(r) => {
                        let fast = rho.refinement(flat, a);
                        assert!(
                            (fast - r.volume).abs() <= 1e-9 * r.volume.abs().max(1.0),
                            "{flat} {u:?}: {fast} vs {}",
                            r.volume
                        );
                        let c = spec.coords(pos);
                        let w = 0.5 * (s.f_hat(&c).unwrap() + b.at(flat));
                        assert!((rho.reward(flat, a) - w * r.volume).abs() <= 1e-9 * (w * r.volume).abs().max(1.0));
                    }
                    Err(_) => assert!(model.successor(flat, a).is_none()),
                }
            }
        }
    }

    #[test]
    fn fully_sampled_neighbourhood_has_zero_reward() {
        let spec = GridSpec::square(0.0, 4.0, 21).unwrap();
        let model = PlanningModel::new(&spec);
        let mut s = SampleSet::new();
        for p in [[2.0, 2.0], [2.0, 2.2], [2.0, 1.8], [1.8, 2.0], [2.2, 2.0]] {
            s.insert(p.to_vec(), 10.0 * p[0] + p[1]);
        }
        let b = rebuild_bound(&s, &spec, 364.54);
        let rho = build_reward_field(&s, &b, &model).unwrap();
        let c = spec.flat(&spec.pos(&[10, 10]).unwrap());
        for a in 0..4 {
            assert_eq!(rho.reward(c, a), 0.0);
        }
    }

    #[test]
    fn plan_step_rejects_zero_sweeps() {
        let spec = GridSpec::square(0.0, 4.0, 5).unwrap();
        let model = PlanningModel::new(&spec);
        let mut s = SampleSet::new();
        s.insert(vec![2.0, 2.0], 1.0);
        let pos = spec.pos(&[2, 2]).unwrap();
        assert!(plan_step(&s, &QTable::zeros(&model), &model, &pos, 1.0, 0).is_err());
        assert!(OopaPlanner::new(&spec, 0).is_err());
    }
}
