//! Bidirectional tree planner in joint space with a goal set, plus random
//! shortcut smoothing.
//!
//! One tree grows from the start, the other from every valid goal at once.
//! Each iteration extends one tree toward a sample by at most `step` (max
//! norm) and then greedily pulls the other tree toward the new node.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use kdtree::distance::squared_euclidean;
use kdtree::KdTree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::armkin::JointConfig;
use crate::colcheck::ValidityChecker;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    pub max_iters: usize,
    /// Wall-clock budget in seconds, checked between iterations.
    pub timeout: f64,
    pub step: f64,
    pub edge_step: f64,
    pub goal_bias: f64,
    pub smoothing_iters: usize,
    pub rng_seed: u64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            timeout: 5.0,
            step: 0.05,
            edge_step: 0.02,
            goal_bias: 0.1,
            smoothing_iters: 100,
            rng_seed: 0,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.edge_step > 0.0 && self.step > self.edge_step) {
            return Err(Error::invalid("planner needs step > edge_step > 0"));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(Error::invalid("goal_bias must lie in [0, 1]"));
        }
        if !(self.timeout > 0.0) {
            return Err(Error::invalid("timeout must be positive"));
        }
        Ok(())
    }
}

/// Waypoints from start to goal; `length` is the sum of max-norm steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct JointPath<T: Real = f64> {
    pub waypoints: Vec<JointConfig<T>>,
    pub length: T,
}

impl<T: Real> JointPath<T> {
    pub fn new(waypoints: Vec<JointConfig<T>>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::invalid("a path needs at least two waypoints"));
        }
        let length = path_length(&waypoints);
        Ok(Self { waypoints, length })
    }

    pub fn start(&self) -> &JointConfig<T> {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &JointConfig<T> {
        self.waypoints.last().expect("at least two waypoints")
    }

    /// Every edge valid at `step`.
    pub fn is_valid(&self, checker: &ValidityChecker<'_, T>, step: T) -> bool {
        self.waypoints
            .windows(2)
            .all(|w| checker.edge_valid(&w[0], &w[1], step))
    }
}

fn path_length<T: Real>(w: &[JointConfig<T>]) -> T {
    w.windows(2).fold(T::zero(), |acc, p| acc + p[0].dist_inf(&p[1]))
}

struct Node<T: Real> {
    q: JointConfig<T>,
    parent: Option<usize>,
}

struct Tree<T: Real> {
    nodes: Vec<Node<T>>,
    index: KdTree<f64, usize, Vec<f64>>,
}

fn key<T: Real>(q: &JointConfig<T>) -> Vec<f64> {
    q.0.iter().map(|v| v.as_f64()).collect()
}

impl<T: Real> Tree<T> {
    fn new(dof: usize, roots: impl IntoIterator<Item = JointConfig<T>>) -> Self {
        let mut tree = Self {
            nodes: Vec::new(),
            index: KdTree::new(dof),
        };
        for q in roots {
            tree.insert(Node { q, parent: None });
        }
        tree
    }

    fn insert(&mut self, node: Node<T>) -> usize {
        let id = self.nodes.len();
        self.index
            .add(key(&node.q), id)
            .expect("joint values are finite and of tree dimension");
        self.nodes.push(node);
        id
    }

    fn nearest(&self, q: &JointConfig<T>) -> usize {
        let found = self
            .index
            .nearest(&key(q), 1, &squared_euclidean)
            .expect("query has tree dimension");
        *found[0].1
    }

    fn push(&mut self, q: JointConfig<T>, parent: usize) -> usize {
        self.insert(Node {
            q,
            parent: Some(parent),
        })
    }

    /// Configurations from node `i` back to its root.
    fn branch(&self, mut i: usize) -> Vec<JointConfig<T>> {
        let mut out = vec![self.nodes[i].q.clone()];
        while let Some(p) = self.nodes[i].parent {
            out.push(self.nodes[p].q.clone());
            i = p;
        }
        out
    }
}

/// Move from `from` toward `to` by at most `step` in max norm.
fn steer<T: Real>(from: &JointConfig<T>, to: &JointConfig<T>, step: T) -> (JointConfig<T>, bool) {
    let d = from.dist_inf(to);
    if d <= step {
        (to.clone(), true)
    } else {
        (from.lerp(to, step / d), false)
    }
}

enum Grow {
    Trapped,
    Advanced(usize),
    Reached(usize),
}

struct Search<'c, 'a, T: Real> {
    checker: &'c ValidityChecker<'a, T>,
    step: T,
    edge_step: T,
}

impl<T: Real> Search<'_, '_, T> {
    fn extend(&self, tree: &mut Tree<T>, target: &JointConfig<T>) -> Grow {
        let near = tree.nearest(target);
        self.extend_from(tree, near, target)
    }

    fn extend_from(&self, tree: &mut Tree<T>, near: usize, target: &JointConfig<T>) -> Grow {
        let (q_new, reached) = steer(&tree.nodes[near].q, target, self.step);
        if q_new == tree.nodes[near].q {
            return Grow::Reached(near);
        }
        if !self
            .checker
            .extend_valid(&tree.nodes[near].q, &q_new, self.edge_step)
        {
            return Grow::Trapped;
        }
        let id = tree.push(q_new, near);
        if reached {
            Grow::Reached(id)
        } else {
            Grow::Advanced(id)
        }
    }

    /// Extend toward `target` until blocked, continuing from the last node
    /// added rather than searching the tree again.
    fn connect(&self, tree: &mut Tree<T>, target: &JointConfig<T>) -> Grow {
        let mut g = self.extend(tree, target);
        while let Grow::Advanced(id) = g {
            g = self.extend_from(tree, id, target);
        }
        g
    }
}

/// Plans from `start` to any of `goals`. `cancel` is polled every iteration.
pub fn plan<T: Real>(
    checker: &ValidityChecker<'_, T>,
    start: &JointConfig<T>,
    goals: &[JointConfig<T>],
    params: &PlannerParams,
    cancel: Option<&AtomicBool>,
) -> Result<JointPath<T>> {
    params.validate()?;
    let model = checker.model();
    model.check_dim(start)?;
    if !checker.config_valid(start) {
        return Err(Error::InvalidStart);
    }
    let valid_goals: Vec<JointConfig<T>> = goals
        .iter()
        .filter(|g| g.dim() == model.dof() && checker.config_valid(g))
        .cloned()
        .collect();
    if valid_goals.is_empty() {
        return Err(Error::NoValidGoal);
    }

    // Tree edges are checked at the certification resolution too; a coarser
    // tree check lets thin walls pass and the same bad connection gets
    // rediscovered and rejected on every later iteration.
    let certify_step = T::lit(params.edge_step / 2.0);
    let certify = |w: &[JointConfig<T>]| {
        w.windows(2)
            .all(|p| checker.edge_valid(&p[0], &p[1], certify_step))
    };
    for g in &valid_goals {
        let direct = [start.clone(), g.clone()];
        if certify(&direct) {
            return JointPath::new(direct.to_vec());
        }
    }

    let search = Search {
        checker,
        step: T::lit(params.step),
        edge_step: certify_step,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let deadline = Instant::now() + Duration::from_secs_f64(params.timeout);
    let mut start_tree = Tree::new(model.dof(), [start.clone()]);
    let mut goal_tree = Tree::new(model.dof(), valid_goals.iter().cloned());
    let mut from_start = true;

    for _ in 0..params.max_iters {
        if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            return Err(Error::Cancelled);
        }
        if Instant::now() >= deadline {
            break;
        }
        let (active, passive) = if from_start {
            (&mut start_tree, &mut goal_tree)
        } else {
            (&mut goal_tree, &mut start_tree)
        };
        let target = if rng.random::<f64>() < params.goal_bias {
            if from_start {
                valid_goals[rng.random_range(0..valid_goals.len())].clone()
            } else {
                start.clone()
            }
        } else {
            JointConfig(
                model
                    .joint_limits
                    .iter()
                    .map(|l| T::lit(rng.random_range(l[0].as_f64()..=l[1].as_f64())))
                    .collect(),
            )
        };
        let new_id = match search.extend(active, &target) {
            Grow::Trapped => None,
            Grow::Advanced(i) | Grow::Reached(i) => Some(i),
        };
        if let Some(new_id) = new_id {
            let q_new = active.nodes[new_id].q.clone();
            if let Grow::Reached(meet) = search.connect(passive, &q_new) {
                let (s_id, g_id) = if from_start { (new_id, meet) } else { (meet, new_id) };
                let mut waypoints = start_tree.branch(s_id);
                waypoints.reverse();
                let tail = goal_tree.branch(g_id);
                // the meeting node appears at the end of one branch and the start of the other
                waypoints.extend(tail.into_iter().skip(1));
                if certify(&waypoints) {
                    return JointPath::new(waypoints);
                }
            }
        }
        from_start = !from_start;
    }
    Err(Error::NoPath)
}

/// Random waypoint-to-waypoint shortcuts. Shortcuts are accepted only if
/// they validate at `edge_step / 2` and strictly shorten the path.
pub fn smooth<T: Real>(
    checker: &ValidityChecker<'_, T>,
    path: &JointPath<T>,
    params: &PlannerParams,
) -> JointPath<T> {
    let step = T::lit(params.edge_step / 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed ^ 0x5eed_5eed);
    let mut w = path.waypoints.clone();
    for _ in 0..params.smoothing_iters {
        if w.len() < 3 {
            break;
        }
        let i = rng.random_range(0..w.len() - 2);
        let j = rng.random_range(i + 2..w.len());
        let old = path_length(&w[i..=j]);
        let new = w[i].dist_inf(&w[j]);
        if new < old && checker.edge_valid(&w[i], &w[j], step) {
            w.drain(i + 1..j);
        }
    }
    JointPath {
        length: path_length(&w),
        waypoints: w,
    }
}
