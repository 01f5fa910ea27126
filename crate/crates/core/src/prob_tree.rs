//! Finite filtered probability spaces as scenario trees.
//!
//! A [`ScenarioTree`] carries a uniform time grid $0 = t_0 < \dots < t_N = T$,
//! nodes with branch probabilities, and a common-noise label on every leaf.
//! The filtration is generated by the tree: a process is adapted exactly when
//! it is indexed by node, so [`AdaptedProcess`] is a plain node-indexed vector.
//!
//! Conditional expectations are computed by backward recursion,
//! $\mathbb{E}[X_s \mid \mathcal{F}_t](n) = \sum_c p_{n,c}\, \mathbb{E}[X_s \mid \mathcal{F}_{t+1}](c)$,
//! so that branch probabilities multiply along the way and no unconditional
//! probability ratios are formed.

use crate::error::{invalid, Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Index of a node; equal to its position in [`ScenarioTree::nodes`].
pub type NodeId = usize;

/// Absolute tolerance for probability normalisation checks.
pub const PROB_TOL: f64 = 1e-12;

/// Default guard on the number of root-to-leaf paths for enumeration.
pub const DEFAULT_MAX_PATHS: usize = 64;

/// Hard cap on the number of stopping times produced by one enumeration.
pub const MAX_ENUMERATION: u128 = 2_000_000;

/// Cap on node count for lattice construction.
pub const MAX_LATTICE_NODES: usize = 1 << 21;

// ── Time grid ─────────────────────────────────────────────────────────

/// Uniform time grid with horizon `T` and `N` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub steps: usize,
}

impl TimeGrid {
    /// Validated constructor: `horizon` finite and positive, `steps >= 1`.
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        let grid = Self { horizon, steps };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return invalid(format!("horizon must be finite and positive, got {}", self.horizon));
        }
        if self.steps == 0 {
            return invalid("time grid needs at least one step");
        }
        Ok(())
    }

    /// Step length `T / N`.
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Grid time `t_k = T k / N`.
    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.steps as f64
    }

    /// All grid times `t_0, ..., t_N`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }
}

// ── Tree structure ────────────────────────────────────────────────────

/// Edge to a child with its conditional probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: NodeId,
    pub p: f64,
}

/// One node of a scenario tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    /// Time index in `0..=N`.
    pub t: usize,
    pub parent: Option<NodeId>,
    pub children: Vec<Branch>,
}

/// Root-to-leaf path with its probability and common-noise atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    /// Node ids indexed by time, `nodes[k]` sits at time index `k`.
    pub nodes: Vec<NodeId>,
    pub prob: f64,
    pub atom: usize,
}

impl PathRecord {
    pub fn leaf(&self) -> NodeId {
        *self.nodes.last().expect("paths are non-empty")
    }
}

/// Serialized form of a tree: `{grid:{T,N}, nodes:[...], atoms:{leaf→atom}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDoc {
    pub grid: TimeGrid,
    pub nodes: Vec<Node>,
    #[serde(default, deserialize_with = "atom_keys")]
    pub atoms: BTreeMap<NodeId, usize>,
}

/// Reads `{leaf→atom}` with string keys so the map also parses inside tagged enums.
fn atom_keys<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<NodeId, usize>, D::Error> {
    let raw = BTreeMap::<String, usize>::deserialize(d)?;
    raw.into_iter()
        .map(|(k, v)| k.parse().map(|k| (k, v)).map_err(|_| serde::de::Error::custom(format!("bad leaf id `{k}`"))))
        .collect()
}

/// Finite filtered probability space with a partition-generated common noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeDoc", into = "TreeDoc")]
pub struct ScenarioTree {
    grid: TimeGrid,
    nodes: Vec<Node>,
    atoms: BTreeMap<NodeId, usize>,
    root: NodeId,
    paths: Vec<PathRecord>,
    node_prob: Vec<f64>,
    leaf_range: Vec<(usize, usize)>,
    by_time: Vec<Vec<NodeId>>,
}

impl TryFrom<TreeDoc> for ScenarioTree {
    type Error = Error;
    fn try_from(doc: TreeDoc) -> Result<Self> {
        ScenarioTree::new(doc.grid, doc.nodes, doc.atoms)
    }
}

impl From<ScenarioTree> for TreeDoc {
    fn from(tree: ScenarioTree) -> Self {
        TreeDoc { grid: tree.grid, nodes: tree.nodes, atoms: tree.atoms }
    }
}

impl ScenarioTree {
    /// Build and validate a tree. An empty `atoms` map puts every leaf in atom 0.
    pub fn new(grid: TimeGrid, nodes: Vec<Node>, atoms: BTreeMap<NodeId, usize>) -> Result<Self> {
        grid.validate()?;
        if nodes.is_empty() {
            return invalid("tree has no nodes");
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return invalid(format!("node at position {i} has id {}", node.id));
            }
            if node.t > grid.steps {
                return invalid(format!("node {i} has time index {} > N = {}", node.t, grid.steps));
            }
        }
        let roots: Vec<NodeId> = nodes.iter().filter(|n| n.parent.is_none()).map(|n| n.id).collect();
        if roots.len() != 1 {
            return invalid(format!("expected exactly one root, found {}", roots.len()));
        }
        let root = roots[0];
        if nodes[root].t != 0 {
            return invalid("root must sit at time index 0");
        }
        let mut referenced = vec![0usize; nodes.len()];
        for node in &nodes {
            let terminal = node.t == grid.steps;
            if terminal && !node.children.is_empty() {
                return invalid(format!("terminal node {} has children", node.id));
            }
            if !terminal && node.children.is_empty() {
                return invalid(format!("node {} at time {} has no children", node.id, node.t));
            }
            let mut total = 0.0;
            for br in &node.children {
                let child = nodes
                    .get(br.id)
                    .ok_or_else(|| Error::Invalid(format!("node {} lists unknown child {}", node.id, br.id)))?;
                if child.parent != Some(node.id) {
                    return invalid(format!("child {} does not name {} as parent", br.id, node.id));
                }
                if child.t != node.t + 1 {
                    return invalid(format!("child {} is not one step after {}", br.id, node.id));
                }
                if !(br.p.is_finite() && br.p > 0.0) {
                    return invalid(format!("branch {}→{} has probability {}", node.id, br.id, br.p));
                }
                referenced[br.id] += 1;
                total += br.p;
            }
            if !terminal && (total - 1.0).abs() > PROB_TOL {
                return invalid(format!("branch probabilities at node {} sum to {total}", node.id));
            }
        }
        for (i, &count) in referenced.iter().enumerate() {
            if i != root && count != 1 {
                return invalid(format!("node {i} is referenced by {count} parents"));
            }
        }

        // Depth-first traversal, leftmost child first, so every subtree owns a
        // contiguous range of paths.
        let mut paths = Vec::new();
        let mut leaf_range = vec![(0usize, 0usize); nodes.len()];
        let mut node_prob = vec![0.0; nodes.len()];
        let mut visited = 0usize;
        let mut stack: Vec<(NodeId, bool)> = vec![(root, false)];
        let mut prefix: Vec<NodeId> = Vec::new();
        let mut prob_stack: Vec<f64> = Vec::new();
        node_prob[root] = 1.0;
        while let Some((id, exiting)) = stack.pop() {
            if exiting {
                leaf_range[id].1 = paths.len();
                prefix.pop();
                prob_stack.pop();
                continue;
            }
            visited += 1;
            prefix.push(id);
            prob_stack.push(node_prob[id]);
            leaf_range[id].0 = paths.len();
            stack.push((id, true));
            let node = &nodes[id];
            if node.children.is_empty() {
                paths.push(PathRecord { nodes: prefix.clone(), prob: node_prob[id], atom: 0 });
            } else {
                for br in node.children.iter().rev() {
                    node_prob[br.id] = node_prob[id] * br.p;
                    stack.push((br.id, false));
                }
            }
        }
        if visited != nodes.len() {
            return invalid("some nodes are unreachable from the root");
        }
        let total: f64 = paths.iter().map(|p| p.prob).sum();
        if (total - 1.0).abs() > PROB_TOL * grid.steps.max(1) as f64 {
            return invalid(format!("path probabilities sum to {total}"));
        }

        let mut atoms = atoms;
        if atoms.is_empty() {
            for path in &paths {
                atoms.insert(path.leaf(), 0);
            }
        }
        for (&leaf, _) in atoms.iter() {
            if leaf >= nodes.len() || !nodes[leaf].children.is_empty() {
                return invalid(format!("atom label on non-leaf node {leaf}"));
            }
        }
        for path in paths.iter_mut() {
            path.atom = *atoms
                .get(&path.leaf())
                .ok_or_else(|| Error::Invalid(format!("leaf {} has no atom label", path.leaf())))?;
        }

        let mut by_time = vec![Vec::new(); grid.steps + 1];
        for node in &nodes {
            by_time[node.t].push(node.id);
        }
        Ok(Self { grid, nodes, atoms, root, paths, node_prob, leaf_range, by_time })
    }

    /// Deterministic chain: one node per time index.
    pub fn chain(grid: TimeGrid) -> Result<Self> {
        Self::uniform(grid, 1)
    }

    /// Non-recombining tree with `branching` equally likely children per node.
    pub fn uniform(grid: TimeGrid, branching: usize) -> Result<Self> {
        let p = vec![1.0 / branching.max(1) as f64; branching.max(1)];
        Self::with_branch_probs(grid, &p)
    }

    /// Non-recombining tree using the same branch probabilities at every node.
    pub fn with_branch_probs(grid: TimeGrid, probs: &[f64]) -> Result<Self> {
        grid.validate()?;
        if probs.is_empty() {
            return invalid("need at least one branch probability");
        }
        let m = probs.len();
        let mut total = 1usize;
        let mut level = 1usize;
        for _ in 0..grid.steps {
            level = level.saturating_mul(m);
            total = total.saturating_add(level);
        }
        if total > MAX_LATTICE_NODES {
            return Err(Error::Refused(format!("tree would have {total} nodes")));
        }
        let mut nodes = vec![Node { id: 0, t: 0, parent: None, children: vec![] }];
        let mut frontier = vec![0usize];
        for t in 1..=grid.steps {
            let mut next = Vec::with_capacity(frontier.len() * m);
            for &parent in &frontier {
                for &p in probs {
                    let id = nodes.len();
                    nodes.push(Node { id, t, parent: Some(parent), children: vec![] });
                    nodes[parent].children.push(Branch { id, p });
                    next.push(id);
                }
            }
            frontier = next;
        }
        Self::new(grid, nodes, BTreeMap::new())
    }

    /// Random tree with `1..=max_branch` children per node and random
    /// probabilities; leaves are split into `n_atoms` atoms by their first branch.
    pub fn random<R: Rng>(rng: &mut R, grid: TimeGrid, max_branch: usize, n_atoms: usize) -> Result<Self> {
        let max_branch = max_branch.max(1);
        let mut nodes = vec![Node { id: 0, t: 0, parent: None, children: vec![] }];
        let mut frontier = vec![0usize];
        for t in 1..=grid.steps {
            let mut next = Vec::new();
            for &parent in &frontier {
                let k = rng.random_range(1..=max_branch);
                let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
                let sum: f64 = raw.iter().sum();
                let mut acc = 0.0;
                for (j, w) in raw.iter().enumerate() {
                    let p = if j + 1 == k { 1.0 - acc } else { w / sum };
                    acc += p;
                    let id = nodes.len();
                    nodes.push(Node { id, t, parent: Some(parent), children: vec![] });
                    nodes[parent].children.push(Branch { id, p });
                    next.push(id);
                }
            }
            frontier = next;
        }
        let tree = Self::new(grid, nodes, BTreeMap::new())?;
        let n_atoms = n_atoms.max(1);
        let mut atoms = BTreeMap::new();
        for path in tree.paths() {
            let first = if path.nodes.len() > 1 { path.nodes[1] } else { path.nodes[0] };
            let pos = tree.nodes[tree.root].children.iter().position(|b| b.id == first).unwrap_or(0);
            atoms.insert(path.leaf(), pos % n_atoms);
        }
        Self::new(tree.grid, tree.nodes, atoms)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(id).ok_or_else(|| Error::Invalid(format!("node {id} not in tree")))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt()
    }

    /// Time index of a node.
    pub fn t(&self, id: NodeId) -> usize {
        self.nodes[id].t
    }

    /// Calendar time of a node.
    pub fn time_of(&self, id: NodeId) -> f64 {
        self.grid.time(self.nodes[id].t)
    }

    pub fn is_terminal(&self, id: NodeId) -> bool {
        self.nodes[id].t == self.grid.steps
    }

    pub fn children(&self, id: NodeId) -> &[Branch] {
        &self.nodes[id].children
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    /// All root-to-leaf paths in depth-first order.
    pub fn paths(&self) -> &[PathRecord] {
        &self.paths
    }

    /// Paths passing through `id`, a contiguous slice of [`Self::paths`].
    pub fn paths_through(&self, id: NodeId) -> &[PathRecord] {
        let (a, b) = self.leaf_range[id];
        &self.paths[a..b]
    }

    /// Index range of [`Self::paths_through`] inside [`Self::paths`].
    pub fn path_range(&self, id: NodeId) -> (usize, usize) {
        self.leaf_range[id]
    }

    /// Unconditional probability of reaching a node.
    pub fn node_prob(&self, id: NodeId) -> f64 {
        self.node_prob[id]
    }

    /// Nodes at a given time index.
    pub fn nodes_at(&self, t: usize) -> &[NodeId] {
        &self.by_time[t]
    }

    /// Leaf-to-atom labels.
    pub fn atom_labels(&self) -> &BTreeMap<NodeId, usize> {
        &self.atoms
    }

    /// Sorted distinct atom labels.
    pub fn atoms(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.atoms.values().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Probability mass of an atom.
    pub fn atom_mass(&self, atom: usize) -> f64 {
        self.paths.iter().filter(|p| p.atom == atom).map(|p| p.prob).sum()
    }

    /// Conditional probability of each atom given the node, in the order of [`Self::atoms`].
    pub fn atom_posterior(&self, id: NodeId) -> Vec<(usize, f64)> {
        let labels = self.atoms();
        let mass = self.node_prob[id];
        labels
            .into_iter()
            .map(|a| {
                let w: f64 = self.paths_through(id).iter().filter(|p| p.atom == a).map(|p| p.prob).sum();
                (a, w / mass)
            })
            .collect()
    }

    /// Serialisable document form.
    pub fn to_doc(&self) -> TreeDoc {
        TreeDoc { grid: self.grid, nodes: self.nodes.clone(), atoms: self.atoms.clone() }
    }

    /// One-step conditional expectation `E[v_{t+1} | F_t]` at every node;
    /// terminal nodes keep their own value.
    pub fn expect_next(&self, proc: &AdaptedProcess) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|n| {
                if n.children.is_empty() {
                    proc.values[n.id]
                } else {
                    n.children.iter().map(|b| b.p * proc.values[b.id]).sum()
                }
            })
            .collect()
    }

    /// True when every child of every node carries the same value, i.e. the
    /// process is determined one step ahead.
    pub fn is_predictable(&self, proc: &AdaptedProcess, tol: f64) -> bool {
        self.nodes.iter().all(|n| {
            n.children
                .windows(2)
                .all(|w| (proc.values[w[0].id] - proc.values[w[1].id]).abs() <= tol)
        })
    }

    /// Node ids in decreasing time order, handy for backward induction.
    pub fn backward_order(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.by_time.iter().rev().flat_map(|level| level.iter().copied())
    }
}

// ── Adapted processes ─────────────────────────────────────────────────

/// Node-indexed real values; adaptedness is structural.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AdaptedProcess {
    pub values: Vec<f64>,
}

impl AdaptedProcess {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(tree: &ScenarioTree, c: f64) -> Self {
        Self { values: vec![c; tree.len()] }
    }

    pub fn zeros(tree: &ScenarioTree) -> Self {
        Self::constant(tree, 0.0)
    }

    pub fn from_fn(tree: &ScenarioTree, mut f: impl FnMut(&Node) -> f64) -> Self {
        Self { values: tree.nodes().iter().map(&mut f).collect() }
    }

    /// Uniform random values in `[lo, hi)`.
    pub fn random<R: Rng>(tree: &ScenarioTree, rng: &mut R, lo: f64, hi: f64) -> Self {
        Self { values: (0..tree.len()).map(|_| rng.random_range(lo..hi)).collect() }
    }

    pub fn get(&self, id: NodeId) -> f64 {
        self.values[id]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reject processes defined on a different tree.
    pub fn check(&self, tree: &ScenarioTree, what: &str) -> Result<()> {
        if self.values.len() != tree.len() {
            return Err(Error::Mismatch(format!(
                "{what} has {} values but the tree has {} nodes",
                self.values.len(),
                tree.len()
            )));
        }
        Ok(())
    }

    /// Reject processes with NaN or infinite entries.
    pub fn check_finite(&self, what: &str) -> Result<()> {
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("{what} is not finite at node {i}"));
        }
        Ok(())
    }

    /// Values along a path, indexed by time.
    pub fn along(&self, path: &PathRecord) -> Vec<f64> {
        path.nodes.iter().map(|&n| self.values[n]).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() }
    }
}

/// `E[proc_{of_time} | F](at_node)`: probability-weighted average over the
/// descendants of `at_node` at time index `of_time`.
pub fn conditional_expectation(
    tree: &ScenarioTree,
    proc: &AdaptedProcess,
    at_node: NodeId,
    of_time: usize,
) -> Result<f64> {
    proc.check(tree, "process")?;
    let node = tree.node(at_node)?;
    if of_time < node.t || of_time > tree.grid().steps {
        return invalid(format!(
            "of_time {of_time} outside [{}, {}]",
            node.t,
            tree.grid().steps
        ));
    }
    fn rec(tree: &ScenarioTree, proc: &AdaptedProcess, id: NodeId, target: usize) -> f64 {
        let node = &tree.nodes()[id];
        if node.t == target {
            return proc.values[id];
        }
        node.children.iter().map(|b| b.p * rec(tree, proc, b.id, target)).sum()
    }
    Ok(rec(tree, proc, at_node, of_time))
}

/// Split `Y` into `Ŷ_t = Y_t − E[Y_T | F_t]` and the martingale `E[Y_T | F_t]`.
pub fn normalize_terminal(tree: &ScenarioTree, y: &AdaptedProcess) -> Result<(AdaptedProcess, AdaptedProcess)> {
    y.check(tree, "Y")?;
    let mut mart = y.values.clone();
    for id in tree.backward_order() {
        let node = &tree.nodes()[id];
        if !node.children.is_empty() {
            mart[id] = node.children.iter().map(|b| b.p * mart[b.id]).sum();
        }
    }
    let hat: Vec<f64> = y.values.iter().zip(&mart).map(|(a, m)| a - m).collect();
    Ok((AdaptedProcess::new(hat), AdaptedProcess::new(mart)))
}

// ── Stopping times ────────────────────────────────────────────────────

/// Stopping time given by its stopping region. A path stops at its first
/// flagged node; terminal nodes are implicitly flagged.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StoppingTime {
    pub stop_region: Vec<bool>,
}

impl StoppingTime {
    /// Never stop before the horizon.
    pub fn at_horizon(tree: &ScenarioTree) -> Self {
        Self { stop_region: vec![false; tree.len()] }
    }

    /// Stop deterministically at time index `k`.
    pub fn at_time(tree: &ScenarioTree, k: usize) -> Self {
        Self { stop_region: tree.nodes().iter().map(|n| n.t == k).collect() }
    }

    /// Region flagged exactly at the given nodes.
    pub fn from_stop_nodes(tree: &ScenarioTree, nodes: &[NodeId]) -> Self {
        let mut region = vec![false; tree.len()];
        for &n in nodes {
            region[n] = true;
        }
        Self { stop_region: region }
    }

    pub fn check(&self, tree: &ScenarioTree) -> Result<()> {
        if self.stop_region.len() != tree.len() {
            return Err(Error::Mismatch("stopping region does not match the tree".into()));
        }
        Ok(())
    }

    pub fn is_flagged(&self, tree: &ScenarioTree, id: NodeId) -> bool {
        self.stop_region[id] || tree.is_terminal(id)
    }

    /// Time index at which a path stops.
    pub fn stop_index(&self, tree: &ScenarioTree, path: &PathRecord) -> usize {
        self.stop_index_from(tree, path, 0)
    }

    /// First flagged time index on `path` at or after `from`.
    pub fn stop_index_from(&self, tree: &ScenarioTree, path: &PathRecord, from: usize) -> usize {
        (from..path.nodes.len())
            .find(|&k| self.is_flagged(tree, path.nodes[k]))
            .unwrap_or(path.nodes.len() - 1)
    }

    /// Node at which a path stops.
    pub fn stop_node(&self, tree: &ScenarioTree, path: &PathRecord) -> NodeId {
        path.nodes[self.stop_index(tree, path)]
    }

    /// Distinct nodes where some path stops, sorted.
    pub fn stop_nodes(&self, tree: &ScenarioTree) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = tree.paths().iter().map(|p| self.stop_node(tree, p)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Stop index of every path; two stopping times are equal as random
    /// variables exactly when these vectors agree.
    pub fn signature(&self, tree: &ScenarioTree) -> Vec<usize> {
        tree.paths().iter().map(|p| self.stop_index(tree, p)).collect()
    }

    /// Flagged node ids (the serialized form).
    pub fn flagged(&self) -> Vec<NodeId> {
        self.stop_region.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect()
    }
}

/// Number of stopping times on the subtree of `id`: a leaf contributes 1,
/// an inner node `1 + ∏ children`.
pub fn count_stopping_times_at(tree: &ScenarioTree, id: NodeId) -> u128 {
    let node = &tree.nodes()[id];
    if node.children.is_empty() {
        return 1;
    }
    1u128.saturating_add(count_continuations(tree, id))
}

/// Number of stopping times on the subtree of `id` that do not stop at `id`.
pub fn count_continuations(tree: &ScenarioTree, id: NodeId) -> u128 {
    tree.children(id)
        .iter()
        .fold(1u128, |acc, b| acc.saturating_mul(count_stopping_times_at(tree, b.id)))
}

/// Total number of stopping times of the tree.
pub fn count_stopping_times(tree: &ScenarioTree) -> u128 {
    count_stopping_times_at(tree, tree.root())
}

fn enumerate_rec(tree: &ScenarioTree, id: NodeId) -> Vec<Vec<NodeId>> {
    let mut out = vec![vec![id]];
    if !tree.children(id).is_empty() {
        out.extend(enumerate_after_rec(tree, id));
    }
    out
}

fn enumerate_after_rec(tree: &ScenarioTree, id: NodeId) -> Vec<Vec<NodeId>> {
    let mut acc: Vec<Vec<NodeId>> = vec![vec![]];
    for b in tree.children(id) {
        let opts = enumerate_rec(tree, b.id);
        let mut next = Vec::with_capacity(acc.len() * opts.len());
        for prefix in &acc {
            for o in &opts {
                let mut v = prefix.clone();
                v.extend_from_slice(o);
                next.push(v);
            }
        }
        acc = next;
    }
    acc
}

/// Every stopping time of the tree, each given by its stop nodes.
///
/// Refuses trees with more than `max_paths` paths or more than
/// [`MAX_ENUMERATION`] stopping times.
pub fn enumerate_stopping_times(tree: &ScenarioTree, max_paths: usize) -> Result<Vec<StoppingTime>> {
    guard_enumeration(tree, max_paths, count_stopping_times(tree))?;
    Ok(enumerate_rec(tree, tree.root())
        .into_iter()
        .map(|nodes| StoppingTime::from_stop_nodes(tree, &nodes))
        .collect())
}

/// Stopping rules on the subtree of `id` that stop strictly after `id`,
/// as lists of stop nodes.
pub fn enumerate_after(tree: &ScenarioTree, id: NodeId, max_paths: usize) -> Result<Vec<Vec<NodeId>>> {
    if tree.is_terminal(id) {
        return invalid(format!("node {id} is terminal; no later stopping times"));
    }
    guard_enumeration(tree, max_paths, count_continuations(tree, id))?;
    Ok(enumerate_after_rec(tree, id))
}

fn guard_enumeration(tree: &ScenarioTree, max_paths: usize, count: u128) -> Result<()> {
    let paths = tree.paths().len();
    if paths > max_paths {
        return Err(Error::Refused(format!(
            "tree has {paths} paths, above the enumeration guard of {max_paths}"
        )));
    }
    if count > MAX_ENUMERATION {
        return Err(Error::Refused(format!(
            "tree has {count} stopping times, above the cap of {MAX_ENUMERATION}"
        )));
    }
    Ok(())
}

/// Per-path `Σ_{s<τ} integrand(s)·dt`.
pub fn running_sum(tree: &ScenarioTree, integrand: &AdaptedProcess, upto: &StoppingTime) -> Result<Vec<f64>> {
    integrand.check(tree, "integrand")?;
    upto.check(tree)?;
    let dt = tree.dt();
    Ok(tree
        .paths()
        .iter()
        .map(|p| {
            let k = upto.stop_index(tree, p);
            p.nodes[..k].iter().map(|&n| integrand.values[n] * dt).sum()
        })
        .collect())
}

// ── Lattices from a diffusion ─────────────────────────────────────────

/// Drift or volatility coefficient `c(t_k, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    Constant { value: f64 },
    Affine { intercept: f64, slope: f64 },
    PerStep { values: Vec<f64> },
}

impl Coefficient {
    pub fn eval(&self, k: usize, x: f64) -> Result<f64> {
        let v = match self {
            Coefficient::Constant { value } => *value,
            Coefficient::Affine { intercept, slope } => intercept + slope * x,
            Coefficient::PerStep { values } => *values
                .get(k)
                .ok_or_else(|| Error::Invalid(format!("coefficient table has no entry for step {k}")))?,
        };
        if !v.is_finite() {
            return invalid(format!("coefficient is not finite at step {k}, x = {x}"));
        }
        Ok(v)
    }
}

/// Non-recombining Euler lattice for `dX = b dt + σ dW`.
///
/// Each node has `branching` equally likely children at
/// `x + b dt + σ √dt · z_i` with symmetric standardised points `z_i`, so the
/// one-step mean is `x + b dt` and the variance `σ² dt`.
pub fn build_lattice_from_sde(
    b: &Coefficient,
    sigma: &Coefficient,
    x0: f64,
    grid: TimeGrid,
    branching: usize,
) -> Result<(ScenarioTree, AdaptedProcess)> {
    if branching < 2 {
        return invalid("branching must be at least 2");
    }
    if !x0.is_finite() {
        return invalid("x0 must be finite");
    }
    let tree = ScenarioTree::uniform(grid, branching)?;
    let m = branching as f64;
    let scale = (3.0 / (m * m - 1.0)).sqrt();
    let z: Vec<f64> = (0..branching).map(|i| scale * (2.0 * i as f64 - (m - 1.0))).collect();
    let dt = grid.dt();
    let mut x = vec![x0; tree.len()];
    for t in 0..grid.steps {
        for &id in tree.nodes_at(t) {
            let drift = b.eval(t, x[id])?;
            let vol = sigma.eval(t, x[id])?;
            for (i, br) in tree.children(id).iter().enumerate() {
                x[br.id] = x[id] + drift * dt + vol * dt.sqrt() * z[i];
            }
        }
    }
    Ok((tree, AdaptedProcess::new(x)))
}
