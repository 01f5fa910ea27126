//! Exact solvers: the brute-force essential infimum and per-node Snell bisection.

use super::verify::node_residuals;
use super::{check_inputs, GeneratorSpec, LhatResult, Method};
use crate::error::{invalid, Error, Result};
use crate::numeric::bisect_increasing;
use crate::prob_tree::{enumerate_after, AdaptedProcess, NodeId, ScenarioTree, StoppingTime, DEFAULT_MAX_PATHS};

/// Root-to-node weights of nodes visited before stopping, plus `Y_n − E[Y_σ | F_n]`.
fn weights_before(
    tree: &ScenarioTree,
    y: &AdaptedProcess,
    node: NodeId,
    is_stop: &dyn Fn(NodeId) -> bool,
) -> (Vec<(NodeId, f64)>, f64) {
    let mut weights = Vec::new();
    let mut stopped = 0.0;
    let mut stack = vec![(node, 1.0)];
    while let Some((m, w)) = stack.pop() {
        if m != node && (tree.is_terminal(m) || is_stop(m)) {
            stopped += w * y.values[m];
            continue;
        }
        weights.push((m, w));
        for b in tree.children(m) {
            stack.push((b.id, w * b.p));
        }
    }
    (weights, y.values[node] - stopped)
}

/// Solve `E[Σ_{n≤s<σ} f(s, ℓ) dt | F_n] = rhs` given the visit weights.
fn solve_weighted(
    tree: &ScenarioTree,
    y: &AdaptedProcess,
    f: &GeneratorSpec,
    weights: &[(NodeId, f64)],
    rhs: f64,
) -> Result<f64> {
    let dt = tree.dt();
    if let GeneratorSpec::Affine { a, b } = f {
        let sw: f64 = weights.iter().map(|&(_, w)| w).sum();
        let sa: f64 = weights.iter().map(|&(s, w)| w * a.values[s]).sum();
        return Ok((rhs / dt - sa) / (b * sw));
    }
    let g = |l: f64| weights.iter().map(|&(s, w)| w * f.eval(tree, s, l)).sum::<f64>() * dt - rhs;
    let ymax = y.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let l = bisect_increasing(g, 1.0 + ymax / (dt * f.slope_floor()))?;
    let res = g(l).abs();
    if res > 1e-10 * (1.0 + rhs.abs()) {
        return Err(Error::NotConverged(format!("root residual {res:e} above tolerance")));
    }
    Ok(l)
}

/// `ℓ_{n,σ}`: the level solving `E[Σ_{n≤s<σ} f(s, ℓ) dt | F_n] = Y_n − E[Y_σ | F_n]`.
///
/// `sigma` must stop strictly after `node` on its subtree.
pub fn ell_root(
    tree: &ScenarioTree,
    y: &AdaptedProcess,
    f: &GeneratorSpec,
    node: NodeId,
    sigma: &StoppingTime,
) -> Result<f64> {
    check_inputs(tree, y, f)?;
    sigma.check(tree)?;
    tree.node(node)?;
    if tree.is_terminal(node) {
        return invalid(format!("node {node} is terminal; no stopping time is strictly later"));
    }
    if sigma.stop_region[node] {
        return invalid(format!("stopping time is not strictly later than node {node}"));
    }
    let (weights, rhs) = weights_before(tree, y, node, &|m| sigma.stop_region[m]);
    solve_weighted(tree, y, f, &weights, rhs)
}

/// `L̂` from `L`: `−∞` at the root, `max(L̂_parent, L_parent)` below.
pub fn lhat_from_l(tree: &ScenarioTree, l: &AdaptedProcess) -> AdaptedProcess {
    let mut lhat = vec![f64::NEG_INFINITY; tree.len()];
    for t in 0..tree.grid().steps {
        for &n in tree.nodes_at(t) {
            let v = lhat[n].max(l.values[n]);
            for b in tree.children(n) {
                lhat[b.id] = v;
            }
        }
    }
    AdaptedProcess::new(lhat)
}

fn exact_result(tree: &ScenarioTree, y: &AdaptedProcess, f: &GeneratorSpec, l: Vec<f64>, method: Method) -> Result<LhatResult> {
    let l = AdaptedProcess::new(l);
    let lhat = lhat_from_l(tree, &l);
    let residual = node_residuals(tree, y, f, &l)?.into_iter().fold(0.0, f64::max);
    Ok(LhatResult { method, lhat, l, levels: vec![], stop_times: vec![], cell: 0.0, residual })
}

/// Brute-force `L_n = min_{σ > n} ℓ_{n,σ}` with the default path guard.
pub fn solve_essinf_bruteforce(tree: &ScenarioTree, y: &AdaptedProcess, f: &GeneratorSpec) -> Result<LhatResult> {
    solve_essinf_bruteforce_with(tree, y, f, DEFAULT_MAX_PATHS)
}

/// Brute-force essential infimum over every stopping time strictly after each node.
pub fn solve_essinf_bruteforce_with(
    tree: &ScenarioTree,
    y: &AdaptedProcess,
    f: &GeneratorSpec,
    max_paths: usize,
) -> Result<LhatResult> {
    check_inputs(tree, y, f)?;
    let mut l = vec![f64::NEG_INFINITY; tree.len()];
    let mut mark = vec![false; tree.len()];
    for n in 0..tree.len() {
        if tree.is_terminal(n) {
            continue;
        }
        let mut best = f64::INFINITY;
        for stops in enumerate_after(tree, n, max_paths)? {
            for &s in &stops {
                mark[s] = true;
            }
            let (weights, rhs) = weights_before(tree, y, n, &|m| mark[m]);
            best = best.min(solve_weighted(tree, y, f, &weights, rhs)?);
            for &s in &stops {
                mark[s] = false;
            }
        }
        l[n] = best;
    }
    exact_result(tree, y, f, l, Method::Oracle)
}

/// Snell envelope on the subtree of `m` for level `ℓ`.
fn subtree_value(tree: &ScenarioTree, y: &AdaptedProcess, f: &GeneratorSpec, m: NodeId, l: f64) -> f64 {
    let children = tree.children(m);
    if children.is_empty() {
        return y.values[m];
    }
    let cont = f.eval(tree, m, l) * tree.dt()
        + children.iter().map(|b| b.p * subtree_value(tree, y, f, b.id, l)).sum::<f64>();
    y.values[m].max(cont)
}

/// Exact `L` without enumeration.
///
/// At each node, `V(ℓ) = f(n, ℓ) dt + Σ_c p_c Z^ℓ_c` is the best value of
/// continuing for at least one step; it is continuous and strictly increasing
/// in `ℓ`, and `L_n` is its crossing with `Y_n`, found by bisection.
pub fn solve_snell_bisection(tree: &ScenarioTree, y: &AdaptedProcess, f: &GeneratorSpec) -> Result<LhatResult> {
    check_inputs(tree, y, f)?;
    let dt = tree.dt();
    let ymax = y.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let b0 = 1.0 + 2.0 * ymax / (dt * f.slope_floor());
    let mut l = vec![f64::NEG_INFINITY; tree.len()];
    for n in 0..tree.len() {
        if tree.is_terminal(n) {
            continue;
        }
        let g = |lv: f64| {
            f.eval(tree, n, lv) * dt
                + tree.children(n).iter().map(|b| b.p * subtree_value(tree, y, f, b.id, lv)).sum::<f64>()
                - y.values[n]
        };
        l[n] = bisect_increasing(g, b0)?;
    }
    exact_result(tree, y, f, l, Method::Exact)
}
