//! Residual of the representation identity.

use super::{check_inputs, GeneratorSpec, LhatResult};
use crate::error::{Error, Result};
use crate::prob_tree::{normalize_terminal, AdaptedProcess, NodeId, ScenarioTree, StoppingTime};

/// `E[Σ_{k≥t(m)} f(k, max(run, L_j : j ≤ k)) dt | F_m]` on the subtree of `m`.
fn restarted_value(tree: &ScenarioTree, f: &GeneratorSpec, l: &AdaptedProcess, m: NodeId, run: f64) -> f64 {
    let children = tree.children(m);
    if children.is_empty() {
        return 0.0;
    }
    let level = run.max(l.values[m]);
    f.eval(tree, m, level) * tree.dt()
        + children.iter().map(|b| b.p * restarted_value(tree, f, l, b.id, level)).sum::<f64>()
}

/// `|Ŷ_n − E[Σ_{k≥t(n)} f(k, max_{t(n)≤j≤k} L_j) dt | F_n]|` at every node.
pub fn node_residuals(tree: &ScenarioTree, y: &AdaptedProcess, f: &GeneratorSpec, l: &AdaptedProcess) -> Result<Vec<f64>> {
    check_inputs(tree, y, f)?;
    l.check(tree, "L")?;
    let (hat, _) = normalize_terminal(tree, y)?;
    Ok((0..tree.len())
        .map(|n| {
            let r = (hat.values[n] - restarted_value(tree, f, l, n, f64::NEG_INFINITY)).abs();
            if r.is_nan() { f64::INFINITY } else { r }
        })
        .collect())
}

/// Deterministic starts `τ ≡ k` for every `k`, which between them visit every node.
pub fn starts_every_time(tree: &ScenarioTree) -> Vec<StoppingTime> {
    (0..=tree.grid().steps).map(|k| StoppingTime::at_time(tree, k)).collect()
}

/// Largest residual of the representation identity over every node where one of
/// the supplied starts stops, using the `L` values carried by `lhat`.
pub fn verify_representation(
    tree: &ScenarioTree,
    y: &AdaptedProcess,
    f: &GeneratorSpec,
    lhat: &LhatResult,
    starts: &[StoppingTime],
) -> Result<f64> {
    if lhat.lhat.len() != tree.len() {
        return Err(Error::Mismatch("representation result belongs to a different tree".into()));
    }
    let res = node_residuals(tree, y, f, &lhat.l)?;
    let mut worst: f64 = 0.0;
    for tau in starts {
        tau.check(tree)?;
        for n in tau.stop_nodes(tree) {
            worst = worst.max(res[n]);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob_tree::{enumerate_stopping_times, TimeGrid};
    use crate::representation::solve_essinf_bruteforce;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_process_has_zero_residual() {
        let tree = ScenarioTree::uniform(TimeGrid::new(1.0, 2).unwrap(), 2).unwrap();
        let y = AdaptedProcess::zeros(&tree);
        let f = GeneratorSpec::identity(&tree);
        let r = solve_essinf_bruteforce(&tree, &y, &f).unwrap();
        let starts = enumerate_stopping_times(&tree, 64).unwrap();
        assert_eq!(verify_representation(&tree, &y, &f, &r, &starts).unwrap(), 0.0);
    }

    #[test]
    fn random_oracle_residual_over_all_starts() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5 {
            let tree = ScenarioTree::random(&mut rng, TimeGrid::new(1.0, 2).unwrap(), 2, 1).unwrap();
            let y = AdaptedProcess::random(&tree, &mut rng, -1.0, 1.0);
            let f = GeneratorSpec::Affine { a: AdaptedProcess::random(&tree, &mut rng, -1.0, 1.0), b: 1.3 };
            let r = solve_essinf_bruteforce(&tree, &y, &f).unwrap();
            let starts = enumerate_stopping_times(&tree, 64).unwrap();
            assert!(verify_representation(&tree, &y, &f, &r, &starts).unwrap() <= 1e-9);
        }
    }
}
