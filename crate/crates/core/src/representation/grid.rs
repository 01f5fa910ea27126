//! Level-grid solver: one smallest optimal stopping problem per level.

use super::snell::snell_core;
use super::verify::node_residuals;
use super::{check_inputs, GeneratorSpec, LhatResult, Method};
use crate::error::{invalid, Error, Result};
use crate::prob_tree::{AdaptedProcess, ScenarioTree, StoppingTime};
use rayon::prelude::*;

/// Default number of levels.
pub const DEFAULT_LEVELS: usize = 257;

/// One-step roots `ℓ_{n,n+1}` solving `f(n, ℓ) dt = Y_n − E[Y_{t+1} | F_n]`
/// at every non-terminal node. `L` always lies between their extremes.
pub fn one_step_roots(tree: &ScenarioTree, y: &AdaptedProcess, f: &GeneratorSpec) -> Result<Vec<f64>> {
    check_inputs(tree, y, f)?;
    let next = tree.expect_next(y);
    let dt = tree.dt();
    (0..tree.len())
        .filter(|&n| !tree.is_terminal(n))
        .map(|n| f.inverse(tree, n, (y.values[n] - next[n]) / dt))
        .collect()
}

/// `count` uniform levels spanning the one-step roots, padded slightly so ties
/// at the extremes fall inside the grid (and by ±0.5 when the span is degenerate).
pub fn default_levels(tree: &ScenarioTree, y: &AdaptedProcess, f: &GeneratorSpec, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return invalid("level grid needs at least two levels");
    }
    let roots = one_step_roots(tree, y, f)?;
    let mut lo = roots.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = roots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-9 {
        lo -= 0.5;
        hi += 0.5;
    } else {
        let pad = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
        lo -= pad;
        hi += pad;
    }
    Ok((0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect())
}

/// Advertised representation tolerance `cell · T · Lip(f)` of a level-grid result
/// (`Lip = 1` when the generator has no global constant).
pub fn grid_tolerance(result: &LhatResult, tree: &ScenarioTree, f: &GeneratorSpec) -> f64 {
    result.cell * tree.grid().horizon * f.lipschitz().unwrap_or(1.0)
}

/// `L̂_t = sup{ℓ in grid : τ_ℓ ≤ t − 1}` from the smallest optimal stopping times
/// `τ_ℓ` of `Y_τ + Σ_{s<τ} f(s, ℓ) dt`.
pub fn solve_level_grid(tree: &ScenarioTree, y: &AdaptedProcess, f: &GeneratorSpec, levels: &[f64]) -> Result<LhatResult> {
    check_inputs(tree, y, f)?;
    if levels.len() < 2 {
        return invalid("level grid needs at least two levels");
    }
    if levels.iter().any(|l| !l.is_finite()) || levels.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("levels must be finite and strictly increasing");
    }
    let regions: Vec<Vec<bool>> = levels
        .par_iter()
        .map(|&lv| snell_core(tree, &y.values, |n| f.eval(tree, n, lv)).1)
        .collect();
    let stop_times: Vec<StoppingTime> = regions.into_iter().map(|r| StoppingTime { stop_region: r }).collect();

    for (i, w) in stop_times.windows(2).enumerate() {
        for p in tree.paths() {
            if w[0].stop_index(tree, p) > w[1].stop_index(tree, p) {
                return Err(Error::OrderViolation(format!(
                    "τ at level {} stops after τ at level {} on a path",
                    levels[i],
                    levels[i + 1]
                )));
            }
        }
    }

    let n = tree.len();
    let mut l = vec![f64::NEG_INFINITY; n];
    for id in 0..n {
        if tree.is_terminal(id) {
            continue;
        }
        l[id] = levels
            .iter()
            .zip(&stop_times)
            .filter(|(_, st)| st.stop_region[id])
            .map(|(&lv, _)| lv)
            .fold(levels[0], f64::max);
    }
    let mut lhat = vec![f64::NEG_INFINITY; n];
    for (&lv, st) in levels.iter().zip(&stop_times) {
        // hit[m]: the path through m stopped strictly before m.
        let mut hit = vec![false; n];
        for t in 0..tree.grid().steps {
            for &id in tree.nodes_at(t) {
                let stopped = hit[id] || st.stop_region[id];
                for b in tree.children(id) {
                    hit[b.id] = stopped;
                    if stopped {
                        lhat[b.id] = lhat[b.id].max(lv);
                    }
                }
            }
        }
    }
    let l = AdaptedProcess::new(l);
    let residual = node_residuals(tree, y, f, &l)?.into_iter().fold(0.0, f64::max);
    let cell = levels.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(LhatResult {
        method: Method::LevelGrid,
        lhat: AdaptedProcess::new(lhat),
        l,
        levels: levels.to_vec(),
        stop_times,
        cell,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob_tree::TimeGrid;
    use crate::representation::{solve_deterministic_convex_envelope, solve_essinf_bruteforce};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_process_on_three_levels() {
        let tree = ScenarioTree::uniform(TimeGrid::new(1.0, 2).unwrap(), 2).unwrap();
        let y = AdaptedProcess::zeros(&tree);
        let f = GeneratorSpec::identity(&tree);
        let r = solve_level_grid(&tree, &y, &f, &[-1.0, 0.0, 1.0]).unwrap();
        assert!(r.stop_times[0].stop_region[0]);
        assert!(r.stop_times[1].stop_region[0]);
        assert!(tree.paths().iter().all(|p| r.stop_times[2].stop_index(&tree, p) == 2));
        assert_eq!(r.lhat.values[0], f64::NEG_INFINITY);
        assert!(r.lhat.values[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_within_one_cell_of_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let tree = ScenarioTree::random(&mut rng, TimeGrid::new(1.0, 3).unwrap(), 2, 1).unwrap();
            let y = AdaptedProcess::random(&tree, &mut rng, -1.0, 1.0);
            let f = GeneratorSpec::Affine { a: AdaptedProcess::random(&tree, &mut rng, -0.5, 0.5), b: 1.0 };
            let o = solve_essinf_bruteforce(&tree, &y, &f).unwrap();
            let levels = default_levels(&tree, &y, &f, DEFAULT_LEVELS).unwrap();
            let g = solve_level_grid(&tree, &y, &f, &levels).unwrap();
            assert!(g.sup_distance(&o) <= g.cell + 1e-12);
            assert!(g.residual <= grid_tolerance(&g, &tree, &f));
        }
    }

    #[test]
    fn first_counterexample_on_a_fine_grid() {
        let n = 2.0;
        let steps = 64;
        let grid = TimeGrid::new(1.0, steps).unwrap();
        let tree = ScenarioTree::chain(grid).unwrap();
        let ys: Vec<f64> = (0..=steps)
            .map(|k| {
                let t = grid.time(k);
                if (0.5..0.5 + 1.0 / n).contains(&t) { t - 0.5 } else { 0.0 }
            })
            .collect();
        let y = AdaptedProcess::new(ys.clone());
        let f = GeneratorSpec::identity(&tree);
        let levels: Vec<f64> = (0..400).map(|i| -1.2 + 1.4 * i as f64 / 399.0).collect();
        let g = solve_level_grid(&tree, &y, &f, &levels).unwrap();
        let l = solve_deterministic_convex_envelope(&ys, None, grid.dt()).unwrap();
        let exact = crate::representation::running_max_strict(&l);
        let cell = 1.4 / 399.0;
        // Up to t = 1/2 the running maximum stays inside the level range and
        // equals the closed form -2/(2+n) up to a grid-step correction.
        for k in 1..=steps / 2 {
            assert!((g.lhat.values[k] - exact[k]).abs() <= cell + 1e-12);
            assert!((g.lhat.values[k] + 2.0 / (2.0 + n)).abs() <= cell + 2.0 * grid.dt());
        }
    }
}
