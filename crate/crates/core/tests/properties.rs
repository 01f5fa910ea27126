//! Property suites for the structural invariants of every module.
//!
//! Instances are drawn from seeded fixture generators; proptest varies the seed.

use mfrep::fixtures::{self, FixtureRng, GeneratorKind};
use mfrep::meanfield::{dimension_reduction_solve, picard_solve, MeanFieldProblem, Phi, PicardConfig, PsiSpec, ReprMethod, Status};
use mfrep::metrics_order::{levy_distance, stochastic_order_leq, VPlusPath};
use mfrep::mfg_apps::{consumption_mfg_equilibrium, timing_equilibrium, ConsumptionMode, Engine};
use mfrep::optimizers::{consumption_budget, hitting_times, singular_optimizer, SingularControlSpec};
use mfrep::prob_tree::{
    conditional_expectation, count_stopping_times, enumerate_stopping_times, normalize_terminal, AdaptedProcess,
    ScenarioTree, StoppingTime, TimeGrid,
};
use mfrep::representation::{
    default_levels, running_max_strict, solve_deterministic_convex_envelope, solve_essinf_bruteforce, solve_level_grid,
    solve_snell_bisection, GeneratorSpec, LhatResult,
};
use proptest::prelude::*;
use rand::Rng;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 32, ..ProptestConfig::default() }
}

fn random_tree(rng: &mut FixtureRng, max_steps: usize, atoms: usize) -> ScenarioTree {
    let steps = rng.random_range(1..=max_steps);
    ScenarioTree::random(rng, TimeGrid::new(1.0, steps).unwrap(), 2, atoms).unwrap()
}

fn instance(seed: u64, kind: GeneratorKind) -> (ScenarioTree, AdaptedProcess, GeneratorSpec) {
    let mut rng = fixtures::rng(seed);
    let tree = random_tree(&mut rng, 3, 1);
    let y = AdaptedProcess::random(&tree, &mut rng, -1.0, 1.0);
    let f = fixtures::random_generator(&tree, &mut rng, kind);
    (tree, y, f)
}

fn kind(flag: bool) -> GeneratorKind {
    if flag {
        GeneratorKind::Table
    } else {
        GeneratorKind::Affine
    }
}

// ── Trees ─────────────────────────────────────────────────────────────

proptest! {
    #![proptest_config(config())]

    #[test]
    fn probabilities_are_normalised(seed in any::<u64>()) {
        let mut rng = fixtures::rng(seed);
        let tree = random_tree(&mut rng, 4, 3);
        let total: f64 = tree.paths().iter().map(|p| p.prob).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        for n in tree.nodes() {
            if !n.children.is_empty() {
                let s: f64 = n.children.iter().map(|b| b.p).sum();
                prop_assert!((s - 1.0).abs() <= 1e-12 && n.children.iter().all(|b| b.p > 0.0));
            }
        }
        let atom_total: f64 = tree.atoms().iter().map(|&a| tree.atom_mass(a)).sum();
        prop_assert!((atom_total - 1.0).abs() <= 1e-12);
        for a in tree.atoms() {
            let mass: f64 = tree.paths().iter().filter(|p| p.atom == a).map(|p| p.prob).sum();
            prop_assert!((mass - tree.atom_mass(a)).abs() <= 1e-12);
        }
    }

    #[test]
    fn tower_property(seed in any::<u64>()) {
        let mut rng = fixtures::rng(seed);
        let tree = random_tree(&mut rng, 4, 1);
        let y = AdaptedProcess::random(&tree, &mut rng, -3.0, 3.0);
        let steps = tree.grid().steps;
        for t in 0..=steps {
            let inner = AdaptedProcess::from_fn(&tree, |n| {
                if n.t >= t { conditional_expectation(&tree, &y, n.id, steps).unwrap() } else { 0.0 }
            });
            for s in 0..=t {
                for &id in tree.nodes_at(s) {
                    let nested = conditional_expectation(&tree, &inner, id, t).unwrap();
                    let direct = conditional_expectation(&tree, &y, id, steps).unwrap();
                    prop_assert!((nested - direct).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn terminal_normalisation_reassembles(seed in any::<u64>()) {
        let mut rng = fixtures::rng(seed);
        let tree = random_tree(&mut rng, 4, 1);
        let y = AdaptedProcess::random(&tree, &mut rng, -3.0, 3.0);
        let (hat, mart) = normalize_terminal(&tree, &y).unwrap();
        for n in tree.nodes() {
            if n.children.is_empty() {
                prop_assert!(hat.values[n.id].abs() <= 1e-12);
            }
            prop_assert!((hat.values[n.id] + mart.values[n.id] - y.values[n.id]).abs() <= 1e-12);
        }
    }

    #[test]
    fn enumeration_is_complete_and_distinct(seed in any::<u64>()) {
        let mut rng = fixtures::rng(seed);
        let tree = random_tree(&mut rng, 3, 1);
        let all = enumerate_stopping_times(&tree, 64).unwrap();
        prop_assert_eq!(all.len() as u128, count_stopping_times(&tree));
        let mut sigs: Vec<Vec<usize>> = all.iter().map(|s| s.signature(&tree)).collect();
        sigs.sort();
        sigs.dedup();
        prop_assert_eq!(sigs.len(), all.len());
        for s in &all {
            prop_assert!(s.check(&tree).is_ok());
        }
    }
}

// ── Representation ────────────────────────────────────────────────────

fn stops_no_later(tree: &ScenarioTree, a: &StoppingTime, b: &StoppingTime) -> bool {
    tree.paths().iter().all(|p| a.stop_index(tree, p) <= b.stop_index(tree, p))
}

fn node_leq(a: &LhatResult, b: &LhatResult, tol: f64) -> bool {
    a.lhat.values.iter().zip(&b.lhat.values).all(|(x, y)| *x == f64::NEG_INFINITY || *x <= y + tol)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn lhat_is_nondecreasing_from_minus_infinity(seed in any::<u64>(), table in any::<bool>()) {
        let (tree, y, f) = instance(seed, kind(table));
        let r = solve_snell_bisection(&tree, &y, &f).unwrap();
        prop_assert_eq!(r.lhat.values[tree.root()], f64::NEG_INFINITY);
        for p in tree.paths() {
            prop_assert!(r.lhat.along(p).windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn hitting_times_increase_with_the_level(seed in any::<u64>(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let (tree, y, f) = instance(seed, GeneratorKind::Affine);
        let r = solve_snell_bisection(&tree, &y, &f).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        let (t_lo, _) = hitting_times(&tree, &r, lo);
        let (t_hi, _) = hitting_times(&tree, &r, hi);
        prop_assert!(stops_no_later(&tree, &t_lo, &t_hi));
    }

    /// `Y¹ − Y²` a supermartingale and `f¹ ≤ f²` give `L̂¹ ≥ L̂²`.
    #[test]
    fn monotone_comparison(seed in any::<u64>(), shift in 0.0..1.0f64) {
        let (tree, y2, f2) = instance(seed, GeneratorKind::Affine);
        let mut rng = fixtures::rng(seed ^ 0x5eed);
        let mut d = vec![0.0; tree.len()];
        for id in tree.backward_order() {
            let n = &tree.nodes()[id];
            d[id] = if n.children.is_empty() {
                rng.random_range(-1.0..1.0)
            } else {
                n.children.iter().map(|b| b.p * d[b.id]).sum::<f64>() + rng.random_range(0.0..0.5)
            };
        }
        let y1 = y2.zip_with(&AdaptedProcess::new(d), |a, b| a + b);
        let f1 = GeneratorSpec::Offset { base: Box::new(f2.clone()), offset: AdaptedProcess::constant(&tree, -shift) };
        let r1 = solve_snell_bisection(&tree, &y1, &f1).unwrap();
        let r2 = solve_snell_bisection(&tree, &y2, &f2).unwrap();
        prop_assert!(node_leq(&r2, &r1, 1e-9));
    }

    #[test]
    fn grid_refinement_never_hurts(seed in any::<u64>(), table in any::<bool>()) {
        let (tree, y, f) = instance(seed, kind(table));
        let o = solve_essinf_bruteforce(&tree, &y, &f).unwrap();
        let coarse = solve_level_grid(&tree, &y, &f, &default_levels(&tree, &y, &f, 65).unwrap()).unwrap();
        let fine = solve_level_grid(&tree, &y, &f, &default_levels(&tree, &y, &f, 129).unwrap()).unwrap();
        prop_assert!(fine.sup_distance(&o) <= coarse.sup_distance(&o) + 1e-12);
        prop_assert!(coarse.sup_distance(&o) <= coarse.cell + 1e-12);
        prop_assert!(fine.sup_distance(&o) <= fine.cell + 1e-12);
    }

    #[test]
    fn affine_scale_equivariance(seed in any::<u64>(), c in 0.1..10.0f64, b in 0.5..2.0f64) {
        let (tree, y, _) = instance(seed, GeneratorKind::Affine);
        let f = GeneratorSpec::Affine { a: AdaptedProcess::zeros(&tree), b };
        let base = solve_essinf_bruteforce(&tree, &y, &f).unwrap();
        let scaled = solve_essinf_bruteforce(&tree, &y.map(|v| c * v), &f).unwrap();
        for (u, v) in base.lhat.values.iter().zip(&scaled.lhat.values) {
            if u.is_finite() {
                prop_assert!((c * u - v).abs() <= 1e-12 * (1.0 + v.abs()));
            } else {
                prop_assert_eq!(*v, f64::NEG_INFINITY);
            }
        }
    }

    #[test]
    fn chain_envelope_matches_the_oracle(seed in any::<u64>(), steps in 1usize..7) {
        let mut rng = fixtures::rng(seed);
        let tree = ScenarioTree::chain(TimeGrid::new(1.0, steps).unwrap()).unwrap();
        let y = AdaptedProcess::random(&tree, &mut rng, -1.0, 1.0);
        let f = GeneratorSpec::identity(&tree);
        let o = solve_essinf_bruteforce(&tree, &y, &f).unwrap();
        let l = solve_deterministic_convex_envelope(&y.values, None, tree.dt()).unwrap();
        let lhat = running_max_strict(&l);
        for k in 1..=steps {
            prop_assert!((lhat[k] - o.lhat.values[k]).abs() <= 1e-9);
        }
    }
}

// ── Metrics and order ─────────────────────────────────────────────────

fn step_path(rng: &mut FixtureRng) -> VPlusPath {
    let mut times = vec![0.0];
    let mut cuts: Vec<f64> = (0..rng.random_range(0..4)).map(|_| rng.random_range(0.01..0.99)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    times.extend(cuts);
    times.push(1.0);
    let mut v = rng.random_range(-2.0..1.0);
    let values = (1..times.len())
        .map(|_| {
            v += rng.random_range(0.0..1.0);
            v
        })
        .collect();
    VPlusPath::new(times, values).unwrap()
}

fn dyadic_measure(rng: &mut FixtureRng) -> Vec<(f64, Vec<f64>)> {
    let mut left = 8u32;
    let mut out = Vec::new();
    while left > 0 {
        let k = rng.random_range(1..=left);
        left -= k;
        out.push((k as f64 / 8.0, vec![rng.random_range(0..4) as f64, rng.random_range(0..4) as f64]));
    }
    out
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn levy_metric_axioms(seed in any::<u64>()) {
        let mut rng = fixtures::rng(seed);
        let [a, b, c] = [0; 3].map(|_| step_path(&mut rng));
        prop_assert!(levy_distance(&a, &a, 1.0).unwrap() <= 2e-10);
        let ab = levy_distance(&a, &b, 1.0).unwrap();
        prop_assert!((ab - levy_distance(&b, &a, 1.0).unwrap()).abs() <= 2e-10);
        let ac = levy_distance(&a, &c, 1.0).unwrap();
        let bc = levy_distance(&b, &c, 1.0).unwrap();
        prop_assert!(ac <= ab + bc + 2e-10);
    }

    #[test]
    fn stochastic_order_is_a_partial_order(seed in any::<u64>()) {
        let mut rng = fixtures::rng(seed);
        let mu = dyadic_measure(&mut rng);
        // Coordinatewise upward shifts give comparable triples.
        let up = |m: &[(f64, Vec<f64>)], rng: &mut FixtureRng| -> Vec<(f64, Vec<f64>)> {
            m.iter().map(|(w, x)| (*w, x.iter().map(|v| v + rng.random_range(0..2) as f64).collect())).collect()
        };
        let nu = up(&mu, &mut rng);
        let rho = up(&nu, &mut rng);
        prop_assert!(stochastic_order_leq(&mu, &mu).unwrap());
        prop_assert!(stochastic_order_leq(&mu, &nu).unwrap() && stochastic_order_leq(&nu, &rho).unwrap());
        prop_assert!(stochastic_order_leq(&mu, &rho).unwrap());
        let other = dyadic_measure(&mut rng);
        if stochastic_order_leq(&mu, &other).unwrap() && stochastic_order_leq(&other, &mu).unwrap() {
            // Equal laws: compare masses point by point.
            let mass = |m: &[(f64, Vec<f64>)], x: &[f64]| m.iter().filter(|(_, y)| y == x).map(|(w, _)| w).sum::<f64>();
            for (_, x) in mu.iter().chain(&other) {
                prop_assert_eq!(mass(&mu, x), mass(&other, x));
            }
        }
    }
}

// ── Optimizers and fixed points ───────────────────────────────────────

proptest! {
    #![proptest_config(config())]

    #[test]
    fn clamp_is_idempotent(seed in any::<u64>()) {
        let mut rng = fixtures::rng(seed);
        let tree = random_tree(&mut rng, 3, 1);
        let spec = SingularControlSpec {
            floor: 0.0,
            cap: AdaptedProcess::from_fn(&tree, |n| 0.5 + 0.25 * n.t as f64),
            c_prime: fixtures::random_generator(&tree, &mut rng, GeneratorKind::Affine),
            k: fixtures::terminal_zero(&tree, &mut rng, -0.5, 0.5),
        };
        let r = solve_snell_bisection(&tree, &spec.representation_target(), &spec.c_prime).unwrap();
        let once = singular_optimizer(&tree, &r, &spec).unwrap();
        let again = LhatResult { lhat: once.clone(), ..r };
        prop_assert_eq!(singular_optimizer(&tree, &again, &spec).unwrap(), once.clone());
        for n in tree.nodes() {
            prop_assert!(once.values[n.id] <= spec.cap.values[n.id]);
        }
    }

    #[test]
    fn consumption_budget_is_consistent(seed in any::<u64>(), kappa in 0.0..0.3f64) {
        let mut rng = fixtures::rng(seed);
        let tree = random_tree(&mut rng, 2, 1);
        let game = fixtures::consumption_game(&tree, 0.3, 0.4, kappa, ConsumptionMode::General);
        let e = consumption_mfg_equilibrium(&tree, &game, &Engine::default(), ReprMethod::Exact).unwrap();
        let b = consumption_budget(&tree, &game.spec, &e.plan.increments).unwrap();
        prop_assert!((b - e.budget).abs() <= 1e-10);
    }

    #[test]
    fn picard_fixed_point_certificate(seed in any::<u64>()) {
        let mut rng = fixtures::rng(seed);
        let tree = ScenarioTree::random(&mut rng, TimeGrid::new(1.0, 2).unwrap(), 2, 2).unwrap();
        let adapter = fixtures::interaction_problem(&tree, &mut rng, 0.2, 0.2, PsiSpec::Lhat);
        let p = MeanFieldProblem::new(tree, adapter, ReprMethod::Exact);
        let cfg = PicardConfig { damping: 1.0, tol: 1e-8, max_iter: 100 };
        let r = picard_solve(&p, &p.dirac(p.constant_path(0.0).unwrap()), &cfg).unwrap();
        prop_assert_eq!(r.status, Status::Converged);
        prop_assert_eq!(r.trace.len(), r.iterations);
        prop_assert!(r.trace.iter().all(|&v| v >= 0.0));
        prop_assert!(r.m_star.distance(&p.phi(&r.m_star).unwrap()).unwrap() <= 2.0 * cfg.tol);
        prop_assert!(r.residual_representation <= r.representation_tolerance);
    }

    #[test]
    fn reduction_shifts_paths_exactly(seed in any::<u64>(), amp in 0.05..0.9f64) {
        let mut rng = fixtures::rng(seed);
        let table = fixtures::monotone_l_table(&mut rng, 4, 5).unwrap();
        let phi = Phi::Tanh { amp, slope: 0.9, offset: 0.0 };
        let r = dimension_reduction_solve(&table, &phi, 1e-12).unwrap();
        prop_assert_eq!(&r.shifted.probs, &table.probs);
        for (p, q) in r.shifted.paths.iter().zip(&table.paths) {
            for k in 0..q.len() {
                prop_assert_eq!(p[k], q[k] + r.y[k]);
            }
        }
    }

    #[test]
    fn timing_populations_stop_in_level_order(seed in any::<u64>(), kappa in 0.0..0.4f64) {
        let mut rng = fixtures::rng(seed);
        let tree = random_tree(&mut rng, 3, 1);
        let game = fixtures::timing_game(&tree, &mut rng, kappa, 0.0);
        let e = timing_equilibrium(&tree, &game, &Engine::default(), ReprMethod::Exact).unwrap();
        for w in e.stopping.windows(2) {
            let a = StoppingTime::from_stop_nodes(&tree, &w[0].stop_nodes);
            let b = StoppingTime::from_stop_nodes(&tree, &w[1].stop_nodes);
            prop_assert!(stops_no_later(&tree, &a, &b));
        }
        prop_assert!(e.certificate.populations.iter().all(|p| p.gap >= 0.0));
    }
}
