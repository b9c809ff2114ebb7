//! Property checks of the building blocks against brute-force references.

// Reachability matrices read best with explicit indices.
#![allow(clippy::needless_range_loop)]

use cisgraph::cellset::CellSet;
use cisgraph::dynamics::{discretize_ode_with, Discretization, SystemModel};
use cisgraph::grid::{CellGrid, CellId};
use cisgraph::invariance::{cartesian_product, i_plus, scc, tensor_product};
use cisgraph::registry::{builtin_model, cstr6_ode, CstrVariant, BUILTIN_NAMES};
use cisgraph::symbolic_image::{build_graph, InputStrategy, SymbolicImage};
use cisgraph::{Interval, IntervalBox};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample_in(b: &IntervalBox, rng: &mut impl Rng) -> Vec<f64> {
    b.intervals()
        .iter()
        .map(|iv| {
            if iv.width() > 0.0 {
                rng.gen_range(iv.lo()..=iv.hi())
            } else {
                iv.lo()
            }
        })
        .collect()
}

/// Random sub-box of `b` with widths up to `frac` of the original.
fn sub_box(b: &IntervalBox, frac: f64, rng: &mut impl Rng) -> IntervalBox {
    IntervalBox::new(
        b.intervals()
            .iter()
            .map(|iv| {
                let w = iv.width() * rng.gen_range(0.0..=frac);
                let lo = rng.gen_range(iv.lo()..=iv.hi() - w);
                Interval::new(lo, lo + w)
            })
            .collect(),
    )
}

#[test]
fn interval_images_enclose_point_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for name in BUILTIN_NAMES {
        let m = builtin_model(name).unwrap().model;
        for _ in 0..1000 {
            let xb = sub_box(m.state_box(), 0.3, &mut rng);
            let ub = sub_box(m.input_box(), 1.0, &mut rng);
            let enclosure = m.evaluate_interval(&xb, &ub).unwrap();
            let x = sample_in(&xb, &mut rng);
            let u = sample_in(&ub, &mut rng);
            let y = m.evaluate(&x, &u).unwrap();
            assert!(enclosure.contains_point(&y), "{name}: {y:?} not in {enclosure:?}");
        }
    }
}

#[test]
fn euler_and_heun_match_hand_steps() {
    let ode = cstr6_ode(CstrVariant::NegativeDa1);
    // wide box: the Euler predictor may leave the state box
    let field = SystemModel::new(
        "f",
        ode.field.clone(),
        IntervalBox::cube(6, -10.0, 10.0),
        ode.input_box.clone(),
    )
    .unwrap();
    let h = 0.25;
    let euler = discretize_ode_with(&ode, h, Discretization::ExplicitEuler).unwrap();
    let heun = discretize_ode_with(&ode, h, Discretization::Heun).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let x = sample_in(&ode.state_box, &mut rng);
        let u = sample_in(&ode.input_box, &mut rng);
        let f0 = field.evaluate(&x, &u).unwrap();
        let pred: Vec<f64> = x.iter().zip(&f0).map(|(a, b)| a + h * b).collect();
        for (got, want) in euler.evaluate(&x, &u).unwrap().iter().zip(&pred) {
            assert!((got - want).abs() < 1e-12);
        }
        let f1 = field.evaluate(&pred, &u).unwrap();
        let want: Vec<f64> = (0..x.len()).map(|i| x[i] + h / 2.0 * (f0[i] + f1[i])).collect();
        for (got, want) in heun.evaluate(&x, &u).unwrap().iter().zip(&want) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_indexing_is_a_bijection(
        divisions in proptest::collection::vec(1usize..7, 1..4),
        lo in -3.0f64..0.0,
        width in 0.5f64..4.0,
    ) {
        let dim = divisions.len();
        let grid = CellGrid::new(IntervalBox::cube(dim, lo, lo + width), divisions).unwrap();
        let mut volume = 0.0;
        for c in 0..grid.len() {
            let m = grid.multi_index(CellId(c));
            prop_assert_eq!(grid.flat(&m), CellId(c));
            let b = grid.cell_bounds(CellId(c)).unwrap();
            volume += b.widths().iter().product::<f64>();
            // the cell's midpoint lies in the cell
            let mid: Vec<f64> = b.intervals().iter().map(Interval::mid).collect();
            prop_assert_eq!(grid.locate(&mid).unwrap(), CellId(c));
        }
        prop_assert!((volume - width.powi(dim as i32)).abs() < 1e-9 * width.powi(dim as i32));
    }

    #[test]
    fn located_points_lie_in_their_cell(
        divisions in proptest::collection::vec(1usize..9, 1..4),
        seed in any::<u64>(),
    ) {
        let dim = divisions.len();
        let grid = CellGrid::new(IntervalBox::cube(dim, -1.0, 2.0), divisions).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..32 {
            let p = sample_in(grid.domain(), &mut rng);
            let c = grid.locate(&p).unwrap();
            prop_assert!(grid.cell_bounds(c).unwrap().contains_point(&p));
        }
        let outside = vec![3.0; dim];
        prop_assert!(grid.locate(&outside).is_err());
    }
}

#[test]
fn symbolic_image_contains_sampled_transitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (name, k) in [("example2", 16), ("nonlinear3", 8), ("linear3", 8)] {
        let m = builtin_model(name).unwrap().model;
        let grid = CellGrid::new(m.state_box().clone(), vec![k; m.state_dim()]).unwrap();
        for strategy in [InputStrategy::Whole, InputStrategy::Partition(3)] {
            let g = build_graph(&m, &grid, strategy).unwrap();
            let mut checked = 0;
            while checked < 10_000 {
                let x = sample_in(m.state_box(), &mut rng);
                let u = sample_in(m.input_box(), &mut rng);
                let y = m.evaluate(&x, &u).unwrap();
                let Ok(t) = grid.locate(&y) else { continue };
                let s = grid.locate(&x).unwrap();
                assert!(g.csr().has_edge(s.0, t.0), "{name}: missing edge {s:?} -> {t:?}");
                checked += 1;
            }
        }
    }
}

#[test]
fn finer_input_partitions_only_remove_edges() {
    for name in ["nonlinear3", "example2"] {
        let m = builtin_model(name).unwrap().model;
        let grid = CellGrid::new(m.state_box().clone(), vec![10; m.state_dim()]).unwrap();
        let whole = build_graph(&m, &grid, InputStrategy::Whole).unwrap();
        let split = build_graph(&m, &grid, InputStrategy::Partition(4)).unwrap();
        assert!(split.csr().edges().all(|(s, t)| whole.csr().has_edge(s, t)));
        assert!(i_plus(&split).is_subset(&i_plus(&whole)));
    }
}

fn line_graph(n: usize, edges: &[(usize, usize)]) -> SymbolicImage {
    let grid = CellGrid::new(IntervalBox::cube(1, 0.0, n as f64), vec![n]).unwrap();
    SymbolicImage::from_edges(grid, edges).unwrap()
}

/// Reflexive-transitive closure (Warshall).
fn closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in edges {
        r[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

fn brute_i_plus(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let r = closure(n, edges);
    let on_cycle = |v: usize| edges.iter().any(|&(a, b)| a == v && r[b][v]);
    (0..n).filter(|&v| (0..n).any(|w| r[v][w] && on_cycle(w))).collect()
}

fn graph_strategy(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1..=max_n).prop_flat_map(|n| (Just(n), proptest::collection::vec((0..n, 0..n), 0..3 * n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scc_matches_mutual_reachability((n, edges) in graph_strategy(60)) {
        let g = line_graph(n, &edges);
        let s = scc(&g);
        let r = closure(n, &edges);
        for a in 0..n {
            for b in 0..n {
                prop_assert_eq!(s.component_of(a) == s.component_of(b), r[a][b] && r[b][a]);
            }
            let comp = s.component_of(a);
            let size = (0..n).filter(|&b| s.component_of(b) == comp).count();
            let self_loop = edges.contains(&(a, a));
            prop_assert_eq!(s.is_nontrivial(comp), size > 1 || self_loop);
        }
    }

    #[test]
    fn i_plus_is_the_largest_closed_set((n, edges) in graph_strategy(60)) {
        let g = line_graph(n, &edges);
        let ip = i_plus(&g);
        prop_assert_eq!(ip.to_vec(), brute_i_plus(n, &edges));
        // every member keeps a successor inside
        for v in ip.iter() {
            prop_assert!(g.successors(CellId(v)).iter().any(|&w| ip.contains(w as usize)));
        }
    }

    #[test]
    fn product_graphs_relate_to_factors(
        (n1, e1) in graph_strategy(8),
        (n2, e2) in graph_strategy(8),
    ) {
        let g1 = line_graph(n1, &e1);
        let g2 = line_graph(n2, &e2);
        let (i1, i2) = (i_plus(&g1), i_plus(&g2));
        let cart = i_plus(&cartesian_product(&g1, &g2).unwrap());
        let tensor = i_plus(&tensor_product(&g1, &g2).unwrap());
        let mut either = i1.product(&CellSet::full(n2));
        either.union_with(&CellSet::full(n1).product(&i2));
        prop_assert_eq!(cart, either);
        prop_assert_eq!(tensor, i1.product(&i2));
    }
}
