use gridrr::exec::Executor;
use gridrr::matching::{decompose_into_matchings, ColorRowMultigraph, Edge};
use gridrr::pipeline2d::{solve, MatchingKind, Regime, SolverOptions};
use gridrr::refine::{refine_plan, visit_orders};
use gridrr::scenario::{generate, InstanceSpec};
use gridrr::shuffle::{highway_shuffle, linear_merge_shuffle, merge_bound, odd_even_shuffle, Highway, ShuffleMode};
use gridrr::{compute_metrics, validate_plan, Cell, GridSpace, Instance, Plan};
use num_rational::Ratio;
use proptest::prelude::*;
use proptest::sample::subsequence;

fn permutation(max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    (2..=max_len).prop_flat_map(|n| Just((0..n).collect::<Vec<_>>()).prop_shuffle())
}

fn line(g: &GridSpace, x: usize, len: usize) -> Vec<usize> {
    (0..len).map(|y| g.index(Cell::new(x, y))).collect()
}

fn check_line_result(g: &GridSpace, cells: &[usize], perm: &[usize], f: &gridrr::exec::Fragment) {
    let mut ex = Executor::new(g, cells).unwrap();
    ex.apply(f).unwrap();
    for (a, &b) in perm.iter().enumerate() {
        assert_eq!(ex.pos()[a] as usize, cells[b]);
    }
}

fn plan_cells(inst: &Instance, plan: &Plan) -> Vec<Vec<usize>> {
    plan.paths.iter().map(|p| p.iter().map(|&c| inst.space.index(c)).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn highway_permutes_within_bound(perm in permutation(40)) {
        let n = perm.len();
        let g = GridSpace::new_2d(3, n, &[]).unwrap();
        let (lo, c, hi) = (line(&g, 0, n), line(&g, 1, n), line(&g, 2, n));
        let moves: Vec<(usize, usize)> = perm.iter().enumerate().filter(|(a, b)| a != *b).map(|(a, &b)| (a, b)).collect();
        let f = highway_shuffle(Highway { center: &c, lane_dec: &lo, lane_inc: &hi }, &moves).unwrap();
        prop_assert!(f.len() <= n + 7);
        check_line_result(&g, &c, &perm, &f);
    }

    #[test]
    fn linear_merge_permutes_within_bound(perm in permutation(40)) {
        let n = perm.len();
        let g = GridSpace::new_2d(2, n, &[]).unwrap();
        let (p, s) = (line(&g, 0, n), line(&g, 1, n));
        let f = linear_merge_shuffle(&p, &s, &perm).unwrap();
        prop_assert!(f.len() <= merge_bound(n));
        check_line_result(&g, &p, &perm, &f);
    }

    #[test]
    fn odd_even_permutes_every_line(perms in (2usize..10).prop_flat_map(|n| proptest::collection::vec(Just((0..n).collect::<Vec<_>>()).prop_shuffle(), 3..7)), faster in any::<bool>()) {
        let (k, n) = (perms.len(), perms[0].len());
        let g = GridSpace::new_2d(k, n, &[]).unwrap();
        let lines: Vec<Vec<usize>> = (0..k).map(|x| line(&g, x, n)).collect();
        let mode = if faster { ShuffleMode::Faster } else { ShuffleMode::Fast };
        let f = match odd_even_shuffle(&lines, &perms, mode) {
            r => r.unwrap(),
        };
        prop_assert!(f.len() <= 7 * n);
        let all: Vec<usize> = lines.concat();
        let mut ex = Executor::new(&g, &all).unwrap();
        ex.apply(&f).unwrap();
        for x in 0..k {
            for (a, &b) in perms[x].iter().enumerate() {
                prop_assert_eq!(ex.pos()[x * n + a] as usize, lines[x][b]);
            }
        }
    }

    #[test]
    fn regular_multigraphs_decompose_exactly(m in 1usize..24, d in 1usize..8, seed in any::<u64>()) {
        // union of d random perfect matchings is d-regular
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let mut edges = Vec::new();
        for _ in 0..d {
            let mut p: Vec<usize> = (0..m).collect();
            rand::seq::SliceRandom::shuffle(&mut p[..], &mut rng);
            for (row, &color) in p.iter().enumerate() {
                edges.push(Edge { color, row, robot: edges.len() });
            }
        }
        let g = ColorRowMultigraph::new(m, edges).unwrap();
        let ms = decompose_into_matchings(&g).unwrap();
        prop_assert!(ms.verify(&g));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(160))]

    #[test]
    fn solver_plans_validate_and_refine_safely(
        m1 in 2usize..10,
        m2 in 2usize..10,
        regime in prop_oneof![Just(Regime::Full), Just(Regime::Half), Just(Regime::Third)],
        lba in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let density = match regime {
            Regime::Full => Ratio::new(1, 1),
            Regime::Half => Ratio::new(1, 2),
            Regime::Third => Ratio::new(1, 3),
        };
        let inst = generate(&InstanceSpec::random(&[m1, m2], density, seed)).unwrap();
        let matching = if lba { MatchingKind::Lba } else { MatchingKind::Hall };
        let plan = match solve(&inst, &SolverOptions { regime, matching, seed, ..Default::default() }) {
            Ok(p) => p,
            Err(gridrr::Error::Dimension(_)) => return Ok(()),
            // a full 2x2 grid only rotates
            Err(gridrr::Error::Infeasible(_)) if m1 == 2 && m2 == 2 => return Ok(()),
            Err(e) => panic!("{m1}x{m2} {regime:?}: {e}"),
        };
        let base = compute_metrics(&inst, &plan).unwrap();

        let refined = refine_plan(&inst, &plan).unwrap();
        let r = compute_metrics(&inst, &refined).unwrap();
        prop_assert!(r.makespan <= base.makespan && r.soc <= base.soc);
        let cells = inst.space.num_cells();
        prop_assert_eq!(visit_orders(cells, &plan_cells(&inst, &plan)), visit_orders(cells, &plan_cells(&inst, &refined)));

        let back = Plan { horizon: plan.horizon, ids: plan.ids.clone(), paths: plan.paths.iter().map(|p| p.iter().rev().copied().collect()).collect() };
        prop_assert!(validate_plan(&inst.reversed(), &back).unwrap().valid);
    }

    #[test]
    fn dropping_robots_keeps_plans_valid(seed in 0u64..1000, keep in subsequence((0..30usize).collect::<Vec<_>>(), 0..30)) {
        let inst = generate(&InstanceSpec::random(&[9, 10], Ratio::new(1, 3), seed)).unwrap();
        let plan = solve(&inst, &SolverOptions::default()).unwrap();
        prop_assert_eq!(&plan.ids, &inst.ids);
        let sub = Instance::new(inst.space.clone(), keep.iter().map(|&i| inst.starts[i]).collect(), keep.iter().map(|&i| inst.goals[i]).collect()).unwrap();
        let sub_plan = Plan { horizon: plan.horizon, ids: sub.ids.clone(), paths: keep.iter().map(|&i| plan.paths[i].clone()).collect() };
        prop_assert!(validate_plan(&sub, &sub_plan).unwrap().valid);
    }
}
