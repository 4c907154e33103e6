use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use swarm_perception::topology::{Topology, TopologyGraph};

fn check_simple(g: &TopologyGraph) -> Result<(), TestCaseError> {
    for (i, row) in g.adjacency().iter().enumerate() {
        prop_assert!(!row.contains(&i), "self loop at {}", i);
        prop_assert!(row.windows(2).all(|w| w[0] < w[1]), "unsorted or duplicate neighbours at {}", i);
        for &j in row {
            prop_assert!(g.neighbors(j).unwrap().contains(&i), "edge {}-{} is one-way", i, j);
        }
    }
    prop_assert_eq!(g.degrees().iter().sum::<usize>(), 2 * g.edge_count());
    Ok(())
}

proptest! {
    #[test]
    fn deterministic_topologies_are_simple_and_connected(n in 3usize..200) {
        for g in [TopologyGraph::fully_connected(n), TopologyGraph::ring(n), TopologyGraph::line(n)] {
            let g = g.unwrap();
            check_simple(&g)?;
            prop_assert!(g.is_connected());
        }
        prop_assert_eq!(TopologyGraph::ring(n).unwrap().edge_count(), n);
        prop_assert_eq!(TopologyGraph::line(n).unwrap().edge_count(), n - 1);
        prop_assert_eq!(TopologyGraph::fully_connected(n).unwrap().edge_count(), n * (n - 1) / 2);
    }

    #[test]
    fn scale_free_graphs_are_simple_and_connected(n in 4usize..300, m in 1usize..4, seed in any::<u64>()) {
        prop_assume!(n > m + 1);
        let g = TopologyGraph::scale_free(n, m, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        check_simple(&g)?;
        prop_assert!(g.is_connected());
        let clique = m * (m + 1) / 2;
        prop_assert_eq!(g.edge_count(), clique + (n - m - 1) * m);
        prop_assert!(g.degrees().iter().all(|&d| d >= m));
    }

    #[test]
    fn scale_free_is_reproducible(n in 4usize..150, seed in any::<u64>()) {
        let build = || Topology::ScaleFree { m: 2 }.build(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(build(), build());
    }

    #[test]
    fn edge_list_round_trips(n in 4usize..100, seed in any::<u64>()) {
        let g = TopologyGraph::scale_free(n, 2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(TopologyGraph::from_edge_list(&g.to_edge_list()).unwrap(), g);
    }
}

#[test]
fn topology_names_parse() {
    for (text, expected) in [
        ("fully-connected", Topology::FullyConnected),
        ("ring", Topology::Ring),
        ("line", Topology::Line),
        ("scale-free", Topology::ScaleFree { m: 2 }),
        ("scale-free:3", Topology::ScaleFree { m: 3 }),
    ] {
        assert_eq!(text.parse::<Topology>().unwrap(), expected);
        assert_eq!(expected.to_string().parse::<Topology>().unwrap(), expected);
    }
    assert!("star".parse::<Topology>().is_err());
    assert!("scale-free:0".parse::<Topology>().map_or(true, |t| t.validate(10).is_err()));
}
