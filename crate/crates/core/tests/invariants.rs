use std::collections::{BTreeMap, BTreeSet};

use gig_core::assembly::{class_weights, stratified_split, GeneVocabulary};
use gig_core::graph::sym;
use gig_core::graphlets::{brute_force_orbits, count_orbits, DEFAULT_BRUTE_FORCE_CAP};
use gig_core::nullmodels::{degree_preserving_rewire, er_rewire, RewireConfig};
use gig_core::{merge_graphs, restrict_to_genes, MolecularGraph};
use proptest::prelude::*;

fn arb_graph(max_nodes: usize) -> impl Strategy<Value = MolecularGraph> {
    (2usize..=max_nodes).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        proptest::collection::vec(any::<bool>(), pairs).prop_map(move |bits| {
            let mut edges = Vec::new();
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if bits[k] {
                        edges.push((sym(&format!("G{i:02}")), sym(&format!("G{j:02}"))));
                    }
                    k += 1;
                }
            }
            MolecularGraph::from_edges(edges, (0..n).map(|i| sym(&format!("G{i:02}"))))
        })
    })
}

fn adjacency(g: &MolecularGraph) -> (Vec<BTreeSet<usize>>, usize) {
    let ig = g.indexed();
    (ig.adjacency().into_iter().map(|v| v.into_iter().collect()).collect(), ig.node_count())
}

/// Triangles and 4-cliques by direct subset enumeration.
fn motif_counts(g: &MolecularGraph) -> (u64, u64) {
    let (adj, n) = adjacency(g);
    let e = |a: usize, b: usize| adj[a].contains(&b);
    let (mut tri, mut k4) = (0, 0);
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                if e(a, b) && e(a, c) && e(b, c) {
                    tri += 1;
                    for d in c + 1..n {
                        if e(a, d) && e(b, d) && e(c, d) {
                            k4 += 1;
                        }
                    }
                }
            }
        }
    }
    (tri, k4)
}

fn degree_sequence(g: &MolecularGraph) -> BTreeMap<String, usize> {
    g.degrees().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orbit_counter_matches_enumeration(g in arb_graph(14)) {
        prop_assert_eq!(count_orbits(&g), brute_force_orbits(&g, DEFAULT_BRUTE_FORCE_CAP).unwrap());
    }

    #[test]
    fn orbit_sums_match_motif_counts(g in arb_graph(16)) {
        let t = count_orbits(&g);
        let sum = |o: usize| t.values().map(|v| v.get(o)).sum::<u64>();
        let (tri, k4) = motif_counts(&g);
        prop_assert_eq!(sum(0), 2 * g.edge_count() as u64);
        prop_assert_eq!(sum(3), 3 * tri);
        prop_assert_eq!(sum(14), 4 * k4);
    }

    #[test]
    fn er_keeps_nodes_and_edge_count(g in arb_graph(20), seed in any::<u64>()) {
        let cfg = RewireConfig { seed, swap_attempt_factor: 10 };
        let r = er_rewire(&g, &cfg).unwrap();
        prop_assert_eq!(r.edge_count(), g.edge_count());
        prop_assert_eq!(r.node_set(), g.node_set());
        prop_assert!(r.edges().all(|(a, b)| a != b));
        prop_assert_eq!(er_rewire(&g, &cfg).unwrap(), r);
    }

    #[test]
    fn dp_keeps_degree_sequence(g in arb_graph(20), seed in any::<u64>()) {
        prop_assume!(g.edge_count() >= 2);
        let cfg = RewireConfig { seed, swap_attempt_factor: 10 };
        let r = degree_preserving_rewire(&g, &cfg).unwrap();
        prop_assert_eq!(degree_sequence(&r), degree_sequence(&g));
        prop_assert_eq!(r.edge_count(), g.edge_count());
        prop_assert_eq!(degree_preserving_rewire(&g, &cfg).unwrap(), r);
    }

    #[test]
    fn restricted_union_stays_inside_measured(
        a in arb_graph(10),
        b in arb_graph(12),
        keep in proptest::collection::btree_set(0usize..12, 0..12),
    ) {
        let keep: BTreeSet<_> = keep.into_iter().map(|i| sym(&format!("G{i:02}"))).collect();
        let u = restrict_to_genes(&merge_graphs([&a, &b]), &keep);
        prop_assert!(u.nodes().all(|n| keep.contains(n)));
        prop_assert!(u.edges().all(|(x, y)| x != y && u.contains_node(x) && u.contains_node(y)));
        for (x, y) in a.edges().chain(b.edges()) {
            if keep.contains(x) && keep.contains(y) {
                prop_assert!(u.contains_edge(x, y));
            }
        }
    }

    #[test]
    fn split_partitions_each_class(
        sizes in proptest::collection::vec(1usize..15, 1..5),
        frac in 0.1f64..0.9,
        seed in any::<u64>(),
    ) {
        let mut labels = BTreeMap::new();
        for (c, &n) in sizes.iter().enumerate() {
            for i in 0..n {
                labels.insert(format!("c{c}s{i:02}"), format!("class{c}"));
            }
        }
        let s = stratified_split(&labels, frac, seed).unwrap();
        let train: BTreeSet<_> = s.train_ids.iter().collect();
        let test: BTreeSet<_> = s.test_ids.iter().collect();
        prop_assert!(train.is_disjoint(&test));
        prop_assert_eq!(train.len() + test.len(), labels.len());
        for (c, &n) in sizes.iter().enumerate() {
            let class = format!("class{c}");
            let in_train = s.train_ids.iter().filter(|id| labels[*id] == class).count();
            prop_assert!(in_train >= 1);
            if n >= 2 {
                prop_assert!(in_train < n);
            }
        }
        prop_assert_eq!(stratified_split(&labels, frac, seed).unwrap(), s);
    }

    #[test]
    fn class_weights_sum_to_class_count(counts in proptest::collection::vec(1usize..50, 1..6)) {
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
        let w = class_weights(&labels, counts.len()).unwrap();
        let total: f64 = w.weights.iter().sum();
        prop_assert!((total - counts.len() as f64).abs() < 1e-9);
        for (i, wi) in w.weights.iter().enumerate() {
            for (j, wj) in w.weights.iter().enumerate() {
                prop_assert!((wi * counts[i] as f64 - wj * counts[j] as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn vocabulary_indices_are_dense(genes in proptest::collection::btree_set("[A-Z]{2,5}", 0..30)) {
        let v = GeneVocabulary::new(genes.iter().map(|g| sym(g)));
        let idx: BTreeSet<usize> = genes.iter().map(|g| v.index_of(&sym(g))).collect();
        prop_assert_eq!(idx, (1..v.len()).collect::<BTreeSet<_>>());
        prop_assert_eq!(v.index_of(&sym("unknown-gene")), 0);
    }
}
