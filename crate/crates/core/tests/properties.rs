use ddbnirl::bench::metrics::segmentation_agreement;
use ddbnirl::bench::random_mdp::{make_random_mdp, RandomMdpSpec};
use ddbnirl::bench::run_rng;
use ddbnirl::ddcrp::clusters_from_links;
use ddbnirl::likelihood::normalize_q;
use ddbnirl::mdp::{self, argmax_lowest, subgoal_q, value_iteration_traced, Mdp, QTable};
use proptest::prelude::*;

fn q_table() -> impl Strategy<Value = QTable> {
    (1usize..6, 1usize..6).prop_flat_map(|(ns, na)| {
        prop::collection::vec(prop_oneof![Just(0.5), -1e4f64..1e4], ns * na)
            .prop_map(move |v| QTable::new(ns, na, v).unwrap())
    })
}

fn small_mdp() -> impl Strategy<Value = Mdp> {
    (any::<u64>(), 2usize..12, 1usize..4, 0.1f64..0.95).prop_map(|(seed, ns, na, discount)| {
        let spec = RandomMdpSpec { n_states: ns, n_actions: na, concentration: 0.5, n_reward_states: 1, discount };
        make_random_mdp(&spec, &mut run_rng(seed, 0)).unwrap().mdp
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn normalized_rows_span_unit_interval(q in q_table(), eps in 0.01f64..1.0) {
        let n = normalize_q(&q, eps).values;
        for (raw, row) in q.rows().zip(n.rows()) {
            if raw.iter().all(|x| *x == raw[0]) {
                prop_assert!(row.iter().all(|x| *x == eps));
            } else {
                prop_assert_eq!(row.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
                prop_assert_eq!(row.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
            }
        }
    }

    #[test]
    fn normalization_keeps_argmax(q in q_table()) {
        let n = normalize_q(&q, 1.0).values;
        for (raw, row) in q.rows().zip(n.rows()) {
            let best = argmax_lowest(raw);
            prop_assert_eq!(row[best], row.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normalization_ignores_positive_affine_maps(q in q_table(), x in 0.01f64..100.0, y in -50f64..50.0) {
        let moved = QTable::new(q.n_states(), q.n_actions(), q.values().iter().map(|v| x * v + y).collect()).unwrap();
        let (a, b) = (normalize_q(&q, 1.0).values, normalize_q(&moved, 1.0).values);
        for (u, v) in a.values().iter().zip(b.values()) {
            prop_assert!((u - v).abs() < 1e-6, "{} vs {}", u, v);
        }
    }

    #[test]
    fn subgoal_values_scale_with_reward_mass(mdp in small_mdp(), c in 0.1f64..20.0) {
        let goal = mdp.n_states() - 1;
        let unit = subgoal_q(&mdp, goal, 1.0, 1e-10).unwrap();
        let scaled = subgoal_q(&mdp, goal, c, 1e-10).unwrap();
        for (u, s) in unit.values().iter().zip(scaled.values()) {
            prop_assert!((c * u - s).abs() <= 1e-7 * (1.0 + s.abs()));
        }
    }

    #[test]
    fn value_iteration_contracts(mdp in small_mdp(), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = run_rng(seed, 1);
        let reward: Vec<f64> = (0..mdp.n_states()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, _, residuals) = value_iteration_traced(&mdp, &reward, 1e-10, 100_000).unwrap();
        for w in residuals.windows(2) {
            prop_assert!(w[1] <= mdp.discount() * w[0] + 1e-12, "{} after {}", w[1], w[0]);
        }
    }

    #[test]
    fn hitting_times_are_a_quasi_metric(mdp in small_mdp()) {
        let policies: Vec<Vec<usize>> =
            (0..mdp.n_states()).map(|g| mdp::greedy_policy(&subgoal_q(&mdp, g, 1.0, 1e-10).unwrap())).collect();
        let delta = mdp::hitting_time_matrix(&mdp, &policies).unwrap();
        for i in 0..mdp.n_states() {
            prop_assert_eq!(delta.get(i, i), 0.0);
            for j in 0..mdp.n_states() {
                prop_assert!(delta.get(i, j) >= 0.0);
                if i != j {
                    prop_assert!(delta.get(i, j) >= 1.0);
                }
            }
        }
    }

    #[test]
    fn links_induce_a_valid_partition(links in (1usize..30).prop_flat_map(|n| prop::collection::vec(0..n, n))) {
        let (labels, members) = clusters_from_links(&links);
        prop_assert_eq!(labels.len(), links.len());
        for (i, &j) in links.iter().enumerate() {
            prop_assert_eq!(labels[i], labels[j]);
        }
        let mut seen: Vec<usize> = members.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..links.len()).collect::<Vec<_>>());
        for (k, m) in members.iter().enumerate() {
            prop_assert!(m.iter().all(|&i| labels[i] == k));
        }
        // labels are numbered by smallest member
        let firsts: Vec<usize> = members.iter().map(|m| *m.iter().min().unwrap()).collect();
        prop_assert!(firsts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn agreement_ignores_label_names(truth in prop::collection::vec(0usize..4, 1..12), shift in 1usize..9) {
        let renamed: Vec<usize> = truth.iter().map(|t| (t + shift) * 7).collect();
        prop_assert_eq!(segmentation_agreement(&renamed, &truth).unwrap(), 1.0);
    }
}
