//! Shared fixtures for integration tests: the published 21-model candidate
//! table and helpers for building synthetic facade datasets.

// Each test target uses a different subset of these helpers.
#![allow(dead_code)]

use std::collections::BTreeMap;

use facade_bn::cpt::FittedNetwork;
use facade_bn::dag::{parse_model_string, Dag};
use facade_bn::dataset::Dataset;
use facade_bn::inference::forward_sample;
use facade_bn::schema::Schema;

/// (label, BIC score, model string) for the 21 published candidates.
pub const TABLE3: [(&str, f64, &str); 21] = [
    (
        "M1",
        -527.5334019,
        "[MD][PL][T][TR|MD][B|TR][RF|TR][C|RF][DC|B][DO|RF][CE|DO]",
    ),
    (
        "M2",
        -525.1395526,
        "[B][DO][PL][T][DC|B][CE|DC][RF|DC][C|RF][TR|C][MD|TR]",
    ),
    (
        "M3",
        -528.9434423,
        "[C][PL][RF][DO|RF][MD|RF][TR|RF][CE|DO][DC|TR][B|DC][T|B]",
    ),
    (
        "M4",
        -519.0916518,
        "[B][MD][PL][T][DC|B][RF|DC][CE|RF][DO|RF][TR|RF][C|TR]",
    ),
    (
        "M5",
        -521.5010174,
        "[MD][PL][T][TR|MD][B|TR][C|TR][DC|TR][CE|DC][RF|DC][DO|RF]",
    ),
    (
        "M6",
        -521.5731987,
        "[MD][PL][TR|MD][DC|TR][B|DC][C|DC][CE|DC][RF|DC][DO|RF][T|B]",
    ),
    (
        "M7",
        -517.3542449,
        "[B][DO][PL][T][DC|B][C|DC][CE|DC][RF|DC][TR|DC][MD|TR]",
    ),
    (
        "M8",
        -519.8741391,
        "[B][T][DC|B][C|DC][MD|DC][RF|DC][TR|DC][CE|RF][DO|RF][PL|MD]",
    ),
    (
        "M9",
        -523.3763526,
        "[B][PL][DC|B][T|B][C|DC][CE|DC][MD|DC][RF|DC][TR|DC][DO|RF]",
    ),
    (
        "M10",
        -522.0605958,
        "[B][PL][T][C|T][DC|B][RF|DC][CE|RF][DO|RF][TR|RF][MD|TR]",
    ),
    (
        "M11",
        -524.8840612,
        "[C][DO][MD][PL][T][TR|C][B|TR][DC|TR][CE|DC][RF|DC]",
    ),
    (
        "M12",
        -526.1012981,
        "[B][MD][PL][T][TR|MD][C|TR][DC|TR][DO|TR][CE|DC][RF|DC]",
    ),
    (
        "M13",
        -517.126813,
        "[B][C][DO][PL][T][DC|B][CE|DC][RF|DC][TR|RF][MD|TR]",
    ),
    (
        "M14",
        -531.6963744,
        "[PL][T][C|T][TR|C][B|TR][RF|TR][CE|RF][DC|B][DO|RF][MD|DC]",
    ),
    (
        "M15",
        -527.3729879,
        "[B][DC|B][C|DC][MD|DC][RF|DC][TR|DC][CE|RF][DO|RF][T|C][PL|DO]",
    ),
    (
        "M16",
        -530.1548123,
        "[B][DC|B][T|B][PL|DC][RF|DC][DO|RF][TR|RF][C|TR][MD|TR][CE|MD]",
    ),
    (
        "M17",
        -530.3505663,
        "[DC][CE|DC][MD|DC][RF|DC][TR|DC][B|TR][C|TR][DO|RF][PL|MD][T|B]",
    ),
    (
        "M18",
        -527.3428835,
        "[B][DC|B][C|DC][TR|DC][MD|TR][RF|TR][T|C][CE|RF][DO|RF][PL|MD]",
    ),
    (
        "M19",
        -528.3939493,
        "[PL][MD|PL][TR|MD][B|TR][DC|B][T|B][C|DC][CE|DC][RF|DC][DO|RF]",
    ),
    (
        "M20",
        -529.9446029,
        "[MD][TR|MD][B|TR][C|TR][DC|B][PL|B][T|B][RF|DC][CE|RF][DO|RF]",
    ),
    (
        "M21",
        -531.4081897,
        "[B][T][C|T][DC|B][MD|DC][RF|DC][CE|RF][DO|MD][PL|MD][TR|MD]",
    ),
];

pub const M13: &str = "[B][C][DO][PL][T][DC|B][CE|DC][RF|DC][TR|RF][MD|TR]";

/// Ground-truth network on the M13 structure with strongly coupled CPTs:
/// each child mostly copies its parent's level index.
pub fn m13_ground_truth() -> FittedNetwork {
    let schema = Schema::facade();
    let dag = parse_model_string(M13, &schema).unwrap();
    let root = vec![vec![0.5, 0.3, 0.2]];
    let coupled = vec![
        vec![0.8, 0.1, 0.1],
        vec![0.1, 0.8, 0.1],
        vec![0.1, 0.1, 0.8],
    ];
    let mut tables: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for parentless in ["B", "C", "DO", "PL", "T"] {
        tables.insert(parentless.to_string(), root.clone());
    }
    for child in ["DC", "CE", "RF", "TR", "MD"] {
        tables.insert(child.to_string(), coupled.clone());
    }
    FittedNetwork::from_distributions(&dag, &tables, 0).unwrap()
}

/// Synthetic facade dataset sampled from the M13 ground truth.
pub fn m13_dataset(n: usize, seed: u64) -> Dataset {
    forward_sample(&m13_ground_truth(), n, seed, false).unwrap()
}

/// CSV text of an M13-sampled facade dataset.
pub fn m13_csv(n: usize, seed: u64) -> String {
    m13_dataset(n, seed).to_csv()
}

/// Verma-Pearl Markov-equivalence check: identical skeletons and identical
/// v-structures (colliders with non-adjacent parents).
pub fn markov_equivalent(a: &Dag, b: &Dag) -> bool {
    skeleton(a) == skeleton(b) && v_structures(a) == v_structures(b)
}

fn skeleton(dag: &Dag) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = dag.arcs().map(|(u, v)| (u.min(v), u.max(v))).collect();
    edges.sort_unstable();
    edges
}

fn v_structures(dag: &Dag) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for child in 0..dag.node_count() {
        let parents = dag.parent_indices(child);
        for (i, &a) in parents.iter().enumerate() {
            for &b in &parents[i + 1..] {
                let adjacent = dag.has_arc(a, b) || dag.has_arc(b, a);
                if !adjacent {
                    out.push((a.min(b), child, a.max(b)));
                }
            }
        }
    }
    out.sort_unstable();
    out
}
