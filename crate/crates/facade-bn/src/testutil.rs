//! Shared helpers for unit tests. Compiled only for `cfg(test)`.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::schema::Schema;

/// A facade-schema dataset with independent uniform columns.
pub(crate) fn sample_facade_dataset(n: usize, seed: u64) -> Dataset {
    let schema = Schema::facade();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<u8>> = (0..n)
        .map(|_| (0..schema.len()).map(|_| rng.gen_range(0..3u8)).collect())
        .collect();
    Dataset::from_index_rows(schema, rows)
}

/// A small schema of `names.len()` variables with the given cardinalities and
/// level codes `v0, v1, ...`, filled with independent uniform draws.
pub(crate) fn sample_uniform_dataset(
    names: &[&str],
    cards: &[usize],
    n: usize,
    seed: u64,
) -> Dataset {
    let schema = toy_schema(names, cards);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<u8>> = (0..n)
        .map(|_| cards.iter().map(|&c| rng.gen_range(0..c as u8)).collect())
        .collect();
    Dataset::from_index_rows(schema, rows)
}

pub(crate) fn toy_schema(names: &[&str], cards: &[usize]) -> Schema {
    use crate::schema::VariableSpec;
    assert_eq!(names.len(), cards.len());
    Schema::new(
        names
            .iter()
            .zip(cards)
            .map(|(name, &card)| {
                let levels: Vec<String> = (0..card).map(|i| format!("v{i}")).collect();
                VariableSpec::new(*name, levels).unwrap()
            })
            .collect(),
    )
    .unwrap()
}
