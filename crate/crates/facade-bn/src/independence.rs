//! Conditional-independence tests on categorical data.
//!
//! Two statistics over the same conditional contingency tables: the
//! likelihood-ratio G² ("mi", because it equals 2·N·MI in nats) and Pearson's
//! X². Degrees of freedom are `(r_x - 1)(r_y - 1) * prod r_z` from schema
//! cardinalities: conditioning strata with no observations contribute 0 to
//! the statistic but the df is not adjusted, matching the convention of the
//! published values this crate reproduces.

use serde::Serialize;

use crate::dag::Dag;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::special::chi2_sf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// Likelihood-ratio / mutual-information statistic G².
    Mi,
    /// Pearson X².
    X2,
}

impl std::fmt::Display for TestKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TestKind::Mi => write!(f, "mi"),
            TestKind::X2 => write!(f, "x2"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CiTestResult {
    pub x_var: String,
    pub y_var: String,
    pub given: Vec<String>,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub kind: TestKind,
}

/// Test X independent of Y given Z on a dataset.
pub fn ci_test(
    data: &Dataset,
    x: &str,
    y: &str,
    given: &[&str],
    kind: TestKind,
) -> Result<CiTestResult> {
    data.require_rows()?;
    let schema = data.schema();
    let xi = schema.require(x)?;
    let yi = schema.require(y)?;
    if xi == yi {
        return Err(Error::DomainError(format!(
            "cannot test {x:?} against itself"
        )));
    }
    let mut zi = Vec::with_capacity(given.len());
    for z in given {
        let i = schema.require(z)?;
        if i == xi || i == yi || zi.contains(&i) {
            return Err(Error::DomainError(format!(
                "conditioning variable {z:?} overlaps the tested pair or repeats"
            )));
        }
        zi.push(i);
    }

    let rx = schema.variable(xi).cardinality();
    let ry = schema.variable(yi).cardinality();
    let z_cards: Vec<usize> = zi
        .iter()
        .map(|&i| schema.variable(i).cardinality())
        .collect();
    let strata: usize = z_cards.iter().product();

    // counts[stratum][x][y], flattened.
    let mut counts = vec![0u64; strata * rx * ry];
    for row in data.index_rows() {
        let mut stratum = 0usize;
        for (&z, &card) in zi.iter().zip(&z_cards) {
            stratum = stratum * card + row[z] as usize;
        }
        counts[(stratum * rx + row[xi] as usize) * ry + row[yi] as usize] += 1;
    }

    let mut statistic = 0.0;
    for s in 0..strata {
        let table = &counts[s * rx * ry..(s + 1) * rx * ry];
        let n_s: u64 = table.iter().sum();
        if n_s == 0 {
            continue;
        }
        let row_sums: Vec<u64> = (0..rx)
            .map(|i| table[i * ry..(i + 1) * ry].iter().sum())
            .collect();
        let col_sums: Vec<u64> = (0..ry)
            .map(|j| (0..rx).map(|i| table[i * ry + j]).sum())
            .collect();
        for i in 0..rx {
            for j in 0..ry {
                let observed = table[i * ry + j] as f64;
                let expected = row_sums[i] as f64 * col_sums[j] as f64 / n_s as f64;
                match kind {
                    TestKind::Mi => {
                        if observed > 0.0 {
                            statistic += 2.0 * observed * (observed / expected).ln();
                        }
                    }
                    TestKind::X2 => {
                        if expected > 0.0 {
                            statistic += (observed - expected).powi(2) / expected;
                        }
                    }
                }
            }
        }
    }

    let df = (rx - 1) * (ry - 1) * strata.max(1);
    let p_value = chi2_sf(statistic, df)?;
    Ok(CiTestResult {
        x_var: x.to_string(),
        y_var: y.to_string(),
        given: given.iter().map(|s| s.to_string()).collect(),
        statistic,
        df,
        p_value,
        kind,
    })
}

pub fn mi_test(data: &Dataset, x: &str, y: &str, given: &[&str]) -> Result<CiTestResult> {
    ci_test(data, x, y, given, TestKind::Mi)
}

pub fn x2_test(data: &Dataset, x: &str, y: &str, given: &[&str]) -> Result<CiTestResult> {
    ci_test(data, x, y, given, TestKind::X2)
}

#[derive(Debug, Clone, Serialize)]
pub struct ArcStrength {
    pub from: String,
    pub to: String,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArcStrengthReport {
    pub criterion: TestKind,
    pub entries: Vec<ArcStrength>,
}

/// For every arc u -> v, the p-value of testing u independent of v given
/// v's other parents. Large p = the arc adds little beyond the rest.
pub fn arc_strength(dag: &Dag, data: &Dataset, criterion: TestKind) -> Result<ArcStrengthReport> {
    let schema = dag.schema();
    let mut entries = Vec::with_capacity(dag.arc_count());
    for (from, to) in dag.arcs() {
        let from_name = schema.variable(from).name();
        let to_name = schema.variable(to).name();
        let other_parents: Vec<&str> = dag
            .parent_indices(to)
            .iter()
            .filter(|&&p| p != from)
            .map(|&p| schema.variable(p).name())
            .collect();
        let result = ci_test(data, from_name, to_name, &other_parents, criterion)?;
        entries.push(ArcStrength {
            from: from_name.to_string(),
            to: to_name.to_string(),
            p_value: result.p_value,
        });
    }
    Ok(ArcStrengthReport { criterion, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::testutil::{sample_uniform_dataset, toy_schema};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn df_rule_matches_published_shape() {
        // Two 3-level variables given one 3-level conditioner: df = 2*2*3.
        let data = sample_uniform_dataset(&["X", "Y", "Z"], &[3, 3, 3], 50, 1);
        let result = mi_test(&data, "X", "Y", &["Z"]).unwrap();
        assert_eq!(result.df, 12);
        let result = x2_test(&data, "X", "Y", &["Z"]).unwrap();
        assert_eq!(result.df, 12);
    }

    #[test]
    fn exactly_balanced_table_gives_zero_statistic() {
        let schema = toy_schema(&["X", "Y"], &[3, 3]);
        let mut rows = Vec::new();
        for x in 0..3u8 {
            for y in 0..3u8 {
                for _ in 0..7 {
                    rows.push(vec![x, y]);
                }
            }
        }
        let data = Dataset::from_index_rows(schema, rows);
        let result = mi_test(&data, "X", "Y", &[]).unwrap();
        assert_eq!(result.statistic, 0.0);
        assert_eq!(result.p_value, 1.0);
    }

    #[test]
    fn pearson_hand_value_diagonal_table() {
        // {{10, 0}, {0, 10}}: all E = 5, X2 = 4 * 25/5 = 20, df = 1.
        let schema = toy_schema(&["X", "Y"], &[2, 2]);
        let mut rows = Vec::new();
        for _ in 0..10 {
            rows.push(vec![0, 0]);
            rows.push(vec![1, 1]);
        }
        let data = Dataset::from_index_rows(schema, rows);
        let result = x2_test(&data, "X", "Y", &[]).unwrap();
        assert_eq!(result.statistic, 20.0);
        assert_eq!(result.df, 1);
    }

    #[test]
    fn g2_hand_value_2x2() {
        // {{3,1},{1,3}}: E = 2 everywhere, G2 = 12 ln 1.5 - 4 ln 2.
        let schema = toy_schema(&["X", "Y"], &[2, 2]);
        let mut rows = Vec::new();
        for _ in 0..3 {
            rows.push(vec![0, 0]);
            rows.push(vec![1, 1]);
        }
        rows.push(vec![0, 1]);
        rows.push(vec![1, 0]);
        let data = Dataset::from_index_rows(schema, rows);
        let result = mi_test(&data, "X", "Y", &[]).unwrap();
        let expected = 12.0 * 1.5f64.ln() - 4.0 * 2.0f64.ln();
        assert!((result.statistic - expected).abs() <= 1e-12);
    }

    #[test]
    fn empty_strata_keep_full_df() {
        // Z = v2 never occurs, statistic accumulates over 2 strata but df
        // still counts all 3.
        let schema = toy_schema(&["X", "Y", "Z"], &[3, 3, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<u8>> = (0..60)
            .map(|_| {
                vec![
                    rng.gen_range(0..3),
                    rng.gen_range(0..3),
                    rng.gen_range(0..2),
                ]
            })
            .collect();
        let data = Dataset::from_index_rows(schema, rows);
        let result = mi_test(&data, "X", "Y", &["Z"]).unwrap();
        assert_eq!(result.df, 12);
    }

    #[test]
    fn statistic_symmetry_in_arguments() {
        let data = sample_uniform_dataset(&["X", "Y", "Z"], &[3, 3, 3], 120, 8);
        let a = mi_test(&data, "X", "Y", &["Z"]).unwrap();
        let b = mi_test(&data, "Y", "X", &["Z"]).unwrap();
        assert!((a.statistic - b.statistic).abs() <= 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        let data = sample_uniform_dataset(&["X", "Y", "Z"], &[2, 2, 2], 10, 0);
        assert!(mi_test(&data, "X", "X", &[]).is_err());
        assert!(mi_test(&data, "X", "Y", &["X"]).is_err());
        assert!(mi_test(&data, "X", "Y", &["Z", "Z"]).is_err());
        assert!(mi_test(&data, "X", "W", &[]).is_err());
    }

    #[test]
    fn mi_and_x2_agree_asymptotically_on_dependent_data() {
        // Y copies X 10% of the time, otherwise uniform. Under a mild
        // dependence the two statistics converge to nearby values; at
        // n = 100000 they should be within 5% of each other.
        let schema = toy_schema(&["X", "Y"], &[3, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let rows: Vec<Vec<u8>> = (0..100_000)
            .map(|_| {
                let x = rng.gen_range(0..3u8);
                let y = if rng.gen::<f64>() < 0.1 {
                    x
                } else {
                    rng.gen_range(0..3u8)
                };
                vec![x, y]
            })
            .collect();
        let data = Dataset::from_index_rows(schema, rows);
        let mi = mi_test(&data, "X", "Y", &[]).unwrap().statistic;
        let x2 = x2_test(&data, "X", "Y", &[]).unwrap().statistic;
        assert!((mi - x2).abs() / x2 < 0.05, "mi = {mi}, x2 = {x2}");
    }

    #[test]
    fn rejection_rate_calibrated_under_null() {
        // Independent uniform 3x3 at n = 500: rejection rate at alpha = 0.05
        // should be 0.05 +/- 0.02 over 500 simulations.
        for kind in [TestKind::Mi, TestKind::X2] {
            let mut rejections = 0usize;
            let trials = 500usize;
            for seed in 0..trials {
                let data = sample_uniform_dataset(&["X", "Y"], &[3, 3], 500, seed as u64);
                let result = ci_test(&data, "X", "Y", &[], kind).unwrap();
                if result.p_value < 0.05 {
                    rejections += 1;
                }
            }
            let rate = rejections as f64 / trials as f64;
            assert!(
                (rate - 0.05).abs() <= 0.02,
                "{kind} rejection rate {rate} outside 0.05 +/- 0.02"
            );
        }
    }

    #[test]
    fn arc_strength_unconditional_when_single_parent() {
        let data = sample_uniform_dataset(&["X", "Y"], &[3, 3], 90, 21);
        let dag = Dag::empty(data.schema().clone())
            .with_arc("X", "Y")
            .unwrap();
        let report = arc_strength(&dag, &data, TestKind::X2).unwrap();
        assert_eq!(report.entries.len(), 1);
        let direct = x2_test(&data, "X", "Y", &[]).unwrap();
        assert_eq!(report.entries[0].p_value, direct.p_value);
    }

    #[test]
    fn arc_strength_conditions_on_other_parents() {
        let data = sample_uniform_dataset(&["X", "Y", "Z"], &[3, 3, 3], 90, 22);
        let dag = Dag::empty(data.schema().clone())
            .with_arc("X", "Y")
            .unwrap()
            .with_arc("Z", "Y")
            .unwrap();
        let report = arc_strength(&dag, &data, TestKind::Mi).unwrap();
        let entry = report.entries.iter().find(|e| e.from == "X").unwrap();
        let direct = mi_test(&data, "X", "Y", &["Z"]).unwrap();
        assert_eq!(entry.p_value, direct.p_value);
    }
}
