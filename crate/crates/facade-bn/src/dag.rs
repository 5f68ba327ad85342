//! Directed acyclic graphs over schema variables.
//!
//! A [`Dag`] always covers exactly the variables of its schema; arcs point
//! parent -> child. Values are immutable: [`Dag::with_arc`] returns a new
//! graph and acyclicity is checked on every construction path, so a cyclic
//! `Dag` is unrepresentable.
//!
//! The text encoding is the bracketed model-string grammar
//! `('[' node ('|' parent (':' parent)*)? ']')+` with no whitespace.
//! Serialization is canonical (topological order with alphabetical
//! tie-breaking, parents sorted alphabetically), so the contract is semantic
//! round-tripping of the arc set, not byte equality with arbitrary input.

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::schema::Schema;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    schema: Arc<Schema>,
    /// parents[child] = sorted parent indices.
    parents: Vec<Vec<usize>>,
}

impl Dag {
    /// Graph over the schema with no arcs.
    pub fn empty(schema: Schema) -> Dag {
        let n = schema.len();
        Dag {
            schema: Arc::new(schema),
            parents: vec![Vec::new(); n],
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn node_count(&self) -> usize {
        self.parents.len()
    }

    pub fn arc_count(&self) -> usize {
        self.parents.iter().map(|p| p.len()).sum()
    }

    /// Arcs as (parent, child) index pairs, ordered by child then parent.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(child, ps)| ps.iter().map(move |&p| (p, child)))
    }

    /// Arcs as (parent, child) name pairs.
    pub fn arc_names(&self) -> Vec<(String, String)> {
        self.arcs()
            .map(|(p, c)| {
                (
                    self.schema.variable(p).name().to_string(),
                    self.schema.variable(c).name().to_string(),
                )
            })
            .collect()
    }

    pub fn has_arc(&self, from: usize, to: usize) -> bool {
        self.parents[to].binary_search(&from).is_ok()
    }

    pub fn parent_indices(&self, child: usize) -> &[usize] {
        &self.parents[child]
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.parents[node].len()
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.parents
            .iter()
            .filter(|ps| ps.binary_search(&node).is_ok())
            .count()
    }

    /// New graph with the arc `from -> to` added. The receiver is unchanged.
    pub fn with_arc(&self, from: &str, to: &str) -> Result<Dag> {
        let f = self.schema.require(from)?;
        let t = self.schema.require(to)?;
        if f == t {
            return Err(Error::CycleDetected(format!("self-arc {from} -> {to}")));
        }
        if self.has_arc(f, t) {
            return Err(Error::DuplicateArc {
                from: from.to_string(),
                to: to.to_string(),
            });
        }
        if self.reaches(t, f) {
            return Err(Error::CycleDetected(format!(
                "adding {from} -> {to} closes a cycle"
            )));
        }
        let mut next = self.clone();
        let pos = next.parents[t].binary_search(&f).unwrap_err();
        next.parents[t].insert(pos, f);
        Ok(next)
    }

    /// Is there a directed path from `src` to `dst`?
    fn reaches(&self, src: usize, dst: usize) -> bool {
        let mut seen = vec![false; self.parents.len()];
        let mut stack = vec![src];
        while let Some(u) = stack.pop() {
            if u == dst {
                return true;
            }
            if seen[u] {
                continue;
            }
            seen[u] = true;
            for (child, ps) in self.parents.iter().enumerate() {
                if ps.binary_search(&u).is_ok() && !seen[child] {
                    stack.push(child);
                }
            }
        }
        false
    }

    /// Canonical topological order: Kahn's algorithm, breaking ties by
    /// variable name.
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.parents.len();
        let mut remaining_parents: Vec<usize> = self.parents.iter().map(|p| p.len()).collect();
        let mut emitted = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for _ in 0..n {
            let next = (0..n)
                .filter(|&i| !emitted[i] && remaining_parents[i] == 0)
                .min_by(|&a, &b| {
                    self.schema
                        .variable(a)
                        .name()
                        .cmp(self.schema.variable(b).name())
                })
                .expect("acyclic graph always has a source");
            emitted[next] = true;
            order.push(next);
            for (child, ps) in self.parents.iter().enumerate() {
                if ps.binary_search(&next).is_ok() {
                    remaining_parents[child] -= 1;
                }
            }
        }
        order
    }

    /// Canonical model string.
    pub fn to_model_string(&self) -> String {
        let mut out = String::new();
        for node in self.topological_order() {
            out.push('[');
            out.push_str(self.schema.variable(node).name());
            if !self.parents[node].is_empty() {
                out.push('|');
                let mut names: Vec<&str> = self.parents[node]
                    .iter()
                    .map(|&p| self.schema.variable(p).name())
                    .collect();
                names.sort_unstable();
                out.push_str(&names.join(":"));
            }
            out.push(']');
        }
        out
    }

    /// Internal constructor from parent lists known to be acyclic.
    fn from_parent_lists(schema: Arc<Schema>, parents: Vec<Vec<usize>>) -> Dag {
        debug_assert!(parents.iter().all(|ps| ps.windows(2).all(|w| w[0] < w[1])));
        Dag { schema, parents }
    }
}

/// Parse a model string against a schema (strict token match).
pub fn parse_model_string(text: &str, schema: &Schema) -> Result<Dag> {
    parse_with_alias(text, schema, None)
}

/// Parse accepting the documented alias `MOD` for `MD`, for sources that use
/// the alternate token.
pub fn parse_model_string_lenient(text: &str, schema: &Schema) -> Result<Dag> {
    parse_with_alias(text, schema, Some(("MOD", "MD")))
}

fn parse_with_alias(text: &str, schema: &Schema, alias: Option<(&str, &str)>) -> Result<Dag> {
    let resolve = |token: &str| -> Result<usize> {
        let token = match alias {
            Some((from, to)) if token == from && schema.index_of(from).is_none() => to,
            _ => token,
        };
        schema.require(token)
    };

    let mut parents: Vec<Option<Vec<usize>>> = vec![None; schema.len()];
    let mut rest = text;
    if rest.is_empty() {
        return Err(Error::MalformedModelString("empty string".into()));
    }
    while !rest.is_empty() {
        if !rest.starts_with('[') {
            return Err(Error::MalformedModelString(format!(
                "expected '[' at {rest:?}"
            )));
        }
        let end = rest
            .find(']')
            .ok_or_else(|| Error::MalformedModelString(format!("unclosed block in {text:?}")))?;
        let block = &rest[1..end];
        rest = &rest[end + 1..];

        let (node_token, parent_part) = match block.split_once('|') {
            Some((n, p)) => (n, Some(p)),
            None => (block, None),
        };
        if node_token.is_empty() {
            return Err(Error::MalformedModelString("empty node name".into()));
        }
        let node = resolve(node_token)?;
        if parents[node].is_some() {
            return Err(Error::MalformedModelString(format!(
                "node {node_token:?} appears more than once"
            )));
        }
        let mut ps = Vec::new();
        if let Some(parent_part) = parent_part {
            if parent_part.is_empty() {
                return Err(Error::MalformedModelString(format!(
                    "empty parent list for {node_token:?}"
                )));
            }
            for parent_token in parent_part.split(':') {
                if parent_token.is_empty() {
                    return Err(Error::MalformedModelString(format!(
                        "empty parent name for {node_token:?}"
                    )));
                }
                let p = resolve(parent_token)?;
                if p == node {
                    return Err(Error::CycleDetected(format!(
                        "self-arc {node_token} -> {node_token}"
                    )));
                }
                if ps.contains(&p) {
                    return Err(Error::DuplicateArc {
                        from: parent_token.to_string(),
                        to: node_token.to_string(),
                    });
                }
                ps.push(p);
            }
        }
        ps.sort_unstable();
        parents[node] = Some(ps);
    }

    for (i, p) in parents.iter().enumerate() {
        if p.is_none() {
            return Err(Error::MalformedModelString(format!(
                "node {:?} is absent from the model string",
                schema.variable(i).name()
            )));
        }
    }
    let parents: Vec<Vec<usize>> = parents.into_iter().map(Option::unwrap).collect();

    // One global acyclicity pass (Kahn). Blocks may reference later nodes, so
    // this cannot be checked incrementally during the scan.
    let n = parents.len();
    let mut remaining: Vec<usize> = parents.iter().map(|p| p.len()).collect();
    let mut emitted = 0usize;
    let mut queue: Vec<usize> = (0..n).filter(|&i| remaining[i] == 0).collect();
    while let Some(u) = queue.pop() {
        emitted += 1;
        for (child, ps) in parents.iter().enumerate() {
            if ps.contains(&u) {
                remaining[child] -= 1;
                if remaining[child] == 0 {
                    queue.push(child);
                }
            }
        }
    }
    if emitted != n {
        return Err(Error::CycleDetected(format!(
            "model string {text:?} induces a cycle"
        )));
    }

    Ok(Dag::from_parent_lists(Arc::new(schema.clone()), parents))
}

/// Screening constraints on candidate structures: the sink variable must
/// receive arcs and emit none, and the graph needs a minimum number of
/// arcs overall.
#[derive(Debug, Clone, PartialEq)]
pub struct DagConstraints {
    pub sink_variable: String,
    pub min_arcs: usize,
    pub min_sink_in_degree: usize,
    pub forbid_sink_out_arcs: bool,
}

impl Default for DagConstraints {
    fn default() -> Self {
        DagConstraints {
            sink_variable: "CE".to_string(),
            min_arcs: 5,
            min_sink_in_degree: 1,
            forbid_sink_out_arcs: true,
        }
    }
}

/// A named constraint failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintViolation {
    SinkNotInSchema {
        sink: String,
    },
    SinkHasTooFewParents {
        sink: String,
        have: usize,
        need: usize,
    },
    SinkEmitsArc {
        sink: String,
        to: String,
    },
    TooFewArcs {
        have: usize,
        need: usize,
    },
}

impl std::fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstraintViolation::SinkNotInSchema { sink } => {
                write!(f, "sink variable {sink:?} is not in the schema")
            }
            ConstraintViolation::SinkHasTooFewParents { sink, have, need } => {
                write!(f, "sink {sink} has in-degree {have}, needs at least {need}")
            }
            ConstraintViolation::SinkEmitsArc { sink, to } => {
                write!(f, "sink emits arc {sink} -> {to}")
            }
            ConstraintViolation::TooFewArcs { have, need } => {
                write!(f, "graph has {have} arcs, needs at least {need}")
            }
        }
    }
}

/// Check a DAG against constraints; the empty list means all hold.
pub fn check_constraints(dag: &Dag, constraints: &DagConstraints) -> Vec<ConstraintViolation> {
    let mut violations = Vec::new();
    let sink = &constraints.sink_variable;
    match dag.schema().index_of(sink) {
        None => violations.push(ConstraintViolation::SinkNotInSchema { sink: sink.clone() }),
        Some(s) => {
            let have = dag.in_degree(s);
            if have < constraints.min_sink_in_degree {
                violations.push(ConstraintViolation::SinkHasTooFewParents {
                    sink: sink.clone(),
                    have,
                    need: constraints.min_sink_in_degree,
                });
            }
            if constraints.forbid_sink_out_arcs {
                for (from, to) in dag.arcs() {
                    if from == s {
                        violations.push(ConstraintViolation::SinkEmitsArc {
                            sink: sink.clone(),
                            to: dag.schema().variable(to).name().to_string(),
                        });
                    }
                }
            }
        }
    }
    let have = dag.arc_count();
    if have < constraints.min_arcs {
        violations.push(ConstraintViolation::TooFewArcs {
            have,
            need: constraints.min_arcs,
        });
    }
    violations
}

/// Knobs for the random generator.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomDagConfig {
    /// Probability of including each forward arc of the sampled order.
    pub arc_probability: f64,
    /// Rejection-resampling budget before giving up.
    pub max_tries: usize,
}

impl Default for RandomDagConfig {
    fn default() -> Self {
        RandomDagConfig {
            arc_probability: 0.25,
            max_tries: 10_000,
        }
    }
}

/// Draw a random DAG satisfying `constraints`, deterministically for a fixed
/// seed.
///
/// Algorithm: sample a uniformly random permutation of the nodes as the
/// topological order, include each forward arc independently with
/// `arc_probability`, then reject and resample until the constraints hold.
pub fn random_dag(
    schema: &Schema,
    constraints: &DagConstraints,
    config: &RandomDagConfig,
    seed: u64,
) -> Result<Dag> {
    let n = schema.len();
    let max_arcs = n * (n - 1) / 2;
    if constraints.min_arcs > max_arcs {
        return Err(Error::GenerationExhausted {
            tries: 0,
            reason: format!(
                "min_arcs {} exceeds the {} possible arcs on {} nodes",
                constraints.min_arcs, max_arcs, n
            ),
        });
    }
    schema
        .index_of(&constraints.sink_variable)
        .ok_or_else(|| Error::UnknownVariable(constraints.sink_variable.clone()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema_arc = Arc::new(schema.clone());
    for _ in 0..config.max_tries {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < config.arc_probability {
                    parents[order[j]].push(order[i]);
                }
            }
        }
        for ps in &mut parents {
            ps.sort_unstable();
        }
        let dag = Dag::from_parent_lists(schema_arc.clone(), parents);
        if check_constraints(&dag, constraints).is_empty() {
            return Ok(dag);
        }
    }
    Err(Error::GenerationExhausted {
        tries: config.max_tries,
        reason: "no constraint-satisfying draw within the retry budget".into(),
    })
}

/// The hand-specified starting model on the facade schema: decoration styles
/// feed DC, the surface elements feed MD, and the two feeling variables feed
/// CE.
pub fn initial_facade_model() -> Dag {
    let dag = Dag::empty(Schema::facade());
    [
        ("B", "DC"),
        ("T", "DC"),
        ("C", "DC"),
        ("RF", "MD"),
        ("PL", "MD"),
        ("DO", "MD"),
        ("DC", "TR"),
        ("DC", "MD"),
        ("TR", "CE"),
        ("MD", "CE"),
    ]
    .iter()
    .fold(dag, |d, (from, to)| {
        d.with_arc(from, to).expect("static model is acyclic")
    })
}
