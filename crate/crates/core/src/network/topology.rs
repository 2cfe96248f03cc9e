//! Hidden-layer connectivity.
//!
//! A topology records, for every hidden node, which input nodes it reads.
//! Three families are provided: fully connected, two-degree (one node per
//! unordered input pair) and grouped (each node reads at most one feature
//! from every feature group).

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::features::{Feature, FEATURE_COUNT};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("input size must be at least {min}, got {got}")]
    InputSize { min: usize, got: usize },
    #[error("hidden size must be at least 1")]
    EmptyHiddenLayer,
    #[error("hidden node {row} reads no input")]
    EmptyRow { row: usize },
    #[error("hidden node {row} reads input {input}, but there are only {input_size} inputs")]
    InputOutOfRange {
        row: usize,
        input: usize,
        input_size: usize,
    },
    #[error("hidden node {row}: {reason}")]
    MaskViolation { row: usize, reason: String },
    #[error("invalid feature grouping: {0}")]
    InvalidGrouping(String),
    #[error("grouped degree {degree} outside 2..={groups}")]
    InvalidDegree { degree: usize, groups: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sigmoid" => Some(Activation::Sigmoid),
            "identity" | "linear" => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TopologyKind {
    /// Every hidden node reads every input.
    Standard,
    /// Every hidden node reads exactly two inputs; rows are distinct.
    TwoDegree,
    /// No hidden node reads two inputs from the same feature group.
    Grouped,
}

impl TopologyKind {
    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Standard => "standard",
            TopologyKind::TwoDegree => "tdn",
            TopologyKind::Grouped => "gn",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "standard" => Some(TopologyKind::Standard),
            "tdn" => Some(TopologyKind::TwoDegree),
            "gn" => Some(TopologyKind::Grouped),
            _ => None,
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureGroup {
    pub name: String,
    pub features: Vec<usize>,
}

/// A partition of the input features into named, disjoint groups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureGrouping {
    input_size: usize,
    groups: Vec<FeatureGroup>,
    group_of: Vec<usize>,
}

impl FeatureGrouping {
    pub fn new(input_size: usize, groups: Vec<FeatureGroup>) -> Result<Self, TopologyError> {
        let invalid = |msg: String| Err(TopologyError::InvalidGrouping(msg));
        if groups.is_empty() {
            return invalid("no groups".into());
        }
        let mut group_of = vec![usize::MAX; input_size];
        let mut names = HashSet::new();
        for (g, group) in groups.iter().enumerate() {
            if group.name.is_empty()
                || group.name.contains(|c: char| c.is_whitespace() || c == ':' || c == ',')
            {
                return invalid(format!("bad group name {:?}", group.name));
            }
            if !names.insert(group.name.as_str()) {
                return invalid(format!("duplicate group name {:?}", group.name));
            }
            if group.features.is_empty() {
                return invalid(format!("group {:?} is empty", group.name));
            }
            for &f in &group.features {
                if f >= input_size {
                    return invalid(format!("feature {f} out of range in {:?}", group.name));
                }
                if group_of[f] != usize::MAX {
                    return invalid(format!("feature {f} appears in two groups"));
                }
                group_of[f] = g;
            }
        }
        if let Some(f) = group_of.iter().position(|&g| g == usize::MAX) {
            return invalid(format!("feature {f} is not in any group"));
        }
        Ok(FeatureGrouping {
            input_size,
            groups,
            group_of,
        })
    }

    /// Five groups over the canonical features: language model, translation
    /// probabilities, lexical probabilities, word count, other counts.
    pub fn standard_five() -> Self {
        let g = |name: &str, fs: &[Feature]| FeatureGroup {
            name: name.to_string(),
            features: fs.iter().map(|f| f.index()).collect(),
        };
        Self::new(
            FEATURE_COUNT,
            vec![
                g("lm", &[Feature::LanguageModel]),
                g("trans-prob", &[Feature::TransFe, Feature::TransEf]),
                g("lex-prob", &[Feature::LexFe, Feature::LexEf]),
                g("wc", &[Feature::WordCount]),
                g(
                    "other-counts",
                    &[
                        Feature::PhraseCount,
                        Feature::RuleCount,
                        Feature::GlueCount,
                        Feature::UnknownCount,
                        Feature::NullCount,
                    ],
                ),
            ],
        )
        .expect("the five-group partition is valid")
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn groups(&self) -> &[FeatureGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group_of(&self, feature: usize) -> usize {
        self.group_of[feature]
    }

    /// `name:i,j name:k ...`, the form used in model files.
    pub fn to_spec(&self) -> String {
        self.groups
            .iter()
            .map(|g| {
                let fs: Vec<String> = g.features.iter().map(usize::to_string).collect();
                format!("{}:{}", g.name, fs.join(","))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn from_spec(input_size: usize, spec: &str) -> Result<Self, TopologyError> {
        let mut groups = Vec::new();
        for item in spec.split_whitespace() {
            let (name, list) = item
                .split_once(':')
                .ok_or_else(|| TopologyError::InvalidGrouping(format!("missing ':' in {item:?}")))?;
            let features = list
                .split(',')
                .map(|f| {
                    f.parse::<usize>().map_err(|_| {
                        TopologyError::InvalidGrouping(format!("bad feature index {f:?}"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            groups.push(FeatureGroup {
                name: name.to_string(),
                features,
            });
        }
        Self::new(input_size, groups)
    }
}

/// Which inputs each hidden node reads, plus the activations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkTopology {
    kind: TopologyKind,
    input_size: usize,
    /// Sorted input indices per hidden node.
    rows: Vec<Vec<usize>>,
    grouping: Option<FeatureGrouping>,
    degrees: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
}

impl NetworkTopology {
    /// Assembles a topology from explicit rows and checks the invariants of
    /// `kind`. Input indices within a row are sorted and deduplicated.
    pub fn from_rows(
        kind: TopologyKind,
        input_size: usize,
        rows: Vec<Vec<usize>>,
        grouping: Option<FeatureGrouping>,
    ) -> Result<Self, TopologyError> {
        if input_size == 0 {
            return Err(TopologyError::InputSize { min: 1, got: 0 });
        }
        if rows.is_empty() {
            return Err(TopologyError::EmptyHiddenLayer);
        }
        let mut clean = Vec::with_capacity(rows.len());
        for (r, mut row) in rows.into_iter().enumerate() {
            row.sort_unstable();
            row.dedup();
            if row.is_empty() {
                return Err(TopologyError::EmptyRow { row: r });
            }
            if let Some(&bad) = row.iter().find(|&&i| i >= input_size) {
                return Err(TopologyError::InputOutOfRange {
                    row: r,
                    input: bad,
                    input_size,
                });
            }
            clean.push(row);
        }
        let violation = |row: usize, reason: &str| {
            Err(TopologyError::MaskViolation {
                row,
                reason: reason.to_string(),
            })
        };
        match kind {
            TopologyKind::Standard => {
                if let Some(r) = clean.iter().position(|row| row.len() != input_size) {
                    return violation(r, "standard topology must be fully connected");
                }
            }
            TopologyKind::TwoDegree => {
                let mut seen = HashSet::new();
                for (r, row) in clean.iter().enumerate() {
                    if row.len() != 2 {
                        return violation(r, "two-degree node must read exactly two inputs");
                    }
                    if !seen.insert(row.clone()) {
                        return violation(r, "duplicate two-degree node");
                    }
                }
            }
            TopologyKind::Grouped => {
                let Some(g) = &grouping else {
                    return Err(TopologyError::InvalidGrouping(
                        "grouped topology needs a grouping".into(),
                    ));
                };
                if g.input_size() != input_size {
                    return Err(TopologyError::InvalidGrouping(format!(
                        "grouping covers {} inputs, topology has {input_size}",
                        g.input_size()
                    )));
                }
                let mut seen = HashSet::new();
                for (r, row) in clean.iter().enumerate() {
                    let mut groups: Vec<usize> = row.iter().map(|&i| g.group_of(i)).collect();
                    groups.sort_unstable();
                    if groups.windows(2).any(|w| w[0] == w[1]) {
                        return violation(r, "two inputs from the same feature group");
                    }
                    if !seen.insert(row.clone()) {
                        return violation(r, "duplicate grouped node");
                    }
                }
            }
        }
        let degrees = if kind == TopologyKind::Grouped {
            let mut d: Vec<usize> = clean.iter().map(Vec::len).collect();
            d.sort_unstable();
            d.dedup();
            d
        } else {
            Vec::new()
        };
        Ok(NetworkTopology {
            kind,
            input_size,
            rows: clean,
            grouping,
            degrees,
            hidden_activation: Activation::Sigmoid,
            output_activation: Activation::Identity,
        })
    }

    pub fn with_hidden_activation(mut self, activation: Activation) -> Self {
        self.hidden_activation = activation;
        self
    }

    pub fn with_output_activation(mut self, activation: Activation) -> Self {
        self.output_activation = activation;
        self
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn row(&self, hidden: usize) -> &[usize] {
        &self.rows[hidden]
    }

    pub fn grouping(&self) -> Option<&FeatureGrouping> {
        self.grouping.as_ref()
    }

    /// Distinct in-degrees of a grouped topology, ascending. Empty otherwise.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn is_connected(&self, hidden: usize, input: usize) -> bool {
        self.rows[hidden].binary_search(&input).is_ok()
    }

    /// Dense `m × k` mask.
    pub fn mask(&self) -> Vec<Vec<bool>> {
        self.rows
            .iter()
            .map(|row| {
                let mut m = vec![false; self.input_size];
                for &i in row {
                    m[i] = true;
                }
                m
            })
            .collect()
    }

    /// Number of hidden weights that are not masked out.
    pub fn hidden_weight_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Free parameters: unmasked hidden weights, hidden biases, output
    /// weights and the output bias.
    pub fn parameter_count(&self) -> usize {
        self.hidden_weight_count() + 2 * self.hidden_size() + 1
    }
}

/// Fully connected `k`-input, `m`-hidden topology.
pub fn build_standard(input_size: usize, hidden_size: usize) -> Result<NetworkTopology, TopologyError> {
    if hidden_size == 0 {
        return Err(TopologyError::EmptyHiddenLayer);
    }
    let rows = vec![(0..input_size).collect(); hidden_size];
    NetworkTopology::from_rows(TopologyKind::Standard, input_size, rows, None)
}

/// One hidden node per unordered input pair, `k(k-1)/2` nodes in
/// lexicographic pair order.
pub fn build_tdn(input_size: usize) -> Result<NetworkTopology, TopologyError> {
    if input_size < 2 {
        return Err(TopologyError::InputSize {
            min: 2,
            got: input_size,
        });
    }
    let mut rows = Vec::with_capacity(input_size * (input_size - 1) / 2);
    for a in 0..input_size {
        for b in a + 1..input_size {
            rows.push(vec![a, b]);
        }
    }
    NetworkTopology::from_rows(TopologyKind::TwoDegree, input_size, rows, None)
}

/// Grouped topology with every cross-group selection of `2..=max_degree`
/// groups, one feature from each.
pub fn build_gn(grouping: &FeatureGrouping, max_degree: usize) -> Result<NetworkTopology, TopologyError> {
    if max_degree < 2 || max_degree > grouping.len() {
        return Err(TopologyError::InvalidDegree {
            degree: max_degree,
            groups: grouping.len(),
        });
    }
    let degrees: Vec<usize> = (2..=max_degree).collect();
    build_gn_with_degrees(grouping, &degrees)
}

/// Degrees used when a grouped network is requested without an explicit
/// maximum: all cross-group pairs plus all full one-per-group tuples.
pub fn default_gn_degrees(grouping: &FeatureGrouping) -> Vec<usize> {
    let mut d = vec![2, grouping.len()];
    d.dedup();
    d
}

/// Grouped topology whose hidden nodes enumerate, for each listed degree
/// `d`, every choice of `d` distinct groups and one feature from each.
/// Rows are ordered by degree, then group combination, then feature choice.
pub fn build_gn_with_degrees(
    grouping: &FeatureGrouping,
    degrees: &[usize],
) -> Result<NetworkTopology, TopologyError> {
    let mut degrees = degrees.to_vec();
    degrees.sort_unstable();
    degrees.dedup();
    if degrees.is_empty() {
        return Err(TopologyError::EmptyHiddenLayer);
    }
    let groups = grouping.len();
    if let Some(&d) = degrees.iter().find(|&&d| d < 2 || d > groups) {
        return Err(TopologyError::InvalidDegree { degree: d, groups });
    }
    let mut rows = Vec::new();
    for &d in &degrees {
        for combo in combinations(groups, d) {
            let members: Vec<&[usize]> = combo
                .iter()
                .map(|&g| grouping.groups()[g].features.as_slice())
                .collect();
            cartesian(&members, &mut Vec::new(), &mut rows);
        }
    }
    NetworkTopology::from_rows(
        TopologyKind::Grouped,
        grouping.input_size(),
        rows,
        Some(grouping.clone()),
    )
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn cartesian(sets: &[&[usize]], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    match sets.split_first() {
        None => out.push(cur.clone()),
        Some((first, rest)) => {
            for &x in *first {
                cur.push(x);
                cartesian(rest, cur, out);
                cur.pop();
            }
        }
    }
}
