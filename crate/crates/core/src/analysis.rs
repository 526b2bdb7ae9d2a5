//! Cluster interpretation: labelled windows, text segmentation, annotation
//! crosstabs with chi-square tests, and typical pairs per cluster.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

use crate::clusterer::ClusterAssignment;
use crate::corpus::{
    encode_pair, extract_sequences, Agent, Category, Corpus, Ground, Part, Tense, Text, VerbCode,
    VerbToken, WindowSource,
};
use crate::som::SomMap;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("no labelled transitions to tabulate")]
    EmptyInput,
    #[error("contingency table is degenerate: {rows} non-empty rows, {cols} non-empty columns")]
    DegenerateTable { rows: usize, cols: usize },
    #[error("unit labels cover {labels} units but the map has {units}")]
    LabelMismatch { labels: usize, units: usize },
}

/// Cluster label of every map unit; `None` for units that received no
/// samples and were left out of clustering.
pub fn unit_labels(hits: &[usize], assignment: &ClusterAssignment) -> Vec<Option<usize>> {
    let mut next = assignment.labels.iter();
    hits.iter()
        .map(|&h| if h > 0 { next.next().copied() } else { None })
        .collect()
}

/// Display name of a cluster label, `none` for unlabelled windows.
pub fn cluster_name(c: Option<usize>) -> String {
    c.map_or_else(|| "none".to_string(), |c| c.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTransition {
    pub source: WindowSource,
    pub decoded: (VerbCode, VerbCode),
    pub unit: usize,
    pub cluster: Option<usize>,
    /// The two verbs of the window, for annotation lookups.
    pub verbs: (VerbToken, VerbToken),
}

/// Labels every window of every sequence with its BMU and the BMU's cluster.
pub fn assign_transitions(
    corpus: &Corpus,
    map: &SomMap,
    labels: &[Option<usize>],
) -> Result<Vec<LabeledTransition>, AnalysisError> {
    if labels.len() != map.units() {
        return Err(AnalysisError::LabelMismatch {
            labels: labels.len(),
            units: map.units(),
        });
    }
    let mut out = Vec::new();
    for seq in extract_sequences(corpus).sequences {
        for w in seq.tokens.windows(2) {
            let decoded = (w[0].code(), w[1].code());
            let (unit, _) = map
                .best_matching_unit(&encode_pair(decoded.0, decoded.1))
                .expect("transition maps have 26 inputs");
            out.push(LabeledTransition {
                source: WindowSource {
                    text_id: seq.text_id.clone(),
                    sent_id: seq.sent_id,
                    start_pos: w[0].pos,
                },
                decoded,
                unit,
                cluster: labels[unit],
                verbs: (w[0].clone(), w[1].clone()),
            });
        }
    }
    Ok(out)
}

/// Share of windows that landed on unlabelled units.
pub fn none_share(transitions: &[LabeledTransition]) -> f64 {
    if transitions.is_empty() {
        return 0.0;
    }
    let none = transitions.iter().filter(|t| t.cluster.is_none()).count();
    none as f64 / transitions.len() as f64
}

/// Maximal run of sentences sharing a dominant cluster. Sentence bounds
/// are `sent_id`s, inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub first_sentence: u32,
    pub last_sentence: u32,
    pub cluster: Option<usize>,
}

/// Majority cluster of each sentence (ties go to the earliest window's
/// cluster), with sentences that have no window inheriting the previous
/// sentence's cluster; adjacent equal sentences are merged.
pub fn segment_text(text: &Text, transitions: &[LabeledTransition]) -> Vec<Span> {
    let mut by_sentence: BTreeMap<u32, Vec<&LabeledTransition>> = BTreeMap::new();
    for t in transitions.iter().filter(|t| t.source.text_id == text.text_id) {
        by_sentence.entry(t.source.sent_id).or_default().push(t);
    }
    let mut spans: Vec<Span> = Vec::new();
    let mut current: Option<usize> = None;
    for s in &text.sentences {
        if let Some(ws) = by_sentence.get_mut(&s.sent_id) {
            ws.sort_by_key(|t| t.source.start_pos);
            current = dominant(ws);
        }
        match spans.last_mut() {
            Some(last) if last.cluster == current => last.last_sentence = s.sent_id,
            _ => spans.push(Span {
                first_sentence: s.sent_id,
                last_sentence: s.sent_id,
                cluster: current,
            }),
        }
    }
    spans
}

fn dominant(windows: &[&LabeledTransition]) -> Option<usize> {
    // (count, first occurrence) per label
    let mut tally: Vec<(Option<usize>, usize, usize)> = Vec::new();
    for (i, w) in windows.iter().enumerate() {
        match tally.iter_mut().find(|e| e.0 == w.cluster) {
            Some(e) => e.1 += 1,
            None => tally.push((w.cluster, 1, i)),
        }
    }
    tally
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
        .and_then(|e| e.0)
}

/// Annotation used as the column variable of a crosstab.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationKey {
    Part,
    Ground,
    Agent,
    Causal,
    Impact,
    Negation,
    Inertia,
    Category,
    Tense,
}

impl AnnotationKey {
    pub const ALL: [AnnotationKey; 9] = [
        Self::Part,
        Self::Ground,
        Self::Agent,
        Self::Causal,
        Self::Impact,
        Self::Negation,
        Self::Inertia,
        Self::Category,
        Self::Tense,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Part => "part",
            Self::Ground => "ground",
            Self::Agent => "agent",
            Self::Causal => "causal",
            Self::Impact => "impact",
            Self::Negation => "negation",
            Self::Inertia => "inertia",
            Self::Category => "category",
            Self::Tense => "tense",
        }
    }

    /// Every possible value, in column order.
    pub fn values(self) -> Vec<&'static str> {
        fn codes<T: Copy>(all: &[T], f: fn(T) -> &'static str) -> Vec<&'static str> {
            all.iter().map(|&v| f(v)).collect()
        }
        match self {
            Self::Part => codes(Part::ALL, Part::code),
            Self::Ground => codes(Ground::ALL, Ground::code),
            Self::Agent => codes(Agent::ALL, Agent::code),
            Self::Category => codes(Category::ALL, Category::code),
            Self::Tense => codes(Tense::ALL, Tense::code),
            Self::Causal | Self::Impact | Self::Negation | Self::Inertia => vec!["0", "1"],
        }
    }

    fn column(self, t: &VerbToken) -> usize {
        match self {
            Self::Part => t.part.index(),
            Self::Ground => t.ground.index(),
            Self::Agent => t.agent.index(),
            Self::Category => t.category.index(),
            Self::Tense => t.tense.index(),
            Self::Causal => usize::from(t.causal),
            Self::Impact => usize::from(t.impact),
            Self::Negation => usize::from(t.negation),
            Self::Inertia => usize::from(t.inertia),
        }
    }
}

impl fmt::Display for AnnotationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnnotationKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown annotation key {s:?}"))
    }
}

/// Which verbs of each window a crosstab counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Both,
    First,
    Second,
}

impl Position {
    pub const ALL: [Position; 3] = [Self::Both, Self::First, Self::Second];

    pub fn name(self) -> &'static str {
        match self {
            Self::Both => "both",
            Self::First => "first",
            Self::Second => "second",
        }
    }
}

/// Clusters × annotation values, counted over verb occurrences.
#[derive(Debug, Clone, PartialEq)]
pub struct Crosstab {
    pub key: AnnotationKey,
    pub position: Position,
    /// Row labels; labelled clusters ascending, then `none` if present.
    pub rows: Vec<Option<usize>>,
    pub columns: Vec<&'static str>,
    pub counts: Vec<Vec<u64>>,
    /// Windows behind each row, the pair-level denominator.
    pub windows: Vec<u64>,
}

impl Crosstab {
    pub fn row_of(&self, cluster: Option<usize>) -> Option<usize> {
        self.rows.iter().position(|&r| r == cluster)
    }

    /// Row percentages over verb occurrences.
    pub fn row_percent(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 })
                    .collect()
            })
            .collect()
    }

    /// Counts as a percentage of the row's windows. With `Position::Both`
    /// a row sums to 200.
    pub fn pair_percent(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .zip(&self.windows)
            .map(|(row, &w)| {
                row.iter()
                    .map(|&c| if w == 0 { 0.0 } else { 100.0 * c as f64 / w as f64 })
                    .collect()
            })
            .collect()
    }

    pub fn as_table(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|r| r.iter().map(|&c| c as f64).collect())
            .collect()
    }

    /// Long-format CSV: one line per (cluster, value) cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cluster,value,count,row_percent,pair_percent\n");
        let rp = self.row_percent();
        let pp = self.pair_percent();
        for (i, r) in self.rows.iter().enumerate() {
            for (j, v) in self.columns.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{:.4},{:.4}\n",
                    cluster_name(*r),
                    v,
                    self.counts[i][j],
                    rp[i][j],
                    pp[i][j]
                ));
            }
        }
        out
    }
}

pub fn crosstab(
    transitions: &[LabeledTransition],
    key: AnnotationKey,
    position: Position,
) -> Result<Crosstab, AnalysisError> {
    if transitions.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let columns = key.values();
    let mut rows: Vec<Option<usize>> = transitions.iter().map(|t| t.cluster).collect();
    // None sorts first for Option; put it last instead.
    rows.sort_by_key(|c| (c.is_none(), *c));
    rows.dedup();
    let mut counts = vec![vec![0u64; columns.len()]; rows.len()];
    let mut windows = vec![0u64; rows.len()];
    for t in transitions {
        let r = rows.iter().position(|&c| c == t.cluster).expect("row exists");
        windows[r] += 1;
        let verbs: &[&VerbToken] = match position {
            Position::Both => &[&t.verbs.0, &t.verbs.1],
            Position::First => &[&t.verbs.0],
            Position::Second => &[&t.verbs.1],
        };
        for v in verbs {
            counts[r][key.column(v)] += 1;
        }
    }
    Ok(Crosstab {
        key,
        position,
        rows,
        columns,
        counts,
        windows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Cells whose expected count is below 5; the chi-square
    /// approximation is doubtful when this is non-zero.
    pub low_expected_cells: usize,
    pub dropped_rows: Vec<usize>,
    pub dropped_columns: Vec<usize>,
}

/// Pearson chi-square test of independence. All-zero rows and columns are
/// dropped (and reported) before testing.
pub fn association_test(table: &[Vec<f64>]) -> Result<AssociationTest, AnalysisError> {
    let n_cols = table.first().map_or(0, Vec::len);
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..n_cols)
        .map(|j| table.iter().map(|r| r[j]).sum())
        .collect();
    let keep_rows: Vec<usize> = (0..table.len()).filter(|&i| row_sums[i] > 0.0).collect();
    let keep_cols: Vec<usize> = (0..n_cols).filter(|&j| col_sums[j] > 0.0).collect();
    if keep_rows.len() < 2 || keep_cols.len() < 2 {
        return Err(AnalysisError::DegenerateTable {
            rows: keep_rows.len(),
            cols: keep_cols.len(),
        });
    }
    let total: f64 = keep_rows.iter().map(|&i| row_sums[i]).sum();
    let mut statistic = 0.0;
    let mut low = 0;
    for &i in &keep_rows {
        for &j in &keep_cols {
            let expected = row_sums[i] * col_sums[j] / total;
            if expected < 5.0 {
                low += 1;
            }
            let d = table[i][j] - expected;
            statistic += d * d / expected;
        }
    }
    let df = (keep_rows.len() - 1) * (keep_cols.len() - 1);
    let p_value = if statistic <= 0.0 {
        1.0
    } else {
        gamma_ur(df as f64 / 2.0, statistic / 2.0)
    };
    Ok(AssociationTest {
        statistic,
        df,
        p_value,
        low_expected_cells: low,
        dropped_rows: (0..table.len()).filter(|i| !keep_rows.contains(i)).collect(),
        dropped_columns: (0..n_cols).filter(|j| !keep_cols.contains(j)).collect(),
    })
}

/// A decoded pattern representative of a cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalPair {
    pub cluster: usize,
    pub first: VerbCode,
    pub second: VerbCode,
    /// Samples on the units that decode to this pattern.
    pub support: usize,
    pub transition_prob: f64,
    pub score: f64,
    /// Units decoding to this pattern, ascending.
    pub units: Vec<usize>,
}

/// Ranks the decoded patterns of each cluster.
///
/// Units of a cluster that decode to the same (category, tense) pair are
/// merged. A pattern scores `share * (1 + p)`, where `share` is its part of
/// the cluster's hits and `p` the largest incoming or outgoing empirical
/// transition probability of any of its units. Patterns with fewer than
/// `min_support` hits are dropped; the best `top_n` per cluster are kept,
/// ties broken by lowest unit index.
pub fn typical_pairs(
    map: &SomMap,
    labels: &[Option<usize>],
    hits: &[usize],
    transitions: &[Vec<f64>],
    min_support: usize,
    top_n: usize,
) -> Vec<TypicalPair> {
    let k = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut cluster_hits = vec![0usize; k];
    for (u, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            cluster_hits[*c] += hits[u];
        }
    }
    let link = |u: usize| -> f64 {
        let out = transitions.get(u).map_or(0.0, |r| r.iter().copied().fold(0.0, f64::max));
        let inc = transitions
            .iter()
            .filter_map(|r| r.get(u).copied())
            .fold(0.0, f64::max);
        out.max(inc)
    };
    let mut out = Vec::new();
    for c in 0..k {
        let mut groups: Vec<TypicalPair> = Vec::new();
        for (u, l) in labels.iter().enumerate() {
            if *l != Some(c) || hits[u] == 0 {
                continue;
            }
            let ((c1, t1), (c2, t2)) = map
                .decode_prototype(u)
                .expect("unit index in range")
                .modal_pair();
            let (first, second) = (VerbCode::new(c1, t1), VerbCode::new(c2, t2));
            let p = link(u);
            match groups.iter_mut().find(|g| g.first == first && g.second == second) {
                Some(g) => {
                    g.support += hits[u];
                    g.transition_prob = g.transition_prob.max(p);
                    g.units.push(u);
                }
                None => groups.push(TypicalPair {
                    cluster: c,
                    first,
                    second,
                    support: hits[u],
                    transition_prob: p,
                    score: 0.0,
                    units: vec![u],
                }),
            }
        }
        for g in &mut groups {
            let share = g.support as f64 / cluster_hits[c] as f64;
            g.score = share * (1.0 + g.transition_prob);
        }
        groups.retain(|g| g.support >= min_support);
        // Groups were created in ascending order of their lowest unit, so a
        // stable sort keeps that order among equal scores.
        groups.sort_by(|a, b| b.score.total_cmp(&a.score));
        out.extend(groups.into_iter().take(top_n));
    }
    out
}
