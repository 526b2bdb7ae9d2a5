//! End-to-end training and reporting, and the artifact files they exchange.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    assign_transitions, association_test, cluster_name, crosstab, none_share, segment_text,
    typical_pairs, unit_labels, AnalysisError, AnnotationKey, AssociationTest, Crosstab,
    LabeledTransition, Position, Span, TypicalPair,
};
use crate::clusterer::{cluster_prototypes, davies_bouldin, distance_matrix, select_k, ClusterError};
use crate::config::{ConfigError, RunConfig};
use crate::corpus::{corpus_transitions, extract_sequences, Corpus, CorpusError};
use crate::markov::{baum_welch, bmu_sequences, empirical_transitions, HmmFit, MarkovError};
use crate::som::{train_som, SomError, SomMap};
use crate::synth::SynthError;

pub const CONFIG_FILE: &str = "config.txt";
pub const SOM_FILE: &str = "som.json";
pub const CLUSTERING_FILE: &str = "clustering.json";
pub const HMM_FILE: &str = "hmm.json";
pub const TRANSITIONS_FILE: &str = "transitions.json";
pub const ASSOCIATIONS_FILE: &str = "associations.json";
pub const TYPICAL_PAIRS_FILE: &str = "typical_pairs.json";
pub const SEGMENTATION_FILE: &str = "segmentation.json";
pub const REPORT_FILE: &str = "report.txt";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Som(#[from] SomError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("corpus has no sentence with two or more verbs")]
    NoTransitions,
    #[error("only {units} map units received samples; need at least {needed} to cluster")]
    TooFewUnits { units: usize, needed: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Artifact {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl PipelineError {
    /// 2 for input/output failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. }
            | Self::Corpus(CorpusError::Io(_))
            | Self::Config(ConfigError::Io(_))
            | Self::Synth(SynthError::Io(_)) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), PipelineError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact types serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Artifact {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_corpus(path: &Path) -> Result<Corpus, PipelineError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    Ok(crate::corpus::parse_corpus(file)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScoreRecord {
    pub k: usize,
    /// `null` when centroids coincide (infinite score).
    pub db_score: Option<f64>,
}

/// Clustering of the map units as persisted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringRecord {
    pub k: usize,
    /// Cluster per map unit; `null` for units without hits.
    pub labels: Vec<Option<usize>>,
    /// Medoid map unit per cluster.
    pub medoids: Vec<usize>,
    pub db_score: Option<f64>,
    /// Every candidate `k` when the count was selected, empty when fixed.
    pub per_k_scores: Vec<KScoreRecord>,
    /// Training samples per map unit.
    pub hits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub m: usize,
    pub alpha: f64,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainArtifacts {
    pub map: SomMap,
    pub clustering: ClusteringRecord,
    pub hmm: HmmFit,
    pub transitions: TransitionRecord,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Encode, window, train the map, cluster its prototypes, then fit the
/// Markov layer over the BMU sequences.
pub fn train(config: &RunConfig, corpus: &Corpus) -> Result<TrainArtifacts, PipelineError> {
    config.validate()?;
    let sequences = extract_sequences(corpus).sequences;
    let samples: Vec<Vec<f64>> = corpus_transitions(&sequences, config.replication)
        .into_iter()
        .map(|s| s.vector)
        .collect();
    if samples.is_empty() {
        return Err(PipelineError::NoTransitions);
    }
    let map = train_som(&samples, &config.som())?;
    let hits = map.hit_histogram(&samples)?;
    let occupied: Vec<usize> = (0..map.units()).filter(|&u| hits[u] > 0).collect();
    let vectors: Vec<Vec<f64>> = occupied.iter().map(|&u| map.prototypes[u].clone()).collect();

    let (assignment, db_score, per_k_scores) = match config.k {
        Some(k) => {
            if k > vectors.len() {
                return Err(PipelineError::TooFewUnits {
                    units: vectors.len(),
                    needed: k,
                });
            }
            let assignment = cluster_prototypes(&distance_matrix(&vectors)?, k)?;
            let db = match davies_bouldin(&vectors, &assignment.labels, k) {
                Ok(q) => finite(q.db_score),
                Err(_) => None,
            };
            (assignment, db, Vec::new())
        }
        None => {
            let needed = config.k_min + 1;
            if vectors.len() < needed {
                return Err(PipelineError::TooFewUnits {
                    units: vectors.len(),
                    needed,
                });
            }
            let k_max = config.k_max.min(vectors.len() - 1);
            let selection = select_k(&vectors, config.k_min, k_max)?;
            let per_k = selection
                .scores
                .iter()
                .map(|s| KScoreRecord {
                    k: s.k,
                    db_score: finite(s.quality.db_score),
                })
                .collect();
            let best = selection.best();
            (best.assignment.clone(), finite(best.quality.db_score), per_k)
        }
    };
    let clustering = ClusteringRecord {
        k: assignment.k,
        labels: unit_labels(&hits, &assignment),
        medoids: assignment.medoids.iter().map(|&i| occupied[i]).collect(),
        db_score,
        per_k_scores,
        hits,
    };

    let symbols = bmu_sequences(&sequences, &map);
    let m = map.units();
    let matrix = empirical_transitions(&symbols, m, config.alpha)?;
    let hmm = baum_welch(
        &symbols,
        config.hmm_states,
        m,
        config.seed,
        config.hmm_max_iter,
        config.hmm_tol,
    )?;
    Ok(TrainArtifacts {
        map,
        clustering,
        hmm,
        transitions: TransitionRecord {
            m,
            alpha: config.alpha,
            matrix,
        },
    })
}

impl TrainArtifacts {
    /// Writes every artifact plus the configuration that produced them.
    pub fn write(&self, dir: &Path, config: &RunConfig) -> Result<(), PipelineError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_file(&dir.join(CONFIG_FILE), config.to_string().as_bytes())?;
        write_json(&dir.join(SOM_FILE), &self.map)?;
        write_json(&dir.join(CLUSTERING_FILE), &self.clustering)?;
        write_json(&dir.join(HMM_FILE), &self.hmm)?;
        write_json(&dir.join(TRANSITIONS_FILE), &self.transitions)
    }

    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        Ok(Self {
            map: read_json(&dir.join(SOM_FILE))?,
            clustering: read_json(&dir.join(CLUSTERING_FILE))?,
            hmm: read_json(&dir.join(HMM_FILE))?,
            transitions: read_json(&dir.join(TRANSITIONS_FILE))?,
        })
    }

    pub fn label(&self, corpus: &Corpus) -> Result<Vec<LabeledTransition>, PipelineError> {
        Ok(assign_transitions(corpus, &self.map, &self.clustering.labels)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextSegmentation {
    pub text_id: String,
    pub spans: Vec<Span>,
}

pub fn segment_corpus(corpus: &Corpus, transitions: &[LabeledTransition]) -> Vec<TextSegmentation> {
    let mut by_text: BTreeMap<&str, Vec<LabeledTransition>> = BTreeMap::new();
    for t in transitions {
        by_text.entry(t.source.text_id.as_str()).or_default().push(t.clone());
    }
    corpus
        .texts
        .iter()
        .map(|text| TextSegmentation {
            text_id: text.text_id.clone(),
            spans: segment_text(text, by_text.get(text.text_id.as_str()).map_or(&[], Vec::as_slice)),
        })
        .collect()
}

/// Outcome of the independence test of one crosstab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRecord {
    pub key: AnnotationKey,
    pub position: Position,
    /// Whether windows on unlabelled units were left out of the test.
    pub excludes_none: bool,
    #[serde(flatten)]
    pub test: Option<AssociationTest>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub windows: usize,
    pub none_share: f64,
    pub crosstabs: Vec<Crosstab>,
    pub associations: Vec<AssociationRecord>,
    pub typical_pairs: Vec<TypicalPair>,
    pub segmentation: Vec<TextSegmentation>,
}

/// Crosstabs for every annotation and position, their chi-square tests,
/// typical pairs and the segmentation of every text.
pub fn report(
    config: &RunConfig,
    artifacts: &TrainArtifacts,
    corpus: &Corpus,
) -> Result<Report, PipelineError> {
    let transitions = artifacts.label(corpus)?;
    let mut crosstabs = Vec::new();
    let mut associations = Vec::new();
    for key in AnnotationKey::ALL {
        for position in Position::ALL {
            let ct = crosstab(&transitions, key, position)?;
            let table: Vec<Vec<f64>> = ct
                .rows
                .iter()
                .zip(ct.as_table())
                .filter(|(r, _)| r.is_some())
                .map(|(_, row)| row)
                .collect();
            let (test, error) = match association_test(&table) {
                Ok(t) => (Some(t), None),
                Err(e) => (None, Some(e.to_string())),
            };
            associations.push(AssociationRecord {
                key,
                position,
                excludes_none: ct.rows.contains(&None),
                test,
                error,
            });
            crosstabs.push(ct);
        }
    }
    let pairs = typical_pairs(
        &artifacts.map,
        &artifacts.clustering.labels,
        &artifacts.clustering.hits,
        &artifacts.transitions.matrix,
        config.min_support,
        config.top_n,
    );
    Ok(Report {
        windows: transitions.len(),
        none_share: none_share(&transitions),
        crosstabs,
        associations,
        typical_pairs: pairs,
        segmentation: segment_corpus(corpus, &transitions),
    })
}

pub fn crosstab_file_name(key: AnnotationKey, position: Position) -> String {
    format!("crosstab_{}_{}.csv", key.name(), position.name())
}

impl Report {
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for ct in &self.crosstabs {
            write_file(&dir.join(crosstab_file_name(ct.key, ct.position)), ct.to_csv().as_bytes())?;
        }
        write_json(&dir.join(ASSOCIATIONS_FILE), &self.associations)?;
        write_json(&dir.join(TYPICAL_PAIRS_FILE), &self.typical_pairs)?;
        write_json(&dir.join(SEGMENTATION_FILE), &self.segmentation)?;
        write_file(&dir.join(REPORT_FILE), self.render().as_bytes())
    }

    /// Plain-text summary: row percentages over both verbs of each window,
    /// test results, and typical pairs.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "windows\t{}", self.windows);
        let _ = writeln!(s, "none_share\t{:.4}", self.none_share);
        for (ct, a) in self.crosstabs.iter().zip(&self.associations) {
            if ct.position != Position::Both {
                continue;
            }
            let _ = writeln!(s, "\n{}", ct.key);
            let _ = writeln!(s, "cluster\twindows\t{}", ct.columns.join("\t"));
            for ((r, pct), w) in ct.rows.iter().zip(ct.row_percent()).zip(&ct.windows) {
                let cells: Vec<String> = pct.iter().map(|p| format!("{p:.2}")).collect();
                let _ = writeln!(s, "{}\t{}\t{}", cluster_name(*r), w, cells.join("\t"));
            }
            match (&a.test, &a.error) {
                (Some(t), _) => {
                    let _ = writeln!(
                        s,
                        "chi2\t{:.4}\tdf\t{}\tp\t{:.3e}\tlow_expected\t{}",
                        t.statistic, t.df, t.p_value, t.low_expected_cells
                    );
                }
                (None, Some(e)) => {
                    let _ = writeln!(s, "chi2\tnot computed: {e}");
                }
                (None, None) => {}
            }
        }
        let _ = writeln!(s, "\ntypical pairs");
        let _ = writeln!(s, "cluster\tfirst\tsecond\tsupport\ttransition_prob\tscore");
        for p in &self.typical_pairs {
            let _ = writeln!(
                s,
                "{}\t{} {}\t{} {}\t{}\t{:.4}\t{:.4}",
                p.cluster,
                p.first.category,
                p.first.tense,
                p.second.category,
                p.second.tense,
                p.support,
                p.transition_prob,
                p.score
            );
        }
        s
    }
}

pub fn render_segmentation(segmentation: &[TextSegmentation]) -> String {
    let mut s = String::new();
    for t in segmentation {
        let spans: Vec<String> = t
            .spans
            .iter()
            .map(|sp| format!("{}-{}:{}", sp.first_sentence, sp.last_sentence, cluster_name(sp.cluster)))
            .collect();
        let _ = writeln!(s, "{}\t{}", t.text_id, spans.join(" "));
    }
    s
}

pub fn write_segmentation(dir: &Path, segmentation: &[TextSegmentation]) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(&dir.join(SEGMENTATION_FILE), &segmentation)
}
