//! Corpus data model, CSV format, verb encoding and sliding-window sampling.
//!
//! A corpus is a list of texts, each a list of sentences, each a list of
//! annotated verb tokens. Every verb is reduced to a (category, tense) pair
//! and encoded as a 13-slot two-hot vector; a transition between two
//! successive verbs of one sentence is the 26-slot concatenation of two such
//! vectors.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact header line of the corpus CSV format.
pub const HEADER: &str =
    "text_id,sent_id,pos,lemma,category,tense,part,ground,agent,causal,impact,negation,inertia";

const HEADER_FIELDS: [&str; 13] = [
    "text_id", "sent_id", "pos", "lemma", "category", "tense", "part", "ground", "agent", "causal",
    "impact", "negation", "inertia",
];

/// Number of slots in one verb encoding.
pub const VERB_DIM: usize = 13;
/// Number of slots in one transition encoding.
pub const PAIR_DIM: usize = 2 * VERB_DIM;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("format error: {0}")]
    Format(String),
    #[error("line {line}: invalid value {value:?} for field `{field}`")]
    Value {
        line: u64,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: duplicate token (text {text_id}, sentence {sent_id}, pos {pos})")]
    Duplicate {
        line: u64,
        text_id: String,
        sent_id: u32,
        pos: u32,
    },
    #[error("text {text_id}, sentence {sent_id}: positions are not contiguous from 0 (found {found:?})")]
    NonContiguous {
        text_id: String,
        sent_id: u32,
        found: Vec<u32>,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

macro_rules! code_enum {
    ($(#[$meta:meta])* $name:ident, $field:literal { $($variant:ident => $code:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $code)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn code(self) -> &'static str {
                match self {
                    $($name::$variant => $code),+
                }
            }

            pub fn index(self) -> usize {
                self as usize
            }

            pub const FIELD: &'static str = $field;
        }

        impl FromStr for $name {
            type Err = ();

            fn from_str(s: &str) -> Result<Self, ()> {
                match s {
                    $($code => Ok($name::$variant),)+
                    _ => Err(()),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.code())
            }
        }
    };
}

code_enum!(
    /// Lexical aspectual category of a verb.
    Category, "category" {
        State => "sta",
        Activity => "act",
        Accomplishment => "acc",
        Achievement => "ach",
    }
);

code_enum!(
    /// Grammatical tense or verb form.
    Tense, "tense" {
        Imparfait => "IM",
        Present => "PR",
        PasseCompose => "PC",
        PasseSimple => "PS",
        PlusQueParfait => "PQP",
        Infinitive => "inf",
        PresentParticiple => "ppr",
        PastParticiple => "pp",
        PasseSurcompose => "pps",
    }
);

code_enum!(
    /// Narrative part of the text: circumstances, accident, comments.
    Part, "part" {
        Circumstance => "1",
        Accident => "2",
        Comment => "3",
    }
);

code_enum!(
    Ground, "ground" {
        Fore => "fore",
        Back => "back",
        None => "none",
    }
);

code_enum!(
    Agent, "agent" {
        A => "A",
        B => "B",
        C => "C",
        None => "none",
    }
);

/// The (category, tense) abstraction of a verb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VerbCode {
    pub category: Category,
    pub tense: Tense,
}

impl VerbCode {
    pub const COUNT: usize = 36;

    pub fn new(category: Category, tense: Tense) -> Self {
        Self { category, tense }
    }

    /// Dense index in `0..36`, category-major.
    pub fn index(self) -> usize {
        self.category.index() * Tense::ALL.len() + self.tense.index()
    }

    pub fn from_index(i: usize) -> Self {
        Self {
            category: Category::ALL[i / Tense::ALL.len()],
            tense: Tense::ALL[i % Tense::ALL.len()],
        }
    }

    pub fn all() -> impl Iterator<Item = VerbCode> {
        (0..Self::COUNT).map(Self::from_index)
    }
}

impl fmt::Display for VerbCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.category, self.tense)
    }
}

/// One annotated verb occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbToken {
    pub text_id: String,
    pub sent_id: u32,
    pub pos: u32,
    pub lemma: Option<String>,
    pub category: Category,
    pub tense: Tense,
    pub part: Part,
    pub ground: Ground,
    pub agent: Agent,
    pub causal: bool,
    pub impact: bool,
    pub negation: bool,
    pub inertia: bool,
}

impl VerbToken {
    pub fn code(&self) -> VerbCode {
        VerbCode::new(self.category, self.tense)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub sent_id: u32,
    /// Ordered by `pos`, which runs contiguously from 0.
    pub tokens: Vec<VerbToken>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Text {
    pub text_id: String,
    pub sentences: Vec<Sentence>,
}

/// Validated corpus. Texts and sentences keep their order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub texts: Vec<Text>,
}

impl Corpus {
    pub fn tokens(&self) -> impl Iterator<Item = &VerbToken> {
        self.texts
            .iter()
            .flat_map(|t| t.sentences.iter())
            .flat_map(|s| s.tokens.iter())
    }

    pub fn token_count(&self) -> usize {
        self.tokens().count()
    }

    pub fn sentence_count(&self) -> usize {
        self.texts.iter().map(|t| t.sentences.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    /// Groups already-ordered tokens into texts and sentences and checks the
    /// positional invariants.
    pub fn from_tokens(tokens: Vec<VerbToken>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (i, t) in tokens.iter().enumerate() {
            if !seen.insert((t.text_id.clone(), t.sent_id, t.pos)) {
                return Err(CorpusError::Duplicate {
                    line: i as u64 + 2,
                    text_id: t.text_id.clone(),
                    sent_id: t.sent_id,
                    pos: t.pos,
                });
            }
        }
        let corpus = group(tokens);
        check_contiguous(&corpus)?;
        Ok(corpus)
    }
}

fn group(tokens: Vec<VerbToken>) -> Corpus {
    let mut texts: Vec<Text> = Vec::new();
    let mut text_index: HashMap<String, usize> = HashMap::new();
    let mut sent_index: HashMap<(usize, u32), usize> = HashMap::new();
    for token in tokens {
        let ti = *text_index.entry(token.text_id.clone()).or_insert_with(|| {
            texts.push(Text {
                text_id: token.text_id.clone(),
                sentences: Vec::new(),
            });
            texts.len() - 1
        });
        let text = &mut texts[ti];
        let si = *sent_index.entry((ti, token.sent_id)).or_insert_with(|| {
            text.sentences.push(Sentence {
                sent_id: token.sent_id,
                tokens: Vec::new(),
            });
            text.sentences.len() - 1
        });
        text.sentences[si].tokens.push(token);
    }
    for sentence in texts.iter_mut().flat_map(|t| t.sentences.iter_mut()) {
        sentence.tokens.sort_by_key(|t| t.pos);
    }
    Corpus { texts }
}

fn check_contiguous(corpus: &Corpus) -> Result<(), CorpusError> {
    for text in &corpus.texts {
        for s in &text.sentences {
            if s.tokens.iter().enumerate().any(|(i, t)| t.pos as usize != i) {
                return Err(CorpusError::NonContiguous {
                    text_id: text.text_id.clone(),
                    sent_id: s.sent_id,
                    found: s.tokens.iter().map(|t| t.pos).collect(),
                });
            }
        }
    }
    Ok(())
}

fn field<T: FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    line: u64,
    name: &'static str,
) -> Result<T, CorpusError> {
    let raw = record.get(idx).unwrap_or("");
    raw.parse::<T>().map_err(|_| CorpusError::Value {
        line,
        field: name,
        value: raw.to_string(),
    })
}

fn flag(record: &csv::StringRecord, idx: usize, line: u64, name: &'static str) -> Result<bool, CorpusError> {
    match record.get(idx).unwrap_or("") {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(CorpusError::Value {
            line,
            field: name,
            value: other.to_string(),
        }),
    }
}

fn parse_record(record: &csv::StringRecord, line: u64) -> Result<VerbToken, CorpusError> {
    if record.len() != HEADER_FIELDS.len() {
        return Err(CorpusError::Format(format!(
            "line {line}: expected {} fields, found {}",
            HEADER_FIELDS.len(),
            record.len()
        )));
    }
    let text_id = record[0].to_string();
    if text_id.is_empty() {
        return Err(CorpusError::Value {
            line,
            field: "text_id",
            value: text_id,
        });
    }
    let lemma = match &record[3] {
        "" => None,
        s => Some(s.to_string()),
    };
    Ok(VerbToken {
        text_id,
        sent_id: field(record, 1, line, "sent_id")?,
        pos: field(record, 2, line, "pos")?,
        lemma,
        category: field(record, 4, line, Category::FIELD)?,
        tense: field(record, 5, line, Tense::FIELD)?,
        part: field(record, 6, line, Part::FIELD)?,
        ground: field(record, 7, line, Ground::FIELD)?,
        agent: field(record, 8, line, Agent::FIELD)?,
        causal: flag(record, 9, line, "causal")?,
        impact: flag(record, 10, line, "impact")?,
        negation: flag(record, 11, line, "negation")?,
        inertia: flag(record, 12, line, "inertia")?,
    })
}

/// Reads every row, collecting all violations instead of stopping at the
/// first. Returns the corpus only when there are none.
pub fn validate_corpus<R: Read>(source: R) -> (Option<Corpus>, Vec<CorpusError>) {
    let mut text = String::new();
    let mut source = source;
    if let Err(e) = source.read_to_string(&mut text) {
        return (None, vec![CorpusError::Io(e)]);
    }
    let mut lines = text.lines();
    match lines.find(|l| !l.starts_with('#')) {
        Some(h) if h.trim_end_matches('\r') == HEADER => {}
        Some(h) => {
            return (
                None,
                vec![CorpusError::Format(format!("bad header {h:?}, expected {HEADER:?}"))],
            )
        }
        None => return (None, vec![CorpusError::Format("missing header".into())]),
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut errors = Vec::new();
    let mut tokens = Vec::new();
    let mut seen = HashSet::new();
    for result in reader.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                errors.push(CorpusError::Format(e.to_string()));
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        match parse_record(&record, line) {
            Ok(token) => {
                if !seen.insert((token.text_id.clone(), token.sent_id, token.pos)) {
                    errors.push(CorpusError::Duplicate {
                        line,
                        text_id: token.text_id,
                        sent_id: token.sent_id,
                        pos: token.pos,
                    });
                } else {
                    tokens.push(token);
                }
            }
            Err(e) => errors.push(e),
        }
    }
    let corpus = group(tokens);
    if let Err(e) = check_contiguous(&corpus) {
        errors.push(e);
    }
    if errors.is_empty() {
        (Some(corpus), errors)
    } else {
        (None, errors)
    }
}

/// Parses and validates a corpus CSV stream, failing on the first violation.
pub fn parse_corpus<R: Read>(source: R) -> Result<Corpus, CorpusError> {
    let (corpus, mut errors) = validate_corpus(source);
    match corpus {
        Some(c) => Ok(c),
        None => Err(errors.remove(0)),
    }
}

/// Writes the corpus in canonical CSV form (header, then tokens in corpus order).
pub fn write_corpus<W: Write>(corpus: &Corpus, out: W) -> Result<(), CorpusError> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer
        .write_record(HEADER_FIELDS)
        .map_err(|e| CorpusError::Format(e.to_string()))?;
    let b = |v: bool| if v { "1" } else { "0" };
    for t in corpus.tokens() {
        let sent = t.sent_id.to_string();
        let pos = t.pos.to_string();
        writer
            .write_record([
                t.text_id.as_str(),
                &sent,
                &pos,
                t.lemma.as_deref().unwrap_or(""),
                t.category.code(),
                t.tense.code(),
                t.part.code(),
                t.ground.code(),
                t.agent.code(),
                b(t.causal),
                b(t.impact),
                b(t.negation),
                b(t.inertia),
            ])
            .map_err(|e| CorpusError::Format(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// A sentence with at least two verbs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbSequence {
    pub text_id: String,
    pub sent_id: u32,
    pub tokens: Vec<VerbToken>,
}

impl VerbSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sequences {
    pub sequences: Vec<VerbSequence>,
    /// Sentences dropped for having fewer than two verbs.
    pub dropped: usize,
}

/// Splits the corpus into per-sentence verb sequences. Sentences are hard
/// boundaries; single-verb sentences are dropped and counted.
pub fn extract_sequences(corpus: &Corpus) -> Sequences {
    let mut out = Sequences::default();
    for text in &corpus.texts {
        for s in &text.sentences {
            if s.tokens.len() >= 2 {
                out.sequences.push(VerbSequence {
                    text_id: text.text_id.clone(),
                    sent_id: s.sent_id,
                    tokens: s.tokens.clone(),
                });
            } else {
                out.dropped += 1;
            }
        }
    }
    out
}

/// Two-hot encoding: category in slots 0..4, tense in slots 4..13.
pub fn encode_code(code: VerbCode) -> [f64; VERB_DIM] {
    let mut v = [0.0; VERB_DIM];
    v[code.category.index()] = 1.0;
    v[4 + code.tense.index()] = 1.0;
    v
}

pub fn encode_verb(token: &VerbToken) -> [f64; VERB_DIM] {
    encode_code(token.code())
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Inverse of [`encode_code`]; for non-binary vectors picks the heaviest
/// slot of each block (lowest index on ties).
pub fn decode_verb(block: &[f64]) -> VerbCode {
    assert_eq!(block.len(), VERB_DIM, "verb block must have {VERB_DIM} slots");
    VerbCode::new(
        Category::ALL[argmax(&block[..4])],
        Tense::ALL[argmax(&block[4..])],
    )
}

pub fn encode_pair(first: VerbCode, second: VerbCode) -> Vec<f64> {
    let mut v = Vec::with_capacity(PAIR_DIM);
    v.extend_from_slice(&encode_code(first));
    v.extend_from_slice(&encode_code(second));
    v
}

pub fn decode_pair(vector: &[f64]) -> (VerbCode, VerbCode) {
    assert_eq!(vector.len(), PAIR_DIM, "pair vector must have {PAIR_DIM} slots");
    (decode_verb(&vector[..VERB_DIM]), decode_verb(&vector[VERB_DIM..]))
}

/// Location of a window: the position of its first verb.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowSource {
    pub text_id: String,
    pub sent_id: u32,
    pub start_pos: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSample {
    pub vector: Vec<f64>,
    pub source: WindowSource,
    pub decoded: (VerbCode, VerbCode),
}

/// Stride-1, width-2 windows over one sequence, each emitted `replication`
/// times.
pub fn window_transitions(sequence: &VerbSequence, replication: usize) -> Vec<TransitionSample> {
    let mut out = Vec::with_capacity(sequence.len().saturating_sub(1) * replication);
    for w in sequence.tokens.windows(2) {
        let decoded = (w[0].code(), w[1].code());
        let sample = TransitionSample {
            vector: encode_pair(decoded.0, decoded.1),
            source: WindowSource {
                text_id: sequence.text_id.clone(),
                sent_id: sequence.sent_id,
                start_pos: w[0].pos,
            },
            decoded,
        };
        for _ in 0..replication {
            out.push(sample.clone());
        }
    }
    out
}

/// All windows of all sequences, in corpus order.
pub fn corpus_transitions(sequences: &[VerbSequence], replication: usize) -> Vec<TransitionSample> {
    sequences
        .iter()
        .flat_map(|s| window_transitions(s, replication))
        .collect()
}

/// Token counts behind the marginal and tense-by-category tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distributions {
    pub total: usize,
    pub by_category: [usize; 4],
    pub by_tense: [usize; 9],
    /// `[category][tense]` counts.
    pub cross: [[usize; 9]; 4],
}

fn pct(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

impl Distributions {
    pub fn category_percent(&self) -> [f64; 4] {
        self.by_category.map(|n| pct(n, self.total))
    }

    pub fn tense_percent(&self) -> [f64; 9] {
        self.by_tense.map(|n| pct(n, self.total))
    }

    /// Row-normalized tense distribution per category. Rows of categories
    /// with no tokens are all zero.
    pub fn tense_by_category_percent(&self) -> [[f64; 9]; 4] {
        let mut out = [[0.0; 9]; 4];
        for (c, row) in self.cross.iter().enumerate() {
            for (t, &n) in row.iter().enumerate() {
                out[c][t] = pct(n, self.by_category[c]);
            }
        }
        out
    }

    /// Plain-text rendering used by the `stats` command.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("tokens\t{}\n\n", self.total));
        s.push_str("category\tcount\tpercent\n");
        let cp = self.category_percent();
        for c in Category::ALL {
            s.push_str(&format!("{}\t{}\t{:.2}\n", c, self.by_category[c.index()], cp[c.index()]));
        }
        s.push_str("\ntense\tcount\tpercent\n");
        let tp = self.tense_percent();
        for t in Tense::ALL {
            s.push_str(&format!("{}\t{}\t{:.2}\n", t, self.by_tense[t.index()], tp[t.index()]));
        }
        s.push_str("\ntense_by_category");
        for t in Tense::ALL {
            s.push_str(&format!("\t{t}"));
        }
        s.push('\n');
        let rows = self.tense_by_category_percent();
        for c in Category::ALL {
            s.push_str(c.code());
            for v in rows[c.index()] {
                s.push_str(&format!("\t{v:.2}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn tabulate_distributions(corpus: &Corpus) -> Result<Distributions, CorpusError> {
    let mut d = Distributions {
        total: 0,
        by_category: [0; 4],
        by_tense: [0; 9],
        cross: [[0; 9]; 4],
    };
    for t in corpus.tokens() {
        d.total += 1;
        d.by_category[t.category.index()] += 1;
        d.by_tense[t.tense.index()] += 1;
        d.cross[t.category.index()][t.tense.index()] += 1;
    }
    if d.total == 0 {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(d)
}
