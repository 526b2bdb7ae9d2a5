//! Synthetic corpora with planted narrative structure.
//!
//! A text is a circumstance part, an accident part and, with some
//! probability, a comment part. Each sentence is generated by one regime: a
//! first-verb distribution, a next-verb distribution (optionally conditioned
//! on the previous verb) and a set of annotation probabilities. Every regime
//! distribution is the mixture `delta * core + (1 - delta) * spread`, so
//! `delta = 1` collapses a regime onto its core patterns.

use std::io::Write;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    Agent, Category, Corpus, Ground, Part, Sentence, Tense, Text, VerbCode, VerbToken,
};
use crate::rng::{indexed_substream, Rng, SYNTH_STREAM};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeWeight {
    pub category: Category,
    pub tense: Tense,
    pub weight: f64,
}

/// Sparse distribution over (category, tense) codes, mixed as
/// `delta * core + (1 - delta) * spread`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeDist {
    pub core: Vec<CodeWeight>,
    pub spread: Vec<CodeWeight>,
}

impl CodeDist {
    /// Dense mixed distribution over the 36 codes.
    pub fn dense(&self, delta: f64) -> [f64; VerbCode::COUNT] {
        let mut p = [0.0; VerbCode::COUNT];
        for w in &self.core {
            p[VerbCode::new(w.category, w.tense).index()] += delta * w.weight;
        }
        for w in &self.spread {
            p[VerbCode::new(w.category, w.tense).index()] += (1.0 - delta) * w.weight;
        }
        p
    }

    fn validate(&self, what: &str) -> Result<(), SynthError> {
        for (name, part) in [("core", &self.core), ("spread", &self.spread)] {
            check_weights(part.iter().map(|w| w.weight), &format!("{what}.{name}"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalNext {
    pub given: VerbCode,
    pub next: CodeDist,
}

/// Per-token annotation probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSpec {
    /// Probability of each part label 1, 2, 3.
    pub part: [f64; 3],
    /// fore, back, none
    pub ground: [f64; 3],
    /// A, B, C, none
    pub agent: [f64; 4],
    pub causal: f64,
    pub impact: f64,
    pub negation: f64,
    pub inertia: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub name: String,
    pub first: CodeDist,
    pub next: CodeDist,
    /// Overrides of `next` for particular previous verbs.
    #[serde(default)]
    pub next_given: Vec<ConditionalNext>,
    pub annotations: AnnotationSpec,
}

impl Regime {
    fn next_for(&self, prev: VerbCode) -> &CodeDist {
        self.next_given
            .iter()
            .find(|c| c.given == prev)
            .map_or(&self.next, |c| &c.next)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    /// Distribution of the number of sentences, as (count, probability).
    pub sentences: Vec<(usize, f64)>,
    /// Distribution of the number of verbs per sentence.
    pub verbs: Vec<(usize, f64)>,
    /// Regime of the part's first sentence, when it differs from `regime`.
    #[serde(default)]
    pub opening_regime: Option<usize>,
    pub regime: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub delta: f64,
    pub regimes: Vec<Regime>,
    /// Circumstance, accident and comment parts, in text order.
    pub parts: [PartSpec; 3],
    /// Probability that a text has a comment part.
    pub comment_probability: f64,
}

fn check_weights(ws: impl Iterator<Item = f64>, what: &str) -> Result<(), SynthError> {
    let mut total = 0.0;
    for w in ws {
        if !(w.is_finite() && w >= 0.0) {
            return Err(SynthError::InvalidSpec(format!("{what}: negative or non-finite weight")));
        }
        total += w;
    }
    if (total - 1.0).abs() > SUM_TOL {
        return Err(SynthError::InvalidSpec(format!("{what}: weights sum to {total}, not 1")));
    }
    Ok(())
}

fn check_prob(p: f64, what: &str) -> Result<(), SynthError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SynthError::InvalidSpec(format!("{what}: probability {p} outside [0, 1]")))
    }
}

impl RegimeSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        check_prob(self.delta, "delta")?;
        check_prob(self.comment_probability, "comment_probability")?;
        for r in &self.regimes {
            r.first.validate(&format!("{}.first", r.name))?;
            r.next.validate(&format!("{}.next", r.name))?;
            for c in &r.next_given {
                c.next.validate(&format!("{}.next_given[{}]", r.name, c.given))?;
            }
            let a = &r.annotations;
            check_weights(a.part.iter().copied(), &format!("{}.part", r.name))?;
            check_weights(a.ground.iter().copied(), &format!("{}.ground", r.name))?;
            check_weights(a.agent.iter().copied(), &format!("{}.agent", r.name))?;
            for (p, what) in [
                (a.causal, "causal"),
                (a.impact, "impact"),
                (a.negation, "negation"),
                (a.inertia, "inertia"),
            ] {
                check_prob(p, &format!("{}.{what}", r.name))?;
            }
        }
        for (i, p) in self.parts.iter().enumerate() {
            let what = format!("parts[{i}]");
            check_weights(p.sentences.iter().map(|x| x.1), &format!("{what}.sentences"))?;
            check_weights(p.verbs.iter().map(|x| x.1), &format!("{what}.verbs"))?;
            if p.sentences.iter().any(|x| x.0 == 0 && x.1 > 0.0) {
                return Err(SynthError::InvalidSpec(format!("{what}: parts must have a sentence")));
            }
            if p.verbs.iter().any(|x| x.0 == 0 && x.1 > 0.0) {
                return Err(SynthError::InvalidSpec(format!("{what}: sentences must have a verb")));
            }
            for r in std::iter::once(p.regime).chain(p.opening_regime) {
                if r >= self.regimes.len() {
                    return Err(SynthError::InvalidSpec(format!("{what}: unknown regime {r}")));
                }
            }
        }
        Ok(())
    }

    /// Expected share of each (category, tense) code among generated tokens.
    pub fn implied_code_marginal(&self) -> [f64; VerbCode::COUNT] {
        let mut mass = [0.0; VerbCode::COUNT];
        for (i, part) in self.parts.iter().enumerate() {
            let weight = if i == 2 { self.comment_probability } else { 1.0 };
            let expected_sentences: f64 = part.sentences.iter().map(|(n, p)| *n as f64 * p).sum();
            let mut per_regime = vec![0.0; self.regimes.len()];
            match part.opening_regime {
                Some(o) => {
                    per_regime[o] += 1.0;
                    per_regime[part.regime] += expected_sentences - 1.0;
                }
                None => per_regime[part.regime] += expected_sentences,
            }
            for (r, n) in per_regime.iter().enumerate() {
                if *n == 0.0 {
                    continue;
                }
                let tokens = self.expected_sentence_tokens(r, &part.verbs);
                for (m, t) in mass.iter_mut().zip(tokens) {
                    *m += weight * n * t;
                }
            }
        }
        let total: f64 = mass.iter().sum();
        mass.map(|m| m / total)
    }

    /// Expected count of each code in one sentence of regime `r`.
    fn expected_sentence_tokens(&self, r: usize, verbs: &[(usize, f64)]) -> [f64; VerbCode::COUNT] {
        let regime = &self.regimes[r];
        let max_len = verbs.iter().map(|v| v.0).max().unwrap_or(0);
        let mut out = [0.0; VerbCode::COUNT];
        let mut dist = regime.first.dense(self.delta);
        for t in 0..max_len {
            let reach: f64 = verbs.iter().filter(|v| v.0 > t).map(|v| v.1).sum();
            for (o, d) in out.iter_mut().zip(dist) {
                *o += reach * d;
            }
            let mut next = [0.0; VerbCode::COUNT];
            for (prev, &p) in dist.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let cond = regime.next_for(VerbCode::from_index(prev)).dense(self.delta);
                for (n, c) in next.iter_mut().zip(cond) {
                    *n += p * c;
                }
            }
            dist = next;
        }
        out
    }

    pub fn implied_category_marginal(&self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, p) in self.implied_code_marginal().iter().enumerate() {
            out[VerbCode::from_index(i).category.index()] += p;
        }
        out
    }

    pub fn implied_tense_marginal(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for (i, p) in self.implied_code_marginal().iter().enumerate() {
            out[VerbCode::from_index(i).tense.index()] += p;
        }
        out
    }
}

/// Structural truth behind a generated corpus; never used for training.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub texts: Vec<TextTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextTruth {
    pub text_id: String,
    /// True part of each sentence, in order.
    pub sentence_parts: Vec<Part>,
    /// Generating regime of each sentence, in order.
    pub sentence_regimes: Vec<usize>,
    /// One entry per window: (sent_id, window_start_pos, regime).
    pub windows: Vec<(u32, u32, usize)>,
}

impl TextTruth {
    /// Sentence indices at which a new part starts.
    pub fn part_boundaries(&self) -> Vec<usize> {
        (1..self.sentence_parts.len())
            .filter(|&i| self.sentence_parts[i] != self.sentence_parts[i - 1])
            .collect()
    }
}

impl GroundTruth {
    /// Sidecar CSV: `text_id,sent_id,window_start_pos,true_regime`.
    pub fn write_sidecar<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "text_id,sent_id,window_start_pos,true_regime")?;
        for t in &self.texts {
            for (s, p, r) in &t.windows {
                writeln!(out, "{},{},{},{}", t.text_id, s, p, r)?;
            }
        }
        Ok(())
    }
}

fn draw_index(rng: &mut Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn draw_count(rng: &mut Rng, dist: &[(usize, f64)]) -> usize {
    let weights: Vec<f64> = dist.iter().map(|d| d.1).collect();
    dist[draw_index(rng, &weights)].0
}

fn draw_code(rng: &mut Rng, dist: &CodeDist, delta: f64) -> VerbCode {
    VerbCode::from_index(draw_index(rng, &dist.dense(delta)))
}

fn lemma_for(code: VerbCode) -> String {
    format!("{}_{}", code.category, code.tense)
}

fn annotate(rng: &mut Rng, a: &AnnotationSpec) -> (Part, Ground, Agent, bool, bool, bool, bool) {
    (
        Part::ALL[draw_index(rng, &a.part)],
        Ground::ALL[draw_index(rng, &a.ground)],
        Agent::ALL[draw_index(rng, &a.agent)],
        rng.gen::<f64>() < a.causal,
        rng.gen::<f64>() < a.impact,
        rng.gen::<f64>() < a.negation,
        rng.gen::<f64>() < a.inertia,
    )
}

/// Generates `n_texts` independent texts. Text `i` draws from its own
/// substream of `seed`, so output does not depend on generation order.
pub fn generate_corpus(
    spec: &RegimeSpec,
    n_texts: usize,
    seed: u64,
) -> Result<(Corpus, GroundTruth), SynthError> {
    spec.validate()?;
    let mut corpus = Corpus::default();
    let mut truth = GroundTruth::default();
    for i in 0..n_texts {
        let mut rng = indexed_substream(seed, SYNTH_STREAM, i as u64);
        let text_id = format!("s{i:04}");
        let mut text = Text {
            text_id: text_id.clone(),
            sentences: Vec::new(),
        };
        let mut tt = TextTruth {
            text_id: text_id.clone(),
            sentence_parts: Vec::new(),
            sentence_regimes: Vec::new(),
            windows: Vec::new(),
        };
        let has_comment = rng.gen::<f64>() < spec.comment_probability;
        for (pi, part) in spec.parts.iter().enumerate() {
            if pi == 2 && !has_comment {
                continue;
            }
            let n_sent = draw_count(&mut rng, &part.sentences);
            for s in 0..n_sent {
                let r = match (s, part.opening_regime) {
                    (0, Some(o)) => o,
                    _ => part.regime,
                };
                let regime = &spec.regimes[r];
                let sent_id = text.sentences.len() as u32;
                let n_verbs = draw_count(&mut rng, &part.verbs);
                let mut tokens = Vec::with_capacity(n_verbs);
                let mut code = draw_code(&mut rng, &regime.first, spec.delta);
                for pos in 0..n_verbs {
                    if pos > 0 {
                        code = draw_code(&mut rng, regime.next_for(code), spec.delta);
                        tt.windows.push((sent_id, pos as u32 - 1, r));
                    }
                    let (part_label, ground, agent, causal, impact, negation, inertia) =
                        annotate(&mut rng, &regime.annotations);
                    tokens.push(VerbToken {
                        text_id: text_id.clone(),
                        sent_id,
                        pos: pos as u32,
                        lemma: Some(lemma_for(code)),
                        category: code.category,
                        tense: code.tense,
                        part: part_label,
                        ground,
                        agent,
                        causal,
                        impact,
                        negation,
                        inertia,
                    });
                }
                text.sentences.push(Sentence { sent_id, tokens });
                tt.sentence_parts.push(Part::ALL[pi]);
                tt.sentence_regimes.push(r);
            }
        }
        corpus.texts.push(text);
        truth.texts.push(tt);
    }
    Ok((corpus, truth))
}

fn cw(category: Category, tense: Tense, weight: f64) -> CodeWeight {
    CodeWeight {
        category,
        tense,
        weight,
    }
}

/// Uniform spread over alternative tenses with the category held fixed.
fn tense_spread(category: Category, tenses: &[Tense]) -> Vec<CodeWeight> {
    let w = 1.0 / tenses.len() as f64;
    tenses.iter().map(|&t| cw(category, t, w)).collect()
}

/// Generator calibrated to the reported corpus: about 24% states, 10%
/// activities, 34% accomplishments and 32% achievements; about 24%
/// imparfait and 34% passé composé. Four regimes: circumstances (part 1),
/// appearance of an incident (first sentence of part 2), actions leading to
/// the accident (rest of part 2), impact and comments (part 3).
///
/// Regime cores differ from each other in every slot of the transition
/// pattern. Spread only varies the tense, never the category, so noisy
/// windows stay next to their own regime on the map.
pub fn default_paper_spec() -> RegimeSpec {
    use Category::*;
    use Tense::*;

    let circumstances = Regime {
        name: "circumstances".into(),
        first: CodeDist {
            core: vec![cw(State, Imparfait, 1.0)],
            spread: tense_spread(State, &[Present, PasseCompose, PasseSimple, PlusQueParfait, PastParticiple]),
        },
        next: CodeDist {
            core: vec![cw(State, Imparfait, 1.0)],
            spread: tense_spread(State, &[Present, PasseCompose, PasseSimple, PlusQueParfait, PastParticiple]),
        },
        next_given: Vec::new(),
        annotations: AnnotationSpec {
            part: [0.9, 0.08, 0.02],
            ground: [0.05, 0.8, 0.15],
            agent: [0.6, 0.15, 0.15, 0.1],
            causal: 0.02,
            impact: 0.0,
            negation: 0.05,
            inertia: 0.45,
        },
    };
    let appearance = Regime {
        name: "appearance".into(),
        first: CodeDist {
            core: vec![cw(Activity, PasseSimple, 1.0)],
            spread: tense_spread(Activity, &[Imparfait, PasseCompose, PlusQueParfait, Infinitive, PastParticiple]),
        },
        next: CodeDist {
            core: vec![cw(Activity, PasseCompose, 1.0)],
            spread: tense_spread(Activity, &[Imparfait, Present, PasseSimple, PlusQueParfait, PastParticiple]),
        },
        next_given: Vec::new(),
        annotations: AnnotationSpec {
            part: [0.1, 0.85, 0.05],
            ground: [0.55, 0.3, 0.15],
            agent: [0.3, 0.15, 0.45, 0.1],
            causal: 0.1,
            impact: 0.05,
            negation: 0.05,
            inertia: 0.05,
        },
    };
    let actions = Regime {
        name: "actions".into(),
        first: CodeDist {
            core: vec![cw(Accomplishment, PasseCompose, 1.0)],
            spread: tense_spread(Accomplishment, &[Imparfait, Present, PasseSimple, PlusQueParfait, PastParticiple]),
        },
        next: CodeDist {
            core: vec![cw(Achievement, Infinitive, 1.0)],
            spread: tense_spread(Achievement, &[Imparfait, Present, PasseCompose, PresentParticiple, PastParticiple]),
        },
        next_given: Vec::new(),
        annotations: AnnotationSpec {
            part: [0.03, 0.9, 0.07],
            ground: [0.7, 0.1, 0.2],
            agent: [0.45, 0.4, 0.05, 0.1],
            causal: 0.5,
            impact: 0.15,
            negation: 0.1,
            inertia: 0.1,
        },
    };
    let impact = Regime {
        name: "impact".into(),
        first: CodeDist {
            core: vec![cw(Achievement, PresentParticiple, 1.0)],
            spread: tense_spread(Achievement, &[Imparfait, Present, PasseCompose, Infinitive, PastParticiple]),
        },
        next: CodeDist {
            core: vec![cw(Accomplishment, PasseCompose, 1.0)],
            spread: tense_spread(Accomplishment, &[Imparfait, Present, PasseSimple, PlusQueParfait, Infinitive, PastParticiple]),
        },
        next_given: Vec::new(),
        annotations: AnnotationSpec {
            part: [0.02, 0.13, 0.85],
            ground: [0.2, 0.3, 0.5],
            agent: [0.3, 0.55, 0.05, 0.1],
            causal: 0.7,
            impact: 0.8,
            negation: 0.15,
            inertia: 0.2,
        },
    };
    RegimeSpec {
        delta: 0.8,
        regimes: vec![circumstances, appearance, actions, impact],
        parts: [
            PartSpec {
                sentences: vec![(1, 0.15), (2, 0.5), (3, 0.35)],
                verbs: vec![(2, 0.6), (3, 0.4)],
                opening_regime: None,
                regime: 0,
            },
            PartSpec {
                sentences: vec![(4, 0.2), (5, 0.4), (6, 0.4)],
                verbs: vec![(2, 1.0)],
                opening_regime: Some(1),
                regime: 2,
            },
            PartSpec {
                sentences: vec![(4, 0.1), (5, 0.5), (6, 0.4)],
                verbs: vec![(2, 1.0)],
                opening_regime: None,
                regime: 3,
            },
        ],
        comment_probability: 0.5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{decode_pair, extract_sequences, parse_corpus, write_corpus, window_transitions};
    use std::collections::HashSet;

    fn category_shares(corpus: &Corpus) -> [f64; 4] {
        let mut c = [0.0; 4];
        let mut n = 0.0;
        for t in corpus.tokens() {
            c[t.category.index()] += 1.0;
            n += 1.0;
        }
        c.map(|x| x / n)
    }

    fn files(spec: &RegimeSpec, n: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
        let (corpus, truth) = generate_corpus(spec, n, seed).unwrap();
        let mut a = Vec::new();
        write_corpus(&corpus, &mut a).unwrap();
        let mut b = Vec::new();
        truth.write_sidecar(&mut b).unwrap();
        (a, b)
    }

    #[test]
    fn same_seed_gives_identical_files() {
        let spec = default_paper_spec();
        assert_eq!(files(&spec, 30, 11), files(&spec, 30, 11));
        assert_ne!(files(&spec, 30, 11).0, files(&spec, 30, 12).0);
    }

    #[test]
    fn default_spec_is_valid() {
        default_paper_spec().validate().unwrap();
    }

    #[test]
    fn unnormalized_distribution_is_rejected() {
        let mut spec = default_paper_spec();
        spec.regimes[0].first.spread[0].weight += 0.1;
        assert!(matches!(spec.validate(), Err(SynthError::InvalidSpec(_))));

        let mut spec = default_paper_spec();
        spec.regimes[2].annotations.ground = [0.5, 0.5, 0.5];
        assert!(matches!(generate_corpus(&spec, 1, 0), Err(SynthError::InvalidSpec(_))));

        let mut spec = default_paper_spec();
        spec.delta = 1.5;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn point_mass_regime_decodes_to_its_core() {
        let mut spec = default_paper_spec();
        spec.delta = 1.0;
        spec.regimes[0].next.core = vec![cw(Category::Accomplishment, Tense::Infinitive, 1.0)];
        spec.regimes[0].next_given = vec![ConditionalNext {
            given: VerbCode::new(Category::Accomplishment, Tense::Infinitive),
            next: CodeDist {
                core: vec![cw(Category::Accomplishment, Tense::Infinitive, 1.0)],
                spread: vec![cw(Category::Activity, Tense::Present, 1.0)],
            },
        }];
        spec.parts[0].verbs = vec![(2, 1.0)];
        let (corpus, truth) = generate_corpus(&spec, 50, 3).unwrap();
        let want = (
            VerbCode::new(Category::State, Tense::Imparfait),
            VerbCode::new(Category::Accomplishment, Tense::Infinitive),
        );
        let part1: HashSet<(String, u32)> = truth
            .texts
            .iter()
            .flat_map(|t| {
                t.sentence_parts
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p == Part::Circumstance)
                    .map(move |(s, _)| (t.text_id.clone(), s as u32))
            })
            .collect();
        let mut seen = 0;
        for seq in extract_sequences(&corpus).sequences {
            if !part1.contains(&(seq.text_id.clone(), seq.sent_id)) {
                continue;
            }
            for w in window_transitions(&seq, 1) {
                assert_eq!(decode_pair(&w.vector), want);
                seen += 1;
            }
        }
        assert!(seen > 50);
    }

    #[test]
    fn implied_marginals_match_calibration() {
        let spec = default_paper_spec();
        let cat = spec.implied_category_marginal();
        for (got, want) in cat.iter().zip([0.24, 0.10, 0.34, 0.32]) {
            assert!((got - want).abs() <= 0.02, "{cat:?}");
        }
        let tense = spec.implied_tense_marginal();
        assert!((tense[Tense::Imparfait.index()] - 0.24).abs() <= 0.02, "{tense:?}");
        assert!((tense[Tense::PasseCompose.index()] - 0.34).abs() <= 0.02, "{tense:?}");
    }

    // Implied marginals are computed from the spec alone; the corpus is a
    // sample. Both must agree up to sampling noise.
    #[test]
    fn empirical_marginals_converge_to_implied() {
        let spec = default_paper_spec();
        let implied = spec.implied_category_marginal();
        for (n, tol) in [(100, 0.04), (500, 0.02)] {
            let (corpus, _) = generate_corpus(&spec, n, 2024).unwrap();
            let got = category_shares(&corpus);
            for (g, w) in got.iter().zip(implied) {
                assert!((g - w).abs() <= tol, "n={n}: {got:?} vs {implied:?}");
            }
        }
    }

    #[test]
    fn implied_marginal_matches_brute_force_enumeration() {
        // Tiny spec: enumerate every sentence outcome by hand.
        let mut spec = default_paper_spec();
        spec.parts[0].verbs = vec![(1, 0.5), (3, 0.5)];
        let r = &spec.regimes[0];
        let first = r.first.dense(spec.delta);
        let next = r.next.dense(spec.delta);
        let mut expect = [0.0; VerbCode::COUNT];
        for a in 0..VerbCode::COUNT {
            expect[a] += 0.5 * first[a];
            for b in 0..VerbCode::COUNT {
                for c in 0..VerbCode::COUNT {
                    let p = 0.5 * first[a] * next[b] * next[c];
                    expect[a] += p;
                    expect[b] += p;
                    expect[c] += p;
                }
            }
        }
        let got = spec.expected_sentence_tokens(0, &spec.parts[0].verbs);
        for (g, e) in got.iter().zip(expect) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn generated_corpus_round_trips_through_validation() {
        let (a, _) = files(&default_paper_spec(), 40, 5);
        let corpus = parse_corpus(a.as_slice()).unwrap();
        assert_eq!(corpus.texts.len(), 40);
    }

    #[test]
    fn sidecar_covers_every_window_once() {
        let (corpus, truth) = generate_corpus(&default_paper_spec(), 60, 9).unwrap();
        let mut windows = HashSet::new();
        for seq in extract_sequences(&corpus).sequences {
            for w in window_transitions(&seq, 1) {
                assert!(windows.insert((w.source.text_id.clone(), w.source.sent_id, w.source.start_pos)));
            }
        }
        let mut truth_windows = HashSet::new();
        for t in &truth.texts {
            for &(s, p, _) in &t.windows {
                assert!(truth_windows.insert((t.text_id.clone(), s, p)));
            }
        }
        assert_eq!(windows, truth_windows);
    }

    #[test]
    fn texts_follow_part_order() {
        let (_, truth) = generate_corpus(&default_paper_spec(), 80, 1).unwrap();
        let mut with_comment = 0;
        for t in &truth.texts {
            let parts: Vec<usize> = t.sentence_parts.iter().map(|p| p.index()).collect();
            assert!(parts.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(parts[0], 0);
            assert!(parts.contains(&1));
            with_comment += usize::from(parts.contains(&2));
        }
        assert!((20..=60).contains(&with_comment));
    }
}
