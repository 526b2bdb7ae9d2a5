//! First-order dynamics over the SOM codebook: empirical transition matrices
//! and discrete-emission hidden Markov models.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{PAIR_DIM, VerbSequence, encode_pair};
use crate::rng::{substream, HMM_STREAM};
use crate::som::SomMap;

#[derive(Debug, Error, PartialEq)]
pub enum MarkovError {
    #[error("symbol {symbol} out of range for alphabet of size {m}")]
    SymbolOutOfRange { symbol: usize, m: usize },
    #[error("hidden state count must be >= 1")]
    InvalidK,
    #[error("no sequences to fit")]
    NoSequences,
}

/// Codebook indices of the successive windows of one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSequence {
    pub symbols: Vec<usize>,
    pub source: (String, u32),
}

impl SymbolSequence {
    pub fn new(symbols: Vec<usize>) -> Self {
        Self {
            symbols,
            source: (String::new(), 0),
        }
    }
}

fn check_symbols(seqs: &[SymbolSequence], m: usize) -> Result<(), MarkovError> {
    for s in seqs {
        if let Some(&symbol) = s.symbols.iter().find(|&&x| x >= m) {
            return Err(MarkovError::SymbolOutOfRange { symbol, m });
        }
    }
    Ok(())
}

/// Row-stochastic matrix of observed symbol-to-symbol transitions with
/// additive smoothing `alpha`. Rows without any outgoing count are uniform
/// when `alpha` is 0.
pub fn empirical_transitions(
    sequences: &[SymbolSequence],
    m: usize,
    alpha: f64,
) -> Result<Vec<Vec<f64>>, MarkovError> {
    check_symbols(sequences, m)?;
    let mut counts = vec![vec![0.0; m]; m];
    for s in sequences {
        for w in s.symbols.windows(2) {
            counts[w[0]][w[1]] += 1.0;
        }
    }
    Ok(counts
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            let den = total + alpha * m as f64;
            if den <= 0.0 {
                vec![1.0 / m as f64; m]
            } else {
                row.iter().map(|c| (c + alpha) / den).collect()
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub pi: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

/// A fitted model together with its seed and per-iteration log-likelihoods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmFit {
    #[serde(flatten)]
    pub model: HmmModel,
    pub seed: u64,
    pub loglik_trace: Vec<f64>,
}

struct Forward {
    /// Per-step normalized forward variables.
    alpha: Vec<Vec<f64>>,
    scale: Vec<f64>,
    loglik: f64,
}

impl HmmModel {
    fn check(&self, seq: &SymbolSequence) -> Result<(), MarkovError> {
        check_symbols(std::slice::from_ref(seq), self.m)
    }

    fn forward(&self, obs: &[usize]) -> Forward {
        let k = self.k;
        let mut alpha = Vec::with_capacity(obs.len());
        let mut scale = Vec::with_capacity(obs.len());
        let mut loglik = 0.0;
        for (t, &o) in obs.iter().enumerate() {
            let mut cur: Vec<f64> = if t == 0 {
                (0..k).map(|i| self.pi[i] * self.b[i][o]).collect()
            } else {
                let prev: &Vec<f64> = &alpha[t - 1];
                (0..k)
                    .map(|j| {
                        let s: f64 = (0..k).map(|i| prev[i] * self.a[i][j]).sum();
                        s * self.b[j][o]
                    })
                    .collect()
            };
            let c: f64 = cur.iter().sum();
            if c <= 0.0 {
                return Forward {
                    alpha,
                    scale,
                    loglik: f64::NEG_INFINITY,
                };
            }
            cur.iter_mut().for_each(|x| *x /= c);
            loglik += c.ln();
            alpha.push(cur);
            scale.push(c);
        }
        Forward {
            alpha,
            scale,
            loglik,
        }
    }

    /// `log P(sequence | model)`; `-inf` when the sequence is impossible.
    pub fn forward_log_likelihood(&self, seq: &SymbolSequence) -> Result<f64, MarkovError> {
        self.check(seq)?;
        Ok(self.forward(&seq.symbols).loglik)
    }

    /// Most probable state path and its log-probability. Ties go to the
    /// lower state index.
    pub fn viterbi(&self, seq: &SymbolSequence) -> Result<(Vec<usize>, f64), MarkovError> {
        self.check(seq)?;
        let obs = &seq.symbols;
        if obs.is_empty() {
            return Ok((Vec::new(), 0.0));
        }
        let k = self.k;
        let la: Vec<Vec<f64>> = self.a.iter().map(|r| r.iter().map(|x| x.ln()).collect()).collect();
        let lb = |i: usize, o: usize| self.b[i][o].ln();
        let mut delta: Vec<f64> = (0..k).map(|i| self.pi[i].ln() + lb(i, obs[0])).collect();
        let mut back: Vec<Vec<usize>> = Vec::with_capacity(obs.len());
        for &o in &obs[1..] {
            let mut next = vec![f64::NEG_INFINITY; k];
            let mut ptr = vec![0; k];
            for j in 0..k {
                let mut best = (0, delta[0] + la[0][j]);
                for (i, d) in delta.iter().enumerate().skip(1) {
                    let v = d + la[i][j];
                    if v > best.1 {
                        best = (i, v);
                    }
                }
                ptr[j] = best.0;
                next[j] = best.1 + lb(j, o);
            }
            back.push(ptr);
            delta = next;
        }
        let mut last = 0;
        for i in 1..k {
            if delta[i] > delta[last] {
                last = i;
            }
        }
        let logp = delta[last];
        let mut path = vec![last; obs.len()];
        for t in (1..obs.len()).rev() {
            path[t - 1] = back[t - 1][path[t]];
        }
        Ok((path, logp))
    }
}

fn random_stochastic(rng: &mut crate::rng::Rng, n: usize) -> Vec<f64> {
    let row: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = row.iter().sum();
    row.into_iter().map(|x| x / s).collect()
}

struct Expectations {
    loglik: f64,
    pi: Vec<f64>,
    trans: Vec<Vec<f64>>,
    /// Occupancy over steps that have a successor.
    from: Vec<f64>,
    emit: Vec<Vec<f64>>,
    occupancy: Vec<f64>,
    sequences: f64,
}

fn expectations(model: &HmmModel, seqs: &[SymbolSequence]) -> Expectations {
    let (k, m) = (model.k, model.m);
    let mut e = Expectations {
        loglik: 0.0,
        pi: vec![0.0; k],
        trans: vec![vec![0.0; k]; k],
        from: vec![0.0; k],
        emit: vec![vec![0.0; m]; k],
        occupancy: vec![0.0; k],
        sequences: 0.0,
    };
    for seq in seqs {
        let obs = &seq.symbols;
        if obs.is_empty() {
            continue;
        }
        let fw = model.forward(obs);
        e.loglik += fw.loglik;
        if !fw.loglik.is_finite() {
            continue;
        }
        let len = obs.len();
        let mut beta = vec![vec![1.0; k]; len];
        for t in (0..len - 1).rev() {
            let o = obs[t + 1];
            let c = fw.scale[t + 1];
            for i in 0..k {
                beta[t][i] = (0..k)
                    .map(|j| model.a[i][j] * model.b[j][o] * beta[t + 1][j])
                    .sum::<f64>()
                    / c;
            }
        }
        e.sequences += 1.0;
        for t in 0..len {
            let g: Vec<f64> = (0..k).map(|i| fw.alpha[t][i] * beta[t][i]).collect();
            for i in 0..k {
                if t == 0 {
                    e.pi[i] += g[i];
                }
                e.emit[i][obs[t]] += g[i];
                e.occupancy[i] += g[i];
                if t + 1 < len {
                    e.from[i] += g[i];
                }
            }
            if t + 1 < len {
                let o = obs[t + 1];
                let c = fw.scale[t + 1];
                for i in 0..k {
                    for j in 0..k {
                        e.trans[i][j] +=
                            fw.alpha[t][i] * model.a[i][j] * model.b[j][o] * beta[t + 1][j] / c;
                    }
                }
            }
        }
    }
    e
}

fn maximize(model: &HmmModel, e: &Expectations) -> HmmModel {
    let mut next = model.clone();
    if e.sequences > 0.0 {
        let s: f64 = e.pi.iter().sum();
        next.pi = e.pi.iter().map(|x| x / s).collect();
    }
    for i in 0..model.k {
        let row_sum: f64 = e.trans[i].iter().sum();
        if e.from[i] > 0.0 && row_sum > 0.0 {
            next.a[i] = e.trans[i].iter().map(|x| x / row_sum).collect();
        }
        let emit_sum: f64 = e.emit[i].iter().sum();
        if e.occupancy[i] > 0.0 && emit_sum > 0.0 {
            next.b[i] = e.emit[i].iter().map(|x| x / emit_sum).collect();
        }
    }
    next
}

/// Fits a `k`-state HMM over an alphabet of size `m` by expectation
/// maximization from a seeded random start.
///
/// `loglik_trace[0]` is the log-likelihood of the initial model and each
/// further entry that of the model after one more update; the returned model
/// is the one scored by the last entry. Iteration stops once an update gains
/// less than `tol` or after `max_iter` updates.
pub fn baum_welch(
    sequences: &[SymbolSequence],
    k: usize,
    m: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<HmmFit, MarkovError> {
    if k == 0 {
        return Err(MarkovError::InvalidK);
    }
    if sequences.iter().all(|s| s.symbols.is_empty()) {
        return Err(MarkovError::NoSequences);
    }
    check_symbols(sequences, m)?;

    let mut rng = substream(seed, HMM_STREAM);
    let mut model = HmmModel {
        k,
        m,
        pi: random_stochastic(&mut rng, k),
        a: (0..k).map(|_| random_stochastic(&mut rng, k)).collect(),
        b: (0..k).map(|_| random_stochastic(&mut rng, m)).collect(),
    };
    let mut e = expectations(&model, sequences);
    let mut trace = vec![e.loglik];
    for _ in 0..max_iter {
        let candidate = maximize(&model, &e);
        let ce = expectations(&candidate, sequences);
        let gain = ce.loglik - e.loglik;
        model = candidate;
        e = ce;
        trace.push(e.loglik);
        if gain < tol {
            break;
        }
    }
    Ok(HmmFit {
        model,
        seed,
        loglik_trace: trace,
    })
}

/// Maps each verb sequence to the BMU indices of its successive windows.
pub fn bmu_sequences(sequences: &[VerbSequence], map: &SomMap) -> Vec<SymbolSequence> {
    assert_eq!(map.input_dim, PAIR_DIM, "map must be trained on transition vectors");
    sequences
        .iter()
        .map(|seq| SymbolSequence {
            symbols: seq
                .tokens
                .windows(2)
                .map(|w| {
                    map.best_matching_unit(&encode_pair(w[0].code(), w[1].code()))
                        .expect("dimension checked above")
                        .0
                })
                .collect(),
            source: (seq.text_id.clone(), seq.sent_id),
        })
        .collect()
}
