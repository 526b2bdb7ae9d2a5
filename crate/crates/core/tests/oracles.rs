//! Library results checked against brute-force or independently written
//! references.

use rand::Rng;

use verbseq::clusterer::{cluster_prototypes, davies_bouldin, distance_matrix, select_k};
use verbseq::markov::{baum_welch, HmmModel, SymbolSequence};
use verbseq::rng::substream;
use verbseq::som::{init_som, train_som, SomConfig};

/// Standard normal draw by Box-Muller.
fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[test]
fn best_matching_unit_agrees_with_linear_scan() {
    let mut rng = substream(11, "oracle-bmu");
    let samples: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..5).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    let map = train_som(
        &samples,
        &SomConfig {
            rows: 4,
            cols: 3,
            epochs: 5,
            ..SomConfig::default()
        },
    )
    .unwrap();
    for s in &samples {
        let (unit, dist) = map.best_matching_unit(s).unwrap();
        let mut best = 0;
        for u in 1..map.units() {
            if sq(s, &map.prototypes[u]) < sq(s, &map.prototypes[best]) {
                best = u;
            }
        }
        assert_eq!(unit, best);
        assert!((dist - sq(s, &map.prototypes[best]).sqrt()).abs() < 1e-12);
    }
}

/// Plain Lloyd iterations from the given centers.
fn lloyd(points: &[f64], mut centers: Vec<f64>, rounds: usize) -> Vec<f64> {
    for _ in 0..rounds {
        let mut sums = vec![0.0; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for &p in points {
            let mut best = 0;
            for c in 1..centers.len() {
                if (p - centers[c]).abs() < (p - centers[best]).abs() {
                    best = c;
                }
            }
            sums[best] += p;
            counts[best] += 1;
        }
        for c in 0..centers.len() {
            if counts[c] > 0 {
                centers[c] = sums[c] / counts[c] as f64;
            }
        }
    }
    centers
}

/// Optimal two-means of 1-D data: the best split of the sorted points.
fn exhaustive_two_means(points: &[f64]) -> (f64, f64) {
    let mut s = points.to_vec();
    s.sort_by(f64::total_cmp);
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let sse = |xs: &[f64]| {
        let m = mean(xs);
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>()
    };
    (1..s.len())
        .map(|i| (sse(&s[..i]) + sse(&s[i..]), mean(&s[..i]), mean(&s[i..])))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, a, b)| (a, b))
        .unwrap()
}

#[test]
fn one_by_two_map_at_zero_radius_is_two_means() {
    let mut rng = substream(12, "oracle-kmeans");
    for trial in 0..20 {
        let points: Vec<f64> = (0..40)
            .map(|i| if i % 2 == 0 { 0.0 } else { 5.0 } + normal(&mut rng))
            .collect();
        let samples: Vec<Vec<f64>> = points.iter().map(|&p| vec![p]).collect();
        let config = SomConfig {
            rows: 1,
            cols: 2,
            epochs: 30,
            initial_radius: 0.0,
            final_radius: 0.0,
            seed: trial,
        };
        let mut map = init_som(&samples, &config).unwrap();
        // Start from two distinct data points so both units stay in play.
        map.prototypes = vec![vec![points[0]], vec![points[1]]];
        for _ in 0..config.epochs {
            map.batch_epoch(&samples, 0.0).unwrap();
        }
        let reference = lloyd(&points, vec![points[0], points[1]], 30);
        for u in 0..2 {
            assert!((map.prototypes[u][0] - reference[u]).abs() < 1e-9);
        }
        let (lo, hi) = exhaustive_two_means(&points);
        let mut got = [map.prototypes[0][0], map.prototypes[1][0]];
        got.sort_by(f64::total_cmp);
        assert!((got[0] - lo).abs() < 1e-9 && (got[1] - hi).abs() < 1e-9);
    }
}

fn medoid_cost(dist: &[Vec<f64>], medoids: &[usize]) -> f64 {
    (0..dist.len())
        .map(|j| medoids.iter().map(|&m| dist[m][j]).fold(f64::INFINITY, f64::min))
        .sum()
}

fn best_subset_cost(dist: &[Vec<f64>], k: usize, start: usize, chosen: &mut Vec<usize>) -> f64 {
    if chosen.len() == k {
        return medoid_cost(dist, chosen);
    }
    let mut best = f64::INFINITY;
    for c in start..dist.len() {
        chosen.push(c);
        best = best.min(best_subset_cost(dist, k, c + 1, chosen));
        chosen.pop();
    }
    best
}

/// Medoid sets one swap away from `medoids`.
fn swap_neighbours(n: usize, medoids: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for slot in 0..medoids.len() {
        for h in (0..n).filter(|h| !medoids.contains(h)) {
            let mut m = medoids.to_vec();
            m[slot] = h;
            out.push(m);
        }
    }
    out
}

// BUILD followed by SWAP stops at a swap-local optimum, which on small random
// instances is not always within 5% of the global one (one 4-point, k = 2
// instance of this stream ends 23% above it). Local optimality is checked exactly;
// the 5% bound is checked as a rate.
#[test]
fn pam_ends_at_a_swap_local_optimum_close_to_exhaustive() {
    let mut rng = substream(13, "oracle-pam");
    let trials = 500;
    let mut within = 0;
    let mut worst = 1.0f64;
    for _ in 0..trials {
        let n = rng.gen_range(4..9);
        let k = rng.gen_range(2..4);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.gen_range(0.0..10.0)).collect())
            .collect();
        let dist = distance_matrix(&pts).unwrap();
        let got = cluster_prototypes(&dist, k).unwrap();
        assert!((got.cost - medoid_cost(&dist, &got.medoids)).abs() < 1e-9);
        for m in swap_neighbours(n, &got.medoids) {
            assert!(medoid_cost(&dist, &m) >= got.cost - 1e-9);
        }
        for (j, &l) in got.labels.iter().enumerate() {
            let own = dist[got.medoids[l]][j];
            assert!(got.medoids.iter().all(|&m| own <= dist[m][j]));
        }
        let ratio = got.cost / best_subset_cost(&dist, k, 0, &mut Vec::new());
        worst = worst.max(ratio);
        if ratio <= 1.05 {
            within += 1;
        }
    }
    assert!(within * 100 >= 95 * trials, "{within}/{trials} within 5%");
    assert!(worst < 1.5, "worst ratio {worst}");
}

#[test]
fn pam_is_exact_on_planted_groups() {
    let mut rng = substream(18, "oracle-pam-planted");
    for _ in 0..50 {
        let k = rng.gen_range(2..4);
        let n = rng.gen_range(k + 2..9);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![(i % k) as f64 * 100.0 + rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect();
        let dist = distance_matrix(&pts).unwrap();
        let got = cluster_prototypes(&dist, k).unwrap();
        let optimum = best_subset_cost(&dist, k, 0, &mut Vec::new());
        assert!((got.cost - optimum).abs() < 1e-9);
    }
}

#[test]
fn davies_bouldin_is_invariant_under_isometries() {
    let mut rng = substream(14, "oracle-db-iso");
    for _ in 0..50 {
        let n = rng.gen_range(6..20);
        let k = rng.gen_range(2..4);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)])
            .collect();
        let labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let (dx, dy) = (rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| {
                vec![
                    theta.cos() * p[0] - theta.sin() * p[1] + dx,
                    theta.sin() * p[0] + theta.cos() * p[1] + dy,
                ]
            })
            .collect();
        let a = davies_bouldin(&pts, &labels, k).unwrap().db_score;
        let b = davies_bouldin(&moved, &labels, k).unwrap().db_score;
        assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} vs {b}");
    }
}

#[test]
fn select_k_finds_separated_blobs() {
    let mut rng = substream(15, "oracle-blobs");
    for blobs in 2..=5usize {
        let pts: Vec<Vec<f64>> = (0..blobs * 12)
            .map(|i| {
                let c = (i % blobs) as f64 * 20.0;
                vec![c + 0.5 * normal(&mut rng), -c + 0.5 * normal(&mut rng)]
            })
            .collect();
        assert_eq!(select_k(&pts, 2, 8).unwrap().best_k, blobs);
    }
}

fn sample_hmm<R: Rng>(rng: &mut R, model: &HmmModel, len: usize) -> Vec<usize> {
    let draw = |rng: &mut R, p: &[f64]| {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &w) in p.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        p.len() - 1
    };
    let mut state = draw(rng, &model.pi);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(draw(rng, &model.b[state]));
        state = draw(rng, &model.a[state]);
    }
    out
}

#[test]
fn baum_welch_recovers_a_two_state_chain() {
    let truth = HmmModel {
        k: 2,
        m: 3,
        pi: vec![0.5, 0.5],
        a: vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        b: vec![vec![0.8, 0.15, 0.05], vec![0.05, 0.15, 0.8]],
    };
    let mut rng = substream(16, "oracle-hmm");
    let seqs: Vec<SymbolSequence> = (0..100)
        .map(|_| SymbolSequence::new(sample_hmm(&mut rng, &truth, 100)))
        .collect();
    // EM from a single random start can stall in a poor local optimum; keep
    // the most likely of a few restarts, as one would in practice.
    let fit = (0..5)
        .map(|seed| baum_welch(&seqs, 2, 3, seed, 1000, 1e-9).unwrap())
        .max_by(|a, b| a.loglik_trace.last().unwrap().total_cmp(b.loglik_trace.last().unwrap()))
        .unwrap();
    let m = &fit.model;
    // Align states by which one favours symbol 0.
    let order = if m.b[0][0] > m.b[1][0] { [0, 1] } else { [1, 0] };
    for (t, &s) in order.iter().enumerate() {
        for j in 0..3 {
            assert!((m.b[s][j] - truth.b[t][j]).abs() < 0.05, "B {:?}", m.b);
        }
        for (u, &r) in order.iter().enumerate() {
            assert!((m.a[s][r] - truth.a[t][u]).abs() < 0.05, "A {:?}", m.a);
        }
    }
    let true_ll: f64 = seqs.iter().map(|s| truth.forward_log_likelihood(s).unwrap()).sum();
    assert!(*fit.loglik_trace.last().unwrap() >= true_ll - 1e-6);
}

#[test]
fn fitted_log_likelihood_matches_forward_pass() {
    let mut rng = substream(17, "oracle-trace");
    let seqs: Vec<SymbolSequence> = (0..5)
        .map(|_| SymbolSequence::new((0..15).map(|_| rng.gen_range(0..4)).collect()))
        .collect();
    let fit = baum_welch(&seqs, 3, 4, 9, 50, 1e-10).unwrap();
    let total: f64 = seqs.iter().map(|s| fit.model.forward_log_likelihood(s).unwrap()).sum();
    assert!((total - fit.loglik_trace.last().unwrap()).abs() < 1e-9);
}
