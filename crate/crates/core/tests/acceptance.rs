//! Acceptance gate: one PASS/FAIL line per criterion; exits nonzero if any
//! criterion fails. Every expected value comes from an oracle written here,
//! independent of the library's own code paths.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use metricforge::aggregator::{
    adam_step, fit_mlp, linreg_fit, mlp_backward, mlp_forward, train, AdamConfig, AdamState, AggregatorKind,
    MlpParams, OutputActivation, TrainConfig, TrainHistory, TrainedAggregator,
};
use metricforge::baseline::{bleu_stats, rouge_l, sentence_bleu, tokenize, BleuConfig, Smoothing, TokenSequence};
use metricforge::correlation::{
    da_to_relative_ranking, kendall_tau_b, kendall_wmt, pearson, rank_agreement, MetricScores, ScoreKey,
    DARR_THRESHOLD,
};
use metricforge::ingestion::{build_split, rows_to_da_groups, write_canonical_tsv, CanonicalDaRow, Dataset};
use metricforge::model::{FeatureGroup, FeatureMask, FeatureVector, SentencePair};
use metricforge::pipeline::stub::StubExtractor;
use metricforge::pipeline::{extract_features, nubia_score, FeatureStore, Scorer};
use metricforge::synthetic::{da_rows, darr_corpus, paper_shaped_corpus, DaCorpusSpec, HumanModel};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- gradients

fn loss(p: &MlpParams, x: &[f64], t: f64) -> f64 {
    let f = mlp_forward(p, x).expect("shape");
    0.5 * (f - t) * (f - t)
}

fn gradient_check() -> Outcome {
    const H: f64 = 1e-6;
    // |analytic − numeric| / max(|analytic|, |numeric|, FLOOR); the floor
    // keeps round-off on near-zero gradients from dominating
    const FLOOR: f64 = 1e-3;
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = rng.random_range(1..=8);
        let width = rng.random_range(1..=12);
        let layers = rng.random_range(1..=3);
        let output = if seed % 2 == 0 { OutputActivation::Linear } else { OutputActivation::Tanh };
        let params = MlpParams::glorot(&mut rng, input, width, layers, output);
        let x: Vec<f64> = (0..input).map(|_| rng.random_range(-2.0..2.0)).collect();
        let target = rng.random_range(-1.0..1.0);
        let (grads, _) = mlp_backward(&params, &x, target).map_err(|e| e.to_string())?;
        let analytic = grads.to_flat();
        let flat = params.to_flat();
        let mut probe = params.clone();
        for i in 0..flat.len() {
            let mut shifted = flat.clone();
            shifted[i] = flat[i] + H;
            probe.set_flat(&shifted);
            let up = loss(&probe, &x, target);
            shifted[i] = flat[i] - H;
            probe.set_flat(&shifted);
            let down = loss(&probe, &x, target);
            let numeric = (up - down) / (2.0 * H);
            let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(worst < 1e-6, || format!("max relative error {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("100 configurations, {checked} parameters, max rel err {worst:.2e}, {elapsed:.2?}"))
}

// ---------------------------------------------------------------- optimizer

fn adam_unrolled() -> Outcome {
    let cfg = AdamConfig {
        learning_rate: 0.01,
        beta1: 0.8,
        beta2: 0.95,
        epsilon: 1e-7,
    };
    let p0 = [0.5, -1.25, 3.0, 0.0];
    let g1 = [0.2, -0.7, 1e-3, 4.0];
    let g2 = [-0.1, -0.3, 2.0, 0.0];
    let mut worst = 0.0f64;
    for i in 0..p0.len() {
        let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.epsilon);
        let m1 = (1.0 - b1) * g1[i];
        let v1 = (1.0 - b2) * g1[i] * g1[i];
        let p1 = p0[i] - lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
        let m2 = b1 * m1 + (1.0 - b1) * g2[i];
        let v2 = b2 * v1 + (1.0 - b2) * g2[i] * g2[i];
        let p2 = p1 - lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);

        let mut state = AdamState::new(1);
        let mut p = [p0[i]];
        adam_step(&mut state, &mut p, &[g1[i]], &cfg, 1);
        adam_step(&mut state, &mut p, &[g2[i]], &cfg, 2);
        worst = worst.max((p[0] - p2).abs());
    }
    ensure(worst <= 1e-12, || format!("two-step deviation {worst:e}"))?;

    let mut state = AdamState::new(p0.len());
    let mut p = p0;
    for t in 1..=10 {
        adam_step(&mut state, &mut p, &[0.0; 4], &cfg, t);
    }
    ensure(p == p0, || format!("zero gradient moved parameters to {p:?}"))?;
    Ok(format!("2-step max deviation {worst:.1e}; zero-gradient fixpoint exact over 10 steps"))
}

// ---------------------------------------------------------------- regression

fn regression_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let d = 6;
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
    let b = 0.75;
    let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|x| b + x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>()).collect();
    let fit = linreg_fit(&rows, &y).map_err(|e| e.to_string())?;
    let lin_err = fit
        .weights
        .iter()
        .zip(&w)
        .map(|(a, c)| (a - c).abs())
        .fold((fit.bias - b).abs(), f64::max);
    ensure(lin_err < 1e-8, || format!("linear teacher error {lin_err:e}"))?;

    // noisy targets: compare with a Householder QR least-squares solve
    let noisy: Vec<f64> = y.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
    let fit = linreg_fit(&rows, &noisy).map_err(|e| e.to_string())?;
    let design = nalgebra::DMatrix::from_fn(rows.len(), d + 1, |i, j| if j < d { rows[i][j] } else { 1.0 });
    let qr = design.qr();
    let oracle = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * nalgebra::DVector::from_vec(noisy)))
        .ok_or("QR oracle is singular")?;
    let ols_err = fit
        .weights
        .iter()
        .enumerate()
        .map(|(j, w)| (w - oracle[j]).abs())
        .fold((fit.bias - oracle[d]).abs(), f64::max);
    ensure(ols_err < 1e-8, || format!("noisy least-squares deviation {ols_err:e}"))?;

    // teacher: random width-10 tanh network; outputs affinely mapped onto [0, 1]
    let start = Instant::now();
    let mut trng = ChaCha8Rng::seed_from_u64(7);
    let input = 8;
    let teacher = MlpParams::glorot(&mut trng, input, 10, 1, OutputActivation::Linear);
    let xs: Vec<Vec<f64>> = (0..5000)
        .map(|_| (0..input).map(|_| trng.random_range(-1.0..1.0)).collect())
        .collect();
    let raw: Vec<f64> = xs.iter().map(|x| mlp_forward(&teacher, x).expect("shape")).collect();
    let (lo, hi) = raw.iter().fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(*v), h.max(*v)));
    let ys: Vec<f64> = raw.iter().map(|v| (v - lo) / (hi - lo)).collect();
    let config = TrainConfig {
        epochs: 100,
        learning_rate: 5e-3,
        seed: 3,
        ..TrainConfig::default()
    };
    let mut history = TrainHistory::default();
    let student = fit_mlp(&xs, &ys, &config, &mut history).map_err(|e| e.to_string())?;
    let mse = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (mlp_forward(&student, x).expect("shape") - y).powi(2))
        .sum::<f64>()
        / xs.len() as f64;
    let elapsed = start.elapsed();
    ensure(mse < 1e-3, || format!("student train MSE {mse:e}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("student took {elapsed:?}"))?;
    Ok(format!(
        "linear teacher max err {lin_err:.1e}, OLS vs QR {ols_err:.1e}; width-10 student MSE {mse:.2e} on 5000 samples in {elapsed:.2?}"
    ))
}

// ---------------------------------------------------------------- statistics

fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn tau_b_oracle(x: &[f64], y: &[f64]) -> f64 {
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let sx = (x[i] - x[j]).signum() as i64 * i64::from(x[i] != x[j]);
            let sy = (y[i] - y[j]).signum() as i64 * i64::from(y[i] != y[j]);
            match (sx, sy) {
                (0, 0) => {}
                (0, _) => tx += 1,
                (_, 0) => ty += 1,
                _ if sx == sy => c += 1,
                _ => d += 1,
            }
        }
    }
    (c - d) as f64 / (((c + d + tx) as f64) * ((c + d + ty) as f64)).sqrt()
}

fn statistics_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    let mut worst_r = 0.0f64;
    let mut worst_tau = 0.0f64;
    for k in 0..50 {
        let n = rng.random_range(3..=1000);
        let tied = k % 3 == 0;
        let draw = |rng: &mut ChaCha8Rng| {
            if tied {
                f64::from(rng.random_range(0..6u8))
            } else {
                rng.random_range(-10.0..10.0)
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.4 * v + draw(&mut rng)).collect();
        let r = pearson(&x, &y).map_err(|e| e.to_string())?;
        worst_r = worst_r.max((r - pearson_oracle(&x, &y)).abs());
        let t = kendall_tau_b(&x, &y).map_err(|e| e.to_string())?;
        worst_tau = worst_tau.max((t - tau_b_oracle(&x, &y)).abs());
    }
    ensure(worst_r <= 1e-12, || format!("pearson deviation {worst_r:e}"))?;
    ensure(worst_tau <= 1e-12, || format!("tau-b deviation {worst_tau:e}"))?;

    // exhaustive enumeration over a 50-segment corpus
    let rows = darr_corpus(99, 50, 5);
    let groups = rows_to_da_groups(&rows).map_err(|e| e.to_string())?;
    ensure(groups.len() == 50 && groups.iter().all(|g| g.entries.len() <= 5), || "corpus shape".into())?;
    let ranked = da_to_relative_ranking(&groups, DARR_THRESHOLD).map_err(|e| e.to_string())?;
    let mut expected = Vec::new();
    let mut exact_gaps = 0;
    for g in &groups {
        for a in &g.entries {
            for b in &g.entries {
                let gap = a.human_score - b.human_score;
                if gap == 25.0 {
                    exact_gaps += 1;
                }
                if gap > 25.0 && a.candidate != b.candidate {
                    expected.push((g.lang_pair.clone(), g.segment_id, a.candidate.clone(), b.candidate.clone()));
                }
            }
        }
    }
    let mut got: Vec<_> = ranked
        .iter()
        .map(|r| (r.lang_pair.clone(), r.segment_id, r.better_candidate.clone(), r.worse_candidate.clone()))
        .collect();
    expected.sort();
    got.sort();
    ensure(exact_gaps > 0, || "corpus has no exact 25-point gaps".into())?;
    ensure(got == expected, || format!("ranked pairs {} vs enumeration {}", got.len(), expected.len()))?;

    // metric scores on a coarse grid so metric ties occur
    let mut scores = MetricScores::new();
    let mut mrng = ChaCha8Rng::seed_from_u64(5);
    for r in &rows {
        scores
            .entry(ScoreKey::new(&r.lang_pair, r.segment_id, &r.candidate))
            .or_insert_with(|| f64::from(mrng.random_range(0..8u8)) + r.human_score / 50.0);
    }
    let (mut c, mut d, mut ties) = (0usize, 0usize, 0usize);
    for (lp, seg, better, worse) in &expected {
        let sb = scores[&ScoreKey::new(lp, *seg, better)];
        let sw = scores[&ScoreKey::new(lp, *seg, worse)];
        if sb > sw {
            c += 1;
        } else {
            d += 1;
            ties += usize::from(sb == sw);
        }
    }
    let oracle_tau = (c as f64 - d as f64) / (c + d) as f64;
    let agreement = rank_agreement(&ranked, &scores).map_err(|e| e.to_string())?;
    let tau = kendall_wmt(&ranked, &scores).map_err(|e| e.to_string())?;
    ensure(ties > 0, || "no metric ties to exercise".into())?;
    ensure((agreement.concordant, agreement.discordant) == (c, d), || {
        format!("C/D {}/{} vs oracle {c}/{d}", agreement.concordant, agreement.discordant)
    })?;
    ensure(tau == oracle_tau, || format!("tau {tau} vs oracle {oracle_tau}"))?;
    Ok(format!(
        "50 instances: pearson dev {worst_r:.1e}, tau-b dev {worst_tau:.1e}; daRR {} pairs ({exact_gaps} exact-25 gaps excluded), tau {tau:.4} with {ties} metric ties",
        ranked.len()
    ))
}

// ---------------------------------------------------------------- baselines

struct Golden {
    candidate: &'static str,
    references: &'static [&'static str],
    smoothing: Smoothing,
    /// (clipped, total) per included order, before smoothing.
    counts: &'static [(u64, u64)],
    /// Effective reference length.
    ref_len: usize,
    /// Smoothed precisions; empty when the score is forced to 0.
    precisions: &'static [(u64, u64)],
    /// ROUGE-L against the first reference, as (numerator, denominator).
    rouge: (usize, usize),
}

const GOLDEN: [Golden; 10] = [
    Golden {
        candidate: "the cat is on the mat",
        references: &["the cat is on the mat"],
        smoothing: Smoothing::AddOne,
        counts: &[(6, 6), (5, 5), (4, 4), (3, 3)],
        ref_len: 6,
        precisions: &[(6, 6), (5, 5), (4, 4), (3, 3)],
        rouge: (1, 1),
    },
    Golden {
        candidate: "the the the the the the the",
        references: &["the cat is on the mat"],
        smoothing: Smoothing::AddOne,
        counts: &[(2, 7), (0, 6), (0, 5), (0, 4)],
        ref_len: 6,
        precisions: &[(2, 7), (1, 7), (1, 6), (1, 5)],
        rouge: (4, 13),
    },
    Golden {
        candidate: "the cat",
        references: &["the cat is on the mat"],
        smoothing: Smoothing::AddOne,
        counts: &[(2, 2), (1, 1)],
        ref_len: 6,
        precisions: &[(2, 2), (1, 1)],
        rouge: (1, 2),
    },
    Golden {
        candidate: "hello",
        references: &["hello"],
        smoothing: Smoothing::Off,
        counts: &[(1, 1)],
        ref_len: 1,
        precisions: &[(1, 1)],
        rouge: (1, 1),
    },
    Golden {
        candidate: "mat the on is cat the",
        references: &["the cat is on the mat"],
        smoothing: Smoothing::AddOne,
        counts: &[(6, 6), (0, 5), (0, 4), (0, 3)],
        ref_len: 6,
        precisions: &[(6, 6), (1, 6), (1, 5), (1, 4)],
        rouge: (1, 2),
    },
    Golden {
        candidate: "the the cat",
        references: &["the cat", "the the dog"],
        smoothing: Smoothing::AddOne,
        counts: &[(3, 3), (2, 2), (0, 1)],
        ref_len: 3,
        precisions: &[(3, 3), (2, 2), (1, 2)],
        rouge: (4, 5),
    },
    Golden {
        candidate: "a b c d",
        references: &["a b c", "a b c d e"],
        smoothing: Smoothing::AddOne,
        counts: &[(4, 4), (3, 3), (2, 2), (1, 1)],
        ref_len: 3,
        precisions: &[(4, 4), (3, 3), (2, 2), (1, 1)],
        rouge: (6, 7),
    },
    Golden {
        candidate: "x y z",
        references: &["a b c"],
        smoothing: Smoothing::AddOne,
        counts: &[(0, 3), (0, 2), (0, 1)],
        ref_len: 3,
        precisions: &[],
        rouge: (0, 1),
    },
    Golden {
        candidate: "the cat sat on the mat",
        references: &["the cat is on the mat"],
        smoothing: Smoothing::AddOne,
        counts: &[(5, 6), (3, 5), (1, 4), (0, 3)],
        ref_len: 6,
        precisions: &[(5, 6), (3, 5), (1, 4), (1, 4)],
        rouge: (5, 6),
    },
    Golden {
        candidate: "the cat sat on the mat",
        references: &["the cat is on the mat"],
        smoothing: Smoothing::Off,
        counts: &[(5, 6), (3, 5), (1, 4), (0, 3)],
        ref_len: 6,
        precisions: &[],
        rouge: (5, 6),
    },
];

fn toks(s: &str) -> TokenSequence {
    s.split_whitespace().collect()
}

fn baseline_golden_table() -> Outcome {
    for (i, g) in GOLDEN.iter().enumerate() {
        let cand = toks(g.candidate);
        let refs: Vec<TokenSequence> = g.references.iter().map(|r| toks(r)).collect();
        let stats = bleu_stats(&cand, &refs, 4);
        let counts: Vec<(u64, u64)> = stats.matches.iter().map(|m| (m.clipped, m.total)).collect();
        ensure(counts == g.counts, || format!("case {i}: counts {counts:?}"))?;
        ensure(stats.effective_ref_len == g.ref_len, || format!("case {i}: ref len {}", stats.effective_ref_len))?;
        let precisions = stats.precisions(g.smoothing).unwrap_or_default();
        ensure(precisions == g.precisions, || format!("case {i}: precisions {precisions:?}"))?;

        // rational oracle: product of precisions, root and brevity penalty last
        let expected = if g.precisions.is_empty() {
            0.0
        } else {
            let product = g
                .precisions
                .iter()
                .fold(Ratio::from_integer(1u64), |acc, &(k, t)| acc * Ratio::new(k, t));
            let geo = (*product.numer() as f64 / *product.denom() as f64).powf(1.0 / g.precisions.len() as f64);
            let c = cand.len();
            let bp = if c < g.ref_len {
                let ratio = Ratio::new(g.ref_len as u64, c as u64);
                (1.0 - *ratio.numer() as f64 / *ratio.denom() as f64).exp()
            } else {
                1.0
            };
            geo * bp
        };
        let bleu = sentence_bleu(
            &cand,
            &refs,
            BleuConfig {
                max_n: 4,
                smoothing: g.smoothing,
            },
        );
        ensure((bleu - expected).abs() <= 1e-15, || format!("case {i}: BLEU {bleu} vs {expected}"))?;
        if !g.precisions.is_empty() && g.precisions.iter().all(|(k, t)| k == t) && g.ref_len <= cand.len() {
            ensure(bleu == 1.0, || format!("case {i}: identity BLEU {bleu}"))?;
        }

        let rouge = rouge_l(&cand, &refs[0]);
        let (num, den) = g.rouge;
        let exact = Ratio::new(num, den);
        ensure(rouge == *exact.numer() as f64 / *exact.denom() as f64, || format!("case {i}: ROUGE-L {rouge}"))?;
    }
    // the canonical tokenizer agrees with whitespace splitting on these inputs
    ensure(tokenize("The cat is on the mat.") == toks("the cat is on the mat"), || "tokenizer".into())?;
    Ok("10 cases: counts and precisions exact, p1 = 2/7 clipped, identities = 1.0".into())
}

// ---------------------------------------------------------------- calibration

fn stub_dataset(rows: &[CanonicalDaRow], cache: &mut FeatureStore) -> Result<Vec<(FeatureVector, f64)>, String> {
    let pairs: Vec<SentencePair> = rows.iter().map(CanonicalDaRow::pair).collect();
    let recs = extract_features(&pairs, Some(&StubExtractor::new()), cache).map_err(|e| e.to_string())?;
    Ok(recs.iter().zip(rows).map(|(r, row)| (r.features, row.human_score / 100.0)).collect())
}

fn calibration_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let rows = da_rows(&mut rng, &DaCorpusSpec::new(Dataset::Wmt16, 150, 4));
    let stub = StubExtractor::new();
    let mut cache = FeatureStore::in_memory();
    let data = stub_dataset(&rows, &mut cache)?;
    let ss = FeatureMask::new(&[FeatureGroup::Ss]).map_err(|e| e.to_string())?;
    let si = FeatureMask::new(&[FeatureGroup::Si]).map_err(|e| e.to_string())?;
    let quick = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    let mut models = Vec::new();
    for (mask, kind) in [
        (FeatureMask::FULL, AggregatorKind::Linreg),
        (FeatureMask::FULL, AggregatorKind::Mlp),
        (FeatureMask::NEURAL, AggregatorKind::Mlp),
        (ss, AggregatorKind::Linreg),
        (si, AggregatorKind::Mlp),
    ] {
        models.push(train(&data, mask, kind, &quick).map_err(|e| format!("{mask} {kind}: {e}"))?);
    }

    let mut by_reference: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in &rows {
        by_reference.entry(&r.reference).or_default().push(&r.candidate);
    }
    let mut identities = 0;
    let mut scored = 0;
    for model in &models {
        let scorer = Scorer::new(model, Some(&stub));
        for (reference, candidates) in &by_reference {
            let id = nubia_score(model, &SentencePair::identity(*reference).expect("nonblank"), Some(&stub), &mut cache)
                .map_err(|e| e.to_string())?;
            ensure(id.score == 1.0, || format!("{}: identity score {} for {reference:?}", model.mask, id.score))?;
            identities += 1;
            let pairs: Vec<SentencePair> = candidates
                .iter()
                .map(|c| SentencePair::new(*reference, *c).expect("nonblank"))
                .collect();
            let results = scorer
                .score_batch(&pairs, &mut cache)
                .map_err(|e| e.to_string())?
                .into_complete()
                .map_err(|e| e.to_string())?;
            for a in &results {
                ensure((0.0..=1.0).contains(&a.score), || format!("score {} outside [0, 1]", a.score))?;
                for b in &results {
                    // dividing by a positive self-score and clamping may tie,
                    // never invert
                    if a.raw < b.raw {
                        ensure(a.score <= b.score, || format!("order inverted: {a:?} vs {b:?}"))?;
                        if a.score == b.score {
                            let unclamped = |s: f64| s > 0.0 && s < 1.0;
                            ensure(!(unclamped(a.score) && unclamped(b.score)), || {
                                format!("unclamped tie: {a:?} vs {b:?}")
                            })?;
                        }
                    } else if a.raw == b.raw {
                        ensure(a.score == b.score, || format!("equal raw, unequal score: {a:?} vs {b:?}"))?;
                    }
                }
            }
            scored += results.len();
        }
    }
    Ok(format!(
        "{} models: {identities} identity pairs score 1.0; {scored} scores in [0, 1] with same-reference order preserved",
        models.len()
    ))
}

// ---------------------------------------------------------------- splits

fn split_sizes() -> Outcome {
    let rows = paper_shaped_corpus(1);
    let mut sizes = Vec::new();
    for (test, want) in [(Dataset::Wmt17, 5360), (Dataset::Wmt18, 9280), (Dataset::Wmt19, 9280)] {
        let split = build_split(&rows, test).map_err(|e| e.to_string())?;
        ensure(split.train.len() == want, || format!("test {test}: train {}", split.train.len()))?;
        sizes.push(format!("{test} -> {}", split.train.len()));
    }
    Ok(sizes.join(", "))
}

// ---------------------------------------------------------------- CLI determinism

fn metricforge(args: &[&str], dir: &Path) -> Result<(Vec<u8>, i32), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_metricforge"))
        .args(args)
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("METRICFORGE_ENDPOINT")
        .output()
        .map_err(|e| e.to_string())?;
    let code = out.status.code().unwrap_or(-1);
    if code != 0 {
        return Err(format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok((out.stdout, code))
}

fn warm_cache(rows: &[CanonicalDaRow], path: &Path) -> Result<(), String> {
    let mut cache = FeatureStore::open(path, false).map_err(|e| e.to_string())?;
    let mut pairs: Vec<SentencePair> = rows.iter().map(CanonicalDaRow::pair).collect();
    pairs.extend(rows.iter().map(|r| SentencePair::identity(r.reference.clone()).expect("nonblank")));
    extract_features(&pairs, Some(&StubExtractor::new()), &mut cache).map_err(|e| e.to_string())?;
    Ok(())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rows: Vec<CanonicalDaRow> = paper_shaped_corpus(8)
        .into_iter()
        .filter(|r| r.segment_id % 4 == 0)
        .collect();
    write_canonical_tsv(dir.path().join("data.tsv"), &rows).map_err(|e| e.to_string())?;
    let test: Vec<CanonicalDaRow> = rows.iter().filter(|r| r.dataset == Dataset::Wmt18).cloned().collect();
    write_canonical_tsv(dir.path().join("test.tsv"), &test).map_err(|e| e.to_string())?;
    warm_cache(&rows, &dir.path().join("features.jsonl"))?;

    let mut models = Vec::new();
    let mut manifests = Vec::new();
    for run in 0..2 {
        let out = format!("model{run}.json");
        let manifest = format!("train{run}.manifest.json");
        metricforge(
            &[
                "train", "--data", "data.tsv", "--test-dataset", "wmt18", "--kind", "nn", "--seed", "11", "--epochs",
                "40", "--cache", "features.jsonl", "--offline", "--out", &out, "--manifest", &manifest,
            ],
            dir.path(),
        )?;
        models.push(std::fs::read(dir.path().join(&out)).map_err(|e| e.to_string())?);
        manifests.push(std::fs::read_to_string(dir.path().join(&manifest)).map_err(|e| e.to_string())?);
    }
    ensure(models[0] == models[1], || "model files differ".into())?;
    TrainedAggregator::from_json(std::str::from_utf8(&models[0]).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    // manifests differ only in the output path
    ensure(manifests[0].replace("model0", "model1").replace("train0", "train1") == manifests[1], || {
        "train manifests differ".into()
    })?;

    let mut outputs = Vec::new();
    for _ in 0..2 {
        let (stdout, _) = metricforge(
            &[
                "eval", "--model", "model0.json", "--test", "test.tsv", "--baselines", "--cache", "features.jsonl",
                "--offline", "--manifest", "eval.manifest.json",
            ],
            dir.path(),
        )?;
        outputs.push(stdout);
    }
    ensure(outputs[0] == outputs[1], || "eval output differs".into())?;
    ensure(!outputs[0].is_empty(), || "eval printed nothing".into())?;
    Ok(format!(
        "2 train runs -> identical {}-byte model files; 2 warmed-cache eval runs -> identical {}-byte reports",
        models[0].len(),
        outputs[0].len()
    ))
}

// ---------------------------------------------------------------- end to end

fn end_to_end_stub() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let spec = |d, segments| DaCorpusSpec {
        scramble: 0.6,
        human: HumanModel::Overlap {
            noise: 8.0,
            quantum: None,
        },
        ..DaCorpusSpec::new(d, segments, 4)
    };
    let train_rows: Vec<CanonicalDaRow> = [(Dataset::Wmt15, 250), (Dataset::Wmt16, 250)]
        .into_iter()
        .flat_map(|(d, n)| da_rows(&mut rng, &spec(d, n)))
        .collect();
    let test_rows = da_rows(&mut rng, &spec(Dataset::Wmt17, 250));
    let stub = StubExtractor::new();
    let mut cache = FeatureStore::in_memory();
    let data = stub_dataset(&train_rows, &mut cache)?;
    let model = train(&data, FeatureMask::FULL, AggregatorKind::Mlp, &TrainConfig::default()).map_err(|e| e.to_string())?;

    let pairs: Vec<SentencePair> = test_rows.iter().map(CanonicalDaRow::pair).collect();
    let nubia: Vec<f64> = Scorer::new(&model, Some(&stub))
        .score_batch(&pairs, &mut cache)
        .map_err(|e| e.to_string())?
        .into_complete()
        .map_err(|e| e.to_string())?
        .iter()
        .map(|s| s.score)
        .collect();
    let bleu: Vec<f64> = test_rows
        .iter()
        .map(|r| sentence_bleu(&tokenize(&r.candidate), &[tokenize(&r.reference)], BleuConfig::default()))
        .collect();
    let human: Vec<f64> = test_rows.iter().map(|r| r.human_score).collect();
    let r_nubia = pearson(&nubia, &human).map_err(|e| e.to_string())?.abs();
    let r_bleu = pearson(&bleu, &human).map_err(|e| e.to_string())?.abs();
    ensure(r_nubia > r_bleu, || format!("NUBIA |r| {r_nubia:.4} <= BLEU |r| {r_bleu:.4}"))?;
    Ok(format!("{} test pairs: NUBIA |r| {r_nubia:.4} > BLEU |r| {r_bleu:.4}", test_rows.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient_check", gradient_check),
        ("adam_unrolled", adam_unrolled),
        ("regression_recovery", regression_recovery),
        ("statistics_oracles", statistics_oracles),
        ("baseline_golden_table", baseline_golden_table),
        ("calibration_contract", calibration_contract),
        ("split_sizes", split_sizes),
        ("determinism", determinism),
        ("end_to_end_stub", end_to_end_stub),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
