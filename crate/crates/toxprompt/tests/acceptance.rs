//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toxprompt_core::attribution::{explain_text, ExplainConfig};
use toxprompt_core::backend::{BackendError, LanguageModel, TokenScore};
use toxprompt_core::classifiers::{
    classify_discriminative, classify_embedding, classify_generative, classify_generative_with_demos,
    classify_lexicon, cosine_similarity, two_way_posterior, Lexicon,
};
use toxprompt_core::corpus::{Document, Label};
use toxprompt_core::evaluation::tally;
use toxprompt_core::mock::{MockBackend, MockEntry, MockFixture};
use toxprompt_core::prompting::{ClozeTemplate, PromptPair};

use common::{bin, fixtures, run, stderr, Served};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn entry(ctx: &str, token: &str, prob: f64) -> MockEntry {
    MockEntry {
        context_suffix: ctx.into(),
        token: token.into(),
        prob,
    }
}

fn mock(vocab: u64, entries: Vec<MockEntry>) -> MockBackend {
    MockBackend::new(
        "mock",
        MockFixture {
            vocab_size: vocab,
            entries,
            embeddings: Default::default(),
        },
    )
    .unwrap()
}

fn doc(text: &str) -> Document {
    Document::new("doc", text, None).unwrap()
}

fn pair() -> PromptPair {
    PromptPair::new("Write a toxic text", "Write a polite text", "\n").unwrap()
}

const POS: &str = "Write a toxic text\n";
const NEG: &str = "Write a polite text\n";
const WORDS: [&str; 10] = ["you", "stink", "have", "a", "nice", "day", "awful", "person", "thanks", "idiot"];

/// Random generative fixture and text over a small word list.
fn random_case(rng: &mut ChaCha8Rng) -> (MockBackend, Document) {
    let mut entries = Vec::new();
    for _ in 0..rng.random_range(0..16) {
        let ctx = if rng.random_bool(0.5) { POS } else { NEG };
        let word = WORDS[rng.random_range(0..WORDS.len())];
        let token = if rng.random_bool(0.7) { format!(" {word}") } else { word.to_string() };
        entries.push(entry(ctx, &token, rng.random_range(0.001..1.0)));
    }
    let n = rng.random_range(1..8);
    let text: Vec<&str> = (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect();
    (mock(rng.random_range(20..500), entries), doc(&text.join(" ")))
}

fn metric_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=200);
        let pairs: Vec<(bool, bool)> = (0..n).map(|_| (rng.random_bool(0.5), rng.random_bool(0.5))).collect();
        let counts = tally(pairs.iter().map(|&(p, g)| (Label::from_bool(g), Label::from_bool(p))));
        let got = counts.scores();
        // brute-force oracle: per class, 2 * agreements / (predicted + gold)
        let class_f1 = |c: bool| {
            let hit = pairs.iter().filter(|&&(p, g)| p == c && g == c).count() as f64;
            let predicted = pairs.iter().filter(|&&(p, _)| p == c).count() as f64;
            let gold = pairs.iter().filter(|&&(_, g)| g == c).count() as f64;
            if predicted + gold == 0.0 {
                0.0
            } else {
                2.0 * hit / (predicted + gold)
            }
        };
        let (pos, neg) = (class_f1(true), class_f1(false));
        for (a, b) in [(got.pos_f1, pos), (got.neg_f1, neg), (got.macro_f1, (pos + neg) / 2.0)] {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    ensure!(worst <= 1e-12, "max deviation {worst:e}");
    ensure!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    Ok(format!("max deviation {worst:e}, {:.0} ms", elapsed.as_secs_f64() * 1e3))
}

fn posterior_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..10_000 {
        let scale = [1.0, 10.0, 1e3, 1e4][i % 4];
        let a = rng.random_range(-scale..=scale);
        let b = rng.random_range(-scale..=scale);
        let p = two_way_posterior(a, b).map_err(|e| e.to_string())?;
        let q = two_way_posterior(b, a).map_err(|e| e.to_string())?;
        ensure!(p.is_finite() && (0.0..=1.0).contains(&p), "p({a}, {b}) = {p}");
        ensure!((p + q - 1.0).abs() <= 1e-12, "p + q = {} for ({a}, {b})", p + q);
        let up = two_way_posterior(a + rng.random_range(0.0..scale), b).map_err(|e| e.to_string())?;
        ensure!(up >= p, "not monotone at ({a}, {b})");
        ensure!(two_way_posterior(a, a).map_err(|e| e.to_string())? == 0.5, "tie at {a} is not 0.5");
    }
    for (a, b) in [(1e4, -1e4), (-1e4, 1e4), (f64::MAX, -f64::MAX)] {
        let p = two_way_posterior(a, b).map_err(|e| e.to_string())?;
        ensure!(p.is_finite(), "overflow at ({a}, {b})");
    }
    Ok("10000 pairs".into())
}

fn generative_example() -> Check {
    let (one, two) = ((-1.0f64).exp(), (-2.0f64).exp());
    let mut entries = Vec::new();
    for tok in ["x", " y", " z"] {
        entries.push(entry(POS, tok, one));
        entries.push(entry(NEG, tok, two));
    }
    let d = classify_generative(&doc("x y z"), &pair(), &mock(100, entries)).map_err(|e| e.to_string())?;
    let expected = 1.0 / (1.0 + (-3.0f64).exp());
    ensure!((d.s_pos - -3.0).abs() <= 1e-12, "s_pos {}", d.s_pos);
    ensure!((d.s_neg - -6.0).abs() <= 1e-12, "s_neg {}", d.s_neg);
    ensure!((d.p_toxic - expected).abs() <= 1e-12, "p_toxic {}", d.p_toxic);
    ensure!(d.label == Label::Toxic, "label {:?}", d.label);
    Ok(format!("s = ({}, {}), p_toxic = {}", d.s_pos, d.s_neg, d.p_toxic))
}

fn demo_reduction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..100 {
        let (model, d) = random_case(&mut rng);
        let a = classify_generative(&d, &pair(), &model).map_err(|e| e.to_string())?;
        let b = classify_generative_with_demos(&d, &pair(), &[], &model).map_err(|e| e.to_string())?;
        let bits = |x: &toxprompt_core::Decision| (x.s_pos.to_bits(), x.s_neg.to_bits(), x.p_toxic.to_bits(), x.label);
        ensure!(bits(&a) == bits(&b), "case {i} differs: {a:?} vs {b:?}");
    }
    Ok("100 cases bit-equal".into())
}

fn discriminative_scaling() -> Check {
    let template = ClozeTemplate::with_defaults("Question: Is it rude?").map_err(|e| e.to_string())?;
    let p_for = |y: f64, n: f64| -> Result<f64, String> {
        let model = mock(1000, vec![entry("Answer:", " Yes", y), entry("Answer:", " No", n)]);
        classify_discriminative(&doc("some text"), &template, &model)
            .map(|d| d.p_toxic)
            .map_err(|e| e.to_string())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (y, n) = (rng.random_range(1e-4..0.1), rng.random_range(1e-4..0.1));
        let c = rng.random_range(0.05..9.0);
        worst = worst.max((p_for(y, n)? - p_for(c * y, c * n)?).abs());
    }
    ensure!(worst <= 1e-12, "max deviation {worst:e}");
    let example = p_for(0.03, 0.01)?;
    ensure!(example == 0.75, "(0.03, 0.01) gave {example}");
    Ok(format!("max deviation {worst:e}; (0.03, 0.01) -> {example}"))
}

/// Adds a constant to every token log-probability of the wrapped model.
struct Shifted<'a> {
    inner: &'a MockBackend,
    shift: f64,
}

impl LanguageModel for Shifted<'_> {
    fn name(&self) -> &str {
        "shifted"
    }
    fn score_tokens(&self, context: &str, continuation: &str) -> Result<Vec<TokenScore>, BackendError> {
        let mut tokens = self.inner.score_tokens(context, continuation)?;
        for t in &mut tokens {
            t.logprob += self.shift;
        }
        Ok(tokens)
    }
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        self.inner.embed_raw(text)
    }
}

fn shift_invariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..200 {
        let (model, d) = random_case(&mut rng);
        let base = classify_generative(&d, &pair(), &model).map_err(|e| e.to_string())?.label;
        for shift in [0.1, -0.1, 5.0, -5.0] {
            let shifted = Shifted { inner: &model, shift };
            let label = classify_generative(&d, &pair(), &shifted).map_err(|e| e.to_string())?.label;
            ensure!(label == base, "case {i} flips under shift {shift}");
        }
    }
    Ok("200 labels x 4 shifts".into())
}

/// Word-boundary search: non-word characters become single spaces, then
/// each term is looked up padded with spaces.
fn lexicon_oracle(text: &str, terms: &[String]) -> BTreeSet<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '\'' { c } else { ' ' })
        .collect();
    let hay = format!(" {} ", cleaned.split_whitespace().collect::<Vec<_>>().join(" "));
    terms
        .iter()
        .filter(|t| hay.contains(&format!(" {} ", t.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" "))))
        .map(|t| t.to_lowercase())
        .collect()
}

fn lexicon_baseline() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let vocab = [
        "you", "idiot", "idiots", "moron", "nice", "day", "stupid", "face", "shut", "up", "go", "away", "trash",
        "trashy", "clean", "don't", "dont", "hate", "hateful", "love", "kill", "skill", "ass", "class", "pass", "dumb",
    ];
    let seps = [" ", "  ", ", ", "! ", "... ", " - ", "\t"];
    let mut corpus = Vec::new();
    for _ in 0..50 {
        let n = rng.random_range(1..10);
        let mut text = String::new();
        for j in 0..n {
            if j > 0 {
                text.push_str(seps[rng.random_range(0..seps.len())]);
            }
            let w = vocab[rng.random_range(0..vocab.len())];
            text.push_str(&if rng.random_bool(0.2) { w.to_uppercase() } else { w.to_string() });
        }
        corpus.push(text);
    }
    let terms: Vec<String> = [
        "idiot", "moron", "stupid face", "shut up", "go away", "trash", "don't", "hate", "kill", "ass", "dumb",
        "STUPID", "you idiot", "nice day", "clean", "love you", "dumb ass", "hateful", "class", "away trash",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let lexicon = Lexicon::new(terms.clone(), vec![]).map_err(|e| e.to_string())?;
    let mut toxic = 0;
    for (i, text) in corpus.iter().enumerate() {
        let d = Document::new(format!("d{i}"), text, None).unwrap();
        let decision = classify_lexicon(&d, &lexicon);
        let expected = lexicon_oracle(text, &terms);
        ensure!(
            decision.label == Label::from_bool(!expected.is_empty()),
            "doc {i} {text:?}: label {:?}, oracle {expected:?}",
            decision.label
        );
        ensure!(
            lexicon.matches(text).into_iter().collect::<BTreeSet<_>>() == expected,
            "doc {i} {text:?}: matched {:?}, oracle {expected:?}",
            lexicon.matches(text)
        );
        toxic += usize::from(decision.label == Label::Toxic);
    }

    let mut candidates: Vec<String> = vocab.iter().map(|s| s.to_string()).collect();
    candidates.extend(terms.iter().cloned());
    let mut grown = vec![candidates[rng.random_range(0..candidates.len())].clone()];
    let mut flagged = BTreeSet::new();
    for step in 0..100 {
        let lexicon = Lexicon::new(grown.clone(), vec![]).map_err(|e| e.to_string())?;
        let now: BTreeSet<usize> = corpus
            .iter()
            .enumerate()
            .filter(|(i, t)| classify_lexicon(&Document::new(format!("d{i}"), t, None).unwrap(), &lexicon).label == Label::Toxic)
            .map(|(i, _)| i)
            .collect();
        ensure!(now.is_superset(&flagged), "growth step {step} unflagged a document");
        flagged = now;
        grown.push(candidates[rng.random_range(0..candidates.len())].clone());
    }
    Ok(format!("50 docs ({toxic} flagged), 100 growth steps"))
}

fn embedding_baseline() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..1000 {
        let dim = rng.random_range(2..12);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = (rng.random_range(1e-3..1e3), rng.random_range(1e-3..1e3));
        let xs: Vec<f64> = x.iter().map(|v| v * a).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * b).collect();
        let c0 = cosine_similarity(&x, &y).map_err(|e| e.to_string())?;
        let c1 = cosine_similarity(&xs, &ys).map_err(|e| e.to_string())?;
        ensure!((c0 - c1).abs() <= 1e-12, "case {i}: {c0} vs {c1}");
    }
    let with_embeddings = |table: Vec<(&str, Vec<f64>)>| {
        MockBackend::new(
            "emb",
            MockFixture {
                vocab_size: 1,
                entries: vec![],
                embeddings: table.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            },
        )
        .unwrap()
    };
    for i in 0..200 {
        // swapping the first two coordinates of the description leaves the
        // similarity exactly equal when the text weights them equally
        let u = rng.random_range(-1.0..1.0);
        let rest: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut n = p.clone();
        n.swap(0, 1);
        let mut x = vec![u, u];
        x.extend(rest);
        let model = with_embeddings(vec![("text", x), ("pos", p), ("neg", n)]);
        let d = classify_embedding(&doc("text"), "pos", "neg", &model).map_err(|e| e.to_string())?;
        ensure!(d.p_toxic == 0.5 && d.label == Label::NonToxic, "tie case {i}: {d:?}");
    }
    let model = with_embeddings(vec![
        ("toxic post", vec![1.0, 0.0, 0.0]),
        ("kind post", vec![0.0, 1.0, 0.0]),
        ("toxic", vec![1.0, 0.0, 0.0]),
        ("benign", vec![0.0, 1.0, 0.0]),
    ]);
    let t = classify_embedding(&doc("toxic post"), "toxic", "benign", &model).map_err(|e| e.to_string())?;
    let k = classify_embedding(&doc("kind post"), "toxic", "benign", &model).map_err(|e| e.to_string())?;
    ensure!(t.label == Label::Toxic && k.label == Label::NonToxic, "orthogonal case: {t:?} / {k:?}");
    Ok("scale invariance on 1000 pairs, 200 ties, orthogonal case".into())
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0 + 1.0;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn attribution() -> Check {
    // indicator classifier, T = 4, exact enumeration
    let indicator = |t: &str| Ok::<_, ()>(if t.split_whitespace().any(|w| w == "slur") { 0.9 } else { 0.1 });
    let cfg = ExplainConfig {
        n_samples: 16,
        ..ExplainConfig::default()
    };
    let e = explain_text("you are a slur", indicator, &cfg).map_err(|e| e.to_string())?;
    ensure!(e.exhaustive, "T = 4 run was not enumerated");
    let top = e.weights[3];
    ensure!(
        top > 0.0 && e.weights[..3].iter().all(|w| *w < top),
        "indicator weights {:?}",
        e.weights
    );

    // additive classifier recovered with a vanishing ridge
    let tokens = ["w0", "w1", "w2", "w3", "w4", "w5"];
    let coef = [0.3, -0.2, 0.05, 0.0, 0.15, -0.1];
    let additive = |t: &str| {
        let present: BTreeSet<&str> = t.split_whitespace().collect();
        Ok::<_, ()>(0.4 + tokens.iter().zip(coef).filter(|(w, _)| present.contains(*w)).map(|(_, c)| c).sum::<f64>())
    };
    let cfg = ExplainConfig {
        n_samples: 64,
        ridge: 1e-8,
        ..ExplainConfig::default()
    };
    let e = explain_text(&tokens.join(" "), additive, &cfg).map_err(|e| e.to_string())?;
    let worst = e.weights.iter().zip(coef).map(|(w, c)| (w - c).abs()).fold(0.0, f64::max);
    ensure!(worst <= 1e-6, "additive weights off by {worst:e}: {:?}", e.weights);

    // sampled versus enumerated at T = 8, n = 1024: a logistic classifier
    // over keyword indicators with distinct coefficients
    let keywords = ["k0", "k1", "k2", "k3", "k4", "k5", "k6", "k7"];
    let logit = [-2.0, 1.5, 0.3, 3.0, -0.8, 2.2, 0.1, -1.4];
    let graded = |t: &str| {
        let present: BTreeSet<&str> = t.split_whitespace().collect();
        let z: f64 = keywords.iter().zip(logit).filter(|(k, _)| present.contains(*k)).map(|(_, c)| c).sum();
        Ok::<_, ()>(1.0 / (1.0 + (-(z - 1.0)).exp()))
    };
    let text = keywords.join(" ");
    let exact = explain_text(
        &text,
        graded,
        &ExplainConfig {
            n_samples: 256,
            ..ExplainConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let sampled = explain_text(
        &text,
        graded,
        &ExplainConfig {
            n_samples: 1024,
            seed: 11,
            allow_enumeration: false,
            ..ExplainConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    ensure!(exact.exhaustive && !sampled.exhaustive, "modes not as requested");
    let rho = spearman(&exact.weights, &sampled.weights);
    ensure!(rho >= 0.9, "spearman {rho}");
    Ok(format!("indicator top weight {top:.4}, additive error {worst:.1e}, spearman {rho:.3}"))
}

fn end_to_end_http() -> Check {
    let start = Instant::now();
    let dir = fixtures().join("e2e");
    let server = Served::start(&dir.join("mock.jsonl"));
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cache = work.path().join("cache");
    let evaluate = |out: &str| {
        run(bin()
            .env("TOXPROMPT_ENDPOINT_MOCK_HTTP", &server.url)
            .arg("evaluate")
            .arg("--config")
            .arg(dir.join("run.toml"))
            .arg("--out")
            .arg(work.path().join(out))
            .arg("--cache-dir")
            .arg(&cache))
    };
    for out in ["cold", "warm"] {
        let o = evaluate(out);
        ensure!(o.status.success(), "{out} run failed: {}", stderr(&o));
        for name in ["report.json", "report.csv", "report.txt"] {
            let got = fs::read(work.path().join(out).join(name)).map_err(|e| e.to_string())?;
            let want = fs::read(dir.join("golden").join(name)).map_err(|e| e.to_string())?;
            ensure!(got == want, "{out} {name} differs from golden");
        }
        ensure!(
            o.stdout == fs::read(dir.join("golden/report.txt")).unwrap(),
            "{out} printed table differs from golden"
        );
    }
    let cached = walk(&cache);
    ensure!(cached > 0, "cache stayed empty");
    let elapsed = start.elapsed();
    ensure!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    Ok(format!("golden match cold and warm ({cached} cache entries), {:.0} ms", elapsed.as_secs_f64() * 1e3))
}

fn walk(dir: &std::path::Path) -> usize {
    fs::read_dir(dir)
        .map(|rd| {
            rd.flatten()
                .map(|e| if e.path().is_dir() { walk(&e.path()) } else { 1 })
                .sum()
        })
        .unwrap_or(0)
}

fn sweep_grid() -> Check {
    let grid = fixtures().join("grid");
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sweep = |config: &str, out: &str| {
        run(bin()
            .arg("sweep")
            .arg("--config")
            .arg(grid.join(config))
            .arg("--out")
            .arg(work.path().join(out))
            .arg("--cache-dir")
            .arg(work.path().join("cache")))
    };
    let o = sweep("grid.toml", "g1");
    ensure!(o.status.success(), "sweep failed: {}", stderr(&o));
    let csv = fs::read_to_string(work.path().join("g1/sweep.csv")).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = csv.lines().collect();
    ensure!(lines[0] == "model,method,dataset,neg_f1,pos_f1,macro_f1", "header {:?}", lines[0]);
    ensure!(lines.len() == 9, "{} data rows", lines.len() - 1);
    ensure!(lines[1..].iter().all(|l| l.split(',').count() == 6 && !l.ends_with(",,,")), "malformed rows");
    ensure!(stderr(&o).lines().filter(|l| l.starts_with('[')).count() == 8, "progress lines missing");
    let again = sweep("grid.toml", "g2");
    ensure!(again.status.success(), "warm sweep failed");
    let warm = fs::read_to_string(work.path().join("g2/sweep.csv")).map_err(|e| e.to_string())?;
    ensure!(warm == csv, "warm-cache sweep differs");

    let f = sweep("fail.toml", "f");
    ensure!(f.status.success(), "sweep with a failing cell exited {:?}", f.status.code());
    let csv = fs::read_to_string(work.path().join("f/sweep.csv")).map_err(|e| e.to_string())?;
    let empty: Vec<&str> = csv.lines().filter(|l| l.ends_with(",,,")).collect();
    ensure!(csv.lines().count() == 5 && empty == ["down,generative,a,,,"], "rows {csv:?}");
    let meta = fs::read_to_string(work.path().join("f/sweep.meta.json")).map_err(|e| e.to_string())?;
    ensure!(meta.contains("\"model\": \"down\"") && meta.contains("transport"), "note missing: {meta}");
    Ok("8 rows + header, warm rerun identical, failing cell kept with note".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("metric oracle", metric_oracle),
        ("posterior algebra", posterior_algebra),
        ("generative likelihood on mock", generative_example),
        ("demonstration k=0 reduction", demo_reduction),
        ("discriminative renormalization", discriminative_scaling),
        ("shift invariance", shift_invariance),
        ("lexicon baseline", lexicon_baseline),
        ("embedding baseline", embedding_baseline),
        ("attribution", attribution),
        ("end-to-end over HTTP", end_to_end_http),
        ("sweep grid shape (published table values need gpt2-large and licensed data; not reproduced)", sweep_grid),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS  {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL  {name}: panicked");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
