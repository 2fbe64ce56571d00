//! Acceptance checks, one line per criterion. Runs without a test harness so
//! the PASS/FAIL lines always show up in `cargo test` output.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use chrono::{TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spoilkit_core::cleaner::{clean_corpus, RuleSet};
use spoilkit_core::corpus::{ingest_records, ClickbaitPost, Corpus, DumpRecord, Source};
use spoilkit_core::dataset::{
    export_extractive, part_sizes, split_corpus, DataSplit, DatasetError, ExportOptions, Part, SquadFile,
};
use spoilkit_core::evalrun::{
    evaluate_all, parse_csv_report, references_for, render_report, PredictionSet, ReportFormat,
};
use spoilkit_core::dataset::PredictionRecord;
use spoilkit_core::metrics::{
    rouge_l, rouge_n, semantic_score, HashedProvider, MetricRegistry, MetricTriple, OneHotProvider,
};
use spoilkit_core::review::{
    apply_decisions, read_log, replay, CharSpan, DecisionRequest, ReviewAction, ReviewStore,
};
use spoilkit_core::spanlab::{
    find_fuzzy_span, label_example, LabeledExample, LabelerConfig, RejectReason, SpanLabel, SpanMethod, SpanStatus,
};
use spoilkit_core::text::{char_len, char_slice, tokenize, TokenSeq};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn triple_close(a: &MetricTriple, b: &MetricTriple, tol: f64) -> bool {
    close(a.precision, b.precision, tol) && close(a.recall, b.recall, tol) && close(a.f1, b.f1, tol)
}

fn random_tokens(rng: &mut ChaCha8Rng, vocab: &[&str], max_len: usize) -> Vec<String> {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| vocab[rng.gen_range(0..vocab.len())].to_string()).collect()
}

fn seq(tokens: &[String]) -> TokenSeq {
    TokenSeq::from_tokens(tokens.iter().map(String::as_str))
}

// ---------- oracles ----------

/// Clipped n-gram overlap by list matching and removal.
fn naive_rouge_n(cand: &[String], reference: &[String], n: usize) -> MetricTriple {
    let grams = |t: &[String]| -> Vec<Vec<String>> {
        if t.len() < n {
            Vec::new()
        } else {
            (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
        }
    };
    let cg = grams(cand);
    let mut rg = grams(reference);
    let (nc, nr) = (cg.len(), rg.len());
    let mut overlap = 0;
    for g in &cg {
        if let Some(pos) = rg.iter().position(|r| r == g) {
            rg.swap_remove(pos);
            overlap += 1;
        }
    }
    let p = if nc == 0 { 0.0 } else { overlap as f64 / nc as f64 };
    let r = if nr == 0 { 0.0 } else { overlap as f64 / nr as f64 };
    MetricTriple::from_precision_recall(p, r)
}

fn is_subsequence(sub: &[&String], of: &[String]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|s| it.any(|o| o == *s))
}

/// Longest common subsequence by trying every subsequence of `a`.
fn brute_lcs(a: &[String], b: &[String]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let sub: Vec<&String> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
        if is_subsequence(&sub, b) {
            best = size;
        }
    }
    best
}

fn rouge_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let vocab = ["a", "b", "c", "d", "e", "f"];
    for i in 0..1000 {
        let c = random_tokens(&mut rng, &vocab, 50);
        let r = random_tokens(&mut rng, &vocab, 50);
        for n in 1..=2 {
            let got = rouge_n(&seq(&c), &seq(&r), n);
            let want = naive_rouge_n(&c, &r, n);
            ensure(triple_close(&got, &want, 1e-9), || format!("pair {i} rouge-{n}: {got:?} vs {want:?}"))?;
        }
        let c = random_tokens(&mut rng, &vocab, 12);
        let r = random_tokens(&mut rng, &vocab, 12);
        let l = brute_lcs(&c, &r);
        let p = if c.is_empty() { 0.0 } else { l as f64 / c.len() as f64 };
        let rr = if r.is_empty() { 0.0 } else { l as f64 / r.len() as f64 };
        let want = MetricTriple::from_precision_recall(p, rr);
        let got = rouge_l(&seq(&c), &seq(&r));
        ensure(triple_close(&got, &want, 1e-9), || format!("pair {i} rouge-l: {got:?} vs {want:?}"))?;
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.2}s"))?;
    Ok(format!("1000 pairs, exact to 1e-9, {secs:.2}s"))
}

fn metric_fixtures() -> Outcome {
    let cand = tokenize("xylitol, an artificial sweetener");
    let reference = tokenize("Artificial Sweetener.");
    let r1 = rouge_n(&cand, &reference, 1);
    ensure(triple_close(&r1, &MetricTriple::new(0.5, 1.0, 2.0 / 3.0), 1e-12), || format!("rouge-1 {r1:?}"))?;
    let s = tokenize("They focus only on the outcome, not the process");
    let metrics = MetricRegistry::standard(Some(Arc::new(HashedProvider::new(5, 48))));
    for name in metrics.names() {
        let t = metrics.require(name).unwrap().score(&s, &s).map_err(|e| e.to_string())?;
        ensure(triple_close(&t, &MetricTriple::new(1.0, 1.0, 1.0), 1e-6), || format!("{name} identity {t:?}"))?;
    }
    let one_hot = semantic_score(&cand, &reference, &OneHotProvider::with_capacity(16)).map_err(|e| e.to_string())?;
    ensure(one_hot.recall == 1.0 && one_hot.precision == 0.5, || format!("one-hot {one_hot:?}"))?;
    Ok("rouge-1 (0.5, 1, 2/3); identity (1,1,1) on 4 metrics".into())
}

fn semantic_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let vocab = ["red", "green", "blue", "cyan", "teal", "plum", "gold", "jade", "ruby", "onyx"];
    let one_hot = OneHotProvider::with_capacity(vocab.len());
    let hashed = HashedProvider::new(99, 32);
    for i in 0..1000 {
        let mut c = random_tokens(&mut rng, &vocab, 15);
        let mut r = random_tokens(&mut rng, &vocab, 15);
        if c.is_empty() || r.is_empty() {
            c.push("red".into());
            r.push("blue".into());
        }
        let got = semantic_score(&seq(&c), &seq(&r), &one_hot).map_err(|e| e.to_string())?;
        let types: BTreeSet<&String> = c.iter().collect();
        let want = r.iter().filter(|t| types.contains(t)).count() as f64 / r.len() as f64;
        ensure(got.recall == want, || format!("pair {i}: recall {} vs {want}", got.recall))?;

        let h = semantic_score(&seq(&c), &seq(&r), &hashed).map_err(|e| e.to_string())?;
        ensure(h.in_unit_range(), || format!("pair {i}: out of range {h:?}"))?;
        c.shuffle(&mut rng);
        r.shuffle(&mut rng);
        let hp = semantic_score(&seq(&c), &seq(&r), &hashed).map_err(|e| e.to_string())?;
        ensure(triple_close(&h, &hp, 1e-12), || format!("pair {i}: permutation changed {h:?} -> {hp:?}"))?;
    }
    Ok("1000 pairs: one-hot recall exact; hashed in [0,1], permutation-invariant to 1e-12".into())
}

const FILLER: &[&str] = &[
    "the", "report", "said", "café", "naïve", "über", "weather", "markets", "were", "calm", "today", "🙂", "and",
    "officials", "noted", "résumé", "growth", "in", "several", "regions",
];
const ANSWER_WORDS: &[&str] = &["xylitol", "Marmalade", "tungsten", "ORIGAMI", "saffron", "cobalt", "quinoa", "Zeppelin"];

fn synthetic_post(rng: &mut ChaCha8Rng, id: usize, copies: usize) -> (ClickbaitPost, Vec<(usize, usize)>) {
    let n_answer = rng.gen_range(1..=6);
    let words: Vec<&str> = (0..n_answer).map(|_| ANSWER_WORDS[rng.gen_range(0..ANSWER_WORDS.len())]).collect();
    let answer = words.join(if rng.gen_bool(0.3) { ", " } else { " " });
    let n_filler = rng.gen_range(5..60);
    let mut parts: Vec<String> = (0..n_filler).map(|_| FILLER[rng.gen_range(0..FILLER.len())].to_string()).collect();
    let mut slots: Vec<usize> = (0..=n_filler).collect();
    slots.shuffle(rng);
    let mut chosen: Vec<usize> = slots.into_iter().take(copies).collect();
    chosen.sort_unstable();
    for (k, slot) in chosen.iter().enumerate() {
        parts.insert(slot + k, answer.clone());
    }
    let context = parts.join(" ");
    let mut spans = Vec::new();
    let mut offset = 0;
    for p in &parts {
        if *p == answer {
            spans.push((offset, offset + char_len(p)));
        }
        offset += char_len(p) + 1;
    }
    let post = ClickbaitPost {
        id: format!("s{id}"),
        source: Source::Reddit,
        question: format!("What is thing {id}?"),
        context,
        answer,
        url: None,
        fetched_at: None,
        noise_flag: None,
    };
    (post, spans)
}

fn span_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = LabelerConfig::default();
    for i in 0..500 {
        let (post, spans) = synthetic_post(&mut rng, i, 1);
        let ex = label_example(&post, &cfg);
        ensure(ex.span.status == SpanStatus::AutoAccepted, || format!("case {i}: {:?}", ex.span))?;
        ensure((ex.span.start, ex.span.end) == spans[0], || {
            format!("case {i}: span {:?} vs {:?}", (ex.span.start, ex.span.end), spans[0])
        })?;
        ensure(char_slice(&post.context, ex.span.start, ex.span.end) == Some(post.answer.as_str()), || {
            format!("case {i}: slice mismatch")
        })?;
    }
    for i in 0..500 {
        let (post, spans) = synthetic_post(&mut rng, i, 2);
        // repeated answer words can make the answer text overlap itself
        if spans.len() != 2 {
            continue;
        }
        let ex = label_example(&post, &cfg);
        ensure(
            ex.span.status == SpanStatus::Rejected && ex.span.reject_reason == Some(RejectReason::AmbiguousMultiple),
            || format!("doubled case {i}: {:?}", ex.span),
        )?;
    }
    Ok("500/500 auto_accepted with exact offsets; 500/500 doubled rejected(ambiguous_multiple)".into())
}

/// Every window enumerated directly, then the same best-first selection.
fn brute_fuzzy(context: &str, answer: &str, cfg: &LabelerConfig) -> Vec<(usize, usize, f64)> {
    let ctx = tokenize(context);
    let ans = tokenize(answer);
    let (n, m) = (ctx.len(), ans.len());
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let lo = m.saturating_sub(cfg.window_slack).max(1);
    let hi = (m + cfg.window_slack).min(n);
    let mut windows = Vec::new();
    for len in lo..=hi {
        for s in 0..=n - len {
            let mut pool: Vec<&String> = ans.tokens.iter().collect();
            let mut overlap = 0;
            for t in &ctx.tokens[s..s + len] {
                if let Some(p) = pool.iter().position(|a| *a == t) {
                    pool.remove(p);
                    overlap += 1;
                }
            }
            let score = (2 * overlap) as f64 / (len + m) as f64;
            if score > 0.0 && score >= cfg.tau - cfg.delta {
                windows.push((s, len, score));
            }
        }
    }
    windows.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut kept: Vec<(usize, usize, f64)> = Vec::new();
    for (s, len, score) in windows {
        if kept.iter().all(|&(ks, kl, _)| s + len <= ks || ks + kl <= s) {
            kept.push((s, len, score));
        }
    }
    kept.into_iter()
        .map(|(s, len, score)| (ctx.offsets[s].start, ctx.offsets[s + len - 1].end, score))
        .collect()
}

fn fuzzy_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let vocab = ["sun", "rain", "wind", "snow", "fog", "hail", "mist", "dew", "ice", "storm", "cloud", "frost"];
    let cfg = LabelerConfig::default();
    let mut total = 0;
    for i in 0..200 {
        let n = rng.gen_range(1..=200);
        let ctx_tokens: Vec<&str> = (0..n).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect();
        let context = ctx_tokens
            .iter()
            .enumerate()
            .map(|(k, t)| if k % 7 == 6 { format!("{t}.") } else { t.to_string() })
            .collect::<Vec<_>>()
            .join(" ");
        let m = rng.gen_range(1..=20);
        let answer_tokens: Vec<&str> = if rng.gen_bool(0.5) && n >= m {
            // a perturbed slice of the context
            let s = rng.gen_range(0..=n - m);
            ctx_tokens[s..s + m]
                .iter()
                .map(|t| if rng.gen_bool(0.2) { vocab[rng.gen_range(0..vocab.len())] } else { t })
                .collect()
        } else {
            (0..m).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect()
        };
        let answer = answer_tokens.join(" ");
        let got: Vec<(usize, usize, f64)> = find_fuzzy_span(&context, &answer, &cfg)
            .into_iter()
            .map(|c| (c.start, c.end, c.score))
            .collect();
        let want = brute_fuzzy(&context, &answer, &cfg);
        ensure(got == want, || format!("pair {i}: {} vs {} candidates", got.len(), want.len()))?;
        total += want.len();
    }
    Ok(format!("200 pairs identical to exhaustive enumeration ({total} candidates)"))
}

fn example_with(id: String, source: Source, status: SpanStatus) -> LabeledExample {
    LabeledExample {
        post: ClickbaitPost {
            id,
            source,
            question: "What?".into(),
            context: "They focus only on the outcome, not the process.".into(),
            answer: "the outcome".into(),
            url: None,
            fetched_at: None,
            noise_flag: None,
        },
        span: SpanLabel {
            start: 19,
            end: 30,
            score: if status == SpanStatus::AutoAccepted { 1.0 } else { 0.8 },
            method: if status == SpanStatus::AutoAccepted { SpanMethod::Exact } else { SpanMethod::Fuzzy },
            status,
            reject_reason: (status == SpanStatus::Rejected).then_some(RejectReason::BelowThreshold),
        },
        review: None,
    }
}

fn split_contract() -> Outcome {
    let mut report = Vec::new();
    for &n in &[10usize, 100, 2538, 1287, 3825] {
        let strata: Vec<(Source, usize)> = if n == 3825 {
            vec![(Source::Reddit, 2538), (Source::Facebook, 1287)]
        } else {
            vec![(Source::Reddit, n)]
        };
        let mut examples = Vec::new();
        for (source, count) in &strata {
            for i in 0..*count {
                examples.push(example_with(format!("{source}-{i:05}"), *source, SpanStatus::AutoAccepted));
            }
        }
        let a = split_corpus(&examples, 42).map_err(|e| e.to_string())?.split;
        let mut shuffled = examples.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(n as u64));
        let b = split_corpus(&shuffled, 42).map_err(|e| e.to_string())?.split;
        ensure(a == b, || format!("n={n}: not deterministic"))?;

        let all: Vec<&String> = a.train.iter().chain(&a.validation).chain(&a.test).collect();
        let unique: BTreeSet<&String> = all.iter().copied().collect();
        ensure(all.len() == n && unique.len() == n, || format!("n={n}: not a partition"))?;

        for (source, count) in &strata {
            let prefix = format!("{source}-");
            let c = |ids: &[String]| ids.iter().filter(|i| i.starts_with(&prefix)).count();
            let got = (c(&a.train), c(&a.validation), c(&a.test));
            ensure(got == part_sizes(*count), || format!("n={n} {source}: {got:?}"))?;
            let tenth = *count as f64 / 10.0;
            ensure(
                (got.1 as f64 - tenth).abs() < 1.0 && (got.2 as f64 - tenth).abs() < 1.0,
                || format!("n={n} {source}: {got:?} not 8/1/1 within rounding"),
            )?;
        }
        report.push(format!("{n}->{}/{}/{}", a.train.len(), a.validation.len(), a.test.len()));
    }
    Ok(report.join(" "))
}

fn pipeline_fixture() -> Result<Vec<LabeledExample>, String> {
    let words = [
        "xylitol", "marmalade", "gravity", "pelicans", "tungsten", "origami", "saffron", "glaciers", "violins", "cobalt",
        "lanterns", "quinoa", "zeppelins", "basalt", "walnuts", "harbors", "meteors", "tulips", "bamboo", "sonnets",
    ];
    let mut parts = Vec::new();
    for (half, source) in [(0usize, Source::Reddit), (1, Source::Facebook)] {
        let records = words[half * 10..half * 10 + 10]
            .iter()
            .enumerate()
            .map(|(i, w)| DumpRecord {
                id: Some(format!("{source}{i}")),
                title: Some(format!("The secret ingredient number {i} will shock you")),
                article: Some(format!(
                    "<div><p>Story {i}.</p><p>It turns out the answer is mostly {w} and patience, \
                     say <b>experts</b>.</p><script>track()</script></div>"
                )),
                answer: Some(format!("Mostly {w} and patience")),
                url: None,
                fetched_at: None,
            })
            .collect();
        parts.push(ingest_records(records, source, &Default::default()));
    }
    let corpus = Corpus::merge(parts).map_err(|e| e.to_string())?;
    let cleaned = clean_corpus(&corpus, &RuleSet::default_rules()).map_err(|e| e.to_string())?;
    Ok(cleaned
        .corpus
        .posts()
        .iter()
        .map(|p| label_example(p, &LabelerConfig::default()))
        .collect())
}

fn end_to_end() -> Outcome {
    let examples = pipeline_fixture()?;
    ensure(examples.len() == 20, || format!("{} posts survived", examples.len()))?;
    let split = split_corpus(&examples, 42).map_err(|e| e.to_string())?.split;
    let refs = references_for(&examples, &split, Part::Test, false).map_err(|e| e.to_string())?;
    let preds = |name: &str, f: &dyn Fn(&str) -> String| {
        PredictionSet::from_records(
            name,
            refs.iter()
                .map(|r| PredictionRecord {
                    id: r.id.clone(),
                    prediction: f(&r.answer),
                })
                .collect(),
        )
        .unwrap()
    };
    let with_provider = MetricRegistry::standard(Some(Arc::new(HashedProvider::new(3, 64))));
    let ceiling = evaluate_all("test", &[preds("oracle", &|a| a.to_string())], &refs, &with_provider)
        .map_err(|e| e.to_string())?;
    let csv = render_report(&ceiling, ReportFormat::Csv);
    let row = &parse_csv_report(&csv).map_err(|e| e.to_string())?[0];
    ensure(row.values.iter().all(|v| *v == Some(100.0)), || format!("ceiling row {row:?}"))?;
    let text = render_report(&ceiling, ReportFormat::TextTable);
    ensure(text.matches("100.00").count() == 12, || format!("table:\n{text}"))?;

    let floor = evaluate_all("test", &[preds("silent", &|_| String::new())], &refs, &MetricRegistry::standard(None))
        .map_err(|e| e.to_string())?;
    let csv = render_report(&floor, ReportFormat::Csv);
    let cells: Vec<&str> = csv.lines().nth(1).unwrap().split(',').skip(1).collect();
    let want: Vec<&str> = [vec!["0.00"; 9], vec!["n/a"; 3]].concat();
    ensure(cells == want, || format!("floor row {cells:?}"))?;
    Ok(format!("{} test examples: 12 x 100.00; floor 9 x 0.00 + 3 x n/a", refs.len()))
}

fn mixed_examples(rng: &mut ChaCha8Rng, count: usize) -> Vec<LabeledExample> {
    (0..count)
        .map(|i| {
            let copies = if i % 5 == 4 { 2 } else { 1 };
            let (mut post, _) = synthetic_post(rng, i, copies);
            if i % 3 == 0 {
                // drop the answer's first word so only a fuzzy match remains
                let rest: Vec<&str> = post.answer.split(' ').collect();
                if rest.len() > 2 {
                    post.answer = format!("{} extra", rest[1..].join(" "));
                }
            }
            label_example(&post, &LabelerConfig::default())
        })
        .collect()
}

fn all_train(examples: &[LabeledExample]) -> DataSplit {
    DataSplit {
        seed: 0,
        train: examples.iter().map(|e| e.id().to_string()).collect(),
        validation: Vec::new(),
        test: Vec::new(),
    }
}

fn random_request(rng: &mut ChaCha8Rng, ex: &LabeledExample) -> DecisionRequest {
    let len = char_len(&ex.post.context);
    match rng.gen_range(0..4) {
        0 => DecisionRequest { action: ReviewAction::Accept, adjusted_span: None, reviewer: "a".into() },
        1 => DecisionRequest { action: ReviewAction::Reject, adjusted_span: None, reviewer: "b".into() },
        2 => {
            let start = rng.gen_range(0..len);
            let end = rng.gen_range(start + 1..=len);
            DecisionRequest {
                action: ReviewAction::Adjust,
                adjusted_span: Some(CharSpan { start, end }),
                reviewer: "c".into(),
            }
        }
        _ => DecisionRequest {
            action: ReviewAction::Adjust,
            adjusted_span: Some(CharSpan { start: len, end: len + 3 }),
            reviewer: "bad".into(),
        },
    }
}

fn export_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let examples = mixed_examples(&mut rng, 300);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("d.jsonl");
    let store = ReviewStore::open(examples.clone(), &log).map_err(|e| e.to_string())?;
    let pending: Vec<LabeledExample> =
        examples.iter().filter(|e| e.span.status == SpanStatus::NeedsReview).cloned().collect();
    for (k, ex) in pending.iter().enumerate() {
        let _ = store.record(ex.id(), random_request(&mut rng, ex), Utc.timestamp_opt(k as i64, 0).unwrap());
    }
    let decisions = read_log(&log, &examples).map_err(|e| e.to_string())?;
    let reviewed = apply_decisions(&examples, &decisions);
    let opts = ExportOptions { include_flagged: false, allow_pending: true };
    let file = export_extractive(&reviewed, &all_train(&reviewed), Part::Train, opts).map_err(|e| e.to_string())?;
    for rec in file.records() {
        let end = rec.answer_start + char_len(&rec.answer_text);
        ensure(char_slice(&rec.context, rec.answer_start, end) == Some(rec.answer_text.as_str()), || {
            format!("{}: slice mismatch", rec.id)
        })?;
    }
    let text = file.to_canonical_string();
    let again = SquadFile::parse(&text).map_err(|e| e.to_string())?.to_canonical_string();
    ensure(text == again, || "round trip changed bytes".into())?;
    Ok(format!("{} entries slice-consistent; round trip byte-identical", file.records().len()))
}

fn review_replay_and_gate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut checked_prefixes = 0;
    for seq_no in 0..100 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let log = dir.path().join("decisions.jsonl");
        let mut examples: Vec<LabeledExample> = (0..8)
            .map(|i| example_with(format!("n{i}"), Source::Reddit, SpanStatus::NeedsReview))
            .collect();
        examples.push(example_with("auto".into(), Source::Reddit, SpanStatus::AutoAccepted));
        examples.push(example_with("rej".into(), Source::Reddit, SpanStatus::Rejected));
        let store = ReviewStore::open(examples.clone(), &log).map_err(|e| e.to_string())?;
        let mut snapshots = vec![store.snapshot()];
        let steps = rng.gen_range(0..25);
        for k in 0..steps {
            let ex = &examples[rng.gen_range(0..8)];
            let when = Utc.timestamp_opt(1_700_000_000 + k as i64, 0).unwrap();
            if store.record(ex.id(), random_request(&mut rng, ex), when).is_ok() {
                snapshots.push(store.snapshot());
            }
        }
        // crash after every prefix of the log
        let text = std::fs::read_to_string(&log).map_err(|e| e.to_string())?;
        let lines: Vec<&str> = text.lines().collect();
        ensure(lines.len() + 1 == snapshots.len(), || format!("sequence {seq_no}: log/decision count mismatch"))?;
        for (k, snapshot) in snapshots.iter().enumerate() {
            let prefix = dir.path().join(format!("prefix{k}.jsonl"));
            let body: String = lines[..k].iter().map(|l| format!("{l}\n")).collect();
            std::fs::write(&prefix, body).map_err(|e| e.to_string())?;
            let rebuilt = replay(&examples, read_log(&prefix, &examples).map_err(|e| e.to_string())?);
            ensure(&rebuilt == snapshot, || format!("sequence {seq_no}: prefix {k} differs"))?;
            checked_prefixes += 1;
        }
        let reopened = ReviewStore::open(examples.clone(), &log).map_err(|e| e.to_string())?;
        ensure(reopened.snapshot() == *snapshots.last().unwrap(), || format!("sequence {seq_no}: reopen differs"))?;

        // export gate
        let state = snapshots.last().unwrap();
        let reviewed = apply_decisions(&examples, &state.latest_decisions());
        let opts = ExportOptions { include_flagged: false, allow_pending: true };
        let file = export_extractive(&reviewed, &all_train(&reviewed), Part::Train, opts).map_err(|e| e.to_string())?;
        let got: BTreeSet<String> = file.records().into_iter().map(|r| r.id).collect();
        let want: BTreeSet<String> = examples
            .iter()
            .filter(|e| match state.latest(e.id()) {
                Some(d) => matches!(d.action, ReviewAction::Accept | ReviewAction::Adjust),
                None => e.span.status == SpanStatus::AutoAccepted,
            })
            .map(|e| e.id().to_string())
            .collect();
        ensure(got == want, || format!("sequence {seq_no}: exported {got:?}, expected {want:?}"))?;
        let strict = export_extractive(&reviewed, &all_train(&reviewed), Part::Train, ExportOptions::default());
        let any_pending = state.pending().next().is_some();
        ensure(any_pending == matches!(strict, Err(DatasetError::UnverifiedSpan(_))), || {
            format!("sequence {seq_no}: pending gate")
        })?;
    }
    Ok(format!("100 sequences, {checked_prefixes} log prefixes replayed identically; gate exact"))
}

fn main() -> ExitCode {
    let checks: [Check; 9] = [
        ("rouge oracle equivalence", rouge_oracle),
        ("metric fixtures", metric_fixtures),
        ("semantic-metric reduction", semantic_reduction),
        ("span-labeler recovery", span_recovery),
        ("fuzzy oracle", fuzzy_oracle),
        ("split contract", split_contract),
        ("end-to-end ceiling/floor", end_to_end),
        ("export self-consistency", export_consistency),
        ("review log replay and export gate", review_replay_and_gate),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let t0 = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let ms = t0.elapsed().as_millis();
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} [{ms} ms]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{ms} ms]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
