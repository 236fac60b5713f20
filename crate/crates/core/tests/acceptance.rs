//! Acceptance suite: one PASS/FAIL line per criterion, each checked against
//! its runtime budget. Runs without the libtest harness.

mod common;

use std::collections::HashMap;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use common::*;
use lrmt::backend::{translate, translate_batch, BackendError, Completion, CompletionBackend, TranslationRequest};
use lrmt::corpus::{load_corpus, LangPair};
use lrmt::experiment::{
    generate_training_manifest, load_score_records, persist_run, render_report, run_experiment, Layout, ModelLabel,
    ScoreRecord, ScoreTable,
};
use lrmt::metrics::{bleu_corpus, chrf_pp, meteor_segment, EvalOptions, MetricKind, SegmentPair};
use lrmt::prompting::{Direction, FewShotPrompt, TemplateRegistry, CHAT_TEMPLATE, PLAIN_TEMPLATE};
use lrmt::retrieval::{build_index, EmbeddingVector, IndexMeta, DEFAULT_K};
use lrmt::retry::RetryPolicy;
use lrmt::standardize::{standardize_corpus, standardize_text, RuleConfig, TextLanguage};
use rand::{rngs::StdRng, seq::SliceRandom, Rng, SeedableRng};

struct Criterion {
    name: &'static str,
    budget: Duration,
    check: fn(),
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "metric oracle suite",
            budget: Duration::from_secs(30),
            check: metric_oracle,
        },
        Criterion {
            name: "standardization golden rows and idempotence",
            budget: Duration::from_secs(5),
            check: standardization,
        },
        Criterion {
            name: "retrieval exactness",
            budget: Duration::from_secs(10),
            check: retrieval_exactness,
        },
        Criterion {
            name: "prompt contract",
            budget: Duration::from_secs(10),
            check: prompt_contract,
        },
        Criterion {
            name: "backend contract",
            budget: Duration::from_secs(20),
            check: backend_contract,
        },
        Criterion {
            name: "report fidelity",
            budget: Duration::from_secs(5),
            check: report_fidelity,
        },
        Criterion {
            name: "manifest fidelity",
            budget: Duration::from_secs(1),
            check: manifest_fidelity,
        },
        Criterion {
            name: "end-to-end offline run",
            budget: Duration::from_secs(30),
            check: end_to_end,
        },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.check));
        let elapsed = start.elapsed();
        let verdict = match outcome {
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(msg)
            }
            Ok(()) if elapsed > c.budget => Err(format!("over budget of {:?}", c.budget)),
            Ok(()) => Ok(()),
        };
        match verdict {
            Ok(()) => println!(
                "PASS {} ({:.2}s, budget {}s)",
                c.name,
                elapsed.as_secs_f64(),
                c.budget.as_secs()
            ),
            Err(msg) => {
                failed += 1;
                println!(
                    "FAIL {} ({:.2}s, budget {}s): {msg}",
                    c.name,
                    elapsed.as_secs_f64(),
                    c.budget.as_secs()
                );
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}

// ------------------------------------------------------------------ metrics

fn metric_oracle() {
    let o = EvalOptions::default();
    let check = |h: &str, r: &str| {
        let pair = SegmentPair::new(h, r);
        let owned = [(h.to_string(), r.to_string())];
        let one = std::slice::from_ref(&pair);
        let bleu = bleu_corpus(one, o).unwrap().corpus_value;
        assert!((bleu - bleu_oracle(&owned)).abs() < 1e-9, "BLEU {h:?} / {r:?}");
        let chrf = chrf_pp(one, o).unwrap().corpus_value;
        assert!((chrf - chrf_oracle(&owned)).abs() < 1e-9, "chrF++ {h:?} / {r:?}");
        let met = meteor_segment(&pair, o);
        assert!((met - meteor_oracle(h, r)).abs() < 1e-9, "METEOR {h:?} / {r:?}");
    };
    for (h, r) in exhaustive_canonical_pairs(8) {
        check(&render(&h, &PLAIN), &render(&r, &PLAIN));
    }
    for (h, r) in exhaustive_pairs(6) {
        check(&render(&h, &STEMMY), &render(&r, &STEMMY));
    }
    let mut rng = StdRng::seed_from_u64(1);
    for i in 0..4000 {
        let alphabet = if i % 2 == 0 { &PLAIN } else { &STEMMY };
        check(
            &render(&random_seq(&mut rng, 0, 8), alphabet),
            &render(&random_seq(&mut rng, 1, 8), alphabet),
        );
    }
    for len in 1..=8 {
        for seq in canonical_sequences(len, 4) {
            let s = render(&seq, &PLAIN);
            let pair = SegmentPair::new(&s, &s);
            let one = std::slice::from_ref(&pair);
            assert_eq!(bleu_corpus(one, o).unwrap().corpus_value, 100.0);
            assert_eq!(chrf_pp(one, o).unwrap().corpus_value, 100.0);
            let m = len as f64;
            assert_eq!(meteor_segment(&pair, o), 1.0 - 0.5 / (m * m * m));
        }
    }
}

// ----------------------------------------------------------- standardization

fn standardization() {
    let before = load_corpus(&fixture("table_std.jsonl"), &LangPair::fr_mo()).unwrap();
    let after = load_corpus(&fixture("table_std_expected.jsonl"), &LangPair::fr_mo()).unwrap();
    let fr = RuleConfig::default_for(TextLanguage::Fr);
    let mo = RuleConfig::default_for(TextLanguage::Mo);
    let (clean, report) = standardize_corpus(&before, &fr, &mo);
    assert_eq!(report.pairs_changed, 3);
    for (got, want) in clean.pairs().iter().zip(after.pairs()) {
        assert_eq!(got.fr, want.fr, "{}", got.id);
        assert_eq!(got.partner, want.partner, "{}", got.id);
    }
    let row3 = &clean.pairs()[2].fr;
    assert!(row3.contains("dix-neuf sous-officiers"), "{row3}");
    assert!(row3.contains("quatre vingt dix-sept hommes"), "{row3}");

    const PIECES: [&str; 34] = [
        "a", "É", "chat", "ô", "19", "97", "0", "7", "1000", "12,5", " ", "  ", "\t", "\u{a0}", "...", "..", "…", "?",
        "!", ":", ";", "«", "»", "\"", "'", "’", "-", ",", ".", "M'", "dix", "(", ")", "\n",
    ];
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..1000 {
        let n = rng.gen_range(0..16);
        let s: String = (0..n).map(|_| *PIECES.choose(&mut rng).unwrap()).collect();
        for cfg in [&fr, &mo] {
            let once = standardize_text(&s, cfg);
            assert_eq!(standardize_text(&once, cfg), once, "not idempotent on {s:?}");
        }
    }
}

// ----------------------------------------------------------------- retrieval

fn retrieval_exactness() {
    assert_eq!(DEFAULT_K, 10);
    let mut rng = StdRng::seed_from_u64(9);
    let mut instances = 0;
    let mut cases: Vec<(usize, usize, usize)> = vec![(200, 16, 10)];
    for _ in 0..120 {
        cases.push((rng.gen_range(1..=500), rng.gen_range(1..=32), rng.gen_range(1..=20)));
    }
    for (n, dim, k) in cases {
        let mut ids: Vec<usize> = (0..n).collect();
        ids.shuffle(&mut rng);
        let coarse = rng.gen_bool(0.5);
        let vectors: Vec<EmbeddingVector> = ids
            .iter()
            .map(|i| {
                let mut v: Vec<f32> = (0..dim)
                    .map(|_| {
                        if coarse {
                            rng.gen_range(-1i32..=1) as f32
                        } else {
                            rng.gen_range(-1.0f32..1.0)
                        }
                    })
                    .collect();
                if v.iter().all(|&x| x == 0.0) {
                    v[0] = 1.0;
                }
                EmbeddingVector::new(format!("p{i:03}"), v)
            })
            .collect();
        let index = build_index(
            vectors,
            IndexMeta {
                model: "t".into(),
                built_at: 0,
            },
        )
        .unwrap();
        let stored: Vec<(String, Vec<f32>)> = index.entries().map(|(id, v)| (id.to_string(), v.to_vec())).collect();
        for _ in 0..3 {
            let mut q: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1i32..=1) as f32).collect();
            if q.iter().all(|&x| x == 0.0) {
                q[0] = 1.0;
            }
            let got: Vec<(String, f64)> = index
                .query_knn(&q, k)
                .unwrap()
                .iter()
                .map(|h| (h.pair_id.to_string(), h.score))
                .collect();
            assert_eq!(got, knn_oracle(&stored, &q, k), "n={n} dim={dim} k={k}");
            instances += 1;
        }
    }
    assert!(instances >= 100);
}

// --------------------------------------------------------------- prompting

fn tricky_text(rng: &mut StdRng) -> String {
    const PIECES: [&str; 16] = [
        "a", "bé", "Munegu", " ", "→", "\n", "\r\n", "\\", "\\n", "{src}", ":", "«", "»", "  ", "\t", "Ô",
    ];
    let n = rng.gen_range(1..10);
    (0..n).map(|_| *PIECES.choose(rng).unwrap()).collect()
}

fn prompt_contract() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture("corpus_50.jsonl");
    let index = dir.path().join("idx.lrix");
    build_fallback_index(&corpus, 64, &index);
    let text = std::fs::read_to_string(&corpus).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let train = dir.path().join("train.jsonl");
    let test = dir.path().join("test.jsonl");
    std::fs::write(&train, lines[..40].join("\n") + "\n").unwrap();
    std::fs::write(&test, lines[40..].join("\n") + "\n").unwrap();
    let held_index = dir.path().join("held.lrix");
    build_fallback_index(&train, 64, &held_index);
    let registry = TemplateRegistry::default();

    // (train, test, index, k, examples expected per prompt)
    let runs = [
        (&train, &test, &held_index, 10, 10),
        (&train, &test, &held_index, 55, 40),
        (&corpus, &corpus, &index, 10, 10),
        (&corpus, &corpus, &index, 80, 49),
    ];
    for (direction, template) in [("fr-mo", PLAIN_TEMPLATE), ("mo-fr", CHAT_TEMPLATE)] {
        for (tr, te, idx, k, expected) in runs {
            let config = experiment_config(&RunSpec {
                name: "prompts",
                direction,
                variant: "rag",
                k,
                train: tr,
                test: te,
                index: Some(idx),
                dim: 64,
                extra: &format!("template_id = {template:?}"),
            });
            let out = run_experiment(&config).unwrap();
            let t = registry.get(template).unwrap();
            for (seg, issued) in out.record.segments.iter().zip(&out.prompts) {
                assert_eq!(issued.prompt.examples.len(), expected, "k={k}");
                assert_eq!(seg.examples.len(), expected);
                assert!(
                    !seg.examples.contains(&seg.query_id),
                    "self-exclusion for {}",
                    seg.query_id
                );
                let parsed = t.parse(&issued.request.full_text(t.separator())).unwrap();
                assert_eq!(parsed, issued.prompt);
            }
        }
    }

    let mut rng = StdRng::seed_from_u64(13);
    let directions = ["fr-mo", "mo-fr", "fr-it", "it-fr"];
    for i in 0..1000 {
        let direction: Direction = directions[i % 4].parse().unwrap();
        let template_id = if i % 2 == 0 { PLAIN_TEMPLATE } else { CHAT_TEMPLATE };
        let examples = (0..rng.gen_range(0..12))
            .map(|_| (tricky_text(&mut rng), tricky_text(&mut rng)))
            .collect();
        let prompt = FewShotPrompt {
            direction,
            examples,
            query: tricky_text(&mut rng),
            template_id: template_id.into(),
        };
        let t = registry.get(template_id).unwrap();
        assert_eq!(t.parse(&t.render(&prompt)).unwrap(), prompt);
    }
}

// ------------------------------------------------------------------ backend

/// Mock that sleeps a pseudo-random time per call, fails on a schedule and
/// tracks concurrency.
struct Instrumented {
    inflight: AtomicUsize,
    peak: AtomicUsize,
    calls: Mutex<HashMap<String, u32>>,
    /// Per query: (retryable failures before success, permanent failure).
    faults: HashMap<String, (u32, bool)>,
    latency_us: HashMap<String, u64>,
}

impl CompletionBackend for Instrumented {
    fn complete(&self, request: &TranslationRequest) -> Result<Completion, BackendError> {
        let now = self.inflight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        let attempt = {
            let mut calls = self.calls.lock().unwrap();
            let c = calls.entry(request.query_id.clone()).or_insert(0);
            *c += 1;
            *c
        };
        std::thread::sleep(Duration::from_micros(self.latency_us[&request.query_id]));
        let (transient, permanent) = self.faults[&request.query_id];
        let out = if permanent {
            Err(BackendError::Service {
                status: 400,
                body: "bad".into(),
                attempts: 1,
            })
        } else if attempt <= transient {
            Err(BackendError::Service {
                status: 503,
                body: "busy".into(),
                attempts: 1,
            })
        } else {
            Ok(Completion {
                text: format!("out {}", request.query_id),
                meta: "instrumented".into(),
            })
        };
        self.inflight.fetch_sub(1, Ordering::SeqCst);
        out
    }

    fn describe(&self) -> String {
        "instrumented".into()
    }
}

fn backend_contract() {
    let mut rng = StdRng::seed_from_u64(21);
    let mut saw_concurrency = false;
    for trial in 0..30 {
        let n = rng.gen_range(1..60);
        let max_inflight = rng.gen_range(1..=8);
        let requests: Vec<TranslationRequest> = (0..n)
            .map(|i| TranslationRequest {
                query_id: format!("t{trial}-q{i}"),
                system: None,
                prompt: format!("prompt {i}"),
                stop: Some("\n".into()),
                max_tokens: 64,
            })
            .collect();
        let mut faults = HashMap::new();
        let mut latency = HashMap::new();
        for r in &requests {
            let roll = rng.gen_range(0..10);
            let fault = match roll {
                0 => (1, false),
                1 => (2, false),
                2 => (5, false),
                3 => (0, true),
                _ => (0, false),
            };
            faults.insert(r.query_id.clone(), fault);
            latency.insert(r.query_id.clone(), rng.gen_range(0..3000));
        }
        let backend = Instrumented {
            inflight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
            calls: Mutex::new(HashMap::new()),
            faults: faults.clone(),
            latency_us: latency,
        };
        let policy = RetryPolicy {
            max_attempts: 3,
            backoff_ms: vec![1, 2],
        };
        let results = match translate_batch(&requests, &backend, &policy, max_inflight) {
            Ok(r) => r,
            Err(BackendError::AllFailed { count, .. }) => {
                assert_eq!(count, n);
                assert!(faults.values().all(|&(t, p)| p || t >= 3));
                continue;
            }
            Err(e) => panic!("unexpected batch error {e}"),
        };
        assert_eq!(results.len(), n);
        assert!(backend.peak.load(Ordering::SeqCst) <= max_inflight);
        saw_concurrency |= backend.peak.load(Ordering::SeqCst) > 1;
        let calls = backend.calls.lock().unwrap();
        for (req, res) in requests.iter().zip(&results) {
            let (transient, permanent) = faults[&req.query_id];
            match res {
                Ok(r) => {
                    assert_eq!(r.query_id, req.query_id, "order preserved");
                    assert_eq!(r.hypothesis, format!("out {}", req.query_id));
                    assert_eq!(r.attempts, transient + 1);
                }
                Err(BackendError::Service {
                    status: 400,
                    attempts: 1,
                    ..
                }) => assert!(permanent),
                Err(BackendError::Service {
                    status: 503,
                    attempts: 3,
                    ..
                }) => assert!(transient >= 3),
                Err(e) => panic!("unexpected error {e}"),
            }
            let expected_calls = if permanent { 1 } else { (transient + 1).min(3) };
            assert_eq!(calls[&req.query_id], expected_calls, "{}", req.query_id);
        }
    }
    assert!(saw_concurrency, "no trial ran requests concurrently");

    // Default schedule: 500 ms then 2000 ms between the three attempts.
    let policy = RetryPolicy::default();
    assert_eq!(policy.max_attempts, 3);
    let backend = Instrumented {
        inflight: AtomicUsize::new(0),
        peak: AtomicUsize::new(0),
        calls: Mutex::new(HashMap::new()),
        faults: HashMap::from([("slow".to_string(), (2, false))]),
        latency_us: HashMap::from([("slow".to_string(), 0)]),
    };
    let request = TranslationRequest {
        query_id: "slow".into(),
        system: None,
        prompt: "p".into(),
        stop: None,
        max_tokens: 64,
    };
    let start = Instant::now();
    let r = translate(&request, &backend, &policy).unwrap();
    let waited = start.elapsed();
    assert_eq!(r.attempts, 3);
    assert!(
        waited >= Duration::from_millis(2500) && waited < Duration::from_millis(4000),
        "{waited:?}"
    );
}

// ------------------------------------------------------------------- report

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn check_table(table: &ScoreTable, bold: &[&[f64]], underline: &[&[f64]]) {
    for (col, (b, u)) in bold.iter().zip(underline).enumerate() {
        assert_eq!(
            sorted(table.bold_values(col)),
            sorted(b.to_vec()),
            "bold in column {col}"
        );
        assert_eq!(
            sorted(table.underlined_values(col)),
            sorted(u.to_vec()),
            "underline in column {col}"
        );
    }
}

fn report_fidelity() {
    let records: Vec<ScoreRecord> = load_score_records(&fixture("table1_scores.jsonl")).unwrap();
    let table = render_report(&records, Layout::BleuMeteor).unwrap();
    check_table(
        &table,
        &[&[35.27], &[58.10], &[53.19], &[74.31]],
        &[
            &[32.83, 35.25, 33.46],
            &[52.67, 58.10, 56.75],
            &[50.79, 53.19, 51.77],
            &[70.04, 74.31, 72.38],
        ],
    );
    let text = table.render();
    for cell in ["**35.27**", "**_58.10_**", "**_53.19_**", "**_74.31_**", "_32.83_"] {
        assert!(text.contains(cell), "{cell} missing from\n{text}");
    }

    let records = load_score_records(&fixture("table2_scores.jsonl")).unwrap();
    let table = render_report(&records, Layout::Chrfpp).unwrap();
    check_table(
        &table,
        &[&[57.90], &[71.89]],
        &[&[57.90, 54.81, 57.32, 55.44], &[67.05, 68.03, 71.89, 69.75]],
    );
}

// ----------------------------------------------------------------- manifest

fn manifest_fidelity() {
    for (label, lr) in [
        (ModelLabel::LyraL, 1e-5),
        (ModelLabel::LyraG, 3e-5),
        (ModelLabel::LyraM, 1e-5),
    ] {
        let m = generate_training_manifest(label);
        let lora = m.lora.as_ref().expect("LoRA block");
        assert_eq!((lora.r, lora.lora_alpha), (16, 16));
        assert_eq!(lora.lora_dropout, 0.0);
        assert_eq!(lora.bias, "none");
        assert_eq!(
            lora.target_modules,
            [
                "q_proj",
                "k_proj",
                "v_proj",
                "o_proj",
                "gate_proj",
                "up_proj",
                "down_proj"
            ]
        );
        assert!(lora.use_rslora);
        assert!(lora.loftq_config.is_none());
        let t = &m.training;
        assert_eq!(t.learning_rate, lr);
        assert_eq!(t.batch_size, 48);
        assert_eq!(t.num_epochs, 10);
        assert_eq!(t.packing, Some(false));
        assert_eq!(t.warmup_steps, Some(100));
        assert_eq!(t.optim.as_deref(), Some("adamw_8bit"));
        assert_eq!(t.weight_decay, Some(0.01));
        assert_eq!(t.lr_scheduler_type.as_deref(), Some("cosine"));
        assert_eq!(t.max_seq_length, Some(2048));
        assert_eq!(t.train_on_completions_only, Some(true));
        assert_eq!(t.early_stopping.monitor, "validation_loss");
    }
    let nllb = generate_training_manifest(ModelLabel::Nllb);
    assert!(nllb.lora.is_none());
    assert_eq!(nllb.training.learning_rate, 1e-5);
    assert_eq!(nllb.training.batch_size, 32);
    assert_eq!(nllb.base_model, "nllb-200-distilled-1.3B");
}

// --------------------------------------------------------------- end to end

fn end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture("corpus_50.jsonl");
    assert_eq!(load_corpus(&corpus, &LangPair::fr_mo()).unwrap().len(), 50);
    let index = dir.path().join("idx.lrix");
    build_fallback_index(&corpus, 256, &index);
    let mut records = Vec::new();
    for direction in ["fr-mo", "mo-fr"] {
        for (variant, idx) in [("base", None), ("rag", Some(index.as_path()))] {
            let config = experiment_config(&RunSpec {
                name: variant,
                direction,
                variant,
                k: DEFAULT_K,
                train: &corpus,
                test: &corpus,
                index: idx,
                dim: 256,
                extra: "",
            });
            let out = run_experiment(&config).unwrap();
            let record = &out.record;
            assert_eq!(record.segments.len(), 50);
            assert!(record
                .segments
                .iter()
                .all(|s| s.error.is_none() && !s.hypothesis.is_empty()));
            assert_eq!(record.scores.len(), 3);
            assert_eq!(record.score(MetricKind::Bleu).unwrap().corpus_value, 100.0);
            assert_eq!(record.score(MetricKind::ChrfPp).unwrap().corpus_value, 100.0);
            assert_eq!(record.retrieval.is_some(), variant == "rag");
            let run_dir = persist_run(&out, &dir.path().join("runs")).unwrap();
            let reloaded = load_score_records(&run_dir.join("scores.json")).unwrap();
            assert_eq!(reloaded, vec![record.score_record()]);
            records.extend(reloaded);
        }
    }
    let table = render_report(&records, Layout::BleuMeteor).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert!(table.render().contains("100.00"));
}
