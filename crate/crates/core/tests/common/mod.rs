//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;

pub const PLAIN: [&str; 4] = ["a", "b", "c", "d"];
/// Two pairs of tokens sharing a four-character prefix, so the METEOR stem
/// stage fires.
pub const STEMMY: [&str; 4] = ["maison", "maisons", "chat", "chats"];

/// Every symbol sequence of length `len` over `k` symbols in which symbols
/// first appear in increasing order (one representative per relabeling).
pub fn canonical_sequences(len: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(len: usize, k: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for s in 0..=(max + 1).min(k - 1) {
            cur.push(s);
            go(len, k, cur, max.max(s), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if len == 0 {
        out.push(Vec::new());
    } else {
        let mut cur = vec![0];
        go(len, k, &mut cur, 0, &mut out);
    }
    out
}

/// Every sequence of length `len` over `k` symbols.
pub fn all_sequences(len: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..k).map(move |c| {
                    let mut t = s.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
    }
    out
}

/// Splits each sequence into (hypothesis, non-empty reference).
pub fn splits(seq: &[usize]) -> impl Iterator<Item = (Vec<usize>, Vec<usize>)> + '_ {
    (0..seq.len()).map(move |a| (seq[..a].to_vec(), seq[a..].to_vec()))
}

pub fn render(seq: &[usize], alphabet: &[&str; 4]) -> String {
    seq.iter().map(|&s| alphabet[s]).collect::<Vec<_>>().join(" ")
}

pub fn random_seq(rng: &mut impl Rng, min: usize, max: usize) -> Vec<usize> {
    let len = rng.gen_range(min..=max);
    (0..len).map(|_| rng.gen_range(0..4)).collect()
}

fn count<T: PartialEq>(haystack: &[Vec<T>], needle: &[T]) -> usize {
    haystack.iter().filter(|g| g.as_slice() == needle).count()
}

fn grams<T: Clone>(items: &[T], n: usize) -> Vec<Vec<T>> {
    if items.len() < n {
        return Vec::new();
    }
    (0..=items.len() - n).map(|i| items[i..i + n].to_vec()).collect()
}

/// (clipped matches, hypothesis grams, reference grams) for one order.
fn order_stats<T: Clone + PartialEq>(hyp: &[T], reference: &[T], n: usize) -> (usize, usize, usize) {
    let h = grams(hyp, n);
    let r = grams(reference, n);
    let mut distinct: Vec<Vec<T>> = Vec::new();
    for g in &h {
        if !distinct.contains(g) {
            distinct.push(g.clone());
        }
    }
    let matches = distinct.iter().map(|g| count(&h, g).min(count(&r, g))).sum();
    (matches, h.len(), r.len())
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Pooled corpus BLEU, orders 1-4, no smoothing; orders absent on both sides
/// are dropped from the mean.
pub fn bleu_oracle(pairs: &[(String, String)]) -> f64 {
    let mut stats = [(0usize, 0usize, 0usize); 4];
    let (mut hl, mut rl) = (0, 0);
    for (h, r) in pairs {
        let (h, r) = (words(h), words(r));
        hl += h.len();
        rl += r.len();
        for (n, s) in stats.iter_mut().enumerate() {
            let (m, a, b) = order_stats(&h, &r, n + 1);
            s.0 += m;
            s.1 += a;
            s.2 += b;
        }
    }
    let mut product = 1.0f64;
    let mut orders = 0;
    for &(m, h, r) in &stats {
        if h == 0 && r == 0 {
            continue;
        }
        if m == 0 {
            return 0.0;
        }
        product *= m as f64 / h as f64;
        orders += 1;
    }
    if orders == 0 || hl == 0 {
        return 0.0;
    }
    let bp = if hl > rl {
        1.0
    } else {
        (1.0 - rl as f64 / hl as f64).exp()
    };
    100.0 * bp * product.powf(1.0 / orders as f64)
}

/// Sentence BLEU with add-one smoothing above unigrams.
pub fn bleu_sentence_oracle(h: &str, r: &str) -> f64 {
    let (h, r) = (words(h), words(r));
    let (m1, h1, _) = order_stats(&h, &r, 1);
    if m1 == 0 {
        return 0.0;
    }
    let mut product = m1 as f64 / h1 as f64;
    for n in 2..=4 {
        let (m, a, _) = order_stats(&h, &r, n);
        product *= (m + 1) as f64 / (a + 1) as f64;
    }
    let bp = if h.len() > r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / h.len() as f64).exp()
    };
    100.0 * bp * product.powf(0.25)
}

/// Pooled chrF++: character 1-6 grams without whitespace, word 1-2 grams,
/// beta 2, mean over orders present on either side.
pub fn chrf_oracle(pairs: &[(String, String)]) -> f64 {
    let mut stats = [(0usize, 0usize, 0usize); 8];
    for (h, r) in pairs {
        let hc: Vec<char> = h.chars().filter(|c| !c.is_whitespace()).collect();
        let rc: Vec<char> = r.chars().filter(|c| !c.is_whitespace()).collect();
        let (hw, rw) = (words(h), words(r));
        for n in 1..=8 {
            let (m, a, b) = if n <= 6 {
                order_stats(&hc, &rc, n)
            } else {
                order_stats(&hw, &rw, n - 6)
            };
            stats[n - 1].0 += m;
            stats[n - 1].1 += a;
            stats[n - 1].2 += b;
        }
    }
    let mut total = 0.0;
    let mut orders = 0;
    for &(m, h, r) in &stats {
        if h == 0 && r == 0 {
            continue;
        }
        orders += 1;
        if m == 0 {
            continue;
        }
        let p = m as f64 / h as f64;
        let rec = m as f64 / r as f64;
        total += 5.0 * p * rec / (4.0 * p + rec);
    }
    if orders == 0 {
        0.0
    } else {
        100.0 * total / orders as f64
    }
}

fn stem_link(a: &str, b: &str) -> bool {
    a != b && a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count() >= 4
}

/// METEOR segment score by enumerating every one-to-one alignment and keeping
/// the one with most exact matches, then most stem matches, then fewest chunks.
pub fn meteor_oracle(h: &str, r: &str) -> f64 {
    let (h, r) = (words(h), words(r));
    let mut best: Option<(usize, usize, usize)> = None;
    let mut link = vec![None; h.len()];
    fn walk(
        i: usize,
        h: &[String],
        r: &[String],
        link: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut Option<(usize, usize, usize)>,
    ) {
        if i == h.len() {
            let mut exact = 0;
            let mut stem = 0;
            let mut chunks = 0;
            for (k, l) in link.iter().enumerate() {
                if let Some(j) = *l {
                    if h[k] == r[j] {
                        exact += 1;
                    } else {
                        stem += 1;
                    }
                    let continues = k > 0 && j > 0 && link[k - 1] == Some(j - 1);
                    if !continues {
                        chunks += 1;
                    }
                }
            }
            let better = match *best {
                None => true,
                Some((e, s, c)) => (exact, stem) > (e, s) || ((exact, stem) == (e, s) && chunks < c),
            };
            if better {
                *best = Some((exact, stem, chunks));
            }
            return;
        }
        walk(i + 1, h, r, link, used, best);
        for j in 0..r.len() {
            if !used[j] && (h[i] == r[j] || stem_link(&h[i], &r[j])) {
                used[j] = true;
                link[i] = Some(j);
                walk(i + 1, h, r, link, used, best);
                link[i] = None;
                used[j] = false;
            }
        }
    }
    let mut used = vec![false; r.len()];
    walk(0, &h, &r, &mut link, &mut used, &mut best);
    let (exact, stem, chunks) = best.unwrap();
    let m = (exact + stem) as f64;
    if m == 0.0 {
        return 0.0;
    }
    let p = m / h.len() as f64;
    let rec = m / r.len() as f64;
    let fmean = 10.0 * p * rec / (rec + 9.0 * p);
    fmean * (1.0 - 0.5 * (chunks as f64 / m).powi(3))
}

/// Full sort of every entry by (score desc, id asc), then the first `k`.
pub fn knn_oracle(entries: &[(String, Vec<f32>)], query: &[f32], k: usize) -> Vec<(String, f64)> {
    let qn: f64 = query.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let mut scored: Vec<(String, f64)> = entries
        .iter()
        .map(|(id, v)| {
            let s: f64 = query.iter().zip(v).map(|(&a, &b)| (a as f64 / qn) * b as f64).sum();
            (id.clone(), s.clamp(-1.0, 1.0))
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Pairs up to a total length of `max_total` tokens, one per relabeling.
pub fn exhaustive_canonical_pairs(max_total: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    (1..=max_total)
        .flat_map(|len| canonical_sequences(len, 4))
        .flat_map(|s| splits(&s).collect::<Vec<_>>())
        .collect()
}

/// Every pair up to a total length of `max_total` tokens, no relabeling.
pub fn exhaustive_pairs(max_total: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    (1..=max_total)
        .flat_map(|len| all_sequences(len, 4))
        .flat_map(|s| splits(&s).collect::<Vec<_>>())
        .collect()
}

pub fn count_map(items: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for i in items {
        *m.entry(i.as_str()).or_insert(0) += 1;
    }
    m
}

/// Local HTTP server answering POSTs from a fixed script of
/// (status, body) responses; the last entry repeats once the script runs out.
pub struct ScriptedServer {
    pub url: String,
    server: std::sync::Arc<tiny_http::Server>,
    pub seen: std::sync::Arc<std::sync::Mutex<Vec<SeenRequest>>>,
    handle: Option<std::thread::JoinHandle<()>>,
}

#[derive(Debug, Clone)]
pub struct SeenRequest {
    pub body: serde_json::Value,
    pub authorization: Option<String>,
}

impl ScriptedServer {
    pub fn start(script: Vec<(u16, String)>) -> Self {
        let server = std::sync::Arc::new(tiny_http::Server::http("127.0.0.1:0").expect("bind"));
        let url = format!("http://{}/v1", server.server_addr().to_ip().expect("ip address"));
        let seen = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
        let (srv, log) = (server.clone(), seen.clone());
        let handle = std::thread::spawn(move || {
            for (step, mut request) in srv.incoming_requests().enumerate() {
                let mut body = String::new();
                request.as_reader().read_to_string(&mut body).ok();
                let authorization = request
                    .headers()
                    .iter()
                    .find(|h| h.field.equiv("Authorization"))
                    .map(|h| h.value.to_string());
                log.lock().unwrap().push(SeenRequest {
                    body: serde_json::from_str(&body).unwrap_or(serde_json::Value::Null),
                    authorization,
                });
                let (status, text) = script[step.min(script.len() - 1)].clone();
                let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
                let _ = request.respond(
                    tiny_http::Response::from_string(text)
                        .with_status_code(status)
                        .with_header(header),
                );
            }
        });
        ScriptedServer {
            url,
            server,
            seen,
            handle: Some(handle),
        }
    }

    pub fn hits(&self) -> usize {
        self.seen.lock().unwrap().len()
    }
}

impl Drop for ScriptedServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

pub fn chat_reply(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

/// Builds and saves a fallback-embedder index over the French side of `corpus`.
pub fn build_fallback_index(corpus: &std::path::Path, dim: usize, out: &std::path::Path) {
    use lrmt::corpus::{load_corpus, LangPair};
    use lrmt::retrieval::{build_index, embed_batch, BatchOptions, FallbackEmbedder, IndexMeta};
    let corpus = load_corpus(corpus, &LangPair::fr_mo()).unwrap();
    let items: Vec<(String, String)> = corpus.pairs().iter().map(|p| (p.id.clone(), p.fr.clone())).collect();
    let vectors = embed_batch(&items, &FallbackEmbedder { dim }, &BatchOptions::default()).unwrap();
    build_index(
        vectors,
        IndexMeta {
            model: format!("fallback-trigram-{dim}"),
            built_at: 0,
        },
    )
    .unwrap()
    .save(out)
    .unwrap();
}

pub struct RunSpec<'a> {
    pub name: &'a str,
    pub direction: &'a str,
    pub variant: &'a str,
    pub k: usize,
    pub train: &'a std::path::Path,
    pub test: &'a std::path::Path,
    pub index: Option<&'a std::path::Path>,
    pub dim: usize,
    pub extra: &'a str,
}

pub fn experiment_config(spec: &RunSpec<'_>) -> lrmt::experiment::ExperimentConfig {
    let index = spec
        .index
        .map(|p| format!("index = {:?}\n", p.to_str().unwrap()))
        .unwrap_or_default();
    let text = format!(
        "name = {name:?}\nmodel_label = \"MOCK\"\ndirection = {dir:?}\nvariant = {variant:?}\nretrieval_k = {k}\n{extra}\n\
         [corpus]\ntrain = {train:?}\ntest = {test:?}\n{index}\n\
         [backend]\nkind = \"mock\"\nmock = \"reference\"\n\n[embedding]\nkind = \"fallback\"\ndim = {dim}\n",
        name = spec.name,
        dir = spec.direction,
        variant = spec.variant,
        k = spec.k,
        extra = spec.extra,
        train = spec.train.to_str().unwrap(),
        test = spec.test.to_str().unwrap(),
        dim = spec.dim,
    );
    lrmt::experiment::ExperimentConfig::from_toml(&text, std::path::Path::new(".")).unwrap()
}
