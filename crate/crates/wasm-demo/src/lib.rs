//! Browser demo over a small hand-editable graph.
//!
//! Three operations are exported to JavaScript:
//! - [`dropout`]: draws action-dropout masks for a given action distribution
//!   and compares the empirical sampling frequencies with `π`;
//! - [`Demo::train`] and [`Demo::decode`]: trains a tiny walk policy and beam-decodes a query;
//! - [`Demo::prune`]: shows PageRank scores and which edges a fan-out cap keeps.
//!
//! Every export returns a plain-text table for the page to print.

use std::fmt::Write as _;

use kgwalk::eval::{beam_decode, BeamConfig};
use kgwalk::graph::{DatasetSplits, GraphConfig, KnowledgeGraph, Triple, Vocabulary};
use kgwalk::policy::{PolicyConfig, PolicyNet};
use kgwalk::rng::stream_rng;
use kgwalk::tensor::AdamConfig;
use kgwalk::trainer::{perturb_distribution, train, TrainConfig};
use rand::Rng;
use wasm_bindgen::prelude::*;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Parses `subject relation object` lines (tab or space separated, `#` comments).
fn parse_facts(text: &str) -> Result<(Vocabulary, Vec<Triple>), String> {
    let mut vocab = Vocabulary::new();
    let mut facts = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [s, r, o] = parts[..] else {
            return Err(format!("line {}: expected `subject relation object`, got {line:?}", n + 1));
        };
        let t = Triple::new(
            vocab.entity(s).map_err(|e| e.to_string())?,
            vocab.relation(r).map_err(|e| e.to_string())?,
            vocab.entity(o).map_err(|e| e.to_string())?,
        );
        if !facts.contains(&t) {
            facts.push(t);
        }
    }
    if facts.is_empty() {
        return Err("no facts given".into());
    }
    vocab.freeze();
    Ok((vocab, facts))
}

fn parse_probs(text: &str) -> Result<Vec<f64>, String> {
    let raw: Vec<f64> = text
        .split([',', ' ', '\t'])
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: {s:?}")))
        .collect::<Result<_, _>>()?;
    let z: f64 = raw.iter().sum();
    if raw.is_empty() || raw.iter().any(|&p| !(p >= 0.0)) || !(z > 0.0) {
        return Err("need non-negative weights with a positive sum".into());
    }
    Ok(raw.into_iter().map(|p| p / z).collect())
}

/// Empirical sampling frequency of each action under action dropout, next to
/// `π` itself and one example mask with its perturbed distribution.
pub fn dropout_table(probs: &str, alpha: f64, epsilon: f64, samples: u32, seed: u64) -> Result<String, String> {
    let pi = parse_probs(probs)?;
    if !(0.0..1.0).contains(&alpha) || !(epsilon > 0.0) || samples == 0 {
        return Err("need 0 ≤ α < 1, ε > 0 and at least one sample".into());
    }
    let mut rng = stream_rng(seed, 0xDE40);
    let mut counts = vec![0u32; pi.len()];
    let mut example = None;
    for _ in 0..samples {
        let (tilde, mask) = perturb_distribution(&pi, alpha, epsilon, &mut rng);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let pick = tilde
            .iter()
            .position(|&p| {
                acc += p;
                u < acc
            })
            .unwrap_or(pi.len() - 1);
        counts[pick] += 1;
        example.get_or_insert((mask, tilde));
    }
    let (mask, tilde) = example.expect("at least one sample");
    let mut out = format!("action\tπ\tfirst mask\tfirst π̃\tsampled share ({samples} draws)\n");
    for k in 0..pi.len() {
        let _ = writeln!(
            out,
            "{k}\t{:.4}\t{}\t{:.4}\t{:.4}",
            pi[k],
            u8::from(mask[k]),
            tilde[k],
            f64::from(counts[k]) / f64::from(samples)
        );
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn dropout(probs: &str, alpha: f64, epsilon: f64, samples: u32, seed: u32) -> Result<String, JsError> {
    dropout_table(probs, alpha, epsilon, samples, u64::from(seed)).map_err(js)
}

/// A toy graph with a small walk policy trained on it.
#[wasm_bindgen]
pub struct Demo {
    splits: DatasetSplits,
    graph: KnowledgeGraph,
    policy: PolicyNet<f32>,
    epochs: usize,
}

impl Demo {
    pub fn from_text(facts: &str, seed: u64) -> Result<Self, String> {
        let (vocab, train) = parse_facts(facts)?;
        let graph = KnowledgeGraph::build(&train, &vocab, &GraphConfig::default()).map_err(|e| e.to_string())?;
        let cfg = PolicyConfig {
            dim: 16,
            hidden: 16,
            lstm_layers: 1,
            ff_dropout: 0.0,
            emb_dropout: 0.0,
        };
        let adam = AdamConfig {
            learning_rate: 0.01,
            ..AdamConfig::default()
        };
        let policy = PolicyNet::new(cfg, vocab.num_entities(), vocab.num_relations(), adam, seed).map_err(|e| e.to_string())?;
        Ok(Self {
            splits: DatasetSplits::new(vocab, train, Vec::new(), Vec::new()),
            graph,
            policy,
            epochs: 0,
        })
    }

    /// Per-epoch loss, mean reward and cumulative unique paths.
    pub fn train_table(&mut self, epochs: u32, alpha: f64) -> Result<String, String> {
        let cfg = TrainConfig {
            path_length: 2,
            action_dropout: alpha,
            batch_size: 16,
            epochs: epochs as usize,
            learning_rate: 0.01,
            rollouts_per_example: 4,
            eval_every: 0,
            seed: self.epochs as u64,
            ..TrainConfig::default()
        };
        let log = train(&self.splits, &self.graph, &mut self.policy, None, &cfg, &mut |_| {}).map_err(|e| e.to_string())?;
        let mut out = String::from("epoch\tloss\tmean reward\tunique paths\n");
        for r in &log.rows {
            let _ = writeln!(out, "{}\t{:.4}\t{:.3}\t{}", self.epochs + r.epoch, r.loss, r.mean_reward, r.unique_paths);
        }
        self.epochs += epochs as usize;
        Ok(out)
    }

    /// Beam-decoded answers to `(source, relation, ?)` with their path probabilities.
    pub fn decode_table(&self, source: &str, relation: &str, path_length: u32, beam_size: u32) -> Result<String, String> {
        let v = &self.splits.vocab;
        let s = v.entity_id(source).ok_or_else(|| format!("unknown entity {source:?}"))?;
        let r = v.relation_id(relation).ok_or_else(|| format!("unknown relation {relation:?}"))?;
        let cfg = BeamConfig {
            beam_size: beam_size as usize,
            path_length: path_length as usize,
        };
        let ranked = beam_decode(&self.policy, &self.graph, &[(s, r)], &cfg).map_err(|e| e.to_string())?;
        let known = self.graph.train_answers().get(s, r);
        let mut out = String::from("rank\tentity\tprobability\tknown answer\n");
        for (i, &(e, lp)) in ranked[0].iter().enumerate() {
            let _ = writeln!(out, "{}\t{}\t{:.4}\t{}", i + 1, v.entity_name(e), lp.exp(), if known.contains(&e) { "yes" } else { "" });
        }
        Ok(out)
    }

    /// PageRank of every entity and the edges kept under a fan-out cap.
    pub fn prune_table(&self, max_out_edges: u32) -> Result<String, String> {
        let cfg = GraphConfig {
            max_out_edges: Some(max_out_edges as usize),
            ..GraphConfig::default()
        };
        let v = &self.splits.vocab;
        let pruned = KnowledgeGraph::build(&self.splits.train, v, &cfg).map_err(|e| e.to_string())?;
        let mut order: Vec<usize> = (0..self.graph.num_entities()).collect();
        let pr = self.graph.pagerank_scores();
        order.sort_by(|&a, &b| pr[b].total_cmp(&pr[a]).then(a.cmp(&b)));
        let mut out = String::from("entity\tPageRank\tkept\tdropped\n");
        for e in order {
            let kept = pruned.actions(e as u32);
            let dropped: Vec<String> = self.graph.actions(e as u32)[1..]
                .iter()
                .filter(|a| !kept.contains(a))
                .map(|&(r, o)| format!("{}→{}", v.relation_name(r), v.entity_name(o)))
                .collect();
            let kept: Vec<String> = kept[1..].iter().map(|&(r, o)| format!("{}→{}", v.relation_name(r), v.entity_name(o))).collect();
            let _ = writeln!(out, "{}\t{:.4}\t{}\t{}", v.entity_name(e as u32), pr[e], kept.join(" "), dropped.join(" "));
        }
        Ok(out)
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(facts: &str, seed: u32) -> Result<Demo, JsError> {
        Self::from_text(facts, u64::from(seed)).map_err(js)
    }

    pub fn train(&mut self, epochs: u32, alpha: f64) -> Result<String, JsError> {
        self.train_table(epochs, alpha).map_err(js)
    }

    pub fn decode(&self, source: &str, relation: &str, path_length: u32, beam_size: u32) -> Result<String, JsError> {
        self.decode_table(source, relation, path_length, beam_size).map_err(js)
    }

    pub fn prune(&self, max_out_edges: u32) -> Result<String, JsError> {
        self.prune_table(max_out_edges).map_err(js)
    }

    pub fn relations(&self) -> String {
        let v = &self.splits.vocab;
        (0..v.num_dataset_relations()).map(|k| v.relation_name(2 + 2 * k as u32)).collect::<Vec<_>>().join(" ")
    }

    pub fn entities(&self) -> String {
        let v = &self.splits.vocab;
        (0..v.num_entities() as u32).map(|e| v.entity_name(e)).collect::<Vec<_>>().join(" ")
    }
}
