//! End-to-end acceptance run: one PASS / FAIL / SKIP line per criterion.
//!
//! The property suites always run. The dataset-scale criteria train on the
//! bundled UMLS and Kinship data with `configs/*.cfg` and take roughly an hour
//! on one core; set `KGWALK_ACCEPTANCE=quick` to skip them. FB15k-237 is read
//! from `FB15K237_DIR` when set, otherwise a synthetic graph of the same
//! shape stands in for the 5% subsample.

use std::collections::{HashMap, HashSet};
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use kgwalk::embed::{distmult_score, EmbeddingScorer, ScorerKind};
use kgwalk::eval::{beam_decode, filtered_rank, BeamConfig, EvalMode};
use kgwalk::graph::{EntityId, GraphConfig, KnowledgeGraph, RelationId, Triple, Vocabulary, NO_OP};
use kgwalk::policy::{PolicyConfig, PolicyNet};
use kgwalk::rng::stream_rng;
use kgwalk::tensor::{AdamConfig, Tape, Tensor, Var};
use kgwalk::trainer::{
    binary_reward, perturb_distribution, perturb_with_mask, reinforce_loss, rollout_batch, shaped_reward, TrainConfig, WalkChoice,
    WalkId,
};
use kgwalk_cli::{ablate, evaluate, prepare, train_embedding, train_policy, ExperimentConfig, ModelKind, Split, Variant};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

type Check = Result<(bool, String), String>;

#[derive(Default)]
struct Report {
    failed: usize,
}

impl Report {
    fn record(&mut self, name: &str, started: Instant, outcome: Check) {
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok((true, detail)) => println!("PASS  {name}: {detail} [{secs:.0}s]"),
            Ok((false, detail)) => {
                self.failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.0}s]");
            }
            Err(e) => {
                self.failed += 1;
                println!("FAIL  {name}: error: {e} [{secs:.0}s]");
            }
        }
    }

    fn run(&mut self, name: &str, f: impl FnOnce() -> Check) {
        let t = Instant::now();
        let outcome = f();
        self.record(name, t, outcome);
    }

    fn skip(&mut self, name: &str, why: &str) {
        println!("SKIP  {name}: {why}");
    }
}

fn err(e: impl Display) -> String {
    e.to_string()
}

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    if dir.exists() {
        fs::remove_dir_all(&dir).expect("clear scratch directory");
    }
    dir
}

// ---------------------------------------------------------------------------
// Property suites

/// Largest relative error between tape gradients and central differences.
/// Relative error is |a − n| / max(|a|, |n|, 1e-4).
fn fd_rel_error(inputs: &[Tensor<f64>], f: &dyn Fn(&mut Tape<f64>, &[Var]) -> Var) -> f64 {
    let eval = |ins: &[Tensor<f64>]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ins.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).item().unwrap()
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let grads = tape.backward(out).unwrap();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.wrt(vars[k]).map(<[f64]>::to_vec).unwrap_or(vec![0.0; input.numel()]);
        for i in 0..input.numel() {
            let shifted = |d: f64| {
                let mut ins = inputs.to_vec();
                let mut data = ins[k].data().to_vec();
                data[i] += d;
                ins[k] = Tensor::new(input.shape().to_vec(), data).unwrap();
                eval(&ins)
            };
            let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
            worst = worst.max((analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-4));
        }
    }
    worst
}

fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = stream_rng(seed, 0xFD);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// 0 -r-> 1 -s-> 2 and 0 -t-> 2 over four entities.
struct Toy {
    vocab: Vocabulary,
    graph: KnowledgeGraph,
    r: RelationId,
    s: RelationId,
    t: RelationId,
}

fn toy() -> Toy {
    let mut vocab = Vocabulary::new();
    for n in ["a", "b", "c", "d"] {
        vocab.entity(n).unwrap();
    }
    let r = vocab.relation("r").unwrap();
    let s = vocab.relation("s").unwrap();
    let t = vocab.relation("t").unwrap();
    vocab.freeze();
    let train = [Triple::new(0, r, 1), Triple::new(1, s, 2), Triple::new(0, t, 2)];
    let graph = KnowledgeGraph::build(&train, &vocab, &GraphConfig::default()).unwrap();
    Toy { vocab, graph, r, s, t }
}

fn toy_policy(v: &Vocabulary, seed: u64) -> PolicyNet<f64> {
    let cfg = PolicyConfig {
        dim: 2,
        hidden: 2,
        lstm_layers: 1,
        ff_dropout: 0.0,
        emb_dropout: 0.0,
    };
    PolicyNet::new(cfg, v.num_entities(), v.num_relations(), AdamConfig::default(), seed).unwrap()
}

/// DistMult scorer on 1-dim embeddings whose probabilities grow with the object id.
fn graded_scorer(v: &Vocabulary) -> EmbeddingScorer {
    let n = v.num_entities();
    let ent = Tensor::new(vec![n, 1], (0..n).map(|i| 0.3 + 0.4 * i as f32).collect()).unwrap();
    let rel = Tensor::full(&[v.num_relations(), 1], 0.8);
    EmbeddingScorer::new(ScorerKind::DistMult, ent, rel).unwrap().freeze()
}

fn walk_ids(n: usize) -> Vec<WalkId> {
    (0..n as u64).map(|i| WalkId { example: i, rollout: 0 }).collect()
}

fn flat_params(p: &PolicyNet<f64>, g: &kgwalk::tensor::Gradients<f64>) -> Vec<f64> {
    p.store()
        .ids()
        .flat_map(|id| g.param(id).map(<[f64]>::to_vec).unwrap_or(vec![0.0; p.store().value(id).numel()]))
        .collect()
}

type Objective = Box<dyn Fn(&mut Tape<f64>, &[Var]) -> Var>;

fn gradcheck() -> Check {
    let cases: Vec<(&str, Vec<Tensor<f64>>, Objective)> = vec![
        (
            "matmul/tanh/sigmoid",
            vec![random_tensor(&[3, 4], 1), random_tensor(&[4, 2], 2)],
            Box::new(|t, v| {
                let m = t.matmul(v[0], v[1]).unwrap();
                let a = t.tanh(m);
                let b = t.sigmoid(m);
                let p = t.mul(a, b).unwrap();
                t.sum(p)
            }),
        ),
        (
            "lstm cell",
            vec![
                random_tensor(&[2, 3], 3),
                random_tensor(&[2, 2], 4),
                random_tensor(&[2, 2], 5),
                random_tensor(&[3, 8], 6),
                random_tensor(&[2, 8], 7),
                random_tensor(&[8], 8),
            ],
            Box::new(|t, v| {
                let (h, c) = t.lstm_cell(v[0], v[1], v[2], v[3], v[4], v[5]).unwrap();
                let (h2, c2) = t.lstm_cell(v[0], h, c, v[3], v[4], v[5]).unwrap();
                let w = t.constant(random_tensor(&[2, 2], 9));
                let hw = t.mul(h2, w).unwrap();
                let s = t.sum(hw);
                let cs = t.mean(c2);
                t.add(s, cs).unwrap()
            }),
        ),
        (
            "segment log-softmax and gather",
            vec![random_tensor(&[7], 10)],
            Box::new(|t, v| {
                let ls = t.segment_log_softmax(v[0], &[0, 3, 4, 7]).unwrap();
                let g = t.gather(ls, &[1, 3, 6]).unwrap();
                let e = t.exp(ls);
                let ent = t.mul(e, ls).unwrap();
                let seg = t.segment_sum(ent, &[0, 3, 4, 7]).unwrap();
                let a = t.sum(g);
                let b = t.sum(seg);
                t.sub(a, b).unwrap()
            }),
        ),
        (
            "binary cross-entropy",
            vec![random_tensor(&[2, 3], 11)],
            Box::new(|t, v| t.bce_with_logits(v[0], vec![0.9, 0.05, 0.05, 0.05, 0.9, 0.05]).unwrap()),
        ),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, inputs, f) in &cases {
        let e = fd_rel_error(inputs, f.as_ref());
        parts.push(format!("{name} {e:.1e}"));
        worst = worst.max(e);
    }

    // Whole REINFORCE objective with entropy bonus, differentiated wrt every policy parameter.
    let toy = toy();
    let p = toy_policy(&toy.vocab, 5);
    let scorer = graded_scorer(&toy.vocab);
    let cfg = TrainConfig {
        path_length: 2,
        action_dropout: 0.0,
        seed: 1,
        ..TrainConfig::default()
    };
    let q = [Triple::new(0, toy.t, 2), Triple::new(0, toy.r, 1)];
    let paths = [vec![(toy.r, 1), (toy.s, 2)], vec![(toy.t, 2), (Vocabulary::inverse(toy.s), 1)]];
    let loss_of = |p: &PolicyNet<f64>| {
        let mut tape = Tape::new();
        let ro = rollout_batch(&mut tape, p, &toy.graph, &q, &walk_ids(2), WalkChoice::Forced(&paths), &cfg, Some(&scorer)).unwrap();
        let loss = reinforce_loss(&mut tape, &ro, 0.05, 0.1).unwrap();
        let value = tape.value(loss).item().unwrap();
        (value, flat_params(p, &tape.backward(loss).unwrap()))
    };
    let (_, analytic) = loss_of(&p);
    let h = 1e-6;
    let mut policy_worst = 0.0f64;
    let mut k = 0;
    for id in p.store().ids().collect::<Vec<_>>() {
        let value = p.store().value(id).clone();
        for i in 0..value.numel() {
            let at = |d: f64| {
                let mut q = p.clone();
                let mut data = value.data().to_vec();
                data[i] += d;
                q.store_mut().set_value(id, Tensor::new(value.shape().to_vec(), data).unwrap()).unwrap();
                loss_of(&q).0
            };
            let numeric = (at(h) - at(-h)) / (2.0 * h);
            policy_worst = policy_worst.max((analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-4));
            k += 1;
        }
    }
    parts.push(format!("policy loss over {k} parameters {policy_worst:.1e}"));
    worst = worst.max(policy_worst);
    Ok((worst < 1e-4, format!("max relative error {worst:.2e} ({})", parts.join(", "))))
}

/// Every length-`t` walk on the unmasked graph, reduced by max log-probability per terminal.
fn exhaustive(p: &PolicyNet<f64>, g: &KnowledgeGraph, s: EntityId, r: RelationId, t: usize) -> HashMap<EntityId, f64> {
    let mut frontier = vec![(p.init_state(s, r).unwrap(), 0.0)];
    for _ in 0..t {
        let mut next = Vec::new();
        for (st, lp) in &frontier {
            let slate = p.slate(g, st.current).unwrap();
            let dist = p.action_distribution(st, &slate).unwrap();
            for (k, &a) in slate.actions.iter().enumerate() {
                next.push((p.advance(st, &slate, a).unwrap(), lp + dist[k].ln()));
            }
        }
        frontier = next;
    }
    let mut best = HashMap::new();
    for (st, lp) in frontier {
        let e = best.entry(st.current).or_insert(f64::NEG_INFINITY);
        *e = f64::max(*e, lp);
    }
    best
}

fn beam_vs_exhaustive() -> Check {
    let cases = 120;
    let mut mismatches = Vec::new();
    let mut worst = 0.0f64;
    for case in 0..cases {
        let mut rng = stream_rng(case, 0xBEA);
        let n = rng.random_range(2..=6usize);
        let mut v = Vocabulary::new();
        for i in 0..n {
            v.entity(&format!("e{i}")).unwrap();
        }
        let rels: Vec<RelationId> = (0..rng.random_range(1..=3)).map(|i| v.relation(&format!("r{i}")).unwrap()).collect();
        v.freeze();
        let facts: Vec<Triple> = (0..rng.random_range(1..=10))
            .map(|_| Triple::new(rng.random_range(0..n as u32), *rels.choose(&mut rng).unwrap(), rng.random_range(0..n as u32)))
            .collect();
        let g = KnowledgeGraph::build(&facts, &v, &GraphConfig::default()).map_err(err)?;
        let cfg = PolicyConfig {
            dim: 3,
            hidden: 3,
            lstm_layers: 2,
            ff_dropout: 0.0,
            emb_dropout: 0.0,
        };
        let p = PolicyNet::<f64>::new(cfg, v.num_entities(), v.num_relations(), AdamConfig::default(), case).map_err(err)?;
        let t = rng.random_range(1..=3usize);
        let (s, r) = (rng.random_range(0..n as u32), *rels.choose(&mut rng).unwrap());
        let beam = beam_decode(&p, &g, &[(s, r)], &BeamConfig { beam_size: 100_000, path_length: t }).map_err(err)?;
        let want = exhaustive(&p, &g, s, r, t);
        let got: HashMap<EntityId, f64> = beam[0].iter().copied().collect();
        let sorted = beam[0].windows(2).all(|w| w[0].1 >= w[1].1);
        let same_keys = got.len() == beam[0].len() && got.keys().collect::<HashSet<_>>() == want.keys().collect::<HashSet<_>>();
        let gap = want.iter().map(|(e, lp)| got.get(e).map_or(f64::INFINITY, |x| (x - lp).abs())).fold(0.0, f64::max);
        worst = worst.max(gap);
        if !(sorted && same_keys && gap < 1e-9) {
            mismatches.push(case);
        }
    }
    Ok((
        mismatches.is_empty(),
        format!("{cases} random graphs (2-6 entities, T 1-3), max log-prob gap {worst:.1e}, mismatching cases {mismatches:?}"),
    ))
}

/// Actions a training walk may take: the query edge and its inverse are
/// hidden, and other known answers are removed at the last step, the
/// self-loop included unless it is the only move left.
fn permitted(g: &KnowledgeGraph, q: &Triple, current: EntityId, last: bool) -> Vec<(RelationId, EntityId)> {
    let answers = g.train_answers().get(q.subject, q.relation);
    let inv = Vocabulary::inverse(q.relation);
    let kept: Vec<_> = g
        .actions(current)
        .iter()
        .copied()
        .filter(|&(r, e)| {
            let own = r != NO_OP
                && ((current == q.subject && r == q.relation && e == q.object)
                    || (current == q.object && r == inv && e == q.subject));
            !own && !(last && e != q.object && answers.contains(&e))
        })
        .collect();
    if kept.is_empty() {
        vec![(NO_OP, current)]
    } else {
        kept
    }
}

fn reinforce_vs_enumeration() -> Check {
    let toy = toy();
    let p = toy_policy(&toy.vocab, 8);
    let scorer = graded_scorer(&toy.vocab);
    let q = Triple::new(0, toy.t, 2);
    let cfg = TrainConfig {
        path_length: 2,
        action_dropout: 0.0,
        entropy_weight: 0.0,
        seed: 3,
        ..TrainConfig::default()
    };
    let mut walks: Vec<Vec<(RelationId, EntityId)>> = vec![Vec::new()];
    for step in 0..2 {
        walks = walks
            .into_iter()
            .flat_map(|w| {
                let at = w.last().map_or(q.subject, |x| x.1);
                permitted(&toy.graph, &q, at, step == 1).into_iter().map(move |a| {
                    let mut w2 = w.clone();
                    w2.push(a);
                    w2
                })
            })
            .collect();
    }

    // J = Σ_τ P_θ(τ)·R(τ) over every walk, differentiated on the tape.
    let mut tape = Tape::new();
    let ro = rollout_batch(&mut tape, &p, &toy.graph, &vec![q; walks.len()], &walk_ids(walks.len()), WalkChoice::Forced(&walks), &cfg, Some(&scorer))
        .map_err(err)?;
    let total: f64 = tape.value(ro.path_log_prob).data().iter().map(|x| x.exp()).sum();
    let rewards = tape.constant(Tensor::vector(ro.trajectories.iter().map(|t| t.reward).collect()));
    let prob = tape.exp(ro.path_log_prob);
    let weighted = tape.mul(prob, rewards).map_err(err)?;
    let j = tape.sum(weighted);
    let exact = flat_params(&p, &tape.backward(j).map_err(err)?);

    let samples = 10_000;
    let dim = exact.len();
    let (mut sum, mut sq) = (vec![0.0; dim], vec![0.0; dim]);
    for i in 0..samples {
        let mut tape = Tape::new();
        let ro = rollout_batch(
            &mut tape,
            &p,
            &toy.graph,
            &[q],
            &[WalkId { example: i as u64, rollout: 0 }],
            WalkChoice::Sample { epoch: 0 },
            &cfg,
            Some(&scorer),
        )
        .map_err(err)?;
        let loss = reinforce_loss(&mut tape, &ro, 0.0, 0.0).map_err(err)?;
        for (k, g) in flat_params(&p, &tape.backward(loss).map_err(err)?).into_iter().enumerate() {
            sum[k] -= g;
            sq[k] += g * g;
        }
    }
    let n = samples as f64;
    let (mut worst_z, mut stochastic, mut outside) = (0.0f64, 0, 0);
    for k in 0..dim {
        let mean = sum[k] / n;
        let se = ((sq[k] / n - mean * mean).max(0.0) * n / (n - 1.0) / n).sqrt();
        if se < 1e-12 {
            if (mean - exact[k]).abs() > 1e-9 {
                outside += 1;
            }
            continue;
        }
        stochastic += 1;
        let z = (mean - exact[k]).abs() / se;
        worst_z = worst_z.max(z);
        if z > 3.0 {
            outside += 1;
        }
    }
    let ok = walks.len() <= 20 && (total - 1.0).abs() < 1e-12 && outside == 0 && stochastic > 10;
    Ok((
        ok,
        format!(
            "{} walks (total probability {total:.12}), {samples} samples, {stochastic} stochastic coordinates, max |z| {worst_z:.2}, outside 3 SE: {outside}",
            walks.len()
        ),
    ))
}

fn arithmetic_identities() -> Check {
    let eps = 1e-5;
    let mut notes = Vec::new();
    let mut ok = true;
    let mut expect = |what: &str, cond: bool| {
        if !cond {
            ok = false;
            notes.push(what.to_string());
        }
    };

    let pi = [0.7f64, 0.3];
    let got = perturb_with_mask(&pi, &[true, false], eps);
    let oracle = [(0.7 + eps) / (0.7 + 2.0 * eps), eps / (0.7 + 2.0 * eps)];
    expect("masked [0.7, 0.3] gives (0.7+ε, ε)/(0.7+2ε)", (got[0] - oracle[0]).abs() < 1e-15 && (got[1] - oracle[1]).abs() < 1e-15);
    expect("masked [0.7, 0.3] ≈ [0.9999857, 0.0000143]", (got[0] - 0.9999857).abs() < 5e-8 && (got[1] - 0.0000143).abs() < 5e-8);
    let uniform = perturb_with_mask(&[0.6f64, 0.3, 0.1], &[false, false, false], eps);
    expect("empty mask gives uniform", uniform.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    let mut rng = stream_rng(0, 1);
    let (kept, mask) = perturb_distribution(&[0.5f64, 0.2, 0.3], 0.0, eps, &mut rng);
    expect("α = 0 keeps every action", mask.iter().all(|&m| m));
    expect("α = 0 gives (π + ε) / (1 + 3ε)", kept.iter().zip([0.5, 0.2, 0.3]).all(|(&k, p)| (k - (p + eps) / (1.0 + 3.0 * eps)).abs() < 1e-15));
    expect("α = 0 preserves the ordering", kept[0] > kept[2] && kept[2] > kept[1]);

    // Scorer with f(s, r, o) = 0.3 for every triple.
    let mut v = Vocabulary::new();
    for n in ["a", "b", "c"] {
        v.entity(n).unwrap();
    }
    let r = v.relation("r").unwrap();
    v.freeze();
    let logit = (0.3f64 / 0.7).ln() as f32;
    let scorer = EmbeddingScorer::new(ScorerKind::DistMult, Tensor::full(&[3, 1], 1.0), Tensor::full(&[v.num_relations(), 1], logit))
        .map_err(err)?
        .freeze();
    let answers = kgwalk::graph::AnswerIndex::from_triples(&[Triple::new(0, r, 1)]);
    let shaped_hit = shaped_reward(0, r, 1, &answers, Some(&scorer)).map_err(err)?;
    let shaped_miss = shaped_reward(0, r, 2, &answers, Some(&scorer)).map_err(err)?;
    expect("R_b = 1, f = 0.3 gives 1", shaped_hit == 1.0);
    expect("R_b = 0, f = 0.3 gives 0.3", (shaped_miss - 0.3).abs() < 1e-6);
    expect("binary reward on an answer is 1", binary_reward(0, r, 1, &answers) == 1.0);
    expect("binary reward off the answers is 0", binary_reward(0, r, 2, &answers) == 0.0);
    expect("self-loop back to the source is 0", binary_reward(0, r, 0, &answers) == 0.0);
    for o in 0..3 {
        expect("no scorer reduces to binary reward", shaped_reward(0, r, o, &answers, None).map_err(err)? == binary_reward(0, r, o, &answers));
    }
    let detail = if notes.is_empty() {
        format!("π̃ = [{:.7}, {:.7}], shaped rewards {shaped_hit} / {shaped_miss:.6}", got[0], got[1])
    } else {
        format!("violated: {}", notes.join("; "))
    };
    Ok((ok, detail))
}

/// Independent rank oracle: drop the other answers, then find the gold.
fn scan_rank(ranked: &[EntityId], gold: EntityId, others: &[EntityId], n: usize) -> usize {
    let kept: Vec<EntityId> = ranked.iter().copied().filter(|e| *e == gold || !others.contains(e)).collect();
    kept.iter().position(|&e| e == gold).map_or(n + 1, |i| i + 1)
}

fn filtered_rank_vs_scan() -> Check {
    let mut rng = stream_rng(7, 0x5CA);
    let mut bad = 0;
    let mut absent = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=60usize);
        let mut ents: Vec<EntityId> = (0..n as u32).collect();
        ents.shuffle(&mut rng);
        let ranked = &ents[..rng.random_range(0..=n)];
        let gold = rng.random_range(0..n as u32);
        let others: Vec<EntityId> = (0..n as u32).filter(|&e| e != gold && rng.random_bool(0.3)).collect();
        let want = scan_rank(ranked, gold, &others, n);
        absent += usize::from(want == n + 1);
        if filtered_rank(ranked, gold, &others, n) != want {
            bad += 1;
        }
    }
    Ok((bad == 0, format!("1000 random cases ({absent} with the gold outside the list), {bad} disagreements")))
}

fn distmult_symmetry() -> Check {
    let mut rng = stream_rng(11, 0xD15);
    let mut broken = 0;
    for case in 0..1000 {
        let d = 1 + case % 64;
        let mut vec = || (0..d).map(|_| rng.random_range(-3.0f32..3.0)).collect::<Vec<_>>();
        let (s, r, o) = (vec(), vec(), vec());
        if distmult_score(&s, &r, &o).to_bits() != distmult_score(&o, &r, &s).to_bits() {
            broken += 1;
        }
    }
    let ent = Tensor::new(vec![20, 16], (0..320).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap();
    let rel = Tensor::new(vec![6, 16], (0..96).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap();
    let scorer = EmbeddingScorer::new(ScorerKind::DistMult, ent, rel).map_err(err)?;
    for s in 0..20 {
        for r in 0..6 {
            let all = scorer.score_all(s, r);
            for o in 0..20u32 {
                let x = scorer.score(s, r, o);
                if x.to_bits() != scorer.score(o, r, s).to_bits() || x.to_bits() != all[o as usize].to_bits() {
                    broken += 1;
                }
            }
        }
    }
    Ok((broken == 0, format!("bitwise f(s,r,o) = f(o,r,s) on 1000 vector triples and 2400 scorer triples, {broken} violations")))
}

// ---------------------------------------------------------------------------
// Dataset runs

fn dataset_config(name: &str) -> Result<ExperimentConfig, String> {
    let root = workspace();
    let mut cfg = ExperimentConfig::from_file(&root.join("configs").join(format!("{name}.cfg"))).map_err(err)?;
    cfg.set("data_dir", root.join("data").join(name).to_str().unwrap()).map_err(err)?;
    cfg.set("out_dir", scratch(name).to_str().unwrap()).map_err(err)?;
    cfg.resolve().map_err(err)
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

struct UmlsRun {
    test: [f64; 4],
    elapsed: Duration,
    scorer_test_mrr: f64,
    dev_hidden: f64,
    dev_full: f64,
}

fn umls_end_to_end(cfg: &ExperimentConfig) -> Result<UmlsRun, String> {
    let t = Instant::now();
    prepare(cfg).map_err(err)?;
    train_embedding(cfg).map_err(err)?;
    let seeds = train_policy(cfg).map_err(err)?;
    let elapsed = t.elapsed();
    let mut scorer_eval = cfg.clone();
    scorer_eval.model = ModelKind::Scorer;
    scorer_eval.split = Split::Test;
    let scorer_test_mrr = evaluate(&scorer_eval).map_err(err)?.mrr();
    let mut dev = cfg.clone();
    dev.split = Split::Dev;
    dev.mode = EvalMode::HiddenTest;
    let dev_hidden = evaluate(&dev).map_err(err)?.mrr();
    dev.mode = EvalMode::FullKg;
    let dev_full = evaluate(&dev).map_err(err)?.mrr();
    Ok(UmlsRun {
        test: seeds[0].test,
        elapsed,
        scorer_test_mrr,
        dev_hidden,
        dev_full,
    })
}

fn dataset_criteria(report: &mut Report) {
    let umls_cfg = match dataset_config("umls") {
        Ok(c) => c,
        Err(e) => {
            let t = Instant::now();
            for name in ["1 UMLS end-to-end", "3 UMLS ablation ordering", "4 ComplEx UMLS baseline", "5 full-KG dev uplift", "6 path diversity"] {
                report.record(name, t, Err(e.clone()));
            }
            return;
        }
    };
    eprintln!("training UMLS scorer and policy ...");
    let t = Instant::now();
    let run = umls_end_to_end(&umls_cfg);
    match &run {
        Ok(r) => {
            let limit = Duration::from_secs(2 * 3600);
            report.record(
                "1 UMLS end-to-end",
                t,
                Ok((
                    r.test[0] >= 0.85 && r.test[3] >= 0.95 && r.elapsed <= limit,
                    format!(
                        "test MRR {} (≥ 85.0), Hits@1 {}, Hits@3 {}, Hits@10 {} (≥ 95.0), training {:.1} min (≤ 120)",
                        pct(r.test[0]),
                        pct(r.test[1]),
                        pct(r.test[2]),
                        pct(r.test[3]),
                        r.elapsed.as_secs_f64() / 60.0
                    ),
                )),
            );
            let t4 = Instant::now();
            report.record(
                "4 ComplEx UMLS baseline",
                t4,
                Ok((r.scorer_test_mrr >= 0.85, format!("standalone scorer test MRR {} (≥ 85.0)", pct(r.scorer_test_mrr)))),
            );
            report.record(
                "5 full-KG dev uplift",
                t4,
                Ok((
                    r.dev_full >= r.dev_hidden + 0.10,
                    format!("dev MRR full-kg {} vs hidden-test {} (need +10.0)", pct(r.dev_full), pct(r.dev_hidden)),
                )),
            );
        }
        Err(e) => {
            for name in ["1 UMLS end-to-end", "4 ComplEx UMLS baseline", "5 full-KG dev uplift"] {
                report.record(name, t, Err(e.clone()));
            }
        }
    }

    eprintln!("training UMLS ablation variants ...");
    let t = Instant::now();
    let mut abl = umls_cfg.clone();
    abl.variants = vec![Variant::Full, Variant::NoShaping, Variant::NoDropout];
    match ablate(&abl) {
        Ok(rows) => {
            let by = |v: Variant| rows.iter().find(|r| r.variant == v).expect("variant row");
            let (full, no_rs, no_ad) = (by(Variant::Full), by(Variant::NoShaping), by(Variant::NoDropout));
            let gap_ad = full.dev[0] - no_ad.dev[0];
            let gap_rs = full.dev[0] - no_rs.dev[0];
            report.record(
                "3 UMLS ablation ordering",
                t,
                Ok((
                    gap_ad >= 0.05 && gap_rs >= 0.02,
                    format!(
                        "dev MRR full {} / -rs {} / -ad {}; full − (−ad) {} (≥ 5.0), full − (−rs) {} (≥ 2.0)",
                        pct(full.dev[0]),
                        pct(no_rs.dev[0]),
                        pct(no_ad.dev[0]),
                        pct(gap_ad),
                        pct(gap_rs)
                    ),
                )),
            );
            // Both variants train for the same epochs; compare the cumulative
            // counts at the last one and list any earlier epoch below the bar.
            let ratios: Vec<(usize, f64)> = full
                .log
                .rows
                .iter()
                .zip(&no_ad.log.rows)
                .map(|(a, b)| (a.epoch, a.unique_paths as f64 / b.unique_paths.max(1) as f64))
                .collect();
            let below: Vec<String> = ratios.iter().filter(|r| r.1 < 1.5).map(|(e, r)| format!("{e} ({r:.2}×)")).collect();
            let outcome = match (full.log.rows.last(), no_ad.log.rows.last()) {
                (Some(a), Some(b)) if a.epoch == b.epoch => {
                    let ratio = a.unique_paths as f64 / b.unique_paths.max(1) as f64;
                    Ok((
                        ratio >= 1.5,
                        format!(
                            "cumulative unique paths after {} epochs: α = 0.95 {} vs α = 0 {} ({ratio:.2}×, ≥ 1.50); epochs below 1.50×: {}",
                            a.epoch,
                            a.unique_paths,
                            b.unique_paths,
                            if below.is_empty() { "none".to_string() } else { below.join(", ") }
                        ),
                    ))
                }
                _ => Err("the variants did not log matching epochs".to_string()),
            };
            report.record("6 path diversity", t, outcome);
        }
        Err(e) => {
            report.record("3 UMLS ablation ordering", t, Err(err(&e)));
            report.record("6 path diversity", t, Err(err(e)));
        }
    }

    eprintln!("training Kinship scorer and policy ...");
    report.run("2 Kinship end-to-end", || {
        let cfg = dataset_config("kinship")?;
        prepare(&cfg).map_err(err)?;
        train_embedding(&cfg).map_err(err)?;
        let r = &train_policy(&cfg).map_err(err)?[0];
        Ok((r.test[0] >= 0.78, format!("test MRR {} (≥ 78.0), Hits@10 {}", pct(r.test[0]), pct(r.test[3]))))
    });
}

// ---------------------------------------------------------------------------
// FB15k-237 smoke run

/// Keeps every 20th line, a deterministic 5% sample.
fn subsample(src: &Path, dst: &Path) -> Result<usize, String> {
    let text = fs::read_to_string(src).map_err(|e| format!("{}: {e}", src.display()))?;
    let kept: Vec<&str> = text.lines().step_by(20).collect();
    fs::write(dst, kept.join("\n") + "\n").map_err(err)?;
    Ok(kept.len())
}

/// Graph with FB15k-237's entity and relation counts and 5% of its facts;
/// entity popularity is Zipf-like so a few hubs carry most edges.
fn synthetic_fb(dir: &Path) -> Result<(), String> {
    let (entities, relations) = (14_541usize, 237usize);
    let sizes = [("train.txt", 13_606usize), ("valid.txt", 877), ("test.txt", 1_023)];
    let mut rng = stream_rng(237, 0xFB);
    let weights: Vec<f64> = (1..=entities).map(|i| 1.0 / (i as f64).powf(0.8)).collect();
    let total: f64 = weights.iter().sum();
    let cumulative: Vec<f64> = weights.iter().scan(0.0, |acc, w| {
        *acc += w / total;
        Some(*acc)
    }).collect();
    let pick = |rng: &mut kgwalk::rng::Rng| {
        let u: f64 = rng.random();
        cumulative.partition_point(|&c| c < u).min(entities - 1)
    };
    for (file, n) in sizes {
        let mut out = String::new();
        for _ in 0..n {
            let s = pick(&mut rng);
            let o = pick(&mut rng);
            let r = rng.random_range(0..relations);
            out.push_str(&format!("/m/e{s}\t/rel/{r}\t/m/e{o}\n"));
        }
        fs::write(dir.join(file), out).map_err(err)?;
    }
    Ok(())
}

fn fb15k237_smoke() -> Check {
    let root = scratch("fb15k-237");
    let data = root.join("data");
    fs::create_dir_all(&data).map_err(err)?;
    let source = match std::env::var_os("FB15K237_DIR") {
        Some(dir) => {
            let dir = PathBuf::from(dir);
            for (src, dst) in [("train.txt", "train.txt"), ("valid.txt", "valid.txt"), ("test.txt", "test.txt")] {
                subsample(&dir.join(src), &data.join(dst))?;
            }
            format!("5% of {}", dir.display())
        }
        None => {
            synthetic_fb(&data)?;
            "synthetic stand-in (set FB15K237_DIR for the real data)".to_string()
        }
    };
    let mut cfg = ExperimentConfig::default();
    let text = format!(
        "data_dir = {}\nout_dir = {}\ndataset = fb15k-237\nembed_dim = 32\nembed_epochs = 1\npolicy_dim = 32\npolicy_hidden = 32\n\
         lstm_layers = 3\npath_length = 3\nepochs = 1\ndev_limit = 200\nbeam_size = 64\nseeds = 1\n",
        data.display(),
        root.join("out").display()
    );
    cfg.apply_text(&text, "fb15k-237 smoke").map_err(err)?;
    let cfg = cfg.resolve().map_err(err)?;
    let stats = prepare(&cfg).map_err(err)?;
    let (_, elog) = train_embedding(&cfg).map_err(err)?;
    let seed = &train_policy(&cfg).map_err(err)?[0];
    let row = &seed.log.rows[0];
    let finite = elog.epoch_losses.iter().all(|x| x.is_finite())
        && row.loss.is_finite()
        && row.dev.is_some_and(|d| d.iter().all(|x| x.is_finite()))
        && seed.test.iter().all(|x| x.is_finite());
    Ok((
        finite,
        format!(
            "{source}: {} entities, {} facts, one epoch loss {:.4}, test MRR {} Hits@10 {}",
            stats.entities,
            stats.facts,
            row.loss,
            pct(seed.test[0]),
            pct(seed.test[3])
        ),
    ))
}

fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let quick = std::env::var("KGWALK_ACCEPTANCE").is_ok_and(|v| v == "quick");
    let mut report = Report::default();

    report.run("7a autodiff finite differences", gradcheck);
    report.run("7b beam decode equals exhaustive enumeration", beam_vs_exhaustive);
    report.run("7c REINFORCE estimator vs enumerated gradient", reinforce_vs_enumeration);
    report.run("7d reward and action-dropout arithmetic", arithmetic_identities);
    report.run("7e filtered rank vs scan oracle", filtered_rank_vs_scan);
    report.run("4 DistMult symmetry", distmult_symmetry);
    report.run("FB15k-237 5% smoke run", fb15k237_smoke);

    if quick {
        for name in [
            "1 UMLS end-to-end",
            "2 Kinship end-to-end",
            "3 UMLS ablation ordering",
            "4 ComplEx UMLS baseline",
            "5 full-KG dev uplift",
            "6 path diversity",
        ] {
            report.skip(name, "KGWALK_ACCEPTANCE=quick");
        }
    } else {
        dataset_criteria(&mut report);
    }

    if report.failed == 0 {
        println!("acceptance: all run criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", report.failed);
        ExitCode::FAILURE
    }
}
