use std::path::Path;
use std::str::FromStr;

use crate::graph::{EntityId, RelationId};
use crate::tensor::{read_checkpoint, write_checkpoint, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScorerKind {
    DistMult,
    ComplEx,
}

impl ScorerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScorerKind::DistMult => "distmult",
            ScorerKind::ComplEx => "complex",
        }
    }

    /// Stored columns per embedding for a model dimension `d`.
    pub fn width(self, dim: usize) -> usize {
        match self {
            ScorerKind::DistMult => dim,
            ScorerKind::ComplEx => 2 * dim,
        }
    }
}

impl FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "distmult" => Ok(ScorerKind::DistMult),
            "complex" => Ok(ScorerKind::ComplEx),
            other => Err(Error::config(format!("unknown scorer kind '{other}'"))),
        }
    }
}

/// `Σ_k r[k]·(s[k]·o[k])`; the grouping makes swapping `s` and `o` exact.
pub fn distmult_score(s: &[f32], r: &[f32], o: &[f32]) -> f32 {
    s.iter().zip(r).zip(o).map(|((a, b), c)| b * (a * c)).sum()
}

/// `Re(Σ_k s[k]·r[k]·conj(o[k]))` with each vector stored as `[re | im]`.
pub fn complex_score(s: &[f32], r: &[f32], o: &[f32]) -> f32 {
    let d = s.len() / 2;
    let (sr, si) = s.split_at(d);
    let (rr, ri) = r.split_at(d);
    let (or, oi) = o.split_at(d);
    (0..d)
        .map(|k| {
            let qr = sr[k] * rr[k] - si[k] * ri[k];
            let qi = sr[k] * ri[k] + si[k] * rr[k];
            qr * or[k] + qi * oi[k]
        })
        .sum()
}

pub fn logistic(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// DistMult / ComplEx parameters. Once frozen, nothing mutates them and
/// they can serve concurrent reward queries.
#[derive(Clone, Debug)]
pub struct EmbeddingScorer {
    kind: ScorerKind,
    entity: Tensor<f32>,
    relation: Tensor<f32>,
    frozen: bool,
}

impl EmbeddingScorer {
    /// Unfrozen scorer over `|E| × w` and `|R| × w` tables (`w = d` or `2d`).
    pub fn new(kind: ScorerKind, entity: Tensor<f32>, relation: Tensor<f32>) -> Result<Self> {
        if entity.rank() != 2 || relation.rank() != 2 || entity.cols() != relation.cols() {
            return Err(Error::Shape {
                op: "scorer",
                left: entity.shape().to_vec(),
                right: relation.shape().to_vec(),
            });
        }
        if kind == ScorerKind::ComplEx && entity.cols() % 2 != 0 {
            return Err(Error::contract("ComplEx tables need an even width"));
        }
        Ok(Self {
            kind,
            entity,
            relation,
            frozen: false,
        })
    }

    pub fn freeze(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn kind(&self) -> ScorerKind {
        self.kind
    }

    pub fn num_entities(&self) -> usize {
        self.entity.rows()
    }

    pub fn num_relations(&self) -> usize {
        self.relation.rows()
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ScorerKind::DistMult => self.entity.cols(),
            ScorerKind::ComplEx => self.entity.cols() / 2,
        }
    }

    pub fn entity_table(&self) -> &Tensor<f32> {
        &self.entity
    }

    pub fn relation_table(&self) -> &Tensor<f32> {
        &self.relation
    }

    /// Raw (pre-logistic) score of `(s, r, o)`.
    pub fn score(&self, s: EntityId, r: RelationId, o: EntityId) -> f32 {
        let (es, rr, eo) = (
            self.entity.row(s as usize),
            self.relation.row(r as usize),
            self.entity.row(o as usize),
        );
        match self.kind {
            ScorerKind::DistMult => distmult_score(es, rr, eo),
            ScorerKind::ComplEx => complex_score(es, rr, eo),
        }
    }

    /// Raw scores of `(s, r, o)` for every entity `o`, equal to [`score`](Self::score).
    pub fn score_all(&self, s: EntityId, r: RelationId) -> Vec<f32> {
        let w = self.entity.cols();
        let es = self.entity.row(s as usize);
        let rr = self.relation.row(r as usize);
        match self.kind {
            ScorerKind::DistMult => (0..self.num_entities())
                .map(|o| distmult_score(es, rr, self.entity.row(o)))
                .collect(),
            ScorerKind::ComplEx => {
                let d = w / 2;
                let mut q = vec![0.0; w];
                for k in 0..d {
                    q[k] = es[k] * rr[k] - es[d + k] * rr[d + k];
                    q[d + k] = es[k] * rr[d + k] + es[d + k] * rr[k];
                }
                (0..self.num_entities())
                    .map(|o| self.entity.row(o).iter().zip(&q).map(|(a, b)| a * b).sum())
                    .collect()
            }
        }
    }

    /// `logistic(score)`, the shaped reward for an unobserved terminal.
    pub fn score_prob(&self, s: EntityId, r: RelationId, o: EntityId) -> Result<f32> {
        if !self.frozen {
            return Err(Error::contract("reward queries require a frozen scorer"));
        }
        Ok(logistic(self.score(s, r, o)))
    }

    /// Every entity, by descending score; ties by ascending id.
    pub fn rank(&self, s: EntityId, r: RelationId) -> Vec<(EntityId, f32)> {
        let mut scored: Vec<(EntityId, f32)> = self
            .score_all(s, r)
            .into_iter()
            .enumerate()
            .map(|(i, x)| (i as EntityId, x))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored
    }

    /// Stable hash of the parameter bits.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.kind.as_str().hash(&mut h);
        for x in self.entity.data().iter().chain(self.relation.data()) {
            x.to_bits().hash(&mut h);
        }
        h.finish()
    }

    fn prefix(kind: ScorerKind) -> String {
        format!("scorer.{}.", kind.as_str())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let p = Self::prefix(self.kind);
        write_checkpoint(
            path,
            &[
                (format!("{p}entity"), self.entity.clone()),
                (format!("{p}relation"), self.relation.clone()),
            ],
        )
    }

    /// Loads a checkpoint written by [`save`](Self::save); the result is frozen.
    pub fn load(path: &Path) -> Result<Self> {
        let entries = read_checkpoint(path)?;
        for kind in [ScorerKind::DistMult, ScorerKind::ComplEx] {
            let p = Self::prefix(kind);
            let find = |suffix: &str| entries.iter().find(|(n, _)| *n == format!("{p}{suffix}")).map(|(_, t)| t.clone());
            if let (Some(e), Some(r)) = (find("entity"), find("relation")) {
                return Ok(Self::new(kind, e, r)?.freeze());
            }
        }
        Err(Error::Checkpoint(format!("{} holds no scorer tables", path.display())))
    }
}
