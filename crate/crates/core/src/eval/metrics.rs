use std::collections::HashMap;
use std::fmt::Write as _;

use crate::graph::{AnswerIndex, EntityId, RelationId, Triple, Vocabulary};

/// Relations whose mean answer-set size exceeds this are to-many.
pub const TO_MANY_THRESHOLD: f64 = 1.5;

/// Position of `gold` in `ranked` after deleting `other_answers`, counting
/// from 1; `num_entities + 1` if `gold` is absent.
pub fn filtered_rank(ranked: &[EntityId], gold: EntityId, other_answers: &[EntityId], num_entities: usize) -> usize {
    let mut rank = 1;
    for &e in ranked {
        if e == gold {
            return rank;
        }
        if !other_answers.contains(&e) {
            rank += 1;
        }
    }
    num_entities + 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryRecord {
    pub triple: Triple,
    pub rank: usize,
}

/// Per-query filtered ranks and their aggregates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub records: Vec<QueryRecord>,
}

impl EvalReport {
    pub fn from_ranks(triples: &[Triple], ranks: &[usize]) -> Self {
        Self {
            records: triples
                .iter()
                .zip(ranks)
                .map(|(&triple, &rank)| QueryRecord { triple, rank })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Mean reciprocal rank; 0 for an empty report.
    pub fn mrr(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| 1.0 / r.rank as f64).sum::<f64>() / self.records.len() as f64
    }

    pub fn hits(&self, k: usize) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.rank <= k).count() as f64 / self.records.len() as f64
    }

    pub fn subset(&self, keep: impl Fn(&QueryRecord) -> bool) -> Self {
        Self {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    /// `MRR`, `Hits@1`, `Hits@3`, `Hits@10` as percentages.
    pub fn summary_percent(&self) -> [f64; 4] {
        [self.mrr(), self.hits(1), self.hits(3), self.hits(10)].map(|x| 100.0 * x)
    }

    /// Per-query rows: subject, relation, gold, rank, then any slice tags.
    pub fn query_tsv(&self, vocab: &Vocabulary, tags: &dyn Fn(&QueryRecord) -> String) -> String {
        let mut out = String::from("subject\trelation\tgold\trank\ttags\n");
        for r in &self.records {
            let t = r.triple;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                vocab.entity_name(t.subject),
                vocab.relation_name(t.relation),
                vocab.entity_name(t.object),
                r.rank,
                tags(r)
            );
        }
        out
    }

    /// Summary block with metrics scaled by 100.
    pub fn summary_tsv(&self) -> String {
        let [m, h1, h3, h10] = self.summary_percent();
        format!("queries\tMRR\tHits@1\tHits@3\tHits@10\n{}\t{m:.1}\t{h1:.1}\t{h3:.1}\t{h10:.1}\n", self.len())
    }
}

/// Metrics for one slice of a report.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceMetrics {
    pub label: &'static str,
    /// Share of the report's queries in this slice, in percent.
    pub percent: f64,
    /// `None` when the slice is empty.
    pub mrr: Option<f64>,
    pub hits10: Option<f64>,
}

impl SliceMetrics {
    fn of(label: &'static str, slice: &EvalReport, total: usize) -> Self {
        let empty = slice.is_empty();
        Self {
            label,
            percent: if total == 0 { 0.0 } else { 100.0 * slice.len() as f64 / total as f64 },
            mrr: (!empty).then(|| slice.mrr()),
            hits10: (!empty).then(|| slice.hits(10)),
        }
    }

    pub fn tsv_row(&self) -> String {
        let f = |x: Option<f64>| x.map_or("--".to_string(), |v| format!("{:.1}", 100.0 * v));
        format!("{}\t{:.1}\t{}\t{}", self.label, self.percent, f(self.mrr), f(self.hits10))
    }
}

/// `ξ_r`: mean answer-set size over the distinct `(e_s, r)` queries of the
/// evaluated split, with answer sets read from `answers`.
pub fn relation_cardinality(triples: &[Triple], answers: &AnswerIndex) -> HashMap<RelationId, f64> {
    let mut queries: HashMap<RelationId, Vec<EntityId>> = HashMap::new();
    for t in triples {
        let subjects = queries.entry(t.relation).or_default();
        if !subjects.contains(&t.subject) {
            subjects.push(t.subject);
        }
    }
    queries
        .into_iter()
        .map(|(r, subjects)| {
            let total: usize = subjects.iter().map(|&s| answers.get(s, r).len().max(1)).sum();
            (r, total as f64 / subjects.len() as f64)
        })
        .collect()
}

/// Splits a report into to-many and to-one relation classes.
pub fn relation_breakdown(report: &EvalReport, answers: &AnswerIndex) -> [SliceMetrics; 2] {
    let triples: Vec<Triple> = report.records.iter().map(|r| r.triple).collect();
    let xi = relation_cardinality(&triples, answers);
    let many = |r: &QueryRecord| xi[&r.triple.relation] > TO_MANY_THRESHOLD;
    [
        SliceMetrics::of("to-many", &report.subset(many), report.len()),
        SliceMetrics::of("to-one", &report.subset(|r| !many(r)), report.len()),
    ]
}

/// Splits a report by whether `(e_s, r_q)` occurs among the training facts.
pub fn seen_unseen_breakdown(report: &EvalReport, train: &AnswerIndex) -> [SliceMetrics; 2] {
    let seen = |r: &QueryRecord| train.has_query(r.triple.subject, r.triple.relation);
    [
        SliceMetrics::of("seen", &report.subset(seen), report.len()),
        SliceMetrics::of("unseen", &report.subset(|r| !seen(r)), report.len()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng as _;

    #[test]
    fn rank_examples() {
        assert_eq!(filtered_rank(&[3, 1, 2], 3, &[], 5), 1);
        // Another correct answer ahead of the gold does not count.
        assert_eq!(filtered_rank(&[2, 1, 7], 1, &[2], 9), 1);
        assert_eq!(filtered_rank(&[2, 1], 9, &[], 10), 11);
    }

    #[test]
    fn mrr_of_four_queries() {
        let t = Triple::new(0, 2, 1);
        let r = EvalReport::from_ranks(&[t; 4], &[1, 2, 4, 10]);
        assert!((r.mrr() - 0.4625).abs() < 1e-12);
        assert_eq!(r.hits(1), 0.25);
        assert_eq!(r.hits(3), 0.5);
        assert_eq!(r.hits(10), 1.0);
    }

    #[test]
    fn perfect_ranking() {
        let r = EvalReport::from_ranks(&[Triple::new(0, 2, 1); 3], &[1, 1, 1]);
        assert_eq!(r.summary_percent(), [100.0; 4]);
    }

    #[test]
    fn cardinality_five_thirds_is_to_many() {
        // Three queries of relation 2 with 2, 1 and 2 answers.
        let facts = [
            Triple::new(0, 2, 5),
            Triple::new(0, 2, 6),
            Triple::new(1, 2, 5),
            Triple::new(3, 2, 7),
            Triple::new(3, 2, 8),
        ];
        let answers = AnswerIndex::from_triples(&facts);
        let xi = relation_cardinality(&facts, &answers);
        assert!((xi[&2] - 5.0 / 3.0).abs() < 1e-12);
        let rep = EvalReport::from_ranks(&facts, &[1; 5]);
        let [many, one] = relation_breakdown(&rep, &answers);
        assert_eq!(many.percent, 100.0);
        assert_eq!(one.percent, 0.0);
        assert_eq!(one.mrr, None);
        assert!(one.tsv_row().ends_with("--\t--"));
    }

    #[test]
    fn single_answer_queries_are_to_one() {
        let facts = [Triple::new(0, 2, 5), Triple::new(1, 2, 6)];
        let rep = EvalReport::from_ranks(&facts, &[1, 3]);
        let [many, one] = relation_breakdown(&rep, &AnswerIndex::from_triples(&facts));
        assert_eq!((many.percent, one.percent), (0.0, 100.0));
    }

    #[test]
    fn seen_means_shared_subject_and_relation() {
        let train = AnswerIndex::from_triples(&[Triple::new(0, 2, 9)]);
        let rep = EvalReport::from_ranks(&[Triple::new(0, 2, 4), Triple::new(1, 2, 9)], &[1, 2]);
        let [seen, unseen] = seen_unseen_breakdown(&rep, &train);
        assert_eq!(seen.percent, 50.0);
        assert_eq!(seen.mrr, Some(1.0));
        assert_eq!(unseen.mrr, Some(0.5));
    }

    fn scan_rank(ranked: &[EntityId], gold: EntityId, others: &[EntityId], n: usize) -> usize {
        let kept: Vec<EntityId> = ranked.iter().copied().filter(|e| *e == gold || !others.contains(e)).collect();
        kept.iter().position(|&e| e == gold).map_or(n + 1, |p| p + 1)
    }

    #[test]
    fn matches_scan_oracle_on_random_cases() {
        let mut rng = stream_rng(41, 0);
        for _ in 0..1000 {
            let n = rng.random_range(1..40usize);
            let mut ranked: Vec<EntityId> = (0..n as u32).collect();
            ranked.shuffle(&mut rng);
            ranked.truncate(rng.random_range(0..=n));
            let gold = rng.random_range(0..n as u32);
            let others: Vec<EntityId> = (0..n as u32).filter(|&e| e != gold && rng.random_bool(0.3)).collect();
            assert_eq!(filtered_rank(&ranked, gold, &others, n), scan_rank(&ranked, gold, &others, n));
        }
    }

    proptest! {
        #[test]
        fn removed_answer_positions_do_not_matter(perm in Just((0u32..12).collect::<Vec<_>>()).prop_shuffle(), gold in 0u32..12) {
            let others: Vec<EntityId> = (0..12).filter(|e| e % 3 == 0 && *e != gold).collect();
            let base = filtered_rank(&perm, gold, &others, 12);
            let kept: Vec<EntityId> = perm.iter().copied().filter(|e| !others.contains(e)).collect();
            let mut moved = others.clone();
            moved.extend(&kept);
            prop_assert_eq!(filtered_rank(&moved, gold, &others, 12), base);
            prop_assert_eq!(filtered_rank(&kept, gold, &others, 12), base);
        }

        #[test]
        fn hits_are_monotone_and_mrr_bounded(ranks in proptest::collection::vec(1usize..200, 1..50)) {
            let rep = EvalReport::from_ranks(&vec![Triple::new(0, 2, 1); ranks.len()], &ranks);
            prop_assert!(rep.hits(1) <= rep.hits(3) && rep.hits(3) <= rep.hits(10));
            prop_assert!(rep.mrr() > 0.0 && rep.mrr() <= 1.0);
        }

        #[test]
        fn worsening_one_rank_lowers_mrr(ranks in proptest::collection::vec(1usize..200, 1..50), i in 0usize..50) {
            let i = i % ranks.len();
            let t = vec![Triple::new(0, 2, 1); ranks.len()];
            let mut worse = ranks.clone();
            worse[i] += 1;
            prop_assert!(EvalReport::from_ranks(&t, &worse).mrr() < EvalReport::from_ranks(&t, &ranks).mrr());
        }
    }
}
