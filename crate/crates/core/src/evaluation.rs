//! Ranking, discrimination, calibration and text-overlap metrics, plus
//! per-stage latency accounting.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retrieval::tokenize;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("metric undefined on empty input")]
    Empty,
    #[error("metric undefined: only one label class present")]
    SingleClass,
    #[error("score {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("non-finite score {0}")]
    NonFinite(f64),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub predicted: Vec<String>,
    pub gold: BTreeSet<String>,
}

impl RankingRecord {
    pub fn new(
        predicted: Vec<String>,
        gold: impl IntoIterator<Item = String>,
    ) -> Result<Self, MetricError> {
        let gold: BTreeSet<String> = gold.into_iter().collect();
        if gold.is_empty() {
            return Err(MetricError::Parameter(
                "record needs at least one gold id".into(),
            ));
        }
        let unique: BTreeSet<&String> = predicted.iter().collect();
        if unique.len() != predicted.len() {
            return Err(MetricError::Parameter(
                "predicted ids must be unique".into(),
            ));
        }
        Ok(RankingRecord { predicted, gold })
    }

    /// 1-based rank of the first gold hit.
    pub fn first_gold_rank(&self) -> Option<usize> {
        self.predicted
            .iter()
            .position(|p| self.gold.contains(p))
            .map(|i| i + 1)
    }
}

fn check_k(k: usize) -> Result<(), MetricError> {
    if k == 0 {
        return Err(MetricError::Parameter("k must be at least 1".into()));
    }
    Ok(())
}

pub fn recall_at_k(records: &[RankingRecord], k: usize) -> Result<f64, MetricError> {
    check_k(k)?;
    if records.is_empty() {
        return Err(MetricError::Empty);
    }
    let hits = records
        .iter()
        .filter(|r| r.first_gold_rank().is_some_and(|rank| rank <= k))
        .count();
    Ok(hits as f64 / records.len() as f64)
}

pub fn mrr_at_k(records: &[RankingRecord], k: usize) -> Result<f64, MetricError> {
    check_k(k)?;
    if records.is_empty() {
        return Err(MetricError::Empty);
    }
    let total: f64 = records
        .iter()
        .map(|r| match r.first_gold_rank() {
            Some(rank) if rank <= k => 1.0 / rank as f64,
            _ => 0.0,
        })
        .sum();
    Ok(total / records.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredLabel {
    pub score: f64,
    pub label: bool,
}

fn check_scores(data: &[ScoredLabel]) -> Result<(usize, usize), MetricError> {
    if data.is_empty() {
        return Err(MetricError::Empty);
    }
    if let Some(d) = data.iter().find(|d| !d.score.is_finite()) {
        return Err(MetricError::NonFinite(d.score));
    }
    let pos = data.iter().filter(|d| d.label).count();
    let neg = data.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClass);
    }
    Ok((pos, neg))
}

/// Mann–Whitney AUC from mid-ranks; tied pairs count one half.
pub fn roc_auc(data: &[ScoredLabel]) -> Result<f64, MetricError> {
    let (pos, neg) = check_scores(data)?;
    let mut sorted: Vec<&ScoredLabel> = data.iter().collect();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].score == sorted[i].score {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * sorted[i..=j].iter().filter(|d| d.label).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// ROC points `(false positive rate, true positive rate)` from the strictest
/// threshold down, starting at (0, 0).
pub fn roc_curve(data: &[ScoredLabel]) -> Result<Vec<(f64, f64)>, MetricError> {
    let (pos, neg) = check_scores(data)?;
    let mut sorted: Vec<&ScoredLabel> = data.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].score;
        while i < sorted.len() && sorted[i].score == s {
            if sorted[i].label {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub mean_score: f64,
    pub frequency: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Non-empty bins only.
    pub bins: Vec<ReliabilityBin>,
    pub ece: f64,
}

/// Equal-width reliability curve and expected calibration error.
pub fn calibration(data: &[ScoredLabel], bins: usize) -> Result<Calibration, MetricError> {
    if bins == 0 {
        return Err(MetricError::Parameter("need at least one bin".into()));
    }
    if data.is_empty() {
        return Err(MetricError::Empty);
    }
    if let Some(d) = data.iter().find(|d| !(0.0..=1.0).contains(&d.score)) {
        return Err(MetricError::OutOfRange(d.score));
    }
    let mut sums = vec![(0.0, 0usize, 0usize); bins];
    for d in data {
        let b = ((d.score * bins as f64) as usize).min(bins - 1);
        sums[b].0 += d.score;
        sums[b].1 += usize::from(d.label);
        sums[b].2 += 1;
    }
    let total = data.len() as f64;
    let mut out = Vec::new();
    let mut ece = 0.0;
    for (b, (score_sum, positives, count)) in sums.into_iter().enumerate() {
        if count == 0 {
            continue;
        }
        let mean_score = score_sum / count as f64;
        let frequency = positives as f64 / count as f64;
        ece += count as f64 / total * (mean_score - frequency).abs();
        out.push(ReliabilityBin {
            lower: b as f64 / bins as f64,
            upper: (b + 1) as f64 / bins as f64,
            mean_score,
            frequency,
            count,
        });
    }
    Ok(Calibration { bins: out, ece })
}

/// Lowercased alphanumeric tokens.
pub fn text_tokens(text: &str) -> Vec<String> {
    tokenize(text).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped `n`-gram precision times the brevity penalty (single order, no
/// smoothing). The effective reference length is the closest one, shorter
/// on ties.
pub fn bleu_n(candidate: &[String], references: &[Vec<String>], n: usize) -> f64 {
    assert!(n >= 1, "BLEU order must be at least 1");
    if candidate.is_empty() {
        log::warn!("BLEU-{n} of an empty candidate is 0");
        return 0.0;
    }
    if references.is_empty() || candidate.len() < n {
        return 0.0;
    }
    let cand = ngram_counts(candidate, n);
    let mut max_ref: HashMap<&[String], usize> = HashMap::new();
    for r in references {
        for (gram, c) in ngram_counts(r, n) {
            let m = max_ref.entry(gram).or_insert(0);
            *m = (*m).max(c);
        }
    }
    let clipped: usize = cand
        .iter()
        .map(|(gram, c)| (*c).min(max_ref.get(gram).copied().unwrap_or(0)))
        .sum();
    let precision = clipped as f64 / (candidate.len() - n + 1) as f64;
    let c = candidate.len();
    let r = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("non-empty references");
    let bp = if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    precision * bp
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RougeVariant {
    One,
    L,
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Unigram (ROUGE-1) or longest-common-subsequence (ROUGE-L) F1.
pub fn rouge(candidate: &[String], reference: &[String], variant: RougeVariant) -> f64 {
    if candidate.is_empty() && reference.is_empty() {
        log::warn!("ROUGE of two empty texts is 0");
        return 0.0;
    }
    let overlap = match variant {
        RougeVariant::One => {
            let refs = ngram_counts(reference, 1);
            ngram_counts(candidate, 1)
                .iter()
                .map(|(g, c)| (*c).min(refs.get(g).copied().unwrap_or(0)))
                .sum()
        }
        RougeVariant::L => lcs_len(candidate, reference),
    };
    // F1 = 2PR / (P + R) = 2·overlap / (|c| + |r|)
    2.0 * overlap as f64 / (candidate.len() + reference.len()) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "STE")]
    Transition,
    #[serde(rename = "BI-INF")]
    Inference,
    #[serde(rename = "generation")]
    Generation,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Transition, Stage::Inference, Stage::Generation];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Transition => "STE",
            Stage::Inference => "BI-INF",
            Stage::Generation => "generation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSpan {
    pub stage: Stage,
    /// Offset from the start of the turn.
    pub start_ms: f64,
    pub duration_ms: f64,
}

/// Wall-clock spans of the stages of one turn, in execution order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub spans: Vec<StageSpan>,
}

impl StageTimings {
    pub fn duration_ms(&self, stage: Stage) -> f64 {
        self.spans
            .iter()
            .filter(|s| s.stage == stage)
            .map(|s| s.duration_ms)
            .sum()
    }

    /// Stages in the order they ran; each starts after the previous ends.
    pub fn order(&self) -> Option<Vec<Stage>> {
        let ordered = self
            .spans
            .windows(2)
            .all(|w| w[0].start_ms + w[0].duration_ms <= w[1].start_ms);
        ordered.then(|| self.spans.iter().map(|s| s.stage).collect())
    }
}

/// Monotonic stopwatch producing [`StageTimings`].
#[derive(Debug)]
pub struct TurnClock {
    origin: Instant,
    timings: StageTimings,
}

impl Default for TurnClock {
    fn default() -> Self {
        TurnClock::start()
    }
}

impl TurnClock {
    pub fn start() -> Self {
        TurnClock {
            origin: Instant::now(),
            timings: StageTimings::default(),
        }
    }

    pub fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> T) -> T {
        let begin = Instant::now();
        let out = f();
        let end = Instant::now();
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        self.timings.spans.push(StageSpan {
            stage,
            start_ms: ms(begin - self.origin),
            duration_ms: ms(end - begin),
        });
        out
    }

    pub fn finish(self) -> StageTimings {
        self.timings
    }
}

/// One evaluated turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub ranking: RankingRecord,
    pub generated: String,
    pub gold_text: Option<String>,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, usize>,
    /// Mean milliseconds per stage. Kept out of the serialized report so
    /// reports from identical runs are byte-identical.
    #[serde(skip)]
    pub latency_ms: BTreeMap<String, f64>,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn latency_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.latency_ms).expect("latency serializes");
        s.push('\n');
        s
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let width = self
            .metrics
            .keys()
            .chain(self.counts.keys())
            .map(String::len)
            .max()
            .unwrap_or(6)
            .max(6);
        let _ = writeln!(out, "{:<width$}  {:>10}", "metric", "value");
        let _ = writeln!(out, "{}  {}", "-".repeat(width), "-".repeat(10));
        for (name, value) in &self.metrics {
            let _ = writeln!(out, "{name:<width$}  {value:>10.4}");
        }
        for (name, value) in &self.counts {
            let _ = writeln!(out, "{name:<width$}  {value:>10}");
        }
        out
    }

    pub fn latency_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12}  {:>10}", "stage", "mean ms");
        for stage in Stage::ALL {
            if let Some(ms) = self.latency_ms.get(stage.name()) {
                let _ = writeln!(out, "{:<12}  {ms:>10.3}", stage.name());
            }
        }
        out
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }
}

/// Rank metrics, text overlap against available gold responses, and mean
/// stage latency.
pub fn evaluate_run(records: &[RunRecord]) -> Result<MetricReport, MetricError> {
    if records.is_empty() {
        return Err(MetricError::Empty);
    }
    let rankings: Vec<RankingRecord> = records.iter().map(|r| r.ranking.clone()).collect();
    let mut report = MetricReport::default();
    for k in [1, 3, 5] {
        report
            .metrics
            .insert(format!("R@{k}"), recall_at_k(&rankings, k)?);
    }
    for k in [3, 5] {
        report
            .metrics
            .insert(format!("MRR@{k}"), mrr_at_k(&rankings, k)?);
    }
    report.counts.insert("records".into(), records.len());

    let texts: Vec<(Vec<String>, Vec<String>)> = records
        .iter()
        .filter_map(|r| {
            r.gold_text
                .as_ref()
                .map(|g| (text_tokens(&r.generated), text_tokens(g)))
        })
        .collect();
    if !texts.is_empty() {
        let n = texts.len() as f64;
        let mean = |f: &dyn Fn(&[String], &[String]) -> f64| {
            texts.iter().map(|(c, g)| f(c, g)).sum::<f64>() / n
        };
        report
            .metrics
            .insert("BLEU-1".into(), mean(&|c, g| bleu_n(c, &[g.to_vec()], 1)));
        report
            .metrics
            .insert("BLEU-2".into(), mean(&|c, g| bleu_n(c, &[g.to_vec()], 2)));
        report.metrics.insert(
            "ROUGE-1".into(),
            mean(&|c, g| rouge(c, g, RougeVariant::One)),
        );
        report
            .metrics
            .insert("ROUGE-L".into(), mean(&|c, g| rouge(c, g, RougeVariant::L)));
        report.counts.insert("text_records".into(), texts.len());
    }

    for stage in Stage::ALL {
        let total: f64 = records.iter().map(|r| r.timings.duration_ms(stage)).sum();
        report
            .latency_ms
            .insert(stage.name().into(), total / records.len() as f64);
    }
    Ok(report)
}

/// Adds AUC and ECE of transition scores when both classes are present.
pub fn add_transition_metrics(
    report: &mut MetricReport,
    scores: &[ScoredLabel],
) -> Result<(), MetricError> {
    report.counts.insert("scored_turns".into(), scores.len());
    match roc_auc(scores) {
        Ok(auc) => {
            report.metrics.insert("AUC".into(), auc);
        }
        Err(MetricError::SingleClass | MetricError::Empty) => return Ok(()),
        Err(e) => return Err(e),
    }
    report
        .metrics
        .insert("ECE".into(), calibration(scores, 10)?.ece);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        text_tokens(s)
    }

    fn record(predicted: &[&str], gold: &str) -> RankingRecord {
        RankingRecord::new(
            predicted.iter().map(|s| s.to_string()).collect(),
            [gold.to_string()],
        )
        .unwrap()
    }

    #[test]
    fn rank_metric_fixtures() {
        let top = record(&["a", "b", "c"], "a");
        assert_eq!(recall_at_k(std::slice::from_ref(&top), 1).unwrap(), 1.0);
        let fourth = record(&["a", "b", "c", "g", "e"], "g");
        assert_eq!(recall_at_k(std::slice::from_ref(&fourth), 3).unwrap(), 0.0);
        assert_eq!(recall_at_k(&[fourth], 5).unwrap(), 1.0);
        let sixth = record(&["a", "b", "c", "d", "e", "g"], "g");
        assert_eq!(recall_at_k(&[top.clone(), sixth.clone()], 5).unwrap(), 0.5);
        let third = record(&["a", "b", "g"], "g");
        assert_eq!(mrr_at_k(&[third], 5).unwrap(), 1.0 / 3.0);
        assert_eq!(mrr_at_k(&[top], 5).unwrap(), 1.0);
        assert_eq!(mrr_at_k(&[sixth], 5).unwrap(), 0.0);
        assert_eq!(recall_at_k(&[], 1), Err(MetricError::Empty));
    }

    #[test]
    fn first_gold_hit_counts_for_multi_gold() {
        let r = RankingRecord::new(
            vec!["x".into(), "b".into(), "a".into()],
            ["a".to_string(), "b".to_string()],
        )
        .unwrap();
        assert_eq!(r.first_gold_rank(), Some(2));
        assert!(RankingRecord::new(vec!["a".into(), "a".into()], ["a".to_string()]).is_err());
    }

    fn labels(pairs: &[(f64, bool)]) -> Vec<ScoredLabel> {
        pairs
            .iter()
            .map(|&(score, label)| ScoredLabel { score, label })
            .collect()
    }

    #[test]
    fn auc_edge_cases() {
        assert_eq!(
            roc_auc(&labels(&[(0.1, false), (0.2, false), (0.8, true)])).unwrap(),
            1.0
        );
        assert_eq!(
            roc_auc(&labels(&[(0.5, false), (0.5, true), (0.5, true)])).unwrap(),
            0.5
        );
        assert_eq!(
            roc_auc(&labels(&[(0.5, true)])),
            Err(MetricError::SingleClass)
        );
        let curve = roc_curve(&labels(&[(0.1, false), (0.9, true)])).unwrap();
        assert_eq!(curve, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
    }

    #[test]
    fn calibration_fixtures() {
        let half = labels(&[(1.0, true), (1.0, false)]);
        assert_eq!(calibration(&half, 10).unwrap().ece, 0.5);
        let perfect = labels(&[(0.25, true), (0.25, false), (0.25, false), (0.25, false)]);
        assert_eq!(calibration(&perfect, 10).unwrap().ece, 0.0);
        assert_eq!(
            calibration(&labels(&[(1.5, true)]), 10),
            Err(MetricError::OutOfRange(1.5))
        );
    }

    #[test]
    fn bleu_fixtures() {
        assert_eq!(bleu_n(&toks("the red hat"), &[toks("the red hat")], 1), 1.0);
        assert_eq!(bleu_n(&toks("the red hat"), &[toks("the red hat")], 2), 1.0);
        assert_eq!(bleu_n(&toks("a a a"), &[toks("a b")], 1), 1.0 / 3.0);
        assert_eq!(bleu_n(&toks("x y"), &[toks("a b")], 1), 0.0);
        assert_eq!(bleu_n(&[], &[toks("a b")], 1), 0.0);
        // brevity: one of three reference words, precision 1, BP = e^{1-3}
        assert!((bleu_n(&toks("a"), &[toks("a b c")], 1) - (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rouge_fixtures() {
        assert_eq!(rouge(&toks("a c"), &toks("a b c"), RougeVariant::L), 0.8);
        assert_eq!(rouge(&toks("a b"), &toks("a b"), RougeVariant::One), 1.0);
        assert_eq!(rouge(&toks("a b"), &toks("a b"), RougeVariant::L), 1.0);
        assert_eq!(rouge(&toks("x"), &toks("y"), RougeVariant::One), 0.0);
        assert_eq!(rouge(&[], &[], RougeVariant::L), 0.0);
    }

    #[test]
    fn evaluate_single_perfect_record() {
        let rec = RunRecord {
            ranking: record(&["a", "b"], "a"),
            generated: "I recommend a".into(),
            gold_text: Some("I recommend a  ".into()),
            timings: StageTimings::default(),
        };
        let report = evaluate_run(&[rec]).unwrap();
        for name in [
            "R@1", "R@3", "R@5", "MRR@3", "MRR@5", "BLEU-1", "BLEU-2", "ROUGE-1", "ROUGE-L",
        ] {
            assert_eq!(report.metric(name), Some(1.0), "{name}");
        }
        assert!(report.table().contains("MRR@5"));
        assert!(!report.to_json().contains("latency"));
    }

    #[test]
    fn clock_orders_stages() {
        let mut clock = TurnClock::start();
        for stage in Stage::ALL {
            clock.time(stage, || std::hint::black_box(0));
        }
        assert_eq!(clock.finish().order(), Some(Stage::ALL.to_vec()));
    }

    proptest! {
        #[test]
        fn auc_invariant_under_monotone_maps(
            pairs in proptest::collection::vec((-3.0f64..3.0, any::<bool>()), 2..40),
            a in 0.1f64..10.0,
            b in -5.0f64..5.0,
        ) {
            let data = labels(&pairs);
            prop_assume!(data.iter().any(|d| d.label) && data.iter().any(|d| !d.label));
            let base = roc_auc(&data).unwrap();
            let affine: Vec<ScoredLabel> = data.iter().map(|d| ScoredLabel { score: a * d.score + b, ..*d }).collect();
            let exp: Vec<ScoredLabel> = data.iter().map(|d| ScoredLabel { score: d.score.exp(), ..*d }).collect();
            prop_assert!((roc_auc(&affine).unwrap() - base).abs() < 1e-12);
            prop_assert!((roc_auc(&exp).unwrap() - base).abs() < 1e-12);
        }

        #[test]
        fn recall_monotone_and_mrr_bounded(n in 1usize..12, gold_pos in 0usize..12) {
            let predicted: Vec<String> = (0..n).map(|i| format!("i{i}")).collect();
            let r = RankingRecord::new(predicted, [format!("i{gold_pos}")]).unwrap();
            let recs = [r];
            let mut prev = 0.0;
            for k in 1..=12 {
                let rk = recall_at_k(&recs, k).unwrap();
                prop_assert!(rk >= prev);
                prev = rk;
                let m = mrr_at_k(&recs, k).unwrap();
                prop_assert!(recall_at_k(&recs, 1).unwrap() <= m && m <= rk);
            }
        }

        #[test]
        fn overlap_metrics_ignore_trailing_whitespace(words in proptest::collection::vec("[a-z]{1,5}", 1..10)) {
            let text = words.join(" ");
            let padded = format!("{text}   \n");
            let (c, r) = (toks(&text), toks(&padded));
            prop_assert_eq!(bleu_n(&c, std::slice::from_ref(&r), 1), 1.0);
            prop_assert_eq!(rouge(&c, &r, RougeVariant::L), 1.0);
            prop_assert_eq!(rouge(&c, &r, RougeVariant::One), 1.0);
        }

        #[test]
        fn ece_in_unit_interval(pairs in proptest::collection::vec((0.0f64..=1.0, any::<bool>()), 1..50)) {
            let ece = calibration(&labels(&pairs), 10).unwrap().ece;
            prop_assert!((0.0..=1.0).contains(&ece));
        }
    }
}
