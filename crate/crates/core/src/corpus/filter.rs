//! Length filtering, month-over-month label stability and obscenity
//! analysis.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::{DateTime, Datelike};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{tokenize, Corpus, LabeledExample};
use crate::error::{Error, Result};
use crate::stats::{bootstrap_z_test, mean, std_dev};

/// Keeps examples with `min_tokens <= |tokens| <= max_tokens`, in order.
pub fn filter_by_length(corpus: &Corpus, min_tokens: usize, max_tokens: usize) -> Result<Corpus> {
    if min_tokens < 1 || min_tokens > max_tokens {
        return Err(Error::InvalidArgument(format!(
            "length bounds must satisfy 1 <= min <= max, got {min_tokens}..{max_tokens}"
        )));
    }
    let kept = corpus
        .examples
        .iter()
        .filter(|e| (min_tokens..=max_tokens).contains(&e.tokens.len()))
        .cloned()
        .collect();
    Ok(corpus.with_examples(
        kept,
        format!("{} | length {min_tokens}..={max_tokens}", corpus.provenance),
    ))
}

/// UTC `YYYY-MM` of a timestamp in seconds.
pub fn month_key(ts: i64) -> String {
    let dt = DateTime::from_timestamp(ts, 0).unwrap_or_default();
    format!("{:04}-{:02}", dt.year(), dt.month())
}

pub const DEFAULT_KL_SMOOTHING: f64 = 1e-9;

/// Month-over-month relative entropy below which label usage is considered
/// stable.
pub const STABILITY_CEILING: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub months: Vec<String>,
    pub distinct_emotion_counts: Vec<usize>,
    /// `KL(P_m || P_{m+1})` over the union of both months' labels, smoothed.
    pub kl_union: Vec<f64>,
    /// Same over the shared labels only, renormalized; `None` when the months
    /// share no label.
    pub kl_intersection: Vec<Option<f64>>,
    /// First month after which every consecutive pair stays under
    /// [`STABILITY_CEILING`] on both supports.
    pub suggested_cutoff: Option<String>,
}

impl StabilityReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("month,distinct_emotions,kl_union,kl_intersection\n");
        for (i, m) in self.months.iter().enumerate() {
            let (u, x) = if i == 0 {
                (String::new(), String::new())
            } else {
                (
                    self.kl_union[i - 1].to_string(),
                    self.kl_intersection[i - 1].map(|v| v.to_string()).unwrap_or_default(),
                )
            };
            out.push_str(&format!("{m},{},{u},{x}\n", self.distinct_emotion_counts[i]));
        }
        out
    }
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum::<f64>()
        .max(0.0)
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.into_iter().map(|x| x / total).collect()
}

/// `KL(p || q)` on the union of supports with additive smoothing `eps` on
/// every cell, each side renormalized afterwards.
pub(crate) fn kl_union(p: &BTreeMap<usize, f64>, q: &BTreeMap<usize, f64>, eps: f64) -> f64 {
    let support: BTreeSet<usize> = p.keys().chain(q.keys()).copied().collect();
    let pv = normalized(support.iter().map(|k| p.get(k).copied().unwrap_or(0.0) + eps).collect());
    let qv = normalized(support.iter().map(|k| q.get(k).copied().unwrap_or(0.0) + eps).collect());
    kl(&pv, &qv)
}

/// `KL(p || q)` restricted to labels present in both, renormalized.
pub(crate) fn kl_intersection(p: &BTreeMap<usize, f64>, q: &BTreeMap<usize, f64>) -> Option<f64> {
    let shared: Vec<usize> = p.keys().filter(|k| q.contains_key(k)).copied().collect();
    if shared.is_empty() {
        return None;
    }
    let pv = normalized(shared.iter().map(|k| p[k]).collect());
    let qv = normalized(shared.iter().map(|k| q[k]).collect());
    Some(kl(&pv, &qv))
}

fn monthly_counts(corpus: &Corpus) -> Result<BTreeMap<String, BTreeMap<usize, f64>>> {
    let mut months: BTreeMap<String, BTreeMap<usize, f64>> = BTreeMap::new();
    for ex in &corpus.examples {
        let ts = ex.timestamp.ok_or_else(|| Error::MissingTimestamp(ex.id.clone()))?;
        let entry = months.entry(month_key(ts)).or_default();
        for &l in &ex.writer_labels {
            *entry.entry(l).or_default() += 1.0;
        }
    }
    Ok(months)
}

pub fn stability_report(corpus: &Corpus, smoothing_eps: f64) -> Result<StabilityReport> {
    if !(smoothing_eps > 0.0) {
        return Err(Error::InvalidArgument("smoothing_eps must be positive".into()));
    }
    let counts = monthly_counts(corpus)?;
    if counts.len() < 2 {
        return Err(Error::InsufficientTemporalSpan(counts.len()));
    }
    let months: Vec<String> = counts.keys().cloned().collect();
    let dists: Vec<BTreeMap<usize, f64>> = counts
        .values()
        .map(|c| {
            let total: f64 = c.values().sum();
            c.iter().map(|(&k, &v)| (k, v / total)).collect()
        })
        .collect();
    let distinct_emotion_counts = dists.iter().map(BTreeMap::len).collect();
    let kl_union_vals: Vec<f64> = dists
        .windows(2)
        .map(|w| kl_union(&w[0], &w[1], smoothing_eps))
        .collect();
    let kl_inter_vals: Vec<Option<f64>> = dists.windows(2).map(|w| kl_intersection(&w[0], &w[1])).collect();

    let stable = |i: usize| {
        kl_union_vals[i] < STABILITY_CEILING && kl_inter_vals[i].is_none_or(|v| v < STABILITY_CEILING)
    };
    let mut cutoff = None;
    for start in (0..kl_union_vals.len()).rev() {
        if stable(start) {
            cutoff = Some(start);
        } else {
            break;
        }
    }
    Ok(StabilityReport {
        suggested_cutoff: cutoff.map(|i| months[i].clone()),
        months,
        distinct_emotion_counts,
        kl_union: kl_union_vals,
        kl_intersection: kl_inter_vals,
    })
}

/// Order in which the month cutoff and the "used every month" emotion
/// filter are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StableOrder {
    /// Drop months before the cutoff, then require use in every remaining month.
    CutoffFirst,
    /// Require use in every month of the full span, then drop months before the cutoff.
    FilterFirst,
}

/// Drops examples before `cutoff_month` (`YYYY-MM`) and removes emotions
/// that are not used at least once in every month; examples left without
/// labels are dropped.
pub fn filter_stable_emotions(corpus: &Corpus, cutoff_month: &str, order: StableOrder) -> Result<Corpus> {
    let after_cutoff = |ex: &LabeledExample| ex.timestamp.map(month_key).is_some_and(|m| m.as_str() >= cutoff_month);
    for ex in &corpus.examples {
        if ex.timestamp.is_none() {
            return Err(Error::MissingTimestamp(ex.id.clone()));
        }
    }
    let usage_scope: Vec<&LabeledExample> = match order {
        StableOrder::CutoffFirst => corpus.examples.iter().filter(|e| after_cutoff(e)).collect(),
        StableOrder::FilterFirst => corpus.examples.iter().collect(),
    };
    let mut per_month: BTreeMap<String, HashSet<usize>> = BTreeMap::new();
    for ex in &usage_scope {
        per_month
            .entry(month_key(ex.timestamp.unwrap()))
            .or_default()
            .extend(ex.writer_labels.iter().copied());
    }
    let valid: HashSet<usize> = (0..corpus.taxonomy.len())
        .filter(|e| !per_month.is_empty() && per_month.values().all(|s| s.contains(e)))
        .collect();
    let kept = corpus
        .examples
        .iter()
        .filter(|e| after_cutoff(e))
        .filter_map(|e| {
            let labels: Vec<usize> = e.writer_labels.iter().copied().filter(|l| valid.contains(l)).collect();
            if labels.is_empty() {
                return None;
            }
            let mut e = e.clone();
            e.writer_labels = labels;
            Some(e)
        })
        .collect();
    Ok(corpus.with_examples(
        kept,
        format!("{} | stable emotions from {cutoff_month} ({order:?})", corpus.provenance),
    ))
}

/// True iff any case-folded token of `text` is in `lexicon`.
pub fn flag_obscene(text: &str, lexicon: &HashSet<String>) -> bool {
    tokenize(text).iter().any(|t| lexicon.contains(&t.to_lowercase()))
}

#[derive(Debug, Clone, Serialize)]
pub struct CategoryRate {
    pub category: String,
    pub examples: usize,
    /// Obscene share over the whole corpus; `None` for an empty category.
    pub full_rate: Option<f64>,
    pub bootstrap_mean: Option<f64>,
    pub bootstrap_std: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairwiseTest {
    pub a: String,
    pub b: String,
    pub mean_difference: f64,
    pub z: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObscenityReport {
    pub runs: usize,
    pub sample_frac: f64,
    pub categories: Vec<CategoryRate>,
    pub pairwise: Vec<PairwiseTest>,
}

/// Bootstrapped per-category share of examples containing a lexicon word,
/// with z-tests on every pairwise difference of shares.
pub fn obscenity_by_category(
    corpus: &Corpus,
    lexicon: &HashSet<String>,
    runs: usize,
    sample_frac: f64,
    seed: u64,
) -> Result<ObscenityReport> {
    if runs < 2 {
        return Err(Error::InvalidArgument("runs must be at least 2".into()));
    }
    if !(sample_frac > 0.0 && sample_frac <= 1.0) {
        return Err(Error::InvalidArgument("sample_frac must lie in (0, 1]".into()));
    }
    let tax = &corpus.taxonomy;
    let n_cat = tax.num_categories();
    // Per example: categories of its labels and the obscenity flag.
    let rows: Vec<(Vec<usize>, bool)> = corpus
        .examples
        .iter()
        .map(|e| {
            let mut cats: Vec<usize> = e.writer_labels.iter().map(|&l| tax.category_of(l)).collect();
            cats.sort_unstable();
            cats.dedup();
            (cats, flag_obscene(&e.text, lexicon))
        })
        .collect();
    let rates = |idx: &mut dyn Iterator<Item = usize>| {
        let mut hits = vec![0usize; n_cat];
        let mut totals = vec![0usize; n_cat];
        for i in idx {
            let (cats, flag) = &rows[i];
            for &c in cats {
                totals[c] += 1;
                hits[c] += usize::from(*flag);
            }
        }
        (0..n_cat)
            .map(|c| (totals[c] > 0).then(|| hits[c] as f64 / totals[c] as f64))
            .collect::<Vec<Option<f64>>>()
    };
    let full = rates(&mut (0..rows.len()));
    let mut totals = vec![0usize; n_cat];
    for (cats, _) in &rows {
        for &c in cats {
            totals[c] += 1;
        }
    }

    let sample_size = ((rows.len() as f64) * sample_frac).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_run: Vec<Vec<Option<f64>>> = (0..runs)
        .map(|_| {
            if rows.is_empty() {
                return vec![None; n_cat];
            }
            let picks: Vec<usize> = (0..sample_size).map(|_| rng.gen_range(0..rows.len())).collect();
            rates(&mut picks.into_iter())
        })
        .collect();

    let categories = (0..n_cat)
        .map(|c| {
            let samples: Vec<f64> = per_run.iter().filter_map(|r| r[c]).collect();
            CategoryRate {
                category: tax.category_name(c).to_owned(),
                examples: totals[c],
                full_rate: full[c],
                bootstrap_mean: (!samples.is_empty()).then(|| mean(&samples)),
                bootstrap_std: (!samples.is_empty()).then(|| std_dev(&samples)),
            }
        })
        .collect();

    let mut pairwise = Vec::new();
    for a in 0..n_cat {
        for b in a + 1..n_cat {
            let diffs: Vec<f64> = per_run
                .iter()
                .filter_map(|r| Some(r[a]? - r[b]?))
                .collect();
            if diffs.is_empty() {
                continue;
            }
            let (z, p_value) = bootstrap_z_test(&diffs);
            pairwise.push(PairwiseTest {
                a: tax.category_name(a).to_owned(),
                b: tax.category_name(b).to_owned(),
                mean_difference: mean(&diffs),
                z,
                p_value,
            });
        }
    }
    Ok(ObscenityReport {
        runs,
        sample_frac,
        categories,
        pairwise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::EmotionTaxonomy;
    use proptest::prelude::*;

    fn two_cat_taxonomy() -> EmotionTaxonomy {
        EmotionTaxonomy::from_groups([("A", vec!["a1", "a2"]), ("B", vec!["b1"])]).unwrap()
    }

    fn corpus_of(texts: &[(&str, usize, Option<i64>)]) -> Corpus {
        let ex = texts
            .iter()
            .enumerate()
            .map(|(i, (t, l, ts))| LabeledExample::new(i.to_string(), *t, vec![*l], *ts))
            .collect();
        Corpus::new(two_cat_taxonomy(), ex, "test").unwrap()
    }

    #[test]
    fn length_filter_drops_short() {
        let c = corpus_of(&[("two words", 0, None), ("now three words", 0, None)]);
        let f = filter_by_length(&c, 3, 32).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.examples[0].id, "1");
        let all = filter_by_length(&c, 1, usize::MAX).unwrap();
        assert_eq!(all.examples, c.examples);
        assert!(filter_by_length(&c, 0, 3).is_err());
        assert!(filter_by_length(&c, 4, 3).is_err());
    }

    #[test]
    fn length_filter_matches_histogram_oracle() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let texts: Vec<String> = (0..500)
            .map(|_| {
                let n = rng.gen_range(0..40);
                vec!["w"; n].join(" ")
            })
            .collect();
        let rows: Vec<(&str, usize, Option<i64>)> = texts.iter().map(|t| (t.as_str(), 0, None)).collect();
        let c = corpus_of(&rows);
        let oracle = texts
            .iter()
            .filter(|t| {
                let n = t.split(' ').filter(|w| !w.is_empty()).count();
                (3..=32).contains(&n)
            })
            .count();
        assert_eq!(filter_by_length(&c, 3, 32).unwrap().len(), oracle);
    }

    #[test]
    fn kl_closed_form() {
        let p: BTreeMap<usize, f64> = [(0, 0.5), (1, 0.5)].into();
        let q: BTreeMap<usize, f64> = [(0, 0.25), (1, 0.75)].into();
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl_intersection(&p, &q).unwrap() - expected).abs() < 1e-15);
        assert!((kl_union(&p, &q, 1e-9) - expected).abs() < 1e-8);
        assert!((expected - 0.1438).abs() < 1e-4);
        assert_eq!(kl_union(&p, &p, 1e-9), 0.0);
        assert_eq!(kl_intersection(&p, &p), Some(0.0));
    }

    #[test]
    fn stability_needs_two_months() {
        let c = corpus_of(&[("x", 0, Some(0)), ("y", 1, Some(100))]);
        assert!(matches!(
            stability_report(&c, 1e-9),
            Err(Error::InsufficientTemporalSpan(1))
        ));
        let missing = corpus_of(&[("x", 0, None)]);
        assert!(matches!(stability_report(&missing, 1e-9), Err(Error::MissingTimestamp(_))));
    }

    #[test]
    fn stability_identical_months_is_zero() {
        let jan = 1_451_606_400; // 2016-01-01
        let feb = 1_454_284_800; // 2016-02-01
        let c = corpus_of(&[
            ("x", 0, Some(jan)),
            ("x", 2, Some(jan)),
            ("x", 0, Some(feb)),
            ("x", 2, Some(feb)),
        ]);
        let r = stability_report(&c, 1e-9).unwrap();
        assert_eq!(r.months, ["2016-01", "2016-02"]);
        assert_eq!(r.kl_union, [0.0]);
        assert_eq!(r.kl_intersection, [Some(0.0)]);
        assert_eq!(r.suggested_cutoff.as_deref(), Some("2016-01"));
        assert!(r.to_csv().starts_with("month,"));
    }

    #[test]
    fn stable_filter_orders_differ() {
        let jan = 1_451_606_400;
        let feb = 1_454_284_800;
        let mar = 1_456_790_400;
        // a2 only appears from February.
        let c = corpus_of(&[
            ("x", 0, Some(jan)),
            ("x", 0, Some(feb)),
            ("x", 1, Some(feb)),
            ("x", 0, Some(mar)),
            ("x", 1, Some(mar)),
        ]);
        let cut = filter_stable_emotions(&c, "2016-02", StableOrder::CutoffFirst).unwrap();
        assert_eq!(cut.len(), 4);
        let first = filter_stable_emotions(&c, "2016-02", StableOrder::FilterFirst).unwrap();
        assert_eq!(first.len(), 2);
        assert!(first.examples.iter().all(|e| e.writer_labels == [0]));
    }

    #[test]
    fn obscene_flag_is_binary() {
        let lex: HashSet<String> = ["damn".to_string()].into();
        assert!(flag_obscene("Damn damn DAMN", &lex));
        assert!(!flag_obscene("", &lex));
        assert!(!flag_obscene("damnation", &lex));
    }

    proptest! {
        #[test]
        fn obscene_flag_matches_set_intersection(words in proptest::collection::vec("[a-e]{1,3}", 0..12)) {
            let lex: HashSet<String> = ["ab", "cde", "e"].iter().map(|s| s.to_string()).collect();
            let text = words.join(" ");
            let oracle = words.iter().any(|w| lex.contains(w));
            prop_assert_eq!(flag_obscene(&text, &lex), oracle);
        }
    }

    #[test]
    fn obscenity_zero_hits() {
        let lex: HashSet<String> = ["zzz".to_string()].into();
        let c = corpus_of(&[("a b", 0, None), ("c d", 2, None), ("e", 1, None)]);
        let r = obscenity_by_category(&c, &lex, 20, 1.0, 1).unwrap();
        for cat in &r.categories {
            assert_eq!(cat.bootstrap_mean, Some(0.0));
        }
        assert!(r.pairwise.iter().all(|p| p.p_value >= 0.05));
    }

    #[test]
    fn obscenity_planted_difference() {
        let lex: HashSet<String> = ["damn".to_string()].into();
        let mut rows = Vec::new();
        for i in 0..400 {
            rows.push((if i % 2 == 0 { "damn it" } else { "fine" }, 0, None));
            rows.push(("all good", 2, None));
        }
        let c = corpus_of(&rows);
        let r = obscenity_by_category(&c, &lex, 100, 0.1, 7).unwrap();
        let a = &r.categories[0];
        assert!((a.full_rate.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(r.categories[1].full_rate, Some(0.0));
        assert!(r.pairwise[0].p_value < 1e-3);
    }

    #[test]
    fn obscenity_empty_category_is_undefined() {
        let lex: HashSet<String> = ["damn".to_string()].into();
        let c = corpus_of(&[("damn", 0, None)]);
        let r = obscenity_by_category(&c, &lex, 5, 1.0, 1).unwrap();
        assert_eq!(r.categories[1].full_rate, None);
        assert_eq!(r.categories[1].bootstrap_mean, None);
        assert!(obscenity_by_category(&c, &lex, 1, 1.0, 1).is_err());
    }
}
