//! BLEU-2 over characters, reference retrieval, the generation probability
//! ranking score, and tone/rhyme compliance of finished poems.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::corpus::{CharVocab, Tone, ToneRhymeLexicon};
use crate::error::{Error, Result};
use crate::generator::{Block, LmBlock};
use crate::model::{Inversion, Scorer};
use crate::numeric::Scalar;

/// Stand-in count for an n-gram order with no matches.
pub const BLEU_SMOOTHING: f64 = 1e-9;
pub const DEFAULT_REFERENCES: usize = 20;

fn ngram_counts(line: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut counts = HashMap::new();
    if line.len() >= n {
        for w in line.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches and total hypothesis n-grams of order `n`.
fn clipped_precision(hyp: &[char], refs: &[Vec<char>], n: usize) -> (usize, usize) {
    let h = ngram_counts(hyp, n);
    let ref_counts: Vec<_> = refs.iter().map(|r| ngram_counts(r, n)).collect();
    let total = hyp.len().saturating_sub(n - 1);
    let matched = h
        .iter()
        .map(|(g, &c)| {
            let cap = ref_counts.iter().map(|rc| rc.get(g).copied().unwrap_or(0)).max().unwrap_or(0);
            c.min(cap)
        })
        .sum();
    (matched, total)
}

/// Reference length closest to `len`, preferring the shorter on ties.
fn closest_ref_len(len: usize, refs: &[Vec<char>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(len), r))
        .unwrap_or(0)
}

/// Character BLEU-2: geometric mean of clipped unigram and bigram
/// precision times the brevity penalty against the closest reference
/// length. An order with no matches (or no n-grams) counts as
/// [`BLEU_SMOOTHING`] instead of zero.
pub fn bleu2(hypothesis: &[char], references: &[Vec<char>]) -> Result<f64> {
    if references.is_empty() || references.iter().any(Vec::is_empty) {
        return Err(Error::Domain("BLEU needs non-empty references".into()));
    }
    if hypothesis.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=2 {
        let (m, t) = clipped_precision(hypothesis, references, n);
        let p = if m == 0 || t == 0 { BLEU_SMOOTHING } else { m as f64 / t as f64 };
        log_sum += p.ln();
    }
    let c = hypothesis.len();
    let r = closest_ref_len(c, references);
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    Ok(bp * (log_sum / 2.0).exp())
}

/// References for one input line. The original next line is always at
/// index 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSet {
    pub input: Vec<char>,
    pub references: Vec<Vec<char>>,
    pub original: usize,
    /// Fewer than the requested number of retrieved references exist.
    pub short: bool,
}

impl ReferenceSet {
    pub fn original_line(&self) -> &[char] {
        &self.references[self.original]
    }
}

/// Input lines paired with the line that follows them, searchable by
/// character overlap. A substitute for proper reference extraction, so
/// BLEU and GPRS values are only comparable between runs of this crate.
#[derive(Clone, Debug)]
pub struct ReferenceIndex {
    pairs: Vec<(Vec<char>, Vec<char>)>,
    postings: HashMap<char, Vec<usize>>,
}

/// Shared characters plus shared bigrams, both as multiset intersections.
pub fn overlap_score(a: &[char], b: &[char]) -> usize {
    let inter = |n| {
        let x = ngram_counts(a, n);
        let y = ngram_counts(b, n);
        x.iter().map(|(g, &c)| c.min(y.get(g).copied().unwrap_or(0))).sum::<usize>()
    };
    inter(1) + inter(2)
}

impl ReferenceIndex {
    pub fn new(pairs: Vec<(Vec<char>, Vec<char>)>) -> Self {
        let mut postings: HashMap<char, Vec<usize>> = HashMap::new();
        for (i, (line, _)) in pairs.iter().enumerate() {
            let uniq: HashSet<char> = line.iter().copied().collect();
            for c in uniq {
                postings.entry(c).or_default().push(i);
            }
        }
        Self { pairs, postings }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Entries sharing at least one character with `line`, by descending
    /// overlap, ties by index.
    pub fn ranked(&self, line: &[char]) -> Vec<(usize, usize)> {
        let mut seen = HashSet::new();
        for c in line {
            if let Some(p) = self.postings.get(c) {
                seen.extend(p.iter().copied());
            }
        }
        let mut out: Vec<(usize, usize)> = seen.into_iter().map(|i| (overlap_score(line, &self.pairs[i].0), i)).collect();
        out.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        out
    }

    /// Retrieves up to `k` distinct next lines of the most similar entries,
    /// never repeating `original`.
    pub fn extract(&self, line: &[char], original: &[char], k: usize) -> ReferenceSet {
        let mut references = vec![original.to_vec()];
        let mut have: HashSet<&[char]> = HashSet::from([original]);
        if k > 0 {
            for (_, i) in self.ranked(line) {
                let next = self.pairs[i].1.as_slice();
                if have.insert(next) {
                    references.push(next.to_vec());
                    if references.len() > k {
                        break;
                    }
                }
            }
        }
        ReferenceSet {
            input: line.to_vec(),
            short: references.len() <= k,
            references,
            original: 0,
        }
    }
}

/// Free-function form of [`ReferenceIndex::extract`].
pub fn extract_references(line: &[char], original: &[char], index: &ReferenceIndex, k: usize) -> ReferenceSet {
    index.extract(line, original, k)
}

/// `(N-1-r)/(N-1)` where `r` is the rank of the original among `scores`
/// sorted descending, with ties counted against the original.
pub fn gprs_from_scores(scores: &[f64], original: usize) -> Result<f64> {
    let n = scores.len();
    if n < 2 {
        return Err(Error::Domain(format!("GPRS needs at least 2 references, got {n}")));
    }
    if original >= n {
        return Err(Error::Domain(format!("original index {original} out of {n}")));
    }
    let own = scores[original];
    let r = scores
        .iter()
        .enumerate()
        .filter(|&(i, &s)| i != original && (s >= own || s.is_nan()))
        .count();
    Ok((n - 1 - r) as f64 / (n - 1) as f64)
}

/// Log probability of every reference given the input under `block`.
pub fn reference_log_probs<T: Scalar>(
    refset: &ReferenceSet,
    block: Block<'_, T>,
    lm: Option<LmBlock<'_, T>>,
    lambda: f64,
    vocab: &CharVocab,
) -> Result<Vec<f64>> {
    let scorer = Scorer::new(block.model, lm.map(|l| l.lm), T::lit(lambda))?;
    let source = vocab.encode(&refset.input);
    refset
        .references
        .iter()
        .map(|r| {
            let (s, t) = block.inversion.apply(&source, &vocab.encode(r));
            Ok(-scorer.sequence_nll(&s, &t)?.as_f64())
        })
        .collect()
}

/// Generation probability ranking score of the input line under `block`.
/// `lambda` is normally 0 so the block alone is measured.
pub fn gprs<T: Scalar>(
    refset: &ReferenceSet,
    block: Block<'_, T>,
    lm: Option<LmBlock<'_, T>>,
    lambda: f64,
    vocab: &CharVocab,
) -> Result<f64> {
    if refset.references.len() < 2 {
        return Err(Error::Domain(format!(
            "GPRS needs at least 2 references, got {}",
            refset.references.len()
        )));
    }
    if let Some(l) = lm {
        if lambda > 0.0 && (l.inversion == Inversion::Target) != (block.inversion == Inversion::Target) {
            return Err(Error::Input("language model direction differs from the block".into()));
        }
    }
    let scores = reference_log_probs(refset, block, lm, lambda, vocab)?;
    gprs_from_scores(&scores, refset.original)
}

/// First candidate not found verbatim among `known` lines.
pub fn first_novel<'a>(candidates: &'a [Vec<char>], known: &HashSet<Vec<char>>) -> Option<&'a Vec<char>> {
    candidates.iter().find(|c| !known.contains(*c))
}

/// Rule checks for one poem.
#[derive(Clone, Debug, PartialEq)]
pub struct PoemCompliance {
    pub length_ok: bool,
    pub tones_ok: bool,
    pub rhyme_ok: bool,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplianceReport {
    pub poems: Vec<PoemCompliance>,
    pub tonal: f64,
    pub rhyme: f64,
    pub length: f64,
}

impl ComplianceReport {
    pub fn all_pass(&self) -> bool {
        self.poems.iter().all(|p| p.length_ok && p.tones_ok && p.rhyme_ok)
    }
}

fn is_level(t: Tone) -> bool {
    t == Tone::Ping || t == Tone::Either
}

fn is_oblique(t: Tone) -> bool {
    t == Tone::Ze || t == Tone::Either
}

/// Checks one poem from scratch: four lines of equal length 5 or 7, lines
/// 2 and 4 ending level, line 3 ending oblique, lines 2 and 4 sharing a
/// rhyme that line 3 avoids.
pub fn check_poem(lines: &[Vec<char>], lexicon: &ToneRhymeLexicon) -> PoemCompliance {
    let mut violations = Vec::new();
    let n = lines.first().map_or(0, Vec::len);
    let length_ok = lines.len() == 4 && (n == 5 || n == 7) && lines.iter().all(|l| l.len() == n);
    if !length_ok {
        violations.push(format!(
            "shape: {} lines of lengths {:?}",
            lines.len(),
            lines.iter().map(Vec::len).collect::<Vec<_>>()
        ));
        return PoemCompliance {
            length_ok,
            tones_ok: false,
            rhyme_ok: false,
            violations,
        };
    }
    let tail: Vec<char> = lines.iter().map(|l| l[n - 1]).collect();
    let mut tones_ok = true;
    for (line, want_level) in [(1, true), (2, false), (3, true)] {
        let t = lexicon.tone_of(tail[line]);
        let ok = if want_level { is_level(t) } else { is_oblique(t) };
        if !ok {
            tones_ok = false;
            violations.push(format!(
                "line {} ends `{}` ({}), expected {}",
                line + 1,
                tail[line],
                t.symbol(),
                if want_level { 'P' } else { 'Z' }
            ));
        }
    }
    let (r2, r3, r4) = (lexicon.rhyme_of(tail[1]), lexicon.rhyme_of(tail[2]), lexicon.rhyme_of(tail[3]));
    let mut rhyme_ok = true;
    if r2.is_none() || r2 != r4 {
        rhyme_ok = false;
        violations.push(format!("lines 2 and 4 end `{}`/`{}` in different rhymes", tail[1], tail[3]));
    }
    if r3.is_none() || r3 == r2 {
        rhyme_ok = false;
        violations.push(format!("line 3 ends `{}` on the rhyme of line 2", tail[2]));
    }
    PoemCompliance {
        length_ok,
        tones_ok,
        rhyme_ok,
        violations,
    }
}

pub fn compliance_report(poems: &[Vec<Vec<char>>], lexicon: &ToneRhymeLexicon) -> ComplianceReport {
    let checked: Vec<PoemCompliance> = poems.iter().map(|p| check_poem(p, lexicon)).collect();
    let frac = |f: fn(&PoemCompliance) -> bool| {
        if checked.is_empty() {
            0.0
        } else {
            checked.iter().filter(|p| f(p)).count() as f64 / checked.len() as f64
        }
    };
    ComplianceReport {
        tonal: frac(|p| p.tones_ok),
        rhyme: frac(|p| p.rhyme_ok),
        length: frac(|p| p.length_ok),
        poems: checked,
    }
}

/// One row of the evaluation TSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub item: String,
    pub metric: String,
    pub value: f64,
}

pub fn records_tsv(records: &[Record]) -> String {
    let mut out = String::from("item\tmetric\tvalue\n");
    for r in records {
        let _ = writeln!(out, "{}\t{}\t{:.6}", r.item, r.metric, r.value);
    }
    out
}

/// Mean BLEU-2 for one system, by target line (2..=4) and length class.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BleuRow {
    pub system: String,
    /// `[line2, line3, line4]` each as `[five, seven]`; `None` when unmeasured.
    pub cells: [[Option<f64>; 2]; 3],
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

fn mean(vals: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = vals.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Table with one row per system: Line2, Line3, Line4 and Average, each
/// split into 5-char and 7-char columns.
pub fn bleu_table(rows: &[BleuRow]) -> String {
    let mut out = String::from("Models\tLine2\t\tLine3\t\tLine4\t\tAverage\t\n\t5-char\t7-char\t5-char\t7-char\t5-char\t7-char\t5-char\t7-char\n");
    for r in rows {
        let _ = write!(out, "{}", r.system);
        for line in &r.cells {
            let _ = write!(out, "\t{}\t{}", cell(line[0]), cell(line[1]));
        }
        for class in 0..2 {
            let _ = write!(out, "\t{}", cell(mean(r.cells.iter().map(|l| l[class]))));
        }
        out.push('\n');
    }
    out
}

/// Mean GPRS for one block: `[five, seven]` each as `[line3, line4]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GprsRow {
    pub block: String,
    pub cells: [[Option<f64>; 2]; 2],
}

pub fn gprs_table(rows: &[GprsRow]) -> String {
    let mut out = String::from("Blocks\t5-char\t\t7-char\t\n\tLine3\tLine4\tLine3\tLine4\n");
    for r in rows {
        let _ = write!(out, "{}", r.block);
        for class in &r.cells {
            let _ = write!(out, "\t{}\t{}", cell(class[0]), cell(class[1]));
        }
        out.push('\n');
    }
    out
}
