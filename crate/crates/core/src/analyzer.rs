//! Probes of a trained encoder-decoder: line vectors and their nearest
//! neighbours, gate tendencies between adjacent characters, and attention
//! grids. Dumps are plain TSV for external plotting.

use std::fmt::Write as _;

use crate::corpus::CharVocab;
use crate::error::{Error, Result};
use crate::model::{AttentionTrace, Inversion, Seq2Seq};
use crate::numeric::{dot, Scalar};

/// Mean of the encoder states of a line; length `2H`.
#[derive(Clone, Debug, PartialEq)]
pub struct LineEmbedding<T> {
    pub line: Vec<char>,
    pub vector: Vec<T>,
}

fn encode_line(line: &[char], vocab: &CharVocab, what: &str) -> Result<Vec<usize>> {
    if line.is_empty() {
        return Err(Error::Input(format!("empty {what}")));
    }
    vocab.encode_strict(line)
}

pub fn line_embedding<T: Scalar>(line: &[char], model: &Seq2Seq<T>, vocab: &CharVocab) -> Result<LineEmbedding<T>> {
    let ids = encode_line(line, vocab, "line")?;
    let enc = model.encode(&ids)?;
    let mut vector = vec![T::zero(); enc.g[0].len()];
    for g in &enc.g {
        for (v, &x) in vector.iter_mut().zip(g) {
            *v += x;
        }
    }
    let n = T::lit(enc.len() as f64);
    vector.iter_mut().for_each(|v| *v /= n);
    Ok(LineEmbedding {
        line: line.to_vec(),
        vector,
    })
}

/// Cosine similarity, `None` when either vector has zero norm.
pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> Option<f64> {
    let na = dot(a, a).as_f64();
    let nb = dot(b, b).as_f64();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot(a, b).as_f64() / (na * nb).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbours {
    /// Corpus index and cosine, best first.
    pub ranked: Vec<(usize, f64)>,
    /// Corpus entries with zero-norm vectors.
    pub excluded: Vec<usize>,
}

impl Neighbours {
    pub fn warning(&self) -> Option<String> {
        (!self.excluded.is_empty()).then(|| format!("{} zero-norm embeddings excluded", self.excluded.len()))
    }
}

/// The `k` corpus entries most similar to `query` by cosine. Equal scores
/// keep corpus order.
pub fn knn<T: Scalar>(query: &LineEmbedding<T>, corpus: &[LineEmbedding<T>], k: usize) -> Result<Neighbours> {
    if k > corpus.len() {
        return Err(Error::Input(format!("k = {k} exceeds corpus size {}", corpus.len())));
    }
    if cosine(&query.vector, &query.vector).is_none() {
        return Err(Error::Numeric("query embedding has zero norm".into()));
    }
    let mut ranked = Vec::with_capacity(corpus.len());
    let mut excluded = Vec::new();
    for (i, e) in corpus.iter().enumerate() {
        match cosine(&query.vector, &e.vector) {
            Some(c) => ranked.push((i, c)),
            None => excluded.push(i),
        }
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(Neighbours { ranked, excluded })
}

/// Longest common subsequence length.
pub fn lcs_len(a: &[char], b: &[char]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for &x in a {
        let mut diag = 0;
        for (j, &y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// The `k` corpus lines with the longest common subsequence, ties by
/// corpus order.
pub fn lcs_rank(query: &[char], corpus: &[Vec<char>], k: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = corpus.iter().enumerate().map(|(i, l)| (i, lcs_len(query, l))).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    out.truncate(k);
    out
}

/// Side-by-side kNN and LCS neighbours of a query.
pub fn knn_lcs_table<T: Scalar>(
    query: &LineEmbedding<T>,
    corpus: &[LineEmbedding<T>],
    k: usize,
) -> Result<String> {
    let nn = knn(query, corpus, k)?;
    let lines: Vec<Vec<char>> = corpus.iter().map(|e| e.line.clone()).collect();
    let lcs = lcs_rank(&query.line, &lines, k);
    let mut out = String::from("rank\tknn\tcos\tlcs\tlen\n");
    for r in 0..k {
        let (ki, kc) = nn.ranked.get(r).map_or((String::from("-"), String::from("-")), |&(i, c)| {
            (lines[i].iter().collect(), format!("{c:.2}"))
        });
        let (li, ll) = lcs.get(r).map_or((String::from("-"), String::from("-")), |&(i, n)| (lines[i].iter().collect(), n.to_string()));
        let _ = writeln!(out, "{}\t{ki}\t{kc}\t{li}\t{ll}", r + 1);
    }
    Ok(out)
}

/// Mean gate value per position and the differences across each gap.
#[derive(Clone, Debug, PartialEq)]
pub struct GateTendencies {
    pub reset_means: Vec<f64>,
    pub update_means: Vec<f64>,
    /// Later-minus-earlier along the direction of propagation, indexed by
    /// the gap between positions `t` and `t+1`.
    pub reset: Vec<f64>,
    pub update: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderTendencies {
    pub line: Vec<char>,
    pub forward: GateTendencies,
    pub backward: GateTendencies,
}

fn component_mean<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.as_f64()).sum::<f64>() / v.len() as f64
}

fn tendencies(reset: Vec<f64>, update: Vec<f64>, forward: bool) -> GateTendencies {
    let diff = |v: &[f64]| -> Vec<f64> {
        v.windows(2)
            .map(|w| if forward { w[1] - w[0] } else { w[0] - w[1] })
            .collect()
    };
    GateTendencies {
        reset: diff(&reset),
        update: diff(&update),
        reset_means: reset,
        update_means: update,
    }
}

pub fn gate_tendencies<T: Scalar>(line: &[char], model: &Seq2Seq<T>, vocab: &CharVocab) -> Result<EncoderTendencies> {
    let ids = encode_line(line, vocab, "line")?;
    let trace = model.encode_traced(&ids)?;
    let means = |steps: &[crate::model::GruStep<T>]| {
        (
            steps.iter().map(|s| component_mean(&s.reset)).collect::<Vec<_>>(),
            steps.iter().map(|s| component_mean(&s.update)).collect::<Vec<_>>(),
        )
    };
    let (fr, fu) = means(&trace.forward);
    let (br, bu) = means(&trace.backward);
    Ok(EncoderTendencies {
        line: line.to_vec(),
        forward: tendencies(fr, fu, true),
        backward: tendencies(br, bu, false),
    })
}

impl EncoderTendencies {
    /// One column per gap, headed by the character pair.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("series");
        for w in self.line.windows(2) {
            let _ = write!(out, "\t{}{}", w[0], w[1]);
        }
        out.push('\n');
        for (name, v) in [
            ("forward_reset", &self.forward.reset),
            ("forward_update", &self.forward.update),
            ("backward_reset", &self.backward.reset),
            ("backward_update", &self.backward.update),
        ] {
            out.push_str(name);
            for x in v {
                let _ = write!(out, "\t{x:.6}");
            }
            out.push('\n');
        }
        out
    }
}

/// Attention weights of a teacher-forced pass with the characters in the
/// order the model saw them.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionExport<T> {
    pub source: Vec<char>,
    pub target: Vec<char>,
    pub trace: AttentionTrace<T>,
    /// Rows run from the last character of the line to the first.
    pub tail_first: bool,
}

pub fn attention_matrix<T: Scalar>(
    source: &[char],
    target: &[char],
    model: &Seq2Seq<T>,
    vocab: &CharVocab,
    inversion: Inversion,
) -> Result<AttentionExport<T>> {
    let src = encode_line(source, vocab, "source")?;
    let tgt = encode_line(target, vocab, "target")?;
    let (src, tgt) = inversion.apply(&src, &tgt);
    let tf = model.teacher_forced(&src, &tgt)?;
    Ok(AttentionExport {
        source: vocab.decode(&src),
        target: vocab.decode(&tgt),
        trace: AttentionTrace {
            alphas: tf.steps.into_iter().map(|(a, _)| a.alpha).collect(),
        },
        tail_first: inversion == Inversion::Target,
    })
}

impl<T: Scalar> AttentionExport<T> {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(if self.tail_first { "# rows tail-first\n" } else { "" });
        out.push('-');
        for c in &self.source {
            let _ = write!(out, "\t{c}");
        }
        out.push('\n');
        for (c, row) in self.target.iter().zip(&self.trace.alphas) {
            out.push(*c);
            for a in row {
                let _ = write!(out, "\t{:.6}", a.as_f64());
            }
            out.push('\n');
        }
        out
    }
}

/// `line<TAB>v1,v2,...` per embedding.
pub fn embedding_dump<T: Scalar>(embeddings: &[LineEmbedding<T>]) -> String {
    let mut out = String::new();
    for e in embeddings {
        let line: String = e.line.iter().collect();
        let values: Vec<String> = e.vector.iter().map(|v| format!("{}", v.as_f64())).collect();
        let _ = writeln!(out, "{line}\t{}", values.join(","));
    }
    out
}
