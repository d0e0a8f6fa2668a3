//! Constrained beam search and the four-step quatrain pipeline.
//!
//! Disallowed characters are masked out and the remaining mass is
//! renormalized. By default only the final character of a line is held to
//! its tone; `strict` enforces every position.

use std::cmp::Ordering;
use std::fmt;

use crate::corpus::{
    CharVocab, LengthClass, PoemLine, Quatrain, RhymeCategory, Tone, ToneRhymeLexicon, NUM_RESERVED, SEP, UNK,
};
use crate::error::{Error, Result};
use crate::model::{AttentionTrace, Inversion, LanguageModel, Seq2Seq};
use crate::numeric::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ToneReq {
    #[default]
    Any,
    Ping,
    Ze,
}

impl ToneReq {
    /// `Either` satisfies both; `Unknown` only `Any`.
    pub fn admits(self, tone: Tone) -> bool {
        match self {
            ToneReq::Any => true,
            ToneReq::Ping => matches!(tone, Tone::Ping | Tone::Either),
            ToneReq::Ze => matches!(tone, Tone::Ze | Tone::Either),
        }
    }
}

impl fmt::Display for ToneReq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ToneReq::Any => "*",
            ToneReq::Ping => "P",
            ToneReq::Ze => "Z",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum RhymeReq {
    #[default]
    Free,
    MustRhyme(RhymeCategory),
    MustNotRhyme(RhymeCategory),
}

impl RhymeReq {
    pub fn admits(self, rhyme: Option<RhymeCategory>) -> bool {
        match self {
            RhymeReq::Free => true,
            RhymeReq::MustRhyme(cat) => rhyme == Some(cat),
            RhymeReq::MustNotRhyme(cat) => rhyme.is_some_and(|r| r != cat),
        }
    }
}

/// Requirements on one generated line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    length: usize,
    tones: Vec<ToneReq>,
    rhyme: RhymeReq,
}

impl Constraint {
    pub fn new(length: usize, tones: &[(usize, ToneReq)], rhyme: RhymeReq) -> Result<Self> {
        if length == 0 {
            return Err(Error::Input("constraint length must be positive".into()));
        }
        let mut per_pos = vec![ToneReq::Any; length];
        for &(pos, req) in tones {
            if pos >= length {
                return Err(Error::Input(format!("tone requirement at position {pos} of a {length}-character line")));
            }
            per_pos[pos] = req;
        }
        Ok(Self {
            length,
            tones: per_pos,
            rhyme,
        })
    }

    /// Length only.
    pub fn free(length: usize) -> Result<Self> {
        Self::new(length, &[], RhymeReq::Free)
    }

    /// Parses a pattern such as `*ZPPZZP`: `P`, `Z`, and `*` for either.
    pub fn from_pattern(pattern: &str, rhyme: RhymeReq) -> Result<Self> {
        let tones: Vec<(usize, ToneReq)> = pattern
            .chars()
            .enumerate()
            .map(|(i, c)| match c {
                'P' | 'p' => Ok((i, ToneReq::Ping)),
                'Z' | 'z' => Ok((i, ToneReq::Ze)),
                '*' => Ok((i, ToneReq::Any)),
                _ => Err(Error::Input(format!("bad tone symbol `{c}` in pattern `{pattern}`"))),
            })
            .collect::<Result<_>>()?;
        Self::new(tones.len(), &tones, rhyme)
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn tone(&self, pos: usize) -> ToneReq {
        self.tones[pos]
    }

    pub fn tail_tone(&self) -> ToneReq {
        self.tones[self.length - 1]
    }

    pub fn rhyme(&self) -> RhymeReq {
        self.rhyme
    }

    /// Whether the requirement at `pos` is enforced during decoding.
    fn enforced(&self, pos: usize, strict: bool) -> bool {
        strict || pos + 1 == self.length
    }

    fn admits_at(&self, pos: usize, c: char, lexicon: &ToneRhymeLexicon, strict: bool) -> bool {
        if self.enforced(pos, strict) && !self.tones[pos].admits(lexicon.tone_of(c)) {
            return false;
        }
        pos + 1 != self.length || self.rhyme.admits(lexicon.rhyme_of(c))
    }

    /// Rules broken by `line`, including unenforced positions.
    pub fn violations(&self, line: &[char], lexicon: &ToneRhymeLexicon) -> Vec<String> {
        let mut out = Vec::new();
        if line.len() != self.length {
            out.push(format!("length {} != {}", line.len(), self.length));
            return out;
        }
        for (pos, (&c, req)) in line.iter().zip(&self.tones).enumerate() {
            let tone = lexicon.tone_of(c);
            if !req.admits(tone) {
                out.push(format!("position {} `{c}` is {} but needs {req}", pos + 1, tone.symbol()));
            }
        }
        let last = line[self.length - 1];
        if !self.rhyme.admits(lexicon.rhyme_of(last)) {
            out.push(format!("final `{last}` breaks {:?}", self.rhyme));
        }
        out
    }

    fn describe_at(&self, pos: usize, strict: bool) -> String {
        let mut parts = Vec::new();
        if self.enforced(pos, strict) && self.tones[pos] != ToneReq::Any {
            parts.push(format!("tone {}", self.tones[pos]));
        }
        if pos + 1 == self.length && self.rhyme != RhymeReq::Free {
            parts.push(format!("{:?}", self.rhyme));
        }
        if parts.is_empty() {
            parts.push("vocabulary".into());
        }
        format!("position {}: {}", pos + 1, parts.join(" + "))
    }
}

/// Constraints for the four lines. Line 2 ends level; line 3 ends oblique
/// and off the rhyme; line 4 ends level on the rhyme; line 1 is free.
pub fn quatrain_constraints(length: LengthClass, line2_rhyme: Option<RhymeCategory>) -> [Constraint; 4] {
    let n = length.chars();
    let tail = |req: ToneReq, rhyme: RhymeReq| Constraint::new(n, &[(n - 1, req)], rhyme).expect("tail position is in range");
    let (third, fourth) = match line2_rhyme {
        Some(cat) => (RhymeReq::MustNotRhyme(cat), RhymeReq::MustRhyme(cat)),
        None => (RhymeReq::Free, RhymeReq::Free),
    };
    [
        Constraint::free(n).expect("positive length"),
        tail(ToneReq::Ping, RhymeReq::Free),
        tail(ToneReq::Ze, third),
        tail(ToneReq::Ping, fourth),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamConfig {
    pub beam: usize,
    pub n: usize,
    pub strict: bool,
    /// Weight of the language model in the output distribution.
    pub lambda: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam: 10,
            n: 10,
            strict: false,
            lambda: 0.0,
        }
    }
}

/// A frozen encoder-decoder together with the inversion it was trained
/// with.
#[derive(Clone, Copy, Debug)]
pub struct Block<'a, T> {
    pub model: &'a Seq2Seq<T>,
    pub inversion: Inversion,
}

/// A frozen language model and the direction it reads lines in.
#[derive(Clone, Copy, Debug)]
pub struct LmBlock<'a, T> {
    pub lm: &'a LanguageModel<T>,
    pub inversion: Inversion,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate<T> {
    /// Ids in reading order.
    pub ids: Vec<usize>,
    pub chars: Vec<char>,
    pub log_prob: f64,
    /// `log_prob` divided by the line length.
    pub score: f64,
    /// Attention rows aligned with `chars`.
    pub attention: AttentionTrace<T>,
}

impl<T> Candidate<T> {
    pub fn text(&self) -> String {
        self.chars.iter().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamOutput<T> {
    pub candidates: Vec<Candidate<T>>,
    /// Set when nothing survived: the constraint that pruned last.
    pub diagnostic: Option<String>,
}

struct Hyp<T> {
    ids: Vec<usize>,
    state: Vec<T>,
    lm_state: Option<Vec<T>>,
    log_prob: f64,
    alphas: Vec<Vec<T>>,
}

/// Beam search over one line. Source ids are in reading order; the block's
/// inversion decides whether they are reversed and whether the line is
/// produced tail first.
pub fn beam_search<T: Scalar>(
    source: &[usize],
    block: Block<'_, T>,
    lm: Option<LmBlock<'_, T>>,
    vocab: &CharVocab,
    lexicon: &ToneRhymeLexicon,
    constraint: &Constraint,
    config: &BeamConfig,
) -> Result<BeamOutput<T>> {
    if config.beam == 0 {
        return Err(Error::Input("beam width must be at least 1".into()));
    }
    if config.n == 0 || config.n > config.beam {
        return Err(Error::Input(format!("n = {} must lie in 1..={}", config.n, config.beam)));
    }
    if !(0.0..=1.0).contains(&config.lambda) {
        return Err(Error::Domain(format!("lambda {} outside [0, 1]", config.lambda)));
    }
    let model = block.model;
    let dims = model.dims();
    if dims.vocab != vocab.len() {
        return Err(Error::Input(format!(
            "model vocabulary {} differs from loaded vocabulary {}",
            dims.vocab,
            vocab.len()
        )));
    }
    let lm = if config.lambda > 0.0 {
        let lm = lm.ok_or_else(|| Error::Input("lambda > 0 needs a language model".into()))?;
        if lm.lm.dims().vocab != dims.vocab {
            return Err(Error::Input("language model vocabulary differs from the block".into()));
        }
        if (lm.inversion == Inversion::Target) != (block.inversion == Inversion::Target) {
            return Err(Error::Input(format!(
                "language model reads inversion={} but block decodes with inversion={}",
                lm.inversion, block.inversion
            )));
        }
        Some(lm.lm)
    } else {
        None
    };
    let lambda = T::lit(config.lambda);
    let tail_first = block.inversion == Inversion::Target;
    let length = constraint.length();
    let position = |step: usize| if tail_first { length - 1 - step } else { step };

    // allowed ids per decode step
    let masks: Vec<Vec<usize>> = (0..length)
        .map(|step| {
            let pos = position(step);
            vocab
                .char_ids()
                .filter(|&id| id != UNK)
                .filter(|&id| constraint.admits_at(pos, vocab.char_of(id).expect("char id"), lexicon, config.strict))
                .collect()
        })
        .collect();
    if let Some(step) = masks.iter().position(Vec::is_empty) {
        return Ok(BeamOutput {
            candidates: Vec::new(),
            diagnostic: Some(format!("{} admits no character", constraint.describe_at(position(step), config.strict))),
        });
    }

    let src: Vec<usize> = if block.inversion == Inversion::Source {
        source.iter().rev().copied().collect()
    } else {
        source.to_vec()
    };
    let enc = model.encode(&src)?;
    let keys = model.attention_keys(&enc);
    let mut beam = vec![Hyp {
        ids: Vec::new(),
        state: model.initial_state(&enc),
        lm_state: lm.map(|m| m.initial_state()),
        log_prob: 0.0,
        alphas: Vec::new(),
    }];

    for (step, allowed) in masks.iter().enumerate() {
        // (log prob, hypothesis, id)
        let mut expansions: Vec<(f64, usize, usize)> = Vec::new();
        let mut advanced = Vec::with_capacity(beam.len());
        for (h, hyp) in beam.iter().enumerate() {
            let y_prev = hyp.ids.last().copied().unwrap_or(crate::corpus::BOS);
            let att = model.attend_with_keys(&hyp.state, &enc, &keys);
            let dec = model.decode_step(&hyp.state, y_prev, &att.context);
            let lm_step = match (lm, &hyp.lm_state) {
                (Some(m), Some(s)) => Some(m.step(s, y_prev)),
                _ => None,
            };
            let prob = |id: usize| match &lm_step {
                Some(l) => ((T::one() - lambda) * dec.dist[id] + lambda * l.dist[id]).as_f64(),
                None => dec.dist[id].as_f64(),
            };
            let mass: f64 = allowed.iter().map(|&id| prob(id)).sum();
            if mass > 0.0 && mass.is_finite() {
                let log_mass = mass.ln();
                for &id in allowed {
                    let p = prob(id);
                    if p > 0.0 {
                        expansions.push((hyp.log_prob + p.ln() - log_mass, h, id));
                    }
                }
            }
            advanced.push((dec.state, lm_step.map(|l| l.state), att.alpha));
        }
        if expansions.is_empty() {
            return Ok(BeamOutput {
                candidates: Vec::new(),
                diagnostic: Some(format!(
                    "{} left no probability mass",
                    constraint.describe_at(position(step), config.strict)
                )),
            });
        }
        expansions.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        expansions.truncate(config.beam);
        beam = expansions
            .into_iter()
            .map(|(log_prob, h, id)| {
                let (state, lm_state, alpha) = &advanced[h];
                let mut ids = beam[h].ids.clone();
                ids.push(id);
                let mut alphas = beam[h].alphas.clone();
                alphas.push(alpha.clone());
                Hyp {
                    ids,
                    state: state.clone(),
                    lm_state: lm_state.clone(),
                    log_prob,
                    alphas,
                }
            })
            .collect();
    }

    let candidates = beam
        .into_iter()
        .take(config.n)
        .map(|mut h| {
            if tail_first {
                h.ids.reverse();
                h.alphas.reverse();
            }
            Candidate {
                chars: vocab.decode(&h.ids),
                score: h.log_prob / length as f64,
                log_prob: h.log_prob,
                ids: h.ids,
                attention: AttentionTrace { alphas: h.alphas },
            }
        })
        .collect();
    Ok(BeamOutput {
        candidates,
        diagnostic: None,
    })
}

/// The three encoder-decoder blocks and the optional language model.
#[derive(Clone, Copy, Debug)]
pub struct QuatrainModels<'a, T> {
    pub wpb: Block<'a, T>,
    pub spb: Block<'a, T>,
    pub cpb: Block<'a, T>,
    pub lm: Option<LmBlock<'a, T>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerateConfig {
    pub length: LengthClass,
    pub beam: BeamConfig,
    /// Rank of the first-line candidate to keep, for drawing several
    /// poems from one keyword.
    pub first_line_rank: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            length: LengthClass::Seven,
            beam: BeamConfig::default(),
            first_line_rank: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineResult<T> {
    pub constraint: Constraint,
    /// Top-n list; `chosen` indexes into it.
    pub candidates: Vec<Candidate<T>>,
    pub chosen: usize,
}

impl<T> LineResult<T> {
    pub fn best(&self) -> &Candidate<T> {
        &self.candidates[self.chosen]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedQuatrain<T> {
    pub keyword: String,
    pub quatrain: Quatrain,
    pub lines: Vec<LineResult<T>>,
}

impl<T: Scalar> GeneratedQuatrain<T> {
    /// Sidecar report: one row per line with score, constraint check and
    /// the attention matrix shape.
    pub fn report(&self, lexicon: &ToneRhymeLexicon) -> String {
        let mut out = String::from("line\ttext\tscore\tviolations\tattention\n");
        for (i, l) in self.lines.iter().enumerate() {
            let c = l.best();
            let v = l.constraint.violations(&c.chars, lexicon);
            out.push_str(&format!(
                "{}\t{}\t{:.4}\t{}\t{}x{}\n",
                i + 1,
                c.text(),
                c.score,
                if v.is_empty() { "ok".to_string() } else { v.join("; ") },
                c.attention.rows(),
                c.attention.cols()
            ));
        }
        out
    }
}

/// Keyword to first line (WPB), then SPB, then CPB twice on the two
/// preceding lines joined by the separator.
pub fn generate_quatrain<T: Scalar>(
    keyword: &str,
    models: &QuatrainModels<'_, T>,
    vocab: &CharVocab,
    lexicon: &ToneRhymeLexicon,
    config: &GenerateConfig,
) -> Result<GeneratedQuatrain<T>> {
    let kw: Vec<char> = keyword.chars().collect();
    if kw.is_empty() || kw.len() > 3 {
        return Err(Error::Input(format!("keyword `{keyword}` must have 1 to 3 characters")));
    }
    let kw_ids = vocab
        .encode_strict(&kw)
        .map_err(|_| Error::Input(format!("keyword `{keyword}` has characters outside the vocabulary")))?;
    let mut beam_cfg = config.beam;
    if config.first_line_rank >= beam_cfg.n {
        beam_cfg.n = (config.first_line_rank + 1).min(beam_cfg.beam);
        if config.first_line_rank >= beam_cfg.n {
            return Err(Error::Input(format!(
                "first-line rank {} needs a beam wider than {}",
                config.first_line_rank, beam_cfg.beam
            )));
        }
    }

    let free = quatrain_constraints(config.length, None);
    let mut lines: Vec<LineResult<T>> = Vec::with_capacity(4);
    let run = |step: usize, source: &[usize], block: Block<'_, T>, constraint: &Constraint, cfg: &BeamConfig, pick: usize| {
        let out = beam_search(source, block, models.lm, vocab, lexicon, constraint, cfg)?;
        if out.candidates.len() <= pick {
            return Err(Error::Generation {
                step: line_step(step),
                reason: out
                    .diagnostic
                    .unwrap_or_else(|| format!("only {} candidates, wanted rank {pick}", out.candidates.len())),
            });
        }
        Ok(LineResult {
            constraint: constraint.clone(),
            candidates: out.candidates,
            chosen: pick,
        })
    };

    lines.push(run(1, &kw_ids, models.wpb, &free[0], &beam_cfg, config.first_line_rank)?);
    let top = &config.beam;
    let l1 = lines[0].best().ids.clone();
    lines.push(run(2, &l1, models.spb, &free[1], top, 0)?);
    let l2 = lines[1].best().ids.clone();
    let last2 = *lines[1].best().chars.last().expect("non-empty line");
    let rhyme = lexicon.rhyme_of(last2).ok_or_else(|| Error::Generation {
        step: line_step(2),
        reason: format!("final `{last2}` has no rhyme category"),
    })?;
    let cons = quatrain_constraints(config.length, Some(rhyme));
    let ctx = |a: &[usize], b: &[usize]| -> Vec<usize> { a.iter().copied().chain([SEP]).chain(b.iter().copied()).collect() };
    lines.push(run(3, &ctx(&l1, &l2), models.cpb, &cons[2], top, 0)?);
    let l3 = lines[2].best().ids.clone();
    lines.push(run(4, &ctx(&l2, &l3), models.cpb, &cons[3], top, 0)?);

    let poem_lines: Vec<PoemLine> = lines
        .iter()
        .map(|l| PoemLine::new(l.best().chars.clone()))
        .collect::<Result<_>>()?;
    let quatrain = Quatrain::new(poem_lines.try_into().expect("four lines"))?;
    Ok(GeneratedQuatrain {
        keyword: keyword.to_string(),
        quatrain,
        lines,
    })
}

fn line_step(line: usize) -> String {
    let block = match line {
        1 => "WPB",
        2 => "SPB",
        _ => "CPB",
    };
    format!("line {line} ({block})")
}

/// Ids of characters generation may emit.
pub fn emittable(id: usize) -> bool {
    id >= NUM_RESERVED && id != UNK
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Quatrain;
    use crate::model::Dims;
    use crate::numeric::Initializer;

    const AUTUMN_GOOSE: &str = "一声秋雁连天远|万里归帆隔水遥|惆怅旧游零落处|白头萧瑟满江桥";

    fn figure_one() -> Quatrain {
        AUTUMN_GOOSE.parse().unwrap()
    }

    #[test]
    fn figure_one_passes_its_constraints() {
        let lex = ToneRhymeLexicon::bundled();
        let q = figure_one();
        let rhyme = lex.rhyme_of(q.line(1).last());
        assert!(rhyme.is_some());
        let cons = quatrain_constraints(LengthClass::Seven, rhyme);
        for (c, line) in cons.iter().zip(q.lines()) {
            assert!(c.violations(line.chars(), &lex).is_empty(), "{line:?}");
        }
    }

    #[test]
    fn swapping_lines_two_and_three_fails() {
        let lex = ToneRhymeLexicon::bundled();
        let q = figure_one();
        let swapped = [q.line(0), q.line(2), q.line(1), q.line(3)];
        let cons = quatrain_constraints(LengthClass::Seven, lex.rhyme_of(swapped[1].last()));
        let failures: usize = cons
            .iter()
            .zip(swapped)
            .map(|(c, l)| c.violations(l.chars(), &lex).len())
            .sum();
        assert!(failures > 0);
    }

    #[test]
    fn line_three_rejects_the_line_two_rhyme() {
        let lex = ToneRhymeLexicon::bundled();
        let cat = lex.rhyme_of('遥').unwrap();
        let cons = quatrain_constraints(LengthClass::Seven, Some(cat));
        // 桥 shares the rhyme of 遥
        assert_eq!(lex.rhyme_of('桥'), Some(cat));
        let line: Vec<char> = "惆怅旧游零落桥".chars().collect();
        assert!(!cons[2].violations(&line, &lex).is_empty());
    }

    #[test]
    fn pattern_parsing_and_bounds() {
        let c = Constraint::from_pattern("*ZPPZZP", RhymeReq::Free).unwrap();
        assert_eq!(c.length(), 7);
        assert_eq!(c.tone(0), ToneReq::Any);
        assert_eq!(c.tail_tone(), ToneReq::Ping);
        assert!(Constraint::from_pattern("PX", RhymeReq::Free).is_err());
        assert!(Constraint::new(5, &[(5, ToneReq::Ping)], RhymeReq::Free).is_err());
    }

    #[test]
    fn either_satisfies_both_masks() {
        assert!(ToneReq::Ping.admits(Tone::Either));
        assert!(ToneReq::Ze.admits(Tone::Either));
        assert!(!ToneReq::Ping.admits(Tone::Unknown));
        assert!(ToneReq::Any.admits(Tone::Unknown));
    }

    fn toy_vocab() -> CharVocab {
        use crate::corpus::{build_vocab, PairKind, TrainingPair};
        let p = TrainingPair {
            source: "山水风月花".chars().collect(),
            target: "春秋天江楼".chars().collect(),
            kind: PairKind::LineToLine,
        };
        build_vocab(&[p], 1)
    }

    fn all_lines(vocab: &CharVocab, len: usize) -> Vec<Vec<usize>> {
        let ids: Vec<usize> = vocab.char_ids().filter(|&i| emittable(i)).collect();
        let mut out = vec![Vec::new()];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|p: Vec<usize>| {
                    ids.iter().map(move |&i| {
                        let mut q = p.clone();
                        q.push(i);
                        q
                    })
                })
                .collect();
        }
        out
    }

    fn masked_log_prob(model: &Seq2Seq<f64>, src: &[usize], line: &[usize], allowed_tail: &[usize]) -> f64 {
        // teacher-forced log probability with the tail mask renormalized
        let tf = model.teacher_forced(src, line).unwrap();
        let mut lp = 0.0;
        for (t, (_, d)) in tf.steps.iter().enumerate() {
            let allowed: Vec<usize> = if t + 1 == line.len() {
                allowed_tail.to_vec()
            } else {
                (NUM_RESERVED..d.dist.len()).collect()
            };
            let mass: f64 = allowed.iter().map(|&i| d.dist[i]).sum();
            lp += d.dist[line[t]].ln() - mass.ln();
        }
        lp
    }

    #[test]
    fn wide_beam_matches_exhaustive_search_and_narrow_beams_do_not_exceed_it() {
        let lex = ToneRhymeLexicon::bundled();
        let vocab = toy_vocab();
        let model = Seq2Seq::<f64>::init(Dims::new(vocab.len(), 4, 5), &mut Initializer::new(3));
        let cons = Constraint::new(3, &[(2, ToneReq::Ping)], RhymeReq::Free).unwrap();
        let src = vocab.encode(&"山水风".chars().collect::<Vec<_>>());
        let block = Block {
            model: &model,
            inversion: Inversion::None,
        };
        let tail: Vec<usize> = vocab
            .char_ids()
            .filter(|&i| ToneReq::Ping.admits(lex.tone_of(vocab.char_of(i).unwrap())))
            .collect();
        let best = all_lines(&vocab, 3)
            .into_iter()
            .filter(|l| tail.contains(&l[2]))
            .map(|l| masked_log_prob(&model, &src, &l, &tail))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut prev = f64::NEG_INFINITY;
        for w in [1, 2, 3, 5, 100] {
            let cfg = BeamConfig { beam: w, n: 1, ..BeamConfig::default() };
            let out = beam_search(&src, block, None, &vocab, &lex, &cons, &cfg).unwrap();
            let top = out.candidates[0].log_prob;
            assert!(top <= best + 1e-12);
            assert!(top >= prev - 1e-12, "width {w}: {top} < {prev}");
            prev = top;
        }
        assert!((prev - best).abs() < 1e-10);
    }

    #[test]
    fn target_inversion_decodes_tail_first_and_unreverses() {
        let lex = ToneRhymeLexicon::bundled();
        let vocab = toy_vocab();
        let model = Seq2Seq::<f64>::init(Dims::new(vocab.len(), 4, 5), &mut Initializer::new(8));
        let cons = Constraint::free(4).unwrap();
        let src = vocab.encode(&"山水".chars().collect::<Vec<_>>());
        let cfg = BeamConfig { beam: 3, n: 3, ..BeamConfig::default() };
        let inv = beam_search(&src, Block { model: &model, inversion: Inversion::Target }, None, &vocab, &lex, &cons, &cfg).unwrap();
        let raw = beam_search(&src, Block { model: &model, inversion: Inversion::None }, None, &vocab, &lex, &cons, &cfg).unwrap();
        for (a, b) in inv.candidates.iter().zip(&raw.candidates) {
            let rev: Vec<usize> = b.ids.iter().rev().copied().collect();
            assert_eq!(a.ids, rev);
            assert_eq!(a.log_prob, b.log_prob);
        }
    }

    #[test]
    fn impossible_constraint_reports_the_pruning_rule() {
        let lex = ToneRhymeLexicon::bundled();
        let vocab = toy_vocab();
        let model = Seq2Seq::<f64>::init(Dims::new(vocab.len(), 4, 5), &mut Initializer::new(8));
        let cat = lex.rhyme_of('遥').unwrap();
        let cons = Constraint::new(2, &[(1, ToneReq::Ping)], RhymeReq::MustRhyme(cat)).unwrap();
        let src = vocab.encode(&['山']);
        let out = beam_search(&src, Block { model: &model, inversion: Inversion::None }, None, &vocab, &lex, &cons, &BeamConfig::default()).unwrap();
        assert!(out.candidates.is_empty());
        let d = out.diagnostic.unwrap();
        assert!(d.contains("position 2") && d.contains("MustRhyme"), "{d}");
    }

    #[test]
    fn beam_arguments_are_validated() {
        let lex = ToneRhymeLexicon::bundled();
        let vocab = toy_vocab();
        let model = Seq2Seq::<f64>::init(Dims::new(vocab.len(), 4, 5), &mut Initializer::new(8));
        let cons = Constraint::free(2).unwrap();
        let b = Block { model: &model, inversion: Inversion::None };
        let bad = BeamConfig { beam: 2, n: 3, ..BeamConfig::default() };
        assert!(beam_search(&[4], b, None, &vocab, &lex, &cons, &bad).is_err());
        let lm_needed = BeamConfig { lambda: 0.5, ..BeamConfig::default() };
        assert!(beam_search(&[4], b, None, &vocab, &lex, &cons, &lm_needed).is_err());
    }
}
