#![allow(dead_code)]

use jueju::corpus::{
    build_vocab, extract_pairs, parse_corpus_str, CharVocab, LengthClass, Quatrain, ToneRhymeLexicon, TrainingPair,
    SAMPLE_CORPUS,
};
use jueju::generator::{beam_search, quatrain_constraints, BeamConfig, Block, Constraint};
use jueju::model::Inversion;
use jueju::trainer::{self, BlockKind, TrainConfig};
use jueju::Seq2Seq;

pub fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

pub fn sample() -> Vec<Quatrain> {
    parse_corpus_str(SAMPLE_CORPUS).quatrains
}

pub fn sample_of(class: LengthClass, n: usize) -> Vec<Quatrain> {
    sample().into_iter().filter(|q| q.length_class() == class).take(n).collect()
}

/// Twenty line-to-line pairs from the first compliant five-character
/// poems, each with the tail constraint of its target position.
pub struct Toy {
    pub pairs: Vec<TrainingPair>,
    pub constraints: Vec<Constraint>,
    pub vocab: CharVocab,
}

pub fn toy() -> Toy {
    let lex = ToneRhymeLexicon::bundled();
    let mut pairs = Vec::new();
    let mut constraints = Vec::new();
    // poems whose own lines meet the tail rules, so the targets are reachable
    for q in sample_of(LengthClass::Five, usize::MAX) {
        if pairs.len() >= 20 {
            break;
        }
        let cons = quatrain_constraints(q.length_class(), lex.rhyme_of(q.line(1).last()));
        if (1..4).any(|i| !cons[i].violations(q.line(i).chars(), &lex).is_empty()) {
            continue;
        }
        let (spb, _) = extract_pairs(std::slice::from_ref(&q));
        for (i, p) in spb.into_iter().enumerate() {
            pairs.push(p);
            constraints.push(cons[i + 1].clone());
        }
    }
    pairs.truncate(20);
    constraints.truncate(20);
    let vocab = build_vocab(&pairs, 1);
    Toy {
        pairs,
        constraints,
        vocab,
    }
}

pub fn toy_config(inversion: Inversion) -> TrainConfig {
    TrainConfig {
        epochs: 500,
        learning_rate: 0.1,
        seed: 7,
        inversion,
        block: BlockKind::Spb,
        embed: 16,
        hidden: 32,
        ..TrainConfig::default()
    }
}

pub fn train_toy(toy: &Toy, inversion: Inversion) -> trainer::TrainOutcome<Seq2Seq, f64> {
    trainer::train(&toy.pairs, &toy.vocab, &toy_config(inversion), None, None).expect("toy training")
}

/// Beam-1 constrained decode of every toy source; returns how many match
/// their target.
pub fn greedy_hits(toy: &Toy, model: &Seq2Seq, inversion: Inversion) -> usize {
    let lex = ToneRhymeLexicon::bundled();
    let cfg = BeamConfig {
        beam: 1,
        n: 1,
        ..BeamConfig::default()
    };
    toy.pairs
        .iter()
        .zip(&toy.constraints)
        .filter(|(p, c)| {
            let out = beam_search(
                &toy.vocab.encode(&p.source),
                Block { model, inversion },
                None,
                &toy.vocab,
                &lex,
                c,
                &cfg,
            )
            .expect("decode");
            out.candidates.first().is_some_and(|c| c.chars == p.target)
        })
        .count()
}
