//! Corpus parsing, training-pair extraction, vocabulary and tone/rhyme tables.

mod lexicon;
mod pairs;
mod poem;
mod vocab;

pub use lexicon::{RhymeCategory, Tone, ToneRhymeLexicon};
pub use pairs::{
    extract_pairs, make_word_line_pairs, read_pairs, write_pairs, PairKind, TrainingPair,
    WordPairReport, SEP_CHAR,
};
pub use poem::{
    is_poem_char, parse_corpus, parse_corpus_str, LengthClass, Malformed, ParsedCorpus, PoemLine,
    Quatrain, LINE_DELIMITER,
};
pub use vocab::{build_vocab, CharVocab, EncodedPair, BOS, EOS, NUM_RESERVED, SEP, UNK, UNK_CHAR};

/// 500 Tang quatrains (250 five-character, 250 seven-character) whose tail
/// characters follow the level/oblique and rhyme rules.
pub const SAMPLE_CORPUS: &str = include_str!("../../data/sample_corpus.txt");
