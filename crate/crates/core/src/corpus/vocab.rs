use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{TrainingPair, SEP_CHAR};
use crate::error::{Error, Result};

pub const BOS: usize = 0;
pub const EOS: usize = 1;
pub const SEP: usize = 2;
pub const UNK: usize = 3;
pub const NUM_RESERVED: usize = 4;

/// Placeholder printed for ids that decode to no poem character.
pub const UNK_CHAR: char = '□';

/// Character ↔ id bijection with ids `0..4` reserved for BOS, EOS, SEP, UNK.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>,
    counts: Vec<usize>,
    index: HashMap<char, usize>,
}

/// A pair converted to ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedPair {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

impl CharVocab {
    fn from_entries(entries: Vec<(char, usize)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, &(c, _)) in entries.iter().enumerate() {
            if c == SEP_CHAR || index.insert(c, i + NUM_RESERVED).is_some() {
                return Err(Error::Input(format!("vocabulary entry {c:?} is reserved or duplicated")));
            }
        }
        let (chars, counts) = entries.into_iter().unzip();
        Ok(Self {
            chars,
            counts,
            index,
        })
    }

    /// Number of ids including the reserved ones.
    pub fn len(&self) -> usize {
        self.chars.len() + NUM_RESERVED
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of non-reserved entries.
    pub fn num_chars(&self) -> usize {
        self.chars.len()
    }

    pub fn id(&self, c: char) -> Option<usize> {
        if c == SEP_CHAR {
            return Some(SEP);
        }
        self.index.get(&c).copied()
    }

    pub fn id_or_unk(&self, c: char) -> usize {
        self.id(c).unwrap_or(UNK)
    }

    pub fn char_of(&self, id: usize) -> Option<char> {
        id.checked_sub(NUM_RESERVED).and_then(|i| self.chars.get(i).copied())
    }

    pub fn count_of(&self, id: usize) -> usize {
        id.checked_sub(NUM_RESERVED)
            .and_then(|i| self.counts.get(i).copied())
            .unwrap_or(0)
    }

    pub fn is_reserved(id: usize) -> bool {
        id < NUM_RESERVED
    }

    pub fn contains(&self, c: char) -> bool {
        self.index.contains_key(&c)
    }

    pub fn encode(&self, chars: &[char]) -> Vec<usize> {
        chars.iter().map(|&c| self.id_or_unk(c)).collect()
    }

    /// Like [`encode`](Self::encode) but fails on the first unknown character.
    pub fn encode_strict(&self, chars: &[char]) -> Result<Vec<usize>> {
        chars
            .iter()
            .map(|&c| {
                self.id(c)
                    .ok_or_else(|| Error::Input(format!("character {c:?} is not in the vocabulary")))
            })
            .collect()
    }

    pub fn encode_pair(&self, pair: &TrainingPair) -> EncodedPair {
        EncodedPair {
            source: self.encode(&pair.source),
            target: self.encode(&pair.target),
        }
    }

    /// Maps ids back to characters; SEP becomes `|`, BOS/EOS are dropped and
    /// anything else unknown becomes [`UNK_CHAR`].
    pub fn decode(&self, ids: &[usize]) -> Vec<char> {
        ids.iter()
            .filter_map(|&id| match id {
                BOS | EOS => None,
                SEP => Some(SEP_CHAR),
                _ => Some(self.char_of(id).unwrap_or(UNK_CHAR)),
            })
            .collect()
    }

    pub fn decode_string(&self, ids: &[usize]) -> String {
        self.decode(ids).into_iter().collect()
    }

    /// Non-reserved ids in ascending order.
    pub fn char_ids(&self) -> std::ops::Range<usize> {
        NUM_RESERVED..self.len()
    }

    /// One `char<TAB>count` line per non-reserved id, in id order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        for (c, n) in self.chars.iter().zip(&self.counts) {
            writeln!(buf, "{c}\t{n}").expect("write to Vec");
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, message: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        };
        let mut entries = Vec::new();
        for (i, l) in text.lines().enumerate() {
            let (c, n) = l.split_once('\t').ok_or_else(|| parse_err(i + 1, "expected char<TAB>count"))?;
            let mut cs = c.chars();
            let (Some(ch), None) = (cs.next(), cs.next()) else {
                return Err(parse_err(i + 1, "expected a single character"));
            };
            let n = n.trim().parse().map_err(|_| parse_err(i + 1, "bad count"))?;
            entries.push((ch, n));
        }
        Self::from_entries(entries)
    }
}

/// Assigns ids to characters seen at least `min_count` times across pair
/// sources and targets: frequency descending, then code point ascending.
pub fn build_vocab(pairs: &[TrainingPair], min_count: usize) -> CharVocab {
    let mut freq: BTreeMap<char, usize> = BTreeMap::new();
    for p in pairs {
        for &c in p.source.iter().chain(&p.target) {
            if c != SEP_CHAR {
                *freq.entry(c).or_default() += 1;
            }
        }
    }
    let mut entries: Vec<(char, usize)> = freq.into_iter().filter(|&(_, n)| n >= min_count).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    CharVocab::from_entries(entries).expect("distinct non-separator characters")
}
