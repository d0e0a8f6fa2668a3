use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const BUNDLED_TONES: &str = include_str!("../../data/tone.tsv");
const BUNDLED_RHYMES: &str = include_str!("../../data/rhyme.tsv");

/// Tone class of a character in the classical system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tone {
    /// Level tone.
    Ping,
    /// Oblique tone.
    Ze,
    /// Has readings in both classes; satisfies either requirement.
    Either,
    Unknown,
}

impl Tone {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "P" | "Ping" | "ping" => Some(Tone::Ping),
            "Z" | "Ze" | "ze" => Some(Tone::Ze),
            "E" | "*" | "Either" | "either" => Some(Tone::Either),
            _ => None,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Tone::Ping => 'P',
            Tone::Ze => 'Z',
            Tone::Either => '*',
            Tone::Unknown => '?',
        }
    }
}

impl fmt::Display for Tone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Index of a rhyme category in the lexicon's sorted category names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RhymeCategory(pub u16);

/// Per-character tone and rhyme tables.
#[derive(Clone, Debug, Default)]
pub struct ToneRhymeLexicon {
    tones: HashMap<char, Tone>,
    rhymes: HashMap<char, RhymeCategory>,
    rhyme_names: Vec<String>,
}

fn tsv_rows(text: &str) -> impl Iterator<Item = (usize, &str, &str)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            let (a, b) = l.split_once('\t').unwrap_or((l, ""));
            (i + 1, a.trim(), b.trim())
        })
}

fn single_char(s: &str) -> Option<char> {
    let mut cs = s.chars();
    match (cs.next(), cs.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

impl ToneRhymeLexicon {
    /// Parses the two TSV tables (`char<TAB>P|Z|E` and `char<TAB>category`).
    /// `origin` names the source in error messages.
    pub fn parse(tone_tsv: &str, rhyme_tsv: &str, origin: &Path) -> Result<Self> {
        let err = |line, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut tones = HashMap::new();
        for (line, c, t) in tsv_rows(tone_tsv) {
            let c = single_char(c).ok_or_else(|| err(line, format!("expected one character, got `{c}`")))?;
            let t = Tone::parse(t).ok_or_else(|| err(line, format!("unknown tone class `{t}`")))?;
            tones.insert(c, t);
        }

        let mut raw = Vec::new();
        for (line, c, r) in tsv_rows(rhyme_tsv) {
            let c = single_char(c).ok_or_else(|| err(line, format!("expected one character, got `{c}`")))?;
            if r.is_empty() {
                return Err(err(line, "missing rhyme category".into()));
            }
            raw.push((c, r));
        }
        let rhyme_names: Vec<String> = raw
            .iter()
            .map(|(_, r)| r.to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let rhymes = raw
            .into_iter()
            .map(|(c, r)| {
                let idx = rhyme_names.binary_search_by(|n| n.as_str().cmp(r)).expect("name collected");
                (c, RhymeCategory(idx as u16))
            })
            .collect();
        Ok(Self {
            tones,
            rhymes,
            rhyme_names,
        })
    }

    pub fn load(tone_path: impl AsRef<Path>, rhyme_path: impl AsRef<Path>) -> Result<Self> {
        let (tp, rp) = (tone_path.as_ref(), rhyme_path.as_ref());
        let tones = fs::read_to_string(tp).map_err(|e| Error::io(tp, e))?;
        let rhymes = fs::read_to_string(rp).map_err(|e| Error::io(rp, e))?;
        Self::parse(&tones, &rhymes, tp)
    }

    /// Tables covering the bundled sample corpus.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TONES, BUNDLED_RHYMES, Path::new("<bundled>"))
            .expect("bundled lexicon parses")
    }

    pub fn tone_of(&self, c: char) -> Tone {
        self.tones.get(&c).copied().unwrap_or(Tone::Unknown)
    }

    pub fn rhyme_of(&self, c: char) -> Option<RhymeCategory> {
        self.rhymes.get(&c).copied()
    }

    pub fn rhyme_name(&self, cat: RhymeCategory) -> Option<&str> {
        self.rhyme_names.get(cat.0 as usize).map(String::as_str)
    }

    pub fn num_rhyme_categories(&self) -> usize {
        self.rhyme_names.len()
    }

    pub fn num_tone_entries(&self) -> usize {
        self.tones.len()
    }
}
