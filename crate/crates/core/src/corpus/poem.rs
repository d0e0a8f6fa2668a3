use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Separator between the four lines of a corpus record.
pub const LINE_DELIMITER: char = '|';

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LengthClass {
    Five,
    Seven,
}

impl LengthClass {
    pub fn chars(self) -> usize {
        match self {
            LengthClass::Five => 5,
            LengthClass::Seven => 7,
        }
    }

    pub fn from_len(n: usize) -> Option<Self> {
        match n {
            5 => Some(LengthClass::Five),
            7 => Some(LengthClass::Seven),
            _ => None,
        }
    }
}

impl FromStr for LengthClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .parse::<usize>()
            .ok()
            .and_then(LengthClass::from_len)
            .ok_or_else(|| Error::Input(format!("line length must be 5 or 7, got `{s}`")))
    }
}

impl fmt::Display for LengthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.chars())
    }
}

/// A poem character must be a letter or ideograph; whitespace, punctuation
/// and the record delimiter are rejected.
pub fn is_poem_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// One 5- or 7-character line.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PoemLine {
    chars: Vec<char>,
    length_class: LengthClass,
}

impl PoemLine {
    pub fn new(chars: Vec<char>) -> Result<Self> {
        let length_class = LengthClass::from_len(chars.len()).ok_or_else(|| {
            Error::Input(format!("line has {} characters, expected 5 or 7", chars.len()))
        })?;
        if let Some(bad) = chars.iter().find(|c| !is_poem_char(**c)) {
            return Err(Error::Input(format!("invalid character {bad:?} in line")));
        }
        Ok(Self {
            chars,
            length_class,
        })
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn length_class(&self) -> LengthClass {
        self.length_class
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn last(&self) -> char {
        *self.chars.last().expect("lines are never empty")
    }

    /// True when `word` occurs as a contiguous run of characters.
    pub fn contains_word(&self, word: &[char]) -> bool {
        !word.is_empty() && self.chars.windows(word.len()).any(|w| w == word)
    }
}

impl FromStr for PoemLine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PoemLine::new(s.trim().chars().collect())
    }
}

impl fmt::Display for PoemLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.chars.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

/// Four lines of one length class.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Quatrain {
    lines: [PoemLine; 4],
}

impl Quatrain {
    pub fn new(lines: [PoemLine; 4]) -> Result<Self> {
        let class = lines[0].length_class();
        if lines.iter().any(|l| l.length_class() != class) {
            return Err(Error::Input("lines of a quatrain differ in length".into()));
        }
        Ok(Self { lines })
    }

    pub fn lines(&self) -> &[PoemLine; 4] {
        &self.lines
    }

    pub fn line(&self, i: usize) -> &PoemLine {
        &self.lines[i]
    }

    pub fn length_class(&self) -> LengthClass {
        self.lines[0].length_class()
    }
}

impl FromStr for Quatrain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(LINE_DELIMITER).collect();
        if parts.len() != 4 {
            return Err(Error::Input(format!("record has {} lines, expected 4", parts.len())));
        }
        let lines = [
            parts[0].parse()?,
            parts[1].parse()?,
            parts[2].parse()?,
            parts[3].parse()?,
        ];
        Quatrain::new(lines)
    }
}

impl fmt::Display for Quatrain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.lines.iter().enumerate() {
            if i > 0 {
                write!(f, "{LINE_DELIMITER}")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// A rejected corpus record.
#[derive(Clone, Debug, PartialEq)]
pub struct Malformed {
    pub line_no: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedCorpus {
    pub quatrains: Vec<Quatrain>,
    pub malformed: Vec<Malformed>,
}

impl ParsedCorpus {
    /// Non-fatal warning for an empty result.
    pub fn warning(&self) -> Option<String> {
        self.quatrains.is_empty().then(|| {
            format!(
                "corpus contains no valid quatrains ({} malformed records)",
                self.malformed.len()
            )
        })
    }
}

/// Parses one quatrain per non-blank line, collecting malformed records.
pub fn parse_corpus_str(text: &str) -> ParsedCorpus {
    let mut out = ParsedCorpus::default();
    for (i, raw) in text.lines().enumerate() {
        let raw = raw.trim_start_matches('\u{feff}');
        if raw.trim().is_empty() {
            continue;
        }
        match raw.parse::<Quatrain>() {
            Ok(q) => out.quatrains.push(q),
            Err(e) => out.malformed.push(Malformed {
                line_no: i + 1,
                reason: e.to_string(),
            }),
        }
    }
    out
}

pub fn parse_corpus(path: impl AsRef<Path>) -> Result<ParsedCorpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_corpus_str(&text))
}
