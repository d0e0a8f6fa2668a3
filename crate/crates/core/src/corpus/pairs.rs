use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::{PoemLine, Quatrain};
use crate::error::{Error, Result};

/// Textual stand-in for the separator id inside context sources.
pub const SEP_CHAR: char = '|';

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairKind {
    LineToLine,
    ContextToLine,
    WordToLine,
}

impl PairKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PairKind::LineToLine => "line2line",
            PairKind::ContextToLine => "context2line",
            PairKind::WordToLine => "word2line",
        }
    }
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line2line" => Ok(PairKind::LineToLine),
            "context2line" => Ok(PairKind::ContextToLine),
            "word2line" => Ok(PairKind::WordToLine),
            other => Err(Error::Input(format!("unknown pair kind `{other}`"))),
        }
    }
}

/// A source/target pair in characters; context sources carry one
/// [`SEP_CHAR`] between the two lines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingPair {
    pub source: Vec<char>,
    pub target: Vec<char>,
    pub kind: PairKind,
}

impl TrainingPair {
    fn line_to_line(a: &PoemLine, b: &PoemLine) -> Self {
        Self {
            source: a.chars().to_vec(),
            target: b.chars().to_vec(),
            kind: PairKind::LineToLine,
        }
    }

    fn context_to_line(a: &PoemLine, b: &PoemLine, target: &PoemLine) -> Self {
        let mut source = Vec::with_capacity(a.len() + b.len() + 1);
        source.extend_from_slice(a.chars());
        source.push(SEP_CHAR);
        source.extend_from_slice(b.chars());
        Self {
            source,
            target: target.chars().to_vec(),
            kind: PairKind::ContextToLine,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.source.is_empty() || self.target.is_empty() {
            return Err(Error::Input("pair with an empty side".into()));
        }
        let seps = self.source.iter().filter(|&&c| c == SEP_CHAR).count();
        let ok = match self.kind {
            PairKind::ContextToLine => seps == 1,
            PairKind::WordToLine => seps == 0 && (1..=3).contains(&self.source.len()),
            PairKind::LineToLine => seps == 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!("source does not fit pair kind {}", self.kind)))
        }
    }
}

impl fmt::Display for TrainingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.source.iter().collect();
        let t: String = self.target.iter().collect();
        write!(f, "{s}\t{t}\t{}", self.kind)
    }
}

impl FromStr for TrainingPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut cols = s.split('\t');
        let (Some(src), Some(tgt), Some(kind), None) = (cols.next(), cols.next(), cols.next(), cols.next())
        else {
            return Err(Error::Input("pair line needs exactly 3 tab-separated columns".into()));
        };
        let pair = TrainingPair {
            source: src.chars().collect(),
            target: tgt.chars().collect(),
            kind: kind.parse()?,
        };
        pair.validate()?;
        Ok(pair)
    }
}

/// Line-to-line pairs `<L1,L2>, <L2,L3>, <L3,L4>` and context pairs
/// `<L1·SEP·L2, L3>, <L2·SEP·L3, L4>` for every quatrain, in corpus order.
pub fn extract_pairs(quatrains: &[Quatrain]) -> (Vec<TrainingPair>, Vec<TrainingPair>) {
    let mut spb = Vec::with_capacity(quatrains.len() * 3);
    let mut cpb = Vec::with_capacity(quatrains.len() * 2);
    for q in quatrains {
        let l = q.lines();
        for i in 0..3 {
            spb.push(TrainingPair::line_to_line(&l[i], &l[i + 1]));
        }
        for i in 0..2 {
            cpb.push(TrainingPair::context_to_line(&l[i], &l[i + 1], &l[i + 2]));
        }
    }
    (spb, cpb)
}

/// Per-keyword pair counts from [`make_word_line_pairs`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WordPairReport {
    pub counts: Vec<(String, usize)>,
}

impl WordPairReport {
    pub fn absent(&self) -> impl Iterator<Item = &str> {
        self.counts.iter().filter(|(_, n)| *n == 0).map(|(w, _)| w.as_str())
    }
}

/// For each keyword, up to `per_word_cap` `<keyword, line>` pairs taken from
/// lines containing the keyword, in corpus order.
pub fn make_word_line_pairs(
    keywords: &[String],
    quatrains: &[Quatrain],
    per_word_cap: usize,
) -> Result<(Vec<TrainingPair>, WordPairReport)> {
    let mut pairs = Vec::new();
    let mut report = WordPairReport::default();
    for kw in keywords {
        let word: Vec<char> = kw.chars().collect();
        if !(1..=3).contains(&word.len()) || word.iter().any(|&c| !super::is_poem_char(c)) {
            return Err(Error::Input(format!("keyword `{kw}` must be 1-3 poem characters")));
        }
        let before = pairs.len();
        let lines = quatrains.iter().flat_map(|q| q.lines().iter());
        for line in lines.filter(|l| l.contains_word(&word)).take(per_word_cap) {
            pairs.push(TrainingPair {
                source: word.clone(),
                target: line.chars().to_vec(),
                kind: PairKind::WordToLine,
            });
        }
        report.counts.push((kw.clone(), pairs.len() - before));
    }
    Ok((pairs, report))
}

pub fn write_pairs(path: impl AsRef<Path>, pairs: &[TrainingPair]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for p in pairs {
        writeln!(buf, "{p}").expect("write to Vec");
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<TrainingPair>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.parse().map_err(|e: Error| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
