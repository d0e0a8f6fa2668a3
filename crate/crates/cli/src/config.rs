use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use jueju::corpus::LengthClass;
use jueju::model::Inversion;

/// Everything a run needs. Loaded from a `key = value` file, then
/// overridden by flags.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// `None` uses the bundled sample corpus.
    pub corpus: Option<PathBuf>,
    pub tone_lexicon: Option<PathBuf>,
    pub rhyme_lexicon: Option<PathBuf>,
    pub out_dir: PathBuf,

    pub embed: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub checkpoint_interval: usize,
    pub clip_norm: f64,
    pub seed: u64,
    pub inversion: Inversion,
    pub lambda: f64,
    pub wpb_epochs: usize,
    pub wpb_learning_rate: f64,
    pub lm_epochs: usize,

    /// Comma-separated; empty picks frequent bigrams automatically.
    pub keywords: Vec<String>,
    pub auto_keywords: usize,
    pub word_pair_cap: usize,
    /// Every n-th quatrain goes to the test split; 0 keeps all for training.
    pub test_every: usize,

    pub beam: usize,
    pub n: usize,
    pub length: LengthClass,
    pub strict_tones: bool,
    pub poems_per_keyword: usize,

    pub references: usize,
    /// Test quatrains evaluated per length class.
    pub eval_limit: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            tone_lexicon: None,
            rhyme_lexicon: None,
            out_dir: PathBuf::from("jueju-out"),
            embed: 32,
            hidden: 64,
            epochs: 10,
            learning_rate: jueju::trainer::DEFAULT_LEARNING_RATE,
            checkpoint_interval: 0,
            clip_norm: jueju::trainer::DEFAULT_CLIP_NORM,
            seed: 1,
            inversion: Inversion::Target,
            lambda: 0.0,
            wpb_epochs: 5,
            wpb_learning_rate: jueju::trainer::DEFAULT_LEARNING_RATE,
            lm_epochs: 10,
            keywords: Vec::new(),
            auto_keywords: 50,
            word_pair_cap: 20,
            test_every: 10,
            beam: 10,
            n: 10,
            length: LengthClass::Seven,
            strict_tones: false,
            poems_per_keyword: 1,
            references: jueju::evaluator::DEFAULT_REFERENCES,
            eval_limit: 100,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| anyhow::anyhow!("bad value `{value}` for `{key}`: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => bail!("bad value `{value}` for `{key}`: expected true or false"),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || Some(PathBuf::from(value));
        match key {
            "corpus" => self.corpus = path(),
            "tone_lexicon" => self.tone_lexicon = path(),
            "rhyme_lexicon" => self.rhyme_lexicon = path(),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "embed" => self.embed = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "checkpoint_interval" => self.checkpoint_interval = parse(key, value)?,
            "clip_norm" => self.clip_norm = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "inversion" | "invert" => self.inversion = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "wpb_epochs" => self.wpb_epochs = parse(key, value)?,
            "wpb_learning_rate" => self.wpb_learning_rate = parse(key, value)?,
            "lm_epochs" => self.lm_epochs = parse(key, value)?,
            "keywords" => {
                self.keywords = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "auto_keywords" => self.auto_keywords = parse(key, value)?,
            "word_pair_cap" => self.word_pair_cap = parse(key, value)?,
            "test_every" => self.test_every = parse(key, value)?,
            "beam" => self.beam = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "length" => self.length = parse(key, value)?,
            "strict_tones" => self.strict_tones = parse_bool(key, value)?,
            "poems_per_keyword" => self.poems_per_keyword = parse(key, value)?,
            "references" => self.references = parse(key, value)?,
            "eval_limit" => self.eval_limit = parse(key, value)?,
            _ => bail!("unknown config key `{key}`"),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse_str(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("line {}: expected key = value", i + 1);
            };
            cfg.set(k.trim(), v.trim()).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed == 0 || self.hidden == 0 {
            bail!("embed and hidden must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.wpb_learning_rate > 0.0) {
            bail!("learning rates must be positive");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            bail!("lambda must lie in [0, 1]");
        }
        if self.beam == 0 || self.n == 0 || self.n > self.beam {
            bail!("need 1 <= n <= beam, got n = {} and beam = {}", self.n, self.beam);
        }
        if self.poems_per_keyword == 0 || self.poems_per_keyword > self.beam {
            bail!("poems_per_keyword must lie in 1..=beam");
        }
        Ok(())
    }

    pub fn data_dir(&self) -> PathBuf {
        self.out_dir.join("data")
    }

    pub fn model_dir(&self) -> PathBuf {
        self.out_dir.join("models")
    }
}
