use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use jueju::analyzer;
use jueju::corpus::{
    build_vocab, extract_pairs, make_word_line_pairs, parse_corpus, parse_corpus_str, read_pairs, write_pairs,
    CharVocab, LengthClass, ParsedCorpus, Quatrain, ToneRhymeLexicon, SAMPLE_CORPUS,
};
use jueju::evaluator::{self, BleuRow, GprsRow, Record, ReferenceIndex};
use jueju::generator::{self, BeamConfig, Block, GenerateConfig, LmBlock, QuatrainModels};
use jueju::model::{Inversion, ModelKind};
use jueju::trainer::{self, BlockKind, TrainConfig};
use jueju::{Checkpoint, LanguageModel, Seq2Seq};

use crate::config::RunConfig;

/// Error carrying a process exit code.
#[derive(Debug)]
pub struct Coded {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for Coded {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Coded {}

pub const EXIT_IO: i32 = 2;
pub const EXIT_CHECKPOINT: i32 = 3;
pub const EXIT_GENERATION: i32 = 4;

pub fn coded(code: i32, message: impl Into<String>) -> anyhow::Error {
    Coded {
        code,
        message: message.into(),
    }
    .into()
}

fn io_err(e: jueju::Error) -> anyhow::Error {
    match e {
        jueju::Error::Io { .. } => coded(EXIT_IO, e.to_string()),
        other => other.into(),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| coded(EXIT_IO, format!("{}: {e}", path.display())))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| coded(EXIT_IO, format!("{}: {e}", path.display())))
}

fn lexicon(cfg: &RunConfig) -> Result<ToneRhymeLexicon> {
    match (&cfg.tone_lexicon, &cfg.rhyme_lexicon) {
        (Some(t), Some(r)) => ToneRhymeLexicon::load(t, r).map_err(io_err),
        (None, None) => Ok(ToneRhymeLexicon::bundled()),
        _ => Err(coded(EXIT_IO, "tone_lexicon and rhyme_lexicon must be given together")),
    }
}

fn load_corpus(cfg: &RunConfig) -> Result<ParsedCorpus> {
    let parsed = match &cfg.corpus {
        Some(p) => parse_corpus(p).map_err(io_err)?,
        None => parse_corpus_str(SAMPLE_CORPUS),
    };
    if let Some(w) = parsed.warning() {
        return Err(coded(EXIT_IO, w));
    }
    for m in &parsed.malformed {
        eprintln!("warning: corpus line {}: {}", m.line_no, m.reason);
    }
    Ok(parsed)
}

/// The most frequent two-character words across all lines, ties by text.
pub fn auto_keywords(quatrains: &[Quatrain], k: usize) -> Vec<String> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for q in quatrains {
        for l in q.lines() {
            for w in l.chars().windows(2) {
                *counts.entry(w.iter().collect()).or_insert(0) += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().take(k).map(|(w, _)| w).collect()
}

fn quatrain_lines(qs: &[Quatrain]) -> String {
    qs.iter().map(|q| format!("{q}\n")).collect()
}

pub fn prepare(cfg: &RunConfig) -> Result<()> {
    // everything is computed before the first write
    let parsed = load_corpus(cfg)?;
    let all = &parsed.quatrains;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, q) in all.iter().enumerate() {
        if cfg.test_every > 0 && (i + 1) % cfg.test_every == 0 {
            test.push(q.clone());
        } else {
            train.push(q.clone());
        }
    }
    if train.is_empty() {
        return Err(coded(EXIT_IO, "no training quatrains left after the test split"));
    }
    let (spb_all, cpb_all) = extract_pairs(all);
    let (spb, cpb) = extract_pairs(&train);
    let keywords = if cfg.keywords.is_empty() {
        auto_keywords(&train, cfg.auto_keywords)
    } else {
        cfg.keywords.clone()
    };
    let (wpb, report) = make_word_line_pairs(&keywords, &train, cfg.word_pair_cap)?;
    let vocab = build_vocab(&[spb.clone(), cpb.clone(), wpb.clone()].concat(), 1);

    let mut stats = String::new();
    let _ = writeln!(stats, "quatrains\t{}", all.len());
    let _ = writeln!(stats, "malformed\t{}", parsed.malformed.len());
    let _ = writeln!(stats, "train_quatrains\t{}", train.len());
    let _ = writeln!(stats, "test_quatrains\t{}", test.len());
    let _ = writeln!(stats, "spb_pairs\t{}", spb_all.len());
    let _ = writeln!(stats, "cpb_pairs\t{}", cpb_all.len());
    let _ = writeln!(stats, "spb_train_pairs\t{}", spb.len());
    let _ = writeln!(stats, "cpb_train_pairs\t{}", cpb.len());
    let _ = writeln!(stats, "wpb_train_pairs\t{}", wpb.len());
    let _ = writeln!(stats, "keywords\t{}", keywords.len());
    let _ = writeln!(stats, "vocab\t{}", vocab.len());
    for w in report.absent() {
        let _ = writeln!(stats, "absent_keyword\t{w}");
    }

    let dir = cfg.data_dir();
    mkdir(&dir)?;
    write_pairs(dir.join("spb.pairs"), &spb).map_err(io_err)?;
    write_pairs(dir.join("cpb.pairs"), &cpb).map_err(io_err)?;
    write_pairs(dir.join("wpb.pairs"), &wpb).map_err(io_err)?;
    vocab.save(dir.join("vocab.tsv")).map_err(io_err)?;
    write(&dir.join("train.txt"), quatrain_lines(&train))?;
    write(&dir.join("test.txt"), quatrain_lines(&test))?;
    write(&dir.join("keywords.txt"), keywords.iter().map(|k| format!("{k}\n")).collect::<String>())?;
    write(&dir.join("stats.tsv"), &stats)?;
    print!("{stats}");
    Ok(())
}

fn data_file(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    let p = cfg.data_dir().join(name);
    if !p.exists() {
        return Err(coded(EXIT_IO, format!("{} not found; run `jueju prepare` first", p.display())));
    }
    Ok(p)
}

fn vocab(cfg: &RunConfig) -> Result<CharVocab> {
    CharVocab::load(data_file(cfg, "vocab.tsv")?).map_err(io_err)
}

fn read_quatrains(path: &Path) -> Result<Vec<Quatrain>> {
    Ok(parse_corpus(path).map_err(io_err)?.quatrains)
}

fn train_config(cfg: &RunConfig, block: BlockKind) -> TrainConfig {
    TrainConfig {
        epochs: cfg.epochs,
        learning_rate: cfg.learning_rate,
        seed: cfg.seed,
        inversion: cfg.inversion,
        lambda: 0.0,
        block,
        checkpoint_interval: cfg.checkpoint_interval,
        clip_norm: cfg.clip_norm,
        embed: cfg.embed,
        hidden: cfg.hidden,
    }
}

fn checkpoint_path(cfg: &RunConfig, block: BlockKind) -> PathBuf {
    cfg.model_dir().join(format!("{block}.ckpt"))
}

fn save_outcome<M>(cfg: &RunConfig, block: BlockKind, out: &trainer::TrainOutcome<M, f64>) -> Result<()> {
    let dir = cfg.model_dir();
    mkdir(&dir)?;
    for (epoch, ck) in &out.checkpoints {
        if *epoch != out.log.last().map_or(0, |s| s.epoch) {
            ck.save(dir.join(format!("{block}.epoch{epoch}.ckpt"))).map_err(io_err)?;
        }
    }
    out.final_checkpoint().save(checkpoint_path(cfg, block)).map_err(io_err)?;
    write(&dir.join(format!("{block}.log")), out.log_text())?;
    if let Some(last) = out.log.last() {
        println!("{block}: {} epochs, final mean loss {:.4}", last.epoch, last.mean_loss);
    }
    Ok(())
}

pub fn train_block(cfg: &RunConfig, block: BlockKind) -> Result<()> {
    let vocab = vocab(cfg)?;
    let pairs = read_pairs(data_file(cfg, &format!("{block}.pairs"))?).map_err(io_err)?;
    let out = trainer::train::<f64>(&pairs, &vocab, &train_config(cfg, block), None, None)?;
    save_outcome(cfg, block, &out)
}

pub fn train_lm(cfg: &RunConfig) -> Result<()> {
    let vocab = vocab(cfg)?;
    let train = read_quatrains(&data_file(cfg, "train.txt")?)?;
    let lines: Vec<Vec<char>> = train.iter().flat_map(|q| q.lines().iter().map(|l| l.chars().to_vec())).collect();
    let tc = TrainConfig {
        epochs: cfg.lm_epochs,
        ..train_config(cfg, BlockKind::Lm)
    };
    let out = trainer::train_lm::<f64>(&lines, &vocab, &tc)?;
    save_outcome(cfg, BlockKind::Lm, &out)
}

fn load_checkpoint(cfg: &RunConfig, block: BlockKind) -> Result<Checkpoint> {
    let path = checkpoint_path(cfg, block);
    if !path.exists() {
        return Err(coded(
            EXIT_CHECKPOINT,
            format!("missing {} checkpoint at {}", block.name().to_uppercase(), path.display()),
        ));
    }
    Checkpoint::load(&path).map_err(|e| coded(EXIT_CHECKPOINT, format!("{} checkpoint: {e}", block.name().to_uppercase())))
}

pub fn finetune_wpb(cfg: &RunConfig) -> Result<()> {
    let vocab = vocab(cfg)?;
    let spb = load_checkpoint(cfg, BlockKind::Spb)?;
    let pairs = read_pairs(data_file(cfg, "wpb.pairs")?).map_err(io_err)?;
    let tc = TrainConfig {
        epochs: cfg.wpb_epochs,
        learning_rate: cfg.wpb_learning_rate,
        inversion: spb.inversion,
        ..train_config(cfg, BlockKind::Wpb)
    };
    let out = trainer::finetune_wpb(&spb, &pairs, &vocab, &tc).map_err(|e| match e {
        jueju::Error::Checkpoint(_) => coded(EXIT_CHECKPOINT, format!("fine-tuning from SPB: {e}")),
        other => anyhow::Error::from(other).context("fine-tuning WPB"),
    })?;
    save_outcome(cfg, BlockKind::Wpb, &out)
}

struct Loaded {
    model: Seq2Seq,
    inversion: Inversion,
}

fn load_block(cfg: &RunConfig, block: BlockKind) -> Result<Loaded> {
    let ck = load_checkpoint(cfg, block)?;
    if ck.kind != ModelKind::Seq2Seq {
        return Err(coded(EXIT_CHECKPOINT, format!("{block} checkpoint holds a language model")));
    }
    Ok(Loaded {
        model: ck.to_seq2seq()?,
        inversion: ck.inversion,
    })
}

fn load_lm(cfg: &RunConfig) -> Result<Option<(LanguageModel, Inversion)>> {
    if cfg.lambda == 0.0 {
        return Ok(None);
    }
    let ck = load_checkpoint(cfg, BlockKind::Lm)?;
    Ok(Some((ck.to_lm()?, ck.inversion)))
}

impl Loaded {
    fn block(&self) -> Block<'_, f64> {
        Block {
            model: &self.model,
            inversion: self.inversion,
        }
    }
}

fn beam_config(cfg: &RunConfig) -> BeamConfig {
    BeamConfig {
        beam: cfg.beam,
        n: cfg.n,
        strict: cfg.strict_tones,
        lambda: cfg.lambda,
    }
}

fn generation_error(e: jueju::Error) -> anyhow::Error {
    match e {
        jueju::Error::Input(_) | jueju::Error::Generation { .. } => coded(EXIT_GENERATION, e.to_string()),
        other => other.into(),
    }
}

pub fn generate(cfg: &RunConfig, keywords: &[String]) -> Result<()> {
    let vocab = vocab(cfg)?;
    let lex = lexicon(cfg)?;
    let wpb = load_block(cfg, BlockKind::Wpb)?;
    let spb = load_block(cfg, BlockKind::Spb)?;
    let cpb = load_block(cfg, BlockKind::Cpb)?;
    let lm = load_lm(cfg)?;
    let models = QuatrainModels {
        wpb: wpb.block(),
        spb: spb.block(),
        cpb: cpb.block(),
        lm: lm.as_ref().map(|(m, inv)| LmBlock { lm: m, inversion: *inv }),
    };
    let keywords: Vec<String> = if keywords.is_empty() { cfg.keywords.clone() } else { keywords.to_vec() };
    if keywords.is_empty() {
        return Err(coded(EXIT_GENERATION, "no keyword given"));
    }
    let mut poems = String::new();
    let mut report = String::new();
    for kw in &keywords {
        for rank in 0..cfg.poems_per_keyword {
            let gc = GenerateConfig {
                length: cfg.length,
                beam: beam_config(cfg),
                first_line_rank: rank,
            };
            let g = generator::generate_quatrain(kw, &models, &vocab, &lex, &gc).map_err(generation_error)?;
            println!("# {kw}");
            for l in g.quatrain.lines() {
                println!("{l}");
            }
            println!();
            let _ = writeln!(poems, "{}", g.quatrain);
            let _ = writeln!(report, "# keyword {kw} rank {rank}");
            report.push_str(&g.report(&lex));
        }
    }
    let dir = cfg.out_dir.join("generated");
    mkdir(&dir)?;
    write(&dir.join("poems.txt"), poems)?;
    write(&dir.join("report.tsv"), report)?;
    Ok(())
}

fn class_index(c: LengthClass) -> usize {
    match c {
        LengthClass::Five => 0,
        LengthClass::Seven => 1,
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let vocab = vocab(cfg)?;
    let lex = lexicon(cfg)?;
    let spb = load_block(cfg, BlockKind::Spb)?;
    let cpb = load_block(cfg, BlockKind::Cpb)?;
    let lm = load_lm(cfg)?;
    let lm_block = lm.as_ref().map(|(m, inv)| LmBlock { lm: m, inversion: *inv });
    let train = read_quatrains(&data_file(cfg, "train.txt")?)?;
    let mut test = read_quatrains(&data_file(cfg, "test.txt")?)?;
    if test.is_empty() {
        eprintln!("warning: empty test split, evaluating on training quatrains");
        test = train.clone();
    }
    // limit applies per length class so both columns are filled
    let mut taken = [0usize; 2];
    test.retain(|q| {
        let c = &mut taken[class_index(q.length_class())];
        *c += 1;
        *c <= cfg.eval_limit
    });

    let mut index_pairs = Vec::new();
    let mut known: HashSet<Vec<char>> = HashSet::new();
    for q in train.iter().chain(&test) {
        for l in q.lines() {
            known.insert(l.chars().to_vec());
        }
    }
    for q in &train {
        for i in 0..3 {
            index_pairs.push((q.line(i).chars().to_vec(), q.line(i + 1).chars().to_vec()));
        }
    }
    let index = ReferenceIndex::new(index_pairs);
    let beam = beam_config(cfg);

    let mut records = Vec::new();
    // [line2, line3, line4] x [five, seven]
    let mut bleu: [[Vec<f64>; 2]; 3] = Default::default();
    // [five, seven] x [line3, line4] per block
    let mut g_spb: [[Vec<f64>; 2]; 2] = Default::default();
    let mut g_cpb: [[Vec<f64>; 2]; 2] = Default::default();
    let mut novel_misses = 0usize;

    for (qi, q) in test.iter().enumerate() {
        let class = class_index(q.length_class());
        let rhyme = lex.rhyme_of(q.line(1).last());
        let cons = generator::quatrain_constraints(q.length_class(), rhyme);
        for target in 1..4 {
            let input = q.line(target - 1).chars();
            let original = q.line(target).chars();
            let refs = index.extract(input, original, cfg.references);
            let item = format!("q{qi}.line{}", target + 1);

            let out = generator::beam_search(&vocab.encode(input), spb.block(), lm_block, &vocab, &lex, &cons[target], &beam)?;
            if let Some(d) = &out.diagnostic {
                eprintln!("warning: {item}: {d}");
            }
            let cands: Vec<Vec<char>> = out.candidates.iter().map(|c| c.chars.clone()).collect();
            let chosen = evaluator::first_novel(&cands, &known).or_else(|| {
                novel_misses += 1;
                cands.first()
            });
            if let Some(h) = chosen {
                let b = evaluator::bleu2(h, &refs.references)?;
                bleu[target - 1][class].push(b);
                records.push(Record { item: item.clone(), metric: "bleu2".into(), value: b });
            }

            if target >= 2 && refs.references.len() >= 2 {
                let s = evaluator::gprs(&refs, spb.block(), None, 0.0, &vocab)?;
                let mut ctx = q.line(target - 2).chars().to_vec();
                ctx.push(jueju::corpus::SEP_CHAR);
                ctx.extend_from_slice(input);
                let cref = evaluator::ReferenceSet { input: ctx, ..refs.clone() };
                let c = evaluator::gprs(&cref, cpb.block(), None, 0.0, &vocab)?;
                g_spb[class][target - 2].push(s);
                g_cpb[class][target - 2].push(c);
                records.push(Record { item: item.clone(), metric: "gprs_spb".into(), value: s });
                records.push(Record { item, metric: "gprs_cpb".into(), value: c });
            }
        }
    }

    let label = format!("SPB (inversion={})", spb.inversion);
    let bleu_row = BleuRow {
        system: label,
        cells: [0, 1, 2].map(|l| [mean(&bleu[l][0]), mean(&bleu[l][1])]),
    };
    let grow = |name: &str, g: &[[Vec<f64>; 2]; 2]| GprsRow {
        block: name.into(),
        cells: [0, 1].map(|c| [mean(&g[c][0]), mean(&g[c][1])]),
    };
    let test_poems: Vec<Vec<Vec<char>>> = test.iter().map(|q| q.lines().iter().map(|l| l.chars().to_vec()).collect()).collect();
    let corpus_compliance = evaluator::compliance_report(&test_poems, &lex);

    let mut summary = String::new();
    let _ = writeln!(summary, "BLEU-2 (character n-grams, smoothing {:e}, closest-reference brevity)", evaluator::BLEU_SMOOTHING);
    summary.push_str(&evaluator::bleu_table(&[bleu_row]));
    let _ = writeln!(summary, "\nGPRS (lambda = 0, {} references)", cfg.references);
    summary.push_str(&evaluator::gprs_table(&[grow("SPB", &g_spb), grow("CPB", &g_cpb)]));
    let _ = writeln!(summary, "\nlines with no novel candidate\t{novel_misses}");
    let _ = writeln!(
        summary,
        "test-set compliance\ttonal {:.3}\trhyme {:.3}\tlength {:.3}",
        corpus_compliance.tonal, corpus_compliance.rhyme, corpus_compliance.length
    );

    let generated = cfg.out_dir.join("generated").join("poems.txt");
    if generated.exists() {
        let poems = read_quatrains(&generated)?;
        let lines: Vec<Vec<Vec<char>>> = poems.iter().map(|q| q.lines().iter().map(|l| l.chars().to_vec()).collect()).collect();
        let r = evaluator::compliance_report(&lines, &lex);
        let _ = writeln!(summary, "generated compliance\ttonal {:.3}\trhyme {:.3}\tlength {:.3}", r.tonal, r.rhyme, r.length);
        for (i, p) in r.poems.iter().enumerate() {
            for v in &p.violations {
                let _ = writeln!(summary, "poem {}\t{v}", i + 1);
            }
        }
        records.push(Record { item: "generated".into(), metric: "tonal_compliance".into(), value: r.tonal });
        records.push(Record { item: "generated".into(), metric: "rhyme_compliance".into(), value: r.rhyme });
        records.push(Record { item: "generated".into(), metric: "length_validity".into(), value: r.length });
    }

    let dir = cfg.out_dir.join("eval");
    mkdir(&dir)?;
    write(&dir.join("report.tsv"), evaluator::records_tsv(&records))?;
    write(&dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

pub enum Probe {
    Knn { query: String, k: usize },
    Gates { line: String },
    Attention { source: String, target: String },
    Embeddings,
}

pub fn analyze(cfg: &RunConfig, block: BlockKind, probe: Probe) -> Result<()> {
    let vocab = vocab(cfg)?;
    let loaded = load_block(cfg, block)?;
    let model = &loaded.model;
    let dir = cfg.out_dir.join("analysis");
    let chars = |s: &str| s.chars().collect::<Vec<char>>();
    let corpus_lines = || -> Result<Vec<Vec<char>>> {
        let train = read_quatrains(&data_file(cfg, "train.txt")?)?;
        let mut seen = HashSet::new();
        Ok(train
            .iter()
            .flat_map(|q| q.lines().iter().map(|l| l.chars().to_vec()))
            .filter(|l| seen.insert(l.clone()))
            .collect())
    };
    let (name, text) = match probe {
        Probe::Knn { query, k } => {
            let lines = corpus_lines()?;
            let q = analyzer::line_embedding(&chars(&query), model, &vocab)?;
            let corpus: Vec<_> = lines.iter().map(|l| analyzer::line_embedding(l, model, &vocab)).collect::<Result<_, _>>()?;
            let k = k.min(corpus.len());
            ("knn.tsv".to_string(), analyzer::knn_lcs_table(&q, &corpus, k)?)
        }
        Probe::Gates { line } => ("gates.tsv".to_string(), analyzer::gate_tendencies(&chars(&line), model, &vocab)?.to_tsv()),
        Probe::Attention { source, target } => (
            "attention.tsv".to_string(),
            analyzer::attention_matrix(&chars(&source), &chars(&target), model, &vocab, loaded.inversion)?.to_tsv(),
        ),
        Probe::Embeddings => {
            let lines = corpus_lines()?;
            let emb: Vec<_> = lines.iter().map(|l| analyzer::line_embedding(l, model, &vocab)).collect::<Result<_, _>>()?;
            ("embeddings.tsv".to_string(), analyzer::embedding_dump(&emb))
        }
    };
    mkdir(&dir)?;
    write(&dir.join(&name), &text)?;
    if name != "embeddings.tsv" {
        print!("{text}");
    }
    Ok(())
}
