//! Acceptance run: one PASS/FAIL line per criterion. Criterion 12 is
//! informational and never fails the run.

mod common;

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{chars, greedy_hits, sample, toy, train_toy};
use jueju::corpus::{
    build_vocab, extract_pairs, make_word_line_pairs, CharVocab, LengthClass, Quatrain, ToneRhymeLexicon,
    TrainingPair, BOS, SEP_CHAR,
};
use jueju::evaluator::{self, bleu2, compliance_report, gprs, gprs_from_scores, ReferenceIndex, ReferenceSet};
use jueju::generator::{
    beam_search, generate_quatrain, quatrain_constraints, BeamConfig, Block, GenerateConfig, LmBlock, QuatrainModels,
};
use jueju::model::{mix, Dims, Inversion, Scorer, Visit};
use jueju::numeric::{grad_check, Initializer, ParamStore};
use jueju::trainer::{self, BlockKind, TrainConfig};
use jueju::{analyzer, LanguageModel, Seq2Seq};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn randomize<P: Visit<f64>>(p: &mut P, seed: u64, half_width: f64) {
    let mut init = Initializer::new(seed);
    p.visit_mut("", &mut |_, m| *m = init.uniform_in(m.rows(), m.cols(), half_width));
}

fn random_ids(rng: &mut ChaCha8Rng, vocab: usize, max_len: usize) -> Vec<usize> {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| rng.gen_range(0..vocab)).collect()
}

// ---------------------------------------------------------------- 1

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let dims = Dims::new(30, 8, 8);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 1..=3u64 {
        for lambda in [0.0, 0.35] {
            let mut model = Seq2Seq::zeros(dims);
            randomize(&mut model, seed, 0.5);
            let mut lm = LanguageModel::zeros(dims);
            randomize(&mut lm, seed + 100, 0.5);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let src = random_ids(&mut rng, dims.vocab, 7);
            let tgt = random_ids(&mut rng, dims.vocab, 7);

            let mut store = model.to_store("");
            if lambda > 0.0 {
                for (k, v) in lm.to_store("lm.").iter() {
                    store.insert(k, v.clone()).map_err(|e| e.to_string())?;
                }
            }
            let loss = |p: &ParamStore<f64>| {
                let mut m = Seq2Seq::zeros(dims);
                m.load_store("", p)?;
                let mut l = LanguageModel::zeros(dims);
                if lambda > 0.0 {
                    l.load_store("lm.", p)?;
                }
                let g = Scorer::new(&m, Some(&l), lambda)?.sequence_nll_grad(&src, &tgt)?;
                let mut out = g.model.to_store("");
                if lambda > 0.0 {
                    let lg = g.lm.expect("active language model has gradients");
                    for (k, v) in lg.to_store("lm.").iter() {
                        out.insert(k, v.clone())?;
                    }
                }
                Ok((g.loss, out))
            };
            let report = grad_check(loss, &store, 1e-5).map_err(|e| e.to_string())?;
            ensure(
                report.max_relative_error < 1e-4,
                format!(
                    "seed {seed} lambda {lambda}: relative error {:.3e} at {:?} (analytic {}, numeric {})",
                    report.max_relative_error, report.worst, report.analytic, report.numeric
                ),
            )?;
            worst = worst.max(report.max_relative_error);
            checked += report.entries_checked;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 120.0, format!("took {secs:.1}s"))?;
    Ok(format!("{checked} entries, worst relative error {worst:.2e}, {secs:.1}s"))
}

// ---------------------------------------------------------------- 2

/// Straight-line transcription of the model equations on nested vectors.
mod oracle {
    pub type M = Vec<Vec<f64>>;

    pub fn mat(m: &jueju::Matrix) -> M {
        (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
    }

    pub fn mv(m: &M, x: &[f64]) -> Vec<f64> {
        m.iter()
            .map(|row| {
                let mut s = 0.0;
                for j in 0..x.len() {
                    s += row[j] * x[j];
                }
                s
            })
            .collect()
    }

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    pub struct Gru {
        pub u: M,
        pub w: M,
        pub uz: M,
        pub wz: M,
        pub ur: M,
        pub wr: M,
    }

    pub fn gru(p: &jueju::model::GruParams<f64>) -> Gru {
        Gru {
            u: mat(&p.u),
            w: mat(&p.w),
            uz: mat(&p.u_update),
            wz: mat(&p.w_update),
            ur: mat(&p.u_reset),
            wr: mat(&p.w_reset),
        }
    }

    pub fn gru_step(p: &Gru, h: &[f64], x: &[f64]) -> Vec<f64> {
        let n = h.len();
        let a = mv(&p.uz, h);
        let b = mv(&p.wz, x);
        let c = mv(&p.ur, h);
        let d = mv(&p.wr, x);
        let mut u = vec![0.0; n];
        let mut r = vec![0.0; n];
        for i in 0..n {
            u[i] = sig(a[i] + b[i]);
            r[i] = sig(c[i] + d[i]);
        }
        let mut hr = vec![0.0; n];
        for i in 0..n {
            hr[i] = h[i] * r[i];
        }
        let e = mv(&p.u, &hr);
        let f = mv(&p.w, x);
        let mut out = vec![0.0; n];
        for i in 0..n {
            let cand = (e[i] + f[i]).tanh();
            out[i] = (1.0 - u[i]) * h[i] + u[i] * cand;
        }
        out
    }

    pub struct Model {
        pub emb: M,
        pub fwd: Gru,
        pub bwd: Gru,
        pub init_w: M,
        pub init_b: Vec<f64>,
        pub wa: M,
        pub ua: M,
        pub va: Vec<f64>,
        pub dec: Gru,
        pub out_w: M,
        pub out_b: Vec<f64>,
    }

    pub fn model(m: &jueju::Seq2Seq) -> Model {
        Model {
            emb: mat(&m.embedding),
            fwd: gru(&m.enc_forward),
            bwd: gru(&m.enc_backward),
            init_w: mat(&m.init_w),
            init_b: m.init_b.as_slice().to_vec(),
            wa: mat(&m.attn_w),
            ua: mat(&m.attn_u),
            va: m.attn_v.as_slice().to_vec(),
            dec: gru(&m.decoder),
            out_w: mat(&m.out_w),
            out_b: m.out_b.as_slice().to_vec(),
        }
    }

    pub fn encode(m: &Model, ids: &[usize]) -> M {
        let h = m.init_w.len();
        let t = ids.len();
        let mut fwd = vec![vec![0.0; h]; t];
        let mut prev = vec![0.0; h];
        for i in 0..t {
            fwd[i] = gru_step(&m.fwd, &prev, &m.emb[ids[i]]);
            prev = fwd[i].clone();
        }
        let mut bwd = vec![vec![0.0; h]; t];
        let mut prev = vec![0.0; h];
        for i in (0..t).rev() {
            bwd[i] = gru_step(&m.bwd, &prev, &m.emb[ids[i]]);
            prev = bwd[i].clone();
        }
        (0..t).map(|i| [fwd[i].clone(), bwd[i].clone()].concat()).collect()
    }

    pub fn s0(m: &Model, g: &M) -> Vec<f64> {
        let h = m.init_w.len();
        let z = mv(&m.init_w, &g[0][h..]);
        (0..h).map(|i| (z[i] + m.init_b[i]).tanh()).collect()
    }

    /// Returns (alpha, context).
    pub fn attend(m: &Model, s: &[f64], g: &M) -> (Vec<f64>, Vec<f64>) {
        let q = mv(&m.wa, s);
        let mut e = Vec::new();
        for gi in g {
            let k = mv(&m.ua, gi);
            let mut v = 0.0;
            for j in 0..q.len() {
                v += m.va[j] * (q[j] + k[j]).tanh();
            }
            e.push(v);
        }
        let z: f64 = e.iter().map(|x| x.exp()).sum();
        let alpha: Vec<f64> = e.iter().map(|x| x.exp() / z).collect();
        let mut c = vec![0.0; g[0].len()];
        for (a, gi) in alpha.iter().zip(g) {
            for j in 0..c.len() {
                c[j] += a * gi[j];
            }
        }
        (alpha, c)
    }

    /// Returns (new state, distribution).
    pub fn decode_step(m: &Model, s: &[f64], y: usize, c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let x = [m.emb[y].clone(), c.to_vec()].concat();
        let s1 = gru_step(&m.dec, s, &x);
        let feats = [s1.clone(), m.emb[y].clone(), c.to_vec()].concat();
        let logits: Vec<f64> = mv(&m.out_w, &feats).iter().zip(&m.out_b).map(|(a, b)| a + b).collect();
        let z: f64 = logits.iter().map(|x| x.exp()).sum();
        (s1, logits.iter().map(|x| x.exp() / z).collect())
    }

    pub fn mix(dec: &[f64], lm: &[f64], lambda: f64) -> Vec<f64> {
        (0..dec.len()).map(|i| (1.0 - lambda) * dec[i] + lambda * lm[i]).collect()
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = [0.0f64; 4];
    for trial in 0..100u64 {
        let dims = Dims::new(rng.gen_range(6..20), rng.gen_range(2..7), rng.gen_range(2..7));
        let mut model = Seq2Seq::zeros(dims);
        randomize(&mut model, 1000 + trial, 0.8);
        let o = oracle::model(&model);
        let src = random_ids(&mut rng, dims.vocab, 7);
        let tgt = random_ids(&mut rng, dims.vocab, 7);

        let enc = model.encode(&src).map_err(|e| e.to_string())?;
        let g = oracle::encode(&o, &src);
        for (a, b) in enc.g.iter().zip(&g) {
            worst[0] = worst[0].max(max_diff(a, b));
        }
        worst[0] = worst[0].max(max_diff(&model.initial_state(&enc), &oracle::s0(&o, &g)));

        let mut s = model.initial_state(&enc);
        let mut s_o = oracle::s0(&o, &g);
        let mut y = BOS;
        for &next in &tgt {
            let att = model.attend(&s, &enc);
            let (alpha, ctx) = oracle::attend(&o, &s_o, &g);
            worst[1] = worst[1].max(max_diff(&att.alpha, &alpha)).max(max_diff(&att.context, &ctx));
            let step = model.decode_step(&s, y, &att.context);
            let (s1, dist) = oracle::decode_step(&o, &s_o, y, &ctx);
            worst[2] = worst[2].max(max_diff(&step.state, &s1)).max(max_diff(&step.dist, &dist));

            let lambda: f64 = rng.gen();
            let other: Vec<f64> = {
                let w: Vec<f64> = (0..dims.vocab).map(|_| rng.gen::<f64>()).collect();
                let z: f64 = w.iter().sum();
                w.iter().map(|x| x / z).collect()
            };
            let mixed = mix(&step.dist, &other, lambda).map_err(|e| e.to_string())?;
            worst[3] = worst[3].max(max_diff(&mixed, &oracle::mix(&dist, &other, lambda)));

            s = step.state;
            s_o = s1;
            y = next;
        }
    }
    let names = ["encode", "attend", "decode_step", "mix"];
    for (n, w) in names.iter().zip(worst) {
        ensure(w <= 1e-12, format!("{n} differs by {w:.3e}"))?;
    }
    Ok(format!(
        "100 trials, max |diff| encode {:.1e}, attend {:.1e}, decode_step {:.1e}, mix {:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let dims = Dims::new(25, 6, 6);
    let mut model = Seq2Seq::zeros(dims);
    randomize(&mut model, 3, 0.8);
    let mut lm = LanguageModel::zeros(dims);
    randomize(&mut lm, 4, 0.8);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_sum = 0.0f64;
    let mut count = 0;
    for _ in 0..50 {
        let src = random_ids(&mut rng, dims.vocab, 7);
        let tgt = random_ids(&mut rng, dims.vocab, 7);
        let tf = model.teacher_forced(&src, &tgt).map_err(|e| e.to_string())?;
        let mut lm_state = lm.initial_state();
        let mut y = BOS;
        for (t, (_, step)) in tf.steps.iter().enumerate() {
            let ls = lm.step(&lm_state, y);
            let at0 = mix(&step.dist, &ls.dist, 0.0).map_err(|e| e.to_string())?;
            let at1 = mix(&step.dist, &ls.dist, 1.0).map_err(|e| e.to_string())?;
            ensure(at0 == step.dist, "lambda 0 differs from the decoder distribution")?;
            ensure(at1 == ls.dist, "lambda 1 differs from the language model distribution")?;
            for lambda in [0.0, 0.1, 0.5, 0.9, 1.0, rng.gen()] {
                let m = mix(&step.dist, &ls.dist, lambda).map_err(|e| e.to_string())?;
                worst_sum = worst_sum.max((m.iter().sum::<f64>() - 1.0).abs());
                count += 1;
            }
            lm_state = ls.state;
            y = tgt[t];
        }
    }
    ensure(worst_sum <= 1e-12, format!("mixed sum off by {worst_sum:.3e}"))?;
    Ok(format!("limits exact, {count} mixed distributions, max |sum-1| {worst_sum:.1e}"))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let dims = Dims::new(40, 8, 8);
    let mut model = Seq2Seq::zeros(dims);
    randomize(&mut model, 4, 0.8);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut steps = 0;
    let mut worst = 0.0f64;
    while steps < 1000 {
        let src = random_ids(&mut rng, dims.vocab, 15);
        let tgt = random_ids(&mut rng, dims.vocab, 7);
        let tf = model.teacher_forced(&src, &tgt).map_err(|e| e.to_string())?;
        for (att, _) in &tf.steps {
            ensure(att.alpha.len() == src.len(), "alpha row length differs from the source")?;
            worst = worst.max((att.alpha.iter().sum::<f64>() - 1.0).abs());
            steps += 1;
        }
    }
    ensure(worst <= 1e-9, format!("alpha sum off by {worst:.3e}"))?;
    for id in 0..dims.vocab {
        let enc = model.encode(&[id]).map_err(|e| e.to_string())?;
        let s: Vec<f64> = (0..dims.hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = model.attend(&s, &enc);
        ensure(a.alpha == vec![1.0], format!("single position gave {:?}", a.alpha))?;
    }
    Ok(format!("{steps} steps, max |sum-1| {worst:.1e}; single-position alpha = [1]"))
}

// ---------------------------------------------------------------- 5 and 7

fn criterion_5() -> Outcome {
    let toy = toy();
    ensure(toy.pairs.len() == 20, format!("toy corpus has {} pairs", toy.pairs.len()))?;
    let mut parts = Vec::new();
    for inversion in [Inversion::None, Inversion::Target] {
        let out = train_toy(&toy, inversion);
        let encoded = trainer::encode_pairs(&toy.pairs, &toy.vocab, BlockKind::Spb).map_err(|e| e.to_string())?;
        let loss = trainer::mean_loss(&Scorer::decoder_only(&out.model), &encoded, inversion).map_err(|e| e.to_string())?;
        let hits = greedy_hits(&toy, &out.model, inversion);
        parts.push(format!("{inversion}: loss {loss:.4}, {hits}/20"));
        ensure(loss < 0.1 && hits >= 18, parts.join("; "))?;
    }
    Ok(parts.join("; "))
}

fn criterion_7() -> Outcome {
    let ends = [
        gprs_from_scores(&[-1.0, -2.0, -3.0, -4.0], 0),
        gprs_from_scores(&[-4.0, -2.0, -3.0, -1.0], 0),
        gprs_from_scores(&[-2.0, -1.0, -3.0, -4.0], 0),
    ];
    let ends: Vec<f64> = ends.into_iter().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    ensure(ends == [1.0, 0.0, 2.0 / 3.0], format!("endpoints {ends:?}"))?;

    let toy = toy();
    let out = train_toy(&toy, Inversion::None);
    let vocab = &toy.vocab;
    let block = Block {
        model: &out.model,
        inversion: Inversion::None,
    };
    let mut perfect = 0;
    for (i, p) in toy.pairs.iter().enumerate() {
        let mut refs = vec![p.target.clone()];
        let mut seen: HashSet<Vec<char>> = refs.iter().cloned().collect();
        for (j, q) in toy.pairs.iter().enumerate().cycle().skip(i + 1) {
            if refs.len() == 20 || j == i {
                break;
            }
            if seen.insert(q.target.clone()) {
                refs.push(q.target.clone());
            }
        }
        let refset = ReferenceSet {
            input: p.source.clone(),
            references: refs,
            original: 0,
            short: false,
        };
        let n = refset.references.len();
        let s = gprs(&refset, block, None, 0.0, vocab).map_err(|e| e.to_string())?;
        if s == 1.0 {
            perfect += 1;
        }
        ensure(n >= 19, format!("only {n} distinct references for pair {i}"))?;
    }
    ensure(perfect == toy.pairs.len(), format!("GPRS 1.0 on {perfect}/20 overfit pairs"))?;
    Ok(format!("endpoints 1.0 / 0.0 / 2/3; overfit model GPRS = 1.0 on {perfect}/20 pairs"))
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let lex = ToneRhymeLexicon::bundled();
    let poems = sample();
    let (spb_pairs, cpb_pairs) = extract_pairs(&poems);
    let keywords: Vec<String> = ["春", "月", "山", "风", "花"].iter().map(|s| s.to_string()).collect();
    let (word_pairs, _) = make_word_line_pairs(&keywords, &poems, 20).map_err(|e| e.to_string())?;
    let all: Vec<TrainingPair> = spb_pairs.iter().chain(&cpb_pairs).cloned().collect();
    let vocab = build_vocab(&all, 1);
    let cfg = TrainConfig {
        epochs: 3,
        seed: 6,
        embed: 16,
        hidden: 16,
        ..TrainConfig::default()
    };
    let run = |pairs: &[TrainingPair], block| {
        trainer::train::<f64>(pairs, &vocab, &TrainConfig { block, ..cfg.clone() }, None, None)
            .map_err(|e| e.to_string())
    };
    let spb = run(&spb_pairs, BlockKind::Spb)?;
    let cpb = run(&cpb_pairs, BlockKind::Cpb)?;
    let wpb_cfg = TrainConfig { epochs: 10, ..cfg.clone() };
    let wpb = trainer::finetune_wpb(spb.final_checkpoint(), &word_pairs, &vocab, &wpb_cfg).map_err(|e| e.to_string())?;
    let lines: Vec<Vec<char>> = poems.iter().flat_map(|q| q.lines().iter().map(|l| l.chars().to_vec())).collect();
    let lm = trainer::train_lm::<f64>(&lines, &vocab, &TrainConfig { block: BlockKind::Lm, ..cfg.clone() })
        .map_err(|e| e.to_string())?;

    let inv = cfg.inversion;
    let models = QuatrainModels {
        wpb: Block { model: &wpb.model, inversion: inv },
        spb: Block { model: &spb.model, inversion: inv },
        cpb: Block { model: &cpb.model, inversion: inv },
        lm: Some(LmBlock { lm: &lm.model, inversion: inv }),
    };
    let mut generated = Vec::new();
    for kw in &keywords {
        for rank in 0..10 {
            let gc = GenerateConfig {
                length: if rank % 2 == 0 { LengthClass::Five } else { LengthClass::Seven },
                beam: BeamConfig {
                    beam: 10,
                    n: 10,
                    strict: false,
                    lambda: 0.2,
                },
                first_line_rank: rank,
            };
            let g = generate_quatrain(kw, &models, &vocab, &lex, &gc).map_err(|e| format!("{kw} #{rank}: {e}"))?;
            generated.push(g.quatrain.lines().iter().map(|l| l.chars().to_vec()).collect::<Vec<_>>());
        }
    }
    let report = compliance_report(&generated, &lex);
    ensure(
        generated.len() == 50 && report.all_pass(),
        format!(
            "{} poems, tonal {:.3}, rhyme {:.3}, length {:.3}",
            generated.len(),
            report.tonal,
            report.rhyme,
            report.length
        ),
    )?;
    let distinct: HashSet<_> = generated.iter().collect();
    Ok(format!(
        "50 poems ({} distinct), tonal {:.3}, rhyme {:.3}, length {:.3}",
        distinct.len(),
        report.tonal,
        report.rhyme,
        report.length
    ))
}

// ---------------------------------------------------------------- 8, 9, 10

fn criterion_8() -> Outcome {
    let b = |h: &str, r: &[&str]| bleu2(&chars(h), &r.iter().map(|s| chars(s)).collect::<Vec<_>>()).unwrap();
    let same = b("白日依山尽", &["白日依山尽"]);
    ensure(same == 1.0, format!("identical gave {same}"))?;
    let disjoint = b("白日依山尽", &["黄河入海流"]);
    ensure(
        (disjoint - evaluator::BLEU_SMOOTHING).abs() <= 1e-15 * evaluator::BLEU_SMOOTHING.max(1.0),
        format!("disjoint gave {disjoint:e}"),
    )?;
    // unigrams: 春 x3 clipped to 1, 风 x2 clipped to 1 -> 2/5
    // bigrams: 春风 x2 clipped to 1, 风春 x2 unmatched -> 1/4
    // closest reference length 4 < 5, no brevity penalty
    let mixed = b("春风春风春", &["春风又绿江南岸", "春色满园"]);
    let manual = (2.0f64 / 5.0 * (1.0 / 4.0)).sqrt();
    // exp of mean log precision vs sqrt: equal up to rounding
    ensure((mixed - manual).abs() <= 1e-15 * manual, format!("mixed case {mixed} vs {manual}"))?;
    // 4/4 and 3/3 precision, brevity exp(1 - 5/4)
    let short = b("白日依山", &["白日依山尽"]);
    let manual_short = (1.0f64 - 5.0 / 4.0).exp();
    ensure((short - manual_short).abs() <= 1e-15, format!("brevity case {short} vs {manual_short}"))?;
    Ok(format!("identical 1.0, disjoint {disjoint:e}, mixed {mixed:.6} = sqrt(2/5 * 1/4), brevity {short:.6}"))
}

fn criterion_9() -> Outcome {
    let n = analyzer::lcs_len(&chars("白头萧瑟满江桥"), &chars("白头萧散满霜风"));
    ensure(n == 4, format!("lcs = {n}"))?;
    Ok("lcs = 4".into())
}

fn criterion_10() -> Outcome {
    let poems = sample();
    let n = poems.len();
    let (spb, cpb) = extract_pairs(&poems);
    ensure(spb.len() == 3 * n && cpb.len() == 2 * n, format!("{} / {} pairs from {n}", spb.len(), cpb.len()))?;
    for p in &cpb {
        let seps = p.source.iter().filter(|&&c| c == SEP_CHAR).count();
        ensure(seps == 1, format!("{} separators in {:?}", seps, p.source))?;
        ensure(p.source.len() == 2 * p.target.len() + 1, format!("source length {}", p.source.len()))?;
    }
    for k in [1, 7, 100] {
        let (s, c) = extract_pairs(&poems[..k]);
        ensure(s.len() == 3 * k && c.len() == 2 * k, format!("{k} quatrains"))?;
    }
    Ok(format!("{n} quatrains -> {} SPB, {} CPB pairs; one separator, length 2L+1", spb.len(), cpb.len()))
}

// ---------------------------------------------------------------- 11

/// Library pipeline on a small slice of the sample; returns every
/// artifact as bytes.
fn pipeline() -> Result<Vec<(String, Vec<u8>)>, String> {
    let err = |e: jueju::Error| e.to_string();
    let all = sample();
    let poems: Vec<Quatrain> = all
        .iter()
        .filter(|q| q.length_class() == LengthClass::Five)
        .take(20)
        .chain(all.iter().filter(|q| q.length_class() == LengthClass::Seven).take(20))
        .cloned()
        .collect();
    let (spb_pairs, cpb_pairs) = extract_pairs(&poems);
    let keywords = vec!["春".to_string(), "月".to_string()];
    let (word_pairs, _) = make_word_line_pairs(&keywords, &poems, 10).map_err(err)?;
    let all_pairs: Vec<TrainingPair> = spb_pairs.iter().chain(&cpb_pairs).cloned().collect();
    let vocab = build_vocab(&all_pairs, 1);
    let cfg = TrainConfig {
        epochs: 2,
        seed: 11,
        embed: 8,
        hidden: 12,
        ..TrainConfig::default()
    };
    let spb = trainer::train::<f64>(&spb_pairs, &vocab, &cfg, None, None).map_err(err)?;
    let cpb = trainer::train::<f64>(&cpb_pairs, &vocab, &TrainConfig { block: BlockKind::Cpb, ..cfg.clone() }, None, None)
        .map_err(err)?;
    let wpb = trainer::finetune_wpb(spb.final_checkpoint(), &word_pairs, &vocab, &cfg).map_err(err)?;
    let lines: Vec<Vec<char>> = poems.iter().flat_map(|q| q.lines().iter().map(|l| l.chars().to_vec())).collect();
    let lm = trainer::train_lm::<f64>(&lines, &vocab, &TrainConfig { block: BlockKind::Lm, ..cfg.clone() }).map_err(err)?;

    let mut out = Vec::new();
    for (name, ck) in [
        ("spb", spb.final_checkpoint()),
        ("cpb", cpb.final_checkpoint()),
        ("wpb", wpb.final_checkpoint()),
        ("lm", lm.final_checkpoint()),
    ] {
        out.push((format!("{name}.ckpt"), ck.to_bytes()));
    }

    let lex = ToneRhymeLexicon::bundled();
    let inv = cfg.inversion;
    let models = QuatrainModels {
        wpb: Block { model: &wpb.model, inversion: inv },
        spb: Block { model: &spb.model, inversion: inv },
        cpb: Block { model: &cpb.model, inversion: inv },
        lm: Some(LmBlock { lm: &lm.model, inversion: inv }),
    };
    let mut poems_txt = String::new();
    let mut report = String::new();
    for kw in &keywords {
        let gc = GenerateConfig {
            length: LengthClass::Five,
            beam: BeamConfig {
                beam: 5,
                n: 5,
                strict: false,
                lambda: 0.3,
            },
            first_line_rank: 0,
        };
        let g = generate_quatrain(kw, &models, &vocab, &lex, &gc).map_err(err)?;
        poems_txt.push_str(&format!("{}\n", g.quatrain));
        report.push_str(&g.report(&lex));
    }
    out.push(("poems.txt".into(), poems_txt.into_bytes()));
    out.push(("report.tsv".into(), report.into_bytes()));

    let index = ReferenceIndex::new(
        poems
            .iter()
            .flat_map(|q| (0..3).map(move |i| (q.line(i).chars().to_vec(), q.line(i + 1).chars().to_vec())))
            .collect(),
    );
    let mut records = Vec::new();
    for (qi, q) in poems.iter().step_by(5).enumerate() {
        let refs = index.extract(q.line(1).chars(), q.line(2).chars(), 5);
        let s = gprs(&refs, models.spb, None, 0.0, &vocab).map_err(err)?;
        let cons = quatrain_constraints(q.length_class(), lex.rhyme_of(q.line(1).last()));
        let beam = beam_search(&vocab.encode(q.line(1).chars()), models.spb, None, &vocab, &lex, &cons[2], &BeamConfig::default())
            .map_err(err)?;
        let b = beam.candidates.first().map_or(Ok(0.0), |c| bleu2(&c.chars, &refs.references)).map_err(err)?;
        records.push(evaluator::Record { item: format!("q{qi}"), metric: "gprs_spb".into(), value: s });
        records.push(evaluator::Record { item: format!("q{qi}"), metric: "bleu2".into(), value: b });
    }
    out.push(("eval.tsv".into(), evaluator::records_tsv(&records).into_bytes()));
    Ok(out)
}

fn criterion_11() -> Outcome {
    let a = pipeline()?;
    let b = pipeline()?;
    ensure(a.len() == b.len(), "artifact lists differ")?;
    for ((na, ba), (nb, bb)) in a.iter().zip(&b) {
        ensure(na == nb && ba == bb, format!("{na} differs between runs"))?;
    }
    let total: usize = a.iter().map(|(_, b)| b.len()).sum();
    Ok(format!("{} artifacts, {total} bytes, identical across two runs", a.len()))
}

// ---------------------------------------------------------------- 12

fn criterion_12() -> Outcome {
    let lex = ToneRhymeLexicon::bundled();
    let poems = sample();
    let (train, test): (Vec<_>, Vec<_>) = poems.iter().cloned().enumerate().partition(|(i, _)| i % 10 != 9);
    let train: Vec<Quatrain> = train.into_iter().map(|(_, q)| q).collect();
    let test: Vec<Quatrain> = test.into_iter().map(|(_, q)| q).collect();
    let (spb_pairs, cpb_pairs) = extract_pairs(&poems);
    let all: Vec<TrainingPair> = spb_pairs.iter().chain(&cpb_pairs).cloned().collect();
    let vocab: CharVocab = build_vocab(&all, 1);
    let (train_pairs, _) = extract_pairs(&train);
    let known: HashSet<Vec<char>> = poems.iter().flat_map(|q| q.lines().iter().map(|l| l.chars().to_vec())).collect();
    let index = ReferenceIndex::new(
        train
            .iter()
            .flat_map(|q| (0..3).map(move |i| (q.line(i).chars().to_vec(), q.line(i + 1).chars().to_vec())))
            .collect(),
    );

    let mut rows = Vec::new();
    for inversion in [Inversion::None, Inversion::Target] {
        let cfg = TrainConfig {
            epochs: 5,
            seed: 12,
            inversion,
            embed: 32,
            hidden: 32,
            ..TrainConfig::default()
        };
        let spb = trainer::train::<f64>(&train_pairs, &vocab, &cfg, None, None).map_err(|e| e.to_string())?;
        let block = Block { model: &spb.model, inversion };
        let mut cells = [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()], [Vec::new(), Vec::new()]];
        for q in &test {
            let class = usize::from(q.length_class() == LengthClass::Seven);
            let cons = quatrain_constraints(q.length_class(), lex.rhyme_of(q.line(1).last()));
            for t in 1..4 {
                let input = q.line(t - 1).chars();
                let refs = index.extract(input, q.line(t).chars(), evaluator::DEFAULT_REFERENCES);
                let out = beam_search(&vocab.encode(input), block, None, &vocab, &lex, &cons[t], &BeamConfig::default())
                    .map_err(|e| e.to_string())?;
                let cands: Vec<Vec<char>> = out.candidates.iter().map(|c| c.chars.clone()).collect();
                if let Some(h) = evaluator::first_novel(&cands, &known).or(cands.first()) {
                    cells[t - 1][class].push(bleu2(h, &refs.references).map_err(|e| e.to_string())?);
                }
            }
        }
        let mean = |v: &Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        rows.push(evaluator::BleuRow {
            system: format!("SPB (inversion={inversion})"),
            cells: [0, 1, 2].map(|l| [mean(&cells[l][0]), mean(&cells[l][1])]),
        });
    }
    print!("{}", evaluator::bleu_table(&rows));
    let avg = |r: &evaluator::BleuRow| {
        let v: Vec<f64> = r.cells.iter().flatten().flatten().copied().collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    Ok(format!("mean BLEU-2 plain {:.4}, target-inverted {:.4}", avg(&rows[0]), avg(&rows[1])))
}

// ----------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Outcome); 12] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
        (12, criterion_12),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match (n, result) {
            (12, Ok(msg)) => println!("criterion 12: INFO {msg} ({secs:.1}s)"),
            (12, Err(msg)) => println!("criterion 12: INFO could not run: {msg}"),
            (n, Ok(msg)) => println!("criterion {n}: PASS {msg} ({secs:.1}s)"),
            (n, Err(msg)) => {
                failed += 1;
                println!("criterion {n}: FAIL {msg} ({secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
