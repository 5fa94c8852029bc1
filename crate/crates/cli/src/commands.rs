use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use wordspot::config::RunConfig;
use wordspot::datasets::{generate_synthetic_corpus, load_manifest, CorpusManifest, Partition, SynthSpec};
use wordspot::embeddings::{fold_case, format_dump_record, Alphabet, AttributeVector, EmbeddingConfig, LevelSet};
use wordspot::io::write_atomic;
use wordspot::nn::Checkpoint;
use wordspot::optim::{format_trace, OptimizerConfig, OptimizerKind, TrainState};
use wordspot::pipeline::{load_partition, LabelledImage, Model};
use wordspot::retrieval::{
    compare_reports, permutations_needed, rank, run_competition_protocol, run_qbe_almazan, run_qbs_almazan,
    APReport, Gallery, PermutationOptions, PermutationScheme, QueryMode, Sidedness,
};
use wordspot::rng::{stream_rng, Stream};
use wordspot::{Error, ErrorCategory, Result};

use crate::{
    Arch, ConfigArgs, EmbedArgs, EvalArgs, ModeArg, PartitionArg, ProtocolArg, SidedArg, SigtestArgs, SpotArgs,
    SynthArgs, TrainArgs,
};

pub const DATA_ROOT_VAR: &str = "WORDSPOT_DATA_ROOT";

pub fn exit_code(e: &Error) -> u8 {
    match e.category() {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Numeric => 4,
    }
}

fn data_path(path: &Path) -> PathBuf {
    match std::env::var_os(DATA_ROOT_VAR) {
        Some(root) if path.is_relative() && !path.exists() => Path::new(&root).join(path),
        _ => path.to_path_buf(),
    }
}

fn manifest(path: &Path) -> Result<CorpusManifest> {
    load_manifest(&data_path(path))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn partition(p: PartitionArg) -> Partition {
    match p {
        PartitionArg::Train => Partition::Train,
        PartitionArg::Test => Partition::Test,
        PartitionArg::Query => Partition::Query,
    }
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let mut spec = SynthSpec::new(a.words.unwrap_or_else(SynthSpec::default_words), a.seed);
    spec.height = a.height;
    spec.train_per_class = a.train;
    spec.test_per_class = a.test;
    spec.query_per_class = a.queries;
    let m = generate_synthetic_corpus(&spec, &a.out)?;
    eprintln!(
        "wrote {} images for {} classes to {}",
        m.records.len(),
        spec.words.len(),
        a.out.display()
    );
    Ok(())
}

fn run_config(a: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(arch) = a.arch {
        cfg.arch = match arch {
            Arch::PhocnetFull => "phocnet-full",
            Arch::PhocnetMini => "phocnet-mini",
            Arch::Custom => "custom",
        }
        .into();
    }
    if let Some(p) = &a.pooling {
        cfg.pooling = p.parse()?;
    }
    if let Some(e) = &a.embedding {
        cfg.embedding.kind = e.parse()?;
    }
    if let Some(l) = &a.levels {
        cfg.embedding.levels = l.parse()?;
    }
    if let Some(l) = &a.loss {
        cfg.loss = l.parse()?;
    }
    if let Some(o) = &a.optimizer {
        let kind: OptimizerKind = o.parse()?;
        cfg.optimizer = OptimizerConfig::recommended(kind, cfg.loss);
    }
    if let Some(lr) = a.learning_rate {
        cfg.optimizer.learning_rate = lr;
    }
    if let Some(n) = a.iterations {
        cfg.iterations = n;
    }
    if a.eval_every.is_some() {
        cfg.eval_every = a.eval_every;
    }
    if a.augment {
        cfg.augmentation = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(a: TrainArgs) -> Result<()> {
    let m = manifest(&a.manifest)?;
    let train = load_partition(&m, Partition::Train)?;
    if train.is_empty() {
        return Err(Error::InvalidParameter("manifest has no train partition".into()));
    }
    let (mut model, mut state) = match &a.resume {
        Some(path) => {
            let (mut model, state) = Model::from_checkpoint(Checkpoint::load(path)?)?;
            let state = state.ok_or_else(|| Error::Checkpoint("checkpoint has no optimizer state".into()))?;
            if let Some(n) = a.config.iterations {
                model.config.iterations = n;
            }
            (model, state)
        }
        None => {
            let cfg = run_config(&a.config)?;
            let model = Model::new(cfg, train.iter().map(|t| t.transcription.as_str()))?;
            let state = TrainState::new(&model.network);
            (model, state)
        }
    };
    let test = if model.config.eval_every.is_some() {
        load_partition(&m, Partition::Test)?
    } else {
        Vec::new()
    };
    let probe = model.clone();
    let eval: Option<wordspot::optim::EvalFn<'_>> = if test.is_empty() {
        None
    } else {
        Some(Box::new(|net| {
            let m = Model {
                network: net.clone(),
                ..probe.clone()
            };
            let gallery = m.gallery(&test)?;
            Ok(run_qbs_almazan(&gallery, |w| m.embed_string(w), &[])?.map)
        }))
    };
    let start = state.iteration;
    let trace = model.train(&train, &mut state, eval)?;
    model.to_checkpoint(Some(&state)).save(&a.out)?;
    let trace_path = a.trace.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".trace.tsv");
        PathBuf::from(p)
    });
    write_atomic(&trace_path, format_trace(&trace).as_bytes())?;
    eprintln!(
        "trained iterations {start}..{}: loss {:.6} -> {:.6}; checkpoint {}",
        state.iteration,
        trace.first_loss().unwrap_or(f64::NAN),
        trace.last_loss().unwrap_or(f64::NAN),
        a.out.display()
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<Model> {
    Ok(Model::from_checkpoint(Checkpoint::load(path)?)?.0)
}

pub fn embed(a: EmbedArgs) -> Result<()> {
    let m = a.manifest.as_deref().map(manifest).transpose()?;
    let model = a.checkpoint.as_deref().map(load_model).transpose()?;
    let records = |default: Partition| -> Result<Vec<_>> {
        let m = m.as_ref().ok_or_else(|| Error::Config("--manifest is required".into()))?;
        let p = a.partition.map_or(default, partition);
        Ok(m.partition(p).cloned().collect())
    };
    let mut out = String::new();
    if a.strings {
        let words: Vec<String> = match &a.words {
            Some(w) => w.clone(),
            None => {
                let set: BTreeSet<String> = records(Partition::Test)?
                    .iter()
                    .map(|r| fold_case(&r.transcription))
                    .collect();
                set.into_iter().collect()
            }
        };
        let (alphabet, mut embedding) = match &model {
            Some(md) => (md.alphabet.clone(), md.config.embedding.clone()),
            None => {
                let alphabet = match &a.alphabet {
                    Some(s) => Alphabet::new(s.chars().collect())?,
                    None => Alphabet::from_words(words.iter().map(String::as_str))?,
                };
                (alphabet, EmbeddingConfig::new(wordspot::embeddings::EmbeddingKind::Phoc))
            }
        };
        if model.is_none() {
            if let Some(k) = &a.embedding {
                embedding.kind = k.parse()?;
            }
            if let Some(l) = &a.levels {
                embedding.levels = l.parse::<LevelSet>()?;
            }
        } else if a.embedding.is_some() || a.levels.is_some() {
            return Err(Error::Config("--embedding/--levels conflict with --checkpoint".into()));
        }
        for w in &words {
            let v = embedding.embed_str(w, &alphabet)?;
            out.push_str(&format_dump_record(w, &v));
            out.push('\n');
        }
    } else {
        let model = model.ok_or_else(|| Error::Config("image embedding needs --checkpoint".into()))?;
        let m = m.as_ref().ok_or_else(|| Error::Config("--manifest is required".into()))?;
        for r in records(Partition::Test)? {
            let image = wordspot::datasets::load_word_image(&m.resolve(&r))?;
            let v = AttributeVector {
                kind: model.config.embedding.kind,
                values: model.embed_image(&image)?,
            };
            let _ = writeln!(out, "{}\t{}", r.image.display(), format_dump_record(&r.transcription, &v));
        }
    }
    emit(a.out.as_deref(), &out)
}

fn stop_words(path: Option<&Path>, m: &CorpusManifest) -> Result<Vec<String>> {
    match path {
        Some(p) => {
            if !p.exists() {
                return Err(Error::MissingFile(p.to_path_buf()));
            }
            Ok(std::fs::read_to_string(p)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect())
        }
        None => Ok(m.stop_words.clone()),
    }
}

/// Query vectors: predicted for QbE, string embeddings for QbS.
fn query_gallery(model: &Model, items: &[LabelledImage], mode: ModeArg) -> Result<Gallery> {
    match mode {
        ModeArg::Qbe => model.gallery(items),
        ModeArg::Qbs => {
            let mut g = Gallery::new();
            for it in items {
                g.push(it.id.clone(), &it.transcription, model.embed_string(&it.transcription)?)?;
            }
            Ok(g)
        }
    }
}

fn ranked_dump(queries: &[(String, Vec<f64>)], test: &Gallery, exclude_self: bool) -> Result<String> {
    let mut out = String::from("query\trank\titem\tdistance\n");
    for (id, v) in queries {
        let exclude = exclude_self.then_some(id.as_str());
        for (i, r) in rank(id, v, test, exclude)?.items.iter().enumerate() {
            let _ = writeln!(out, "{id}\t{}\t{}\t{:.9}", i + 1, r.id, r.distance);
        }
    }
    Ok(out)
}

pub fn spot(a: SpotArgs) -> Result<()> {
    let model = load_model(&a.checkpoint)?;
    let m = manifest(&a.manifest)?;
    let test_items = load_partition(&m, Partition::Test)?;
    let test = model.gallery(&test_items)?;
    let stops = stop_words(a.stopwords.as_deref(), &m)?;
    let (report, queries, exclude_self) = match (a.protocol, a.mode) {
        (ProtocolArg::Almazan, ModeArg::Qbe) => {
            let q: Vec<(String, Vec<f64>)> = test.items().iter().map(|i| (i.id.clone(), i.vector.clone())).collect();
            (run_qbe_almazan(&test)?, q, true)
        }
        (ProtocolArg::Almazan, ModeArg::Qbs) => {
            let report = run_qbs_almazan(&test, |w| model.embed_string(w), &stops)?;
            let q: Vec<(String, Vec<f64>)> = report
                .entries
                .iter()
                .map(|e| Ok((e.id.clone(), model.embed_string(&e.id)?)))
                .collect::<Result<_>>()?;
            (report, q, false)
        }
        (ProtocolArg::Competition, mode) => {
            let items = load_partition(&m, Partition::Query)?;
            if items.is_empty() {
                return Err(Error::NoQueries);
            }
            let qg = query_gallery(&model, &items, mode)?;
            let qmode = if mode == ModeArg::Qbe { QueryMode::Qbe } else { QueryMode::Qbs };
            let q: Vec<(String, Vec<f64>)> = qg.items().iter().map(|i| (i.id.clone(), i.vector.clone())).collect();
            (run_competition_protocol(&qg, &test, qmode)?, q, false)
        }
    };
    if let Some(p) = &a.ranked {
        write_atomic(p, ranked_dump(&queries, &test, exclude_self)?.as_bytes())?;
    }
    emit(a.out.as_deref(), &report.to_text())?;
    eprintln!("{}: mAP {:.4} over {} queries", report.protocol, report.map, report.entries.len());
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let model = load_model(&a.checkpoint)?;
    let m = manifest(&a.manifest)?;
    let test_items = load_partition(&m, Partition::Test)?;
    let test = model.gallery(&test_items)?;
    let stops = stop_words(a.stopwords.as_deref(), &m)?;
    let mut reports = vec![
        run_qbe_almazan(&test)?,
        run_qbs_almazan(&test, |w| model.embed_string(w), &stops)?,
    ];
    let query_items = load_partition(&m, Partition::Query)?;
    if !query_items.is_empty() {
        for (mode, qmode) in [(ModeArg::Qbe, QueryMode::Qbe), (ModeArg::Qbs, QueryMode::Qbs)] {
            let qg = query_gallery(&model, &query_items, mode)?;
            reports.push(run_competition_protocol(&qg, &test, qmode)?);
        }
    }
    let mut summary = String::from("protocol\tqueries\tmAP\n");
    for r in &reports {
        let _ = writeln!(summary, "{}\t{}\t{:.9}", r.protocol, r.entries.len(), r.map);
        if let Some(dir) = &a.out {
            write_atomic(&dir.join(format!("{}.txt", r.protocol)), r.to_text().as_bytes())?;
        }
    }
    print!("{summary}");
    Ok(())
}

pub fn sigtest(a: SigtestArgs) -> Result<()> {
    let ra = APReport::load(&a.report_a)?;
    let rb = APReport::load(&a.report_b)?;
    if ra.protocol != rb.protocol {
        return Err(Error::InvalidParameter(format!(
            "reports use different protocols: {} vs {}",
            ra.protocol, rb.protocol
        )));
    }
    let k = match (a.k, a.s_target) {
        (Some(k), _) => k,
        (None, Some(s)) => permutations_needed(s)?,
        (None, None) => permutations_needed(0.001)?,
    };
    let options = PermutationOptions {
        permutations: k,
        sided: match a.sided {
            SidedArg::Two => Sidedness::TwoSided,
            SidedArg::Greater => Sidedness::Greater,
        },
        scheme: if a.paired { PermutationScheme::Paired } else { PermutationScheme::Pooled },
        add_one: a.add_one,
    };
    let r = compare_reports(&ra, &rb, options, &mut stream_rng(a.seed, Stream::Permutation, 0))?;
    let mut out = String::new();
    let _ = writeln!(out, "protocol\t{}", ra.protocol);
    let _ = writeln!(out, "map_a\t{:.9}", ra.map);
    let _ = writeln!(out, "map_b\t{:.9}", rb.map);
    let _ = writeln!(out, "observed_difference\t{:.9}", r.observed);
    let _ = writeln!(out, "permutations\t{}", r.permutations);
    let _ = writeln!(out, "p_value\t{:.9}", r.p_value);
    let _ = writeln!(out, "std_error\t{:.9}", r.std_error);
    let _ = writeln!(
        out,
        "sided\t{}",
        if r.sided == Sidedness::TwoSided { "two" } else { "greater" }
    );
    let _ = writeln!(
        out,
        "scheme\t{}",
        if r.scheme == PermutationScheme::Pooled { "pooled" } else { "paired" }
    );
    emit(a.out.as_deref(), &out)
}
