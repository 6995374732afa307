use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use sieve_core::eval::format_table;
use sieve_core::io::{self, PairFormat, RunFormat};
use sieve_core::pipelines::{self, PipelineConfig};
use sieve_core::{
    evaluate, AnalyzedMode, Analyzer, Bm25Params, Dataset, EmbeddingMatrix, InvertedIndex, Lexicon,
    Qrels, Scorer, ScorerSpec,
};

use crate::{
    Cli, Command, ConvertNliArgs, DenoiseArgs, EvalArgs, ExportTrainArgs, IndexArgs, MatchArgs,
    MineArgs, OutputFormat, SearchArgs, StatsArgs, TrainFormat,
};

pub fn run(cli: &Cli) -> Result<()> {
    let batch = cli.batch_size as usize;
    match &cli.command {
        Command::Index(a) => index(a),
        Command::Search(a) => search(a),
        Command::Match(a) => matching(a, batch),
        Command::Mine(a) => mine(a, batch),
        Command::Denoise(a) => denoise(a, batch),
        Command::ConvertNli(a) => convert_nli(a),
        Command::Eval(a) => eval(a),
        Command::Stats(a) => stats(a),
        Command::ExportTrain(a) => export_train(a),
    }
}

fn load_lexicon(path: Option<&Path>) -> Result<Lexicon> {
    Ok(match path {
        Some(p) => Lexicon::load_tsv(p)?,
        None => Lexicon::empty(),
    })
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    })
}

fn load_pairs(path: &Path) -> Result<Dataset> {
    Ok(io::load_pairs(path, PairFormat::from_path(path))?)
}

fn scorer(spec: &ScorerSpec, batch: usize, analyzer: &Analyzer) -> Result<Scorer> {
    Ok(Scorer::from_spec(&spec.clone().with_batch_size(batch), analyzer.clone())?)
}

fn index(a: &IndexArgs) -> Result<()> {
    let corpus = io::load_corpus(&a.corpus, a.use_title)?;
    let analyzer = Analyzer::new(a.analyzed.into(), Arc::new(load_lexicon(a.lemmas.as_deref())?));
    let params = Bm25Params { k1: a.k1, b: a.b };
    let idx = InvertedIndex::build(&corpus, analyzer, params)?;
    idx.save(&a.out)?;
    eprintln!(
        "indexed {} passages, {} terms, avgdl {:.2} -> {}",
        idx.num_docs(),
        idx.vocabulary().len(),
        idx.avgdl(),
        a.out.display()
    );
    Ok(())
}

fn search(a: &SearchArgs) -> Result<()> {
    let k = a.k as usize;
    let runs = if let Some(dir) = &a.index {
        let idx = InvertedIndex::load(dir)?;
        let queries: Vec<(String, String)> = io::load_questions(&a.queries)?
            .into_iter()
            .map(|q| (q.id, q.text))
            .collect();
        idx.search_batch(&queries, k)
    } else {
        let vectors = a.embeddings.as_ref().expect("clap enforces a backend");
        let passages = EmbeddingMatrix::load(vectors, EmbeddingMatrix::default_ids_path(vectors), a.normalize)?;
        let queries =
            EmbeddingMatrix::load(&a.queries, EmbeddingMatrix::default_ids_path(&a.queries), a.normalize)?;
        passages.search_batch(&queries, k)?
    };
    let format = match a.format {
        OutputFormat::Jsonl => RunFormat::Jsonl,
        OutputFormat::Trec => RunFormat::Trec,
    };
    io::write_runs(&a.out, &runs, format)?;
    eprintln!("wrote {} runs -> {}", runs.len(), a.out.display());
    Ok(())
}

fn matching(a: &MatchArgs, batch: usize) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?.matching;
    if let Some(v) = a.bm25_top {
        cfg.bm25_top = v as usize;
    }
    if let Some(v) = a.rerank_top {
        cfg.rerank_top = v as usize;
    }
    if let Some(v) = a.verify_threshold {
        cfg.verify_threshold = v;
    }
    let questions = io::load_questions(&a.questions)?;
    let idx = InvertedIndex::load(&a.index)?;
    let corpus = io::load_corpus(&a.corpus, idx.use_title())?;
    let scorer_ = scorer(&a.scorer, batch, idx.analyzer())?;
    let verifier = scorer(&a.verifier, batch, idx.analyzer())?;
    let pairs = pipelines::match_questions(&questions, &corpus, &idx, &scorer_, &verifier, &cfg)?;
    let by_id: HashMap<&str, _> = questions.iter().map(|q| (q.id.as_str(), q)).collect();
    let ds = pipelines::assemble(pairs, |id| by_id.get(id).copied(), &corpus)?;
    io::write_pairs(&a.out, &ds)?;
    print_stats_header();
    println!("{:<24} {}", "matched", ds.stats());
    Ok(())
}

fn mine(a: &MineArgs, batch: usize) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?.mine;
    if let Some(v) = a.bm25_top {
        cfg.bm25_top = v as usize;
    }
    if let Some(v) = a.threshold {
        cfg.negative_threshold = v;
    }
    let ds = load_pairs(&a.pairs)?;
    let idx = InvertedIndex::load(&a.index)?;
    let corpus = io::load_corpus(&a.corpus, idx.use_title())?;
    let scorer = scorer(&a.scorer, batch, idx.analyzer())?;
    let negatives = pipelines::mine_hard_negatives(&ds, &corpus, &idx, &scorer, &cfg)?;
    let n = negatives.len();
    let out = pipelines::assemble(negatives, |id| ds.question(id), &corpus)?;
    io::write_pairs(&a.out, &out)?;
    println!("mined {n} hard negatives for {} questions", ds.questions().len());
    Ok(())
}

fn denoise(a: &DenoiseArgs, batch: usize) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?.denoise;
    let ds = load_pairs(&a.pairs)?;
    let analyzer = Analyzer::new(AnalyzedMode::Lemma, Arc::new(load_lexicon(a.lemmas.as_deref())?));
    let scorer = scorer(&a.scorer, batch, &analyzer)?;
    let (kept, report) = pipelines::denoise(&ds, &scorer, &analyzer, &cfg)?;
    let out = Dataset::derive(&ds, kept, false)?;
    io::write_pairs(&a.out, &out)?;
    if let Some(path) = &a.report {
        let json = serde_json::to_string_pretty(&report)?;
        fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    for (filter, count) in &report.per_filter {
        println!("{:<24} {count}", format!("{filter:?}"));
    }
    println!(
        "kept {} of {} pairs; rejected {:.2}% of all pairs, {:.2}% of positives",
        report.kept,
        report.input,
        report.rejected_fraction * 100.0,
        report.positive_rejected_fraction * 100.0
    );
    Ok(())
}

fn convert_nli(a: &ConvertNliArgs) -> Result<()> {
    let records = pipelines::load_nli(&a.input)?;
    let ds = pipelines::convert_nli(&records)?;
    io::write_pairs(&a.out, &ds)?;
    println!("converted {} records", records.len());
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let runs = io::load_runs(&a.run, RunFormat::from_path(&a.run))?;
    let qrels = Qrels::load(&a.qrels)?;
    let report = evaluate(&runs, &qrels, a.k as usize)?;
    print!("{}", format_table(&[(a.name.as_str(), &report)]));
    eprintln!(
        "{} questions evaluated, {} without relevant passages skipped, {} runs without judgments",
        report.n_evaluated, report.n_skipped, report.n_unmatched_runs
    );
    if let Some(path) = &a.out {
        let json = serde_json::to_string_pretty(&report)?;
        fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &a.per_question {
        io::write_jsonl(path, &report.per_question)?;
    }
    Ok(())
}

fn print_stats_header() {
    println!(
        "{:<24} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "Dataset", "Q pos", "Q neg", "Q total", "P pos", "P neg", "P total"
    );
}

fn stats(a: &StatsArgs) -> Result<()> {
    print_stats_header();
    for path in &a.pairs {
        let ds = load_pairs(path)?;
        let name = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        println!("{name:<24} {}", ds.stats());
    }
    Ok(())
}

fn export_train(a: &ExportTrainArgs) -> Result<()> {
    let ds = load_pairs(&a.pairs)?;
    let n = match a.format {
        TrainFormat::DprJsonl => pipelines::export_training(&ds, &a.out)?,
    };
    println!("exported {n} questions");
    Ok(())
}
