//! Subcommand implementations. Every command is deterministic given its
//! inputs: outputs embed the resolved configuration and contain no
//! timestamps or machine-dependent content.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use knndiv_core::corpus::{generate, GenSpec, ParallelCorpus};
use knndiv_core::decode::{CandidateList, DecodeConfig, Pipeline, Searcher};
use knndiv_core::metrics::{bleu_at_n, deq, dp, ref_bleu, EvalBundle, FluencyScorer, MockFluency};
use knndiv_core::toymodel::{TableModel, BOS, EOS};
use rayon::prelude::*;

use crate::artifacts;
use crate::candidates::{
    read_candidates, read_logliks, read_scores, write_candidates, write_logliks, CandidateRecord,
    Header, HypRecord, LoglikRecord, VERSION,
};
use crate::config::{RunConfig, SweepSpec};
use crate::plot;
use crate::report::{build_report, bundle_from_candidates, ReportInputs};
use crate::CliError;

pub fn gen_corpus(out: &Path, seed: u64, spec: &GenSpec) -> Result<(), CliError> {
    let generated = generate(spec, seed).map_err(CliError::from)?;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", out.display())))?;
    let write = |name: &str, corpus: &ParallelCorpus| -> Result<(), CliError> {
        let path = out.join(name);
        std::fs::write(&path, corpus.to_tsv())
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    };
    write("train.tsv", &generated.train)?;
    write("valid.tsv", &generated.valid)?;
    write("test.tsv", &generated.test)?;
    if let Some(refb) = &generated.test_refb {
        write("test_refb.tsv", refb)?;
    }
    eprintln!(
        "wrote {} train / {} valid / {} test pairs to {}",
        generated.train.len(),
        generated.valid.len(),
        generated.test.len(),
        out.display()
    );
    Ok(())
}

pub fn train(config: &RunConfig) -> Result<(), CliError> {
    let corpus = artifacts::read_corpus(&config.paths.train)?;
    let model = artifacts::train_model(config, &corpus)?;
    artifacts::save_model(&model, &config.paths.model)?;
    eprintln!(
        "trained on {} pairs: {} source / {} target types -> {}",
        corpus.len(),
        model.vocab_src.len(),
        model.vocab_tgt.len(),
        config.paths.model.display()
    );
    Ok(())
}

pub fn build(config: &RunConfig) -> Result<(), CliError> {
    let corpus = artifacts::read_corpus(&config.paths.train)?;
    let model = artifacts::load_model(&config.paths.model)?;
    let ds = artifacts::build_datastore(&model, &corpus)?;
    artifacts::save_datastore(&ds, &config.paths.datastore)?;
    eprintln!(
        "datastore: {} entries of dim {} -> {}",
        ds.len(),
        ds.dim(),
        config.paths.datastore.display()
    );
    if let Some(index) = artifacts::build_index(config, &ds)? {
        let path = config.paths.index.as_ref().ok_or_else(|| {
            CliError::config("datastore.n_clusters is set but paths.index is missing")
        })?;
        std::fs::write(path, index.save())
            .map_err(|e| CliError::data(format!("cannot write index {}: {e}", path.display())))?;
        eprintln!(
            "index: {} clusters -> {}",
            index.n_clusters(),
            path.display()
        );
    }
    Ok(())
}

/// Everything `decode`, `eval --fluency`, and `sweep` need in memory.
pub struct LoadedRun {
    pub config: RunConfig,
    pub model: TableModel,
    pub datastore: knndiv_core::datastore::Datastore,
    pub index: Option<knndiv_core::datastore::IvfIndex>,
    pub decode_config: DecodeConfig,
}

impl LoadedRun {
    pub fn load(config: RunConfig) -> Result<Self, CliError> {
        let model = artifacts::load_model(&config.paths.model)?;
        let datastore = artifacts::load_datastore(&config.paths.datastore, &model)?;
        let index = match (&config.paths.index, config.datastore.n_clusters) {
            (Some(path), n) if n > 0 => Some(artifacts::load_index(path)?),
            _ => None,
        };
        let decode_config = resolve_decode_config(&config, &model, &datastore)?;
        Ok(LoadedRun {
            config,
            model,
            datastore,
            index,
            decode_config,
        })
    }

    pub fn searcher(&self) -> Searcher<'_> {
        match &self.index {
            Some(index) => Searcher::Ivf {
                index,
                n_probe: self.config.datastore.n_probe,
            },
            None => Searcher::Exact,
        }
    }

    pub fn pipeline(&self) -> Result<Pipeline<'_>, CliError> {
        Pipeline::new(
            &self.model,
            &self.datastore,
            self.searcher(),
            &self.decode_config,
        )
        .map_err(CliError::from)
    }
}

/// Resolves the configured perturbation, computing validation distance
/// statistics only for the kinds that need them.
pub fn resolve_decode_config(
    config: &RunConfig,
    model: &TableModel,
    ds: &knndiv_core::datastore::Datastore,
) -> Result<DecodeConfig, CliError> {
    let stats = if config.perturb.needs_stats() {
        let valid = artifacts::read_corpus(&config.paths.valid)?;
        Some(artifacts::validation_stats(
            model,
            ds,
            &valid,
            config.decode.k,
        )?)
    } else {
        None
    };
    config.decode_config(stats.as_ref())
}

fn surface_tokens(model: &TableModel, hyp_tokens: &[u32]) -> Vec<String> {
    hyp_tokens
        .iter()
        .filter(|&&t| t != BOS && t != EOS)
        .map(|&t| model.vocab_tgt.token(t).to_string())
        .collect()
}

/// Decodes every source of a corpus in parallel, deterministic in the
/// sentence index.
pub fn decode_corpus(run: &LoadedRun, sources: &[&str]) -> Result<Vec<CandidateList>, CliError> {
    let pipeline = run.pipeline()?;
    let mut results: Vec<(usize, Result<CandidateList, CliError>)> = sources
        .par_iter()
        .enumerate()
        .map(|(i, src)| {
            let ids = run.model.vocab_src.encode(src);
            (i, pipeline.decode(&ids, i as u64).map_err(CliError::from))
        })
        .collect();
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, r)| r).collect()
}

pub fn candidate_records(
    run: &LoadedRun,
    sources: &[&str],
    lists: &[CandidateList],
) -> Vec<CandidateRecord> {
    sources
        .iter()
        .zip(lists.iter())
        .enumerate()
        .map(|(id, (src, list))| CandidateRecord {
            id,
            source: src.to_string(),
            padded: list.padded,
            hyps: list
                .hypotheses
                .iter()
                .enumerate()
                .map(|(rank, h)| HypRecord {
                    tokens: surface_tokens(&run.model, &h.tokens),
                    logprob: h.logprob,
                    rank,
                })
                .collect(),
        })
        .collect()
}

pub fn decode(config: RunConfig) -> Result<(), CliError> {
    let run = LoadedRun::load(config)?;
    let test = artifacts::read_corpus(&run.config.paths.test)?;
    let sources = test.sources();
    let lists = decode_corpus(&run, &sources)?;
    let fallbacks: usize = lists.iter().map(|l| l.knn_fallbacks).sum();
    let records = candidate_records(&run, &sources, &lists);
    let header = Header {
        version: VERSION.to_string(),
        run_config: run.config.clone(),
        decode_config: run.decode_config.clone(),
    };
    write_candidates(&run.config.paths.candidates, &header, &records)?;
    eprintln!(
        "decoded {} sentences x {} hypotheses -> {} ({} retrieval fallbacks)",
        records.len(),
        run.decode_config.beam_size,
        run.config.paths.candidates.display(),
        fallbacks
    );
    Ok(())
}

/// Forced decoding: scores the target side of `targets_path` (a TSV corpus)
/// under the configured pipeline and writes per-sentence log-likelihoods.
pub fn decode_forced(config: RunConfig, targets_path: &Path, out: &Path) -> Result<(), CliError> {
    let run = LoadedRun::load(config)?;
    let corpus = artifacts::read_corpus(targets_path)?;
    let pipeline = run.pipeline()?;
    let mut scored: Vec<(usize, Result<LoglikRecord, CliError>)> = corpus
        .pairs
        .par_iter()
        .enumerate()
        .map(|(i, (src, tgt))| {
            let src_ids = run.model.vocab_src.encode(src);
            let mut target = vec![BOS];
            target.extend(run.model.vocab_tgt.encode(tgt));
            target.push(EOS);
            let record = pipeline
                .forced_decode(&src_ids, &target, i as u64)
                .map(|score| LoglikRecord {
                    id: i,
                    loglik: score.loglik,
                    zero_prob_steps: score.zero_prob_steps,
                })
                .map_err(CliError::from);
            (i, record)
        })
        .collect();
    scored.sort_by_key(|(i, _)| *i);
    let records: Vec<LoglikRecord> = scored
        .into_iter()
        .map(|(_, r)| r)
        .collect::<Result<_, _>>()?;
    let header = Header {
        version: VERSION.to_string(),
        run_config: run.config.clone(),
        decode_config: run.decode_config.clone(),
    };
    write_logliks(out, &header, &records)?;
    eprintln!(
        "forced-decoded {} sentences -> {}",
        records.len(),
        out.display()
    );
    Ok(())
}

pub struct EvalArgs {
    pub candidates: PathBuf,
    pub baseline: Option<PathBuf>,
    pub refs: PathBuf,
    pub logliks_a: Option<PathBuf>,
    pub logliks_b: Option<PathBuf>,
    pub fluency: Option<String>,
    pub out: PathBuf,
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let refs = artifacts::read_corpus(&args.refs)?;
    let cands = read_candidates(&args.candidates)?;
    eprintln!(
        "evaluating {} (decoded by v{}, beam_size {})",
        args.candidates.display(),
        cands.header.version,
        cands.header.decode_config.beam_size
    );
    let bundle = bundle_from_candidates(&cands, &refs)?;
    let baseline_file = args
        .baseline
        .as_ref()
        .map(|p| read_candidates(p))
        .transpose()?;
    let baseline_bundle = baseline_file
        .as_ref()
        .map(|f| bundle_from_candidates(f, &refs))
        .transpose()?;

    let logliks = match (&args.logliks_a, &args.logliks_b) {
        (Some(a), Some(b)) => {
            let la: Vec<f64> = read_logliks(a)?.iter().map(|r| r.loglik).collect();
            let lb: Vec<f64> = read_logliks(b)?.iter().map(|r| r.loglik).collect();
            Some((la, lb))
        }
        (None, None) => None,
        _ => {
            return Err(CliError::config(
                "--logliks-a and --logliks-b must be given together",
            ))
        }
    };

    let fluency_scores = match &args.fluency {
        None => None,
        Some(spec) if spec == "mock" => {
            let scorer = MockFluency { seed: 0 };
            Some(
                bundle
                    .candidates
                    .iter()
                    .map(|list| list.iter().map(|h| scorer.score(h)).collect())
                    .collect::<Vec<Vec<f64>>>(),
            )
        }
        Some(path) => {
            let shape: Vec<usize> = bundle.candidates.iter().map(|l| l.len()).collect();
            Some(read_scores(Path::new(path), &shape)?)
        }
    };

    let report = build_report(&ReportInputs {
        system: &bundle,
        baseline: baseline_bundle.as_ref(),
        logliks: logliks.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice())),
        fluency_scores: fluency_scores.as_deref(),
    })?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::internal(format!("report serialization: {e}")))?;
    std::fs::write(&args.out, json + "\n")
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", args.out.display())))?;
    eprintln!("report -> {}", args.out.display());
    Ok(())
}

/// One sweep row's metrics (0-100 scale where BLEU-derived).
struct PointMetrics {
    dp: Option<f64>,
    bleu_at_1: f64,
    bleu_at_n: f64,
    ref_bleu: f64,
}

/// Axis coordinates, seed, and metrics of one completed sweep task.
type SweepRow = (Vec<serde_json::Value>, u64, PointMetrics);

fn eval_point(
    model: &TableModel,
    ds: &knndiv_core::datastore::Datastore,
    index: Option<&knndiv_core::datastore::IvfIndex>,
    config: &RunConfig,
    decode_config: &DecodeConfig,
    test: &ParallelCorpus,
) -> Result<PointMetrics, CliError> {
    let searcher = match index {
        Some(index) => Searcher::Ivf {
            index,
            n_probe: config.datastore.n_probe,
        },
        None => Searcher::Exact,
    };
    let pipeline = Pipeline::new(model, ds, searcher, decode_config)?;
    let sources = test.sources();
    let mut lists: Vec<(usize, Result<CandidateList, CliError>)> = sources
        .par_iter()
        .enumerate()
        .map(|(i, src)| {
            let ids = model.vocab_src.encode(src);
            (i, pipeline.decode(&ids, i as u64).map_err(CliError::from))
        })
        .collect();
    lists.sort_by_key(|(i, _)| *i);
    let candidates: Vec<Vec<String>> = lists
        .into_iter()
        .map(|(_, r)| {
            r.map(|list| {
                list.hypotheses
                    .iter()
                    .map(|h| surface_tokens(model, &h.tokens).join(" "))
                    .collect()
            })
        })
        .collect::<Result<_, _>>()?;
    let bundle = EvalBundle::new(
        sources.iter().map(|s| s.to_string()).collect(),
        test.targets().iter().map(|s| s.to_string()).collect(),
        candidates,
    )?;
    let width = bundle.rectangular_width()?;
    Ok(PointMetrics {
        dp: if width >= 2 {
            Some(100.0 * dp(&bundle)?)
        } else {
            None
        },
        bleu_at_1: 100.0 * bleu_at_n(&bundle, 1)?,
        bleu_at_n: 100.0 * bleu_at_n(&bundle, width)?,
        ref_bleu: 100.0 * ref_bleu(&bundle)?,
    })
}

pub fn sweep(spec_path: &Path, out: &Path, plot_path: Option<&Path>) -> Result<(), CliError> {
    let spec = SweepSpec::load(spec_path)?;
    let base_config = RunConfig::from_value(spec.base.clone(), &[])?;

    // artifacts are built once, in memory, from the base configuration
    let train_corpus = artifacts::read_corpus(&base_config.paths.train)?;
    let test_corpus = artifacts::read_corpus(&base_config.paths.test)?;
    let model = artifacts::train_model(&base_config, &train_corpus)?;
    let ds = artifacts::build_datastore(&model, &train_corpus)?;
    let index = artifacts::build_index(&base_config, &ds)?;

    let points = spec.points()?;
    let mut tasks: Vec<(usize, usize, Vec<serde_json::Value>, RunConfig)> = Vec::new();
    for (pi, (coords, doc)) in points.iter().enumerate() {
        for (si, &seed) in spec.seeds.iter().enumerate() {
            let config = RunConfig::from_value(doc.clone(), &[format!("decode.seed={seed}")])?;
            tasks.push((pi, si, coords.clone(), config));
        }
    }

    // per-seed metrics of the unmodified base, the DEQ anchor
    let mut base_by_seed: BTreeMap<u64, PointMetrics> = BTreeMap::new();
    for &seed in &spec.seeds {
        let config = RunConfig::from_value(spec.base.clone(), &[format!("decode.seed={seed}")])?;
        let decode_config = resolve_decode_config(&config, &model, &ds)?;
        let metrics = eval_point(
            &model,
            &ds,
            index.as_ref(),
            &config,
            &decode_config,
            &test_corpus,
        )?;
        base_by_seed.insert(seed, metrics);
    }

    let mut rows: Vec<(usize, usize, Result<SweepRow, CliError>)> = tasks
        .par_iter()
        .map(|(pi, si, coords, config)| {
            let result = resolve_decode_config(config, &model, &ds).and_then(|dc| {
                eval_point(&model, &ds, index.as_ref(), config, &dc, &test_corpus)
                    .map(|m| (coords.clone(), config.decode.seed, m))
            });
            (*pi, *si, result)
        })
        .collect();
    rows.sort_by_key(|&(pi, si, _)| (pi, si));

    let mut csv = String::new();
    for axis in &spec.axes {
        csv.push_str(&axis.field);
        csv.push(',');
    }
    csv.push_str("seed,dp,bleu_at_1,bleu_at_n,ref_bleu,deq\n");
    let mut scatter: Vec<(f64, f64)> = Vec::new();
    for (_, _, row) in rows {
        let (coords, seed, metrics) = row?;
        for coord in &coords {
            csv.push_str(&coord.to_string());
            csv.push(',');
        }
        let base = &base_by_seed[&seed];
        let deq_cell = match (metrics.dp, base.dp) {
            (Some(sys_dp), Some(base_dp)) => {
                match deq(
                    sys_dp / 100.0,
                    base_dp / 100.0,
                    metrics.ref_bleu / 100.0,
                    base.ref_bleu / 100.0,
                ) {
                    Some(v) => format!("{v:.6}"),
                    None => "NA".to_string(),
                }
            }
            _ => "NA".to_string(),
        };
        let dp_cell = metrics
            .dp
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "NA".to_string());
        csv.push_str(&format!(
            "{seed},{dp_cell},{:.6},{:.6},{:.6},{deq_cell}\n",
            metrics.bleu_at_1, metrics.bleu_at_n, metrics.ref_bleu
        ));
        if let Some(dp_value) = metrics.dp {
            scatter.push((metrics.bleu_at_n, dp_value));
        }
    }
    std::fs::write(out, csv)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", out.display())))?;
    eprintln!("sweep: {} rows -> {}", tasks.len(), out.display());

    if let Some(plot_path) = plot_path {
        let svg = plot::scatter_svg(&scatter, "BLEU@N", "DP");
        std::fs::write(plot_path, svg)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", plot_path.display())))?;
        eprintln!("plot -> {}", plot_path.display());
    }
    Ok(())
}
