//! Loading, building, and saving of run artifacts: corpora, the trained
//! model, the datastore, and the inverted-file index.

use std::path::Path;

use knndiv_core::corpus::ParallelCorpus;
use knndiv_core::datastore::{build_ivf, Datastore, IvfIndex};
use knndiv_core::perturb::{estimate_distance_stats, DistanceStats};
use knndiv_core::toymodel::{ModelData, TableModel, BOS};

use crate::config::RunConfig;
use crate::CliError;

pub fn read_corpus(path: &Path) -> Result<ParallelCorpus, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read corpus {}: {e}", path.display())))?;
    let corpus = ParallelCorpus::parse(&text)
        .map_err(|e| CliError::data(format!("corpus {}: {e}", path.display())))?;
    if corpus.is_empty() {
        return Err(CliError::data(format!(
            "corpus {} is empty",
            path.display()
        )));
    }
    Ok(corpus)
}

pub fn train_model(config: &RunConfig, train: &ParallelCorpus) -> Result<TableModel, CliError> {
    TableModel::train(
        &train.sources(),
        &train.targets(),
        config.model.alpha,
        config.model.embed_dim,
        config.model.embed_seed,
    )
    .map_err(CliError::from)
}

pub fn save_model(model: &TableModel, path: &Path) -> Result<(), CliError> {
    let json = serde_json::to_string(&model.to_data())
        .map_err(|e| CliError::internal(format!("model serialization: {e}")))?;
    std::fs::write(path, json)
        .map_err(|e| CliError::data(format!("cannot write model {}: {e}", path.display())))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TableModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::data(format!(
            "cannot read model {} (run `train` first): {e}",
            path.display()
        ))
    })?;
    let data: ModelData = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("model {}: {e}", path.display())))?;
    TableModel::from_data(data).map_err(CliError::from)
}

/// Feeds the training corpus through the model and collects the datastore.
/// The model must have been trained on exactly this corpus.
pub fn build_datastore(model: &TableModel, train: &ParallelCorpus) -> Result<Datastore, CliError> {
    // catch model/corpus drift before building silently wrong keys
    let fresh_src = knndiv_core::toymodel::Vocab::from_sentences(train.sources());
    let fresh_tgt = knndiv_core::toymodel::Vocab::from_sentences(train.targets());
    if fresh_src != model.vocab_src || fresh_tgt != model.vocab_tgt {
        return Err(CliError::config(
            "vocab mismatch: the model was trained on a different corpus",
        ));
    }
    let entries = model.datastore_entries(&train.sources(), &train.targets())?;
    Datastore::build(entries, model.embed_dim(), model.vocab_tgt.len() as u32)
        .map_err(CliError::from)
}

pub fn save_datastore(ds: &Datastore, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, ds.save())
        .map_err(|e| CliError::data(format!("cannot write datastore {}: {e}", path.display())))?;
    Ok(())
}

pub fn load_datastore(path: &Path, model: &TableModel) -> Result<Datastore, CliError> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::data(format!(
            "cannot read datastore {} (run `build` first): {e}",
            path.display()
        ))
    })?;
    let ds = Datastore::load(&bytes)
        .map_err(|e| CliError::data(format!("datastore {}: {e}", path.display())))?;
    if ds.dim() != model.embed_dim() {
        return Err(CliError::config(format!(
            "datastore dim {} does not match model embed_dim {}",
            ds.dim(),
            model.embed_dim()
        )));
    }
    if ds.vocab_size() != model.vocab_tgt.len() as u32 {
        return Err(CliError::config(format!(
            "datastore vocab_size {} does not match model target vocab {}",
            ds.vocab_size(),
            model.vocab_tgt.len()
        )));
    }
    Ok(ds)
}

pub fn build_index(config: &RunConfig, ds: &Datastore) -> Result<Option<IvfIndex>, CliError> {
    if config.datastore.n_clusters == 0 {
        return Ok(None);
    }
    build_ivf(
        ds,
        config.datastore.n_clusters,
        config.datastore.kmeans_iters,
        config.datastore.kmeans_seed,
    )
    .map(Some)
    .map_err(|e| CliError::config(format!("index build: {e}")))
}

pub fn load_index(path: &Path) -> Result<IvfIndex, CliError> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::data(format!(
            "cannot read index {} (run `build` first): {e}",
            path.display()
        ))
    })?;
    IvfIndex::load(&bytes).map_err(|e| CliError::data(format!("index {}: {e}", path.display())))
}

/// Hidden-state queries for every target-token context of the validation
/// corpus, then pooled k-NN distance statistics against the datastore.
/// Feeds static-noise calibration.
pub fn validation_stats(
    model: &TableModel,
    ds: &Datastore,
    valid: &ParallelCorpus,
    k: usize,
) -> Result<DistanceStats, CliError> {
    let mut queries: Vec<Vec<f32>> = Vec::new();
    for (src, tgt) in &valid.pairs {
        let src_ids = model.vocab_src.encode(src);
        let mut y = vec![BOS];
        y.extend(model.vocab_tgt.encode(tgt));
        y.push(knndiv_core::toymodel::EOS);
        for t in 1..y.len() {
            queries.push(model.hidden_state(&src_ids, &y[..t])?);
        }
    }
    estimate_distance_stats(ds, &queries, k).map_err(CliError::from)
}
