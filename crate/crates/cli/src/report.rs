//! Metric report assembly. BLEU-derived values and n-gram ratios are
//! reported in the conventional 0-100 scale; the underlying library works
//! in [0, 1].

use knndiv_core::metrics::{
    bleu_at_n, deq, distinct_ngram_ratio, dp, madll, merged_bleu, ref_bleu, spll_from_scores,
    EvalBundle, SpllStat,
};
use serde::Serialize;

use crate::candidates::CandidateFile;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub version: String,
    pub n_select: usize,
    /// Rank-slice discrepancy, 0-100. Absent for single-candidate lists.
    pub dp: Option<f64>,
    pub bleu_at_1: f64,
    pub bleu_at_n: f64,
    /// Oracle BLEU over the merged lists; present when a baseline is given.
    pub merged_bleu: Option<f64>,
    pub ref_bleu: f64,
    /// Number, `"undefined"` on a zero quality delta, `null` without a
    /// baseline.
    pub deq: serde_json::Value,
    pub distinct_ngrams: DistinctNgrams,
    pub madll: Option<MadllReport>,
    pub spll: Option<SpllReport>,
    pub baseline: Option<BaselineSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistinctNgrams {
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
    pub n4: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MadllReport {
    pub value: f64,
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpllReport {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineSummary {
    pub dp: Option<f64>,
    pub bleu_at_1: f64,
    pub bleu_at_n: f64,
    pub ref_bleu: f64,
}

fn scale(x: f64) -> f64 {
    100.0 * x
}

/// Builds an evaluation bundle out of a candidate file and the reference
/// corpus, checking alignment id by id.
pub fn bundle_from_candidates(
    cands: &CandidateFile,
    refs: &knndiv_core::corpus::ParallelCorpus,
) -> Result<EvalBundle, CliError> {
    if cands.records.len() != refs.len() {
        return Err(CliError::data(format!(
            "candidate file has {} records, reference corpus has {}",
            cands.records.len(),
            refs.len()
        )));
    }
    let mismatched: Vec<usize> = cands
        .records
        .iter()
        .zip(refs.pairs.iter())
        .filter(|(record, (src, _))| &record.source != src)
        .map(|(record, _)| record.id)
        .collect();
    if !mismatched.is_empty() {
        return Err(CliError::data(format!(
            "sources differ from references at ids {mismatched:?}"
        )));
    }
    EvalBundle::new(
        refs.sources().iter().map(|s| s.to_string()).collect(),
        refs.targets().iter().map(|s| s.to_string()).collect(),
        cands
            .records
            .iter()
            .map(|r| r.hyps.iter().map(|h| h.tokens.join(" ")).collect())
            .collect(),
    )
    .map_err(CliError::from)
}

pub struct ReportInputs<'a> {
    pub system: &'a EvalBundle,
    pub baseline: Option<&'a EvalBundle>,
    pub logliks: Option<(&'a [f64], &'a [f64])>,
    /// Raw fluency scores aligned with the system candidate matrix.
    pub fluency_scores: Option<&'a [Vec<f64>]>,
}

pub fn build_report(inputs: &ReportInputs) -> Result<Report, CliError> {
    let bundle = inputs.system;
    let n_select = bundle.rectangular_width().map_err(CliError::from)?;
    if n_select == 0 {
        return Err(CliError::data("candidate lists are empty"));
    }
    let bleu1 = bleu_at_n(bundle, 1)?;
    let bleun = bleu_at_n(bundle, n_select)?;
    if bleun + 1e-12 < bleu1 {
        return Err(CliError::internal(format!(
            "oracle BLEU degraded with a larger pool: BLEU@{n_select} {bleun} < BLEU@1 {bleu1}"
        )));
    }
    let dp_value = if n_select >= 2 {
        Some(dp(bundle)?)
    } else {
        None
    };
    let refb = ref_bleu(bundle)?;

    let mut merged = None;
    let mut deq_value = serde_json::Value::Null;
    let mut baseline_summary = None;
    if let Some(base) = inputs.baseline {
        merged = Some(scale(merged_bleu(bundle, base)?));
        let base_width = base.rectangular_width()?;
        let base_dp = if base_width >= 2 {
            Some(dp(base)?)
        } else {
            None
        };
        let base_ref = ref_bleu(base)?;
        deq_value = match (dp_value, base_dp) {
            (Some(sys_dp), Some(b_dp)) => match deq(sys_dp, b_dp, refb, base_ref) {
                Some(v) => serde_json::json!(v),
                None => serde_json::json!("undefined"),
            },
            _ => serde_json::Value::Null,
        };
        baseline_summary = Some(BaselineSummary {
            dp: base_dp.map(scale),
            bleu_at_1: scale(bleu_at_n(base, 1)?),
            bleu_at_n: scale(bleu_at_n(base, base_width)?),
            ref_bleu: scale(base_ref),
        });
    }

    let ratio = |n: usize| -> Result<f64, CliError> {
        distinct_ngram_ratio(&bundle.candidates, n)
            .map(scale)
            .map_err(CliError::from)
    };
    let distinct = DistinctNgrams {
        n1: ratio(1)?,
        n2: ratio(2)?,
        n3: ratio(3)?,
        n4: ratio(4)?,
    };

    let madll_report = match inputs.logliks {
        Some((a, b)) => {
            let r = madll(a, b)?;
            Some(MadllReport {
                value: r.value,
                skipped: r.skipped,
            })
        }
        None => None,
    };

    let spll_report = match inputs.fluency_scores {
        Some(scores) => {
            let max = spll_from_scores(bundle, scores, SpllStat::Max)?;
            let min = spll_from_scores(bundle, scores, SpllStat::Min)?;
            let mean = spll_from_scores(bundle, scores, SpllStat::Mean)?;
            Some(SpllReport {
                max: max.value,
                min: min.value,
                mean: mean.value,
                skipped: mean.skipped,
            })
        }
        None => None,
    };

    Ok(Report {
        version: crate::candidates::VERSION.to_string(),
        n_select,
        dp: dp_value.map(scale),
        bleu_at_1: scale(bleu1),
        bleu_at_n: scale(bleun),
        merged_bleu: merged,
        ref_bleu: scale(refb),
        deq: deq_value,
        distinct_ngrams: distinct,
        madll: madll_report,
        spll: spll_report,
        baseline: baseline_summary,
    })
}
