//! Side-by-side comparison of base-frame selectors against the oracle.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dataset::BurstSequence;
use crate::error::{NebiError, Result};

use super::metrics::{psnr, ssim};

/// One method's choice for every sequence, in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub method: String,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub chosen: Vec<usize>,
    /// Fraction of sequences where the choice equals the stored label.
    pub agreement: f64,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRow {
    pub sequence: usize,
    pub seed: u64,
    pub oracle: usize,
    /// Per method, in report order: (index, psnr, ssim).
    pub picks: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub dataset_id: String,
    pub seeds: Vec<(String, u64)>,
    pub methods: Vec<MethodSummary>,
    pub rows: Vec<SequenceRow>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

/// Scores every selection by the PSNR/SSIM of the demosaiced chosen frame
/// against the clean LR reference.
pub fn evaluate(
    dataset_id: &str,
    seeds: &[(String, u64)],
    seqs: &[BurstSequence],
    selections: &[Selection],
) -> Result<SelectionReport> {
    if seqs.is_empty() {
        return Err(NebiError::Empty("no sequences to evaluate".into()));
    }
    for s in selections {
        if s.indices.len() != seqs.len() {
            return Err(NebiError::ShapeMismatch(format!(
                "{} has {} choices for {} sequences",
                s.method,
                s.indices.len(),
                seqs.len()
            )));
        }
        for (&idx, seq) in s.indices.iter().zip(seqs) {
            if idx >= seq.len() {
                return Err(NebiError::IndexOutOfRange { index: idx, len: seq.len() });
            }
        }
    }
    // Metrics for every frame once, then look up each method's pick.
    let scores: Vec<Vec<(f64, f64)>> = seqs
        .par_iter()
        .map(|seq| {
            let reference = seq.clean_reference()?;
            (0..seq.len())
                .map(|i| {
                    let d = seq.demosaiced(i);
                    Ok((psnr(&d, &reference)?, ssim(&d, &reference)?))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<SequenceRow> = seqs
        .iter()
        .enumerate()
        .map(|(k, seq)| SequenceRow {
            sequence: k,
            seed: seq.seed,
            oracle: seq.gt_index,
            picks: selections
                .iter()
                .map(|s| {
                    let i = s.indices[k];
                    (i, scores[k][i].0, scores[k][i].1)
                })
                .collect(),
        })
        .collect();

    let methods = selections
        .iter()
        .enumerate()
        .map(|(m, s)| {
            let hits = s.indices.iter().zip(seqs).filter(|(i, q)| **i == q.gt_index).count();
            let p: Vec<f64> = rows.iter().map(|r| r.picks[m].1).collect();
            let q: Vec<f64> = rows.iter().map(|r| r.picks[m].2).collect();
            let (psnr_mean, psnr_std) = mean_std(&p);
            let (ssim_mean, ssim_std) = mean_std(&q);
            MethodSummary {
                method: s.method.clone(),
                chosen: s.indices.clone(),
                agreement: hits as f64 / seqs.len() as f64,
                psnr_mean,
                psnr_std,
                ssim_mean,
                ssim_std,
            }
        })
        .collect();

    Ok(SelectionReport {
        dataset_id: dataset_id.to_string(),
        seeds: seeds.to_vec(),
        methods,
        rows,
    })
}

impl SelectionReport {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// Per-sequence tab-separated table.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("sequence\tseed\toracle");
        for m in &self.methods {
            write!(s, "\t{0}_index\t{0}_psnr\t{0}_ssim", m.method).unwrap();
        }
        s.push('\n');
        for r in &self.rows {
            write!(s, "{}\t{}\t{}", r.sequence, r.seed, r.oracle).unwrap();
            for (i, p, q) in &r.picks {
                write!(s, "\t{i}\t{p:.6}\t{q:.6}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// Machine-readable key=value block.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        writeln!(s, "dataset_id={}", self.dataset_id).unwrap();
        for (k, v) in &self.seeds {
            writeln!(s, "seed.{k}={v}").unwrap();
        }
        writeln!(s, "sequences={}", self.rows.len()).unwrap();
        for m in &self.methods {
            let p = &m.method;
            writeln!(s, "{p}.agreement={:.6}", m.agreement).unwrap();
            writeln!(s, "{p}.psnr_mean={:.6}", m.psnr_mean).unwrap();
            writeln!(s, "{p}.psnr_std={:.6}", m.psnr_std).unwrap();
            writeln!(s, "{p}.ssim_mean={:.6}", m.ssim_mean).unwrap();
            writeln!(s, "{p}.ssim_std={:.6}", m.ssim_std).unwrap();
        }
        s
    }

    /// Summary block, a blank line, then the table.
    pub fn render(&self) -> String {
        format!("{}\n{}", self.summary(), self.to_tsv())
    }
}
