//! Equal error rate, accuracy at the EER threshold, and DET operating
//! points over score records.
//!
//! Thresholds sweep the midpoints between consecutive distinct scores plus
//! one sentinel on each side. A spoof scoring above the threshold is a false
//! accept; a bona fide scoring at or below it is a false reject. The EER is
//! the FAR/FRR average at the threshold minimizing their gap, ties broken by
//! the lower threshold.

use std::fs;
use std::path::Path;

use crate::audio::Label;
use crate::error::{Error, Result};

/// One scored utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub utt_id: String,
    pub score: f64,
    pub label: Label,
}

/// One DET operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub eer: f64,
    pub threshold_at_eer: f64,
    /// Classification accuracy at the EER threshold.
    pub accuracy: f64,
    pub det_points: Vec<DetPoint>,
    pub n_bona_fide: usize,
    pub n_spoof: usize,
}

/// Candidate thresholds: one below every score, the midpoints of consecutive
/// distinct scores, one above every score.
fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut thresholds = Vec::with_capacity(distinct.len() + 1);
    thresholds.push(distinct[0] - 1.0);
    for pair in distinct.windows(2) {
        thresholds.push((pair[0] + pair[1]) / 2.0);
    }
    thresholds.push(distinct[distinct.len() - 1] + 1.0);
    thresholds
}

pub fn compute_eer(records: &[ScoreRecord]) -> Result<EvalReport> {
    let n_bona = records.iter().filter(|r| r.label == Label::BonaFide).count();
    let n_spoof = records.len() - n_bona;
    if n_bona == 0 || n_spoof == 0 {
        return Err(Error::SingleClassScores);
    }
    if records.iter().any(|r| !r.score.is_finite()) {
        return Err(Error::NonFiniteInput);
    }

    // Sort once; each threshold then needs one pass over the sorted prefix
    // counts rather than a rescan of every record.
    let mut sorted: Vec<(f64, Label)> = records.iter().map(|r| (r.score, r.label)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let scores: Vec<f64> = sorted.iter().map(|(s, _)| *s).collect();
    let thresholds = candidate_thresholds(&scores);

    let mut det_points = Vec::with_capacity(thresholds.len());
    let mut best: Option<(f64, DetPoint)> = None;
    let mut at = 0usize; // records with score <= threshold
    let mut bona_below = 0usize;
    let mut spoof_below = 0usize;
    for &threshold in &thresholds {
        while at < sorted.len() && sorted[at].0 <= threshold {
            match sorted[at].1 {
                Label::BonaFide => bona_below += 1,
                Label::Spoof => spoof_below += 1,
            }
            at += 1;
        }
        let far = (n_spoof - spoof_below) as f64 / n_spoof as f64;
        let frr = bona_below as f64 / n_bona as f64;
        let point = DetPoint {
            threshold,
            far,
            frr,
        };
        det_points.push(point);
        let gap = (far - frr).abs();
        if best.is_none_or(|(best_gap, _)| gap < best_gap) {
            best = Some((gap, point));
        }
    }

    let (_, best_point) = best.expect("thresholds are never empty");
    let correct_bona = ((1.0 - best_point.frr) * n_bona as f64).round();
    let correct_spoof = ((1.0 - best_point.far) * n_spoof as f64).round();
    Ok(EvalReport {
        eer: (best_point.far + best_point.frr) / 2.0,
        threshold_at_eer: best_point.threshold,
        accuracy: (correct_bona + correct_spoof) / records.len() as f64,
        det_points,
        n_bona_fide: n_bona,
        n_spoof,
    })
}

// ---------------------------------------------------------------------------
// Score and report files
// ---------------------------------------------------------------------------

pub const SCORE_HEADER: &str = "utt_id,score,label";

pub fn write_score_csv(path: &Path, records: &[ScoreRecord]) -> Result<()> {
    let mut text = String::from(SCORE_HEADER);
    text.push('\n');
    for r in records {
        text.push_str(&format!("{},{:.12},{}\n", r.utt_id, r.score, r.label));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_score_csv(path: &Path) -> Result<Vec<ScoreRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    if header != SCORE_HEADER {
        return Err(Error::BadHeader(header.to_string()));
    }
    let mut records = Vec::new();
    for (i, raw) in lines.enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let row = i + 2;
        let mut fields = line.splitn(3, ',');
        let utt_id = fields.next().unwrap_or("").to_string();
        let score_tok = fields.next().unwrap_or("");
        let label_tok = fields.next().unwrap_or("");
        let score: f64 = score_tok.parse().map_err(|_| Error::BadLabel {
            row,
            field: "score",
            token: score_tok.to_string(),
        })?;
        let label = label_tok.parse::<Label>().map_err(|_| Error::BadLabel {
            row,
            field: "label",
            token: label_tok.to_string(),
        })?;
        records.push(ScoreRecord {
            utt_id,
            score,
            label,
        });
    }
    Ok(records)
}

pub fn write_det_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut text = String::from("threshold,far,frr\n");
    for p in &report.det_points {
        text.push_str(&format!("{:.12},{:.6},{:.6}\n", p.threshold, p.far, p.frr));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_report_txt(path: &Path, subset: &str, report: &EvalReport) -> Result<()> {
    let text = format!(
        "subset: {subset}\n\
         records: {} (bona_fide {}, spoof {})\n\
         eer: {:.6}\n\
         threshold_at_eer: {:.6}\n\
         accuracy_at_eer: {:.6}\n",
        report.n_bona_fide + report.n_spoof,
        report.n_bona_fide,
        report.n_spoof,
        report.eer,
        report.threshold_at_eer,
        report.accuracy
    );
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
