//! Confusion matrices, sensitivity/specificity/precision/accuracy, ROC
//! curves with AUC, and pigment-network detection rates. Atypical is the
//! positive class throughout.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::PnLabel;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{0} predictions for {1} ground-truth labels")]
    LengthMismatch(usize, usize),
    #[error("nothing to evaluate")]
    Empty,
    #[error("ROC needs both classes, only {0} present")]
    SingleClass(PnLabel),
    #[error("score is not finite")]
    NonFiniteScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    /// `TP / (TP + FN)`.
    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `TN / (FP + TN)`.
    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.fp + self.tn)
    }

    /// `TP / (TP + FP)`.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `(TP + TN) / (P + N)`.
    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn metrics(&self) -> Metrics {
        Metrics { se: self.sensitivity(), sp: self.specificity(), pr: self.precision(), ac: self.accuracy() }
    }
}

/// Each value is `None` when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub se: Option<f64>,
    pub sp: Option<f64>,
    pub pr: Option<f64>,
    pub ac: Option<f64>,
}

pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    cm.metrics()
}

pub fn confusion(preds: &[PnLabel], truths: &[PnLabel]) -> Result<ConfusionMatrix, EvalError> {
    if preds.len() != truths.len() {
        return Err(EvalError::LengthMismatch(preds.len(), truths.len()));
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (p, t) in preds.iter().zip(truths) {
        match (t, p) {
            (PnLabel::Atypical, PnLabel::Atypical) => cm.tp += 1,
            (PnLabel::Atypical, PnLabel::Typical) => cm.fn_ += 1,
            (PnLabel::Typical, PnLabel::Atypical) => cm.fp += 1,
            (PnLabel::Typical, PnLabel::Typical) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve from a descending sweep over the distinct scores (higher means
/// more atypical), equal scores stepped together, and its trapezoidal area.
pub fn roc_auc(scores: &[f64], truths: &[PnLabel]) -> Result<(Vec<RocPoint>, f64), EvalError> {
    if scores.len() != truths.len() {
        return Err(EvalError::LengthMismatch(scores.len(), truths.len()));
    }
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore);
    }
    let pos = truths.iter().filter(|&&t| t == PnLabel::Atypical).count();
    let neg = truths.len() - pos;
    if pos == 0 {
        return Err(EvalError::SingleClass(PnLabel::Typical));
    }
    if neg == 0 {
        return Err(EvalError::SingleClass(PnLabel::Atypical));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut roc = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            match truths[order[i]] {
                PnLabel::Atypical => tp += 1,
                PnLabel::Typical => fp += 1,
            }
            i += 1;
        }
        let prev = *roc.last().expect("starts at origin");
        let next = RocPoint { fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64 };
        auc += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) / 2.0;
        roc.push(next);
    }
    Ok((roc, auc))
}

pub fn write_roc_csv<W: Write>(roc: &[RocPoint], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["fpr", "tpr"])?;
    for p in roc {
        w.write_record([p.fpr.to_string(), p.tpr.to_string()])?;
    }
    w.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassDetection {
    pub total: usize,
    pub detected: usize,
}

impl ClassDetection {
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.detected as f64 / self.total as f64)
    }

    pub fn missed_rate(&self) -> Option<f64> {
        self.rate().map(|r| 1.0 - r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DetectionRates {
    /// Indexed by [`PnLabel::index`].
    pub per_class: [ClassDetection; 2],
    pub overall: ClassDetection,
}

impl DetectionRates {
    pub fn class(&self, label: PnLabel) -> ClassDetection {
        self.per_class[label.index()]
    }
}

pub fn detection_rates(results: &[(PnLabel, bool)]) -> Result<DetectionRates, EvalError> {
    if results.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut rates = DetectionRates::default();
    for &(label, detected) in results {
        for slot in [&mut rates.per_class[label.index()], &mut rates.overall] {
            slot.total += 1;
            slot.detected += usize::from(detected);
        }
    }
    Ok(rates)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub roc: Vec<RocPoint>,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
}

#[derive(Serialize)]
struct ReportJson {
    tp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
    fp: u64,
    tn: u64,
    se: Option<f64>,
    sp: Option<f64>,
    pr: Option<f64>,
    ac: Option<f64>,
    auc: Option<f64>,
}

impl EvalReport {
    /// Predicted labels plus per-sample scores (higher means atypical).
    pub fn new(preds: &[PnLabel], scores: &[f64], truths: &[PnLabel]) -> Result<Self, EvalError> {
        let confusion = confusion(preds, truths)?;
        let (roc, auc) = match roc_auc(scores, truths) {
            Ok((roc, auc)) => (roc, Some(auc)),
            Err(EvalError::SingleClass(_)) => (Vec::new(), None),
            Err(e) => return Err(e),
        };
        Ok(Self { confusion, metrics: confusion.metrics(), roc, auc })
    }

    /// JSON object with keys `tp, fn, fp, tn, se, sp, pr, ac, auc`;
    /// undefined metrics are `null`.
    pub fn to_json(&self) -> String {
        let c = self.confusion;
        let m = self.metrics;
        let j = ReportJson {
            tp: c.tp,
            fn_: c.fn_,
            fp: c.fp,
            tn: c.tn,
            se: m.se,
            sp: m.sp,
            pr: m.pr,
            ac: m.ac,
            auc: self.auc,
        };
        serde_json::to_string_pretty(&j).expect("plain struct serialises")
    }
}
