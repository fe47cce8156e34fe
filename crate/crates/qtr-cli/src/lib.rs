//! Library side of the command-line driver; the binary in `main.rs` only
//! parses arguments and dispatches here.

pub mod bench;
pub mod commands;
pub mod config;
pub mod grid;

use qtr_core::train::EvalMetrics;

/// One structured-text evaluation record: presentation fields at four
/// decimal places (ROC AUC and AvgPrec on the x100 scale) plus the raw
/// full-precision values.
pub fn eval_record(model_id: &str, m: &EvalMetrics) -> String {
    format!(
        "model={}\troc_auc={:.4}\tavg_prec={:.4}\tce={:.4}\troc_auc_raw={}\tavg_prec_raw={}\tce_raw={}",
        model_id,
        m.roc_auc * 100.0,
        m.avg_prec * 100.0,
        m.ce,
        m.roc_auc,
        m.avg_prec,
        m.ce
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_record_presents_four_decimals_and_raw_fields() {
        let m = EvalMetrics {
            roc_auc: 0.870512345,
            avg_prec: 0.956,
            ce: 0.33621234,
        };
        let rec = eval_record("teacher", &m);
        assert!(rec.contains("roc_auc=87.0512\t"));
        assert!(rec.contains("avg_prec=95.6000\t"));
        assert!(rec.contains("ce=0.3362\t"));
        assert!(rec.contains("roc_auc_raw=0.870512345"));
    }
}
