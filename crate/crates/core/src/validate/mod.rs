//! Confidence intervals on question answers, computed from released values
//! only. Nothing here touches the dataset or the ledger.

mod image;
mod interval;
mod question;

pub use image::{
    image_ci, image_ci_with, image_enclosure, image_joint_level, image_sub_level, Expr,
    ImageSearch,
};
pub use interval::{interval_quotient, ConfidenceInterval, Interval};
pub use question::{
    avg_ci, bind_to_release, linear_ci, question_ci, question_ci_avg, question_ci_bound,
    question_ci_count_sum, question_ci_general, validate_question, AvgTerm, ValidityVerdict,
    Verdict,
};

use crate::dp::DpError;
use crate::error::Result;

pub(crate) fn check_level(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(DpError::InvalidConfidence(gamma).into())
    }
}
