//! Complete-case selection.

use crate::corpus::SdohVariable;
use crate::derivation::StudyRow;

/// Rows with the studied SDoH and every adjustment covariate present.
pub fn complete_cases(rows: &[StudyRow], sdoh: SdohVariable) -> Vec<StudyRow> {
    let kept: Vec<StudyRow> = rows
        .iter()
        .filter(|r| {
            !r.profile.get(sdoh).is_missing()
                && r.age.is_some()
                && r.gender.is_some()
                && r.ethnicity.is_some()
                && r.religion.is_some()
        })
        .cloned()
        .collect();
    if kept.is_empty() {
        log::warn!("complete-case analysis of {sdoh} has no rows");
    }
    kept
}
