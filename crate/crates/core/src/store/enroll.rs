use super::{
    validate_pin, validate_subject_id, IrisTemplate, PinHash, Store, StoreError, SubjectRecord, DEFAULT_RETENTION_MS,
};
use crate::imaging::RgbImage;
use crate::pipeline::{analyze, encode, PipelineConfig};
use crate::time::Timestamp;
use crate::transform::SelectorModel;

pub const MIN_ENROLL_IMAGES: usize = 3;

#[derive(Debug, Clone)]
pub struct EnrollRequest<'a> {
    pub subject_id: &'a str,
    pub display_name: &'a str,
    pub pin: &'a str,
    pub images: &'a [RgbImage],
}

/// Runs every capture through the pipeline and stores one template per
/// image that survives it. Fails unless at least three do. Every capture
/// is also kept in the raw area for the default retention period.
pub fn enroll(
    store: &mut Store,
    req: &EnrollRequest<'_>,
    cfg: &PipelineConfig,
    selector: &SelectorModel,
    now: Timestamp,
) -> Result<SubjectRecord, StoreError> {
    validate_subject_id(req.subject_id)?;
    validate_pin(req.pin)?;
    if store.contains(req.subject_id) {
        return Err(StoreError::DuplicateSubject(req.subject_id.to_string()));
    }
    let selector_version = selector.version_token();
    let mut templates = Vec::new();
    for (i, img) in req.images.iter().enumerate() {
        let Ok(analysis) = analyze(img, cfg) else {
            continue;
        };
        let eye = encode(&analysis, selector).map_err(|e| StoreError::Invalid(e.to_string()))?;
        templates.push(IrisTemplate {
            code: eye.code,
            geom: eye.geom,
            selector_version: selector_version.clone(),
            // distinct, ordered creation stamps within one enrollment
            created_at: now.plus_millis(i as i64),
        });
    }
    if templates.len() < MIN_ENROLL_IMAGES {
        return Err(StoreError::InsufficientEnrollment {
            passed: templates.len(),
            required: MIN_ENROLL_IMAGES,
        });
    }
    let record = SubjectRecord {
        subject_id: req.subject_id.to_string(),
        display_name: req.display_name.to_string(),
        pin_hash: PinHash::new(req.pin)?,
        templates,
        enrolled_at: now,
    };
    store.insert_subject(record.clone())?;
    for img in req.images {
        store.put_raw_image(img, Some(req.subject_id), now, DEFAULT_RETENTION_MS)?;
    }
    Ok(record)
}
