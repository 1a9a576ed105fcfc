//! Leave-one-subject-out domain splits.

use super::FeatureTable;
use crate::error::{Error, Result};

/// Labeled source domain plus a target domain whose labels are sealed.
///
/// Training code only ever sees [`DomainSplit::target`], which carries no
/// labels; [`DomainSplit::target_labels_for_evaluation`] is the single way
/// back to the ground truth.
#[derive(Debug, Clone)]
pub struct DomainSplit {
    pub target_subject: u32,
    source: FeatureTable,
    target: FeatureTable,
    target_labels: Vec<usize>,
}

impl DomainSplit {
    pub fn new(
        source: FeatureTable,
        target_labeled: &FeatureTable,
        target_subject: u32,
    ) -> Result<Self> {
        if source.dim() != target_labeled.dim() {
            return Err(Error::shape(
                format!("target dim {}", source.dim()),
                target_labeled.dim(),
            ));
        }
        if source.num_classes() != target_labeled.num_classes() {
            return Err(Error::InvalidInput(format!(
                "source has {} classes, target {}",
                source.num_classes(),
                target_labeled.num_classes()
            )));
        }
        if !source.is_fully_labeled() {
            return Err(Error::InvalidInput(
                "source domain must be fully labeled".into(),
            ));
        }
        let target_subjects = target_labeled.subjects();
        if let Some(s) = source
            .subjects()
            .iter()
            .find(|s| target_subjects.contains(s))
        {
            return Err(Error::InvalidInput(format!(
                "subject {s} appears in both source and target"
            )));
        }
        let target_labels = target_labeled.labels()?;
        Ok(Self {
            target_subject,
            target: target_labeled.without_labels(),
            source,
            target_labels,
        })
    }

    pub fn source(&self) -> &FeatureTable {
        &self.source
    }

    /// Target records with labels stripped.
    pub fn target(&self) -> &FeatureTable {
        &self.target
    }

    /// Ground-truth target labels. Evaluation only.
    pub fn target_labels_for_evaluation(&self) -> &[usize] {
        &self.target_labels
    }
}

/// The split holding out `subject` as target.
pub fn split_for_subject(table: &FeatureTable, subject: u32) -> Result<DomainSplit> {
    if !table.is_fully_labeled() {
        return Err(Error::InvalidInput(
            "leave-one-subject-out needs every record labeled".into(),
        ));
    }
    let subjects = table.subjects();
    if subjects.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 subjects, table has {}",
            subjects.len()
        )));
    }
    if !subjects.contains(&subject) {
        return Err(Error::InvalidInput(format!(
            "subject {subject} not present (subjects: {subjects:?})"
        )));
    }
    let (target, source): (Vec<_>, Vec<_>) = table
        .records()
        .iter()
        .cloned()
        .partition(|r| r.subject_id == subject);
    let source = FeatureTable::new(source, table.dim(), table.num_classes())?;
    let target = FeatureTable::new(target, table.dim(), table.num_classes())?;
    DomainSplit::new(source, &target, subject)
}

/// One split per subject, in ascending subject order.
pub fn loso_splits(table: &FeatureTable) -> Result<Vec<DomainSplit>> {
    if table.subjects().len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 subjects, table has {}",
            table.subjects().len()
        )));
    }
    table
        .subjects()
        .into_iter()
        .map(|s| split_for_subject(table, s))
        .collect()
}
