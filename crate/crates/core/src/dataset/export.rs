use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::split::{DataSplit, Part};
use super::DatasetError;
use crate::jsonl;
use crate::spanlab::{Eligibility, LabeledExample};
use crate::text::char_slice;

pub const SQUAD_VERSION: &str = "v2.0";

#[derive(Clone, Copy, Debug, Default)]
pub struct ExportOptions {
    /// Keep examples the cleaner flagged as toxic or opinion.
    pub include_flagged: bool,
    /// Skip unreviewed needs-review examples instead of failing.
    pub allow_pending: bool,
}

/// Examples of `part`, in split order, minus flagged ones unless requested.
pub fn select_part<'a>(
    examples: &'a [LabeledExample],
    split: &DataSplit,
    part: Part,
    include_flagged: bool,
) -> Result<Vec<&'a LabeledExample>, DatasetError> {
    let by_id: HashMap<&str, &LabeledExample> = examples.iter().map(|e| (e.id(), e)).collect();
    let mut out = Vec::new();
    for id in split.part(part) {
        let ex = by_id
            .get(id.as_str())
            .ok_or_else(|| DatasetError::UnknownExample(id.clone()))?;
        if ex.post.noise_flag.is_some() && !include_flagged {
            continue;
        }
        out.push(*ex);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquadAnswer {
    pub answer_start: usize,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquadQa {
    pub answers: Vec<SquadAnswer>,
    pub id: String,
    pub is_impossible: bool,
    pub question: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquadParagraph {
    pub context: String,
    pub qas: Vec<SquadQa>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquadArticle {
    pub paragraphs: Vec<SquadParagraph>,
    pub title: String,
}

/// SQuAD-v2-style training file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquadFile {
    pub data: Vec<SquadArticle>,
    pub version: String,
}

/// One (context, question, answer-span) tuple as stored in a [`SquadFile`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractiveRecord {
    pub id: String,
    pub question: String,
    pub context: String,
    pub answer_text: String,
    pub answer_start: usize,
}

impl SquadFile {
    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Canonical bytes: sorted keys, one line, trailing LF.
    pub fn to_canonical_string(&self) -> String {
        let mut s = jsonl::to_canonical_string(self);
        s.push('\n');
        s
    }

    pub fn records(&self) -> Vec<ExtractiveRecord> {
        let mut out = Vec::new();
        for article in &self.data {
            for para in &article.paragraphs {
                for qa in &para.qas {
                    for ans in &qa.answers {
                        out.push(ExtractiveRecord {
                            id: qa.id.clone(),
                            question: qa.question.clone(),
                            context: para.context.clone(),
                            answer_text: ans.text.clone(),
                            answer_start: ans.answer_start,
                        });
                    }
                }
            }
        }
        out
    }

    /// Checks that every answer text equals its context slice.
    pub fn check_consistency(&self) -> Result<(), DatasetError> {
        for rec in self.records() {
            let end = rec.answer_start + rec.answer_text.chars().count();
            if char_slice(&rec.context, rec.answer_start, end) != Some(rec.answer_text.as_str()) {
                return Err(DatasetError::InvalidSpan(rec.id));
            }
        }
        Ok(())
    }
}

/// Builds the extractive training file for `part`.
///
/// Rejected examples are left out. Unreviewed needs-review examples are an
/// error unless `allow_pending` is set, in which case they are left out too.
pub fn export_extractive(
    examples: &[LabeledExample],
    split: &DataSplit,
    part: Part,
    options: ExportOptions,
) -> Result<SquadFile, DatasetError> {
    let mut data = Vec::new();
    for ex in select_part(examples, split, part, options.include_flagged)? {
        let span = match ex.eligibility() {
            Eligibility::Eligible(span) => span,
            Eligibility::Pending if options.allow_pending => continue,
            Eligibility::Pending => return Err(DatasetError::UnverifiedSpan(ex.id().to_string())),
            Eligibility::Rejected => continue,
        };
        let text = char_slice(&ex.post.context, span.start, span.end)
            .filter(|t| span.start < span.end && !t.is_empty())
            .ok_or_else(|| DatasetError::InvalidSpan(ex.id().to_string()))?;
        data.push(SquadArticle {
            title: ex.post.question.clone(),
            paragraphs: vec![SquadParagraph {
                context: ex.post.context.clone(),
                qas: vec![SquadQa {
                    answers: vec![SquadAnswer {
                        answer_start: span.start,
                        text: text.to_string(),
                    }],
                    id: ex.id().to_string(),
                    is_impossible: false,
                    question: ex.post.question.clone(),
                }],
            }],
        });
    }
    Ok(SquadFile {
        data,
        version: SQUAD_VERSION.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractiveRecord {
    pub id: String,
    pub question: String,
    pub context: String,
    pub answer: String,
}

/// Abstractive training lines for `part`; span status is irrelevant here.
pub fn export_abstractive(
    examples: &[LabeledExample],
    split: &DataSplit,
    part: Part,
    options: ExportOptions,
) -> Result<String, DatasetError> {
    let records: Vec<AbstractiveRecord> = select_part(examples, split, part, options.include_flagged)?
        .into_iter()
        .map(|ex| AbstractiveRecord {
            id: ex.id().to_string(),
            question: ex.post.question.clone(),
            context: ex.post.context.clone(),
            answer: ex.post.answer.clone(),
        })
        .collect();
    Ok(jsonl::to_jsonl(&records))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub prediction: String,
}

/// `{id, prediction: ""}` lines for an external model runner to fill in.
pub fn predictions_template(
    examples: &[LabeledExample],
    split: &DataSplit,
    part: Part,
    options: ExportOptions,
) -> Result<String, DatasetError> {
    let records: Vec<PredictionRecord> = select_part(examples, split, part, options.include_flagged)?
        .into_iter()
        .map(|ex| PredictionRecord {
            id: ex.id().to_string(),
            prediction: String::new(),
        })
        .collect();
    Ok(jsonl::to_jsonl(&records))
}
