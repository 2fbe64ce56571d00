//! Title tagging, train/validation/test splitting and training-file export.

mod export;
mod split;
mod tags;

pub use export::{
    export_abstractive, export_extractive, predictions_template, select_part, AbstractiveRecord,
    ExportOptions, ExtractiveRecord, PredictionRecord, SquadAnswer, SquadArticle, SquadFile,
    SquadParagraph, SquadQa, SQUAD_VERSION,
};
pub use split::{part_sizes, split_corpus, DataSplit, Part, SplitOutcome, MIN_STRATUM};
pub use tags::{tag_title, TitleTag, TitleTagKind};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("post {0:?} has an empty title")]
    EmptyTitle(String),
    #[error("cannot split an empty example list")]
    EmptySplitInput,
    #[error("unknown split part {0:?} (expected train, validation or test)")]
    UnknownPart(String),
    #[error("split references unknown example {0:?}")]
    UnknownExample(String),
    #[error("example {0:?} has an unreviewed span; review it or pass allow-pending")]
    UnverifiedSpan(String),
    #[error("example {0:?} has a span that does not fit its context")]
    InvalidSpan(String),
    #[error("malformed export file: {0}")]
    Parse(#[from] serde_json::Error),
}
