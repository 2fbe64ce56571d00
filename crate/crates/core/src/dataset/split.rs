use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::corpus::Source;
use crate::spanlab::LabeledExample;

/// Strata smaller than this are merged into a shared pool before splitting.
pub const MIN_STRATUM: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Train,
    Validation,
    Test,
}

impl FromStr for Part {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Part::Train),
            "validation" | "val" | "dev" => Ok(Part::Validation),
            "test" => Ok(Part::Test),
            other => Err(DatasetError::UnknownPart(other.to_string())),
        }
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Part::Train => "train",
            Part::Validation => "validation",
            Part::Test => "test",
        })
    }
}

/// Train/validation/test partition of example ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub seed: u64,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl DataSplit {
    pub fn part(&self, part: Part) -> &[String] {
        match part {
            Part::Train => &self.train,
            Part::Validation => &self.validation,
            Part::Test => &self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_json(&self) -> String {
        let mut s = crate::jsonl::to_canonical_string(self);
        s.push('\n');
        s
    }
}

/// Sizes `(train, validation, test)` for a stratum of `n` examples.
///
/// Cut points sit at `floor(n/10)` and `floor(2n/10)`: the first tenth is
/// test, the second validation, the rest (including every remainder) train.
pub fn part_sizes(n: usize) -> (usize, usize, usize) {
    let test = n / 10;
    let validation = (2 * n) / 10 - test;
    (n - test - validation, validation, test)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitOutcome {
    pub split: DataSplit,
    /// Human-readable notes about collapsed strata.
    pub warnings: Vec<String>,
}

/// Seeded, source-stratified 8/1/1 split. Ids are sorted before shuffling so
/// the result does not depend on input order.
pub fn split_corpus(examples: &[LabeledExample], seed: u64) -> Result<SplitOutcome, DatasetError> {
    if examples.is_empty() {
        return Err(DatasetError::EmptySplitInput);
    }
    let mut strata: BTreeMap<Source, Vec<String>> = BTreeMap::new();
    for ex in examples {
        strata.entry(ex.post.source).or_default().push(ex.id().to_string());
    }
    let mut warnings = Vec::new();
    let mut groups: Vec<Vec<String>> = Vec::new();
    let mut pool: Vec<String> = Vec::new();
    for (source, ids) in strata {
        if ids.len() < MIN_STRATUM {
            warnings.push(format!(
                "source {source} has {} examples (< {MIN_STRATUM}); merged into the global pool",
                ids.len()
            ));
            pool.extend(ids);
        } else {
            groups.push(ids);
        }
    }
    if !pool.is_empty() {
        groups.push(pool);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = DataSplit {
        seed,
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for mut ids in groups {
        ids.sort();
        ids.shuffle(&mut rng);
        let (_, n_val, n_test) = part_sizes(ids.len());
        let mut rest = ids.split_off(n_test);
        let train = rest.split_off(n_val);
        split.test.extend(ids);
        split.validation.extend(rest);
        split.train.extend(train);
    }
    Ok(SplitOutcome { split, warnings })
}
