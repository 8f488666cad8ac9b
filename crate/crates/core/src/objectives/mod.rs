//! Pretraining example builders: time-aware masking (TAMLM), plain masking
//! (MLM), timestamp prediction (DTP), and temporal replacement (TIR).

mod dataset;
mod labels;
mod masking;
mod tir;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::temporal::{TemporalError, TimePoint};

pub use dataset::{BuildStats, DatasetBuilder, DatasetRecord, ObjectiveParams};
pub use labels::{dtp_label, LabelSpace};
pub use masking::{
    apply_plan, build_tamlm_dtp, plan_mlm, plan_tamlm, MaskAction, MaskPlan, PretrainExample,
};
pub use tir::{build_tir, collect_expression_pool, ExpressionPool, PoolEntry, TirExample, TirSlot};

/// Label value at positions that carry no MLM target. Part of the dataset
/// file contract.
pub const IGNORE: i64 = -100;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("empty label range {start}..{end}")]
    EmptyRange { start: TimePoint, end: TimePoint },
    #[error("{time} lies outside the label space {start}..{end}")]
    OutOfLabelSpace {
        time: TimePoint,
        start: TimePoint,
        end: TimePoint,
    },
    #[error("inconsistent objective set {0}: {1}")]
    InconsistentObjectives(ObjectiveSet, &'static str),
    #[error("parameter {name} = {value} out of range")]
    BadParameter { name: &'static str, value: f64 },
    #[error(transparent)]
    Temporal(#[from] TemporalError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Objective {
    Mlm,
    Tamlm,
    Dtp,
    Tir,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Mlm => "MLM",
            Objective::Tamlm => "TAMLM",
            Objective::Dtp => "DTP",
            Objective::Tir => "TIR",
        }
    }
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mlm" => Ok(Objective::Mlm),
            "tamlm" => Ok(Objective::Tamlm),
            "dtp" => Ok(Objective::Dtp),
            "tir" => Ok(Objective::Tir),
            other => Err(format!("unknown objective {other:?}")),
        }
    }
}

/// Non-empty set of pretraining objectives, written `TAMLM+DTP`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObjectiveSet(BTreeSet<Objective>);

impl ObjectiveSet {
    pub fn new(objectives: impl IntoIterator<Item = Objective>) -> Result<Self, String> {
        let set: BTreeSet<_> = objectives.into_iter().collect();
        if set.is_empty() {
            return Err("objective set must not be empty".into());
        }
        Ok(ObjectiveSet(set))
    }

    pub fn contains(&self, o: Objective) -> bool {
        self.0.contains(&o)
    }

    pub fn iter(&self) -> impl Iterator<Item = Objective> + '_ {
        self.0.iter().copied()
    }

    /// The six pretraining configurations compared in the ablation.
    pub fn ablation_matrix() -> Vec<ObjectiveSet> {
        use Objective::*;
        [
            vec![Mlm],
            vec![Tamlm],
            vec![Dtp],
            vec![Mlm, Dtp],
            vec![Tamlm, Dtp],
            vec![Mlm, Tir],
        ]
        .into_iter()
        .map(|v| ObjectiveSet::new(v).expect("non-empty"))
        .collect()
    }

    /// Rejects combinations the builders cannot express: both masking
    /// schemes at once, or TIR with anything but MLM.
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if self.contains(Objective::Mlm) && self.contains(Objective::Tamlm) {
            return Err(ObjectiveError::InconsistentObjectives(
                self.clone(),
                "MLM and TAMLM are exclusive",
            ));
        }
        if self.contains(Objective::Tir)
            && self
                .iter()
                .any(|o| !matches!(o, Objective::Tir | Objective::Mlm))
        {
            return Err(ObjectiveError::InconsistentObjectives(
                self.clone(),
                "TIR combines only with MLM",
            ));
        }
        Ok(())
    }

    pub fn masks(&self) -> bool {
        self.contains(Objective::Mlm) || self.contains(Objective::Tamlm)
    }
}

impl fmt::Display for ObjectiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.0.iter().map(|o| o.name()).collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for ObjectiveSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts = s.split(['+', ',']).filter(|p| !p.trim().is_empty());
        ObjectiveSet::new(
            parts
                .map(str::parse)
                .collect::<Result<Vec<Objective>, _>>()?,
        )
    }
}

/// `⌈ratio·n⌉`, treating products within 1e-9 of an integer as exact so
/// that e.g. 0.15·100 yields 15.
pub fn ceil_count(ratio: f64, n: usize) -> usize {
    let x = ratio * n as f64;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r.max(0.0) as usize
    } else {
        x.ceil().max(0.0) as usize
    }
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-document seed: FNV-1a of the id folded with the global seed and the
/// epoch through SplitMix64. Stable across platforms and releases.
pub fn mix_seed(global_seed: u64, doc_id: &str, epoch: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in doc_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(splitmix64(global_seed ^ h).wrapping_add(epoch))
}
