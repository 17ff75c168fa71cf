//! Kähler obstruction from non-unitary eigencharacters.
//!
//! The criterion can only rule Kähler metrics out; it never affirms one.

use serde::{Deserialize, Serialize};

use crate::manifold::SolvManifoldSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KaehlerStatus {
    Obstructed,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KaehlerVerdict {
    pub status: KaehlerStatus,
    /// 1-based indices of the non-unitary characters.
    pub witnesses: Vec<usize>,
    pub completely_solvable: bool,
}

impl KaehlerVerdict {
    pub fn is_obstructed(&self) -> bool {
        self.status == KaehlerStatus::Obstructed
    }
}

pub fn kaehler_obstruction(spec: &SolvManifoldSpec) -> KaehlerVerdict {
    let witnesses: Vec<usize> =
        spec.alphas.iter().enumerate().filter(|(_, alpha)| !alpha.holomorphic_part().is_trivial()).map(|(i, _)| i + 1).collect();
    KaehlerVerdict {
        status: if witnesses.is_empty() { KaehlerStatus::Inconclusive } else { KaehlerStatus::Obstructed },
        witnesses,
        completely_solvable: spec.alphas.iter().all(|a| a.is_real_valued()),
    }
}
