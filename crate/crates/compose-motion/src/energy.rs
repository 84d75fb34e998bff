//! Motion-energy model: per-part mean squared frame-to-frame joint
//! displacement, expanded to per-joint attention values.
//!
//! For a body part with joint set Omega:
//!   E = (1 / (|Omega| * (T-1))) * sum_{n in Omega} sum_{t=2..T} ||y_{n,t} - y_{n,t-1}||^2
//! Every joint in a part carries the part's energy. Units are m^2 per
//! frame-step; no fps normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{BodyPartition, MotionSequence, NUM_JOINTS};

/// Per-part motion energies plus the per-joint expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartEnergy {
    /// Part names, aligned with `per_part`.
    pub part_names: Vec<String>,
    /// Energy per part, order matching the partition.
    pub per_part: Vec<f64>,
    /// Each joint carries the energy of the part containing it.
    pub per_joint: [f64; NUM_JOINTS],
}

impl PartEnergy {
    pub fn energy_of(&self, part_name: &str) -> Option<f64> {
        self.part_names.iter().position(|n| n == part_name).map(|i| self.per_part[i])
    }

    /// Index of the part with maximal energy (first wins on ties).
    pub fn argmax_part(&self) -> usize {
        self.per_part
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Compute per-part motion energy of a sequence under a partition.
pub fn compute_part_energy(seq: &MotionSequence, partition: &BodyPartition) -> Result<PartEnergy> {
    if seq.len() < 2 {
        return Err(Error::invalid_argument(format!(
            "energy needs at least 2 frames, got {}",
            seq.len()
        )));
    }
    let owner = partition.joint_to_part()?;
    let t = seq.len();
    let mut per_part = vec![0.0; partition.num_parts()];
    for (name_idx, (_, joints)) in partition.parts.iter().enumerate() {
        let mut acc = 0.0;
        for &n in joints {
            for k in 1..t {
                let a = &seq.frames[k].joints[n];
                let b = &seq.frames[k - 1].joints[n];
                let dx = a[0] - b[0];
                let dy = a[1] - b[1];
                let dz = a[2] - b[2];
                acc += dx * dx + dy * dy + dz * dz;
            }
        }
        per_part[name_idx] = acc / (joints.len() as f64 * (t - 1) as f64);
    }
    let mut per_joint = [0.0; NUM_JOINTS];
    for n in 0..NUM_JOINTS {
        per_joint[n] = per_part[owner[n]];
    }
    Ok(PartEnergy {
        part_names: partition.parts.iter().map(|(n, _)| n.clone()).collect(),
        per_part,
        per_joint,
    })
}

/// Attention values are the energy values: the per-joint expansion, verbatim.
/// Kept as a named seam so alternative attention laws can be swapped in.
pub fn attention_from_energy(e: &PartEnergy) -> [f64; NUM_JOINTS] {
    e.per_joint
}
