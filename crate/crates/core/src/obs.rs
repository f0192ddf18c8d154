//! Subgoal-induced observation reduction: the raw observation and the subgoal
//! are fused into reach / avoid / neutral channels whose size does not depend
//! on the number of propositions.

use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::subgoal::{encode, Subgoal};

pub const V_REACH: f64 = 1.0;
pub const V_AVOID: f64 = -1.0;
pub const V_NEUTRAL: f64 = 0.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    GridValues,
    LidarMin,
    RawBitvector,
}

impl FusionMode {
    /// The reduced mode matching an observation's kind.
    pub fn reduced_for(obs: &Observation) -> Self {
        match obs {
            Observation::Grid { .. } => FusionMode::GridValues,
            Observation::Lidar { .. } => FusionMode::LidarMin,
        }
    }
}

/// Cell value `+1` for the reach label, `−1` for avoided labels, `0` otherwise.
pub fn reduce_grid(obs: &Observation, s: &Subgoal) -> Vec<f64> {
    let Observation::Grid { cells, .. } = obs else {
        panic!("grid reduction needs a grid observation");
    };
    cells
        .iter()
        .map(|&c| {
            if c == s.alpha_plus {
                V_REACH
            } else if s.avoid.contains(&c) {
                V_AVOID
            } else {
                V_NEUTRAL
            }
        })
        .collect()
}

/// Per-beam minimum closeness over a set of propositions (the farthest of
/// them); zeros for an empty set.
fn conjunct_channel(lidar: &[Vec<f64>], props: impl Iterator<Item = usize>, k: usize) -> Vec<f64> {
    let mut out: Option<Vec<f64>> = None;
    for p in props {
        out = Some(match out {
            None => lidar[p].clone(),
            Some(acc) => acc.iter().zip(&lidar[p]).map(|(a, b)| a.min(*b)).collect(),
        });
    }
    out.unwrap_or_else(|| vec![0.0; k])
}

/// `ego ++ reach[k] ++ avoid[k]`; the avoid channel is the per-beam nearest
/// (maximum closeness) over all avoided assignments.
pub fn reduce_lidar(obs: &Observation, s: &Subgoal) -> Vec<f64> {
    let Observation::Lidar { ego, lidar } = obs else {
        panic!("lidar reduction needs a lidar observation");
    };
    let k = lidar.first().map_or(0, Vec::len);
    let reach = conjunct_channel(lidar, s.alpha_plus.iter(), k);
    let mut avoid = vec![0.0f64; k];
    for a in &s.avoid {
        let ch = conjunct_channel(lidar, a.iter(), k);
        for (v, c) in avoid.iter_mut().zip(ch) {
            *v = v.max(c);
        }
    }
    let mut out = Vec::with_capacity(ego.len() + 2 * k);
    out.extend_from_slice(ego);
    out.extend(reach);
    out.extend(avoid);
    out
}

/// Flattened observation (one-hot cells or all lidar arrays) followed by the
/// subgoal bitvector.
pub fn reduce_raw(obs: &Observation, s: &Subgoal, n_props: usize) -> Vec<f64> {
    let mut out = Vec::new();
    match obs {
        Observation::Grid { cells, .. } => {
            for c in cells {
                out.extend((0..n_props).map(|p| if c.contains(p) { 1.0 } else { 0.0 }));
            }
        }
        Observation::Lidar { ego, lidar } => {
            out.extend_from_slice(ego);
            for l in lidar {
                out.extend_from_slice(l);
            }
        }
    }
    out.extend(encode(s, n_props).into_iter().map(|b| if b { 1.0 } else { 0.0 }));
    out
}

pub fn reduce(obs: &Observation, s: &Subgoal, mode: FusionMode, n_props: usize) -> Vec<f64> {
    match mode {
        FusionMode::GridValues => reduce_grid(obs, s),
        FusionMode::LidarMin => reduce_lidar(obs, s),
        FusionMode::RawBitvector => reduce_raw(obs, s, n_props),
    }
}
