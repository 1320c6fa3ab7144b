//! Runtime selection: cut the feature stream into windows, match each window
//! to its closest training scenario and look up that scenario's label.

use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::profile_hash;
use crate::error::{Error, Result};
use crate::gfk::{factored_distance, similarity};
use crate::profile::DesignProfile;
use crate::subspace::{check_dim, pca_basis, FeatureVector, SubspaceBasis};

pub const DEFAULT_WINDOW_LENGTH: usize = 30;
/// Window length used for streams of non-consecutive frames.
pub const NON_CONSECUTIVE_WINDOW_LENGTH: usize = 10;

/// A block of consecutive frames that receives one decision.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeWindow {
    pub window_id: usize,
    pub frame_features: Vec<FeatureVector>,
    pub aggregated_feature: FeatureVector,
    pub subspace: SubspaceBasis,
    /// Set when PCA could not reach the requested dimension; holds the
    /// dimension actually used.
    pub reduced_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDecision {
    pub window_id: usize,
    pub matched_scenario_id: String,
    pub similarity: f64,
    pub all_similarities: Vec<f64>,
    pub chosen_combo_id: String,
    pub platform_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrace {
    pub decisions: Vec<SelectionDecision>,
    /// Content hash of the profile the trace was produced with.
    pub profile_reference: String,
    /// Wall-clock milliseconds per window.
    pub elapsed_ms: Vec<f64>,
}

impl SelectionTrace {
    pub fn switch_count(&self) -> usize {
        self.decisions
            .windows(2)
            .filter(|w| w[0].chosen_combo_id != w[1].chosen_combo_id)
            .count()
    }

    pub fn mean_similarity(&self) -> f64 {
        if self.decisions.is_empty() {
            return 0.0;
        }
        self.decisions.iter().map(|d| d.similarity).sum::<f64>() / self.decisions.len() as f64
    }
}

/// Best-matching scenario for a window.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMatch {
    pub scenario_index: usize,
    pub scenario_id: String,
    pub distances: Vec<f64>,
    pub similarities: Vec<f64>,
}

/// Frame ranges of consecutive windows of `length` frames. A trailing
/// remainder of at least half a window becomes its own window; a shorter one
/// is merged into the previous window.
pub fn window_bounds(frames: usize, length: usize) -> Result<Vec<Range<usize>>> {
    if length < 2 {
        return Err(Error::InvalidInput(format!(
            "window length must be at least 2, got {length}"
        )));
    }
    if frames == 0 {
        return Err(Error::EmptyStream);
    }
    let full = frames / length;
    let rem = frames % length;
    let mut bounds: Vec<Range<usize>> = (0..full).map(|i| i * length..(i + 1) * length).collect();
    if rem > 0 {
        if 2 * rem >= length || bounds.is_empty() {
            bounds.push(full * length..frames);
        } else if let Some(last) = bounds.last_mut() {
            last.end = frames;
        }
    }
    Ok(bounds)
}

pub fn segment_windows(stream: &[FeatureVector], length: usize) -> Result<Vec<Vec<FeatureVector>>> {
    Ok(window_bounds(stream.len(), length)?
        .into_iter()
        .map(|r| stream[r].to_vec())
        .collect())
}

/// Mean feature and PCA subspace of one window. Zero-variance windows fall
/// back to the largest achievable dimension, or to the direction of the mean
/// when the frames are all identical.
pub fn build_window(
    window_id: usize,
    features: Vec<FeatureVector>,
    b: usize,
) -> Result<TimeWindow> {
    if features.len() < b + 1 {
        return Err(Error::TooFewFrames {
            frames: features.len(),
            required: b + 1,
        });
    }
    let aggregated_feature = FeatureVector::mean(&features)?;
    let (subspace, reduced_dim) = match pca_basis(&features, b) {
        Ok(s) => (s, None),
        Err(Error::RankDeficient { achievable, .. }) if achievable >= 1 => {
            (pca_basis(&features, achievable)?, Some(achievable))
        }
        Err(Error::RankDeficient { .. }) => {
            let mean = aggregated_feature.as_dvector();
            let norm = mean.norm();
            if norm == 0.0 {
                return Err(Error::DegenerateWindow);
            }
            let mut direction =
                nalgebra::DMatrix::from_column_slice(mean.len(), 1, (mean / norm).as_slice());
            crate::subspace::canonicalize_signs(&mut direction);
            (SubspaceBasis::from_basis(direction)?, Some(1))
        }
        Err(e) => return Err(e),
    };
    Ok(TimeWindow {
        window_id,
        frame_features: features,
        aggregated_feature,
        subspace,
        reduced_dim,
    })
}

/// Kernel distance between a scenario and a window, comparing subspaces at
/// the smaller of their two dimensions.
pub fn scenario_distance(
    representative: &FeatureVector,
    scenario_subspace: &SubspaceBasis,
    window: &TimeWindow,
) -> Result<f64> {
    let dim = scenario_subspace
        .dim_subspace()
        .min(window.subspace.dim_subspace());
    let x = scenario_subspace.truncated(dim)?;
    let z = window.subspace.truncated(dim)?;
    factored_distance(&x, &z, representative, &window.aggregated_feature)
}

/// Scenario with the highest similarity to the window. The argmax is taken
/// over distances (equivalent, and immune to `e^(−d)` underflow); ties go to
/// the lexicographically smallest scenario id.
pub fn match_scenario(window: &TimeWindow, profile: &DesignProfile) -> Result<ScenarioMatch> {
    if profile.scenarios.is_empty() {
        return Err(Error::EmptyProfile);
    }
    check_dim(profile.config.feature_dim, window.aggregated_feature.dim())?;
    let distances = profile
        .scenarios
        .par_iter()
        .map(|s| scenario_distance(&s.representative_feature, &s.subspace, window))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, &d) in distances.iter().enumerate() {
        let id = &profile.scenarios[i].scenario_id;
        if d < distances[best]
            || (d == distances[best] && id < &profile.scenarios[best].scenario_id)
        {
            best = i;
        }
    }
    Ok(ScenarioMatch {
        scenario_index: best,
        scenario_id: profile.scenarios[best].scenario_id.clone(),
        similarities: distances.iter().map(|&d| similarity(d)).collect(),
        distances,
    })
}

/// The combo labeled for `scenario_id` under `platform_id`.
pub fn select_combo(
    scenario_id: &str,
    platform_id: &str,
    profile: &DesignProfile,
) -> Result<String> {
    let scenario = profile
        .scenario(scenario_id)
        .ok_or_else(|| Error::UnknownId {
            kind: "scenario",
            id: scenario_id.to_string(),
        })?;
    scenario
        .labels
        .get(platform_id)
        .cloned()
        .ok_or_else(|| Error::UnlabeledScenario {
            scenario: scenario_id.to_string(),
            platform: platform_id.to_string(),
        })
}

/// Segments the stream and decides every window in order.
pub fn run_selection(
    stream: &[FeatureVector],
    profile: &DesignProfile,
    platform_id: &str,
    window_length: usize,
) -> Result<SelectionTrace> {
    if profile.scenarios.is_empty() {
        return Err(Error::EmptyProfile);
    }
    if profile.platform(platform_id).is_none() {
        return Err(Error::UnknownId {
            kind: "platform",
            id: platform_id.to_string(),
        });
    }
    let b = profile.config.subspace_dim;
    let bounds = window_bounds(stream.len(), window_length)?;
    let mut decisions = Vec::with_capacity(bounds.len());
    let mut elapsed_ms = Vec::with_capacity(bounds.len());
    for (window_id, range) in bounds.into_iter().enumerate() {
        let start = Instant::now();
        let decision = decide(window_id, stream[range].to_vec(), b, profile, platform_id)
            .map_err(|e| e.in_window(window_id))?;
        elapsed_ms.push(start.elapsed().as_secs_f64() * 1e3);
        decisions.push(decision);
    }
    Ok(SelectionTrace {
        decisions,
        profile_reference: profile_hash(profile)?,
        elapsed_ms,
    })
}

fn decide(
    window_id: usize,
    frames: Vec<FeatureVector>,
    b: usize,
    profile: &DesignProfile,
    platform_id: &str,
) -> Result<SelectionDecision> {
    let window = build_window(window_id, frames, b)?;
    let matched = match_scenario(&window, profile)?;
    let chosen_combo_id = select_combo(&matched.scenario_id, platform_id, profile)?;
    Ok(SelectionDecision {
        window_id,
        similarity: matched.similarities[matched.scenario_index],
        matched_scenario_id: matched.scenario_id,
        all_similarities: matched.similarities,
        chosen_combo_id,
        platform_id: platform_id.to_string(),
    })
}
