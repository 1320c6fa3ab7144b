//! Design-time profiling: scenario clustering, platform choice under
//! constraints, and per-scenario best-combo labels.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, PlatformDiagnostic, Result};
use crate::kmeans::kmeans;
use crate::subspace::{check_dim, pca_basis, FeatureVector, SubspaceBasis};

pub const DEFAULT_SCENARIOS: usize = 15;
pub const DEFAULT_SUBSPACE_DIM: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub width: u32,
    pub height: u32,
}

/// One selectable algorithm configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoParamCombo {
    pub id: String,
    pub algorithm: String,
    pub fps: f64,
    pub resolution: Resolution,
}

/// A candidate computation platform: which combos it can run and how fast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSpec {
    pub id: String,
    /// combo id → achievable frames per second.
    pub combo_capabilities: BTreeMap<String, f64>,
    pub cost: f64,
}

/// Measured error of one combo on one scenario under one platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub scenario_id: String,
    pub combo_id: String,
    pub platform_id: String,
    /// Missed detections per window.
    pub error: f64,
    /// Opaque extra metrics (MT, ML, IDS, FP, ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub max_mean_error: f64,
    pub required_fps: f64,
    pub max_cost: f64,
}

/// A training scenario: its mean feature, PCA subspace and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioProfile {
    pub scenario_id: String,
    pub representative_feature: FeatureVector,
    pub subspace: SubspaceBasis,
    pub member_count: usize,
    /// platform id → best combo id.
    pub labels: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub feature_dim: usize,
    pub subspace_dim: usize,
    pub scenario_count: usize,
    pub window_length: usize,
    pub clustering_seed: u64,
    pub constraints: Constraints,
}

/// Everything the runtime selector needs, produced offline.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignProfile {
    pub config: ProfileConfig,
    pub combos: Vec<AlgoParamCombo>,
    pub platforms: Vec<PlatformSpec>,
    pub performance: Vec<PerformanceRecord>,
    pub scenarios: Vec<ScenarioProfile>,
    pub selected_platform: String,
}

impl DesignProfile {
    /// Selects the platform and labels every scenario.
    pub fn build(
        config: ProfileConfig,
        combos: Vec<AlgoParamCombo>,
        platforms: Vec<PlatformSpec>,
        performance: Vec<PerformanceRecord>,
        scenarios: Vec<ScenarioProfile>,
    ) -> Result<DesignProfile> {
        validate_catalog(&combos, &platforms)?;
        validate_constraints(&config.constraints)?;
        let selected_platform = select_platform(&platforms, &performance, &config.constraints)?;
        let profile = DesignProfile {
            config,
            combos,
            platforms,
            performance,
            scenarios,
            selected_platform,
        };
        label_scenarios(&profile)
    }

    pub fn scenario(&self, scenario_id: &str) -> Option<&ScenarioProfile> {
        self.scenarios.iter().find(|s| s.scenario_id == scenario_id)
    }

    pub fn platform(&self, platform_id: &str) -> Option<&PlatformSpec> {
        self.platforms.iter().find(|p| p.id == platform_id)
    }

    /// Checks the structural invariants of a loaded or built profile.
    pub fn validate(&self) -> Result<()> {
        validate_catalog(&self.combos, &self.platforms)?;
        validate_constraints(&self.config.constraints)?;
        index_performance(&self.performance)?;
        if self.platform(&self.selected_platform).is_none() {
            return Err(Error::UnknownId {
                kind: "platform",
                id: self.selected_platform.clone(),
            });
        }
        let mut seen = BTreeSet::new();
        for s in &self.scenarios {
            if !seen.insert(s.scenario_id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate scenario id {:?}",
                    s.scenario_id
                )));
            }
            check_dim(self.config.feature_dim, s.representative_feature.dim())?;
            check_dim(self.config.feature_dim, s.subspace.dim_ambient())?;
            check_dim(self.config.subspace_dim, s.subspace.dim_subspace())?;
            for (platform, combo) in &s.labels {
                if self.platform(platform).is_none() {
                    return Err(Error::UnknownId {
                        kind: "platform",
                        id: platform.clone(),
                    });
                }
                if !self.combos.iter().any(|c| &c.id == combo) {
                    return Err(Error::UnknownId {
                        kind: "combo",
                        id: combo.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Constraints must be finite so the profile stays representable as JSON.
fn validate_constraints(c: &Constraints) -> Result<()> {
    let values = [c.max_mean_error, c.required_fps, c.max_cost];
    if values.iter().any(|v| !v.is_finite()) || c.required_fps <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "constraints must be finite with positive fps, got {c:?}"
        )));
    }
    Ok(())
}

fn validate_catalog(combos: &[AlgoParamCombo], platforms: &[PlatformSpec]) -> Result<()> {
    let mut ids = BTreeSet::new();
    for c in combos {
        if !ids.insert(c.id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "duplicate combo id {:?}",
                c.id
            )));
        }
        if c.fps.is_nan() || c.fps <= 0.0 || c.resolution.width == 0 || c.resolution.height == 0 {
            return Err(Error::InvalidInput(format!(
                "combo {:?} needs positive fps and resolution",
                c.id
            )));
        }
    }
    let mut platform_ids = BTreeSet::new();
    for p in platforms {
        if !platform_ids.insert(p.id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "duplicate platform id {:?}",
                p.id
            )));
        }
        if p.cost.is_nan() || p.cost < 0.0 {
            return Err(Error::InvalidInput(format!(
                "platform {:?} has negative cost",
                p.id
            )));
        }
        for (combo, &fps) in &p.combo_capabilities {
            if !ids.contains(combo.as_str()) {
                return Err(Error::UnknownId {
                    kind: "combo",
                    id: combo.clone(),
                });
            }
            if fps.is_nan() || fps <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "platform {:?} reports non-positive fps for {combo:?}",
                    p.id
                )));
            }
        }
    }
    Ok(())
}

type PerfKey<'a> = (&'a str, &'a str, &'a str);

/// (scenario, combo, platform) → error; rejects duplicate triples.
fn index_performance(performance: &[PerformanceRecord]) -> Result<HashMap<PerfKey<'_>, f64>> {
    let mut index = HashMap::with_capacity(performance.len());
    for (row, r) in performance.iter().enumerate() {
        if r.error.is_nan() || r.error < 0.0 {
            return Err(Error::NegativeError {
                line: row as u64 + 1,
                value: r.error,
            });
        }
        let key = (
            r.scenario_id.as_str(),
            r.combo_id.as_str(),
            r.platform_id.as_str(),
        );
        if index.insert(key, r.error).is_some() {
            let first = performance
                .iter()
                .position(|o| {
                    (
                        o.scenario_id.as_str(),
                        o.combo_id.as_str(),
                        o.platform_id.as_str(),
                    ) == key
                })
                .unwrap_or(row);
            return Err(Error::DuplicateKey {
                scenario: r.scenario_id.clone(),
                combo: r.combo_id.clone(),
                platform: r.platform_id.clone(),
                first_line: first as u64 + 1,
                second_line: row as u64 + 1,
            });
        }
    }
    Ok(index)
}

/// Partition of `frames` into `m` clusters (k-means, k-means++ seeding).
pub fn cluster_frames(frames: &[FeatureVector], m: usize, seed: u64) -> Result<Vec<usize>> {
    kmeans(frames, m, seed)
}

/// Unlabeled scenarios from a partition: mean feature plus PCA subspace per
/// cluster. `ids[c]` names cluster `c`.
pub fn build_scenarios(
    frames: &[FeatureVector],
    assignment: &[usize],
    ids: &[String],
    b: usize,
) -> Result<Vec<ScenarioProfile>> {
    check_dim(frames.len(), assignment.len())?;
    let mut members: Vec<Vec<FeatureVector>> = vec![Vec::new(); ids.len()];
    for (f, &c) in frames.iter().zip(assignment) {
        members
            .get_mut(c)
            .ok_or_else(|| Error::InvalidInput(format!("cluster index {c} has no id")))?
            .push(f.clone());
    }
    members
        .iter()
        .enumerate()
        .map(|(cluster, group)| {
            if group.len() < b + 1 {
                return Err(Error::TooFewSamples {
                    cluster,
                    members: group.len(),
                    required: b + 1,
                });
            }
            Ok(ScenarioProfile {
                scenario_id: ids[cluster].clone(),
                representative_feature: FeatureVector::mean(group)?,
                subspace: pca_basis(group, b)?,
                member_count: group.len(),
                labels: BTreeMap::new(),
            })
        })
        .collect()
}

pub fn default_scenario_ids(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("s{i}")).collect()
}

/// Clusters training frames into `m` scenarios named `s0..s{m-1}`.
pub fn cluster_scenarios(
    frames: &[FeatureVector],
    m: usize,
    b: usize,
    seed: u64,
) -> Result<Vec<ScenarioProfile>> {
    if m < 1 || m > frames.len() {
        return Err(Error::InvalidM {
            m,
            frames: frames.len(),
        });
    }
    let assignment = cluster_frames(frames, m, seed)?;
    build_scenarios(frames, &assignment, &default_scenario_ids(m), b)
}

/// Clusters training frames and names the clusters after their majority
/// ground-truth label when labels are available.
pub fn scenarios_from_training(
    frames: &[FeatureVector],
    labels: Option<&[String]>,
    m: usize,
    b: usize,
    seed: u64,
) -> Result<Vec<ScenarioProfile>> {
    if m < 1 || m > frames.len() {
        return Err(Error::InvalidM {
            m,
            frames: frames.len(),
        });
    }
    let assignment = cluster_frames(frames, m, seed)?;
    let ids = match labels {
        Some(labels) => majority_names(&assignment, labels, m)?,
        None => default_scenario_ids(m),
    };
    build_scenarios(frames, &assignment, &ids, b)
}

/// Names each cluster after the majority ground-truth label of its members
/// (ties go to the lexicographically smallest label). Fails if two clusters
/// would share a name.
pub fn majority_names(assignment: &[usize], labels: &[String], m: usize) -> Result<Vec<String>> {
    check_dim(assignment.len(), labels.len())?;
    let mut votes: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); m];
    for (&c, l) in assignment.iter().zip(labels) {
        *votes[c].entry(l.as_str()).or_default() += 1;
    }
    let mut names = Vec::with_capacity(m);
    let mut used = BTreeSet::new();
    for (c, v) in votes.iter().enumerate() {
        let best = v
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(name, _)| name.to_string())
            .ok_or_else(|| Error::InvalidInput(format!("cluster {c} is empty")))?;
        if !used.insert(best.clone()) {
            return Err(Error::InvalidInput(format!(
                "clusters do not map one-to-one onto labels ({best:?} is the majority of two clusters)"
            )));
        }
        names.push(best);
    }
    Ok(names)
}

/// Combos in `combos` order whose achievable fps on `platform` reaches
/// `required_fps`.
pub fn feasible_combos(
    platform: &PlatformSpec,
    combos: &[AlgoParamCombo],
    required_fps: f64,
) -> Vec<String> {
    combos
        .iter()
        .filter(|c| {
            platform
                .combo_capabilities
                .get(&c.id)
                .is_some_and(|&fps| fps >= required_fps)
        })
        .map(|c| c.id.clone())
        .collect()
}

fn capability_feasible(platform: &PlatformSpec, required_fps: f64) -> Vec<&str> {
    platform
        .combo_capabilities
        .iter()
        .filter(|(_, &fps)| fps >= required_fps)
        .map(|(id, _)| id.as_str())
        .collect()
}

/// Mean over scenarios of the best feasible error, or `None` when nothing
/// is feasible.
fn best_mean_error(
    platform: &PlatformSpec,
    scenarios: &BTreeSet<&str>,
    index: &HashMap<PerfKey<'_>, f64>,
    required_fps: f64,
) -> Result<Option<f64>> {
    let feasible = capability_feasible(platform, required_fps);
    if feasible.is_empty() || scenarios.is_empty() {
        return Ok(None);
    }
    let mut total = 0.0;
    for &s in scenarios {
        let mut best = f64::INFINITY;
        for &c in &feasible {
            let e =
                index
                    .get(&(s, c, platform.id.as_str()))
                    .ok_or_else(|| Error::MissingRecord {
                        scenario: s.to_string(),
                        combo: c.to_string(),
                        platform: platform.id.clone(),
                    })?;
            best = best.min(*e);
        }
        total += best;
    }
    Ok(Some(total / scenarios.len() as f64))
}

/// Cheapest platform within `max_cost` whose best achievable mean error is
/// at most `max_mean_error`; ties on cost go to lower error, then to list
/// order.
pub fn select_platform(
    platforms: &[PlatformSpec],
    performance: &[PerformanceRecord],
    constraints: &Constraints,
) -> Result<String> {
    let index = index_performance(performance)?;
    let scenarios: BTreeSet<&str> = performance.iter().map(|r| r.scenario_id.as_str()).collect();

    let mut diagnostics = Vec::with_capacity(platforms.len());
    let mut best: Option<(f64, f64, usize)> = None;
    for (i, p) in platforms.iter().enumerate() {
        let within_cost = p.cost <= constraints.max_cost;
        let err = if within_cost {
            best_mean_error(p, &scenarios, &index, constraints.required_fps)?
        } else {
            None
        };
        if let Some(e) = err.filter(|&e| e <= constraints.max_mean_error) {
            let candidate = (p.cost, e, i);
            let better = match best {
                None => true,
                Some((c, be, _)) => p.cost < c || (p.cost == c && e < be),
            };
            if better {
                best = Some(candidate);
            }
        }
        diagnostics.push(PlatformDiagnostic {
            platform_id: p.id.clone(),
            cost: p.cost,
            within_cost,
            best_mean_error: err,
        });
    }
    match best {
        Some((_, _, i)) => Ok(platforms[i].id.clone()),
        None => Err(Error::NoFeasiblePlatform { diagnostics }),
    }
}

/// Fills `labels[platform]` for every scenario with the minimum-error
/// feasible combo. Ties prefer higher achievable fps on that platform, then
/// the smaller combo id. Platforms without any records are left unlabeled.
pub fn label_scenarios(profile: &DesignProfile) -> Result<DesignProfile> {
    let index = index_performance(&profile.performance)?;
    let required = profile.config.constraints.required_fps;
    let mut out = profile.clone();
    for scenario in &mut out.scenarios {
        scenario.labels.clear();
        for platform in &profile.platforms {
            let has_records = profile
                .performance
                .iter()
                .any(|r| r.platform_id == platform.id);
            if !has_records {
                continue;
            }
            let feasible = feasible_combos(platform, &profile.combos, required);
            let mut best: Option<(&str, f64, f64)> = None;
            for combo in &feasible {
                let key = (
                    scenario.scenario_id.as_str(),
                    combo.as_str(),
                    platform.id.as_str(),
                );
                let error = *index.get(&key).ok_or_else(|| Error::MissingRecord {
                    scenario: scenario.scenario_id.clone(),
                    combo: combo.clone(),
                    platform: platform.id.clone(),
                })?;
                let fps = platform.combo_capabilities[combo];
                let better = match best {
                    None => true,
                    Some((id, e, f)) => {
                        error < e || (error == e && (fps > f || (fps == f && combo.as_str() < id)))
                    }
                };
                if better {
                    best = Some((combo.as_str(), error, fps));
                }
            }
            if let Some((combo, _, _)) = best {
                scenario
                    .labels
                    .insert(platform.id.clone(), combo.to_string());
            }
        }
    }
    Ok(out)
}

/// Two platforms and four combos shaped like the HOG/ACF capability table:
/// platform 1 runs each combo at half the fps of platform 2.
pub fn two_platform_catalog(cost1: f64, cost2: f64) -> (Vec<AlgoParamCombo>, Vec<PlatformSpec>) {
    let res = |w, h| Resolution {
        width: w,
        height: h,
    };
    let combos = vec![
        combo("HOG-240x320", "HOG", 15.0, res(320, 240)),
        combo("HOG-480x640", "HOG", 8.0, res(640, 480)),
        combo("ACF-240x320", "ACF", 10.0, res(320, 240)),
        combo("ACF-480x640", "ACF", 5.0, res(640, 480)),
    ];
    let caps = |v: [f64; 4]| -> BTreeMap<String, f64> {
        combos
            .iter()
            .zip(v)
            .map(|(c, f)| (c.id.clone(), f))
            .collect()
    };
    let platforms = vec![
        PlatformSpec {
            id: "platform-1".into(),
            combo_capabilities: caps([15.0, 8.0, 10.0, 5.0]),
            cost: cost1,
        },
        PlatformSpec {
            id: "platform-2".into(),
            combo_capabilities: caps([30.0, 15.0, 20.0, 10.0]),
            cost: cost2,
        },
    ];
    (combos, platforms)
}

fn combo(id: &str, algorithm: &str, fps: f64, resolution: Resolution) -> AlgoParamCombo {
    AlgoParamCombo {
        id: id.into(),
        algorithm: algorithm.into(),
        fps,
        resolution,
    }
}
