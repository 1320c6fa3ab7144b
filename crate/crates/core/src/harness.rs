//! Synthetic scenario streams and regret evaluation of selection traces.
//!
//! Each synthetic scenario is a random `b`-dimensional subspace of ℝᵃ with an
//! offset inside it; frames are subspace samples plus isotropic noise. Test
//! windows follow a seeded Markov chain over scenarios, and per-window
//! combo errors come from scenario-conditional means plus bounded uniform
//! noise.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{AlgoParamCombo, PerformanceRecord, PlatformSpec, Resolution};
use crate::runtime::SelectionTrace;
use crate::subspace::{principal_angles, FeatureVector, SubspaceBasis};

/// Smallest allowed principal angle between two generating subspaces.
pub const MIN_SUBSPACE_SEPARATION: f64 = 0.2;
pub const SYNTHETIC_PLATFORM: &str = "synthetic";
const MAX_SUBSPACE_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub feature_dim: usize,
    pub subspace_dim: usize,
    pub scenarios: usize,
    pub combos: usize,
    pub frames_per_scenario: usize,
    /// Standard deviation of isotropic noise per component.
    pub noise_sigma: f64,
    /// Norm of each scenario's offset within its subspace.
    pub offset_scale: f64,
    pub windows: usize,
    pub window_length: usize,
    /// Probability that the next window stays in the same scenario.
    pub stay_probability: f64,
    /// Mean error per (scenario, combo); generated when absent.
    pub error_means: Option<Vec<Vec<f64>>>,
    /// Half-width of the uniform per-window error noise.
    pub error_noise: f64,
    pub seed: Option<u64>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            feature_dim: 64,
            subspace_dim: 5,
            scenarios: 5,
            combos: 4,
            frames_per_scenario: 40,
            noise_sigma: 0.1,
            offset_scale: 5.0,
            windows: 200,
            window_length: 20,
            stay_probability: 0.8,
            error_means: None,
            error_noise: 1.5,
            seed: None,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::ConfigInvalid(reason));
        for (name, v) in [
            ("feature_dim", self.feature_dim),
            ("subspace_dim", self.subspace_dim),
            ("scenarios", self.scenarios),
            ("combos", self.combos),
            ("frames_per_scenario", self.frames_per_scenario),
            ("windows", self.windows),
            ("window_length", self.window_length),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if self.subspace_dim >= self.feature_dim {
            return fail("subspace_dim must be below feature_dim".into());
        }
        if self.frames_per_scenario <= self.subspace_dim {
            return fail(format!(
                "frames_per_scenario ({}) must exceed subspace_dim ({})",
                self.frames_per_scenario, self.subspace_dim
            ));
        }
        if self.window_length <= self.subspace_dim {
            return fail(format!(
                "window_length ({}) must exceed subspace_dim ({})",
                self.window_length, self.subspace_dim
            ));
        }
        if [self.noise_sigma, self.error_noise, self.offset_scale]
            .iter()
            .any(|v| v.is_nan() || *v < 0.0)
        {
            return fail("noise levels and offset scale must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.stay_probability) {
            return fail("stay_probability must be in [0, 1]".into());
        }
        if let Some(means) = &self.error_means {
            if means.len() != self.scenarios || means.iter().any(|r| r.len() != self.combos) {
                return fail(format!(
                    "error_means must be {}x{}",
                    self.scenarios, self.combos
                ));
            }
            if means.iter().flatten().any(|&v| !v.is_finite() || v < 0.0) {
                return fail("error_means must be finite and non-negative".into());
            }
        }
        Ok(())
    }
}

/// Ground-truth errors of one test window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTruth {
    pub window_id: usize,
    pub scenario_id: Option<String>,
    /// combo id → error measured on this window.
    pub errors: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub windows: Vec<WindowTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub training_frames: Vec<FeatureVector>,
    pub training_labels: Vec<String>,
    pub test_frames: Vec<FeatureVector>,
    pub test_labels: Vec<String>,
    pub truth: GroundTruth,
    pub combos: Vec<AlgoParamCombo>,
    pub platforms: Vec<PlatformSpec>,
    pub performance: Vec<PerformanceRecord>,
    /// Generating subspaces, one per scenario.
    pub subspaces: Vec<DMatrix<f64>>,
    pub error_means: Vec<Vec<f64>>,
}

pub fn scenario_name(i: usize) -> String {
    format!("s{i}")
}

pub fn combo_name(h: usize) -> String {
    format!("c{h}")
}

/// Deterministic dataset for `config` (seed defaults to 42).
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticData> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.unwrap_or(42));
    let (a, b, m, h) = (
        config.feature_dim,
        config.subspace_dim,
        config.scenarios,
        config.combos,
    );

    let subspaces = separated_subspaces(&mut rng, a, b, m)?;
    let offsets: Vec<DVector<f64>> = subspaces
        .iter()
        .map(|basis| {
            let coeff = gaussian_vector(&mut rng, b);
            let coeff = coeff.normalize() * config.offset_scale;
            basis * coeff
        })
        .collect();
    let error_means = match &config.error_means {
        Some(means) => means.clone(),
        None => default_error_means(&mut rng, m, h),
    };

    let sample = |rng: &mut ChaCha8Rng, s: usize| -> Result<FeatureVector> {
        let coeff = gaussian_vector(rng, b);
        let noise = gaussian_vector(rng, a) * config.noise_sigma;
        FeatureVector::from_dvector(&offsets[s] + &subspaces[s] * coeff + noise)
    };

    let mut training_frames = Vec::with_capacity(m * config.frames_per_scenario);
    let mut training_labels = Vec::with_capacity(m * config.frames_per_scenario);
    for s in 0..m {
        for _ in 0..config.frames_per_scenario {
            training_frames.push(sample(&mut rng, s)?);
            training_labels.push(scenario_name(s));
        }
    }

    let mut test_frames = Vec::with_capacity(config.windows * config.window_length);
    let mut test_labels = Vec::with_capacity(config.windows * config.window_length);
    let mut truth = GroundTruth::default();
    let mut current = rng.random_range(0..m);
    for w in 0..config.windows {
        if w > 0 && m > 1 && rng.random::<f64>() >= config.stay_probability {
            let shift = rng.random_range(1..m);
            current = (current + shift) % m;
        }
        for _ in 0..config.window_length {
            test_frames.push(sample(&mut rng, current)?);
            test_labels.push(scenario_name(current));
        }
        let errors = (0..h)
            .map(|c| {
                let jitter = if config.error_noise > 0.0 {
                    rng.random_range(-config.error_noise..=config.error_noise)
                } else {
                    0.0
                };
                (combo_name(c), (error_means[current][c] + jitter).max(0.0))
            })
            .collect();
        truth.windows.push(WindowTruth {
            window_id: w,
            scenario_id: Some(scenario_name(current)),
            errors,
        });
    }

    let combos: Vec<AlgoParamCombo> = (0..h)
        .map(|c| AlgoParamCombo {
            id: combo_name(c),
            algorithm: "synthetic".into(),
            fps: 30.0,
            resolution: Resolution {
                width: 320,
                height: 240,
            },
        })
        .collect();
    let platforms = vec![PlatformSpec {
        id: SYNTHETIC_PLATFORM.into(),
        combo_capabilities: combos.iter().map(|c| (c.id.clone(), 30.0)).collect(),
        cost: 1.0,
    }];
    let performance = (0..m)
        .flat_map(|s| {
            let means = &error_means;
            (0..h).map(move |c| PerformanceRecord {
                scenario_id: scenario_name(s),
                combo_id: combo_name(c),
                platform_id: SYNTHETIC_PLATFORM.into(),
                error: means[s][c],
                extras: BTreeMap::new(),
            })
        })
        .collect();

    Ok(SyntheticData {
        training_frames,
        training_labels,
        test_frames,
        test_labels,
        truth,
        combos,
        platforms,
        performance,
        subspaces,
        error_means,
    })
}

/// Scenario `s` is best served by combo `s mod h` (mean 4); every other
/// combo draws a mean in `[8, 16)`.
fn default_error_means(rng: &mut ChaCha8Rng, m: usize, h: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|s| {
            (0..h)
                .map(|c| {
                    let other = rng.random_range(8.0..16.0);
                    if c == s % h {
                        4.0
                    } else {
                        other
                    }
                })
                .collect()
        })
        .collect()
}

fn separated_subspaces(
    rng: &mut ChaCha8Rng,
    a: usize,
    b: usize,
    m: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let mut accepted: Vec<SubspaceBasis> = Vec::with_capacity(m);
    let mut draws = 0;
    while accepted.len() < m {
        draws += 1;
        if draws > MAX_SUBSPACE_DRAWS {
            return Err(Error::ConfigInvalid(format!(
                "could not place {m} subspaces of dimension {b} in R^{a} with separation {MIN_SUBSPACE_SEPARATION} rad"
            )));
        }
        let candidate = SubspaceBasis::from_basis(random_orthonormal(rng, a, b))?;
        let mut separated = true;
        for other in &accepted {
            if principal_angles(&candidate, other)?.angles[0] < MIN_SUBSPACE_SEPARATION {
                separated = false;
                break;
            }
        }
        if separated {
            accepted.push(candidate);
        }
    }
    Ok(accepted.into_iter().map(|s| s.basis().clone()).collect())
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn random_orthonormal(rng: &mut ChaCha8Rng, a: usize, b: usize) -> DMatrix<f64> {
    let mut m: DMatrix<f64> = DMatrix::from_fn(a, b, |_, _| rng.sample(StandardNormal));
    for j in 0..b {
        for _ in 0..2 {
            for i in 0..j {
                let proj = m.column(i).dot(&m.column(j));
                let prev = m.column(i).into_owned();
                m.column_mut(j).axpy(-proj, &prev, 1.0);
            }
        }
        let norm = m.column(j).norm();
        m.column_mut(j).unscale_mut(norm);
    }
    m
}

// ------------------------------------------------------------------ regret

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRegret {
    pub window_id: usize,
    pub selected_combo: String,
    pub selected_error: f64,
    pub oracle_error: f64,
    pub best_static_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTotals {
    pub selected_sum: f64,
    pub oracle_sum: f64,
    pub best_static_combo: Option<String>,
    /// Total error of every combo present in all windows.
    pub static_sums: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub per_window: Vec<WindowRegret>,
    pub totals: RegretTotals,
    pub switch_count: usize,
    /// Fraction of windows matched to their generating scenario, when the
    /// ground truth names one for every window.
    pub scenario_match_accuracy: Option<f64>,
}

impl RegretReport {
    /// Selected total minus oracle total.
    pub fn regret(&self) -> f64 {
        self.totals.selected_sum - self.totals.oracle_sum
    }

    pub fn best_static_sum(&self) -> Option<f64> {
        self.totals
            .best_static_combo
            .as_ref()
            .map(|c| self.totals.static_sums[c])
    }
}

/// Compares a trace against per-window ground truth.
pub fn evaluate_regret(trace: &SelectionTrace, truth: &GroundTruth) -> Result<RegretReport> {
    if trace.decisions.len() != truth.windows.len() {
        return Err(Error::Misaligned {
            trace: trace.decisions.len(),
            truth: truth.windows.len(),
        });
    }
    for (d, w) in trace.decisions.iter().zip(&truth.windows) {
        if d.window_id != w.window_id {
            return Err(Error::Misaligned {
                trace: trace.decisions.len(),
                truth: truth.windows.len(),
            });
        }
    }

    // Combos measured on every window are the static candidates.
    let mut static_sums: BTreeMap<String, f64> = truth
        .windows
        .first()
        .map(|w| w.errors.keys().map(|k| (k.clone(), 0.0)).collect())
        .unwrap_or_default();
    static_sums.retain(|c, _| truth.windows.iter().all(|w| w.errors.contains_key(c)));
    for w in &truth.windows {
        for (c, sum) in static_sums.iter_mut() {
            *sum += w.errors[c];
        }
    }
    let best_static_combo = static_sums
        .iter()
        .min_by(|x, y| x.1.total_cmp(y.1).then(x.0.cmp(y.0)))
        .map(|(c, _)| c.clone());

    let mut per_window = Vec::with_capacity(truth.windows.len());
    let (mut selected_sum, mut oracle_sum) = (0.0, 0.0);
    for (d, w) in trace.decisions.iter().zip(&truth.windows) {
        let selected_error = *w
            .errors
            .get(&d.chosen_combo_id)
            .ok_or_else(|| Error::UnknownId {
                kind: "combo",
                id: d.chosen_combo_id.clone(),
            })?;
        let oracle_error = w.errors.values().copied().fold(f64::INFINITY, f64::min);
        let best_static_error = best_static_combo.as_ref().map_or(f64::NAN, |c| w.errors[c]);
        selected_sum += selected_error;
        oracle_sum += oracle_error;
        per_window.push(WindowRegret {
            window_id: d.window_id,
            selected_combo: d.chosen_combo_id.clone(),
            selected_error,
            oracle_error,
            best_static_error,
        });
    }

    let scenario_match_accuracy =
        if !truth.windows.is_empty() && truth.windows.iter().all(|w| w.scenario_id.is_some()) {
            let hits = trace
                .decisions
                .iter()
                .zip(&truth.windows)
                .filter(|(d, w)| w.scenario_id.as_deref() == Some(d.matched_scenario_id.as_str()))
                .count();
            Some(hits as f64 / truth.windows.len() as f64)
        } else {
            None
        };

    Ok(RegretReport {
        per_window,
        totals: RegretTotals {
            selected_sum,
            oracle_sum,
            best_static_combo,
            static_sums,
        },
        switch_count: trace.switch_count(),
        scenario_match_accuracy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub const REPORT_CSV_HEADER: &str =
    "window_id,selected_combo,selected_error,oracle_error,best_static_error";

/// Renders a report. CSV holds the per-window rows; JSON holds everything.
pub fn emit_report(report: &RegretReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(REPORT_CSV_HEADER);
            out.push('\n');
            for w in &report.per_window {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    w.window_id,
                    w.selected_combo,
                    w.selected_error,
                    w.oracle_error,
                    w.best_static_error
                ));
            }
            Ok(out)
        }
        ReportFormat::Json => {
            let mut out = serde_json::to_string_pretty(report)?;
            out.push('\n');
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::SelectionDecision;

    fn trace(combos: &[&str]) -> SelectionTrace {
        SelectionTrace {
            decisions: combos
                .iter()
                .enumerate()
                .map(|(i, c)| SelectionDecision {
                    window_id: i,
                    matched_scenario_id: "s0".into(),
                    similarity: 1.0,
                    all_similarities: vec![1.0],
                    chosen_combo_id: c.to_string(),
                    platform_id: "p".into(),
                })
                .collect(),
            profile_reference: String::new(),
            elapsed_ms: vec![0.0; combos.len()],
        }
    }

    fn truth(rows: &[[f64; 2]]) -> GroundTruth {
        GroundTruth {
            windows: rows
                .iter()
                .enumerate()
                .map(|(i, r)| WindowTruth {
                    window_id: i,
                    scenario_id: None,
                    errors: [("a".to_string(), r[0]), ("b".to_string(), r[1])].into(),
                })
                .collect(),
        }
    }

    #[test]
    fn oracle_trace_has_zero_regret() {
        let t = truth(&[[1.0, 2.0], [5.0, 3.0], [0.0, 4.0]]);
        let r = evaluate_regret(&trace(&["a", "b", "a"]), &t).unwrap();
        assert_eq!(r.regret(), 0.0);
        assert_eq!(r.switch_count, 2);
        assert_eq!(r.totals.best_static_combo.as_deref(), Some("a"));
        assert_eq!(r.best_static_sum(), Some(6.0));
        assert_eq!(r.scenario_match_accuracy, None);
    }

    #[test]
    fn constant_worst_combo_regret() {
        let t = truth(&[[1.0, 2.0], [5.0, 3.0], [0.0, 4.0]]);
        let r = evaluate_regret(&trace(&["b", "b", "b"]), &t).unwrap();
        // 9 selected vs oracle 1 + 3 + 0 = 4
        assert_eq!(r.totals.selected_sum, 9.0);
        assert_eq!(r.totals.oracle_sum, 4.0);
        assert_eq!(r.regret(), 5.0);
        assert_eq!(r.switch_count, 0);
    }

    #[test]
    fn misaligned_counts() {
        let t = truth(&[[1.0, 2.0]]);
        assert!(matches!(
            evaluate_regret(&trace(&["a", "a"]), &t),
            Err(Error::Misaligned { trace: 2, truth: 1 })
        ));
    }

    #[test]
    fn csv_shapes() {
        let empty = RegretReport {
            per_window: vec![],
            totals: RegretTotals {
                selected_sum: 0.0,
                oracle_sum: 0.0,
                best_static_combo: None,
                static_sums: BTreeMap::new(),
            },
            switch_count: 0,
            scenario_match_accuracy: None,
        };
        assert_eq!(
            emit_report(&empty, ReportFormat::Csv).unwrap(),
            format!("{REPORT_CSV_HEADER}\n")
        );
        let t = truth(&[[1.0, 2.5]]);
        let one = evaluate_regret(&trace(&["b"]), &t).unwrap();
        assert_eq!(
            emit_report(&one, ReportFormat::Csv).unwrap(),
            format!("{REPORT_CSV_HEADER}\n0,b,2.5,1,1\n")
        );
    }

    #[test]
    fn config_validation() {
        let mut c = SyntheticConfig::default();
        assert!(c.validate().is_ok());
        c.frames_per_scenario = c.subspace_dim;
        assert!(matches!(c.validate(), Err(Error::ConfigInvalid(_))));
        let c = SyntheticConfig {
            error_means: Some(vec![vec![1.0]]),
            ..SyntheticConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
