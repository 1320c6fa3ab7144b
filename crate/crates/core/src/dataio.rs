//! On-disk formats.
//!
//! * Matrix files: 8-byte magic `ADSLMAT1`, `rows` and `cols` as u64 LE,
//!   then `rows·cols` f64 LE values in row-major order.
//! * Feature stream manifests: JSON pointing at matrix files whose rows are
//!   frames.
//! * Performance tables: CSV `scenario_id,combo_id,platform_id,error`
//!   followed by optional metric columns.
//! * Design profiles: JSON plus one basis and one complement matrix file per
//!   scenario, named after the profile file.
//! * Selection traces: JSON lines, a header line followed by one line per
//!   window; plus a CSV projection for plotting.
//! * Ground truth: CSV `window_id,scenario_id,combo_id,error`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::{GroundTruth, WindowTruth};
use crate::profile::{
    AlgoParamCombo, DesignProfile, PerformanceRecord, PlatformSpec, ProfileConfig, ScenarioProfile,
};
use crate::runtime::{SelectionDecision, SelectionTrace};
use crate::subspace::{FeatureVector, SubspaceBasis};

pub const MATRIX_MAGIC: &[u8; 8] = b"ADSLMAT1";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: u64 = 24;
const PERFORMANCE_COLUMNS: [&str; 4] = ["scenario_id", "combo_id", "platform_id", "error"];
const TRUTH_COLUMNS: [&str; 4] = ["window_id", "scenario_id", "combo_id", "error"];

// ---------------------------------------------------------------- matrices

pub fn encode_matrix(m: &DMatrix<f64>) -> Vec<u8> {
    let (rows, cols) = m.shape();
    let mut out = Vec::with_capacity(HEADER_LEN as usize + rows * cols * 8);
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for i in 0..rows {
        for j in 0..cols {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<DMatrix<f64>> {
    if bytes.len() < 8 || &bytes[..8] != MATRIX_MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    if bytes.len() < HEADER_LEN as usize {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: HEADER_LEN,
            found: bytes.len() as u64,
        });
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8-byte slice"));
    let cols = u64::from_le_bytes(bytes[16..24].try_into().expect("8-byte slice"));
    let expected = payload_len(rows, cols)?;
    let found = (bytes.len() as u64) - HEADER_LEN;
    if found != expected {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected,
            found,
        });
    }
    let values = bytes[HEADER_LEN as usize..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    Ok(DMatrix::from_row_iterator(
        rows as usize,
        cols as usize,
        values,
    ))
}

fn payload_len(rows: u64, cols: u64) -> Result<u64> {
    rows.checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .filter(|&n| n <= isize::MAX as u64 - HEADER_LEN)
        .ok_or(Error::DimensionOverflow { rows, cols })
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_matrix(m)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = [0u8; HEADER_LEN as usize];
    let n = read_up_to(&mut file, &mut header).map_err(|e| Error::io(path, e))?;
    if n < 8 || &header[..8] != MATRIX_MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    if n < HEADER_LEN as usize {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: HEADER_LEN,
            found: n as u64,
        });
    }
    let rows = u64::from_le_bytes(header[8..16].try_into().expect("8-byte slice"));
    let cols = u64::from_le_bytes(header[16..24].try_into().expect("8-byte slice"));
    let expected = payload_len(rows, cols)?;
    let actual = file.metadata().map_err(|e| Error::io(path, e))?.len() - HEADER_LEN;
    if actual != expected {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected,
            found: actual,
        });
    }
    let mut bytes = header.to_vec();
    file.read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes, path)
}

fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

// --------------------------------------------------------- feature streams

/// JSON manifest describing a stream of frame features stored in matrix
/// files (frames as rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStreamManifest {
    pub version: u32,
    pub feature_dim: usize,
    pub frame_count: usize,
    pub source: String,
    /// Matrix files, relative to the manifest's directory.
    pub matrices: Vec<String>,
    /// Optional ground-truth scenario label per frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    /// Free-form provenance notes (feature pipeline, original dimensions).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStream {
    pub manifest: FeatureStreamManifest,
    pub frames: Vec<FeatureVector>,
}

pub fn frames_to_matrix(frames: &[FeatureVector]) -> Result<DMatrix<f64>> {
    let cols = frames.first().map_or(0, |f| f.dim());
    let mut m = DMatrix::zeros(frames.len(), cols);
    for (i, f) in frames.iter().enumerate() {
        crate::subspace::check_dim(cols, f.dim())?;
        for (j, &v) in f.as_slice().iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

/// Writes `<manifest stem>.frames.mat` next to the manifest.
pub fn write_feature_stream(
    manifest_path: impl AsRef<Path>,
    frames: &[FeatureVector],
    labels: Option<Vec<String>>,
    source: &str,
    metadata: BTreeMap<String, String>,
) -> Result<FeatureStreamManifest> {
    let manifest_path = manifest_path.as_ref();
    let matrix_name = format!("{}.frames.mat", file_stem(manifest_path));
    let m = frames_to_matrix(frames)?;
    write_matrix(sibling(manifest_path, &matrix_name), &m)?;
    let manifest = FeatureStreamManifest {
        version: FORMAT_VERSION,
        feature_dim: m.ncols(),
        frame_count: m.nrows(),
        source: source.to_string(),
        matrices: vec![matrix_name],
        labels,
        metadata,
    };
    write_json(manifest_path, &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<FeatureStreamManifest> {
    let manifest: FeatureStreamManifest = read_json(path.as_ref())?;
    check_version(manifest.version)?;
    Ok(manifest)
}

pub fn read_feature_stream(manifest_path: impl AsRef<Path>) -> Result<FeatureStream> {
    let manifest_path = manifest_path.as_ref();
    let manifest = read_manifest(manifest_path)?;
    let mut frames = Vec::with_capacity(manifest.frame_count);
    for name in &manifest.matrices {
        let m = read_matrix(sibling(manifest_path, name))?;
        if m.ncols() != manifest.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: manifest.feature_dim,
                found: m.ncols(),
            });
        }
        for i in 0..m.nrows() {
            frames.push(FeatureVector::new(m.row(i).iter().copied().collect())?);
        }
    }
    if frames.len() != manifest.frame_count {
        return Err(Error::InvalidInput(format!(
            "manifest declares {} frames, matrices hold {}",
            manifest.frame_count,
            frames.len()
        )));
    }
    if let Some(labels) = &manifest.labels {
        if labels.len() != frames.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} frames",
                labels.len(),
                frames.len()
            )));
        }
    }
    Ok(FeatureStream { manifest, frames })
}

// ------------------------------------------------------ performance tables

pub fn parse_performance_table(reader: impl Read) -> Result<Vec<PerformanceRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 4 || header.iter().take(4).ne(PERFORMANCE_COLUMNS) {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("header must start with {}", PERFORMANCE_COLUMNS.join(",")),
        });
    }
    let extra_names: Vec<String> = header.iter().skip(4).map(str::to_string).collect();
    let mut records = Vec::new();
    let mut seen: BTreeMap<(String, String, String), u64> = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != header.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", header.len(), row.len()),
            });
        }
        let error = parse_f64(&row[3], line, "error")?;
        if error < 0.0 {
            return Err(Error::NegativeError { line, value: error });
        }
        let mut extras = BTreeMap::new();
        for (name, value) in extra_names.iter().zip(row.iter().skip(4)) {
            if !value.is_empty() {
                extras.insert(name.clone(), parse_f64(value, line, name)?);
            }
        }
        let key = (row[0].to_string(), row[1].to_string(), row[2].to_string());
        if key.0.is_empty() || key.1.is_empty() || key.2.is_empty() {
            return Err(Error::MalformedRow {
                line,
                reason: "empty identifier".into(),
            });
        }
        if let Some(&first_line) = seen.get(&key) {
            return Err(Error::DuplicateKey {
                scenario: key.0,
                combo: key.1,
                platform: key.2,
                first_line,
                second_line: line,
            });
        }
        seen.insert(key.clone(), line);
        records.push(PerformanceRecord {
            scenario_id: key.0,
            combo_id: key.1,
            platform_id: key.2,
            error,
            extras,
        });
    }
    Ok(records)
}

pub fn read_performance_table(path: impl AsRef<Path>) -> Result<Vec<PerformanceRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_performance_table(file)
}

pub fn write_performance_table(
    path: impl AsRef<Path>,
    records: &[PerformanceRecord],
) -> Result<()> {
    let extra_names: Vec<String> = records
        .iter()
        .flat_map(|r| r.extras.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out = PERFORMANCE_COLUMNS.join(",");
    for n in &extra_names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}",
            r.scenario_id, r.combo_id, r.platform_id, r.error
        ));
        for n in &extra_names {
            out.push(',');
            if let Some(v) = r.extras.get(n) {
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}

fn parse_f64(value: &str, line: u64, column: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::MalformedRow {
            line,
            reason: format!("{column} {value:?} is not a finite number"),
        })
}

// ---------------------------------------------------------------- catalogs

/// Combos and candidate platforms, as read from `platforms.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformCatalog {
    pub combos: Vec<AlgoParamCombo>,
    pub platforms: Vec<PlatformSpec>,
}

pub fn read_catalog(path: impl AsRef<Path>) -> Result<PlatformCatalog> {
    read_json(path.as_ref())
}

pub fn write_catalog(path: impl AsRef<Path>, catalog: &PlatformCatalog) -> Result<()> {
    write_json(path.as_ref(), catalog)
}

// ---------------------------------------------------------------- profiles

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProfileDocument {
    format_version: u32,
    config: ProfileConfig,
    selected_platform: String,
    combos: Vec<AlgoParamCombo>,
    platforms: Vec<PlatformSpec>,
    performance: Vec<PerformanceRecord>,
    scenarios: Vec<ScenarioEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScenarioEntry {
    scenario_id: String,
    member_count: usize,
    labels: BTreeMap<String, String>,
    representative_feature: FeatureVector,
    basis_file: String,
    complement_file: String,
}

fn profile_document(profile: &DesignProfile, stem: &str) -> ProfileDocument {
    ProfileDocument {
        format_version: FORMAT_VERSION,
        config: profile.config.clone(),
        selected_platform: profile.selected_platform.clone(),
        combos: profile.combos.clone(),
        platforms: profile.platforms.clone(),
        performance: profile.performance.clone(),
        scenarios: profile
            .scenarios
            .iter()
            .enumerate()
            .map(|(i, s)| ScenarioEntry {
                scenario_id: s.scenario_id.clone(),
                member_count: s.member_count,
                labels: s.labels.clone(),
                representative_feature: s.representative_feature.clone(),
                basis_file: format!("{stem}.scenario-{i}.basis.mat"),
                complement_file: format!("{stem}.scenario-{i}.complement.mat"),
            })
            .collect(),
    }
}

/// Writes the profile JSON and its per-scenario matrix sidecars.
pub fn save_profile(path: impl AsRef<Path>, profile: &DesignProfile) -> Result<()> {
    let path = path.as_ref();
    let doc = profile_document(profile, &file_stem(path));
    for (entry, s) in doc.scenarios.iter().zip(&profile.scenarios) {
        write_matrix(sibling(path, &entry.basis_file), s.subspace.basis())?;
        write_matrix(
            sibling(path, &entry.complement_file),
            s.subspace.complement(),
        )?;
    }
    write_json(path, &doc)
}

pub fn load_profile(path: impl AsRef<Path>) -> Result<DesignProfile> {
    let path = path.as_ref();
    let doc: ProfileDocument = read_json(path)?;
    check_version(doc.format_version)?;
    let scenarios = doc
        .scenarios
        .into_iter()
        .map(|e| {
            let basis = read_matrix(sibling(path, &e.basis_file))?;
            let complement = read_matrix(sibling(path, &e.complement_file))?;
            Ok(ScenarioProfile {
                scenario_id: e.scenario_id,
                representative_feature: e.representative_feature,
                subspace: SubspaceBasis::new(basis, complement)?,
                member_count: e.member_count,
                labels: e.labels,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let profile = DesignProfile {
        config: doc.config,
        combos: doc.combos,
        platforms: doc.platforms,
        performance: doc.performance,
        scenarios,
        selected_platform: doc.selected_platform,
    };
    profile.validate()?;
    Ok(profile)
}

/// SHA-256 over the profile document and every sidecar matrix, independent
/// of where the profile is stored.
pub fn profile_hash(profile: &DesignProfile) -> Result<String> {
    let doc = profile_document(profile, "profile");
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&doc)?);
    for s in &profile.scenarios {
        hasher.update(encode_matrix(s.subspace.basis()));
        hasher.update(encode_matrix(s.subspace.complement()));
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

// ------------------------------------------------------------------ traces

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceHeader {
    format_version: u32,
    profile: String,
    windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceLine {
    window_id: usize,
    matched_scenario: String,
    similarity: f64,
    similarities: Vec<f64>,
    combo: String,
    platform: String,
    elapsed_ms: f64,
}

pub fn encode_trace(trace: &SelectionTrace) -> Result<String> {
    let mut out = serde_json::to_string(&TraceHeader {
        format_version: FORMAT_VERSION,
        profile: trace.profile_reference.clone(),
        windows: trace.decisions.len(),
    })?;
    out.push('\n');
    for (d, &ms) in trace.decisions.iter().zip(&trace.elapsed_ms) {
        out.push_str(&serde_json::to_string(&TraceLine {
            window_id: d.window_id,
            matched_scenario: d.matched_scenario_id.clone(),
            similarity: d.similarity,
            similarities: d.all_similarities.clone(),
            combo: d.chosen_combo_id.clone(),
            platform: d.platform_id.clone(),
            elapsed_ms: ms,
        })?);
        out.push('\n');
    }
    Ok(out)
}

pub fn decode_trace(reader: impl BufRead) -> Result<SelectionTrace> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::MalformedRow {
        line: 1,
        reason: "missing trace header".into(),
    })?;
    let header: TraceHeader = serde_json::from_str(&header.map_err(|e| Error::io("<trace>", e))?)?;
    check_version(header.format_version)?;
    let mut decisions = Vec::with_capacity(header.windows);
    let mut elapsed_ms = Vec::with_capacity(header.windows);
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io("<trace>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let l: TraceLine = serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
            line: i as u64 + 1,
            reason: e.to_string(),
        })?;
        if l.window_id != decisions.len() {
            return Err(Error::MalformedRow {
                line: i as u64 + 1,
                reason: format!("window id {} out of sequence", l.window_id),
            });
        }
        elapsed_ms.push(l.elapsed_ms);
        decisions.push(SelectionDecision {
            window_id: l.window_id,
            matched_scenario_id: l.matched_scenario,
            similarity: l.similarity,
            all_similarities: l.similarities,
            chosen_combo_id: l.combo,
            platform_id: l.platform,
        });
    }
    if decisions.len() != header.windows {
        return Err(Error::InvalidInput(format!(
            "trace header declares {} windows, found {}",
            header.windows,
            decisions.len()
        )));
    }
    Ok(SelectionTrace {
        decisions,
        profile_reference: header.profile,
        elapsed_ms,
    })
}

pub fn write_trace(path: impl AsRef<Path>, trace: &SelectionTrace) -> Result<()> {
    write_text(path.as_ref(), &encode_trace(trace)?)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<SelectionTrace> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    decode_trace(BufReader::new(file))
}

/// `window_id,combo_id,similarity` per decision.
pub fn trace_csv(trace: &SelectionTrace) -> String {
    let mut out = String::from("window_id,combo_id,similarity\n");
    for d in &trace.decisions {
        out.push_str(&format!(
            "{},{},{}\n",
            d.window_id, d.chosen_combo_id, d.similarity
        ));
    }
    out
}

// ------------------------------------------------------------ ground truth

pub fn parse_ground_truth(reader: impl Read) -> Result<GroundTruth> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRUTH_COLUMNS) {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("header must be {}", TRUTH_COLUMNS.join(",")),
        });
    }
    let mut windows: Vec<WindowTruth> = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let window_id: usize = row[0].parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("window_id {:?} is not an integer", &row[0]),
        })?;
        let error = parse_f64(&row[3], line, "error")?;
        if error < 0.0 {
            return Err(Error::NegativeError { line, value: error });
        }
        let scenario = (!row[1].is_empty()).then(|| row[1].to_string());
        if windows.last().map(|w| w.window_id) != Some(window_id) {
            if window_id != windows.len() {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("window {window_id} out of sequence"),
                });
            }
            windows.push(WindowTruth {
                window_id,
                scenario_id: scenario.clone(),
                errors: BTreeMap::new(),
            });
        }
        let w = windows.last_mut().expect("pushed above");
        if w.scenario_id != scenario {
            return Err(Error::MalformedRow {
                line,
                reason: format!("conflicting scenario for window {window_id}"),
            });
        }
        if w.errors.insert(row[2].to_string(), error).is_some() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("duplicate combo {:?} for window {window_id}", &row[2]),
            });
        }
    }
    Ok(GroundTruth { windows })
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ground_truth(file)
}

pub fn encode_ground_truth(truth: &GroundTruth) -> String {
    let mut out = TRUTH_COLUMNS.join(",");
    out.push('\n');
    for w in &truth.windows {
        for (combo, e) in &w.errors {
            out.push_str(&format!(
                "{},{},{},{}\n",
                w.window_id,
                w.scenario_id.as_deref().unwrap_or(""),
                combo,
                e
            ));
        }
    }
    out
}

pub fn write_ground_truth(path: impl AsRef<Path>, truth: &GroundTruth) -> Result<()> {
    write_text(path.as_ref(), &encode_ground_truth(truth))
}

// ----------------------------------------------------------------- helpers

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn check_version(found: u32) -> Result<()> {
    if found == 0 || found > FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found,
            supported: FORMAT_VERSION,
        });
    }
    Ok(())
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into())
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent()
        .map_or_else(|| PathBuf::from(name), |p| p.join(name))
}
