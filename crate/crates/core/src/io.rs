//! Configuration parsing and run artifacts on disk.
//!
//! Every output is a pure function of the run artifact, so re-emitting the
//! same run produces byte-identical files; wall-clock times live only in the
//! manifest. Floats are printed with Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geom::Vec2;
use crate::kernel::KernelError;
use crate::limit::AsymptoticSpeedResult;
use crate::scenario::{
    build_experiment, ExperimentOverrides, RunArtifact, ScenarioConfig, TrajectorySample,
};
use crate::walker::WalkerKind;

#[derive(Debug, Error)]
pub enum IoError {
    /// Malformed JSON; the message already carries line and column.
    #[error("{message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid config: {0}")]
    Validation(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl IoError {
    fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io { path: path.into(), source }
    }
}

pub type IoResult<T> = std::result::Result<T, IoError>;

/// Shorthand schema: name an experiment and override the knobs it exposes.
/// A full `ScenarioConfig` document (with `version: 1`) is accepted too.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShorthandConfig {
    experiment: u32,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    epsilon: Option<f64>,
    #[serde(default)]
    sigma: Option<f64>,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    gamma: Option<f64>,
    #[serde(default)]
    cones_per_soma: Option<usize>,
    #[serde(default)]
    horizon: Option<f64>,
    #[serde(default)]
    snapshot_every: Option<usize>,
    #[serde(default)]
    literal_noise: Option<bool>,
    #[serde(default)]
    output_dir: Option<String>,
}

impl ShorthandConfig {
    fn expand(self) -> IoResult<ScenarioConfig> {
        let overrides = ExperimentOverrides {
            sigma: self.sigma,
            epsilon: self.epsilon,
            beta: self.beta,
            gamma: self.gamma,
            cones_per_soma: self.cones_per_soma,
            horizon: self.horizon,
            seed: self.seed,
        };
        let mut config = build_experiment(self.experiment, &overrides, self.seed.unwrap_or(0))?;
        if self.snapshot_every.is_some() {
            config.snapshot_every = self.snapshot_every;
        }
        if let Some(flag) = self.literal_noise {
            config.literal_noise = flag;
        }
        if self.output_dir.is_some() {
            config.output_dir = self.output_dir;
        }
        Ok(config)
    }
}

/// Parses and fully validates a config document (full schema or experiment
/// shorthand). Defaults are applied, so the result round-trips through
/// `config_json` unchanged.
pub fn parse_config(text: &str) -> IoResult<ScenarioConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| IoError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let config: ScenarioConfig = if value.get("experiment").is_some() {
        serde_json::from_value::<ShorthandConfig>(value)
            .map_err(|e| IoError::Validation(e.to_string()))?
            .expand()?
    } else {
        serde_json::from_value(value).map_err(|e| IoError::Validation(e.to_string()))?
    };
    config.validate()?;
    Ok(config)
}

pub fn parse_config_file(path: &Path) -> IoResult<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    parse_config(&text)
}

pub fn config_json(config: &ScenarioConfig) -> String {
    let mut text = serde_json::to_string_pretty(config).expect("config serializes");
    text.push('\n');
    text
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        write!(out, "{b:02x}").unwrap();
    }
    out
}

/// Hash of the resolved config; runs are keyed by its prefix so concurrent
/// runs with different configs never share a directory.
pub fn config_hash(config: &ScenarioConfig) -> String {
    sha256_hex(serde_json::to_string(config).expect("config serializes").as_bytes())
}

pub fn content_hash(text: &str) -> String {
    sha256_hex(text.as_bytes())
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Provenance record for one run: config identity, seed, software version,
/// wall-clock bounds, and the checksummed file inventory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn begin(config: &ScenarioConfig) -> Self {
        RunManifest {
            config_sha256: config_hash(config),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
            files: Vec::new(),
        }
    }
}

/// Pre-flight probe: the directory must exist (or be creatable) and accept a
/// write before any rendering work starts.
pub fn ensure_writable(dir: &Path) -> IoResult<()> {
    fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    let probe = dir.join(".writable");
    fs::write(&probe, b"ok").map_err(|e| IoError::file(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| IoError::file(&probe, e))?;
    Ok(())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> IoResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| IoError::file(&path, e))?;
    Ok(path)
}

fn kind_label(kind: WalkerKind) -> &'static str {
    match kind {
        WalkerKind::Soma => "soma",
        WalkerKind::GrowthCone => "cone",
    }
}

pub const TRAJECTORY_HEADER: &str = "step,time,walker_id,kind,x,y,active";

pub fn trajectory_csv(samples: &[TrajectorySample]) -> String {
    let mut out = String::with_capacity(32 * samples.len() + 40);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for s in samples {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.step,
            s.time,
            s.walker,
            kind_label(s.kind),
            s.position.x,
            s.position.y,
            s.active
        )
        .unwrap();
    }
    out
}

/// Inverse of `trajectory_csv`; floats survive exactly because the writer
/// uses shortest round-trip formatting.
pub fn parse_trajectory_csv(text: &str) -> IoResult<Vec<TrajectorySample>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRAJECTORY_HEADER => {}
        other => {
            return Err(IoError::Validation(format!(
                "trajectory header is {other:?}, expected {TRAJECTORY_HEADER:?}"
            )));
        }
    }
    let mut samples = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row = idx + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(IoError::Validation(format!(
                "trajectory line {row} has {} fields, expected 7",
                fields.len()
            )));
        }
        let bad = |name: &str| IoError::Validation(format!("trajectory line {row}: bad {name}"));
        let kind = match fields[3] {
            "soma" => WalkerKind::Soma,
            "cone" => WalkerKind::GrowthCone,
            _ => return Err(bad("kind")),
        };
        let active = match fields[6] {
            "true" => true,
            "false" => false,
            _ => return Err(bad("active")),
        };
        samples.push(TrajectorySample {
            step: fields[0].parse().map_err(|_| bad("step"))?,
            time: fields[1].parse().map_err(|_| bad("time"))?,
            walker: fields[2].parse().map_err(|_| bad("walker_id"))?,
            kind,
            position: Vec2::new(
                fields[4].parse().map_err(|_| bad("x"))?,
                fields[5].parse().map_err(|_| bad("y"))?,
            ),
            active,
        });
    }
    Ok(samples)
}

pub fn contacts_jsonl(contacts: &[crate::walker::ContactEvent]) -> String {
    let mut out = String::new();
    for event in contacts {
        out.push_str(&serde_json::to_string(event).expect("contact serializes"));
        out.push('\n');
    }
    out
}

pub fn summary_json(summary: &crate::scenario::RunSummary) -> String {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    text
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotSidecar {
    side: usize,
    species: usize,
    half_length: f64,
    spacing: f64,
    /// fields.bin layout: snapshots in order, each as species-major blocks of
    /// side*side little-endian f64 nodal values, node id = iy*side + ix.
    layout: String,
    steps: Vec<usize>,
    times: Vec<f64>,
}

fn snapshot_sidecar(artifact: &RunArtifact) -> String {
    let config = &artifact.config;
    let side = (2.0 * config.half_length / config.spacing).round() as usize;
    let sidecar = SnapshotSidecar {
        side,
        species: config.species.len(),
        half_length: config.half_length,
        spacing: config.spacing,
        layout: "snapshot-major, then species, then node id iy*side+ix, f64 little-endian"
            .to_string(),
        steps: artifact.snapshots.iter().map(|s| s.step).collect(),
        times: artifact.snapshots.iter().map(|s| s.time).collect(),
    };
    let mut text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    text.push('\n');
    text
}

fn snapshot_binary(snapshots: &[crate::scenario::FieldSnapshot]) -> Vec<u8> {
    let mut out = Vec::new();
    for snap in snapshots {
        for species in &snap.values {
            for v in species {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

const PALETTE: [&str; 12] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#7f7f7f", "#aec7e8", "#ffbb78",
];

fn walker_color(id: usize) -> &'static str {
    PALETTE[id % PALETTE.len()]
}

/// Two-decimal pixel coordinates: stable bytes, invisible at plot scale.
fn px(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Trajectory picture: soma positions as dots, each cone's path as a
/// polyline, everything colored by walker id so a replay from the CSV alone
/// reproduces the bytes exactly.
pub fn trajectory_svg(samples: &[TrajectorySample], half_length: f64) -> String {
    const SIZE: f64 = 640.0;
    const MARGIN: f64 = 20.0;
    let span = SIZE - 2.0 * MARGIN;
    let map = |p: Vec2| -> (f64, f64) {
        (
            px(MARGIN + (p.x + half_length) / (2.0 * half_length) * span),
            px(MARGIN + (half_length - p.y) / (2.0 * half_length) * span),
        )
    };

    let mut order: Vec<usize> = Vec::new();
    let mut paths: std::collections::BTreeMap<usize, (WalkerKind, Vec<Vec2>)> =
        std::collections::BTreeMap::new();
    for s in samples {
        let entry = paths.entry(s.walker).or_insert_with(|| {
            order.push(s.walker);
            (s.kind, Vec::new())
        });
        entry.1.push(s.position);
    }

    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" \
         viewBox=\"0 0 {SIZE} {SIZE}\">"
    )
    .unwrap();
    writeln!(out, "<rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>").unwrap();
    writeln!(
        out,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{span}\" height=\"{span}\" fill=\"none\" \
         stroke=\"#cccccc\" stroke-width=\"1\"/>"
    )
    .unwrap();
    for (id, (kind, points)) in &paths {
        if *kind != WalkerKind::GrowthCone {
            continue;
        }
        let mut attr = String::new();
        for p in points {
            let (x, y) = map(*p);
            if !attr.is_empty() {
                attr.push(' ');
            }
            write!(attr, "{x},{y}").unwrap();
        }
        writeln!(
            out,
            "<polyline points=\"{attr}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" \
             stroke-opacity=\"0.9\"/>",
            walker_color(*id)
        )
        .unwrap();
    }
    for (id, (kind, points)) in &paths {
        if *kind != WalkerKind::Soma {
            continue;
        }
        let (x, y) = map(points[0]);
        writeln!(
            out,
            "<circle cx=\"{x}\" cy=\"{y}\" r=\"5\" fill=\"{}\"/>",
            walker_color(*id)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Writes every artifact file into `dir`, then the manifest describing them.
/// The directory is probed for writability before anything is rendered.
pub fn emit_outputs(
    artifact: &RunArtifact,
    manifest: &mut RunManifest,
    dir: &Path,
) -> IoResult<()> {
    ensure_writable(dir)?;
    let files: Vec<(&str, Vec<u8>)> = vec![
        ("config.json", config_json(&artifact.config).into_bytes()),
        ("trajectory.csv", trajectory_csv(&artifact.trajectory).into_bytes()),
        ("contacts.jsonl", contacts_jsonl(&artifact.contacts).into_bytes()),
        ("summary.json", summary_json(&artifact.summary).into_bytes()),
        ("fields.json", snapshot_sidecar(artifact).into_bytes()),
        ("fields.bin", snapshot_binary(&artifact.snapshots)),
        (
            "trajectory.svg",
            trajectory_svg(&artifact.trajectory, artifact.config.half_length).into_bytes(),
        ),
    ];
    for (name, bytes) in &files {
        write_file(dir, name, bytes)?;
    }
    // the inventory hashes what actually landed on disk
    manifest.files.clear();
    for (name, _) in &files {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| IoError::file(&path, e))?;
        manifest.files.push(FileRecord {
            name: (*name).to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    manifest.finished_unix_ms = now_ms();
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    write_file(dir, "manifest.json", text.as_bytes())?;
    Ok(())
}

pub const SWEEP_HEADER: &str = "epsilon,v_eps,residual,iterations,integral,quadrature_rel_diff";

pub fn sweep_csv(rows: &[AsymptoticSpeedResult]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epsilon, r.v_eps, r.residual, r.iterations, r.integral, r.quadrature_rel_diff
        )
        .unwrap();
    }
    out
}

/// Speed-versus-width curve with bare axes, one marker per sweep point.
pub fn sweep_svg(rows: &[AsymptoticSpeedResult]) -> String {
    const SIZE: f64 = 640.0;
    const MARGIN: f64 = 60.0;
    let span = SIZE - 2.0 * MARGIN;
    let (mut e_lo, mut e_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut v_lo, mut v_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rows {
        e_lo = e_lo.min(r.epsilon);
        e_hi = e_hi.max(r.epsilon);
        v_lo = v_lo.min(r.v_eps);
        v_hi = v_hi.max(r.v_eps);
    }
    if !(e_hi > e_lo) {
        e_hi = e_lo + 1.0;
    }
    if !(v_hi > v_lo) {
        v_hi = v_lo + 1.0;
    }
    let map_x = |e: f64| px(MARGIN + (e - e_lo) / (e_hi - e_lo) * span);
    let map_y = |v: f64| px(SIZE - MARGIN - (v - v_lo) / (v_hi - v_lo) * span);
    let label = |v: f64| (v * 1e4).round() / 1e4;

    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" \
         viewBox=\"0 0 {SIZE} {SIZE}\">"
    )
    .unwrap();
    writeln!(out, "<rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>").unwrap();
    writeln!(
        out,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{span}\" height=\"{span}\" fill=\"none\" \
         stroke=\"#999999\" stroke-width=\"1\"/>"
    )
    .unwrap();
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let e = e_lo + f * (e_hi - e_lo);
        let v = v_lo + f * (v_hi - v_lo);
        writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            map_x(e),
            SIZE - MARGIN + 20.0,
            label(e)
        )
        .unwrap();
        writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{}</text>",
            MARGIN - 8.0,
            map_y(v) + 4.0,
            label(v)
        )
        .unwrap();
    }
    let mut attr = String::new();
    for r in rows {
        if !attr.is_empty() {
            attr.push(' ');
        }
        write!(attr, "{},{}", map_x(r.epsilon), map_y(r.v_eps)).unwrap();
    }
    writeln!(
        out,
        "<polyline points=\"{attr}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>"
    )
    .unwrap();
    for r in rows {
        writeln!(
            out,
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"#d62728\"/>",
            map_x(r.epsilon),
            map_y(r.v_eps)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Serialize)]
pub struct SweepRecord<'a> {
    pub amplitude: f64,
    pub force: f64,
    pub tol: f64,
    pub rows: &'a [AsymptoticSpeedResult],
}

/// Sweep outputs mirror the run outputs: data, picture, manifest.
pub fn emit_sweep(record: &SweepRecord, dir: &Path) -> IoResult<()> {
    ensure_writable(dir)?;
    let mut json = serde_json::to_string_pretty(record).expect("sweep serializes");
    json.push('\n');
    let files: Vec<(&str, Vec<u8>)> = vec![
        ("sweep.json", json.into_bytes()),
        ("sweep.csv", sweep_csv(record.rows).into_bytes()),
        ("sweep.svg", sweep_svg(record.rows).into_bytes()),
    ];
    for (name, bytes) in &files {
        write_file(dir, name, bytes)?;
    }
    let mut manifest = RunManifest {
        config_sha256: sha256_hex(&files[0].1),
        seed: 0,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_ms: now_ms(),
        finished_unix_ms: 0,
        files: Vec::new(),
    };
    for (name, bytes) in &files {
        manifest.files.push(FileRecord {
            name: (*name).to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
    }
    manifest.finished_unix_ms = now_ms();
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_file(dir, "manifest.json", text.as_bytes())?;
    Ok(())
}
