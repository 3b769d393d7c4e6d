//! On-disk interchange format: a JSON manifest next to a raw binary payload.
//!
//! `name.json` describes the content and lists named sections of
//! `name.bin`. Complex numbers are little-endian `f64` pairs `(re, im)`,
//! matrices row-major, integers little-endian `u32`, outcomes one byte per
//! bit. Section layout per kind:
//!
//! | section             | content                                                  |
//! |---------------------|----------------------------------------------------------|
//! | `unitaries`         | local settings: `N_U × N` row-major 2×2 complex matrices |
//! | `gates_per_setting` | shallow settings: one `u32` gate count per setting       |
//! | `gate_sites`        | shallow: per gate, `u32` arity then the `u32` sites      |
//! | `gate_matrices`     | shallow: gate matrices (2×2 or 4×4) in gate order        |
//! | `outcomes`          | groups: `N_U × N_M × N` bytes                            |
//! | `superoperator`     | channels: `4^N × 4^N` complex                            |
//! | `values`            | results: per row `value, σ, N_U, N_M, N_B` as `f64`      |

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{c, Mat2, Mat4};
use crate::shallow::{CircuitEnsemble, DenseChannel};
use crate::types::{
    ComputationalBasisSetting, Gate, LocalUnitarySetting, MeasurementData, MeasurementGroup, MeasurementSetting,
    SettingKind, ShallowCircuitSetting,
};
use crate::{Error, Result, C64};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileKind {
    Settings,
    Group,
    Channel,
    Result,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub offset: u64,
    pub length: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub kind: FileKind,
    pub n_qubits: usize,
    #[serde(default)]
    pub n_settings: usize,
    #[serde(default)]
    pub n_shots: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting_kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_circuits: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quantities: Vec<String>,
    pub endianness: String,
    pub payload: String,
    pub sections: Vec<Section>,
}

/// One row of an estimation result.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub quantity: String,
    pub value: f64,
    /// One standard error; `None` when not computed.
    pub sigma: Option<f64>,
    pub n_u: usize,
    pub n_m: usize,
    pub n_b: usize,
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path_str(path), source }
}

fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::Corrupt { path: path_str(path), reason: reason.into() }
}

/// Payload path belonging to a manifest path.
pub fn payload_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

#[derive(Default)]
struct PayloadWriter {
    bytes: Vec<u8>,
    sections: Vec<Section>,
}

impl PayloadWriter {
    fn section(&mut self, name: &str, data: Vec<u8>) {
        self.sections.push(Section {
            name: name.to_string(),
            offset: self.bytes.len() as u64,
            length: data.len() as u64,
        });
        self.bytes.extend(data);
    }
}

fn push_complex(out: &mut Vec<u8>, z: C64) {
    out.extend_from_slice(&z.re.to_le_bytes());
    out.extend_from_slice(&z.im.to_le_bytes());
}

fn push_matrix<'a>(out: &mut Vec<u8>, rows: usize, cols: usize, at: impl Fn(usize, usize) -> &'a C64) {
    for i in 0..rows {
        for j in 0..cols {
            push_complex(out, *at(i, j));
        }
    }
}

struct Reader<'a> {
    path: &'a Path,
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(corrupt(self.path, "section shorter than its declared content"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn complex(&mut self) -> Result<C64> {
        Ok(c(self.f64()?, self.f64()?))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(corrupt(self.path, "section longer than its declared content"));
        }
        Ok(())
    }
}

fn write_files(path: &Path, mut manifest: Manifest, payload: PayloadWriter) -> Result<()> {
    let bin = payload_path(path);
    manifest.payload = bin
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| Error::InvalidInput(format!("{} has no file name", path.display())))?;
    manifest.sections = payload.sections;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(&bin, &payload.bytes).map_err(io_err(&bin))?;
    fs::write(path, json + "\n").map_err(io_err(path))?;
    Ok(())
}

struct Loaded {
    manifest: Manifest,
    payload: Vec<u8>,
}

impl Loaded {
    fn section<'a>(&'a self, path: &'a Path, name: &str) -> Result<Reader<'a>> {
        let s = self
            .manifest
            .sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| corrupt(path, format!("missing section `{name}`")))?;
        let (start, len) = (s.offset as usize, s.length as usize);
        Ok(Reader { path, data: &self.payload[start..start + len], pos: 0 })
    }
}

fn load(path: &Path, expected: FileKind) -> Result<Loaded> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| corrupt(path, format!("manifest does not parse: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(corrupt(path, format!("unsupported format_version {}", manifest.format_version)));
    }
    if manifest.kind != expected {
        return Err(corrupt(path, format!("expected a {expected:?} file, found {:?}", manifest.kind)));
    }
    if manifest.endianness != "little" {
        return Err(corrupt(path, format!("unsupported endianness `{}`", manifest.endianness)));
    }
    let bin = path
        .parent()
        .map(|d| d.join(&manifest.payload))
        .unwrap_or_else(|| PathBuf::from(&manifest.payload));
    let payload = fs::read(&bin).map_err(io_err(&bin))?;
    let mut expected_offset = 0u64;
    for s in &manifest.sections {
        if s.offset != expected_offset {
            return Err(corrupt(path, format!("section `{}` is not contiguous", s.name)));
        }
        expected_offset += s.length;
    }
    if expected_offset != payload.len() as u64 {
        return Err(corrupt(
            path,
            format!("payload has {} bytes, sections declare {}", payload.len(), expected_offset),
        ));
    }
    Ok(Loaded { manifest, payload })
}

fn uniform_kind(settings: &[&MeasurementSetting]) -> Result<(SettingKind, Option<usize>)> {
    let first = settings.first().ok_or_else(|| Error::InvalidInput("no settings to write".into()))?;
    let kind = first.kind();
    if settings.iter().any(|s| s.kind() != kind) {
        return Err(Error::InvalidInput("all settings of a file must have the same kind".into()));
    }
    let depth = match first {
        MeasurementSetting::Shallow(s) => Some(s.depth()),
        _ => None,
    };
    if let Some(d) = depth {
        if settings.iter().any(|s| matches!(s, MeasurementSetting::Shallow(x) if x.depth() != d)) {
            return Err(Error::InvalidInput("all shallow settings of a file must have the same depth".into()));
        }
    }
    Ok((kind, depth))
}

fn encode_settings(settings: &[&MeasurementSetting], out: &mut PayloadWriter) {
    match settings[0].kind() {
        SettingKind::Local => {
            let mut bytes = Vec::new();
            for s in settings {
                if let MeasurementSetting::Local(l) = s {
                    for u in l.unitaries() {
                        push_matrix(&mut bytes, 2, 2, |i, j| &u[(i, j)]);
                    }
                }
            }
            out.section("unitaries", bytes);
        }
        SettingKind::Computational => {}
        SettingKind::Shallow => {
            let (mut counts, mut sites, mut mats) = (Vec::new(), Vec::new(), Vec::new());
            for s in settings {
                if let MeasurementSetting::Shallow(sh) = s {
                    counts.extend_from_slice(&(sh.gates().len() as u32).to_le_bytes());
                    for g in sh.gates() {
                        let gs = g.sites();
                        sites.extend_from_slice(&(gs.len() as u32).to_le_bytes());
                        for site in gs {
                            sites.extend_from_slice(&(site as u32).to_le_bytes());
                        }
                        match g {
                            Gate::Single { unitary, .. } => push_matrix(&mut mats, 2, 2, |i, j| &unitary[(i, j)]),
                            Gate::Two { unitary, .. } => push_matrix(&mut mats, 4, 4, |i, j| &unitary[(i, j)]),
                        }
                    }
                }
            }
            out.section("gates_per_setting", counts);
            out.section("gate_sites", sites);
            out.section("gate_matrices", mats);
        }
    }
}

fn decode_settings(path: &Path, loaded: &Loaded) -> Result<Vec<MeasurementSetting>> {
    let m = &loaded.manifest;
    let n = m.n_qubits;
    if n == 0 || m.n_settings == 0 {
        return Err(corrupt(path, "file declares no qubits or no settings"));
    }
    let bad = |e: Error| corrupt(path, e.to_string());
    let kind = m.setting_kind.as_deref().ok_or_else(|| corrupt(path, "missing setting_kind"))?;
    match kind {
        "local" => {
            let mut r = loaded.section(path, "unitaries")?;
            let mut out = Vec::with_capacity(m.n_settings);
            for _ in 0..m.n_settings {
                let mut us = Vec::with_capacity(n);
                for _ in 0..n {
                    let v = [r.complex()?, r.complex()?, r.complex()?, r.complex()?];
                    us.push(Mat2::new(v[0], v[1], v[2], v[3]));
                }
                out.push(LocalUnitarySetting::new(us).map_err(bad)?.into());
            }
            r.finish()?;
            Ok(out)
        }
        "computational" => {
            let s: MeasurementSetting = ComputationalBasisSetting::new(n).map_err(bad)?.into();
            Ok(vec![s; m.n_settings])
        }
        "shallow" => {
            let depth = m.depth.ok_or_else(|| corrupt(path, "shallow settings need a depth"))?;
            let mut counts = loaded.section(path, "gates_per_setting")?;
            let mut sites = loaded.section(path, "gate_sites")?;
            let mut mats = loaded.section(path, "gate_matrices")?;
            let mut out = Vec::with_capacity(m.n_settings);
            for _ in 0..m.n_settings {
                let n_gates = counts.u32()? as usize;
                let mut gates = Vec::with_capacity(n_gates);
                for _ in 0..n_gates {
                    let gate = match sites.u32()? {
                        1 => {
                            let site = sites.u32()? as usize;
                            let v: Vec<C64> = (0..4).map(|_| mats.complex()).collect::<Result<_>>()?;
                            Gate::Single { site, unitary: Mat2::from_row_slice(&v) }
                        }
                        2 => {
                            let a = sites.u32()? as usize;
                            let b = sites.u32()? as usize;
                            let v: Vec<C64> = (0..16).map(|_| mats.complex()).collect::<Result<_>>()?;
                            Gate::Two { sites: (a, b), unitary: Mat4::from_row_slice(&v) }
                        }
                        k => return Err(corrupt(path, format!("gate arity {k}"))),
                    };
                    gates.push(gate);
                }
                out.push(ShallowCircuitSetting::new(n, depth, gates).map_err(bad)?.into());
            }
            counts.finish()?;
            sites.finish()?;
            mats.finish()?;
            Ok(out)
        }
        other => Err(corrupt(path, format!("unknown setting_kind `{other}`"))),
    }
}

fn base_manifest(kind: FileKind, n_qubits: usize) -> Manifest {
    Manifest {
        format_version: FORMAT_VERSION,
        kind,
        n_qubits,
        n_settings: 0,
        n_shots: 0,
        setting_kind: None,
        depth: None,
        ensemble: None,
        n_circuits: None,
        quantities: Vec::new(),
        endianness: "little".into(),
        payload: String::new(),
        sections: Vec::new(),
    }
}

fn settings_manifest(kind: FileKind, settings: &[&MeasurementSetting]) -> Result<(Manifest, PayloadWriter)> {
    let (sk, depth) = uniform_kind(settings)?;
    let n = settings[0].n_qubits();
    if settings.iter().any(|s| s.n_qubits() != n) {
        return Err(Error::SizeMismatch("settings act on different numbers of qubits".into()));
    }
    let mut manifest = base_manifest(kind, n);
    manifest.n_settings = settings.len();
    manifest.setting_kind = Some(sk.as_str().to_string());
    manifest.depth = depth;
    let mut payload = PayloadWriter::default();
    encode_settings(settings, &mut payload);
    Ok((manifest, payload))
}

/// Writes `settings` (all of one kind) to the manifest `path` and its payload.
pub fn write_settings(path: &Path, settings: &[MeasurementSetting]) -> Result<()> {
    let refs: Vec<&MeasurementSetting> = settings.iter().collect();
    let (manifest, payload) = settings_manifest(FileKind::Settings, &refs)?;
    write_files(path, manifest, payload)
}

pub fn read_settings(path: &Path) -> Result<Vec<MeasurementSetting>> {
    let loaded = load(path, FileKind::Settings)?;
    decode_settings(path, &loaded)
}

/// Writes a group with the same number of shots for every setting.
pub fn write_group(path: &Path, group: &MeasurementGroup) -> Result<()> {
    let n_shots = group
        .uniform_shots()
        .ok_or_else(|| Error::InvalidInput("group files need the same number of shots per setting".into()))?;
    let refs: Vec<&MeasurementSetting> = group.settings().collect();
    let (mut manifest, mut payload) = settings_manifest(FileKind::Group, &refs)?;
    manifest.n_shots = n_shots;
    let mut outcomes = Vec::with_capacity(group.total_shots() * group.n_qubits());
    for e in group.entries() {
        outcomes.extend_from_slice(e.outcomes_flat());
    }
    payload.section("outcomes", outcomes);
    write_files(path, manifest, payload)
}

pub fn read_group(path: &Path) -> Result<MeasurementGroup> {
    let loaded = load(path, FileKind::Group)?;
    let settings = decode_settings(path, &loaded)?;
    let m = &loaded.manifest;
    let mut r = loaded.section(path, "outcomes")?;
    let per = m.n_shots * m.n_qubits;
    let mut entries = Vec::with_capacity(settings.len());
    for s in settings {
        let bytes = r.take(per)?.to_vec();
        if bytes.iter().any(|&b| b > 1) {
            return Err(corrupt(path, "outcome byte other than 0 or 1"));
        }
        entries.push(MeasurementData::from_flat(s, m.n_shots, bytes).map_err(|e| corrupt(path, e.to_string()))?);
    }
    r.finish()?;
    MeasurementGroup::new(entries).map_err(|e| corrupt(path, e.to_string()))
}

pub fn write_channel(path: &Path, channel: &DenseChannel) -> Result<()> {
    let mut manifest = base_manifest(FileKind::Channel, channel.n_qubits());
    let (name, depth) = match channel.ensemble() {
        CircuitEnsemble::Brickwork { depth, .. } => ("brickwork", depth),
        CircuitEnsemble::LocalHaar { .. } => ("local_haar", 1),
    };
    manifest.ensemble = Some(name.into());
    manifest.depth = Some(depth);
    manifest.n_circuits = Some(channel.n_circuits());
    let s = channel.superoperator();
    let mut bytes = Vec::with_capacity(s.len() * 16);
    push_matrix(&mut bytes, s.nrows(), s.ncols(), |i, j| &s[(i, j)]);
    let mut payload = PayloadWriter::default();
    payload.section("superoperator", bytes);
    write_files(path, manifest, payload)
}

pub fn read_channel(path: &Path) -> Result<DenseChannel> {
    let loaded = load(path, FileKind::Channel)?;
    let m = &loaded.manifest;
    let n = m.n_qubits;
    let depth = m.depth.ok_or_else(|| corrupt(path, "missing depth"))?;
    let ensemble = match m.ensemble.as_deref() {
        Some("brickwork") => CircuitEnsemble::Brickwork { n_qubits: n, depth },
        Some("local_haar") => CircuitEnsemble::LocalHaar { n_qubits: n },
        other => return Err(corrupt(path, format!("unknown ensemble {other:?}"))),
    };
    if n == 0 || n > crate::shallow::SHALLOW_LIMIT {
        return Err(corrupt(path, format!("channel on {n} qubits")));
    }
    let d2 = 1usize << (2 * n);
    let mut r = loaded.section(path, "superoperator")?;
    let mut v = Vec::with_capacity(d2 * d2);
    for _ in 0..d2 * d2 {
        v.push(r.complex()?);
    }
    r.finish()?;
    let s = DMatrix::from_row_slice(d2, d2, &v);
    DenseChannel::new(ensemble, s, m.n_circuits.unwrap_or(0)).map_err(|e| corrupt(path, e.to_string()))
}

pub fn write_results(path: &Path, n_qubits: usize, rows: &[ResultRow]) -> Result<()> {
    let mut manifest = base_manifest(FileKind::Result, n_qubits);
    manifest.quantities = rows.iter().map(|r| r.quantity.clone()).collect();
    let mut bytes = Vec::with_capacity(rows.len() * 40);
    for r in rows {
        for x in [r.value, r.sigma.unwrap_or(f64::NAN), r.n_u as f64, r.n_m as f64, r.n_b as f64] {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut payload = PayloadWriter::default();
    payload.section("values", bytes);
    write_files(path, manifest, payload)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let loaded = load(path, FileKind::Result)?;
    let mut r = loaded.section(path, "values")?;
    let mut rows = Vec::new();
    for q in &loaded.manifest.quantities {
        let v: Vec<f64> = (0..5).map(|_| r.f64()).collect::<Result<_>>()?;
        rows.push(ResultRow {
            quantity: q.clone(),
            value: v[0],
            sigma: (!v[1].is_nan()).then_some(v[1]),
            n_u: v[2] as usize,
            n_m: v[3] as usize,
            n_b: v[4] as usize,
        });
    }
    r.finish()?;
    Ok(rows)
}
