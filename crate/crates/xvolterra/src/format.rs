//! Versioned JSON artifacts and waveform CSV.
//!
//! Every JSON file is an envelope `{format, version, config_hash, body}`.
//! Bulk complex data is base64 of little-endian f64 pairs `re, im`.

use std::io::Write;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use xvolterra_core::extract::ExtractionReport;
use xvolterra_core::kernel::{ArchiveMetadata, KernelGrid, KernelSetArchive};
use xvolterra_core::mixing::FrequencyIndex;
use xvolterra_core::plan::{Collision, PlanReport, SweepPlan};
use xvolterra_core::probe::{CaptureInfo, SpectralDataset};
use xvolterra_core::signal::Waveform;
use xvolterra_core::Complex64;

use crate::error::{Error, Result};

pub const FORMAT_MAJOR: u32 = 1;
pub const FORMAT_VERSION: &str = "1.0";

pub const PLAN_FORMAT: &str = "xvolterra-plan";
pub const DATASET_FORMAT: &str = "xvolterra-dataset";
pub const ARCHIVE_FORMAT: &str = "xvolterra-archive";
pub const ENUMERATION_FORMAT: &str = "xvolterra-enumeration";
pub const VALIDATION_FORMAT: &str = "xvolterra-validation";
pub const WAVEFORM_FORMAT: &str = "xvolterra-waveform";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub format: String,
    pub version: String,
    pub config_hash: String,
    pub body: T,
}

impl<T> Envelope<T> {
    pub fn new(format: &str, config_hash: &str, body: T) -> Self {
        Envelope {
            format: format.to_string(),
            version: FORMAT_VERSION.to_string(),
            config_hash: config_hash.to_string(),
            body,
        }
    }
}

fn check_version(path: &Path, version: &str) -> Result<()> {
    let major = version.split('.').next().and_then(|m| m.parse::<u32>().ok());
    if major != Some(FORMAT_MAJOR) {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            version: version.to_string(),
            supported: FORMAT_MAJOR,
        });
    }
    Ok(())
}

/// Write `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    // temporary files are created owner-only
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(tmp.path(), std::fs::Permissions::from_mode(0o644)).map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn encode_json<T: Serialize>(path: &Path, format: &str, config_hash: &str, body: &T, pretty: bool) -> Result<()> {
    let env = Envelope::new(format, config_hash, body);
    let encoded = if pretty {
        serde_json::to_vec_pretty(&env)
    } else {
        serde_json::to_vec(&env)
    };
    let mut bytes = encoded.map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Indented JSON, for small human-facing files.
pub fn write_json<T: Serialize>(path: &Path, format: &str, config_hash: &str, body: &T) -> Result<()> {
    encode_json(path, format, config_hash, body, true)
}

/// Single-line JSON, for bulk data.
pub fn write_json_compact<T: Serialize>(path: &Path, format: &str, config_hash: &str, body: &T) -> Result<()> {
    encode_json(path, format, config_hash, body, false)
}

pub fn read_json<T: DeserializeOwned>(path: &Path, format: &str) -> Result<Envelope<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let json_err = |source| Error::Json {
        path: path.to_path_buf(),
        source,
    };
    let raw: Envelope<serde_json::Value> = serde_json::from_str(&text).map_err(json_err)?;
    if raw.format != format {
        return Err(Error::WrongKind {
            path: path.to_path_buf(),
            expected: format.to_string(),
            found: raw.format,
        });
    }
    check_version(path, &raw.version)?;
    let body = serde_json::from_value(raw.body).map_err(json_err)?;
    Ok(Envelope {
        format: raw.format,
        version: raw.version,
        config_hash: raw.config_hash,
        body,
    })
}

pub fn encode_complex(values: &[Complex64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 16);
    for v in values {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    B64.encode(bytes)
}

pub fn decode_complex(text: &str) -> Result<Vec<Complex64>> {
    let bytes = B64.decode(text).map_err(|e| Error::Malformed(format!("base64: {e}")))?;
    if bytes.len() % 16 != 0 {
        return Err(Error::Malformed(format!(
            "complex array of {} bytes is not a whole number of re/im pairs",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect())
}

/// Collisions kept verbatim in a plan file; the rest are only counted.
pub const MAX_LISTED_COLLISIONS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanValidation {
    pub triplets_checked: usize,
    pub collision_count: usize,
    pub collisions: Vec<Collision>,
}

impl From<&PlanReport> for PlanValidation {
    fn from(r: &PlanReport) -> Self {
        PlanValidation {
            triplets_checked: r.triplets_checked,
            collision_count: r.collisions.len(),
            collisions: r.collisions.iter().take(MAX_LISTED_COLLISIONS).cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanBody {
    pub plan: SweepPlan,
    pub validation: PlanValidation,
}

/// One large-signal operating point: a triplet driven at one amplitude row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsopBlock {
    pub triplet: usize,
    pub row: usize,
    pub frequencies_hz: Vec<f64>,
    /// Peak tone amplitudes (V).
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    /// Mixing vectors, one per phasor.
    pub k: Vec<FrequencyIndex>,
    /// Output phasors, base64 re/im pairs in the order of `k`.
    #[serde(rename = "B")]
    pub b: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetBody {
    pub plan_id: String,
    pub tones: usize,
    pub capture: CaptureInfo,
    pub lsops: Vec<LsopBlock>,
}

impl DatasetBody {
    pub fn from_dataset(ds: &SpectralDataset, plan: &SweepPlan) -> Self {
        let lsops = ds
            .lsops()
            .map(|(&(triplet, row), phasors)| {
                let (k, b): (Vec<FrequencyIndex>, Vec<Complex64>) =
                    phasors.iter().map(|(k, b)| (k.clone(), *b)).unzip();
                let in_plan = triplet < plan.triplet_count() && row < plan.amplitudes.len();
                LsopBlock {
                    triplet,
                    row,
                    frequencies_hz: if in_plan { plan.triplet_hz(triplet) } else { Vec::new() },
                    v: if in_plan {
                        plan.amplitudes[row].clone()
                    } else {
                        Vec::new()
                    },
                    k,
                    b: encode_complex(&b),
                }
            })
            .collect();
        DatasetBody {
            plan_id: ds.plan_id.clone(),
            tones: ds.tones,
            capture: ds.capture.clone(),
            lsops,
        }
    }

    pub fn into_dataset(self) -> Result<SpectralDataset> {
        let mut ds = SpectralDataset::new(self.plan_id, self.tones, self.capture);
        for block in self.lsops {
            let b = decode_complex(&block.b)?;
            if b.len() != block.k.len() {
                return Err(Error::Malformed(format!(
                    "triplet {} row {}: {} indices but {} phasors",
                    block.triplet,
                    block.row,
                    block.k.len(),
                    b.len()
                )));
            }
            for (k, b) in block.k.iter().zip(b) {
                if k.tones() != self.tones {
                    return Err(Error::Malformed(format!(
                        "index {k} does not have {} tones",
                        self.tones
                    )));
                }
                ds.insert(block.triplet, block.row, k, b);
            }
        }
        Ok(ds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridBody {
    pub order: usize,
    /// Canonical argument tuples, flattened (`order` entries each).
    pub keys: Vec<i64>,
    pub counts: Vec<u32>,
    /// Accumulated sums, base64 re/im pairs; the stored value is `sum / count`.
    pub sums: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveBody {
    pub metadata: ArchiveMetadata,
    pub delta_f_hz: f64,
    pub lattice: Vec<i64>,
    pub grids: Vec<GridBody>,
    pub report: Option<ExtractionReport>,
}

impl ArchiveBody {
    pub fn from_archive(archive: &KernelSetArchive, report: Option<&ExtractionReport>) -> Self {
        let first = archive.grids().first();
        let grids = archive
            .grids()
            .iter()
            .map(|g| {
                let mut keys = Vec::new();
                let mut counts = Vec::new();
                let mut sums = Vec::new();
                for (k, sum, count) in g.accumulated() {
                    keys.extend_from_slice(k);
                    counts.push(count);
                    sums.push(sum);
                }
                GridBody {
                    order: g.order(),
                    keys,
                    counts,
                    sums: encode_complex(&sums),
                }
            })
            .collect();
        ArchiveBody {
            metadata: archive.metadata.clone(),
            delta_f_hz: first.map_or(0.0, KernelGrid::delta_f_hz),
            lattice: first.map_or_else(Vec::new, |g| g.lattice().to_vec()),
            grids,
            report: report.cloned(),
        }
    }

    /// Rebuild and freeze the archive; frozen tables match the writer's exactly.
    pub fn into_archive(self) -> Result<(KernelSetArchive, Option<ExtractionReport>)> {
        let mut grids = Vec::with_capacity(self.grids.len());
        for (i, body) in self.grids.iter().enumerate() {
            if body.order != i + 1 {
                return Err(Error::Malformed(format!(
                    "grid {i} has order {}, expected {}",
                    body.order,
                    i + 1
                )));
            }
            let sums = decode_complex(&body.sums)?;
            if body.keys.len() != body.order * sums.len() || body.counts.len() != sums.len() {
                return Err(Error::Malformed(format!(
                    "order-{} grid: {} keys, {} counts, {} sums",
                    body.order,
                    body.keys.len(),
                    body.counts.len(),
                    sums.len()
                )));
            }
            let mut g = KernelGrid::new(body.order, self.lattice.clone(), self.delta_f_hz);
            for ((key, sum), &count) in body.keys.chunks_exact(body.order.max(1)).zip(&sums).zip(&body.counts) {
                g.insert_accumulated(key, *sum, count)?;
            }
            grids.push(g);
        }
        let mut archive = KernelSetArchive::new(self.metadata, grids);
        archive.freeze()?;
        Ok((archive, self.report))
    }
}

pub fn write_plan(path: &Path, config_hash: &str, plan: &SweepPlan, report: &PlanReport) -> Result<()> {
    let body = PlanBody {
        plan: plan.clone(),
        validation: report.into(),
    };
    write_json(path, PLAN_FORMAT, config_hash, &body)
}

pub fn read_plan(path: &Path) -> Result<SweepPlan> {
    Ok(read_json::<PlanBody>(path, PLAN_FORMAT)?.body.plan)
}

pub fn write_dataset(path: &Path, config_hash: &str, ds: &SpectralDataset, plan: &SweepPlan) -> Result<()> {
    write_json_compact(path, DATASET_FORMAT, config_hash, &DatasetBody::from_dataset(ds, plan))
}

pub fn read_dataset(path: &Path) -> Result<SpectralDataset> {
    read_json::<DatasetBody>(path, DATASET_FORMAT)?.body.into_dataset()
}

pub fn write_archive(
    path: &Path,
    config_hash: &str,
    archive: &KernelSetArchive,
    report: Option<&ExtractionReport>,
) -> Result<()> {
    write_json_compact(
        path,
        ARCHIVE_FORMAT,
        config_hash,
        &ArchiveBody::from_archive(archive, report),
    )
}

pub fn read_archive(path: &Path) -> Result<(KernelSetArchive, Option<ExtractionReport>)> {
    read_json::<ArchiveBody>(path, ARCHIVE_FORMAT)?.body.into_archive()
}

/// Columns `t, y1..yN, y_total` after a `#` header line carrying the
/// format version and config hash.
pub fn write_waveform_csv(path: &Path, config_hash: &str, orders: &[Waveform], total: &Waveform) -> Result<()> {
    let mut buf =
        format!("# format={WAVEFORM_FORMAT} version={FORMAT_VERSION} config_hash={config_hash}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header = vec!["t".to_string()];
        header.extend((1..=orders.len()).map(|n| format!("y{n}")));
        header.push("y_total".into());
        w.write_record(&header)?;
        for i in 0..total.len() {
            let mut row = vec![format!("{:e}", total.time(i))];
            row.extend(orders.iter().map(|o| format!("{:e}", o.samples[i])));
            row.push(format!("{:e}", total.samples[i]));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    write_atomic(path, &buf)
}

/// Read a waveform CSV back as `(header, columns)`.
pub fn read_waveform_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for rec in r.records() {
        let rec = rec?;
        for (c, field) in cols.iter_mut().zip(rec.iter()) {
            c.push(
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Malformed(format!("{}: {field}: {e}", path.display())))?,
            );
        }
    }
    Ok((header, cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_round_trip_is_exact() {
        let v = vec![
            Complex64::new(1.0 / 3.0, -0.0),
            Complex64::new(f64::MIN_POSITIVE, 1e300),
            Complex64::new(-2.5e-17, 7.0),
        ];
        let back = decode_complex(&encode_complex(&v)).unwrap();
        for (a, b) in v.iter().zip(&back) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn ragged_complex_data_is_rejected() {
        let text = B64.encode([0u8; 20]);
        assert!(matches!(decode_complex(&text), Err(Error::Malformed(_))));
    }

    #[test]
    fn version_major_checked() {
        let p = Path::new("x.json");
        assert!(check_version(p, "1.7").is_ok());
        assert!(check_version(p, "2.0").is_err());
        assert!(check_version(p, "one").is_err());
    }
}
