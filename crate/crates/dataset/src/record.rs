//! Dataset records and their two on-disk forms: JSON Lines (header line, then
//! one sample per line) and a binary columnar file for fast loading.

use crate::{Error, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use coldbend_core::geometry::compact::{decode_panel, encode_panel, CompactBoundary, Shape};
use coldbend_core::panel::PanelConfig;
use coldbend_core::shell::Material;
use coldbend_surrogate::Samples;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const DATASET_VERSION: u32 = 1;
const COLUMNAR_MAGIC: &[u8; 8] = b"CBDATA\0\0";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Simulated from the zero-twist initialization.
    Default,
    /// Simulated from a surrogate prediction.
    Enriched,
    /// Simulated from the mirror of another panel's equilibrium.
    Mirrored,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub p: [f64; 18],
    /// Interior controls in the canonical adapted frame (mm).
    pub shape: Shape,
    /// Aggregated stress (MPa).
    pub sigma: f64,
    /// Maximal element stress (MPa).
    pub sigma_true: f64,
    pub fit_residual: f64,
    pub provenance: Provenance,
    /// Simulated panel this record was derived from.
    pub source: u64,
    /// Symmetry element applied to the source panel; 0 is the panel itself.
    pub orbit: u8,
    /// For enriched panels, the panel whose prediction seeded the simulation.
    pub parent: Option<u64>,
    pub split: Split,
}

impl Sample {
    pub fn target(&self) -> [f64; 13] {
        let mut t = [0.0; 13];
        t[..12].copy_from_slice(&self.shape);
        t[12] = self.sigma;
        t
    }

    /// Rebuilds the patch from `(p, shape)` and re-extracts the interior
    /// controls; a consistent record maps to itself.
    pub fn reencode(&self) -> coldbend_core::Result<Shape> {
        let (b, patch) = decode_panel(&CompactBoundary { p: self.p }, &self.shape)?;
        Ok(encode_panel(&b, &patch)?.1)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub panels: usize,
    pub records: usize,
    pub train: usize,
    pub validation: usize,
    pub failed: usize,
    pub enriched_panels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: u32,
    pub length_unit: String,
    pub stress_unit: String,
    pub material: Material,
    pub panel: PanelConfig,
    pub seed: u64,
    pub split_seed: u64,
    pub validation_fraction: f64,
    pub counts: Counts,
}

impl DatasetHeader {
    pub fn new(panel: PanelConfig, seed: u64, split_seed: u64, validation_fraction: f64) -> Self {
        Self {
            version: DATASET_VERSION,
            length_unit: "mm".into(),
            stress_unit: "MPa".into(),
            material: panel.material,
            panel,
            seed,
            split_seed,
            validation_fraction,
            counts: Counts::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Recomputes the record counts from the samples; `failed` is kept.
    pub fn recount(&mut self) {
        let mut ids: Vec<u64> = self.samples.iter().map(|s| s.source).collect();
        ids.sort_unstable();
        ids.dedup();
        let mut enriched: Vec<u64> =
            self.samples.iter().filter(|s| s.provenance == Provenance::Enriched).map(|s| s.source).collect();
        enriched.sort_unstable();
        enriched.dedup();
        let c = &mut self.header.counts;
        c.panels = ids.len();
        c.records = self.samples.len();
        c.train = self.samples.iter().filter(|s| s.split == Split::Train).count();
        c.validation = c.records - c.train;
        c.enriched_panels = enriched.len();
    }

    /// Appends `other`, renumbering its panels after ours.
    pub fn merge(&mut self, other: Dataset) {
        let offset = self.next_panel_id();
        self.samples.extend(other.samples.into_iter().map(|mut s| {
            s.source += offset;
            s.parent = s.parent.map(|p| p + offset);
            s
        }));
        self.header.counts.failed += other.header.counts.failed;
        self.recount();
    }

    pub fn next_panel_id(&self) -> u64 {
        self.samples.iter().map(|s| s.source + 1).max().unwrap_or(0)
    }

    pub fn samples_of(&self, split: Split) -> Samples {
        let mut out = Samples::default();
        for s in self.samples.iter().filter(|s| s.split == split) {
            out.push(s.p, s.target());
        }
        out
    }

    pub fn sigma_true_of(&self, split: Split) -> Vec<f64> {
        self.samples.iter().filter(|s| s.split == split).map(|s| s.sigma_true).collect()
    }

    /// The simulated panels themselves (orbit element 0).
    pub fn panels(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(|s| s.orbit == 0)
    }

    pub fn write_jsonl<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let first = lines.next().ok_or_else(|| Error::Format("empty dataset file".into()))??;
        let header: DatasetHeader = serde_json::from_str(&first)?;
        check_header(&header)?;
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let s: Sample = serde_json::from_str(&line).map_err(|e| Error::Format(format!("record {}: {e}", i + 1)))?;
            samples.push(s);
        }
        Ok(Self { header, samples })
    }

    pub fn write_columnar<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let header = serde_json::to_vec(&self.header)?;
        w.write_all(COLUMNAR_MAGIC)?;
        w.write_u32::<LittleEndian>(DATASET_VERSION)?;
        w.write_u64::<LittleEndian>(header.len() as u64)?;
        w.write_all(&header)?;
        w.write_u64::<LittleEndian>(self.samples.len() as u64)?;
        let f64s = |w: &mut BufWriter<W>, f: &dyn Fn(&Sample) -> &[f64]| -> Result<()> {
            for s in &self.samples {
                for &x in f(s) {
                    w.write_f64::<LittleEndian>(x)?;
                }
            }
            Ok(())
        };
        f64s(&mut w, &|s| &s.p)?;
        f64s(&mut w, &|s| &s.shape)?;
        f64s(&mut w, &|s| std::slice::from_ref(&s.sigma))?;
        f64s(&mut w, &|s| std::slice::from_ref(&s.sigma_true))?;
        f64s(&mut w, &|s| std::slice::from_ref(&s.fit_residual))?;
        for s in &self.samples {
            w.write_u64::<LittleEndian>(s.source)?;
        }
        for s in &self.samples {
            // u64::MAX marks "no parent"
            w.write_u64::<LittleEndian>(s.parent.unwrap_or(u64::MAX))?;
        }
        for s in &self.samples {
            let provenance = match s.provenance {
                Provenance::Default => 0,
                Provenance::Enriched => 1,
                Provenance::Mirrored => 2,
            };
            let split = match s.split {
                Split::Train => 0,
                Split::Validation => 1,
            };
            w.write_all(&[s.orbit, provenance, split])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_columnar<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let eof = |e: std::io::Error| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format("columnar dataset is truncated".into())
            } else {
                Error::Io(e)
            }
        };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(eof)?;
        if &magic != COLUMNAR_MAGIC {
            return Err(Error::Format("not a columnar dataset file".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(eof)?;
        if version != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let len = r.read_u64::<LittleEndian>().map_err(eof)? as usize;
        if len > 1 << 24 {
            return Err(Error::Format("header length is implausible".into()));
        }
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(eof)?;
        let header: DatasetHeader = serde_json::from_slice(&buf)?;
        check_header(&header)?;
        let n = r.read_u64::<LittleEndian>().map_err(eof)? as usize;
        if n > 1 << 32 {
            return Err(Error::Format("record count is implausible".into()));
        }
        let mut col = |width: usize| -> Result<Vec<f64>> {
            let mut v = vec![0.0; n * width];
            r.read_f64_into::<LittleEndian>(&mut v).map_err(eof)?;
            Ok(v)
        };
        let (p, shape, sigma, sigma_true, fit) = (col(18)?, col(12)?, col(1)?, col(1)?, col(1)?);
        let mut ids = vec![0u64; 2 * n];
        r.read_u64_into::<LittleEndian>(&mut ids).map_err(eof)?;
        let mut tags = vec![0u8; 3 * n];
        r.read_exact(&mut tags).map_err(eof)?;
        if r.read(&mut [0u8; 1])? != 0 {
            return Err(Error::Format("trailing bytes after the last column".into()));
        }
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let t = &tags[3 * i..3 * i + 3];
            let provenance = match t[1] {
                0 => Provenance::Default,
                1 => Provenance::Enriched,
                2 => Provenance::Mirrored,
                x => return Err(Error::Format(format!("record {i}: bad provenance tag {x}"))),
            };
            let split = match t[2] {
                0 => Split::Train,
                1 => Split::Validation,
                x => return Err(Error::Format(format!("record {i}: bad split tag {x}"))),
            };
            samples.push(Sample {
                p: p[18 * i..18 * i + 18].try_into().unwrap(),
                shape: shape[12 * i..12 * i + 12].try_into().unwrap(),
                sigma: sigma[i],
                sigma_true: sigma_true[i],
                fit_residual: fit[i],
                provenance,
                source: ids[i],
                orbit: t[0],
                parent: (ids[n + i] != u64::MAX).then_some(ids[n + i]),
                split,
            });
        }
        Ok(Self { header, samples })
    }

    /// Writes JSON Lines for `.jsonl` paths and the columnar form otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        if is_jsonl(path) {
            self.write_jsonl(f)
        } else {
            self.write_columnar(f)
        }
    }

    /// Reads either form, recognized by the columnar magic.
    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        let mut magic = [0u8; 8];
        let n = f.read(&mut magic)?;
        let f = std::fs::File::open(path)?;
        if n == 8 && &magic == COLUMNAR_MAGIC {
            Self::read_columnar(f)
        } else {
            Self::read_jsonl(f)
        }
    }

    /// SHA-256 of the JSON Lines form.
    pub fn checksum(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        hex::encode(Sha256::digest(&buf))
    }
}

fn is_jsonl(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "json"))
}

fn check_header(h: &DatasetHeader) -> Result<()> {
    if h.version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {}", h.version)));
    }
    if h.length_unit != "mm" || h.stress_unit != "MPa" {
        return Err(Error::Format(format!("dataset units {}/{} are not mm/MPa", h.length_unit, h.stress_unit)));
    }
    Ok(())
}
