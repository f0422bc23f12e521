//! Feature-file formats.
//!
//! AVFD (little-endian): `"AVFD"`, version u16, then u32 `n`, `audio_dim`,
//! `visual_dim`, `n_classes`, followed by `n` records of
//! `[audio_dim × f32][visual_dim × f32][label u32]`.
//!
//! CSV: header `pair_id,label,a_0..a_{A-1},v_0..v_{V-1}`, one pair per row.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::dataset::{Dataset, DatasetMeta, PairedBatch};
use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const AVFD_MAGIC: &[u8; 4] = b"AVFD";
pub const AVFD_VERSION: u16 = 1;
const AVFD_HEADER_LEN: usize = 4 + 2 + 4 * 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Binary,
    Csv,
}

impl FromStr for FeatureFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "avfd" => Ok(FeatureFormat::Binary),
            "csv" => Ok(FeatureFormat::Csv),
            _ => Err(Error::config(format!("unknown feature format '{s}'"))),
        }
    }
}

impl FeatureFormat {
    /// `.csv` means CSV; everything else is treated as AVFD.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => FeatureFormat::Csv,
            _ => FeatureFormat::Binary,
        }
    }
}

pub fn write_avfd(data: &Dataset) -> Vec<u8> {
    let m = &data.meta;
    let mut out =
        Vec::with_capacity(AVFD_HEADER_LEN + m.n_pairs * ((m.audio_dim + m.visual_dim) * 4 + 4));
    out.extend_from_slice(AVFD_MAGIC);
    out.extend_from_slice(&AVFD_VERSION.to_le_bytes());
    for v in [m.n_pairs, m.audio_dim, m.visual_dim, m.n_classes] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for i in 0..data.len() {
        for &x in data.pairs.audio.row(i).iter().chain(data.pairs.visual.row(i)) {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
        out.extend_from_slice(&(data.pairs.labels[i] as u32).to_le_bytes());
    }
    out
}

fn u32_at(buf: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(buf[at..at + 4].try_into().unwrap())
}

pub fn read_avfd(buf: &[u8]) -> Result<Dataset> {
    if buf.len() < AVFD_HEADER_LEN {
        return Err(Error::Format {
            offset: buf.len() as u64,
            message: format!("header truncated: {} of {AVFD_HEADER_LEN} bytes", buf.len()),
        });
    }
    if &buf[0..4] != AVFD_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {:?}, expected \"AVFD\"", &buf[0..4]),
        });
    }
    let version = u16::from_le_bytes([buf[4], buf[5]]);
    if version != AVFD_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: AVFD_VERSION,
        });
    }
    let n = u32_at(buf, 6) as usize;
    let audio_dim = u32_at(buf, 10) as usize;
    let visual_dim = u32_at(buf, 14) as usize;
    let n_classes = u32_at(buf, 18) as usize;
    let meta = DatasetMeta {
        n_pairs: n,
        audio_dim,
        visual_dim,
        n_classes,
        class_names: None,
    };
    meta.validate().map_err(|e| Error::Format {
        offset: 6,
        message: format!("invalid header: {e}"),
    })?;
    let rec_len = (audio_dim + visual_dim) * 4 + 4;
    let body = &buf[AVFD_HEADER_LEN..];
    let complete = body.len() / rec_len;
    if complete < n {
        return Err(Error::Data {
            record: complete,
            message: format!("file truncated: header declares {n} records, found {complete}"),
        });
    }
    if body.len() != n * rec_len {
        return Err(Error::Format {
            offset: (AVFD_HEADER_LEN + n * rec_len) as u64,
            message: "trailing bytes after last record".into(),
        });
    }
    let mut audio = Vec::with_capacity(n * audio_dim);
    let mut visual = Vec::with_capacity(n * visual_dim);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let rec = &body[r * rec_len..(r + 1) * rec_len];
        let mut floats = rec[..rec_len - 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
        for (k, x) in floats.by_ref().enumerate() {
            if !x.is_finite() {
                return Err(Error::Data {
                    record: r,
                    message: format!("non-finite feature value at column {k}"),
                });
            }
            if k < audio_dim {
                audio.push(x);
            } else {
                visual.push(x);
            }
        }
        let label = u32_at(rec, rec_len - 4) as usize;
        if label >= n_classes {
            return Err(Error::Data {
                record: r,
                message: format!("label {label} out of range for {n_classes} classes"),
            });
        }
        labels.push(label);
    }
    Dataset::new(
        meta,
        PairedBatch::new(
            Matrix::from_vec(n, audio_dim, audio)?,
            Matrix::from_vec(n, visual_dim, visual)?,
            labels,
        )?,
    )
}

pub fn write_csv(data: &Dataset) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["pair_id".to_string(), "label".to_string()];
    header.extend((0..data.meta.audio_dim).map(|i| format!("a_{i}")));
    header.extend((0..data.meta.visual_dim).map(|i| format!("v_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..data.len() {
        let mut rec = vec![
            data.pairs.indices[i].to_string(),
            data.pairs.labels[i].to_string(),
        ];
        rec.extend(
            data.pairs
                .audio
                .row(i)
                .iter()
                .chain(data.pairs.visual.row(i))
                .map(|&x| (x as f32).to_string()),
        );
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn csv_err(e: csv::Error) -> Error {
    let record = e
        .position()
        .map_or(0, |p| p.record().saturating_sub(1) as usize);
    Error::Data {
        record,
        message: e.to_string(),
    }
}

/// The class count is taken as one more than the largest label seen.
pub fn read_csv(buf: &[u8]) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_reader(buf);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 4 || cols[0] != "pair_id" || cols[1] != "label" {
        return Err(Error::Format {
            offset: 0,
            message: "CSV header must start with pair_id,label".into(),
        });
    }
    let audio_dim = cols[2..].iter().take_while(|c| c.starts_with("a_")).count();
    let visual_dim = cols.len() - 2 - audio_dim;
    for (k, c) in cols[2..2 + audio_dim].iter().enumerate() {
        if *c != format!("a_{k}") {
            return Err(Error::Format { offset: 0, message: format!("unexpected column '{c}'") });
        }
    }
    for (k, c) in cols[2 + audio_dim..].iter().enumerate() {
        if *c != format!("v_{k}") {
            return Err(Error::Format { offset: 0, message: format!("unexpected column '{c}'") });
        }
    }
    let mut audio = Vec::new();
    let mut visual = Vec::new();
    let mut labels = Vec::new();
    let mut indices = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data { record: r, message: e.to_string() })?;
        if rec.len() != cols.len() {
            return Err(Error::Data {
                record: r,
                message: format!("{} fields, expected {}", rec.len(), cols.len()),
            });
        }
        let int = |k: usize| -> Result<usize> {
            rec[k].trim().parse().map_err(|_| Error::Data {
                record: r,
                message: format!("column {} is not a non-negative integer: '{}'", cols[k], &rec[k]),
            })
        };
        indices.push(int(0)?);
        labels.push(int(1)?);
        for k in 2..cols.len() {
            let x: f64 = rec[k].trim().parse::<f32>().map_err(|_| Error::Data {
                record: r,
                message: format!("column {} is not a number: '{}'", cols[k], &rec[k]),
            })? as f64;
            if !x.is_finite() {
                return Err(Error::Data {
                    record: r,
                    message: format!("non-finite value in column {}", cols[k]),
                });
            }
            if k < 2 + audio_dim {
                audio.push(x);
            } else {
                visual.push(x);
            }
        }
    }
    let n = labels.len();
    let n_classes = labels.iter().max().map_or(0, |m| m + 1).max(2);
    let mut pairs = PairedBatch::new(
        Matrix::from_vec(n, audio_dim, audio)?,
        Matrix::from_vec(n, visual_dim, visual)?,
        labels,
    )?;
    pairs.indices = indices;
    Dataset::new(
        DatasetMeta {
            n_pairs: n,
            audio_dim,
            visual_dim,
            n_classes,
            class_names: None,
        },
        pairs,
    )
}

pub fn load_features(path: impl AsRef<Path>, format: FeatureFormat) -> Result<Dataset> {
    let buf = fs::read(path)?;
    match format {
        FeatureFormat::Binary => read_avfd(&buf),
        FeatureFormat::Csv => read_csv(&buf),
    }
}

pub fn save_features(data: &Dataset, path: impl AsRef<Path>, format: FeatureFormat) -> Result<()> {
    let bytes = match format {
        FeatureFormat::Binary => write_avfd(data),
        FeatureFormat::Csv => write_csv(data)?,
    };
    fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticSpec};

    fn small() -> Dataset {
        generate_synthetic(&SyntheticSpec {
            n_classes: 3,
            pairs_per_class: 4,
            audio_dim: 5,
            visual_dim: 6,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn avfd_roundtrip() {
        let d = small();
        assert_eq!(read_avfd(&write_avfd(&d)).unwrap(), d);
    }

    #[test]
    fn csv_roundtrip() {
        let d = small();
        let bytes = write_csv(&d).unwrap();
        let header = std::str::from_utf8(&bytes).unwrap().lines().next().unwrap().to_string();
        assert!(header.starts_with("pair_id,label,a_0,a_1,"));
        assert!(header.ends_with(",v_4,v_5"));
        assert_eq!(read_csv(&bytes).unwrap(), d);
    }

    #[test]
    fn avfd_truncated_record() {
        let d = generate_synthetic(&SyntheticSpec {
            n_classes: 5,
            pairs_per_class: 1,
            audio_dim: 3,
            visual_dim: 2,
            ..Default::default()
        })
        .unwrap();
        let bytes = write_avfd(&d);
        let rec_len = (3 + 2) * 4 + 4;
        let cut = &bytes[..bytes.len() - rec_len];
        match read_avfd(cut).unwrap_err() {
            Error::Data { record, .. } => assert_eq!(record, 4),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn avfd_label_out_of_range() {
        let d = small();
        let mut bytes = write_avfd(&d);
        let rec_len = (5 + 6) * 4 + 4;
        // Last field of record 2 is its label; set it to n_classes.
        let at = AVFD_HEADER_LEN + 3 * rec_len - 4;
        bytes[at..at + 4].copy_from_slice(&3u32.to_le_bytes());
        match read_avfd(&bytes).unwrap_err() {
            Error::Data { record, message } => {
                assert_eq!(record, 2);
                assert!(message.contains("label 3"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn avfd_bad_magic_and_version() {
        let mut bytes = write_avfd(&small());
        bytes[5] = 9;
        assert!(matches!(read_avfd(&bytes), Err(Error::UnsupportedVersion { .. })));
        bytes[0] = b'X';
        assert!(matches!(read_avfd(&bytes), Err(Error::Format { offset: 0, .. })));
        assert!(matches!(read_avfd(&bytes[..10]), Err(Error::Format { .. })));
    }

    #[test]
    fn avfd_non_finite_rejected() {
        let mut bytes = write_avfd(&small());
        let at = AVFD_HEADER_LEN + 4;
        bytes[at..at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(read_avfd(&bytes), Err(Error::Data { record: 0, .. })));
    }

    #[test]
    fn csv_bad_value() {
        let text = "pair_id,label,a_0,v_0\n0,1,0.5,nope\n";
        assert!(matches!(read_csv(text.as_bytes()), Err(Error::Data { record: 0, .. })));
        let text = "id,label,a_0,v_0\n";
        assert!(matches!(read_csv(text.as_bytes()), Err(Error::Format { .. })));
    }
}
