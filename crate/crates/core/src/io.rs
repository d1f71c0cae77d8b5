//! File formats: raw little-endian float32 arrays with JSON sidecars, sinogram
//! CSV, 16-bit PGM previews, phantom definitions, artifact lines and reports.
//!
//! Raw arrays are the canonical interchange. Values are stored as `f32`, so a
//! read returns the `f32`-rounded array and writing it again reproduces the
//! same bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::blocks::layers::{Conv2d, Padding};
use crate::blocks::FeatureTensor;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::losses::FeatureExtractor;
use crate::phantom::{Ellipse, EllipsePhantom};
use crate::projector::{Geometry, Sinogram};
use crate::visibility::{Line, WeightMap};

pub const RAW_DTYPE: &str = "f32le";

/// What a raw file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Image,
    Sinogram,
    Weights,
    Tensor,
}

/// Min-max window used for a PGM preview.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preview {
    pub file: String,
    pub window: [f64; 2],
}

/// JSON description stored next to every raw file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub kind: ArtifactKind,
    pub dtype: String,
    /// Row-major dimensions, slowest first.
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Geometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preview: Option<Preview>,
}

impl Sidecar {
    fn new(kind: ArtifactKind, shape: Vec<usize>) -> Self {
        Self {
            kind,
            dtype: RAW_DTYPE.to_string(),
            shape,
            width: None,
            height: None,
            geometry: None,
            preview: None,
        }
    }

    fn square(kind: ArtifactKind, n: usize) -> Self {
        Self {
            width: Some(n),
            height: Some(n),
            ..Self::new(kind, vec![n, n])
        }
    }

    fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Paths of the raw array and its sidecar for a path stem.
pub fn raw_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("f32"), stem.with_extension("json"))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.into(), source })?;
    }
    fs::write(path, bytes).map_err(|source| Error::Io { path: path.into(), source })
}

/// Reads and parses a JSON file.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json { path: path.into(), source })
}

/// Writes pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|source| Error::Json { path: path.into(), source })?;
    text.push(b'\n');
    write_bytes(path, &text)
}

/// Rounds to the stored precision.
pub fn quantize(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| v as f32 as f64).collect()
}

fn encode_f32(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

fn decode_f32(path: &Path, bytes: &[u8], expected: usize) -> Result<Vec<f64>> {
    if bytes.len() != expected * 4 {
        return Err(Error::Sidecar {
            path: path.into(),
            reason: format!("sidecar declares {expected} values but the raw file holds {} bytes", bytes.len()),
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{} contains non-finite values", path.display())));
    }
    Ok(values)
}

fn write_raw(stem: &Path, values: &[f64], sidecar: &Sidecar) -> Result<()> {
    let (raw, meta) = raw_paths(stem);
    write_bytes(&raw, &encode_f32(values))?;
    write_json(&meta, sidecar)
}

fn read_raw(stem: &Path, kind: ArtifactKind, rank: usize) -> Result<(Sidecar, Vec<f64>)> {
    let (raw, meta) = raw_paths(stem);
    let sidecar: Sidecar = read_json(&meta).map_err(|e| match e {
        Error::Json { path, source } => Error::Sidecar {
            path,
            reason: source.to_string(),
        },
        other => other,
    })?;
    let bad = |reason: String| Error::Sidecar {
        path: meta.clone(),
        reason,
    };
    if sidecar.kind != kind {
        return Err(bad(format!("expected a {kind:?} artifact, found {:?}", sidecar.kind)));
    }
    if sidecar.dtype != RAW_DTYPE {
        return Err(bad(format!("unsupported dtype {:?}", sidecar.dtype)));
    }
    if sidecar.shape.len() != rank || sidecar.shape.contains(&0) {
        return Err(bad(format!("expected a non-empty rank-{rank} shape, got {:?}", sidecar.shape)));
    }
    let values = decode_f32(&raw, &read_bytes(&raw)?, sidecar.len())?;
    Ok((sidecar, values))
}

fn square_side(meta: &Path, sidecar: &Sidecar) -> Result<usize> {
    let (h, w) = (sidecar.shape[0], sidecar.shape[1]);
    let consistent = h == w && sidecar.width.is_none_or(|x| x == w) && sidecar.height.is_none_or(|x| x == h);
    if !consistent {
        return Err(Error::Sidecar {
            path: meta.into(),
            reason: format!("expected a square image, got {:?}", sidecar.shape),
        });
    }
    Ok(h)
}

/// Writes `<stem>.f32`, `<stem>.json` and a `<stem>.pgm` preview.
pub fn write_image(stem: &Path, img: &Image) -> Result<()> {
    write_square(stem, img, ArtifactKind::Image)
}

fn write_square(stem: &Path, img: &Image, kind: ArtifactKind) -> Result<()> {
    let pgm = stem.with_extension("pgm");
    let window = write_pgm(&pgm, img)?;
    let sidecar = Sidecar {
        preview: Some(Preview {
            file: pgm.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            window,
        }),
        ..Sidecar::square(kind, img.n())
    };
    write_raw(stem, img.values(), &sidecar)
}

pub fn read_image(stem: &Path) -> Result<Image> {
    let (sidecar, values) = read_raw(stem, ArtifactKind::Image, 2)?;
    let n = square_side(&raw_paths(stem).1, &sidecar)?;
    Image::from_vec(n, values)
}

pub fn write_weights(stem: &Path, w: &WeightMap) -> Result<()> {
    write_square(stem, &w.to_image(), ArtifactKind::Weights)
}

pub fn read_weights(stem: &Path) -> Result<WeightMap> {
    let (sidecar, values) = read_raw(stem, ArtifactKind::Weights, 2)?;
    let n = square_side(&raw_paths(stem).1, &sidecar)?;
    WeightMap::from_vec(n, values)
}

/// Raw sinogram with its geometry in the sidecar.
pub fn write_sinogram(stem: &Path, sino: &Sinogram) -> Result<()> {
    let g = sino.geometry();
    let sidecar = Sidecar {
        geometry: Some(g.clone()),
        ..Sidecar::new(ArtifactKind::Sinogram, vec![g.n_angles(), g.n_det()])
    };
    write_raw(stem, sino.values(), &sidecar)
}

pub fn read_sinogram(stem: &Path) -> Result<Sinogram> {
    let (sidecar, values) = read_raw(stem, ArtifactKind::Sinogram, 2)?;
    let meta = raw_paths(stem).1;
    let geometry = sidecar.geometry.ok_or_else(|| Error::Sidecar {
        path: meta.clone(),
        reason: "sinogram sidecar has no geometry".into(),
    })?;
    geometry.validate().map_err(|e| Error::Sidecar {
        path: meta.clone(),
        reason: e.to_string(),
    })?;
    if sidecar.shape != [geometry.n_angles(), geometry.n_det()] {
        return Err(Error::Sidecar {
            path: meta,
            reason: format!("shape {:?} disagrees with the geometry", sidecar.shape),
        });
    }
    Sinogram::from_parts(geometry, values)
}

pub fn write_tensor(stem: &Path, t: &FeatureTensor) -> Result<()> {
    let (c, h, w) = t.shape();
    write_raw(stem, t.data(), &Sidecar::new(ArtifactKind::Tensor, vec![c, h, w]))
}

pub fn read_tensor(stem: &Path) -> Result<FeatureTensor> {
    let (sidecar, values) = read_raw(stem, ArtifactKind::Tensor, 3)?;
    FeatureTensor::from_vec(sidecar.shape[0], sidecar.shape[1], sidecar.shape[2], values)
}

/// Sinogram as CSV: a header row `angle_rad,<s_0>,<s_1>,...` followed by
/// one row per angle. Numbers use shortest round-trip formatting, so the CSV
/// is lossless.
pub fn write_sinogram_csv(path: &Path, sino: &Sinogram) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.into(), source };
    let mut w = csv::Writer::from_writer(Vec::new());
    let g = sino.geometry();
    let header = std::iter::once("angle_rad".to_string()).chain(g.detector_positions().into_iter().map(|s| s.to_string()));
    w.write_record(header).map_err(csv_err)?;
    for (j, angle) in g.angles().iter().enumerate() {
        let row = std::iter::once(angle.to_string()).chain(sino.row(j).iter().map(f64::to_string));
        w.write_record(row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: path.into(),
        source: e.into_error(),
    })?;
    write_bytes(path, &bytes)
}

pub fn read_sinogram_csv(path: &Path) -> Result<Sinogram> {
    let bytes = read_bytes(path)?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let parse = |field: &str| -> Result<f64> {
        field.trim().parse::<f64>().map_err(|_| Error::Sidecar {
            path: path.into(),
            reason: format!("not a number: {field:?}"),
        })
    };
    let header = r.headers().map_err(|source| Error::Csv { path: path.into(), source })?.clone();
    if header.get(0) != Some("angle_rad") || header.len() < 2 {
        return Err(Error::Sidecar {
            path: path.into(),
            reason: "expected an angle_rad column followed by detector positions".into(),
        });
    }
    let detectors = header.iter().skip(1).map(parse).collect::<Result<Vec<_>>>()?;
    let mut angles = Vec::new();
    let mut values = Vec::new();
    for record in r.records() {
        let record = record.map_err(|source| Error::Csv { path: path.into(), source })?;
        let mut fields = record.iter();
        angles.push(parse(fields.next().unwrap_or(""))?);
        for f in fields {
            values.push(parse(f)?);
        }
    }
    Sinogram::from_parts(Geometry::from_samples(angles, detectors)?, values)
}

/// 16-bit binary PGM, min-max windowed, top row = largest `y`. Returns the
/// window.
pub fn write_pgm(path: &Path, img: &Image) -> Result<[f64; 2]> {
    let n = img.n();
    let (lo, hi) = img.min_max();
    let span = hi - lo;
    let mut bytes = format!("P5\n{n} {n}\n65535\n").into_bytes();
    for row in (0..n).rev() {
        for col in 0..n {
            let level = if span > 0.0 {
                ((img.get(row, col) - lo) / span * 65535.0).round() as u16
            } else {
                0
            };
            bytes.extend_from_slice(&level.to_be_bytes());
        }
    }
    write_bytes(path, &bytes)?;
    Ok([lo, hi])
}

/// Ellipse entry of a phantom definition file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipseRecord {
    pub center: [f64; 2],
    pub axes: [f64; 2],
    pub tilt_deg: f64,
    pub intensity: f64,
}

impl From<&Ellipse> for EllipseRecord {
    fn from(e: &Ellipse) -> Self {
        Self {
            center: [e.center.0, e.center.1],
            axes: [e.semi_axes.0, e.semi_axes.1],
            tilt_deg: e.tilt.to_degrees(),
            intensity: e.intensity,
        }
    }
}

pub fn read_phantom(path: &Path) -> Result<EllipsePhantom> {
    let records: Vec<EllipseRecord> = read_json(path)?;
    let ellipses = records
        .iter()
        .map(|r| {
            Ellipse::new(
                (r.center[0], r.center[1]),
                (r.axes[0], r.axes[1]),
                r.tilt_deg.to_radians(),
                r.intensity,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EllipsePhantom::new(ellipses))
}

pub fn write_phantom(path: &Path, phantom: &EllipsePhantom) -> Result<()> {
    let records: Vec<EllipseRecord> = phantom.ellipses.iter().map(EllipseRecord::from).collect();
    write_json(path, &records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub theta_deg: f64,
    pub s: f64,
}

pub fn write_lines(path: &Path, lines: &[Line]) -> Result<()> {
    let records: Vec<LineRecord> = lines
        .iter()
        .map(|l| LineRecord {
            theta_deg: l.theta.to_degrees(),
            s: l.s,
        })
        .collect();
    write_json(path, &records)
}

pub fn read_lines(path: &Path) -> Result<Vec<Line>> {
    let records: Vec<LineRecord> = read_json(path)?;
    Ok(records
        .into_iter()
        .map(|r| Line {
            theta: r.theta_deg.to_radians(),
            s: r.s,
        })
        .collect())
}

/// Convolution stage of an extractor weight file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// Layout `[out][in][ky][kx]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Extractor weight file: valid, stride-1 convolution stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorRecord {
    pub relu: bool,
    pub stages: Vec<StageRecord>,
}

pub fn read_extractor(path: &Path) -> Result<FeatureExtractor> {
    let record: ExtractorRecord = read_json(path)?;
    let stages = record
        .stages
        .into_iter()
        .map(|s| {
            let fan = s.in_channels * s.kernel * s.kernel;
            if s.kernel % 2 == 0 || s.weights.len() != s.out_channels * fan || s.bias.len() != s.out_channels {
                return Err(Error::Sidecar {
                    path: path.into(),
                    reason: format!(
                        "stage {}->{} with kernel {} has {} weights and {} biases",
                        s.in_channels,
                        s.out_channels,
                        s.kernel,
                        s.weights.len(),
                        s.bias.len()
                    ),
                });
            }
            Ok(Conv2d {
                in_channels: s.in_channels,
                out_channels: s.out_channels,
                kernel: s.kernel,
                stride: 1,
                padding: Padding::Valid,
                weights: s.weights,
                bias: s.bias,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureExtractor::new(stages, record.relu)
}

pub fn write_extractor(path: &Path, fx: &FeatureExtractor) -> Result<()> {
    let record = ExtractorRecord {
        relu: fx.relu,
        stages: fx
            .stages
            .iter()
            .map(|c| StageRecord {
                in_channels: c.in_channels,
                out_channels: c.out_channels,
                kernel: c.kernel,
                weights: c.weights.clone(),
                bias: c.bias.clone(),
            })
            .collect(),
    };
    write_json(path, &record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::rasterize;

    #[test]
    fn image_round_trip_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("img");
        let img = Image::from_fn(6, |x, y| 0.1 * x - y / 3.0).unwrap();
        write_image(&stem, &img).unwrap();
        let back = read_image(&stem).unwrap();
        assert_eq!(back.values(), quantize(img.values()).as_slice());
        let first = fs::read(stem.with_extension("f32")).unwrap();
        write_image(&stem, &back).unwrap();
        assert_eq!(fs::read(stem.with_extension("f32")).unwrap(), first);
    }

    #[test]
    fn exact_values_survive() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("disk");
        let img = rasterize(&EllipsePhantom::disk(), 16).unwrap();
        write_image(&stem, &img).unwrap();
        assert_eq!(read_image(&stem).unwrap(), img);
        let meta: serde_json::Value = read_json(&stem.with_extension("json")).unwrap();
        assert_eq!(meta["width"], 16);
        assert_eq!(meta["height"], 16);
    }

    #[test]
    fn sidecar_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("img");
        write_image(&stem, &Image::zeros(4).unwrap()).unwrap();
        fs::write(stem.with_extension("f32"), [0u8; 12]).unwrap();
        assert!(matches!(read_image(&stem), Err(Error::Sidecar { .. })));
        fs::write(stem.with_extension("json"), b"{not json").unwrap();
        assert!(matches!(read_image(&stem), Err(Error::Sidecar { .. })));
        assert!(matches!(read_weights(&dir.path().join("none")), Err(Error::MissingInput { .. })));
    }

    #[test]
    fn kind_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("w");
        write_weights(&stem, &WeightMap::uniform(4)).unwrap();
        assert_eq!(read_weights(&stem).unwrap(), WeightMap::uniform(4));
        assert!(matches!(read_image(&stem), Err(Error::Sidecar { .. })));
    }

    #[test]
    fn sinogram_csv_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let g = Geometry::for_image(8, 5).unwrap();
        let values = (0..g.n_angles() * g.n_det()).map(|k| (k as f64 * 0.37).sin() / 3.0).collect();
        let sino = Sinogram::from_parts(g, values).unwrap();
        let path = dir.path().join("s.csv");
        write_sinogram_csv(&path, &sino).unwrap();
        let back = read_sinogram_csv(&path).unwrap();
        assert_eq!(back.values(), sino.values());
        assert_eq!(back.geometry().angles(), sino.geometry().angles());
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("angle_rad,"));
    }

    #[test]
    fn raw_sinogram_keeps_geometry() {
        let dir = tempfile::tempdir().unwrap();
        let g = Geometry::for_image(8, 4).unwrap();
        let sino = Sinogram::from_parts(g.clone(), vec![0.5; g.n_angles() * g.n_det()]).unwrap();
        write_sinogram(&dir.path().join("s"), &sino).unwrap();
        assert_eq!(read_sinogram(&dir.path().join("s")).unwrap(), sino);
    }

    #[test]
    fn tensor_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = FeatureTensor::from_vec(2, 2, 2, vec![1.0, -2.0, 0.5, 0.25, 3.0, 4.0, -8.0, 0.0]).unwrap();
        write_tensor(&dir.path().join("t"), &t).unwrap();
        assert_eq!(read_tensor(&dir.path().join("t")).unwrap(), t);
    }

    #[test]
    fn pgm_header_and_window() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_vec(2, vec![0.0, 1.0, 2.0, 4.0]).unwrap();
        let path = dir.path().join("p.pgm");
        assert_eq!(write_pgm(&path, &img).unwrap(), [0.0, 4.0]);
        let bytes = fs::read(&path).unwrap();
        let header = b"P5\n2 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        // top row of the preview is the last image row
        assert_eq!(&bytes[header.len()..header.len() + 2], &32768u16.to_be_bytes());
        assert_eq!(&bytes[bytes.len() - 2..], &16384u16.to_be_bytes());
    }

    #[test]
    fn phantom_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let sl = EllipsePhantom::shepp_logan();
        write_phantom(&path, &sl).unwrap();
        let back = read_phantom(&path).unwrap();
        assert_eq!(back.ellipses.len(), sl.ellipses.len());
        for (a, b) in back.ellipses.iter().zip(&sl.ellipses) {
            assert_eq!(a.center, b.center);
            assert!((a.tilt - b.tilt).abs() < 1e-12);
        }
        fs::write(&path, br#"[{"center":[0.9,0],"axes":[0.5,0.1],"tilt_deg":0,"intensity":1}]"#).unwrap();
        assert!(matches!(read_phantom(&path), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn extractor_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fx.json");
        let fx = FeatureExtractor::red_cnn(3, 11);
        write_extractor(&path, &fx).unwrap();
        assert_eq!(read_extractor(&path).unwrap(), fx);
        fs::write(&path, br#"{"relu":true,"stages":[{"in_channels":1,"out_channels":1,"kernel":3,"weights":[1.0],"bias":[0.0]}]}"#).unwrap();
        assert!(matches!(read_extractor(&path), Err(Error::Sidecar { .. })));
    }
}
