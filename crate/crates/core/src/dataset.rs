//! Annotation ingestion, image file I/O and the procedural phantom
//! generator used in place of real radiographs.
//!
//! Annotation files use the RSNA pneumonia-challenge layout:
//!
//! ```text
//! patientId,x,y,width,height,Target
//! p1,,,,,0
//! p2,264,152,213,379,1
//! ```
//!
//! Coordinates are pixels of the native image; a scale factor can be applied
//! on load when images have been downsampled.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{BBox, Image};

pub const ANNOTATION_HEADER: [&str; 6] = ["patientId", "x", "y", "width", "height", "Target"];
pub const CLASS_INFO_HEADER: [&str; 2] = ["patientId", "class"];

/// Patient-level class as distributed with the challenge data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Normal,
    Abnormal,
    NoOpacityNotNormal,
}

impl Label {
    pub fn class_name(&self) -> &'static str {
        match self {
            Label::Normal => "Normal",
            Label::Abnormal => "Lung Opacity",
            Label::NoOpacityNotNormal => "No Lung Opacity / Not Normal",
        }
    }

    pub fn from_class_name(s: &str) -> Option<Self> {
        match s.trim() {
            "Normal" => Some(Label::Normal),
            "Lung Opacity" => Some(Label::Abnormal),
            "No Lung Opacity / Not Normal" => Some(Label::NoOpacityNotNormal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub label: Label,
    pub boxes: Vec<BBox>,
}

/// Per-patient labels and boxes, ordered by patient id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationSet {
    pub records: BTreeMap<String, AnnotationRecord>,
}

impl AnnotationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&AnnotationRecord> {
        self.records.get(id)
    }

    /// Inserts a record after checking the label/box invariant.
    pub fn insert(&mut self, id: impl Into<String>, label: Label, boxes: Vec<BBox>) -> Result<()> {
        let id = id.into();
        match label {
            Label::Abnormal if boxes.is_empty() => {
                return Err(Error::InvalidArgument(format!(
                    "abnormal record `{id}` needs at least one box"
                )))
            }
            Label::Normal | Label::NoOpacityNotNormal if !boxes.is_empty() => {
                return Err(Error::InvalidArgument(format!(
                    "record `{id}` labelled {label:?} cannot carry boxes"
                )))
            }
            _ => {}
        }
        for b in &boxes {
            b.validate()?;
        }
        if self.records.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.records.insert(id, AnnotationRecord { label, boxes });
        Ok(())
    }

    pub fn ids_with_label(&self, label: Label) -> impl Iterator<Item = &str> {
        self.records
            .iter()
            .filter(move |(_, r)| r.label == label)
            .map(|(id, _)| id.as_str())
    }

    pub fn count(&self, label: Label) -> usize {
        self.records.values().filter(|r| r.label == label).count()
    }

    /// Overrides labels of box-free records from a class-info table.
    pub fn apply_class_info(&mut self, classes: &BTreeMap<String, Label>) -> Result<()> {
        for (id, label) in classes {
            let Some(rec) = self.records.get_mut(id) else {
                continue;
            };
            match (rec.label, label) {
                (Label::Abnormal, Label::Abnormal) => {}
                (Label::Abnormal, _) | (_, Label::Abnormal) => {
                    return Err(Error::InvalidArgument(format!(
                        "class info for `{id}` ({}) contradicts its Target value",
                        label.class_name()
                    )))
                }
                _ => rec.label = *label,
            }
        }
        Ok(())
    }
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(r)
}

pub(crate) fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let found: Vec<&str> = found.iter().map(|s| s.trim_start_matches('\u{feff}')).collect();
    if found != expected {
        return Err(Error::parse(
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), found.join(",")),
        ));
    }
    Ok(())
}

fn record_line(rec: &csv::StringRecord) -> usize {
    rec.position().map(|p| p.line() as usize).unwrap_or(0)
}

/// Parses an RSNA-layout annotation table, scaling coordinates by `scale`.
pub fn parse_annotations<R: Read>(reader: R, scale: f64) -> Result<AnnotationSet> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let mut rdr = csv_reader(reader);
    check_header(rdr.headers()?, &ANNOTATION_HEADER)?;

    let mut boxes: BTreeMap<String, Vec<BBox>> = BTreeMap::new();
    let mut negatives: BTreeMap<String, usize> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(Error::parse(line, "empty patientId"));
        }
        let coords: Vec<&str> = (1..5).map(|i| rec[i].trim()).collect();
        match rec[5].trim() {
            "0" => {
                if coords.iter().any(|c| !c.is_empty()) {
                    return Err(Error::parse(line, format!("`{id}` has Target=0 but coordinates")));
                }
                if boxes.contains_key(&id) {
                    return Err(Error::parse(line, format!("`{id}` has both Target=0 and Target=1 rows")));
                }
                if negatives.insert(id.clone(), line).is_some() {
                    return Err(Error::parse(line, format!("duplicate Target=0 row for `{id}`")));
                }
            }
            "1" => {
                if negatives.contains_key(&id) {
                    return Err(Error::parse(line, format!("`{id}` has both Target=0 and Target=1 rows")));
                }
                let mut v = [0.0; 4];
                for (slot, c) in v.iter_mut().zip(&coords) {
                    if c.is_empty() {
                        return Err(Error::parse(line, format!("`{id}` has Target=1 but missing coordinates")));
                    }
                    *slot = c
                        .parse::<f64>()
                        .map_err(|_| Error::parse(line, format!("non-numeric coordinate `{c}`")))?;
                }
                let b = BBox::new(v[0] * scale, v[1] * scale, v[2] * scale, v[3] * scale)
                    .map_err(|e| Error::parse(line, e.to_string()))?;
                let list = boxes.entry(id.clone()).or_default();
                if list.contains(&b) {
                    return Err(Error::parse(line, format!("duplicate box for `{id}`")));
                }
                list.push(b);
            }
            other => return Err(Error::parse(line, format!("Target must be 0 or 1, got `{other}`"))),
        }
    }

    let mut set = AnnotationSet::new();
    for (id, list) in boxes {
        set.insert(id, Label::Abnormal, list)?;
    }
    for id in negatives.into_keys() {
        set.insert(id, Label::Normal, Vec::new())?;
    }
    Ok(set)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    load_annotations_scaled(path, 1.0)
}

pub fn load_annotations_scaled(path: impl AsRef<Path>, scale: f64) -> Result<AnnotationSet> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(file, scale)
}

/// Serializes to the RSNA layout. Box-free records become `Target=0` rows;
/// the finer class distinction lives in the class-info table.
pub fn write_annotations<W: Write>(set: &AnnotationSet, w: W) -> Result<()> {
    let mut wtr = csv_writer(w);
    wtr.write_record(ANNOTATION_HEADER)?;
    for (id, rec) in &set.records {
        if rec.boxes.is_empty() {
            wtr.write_record([id.as_str(), "", "", "", "", "0"])?;
        }
        for b in &rec.boxes {
            wtr.write_record([
                id.clone(),
                b.x.to_string(),
                b.y.to_string(),
                b.w.to_string(),
                b.h.to_string(),
                "1".to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<annotations>", e))?;
    Ok(())
}

pub fn save_annotations(set: &AnnotationSet, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_annotations(set, &mut buf)?;
    write_atomic(path, &buf)
}

/// Reads a `patientId,class` table.
pub fn load_class_info(path: impl AsRef<Path>) -> Result<BTreeMap<String, Label>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv_reader(file);
    check_header(rdr.headers()?, &CLASS_INFO_HEADER)?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let label = Label::from_class_name(&rec[1])
            .ok_or_else(|| Error::parse(line, format!("unknown class `{}`", &rec[1])))?;
        if let Some(prev) = out.insert(rec[0].to_string(), label) {
            if prev != label {
                return Err(Error::parse(line, format!("conflicting classes for `{}`", &rec[0])));
            }
        }
    }
    Ok(out)
}

pub fn save_class_info(set: &AnnotationSet, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut wtr = csv_writer(&mut buf);
        wtr.write_record(CLASS_INFO_HEADER)?;
        for (id, rec) in &set.records {
            wtr.write_record([id.as_str(), rec.label.class_name()])?;
        }
        wtr.flush().map_err(|e| Error::io(path.as_ref(), e))?;
    }
    write_atomic(path, &buf)
}

/// Writes `bytes` to a sibling temp file and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Sample depth for PGM output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    fn maxval(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

fn corrupt(path: &Path, msg: impl Into<String>) -> Error {
    Error::Corrupt {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Decodes a binary (P5) PGM.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Image> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::UnsupportedFormat(format!(
            "{}: only binary P5 PGM is supported",
            path.display()
        )));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(corrupt(path, "truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(corrupt(path, "expected a number in header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| corrupt(path, "header number out of range"))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(corrupt(path, "missing whitespace after maxval")),
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(corrupt(path, format!("maxval {maxval} outside 1..=65535")));
    }
    let bps = if maxval < 256 { 1 } else { 2 };
    let n = width
        .checked_mul(height)
        .ok_or_else(|| corrupt(path, "dimensions overflow"))?;
    let payload = &bytes[pos..];
    if payload.len() < n * bps {
        return Err(corrupt(
            path,
            format!("expected {} data bytes, found {}", n * bps, payload.len()),
        ));
    }
    let max = maxval as f64;
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        let v = if bps == 1 {
            payload[i] as u32
        } else {
            u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]) as u32
        };
        if v as usize > maxval {
            return Err(corrupt(path, format!("sample {v} exceeds maxval {maxval}")));
        }
        data.push(v as f64 / max);
    }
    Image::new(width, height, data)
}

pub fn encode_pgm(img: &Image, depth: BitDepth) -> Vec<u8> {
    let maxval = depth.maxval();
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval).into_bytes();
    let m = maxval as f64;
    for &v in img.data() {
        let q = (v * m).round() as u32;
        match depth {
            BitDepth::Eight => out.push(q as u8),
            BitDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    out
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<Image> {
    use image::{DynamicImage, ImageFormat};
    let dy = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| corrupt(path, e.to_string()))?;
    let (w, h) = (dy.width() as usize, dy.height() as usize);
    let data: Vec<f64> = match dy {
        DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(g) => g.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: PNG colour type {:?} is not grayscale",
                path.display(),
                other.color()
            )))
        }
    };
    Image::new(w, h, data)
}

fn encode_png(img: &Image, path: &Path) -> Result<Vec<u8>> {
    use image::{ExtendedColorType, ImageEncoder};
    let raw: Vec<u8> = img.data().iter().map(|&v| (v * 255.0).round() as u8).collect();
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(&raw, img.width() as u32, img.height() as u32, ExtendedColorType::L8)
        .map_err(|e| corrupt(path, e.to_string()))?;
    Ok(out)
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Loads a P5 PGM (8- or 16-bit) or a grayscale PNG.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes, path)
    } else if bytes.starts_with(b"P") {
        decode_pgm(&bytes, path)
    } else if bytes.is_empty() {
        Err(corrupt(path, "empty file"))
    } else {
        Err(Error::UnsupportedFormat(format!("{}: unrecognized magic", path.display())))
    }
}

/// Saves by extension: `.pgm` as 16-bit P5, `.png` as 8-bit grayscale.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "pgm" => save_pgm(img, path, BitDepth::Sixteen),
        "png" => write_atomic(path, &encode_png(img, path)?),
        other => Err(Error::UnsupportedFormat(format!(
            "cannot save `.{other}`; use .pgm or .png"
        ))),
    }
}

pub fn save_pgm(img: &Image, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    write_atomic(path, &encode_pgm(img, depth))
}

/// Finds `<dir>/<id>.pgm` or `<dir>/<id>.png`.
pub fn image_path_for_id(dir: &Path, id: &str) -> Option<PathBuf> {
    ["pgm", "png"]
        .iter()
        .map(|ext| dir.join(format!("{id}.{ext}")))
        .find(|p| p.is_file())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhantomClass {
    Normal,
    Abnormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhantomSpec {
    pub seed: u64,
    /// Side length of the square image.
    pub size: usize,
    pub class: PhantomClass,
    /// Number of opacities; ignored for normal phantoms.
    pub opacity_count: usize,
}

impl PhantomSpec {
    pub const MIN_SIZE: usize = 64;

    pub fn normal(seed: u64, size: usize) -> Self {
        Self {
            seed,
            size,
            class: PhantomClass::Normal,
            opacity_count: 0,
        }
    }

    pub fn abnormal(seed: u64, size: usize, opacity_count: usize) -> Self {
        Self {
            seed,
            size,
            class: PhantomClass::Abnormal,
            opacity_count,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.size < Self::MIN_SIZE || self.size > crate::image::MAX_SIDE {
            return Err(Error::InvalidArgument(format!(
                "phantom size {} outside {}..={}",
                self.size,
                Self::MIN_SIZE,
                crate::image::MAX_SIDE
            )));
        }
        if self.class == PhantomClass::Abnormal && self.opacity_count == 0 {
            return Err(Error::InvalidArgument(
                "abnormal phantom needs at least one opacity".into(),
            ));
        }
        Ok(())
    }
}

/// Soft-tissue level inside the body outline; air outside it is 0.
pub const PHANTOM_BACKGROUND: f64 = 0.1;
pub const OPACITY_PEAK: f64 = 0.3;

struct Lung {
    cu: f64,
    cv: f64,
    ru: f64,
    rv: f64,
}

impl Lung {
    /// Normalized elliptical radius; 1.0 on the boundary.
    fn radius(&self, u: f64, v: f64) -> f64 {
        (((u - self.cu) / self.ru).powi(2) + ((v - self.cv) / self.rv).powi(2)).sqrt()
    }
}

/// Renders a seeded chest-like phantom and the boxes of any opacities.
///
/// Two soft elliptical lung fields inside a dim body outline on black air,
/// faint rib bands, and a per-seed affine jitter of the whole anatomy. Abnormal phantoms add
/// Gaussian opacities inside a lung field; each box spans ±2σ around an
/// opacity center.
pub fn synth_phantom(spec: &PhantomSpec) -> Result<(Image, Vec<BBox>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let size = spec.size;
    let s = size as f64;

    let scale = 1.0 + rng.random_range(-0.03..=0.03);
    let (jx, jy) = (rng.random_range(-0.02..=0.02), rng.random_range(-0.02..=0.02));
    let lungs = [-1.0, 1.0].map(|side: f64| Lung {
        cu: side * (0.38 + rng.random_range(-0.02..=0.02)),
        cv: -0.05 + rng.random_range(-0.02..=0.02),
        ru: 0.26 * (1.0 + rng.random_range(-0.05..=0.05)),
        rv: 0.55 * (1.0 + rng.random_range(-0.05..=0.05)),
    });
    let lung_level = 0.45 + rng.random_range(-0.03..=0.03);
    let rib_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let rib_freq = 5.0 + rng.random_range(-0.3..=0.3);

    // canonical (u, v) -> pixel coordinates under the jitter
    let to_pixel = |u: f64, v: f64| -> (f64, f64) {
        let (pu, pv) = (scale * u + jx, scale * v + jy);
        ((pu + 1.0) * 0.5 * s, (pv + 1.0) * 0.5 * s)
    };

    struct Blob {
        cx: f64,
        cy: f64,
        sigma: f64,
    }
    let mut blobs = Vec::new();
    if spec.class == PhantomClass::Abnormal {
        for _ in 0..spec.opacity_count {
            let lung = &lungs[rng.random_range(0..2)];
            let ang = rng.random_range(0.0..std::f64::consts::TAU);
            let r = 0.55 * rng.random::<f64>().sqrt();
            let (u, v) = (lung.cu + r * lung.ru * ang.cos(), lung.cv + r * lung.rv * ang.sin());
            let (cx, cy) = to_pixel(u, v);
            let sigma = s * rng.random_range(0.03..=0.05);
            blobs.push(Blob { cx, cy, sigma });
        }
    }

    let img = Image::from_fn_clamped(size, size, |x, y| {
        let (px, py) = ((x as f64 + 0.5) / s * 2.0 - 1.0, (y as f64 + 0.5) / s * 2.0 - 1.0);
        let (u, v) = ((px - jx) / scale, (py - jy) / scale);
        let torso = Lung {
            cu: 0.0,
            cv: 0.0,
            ru: 0.84,
            rv: 0.9,
        };
        let body = 1.0 / (1.0 + ((torso.radius(u, v) - 1.0) / 0.04).exp());
        let mut val = PHANTOM_BACKGROUND * body;
        for lung in &lungs {
            let d = lung.radius(u, v);
            let inside = 1.0 / (1.0 + ((d - 1.0) / 0.06).exp());
            let ribs = 0.04 * (std::f64::consts::TAU * (rib_freq * v) + rib_phase).sin();
            val += inside * (lung_level + ribs);
        }
        let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
        for b in &blobs {
            let d2 = (cx - b.cx).powi(2) + (cy - b.cy).powi(2);
            val += OPACITY_PEAK * (-d2 / (2.0 * b.sigma * b.sigma)).exp();
        }
        val
    })?;

    let boxes = blobs
        .iter()
        .map(|b| {
            let x0 = (b.cx - 2.0 * b.sigma).floor().clamp(1.0, s - 4.0);
            let y0 = (b.cy - 2.0 * b.sigma).floor().clamp(1.0, s - 4.0);
            let x1 = (b.cx + 2.0 * b.sigma).ceil().clamp(x0 + 3.0, s - 1.0);
            let y1 = (b.cy + 2.0 * b.sigma).ceil().clamp(y0 + 3.0, s - 1.0);
            BBox::new(x0, y0, x1 - x0, y1 - y0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((img, boxes))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolOptions {
    pub size: usize,
    pub opacity_count: usize,
}

impl Default for PoolOptions {
    fn default() -> Self {
        Self {
            size: 128,
            opacity_count: 1,
        }
    }
}

/// Seeded collection of phantoms with matching annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomPool {
    pub images: Vec<(String, Image)>,
    pub annotations: AnnotationSet,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn phantom_id(index: usize) -> String {
    format!("phantom_{index:04}")
}

pub fn generate_phantom_pool(count: usize, seed: u64, abnormal_fraction: f64) -> Result<PhantomPool> {
    generate_phantom_pool_with(count, seed, abnormal_fraction, &PoolOptions::default())
}

/// The first `round(count × fraction)` phantoms are abnormal.
pub fn generate_phantom_pool_with(
    count: usize,
    seed: u64,
    abnormal_fraction: f64,
    opts: &PoolOptions,
) -> Result<PhantomPool> {
    if count == 0 {
        return Err(Error::InvalidArgument("pool count must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&abnormal_fraction) {
        return Err(Error::InvalidArgument(format!(
            "abnormal fraction {abnormal_fraction} outside [0, 1]"
        )));
    }
    let n_abnormal = (count as f64 * abnormal_fraction).round() as usize;
    let mut images = Vec::with_capacity(count);
    let mut annotations = AnnotationSet::new();
    for i in 0..count {
        let item_seed = splitmix64(seed ^ splitmix64(i as u64));
        let spec = if i < n_abnormal {
            PhantomSpec::abnormal(item_seed, opts.size, opts.opacity_count.max(1))
        } else {
            PhantomSpec::normal(item_seed, opts.size)
        };
        let (img, boxes) = synth_phantom(&spec)?;
        let id = phantom_id(i);
        let label = if boxes.is_empty() { Label::Normal } else { Label::Abnormal };
        annotations.insert(id.clone(), label, boxes)?;
        images.push((id, img));
    }
    Ok(PhantomPool {
        images,
        annotations,
    })
}

/// Seeded patient-level holdout split; returns `(train, holdout)`.
pub fn split_patients(ids: &[String], holdout: usize, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut shuffled = ids.to_vec();
    shuffled.sort();
    shuffled.dedup();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = holdout.min(shuffled.len());
    let test = shuffled.split_off(shuffled.len() - n);
    (shuffled, test)
}
