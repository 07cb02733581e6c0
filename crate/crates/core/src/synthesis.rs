//! Pseudo-pair construction.
//!
//! Every image is first aligned to a shared reference, so retrieval, box
//! transfer and blending all happen in one canonical frame. A pair is
//! built by blending box regions of the nearest opposite-class donor into
//! the aligned input:
//!
//! * to-normal: abnormal input, its own boxes, nearest normal donor;
//! * to-abnormal: normal input, the donor's boxes, nearest abnormal donors.
//!
//! Only box regions are touched, so `|input_aligned - counterpart|` is zero
//! everywhere outside the boxes.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;

use crate::blend::{poisson_blend, BlendMode, BlendRequest, Solver, DEFAULT_TOL};
use crate::dataset::{csv_writer, save_image, write_atomic};
use crate::error::{Error, Result};
use crate::image::{apply_affine, Affine2D, BBox, Image};
use crate::registration::{align_with, AlignOptions, AlignmentObjective};
use crate::retrieval::{thumbnail, Class, ThumbEntry, ThumbIndex};

/// Smallest side, in pixels, of a box that survives alignment.
pub const MIN_BOX_SIDE: f64 = 3.0;

pub const MANIFEST_HEADER: [&str; 10] = [
    "pairId",
    "inputId",
    "donorId",
    "direction",
    "x",
    "y",
    "width",
    "height",
    "blendMode",
    "finalLoss",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    ToNormal,
    ToAbnormal,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::ToNormal => "to_normal",
            Direction::ToAbnormal => "to_abnormal",
        }
    }

    /// Class of the images this direction consumes as inputs.
    pub fn input_class(&self) -> Class {
        match self {
            Direction::ToNormal => Class::Abnormal,
            Direction::ToAbnormal => Class::Normal,
        }
    }

    pub fn donor_class(&self) -> Class {
        self.input_class().opposite()
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub align: AlignOptions,
    pub blend_mode: BlendMode,
    pub solver: Solver,
    pub blend_tol: f64,
    pub blend_max_iters: Option<usize>,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            align: AlignOptions::default(),
            blend_mode: BlendMode::Poisson,
            solver: Solver::ConjugateGradient,
            blend_tol: DEFAULT_TOL,
            blend_max_iters: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Align,
    Retrieve,
    Replace,
    Blend,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: Stage,
    pub detail: String,
}

/// An image mapped into the reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedImage {
    pub id: String,
    pub class: Class,
    pub image: Image,
    pub transform: Affine2D,
    /// Boxes in the aligned frame.
    pub boxes: Vec<BBox>,
    pub final_loss: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoPair {
    pub pair_id: String,
    pub input_id: String,
    pub input_aligned: Image,
    pub counterpart: Image,
    /// Replaced regions, in the aligned frame.
    pub boxes: Vec<BBox>,
    pub direction: Direction,
    pub donor_id: String,
    pub donor_distance: f64,
    /// Alignment of the input onto the reference.
    pub transform: Affine2D,
    pub final_loss: f64,
    pub blend_mode: BlendMode,
    pub stage_log: Vec<StageRecord>,
}

impl PseudoPair {
    /// Largest `|input_aligned - counterpart|` over pixels inside / outside
    /// the union of boxes.
    pub fn residual_extrema(&self) -> (f64, f64) {
        let (w, h) = self.input_aligned.dims();
        let rects: Vec<_> = self.boxes.iter().map(BBox::pixel_rect).collect();
        let (mut inside, mut outside) = (0.0f64, 0.0f64);
        for y in 0..h {
            for x in 0..w {
                let r = (self.input_aligned.get(x, y) - self.counterpart.get(x, y)).abs();
                if rects.iter().any(|rc| rc.contains(x, y)) {
                    inside = inside.max(r);
                } else {
                    outside = outside.max(r);
                }
            }
        }
        (inside, outside)
    }
}

/// One image offered to a [`DonorPool`].
#[derive(Debug, Clone, Copy)]
pub struct PoolItem<'a> {
    pub id: &'a str,
    pub class: Class,
    pub image: &'a Image,
    pub boxes: &'a [BBox],
}

/// Aligned donor images plus their thumbnail index.
#[derive(Debug, Clone)]
pub struct DonorPool {
    objective: AlignmentObjective,
    align_opts: AlignOptions,
    members: Vec<AlignedImage>,
    sources: Vec<(Image, Vec<BBox>)>,
    by_id: HashMap<String, usize>,
    index: ThumbIndex,
    rejected: Vec<(String, String)>,
}

impl DonorPool {
    /// Aligns every item to `reference` and indexes the aligned thumbnails.
    /// Abnormal items whose boxes all degenerate keep their thumbnail but
    /// are never offered as donors.
    pub fn build(items: &[PoolItem<'_>], reference: &Image, opts: &AlignOptions) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyInput("donor pool needs at least one image".into()));
        }
        let objective = AlignmentObjective::new(reference, opts.levels)?;
        let aligned: Vec<Result<AlignedImage>> = items
            .par_iter()
            .map(|it| align_image(&objective, opts, it.id, it.class, it.image, it.boxes, true))
            .collect();
        let mut members = Vec::with_capacity(items.len());
        let mut sources = Vec::with_capacity(items.len());
        let mut rejected = Vec::new();
        let mut by_id = HashMap::new();
        for (it, res) in items.iter().zip(aligned) {
            let m = match res {
                Ok(m) => m,
                Err(e @ Error::DimensionMismatch(_)) | Err(e @ Error::NonInvertible(_)) => {
                    rejected.push((it.id.to_string(), e.to_string()));
                    continue;
                }
                Err(e) => return Err(e),
            };
            if by_id.insert(m.id.clone(), members.len()).is_some() {
                return Err(Error::DuplicateId(m.id));
            }
            members.push(m);
            sources.push((it.image.clone(), it.boxes.to_vec()));
        }
        let entries = members
            .iter()
            .map(|m| {
                Ok(ThumbEntry {
                    id: m.id.clone(),
                    label: m.class,
                    thumb: thumbnail(&m.image)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let index = ThumbIndex::from_entries(entries)?;
        Ok(Self {
            objective,
            align_opts: *opts,
            members,
            sources,
            by_id,
            index,
            rejected,
        })
    }

    pub fn index(&self) -> &ThumbIndex {
        &self.index
    }

    pub fn reference(&self) -> &Image {
        self.objective.reference()
    }

    pub fn members(&self) -> &[AlignedImage] {
        &self.members
    }

    pub fn get(&self, id: &str) -> Option<&AlignedImage> {
        self.by_id.get(id).map(|&i| &self.members[i])
    }

    /// The pool's alignment of `id`, if `image` and `boxes` are exactly
    /// what the pool was built from.
    pub fn member_for(&self, id: &str, image: &Image, boxes: &[BBox], class: Class) -> Option<&AlignedImage> {
        let &i = self.by_id.get(id)?;
        let (src, src_boxes) = &self.sources[i];
        let m = &self.members[i];
        (m.class == class && src == image && src_boxes == boxes && m.boxes.len() == boxes.len()).then_some(m)
    }

    /// Items dropped at build time, with the reason.
    pub fn rejected(&self) -> &[(String, String)] {
        &self.rejected
    }

    /// Number of members that can serve as donors of `class`.
    pub fn donor_count(&self, class: Class) -> usize {
        self.members
            .iter()
            .filter(|m| m.class == class && usable_donor(m))
            .count()
    }

    /// Aligns an input image (with its boxes, if any) to the pool reference.
    pub fn align_input(&self, id: &str, class: Class, image: &Image, boxes: &[BBox]) -> Result<AlignedImage> {
        align_image(&self.objective, &self.align_opts, id, class, image, boxes, false)
    }

    fn donors(&self, query: &AlignedImage, class: Class, k: usize) -> Result<Vec<(&AlignedImage, f64)>> {
        let thumb = thumbnail(&query.image)?;
        let hits = self.index.nearest_filtered(&thumb, k, class, |id| {
            id != query.id && self.get(id).is_some_and(usable_donor)
        })?;
        Ok(hits
            .into_iter()
            .map(|n| (self.get(&n.id).expect("indexed member"), n.distance))
            .collect())
    }
}

fn usable_donor(m: &AlignedImage) -> bool {
    m.class == Class::Normal || !m.boxes.is_empty()
}

fn align_image(
    objective: &AlignmentObjective,
    opts: &AlignOptions,
    id: &str,
    class: Class,
    image: &Image,
    boxes: &[BBox],
    drop_degenerate: bool,
) -> Result<AlignedImage> {
    let reference = objective.reference();
    image.ensure_same_dims(reference, &format!("`{id}` vs reference"))?;
    let result = align_with(objective, image, opts)?;
    let (w, h) = reference.dims();
    let warped = apply_affine(image, &result.transform, w, h)?;
    let mut mapped = Vec::with_capacity(boxes.len());
    for b in boxes {
        match map_box_to_frame(&result.transform, b, w, h) {
            Ok(m) => mapped.push(m),
            Err(e) if drop_degenerate => log::debug!("dropping box of `{id}`: {e}"),
            Err(e) => return Err(e),
        }
    }
    Ok(AlignedImage {
        id: id.to_string(),
        class,
        image: warped,
        transform: result.transform,
        boxes: mapped,
        final_loss: result.final_loss,
        iterations: result.iterations,
    })
}

/// Maps a box through `t`, rounds outward to whole pixels and clips it to
/// the image with a one-pixel margin.
pub fn map_box_to_frame(t: &Affine2D, b: &BBox, width: usize, height: usize) -> Result<BBox> {
    let (x0, y0, x1, y1) = t.map_box(b, width, height);
    let x0 = x0.floor().max(1.0);
    let y0 = y0.floor().max(1.0);
    let x1 = x1.ceil().min(width as f64 - 1.0);
    let y1 = y1.ceil().min(height as f64 - 1.0);
    if x1 - x0 < MIN_BOX_SIDE || y1 - y0 < MIN_BOX_SIDE {
        return Err(Error::DegenerateBox(format!(
            "{b:?} maps to {:.1}x{:.1} pixels",
            (x1 - x0).max(0.0),
            (y1 - y0).max(0.0)
        )));
    }
    BBox::new(x0, y0, x1 - x0, y1 - y0)
}

fn sorted_boxes(boxes: &[BBox]) -> Vec<BBox> {
    let mut v = boxes.to_vec();
    v.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)));
    v
}

fn blend_boxes(target: &Image, donor: &Image, boxes: &[BBox], opts: &SynthOptions) -> Result<(Image, String)> {
    let mut out = target.clone();
    for b in boxes {
        let mut req = BlendRequest::new(&out, donor, *b)
            .mode(opts.blend_mode)
            .solver(opts.solver)
            .tol(opts.blend_tol);
        req.max_iters = opts.blend_max_iters;
        out = poisson_blend(&req)?;
    }
    let detail = match opts.blend_mode {
        BlendMode::Paste => format!("pasted {} region(s)", boxes.len()),
        BlendMode::Poisson => format!(
            "poisson ({}, tol {:e}) over {} region(s)",
            opts.solver,
            opts.blend_tol,
            boxes.len()
        ),
    };
    Ok((out, detail))
}

fn align_record(a: &AlignedImage) -> StageRecord {
    StageRecord {
        stage: Stage::Align,
        detail: format!(
            "params {:?}, loss {:.6}, {} iterations",
            a.transform.params(),
            a.final_loss,
            a.iterations
        ),
    }
}

fn build_pair(
    input: &AlignedImage,
    donor: &AlignedImage,
    distance: f64,
    boxes: Vec<BBox>,
    direction: Direction,
    rank: usize,
    opts: &SynthOptions,
) -> Result<PseudoPair> {
    let (counterpart, blend_detail) = blend_boxes(&input.image, &donor.image, &boxes, opts)?;
    let tag = match direction {
        Direction::ToNormal => "nor",
        Direction::ToAbnormal => "abn",
    };
    let stage_log = vec![
        align_record(input),
        StageRecord {
            stage: Stage::Retrieve,
            detail: format!("donor `{}` (rank {rank}) at distance {distance:.6}", donor.id),
        },
        StageRecord {
            stage: Stage::Replace,
            detail: format!("regions {:?}", boxes.iter().map(|b| (b.x, b.y, b.w, b.h)).collect::<Vec<_>>()),
        },
        StageRecord {
            stage: Stage::Blend,
            detail: blend_detail,
        },
    ];
    Ok(PseudoPair {
        pair_id: format!("{}__{tag}{rank}", input.id),
        input_id: input.id.clone(),
        input_aligned: input.image.clone(),
        counterpart,
        boxes,
        direction,
        donor_id: donor.id.clone(),
        donor_distance: distance,
        transform: input.transform,
        final_loss: input.final_loss,
        blend_mode: opts.blend_mode,
        stage_log,
    })
}

/// Pseudo-normal counterpart of an already aligned abnormal image.
pub fn pseudo_normal_from_aligned(pool: &DonorPool, input: &AlignedImage, opts: &SynthOptions) -> Result<PseudoPair> {
    if input.boxes.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "`{}` has no boxes to replace",
            input.id
        )));
    }
    let (donor, distance) = pool.donors(input, Class::Normal, 1)?.remove(0);
    build_pair(input, donor, distance, sorted_boxes(&input.boxes), Direction::ToNormal, 0, opts)
}

/// Aligns an abnormal image, retrieves its nearest normal donor and blends
/// the donor into every box.
pub fn synth_pseudo_normal(
    pool: &DonorPool,
    id: &str,
    image: &Image,
    boxes: &[BBox],
    opts: &SynthOptions,
) -> Result<PseudoPair> {
    if boxes.is_empty() {
        return Err(Error::InvalidArgument(format!("`{id}` has no boxes to replace")));
    }
    let aligned = pool.align_input(id, Class::Abnormal, image, boxes)?;
    pseudo_normal_from_aligned(pool, &aligned, opts)
}

/// `k` pseudo-abnormal counterparts of an already aligned normal image,
/// ordered by retrieval distance.
pub fn pseudo_abnormal_from_aligned(
    pool: &DonorPool,
    input: &AlignedImage,
    k: usize,
    opts: &SynthOptions,
) -> Result<Vec<PseudoPair>> {
    pool.donors(input, Class::Abnormal, k)?
        .into_iter()
        .enumerate()
        .map(|(rank, (donor, distance))| {
            build_pair(
                input,
                donor,
                distance,
                sorted_boxes(&donor.boxes),
                Direction::ToAbnormal,
                rank,
                opts,
            )
        })
        .collect()
}

pub fn synth_pseudo_abnormal(
    pool: &DonorPool,
    id: &str,
    image: &Image,
    k: usize,
    opts: &SynthOptions,
) -> Result<Vec<PseudoPair>> {
    let aligned = pool.align_input(id, Class::Normal, image, &[])?;
    pseudo_abnormal_from_aligned(pool, &aligned, k, opts)
}

/// Input to a batch run.
#[derive(Debug, Clone, Copy)]
pub struct SynthInput<'a> {
    pub id: &'a str,
    pub image: &'a Image,
    pub boxes: &'a [BBox],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skip {
    pub input_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub pair_id: String,
    pub input_id: String,
    pub donor_id: String,
    pub direction: Direction,
    pub region: BBox,
    pub blend_mode: BlendMode,
    pub final_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthesisManifest {
    pub rows: Vec<ManifestRow>,
    pub skipped: Vec<Skip>,
    pub warnings: Vec<String>,
}

impl SynthesisManifest {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = &'a PseudoPair>) -> Self {
        let rows = pairs
            .into_iter()
            .flat_map(|p| {
                p.boxes.iter().map(move |b| ManifestRow {
                    pair_id: p.pair_id.clone(),
                    input_id: p.input_id.clone(),
                    donor_id: p.donor_id.clone(),
                    direction: p.direction,
                    region: *b,
                    blend_mode: p.blend_mode,
                    final_loss: p.final_loss,
                })
            })
            .collect();
        Self {
            rows,
            ..Default::default()
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        {
            let mut w = csv_writer(&mut buf);
            w.write_record(MANIFEST_HEADER)?;
            for r in &self.rows {
                w.write_record([
                    r.pair_id.clone(),
                    r.input_id.clone(),
                    r.donor_id.clone(),
                    r.direction.to_string(),
                    r.region.x.to_string(),
                    r.region.y.to_string(),
                    r.region.w.to_string(),
                    r.region.h.to_string(),
                    r.blend_mode.to_string(),
                    r.final_loss.to_string(),
                ])?;
            }
            w.flush().map_err(|e| Error::io("<manifest>", e))?;
        }
        Ok(buf)
    }

    pub fn pair_count(&self) -> usize {
        let mut ids: Vec<&str> = self.rows.iter().map(|r| r.pair_id.as_str()).collect();
        ids.dedup();
        ids.len()
    }
}

/// Runs synthesis for every input; failures become skips instead of
/// aborting the batch. Output order follows input order.
pub fn synthesize_batch(
    pool: &DonorPool,
    inputs: &[SynthInput<'_>],
    direction: Direction,
    k: usize,
    opts: &SynthOptions,
) -> (Vec<PseudoPair>, Vec<Skip>) {
    let results: Vec<Result<Vec<PseudoPair>>> = inputs
        .par_iter()
        .map(|inp| {
            let aligned = match pool.member_for(inp.id, inp.image, inp.boxes, direction.input_class()) {
                Some(m) => m.clone(),
                None => pool.align_input(inp.id, direction.input_class(), inp.image, inp.boxes)?,
            };
            match direction {
                Direction::ToNormal => pseudo_normal_from_aligned(pool, &aligned, opts).map(|p| vec![p]),
                Direction::ToAbnormal => pseudo_abnormal_from_aligned(pool, &aligned, k, opts),
            }
        })
        .collect();
    let mut pairs = Vec::new();
    let mut skips = Vec::new();
    for (inp, res) in inputs.iter().zip(results) {
        match res {
            Ok(ps) => pairs.extend(ps),
            Err(e) => {
                log::warn!("skipping `{}`: {e}", inp.id);
                skips.push(Skip {
                    input_id: inp.id.to_string(),
                    reason: e.to_string(),
                });
            }
        }
    }
    (pairs, skips)
}

/// Writes counterparts as `<out>/<pairId>.pgm`, aligned inputs as
/// `<out>/aligned/<inputId>.pgm`, and `<out>/manifest.csv`.
pub fn write_synthesis(pairs: &[PseudoPair], manifest: &SynthesisManifest, out: &Path) -> Result<Vec<Skip>> {
    std::fs::create_dir_all(out.join("aligned")).map_err(|e| Error::io(out, e))?;
    let mut failures = Vec::new();
    for p in pairs {
        let res = save_image(&p.counterpart, out.join(format!("{}.pgm", p.pair_id)))
            .and_then(|_| save_image(&p.input_aligned, out.join("aligned").join(format!("{}.pgm", p.input_id))));
        if let Err(e) = res {
            log::warn!("failed to write `{}`: {e}", p.pair_id);
            failures.push(Skip {
                input_id: p.input_id.clone(),
                reason: e.to_string(),
            });
        }
    }
    write_atomic(out.join("manifest.csv"), &manifest.to_csv()?)?;
    Ok(failures)
}

/// Pseudo-abnormal augmentation of every normal image against `pool`.
pub fn augment_dataset(
    normals: &[(String, Image)],
    pool: &DonorPool,
    k: usize,
    out: &Path,
    opts: &SynthOptions,
) -> Result<SynthesisManifest> {
    if normals.is_empty() {
        let manifest = SynthesisManifest {
            warnings: vec!["empty input: no normal images to augment".into()],
            ..Default::default()
        };
        log::warn!("augment_dataset called with no normal images");
        write_synthesis(&[], &manifest, out)?;
        return Ok(manifest);
    }
    let inputs: Vec<SynthInput> = normals
        .iter()
        .map(|(id, image)| SynthInput { id, image, boxes: &[] })
        .collect();
    let (pairs, mut skips) = synthesize_batch(pool, &inputs, Direction::ToAbnormal, k, opts);
    let write_failures = write_synthesis(&pairs, &SynthesisManifest::default(), out)?;
    let failed: Vec<&str> = write_failures.iter().map(|s| s.input_id.as_str()).collect();
    let kept: Vec<&PseudoPair> = pairs.iter().filter(|p| !failed.contains(&p.input_id.as_str())).collect();
    let mut manifest = SynthesisManifest::from_pairs(kept);
    skips.extend(write_failures);
    manifest.skipped = skips;
    write_atomic(out.join("manifest.csv"), &manifest.to_csv()?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_phantom_pool_with, synth_phantom, Label, PhantomSpec, PoolOptions};

    const SIZE: usize = 64;

    fn fast_opts() -> SynthOptions {
        SynthOptions {
            align: AlignOptions {
                max_iters: 60,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    struct Fixture {
        images: Vec<(String, Image)>,
        boxes: HashMap<String, Vec<BBox>>,
        classes: HashMap<String, Class>,
        reference: Image,
    }

    fn fixture(count: usize, fraction: f64, seed: u64) -> Fixture {
        let pool = generate_phantom_pool_with(count, seed, fraction, &PoolOptions { size: SIZE, opacity_count: 1 }).unwrap();
        let mut boxes = HashMap::new();
        let mut classes = HashMap::new();
        for (id, rec) in &pool.annotations.records {
            boxes.insert(id.clone(), rec.boxes.clone());
            classes.insert(
                id.clone(),
                if rec.label == Label::Abnormal { Class::Abnormal } else { Class::Normal },
            );
        }
        let reference = synth_phantom(&PhantomSpec::normal(999, SIZE)).unwrap().0;
        Fixture {
            images: pool.images,
            boxes,
            classes,
            reference,
        }
    }

    fn build_pool(f: &Fixture, opts: &SynthOptions) -> DonorPool {
        let items: Vec<PoolItem> = f
            .images
            .iter()
            .map(|(id, img)| PoolItem {
                id,
                class: f.classes[id],
                image: img,
                boxes: &f.boxes[id],
            })
            .collect();
        DonorPool::build(&items, &f.reference, &opts.align).unwrap()
    }

    #[test]
    fn pseudo_normal_residual_support() {
        let f = fixture(21, 1.0 / 21.0, 5);
        let opts = fast_opts();
        let pool = build_pool(&f, &opts);
        let (id, img) = &f.images[0];
        let pair = synth_pseudo_normal(&pool, id, img, &f.boxes[id], &opts).unwrap();
        assert_eq!(pair.direction, Direction::ToNormal);
        assert_ne!(pair.donor_id, *id);
        let (inside, outside) = pair.residual_extrema();
        assert_eq!(outside, 0.0);
        assert!(inside > 0.05, "inside residual {inside}");
        let stages: Vec<Stage> = pair.stage_log.iter().map(|s| s.stage).collect();
        assert_eq!(stages, [Stage::Align, Stage::Retrieve, Stage::Replace, Stage::Blend]);
    }

    #[test]
    fn unchanged_when_donor_matches() {
        let normal = synth_phantom(&PhantomSpec::normal(77, SIZE)).unwrap().0;
        let reference = synth_phantom(&PhantomSpec::normal(999, SIZE)).unwrap().0;
        let opts = fast_opts();
        let items = [PoolItem {
            id: "donor",
            class: Class::Normal,
            image: &normal,
            boxes: &[],
        }];
        let pool = DonorPool::build(&items, &reference, &opts.align).unwrap();
        let b = [BBox::new(20.0, 20.0, 12.0, 10.0).unwrap()];
        let pair = synth_pseudo_normal(&pool, "input", &normal, &b, &opts).unwrap();
        assert_eq!(pair.donor_id, "donor");
        for (a, c) in pair.input_aligned.data().iter().zip(pair.counterpart.data()) {
            assert!((a - c).abs() <= opts.blend_tol);
        }
        assert!(synth_pseudo_normal(&pool, "input", &normal, &[], &opts).is_err());
    }

    #[test]
    fn pseudo_abnormal_k_pairs_ordered() {
        let f = fixture(12, 0.5, 6);
        let opts = fast_opts();
        let pool = build_pool(&f, &opts);
        let (id, img) = f.images.iter().find(|(id, _)| f.classes[id] == Class::Normal).unwrap();
        let one = synth_pseudo_abnormal(&pool, id, img, 1, &opts).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].boxes, sorted_boxes(&pool.get(&one[0].donor_id).unwrap().boxes));

        let three = synth_pseudo_abnormal(&pool, id, img, 3, &opts).unwrap();
        assert_eq!(three.len(), 3);
        let mut donors: Vec<&str> = three.iter().map(|p| p.donor_id.as_str()).collect();
        assert!(three.windows(2).all(|w| w[0].donor_distance <= w[1].donor_distance));
        // exhaustive oracle over the aligned pool
        let q = thumbnail(&three[0].input_aligned).unwrap();
        let mut all: Vec<(f64, &str)> = pool
            .members()
            .iter()
            .filter(|m| m.class == Class::Abnormal && !m.boxes.is_empty())
            .map(|m| (crate::retrieval::thumb_distance(&q, &thumbnail(&m.image).unwrap()), m.id.as_str()))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
        let want: Vec<&str> = all.iter().take(3).map(|x| x.1).collect();
        assert_eq!(donors, want);
        donors.dedup();
        assert_eq!(donors.len(), 3);
        for p in &three {
            let (inside, outside) = p.residual_extrema();
            assert_eq!(outside, 0.0);
            assert!(inside > 0.05);
        }
        assert!(matches!(
            synth_pseudo_abnormal(&pool, id, img, 7, &opts),
            Err(Error::InsufficientCandidates { .. })
        ));
    }

    #[test]
    fn boxless_donor_never_selected() {
        let f = fixture(6, 0.5, 7);
        let opts = fast_opts();
        let mut items: Vec<PoolItem> = f
            .images
            .iter()
            .map(|(id, img)| PoolItem {
                id,
                class: f.classes[id],
                image: img,
                boxes: &f.boxes[id],
            })
            .collect();
        // strip the boxes of one abnormal member
        let stripped = items.iter().position(|it| it.class == Class::Abnormal).unwrap();
        items[stripped].boxes = &[];
        let stripped_id = items[stripped].id.to_string();
        let pool = DonorPool::build(&items, &f.reference, &opts.align).unwrap();
        assert_eq!(pool.donor_count(Class::Abnormal), 2);
        let (id, img) = f.images.iter().find(|(id, _)| f.classes[id] == Class::Normal).unwrap();
        let pairs = synth_pseudo_abnormal(&pool, id, img, 2, &opts).unwrap();
        assert!(pairs.iter().all(|p| p.donor_id != stripped_id));
        assert!(synth_pseudo_abnormal(&pool, id, img, 3, &opts).is_err());
    }

    #[test]
    fn map_box_rules() {
        let t = Affine2D::IDENTITY;
        let b = BBox::new(0.0, 10.0, 20.0, 5.0).unwrap();
        let m = map_box_to_frame(&t, &b, 64, 64).unwrap();
        assert_eq!((m.x, m.y, m.w, m.h), (1.0, 10.0, 19.0, 5.0));
        let tiny = BBox::new(10.0, 10.0, 2.0, 8.0).unwrap();
        assert!(matches!(map_box_to_frame(&t, &tiny, 64, 64), Err(Error::DegenerateBox(_))));
        let shrink = Affine2D::similarity(0.0, 0.5, 0.0, 0.0);
        let m = map_box_to_frame(&shrink, &BBox::new(16.0, 16.0, 32.0, 32.0).unwrap(), 64, 64).unwrap();
        assert_eq!((m.x, m.y, m.w, m.h), (24.0, 24.0, 16.0, 16.0));
    }

    #[test]
    fn augment_counts_and_manifest() {
        let f = fixture(8, 0.5, 8);
        let opts = fast_opts();
        let pool = build_pool(&f, &opts);
        let normals: Vec<(String, Image)> = f
            .images
            .iter()
            .filter(|(id, _)| f.classes[id] == Class::Normal)
            .cloned()
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let m1 = augment_dataset(&normals, &pool, 1, dir.path(), &opts).unwrap();
        assert_eq!(m1.rows.len(), normals.len());
        let csv = std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
        assert!(csv.starts_with("pairId,inputId,donorId,direction,x,y,width,height,blendMode,finalLoss\n"));
        assert_eq!(csv.lines().count(), normals.len() + 1);
        assert!(dir.path().join(format!("{}.pgm", m1.rows[0].pair_id)).is_file());

        let dir2 = tempfile::tempdir().unwrap();
        let m2 = augment_dataset(&normals, &pool, 2, dir2.path(), &opts).unwrap();
        assert_eq!(m2.rows.len(), 2 * normals.len());

        let dir3 = tempfile::tempdir().unwrap();
        let empty = augment_dataset(&[], &pool, 1, dir3.path(), &opts).unwrap();
        assert!(empty.rows.is_empty());
        assert_eq!(empty.warnings.len(), 1);
    }

    #[test]
    fn deterministic_and_boxes_invert_inside() {
        let f = fixture(8, 0.5, 9);
        let opts = fast_opts();
        let pool_a = build_pool(&f, &opts);
        let pool_b = build_pool(&f, &opts);
        let (id, img) = f.images.iter().find(|(id, _)| f.classes[id] == Class::Normal).unwrap();
        let a = synth_pseudo_abnormal(&pool_a, id, img, 2, &opts).unwrap();
        let b = synth_pseudo_abnormal(&pool_b, id, img, 2, &opts).unwrap();
        assert_eq!(a, b);
        for p in &a {
            let inv = p.transform.inverse().unwrap();
            for bx in &p.boxes {
                let (x0, y0, x1, y1) = inv.map_box(bx, SIZE, SIZE);
                assert!(x0 >= 0.0 && y0 >= 0.0 && x1 <= SIZE as f64 && y1 <= SIZE as f64);
            }
        }
    }
}
