//! Exact nearest-neighbor search over 32×32 thumbnails.
//!
//! Every image is area-resized to 32×32 and flattened to a 1024-dim vector;
//! distance is plain Euclidean on raw intensities. Thumbnails are stored as
//! `f32` so an index reloaded from its sidecar file answers queries exactly
//! as the original did.
//!
//! Sidecar layout (all integers little-endian):
//!
//! ```text
//! "THIX"                       4 bytes magic
//! entry_count                  u32
//! repeated entry_count times:
//!   id_len                     u32
//!   id                         id_len bytes, UTF-8
//!   label                      u8 (0 = normal, 1 = abnormal)
//!   thumb                      1024 × f32, row-major
//! ```

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{resize_area, Image};

pub const THUMB_SIDE: usize = 32;
pub const THUMB_LEN: usize = THUMB_SIDE * THUMB_SIDE;
pub const INDEX_MAGIC: &[u8; 4] = b"THIX";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Class {
    Normal,
    Abnormal,
}

impl Class {
    fn to_byte(self) -> u8 {
        match self {
            Class::Normal => 0,
            Class::Abnormal => 1,
        }
    }

    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Class::Normal),
            1 => Some(Class::Abnormal),
            _ => None,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Class::Normal => Class::Abnormal,
            Class::Abnormal => Class::Normal,
        }
    }
}

impl std::fmt::Display for Class {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Class::Normal => "normal",
            Class::Abnormal => "abnormal",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThumbEntry {
    pub id: String,
    pub label: Class,
    pub thumb: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub id: String,
    pub distance: f64,
}

/// Flattened 32×32 area-resized thumbnail.
pub fn thumbnail(img: &Image) -> Result<Vec<f32>> {
    Ok(resize_area(img, THUMB_SIDE, THUMB_SIDE)?
        .data()
        .iter()
        .map(|&v| v as f32)
        .collect())
}

pub fn thumb_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&p, &q)| {
            let d = p as f64 - q as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Immutable thumbnail index.
#[derive(Debug, Clone, PartialEq)]
pub struct ThumbIndex {
    entries: Vec<ThumbEntry>,
}

impl ThumbIndex {
    pub fn build<'a, I>(images: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, Class, &'a Image)>,
    {
        let mut entries = Vec::new();
        for (id, label, img) in images {
            entries.push(ThumbEntry {
                id: id.to_string(),
                label,
                thumb: thumbnail(img)?,
            });
        }
        Self::from_entries(entries)
    }

    pub fn from_entries(entries: Vec<ThumbEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyInput("thumbnail index needs at least one image".into()));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if e.thumb.len() != THUMB_LEN {
                return Err(Error::InvalidDimensions(format!(
                    "thumbnail for `{}` has {} samples, expected {THUMB_LEN}",
                    e.id,
                    e.thumb.len()
                )));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(Error::DuplicateId(e.id.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ThumbEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.iter().any(|e| e.id == id)
    }

    pub fn count(&self, label: Class) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    /// The `k` closest entries of class `want`, ascending by distance with
    /// ties broken by id. `exclude` (typically the query's own id) is never
    /// returned.
    pub fn nearest(&self, query: &Image, k: usize, want: Class, exclude: Option<&str>) -> Result<Vec<Neighbor>> {
        self.nearest_thumb(&thumbnail(query)?, k, want, exclude)
    }

    pub fn nearest_thumb(
        &self,
        query: &[f32],
        k: usize,
        want: Class,
        exclude: Option<&str>,
    ) -> Result<Vec<Neighbor>> {
        self.nearest_filtered(query, k, want, |id| Some(id) != exclude)
    }

    /// Like [`ThumbIndex::nearest_thumb`] with an arbitrary id filter.
    pub fn nearest_filtered(
        &self,
        query: &[f32],
        k: usize,
        want: Class,
        keep: impl Fn(&str) -> bool,
    ) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if query.len() != THUMB_LEN {
            return Err(Error::InvalidDimensions(format!(
                "query thumbnail has {} samples, expected {THUMB_LEN}",
                query.len()
            )));
        }
        let mut scored: Vec<(f64, &str)> = self
            .entries
            .iter()
            .filter(|e| e.label == want && keep(&e.id))
            .map(|e| (thumb_distance(query, &e.thumb), e.id.as_str()))
            .collect();
        if scored.len() < k {
            return Err(Error::InsufficientCandidates {
                label: want.to_string(),
                wanted: k,
                found: scored.len(),
            });
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(distance, id)| Neighbor {
                id: id.to_string(),
                distance,
            })
            .collect())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(INDEX_MAGIC)?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for e in &self.entries {
            w.write_all(&(e.id.len() as u32).to_le_bytes())?;
            w.write_all(e.id.as_bytes())?;
            w.write_all(&[e.label.to_byte()])?;
            for v in &e.thumb {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor { buf: bytes };
        if r.take(4)? != INDEX_MAGIC {
            return Err(Error::UnsupportedFormat("missing THIX magic".into()));
        }
        let count = r.u32()?;
        let mut entries = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let id_len = r.u32()?;
            let id = std::str::from_utf8(r.take(id_len)?)
                .map_err(|_| index_corrupt("id is not UTF-8"))?
                .to_string();
            let label = Class::from_byte(r.take(1)?[0])
                .ok_or_else(|| index_corrupt(format!("bad label byte for `{id}`")))?;
            let thumb = r
                .take(4 * THUMB_LEN)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            entries.push(ThumbEntry { id, label, thumb });
        }
        if !r.buf.is_empty() {
            return Err(index_corrupt("trailing bytes"));
        }
        Self::from_entries(entries)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::dataset::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn index_corrupt(msg: impl Into<String>) -> Error {
    Error::Corrupt {
        path: "<thumb index>".into(),
        msg: msg.into(),
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(index_corrupt("truncated index"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, side: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(side, side, |_, _| rng.random::<f64>()).unwrap()
    }

    fn pool(n: usize, seed: u64) -> (Vec<(String, Class, Image)>, ThumbIndex) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let items: Vec<_> = (0..n)
            .map(|i| {
                let label = if rng.random_bool(0.5) { Class::Normal } else { Class::Abnormal };
                (format!("id{i:03}"), label, random_image(seed * 1000 + i as u64, 64))
            })
            .collect();
        let index = ThumbIndex::build(items.iter().map(|(id, l, img)| (id.as_str(), *l, img))).unwrap();
        (items, index)
    }

    /// Exhaustive oracle: distances to every candidate, sorted.
    fn brute_force(index: &ThumbIndex, q: &[f32], want: Class, exclude: Option<&str>) -> Vec<(f64, String)> {
        let mut all: Vec<(f64, String)> = index
            .entries()
            .iter()
            .filter(|e| e.label == want && Some(e.id.as_str()) != exclude)
            .map(|e| {
                let mut s = 0.0f64;
                for i in 0..THUMB_LEN {
                    let d = q[i] as f64 - e.thumb[i] as f64;
                    s += d * d;
                }
                (s.sqrt(), e.id.clone())
            })
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        all
    }

    #[test]
    fn build_shapes_and_errors() {
        let imgs: Vec<Image> = (0..3).map(|i| random_image(i, 48)).collect();
        let idx = ThumbIndex::build([
            ("a", Class::Normal, &imgs[0]),
            ("b", Class::Abnormal, &imgs[1]),
            ("c", Class::Normal, &imgs[2]),
        ])
        .unwrap();
        assert_eq!(idx.len(), 3);
        assert!(idx.entries().iter().all(|e| e.thumb.len() == 1024));
        let dup = ThumbIndex::build([("a", Class::Normal, &imgs[0]), ("a", Class::Normal, &imgs[1])]);
        assert!(matches!(dup, Err(Error::DuplicateId(_))));
        assert!(matches!(ThumbIndex::build(std::iter::empty()), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn constant_thumb() {
        let img = Image::filled(1024, 1024, 0.5).unwrap();
        assert!(thumbnail(&img).unwrap().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn exact_match_and_self_exclusion() {
        let (items, index) = pool(30, 1);
        let (id, label, img) = items.iter().find(|(_, l, _)| *l == Class::Normal).unwrap();
        let hit = index.nearest(img, 1, *label, None).unwrap();
        assert_eq!(hit[0].id, *id);
        assert_eq!(hit[0].distance, 0.0);
        let other = index.nearest(img, 1, *label, Some(id)).unwrap();
        assert_ne!(other[0].id, *id);
    }

    #[test]
    fn matches_linear_scan_over_100() {
        let (_, index) = pool(100, 2);
        for q in 0..20 {
            let query = random_image(10_000 + q, 80);
            let qt = thumbnail(&query).unwrap();
            let got = index.nearest(&query, 1, Class::Normal, None).unwrap();
            let want = brute_force(&index, &qt, Class::Normal, None);
            assert_eq!(got[0].id, want[0].1);
            let got3 = index.nearest(&query, 3, Class::Abnormal, None).unwrap();
            let want3 = brute_force(&index, &qt, Class::Abnormal, None);
            for (g, w) in got3.iter().zip(&want3) {
                assert_eq!(g.id, w.1);
                assert!((g.distance - w.0).abs() < 1e-12);
            }
            assert!(got3.windows(2).all(|p| p[0].distance <= p[1].distance));
        }
    }

    #[test]
    fn insufficient_candidates() {
        let (_, index) = pool(6, 3);
        let n = index.count(Class::Normal);
        let r = index.nearest(&random_image(1, 32), n + 1, Class::Normal, None);
        assert!(matches!(r, Err(Error::InsufficientCandidates { .. })));
        assert!(index.nearest(&random_image(1, 32), 0, Class::Normal, None).is_err());
    }

    #[test]
    fn ties_break_by_id() {
        let img = Image::filled(32, 32, 0.25).unwrap();
        let idx = ThumbIndex::build([
            ("zeta", Class::Normal, &img),
            ("alpha", Class::Normal, &img),
            ("mid", Class::Normal, &img),
        ])
        .unwrap();
        let got = idx.nearest(&img, 3, Class::Normal, None).unwrap();
        let ids: Vec<_> = got.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["alpha", "mid", "zeta"]);
    }

    #[test]
    fn sidecar_round_trip_and_corruption() {
        let (_, index) = pool(12, 4);
        let bytes = index.to_bytes();
        assert_eq!(&bytes[..4], b"THIX");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 12);
        assert_eq!(bytes.len(), 8 + 12 * (4 + 5 + 1 + 4096));
        assert_eq!(ThumbIndex::from_bytes(&bytes).unwrap(), index);
        assert!(ThumbIndex::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(ThumbIndex::from_bytes(b"XXXX\0\0\0\0").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(ThumbIndex::from_bytes(&extra).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn prefix_and_oracle(seed in 0u64..10_000, n in 10usize..60, k in 1usize..4) {
            let (_, index) = pool(n, seed);
            let query = random_image(seed + 77, 40);
            let qt = thumbnail(&query).unwrap();
            let want = brute_force(&index, &qt, Class::Normal, None);
            prop_assume!(want.len() > k);
            let a = index.nearest(&query, k, Class::Normal, None).unwrap();
            let b = index.nearest(&query, k + 1, Class::Normal, None).unwrap();
            prop_assert_eq!(&a[..], &b[..k]);
            for (g, w) in b.iter().zip(&want) {
                prop_assert_eq!(&g.id, &w.1);
            }
        }
    }
}
