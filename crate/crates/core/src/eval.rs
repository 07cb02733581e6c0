//! Challenge-style detection metric: per image, the mean over IoU
//! thresholds of `TP / (TP + FP + FN)`, averaged over scored images.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dataset::{csv_writer, AnnotationSet};
use crate::error::{Error, Result};
use crate::image::{iou, BBox};

pub const SUBMISSION_HEADER: [&str; 2] = ["patientId", "PredictionString"];
pub const REPORT_HEADER: [&str; 2] = ["metric", "value"];

/// Thresholds are snapped to this grid so `0.4 + 3 * 0.05` is `0.55`.
const GRID: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(bbox: BBox, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidArgument(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(Self { bbox, confidence })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub assignments: Vec<Assignment>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSet {
    start: f64,
    step: f64,
    stop: f64,
}

impl ThresholdSet {
    pub fn new(start: f64, step: f64, stop: f64) -> Result<Self> {
        let ok = start.is_finite()
            && step.is_finite()
            && stop.is_finite()
            && start > 0.0
            && start <= stop
            && stop <= 1.0
            && step > 0.0;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "threshold set {start}:{step}:{stop} needs 0 < start <= stop <= 1 and step > 0"
            )));
        }
        Ok(Self { start, step, stop })
    }

    /// 0.4 to 0.75 in steps of 0.05.
    pub fn challenge() -> Self {
        Self::new(0.4, 0.05, 0.75).expect("valid")
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn stop(&self) -> f64 {
        self.stop
    }

    pub fn values(&self) -> Vec<f64> {
        let span = self.stop - self.start;
        let ratio = span / self.step;
        let n = if (ratio.round() * self.step - span).abs() <= 1e-9 {
            ratio.round() as usize
        } else {
            ratio.floor() as usize
        };
        (0..=n)
            .map(|i| ((self.start + i as f64 * self.step) * GRID).round() / GRID)
            .collect()
    }
}

impl Default for ThresholdSet {
    fn default() -> Self {
        Self::challenge()
    }
}

impl FromStr for ThresholdSet {
    type Err = Error;

    /// `start:step:stop`, or a single value.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |p: &str| {
            p.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad threshold value `{p}` in `{s}`")))
        };
        match parts.as_slice() {
            [v] => {
                let v = num(v)?;
                Self::new(v, 1.0, v)
            }
            [a, b, c] => Self::new(num(a)?, num(b)?, num(c)?),
            _ => Err(Error::InvalidArgument(format!("threshold spec `{s}` is not start:step:stop"))),
        }
    }
}

/// Greedy matching at IoU `>= t`.
pub fn match_detections(preds: &[Detection], gts: &[BBox], t: f64) -> MatchResult {
    match_detections_with(preds, gts, t, true)
}

/// Greedy matching; `inclusive` selects `IoU >= t` over `IoU > t`.
pub fn match_detections_with(preds: &[Detection], gts: &[BBox], t: f64, inclusive: bool) -> MatchResult {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].confidence.total_cmp(&preds[a].confidence));
    let mut taken = vec![false; gts.len()];
    let mut assignments = Vec::new();
    for p in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let v = iou(&preds[p].bbox, gt);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, v)) = best {
            let pass = if inclusive { v >= t } else { v > t };
            if pass {
                taken[g] = true;
                assignments.push(Assignment { pred: p, gt: g, iou: v });
            }
        }
    }
    let tp = assignments.len();
    MatchResult {
        threshold: t,
        tp,
        fp: preds.len() - tp,
        fn_: gts.len() - tp,
        assignments,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub thresholds: ThresholdSet,
    /// Count false negatives in the denominator.
    pub count_fn: bool,
    pub inclusive: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            thresholds: ThresholdSet::challenge(),
            count_fn: true,
            inclusive: true,
        }
    }
}

/// Per-image score, or `None` for an image with neither boxes nor
/// predictions.
pub fn image_ap(preds: &[Detection], gts: &[BBox], thresholds: &ThresholdSet, count_fn: bool) -> Option<f64> {
    let opts = EvalOptions {
        thresholds: *thresholds,
        count_fn,
        inclusive: true,
    };
    score_image(preds, gts, &opts).0
}

fn score_image(preds: &[Detection], gts: &[BBox], opts: &EvalOptions) -> (Option<f64>, Vec<MatchResult>) {
    let ts = opts.thresholds.values();
    let matches: Vec<MatchResult> = ts
        .iter()
        .map(|&t| match_detections_with(preds, gts, t, opts.inclusive))
        .collect();
    if preds.is_empty() && gts.is_empty() {
        return (None, matches);
    }
    let sum: f64 = matches
        .iter()
        .map(|m| {
            let denom = m.tp + m.fp + if opts.count_fn { m.fn_ } else { 0 };
            if denom == 0 {
                0.0
            } else {
                m.tp as f64 / denom as f64
            }
        })
        .sum();
    (Some(sum / ts.len() as f64), matches)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub gts: Vec<BBox>,
    pub preds: Vec<Detection>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdCounts {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub map: f64,
    pub count_fn: bool,
    pub per_threshold: Vec<ThresholdCounts>,
    pub scored: usize,
    pub excluded: usize,
}

impl EvalReport {
    pub fn thresholds(&self) -> Vec<f64> {
        self.per_threshold.iter().map(|c| c.threshold).collect()
    }

    pub fn rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("mAP".to_string(), self.map.to_string()),
            ("count_fn".to_string(), self.count_fn.to_string()),
            ("images_scored".to_string(), self.scored.to_string()),
            ("images_excluded".to_string(), self.excluded.to_string()),
            ("thresholds".to_string(), self.per_threshold.len().to_string()),
        ];
        for c in &self.per_threshold {
            let t = format!("{:.2}", c.threshold);
            rows.push((format!("tp@{t}"), c.tp.to_string()));
            rows.push((format!("fp@{t}"), c.fp.to_string()));
            rows.push((format!("fn@{t}"), c.fn_.to_string()));
        }
        rows
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        {
            let mut w = csv_writer(&mut buf);
            w.write_record(REPORT_HEADER)?;
            for (k, v) in self.rows() {
                w.write_record([k, v])?;
            }
            w.flush().map_err(|e| Error::io("<report>", e))?;
        }
        Ok(buf)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mAP: {:.6}", self.map);
        let _ = writeln!(
            s,
            "images: {} scored, {} excluded (no boxes, no predictions)",
            self.scored, self.excluded
        );
        let _ = writeln!(s, "false negatives counted: {}", if self.count_fn { "yes" } else { "no" });
        let _ = writeln!(s, "{:>9} {:>7} {:>7} {:>7}", "threshold", "TP", "FP", "FN");
        for c in &self.per_threshold {
            let _ = writeln!(s, "{:>9.2} {:>7} {:>7} {:>7}", c.threshold, c.tp, c.fp, c.fn_);
        }
        s
    }
}

/// Mean image score over every image with a defined score.
pub fn dataset_map(records: &[ImageRecord], opts: &EvalOptions) -> Result<EvalReport> {
    let ts = opts.thresholds.values();
    let scored: Vec<(Option<f64>, Vec<MatchResult>)> = records
        .par_iter()
        .map(|r| score_image(&r.preds, &r.gts, opts))
        .collect();
    let mut per_threshold: Vec<ThresholdCounts> = ts
        .iter()
        .map(|&threshold| ThresholdCounts {
            threshold,
            tp: 0,
            fp: 0,
            fn_: 0,
        })
        .collect();
    let mut sum = 0.0;
    let mut n = 0usize;
    for (ap, matches) in &scored {
        for (c, m) in per_threshold.iter_mut().zip(matches) {
            c.tp += m.tp;
            c.fp += m.fp;
            c.fn_ += m.fn_;
        }
        if let Some(v) = ap {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyInput("no image has boxes or predictions; mAP undefined".into()));
    }
    Ok(EvalReport {
        map: sum / n as f64,
        count_fn: opts.count_fn,
        per_threshold,
        scored: n,
        excluded: records.len() - n,
    })
}

/// Parses one `confidence x y width height ...` string.
pub fn parse_prediction_string(s: &str) -> std::result::Result<Vec<Detection>, String> {
    let tokens: Vec<&str> = s.split_whitespace().collect();
    if tokens.len() % 5 != 0 {
        return Err(format!("{} values is not a multiple of 5", tokens.len()));
    }
    tokens
        .chunks(5)
        .map(|g| {
            let v: Vec<f64> = g
                .iter()
                .map(|t| t.parse::<f64>().map_err(|_| format!("non-numeric value `{t}`")))
                .collect::<std::result::Result<_, _>>()?;
            if !(0.0..=1.0).contains(&v[0]) {
                return Err(format!("confidence {} outside [0, 1]", v[0]));
            }
            let bbox = BBox::new(v[1], v[2], v[3], v[4]).map_err(|e| e.to_string())?;
            Ok(Detection { bbox, confidence: v[0] })
        })
        .collect()
}

pub fn format_prediction_string(dets: &[Detection]) -> String {
    dets.iter()
        .map(|d| format!("{} {} {} {} {}", d.confidence, d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Reads a `patientId,PredictionString` submission. Errors carry the file
/// line number.
pub fn parse_submission<R: Read>(reader: R) -> Result<BTreeMap<String, Vec<Detection>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut out = BTreeMap::new();
    let mut records = rdr.records();
    match records.next() {
        Some(h) => {
            let h = h?;
            if h.iter().collect::<Vec<_>>() != SUBMISSION_HEADER {
                return Err(Error::parse(1, format!("expected header `{}`", SUBMISSION_HEADER.join(","))));
            }
        }
        None => return Err(Error::parse(1, "empty submission file")),
    }
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(Error::parse(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let id = rec[0].trim();
        if id.is_empty() {
            return Err(Error::parse(line, "empty patientId"));
        }
        let dets = parse_prediction_string(&rec[1]).map_err(|m| Error::parse(line, m))?;
        if out.insert(id.to_string(), dets).is_some() {
            return Err(Error::parse(line, format!("duplicate patientId `{id}`")));
        }
    }
    Ok(out)
}

pub fn load_submission(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<Detection>>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_submission(std::io::BufReader::new(f))
}

pub fn write_submission(preds: &BTreeMap<String, Vec<Detection>>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(SUBMISSION_HEADER)?;
        for (id, dets) in preds {
            w.write_record([id.as_str(), &format_prediction_string(dets)])?;
        }
        w.flush().map_err(|e| Error::io("<submission>", e))?;
    }
    Ok(buf)
}

/// Pairs ground truth with predictions. Images without predictions get an
/// empty list; predictions for unknown ids are an error.
pub fn join_records(gt: &AnnotationSet, preds: &BTreeMap<String, Vec<Detection>>) -> Result<Vec<ImageRecord>> {
    if let Some(id) = preds.keys().find(|id| gt.get(id).is_none()) {
        return Err(Error::InvalidArgument(format!("predictions for unknown patientId `{id}`")));
    }
    Ok(gt
        .records
        .iter()
        .map(|(id, rec)| ImageRecord {
            id: id.clone(),
            gts: rec.boxes.clone(),
            preds: preds.get(id).cloned().unwrap_or_default(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    fn d(conf: f64, x: f64, y: f64, w: f64, h: f64) -> Detection {
        Detection::new(b(x, y, w, h), conf).unwrap()
    }

    #[test]
    fn threshold_values() {
        let t = ThresholdSet::challenge();
        let v = t.values();
        assert_eq!(v, [0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75]);
        let second: ThresholdSet = "0.4:0.1:0.6".parse().unwrap();
        assert_eq!(second.values(), [0.4, 0.5, 0.6]);
        let ragged = ThresholdSet::new(0.5, 0.2, 0.95).unwrap();
        assert_eq!(ragged.values(), [0.5, 0.7, 0.9]);
        let single: ThresholdSet = "0.5".parse().unwrap();
        assert_eq!(single.values(), [0.5]);
        assert!("0:0.1:0.5".parse::<ThresholdSet>().is_err());
        assert!("0.6:0.1:0.5".parse::<ThresholdSet>().is_err());
        assert!("0.4:0:0.5".parse::<ThresholdSet>().is_err());
        assert!("0.4:0.1".parse::<ThresholdSet>().is_err());
        assert!("0.4:x:0.5".parse::<ThresholdSet>().is_err());
    }

    #[test]
    fn match_examples() {
        let gt = [b(10.0, 10.0, 20.0, 20.0)];
        let m = match_detections(&[d(0.9, 10.0, 10.0, 20.0, 20.0)], &gt, 1.0);
        assert_eq!((m.tp, m.fp, m.fn_), (1, 0, 0));
        let m = match_detections(&[], &[gt[0], b(50.0, 50.0, 5.0, 5.0)], 0.5);
        assert_eq!((m.tp, m.fp, m.fn_), (0, 0, 2));
        let m = match_detections(&[d(0.9, 11.0, 10.0, 20.0, 20.0)], &gt, 1.0);
        assert_eq!(m.tp, 0);
    }

    #[test]
    fn worked_example_half() {
        let gt = [b(0.0, 0.0, 10.0, 10.0)];
        let pred = [d(0.8, 0.0, 0.0, 10.0, 5.5)];
        assert_eq!(iou(&pred[0].bbox, &gt[0]), 0.55);
        assert_eq!(image_ap(&pred, &gt, &ThresholdSet::challenge(), true), Some(0.5));
        let m = match_detections_with(&pred, &gt, 0.55, false);
        assert_eq!(m.tp, 0);
    }

    #[test]
    fn image_ap_rules() {
        let t = ThresholdSet::challenge();
        assert_eq!(image_ap(&[], &[], &t, true), None);
        assert_eq!(image_ap(&[], &[], &t, false), None);
        let gt = [b(0.0, 0.0, 10.0, 10.0)];
        let dup = [d(0.9, 0.0, 0.0, 10.0, 10.0), d(0.8, 0.0, 0.0, 10.0, 10.0)];
        assert_eq!(image_ap(&dup, &gt, &t, true), Some(0.5));
        assert_eq!(image_ap(&[], &gt, &t, false), Some(0.0));
        assert_eq!(image_ap(&[], &gt, &t, true), Some(0.0));
        let spurious = [d(0.5, 40.0, 40.0, 5.0, 5.0)];
        assert_eq!(image_ap(&spurious, &[], &t, true), Some(0.0));
    }

    #[test]
    fn dataset_examples() {
        let opts = EvalOptions::default();
        let gt = vec![b(0.0, 0.0, 10.0, 10.0)];
        let perfect = ImageRecord {
            id: "a".into(),
            gts: gt.clone(),
            preds: vec![d(1.0, 0.0, 0.0, 10.0, 10.0)],
        };
        let half = ImageRecord {
            id: "b".into(),
            gts: gt.clone(),
            preds: vec![d(0.9, 0.0, 0.0, 10.0, 10.0), d(0.8, 0.0, 0.0, 10.0, 10.0)],
        };
        let empty = ImageRecord {
            id: "c".into(),
            gts: vec![],
            preds: vec![],
        };
        let r = dataset_map(&[perfect.clone(), perfect.clone()], &opts).unwrap();
        assert_eq!(r.map, 1.0);
        let r = dataset_map(&[half, perfect, empty.clone()], &opts).unwrap();
        assert_eq!(r.map, 0.75);
        assert_eq!((r.scored, r.excluded), (2, 1));
        assert_eq!(r.per_threshold.len(), 8);
        assert!(r.per_threshold.iter().all(|c| (c.tp, c.fp, c.fn_) == (2, 1, 0)));
        assert!(dataset_map(&[empty], &opts).is_err());
        assert!(dataset_map(&[], &opts).is_err());
    }

    #[test]
    fn submission_parsing() {
        let text = "patientId,PredictionString\np1,0.9 10 20 30 40 0.5 1 2 3 4\np2,\n";
        let s = parse_submission(text.as_bytes()).unwrap();
        assert_eq!(s["p1"].len(), 2);
        assert_eq!(s["p1"][1], d(0.5, 1.0, 2.0, 3.0, 4.0));
        assert!(s["p2"].is_empty());
        let again = parse_submission(&write_submission(&s).unwrap()[..]).unwrap();
        assert_eq!(again, s);

        let err = |t: &str| match parse_submission(t.as_bytes()) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(err("patientId,PredictionString\np1,0.9 1 2 3\n"), 2);
        assert_eq!(err("patientId,PredictionString\np1,\np2,1.5 1 2 3 4\n"), 3);
        assert_eq!(err("patientId,PredictionString\np1,0.5 a 2 3 4\n"), 2);
        assert_eq!(err("patientId,PredictionString\np1,\np1,\n"), 3);
        assert_eq!(err("id,preds\n"), 1);
    }

    #[test]
    fn join_rules() {
        let mut gt = AnnotationSet::new();
        gt.insert("a", crate::dataset::Label::Abnormal, vec![b(1.0, 1.0, 4.0, 4.0)]).unwrap();
        gt.insert("b", crate::dataset::Label::Normal, vec![]).unwrap();
        let mut preds = BTreeMap::new();
        preds.insert("a".to_string(), vec![d(0.7, 1.0, 1.0, 4.0, 4.0)]);
        let recs = join_records(&gt, &preds).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs[1].preds.is_empty());
        preds.insert("zzz".to_string(), vec![]);
        assert!(join_records(&gt, &preds).is_err());
    }

    /// Maximum matching size by exhaustive enumeration.
    fn max_matching(preds: &[Detection], gts: &[BBox], t: f64, p: usize, used: &mut Vec<bool>) -> usize {
        if p == preds.len() {
            return 0;
        }
        let mut best = max_matching(preds, gts, t, p + 1, used);
        for g in 0..gts.len() {
            if !used[g] && iou(&preds[p].bbox, &gts[g]) >= t {
                used[g] = true;
                best = best.max(1 + max_matching(preds, gts, t, p + 1, used));
                used[g] = false;
            }
        }
        best
    }

    fn small_box() -> impl Strategy<Value = BBox> {
        (0u8..6, 0u8..6, 1u8..5, 1u8..5).prop_map(|(x, y, w, h)| b(x as f64, y as f64, w as f64, h as f64))
    }

    proptest! {
        #[test]
        fn greedy_vs_optimal(
            preds in prop::collection::vec((small_box(), 0u8..4), 0..=5),
            gts in prop::collection::vec(small_box(), 0..=5),
            ti in 1u8..10,
        ) {
            let t = ti as f64 / 10.0;
            let preds: Vec<Detection> = preds.into_iter().map(|(bx, c)| Detection { bbox: bx, confidence: c as f64 / 3.0 }).collect();
            let m = match_detections(&preds, &gts, t);
            prop_assert_eq!(m.tp + m.fn_, gts.len());
            prop_assert_eq!(m.tp + m.fp, preds.len());
            let mut gs: Vec<usize> = m.assignments.iter().map(|a| a.gt).collect();
            let mut ps: Vec<usize> = m.assignments.iter().map(|a| a.pred).collect();
            gs.sort_unstable();
            gs.dedup();
            ps.sort_unstable();
            ps.dedup();
            prop_assert_eq!(gs.len(), m.tp);
            prop_assert_eq!(ps.len(), m.tp);
            prop_assert!(m.assignments.iter().all(|a| a.iou >= t));
            let opt = max_matching(&preds, &gts, t, 0, &mut vec![false; gts.len()]);
            prop_assert!(m.tp <= opt);
            // greedy is deterministic even where it is suboptimal
            prop_assert_eq!(&match_detections(&preds, &gts, t), &m);
        }

        #[test]
        fn ap_bounds_and_spurious(
            gts in prop::collection::vec(small_box(), 1..=4),
            preds in prop::collection::vec((small_box(), 0u8..4), 0..=4),
        ) {
            let t = ThresholdSet::challenge();
            let preds: Vec<Detection> = preds.into_iter().map(|(bx, c)| Detection { bbox: bx, confidence: c as f64 / 3.0 }).collect();
            let ap = image_ap(&preds, &gts, &t, true).unwrap();
            prop_assert!((0.0..=1.0).contains(&ap));
            let mut more = preds.clone();
            more.push(Detection { bbox: b(100.0, 100.0, 3.0, 3.0), confidence: 0.0 });
            let ap2 = image_ap(&more, &gts, &t, true).unwrap();
            prop_assert!(ap2 < ap || ap == 0.0);
            let mut extra = gts.clone();
            extra.push(b(200.0, 200.0, 3.0, 3.0));
            let ap3 = image_ap(&preds, &extra, &t, true).unwrap();
            prop_assert!(ap3 < ap || ap == 0.0);
            let nofn = image_ap(&preds, &gts, &t, false).unwrap();
            prop_assert!(nofn >= ap);
        }

        #[test]
        fn harder_thresholds_lower_score(
            gts in prop::collection::vec(small_box(), 1..=3),
            preds in prop::collection::vec((small_box(), 0u8..4), 1..=3),
        ) {
            let preds: Vec<Detection> = preds.into_iter().map(|(bx, c)| Detection { bbox: bx, confidence: c as f64 / 3.0 }).collect();
            let base = image_ap(&preds, &gts, &ThresholdSet::new(0.3, 0.1, 0.5).unwrap(), true).unwrap();
            let longer = image_ap(&preds, &gts, &ThresholdSet::new(0.3, 0.1, 0.8).unwrap(), true).unwrap();
            prop_assert!(longer <= base + 1e-12);
        }
    }
}
