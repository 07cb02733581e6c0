//! Scores a noisy submission against phantom ground truth, with and without
//! false negatives, and prints the per-threshold counts.

use cxrpair::dataset::{generate_phantom_pool_with, PoolOptions};
use cxrpair::eval::{dataset_map, format_prediction_string, Detection, EvalOptions, ImageRecord};
use cxrpair::image::BBox;

fn main() -> cxrpair::Result<()> {
    let pool = generate_phantom_pool_with(20, 8, 0.6, &PoolOptions { size: 128, opacity_count: 2 })?;
    let mut records = Vec::new();
    for (i, (id, rec)) in pool.annotations.records.iter().enumerate() {
        let mut preds = Vec::new();
        for (j, b) in rec.boxes.iter().enumerate() {
            // every third box is missed, the rest are shifted a little
            if (i + j) % 3 == 2 {
                continue;
            }
            let shift = 2.0 * (i % 4) as f64;
            preds.push(Detection::new(BBox::new(b.x + shift, b.y, b.w, b.h)?, 0.5 + 0.1 * (j % 5) as f64)?);
        }
        if i % 5 == 0 {
            preds.push(Detection::new(BBox::new(4.0, 4.0, 10.0, 10.0)?, 0.2)?);
        }
        if i < 3 {
            println!("{id},{}", format_prediction_string(&preds));
        }
        records.push(ImageRecord { id: id.clone(), gts: rec.boxes.clone(), preds });
    }

    print!("{}", dataset_map(&records, &EvalOptions::default())?.to_text());
    let no_fn = EvalOptions { count_fn: false, ..Default::default() };
    println!("without false negatives: mAP {:.6}", dataset_map(&records, &no_fn)?.map);
    Ok(())
}
