//! Turns one abnormal phantom into its pseudo-normal counterpart and shows
//! that the residual lives only inside the annotated boxes.

use cxrpair::dataset::{generate_phantom_pool_with, synth_phantom, Label, PhantomSpec, PoolOptions};
use cxrpair::retrieval::Class;
use cxrpair::synthesis::{synth_pseudo_normal, DonorPool, PoolItem, SynthOptions};

fn main() -> cxrpair::Result<()> {
    let pool = generate_phantom_pool_with(12, 9, 0.5, &PoolOptions { size: 64, opacity_count: 1 })?;
    let (reference, _) = synth_phantom(&PhantomSpec::normal(100, 64))?;
    let items: Vec<PoolItem> = pool
        .images
        .iter()
        .map(|(id, image)| {
            let rec = pool.annotations.get(id).unwrap();
            let class = if rec.label == Label::Abnormal { Class::Abnormal } else { Class::Normal };
            PoolItem { id, class, image, boxes: &rec.boxes }
        })
        .collect();
    let opts = SynthOptions::default();
    let donors = DonorPool::build(&items, &reference, &opts.align)?;

    let input = items.iter().find(|it| it.class == Class::Abnormal).unwrap();
    let pair = synth_pseudo_normal(&donors, input.id, input.image, input.boxes, &opts)?;
    let (inside, outside) = pair.residual_extrema();
    println!("{} <- donor {} (thumbnail distance {:.4})", pair.pair_id, pair.donor_id, pair.donor_distance);
    println!("alignment loss {:.5}, transform {:?}", pair.final_loss, pair.transform.params().map(|v| (v * 1e3).round() / 1e3));
    println!("peak residual inside boxes {inside:.4}, outside {outside:e}");
    for s in &pair.stage_log {
        println!("  {:?}: {}", s.stage, s.detail);
    }
    Ok(())
}
