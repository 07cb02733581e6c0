//! Pseudo-abnormal augmentation: every normal image receives pathology from
//! its `k` nearest abnormal donors. Images and a manifest go to the output
//! directory.
//!
//!     cargo run --example augment -- /tmp/augmented

use cxrpair::dataset::{generate_phantom_pool_with, synth_phantom, Label, PhantomSpec, PoolOptions};
use cxrpair::retrieval::Class;
use cxrpair::synthesis::{augment_dataset, DonorPool, PoolItem, SynthOptions};

fn main() -> cxrpair::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "augmented".into());
    let pool = generate_phantom_pool_with(10, 21, 0.4, &PoolOptions { size: 64, opacity_count: 1 })?;
    let (reference, _) = synth_phantom(&PhantomSpec::normal(500, 64))?;
    let class = |id: &str| {
        if pool.annotations.get(id).unwrap().label == Label::Abnormal { Class::Abnormal } else { Class::Normal }
    };
    let items: Vec<PoolItem> = pool
        .images
        .iter()
        .map(|(id, image)| PoolItem { id, class: class(id), image, boxes: &pool.annotations.get(id).unwrap().boxes })
        .collect();
    let opts = SynthOptions::default();
    let donors = DonorPool::build(&items, &reference, &opts.align)?;

    let normals: Vec<(String, cxrpair::Image)> =
        pool.images.iter().filter(|(id, _)| class(id) == Class::Normal).cloned().collect();
    let manifest = augment_dataset(&normals, &donors, 2, std::path::Path::new(&out), &opts)?;
    println!("{} normals -> {} pseudo-abnormal pairs in {out}", normals.len(), manifest.pair_count());
    for w in &manifest.warnings {
        println!("warning: {w}");
    }
    print!("{}", String::from_utf8_lossy(&manifest.to_csv()?));
    Ok(())
}
