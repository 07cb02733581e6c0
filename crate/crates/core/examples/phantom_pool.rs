//! Generates a small seeded phantom pool and writes it in the on-disk layout
//! the `cxrpair synth` command reads.
//!
//!     cargo run --example phantom_pool -- /tmp/pool

use cxrpair::dataset::{generate_phantom_pool_with, save_annotations, save_image, Label, PoolOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "phantom_pool".into());
    let out = std::path::Path::new(&out);
    std::fs::create_dir_all(out)?;

    let pool = generate_phantom_pool_with(8, 42, 0.5, &PoolOptions { size: 128, opacity_count: 2 })?;
    for (id, img) in &pool.images {
        save_image(img, out.join(format!("{id}.pgm")))?;
        let rec = pool.annotations.get(id).unwrap();
        let boxes: Vec<String> = rec.boxes.iter().map(|b| format!("[{:.0},{:.0} {:.0}x{:.0}]", b.x, b.y, b.w, b.h)).collect();
        println!("{id}  {:<9} mean {:.3}  {}", rec.label.class_name(), img.mean(), boxes.join(" "));
    }
    save_annotations(&pool.annotations, out.join("annotations.csv"))?;
    println!(
        "{} normal, {} abnormal -> {}",
        pool.annotations.count(Label::Normal),
        pool.annotations.count(Label::Abnormal),
        out.display()
    );
    Ok(())
}
