//! Residual attention from an image and a synthetic counterpart, applied to
//! a toy feature raster.

use cxrpair::attention::{apply_attention, residual_map, to_attention, FeatureRaster, IdentityGenerator};
use cxrpair::blend::{poisson_blend, BlendRequest};
use cxrpair::dataset::{synth_phantom, PhantomSpec};

fn main() -> cxrpair::Result<()> {
    let (x, boxes) = synth_phantom(&PhantomSpec::abnormal(4, 64, 1))?;
    let (clean, _) = synth_phantom(&PhantomSpec::normal(4, 64))?;
    // the normal twin stands in for a generator that removes the opacity
    let counterpart = poisson_blend(&BlendRequest::new(&x, &clean, boxes[0]))?;
    let generator = move |_: &cxrpair::Image| counterpart.clone();

    let attn = to_attention(&residual_map(&x, &generator)?, 8, 8)?;
    for row in 0..attn.height {
        let cells: Vec<String> = (0..attn.width).map(|c| format!("{:.2}", attn.get(c, row))).collect();
        println!("{}", cells.join(" "));
    }
    println!("box {:?}, peak cell {:?}", boxes[0], attn.argmax());

    let feats = FeatureRaster::new(8, 8, 2, (0..128).map(|i| 1.0 + (i % 3) as f64).collect())?;
    let boosted = apply_attention(&feats, &attn, 1.0)?;
    let (cx, cy) = attn.argmax();
    println!("feature at peak: {} -> {}", feats.get(0, cx, cy), boosted.get(0, cx, cy));

    let none = to_attention(&residual_map(&x, &IdentityGenerator)?, 8, 8)?;
    println!("identity generator, max weight {}", none.weights.iter().cloned().fold(0.0, f64::max));
    Ok(())
}
