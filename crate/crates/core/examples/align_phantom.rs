//! Perturbs a phantom with a known similarity transform and recovers it.

use cxrpair::dataset::{synth_phantom, PhantomSpec};
use cxrpair::image::{apply_affine, rms_diff, Affine2D};
use cxrpair::registration::{align, AlignOptions};

fn main() -> cxrpair::Result<()> {
    let (reference, _) = synth_phantom(&PhantomSpec::normal(7, 64))?;
    let perturb = Affine2D::similarity(3f64.to_radians(), 1.03, 0.04, -0.05);
    let moved = apply_affine(&reference, &perturb, 64, 64)?;

    let res = align(&moved, &reference, &AlignOptions::default())?;
    let want = perturb.inverse()?;
    println!("expected  {:?}", want.params().map(|v| (v * 1e4).round() / 1e4));
    println!("recovered {:?}", res.transform.params().map(|v| (v * 1e4).round() / 1e4));
    println!(
        "loss {:.5} -> {:.5} after {} iterations{}",
        res.initial_loss,
        res.final_loss,
        res.iterations,
        if res.converged { "" } else { " (limit)" }
    );
    let restored = apply_affine(&moved, &res.transform, 64, 64)?;
    println!("rms to reference: before {:.4}, after {:.4}", rms_diff(&moved, &reference)?, rms_diff(&restored, &reference)?);
    Ok(())
}
