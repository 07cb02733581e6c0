//! Evaluates the adversarial objectives on hand-picked discriminator scores.

use cxrpair::dataset::{synth_phantom, PhantomSpec};
use cxrpair::losses::{abn2nor_loss, adversarial_term, realistic_loss, DiscriminatorScores};
use cxrpair::registration::binomial_blur;

fn main() -> cxrpair::Result<()> {
    let (img, _) = synth_phantom(&PhantomSpec::normal(2, 64))?;
    let blurry = binomial_blur(&binomial_blur(&img));

    for (name, s) in [
        ("perfect", DiscriminatorScores::perfect(8)),
        ("undecided", DiscriminatorScores::constant(8, 0.5, 0.5)),
        ("fooled", DiscriminatorScores::constant(8, 0.2, 0.9)),
    ] {
        println!(
            "{name:<10} adversarial {:>9.4}  realistic(exact) {:>9.4}  realistic(blurred) {:>9.4}  abn2nor(blurred) {:>9.4}",
            adversarial_term(&s)?,
            realistic_loss(&s, &img, &img)?,
            realistic_loss(&s, &img, &blurry)?,
            abn2nor_loss(&s, &img, &blurry)?,
        );
    }
    Ok(())
}
