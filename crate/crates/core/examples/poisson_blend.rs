//! Pastes an opacity region into a normal phantom and compares hard paste
//! against Poisson blending with both solvers.

use cxrpair::blend::{laplacian, poisson_blend, solve_poisson, BlendMode, BlendRequest, Solver};
use cxrpair::dataset::{synth_phantom, PhantomSpec};
use cxrpair::image::BBox;

fn seam(img: &cxrpair::Image, r: &BBox) -> f64 {
    let (x0, x1) = (r.x as usize, (r.x + r.w) as usize - 1);
    (r.y as usize..(r.y + r.h) as usize)
        .map(|y| (img.get(x0, y) - img.get(x0 - 1, y)).abs() + (img.get(x1, y) - img.get(x1 + 1, y)).abs())
        .sum::<f64>()
}

fn main() -> cxrpair::Result<()> {
    let (target, _) = synth_phantom(&PhantomSpec::normal(1, 128))?;
    let (source, boxes) = synth_phantom(&PhantomSpec::abnormal(2, 128, 1))?;
    let region = boxes[0];
    println!("region {region:?}");

    let paste = poisson_blend(&BlendRequest::new(&target, &source, region).mode(BlendMode::Paste))?;
    println!("paste    seam gradient {:.4}", seam(&paste, &region));
    for solver in [Solver::ConjugateGradient, Solver::GaussSeidel] {
        let req = BlendRequest::new(&target, &source, region).solver(solver).tol(1e-8);
        let sol = solve_poisson(&req)?;
        let out = poisson_blend(&req)?;
        println!(
            "{solver:<12} seam gradient {:.4}, {} iterations, residual {:.1e}",
            seam(&out, &region),
            sol.iterations,
            sol.residual
        );
    }
    let lap = laplacian(&source)?;
    let (cx, cy) = region.center();
    println!("source laplacian at region centre {:.5}", lap.get(cx as usize, cy as usize));
    Ok(())
}
