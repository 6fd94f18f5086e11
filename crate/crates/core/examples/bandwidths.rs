//! Data-driven bandwidths across sample sizes, with the bootstrap noise scale.

use qlscale::bandwidths::{bootstrap_alpha, rice_variance, BandwidthSet};
use qlscale::bootstrap::{fit, TestKind, DEFAULT_GRID_M};
use qlscale::rng::{stream, ROLE_DATA};
use qlscale::simulation::{generate, Model};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>6} {:>9} {:>8} {:>8} {:>9} {:>9}", "n", "sigma2", "h", "d", "b", "alpha");
    for n in [50, 100, 200, 400, 800] {
        let sample = generate(&Model::M1 { a: 0.0 }, n, &mut stream(5, ROLE_DATA, n as u64))?;
        let bw = BandwidthSet::from_sample(&sample)?;
        let f = fit(&sample, 0.5, &bw, TestKind::Location, bw.data_trim(), DEFAULT_GRID_M, true)?;
        let alpha = bootstrap_alpha(&f.residuals.eps, n)?;
        println!(
            "{n:>6} {:>9.5} {:>8.4} {:>8.4} {:>9.6} {alpha:>9.5}",
            rice_variance(&sample)?,
            bw.h,
            bw.d,
            bw.b
        );
        for w in bw.warnings() {
            println!("       {w}");
        }
    }
    Ok(())
}
