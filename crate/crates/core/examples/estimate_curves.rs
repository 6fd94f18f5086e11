//! Quantile curves at several levels and the scale curve on a heteroscedastic sample.

use qlscale::bandwidths::BandwidthSet;
use qlscale::curve::equispaced;
use qlscale::quantile_scale::{estimate_quantile_curve, estimate_scale_curve};
use qlscale::rng::{stream, ROLE_DATA};
use qlscale::simulation::{generate, Model};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sample = generate(&Model::M1h, 200, &mut stream(11, ROLE_DATA, 0))?;
    let bw = BandwidthSet::from_sample(&sample)?;
    let grid = equispaced(0.0, 1.0, 11);

    let taus = [0.1, 0.5, 0.9];
    let curves = taus
        .iter()
        .map(|&tau| estimate_quantile_curve(&sample, tau, &bw, &grid))
        .collect::<Result<Vec<_>, _>>()?;
    let scale = estimate_scale_curve(&sample, &curves[1], &bw, &grid)?;

    println!("{:>5} {:>9} {:>9} {:>9} {:>9} {:>9}", "x", "q0.1", "q0.5", "q0.9", "s", "truth s");
    for (k, &x) in grid.iter().enumerate() {
        // |N(0,1)| has median 0.6745
        let s_true = (2.0 + x) / 10.0 * 0.674_489_750_196_081_7;
        println!(
            "{x:>5.2} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {s_true:>9.4}",
            curves[0].values()[k],
            curves[1].values()[k],
            curves[2].values()[k],
            scale.values()[k]
        );
    }
    Ok(())
}
