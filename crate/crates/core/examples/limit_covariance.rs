//! Covariance of the limiting independence process against a Monte-Carlo
//! estimate from the linear expansion.

use qlscale::asymptotics::{limit_covariance, monte_carlo_covariance, rescale_error_model, Family, LimitCovarianceSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for family in [Family::Normal { mu: 0.0, sigma: 1.0 }, Family::StudentT { nu: 3.0 }] {
        let spec = LimitCovarianceSpec::uniform(rescale_error_model(family, 0.5)?);
        let points = [(0.5, 0.5, 0.5, 0.5), (0.3, -1.0, 0.7, 0.5), (0.5, 0.0, 0.5, 0.0)];
        let checks = monte_carlo_covariance(&spec, 400, 2000, &points, &mut ChaCha8Rng::seed_from_u64(1));
        println!("{family:?}");
        for (p, c) in points.iter().zip(&checks) {
            println!(
                "  (s, y, t, z) = {p:?}: limit {:.5}, Monte-Carlo {:.5} ± {:.5}",
                limit_covariance(&spec, p.0, p.1, p.2, p.3),
                c.empirical,
                c.standard_error
            );
        }
    }
    Ok(())
}
