//! Increasing rearrangement of a non-monotone curve.

use qlscale::curve::{equispaced, Curve};
use qlscale::rearrangement::{increasing_rearrangement, RearrangeConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = equispaced(0.0, 1.0, 21);
    let g: Vec<f64> = grid.iter().map(|&x| x - 0.3 * (-50.0 * (x - 0.5f64).powi(2)).exp()).collect();
    let curve = Curve::new(grid.clone(), g)?;
    let cfg = RearrangeConfig::new(0.0, 1.0, grid.len())?;
    let sorted = increasing_rearrangement(&curve, &cfg)?;

    println!("{:>5} {:>9} {:>9}", "x", "g", "rearr.");
    for (k, x) in grid.iter().enumerate() {
        println!("{x:>5.2} {:>9.4} {:>9.4}", curve.values()[k], sorted.values()[k]);
    }
    println!("input monotone: {}, output monotone: {}", curve.is_nondecreasing(), sorted.is_nondecreasing());
    println!("idempotent: {}", increasing_rearrangement(&sorted, &cfg)? == sorted);
    Ok(())
}
