//! Location-scale test on data from a heteroscedastic model without dependence
//! between covariate and error.

use std::time::Instant;

use qlscale::bandwidths::BandwidthSet;
use qlscale::bootstrap::{run_test, BootstrapConfig, TestKind};
use qlscale::rng::{stream, ROLE_DATA};
use qlscale::simulation::{generate, Model};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sample = generate(&Model::M3h { b: 0.0 }, 100, &mut stream(2024, ROLE_DATA, 0))?;
    let bw = BandwidthSet::from_sample(&sample)?;
    for w in bw.warnings() {
        eprintln!("warning: {w}");
    }
    let cfg = BootstrapConfig { replications: 200, seed: 7, ..Default::default() };

    let start = Instant::now();
    let out = run_test(&sample, 0.5, &bw, &cfg, TestKind::LocationScale)?;
    let r = &out.report;
    println!("h = {:.4}, b = {:.5}, alpha = {:.5}, trim unit = {}", bw.h, bw.b, out.analysis.bw.alpha, bw.trim_unit);
    println!("KS  = {:.4}  critical = {:?}  p = {:.3}  reject = {}", r.statistic_ks, r.critical_ks, r.p_ks, r.reject_ks);
    println!("CvM = {:.4}  critical = {:?}  p = {:.3}  reject = {}", r.statistic_cvm, r.critical_cvm, r.p_cvm, r.reject_cvm);
    println!("{} replications ({} failed) in {:.2?}", r.b_effective, r.failed, start.elapsed());
    Ok(())
}
