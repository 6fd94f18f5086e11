//! Small rejection-rate study: size and power of the location test in model 3.
//! Pass the number of runs as the first argument (default 20).

use qlscale::bootstrap::TestKind;
use qlscale::simulation::{run_study, Model, StudyConfig, StudyResult};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let runs: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut rows = Vec::new();
    for b in [0.0, 2.0, 5.0] {
        let mut cfg = StudyConfig::new(Model::M3 { b }, 100, runs, TestKind::Location);
        cfg.seed = 2025;
        cfg.workers = workers;
        rows.push(run_study(&cfg)?);
    }
    print!("{}", StudyResult::table(&rows));
    StudyResult::write_csv(&rows, std::io::stdout())?;
    Ok(())
}
