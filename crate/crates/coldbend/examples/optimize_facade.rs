//! Optimizes the saddle testbed facade with a trained model, given as the
//! first argument, and reports the panels above the stress limit.

use coldbend::SaddleTestbed;
use coldbend_design::{initialize_design, OptimizeConfig, Problem};
use coldbend_surrogate::MdnModel;

fn main() -> anyhow::Result<()> {
    let path = std::env::args().nth(1).ok_or_else(|| anyhow::anyhow!("usage: optimize_facade MODEL"))?;
    let model = MdnModel::load(std::path::Path::new(&path))?;
    let testbed = SaddleTestbed::default();
    let (mesh, reference) = (testbed.mesh()?, testbed.reference()?);
    let cfg = OptimizeConfig::default();
    let mut state = initialize_design(&mesh, &model, Some(&reference), &cfg)?;
    let problem = Problem::new(&state, &model, Some(&reference), cfg)?;
    let before = problem.evaluate(&state)?;
    println!("start: {} of {} panels violating, mean kink {:.3} deg", before.violating, before.faces, before.mean_kink_deg);
    problem.run(&mut state, |r, _| {
        println!("iteration {:2}: {} violating, mean kink {:.3} deg", r.iteration, r.report.violating, r.report.mean_kink_deg);
        true
    })?;
    Ok(())
}
