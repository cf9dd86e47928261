//! Simulates a twisted rectangle from the zero-twist start and from the
//! mirror of its first equilibrium, showing the two bending modes.

use coldbend_core::panel::{mirrored_init, shape_distance, simulate_panel, InitMode, PanelConfig};
use coldbend_dataset::SaddleParams;

fn main() -> anyhow::Result<()> {
    let boundary = SaddleParams { width: 450.0, height: 400.0, twist: 25.0 }.boundary()?;
    let cfg = PanelConfig::default();
    let first = simulate_panel(&boundary, &InitMode::ZeroTwist, &cfg)?;
    let init = mirrored_init(&boundary, &first.fit.patch)?;
    let second = simulate_panel(&boundary, &InitMode::Patch(init), &cfg)?;
    println!("first mode:  sigma {:.2} MPa, energy {:.4e}", first.record.sigma, first.equilibrium.energy);
    println!("second mode: sigma {:.2} MPa, energy {:.4e}", second.record.sigma, second.equilibrium.energy);
    println!("separation of the interior controls: {:.2} mm", shape_distance(&first.record.shape, &second.record.shape));
    Ok(())
}
