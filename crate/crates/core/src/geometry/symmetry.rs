//! The eight equivalent encodings of one simulated panel: four cyclic corner
//! relabelings, each with and without a mirror image.

use super::boundary::shift_net;
use super::compact::{decode_panel, encode_panel, CompactBoundary, Shape};
use super::patch::BezierPatch;
use crate::P3;
use nalgebra::Matrix3;

/// Reflection used for the mirror images (`y -> -y` in the canonical pose).
pub fn mirror_matrix() -> Matrix3<f64> {
    Matrix3::from_diagonal(&P3::new(1.0, -1.0, 1.0))
}

/// Element `mirror * 4 + shift` applies `shift` cyclic relabelings to the
/// (optionally mirrored) panel and re-canonicalizes. Element 0 is the input.
pub fn orbit_element(p: &CompactBoundary, z: &Shape, mirror: bool, shift: usize) -> crate::Result<(CompactBoundary, Shape)> {
    if !mirror && shift % 4 == 0 {
        return Ok((*p, *z));
    }
    let (mut b, mut patch) = decode_panel(p, z)?;
    if mirror {
        let m = mirror_matrix();
        b = b.transformed(&m, &P3::zeros());
        patch = BezierPatch::new(patch.ctrl.map(|row| row.map(|c| m * c)));
    }
    for _ in 0..shift % 4 {
        b = b.shifted();
        patch = BezierPatch::new(shift_net(&patch.ctrl));
    }
    let (enc, shape) = encode_panel(&b, &patch)?;
    Ok((enc.compact, shape))
}

pub fn symmetry_orbit(p: &CompactBoundary, z: &Shape) -> crate::Result<Vec<(CompactBoundary, Shape)>> {
    let mut out = Vec::with_capacity(8);
    for mirror in [false, true] {
        for shift in 0..4 {
            out.push(orbit_element(p, z, mirror, shift)?);
        }
    }
    Ok(out)
}
