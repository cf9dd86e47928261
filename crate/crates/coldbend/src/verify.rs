//! Invariant suites run by `coldbend verify`: energy gradients against
//! central differences, the flat-panel null case, scale invariance of the
//! stress, and exactness of the boundary encoding.

use coldbend_core::geometry::compact::compact_encode;
use coldbend_core::geometry::{compact_decode, EdgeCurveParams, PanelBoundary};
use coldbend_core::panel::PanelConfig;
use coldbend_core::shell::{init_panel_mesh, minimize_panel, Material, MeshOptions, PanelEnergy, SolverOptions};
use coldbend_core::P3;
use coldbend_dataset::{sample_boundary, SamplingRanges};
use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    /// Largest error found, in the suite's own measure.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SuiteResult {
    fn new(name: &str, cases: usize, worst: f64, tolerance: f64) -> Self {
        Self { name: name.into(), cases, worst, tolerance, passed: worst.is_finite() && worst <= tolerance }
    }

    fn failed(name: &str, message: impl std::fmt::Display) -> Self {
        log::error!("{name}: {message}");
        Self { name: name.into(), cases: 0, worst: f64::INFINITY, tolerance: 0.0, passed: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random states or boundaries per suite.
    pub cases: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 1, cases: 100 }
    }
}

/// A twisted, curved boundary in general position.
fn curved_boundary(rng: &mut ChaCha8Rng) -> PanelBoundary {
    loop {
        let draw = sample_boundary(rng, &SamplingRanges::default());
        if let Ok(b) = draw.boundary() {
            return b;
        }
    }
}

/// Energy gradient of the panel model against central differences at
/// random perturbations of an initial panel mesh.
pub fn shell_gradients(opts: &VerifyOptions) -> SuiteResult {
    const NAME: &str = "shell energy gradient";
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let m = match Material::default().params() {
        Ok(m) => m,
        Err(e) => return SuiteResult::failed(NAME, e),
    };
    let mut worst = 0.0f64;
    for _ in 0..opts.cases {
        let b = curved_boundary(&mut rng);
        let Ok(mesh) = init_panel_mesh(&b.zero_twist_patch(), &MeshOptions::with_boundary_edges(12)) else {
            return SuiteResult::failed(NAME, "meshing failed");
        };
        let Ok(energy) = PanelEnergy::new(&mesh, &m, &SolverOptions::default()) else {
            return SuiteResult::failed(NAME, "energy setup failed");
        };
        let layout = energy.layout();
        let z: Vec<f64> = energy
            .dofs()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let amp = if i < layout.n_x { 0.5 } else if i < layout.n_x + layout.n_phi { 0.02 } else { 0.2 };
                v + amp * rng.random_range(-1.0..1.0)
            })
            .collect();
        let Some(g) = energy.gradient(&z) else { return SuiteResult::failed(NAME, "gradient undefined") };
        let scale = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut err = 0.0f64;
        for j in 0..z.len() {
            let h = if (layout.n_x..layout.n_x + layout.n_phi).contains(&j) { 1e-7 } else { 1e-5 };
            let (mut zp, mut zm) = (z.clone(), z.clone());
            zp[j] += h;
            zm[j] -= h;
            let (Some(ep), Some(em)) = (energy.value(&zp), energy.value(&zm)) else {
                return SuiteResult::failed(NAME, "energy undefined near a test state");
            };
            err = err.max(((ep - em) / (2.0 * h) - g[j]).abs());
        }
        worst = worst.max(err / scale);
    }
    SuiteResult::new(NAME, opts.cases, worst, 1e-6)
}

/// Coplanar corners with straight edges and arbitrary edge-plane vectors.
fn flat_boundary(rng: &mut ChaCha8Rng) -> PanelBoundary {
    let l = |rng: &mut ChaCha8Rng| rng.random_range(150.0..600.0f64);
    let (w, h) = (l(rng), l(rng));
    let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-0.15..0.15) * w.min(h);
    let local = [
        P3::new(jitter(rng), jitter(rng), 0.0),
        P3::new(w + jitter(rng), jitter(rng), 0.0),
        P3::new(w + jitter(rng), h + jitter(rng), 0.0),
        P3::new(jitter(rng), h + jitter(rng), 0.0),
    ];
    let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(rng.random(), rng.random(), rng.random::<f64>() + 0.1)), 1.3);
    let corners = local.map(|c| rot * c + P3::new(100.0, -50.0, 20.0));
    let straight = PanelBoundary::straight(corners).expect("well-shaped quad");
    let edges = std::array::from_fn(|k| {
        let e = straight.edge_dir(k);
        let s = Rotation3::from_axis_angle(&Unit::new_normalize(e), rng.random_range(-1.2..1.2)) * straight.edges[k].s;
        EdgeCurveParams { s, theta: [0.0, 0.0] }
    });
    PanelBoundary { corners, edges }
}

/// The planar boundary drawn for a given seed.
pub fn flat_boundary_for_seed(seed: u64) -> PanelBoundary {
    flat_boundary(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Planar boundaries with straight edges must give a stress-free panel.
pub fn flat_panels(opts: &VerifyOptions) -> SuiteResult {
    const NAME: &str = "flat panel null case";
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let cfg = PanelConfig { mesh: MeshOptions::with_boundary_edges(24), ..PanelConfig::default() };
    let m = match cfg.material.params() {
        Ok(m) => m,
        Err(e) => return SuiteResult::failed(NAME, e),
    };
    let cases = opts.cases.div_ceil(10).max(1);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let b = flat_boundary(&mut rng);
        let eq = init_panel_mesh(&b.zero_twist_patch(), &cfg.mesh).map_err(|e| e.to_string()).and_then(|mesh| {
            minimize_panel(&mesh, &m, &cfg.solver).map_err(|e| e.to_string())
        });
        match eq {
            // energy against 1e-8 and stress against 1e-6, on one scale
            Ok(eq) => worst = worst.max((eq.energy / 1e-8).max(eq.sigma_true / 1e-6)),
            Err(e) => return SuiteResult::failed(NAME, e),
        }
    }
    SuiteResult::new(NAME, cases, worst, 1.0)
}

/// Scaling a boundary and the thickness together leaves σ unchanged.
pub fn scale_invariance(opts: &VerifyOptions) -> SuiteResult {
    const NAME: &str = "stress scale invariance";
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(2));
    let mesh_opts = MeshOptions::with_boundary_edges(24);
    let cases = opts.cases.div_ceil(25).max(1);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let b = curved_boundary(&mut rng);
        let solve = |s: f64| -> Result<f64, String> {
            let scaled = PanelBoundary { corners: b.corners.map(|c| c * s), edges: b.edges };
            let m = Material { thickness: s * Material::default().thickness, ..Material::default() };
            let m = m.params().map_err(|e| e.to_string())?;
            let mesh = init_panel_mesh(&scaled.zero_twist_patch(), &mesh_opts).map_err(|e| e.to_string())?;
            Ok(minimize_panel(&mesh, &m, &SolverOptions::default()).map_err(|e| e.to_string())?.sigma)
        };
        let base = match solve(1.0) {
            Ok(s) => s,
            Err(e) => return SuiteResult::failed(NAME, e),
        };
        for s in [0.5, 2.0, 10.0] {
            match solve(s) {
                Ok(v) => worst = worst.max((v - base).abs() / base),
                Err(e) => return SuiteResult::failed(NAME, e),
            }
        }
    }
    SuiteResult::new(NAME, cases, worst, 1e-6)
}

/// Points along the four boundary curves, as one closed loop.
fn loop_points(b: &PanelBoundary) -> Vec<P3> {
    let mut pts = Vec::new();
    for c in b.curves() {
        for i in 0..8 {
            let t = i as f64 / 8.0;
            let u = 1.0 - t;
            pts.push(c[0] * u.powi(3) + c[1] * (3.0 * u * u * t) + c[2] * (3.0 * u * t * t) + c[3] * t.powi(3));
        }
    }
    pts
}

/// Root-mean-square distance after the best rigid alignment of `b` onto `a`.
fn rigid_rmsd(a: &[P3], b: &[P3]) -> f64 {
    let n = a.len() as f64;
    let ca: P3 = a.iter().sum::<P3>() / n;
    let cb: P3 = b.iter().sum::<P3>() / n;
    let mut h = Matrix3::zeros();
    for (p, q) in a.iter().zip(b) {
        h += (q - cb) * (p - ca).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v"));
    let mut d = Matrix3::identity();
    d[(2, 2)] = (vt.transpose() * u.transpose()).determinant().signum();
    let r = vt.transpose() * d * u.transpose();
    (a.iter().zip(b).map(|(p, q)| (r * (q - cb) - (p - ca)).norm_squared()).sum::<f64>() / n).sqrt()
}

/// Smallest RMSD over the eight relabelings of the loop (cyclic shifts by a
/// curve and reversal).
fn loop_rmsd(a: &[P3], b: &[P3]) -> f64 {
    let n = b.len();
    let per = n / 4;
    let mut best = f64::INFINITY;
    for reverse in [false, true] {
        for k in 0..4 {
            let c: Vec<P3> = (0..n)
                .map(|i| if reverse { b[(k * per + n - i) % n] } else { b[(k * per + i) % n] })
                .collect();
            best = best.min(rigid_rmsd(a, &c));
        }
    }
    best
}

/// Encoding followed by decoding reproduces the boundary up to a rigid
/// motion, and the encoding ignores rigid motions of its input.
pub fn encoding_roundtrip(opts: &VerifyOptions) -> SuiteResult {
    const NAME: &str = "boundary encoding roundtrip";
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(3));
    let cases = opts.cases * 10;
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let b = curved_boundary(&mut rng);
        let axis = Unit::new_normalize(Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0));
        let r = Rotation3::from_axis_angle(&axis, rng.random_range(-3.0..3.0)).into_inner();
        let t = P3::new(rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3));
        let moved = b.transformed(&r, &t);
        let (Ok(e0), Ok(e1)) = (compact_encode(&b), compact_encode(&moved)) else {
            return SuiteResult::failed(NAME, "encoding failed");
        };
        let Ok(back) = compact_decode(&e1.compact) else { return SuiteResult::failed(NAME, "decoding failed") };
        worst = worst.max(loop_rmsd(&loop_points(&moved), &loop_points(&back)));
        let drift = e0.compact.p.iter().zip(&e1.compact.p).map(|(a, b)| (a - b).abs() / a.abs().max(1.0)).fold(0.0, f64::max);
        worst = worst.max(drift);
    }
    SuiteResult::new(NAME, cases, worst, 1e-9)
}

pub fn run_all(opts: &VerifyOptions) -> Vec<SuiteResult> {
    let suites: [fn(&VerifyOptions) -> SuiteResult; 4] = [encoding_roundtrip, flat_panels, shell_gradients, scale_invariance];
    suites
        .iter()
        .map(|suite| {
            let r = suite(opts);
            log::info!("{}: worst {:.3e} (tolerance {:.0e}) over {} cases", r.name, r.worst, r.tolerance, r.cases);
            r
        })
        .collect()
}
