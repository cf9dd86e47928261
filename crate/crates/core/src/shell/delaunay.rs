//! Bowyer-Watson Delaunay triangulation of a planar point set.

use super::mesh::P2;
use std::collections::{HashMap, HashSet};

#[derive(Clone, Copy)]
struct Tri {
    v: [usize; 3],
    center: P2,
    r2: f64,
    alive: bool,
}

fn orient(a: &P2, b: &P2, c: &P2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn circumcircle(a: &P2, b: &P2, c: &P2) -> (P2, f64) {
    let (bx, by) = (b.x - a.x, b.y - a.y);
    let (cx, cy) = (c.x - a.x, c.y - a.y);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    (P2::new(a.x + ux, a.y + uy), ux * ux + uy * uy)
}

/// Counter-clockwise triangles over `points`.
pub fn delaunay(points: &[P2]) -> Vec<[usize; 3]> {
    let n = points.len();
    if n < 3 {
        return Vec::new();
    }
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = P2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = P2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let c = (lo + hi) / 2.0;
    let size = (hi - lo).norm().max(1e-9) * 20.0;
    let mut pts = points.to_vec();
    pts.push(c + P2::new(-size, -size));
    pts.push(c + P2::new(size, -size));
    pts.push(c + P2::new(0.0, size));
    let mut tris: Vec<Tri> = Vec::new();
    let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();

    let add = |tris: &mut Vec<Tri>, edge_map: &mut HashMap<(usize, usize), usize>, v: [usize; 3], pts: &[P2]| {
        let (center, r2) = circumcircle(&pts[v[0]], &pts[v[1]], &pts[v[2]]);
        let t = tris.len();
        tris.push(Tri { v, center, r2, alive: true });
        for k in 0..3 {
            edge_map.insert((v[k], v[(k + 1) % 3]), t);
        }
    };
    add(&mut tris, &mut edge_map, [n, n + 1, n + 2], &pts);

    for i in 0..n {
        let p = pts[i];
        let start = tris.iter().enumerate().position(|(_, t)| {
            t.alive && (0..3).all(|k| orient(&pts[t.v[k]], &pts[t.v[(k + 1) % 3]], &p) >= 0.0)
        });
        let Some(start) = start else { continue };
        let mut cavity = vec![start];
        let mut in_cavity: HashSet<usize> = HashSet::from([start]);
        let mut q = 0;
        while q < cavity.len() {
            let t = cavity[q];
            q += 1;
            let v = tris[t].v;
            for k in 0..3 {
                if let Some(&nb) = edge_map.get(&(v[(k + 1) % 3], v[k])) {
                    if tris[nb].alive && !in_cavity.contains(&nb) {
                        let d2 = (p - tris[nb].center).norm_squared();
                        if d2 < tris[nb].r2 * (1.0 - 1e-12) {
                            in_cavity.insert(nb);
                            cavity.push(nb);
                        }
                    }
                }
            }
        }
        let mut rim = Vec::new();
        for &t in &cavity {
            let v = tris[t].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let outside = match edge_map.get(&(b, a)) {
                    Some(nb) => !in_cavity.contains(nb),
                    None => true,
                };
                if outside {
                    rim.push((a, b));
                }
            }
        }
        if rim.iter().any(|&(a, b)| orient(&pts[a], &pts[b], &p) <= 0.0) {
            // numerically non-star cavity; skip this point
            continue;
        }
        for &t in &cavity {
            tris[t].alive = false;
            let v = tris[t].v;
            for k in 0..3 {
                if edge_map.get(&(v[k], v[(k + 1) % 3])) == Some(&t) {
                    edge_map.remove(&(v[k], v[(k + 1) % 3]));
                }
            }
        }
        for (a, b) in rim {
            add(&mut tris, &mut edge_map, [a, b, i], &pts);
        }
    }
    tris.into_iter().filter(|t| t.alive && t.v.iter().all(|&v| v < n)).map(|t| t.v).collect()
}

pub fn point_in_polygon(p: &P2, poly: &[P2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

pub fn distance_to_segment(p: &P2, a: &P2, b: &P2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}
