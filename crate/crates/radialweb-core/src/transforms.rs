//! Coordinate maps and metrics for path families: diffusive rescaling, the
//! polar unrolling map, the strip homeomorphism ψ with its inverse, the
//! family map built from ψ, the compactified sup metric on paths and
//! Hausdorff distances between families and between planar point clouds.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial::RestrictedFamily;

/// A time-parametrized piecewise-linear path. Evaluation below the birth
/// time returns the birth position (the constant extension used by the
/// restricted-path metric).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanarPath {
    pub sigma: f64,
    /// (time, position) samples with strictly increasing times.
    pub samples: Vec<(f64, f64)>,
}

impl PlanarPath {
    pub fn new(sigma: f64, samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("path needs at least one sample".into()));
        }
        for w in samples.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::Domain(format!(
                    "sample times must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        Ok(PlanarPath { sigma, samples })
    }

    /// Piecewise-linear evaluation with constant extension on both sides.
    pub fn eval(&self, t: f64) -> f64 {
        let first = self.samples[0];
        let last = *self.samples.last().unwrap();
        if t <= first.0 {
            return first.1;
        }
        if t >= last.0 {
            return last.1;
        }
        let i = self.samples.partition_point(|s| s.0 <= t);
        let (t0, x0) = self.samples[i - 1];
        let (t1, x1) = self.samples[i];
        x0 + (t - t0) / (t1 - t0) * (x1 - x0)
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().unwrap().0
    }
}

/// A collection of paths born inside a common time strip.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanarPathFamily {
    pub strip: (f64, f64),
    pub paths: Vec<PlanarPath>,
}

/// Convert restricted radial polylines into time-parametrized paths using
/// height as time. Paths whose node heights fail to increase strictly (a
/// vanishing-probability event for in-range parameters) are skipped and
/// counted.
pub fn family_from_restricted(fam: &RestrictedFamily) -> (PlanarPathFamily, usize) {
    let n = fam.params.n as f64;
    let strip = (-n, -n * fam.params.alpha);
    let mut paths = Vec::with_capacity(fam.polylines.len());
    let mut ill_formed = 0usize;
    for line in &fam.polylines {
        if line.is_empty() {
            continue;
        }
        let samples: Vec<(f64, f64)> = line.iter().map(|p| (p[1], p[0])).collect();
        match PlanarPath::new(samples[0].0, samples) {
            Ok(p) => paths.push(p),
            Err(_) => ill_formed += 1,
        }
    }
    (PlanarPathFamily { strip, paths }, ill_formed)
}

/// Diffusive rescaling: positions divided by √n, times by n.
pub fn rescale_diffusive(fam: &PlanarPathFamily, n: u64) -> PlanarPathFamily {
    let nf = n as f64;
    let sqrt_n = nf.sqrt();
    PlanarPathFamily {
        strip: (fam.strip.0 / nf, fam.strip.1 / nf),
        paths: fam
            .paths
            .iter()
            .map(|p| PlanarPath {
                sigma: p.sigma / nf,
                samples: p.samples.iter().map(|&(t, x)| (t / nf, x / sqrt_n)).collect(),
            })
            .collect(),
    }
}

/// Polar unrolling of a point with negative height: z = r(sinθ, −cosθ)
/// maps to (rθ, −r).
pub fn map_lambda(z: [f64; 2]) -> Result<[f64; 2]> {
    if z[1] >= 0.0 {
        return Err(Error::Domain(format!("map_lambda needs height < 0, got {}", z[1])));
    }
    let r = z[0].hypot(z[1]);
    let theta = z[0].abs().atan2(-z[1]) * z[0].signum();
    Ok([r * theta, -r])
}

/// The strip homeomorphism ψ(x, t) = (x/|t|, 1/|t| − 1), defined for t < 0.
pub fn map_psi(x: f64, t: f64) -> Result<(f64, f64)> {
    if t >= 0.0 {
        return Err(Error::Domain(format!("map_psi needs t < 0, got {t}")));
    }
    Ok((x / t.abs(), 1.0 / t.abs() - 1.0))
}

/// Inverse of ψ: (x', t') ↦ (x'/(t'+1), −1/(t'+1)), defined for t' > −1.
pub fn map_psi_inv(x: f64, t: f64) -> Result<(f64, f64)> {
    if t <= -1.0 {
        return Err(Error::Domain(format!("map_psi_inv needs t > -1, got {t}")));
    }
    Ok((x / (t + 1.0), -1.0 / (t + 1.0)))
}

/// Default resampling density for the ψ-image, in points per unit time.
pub const DEFAULT_MAP_RESOLUTION: f64 = 512.0;

/// Apply ψ to a family on the strip [−1, −α], resampling each image path on
/// a uniform grid (straight segments bend under ψ, so images are stored as
/// dense piecewise-linear approximations).
pub fn map_t(fam: &PlanarPathFamily, resolution: f64) -> Result<PlanarPathFamily> {
    if (fam.strip.0 + 1.0).abs() > 1e-9 || !(fam.strip.1 < 0.0) {
        return Err(Error::Domain(format!(
            "map_t expects the strip [-1, -alpha], got [{}, {}]",
            fam.strip.0, fam.strip.1
        )));
    }
    let alpha = -fam.strip.1;
    let top = 1.0 / alpha - 1.0;
    let mut out = Vec::with_capacity(fam.paths.len());
    for p in &fam.paths {
        let (_, t0p) = map_psi(0.0, p.sigma.min(-1e-300))?;
        let end = p.end_time().min(-alpha);
        let (_, t1p) = map_psi(0.0, end)?;
        let span = (t1p - t0p).max(0.0);
        let m = ((span * resolution).ceil() as usize).max(1);
        let mut samples = Vec::with_capacity(m + 1);
        for i in 0..=m {
            let tp = t0p + span * i as f64 / m as f64;
            let t = (-1.0 / (tp + 1.0)).clamp(p.sigma, end);
            let x = p.eval(t);
            samples.push((tp, x * (tp + 1.0)));
        }
        samples.dedup_by(|a, b| a.0 == b.0);
        out.push(PlanarPath::new(t0p, samples)?);
    }
    Ok(PlanarPathFamily { strip: (0.0, top), paths: out })
}

/// Apply ψ⁻¹ to a family on [0, 1/α − 1], resampling on a uniform grid in
/// the original time.
pub fn map_t_inv(fam: &PlanarPathFamily, alpha: f64, resolution: f64) -> Result<PlanarPathFamily> {
    let top = 1.0 / alpha - 1.0;
    if fam.strip.0.abs() > 1e-9 || (fam.strip.1 - top).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "map_t_inv expects the strip [0, {top}], got [{}, {}]",
            fam.strip.0, fam.strip.1
        )));
    }
    let mut out = Vec::with_capacity(fam.paths.len());
    for p in &fam.paths {
        let (_, t0) = map_psi_inv(0.0, p.sigma)?;
        let end_img = p.end_time().min(top);
        let (_, t1) = map_psi_inv(0.0, end_img)?;
        let span = (t1 - t0).max(0.0);
        let m = ((span * resolution).ceil() as usize).max(1);
        let mut samples = Vec::with_capacity(m + 1);
        for i in 0..=m {
            let t = t0 + span * i as f64 / m as f64;
            let tp = (1.0 / t.abs() - 1.0).clamp(p.sigma, end_img);
            let x = p.eval(tp);
            samples.push((t, x / (tp + 1.0)));
        }
        samples.dedup_by(|a, b| a.0 == b.0);
        out.push(PlanarPath::new(t0, samples)?);
    }
    Ok(PlanarPathFamily { strip: (-1.0, -alpha), paths: out })
}

fn compress(x: f64, t: f64) -> f64 {
    x.tanh() / (1.0 + t.abs())
}

/// Restricted-path metric: the sup over the strip of the compressed
/// displacement, joined with the compressed birth-time gap. The sup is
/// evaluated on the union of both sample grids with one level of midpoint
/// refinement.
pub fn path_distance(p1: &PlanarPath, p2: &PlanarPath, strip: (f64, f64)) -> f64 {
    let mut times: Vec<f64> = vec![strip.0, strip.1, p1.sigma, p2.sigma];
    times.extend(p1.samples.iter().map(|s| s.0));
    times.extend(p2.samples.iter().map(|s| s.0));
    times.retain(|t| *t >= strip.0 && *t <= strip.1);
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let mut sup: f64 = 0.0;
    let mut probe = |t: f64| {
        let d = (compress(p1.eval(t), t) - compress(p2.eval(t), t)).abs();
        if d > sup {
            sup = d;
        }
    };
    for i in 0..times.len() {
        probe(times[i]);
        if i + 1 < times.len() {
            probe(0.5 * (times[i] + times[i + 1]));
        }
    }
    let birth_gap = (p1.sigma.clamp(strip.0, strip.1).tanh() - p2.sigma.clamp(strip.0, strip.1).tanh()).abs();
    sup.max(birth_gap)
}

/// Hausdorff distance between two families under `path_distance`.
pub fn family_hausdorff(k1: &PlanarPathFamily, k2: &PlanarPathFamily) -> Result<f64> {
    if k1.paths.is_empty() || k2.paths.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if (k1.strip.0 - k2.strip.0).abs() > 1e-9 || (k1.strip.1 - k2.strip.1).abs() > 1e-9 {
        return Err(Error::Domain("families live on different strips".into()));
    }
    let strip = k1.strip;
    let directed = |from: &PlanarPathFamily, to: &PlanarPathFamily| {
        from.paths
            .iter()
            .map(|g1| {
                to.paths
                    .iter()
                    .map(|g2| path_distance(g1, g2, strip))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max)
    };
    Ok(directed(k1, k2).max(directed(k2, k1)))
}

/// Euclidean Hausdorff distance between two finite planar point clouds,
/// computed with a uniform-grid nearest-neighbor index.
pub fn planar_hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyFamily);
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

struct GridIndex<'a> {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<u32>>,
    points: &'a [[f64; 2]],
}

impl<'a> GridIndex<'a> {
    fn build(points: &'a [[f64; 2]]) -> Self {
        let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            min_x = min_x.min(p[0]);
            max_x = max_x.max(p[0]);
            min_y = min_y.min(p[1]);
            max_y = max_y.max(p[1]);
        }
        let extent = ((max_x - min_x).max(1e-12)) * ((max_y - min_y).max(1e-12));
        let cell = (extent / points.len() as f64).sqrt().max(1e-12) * 2.0;
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets
                .entry(((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64))
                .or_default()
                .push(i as u32);
        }
        GridIndex { cell, buckets, points }
    }

    fn brute_force(&self, q: [f64; 2]) -> f64 {
        self.points
            .iter()
            .map(|p| (p[0] - q[0]).hypot(p[1] - q[1]))
            .fold(f64::INFINITY, f64::min)
    }

    fn nearest_distance(&self, q: [f64; 2]) -> f64 {
        let cx = (q[0] / self.cell).floor() as i64;
        let cy = (q[1] / self.cell).floor() as i64;
        let mut best = f64::INFINITY;
        // Queries far from the cloud (relative to the cell size) fall back
        // to a linear scan instead of walking huge rings.
        const MAX_RING: i64 = 256;
        for ring in 0..=MAX_RING {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue;
                    }
                    if let Some(ids) = self.buckets.get(&(cx + dx, cy + dy)) {
                        for &i in ids {
                            let p = self.points[i as usize];
                            let d = (p[0] - q[0]).hypot(p[1] - q[1]);
                            if d < best {
                                best = d;
                            }
                        }
                    }
                }
            }
            // Any point in an unexplored ring is at least (ring) cells away.
            if best <= (ring as f64) * self.cell {
                return best;
            }
        }
        if best <= (MAX_RING as f64) * self.cell {
            best
        } else {
            self.brute_force(q)
        }
    }
}

fn directed_hausdorff(from: &[[f64; 2]], to: &[[f64; 2]]) -> f64 {
    let index = GridIndex::build(to);
    from.iter().map(|&q| index.nearest_distance(q)).fold(0.0f64, f64::max)
}

/// Dense node cloud of a restricted family under diffusive rescaling,
/// resampled so that consecutive cloud points are at most `step` apart in
/// the rescaled plane.
pub fn scaled_cloud(fam: &RestrictedFamily, step: f64) -> Vec<[f64; 2]> {
    let n = fam.params.n as f64;
    let sqrt_n = n.sqrt();
    let map = |p: [f64; 2]| [p[0] / sqrt_n, p[1] / n];
    cloud_of(&fam.polylines, step, map, |a, b| {
        let (a, b) = (map(a), map(b));
        (a[0] - b[0]).hypot(a[1] - b[1])
    })
}

/// Dense node cloud of the polar-unrolled family under diffusive rescaling.
pub fn lambda_cloud(fam: &RestrictedFamily, step: f64) -> Result<Vec<[f64; 2]>> {
    let n = fam.params.n as f64;
    let sqrt_n = n.sqrt();
    for line in &fam.polylines {
        for p in line {
            if p[1] >= 0.0 {
                return Err(Error::Domain("unrolling needs negative heights".into()));
            }
        }
    }
    let map = |p: [f64; 2]| {
        let u = map_lambda(p).expect("heights checked above");
        [u[0] / sqrt_n, u[1] / n]
    };
    Ok(cloud_of(&fam.polylines, step, map, |a, b| {
        let (a, b) = (map(a), map(b));
        (a[0] - b[0]).hypot(a[1] - b[1])
    }))
}

fn cloud_of(
    polylines: &[Vec<[f64; 2]>],
    step: f64,
    map: impl Fn([f64; 2]) -> [f64; 2],
    mapped_len: impl Fn([f64; 2], [f64; 2]) -> f64,
) -> Vec<[f64; 2]> {
    let mut cloud = Vec::new();
    for line in polylines {
        if line.is_empty() {
            continue;
        }
        cloud.push(map(line[0]));
        for w in line.windows(2) {
            let pieces = ((mapped_len(w[0], w[1]) / step).ceil() as usize).max(1);
            for i in 1..=pieces {
                let u = i as f64 / pieces as f64;
                let p = [
                    w[0][0] + u * (w[1][0] - w[0][0]),
                    w[0][1] + u * (w[1][1] - w[0][1]),
                ];
                cloud.push(map(p));
            }
        }
    }
    cloud
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant_path(x: f64, sigma: f64, end: f64) -> PlanarPath {
        PlanarPath::new(sigma, vec![(sigma, x), (end, x)]).unwrap()
    }

    #[test]
    fn rescale_examples() {
        let fam = PlanarPathFamily {
            strip: (-10_000.0, -5_000.0),
            paths: vec![PlanarPath::new(-10_000.0, vec![(-10_000.0, 100.0), (-5_000.0, 3.7)]).unwrap()],
        };
        let scaled = rescale_diffusive(&fam, 10_000);
        assert_eq!(scaled.strip, (-1.0, -0.5));
        let last = *scaled.paths[0].samples.last().unwrap();
        assert!((last.0 + 0.5).abs() < 1e-15);
        assert!((last.1 - 0.037).abs() < 1e-15);
        // n = 1 is the identity.
        let id = rescale_diffusive(&fam, 1);
        assert_eq!(id.paths[0].samples, fam.paths[0].samples);
        // (√n, -n) ↦ (1, -1).
        let fam2 = PlanarPathFamily {
            strip: (-4.0, -2.0),
            paths: vec![PlanarPath::new(-4.0, vec![(-4.0, 2.0), (-2.0, 2.0)]).unwrap()],
        };
        let s2 = rescale_diffusive(&fam2, 4);
        assert_eq!(s2.paths[0].samples[0], (-1.0, 1.0));
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(map_lambda([0.0, -5.0]).unwrap(), [0.0, -5.0]);
        let z = [2.0 * 0.3f64.sin(), -2.0 * 0.3f64.cos()];
        let u = map_lambda(z).unwrap();
        assert!((u[0] - 0.6).abs() < 1e-12);
        assert!((u[1] + 2.0).abs() < 1e-12);
        assert!(map_lambda([1.0, 0.0]).is_err());
    }

    #[test]
    fn lambda_is_injective_on_random_points() {
        let mut stream = crate::rng::RngStream::new(5, 0, 0);
        for _ in 0..1000 {
            let a = [4.0 * stream.next_unit() - 2.0, -0.1 - 3.0 * stream.next_unit()];
            let b = [4.0 * stream.next_unit() - 2.0, -0.1 - 3.0 * stream.next_unit()];
            if a != b {
                let (ua, ub) = (map_lambda(a).unwrap(), map_lambda(b).unwrap());
                assert!(ua != ub, "{a:?} and {b:?} collided");
            }
        }
    }

    #[test]
    fn psi_examples_and_round_trip() {
        assert_eq!(map_psi(1.0, -1.0).unwrap(), (1.0, 0.0));
        let (x, t) = map_psi(2.0, -2.0).unwrap();
        assert_eq!((x, t), (1.0, -0.5));
        assert_eq!(map_psi_inv(1.0, -0.5).unwrap(), (2.0, -2.0));
        assert!(map_psi(0.0, 0.0).is_err());
        assert!(map_psi_inv(0.0, -1.0).is_err());

        let mut stream = crate::rng::RngStream::new(9, 0, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let x = 20.0 * stream.next_unit() - 10.0;
            let t = -0.05 - 3.0 * stream.next_unit();
            let (xp, tp) = map_psi(x, t).unwrap();
            let (x2, t2) = map_psi_inv(xp, tp).unwrap();
            worst = worst.max(((x2 - x) / x.abs().max(1.0)).abs());
            worst = worst.max(((t2 - t) / t.abs()).abs());
        }
        assert!(worst < 1e-12, "round-trip error {worst}");
    }

    #[test]
    fn map_t_fixes_axis_and_radial_rays() {
        let alpha = 0.5;
        let fam = PlanarPathFamily {
            strip: (-1.0, -alpha),
            paths: vec![
                constant_path(0.0, -1.0, -alpha),
                PlanarPath::new(-1.0, vec![(-1.0, 1.0), (-alpha, alpha)]).unwrap(),
            ],
        };
        let image = map_t(&fam, 64.0).unwrap();
        for s in &image.paths[0].samples {
            assert!(s.1.abs() < 1e-12);
        }
        for s in &image.paths[1].samples {
            assert!((s.1 - 1.0).abs() < 1e-9, "radial ray should map to the constant 1");
        }
        assert!((image.strip.1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn map_t_round_trip_error_shrinks_with_resolution() {
        let alpha = 0.5;
        let path = PlanarPath::new(-0.9, vec![(-0.9, 0.3), (-0.7, -0.4), (-alpha, 0.2)]).unwrap();
        let fam = PlanarPathFamily { strip: (-1.0, -alpha), paths: vec![path.clone()] };
        let sup_err = |res: f64| {
            let back = map_t_inv(&map_t(&fam, res).unwrap(), alpha, res).unwrap();
            let mut err: f64 = 0.0;
            for i in 0..=200 {
                let t = -0.9 + (0.9 - alpha) * i as f64 / 200.0;
                err = err.max((back.paths[0].eval(t) - path.eval(t)).abs());
            }
            err
        };
        let coarse = sup_err(64.0);
        let fine = sup_err(512.0);
        assert!(fine < coarse, "refinement should help: {coarse} -> {fine}");
        // The kink at -0.7 limits accuracy to one grid cell of slope change.
        assert!(fine < 6e-3, "fine-grid error {fine}");
    }

    #[test]
    fn path_distance_examples() {
        let strip = (0.0, 1.0);
        let p0 = constant_path(0.0, 0.0, 1.0);
        let p1 = constant_path(1.0, 0.0, 1.0);
        assert_eq!(path_distance(&p0, &p0, strip), 0.0);
        let d = path_distance(&p0, &p1, strip);
        assert!((d - 1.0f64.tanh()).abs() < 1e-12, "d = {d}");
        // Identical shapes, different birth times: at least the time term.
        let q0 = constant_path(0.0, 0.2, 1.0);
        let q1 = constant_path(0.0, 0.7, 1.0);
        assert!(path_distance(&q0, &q1, strip) >= (0.2f64.tanh() - 0.7f64.tanh()).abs() - 1e-15);
    }

    #[test]
    fn family_hausdorff_examples() {
        let strip = (0.0, 1.0);
        let a = constant_path(0.0, 0.0, 1.0);
        let b = constant_path(1.0, 0.0, 1.0);
        let fam = |paths: Vec<PlanarPath>| PlanarPathFamily { strip, paths };
        let k1 = fam(vec![a.clone(), b.clone()]);
        assert_eq!(family_hausdorff(&k1, &k1).unwrap(), 0.0);
        let single1 = fam(vec![a.clone()]);
        let single2 = fam(vec![b.clone()]);
        let d = family_hausdorff(&single1, &single2).unwrap();
        assert!((d - path_distance(&a, &b, strip)).abs() < 1e-15);
        // {a, b} vs {a}: distance is d(b, a).
        let d2 = family_hausdorff(&k1, &single1).unwrap();
        assert!((d2 - path_distance(&b, &a, strip)).abs() < 1e-15);
        assert!(family_hausdorff(&fam(vec![]), &single1).is_err());
    }

    #[test]
    fn planar_hausdorff_examples() {
        let a = vec![[0.0, 0.0]];
        let b = vec![[3.0, 4.0]];
        assert!((planar_hausdorff(&a, &a).unwrap()).abs() < 1e-15);
        assert!((planar_hausdorff(&a, &b).unwrap() - 5.0).abs() < 1e-12);
        assert!(planar_hausdorff(&a, &[]).is_err());
        let c = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let d = vec![[0.0, 0.5], [2.0, -0.25]];
        // Enumerated oracle.
        let oracle = {
            let dist = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
            let dir = |xs: &[[f64; 2]], ys: &[[f64; 2]]| {
                xs.iter()
                    .map(|&p| ys.iter().map(|&q| dist(p, q)).fold(f64::INFINITY, f64::min))
                    .fold(0.0f64, f64::max)
            };
            dir(&c, &d).max(dir(&d, &c))
        };
        assert!((planar_hausdorff(&c, &d).unwrap() - oracle).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn path_distance_is_symmetric_and_triangular(
            xs in proptest::collection::vec(-5.0f64..5.0, 3),
            ys in proptest::collection::vec(-5.0f64..5.0, 3),
            zs in proptest::collection::vec(-5.0f64..5.0, 3),
            births in proptest::collection::vec(0.0f64..0.9, 3),
        ) {
            let strip = (0.0, 1.0);
            let mk = |sigma: f64, vals: &[f64]| {
                let ts = [sigma, sigma + (1.0 - sigma) / 2.0, 1.0];
                PlanarPath::new(sigma, ts.iter().copied().zip(vals.iter().copied()).collect()).unwrap()
            };
            let p = mk(births[0], &xs);
            let q = mk(births[1], &ys);
            let r = mk(births[2], &zs);
            let dpq = path_distance(&p, &q, strip);
            let dqp = path_distance(&q, &p, strip);
            prop_assert!((dpq - dqp).abs() < 1e-12);
            let dpr = path_distance(&p, &r, strip);
            let drq = path_distance(&r, &q, strip);
            prop_assert!(dpq <= dpr + drq + 1e-9);
        }
    }
}
