//! The flat-level reformulation: independent Poisson mark processes per
//! level, nearest-point successors with fair-coin tie breaks, level times on
//! a macroscopic and a microscopic clock, plus the pitch-`r` grid
//! discretization of the same realization.
//!
//! Levels are materialized lazily in fixed-length tiles keyed by
//! `(trial, level, tile)` counter-based streams, so a realization is a pure
//! function of the seed no matter which parts of it a run touches, and runs
//! parallelize over trials without any ordering dependence. The spatial
//! window is finite; a tracked path that wanders within diffusive reach of
//! the window edge aborts the trial with a contamination error, which
//! callers discard and count.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, labels, RngStream};

/// Length of one lazily sampled tile, in microscopic length units.
const TILE_LEN: f64 = 8.0;

/// Parameters of the level system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelParams {
    pub n: u64,
    pub alpha: f64,
}

impl LevelParams {
    pub fn new(n: u64, alpha: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidParameter("n must be at least 4".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
        }
        Ok(LevelParams { n, alpha })
    }

    /// Number of in-range levels, ⌊n(1−α)⌋.
    pub fn k_n(&self) -> u64 {
        (self.n as f64 * (1.0 - self.alpha)).floor() as u64
    }

    /// Per-level mark intensity in microscopic units: (n−k)/n for k ≤ k_n,
    /// frozen at (n−k_n)/n beyond.
    pub fn rate_micro(&self, level: u64) -> f64 {
        let k = level.min(self.k_n());
        (self.n - k) as f64 / self.n as f64
    }

    /// Per-level mark intensity in macroscopic units: √n times smaller space.
    pub fn rate_macro(&self, level: u64) -> f64 {
        self.rate_micro(level) * (self.n as f64).sqrt()
    }

    /// Macroscopic time of level j: j/(n−j).
    pub fn time_macro(&self, level: u64) -> f64 {
        level as f64 / (self.n - level) as f64
    }

    /// Microscopic time of level j: n·j/(n−j).
    pub fn time_micro(&self, level: u64) -> f64 {
        self.n as f64 * self.time_macro(level)
    }

    /// Top of the macroscopic time strip, 1/α − 1.
    pub fn strip_top(&self) -> f64 {
        1.0 / self.alpha - 1.0
    }

    /// Largest level whose macroscopic time is ≤ t.
    pub fn level_at_or_before(&self, t: f64) -> u64 {
        debug_assert!(t >= 0.0);
        let n = self.n as f64;
        let mut k = ((t * n / (1.0 + t)).floor() as i64).max(0) as u64;
        while k + 1 < self.n && self.time_macro(k + 1) <= t {
            k += 1;
        }
        while k > 0 && self.time_macro(k) > t {
            k -= 1;
        }
        k
    }

    /// Largest level strictly below the remaining-time horizon t0 + t < top.
    pub fn max_start_level(&self, t: f64) -> u64 {
        let limit = self.strip_top() - t;
        if limit <= 0.0 {
            return 0;
        }
        let mut k = self.level_at_or_before(limit);
        while k > 0 && self.time_macro(k) >= limit {
            k -= 1;
        }
        k
    }
}

/// Identity of one mark: level, tile index and position within the tile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MarkRef {
    pub level: u32,
    pub tile: i64,
    pub idx: u32,
}

impl MarkRef {
    fn entropy(&self) -> u64 {
        ((self.tile as u64) << 20) ^ self.idx as u64 ^ ((self.level as u64) << 44)
    }
}

/// One realization of the level system, lazily materialized.
pub struct LevelSystem {
    pub params: LevelParams,
    /// Spatial half-width of the sampled window, microscopic units.
    pub window: f64,
    /// Contamination margin: trials abort when a tracked position gets
    /// closer than this to the window edge.
    pub guard: f64,
    /// Highest level this system may materialize.
    pub max_level: u64,
    seed: u64,
    trial: u64,
    tiles: HashMap<(u32, i64), Vec<f64>>,
    successors: HashMap<MarkRef, MarkRef>,
}

/// Window sized for a run of the given microscopic time horizon and spatial
/// start extent: 20 diffusive standard deviations plus the extent.
pub fn default_window(horizon_micro: f64, extent: f64) -> f64 {
    20.0 * horizon_micro.max(1.0).sqrt() + extent.abs() + 2.0 * TILE_LEN
}

impl LevelSystem {
    pub fn new(
        params: LevelParams,
        window: f64,
        levels_beyond: u64,
        seed: u64,
        trial: u64,
    ) -> Result<Self> {
        let max_level = params.k_n() + 1 + levels_beyond;
        if max_level as f64 >= 0.9 * params.n as f64 {
            return Err(Error::InvalidParameter(format!(
                "level horizon {max_level} too close to n = {}; level times degenerate",
                params.n
            )));
        }
        if !(window > 4.0 * TILE_LEN) {
            return Err(Error::InvalidParameter(format!("window {window} too small")));
        }
        let guard = (window / 2.0).min(10.0 * (params.n as f64 * params.strip_top()).sqrt());
        Ok(LevelSystem {
            params,
            window,
            guard,
            max_level,
            seed,
            trial,
            tiles: HashMap::new(),
            successors: HashMap::new(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trial(&self) -> u64 {
        self.trial
    }

    fn tile_marks(&mut self, level: u32, tile: i64) -> Result<&Vec<f64>> {
        let lo = tile as f64 * TILE_LEN;
        if lo < -self.window - TILE_LEN || lo + TILE_LEN > self.window + TILE_LEN {
            return Err(Error::BoundaryContamination);
        }
        let rate = self.params.rate_micro(level as u64);
        let (seed, trial) = (self.seed, self.trial);
        match self.tiles.entry((level, tile)) {
            Entry::Occupied(e) => Ok(e.into_mut()),
            Entry::Vacant(v) => {
                let stream =
                    RngStream::new(seed, trial, labels::LEVEL_MARKS).substream(level as u64, tile as u64);
                let seq = rng::sample_poisson_marks(rate, (lo, lo + TILE_LEN), stream)?;
                Ok(v.insert(seq.marks))
            }
        }
    }

    pub fn position(&self, m: MarkRef) -> f64 {
        self.tiles[&(m.level, m.tile)][m.idx as usize]
    }

    /// The mark of `level` nearest to `x`; exact ties go right when the
    /// tie coin shows 1. Fails with contamination when `x` is within the
    /// guard margin of the window edge.
    pub fn nearest_mark(&mut self, level: u64, x: f64, tie_entropy: u64) -> Result<MarkRef> {
        if level > self.max_level {
            return Err(Error::Domain(format!(
                "level {level} beyond the configured horizon {}",
                self.max_level
            )));
        }
        if x.abs() > self.window - self.guard {
            return Err(Error::BoundaryContamination);
        }
        let level32 = level as u32;
        let home = (x / TILE_LEN).floor() as i64;
        // (distance, position, mark); ties keep the second equidistant mark.
        let mut best: Option<(f64, f64, MarkRef)> = None;
        let mut tie: Option<(f64, MarkRef)> = None;
        let mut ring: i64 = 0;
        loop {
            let tiles: &[i64] = &if ring == 0 { vec![home] } else { vec![home - ring, home + ring] };
            for &t in tiles {
                let marks = self.tile_marks(level32, t)?;
                for (i, &m) in marks.iter().enumerate() {
                    let d = (m - x).abs();
                    let r = MarkRef { level: level32, tile: t, idx: i as u32 };
                    match best {
                        None => best = Some((d, m, r)),
                        Some((bd, bm, _)) => {
                            if d < bd {
                                best = Some((d, m, r));
                                tie = None;
                            } else if d == bd && bm != m {
                                tie = Some((m, r));
                            }
                        }
                    }
                }
            }
            let left_unexplored = x - (home - ring) as f64 * TILE_LEN;
            let right_unexplored = (home + ring + 1) as f64 * TILE_LEN - x;
            let boundary = left_unexplored.min(right_unexplored);
            if let Some((bd, bm, bref)) = best {
                if bd <= boundary {
                    return Ok(match tie {
                        Some((tm, tref)) => {
                            let mut coin = RngStream::new(self.seed, self.trial, labels::LEVEL_TIE)
                                .substream(level, tie_entropy);
                            let (l, r) = if bm < tm { (bref, tref) } else { (tref, bref) };
                            if rng::flip_fair_coin(&mut coin) == 1 {
                                r
                            } else {
                                l
                            }
                        }
                        None => bref,
                    });
                }
            }
            ring += 1;
        }
    }

    /// Memoized successor of a mark: the nearest mark one level up.
    pub fn successor(&mut self, from: MarkRef) -> Result<MarkRef> {
        if let Some(&s) = self.successors.get(&from) {
            return Ok(s);
        }
        let x = self.position(from);
        let next = self.nearest_mark(from.level as u64 + 1, x, from.entropy())?;
        self.successors.insert(from, next);
        Ok(next)
    }

    /// One step from an arbitrary position at `level` to the nearest mark of
    /// `level + 1` (used for path starts that are not marks).
    pub fn successor_of_position(&mut self, level: u64, x: f64) -> Result<MarkRef> {
        self.nearest_mark(level + 1, x, x.to_bits())
    }

    /// Count marks of `level` in the closed interval [lo, hi].
    pub fn count_marks_in(&mut self, level: u64, lo: f64, hi: f64) -> Result<usize> {
        if hi.max(lo.abs()) > self.window - TILE_LEN {
            return Err(Error::InvalidParameter("window too small for the requested count".into()));
        }
        let level32 = level as u32;
        let t_lo = (lo / TILE_LEN).floor() as i64;
        let t_hi = (hi / TILE_LEN).floor() as i64;
        let mut count = 0;
        for t in t_lo..=t_hi {
            count += self.tile_marks(level32, t)?.iter().filter(|&&m| m >= lo && m <= hi).count();
        }
        Ok(count)
    }

    /// Marks of `level` in the closed interval [lo, hi], in order.
    pub fn marks_in(&mut self, level: u64, lo: f64, hi: f64) -> Result<Vec<MarkRef>> {
        if hi.max(lo.abs()) > self.window - TILE_LEN {
            return Err(Error::InvalidParameter("window too small for the requested scan".into()));
        }
        let level32 = level as u32;
        let t_lo = (lo / TILE_LEN).floor() as i64;
        let t_hi = (hi / TILE_LEN).floor() as i64;
        let mut out = Vec::new();
        for t in t_lo..=t_hi {
            let marks = self.tile_marks(level32, t)?;
            for (i, &m) in marks.iter().enumerate() {
                if m >= lo && m <= hi {
                    out.push(MarkRef { level: level32, tile: t, idx: i as u32 });
                }
            }
        }
        Ok(out)
    }

    /// The mark of `level` adjacent to `r` on the given side, if materialized
    /// within the window.
    pub fn neighbor_mark(&mut self, r: MarkRef, to_right: bool) -> Result<Option<MarkRef>> {
        let level32 = r.level;
        let mut tile = r.tile;
        let mut idx = r.idx as i64 + if to_right { 1 } else { -1 };
        loop {
            let len = self.tile_marks(level32, tile).map(|m| m.len() as i64);
            let len = match len {
                Ok(l) => l,
                Err(Error::BoundaryContamination) => return Ok(None),
                Err(e) => return Err(e),
            };
            if idx >= 0 && idx < len {
                return Ok(Some(MarkRef { level: level32, tile, idx: idx as u32 }));
            }
            if to_right {
                tile += 1;
                idx = 0;
            } else {
                tile -= 1;
                let prev_len = match self.tile_marks(level32, tile) {
                    Ok(m) => m.len() as i64,
                    Err(Error::BoundaryContamination) => return Ok(None),
                    Err(e) => return Err(e),
                };
                idx = prev_len - 1;
            }
        }
    }
}

/// A trajectory through the level system: a start (level, position) and the
/// marks it visits afterwards. Shared tails are shared mark identities.
#[derive(Clone, Debug)]
pub struct LevelPath {
    pub start_level: u64,
    pub start_position: f64,
    pub marks: Vec<MarkRef>,
}

impl LevelPath {
    /// Position at the given level (start level or later).
    pub fn position_at(&self, sys: &LevelSystem, level: u64) -> f64 {
        if level == self.start_level {
            return self.start_position;
        }
        let off = (level - self.start_level - 1) as usize;
        sys.position(self.marks[off])
    }

    pub fn last_level(&self) -> u64 {
        self.start_level + self.marks.len() as u64
    }
}

/// Build the path from `(level, x)` by repeated nearest-mark steps up to
/// `to_level` inclusive.
pub fn path_from(sys: &mut LevelSystem, level: u64, x: f64, to_level: u64) -> Result<LevelPath> {
    let mut marks = Vec::with_capacity((to_level.saturating_sub(level)) as usize);
    if to_level > level {
        let mut cur = sys.successor_of_position(level, x)?;
        marks.push(cur);
        while (cur.level as u64) < to_level {
            cur = sys.successor(cur)?;
            marks.push(cur);
        }
    }
    Ok(LevelPath { start_level: level, start_position: x, marks })
}

/// Exact level-time spacings and their analytic bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpacingReport {
    pub n: u64,
    pub alpha: f64,
    pub k_n: u64,
    pub spacings: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// Closed form for the largest spacing, n²/((n−k_n)(n−k_n−1)).
    pub analytic_max: f64,
    /// Large-n approximation of the bound, 1/α².
    pub inverse_alpha_sq: f64,
}

/// Microscopic level-time spacings l_{j+1} − l_j for j = 0..k_n.
pub fn level_spacing(n: u64, alpha: f64) -> Result<SpacingReport> {
    let params = LevelParams::new(n, alpha)?;
    let k_n = params.k_n();
    if k_n + 1 >= n {
        return Err(Error::InvalidParameter("alpha too small: level times degenerate".into()));
    }
    let spacings: Vec<f64> =
        (0..=k_n).map(|j| params.time_micro(j + 1) - params.time_micro(j)).collect();
    let min = spacings.iter().copied().fold(f64::INFINITY, f64::min);
    let max = spacings.iter().copied().fold(0.0f64, f64::max);
    let nf = n as f64;
    let analytic_max = nf * nf / (((n - k_n) as f64) * ((n - k_n - 1) as f64));
    Ok(SpacingReport {
        n,
        alpha,
        k_n,
        spacings,
        min,
        max,
        analytic_max,
        inverse_alpha_sq: 1.0 / (alpha * alpha),
    })
}

/// Whether the mark count of `level` in [0, ε√n] lies inside the
/// concentration interval [α/2·ε√n, 2e/α·ε√n] (closed).
pub fn cansado_check(sys: &mut LevelSystem, eps: f64, level: u64) -> Result<bool> {
    if eps < 0.0 {
        return Err(Error::InvalidParameter("eps must be nonnegative".into()));
    }
    let span = eps * (sys.params.n as f64).sqrt();
    let count = sys.count_marks_in(level, 0.0, span)? as f64;
    let alpha = sys.params.alpha;
    let lo = alpha / 2.0 * span;
    let hi = 2.0 * std::f64::consts::E / alpha * span;
    Ok(count >= lo && count <= hi)
}

/// Result of comparing the pitch-`r` grid path against the continuum path on
/// one realization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridComparison {
    pub r: f64,
    pub levels: usize,
    pub agree_count: usize,
    pub all_agree: bool,
}

/// Run the open-site grid path of pitch `r` from `a` and compare it level by
/// level against the continuum path from `(0, a)`.
///
/// A site (rj, level) is open when the level's marks meet [rj, r(j+1)); the
/// grid path starts at site ⌊a/r⌋ and steps to the nearest open site of the
/// next level, fair coin to the right on ties. Agreement at a level means
/// the chosen site's cell contains the continuum path's mark.
pub fn grid_path_compare(
    sys: &mut LevelSystem,
    r: f64,
    a: f64,
    to_level: u64,
) -> Result<GridComparison> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("grid pitch must be positive, got {r}")));
    }
    let continuum = path_from(sys, 0, a, to_level)?;
    let mut site = (a / r).floor() as i64;
    let mut agree_count = 0;
    let mut all_agree = true;
    for level in 1..=to_level {
        let pos = site as f64 * r;
        site = nearest_open_site(sys, level, pos, r, site)?;
        let cont_cell = (sys.position(continuum.marks[(level - 1) as usize]) / r).floor() as i64;
        if site == cont_cell {
            agree_count += 1;
        } else {
            all_agree = false;
        }
    }
    Ok(GridComparison { r, levels: to_level as usize, agree_count, all_agree })
}

fn nearest_open_site(
    sys: &mut LevelSystem,
    level: u64,
    x: f64,
    r: f64,
    from_site: i64,
) -> Result<i64> {
    if x.abs() > sys.window - sys.guard {
        return Err(Error::BoundaryContamination);
    }
    let level32 = level as u32;
    let home = (x / TILE_LEN).floor() as i64;
    let mut best: Option<(f64, i64)> = None;
    let mut tie: Option<i64> = None;
    let mut ring: i64 = 0;
    loop {
        let tiles: &[i64] = &if ring == 0 { vec![home] } else { vec![home - ring, home + ring] };
        for &t in tiles {
            let marks = sys.tile_marks(level32, t)?.clone();
            for m in marks {
                let cell = (m / r).floor() as i64;
                let d = (cell as f64 * r - x).abs();
                match best {
                    None => best = Some((d, cell)),
                    Some((bd, bc)) => {
                        if d < bd || (d == bd && cell == bc) {
                            if d < bd {
                                best = Some((d, cell));
                                tie = None;
                            }
                        } else if d == bd && cell != bc {
                            tie = Some(cell);
                        }
                    }
                }
            }
        }
        let left_unexplored = x - (home - ring) as f64 * TILE_LEN;
        let right_unexplored = (home + ring + 1) as f64 * TILE_LEN - x;
        // A mark beyond the explored region can open a site at most r closer.
        let boundary = left_unexplored.min(right_unexplored) - r;
        if let Some((bd, bc)) = best {
            if bd <= boundary {
                return Ok(match tie {
                    Some(other) => {
                        let mut coin = RngStream::new(sys.seed, sys.trial, labels::GRID_TIE)
                            .substream(r.to_bits() ^ level, from_site as u64);
                        let (l, rr) = if bc < other { (bc, other) } else { (other, bc) };
                        if rng::flip_fair_coin(&mut coin) == 1 {
                            rr
                        } else {
                            l
                        }
                    }
                    None => bc,
                });
            }
        }
        ring += 1;
    }
}

/// Halve the grid pitch until the grid path agrees with the continuum path
/// at every level; returns the number of halvings used.
pub fn halvings_to_agreement(
    sys: &mut LevelSystem,
    r0: f64,
    a: f64,
    to_level: u64,
    max_halvings: u32,
) -> Result<Option<u32>> {
    let mut r = r0;
    for h in 0..=max_halvings {
        let cmp = grid_path_compare(sys, r, a, to_level)?;
        if cmp.all_agree {
            return Ok(Some(h));
        }
        r /= 2.0;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_system(seed: u64, trial: u64) -> LevelSystem {
        let params = LevelParams::new(100, 0.5).unwrap();
        LevelSystem::new(params, 400.0, 10, seed, trial).unwrap()
    }

    #[test]
    fn level_times_and_rates() {
        let p = LevelParams::new(10, 0.5).unwrap();
        assert_eq!(p.k_n(), 5);
        assert!((p.time_macro(1) - 1.0 / 9.0).abs() < 1e-15);
        assert!((p.time_macro(5) - 1.0).abs() < 1e-15);
        assert!((p.time_micro(1) - 10.0 / 9.0).abs() < 1e-15);
        // Level-0 macroscopic rate is n/√n = √n.
        assert!((p.rate_macro(0) - 10f64.sqrt()).abs() < 1e-12);
        // Normalized microscopic intensity stays in [α, 1] up to k_n.
        for j in 0..=p.k_n() {
            let r = p.rate_micro(j);
            assert!((0.5..=1.0).contains(&r));
        }
        // Frozen beyond k_n.
        assert_eq!(p.rate_micro(p.k_n() + 3), p.rate_micro(p.k_n()));
    }

    #[test]
    fn level_lookup_is_consistent() {
        let p = LevelParams::new(1000, 0.5).unwrap();
        for &t in &[0.0, 0.001, 0.1, 0.37, 0.999, 1.0] {
            let k = p.level_at_or_before(t);
            assert!(p.time_macro(k) <= t);
            assert!(p.time_macro(k + 1) > t);
        }
    }

    #[test]
    fn spacing_examples() {
        let rep = level_spacing(10, 0.5).unwrap();
        assert!((rep.spacings[0] - 10.0 / 9.0).abs() < 1e-12);
        assert!(rep.min >= 1.0);
        // Exact values n²/((n−j)(n−j−1)).
        for (j, s) in rep.spacings.iter().enumerate() {
            let nf = 10.0;
            let expect = nf * nf / ((10 - j as u64) as f64 * (10 - j as u64 - 1) as f64);
            assert!((s - expect).abs() < 1e-12);
        }
        // Large n: max within [0.8, 1.0] of the closed-form oracle; the
        // closed form itself is within a hair of 1/α².
        let big = level_spacing(10_000, 0.5).unwrap();
        assert!(big.min >= 1.0);
        let ratio = big.max / big.analytic_max;
        assert!((0.8..=1.0).contains(&ratio), "ratio {ratio}");
        assert!((big.analytic_max * big.alpha * big.alpha - 1.0).abs() < 1e-3);
    }

    #[test]
    fn tiles_are_reproducible_and_rate_correct() {
        let mut a = small_system(5, 1);
        let mut b = small_system(5, 1);
        assert_eq!(a.tile_marks(3, -2).unwrap(), b.tile_marks(3, -2).unwrap());
        // Open-site frequency check doubles as a tile-rate check: mean count
        // per tile ≈ rate·TILE_LEN over many tiles.
        let mut total = 0usize;
        let mut tiles = 0usize;
        for trial in 0..300u64 {
            let mut s = small_system(17, trial);
            for t in -10..10 {
                total += s.tile_marks(0, t).unwrap().len();
                tiles += 1;
            }
        }
        let mean = total as f64 / tiles as f64;
        let expect = TILE_LEN; // rate 1 at level 0
        let se = (expect / tiles as f64).sqrt();
        assert!((mean - expect).abs() < 4.0 * se, "{mean} vs {expect}");
    }

    #[test]
    fn successor_examples() {
        let mut sys = small_system(7, 0);
        // Exact single nearest: the successor of a position is the nearest
        // mark on the next level.
        let m = sys.nearest_mark(1, 0.3, 0).unwrap();
        let pos = sys.position(m);
        let marks: Vec<f64> = sys.marks_in(1, -40.0, 40.0).unwrap().iter().map(|r| sys.position(*r)).collect();
        let best = marks.iter().copied().min_by(|a, b| {
            (a - 0.3).abs().partial_cmp(&(b - 0.3).abs()).unwrap()
        });
        assert_eq!(best.unwrap(), pos);
        // Memoized: same successor object.
        let s1 = sys.successor(m).unwrap();
        let s2 = sys.successor(m).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn equidistant_tie_frequency_is_half() {
        // Directly exercise the tie arm of nearest_mark by synthesizing a
        // two-mark level through the public coin stream: equidistant pairs at
        // {x-1, x+1} are vanishingly rare in a Poisson realization, so test
        // the coin law itself at the tie label.
        let mut rights = 0u64;
        let draws = 10_000u64;
        for trial in 0..draws {
            let mut coin = RngStream::new(3, trial, labels::LEVEL_TIE).substream(1, 42);
            rights += rng::flip_fair_coin(&mut coin) as u64;
        }
        let freq = rights as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 0.02, "right-choice frequency {freq}");
    }

    #[test]
    fn paths_share_tails_and_do_not_cross() {
        let mut sys = small_system(21, 0);
        let to = 30;
        let a = path_from(&mut sys, 0, -3.0, to).unwrap();
        let b = path_from(&mut sys, 0, -3.0, to).unwrap();
        assert_eq!(a.marks, b.marks);
        let c = path_from(&mut sys, 0, 5.0, to).unwrap();
        // Weak ordering at every level; once the marks agree they stay equal.
        let mut merged = false;
        for lvl in 1..=to {
            let (ma, mc) = (a.marks[(lvl - 1) as usize], c.marks[(lvl - 1) as usize]);
            assert!(sys.position(ma) <= sys.position(mc) + 1e-12);
            if merged {
                assert_eq!(ma, mc);
            }
            if ma == mc {
                merged = true;
            }
        }
    }

    #[test]
    fn contamination_is_detected() {
        let mut sys = small_system(9, 0);
        let too_far = sys.window - sys.guard / 2.0;
        match sys.nearest_mark(1, too_far, 0) {
            Err(Error::BoundaryContamination) => {}
            other => panic!("expected contamination, got {other:?}"),
        }
    }

    #[test]
    fn cansado_examples() {
        // ε = 0: the interval is {0}, count 0, check passes.
        let mut sys = small_system(13, 0);
        assert!(cansado_check(&mut sys, 0.0, 1).unwrap());
        // Window too small.
        assert!(cansado_check(&mut sys, 1e6, 1).is_err());
        // At n = 10⁴ the violation fraction over levels is far below 1%.
        let params = LevelParams::new(10_000, 0.5).unwrap();
        let mut violations = 0usize;
        let mut checks = 0usize;
        for trial in 0..3u64 {
            let mut sys = LevelSystem::new(params, 600.0, 2, 29, trial).unwrap();
            for k in (0..=params.k_n()).step_by(50) {
                checks += 1;
                if !cansado_check(&mut sys, 1.0, k).unwrap() {
                    violations += 1;
                }
            }
        }
        assert!((violations as f64) / (checks as f64) < 0.01, "{violations}/{checks}");
    }

    #[test]
    fn coarse_grid_with_single_marks_follows_cells() {
        // Sanity fixture: with r much larger than every inter-mark gap and
        // one mark per relevant cell, the grid path's site is always the cell
        // of the continuum mark, so agreement is immediate.
        let mut sys = small_system(33, 0);
        let to = 10;
        let r = 64.0;
        let cmp = grid_path_compare(&mut sys, r, 0.5, to).unwrap();
        // All continuum marks near the origin stay within one r-cell.
        let cont = path_from(&mut sys, 0, 0.5, to).unwrap();
        let all_same_cell = cont
            .marks
            .iter()
            .all(|m| (sys.position(*m) / r).floor() as i64 == (0.5f64 / r).floor() as i64);
        if all_same_cell {
            assert!(cmp.all_agree);
        }
    }

    #[test]
    fn halving_reaches_exact_agreement() {
        for trial in 0..5u64 {
            let mut sys = small_system(41, trial);
            let h = halvings_to_agreement(&mut sys, 1.0, 0.3, 25, 40).unwrap();
            assert!(h.is_some(), "trial {trial} did not converge within 40 halvings");
        }
    }

    #[test]
    fn agreement_fraction_trends_upward_under_halving() {
        // Advisory trend, not a theorem: a halving reshuffles sites and
        // coins mid-path, so per-realization monotonicity regularly fails
        // (observed ~2/12 at this scale). What must hold: no realization ends
        // below its start, and the pooled mean agreement strictly improves.
        let total = 12;
        let halvings = 12;
        let mut sums = vec![0usize; halvings];
        for trial in 0..total {
            let mut sys = small_system(43, trial);
            let mut counts = Vec::new();
            let mut r = 1.0;
            for _ in 0..halvings {
                counts.push(grid_path_compare(&mut sys, r, 0.3, 25).unwrap().agree_count);
                r /= 2.0;
            }
            assert!(
                counts.last().unwrap() >= counts.first().unwrap(),
                "trial {trial}: agreement ended below its start: {counts:?}"
            );
            for (i, c) in counts.iter().enumerate() {
                sums[i] += c;
            }
        }
        assert!(
            sums[halvings - 1] > sums[0],
            "pooled agreement did not improve: {sums:?}"
        );
    }
}
