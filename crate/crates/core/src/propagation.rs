//! Geometry and radio propagation.
//!
//! Line of sight is decided geometrically against a square lattice of
//! square building footprints seen in plan view. Path loss follows the
//! 3GPP TR 38.901 Urban Macro (UMa) model, and received power is the usual
//! link budget `P_T + G_T + G_R - PL`, where the effective loss folds in
//! shadow fading and outdoor-to-indoor penetration.

use crate::error::{Error, Result};
use crate::phy::{self, RadioProfile, SpreadingFactor};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Effective environment height for UMa with user terminals below 13 m.
const UMA_ENVIRONMENT_HEIGHT: f64 = 1.0;
const MIN_DISTANCE_2D: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    /// Antenna height above ground.
    pub z: f64,
}

impl Position {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    pub fn distance_2d(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Regular lattice of square buildings covering a square area.
///
/// Centres sit on a grid of pitch `pitch`, placed symmetrically about the
/// area centre; only footprints lying wholly inside the area are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingGrid {
    pub area_side: f64,
    pub building_side: f64,
    pub pitch: f64,
    pub building_height: f64,
    per_axis: usize,
    offset: f64,
}

impl BuildingGrid {
    pub fn new(
        area_side: f64,
        building_side: f64,
        pitch: f64,
        building_height: f64,
    ) -> Result<Self> {
        if !(area_side > 0.0) {
            return Err(Error::Config(format!(
                "area side must be positive, got {area_side}"
            )));
        }
        if !(building_side >= 0.0) {
            return Err(Error::Config(format!(
                "building side must be non-negative, got {building_side}"
            )));
        }
        if !(pitch > 0.0) || pitch < building_side {
            return Err(Error::Config(format!(
                "building pitch {pitch} must be positive and at least the building side {building_side}"
            )));
        }
        let per_axis = if building_side > area_side {
            0
        } else {
            ((area_side - building_side) / pitch + 1e-9).floor() as usize + 1
        };
        let offset = (area_side - (per_axis.saturating_sub(1)) as f64 * pitch) / 2.0;
        Ok(BuildingGrid {
            area_side,
            building_side,
            pitch,
            building_height,
            per_axis,
            offset,
        })
    }

    /// A grid without buildings.
    pub fn empty(area_side: f64) -> Self {
        BuildingGrid {
            area_side,
            building_side: 0.0,
            pitch: area_side.max(1.0),
            building_height: 0.0,
            per_axis: 0,
            offset: 0.0,
        }
    }

    pub fn buildings_per_axis(&self) -> usize {
        self.per_axis
    }

    fn center_coord(&self, i: usize) -> f64 {
        self.offset + i as f64 * self.pitch
    }

    /// Ground-level centres of every kept footprint, row-major from the
    /// lower-left corner.
    pub fn centers(&self) -> Vec<Position> {
        let mut out = Vec::with_capacity(self.per_axis * self.per_axis);
        for j in 0..self.per_axis {
            for i in 0..self.per_axis {
                out.push(Position::new(
                    self.center_coord(i),
                    self.center_coord(j),
                    0.0,
                ));
            }
        }
        out
    }

    fn has_footprints(&self) -> bool {
        self.per_axis > 0 && self.building_side > 0.0
    }

    /// Lattice indices whose footprint could overlap `[lo, hi]` on one axis.
    fn index_range(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let half = self.building_side / 2.0;
        let first = ((lo - half - self.offset) / self.pitch).ceil().max(0.0);
        let last = ((hi + half - self.offset) / self.pitch)
            .floor()
            .min(self.per_axis as f64 - 1.0);
        (first <= last).then_some((first as usize, last as usize))
    }

    /// True when `(x, y)` lies strictly inside a footprint. Points on an
    /// edge count as outdoor.
    pub fn is_indoor(&self, x: f64, y: f64) -> bool {
        if !self.has_footprints() {
            return false;
        }
        let half = self.building_side / 2.0;
        let Some((i0, i1)) = self.index_range(x, x) else {
            return false;
        };
        let Some((j0, j1)) = self.index_range(y, y) else {
            return false;
        };
        (i0..=i1).any(|i| {
            let cx = self.center_coord(i);
            (x - cx).abs() < half && (j0..=j1).any(|j| (y - self.center_coord(j)).abs() < half)
        })
    }

    /// Total footprint area divided by the area of the square.
    pub fn covered_fraction(&self) -> f64 {
        let n = (self.per_axis * self.per_axis) as f64;
        n * self.building_side * self.building_side / (self.area_side * self.area_side)
    }
}

/// Open parameter interval `(lo, hi)` on which `p + t*d` lies strictly
/// between `min` and `max`.
fn open_slab(p: f64, d: f64, min: f64, max: f64) -> (f64, f64) {
    if d == 0.0 {
        if p > min && p < max {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (f64::INFINITY, f64::NEG_INFINITY)
        }
    } else {
        let t1 = (min - p) / d;
        let t2 = (max - p) / d;
        (t1.min(t2), t1.max(t2))
    }
}

/// Whether the closed segment `a -> b` passes through the open interior of
/// the axis-aligned square centred at `(cx, cy)`.
fn segment_hits_square(a: &Position, b: &Position, cx: f64, cy: f64, half: f64) -> bool {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let (xl, xh) = open_slab(a.x, dx, cx - half, cx + half);
    let (yl, yh) = open_slab(a.y, dy, cy - half, cy + half);
    let lo = xl.max(yl);
    let hi = xh.min(yh);
    lo < hi && lo < 1.0 && hi > 0.0
}

/// Plan-view line of sight: no footprint interior is crossed by the
/// segment between the two antennas.
pub fn is_los(a: &Position, b: &Position, grid: &BuildingGrid) -> bool {
    if !grid.has_footprints() {
        return true;
    }
    let half = grid.building_side / 2.0;
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let Some((i0, i1)) = grid.index_range(a.x.min(b.x), a.x.max(b.x)) else {
        return true;
    };
    for i in i0..=i1 {
        let cx = grid.center_coord(i);
        // y-extent of the segment while it is within this column's x-slab
        let (ylo, yhi) = if dx == 0.0 {
            (a.y.min(b.y), a.y.max(b.y))
        } else {
            let t1 = ((cx - half - a.x) / dx).clamp(0.0, 1.0);
            let t2 = ((cx + half - a.x) / dx).clamp(0.0, 1.0);
            let (y1, y2) = (a.y + t1 * dy, a.y + t2 * dy);
            (y1.min(y2), y1.max(y2))
        };
        let Some((j0, j1)) = grid.index_range(ylo, yhi) else {
            continue;
        };
        for j in j0..=j1 {
            if segment_hits_square(a, b, cx, grid.center_coord(j), half) {
                return false;
            }
        }
    }
    true
}

/// TR 38.901 UMa line-of-sight probability for a user terminal below 13 m.
pub fn uma_los_probability(distance_2d: f64) -> f64 {
    if distance_2d <= 18.0 {
        1.0
    } else {
        18.0 / distance_2d + (-distance_2d / 63.0).exp() * (1.0 - 18.0 / distance_2d)
    }
}

/// Outcome of a path-loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub db: f64,
    pub distance_2d: f64,
    pub distance_3d: f64,
    /// False when the geometry lies outside the UMa validity range
    /// (heights or distance); the value is still the model's formula.
    pub within_validity: bool,
}

/// Breakpoint distance `d'_BP = 4 h'_BS h'_UT f_c / c`.
pub fn uma_breakpoint(fc_ghz: f64, h_bs: f64, h_ut: f64) -> f64 {
    let hb = (h_bs - UMA_ENVIRONMENT_HEIGHT).max(0.1);
    let hu = (h_ut - UMA_ENVIRONMENT_HEIGHT).max(0.1);
    4.0 * hb * hu * fc_ghz * 1e9 / SPEED_OF_LIGHT
}

fn uma_los(fc_ghz: f64, d2d: f64, d3d: f64, h_bs: f64, h_ut: f64) -> f64 {
    let bp = uma_breakpoint(fc_ghz, h_bs, h_ut);
    if d2d <= bp {
        28.0 + 22.0 * d3d.log10() + 20.0 * fc_ghz.log10()
    } else {
        28.0 + 40.0 * d3d.log10() + 20.0 * fc_ghz.log10()
            - 9.0 * (bp * bp + (h_bs - h_ut).powi(2)).log10()
    }
}

/// TR 38.901 UMa path loss between two antennas. The higher antenna plays
/// the base-station role. 2-D distances under 10 m are clamped to 10 m.
pub fn path_loss(fc_ghz: f64, a: &Position, b: &Position, los: bool) -> PathLoss {
    let (h_bs, h_ut) = if a.z >= b.z { (a.z, b.z) } else { (b.z, a.z) };
    let raw_2d = a.distance_2d(b);
    let d2d = raw_2d.max(MIN_DISTANCE_2D);
    let d3d = (d2d * d2d + (h_bs - h_ut).powi(2)).sqrt();
    let pl_los = uma_los(fc_ghz, d2d, d3d, h_bs, h_ut);
    let db = if los {
        pl_los
    } else {
        let pl_nlos = 13.54 + 39.08 * d3d.log10() + 20.0 * fc_ghz.log10() - 0.6 * (h_ut - 1.5);
        pl_los.max(pl_nlos)
    };
    let within_validity = (MIN_DISTANCE_2D..=5_000.0).contains(&raw_2d)
        && (h_bs - 25.0).abs() < 1e-9
        && (1.5..=22.5).contains(&h_ut)
        && (0.5..=100.0).contains(&fc_ghz);
    PathLoss {
        db,
        distance_2d: d2d,
        distance_3d: d3d,
        within_validity,
    }
}

/// Propagation outcome of one ordered link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub los: bool,
    pub distance_2d: f64,
    pub distance_3d: f64,
    pub path_loss: f64,
    pub shadowing: f64,
    pub o2i_loss: f64,
}

impl LinkState {
    pub fn total_loss(&self) -> f64 {
        self.path_loss + self.shadowing + self.o2i_loss
    }
}

/// Link budget: `P_T + G_T + G_R - (PL + shadowing + O2I)`.
pub fn received_power(tx_power_dbm: f64, g_tx_db: f64, g_rx_db: f64, link: &LinkState) -> f64 {
    tx_power_dbm + g_tx_db + g_rx_db - link.total_loss()
}

/// A link is covered when the received power reaches the sensitivity.
pub fn in_coverage(
    p_r_dbm: f64,
    profile: &RadioProfile,
    sf: SpreadingFactor,
    bandwidth_hz: u32,
) -> Result<bool> {
    Ok(p_r_dbm >= phy::sensitivity(profile, sf, bandwidth_hz)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Position {
        Position::new(x, y, 1.5)
    }

    #[test]
    fn empty_grid_is_always_los() {
        let g = BuildingGrid::empty(1000.0);
        assert!(is_los(&p(0.0, 0.0), &p(1000.0, 1000.0), &g));
        let zero = BuildingGrid::new(1000.0, 0.0, 100.0, 20.0).unwrap();
        assert!(is_los(&p(0.0, 0.0), &p(1000.0, 1000.0), &zero));
        assert!(!zero.is_indoor(50.0, 50.0));
    }

    #[test]
    fn lattice_is_centered() {
        let g = BuildingGrid::new(100.0, 20.0, 50.0, 10.0).unwrap();
        let c: Vec<(f64, f64)> = g.centers().iter().map(|q| (q.x, q.y)).collect();
        assert_eq!(
            c,
            vec![(25.0, 25.0), (75.0, 25.0), (25.0, 75.0), (75.0, 75.0)]
        );
    }

    #[test]
    fn pitch_below_side_rejected() {
        assert!(BuildingGrid::new(100.0, 30.0, 20.0, 10.0).is_err());
    }

    #[test]
    fn building_on_segment_blocks() {
        // one 20 m footprint centred at (50, 0): x in [40,60], y in [-10,10]
        let g = BuildingGrid::new(100.0, 20.0, 100.0, 10.0).unwrap();
        let centers = g.centers();
        assert_eq!(centers.len(), 1);
        assert!(segment_hits_square(
            &p(0.0, 0.0),
            &p(100.0, 0.0),
            50.0,
            0.0,
            10.0
        ));
        // the lattice places this one at (50, 50)
        assert!(!is_los(&p(0.0, 50.0), &p(100.0, 50.0), &g));
        assert!(is_los(&p(0.0, 10.0), &p(100.0, 10.0), &g));
    }

    #[test]
    fn edges_and_corners_do_not_block() {
        assert!(!segment_hits_square(
            &p(0.0, 10.0),
            &p(100.0, 10.0),
            50.0,
            0.0,
            10.0
        ));
        assert!(!segment_hits_square(
            &p(30.0, 0.0),
            &p(40.0, 10.0),
            50.0,
            0.0,
            10.0
        ));
        assert!(!segment_hits_square(
            &p(40.0, -20.0),
            &p(40.0, 20.0),
            50.0,
            0.0,
            10.0
        ));
        // endpoint on the edge, pointing away
        assert!(!segment_hits_square(
            &p(40.0, 0.0),
            &p(0.0, 0.0),
            50.0,
            0.0,
            10.0
        ));
        // endpoint on the edge, pointing in
        assert!(segment_hits_square(
            &p(40.0, 0.0),
            &p(45.0, 0.0),
            50.0,
            0.0,
            10.0
        ));
    }

    #[test]
    fn indoor_endpoint_is_nlos() {
        let g = BuildingGrid::new(100.0, 20.0, 50.0, 10.0).unwrap();
        assert!(g.is_indoor(25.0, 25.0));
        assert!(!g.is_indoor(15.0, 25.0));
        assert!(!g.is_indoor(50.0, 50.0));
        for outdoor in [p(50.0, 50.0), p(0.0, 0.0), p(100.0, 0.0), p(50.0, 5.0)] {
            assert!(!is_los(&p(25.0, 25.0), &outdoor, &g));
        }
    }

    #[test]
    fn uma_los_pl1_example() {
        let gw = Position::new(0.0, 0.0, 25.0);
        let d3 = 100.0f64;
        let d2 = (d3 * d3 - 23.5f64 * 23.5).sqrt();
        let ed = Position::new(d2, 0.0, 1.5);
        let pl = path_loss(0.868, &gw, &ed, true);
        assert!((pl.distance_3d - 100.0).abs() < 1e-9);
        assert!((pl.db - 70.77).abs() < 0.005, "{}", pl.db);
        let pl24 = path_loss(2.4, &gw, &ed, true);
        assert!((pl24.db - 79.61).abs() < 0.01, "{}", pl24.db);
        assert!(pl.within_validity);
    }

    #[test]
    fn low_antennas_flag_validity() {
        let pl = path_loss(2.4, &p(0.0, 0.0), &p(300.0, 0.0), false);
        assert!(!pl.within_validity);
        assert!(pl.db > 0.0);
    }

    #[test]
    fn short_links_clamp_to_10m() {
        let a = p(0.0, 0.0);
        assert_eq!(
            path_loss(0.868, &a, &p(3.0, 0.0), true).db,
            path_loss(0.868, &a, &p(10.0, 0.0), true).db
        );
    }

    #[test]
    fn received_power_arithmetic() {
        let link = |pl| LinkState {
            los: true,
            distance_2d: 1.0,
            distance_3d: 1.0,
            path_loss: pl,
            shadowing: 0.0,
            o2i_loss: 0.0,
        };
        assert!((received_power(16.0, 0.0, 0.0, &link(120.0)) + 104.0).abs() < 1e-12);
        assert!((received_power(12.5, 0.0, 0.0, &link(70.77)) + 58.27).abs() < 1e-9);
        assert_eq!(received_power(12.5, 2.0, 3.0, &link(0.0)), 17.5);
    }

    #[test]
    fn coverage_boundary_inclusive() {
        let prof = RadioProfile::sx1272();
        let sf7 = SpreadingFactor::new(7).unwrap();
        assert!(in_coverage(-120.0, &prof, sf7, 125_000).unwrap());
        assert!(!in_coverage(-130.0, &prof, sf7, 125_000).unwrap());
        assert!(in_coverage(-124.0, &prof, sf7, 125_000).unwrap());
    }

    #[test]
    fn los_probability_limits() {
        assert_eq!(uma_los_probability(10.0), 1.0);
        assert!(uma_los_probability(1000.0) < 0.02);
    }
}
