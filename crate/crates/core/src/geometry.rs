//! Wedge parameterization, the vanilla-wedge heuristic, drawable-area
//! geometry, domain-validity checks, and parameter-grid enumeration.
//!
//! Coordinate frame convention ([`Frame`]): the origin sits at the target's
//! nearest point on the screen edge, the +x axis points off-screen along the
//! wedge's perpendicular bisector, and y is lateral. All angles are radians,
//! all distances meters, referenced to a 10 m viewing distance.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Viewing distance the meter-valued defaults are referenced to.
pub const REFERENCE_VIEW_DISTANCE_M: f64 = 10.0;

/// Shape of a wedge cue: aperture angle at the vertex, leg length, and the
/// distance from the screen-edge origin to the invisible vertex.
///
/// Invariants enforced at construction: `0 < theta < pi`, `leg > 0`,
/// `0 < vertex_dist < leg * cos(theta/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWedgeParams")]
pub struct WedgeParams {
    theta: f64,
    leg: f64,
    vertex_dist: f64,
}

#[derive(Deserialize)]
struct RawWedgeParams {
    theta: f64,
    leg: f64,
    vertex_dist: f64,
}

impl TryFrom<RawWedgeParams> for WedgeParams {
    type Error = Error;

    fn try_from(raw: RawWedgeParams) -> Result<Self> {
        WedgeParams::new(raw.theta, raw.leg, raw.vertex_dist)
    }
}

impl WedgeParams {
    pub fn new(theta: f64, leg: f64, vertex_dist: f64) -> Result<Self> {
        if !is_valid(theta, leg, vertex_dist) {
            return Err(Error::Domain(format!(
                "invalid wedge parameters: theta={theta} rad, leg={leg} m, vertex_dist={vertex_dist} m \
                 (need 0 < theta < pi, leg > 0, 0 < vertex_dist < leg*cos(theta/2))"
            )));
        }
        Ok(Self {
            theta,
            leg,
            vertex_dist,
        })
    }

    /// Aperture angle in radians.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Leg length in meters.
    pub fn leg(&self) -> f64 {
        self.leg
    }

    /// Distance from the screen-edge origin to the invisible vertex, meters.
    pub fn vertex_dist(&self) -> f64 {
        self.vertex_dist
    }

    /// Bounding-box footprint `(w, h)` of the off-screen/on-screen figure:
    /// `w = leg*cos(theta/2) - vertex_dist`, `h = 2*leg*sin(theta/2)`.
    ///
    /// Both components are strictly positive for any valid parameter set.
    pub fn footprint(&self) -> (f64, f64) {
        footprint_wh(self.theta, self.leg, self.vertex_dist)
    }

    /// Rescale all lengths for a different viewing distance, keeping the
    /// aperture fixed. Scaling is linear in `view_distance / 10 m`.
    pub fn rescaled_for_view_distance(&self, view_distance_m: f64) -> Result<Self> {
        if view_distance_m <= 0.0 || !view_distance_m.is_finite() {
            return Err(Error::Domain(format!(
                "view distance must be positive and finite, got {view_distance_m}"
            )));
        }
        let s = view_distance_m / REFERENCE_VIEW_DISTANCE_M;
        Self::new(self.theta, self.leg * s, self.vertex_dist * s)
    }
}

/// Placement convention for a [`WedgeParams`] in the screen-edge frame.
///
/// The frame carries no data; it fixes where the wedge's landmark points sit:
/// vertex at `(d, 0)`, base endpoints at `(d - l*cos(theta/2), +-l*sin(theta/2))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Frame;

impl Frame {
    /// Invisible-vertex position `(d, 0)`.
    pub fn vertex(p: &WedgeParams) -> [f64; 2] {
        [p.vertex_dist(), 0.0]
    }

    /// The two base endpoints, upper (`+y`) first.
    pub fn base_endpoints(p: &WedgeParams) -> ([f64; 2], [f64; 2]) {
        let x = p.vertex_dist() - p.leg() * (p.theta() / 2.0).cos();
        let y = p.leg() * (p.theta() / 2.0).sin();
        ([x, y], [x, -y])
    }
}

/// Maximum on-screen bounding box a wedge may occupy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawableArea {
    max_width: f64,
    max_height: f64,
}

impl DrawableArea {
    pub fn new(max_width: f64, max_height: f64) -> Result<Self> {
        if !(max_width > 0.0 && max_width.is_finite() && max_height > 0.0 && max_height.is_finite())
        {
            return Err(Error::Domain(format!(
                "drawable area must have positive finite extents, got W={max_width}, H={max_height}"
            )));
        }
        Ok(Self {
            max_width,
            max_height,
        })
    }

    pub fn max_width(&self) -> f64 {
        self.max_width
    }

    pub fn max_height(&self) -> f64 {
        self.max_height
    }

    pub fn rescaled_for_view_distance(&self, view_distance_m: f64) -> Result<Self> {
        if view_distance_m <= 0.0 || !view_distance_m.is_finite() {
            return Err(Error::Domain(format!(
                "view distance must be positive and finite, got {view_distance_m}"
            )));
        }
        let s = view_distance_m / REFERENCE_VIEW_DISTANCE_M;
        Self::new(self.max_width * s, self.max_height * s)
    }
}

impl Default for DrawableArea {
    /// The default working area: a 14 m x 14 m box at the reference distance.
    fn default() -> Self {
        Self {
            max_width: 14.0,
            max_height: 14.0,
        }
    }
}

/// Total validity predicate for a raw `(theta, leg, dist)` triple: strict
/// bounds `0 < theta < pi` and `0 < dist < leg * cos(theta/2)`.
pub fn is_valid(theta: f64, leg: f64, dist: f64) -> bool {
    theta.is_finite()
        && leg.is_finite()
        && dist.is_finite()
        && theta > 0.0
        && theta < std::f64::consts::PI
        && leg > 0.0
        && dist > 0.0
        && dist < leg * (theta / 2.0).cos()
}

/// Footprint formula on raw parameters; total (no validity check) so callers
/// can evaluate constraint functions outside the valid region.
pub fn footprint_wh(theta: f64, leg: f64, dist: f64) -> (f64, f64) {
    let w = leg * (theta / 2.0).cos() - dist;
    let h = 2.0 * leg * (theta / 2.0).sin();
    (w, h)
}

/// Heuristic vanilla-wedge parameters for a target `d_poi` meters past the
/// screen edge: `l = d_poi + ln((d_poi + 20) / 12) * 10` and
/// `theta = (5 + 0.3 * d_poi) / l` radians, with the vertex pinned on the
/// target (`vertex_dist = d_poi`). The logarithm is natural.
pub fn vw_params(d_poi: f64) -> Result<WedgeParams> {
    if !(d_poi > 0.0) || !d_poi.is_finite() {
        return Err(Error::Domain(format!(
            "vanilla-wedge heuristic requires d_poi > 0, got {d_poi}"
        )));
    }
    let leg = d_poi + ((d_poi + 20.0) / 12.0).ln() * 10.0;
    let theta = (5.0 + 0.3 * d_poi) / leg;
    WedgeParams::new(theta, leg, d_poi)
}

/// Cartesian product of candidate apertures, leg lengths, and vertex
/// distances. Apertures are accepted in degrees and stored in radians.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamGrid {
    thetas: Vec<f64>,
    legs: Vec<f64>,
    dists: Vec<f64>,
}

/// On-disk grid description: `{"theta_deg": [...], "leg_m": [...], "dist_m": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub theta_deg: Vec<f64>,
    pub leg_m: Vec<f64>,
    pub dist_m: Vec<f64>,
}

impl ParamGrid {
    /// Build a grid from aperture values in degrees plus leg/distance values
    /// in meters. Each list must be non-empty, strictly increasing, and
    /// positive.
    pub fn from_degrees(theta_deg: &[f64], legs_m: &[f64], dists_m: &[f64]) -> Result<Self> {
        check_axis("theta_deg", theta_deg)?;
        check_axis("leg_m", legs_m)?;
        check_axis("dist_m", dists_m)?;
        Ok(Self {
            thetas: theta_deg.iter().map(|t| t.to_radians()).collect(),
            legs: legs_m.to_vec(),
            dists: dists_m.to_vec(),
        })
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        Self::from_degrees(&spec.theta_deg, &spec.leg_m, &spec.dist_m)
    }

    pub fn load_spec(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: GridSpec = serde_json::from_str(&text)?;
        Self::from_spec(&spec)
    }

    /// Aperture values, radians.
    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn legs(&self) -> &[f64] {
        &self.legs
    }

    pub fn dists(&self) -> &[f64] {
        &self.dists
    }

    pub fn len(&self) -> usize {
        self.thetas.len() * self.legs.len() * self.dists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for ParamGrid {
    /// The built-in measurement grid: apertures 10..150 deg in 20 deg steps,
    /// legs 2..12 m, vertex distances 1..11 m (968 combinations).
    fn default() -> Self {
        let thetas: Vec<f64> = (0..8).map(|i| 10.0 + 20.0 * i as f64).collect();
        let legs: Vec<f64> = (2..=12).map(|v| v as f64).collect();
        let dists: Vec<f64> = (1..=11).map(|v| v as f64).collect();
        Self::from_degrees(&thetas, &legs, &dists).expect("built-in grid is well formed")
    }
}

fn check_axis(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Domain(format!("grid axis {name} is empty")));
    }
    for w in values.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Domain(format!(
                "grid axis {name} must be strictly increasing, saw {} then {}",
                w[0], w[1]
            )));
        }
    }
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "grid axis {name} must contain positive finite values"
        )));
    }
    Ok(())
}

/// One combination from a grid enumeration with its validity verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub theta: f64,
    pub leg: f64,
    pub dist: f64,
    pub valid: bool,
}

/// Full Cartesian enumeration of a grid with per-combination validity.
#[derive(Debug, Clone)]
pub struct GridEnumeration {
    pub cells: Vec<GridCell>,
    pub total: usize,
    pub valid_count: usize,
}

/// Enumerate every combination in the grid (theta-major, then leg, then
/// dist) and tag each with [`is_valid`].
pub fn enumerate_grid(grid: &ParamGrid) -> GridEnumeration {
    let mut cells = Vec::with_capacity(grid.len());
    for &theta in grid.thetas() {
        for &leg in grid.legs() {
            for &dist in grid.dists() {
                cells.push(GridCell {
                    theta,
                    leg,
                    dist,
                    valid: is_valid(theta, leg, dist),
                });
            }
        }
    }
    let valid_count = cells.iter().filter(|c| c.valid).count();
    GridEnumeration {
        total: cells.len(),
        valid_count,
        cells,
    }
}

/// Write an enumeration as CSV with header `theta_rad,leg_m,dist_m,valid`.
pub fn save_enumeration(enumeration: &GridEnumeration, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "theta_rad,leg_m,dist_m,valid")?;
    for c in &enumeration.cells {
        writeln!(out, "{},{},{},{}", c.theta, c.leg, c.dist, c.valid)?;
    }
    out.flush()?;
    Ok(())
}
