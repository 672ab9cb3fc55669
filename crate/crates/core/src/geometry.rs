//! Panel element grids, the BS antenna array, codeword regions and their
//! centroid discretization.
//!
//! All panels sit in planes parallel to YOZ with the room on their +X side.
//! Elements are laid out row-major on each panel (rows along Z, columns along
//! Y) and then globally re-ordered by ascending distance to the BS centroid;
//! that ordering is the coordinate sweep order of the solver.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

const UNIT_NORM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub center: Vec3,
    pub rows: usize,
    pub cols: usize,
    /// Element pitch in meters, identical along Y and Z.
    pub spacing: f64,
    pub normal: Vec3,
}

impl PanelSpec {
    /// A panel in the YOZ plane facing +X.
    pub fn new(center: Vec3, rows: usize, cols: usize, spacing: f64) -> Result<Self> {
        let panel = PanelSpec {
            center,
            rows,
            cols,
            spacing,
            normal: Vec3::x(),
        };
        panel.validate()?;
        Ok(panel)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::config(format!(
                "panel grid must be at least 1x1, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::config(format!(
                "panel spacing must be positive, got {}",
                self.spacing
            )));
        }
        if (self.normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::config("panel normal must have unit length"));
        }
        if !self.center.iter().all(|v| v.is_finite()) {
            return Err(Error::config("panel center must be finite"));
        }
        Ok(())
    }

    pub fn element_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Position of element `(row, col)`; the grid is centered on `center`.
    pub fn element_position(&self, row: usize, col: usize) -> Vec3 {
        let dy = (col as f64 - (self.cols as f64 - 1.0) / 2.0) * self.spacing;
        let dz = (row as f64 - (self.rows as f64 - 1.0) / 2.0) * self.spacing;
        self.center + Vec3::new(0.0, dy, dz)
    }
}

/// Every element of every panel, plus the BS-distance sweep order.
#[derive(Clone, Debug)]
pub struct ElementLayout {
    positions: Vec<Vec3>,
    panel_of: Vec<usize>,
    normals: Vec<Vec3>,
    order: Vec<usize>,
}

impl ElementLayout {
    /// Total element count N.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn panel_count(&self) -> usize {
        self.normals.len()
    }

    /// Positions in natural (panel, row, col) order.
    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn panel_of(&self) -> &[usize] {
        &self.panel_of
    }

    /// Natural indices sorted by ascending distance to the BS centroid.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Position and outward normal of the `n`-th element in sweep order.
    pub fn sorted_element(&self, n: usize) -> (Vec3, Vec3) {
        let idx = self.order[n];
        (self.positions[idx], self.normals[self.panel_of[idx]])
    }

    /// Iterates `(position, normal)` in sweep order.
    pub fn sorted_elements(&self) -> impl ExactSizeIterator<Item = (Vec3, Vec3)> + '_ {
        self.order
            .iter()
            .map(move |&idx| (self.positions[idx], self.normals[self.panel_of[idx]]))
    }
}

/// Lays out all panel elements and sorts them by distance to the BS centroid.
///
/// Equidistant elements keep their natural (panel, row, col) order.
pub fn build_layout(panels: &[PanelSpec], bs: &BsArray) -> Result<ElementLayout> {
    if panels.is_empty() {
        return Err(Error::config("at least one panel is required"));
    }
    let total: usize = panels.iter().map(PanelSpec::element_count).sum();
    let mut positions = Vec::with_capacity(total);
    let mut panel_of = Vec::with_capacity(total);
    for (p, panel) in panels.iter().enumerate() {
        panel.validate()?;
        for row in 0..panel.rows {
            for col in 0..panel.cols {
                positions.push(panel.element_position(row, col));
                panel_of.push(p);
            }
        }
    }

    let reference = bs.centroid();
    let distances: Vec<f64> = positions.iter().map(|p| (p - reference).norm()).collect();
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));

    Ok(ElementLayout {
        positions,
        panel_of,
        normals: panels.iter().map(|p| p.normal).collect(),
        order,
    })
}

/// BS antenna positions and its beamforming codebook `C^BS` (M x N^BS).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsArray {
    pub antenna_positions: Vec<Vec3>,
    /// One entry per BS codeword, each of length M.
    pub codebook: Vec<Vec<Complex64>>,
}

impl BsArray {
    pub fn new(antenna_positions: Vec<Vec3>, codebook: Vec<Vec<Complex64>>) -> Result<Self> {
        let bs = BsArray {
            antenna_positions,
            codebook,
        };
        bs.validate()?;
        Ok(bs)
    }

    /// Three antennas at (-5 ± λ/2, -5, 10) and (-5, -5, 10) driven by the
    /// all-ones DFT beam (1/√3)[1, 1, 1].
    pub fn three_antenna_default(wavelength: f64) -> Self {
        let half = wavelength / 2.0;
        let positions = vec![
            Vec3::new(-5.0 - half, -5.0, 10.0),
            Vec3::new(-5.0, -5.0, 10.0),
            Vec3::new(-5.0 + half, -5.0, 10.0),
        ];
        let amp = Complex64::new(1.0 / 3f64.sqrt(), 0.0);
        BsArray {
            antenna_positions: positions,
            codebook: vec![vec![amp; 3]],
        }
    }

    /// DFT codebook with `beams` columns: `[C]_{m,j} = e^{j2π mj/beams} / √M`.
    pub fn with_dft_codebook(antenna_positions: Vec<Vec3>, beams: usize) -> Result<Self> {
        if beams == 0 {
            return Err(Error::config("DFT codebook needs at least one beam"));
        }
        let m = antenna_positions.len();
        let scale = 1.0 / (m as f64).sqrt();
        let codebook = (0..beams)
            .map(|j| {
                (0..m)
                    .map(|i| Complex64::from_polar(scale, TAU * (i * j) as f64 / beams as f64))
                    .collect()
            })
            .collect();
        BsArray::new(antenna_positions, codebook)
    }

    pub fn validate(&self) -> Result<()> {
        if self.antenna_positions.is_empty() {
            return Err(Error::config("BS needs at least one antenna"));
        }
        if self.codebook.is_empty() {
            return Err(Error::config("BS codebook needs at least one codeword"));
        }
        let m = self.antenna_positions.len();
        for (j, column) in self.codebook.iter().enumerate() {
            if column.len() != m {
                return Err(Error::DimensionMismatch {
                    what: "BS codeword length",
                    expected: m,
                    actual: column.len(),
                });
            }
            let norm = column.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::config(format!(
                    "BS codeword {} has norm {norm}, expected 1",
                    j + 1
                )));
            }
        }
        Ok(())
    }

    pub fn antenna_count(&self) -> usize {
        self.antenna_positions.len()
    }

    pub fn codeword_count(&self) -> usize {
        self.codebook.len()
    }

    /// Zero-based codeword lookup.
    pub fn codeword(&self, j: usize) -> Result<&[Complex64]> {
        self.codebook
            .get(j)
            .map(Vec::as_slice)
            .ok_or_else(|| {
                Error::config(format!(
                    "BS codeword index {} out of range 1..={}",
                    j + 1,
                    self.codebook.len()
                ))
            })
    }

    pub fn centroid(&self) -> Vec3 {
        let sum = self
            .antenna_positions
            .iter()
            .fold(Vec3::zeros(), |acc, p| acc + p);
        sum / self.antenna_positions.len() as f64
    }
}

/// Planar shape in the UE plane; coordinates are (x, y) in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Rectangle {
        x: [f64; 2],
        y: [f64; 2],
    },
    /// Annular sector `{origin + r(cos ξ, sin ξ)}` with ξ in degrees from +X.
    Sector {
        radius: [f64; 2],
        azimuth_deg: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        origin: Option<[f64; 2]>,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
    Union {
        shapes: Vec<Shape>,
    },
}

impl Shape {
    /// Strict interior test. Polygons use the even-odd rule with boundary
    /// points excluded.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Rectangle { x: xr, y: yr } => xr[0] < x && x < xr[1] && yr[0] < y && y < yr[1],
            Shape::Sector {
                radius,
                azimuth_deg,
                origin,
            } => {
                let [ox, oy] = origin.unwrap_or([0.0, 0.0]);
                let (dx, dy) = (x - ox, y - oy);
                let r = dx.hypot(dy);
                if !(radius[0] < r && r < radius[1]) {
                    return false;
                }
                let span = azimuth_deg[1] - azimuth_deg[0];
                let rel = (dy.atan2(dx).to_degrees() - azimuth_deg[0]).rem_euclid(360.0);
                rel > 0.0 && rel < span
            }
            Shape::Polygon { vertices } => polygon_contains(vertices, x, y),
            Shape::Union { shapes } => shapes.iter().any(|s| s.contains(x, y)),
        }
    }

    /// Axis-aligned bounding box `([xmin, xmax], [ymin, ymax])`.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            Shape::Rectangle { x, y } => (*x, *y),
            Shape::Sector { radius, origin, .. } => {
                let [ox, oy] = origin.unwrap_or([0.0, 0.0]);
                let r = radius[1];
                ([ox - r, ox + r], [oy - r, oy + r])
            }
            Shape::Polygon { vertices } => vertices.iter().fold(
                ([f64::INFINITY, f64::NEG_INFINITY], [f64::INFINITY, f64::NEG_INFINITY]),
                |(bx, by), v| {
                    (
                        [bx[0].min(v[0]), bx[1].max(v[0])],
                        [by[0].min(v[1]), by[1].max(v[1])],
                    )
                },
            ),
            Shape::Union { shapes } => shapes.iter().map(Shape::bounds).fold(
                ([f64::INFINITY, f64::NEG_INFINITY], [f64::INFINITY, f64::NEG_INFINITY]),
                |(bx, by), (sx, sy)| {
                    (
                        [bx[0].min(sx[0]), bx[1].max(sx[1])],
                        [by[0].min(sy[0]), by[1].max(sy[1])],
                    )
                },
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |r: &[f64; 2], what: &str| {
            if r[0].is_finite() && r[1].is_finite() && r[0] < r[1] {
                Ok(())
            } else {
                Err(Error::config(format!("{what} range {r:?} must be finite and increasing")))
            }
        };
        match self {
            Shape::Rectangle { x, y } => {
                ordered(x, "rectangle x")?;
                ordered(y, "rectangle y")
            }
            Shape::Sector {
                radius,
                azimuth_deg,
                origin,
            } => {
                ordered(radius, "sector radius")?;
                ordered(azimuth_deg, "sector azimuth")?;
                if radius[0] < 0.0 {
                    return Err(Error::config("sector radius must be non-negative"));
                }
                if azimuth_deg[1] - azimuth_deg[0] > 360.0 {
                    return Err(Error::config("sector azimuth span exceeds 360 degrees"));
                }
                if origin.is_none() {
                    return Err(Error::config("sector origin is unresolved"));
                }
                Ok(())
            }
            Shape::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::config("polygon needs at least 3 vertices"));
                }
                Ok(())
            }
            Shape::Union { shapes } => {
                if shapes.is_empty() {
                    return Err(Error::config("union needs at least one shape"));
                }
                shapes.iter().try_for_each(Shape::validate)
            }
        }
    }

    /// Fills in unset sector origins.
    pub fn resolve_origin(&mut self, default: [f64; 2]) {
        match self {
            Shape::Sector { origin, .. } if origin.is_none() => *origin = Some(default),
            Shape::Union { shapes } => shapes.iter_mut().for_each(|s| s.resolve_origin(default)),
            _ => {}
        }
    }
}

fn polygon_contains(vertices: &[[f64; 2]], x: f64, y: f64) -> bool {
    let n = vertices.len();
    let mut inside = false;
    for i in 0..n {
        let [x1, y1] = vertices[i];
        let [x2, y2] = vertices[(i + 1) % n];
        // on-edge points are outside
        let cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1);
        let scale = (x2 - x1).abs() + (y2 - y1).abs();
        if cross.abs() <= 1e-12 * scale.max(1.0)
            && x >= x1.min(x2) - 1e-12
            && x <= x1.max(x2) + 1e-12
            && y >= y1.min(y2) - 1e-12
            && y <= y1.max(y2) + 1e-12
        {
            return false;
        }
        if (y1 > y) != (y2 > y) {
            let x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1);
            if x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// A codeword region `A_k`: a planar shape at UE height `z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub shape: Shape,
    pub z: f64,
    pub sample_step: f64,
}

impl Region {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_step > 0.0) || !self.sample_step.is_finite() {
            return Err(Error::config(format!(
                "region `{}`: sample_step must be positive",
                self.id
            )));
        }
        if !self.z.is_finite() {
            return Err(Error::config(format!("region `{}`: z must be finite", self.id)));
        }
        self.shape.validate()
    }
}

/// Centroids of the grid cells that fall inside a region, with solver weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePointSet {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl SamplePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Cell centroids of pitch `step` covering `bounds`, x-major then y.
pub(crate) fn grid_centroids(
    bounds: ([f64; 2], [f64; 2]),
    step: f64,
) -> impl Iterator<Item = (f64, f64)> {
    let (bx, by) = bounds;
    let count = |r: [f64; 2]| ((r[1] - r[0]) / step - 1e-9).ceil().max(0.0) as usize;
    let (nx, ny) = (count(bx), count(by));
    (0..nx).flat_map(move |i| {
        let x = bx[0] + (i as f64 + 0.5) * step;
        (0..ny).map(move |j| (x, by[0] + (j as f64 + 0.5) * step))
    })
}

/// Discretizes a region into cell centroids; every weight starts at
/// `initial_weight`.
pub fn sample_region(region: &Region, initial_weight: f64) -> Result<SamplePointSet> {
    region.validate()?;
    if !(initial_weight > 0.0) {
        return Err(Error::config("initial weight must be positive"));
    }
    let points: Vec<Vec3> = grid_centroids(region.shape.bounds(), region.sample_step)
        .filter(|&(x, y)| region.shape.contains(x, y))
        .map(|(x, y)| Vec3::new(x, y, region.z))
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyRegion(region.id.clone()));
    }
    let weights = vec![initial_weight; points.len()];
    Ok(SamplePointSet { points, weights })
}

/// Orthonormal in-plane axes for a panel normal.
fn tangent_frame(normal: &Vec3) -> (Vec3, Vec3) {
    let reference = if normal.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
    let e1 = reference.cross(normal).normalize();
    let e2 = normal.cross(&e1);
    (e1, e2)
}

/// Elevation (from `normal`, in `[0, π]`) and azimuth (in `[0, 2π)`) of
/// `target` as seen from `element`.
pub fn angles(element: &Vec3, target: &Vec3, normal: &Vec3) -> Result<(f64, f64)> {
    let v = target - element;
    let dist = v.norm();
    if !(dist > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "element and target coincide at {:?}",
            element.as_slice()
        )));
    }
    let elevation = (v.dot(normal) / dist).clamp(-1.0, 1.0).acos();
    let (e1, e2) = tangent_frame(normal);
    let azimuth = v.dot(&e2).atan2(v.dot(&e1)).rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    let azimuth = if azimuth >= TAU { 0.0 } else { azimuth };
    debug_assert!((0.0..=PI).contains(&elevation));
    Ok((elevation, azimuth))
}
