//! Virtual phantoms: wire targets in water, graphite-like diffuse scatterers
//! in a tissue-mimicking medium, pillar targets and anechoic inclusions.
//!
//! Coordinates are in the image plane of the rotating beam, in meters, with
//! the probe axis at the origin. `z` points along the center of the imaging
//! sector and `x` across it, so a ray at sector angle `a` (degrees, zero at
//! the sector center) has direction `(sin a, cos a)`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::acoustics::{lateral_beam_fwhm, Medium, TransducerSpec};
use crate::error::{Error, Result};
use crate::imaging::BModeImage;

pub const PHANTOM_FORMAT: &str = "eustwin-phantom";
pub const PHANTOM_VERSION: u32 = 1;

/// Wire reflectivity relative to the diffuse scatterer standard deviation
/// (+40 dB).
pub const WIRE_REFLECTIVITY: f64 = 100.0;
pub const WIRE_DIAMETER_M: f64 = 100e-6;
pub const PILLAR_DIAMETER_M: f64 = 4e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x_m: f64,
    pub z_m: f64,
}

impl Position {
    pub fn new(x_m: f64, z_m: f64) -> Self {
        Position { x_m, z_m }
    }

    /// Builds a point at `radius_m` from the probe along sector angle `angle_deg`.
    pub fn from_polar(radius_m: f64, angle_deg: f64) -> Self {
        let a = angle_deg.to_radians();
        Position {
            x_m: radius_m * a.sin(),
            z_m: radius_m * a.cos(),
        }
    }

    pub fn radius_m(&self) -> f64 {
        self.x_m.hypot(self.z_m)
    }

    /// Sector angle in degrees, zero along `+z`.
    pub fn angle_deg(&self) -> f64 {
        self.x_m.atan2(self.z_m).to_degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub position: Position,
    /// Signed amplitude reflectivity.
    pub reflectivity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireTarget {
    pub center: Position,
    pub diameter_m: f64,
    pub reflectivity: f64,
}

/// Cylinder target. Only the face turned towards the probe scatters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PillarTarget {
    pub center: Position,
    pub diameter_m: f64,
    /// Reflectivity of each surface point.
    pub reflectivity: f64,
    pub surface_spacing_m: f64,
}

impl PillarTarget {
    /// Point scatterers along the half circumference facing the probe.
    pub fn surface_points(&self) -> Vec<Scatterer> {
        let radius = self.diameter_m / 2.0;
        let toward_probe = (-self.center.x_m).atan2(-self.center.z_m);
        let n = ((PI * radius) / self.surface_spacing_m).ceil().max(1.0) as usize;
        (0..=n)
            .map(|i| {
                let phi = toward_probe - PI / 2.0 + PI * i as f64 / n as f64;
                Scatterer {
                    position: Position::new(
                        self.center.x_m + radius * phi.sin(),
                        self.center.z_m + radius * phi.cos(),
                    ),
                    reflectivity: self.reflectivity,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Circle {
        center: Position,
        radius_m: f64,
    },
    Rect {
        x_min_m: f64,
        x_max_m: f64,
        z_min_m: f64,
        z_max_m: f64,
    },
}

impl Shape {
    pub fn contains(&self, p: Position) -> bool {
        match *self {
            Shape::Circle { center, radius_m } => (p.x_m - center.x_m).hypot(p.z_m - center.z_m) <= radius_m,
            Shape::Rect {
                x_min_m,
                x_max_m,
                z_min_m,
                z_max_m,
            } => p.x_m >= x_min_m && p.x_m <= x_max_m && p.z_m >= z_min_m && p.z_m <= z_max_m,
        }
    }
}

/// Annular sector around the probe axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorBounds {
    pub r_min_m: f64,
    pub r_max_m: f64,
    pub half_angle_deg: f64,
}

impl Default for SectorBounds {
    fn default() -> Self {
        SectorBounds {
            r_min_m: 2e-3,
            r_max_m: 22e-3,
            half_angle_deg: 53.0,
        }
    }
}

impl SectorBounds {
    pub fn contains(&self, p: Position) -> bool {
        let r = p.radius_m();
        r >= self.r_min_m && r <= self.r_max_m && p.angle_deg().abs() <= self.half_angle_deg
    }

    pub fn area_m2(&self) -> f64 {
        self.half_angle_deg.to_radians() * (self.r_max_m.powi(2) - self.r_min_m.powi(2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomDef {
    pub medium: Medium,
    pub bounds: SectorBounds,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Diffuse scatterers are sub-wavelength, so their echo amplitude grows
    /// as `(f / reference_frequency_hz)^diffuse_frequency_exponent`. Wires
    /// and pillars are frequency independent.
    pub diffuse_frequency_exponent: f64,
    pub reference_frequency_hz: f64,
    #[serde(default)]
    pub scatterers: Vec<Scatterer>,
    #[serde(default)]
    pub wires: Vec<WireTarget>,
    #[serde(default)]
    pub pillars: Vec<PillarTarget>,
    #[serde(default)]
    pub anechoic_regions: Vec<Shape>,
}

#[derive(Serialize, Deserialize)]
struct PhantomDocument {
    format: String,
    version: u32,
    phantom: PhantomDef,
}

impl PhantomDef {
    pub fn empty(medium: Medium) -> Self {
        PhantomDef {
            medium,
            bounds: SectorBounds::default(),
            seed: None,
            diffuse_frequency_exponent: 2.0,
            reference_frequency_hz: 5.1e6,
            scatterers: Vec::new(),
            wires: Vec::new(),
            pillars: Vec::new(),
            anechoic_regions: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.medium.validate()?;
        let b = &self.bounds;
        if !(b.r_min_m >= 0.0 && b.r_max_m > b.r_min_m) {
            return Err(Error::invalid("bounds", "need 0 <= r_min_m < r_max_m"));
        }
        if !(b.half_angle_deg > 0.0 && b.half_angle_deg < 180.0) {
            return Err(Error::invalid("bounds.half_angle_deg", "must be in (0, 180)"));
        }
        if !(self.reference_frequency_hz > 0.0) {
            return Err(Error::invalid("reference_frequency_hz", "must be positive"));
        }
        let positions = self
            .scatterers
            .iter()
            .map(|s| s.position)
            .chain(self.wires.iter().map(|w| w.center))
            .chain(self.pillars.iter().map(|p| p.center));
        for p in positions {
            if !self.bounds.contains(p) {
                return Err(Error::OutOfBounds {
                    position_m: (p.x_m, p.z_m),
                });
            }
        }
        for w in &self.wires {
            if !(w.diameter_m > 0.0) {
                return Err(Error::invalid("wires.diameter_m", "must be positive"));
            }
        }
        for p in &self.pillars {
            if !(p.diameter_m > 0.0 && p.surface_spacing_m > 0.0) {
                return Err(Error::invalid("pillars", "diameter and spacing must be positive"));
            }
        }
        for s in &self.scatterers {
            if self.anechoic_regions.iter().any(|r| r.contains(s.position)) {
                return Err(Error::invalid("anechoic_regions", "region contains diffuse scatterers"));
            }
        }
        Ok(())
    }

    pub fn target_count(&self) -> usize {
        self.scatterers.len() + self.wires.len() + self.pillars.len()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = PhantomDocument {
            format: PHANTOM_FORMAT.to_string(),
            version: PHANTOM_VERSION,
            phantom: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PhantomDocument = serde_json::from_str(text)?;
        if doc.format != PHANTOM_FORMAT || doc.version != PHANTOM_VERSION {
            return Err(Error::Format {
                what: "phantom file",
                reason: format!("unsupported format {} v{}", doc.format, doc.version),
            });
        }
        doc.phantom.validate()?;
        Ok(doc.phantom)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Wires on the center ray of the sector, `wire_depths_m` measured from the
/// inner edge of the imaging window. Water medium.
pub fn make_wire_phantom(wire_depths_m: &[f64]) -> Result<PhantomDef> {
    let mut phantom = PhantomDef::empty(Medium::water());
    if wire_depths_m.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::DepthsNotIncreasing);
    }
    for &depth in wire_depths_m {
        let center = Position::new(0.0, phantom.bounds.r_min_m + depth);
        if !(depth > 0.0) || !phantom.bounds.contains(center) {
            return Err(Error::OutOfBounds {
                position_m: (center.x_m, center.z_m),
            });
        }
        phantom.wires.push(WireTarget {
            center,
            diameter_m: WIRE_DIAMETER_M,
            reflectivity: WIRE_REFLECTIVITY,
        });
    }
    Ok(phantom)
}

/// Default wire depths: 5, 10 and 15 mm into the 2 cm window.
pub fn default_wire_depths() -> Vec<f64> {
    vec![5e-3, 10e-3, 15e-3]
}

/// Area of one resolution cell of `spec` at its focus: lateral FWHM times
/// axial FWHM.
pub fn resolution_cell_area_m2(spec: &TransducerSpec, medium: &Medium) -> f64 {
    lateral_beam_fwhm(spec, spec.focal_depth_m, medium) * spec.axial_fwhm_m(medium)
}

/// Builder for speckle-generating phantoms.
#[derive(Debug, Clone)]
pub struct TissuePhantomBuilder {
    /// Scatterers per resolution cell of `cell_reference`.
    pub density: f64,
    pub seed: u64,
    pub medium: Medium,
    pub bounds: SectorBounds,
    pub cell_reference: TransducerSpec,
    pub anechoic_regions: Vec<Shape>,
    pub wires: Vec<WireTarget>,
    pub pillars: Vec<PillarTarget>,
}

impl TissuePhantomBuilder {
    pub fn new(density: f64, seed: u64) -> Self {
        TissuePhantomBuilder {
            density,
            seed,
            medium: Medium::tissue(),
            bounds: SectorBounds::default(),
            cell_reference: TransducerSpec::high_frequency(),
            anechoic_regions: Vec::new(),
            wires: Vec::new(),
            pillars: Vec::new(),
        }
    }

    pub fn scatterer_count(&self) -> usize {
        let cell = resolution_cell_area_m2(&self.cell_reference, &self.medium);
        (self.density * self.bounds.area_m2() / cell).round() as usize
    }

    pub fn build(self) -> Result<PhantomDef> {
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::invalid("density", "must be positive"));
        }
        let count = self.scatterer_count();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let b = self.bounds;
        let (r2_lo, r2_hi) = (b.r_min_m.powi(2), b.r_max_m.powi(2));
        let mut scatterers = Vec::with_capacity(count);
        for _ in 0..count {
            let r = rng.random_range(r2_lo..r2_hi).sqrt();
            let a = rng.random_range(-b.half_angle_deg..b.half_angle_deg);
            let reflectivity: f64 = rng.sample(StandardNormal);
            let position = Position::from_polar(r, a);
            if self.anechoic_regions.iter().any(|s| s.contains(position)) {
                continue;
            }
            scatterers.push(Scatterer { position, reflectivity });
        }
        let phantom = PhantomDef {
            medium: self.medium,
            bounds: b,
            seed: Some(self.seed),
            scatterers,
            wires: self.wires,
            pillars: self.pillars,
            anechoic_regions: self.anechoic_regions,
            ..PhantomDef::empty(self.medium)
        };
        phantom.validate()?;
        Ok(phantom)
    }
}

/// Uniform diffuse scatterers over the whole sector with standard-normal
/// reflectivities. `density` counts scatterers per high-frequency
/// resolution cell.
pub fn make_tissue_phantom(density: f64, seed: u64) -> Result<PhantomDef> {
    TissuePhantomBuilder::new(density, seed).build()
}

/// Layout of the contrast phantom: an anechoic cyst in speckle and a
/// strong shallow reference wire that sets the display maximum. Depths are
/// from the inner edge of the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastLayout {
    pub cyst_depth_m: f64,
    pub cyst_angle_deg: f64,
    pub cyst_radius_m: f64,
    pub wire_depth_m: f64,
    pub wire_angle_deg: f64,
    pub wire_reflectivity: f64,
}

impl Default for ContrastLayout {
    fn default() -> Self {
        ContrastLayout {
            cyst_depth_m: 5e-3,
            cyst_angle_deg: -25.0,
            cyst_radius_m: 2e-3,
            wire_depth_m: 2e-3,
            wire_angle_deg: 30.0,
            wire_reflectivity: 10.0 * WIRE_REFLECTIVITY,
        }
    }
}

impl ContrastLayout {
    /// Adds the cyst and the reference wire to `builder`.
    pub fn apply(&self, builder: &mut TissuePhantomBuilder) {
        let r0 = builder.bounds.r_min_m;
        builder.anechoic_regions.push(Shape::Circle {
            center: Position::from_polar(r0 + self.cyst_depth_m, self.cyst_angle_deg),
            radius_m: self.cyst_radius_m,
        });
        builder.wires.push(WireTarget {
            center: Position::from_polar(r0 + self.wire_depth_m, self.wire_angle_deg),
            diameter_m: WIRE_DIAMETER_M,
            reflectivity: self.wire_reflectivity,
        });
    }
}

/// Tissue phantom with an anechoic cyst and a reference wire, for contrast
/// and speckle measurements.
pub fn make_contrast_phantom(density: f64, seed: u64, layout: ContrastLayout) -> Result<PhantomDef> {
    let mut builder = TissuePhantomBuilder::new(density, seed);
    layout.apply(&mut builder);
    builder.build()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Target,
    Background,
    Homogeneous,
    Speckle,
    Noise,
}

impl RegionKind {
    pub const ALL: [RegionKind; 5] = [
        RegionKind::Target,
        RegionKind::Background,
        RegionKind::Homogeneous,
        RegionKind::Speckle,
        RegionKind::Noise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegionKind::Target => "target",
            RegionKind::Background => "background",
            RegionKind::Homogeneous => "homogeneous",
            RegionKind::Speckle => "speckle",
            RegionKind::Noise => "noise",
        }
    }
}

/// Axis-aligned rectangle in grid coordinates (columns = scanlines,
/// rows = depth samples).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub col: usize,
    pub row: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub kind: RegionKind,
    pub rect: PixelRect,
}

impl RegionSpec {
    pub fn new(kind: RegionKind, col: usize, row: usize, width: usize, height: usize) -> Self {
        RegionSpec {
            kind,
            rect: PixelRect {
                col,
                row,
                width,
                height,
            },
        }
    }

    /// Intersection with a `width x height` grid as half-open column and
    /// row ranges.
    pub fn clip(&self, width: usize, height: usize) -> Result<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let r = self.rect;
        if r.width == 0 || r.height == 0 {
            return Err(Error::invalid("region", "degenerate rectangle"));
        }
        let cols = r.col.min(width)..r.col.saturating_add(r.width).min(width);
        let rows = r.row.min(height)..r.row.saturating_add(r.height).min(height);
        if cols.is_empty() || rows.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok((cols, rows))
    }

    /// Samples of a row-major grid inside the rectangle, row-major order.
    pub fn extract(&self, data: &[f64], width: usize, height: usize) -> Result<Vec<f64>> {
        let (cols, rows) = self.clip(width, height)?;
        let mut out = Vec::with_capacity(cols.len() * rows.len());
        for row in rows {
            out.extend_from_slice(&data[row * width + cols.start..row * width + cols.end]);
        }
        Ok(out)
    }
}

pub fn region_pixels(image: &BModeImage, region: &RegionSpec) -> Result<Vec<f64>> {
    region.extract(&image.pixels, image.width, image.height)
}
