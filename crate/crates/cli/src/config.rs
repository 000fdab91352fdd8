use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use eustwin::acoustics::{Medium, TransducerSpec};
use eustwin::imaging::{DATASET_COLUMNS, DATASET_ROWS, DEFAULT_DYNAMIC_RANGE_DB};
use eustwin::phantom::{
    default_wire_depths, make_wire_phantom, ContrastLayout, PhantomDef, Position, RegionKind, TissuePhantomBuilder,
};
use eustwin::report::{contrast_regions, wire_regions, PixelMapper, RegionSet};
use eustwin::rng::substream_seed;
use eustwin::scanner::{samples_for_depth, ProbeGeometry, DEFAULT_NOISE_SIGMA};

use crate::error::{CliError, CliResult};

/// Half width of the target boxes written for wire phantoms.
const WIRE_BOX_HALF_LATERAL_M: f64 = 3e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    Wire,
    Tissue,
    Contrast,
    File,
}

impl PhantomKind {
    fn as_str(self) -> &'static str {
        match self {
            PhantomKind::Wire => "wire",
            PhantomKind::Tissue => "tissue",
            PhantomKind::Contrast => "contrast",
            PhantomKind::File => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomConfig {
    pub kind: PhantomKind,
    /// Wire depths below the window start, for `wire`.
    pub wire_depths_m: Vec<f64>,
    /// Scatterers per resolution cell, for `tissue` and `contrast`.
    pub density: f64,
    /// Phantom JSON, for `file`.
    pub path: Option<PathBuf>,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            kind: PhantomKind::Wire,
            wire_depths_m: default_wire_depths(),
            density: 10.0,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransducerOverrides {
    pub center_frequency_hz: Option<f64>,
    pub fractional_bandwidth: Option<f64>,
    pub focal_depth_m: Option<f64>,
    pub aperture_diameter_m: Option<f64>,
}

impl TransducerOverrides {
    fn apply(&self, mut spec: TransducerSpec) -> TransducerSpec {
        if let Some(v) = self.center_frequency_hz {
            spec.center_frequency_hz = v;
        }
        if let Some(v) = self.fractional_bandwidth {
            spec.fractional_bandwidth = v;
        }
        if let Some(v) = self.focal_depth_m {
            spec.focal_depth_m = v;
        }
        if let Some(v) = self.aperture_diameter_m {
            spec.aperture_diameter_m = v;
        }
        spec
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryOverrides {
    pub roi_span_deg: Option<f64>,
    pub rf_sample_rate_hz: Option<f64>,
    pub depth_m: Option<f64>,
    pub window_start_m: Option<f64>,
    pub rotation_speed_rpm: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MediumOverrides {
    pub sound_speed_m_s: Option<f64>,
    pub attenuation_db_cm_mhz: Option<f64>,
}

impl MediumOverrides {
    fn apply(&self, mut medium: Medium) -> Medium {
        if let Some(v) = self.sound_speed_m_s {
            medium.sound_speed_m_s = v;
        }
        if let Some(v) = self.attenuation_db_cm_mhz {
            medium.attenuation_db_cm_mhz = v;
        }
        medium
    }
}

/// Settings of one simulation run, read from TOML. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub id: String,
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    pub noise_sigma: f64,
    pub dynamic_range_db: f64,
    pub phantom: PhantomConfig,
    pub medium: MediumOverrides,
    pub geometry: GeometryOverrides,
    pub low: TransducerOverrides,
    pub high: TransducerOverrides,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            id: "sim".to_string(),
            out_dir: PathBuf::from("."),
            noise_sigma: DEFAULT_NOISE_SIGMA,
            dynamic_range_db: DEFAULT_DYNAMIC_RANGE_DB,
            phantom: PhantomConfig::default(),
            medium: MediumOverrides::default(),
            geometry: GeometryOverrides::default(),
            low: TransducerOverrides::default(),
            high: TransducerOverrides::default(),
        }
    }
}

/// Everything a simulation needs, validated.
pub struct Resolved {
    pub phantom: PhantomDef,
    pub geometry: ProbeGeometry,
    pub low: TransducerSpec,
    pub high: TransducerSpec,
    pub regions: Option<RegionSet>,
    pub scan_seed: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Data(e.to_string()))
    }

    pub fn resolve(&self) -> CliResult<Resolved> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(CliError::Config(format!(
                "`noise_sigma`: {} must be non-negative",
                self.noise_sigma
            )));
        }
        if !(self.dynamic_range_db > 0.0 && self.dynamic_range_db.is_finite()) {
            return Err(CliError::Config(format!(
                "`dynamic_range_db`: {} must be positive",
                self.dynamic_range_db
            )));
        }
        if self.id.is_empty()
            || !self
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(CliError::Config(format!(
                "`id`: {:?} must be non-empty ASCII letters, digits, '-' or '_'",
                self.id
            )));
        }
        let low = self.low.apply(TransducerSpec::low_frequency());
        low.validate().map_err(|e| CliError::field("low", e))?;
        let high = self.high.apply(TransducerSpec::high_frequency());
        high.validate().map_err(|e| CliError::field("high", e))?;

        let phantom_seed = substream_seed(self.seed, "phantom");
        let phantom = self.build_phantom(phantom_seed)?;
        phantom.medium.validate().map_err(|e| CliError::field("medium", e))?;
        phantom.validate().map_err(|e| CliError::field("phantom", e))?;

        let c = phantom.medium.sound_speed_m_s;
        let g = &self.geometry;
        let mut geometry = ProbeGeometry::default();
        geometry.roi_span_deg = g.roi_span_deg.unwrap_or(geometry.roi_span_deg);
        geometry.rf_sample_rate_hz = g.rf_sample_rate_hz.unwrap_or(geometry.rf_sample_rate_hz);
        geometry.depth_m = g.depth_m.unwrap_or(geometry.depth_m);
        geometry.window_start_m = g.window_start_m.unwrap_or(geometry.window_start_m);
        geometry.rotation_speed_rpm = g.rotation_speed_rpm.unwrap_or(geometry.rotation_speed_rpm);
        geometry.validate().map_err(|e| CliError::field("geometry", e))?;
        geometry.rf_samples_per_line = samples_for_depth(geometry.depth_m, c, geometry.rf_sample_rate_hz);
        for (name, spec) in [("low", &low), ("high", &high)] {
            spec.check_sample_rate(geometry.rf_sample_rate_hz)
                .map_err(|e| CliError::Config(format!("`geometry.rf_sample_rate_hz`: {e} for `{name}`")))?;
        }

        let mapper = PixelMapper::new(&geometry, c, DATASET_COLUMNS, DATASET_ROWS);
        let regions = match self.phantom.kind {
            PhantomKind::Wire => Some(wire_regions(
                &mapper,
                &self.phantom.wire_depths_m,
                WIRE_BOX_HALF_LATERAL_M,
            )),
            PhantomKind::Contrast => Some(contrast_regions(&mapper, &ContrastLayout::default())),
            PhantomKind::Tissue => {
                let center = Position::new(0.0, geometry.window_start_m + geometry.depth_m / 2.0);
                let speckle = mapper.rect_around(RegionKind::Speckle, center, 2.5e-3, 1e-3);
                Some(RegionSet::new(mapper.width, mapper.height, vec![speckle]))
            }
            PhantomKind::File => None,
        };
        Ok(Resolved {
            phantom,
            geometry,
            low,
            high,
            regions,
            scan_seed: substream_seed(self.seed, "scan"),
        })
    }

    fn build_phantom(&self, seed: u64) -> CliResult<PhantomDef> {
        let p = &self.phantom;
        let needs_density = matches!(p.kind, PhantomKind::Tissue | PhantomKind::Contrast);
        if needs_density && !(p.density > 0.0 && p.density.is_finite()) {
            return Err(CliError::Config(format!(
                "`phantom.density`: {} must be positive",
                p.density
            )));
        }
        let phantom = match p.kind {
            PhantomKind::Wire => {
                let mut phantom = make_wire_phantom(&p.wire_depths_m)
                    .map_err(|e| CliError::Config(format!("`phantom.wire_depths_m`: {e}")))?;
                phantom.medium = self.medium.apply(phantom.medium);
                phantom
            }
            PhantomKind::Tissue | PhantomKind::Contrast => {
                let mut builder = TissuePhantomBuilder::new(p.density, seed);
                builder.medium = self.medium.apply(builder.medium);
                if p.kind == PhantomKind::Contrast {
                    ContrastLayout::default().apply(&mut builder);
                }
                builder.build().map_err(|e| CliError::field("phantom", e))?
            }
            PhantomKind::File => {
                let path = p.path.as_ref().ok_or_else(|| {
                    CliError::Config("`phantom.path`: required when `phantom.kind` is \"file\"".into())
                })?;
                let mut phantom = PhantomDef::read(path).map_err(|e| CliError::Data(e.to_string()))?;
                phantom.medium = self.medium.apply(phantom.medium);
                phantom
            }
        };
        log::info!("{} phantom with {} targets", p.kind.as_str(), phantom.target_count());
        Ok(phantom)
    }

    pub fn phantom_kind(&self) -> &'static str {
        self.phantom.kind.as_str()
    }
}
