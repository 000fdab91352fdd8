//! Simulation and dataset toolkit for a rotational dual-frequency endoscopic
//! ultrasound probe: pulse and beam models, virtual phantoms, paired RF
//! synthesis, B-mode formation, image-quality metrics and the patch dataset
//! protocol.

// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acoustics;
pub mod dataset;
pub mod error;
pub mod imaging;
pub mod metrics;
pub mod phantom;
pub mod report;
pub mod rng;
pub mod scanner;

pub use acoustics::{Medium, Mount, PulseWaveform, TransducerSpec};
pub use dataset::{Blend, FoldAssignment, FrequencyTag, Manifest, Patch, PatchGrid, PatchSet};
pub use error::{Error, Result};
pub use imaging::{BModeImage, ImageMeta, ImagePair};
pub use metrics::{Psnr, PsnrPeak, RegionStats, SsimParams, SsimWindow};
pub use phantom::{PhantomDef, Position, RegionKind, RegionSpec};
pub use report::{MetricsReport, RegionSet};
pub use scanner::{PairedRFFrame, ProbeGeometry, RFFrame};
