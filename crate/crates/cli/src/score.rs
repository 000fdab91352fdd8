use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use eustwin::imaging::{read_pgm, BModeImage, ImageMeta};
use eustwin::metrics::{cnr, score_pair, ssnr, Gray, PsnrPeak, RegionStats, ScoreReport, SsimParams, SsimWindow};
use eustwin::phantom::{region_pixels, RegionKind};
use eustwin::report::RegionSet;

use crate::error::{CliError, CliResult};
use crate::ScoreArgs;

pub const SCORE_FORMAT: &str = "eustwin-score";
pub const SCORE_VERSION: u32 = 1;

/// PGM files of `dir` keyed for matching. With a tag only `*_{tag}.pgm`
/// files take part and the key drops the tag.
fn keyed_images(dir: &Path, tag: Option<&str>) -> CliResult<BTreeMap<String, String>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(stem) = name.strip_suffix(".pgm") else {
            continue;
        };
        let key = match tag {
            Some(t) => match stem.strip_suffix(&format!("_{t}")) {
                Some(k) => k.to_string(),
                None => continue,
            },
            None => stem.to_string(),
        };
        out.insert(key, name);
    }
    Ok(out)
}

fn unmatched(a: &BTreeMap<String, String>, b: &BTreeMap<String, String>) -> Vec<String> {
    a.iter()
        .filter(|(k, _)| !b.contains_key(*k))
        .map(|(_, v)| v.clone())
        .collect()
}

fn parse_window(text: &str) -> CliResult<SsimWindow> {
    if text == "global" {
        return Ok(SsimWindow::Global);
    }
    text.parse::<usize>()
        .map(SsimWindow::Uniform)
        .map_err(|_| CliError::Config(format!("`ssim_window`: expected `global` or an odd size, got {text:?}")))
}

#[derive(Debug, Serialize)]
struct RegionRecord {
    name: String,
    generated_cnr: Option<f64>,
    generated_ssnr: Option<f64>,
    reference_cnr: Option<f64>,
    reference_ssnr: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ScoreOutput {
    format: &'static str,
    version: u32,
    label: String,
    seed: Option<u64>,
    psnr_peak: PsnrPeak,
    ssim: SsimParams,
    #[serde(flatten)]
    report: ScoreReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    regions: Vec<RegionRecord>,
}

fn region_metrics(
    pixels: &[f64],
    width: usize,
    height: usize,
    regions: &RegionSet,
) -> CliResult<(Option<f64>, Option<f64>)> {
    let image = BModeImage {
        width,
        height,
        pixels: pixels.to_vec(),
        meta: ImageMeta {
            transducer_id: String::new(),
            dynamic_range_db: 0.0,
            ceiling: 255.0,
            depth_m: 0.0,
            window_start_m: 0.0,
            roi_span_deg: 0.0,
            seed: None,
        },
    };
    let stats = |kind| -> CliResult<Option<RegionStats>> {
        match regions.first(kind) {
            Some(r) => Ok(Some(RegionStats::from_samples(&region_pixels(&image, r)?)?)),
            None => Ok(None),
        }
    };
    let c = match (stats(RegionKind::Homogeneous)?, stats(RegionKind::Background)?) {
        (Some(h), Some(b)) => Some(cnr(&h, &b)?),
        _ => None,
    };
    let s = match stats(RegionKind::Speckle)? {
        Some(st) => Some(ssnr(&st)?),
        None => None,
    };
    Ok((c, s))
}

pub fn score(args: ScoreArgs) -> CliResult<()> {
    let ssim =
        SsimParams::new(args.ceiling, parse_window(&args.ssim_window)?).map_err(|e| CliError::field("ssim", e))?;
    let peak = if args.observed_max {
        PsnrPeak::ObservedMax
    } else {
        PsnrPeak::Ceiling(args.ceiling)
    };
    let generated = keyed_images(&args.generated, args.gen_tag.as_deref())?;
    let reference = keyed_images(&args.reference, args.ref_tag.as_deref())?;
    let mut missing = unmatched(&generated, &reference);
    missing.extend(unmatched(&reference, &generated));
    if !missing.is_empty() {
        return Err(CliError::Data(format!(
            "unmatched files ({} generated vs {} reference): {}",
            generated.len(),
            reference.len(),
            missing.join(", ")
        )));
    }
    if generated.is_empty() {
        return Err(CliError::Data("no images to score".into()));
    }
    let regions = match &args.regions {
        Some(path) => Some(RegionSet::read(path)?),
        None => None,
    };

    let mut pairs = Vec::with_capacity(generated.len());
    let mut region_records = Vec::new();
    for (key, gen_name) in &generated {
        let ref_name = &reference[key];
        let (gw, gh, g) = read_pgm(&args.generated.join(gen_name))?;
        let (rw, rh, r) = read_pgm(&args.reference.join(ref_name))?;
        let g: Vec<f64> = g.into_iter().map(f64::from).collect();
        let r: Vec<f64> = r.into_iter().map(f64::from).collect();
        let gx = Gray::new(&g, gw, gh)?;
        let gy = Gray::new(&r, rw, rh)?;
        pairs.push(score_pair(key, &gx, &gy, &ssim, peak)?);
        if let Some(set) = &regions {
            let (generated_cnr, generated_ssnr) = region_metrics(&g, gw, gh, set)?;
            let (reference_cnr, reference_ssnr) = region_metrics(&r, rw, rh, set)?;
            region_records.push(RegionRecord {
                name: key.clone(),
                generated_cnr,
                generated_ssnr,
                reference_cnr,
                reference_ssnr,
            });
        }
    }
    let label = args.label.clone().unwrap_or_else(|| match args.gen_tag.as_deref() {
        Some("low") => "identity baseline".to_string(),
        _ => "generated".to_string(),
    });
    let output = ScoreOutput {
        format: SCORE_FORMAT,
        version: SCORE_VERSION,
        label,
        seed: args.seed,
        psnr_peak: peak,
        ssim,
        report: ScoreReport::from_pairs(pairs),
        regions: region_records,
    };
    let text = serde_json::to_string_pretty(&output).map_err(|e| CliError::Data(e.to_string()))?;
    if let Some(path) = &args.out {
        fs::write(path, &text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    crate::commands::print_text(&text);
    Ok(())
}
