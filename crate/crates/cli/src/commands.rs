use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use eustwin::dataset::{
    export_for_training, load_patch_set, patchify, reconstruct, split_folds, split_folds_stratified, Blend, ExportItem,
    FoldAssignment, FrequencyTag, PatchGrid,
};
use eustwin::imaging::{to_dataset_image, BModeImage, ImagePair};
use eustwin::report::{evaluate_pair, RegionSet};
use eustwin::scanner::{simulate_pair, PairedRFFrame, RFFrame};
use eustwin::Error;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::{EvaluateArgs, ExportArgs, GridArgs, PatchifyArgs, ReconstructArgs, SimulateArgs, SplitArgs};

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))
}

/// Prints to stdout. A closed pipe is not an error.
pub fn print_text(text: &str) {
    let _ = writeln!(io::stdout().lock(), "{text}");
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    print_text(&to_json(value)?);
    Ok(())
}

fn grid_for(args: &GridArgs, width: usize, height: usize) -> CliResult<PatchGrid> {
    let grid = PatchGrid {
        patch_size: args.patch_size,
        stride_w: args.stride_w,
        stride_h: args.stride_h,
        width,
        height,
    };
    grid.validate().map_err(|e| CliError::field("grid", e))?;
    Ok(grid)
}

fn read_image(path: &Path) -> CliResult<BModeImage> {
    if !path.exists() {
        return Err(CliError::Data(format!("{}: not found", path.display())));
    }
    Ok(BModeImage::read(path)?)
}

fn read_pair(dir: &Path, id: &str) -> CliResult<ImagePair> {
    let low = read_image(&dir.join(format!("{id}_low.pgm")))?;
    let high = read_image(&dir.join(format!("{id}_high.pgm")))?;
    ImagePair::new(low, high).map_err(|_| CliError::Data(Error::MisalignedPair(id.to_string()).to_string()))
}

#[derive(Serialize)]
struct SimulateSummary {
    id: String,
    seed: u64,
    phantom: &'static str,
    scatterers: usize,
    wires: usize,
    lines: usize,
    samples_per_line: usize,
    image_width: usize,
    image_height: usize,
    files: Vec<String>,
}

pub fn simulate(args: SimulateArgs) -> CliResult<()> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    args.apply(&mut config);
    let run = config.resolve()?;
    let pair = simulate_pair(
        &run.phantom,
        &run.geometry,
        &run.low,
        &run.high,
        config.noise_sigma,
        run.scan_seed,
    )?;
    let mut low = to_dataset_image(&pair.low, config.dynamic_range_db)?;
    let mut high = to_dataset_image(&pair.high, config.dynamic_range_db)?;
    low.meta.seed = Some(config.seed);
    high.meta.seed = Some(config.seed);

    let dir = &config.out_dir;
    let id = &config.id;
    create_dir(dir)?;
    let mut files = Vec::new();
    for (tag, frame, image) in [("low", &pair.low, &low), ("high", &pair.high, &high)] {
        let stem = format!("{id}_{tag}");
        image.write(dir, &stem)?;
        frame.write(&dir.join(format!("{stem}.rf")))?;
        files.extend([format!("{stem}.pgm"), format!("{stem}.json"), format!("{stem}.rf")]);
    }
    let phantom_file = format!("{id}_phantom.json");
    run.phantom.write(&dir.join(&phantom_file))?;
    files.push(phantom_file);
    if let Some(regions) = &run.regions {
        let name = format!("{id}_regions.json");
        regions.write(&dir.join(&name))?;
        files.push(name);
    }
    let run_file = format!("{id}_run.toml");
    write_text(&dir.join(&run_file), &config.to_toml()?)?;
    files.push(run_file);
    log::info!("wrote {} files to {}", files.len(), dir.display());

    print_json(&SimulateSummary {
        id: id.clone(),
        seed: config.seed,
        phantom: config.phantom_kind(),
        scatterers: run.phantom.scatterers.len(),
        wires: run.phantom.wires.len(),
        lines: pair.low.lines,
        samples_per_line: pair.low.samples_per_line,
        image_width: low.width,
        image_height: low.height,
        files,
    })
}

pub fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    let dir = &args.dir;
    let id = &args.id;
    let read_frame = |tag: &str| -> CliResult<RFFrame> {
        let path = dir.join(format!("{id}_{tag}.rf"));
        if !path.exists() {
            return Err(CliError::Data(format!("{}: not found", path.display())));
        }
        Ok(RFFrame::read(&path)?)
    };
    let low_frame = read_frame("low")?;
    let high_frame = read_frame("high")?;
    let images = read_pair(dir, id)?;
    let line_angles_deg = (0..low_frame.lines).map(|k| low_frame.line_angle_deg(k)).collect();
    let frames = PairedRFFrame {
        low: low_frame,
        high: high_frame,
        line_angles_deg,
    };
    if !frames.is_aligned() {
        return Err(CliError::Data(Error::MisalignedPair(id.clone()).to_string()));
    }
    let regions_path = args
        .regions
        .clone()
        .unwrap_or_else(|| dir.join(format!("{id}_regions.json")));
    if !regions_path.exists() {
        return Err(CliError::Data(format!("{}: not found", regions_path.display())));
    }
    let regions = RegionSet::read(&regions_path)?;
    let seed = args.seed.or(images.low.meta.seed);
    let report = evaluate_pair(&frames, &images.low, &images.high, &regions, seed)?;
    let out = args.out.unwrap_or_else(|| dir.join(format!("{id}_report.json")));
    write_text(&out, &report.to_json()?)?;
    log::info!("wrote {}", out.display());
    print_json(&report)
}

#[derive(Serialize)]
struct PatchifySummary {
    id: String,
    patches_per_frequency: usize,
    grid: PatchGrid,
    out_dir: PathBuf,
}

pub fn patchify_cmd(args: PatchifyArgs) -> CliResult<()> {
    let pair = read_pair(&args.dir, &args.id)?;
    let grid = grid_for(&args.grid, pair.low.width, pair.low.height)?;
    let set = patchify(&pair, &grid, &args.id)?;
    create_dir(&args.out)?;
    for patch in set.low.iter().chain(&set.high) {
        patch.write(&args.out)?;
    }
    print_json(&PatchifySummary {
        id: args.id,
        patches_per_frequency: set.low.len(),
        grid,
        out_dir: args.out,
    })
}

pub fn reconstruct_cmd(args: ReconstructArgs) -> CliResult<()> {
    let grid = grid_for(&args.grid, args.width, args.height)?;
    let patches = load_patch_set(&args.dir, &args.id, args.freq.into(), &grid)?;
    let blend = if args.feather { Blend::Feather } else { Blend::Mean };
    let mut image = reconstruct(&patches, &grid, blend)?;
    image.meta.transducer_id = FrequencyTag::from(args.freq).as_str().to_string();
    image.meta.seed = args.seed;
    create_dir(&args.out)?;
    let stem = format!("{}_{}", args.id, FrequencyTag::from(args.freq).as_str());
    image.write(&args.out, &stem)?;
    print_text(&args.out.join(format!("{stem}.pgm")).display().to_string());
    Ok(())
}

/// One label per non-empty line.
fn read_labels(path: &Path) -> CliResult<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn assign_folds(n: usize, k: usize, seed: u64, groups: Option<&[String]>) -> CliResult<FoldAssignment> {
    if n == 0 {
        return Ok(FoldAssignment::from_ids(k, Vec::new())?);
    }
    Ok(match groups {
        Some(g) => split_folds_stratified(g, k, seed)?,
        None => split_folds(n, k, seed)?,
    })
}

#[derive(Serialize)]
struct SplitOutput {
    #[serde(flatten)]
    folds: FoldAssignment,
    sizes: Vec<usize>,
}

pub fn split(args: SplitArgs) -> CliResult<()> {
    let groups = args.groups.as_deref().map(read_labels).transpose()?;
    let n = match (&groups, args.count) {
        (Some(g), None) => g.len(),
        (None, Some(n)) => n,
        (Some(g), Some(n)) if g.len() == n => n,
        (Some(g), Some(n)) => {
            return Err(CliError::Config(format!(
                "`count`: {n} does not match {} group labels",
                g.len()
            )));
        }
        (None, None) => return Err(CliError::Config("one of `--count` or `--groups` is required".into())),
    };
    let folds = assign_folds(n, args.k, args.seed, groups.as_deref())?;
    let output = SplitOutput {
        sizes: folds.sizes(),
        folds,
    };
    match &args.out {
        Some(path) => write_text(path, &to_json(&output)?),
        None => print_json(&output),
    }
}

/// Source ids of every `{id}_low.pgm` in `dir`, sorted. Each must have a
/// matching `{id}_high.pgm`.
fn discover_pairs(dir: &Path) -> CliResult<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let mut ids = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_suffix("_low.pgm") {
            if !dir.join(format!("{id}_high.pgm")).exists() {
                return Err(CliError::Data(format!("{name} has no matching {id}_high.pgm")));
            }
            ids.push(id.to_string());
        }
    }
    ids.sort();
    Ok(ids)
}

/// `source_id group` per line.
fn read_group_map(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for line in read_labels(path)? {
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(id), Some(group), None) => {
                map.insert(id.to_string(), group.to_string());
            }
            _ => {
                return Err(CliError::Data(format!(
                    "{}: expected `id group`, got {line:?}",
                    path.display()
                )))
            }
        }
    }
    Ok(map)
}

#[derive(Serialize)]
struct ExportSummary {
    pairs: usize,
    k: usize,
    fold_sizes: Vec<usize>,
    patches_per_pair: usize,
    root_seed: Option<u64>,
    out_dir: PathBuf,
}

pub fn export(args: ExportArgs) -> CliResult<()> {
    let ids = discover_pairs(&args.dir)?;
    let mut items = Vec::with_capacity(ids.len());
    for id in &ids {
        let pair = read_pair(&args.dir, id)?;
        let seed = pair.low.meta.seed;
        items.push(ExportItem {
            source_id: id.clone(),
            pair,
            seed,
        });
    }
    let groups = match &args.groups {
        Some(path) => {
            let map = read_group_map(path)?;
            let labels = ids
                .iter()
                .map(|id| {
                    map.get(id)
                        .cloned()
                        .ok_or_else(|| CliError::Data(format!("no group for `{id}`")))
                })
                .collect::<CliResult<Vec<_>>>()?;
            Some(labels)
        }
        None => None,
    };
    let folds = assign_folds(ids.len(), args.k, args.fold_seed, groups.as_deref())?;
    let (width, height) = items.first().map_or((436, 1000), |i| i.pair.low.dims());
    let grid = grid_for(&args.grid, width, height)?;
    let manifest = export_for_training(&items, &folds, &grid, &args.out, args.seed)?;
    log::info!("exported {} pairs to {}", manifest.pairs.len(), args.out.display());
    print_json(&ExportSummary {
        pairs: manifest.pairs.len(),
        k: manifest.k,
        fold_sizes: folds.sizes(),
        patches_per_pair: grid.origins().len(),
        root_seed: args.seed,
        out_dir: args.out,
    })
}
