use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use salprop::crf::{hamming_accuracy, load_model, save_model, train_bcfw_with, BinaryMask, CrfModel};
use salprop::evalkit::{evaluate, load_annotations_dir, load_proposals_dir, read_report_csv, write_curves_csv, write_report_csv};
use salprop::imagio::load_image;
use salprop::pipeline::{generate_proposals, training_sample};
use salprop::proposals::write_proposals_csv;
use salprop::registry::{decoder, edge_source, DecoderParams, EdgeParams};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::{CurvesArgs, DetectArgs, EvalArgs, TrainArgs};

/// Writes through a sibling temporary file and renames it into place.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let ctx = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(ctx)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w).map_err(ctx)?;
        w.flush().map_err(ctx)?;
    }
    tmp.persist(path).map_err(|e| ctx(e.error))?;
    Ok(())
}

fn is_image(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    files.sort();
    Ok(files)
}

struct DetectJob {
    image: PathBuf,
    edges: Option<PathBuf>,
    out: PathBuf,
}

pub fn detect(args: &DetectArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let model = load_model(&args.model).map_err(|e| CliError::from(e).context(args.model.display()))?;
    let dec = decoder(&cfg.decoder, &DecoderParams::default())?;
    let jobs = if args.image.is_dir() {
        if let Some(e) = &args.edges {
            if !e.is_dir() {
                return Err(CliError::Usage("--edges must be a directory when --image is".into()));
            }
        }
        std::fs::create_dir_all(&args.out).map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
        image_files(&args.image)?
            .into_iter()
            .map(|image| {
                let s = stem(&image);
                DetectJob {
                    edges: args.edges.as_ref().map(|d| d.join(format!("{s}.emap"))),
                    out: args.out.join(format!("{s}.csv")),
                    image,
                }
            })
            .collect()
    } else {
        vec![DetectJob {
            image: args.image.clone(),
            edges: args.edges.clone(),
            out: args.out.clone(),
        }]
    };
    let pipeline = cfg.pipeline();
    jobs.par_iter()
        .map(|job| -> Result<(), CliError> {
            let img = load_image(&job.image).map_err(|e| CliError::from(e).context(job.image.display()))?;
            let params = EdgeParams {
                sigma: 1.0,
                path: job.edges.clone(),
            };
            let source = edge_source(if job.edges.is_some() { "emap" } else { "builtin" }, &params)?;
            let set = generate_proposals(&img, source.as_ref(), &model, dec.as_ref(), &pipeline)
                .map_err(|e| CliError::from(e).context(job.image.display()))?;
            let header = vec![
                format!(
                    "salprop detect image={} model={} edges={}",
                    job.image.display(),
                    args.model.display(),
                    job.edges.as_ref().map_or("builtin".to_string(), |p| p.display().to_string())
                ),
                cfg.echo(),
            ];
            write_atomic(&job.out, |w| write_proposals_csv(w, &set, &header))
        })
        .collect::<Result<Vec<()>, CliError>>()?;
    Ok(())
}

pub fn train(args: &TrainArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let masks: BTreeMap<String, PathBuf> = image_files(&args.masks)?.into_iter().map(|p| (stem(&p), p)).collect();
    let mut pairs = Vec::new();
    for img in image_files(&args.images)? {
        match masks.get(&stem(&img)) {
            Some(m) => pairs.push((img, m.clone())),
            None => eprintln!("warning: no mask for {}, skipped", img.display()),
        }
    }
    if pairs.is_empty() {
        return Err(CliError::Data(format!(
            "no image/mask pairs in {} and {}",
            args.images.display(),
            args.masks.display()
        )));
    }
    let pipeline = cfg.pipeline();
    let source = edge_source("builtin", &EdgeParams { sigma: 1.0, path: None })?;
    let samples: Vec<_> = pairs
        .par_iter()
        .map(|(img_path, mask_path)| {
            let img = load_image(img_path).map_err(|e| CliError::from(e).context(img_path.display()))?;
            let mask = BinaryMask::load(mask_path).map_err(|e| CliError::from(e).context(mask_path.display()))?;
            training_sample(&img, &mask, source.as_ref(), &pipeline).map_err(|e| CliError::from(e).context(img_path.display()))
        })
        .collect::<Result<Vec<_>, CliError>>()?
        .into_iter()
        .flatten()
        .collect();
    let dec = decoder(&cfg.decoder, &DecoderParams::default())?;
    let report = train_bcfw_with(&samples, &cfg.bcfw(), dec.as_ref())?;
    let acc = hamming_accuracy(&samples, &report.model, dec.as_ref())?;
    write_model(&args.model_out, &report.model)?;
    println!(
        "trained on {} graphs in {} passes (converged: {})",
        samples.len(),
        report.passes,
        report.converged
    );
    println!("final duality gap: {:.6e}", report.final_gap());
    println!("training hamming accuracy: {acc:.4}");
    Ok(())
}

fn write_model(path: &Path, model: &CrfModel) -> Result<(), CliError> {
    // serialize through the library writer, then move into place
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::Builder::new()
        .prefix(".model")
        .tempfile_in(dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    save_model(model, tmp.path())?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let ious = args.iou.clone().unwrap_or_else(|| vec![0.5, 0.7]);
    if ious.is_empty() || ious.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(CliError::Usage("--iou values must lie in (0, 1]".into()));
    }
    let max_n = args.max_n.unwrap_or(1000);
    if max_n == 0 {
        return Err(CliError::Usage("--max-n must be at least 1".into()));
    }
    let props = load_proposals_dir(&args.proposals)?;
    let ann = load_annotations_dir(&args.annotations)?;
    let report = evaluate(&props, &ann, &ious, max_n)?;
    let header = vec![format!(
        "salprop eval proposals={} annotations={} iou={} max_n={max_n}",
        args.proposals.display(),
        args.annotations.display(),
        ious.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
    )];
    write_atomic(&args.out, |w| write_report_csv(w, &report, &header))
}

pub fn curves(args: &CurvesArgs) -> Result<(), CliError> {
    let file = std::fs::File::open(&args.report).map_err(|e| CliError::Io(format!("{}: {e}", args.report.display())))?;
    let report = read_report_csv(std::io::BufReader::new(file)).map_err(|e| CliError::from(e).context(args.report.display()))?;
    let header = vec![format!("salprop curves report={}", args.report.display())];
    write_atomic(&args.out, |w| write_curves_csv(w, &report, &header))
}
