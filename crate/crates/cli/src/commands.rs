use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use idss_core::baselines::{ndwi as ndwi_index, threshold_classify};
use idss_core::eval::report;
use idss_core::explain::{explain_pixel, generate_rules, render_rule_text};
use idss_core::features::{extract_features, FeatureKind, FeatureSpace};
use idss_core::kmeans::{KMeansConfig, KMeansInit};
use idss_core::model::{default_class_names, load_model, save_model, train as train_model, IdssModel, ModelConfig, TrainingImage};
use idss_core::raster::{read_band_stack, read_label_mask, sibling, write_band_stack, write_label_mask, write_mask_png, BandStack, Class, LabelMask};
use serde::Deserialize;

use crate::{EvaluateArgs, ExplainArgs, FeatureArg, NdwiArgs, PredictArgs, RulesArgs, RulesFormat, TrainArgs};

/// Bad flags, config values or paths. Maps to exit code 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

/// 2 for usage and configuration problems, 3 for everything data-related.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<idss_core::Error>() {
            if matches!(e, idss_core::Error::Config(_) | idss_core::Error::MissingLatent) {
                return 2;
            }
        }
    }
    3
}

fn check_output(path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return usage(format!("output directory {} does not exist", parent.display()));
    }
    Ok(())
}

fn check_input(path: &Path) -> Result<()> {
    if !path.is_file() {
        return usage(format!("input file {} does not exist", path.display()));
    }
    Ok(())
}

fn read_stack(path: &Path) -> Result<BandStack> {
    read_band_stack(path).with_context(|| format!("reading stack {}", path.display()))
}

fn read_model(path: &Path) -> Result<IdssModel> {
    load_model(path).with_context(|| format!("loading model {}", path.display()))
}

fn read_latent(model: &IdssModel, latent: Option<&Path>) -> Result<Option<BandStack>> {
    if model.config.feature.kind == FeatureKind::Latent && latent.is_none() {
        return usage("this model decides in latent space; pass --latent-features");
    }
    latent.map(read_stack).transpose()
}

/// Training parameters as they may appear in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    m: Option<usize>,
    k: Option<usize>,
    feature: Option<FeatureArg>,
    latent_dir: Option<PathBuf>,
    normalize: Option<bool>,
    batch_size: Option<usize>,
    iters: Option<usize>,
    seed: Option<u64>,
    init: Option<KMeansInit>,
}

pub fn train(args: TrainArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Usage(format!("reading config {}: {e}", path.display())))?;
            serde_json::from_str::<TrainFile>(&text).map_err(|e| Usage(format!("config {}: {e}", path.display())))?
        }
        None => TrainFile::default(),
    };
    let defaults = ModelConfig::default();
    let feature = args.feature.or(file.feature).unwrap_or(FeatureArg::Raw);
    let normalize = !args.no_normalize && file.normalize.unwrap_or(true);
    let latent_dir = args.latent_dir.or(file.latent_dir);
    let kmeans = KMeansConfig {
        m: args.m.or(file.m).unwrap_or(defaults.m_per_class),
        batch_size: args.batch_size.or(file.batch_size).unwrap_or(defaults.kmeans.batch_size),
        max_iterations: args.iters.or(file.iters).unwrap_or(defaults.kmeans.max_iterations),
        seed: args.seed.or(file.seed).unwrap_or(defaults.kmeans.seed),
        init: file.init.unwrap_or(defaults.kmeans.init),
    };
    let k = args.k.or(file.k).unwrap_or(defaults.k_neighbors);

    if !args.inputs.is_dir() {
        return usage(format!("input directory {} does not exist", args.inputs.display()));
    }
    check_output(&args.out)?;
    match (feature, &latent_dir) {
        (FeatureArg::Latent, None) => return usage("--feature latent needs --latent-dir"),
        (FeatureArg::Latent, Some(dir)) if !dir.is_dir() => {
            return usage(format!("latent directory {} does not exist", dir.display()))
        }
        _ => {}
    }

    let mut stacks: Vec<PathBuf> = fs::read_dir(&args.inputs)
        .with_context(|| format!("listing {}", args.inputs.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bst"))
        .collect();
    stacks.sort();
    if stacks.is_empty() {
        bail!("no .bst stacks in {}", args.inputs.display());
    }
    for path in &stacks {
        let lbl = sibling(path, "lbl");
        if !lbl.is_file() {
            bail!("missing label file {}", lbl.display());
        }
    }

    let mut images = Vec::with_capacity(stacks.len());
    for path in &stacks {
        let stack = read_stack(path)?;
        let lbl = sibling(path, "lbl");
        let labels = read_label_mask(&lbl, stack.height(), stack.width())
            .with_context(|| format!("reading labels {}", lbl.display()))?;
        let latent = match (feature, &latent_dir) {
            (FeatureArg::Latent, Some(dir)) => {
                let lp = dir.join(path.file_name().expect("listed files have names"));
                if !lp.is_file() {
                    bail!("missing latent file {}", lp.display());
                }
                Some(read_stack(&lp)?)
            }
            _ => None,
        };
        images.push(TrainingImage { stack, labels, latent });
    }

    let space = match feature {
        FeatureArg::Raw => FeatureSpace::raw(images[0].stack.bands()),
        FeatureArg::Latent => FeatureSpace::latent(images[0].latent.as_ref().map_or(0, BandStack::bands)),
    }
    .with_normalize(normalize);
    let config = ModelConfig {
        m_per_class: kmeans.m,
        k_neighbors: k,
        feature: space,
        kmeans,
    };
    println!(
        "idss train: seed {} m {} k {} feature {:?}({}{}) batch_size {} iters {}",
        config.kmeans.seed,
        config.m_per_class,
        config.k_neighbors,
        config.feature.kind,
        config.feature.dimension,
        if config.feature.normalize { ", normalized" } else { "" },
        config.kmeans.batch_size,
        config.kmeans.max_iterations,
    );
    println!("training images: {}", images.len());

    let model = train_model(&images, &config).context("training failed")?;
    for (class, n) in model.prototypes_per_class() {
        println!("{:<6} {n} prototypes", model.class_name(class));
    }
    println!("parameter_count {}", model.parameter_count());
    save_model(&model, &args.out).with_context(|| format!("writing model {}", args.out.display()))?;
    println!("model written to {}", args.out.display());
    Ok(())
}

fn print_mask_summary(mask: &LabelMask) {
    let counts: Vec<String> = [Class::Land, Class::Water, Class::Cloud, Class::Invalid]
        .iter()
        .map(|&c| format!("{} {}", c.name().to_lowercase(), mask.count(c)))
        .collect();
    println!("mask {}x{}: {}", mask.height(), mask.width(), counts.join(", "));
}

pub fn predict(args: PredictArgs) -> Result<()> {
    check_input(&args.model)?;
    check_input(&args.stack)?;
    if let Some(p) = &args.latent_features {
        check_input(p)?;
    }
    check_output(&args.out)?;
    if let Some(p) = &args.png {
        check_output(p)?;
    }
    if args.tile_size == 0 {
        return usage("--tile-size must be at least 1");
    }
    let model = read_model(&args.model)?;
    let latent = read_latent(&model, args.latent_features.as_deref())?;
    let stack = read_stack(&args.stack)?;
    let mask = model
        .predict_mask_tiled(&stack, latent.as_ref(), args.tile_size)
        .with_context(|| format!("predicting {}", args.stack.display()))?;
    write_label_mask(&mask, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(png) = &args.png {
        write_mask_png(&mask, png).with_context(|| format!("writing {}", png.display()))?;
    }
    print_mask_summary(&mask);
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    check_input(&args.pred)?;
    check_input(&args.truth)?;
    if let Some(p) = &args.json {
        check_output(p)?;
    }
    let (h, w) = match args.shape.as_deref() {
        Some([h, w]) => (*h, *w),
        _ => {
            let np = fs::metadata(&args.pred)?.len() as usize;
            let nt = fs::metadata(&args.truth)?.len() as usize;
            if np != nt {
                bail!(
                    "dimension mismatch: {} holds {np} pixels, {} holds {nt}",
                    args.pred.display(),
                    args.truth.display()
                );
            }
            (1, np)
        }
    };
    let pred = read_label_mask(&args.pred, h, w).with_context(|| format!("reading {}", args.pred.display()))?;
    let truth = read_label_mask(&args.truth, h, w).with_context(|| format!("reading {}", args.truth.display()))?;
    let rep = report(&pred, &truth, &default_class_names())?;
    print!("{}", rep.to_text());
    if let Some(p) = &args.json {
        fs::write(p, rep.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

pub fn rules(args: RulesArgs) -> Result<()> {
    check_input(&args.model)?;
    check_output(&args.out)?;
    let model = read_model(&args.model)?;
    let set = generate_rules(&model);
    let text = match args.format {
        RulesFormat::Text => set.to_text(args.precision),
        RulesFormat::Json => set.to_json(args.precision)?,
    };
    fs::write(&args.out, text).with_context(|| format!("writing {}", args.out.display()))?;
    for (class, rules) in &set.by_class {
        println!("{:<6} {} rules", model.class_name(*class), rules.len());
    }
    Ok(())
}

pub fn explain(args: ExplainArgs) -> Result<()> {
    check_input(&args.model)?;
    check_input(&args.stack)?;
    let model = read_model(&args.model)?;
    let latent = read_latent(&model, args.latent_features.as_deref())?;
    let stack = read_stack(&args.stack)?;
    let (row, col) = (args.pixel[0], args.pixel[1]);
    if row < 0 || col < 0 || row as usize >= stack.height() || col as usize >= stack.width() {
        return usage(format!(
            "pixel ({row}, {col}) is outside the {}x{} stack",
            stack.height(),
            stack.width()
        ));
    }
    let (row, col) = (row as usize, col as usize);
    let field = extract_features(&stack, &model.config.feature, latent.as_ref())?;
    let Some(f) = field.at(row, col) else {
        bail!("pixel ({row}, {col}) of {} is invalid", args.stack.display());
    };
    let set = generate_rules(&model);
    let ex = explain_pixel(f, &model, &set)?;

    println!("pixel ({row}, {col}): {}", model.class_name(ex.decision.label.id()));
    let votes: Vec<String> = ex
        .decision
        .votes
        .iter()
        .map(|(c, n)| format!("{} {n}", model.class_name(*c)))
        .collect();
    println!("votes: {}", votes.join(", "));
    println!("{:>4}  {:>9}  {:<6}  {:>10}  rule", "rank", "prototype", "class", "similarity");
    for (rank, e) in ex.entries.iter().enumerate() {
        println!(
            "{:>4}  {:>9}  {:<6}  {:>10.6}  {}",
            rank + 1,
            e.prototype_index,
            model.class_name(e.class_id),
            e.similarity,
            render_rule_text(e.rule, &model.class_names, args.precision)
        );
    }
    Ok(())
}

pub fn ndwi(args: NdwiArgs) -> Result<()> {
    check_input(&args.stack)?;
    for p in [&args.out, &args.index].into_iter().flatten() {
        check_output(p)?;
    }
    let stack = read_stack(&args.stack)?;
    let index = ndwi_index(&stack).with_context(|| format!("computing NDWI for {}", args.stack.display()))?;
    if let Some(p) = &args.index {
        write_band_stack(&index.to_band_stack(), p).with_context(|| format!("writing {}", p.display()))?;
    }
    if let (Some(out), Some(t)) = (&args.out, args.threshold) {
        let mask = threshold_classify(&index, t);
        write_label_mask(&mask, out).with_context(|| format!("writing {}", out.display()))?;
        println!("threshold {t}");
        print_mask_summary(&mask);
    }
    Ok(())
}
