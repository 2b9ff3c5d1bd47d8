use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use fixlab::descriptors::{
    dense_descriptors, load_descriptors, write_descriptors, DescriptorGridConfig, GrayImage,
    ImageDescriptors, LocalDescriptor,
};
use fixlab::gaze::{
    load_annotations, load_annotations_with_targets, load_fixation_log, write_annotations,
    write_fixation_log,
};
use fixlab::multimatch::{compare, MultiMatchConfig};
use fixlab::pool::{
    fit, run_experiments, write_table_csv, ClassificationImage, EvalReport, ExperimentConfig,
    Strategy, SvmConfig,
};
use fixlab::rqa::{analyze, RqaConfig};
use fixlab::sparse::{learn_dictionary, Dictionary, DictionaryMeta, Encoder, SparseCodingConfig};
use fixlab::stats::{
    classwise_in_box, dataset_stats, metric_samples, per_fixation_duration_curve, summarize,
    MetricSummary,
};
use fixlab::synth::{planted_benchmark, PlantedConfig};
use fixlab::{
    density_map, welch_t_test, Condition, Dataset, Fixation, ScanPath, ViewingGeometry,
    ANIMAL_CLASSES,
};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::output::{OutDir, Provenance, Report};
use crate::CliResult;

/// Fixation indices covered by the per-index duration curve in `stats.json`.
const DURATION_CURVE_LEN: usize = 10;

pub fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Ingest(a) => ingest(&a),
        Command::Stats(a) => stats(&a),
        Command::Density(a) => density(&a),
        Command::Multimatch(a) => multimatch(&a),
        Command::Rqa(a) => rqa(&a),
        Command::Descriptors(a) => descriptors(&a),
        Command::DictLearn(a) => dict_learn(&a),
        Command::Encode(a) => encode(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Report(a) => report(&a),
        Command::Synth(a) => synth(&a),
    }
}

fn setup<A: Serialize>(command: &'static str, common: &Common, args: &A) -> CliResult<(OutDir, Provenance)> {
    if let Some(jobs) = common.jobs {
        // a second call in one process (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    Ok((OutDir::create(&common.out)?, Provenance::new(command, common.seed, args)?))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or(String::new(), num)
}

/// Raw dataset restricted to the requested conditions.
fn load_gaze(g: &GazeInput) -> CliResult<Dataset<f64>> {
    let targets: BTreeSet<String> = match &g.targets {
        Some(list) => list
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect(),
        None => ANIMAL_CLASSES.iter().map(|s| s.to_string()).collect(),
    };
    let annotations = load_annotations_with_targets(&g.annotations, &targets)?;
    let wanted = g.condition.conditions();
    let scanpaths = load_fixation_log(&g.fixations)?
        .into_iter()
        .filter(|sp| wanted.contains(&sp.condition))
        .collect();
    Ok(Dataset::new(annotations, scanpaths)?)
}

fn geometry(g: &GeometryArgs) -> CliResult<ViewingGeometry<f64>> {
    let geom = ViewingGeometry {
        viewing_distance: g.viewing_distance_cm,
        screen_width_cm: g.screen_width_cm,
        screen_height_cm: g.screen_height_cm,
        resolution_x: g.resolution_x,
        resolution_y: g.resolution_y,
    };
    geom.validate()?;
    Ok(geom)
}

fn ingest(a: &IngestArgs) -> CliResult<()> {
    let (out, prov) = setup("ingest", &a.common, a)?;
    let raw = load_gaze(&a.gaze)?;
    let pre = raw.preprocessed()?;

    let mut buf = Vec::new();
    write_fixation_log(&raw.scanpaths, &mut buf)?;
    out.write("fixations.csv", &buf)?;
    let mut buf = Vec::new();
    write_annotations(raw.annotations.values(), &mut buf)?;
    out.write("annotations.jsonl", &buf)?;

    let mut per_condition = BTreeMap::new();
    for c in a.gaze.condition.conditions() {
        let paths: Vec<&ScanPath<f64>> = pre.scanpaths.iter().filter(|sp| sp.condition == c).collect();
        let raw_count: usize = raw
            .scanpaths
            .iter()
            .filter(|sp| sp.condition == c)
            .map(ScanPath::len)
            .sum();
        per_condition.insert(
            c,
            json!({
                "scanpaths": paths.len(),
                "raw_fixations": raw_count,
                "kept_fixations": paths.iter().map(|sp| sp.len()).sum::<usize>(),
                "excluded_scanpaths": paths.iter().filter(|sp| sp.is_excluded()).count(),
            }),
        );
    }
    let excluded: Vec<String> = pre
        .scanpaths
        .iter()
        .filter(|sp| sp.is_excluded())
        .map(ScanPath::label)
        .collect();
    out.write_json(
        "ingest.json",
        &Report {
            provenance: &prov,
            body: json!({
                "images": raw.annotations.len(),
                "per_condition": per_condition,
                "excluded": excluded,
            }),
        },
    )?;
    Ok(())
}

fn stats(a: &StatsArgs) -> CliResult<()> {
    let (out, prov) = setup("stats", &a.common, a)?;
    let pre = load_gaze(&a.gaze)?.preprocessed()?;
    let subset = a.subset.into();
    let summaries = summarize(&pre, a.k, subset)?;

    let mut rows = Vec::new();
    for metric in 0..4 {
        for s in &summaries {
            let (name, m) = s.metrics()[metric];
            rows.push(vec![
                name.to_string(),
                s.condition.to_string(),
                num(m.mean),
                num(m.std),
                m.n.to_string(),
            ]);
        }
    }
    out.write_csv("stats.csv", &prov, &["metric", "condition", "mean", "std", "n"], &rows)?;

    let mut path_rows = Vec::new();
    for (sp, st) in dataset_stats(&pre, a.k, subset)? {
        path_rows.push(vec![
            sp.image_id.clone(),
            sp.subject_id.clone(),
            sp.condition.to_string(),
            num(st.in_box_proportion),
            num(st.targets_fixated_proportion),
            opt_num(st.saccadic_latency),
            opt_num(st.per_target_fixation_duration),
        ]);
    }
    out.write_csv(
        "stats_paths.csv",
        &prov,
        &[
            "image_id",
            "subject_id",
            "condition",
            "in_box_proportion",
            "targets_fixated_proportion",
            "saccadic_latency",
            "per_target_fixation_duration",
        ],
        &path_rows,
    )?;

    let mut t_tests = BTreeMap::new();
    if a.gaze.condition == ConditionArg::Both {
        let names = ["in_box_proportion", "targets_fixated_proportion", "saccadic_latency", "per_target_fixation_duration"];
        for name in names {
            let samples = metric_samples(&pre, a.k, subset, name)?;
            let empty = Vec::new();
            let fv = samples.get(&Condition::FreeViewing).unwrap_or(&empty);
            let vs = samples.get(&Condition::VisualSearch).unwrap_or(&empty);
            let entry = match welch_t_test(fv, vs) {
                Ok(r) => serde_json::to_value(r)?,
                Err(e) => json!({ "error": e.to_string() }),
            };
            t_tests.insert(name, entry);
        }
    }

    let mut curves = BTreeMap::new();
    for c in a.gaze.condition.conditions() {
        let paths: Vec<&ScanPath<f64>> = pre
            .active_paths()
            .filter(|sp| sp.condition == c && subset.admits(pre.annotation(sp)))
            .collect();
        curves.insert(c, per_fixation_duration_curve(&paths, DURATION_CURVE_LEN));
    }

    out.write_json(
        "stats.json",
        &Report {
            provenance: &prov,
            body: json!({
                "k": a.k,
                "summaries": summaries,
                "t_tests": t_tests,
                "classwise_in_box": classwise_in_box(&pre, a.k)?,
                "duration_curves": curves,
            }),
        },
    )?;
    Ok(())
}

/// Union of every subject's preprocessed fixations per (image, condition).
fn pooled_fixations(pre: &Dataset<f64>) -> BTreeMap<(String, Condition), Vec<Fixation<f64>>> {
    let mut out: BTreeMap<(String, Condition), Vec<Fixation<f64>>> = BTreeMap::new();
    for sp in pre.active_paths() {
        out.entry((sp.image_id.clone(), sp.condition))
            .or_default()
            .extend(sp.fixations.iter().copied());
    }
    out
}

fn density(a: &DensityArgs) -> CliResult<()> {
    let (out, prov) = setup("density", &a.common, a)?;
    let pre = load_gaze(&a.gaze)?.preprocessed()?;
    let geom = geometry(&a.geometry)?;
    let groups: Vec<_> = pooled_fixations(&pre).into_iter().collect();

    let maps = groups
        .par_iter()
        .map(|((image_id, _), fix)| {
            density_map(fix, &pre.annotations[image_id], &geom, a.bandwidth_deg, a.duration_weighted)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut index = Vec::new();
    for (((image_id, condition), fix), map) in groups.iter().zip(&maps) {
        let stem = format!("density/{image_id}_{condition}");
        let mut buf = Vec::new();
        map.write_gmat(&mut buf)?;
        out.write(&format!("{stem}.gmat"), &buf)?;
        let mut buf = Vec::new();
        map.write_pgm16(&mut buf)?;
        out.write(&format!("{stem}.pgm"), &buf)?;
        index.push(json!({
            "image_id": image_id,
            "condition": condition,
            "fixations": fix.len(),
            "sigma_px": map.sigma_px,
            "mass": map.sum(),
            "gmat": format!("{stem}.gmat"),
            "pgm": format!("{stem}.pgm"),
        }));
    }
    out.write_json(
        "density.json",
        &Report {
            provenance: &prov,
            body: json!({
                "bandwidth_deg": a.bandwidth_deg,
                "duration_weighted": a.duration_weighted,
                "maps": index,
            }),
        },
    )?;
    Ok(())
}

fn multimatch(a: &MultiMatchArgs) -> CliResult<()> {
    let (out, prov) = setup("multimatch", &a.common, a)?;
    let pre = load_gaze(&a.gaze)?.preprocessed()?;
    let geom = geometry(&a.geometry)?;
    let mut cfg = MultiMatchConfig::for_screen(geom.resolution_x as f64, geom.resolution_y as f64);
    cfg.amplitude_threshold = a.amplitude_frac * cfg.screen_diagonal;
    cfg.direction_threshold = a.direction_threshold;
    cfg.simplification_enabled = !a.no_simplify;
    cfg.validate()?;

    let mut by_image: BTreeMap<&str, Vec<&ScanPath<f64>>> = BTreeMap::new();
    for sp in pre.active_paths() {
        by_image.entry(sp.image_id.as_str()).or_default().push(sp);
    }
    let mut pairs: Vec<(&ScanPath<f64>, &ScanPath<f64>, &'static str)> = Vec::new();
    for paths in by_image.values_mut() {
        paths.sort_by(|x, y| (&x.subject_id, x.condition).cmp(&(&y.subject_id, y.condition)));
        if matches!(a.pairing, PairingArg::Within | PairingArg::Both) {
            for c in a.gaze.condition.conditions() {
                let same: Vec<_> = paths.iter().filter(|sp| sp.condition == c).collect();
                for i in 0..same.len() {
                    for j in i + 1..same.len() {
                        let group = match c {
                            Condition::FreeViewing => "within-fv",
                            Condition::VisualSearch => "within-vs",
                        };
                        pairs.push((same[i], same[j], group));
                    }
                }
            }
        }
        if matches!(a.pairing, PairingArg::Across | PairingArg::Both) {
            for fv in paths.iter().filter(|sp| sp.condition == Condition::FreeViewing) {
                if let Some(vs) = paths
                    .iter()
                    .find(|sp| sp.condition == Condition::VisualSearch && sp.subject_id == fv.subject_id)
                {
                    pairs.push((fv, vs, "across"));
                }
            }
        }
    }

    let results: Vec<_> = pairs.par_iter().map(|(x, y, _)| compare(x, y, &cfg)).collect();
    let mut rows = Vec::new();
    let mut groups: BTreeMap<&str, Vec<[f64; 5]>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for ((x, y, group), r) in pairs.iter().zip(results) {
        match r {
            Ok(s) => {
                let v = s.as_array();
                let mut row = vec![
                    x.image_id.clone(),
                    x.subject_id.clone(),
                    y.subject_id.clone(),
                    x.condition.to_string(),
                    y.condition.to_string(),
                ];
                row.extend(v.iter().map(|&d| num(d)));
                rows.push(row);
                groups.entry(group).or_default().push(v);
            }
            Err(e) => skipped.push(json!({ "a": x.label(), "b": y.label(), "reason": e.to_string() })),
        }
    }
    let dims = ["shape", "length", "direction", "position", "duration"];
    let mut header = vec!["image_id", "subject_a", "subject_b", "condition_a", "condition_b"];
    header.extend(dims);
    out.write_csv("multimatch.csv", &prov, &header, &rows)?;

    let mut summary_rows = Vec::new();
    let mut summary = BTreeMap::new();
    for (group, scores) in &groups {
        let mut row = vec![group.to_string()];
        let mut per_dim = BTreeMap::new();
        for (k, dim) in dims.iter().enumerate() {
            let values: Vec<f64> = scores.iter().map(|s| s[k]).collect();
            let m = MetricSummary::of(&values);
            row.push(num(m.mean));
            row.push(num(m.std));
            per_dim.insert(*dim, m);
        }
        row.push(scores.len().to_string());
        summary_rows.push(row);
        summary.insert(*group, per_dim);
    }
    let mut header = vec!["group".to_string()];
    for d in dims {
        header.push(format!("{d}_mean"));
        header.push(format!("{d}_std"));
    }
    header.push("n".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv("multimatch_summary.csv", &prov, &header, &summary_rows)?;
    out.write_json(
        "multimatch.json",
        &Report {
            provenance: &prov,
            body: json!({
                "config": {
                    "amplitude_threshold_px": cfg.amplitude_threshold,
                    "direction_threshold_deg": cfg.direction_threshold,
                    "screen_diagonal_px": cfg.screen_diagonal,
                    "simplification": cfg.simplification_enabled,
                },
                "summary": summary,
                "skipped": skipped,
            }),
        },
    )?;
    Ok(())
}

fn rqa(a: &RqaArgs) -> CliResult<()> {
    let (out, prov) = setup("rqa", &a.common, a)?;
    let pre = load_gaze(&a.gaze)?.preprocessed()?;
    let radius = match a.radius_px {
        Some(r) => r,
        None => geometry(&a.geometry)?.degrees_to_pixels(2.0)?,
    };
    let cfg = RqaConfig::new(radius, a.min_line)?;
    let paths: Vec<&ScanPath<f64>> = pre.active_paths().collect();
    let measures = paths
        .par_iter()
        .map(|sp| analyze(sp, &cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let names = ["recurrence", "determinism", "laminarity", "crom"];
    let mut rows = Vec::new();
    let mut samples: BTreeMap<Condition, [Vec<f64>; 4]> = BTreeMap::new();
    for (sp, m) in paths.iter().zip(&measures) {
        let v = [m.recurrence, m.determinism, m.laminarity, m.crom];
        let mut row = vec![
            sp.image_id.clone(),
            sp.subject_id.clone(),
            sp.condition.to_string(),
            sp.len().to_string(),
        ];
        row.extend(v.iter().map(|&x| num(x)));
        rows.push(row);
        let slot = samples.entry(sp.condition).or_default();
        for k in 0..4 {
            slot[k].push(v[k]);
        }
    }
    let mut header = vec!["image_id", "subject_id", "condition", "n_fixations"];
    header.extend(names);
    out.write_csv("rqa.csv", &prov, &header, &rows)?;

    let mut summary_rows = Vec::new();
    let mut summary: BTreeMap<&str, BTreeMap<Condition, MetricSummary<f64>>> = BTreeMap::new();
    for (k, name) in names.iter().enumerate() {
        for (c, s) in &samples {
            let m = MetricSummary::of(&s[k]);
            summary_rows.push(vec![name.to_string(), c.to_string(), num(m.mean), num(m.std), m.n.to_string()]);
            summary.entry(name).or_default().insert(*c, m);
        }
    }
    out.write_csv(
        "rqa_summary.csv",
        &prov,
        &["measure", "condition", "mean", "std", "n"],
        &summary_rows,
    )?;

    let mut t_tests = BTreeMap::new();
    if let (Some(fv), Some(vs)) = (
        samples.get(&Condition::FreeViewing),
        samples.get(&Condition::VisualSearch),
    ) {
        for (k, name) in names.iter().enumerate() {
            let entry = match welch_t_test(&fv[k], &vs[k]) {
                Ok(r) => serde_json::to_value(r)?,
                Err(e) => json!({ "error": e.to_string() }),
            };
            t_tests.insert(*name, entry);
        }
    }
    out.write_json(
        "rqa.json",
        &Report {
            provenance: &prov,
            body: json!({
                "radius_px": radius,
                "min_line": a.min_line,
                "assumptions": "radius and minimum line length are analysis choices, not values from the source study",
                "summary": summary,
                "t_tests": t_tests,
            }),
        },
    )?;
    Ok(())
}

fn descriptors(a: &DescriptorArgs) -> CliResult<()> {
    let (out, prov) = setup("descriptors", &a.common, a)?;
    let cfg = DescriptorGridConfig {
        patch_size: a.patch_size,
        stride: a.stride,
        cells: a.cells,
        orientations: a.orientations,
    };
    cfg.validate()?;
    let mut files: Vec<_> = fs::read_dir(&a.images)
        .map_err(|e| format!("cannot read image directory {}: {e}", a.images.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| matches!(x.to_ascii_lowercase().as_str(), "pgm" | "ppm" | "pnm"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(format!("no .pgm/.ppm images in {}", a.images.display()).into());
    }
    let records = files
        .par_iter()
        .map(|p| -> CliResult<ImageDescriptors<f64>> {
            let id = p.file_stem().unwrap().to_string_lossy().into_owned();
            let img = GrayImage::<f64>::load(p)?;
            Ok((id, dense_descriptors(&img, &cfg)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut buf = Vec::new();
    write_descriptors(&records, cfg.dimension(), &mut buf)?;
    out.write("descriptors.gdsc", &buf)?;
    let counts: BTreeMap<&str, usize> = records.iter().map(|(id, d)| (id.as_str(), d.len())).collect();
    out.write_json(
        "descriptors.json",
        &Report {
            provenance: &prov,
            body: json!({ "dimension": cfg.dimension(), "images": counts }),
        },
    )?;
    Ok(())
}

fn coding_config(c: &CodingArgs, max_iters: usize, seed: u64) -> CliResult<SparseCodingConfig<f64>> {
    let cfg = SparseCodingConfig {
        lambda1: c.lambda1,
        max_outer_iters: max_iters,
        encode_tolerance: c.tolerance,
        seed,
        ..Default::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write_dictionary(
    out: &OutDir,
    prov: &Provenance,
    dict: &Dictionary<f64>,
    meta: &DictionaryMeta,
) -> CliResult<()> {
    let mut buf = Vec::new();
    dict.write_gdic(&mut buf)?;
    out.write("dictionary.gdic", &buf)?;
    out.write_json("dictionary.json", &Report { provenance: prov, body: meta })?;
    Ok(())
}

fn dict_learn(a: &DictLearnArgs) -> CliResult<()> {
    let (out, prov) = setup("dict-learn", &a.common, a)?;
    let cfg = coding_config(&a.coding, a.max_iters, a.common.seed)?;
    let (_, records) = load_descriptors::<f64>(&a.descriptors)?;
    let all: Vec<&[f64]> = records
        .iter()
        .flat_map(|(_, ds)| ds.iter().map(|d| d.vector.as_slice()))
        .collect();
    let picked: Vec<&[f64]> = if all.len() > a.samples {
        let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
        let mut idx = sample(&mut rng, all.len(), a.samples).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| all[i]).collect()
    } else {
        all
    };
    let learned = learn_dictionary(&picked, a.dict_size, &cfg)?;
    let meta = DictionaryMeta {
        lambda1: a.coding.lambda1,
        seed: a.common.seed,
        iterations: learned.iterations,
        codewords: learned.dictionary.codewords(),
        dimension: learned.dictionary.dimension(),
        training_samples: picked.len(),
        objective_history: learned.objective_history.clone(),
    };
    write_dictionary(&out, &prov, &learned.dictionary, &meta)
}

fn encode(a: &EncodeArgs) -> CliResult<()> {
    let (out, prov) = setup("encode", &a.common, a)?;
    let cfg = coding_config(&a.coding, 1, a.common.seed)?;
    let bytes = fs::read(&a.dictionary)
        .map_err(|e| format!("cannot read dictionary {}: {e}", a.dictionary.display()))?;
    let dict = Dictionary::<f64>::read_gdic(&bytes)?;
    let encoder = Encoder::new(&dict, &cfg)?;
    let (_, records) = load_descriptors::<f64>(&a.descriptors)?;
    let mut coded = Vec::with_capacity(records.len());
    let mut nonzero = 0usize;
    let mut total = 0usize;
    for (id, ds) in &records {
        let vectors: Vec<&[f64]> = ds.iter().map(|d| d.vector.as_slice()).collect();
        let codes = encoder.encode_all(&vectors)?;
        let mut out_ds = Vec::with_capacity(ds.len());
        for (d, c) in ds.iter().zip(codes) {
            nonzero += c.vector.iter().filter(|&&v| v != 0.0).count();
            total += 1;
            out_ds.push(LocalDescriptor {
                center_x: d.center_x,
                center_y: d.center_y,
                vector: c.vector,
            });
        }
        coded.push((id.clone(), out_ds));
    }
    let mut buf = Vec::new();
    write_descriptors(&coded, dict.codewords(), &mut buf)?;
    out.write("codes.gdsc", &buf)?;
    out.write_json(
        "codes.json",
        &Report {
            provenance: &prov,
            body: json!({
                "images": coded.len(),
                "codes": total,
                "codewords": dict.codewords(),
                "mean_nonzeros": if total == 0 { 0.0 } else { nonzero as f64 / total as f64 },
            }),
        },
    )?;
    Ok(())
}

/// Labelled images (objects of exactly one class) with their descriptors and
/// union of preprocessed fixations per condition. Returns the ids skipped for
/// lacking a single class.
fn classification_images(input: &ClassifyInput) -> CliResult<(Vec<ClassificationImage<f64>>, Vec<String>)> {
    let annotations = load_annotations::<f64>(&input.annotations)?;
    let mut fixations: BTreeMap<(String, Condition), Vec<Fixation<f64>>> = BTreeMap::new();
    if let Some(path) = &input.fixations {
        let wanted = input.condition.conditions();
        let scanpaths = load_fixation_log(path)?
            .into_iter()
            .filter(|sp| wanted.contains(&sp.condition))
            .collect();
        fixations = pooled_fixations(&Dataset::new(annotations.clone(), scanpaths)?.preprocessed()?);
    }
    let (_, records) = load_descriptors::<f64>(&input.descriptors)?;
    let mut images = Vec::new();
    let mut skipped = Vec::new();
    for (id, descriptors) in records {
        let ann = annotations
            .get(&id)
            .ok_or_else(|| format!("descriptor image {id} has no annotation"))?;
        let classes: BTreeSet<&str> = ann.objects.iter().map(|b| b.class_label.as_str()).collect();
        if classes.len() != 1 {
            skipped.push(id);
            continue;
        }
        let label = classes.into_iter().next().unwrap().to_string();
        let per_condition = Condition::ALL
            .into_iter()
            .filter_map(|c| fixations.get(&(id.clone(), c)).map(|f| (c, f.clone())))
            .collect();
        images.push(ClassificationImage {
            image_id: id,
            label,
            width: ann.width,
            height: ann.height,
            descriptors,
            fixations: per_condition,
        });
    }
    Ok((images, skipped))
}

fn experiment_config(input: &ClassifyInput, seed: u64) -> CliResult<ExperimentConfig<f64>> {
    let dictionary = match &input.dictionary {
        Some(p) => {
            let bytes = fs::read(p).map_err(|e| format!("cannot read dictionary {}: {e}", p.display()))?;
            Some(Dictionary::read_gdic(&bytes)?)
        }
        None => None,
    };
    Ok(ExperimentConfig {
        condition: match input.condition {
            ConditionArg::Fv => Some(Condition::FreeViewing),
            ConditionArg::Vs => Some(Condition::VisualSearch),
            ConditionArg::Both => None,
        },
        seed,
        window_px: input.window_px,
        window_scale: input.window_scale,
        dictionary_size: input.dict_size,
        dictionary_samples: input.dict_samples,
        coding: coding_config(&input.coding, input.max_iters, seed)?,
        svm: SvmConfig {
            c_reg: input.c_reg,
            epochs: input.epochs,
            seed,
        },
        fallback_pyramid: input.fallback_pyramid,
        dictionary,
        ..Default::default()
    })
}

fn require_fixations(input: &ClassifyInput, strategies: &[Strategy]) -> CliResult<()> {
    if input.fixations.is_none() && strategies.iter().any(|s| s.uses_fixations()) {
        return Err("fixation strategies need --fixations".into());
    }
    Ok(())
}

fn train(a: &TrainArgs) -> CliResult<()> {
    let (out, prov) = setup("train", &a.common, a)?;
    let strategy: Strategy = a.strategy.into();
    require_fixations(&a.input, &[strategy])?;
    let (images, skipped) = classification_images(&a.input)?;
    let cfg = ExperimentConfig {
        strategy,
        ..experiment_config(&a.input, a.common.seed)?
    };
    let (dict, model) = fit(&images, &cfg)?;

    let mut buf = Vec::new();
    model.write_gsvm(&mut buf)?;
    out.write("model.gsvm", &buf)?;
    if a.input.dictionary.is_none() {
        let meta = DictionaryMeta {
            lambda1: a.input.coding.lambda1,
            seed: a.common.seed,
            iterations: a.input.max_iters,
            codewords: dict.codewords(),
            dimension: dict.dimension(),
            training_samples: images.iter().map(|i| i.descriptors.len()).sum::<usize>().min(a.input.dict_samples),
            objective_history: Vec::new(),
        };
        write_dictionary(&out, &prov, &dict, &meta)?;
    }
    out.write_json(
        "model.json",
        &Report {
            provenance: &prov,
            body: json!({
                "class_labels": model.class_labels,
                "strategy": strategy,
                "condition": cfg.condition,
                "window_px": cfg.window_px * cfg.window_scale,
                "input_dimension": model.input_dimension(),
                "svm": model.training_config,
                "training_images": images.len(),
                "skipped_images": skipped,
            }),
        },
    )?;
    Ok(())
}

fn eval(a: &EvalArgs) -> CliResult<()> {
    let (out, prov) = setup("eval", &a.common, a)?;
    let strategies: Vec<Strategy> = match a.strategy {
        Some(s) => vec![s.into()],
        None => Strategy::ALL.to_vec(),
    };
    require_fixations(&a.input, &strategies)?;
    let (images, skipped) = classification_images(&a.input)?;
    let cfg = ExperimentConfig {
        repetitions: a.reps,
        train_fraction: a.train_fraction,
        ..experiment_config(&a.input, a.common.seed)?
    };
    // fixation strategies get one row per condition, as in the published table
    let mut variants = Vec::new();
    for s in strategies {
        if s.uses_fixations() {
            for c in a.input.condition.conditions() {
                variants.push((s, Some(c)));
            }
        } else {
            variants.push((s, None));
        }
    }
    let reports: Vec<EvalReport> = run_experiments(&images, &variants, &cfg)?;

    let mut buf = prov.comment().into_bytes();
    write_table_csv(&reports, &mut buf)?;
    out.write("eval.csv", &buf)?;
    out.write_json(
        "eval.json",
        &Report {
            provenance: &prov,
            body: json!({
                "fixation_source": "union of all subjects' preprocessed fixations per condition",
                "average_convention": "average_accuracy is the unweighted mean of per-class accuracies; pooled_accuracy counts all test images",
                "images": images.len(),
                "skipped_images": skipped,
                "reports": reports,
            }),
        },
    )?;
    Ok(())
}

/// Renders a CSV report (provenance comment first) as a Markdown table.
fn csv_to_markdown(text: &str) -> CliResult<String> {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut md = format!("| {} |\n|{}\n", header.join(" | "), " --- |".repeat(header.len()));
    for rec in reader.records() {
        let rec = rec?;
        md.push_str(&format!("| {} |\n", rec.iter().collect::<Vec<_>>().join(" | ")));
    }
    Ok(md)
}

fn t_test_lines(json_text: &str) -> CliResult<String> {
    let v: serde_json::Value = serde_json::from_str(json_text)?;
    let mut md = String::new();
    if let Some(tests) = v.get("t_tests").and_then(|t| t.as_object()) {
        for (name, r) in tests {
            match (r.get("t_statistic"), r.get("degrees_of_freedom"), r.get("p_value")) {
                (Some(t), Some(df), Some(p)) => md.push_str(&format!("- {name}: t = {t}, df = {df}, p = {p}\n")),
                _ => md.push_str(&format!("- {name}: {}\n", r.get("error").unwrap_or(r))),
            }
        }
    }
    Ok(md)
}

fn report(a: &ReportArgs) -> CliResult<()> {
    let (out, prov) = setup("report", &a.common, a)?;
    let read = |name: &str| fs::read_to_string(out.path(name)).ok();
    let mut md = format!(
        "# fixlab report\n\n{} {}, config {}\n",
        prov.tool, prov.version, prov.config_hash
    );
    let mut found = 0;
    let sections = [
        ("stats.csv", "Fixation statistics", Some("stats.json")),
        ("rqa_summary.csv", "Recurrence quantification", Some("rqa.json")),
        ("multimatch_summary.csv", "MultiMatch similarity", None),
        ("eval.csv", "Classification accuracy", None),
    ];
    for (csv_name, title, tests) in sections {
        let Some(text) = read(csv_name) else { continue };
        found += 1;
        md.push_str(&format!("\n## {title}\n\n"));
        if let Some(first) = text.lines().next().filter(|l| l.starts_with('#')) {
            md.push_str(&format!("Source: `{}`\n\n", first.trim_start_matches("# ")));
        }
        md.push_str(&csv_to_markdown(&text)?);
        if let Some(json_text) = tests.and_then(read) {
            let lines = t_test_lines(&json_text)?;
            if !lines.is_empty() {
                md.push_str("\nWelch t-tests, free viewing against visual search:\n\n");
                md.push_str(&lines);
            }
        }
    }
    if found == 0 {
        return Err(format!("no reports to summarize in {}", a.common.out.display()).into());
    }
    out.write("report.md", md.as_bytes())?;
    Ok(())
}

fn synth(a: &SynthArgs) -> CliResult<()> {
    let (out, prov) = setup("synth", &a.common, a)?;
    let cfg = PlantedConfig {
        classes: a.classes,
        images_per_class: a.images_per_class,
        dimension: a.dimension,
        clutter_rate: a.clutter_rate,
        seed: a.common.seed,
        ..Default::default()
    };
    if cfg.classes < 2 || cfg.images_per_class < 2 || !(0.0..=1.0).contains(&cfg.clutter_rate) {
        return Err("synth needs at least 2 classes, 2 images per class and a clutter rate in [0, 1]".into());
    }
    let bench = planted_benchmark::<f64>(&cfg)?;
    let mut buf = Vec::new();
    write_fixation_log(&bench.dataset.scanpaths, &mut buf)?;
    out.write("fixations.csv", &buf)?;
    let mut buf = Vec::new();
    write_annotations(bench.dataset.annotations.values(), &mut buf)?;
    out.write("annotations.jsonl", &buf)?;
    let records: Vec<ImageDescriptors<f64>> = bench
        .images
        .iter()
        .map(|img| (img.image_id.clone(), img.descriptors.clone()))
        .collect();
    let mut buf = Vec::new();
    write_descriptors(&records, cfg.dimension, &mut buf)?;
    out.write("descriptors.gdsc", &buf)?;
    out.write_json(
        "synth.json",
        &Report {
            provenance: &prov,
            body: json!({
                "classes": cfg.classes,
                "images_per_class": cfg.images_per_class,
                "width": cfg.width,
                "height": cfg.height,
                "dimension": cfg.dimension,
                "clutter_rate": cfg.clutter_rate,
            }),
        },
    )?;
    Ok(())
}
