use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use log::info;

use madiff_core::dataset::{load_image, load_manifest, save_image, write_corpus, DatasetManifest, Domain, COMPONENTS};
use madiff_core::denoiser::{load_model, save_model, train, DenoiserModel};
use madiff_core::evaluation::{domain_pairs, eval_removal, eval_transfer, sweep_k, Face};
use madiff_core::geometry::mask::load_mask;
use madiff_core::geometry::{component_specs, LandmarkSet};
use madiff_core::metrics::MetricReport;
use madiff_core::translator::{
    makeup_transfer, multi_makeup_transfer, translate, MultiTransferJob, TransferSource,
};
use madiff_core::Error;

use crate::config::RunConfig;
use crate::fail::{CliResult, Fail};
use crate::{Command, Common, Sampling, Task};

pub fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::GenData {
            out,
            n,
            seed,
            size,
            ratio,
        } => gen_data(&out, n, seed, size, ratio),
        Command::Train {
            data,
            out,
            iterations,
            loss_log,
            common,
        } => train_cmd(&data, &out, iterations, loss_log, &common),
        Command::Translate {
            model,
            input,
            from,
            to,
            mask,
            sampling,
            common,
            out,
        } => translate_cmd(&model, &input, &from, &to, mask.as_deref(), &sampling, &common, &out),
        Command::Transfer {
            model,
            source,
            reference,
            lm_source,
            lm_ref,
            source_masks,
            alpha_face,
            alpha_eyes,
            alpha_lips,
            alpha_brows,
            cam,
            sampling,
            common,
            out,
        } => {
            let mut cfg = resolve(&common)?;
            let a = &mut cfg.protocol.alphas;
            for (slot, v) in [
                (&mut a.face, alpha_face),
                (&mut a.eyes, alpha_eyes),
                (&mut a.lips, alpha_lips),
                (&mut a.eyebrows, alpha_brows),
            ] {
                if let Some(v) = v {
                    *slot = v;
                }
            }
            if let Some(c) = cam {
                cfg.protocol.transfer.cam = c.into();
            }
            apply_sampling(&mut cfg, &sampling);
            log_config(&cfg);
            let files = TransferFiles {
                source: &source,
                reference: &reference,
                lm_source: &lm_source,
                lm_ref: &lm_ref,
                mask_prefix: &source_masks,
            };
            transfer_cmd(&model, &files, &cfg, &out)
        }
        Command::MultiTransfer { spec, model, seed, out } => multi_transfer_cmd(&spec, &model, seed, &out),
        Command::Eval {
            task,
            manifest,
            model,
            report,
            pairs,
            common,
        } => eval_cmd(task, &manifest, &model, &report, pairs, &common),
        Command::SweepK {
            model,
            manifest,
            k_list,
            report,
            pairs,
            common,
        } => sweep_cmd(&model, &manifest, k_list.as_deref(), &report, pairs, &common),
    }
}

fn resolve(common: &Common) -> CliResult<RunConfig> {
    Ok(RunConfig::load(common.config.as_deref())?.with_seed(common.seed))
}

fn log_config(cfg: &RunConfig) {
    info!("resolved config:\n{}", cfg.to_json());
}

fn apply_sampling(cfg: &mut RunConfig, s: &Sampling) {
    let t = &mut cfg.protocol.transfer.translate;
    if let Some(k) = s.k {
        t.k = k;
    }
    if let Some(g) = s.gamma {
        t.gamma = g;
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).context("serializing report")?;
    write_text(path, &text)
}

fn gen_data(out: &Path, n: usize, seed: u64, size: usize, ratio: f64) -> CliResult<()> {
    if n < 2 {
        return Err(Fail::usage(format!("--n must be at least 2 so both domains are present, got {n}")));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let m = write_corpus(out, n, seed, size, ratio)?;
    let made = m.records.iter().filter(|r| r.domain == Domain::Makeup).count();
    info!("wrote {n} sprites ({made} makeup) to {}", out.display());
    Ok(())
}

/// Accepts a corpus directory or the manifest file itself.
fn open_manifest(path: &Path) -> CliResult<DatasetManifest> {
    let file = if path.is_dir() { path.join("manifest.json") } else { path.to_path_buf() };
    Ok(load_manifest(&file)?)
}

fn train_cmd(data: &Path, out: &Path, iterations: Option<usize>, loss_log: Option<PathBuf>, common: &Common) -> CliResult<()> {
    let mut cfg = resolve(common)?;
    if let Some(n) = iterations {
        cfg.training.iterations = n;
    }
    log_config(&cfg);
    let manifest = open_manifest(data)?;
    let examples = manifest.training_examples()?;
    let s = examples[0].image.shape();
    let spec = cfg.model_spec([s[0], s[1], s[2]], manifest.vocabulary.clone());
    let mut model = DenoiserModel::new(spec, cfg.training.seed)?;
    info!("training {} parameters on {} images", model.parameter_count(), examples.len());
    let log = train(&mut model, &examples, &cfg.training, |r| {
        if r.iter % 100 == 0 {
            info!("iter {} loss {:.4} lr {:.3e}", r.iter, r.loss, r.lr);
        }
    })?;
    save_model(&model, out)?;
    let csv = loss_log.unwrap_or_else(|| out.with_extension("csv"));
    write_text(&csv, &log.to_csv())?;
    let sidecar = out.with_extension("config.json");
    write_text(&sidecar, &cfg.to_json())
}

#[allow(clippy::too_many_arguments)]
fn translate_cmd(
    model: &Path,
    input: &Path,
    from: &str,
    to: &str,
    mask: Option<&Path>,
    sampling: &Sampling,
    common: &Common,
    out: &Path,
) -> CliResult<()> {
    let mut cfg = resolve(common)?;
    apply_sampling(&mut cfg, sampling);
    log_config(&cfg);
    let model = load_model(model)?;
    let l_so = model.vocabulary().parse_condition(from)?;
    let l_ta = model.vocabulary().parse_condition(to)?;
    let x0 = load_image(input)?;
    let keep = mask.map(load_mask).transpose()?;
    let y = translate(&model, &x0, l_so, l_ta, &cfg.protocol.transfer.translate, keep.as_ref())?;
    Ok(save_image(&y, out)?)
}

struct TransferFiles<'a> {
    source: &'a Path,
    reference: &'a Path,
    lm_source: &'a Path,
    lm_ref: &'a Path,
    mask_prefix: &'a Path,
}

/// Loads `<prefix>_<component>.pgm` for every component that exists.
fn load_component_masks(prefix: &Path) -> CliResult<BTreeMap<String, madiff_core::numerics::Tensor>> {
    let mut masks = BTreeMap::new();
    for name in COMPONENTS {
        let mut p = prefix.as_os_str().to_owned();
        p.push(format!("_{name}.pgm"));
        let p = PathBuf::from(p);
        if p.is_file() {
            masks.insert(name.to_string(), load_mask(&p)?);
        }
    }
    if masks.is_empty() {
        return Err(Fail::usage(format!("no component masks found at {}_<component>.pgm", prefix.display())));
    }
    Ok(masks)
}

fn load_landmarks(path: &Path, image: &madiff_core::numerics::Tensor) -> CliResult<LandmarkSet> {
    let lm = LandmarkSet::load(path)?;
    lm.validate(image.shape()[0], image.shape()[1])?;
    Ok(lm)
}

fn transfer_cmd(model: &Path, files: &TransferFiles, cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let image = load_image(files.source)?;
    let reference = load_image(files.reference)?;
    let lm = load_landmarks(files.lm_source, &image)?;
    let ref_lm = load_landmarks(files.lm_ref, &reference)?;
    lm.check_correspondence(&ref_lm)?;
    let masks = load_component_masks(files.mask_prefix)?;
    let model = load_model(model)?;
    let comps = component_specs(&masks, &cfg.protocol.alphas, &cfg.protocol.release)?;
    let source = TransferSource::new(image, lm.points, comps)?;
    let y = makeup_transfer(&model, &source, &reference, &ref_lm.points, &cfg.protocol.transfer)?;
    Ok(save_image(&y, out)?)
}

fn multi_transfer_cmd(spec: &Path, model: &Path, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let mut job = MultiTransferJob::load(spec)?;
    if let Some(s) = seed {
        job.seed = s;
    }
    info!("resolved job:\n{}", serde_json::to_string_pretty(&job).context("serializing job")?);
    let base = spec.parent().unwrap_or(Path::new("."));
    let resolved = job.resolve(base)?;
    let model = load_model(model)?;
    let y = multi_makeup_transfer(&model, &resolved.source, &resolved.refs, &resolved.options)?;
    Ok(save_image(&y, out)?)
}

/// The first `limit` (non-makeup, makeup) pairs of the corpus in record order.
fn load_pairs(manifest: &DatasetManifest, limit: usize) -> CliResult<Vec<(Face, Face)>> {
    let (mut plain, mut made) = (0, 0);
    let mut faces = Vec::new();
    for r in &manifest.records {
        let is_makeup = r.domain == Domain::Makeup;
        let count = if is_makeup { &mut made } else { &mut plain };
        if *count < limit {
            *count += 1;
            faces.push((is_makeup, Face::from(&manifest.load_record(r)?)));
        }
    }
    let pairs = domain_pairs(faces, limit);
    if pairs.is_empty() {
        return Err(Fail::usage("no (non-makeup, makeup) pairs to evaluate"));
    }
    Ok(pairs)
}

fn eval_cmd(task: Task, manifest: &Path, model: &Path, report: &Path, pairs: Option<usize>, common: &Common) -> CliResult<()> {
    let mut cfg = resolve(common)?;
    if let Some(p) = pairs {
        cfg.eval.pairs = p;
    }
    log_config(&cfg);
    let manifest = open_manifest(manifest)?;
    let model = load_model(model)?;
    let pairs = load_pairs(&manifest, cfg.eval.pairs)?;
    let mut r: MetricReport = match task {
        Task::Transfer => eval_transfer(&model, &pairs, &cfg.protocol)?,
        Task::Removal => eval_removal(&model, &pairs, &cfg.protocol)?,
    };
    r.protocol["run"] = serde_json::to_value(&cfg).context("serializing config")?;
    write_json(report, &r)
}

fn parse_k_list(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Fail::usage(format!("invalid K `{t}` in --k-list"))))
        .collect()
}

fn sweep_cmd(
    model: &Path,
    manifest: &Path,
    k_list: Option<&str>,
    report: &Path,
    pairs: Option<usize>,
    common: &Common,
) -> CliResult<()> {
    let mut cfg = resolve(common)?;
    if let Some(s) = k_list {
        cfg.eval.k_list = parse_k_list(s)?;
    }
    if let Some(p) = pairs {
        cfg.eval.pairs = p;
    }
    if cfg.eval.k_list.is_empty() {
        return Err(Fail::usage("K list is empty"));
    }
    log_config(&cfg);
    let manifest = open_manifest(manifest)?;
    let model = load_model(model)?;
    let pairs = load_pairs(&manifest, cfg.eval.pairs)?;
    let mut r = sweep_k(&model, &pairs, &cfg.eval.k_list, &cfg.protocol)?;
    r.protocol["run"] = serde_json::to_value(&cfg).context("serializing config")?;
    write_json(report, &r)
}
