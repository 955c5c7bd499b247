//! Criterion 12: every command, run twice, writes identical bytes.

use std::path::{Path, PathBuf};
use std::process::Command;

use madiff_core::dataset::{load_manifest, Domain};

use crate::{check, err, Outcome};

const TINY_CONFIG: &str = r#"{
  "model": {"arch": {"kind": "mlp", "hidden": 32, "blocks": 1}, "time_dim": 16, "cond_dim": 8, "cond_hidden": 16},
  "training": {"iterations": 6, "batch_size": 4},
  "protocol": {"transfer": {"translate": {"k": 12}}, "removal": {"k": 12}, "ddim_steps": 4},
  "eval": {"pairs": 2, "k_list": [4, 8, 12]}
}"#;

fn madiff(args: &[String]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_madiff")).args(args).output().map_err(err)?;
    check(
        out.status.success(),
        format!("madiff {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)),
    )
}

fn p(path: &Path) -> String {
    path.to_str().unwrap().to_string()
}

/// Runs the whole command set into `run`, sharing the corpus in `base`.
fn run_all(base: &Path, run: &Path) -> Result<Vec<PathBuf>, String> {
    std::fs::create_dir_all(run).map_err(err)?;
    let config = base.join("tiny.json");
    let data = run.join("data");
    let a = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    madiff(&[a(&["gen-data", "--out"]), vec![p(&data)], a(&["--n", "8", "--seed", "5", "--size", "16"])].concat())?;

    let model = run.join("model.bin");
    madiff(&[
        a(&["train", "--data"]),
        vec![p(&data), "--out".into(), p(&model), "--config".into(), p(&config)],
        a(&["--seed", "3"]),
    ]
    .concat())?;

    let manifest = load_manifest(&data.join("manifest.json")).map_err(err)?;
    let src = manifest.records.iter().find(|r| r.domain == Domain::NonMakeup).unwrap();
    let reference = manifest.records.iter().find(|r| r.domain == Domain::Makeup).unwrap();
    let file = |rel: &Path| p(&data.join(rel));

    let translated = run.join("translated.ppm");
    madiff(&[
        a(&["translate", "--model"]),
        vec![p(&model), "--input".into(), file(&src.image)],
        a(&["--from", "non_makeup", "--to", "makeup", "--K", "10", "--seed", "4", "--out"]),
        vec![p(&translated)],
    ]
    .concat())?;

    let transferred = run.join("transferred.ppm");
    madiff(&[
        a(&["transfer", "--model"]),
        vec![p(&model), "--source".into(), file(&src.image), "--ref".into(), file(&reference.image)],
        vec!["--lm-source".into(), file(&src.landmarks), "--lm-ref".into(), file(&reference.landmarks)],
        vec!["--source-masks".into(), p(&data.join("masks").join(&src.id))],
        a(&["--K", "10", "--seed", "4", "--out"]),
        vec![p(&transferred)],
    ]
    .concat())?;

    let job = run.join("job.json");
    let masks: serde_json::Map<String, serde_json::Value> =
        src.masks.iter().map(|(k, m)| (k.clone(), serde_json::json!(data.join(m)))).collect();
    let spec = serde_json::json!({
        "source": data.join(&src.image),
        "source_landmarks": data.join(&src.landmarks),
        "source_masks": masks,
        "refs": [{
            "image": data.join(&reference.image),
            "landmarks": data.join(&reference.landmarks),
            "mask": data.join(&reference.masks["lips"]),
            "alpha": 1.0,
        }],
        "K": 10,
        "seed": 0,
    });
    std::fs::write(&job, serde_json::to_string_pretty(&spec).unwrap()).map_err(err)?;
    let multi = run.join("multi.ppm");
    madiff(&[a(&["multi-transfer", "--spec"]), vec![p(&job), "--model".into(), p(&model)], a(&["--seed", "4", "--out"]), vec![p(&multi)]].concat())?;

    let mut reports = Vec::new();
    for task in ["transfer", "removal"] {
        let report = run.join(format!("eval_{task}.json"));
        madiff(&[
            a(&["eval", "--task", task, "--manifest"]),
            vec![p(&data), "--model".into(), p(&model), "--report".into(), p(&report), "--config".into(), p(&config)],
            a(&["--seed", "4"]),
        ]
        .concat())?;
        reports.push(report);
    }
    let sweep = run.join("sweep.json");
    madiff(&[
        a(&["sweep-k", "--model"]),
        vec![p(&model), "--manifest".into(), p(&data), "--report".into(), p(&sweep), "--config".into(), p(&config)],
        a(&["--seed", "4"]),
    ]
    .concat())?;

    let mut artifacts = vec![
        data.join("manifest.json"),
        data.join(&src.image),
        data.join(&reference.masks["lips"]),
        model.clone(),
        model.with_extension("csv"),
        model.with_extension("config.json"),
        translated,
        transferred,
        multi,
        sweep,
    ];
    artifacts.extend(reports);
    Ok(artifacts)
}

/// Artifacts embed no paths of their own, so the two runs can live in
/// different directories.
pub fn determinism() -> Outcome {
    let base = tempfile::tempdir().map_err(err)?;
    std::fs::write(base.path().join("tiny.json"), TINY_CONFIG).map_err(err)?;
    let first = run_all(base.path(), &base.path().join("a"))?;
    let second = run_all(base.path(), &base.path().join("b"))?;
    for (x, y) in first.iter().zip(&second) {
        let (bx, by) = (std::fs::read(x).map_err(err)?, std::fs::read(y).map_err(err)?);
        check(!bx.is_empty(), format!("{} is empty", x.display()))?;
        check(bx == by, format!("{} differs between runs", x.file_name().unwrap().to_string_lossy()))?;
    }
    Ok(format!("8 commands, {} artifacts byte-identical across two runs", first.len()))
}
