use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pnm::{load_image, save_image};
use super::sprites::{generate_sprites, sprite_vocabulary, Domain, Sprite, SpriteSpec};
use crate::denoiser::{TrainExample, Vocabulary};
use crate::error::{Error, Result};
use crate::geometry::mask::{load_mask, save_mask};
use crate::geometry::LandmarkSet;
use crate::numerics::Tensor;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorInfo {
    pub n: usize,
    pub seed: u64,
    pub size: usize,
    pub domain_ratio: f64,
}

/// One sprite on disk; paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: String,
    pub image: PathBuf,
    pub masks: BTreeMap<String, PathBuf>,
    pub landmarks: PathBuf,
    pub domain: Domain,
    pub tags: Vec<String>,
    pub spec: SpriteSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub generator: GeneratorInfo,
    pub vocabulary: Vocabulary,
    pub records: Vec<Record>,
    #[serde(skip)]
    pub root: PathBuf,
}

/// A record with its rasters loaded.
#[derive(Clone, Debug)]
pub struct LoadedRecord {
    pub record: Record,
    pub image: Tensor,
    pub masks: BTreeMap<String, Tensor>,
    pub landmarks: LandmarkSet,
}

impl DatasetManifest {
    pub fn path(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    pub fn record(&self, id: &str) -> Result<&Record> {
        self.records
            .iter()
            .find(|r| r.id == id)
            .ok_or_else(|| Error::invalid(format!("no record named {id}")))
    }

    pub fn load_record(&self, r: &Record) -> Result<LoadedRecord> {
        let image = load_image(&self.path(&r.image))?;
        let masks = r
            .masks
            .iter()
            .map(|(k, p)| Ok((k.clone(), load_mask(&self.path(p))?)))
            .collect::<Result<_>>()?;
        let landmarks = LandmarkSet::load(&self.path(&r.landmarks))?;
        Ok(LoadedRecord {
            record: r.clone(),
            image,
            masks,
            landmarks,
        })
    }

    /// Training examples: each image with its domain and tag conditions.
    pub fn training_examples(&self) -> Result<Vec<TrainExample>> {
        self.records
            .iter()
            .map(|r| {
                let mut conditions = vec![r.domain.condition()];
                for t in &r.tags {
                    conditions.push(self.vocabulary.resolve(t)?);
                }
                Ok(TrainExample {
                    image: load_image(&self.path(&r.image))?,
                    conditions,
                })
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::invalid(format!("unsupported manifest version {}", self.version)));
        }
        for d in [Domain::NonMakeup, Domain::Makeup] {
            if !self.records.iter().any(|r| r.domain == d) {
                return Err(Error::invalid(format!("manifest has no {d:?} records")));
            }
        }
        for r in &self.records {
            for t in &r.tags {
                self.vocabulary.resolve(t)?;
            }
        }
        let mut missing = Vec::new();
        for r in &self.records {
            let files = std::iter::once(&r.image).chain(r.masks.values()).chain(std::iter::once(&r.landmarks));
            for f in files {
                if !self.path(f).is_file() {
                    missing.push(f.display().to_string());
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingFiles(missing));
        }
        Ok(())
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    m.validate()?;
    Ok(m)
}

fn write_sprite(dir: &Path, id: &str, s: &Sprite) -> Result<Record> {
    let image = PathBuf::from(format!("images/{id}.ppm"));
    save_image(&s.image, &dir.join(&image))?;
    let mut masks = BTreeMap::new();
    for (name, m) in &s.masks {
        let p = PathBuf::from(format!("masks/{id}_{name}.pgm"));
        save_mask(m, &dir.join(&p))?;
        masks.insert(name.clone(), p);
    }
    let landmarks = PathBuf::from(format!("landmarks/{id}.json"));
    s.landmarks.save(&dir.join(&landmarks))?;
    Ok(Record {
        id: id.to_string(),
        image,
        masks,
        landmarks,
        domain: s.domain(),
        tags: s.spec.tags.clone(),
        spec: s.spec.clone(),
    })
}

/// Generates a corpus and writes it under `dir` with `manifest.json`.
pub fn write_corpus(dir: &Path, n: usize, seed: u64, size: usize, domain_ratio: f64) -> Result<DatasetManifest> {
    let sprites = generate_sprites(n, seed, size, domain_ratio)?;
    for sub in ["images", "masks", "landmarks"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let records = sprites
        .iter()
        .enumerate()
        .map(|(i, s)| write_sprite(dir, &format!("sprite_{i:05}"), s))
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        generator: GeneratorInfo {
            n,
            seed,
            size,
            domain_ratio,
        },
        vocabulary: sprite_vocabulary(),
        records,
        root: dir.to_path_buf(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
