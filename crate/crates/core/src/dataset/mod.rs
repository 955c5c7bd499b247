//! Sprite corpus generation, image codecs and dataset manifests.

mod manifest;
pub mod pnm;
mod sprites;

pub use manifest::{load_manifest, write_corpus, DatasetManifest, GeneratorInfo, LoadedRecord, Record, MANIFEST_VERSION};
pub use pnm::{dequantize, load_image, quantize, quantize_image, save_image};
pub use sprites::{
    generate_sprite, generate_sprites, landmarks, makeup_count, mean_color, render, rgb_to_model, sample_spec,
    sprite_vocabulary, Domain, Ellipse, Rgb, Sprite, SpriteSpec, BROW_PALETTE, COMPONENTS, LIP_PALETTE,
    SHADOW_PALETTE,
};
