//! Procedural face-like sprites in two domains with exact component masks,
//! landmarks and palette tags.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::denoiser::{ConditionId, Vocabulary};
use crate::error::{Error, Result};
use crate::geometry::{LandmarkSet, Point, WarpMap};
use crate::numerics::{RngState, Tensor};

use super::pnm::dequantize;

pub type Rgb = [u8; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    NonMakeup,
    Makeup,
}

impl Domain {
    pub fn condition(self) -> ConditionId {
        match self {
            Domain::NonMakeup => ConditionId::NonMakeup,
            Domain::Makeup => ConditionId::Makeup,
        }
    }
}

pub const COMPONENTS: [&str; 4] = ["eyes", "eyebrows", "lips", "face"];

pub const LIP_PALETTE: [(&str, Rgb); 4] = [
    ("plain_lips", [196, 122, 112]),
    ("red_lips", [204, 24, 44]),
    ("pink_lips", [236, 96, 168]),
    ("plum_lips", [118, 30, 84]),
];

pub const SHADOW_PALETTE: [(&str, Option<Rgb>); 4] = [
    ("no_eyeshadow", None),
    ("blue_eyeshadow", Some([64, 92, 204])),
    ("purple_eyeshadow", Some([142, 60, 172])),
    ("brown_eyeshadow", Some([122, 72, 40])),
];

pub const BROW_PALETTE: [(&str, Rgb); 2] = [("light_brows", [150, 112, 84]), ("dark_brows", [48, 30, 22])];

const SKIN: Rgb = [222, 180, 150];
const PUPIL: Rgb = [36, 28, 30];
const BACKGROUNDS: [Rgb; 4] = [[92, 112, 140], [128, 140, 120], [150, 128, 120], [104, 104, 116]];
const HAIR: [Rgb; 3] = [[42, 30, 24], [84, 56, 36], [24, 24, 28]];

/// Every tag the generator can emit, in embedding order.
pub fn sprite_vocabulary() -> Vocabulary {
    let mut tags: Vec<String> = LIP_PALETTE.iter().map(|p| p.0.to_string()).collect();
    tags.extend(SHADOW_PALETTE.iter().map(|p| p.0.to_string()));
    tags.extend(BROW_PALETTE.iter().map(|p| p.0.to_string()));
    Vocabulary::new(tags)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (u, v) = ((x - self.cx) / self.rx, (y - self.cy) / self.ry);
        u * u + v * v <= 1.0
    }

    fn at(&self, angle: f64) -> Point {
        [self.cx + self.rx * angle.cos(), self.cy + self.ry * angle.sin()]
    }

    /// Distance in pixels from `p` to the ellipse along the ray from the center.
    pub fn radial_residual(&self, p: Point) -> f64 {
        let (dx, dy) = (p[0] - self.cx, p[1] - self.cy);
        let r = ((dx / self.rx).powi(2) + (dy / self.ry).powi(2)).sqrt();
        if r == 0.0 {
            return self.rx.min(self.ry);
        }
        (dx * dx + dy * dy).sqrt() * (1.0 - 1.0 / r).abs()
    }
}

/// Full parametric description of one sprite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpriteSpec {
    pub size: usize,
    pub domain: Domain,
    pub background: Rgb,
    pub hair: Rgb,
    pub skin: Rgb,
    pub face: Ellipse,
    pub hair_shape: Ellipse,
    pub shadows: [Ellipse; 2],
    pub pupils: [Ellipse; 2],
    pub brows: [Ellipse; 2],
    pub lips: Ellipse,
    pub lip_color: Rgb,
    pub shadow_color: Option<Rgb>,
    pub brow_color: Rgb,
    pub tags: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Sprite {
    pub spec: SpriteSpec,
    /// `[size, size, 3]` in model range.
    pub image: Tensor,
    /// Binary `[size, size]` masks keyed by component name.
    pub masks: BTreeMap<String, Tensor>,
    pub landmarks: LandmarkSet,
}

impl Sprite {
    pub fn domain(&self) -> Domain {
        self.spec.domain
    }

    pub fn mask(&self, component: &str) -> &Tensor {
        &self.masks[component]
    }

    /// Everything outside the landmark hull.
    pub fn background_mask(&self) -> Tensor {
        let n = self.spec.size;
        WarpMap::new(&self.landmarks.points, &self.landmarks.points, n, n)
            .expect("sprite landmarks triangulate")
            .validity()
            .complement()
    }

    /// Domain plus tag conditions under the given vocabulary.
    pub fn conditions(&self, vocab: &Vocabulary) -> Result<Vec<ConditionId>> {
        let mut out = vec![self.spec.domain.condition()];
        for t in &self.spec.tags {
            out.push(vocab.resolve(t)?);
        }
        Ok(out)
    }

    /// Mean color of `component` pixels in model range.
    pub fn mean_color(&self, component: &str) -> [f64; 3] {
        mean_color(&self.image, self.mask(component))
    }
}

/// Mean `[h, w, 3]` color over a binary mask.
pub fn mean_color(img: &Tensor, mask: &Tensor) -> [f64; 3] {
    let mut acc = [0.0; 3];
    let mut n = 0.0;
    for (i, &m) in mask.data().iter().enumerate() {
        if m == 1.0 {
            for k in 0..3 {
                acc[k] += img.data()[i * 3 + k];
            }
            n += 1.0;
        }
    }
    acc.map(|v| if n > 0.0 { v / n } else { 0.0 })
}

pub fn rgb_to_model(c: Rgb) -> [f64; 3] {
    c.map(dequantize)
}

fn jitter(rng: &mut RngState, spread: f64) -> f64 {
    (rng.uniform() * 2.0 - 1.0) * spread
}

fn pick<T: Copy>(rng: &mut RngState, items: &[T]) -> T {
    items[rng.range_inclusive(0, items.len() - 1)]
}

fn shade(base: Rgb, offset: i32, rng: &mut RngState) -> Rgb {
    base.map(|c| (c as i32 + offset + rng.range_inclusive(0, 6) as i32 - 3).clamp(0, 255) as u8)
}

/// Draws the parameters of one sprite.
pub fn sample_spec(rng: &mut RngState, size: usize, domain: Domain) -> Result<SpriteSpec> {
    if ![16, 32, 64].contains(&size) {
        return Err(Error::invalid(format!("sprite size {size} not in {{16, 32, 64}}")));
    }
    let s = size as f64 / 32.0;
    let cx = 15.5 + jitter(rng, 1.0);
    let cy = 16.0 + jitter(rng, 1.0);
    let face = Ellipse {
        cx: cx * s,
        cy: cy * s,
        rx: (10.0 + jitter(rng, 0.6)) * s,
        ry: (12.2 + jitter(rng, 0.6)) * s,
    };
    let hair_shape = Ellipse {
        cx: face.cx,
        cy: face.cy - 2.5 * s,
        rx: face.rx + 2.0 * s,
        ry: face.ry + 1.0 * s,
    };
    let eye_y = cy - 2.5 + jitter(rng, 0.5);
    let eye_dx = 4.5 + jitter(rng, 0.4);
    let shadow_r = (3.0 + jitter(rng, 0.3), 2.2 + jitter(rng, 0.2));
    let mut shadows = [face; 2];
    let mut pupils = [face; 2];
    let mut brows = [face; 2];
    let brow_dy = 3.6 + jitter(rng, 0.3);
    for (k, side) in [-1.0, 1.0].into_iter().enumerate() {
        let ex = cx + side * eye_dx;
        shadows[k] = Ellipse {
            cx: ex * s,
            cy: eye_y * s,
            rx: shadow_r.0 * s,
            ry: shadow_r.1 * s,
        };
        pupils[k] = Ellipse {
            cx: ex * s,
            cy: (eye_y + 0.3) * s,
            rx: 1.2 * s,
            ry: 1.2 * s,
        };
        brows[k] = Ellipse {
            cx: ex * s,
            cy: (eye_y - brow_dy) * s,
            rx: 3.0 * s,
            ry: (0.9 * s).max(0.6),
        };
    }
    let lips = Ellipse {
        cx: cx * s,
        cy: (cy + 6.5 + jitter(rng, 0.5)) * s,
        rx: (4.6 + jitter(rng, 0.4)) * s,
        ry: (2.4 + jitter(rng, 0.2)) * s,
    };
    let (lip, shadow, brow) = match domain {
        Domain::NonMakeup => (LIP_PALETTE[0], SHADOW_PALETTE[0], BROW_PALETTE[0]),
        Domain::Makeup => (pick(rng, &LIP_PALETTE[1..]), pick(rng, &SHADOW_PALETTE[1..]), BROW_PALETTE[1]),
    };
    let skin_offset = rng.range_inclusive(0, 24) as i32 - 12;
    let skin = shade(SKIN, skin_offset, rng);
    Ok(SpriteSpec {
        size,
        domain,
        background: pick(rng, &BACKGROUNDS),
        hair: pick(rng, &HAIR),
        skin,
        face,
        hair_shape,
        shadows,
        pupils,
        brows,
        lips,
        lip_color: lip.1,
        shadow_color: shadow.1,
        brow_color: brow.1,
        tags: vec![lip.0.to_string(), shadow.0.to_string(), brow.0.to_string()],
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Label {
    Background,
    Hair,
    Skin,
    Shadow,
    Pupil,
    Brow,
    Lips,
}

/// Rasterizes a spec into an image, masks and landmarks.
pub fn render(spec: &SpriteSpec) -> Result<Sprite> {
    let n = spec.size;
    let mut labels = vec![Label::Background; n * n];
    for y in 0..n {
        for x in 0..n {
            let (fx, fy) = (x as f64, y as f64);
            let l = &mut labels[y * n + x];
            if spec.hair_shape.contains(fx, fy) {
                *l = Label::Hair;
            }
            if spec.face.contains(fx, fy) {
                *l = Label::Skin;
                if spec.shadows.iter().any(|e| e.contains(fx, fy)) {
                    *l = Label::Shadow;
                }
                if spec.pupils.iter().any(|e| e.contains(fx, fy)) {
                    *l = Label::Pupil;
                }
                if spec.brows.iter().any(|e| e.contains(fx, fy)) {
                    *l = Label::Brow;
                }
                if spec.lips.contains(fx, fy) {
                    *l = Label::Lips;
                }
            }
        }
    }
    let mut data = Vec::with_capacity(n * n * 3);
    for &l in &labels {
        let c = match l {
            Label::Background => spec.background,
            Label::Hair => spec.hair,
            Label::Skin => spec.skin,
            Label::Shadow => spec.shadow_color.unwrap_or(spec.skin),
            Label::Pupil => PUPIL,
            Label::Brow => spec.brow_color,
            Label::Lips => spec.lip_color,
        };
        data.extend(c.iter().map(|&v| dequantize(v)));
    }
    let image = Tensor::new(&[n, n, 3], data)?;

    let landmarks = landmarks(spec);
    landmarks.validate(n, n)?;
    let hull = WarpMap::new(&landmarks.points, &landmarks.points, n, n)?.validity();
    let raster = |f: &dyn Fn(Label) -> bool| {
        Tensor::new(&[n, n], labels.iter().map(|&l| if f(l) { 1.0 } else { 0.0 }).collect()).unwrap()
    };
    let eyes = raster(&|l| matches!(l, Label::Shadow | Label::Pupil));
    let brows = raster(&|l| l == Label::Brow);
    let lips = raster(&|l| l == Label::Lips);
    let face = raster(&|l| l == Label::Skin).hadamard(&hull)?;
    let masks = BTreeMap::from([
        ("eyes".to_string(), eyes),
        ("eyebrows".to_string(), brows),
        ("lips".to_string(), lips),
        ("face".to_string(), face),
    ]);
    Ok(Sprite {
        spec: spec.clone(),
        image,
        masks,
        landmarks,
    })
}

/// 16 outline points, 4 per eye region, 3 per brow and 6 on the lips, all
/// lying on the drawn ellipses.
pub fn landmarks(spec: &SpriteSpec) -> LandmarkSet {
    use std::f64::consts::PI;
    let mut points = Vec::new();
    let mut components = BTreeMap::new();
    let mut push = |name: &str, pts: Vec<Point>, points: &mut Vec<Point>| {
        let start = points.len();
        points.extend(pts);
        components
            .entry(name.to_string())
            .or_insert_with(Vec::new)
            .extend(start..points.len());
    };
    push("face", (0..16).map(|k| spec.face.at(k as f64 * PI / 8.0)).collect(), &mut points);
    for e in &spec.shadows {
        push("eyes", (0..4).map(|k| e.at(k as f64 * PI / 2.0)).collect(), &mut points);
    }
    for e in &spec.brows {
        push("eyebrows", vec![e.at(PI), e.at(1.5 * PI), e.at(0.0)], &mut points);
    }
    let mut lip_pts: Vec<Point> = (0..8).map(|k| spec.lips.at(k as f64 * PI / 4.0)).collect();
    lip_pts.push([spec.lips.cx, spec.lips.cy]);
    push("lips", lip_pts, &mut points);
    LandmarkSet { points, components }
}

pub fn generate_sprite(rng: &mut RngState, size: usize, domain: Domain) -> Result<Sprite> {
    render(&sample_spec(rng, size, domain)?)
}

/// Number of makeup sprites in a corpus of `n` at `ratio`; both domains are
/// always represented.
pub fn makeup_count(n: usize, ratio: f64) -> usize {
    ((n as f64 * ratio).round() as usize).clamp(1, n - 1)
}

/// In-memory corpus; sprite `i` depends only on `(seed, i)`.
pub fn generate_sprites(n: usize, seed: u64, size: usize, domain_ratio: f64) -> Result<Vec<Sprite>> {
    if n < 2 {
        return Err(Error::invalid("a corpus needs at least 2 sprites"));
    }
    if !(0.0..=1.0).contains(&domain_ratio) {
        return Err(Error::invalid(format!("domain ratio {domain_ratio} outside [0, 1]")));
    }
    let makeup = makeup_count(n, domain_ratio);
    let root = RngState::new(seed, 0x5350);
    (0..n)
        .map(|i| {
            // Alternate domains until the smaller one is used up.
            let domain = if interleaved_is_makeup(i, n, makeup) { Domain::Makeup } else { Domain::NonMakeup };
            generate_sprite(&mut root.substream(i as u64), size, domain)
        })
        .collect()
}

fn interleaved_is_makeup(i: usize, n: usize, makeup: usize) -> bool {
    // Bresenham spread of `makeup` marks over `n` slots.
    (i + 1) * makeup / n != i * makeup / n
}
