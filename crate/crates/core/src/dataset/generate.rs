use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use rayon::prelude::*;

use super::gold::{save_gold, GoldResources};
use super::manifest::{render_manifest_line, MultimodalSample, Split};
use super::ppm::{encode_ppm, RgbImage};
use super::world::{ObjectClass, WorldSpec};
use super::{io_err, Result};
use crate::trainer::tokenize;
use crate::visual::BoundingBox;

const PLACEMENT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub class: ObjectClass,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub theme: usize,
    pub objects: Vec<SceneObject>,
    pub caption: String,
    pub image: RgbImage,
}

/// Render scene `index` of the world. Each scene draws from its own stream
/// seeded with `seed ^ index`, so scenes can be rendered in any order.
pub fn render_scene(spec: &WorldSpec, seed: u64, index: u64) -> Scene {
    let mut rng = Pcg64::seed_from_u64(seed ^ index);
    let theme_idx = rng.random_range(0..spec.themes.len());
    let theme = &spec.themes[theme_idx];
    let mut n_objects = rng.random_range(spec.min_objects..=spec.max_objects);

    let mut candidates: Vec<&ObjectClass> = theme.classes.iter().collect();
    candidates.shuffle(&mut rng);

    let objects = loop {
        if let Some(placed) = place_objects(spec, &candidates[..n_objects], &mut rng) {
            break placed;
        }
        // A placement failed: retry the scene with one object fewer.
        n_objects -= 1;
    };

    let mut image = RgbImage::filled(spec.canvas, spec.canvas, [0, 0, 0]);
    let noise = spec.noise as i32;
    for y in 0..spec.canvas {
        for x in 0..spec.canvas {
            let mut px = [0u8; 3];
            for (c, v) in px.iter_mut().enumerate() {
                let jitter = if noise > 0 { rng.random_range(-noise..=noise) } else { 0 };
                *v = (theme.tint[c] as i32 + jitter).clamp(0, 255) as u8;
            }
            image.set(x, y, px);
        }
    }
    for obj in &objects {
        let b = obj.bbox;
        let size = b.width() as f64;
        for y in b.y_min..b.y_max {
            for x in b.x_min..b.x_max {
                let (px, py) = ((x - b.x_min) as f64 + 0.5, (y - b.y_min) as f64 + 0.5);
                if obj.class.shape.covers(px, py, size) {
                    image.set(x as usize, y as usize, obj.class.color.rgb);
                }
            }
        }
    }

    let mut words: Vec<String> = Vec::new();
    for (i, obj) in objects.iter().enumerate() {
        if i > 0 {
            words.push("and".into());
        }
        words.push("a".into());
        words.push(obj.class.word());
    }
    let n_context = rng.random_range(1..=theme.context_words.len().min(2));
    let mut context: Vec<&String> = theme.context_words.iter().collect();
    context.shuffle(&mut rng);
    words.extend(context[..n_context].iter().map(|w| w.to_string()));
    let n_function = rng.random_range(2..=4);
    for _ in 0..n_function {
        words.push(spec.function_words.choose(&mut rng).expect("function words").clone());
    }

    Scene {
        theme: theme_idx,
        objects,
        caption: words.join(" "),
        image,
    }
}

fn place_objects(spec: &WorldSpec, classes: &[&ObjectClass], rng: &mut Pcg64) -> Option<Vec<SceneObject>> {
    let mut placed: Vec<SceneObject> = Vec::with_capacity(classes.len());
    for class in classes {
        let bbox = (0..PLACEMENT_ATTEMPTS).find_map(|_| {
            let size = rng.random_range(spec.min_size..=spec.max_size);
            let x = rng.random_range(0..=spec.canvas - size) as u32;
            let y = rng.random_range(0..=spec.canvas - size) as u32;
            let s = size as u32;
            let candidate = BoundingBox::new(x, y, x + s, y + s)?;
            placed
                .iter()
                .all(|o| o.bbox.intersection_area(&candidate) == 0)
                .then_some(candidate)
        })?;
        placed.push(SceneObject {
            class: (*class).clone(),
            bbox,
        });
    }
    Some(placed)
}

#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub manifest: PathBuf,
    pub taxonomy: PathBuf,
    pub associations: PathBuf,
    pub concreteness: PathBuf,
    pub samples: Vec<MultimodalSample>,
    pub gold: GoldResources,
}

/// Render `n_train + n_test` scenes into `out_dir`: `images/*.ppm`,
/// `manifest.tsv` and the gold resource files.
pub fn generate_dataset(
    spec: &WorldSpec,
    n_train: usize,
    n_test: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<GeneratedDataset> {
    spec.validate()?;
    let image_dir = out_dir.join("images");
    fs::create_dir_all(&image_dir).map_err(io_err(&image_dir))?;

    let total = n_train + n_test;
    let scenes: Vec<Scene> = (0..total as u64)
        .into_par_iter()
        .map(|i| render_scene(spec, seed, i))
        .collect();

    let mut samples = Vec::with_capacity(total);
    let mut manifest = String::new();
    for (i, scene) in scenes.iter().enumerate() {
        let relative = format!("images/{i:06}.ppm");
        let path = out_dir.join(&relative);
        fs::write(&path, encode_ppm(&scene.image)).map_err(io_err(&path))?;
        let sample = MultimodalSample {
            split: if i < n_train { Split::Train } else { Split::Test },
            image_path: path,
            caption: scene.caption.clone(),
            classes: scene.objects.iter().map(|o| o.class.word()).collect(),
            boxes: scene.objects.iter().map(|o| (o.class.word(), o.bbox)).collect(),
        };
        manifest.push_str(&render_manifest_line(&sample, &relative));
        manifest.push('\n');
        samples.push(sample);
    }
    let manifest_path = out_dir.join("manifest.tsv");
    fs::write(&manifest_path, manifest).map_err(io_err(&manifest_path))?;

    let train_captions: Vec<Vec<String>> = samples
        .iter()
        .filter(|s| s.split == Split::Train)
        .map(|s| tokenize(&s.caption))
        .collect();
    let gold = GoldResources::for_world(spec, &train_captions);
    let [taxonomy, associations, concreteness] = save_gold(out_dir, &gold)?;

    Ok(GeneratedDataset {
        manifest: manifest_path,
        taxonomy,
        associations,
        concreteness,
        samples,
        gold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_seeded_per_index() {
        let spec = WorldSpec::default();
        assert_eq!(render_scene(&spec, 3, 10), render_scene(&spec, 3, 10));
        assert_ne!(render_scene(&spec, 3, 10).image, render_scene(&spec, 3, 11).image);
    }

    #[test]
    fn caption_follows_template() {
        let spec = WorldSpec::default();
        for i in 0..200 {
            let scene = render_scene(&spec, 1, i);
            let words: Vec<&str> = scene.caption.split(' ').collect();
            let n = scene.objects.len();
            assert!((1..=3).contains(&n));
            let lead = 3 * n - 1;
            for (k, obj) in scene.objects.iter().enumerate() {
                assert_eq!(words[3 * k + 1], obj.class.word());
            }
            let theme = &spec.themes[scene.theme];
            let rest = &words[lead..];
            let n_ctx = rest.iter().take_while(|w| theme.context_words.iter().any(|c| c == *w)).count();
            assert!((1..=2).contains(&n_ctx));
            let n_fn = rest.len() - n_ctx;
            assert!((2..=4).contains(&n_fn));
            assert!(rest[n_ctx..].iter().all(|w| spec.function_words.iter().any(|f| f == w)));
            assert!(scene.objects.iter().all(|o| theme.classes.contains(&o.class)));
        }
    }

    #[test]
    fn objects_never_overlap() {
        let spec = WorldSpec::default();
        for i in 0..300 {
            let scene = render_scene(&spec, 5, i);
            for (a, oa) in scene.objects.iter().enumerate() {
                assert!(oa.bbox.fits_within(64, 64));
                for ob in &scene.objects[a + 1..] {
                    assert_eq!(oa.bbox.intersection_area(&ob.bbox), 0);
                }
            }
        }
    }
}
