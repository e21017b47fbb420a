use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::ppm::decode_ppm;
use super::{io_err, DatasetError, Result};
use crate::grad::Tensor;
use crate::visual::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// One image-caption pair with its gold annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalSample {
    pub split: Split,
    /// Resolved against the manifest's directory.
    pub image_path: PathBuf,
    pub caption: String,
    pub classes: Vec<String>,
    pub boxes: Vec<(String, BoundingBox)>,
}

/// One manifest line (without the newline). `image_field` is written
/// verbatim, usually a path relative to the manifest.
pub fn render_manifest_line(sample: &MultimodalSample, image_field: &str) -> String {
    let boxes: Vec<String> = sample
        .boxes
        .iter()
        .map(|(c, b)| format!("{c}:{}:{}:{}:{}", b.x_min, b.y_min, b.x_max, b.y_max))
        .collect();
    format!(
        "{}\t{}\t{}\t{}\t{}",
        sample.split,
        image_field,
        sample.caption,
        sample.classes.join(","),
        boxes.join(";")
    )
}

/// Parse the fields of one line. The image path is returned unresolved and
/// image-dependent invariants are left to [`load_manifest`].
pub fn parse_manifest_line(line: &str) -> std::result::Result<MultimodalSample, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(format!("expected 5 tab-separated fields, found {}", fields.len()));
    }
    let split: Split = fields[0].parse()?;
    if fields[1].is_empty() {
        return Err("empty image path".into());
    }
    let classes: Vec<String> = if fields[3].is_empty() {
        Vec::new()
    } else {
        fields[3].split(',').map(str::to_string).collect()
    };
    if classes.iter().any(|c| c.is_empty()) {
        return Err("empty class name".into());
    }
    let mut boxes = Vec::new();
    if !fields[4].is_empty() {
        for spec in fields[4].split(';') {
            let parts: Vec<&str> = spec.split(':').collect();
            if parts.len() != 5 || parts[0].is_empty() {
                return Err(format!("bad box {spec:?}, expected class:x0:y0:x1:y1"));
            }
            let mut coords = [0u32; 4];
            for (slot, text) in coords.iter_mut().zip(&parts[1..]) {
                *slot = text
                    .parse()
                    .map_err(|_| format!("bad coordinate {text:?} in box {spec:?}"))?;
            }
            let b = BoundingBox::new(coords[0], coords[1], coords[2], coords[3])
                .ok_or_else(|| format!("box {spec:?} has no area"))?;
            boxes.push((parts[0].to_string(), b));
        }
    }
    for class in &classes {
        if !boxes.iter().any(|(c, _)| c == class) {
            return Err(format!("class {class} has no box"));
        }
    }
    for (c, _) in &boxes {
        if !classes.contains(c) {
            return Err(format!("box for unlisted class {c}"));
        }
    }
    Ok(MultimodalSample {
        split,
        image_path: PathBuf::from(fields[1]),
        caption: fields[2].to_string(),
        classes,
        boxes,
    })
}

/// Load and validate a manifest. Every referenced image is decoded, so a
/// successful load guarantees readable images and in-bounds boxes.
pub fn load_manifest(path: &Path) -> Result<Vec<MultimodalSample>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut samples = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let index = samples.len();
        let mut sample = parse_manifest_line(line).map_err(|reason| DatasetError::Manifest {
            path: path.to_path_buf(),
            line: line_no + 1,
            reason: format!("sample {index}: {reason}"),
        })?;
        sample.image_path = base.join(&sample.image_path);
        let bytes = match fs::read(&sample.image_path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(DatasetError::MissingImage {
                    index,
                    path: sample.image_path,
                })
            }
            Err(source) => {
                return Err(DatasetError::Io {
                    path: sample.image_path,
                    source,
                })
            }
        };
        let image = decode_ppm(&bytes).map_err(|reason| DatasetError::Sample {
            index,
            reason: format!("{}: malformed PPM: {reason}", sample.image_path.display()),
        })?;
        for (class, b) in &sample.boxes {
            if !b.fits_within(image.width as u32, image.height as u32) {
                return Err(DatasetError::Sample {
                    index,
                    reason: format!(
                        "box {class} {b} outside the {}x{} image",
                        image.width, image.height
                    ),
                });
            }
        }
        samples.push(sample);
    }
    Ok(samples)
}

/// Decode one image to a `[1, 3, H, W]` tensor in `[0, 1]`.
pub fn load_image(path: &Path) -> Result<Tensor<f32>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let image = decode_ppm(&bytes).map_err(|reason| DatasetError::Ppm {
        path: path.to_path_buf(),
        reason,
    })?;
    Ok(image.to_tensor())
}
