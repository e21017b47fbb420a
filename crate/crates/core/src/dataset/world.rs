use std::fmt;

use super::{DatasetError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shape {
    Circle,
    Square,
    Triangle,
    Cross,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::Circle, Shape::Square, Shape::Triangle, Shape::Cross];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Circle => "circle",
            Shape::Square => "square",
            Shape::Triangle => "triangle",
            Shape::Cross => "cross",
        }
    }

    /// Whether the pixel centred at `(px, py)` lies inside the shape drawn in
    /// an axis-aligned `size x size` box whose top-left corner is the origin.
    pub fn covers(self, px: f64, py: f64, size: f64) -> bool {
        let (cx, cy) = (size / 2.0, size / 2.0);
        match self {
            Shape::Square => true,
            Shape::Circle => {
                let (dx, dy) = (px - cx, py - cy);
                dx * dx + dy * dy <= cx * cx
            }
            Shape::Triangle => (px - cx).abs() <= py / size * cx,
            Shape::Cross => (px - cx).abs() <= size / 6.0 || (py - cy).abs() <= size / 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Color {
    pub name: String,
    pub rgb: [u8; 3],
}

/// One object category: a shape in a colour, named by a single token such
/// as `redcircle`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectClass {
    pub shape: Shape,
    pub color: Color,
}

impl ObjectClass {
    pub fn word(&self) -> String {
        format!("{}{}", self.color.name, self.shape.name())
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.word())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Theme {
    pub name: String,
    pub classes: Vec<ObjectClass>,
    pub context_words: Vec<String>,
    pub tint: [u8; 3],
}

pub const FUNCTION_WORDS: [&str; 6] = ["a", "the", "is", "on", "near", "very"];

/// Parameters of the shapes world.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub themes: Vec<Theme>,
    pub canvas: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub min_size: usize,
    pub max_size: usize,
    /// Per-channel amplitude of the uniform background noise.
    pub noise: u8,
    pub function_words: Vec<String>,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self::shapes_world(3)
    }
}

impl WorldSpec {
    /// Three themes over 4 shapes x 3 colours. Theme `t` owns every shape
    /// once, coloured `(shape + t) mod 3`, so themes cut across both shape
    /// and colour. `n_themes` keeps only the first themes (1 to 3).
    pub fn shapes_world(n_themes: usize) -> Self {
        let colors = [
            Color { name: "red".into(), rgb: [220, 30, 30] },
            Color { name: "green".into(), rgb: [20, 170, 40] },
            Color { name: "blue".into(), rgb: [30, 60, 220] },
        ];
        let settings = [
            ("beach", ["sand", "sunny"], [236, 222, 178]),
            ("forest", ["moss", "shade"], [176, 204, 172]),
            ("city", ["street", "night"], [168, 168, 190]),
        ];
        let themes = settings
            .iter()
            .enumerate()
            .take(n_themes.clamp(1, 3))
            .map(|(t, (name, words, tint))| Theme {
                name: name.to_string(),
                classes: Shape::ALL
                    .iter()
                    .enumerate()
                    .map(|(s, &shape)| ObjectClass {
                        shape,
                        color: colors[(s + t) % colors.len()].clone(),
                    })
                    .collect(),
                context_words: words.iter().map(|w| w.to_string()).collect(),
                tint: *tint,
            })
            .collect();
        Self {
            themes,
            canvas: 64,
            min_objects: 1,
            max_objects: 3,
            min_size: 10,
            max_size: 24,
            noise: 12,
            function_words: FUNCTION_WORDS.iter().map(|w| w.to_string()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DatasetError::World(m));
        if self.themes.is_empty() {
            return bad("no themes".into());
        }
        if self.min_objects == 0 || self.min_objects > self.max_objects {
            return bad(format!("object range {}..={}", self.min_objects, self.max_objects));
        }
        if self.min_size == 0 || self.min_size > self.max_size || self.max_size > self.canvas {
            return bad(format!("size range {}..={} on a {} canvas", self.min_size, self.max_size, self.canvas));
        }
        for t in &self.themes {
            if t.classes.len() < self.max_objects {
                return bad(format!("theme {} has fewer classes than max_objects", t.name));
            }
            if t.context_words.is_empty() {
                return bad(format!("theme {} has no context words", t.name));
            }
        }
        if self.function_words.is_empty() {
            return bad("no function words".into());
        }
        Ok(())
    }

    pub fn classes(&self) -> impl Iterator<Item = &ObjectClass> {
        self.themes.iter().flat_map(|t| &t.classes)
    }

    pub fn class_words(&self) -> Vec<String> {
        self.classes().map(ObjectClass::word).collect()
    }

    pub fn context_words(&self) -> Vec<String> {
        self.themes.iter().flat_map(|t| t.context_words.iter().cloned()).collect()
    }

    /// Words that appear in captions but denote nothing visual.
    pub fn grammatical_words(&self) -> Vec<String> {
        let mut words: Vec<String> = self.function_words.clone();
        if !words.iter().any(|w| w == "and") {
            words.push("and".into());
        }
        words
    }

    pub fn class_by_word(&self, word: &str) -> Option<&ObjectClass> {
        self.classes().find(|c| c.word() == word)
    }
}
