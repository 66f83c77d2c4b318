use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::ComponentKind;
use crate::error::{Error, Result};

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Window {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn intersects(&self, other: &Window) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }
}

/// Canvas size plus the crop windows of the four facial components. The
/// remainder implicitly spans the whole canvas.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ComponentLayout {
    canvas_width: usize,
    canvas_height: usize,
    facial: [Window; 4],
}

/// Default windows as canvas fractions `(x0, y0, x1, y1)`, in
/// [`ComponentKind::FACIAL`] order.
const DEFAULT_FRACTIONS: [(f64, f64, f64, f64); 4] = [
    (0.16, 0.27, 0.47, 0.52),
    (0.53, 0.27, 0.84, 0.52),
    (0.36, 0.42, 0.64, 0.72),
    (0.31, 0.66, 0.69, 0.87),
];

pub const DEFAULT_CANVAS: usize = 64;

impl ComponentLayout {
    pub fn new(canvas_width: usize, canvas_height: usize, facial: [Window; 4]) -> Result<Self> {
        if canvas_width == 0 || canvas_height == 0 {
            return Err(Error::InvalidInput("canvas must be non-empty".into()));
        }
        for (kind, w) in ComponentKind::FACIAL.iter().zip(&facial) {
            if w.x0 >= w.x1 || w.y0 >= w.y1 || w.x1 > canvas_width || w.y1 > canvas_height {
                return Err(Error::InvalidInput(format!(
                    "{kind} window ({}, {})-({}, {}) is empty or outside the {canvas_width}x{canvas_height} canvas",
                    w.x0, w.y0, w.x1, w.y1
                )));
            }
        }
        Ok(Self {
            canvas_width,
            canvas_height,
            facial,
        })
    }

    /// Default layout scaled to the given canvas, rounded to pixels.
    pub fn default_for(canvas_width: usize, canvas_height: usize) -> Result<Self> {
        let (w, h) = (canvas_width as f64, canvas_height as f64);
        let facial = DEFAULT_FRACTIONS.map(|(x0, y0, x1, y1)| {
            Window::new(
                (x0 * w).round() as usize,
                (y0 * h).round() as usize,
                (x1 * w).round() as usize,
                (y1 * h).round() as usize,
            )
        });
        Self::new(canvas_width, canvas_height, facial)
    }

    pub fn canvas_width(&self) -> usize {
        self.canvas_width
    }

    pub fn canvas_height(&self) -> usize {
        self.canvas_height
    }

    pub fn canvas(&self) -> (usize, usize) {
        (self.canvas_width, self.canvas_height)
    }

    pub fn window(&self, kind: ComponentKind) -> Window {
        match kind {
            ComponentKind::Remainder => Window::new(0, 0, self.canvas_width, self.canvas_height),
            k => self.facial[k.index()],
        }
    }

    /// Crop dimensions `(width, height)` for a component.
    pub fn crop_dims(&self, kind: ComponentKind) -> (usize, usize) {
        let w = self.window(kind);
        (w.width(), w.height())
    }

    /// Highest-priority component whose window covers the pixel.
    #[inline]
    pub fn owner(&self, x: usize, y: usize) -> ComponentKind {
        ComponentKind::FACIAL
            .into_iter()
            .find(|k| self.facial[k.index()].contains(x, y))
            .unwrap_or(ComponentKind::Remainder)
    }

    /// Per-pixel owner, row-major over the canvas.
    pub fn owner_map(&self) -> Vec<ComponentKind> {
        let mut out = Vec::with_capacity(self.canvas_width * self.canvas_height);
        for y in 0..self.canvas_height {
            for x in 0..self.canvas_width {
                out.push(self.owner(x, y));
            }
        }
        out
    }

    /// True if the pixel lies in any of the four facial windows.
    #[inline]
    pub fn in_facial_window(&self, x: usize, y: usize) -> bool {
        self.facial.iter().any(|w| w.contains(x, y))
    }

    pub fn facial_windows_disjoint(&self) -> bool {
        (0..4).all(|i| (i + 1..4).all(|j| !self.facial[i].intersects(&self.facial[j])))
    }

    /// Key/value text form, one `key=value` per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("canvas={}x{}\n", self.canvas_width, self.canvas_height);
        for kind in ComponentKind::FACIAL {
            let w = self.window(kind);
            let _ = writeln!(s, "{kind}={},{},{},{}", w.x0, w.y0, w.x1, w.y1);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut canvas = None;
        let mut facial: [Option<Window>; 4] = [None; 4];
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("layout line without '=': {line}")))?;
            let bad = || Error::InvalidInput(format!("malformed layout value: {line}"));
            if key.trim() == "canvas" {
                let (w, h) = value.trim().split_once('x').ok_or_else(bad)?;
                canvas = Some((
                    w.trim().parse::<usize>().map_err(|_| bad())?,
                    h.trim().parse::<usize>().map_err(|_| bad())?,
                ));
                continue;
            }
            let kind: ComponentKind = key.trim().parse()?;
            if kind == ComponentKind::Remainder {
                return Err(Error::InvalidInput("remainder has no window".into()));
            }
            let nums = value
                .split(',')
                .map(|v| v.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            let [x0, y0, x1, y1] = nums[..] else {
                return Err(bad());
            };
            facial[kind.index()] = Some(Window::new(x0, y0, x1, y1));
        }
        let (w, h) = canvas.ok_or_else(|| Error::InvalidInput("layout lacks canvas size".into()))?;
        let mut windows = [Window::new(0, 0, 0, 0); 4];
        for (i, slot) in facial.iter().enumerate() {
            windows[i] = slot.ok_or_else(|| {
                Error::InvalidInput(format!("layout lacks {} window", ComponentKind::FACIAL[i]))
            })?;
        }
        Self::new(w, h, windows)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

impl Default for ComponentLayout {
    fn default() -> Self {
        Self::default_for(DEFAULT_CANVAS, DEFAULT_CANVAS).expect("default layout is valid")
    }
}
