//! Faces used to draw readouts into display ROIs.
//!
//! The default set is 24 procedural seven-segment faces modelled on the DSEG7
//! family (Classic, Classic-Mini, Modern, Modern-Mini; Light, Regular, Bold;
//! upright and italic). A directory of TrueType files can replace it.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use ab_glyph::{Font, FontVec, PxScale, ScaleFont};

use super::DisplayError;

/// Anti-aliased ink coverage in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl Coverage {
    fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn at(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    fn max_at(&mut self, x: u32, y: u32, v: f32) {
        let i = y as usize * self.width as usize + x as usize;
        if v > self.data[i] {
            self.data[i] = v.min(1.0);
        }
    }
}

pub trait Face: Send + Sync {
    fn id(&self) -> &str;

    /// Pixel extent `(width, height)` of `text` at `size`.
    fn measure(&self, text: &str, size: u32) -> Result<(u32, u32), DisplayError>;

    fn rasterize(&self, text: &str, size: u32) -> Result<Coverage, DisplayError>;
}

// Segment bits: a b c d e f g (top, upper right, lower right, bottom, lower
// left, upper left, middle).
const A: u8 = 1;
const B: u8 = 1 << 1;
const C: u8 = 1 << 2;
const D: u8 = 1 << 3;
const E: u8 = 1 << 4;
const F: u8 = 1 << 5;
const G: u8 = 1 << 6;

fn segments(c: char) -> Option<u8> {
    Some(match c {
        '0' | 'O' | 'D' => A | B | C | D | E | F,
        '1' => B | C,
        '2' | 'Z' | 'z' => A | B | D | E | G,
        '3' => A | B | C | D | G,
        '4' => B | C | F | G,
        '5' | 'S' | 's' => A | C | D | F | G,
        '6' => A | C | D | E | F | G,
        '7' => A | B | C,
        '8' | 'B' => A | B | C | D | E | F | G,
        '9' | 'g' => A | B | C | D | F | G,
        'A' | 'a' => A | B | C | E | F | G,
        'b' => C | D | E | F | G,
        'C' => A | D | E | F,
        'c' => D | E | G,
        'd' => B | C | D | E | G,
        'E' | 'e' => A | D | E | F | G,
        'F' | 'f' => A | E | F | G,
        'G' => A | C | D | E | F,
        'H' => B | C | E | F | G,
        'h' => C | E | F | G,
        'I' | 'i' | 'l' => E | F,
        'J' | 'j' => B | C | D | E,
        'L' => D | E | F,
        'N' | 'n' | 'M' | 'm' => C | E | G,
        'o' => C | D | E | G,
        'P' | 'p' => A | B | E | F | G,
        'q' | 'Q' => A | B | C | F | G,
        'R' | 'r' => E | G,
        'T' | 't' => D | E | F | G,
        'U' | 'V' | 'W' => B | C | D | E | F,
        'u' | 'v' | 'w' => C | D | E,
        'Y' | 'y' => B | C | D | F | G,
        '-' => G,
        '_' => D,
        '°' => A | B | F | G,
        ' ' => 0,
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentStyle {
    Classic,
    ClassicMini,
    Modern,
    ModernMini,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    Light,
    Regular,
    Bold,
}

/// Procedural seven-segment face.
#[derive(Debug, Clone)]
pub struct SegmentFace {
    id: String,
    style: SegmentStyle,
    italic: bool,
    /// Digit cell width over height.
    aspect: f32,
    /// Stroke thickness over height.
    thickness: f32,
}

const SPACING: f32 = 0.16;
const DOT_ADVANCE: f32 = 0.26;
const COLON_ADVANCE: f32 = 0.3;
const SLANT: f32 = 0.12;
const SUPERSAMPLE: u32 = 4;

type Poly = Vec<(f32, f32)>;

impl SegmentFace {
    pub fn new(style: SegmentStyle, weight: Weight, italic: bool) -> Self {
        let family = match style {
            SegmentStyle::Classic => "Classic",
            SegmentStyle::ClassicMini => "ClassicMini",
            SegmentStyle::Modern => "Modern",
            SegmentStyle::ModernMini => "ModernMini",
        };
        let weight_name = match weight {
            Weight::Light => "Light",
            Weight::Regular => "Regular",
            Weight::Bold => "Bold",
        };
        let id = format!(
            "DSEG7{family}-{weight_name}{}",
            if italic { "Italic" } else { "" }
        );
        let mini = matches!(style, SegmentStyle::ClassicMini | SegmentStyle::ModernMini);
        Self {
            id,
            style,
            italic,
            aspect: if mini { 0.46 } else { 0.56 },
            thickness: match weight {
                Weight::Light => 0.07,
                Weight::Regular => 0.1,
                Weight::Bold => 0.14,
            } * if mini { 0.85 } else { 1.0 },
        }
    }

    fn advance(&self, c: char) -> Result<f32, DisplayError> {
        match c {
            '.' | ',' => Ok(DOT_ADVANCE),
            ':' => Ok(COLON_ADVANCE),
            c if segments(c).is_some() => Ok(self.aspect + SPACING),
            c => Err(DisplayError::UnsupportedCharacter {
                ch: c,
                font: self.id.clone(),
            }),
        }
    }

    /// Layout width in em units, without the trailing gap and before slant.
    fn text_width(&self, text: &str) -> Result<f32, DisplayError> {
        let mut w = 0.0;
        for c in text.chars() {
            w += self.advance(c)?;
        }
        Ok((w - SPACING).max(0.0))
    }

    fn slant(&self) -> f32 {
        if self.italic {
            SLANT
        } else {
            0.0
        }
    }

    fn segment_poly(&self, p: (f32, f32), q: (f32, f32), t: f32) -> Poly {
        let len = ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
        let dir = ((q.0 - p.0) / len, (q.1 - p.1) / len);
        let perp = (-dir.1, dir.0);
        let h = t / 2.0;
        let at = |base: (f32, f32), along: f32, across: f32| {
            (
                base.0 + dir.0 * along + perp.0 * across,
                base.1 + dir.1 * along + perp.1 * across,
            )
        };
        match self.style {
            SegmentStyle::Classic | SegmentStyle::ClassicMini => {
                let gap = 0.12 * t;
                let (p, q) = (at(p, gap, 0.0), at(q, -gap, 0.0));
                vec![
                    p,
                    at(p, h, h),
                    at(q, -h, h),
                    q,
                    at(q, -h, -h),
                    at(p, h, -h),
                ]
            }
            SegmentStyle::Modern | SegmentStyle::ModernMini => {
                let gap = h + 0.18 * t;
                let (p, q) = (at(p, gap, 0.0), at(q, -gap, 0.0));
                let bevel = 0.25 * t;
                vec![
                    at(p, 0.0, h - bevel),
                    at(p, bevel, h),
                    at(q, -bevel, h),
                    at(q, 0.0, h - bevel),
                    at(q, 0.0, -h + bevel),
                    at(q, -bevel, -h),
                    at(p, bevel, -h),
                    at(p, 0.0, -h + bevel),
                ]
            }
        }
    }

    /// Polygons for one glyph with its cell origin at `x0`, in em units with
    /// y pointing down and the cell spanning `[0, 1]` vertically.
    fn glyph_polys(&self, c: char, x0: f32) -> Vec<Poly> {
        let t = self.thickness;
        let square = |cx: f32, cy: f32| {
            let h = t * 0.6;
            vec![(cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)]
        };
        match c {
            '.' | ',' => return vec![square(x0 + DOT_ADVANCE / 2.0 - SPACING / 2.0, 1.0 - t * 0.6)],
            ':' => {
                let cx = x0 + COLON_ADVANCE / 2.0 - SPACING / 2.0;
                return vec![square(cx, 0.3), square(cx, 0.7)];
            }
            _ => {}
        }
        let bits = segments(c).unwrap_or(0);
        let (xl, xr) = (x0 + t / 2.0, x0 + self.aspect - t / 2.0);
        let (yt, ym, yb) = (t / 2.0, 0.5, 1.0 - t / 2.0);
        let lines = [
            (A, (xl, yt), (xr, yt)),
            (B, (xr, yt), (xr, ym)),
            (C, (xr, ym), (xr, yb)),
            (D, (xl, yb), (xr, yb)),
            (E, (xl, ym), (xl, yb)),
            (F, (xl, yt), (xl, ym)),
            (G, (xl, ym), (xr, ym)),
        ];
        lines
            .iter()
            .filter(|(bit, _, _)| bits & bit != 0)
            .map(|&(_, p, q)| self.segment_poly(p, q, t))
            .collect()
    }
}

fn inside_convex(poly: &[(f32, f32)], x: f32, y: f32) -> bool {
    let mut sign = 0.0f32;
    for i in 0..poly.len() {
        let (ax, ay) = poly[i];
        let (bx, by) = poly[(i + 1) % poly.len()];
        let cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax);
        if cross != 0.0 {
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
    }
    true
}

fn fill_poly(cov: &mut Coverage, poly: &[(f32, f32)]) {
    let (mut x0, mut y0, mut x1, mut y1) = (f32::MAX, f32::MAX, f32::MIN, f32::MIN);
    for &(x, y) in poly {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let px0 = x0.floor().max(0.0) as u32;
    let py0 = y0.floor().max(0.0) as u32;
    let px1 = (x1.ceil().max(0.0) as u32).min(cov.width);
    let py1 = (y1.ceil().max(0.0) as u32).min(cov.height);
    let n = SUPERSAMPLE * SUPERSAMPLE;
    for py in py0..py1 {
        for px in px0..px1 {
            let mut hits = 0;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let x = px as f32 + (sx as f32 + 0.5) / SUPERSAMPLE as f32;
                    let y = py as f32 + (sy as f32 + 0.5) / SUPERSAMPLE as f32;
                    if inside_convex(poly, x, y) {
                        hits += 1;
                    }
                }
            }
            if hits > 0 {
                cov.max_at(px, py, hits as f32 / n as f32);
            }
        }
    }
}

impl Face for SegmentFace {
    fn id(&self) -> &str {
        &self.id
    }

    fn measure(&self, text: &str, size: u32) -> Result<(u32, u32), DisplayError> {
        let s = size as f32;
        let w = (self.text_width(text)? + self.slant()) * s;
        Ok((w.ceil() as u32, size))
    }

    fn rasterize(&self, text: &str, size: u32) -> Result<Coverage, DisplayError> {
        let (w, h) = self.measure(text, size)?;
        let mut cov = Coverage::new(w, h);
        let s = size as f32;
        let slant = self.slant();
        let mut x = 0.0;
        for c in text.chars() {
            for poly in self.glyph_polys(c, x) {
                // Shear so the glyph bottom stays at its cell origin.
                let px: Poly = poly
                    .iter()
                    .map(|&(gx, gy)| ((gx + slant * (1.0 - gy)) * s, gy * s))
                    .collect();
                fill_poly(&mut cov, &px);
            }
            x += self.advance(c)?;
        }
        Ok(cov)
    }
}

/// A TrueType/OpenType face loaded from disk.
pub struct TtfFace {
    id: String,
    font: FontVec,
}

impl fmt::Debug for TtfFace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TtfFace").field("id", &self.id).finish()
    }
}

impl TtfFace {
    pub fn load(path: &Path) -> Result<Self, DisplayError> {
        let bytes = fs::read(path).map_err(|e| DisplayError::io(path, e))?;
        let font = FontVec::try_from_vec(bytes)
            .map_err(|e| DisplayError::Font(format!("{}: {e}", path.display())))?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self { id, font })
    }

    /// Outlined glyphs positioned on a baseline at the origin.
    fn layout(&self, text: &str, size: u32) -> Result<Vec<ab_glyph::OutlinedGlyph>, DisplayError> {
        let scaled = self.font.as_scaled(PxScale::from(size as f32));
        let mut caret = 0.0f32;
        let mut prev = None;
        let mut out = Vec::new();
        for c in text.chars() {
            let id = self.font.glyph_id(c);
            if id.0 == 0 && !c.is_whitespace() {
                return Err(DisplayError::UnsupportedCharacter {
                    ch: c,
                    font: self.id.clone(),
                });
            }
            if let Some(p) = prev {
                caret += scaled.kern(p, id);
            }
            let glyph = id.with_scale_and_position(size as f32, ab_glyph::point(caret, 0.0));
            caret += scaled.h_advance(id);
            prev = Some(id);
            if let Some(o) = self.font.outline_glyph(glyph) {
                out.push(o);
            }
        }
        Ok(out)
    }

    fn ink_bounds(glyphs: &[ab_glyph::OutlinedGlyph]) -> Option<ab_glyph::Rect> {
        glyphs.iter().map(|g| g.px_bounds()).reduce(|a, b| ab_glyph::Rect {
            min: ab_glyph::point(a.min.x.min(b.min.x), a.min.y.min(b.min.y)),
            max: ab_glyph::point(a.max.x.max(b.max.x), a.max.y.max(b.max.y)),
        })
    }
}

impl Face for TtfFace {
    fn id(&self) -> &str {
        &self.id
    }

    fn measure(&self, text: &str, size: u32) -> Result<(u32, u32), DisplayError> {
        let glyphs = self.layout(text, size)?;
        Ok(Self::ink_bounds(&glyphs).map_or((0, 0), |r| {
            ((r.max.x - r.min.x).ceil() as u32, (r.max.y - r.min.y).ceil() as u32)
        }))
    }

    fn rasterize(&self, text: &str, size: u32) -> Result<Coverage, DisplayError> {
        let glyphs = self.layout(text, size)?;
        let Some(bounds) = Self::ink_bounds(&glyphs) else {
            return Ok(Coverage::new(0, 0));
        };
        let w = (bounds.max.x - bounds.min.x).ceil() as u32;
        let h = (bounds.max.y - bounds.min.y).ceil() as u32;
        let mut cov = Coverage::new(w, h);
        for g in &glyphs {
            let b = g.px_bounds();
            let ox = (b.min.x - bounds.min.x) as i64;
            let oy = (b.min.y - bounds.min.y) as i64;
            g.draw(|x, y, c| {
                let (px, py) = (ox + i64::from(x), oy + i64::from(y));
                if px >= 0 && py >= 0 && (px as u32) < w && (py as u32) < h {
                    cov.max_at(px as u32, py as u32, c);
                }
            });
        }
        Ok(cov)
    }
}

/// The faces a display generator samples from.
#[derive(Clone)]
pub struct FontSet {
    faces: Vec<Arc<dyn Face>>,
}

impl fmt::Debug for FontSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.faces.iter().map(|x| x.id())).finish()
    }
}

impl FontSet {
    /// The 24 built-in seven-segment faces.
    pub fn builtin() -> Self {
        let mut faces: Vec<Arc<dyn Face>> = Vec::with_capacity(24);
        for style in [
            SegmentStyle::Classic,
            SegmentStyle::ClassicMini,
            SegmentStyle::Modern,
            SegmentStyle::ModernMini,
        ] {
            for weight in [Weight::Light, Weight::Regular, Weight::Bold] {
                for italic in [false, true] {
                    faces.push(Arc::new(SegmentFace::new(style, weight, italic)));
                }
            }
        }
        Self { faces }
    }

    /// Every `.ttf`/`.otf` in `dir`, sorted by file name.
    pub fn from_dir(dir: &Path) -> Result<Self, DisplayError> {
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(|e| DisplayError::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("ttf") || e.eq_ignore_ascii_case("otf"))
            })
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(DisplayError::Font(format!("no font files in {}", dir.display())));
        }
        let faces = paths
            .iter()
            .map(|p| TtfFace::load(p).map(|f| Arc::new(f) as Arc<dyn Face>))
            .collect::<Result<_, _>>()?;
        Ok(Self { faces })
    }

    pub fn from_faces(faces: Vec<Arc<dyn Face>>) -> Self {
        Self { faces }
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn faces(&self) -> &[Arc<dyn Face>] {
        &self.faces
    }

    pub fn get(&self, id: &str) -> Result<&Arc<dyn Face>, DisplayError> {
        self.faces
            .iter()
            .find(|f| f.id() == id)
            .ok_or_else(|| DisplayError::UnknownFont(id.to_owned()))
    }

    pub fn choose<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> &Arc<dyn Face> {
        &self.faces[rng.gen_range(0..self.faces.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_set_has_24_distinct_faces() {
        let set = FontSet::builtin();
        assert_eq!(set.len(), 24);
        let mut ids: Vec<_> = set.faces().iter().map(|f| f.id().to_owned()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 24);
        assert!(set.get("DSEG7Classic-BoldItalic").is_ok());
        assert!(matches!(set.get("Arial"), Err(DisplayError::UnknownFont(_))));
    }

    #[test]
    fn eight_lights_more_than_one() {
        let face = SegmentFace::new(SegmentStyle::Classic, Weight::Regular, false);
        let ink = |s| face.rasterize(s, 40).unwrap().data.iter().sum::<f32>();
        assert!(ink("8") > 2.0 * ink("1"));
        assert_eq!(ink(" "), 0.0);
    }

    #[test]
    fn measure_matches_raster_and_scales() {
        for face in FontSet::builtin().faces() {
            let (w, h) = face.measure("-12.5", 30).unwrap();
            let cov = face.rasterize("-12.5", 30).unwrap();
            assert_eq!((cov.width, cov.height), (w, h));
            let (w2, _) = face.measure("-12.5", 60).unwrap();
            assert!(w2 >= 2 * w - 2 && w2 <= 2 * w + 2, "{}", face.id());
        }
    }

    #[test]
    fn punctuation_is_narrow() {
        let face = SegmentFace::new(SegmentStyle::Modern, Weight::Bold, false);
        let (w_digits, _) = face.measure("1757", 20).unwrap();
        let (w_clock, _) = face.measure("17:57", 20).unwrap();
        assert!(w_clock - w_digits < 8);
    }

    #[test]
    fn unsupported_characters_are_reported() {
        let face = SegmentFace::new(SegmentStyle::Classic, Weight::Light, true);
        assert!(matches!(
            face.measure("1k", 10),
            Err(DisplayError::UnsupportedCharacter { ch: 'k', .. })
        ));
    }

    #[test]
    fn ttf_faces_from_system_fonts() {
        let dir = Path::new("/usr/share/fonts/truetype/dejavu");
        if !dir.join("DejaVuSans.ttf").exists() {
            eprintln!("skipping: DejaVu fonts not installed");
            return;
        }
        let tmp = tempfile::tempdir().unwrap();
        fs::copy(dir.join("DejaVuSans.ttf"), tmp.path().join("DejaVuSans.ttf")).unwrap();
        let set = FontSet::from_dir(tmp.path()).unwrap();
        let face = set.get("DejaVuSans").unwrap();
        let (w, h) = face.measure("30", 32).unwrap();
        let cov = face.rasterize("30", 32).unwrap();
        assert_eq!((cov.width, cov.height), (w, h));
        assert!(cov.data.iter().any(|&c| c >= 1.0));
    }

    #[test]
    fn empty_font_dir_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(FontSet::from_dir(tmp.path()), Err(DisplayError::Font(_))));
    }
}
