//! Binary PGM images and key/value map metadata.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::geometry::Pose2D;
use crate::map::{CellState, MapError, OccupancyGrid};

/// Decoded greyscale image, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

fn header_tokens(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize), MapError> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'#' {
            i += 1;
        }
        if start == i {
            return Err(MapError::Pgm(format!(
                "header truncated after {} of {count} fields",
                tokens.len()
            )));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    if i >= bytes.len() || !bytes[i].is_ascii_whitespace() {
        return Err(MapError::Pgm("missing separator before raster".into()));
    }
    Ok((tokens, i + 1))
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Pgm, MapError> {
    let (tokens, offset) = header_tokens(bytes, 4)?;
    if tokens[0] != "P5" {
        return Err(MapError::Pgm(format!("magic: expected P5, found {:?}", tokens[0])));
    }
    let field = |idx: usize, name: &str| -> Result<usize, MapError> {
        tokens[idx]
            .parse::<usize>()
            .map_err(|_| MapError::Pgm(format!("{name}: not an integer: {:?}", tokens[idx])))
    };
    let width = field(1, "width")?;
    let height = field(2, "height")?;
    let maxval = field(3, "maxval")?;
    if maxval != 255 {
        return Err(MapError::Pgm(format!("maxval: expected 255, found {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(MapError::Pgm(format!("width/height: empty image {width}x{height}")));
    }
    let raster = &bytes[offset..];
    if raster.len() < width * height {
        return Err(MapError::DimensionMismatch {
            expected: width * height,
            found: raster.len(),
        });
    }
    Ok(Pgm {
        width,
        height,
        pixels: raster[..width * height].to_vec(),
    })
}

pub fn encode_pgm8(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// 16-bit big-endian P5 (maxval 65535).
pub fn encode_pgm16(width: usize, height: usize, pixels: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for p in pixels {
        out.extend_from_slice(&p.to_be_bytes());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapMetadata {
    pub image: PathBuf,
    pub resolution: f64,
    pub origin: Pose2D,
    pub negate: bool,
    pub occupied_thresh: f64,
    pub free_thresh: f64,
}

impl MapMetadata {
    pub fn parse(text: &str) -> Result<Self, MapError> {
        let mut image = None;
        let mut resolution = None;
        let mut origin = None;
        let mut negate = None;
        let mut occ = None;
        let mut free = None;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            let Some((key, value)) = line.split_once(':') else {
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| -> Result<f64, MapError> {
                v.parse::<f64>().map_err(|_| MapError::BadValue {
                    key: key.to_string(),
                    value: v.to_string(),
                })
            };
            match key {
                "image" => image = Some(PathBuf::from(value)),
                "resolution" => resolution = Some(num(value)?),
                "origin" => {
                    let parts: Vec<&str> = value
                        .trim_matches(|c| c == '[' || c == ']')
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .collect();
                    if parts.len() != 3 {
                        return Err(MapError::BadValue {
                            key: "origin".into(),
                            value: value.to_string(),
                        });
                    }
                    origin = Some(Pose2D::new(num(parts[0])?, num(parts[1])?, num(parts[2])?));
                }
                "negate" => {
                    negate = Some(match value {
                        "0" | "false" => false,
                        "1" | "true" => true,
                        _ => {
                            return Err(MapError::BadValue {
                                key: "negate".into(),
                                value: value.to_string(),
                            })
                        }
                    })
                }
                "occupied_thresh" => occ = Some(num(value)?),
                "free_thresh" => free = Some(num(value)?),
                _ => {}
            }
        }
        let meta = Self {
            image: image.ok_or(MapError::MissingKey("image"))?,
            resolution: resolution.ok_or(MapError::MissingKey("resolution"))?,
            origin: origin.ok_or(MapError::MissingKey("origin"))?,
            negate: negate.ok_or(MapError::MissingKey("negate"))?,
            occupied_thresh: occ.ok_or(MapError::MissingKey("occupied_thresh"))?,
            free_thresh: free.ok_or(MapError::MissingKey("free_thresh"))?,
        };
        if meta.resolution.is_nan() || meta.resolution <= 0.0 {
            return Err(MapError::BadValue {
                key: "resolution".into(),
                value: meta.resolution.to_string(),
            });
        }
        Ok(meta)
    }

    pub fn to_text(&self) -> String {
        format!(
            "image: {}\nresolution: {}\norigin: [{}, {}, {}]\nnegate: {}\noccupied_thresh: {}\nfree_thresh: {}\n",
            self.image.display(),
            self.resolution,
            self.origin.x,
            self.origin.y,
            self.origin.theta,
            u8::from(self.negate),
            self.occupied_thresh,
            self.free_thresh
        )
    }

    pub fn classify(&self, pixel: u8) -> CellState {
        let occ = if self.negate {
            pixel as f64 / 255.0
        } else {
            (255.0 - pixel as f64) / 255.0
        };
        if occ > self.occupied_thresh {
            CellState::Occupied
        } else if occ < self.free_thresh {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, MapError> {
    fs::read(path).map_err(|source| MapError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn grid_from_image(pgm: &Pgm, meta: &MapMetadata) -> Result<OccupancyGrid, MapError> {
    let (w, h) = (pgm.width, pgm.height);
    let mut cells = vec![CellState::Unknown; w * h];
    for row in 0..h {
        let cy = h - 1 - row;
        for cx in 0..w {
            cells[cy * w + cx] = meta.classify(pgm.pixels[row * w + cx]);
        }
    }
    OccupancyGrid::from_cells(w, h, meta.resolution, meta.origin, cells)
}

/// Loads a map from an explicit image path and metadata path.
pub fn load_map(image_path: &Path, meta_path: &Path) -> Result<OccupancyGrid, MapError> {
    let text = String::from_utf8(read(meta_path)?)
        .map_err(|_| MapError::Pgm("metadata is not UTF-8".into()))?;
    let meta = MapMetadata::parse(&text)?;
    let pgm = parse_pgm(&read(image_path)?)?;
    grid_from_image(&pgm, &meta)
}

/// Loads a map given only the metadata file; the image path is resolved
/// relative to the metadata file's directory.
pub fn load_map_from_meta(meta_path: &Path) -> Result<OccupancyGrid, MapError> {
    let text = String::from_utf8(read(meta_path)?)
        .map_err(|_| MapError::Pgm("metadata is not UTF-8".into()))?;
    let meta = MapMetadata::parse(&text)?;
    let image = meta_path
        .parent()
        .map(|d| d.join(&meta.image))
        .unwrap_or_else(|| meta.image.clone());
    let pgm = parse_pgm(&read(&image)?)?;
    grid_from_image(&pgm, &meta)
}

pub fn pixel_for(state: CellState) -> u8 {
    match state {
        CellState::Free => 255,
        CellState::Occupied => 0,
        CellState::Unknown => 128,
    }
}

/// Writes `<image_path>` and `<meta_path>`; the metadata references the
/// image by file name.
pub fn save_map(grid: &OccupancyGrid, image_path: &Path, meta_path: &Path) -> Result<(), MapError> {
    let (w, h) = (grid.width(), grid.height());
    let mut pixels = vec![0u8; w * h];
    for cy in 0..h {
        let row = h - 1 - cy;
        for cx in 0..w {
            pixels[row * w + cx] = pixel_for(grid.get(cx, cy));
        }
    }
    let meta = MapMetadata {
        image: image_path
            .file_name()
            .map(PathBuf::from)
            .unwrap_or_else(|| image_path.to_path_buf()),
        resolution: grid.resolution(),
        origin: grid.origin(),
        negate: false,
        occupied_thresh: 0.65,
        free_thresh: 0.196,
    };
    write_file(image_path, &encode_pgm8(w, h, &pixels))?;
    write_file(meta_path, meta.to_text().as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), MapError> {
    let mut f = fs::File::create(path).map_err(|source| MapError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(bytes).map_err(|source| MapError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> MapMetadata {
        MapMetadata {
            image: "m.pgm".into(),
            resolution: 0.05,
            origin: Pose2D::default(),
            negate: false,
            occupied_thresh: 0.65,
            free_thresh: 0.196,
        }
    }

    #[test]
    fn pixel_classification() {
        let m = meta();
        assert_eq!(m.classify(0), CellState::Occupied);
        assert_eq!(m.classify(255), CellState::Free);
        assert_eq!(m.classify(128), CellState::Unknown);
        let neg = MapMetadata { negate: true, ..m };
        assert_eq!(neg.classify(255), CellState::Occupied);
        assert_eq!(neg.classify(0), CellState::Free);
    }

    #[test]
    fn header_with_comments() {
        let mut bytes = b"P5\n# made by hand\n2 1 # trailing\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255]);
        let pgm = parse_pgm(&bytes).unwrap();
        assert_eq!((pgm.width, pgm.height), (2, 1));
        assert_eq!(pgm.pixels, vec![0, 255]);
    }

    #[test]
    fn malformed_headers_name_the_field() {
        let e = parse_pgm(b"P2\n1 1\n255\n\0").unwrap_err().to_string();
        assert!(e.contains("magic"), "{e}");
        let e = parse_pgm(b"P5\nx 1\n255\n\0").unwrap_err().to_string();
        assert!(e.contains("width"), "{e}");
        let e = parse_pgm(b"P5\n1 1\n65535\n\0\0").unwrap_err().to_string();
        assert!(e.contains("maxval"), "{e}");
        assert!(matches!(
            parse_pgm(b"P5\n2 2\n255\n\0"),
            Err(MapError::DimensionMismatch { expected: 4, found: 1 })
        ));
    }

    #[test]
    fn metadata_missing_key() {
        let e = MapMetadata::parse("image: a.pgm\nresolution: 0.1\norigin: [0, 0, 0]\nnegate: 0\n")
            .unwrap_err();
        assert!(matches!(e, MapError::MissingKey("occupied_thresh")));
    }

    #[test]
    fn metadata_accepts_both_origin_forms_and_ignores_unknown_keys() {
        let base = "image: a.pgm\nresolution: 0.1\nnegate: 0\noccupied_thresh: 0.65\nfree_thresh: 0.196\nmode: trinary\n";
        let a = MapMetadata::parse(&format!("{base}origin: [1.5, -2, 0.25]\n")).unwrap();
        let b = MapMetadata::parse(&format!("{base}origin: 1.5 -2 0.25\n")).unwrap();
        assert_eq!(a.origin, Pose2D::new(1.5, -2.0, 0.25));
        assert_eq!(a, b);
    }

    #[test]
    fn image_rows_flip_to_world_y() {
        // top row occupied, bottom row free
        let pgm = Pgm { width: 1, height: 2, pixels: vec![0, 255] };
        let g = grid_from_image(&pgm, &meta()).unwrap();
        assert_eq!(g.get(0, 1), CellState::Occupied);
        assert_eq!(g.get(0, 0), CellState::Free);
    }
}
