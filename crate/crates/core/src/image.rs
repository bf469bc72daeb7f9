//! Binary PGM (P5) / PPM (P6) images, label palettes, and the data term
//! turning an image into a labeling model.
//!
//! Only `maxval = 255` is supported; `#` comments are allowed anywhere in the
//! header. Pixel features are channel values scaled to `[0, 1]` (divided by
//! 255), and palette colors live in the same space, so unary costs are
//! resolution-independent.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{grid_graph, GraphicalModel, Neighborhood};

/// An 8-bit grayscale (1 channel) or RGB (3 channel) raster image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    /// Row-major, channel-interleaved samples.
    data: Vec<u8>,
}

impl Image {
    /// Builds an image from raw interleaved samples.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "expected 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "expected {} samples for a {width}x{height}x{channels} image, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of pixels.
    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    /// The samples of pixel `p` (row-major index).
    pub fn pixel(&self, p: usize) -> &[u8] {
        &self.data[p * self.channels..(p + 1) * self.channels]
    }

    /// Raw sample buffer.
    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

/// Splits a PNM payload into header tokens and the binary sample block.
///
/// Returns (magic, width, height, maxval, data offset).
fn parse_pnm_header(bytes: &[u8]) -> Result<(&str, usize, usize, usize, usize)> {
    if bytes.len() < 2 {
        return Err(Error::parse(1, "file too short for a PNM header"));
    }
    let magic = match &bytes[..2] {
        b"P5" => "P5",
        b"P6" => "P6",
        other => {
            return Err(Error::parse(
                1,
                format!(
                    "unsupported magic '{}', expected P5 or P6",
                    String::from_utf8_lossy(other)
                ),
            ))
        }
    };

    // Scan whitespace/comment-separated integer fields after the magic.
    let mut pos = 2usize;
    let mut line = 1usize;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and comments.
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            line += 1;
                            break;
                        }
                    }
                }
                Some(b) if b.is_ascii_whitespace() => {
                    if *b == b'\n' {
                        line += 1;
                    }
                    pos += 1;
                }
                Some(_) => break,
                None => return Err(Error::parse(line, "truncated PNM header")),
            }
        }
        // Read digits.
        let start = pos;
        while let Some(b) = bytes.get(pos) {
            if b.is_ascii_digit() {
                pos += 1;
            } else {
                break;
            }
        }
        if start == pos {
            return Err(Error::parse(
                line,
                format!(
                    "expected an integer header field, found byte 0x{:02x}",
                    bytes.get(pos).copied().unwrap_or(0)
                ),
            ));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are ASCII");
        *field = text
            .parse()
            .map_err(|_| Error::parse(line, format!("header field '{text}' out of range")))?;
    }

    // Exactly one whitespace byte separates the header from the samples.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(Error::parse(
                line,
                "expected a single whitespace byte after the maxval field",
            ))
        }
    }
    Ok((magic, fields[0], fields[1], fields[2], pos))
}

/// Parses a binary PGM (P5) or PPM (P6) image with `maxval` 255.
pub fn parse_pnm(bytes: &[u8]) -> Result<Image> {
    let (magic, width, height, maxval, offset) = parse_pnm_header(bytes)?;
    if maxval != 255 {
        return Err(Error::invalid(format!(
            "unsupported maxval {maxval}, only 255 is handled"
        )));
    }
    let channels = if magic == "P5" { 1 } else { 3 };
    let expected = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| Error::invalid("image dimensions overflow"))?;
    let data = &bytes[offset..];
    if data.len() < expected {
        return Err(Error::invalid(format!(
            "sample block has {} bytes, expected {expected} for {width}x{height} '{magic}'",
            data.len()
        )));
    }
    Image::new(width, height, channels, data[..expected].to_vec())
}

/// Reads a PGM/PPM image from a file.
pub fn read_pnm_file(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path)?;
    parse_pnm(&bytes)
}

/// Serializes an image as binary P5 (1 channel) or P6 (3 channels).
pub fn pnm_bytes(image: &Image) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.data());
    out
}

/// Writes an image to a writer in binary PNM form.
pub fn write_pnm<W: Write>(image: &Image, mut writer: W) -> Result<()> {
    writer.write_all(&pnm_bytes(image))?;
    Ok(())
}

/// An ordered list of label colors in the image's sample space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    /// `num_labels x channels` colors, each component in `0..=255`.
    colors: Vec<Vec<u8>>,
}

impl Palette {
    /// Builds a palette, validating shape agreement.
    pub fn new(colors: Vec<Vec<u8>>) -> Result<Self> {
        if colors.len() < 2 {
            return Err(Error::invalid(format!(
                "a palette needs at least two colors, got {}",
                colors.len()
            )));
        }
        let channels = colors[0].len();
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "palette colors must have 1 or 3 components, got {channels}"
            )));
        }
        if colors.iter().any(|c| c.len() != channels) {
            return Err(Error::invalid(
                "palette colors disagree on the number of components",
            ));
        }
        Ok(Palette { colors })
    }

    /// Number of labels.
    pub fn num_labels(&self) -> usize {
        self.colors.len()
    }

    /// Components per color.
    pub fn channels(&self) -> usize {
        self.colors[0].len()
    }

    /// Color of label `k`.
    pub fn color(&self, k: usize) -> &[u8] {
        &self.colors[k]
    }
}

/// Parses a palette: one line per label, `channels` integers in `0..=255`.
pub fn parse_palette(text: &str, channels: usize) -> Result<Palette> {
    let mut colors = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut color = Vec::with_capacity(channels);
        for word in content.split_whitespace() {
            let value: i64 = word.parse().map_err(|_| {
                Error::parse(line, format!("expected an integer component, found '{word}'"))
            })?;
            if !(0..=255).contains(&value) {
                return Err(Error::parse(
                    line,
                    format!("component {value} out of range 0..=255"),
                ));
            }
            color.push(value as u8);
        }
        if color.len() != channels {
            return Err(Error::parse(
                line,
                format!(
                    "palette line has {} components, expected {channels}",
                    color.len()
                ),
            ));
        }
        colors.push(color);
    }
    Palette::new(colors)
}

/// Reads a palette file whose colors must match the image's channel count.
pub fn read_palette_file(path: &Path, channels: usize) -> Result<Palette> {
    let text = std::fs::read_to_string(path)?;
    parse_palette(&text, channels)
}

/// Builds a labeling model from an image: pixels become nodes on a grid
/// graph, the unary cost of label `k` at pixel `p` is the scaled L1 color
/// distance `|f(p) - color(k)|_1 / rho` with features in `[0, 1]`, and every
/// edge carries a copy of `pairwise` (`n x n`, row-major).
pub fn model_from_image(
    image: &Image,
    palette: &Palette,
    rho: f64,
    pairwise: &[f64],
    neighborhood: Neighborhood,
) -> Result<GraphicalModel> {
    if palette.channels() != image.channels() {
        return Err(Error::invalid(format!(
            "palette has {} components per color but the image has {} channels",
            palette.channels(),
            image.channels()
        )));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::invalid(format!(
            "scale rho must be positive and finite, got {rho}"
        )));
    }
    let n = palette.num_labels();
    if pairwise.len() != n * n {
        return Err(Error::invalid(format!(
            "pairwise matrix has {} entries, expected {} for {n} labels",
            pairwise.len(),
            n * n
        )));
    }

    let graph = grid_graph(image.height(), image.width(), neighborhood);
    let mut unaries = Vec::with_capacity(image.num_pixels());
    for p in 0..image.num_pixels() {
        let f = image.pixel(p);
        let mut u = Vec::with_capacity(n);
        for k in 0..n {
            let c = palette.color(k);
            let dist: f64 = f
                .iter()
                .zip(c.iter())
                .map(|(&fv, &cv)| ((fv as f64 - cv as f64) / 255.0).abs())
                .sum();
            u.push(dist / rho);
        }
        unaries.push(u);
    }
    let pairwise_copies = vec![pairwise.to_vec(); graph.num_edges()];
    GraphicalModel::new(graph, n, unaries, pairwise_copies)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::potts_matrix;

    #[test]
    fn parses_p5_with_comments() {
        let mut bytes = b"P5 # tiny\n# another comment\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 64, 128, 255]);
        let img = parse_pnm(&bytes).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 1));
        assert_eq!(img.pixel(3), &[255]);
    }

    #[test]
    fn parses_p6() {
        let mut bytes = b"P6\n1 2\n255\n".to_vec();
        bytes.extend_from_slice(&[10, 20, 30, 40, 50, 60]);
        let img = parse_pnm(&bytes).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.pixel(1), &[40, 50, 60]);
    }

    #[test]
    fn rejects_wrong_maxval() {
        let bytes = b"P5\n1 1\n65535\n\x00\x00".to_vec();
        assert!(matches!(parse_pnm(&bytes), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_truncated_samples() {
        let bytes = b"P5\n2 2\n255\n\x00\x01".to_vec();
        assert!(parse_pnm(&bytes).is_err());
    }

    #[test]
    fn rejects_unknown_magic() {
        assert!(matches!(
            parse_pnm(b"P3\n1 1\n255\n0"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn pnm_roundtrip() {
        let img = Image::new(3, 2, 3, (0..18).collect()).unwrap();
        let back = parse_pnm(&pnm_bytes(&img)).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn palette_parses_and_validates() {
        let pal = parse_palette("0 0 0\n255 128 0 # orange\n\n10 20 30\n", 3).unwrap();
        assert_eq!(pal.num_labels(), 3);
        assert_eq!(pal.color(1), &[255, 128, 0]);

        assert!(parse_palette("0 0\n1 1 1\n", 3).is_err());
        assert!(parse_palette("0 300 0\n1 1 1\n", 3).is_err());
        assert!(parse_palette("12\n", 1).is_err()); // fewer than two colors
    }

    #[test]
    fn image_model_unaries_are_scaled_l1_distances() {
        // 2x1 grayscale image, two labels at gray 0 and 255.
        let img = Image::new(2, 1, 1, vec![0, 255]).unwrap();
        let pal = Palette::new(vec![vec![0], vec![255]]).unwrap();
        let m = model_from_image(&img, &pal, 0.5, &potts_matrix(2, 0.3), Neighborhood::Four)
            .unwrap();
        assert_eq!(m.num_nodes(), 2);
        assert_eq!(m.graph().num_edges(), 1);
        // Pixel 0 is black: distance 0 to label 0, 1.0 to label 1, scaled by 1/rho.
        assert_eq!(m.unary(0), &[0.0, 2.0]);
        assert_eq!(m.unary(1), &[2.0, 0.0]);
        assert_eq!(m.pairwise(0), potts_matrix(2, 0.3).as_slice());
    }

    #[test]
    fn image_model_rejects_channel_mismatch() {
        let img = Image::new(1, 1, 1, vec![0]).unwrap();
        let pal = Palette::new(vec![vec![0, 0, 0], vec![1, 1, 1]]).unwrap();
        assert!(model_from_image(&img, &pal, 1.0, &potts_matrix(2, 1.0), Neighborhood::Four).is_err());
    }
}
