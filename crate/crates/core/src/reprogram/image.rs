//! Program images and the two input-combination schemes.
//!
//! Images are stored row-major with interleaved channels (`H × W × C`) and
//! pixel values in `[−1, 1]`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::network::{content_lines, format_row, parse_reals};

#[derive(Clone, Debug, PartialEq)]
pub struct ProgramImage {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl ProgramImage {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != height * width * channels {
            return Err(Error::DimensionMismatch {
                expected: height * width * channels,
                got: pixels.len(),
            });
        }
        if let Some(v) = pixels.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("pixel value {v} outside [-1, 1]")));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Builds an image pixel by pixel from `f(row, col, channel)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    pixels.push(f(r, c, ch));
                }
            }
        }
        Self::new(height, width, channels, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.pixels[(row * self.width + col) * self.channels + ch]
    }

    fn set(&mut self, row: usize, col: usize, ch: usize, v: f64) {
        self.pixels[(row * self.width + col) * self.channels + ch] = v;
    }

    /// Plain text: header `H W C`, then one line of `W·C` values per row.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {} {}", self.height, self.width, self.channels).unwrap();
        let stride = self.width * self.channels;
        for r in 0..self.height {
            s.push_str(&format_row(&self.pixels[r * stride..(r + 1) * stride]));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(0, "missing header"))?;
        let dims = parse_reals::<usize>(ln, header)?;
        let [h, w, c] = dims[..] else {
            return Err(Error::parse(ln, "header must be `H W C`"));
        };
        let mut pixels = Vec::with_capacity(h * w * c);
        for (ln, line) in lines {
            pixels.extend(parse_reals::<f64>(ln, line)?);
        }
        Self::new(h, w, c, pixels)
    }

    /// Binary 8-bit PPM (P6); values map linearly from `[−1, 1]` to `[0, 255]`
    /// rounding half up. `comment` lines are written after the magic number.
    pub fn to_ppm(&self, comment: &str) -> Result<Vec<u8>> {
        if self.channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "PPM needs 3 channels, image has {}",
                self.channels
            )));
        }
        let mut out = b"P6\n".to_vec();
        for line in comment.lines() {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
        out.extend_from_slice(format!("{} {}\n255\n", self.width, self.height).as_bytes());
        out.extend(self.pixels.iter().map(|&v| to_byte(v)));
        Ok(out)
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::parse(0, "truncated PPM header"));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if fields[0] != "P6" {
            return Err(Error::parse(0, "not a binary PPM (P6)"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(0, format!("bad PPM field `{s}`")));
        let (w, h, max) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if max != 255 {
            return Err(Error::parse(0, "only 8-bit PPM is supported"));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let raster = bytes.get(pos..pos + w * h * 3).ok_or_else(|| Error::parse(0, "truncated PPM raster"))?;
        Self::new(h, w, 3, raster.iter().map(|&b| from_byte(b)).collect())
    }
}

fn to_byte(v: f64) -> u8 {
    ((v + 1.0) * 0.5 * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

fn from_byte(b: u8) -> f64 {
    b as f64 / 255.0 * 2.0 - 1.0
}

/// Bilinear resize with pixel centres at half-integers and edge clamping.
pub fn resize_bilinear(img: &ProgramImage, height: usize, width: usize) -> ProgramImage {
    let mut out = ProgramImage {
        height,
        width,
        channels: img.channels,
        pixels: vec![0.0; height * width * img.channels],
    };
    if img.height == 0 || img.width == 0 {
        return out;
    }
    let axis = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        let s = ((dst as f64 + 0.5) * (src_len as f64 / dst_len as f64) - 0.5)
            .clamp(0.0, (src_len - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, s - i0 as f64)
    };
    for r in 0..height {
        let (r0, r1, fr) = axis(r, img.height, height);
        for c in 0..width {
            let (c0, c1, fc) = axis(c, img.width, width);
            for ch in 0..img.channels {
                let top = (1.0 - fc) * img.get(r0, c0, ch) + fc * img.get(r0, c1, ch);
                let bottom = (1.0 - fc) * img.get(r1, c0, ch) + fc * img.get(r1, c1, ch);
                let v = (1.0 - fr) * top + fr * bottom;
                out.set(r, c, ch, v.clamp(-1.0, 1.0));
            }
        }
    }
    out
}

/// Side of the pasted image for scheme 1: `round(r · width)`, half away from zero.
pub fn scheme1_side(width: usize, r: f64) -> usize {
    (r * width as f64).round() as usize
}

fn check_channels(program: &ProgramImage, input: &ProgramImage) -> Result<()> {
    if program.channels == input.channels {
        Ok(())
    } else {
        Err(Error::ChannelMismatch {
            program: program.channels,
            input: input.channels,
        })
    }
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Scheme 1: resize the input to side `round(r·W)` and paste it over the
/// program with top-left offset `floor((W − side)/2)`.
pub fn scheme1_combine(program: &ProgramImage, input: &ProgramImage, r: f64) -> Result<ProgramImage> {
    check_channels(program, input)?;
    check_fraction("r", r)?;
    if program.height != program.width {
        return Err(Error::InvalidArgument("scheme 1 needs a square program".into()));
    }
    let side = scheme1_side(program.width, r);
    let mut out = program.clone();
    if side == 0 {
        return Ok(out);
    }
    let scaled = resize_bilinear(input, side, side);
    let offset = (program.width - side) / 2;
    for row in 0..side {
        for col in 0..side {
            for ch in 0..program.channels {
                out.set(offset + row, offset + col, ch, scaled.get(row, col, ch));
            }
        }
    }
    Ok(out)
}

/// Scheme 2: resize the input to the program's shape and blend `v·I + (1−v)·P`.
pub fn scheme2_combine(program: &ProgramImage, input: &ProgramImage, v: f64) -> Result<ProgramImage> {
    check_channels(program, input)?;
    check_fraction("v", v)?;
    let scaled = resize_bilinear(input, program.height, program.width);
    let pixels = scaled
        .pixels
        .iter()
        .zip(&program.pixels)
        .map(|(i, p)| v * i + (1.0 - v) * p)
        .collect();
    Ok(ProgramImage { pixels, ..program.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(h: usize, w: usize, c: usize, phase: f64) -> ProgramImage {
        ProgramImage::from_fn(h, w, c, |r, col, ch| {
            ((r as f64 * 0.37 + col as f64 * 0.11 + ch as f64 * 1.3 + phase).sin()) * 0.9
        })
        .unwrap()
    }

    #[test]
    fn figure_one_paste_side() {
        assert_eq!(scheme1_side(224, 2f64.powf(-20.0 / 9.0)), 48);
    }

    #[test]
    fn scheme1_extremes() {
        let p = pattern(16, 16, 3, 0.0);
        let i = pattern(5, 5, 3, 2.0);
        assert_eq!(scheme1_combine(&p, &i, 0.0).unwrap(), p);
        let full = scheme1_combine(&p, &i, 1.0).unwrap();
        assert_eq!(full, resize_bilinear(&i, 16, 16));
    }

    #[test]
    fn scheme1_pastes_centred() {
        let p = ProgramImage::filled(10, 10, 1, -1.0).unwrap();
        let i = ProgramImage::filled(4, 4, 1, 1.0).unwrap();
        let out = scheme1_combine(&p, &i, 0.3).unwrap();
        // side 3, offset 3
        for r in 0..10 {
            for c in 0..10 {
                let inside = (3..6).contains(&r) && (3..6).contains(&c);
                assert_eq!(out.get(r, c, 0), if inside { 1.0 } else { -1.0 });
            }
        }
    }

    #[test]
    fn scheme2_extremes_are_exact() {
        let p = pattern(12, 12, 3, 0.5);
        let i = pattern(7, 7, 3, 1.5);
        assert_eq!(scheme2_combine(&p, &i, 0.0).unwrap(), p);
        assert_eq!(scheme2_combine(&p, &i, 1.0).unwrap(), resize_bilinear(&i, 12, 12));
    }

    #[test]
    fn scheme2_matches_direct_blend() {
        let v = 2f64.powf(-40.0 / 9.0);
        assert!((v - 0.046).abs() < 5e-4);
        let p = pattern(9, 9, 3, 0.1);
        let i = pattern(9, 9, 3, 0.7);
        let out = scheme2_combine(&p, &i, v).unwrap();
        for (k, o) in out.pixels().iter().enumerate() {
            let want = v * i.pixels()[k] + (1.0 - v) * p.pixels()[k];
            assert!((o - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn channel_mismatch() {
        let p = pattern(4, 4, 3, 0.0);
        let i = pattern(4, 4, 1, 0.0);
        assert!(matches!(scheme1_combine(&p, &i, 0.5), Err(Error::ChannelMismatch { .. })));
        assert!(matches!(scheme2_combine(&p, &i, 0.5), Err(Error::ChannelMismatch { .. })));
    }

    #[test]
    fn identity_resize_is_exact() {
        let p = pattern(6, 8, 2, 0.3);
        assert_eq!(resize_bilinear(&p, 6, 8), p);
    }

    #[test]
    fn upsample_interpolates_between_neighbours() {
        let img = ProgramImage::new(1, 2, 1, vec![-1.0, 1.0]).unwrap();
        let up = resize_bilinear(&img, 1, 4);
        // centres at -0.25, 0.25, 0.75, 1.25 in source pixels
        assert_eq!(up.pixels(), &[-1.0, -0.5, 0.5, 1.0]);
    }

    #[test]
    fn text_and_ppm_round_trips() {
        let p = pattern(3, 4, 3, 0.9);
        assert_eq!(ProgramImage::from_text(&p.to_text()).unwrap(), p);
        let bytes = p.to_ppm("seed = 1\ncommand = test").unwrap();
        let back = ProgramImage::from_ppm(&bytes).unwrap();
        assert_eq!((back.height(), back.width(), back.channels()), (3, 4, 3));
        for (a, b) in p.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() <= 1.0 / 255.0 + 1e-12);
        }
        assert_eq!(to_byte(-1.0), 0);
        assert_eq!(to_byte(1.0), 255);
        assert_eq!(to_byte(0.0), 128);
    }
}
