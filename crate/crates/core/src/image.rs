//! RGB images with channel values in `[0, 1]` and 8-bit PNG I/O.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major `height`×`width`×3 image.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height * 3 {
            return Err(Error::dim(format!(
                "{width}x{height} RGB image needs {} values, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        Self {
            width,
            height,
            data: rgb.iter().copied().cycle().take(width * height * 3).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Channel mean per pixel.
    pub fn grayscale(&self) -> Vec<f64> {
        self.data.chunks(3).map(|p| (p[0] + p[1] + p[2]) / 3.0).collect()
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| f64::from(b) / 255.0).collect())
    }

    /// Values rounded to the nearest 8-bit level, as a PNG round trip would.
    pub fn quantized(&self) -> Self {
        Self::from_u8(self.width, self.height, &self.to_u8()).expect("same size")
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(Error::io(path))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let fail = |e: png::EncodingError| Error::ingest(path, e.to_string());
        let mut writer = enc.write_header().map_err(fail)?;
        writer.write_image_data(&self.to_u8()).map_err(fail)?;
        writer.finish().map_err(fail)
    }

    /// Reads 8- or 16-bit grayscale, RGB or RGBA PNGs; alpha is dropped.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(Error::io(path))?;
        let mut dec = png::Decoder::new(BufReader::new(file));
        dec.set_transformations(png::Transformations::EXPAND);
        let fail = |e: png::DecodingError| Error::ingest(path, e.to_string());
        let mut reader = dec.read_info().map_err(fail)?;
        let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| Error::ingest(path, "image too large"))?];
        let info = reader.next_frame(&mut buf).map_err(fail)?;
        let (w, h) = (info.width as usize, info.height as usize);
        let channels = info.color_type.samples();
        let wide = info.bit_depth == png::BitDepth::Sixteen;
        let sample = |i: usize| -> f64 {
            if wide {
                f64::from(u16::from_be_bytes([buf[2 * i], buf[2 * i + 1]])) / 65535.0
            } else {
                f64::from(buf[i]) / 255.0
            }
        };
        let mut data = Vec::with_capacity(w * h * 3);
        for p in 0..w * h {
            let base = p * channels;
            match channels {
                1 | 2 => {
                    let v = sample(base);
                    data.extend([v, v, v]);
                }
                3 | 4 => data.extend([sample(base), sample(base + 1), sample(base + 2)]),
                n => return Err(Error::ingest(path, format!("unsupported channel count {n}"))),
            }
        }
        Self::new(w, h, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_exact_for_8_bit_levels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let bytes: Vec<u8> = (0..4 * 3 * 3).map(|i| (i * 7 % 256) as u8).collect();
        let img = Image::from_u8(4, 3, &bytes).unwrap();
        img.save_png(&path).unwrap();
        let back = Image::load_png(&path).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn rgba_drops_alpha() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgba.png");
        let file = File::create(&path).unwrap();
        let mut enc = png::Encoder::new(BufWriter::new(file), 1, 1);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        enc.write_header().unwrap().write_image_data(&[255, 0, 51, 10]).unwrap();
        let img = Image::load_png(&path).unwrap();
        assert_eq!(img.pixel(0, 0), [1.0, 0.0, 0.2]);
    }

    #[test]
    fn missing_file_names_path() {
        let err = Image::load_png("/nonexistent/x.png").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.png"));
    }

    #[test]
    fn size_validation() {
        assert!(Image::new(2, 2, vec![0.0; 11]).is_err());
        assert_eq!(Image::filled(2, 1, [1.0, 0.5, 0.0]).data(), &[1.0, 0.5, 0.0, 1.0, 0.5, 0.0]);
    }
}
