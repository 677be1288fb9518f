//! Core image model: 8-bit rasters, image codecs, bilinear resizing, and
//! the `FPP1` float-tensor container.
//!
//! [`Raster8`] is the unit every preprocessor consumes and produces: an
//! interleaved 8-bit image carrying a color-space tag. [`TensorF32`] is the
//! planar float form used once pixels are scaled to `[0, 1]` and fed to the
//! classifier.

use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

/// Quantization scope: one threshold vector pooled over all channels, or
/// one per channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantMode {
    Full,
    Plane,
}

impl fmt::Display for QuantMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantMode::Full => write!(f, "full"),
            QuantMode::Plane => write!(f, "plane"),
        }
    }
}

/// Color-space tag attached to a [`Raster8`].
///
/// The 8-bit encodings for the non-RGB spaces are fixed by the conversion
/// functions in [`crate::colorspace`]; `Quant` marks a raster whose grey
/// levels were reduced by [`crate::quantize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    Rgb,
    Gray,
    Hsv8,
    Lab8,
    YCbCr8,
    Quant { mode: QuantMode, levels: u8 },
}

impl fmt::Display for ColorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColorSpace::Rgb => write!(f, "rgb"),
            ColorSpace::Gray => write!(f, "gray"),
            ColorSpace::Hsv8 => write!(f, "hsv8"),
            ColorSpace::Lab8 => write!(f, "lab8"),
            ColorSpace::YCbCr8 => write!(f, "ycbcr8"),
            ColorSpace::Quant { mode, levels } => write!(f, "quant({mode},{levels})"),
        }
    }
}

/// Supported image file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    /// Binary PPM (`P6`), 3-channel.
    Ppm,
    /// Binary PGM (`P5`), 1-channel.
    Pgm,
}

impl ImageFormat {
    /// Guess the format from a file extension.
    pub fn from_extension(path: &Path) -> Option<ImageFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "png" => Some(ImageFormat::Png),
            "ppm" => Some(ImageFormat::Ppm),
            "pgm" => Some(ImageFormat::Pgm),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("malformed {format} file: {reason}")]
    MalformedFile { format: &'static str, reason: String },
    #[error("unsupported sample depth: {0} (only 8-bit images are supported)")]
    UnsupportedDepth(u32),
    #[error("format {format} cannot hold a {channels}-channel raster")]
    IncompatibleFormat { format: &'static str, channels: u32 },
    #[error("invalid raster dimensions {width}x{height}x{channels} for {len} samples")]
    InvalidDimensions { width: u32, height: u32, channels: u32, len: usize },
    #[error("bad tensor magic: expected \"FPP1\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("truncated tensor payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("tensor contains a non-finite value at index {0}")]
    NonFiniteValue(usize),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// An 8-bit-per-sample interleaved image with a color-space tag.
///
/// Invariants: `data.len() == width * height * channels`, dimensions are at
/// least 1×1, and `channels` is 1 or 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster8 {
    width: u32,
    height: u32,
    channels: u32,
    data: Vec<u8>,
    space: ColorSpace,
}

impl Raster8 {
    pub fn new(
        width: u32,
        height: u32,
        channels: u32,
        data: Vec<u8>,
        space: ColorSpace,
    ) -> Result<Raster8, RasterError> {
        let expected = width as usize * height as usize * channels as usize;
        if width == 0 || height == 0 || !(channels == 1 || channels == 3) || data.len() != expected
        {
            return Err(RasterError::InvalidDimensions {
                width,
                height,
                channels,
                len: data.len(),
            });
        }
        Ok(Raster8 { width, height, channels, data, space })
    }

    /// A raster with every sample set to `value`.
    pub fn constant(width: u32, height: u32, channels: u32, value: u8, space: ColorSpace) -> Raster8 {
        let len = width as usize * height as usize * channels as usize;
        Raster8::new(width, height, channels, vec![value; len], space)
            .expect("constant raster dimensions")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    /// Number of pixels (`width * height`).
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Sample at `(x, y)` in channel `c`.
    #[inline]
    pub fn sample(&self, x: u32, y: u32, c: u32) -> u8 {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y as usize * self.width as usize + x as usize) * self.channels as usize
            + c as usize]
    }

    #[inline]
    pub fn set_sample(&mut self, x: u32, y: u32, c: u32, v: u8) {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        let idx = (y as usize * self.width as usize + x as usize) * self.channels as usize
            + c as usize;
        self.data[idx] = v;
    }

    /// The samples of channel `c`, de-interleaved into a fresh vector.
    pub fn channel(&self, c: u32) -> Vec<u8> {
        assert!(c < self.channels, "channel {c} out of range");
        self.data
            .iter()
            .skip(c as usize)
            .step_by(self.channels as usize)
            .copied()
            .collect()
    }

    /// Replace this raster's color-space tag.
    pub fn with_space(mut self, space: ColorSpace) -> Raster8 {
        self.space = space;
        self
    }
}

/// Decode a PNG, PPM (`P6`), or PGM (`P5`) file.
///
/// The result is tagged [`ColorSpace::Rgb`] (3 channels) or
/// [`ColorSpace::Gray`] (1 channel). 16-bit sources are rejected with
/// [`RasterError::UnsupportedDepth`].
pub fn decode_image(bytes: &[u8], format: ImageFormat) -> Result<Raster8, RasterError> {
    match format {
        ImageFormat::Png => decode_png(bytes),
        ImageFormat::Ppm => decode_pnm(bytes, b'6'),
        ImageFormat::Pgm => decode_pnm(bytes, b'5'),
    }
}

/// Encode a raster losslessly; `decode_image(encode_image(r)) == r` up to
/// the color-space tag, which file formats do not carry.
pub fn encode_image(r: &Raster8, format: ImageFormat) -> Result<Vec<u8>, RasterError> {
    match format {
        ImageFormat::Png => encode_png(r),
        ImageFormat::Ppm => {
            if r.channels != 3 {
                return Err(RasterError::IncompatibleFormat { format: "PPM", channels: r.channels });
            }
            Ok(encode_pnm(r, b'6'))
        }
        ImageFormat::Pgm => {
            if r.channels != 1 {
                return Err(RasterError::IncompatibleFormat { format: "PGM", channels: r.channels });
            }
            Ok(encode_pnm(r, b'5'))
        }
    }
}

/// Load an image file, picking the codec from the extension.
pub fn load_image(path: &Path) -> Result<Raster8, RasterError> {
    let format = ImageFormat::from_extension(path).ok_or_else(|| RasterError::MalformedFile {
        format: "image",
        reason: format!("unrecognized extension: {}", path.display()),
    })?;
    let bytes = fs::read(path)?;
    decode_image(&bytes, format)
}

/// Save an image file, picking the codec from the extension.
pub fn save_image(path: &Path, r: &Raster8) -> Result<(), RasterError> {
    let format = ImageFormat::from_extension(path).ok_or_else(|| RasterError::MalformedFile {
        format: "image",
        reason: format!("unrecognized extension: {}", path.display()),
    })?;
    fs::write(path, encode_image(r, format)?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// PNM (P5/P6)

fn pnm_error(kind: u8, reason: impl Into<String>) -> RasterError {
    RasterError::MalformedFile {
        format: if kind == b'6' { "PPM" } else { "PGM" },
        reason: reason.into(),
    }
}

/// Parse the three header integers of a binary PNM file, honoring `#`
/// comments, and return them with the offset of the first payload byte.
fn parse_pnm_header(bytes: &[u8], kind: u8) -> Result<(u32, u32, u32, usize), RasterError> {
    if bytes.len() < 2 || bytes[0] != b'P' || bytes[1] != kind {
        return Err(pnm_error(kind, "missing magic number"));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(pnm_error(kind, "truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if pos == start {
            return Err(pnm_error(kind, "expected an integer header field"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are utf-8");
        *field = text
            .parse::<u32>()
            .map_err(|_| pnm_error(kind, format!("header field out of range: {text}")))?;
    }
    // exactly one whitespace byte separates the header from the payload
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(pnm_error(kind, "missing separator before payload")),
    }
    Ok((fields[0], fields[1], fields[2], pos))
}

fn decode_pnm(bytes: &[u8], kind: u8) -> Result<Raster8, RasterError> {
    let (width, height, maxval, payload) = parse_pnm_header(bytes, kind)?;
    if maxval > 255 {
        return Err(RasterError::UnsupportedDepth(16));
    }
    if maxval == 0 {
        return Err(pnm_error(kind, "maxval 0"));
    }
    let channels: u32 = if kind == b'6' { 3 } else { 1 };
    let expected = width as usize * height as usize * channels as usize;
    let data = bytes[payload..].to_vec();
    if data.len() < expected {
        return Err(pnm_error(
            kind,
            format!("payload holds {} bytes, expected {expected}", data.len()),
        ));
    }
    let space = if channels == 3 { ColorSpace::Rgb } else { ColorSpace::Gray };
    Raster8::new(width, height, channels, data[..expected].to_vec(), space)
}

fn encode_pnm(r: &Raster8, kind: u8) -> Vec<u8> {
    let mut out = format!("P{}\n{} {}\n255\n", kind - b'0', r.width, r.height).into_bytes();
    out.extend_from_slice(&r.data);
    out
}

// ---------------------------------------------------------------------------
// PNG

fn decode_png(bytes: &[u8]) -> Result<Raster8, RasterError> {
    let mut decoder = png::Decoder::new(bytes);
    // expand palettes to plain color; keep bit depth untouched so 16-bit
    // sources are detected and rejected rather than silently truncated
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| RasterError::MalformedFile { format: "PNG", reason: e.to_string() })?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| RasterError::MalformedFile { format: "PNG", reason: e.to_string() })?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(RasterError::UnsupportedDepth(match info.bit_depth {
            png::BitDepth::Sixteen => 16,
            depth => depth as u32,
        }));
    }
    buf.truncate(info.buffer_size());
    let (channels, data) = match info.color_type {
        png::ColorType::Grayscale => (1, buf),
        png::ColorType::Rgb => (3, buf),
        // strip alpha; the pipeline is opaque-image only
        png::ColorType::GrayscaleAlpha => {
            (1, buf.chunks_exact(2).map(|px| px[0]).collect())
        }
        png::ColorType::Rgba => (
            3,
            buf.chunks_exact(4).flat_map(|px| [px[0], px[1], px[2]]).collect(),
        ),
        png::ColorType::Indexed => {
            return Err(RasterError::MalformedFile {
                format: "PNG",
                reason: "palette image survived expansion".into(),
            })
        }
    };
    let space = if channels == 3 { ColorSpace::Rgb } else { ColorSpace::Gray };
    Raster8::new(info.width, info.height, channels, data, space)
}

fn encode_png(r: &Raster8) -> Result<Vec<u8>, RasterError> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, r.width, r.height);
        encoder.set_color(if r.channels == 3 {
            png::ColorType::Rgb
        } else {
            png::ColorType::Grayscale
        });
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| RasterError::MalformedFile { format: "PNG", reason: e.to_string() })?;
        writer
            .write_image_data(&r.data)
            .map_err(|e| RasterError::MalformedFile { format: "PNG", reason: e.to_string() })?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Resizing

/// Bilinear resize with half-pixel-centered sampling.
///
/// Source coordinates are `(dst + 0.5) * src/dst - 0.5`, clamped to the
/// image; interpolated values are rounded to the nearest integer. Resizing
/// to the input dimensions is an exact identity.
pub fn resize_bilinear(r: &Raster8, target_w: u32, target_h: u32) -> Raster8 {
    assert!(target_w >= 1 && target_h >= 1, "resize targets must be at least 1");
    if target_w == r.width && target_h == r.height {
        return r.clone();
    }
    let sx = r.width as f64 / target_w as f64;
    let sy = r.height as f64 / target_h as f64;
    let ch = r.channels as usize;
    let mut data = vec![0u8; target_w as usize * target_h as usize * ch];
    for ty in 0..target_h {
        let src_y = ((ty as f64 + 0.5) * sy - 0.5).clamp(0.0, (r.height - 1) as f64);
        let y0 = src_y.floor() as u32;
        let y1 = (y0 + 1).min(r.height - 1);
        let fy = src_y - y0 as f64;
        for tx in 0..target_w {
            let src_x = ((tx as f64 + 0.5) * sx - 0.5).clamp(0.0, (r.width - 1) as f64);
            let x0 = src_x.floor() as u32;
            let x1 = (x0 + 1).min(r.width - 1);
            let fx = src_x - x0 as f64;
            for c in 0..r.channels {
                let v00 = r.sample(x0, y0, c) as f64;
                let v10 = r.sample(x1, y0, c) as f64;
                let v01 = r.sample(x0, y1, c) as f64;
                let v11 = r.sample(x1, y1, c) as f64;
                let top = v00 + (v10 - v00) * fx;
                let bottom = v01 + (v11 - v01) * fx;
                let v = top + (bottom - top) * fy;
                data[(ty as usize * target_w as usize + tx as usize) * ch + c as usize] =
                    v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Raster8 { width: target_w, height: target_h, channels: r.channels, data, space: r.space }
}

// ---------------------------------------------------------------------------
// Float tensors and the FPP1 container

/// A planar (channel-major) 32-bit float image.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorF32 {
    channels: u32,
    height: u32,
    width: u32,
    data: Vec<f32>,
}

impl TensorF32 {
    pub fn new(channels: u32, height: u32, width: u32, data: Vec<f32>) -> Result<TensorF32, RasterError> {
        let expected = channels as usize * height as usize * width as usize;
        if data.len() != expected {
            return Err(RasterError::InvalidDimensions {
                width,
                height,
                channels,
                len: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(RasterError::NonFiniteValue(idx));
        }
        Ok(TensorF32 { channels, height, width, data })
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// The plane of channel `c`.
    pub fn plane(&self, c: u32) -> &[f32] {
        assert!(c < self.channels, "channel {c} out of range");
        let size = self.height as usize * self.width as usize;
        &self.data[c as usize * size..(c as usize + 1) * size]
    }

    /// Serialize into the `FPP1` container: the magic `b"FPP1"`, then
    /// channels/height/width as `u32` little-endian, then the payload as
    /// little-endian `f32`, channel-major.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), RasterError> {
        if let Some(idx) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(RasterError::NonFiniteValue(idx));
        }
        w.write_all(b"FPP1")?;
        w.write_all(&self.channels.to_le_bytes())?;
        w.write_all(&self.height.to_le_bytes())?;
        w.write_all(&self.width.to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Deserialize from the `FPP1` container. Round trips with
    /// [`TensorF32::write_to`] bit-exactly.
    pub fn read_from<R: Read>(mut r: R) -> Result<TensorF32, RasterError> {
        let mut magic = [0u8; 4];
        read_exact_or_truncated(&mut r, &mut magic, 16, 0)?;
        if &magic != b"FPP1" {
            return Err(RasterError::BadMagic(magic));
        }
        let mut dims = [0u8; 12];
        read_exact_or_truncated(&mut r, &mut dims, 16, 4)?;
        let channels = u32::from_le_bytes(dims[0..4].try_into().unwrap());
        let height = u32::from_le_bytes(dims[4..8].try_into().unwrap());
        let width = u32::from_le_bytes(dims[8..12].try_into().unwrap());
        let count = channels as usize * height as usize * width as usize;
        let mut payload = vec![0u8; count * 4];
        read_exact_or_truncated(&mut r, &mut payload, 16 + count * 4, 16)?;
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        TensorF32::new(channels, height, width, data)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), RasterError> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4);
        self.write_to(&mut out)?;
        fs::write(path, out)?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<TensorF32, RasterError> {
        TensorF32::read_from(io::Cursor::new(fs::read(path)?))
    }
}

fn read_exact_or_truncated<R: Read>(
    r: &mut R,
    buf: &mut [u8],
    expected_total: usize,
    offset: usize,
) -> Result<(), RasterError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(RasterError::TruncatedPayload {
                    expected: expected_total,
                    found: offset + filled,
                })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

/// Scale an 8-bit raster to a planar float tensor with values in `[0, 1]`
/// (`sample / 255`).
pub fn to_unit_tensor(r: &Raster8) -> TensorF32 {
    let plane = r.pixel_count();
    let mut data = vec![0f32; plane * r.channels as usize];
    for (i, &v) in r.data.iter().enumerate() {
        let c = i % r.channels as usize;
        let p = i / r.channels as usize;
        data[c * plane + p] = v as f32 / 255.0;
    }
    TensorF32 { channels: r.channels, height: r.height, width: r.width, data }
}
