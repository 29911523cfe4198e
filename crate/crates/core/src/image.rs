//! Color and depth buffers with PPM / PGM (and inbound PNG) codecs.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("malformed netpbm header: {0}")]
    BadHeader(String),
    #[error("pixel data truncated: need {expected} bytes, have {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("png decode failed: {0}")]
    Png(String),
    #[error("unrecognized image encoding")]
    UnknownEncoding,
}

/// 8-bit RGB image, row-major, top row first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self::filled(width, height, [0, 0, 0])
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Binary PPM (P6, maxval 255).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self, ImageError> {
        let (magic, w, h, maxval, body) = netpbm_header(bytes)?;
        if magic != "P6" || maxval != 255 {
            return Err(ImageError::BadHeader(format!("expected P6/255, got {magic}/{maxval}")));
        }
        let n = w as usize * h as usize * 3;
        if body.len() < n {
            return Err(ImageError::Truncated {
                expected: n,
                actual: body.len(),
            });
        }
        Ok(Self {
            width: w,
            height: h,
            data: body[..n].to_vec(),
        })
    }

    /// Decodes PPM or PNG.
    pub fn decode(bytes: &[u8]) -> Result<Self, ImageError> {
        if bytes.starts_with(b"P6") {
            Self::from_ppm(bytes)
        } else if bytes.starts_with(b"\x89PNG") {
            Self::from_png(bytes)
        } else {
            Err(ImageError::UnknownEncoding)
        }
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self, ImageError> {
        let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info().map_err(|e| ImageError::Png(e.to_string()))?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| ImageError::Png("image too large".into()))?;
        let mut buf = vec![0; size];
        let info = reader.next_frame(&mut buf).map_err(|e| ImageError::Png(e.to_string()))?;
        let channels = info.color_type.samples();
        let (w, h) = (info.width, info.height);
        let mut data = Vec::with_capacity(w as usize * h as usize * 3);
        for y in 0..h as usize {
            let row = &buf[y * info.line_size..];
            for x in 0..w as usize {
                let px = &row[x * channels..x * channels + channels];
                match channels {
                    1 | 2 => data.extend_from_slice(&[px[0], px[0], px[0]]),
                    _ => data.extend_from_slice(&px[..3]),
                }
            }
        }
        Ok(Self {
            width: w,
            height: h,
            data,
        })
    }

    /// Rec. 709 luma of pixel `(x, y)` in `[0, 1]`.
    pub fn luminance(&self, x: u32, y: u32) -> f64 {
        let [r, g, b] = self.get(x, y);
        (0.2126 * r as f64 + 0.7152 * g as f64 + 0.0722 * b as f64) / 255.0
    }
}

/// View-space depth in meters; `f32::INFINITY` marks empty pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

/// 16-bit code reserved for empty pixels.
pub const DEPTH_EMPTY_CODE: u16 = 65535;
const DEPTH_MAX_CODE: f64 = 65534.0;

impl DepthMap {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![f32::INFINITY; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Maps `[near, far]` linearly to `[0, 65534]`, rounding to nearest.
    pub fn encode(depth: f32, near: f32, far: f32) -> u16 {
        if !depth.is_finite() {
            return DEPTH_EMPTY_CODE;
        }
        let t = (depth as f64 - near as f64) / (far as f64 - near as f64);
        (t.clamp(0.0, 1.0) * DEPTH_MAX_CODE).round() as u16
    }

    pub fn decode(code: u16, near: f32, far: f32) -> f32 {
        if code == DEPTH_EMPTY_CODE {
            return f32::INFINITY;
        }
        (near as f64 + code as f64 / DEPTH_MAX_CODE * (far as f64 - near as f64)) as f32
    }

    /// Binary 16-bit PGM (P5, maxval 65535, big-endian samples).
    pub fn to_pgm(&self, near: f32, far: f32) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        out.reserve(self.data.len() * 2);
        for &d in &self.data {
            out.extend_from_slice(&Self::encode(d, near, far).to_be_bytes());
        }
        out
    }

    pub fn from_pgm(bytes: &[u8], near: f32, far: f32) -> Result<Self, ImageError> {
        let (w, h, codes) = decode_pgm16(bytes)?;
        Ok(Self {
            width: w,
            height: h,
            data: codes.into_iter().map(|c| Self::decode(c, near, far)).collect(),
        })
    }
}

/// Raw samples of a 16-bit P5 file.
pub fn decode_pgm16(bytes: &[u8]) -> Result<(u32, u32, Vec<u16>), ImageError> {
    let (magic, w, h, maxval, body) = netpbm_header(bytes)?;
    if magic != "P5" || maxval != 65535 {
        return Err(ImageError::BadHeader(format!("expected P5/65535, got {magic}/{maxval}")));
    }
    let n = w as usize * h as usize;
    if body.len() < n * 2 {
        return Err(ImageError::Truncated {
            expected: n * 2,
            actual: body.len(),
        });
    }
    Ok((w, h, body[..n * 2].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()))
}

fn netpbm_header(bytes: &[u8]) -> Result<(String, u32, u32, u32, &[u8]), ImageError> {
    let mut tokens = Vec::with_capacity(4);
    let mut i = 0;
    while tokens.len() < 4 {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(ImageError::BadHeader("unexpected end of header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // Exactly one whitespace byte separates maxval from the samples.
    if i >= bytes.len() {
        return Err(ImageError::BadHeader("missing sample data".into()));
    }
    let body = &bytes[i + 1..];
    let num = |s: &str| s.parse::<u32>().map_err(|_| ImageError::BadHeader(format!("bad number {s:?}")));
    Ok((tokens[0].clone(), num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?, body))
}
