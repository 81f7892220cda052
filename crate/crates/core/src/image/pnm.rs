//! Netpbm reading and writing: P2/P5 (gray) and P3/P6 (RGB), maxval 255 only.

use super::Image;
use crate::error::{Error, Result};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { offset: self.pos, message: message.into() }
    }

    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.pos >= self.bytes.len() {
                self.err(format!("truncated: expected {what}"))
            } else {
                self.err(format!("expected {what}"))
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse { offset: start, message: format!("{what} does not fit") })
    }
}

/// Parses a PNM byte stream.
pub fn load_pnm(bytes: &[u8]) -> Result<Image> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(cur.err("missing PNM magic"));
    }
    let (channels, binary) = match bytes[1] {
        b'2' => (1, false),
        b'3' => (3, false),
        b'5' => (1, true),
        b'6' => (3, true),
        _ => return Err(Error::Parse { offset: 1, message: "unsupported PNM variant".into() }),
    };
    cur.pos = 2;
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(cur.err("expected whitespace after magic"));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    if width == 0 || height == 0 {
        return Err(cur.err("zero image dimension"));
    }
    cur.skip_space();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Parse { offset: maxval_at, message: format!("unsupported maxval {maxval}") });
    }
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| cur.err("image too large"))?;

    let data = if binary {
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(cur.err("expected single whitespace before raster")),
        }
        let available = bytes.len() - cur.pos;
        if available < count {
            return Err(Error::Parse {
                offset: bytes.len(),
                message: format!("truncated raster: need {count} bytes, found {available}"),
            });
        }
        bytes[cur.pos..cur.pos + count].to_vec()
    } else {
        let mut data = Vec::with_capacity(count);
        for i in 0..count {
            cur.skip_space();
            let at = cur.pos;
            let v = cur.number("sample").map_err(|e| match e {
                Error::Parse { offset, message } if message.starts_with("truncated") => Error::Parse {
                    offset,
                    message: format!("truncated raster: need {count} samples, found {i}"),
                },
                other => other,
            })?;
            if v > 255 {
                return Err(Error::Parse { offset: at, message: format!("sample {v} exceeds maxval") });
            }
            data.push(v as u8);
        }
        data
    };
    Image::new(width, height, channels, data)
}

/// Serializes an image. `ascii` selects P2/P3, otherwise P5/P6.
pub fn save_pnm(img: &Image, ascii: bool) -> Vec<u8> {
    let magic = match (img.channels(), ascii) {
        (1, true) => "P2",
        (1, false) => "P5",
        (_, true) => "P3",
        (_, false) => "P6",
    };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    if ascii {
        let row_len = img.width() * img.channels();
        for row in img.data().chunks(row_len) {
            let line: Vec<String> = row.iter().map(u8::to_string).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    } else {
        out.extend_from_slice(img.data());
    }
    out
}
