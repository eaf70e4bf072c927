//! Image dimensions from PNG/JPEG headers. Pixel data is never decoded.

use super::ImageSize;
use crate::error::{Error, Result};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

pub fn read_image_dims(bytes: &[u8]) -> Result<ImageSize> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        png_dims(bytes)
    } else if bytes.starts_with(&[0xFF, 0xD8]) {
        jpeg_dims(bytes)
    } else if PNG_SIGNATURE.starts_with(bytes) || bytes == [0xFF] {
        Err(Error::TruncatedHeader)
    } else {
        Err(Error::UnsupportedFormat)
    }
}

fn be_u16(bytes: &[u8], at: usize) -> Result<u16> {
    bytes
        .get(at..at + 2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .ok_or(Error::TruncatedHeader)
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::TruncatedHeader)
}

// signature(8) | length(4) | "IHDR" | width(4) | height(4)
fn png_dims(bytes: &[u8]) -> Result<ImageSize> {
    let chunk_type = bytes.get(12..16).ok_or(Error::TruncatedHeader)?;
    if chunk_type != b"IHDR" {
        return Err(Error::UnsupportedFormat);
    }
    ImageSize::new(be_u32(bytes, 16)?, be_u32(bytes, 20)?)
}

fn jpeg_dims(bytes: &[u8]) -> Result<ImageSize> {
    let mut pos = 2;
    loop {
        // Markers may be preceded by any number of 0xFF fill bytes.
        if *bytes.get(pos).ok_or(Error::TruncatedHeader)? != 0xFF {
            return Err(Error::UnsupportedFormat);
        }
        while bytes.get(pos) == Some(&0xFF) {
            pos += 1;
        }
        let marker = *bytes.get(pos).ok_or(Error::TruncatedHeader)?;
        pos += 1;
        match marker {
            // standalone markers carry no length field
            0x01 | 0xD0..=0xD7 => continue,
            0xD8..=0xDA => return Err(Error::UnsupportedFormat),
            // baseline, extended sequential, progressive
            0xC0..=0xC2 => {
                // length(2) | precision(1) | height(2) | width(2)
                let height = be_u16(bytes, pos + 3)?;
                let width = be_u16(bytes, pos + 5)?;
                return ImageSize::new(u32::from(width), u32::from(height));
            }
            _ => {
                let len = usize::from(be_u16(bytes, pos)?);
                if len < 2 {
                    return Err(Error::UnsupportedFormat);
                }
                pos += len;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn png_header(width: u32, height: u32) -> Vec<u8> {
        let mut v = PNG_SIGNATURE.to_vec();
        v.extend_from_slice(&13u32.to_be_bytes());
        v.extend_from_slice(b"IHDR");
        v.extend_from_slice(&width.to_be_bytes());
        v.extend_from_slice(&height.to_be_bytes());
        v.extend_from_slice(&[8, 2, 0, 0, 0]);
        v
    }

    #[test]
    fn png_from_ihdr() {
        let size = read_image_dims(&png_header(1920, 1080)).unwrap();
        assert_eq!((size.width, size.height), (1920, 1080));
    }

    #[test]
    fn png_truncated() {
        let full = png_header(5, 5);
        assert_eq!(read_image_dims(&full[..20]), Err(Error::TruncatedHeader));
        assert_eq!(read_image_dims(&full[..4]), Err(Error::TruncatedHeader));
    }

    #[test]
    fn jpeg_skips_app_segments_and_fill_bytes() {
        let mut v = vec![0xFF, 0xD8];
        // APP0 with 4 payload bytes
        v.extend_from_slice(&[0xFF, 0xE0, 0x00, 0x06, 1, 2, 3, 4]);
        v.extend_from_slice(&[0xFF, 0xFF, 0xC2, 0x00, 0x11, 8, 0x01, 0x2C, 0x02, 0x80]);
        let size = read_image_dims(&v).unwrap();
        assert_eq!((size.width, size.height), (640, 300));
    }

    #[test]
    fn jpeg_without_sof_before_scan() {
        let v = [0xFF, 0xD8, 0xFF, 0xDA, 0x00, 0x02];
        assert_eq!(read_image_dims(&v), Err(Error::UnsupportedFormat));
        assert_eq!(
            read_image_dims(&[0xFF, 0xD8, 0xFF, 0xC0, 0x00]),
            Err(Error::TruncatedHeader)
        );
        assert_eq!(read_image_dims(&[0xFF, 0xD8]), Err(Error::TruncatedHeader));
    }

    #[test]
    fn other_formats_rejected() {
        assert_eq!(
            read_image_dims(b"GIF89a\x01\x00\x01\x00"),
            Err(Error::UnsupportedFormat)
        );
        assert_eq!(read_image_dims(b""), Err(Error::TruncatedHeader));
        assert_eq!(read_image_dims(b"BM"), Err(Error::UnsupportedFormat));
    }
}
