//! MNIST IDX reader. Image files carry magic `0x00000803` followed by
//! big-endian count, rows and cols; label files carry `0x00000801` and count.

use crate::data::LabeledImage;
use crate::error::ParseError;
use crate::tensor::Tensor;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn u32(&mut self) -> Result<u32, ParseError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ParseError> {
        let end = self.pos.checked_add(n).ok_or(ParseError::Truncated {
            needed: usize::MAX,
            available: self.bytes.len(),
        })?;
        if end > self.bytes.len() {
            return Err(ParseError::Truncated {
                needed: end,
                available: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.pos != self.bytes.len() {
            return Err(ParseError::TrailingBytes {
                expected: self.pos,
                found: self.bytes.len(),
            });
        }
        Ok(())
    }
}

fn magic(r: &mut Reader<'_>, expected: u32) -> Result<(), ParseError> {
    let found = r.u32()?;
    if found != expected {
        return Err(ParseError::BadMagic { expected, found });
    }
    Ok(())
}

/// Header of an image file: `(count, rows, cols)`.
pub fn parse_image_header(bytes: &[u8]) -> Result<(usize, usize, usize), ParseError> {
    let mut r = Reader::new(bytes);
    magic(&mut r, IMAGE_MAGIC)?;
    let count = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    Ok((count, rows, cols))
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>, ParseError> {
    let mut r = Reader::new(bytes);
    magic(&mut r, LABEL_MAGIC)?;
    let count = r.u32()? as usize;
    let labels = r.take(count)?.to_vec();
    r.finish()?;
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(ParseError::BadLabel { index, label });
    }
    Ok(labels)
}

/// Decodes paired image and label files; pixel byte `v` becomes `v / 255`.
pub fn parse_mnist_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<Vec<LabeledImage>, ParseError> {
    let mut r = Reader::new(image_bytes);
    magic(&mut r, IMAGE_MAGIC)?;
    let count = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    if rows == 0 || cols == 0 {
        return Err(ParseError::Extents { rows, cols });
    }
    let labels = parse_labels(label_bytes)?;
    if labels.len() != count {
        return Err(ParseError::CountMismatch {
            images: count,
            labels: labels.len(),
        });
    }
    let plane = rows.checked_mul(cols).ok_or(ParseError::Extents { rows, cols })?;
    let total = plane.checked_mul(count).ok_or(ParseError::Extents { rows, cols })?;
    let pixels = r.take(total)?;
    r.finish()?;
    Ok(pixels
        .chunks_exact(plane)
        .zip(labels)
        .map(|(chunk, class_id)| LabeledImage {
            pixels: Tensor::new(vec![1, rows, cols], chunk.iter().map(|&v| v as f64 / 255.0).collect())
                .expect("extent checked"),
            class_id,
        })
        .collect())
}

/// Inverse of [`parse_mnist_idx`] for single-channel images whose pixels are
/// multiples of 1/255.
pub fn encode_mnist_idx(images: &[LabeledImage]) -> (Vec<u8>, Vec<u8>) {
    let (rows, cols) = images
        .first()
        .map(|i| (i.pixels.shape()[1], i.pixels.shape()[2]))
        .unwrap_or((28, 28));
    let mut img = Vec::with_capacity(16 + images.len() * rows * cols);
    img.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&(images.len() as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    let mut lab = Vec::with_capacity(8 + images.len());
    lab.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(images.len() as u32).to_be_bytes());
    for i in images {
        img.extend(i.pixels.data().iter().map(|&v| (v * 255.0).round() as u8));
        lab.push(i.class_id);
    }
    (img, lab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(count: u32, rows: u32, cols: u32) -> Vec<u8> {
        [IMAGE_MAGIC, count, rows, cols]
            .iter()
            .flat_map(|v| v.to_be_bytes())
            .collect()
    }

    fn labels(ls: &[u8]) -> Vec<u8> {
        let mut v = LABEL_MAGIC.to_be_bytes().to_vec();
        v.extend_from_slice(&(ls.len() as u32).to_be_bytes());
        v.extend_from_slice(ls);
        v
    }

    #[test]
    fn test_split_header() {
        let bytes = [0, 0, 8, 3, 0, 0, 0x27, 0x10, 0, 0, 0, 0x1c, 0, 0, 0, 0x1c];
        assert_eq!(parse_image_header(&bytes).unwrap(), (10000, 28, 28));
    }

    #[test]
    fn pixel_scaling() {
        let mut img = header(1, 1, 2);
        img.extend_from_slice(&[255, 0]);
        let out = parse_mnist_idx(&img, &labels(&[7])).unwrap();
        assert_eq!(out[0].pixels.data(), &[1.0, 0.0]);
        assert_eq!(out[0].pixels.shape(), &[1, 1, 2]);
        assert_eq!(out[0].class_id, 7);
    }

    #[test]
    fn count_mismatch() {
        let mut img = header(2, 1, 1);
        img.extend_from_slice(&[1, 2]);
        assert_eq!(
            parse_mnist_idx(&img, &labels(&[1])).unwrap_err(),
            ParseError::CountMismatch { images: 2, labels: 1 }
        );
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut img = header(1, 2, 2);
        img.extend_from_slice(&[1, 2, 3]);
        assert!(matches!(
            parse_mnist_idx(&img, &labels(&[0])),
            Err(ParseError::Truncated { .. })
        ));
        img[3] = 0x01;
        assert!(matches!(
            parse_mnist_idx(&img, &labels(&[0])),
            Err(ParseError::BadMagic { .. })
        ));
        assert!(parse_labels(&labels(&[10])).is_err());
    }
}
