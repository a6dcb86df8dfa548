//! CIFAR-10 binary batches: records of one label byte followed by 3072
//! pixel bytes (R, G, B planes of 32x32, row-major).

use crate::data::LabeledImage;
use crate::error::ParseError;
use crate::tensor::Tensor;

pub const SIDE: usize = 32;
pub const PIXELS: usize = 3 * SIDE * SIDE;
pub const RECORD: usize = 1 + PIXELS;

pub fn parse_cifar10_bin(bytes: &[u8]) -> Result<Vec<LabeledImage>, ParseError> {
    if bytes.len() % RECORD != 0 {
        return Err(ParseError::RecordSize {
            len: bytes.len(),
            record: RECORD,
        });
    }
    bytes
        .chunks_exact(RECORD)
        .enumerate()
        .map(|(index, rec)| {
            let label = rec[0];
            if label > 9 {
                return Err(ParseError::BadLabel { index, label });
            }
            let pixels = rec[1..].iter().map(|&v| v as f64 / 255.0).collect();
            Ok(LabeledImage {
                pixels: Tensor::new(vec![3, SIDE, SIDE], pixels).expect("fixed record size"),
                class_id: label,
            })
        })
        .collect()
}

/// Inverse of [`parse_cifar10_bin`] for one record.
pub fn encode_cifar10_record(image: &LabeledImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(RECORD);
    out.push(image.class_id);
    out.extend(image.pixels.data().iter().map(|&v| (v * 255.0).round() as u8));
    out
}
