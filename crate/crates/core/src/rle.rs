//! Run-length encoding for 2D binary masks.
//!
//! Runs are row major and alternate starting with background, so a mask
//! that begins with foreground gets a leading zero-length run. The
//! encoding is canonical: no other zero-length runs are permitted.

use crate::error::{Error, Result};
use crate::volume::Mask2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub width: usize,
    pub height: usize,
    pub runs: Vec<usize>,
}

pub fn rle_encode(mask: &Mask2) -> RleMask {
    let mut runs = Vec::new();
    let mut current = 0u8;
    let mut len = 0usize;
    for &v in &mask.data {
        if v == current {
            len += 1;
        } else {
            runs.push(len);
            current = v;
            len = 1;
        }
    }
    runs.push(len);
    // an all-background empty mask still encodes as [w*h]
    if runs.is_empty() {
        runs.push(0);
    }
    RleMask {
        width: mask.width,
        height: mask.height,
        runs,
    }
}

pub fn rle_decode(rle: &RleMask) -> Result<Mask2> {
    let total: usize = rle.runs.iter().sum();
    if total != rle.width * rle.height {
        return Err(Error::Integrity(format!(
            "run sum {} does not cover {}x{} mask",
            total, rle.width, rle.height
        )));
    }
    for (idx, &run) in rle.runs.iter().enumerate() {
        if run == 0 && idx != 0 {
            return Err(Error::Integrity(
                "zero-length run allowed only in first position".into(),
            ));
        }
    }
    let mut data = Vec::with_capacity(total);
    let mut value = 0u8;
    for &run in &rle.runs {
        data.extend(std::iter::repeat_n(value, run));
        value ^= 1;
    }
    Ok(Mask2 {
        width: rle.width,
        height: rle.height,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_zero_3x3() {
        let m = Mask2::zeros(3, 3);
        assert_eq!(rle_encode(&m).runs, vec![9]);
    }

    #[test]
    fn all_one_3x3() {
        let m = Mask2::from_fn(3, 3, |_, _| true);
        assert_eq!(rle_encode(&m).runs, vec![0, 9]);
    }

    #[test]
    fn row_pattern() {
        // 0 1 1 0
        let m = Mask2 {
            width: 4,
            height: 1,
            data: vec![0, 1, 1, 0],
        };
        assert_eq!(rle_encode(&m).runs, vec![1, 2, 1]);
    }

    #[test]
    fn decode_rejects_bad_sum() {
        let r = RleMask {
            width: 3,
            height: 3,
            runs: vec![4, 4],
        };
        assert!(rle_decode(&r).is_err());
    }

    #[test]
    fn decode_rejects_interior_zero_run() {
        let r = RleMask {
            width: 3,
            height: 1,
            runs: vec![1, 1, 0, 1],
        };
        assert!(rle_decode(&r).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(w in 1usize..12, h in 1usize..12, bits in proptest::collection::vec(0u8..2, 0..144)) {
            let mut data = vec![0u8; w * h];
            for (d, b) in data.iter_mut().zip(bits.iter()) {
                *d = *b;
            }
            let m = Mask2 { width: w, height: h, data };
            let enc = rle_encode(&m);
            prop_assert_eq!(rle_decode(&enc).unwrap(), m);
            // canonical: re-encoding the decoded mask reproduces the runs
            prop_assert_eq!(rle_encode(&rle_decode(&enc).unwrap()), enc);
        }
    }
}
