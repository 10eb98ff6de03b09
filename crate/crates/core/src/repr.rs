//! Sign-vector representations and their lexicographic ranks.
//!
//! The order puts −1 before +1 and treats the first coordinate as the most
//! significant, so the rank of `s` is the binary number whose bits are
//! `(sⁱ + 1) / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Widest layer whose representations can be ranked in a `usize`.
pub const MAX_INDEXED_WIDTH: usize = usize::BITS as usize - 1;

/// A vector over {−1, +1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|&&e| e != 1 && e != -1) {
            return Err(Error::InvalidArgument(format!(
                "sign vector entry {bad} is not ±1"
            )));
        }
        Ok(Self(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&e| f64::from(e)).collect()
    }

    /// Writes the entries as ±1.0 into `out`.
    pub fn write_f64(&self, out: &mut [f64]) {
        for (o, &e) in out.iter_mut().zip(&self.0) {
            *o = f64::from(e);
        }
    }
}

impl TryFrom<Vec<i8>> for SignVector {
    type Error = Error;

    fn try_from(entries: Vec<i8>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<SignVector> for Vec<i8> {
    fn from(s: SignVector) -> Self {
        s.0
    }
}

/// Lexicographic rank of `s` in `{−1, +1}^d`.
///
/// Panics if `s` is wider than [`MAX_INDEXED_WIDTH`].
pub fn rep_index(s: &SignVector) -> usize {
    assert!(
        s.len() <= MAX_INDEXED_WIDTH,
        "width {} cannot be indexed",
        s.len()
    );
    s.0.iter()
        .fold(0usize, |acc, &e| (acc << 1) | usize::from(e > 0))
}

/// Inverse of [`rep_index`].
pub fn index_rep(index: usize, width: usize) -> Result<SignVector> {
    if width > MAX_INDEXED_WIDTH || index >> width != 0 {
        return Err(Error::IndexOutOfRange { index, width });
    }
    Ok(SignVector(
        (0..width).map(|i| sign_bit(index, width, i)).collect(),
    ))
}

/// Coordinate `i` (0-based, most significant first) of the representation
/// with rank `index` in a layer of `width` neurons.
#[inline]
pub fn sign_bit(index: usize, width: usize, i: usize) -> i8 {
    if (index >> (width - 1 - i)) & 1 == 1 {
        1
    } else {
        -1
    }
}

/// Writes the ±1.0 coordinates of rank `index` into `out` (whose length is the width).
#[inline]
pub fn write_signs(index: usize, out: &mut [f64]) {
    let width = out.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = if (index >> (width - 1 - i)) & 1 == 1 {
            1.0
        } else {
            -1.0
        };
    }
}

/// Number of representations of a layer of `width` neurons, if it fits in a `usize`.
pub fn rep_count(width: usize) -> Option<usize> {
    if width > MAX_INDEXED_WIDTH {
        None
    } else {
        Some(1usize << width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(e: &[i8]) -> SignVector {
        SignVector::new(e.to_vec()).unwrap()
    }

    #[test]
    fn known_ranks() {
        assert_eq!(rep_index(&sv(&[-1, -1])), 0);
        assert_eq!(rep_index(&sv(&[-1, 1])), 1);
        assert_eq!(rep_index(&sv(&[1, -1])), 2);
        assert_eq!(rep_index(&sv(&[1, 1])), 3);
        assert_eq!(index_rep(0, 2).unwrap(), sv(&[-1, -1]));
        assert_eq!(index_rep(3, 2).unwrap(), sv(&[1, 1]));
        assert_eq!(index_rep(2, 2).unwrap(), sv(&[1, -1]));
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(matches!(
            index_rep(4, 2),
            Err(Error::IndexOutOfRange { index: 4, width: 2 })
        ));
        assert!(index_rep(0, 200).is_err());
    }

    #[test]
    fn non_sign_entries_rejected() {
        assert!(SignVector::new(vec![1, 0]).is_err());
        assert!(SignVector::try_from(vec![2i8]).is_err());
    }

    #[test]
    fn exhaustive_bijection_up_to_ten() {
        for d in 0..=10 {
            let mut seen = vec![false; 1 << d];
            for (i, slot) in seen.iter_mut().enumerate() {
                let s = index_rep(i, d).unwrap();
                assert_eq!(rep_index(&s), i);
                assert!(!*slot);
                *slot = true;
                let mut buf = vec![0.0; d];
                write_signs(i, &mut buf);
                assert_eq!(buf, s.to_f64());
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn bijection_up_to_sixteen(d in 1usize..=16, raw in 0usize..65536) {
            let i = raw % (1 << d);
            proptest::prop_assert_eq!(rep_index(&index_rep(i, d).unwrap()), i);
        }
    }
}
