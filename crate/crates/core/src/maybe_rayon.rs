//! Switches between rayon and sequential iterators.

#[cfg(feature = "parallel")]
pub(crate) use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub(crate) fn range(n: usize) -> rayon::range::Iter<usize> {
    (0..n).into_par_iter()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn range(n: usize) -> core::ops::Range<usize> {
    0..n
}
