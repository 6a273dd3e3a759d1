//! Dense bit rows and matrices used by the relation calculus and the
//! fixpoint engine.

const WORD: usize = 64;

#[inline]
pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

/// Row-major `rows x cols` boolean matrix packed into `u64` words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub(crate) struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub(crate) fn new(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        BitMatrix { rows, cols, stride, data: vec![0; rows * stride] }
    }

    pub(crate) fn square(n: usize) -> Self {
        Self::new(n, n)
    }

    #[inline]
    pub(crate) fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub(crate) fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.stride + c / WORD] >> (c % WORD) & 1 == 1
    }

    #[inline]
    pub(crate) fn set(&mut self, r: usize, c: usize) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.stride + c / WORD] |= 1 << (c % WORD);
    }

    #[inline]
    pub(crate) fn clear(&mut self, r: usize, c: usize) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.stride + c / WORD] &= !(1 << (c % WORD));
    }

    #[inline]
    pub(crate) fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.stride..(r + 1) * self.stride]
    }

    /// `self[dst] |= other[src]`.
    #[inline]
    pub(crate) fn or_row_from(&mut self, dst: usize, other: &BitMatrix, src: usize) {
        debug_assert_eq!(self.stride, other.stride);
        or_into(self.row_mut(dst), other.row(src));
    }

    pub(crate) fn or_assign(&mut self, other: &BitMatrix) {
        debug_assert_eq!(self.data.len(), other.data.len());
        or_into(&mut self.data, &other.data);
    }

    pub(crate) fn and_assign(&mut self, other: &BitMatrix) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (w, o) in self.data.iter_mut().zip(&other.data) {
            *w &= o;
        }
    }

    pub(crate) fn and_not_assign(&mut self, other: &BitMatrix) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (w, o) in self.data.iter_mut().zip(&other.data) {
            *w &= !o;
        }
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.data.iter().all(|&w| w == 0)
    }

    pub(crate) fn row_is_zero(&self, r: usize) -> bool {
        self.row(r).iter().all(|&w| w == 0)
    }

    pub(crate) fn count_ones(&self) -> usize {
        self.data.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub(crate) fn row_ones(&self, r: usize) -> Ones<'_> {
        Ones::new(self.row(r))
    }

    /// All set `(row, col)` pairs in row-major order.
    pub(crate) fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |r| self.row_ones(r).map(move |c| (r, c)))
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.data
    }
}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.ones()).finish()
    }
}

#[inline]
pub(crate) fn or_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d |= s;
    }
}

#[inline]
pub(crate) fn test_bit(row: &[u64], c: usize) -> bool {
    row[c / WORD] >> (c % WORD) & 1 == 1
}

/// Iterator over set bit positions of a word slice.
pub(crate) struct Ones<'a> {
    words: &'a [u64],
    idx: usize,
    cur: u64,
}

impl<'a> Ones<'a> {
    pub(crate) fn new(words: &'a [u64]) -> Self {
        let cur = words.first().copied().unwrap_or(0);
        Ones { words, idx: 0, cur }
    }
}

impl Iterator for Ones<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        loop {
            if self.cur != 0 {
                let tz = self.cur.trailing_zeros() as usize;
                self.cur &= self.cur - 1;
                return Some(self.idx * WORD + tz);
            }
            self.idx += 1;
            if self.idx >= self.words.len() {
                return None;
            }
            self.cur = self.words[self.idx];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_and_iterate_across_word_boundary() {
        let mut m = BitMatrix::new(3, 130);
        m.set(0, 0);
        m.set(0, 63);
        m.set(0, 64);
        m.set(2, 129);
        assert!(m.get(0, 63) && m.get(0, 64) && m.get(2, 129));
        assert!(!m.get(1, 5));
        assert_eq!(m.row_ones(0).collect::<Vec<_>>(), vec![0, 63, 64]);
        assert_eq!(m.ones().collect::<Vec<_>>(), vec![(0, 0), (0, 63), (0, 64), (2, 129)]);
        assert_eq!(m.count_ones(), 4);
        m.clear(0, 63);
        assert!(!m.get(0, 63));
        assert!(m.row_is_zero(1));
    }

    #[test]
    fn or_and_not() {
        let mut a = BitMatrix::square(4);
        let mut b = BitMatrix::square(4);
        a.set(1, 2);
        b.set(1, 2);
        b.set(3, 3);
        a.or_assign(&b);
        assert_eq!(a.count_ones(), 2);
        a.and_not_assign(&b);
        assert!(a.is_zero());
    }
}
