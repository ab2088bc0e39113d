//! Integer frequency vectors on the d-torus.
//!
//! A mode k in Z^d labels the character e^{i k.x}. The Laplacian eigenvalue
//! attached to it is |k|^2, so frequencies are sqrt(|k|^2) and the zero mode
//! is the single non-oscillatory direction.

use std::fmt;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ModeIndex(Vec<i64>);

impl ModeIndex {
    pub fn new(components: &[i64]) -> Self {
        ModeIndex(components.to_vec())
    }

    pub fn zero(dim: usize) -> Self {
        ModeIndex(vec![0; dim])
    }

    /// Basis vector e_axis (axis is zero-based).
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut c = vec![0; dim];
        c[axis] = 1;
        ModeIndex(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Squared Euclidean length |k|^2, the Laplacian eigenvalue.
    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|&c| c * c).sum()
    }

    pub fn linf(&self) -> i64 {
        self.0.iter().map(|&c| c.abs()).max().unwrap_or(0)
    }

    pub fn l1(&self) -> i64 {
        self.0.iter().map(|&c| c.abs()).sum()
    }

    pub fn neg(&self) -> Self {
        ModeIndex(self.0.iter().map(|&c| -c).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        ModeIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        ModeIndex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// True when the first nonzero component is positive. Exactly one of k,
    /// -k satisfies this for k != 0; it selects the stored representative of
    /// a conjugate pair wherever one member is enough.
    pub fn is_positive(&self) -> bool {
        for &c in &self.0 {
            if c != 0 {
                return c > 0;
            }
        }
        false
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalue_is_squared_length() {
        assert_eq!(ModeIndex::new(&[3, -4]).norm_sq(), 25);
        assert_eq!(ModeIndex::zero(2).norm_sq(), 0);
    }

    #[test]
    fn ordering_is_lexicographic() {
        let a = ModeIndex::new(&[-1, 2]);
        let b = ModeIndex::new(&[0, -5]);
        let c = ModeIndex::new(&[0, 1]);
        assert!(a < b && b < c);
    }

    #[test]
    fn positive_representative_picks_one_of_each_pair() {
        let k = ModeIndex::new(&[0, -2]);
        assert!(!k.is_positive());
        assert!(k.neg().is_positive());
        assert!(!ModeIndex::zero(3).is_positive());
    }
}
