//! Sparse spectral representation of real functions and wave states on T^d.
//!
//! A field stores finitely many complex amplitudes c(k) against the characters
//! e^{i k.x}. Realness is kept as an exact structural invariant: for every
//! stored k the map also stores -k with the conjugate amplitude, bitwise.
//! Products are direct convolutions over the two supports (they are small and
//! sparse here; no transform machinery is involved), re-projected onto the
//! Hermitian subspace and pruned, so the invariant survives every operation.
//!
//! Norms follow the weight (1 + |k|^2)^s, s in {0,1,2}:
//!   ||f||_s^2 = sum_k (1 + |k|^2)^s |c(k)|^2,
//! which is the L^2 norm for s = 0 under the normalized measure dx/(2pi)^d.

use crate::error::{Error, Result};
use crate::mode::ModeIndex;
use crate::scalar::Scalar;
use num_complex::Complex;
use num_traits::Zero;
use std::collections::BTreeMap;

/// Smoothness index for the weighted norms. Only the three weights the crate
/// actually measures with are representable.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SobolevIndex {
    L2,
    H1,
    H2,
}

impl SobolevIndex {
    fn power(self) -> u32 {
        match self {
            SobolevIndex::L2 => 0,
            SobolevIndex::H1 => 1,
            SobolevIndex::H2 => 2,
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct FourierField<T: Scalar> {
    dim: usize,
    coeffs: BTreeMap<ModeIndex, Complex<T>>,
}

impl<T: Scalar> FourierField<T> {
    pub fn zero(dim: usize) -> Self {
        FourierField {
            dim,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, value: T) -> Self {
        let mut f = FourierField::zero(dim);
        if value != T::zero() {
            f.coeffs
                .insert(ModeIndex::zero(dim), Complex::new(value, T::zero()));
        }
        f
    }

    /// cos(k.x) as a field: half weight on k and -k.
    pub fn cosine(k: &ModeIndex) -> Self {
        let mut f = FourierField::zero(k.dim());
        if k.is_zero() {
            return FourierField::constant(k.dim(), T::one());
        }
        let half = Complex::new(T::of(0.5), T::zero());
        f.coeffs.insert(k.clone(), half);
        f.coeffs.insert(k.neg(), half);
        f
    }

    /// sin(k.x) as a field: -i/2 on k, +i/2 on -k. sin(0.x) is the zero field.
    pub fn sine(k: &ModeIndex) -> Self {
        let mut f = FourierField::zero(k.dim());
        if k.is_zero() {
            return f;
        }
        let half = T::of(0.5);
        f.coeffs.insert(k.clone(), Complex::new(T::zero(), -half));
        f.coeffs.insert(k.neg(), Complex::new(T::zero(), half));
        f
    }

    /// Builds a field from explicit (mode, amplitude) pairs. Duplicated modes
    /// are rejected. Missing conjugate partners are filled in; if both k and
    /// -k are given they must agree with conjugation within `tol` (absolute),
    /// and the stored pair is re-projected so the invariant is exact.
    pub fn from_pairs<I>(dim: usize, pairs: I, tol: T) -> Result<Self>
    where
        I: IntoIterator<Item = (ModeIndex, Complex<T>)>,
    {
        let mut raw: BTreeMap<ModeIndex, Complex<T>> = BTreeMap::new();
        for (k, c) in pairs {
            if k.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: k.dim(),
                });
            }
            if raw.insert(k, c).is_some() {
                return Err(Error::HermitianConflict {
                    deviation: f64::INFINITY,
                });
            }
        }
        let mut f = FourierField {
            dim,
            coeffs: BTreeMap::new(),
        };
        let keys: Vec<ModeIndex> = raw.keys().cloned().collect();
        for k in keys {
            if f.coeffs.contains_key(&k) {
                continue;
            }
            let c = raw[&k];
            let nk = k.neg();
            if k.is_zero() {
                if c.im.abs() > tol {
                    return Err(Error::HermitianConflict {
                        deviation: c.im.abs().to_f64(),
                    });
                }
                f.coeffs.insert(k, Complex::new(c.re, T::zero()));
            } else if let Some(&cn) = raw.get(&nk) {
                let dev = (c - cn.conj()).norm();
                if dev > tol {
                    return Err(Error::HermitianConflict {
                        deviation: dev.to_f64(),
                    });
                }
                let avg = (c + cn.conj()) * Complex::new(T::of(0.5), T::zero());
                f.coeffs.insert(k, avg);
                f.coeffs.insert(nk, avg.conj());
            } else {
                f.coeffs.insert(k, c);
                f.coeffs.insert(nk, c.conj());
            }
        }
        f.prune();
        Ok(f)
    }

    /// Hermitian projection of an arbitrary coefficient map: conjugate pairs
    /// are averaged, the anti-symmetric part is discarded. Internal ops that
    /// can pick up rounding asymmetry route their output through this.
    fn from_raw_projected(dim: usize, raw: BTreeMap<ModeIndex, Complex<T>>) -> Self {
        let mut coeffs = BTreeMap::new();
        let half = Complex::new(T::of(0.5), T::zero());
        for (k, &c) in raw.iter() {
            if k.is_zero() {
                coeffs.insert(k.clone(), Complex::new(c.re, T::zero()));
            } else if k.is_positive() {
                let cn = raw.get(&k.neg()).copied().unwrap_or_else(Complex::zero);
                let avg = (c + cn.conj()) * half;
                coeffs.insert(k.clone(), avg);
                coeffs.insert(k.neg(), avg.conj());
            }
        }
        // Modes whose partner carries all the mass (k negative, -k absent).
        for (k, &c) in raw.iter() {
            if !k.is_zero() && !k.is_positive() && !coeffs.contains_key(k) {
                let avg = (c.conj()) * half;
                coeffs.insert(k.neg(), avg);
                coeffs.insert(k.clone(), avg.conj());
            }
        }
        let mut f = FourierField { dim, coeffs };
        f.prune();
        f
    }

    /// Wraps a map the caller has already kept exactly Hermitian (mode-wise
    /// updates with real scalars preserve the invariant bitwise). Debug
    /// builds still verify it.
    pub(crate) fn from_hermitian_unchecked(
        dim: usize,
        coeffs: BTreeMap<ModeIndex, Complex<T>>,
    ) -> Self {
        let mut f = FourierField { dim, coeffs };
        debug_assert!(f
            .coeffs
            .iter()
            .all(|(k, c)| (f.coeff(&k.neg()) - c.conj()).norm() == T::zero()));
        f.prune();
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, k: &ModeIndex) -> Complex<T> {
        self.coeffs.get(k).copied().unwrap_or_else(Complex::zero)
    }

    pub fn modes(&self) -> impl Iterator<Item = (&ModeIndex, &Complex<T>)> {
        self.coeffs.iter()
    }

    pub fn mode_count(&self) -> usize {
        self.coeffs.len()
    }

    pub fn max_abs(&self) -> T {
        self.coeffs
            .values()
            .map(|c| c.norm())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Largest |k|_inf over the support; 0 for the zero field.
    pub fn support_linf(&self) -> usize {
        self.coeffs
            .keys()
            .map(|k| k.linf() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Drops coefficients below PRUNE_REL times the largest modulus. Pairs
    /// are dropped together since their moduli agree exactly.
    fn prune(&mut self) {
        let max = self.max_abs();
        if max == T::zero() {
            self.coeffs.clear();
            return;
        }
        let cut = max * T::PRUNE_REL;
        self.coeffs.retain(|_, c| c.norm() >= cut);
    }

    /// Copy with coefficients below `rel` times the largest modulus dropped;
    /// the simulator applies its configured threshold between segments.
    pub fn pruned(&self, rel: T) -> Self {
        let cut = self.max_abs() * rel;
        FourierField {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(_, c)| c.norm() >= cut)
                .map(|(k, c)| (k.clone(), *c))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut coeffs = self.coeffs.clone();
        for (k, c) in &other.coeffs {
            *coeffs.entry(k.clone()).or_insert_with(Complex::zero) += *c;
        }
        let mut f = FourierField {
            dim: self.dim,
            coeffs,
        };
        f.prune();
        Ok(f)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut coeffs = self.coeffs.clone();
        for (k, c) in &other.coeffs {
            *coeffs.entry(k.clone()).or_insert_with(Complex::zero) -= *c;
        }
        let mut f = FourierField {
            dim: self.dim,
            coeffs,
        };
        f.prune();
        Ok(f)
    }

    /// Scaling by a real factor (the only scaling that keeps the field real).
    pub fn scale(&self, a: T) -> Self {
        let fac = Complex::new(a, T::zero());
        let mut f = FourierField {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, c)| (k.clone(), *c * fac))
                .collect(),
        };
        f.prune();
        f
    }

    /// Pointwise product, computed as the convolution of the two supports.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut raw: BTreeMap<ModeIndex, Complex<T>> = BTreeMap::new();
        for (ka, ca) in &self.coeffs {
            for (kb, cb) in &other.coeffs {
                let k = ka.add(kb);
                *raw.entry(k).or_insert_with(Complex::zero) += *ca * *cb;
            }
        }
        Ok(FourierField::from_raw_projected(self.dim, raw))
    }

    /// Splits off every mode with |k|_inf above `cap`. Returns the capped
    /// field and the L2 norm of the removed part.
    pub fn truncate(&self, cap: usize) -> (Self, T) {
        let mut kept = BTreeMap::new();
        let mut dropped_sq = T::zero();
        for (k, c) in &self.coeffs {
            if k.linf() as usize <= cap {
                kept.insert(k.clone(), *c);
            } else {
                dropped_sq += c.norm_sqr();
            }
        }
        (
            FourierField {
                dim: self.dim,
                coeffs: kept,
            },
            dropped_sq.sqrt(),
        )
    }

    /// L2 inner product under the normalized measure: sum_k c(k) conj(d(k)).
    /// Real for two real fields; the imaginary part cancels pairwise and is
    /// not formed.
    pub fn l2_inner(&self, other: &Self) -> Result<T> {
        self.check_dim(other)?;
        let mut acc = T::zero();
        for (k, c) in &self.coeffs {
            let d = other.coeff(k);
            acc += c.re * d.re + c.im * d.im;
        }
        Ok(acc)
    }

    pub fn sobolev_norm(&self, s: SobolevIndex) -> T {
        let p = s.power();
        let mut acc = T::zero();
        for (k, c) in &self.coeffs {
            let w = T::one() + T::from_i64(k.norm_sq()).expect("mode weight");
            let mut wp = T::one();
            for _ in 0..p {
                wp *= w;
            }
            acc += wp * c.norm_sqr();
        }
        acc.sqrt()
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(())
    }
}

/// Number of control generators in dimension d: the constant plus a cosine
/// and a sine per axis.
pub fn generator_count(dim: usize) -> usize {
    2 * dim + 1
}

/// The j-th control generator: j = 0 is the constant 1, then per axis i
/// (zero-based) j = 2i+1 is cos(e_i.x) and j = 2i+2 is sin(e_i.x).
pub fn make_mu<T: Scalar>(j: usize, dim: usize) -> Result<FourierField<T>> {
    if j > 2 * dim {
        return Err(Error::GeneratorIndex { j, max: 2 * dim });
    }
    if j == 0 {
        return Ok(FourierField::constant(dim, T::one()));
    }
    let axis = (j - 1) / 2;
    let k = ModeIndex::unit(dim, axis);
    Ok(if j % 2 == 1 {
        FourierField::cosine(&k)
    } else {
        FourierField::sine(&k)
    })
}

/// Linear combination of the generators with the given coefficient vector
/// (length 2d+1, ordered as in `make_mu`).
pub fn from_generator_coeffs<T: Scalar>(dim: usize, coeffs: &[T]) -> Result<FourierField<T>> {
    if coeffs.len() != generator_count(dim) {
        return Err(Error::CoefficientLength {
            expected: generator_count(dim),
            got: coeffs.len(),
        });
    }
    let mut acc = FourierField::zero(dim);
    for (j, &a) in coeffs.iter().enumerate() {
        if a != T::zero() {
            acc = acc.add(&make_mu::<T>(j, dim)?.scale(a))?;
        }
    }
    Ok(acc)
}

/// Inverse of `from_generator_coeffs` for fields that live on the generator
/// modes alone; anything else is rejected.
pub fn to_generator_coeffs<T: Scalar>(field: &FourierField<T>) -> Result<Vec<T>> {
    let dim = field.dim();
    let mut coeffs = vec![T::zero(); generator_count(dim)];
    let two = T::of(2.0);
    for (k, c) in field.modes() {
        if k.is_zero() {
            coeffs[0] = c.re;
        } else if k.linf() == 1 && k.l1() == 1 {
            let axis = k
                .components()
                .iter()
                .position(|&x| x != 0)
                .expect("nonzero mode");
            if k.components()[axis] == 1 {
                coeffs[2 * axis + 1] = two * c.re;
                coeffs[2 * axis + 2] = -two * c.im;
            }
        } else {
            return Err(Error::NotLowMode);
        }
    }
    Ok(coeffs)
}

/// A wave state: displacement profile and its time derivative.
#[derive(Clone, PartialEq, Debug)]
pub struct WaveState<T: Scalar> {
    pub profile: FourierField<T>,
    pub velocity: FourierField<T>,
}

impl<T: Scalar> WaveState<T> {
    pub fn new(profile: FourierField<T>, velocity: FourierField<T>) -> Result<Self> {
        if profile.dim() != velocity.dim() {
            return Err(Error::DimensionMismatch {
                expected: profile.dim(),
                got: velocity.dim(),
            });
        }
        Ok(WaveState { profile, velocity })
    }

    pub fn zero(dim: usize) -> Self {
        WaveState {
            profile: FourierField::zero(dim),
            velocity: FourierField::zero(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.profile.dim()
    }

    pub fn is_zero(&self) -> bool {
        self.profile.is_empty() && self.velocity.is_empty()
    }
}

/// Distance used throughout for state comparisons: H1 on the profile
/// difference, L2 on the velocity difference, combined in quadrature.
pub fn state_error<T: Scalar>(a: &WaveState<T>, b: &WaveState<T>) -> Result<T> {
    let dp = a.profile.sub(&b.profile)?.sobolev_norm(SobolevIndex::H1);
    let dv = a.velocity.sub(&b.velocity)?.sobolev_norm(SobolevIndex::L2);
    Ok((dp * dp + dv * dv).sqrt())
}
