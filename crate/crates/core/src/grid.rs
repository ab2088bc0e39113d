//! Uniform-grid realization of spectral fields: evaluation at the n^d lattice
//! x_j = 2 pi j / n and the matching discrete projection back to mode space.
//!
//! Evaluation sums the (few) stored modes directly. All phases e^{i k.x_j}
//! are n-th roots of unity, so a single table of length n indexed by
//! (k.j mod n) serves every mode and every point; nothing here depends on
//! transform machinery. Values are stored row-major with the last axis
//! fastest.

use crate::error::{Error, Result};
use crate::field::FourierField;
use crate::mode::ModeIndex;
use crate::scalar::Scalar;
use num_complex::Complex;
use std::collections::BTreeMap;

fn unit_roots<T: Scalar>(n: usize) -> Vec<Complex<T>> {
    let step = T::of(2.0) * T::PI() / T::of(n as f64);
    (0..n)
        .map(|m| {
            let a = step * T::of(m as f64);
            Complex::new(a.cos(), a.sin())
        })
        .collect()
}

/// Phase index (k.j) mod n folded into 0..n.
fn phase_index(k: &ModeIndex, point: &[usize], n: usize) -> usize {
    let n_i = n as i64;
    let mut acc: i64 = 0;
    for (ki, &ji) in k.components().iter().zip(point) {
        acc = (acc + ki.rem_euclid(n_i) * ji as i64) % n_i;
    }
    acc as usize
}

fn for_each_point(dim: usize, n: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; dim];
    loop {
        f(&idx);
        let mut axis = dim;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < n {
                break;
            }
            idx[axis] = 0;
        }
        if idx.iter().all(|&j| j == 0) {
            return;
        }
    }
}

/// Evaluates `f` on the uniform grid with `n` points per axis. Requires
/// n >= 2 * (largest mode magnitude) + 1 so distinct stored modes stay
/// distinct on the lattice. The imaginary residue of the sums is rounding
/// dust (the field is Hermitian) and is discarded.
pub fn sample_grid<T: Scalar>(f: &FourierField<T>, n: usize) -> Result<Vec<T>> {
    let needed = 2 * f.support_linf() + 1;
    if n < needed {
        return Err(Error::GridTooCoarse { needed, got: n });
    }
    let dim = f.dim();
    let roots = unit_roots::<T>(n);
    let mut out = Vec::with_capacity(n.pow(dim as u32));
    for_each_point(dim, n, |point| {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (k, c) in f.modes() {
            acc += *c * roots[phase_index(k, point, n)];
        }
        out.push(acc.re);
    });
    Ok(out)
}

/// Discrete Fourier coefficients of grid values, kept for |k|_inf <= max_mode:
/// c(k) = n^{-d} sum_j v_j e^{-i k.x_j}. Requires n > 2 * max_mode so the
/// retained band is alias-free. The output support is built from half-space
/// representatives plus mirrored conjugates, so it is Hermitian by
/// construction regardless of the input values.
pub fn project_grid<T: Scalar>(values: &[T], dim: usize, max_mode: usize) -> Result<FourierField<T>> {
    let n = grid_side(values.len(), dim)?;
    if n <= 2 * max_mode {
        return Err(Error::GridTooCoarse {
            needed: 2 * max_mode + 1,
            got: n,
        });
    }
    let roots = unit_roots::<T>(n);
    let norm = T::one() / T::of((values.len()) as f64);

    let mut pairs: BTreeMap<ModeIndex, Complex<T>> = BTreeMap::new();
    let m = max_mode as i64;
    let mut k = vec![-m; dim];
    'outer: loop {
        let mode = ModeIndex::new(&k);
        if mode.is_zero() || mode.is_positive() {
            let mut acc = Complex::new(T::zero(), T::zero());
            let mut flat = 0usize;
            for_each_point(dim, n, |point| {
                // conjugated phase: index n - (k.j mod n)
                let p = phase_index(&mode, point, n);
                let conj_p = if p == 0 { 0 } else { n - p };
                acc += Complex::new(values[flat], T::zero()) * roots[conj_p];
                flat += 1;
            });
            let c = acc * Complex::new(norm, T::zero());
            if mode.is_zero() {
                pairs.insert(mode, Complex::new(c.re, T::zero()));
            } else {
                pairs.insert(mode.neg(), c.conj());
                pairs.insert(mode, c);
            }
        }
        let mut axis = dim;
        loop {
            if axis == 0 {
                break 'outer;
            }
            axis -= 1;
            k[axis] += 1;
            if k[axis] <= m {
                break;
            }
            k[axis] = -m;
        }
    }
    FourierField::from_pairs(dim, pairs, T::of(1e-9))
}

fn grid_side(len: usize, dim: usize) -> Result<usize> {
    if dim == 0 || len == 0 {
        return Err(Error::Config(format!(
            "grid values of length {len} cannot fill a {dim}-dimensional lattice"
        )));
    }
    let n = (len as f64).powf(1.0 / dim as f64).round() as usize;
    for cand in [n.saturating_sub(1), n, n + 1] {
        if cand >= 1 && cand.pow(dim as u32) == len {
            return Ok(cand);
        }
    }
    Err(Error::Config(format!(
        "grid values of length {len} cannot fill a {dim}-dimensional lattice"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_mu, FourierField};

    type F = FourierField<f64>;

    #[test]
    fn constant_and_low_trig_values_on_four_points() {
        let one: F = FourierField::constant(1, 1.0);
        assert_eq!(sample_grid(&one, 4).unwrap(), vec![1.0, 1.0, 1.0, 1.0]);

        let c: F = make_mu(1, 1).unwrap();
        let v = sample_grid(&c, 4).unwrap();
        for (got, want) in v.iter().zip([1.0, 0.0, -1.0, 0.0]) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }

        let s: F = make_mu(2, 1).unwrap();
        let v = sample_grid(&s, 4).unwrap();
        for (got, want) in v.iter().zip([0.0, 1.0, 0.0, -1.0]) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
    }

    #[test]
    fn aliasing_precondition_is_checked() {
        let c: F = FourierField::cosine(&ModeIndex::new(&[3]));
        assert!(matches!(
            sample_grid(&c, 6),
            Err(Error::GridTooCoarse { needed: 7, got: 6 })
        ));
        assert!(sample_grid(&c, 7).is_ok());
    }

    #[test]
    fn projection_round_trips_band_limited_fields() {
        let f = F::from_pairs(
            2,
            [
                (ModeIndex::new(&[1, -2]), Complex::new(0.3, 0.7)),
                (ModeIndex::new(&[0, 1]), Complex::new(-1.1, 0.2)),
                (ModeIndex::new(&[0, 0]), Complex::new(0.4, 0.0)),
            ],
            1e-12,
        )
        .unwrap();
        let v = sample_grid(&f, 9).unwrap();
        let back = project_grid(&v, 2, 2).unwrap();
        assert_eq!(back.mode_count(), f.mode_count());
        for (k, c) in f.modes() {
            assert!((back.coeff(k) - c).norm() < 1e-12);
        }
    }

    #[test]
    fn projection_of_squared_cosine_matches_convolution() {
        let c: F = make_mu(1, 1).unwrap();
        let v = sample_grid(&c, 16).unwrap();
        let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
        let via_grid = project_grid(&sq, 1, 2).unwrap();
        let via_conv = c.multiply(&c).unwrap();
        for (k, cc) in via_conv.modes() {
            assert!((via_grid.coeff(k) - cc).norm() < 1e-12);
        }
    }

    #[test]
    fn all_zero_values_give_the_empty_field() {
        let z = project_grid(&[0.0; 8], 1, 2).unwrap();
        assert!(z.is_empty());
    }

    #[test]
    fn parseval_against_grid_quadrature() {
        let f = F::from_pairs(
            1,
            [
                (ModeIndex::new(&[1]), Complex::new(0.3, -0.4)),
                (ModeIndex::new(&[2]), Complex::new(-0.1, 0.9)),
            ],
            1e-12,
        )
        .unwrap();
        let n = 32;
        let v = sample_grid(&f, n).unwrap();
        let quad: f64 = v.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let norm = f.sobolev_norm(crate::field::SobolevIndex::L2);
        assert!((norm * norm - quad).abs() < 1e-8 * quad.max(1.0));
    }

    #[test]
    fn multiply_agrees_with_pointwise_grid_product() {
        let f = F::from_pairs(
            2,
            [
                (ModeIndex::new(&[1, 0]), Complex::new(0.5, 0.25)),
                (ModeIndex::new(&[1, 1]), Complex::new(-0.3, 0.0)),
            ],
            1e-12,
        )
        .unwrap();
        let g = F::from_pairs(
            2,
            [(ModeIndex::new(&[0, 2]), Complex::new(0.0, 0.6))],
            1e-12,
        )
        .unwrap();
        let prod = f.multiply(&g).unwrap();
        let n = 11;
        let vf = sample_grid(&f, n).unwrap();
        let vg = sample_grid(&g, n).unwrap();
        let vp = sample_grid(&prod, n).unwrap();
        for i in 0..vp.len() {
            assert!((vp[i] - vf[i] * vg[i]).abs() < 1e-10);
        }
    }
}
