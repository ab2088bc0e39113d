//! Certificates that a trigonometric mode can be reached from the control
//! generators using only squares.
//!
//! The reachable sets are built in levels: level 0 is the span of the
//! generators mu_j; a level n+1 element is base - sum_i sq_i^2 with base and
//! sq_i of level n. Squares matter because a conjugated kick pair subtracts
//! psi^2 * w from the velocity, so every certified square is schedulable.
//!
//! Any +-cos(kx) or +-sin(kx) is certified recursively by four identities:
//!   +-cos(2kx) = 1 - 2 {sin,cos}^2(kx)
//!   +-sin(2kx) = 1 - (sin(kx) -+ cos(kx))^2
//!   +-cos((k+m)x) = 1 - (cos kx -+ cos mx)^2/2 - (sin kx +- sin mx)^2/2
//!   +-sin((k+m)x) = 1 - (sin kx -+ cos mx)^2/2 - (cos kx -+ sin mx)^2/2
//! peeling one standard basis step m per level, so the square contents are
//! always "tree plus generator" and stay representable. Trees scale by a > 0
//! (base by a, squares by sqrt(a)); negation is deliberately not a tree
//! operation, the sign is routed into the identity instead.

use crate::error::{Error, Result};
use crate::field::{from_generator_coeffs, generator_count, FourierField, SobolevIndex};
use crate::mode::ModeIndex;
use crate::scalar::Scalar;
use std::fmt::Write as _;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TrigKind {
    Cos,
    Sin,
}

#[derive(Clone, PartialEq, Debug)]
pub enum SatExpression<T: Scalar> {
    /// sum_j a_j mu_j, level 0.
    Generator(Vec<T>),
    /// base - sum_i squares_i^2, level 1 + deepest child.
    Combination {
        base: Box<SatExpression<T>>,
        squares: Vec<SatExpression<T>>,
    },
}

impl<T: Scalar> SatExpression<T> {
    pub fn level(&self) -> usize {
        match self {
            SatExpression::Generator(_) => 0,
            SatExpression::Combination { base, squares } => {
                let children = std::iter::once(base.level())
                    .chain(squares.iter().map(|s| s.level()))
                    .max()
                    .unwrap_or(0);
                1 + children
            }
        }
    }

    /// Multiplies the represented value by a > 0 without changing the tree
    /// shape: the base absorbs a, every square absorbs sqrt(a).
    pub fn scale(&self, a: T) -> SatExpression<T> {
        assert!(a > T::zero(), "tree scaling needs a positive factor");
        match self {
            SatExpression::Generator(c) => {
                SatExpression::Generator(c.iter().map(|&x| x * a).collect())
            }
            SatExpression::Combination { base, squares } => {
                let r = a.sqrt();
                SatExpression::Combination {
                    base: Box::new(base.scale(a)),
                    squares: squares.iter().map(|s| s.scale(r)).collect(),
                }
            }
        }
    }

    /// Adds a level-0 element to the represented value by absorbing it into
    /// the base spine; the squares are untouched.
    fn add_generator(&self, g: &[T]) -> SatExpression<T> {
        match self {
            SatExpression::Generator(c) => SatExpression::Generator(
                c.iter().zip(g).map(|(&a, &b)| a + b).collect(),
            ),
            SatExpression::Combination { base, squares } => SatExpression::Combination {
                base: Box::new(base.add_generator(g)),
                squares: squares.clone(),
            },
        }
    }

    /// Canonical single-line s-expression dump, used by the CLI and goldens.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.write_sexpr(&mut out);
        out
    }

    fn write_sexpr(&self, out: &mut String) {
        match self {
            SatExpression::Generator(c) => {
                out.push_str("(gen");
                for x in c {
                    let _ = write!(out, " {x}");
                }
                out.push(')');
            }
            SatExpression::Combination { base, squares } => {
                out.push_str("(comb ");
                base.write_sexpr(out);
                for s in squares {
                    out.push(' ');
                    s.write_sexpr(out);
                }
                out.push(')');
            }
        }
    }
}

/// Symbolic expansion of the represented value into mode space.
pub fn expand<T: Scalar>(e: &SatExpression<T>, dim: usize) -> Result<FourierField<T>> {
    match e {
        SatExpression::Generator(c) => from_generator_coeffs(dim, c),
        SatExpression::Combination { base, squares } => {
            let mut acc = expand(base, dim)?;
            for s in squares {
                let v = expand(s, dim)?;
                acc = acc.sub(&v.multiply(&v)?)?;
            }
            Ok(acc)
        }
    }
}

fn gen_zero<T: Scalar>(dim: usize) -> Vec<T> {
    vec![T::zero(); generator_count(dim)]
}

fn gen_constant<T: Scalar>(dim: usize, a: T) -> Vec<T> {
    let mut g = gen_zero(dim);
    g[0] = a;
    g
}

fn gen_cos<T: Scalar>(dim: usize, axis: usize, a: T) -> Vec<T> {
    let mut g = gen_zero(dim);
    g[2 * axis + 1] = a;
    g
}

fn gen_sin<T: Scalar>(dim: usize, axis: usize, a: T) -> Vec<T> {
    let mut g = gen_zero(dim);
    g[2 * axis + 2] = a;
    g
}

/// Certificate for sign * kind(k.x). Total on all of Z^d: negative leading
/// components are normalized through cos(-k.x) = cos(k.x) and
/// sin(-k.x) = -sin(k.x), and sin(0.x) is the zero generator.
pub fn saturate_mode<T: Scalar>(k: &ModeIndex, kind: TrigKind, sign: i8) -> SatExpression<T> {
    let dim = k.dim();
    let s = if sign >= 0 { T::one() } else { -T::one() };

    if k.is_zero() {
        return match kind {
            TrigKind::Cos => SatExpression::Generator(gen_constant(dim, s)),
            TrigKind::Sin => SatExpression::Generator(gen_zero(dim)),
        };
    }
    if !k.is_positive() {
        let flipped = match kind {
            TrigKind::Cos => sign,
            TrigKind::Sin => -sign,
        };
        return saturate_mode(&k.neg(), kind, flipped);
    }

    // Unit vectors are generators outright.
    if k.l1() == 1 {
        let axis = first_axis(k);
        return SatExpression::Generator(match kind {
            TrigKind::Cos => gen_cos(dim, axis, s),
            TrigKind::Sin => gen_sin(dim, axis, s),
        });
    }

    let pos = sign >= 0;

    // Doubling beats peeling when it applies: cos(2k') for any single-axis
    // even k (its square is one scaled tree), sin(2k') only for k' a unit
    // vector (the square mixes sin and cos of k', which is only a tree when
    // both are generators).
    if let Some(half) = single_axis_half(k) {
        match kind {
            TrigKind::Cos => {
                let inner = match pos {
                    true => saturate_mode(&half, TrigKind::Sin, 1),
                    false => saturate_mode(&half, TrigKind::Cos, 1),
                };
                return SatExpression::Combination {
                    base: Box::new(SatExpression::Generator(gen_constant(dim, T::one()))),
                    squares: vec![inner.scale(T::of(2.0).sqrt())],
                };
            }
            TrigKind::Sin if half.l1() == 1 => {
                let axis = first_axis(&half);
                // (sin -+ cos)(e.x) is itself level 0.
                let mut g = gen_sin(dim, axis, T::one());
                g[2 * axis + 1] = if pos { -T::one() } else { T::one() };
                return SatExpression::Combination {
                    base: Box::new(SatExpression::Generator(gen_constant(dim, T::one()))),
                    squares: vec![SatExpression::Generator(g)],
                };
            }
            TrigKind::Sin => {}
        }
    }

    // Peel one basis step off the first nonzero component.
    let axis = first_axis(k);
    let step = if k.components()[axis] > 0 { 1 } else { -1 };
    let mut rest = k.components().to_vec();
    rest[axis] -= step;
    let rest = ModeIndex::new(&rest);

    // cos(m.x) and sin(m.x) for the peeled step m = step * e_axis.
    let cos_m = gen_cos::<T>(dim, axis, T::one());
    let sin_m = gen_sin::<T>(dim, axis, T::of(step as f64));

    let cos_rest = saturate_mode::<T>(&rest, TrigKind::Cos, 1);
    let sin_rest = saturate_mode::<T>(&rest, TrigKind::Sin, 1);

    let (sq1, sq2) = match kind {
        TrigKind::Cos => (
            cos_rest.add_generator(&scale_gen(&cos_m, -s)),
            sin_rest.add_generator(&scale_gen(&sin_m, s)),
        ),
        TrigKind::Sin => (
            sin_rest.add_generator(&scale_gen(&cos_m, -s)),
            cos_rest.add_generator(&scale_gen(&sin_m, -s)),
        ),
    };
    let half = T::of(0.5).sqrt();
    SatExpression::Combination {
        base: Box::new(SatExpression::Generator(gen_constant(dim, T::one()))),
        squares: vec![sq1.scale(half), sq2.scale(half)],
    }
}

fn first_axis(k: &ModeIndex) -> usize {
    k.components()
        .iter()
        .position(|&x| x != 0)
        .expect("nonzero mode")
}

fn scale_gen<T: Scalar>(g: &[T], a: T) -> Vec<T> {
    g.iter().map(|&x| x * a).collect()
}

/// Some(k/2) when k is even and supported on a single axis.
fn single_axis_half(k: &ModeIndex) -> Option<ModeIndex> {
    let mut half = Vec::with_capacity(k.dim());
    let mut nonzero_axes = 0;
    for &c in k.components() {
        if c != 0 {
            nonzero_axes += 1;
            if c % 2 != 0 || nonzero_axes > 1 {
                return None;
            }
        }
        half.push(c / 2);
    }
    Some(ModeIndex::new(&half))
}

/// One certified trig term of a decomposition. The weight is positive; the
/// coefficient's sign lives inside the expression.
#[derive(Clone, Debug)]
pub struct SatTerm<T: Scalar> {
    pub weight: T,
    pub expr: SatExpression<T>,
}

#[derive(Clone, Debug)]
pub struct SatDecomposition<T: Scalar> {
    pub terms: Vec<SatTerm<T>>,
    pub achieved_target: FourierField<T>,
    pub residual_norm: T,
}

/// Rewrites a real finite-support field as a positively weighted sum of
/// certified +-cos / +-sin terms. Finite-support targets reconstruct
/// exactly, so the residual is floating dust; `max_residual` guards the
/// claim.
pub fn decompose<T: Scalar>(
    target: &FourierField<T>,
    max_residual: T,
) -> Result<SatDecomposition<T>> {
    let dim = target.dim();
    let two = T::of(2.0);
    let mut terms = Vec::new();
    let mut achieved = FourierField::zero(dim);

    for (k, c) in target.modes() {
        if k.is_zero() {
            let a = c.re;
            if a != T::zero() {
                let sign = if a >= T::zero() { 1 } else { -1 };
                terms.push(SatTerm {
                    weight: a.abs(),
                    expr: saturate_mode(k, TrigKind::Cos, sign),
                });
                achieved = achieved.add(&FourierField::constant(dim, a))?;
            }
        } else if k.is_positive() {
            let a = two * c.re;
            let b = -two * c.im;
            if a != T::zero() {
                let sign = if a >= T::zero() { 1 } else { -1 };
                terms.push(SatTerm {
                    weight: a.abs(),
                    expr: saturate_mode(k, TrigKind::Cos, sign),
                });
                achieved = achieved.add(&FourierField::cosine(k).scale(a))?;
            }
            if b != T::zero() {
                let sign = if b >= T::zero() { 1 } else { -1 };
                terms.push(SatTerm {
                    weight: b.abs(),
                    expr: saturate_mode(k, TrigKind::Sin, sign),
                });
                achieved = achieved.add(&FourierField::sine(k).scale(b))?;
            }
        }
    }

    let residual_norm = target.sub(&achieved)?.sobolev_norm(SobolevIndex::L2);
    if residual_norm > max_residual {
        return Err(Error::ResidualTooLarge {
            residual: residual_norm.to_f64(),
            max: max_residual.to_f64(),
        });
    }
    Ok(SatDecomposition {
        terms,
        achieved_target: achieved,
        residual_norm,
    })
}
