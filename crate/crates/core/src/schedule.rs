//! Piecewise-constant control laws as data.
//!
//! A segment holds a duration and one amplitude per generator; the control
//! during the segment is sum_j p[j] mu_j. A segment may instead carry an
//! idealized impulse (c, phi): zero duration, applied as the exact kick
//! operator. Those exist for diagnostics, to separate the error made by the
//! small-time limits from the error made by realizing them with finite
//! segments.
//!
//! Concatenation `then` runs the left schedule first and appends the right
//! one; total time adds.

use crate::error::{Error, Result};
use crate::field::FourierField;
use crate::scalar::Scalar;

#[derive(Clone, PartialEq, Debug)]
pub struct ControlSegment<T: Scalar> {
    pub duration: T,
    pub p: Vec<T>,
    pub ideal_kick: Option<(T, FourierField<T>)>,
}

impl<T: Scalar> ControlSegment<T> {
    /// Segment with constant amplitudes over a nonnegative duration.
    pub fn constant(duration: T, p: Vec<T>) -> Result<Self> {
        if duration < T::zero() {
            return Err(Error::NonPositiveDuration {
                got: duration.to_f64(),
            });
        }
        Ok(ControlSegment {
            duration,
            p,
            ideal_kick: None,
        })
    }

    /// Zero-control segment: plain free evolution.
    pub fn free(duration: T, dim: usize) -> Result<Self> {
        ControlSegment::constant(duration, vec![T::zero(); 2 * dim + 1])
    }

    /// Idealized impulse e^{c phi B}; takes no time.
    pub fn ideal_kick(c: T, phi: FourierField<T>) -> Self {
        ControlSegment {
            duration: T::zero(),
            p: Vec::new(),
            ideal_kick: Some((c, phi)),
        }
    }

    pub fn is_zero_control(&self) -> bool {
        self.ideal_kick.is_none() && self.p.iter().all(|&x| x == T::zero())
    }
}

#[derive(Clone, PartialEq, Debug, Default)]
pub struct ControlSchedule<T: Scalar> {
    segments: Vec<ControlSegment<T>>,
}

impl<T: Scalar> ControlSchedule<T> {
    pub fn empty() -> Self {
        ControlSchedule {
            segments: Vec::new(),
        }
    }

    /// Validates segment shapes: nonnegative durations, impulses carry no
    /// amplitudes, and every amplitude vector has the same length.
    pub fn new(segments: Vec<ControlSegment<T>>) -> Result<Self> {
        let mut p_len: Option<usize> = None;
        for seg in &segments {
            if seg.duration < T::zero() {
                return Err(Error::NonPositiveDuration {
                    got: seg.duration.to_f64(),
                });
            }
            if seg.ideal_kick.is_some() {
                if seg.duration != T::zero() || !seg.p.is_empty() {
                    return Err(Error::Config(
                        "impulse segments must have zero duration and no amplitudes".into(),
                    ));
                }
                continue;
            }
            match p_len {
                None => p_len = Some(seg.p.len()),
                Some(n) if n == seg.p.len() => {}
                Some(n) => {
                    return Err(Error::CoefficientLength {
                        expected: n,
                        got: seg.p.len(),
                    })
                }
            }
        }
        Ok(ControlSchedule { segments })
    }

    pub fn single(segment: ControlSegment<T>) -> Result<Self> {
        ControlSchedule::new(vec![segment])
    }

    pub fn segments(&self) -> &[ControlSegment<T>] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_time(&self) -> T {
        self.segments
            .iter()
            .map(|s| s.duration)
            .fold(T::zero(), |a, b| a + b)
    }

    /// This schedule followed by `next`.
    pub fn then(&self, next: &ControlSchedule<T>) -> Result<ControlSchedule<T>> {
        let mut segments = self.segments.clone();
        segments.extend(next.segments.iter().cloned());
        ControlSchedule::new(segments)
    }

    pub fn push(&mut self, segment: ControlSegment<T>) -> Result<()> {
        let mut segments = std::mem::take(&mut self.segments);
        segments.push(segment);
        *self = ControlSchedule::new(segments)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode::ModeIndex;

    #[test]
    fn total_time_adds_under_concatenation() {
        let a = ControlSchedule::single(ControlSegment::constant(0.5, vec![1.0, 0.0, 0.0]).unwrap())
            .unwrap();
        let b = ControlSchedule::single(ControlSegment::free(0.25, 1).unwrap()).unwrap();
        let ab = a.then(&b).unwrap();
        assert_eq!(ab.segments().len(), 2);
        assert!((ab.total_time() - 0.75f64).abs() < 1e-15);
        // left runs first
        assert_eq!(ab.segments()[0].p, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn shape_validation() {
        assert!(ControlSegment::<f64>::constant(-0.1, vec![0.0]).is_err());

        let mixed = ControlSchedule::new(vec![
            ControlSegment::constant(0.1, vec![1.0, 0.0, 0.0]).unwrap(),
            ControlSegment::constant(0.1, vec![1.0]).unwrap(),
        ]);
        assert!(mixed.is_err());

        let phi = FourierField::<f64>::cosine(&ModeIndex::new(&[1]));
        let k = ControlSegment::ideal_kick(2.0, phi);
        assert_eq!(k.duration, 0.0);
        assert!(ControlSchedule::single(k).is_ok());
    }

    #[test]
    fn empty_schedule_has_zero_time() {
        let e = ControlSchedule::<f64>::empty();
        assert!(e.is_empty());
        assert_eq!(e.total_time(), 0.0);
    }
}
