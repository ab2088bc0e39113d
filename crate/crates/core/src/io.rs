//! Text formats for fields, states, and schedules.
//!
//! All three are plain UTF-8 line formats with '#' comments, built to be
//! diffed and version-controlled:
//!
//!   field     one mode per line, "k1 .. kd re im"
//!   state     a "profile:" section then a "velocity:" section of field lines
//!   schedule  one segment per line, "duration p0 p1 .. p2d", or an
//!             idealized impulse "KICK c <field-file>"
//!
//! Writers emit modes in lexicographic order and format numbers with Rust's
//! shortest round-trip notation, so equal inputs produce byte-equal files.
//! Readers accept any mode order and complete missing conjugate partners;
//! inconsistent pairs are an error. Schedule files name their kick fields by
//! relative path, which the caller resolves through a loader callback, so
//! this module never touches the filesystem.

use crate::error::{Error, Result};
use crate::field::{FourierField, WaveState};
use crate::mode::ModeIndex;
use crate::scalar::Scalar;
use crate::schedule::{ControlSchedule, ControlSegment};
use num_complex::Complex;
use std::fmt::Write as _;

fn parse_err(context: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        context: context.to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_real<T: Scalar>(tok: &str, context: &str, line: usize) -> Result<T> {
    let x: f64 = tok
        .parse()
        .map_err(|_| parse_err(context, line, format!("expected a number, got '{tok}'")))?;
    if !x.is_finite() {
        return Err(parse_err(context, line, format!("non-finite number '{tok}'")));
    }
    Ok(T::of(x))
}

fn parse_int(tok: &str, context: &str, line: usize) -> Result<i64> {
    tok.parse()
        .map_err(|_| parse_err(context, line, format!("expected an integer, got '{tok}'")))
}

/// Numbered non-comment, non-empty lines (1-based, as an editor shows them).
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            None
        } else {
            Some((i + 1, body))
        }
    })
}

// -0.0 would print as "-0" and break byte-for-byte reproducibility.
fn unsign_zero<T: Scalar>(x: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x
    }
}

pub fn write_field<T: Scalar>(f: &FourierField<T>) -> String {
    let mut out = String::new();
    for (k, c) in f.modes() {
        for comp in k.components() {
            let _ = write!(out, "{comp} ");
        }
        let _ = writeln!(out, "{} {}", unsign_zero(c.re), unsign_zero(c.im));
    }
    out
}

pub fn parse_field<T: Scalar>(text: &str, dim: usize, context: &str) -> Result<FourierField<T>> {
    let mut pairs: Vec<(ModeIndex, Complex<T>)> = Vec::new();
    for (line, body) in data_lines(text) {
        let toks: Vec<&str> = body.split_whitespace().collect();
        if toks.len() != dim + 2 {
            return Err(parse_err(
                context,
                line,
                format!("expected {} tokens (k1..k{dim} re im), got {}", dim + 2, toks.len()),
            ));
        }
        let mut comps = Vec::with_capacity(dim);
        for tok in &toks[..dim] {
            comps.push(parse_int(tok, context, line)?);
        }
        let k = ModeIndex::new(&comps);
        if pairs.iter().any(|(p, _)| *p == k) {
            return Err(parse_err(context, line, format!("mode {k} listed twice")));
        }
        let re = parse_real(toks[dim], context, line)?;
        let im = parse_real(toks[dim + 1], context, line)?;
        pairs.push((k, Complex::new(re, im)));
    }
    FourierField::from_pairs(dim, pairs, T::of(1e-12))
}

pub fn write_state<T: Scalar>(s: &WaveState<T>) -> String {
    format!(
        "profile:\n{}velocity:\n{}",
        write_field(&s.profile),
        write_field(&s.velocity)
    )
}

pub fn parse_state<T: Scalar>(text: &str, dim: usize, context: &str) -> Result<WaveState<T>> {
    let mut profile_text = String::new();
    let mut velocity_text = String::new();
    let mut section: Option<bool> = None; // true while in "profile:"
    let mut seen = (false, false);
    for (line, body) in data_lines(text) {
        match body {
            "profile:" => {
                section = Some(true);
                seen.0 = true;
            }
            "velocity:" => {
                section = Some(false);
                seen.1 = true;
            }
            _ => match section {
                Some(true) => {
                    let _ = writeln!(profile_text, "{body}");
                }
                Some(false) => {
                    let _ = writeln!(velocity_text, "{body}");
                }
                None => {
                    return Err(parse_err(
                        context,
                        line,
                        "expected a 'profile:' or 'velocity:' section header first",
                    ))
                }
            },
        }
    }
    if !seen.0 || !seen.1 {
        return Err(parse_err(
            context,
            0,
            "state file needs both a 'profile:' and a 'velocity:' section",
        ));
    }
    WaveState::new(
        parse_field(&profile_text, dim, context)?,
        parse_field(&velocity_text, dim, context)?,
    )
}

/// Serializes a schedule. Idealized impulses store their field through
/// `store`, which receives the kick ordinal (0, 1, ...) and the field and
/// returns the name to embed in the KICK line.
pub fn write_schedule<T: Scalar>(
    schedule: &ControlSchedule<T>,
    mut store: impl FnMut(usize, &FourierField<T>) -> Result<String>,
) -> Result<String> {
    let mut out = String::new();
    let mut kicks = 0usize;
    for seg in schedule.segments() {
        match &seg.ideal_kick {
            Some((c, phi)) => {
                let name = store(kicks, phi)?;
                kicks += 1;
                let _ = writeln!(out, "KICK {c} {name}");
            }
            None => {
                let _ = write!(out, "{}", seg.duration);
                for &p in &seg.p {
                    let _ = write!(out, " {}", unsign_zero(p));
                }
                out.push('\n');
            }
        }
    }
    Ok(out)
}

/// Parses a schedule, resolving KICK field names through `load`.
pub fn parse_schedule<T: Scalar>(
    text: &str,
    context: &str,
    mut load: impl FnMut(&str) -> Result<FourierField<T>>,
) -> Result<ControlSchedule<T>> {
    let mut segments = Vec::new();
    let mut p_len: Option<usize> = None;
    for (line, body) in data_lines(text) {
        let toks: Vec<&str> = body.split_whitespace().collect();
        if toks[0] == "KICK" {
            if toks.len() != 3 {
                return Err(parse_err(context, line, "expected 'KICK c <field-file>'"));
            }
            let c = parse_real(toks[1], context, line)?;
            let phi = load(toks[2])?;
            segments.push(ControlSegment::ideal_kick(c, phi));
            continue;
        }
        if toks.len() < 2 {
            return Err(parse_err(
                context,
                line,
                "expected 'duration p0 p1 ...' with at least one amplitude",
            ));
        }
        match p_len {
            None => p_len = Some(toks.len() - 1),
            Some(n) if n == toks.len() - 1 => {}
            Some(n) => {
                return Err(parse_err(
                    context,
                    line,
                    format!("expected {n} amplitudes, got {}", toks.len() - 1),
                ))
            }
        }
        let duration = parse_real::<T>(toks[0], context, line)?;
        if duration < T::zero() {
            return Err(parse_err(context, line, "negative duration"));
        }
        let mut p = Vec::with_capacity(toks.len() - 1);
        for tok in &toks[1..] {
            p.push(parse_real(tok, context, line)?);
        }
        segments.push(ControlSegment { duration, p, ideal_kick: None });
    }
    ControlSchedule::new(segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    type F = FourierField<f64>;

    #[test]
    fn field_round_trip_is_byte_stable() {
        let f = F::from_pairs(
            2,
            [
                (ModeIndex::new(&[1, -2]), Complex::new(0.125, -0.5)),
                (ModeIndex::new(&[0, 0]), Complex::new(3.0, 0.0)),
            ],
            1e-12,
        )
        .unwrap();
        let text = write_field(&f);
        let back: F = parse_field(&text, 2, "t").unwrap();
        assert_eq!(back, f);
        assert_eq!(write_field(&back), text);
    }

    #[test]
    fn field_reader_completes_conjugate_partners() {
        let f: F = parse_field("1 0.5 -0.25\n", 1, "t").unwrap();
        assert_eq!(f.coeff(&ModeIndex::new(&[-1])), Complex::new(0.5, 0.25));

        let bad = parse_field::<f64>("1 0.5 0\n1 0.5 0\n", 1, "t");
        assert!(matches!(bad, Err(Error::Parse { line: 2, .. })));

        let conflict = parse_field::<f64>("1 0.5 0\n-1 0.4 0\n", 1, "t");
        assert!(matches!(conflict, Err(Error::HermitianConflict { .. })));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let f: F = parse_field("# a field\n\n0 2 0  # the mean\n", 1, "t").unwrap();
        assert_eq!(f.coeff(&ModeIndex::zero(1)), Complex::new(2.0, 0.0));
    }

    #[test]
    fn state_round_trip() {
        let s = WaveState::new(
            F::cosine(&ModeIndex::new(&[1])),
            F::constant(1, -0.5),
        )
        .unwrap();
        let text = write_state(&s);
        let back = parse_state::<f64>(&text, 1, "t").unwrap();
        assert_eq!(back, s);

        assert!(parse_state::<f64>("profile:\n0 1 0\n", 1, "t").is_err());
    }

    #[test]
    fn schedule_round_trip_with_kicks() {
        let phi = F::cosine(&ModeIndex::new(&[2]));
        let sched = ControlSchedule::new(vec![
            ControlSegment::constant(0.5, vec![1.0, -2.0, 0.0]).unwrap(),
            ControlSegment::ideal_kick(0.75, phi.clone()),
            ControlSegment::free(0.125, 1).unwrap(),
        ])
        .unwrap();

        let mut stored: BTreeMap<String, String> = BTreeMap::new();
        let text = write_schedule(&sched, |i, f| {
            let name = format!("kick_{i}.field");
            stored.insert(name.clone(), write_field(f));
            Ok(name)
        })
        .unwrap();
        assert!(text.contains("KICK 0.75 kick_0.field"));

        let back = parse_schedule(&text, "t", |name| {
            parse_field(&stored[name], 1, name)
        })
        .unwrap();
        assert_eq!(back, sched);
    }

    #[test]
    fn schedule_parse_errors_carry_line_numbers() {
        let bad = parse_schedule::<f64>("0.5 1 0 0\nnonsense\n", "sched", |_| {
            Ok(F::zero(1))
        });
        assert!(matches!(bad, Err(Error::Parse { line: 2, .. })));

        let wrong_arity = parse_schedule::<f64>("0.5 1 0 0\n0.5 1 0\n", "sched", |_| {
            Ok(F::zero(1))
        });
        assert!(matches!(wrong_arity, Err(Error::Parse { line: 2, .. })));
    }
}
