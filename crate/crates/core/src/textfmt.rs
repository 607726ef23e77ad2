//! Line-based text format for global measures, relaxed controls and
//! heterogeneous profiles.
//!
//! Blank lines and lines starting with `#` are ignored. Numbers use Rust's
//! shortest round-trip form, so write-then-read is exact. Pure path
//! controls are written as their actions over nodes `(s, path)` in order of
//! `s`, then path index, with all coordinates of an action adjacent.
//!
//! ```text
//! global t=1
//! atom x=0 w=0.25 : 0.25 0.75 0.5 0.5
//!
//! relaxed start=0 support=0.25 0.5 0.75
//! row s=0 p=0 : 0.5 0.5 0
//!
//! profile t=0
//! player path=1 : 0.25 0.75 0.5
//! ```

use std::fmt::Write;

use crate::control::{PurePathControl, RelaxedControl};
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::hetero::{HeteroProfile, ProfileControl};
use crate::relaxed::GlobalMeasure;

fn join(xs: &[f64]) -> String {
    xs.iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::InvalidArgument(format!("line {line}: {}", msg.into()))
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

type Split = (String, Vec<(String, String)>, Vec<f64>);

/// Splits `head k=v ... : values` into the head word, key-value pairs and
/// the values after the colon.
fn split(line: usize, text: &str) -> Result<Split> {
    let (left, right) = match text.split_once(':') {
        Some((l, r)) => (l, Some(r)),
        None => (text, None),
    };
    let mut words = left.split_whitespace();
    let head = words
        .next()
        .ok_or_else(|| bad(line, "empty record"))?
        .to_string();
    let mut pairs: Vec<(String, String)> = Vec::new();
    for w in words {
        match w.split_once('=') {
            Some((k, v)) => pairs.push((k.to_string(), v.to_string())),
            // continuation of a list-valued key such as `support=`
            None => match pairs.last_mut() {
                Some(last) => {
                    last.1.push(' ');
                    last.1.push_str(w);
                }
                None => return Err(bad(line, format!("unexpected `{w}`"))),
            },
        }
    }
    let values = right
        .map(|r| {
            r.split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| bad(line, format!("bad number `{v}`")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?
        .unwrap_or_default();
    Ok((head, pairs, values))
}

fn key<'a>(line: usize, pairs: &'a [(String, String)], k: &str) -> Result<&'a str> {
    pairs
        .iter()
        .find(|(a, _)| a == k)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| bad(line, format!("missing `{k}=`")))
}

fn num<T: std::str::FromStr>(line: usize, pairs: &[(String, String)], k: &str) -> Result<T> {
    let v = key(line, pairs, k)?;
    v.parse()
        .map_err(|_| bad(line, format!("bad value `{v}` for `{k}`")))
}

fn pure_from_flat(
    spec: &GameSpec,
    start: usize,
    flat: &[f64],
    line: usize,
) -> Result<PurePathControl> {
    let dim = spec.actions().dim();
    let nodes: usize = (start..spec.horizon())
        .map(|s| spec.d().pow(s as u32 + 1))
        .sum();
    if flat.len() != nodes * dim {
        return Err(bad(
            line,
            format!("expected {} actions, got {}", nodes * dim, flat.len()),
        ));
    }
    let mut offset = 0;
    PurePathControl::from_fn(spec, start, |_, _| {
        let a = flat[offset..offset + dim].to_vec();
        offset += dim;
        a
    })
}

pub fn write_global(lam: &GlobalMeasure) -> String {
    let mut out = format!("global t={}\n", lam.time());
    for x in 0..lam.start_measure().len() {
        for (a, w) in lam.atoms(x) {
            let _ = writeln!(out, "atom x={x} w={w:?} : {}", join(a.flat_actions()));
        }
    }
    out
}

pub fn read_global(spec: &GameSpec, text: &str) -> Result<GlobalMeasure> {
    let mut it = lines(text);
    let (l0, first) = it.next().ok_or(Error::Empty("global measure text"))?;
    let (head, pairs, _) = split(l0, first)?;
    if head != "global" {
        return Err(bad(l0, "expected `global`"));
    }
    let t: usize = num(l0, &pairs, "t")?;
    spec.check_time(t)?;
    let mut atoms = vec![Vec::new(); spec.path_space(t).len()];
    for (l, text) in it {
        let (head, pairs, values) = split(l, text)?;
        if head != "atom" {
            return Err(bad(l, format!("expected `atom`, got `{head}`")));
        }
        let x: usize = num(l, &pairs, "x")?;
        let w: f64 = num(l, &pairs, "w")?;
        let slot = atoms
            .get_mut(x)
            .ok_or_else(|| bad(l, format!("path {x} outside X_{t}")))?;
        slot.push((pure_from_flat(spec, t, &values, l)?, w));
    }
    GlobalMeasure::new(spec, t, atoms)
}

pub fn write_relaxed(gamma: &RelaxedControl) -> String {
    let mut out = format!(
        "relaxed start={} support={}\n",
        gamma.start(),
        join(gamma.flat_support())
    );
    for s in gamma.start()..gamma.horizon() {
        for p in 0..gamma.d().pow(s as u32 + 1) {
            let _ = writeln!(out, "row s={s} p={p} : {}", join(gamma.row(s, p)));
        }
    }
    out
}

pub fn read_relaxed(spec: &GameSpec, text: &str) -> Result<RelaxedControl> {
    let mut it = lines(text);
    let (l0, first) = it.next().ok_or(Error::Empty("relaxed control text"))?;
    let (head, pairs, _) = split(l0, first)?;
    if head != "relaxed" {
        return Err(bad(l0, "expected `relaxed`"));
    }
    let start: usize = num(l0, &pairs, "start")?;
    let support = key(l0, &pairs, "support")?
        .split_whitespace()
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| bad(l0, format!("bad support value `{v}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = std::collections::BTreeMap::new();
    for (l, text) in it {
        let (head, pairs, values) = split(l, text)?;
        if head != "row" {
            return Err(bad(l, format!("expected `row`, got `{head}`")));
        }
        let s: usize = num(l, &pairs, "s")?;
        let p: usize = num(l, &pairs, "p")?;
        if rows.insert((s, p), values).is_some() {
            return Err(bad(l, format!("duplicate row ({s}, {p})")));
        }
    }
    let mut missing = None;
    let gamma =
        RelaxedControl::with_support(spec, start, support, |s, p| match rows.remove(&(s, p)) {
            Some(r) => r,
            None => {
                missing.get_or_insert((s, p));
                vec![f64::NAN]
            }
        });
    if let Some((s, p)) = missing {
        return Err(Error::InvalidArgument(format!("missing row ({s}, {p})")));
    }
    if let Some((s, p)) = rows.keys().next() {
        return Err(Error::InvalidArgument(format!(
            "row ({s}, {p}) outside the control's nodes"
        )));
    }
    gamma
}

/// Profiles with feedback controls have no finite text form and fault.
pub fn write_profile(profile: &HeteroProfile) -> Result<String> {
    let mut out = format!("profile t={}\n", profile.t());
    for (path, c) in profile.paths().iter().zip(profile.controls()) {
        match c {
            ProfileControl::Pure(a) => {
                let _ = writeln!(out, "player path={path} : {}", join(a.flat_actions()));
            }
            ProfileControl::Feedback(_) => {
                return Err(Error::InvalidArgument(
                    "feedback controls cannot be written as text".into(),
                ))
            }
        }
    }
    Ok(out)
}

pub fn read_profile(spec: &GameSpec, text: &str) -> Result<HeteroProfile> {
    let mut it = lines(text);
    let (l0, first) = it.next().ok_or(Error::Empty("profile text"))?;
    let (head, pairs, _) = split(l0, first)?;
    if head != "profile" {
        return Err(bad(l0, "expected `profile`"));
    }
    let t: usize = num(l0, &pairs, "t")?;
    spec.check_time(t)?;
    let mut paths = Vec::new();
    let mut controls = Vec::new();
    for (l, text) in it {
        let (head, pairs, values) = split(l, text)?;
        if head != "player" {
            return Err(bad(l, format!("expected `player`, got `{head}`")));
        }
        paths.push(num(l, &pairs, "path")?);
        controls.push(ProfileControl::Pure(pure_from_flat(spec, t, &values, l)?));
    }
    HeteroProfile::new(spec, t, paths, controls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::PathMeasure;
    use crate::models::path_switching_spec;
    use crate::relaxed::lambda_from_gamma;

    fn gamma(spec: &GameSpec) -> RelaxedControl {
        RelaxedControl::from_rows(spec, 0, |s, p| match (s + p) % 3 {
            0 => vec![0.5, 0.5, 0.0],
            1 => vec![0.1, 0.2, 0.7],
            _ => vec![0.0, 0.0, 1.0],
        })
        .unwrap()
    }

    #[test]
    fn relaxed_round_trip_is_exact() {
        let spec = path_switching_spec(2).unwrap();
        let g = gamma(&spec);
        let text = write_relaxed(&g);
        assert_eq!(read_relaxed(&spec, &text).unwrap(), g);
    }

    #[test]
    fn global_round_trip_is_exact() {
        let spec = path_switching_spec(2).unwrap();
        let mu = PathMeasure::uniform(spec.path_space(0));
        let lam = lambda_from_gamma(&spec, 0, &mu, &gamma(&spec)).unwrap();
        let text = write_global(&lam);
        assert_eq!(read_global(&spec, &text).unwrap(), lam);
    }

    #[test]
    fn profile_round_trip_and_errors() {
        let spec = path_switching_spec(2).unwrap();
        let a = PurePathControl::from_fn(&spec, 1, |s, p| {
            vec![if (s + p) % 2 == 0 { 0.25 } else { 0.75 }]
        })
        .unwrap();
        let paths = vec![0, 1, 2, 3, 3];
        let prof = HeteroProfile::new(&spec, 1, paths, vec![ProfileControl::Pure(a); 5]).unwrap();
        let text = write_profile(&prof).unwrap();
        assert_eq!(read_profile(&spec, &text).unwrap(), prof);
        let broken = format!("{text}player path=0 : 0.3x 0.25\n");
        assert!(read_profile(&spec, &broken).is_err());
        assert!(read_relaxed(
            &spec,
            "relaxed start=0 support=0.25 0.5 0.75\nrow s=0 p=0 : 1 0 0\n"
        )
        .is_err());
    }
}
