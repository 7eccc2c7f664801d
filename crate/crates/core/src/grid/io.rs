use std::io::{BufRead, Write};

use num_complex::Complex64;

use super::{GridDense, GridSpec, GridState, GridWave};
use crate::error::{Error, Result};

/// Writes `x,re,im` rows, or `x,x2,re,im` rows (row-major) for pair states.
pub fn write_csv(state: &GridState, mut out: impl Write) -> Result<()> {
    match state {
        GridState::Single(w) => {
            writeln!(out, "x,re,im")?;
            for (x, a) in w.spec().xs().zip(w.amplitudes()) {
                writeln!(out, "{x},{},{}", a.re, a.im)?;
            }
        }
        GridState::Pair(p) => return write_csv(&GridState::Dense(p.to_dense()?), out),
        GridState::Dense(d) => {
            writeln!(out, "x,x2,re,im")?;
            let [s1, s2] = d.specs();
            let mut amps = d.amplitudes().iter();
            for x1 in s1.xs() {
                for x2 in s2.xs() {
                    let a = amps.next().expect("dense array matches its grids");
                    writeln!(out, "{x1},{x2},{},{}", a.re, a.im)?;
                }
            }
        }
    }
    Ok(())
}

fn parse_row(line: &str, cols: usize, lineno: usize) -> Result<Vec<f64>> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != cols {
        return Err(Error::Format(format!("line {lineno}: expected {cols} columns, found {}", fields.len())));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| Error::Format(format!("line {lineno}: '{f}' is not a number")))
        })
        .collect()
}

/// Rebuilds a grid from consecutive, uniformly spaced node coordinates.
fn spec_from_nodes(nodes: &[f64]) -> Result<GridSpec> {
    if nodes.len() < 2 {
        return Err(Error::Format("grid needs at least two nodes".into()));
    }
    let dx = nodes[1] - nodes[0];
    for (k, x) in nodes.iter().enumerate() {
        let expected = nodes[0] + k as f64 * dx;
        if (x - expected).abs() > 1e-9 * dx.abs().max(x.abs()) {
            return Err(Error::Format(format!("node {k} breaks uniform spacing")));
        }
    }
    GridSpec::new(nodes.len(), nodes[0], nodes[0] + nodes.len() as f64 * dx)
}

/// Reads a CSV written by [`write_csv`]; pair data comes back as a dense state.
pub fn read_csv(input: impl BufRead) -> Result<GridState> {
    let mut lines = input.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) => {
                let l = l?;
                if !l.trim().is_empty() {
                    break l;
                }
            }
            None => return Err(Error::Format("empty grid file".into())),
        }
    };
    let header: Vec<String> = header.split(',').map(|h| h.trim().to_string()).collect();
    let cols = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["x", "re", "im"] => 3,
        ["x", "x2", "re", "im"] => 4,
        _ => return Err(Error::Format(format!("unrecognized grid header {header:?}"))),
    };
    let mut rows = Vec::new();
    for (i, l) in lines {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        rows.push(parse_row(&l, cols, i + 1)?);
    }
    if cols == 3 {
        let spec = spec_from_nodes(&rows.iter().map(|r| r[0]).collect::<Vec<_>>())?;
        let amps = rows.iter().map(|r| Complex64::new(r[1], r[2])).collect();
        return Ok(GridState::Single(GridWave::new(spec, amps)?));
    }
    let n2 = rows.iter().take_while(|r| r[0] == rows[0][0]).count();
    if n2 == 0 || rows.len() % n2 != 0 {
        return Err(Error::Format("pair grid rows do not form a rectangle".into()));
    }
    let x1: Vec<f64> = rows.iter().step_by(n2).map(|r| r[0]).collect();
    let x2: Vec<f64> = rows[..n2].iter().map(|r| r[1]).collect();
    for (k, r) in rows.iter().enumerate() {
        if r[0] != x1[k / n2] || r[1] != x2[k % n2] {
            return Err(Error::Format(format!("row {} is out of row-major order", k + 2)));
        }
    }
    let specs = [spec_from_nodes(&x1)?, spec_from_nodes(&x2)?];
    let amps = rows.iter().map(|r| Complex64::new(r[2], r[3])).collect();
    Ok(GridState::Dense(GridDense::new(specs, amps)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridPair, PairTerm};

    #[test]
    fn single_round_trip_is_exact() {
        let spec = GridSpec::new(64, -3.3, 4.1).unwrap();
        let w = GridWave::sample(spec, |x| Complex64::new(x.sin() / 3.0, (x * 0.7).cos()));
        let mut buf = Vec::new();
        write_csv(&w.clone().into(), &mut buf).unwrap();
        let GridState::Single(back) = read_csv(buf.as_slice()).unwrap() else { panic!() };
        assert_eq!(back.amplitudes(), w.amplitudes());
        assert!((back.spec().dx() - spec.dx()).abs() < 1e-12);
    }

    #[test]
    fn pair_round_trip_as_dense() {
        let spec = GridSpec::new(16, 0.0, 1.6).unwrap();
        let v: Vec<Complex64> = spec.xs().map(|x| Complex64::new(1.0 + x, -x)).collect();
        let pair = GridPair::new(
            [spec, spec],
            vec![PairTerm { coeff: Complex64::new(0.5, 0.0), first: v.clone(), second: v }],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&pair.clone().into(), &mut buf).unwrap();
        let GridState::Dense(back) = read_csv(buf.as_slice()).unwrap() else { panic!() };
        assert_eq!(back, pair.to_dense().unwrap());
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_csv("x,re,im\n0,1\n".as_bytes()).is_err());
        let uneven: String = std::iter::once("x,re,im".to_string())
            .chain((0..16).map(|k| format!("{},1,0", (k * k) as f64)))
            .collect::<Vec<_>>()
            .join("\n");
        assert!(read_csv(uneven.as_bytes()).is_err());
    }
}
