//! Simulated position and momentum measurements on two-particle grid states,
//! and estimation of the criterion from the resulting click records.

mod estimate;
pub mod rng;
mod sampler;

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridMixture, GridState};
use rng::CounterRng;
use sampler::PairSampler;

pub use estimate::{estimate_criterion, plug_in_estimate, EstimateReport, Verdict, BOOTSTRAP_RESAMPLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementKind {
    Position,
    Momentum,
}

impl MeasurementKind {
    fn tag(self) -> u64 {
        match self {
            MeasurementKind::Position => 0x706f_7369,
            MeasurementKind::Momentum => 0x6d6f_6d65,
        }
    }
}

/// Click records `(v1, v2)` of one measurement kind.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub records: Vec<(f64, f64)>,
    pub seed: u64,
    pub kind: MeasurementKind,
}

/// JSON sidecar written next to a sample CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSidecar {
    pub seed: u64,
    pub kind: MeasurementKind,
    pub n: usize,
    pub descriptor_sha256: Option<String>,
}

const DRAWS_PER_RECORD: u64 = 4;
const BLOCK: usize = 4096;

/// Inverse-CDF sampling of `n` records; deterministic in `(state, kind, n, seed)`.
pub fn sample_measurements(state: &GridMixture, kind: MeasurementKind, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let samplers = state
        .components()
        .iter()
        .map(|(w, s)| match s {
            GridState::Pair(p) => Ok((*w, PairSampler::new(p, kind)?)),
            GridState::Single(_) => Err(Error::Arity { observable: "pair measurement", arity: 1 }),
            GridState::Dense(_) => Err(Error::invalid(
                "sampling needs a structured pair state; dense grids are not supported",
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cumulative = Vec::with_capacity(samplers.len());
    let mut acc = 0.0;
    for (w, _) in &samplers {
        acc += w;
        cumulative.push(acc);
    }
    let rng = CounterRng::new(seed).derive(kind.tag());
    let draw = |i: usize| {
        let base = i as u64 * DRAWS_PER_RECORD;
        let u = rng.f64_at(base + 3) * acc;
        let k = cumulative.partition_point(|&c| c <= u).min(samplers.len() - 1);
        samplers[k].1.draw(&rng, base)
    };
    let records = (0..n)
        .into_par_iter()
        .with_min_len(BLOCK)
        .map(draw)
        .collect();
    Ok(SampleSet { records, seed, kind })
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn sidecar(&self, descriptor_sha256: Option<String>) -> SampleSidecar {
        SampleSidecar { seed: self.seed, kind: self.kind, n: self.len(), descriptor_sha256 }
    }

    /// `index,v1,v2` rows.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "index,v1,v2")?;
        for (i, (a, b)) in self.records.iter().enumerate() {
            writeln!(out, "{i},{a},{b}")?;
        }
        Ok(())
    }

    pub fn read_csv(input: impl BufRead, sidecar: &SampleSidecar) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "index,v1,v2" {
            return Err(Error::Format("sample file must start with 'index,v1,v2'".into()));
        }
        let mut records = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::Format(format!("sample row {} is malformed", row + 1));
            if f.len() != 3 || f[0].parse::<usize>().ok() != Some(records.len()) {
                return Err(bad());
            }
            records.push((f[1].parse().map_err(|_| bad())?, f[2].parse().map_err(|_| bad())?));
        }
        if records.len() != sidecar.n {
            return Err(Error::Format(format!(
                "sidecar announces {} records, file holds {}",
                sidecar.n,
                records.len()
            )));
        }
        Ok(Self { records, seed: sidecar.seed, kind: sidecar.kind })
    }
}
