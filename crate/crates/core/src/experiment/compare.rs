use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{Algorithm, ExperimentConfig};
use super::phases::quantile;
use super::{write_json, Prepared};
use crate::error::{Error, Result};
use crate::msg::{msg_objective_gap, msg_step, MsgIterate};
use crate::pls_core::{fmt_f64, gha_step, objective, TwoViewSample};

pub const COMPARISON_CSV_HEADER: &str = "iter,algorithm,gap,seed";

/// Fraction of `λ₁` below which the objective gap counts as reached.
pub const GAP_TARGET: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedComparison {
    pub seed: u64,
    /// SHA-256 over the samples each algorithm consumed.
    pub checksum_gha: String,
    pub checksum_msg: String,
    /// First iteration with gap ≤ `GAP_TARGET · λ₁`.
    pub gha_hit: Option<u64>,
    pub msg_hit: Option<u64>,
    pub gha_final_gap: f64,
    pub msg_final_gap: f64,
}

impl SeedComparison {
    /// GHA reached the target strictly earlier (a miss counts as never).
    pub fn gha_faster(&self) -> bool {
        match (self.gha_hit, self.msg_hit) {
            (Some(g), Some(m)) => g < m,
            (Some(_), None) => true,
            _ => false,
        }
    }
}

/// Wall-clock of the full update loop, in milliseconds per 10³ iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedTiming {
    pub seed: u64,
    pub gha_ms_per_1k: f64,
    pub msg_ms_per_1k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub lambda1: f64,
    pub target_gap: f64,
    pub seeds: Vec<SeedComparison>,
    /// Kept apart from `seeds` because it is not reproducible.
    pub timings: Vec<SeedTiming>,
    /// `(iter, gha gap, msg gap)` at the log stride, per seed.
    pub curves: Vec<(u64, Vec<(u64, f64, f64)>)>,
}

#[derive(Serialize)]
struct ComparisonJson<'a> {
    lambda1: f64,
    target_gap: f64,
    gha_faster: usize,
    n_seeds: usize,
    seeds: &'a [SeedComparison],
}

#[derive(Serialize)]
struct TimingJson<'a> {
    median_gha_ms_per_1k: Option<f64>,
    median_msg_ms_per_1k: Option<f64>,
    seeds: &'a [SeedTiming],
}

impl Comparison {
    pub fn gha_faster_count(&self) -> usize {
        self.seeds.iter().filter(|s| s.gha_faster()).count()
    }

    pub fn median_ms_per_1k(&self) -> (Option<f64>, Option<f64>) {
        let med = |f: fn(&SeedTiming) -> f64| {
            let mut v: Vec<f64> = self.timings.iter().map(f).collect();
            v.sort_by(f64::total_cmp);
            quantile(&v, 0.5)
        };
        (med(|t| t.gha_ms_per_1k), med(|t| t.msg_ms_per_1k))
    }

    /// Writes `comparison.csv`, `comparison.json` and `timing.json`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let csv = dir.join("comparison.csv");
        let mut w = BufWriter::new(fs::File::create(&csv)?);
        writeln!(w, "{COMPARISON_CSV_HEADER}")?;
        for (seed, rows) in &self.curves {
            for &(k, g, m) in rows {
                writeln!(w, "{k},gha,{},{seed}", fmt_f64(g))?;
                writeln!(w, "{k},msg,{},{seed}", fmt_f64(m))?;
            }
        }
        w.flush()?;

        let json = dir.join("comparison.json");
        write_json(
            &json,
            &ComparisonJson {
                lambda1: self.lambda1,
                target_gap: self.target_gap,
                gha_faster: self.gha_faster_count(),
                n_seeds: self.seeds.len(),
                seeds: &self.seeds,
            },
        )?;
        let timing = dir.join("timing.json");
        let (g, m) = self.median_ms_per_1k();
        write_json(
            &timing,
            &TimingJson {
                median_gha_ms_per_1k: g,
                median_msg_ms_per_1k: m,
                seeds: &self.timings,
            },
        )?;
        Ok(vec![csv, json, timing])
    }
}

fn hash_sample(h: &mut Sha256, s: &TwoViewSample) {
    for v in s.x.iter().chain(s.y.iter()) {
        h.update(v.to_le_bytes());
    }
}

struct Run {
    checksum: String,
    hit: Option<u64>,
    gaps: Vec<f64>,
    ms_per_1k: f64,
}

fn per_1k(start: Instant, n: usize) -> f64 {
    start.elapsed().as_secs_f64() * 1e3 * 1e3 / n as f64
}

fn run_gha_shared(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    seed: u64,
    samples: &[TwoViewSample],
    stride: u64,
) -> Result<Run> {
    let target = GAP_TARGET * prep.lambda1();
    let mut it = prep.init(cfg, seed)?;
    let mut hash = Sha256::new();
    let mut hit = None;
    let mut gaps = vec![prep.lambda1() - objective(&it, &prep.sigma_xy)?];
    let start = Instant::now();
    for (i, s) in samples.iter().enumerate() {
        let k = i as u64 + 1;
        hash_sample(&mut hash, s);
        it = gha_step(&it, s, cfg.eta.at(k))?;
        let gap = prep.lambda1() - objective(&it, &prep.sigma_xy)?;
        if hit.is_none() && gap <= target {
            hit = Some(k);
        }
        if k % stride == 0 || i + 1 == samples.len() {
            gaps.push(gap);
        }
    }
    let ms_per_1k = per_1k(start, samples.len());
    if it.u.iter().chain(it.v.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("iterate (step size too large?)"));
    }
    Ok(Run {
        checksum: format!("{:x}", hash.finalize()),
        hit,
        gaps,
        ms_per_1k,
    })
}

fn run_msg_shared(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    samples: &[TwoViewSample],
    stride: u64,
) -> Result<Run> {
    let lambda1 = prep.lambda1();
    let target = GAP_TARGET * lambda1;
    let mut it = MsgIterate::zeros(prep.m, prep.d);
    let mut hash = Sha256::new();
    let mut hit = None;
    let mut gaps = vec![msg_objective_gap(&it, &prep.sigma_xy, lambda1)?];
    let start = Instant::now();
    for (i, s) in samples.iter().enumerate() {
        let k = i as u64 + 1;
        hash_sample(&mut hash, s);
        it = msg_step(&it, s, cfg.msg_eta.at(k))?;
        let gap = msg_objective_gap(&it, &prep.sigma_xy, lambda1)?;
        if hit.is_none() && gap <= target {
            hit = Some(k);
        }
        if k % stride == 0 || i + 1 == samples.len() {
            gaps.push(gap);
        }
    }
    Ok(Run {
        checksum: format!("{:x}", hash.finalize()),
        hit,
        gaps,
        ms_per_1k: per_1k(start, samples.len()),
    })
}

pub(super) fn compare_prepared(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Comparison> {
    let stride = cfg.log.stride.max(1);
    let n = cfg.n_iters;
    let iters: Vec<u64> = std::iter::once(0)
        .chain((1..=n).filter(|k| k % stride == 0 || *k == n))
        .collect();
    let seeds: Vec<u64> = (cfg.base_seed..cfg.base_seed + cfg.n_seeds).collect();
    let results: Vec<(SeedComparison, SeedTiming, Vec<(u64, f64, f64)>)> = seeds
        .par_iter()
        .map(|&seed| {
            let mut stream = prep.stream(seed, 1.0)?;
            let samples: Vec<TwoViewSample> = (0..n)
                .map(|k| stream.next_sample().ok_or(Error::StreamExhausted { completed: k }))
                .collect::<Result<_>>()?;
            let g = run_gha_shared(cfg, prep, seed, &samples, stride)?;
            let m = run_msg_shared(cfg, prep, &samples, stride)?;
            let curve = iters
                .iter()
                .zip(g.gaps.iter().zip(&m.gaps))
                .map(|(&k, (&a, &b))| (k, a, b))
                .collect();
            Ok((
                SeedComparison {
                    seed,
                    checksum_gha: g.checksum,
                    checksum_msg: m.checksum,
                    gha_hit: g.hit,
                    msg_hit: m.hit,
                    gha_final_gap: *g.gaps.last().expect("nonempty"),
                    msg_final_gap: *m.gaps.last().expect("nonempty"),
                },
                SeedTiming {
                    seed,
                    gha_ms_per_1k: g.ms_per_1k,
                    msg_ms_per_1k: m.ms_per_1k,
                },
                curve,
            ))
        })
        .collect::<Result<_>>()?;
    let mut out = Comparison {
        lambda1: prep.lambda1(),
        target_gap: GAP_TARGET * prep.lambda1(),
        seeds: Vec::with_capacity(results.len()),
        timings: Vec::with_capacity(results.len()),
        curves: Vec::with_capacity(results.len()),
    };
    for (s, t, c) in results {
        out.curves.push((s.seed, c));
        out.seeds.push(s);
        out.timings.push(t);
    }
    Ok(out)
}

/// Runs both algorithms on one shared sample stream per seed and records the
/// objective gap of each.
pub fn compare_algorithms(cfg: &ExperimentConfig) -> Result<Comparison> {
    if cfg.algorithm != Algorithm::Both {
        return Err(Error::config("algorithm", "comparison needs algorithm = \"both\""));
    }
    cfg.validate()?;
    let prep = Prepared::new(cfg)?;
    compare_prepared(cfg, &prep)
}
