//! Multi-seed experiment harness: runs the Hebbian update (and optionally the
//! convex baseline) from a configured start, detects the three phases, and
//! writes CSV/JSON artifacts.

mod compare;
mod config;
mod ou;
mod phases;

pub use compare::{compare_algorithms, Comparison, SeedComparison, SeedTiming, COMPARISON_CSV_HEADER};
pub use config::{
    Algorithm, ExperimentConfig, InitSpec, LogConfig, ModelSpec, OuCheckpoint, PhaseConfig,
};
pub use ou::{ou_distribution_report, CheckpointReport, OuReport, OuTheory, SeedCheckpoints, MIN_OU_SEEDS};
pub use phases::{detect_phases, quantile, PhaseDetector, PhaseReport, Quartiles, SeedPhases};

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{build_model, load_two_view_csv, CovarianceModel, CsvOptions, GaussianSource, MaskedSource};
use crate::diffusion::{build_basis, phase_times, to_h, LatentMoments, SpectralBasis};
use crate::error::{Error, Result};
use crate::msg::{msg_objective_gap, msg_step, MsgIterate};
use crate::oracle::empirical_cov;
use crate::pls_core::{
    alignment_error, objective, run_gha_observed, EtaSchedule, LogSpec, PlsIterate, SampleSource,
    StepConfig, Trajectory, TwoViewSample, TRAJECTORY_CSV_HEADER,
};

const MASK_SALT: u64 = 0x6d61_736b;
const INIT_SALT: u64 = 0x696e_6974;

pub(crate) fn sub_seed(seed: u64, salt: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt
}

enum Data {
    Model(Box<CovarianceModel>),
    Rows(Vec<TwoViewSample>),
}

/// Data, population cross-covariance and spectral basis shared by all seeds.
pub struct Prepared {
    data: Data,
    pub sigma_xy: Array2<f64>,
    pub basis: SpectralBasis,
    pub moments: Option<LatentMoments>,
    pub m: usize,
    pub d: usize,
}

/// Draws rows uniformly with replacement.
struct Resample<'a> {
    rows: &'a [TwoViewSample],
    rng: ChaCha8Rng,
}

impl SampleSource for Resample<'_> {
    fn next_sample(&mut self) -> Option<TwoViewSample> {
        let i = self.rng.random_range(0..self.rows.len());
        Some(self.rows[i].clone())
    }
}

impl Prepared {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let (data, sigma_xy, moments) = match &cfg.model {
            ModelSpec::Synthetic {
                sigma_xx,
                sigma_xy,
                sigma_yy,
                m,
                d,
                seed,
            } => {
                let xx = config::matrix("model.sigma_xx", sigma_xx)?;
                let xy = config::matrix("model.sigma_xy", sigma_xy)?;
                let yy = config::matrix("model.sigma_yy", sigma_yy)?;
                let model = build_model(&xx, &xy, &yy, *m, *d, *seed)?;
                let sxy = model.sigma_xy.clone();
                let mom = model.moments.clone();
                (Data::Model(Box::new(model)), sxy, Some(mom))
            }
            ModelSpec::Csv {
                x_path,
                y_path,
                has_header,
                center,
            } => {
                let src = load_two_view_csv(
                    x_path,
                    y_path,
                    CsvOptions {
                        has_header: *has_header,
                        center: *center,
                    },
                )?;
                if src.is_empty() {
                    return Err(Error::config("model.x_path", "no rows"));
                }
                let rows = src.samples().to_vec();
                // the loader already centered when requested
                let sxy = empirical_cov(&rows, false)?;
                (Data::Rows(rows), sxy, None)
            }
        };
        let (m, d) = sigma_xy.dim();
        cfg.validate_dims(m, d)?;
        let basis = build_basis(&sigma_xy)?;
        Ok(Prepared {
            data,
            sigma_xy,
            basis,
            moments,
            m,
            d,
        })
    }

    pub fn model(&self) -> Option<&CovarianceModel> {
        match &self.data {
            Data::Model(m) => Some(m),
            Data::Rows(_) => None,
        }
    }

    pub fn lambda1(&self) -> f64 {
        self.basis.svd.singular[0]
    }

    /// The sample stream for one seed (masked when `observe_prob < 1`).
    pub fn stream(&self, seed: u64, observe_prob: f64) -> Result<Box<dyn SampleSource + Send + '_>> {
        let base: Box<dyn SampleSource + Send + '_> = match &self.data {
            Data::Model(model) => Box::new(GaussianSource::new(model, seed)),
            Data::Rows(rows) => Box::new(Resample {
                rows,
                rng: ChaCha8Rng::seed_from_u64(seed),
            }),
        };
        if observe_prob < 1.0 {
            Ok(Box::new(MaskedSource::new(base, observe_prob, sub_seed(seed, MASK_SALT))?))
        } else {
            Ok(base)
        }
    }

    /// The starting iterate for one seed.
    pub fn init(&self, cfg: &ExperimentConfig, seed: u64) -> Result<PlsIterate> {
        match &cfg.init {
            InitSpec::Saddle { index } => {
                let (u, v) = self.basis.singular_pair(index - 1);
                PlsIterate::normalized(u, v)
            }
            InitSpec::RandomSphere => {
                let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, INIT_SALT));
                let u = Array1::from_shape_fn(self.m, |_| rng.sample::<f64, _>(StandardNormal));
                let v = Array1::from_shape_fn(self.d, |_| rng.sample::<f64, _>(StandardNormal));
                PlsIterate::normalized(u, v)
            }
            InitSpec::Given { .. } => {
                let (u, v) = cfg.given_pair().expect("init is given");
                PlsIterate::normalized(u, v)
            }
        }
    }

    /// Eigenvalues of the embedding in basis order.
    pub fn lambda(&self) -> Array1<f64> {
        self.basis.lambda.clone()
    }
}

impl SampleSource for Box<dyn SampleSource + Send + '_> {
    fn next_sample(&mut self) -> Option<TwoViewSample> {
        (**self).next_sample()
    }
}

fn schedule_scale(s: &EtaSchedule) -> f64 {
    match *s {
        EtaSchedule::Constant { eta } => eta,
        EtaSchedule::Inverse { c } | EtaSchedule::InverseSqrt { c } => c,
    }
}

/// Endpoint of one Hebbian run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_u: Vec<f64>,
    pub final_v: Vec<f64>,
    pub final_h: Vec<f64>,
    pub final_h1_sq: f64,
    pub final_objective: f64,
    pub final_alignment_error: f64,
    /// `max_k |‖h_k‖ − 1|` over every iteration.
    pub max_norm_drift: f64,
}

/// Endpoint of one baseline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsgSeedSummary {
    pub seed: u64,
    pub final_gap: f64,
    pub final_alignment_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub m: usize,
    pub d: usize,
    pub n_iters: u64,
    pub n_seeds: u64,
    pub singular_values: Vec<f64>,
    pub lambda: Vec<f64>,
    pub gha: Vec<SeedSummary>,
    pub msg: Vec<MsgSeedSummary>,
    /// Seeds ending with `h₁² ≥ 0.99`.
    pub aligned_099: usize,
    pub ou_theory: Option<OuTheory>,
    pub checkpoints: Vec<SeedCheckpoints>,
}

/// Everything one experiment produces.
#[derive(Debug, Clone)]
pub struct ArtifactBundle {
    pub trajectories: Vec<(u64, Trajectory)>,
    pub summary: Summary,
    pub phase_report: Option<PhaseReport>,
    pub ou_report: Option<OuReport>,
    pub comparison: Option<Comparison>,
}

struct GhaSeed {
    traj: Trajectory,
    summary: SeedSummary,
    phases: SeedPhases,
    checkpoints: SeedCheckpoints,
}

fn run_gha_seed(cfg: &ExperimentConfig, prep: &Prepared, seed: u64, delta: f64) -> Result<GhaSeed> {
    let init = prep.init(cfg, seed)?;
    let mut stream = prep.stream(seed, cfg.observe_prob)?;
    let (u_hat, v_hat) = prep.basis.leading_pair();
    let log = LogSpec {
        stride: cfg.log.stride,
        h_indices: cfg.log.h.clone(),
        basis: Some(&prep.basis),
        sigma_xy: cfg.log.objective.then_some(&prep.sigma_xy),
        truth: cfg.log.alignment.then_some((&u_hat, &v_hat)),
    };
    let step = StepConfig {
        schedule: cfg.eta,
        renormalize: cfg.renormalize,
        observe_prob: cfg.observe_prob,
    };
    let mut cp_iters: Vec<u64> = cfg
        .checkpoints
        .iter()
        .map(|c| c.iter)
        .filter(|&k| k <= cfg.n_iters)
        .collect();
    cp_iters.sort_unstable();
    cp_iters.dedup();

    let mut detector = PhaseDetector::new(seed, delta, cfg.phases.epsilon);
    let mut checkpoints = SeedCheckpoints {
        seed,
        iters: Vec::with_capacity(cp_iters.len()),
        h: Vec::with_capacity(cp_iters.len()),
    };
    let mut next_cp = 0;
    let mut drift = 0.0f64;
    let mut failure = None;
    let traj = run_gha_observed(&mut stream, &init, &step, cfg.n_iters, &log, |it| {
        if failure.is_some() {
            return;
        }
        let h = match to_h(it, &prep.basis) {
            Ok(h) => h,
            Err(e) => {
                failure = Some(e);
                return;
            }
        };
        let k = it.step_count;
        let norm2 = h.dot(&h);
        drift = drift.max((norm2.sqrt() - 1.0).abs());
        let h2 = if h.len() > 1 { h[1] } else { 0.0 };
        detector.observe(k, h[0], h2, norm2 - h[0] * h[0]);
        if next_cp < cp_iters.len() && cp_iters[next_cp] == k {
            checkpoints.iters.push(k);
            checkpoints.h.push(h.to_vec());
            next_cp += 1;
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let fin = traj.final_iterate.clone().expect("run records its final iterate");
    if fin.u.iter().chain(fin.v.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("iterate (step size too large?)"));
    }
    let h = to_h(&fin, &prep.basis)?;
    let summary = SeedSummary {
        seed,
        final_u: fin.u.to_vec(),
        final_v: fin.v.to_vec(),
        final_h1_sq: h[0] * h[0],
        final_h: h.to_vec(),
        final_objective: objective(&fin, &prep.sigma_xy)?,
        final_alignment_error: alignment_error(&fin, &u_hat, &v_hat)?,
        max_norm_drift: drift,
    };
    Ok(GhaSeed {
        traj,
        summary,
        phases: detector.finish(),
        checkpoints,
    })
}

fn run_msg_seed(cfg: &ExperimentConfig, prep: &Prepared, seed: u64) -> Result<(Trajectory, MsgSeedSummary)> {
    let mut stream = prep.stream(seed, 1.0)?;
    let (u_hat, v_hat) = prep.basis.leading_pair();
    let lambda1 = prep.lambda1();
    let stride = cfg.log.stride.max(1);
    let mut traj = Trajectory::new(vec!["gap".into(), "alignment_error".into()]);
    let mut it = MsgIterate::zeros(prep.m, prep.d);
    let record = |it: &MsgIterate| -> Result<Vec<f64>> {
        let (u, v) = it.leading_pair()?;
        let pair = PlsIterate {
            u,
            v,
            step_count: it.step_count,
        };
        Ok(vec![
            msg_objective_gap(it, &prep.sigma_xy, lambda1)?,
            alignment_error(&pair, &u_hat, &v_hat)?,
        ])
    };
    traj.push(0, record(&it)?);
    for k in 1..=cfg.n_iters {
        let s = stream
            .next_sample()
            .ok_or(Error::StreamExhausted { completed: k - 1 })?;
        it = msg_step(&it, &s, cfg.msg_eta.at(k))?;
        if k % stride == 0 || k == cfg.n_iters {
            traj.push(k, record(&it)?);
        }
    }
    let last = traj.rows.last().expect("at least the initial row").clone();
    Ok((
        traj,
        MsgSeedSummary {
            seed,
            final_gap: last[0],
            final_alignment_error: last[1],
        },
    ))
}

/// Runs every seed of `cfg` and, when `cfg.output_dir` is set, writes the
/// artifacts there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ArtifactBundle> {
    cfg.validate()?;
    let prep = Prepared::new(cfg)?;
    let seeds: Vec<u64> = (cfg.base_seed..cfg.base_seed + cfg.n_seeds).collect();
    let eta = schedule_scale(&cfg.eta);
    let delta = eta.powf(cfg.phases.mu_exponent);

    let mut trajectories = Vec::new();
    let mut gha = Vec::new();
    let mut msg = Vec::new();
    let mut phase_seeds = Vec::new();
    let mut checkpoints = Vec::new();

    if cfg.algorithm != Algorithm::Msg {
        let runs: Vec<GhaSeed> = seeds
            .par_iter()
            .map(|&s| run_gha_seed(cfg, &prep, s, delta))
            .collect::<Result<_>>()?;
        for r in runs {
            trajectories.push((r.summary.seed, r.traj));
            gha.push(r.summary);
            phase_seeds.push(r.phases);
            checkpoints.push(r.checkpoints);
        }
    } else {
        let runs: Vec<(Trajectory, MsgSeedSummary)> = seeds
            .par_iter()
            .map(|&s| run_msg_seed(cfg, &prep, s))
            .collect::<Result<_>>()?;
        for (t, s) in runs {
            trajectories.push((s.seed, t));
            msg.push(s);
        }
    }

    let ou_theory = match (&prep.moments, &cfg.init, &cfg.eta) {
        (Some(mom), InitSpec::Saddle { index }, EtaSchedule::Constant { eta })
            if prep.m == prep.d && cfg.algorithm != Algorithm::Msg =>
        {
            let mut h0 = vec![0.0; prep.m + prep.d];
            h0[index - 1] = 1.0;
            Some(OuTheory {
                eta: *eta,
                lambda: prep.lambda().to_vec(),
                moments: mom.clone(),
                saddle: *index,
                h0,
            })
        }
        _ => None,
    };

    let phase_report = (cfg.algorithm != Algorithm::Msg && !cfg.log.h.is_empty()).then(|| {
        let prediction = match (&prep.moments, &cfg.eta) {
            (Some(mom), EtaSchedule::Constant { eta }) => phase_times(
                &prep.lambda(),
                mom,
                *eta,
                cfg.phases.nu,
                cfg.phases.epsilon,
                cfg.phases.mu_exponent,
            ),
            _ => Err(Error::InvalidArgument(
                "prediction needs a synthetic model and a constant step size".into(),
            )),
        };
        PhaseReport::new(delta, cfg.phases.epsilon, phase_seeds, prediction)
    });

    let ou_report = match &ou_theory {
        Some(th) if checkpoints.len() >= MIN_OU_SEEDS => {
            let usable: Vec<OuCheckpoint> = cfg
                .checkpoints
                .iter()
                .copied()
                .filter(|c| c.iter <= cfg.n_iters)
                .collect();
            if usable.is_empty() {
                None
            } else {
                Some(ou_distribution_report(&checkpoints, &usable, th)?)
            }
        }
        _ => None,
    };

    let comparison = if cfg.algorithm == Algorithm::Both {
        Some(compare::compare_prepared(cfg, &prep)?)
    } else {
        None
    };

    let summary = Summary {
        m: prep.m,
        d: prep.d,
        n_iters: cfg.n_iters,
        n_seeds: cfg.n_seeds,
        singular_values: prep.basis.svd.singular.to_vec(),
        lambda: prep.lambda().to_vec(),
        aligned_099: gha.iter().filter(|s| s.final_h1_sq >= 0.99).count(),
        gha,
        msg,
        ou_theory,
        checkpoints,
    };
    let bundle = ArtifactBundle {
        trajectories,
        summary,
        phase_report,
        ou_report,
        comparison,
    };
    if let Some(dir) = &cfg.output_dir {
        bundle.write_to(dir)?;
        fs::write(dir.join("config.toml"), cfg.to_toml_string())?;
    }
    Ok(bundle)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

impl ArtifactBundle {
    /// Writes `trajectories.csv`, `summary.json` and whichever reports exist.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();

        let path = dir.join("trajectories.csv");
        let mut w = BufWriter::new(fs::File::create(&path)?);
        writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
        for (seed, t) in &self.trajectories {
            t.write_csv_rows(&mut w, *seed)?;
        }
        w.flush()?;
        written.push(path);

        let path = dir.join("summary.json");
        write_json(&path, &self.summary)?;
        written.push(path);

        if let Some(r) = &self.phase_report {
            let path = dir.join("phase_report.json");
            write_json(&path, r)?;
            written.push(path);
        }
        if let Some(r) = &self.ou_report {
            let path = dir.join("ou_report.json");
            write_json(&path, r)?;
            written.push(path);
        }
        if let Some(c) = &self.comparison {
            written.extend(c.write_to(dir)?);
        }
        Ok(written)
    }
}
