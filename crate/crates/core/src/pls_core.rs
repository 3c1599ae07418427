//! The stochastic generalized Hebbian iteration for rank-1 PLS.
//!
//! Given a stream of pairs `(x_k, y_k)` the iterate `(u, v)` is updated by
//!
//! ```text
//! u' = u + η (x yᵀv − (uᵀx yᵀv) u)
//! v' = v + η (y xᵀu − (uᵀx yᵀv) v)
//! ```
//!
//! with both updates reading the pre-step state. There is no projection back
//! onto the sphere; the norm drift per step is exactly `η²‖r‖²` for a unit
//! input, so the iterate stays close to the sphere for small `η`.

use std::io::Write;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::diffusion::{to_h, SpectralBasis};
use crate::error::{Error, Result};

/// One observation pair. Masks, when present, flag observed coordinates
/// (`true` = observed); unobserved coordinates carry the value 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoViewSample {
    pub x: Array1<f64>,
    pub y: Array1<f64>,
    pub mask_x: Option<Vec<bool>>,
    pub mask_y: Option<Vec<bool>>,
}

impl TwoViewSample {
    pub fn new(x: Array1<f64>, y: Array1<f64>) -> Result<Self> {
        let s = TwoViewSample {
            x,
            y,
            mask_x: None,
            mask_y: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_masks(
        x: Array1<f64>,
        y: Array1<f64>,
        mask_x: Vec<bool>,
        mask_y: Vec<bool>,
    ) -> Result<Self> {
        let s = TwoViewSample {
            x,
            y,
            mask_x: Some(mask_x),
            mask_y: Some(mask_y),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn has_masks(&self) -> bool {
        self.mask_x.is_some() && self.mask_y.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.iter().chain(self.y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample"));
        }
        check_mask(&self.x, self.mask_x.as_deref(), "mask_x")?;
        check_mask(&self.y, self.mask_y.as_deref(), "mask_y")?;
        Ok(())
    }
}

fn check_mask(v: &Array1<f64>, mask: Option<&[bool]>, name: &'static str) -> Result<()> {
    let Some(mask) = mask else { return Ok(()) };
    if mask.len() != v.len() {
        return Err(Error::dim(name, v.len(), mask.len()));
    }
    if v.iter().zip(mask).any(|(x, &seen)| !seen && *x != 0.0) {
        return Err(Error::InvalidArgument(format!(
            "{name}: unobserved coordinates must be zero-imputed"
        )));
    }
    Ok(())
}

/// The algorithm state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlsIterate {
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    pub step_count: u64,
}

impl PlsIterate {
    /// Starts from the given vectors after scaling each to unit norm.
    pub fn normalized(u: Array1<f64>, v: Array1<f64>) -> Result<Self> {
        let nu = u.dot(&u).sqrt();
        let nv = v.dot(&v).sqrt();
        if !(nu.is_finite() && nv.is_finite()) {
            return Err(Error::NonFinite("initial iterate"));
        }
        if nu == 0.0 || nv == 0.0 {
            return Err(Error::InvalidArgument(
                "initial iterate must be nonzero".into(),
            ));
        }
        Ok(PlsIterate {
            u: u / nu,
            v: v / nv,
            step_count: 0,
        })
    }

    pub fn m(&self) -> usize {
        self.u.len()
    }

    pub fn d(&self) -> usize {
        self.v.len()
    }
}

/// Step-size sequence indexed by the 1-based step number `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaSchedule {
    Constant { eta: f64 },
    /// `c / k`
    Inverse { c: f64 },
    /// `c / √k`
    InverseSqrt { c: f64 },
}

impl EtaSchedule {
    pub fn at(&self, k: u64) -> f64 {
        let k = k.max(1) as f64;
        match *self {
            EtaSchedule::Constant { eta } => eta,
            EtaSchedule::Inverse { c } => c / k,
            EtaSchedule::InverseSqrt { c } => c / k.sqrt(),
        }
    }

    fn scale(&self) -> f64 {
        match *self {
            EtaSchedule::Constant { eta } => eta,
            EtaSchedule::Inverse { c } | EtaSchedule::InverseSqrt { c } => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub schedule: EtaSchedule,
    #[serde(default)]
    pub renormalize: bool,
    /// Probability that a coordinate is observed; below 1 the missing-value
    /// step is used and the schedule is taken to already include the `p²`
    /// factor.
    #[serde(default = "one")]
    pub observe_prob: f64,
}

fn one() -> f64 {
    1.0
}

impl StepConfig {
    pub fn constant(eta: f64) -> Self {
        StepConfig {
            schedule: EtaSchedule::Constant { eta },
            renormalize: false,
            observe_prob: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let scale = self.schedule.scale();
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size must be nonnegative and finite, got {scale}"
            )));
        }
        if !(self.observe_prob > 0.0 && self.observe_prob <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "observe_prob must lie in (0, 1], got {}",
                self.observe_prob
            )));
        }
        Ok(())
    }
}

/// One Hebbian step. `eta = 0` is accepted and returns the input state.
pub fn gha_step(iter: &PlsIterate, s: &TwoViewSample, eta: f64) -> Result<PlsIterate> {
    if iter.u.len() != s.x.len() {
        return Err(Error::dim("gha_step x", iter.u.len(), s.x.len()));
    }
    if iter.v.len() != s.y.len() {
        return Err(Error::dim("gha_step y", iter.v.len(), s.y.len()));
    }
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step size must be nonnegative, got {eta}"
        )));
    }
    if s.x.iter().chain(s.y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sample"));
    }
    Ok(hebbian_update(iter, &s.x, &s.y, eta))
}

/// The update for zero-imputed samples with observation masks. The `1/p²`
/// debiasing factor is expected to be folded into `eta_p`.
pub fn gha_step_missing(iter: &PlsIterate, s: &TwoViewSample, eta_p: f64) -> Result<PlsIterate> {
    if !s.has_masks() {
        return Err(Error::InvalidArgument(
            "gha_step_missing requires observation masks".into(),
        ));
    }
    check_mask(&s.x, s.mask_x.as_deref(), "mask_x")?;
    check_mask(&s.y, s.mask_y.as_deref(), "mask_y")?;
    gha_step(iter, s, eta_p)
}

fn hebbian_update(iter: &PlsIterate, x: &Array1<f64>, y: &Array1<f64>, eta: f64) -> PlsIterate {
    let ux = iter.u.dot(x);
    let yv = y.dot(&iter.v);
    let inner = ux * yv;
    let u = ndarray::Zip::from(&iter.u)
        .and(x)
        .map_collect(|&ui, &xi| ui + eta * (xi * yv - inner * ui));
    let v = ndarray::Zip::from(&iter.v)
        .and(y)
        .map_collect(|&vi, &yi| vi + eta * (yi * ux - inner * vi));
    PlsIterate {
        u,
        v,
        step_count: iter.step_count + 1,
    }
}

/// A source of two-view samples.
pub trait SampleSource {
    fn next_sample(&mut self) -> Option<TwoViewSample>;
}

impl<S: SampleSource + ?Sized> SampleSource for &mut S {
    fn next_sample(&mut self) -> Option<TwoViewSample> {
        (**self).next_sample()
    }
}

/// A finite, replayable in-memory stream.
#[derive(Debug, Clone)]
pub struct VecSource {
    samples: Vec<TwoViewSample>,
    cursor: usize,
}

impl VecSource {
    pub fn new(samples: Vec<TwoViewSample>) -> Self {
        VecSource { samples, cursor: 0 }
    }

    pub fn samples(&self) -> &[TwoViewSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rewind(&mut self) {
        self.cursor = 0;
    }
}

impl SampleSource for VecSource {
    fn next_sample(&mut self) -> Option<TwoViewSample> {
        let s = self.samples.get(self.cursor).cloned();
        if s.is_some() {
            self.cursor += 1;
        }
        s
    }
}

/// Which projections of the iterate to record, and how often.
#[derive(Debug, Clone, Default)]
pub struct LogSpec<'a> {
    /// Record every `stride`-th iteration (the initial state is always recorded).
    pub stride: u64,
    /// 1-based h-coordinate indices; requires `basis`.
    pub h_indices: Vec<usize>,
    pub basis: Option<&'a SpectralBasis>,
    /// Records `uᵀΣv` when set.
    pub sigma_xy: Option<&'a Array2<f64>>,
    /// Records `alignment_error` against this pair when set.
    pub truth: Option<(&'a Array1<f64>, &'a Array1<f64>)>,
}

impl<'a> LogSpec<'a> {
    pub fn coord_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.h_indices.iter().map(|i| format!("h{i}")).collect();
        if self.sigma_xy.is_some() {
            names.push("objective".into());
        }
        if self.truth.is_some() {
            names.push("alignment_error".into());
        }
        names
    }

    fn validate(&self, iter: &PlsIterate) -> Result<()> {
        if !self.h_indices.is_empty() {
            let basis = self.basis.ok_or_else(|| {
                Error::InvalidArgument("h-coordinate logging requires a spectral basis".into())
            })?;
            let n = basis.m + basis.d;
            if let Some(&bad) = self.h_indices.iter().find(|&&i| i == 0 || i > n) {
                return Err(Error::InvalidArgument(format!(
                    "h index {bad} outside 1..={n}"
                )));
            }
            if basis.m != iter.m() || basis.d != iter.d() {
                return Err(Error::dim("log basis", basis.m + basis.d, iter.m() + iter.d()));
            }
        }
        Ok(())
    }

    pub fn record(&self, iter: &PlsIterate) -> Result<Vec<f64>> {
        let mut row = Vec::with_capacity(self.h_indices.len() + 2);
        if let Some(basis) = self.basis.filter(|_| !self.h_indices.is_empty()) {
            let h = to_h(iter, basis)?;
            row.extend(self.h_indices.iter().map(|&i| h[i - 1]));
        }
        if let Some(sigma) = self.sigma_xy {
            row.push(objective(iter, sigma)?);
        }
        if let Some((u, v)) = self.truth {
            row.push(alignment_error(iter, u, v)?);
        }
        Ok(row)
    }
}

/// Logged coordinates of one run, stored row-wise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub coord_names: Vec<String>,
    pub iters: Vec<u64>,
    pub rows: Vec<Vec<f64>>,
    pub final_iterate: Option<PlsIterate>,
}

impl Trajectory {
    pub fn new(coord_names: Vec<String>) -> Self {
        Trajectory {
            coord_names,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.iters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iters.is_empty()
    }

    pub fn push(&mut self, iter: u64, row: Vec<f64>) {
        self.iters.push(iter);
        self.rows.push(row);
    }

    /// The series for one named coordinate.
    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        let col = self.coord_names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[col]).collect())
    }

    /// Appends this trajectory in long format (`iter,coord_name,value,seed`).
    pub fn write_csv_rows<W: Write>(&self, w: &mut W, seed: u64) -> std::io::Result<()> {
        for (it, row) in self.iters.iter().zip(&self.rows) {
            for (name, value) in self.coord_names.iter().zip(row) {
                writeln!(w, "{it},{name},{},{seed}", fmt_f64(*value))?;
            }
        }
        Ok(())
    }
}

pub const TRAJECTORY_CSV_HEADER: &str = "iter,coord_name,value,seed";

/// 17 significant digits, round-trip exact.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Runs `n` steps and records the requested coordinates.
pub fn run_gha<S: SampleSource + ?Sized>(
    stream: &mut S,
    init: &PlsIterate,
    cfg: &StepConfig,
    n: u64,
    log: &LogSpec<'_>,
) -> Result<Trajectory> {
    run_gha_observed(stream, init, cfg, n, log, |_| {})
}

/// As [`run_gha`], calling `observe` on every iterate including the initial one.
pub fn run_gha_observed<S, F>(
    stream: &mut S,
    init: &PlsIterate,
    cfg: &StepConfig,
    n: u64,
    log: &LogSpec<'_>,
    mut observe: F,
) -> Result<Trajectory>
where
    S: SampleSource + ?Sized,
    F: FnMut(&PlsIterate),
{
    if n == 0 {
        return Err(Error::InvalidArgument("iteration count must be >= 1".into()));
    }
    cfg.validate()?;
    log.validate(init)?;
    let stride = log.stride.max(1);
    let missing = cfg.observe_prob < 1.0;

    let mut traj = Trajectory::new(log.coord_names());
    let mut cur = init.clone();
    traj.push(0, log.record(&cur)?);
    observe(&cur);
    for k in 1..=n {
        let sample = stream
            .next_sample()
            .ok_or(Error::StreamExhausted { completed: k - 1 })?;
        let eta = cfg.schedule.at(cur.step_count + 1);
        cur = if missing {
            gha_step_missing(&cur, &sample, eta)?
        } else {
            gha_step(&cur, &sample, eta)?
        };
        if cfg.renormalize {
            let nu = cur.u.dot(&cur.u).sqrt();
            let nv = cur.v.dot(&cur.v).sqrt();
            if nu > 0.0 {
                cur.u /= nu;
            }
            if nv > 0.0 {
                cur.v /= nv;
            }
        }
        if k % stride == 0 || k == n {
            traj.push(k, log.record(&cur)?);
        }
        observe(&cur);
    }
    traj.final_iterate = Some(cur);
    Ok(traj)
}

/// `uᵀ Σ v`.
pub fn objective(iter: &PlsIterate, sigma_xy: &Array2<f64>) -> Result<f64> {
    let (m, d) = sigma_xy.dim();
    if iter.u.len() != m {
        return Err(Error::dim("objective u", m, iter.u.len()));
    }
    if iter.v.len() != d {
        return Err(Error::dim("objective v", d, iter.v.len()));
    }
    Ok(iter.u.dot(&sigma_xy.dot(&iter.v)))
}

/// `min_{s=±1} ‖u − s û‖² + ‖v − s v̂‖²`.
pub fn alignment_error(iter: &PlsIterate, u_hat: &Array1<f64>, v_hat: &Array1<f64>) -> Result<f64> {
    if iter.u.len() != u_hat.len() {
        return Err(Error::dim("alignment_error u", u_hat.len(), iter.u.len()));
    }
    if iter.v.len() != v_hat.len() {
        return Err(Error::dim("alignment_error v", v_hat.len(), iter.v.len()));
    }
    let err = |s: f64| {
        let eu: f64 = iter
            .u
            .iter()
            .zip(u_hat)
            .map(|(a, b)| (a - s * b).powi(2))
            .sum();
        let ev: f64 = iter
            .v
            .iter()
            .zip(v_hat)
            .map(|(a, b)| (a - s * b).powi(2))
            .sum();
        eu + ev
    };
    Ok(err(1.0).min(err(-1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn e(n: usize, i: usize) -> Array1<f64> {
        let mut v = Array1::zeros(n);
        v[i] = 1.0;
        v
    }

    fn it(u: Array1<f64>, v: Array1<f64>) -> PlsIterate {
        PlsIterate {
            u,
            v,
            step_count: 0,
        }
    }

    #[test]
    fn aligned_pair_is_fixed() {
        let s = TwoViewSample::new(e(2, 0), e(2, 0)).unwrap();
        let out = gha_step(&it(e(2, 0), e(2, 0)), &s, 0.1).unwrap();
        assert_eq!(out.u, e(2, 0));
        assert_eq!(out.v, e(2, 0));
        assert_eq!(out.step_count, 1);
    }

    #[test]
    fn zero_step_is_identity() {
        let s = TwoViewSample::new(array![0.3, -1.2], array![2.0, 0.1, 0.4]).unwrap();
        let start = PlsIterate::normalized(array![1.0, 2.0], array![0.5, -0.5, 1.0]).unwrap();
        let out = gha_step(&start, &s, 0.0).unwrap();
        assert_eq!(out.u, start.u);
        assert_eq!(out.v, start.v);
    }

    #[test]
    fn orthogonal_sample_moves_v_only() {
        let s = TwoViewSample::new(array![1.0, 0.0], array![0.0, 1.0]).unwrap();
        let out = gha_step(&it(e(2, 0), e(2, 0)), &s, 0.1).unwrap();
        assert_eq!(out.u, array![1.0, 0.0]);
        assert_eq!(out.v, array![1.0, 0.1]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = TwoViewSample {
            x: array![1.0, f64::NAN],
            y: array![1.0, 0.0],
            mask_x: None,
            mask_y: None,
        };
        assert!(matches!(
            gha_step(&it(e(2, 0), e(2, 0)), &s, 0.1),
            Err(Error::NonFinite(_))
        ));
        let s = TwoViewSample::new(array![1.0, 0.0, 0.0], array![1.0, 0.0]).unwrap();
        assert!(matches!(
            gha_step(&it(e(2, 0), e(2, 0)), &s, 0.1),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(TwoViewSample::new(array![f64::INFINITY], array![1.0]).is_err());
    }

    #[test]
    fn missing_step_examples() {
        // full masks reproduce the plain step bitwise
        let x = array![0.7, -0.2];
        let y = array![0.1, 1.3];
        let full = TwoViewSample::with_masks(x.clone(), y.clone(), vec![true; 2], vec![true; 2])
            .unwrap();
        let raw = TwoViewSample::new(x, y).unwrap();
        let start = PlsIterate::normalized(array![1.0, 1.0], array![1.0, -2.0]).unwrap();
        assert_eq!(
            gha_step_missing(&start, &full, 0.05).unwrap(),
            gha_step(&start, &raw, 0.05).unwrap()
        );

        // x fully masked
        let s = TwoViewSample::with_masks(
            array![0.0, 0.0],
            array![0.4, 0.2],
            vec![false, false],
            vec![true, true],
        )
        .unwrap();
        let out = gha_step_missing(&start, &s, 0.3).unwrap();
        assert_eq!(out.u, start.u);
        assert_eq!(out.v, start.v);

        // x₂ masked
        let s = TwoViewSample::with_masks(
            array![1.0, 0.0],
            array![0.0, 1.0],
            vec![true, false],
            vec![true, true],
        )
        .unwrap();
        let out = gha_step_missing(&it(e(2, 0), e(2, 0)), &s, 0.2).unwrap();
        assert_eq!(out.u, array![1.0, 0.0]);
        assert_eq!(out.v, array![1.0, 0.2]);

        assert!(gha_step_missing(&start, &raw_no_mask(), 0.1).is_err());
    }

    fn raw_no_mask() -> TwoViewSample {
        TwoViewSample::new(array![1.0, 0.0], array![0.0, 1.0]).unwrap()
    }

    #[test]
    fn mask_requires_zero_imputation() {
        let err = TwoViewSample::with_masks(array![1.0], array![1.0], vec![false], vec![true]);
        assert!(err.is_err());
    }

    #[test]
    fn run_single_step_matches_gha_step() {
        let s = TwoViewSample::new(array![0.5, 1.0], array![-1.0, 0.25]).unwrap();
        let start = PlsIterate::normalized(array![1.0, 1.0], array![0.0, 1.0]).unwrap();
        let expect = gha_step(&start, &s, 0.01).unwrap();
        let sigma = array![[1.0, 0.0], [0.0, 0.5]];
        let log = LogSpec {
            stride: 1,
            sigma_xy: Some(&sigma),
            ..Default::default()
        };
        let traj = run_gha(
            &mut VecSource::new(vec![s]),
            &start,
            &StepConfig::constant(0.01),
            1,
            &log,
        )
        .unwrap();
        assert_eq!(traj.len(), 2);
        assert_eq!(traj.final_iterate.as_ref().unwrap(), &expect);
        assert_eq!(traj.rows[1][0], objective(&expect, &sigma).unwrap());
    }

    #[test]
    fn run_reports_exhaustion() {
        let s = TwoViewSample::new(array![1.0], array![1.0]).unwrap();
        let start = PlsIterate::normalized(array![1.0], array![1.0]).unwrap();
        let err = run_gha(
            &mut VecSource::new(vec![s.clone(), s]),
            &start,
            &StepConfig::constant(0.1),
            5,
            &LogSpec::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::StreamExhausted { completed: 2 }));
    }

    #[test]
    fn run_rejects_zero_iterations() {
        let start = PlsIterate::normalized(array![1.0], array![1.0]).unwrap();
        assert!(run_gha(
            &mut VecSource::new(vec![]),
            &start,
            &StepConfig::constant(0.1),
            0,
            &LogSpec::default()
        )
        .is_err());
    }

    #[test]
    fn fixed_point_under_deterministic_stream() {
        let u = array![0.6, 0.8];
        let v = array![0.0, 1.0, 0.0];
        let s = TwoViewSample::new(u.clone(), v.clone()).unwrap();
        let mut src = VecSource::new(vec![s; 50]);
        let start = it(u.clone(), v.clone());
        let traj = run_gha(
            &mut src,
            &start,
            &StepConfig::constant(0.05),
            50,
            &LogSpec::default(),
        )
        .unwrap();
        let fin = traj.final_iterate.unwrap();
        for (a, b) in fin.u.iter().zip(&u) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(fin.v, v);
    }

    #[test]
    fn renormalize_keeps_unit_norm() {
        let s = TwoViewSample::new(array![3.0, -1.0], array![2.0, 2.0]).unwrap();
        let start = PlsIterate::normalized(array![1.0, 0.3], array![0.2, 1.0]).unwrap();
        let cfg = StepConfig {
            renormalize: true,
            ..StepConfig::constant(0.2)
        };
        let traj = run_gha(
            &mut VecSource::new(vec![s; 3]),
            &start,
            &cfg,
            3,
            &LogSpec::default(),
        )
        .unwrap();
        let fin = traj.final_iterate.unwrap();
        assert!((fin.u.dot(&fin.u) - 1.0).abs() < 1e-15);
        assert!((fin.v.dot(&fin.v) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn schedules() {
        assert_eq!(EtaSchedule::Constant { eta: 0.3 }.at(10), 0.3);
        assert_eq!(EtaSchedule::Inverse { c: 0.1 }.at(4), 0.025);
        assert_eq!(EtaSchedule::InverseSqrt { c: 0.05 }.at(4), 0.025);
        let bad = StepConfig {
            observe_prob: 0.0,
            ..StepConfig::constant(0.1)
        };
        assert!(bad.validate().is_err());
        assert!(StepConfig::constant(-1.0).validate().is_err());
    }

    #[test]
    fn objective_and_alignment() {
        let sigma = array![[4.0, 0.0], [0.0, 2.0], [0.0, 0.0]];
        let opt = it(e(3, 0), e(2, 0));
        assert_eq!(objective(&opt, &sigma).unwrap(), 4.0);
        assert_eq!(objective(&it(e(3, 2), e(2, 1)), &sigma).unwrap(), 0.0);
        assert!(objective(&it(e(2, 0), e(2, 0)), &sigma).is_err());

        assert_eq!(alignment_error(&opt, &e(3, 0), &e(2, 0)).unwrap(), 0.0);
        let neg = it(-e(3, 0), -e(2, 0));
        assert_eq!(alignment_error(&neg, &e(3, 0), &e(2, 0)).unwrap(), 0.0);
        let orth = it(e(3, 0), e(2, 0));
        assert_eq!(alignment_error(&orth, &e(3, 1), &e(2, 0)).unwrap(), 2.0);
    }

    #[test]
    fn csv_rows_round_trip_values() {
        let mut t = Trajectory::new(vec!["h1".into()]);
        t.push(0, vec![0.1]);
        t.push(1, vec![-1.0 / 3.0]);
        let mut buf = Vec::new();
        t.write_csv_rows(&mut buf, 7).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let v: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(v, -1.0 / 3.0);
        assert!(lines[0].ends_with(",7"));
    }

    fn unit(v: Vec<f64>) -> Option<Array1<f64>> {
        let a = Array1::from(v);
        let n = a.dot(&a).sqrt();
        (n > 1e-3).then(|| a / n)
    }

    proptest! {
        // the O(η) cross term vanishes on the sphere: ‖u'‖² − 1 = η²‖r_u‖²
        #[test]
        fn norm_drift_identity(
            u in prop::collection::vec(-1.0f64..1.0, 4),
            v in prop::collection::vec(-1.0f64..1.0, 3),
            x in prop::collection::vec(-3.0f64..3.0, 4),
            y in prop::collection::vec(-3.0f64..3.0, 3),
            eta in 1e-4f64..0.1,
        ) {
            let (Some(u), Some(v)) = (unit(u), unit(v)) else { return Ok(()) };
            let x = Array1::from(x);
            let y = Array1::from(y);
            let s = TwoViewSample::new(x.clone(), y.clone()).unwrap();
            let out = gha_step(&it(u.clone(), v.clone()), &s, eta).unwrap();
            let inner = u.dot(&x) * y.dot(&v);
            let ru = &x * y.dot(&v) - &u * inner;
            let rv = &y * u.dot(&x) - &v * inner;
            let du = out.u.dot(&out.u) - 1.0 - eta * eta * ru.dot(&ru);
            let dv = out.v.dot(&out.v) - 1.0 - eta * eta * rv.dot(&rv);
            prop_assert!(du.abs() <= 8.0 * f64::EPSILON, "du = {du:e}");
            prop_assert!(dv.abs() <= 8.0 * f64::EPSILON, "dv = {dv:e}");
        }

        // successor depends only on (state, sample, η)
        #[test]
        fn step_is_a_pure_function(
            u in prop::collection::vec(-1.0f64..1.0, 3),
            x in prop::collection::vec(-3.0f64..3.0, 3),
            eta in 0.0f64..0.5,
        ) {
            let Some(u) = unit(u) else { return Ok(()) };
            let s = TwoViewSample::new(Array1::from(x.clone()), Array1::from(x)).unwrap();
            let a = gha_step(&it(u.clone(), u.clone()), &s, eta).unwrap();
            let b = gha_step(&it(u.clone(), u), &s, eta).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
