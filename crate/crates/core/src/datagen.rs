//! Synthetic two-view data and CSV ingestion.
//!
//! The generative model mixes jointly Gaussian latents `(X̄, Ȳ)` with random
//! orthogonal matrices: `Cov(X) = UᵀΣ_X̄X̄U`, `Cov(X, Y) = UᵀΣ_X̄ȲV`,
//! `Cov(Y) = VᵀΣ_ȲȲV`. The latent cross-covariance is diagonal, so its
//! diagonal is exactly the spectrum of `Σ_XY`.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::diffusion::LatentMoments;
use crate::error::{Error, Result};
use crate::oracle::sym_eig;
use crate::pls_core::{fmt_f64, SampleSource, TwoViewSample, VecSource};

const PSD_TOL: f64 = 1e-8;
const CHOLESKY_JITTER: f64 = 1e-12;
const ORTHO_TOL: f64 = 1e-10;

/// Latent blocks of the three-factor benchmark: `Σ_X̄X̄ = Σ_ȲȲ` with unit
/// off-diagonal structure and `Σ_X̄Ȳ = diag(4, 2, 0.5)`.
pub fn benchmark_latents() -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let s = ndarray::array![[6.0, 2.0, 1.0], [2.0, 6.0, 2.0], [1.0, 2.0, 6.0]];
    let xy = Array2::from_diag(&ndarray::array![4.0, 2.0, 0.5]);
    (s.clone(), xy, s)
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceModel {
    /// `m × m` (a `d × d` block is padded with the identity when `m > d`).
    pub sigma_latent_xx: Array2<f64>,
    pub sigma_latent_yy: Array2<f64>,
    /// `d × d`, diagonal, nonnegative and nonincreasing.
    pub sigma_latent_xy: Array2<f64>,
    pub mix_u: Array2<f64>,
    pub mix_v: Array2<f64>,
    pub cov_x: Array2<f64>,
    pub cov_y: Array2<f64>,
    pub sigma_xy: Array2<f64>,
    /// Lower-triangular factor of the joint `(m+d) × (m+d)` covariance.
    #[serde(skip)]
    pub chol: Array2<f64>,
    pub moments: LatentMoments,
    pub m: usize,
    pub d: usize,
    pub seed: u64,
    /// Smallest eigenvalue of the joint covariance before repair.
    pub min_joint_eig: f64,
}

impl CovarianceModel {
    /// Diagonal of the latent cross-covariance (the singular values of `Σ_XY`).
    pub fn latent_singular_values(&self) -> Array1<f64> {
        self.sigma_latent_xy.diag().to_owned()
    }

    /// Cholesky factor of the latent `(X̄₁..X̄_d, Ȳ₁..Ȳ_d)` covariance.
    pub fn latent_cholesky(&self) -> Result<Array2<f64>> {
        let d = self.d;
        let mut joint = Array2::zeros((2 * d, 2 * d));
        joint
            .slice_mut(ndarray::s![0..d, 0..d])
            .assign(&self.sigma_latent_xx.slice(ndarray::s![0..d, 0..d]));
        joint
            .slice_mut(ndarray::s![d.., d..])
            .assign(&self.sigma_latent_yy);
        joint
            .slice_mut(ndarray::s![0..d, d..])
            .assign(&self.sigma_latent_xy);
        joint
            .slice_mut(ndarray::s![d.., 0..d])
            .assign(&self.sigma_latent_xy.t());
        let (repaired, _) = repair_psd(&joint)?;
        cholesky_with_jitter(&repaired)
    }

    /// Joint covariance `[[Cov X, Cov(X,Y)], [Cov(Y,X), Cov Y]]`.
    pub fn joint_cov(&self) -> Array2<f64> {
        let (m, d) = (self.m, self.d);
        let mut j = Array2::zeros((m + d, m + d));
        j.slice_mut(ndarray::s![0..m, 0..m]).assign(&self.cov_x);
        j.slice_mut(ndarray::s![m.., m..]).assign(&self.cov_y);
        j.slice_mut(ndarray::s![0..m, m..]).assign(&self.sigma_xy);
        j.slice_mut(ndarray::s![m.., 0..m])
            .assign(&self.sigma_xy.t());
        j
    }
}

/// Builds the model with random orthogonal mixing drawn from `seed`.
pub fn build_model(
    sigma_latent_xx: &Array2<f64>,
    sigma_latent_xy: &Array2<f64>,
    sigma_latent_yy: &Array2<f64>,
    m: usize,
    d: usize,
    seed: u64,
) -> Result<CovarianceModel> {
    if d == 0 || d > m {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= d <= m, got m={m}, d={d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u_raw = Array2::from_shape_fn((m, m), |_| rng.sample::<f64, _>(StandardNormal));
    let v_raw = Array2::from_shape_fn((d, d), |_| rng.sample::<f64, _>(StandardNormal));
    let u = gram_schmidt(&u_raw)?;
    let v = gram_schmidt(&v_raw)?;
    build_model_with_mixing(sigma_latent_xx, sigma_latent_xy, sigma_latent_yy, u, v, seed)
}

/// Builds the model with caller-supplied orthogonal mixing matrices.
pub fn build_model_with_mixing(
    sigma_latent_xx: &Array2<f64>,
    sigma_latent_xy: &Array2<f64>,
    sigma_latent_yy: &Array2<f64>,
    mix_u: Array2<f64>,
    mix_v: Array2<f64>,
    seed: u64,
) -> Result<CovarianceModel> {
    let m = mix_u.nrows();
    let d = mix_v.nrows();
    if mix_u.ncols() != m || mix_v.ncols() != d {
        return Err(Error::InvalidArgument("mixing matrices must be square".into()));
    }
    for (name, q) in [("mix_u", &mix_u), ("mix_v", &mix_v)] {
        let err = max_abs(&(q.t().dot(q) - Array2::<f64>::eye(q.nrows())));
        if err > ORTHO_TOL {
            return Err(Error::InvalidArgument(format!(
                "{name} is not orthogonal (error {err:e})"
            )));
        }
    }
    if sigma_latent_xy.dim() != (d, d) {
        return Err(Error::dim("sigma_latent_xy", d, sigma_latent_xy.nrows()));
    }
    if sigma_latent_yy.dim() != (d, d) {
        return Err(Error::dim("sigma_latent_yy", d, sigma_latent_yy.nrows()));
    }
    let xx = match sigma_latent_xx.dim() {
        (r, c) if r == m && c == m => sigma_latent_xx.clone(),
        (r, c) if r == d && c == d => {
            let mut full = Array2::<f64>::eye(m);
            full.slice_mut(ndarray::s![0..d, 0..d])
                .assign(sigma_latent_xx);
            full
        }
        (r, _) => return Err(Error::dim("sigma_latent_xx", m, r)),
    };
    check_symmetric("sigma_latent_xx", &xx)?;
    check_symmetric("sigma_latent_yy", sigma_latent_yy)?;
    let diag = sigma_latent_xy.diag().to_owned();
    for i in 0..d {
        for j in 0..d {
            if i != j && sigma_latent_xy[[i, j]] != 0.0 {
                return Err(Error::InvalidArgument(
                    "sigma_latent_xy must be diagonal".into(),
                ));
            }
        }
    }
    if diag.iter().any(|&x| x < 0.0) || diag.windows(2).into_iter().any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument(
            "sigma_latent_xy diagonal must be nonnegative and nonincreasing".into(),
        ));
    }

    let mut padded = Array2::zeros((m, d));
    padded
        .slice_mut(ndarray::s![0..d, ..])
        .assign(sigma_latent_xy);
    let cov_x = mix_u.t().dot(&xx).dot(&mix_u);
    let cov_y = mix_v.t().dot(sigma_latent_yy).dot(&mix_v);
    let sigma_xy = mix_u.t().dot(&padded).dot(&mix_v);

    let mut model = CovarianceModel {
        sigma_latent_xx: xx,
        sigma_latent_yy: sigma_latent_yy.clone(),
        sigma_latent_xy: sigma_latent_xy.clone(),
        mix_u,
        mix_v,
        cov_x,
        cov_y,
        sigma_xy,
        chol: Array2::zeros((0, 0)),
        moments: LatentMoments::gaussian(sigma_latent_xx, &diag, sigma_latent_yy)?,
        m,
        d,
        seed,
        min_joint_eig: 0.0,
    };
    let (repaired, min_eig) = repair_psd(&model.joint_cov())?;
    model.min_joint_eig = min_eig;
    model.chol = cholesky_with_jitter(&repaired)?;
    Ok(model)
}

fn check_symmetric(name: &str, a: &Array2<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidArgument(format!("{name} must be square")));
    }
    let scale = max_abs(a).max(1.0);
    if max_abs(&(a - &a.t())) > 1e-12 * scale {
        return Err(Error::InvalidArgument(format!("{name} must be symmetric")));
    }
    Ok(())
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Modified Gram-Schmidt on the columns, with a second orthogonalization pass.
pub fn gram_schmidt(a: &Array2<f64>) -> Result<Array2<f64>> {
    let (rows, cols) = a.dim();
    let mut q = a.clone();
    for j in 0..cols {
        for _pass in 0..2 {
            for k in 0..j {
                let proj = q.column(k).dot(&q.column(j));
                let qk = q.column(k).to_owned();
                q.column_mut(j).scaled_add(-proj, &qk);
            }
        }
        let nrm = q.column(j).dot(&q.column(j)).sqrt();
        if nrm <= 1e-12 * (rows as f64) {
            return Err(Error::InvalidArgument(
                "Gram-Schmidt input is rank deficient".into(),
            ));
        }
        q.column_mut(j).mapv_inplace(|x| x / nrm);
    }
    Ok(q)
}

/// Clips eigenvalues in `[−PSD_TOL, 0)` to zero. Returns the repaired matrix
/// and the smallest eigenvalue found.
fn repair_psd(a: &Array2<f64>) -> Result<(Array2<f64>, f64)> {
    let (vals, vecs) = sym_eig(a.view())?;
    let min_eig = vals[vals.len() - 1];
    let scale = vals[0].abs().max(1.0);
    if min_eig < -PSD_TOL * scale {
        return Err(Error::Indefinite { min_eig });
    }
    if min_eig >= 0.0 {
        return Ok((a.clone(), min_eig));
    }
    let clipped = vals.mapv(|x| x.max(0.0));
    let rec = (&vecs * &clipped.view().insert_axis(ndarray::Axis(0))).dot(&vecs.t());
    Ok((rec, min_eig))
}

fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 0.0) {
            return None;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Some(l)
}

fn cholesky_with_jitter(a: &Array2<f64>) -> Result<Array2<f64>> {
    if let Some(l) = cholesky(a) {
        return Ok(l);
    }
    let scale = a.diag().iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
    let mut jittered = a.clone();
    for i in 0..a.nrows() {
        jittered[[i, i]] += CHOLESKY_JITTER * scale;
    }
    cholesky(&jittered).ok_or(Error::Indefinite { min_eig: f64::NAN })
}

/// One draw `z = L ξ`, split into `(x, y)`.
pub fn sample<R: Rng + ?Sized>(model: &CovarianceModel, rng: &mut R) -> TwoViewSample {
    let n = model.m + model.d;
    let xi: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut z = vec![0.0; n];
    for (i, zi) in z.iter_mut().enumerate() {
        let row = model.chol.row(i);
        let mut acc = 0.0;
        for j in 0..=i {
            acc += row[j] * xi[j];
        }
        *zi = acc;
    }
    let y = Array1::from(z.split_off(model.m));
    TwoViewSample {
        x: Array1::from(z),
        y,
        mask_x: None,
        mask_y: None,
    }
}

/// Keeps each coordinate independently with probability `p`; dropped
/// coordinates are zeroed and flagged.
pub fn mask<R: Rng + ?Sized>(s: &TwoViewSample, p: f64, rng: &mut R) -> TwoViewSample {
    let mut draw = |v: &Array1<f64>| {
        let keep: Vec<bool> = (0..v.len()).map(|_| rng.random::<f64>() < p).collect();
        let vals = Array1::from_iter(v.iter().zip(&keep).map(|(&x, &k)| if k { x } else { 0.0 }));
        (vals, keep)
    };
    let (x, mask_x) = draw(&s.x);
    let (y, mask_y) = draw(&s.y);
    TwoViewSample {
        x,
        y,
        mask_x: Some(mask_x),
        mask_y: Some(mask_y),
    }
}

/// Infinite stream from the Gaussian model, owning its generator.
#[derive(Debug, Clone)]
pub struct GaussianSource<'a> {
    model: &'a CovarianceModel,
    rng: ChaCha8Rng,
}

impl<'a> GaussianSource<'a> {
    pub fn new(model: &'a CovarianceModel, seed: u64) -> Self {
        GaussianSource {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl SampleSource for GaussianSource<'_> {
    fn next_sample(&mut self) -> Option<TwoViewSample> {
        Some(sample(self.model, &mut self.rng))
    }
}

/// Applies independent coordinate masking to another stream.
#[derive(Debug, Clone)]
pub struct MaskedSource<S> {
    inner: S,
    p: f64,
    rng: ChaCha8Rng,
}

impl<S: SampleSource> MaskedSource<S> {
    pub fn new(inner: S, p: f64, seed: u64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "observe probability must lie in (0, 1], got {p}"
            )));
        }
        Ok(MaskedSource {
            inner,
            p,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl<S: SampleSource> SampleSource for MaskedSource<S> {
    fn next_sample(&mut self) -> Option<TwoViewSample> {
        self.inner
            .next_sample()
            .map(|s| mask(&s, self.p, &mut self.rng))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub has_header: bool,
    pub center: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: false,
            center: true,
        }
    }
}

fn read_matrix(path: &Path, has_header: bool) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let name = path.display().to_string();
    let mut rows = Vec::new();
    let mut width = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if (has_header && idx == 0) || line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                let cell = cell.trim();
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        path: name.clone(),
                        line: lineno,
                        message: format!("non-numeric cell `{cell}`"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    path: name,
                    line: lineno,
                    message: format!("expected {w} columns, found {}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Loads paired rows from two CSV files into a replayable stream.
pub fn load_two_view_csv(
    path_x: impl AsRef<Path>,
    path_y: impl AsRef<Path>,
    opts: CsvOptions,
) -> Result<VecSource> {
    let (px, py) = (path_x.as_ref(), path_y.as_ref());
    let xs = read_matrix(px, opts.has_header)?;
    let ys = read_matrix(py, opts.has_header)?;
    if xs.len() != ys.len() {
        return Err(Error::RowCountMismatch {
            path_x: px.display().to_string(),
            rows_x: xs.len(),
            path_y: py.display().to_string(),
            rows_y: ys.len(),
        });
    }
    let center = |rows: Vec<Vec<f64>>| -> Vec<Array1<f64>> {
        let mut out: Vec<Array1<f64>> = rows.into_iter().map(Array1::from).collect();
        if opts.center && !out.is_empty() {
            let n = out.len() as f64;
            let mean = out.iter().fold(Array1::zeros(out[0].len()), |acc, r| acc + r) / n;
            out.iter_mut().for_each(|r| *r -= &mean);
        }
        out
    };
    let samples = center(xs)
        .into_iter()
        .zip(center(ys))
        .map(|(x, y)| TwoViewSample::new(x, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(VecSource::new(samples))
}

/// Writes samples as two headerless CSV files with round-trip precision.
pub fn write_two_view_csv(
    samples: &[TwoViewSample],
    path_x: impl AsRef<Path>,
    path_y: impl AsRef<Path>,
) -> Result<()> {
    let write = |path: &Path, rows: &mut dyn Iterator<Item = &Array1<f64>>| -> Result<()> {
        let mut w = std::io::BufWriter::new(fs::File::create(path)?);
        for r in rows {
            let line: Vec<String> = r.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    };
    write(path_x.as_ref(), &mut samples.iter().map(|s| &s.x))?;
    write(path_y.as_ref(), &mut samples.iter().map(|s| &s.y))?;
    Ok(())
}
