//! Universal-kriging Gaussian-process surrogate of the performance function.
//!
//! Constant trend, anisotropic squared-exponential or Matérn 5/2 kernels,
//! hyperparameters by maximum likelihood with the process variance profiled
//! out analytically. Inputs are standardized to the current design before any
//! kernel evaluation; predictions are mapped back transparently.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::MarginalDistribution;
use crate::stream::RandomStream;

/// Relative jitter ladder applied to the correlation diagonal until the
/// Cholesky factorization succeeds.
const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// Row-duplicate tolerance in standardized coordinates.
const DUPLICATE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    SquaredExponential,
    Matern52,
}

/// Stationary anisotropic covariance kernel σ_Z²·r(d).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub length_scales: Vec<f64>,
    pub process_variance: f64,
}

impl Kernel {
    pub fn new(kind: KernelKind, length_scales: Vec<f64>, process_variance: f64) -> Result<Self> {
        if length_scales.iter().any(|&l| !(l > 0.0)) || !(process_variance > 0.0) {
            return Err(Error::Domain(
                "length-scales and process variance must be positive".into(),
            ));
        }
        Ok(Self { kind, length_scales, process_variance })
    }

    pub fn dims(&self) -> usize {
        self.length_scales.len()
    }

    /// Correlation r(x, x') in [0, 1]; r(x, x) = 1.
    #[inline]
    pub(crate) fn corr(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::SquaredExponential => {
                // product form: exp(-Σ d_j²/l_j²)
                let mut s = 0.0;
                for j in 0..self.length_scales.len() {
                    let d = (a[j] - b[j]) / self.length_scales[j];
                    s += d * d;
                }
                (-s).exp()
            }
            KernelKind::Matern52 => {
                // applied to the length-scale-weighted Euclidean distance
                let mut s = 0.0;
                for j in 0..self.length_scales.len() {
                    let d = (a[j] - b[j]) / self.length_scales[j];
                    s += d * d;
                }
                let h = s.sqrt();
                let sq5h = 5.0_f64.sqrt() * h;
                (1.0 + sq5h + 5.0 * s / 3.0) * (-sq5h).exp()
            }
        }
    }

    /// Covariance k(x, x') = σ_Z²·r(x, x').
    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let m = self.length_scales.len();
        if a.len() != m {
            return Err(Error::Shape { expected: m, got: a.len() });
        }
        if b.len() != m {
            return Err(Error::Shape { expected: m, got: b.len() });
        }
        Ok(self.process_variance * self.corr(a, b))
    }
}

/// The set of points where the true performance function has been evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignOfExperiments {
    inputs: DMatrix<f64>,
    outputs: DVector<f64>,
}

fn row_scales(inputs: &DMatrix<f64>) -> Vec<f64> {
    (0..inputs.ncols())
        .map(|j| {
            let col = inputs.column(j);
            let mean = col.sum() / col.len() as f64;
            let var = col.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / col.len() as f64;
            let s = var.sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect()
}

fn rows_duplicate(a: &[f64], b: &[f64], scales: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .zip(scales)
        .all(|((&x, &y), &s)| (x - y).abs() <= DUPLICATE_TOL * s)
}

impl DesignOfExperiments {
    pub fn new(inputs: DMatrix<f64>, outputs: DVector<f64>) -> Result<Self> {
        let n = inputs.nrows();
        if n < 2 {
            return Err(Error::InsufficientData { need: 2, got: n });
        }
        if outputs.len() != n {
            return Err(Error::Shape { expected: n, got: outputs.len() });
        }
        let scales = row_scales(&inputs);
        for i in 0..n {
            for k in (i + 1)..n {
                if rows_duplicate(
                    inputs.row(i).transpose().as_slice(),
                    inputs.row(k).transpose().as_slice(),
                    &scales,
                ) {
                    return Err(Error::DuplicateDesign);
                }
            }
        }
        Ok(Self { inputs, outputs })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dims(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn outputs(&self) -> &DVector<f64> {
        &self.outputs
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let scales = row_scales(&self.inputs);
        (0..self.len())
            .any(|i| rows_duplicate(self.inputs.row(i).transpose().as_slice(), x, &scales))
    }

    /// Appends one observation, rejecting duplicates of existing inputs.
    pub fn push(&self, x: &[f64], y: f64) -> Result<Self> {
        if x.len() != self.dims() {
            return Err(Error::Shape { expected: self.dims(), got: x.len() });
        }
        if self.contains(x) {
            return Err(Error::DuplicateDesign);
        }
        let mut inputs = self.inputs.clone().insert_row(self.len(), 0.0);
        let last = inputs.nrows() - 1;
        for j in 0..x.len() {
            inputs[(last, j)] = x[j];
        }
        let outputs = self.outputs.clone().insert_row(self.len(), y);
        Ok(Self { inputs, outputs })
    }
}

/// Predictive mean and standard deviation at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub std_dev: f64,
}

/// Fitted Gaussian-process surrogate. Immutable after construction.
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: Kernel, // length-scales in standardized coordinates
    doe: DesignOfExperiments,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    std_inputs: DMatrix<f64>,
    beta: f64,
    jitter_rel: f64,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>,    // R⁻¹(y - 1β)
    rinv_one: DVector<f64>, // R⁻¹1
    s_one: f64,             // 1ᵀR⁻¹1
    w_one: DVector<f64>,    // L⁻¹1
}

/// Serializable snapshot of a fitted model for run persistence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpModelDoc {
    pub kernel_kind: KernelKind,
    pub length_scales: Vec<f64>,
    pub process_variance: f64,
    pub beta: f64,
    pub jitter: f64,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub doe_inputs: Vec<Vec<f64>>,
    pub doe_outputs: Vec<f64>,
}

fn standardize(inputs: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>, DMatrix<f64>) {
    let n = inputs.nrows();
    let m = inputs.ncols();
    let mut mean = vec![0.0; m];
    let mut scale = vec![1.0; m];
    for j in 0..m {
        let col = inputs.column(j);
        mean[j] = col.sum() / n as f64;
        let var = col.iter().map(|&x| (x - mean[j]) * (x - mean[j])).sum::<f64>() / n as f64;
        scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let mut std = DMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            std[(i, j)] = (inputs[(i, j)] - mean[j]) / scale[j];
        }
    }
    (mean, scale, std)
}

fn correlation_matrix(kernel: &Kernel, points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.nrows();
    let mut r = DMatrix::zeros(n, n);
    let rows: Vec<Vec<f64>> = (0..n).map(|i| points.row(i).iter().copied().collect()).collect();
    for i in 0..n {
        r[(i, i)] = 1.0;
        for k in (i + 1)..n {
            let v = kernel.corr(&rows[i], &rows[k]);
            r[(i, k)] = v;
            r[(k, i)] = v;
        }
    }
    r
}

/// Cholesky with the relative jitter ladder; returns (L, applied jitter).
fn jittered_cholesky(r: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    for &delta in &JITTER_LADDER {
        let mut m = r.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += delta;
        }
        if let Some(chol) = m.cholesky() {
            return Some((chol.l(), delta));
        }
    }
    None
}

struct ProfiledFit {
    chol_l: DMatrix<f64>,
    jitter_rel: f64,
    beta: f64,
    sigma2: f64,
    nll: f64,
}

/// Profiled negative log-likelihood at fixed length-scales: β by GLS,
/// σ_Z² analytic, leaving n·ln σ̂² + ln det R.
fn profiled_fit(
    kind: KernelKind,
    log_ls: &[f64],
    std_inputs: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Option<ProfiledFit> {
    let ls: Vec<f64> = log_ls.iter().map(|&v| v.exp()).collect();
    let kernel = Kernel { kind, length_scales: ls, process_variance: 1.0 };
    let r = correlation_matrix(&kernel, std_inputs);
    let (l, jitter_rel) = jittered_cholesky(&r)?;
    let n = y.len() as f64;
    let ones = DVector::from_element(y.len(), 1.0);
    let w_one = l.solve_lower_triangular(&ones)?;
    let w_y = l.solve_lower_triangular(y)?;
    let s_one = w_one.dot(&w_one);
    if !(s_one > 0.0) {
        return None;
    }
    let beta = w_one.dot(&w_y) / s_one;
    let resid = &w_y - &w_one * beta;
    let sigma2 = (resid.dot(&resid) / n).max(1e-30);
    let log_det = 2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>();
    let nll = n * sigma2.ln() + log_det;
    if !nll.is_finite() {
        return None;
    }
    Some(ProfiledFit { chol_l: l, jitter_rel, beta, sigma2, nll })
}

/// Nelder-Mead with box clamping; small dimensions only.
fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let m = x0.len();
    let clamp = |x: &mut Vec<f64>| {
        for j in 0..m {
            x[j] = x[j].clamp(lo[j], hi[j]);
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    simplex.push(x0.to_vec());
    for j in 0..m {
        let mut p = x0.to_vec();
        p[j] += 0.4;
        clamp(&mut p);
        if (p[j] - x0[j]).abs() < 1e-12 {
            p[j] = x0[j] - 0.4;
            clamp(&mut p);
        }
        simplex.push(p);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=m).collect();
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        let best = order[0];
        let worst = order[m];
        if (fv[worst] - fv[best]).abs() < 1e-9 * (1.0 + fv[best].abs()) {
            break;
        }
        let mut centroid = vec![0.0; m];
        for &i in order.iter().take(m) {
            for j in 0..m {
                centroid[j] += simplex[i][j] / m as f64;
            }
        }
        let blend = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> =
                (0..m).map(|j| centroid[j] + t * (centroid[j] - simplex[worst][j])).collect();
            clamp(&mut p);
            p
        };
        let refl = blend(1.0);
        let f_refl = f(&refl);
        if f_refl < fv[best] {
            let exp = blend(2.0);
            let f_exp = f(&exp);
            if f_exp < f_refl {
                simplex[worst] = exp;
                fv[worst] = f_exp;
            } else {
                simplex[worst] = refl;
                fv[worst] = f_refl;
            }
        } else if f_refl < fv[order[m - 1]] {
            simplex[worst] = refl;
            fv[worst] = f_refl;
        } else {
            let con = blend(-0.5);
            let f_con = f(&con);
            if f_con < fv[worst] {
                simplex[worst] = con;
                fv[worst] = f_con;
            } else {
                // shrink toward the best vertex
                let best_p = simplex[best].clone();
                for i in 0..=m {
                    if i == best {
                        continue;
                    }
                    for j in 0..m {
                        simplex[i][j] = 0.5 * (simplex[i][j] + best_p[j]);
                    }
                    fv[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=m {
        if fv[i] < fv[best] {
            best = i;
        }
    }
    (simplex[best].clone(), fv[best])
}

impl GpModel {
    /// Fits hyperparameters by multi-start maximum likelihood on the design.
    pub fn fit(doe: DesignOfExperiments, kind: KernelKind, stream: &RandomStream) -> Result<Self> {
        Self::fit_impl(doe, kind, stream, None)
    }

    fn fit_impl(
        doe: DesignOfExperiments,
        kind: KernelKind,
        stream: &RandomStream,
        warm_log_ls: Option<Vec<f64>>,
    ) -> Result<Self> {
        let (x_mean, x_scale, std_inputs) = standardize(doe.inputs());
        let m = doe.dims();
        let y = doe.outputs().clone();

        // log length-scale box: [1e-2, 1e2] times the standardized input range
        let mut lo = vec![0.0; m];
        let mut hi = vec![0.0; m];
        for j in 0..m {
            let col = std_inputs.column(j);
            let range = (col.max() - col.min()).max(1e-6);
            lo[j] = (1e-2 * range).ln();
            hi[j] = (1e2 * range).ln();
        }

        let mut starts: Vec<Vec<f64>> = Vec::new();
        if let Some(w) = warm_log_ls {
            let clamped: Vec<f64> =
                w.iter().enumerate().map(|(j, &v)| v.clamp(lo[j], hi[j])).collect();
            starts.push(clamped);
        }
        let n_fresh = if starts.is_empty() { 5 } else { 2 };
        let mut rng = stream.child(0x6670).rng();
        for s in 0..n_fresh {
            let mut p = vec![0.0; m];
            for j in 0..m {
                // stratified draw over the box, one stratum per start
                let u: f64 = rng.random();
                let frac = (s as f64 + u) / n_fresh as f64;
                p[j] = lo[j] + frac * (hi[j] - lo[j]);
            }
            starts.push(p);
        }

        let mut best: Option<(Vec<f64>, f64)> = None;
        for start in &starts {
            let (x, fx) = nelder_mead(
                |p| profiled_fit(kind, p, &std_inputs, &y).map_or(f64::INFINITY, |r| r.nll),
                start,
                &lo,
                &hi,
                80 * m,
            );
            if best.as_ref().is_none_or(|(_, b)| fx < *b) {
                best = Some((x, fx));
            }
        }
        let (log_ls, _) = best.ok_or(Error::IllConditioned)?;
        let fitted = profiled_fit(kind, &log_ls, &std_inputs, &y).ok_or(Error::IllConditioned)?;

        let kernel = Kernel {
            kind,
            length_scales: log_ls.iter().map(|&v| v.exp()).collect(),
            process_variance: fitted.sigma2,
        };
        let ones = DVector::from_element(doe.len(), 1.0);
        let w_one = fitted
            .chol_l
            .solve_lower_triangular(&ones)
            .ok_or(Error::IllConditioned)?;
        let rinv_one = fitted
            .chol_l
            .transpose()
            .solve_upper_triangular(&w_one)
            .ok_or(Error::IllConditioned)?;
        let resid = &y - &ones * fitted.beta;
        let w_resid = fitted
            .chol_l
            .solve_lower_triangular(&resid)
            .ok_or(Error::IllConditioned)?;
        let alpha = fitted
            .chol_l
            .transpose()
            .solve_upper_triangular(&w_resid)
            .ok_or(Error::IllConditioned)?;
        let s_one = w_one.dot(&w_one);

        Ok(Self {
            kernel,
            doe,
            x_mean,
            x_scale,
            std_inputs,
            beta: fitted.beta,
            jitter_rel: fitted.jitter_rel,
            chol_l: fitted.chol_l,
            alpha,
            rinv_one,
            s_one,
            w_one,
        })
    }

    /// Refits on the design extended with one observation, warm-starting the
    /// hyperparameter search from the current optimum.
    pub fn enrich(&self, x: &[f64], y: f64, stream: &RandomStream) -> Result<Self> {
        let doe = self.doe.push(x, y)?;
        let warm: Vec<f64> = self
            .kernel
            .length_scales
            .iter()
            .zip(&self.x_scale)
            .enumerate()
            .map(|(j, (&l, &s))| {
                // re-express the previous optimum in the new standardization
                let _ = j;
                (l * s).ln()
            })
            .collect();
        // warm lengths are in original units; convert to new standardized units below
        let (_, new_scale, _) = standardize(doe.inputs());
        let warm_std: Vec<f64> =
            warm.iter().zip(&new_scale).map(|(&lw, &s)| lw - s.ln()).collect();
        Self::fit_impl(doe, self.kernel.kind, stream, Some(warm_std))
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn doe(&self) -> &DesignOfExperiments {
        &self.doe
    }

    pub fn trend(&self) -> f64 {
        self.beta
    }

    /// Jitter actually added to the covariance diagonal, in output units.
    pub fn jitter(&self) -> f64 {
        self.jitter_rel * self.kernel.process_variance
    }

    pub fn dims(&self) -> usize {
        self.doe.dims()
    }

    pub(crate) fn standardized_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.x_mean)
            .zip(&self.x_scale)
            .map(|((&v, &mu), &s)| (v - mu) / s)
            .collect()
    }

    pub(crate) fn standardized_inputs(&self) -> &DMatrix<f64> {
        &self.std_inputs
    }

    pub(crate) fn chol_l(&self) -> &DMatrix<f64> {
        &self.chol_l
    }

    pub(crate) fn rinv_one(&self) -> &DVector<f64> {
        &self.rinv_one
    }

    pub(crate) fn s_one(&self) -> f64 {
        self.s_one
    }

    /// Correlation vectors between the design and arbitrary standardized points,
    /// one column per point.
    pub(crate) fn corr_with_doe_std(&self, std_points: &[Vec<f64>]) -> DMatrix<f64> {
        let n = self.doe.len();
        let mut k = DMatrix::zeros(n, std_points.len());
        for (c, p) in std_points.iter().enumerate() {
            for i in 0..n {
                let row: Vec<f64> = self.std_inputs.row(i).iter().copied().collect();
                k[(i, c)] = self.kernel.corr(&row, p);
            }
        }
        k
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.dims() {
            return Err(Error::Shape { expected: self.dims(), got: x.len() });
        }
        let points = DMatrix::from_row_slice(1, x.len(), x);
        let (mu, sd) = self.predict_batch(&points)?;
        Ok(Prediction { mean: mu[0], std_dev: sd[0] })
    }

    /// Predictive mean and standard deviation over a batch of points (rows).
    pub fn predict_batch(&self, points: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        if points.ncols() != self.dims() {
            return Err(Error::Shape { expected: self.dims(), got: points.ncols() });
        }
        let n = self.doe.len();
        let total = points.nrows();
        let sigma2 = self.kernel.process_variance;
        let mut mean = DVector::zeros(total);
        let mut sd = DVector::zeros(total);

        const CHUNK: usize = 2048;
        let doe_rows: Vec<Vec<f64>> =
            (0..n).map(|i| self.std_inputs.row(i).iter().copied().collect()).collect();
        let mut start = 0;
        while start < total {
            let c = CHUNK.min(total - start);
            let mut k = DMatrix::zeros(n, c);
            for idx in 0..c {
                let p = self.standardized_point(points.row(start + idx).transpose().as_slice());
                for i in 0..n {
                    k[(i, idx)] = self.kernel.corr(&doe_rows[i], &p);
                }
            }
            let v = self.chol_l.solve_lower_triangular(&k).ok_or(Error::IllConditioned)?;
            for idx in 0..c {
                let kc = k.column(idx);
                let vc = v.column(idx);
                mean[start + idx] = self.beta + kc.dot(&self.alpha);
                let q = vc.dot(&vc);
                let t = self.w_one.dot(&vc);
                let var = sigma2 * (1.0 - q + (1.0 - t) * (1.0 - t) / self.s_one);
                sd[start + idx] = var.max(0.0).sqrt();
            }
            start += c;
        }
        Ok((mean, sd))
    }

    pub fn to_document(&self) -> GpModelDoc {
        GpModelDoc {
            kernel_kind: self.kernel.kind,
            length_scales: self.kernel.length_scales.clone(),
            process_variance: self.kernel.process_variance,
            beta: self.beta,
            jitter: self.jitter(),
            x_mean: self.x_mean.clone(),
            x_scale: self.x_scale.clone(),
            doe_inputs: (0..self.doe.len())
                .map(|i| self.doe.inputs().row(i).iter().copied().collect())
                .collect(),
            doe_outputs: self.doe.outputs().iter().copied().collect(),
        }
    }

    /// Rebuilds a model from its snapshot, reusing the recorded
    /// hyperparameters (no re-optimization).
    pub fn from_document(doc: &GpModelDoc) -> Result<Self> {
        let n = doc.doe_inputs.len();
        let m = doc.length_scales.len();
        let mut inputs = DMatrix::zeros(n, m);
        for (i, row) in doc.doe_inputs.iter().enumerate() {
            for j in 0..m {
                inputs[(i, j)] = row[j];
            }
        }
        let doe = DesignOfExperiments::new(inputs, DVector::from_vec(doc.doe_outputs.clone()))?;
        let (x_mean, x_scale, std_inputs) = standardize(doe.inputs());
        let kernel = Kernel::new(doc.kernel_kind, doc.length_scales.clone(), doc.process_variance)?;
        let r = correlation_matrix(&kernel, &std_inputs);
        let (chol_l, jitter_rel) = jittered_cholesky(&r).ok_or(Error::IllConditioned)?;
        let y = doe.outputs().clone();
        let ones = DVector::from_element(n, 1.0);
        let w_one = chol_l.solve_lower_triangular(&ones).ok_or(Error::IllConditioned)?;
        let rinv_one =
            chol_l.transpose().solve_upper_triangular(&w_one).ok_or(Error::IllConditioned)?;
        let s_one = w_one.dot(&w_one);
        let beta = doc.beta;
        let resid = &y - &ones * beta;
        let w_resid = chol_l.solve_lower_triangular(&resid).ok_or(Error::IllConditioned)?;
        let alpha =
            chol_l.transpose().solve_upper_triangular(&w_resid).ok_or(Error::IllConditioned)?;
        Ok(Self {
            kernel,
            doe,
            x_mean,
            x_scale,
            std_inputs,
            beta,
            jitter_rel,
            chol_l,
            alpha,
            rinv_one,
            s_one,
            w_one,
        })
    }
}

/// LHS design over `[mean ± 5σ]` per marginal, a convenient initial DoE box.
pub fn initial_doe_inputs(
    n: usize,
    marginals: &[MarginalDistribution],
    stream: &RandomStream,
) -> Result<DMatrix<f64>> {
    // uniform strata over the ±5σ box rather than distribution quantiles:
    // the design should cover the domain, not cluster at the mode
    let dims = marginals.len();
    if n < 1 || dims < 1 {
        return Err(Error::Domain("empty design requested".into()));
    }
    let mut rng = stream.rng();
    let mut design = DMatrix::zeros(n, dims);
    let mut perm: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    for (j, marginal) in marginals.iter().enumerate() {
        let lo = marginal.mean() - 5.0 * marginal.std_dev();
        let hi = marginal.mean() + 5.0 * marginal.std_dev();
        perm.shuffle(&mut rng);
        for i in 0..n {
            let u: f64 = rng.random();
            let frac = (perm[i] as f64 + u) / n as f64;
            design[(i, j)] = lo + frac * (hi - lo);
        }
    }
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn linear_doe_1d(n: usize, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> DesignOfExperiments {
        let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        DesignOfExperiments::new(DMatrix::from_vec(n, 1, xs), DVector::from_vec(ys)).unwrap()
    }

    #[test]
    fn kernel_reference_values() {
        let se = Kernel::new(KernelKind::SquaredExponential, vec![1.0], 1.0).unwrap();
        assert_abs_diff_eq!(se.eval(&[0.3], &[0.3]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(se.eval(&[0.0], &[1.0]).unwrap(), (-1.0f64).exp(), epsilon = 1e-12);

        let m52 = Kernel::new(KernelKind::Matern52, vec![1.0], 1.0).unwrap();
        let expected = (1.0 + 5.0_f64.sqrt() + 5.0 / 3.0) * (-(5.0_f64.sqrt())).exp();
        assert_abs_diff_eq!(m52.eval(&[0.0], &[1.0]).unwrap(), expected, epsilon = 1e-5);
        assert_abs_diff_eq!(expected, 0.523994, epsilon = 1e-5);

        let se2 = Kernel::new(KernelKind::SquaredExponential, vec![2.0, 0.5], 3.0).unwrap();
        assert_abs_diff_eq!(se2.eval(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 3.0, epsilon = 1e-12);
        assert!(se2.eval(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn doe_rejects_duplicates_and_small() {
        let inputs = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(
            DesignOfExperiments::new(inputs, DVector::from_vec(vec![0.0, 0.0])),
            Err(Error::DuplicateDesign)
        ));
        let one = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(DesignOfExperiments::new(one, DVector::from_vec(vec![0.0])).is_err());
    }

    #[test]
    fn interpolation_at_doe_points() {
        let doe = linear_doe_1d(8, -2.0, 2.0, |x| x * x - 1.0);
        let model = GpModel::fit(doe.clone(), KernelKind::Matern52, &RandomStream::new(2)).unwrap();
        let range = 3.0;
        for i in 0..doe.len() {
            let x = doe.inputs()[(i, 0)];
            let p = model.predict(&[x]).unwrap();
            assert!(
                (p.mean - doe.outputs()[i]).abs() <= 1e-6 * range,
                "mean {} vs {}",
                p.mean,
                doe.outputs()[i]
            );
            let var_bound = (model.jitter() * 10.0).max(1e-8 * model.kernel().process_variance);
            assert!(p.std_dev * p.std_dev <= var_bound.max(1e-20), "var {}", p.std_dev * p.std_dev);
        }
    }

    #[test]
    fn far_field_reverts_to_trend() {
        let doe = linear_doe_1d(6, -1.0, 1.0, |x| 2.0 * x + 0.3);
        let model =
            GpModel::fit(doe, KernelKind::SquaredExponential, &RandomStream::new(4)).unwrap();
        let p = model.predict(&[1e4]).unwrap();
        assert_abs_diff_eq!(p.mean, model.trend(), epsilon = 1e-6);
        // far-field variance reaches σ_Z² plus the trend-extrapolation term
        let sigma2 = model.kernel().process_variance;
        assert!(p.std_dev * p.std_dev >= sigma2 * 0.999);
    }

    #[test]
    fn constant_outputs_absorbed_by_trend() {
        let doe = linear_doe_1d(5, 0.0, 1.0, |_| 3.5);
        let model = GpModel::fit(doe, KernelKind::Matern52, &RandomStream::new(7)).unwrap();
        for &x in &[0.0, 0.37, 2.0, -5.0] {
            let p = model.predict(&[x]).unwrap();
            assert_abs_diff_eq!(p.mean, 3.5, epsilon = 1e-8);
            assert!(p.std_dev < 1e-10);
        }
    }

    #[test]
    fn refit_is_deterministic() {
        let doe = linear_doe_1d(7, -1.0, 1.0, |x| (3.0 * x).sin());
        let s = RandomStream::new(11);
        let a = GpModel::fit(doe.clone(), KernelKind::Matern52, &s).unwrap();
        let b = GpModel::fit(doe, KernelKind::Matern52, &s).unwrap();
        assert_eq!(a.kernel().length_scales, b.kernel().length_scales);
        assert_eq!(a.kernel().process_variance, b.kernel().process_variance);
    }

    #[test]
    fn batch_predict_matches_pointwise() {
        let doe = linear_doe_1d(6, -1.0, 1.0, |x| x.exp());
        let model = GpModel::fit(doe, KernelKind::Matern52, &RandomStream::new(13)).unwrap();
        let points = DMatrix::from_row_slice(3, 1, &[-0.5, 0.1, 0.9]);
        let (mu, sd) = model.predict_batch(&points).unwrap();
        for i in 0..3 {
            let p = model.predict(&[points[(i, 0)]]).unwrap();
            assert_abs_diff_eq!(p.mean, mu[i], epsilon = 1e-12);
            assert_abs_diff_eq!(p.std_dev, sd[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn enrich_interpolates_new_point() {
        let doe = linear_doe_1d(5, -1.0, 1.0, |x| x * x);
        let model = GpModel::fit(doe, KernelKind::Matern52, &RandomStream::new(17)).unwrap();
        let enriched = model.enrich(&[0.33], 0.33f64 * 0.33, &RandomStream::new(18)).unwrap();
        let p = enriched.predict(&[0.33]).unwrap();
        assert_abs_diff_eq!(p.mean, 0.1089, epsilon = 1e-5);
        assert!(p.std_dev < 1e-4);
        // duplicate rejected
        assert!(matches!(
            enriched.enrich(&[0.33], 0.1089, &RandomStream::new(19)),
            Err(Error::DuplicateDesign)
        ));
    }

    #[test]
    fn enrichment_never_increases_variance_fixed_hyperparameters() {
        // frozen hyperparameters: rebuild both models through from_document
        let doe = linear_doe_1d(5, -1.0, 1.0, |x| (2.0 * x).cos());
        let model = GpModel::fit(doe, KernelKind::SquaredExponential, &RandomStream::new(23)).unwrap();
        let mut doc = model.to_document();
        let before = GpModel::from_document(&doc).unwrap();
        doc.doe_inputs.push(vec![0.4]);
        doc.doe_outputs.push((0.8f64).cos());
        let after = GpModel::from_document(&doc).unwrap();
        for &x in &[-0.9, -0.3, 0.2, 0.55, 0.95] {
            let sd_before = before.predict(&[x]).unwrap().std_dev;
            let sd_after = after.predict(&[x]).unwrap().std_dev;
            assert!(sd_after <= sd_before + 1e-9, "x={x}: {sd_after} > {sd_before}");
        }
    }

    #[test]
    fn prediction_invariant_under_doe_permutation() {
        let doe = linear_doe_1d(6, -1.0, 1.0, |x| x * x * x);
        let model = GpModel::fit(doe.clone(), KernelKind::Matern52, &RandomStream::new(29)).unwrap();
        let doc = model.to_document();
        let mut rev = doc.clone();
        rev.doe_inputs.reverse();
        rev.doe_outputs.reverse();
        let permuted = GpModel::from_document(&rev).unwrap();
        for &x in &[-0.7, 0.0, 0.42] {
            let a = model.predict(&[x]).unwrap();
            let b = permuted.predict(&[x]).unwrap();
            assert_abs_diff_eq!(a.mean, b.mean, epsilon = 1e-9);
            assert_abs_diff_eq!(a.std_dev, b.std_dev, epsilon = 1e-7);
        }
    }

    #[test]
    fn document_roundtrip() {
        let doe = linear_doe_1d(5, 0.0, 2.0, |x| x.sqrt());
        let model = GpModel::fit(doe, KernelKind::Matern52, &RandomStream::new(31)).unwrap();
        let json = serde_json::to_string(&model.to_document()).unwrap();
        let back = GpModel::from_document(&serde_json::from_str(&json).unwrap()).unwrap();
        let a = model.predict(&[1.234]).unwrap();
        let b = back.predict(&[1.234]).unwrap();
        assert_abs_diff_eq!(a.mean, b.mean, epsilon = 1e-12);
        assert_abs_diff_eq!(a.std_dev, b.std_dev, epsilon = 1e-12);
    }

    #[test]
    fn hyperparameter_recovery_from_known_process() {
        // data generated from a known 1-D GP: l = 0.5, σ_Z² = 2, n = 60
        let true_kernel = Kernel::new(KernelKind::SquaredExponential, vec![0.5], 2.0).unwrap();
        let mut ok = 0;
        let trials = 100;
        for t in 0..trials {
            let stream = RandomStream::with_stream(101, t);
            let mut rng = stream.rng();
            let n = 60;
            let xs: Vec<f64> = (0..n)
                .map(|i| {
                    let u: f64 = rng.random();
                    -5.0 + 10.0 * (i as f64 + u) / n as f64
                })
                .collect();
            let mut cov = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    cov[(i, j)] = true_kernel.eval(&[xs[i]], &[xs[j]]).unwrap();
                }
            }
            // exact smooth draw: eigendecompose and clamp the tiny negative
            // eigenvalues instead of adding a nugget the noise-free model
            // cannot represent
            let eig = cov.symmetric_eigen();
            let xi = DVector::from_iterator(n, (0..n).map(|_| crate::math::standard_normal(&mut rng)));
            let scaled = DVector::from_iterator(
                n,
                eig.eigenvalues.iter().zip(xi.iter()).map(|(&lam, &z)| lam.max(0.0).sqrt() * z),
            );
            let y = &eig.eigenvectors * scaled;
            let doe =
                DesignOfExperiments::new(DMatrix::from_vec(n, 1, xs.clone()), y).unwrap();
            let model =
                GpModel::fit(doe, KernelKind::SquaredExponential, &stream.child(1)).unwrap();
            // fitted length-scale back in original units
            let l_fit = model.kernel().length_scales[0] * model.x_scale[0];
            let s2 = model.kernel().process_variance;
            if (0.25..=1.0).contains(&l_fit) && (1.0..=4.0).contains(&s2) {
                ok += 1;
            }
        }
        assert!(ok >= 80, "recovered {ok}/{trials}");
    }
}

