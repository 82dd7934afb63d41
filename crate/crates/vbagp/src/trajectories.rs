//! Conditioned trajectories of the surrogate's posterior process.
//!
//! Two routes to the same distribution: an exact joint draw through a dense
//! Cholesky of the posterior covariance (small point sets only), and a
//! Karhunen-Loève route that draws unconditional prior realizations from a
//! Nyström eigenbasis and conditions them by kriging, which scales to the
//! large populations used for failure-probability estimation.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::{GpModel, Kernel};
use crate::math::standard_normal;
use crate::stream::RandomStream;

/// Largest point set accepted by the dense (Cholesky) sampler.
pub const DIRECT_MAX_POINTS: usize = 4000;

const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// `n_t` joint realizations over a fixed point set, one row per trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    values: DMatrix<f64>,
}

impl TrajectoryEnsemble {
    /// Wraps precomputed realizations (rows = trajectories).
    pub fn from_values(values: DMatrix<f64>) -> Self {
        Self { values }
    }

    pub fn n_trajectories(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// One trajectory's values over all points.
    pub fn trajectory(&self, t: usize) -> Vec<f64> {
        self.values.row(t).iter().copied().collect()
    }
}

/// Settings for the Nyström eigenbasis.
#[derive(Debug, Clone, Copy)]
pub struct KlConfig {
    /// Number of LHS nodes carrying the eigenproblem.
    pub n_nodes: usize,
    /// Fraction of the nodal covariance trace the kept modes must capture.
    pub captured_fraction: f64,
    /// Relative margin added around the point bounding box.
    pub box_margin: f64,
}

impl Default for KlConfig {
    fn default() -> Self {
        // conditioning needs the fine-scale modes: the posterior variance is a
        // small residual of the prior, so keep everything numerically positive
        Self { n_nodes: 500, captured_fraction: 1.0, box_margin: 0.10 }
    }
}

/// Truncated prior eigenbasis anchored at LHS nodes, plus everything needed
/// to condition realizations on the design.
#[derive(Debug, Clone)]
pub struct KlBasis {
    kernel: Kernel,
    doe_len: usize,
    /// Nodes in standardized model coordinates, one row per node.
    std_nodes: DMatrix<f64>,
    /// K_{·,Q}·U_r·diag(δ_k^{-1/2}) right factor: U_r·diag(δ_k^{-1/2}).
    u_scaled: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    captured_fraction: f64,
}

impl KlBasis {
    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn captured_fraction(&self) -> f64 {
        self.captured_fraction
    }

    fn check_model(&self, model: &GpModel) -> Result<()> {
        if *model.kernel() != self.kernel || model.doe().len() != self.doe_len {
            return Err(Error::KernelMismatch(
                "basis was built for a different model".into(),
            ));
        }
        Ok(())
    }

    /// Prior covariance between arbitrary standardized points and the nodes,
    /// projected on the kept modes: rows of K_{X,Q}·U_r·diag(δ^{-1/2}).
    fn project_std(&self, std_points: &[Vec<f64>]) -> DMatrix<f64> {
        let q = self.std_nodes.nrows();
        let sigma2 = self.kernel.process_variance;
        let mut k = DMatrix::zeros(std_points.len(), q);
        let node_rows: Vec<Vec<f64>> =
            (0..q).map(|i| self.std_nodes.row(i).iter().copied().collect()).collect();
        for (r, p) in std_points.iter().enumerate() {
            for c in 0..q {
                k[(r, c)] = sigma2 * self.kernel.corr(p, &node_rows[c]);
            }
        }
        &k * &self.u_scaled
    }
}

/// Builds the truncated eigenbasis over the bounding box of `points`
/// (rows, original coordinates) with the configured margin.
pub fn build_kl(
    model: &GpModel,
    points: &DMatrix<f64>,
    config: &KlConfig,
    stream: &RandomStream,
) -> Result<KlBasis> {
    let m = model.dims();
    if points.ncols() != m {
        return Err(Error::Shape { expected: m, got: points.ncols() });
    }
    if points.nrows() == 0 || config.n_nodes < 2 {
        return Err(Error::InsufficientData { need: 2, got: config.n_nodes.min(points.nrows()) });
    }
    if !(0.0 < config.captured_fraction && config.captured_fraction <= 1.0) {
        return Err(Error::Domain("captured_fraction must lie in (0, 1]".into()));
    }

    // bounding box with margin, in original coordinates
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for i in 0..points.nrows() {
        for j in 0..m {
            lo[j] = lo[j].min(points[(i, j)]);
            hi[j] = hi[j].max(points[(i, j)]);
        }
    }
    for j in 0..m {
        let width = (hi[j] - lo[j]).max(1e-12);
        let pad = 0.5 * config.box_margin * width;
        lo[j] -= pad;
        hi[j] += pad;
    }

    // LHS nodes over the box
    let q = config.n_nodes;
    let mut rng = stream.child(0x6b6c).rng();
    let mut nodes = DMatrix::zeros(q, m);
    let mut perm: Vec<usize> = (0..q).collect();
    for j in 0..m {
        perm.shuffle(&mut rng);
        for i in 0..q {
            let u: f64 = rng.random();
            let frac = (perm[i] as f64 + u) / q as f64;
            nodes[(i, j)] = lo[j] + frac * (hi[j] - lo[j]);
        }
    }
    let mut std_nodes = DMatrix::zeros(q, m);
    for i in 0..q {
        let p = model.standardized_point(nodes.row(i).transpose().as_slice());
        for j in 0..m {
            std_nodes[(i, j)] = p[j];
        }
    }

    // nodal prior covariance and its spectrum
    let kernel = model.kernel().clone();
    let sigma2 = kernel.process_variance;
    let mut k_qq = DMatrix::zeros(q, q);
    let rows: Vec<Vec<f64>> = (0..q).map(|i| std_nodes.row(i).iter().copied().collect()).collect();
    for i in 0..q {
        k_qq[(i, i)] = sigma2;
        for j in (i + 1)..q {
            let v = sigma2 * kernel.corr(&rows[i], &rows[j]);
            k_qq[(i, j)] = v;
            k_qq[(j, i)] = v;
        }
    }
    let eig = k_qq.symmetric_eigen();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().filter(|&&v| v > 0.0).sum();
    if !(total > 0.0) {
        return Err(Error::IllConditioned);
    }
    let floor = 1e-12 * eig.eigenvalues[order[0]].max(0.0);
    let mut kept = Vec::new();
    let mut acc = 0.0;
    for &idx in &order {
        let lam = eig.eigenvalues[idx];
        if lam <= floor {
            break;
        }
        kept.push(idx);
        acc += lam;
        if acc >= config.captured_fraction * total {
            break;
        }
    }
    let r = kept.len();
    let mut u_scaled = DMatrix::zeros(q, r);
    let mut eigenvalues = Vec::with_capacity(r);
    for (c, &idx) in kept.iter().enumerate() {
        let lam = eig.eigenvalues[idx];
        eigenvalues.push(lam);
        let s = lam.sqrt().recip();
        for i in 0..q {
            u_scaled[(i, c)] = eig.eigenvectors[(i, idx)] * s;
        }
    }

    Ok(KlBasis {
        kernel,
        doe_len: model.doe().len(),
        std_nodes,
        u_scaled,
        eigenvalues,
        captured_fraction: acc / total,
    })
}

/// Precomputed state for repeatedly drawing conditioned trajectories over one
/// fixed point set.
#[derive(Debug, Clone)]
pub struct KlSampler {
    mu: DVector<f64>,
    e_x: DMatrix<f64>,    // N×r: prior basis at the points
    k_xdoe: DMatrix<f64>, // N×n: correlation to the design
    e_doe: DMatrix<f64>,  // n×r: prior basis at the design
    rinv_one: DVector<f64>,
    s_one: f64,
    chol_l: DMatrix<f64>,
    order: usize,
}

impl KlSampler {
    /// `points` rows are in original coordinates.
    pub fn new(model: &GpModel, basis: &KlBasis, points: &DMatrix<f64>) -> Result<Self> {
        basis.check_model(model)?;
        if points.ncols() != model.dims() {
            return Err(Error::Shape { expected: model.dims(), got: points.ncols() });
        }
        let (mu, _) = model.predict_batch(points)?;
        let std_points: Vec<Vec<f64>> = (0..points.nrows())
            .map(|i| model.standardized_point(points.row(i).transpose().as_slice()))
            .collect();
        let e_x = basis.project_std(&std_points);
        let k_xdoe = model.corr_with_doe_std(&std_points).transpose();
        let std_doe: Vec<Vec<f64>> = (0..model.doe().len())
            .map(|i| model.standardized_inputs().row(i).iter().copied().collect())
            .collect();
        let e_doe = basis.project_std(&std_doe);
        Ok(Self {
            mu,
            e_x,
            k_xdoe,
            e_doe,
            rinv_one: model.rinv_one().clone(),
            s_one: model.s_one(),
            chol_l: model.chol_l().clone(),
            order: basis.order(),
        })
    }

    pub fn posterior_mean(&self) -> &DVector<f64> {
        &self.mu
    }

    /// Draws `n_t` conditioned trajectories (rows) over the point set.
    pub fn simulate(&self, n_t: usize, stream: &RandomStream) -> Result<TrajectoryEnsemble> {
        if n_t == 0 {
            return Err(Error::InsufficientData { need: 1, got: 0 });
        }
        let r = self.order;
        let n = self.e_doe.nrows();
        let mut rng = stream.rng();
        // standard-normal coordinates, one column per trajectory
        let mut xi = DMatrix::zeros(r, n_t);
        for t in 0..n_t {
            for k in 0..r {
                xi[(k, t)] = standard_normal(&mut rng);
            }
        }
        // unconditional realizations at the design and their kriging read-back
        let g_doe = &self.e_doe * &xi; // n×n_t
        let beta_t = (self.rinv_one.transpose() * &g_doe) / self.s_one; // 1×n_t
        let mut centered = g_doe;
        for t in 0..n_t {
            let b = beta_t[(0, t)];
            for i in 0..n {
                centered[(i, t)] -= b;
            }
        }
        let w = self
            .chol_l
            .solve_lower_triangular(&centered)
            .ok_or(Error::IllConditioned)?;
        let adj = self
            .chol_l
            .transpose()
            .solve_upper_triangular(&w)
            .ok_or(Error::IllConditioned)?; // n×n_t
        // conditioned value: μ_n + G̃(x) − (β̃ + k_xᵀR⁻¹(g−1β̃))
        let mut vals = &self.e_x * &xi - &self.k_xdoe * &adj; // N×n_t
        let npts = vals.nrows();
        for t in 0..n_t {
            let b = beta_t[(0, t)];
            for i in 0..npts {
                vals[(i, t)] += self.mu[i] - b;
            }
        }
        Ok(TrajectoryEnsemble { values: vals.transpose() })
    }
}

/// KL-route sampling in one call.
pub fn simulate_kl(
    model: &GpModel,
    basis: &KlBasis,
    points: &DMatrix<f64>,
    n_t: usize,
    stream: &RandomStream,
) -> Result<TrajectoryEnsemble> {
    KlSampler::new(model, basis, points)?.simulate(n_t, stream)
}

/// Exact joint draws through a dense Cholesky of the posterior covariance.
/// Reference implementation; rejects more than [`DIRECT_MAX_POINTS`] points.
pub fn simulate_direct(
    model: &GpModel,
    points: &DMatrix<f64>,
    n_t: usize,
    stream: &RandomStream,
) -> Result<TrajectoryEnsemble> {
    let npts = points.nrows();
    if npts > DIRECT_MAX_POINTS {
        return Err(Error::SizeLimit { got: npts, max: DIRECT_MAX_POINTS });
    }
    if n_t == 0 || npts == 0 {
        return Err(Error::InsufficientData { need: 1, got: 0 });
    }
    if points.ncols() != model.dims() {
        return Err(Error::Shape { expected: model.dims(), got: points.ncols() });
    }
    let (mu, _) = model.predict_batch(points)?;
    let std_points: Vec<Vec<f64>> = (0..npts)
        .map(|i| model.standardized_point(points.row(i).transpose().as_slice()))
        .collect();
    let kernel = model.kernel();
    let sigma2 = kernel.process_variance;

    // prior correlation among the points
    let mut r_xx = DMatrix::zeros(npts, npts);
    for i in 0..npts {
        r_xx[(i, i)] = 1.0;
        for j in (i + 1)..npts {
            let v = kernel.corr(&std_points[i], &std_points[j]);
            r_xx[(i, j)] = v;
            r_xx[(j, i)] = v;
        }
    }
    // posterior covariance: σ²(R_XX − VᵀV + uuᵀ/s_one), V = L⁻¹K_{doe,X}
    let k_doe_x = model.corr_with_doe_std(&std_points); // n×N
    let v = model
        .chol_l()
        .solve_lower_triangular(&k_doe_x)
        .ok_or(Error::IllConditioned)?;
    let ones = DVector::from_element(model.doe().len(), 1.0);
    let w_one = model
        .chol_l()
        .solve_lower_triangular(&ones)
        .ok_or(Error::IllConditioned)?;
    let u = DVector::from_iterator(npts, (0..npts).map(|j| 1.0 - w_one.dot(&v.column(j))));
    let mut cov = r_xx - v.transpose() * &v + (&u * u.transpose()) / model.s_one();
    cov *= sigma2;

    let mut chol = None;
    for &delta in &JITTER_LADDER {
        let mut c = cov.clone();
        for i in 0..npts {
            c[(i, i)] += delta * sigma2;
        }
        if let Some(f) = c.cholesky() {
            chol = Some(f.l());
            break;
        }
    }
    let l = chol.ok_or(Error::IllConditioned)?;

    let mut rng = stream.rng();
    let mut xi = DMatrix::zeros(npts, n_t);
    for t in 0..n_t {
        for i in 0..npts {
            xi[(i, t)] = standard_normal(&mut rng);
        }
    }
    let mut vals = l * xi; // N×n_t
    for t in 0..n_t {
        for i in 0..npts {
            vals[(i, t)] += mu[i];
        }
    }
    Ok(TrajectoryEnsemble { values: vals.transpose() })
}
