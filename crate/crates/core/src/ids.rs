//! Integrated density of states by Brillouin-zone quadrature, the residual
//! against the leading Weyl term, and least-squares fitting of the
//! high-energy expansion in `rho = sqrt(lambda)` with logarithmic terms.

use std::f64::consts::PI;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bloch::{assemble_matrix, build_basis, counting, hill_spectrum};
use crate::error::{Error, Result};
use crate::lattice::{norm, Lattice2, Vec2};
use crate::linalg;
use crate::potential::TrigPotential;

/// How the fiber counting functions are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdsMethod {
    /// Pick the cheapest exact method available for the potential.
    Auto,
    /// Dense eigensolve of the truncated plane-wave matrix.
    Dense,
    /// Kronecker-sum structure: orthogonal dual basis and a potential
    /// supported on the two dual axes.
    Separable,
    /// Constant potential: lattice-point counting, no eigensolves.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdsOptions {
    pub grid: usize,
    /// Plane-wave cutoff; `None` selects [`default_cutoff`].
    pub e_max: Option<f64>,
    pub method: IdsMethod,
}

impl IdsOptions {
    pub fn grid(grid: usize) -> Self {
        Self {
            grid,
            e_max: None,
            method: IdsMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdsSample {
    pub lambda: f64,
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "N_tilde")]
    pub n_tilde: f64,
    pub grid: usize,
    #[serde(rename = "E_max")]
    pub e_max: f64,
}

impl IdsSample {
    pub fn rho(&self) -> f64 {
        self.lambda.sqrt()
    }
}

/// `4 max(lambda - b, 1) + 10 w`, where `w` bounds the oscillating part of
/// the potential. Measuring from the mean makes the basis, and hence the
/// count, exactly covariant under `V -> V + c`, `lambda -> lambda + c`.
pub fn default_cutoff(v: &TrigPotential, lambda: f64) -> f64 {
    4.0 * (lambda - v.stats().b).max(1.0) + 10.0 * v.oscillation_bound()
}

fn resolve_method(v: &TrigPotential, m: IdsMethod) -> Result<IdsMethod> {
    match m {
        IdsMethod::Auto if v.is_constant() => Ok(IdsMethod::Diagonal),
        IdsMethod::Auto if v.separable_parts().is_some() => Ok(IdsMethod::Separable),
        IdsMethod::Auto => Ok(IdsMethod::Dense),
        IdsMethod::Diagonal if !v.is_constant() => {
            Err(Error::InvalidInput("diagonal method needs a constant potential".into()))
        }
        IdsMethod::Separable if v.separable_parts().is_none() => {
            Err(Error::InvalidInput("potential is not separable on this lattice".into()))
        }
        m => Ok(m),
    }
}

/// Midpoint nodes of the `grid x grid` subdivision of the dual cell.
pub fn midpoint_grid(lat: &Lattice2, grid: usize) -> Vec<(Vec2, [f64; 2])> {
    let [b1, b2] = lat.dual_basis;
    let mut out = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            let t = [(i as f64 + 0.5) / grid as f64, (j as f64 + 0.5) / grid as f64];
            out.push(([t[0] * b1[0] + t[1] * b2[0], t[0] * b1[1] + t[1] * b2[1]], t));
        }
    }
    out
}

/// `#{m : |m + k|^2 <= e}` by solving the quadratic in the second
/// coordinate row by row.
pub fn free_count(lat: &Lattice2, k: Vec2, e: f64) -> usize {
    if e < 0.0 {
        return 0;
    }
    let [b1, b2] = lat.dual_basis;
    let c22 = b2[0] * b2[0] + b2[1] * b2[1];
    let r = e.sqrt() + norm(k);
    let m1max = (r * norm(lat.basis[0]) / (2.0 * PI)).ceil() as i64 + 1;
    let mut total = 0usize;
    for m1 in -m1max..=m1max {
        let p = [m1 as f64 * b1[0] + k[0], m1 as f64 * b1[1] + k[1]];
        // |p + t b2|^2 <= e  <=>  c22 t^2 + 2 <p,b2> t + |p|^2 - e <= 0
        let bq = p[0] * b2[0] + p[1] * b2[1];
        let disc = bq * bq - c22 * (p[0] * p[0] + p[1] * p[1] - e);
        if disc < 0.0 {
            continue;
        }
        let s = disc.sqrt();
        let lo = ((-bq - s) / c22).ceil() as i64;
        let hi = ((-bq + s) / c22).floor() as i64;
        // guard the rounded endpoints against the exact inequality
        let ok = |t: i64| {
            let q = [p[0] + t as f64 * b2[0], p[1] + t as f64 * b2[1]];
            q[0] * q[0] + q[1] * q[1] <= e
        };
        let (mut lo, mut hi) = (lo, hi);
        while ok(lo - 1) {
            lo -= 1;
        }
        while lo <= hi && !ok(lo) {
            lo += 1;
        }
        while ok(hi + 1) {
            hi += 1;
        }
        while hi >= lo && !ok(hi) {
            hi -= 1;
        }
        if hi >= lo {
            total += (hi - lo + 1) as usize;
        }
    }
    total
}

/// Sorted pair sums `a_i + b_j <= x` counted by a two-pointer sweep.
fn kronecker_count(a: &[f64], b: &[f64], x: f64) -> usize {
    let mut j = b.partition_point(|&y| y <= x - a.first().copied().unwrap_or(0.0));
    let mut total = 0;
    for &ai in a {
        while j > 0 && ai + b[j - 1] > x {
            j -= 1;
        }
        if j == 0 {
            break;
        }
        total += j;
    }
    total
}

/// Fiber counts `N(lambda_i, H(k))` summed over the midpoint grid for each
/// requested `lambda`; one eigensolve per fiber serves every threshold.
fn summed_counts(v: &TrigPotential, lambdas: &[f64], grid: usize, e_max: f64, method: IdsMethod) -> Result<Vec<u64>> {
    let lat = &v.lattice;
    let b = v.stats().b;
    let mut sums = vec![0u64; lambdas.len()];
    match method {
        IdsMethod::Diagonal => {
            for (k, _) in midpoint_grid(lat, grid) {
                for (s, &l) in sums.iter_mut().zip(lambdas) {
                    *s += free_count(lat, k, l - b) as u64;
                }
            }
        }
        IdsMethod::Separable => {
            let parts = v.separable_parts().expect("checked separable");
            let steps = [norm(lat.dual_basis[0]), norm(lat.dual_basis[1])];
            let mut axis = [Vec::new(), Vec::new()];
            for d in 0..2 {
                for i in 0..grid {
                    let kappa = (i as f64 + 0.5) / grid as f64;
                    axis[d].push(hill_spectrum(steps[d], kappa, &parts[d], e_max)?);
                }
            }
            for a in &axis[0] {
                for bb in &axis[1] {
                    for (s, &l) in sums.iter_mut().zip(lambdas) {
                        *s += kronecker_count(a, bb, l - b) as u64;
                    }
                }
            }
        }
        IdsMethod::Dense | IdsMethod::Auto => {
            for (k, _) in midpoint_grid(lat, grid) {
                let basis = build_basis(lat, k, e_max)?;
                let vals = linalg::eigvalsh(&assemble_matrix(&basis, v))?;
                for (s, &l) in sums.iter_mut().zip(lambdas) {
                    *s += counting(&vals, l) as u64;
                }
            }
        }
    }
    Ok(sums)
}

/// IDS samples for several energies on a common grid and cutoff.
pub fn ids_curve(v: &TrigPotential, lambdas: &[f64], opts: IdsOptions) -> Result<Vec<IdsSample>> {
    if opts.grid < 4 {
        return Err(Error::InvalidInput(format!("grid {} < 4", opts.grid)));
    }
    if lambdas.is_empty() {
        return Ok(Vec::new());
    }
    let method = resolve_method(v, opts.method)?;
    let lmax = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e_max = opts.e_max.unwrap_or_else(|| default_cutoff(v, lmax));
    let sums = summed_counts(v, lambdas, opts.grid, e_max, method)?;
    let w = v.lattice.dual_cell_volume / (opts.grid * opts.grid) as f64;
    Ok(lambdas
        .iter()
        .zip(sums)
        .map(|(&lambda, s)| {
            let n = w * s as f64;
            IdsSample {
                lambda,
                n,
                n_tilde: n / (4.0 * PI * PI),
                grid: opts.grid,
                e_max,
            }
        })
        .collect())
}

pub fn integrated_dos_with(v: &TrigPotential, lambda: f64, opts: IdsOptions) -> Result<IdsSample> {
    Ok(ids_curve(v, &[lambda], opts)?[0])
}

/// `N = (vol O* / G^2) sum_k N(lambda, H(k))` over the midpoint grid.
pub fn integrated_dos(v: &TrigPotential, lambda: f64, grid: usize) -> Result<IdsSample> {
    integrated_dos_with(v, lambda, IdsOptions::grid(grid))
}

/// `N~(lambda) - (lambda - b)/(4 pi)`.
pub fn residual_of(v: &TrigPotential, s: &IdsSample) -> f64 {
    s.n_tilde - (s.lambda - v.stats().b) / (4.0 * PI)
}

pub fn residual(v: &TrigPotential, lambda: f64, grid: usize) -> Result<f64> {
    Ok(residual_of(v, &integrated_dos(v, lambda, grid)?))
}

/// Least-squares fit of
/// `N(rho) - pi rho^2 = sum_{j<=K} e_j rho^-j + ln rho sum_{2<=j<=K} e^_j rho^-j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub rho_interval: [f64; 2],
    pub k: usize,
    pub e: Vec<f64>,
    pub e_hat: Vec<f64>,
    /// Classical least-squares standard errors, same layout as `e`, `e_hat`.
    pub e_se: Vec<f64>,
    pub e_hat_se: Vec<f64>,
    pub residual_sup: f64,
    /// Condition number of the Gram matrix of the column-equilibrated design.
    pub gram_condition: f64,
}

pub const MAX_GRAM_CONDITION: f64 = 1e12;

fn design_row(rho: f64, k: usize) -> Vec<f64> {
    let mut row: Vec<f64> = (0..=k).map(|j| rho.powi(-(j as i32))).collect();
    row.extend((2..=k).map(|j| rho.powi(-(j as i32)) * rho.ln()));
    row
}

/// Column-equilibrated least squares via the SVD. Returns coefficients,
/// their standard errors, the fitted-model residuals and the Gram condition.
fn lstsq(rows: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    let n = rows.len();
    let p = rows[0].len();
    let scales: Vec<f64> = (0..p)
        .map(|c| rows.iter().map(|r| r[c] * r[c]).sum::<f64>().sqrt().max(1e-300))
        .collect();
    let x = Mat::<f64>::from_fn(n, p, |i, j| rows[i][j] / scales[j]);
    let svd = x.thin_svd().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = svd.S().column_vector();
    let smax = (0..p).map(|i| s[i]).fold(0.0, f64::max);
    let smin = (0..p).map(|i| s[i]).fold(f64::INFINITY, f64::min);
    let gram = (smax / smin).powi(2);
    if !(gram <= MAX_GRAM_CONDITION) {
        return Err(Error::IllConditioned(gram));
    }
    let u = svd.U();
    let vv = svd.V();
    let mut coef = vec![0.0; p];
    for a in 0..p {
        let uty: f64 = (0..n).map(|i| u[(i, a)] * y[i]).sum();
        for c in 0..p {
            coef[c] += vv[(c, a)] * uty / s[a];
        }
    }
    // coef is in scaled units: true coefficient = coef / scale
    let coef_true: Vec<f64> = coef.iter().zip(&scales).map(|(c, s)| c / s).collect();
    let resid: Vec<f64> = rows
        .iter()
        .zip(y)
        .map(|(r, yi)| yi - r.iter().zip(&coef_true).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let dof = n.saturating_sub(p).max(1) as f64;
    let sigma2 = resid.iter().map(|r| r * r).sum::<f64>() / dof;
    // Var(coef_scaled) = sigma^2 V S^-2 V^T
    let se: Vec<f64> = (0..p)
        .map(|c| {
            let v: f64 = (0..p).map(|a| (vv[(c, a)] / s[a]).powi(2)).sum();
            (sigma2 * v).sqrt() / scales[c]
        })
        .collect();
    Ok((coef_true, se, resid, gram))
}

pub fn fit_expansion(samples: &[IdsSample], k: usize) -> Result<ExpansionFit> {
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.rho(), s.n)).collect();
    fit_expansion_points(&pts, k)
}

/// As [`fit_expansion`] on raw `(rho, N)` pairs.
pub fn fit_expansion_points(pts: &[(f64, f64)], k: usize) -> Result<ExpansionFit> {
    let p = k + 1 + k.saturating_sub(1);
    if pts.len() < 2 * (k + 1) {
        return Err(Error::InvalidInput(format!("need at least {} samples, got {}", 2 * (k + 1), pts.len())));
    }
    let mut rhos: Vec<f64> = pts.iter().map(|p| p.0).collect();
    rhos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    rhos.dedup();
    if rhos.len() < p || rhos.len() < pts.len() {
        return Err(Error::InvalidInput("sample energies must be distinct".into()));
    }
    let (lo, hi) = (rhos[0], rhos[rhos.len() - 1]);
    if !(lo > 0.0) || hi > 4.0 * lo * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("samples span [{lo}, {hi}], not one dyadic interval")));
    }
    let rows: Vec<Vec<f64>> = pts.iter().map(|&(r, _)| design_row(r, k)).collect();
    let y: Vec<f64> = pts.iter().map(|&(r, n)| n - PI * r * r).collect();
    let (coef, se, resid, gram) = lstsq(&rows, &y)?;
    Ok(ExpansionFit {
        rho_interval: [lo, hi],
        k,
        e: coef[..=k].to_vec(),
        e_hat: coef[k + 1..].to_vec(),
        e_se: se[..=k].to_vec(),
        e_hat_se: se[k + 1..].to_vec(),
        residual_sup: resid.iter().fold(0.0f64, |m, r| m.max(r.abs())),
        gram_condition: gram,
    })
}

/// Bootstrap standard errors of `(e, e_hat)` from resampling the points
/// with replacement; degenerate resamples are redrawn.
pub fn bootstrap_se(pts: &[(f64, f64)], k: usize, resamples: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let base = fit_expansion_points(pts, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws: Vec<Vec<f64>> = Vec::with_capacity(resamples);
    let mut attempts = 0;
    while draws.len() < resamples && attempts < 50 * resamples {
        attempts += 1;
        let mut s: Vec<(f64, f64)> = (0..pts.len()).map(|_| pts[rng.gen_range(0..pts.len())]).collect();
        // repeated points are legitimate in a bootstrap sample; only the
        // number of distinct abscissae matters for solvability
        s.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let rows: Vec<Vec<f64>> = s.iter().map(|&(r, _)| design_row(r, k)).collect();
        let y: Vec<f64> = s.iter().map(|&(r, n)| n - PI * r * r).collect();
        let mut uniq = s.iter().map(|p| p.0).collect::<Vec<_>>();
        uniq.dedup();
        if uniq.len() < rows[0].len() + 1 {
            continue;
        }
        if let Ok((c, _, _, _)) = lstsq(&rows, &y) {
            draws.push(c);
        }
    }
    if draws.len() < 10 {
        return Err(Error::IllConditioned(f64::INFINITY));
    }
    let p = base.e.len() + base.e_hat.len();
    let sd: Vec<f64> = (0..p)
        .map(|c| {
            let m = draws.iter().map(|d| d[c]).sum::<f64>() / draws.len() as f64;
            (draws.iter().map(|d| (d[c] - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt()
        })
        .collect();
    Ok((sd[..=k].to_vec(), sd[k + 1..].to_vec()))
}
