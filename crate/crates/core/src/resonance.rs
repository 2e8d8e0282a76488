//! Spectral analysis inside one resonance class.
//!
//! In the frame of a strip (`r = eta_1`, `eta_2`) every member of a class is
//! `xi + m theta + nu_j`, so the class block of `H'` is the pencil
//! `r^2 I + r A + B` with `A = diag(2 nu'_j)` and `B` independent of `r`.
//! Bounded eigenvalues of `r A + B` live near the kernel of `A`; a two-step
//! Schur complement reduces them to a scalar or `2 x 2` condition, which is
//! then used to solve `r^2 + z(r) = rho^2` for the crossing radius `q`.

use std::collections::BTreeSet;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::{assemble_matrix, PlaneWaveBasis};
use crate::error::{Error, Result};
use crate::lattice::{add, DualVector, Frame, Lattice2, Vec2};
use crate::linalg::{self, CMat};
use crate::potential::TrigPotential;
use crate::zones::{ClassKind, Zones};

#[derive(Debug, Clone)]
pub struct ResonancePencil {
    /// `r A + B` acts on these universal points (rows of `A`, `B`).
    pub points: Vec<Vec2>,
    pub theta_len: f64,
    /// First frame coordinate of the seed.
    pub r: f64,
    pub a: CMat,
    pub b: CMat,
    /// Members with `nu' = 0` (the kernel of `A`), sorted.
    pub kernel: Vec<usize>,
    pub rest: Vec<usize>,
    /// Frame coordinates of each member relative to the seed's first
    /// coordinate: `(nu', eta_2)`.
    pub coords: Vec<Vec2>,
    /// `R_n^2`; bold operators are `scale * A`, `scale * B`.
    pub scale: f64,
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

impl ResonancePencil {
    /// Pencil from explicit matrices; `A` must be diagonal.
    pub fn from_matrices(a: CMat, b: CMat, scale: f64) -> Result<Self> {
        let n = a.nrows();
        if b.nrows() != n || a.ncols() != n || b.ncols() != n {
            return Err(Error::InvalidInput("pencil matrices have different shapes".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && a[(i, j)].norm() > 0.0 {
                    return Err(Error::InvalidInput("A must be diagonal".into()));
                }
            }
        }
        let tol = 1e-12 * (1.0 + linalg::inf_norm(&a));
        let kernel: Vec<usize> = (0..n).filter(|&i| a[(i, i)].norm() <= tol).collect();
        let rest = (0..n).filter(|i| !kernel.contains(i)).collect();
        let coords = (0..n).map(|i| [a[(i, i)].re / 2.0, b[(i, i)].re]).collect();
        Ok(Self {
            points: (0..n).map(|i| [i as f64, 0.0]).collect(),
            theta_len: 1.0,
            r: 0.0,
            a,
            b,
            kernel,
            rest,
            coords,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `r A + B` (natural units).
    pub fn z(&self, r: f64) -> CMat {
        let mut z = self.b.clone();
        for i in 0..self.dim() {
            z[(i, i)] += self.a[(i, i)] * r;
        }
        z
    }

    /// `r^2 + r A + B`.
    pub fn h(&self, r: f64) -> CMat {
        let mut h = self.z(r);
        for i in 0..self.dim() {
            h[(i, i)] += c(r * r);
        }
        h
    }

    /// Smallest nonzero `|eigenvalue of A|`.
    pub fn min_nonzero_a(&self) -> Option<f64> {
        self.rest.iter().map(|&i| self.a[(i, i)].norm()).min_by(f64::total_cmp)
    }

    /// `B~ = P~ B P~` in natural units.
    pub fn kernel_block(&self) -> CMat {
        linalg::submatrix(&self.b, &self.kernel)
    }

    /// `tau`-ordering of the kernel members: positions into `kernel`,
    /// sorted by `(eta_2^2, universal coordinates)`.
    pub fn tau_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.kernel.len()).collect();
        let key = |p: usize| {
            let i = self.kernel[p];
            (self.coords[i][1].powi(2), self.points[i])
        };
        idx.sort_by(|&x, &y| {
            let (a, pa) = key(x);
            let (b, pb) = key(y);
            a.total_cmp(&b).then(pa[0].total_cmp(&pb[0])).then(pa[1].total_cmp(&pb[1]))
        });
        idx
    }

    /// `h(eta)` for each kernel member (natural units), indexed like `kernel`.
    pub fn h_values(&self) -> Result<Vec<f64>> {
        let vals = linalg::eigvalsh(&self.kernel_block())?;
        let mut out = vec![0.0; self.kernel.len()];
        for (tau, p) in self.tau_order().into_iter().enumerate() {
            out[p] = vals[tau];
        }
        Ok(out)
    }
}

/// The resonance class of `xi` for strip `theta` with half-width `a` and
/// ball radius `ball`: `{xi + j theta, |eta_2 + j|theta|| < a} + Theta`.
pub fn resonance_members(lat: &Lattice2, theta: &DualVector, xi: Vec2, a: f64, ball: f64) -> (Vec2, Vec<[i64; 2]>) {
    let p = lat.split(xi);
    let f = Frame::new(theta.v);
    let e2 = f.to_frame(xi)[1];
    let t = theta.norm();
    let mut set = BTreeSet::new();
    let g = lat.points_in_ball(ball);
    let jlo = ((-a - e2) / t).floor() as i64;
    let jhi = ((a - e2) / t).ceil() as i64;
    for j in jlo..=jhi {
        if (e2 + j as f64 * t).abs() < a {
            let base = [p.integer_part[0] + j * theta.m[0], p.integer_part[1] + j * theta.m[1]];
            for d in &g {
                set.insert([base[0] + d.m[0], base[1] + d.m[1]]);
            }
        }
    }
    (p.fractional_part, set.into_iter().collect())
}

/// Pencil of the class seeded at `xi`; also returns the largest entrywise
/// deviation of `r^2 + r A + B` from the assembled Bloch block.
pub fn pencil_for(
    v_trunc: &TrigPotential,
    theta: &DualVector,
    xi: Vec2,
    k: Vec2,
    members: Vec<[i64; 2]>,
    r_n: f64,
) -> Result<(ResonancePencil, f64)> {
    let lat = &v_trunc.lattice;
    let basis = PlaneWaveBasis::from_modes(lat, k, members);
    let block = assemble_matrix(&basis, v_trunc);
    let f = Frame::new(theta.v);
    let r = f.to_frame(xi)[0];
    let n = basis.len();
    let pts: Vec<Vec2> = (0..n).map(|i| basis.point(i)).collect();
    let coords: Vec<Vec2> = pts
        .iter()
        .map(|&p| {
            let e = f.to_frame(p);
            [e[0] - r, e[1]]
        })
        .collect();
    let scale_tol = 1e-9 * (1.0 + r.abs());
    let mut a = linalg::zeros(n);
    let mut b = block.clone();
    for i in 0..n {
        let nu = if coords[i][0].abs() <= scale_tol { 0.0 } else { coords[i][0] };
        a[(i, i)] = c(2.0 * nu);
        b[(i, i)] = c(nu * nu + coords[i][1].powi(2)) + (block[(i, i)] - c(basis.kinetic(i)));
    }
    let kernel: Vec<usize> = (0..n).filter(|&i| a[(i, i)].norm() == 0.0).collect();
    let rest = (0..n).filter(|&i| a[(i, i)].norm() != 0.0).collect();
    let pencil = ResonancePencil {
        points: pts,
        theta_len: theta.norm(),
        r,
        a,
        b,
        kernel,
        rest,
        coords,
        scale: r_n * r_n,
    };
    let h = pencil.h(r);
    let mut dev = 0.0f64;
    let norm = linalg::inf_norm(&block).max(1.0);
    for i in 0..n {
        for j in 0..n {
            dev = dev.max((h[(i, j)] - block[(i, j)]).norm() / norm);
        }
    }
    Ok((pencil, dev))
}

/// Pencil of the resonance class of `xi` under the zone construction.
pub fn build_pencil(zones: &Zones, v: &TrigPotential, xi: Vec2, rho: f64) -> Result<(ResonancePencil, f64)> {
    let class = zones.upsilon(xi, rho)?;
    let l = match class.kind {
        ClassKind::Resonant(l) => l,
        ClassKind::NonResonant => return Err(Error::NotResonant),
    };
    let vt = v.truncate(zones.params.r_n);
    pencil_for(&vt, &zones.strips[l].theta, xi, class.k, class.members, zones.params.r_n)
}

// ---------------------------------------------------------------------------
// 1D reduction

/// The plane-wave matrix `B^` on `{xi_2 + j|theta|}`, `|j| <= n_modes`.
pub fn reduced_1d_matrix(v: &TrigPotential, theta: Vec2, xi2: f64, r: f64, n_modes: usize) -> Result<CMat> {
    let w = v.reduced_1d_potential(theta, xi2, r)?;
    let t = w.theta_len;
    let n = 2 * n_modes + 1;
    let mut h = linalg::zeros(n);
    for i in 0..n {
        let j = i as i64 - n_modes as i64;
        h[(i, i)] = c((xi2 + j as f64 * t).powi(2));
        for &(d, cd) in &w.coeffs {
            let col = i as i64 - d;
            if col >= 0 && (col as usize) < n {
                h[(i, col as usize)] += cd;
            }
        }
    }
    Ok(h)
}

pub fn reduced_1d_spectrum(v: &TrigPotential, theta: Vec2, xi2: f64, r: f64, n_modes: usize) -> Result<Vec<f64>> {
    linalg::eigvalsh(&reduced_1d_matrix(v, theta, xi2, r, n_modes)?)
}

/// Finite-difference oracle for `-y'' + W` on one period with
/// `y(x + P) = e^{2 pi i k} y(x)`: fourth-order stencil on `n` and `2n`
/// points combined by Richardson extrapolation.
pub fn fd_hill_spectrum(v: &TrigPotential, theta: Vec2, xi2: f64, r: f64, n: usize, count: usize) -> Result<Vec<f64>> {
    let w = v.reduced_1d_potential(theta, xi2, r)?;
    let solve = |n: usize| -> Result<Vec<f64>> {
        let p = w.period();
        let h = p / n as f64;
        let twist = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * w.quasi_momentum());
        let stencil = [(-2i64, -1.0 / 12.0), (-1, 4.0 / 3.0), (1, 4.0 / 3.0), (2, -1.0 / 12.0)];
        let mut m: CMat = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] += c(2.5 / (h * h) + w.evaluate(i as f64 * h));
            for &(d, wt) in &stencil {
                let j = i as i64 + d;
                let (jj, ph) = if j < 0 {
                    ((j + n as i64) as usize, twist.conj())
                } else if j >= n as i64 {
                    ((j - n as i64) as usize, twist)
                } else {
                    (j as usize, c(1.0))
                };
                m[(i, jj)] += -wt / (h * h) * ph;
            }
        }
        let mut vals = linalg::eigvalsh(&m)?;
        vals.truncate(count);
        Ok(vals)
    };
    let coarse = solve(n)?;
    let fine = solve(2 * n)?;
    Ok(coarse.iter().zip(&fine).map(|(a, b)| (16.0 * b - a) / 15.0).collect())
}

/// `min_j (mu_{j+2} - mu_j)` over the lowest `count` eigenvalues.
pub fn triple_gap(vals: &[f64], count: usize) -> f64 {
    vals.windows(3).take(count).map(|w| w[2] - w[0]).fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// Pairing of nearly multiple kernel eigenvalues

/// Kernel family `{xi_2 + m |theta|}` of a class in one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFamily {
    pub eta2: Vec<f64>,
    /// Bold `h = R_n^2 mu_tau(B~)` per member.
    pub h_bold: Vec<f64>,
    pub gap: f64,
}

/// Members `eta_2 = xi_2 + m|theta|` with `|xi_2 + j|theta|| < a` for some
/// core `j` and `|m - j| |theta| <= reach`.
pub fn kernel_family(v_trunc: &TrigPotential, theta: Vec2, xi2: f64, a: f64, reach: f64, r_n: f64) -> Result<KernelFamily> {
    let w = v_trunc.reduced_1d_potential(theta, xi2, r_n)?;
    let t = w.theta_len;
    let core: Vec<i64> = (((-a - xi2) / t).floor() as i64..=((a - xi2) / t).ceil() as i64)
        .filter(|&j| (xi2 + j as f64 * t).abs() < a)
        .collect();
    let s = (reach / t + 1e-12).floor() as i64;
    let ms: Vec<i64> = match (core.first(), core.last()) {
        (Some(&lo), Some(&hi)) => (lo - s..=hi + s).collect(),
        _ => Vec::new(),
    };
    let n = ms.len();
    let mut h = linalg::zeros(n);
    for (i, &mi) in ms.iter().enumerate() {
        h[(i, i)] = c((xi2 + mi as f64 * t).powi(2) + w.coupling(0).re);
        for (j, &mj) in ms.iter().enumerate() {
            if i != j {
                h[(i, j)] += w.coupling(mi - mj);
            }
        }
    }
    let eta2: Vec<f64> = ms.iter().map(|&m| xi2 + m as f64 * t).collect();
    if n == 0 {
        return Ok(KernelFamily {
            eta2,
            h_bold: Vec::new(),
            gap: f64::INFINITY,
        });
    }
    let vals = linalg::eigvalsh(&h)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eta2[x].powi(2).total_cmp(&eta2[y].powi(2)).then(eta2[x].total_cmp(&eta2[y])));
    let mut h_bold = vec![0.0; n];
    for (tau, &i) in order.iter().enumerate() {
        h_bold[i] = r_n * r_n * vals[tau];
    }
    let gap = r_n * r_n * triple_gap(&vals, n);
    Ok(KernelFamily { eta2, h_bold, gap })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub eta2: f64,
    pub h_bold: f64,
    /// `iota(eta_2)`; equal to `eta_2` on `I~_0`.
    pub iota: f64,
    pub paired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPartition {
    pub s: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub entries: Vec<PairEntry>,
    /// `iota(eta_2)` left `[-a, a]` or `iota` is not an involution.
    pub violations: Vec<String>,
}

impl PairPartition {
    pub fn i1(&self) -> impl Iterator<Item = &PairEntry> {
        self.entries.iter().filter(|e| e.paired)
    }
}

/// Measured `C_2` over a set of kernel families: the paper's constant
/// satisfies both `|nonzero eig(R_n^2 A)| >= C_2` and
/// `mu_{j+2} - mu_j >= 3 C_2`; it is also kept below `1/10`.
pub fn measure_c2(families: &[KernelFamily], min_a_bold: Option<f64>) -> f64 {
    let g = families.iter().map(|f| f.gap / 3.0).fold(f64::INFINITY, f64::min);
    g.min(min_a_bold.unwrap_or(f64::INFINITY)).min(0.1)
}

/// Smallest nonzero `|<g, n(theta_perp)>|` over `g` in the ball of radius `reach`.
pub fn min_perp_offset(lat: &Lattice2, theta: Vec2, reach: f64) -> Option<f64> {
    let f = Frame::new(theta);
    lat.points_in_ball(reach)
        .iter()
        .map(|g| f.to_frame(g.v)[0].abs())
        .filter(|&x| x > 1e-9)
        .min_by(f64::total_cmp)
}

/// Partition of the sampled `eta_2` values into `I~_0` and `I~_1(s)`.
#[allow(clippy::too_many_arguments)]
pub fn pair_partition(
    v_trunc: &TrigPotential,
    theta: Vec2,
    a: f64,
    reach: f64,
    r_n: f64,
    grid: &[f64],
    delta0: f64,
) -> Result<PairPartition> {
    let fams: Vec<KernelFamily> = grid
        .iter()
        .map(|&x| kernel_family(v_trunc, theta, x, a, reach, r_n))
        .collect::<Result<_>>()?;
    let min_a = min_perp_offset(&v_trunc.lattice, theta, reach).map(|x| 2.0 * r_n * r_n * x);
    let c2 = measure_c2(&fams, min_a);
    let s = (delta0 / 2.0).min(c2 / 4.0);
    let mut entries = Vec::new();
    let mut violations = Vec::new();
    for (&x, fam) in grid.iter().zip(&fams) {
        let Some(i) = fam.eta2.iter().position(|&e| (e - x).abs() < 1e-12 * (1.0 + x.abs())) else {
            // x outside its own core (|x| >= a): not part of the domain
            continue;
        };
        let partners: Vec<usize> = (0..fam.eta2.len())
            .filter(|&j| j != i && (fam.h_bold[j] - fam.h_bold[i]).abs() <= s)
            .collect();
        if partners.len() > 1 {
            return Err(Error::TripleCluster(x));
        }
        let (iota, paired) = match partners.first() {
            Some(&j) => {
                // iota must be an involution: the partner's only partner is x
                let back: Vec<usize> = (0..fam.eta2.len())
                    .filter(|&q| q != j && (fam.h_bold[q] - fam.h_bold[j]).abs() <= s)
                    .collect();
                if back != vec![i] {
                    violations.push(format!("iota not an involution at eta_2 = {x}"));
                }
                (fam.eta2[j], true)
            }
            None => (x, false),
        };
        if x.abs() <= a && iota.abs() > a {
            violations.push(format!("iota({x}) = {iota} leaves [-a, a]"));
        }
        entries.push(PairEntry {
            eta2: x,
            h_bold: fam.h_bold[i],
            iota,
            paired,
        });
    }
    Ok(PairPartition {
        s,
        c2,
        entries,
        violations,
    })
}

// ---------------------------------------------------------------------------
// Schur reduction

/// Two-step Schur complement of `Z(r) = r A + B` (bold units) onto the
/// spectral subspace `P_0` of `B~` spanned by one or two `tau`-labelled
/// eigenvectors.
#[derive(Debug, Clone)]
pub struct SchurReduction<'a> {
    pub pencil: &'a ResonancePencil,
    pub r: f64,
    /// Positions (in `tau` order) of the selected eigenvalues of `B~`.
    pub taus: Vec<usize>,
    /// Bold eigenvalues `h(tau)` of `B~` for the selected taus.
    pub h: Vec<f64>,
    /// Eigenvalues of `P'AP' + P'BP'/r` (bold).
    lam: Vec<f64>,
    /// `U* B_KN W`: kernel-to-rest coupling in both eigenbases.
    ck: CMat,
    hb_all: Vec<f64>,
}

/// Reduced coefficients at one `(mu, r)`: the condition is
/// `(h1 - mu + alpha1/r)(h2 - mu + alpha2/r) - beta^2/r^2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedCoefficients {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
}

pub fn schur_reduce<'a>(pencil: &'a ResonancePencil, taus: &[usize], r: f64) -> Result<SchurReduction<'a>> {
    if taus.is_empty() || taus.len() > 2 {
        return Err(Error::InvalidInput("P_0 must be one- or two-dimensional".into()));
    }
    let s = pencil.scale;
    let kb: CMat = Mat::from_fn(pencil.kernel.len(), pencil.kernel.len(), |i, j| {
        pencil.b[(pencil.kernel[i], pencil.kernel[j])] * s
    });
    let (vals, u) = linalg::eigh(&kb)?;
    if taus.iter().any(|&t| t >= vals.len()) {
        return Err(Error::InvalidInput("tau outside the kernel".into()));
    }
    let b_kn: CMat = Mat::from_fn(pencil.kernel.len(), pencil.rest.len(), |i, j| {
        pencil.b[(pencil.kernel[i], pencil.rest[j])] * s
    });
    // P'AP' + P'(B - mu)P'/r = W (Lambda - mu/r) W*, so every K_mu is a
    // diagonal resolvent once W is known
    let m0: CMat = Mat::from_fn(pencil.rest.len(), pencil.rest.len(), |i, j| {
        let (p, q) = (pencil.rest[i], pencil.rest[j]);
        let mut x = pencil.b[(p, q)] * (s / r);
        if i == j {
            x += pencil.a[(p, p)] * s;
        }
        x
    });
    let (lam, w) = if pencil.rest.is_empty() { (Vec::new(), Mat::zeros(0, 0)) } else { linalg::eigh(&m0)? };
    let ck = u.adjoint() * (&b_kn * &w);
    Ok(SchurReduction {
        pencil,
        r,
        taus: taus.to_vec(),
        h: taus.iter().map(|&t| vals[t]).collect(),
        lam,
        ck,
        hb_all: vals,
    })
}

impl SchurReduction<'_> {
    /// `K_mu` in the eigenbasis of `B~`.
    fn k_mu(&self, mu: f64) -> Result<CMat> {
        let nk = self.ck.nrows();
        let r = self.r;
        let big = self.lam.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let d: Vec<f64> = self.lam.iter().map(|&l| l - mu / r).collect();
        if d.iter().any(|x| x.abs() < 1e-12 * big) {
            return Err(Error::NotInvertible(format!("P'AP' + P'(B - mu)P'/r at mu = {mu}, r = {r}")));
        }
        Ok(Mat::from_fn(nk, nk, |i, j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, &dl) in d.iter().enumerate() {
                acc += self.ck[(i, l)] * self.ck[(j, l)].conj() / dl;
            }
            acc
        }))
    }

    /// The reduced `1 x 1` or `2 x 2` matrix `P_0 (B - mu) P_0 - G_mu`.
    pub fn matrix(&self, mu: f64) -> Result<CMat> {
        let k = self.k_mu(mu)?;
        let r = self.r;
        let nk = self.hb_all.len();
        let p0 = &self.taus;
        let pc: Vec<usize> = (0..nk).filter(|i| !p0.contains(i)).collect();
        let d = p0.len();
        let mut out: CMat = Mat::from_fn(d, d, |i, j| {
            let mut x = -k[(p0[i], p0[j])] / r;
            if i == j {
                x += c(self.hb_all[p0[i]] - mu);
            }
            x
        });
        if !pc.is_empty() {
            let m: CMat = Mat::from_fn(pc.len(), pc.len(), |i, j| {
                let mut x = -k[(pc[i], pc[j])] / r;
                if i == j {
                    x += c(self.hb_all[pc[i]] - mu);
                }
                x
            });
            let smin = linalg::min_singular_value(&m)?;
            if smin < 1e-12 * linalg::inf_norm(&m).max(1e-300) {
                return Err(Error::NotInvertible(format!("P_0'(B - mu)P_0' - K/r at mu = {mu}")));
            }
            let kc0: CMat = Mat::from_fn(pc.len(), d, |i, j| k[(pc[i], p0[j])] / r);
            let x = linalg::solve(&m, &kc0);
            let corr = kc0.adjoint() * &x;
            for i in 0..d {
                for j in 0..d {
                    out[(i, j)] -= corr[(i, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn coefficients(&self, mu: f64) -> Result<ReducedCoefficients> {
        let m = self.matrix(mu)?;
        let r = self.r;
        let alpha1 = r * (m[(0, 0)].re - (self.h[0] - mu));
        if m.nrows() == 1 {
            return Ok(ReducedCoefficients {
                alpha1,
                alpha2: 0.0,
                beta: 0.0,
            });
        }
        Ok(ReducedCoefficients {
            alpha1,
            alpha2: r * (m[(1, 1)].re - (self.h[1] - mu)),
            beta: r * m[(0, 1)].norm(),
        })
    }

    /// Determinant form of the reduced condition.
    pub fn determinant(&self, mu: f64) -> Result<f64> {
        let co = self.coefficients(mu)?;
        let r = self.r;
        if self.h.len() == 1 {
            return Ok(self.h[0] - mu + co.alpha1 / r);
        }
        Ok((self.h[0] - mu + co.alpha1 / r) * (self.h[1] - mu + co.alpha2 / r) - co.beta.powi(2) / (r * r))
    }

    /// `((d1 - d2)/2)^2 + |beta/r|^2` where `d_i` are the diagonal entries of
    /// the reduced matrix; nonnegative for self-adjoint pencils.
    pub fn discriminant(&self, mu: f64) -> Result<f64> {
        let m = self.matrix(mu)?;
        if m.nrows() == 1 {
            return Ok(0.0);
        }
        Ok(((m[(0, 0)].re - m[(1, 1)].re) / 2.0).powi(2) + m[(0, 1)].norm_sqr())
    }

    fn branches(&self, mu: f64) -> Result<Vec<f64>> {
        linalg::eigvalsh(&self.matrix(mu)?)
    }

    /// Roots `mu` (bold units) of the reduced condition inside `window`,
    /// one per eigen-branch of the reduced matrix sign change.
    pub fn roots(&self, window: (f64, f64)) -> Result<Vec<f64>> {
        let (lo, hi) = window;
        let n = 16;
        let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        let vals: Vec<Vec<f64>> = grid.iter().map(|&m| self.branches(m)).collect::<Result<_>>()?;
        let tol = 1e-15 * (1.0 + lo.abs().max(hi.abs()));
        let mut out = Vec::new();
        for b in 0..self.h.len() {
            for w in 0..n {
                let (f0, f1) = (vals[w][b], vals[w + 1][b]);
                if f0 == 0.0 {
                    out.push(grid[w]);
                } else if f1 == 0.0 && w + 1 == n {
                    out.push(grid[n]);
                } else if f0 * f1 < 0.0 {
                    let g = |m: f64| -> Result<f64> { Ok(self.branches(m)?[b]) };
                    out.push(bracketed_root(g, (grid[w], f0), (grid[w + 1], f1), tol)?);
                }
            }
        }
        out.sort_by(f64::total_cmp);
        Ok(out)
    }

    /// Default window: radius `C2` around `h(eta_2)` for pairs, `s/3` for
    /// single eigenvalues (bold units).
    pub fn window(&self, c2: f64, s: f64) -> (f64, f64) {
        if self.h.len() == 2 {
            let (a, b) = (self.h[0].min(self.h[1]), self.h[0].max(self.h[1]));
            (a - c2, b + c2)
        } else {
            (self.h[0] - s / 3.0, self.h[0] + s / 3.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchurCheck {
    pub r: f64,
    pub window: (f64, f64),
    pub roots: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub max_mismatch: f64,
    pub min_discriminant: f64,
}

/// Roots of the reduced condition vs eigenvalues of `r A + B` in the window
/// (all in bold units).
pub fn schur_check(pencil: &ResonancePencil, taus: &[usize], r: f64, window: (f64, f64)) -> Result<SchurCheck> {
    let red = schur_reduce(pencil, taus, r)?;
    let roots = red.roots(window)?;
    let z = pencil.z(r);
    let eig: Vec<f64> = linalg::eigvalsh(&z)?
        .into_iter()
        .map(|x| x * pencil.scale)
        .filter(|&x| x >= window.0 && x <= window.1)
        .collect();
    let mut max_mismatch = if roots.len() == eig.len() { 0.0f64 } else { f64::INFINITY };
    for (a, b) in roots.iter().zip(&eig) {
        max_mismatch = max_mismatch.max((a - b).abs());
    }
    let mut min_disc = f64::INFINITY;
    for i in 0..=8 {
        let mu = window.0 + (window.1 - window.0) * i as f64 / 8.0;
        min_disc = min_disc.min(red.discriminant(mu)?);
    }
    Ok(SchurCheck {
        r,
        window,
        roots,
        eigenvalues: eig,
        max_mismatch,
        min_discriminant: min_disc,
    })
}

// ---------------------------------------------------------------------------
// Crossing radii

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
    Single,
}

/// Bounded eigenvalue `z(r)` (natural units) of `r A + B` on the requested
/// branch, from the reduced condition.
pub fn branch_value(pencil: &ResonancePencil, taus: &[usize], r: f64, branch: Branch, c2: f64) -> Result<f64> {
    let red = schur_reduce(pencil, taus, r)?;
    let w = if taus.len() == 2 {
        red.window(c2, 0.0)
    } else {
        (red.h[0] - c2, red.h[0] + c2)
    };
    let roots = red.roots(w)?;
    let want = if taus.len() == 2 { 2 } else { 1 };
    if roots.len() != want {
        return Err(Error::NoRoot(format!("{} reduced roots in the window at r = {r}", roots.len())));
    }
    let mu = match branch {
        Branch::Minus | Branch::Single => roots[0],
        Branch::Plus => roots[roots.len() - 1],
    };
    Ok(mu / pencil.scale)
}

/// The radius `q` with `q^2 + z(q) = rho^2` on the requested branch.
pub fn solve_q(pencil: &ResonancePencil, taus: &[usize], rho: f64, branch: Branch, c2: f64, r_min: f64) -> Result<f64> {
    let f = |r: f64| -> Result<f64> { Ok(r * r + branch_value(pencil, taus, r, branch, c2)? - rho * rho) };
    let bnorm = linalg::inf_norm(&pencil.kernel_block()) + 1.0;
    let lo = (rho * rho - bnorm).max(r_min * r_min).sqrt();
    let hi = (rho * rho + bnorm).sqrt();
    if lo >= hi {
        return Err(Error::NoRoot(format!("empty bracket [{lo}, {hi}]")));
    }
    let n = 16;
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let cells: Vec<usize> = (0..n).filter(|&i| fs[i] == 0.0 || fs[i] * fs[i + 1] < 0.0).collect();
    match cells.len() {
        0 => return Err(Error::NoRoot(format!("no sign change on [{lo}, {hi}]"))),
        1 => {}
        _ => return Err(Error::MultiRoot(format!("{} sign changes", cells.len()))),
    }
    let i = cells[0];
    bracketed_root(f, (xs[i], fs[i]), (xs[i + 1], fs[i + 1]), 1e-15 * rho)
}

/// Root of `f` in a sign-changing bracket (Illinois variant of regula falsi).
pub fn bracketed_root<F: Fn(f64) -> Result<f64>>(f: F, lo: (f64, f64), hi: (f64, f64), tol: f64) -> Result<f64> {
    let ((mut a, mut fa), (mut b, mut fb)) = (lo, hi);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::NoRoot(format!("no sign change on [{a}, {b}]")));
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let mut x = (a * fb - b * fa) / (fb - fa);
        if !(x > a.min(b) && x < a.max(b)) {
            x = 0.5 * (a + b);
        }
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == (fb > 0.0) {
            b = x;
            fb = fx;
            if side == -1 {
                fa /= 2.0;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb /= 2.0;
            }
            side = 1;
        }
        if (b - a).abs() <= tol {
            break;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// `T = q(eta_2) + q(iota(eta_2))` for a pair, `2 q` for a single eigenvalue.
pub fn branch_sum_t(pencil: &ResonancePencil, taus: &[usize], rho: f64, c2: f64, r_min: f64) -> Result<f64> {
    if taus.len() == 2 {
        Ok(solve_q(pencil, taus, rho, Branch::Plus, c2, r_min)? + solve_q(pencil, taus, rho, Branch::Minus, c2, r_min)?)
    } else {
        Ok(2.0 * solve_q(pencil, taus, rho, Branch::Single, c2, r_min)?)
    }
}

/// `tau` positions of the kernel members whose second frame coordinate is
/// `eta2` (and of its partner when given).
pub fn taus_for(pencil: &ResonancePencil, eta2: &[f64]) -> Vec<usize> {
    let order = pencil.tau_order();
    let mut out: Vec<usize> = eta2
        .iter()
        .filter_map(|&e| {
            order
                .iter()
                .position(|&p| (pencil.coords[pencil.kernel[p]][1] - e).abs() < 1e-9 * (1.0 + e.abs()))
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Kernel eigenvalue of a class together with its partner (if any) under
/// the threshold `s = min(delta_0/2, C_2/4)`, `C_2` measured on the pencil.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    /// One or two `tau` positions, ascending.
    pub taus: Vec<usize>,
    /// Second frame coordinates of the selected kernel members.
    pub eta2: Vec<f64>,
    pub h_bold: Vec<f64>,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub s: f64,
}

impl Pairing {
    /// Branch carrying the member at `eta2`: the lower `h` goes with `Minus`.
    pub fn branch_of(&self, eta2: f64) -> Branch {
        if self.taus.len() == 1 {
            return Branch::Single;
        }
        let i = if (self.eta2[0] - eta2).abs() <= (self.eta2[1] - eta2).abs() { 0 } else { 1 };
        if i == 0 {
            Branch::Minus
        } else {
            Branch::Plus
        }
    }
}

/// `None` when no kernel member of the pencil sits at `eta2`.
pub fn pairing_at(pencil: &ResonancePencil, eta2: f64, delta0: f64) -> Result<Option<Pairing>> {
    let Some(&tau) = taus_for(pencil, &[eta2]).first() else {
        return Ok(None);
    };
    let hv = pencil.h_values()?;
    let order = pencil.tau_order();
    let hb: Vec<f64> = order.iter().map(|&p| hv[p] * pencil.scale).collect();
    let c2 = measure_c2(
        &[KernelFamily {
            eta2: Vec::new(),
            h_bold: hb.clone(),
            gap: hb.windows(3).map(|w| w[2] - w[0]).fold(f64::INFINITY, f64::min),
        }],
        pencil.min_nonzero_a().map(|x| x * pencil.scale),
    );
    let s = (delta0 / 2.0).min(c2 / 4.0);
    let partner = [tau.wrapping_sub(1), tau + 1]
        .into_iter()
        .find(|&t| t < hb.len() && (hb[t] - hb[tau]).abs() <= s);
    let taus = match partner {
        Some(t) => vec![tau.min(t), tau.max(t)],
        None => vec![tau],
    };
    let eta2 = taus.iter().map(|&t| pencil.coords[pencil.kernel[order[t]]][1]).collect();
    let h_bold = taus.iter().map(|&t| hb[t]).collect();
    Ok(Some(Pairing { taus, eta2, h_bold, c2, s }))
}

/// Seed point at frame coordinates `(r, eta2)` of strip `theta`.
pub fn frame_point(theta: &DualVector, r: f64, eta2: f64) -> Vec2 {
    Frame::new(theta.v).from_frame([r, eta2])
}

/// Shift of `xi` by `j theta`.
pub fn shift(theta: &DualVector, xi: Vec2, j: i64) -> Vec2 {
    add(xi, [j as f64 * theta.v[0], j as f64 * theta.v[1]])
}
