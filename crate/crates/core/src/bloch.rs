//! Plane-wave discretization of the fiber operators
//! `H(k) = (-i grad + k)^2 + V` and their spectra.

use std::collections::HashMap;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{add, norm, norm2, Lattice2, Vec2};
use crate::linalg::{self, CMat};
use crate::potential::TrigPotential;

/// Plane waves `e^{i<m+k,x>}`; modes are integer coordinates in the dual
/// basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveBasis {
    pub lattice: Lattice2,
    pub k: Vec2,
    pub cutoff: f64,
    pub modes: Vec<[i64; 2]>,
}

impl PlaneWaveBasis {
    /// `|m + k|^2` for mode `i`.
    pub fn kinetic(&self, i: usize) -> f64 {
        norm2(self.point(i))
    }

    /// The dual-space point `m + k` for mode `i`.
    pub fn point(&self, i: usize) -> Vec2 {
        add(self.lattice.dual_vector(self.modes[i]), self.k)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn index(&self) -> HashMap<[i64; 2], usize> {
        self.modes.iter().enumerate().map(|(i, m)| (*m, i)).collect()
    }

    /// An arbitrary finite mode set at quasi-momentum `k` (used for blocks).
    pub fn from_modes(lattice: &Lattice2, k: Vec2, modes: Vec<[i64; 2]>) -> Self {
        let cutoff = modes
            .iter()
            .map(|&m| norm2(add(lattice.dual_vector(m), k)))
            .fold(0.0, f64::max);
        Self {
            lattice: lattice.clone(),
            k,
            cutoff,
            modes,
        }
    }
}

/// All modes with `|m + k|^2 <= e_max`, sorted by kinetic energy and then
/// lexicographically.
pub fn build_basis(lattice: &Lattice2, k: Vec2, e_max: f64) -> Result<PlaneWaveBasis> {
    if !(e_max > 0.0) {
        return Err(Error::CutoffTooSmall(format!("E_max = {e_max}")));
    }
    let r = e_max.sqrt() + norm(k);
    let mut modes: Vec<([i64; 2], f64)> = lattice
        .points_in_ball(r)
        .into_iter()
        .map(|g| (g.m, norm2(add(g.v, k))))
        .filter(|&(_, e)| e <= e_max)
        .collect();
    if modes.is_empty() {
        return Err(Error::CutoffTooSmall(format!("no mode with |m+k|^2 <= {e_max}")));
    }
    modes.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(PlaneWaveBasis {
        lattice: lattice.clone(),
        k,
        cutoff: e_max,
        modes: modes.into_iter().map(|(m, _)| m).collect(),
    })
}

#[derive(Debug, Clone)]
pub struct BlochMatrix {
    pub basis: PlaneWaveBasis,
    pub matrix: CMat,
}

/// `entry(m, m') = |m+k|^2 delta + V^(m - m') / sqrt(vol)`.
pub fn assemble(basis: &PlaneWaveBasis, v: &TrigPotential) -> Result<BlochMatrix> {
    if !v.lattice.same_as(&basis.lattice) {
        return Err(Error::LatticeMismatch);
    }
    Ok(BlochMatrix {
        basis: basis.clone(),
        matrix: assemble_matrix(basis, v),
    })
}

pub(crate) fn assemble_matrix(basis: &PlaneWaveBasis, v: &TrigPotential) -> CMat {
    let n = basis.len();
    let mut h: CMat = Mat::zeros(n, n);
    let index = basis.index();
    let s = 1.0 / v.lattice.cell_volume.sqrt();
    let support: Vec<([i64; 2], Complex64)> = v.coeffs().map(|(m, c)| (m, c * s)).collect();
    for i in 0..n {
        h[(i, i)] = Complex64::new(basis.kinetic(i), 0.0);
        let mi = basis.modes[i];
        for &(d, c) in &support {
            // entry (i, j) couples m_i and m_j = m_i - d
            if let Some(&j) = index.get(&[mi[0] - d[0], mi[1] - d[1]]) {
                h[(i, j)] += c;
            }
        }
    }
    h
}

/// Ascending eigenvalues of a fiber matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
}

impl Spectrum {
    /// `#{j : mu_j <= lambda}`.
    pub fn counting(&self, lambda: f64) -> usize {
        counting(&self.values, lambda)
    }
}

pub fn counting(sorted: &[f64], lambda: f64) -> usize {
    sorted.partition_point(|&mu| mu <= lambda)
}

pub fn eigenvalues(mat: &BlochMatrix) -> Result<Spectrum> {
    Ok(Spectrum {
        values: linalg::eigvalsh(&mat.matrix)?,
    })
}

/// Eigenpairs with residuals `||H x - mu x||`.
pub fn eigenpairs(mat: &BlochMatrix) -> Result<(Vec<f64>, CMat, Vec<f64>)> {
    let (vals, u) = linalg::eigh(&mat.matrix)?;
    let n = vals.len();
    let h = &mat.matrix;
    let res = (0..n)
        .map(|c| {
            let mut r2 = 0.0;
            for i in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    s += h[(i, j)] * u[(j, c)];
                }
                r2 += (s - u[(i, c)] * vals[c]).norm_sqr();
            }
            r2.sqrt()
        })
        .collect();
    Ok((vals, u, res))
}

/// Spectrum of the one-dimensional operator on modes `(j + kappa) * step`,
/// `|(j + kappa) step|^2 <= e_max`, with couplings `c_d` between `j` and
/// `j - d`.
pub fn hill_spectrum(step: f64, kappa: f64, couplings: &[(i64, Complex64)], e_max: f64) -> Result<Vec<f64>> {
    let jmax = (e_max.sqrt() / step).ceil() as i64 + 1;
    let modes: Vec<i64> = (-jmax..=jmax)
        .filter(|&j| ((j as f64 + kappa) * step).powi(2) <= e_max)
        .collect();
    let n = modes.len();
    if n == 0 {
        return Err(Error::CutoffTooSmall(format!("1D cutoff {e_max}")));
    }
    let j0 = modes[0];
    let mut h: CMat = Mat::zeros(n, n);
    for (i, &j) in modes.iter().enumerate() {
        h[(i, i)] = Complex64::new(((j as f64 + kappa) * step).powi(2), 0.0);
        for &(d, c) in couplings {
            let t = j - d - j0;
            if t >= 0 && (t as usize) < n && d != 0 {
                h[(i, t as usize)] += c;
            }
        }
    }
    linalg::eigvalsh(&h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn z2() -> Lattice2 {
        Lattice2::square(2.0 * PI).unwrap()
    }

    fn random_potential(seed: u64) -> TrigPotential {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = Vec::new();
        for i in -2i64..=2 {
            for j in -2i64..=2 {
                if [i, j] <= [0, 0] {
                    continue;
                }
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                c.push(([i, j], z));
                c.push(([-i, -j], z.conj()));
            }
        }
        c.push(([0, 0], Complex64::new(0.3, 0.0)));
        TrigPotential::new(z2(), c).unwrap()
    }

    #[test]
    fn basis_examples() {
        let b = build_basis(&z2(), [0.0, 0.0], 1.5).unwrap();
        assert_eq!(b.modes, vec![[0, 0], [-1, 0], [0, -1], [0, 1], [1, 0]]);
        let b = build_basis(&z2(), [0.5, 0.5], 0.6).unwrap();
        assert_eq!(b.modes, vec![[-1, -1], [-1, 0], [0, -1], [0, 0]]);
        for i in 0..4 {
            assert!((b.kinetic(i) - 0.5).abs() < 1e-15);
        }
        assert!(matches!(build_basis(&z2(), [0.5, 0.5], 0.1), Err(Error::CutoffTooSmall(_))));
    }

    #[test]
    fn basis_count_matches_lattice_point_count() {
        // oracle: count integer points in the disk row by row
        let e = 100.0f64;
        let b = build_basis(&z2(), [0.0, 0.0], e).unwrap();
        let r = e.sqrt();
        let mut want = 0usize;
        for i in -(r as i64)..=(r as i64) {
            let h = (e - (i * i) as f64).sqrt().floor() as usize;
            want += 2 * h + 1;
        }
        assert_eq!(b.len(), want);
        assert!((b.len() as f64 - PI * e).abs() < 4.0 * e.sqrt());
    }

    #[test]
    fn free_matrix_is_diagonal() {
        let b = build_basis(&z2(), [0.2, 0.1], 20.0).unwrap();
        let h = assemble(&b, &TrigPotential::zero(z2())).unwrap();
        for i in 0..b.len() {
            for j in 0..b.len() {
                let want = if i == j { b.kinetic(i) } else { 0.0 };
                assert_eq!(h.matrix[(i, j)], Complex64::new(want, 0.0));
            }
        }
        let s = eigenvalues(&h).unwrap();
        let mut d: Vec<f64> = (0..b.len()).map(|i| b.kinetic(i)).collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, y) in s.values.iter().zip(&d) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn cosine_coupling_is_half() {
        let v = TrigPotential::cosines(z2(), 0.0, &[([1, 0], 1.0)]).unwrap();
        let b = build_basis(&z2(), [0.0, 0.0], 5.0).unwrap();
        let h = assemble(&b, &v).unwrap();
        let idx = b.index();
        let (i, j) = (idx[&[0, 0]], idx[&[1, 0]]);
        assert!((h.matrix[(i, j)].re - 0.5).abs() < 1e-15);
        assert!((h.matrix[(j, i)].re - 0.5).abs() < 1e-15);
        assert_eq!(h.matrix[(i, idx[&[0, 1]])], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn lattice_mismatch() {
        let b = build_basis(&z2(), [0.0, 0.0], 5.0).unwrap();
        let v = TrigPotential::zero(Lattice2::square(1.0).unwrap());
        assert!(matches!(assemble(&b, &v), Err(Error::LatticeMismatch)));
    }

    #[test]
    fn matrix_matches_quadrature_oracle() {
        // <e_m, V e_m'> / vol by the trapezoid rule on a 256^2 grid (exact for
        // trigonometric polynomials of low degree)
        let v = random_potential(7);
        let k = [0.3, 0.6];
        let b = build_basis(&z2(), k, 3.0).unwrap();
        let h = assemble(&b, &v).unwrap();
        let n = 256;
        let mut vals = vec![0.0; n * n];
        for a in 0..n {
            for c in 0..n {
                vals[a * n + c] = v.evaluate([2.0 * PI * a as f64 / n as f64, 2.0 * PI * c as f64 / n as f64]);
            }
        }
        for i in 0..b.len() {
            for j in 0..b.len() {
                let d = [b.modes[j][0] - b.modes[i][0], b.modes[j][1] - b.modes[i][1]];
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..n {
                    for c in 0..n {
                        let ph = 2.0 * PI * (d[0] * a as i64 + d[1] * c as i64) as f64 / n as f64;
                        acc += Complex64::from_polar(vals[a * n + c], ph);
                    }
                }
                let mut want = acc / (n * n) as f64;
                if i == j {
                    want += b.kinetic(i);
                }
                assert!((h.matrix[(i, j)] - want).norm() < 1e-11, "{i},{j}");
            }
        }
    }

    /// Sturm-sequence count of eigenvalues below `x` for a real symmetric
    /// tridiagonal matrix.
    fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
        let mut q = d[0] - x;
        let mut c = usize::from(q < 0.0);
        for i in 1..d.len() {
            let q0 = if q == 0.0 { 1e-300 } else { q };
            q = d[i] - x - e[i - 1] * e[i - 1] / q0;
            c += usize::from(q < 0.0);
        }
        c
    }

    #[test]
    fn random_hermitian_matches_bisection() {
        // Householder-free oracle: a Hermitian tridiagonal matrix with complex
        // off-diagonals is unitarily similar to the real one with |e_i|, whose
        // eigenvalues bisection on the Sturm count pins down.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 50;
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let e: Vec<Complex64> = (0..n - 1)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut a: CMat = Mat::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = Complex64::new(d[i], 0.0);
        }
        for i in 0..n - 1 {
            a[(i + 1, i)] = e[i];
            a[(i, i + 1)] = e[i].conj();
        }
        let got = linalg::eigvalsh(&a).unwrap();
        let en: Vec<f64> = e.iter().map(|z| z.norm()).collect();
        for (j, &mu) in got.iter().enumerate() {
            let (mut lo, mut hi) = (-10.0f64, 10.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if sturm_count(&d, &en, mid) > j {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            assert!((mu - 0.5 * (lo + hi)).abs() < 1e-9, "j={j}");
        }
    }

    #[test]
    fn counting_examples() {
        let b = build_basis(&z2(), [0.0, 0.0], 10.0).unwrap();
        let s = eigenvalues(&assemble(&b, &TrigPotential::zero(z2())).unwrap()).unwrap();
        assert_eq!(s.counting(1.5), 5);
        assert_eq!(s.counting(-0.1), 0);
        let v = random_potential(1);
        let s = eigenvalues(&assemble(&b, &v).unwrap()).unwrap();
        for &mu in &s.values {
            assert!(s.counting(mu) >= s.counting(mu - 1e-12));
            assert_eq!(s.counting(mu), s.values.iter().filter(|&&x| x <= mu).count());
            assert!(s.counting(mu + 1e-12) >= s.counting(mu));
        }
    }

    #[test]
    fn residuals_small() {
        let v = random_potential(2);
        let b = build_basis(&z2(), [0.1, 0.4], 30.0).unwrap();
        let h = assemble(&b, &v).unwrap();
        let (_, _, res) = eigenpairs(&h).unwrap();
        let hn = linalg::inf_norm(&h.matrix);
        assert!(res.iter().all(|&r| r <= 1e-10 * hn));
    }

    #[test]
    fn hill_separable_matches_dense() {
        let v = TrigPotential::cosines(z2(), 0.0, &[([1, 0], 1.0), ([0, 1], 0.7)]).unwrap();
        let parts = v.separable_parts().unwrap();
        let k = [0.25, 0.6];
        let e = 400.0;
        let a = hill_spectrum(1.0, k[0], &parts[0], e).unwrap();
        let bb = hill_spectrum(1.0, k[1], &parts[1], e).unwrap();
        let mut sums: Vec<f64> = a.iter().flat_map(|x| bb.iter().map(move |y| x + y)).collect();
        sums.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let dense = eigenvalues(&assemble(&build_basis(&z2(), k, e).unwrap(), &v).unwrap()).unwrap();
        for j in 0..30 {
            assert!((sums[j] - dense.values[j]).abs() < 1e-9, "{j}: {} {}", sums[j], dense.values[j]);
        }
    }
}
