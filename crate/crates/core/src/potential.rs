//! Real trigonometric-polynomial potentials
//! `V(x) = vol^{-1/2} sum_m V^(m) e^{i<m,x>}` on a lattice.
//!
//! Coefficients are keyed by integer coordinates in the dual basis, so
//! frequencies are never used as map keys.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{dot, norm, Lattice2, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct TrigPotential {
    pub lattice: Lattice2,
    coeffs: BTreeMap<[i64; 2], Complex64>,
}

/// `b` is the mean of `V`; `v = sum |V^(m)| / sqrt(vol)` bounds `sup |V|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialStats {
    pub b: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffEntry {
    pub m: [i64; 2],
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// On-disk JSON form: lattice basis rows plus the coefficient list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialFile {
    pub lattice: [[f64; 2]; 2],
    pub coeffs: Vec<CoeffEntry>,
}

const HERMITIAN_TOL: f64 = 1e-12;

impl TrigPotential {
    /// Builds a potential, rejecting coefficient sets that would make `V`
    /// complex-valued. Exact zeros are dropped.
    pub fn new(
        lattice: Lattice2,
        coeffs: impl IntoIterator<Item = ([i64; 2], Complex64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (m, c) in coeffs {
            if c.re.is_nan() || c.im.is_nan() {
                return Err(Error::InvalidInput(format!("NaN coefficient at {m:?}")));
            }
            *map.entry(m).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        map.retain(|_, c: &mut Complex64| c.norm() > 0.0);
        let scale: f64 = map.values().map(|c| c.norm()).fold(0.0, f64::max);
        let mut bad = Vec::new();
        for (&m, &c) in &map {
            let mm = [-m[0], -m[1]];
            let partner = map.get(&mm).copied().unwrap_or_default();
            if (partner - c.conj()).norm() > HERMITIAN_TOL * scale.max(1e-300) && m >= mm {
                bad.push((m, mm));
            }
        }
        if !bad.is_empty() {
            return Err(Error::NotHermitian(bad));
        }
        Ok(Self { lattice, coeffs: map })
    }

    pub fn zero(lattice: Lattice2) -> Self {
        Self {
            lattice,
            coeffs: BTreeMap::new(),
        }
    }

    /// `V(x) = c + sum_i amp_i cos(<m_i, x>)`.
    pub fn cosines(lattice: Lattice2, constant: f64, terms: &[([i64; 2], f64)]) -> Result<Self> {
        let s = lattice.cell_volume.sqrt();
        let mut c = vec![([0, 0], Complex64::new(constant * s, 0.0))];
        for &(m, amp) in terms {
            if m == [0, 0] {
                c.push((m, Complex64::new(amp * s, 0.0)));
                continue;
            }
            c.push((m, Complex64::new(0.5 * amp * s, 0.0)));
            c.push(([-m[0], -m[1]], Complex64::new(0.5 * amp * s, 0.0)));
        }
        Self::new(lattice, c)
    }

    pub fn coeff(&self, m: [i64; 2]) -> Complex64 {
        self.coeffs.get(&m).copied().unwrap_or_default()
    }

    /// Coefficient divided by `sqrt(vol)`: the matrix element between plane
    /// waves whose labels differ by `m`.
    pub fn coupling(&self, m: [i64; 2]) -> Complex64 {
        self.coeff(m) / self.lattice.cell_volume.sqrt()
    }

    pub fn coeffs(&self) -> impl Iterator<Item = ([i64; 2], Complex64)> + '_ {
        self.coeffs.iter().map(|(m, c)| (*m, *c))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `max |m|` over the support (0 for constant or zero potentials).
    pub fn radius(&self) -> f64 {
        self.coeffs
            .keys()
            .map(|&m| norm(self.lattice.dual_vector(m)))
            .fold(0.0, f64::max)
    }

    /// True when only `V^(0)` may be nonzero.
    pub fn is_constant(&self) -> bool {
        self.coeffs.keys().all(|m| *m == [0, 0])
    }

    /// True when every coefficient is real, so that (with Hermitian symmetry)
    /// all plane-wave matrices are real symmetric.
    pub fn is_real_even(&self) -> bool {
        let scale: f64 = self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max);
        self.coeffs.values().all(|c| c.im.abs() <= 1e-15 * scale)
    }

    pub fn evaluate_complex(&self, x: Vec2) -> Complex64 {
        let s = 1.0 / self.lattice.cell_volume.sqrt();
        let mut acc = Complex64::new(0.0, 0.0);
        for (&m, &c) in &self.coeffs {
            let ph = dot(self.lattice.dual_vector(m), x);
            acc += c * Complex64::from_polar(1.0, ph);
        }
        acc * s
    }

    pub fn evaluate(&self, x: Vec2) -> f64 {
        self.evaluate_complex(x).re
    }

    /// Drops every coefficient with `|m| > r`.
    pub fn truncate(&self, r: f64) -> TrigPotential {
        let r2 = r * r * (1.0 + 1e-12);
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(m, _)| {
                let g = self.lattice.dual_vector(**m);
                dot(g, g) <= r2
            })
            .map(|(m, c)| (*m, *c))
            .collect();
        TrigPotential {
            lattice: self.lattice.clone(),
            coeffs,
        }
    }

    pub fn stats(&self) -> PotentialStats {
        let s = self.lattice.cell_volume.sqrt();
        PotentialStats {
            b: self.coeff([0, 0]).re / s,
            v: self.coeffs.values().map(|c| c.norm()).sum::<f64>() / s,
        }
    }

    /// `sum |V^(m)| / sqrt(vol)` without the mean; bounds `sup |V - b|`.
    pub fn oscillation_bound(&self) -> f64 {
        let s = self.lattice.cell_volume.sqrt();
        self.coeffs
            .iter()
            .filter(|(m, _)| **m != [0, 0])
            .map(|(_, c)| c.norm())
            .sum::<f64>()
            / s
    }

    /// `V + c`.
    pub fn shifted(&self, c: f64) -> TrigPotential {
        let mut out = self.clone();
        *out.coeffs.entry([0, 0]).or_default() += Complex64::new(c * self.lattice.cell_volume.sqrt(), 0.0);
        out.coeffs.retain(|_, c| c.norm() > 0.0);
        out
    }

    /// `s V`.
    pub fn scaled(&self, s: f64) -> TrigPotential {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c *= s;
        }
        out.coeffs.retain(|_, c| c.norm() > 0.0);
        out
    }

    /// Potential with the mean removed.
    pub fn mean_free(&self) -> TrigPotential {
        let mut out = self.clone();
        out.coeffs.remove(&[0, 0]);
        out
    }

    /// If the dual basis is orthogonal and the support lies on the two
    /// coordinate axes, `V - b = V1(t1) + V2(t2)` and every fiber operator is
    /// a Kronecker sum of two Hill operators. Returns the axis couplings
    /// `{(j, V^(j e_i)/sqrt(vol))}` for both axes.
    pub fn separable_parts(&self) -> Option<[Vec<(i64, Complex64)>; 2]> {
        let [b1, b2] = self.lattice.dual_basis;
        if dot(b1, b2).abs() > 1e-12 * norm(b1) * norm(b2) {
            return None;
        }
        let mut parts: [Vec<(i64, Complex64)>; 2] = [Vec::new(), Vec::new()];
        for (&m, _) in &self.coeffs {
            match m {
                [0, 0] => {}
                [j, 0] => parts[0].push((j, self.coupling(m))),
                [0, j] => parts[1].push((j, self.coupling(m))),
                _ => return None,
            }
        }
        Some(parts)
    }

    /// The one-dimensional potential governing the plane waves `xi + j theta`.
    ///
    /// Restricted to that family the operator acts as `-y'' + W` on
    /// `[0, 2 pi/|theta|]` with quasi-periodic data
    /// `y(x + 2 pi/|theta|) = e^{2 pi i k} y(x)`, `k = frac(xi2/|theta|)`, where
    /// `W(x) = sum_{|m theta| <= r} vol^{-1/2} V^(m theta) e^{i m |theta| x}`
    /// and the basis functions are `(|theta|/2 pi)^{1/2} e^{i x (xi2 + j|theta|)}`.
    pub fn reduced_1d_potential(&self, theta: Vec2, xi2: f64, r: f64) -> Result<ReducedPotential1d> {
        let t = self
            .lattice
            .lattice_coords(theta)
            .ok_or(Error::NotLatticeVector(theta[0], theta[1]))?;
        let len = norm(theta);
        let mut coeffs = Vec::new();
        if len > 0.0 {
            let jmax = (r / len + 1e-12).floor() as i64;
            for m in -jmax..=jmax {
                let c = self.coupling([m * t[0], m * t[1]]);
                if c.norm() > 0.0 {
                    coeffs.push((m, c));
                }
            }
        }
        Ok(ReducedPotential1d {
            theta_len: len,
            xi2,
            coeffs,
        })
    }

    pub fn to_file(&self) -> PotentialFile {
        PotentialFile {
            lattice: self.lattice.basis,
            coeffs: self
                .coeffs
                .iter()
                .map(|(m, c)| CoeffEntry {
                    m: *m,
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
    }

    pub fn from_file(f: &PotentialFile) -> Result<Self> {
        let lattice = Lattice2::new(f.lattice)?;
        Self::new(
            lattice,
            f.coeffs.iter().map(|c| (c.m, Complex64::new(c.re, c.im))),
        )
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: PotentialFile =
            serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("potential JSON: {e}")))?;
        Self::from_file(&f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let s = std::fs::read_to_string(p)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("potential serializes")
    }
}

/// `W(x) = sum_m c_m e^{i m |theta| x}` together with the Bloch data of the
/// quasi-periodic problem it lives in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedPotential1d {
    pub theta_len: f64,
    pub xi2: f64,
    pub coeffs: Vec<(i64, Complex64)>,
}

impl ReducedPotential1d {
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.theta_len
    }

    /// `frac(xi2/|theta|)`: the twist of the boundary data is `e^{2 pi i k}`.
    pub fn quasi_momentum(&self) -> f64 {
        let t = self.xi2 / self.theta_len;
        let f = t - t.floor();
        if f >= 1.0 {
            0.0
        } else {
            f
        }
    }

    pub fn coupling(&self, m: i64) -> Complex64 {
        self.coeffs
            .iter()
            .find(|(j, _)| *j == m)
            .map(|(_, c)| *c)
            .unwrap_or_default()
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(m, c)| (c * Complex64::from_polar(1.0, *m as f64 * self.theta_len * x)).re)
            .sum()
    }

    pub fn sup_bound(&self) -> f64 {
        self.coeffs.iter().map(|(_, c)| c.norm()).sum()
    }

    pub fn is_free(&self) -> bool {
        self.coeffs.iter().all(|(m, _)| *m == 0)
    }
}
