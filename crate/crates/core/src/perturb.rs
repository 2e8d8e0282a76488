//! Block perturbation lemma and the approximating operator `H~(k)`.
//!
//! The lemma compares the spectrum of `H = H0 + V` inside a window `J` with
//! that of `H~ = sum_l P^l H P^l + Q H0 Q`, where `P^l = sum_j P^l_j` are
//! diagonal projections whose shells only couple to their neighbours.
//! The fiber part builds `H~(k)` from the equivalence classes of the zone
//! construction and extracts the approximations `f`, `g` of single
//! eigenvalues.

use std::cmp::Ordering;

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bloch::{assemble_matrix, build_basis, hill_spectrum, PlaneWaveBasis};
use crate::error::{Error, Result};
use crate::lattice::{add, norm2, Vec2};
use crate::linalg::{self, CMat};
use crate::potential::TrigPotential;
use crate::zones::{ClassKind, UpsilonClass, Zones};

/// Entrywise tolerance for the structural zeroes of `V`.
pub const STRUCTURAL_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct BlockModel {
    pub h0: Vec<f64>,
    /// `blocks[l][j]` = indices of `P^l_j`.
    pub blocks: Vec<Vec<Vec<usize>>>,
    pub q: Vec<usize>,
    pub v: CMat,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockLemmaReport {
    pub dim: usize,
    pub v_norm: f64,
    pub gaps: Vec<Vec<f64>>,
    pub bound: f64,
    pub window_count: usize,
    pub max_deviation: f64,
    pub ratio_to_bound: f64,
    pub norm_difference: f64,
    pub violations: Vec<String>,
}

fn dist_to(x: f64, (a, b): (f64, f64)) -> f64 {
    if x < a {
        a - x
    } else if x > b {
        x - b
    } else {
        0.0
    }
}

/// `max_l (6v)^{2 j_l + 1} prod_{j=1..j_l} (a^l_j - 6v)^{-2}`.
pub fn lemma_bound(v: f64, gaps: &[Vec<f64>]) -> f64 {
    gaps.iter()
        .map(|g| {
            let jl = g.len() as i32;
            g.iter().fold((6.0 * v).powi(2 * jl + 1), |acc, &a| acc / (a - 6.0 * v).powi(2))
        })
        .fold(0.0, f64::max)
}

impl BlockModel {
    pub fn dim(&self) -> usize {
        self.h0.len()
    }

    fn family_of(&self) -> Vec<Option<(usize, usize)>> {
        let mut owner = vec![None; self.dim()];
        for (l, fam) in self.blocks.iter().enumerate() {
            for (j, b) in fam.iter().enumerate() {
                for &i in b {
                    owner[i] = Some((l, j));
                }
            }
        }
        owner
    }

    /// Checks the hypotheses; returns `(v, gaps a^l_j for j >= 1)`.
    pub fn check_hypotheses(&self) -> Result<(f64, Vec<Vec<f64>>)> {
        let n = self.dim();
        let mut seen = vec![0usize; n];
        for &i in self.blocks.iter().flatten().flatten().chain(&self.q) {
            if i >= n {
                return Err(Error::HypothesisViolated(format!("index {i} out of range")));
            }
            seen[i] += 1;
        }
        if seen.iter().any(|&c| c != 1) {
            return Err(Error::HypothesisViolated("projections do not partition the space".into()));
        }
        if self.v.nrows() != n || self.v.ncols() != n {
            return Err(Error::HypothesisViolated("V has the wrong shape".into()));
        }
        let owner = self.family_of();
        let last: Vec<usize> = self.blocks.iter().map(|f| f.len().saturating_sub(1)).collect();
        for r in 0..n {
            for c in 0..n {
                if self.v[(r, c)].norm() <= STRUCTURAL_TOL {
                    continue;
                }
                let ok = match (owner[r], owner[c]) {
                    (Some((l1, j1)), Some((l2, j2))) => l1 == l2 && j1.abs_diff(j2) <= 1,
                    (Some((l, j)), None) | (None, Some((l, j))) => j == last[l],
                    (None, None) => true,
                };
                if !ok {
                    return Err(Error::HypothesisViolated(format!(
                        "V[{r},{c}] = {} breaks the block structure",
                        self.v[(r, c)]
                    )));
                }
            }
        }
        let v = linalg::spectral_norm_h(&self.v)?;
        let qgap = self.q.iter().map(|&i| dist_to(self.h0[i], self.window)).fold(f64::INFINITY, f64::min);
        if qgap <= 4.0 * v {
            return Err(Error::HypothesisViolated(format!("dist(spec QH0Q, J) = {qgap} <= 4v = {}", 4.0 * v)));
        }
        let mut gaps = Vec::new();
        for fam in &self.blocks {
            let mut g = Vec::new();
            for b in fam.iter().skip(1) {
                let a = b.iter().map(|&i| dist_to(self.h0[i], self.window)).fold(f64::INFINITY, f64::min);
                if a <= 12.0 * v {
                    return Err(Error::HypothesisViolated(format!("gap {a} <= 12v = {}", 12.0 * v)));
                }
                g.push(a);
            }
            gaps.push(g);
        }
        Ok((v, gaps))
    }

    pub fn full(&self) -> CMat {
        let mut h = self.v.clone();
        for (i, &d) in self.h0.iter().enumerate() {
            h[(i, i)] += Complex64::new(d, 0.0);
        }
        h
    }

    /// `sum_l P^l H P^l` (on the `P` indices) and `Q H0 Q`.
    pub fn tilde(&self) -> CMat {
        let h = self.full();
        let n = self.dim();
        let owner = self.family_of();
        Mat::from_fn(n, n, |r, c| match (owner[r], owner[c]) {
            (Some((l1, _)), Some((l2, _))) if l1 == l2 => h[(r, c)],
            (None, None) if r == c => Complex64::new(self.h0[r], 0.0),
            _ => Complex64::new(0.0, 0.0),
        })
    }
}

pub fn verify_block_lemma(model: &BlockModel) -> Result<BlockLemmaReport> {
    let (v, gaps) = model.check_hypotheses()?;
    let bound = lemma_bound(v, &gaps);
    let h = model.full();
    let ht = model.tilde();
    let mu = linalg::eigvalsh(&h)?;
    let mut_ = linalg::eigvalsh(&ht)?;
    let p_idx: Vec<usize> = model.blocks.iter().flatten().flatten().copied().collect();
    let p_spec = linalg::eigvalsh(&linalg::submatrix(&ht, &p_idx))?;
    let (l1, l2) = model.window;
    let scale = mu.iter().map(|x| x.abs()).fold(1.0, f64::max);
    let tol = 1e-10 * scale;
    let inside: Vec<usize> = (0..mu.len()).filter(|&r| mu[r] >= l1 && mu[r] <= l2).collect();
    let mut violations = Vec::new();
    let mut max_dev = 0.0f64;
    for &r in &inside {
        let d = (mut_[r] - mu[r]).abs();
        max_dev = max_dev.max(d);
        if d > bound + tol {
            violations.push(format!("|mu~_{r} - mu_{r}| = {d:e} exceeds bound {bound:e}"));
        }
        let near = p_spec.iter().map(|&x| (x - mut_[r]).abs()).fold(f64::INFINITY, f64::min);
        if near > tol {
            violations.push(format!("mu~_{r} = {} is not an eigenvalue of sum P H P", mut_[r]));
        }
    }
    for (r, &x) in mut_.iter().enumerate() {
        if !inside.contains(&r) && x > l1 + v + tol && x < l2 - v - tol {
            violations.push(format!("unmatched eigenvalue {x} of H~ inside the shrunk window"));
        }
    }
    let mut diff = h.clone();
    for r in 0..diff.nrows() {
        for c in 0..diff.ncols() {
            diff[(r, c)] -= ht[(r, c)];
        }
    }
    let norm_difference = linalg::spectral_norm_h(&diff)?;
    if norm_difference > 2.0 * v + tol {
        violations.push(format!("||H - H~|| = {norm_difference} > 2v"));
    }
    Ok(BlockLemmaReport {
        dim: model.dim(),
        v_norm: v,
        gaps,
        bound,
        window_count: inside.len(),
        max_deviation: max_dev,
        ratio_to_bound: if bound > 0.0 { max_dev / bound } else { 0.0 },
        norm_difference,
        violations,
    })
}

/// `H0 = diag(0, 50, 100)`, `P^0 = P_0 + P_1` with `P_0 = {0}`, `P_1 = {1}`,
/// `Q = {2}`, couplings `0-1` and `1-2` scaled to `||V|| = 1`, `J = [-5, 5]`.
pub fn three_level_example() -> BlockModel {
    let c = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut v = linalg::zeros(3);
    v[(0, 1)] = c;
    v[(1, 0)] = c;
    v[(1, 2)] = c;
    v[(2, 1)] = c;
    BlockModel {
        h0: vec![0.0, 50.0, 100.0],
        blocks: vec![vec![vec![0], vec![1]]],
        q: vec![2],
        v,
        window: (-5.0, 5.0),
    }
}

/// Random instance satisfying the hypotheses by construction: only allowed
/// couplings are filled, `V` is normalized to `||V|| = 1`, shells `j >= 1`
/// sit at distance `12 (1.5 + u)` from `J` and `Q` at distance `4 (1.5 + u)`.
pub fn random_admissible(rng: &mut impl Rng, max_dim: usize) -> BlockModel {
    let lo = -rng.gen_range(2.0..15.0);
    let hi = rng.gen_range(2.0..15.0);
    let window = (lo, hi);
    let outside = |rng: &mut dyn rand::RngCore, d: f64| -> f64 {
        if rng.gen::<bool>() {
            hi + d
        } else {
            lo - d
        }
    };
    let mut h0 = Vec::new();
    let mut blocks = Vec::new();
    let families = rng.gen_range(1..=3);
    'outer: for _ in 0..families {
        let jl = rng.gen_range(0..=3);
        let mut fam = Vec::new();
        for j in 0..=jl {
            let size = rng.gen_range(1..=4);
            if h0.len() + size > max_dim.saturating_sub(2) && !fam.is_empty() {
                blocks.push(fam);
                break 'outer;
            }
            let a = 12.0 * (1.5 + rng.gen::<f64>());
            let mut b = Vec::new();
            for s in 0..size {
                let x = if j == 0 {
                    rng.gen_range(lo - 3.0..hi + 3.0)
                } else if s == 0 {
                    outside(rng, a)
                } else {
                    let extra = rng.gen_range(0.0..20.0);
                    outside(rng, a + extra)
                };
                b.push(h0.len());
                h0.push(x);
            }
            fam.push(b);
        }
        blocks.push(fam);
    }
    let mut q = Vec::new();
    for _ in 0..rng.gen_range(0..=(max_dim - h0.len()).min(6)) {
        let d = 4.0 * (1.5 + rng.gen::<f64>()) + rng.gen_range(0.0..30.0);
        q.push(h0.len());
        h0.push(outside(rng, d));
    }
    let n = h0.len();
    let mut model = BlockModel {
        h0,
        blocks,
        q,
        v: linalg::zeros(n),
        window,
    };
    let owner = model.family_of();
    let last: Vec<usize> = model.blocks.iter().map(|f| f.len() - 1).collect();
    let density = rng.gen_range(0.3..1.0);
    for r in 0..n {
        for c in r..n {
            let ok = match (owner[r], owner[c]) {
                (Some((l1, j1)), Some((l2, j2))) => l1 == l2 && j1.abs_diff(j2) <= 1,
                (Some((l, j)), None) | (None, Some((l, j))) => j == last[l],
                (None, None) => true,
            };
            if ok && rng.gen::<f64>() < density {
                let z = if r == c {
                    Complex64::new(rng.gen_range(-1.0..1.0), 0.0)
                } else {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                };
                model.v[(r, c)] = z;
                model.v[(c, r)] = z.conj();
            }
        }
    }
    let nv = linalg::spectral_norm_h(&model.v).unwrap_or(0.0);
    if nv > 0.0 {
        for r in 0..n {
            for c in 0..n {
                model.v[(r, c)] /= nv;
            }
        }
    }
    model
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSuite {
    pub instances: usize,
    pub discarded: usize,
    pub max_ratio_to_bound: f64,
    pub violations: Vec<String>,
}

pub fn perturb_suite(instances: usize, seed: u64) -> PerturbSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = PerturbSuite {
        instances,
        discarded: 0,
        max_ratio_to_bound: 0.0,
        violations: Vec::new(),
    };
    for i in 0..instances {
        let m = random_admissible(&mut rng, 40);
        match verify_block_lemma(&m) {
            Ok(r) => {
                out.max_ratio_to_bound = out.max_ratio_to_bound.max(r.ratio_to_bound);
                out.violations.extend(r.violations.into_iter().map(|s| format!("instance {i}: {s}")));
            }
            Err(_) => out.discarded += 1,
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Fiber operators

/// Spectrum of `P(xi) H' P(xi)` for the class of `xi`, with the label `t`
/// of `xi` inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpectrum {
    pub class: UpsilonClass,
    pub values: Vec<f64>,
    /// 1-based rank of `|xi|^2` in the class under the crystallographic order.
    pub t: usize,
}

/// Crystallographic order on dual-space points: `|eta|^2`, then `eta_1`,
/// then `eta_2`.
fn crystal_cmp(a: &(f64, Vec2), b: &(f64, Vec2)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1[0].total_cmp(&b.1[0]))
        .then(a.1[1].total_cmp(&b.1[1]))
}

/// Rank (1-based) of member `target` among `members` ordered by
/// `(|eta|^2, eta_1, eta_2)`.
fn crystal_rank(points: &[Vec2], target: usize) -> usize {
    let key = (norm2(points[target]), points[target]);
    points
        .iter()
        .filter(|&&p| crystal_cmp(&(norm2(p), p), &key) == Ordering::Less)
        .count()
        + 1
}

pub fn class_spectrum(zones: &Zones, v_trunc: &TrigPotential, xi: Vec2, rho: f64) -> Result<ClassSpectrum> {
    let class = zones.upsilon(xi, rho)?;
    let lat = &zones.params.lattice;
    let basis = PlaneWaveBasis::from_modes(lat, class.k, class.members.clone());
    let values = linalg::eigvalsh(&assemble_matrix(&basis, v_trunc))?;
    let seed = lat.split(xi).integer_part;
    let pts: Vec<Vec2> = (0..basis.len()).map(|i| basis.point(i)).collect();
    let pos = basis.modes.iter().position(|&m| m == seed).ok_or(Error::LabelAmbiguity(
        "seed missing from its class".into(),
    ))?;
    let t = crystal_rank(&pts, pos);
    Ok(ClassSpectrum { class, values, t })
}

/// `g(xi) = mu_t(P(xi) H' P(xi))` together with `t`.
pub fn g_value(zones: &Zones, v: &TrigPotential, xi: Vec2, rho: f64) -> Result<(f64, ClassSpectrum)> {
    let vt = v.truncate(zones.params.r_n);
    let cs = class_spectrum(zones, &vt, xi, rho)?;
    Ok((cs.values[cs.t - 1], cs))
}

/// Exact fiber spectrum for separable potentials (Kronecker sum of two Hill
/// spectra) up to `e_max`.
pub fn separable_fiber_spectrum(v: &TrigPotential, k: Vec2, e_max: f64) -> Result<Vec<f64>> {
    let parts = v
        .separable_parts()
        .ok_or_else(|| Error::InvalidInput("potential is not separable".into()))?;
    let lat = &v.lattice;
    let kappa = lat.dual_coords(k);
    let b = v.stats().b;
    let guard = e_max + 4.0 * v.oscillation_bound() + 50.0;
    let mut axis = Vec::new();
    for d in 0..2 {
        let step = crate::lattice::norm(lat.dual_basis[d]);
        axis.push(hill_spectrum(step, kappa[d], &parts[d], guard * 1.5)?);
    }
    let mut out = Vec::new();
    for &x in &axis[0] {
        for &y in &axis[1] {
            if x + y + b <= e_max {
                out.push(x + y + b);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Dense fiber spectrum of `H(k)` on the ball `|m + k|^2 <= e_max`.
pub fn dense_fiber_spectrum(v: &TrigPotential, k: Vec2, e_max: f64) -> Result<Vec<f64>> {
    let basis = build_basis(&v.lattice, k, e_max)?;
    linalg::eigvalsh(&assemble_matrix(&basis, v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxPair {
    pub xi: Vec2,
    pub kind: ClassKind,
    pub class_size: usize,
    pub t: usize,
    pub f_val: f64,
    pub g_val: f64,
}

impl ApproxPair {
    pub fn error(&self) -> f64 {
        (self.f_val - self.g_val).abs()
    }
}

/// `g(xi)` from its class block and `f(xi)` as the eigenvalue of the full
/// fiber operator closest to it.
pub fn f_g_pair(zones: &Zones, v: &TrigPotential, xi: Vec2, rho: f64, fiber: &[f64]) -> Result<ApproxPair> {
    let (g, cs) = g_value(zones, v, xi, rho)?;
    let f = fiber
        .iter()
        .copied()
        .min_by(|a, b| (a - g).abs().total_cmp(&(b - g).abs()))
        .ok_or_else(|| Error::InvalidInput("empty fiber spectrum".into()))?;
    Ok(ApproxPair {
        xi,
        kind: cs.class.kind,
        class_size: cs.class.len(),
        t: cs.t,
        f_val: f,
        g_val: g,
    })
}

/// One eigenvalue of `H~(k)` with the point it is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledEigenvalue {
    pub value: f64,
    /// Basis index of `eta`.
    pub mode: usize,
    pub class: usize,
    pub t: usize,
}

#[derive(Debug, Clone)]
pub struct TildeSpectrum {
    pub rho: f64,
    pub basis: PlaneWaveBasis,
    /// Sorted by `(nu, eta_1, eta_2)`; the position plus one is `p(eta)`.
    pub entries: Vec<LabeledEigenvalue>,
    pub classes: Vec<Vec<usize>>,
    /// Pairs of overlapping classes merged into one block.
    pub merged: usize,
}

impl TildeSpectrum {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    /// 1-based global label of the mode.
    pub fn p_of(&self, mode: usize) -> Option<usize> {
        self.entries.iter().position(|e| e.mode == mode).map(|p| p + 1)
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// `H~(k)` on the ball `|m + k|^2 <= e_max` as a direct sum of the class
/// blocks `P(eta) H' P(eta)`; modes outside every class are one-dimensional
/// blocks. Classes that overlap (possible only when the asymptotic
/// separation fails) are merged and counted in `merged`.
pub fn tilde_h_spectrum(zones: &Zones, v: &TrigPotential, k: Vec2, rho: f64, e_max: f64) -> Result<TildeSpectrum> {
    let lat = &zones.params.lattice;
    let need = ((zones.annulus(rho).1).sqrt() + zones.params.theta_radius(7 * zones.params.m_tilde)).powi(2);
    if e_max < need {
        return Err(Error::CutoffTooSmall(format!("E_max {e_max} < {need}")));
    }
    let basis = build_basis(lat, k, e_max)?;
    let index = basis.index();
    let n = basis.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut merged = 0;
    let mut distinct = std::collections::HashSet::new();
    let mut placed = vec![false; n];
    for i in 0..n {
        let eta = basis.point(i);
        if !zones.in_annulus(eta, rho) {
            continue;
        }
        let class = zones.upsilon(eta, rho)?;
        let ids: Vec<usize> = class
            .members
            .iter()
            .map(|m| {
                index
                    .get(m)
                    .copied()
                    .ok_or_else(|| Error::CutoffTooSmall(format!("class member {m:?} outside the basis")))
            })
            .collect::<Result<_>>()?;
        if !distinct.insert(ids.clone()) {
            continue;
        }
        // a member already placed means two distinct classes overlap
        if ids.iter().any(|&j| placed[j]) {
            merged += 1;
        }
        for &j in &ids {
            placed[j] = true;
            let (a, b) = (find(&mut parent, ids[0]), find(&mut parent, j));
            if a != b {
                parent[b] = a;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut entries = Vec::with_capacity(n);
    let mut classes = Vec::new();
    for (_, members) in groups {
        let cid = classes.len();
        let pts: Vec<Vec2> = members.iter().map(|&i| basis.point(i)).collect();
        let values = if members.len() == 1 {
            vec![basis.kinetic(members[0]) + v.coupling([0, 0]).re]
        } else {
            let sub = PlaneWaveBasis::from_modes(lat, k, members.iter().map(|&i| basis.modes[i]).collect());
            linalg::eigvalsh(&assemble_matrix(&sub, &v.truncate(zones.params.r_n)))?
        };
        for (pos, &i) in members.iter().enumerate() {
            let t = crystal_rank(&pts, pos);
            entries.push(LabeledEigenvalue {
                value: values[t - 1],
                mode: i,
                class: cid,
                t,
            });
        }
        classes.push(members);
    }
    entries.sort_by(|a, b| {
        crystal_cmp(&(a.value, basis.point(a.mode)), &(b.value, basis.point(b.mode)))
    });
    Ok(TildeSpectrum {
        rho,
        basis,
        entries,
        classes,
        merged,
    })
}


/// `|xi|^2 + V^(0)/sqrt(vol) + sum_{eta != 0} |c(eta)|^2 / (|xi|^2 - |xi + eta|^2)`
/// over the support of the truncated potential.
pub fn rayleigh_schrodinger2(xi: Vec2, v: &TrigPotential, r_n: f64) -> Result<f64> {
    let vt = v.truncate(r_n);
    let bound = vt.oscillation_bound();
    let e0 = norm2(xi);
    let mut corr = vt.coupling([0, 0]).re;
    for (m, _) in vt.coeffs() {
        if m == [0, 0] {
            continue;
        }
        let c = vt.coupling(m);
        let den = e0 - norm2(add(xi, vt.lattice.dual_vector(m)));
        if den.abs() < 10.0 * bound {
            return Err(Error::SmallDenominator(den, 10.0 * bound));
        }
        corr += c.norm_sqr() / den;
    }
    Ok(e0 + corr)
}
