//! Resonance and non-resonance zones of the annulus
//! `A(rho) = {rho^2 - 100 v <= |xi|^2 <= rho^2 + 100 v}`.
//!
//! Every primitive direction `theta` carries a strip `Lambda(theta)` of
//! half-width `a(theta)` around `theta^perp`; the chain of sets
//! `Xi_1 .. Xi_5` cuts the resonance region out of the strip, the rest of the
//! annulus is the non-resonance region `B`, split into sectors `B_l`.
//! All sets are evaluated in the frame generated by `theta`
//! (`eta_1 = <xi, n(theta^perp)>`, `eta_2 = <xi, n(theta)>`), where they
//! have closed forms:
//!
//! * `Xi_2 = {p_- < eta_1 < p_+}`, `p_- = sqrt(rho^2 - 100v - a^2)`,
//!   `p_+ = sqrt(rho^2 + 100v)`;
//! * `Xi_3 = Xi_2 ∩ {|eta_2| < a}`;
//! * `Xi_4 = Xi_2 ∩ A ∩ {|eta_2| >= a}`, with extremal values
//!   `p~_- = sqrt(rho^2 + 100v - a^2)` and `a~ = sqrt(200v + a^2)`;
//! * `Xi_5 = Xi_3 \ (Xi_4 + Z theta)`.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bloch::PlaneWaveBasis;
use crate::error::{Error, Result};
use crate::lattice::{add, cross, dot, norm, norm2, sub, DualVector, Frame, Lattice2, Vec2};

/// Relative tolerance (in units of `rho`) below which a point counts as
/// lying on the boundary of a zone.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneParams {
    pub lattice: Lattice2,
    pub rho_n: f64,
    #[serde(rename = "M")]
    pub m_order: usize,
    #[serde(rename = "M_tilde")]
    pub m_tilde: usize,
    #[serde(rename = "R_n")]
    pub r_n: f64,
    pub v: f64,
    /// Radius of the ball whose primitive vectors define the strips;
    /// `6 M~ R_n` unless overridden.
    pub strip_radius: f64,
}

impl ZoneParams {
    pub fn new(lattice: Lattice2, rho_n: f64, m_order: usize, r_n: f64, v: f64) -> Result<Self> {
        if !(rho_n > 0.0 && r_n > 0.0 && v >= 0.0 && m_order >= 1) {
            return Err(Error::InvalidInput(format!(
                "zone parameters rho_n={rho_n}, M={m_order}, R_n={r_n}, v={v}"
            )));
        }
        let m_tilde = 3 * m_order;
        Ok(Self {
            lattice,
            rho_n,
            m_order,
            m_tilde,
            r_n,
            v,
            strip_radius: 6.0 * m_tilde as f64 * r_n,
        })
    }

    pub fn with_strip_radius(mut self, r: f64) -> Self {
        self.strip_radius = r;
        self
    }

    /// Radius of `Theta_j = Gamma* ∩ B(j R_n)`.
    pub fn theta_radius(&self, j: usize) -> f64 {
        j as f64 * self.r_n
    }

    /// Inequalities of the asymptotic regime that the parameters violate.
    pub fn regime_notes(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.r_n > self.rho_n.powf(1.0 / 25.0) {
            out.push(format!("R_n = {} exceeds rho_n^(1/25) = {:.4}", self.r_n, self.rho_n.powf(0.04)));
        }
        if self.r_n > self.rho_n.powf(0.1) {
            out.push(format!("R_n = {} exceeds rho_n^(1/10) = {:.4}", self.r_n, self.rho_n.powf(0.1)));
        }
        let default = 6.0 * self.m_tilde as f64 * self.r_n;
        if (self.strip_radius - default).abs() > 1e-12 * default {
            out.push(format!("strip radius {} differs from 6 M~ R_n = {}", self.strip_radius, default));
        }
        out
    }
}

/// Smallest `a >= rho_n^{1/3}` with `2a/|theta| - 1/2` a natural number.
pub fn strip_width(theta_len: f64, rho_n: f64) -> f64 {
    let c = rho_n.cbrt();
    // a = (2j + 1)|theta|/4 with j >= 1
    let mut j = ((4.0 * c / theta_len - 1.0) / 2.0).ceil().max(1.0);
    if (2.0 * j + 1.0) * theta_len / 4.0 < c {
        j += 1.0;
    }
    (2.0 * j + 1.0) * theta_len / 4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub theta: DualVector,
    pub frame: Frame,
    pub a: f64,
}

/// Closed-form extremal quantities of the strip chain at a given `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripExtent {
    pub p_minus: f64,
    pub p_plus: f64,
    pub p_tilde_minus: f64,
    pub a: f64,
    pub a_tilde: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZoneKind {
    NonResonant,
    Resonant,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneLabel {
    pub kind: ZoneKind,
    /// Strip index for `Resonant`, sector index for `NonResonant`.
    pub l: usize,
    /// Within tolerance of some defining inequality.
    pub boundary: bool,
    /// Number of strips whose `Xi_5` contains the point.
    pub overlap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassKind {
    NonResonant,
    Resonant(usize),
}

/// Equivalence class `Upsilon(xi)`; members are integer coordinates `m` of
/// the dual-space points `m + k`, `k = {xi}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpsilonClass {
    pub seed: Vec2,
    pub k: Vec2,
    pub kind: ClassKind,
    /// `{xi + j theta} ∩ Xi_3(theta)` for resonant classes, `{xi}` otherwise.
    pub core: Vec<[i64; 2]>,
    pub members: Vec<[i64; 2]>,
}

impl UpsilonClass {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn points(&self, lat: &Lattice2) -> Vec<Vec2> {
        self.members.iter().map(|&m| add(lat.dual_vector(m), self.k)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Zones {
    pub params: ZoneParams,
    pub strips: Vec<Strip>,
    balls: HashMap<usize, Vec<DualVector>>,
}

impl Zones {
    pub fn new(params: ZoneParams) -> Result<Self> {
        let prims = params.lattice.primitive_vectors(params.strip_radius)?;
        let strips = prims
            .into_iter()
            .map(|t| Strip {
                theta: t,
                frame: Frame::new(t.v),
                a: strip_width(t.norm(), params.rho_n),
            })
            .collect();
        let mut balls = HashMap::new();
        let mt = params.m_tilde;
        for j in [mt, 6 * mt, 7 * mt, 15 * mt] {
            balls.insert(j, params.lattice.points_in_ball(params.theta_radius(j)));
        }
        Ok(Self { params, strips, balls })
    }

    pub fn num_strips(&self) -> usize {
        self.strips.len()
    }

    /// `Theta_j` (origin included), sorted by length.
    pub fn theta_ball(&self, j: usize) -> Vec<DualVector> {
        self.balls
            .get(&j)
            .cloned()
            .unwrap_or_else(|| self.params.lattice.points_in_ball(self.params.theta_radius(j)))
    }

    fn ball_ref(&self, j: usize) -> &[DualVector] {
        self.balls.get(&j).map(|v| v.as_slice()).expect("cached ball")
    }

    pub fn annulus(&self, rho: f64) -> (f64, f64) {
        let w = 100.0 * self.params.v;
        (rho * rho - w, rho * rho + w)
    }

    pub fn in_annulus(&self, xi: Vec2, rho: f64) -> bool {
        let (lo, hi) = self.annulus(rho);
        let r2 = norm2(xi);
        lo <= r2 && r2 <= hi
    }

    pub fn extent(&self, l: usize, rho: f64) -> StripExtent {
        let a = self.strips[l].a;
        let w = 100.0 * self.params.v;
        StripExtent {
            p_minus: (rho * rho - w - a * a).max(0.0).sqrt(),
            p_plus: (rho * rho + w).sqrt(),
            p_tilde_minus: (rho * rho + w - a * a).max(0.0).sqrt(),
            a,
            a_tilde: (2.0 * w + a * a).sqrt(),
        }
    }

    pub fn frame_coords(&self, l: usize, xi: Vec2) -> Vec2 {
        self.strips[l].frame.to_frame(xi)
    }

    pub fn in_lambda(&self, l: usize, xi: Vec2) -> bool {
        self.frame_coords(l, xi)[1].abs() < self.strips[l].a
    }

    pub fn in_xi1(&self, l: usize, xi: Vec2, rho: f64) -> bool {
        let e = self.frame_coords(l, xi);
        self.in_annulus(xi, rho) && e[1].abs() < self.strips[l].a && e[0] > 0.0
    }

    pub fn in_xi2(&self, l: usize, xi: Vec2, rho: f64) -> bool {
        let x = self.extent(l, rho);
        let e1 = self.frame_coords(l, xi)[0];
        x.p_minus < e1 && e1 < x.p_plus
    }

    pub fn in_xi3(&self, l: usize, xi: Vec2, rho: f64) -> bool {
        self.in_xi2(l, xi, rho) && self.in_lambda(l, xi)
    }

    pub fn in_xi4(&self, l: usize, xi: Vec2, rho: f64) -> bool {
        self.in_xi2(l, xi, rho) && self.in_annulus(xi, rho) && !self.in_lambda(l, xi)
    }

    /// Frame-coordinate form of `Xi_4` used in the hot paths.
    fn xi4_frame(&self, e: Vec2, x: &StripExtent, hi: f64) -> bool {
        x.p_minus < e[0] && e[0] < x.p_plus && e[1].abs() >= x.a && e[0] * e[0] + e[1] * e[1] <= hi
    }

    fn xi5_frame(&self, l: usize, e: Vec2, x: &StripExtent, hi: f64) -> bool {
        if !(x.p_minus < e[0] && e[0] < x.p_plus && e[1].abs() < x.a) {
            return false;
        }
        let t = self.strips[l].theta.norm();
        // shifts landing in |eta_2| <= a~
        let jlo = ((-x.a_tilde - e[1]) / t).floor() as i64 - 1;
        let jhi = ((x.a_tilde - e[1]) / t).ceil() as i64 + 1;
        for j in jlo..=jhi {
            if j == 0 {
                continue;
            }
            if self.xi4_frame([e[0], e[1] + j as f64 * t], x, hi) {
                return false;
            }
        }
        true
    }

    pub fn in_xi5(&self, l: usize, xi: Vec2, rho: f64) -> bool {
        let x = self.extent(l, rho);
        let (_, hi) = self.annulus(rho);
        self.xi5_frame(l, self.frame_coords(l, xi), &x, hi)
    }

    /// Strips whose resonance region contains `xi`.
    pub fn resonant_strips(&self, xi: Vec2, rho: f64) -> Vec<usize> {
        let (_, hi) = self.annulus(rho);
        (0..self.strips.len())
            .filter(|&l| {
                let x = self.extent(l, rho);
                self.xi5_frame(l, self.frame_coords(l, xi), &x, hi)
            })
            .collect()
    }

    /// `xi ∈ B = A \ D`.
    pub fn in_b(&self, xi: Vec2, rho: f64) -> bool {
        self.in_annulus(xi, rho) && self.resonant_strips(xi, rho).is_empty()
    }

    /// Index `l` of the sector between `theta_l^perp` and `theta_{l+1}^perp`
    /// containing the direction of `xi`.
    pub fn sector_of(&self, xi: Vec2) -> usize {
        let psi = (xi[1].atan2(xi[0]) + PI / 2.0).rem_euclid(2.0 * PI);
        let n = self.strips.len();
        let idx = self.strips.partition_point(|s| s.theta.angle() <= psi);
        if idx == 0 {
            n - 1
        } else {
            idx - 1
        }
    }

    /// Distance (in length units) from `xi` to the nearest defining
    /// inequality of the zone chain.
    fn boundary_margin(&self, xi: Vec2, rho: f64) -> f64 {
        let (lo, hi) = self.annulus(rho);
        let r2 = norm2(xi);
        let mut m = ((r2 - lo).abs().min((r2 - hi).abs())) / (2.0 * rho);
        for l in 0..self.strips.len() {
            let x = self.extent(l, rho);
            let e = self.frame_coords(l, xi);
            if e[0] <= 0.0 {
                continue;
            }
            m = m.min((e[0] - x.p_minus).abs()).min((e[0] - x.p_plus).abs());
            let t = self.strips[l].theta.norm();
            let jmax = ((x.a_tilde + e[1].abs()) / t).ceil() as i64 + 1;
            for j in -jmax..=jmax {
                let s = e[1] + j as f64 * t;
                m = m.min((s.abs() - x.a).abs());
                let q = e[0] * e[0] + s * s;
                m = m.min((q - hi).abs() / (2.0 * rho));
            }
        }
        m
    }

    pub fn label(&self, xi: Vec2, rho: f64) -> ZoneLabel {
        let boundary = self.boundary_margin(xi, rho) < BOUNDARY_TOL * rho;
        if !self.in_annulus(xi, rho) {
            return ZoneLabel {
                kind: ZoneKind::Outside,
                l: 0,
                boundary,
                overlap: 0,
            };
        }
        let res = self.resonant_strips(xi, rho);
        match res.first() {
            Some(&l) => ZoneLabel {
                kind: ZoneKind::Resonant,
                l,
                boundary,
                overlap: res.len(),
            },
            None => ZoneLabel {
                kind: ZoneKind::NonResonant,
                l: self.sector_of(xi),
                boundary,
                overlap: 0,
            },
        }
    }

    pub fn classify(&self, xi: Vec2, rho: f64) -> Result<ZoneLabel> {
        let lab = self.label(xi, rho);
        if lab.kind == ZoneKind::Outside {
            let (lo, hi) = self.annulus(rho);
            return Err(Error::OutsideAnnulus(norm2(xi), lo, hi));
        }
        Ok(lab)
    }

    pub fn upsilon(&self, xi: Vec2, rho: f64) -> Result<UpsilonClass> {
        let lab = self.classify(xi, rho)?;
        let lat = &self.params.lattice;
        let p = lat.split(xi);
        let base = p.integer_part;
        let mut set = BTreeSet::new();
        let (kind, core) = match lab.kind {
            ZoneKind::Resonant => {
                let l = lab.l;
                let s = &self.strips[l];
                let t = s.theta.norm();
                let e = self.frame_coords(l, xi);
                let jlo = ((-s.a - e[1]) / t).floor() as i64;
                let jhi = ((s.a - e[1]) / t).ceil() as i64;
                let mut core = Vec::new();
                for j in jlo..=jhi {
                    let eta = add(xi, [j as f64 * s.theta.v[0], j as f64 * s.theta.v[1]]);
                    if self.in_xi3(l, eta, rho) {
                        core.push([base[0] + j * s.theta.m[0], base[1] + j * s.theta.m[1]]);
                    }
                }
                for c in &core {
                    for g in self.ball_ref(7 * self.params.m_tilde) {
                        set.insert([c[0] + g.m[0], c[1] + g.m[1]]);
                    }
                }
                core.sort();
                (ClassKind::Resonant(l), core)
            }
            _ => {
                for g in self.ball_ref(self.params.m_tilde) {
                    set.insert([base[0] + g.m[0], base[1] + g.m[1]]);
                }
                (ClassKind::NonResonant, vec![base])
            }
        };
        Ok(UpsilonClass {
            seed: xi,
            k: p.fractional_part,
            kind,
            core,
            members: set.into_iter().collect(),
        })
    }

    /// Smallest `|g|`, `g ∈ Gamma*`, `|g| <= (ball) R_n`, such that
    /// `eta - g ∈ Xi_5(theta_l)`.
    fn strip_distance(&self, l: usize, eta: Vec2, rho: f64, ball: usize) -> Option<f64> {
        let x = self.extent(l, rho);
        let (_, hi) = self.annulus(rho);
        let f = &self.strips[l].frame;
        let e = f.to_frame(eta);
        // cheap rejection: Xi_5 lies in p_- < eta_1 < p_+, |eta_2| < a
        let reach = self.params.theta_radius(ball) + 1e-9;
        if e[0] < x.p_minus - reach || e[0] > x.p_plus + reach || e[1].abs() > x.a + reach {
            return None;
        }
        self.ball_ref(ball)
            .iter()
            .find(|g| {
                let ge = f.to_frame(g.v);
                self.xi5_frame(l, [e[0] - ge[0], e[1] - ge[1]], &x, hi)
            })
            .map(|g| g.norm())
    }

    /// Smallest `|g|`, `|g| <= M~ R_n`, with `eta - g ∈ B`.
    fn b_distance(&self, eta: Vec2, rho: f64) -> Option<f64> {
        let (lo, hi) = self.annulus(rho);
        let reach = self.params.theta_radius(self.params.m_tilde);
        let r = norm(eta);
        if r + reach < lo.max(0.0).sqrt() || r - reach > hi.sqrt() {
            return None;
        }
        self.ball_ref(self.params.m_tilde)
            .iter()
            .find(|g| self.in_b(sub(eta, g.v), rho))
            .map(|g| g.norm())
    }

    /// `eta ∈ Xi_0(theta_l) = Xi_5(theta_l) + Theta_{7 M~}`.
    pub fn in_xi0_strip(&self, l: usize, eta: Vec2, rho: f64) -> bool {
        self.strip_distance(l, eta, rho, 7 * self.params.m_tilde).is_some()
    }

    /// `eta ∈ Xi_0(B) = B + Theta_{M~}`.
    pub fn in_xi0_b(&self, eta: Vec2, rho: f64) -> bool {
        self.b_distance(eta, rho).is_some()
    }

    /// Splits the modes of `basis` into the blocks `P^l_j` and `Q`.
    ///
    /// Family 0 is the non-resonance family built from `B`; family `l >= 1`
    /// belongs to strip `l - 1`. A mode claimed by two families is recorded
    /// in `conflicts` and assigned to the first.
    pub fn projection_scheme(&self, basis: &PlaneWaveBasis, rho: f64, require_cover: bool) -> Result<ProjectionScheme> {
        let mt = self.params.m_tilde;
        let r = self.params.r_n;
        if require_cover {
            let need = ((self.annulus(rho).1).sqrt() + self.params.theta_radius(7 * mt)).powi(2);
            if basis.cutoff < need {
                return Err(Error::CutoffTooSmall(format!("E_max {} < {need}", basis.cutoff)));
            }
        }
        let nl = self.strips.len();
        let mut blocks = vec![vec![Vec::new(); mt + 1]; nl + 1];
        let mut q = Vec::new();
        let mut conflicts = Vec::new();
        let shell = |d: f64, offset: usize| -> usize {
            // d in ((offset + j - 1) R, (offset + j) R]  ->  j
            let j = ((d / r) - offset as f64 - 1e-12).ceil().max(0.0) as usize;
            j.min(mt)
        };
        for i in 0..basis.len() {
            let eta = basis.point(i);
            let mut owners: Vec<(usize, usize)> = Vec::new();
            if let Some(d) = self.b_distance(eta, rho) {
                owners.push((0, if d == 0.0 { 0 } else { shell(d, 0).max(1) }));
            }
            for l in 0..nl {
                if let Some(d) = self.strip_distance(l, eta, rho, 7 * mt) {
                    owners.push((l + 1, shell(d, 6 * mt)));
                }
            }
            match owners.first() {
                None => q.push(i),
                Some(&(fam, j)) => {
                    blocks[fam][j].push(i);
                    if owners.len() > 1 {
                        conflicts.push(i);
                    }
                }
            }
        }
        Ok(ProjectionScheme {
            rho,
            blocks,
            q,
            conflicts,
        })
    }

    /// The separation identities between the `Xi_0` sets, checked on the
    /// modes of `basis`: returns the offending mode indices.
    pub fn xi10_violations(&self, basis: &PlaneWaveBasis, rho: f64) -> Vec<(usize, String)> {
        let mt = self.params.m_tilde;
        let small = self.theta_ball(mt);
        let nl = self.strips.len();
        let mut out = Vec::new();
        for i in 0..basis.len() {
            let eta = basis.point(i);
            let in_strip: Vec<usize> = (0..nl).filter(|&l| self.in_xi0_strip(l, eta, rho)).collect();
            if in_strip.is_empty() {
                continue;
            }
            for g in &small {
                let zeta = sub(eta, g.v);
                if self.in_xi0_b(zeta, rho) {
                    out.push((i, format!("Xi0(B)+{:?} meets Xi0(theta_{})", g.m, in_strip[0])));
                }
                for l1 in 0..nl {
                    if in_strip.iter().any(|&l2| l2 != l1) && self.in_xi0_strip(l1, zeta, rho) {
                        let l2 = *in_strip.iter().find(|&&l2| l2 != l1).unwrap();
                        out.push((i, format!("Xi0(theta_{l1})+{:?} meets Xi0(theta_{l2})", g.m)));
                    }
                }
            }
        }
        out
    }
}

/// Index sets `P^l_j` (family `l`, shell `j`) and `Q` over a mode list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionScheme {
    pub rho: f64,
    pub blocks: Vec<Vec<Vec<usize>>>,
    pub q: Vec<usize>,
    pub conflicts: Vec<usize>,
}

impl ProjectionScheme {
    pub fn family(&self, l: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.blocks[l].iter().flatten().copied().collect();
        v.sort();
        v
    }

    pub fn total(&self) -> usize {
        self.blocks.iter().flatten().map(|b| b.len()).sum::<usize>() + self.q.len()
    }
}

/// All modes with `r_lo <= |m + k| <= r_hi`.
pub fn shell_basis(lat: &Lattice2, k: Vec2, r_lo: f64, r_hi: f64) -> PlaneWaveBasis {
    let [b1, b2] = lat.dual_basis;
    let c22 = norm2(b2);
    let m1max = ((r_hi + norm(k)) * norm(lat.basis[0]) / (2.0 * PI)).ceil() as i64 + 1;
    let mut modes = Vec::new();
    let lo2 = r_lo.max(0.0).powi(2);
    let hi2 = r_hi * r_hi;
    for m1 in -m1max..=m1max {
        let p = [m1 as f64 * b1[0] + k[0], m1 as f64 * b1[1] + k[1]];
        let bq = dot(p, b2);
        let disc = bq * bq - c22 * (norm2(p) - hi2);
        if disc < 0.0 {
            continue;
        }
        let s = disc.sqrt();
        let lo = ((-bq - s) / c22).floor() as i64 - 1;
        let hi = ((-bq + s) / c22).ceil() as i64 + 1;
        for m2 in lo..=hi {
            let e = norm2(add(p, [m2 as f64 * b2[0], m2 as f64 * b2[1]]));
            if e >= lo2 && e <= hi2 {
                modes.push([m1, m2]);
            }
        }
    }
    PlaneWaveBasis::from_modes(lat, k, modes)
}

/// Outcome of one lemma predicate over the sampled points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub name: String,
    pub checked: usize,
    pub violations: usize,
    /// Smallest (or largest, for upper bounds) normalized constant seen.
    pub measured_constant: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneCensus {
    pub params: ZoneParams,
    pub num_strips: usize,
    pub samples: usize,
    pub resonant: usize,
    pub non_resonant: usize,
    pub boundary_excluded: usize,
    pub overlapping: usize,
    pub lemmas: Vec<LemmaReport>,
    pub regime_notes: Vec<String>,
    pub violations: Vec<String>,
}

/// Lower bounds for the `>>` relations: a predicate is violated when the
/// normalized quantity falls below this constant. For the first lemma the
/// proof gives `2a|g| - |g|^2 >= a >= rho_n^{1/3}` whenever `|g| <= a`,
/// i.e. the constant 1.
pub const LEMMA_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensusOptions {
    pub samples: usize,
    /// Number of `(k, rho)` pairs for the projection-scheme separation check.
    pub scheme_fibers: usize,
    pub seed: u64,
}

impl Default for CensusOptions {
    fn default() -> Self {
        Self {
            samples: 100_000,
            scheme_fibers: 8,
            seed: 1,
        }
    }
}

struct Acc {
    name: &'static str,
    checked: usize,
    violations: usize,
    best: Option<f64>,
    upper: bool,
    note: String,
}

impl Acc {
    fn new(name: &'static str, upper: bool, note: &str) -> Self {
        Self {
            name,
            checked: 0,
            violations: 0,
            best: None,
            upper,
            note: note.to_string(),
        }
    }

    fn record(&mut self, value: Option<f64>, ok: bool) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
        }
        if let Some(v) = value {
            self.best = Some(match self.best {
                None => v,
                Some(b) if self.upper => b.max(v),
                Some(b) => b.min(v),
            });
        }
    }

    fn report(self) -> LemmaReport {
        LemmaReport {
            name: self.name.to_string(),
            checked: self.checked,
            violations: self.violations,
            measured_constant: self.best,
            note: self.note,
        }
    }
}

fn sample_annulus(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec2 {
    let r = (lo + (hi - lo) * rng.gen::<f64>()).sqrt();
    let phi = 2.0 * PI * rng.gen::<f64>();
    [r * phi.cos(), r * phi.sin()]
}

/// Samples points of the annulus (half uniformly, half inside the strip
/// bands so that the resonance regions are well populated) and evaluates
/// every zone lemma as a predicate.
pub fn zone_census(zones: &Zones, opts: CensusOptions) -> ZoneCensus {
    let p = &zones.params;
    let mt = p.m_tilde;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let big = zones.theta_ball(15 * mt);
    let reach = p.theta_radius(6 * mt);
    let strip_multiples: Vec<Vec<DualVector>> = zones
        .strips
        .iter()
        .map(|s| {
            p.lattice
                .points_in_ball(reach)
                .into_iter()
                .filter(|g| g.m != [0, 0] && cross(g.v, s.theta.v).abs() <= 1e-9 * g.norm() * s.theta.norm())
                .collect()
        })
        .collect();
    let mut xi1 = Acc::new("Xi1", false, "min ||xi+g|^2-|xi|^2| / rho_n^(1/3), xi outside Lambda(theta), g = t theta");
    let mut xi2 = Acc::new("Xi2", true, "max |xi_1 - rho| rho^(1/3) over Xi_2(theta) (measured, no floor)");
    let mut xi4 = Acc::new("Xi4", true, "max of (p~_- - p_-) rho and (a~ - a) rho^(1/3) (measured, no floor)");
    let mut xi5 = Acc::new("Xi5", false, "min ||xi+g|^2-rho^2| / rho^(4/5), xi in Xi_3 ∪ Xi_4, g independent of theta");
    let mut xi7 = Acc::new("Xi7", false, "xi in Xi_5, g in Theta'_15M~, xi+g in A  =>  xi+g in Xi_5");
    let mut xi8 = Acc::new("Xi8", false, "(Xi_5(theta_j1) + Theta_15M~) ∩ Xi_5(theta_j2) empty");
    let mut xi9 = Acc::new("Xi9", false, "Xi_1 ⊂ Xi_5");
    let mut xi10 = Acc::new("Xi10", false, "separation of the Xi_0 sets on plane-wave modes");
    let mut boundary = 0;
    let mut resonant = 0;
    let mut non_resonant = 0;
    let mut overlapping = 0;
    let nl = zones.strips.len();
    // measured extents, once per strip and a few radii
    for l in 0..nl {
        for i in 0..=8 {
            let rho = p.rho_n * (1.0 + 3.0 * i as f64 / 8.0);
            let x = zones.extent(l, rho);
            let c = ((x.p_tilde_minus - x.p_minus) * rho).max((x.a_tilde - x.a) * rho.cbrt());
            xi4.record(Some(c), true);
        }
    }
    for s in 0..opts.samples {
        let rho = p.rho_n * (1.0 + 3.0 * rng.gen::<f64>());
        let (lo, hi) = zones.annulus(rho);
        let xi = if s % 2 == 0 || nl == 0 {
            sample_annulus(&mut rng, lo, hi)
        } else {
            // inside the band Xi_2 ∩ {|eta_2| < a~} of a random strip
            let l = rng.gen_range(0..nl);
            let x = zones.extent(l, rho);
            let mut e;
            loop {
                e = [
                    x.p_minus + (x.p_plus - x.p_minus) * rng.gen::<f64>(),
                    x.a_tilde * (2.0 * rng.gen::<f64>() - 1.0),
                ];
                let r2 = norm2(e);
                if lo <= r2 && r2 <= hi {
                    break;
                }
            }
            zones.strips[l].frame.from_frame(e)
        };
        let lab = zones.label(xi, rho);
        if lab.boundary || lab.kind == ZoneKind::Outside {
            boundary += 1;
            continue;
        }
        match lab.kind {
            ZoneKind::Resonant => resonant += 1,
            ZoneKind::NonResonant => non_resonant += 1,
            ZoneKind::Outside => {}
        }
        if lab.overlap > 1 {
            overlapping += 1;
        }
        let xi_sq = norm2(xi);
        for l in 0..nl {
            let st = &zones.strips[l];
            let e = zones.frame_coords(l, xi);
            if !zones.in_lambda(l, xi) {
                for g in &strip_multiples[l] {
                    let val = (norm2(add(xi, g.v)) - xi_sq).abs() / p.rho_n.cbrt();
                    xi1.record(Some(val), val >= LEMMA_FLOOR);
                }
            }
            if zones.in_xi2(l, xi, rho) {
                xi2.record(Some((e[0] - rho).abs() * rho.cbrt()), true);
            }
            let in3 = zones.in_xi3(l, xi, rho);
            let in4 = zones.in_xi4(l, xi, rho);
            if in3 || in4 {
                for g in &big {
                    if g.m == [0, 0] || cross(g.v, st.theta.v).abs() <= 1e-9 * g.norm() * st.theta.norm() {
                        continue;
                    }
                    let eta = add(xi, g.v);
                    let val = (norm2(eta) - rho * rho).abs() / rho.powf(0.8);
                    let ok = val >= LEMMA_FLOOR && !zones.in_annulus(eta, rho);
                    xi5.record(Some(val), ok);
                }
            }
            if zones.in_xi1(l, xi, rho) {
                xi9.record(None, zones.in_xi5(l, xi, rho));
            }
            if zones.in_xi5(l, xi, rho) {
                for g in &big {
                    let eta = add(xi, g.v);
                    if g.m != [0, 0] && zones.in_annulus(eta, rho) {
                        xi7.record(None, zones.in_xi5(l, eta, rho));
                    }
                    for l2 in 0..nl {
                        if l2 != l {
                            xi8.record(None, !zones.in_xi5(l2, eta, rho));
                        }
                    }
                }
            }
        }
    }
    for f in 0..opts.scheme_fibers {
        let rho = p.rho_n * (1.0 + 3.0 * rng.gen::<f64>());
        let [b1, b2] = p.lattice.dual_basis;
        let t = [rng.gen::<f64>(), rng.gen::<f64>()];
        let k = [t[0] * b1[0] + t[1] * b2[0], t[0] * b1[1] + t[1] * b2[1]];
        let (lo, hi) = zones.annulus(rho);
        let reach = p.theta_radius(8 * mt) + 1.0;
        let basis = shell_basis(&p.lattice, k, lo.max(0.0).sqrt() - reach, hi.sqrt() + reach);
        let bad = zones.xi10_violations(&basis, rho);
        for _ in 0..basis.len().saturating_sub(bad.len()) {
            xi10.record(None, true);
        }
        for _ in &bad {
            xi10.record(None, false);
        }
        let _ = f;
    }
    let lemmas: Vec<LemmaReport> = [xi1, xi2, xi4, xi5, xi7, xi8, xi9, xi10].into_iter().map(Acc::report).collect();
    let violations = lemmas
        .iter()
        .filter(|r| r.violations > 0)
        .map(|r| format!("{}: {} of {} checks violated", r.name, r.violations, r.checked))
        .collect();
    ZoneCensus {
        params: p.clone(),
        num_strips: nl,
        samples: opts.samples,
        resonant,
        non_resonant,
        boundary_excluded: boundary,
        overlapping,
        lemmas,
        regime_notes: p.regime_notes(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::build_basis;

    fn z2() -> Lattice2 {
        Lattice2::square(2.0 * PI).unwrap()
    }

    #[test]
    fn strip_width_examples() {
        assert!((strip_width(1.0, 1000.0) - 10.25).abs() < 1e-12);
        assert!((strip_width(2f64.sqrt(), 1000.0) - 29.0 * 2f64.sqrt() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn strip_width_matches_scan() {
        for &(t, r) in &[(0.7, 50.0), (3.3, 1e4), (20.0, 1e3), (38.0, 1e3), (1.0, 8.0), (5.0, 1.0)] {
            let c: f64 = f64::cbrt(r);
            let want = (1..10_000)
                .map(|j| (2 * j + 1) as f64 * t / 4.0)
                .find(|&a| a >= c)
                .unwrap();
            let a = strip_width(t, r);
            assert!((a - want).abs() < 1e-12, "t={t} r={r}: {a} vs {want}");
            let n = 2.0 * a / t - 0.5;
            assert!((n - n.round()).abs() < 1e-9 && n.round() >= 1.0);
        }
    }

    fn desk_zones() -> Zones {
        let lat = Lattice2::with_square_dual(20.0).unwrap();
        Zones::new(ZoneParams::new(lat, 1000.0, 1, 2.0, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn strips_of_desk_lattice() {
        let z = desk_zones();
        assert_eq!(z.num_strips(), 8);
        assert!((z.strips[0].a - 15.0).abs() < 1e-12);
        assert!((z.strips[1].a - 15.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn axis_point_is_resonant() {
        let z = desk_zones();
        for l in 0..z.num_strips() {
            let rho = 1500.0;
            let xi = z.strips[l].frame.from_frame([rho, 0.0]);
            let lab = z.classify(xi, rho).unwrap();
            assert_eq!(lab.kind, ZoneKind::Resonant);
            assert_eq!(lab.l, l);
        }
    }

    #[test]
    fn bisector_point_is_non_resonant() {
        let z = desk_zones();
        let rho = 2000.0;
        for l in 0..z.num_strips() {
            let a1 = z.strips[l].theta.angle() - PI / 2.0;
            let a2 = z.strips[(l + 1) % z.num_strips()].theta.angle() - PI / 2.0;
            let mut mid = 0.5 * (a1 + a2);
            if a2 < a1 {
                mid += PI;
            }
            let xi = [rho * mid.cos(), rho * mid.sin()];
            for s in &z.strips {
                assert!(s.frame.to_frame(xi)[1].abs() > 2.0 * s.a);
            }
            let lab = z.classify(xi, rho).unwrap();
            assert_eq!(lab.kind, ZoneKind::NonResonant);
            assert_eq!(lab.l, l);
            let th_l = z.strips[l].theta.v;
            let th_n = z.strips[(l + 1) % z.num_strips()].theta.v;
            assert!(dot(xi, th_l) > 0.0 && dot(xi, th_n) < 0.0);
        }
    }

    #[test]
    fn outside_rejected() {
        let z = desk_zones();
        assert!(matches!(z.classify([10.0, 0.0], 1000.0), Err(Error::OutsideAnnulus(..))));
    }

    /// Literal evaluation of the set chain: the extremal quantities are
    /// obtained by maximizing / minimizing over a fine parametrization of
    /// the arcs bounding Xi_1 and Xi_4 rather than from the closed forms.
    fn literal_xi5(z: &Zones, l: usize, xi: Vec2, rho: f64) -> bool {
        let s = &z.strips[l];
        let (lo, hi) = z.annulus(rho);
        let n = 4001;
        // p_-: inf eta_1 over the region |eta|^2 >= lo, |eta_2| < a
        let mut p_minus = f64::INFINITY;
        let mut p_plus = 0.0f64;
        for i in 0..n {
            let e2 = -s.a + 2.0 * s.a * i as f64 / (n - 1) as f64;
            p_minus = p_minus.min((lo - e2 * e2).sqrt());
            p_plus = p_plus.max((hi - e2 * e2).sqrt());
        }
        let e = s.frame.to_frame(xi);
        let in2 = |e1: f64| p_minus < e1 && e1 < p_plus;
        let in3 = in2(e[0]) && e[1].abs() < s.a;
        if !in3 {
            return false;
        }
        let t = s.theta.norm();
        for j in -200i64..=200 {
            if j == 0 {
                continue;
            }
            let e2 = e[1] + j as f64 * t;
            let r2 = e[0] * e[0] + e2 * e2;
            if in2(e[0]) && lo <= r2 && r2 <= hi && e2.abs() >= s.a {
                return false;
            }
        }
        true
    }

    #[test]
    fn classify_agrees_with_literal_oracle() {
        let z = desk_zones();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut res = 0;
        for i in 0..2000 {
            let rho = 1000.0 + 3000.0 * rng.gen::<f64>();
            let (lo, hi) = z.annulus(rho);
            let xi = if i % 2 == 0 {
                sample_annulus(&mut rng, lo, hi)
            } else {
                let l = rng.gen_range(0..z.num_strips());
                let x = z.extent(l, rho);
                z.strips[l].frame.from_frame([
                    x.p_minus + (x.p_plus - x.p_minus) * rng.gen::<f64>(),
                    x.a_tilde * (2.0 * rng.gen::<f64>() - 1.0),
                ])
            };
            let lab = z.label(xi, rho);
            if lab.boundary || lab.kind == ZoneKind::Outside {
                continue;
            }
            let lit: Vec<usize> = (0..z.num_strips()).filter(|&l| literal_xi5(&z, l, xi, rho)).collect();
            match lab.kind {
                ZoneKind::Resonant => {
                    res += 1;
                    assert_eq!(lit, vec![lab.l]);
                }
                _ => assert!(lit.is_empty()),
            }
        }
        assert!(res > 200);
    }

    #[test]
    fn extent_matches_arc_optimization() {
        let z = desk_zones();
        let rho = 1234.5;
        for l in 0..2 {
            let x = z.extent(l, rho);
            let (lo, hi) = z.annulus(rho);
            // sup eta_1 over Xi_4: on the outer arc at |eta_2| = a
            let mut pt = 0.0f64;
            let mut at = 0.0f64;
            for i in 0..20001 {
                let e1 = x.p_minus + (x.p_plus - x.p_minus) * i as f64 / 20000.0;
                let top = (hi - e1 * e1).max(0.0).sqrt();
                if top >= x.a {
                    pt = pt.max(e1);
                    at = at.max(top);
                }
            }
            assert!((pt - x.p_tilde_minus).abs() < 1e-3, "{pt} {}", x.p_tilde_minus);
            assert!((at - x.a_tilde).abs() < 1e-3);
            assert!(((lo - x.a * x.a).sqrt() - x.p_minus).abs() < 1e-9);
        }
    }

    #[test]
    fn upsilon_examples() {
        // non-resonant class on Z^2 with Theta_{M~} = Z^2 ∩ B(2): 13 points
        let p = ZoneParams::new(z2(), 1000.0, 1, 2.0 / 3.0, 0.5).unwrap();
        let z = Zones::new(p).unwrap();
        let rho = 1000.0;
        let ang = 0.3f64;
        let mut xi = [rho * ang.cos(), rho * ang.sin()];
        let mut tries = 0;
        while z.label(xi, rho).kind != ZoneKind::NonResonant {
            tries += 1;
            let a = ang + 0.01 * tries as f64;
            xi = [rho * a.cos(), rho * a.sin()];
        }
        let u = z.upsilon(xi, rho).unwrap();
        assert_eq!(u.kind, ClassKind::NonResonant);
        assert_eq!(u.len(), 13);

        let z = desk_zones();
        let xi = z.strips[0].frame.from_frame([1500.0, 3.0]);
        let u = z.upsilon(xi, 1500.0).unwrap();
        assert_eq!(u.kind, ClassKind::Resonant(0));
        // eta_2 = 3 + 20 j in (-15, 15): j in {-0, ...}: only j = 0
        let e2s: Vec<f64> = u
            .core
            .iter()
            .map(|&m| z.frame_coords(0, add(z.params.lattice.dual_vector(m), u.k))[1])
            .collect();
        let t = z.strips[0].theta.norm();
        let want = (-50i64..=50).filter(|j| (3.0 + *j as f64 * t).abs() < z.strips[0].a).count();
        assert_eq!(u.core.len(), want);
        assert!(e2s.iter().all(|e| e.abs() < z.strips[0].a));
        for &m in &u.core {
            let eta = add(z.params.lattice.dual_vector(m), u.k);
            let v = z.upsilon(eta, 1500.0).unwrap();
            assert_eq!(v.members, u.members);
        }
        let lat = &z.params.lattice;
        for &m in &u.members {
            let fp = lat.split(add(lat.dual_vector(m), u.k)).fractional_part;
            assert!(norm(sub(fp, u.k)) < 1e-9);
        }
    }

    #[test]
    fn projection_scheme_partition_small() {
        // tiny rho_n: full basis, literal oracle for each block
        let lat = z2();
        let p = ZoneParams::new(lat.clone(), 30.0, 1, 1.0, 0.02).unwrap().with_strip_radius(1.0);
        let z = Zones::new(p).unwrap();
        let rho = 8.0;
        let k = [0.31, 0.17];
        let e_max = ((z.annulus(rho).1).sqrt() + 7.0 * 3.0 + 1.0).powi(2);
        let basis = build_basis(&lat, k, e_max).unwrap();
        let s = z.projection_scheme(&basis, rho, true).unwrap();
        assert_eq!(s.total(), basis.len());
        let mut seen = vec![false; basis.len()];
        for fam in &s.blocks {
            for b in fam {
                for &i in b {
                    assert!(!seen[i]);
                    seen[i] = true;
                }
            }
        }
        for &i in &s.q {
            assert!(!seen[i]);
            seen[i] = true;
        }
        assert!(seen.iter().all(|&x| x));
        // literal membership for P^0_0 and strip blocks
        let all = lat.points_in_ball(30.0);
        for i in 0..basis.len() {
            let eta = basis.point(i);
            let in_b = z.in_b(eta, rho);
            if in_b {
                assert!(s.blocks[0][0].contains(&i));
            }
            for l in 0..z.num_strips() {
                let lit6 = all
                    .iter()
                    .filter(|g| g.norm() <= 18.0 + 1e-9)
                    .any(|g| z.in_xi5(l, sub(eta, g.v), rho));
                if lit6 && s.conflicts.is_empty() {
                    assert!(s.blocks[l + 1][0].contains(&i) || in_b);
                }
            }
        }
        // a mode far away lands in Q
        let far = basis.len() - 1;
        assert!(basis.kinetic(far) > 4.0 * rho * rho);
        assert!(s.q.contains(&far));
        // insufficient cutoff is rejected
        let small = build_basis(&lat, k, 10.0).unwrap();
        assert!(matches!(z.projection_scheme(&small, rho, true), Err(Error::CutoffTooSmall(_))));
    }

    #[test]
    fn shell_basis_matches_filter() {
        let lat = Lattice2::new([[1.0, 0.3], [0.2, 1.1]]).unwrap();
        let k = [0.4, -0.2];
        let s = shell_basis(&lat, k, 20.0, 23.0);
        let full = build_basis(&lat, k, 23.0f64.powi(2)).unwrap();
        let want: BTreeSet<[i64; 2]> = (0..full.len())
            .filter(|&i| full.kinetic(i) >= 400.0)
            .map(|i| full.modes[i])
            .collect();
        let got: BTreeSet<[i64; 2]> = s.modes.iter().copied().collect();
        assert_eq!(got, want);
    }

    #[test]
    fn small_census_clean_on_desk_lattice() {
        let z = desk_zones();
        let c = zone_census(
            &z,
            CensusOptions {
                samples: 4000,
                scheme_fibers: 1,
                seed: 3,
            },
        );
        assert!(c.violations.is_empty(), "{:?}", c.violations);
        assert!(c.resonant > 100 && c.non_resonant > 100);
    }
}
