//! Volume of `{g < rho^2}` away from and inside the resonance strips.
//!
//! Between consecutive strips `theta_l`, `theta_{l+1}` the sector is
//! parametrized by polar coordinates about the corner `nu_l` where the two
//! strip boundaries meet; the level set `g = rho^2` is the radius `r_1(Phi)`
//! found by a contraction. Inside a strip the level set is `eta_1 = q(eta_2)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{norm, norm2, Frame, Vec2};
use crate::perturb::{class_spectrum, g_value};
use crate::potential::TrigPotential;
use crate::resonance;
use crate::zones::{ClassKind, Zones};

/// Polar coordinates `(r, Phi)` about the corner `nu` of sector `l`, with
/// `Phi` measured from `theta_l^perp` towards `theta_{l+1}^perp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoPolar {
    pub l: usize,
    pub frame: Frame,
    pub a: f64,
    pub phi_l: f64,
    /// `nu` in frame coordinates `(a cot phi_l, a)`.
    pub nu_frame: Vec2,
    pub nu: Vec2,
}

impl PseudoPolar {
    pub fn new(frame: Frame, a: f64, phi_l: f64, l: usize) -> Result<Self> {
        Self::with_widths(frame, a, a, phi_l, l)
    }

    /// Corner of strips of half-widths `a` (strip `l`) and `a_next`:
    /// `<nu, n(theta_l)> = a`, `<nu, n(theta_{l+1})> = -a_next`.
    pub fn with_widths(frame: Frame, a: f64, a_next: f64, phi_l: f64, l: usize) -> Result<Self> {
        if !(phi_l > 0.0 && phi_l < std::f64::consts::FRAC_PI_2) || a <= 0.0 || a_next <= 0.0 {
            return Err(Error::DomainError(format!("sector half-angle {phi_l}, widths {a}, {a_next}")));
        }
        let t = 2.0 * phi_l;
        let nu_frame = [(a_next + a * t.cos()) / t.sin(), a];
        Ok(Self {
            l,
            frame,
            a,
            phi_l,
            nu_frame,
            nu: frame.from_frame(nu_frame),
        })
    }

    /// Sector `l` of a zone construction: between strip `l` and the next
    /// strip in angular order.
    pub fn for_sector(zones: &Zones, l: usize) -> Result<Self> {
        let n = zones.strips.len();
        if n < 3 {
            return Err(Error::DomainError("fewer than three strips".into()));
        }
        let s = &zones.strips[l];
        let next = &zones.strips[(l + 1) % n];
        let mut gap = next.theta.angle() - s.theta.angle();
        if gap <= 0.0 {
            gap += 2.0 * std::f64::consts::PI;
        }
        Self::with_widths(s.frame, s.a, next.a, gap / 2.0, l)
    }

    /// `(<nu, e_Phi>, nu x e_Phi)`: with these, `|nu + r e_Phi| = rho` at
    /// `r = -P + sqrt(rho^2 - Q^2)`.
    fn corner_terms(&self, phi: f64) -> (f64, f64) {
        let (c, s) = (phi.cos(), phi.sin());
        let [x, y] = self.nu_frame;
        (x * c + y * s, x * s - y * c)
    }

    /// Radius along the ray `Phi` where `|xi| = rho`.
    pub fn r0(&self, phi: f64, rho: f64) -> Result<f64> {
        let (p, q) = self.corner_terms(phi);
        let rad = rho * rho - q * q;
        if rad <= 0.0 {
            return Err(Error::DomainError(format!("radicand {rad} at Phi = {phi}")));
        }
        Ok(-p + rad.sqrt())
    }

    /// `H(r) = -P + sqrt(rho^2 - G(r, Phi) - Q^2)`.
    fn h_map<F: Fn(f64, f64) -> Result<f64>>(&self, phi: f64, rho: f64, g: &F, r: f64) -> Result<f64> {
        let (p, q) = self.corner_terms(phi);
        let rad = rho * rho - g(r, phi)? - q * q;
        if rad <= 0.0 {
            return Err(Error::DomainError(format!("radicand {rad} at r = {r}")));
        }
        Ok(-p + rad.sqrt())
    }

    /// Fixed point `r_1` of `H` starting from `r_0`.
    pub fn contraction<F: Fn(f64, f64) -> Result<f64>>(&self, phi: f64, rho: f64, g: F) -> Result<ContractionTrace> {
        let start = self.r0(phi, rho)?;
        let tol = 1e-12 * rho;
        let mut iterates = vec![start];
        let mut steps: Vec<f64> = Vec::new();
        for _ in 0..100 {
            let r = *iterates.last().unwrap();
            let next = self.h_map(phi, rho, &g, r)?;
            let step = (next - r).abs();
            iterates.push(next);
            if let Some(&prev) = steps.last() {
                // a genuine expansion, not rounding noise
                if step >= prev && prev > 1e3 * f64::EPSILON * rho {
                    return Err(Error::NoContraction(step / prev));
                }
            }
            steps.push(step);
            if step <= tol && (next - self.h_map(phi, rho, &g, next)?).abs() <= tol {
                return Ok(ContractionTrace {
                    r0: start,
                    r1: next,
                    iterates,
                    steps,
                });
            }
        }
        Err(Error::NoContraction(1.0))
    }

    /// `|H'(r)|` by a central difference of width `2 delta`: the asymptotic
    /// per-step error ratio of the contraction near its fixed point.
    pub fn contraction_factor<F>(&self, phi: f64, rho: f64, g: F, r: f64, delta: f64) -> Result<f64>
    where
        F: Fn(f64, f64) -> Result<f64>,
    {
        Ok(((self.h_map(phi, rho, &g, r + delta)? - self.h_map(phi, rho, &g, r - delta)?) / (2.0 * delta)).abs())
    }

    pub fn nu_norm(&self) -> f64 {
        norm(self.nu)
    }

    pub fn to_pseudo_polar(&self, xi: Vec2) -> (f64, f64) {
        let e = self.frame.to_frame(xi);
        let d = [e[0] - self.nu_frame[0], e[1] - self.nu_frame[1]];
        (norm(d), d[1].atan2(d[0]))
    }

    pub fn from_pseudo_polar(&self, r: f64, phi: f64) -> Vec2 {
        self.frame
            .from_frame([self.nu_frame[0] + r * phi.cos(), self.nu_frame[1] + r * phi.sin()])
    }

    /// `|det d(x, y)/d(r, Phi)|` by central differences.
    pub fn jacobian(&self, r: f64, phi: f64) -> f64 {
        let h = 1e-6 * (1.0 + r);
        let k = 1e-6;
        let dr = |s: f64| self.from_pseudo_polar(r + s, phi);
        let dp = |s: f64| self.from_pseudo_polar(r, phi + s);
        let (a, b) = (dr(h), dr(-h));
        let (c, d) = (dp(k), dp(-k));
        let xr = [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)];
        let xp = [(c[0] - d[0]) / (2.0 * k), (c[1] - d[1]) / (2.0 * k)];
        (xr[0] * xp[1] - xr[1] * xp[0]).abs()
    }
}

fn corner_terms(phi: f64, a: f64, phi_l: f64) -> (f64, f64) {
    let s = phi_l.sin();
    (a * (phi_l - phi).cos() / s, a * (phi_l - phi).sin() / s)
}

fn symmetric(a: f64, phi_l: f64) -> Result<PseudoPolar> {
    PseudoPolar::new(Frame::new([0.0, 1.0]), a, phi_l, 0)
}

/// Radius along the ray `Phi` where `|xi| = rho`, for equal strip widths.
pub fn r0(phi: f64, rho: f64, a: f64, phi_l: f64) -> Result<f64> {
    symmetric(a, phi_l)?.r0(phi, rho)
}

/// Coefficients `p_1..p_order` of `r_0 = rho (1 + sum p_j rho^-j)`.
pub fn r0_coefficients(phi: f64, a: f64, phi_l: f64, order: usize) -> Vec<f64> {
    let (p, q) = corner_terms(phi, a, phi_l);
    (1..=order)
        .map(|j| {
            if j == 1 {
                -p
            } else if j % 2 == 1 {
                0.0
            } else {
                let m = (j / 2) as i32;
                binom_half(m) * (-1f64).powi(m) * q.powi(2 * m)
            }
        })
        .collect()
}

/// `binom(1/2, m)`.
fn binom_half(m: i32) -> f64 {
    (0..m).fold(1.0, |acc, i| acc * (0.5 - i as f64) / (i as f64 + 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionTrace {
    pub r0: f64,
    pub r1: f64,
    /// Iterates `r~_0 = r_0, r~_1, ...`.
    pub iterates: Vec<f64>,
    /// `|r~_{m+1} - r~_m|`.
    pub steps: Vec<f64>,
}

impl ContractionTrace {
    /// Successive step ratios `steps[m+1] / steps[m]` above the noise floor.
    pub fn ratios(&self, floor: f64) -> Vec<f64> {
        self.steps
            .windows(2)
            .filter(|w| w[0] > floor && w[1] > floor)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// Fixed point of `H(r) = -a cos(phi_l - Phi)/sin phi_l
/// + sqrt(rho^2 - G(r, Phi) - a^2 sin^2(phi_l - Phi)/sin^2 phi_l)`.
pub fn contraction_solve<F>(phi: f64, rho: f64, a: f64, phi_l: f64, g: F) -> Result<ContractionTrace>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    symmetric(a, phi_l)?.contraction(phi, rho, g)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

// ---------------------------------------------------------------------------
// Quadrature

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Panel edges on `[0, 2 phi_l]` graded geometrically (ratio 2) towards both
/// ends, the smallest panel being `h0`.
pub fn graded_panels(phi_l: f64, h0: f64) -> Vec<f64> {
    let mut half = vec![0.0];
    let mut h = h0.min(phi_l);
    while *half.last().unwrap() + h < phi_l {
        half.push(half.last().unwrap() + h);
        h *= 2.0;
    }
    if phi_l - half.last().unwrap() < 0.25 * h / 2.0 && half.len() > 1 {
        half.pop();
    }
    half.push(phi_l);
    let mut edges = half.clone();
    for &x in half.iter().rev().skip(1) {
        edges.push(2.0 * phi_l - x);
    }
    edges
}

fn panel_sum<F: FnMut(f64) -> Result<f64>>(edges: &[f64], nodes: &(Vec<f64>, Vec<f64>), f: &mut F) -> Result<f64> {
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for (x, wt) in nodes.0.iter().zip(&nodes.1) {
            total += wt * h * f(c + h * x)?;
        }
    }
    Ok(total)
}

fn split_panels(edges: &[f64]) -> Vec<f64> {
    let mut out = vec![edges[0]];
    for w in edges.windows(2) {
        out.push(0.5 * (w[0] + w[1]));
        out.push(w[1]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorVolumeReport {
    pub l: usize,
    pub rho: f64,
    /// `vol(A^+ ∩ B_l) - vol(A^- ∩ B_l)`.
    pub value: f64,
    pub quadrature_error: f64,
    pub panels: usize,
    /// Largest step ratio seen in the contractions.
    pub max_ratio: f64,
}

/// `1/2 int_0^{2 phi_l} (r_1^2 - r_0^2) dPhi` for a correction `G(r, Phi)`.
pub fn sector_integral<F>(pp: &PseudoPolar, rho: f64, g: F) -> Result<SectorVolumeReport>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let nodes = gauss_legendre(8);
    let mut max_ratio = 0.0f64;
    let mut integrand = |phi: f64| -> Result<f64> {
        let tr = pp.contraction(phi, rho, &g)?;
        for r in tr.ratios(1e-13 * rho) {
            max_ratio = max_ratio.max(r);
        }
        // r_1^2 - r_0^2 without cancellation
        Ok(0.5 * (tr.r1 - tr.r0) * (tr.r1 + tr.r0))
    };
    let edges = graded_panels(pp.phi_l, 0.25 * (pp.a.min(pp.nu_frame[1]) / rho).min(pp.phi_l));
    let coarse = panel_sum(&edges, &nodes, &mut integrand)?;
    let fine_edges = split_panels(&edges);
    let fine = panel_sum(&fine_edges, &nodes, &mut integrand)?;
    Ok(SectorVolumeReport {
        l: pp.l,
        rho,
        value: fine,
        quadrature_error: (fine - coarse).abs(),
        panels: fine_edges.len() - 1,
        max_ratio,
    })
}

/// `g(xi) - |xi|^2` from the class eigenvalue, as a function of `(r, Phi)`.
pub fn numeric_correction<'a>(
    zones: &'a Zones,
    v: &'a TrigPotential,
    pp: PseudoPolar,
    rho: f64,
) -> impl Fn(f64, f64) -> Result<f64> + 'a {
    move |r, phi| {
        let xi = pp.from_pseudo_polar(r, phi);
        Ok(g_value(zones, v, xi, rho)?.0 - norm2(xi))
    }
}

/// Second-order Rayleigh-Schrodinger correction as a function of `(r, Phi)`.
pub fn rs2_correction<'a>(v: &'a TrigPotential, r_n: f64, pp: PseudoPolar) -> impl Fn(f64, f64) -> Result<f64> + 'a {
    move |r, phi| {
        let xi = pp.from_pseudo_polar(r, phi);
        Ok(crate::perturb::rayleigh_schrodinger2(xi, v, r_n)? - norm2(xi))
    }
}

pub fn sector_volume(zones: &Zones, v: &TrigPotential, l: usize, rho: f64) -> Result<SectorVolumeReport> {
    let pp = PseudoPolar::for_sector(zones, l)?;
    if rho <= 2.0 * pp.nu_norm() {
        return Err(Error::DomainError(format!("rho = {rho} inside the sector corner region")));
    }
    sector_integral(&pp, rho, numeric_correction(zones, v, pp, rho))
}

// ---------------------------------------------------------------------------
// Model integrals

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `int_0^phi Phi^k / (c + Phi)^m dPhi` in closed form, expanding
/// `Phi^k = ((c + Phi) - c)^k`.
pub fn model_integral(k: u32, m: u32, c: f64, phi: f64) -> f64 {
    let (x0, x1) = (c, c + phi);
    let mut total = 0.0;
    for i in 0..=k {
        let coef = binom(k, i) * (-c).powi((k - i) as i32);
        let p = i as i32 - m as i32;
        total += coef
            * if p == -1 {
                (x1 / x0).ln()
            } else {
                (x1.powi(p + 1) - x0.powi(p + 1)) / (p + 1) as f64
            };
    }
    total
}

/// Whether the closed form of [`model_integral`] carries a `ln((c + phi)/c)`
/// term.
pub fn model_integral_has_log(k: u32, m: u32) -> bool {
    1 <= m && m <= k + 1
}

// ---------------------------------------------------------------------------
// Strips

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripNode {
    pub eta2: f64,
    pub q: f64,
    /// The crossing point lies in the strip's resonance zone and `q` came
    /// from the reduced pencil.
    pub resonant: bool,
    pub paired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripVolumeReport {
    pub l: usize,
    pub rho: f64,
    /// `int_{-a}^{a} (q(eta_2) - sqrt(rho^2 - eta_2^2)) d eta_2`.
    pub value: f64,
    pub quadrature_error: f64,
    pub nodes: Vec<StripNode>,
}

/// Crossing radius along the line `eta_2 = const` of strip `l` by bracketing
/// `g = rho^2` with the class evaluator.
pub fn crossing_direct(zones: &Zones, v: &TrigPotential, l: usize, eta2: f64, rho: f64) -> Result<f64> {
    let frame = zones.strips[l].frame;
    let band = 2.0 * zones.params.v + 1e-9 * rho * rho;
    let lo = (rho * rho - band - eta2 * eta2).sqrt();
    let hi = (rho * rho + band - eta2 * eta2).sqrt();
    let f = |r: f64| -> Result<f64> { Ok(g_value(zones, v, frame.from_frame([r, eta2]), rho)?.0 - rho * rho) };
    let (flo, fhi) = (f(lo)?, f(hi)?);
    // g may jump where the zone label changes, so plain bisection
    let (mut a, mut b, mut fa) = (lo, hi, flo);
    if flo * fhi > 0.0 {
        return Err(Error::NoRoot(format!("g - rho^2 keeps its sign on the strip line eta_2 = {eta2}")));
    }
    while b - a > 1e-13 * rho {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Crossing radius through the reduced pencil when the crossing point is a
/// resonant point of strip `l`; `None` otherwise.
pub fn crossing_reduced(
    zones: &Zones,
    v: &TrigPotential,
    l: usize,
    eta2: f64,
    rho: f64,
    delta0: f64,
) -> Result<Option<(f64, bool)>> {
    let frame = zones.strips[l].frame;
    let guess = (rho * rho - eta2 * eta2).sqrt();
    let xi = frame.from_frame([guess, eta2]);
    let cs = class_spectrum(zones, &v.truncate(zones.params.r_n), xi, rho)?;
    if cs.class.kind != ClassKind::Resonant(l) {
        return Ok(None);
    }
    let (pencil, _) = resonance::build_pencil(zones, v, xi, rho)?;
    let Some(pairing) = resonance::pairing_at(&pencil, eta2, delta0)? else {
        return Ok(None);
    };
    let r_min = zones.params.rho_n.powf(0.75);
    let br = pairing.branch_of(eta2);
    let q = resonance::solve_q(&pencil, &pairing.taus, rho, br, pairing.c2, r_min)?;
    // the crossing itself must still be resonant in strip l
    let at = frame.from_frame([q, eta2]);
    if zones.upsilon(at, rho)?.kind != ClassKind::Resonant(l) {
        return Ok(None);
    }
    Ok(Some((q, pairing.taus.len() == 2)))
}

/// Strip contribution on a grid of spacing `|theta|/per_period` (so that
/// shifts by `theta` map grid to grid), trapezoid rule, with the coarse
/// half-grid as the error estimate.
pub fn strip_volume(zones: &Zones, v: &TrigPotential, l: usize, rho: f64, per_period: usize, delta0: f64) -> Result<StripVolumeReport> {
    let s = &zones.strips[l];
    let a = s.a;
    let h = s.theta.norm() / per_period as f64;
    let n = (2.0 * a / h).floor() as i64;
    let start = -(n as f64) * h / 2.0;
    let mut nodes = Vec::new();
    for i in 0..=n {
        let eta2 = start + i as f64 * h;
        let node = match crossing_reduced(zones, v, l, eta2, rho, delta0)? {
            Some((q, paired)) => StripNode {
                eta2,
                q,
                resonant: true,
                paired,
            },
            None => StripNode {
                eta2,
                q: crossing_direct(zones, v, l, eta2, rho)?,
                resonant: false,
                paired: false,
            },
        };
        nodes.push(node);
    }
    let f: Vec<f64> = nodes
        .iter()
        .map(|nd| {
            let free = (rho * rho - nd.eta2 * nd.eta2).sqrt();
            nd.q - free
        })
        .collect();
    let trap = |step: usize| -> f64 {
        let idx: Vec<usize> = (0..f.len()).step_by(step).collect();
        let hh = h * step as f64;
        let mut t = 0.0;
        for w in idx.windows(2) {
            t += 0.5 * hh * (f[w[0]] + f[w[1]]);
        }
        t
    };
    let fine = trap(1);
    let coarse = trap(2);
    // the uncovered ends of [-a, a] carry the edge values
    let covered = n as f64 * h;
    let ends = 0.5 * (2.0 * a - covered) * (f[0] + f[f.len() - 1]);
    Ok(StripVolumeReport {
        l,
        rho,
        value: fine + ends,
        quadrature_error: (fine - coarse).abs() + ends.abs(),
        nodes,
    })
}

// ---------------------------------------------------------------------------
// Bookkeeping

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeBookkeeping {
    pub rho: f64,
    pub sectors: Vec<SectorVolumeReport>,
    pub strips: Vec<StripVolumeReport>,
    /// `pi rho^2 + sum of all contributions`.
    pub total: f64,
    pub quadrature_error: f64,
}

pub fn volume_bookkeeping(zones: &Zones, v: &TrigPotential, rho: f64, per_period: usize, delta0: f64) -> Result<VolumeBookkeeping> {
    let n = zones.strips.len();
    let sectors: Vec<_> = (0..n).map(|l| sector_volume(zones, v, l, rho)).collect::<Result<_>>()?;
    let strips: Vec<_> = (0..n)
        .map(|l| strip_volume(zones, v, l, rho, per_period, delta0))
        .collect::<Result<_>>()?;
    let sum: f64 = sectors.iter().map(|s| s.value).sum::<f64>() + strips.iter().map(|s| s.value).sum::<f64>();
    let err = sectors.iter().map(|s| s.quadrature_error).sum::<f64>() + strips.iter().map(|s| s.quadrature_error).sum::<f64>();
    Ok(VolumeBookkeeping {
        rho,
        sectors,
        strips,
        total: std::f64::consts::PI * rho * rho + sum,
        quadrature_error: err,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McVolume {
    pub samples: usize,
    /// Estimate of `vol{g < rho^2}`.
    pub estimate: f64,
    pub std_err: f64,
    /// Samples with `|g - |xi|^2| > 2v` (outside the assumed band).
    pub band_violations: usize,
}

/// Monte-Carlo volume of `{g < rho^2}`: the disk `|xi| < rho` is the control
/// variate, so only the band `| |xi|^2 - rho^2 | <= 4v` is sampled, uniformly
/// in area.
pub fn mc_volume(zones: &Zones, v: &TrigPotential, rho: f64, samples: usize, seed: u64) -> Result<McVolume> {
    let w = 4.0 * zones.params.v;
    let (lo, hi) = (rho * rho - w, rho * rho + w);
    let area = std::f64::consts::PI * (hi - lo);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut band_violations = 0;
    for _ in 0..samples {
        let r2 = rng.gen_range(lo..hi);
        let t = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
        let xi = [r2.sqrt() * t.cos(), r2.sqrt() * t.sin()];
        let g = g_value(zones, v, xi, rho)?.0;
        if (g - r2).abs() > 2.0 * zones.params.v {
            band_violations += 1;
        }
        let x = f64::from(g < rho * rho) - f64::from(r2 < rho * rho);
        s1 += x;
        s2 += x * x;
    }
    let n = samples as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) / (n - 1.0).max(1.0);
    Ok(McVolume {
        samples,
        estimate: std::f64::consts::PI * rho * rho + area * mean,
        std_err: area * var.sqrt(),
        band_violations,
    })
}
