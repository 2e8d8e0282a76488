use std::f64::consts::PI;
use std::path::Path;

use ids_core::ids::{self, IdsMethod, IdsOptions, IdsSample};
use ids_core::lattice::{DualVector, Lattice2, Vec2};
use ids_core::nonres;
use ids_core::perturb;
use ids_core::potential::TrigPotential;
use ids_core::resonance::{self, Branch};
use ids_core::zones::{self, CensusOptions, ZoneParams, Zones};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{Command, Failure, FitArgs, IdsArgs, PerturbArgs, Reduce1dArgs, RunConfig, SchurArgs, VolumesArgs, ZoneArgs, ZonesArgs};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the report and echoes a one-line summary to stdout.
fn report(cfg: &RunConfig, name: &str, value: &serde_json::Value) -> Result<(), Failure> {
    let path = cfg.out.join(name);
    write_json(&path, value)?;
    let nviol = value["violations"].as_array().map_or(0, |v| v.len());
    println!("{}: {} violation(s)", path.display(), nviol);
    Ok(())
}

pub fn dispatch(cfg: &RunConfig) -> Result<(), Failure> {
    match &cfg.command {
        Command::Ids(a) => cmd_ids(cfg, a),
        Command::Zones(a) => cmd_zones(cfg, a),
        Command::PerturbCheck(a) => cmd_perturb(cfg, a),
        Command::Reduce1d(a) => cmd_reduce1d(cfg, a),
        Command::SchurCheck(a) => cmd_schur(cfg, a),
        Command::Volumes(a) => cmd_volumes(cfg, a),
        Command::FitAsymptotics(a) => cmd_fit(cfg, a),
    }
}

fn load_potential(path: &Path) -> Result<TrigPotential, Failure> {
    TrigPotential::load(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn strip_vector(lat: &Lattice2, m: &[i64]) -> Result<DualVector, Failure> {
    let &[m1, m2] = m else {
        return Err(Failure::Config(format!("--theta needs two integers, got {m:?}")));
    };
    if m1 == 0 && m2 == 0 {
        return Err(Failure::Config("--theta must be nonzero".into()));
    }
    Ok(DualVector {
        m: [m1, m2],
        v: lat.dual_vector([m1, m2]),
    })
}

// ---------------------------------------------------------------------------
// ids / fit-asymptotics

#[derive(Debug, Serialize, Deserialize)]
struct IdsRow {
    lambda: f64,
    #[serde(rename = "N")]
    n: f64,
    #[serde(rename = "N_tilde")]
    n_tilde: f64,
    grid: usize,
    #[serde(rename = "E_max")]
    e_max: f64,
    residual: f64,
}

fn sample_energies(a: &IdsArgs) -> Result<Vec<f64>, Failure> {
    if !a.lambda.is_empty() {
        if a.rho_base.is_some() {
            return Err(Failure::Config("give either --lambda or --rho-base, not both".into()));
        }
        return Ok(a.lambda.clone());
    }
    let Some(rb) = a.rho_base else {
        return Err(Failure::Config("one of --lambda or --rho-base is required".into()));
    };
    if !(rb > 0.0) || a.samples < 2 {
        return Err(Failure::Config(format!("need rho_base > 0 and samples >= 2 (got {rb}, {})", a.samples)));
    }
    let n = a.samples - 1;
    Ok((0..=n).map(|i| (rb * (1.0 + i as f64 / n as f64)).powi(2)).collect())
}

/// Fit plus bootstrap errors; a failed fit is reported, not fatal.
fn fit_report(pts: &[(f64, f64)], k: usize, resamples: usize, seed: u64) -> serde_json::Value {
    match ids::fit_expansion_points(pts, k) {
        Ok(fit) => {
            let boot = ids::bootstrap_se(pts, k, resamples, seed);
            let (bse, bse_hat) = match &boot {
                Ok((e, eh)) => (json!(e), json!(eh)),
                Err(_) => (json!(null), json!(null)),
            };
            let ratio: Vec<f64> = match &boot {
                Ok((_, eh)) => fit.e_hat.iter().zip(eh).map(|(c, s)| c.abs() / s).collect(),
                Err(_) => Vec::new(),
            };
            json!({
                "fit": fit,
                "bootstrap_se": bse,
                "bootstrap_se_hat": bse_hat,
                "e_hat_over_bootstrap_se": ratio,
                "fit_error": null,
            })
        }
        Err(e) => json!({ "fit": null, "fit_error": e.to_string() }),
    }
}

fn cmd_ids(cfg: &RunConfig, a: &IdsArgs) -> Result<(), Failure> {
    let v = load_potential(&a.potential)?;
    let lambdas = sample_energies(a)?;
    if a.grid == 0 {
        return Err(Failure::Config("--grid must be positive".into()));
    }
    let opts = IdsOptions {
        grid: a.grid,
        e_max: a.e_max,
        method: IdsMethod::Auto,
    };
    let samples: Vec<IdsSample> = ids::ids_curve(&v, &lambdas, opts)?;
    let rows: Vec<IdsRow> = samples
        .iter()
        .map(|s| IdsRow {
            lambda: s.lambda,
            n: s.n,
            n_tilde: s.n_tilde,
            grid: s.grid,
            e_max: s.e_max,
            residual: ids::residual_of(&v, s),
        })
        .collect();
    write_csv(&cfg.out.join("ids.csv"), &rows)?;
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.rho(), s.n)).collect();
    let mut rep = fit_report(&pts, a.k, a.bootstrap, a.seed);
    rep["potential"] = json!(v.stats());
    rep["samples"] = json!(rows.len());
    rep["max_abs_residual"] = json!(rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max));
    rep["violations"] = json!([]);
    report(cfg, "ids_fit.json", &rep)
}

fn cmd_fit(cfg: &RunConfig, a: &FitArgs) -> Result<(), Failure> {
    let mut rd = csv::Reader::from_path(&a.input)?;
    let mut pts = Vec::new();
    for row in rd.deserialize() {
        let r: IdsRow = row?;
        if !(r.lambda > 0.0) {
            return Err(Failure::Config(format!("non-positive lambda {} in {}", r.lambda, a.input.display())));
        }
        pts.push((r.lambda.sqrt(), r.n));
    }
    let mut rep = fit_report(&pts, a.k, a.bootstrap, a.seed);
    rep["samples"] = json!(pts.len());
    rep["violations"] = json!([]);
    report(cfg, "fit.json", &rep)
}

// ---------------------------------------------------------------------------
// zones / perturb-check

fn build_zones(z: &ZoneArgs, v: &TrigPotential) -> Result<Zones, Failure> {
    let mut p = ZoneParams::new(v.lattice.clone(), z.rho_base, z.m_order, z.rn, v.stats().v)?;
    if let Some(mt) = z.m_tilde {
        if mt == 0 {
            return Err(Failure::Config("--m-tilde must be positive".into()));
        }
        p.m_tilde = mt;
        p.strip_radius = 6.0 * mt as f64 * z.rn;
    }
    if let Some(r) = z.strip_radius {
        p = p.with_strip_radius(r);
    }
    Ok(Zones::new(p)?)
}

fn cmd_zones(cfg: &RunConfig, a: &ZonesArgs) -> Result<(), Failure> {
    let v = load_potential(&a.zone.potential)?;
    let zones = build_zones(&a.zone, &v)?;
    let census = zones::zone_census(
        &zones,
        CensusOptions {
            samples: a.samples,
            scheme_fibers: a.scheme_fibers,
            seed: a.seed,
        },
    );
    report(cfg, "zones.json", &serde_json::to_value(&census)?)
}

fn cmd_perturb(cfg: &RunConfig, a: &PerturbArgs) -> Result<(), Failure> {
    let suite = perturb::perturb_suite(a.instances, a.seed);
    report(cfg, "perturb.json", &serde_json::to_value(&suite)?)
}

// ---------------------------------------------------------------------------
// reduce1d

#[derive(Debug, Serialize)]
struct Reduce1dRow {
    xi2: f64,
    j: usize,
    plane_wave: f64,
    finite_difference: f64,
    difference: f64,
}

fn cmd_reduce1d(cfg: &RunConfig, a: &Reduce1dArgs) -> Result<(), Failure> {
    let v = load_potential(&a.potential)?;
    let vt = v.truncate(a.rn);
    let theta = strip_vector(&v.lattice, &a.theta)?;
    let t = theta.norm();
    let xi2s: Vec<f64> = if a.xi2.is_empty() {
        (0..a.points).map(|i| -t / 2.0 + t * i as f64 / a.points as f64).collect()
    } else {
        a.xi2.clone()
    };
    let modes = a.modes.max(a.gap_count + 2);
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    let mut max_diff = 0.0f64;
    let mut min_gap = f64::INFINITY;
    for &x in &xi2s {
        let pw = resonance::reduced_1d_spectrum(&vt, theta.v, x, a.rn, modes)?;
        let fd = resonance::fd_hill_spectrum(&vt, theta.v, x, a.rn, a.fd_points, a.count)?;
        for (j, (&p, &f)) in pw.iter().zip(&fd).enumerate() {
            let d = (p - f).abs();
            max_diff = max_diff.max(d);
            if d > a.tol {
                violations.push(format!("xi2 = {x}, j = {j}: |plane wave - FD| = {d:e}"));
            }
            rows.push(Reduce1dRow {
                xi2: x,
                j,
                plane_wave: p,
                finite_difference: f,
                difference: d,
            });
        }
        let gap = resonance::triple_gap(&pw, a.gap_count);
        if !(gap > 0.0) {
            violations.push(format!("xi2 = {x}: mu_(j+2) - mu_j = {gap:e}"));
        }
        min_gap = min_gap.min(gap);
    }
    write_csv(&cfg.out.join("reduce1d.csv"), &rows)?;
    let rep = json!({
        "theta": theta,
        "xi2": xi2s,
        "max_difference": max_diff,
        "min_triple_gap": min_gap,
        "violations": violations,
    });
    report(cfg, "reduce1d.json", &rep)
}

// ---------------------------------------------------------------------------
// schur-check

#[derive(Debug, Serialize)]
struct CrossingRow {
    eta2: f64,
    branch: Branch,
    q: f64,
    residual: f64,
}

struct ClassAt {
    pencil: resonance::ResonancePencil,
    deviation: f64,
    pairing: resonance::Pairing,
}

fn class_at(vt: &TrigPotential, theta: &DualVector, a: &SchurArgs, eta2: f64) -> Result<ClassAt, Failure> {
    let xi: Vec2 = resonance::frame_point(theta, a.rho, eta2);
    let (k, members) = resonance::resonance_members(&vt.lattice, theta, xi, a.a, a.ball);
    let (pencil, deviation) = resonance::pencil_for(vt, theta, xi, k, members, a.rn)?;
    let pairing = resonance::pairing_at(&pencil, eta2, a.delta0)?
        .ok_or_else(|| Failure::Config(format!("eta2 = {eta2} is not in the strip core |eta2| < a")))?;
    Ok(ClassAt {
        pencil,
        deviation,
        pairing,
    })
}

fn cmd_schur(cfg: &RunConfig, a: &SchurArgs) -> Result<(), Failure> {
    let v = load_potential(&a.potential)?;
    let vt = v.truncate(a.rn);
    let theta = strip_vector(&v.lattice, &a.theta)?;
    if !(a.rho > a.a && a.a > 0.0) {
        return Err(Failure::Config(format!("need rho > a > 0 (got {}, {})", a.rho, a.a)));
    }
    let r_min = a.r_min.unwrap_or(a.rho.powf(0.75));
    let mut violations = Vec::new();

    let c = class_at(&vt, &theta, a, a.eta2)?;
    let taus = match a.partner {
        Some(p) => {
            let t = resonance::taus_for(&c.pencil, &[a.eta2, p]);
            if t.len() != 2 {
                return Err(Failure::Config(format!("partner eta2 = {p} is not a kernel member of the class")));
            }
            t
        }
        None => c.pairing.taus.clone(),
    };
    let red = resonance::schur_reduce(&c.pencil, &taus, c.pencil.r)?;
    let window = red.window(c.pairing.c2, c.pairing.s);
    let chk = resonance::schur_check(&c.pencil, &taus, c.pencil.r, window)?;
    if chk.roots.len() != chk.eigenvalues.len() {
        violations.push(format!("{} roots vs {} window eigenvalues", chk.roots.len(), chk.eigenvalues.len()));
    }
    if chk.max_mismatch > a.tol * c.pencil.scale {
        violations.push(format!("root mismatch {:e}", chk.max_mismatch));
    }
    if chk.min_discriminant < -1e-12 {
        violations.push(format!("negative reduced discriminant {:e}", chk.min_discriminant));
    }

    let t = theta.norm();
    let mut rows = Vec::new();
    for i in 0..a.nodes {
        let e = -t / 2.0 + t * (i as f64 + 0.5) / a.nodes as f64;
        let ci = class_at(&vt, &theta, a, e)?;
        let br = ci.pairing.branch_of(e);
        let q = resonance::solve_q(&ci.pencil, &ci.pairing.taus, a.rho, br, ci.pairing.c2, r_min)?;
        let z = resonance::branch_value(&ci.pencil, &ci.pairing.taus, q, br, ci.pairing.c2)?;
        rows.push(CrossingRow {
            eta2: e,
            branch: br,
            q,
            residual: q * q + z - a.rho * a.rho,
        });
    }
    write_csv(&cfg.out.join("schur.csv"), &rows)?;
    let rep = json!({
        "theta": theta,
        "rho": a.rho,
        "dim": c.pencil.dim(),
        "kernel_dim": c.pencil.kernel.len(),
        "bloch_block_deviation": c.deviation,
        "pairing": c.pairing,
        "taus": taus,
        "check": chk,
        "violations": violations,
    });
    report(cfg, "schur.json", &rep)
}

// ---------------------------------------------------------------------------
// volumes

#[derive(Debug, Serialize)]
struct VolumeRow {
    kind: &'static str,
    l: usize,
    value: f64,
    quadrature_error: f64,
}

fn cmd_volumes(cfg: &RunConfig, a: &VolumesArgs) -> Result<(), Failure> {
    let v = load_potential(&a.zone.potential)?;
    let zones = build_zones(&a.zone, &v)?;
    let (lo, hi) = zones.annulus(a.rho);
    if !(a.rho * a.rho >= lo && a.rho * a.rho <= hi) {
        return Err(Failure::Config(format!("rho^2 = {} outside the annulus [{lo}, {hi}]", a.rho * a.rho)));
    }
    let book = nonres::volume_bookkeeping(&zones, &v, a.rho, a.per_period, a.delta0)?;
    let mut rows: Vec<VolumeRow> = book
        .sectors
        .iter()
        .map(|s| VolumeRow {
            kind: "sector",
            l: s.l,
            value: s.value,
            quadrature_error: s.quadrature_error,
        })
        .collect();
    rows.extend(book.strips.iter().map(|s| VolumeRow {
        kind: "strip",
        l: s.l,
        value: s.value,
        quadrature_error: s.quadrature_error,
    }));
    write_csv(&cfg.out.join("volumes.csv"), &rows)?;
    let mut violations = Vec::new();
    let mc = if a.mc_samples > 0 {
        let mc = nonres::mc_volume(&zones, &v, a.rho, a.mc_samples, a.seed)?;
        let dev = (mc.estimate - book.total).abs();
        let tol = 3.0 * mc.std_err + book.quadrature_error;
        if dev > tol {
            violations.push(format!("Monte-Carlo volume off by {dev:e} > 3 sigma + quadrature = {tol:e}"));
        }
        if mc.band_violations > 0 {
            violations.push(format!("{} samples with |g - |xi|^2| > 2v", mc.band_violations));
        }
        Some(mc)
    } else {
        None
    };
    let strips: Vec<_> = book
        .strips
        .iter()
        .map(|s| {
            json!({
                "l": s.l,
                "value": s.value,
                "quadrature_error": s.quadrature_error,
                "nodes": s.nodes.len(),
                "resonant_nodes": s.nodes.iter().filter(|n| n.resonant).count(),
                "paired_nodes": s.nodes.iter().filter(|n| n.paired).count(),
            })
        })
        .collect();
    let rep = json!({
        "rho": a.rho,
        "disk": PI * a.rho * a.rho,
        "total": book.total,
        "total_minus_disk": book.total - PI * a.rho * a.rho,
        "quadrature_error": book.quadrature_error,
        "sectors": book.sectors,
        "strips": strips,
        "monte_carlo": mc,
        "regime_notes": zones.params.regime_notes(),
        "violations": violations,
    });
    report(cfg, "volumes.json", &rep)
}
