//! Two-dimensional lattices, their duals, and the geometry of dual-space
//! points: integer/fractional splitting, primitive vectors and rotated frames.
//!
//! Conventions: the dual basis satisfies `<b*_i, b_j> = 2 pi delta_ij`, the
//! fundamental cell of the dual lattice is the half-open parallelogram
//! `{t1 b*_1 + t2 b*_2 : t_i in [0, 1)}`, and `x^perp` is rotation by `-pi/2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm2(a: Vec2) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(s: f64, a: Vec2) -> Vec2 {
    [s * a[0], s * a[1]]
}

#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Rotation by `-pi/2`: `(x, y) -> (y, -x)`.
#[inline]
pub fn perp(a: Vec2) -> Vec2 {
    [a[1], -a[0]]
}

/// Unit vector `x / |x|`.
#[inline]
pub fn unit(a: Vec2) -> Vec2 {
    scale(1.0 / norm(a), a)
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice2 {
    pub basis: [Vec2; 2],
    pub dual_basis: [Vec2; 2],
    pub cell_volume: f64,
    pub dual_cell_volume: f64,
}

/// A dual-lattice vector together with its integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualVector {
    pub m: [i64; 2],
    pub v: Vec2,
}

impl DualVector {
    pub fn norm(&self) -> f64 {
        norm(self.v)
    }

    pub fn angle(&self) -> f64 {
        let a = self.v[1].atan2(self.v[0]);
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    }
}

/// `xi = [xi] + {xi}` with `[xi]` in the dual lattice and `{xi}` in the
/// fundamental cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualPoint {
    pub coords: Vec2,
    pub integer_part: [i64; 2],
    pub integer_vec: Vec2,
    pub fractional_part: Vec2,
}

impl Lattice2 {
    pub fn new(basis: [Vec2; 2]) -> Result<Self> {
        let det = cross(basis[0], basis[1]);
        let scale2 = norm2(basis[0]).max(norm2(basis[1]));
        if !det.is_finite() || det.abs() < 1e-12 * scale2 {
            return Err(Error::DegenerateBasis(det));
        }
        // Rows of 2 pi B^{-T}.
        let f = 2.0 * PI / det;
        let dual_basis = [
            [basis[1][1] * f, -basis[1][0] * f],
            [-basis[0][1] * f, basis[0][0] * f],
        ];
        let cell_volume = det.abs();
        let dual_cell_volume = cross(dual_basis[0], dual_basis[1]).abs();
        Ok(Self {
            basis,
            dual_basis,
            cell_volume,
            dual_cell_volume,
        })
    }

    /// Square lattice `s Z^2`.
    pub fn square(s: f64) -> Result<Self> {
        Self::new([[s, 0.0], [0.0, s]])
    }

    /// The lattice whose dual is `spacing * Z^2`.
    pub fn with_square_dual(spacing: f64) -> Result<Self> {
        Self::square(2.0 * PI / spacing)
    }

    /// The lattice whose dual basis is `{(s1, 0), (0, s2)}`.
    pub fn with_rectangular_dual(s1: f64, s2: f64) -> Result<Self> {
        Self::new([[2.0 * PI / s1, 0.0], [0.0, 2.0 * PI / s2]])
    }

    pub fn dual_vector(&self, m: [i64; 2]) -> Vec2 {
        let [b1, b2] = self.dual_basis;
        [
            m[0] as f64 * b1[0] + m[1] as f64 * b2[0],
            m[0] as f64 * b1[1] + m[1] as f64 * b2[1],
        ]
    }

    /// Real coordinates of `xi` in the dual basis.
    pub fn dual_coords(&self, xi: Vec2) -> Vec2 {
        [
            dot(xi, self.basis[0]) / (2.0 * PI),
            dot(xi, self.basis[1]) / (2.0 * PI),
        ]
    }

    pub fn split(&self, xi: Vec2) -> DualPoint {
        let t = self.dual_coords(xi);
        let mut m = [t[0].floor() as i64, t[1].floor() as i64];
        let mut f = [t[0] - m[0] as f64, t[1] - m[1] as f64];
        // Rounding can push a coordinate onto the closing edge of the cell.
        for i in 0..2 {
            if f[i] >= 1.0 {
                m[i] += 1;
                f[i] = 0.0;
            }
        }
        let integer_vec = self.dual_vector(m);
        let [b1, b2] = self.dual_basis;
        let mut fractional_part = sub(xi, integer_vec);
        if self.dual_coords(fractional_part).iter().any(|c| !(0.0..1.0).contains(c)) {
            fractional_part = [f[0] * b1[0] + f[1] * b2[0], f[0] * b1[1] + f[1] * b2[1]];
        }
        DualPoint {
            coords: xi,
            integer_part: m,
            integer_vec,
            fractional_part,
        }
    }

    /// Integer coordinates of `g` if it is a dual-lattice vector.
    pub fn lattice_coords(&self, g: Vec2) -> Option<[i64; 2]> {
        let t = self.dual_coords(g);
        let m = [t[0].round() as i64, t[1].round() as i64];
        let tol = 1e-9 * (1.0 + t[0].abs() + t[1].abs());
        ((t[0] - m[0] as f64).abs() < tol && (t[1] - m[1] as f64).abs() < tol).then_some(m)
    }

    /// All dual-lattice vectors `g` with `|g| <= radius` (origin included),
    /// sorted by length, then lexicographically on the integer coordinates.
    pub fn points_in_ball(&self, radius: f64) -> Vec<DualVector> {
        let mut out = Vec::new();
        if radius < 0.0 {
            return out;
        }
        let r2 = radius * radius * (1.0 + 1e-12);
        let b0 = (radius * norm(self.basis[0]) / (2.0 * PI)).ceil() as i64 + 1;
        let b1 = (radius * norm(self.basis[1]) / (2.0 * PI)).ceil() as i64 + 1;
        for i in -b0..=b0 {
            for j in -b1..=b1 {
                let v = self.dual_vector([i, j]);
                if norm2(v) <= r2 {
                    out.push(DualVector { m: [i, j], v });
                }
            }
        }
        out.sort_by(|a, b| {
            norm2(a.v)
                .partial_cmp(&norm2(b.v))
                .unwrap()
                .then(a.m.cmp(&b.m))
        });
        out
    }

    /// Nonzero vectors of the ball that are shortest on their line through
    /// the origin, sorted counterclockwise by angle in `[0, 2 pi)`.
    pub fn primitive_vectors(&self, radius: f64) -> Result<Vec<DualVector>> {
        let mut out: Vec<DualVector> = self
            .points_in_ball(radius)
            .into_iter()
            .filter(|g| g.m != [0, 0] && gcd(g.m[0], g.m[1]) == 1)
            .collect();
        if out.is_empty() {
            return Err(Error::EmptyBall(radius));
        }
        out.sort_by(|a, b| {
            a.angle()
                .partial_cmp(&b.angle())
                .unwrap()
                .then(norm2(a.v).partial_cmp(&norm2(b.v)).unwrap())
        });
        Ok(out)
    }

    /// Length of the shortest nonzero dual vector.
    pub fn shortest_dual_length(&self) -> f64 {
        let r = norm(self.dual_basis[0]).min(norm(self.dual_basis[1]));
        self.points_in_ball(r)
            .iter()
            .filter(|g| g.m != [0, 0])
            .map(|g| g.norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn same_as(&self, other: &Lattice2) -> bool {
        let close = |a: Vec2, b: Vec2| norm(sub(a, b)) <= 1e-12 * (1.0 + norm(a));
        close(self.basis[0], other.basis[0]) && close(self.basis[1], other.basis[1])
    }
}

/// Smallest angle in `(0, pi)` between two linearly independent members of
/// the list; `None` if all vectors are collinear.
pub fn min_pairwise_angle(vectors: &[Vec2]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (i, &a) in vectors.iter().enumerate() {
        for &b in &vectors[i + 1..] {
            let s = cross(a, b);
            if s.abs() <= 1e-12 * norm(a) * norm(b) {
                continue;
            }
            let ang = s.abs().atan2(dot(a, b));
            best = Some(best.map_or(ang, |x: f64| x.min(ang)));
        }
    }
    best
}

/// `min |<n(g), n(nu^perp)>|` over linearly independent pairs, i.e. the
/// smallest sine of an angle between two of the vectors.
pub fn min_pairwise_sine(vectors: &[Vec2]) -> Option<f64> {
    min_pairwise_angle(vectors).map(|_| {
        let mut best = f64::INFINITY;
        for (i, &a) in vectors.iter().enumerate() {
            for &b in &vectors[i + 1..] {
                let s = dot(unit(a), unit(perp(b))).abs();
                if s > 1e-12 {
                    best = best.min(s);
                }
            }
        }
        best
    })
}

/// Orthonormal frame attached to a dual vector `theta`: the first axis runs
/// along `theta^perp`, the second along `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub theta: Vec2,
    pub axis1: Vec2,
    pub axis2: Vec2,
}

impl Frame {
    pub fn new(theta: Vec2) -> Self {
        let axis2 = unit(theta);
        Self {
            theta,
            axis1: perp(axis2),
            axis2,
        }
    }

    pub fn to_frame(&self, xi: Vec2) -> Vec2 {
        [dot(xi, self.axis1), dot(xi, self.axis2)]
    }

    pub fn from_frame(&self, eta: Vec2) -> Vec2 {
        add(scale(eta[0], self.axis1), scale(eta[1], self.axis2))
    }
}
