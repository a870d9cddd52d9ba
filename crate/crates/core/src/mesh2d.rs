//! Mapped polar triangulations of star-shaped planar domains.
//!
//! Ring `j` of `M` sits at radius fraction `j/M` of the boundary radius
//! function. The outer ring carries `N` nodes; going inward a ring keeps the
//! count of the ring outside it unless its nodes would crowd together, in
//! which case the count is halved and the band between the two rings is
//! filled with three triangles per coarse segment.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{Curvature, RadialWeight, SpaceForm};
use crate::quadrature::{GAUSS2_UNIT, TRI3_MIDPOINT};
use crate::{Error, Result};

/// Boundary given by a radius function `r(θ)` about a center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum BoundaryCurve {
    Circle { r: f64 },
    /// Semi-axis `a` along x, `b` along y.
    Ellipse { a: f64, b: f64 },
    /// `r (1 + eps cos(k θ + phase))`.
    Cosine { r: f64, eps: f64, k: u32, phase: f64 },
    /// Vertices relative to the center, counterclockwise.
    Polygon { vertices: Vec<[f64; 2]> },
}

impl BoundaryCurve {
    pub fn radius(&self, theta: f64) -> f64 {
        match self {
            BoundaryCurve::Circle { r } => *r,
            BoundaryCurve::Ellipse { a, b } => {
                if a == b {
                    return *a;
                }
                let (s, c) = theta.sin_cos();
                1.0 / ((c / a).powi(2) + (s / b).powi(2)).sqrt()
            }
            BoundaryCurve::Cosine { r, eps, k, phase } => r * (1.0 + eps * (f64::from(*k) * theta + phase).cos()),
            BoundaryCurve::Polygon { vertices } => polygon_ray(vertices, theta),
        }
    }

    fn is_straight(&self) -> bool {
        matches!(self, BoundaryCurve::Polygon { .. })
    }
}

// Distance from the origin to the polygon along direction θ.
fn polygon_ray(v: &[[f64; 2]], theta: f64) -> f64 {
    let d = [theta.cos(), theta.sin()];
    let mut best = f64::INFINITY;
    for i in 0..v.len() {
        let p = v[i];
        let q = v[(i + 1) % v.len()];
        let e = [q[0] - p[0], q[1] - p[1]];
        let den = d[0] * e[1] - d[1] * e[0];
        if den.abs() < 1e-300 {
            continue;
        }
        // solve s d = p + u e
        let s = (p[0] * e[1] - p[1] * e[0]) / den;
        let u = (p[0] * d[1] - p[1] * d[0]) / den;
        if s > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
            best = best.min(s);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Disk { r: f64 },
    Ellipse { a: f64, b: f64 },
    /// Boundary `r (1 + eps cos kθ)`.
    PerturbedDisk { r: f64, eps: f64, k: u32 },
    /// Counterclockwise vertices, star-shaped about their area centroid.
    Polygon { vertices: Vec<[f64; 2]> },
}

/// A star-shaped planar domain, translated by `center_offset` relative to
/// the weight origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain2D {
    pub kind: DomainKind,
    pub center_offset: [f64; 2],
}

impl Domain2D {
    pub fn new(kind: DomainKind, center_offset: [f64; 2]) -> Result<Self> {
        let d = Self { kind, center_offset };
        d.validate()?;
        Ok(d)
    }

    pub fn disk(r: f64) -> Result<Self> {
        Self::new(DomainKind::Disk { r }, [0.0, 0.0])
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::new(DomainKind::Ellipse { a, b }, [0.0, 0.0])
    }

    pub fn perturbed_disk(r: f64, eps: f64, k: u32) -> Result<Self> {
        Self::new(DomainKind::PerturbedDisk { r, eps, k }, [0.0, 0.0])
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(DomainKind::Polygon { vertices }, [0.0, 0.0])
    }

    pub fn with_offset(mut self, offset: [f64; 2]) -> Self {
        self.center_offset = offset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidDomain(m));
        if !self.center_offset.iter().all(|v| v.is_finite()) {
            return bad("center offset must be finite".into());
        }
        match &self.kind {
            DomainKind::Disk { r } if !(*r > 0.0) => bad(format!("disk radius must be positive, got {r}")),
            DomainKind::Ellipse { a, b } if !(*a > 0.0 && *b > 0.0) => {
                bad(format!("ellipse semi-axes must be positive, got {a}, {b}"))
            }
            DomainKind::PerturbedDisk { r, eps, k } => {
                if !(*r > 0.0) {
                    bad(format!("perturbed disk radius must be positive, got {r}"))
                } else if *k == 0 {
                    bad("perturbation frequency k must be at least 1".into())
                } else if !(eps.abs() * f64::from(*k) < 1.0) {
                    bad(format!("|eps|·k = {} must be below 1 for a star-shaped boundary", eps.abs() * f64::from(*k)))
                } else {
                    Ok(())
                }
            }
            DomainKind::Polygon { vertices } => validate_polygon(vertices),
            _ => Ok(()),
        }
    }

    /// Reference center (weight-origin coordinates) and the boundary radius
    /// function about it.
    pub fn curve(&self) -> (BoundaryCurve, [f64; 2]) {
        let o = self.center_offset;
        match &self.kind {
            DomainKind::Disk { r } => (BoundaryCurve::Circle { r: *r }, o),
            DomainKind::Ellipse { a, b } => (BoundaryCurve::Ellipse { a: *a, b: *b }, o),
            DomainKind::PerturbedDisk { r, eps, k } => (
                BoundaryCurve::Cosine {
                    r: *r,
                    eps: *eps,
                    k: *k,
                    phase: 0.0,
                },
                o,
            ),
            DomainKind::Polygon { vertices } => {
                let c = polygon_centroid(vertices);
                let rel = vertices.iter().map(|v| [v[0] - c[0], v[1] - c[1]]).collect();
                (BoundaryCurve::Polygon { vertices: rel }, [c[0] + o[0], c[1] + o[1]])
            }
        }
    }

    /// Largest distance from the weight origin to the boundary, sampled.
    pub fn max_extent(&self) -> f64 {
        let (curve, c) = self.curve();
        (0..4096)
            .map(|k| {
                let th = TAU * k as f64 / 4096.0;
                let r = curve.radius(th);
                (c[0] + r * th.cos()).hypot(c[1] + r * th.sin())
            })
            .fold(0.0, f64::max)
            .max(match &self.kind {
                DomainKind::Polygon { vertices } => vertices
                    .iter()
                    .map(|v| (v[0] + self.center_offset[0]).hypot(v[1] + self.center_offset[1]))
                    .fold(0.0, f64::max),
                _ => 0.0,
            })
    }

    /// Fails unless the domain lies in `|x| ≤ 1 − margin`.
    pub fn check_inside_unit_disk(&self, margin: f64) -> Result<()> {
        let m = self.max_extent();
        if m > 1.0 - margin {
            return Err(Error::InvalidDomain(format!(
                "domain reaches |x| = {m:.6}, beyond the Poincaré disk limit 1 - {margin}"
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let base = match &self.kind {
            DomainKind::Disk { r } => format!("disk({r})"),
            DomainKind::Ellipse { a, b } => format!("ellipse({a:.6};{b:.6})"),
            DomainKind::PerturbedDisk { r, eps, k } => format!("perturbed({r};{eps};{k})"),
            DomainKind::Polygon { vertices } => format!("polygon({})", vertices.len()),
        };
        if self.center_offset == [0.0, 0.0] {
            base
        } else {
            format!("{base}@({};{})", self.center_offset[0], self.center_offset[1])
        }
    }

    /// Whether this is a disk centered at the weight origin.
    pub fn is_centered_disk(&self) -> bool {
        let round = match &self.kind {
            DomainKind::Disk { .. } => true,
            DomainKind::Ellipse { a, b } => a == b,
            DomainKind::PerturbedDisk { eps, .. } => *eps == 0.0,
            DomainKind::Polygon { .. } => false,
        };
        round && self.center_offset == [0.0, 0.0]
    }
}

fn polygon_signed_area(v: &[[f64; 2]]) -> f64 {
    (0..v.len())
        .map(|i| {
            let (p, q) = (v[i], v[(i + 1) % v.len()]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        / 2.0
}

fn polygon_centroid(v: &[[f64; 2]]) -> [f64; 2] {
    let a = polygon_signed_area(v);
    let mut c = [0.0, 0.0];
    for i in 0..v.len() {
        let (p, q) = (v[i], v[(i + 1) % v.len()]);
        let cr = p[0] * q[1] - q[0] * p[1];
        c[0] += (p[0] + q[0]) * cr;
        c[1] += (p[1] + q[1]) * cr;
    }
    [c[0] / (6.0 * a), c[1] / (6.0 * a)]
}

fn validate_polygon(v: &[[f64; 2]]) -> Result<()> {
    if v.len() < 3 {
        return Err(Error::InvalidDomain("polygon needs at least 3 vertices".into()));
    }
    if v.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidDomain("polygon has non-finite vertex".into()));
    }
    if !(polygon_signed_area(v) > 0.0) {
        return Err(Error::InvalidDomain("polygon must be counterclockwise with positive area".into()));
    }
    let c = polygon_centroid(v);
    // star-shaped about c: every edge seen from c turns counterclockwise
    // and the angles wind exactly once
    let mut winding = 0.0;
    for i in 0..v.len() {
        let (p, q) = (v[i], v[(i + 1) % v.len()]);
        let (a, b) = ([p[0] - c[0], p[1] - c[1]], [q[0] - c[0], q[1] - c[1]]);
        let cross = a[0] * b[1] - a[1] * b[0];
        if !(cross > 0.0) {
            return Err(Error::InvalidDomain(format!("polygon is not star-shaped about its centroid at edge {i}")));
        }
        winding += cross.atan2(a[0] * b[0] + a[1] * b[1]);
    }
    if (winding - TAU).abs() > 1e-9 {
        return Err(Error::InvalidDomain("polygon winds more than once about its centroid".into()));
    }
    Ok(())
}

/// Boundary description kept with a mesh so refinement can move new
/// boundary nodes onto the exact curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshCurve {
    pub curve: BoundaryCurve,
    pub center: [f64; 2],
}

impl MeshCurve {
    fn project(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        let th = d[1].atan2(d[0]);
        let r = self.curve.radius(th);
        [self.center[0] + r * th.cos(), self.center[1] + r * th.sin()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Closed counterclockwise loop.
    pub boundary_edges: Vec<[usize; 2]>,
    /// Whether each boundary edge approximates the curved part of the boundary.
    pub curved: Vec<bool>,
    pub curve: Option<MeshCurve>,
    /// Longest edge.
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshOptions {
    pub angle_floor_deg: f64,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self { angle_floor_deg: 15.0 }
    }
}

fn ring_counts(rings: usize, sectors: usize, span: f64, min_count: usize) -> Vec<usize> {
    let mut counts = vec![0; rings + 1];
    counts[rings] = sectors;
    for j in (1..rings).rev() {
        let outer = counts[j + 1];
        let crowded = span * j as f64 / outer as f64 <= 0.6;
        counts[j] = if crowded && outer % 2 == 0 && outer / 2 >= min_count {
            outer / 2
        } else {
            outer
        };
    }
    counts
}

struct Builder {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
}

impl Builder {
    fn tri(&mut self, a: usize, b: usize, c: usize) {
        let (p, q, r) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let area = (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]);
        if area >= 0.0 {
            self.triangles.push([a, b, c]);
        } else {
            self.triangles.push([a, c, b]);
        }
    }

    fn quad(&mut self, a: usize, b: usize, c: usize, d: usize, theta: f64) {
        // a, b on the inner ring, d, c above them. The diagonal flips with the
        // sign of sin 2θ so the mesh inherits the reflections about both axes.
        if (2.0 * theta).sin() > 0.0 {
            self.tri(a, b, c);
            self.tri(a, c, d);
        } else {
            self.tri(a, b, d);
            self.tri(b, c, d);
        }
    }

    /// `angle(l)` is the mid-angle of inner segment `l`.
    fn band(&mut self, inner: &[usize], outer: &[usize], closed: bool, angle: impl Fn(usize) -> f64) {
        let segs_in = if closed { inner.len() } else { inner.len() - 1 };
        let at = |ring: &[usize], l: usize| ring[l % ring.len()];
        if inner.len() == outer.len() {
            for l in 0..segs_in {
                self.quad(at(inner, l), at(inner, l + 1), at(outer, l + 1), at(outer, l), angle(l));
            }
        } else {
            for l in 0..segs_in {
                let (p0, p1) = (at(inner, l), at(inner, l + 1));
                let (q0, q1, q2) = (at(outer, 2 * l), at(outer, 2 * l + 1), at(outer, 2 * l + 2));
                self.tri(p0, q0, q1);
                self.tri(p0, q1, p1);
                self.tri(p1, q1, q2);
            }
        }
    }
}

/// Mapped polar mesh of a full domain with `rings ≥ 2` rings and `sectors ≥ 8`
/// nodes on the boundary.
pub fn generate_mesh(dom: &Domain2D, rings: usize, sectors: usize) -> Result<TriMesh> {
    generate_mesh_with(dom, rings, sectors, MeshOptions::default())
}

pub fn generate_mesh_with(dom: &Domain2D, rings: usize, sectors: usize, opts: MeshOptions) -> Result<TriMesh> {
    dom.validate()?;
    if rings < 2 || sectors < 8 {
        return Err(Error::InvalidArgument(format!(
            "mesh needs rings >= 2 and sectors >= 8, got ({rings}, {sectors})"
        )));
    }
    let (curve, center) = dom.curve();
    let counts = ring_counts(rings, sectors, TAU, 8);
    let mut b = Builder {
        vertices: vec![center],
        triangles: Vec::new(),
    };
    let mut ring_nodes: Vec<Vec<usize>> = vec![vec![0]];
    for (j, &nj) in counts.iter().enumerate().skip(1) {
        let frac = j as f64 / rings as f64;
        let nodes = (0..nj)
            .map(|l| {
                let th = TAU * l as f64 / nj as f64;
                let r = frac * curve.radius(th);
                b.vertices.push([center[0] + r * th.cos(), center[1] + r * th.sin()]);
                b.vertices.len() - 1
            })
            .collect();
        ring_nodes.push(nodes);
    }
    let first = &ring_nodes[1];
    for l in 0..first.len() {
        b.tri(0, first[l], first[(l + 1) % first.len()]);
    }
    for j in 1..rings {
        let (inner, outer) = (ring_nodes[j].clone(), &ring_nodes[j + 1]);
        let nj = inner.len() as f64;
        b.band(&inner, outer, true, |l| TAU * (l as f64 + 0.5) / nj);
    }
    let outer = &ring_nodes[rings];
    let boundary_edges: Vec<[usize; 2]> = (0..outer.len()).map(|l| [outer[l], outer[(l + 1) % outer.len()]]).collect();
    let curved = vec![!curve.is_straight(); boundary_edges.len()];
    finish(b, boundary_edges, curved, Some(MeshCurve { curve, center }), opts)
}

/// Mesh of the half domain `x ≥ 0` for a curve symmetric about the y-axis
/// direction, with the flat side on the axis `x = 0`. Angles run over
/// `[−π/2, π/2]`, `sectors ≥ 4` segments on the curved side. The boundary
/// loop goes up the curved side and back down the axis.
pub fn generate_half_mesh(curve: &BoundaryCurve, rings: usize, sectors: usize, opts: MeshOptions) -> Result<TriMesh> {
    if rings < 2 || sectors < 4 || sectors % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "half mesh needs rings >= 2 and even sectors >= 4, got ({rings}, {sectors})"
        )));
    }
    let counts = ring_counts(rings, sectors, PI, 4);
    let mut b = Builder {
        vertices: vec![[0.0, 0.0]],
        triangles: Vec::new(),
    };
    let mut ring_nodes: Vec<Vec<usize>> = vec![vec![0]];
    for (j, &nj) in counts.iter().enumerate().skip(1) {
        let frac = j as f64 / rings as f64;
        let nodes = (0..=nj)
            .map(|l| {
                let th = PI * (2.0 * l as f64 - nj as f64) / (2.0 * nj as f64);
                let r = frac * curve.radius(th);
                let p = if l == 0 {
                    [0.0, -r]
                } else if l == nj {
                    [0.0, r]
                } else {
                    [r * th.cos(), r * th.sin()]
                };
                b.vertices.push(p);
                b.vertices.len() - 1
            })
            .collect();
        ring_nodes.push(nodes);
    }
    let first = &ring_nodes[1];
    for l in 0..first.len() - 1 {
        b.tri(0, first[l], first[l + 1]);
    }
    for j in 1..rings {
        let (inner, outer) = (ring_nodes[j].clone(), &ring_nodes[j + 1]);
        let nj = (inner.len() - 1) as f64;
        b.band(&inner, outer, false, |l| PI * (2.0 * l as f64 + 1.0 - nj) / (2.0 * nj));
    }
    let outer = &ring_nodes[rings];
    let mut boundary_edges: Vec<[usize; 2]> = outer.windows(2).map(|w| [w[0], w[1]]).collect();
    let mut curved = vec![true; boundary_edges.len()];
    // down the axis: top nodes from the outer ring to the center, then bottom nodes outward
    let mut axis: Vec<usize> = (1..=rings).rev().map(|j| *ring_nodes[j].last().expect("ring")).collect();
    axis.push(0);
    axis.extend((1..=rings).map(|j| ring_nodes[j][0]));
    for w in axis.windows(2) {
        boundary_edges.push([w[0], w[1]]);
        curved.push(false);
    }
    finish(
        b,
        boundary_edges,
        curved,
        Some(MeshCurve {
            curve: curve.clone(),
            center: [0.0, 0.0],
        }),
        opts,
    )
}

fn finish(b: Builder, boundary_edges: Vec<[usize; 2]>, curved: Vec<bool>, curve: Option<MeshCurve>, opts: MeshOptions) -> Result<TriMesh> {
    let mut mesh = TriMesh {
        vertices: b.vertices,
        triangles: b.triangles,
        boundary_edges,
        curved,
        curve,
        h: 0.0,
    };
    mesh.h = mesh.max_edge();
    mesh.check_triangles()?;
    let min_angle = mesh.min_angle_deg();
    if min_angle < opts.angle_floor_deg {
        return Err(Error::MeshQuality {
            min_angle,
            floor: opts.angle_floor_deg,
        });
    }
    Ok(mesh)
}

impl TriMesh {
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    fn max_edge(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(i, j)| dist(self.vertices[i], self.vertices[j]))
            .fold(0.0, f64::max)
    }

    pub fn check_triangles(&self) -> Result<()> {
        let scale = self.h * self.h;
        for t in 0..self.triangles.len() {
            let area = self.signed_area(t);
            if !(area > 1e-14 * scale) {
                return Err(Error::DegenerateTriangle { index: t, area });
            }
        }
        Ok(())
    }

    pub fn min_angle_deg(&self) -> f64 {
        let mut best = 180.0f64;
        for t in &self.triangles {
            for k in 0..3 {
                let p = self.vertices[t[k]];
                let q = self.vertices[t[(k + 1) % 3]];
                let r = self.vertices[t[(k + 2) % 3]];
                let u = [q[0] - p[0], q[1] - p[1]];
                let v = [r[0] - p[0], r[1] - p[1]];
                let ang = (u[0] * v[1] - u[1] * v[0]).abs().atan2(u[0] * v[0] + u[1] * v[1]);
                best = best.min(ang.to_degrees());
            }
        }
        best
    }

    /// Distinct undirected edges, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut e: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|t| [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]])
            .map(|[a, b]| [a.min(b), a.max(b)])
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Topology checks: positive orientation, every boundary edge used by
    /// exactly one triangle in the same direction, all other edges by two,
    /// and the boundary a single closed loop.
    pub fn validate(&self) -> Result<()> {
        self.check_triangles()?;
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *directed.entry((a, b)).or_default() += 1;
            }
        }
        let mut open = 0;
        for (&(a, b), &cnt) in &directed {
            if cnt != 1 {
                return Err(Error::InvalidDomain(format!("edge ({a}, {b}) repeated in one orientation")));
            }
            if !directed.contains_key(&(b, a)) {
                open += 1;
                if !self.boundary_edges.contains(&[a, b]) {
                    return Err(Error::InvalidDomain(format!("free edge ({a}, {b}) missing from boundary list")));
                }
            }
        }
        if open != self.boundary_edges.len() {
            return Err(Error::InvalidDomain(format!(
                "{} free edges but {} boundary edges listed",
                open,
                self.boundary_edges.len()
            )));
        }
        for k in 0..self.boundary_edges.len() {
            let next = self.boundary_edges[(k + 1) % self.boundary_edges.len()];
            if self.boundary_edges[k][1] != next[0] {
                return Err(Error::InvalidDomain(format!("boundary loop breaks after edge {k}")));
            }
        }
        Ok(())
    }

    /// Nodes touched by a boundary edge, in loop order.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        self.boundary_edges.iter().map(|e| e[0]).collect()
    }

    /// Uniform 4-way split. New nodes on curved boundary edges are moved
    /// radially onto the boundary curve.
    pub fn refine(&self) -> TriMesh {
        let mut vertices = self.vertices.clone();
        let mut mid: HashMap<[usize; 2], usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
            let key = [a.min(b), a.max(b)];
            *mid.entry(key).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        let mut boundary_edges = Vec::with_capacity(2 * self.boundary_edges.len());
        let mut curved = Vec::with_capacity(2 * self.boundary_edges.len());
        for (&[a, b], &is_curved) in self.boundary_edges.iter().zip(&self.curved) {
            let m = midpoint(a, b, &mut vertices);
            if is_curved {
                if let Some(c) = &self.curve {
                    vertices[m] = c.project(vertices[m]);
                }
            }
            boundary_edges.extend([[a, m], [m, b]]);
            curved.extend([is_curved, is_curved]);
        }
        let mut out = TriMesh {
            vertices,
            triangles,
            boundary_edges,
            curved,
            curve: self.curve.clone(),
            h: 0.0,
        };
        out.h = out.max_edge();
        out
    }

    /// Plain-text form: `V T B` header, then vertices, triangles and
    /// boundary edges, zero-based.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.vertices.len(), self.triangles.len(), self.boundary_edges.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:?} {:?}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for e in &self.boundary_edges {
            let _ = writeln!(s, "{} {}", e[0], e[1]);
        }
        s
    }

    /// Reads [`to_text`](Self::to_text) output. The boundary curve is not
    /// stored, so an imported mesh refines with straight boundary edges.
    pub fn from_text(text: &str) -> Result<TriMesh> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let perr = |line: usize, message: String| Error::Parse { line: line + 1, message };
        let (hl, header) = lines.next().ok_or_else(|| perr(0, "empty mesh file".into()))?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| perr(hl, format!("bad header: {e}")))?;
        let [nv, nt, nb] = counts[..] else {
            return Err(perr(hl, "header must be `V T B`".into()));
        };
        let mut row = |want: usize| -> Result<(usize, Vec<String>)> {
            let (ln, l) = lines.next().ok_or_else(|| perr(usize::MAX - 1, "unexpected end of mesh file".into()))?;
            let cols: Vec<String> = l.split_whitespace().map(String::from).collect();
            if cols.len() != want {
                return Err(perr(ln, format!("expected {want} columns, found {}", cols.len())));
            }
            Ok((ln, cols))
        };
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, c) = row(2)?;
            let x: f64 = c[0].parse().map_err(|_| perr(ln, format!("bad coordinate `{}`", c[0])))?;
            let y: f64 = c[1].parse().map_err(|_| perr(ln, format!("bad coordinate `{}`", c[1])))?;
            vertices.push([x, y]);
        }
        let index = |ln: usize, s: &str| -> Result<usize> {
            let i: usize = s.parse().map_err(|_| perr(ln, format!("bad index `{s}`")))?;
            if i >= nv {
                return Err(perr(ln, format!("index {i} out of range")));
            }
            Ok(i)
        };
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, c) = row(3)?;
            triangles.push([index(ln, &c[0])?, index(ln, &c[1])?, index(ln, &c[2])?]);
        }
        let mut boundary_edges = Vec::with_capacity(nb);
        for _ in 0..nb {
            let (ln, c) = row(2)?;
            boundary_edges.push([index(ln, &c[0])?, index(ln, &c[1])?]);
        }
        let mut mesh = TriMesh {
            vertices,
            triangles,
            curved: vec![false; boundary_edges.len()],
            boundary_edges,
            curve: None,
            h: 0.0,
        };
        mesh.h = mesh.max_edge();
        mesh.validate()?;
        Ok(mesh)
    }

    /// Largest distance of a vertex from the origin.
    pub fn max_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
    }
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// Distance from the weight origin and conformal factor at a planar point.
/// Hyperbolic points must lie in the open unit disk.
#[inline]
pub(crate) fn planar_metric(curvature: Curvature, x: [f64; 2]) -> (f64, f64) {
    let r = x[0].hypot(x[1]);
    match curvature {
        Curvature::Hyperbolic => (2.0 * r.atanh(), 2.0 / (1.0 - r * r)),
        _ => (r, 1.0),
    }
}

pub(crate) fn check_planar_form(mesh: &TriMesh, form: &SpaceForm) -> Result<()> {
    if form.dim != 2 {
        return Err(Error::InvalidArgument(format!("planar meshes need n = 2, got {}", form.dim)));
    }
    match form.curvature {
        Curvature::Euclidean => Ok(()),
        Curvature::Hyperbolic => {
            let m = mesh.max_radius();
            if m < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidDomain(format!("mesh reaches |x| = {m}, outside the Poincaré disk")))
            }
        }
        Curvature::Spherical => Err(Error::InvalidArgument("planar meshes support euclidean and hyperbolic only".into())),
    }
}

/// Weighted area and weighted boundary length of a planar mesh.
pub fn mesh_measures(mesh: &TriMesh, form: &SpaceForm, w: &RadialWeight) -> Result<(f64, f64)> {
    check_planar_form(mesh, form)?;
    let cv = form.curvature;
    let density = |x: [f64; 2]| {
        let (t, rho) = planar_metric(cv, x);
        (w.density(t), rho)
    };
    let mut area = 0.0;
    for (k, t) in mesh.triangles.iter().enumerate() {
        let a = mesh.signed_area(k);
        let p = t.map(|i| mesh.vertices[i]);
        let s: f64 = TRI3_MIDPOINT
            .iter()
            .map(|(l, wt)| {
                let x = [
                    l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                    l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
                ];
                let (d, rho) = density(x);
                wt * d * rho * rho
            })
            .sum();
        area += a * s;
    }
    let mut length = 0.0;
    for &[a, b] in &mesh.boundary_edges {
        let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
        let len = dist(p, q);
        let s: f64 = GAUSS2_UNIT
            .iter()
            .map(|&g| {
                let (d, rho) = density([p[0] + g * (q[0] - p[0]), p[1] + g * (q[1] - p[1])]);
                0.5 * d * rho
            })
            .sum();
        length += len * s;
    }
    Ok((area, length))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ball_boundary_weighted_measure, ball_weighted_volume};

    #[test]
    fn smallest_disk_mesh_counts() {
        let m = generate_mesh(&Domain2D::disk(1.0).unwrap(), 2, 8).unwrap();
        assert_eq!(m.vertices.len(), 17);
        assert_eq!(m.triangles.len(), 24);
        assert_eq!(m.boundary_edges.len(), 8);
        m.validate().unwrap();
    }

    #[test]
    fn ring_coarsening() {
        assert_eq!(&ring_counts(8, 64, TAU, 8)[1..], &[8, 16, 16, 32, 32, 32, 64, 64]);
        assert_eq!(&ring_counts(2, 8, TAU, 8)[1..], &[8, 8]);
        let m = generate_mesh(&Domain2D::disk(1.0).unwrap(), 8, 64).unwrap();
        m.validate().unwrap();
        assert!(m.min_angle_deg() >= 15.0);
    }

    #[test]
    fn degenerate_shapes_match_disk() {
        let disk = generate_mesh(&Domain2D::disk(1.0).unwrap(), 4, 16).unwrap();
        let ell = generate_mesh(&Domain2D::ellipse(1.0, 1.0).unwrap(), 4, 16).unwrap();
        let pert = generate_mesh(&Domain2D::perturbed_disk(1.0, 0.0, 3).unwrap(), 4, 16).unwrap();
        assert_eq!(disk.vertices, ell.vertices);
        assert_eq!(disk.vertices, pert.vertices);
        assert_eq!(disk.triangles, pert.triangles);
    }

    #[test]
    fn refinement_counts_and_projection() {
        let m = generate_mesh(&Domain2D::disk(1.0).unwrap(), 2, 8).unwrap();
        let r = m.refine();
        assert_eq!(r.triangles.len(), 96);
        assert_eq!(r.boundary_edges.len(), 16);
        r.validate().unwrap();
        for v in r.boundary_nodes() {
            let p = r.vertices[v];
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-14);
        }
        assert!(r.h < 0.6 * m.h);
    }

    #[test]
    fn euler_characteristic() {
        for dom in [
            Domain2D::disk(1.0).unwrap(),
            Domain2D::ellipse(2f64.sqrt(), 0.5f64.sqrt()).unwrap(),
            Domain2D::perturbed_disk(1.0, 0.1, 3).unwrap(),
        ] {
            let m = generate_mesh(&dom, 6, 48).unwrap().refine();
            let (v, e, f) = (m.vertices.len() as i64, m.edges().len() as i64, m.triangles.len() as i64);
            assert_eq!(v - e + f, 1);
        }
    }

    #[test]
    fn ellipse_family_meets_angle_floor() {
        for k in 0..=10 {
            let ratio = 1.0 + 0.1 * k as f64;
            let dom = Domain2D::ellipse(ratio.sqrt(), 1.0 / ratio.sqrt()).unwrap();
            let m = generate_mesh(&dom, 8, 64).unwrap();
            assert!(m.refine().refine().min_angle_deg() > 10.0);
        }
    }

    #[test]
    fn disk_mesh_has_dihedral_symmetry() {
        let m = generate_mesh(&Domain2D::disk(1.0).unwrap(), 8, 64).unwrap().refine();
        let key = |v: [f64; 2]| [(v[0] * 1e12).round() as i64, (v[1] * 1e12).round() as i64];
        let mut tris: Vec<[[i64; 2]; 3]> = m
            .triangles
            .iter()
            .map(|t| {
                let mut p = t.map(|i| key(m.vertices[i]));
                p.sort_unstable();
                p
            })
            .collect();
        tris.sort_unstable();
        for flip in [[-1, 1], [1, -1]] {
            let mut mirrored: Vec<[[i64; 2]; 3]> = tris
                .iter()
                .map(|t| {
                    let mut p = t.map(|v| [v[0] * flip[0], v[1] * flip[1]]);
                    p.sort_unstable();
                    p
                })
                .collect();
            mirrored.sort_unstable();
            assert_eq!(tris, mirrored);
        }
    }

    #[test]
    fn deterministic() {
        let dom = Domain2D::perturbed_disk(1.0, 0.1, 2).unwrap().with_offset([0.1, -0.05]);
        let a = generate_mesh(&dom, 8, 64).unwrap().refine();
        let b = generate_mesh(&dom, 8, 64).unwrap().refine();
        assert_eq!(a, b);
    }

    #[test]
    fn quality_floor_rejects_coarse_meshes() {
        let dom = Domain2D::disk(1.0).unwrap();
        let strict = MeshOptions { angle_floor_deg: 40.0 };
        assert!(matches!(generate_mesh_with(&dom, 8, 64, strict), Err(Error::MeshQuality { .. })));
        assert!(generate_mesh(&dom, 1, 8).is_err());
    }

    #[test]
    fn domain_invariants() {
        assert!(Domain2D::perturbed_disk(1.0, 0.5, 3).is_err());
        assert!(Domain2D::perturbed_disk(1.0, 0.2, 4).is_ok());
        // clockwise square
        assert!(Domain2D::polygon(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).is_err());
        let sq = Domain2D::polygon(vec![[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]).unwrap();
        let m = generate_mesh(&sq, 8, 64).unwrap();
        m.validate().unwrap();
        let (a, _) = mesh_measures(&m.refine().refine(), &SpaceForm::euclidean(2), &RadialWeight::zero()).unwrap();
        assert!((a - 1.0).abs() < 1e-3);
        assert!(Domain2D::disk(0.9).unwrap().check_inside_unit_disk(0.05).is_ok());
        assert!(Domain2D::disk(0.5).unwrap().with_offset([0.48, 0.0]).check_inside_unit_disk(0.05).is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = generate_mesh(&Domain2D::ellipse(1.5, 1.0).unwrap(), 3, 16).unwrap();
        let back = TriMesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.boundary_edges, m.boundary_edges);
        assert!(TriMesh::from_text("3 1 3\n0 0\n1 0\n").is_err());
    }

    fn convergence(dom: Domain2D, form: SpaceForm, w: RadialWeight, area: f64, length: f64) {
        let mut m = generate_mesh(&dom, 4, 32).unwrap();
        let mut errs = Vec::new();
        for _ in 0..3 {
            let (a, l) = mesh_measures(&m, &form, &w).unwrap();
            errs.push(((a - area).abs() / area, (l - length).abs() / length));
            m = m.refine();
        }
        for k in 0..2 {
            assert!(errs[k + 1].0 < errs[k].0 / 3.0, "{errs:?}");
            assert!(errs[k + 1].1 < errs[k].1 / 3.0, "{errs:?}");
        }
        assert!(errs[2].0 < 2e-3 && errs[2].1 < 2e-3);
    }

    #[test]
    fn measures_converge_to_ball_values() {
        let e2 = SpaceForm::euclidean(2);
        let zero = RadialWeight::zero();
        convergence(Domain2D::disk(1.0).unwrap(), e2, zero.clone(), PI, TAU);
        let lin = RadialWeight::Linear { a: 1.0 };
        convergence(
            Domain2D::disk(1.0).unwrap(),
            e2,
            lin.clone(),
            TAU,
            ball_boundary_weighted_measure(&e2, &lin, 1.0).unwrap(),
        );
        let h2 = SpaceForm::hyperbolic(2);
        convergence(
            Domain2D::disk(0.5f64.tanh()).unwrap(),
            h2,
            zero.clone(),
            ball_weighted_volume(&h2, &zero, 1.0).unwrap(),
            ball_boundary_weighted_measure(&h2, &zero, 1.0).unwrap(),
        );
    }

    #[test]
    fn half_mesh_structure() {
        let m = generate_half_mesh(&BoundaryCurve::Circle { r: 1.0 }, 6, 24, MeshOptions::default()).unwrap();
        m.validate().unwrap();
        let axis: Vec<usize> = m
            .boundary_edges
            .iter()
            .zip(&m.curved)
            .filter(|(_, c)| !**c)
            .flat_map(|(e, _)| *e)
            .collect();
        assert!(axis.iter().all(|&v| m.vertices[v][0] == 0.0));
        assert!(m.vertices.iter().all(|v| v[0] >= 0.0));
        let r = m.refine();
        r.validate().unwrap();
        assert!(r.vertices.iter().all(|v| v[0] >= 0.0));
        // mirror symmetry about the equator
        let mut up: Vec<[i64; 2]> = r.vertices.iter().map(|v| [(v[0] * 1e12).round() as i64, (v[1] * 1e12).round() as i64]).collect();
        let mut down: Vec<[i64; 2]> = up.iter().map(|v| [v[0], -v[1]]).collect();
        up.sort_unstable();
        down.sort_unstable();
        assert_eq!(up, down);
    }
}
