//! Shared fixtures for the solver benchmarks.

use steklov_core::axisym3d::{MeridianDomain, MeridianKind};
use steklov_core::mesh2d::generate_mesh;
use steklov_core::{Domain2D, RadialWeight, SpaceForm, TriMesh};

/// `φ(t) = −t/2`, the weight used throughout the benches.
pub fn weight() -> RadialWeight {
    RadialWeight::Linear { a: 0.5 }
}

pub fn plane() -> SpaceForm {
    SpaceForm::euclidean(2)
}

/// Ellipse mesh at `(8, 64)` refined `refinements` times.
pub fn ellipse_mesh(refinements: usize) -> TriMesh {
    let dom = Domain2D::ellipse(1.25, 0.8).expect("valid ellipse");
    let mut m = generate_mesh(&dom, 8, 64).expect("mesh");
    for _ in 0..refinements {
        m = m.refine();
    }
    m
}

pub fn spheroid(refinements: usize) -> MeridianDomain {
    let mut d = MeridianDomain::with_default_mesh(MeridianKind::Spheroid { a: 1.1, c: 0.85 }).expect("valid spheroid");
    for _ in 0..refinements {
        d = d.refine();
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        let m = ellipse_mesh(1);
        assert_eq!(m.triangles.len(), 4 * ellipse_mesh(0).triangles.len());
        assert!(spheroid(0).mesh.validate().is_ok());
    }
}
