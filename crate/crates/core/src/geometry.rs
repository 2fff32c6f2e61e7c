//! Meta-atom lattice coordinates and the pairwise distances consumed by the
//! diffraction model.
//!
//! Each metasurface layer is a square uniform planar array in the x-z plane;
//! layers are parallel and evenly spaced along the propagation axis. Atom
//! indices are 1-based throughout the public API, scanning row by row.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("atom index {index} out of range 1..={max}")]
    AtomIndexOutOfRange { index: usize, max: usize },
    #[error("antenna index {index} out of range 1..={max}")]
    AntennaIndexOutOfRange { index: usize, max: usize },
    #[error("invalid geometry parameter: {0}")]
    InvalidParameter(String),
}

/// Which end of the link a surface stack (or phase stack) belongs to.
///
/// The two ends share one distance model up to the sign convention of the
/// lateral offset in the antenna-to-surface formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SurfaceSide {
    Transmit,
    Receive,
}

/// Physical layout of one surface stack plus its antenna array.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimGeometry {
    /// Atoms per row of the (square) surface.
    pub side_count: usize,
    /// Atoms per layer; always `side_count²`.
    pub atoms_per_layer: usize,
    /// Number of stacked metasurface layers (≥ 1).
    pub layer_count: usize,
    /// Spacing between adjacent atoms in a row/column, meters.
    pub element_spacing: f64,
    /// Total stack thickness, meters; layer spacing is `thickness / layer_count`.
    pub thickness: f64,
    /// Antennas in the uniform linear array behind (or in front of) the stack.
    pub antenna_count: usize,
    /// Carrier wavelength, meters.
    pub wavelength: f64,
    /// Effective aperture of one atom, square meters.
    pub element_area: f64,
}

impl SimGeometry {
    /// Build a square-surface geometry. The element area defaults to one full
    /// lattice cell, `element_spacing²`; use [`SimGeometry::with_element_area`]
    /// to override it.
    pub fn new(
        side_count: usize,
        layer_count: usize,
        element_spacing: f64,
        thickness: f64,
        antenna_count: usize,
        wavelength: f64,
    ) -> Result<Self, GeometryError> {
        let g = SimGeometry {
            side_count,
            atoms_per_layer: side_count * side_count,
            layer_count,
            element_spacing,
            thickness,
            antenna_count,
            wavelength,
            element_area: element_spacing * element_spacing,
        };
        g.validate()?;
        Ok(g)
    }

    /// Same geometry with an explicit per-atom area.
    pub fn with_element_area(mut self, area: f64) -> Result<Self, GeometryError> {
        if !(area > 0.0) {
            return Err(GeometryError::InvalidParameter(format!(
                "element_area must be positive, got {area}"
            )));
        }
        self.element_area = area;
        Ok(self)
    }

    fn validate(&self) -> Result<(), GeometryError> {
        if self.side_count == 0 {
            return Err(GeometryError::InvalidParameter(
                "side_count must be at least 1".into(),
            ));
        }
        if self.atoms_per_layer != self.side_count * self.side_count {
            return Err(GeometryError::InvalidParameter(
                "atoms_per_layer must equal side_count^2".into(),
            ));
        }
        if self.layer_count == 0 {
            return Err(GeometryError::InvalidParameter(
                "layer_count must be at least 1".into(),
            ));
        }
        if self.antenna_count == 0 {
            return Err(GeometryError::InvalidParameter(
                "antenna_count must be at least 1".into(),
            ));
        }
        for (name, v) in [
            ("element_spacing", self.element_spacing),
            ("thickness", self.thickness),
            ("wavelength", self.wavelength),
            ("element_area", self.element_area),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(GeometryError::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Axial spacing between adjacent layers: `thickness / layer_count`.
    pub fn layer_spacing(&self) -> f64 {
        self.thickness / self.layer_count as f64
    }

    /// Grid position of atom `m` (1-based): `(column, row)`, both in
    /// `1..=side_count`. Atoms scan each row left to right, bottom row first.
    pub fn atom_plane_indices(&self, m: usize) -> Result<(usize, usize), GeometryError> {
        atom_plane_indices(m, self.side_count)
    }

    /// In-plane distance between atoms `m` and `m_other` on the same layer.
    pub fn intra_surface_distance(
        &self,
        m: usize,
        m_other: usize,
    ) -> Result<f64, GeometryError> {
        let (mx, mz) = self.atom_plane_indices(m)?;
        let (ox, oz) = self.atom_plane_indices(m_other)?;
        let dx = mx as f64 - ox as f64;
        let dz = mz as f64 - oz as f64;
        Ok(self.element_spacing * (dx * dx + dz * dz).sqrt())
    }

    /// Distance from atom `m_other` on one layer to atom `m` on the adjacent
    /// layer: the in-plane separation and one axial layer spacing combined.
    pub fn inter_layer_distance(&self, m: usize, m_other: usize) -> Result<f64, GeometryError> {
        let r = self.intra_surface_distance(m, m_other)?;
        let d = self.layer_spacing();
        Ok((r * r + d * d).sqrt())
    }

    /// Distance from antenna `s` of the half-wavelength ULA to atom `m` on
    /// the boundary layer of the stack. Both arrays are centered on the
    /// stack axis; the ULA runs along the z-axis. The transmit and receive
    /// forms differ only in the sign convention of the lateral (x) offset,
    /// which is squared and therefore yields identical values.
    pub fn antenna_to_surface_distance(
        &self,
        s: usize,
        m: usize,
        side: SurfaceSide,
    ) -> Result<f64, GeometryError> {
        if s == 0 || s > self.antenna_count {
            return Err(GeometryError::AntennaIndexOutOfRange {
                index: s,
                max: self.antenna_count,
            });
        }
        let (mx, mz) = self.atom_plane_indices(m)?;
        let center = (self.side_count as f64 + 1.0) / 2.0;
        let ant_center = (self.antenna_count as f64 + 1.0) / 2.0;
        let z_term = (mz as f64 - center) * self.element_spacing
            - (s as f64 - ant_center) * self.wavelength / 2.0;
        let x_off = match side {
            SurfaceSide::Transmit => mx as f64 - center,
            SurfaceSide::Receive => center - mx as f64,
        } * self.element_spacing;
        let d = self.layer_spacing();
        Ok((z_term * z_term + x_off * x_off + d * d).sqrt())
    }
}

/// Grid position of atom `m` (1-based) on a square surface with
/// `side_count` atoms per row: `(column, row)`.
pub fn atom_plane_indices(m: usize, side_count: usize) -> Result<(usize, usize), GeometryError> {
    let max = side_count * side_count;
    if m == 0 || m > max {
        return Err(GeometryError::AtomIndexOutOfRange { index: m, max });
    }
    let col = (m - 1) % side_count + 1;
    let row = m.div_ceil(side_count);
    Ok((col, row))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn desk_geometry() -> SimGeometry {
        // 10x10 atoms, 7 layers, half-wavelength spacing at 6 GHz.
        SimGeometry::new(10, 7, 0.025, 0.04, 10, 0.05).unwrap()
    }

    #[test]
    fn plane_indices_corner_cases() {
        assert_eq!(atom_plane_indices(1, 10).unwrap(), (1, 1));
        assert_eq!(atom_plane_indices(15, 10).unwrap(), (5, 2));
        assert_eq!(atom_plane_indices(100, 10).unwrap(), (10, 10));
    }

    #[test]
    fn plane_indices_rejects_out_of_range() {
        assert!(matches!(
            atom_plane_indices(0, 10),
            Err(GeometryError::AtomIndexOutOfRange { .. })
        ));
        assert!(matches!(
            atom_plane_indices(101, 10),
            Err(GeometryError::AtomIndexOutOfRange { .. })
        ));
    }

    #[test]
    fn plane_indices_bijection() {
        let side = 9;
        let mut seen = vec![false; side * side];
        for m in 1..=side * side {
            let (x, z) = atom_plane_indices(m, side).unwrap();
            assert!((1..=side).contains(&x) && (1..=side).contains(&z));
            let flat = (z - 1) * side + (x - 1);
            assert!(!seen[flat], "duplicate grid cell for atom {m}");
            seen[flat] = true;
        }
        assert!(seen.iter().all(|&v| v));
    }

    #[test]
    fn intra_distance_basic_values() {
        let g = desk_geometry();
        assert_eq!(g.intra_surface_distance(1, 1).unwrap(), 0.0);
        assert!((g.intra_surface_distance(1, 2).unwrap() - 0.025).abs() < 1e-15);
        // Diagonal neighbor: one row up, one column over.
        let expect = 0.025 * 2.0_f64.sqrt();
        assert!((g.intra_surface_distance(1, 12).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn inter_layer_distance_values() {
        let g = desk_geometry();
        let d = 0.04 / 7.0;
        assert!((g.inter_layer_distance(5, 5).unwrap() - d).abs() < 1e-15);
        let expect = (0.025f64 * 0.025 + d * d).sqrt();
        assert!((g.inter_layer_distance(1, 2).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn antenna_distance_centered_single_antenna() {
        // One antenna facing the center atom of an odd-sided surface: every
        // offset vanishes and only the axial gap remains.
        let g = SimGeometry::new(5, 2, 0.025, 0.04, 1, 0.05).unwrap();
        let center_atom = 13; // column 3, row 3 of a 5x5 grid
        let d = g
            .antenna_to_surface_distance(1, center_atom, SurfaceSide::Transmit)
            .unwrap();
        assert!((d - g.layer_spacing()).abs() < 1e-15);
    }

    #[test]
    fn antenna_distance_matches_direct_formula() {
        // Independent re-evaluation of the closed form for s = 1, m = 1.
        let g = desk_geometry();
        let (mx, mz) = (1.0f64, 1.0f64);
        let c = (10.0 + 1.0) / 2.0;
        let ac = (10.0 + 1.0) / 2.0;
        let dt = 0.04f64 / 7.0;
        let z = (mz - c) * 0.025 - (1.0 - ac) * 0.05 / 2.0;
        let x = (mx - c) * 0.025;
        let expect = (z * z + x * x + dt * dt).sqrt();
        let got = g
            .antenna_to_surface_distance(1, 1, SurfaceSide::Transmit)
            .unwrap();
        assert!((got - expect).abs() < 1e-15, "got {got}, expected {expect}");
    }

    #[test]
    fn receive_form_mirrors_transmit_form() {
        // The receive-side lateral offset is the reflection of the transmit
        // one about the surface center; both enter squared, so the distances
        // agree atom by atom once the column is reflected.
        let g = desk_geometry();
        for s in 1..=g.antenna_count {
            for m in [1usize, 7, 23, 55, 100] {
                let (mx, mz) = g.atom_plane_indices(m).unwrap();
                let mirrored_col = g.side_count + 1 - mx;
                let m_reflected = (mz - 1) * g.side_count + mirrored_col;
                let tx = g
                    .antenna_to_surface_distance(s, m, SurfaceSide::Transmit)
                    .unwrap();
                let rx = g
                    .antenna_to_surface_distance(s, m_reflected, SurfaceSide::Receive)
                    .unwrap();
                assert!((tx - rx).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn antenna_distance_never_below_layer_spacing() {
        let g = desk_geometry();
        for s in 1..=g.antenna_count {
            for m in 1..=g.atoms_per_layer {
                let d = g
                    .antenna_to_surface_distance(s, m, SurfaceSide::Transmit)
                    .unwrap();
                assert!(d >= g.layer_spacing() - 1e-15);
            }
        }
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(SimGeometry::new(0, 1, 0.025, 0.04, 1, 0.05).is_err());
        assert!(SimGeometry::new(4, 0, 0.025, 0.04, 1, 0.05).is_err());
        assert!(SimGeometry::new(4, 1, -0.025, 0.04, 1, 0.05).is_err());
        assert!(SimGeometry::new(4, 1, 0.025, 0.04, 0, 0.05).is_err());
        assert!(SimGeometry::new(4, 1, 0.025, 0.04, 1, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn intra_distance_symmetric_and_triangle(
            seed in 0u64..1000,
        ) {
            let g = SimGeometry::new(8, 3, 0.025, 0.03, 4, 0.05).unwrap();
            let n = g.atoms_per_layer;
            let a = (seed as usize * 7919) % n + 1;
            let b = (seed as usize * 104729) % n + 1;
            let c = (seed as usize * 1299709) % n + 1;
            let dab = g.intra_surface_distance(a, b).unwrap();
            let dba = g.intra_surface_distance(b, a).unwrap();
            prop_assert!((dab - dba).abs() < 1e-15);
            let dac = g.intra_surface_distance(a, c).unwrap();
            let dcb = g.intra_surface_distance(c, b).unwrap();
            prop_assert!(dab <= dac + dcb + 1e-12);
        }

        #[test]
        fn inter_layer_pythagoras(seed in 0u64..500) {
            // Moderate in-plane-to-axial ratio keeps the subtraction
            // well-conditioned so the 1e-12 relative check is meaningful.
            let g = SimGeometry::new(6, 2, 0.025, 0.04, 4, 0.05).unwrap();
            let n = g.atoms_per_layer;
            let a = (seed as usize * 31) % n + 1;
            let b = (seed as usize * 57) % n + 1;
            let r = g.intra_surface_distance(a, b).unwrap();
            let rl = g.inter_layer_distance(a, b).unwrap();
            let d2 = g.layer_spacing() * g.layer_spacing();
            prop_assert!(((rl * rl - r * r) - d2).abs() <= 1e-12 * d2);
            prop_assert!(rl >= g.layer_spacing());
        }
    }
}
