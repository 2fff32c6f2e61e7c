//! Fixed diffraction transfer matrices of a surface stack and their
//! composition with tunable phase layers.
//!
//! Every entry of a transfer matrix is a Rayleigh-Sommerfeld diffraction
//! coefficient between two elements. The matrices depend only on geometry
//! and are computed once; phase layers are applied as diagonal scalings, so
//! no dense diagonal matrix is ever materialized.

use crate::geometry::{GeometryError, SimGeometry};
use crate::linalg::{scale_cols_inplace, scale_rows_inplace, C64, CMat, CVec};
use std::f64::consts::PI;
use thiserror::Error;

pub use crate::geometry::SurfaceSide;

#[derive(Debug, Error)]
pub enum PropagationError {
    #[error("distance must satisfy distance >= axial_gap > 0 (got gap {gap}, distance {distance})")]
    InvalidDistance { gap: f64, distance: f64 },
    #[error("phase stack is for the {stack:?} side but the chain is for {chain:?}")]
    SideMismatch {
        stack: SurfaceSide,
        chain: SurfaceSide,
    },
    #[error("phase stack has {stack_layers} layers of length {stack_atoms}, chain expects {chain_layers} layers of length {chain_atoms}")]
    DimensionMismatch {
        stack_layers: usize,
        stack_atoms: usize,
        chain_layers: usize,
        chain_atoms: usize,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Per-layer phase coefficients of one surface stack.
///
/// Feasible stacks have unit-modulus entries; the container itself does not
/// enforce that, because gradient checks and projections need to evaluate
/// the response at arbitrary complex coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStack {
    pub side: SurfaceSide,
    pub layers: Vec<CVec>,
}

impl PhaseStack {
    /// Every atom of every layer set to `e^{j·angle}`.
    pub fn uniform_angle(
        side: SurfaceSide,
        layer_count: usize,
        atoms_per_layer: usize,
        angle: f64,
    ) -> Self {
        let coeff = C64::from_polar(1.0, angle);
        PhaseStack {
            side,
            layers: vec![CVec::from_element(atoms_per_layer, coeff); layer_count],
        }
    }

    /// Independent phases drawn uniformly from [0, 2π).
    pub fn random<R: rand::Rng>(
        side: SurfaceSide,
        layer_count: usize,
        atoms_per_layer: usize,
        rng: &mut R,
    ) -> Self {
        let layers = (0..layer_count)
            .map(|_| {
                CVec::from_iterator(
                    atoms_per_layer,
                    (0..atoms_per_layer)
                        .map(|_| C64::from_polar(1.0, rng.gen::<f64>() * 2.0 * PI)),
                )
            })
            .collect();
        PhaseStack { side, layers }
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn atoms_per_layer(&self) -> usize {
        self.layers.first().map(|l| l.len()).unwrap_or(0)
    }

    /// Largest deviation of any coefficient modulus from 1.
    pub fn unit_modulus_defect(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.iter())
            .map(|z| (z.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Fixed diffraction matrices of one stack: `inner[i]` couples layer `i+1`
/// to layer `i+2` (atoms × atoms, one per layer transition), `boundary`
/// couples the antenna array to its adjacent layer. On the transmit side
/// the boundary is atoms × antennas; on the receive side it is oriented
/// antennas × atoms.
#[derive(Debug, Clone)]
pub struct TransferChain {
    pub side: SurfaceSide,
    pub boundary: CMat,
    pub inner: Vec<CMat>,
    pub atoms_per_layer: usize,
    pub layer_count: usize,
}

/// Rayleigh-Sommerfeld transmission coefficient between two elements
/// separated by `distance` with axial (normal) separation `axial_gap`:
///
/// `(A·cosχ / r)·(1/(2πr) − j/λ)·e^{j2πr/λ}` with `cosχ = axial_gap / r`.
///
/// Surfaces are parallel with an axial normal, so the obliquity cosine is
/// the axial gap over the full path length.
pub fn rs_coefficient(
    area: f64,
    axial_gap: f64,
    distance: f64,
    wavelength: f64,
) -> Result<C64, PropagationError> {
    if !(axial_gap > 0.0) || distance < axial_gap {
        return Err(PropagationError::InvalidDistance {
            gap: axial_gap,
            distance,
        });
    }
    let cos_chi = axial_gap / distance;
    let amplitude = area * cos_chi / distance;
    let radial = C64::new(1.0 / (2.0 * PI * distance), -1.0 / wavelength);
    let phase = C64::from_polar(1.0, 2.0 * PI * distance / wavelength);
    Ok(amplitude * radial * phase)
}

/// Build every fixed transfer matrix of one stack from its geometry.
///
/// Entries are the literal Rayleigh-Sommerfeld coefficients. Each matrix is
/// then projected onto the set of passive couplings by capping its singular
/// values at one: the half-wavelength-sampled kernel overestimates the
/// coupling once the layer gap drops below roughly half a wavelength, and a
/// passive layer cannot hand any mode more energy than it received.
/// Matrices already below unit gain pass through bit-exactly.
pub fn build_transfer_chain(
    geometry: &SimGeometry,
    side: SurfaceSide,
) -> Result<TransferChain, PropagationError> {
    let atoms = geometry.atoms_per_layer;
    let gap = geometry.layer_spacing();
    let lambda = geometry.wavelength;
    let area = geometry.element_area;

    let boundary = match side {
        SurfaceSide::Transmit => CMat::from_fn(atoms, geometry.antenna_count, |i, j| {
            let r = geometry
                .antenna_to_surface_distance(j + 1, i + 1, side)
                .expect("indices in range by construction");
            rs_coefficient(area, gap, r, lambda).expect("distance >= axial gap")
        }),
        SurfaceSide::Receive => CMat::from_fn(geometry.antenna_count, atoms, |i, j| {
            let r = geometry
                .antenna_to_surface_distance(i + 1, j + 1, side)
                .expect("indices in range by construction");
            rs_coefficient(area, gap, r, lambda).expect("distance >= axial gap")
        }),
    };

    let mut inner = Vec::with_capacity(geometry.layer_count.saturating_sub(1));
    for _ in 1..geometry.layer_count {
        // All layer transitions share the same spacing, so one matrix shape
        // serves every transition; entries depend only on atom pair.
        let w = CMat::from_fn(atoms, atoms, |i, j| {
            let r = geometry
                .inter_layer_distance(i + 1, j + 1)
                .expect("indices in range by construction");
            rs_coefficient(area, gap, r, lambda).expect("distance >= axial gap")
        });
        inner.push(passivity_clip(w));
    }

    Ok(TransferChain {
        side,
        boundary: passivity_clip(boundary),
        inner,
        atoms_per_layer: atoms,
        layer_count: geometry.layer_count,
    })
}

/// Frobenius-nearest passive operator: singular values above one are
/// clipped to one, everything else (including all singular vectors) is
/// preserved. Computed as a right spectral multiplier of the Gram matrix,
/// which keeps the result deterministic even for degenerate modes and
/// leaves sub-unit matrices untouched.
fn passivity_clip(m: CMat) -> CMat {
    use crate::linalg::herm_eigen_sorted;
    let gram = m.adjoint() * &m;
    let (vals, vecs) = herm_eigen_sorted(&gram);
    if vals.iter().all(|&v| v <= 1.0) {
        return m;
    }
    let n = vals.len();
    let mut scaled = CMat::zeros(n, n);
    for j in 0..n {
        // min(1, 1/σ) per mode, with σ² the Gram eigenvalue.
        let r = if vals[j] > 1.0 { vals[j].sqrt().recip() } else { 1.0 };
        let col = vecs.column(j) * C64::new(r, 0.0);
        scaled.set_column(j, &col);
    }
    m * (scaled * vecs.adjoint())
}

impl TransferChain {
    pub fn antenna_count(&self) -> usize {
        match self.side {
            SurfaceSide::Transmit => self.boundary.ncols(),
            SurfaceSide::Receive => self.boundary.nrows(),
        }
    }

    fn check_stack(&self, phases: &PhaseStack) -> Result<(), PropagationError> {
        if phases.side != self.side {
            return Err(PropagationError::SideMismatch {
                stack: phases.side,
                chain: self.side,
            });
        }
        if phases.layer_count() != self.layer_count
            || phases.atoms_per_layer() != self.atoms_per_layer
        {
            return Err(PropagationError::DimensionMismatch {
                stack_layers: phases.layer_count(),
                stack_atoms: phases.atoms_per_layer(),
                chain_layers: self.layer_count,
                chain_atoms: self.atoms_per_layer,
            });
        }
        Ok(())
    }
}

/// Wave-domain response of the transmit stack: the output-layer phase
/// scaling applied last, the antenna boundary first. Result is
/// atoms × antennas.
pub fn sim_transmit_matrix(
    chain: &TransferChain,
    phases: &PhaseStack,
) -> Result<CMat, PropagationError> {
    if chain.side != SurfaceSide::Transmit {
        return Err(PropagationError::SideMismatch {
            stack: phases.side,
            chain: chain.side,
        });
    }
    chain.check_stack(phases)?;
    let mut x = chain.boundary.clone();
    for (l, phi) in phases.layers.iter().enumerate() {
        scale_rows_inplace(&mut x, phi);
        if l + 1 < chain.layer_count {
            x = &chain.inner[l] * x;
        }
    }
    Ok(x)
}

/// Wave-domain response of the receive stack: the field enters at the last
/// layer and exits through the antenna boundary. Result is antennas × atoms.
pub fn sim_receive_matrix(
    chain: &TransferChain,
    phases: &PhaseStack,
) -> Result<CMat, PropagationError> {
    if chain.side != SurfaceSide::Receive {
        return Err(PropagationError::SideMismatch {
            stack: phases.side,
            chain: chain.side,
        });
    }
    chain.check_stack(phases)?;
    let mut y = chain.boundary.clone();
    for (k, psi) in phases.layers.iter().enumerate() {
        scale_cols_inplace(&mut y, psi);
        if k + 1 < chain.layer_count {
            y = y * &chain.inner[k];
        }
    }
    Ok(y)
}
