//! Spatially correlated Rayleigh fading between the two surface stacks,
//! log-distance path loss with shadow fading, and the end-to-end channel.

use crate::geometry::SimGeometry;
use crate::linalg::{herm_eigen_sorted, to_complex, C64, CMat};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("matrix must be symmetric (defect {defect:.3e})")]
    NotSymmetric { defect: f64 },
    #[error("distance {distance} is below the reference distance {reference}")]
    BelowReferenceDistance { distance: f64, reference: f64 },
    #[error("non-conformable dimensions: {0}")]
    DimensionMismatch(String),
}

/// Large-scale link parameters shared by every realization of a scenario.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinkParams {
    /// Transmitter-to-receiver distance, meters.
    pub distance: f64,
    /// Path-loss reference distance, meters.
    pub ref_distance: f64,
    /// Path-loss exponent.
    pub exponent: f64,
    /// Shadow-fading standard deviation, dB.
    pub shadow_sigma_db: f64,
    /// Receiver noise power, watts.
    pub noise_power: f64,
    /// Transmit power budget, watts.
    pub power_budget: f64,
    /// Carrier wavelength, meters.
    pub wavelength: f64,
}

/// One draw of the fading channel between the stacks, together with the
/// fixed correlation square roots and the large-scale loss that shaped it.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Fading matrix between transmit-stack output atoms and receive-stack
    /// input atoms (receive atoms × transmit atoms).
    pub g: CMat,
    /// `g` pre-scaled by 1/√noise_power; cached because every objective and
    /// gradient evaluation consumes this form.
    pub g_bar: CMat,
    pub corr_tx_sqrt: CMat,
    pub corr_rx_sqrt: CMat,
    pub pathloss_db: f64,
    pub pathloss_linear: f64,
    pub noise_power: f64,
    pub seed: u64,
}

/// End-to-end channel and its noise-normalized form.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    pub h: CMat,
    /// `h / sqrt(noise_power)`.
    pub h_bar: CMat,
}

/// Spatial correlation of an isotropically scattered far field over one
/// surface: entry (i, j) is `sinc(2·r_ij/λ)` with the in-plane atom
/// distance `r_ij`. Symmetric with a unit diagonal.
pub fn correlation_matrix(geometry: &SimGeometry) -> DMatrix<f64> {
    let n = geometry.atoms_per_layer;
    DMatrix::from_fn(n, n, |i, j| {
        let r = geometry
            .intra_surface_distance(i + 1, j + 1)
            .expect("indices in range by construction");
        sinc(2.0 * r / geometry.wavelength)
    })
}

/// Normalized sinc: sin(πx)/(πx), with sinc(0) = 1.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Hermitian square root of a symmetric PSD matrix: `V·diag(√λ⁺)·Vᴴ`.
///
/// Negative eigenvalues (floating-point leakage of a theoretically PSD
/// input) are clipped to zero, so `output·outputᴴ` reconstructs the clipped
/// input. The Hermitian form matters: coloring the white matrix with a
/// non-Hermitian factor would distort the transmit-side correlation.
pub fn psd_sqrt(matrix: &DMatrix<f64>) -> Result<CMat, ChannelError> {
    let defect = (matrix - matrix.transpose())
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    let scale = matrix.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if defect > 1e-10 * scale {
        return Err(ChannelError::NotSymmetric { defect });
    }
    let (vals, vecs) = herm_eigen_sorted(&to_complex(matrix));
    let n = vals.len();
    let mut scaled = CMat::zeros(n, n);
    for j in 0..n {
        let s = vals[j].max(0.0).sqrt();
        let col = vecs.column(j) * C64::new(s, 0.0);
        scaled.set_column(j, &col);
    }
    Ok(scaled * vecs.adjoint())
}

/// Log-distance path loss in dB: free-space loss at the reference distance
/// plus the distance-exponent term plus one zero-mean Gaussian shadow draw.
pub fn path_loss_db<R: Rng>(
    distance: f64,
    ref_distance: f64,
    exponent: f64,
    shadow_sigma_db: f64,
    wavelength: f64,
    rng: &mut R,
) -> Result<f64, ChannelError> {
    if distance < ref_distance {
        return Err(ChannelError::BelowReferenceDistance {
            distance,
            reference: ref_distance,
        });
    }
    let free_space = 20.0 * (4.0 * PI * ref_distance / wavelength).log10();
    let slope = 10.0 * exponent * (distance / ref_distance).log10();
    let shadow = shadow_sigma_db * standard_normal(rng);
    Ok(free_space + slope + shadow)
}

/// One standard normal draw via Box-Muller; consumes exactly two uniforms,
/// which keeps seeded streams reproducible and easy to reason about.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Draw one correlated Rayleigh realization between the stacks.
///
/// The white matrix has i.i.d. circularly symmetric complex Gaussian
/// entries whose variance equals the linear path gain; the correlation
/// square roots then color it on both sides. The shadow-fading term is
/// drawn once per realization from the same seeded stream, so a seed fully
/// determines the output.
pub fn draw_channel(
    geometry_tx: &SimGeometry,
    geometry_rx: &SimGeometry,
    link: &LinkParams,
    seed: u64,
) -> Result<ChannelRealization, ChannelError> {
    let corr_tx_sqrt = psd_sqrt(&correlation_matrix(geometry_tx))?;
    let corr_rx_sqrt = psd_sqrt(&correlation_matrix(geometry_rx))?;
    draw_channel_with_sqrts(geometry_tx, geometry_rx, link, seed, corr_tx_sqrt, corr_rx_sqrt)
}

/// Same as [`draw_channel`] but reusing precomputed correlation square
/// roots; sweeps over many realizations of one geometry use this.
pub fn draw_channel_with_sqrts(
    geometry_tx: &SimGeometry,
    geometry_rx: &SimGeometry,
    link: &LinkParams,
    seed: u64,
    corr_tx_sqrt: CMat,
    corr_rx_sqrt: CMat,
) -> Result<ChannelRealization, ChannelError> {
    let m = geometry_tx.atoms_per_layer;
    let n = geometry_rx.atoms_per_layer;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let pathloss_db = path_loss_db(
        link.distance,
        link.ref_distance,
        link.exponent,
        link.shadow_sigma_db,
        link.wavelength,
        &mut rng,
    )?;
    let pathloss_linear = 10f64.powf(-pathloss_db / 10.0);

    // Per-entry variance equals the linear path gain, split evenly between
    // the real and imaginary parts.
    let component_sigma = (pathloss_linear / 2.0).sqrt();
    let mut white = CMat::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            white[(i, j)] = C64::new(
                component_sigma * standard_normal(&mut rng),
                component_sigma * standard_normal(&mut rng),
            );
        }
    }

    let g = &corr_rx_sqrt * white * &corr_tx_sqrt;
    let g_bar = &g / C64::new(link.noise_power.sqrt(), 0.0);
    Ok(ChannelRealization {
        g,
        g_bar,
        corr_tx_sqrt,
        corr_rx_sqrt,
        pathloss_db,
        pathloss_linear,
        noise_power: link.noise_power,
        seed,
    })
}

/// Compose the end-to-end channel from the receive response, the fading
/// matrix, and the transmit response, plus its noise-normalized form.
pub fn effective_channel(
    z: &CMat,
    g: &CMat,
    p: &CMat,
    noise_power: f64,
) -> Result<EffectiveChannel, ChannelError> {
    if z.ncols() != g.nrows() || g.ncols() != p.nrows() {
        return Err(ChannelError::DimensionMismatch(format!(
            "receive response {}x{}, fading {}x{}, transmit response {}x{}",
            z.nrows(),
            z.ncols(),
            g.nrows(),
            g.ncols(),
            p.nrows(),
            p.ncols()
        )));
    }
    let h = z * g * p;
    let h_bar = &h / C64::new(noise_power.sqrt(), 0.0);
    Ok(EffectiveChannel { h, h_bar })
}
