//! Euclidean projections onto the feasible sets of the rate-maximization
//! problem: unit-modulus phase vectors and the trace-bounded PSD covariance
//! cone.

use crate::linalg::{herm_eigen_sorted, hermitian_defect, C64, CMat, CVec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("input must be Hermitian (defect {defect:.3e} exceeds tolerance {tol:.3e})")]
    NotHermitian { defect: f64, tol: f64 },
    #[error("power budget must be nonnegative, got {0}")]
    NegativeBudget(f64),
}

/// Outcome of the trace-constrained eigenvalue projection.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterFillingResult {
    /// Eigenvalues of the (clipped) input, descending.
    pub eigenvalues_in: Vec<f64>,
    /// Projected allocations, `d_i = (σ_i − γ)₊`.
    pub allocations: Vec<f64>,
    /// Water level γ ≥ 0; zero whenever clipping alone is feasible.
    pub water_level: f64,
}

/// Element-wise projection onto the complex unit circle. A zero entry has
/// every phase equally close; it maps to 1 so repeated runs agree bit for
/// bit.
pub fn project_unit_modulus(v: &CVec) -> CVec {
    CVec::from_iterator(
        v.len(),
        v.iter().map(|&z| {
            let n = z.norm();
            if n == 0.0 {
                C64::new(1.0, 0.0)
            } else {
                z / n
            }
        }),
    )
}

/// Nearest-point projection of the eigenvalue vector onto
/// `{d : d ≥ 0, Σd ≤ P}`: clip negatives, and if the clipped trace still
/// exceeds the budget, find the water level γ by bisection so that
/// `Σ(σ_i − γ)₊ = P`.
pub fn water_fill_projection(sigmas: &[f64], budget: f64) -> Result<WaterFillingResult, ProjectionError> {
    if budget < 0.0 {
        return Err(ProjectionError::NegativeBudget(budget));
    }
    let clipped_sum: f64 = sigmas.iter().map(|&s| s.max(0.0)).sum();
    if clipped_sum <= budget {
        return Ok(WaterFillingResult {
            eigenvalues_in: sigmas.to_vec(),
            allocations: sigmas.iter().map(|&s| s.max(0.0)).collect(),
            water_level: 0.0,
        });
    }
    let mut lo = 0.0f64;
    let mut hi = sigmas.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-10 * budget.max(1.0);
    let alloc_sum = |gamma: f64| -> f64 { sigmas.iter().map(|&s| (s - gamma).max(0.0)).sum() };
    // Σ(σ−γ)₊ is continuous and nonincreasing in γ, ranging from the
    // clipped sum at γ=0 down to 0 at γ = max σ. The returned level is
    // always taken from the feasible side (allocation sum ≤ budget), so a
    // projected point survives re-projection unchanged.
    for _ in 0..200 {
        if budget - alloc_sum(hi) <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if alloc_sum(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma = hi;
    Ok(WaterFillingResult {
        eigenvalues_in: sigmas.to_vec(),
        allocations: sigmas.iter().map(|&s| (s - gamma).max(0.0)).collect(),
        water_level: gamma,
    })
}

/// Nearest feasible transmit covariance: eigendecompose the (symmetrized)
/// input, project the spectrum with [`water_fill_projection`], and rebuild.
pub fn project_covariance(y: &CMat, budget: f64) -> Result<CMat, ProjectionError> {
    let scale = y.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let defect = hermitian_defect(y);
    let tol = 1e-8 * scale;
    if defect > tol {
        return Err(ProjectionError::NotHermitian { defect, tol });
    }
    let (vals, vecs) = herm_eigen_sorted(y);
    let wf = water_fill_projection(vals.as_slice(), budget)?;
    let n = y.nrows();
    let mut scaled = CMat::zeros(n, n);
    for j in 0..n {
        let col = vecs.column(j) * C64::new(wf.allocations[j], 0.0);
        scaled.set_column(j, &col);
    }
    Ok(scaled * vecs.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frob;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMat {
        let a = CMat::from_fn(n, n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        (&a + a.adjoint()).scale(0.5)
    }

    #[test]
    fn unit_modulus_basic_values() {
        let v = CVec::from_vec(vec![C64::new(3.0, 4.0), C64::new(0.0, 0.0)]);
        let p = project_unit_modulus(&v);
        assert!((p[0] - C64::new(0.6, 0.8)).norm() < 1e-15);
        assert_eq!(p[1], C64::new(1.0, 0.0));
        for z in p.iter() {
            assert!((z.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_modulus_beats_circle_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u = C64::new(rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0);
            let v = CVec::from_vec(vec![u]);
            let p = project_unit_modulus(&v)[0];
            let best = (p - u).norm();
            for k in 0..10_000 {
                let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 10_000.0);
                assert!(best <= (w - u).norm() + 1e-12);
            }
        }
    }

    #[test]
    fn unit_modulus_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = CVec::from_fn(16, |_, _| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let once = project_unit_modulus(&v);
        let twice = project_unit_modulus(&once);
        assert!((&once - &twice).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-15);
    }

    #[test]
    fn water_fill_two_mode_case() {
        // σ = (3, 1), budget 2: the level sits at 1 and the top mode takes
        // the whole budget.
        let wf = water_fill_projection(&[3.0, 1.0], 2.0).unwrap();
        assert!((wf.water_level - 1.0).abs() < 1e-9);
        assert!((wf.allocations[0] - 2.0).abs() < 1e-9);
        assert!(wf.allocations[1].abs() < 1e-9);
    }

    #[test]
    fn water_fill_feasible_input_untouched() {
        let wf = water_fill_projection(&[0.5, 0.3, -1e-12], 2.0).unwrap();
        assert_eq!(wf.water_level, 0.0);
        assert_eq!(wf.allocations[0], 0.5);
        assert_eq!(wf.allocations[1], 0.3);
        assert_eq!(wf.allocations[2], 0.0);
    }

    #[test]
    fn water_fill_kkt_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let sig: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() * 4.0 - 1.0).collect();
            let p = rng.gen::<f64>() * 2.0;
            let wf = water_fill_projection(&sig, p).unwrap();
            for (d, s) in wf.allocations.iter().zip(sig.iter()) {
                assert_eq!(*d, (s - wf.water_level).max(0.0));
            }
            let total: f64 = wf.allocations.iter().sum();
            assert!(total <= p + 1e-9 * p.max(1.0));
            let clipped: f64 = sig.iter().map(|&s| s.max(0.0)).sum();
            if clipped > p {
                assert!(wf.water_level > 0.0);
                assert!((total - p).abs() <= 1e-9 * p.max(1.0), "trace not tight: {total} vs {p}");
            } else {
                assert_eq!(wf.water_level, 0.0);
            }
        }
    }

    #[test]
    fn covariance_projection_feasible_input_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_hermitian(3, &mut rng);
        let psd = &a * &a; // Hermitian squared is PSD
        let trace: f64 = psd.diagonal().iter().map(|z| z.re).sum();
        let q = project_covariance(&psd, trace + 1.0).unwrap();
        assert!(frob(&(&q - &psd)) < 1e-10 * frob(&psd));
    }

    #[test]
    fn covariance_projection_rejects_non_hermitian() {
        let mut a = CMat::identity(2, 2);
        a[(0, 1)] = C64::new(5.0, 0.0);
        assert!(matches!(
            project_covariance(&a, 1.0),
            Err(ProjectionError::NotHermitian { .. })
        ));
    }

    /// Exact independent oracle for the spectrum projection: enumerate every
    /// active set (entries pinned at zero, budget binding or slack), solve
    /// each candidate in closed form, keep the feasible minimizer of the
    /// squared distance. Exhaustive and exact for small n.
    fn oracle_simplex_projection(sig: &[f64], p: f64) -> Vec<f64> {
        let n = sig.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0u32..(1 << n) {
            let free: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
            for binding in [false, true] {
                let mut d = vec![0.0; n];
                if binding {
                    if free.is_empty() {
                        continue;
                    }
                    let gamma =
                        (free.iter().map(|&i| sig[i]).sum::<f64>() - p) / free.len() as f64;
                    for &i in &free {
                        d[i] = sig[i] - gamma;
                    }
                } else {
                    for &i in &free {
                        d[i] = sig[i];
                    }
                }
                if d.iter().any(|&x| x < -1e-12) {
                    continue;
                }
                if d.iter().sum::<f64>() > p + 1e-12 {
                    continue;
                }
                let dist: f64 = d.iter().zip(sig).map(|(a, b)| (a - b) * (a - b)).sum();
                if best.as_ref().map(|(b, _)| dist < *b).unwrap_or(true) {
                    best = Some((dist, d));
                }
            }
        }
        best.expect("at least the all-zero candidate is feasible").1
    }

    #[test]
    fn covariance_projection_matches_active_set_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let y = random_hermitian(3, &mut rng) * C64::new(2.0, 0.0);
            let p = rng.gen::<f64>() * 1.5 + 0.1;
            let q = project_covariance(&y, p).unwrap();
            let (vals, vecs) = herm_eigen_sorted(&y);
            let d = oracle_simplex_projection(vals.as_slice(), p);
            let mut dm = CMat::zeros(3, 3);
            for j in 0..3 {
                dm[(j, j)] = C64::new(d[j], 0.0);
            }
            let oracle = &vecs * dm * vecs.adjoint();
            assert!(
                frob(&(&q - &oracle)) < 1e-6,
                "projection mismatch {}",
                frob(&(&q - &oracle))
            );
        }
    }

    #[test]
    fn covariance_projection_idempotent_and_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let a = random_hermitian(3, &mut rng) * C64::new(3.0, 0.0);
            let b = random_hermitian(3, &mut rng) * C64::new(3.0, 0.0);
            let p = 1.0;
            let pa = project_covariance(&a, p).unwrap();
            let pb = project_covariance(&b, p).unwrap();
            assert!(frob(&(&pa - project_covariance(&pa, p).unwrap())) < 1e-12);
            assert!(frob(&(&pa - &pb)) <= frob(&(&a - &b)) + 1e-10);
        }
    }
}
