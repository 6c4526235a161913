//! Lock-in demodulation of the bright-state population.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Number of phases in the coarse search over `[0, π)`.
const COARSE_PHASES: usize = 360;
const PHASE_TOL: f64 = 1e-6;
const FLAT_TOL: f64 = 1e-14;

/// Cosine (`x`) and sine (`y`) quadratures at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockinPoint {
    pub x: f64,
    pub y: f64,
    pub f_mod: f64,
    pub omega0: Option<f64>,
}

impl LockinPoint {
    pub fn new(x: f64, y: f64, f_mod: f64) -> Self {
        LockinPoint {
            x,
            y,
            f_mod,
            omega0: None,
        }
    }

    pub fn at_field(mut self, omega0: f64) -> Self {
        self.omega0 = Some(omega0);
        self
    }

    pub fn magnitude(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Fourier quadratures of one period of a waveform sampled at `t_k = k·T/N`.
///
/// `X = (1/N) Σ p_k cos(2πk/N)`, the periodic trapezoid rule for
/// `(1/T)∫ p(t) cos(2π f_mod t) dt`; `Y` likewise with the sine.
pub fn demodulate(waveform: &[f64], f_mod: f64) -> Result<LockinPoint> {
    let n = waveform.len();
    if n < 4 {
        return Err(Error::InvalidParameter {
            name: "waveform",
            reason: format!("need at least 4 samples per period, got {n}"),
        });
    }
    let (mut x, mut y) = (0.0, 0.0);
    for (k, &p) in waveform.iter().enumerate() {
        let (s, c) = (TAU * k as f64 / n as f64).sin_cos();
        x += p * c;
        y += p * s;
    }
    Ok(LockinPoint::new(x / n as f64, y / n as f64, f_mod))
}

/// Quadrature seen by a lock-in detector with phase `phi`.
pub fn rotate_phase(p: &LockinPoint, phi: f64) -> f64 {
    p.x * phi.cos() + p.y * phi.sin()
}

/// `max - min` of the rotated quadrature over the spectrum.
pub fn peak_to_peak(spectrum: &[LockinPoint], phi: f64) -> f64 {
    let (lo, hi) = spectrum
        .iter()
        .map(|p| rotate_phase(p, phi))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

/// Detector phase in `[0, π)` maximizing the peak-to-peak line amplitude,
/// and that amplitude.
pub fn optimal_phase_amplitude(spectrum: &[LockinPoint]) -> Result<(f64, f64)> {
    if spectrum.is_empty() {
        return Err(Error::InvalidParameter {
            name: "spectrum",
            reason: "empty".into(),
        });
    }
    let pp = |phi: f64| peak_to_peak(spectrum, phi);
    let step = PI / COARSE_PHASES as f64;
    let (best_k, best) = (0..COARSE_PHASES).map(|k| (k, pp(k as f64 * step))).fold(
        (0, f64::NEG_INFINITY),
        |acc, (k, v)| if v > acc.1 { (k, v) } else { acc },
    );
    if best.is_nan() || best < FLAT_TOL {
        return Err(Error::FlatSpectrum {
            peak_to_peak: best.max(0.0),
        });
    }

    let center = best_k as f64 * step;
    let (phi, value) = golden_section_max(pp, center - step, center + step, PHASE_TOL);
    let (phi, value) = if value >= best {
        (phi, value)
    } else {
        (center, best)
    };
    Ok((phi.rem_euclid(PI), value))
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    (mid, f(mid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wave(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|k| f(TAU * k as f64 / n as f64)).collect()
    }

    #[test]
    fn pure_tones() {
        let c = demodulate(&wave(64, |_| 0.7), 1.0).unwrap();
        assert!(c.x.abs() < 1e-15 && c.y.abs() < 1e-15);
        let cx = demodulate(&wave(64, |th| 0.3 * th.cos()), 1.0).unwrap();
        assert!((cx.x - 0.15).abs() < 1e-15 && cx.y.abs() < 1e-15);
        let sy = demodulate(&wave(64, |th| 0.3 * th.sin()), 1.0).unwrap();
        assert!(sy.x.abs() < 1e-15 && (sy.y - 0.15).abs() < 1e-15);
        // Second harmonic is rejected.
        let h2 = demodulate(&wave(64, |th| (2.0 * th).cos()), 1.0).unwrap();
        assert!(h2.magnitude() < 1e-15);
        assert!(demodulate(&[1.0, 2.0, 3.0], 1.0).is_err());
    }

    #[test]
    fn phase_rotation() {
        let p = LockinPoint::new(1.0, 1.0, 1.0);
        assert_eq!(rotate_phase(&p, 0.0), 1.0);
        assert!((rotate_phase(&p, PI / 2.0) - 1.0).abs() < 1e-15);
        assert!((rotate_phase(&p, PI / 4.0) - 2f64.sqrt()).abs() < 1e-15);
        let q = LockinPoint::new(0.3, -0.2, 1.0);
        assert!((rotate_phase(&q, PI / 2.0) + 0.2).abs() < 1e-15);
    }

    fn derivative_line(phi0: f64) -> Vec<LockinPoint> {
        (0..81)
            .map(|k| {
                let w = -2.0 + 0.05 * k as f64;
                let s = -2.0 * w / (1.0 + w * w).powi(2);
                // Rotate so that the detector at phi0 recovers `s`.
                LockinPoint::new(s * phi0.cos(), s * phi0.sin(), 1.0).at_field(w)
            })
            .collect()
    }

    fn phase_distance(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(PI);
        d.min(PI - d)
    }

    #[test]
    fn single_quadrature_spectrum() {
        let spec = derivative_line(0.0);
        let (phi, amp) = optimal_phase_amplitude(&spec).unwrap();
        assert!(phase_distance(phi, 0.0) < 1e-6);
        let xs: Vec<f64> = spec.iter().map(|p| p.x).collect();
        let expected = xs.iter().cloned().fold(f64::MIN, f64::max)
            - xs.iter().cloned().fold(f64::MAX, f64::min);
        assert!((amp - expected).abs() < 1e-12);
    }

    #[test]
    fn phase_equivariance() {
        let base = derivative_line(0.4);
        let (phi_base, amp_base) = optimal_phase_amplitude(&base).unwrap();
        assert!(phase_distance(phi_base, 0.4) < 1e-6);
        let phi0 = 1.1;
        let rotated: Vec<LockinPoint> = base
            .iter()
            .map(|p| {
                LockinPoint::new(
                    rotate_phase(p, phi0),
                    rotate_phase(p, phi0 + PI / 2.0),
                    p.f_mod,
                )
            })
            .collect();
        let (phi_rot, amp_rot) = optimal_phase_amplitude(&rotated).unwrap();
        assert!(phase_distance(phi_rot + phi0, phi_base) < 1e-6);
        assert!((amp_rot - amp_base).abs() < 1e-12);
    }

    #[test]
    fn flat_spectrum_is_reported() {
        let flat = vec![LockinPoint::new(0.0, 0.0, 1.0); 5];
        assert!(matches!(
            optimal_phase_amplitude(&flat),
            Err(Error::FlatSpectrum { .. })
        ));
    }

    proptest! {
        #[test]
        fn demodulation_is_linear(
            a in prop::collection::vec(-1.0f64..1.0, 16),
            b in prop::collection::vec(-1.0f64..1.0, 16),
        ) {
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let (pa, pb, ps) = (
                demodulate(&a, 1.0).unwrap(),
                demodulate(&b, 1.0).unwrap(),
                demodulate(&sum, 1.0).unwrap(),
            );
            prop_assert!((ps.x - pa.x - pb.x).abs() < 1e-14);
            prop_assert!((ps.y - pa.y - pb.y).abs() < 1e-14);
        }

        #[test]
        fn rotation_is_pi_antiperiodic(x in -1.0f64..1.0, y in -1.0f64..1.0, phi in -5.0f64..5.0) {
            let p = LockinPoint::new(x, y, 1.0);
            prop_assert!((rotate_phase(&p, phi + PI) + rotate_phase(&p, phi)).abs() < 1e-14);
        }

        #[test]
        fn quadratures_bounded_by_signal(samples in prop::collection::vec(0.0f64..1.0, 8..64)) {
            let p = demodulate(&samples, 1.0).unwrap();
            let max = samples.iter().cloned().fold(0.0, f64::max);
            prop_assert!(p.magnitude() <= max + 1e-15);
        }
    }
}
