//! Energies, energy balance and natural frequencies from transients.

use crate::assembly::DiagMass;
use crate::{Error, Result, Scalar};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// ½ Σ M_ii q̇_i² in mJ (N·mm).
pub fn kinetic_energy<T: Scalar>(v: &[T], mass: &DiagMass<T>) -> T {
    T::half() * v.iter().zip(&mass.m).map(|(&vi, &mi)| mi * vi * vi).sum::<T>()
}

/// Accumulated work of internal and external forces (mJ) and the current
/// kinetic energy.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyLedger<T> {
    pub w_kin: T,
    pub w_int: T,
    pub w_ext: T,
}

fn trapezoid<T: Scalar>(start: &[T], end: &[T], dq: &[T]) -> T {
    start
        .iter()
        .zip(end)
        .zip(dq)
        .map(|((&a, &b), &d)| (a + b) * d)
        .sum::<T>()
        * T::half()
}

/// W += ½ (f_start + f_end)ᵀ Δq, separately for external and internal forces.
pub fn accumulate_work<T: Scalar>(
    ledger: EnergyLedger<T>,
    f_ext: (&[T], &[T]),
    f_int: (&[T], &[T]),
    dq: &[T],
) -> EnergyLedger<T> {
    EnergyLedger {
        w_kin: ledger.w_kin,
        w_int: ledger.w_int + trapezoid(f_int.0, f_int.1, dq),
        w_ext: ledger.w_ext + trapezoid(f_ext.0, f_ext.1, dq),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BalanceError<T> {
    pub percent: T,
    /// True when |W_ext| was below the guard and 0 was returned.
    pub guarded: bool,
}

/// 100 |(W_ext − W_int − W_kin)/W_ext|, or a flagged 0 when |W_ext| < `guard`.
pub fn energy_balance_error<T: Scalar>(ledger: &EnergyLedger<T>, guard: T) -> BalanceError<T> {
    if ledger.w_ext.abs() < guard {
        return BalanceError {
            percent: T::zero(),
            guarded: true,
        };
    }
    BalanceError {
        percent: T::lit(100.0) * ((ledger.w_ext - ledger.w_int - ledger.w_kin) / ledger.w_ext).abs(),
        guarded: false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub frequency: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Ascending in frequency.
    pub peaks: Vec<Peak>,
}

impl Spectrum {
    pub fn nyquist(&self) -> f64 {
        self.frequencies.last().copied().unwrap_or(0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frequency_hz,amplitude\n");
        for (f, a) in self.frequencies.iter().zip(&self.amplitudes) {
            s.push_str(&format!("{f},{a}\n"));
        }
        s
    }
}

/// Peaks below this fraction of the largest are ignored.
const PEAK_FLOOR: f64 = 0.05;

/// Magnitude spectrum of the mean-removed, Hann-windowed series (zero-padded
/// to four times the next power of two) and its strongest `n_peaks` local
/// maxima, refined by a parabola through the log-magnitudes of three bins.
pub fn fft_peaks<T: Scalar>(series: &[T], dt: T, n_peaks: usize) -> Result<Spectrum> {
    let n = series.len();
    if n < 16 {
        return Err(Error::InvalidParameter(format!(
            "FFT needs at least 16 samples, got {n}"
        )));
    }
    let dt = dt.as_f64();
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("sampling step must be positive, got {dt}")));
    }
    let x: Vec<f64> = series.iter().map(|v| v.as_f64()).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let len = 4 * n.next_power_of_two();
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); len];
    for (k, (b, v)) in buf.iter_mut().zip(&x).enumerate() {
        let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
        b.re = (v - mean) * w;
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let bins = len / 2 + 1;
    let df = 1.0 / (len as f64 * dt);
    let amplitudes: Vec<f64> = buf[..bins].iter().map(|c| c.norm() * 2.0 / n as f64).collect();
    let frequencies: Vec<f64> = (0..bins).map(|k| k as f64 * df).collect();

    let top = amplitudes.iter().cloned().fold(0.0, f64::max);
    let scale = x.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let mut peaks = Vec::new();
    if top > 1e-9 * scale && top > 0.0 {
        for k in 1..bins - 1 {
            let (a, b, c) = (amplitudes[k - 1], amplitudes[k], amplitudes[k + 1]);
            if b > a && b >= c && b >= PEAK_FLOOR * top {
                let (la, lb, lc) = (a.max(1e-300).ln(), b.ln(), c.max(1e-300).ln());
                let denom = la - 2.0 * lb + lc;
                let delta = if denom < 0.0 { 0.5 * (la - lc) / denom } else { 0.0 };
                let delta = delta.clamp(-0.5, 0.5);
                peaks.push(Peak {
                    frequency: (k as f64 + delta) * df,
                    amplitude: (lb - 0.25 * (la - lc) * delta).exp(),
                });
            }
        }
    }
    peaks.sort_by(|p, q| q.amplitude.total_cmp(&p.amplitude));
    peaks.truncate(n_peaks);
    peaks.sort_by(|p, q| p.frequency.total_cmp(&q.frequency));
    Ok(Spectrum {
        frequencies,
        amplitudes,
        peaks,
    })
}
