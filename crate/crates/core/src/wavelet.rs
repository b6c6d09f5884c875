//! Mother-wavelet tables, dilated kernels and the continuous wavelet transform.
//!
//! Daubechies, Coiflet and Symmlet wavelets have no closed form. The scaling
//! function is solved exactly at the integers (eigenvector of the refinement
//! matrix) and then refined dyadically, so every level adds the midpoints of
//! the previous grid without moving existing values. The wavelet follows
//! from one more application of the two-scale relation with the high-pass
//! filter `g[k] = (-1)^k h[L-1-k]`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Reference sampling rate at which the default scale menu is expressed.
pub const REFERENCE_FS_HZ: f64 = 200.0;

/// Default analysis scales, in samples at [`REFERENCE_FS_HZ`].
pub const DEFAULT_SCALES: [f64; 4] = [4.0, 10.0, 20.0, 30.0];

/// Longest admissible kernel, in seconds (one analysis window).
pub const MAX_KERNEL_S: f64 = 10.0;

const DB2: [f64; 4] = [
    4.829_629_131_445_341_5e-1,
    8.365_163_037_378_079e-1,
    2.241_438_680_420_133_8e-1,
    -1.294_095_225_512_603_7e-1,
];

const DB4: [f64; 8] = [
    2.303_778_133_088_965e-1,
    7.148_465_705_529_157e-1,
    6.308_807_679_298_589e-1,
    -2.798_376_941_685_985_4e-2,
    -1.870_348_117_190_930_9e-1,
    3.084_138_183_556_076_4e-2,
    3.288_301_166_688_519_7e-2,
    -1.059_740_178_506_903_2e-2,
];

const DB5: [f64; 10] = [
    1.601_023_979_741_929_3e-1,
    6.038_292_697_971_896e-1,
    7.243_085_284_377_729e-1,
    1.384_281_459_013_207_4e-1,
    -2.422_948_870_663_820_3e-1,
    -3.224_486_958_463_837_5e-2,
    7.757_149_384_004_572e-2,
    -6.241_490_212_798_274e-3,
    -1.258_075_199_908_199_9e-2,
    3.335_725_285_473_771_2e-3,
];

const COIF4: [f64; 24] = [
    8.923_139_025_370_03e-4,
    -1.629_492_425_226_786e-3,
    -7.346_167_936_268_051e-3,
    1.606_894_713_157_502_9e-2,
    2.668_230_466_960_483e-2,
    -8.126_671_024_919_373e-2,
    -5.607_731_960_356_925_5e-2,
    4.153_084_270_006_822_7e-1,
    7.822_389_344_242_826e-1,
    4.343_860_331_143_565_3e-1,
    -6.662_747_236_681_717e-2,
    -9.622_042_453_595_264e-2,
    3.933_442_260_558_915e-2,
    2.508_225_333_794_961_2e-2,
    -1.521_172_818_769_721e-2,
    -5.658_283_800_130_883_5e-3,
    3.751_434_697_146_086_6e-3,
    1.266_561_078_925_660_3e-3,
    -5.890_202_246_332_165e-4,
    -2.599_743_371_222_568e-4,
    6.233_885_431_278_719e-5,
    3.122_986_159_919_526_5e-5,
    -3.259_647_940_030_751e-6,
    -1.784_990_914_493_346_9e-6,
];

const SYM8: [f64; 16] = [
    1.889_950_332_759_460_9e-3,
    -3.029_205_147_213_668e-4,
    -1.495_225_833_704_823e-2,
    3.808_752_013_890_615e-3,
    4.913_717_967_360_750_6e-2,
    -2.721_902_991_705_600_3e-2,
    -5.194_583_810_770_904e-2,
    3.644_418_948_353_314e-1,
    7.771_857_517_005_235e-1,
    4.813_596_512_583_722e-1,
    -6.127_335_906_765_852_4e-2,
    -1.432_942_383_508_097e-1,
    7.607_487_324_917_605e-3,
    3.169_508_781_149_298e-2,
    -5.421_323_317_911_481e-4,
    -3.382_415_951_006_125_6e-3,
];

/// The supported mother wavelets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaveletName {
    Db2,
    Db4,
    Db5,
    Coif4,
    Sym8,
}

impl WaveletName {
    pub const ALL: [WaveletName; 5] =
        [WaveletName::Db2, WaveletName::Db4, WaveletName::Db5, WaveletName::Coif4, WaveletName::Sym8];

    /// Orthonormal low-pass (scaling) filter, normalized to `sum = sqrt(2)`.
    pub fn scaling_filter(self) -> &'static [f64] {
        match self {
            WaveletName::Db2 => &DB2,
            WaveletName::Db4 => &DB4,
            WaveletName::Db5 => &DB5,
            WaveletName::Coif4 => &COIF4,
            WaveletName::Sym8 => &SYM8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WaveletName::Db2 => "db2",
            WaveletName::Db4 => "db4",
            WaveletName::Db5 => "db5",
            WaveletName::Coif4 => "coif4",
            WaveletName::Sym8 => "sym8",
        }
    }

    /// Support length in natural wavelet time (`filter length - 1`).
    pub fn support_len(self) -> usize {
        self.scaling_filter().len() - 1
    }
}

impl fmt::Display for WaveletName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WaveletName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WaveletName::ALL
            .into_iter()
            .find(|w| w.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::config(format!("unknown wavelet {s:?} (expected db2, db4, db5, coif4 or sym8)")))
    }
}

/// Sampled mother wavelet on a dyadic grid of spacing `2^-iterations`.
#[derive(Debug, Clone)]
pub struct WaveletTable<T> {
    name: WaveletName,
    iterations: u32,
    values: Vec<T>,
    peak: T,
    center: T,
}

impl<T: Real> WaveletTable<T> {
    pub fn name(&self) -> WaveletName {
        self.name
    }

    pub fn iterations(&self) -> u32 {
        self.iterations
    }

    pub fn spacing(&self) -> T {
        T::of((-(self.iterations as f64)).exp2())
    }

    /// Support `[start, end]` in natural wavelet time.
    pub fn support(&self) -> (T, T) {
        (T::zero(), T::of(self.name.support_len() as f64))
    }

    /// Samples at `k * spacing()`, `k = 0..=support_len * 2^iterations`.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Natural time of the largest `|psi|`.
    pub fn peak(&self) -> T {
        self.peak
    }

    /// Centroid of the dominant lobe, the same-sign run around [`peak`].
    /// Kernels are anchored here: broad waveforms then respond near their
    /// own peak instead of being pulled towards the steep lobe edge.
    ///
    /// [`peak`]: WaveletTable::peak
    pub fn center(&self) -> T {
        self.center
    }

    /// Linear interpolation of the table; zero outside the support.
    pub fn value_at(&self, t: T) -> T {
        let pos = t * T::of((self.iterations as f64).exp2());
        if !(pos >= T::zero()) {
            return T::zero();
        }
        let last = self.values.len() - 1;
        let i = pos.floor().to_usize().unwrap_or(usize::MAX);
        if i >= last {
            return if pos == T::of(last as f64) { self.values[last] } else { T::zero() };
        }
        let frac = pos - T::of(i as f64);
        self.values[i] + (self.values[i + 1] - self.values[i]) * frac
    }

    /// Riemann approximation of the integral of psi.
    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.spacing()
    }

    /// Riemann approximation of the L2 norm of psi.
    pub fn l2_norm(&self) -> T {
        (self.values.iter().map(|&v| v * v).sum::<T>() * self.spacing()).sqrt()
    }
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Scaling function at the integers `0..L`: the fixed point of the
/// refinement matrix `M[n][m] = sqrt(2) h[2n - m]` normalized to sum 1.
fn scaling_at_integers(h: &[f64]) -> Result<Vec<f64>> {
    let n = h.len();
    let s2 = std::f64::consts::SQRT_2;
    let mut a = vec![vec![0.0; n]; n];
    for (row, a_row) in a.iter_mut().enumerate() {
        for (col, cell) in a_row.iter_mut().enumerate() {
            let k = 2 * row as isize - col as isize;
            if (0..n as isize).contains(&k) {
                *cell = s2 * h[k as usize];
            }
        }
        a_row[row] -= 1.0;
    }
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    solve_dense(a, b).ok_or_else(|| Error::config("refinement matrix has no unique fixed point"))
}

/// Builds the sampled wavelet for `name` on a grid of spacing `2^-iterations`,
/// shifted to exact zero mean and scaled to unit L2 norm.
pub fn build_wavelet_table<T: Real>(name: WaveletName, cascade_iterations: u32) -> Result<WaveletTable<T>> {
    if !(6..=18).contains(&cascade_iterations) {
        return Err(Error::config(format!("cascade_iterations must lie in 6..=18, got {cascade_iterations}")));
    }
    let h = name.scaling_filter();
    let len = h.len();
    let s2 = std::f64::consts::SQRT_2;

    let mut phi = scaling_at_integers(h)?;
    for level in 1..=cascade_iterations {
        let half = 1usize << (level - 1);
        let n_new = (len - 1) * (1 << level) + 1;
        let mut next = vec![0.0; n_new];
        for (k, slot) in next.iter_mut().enumerate() {
            if k % 2 == 0 {
                *slot = phi[k / 2];
            } else {
                *slot = h
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &hi)| k.checked_sub(i * half).and_then(|j| phi.get(j)).map(|&p| s2 * hi * p))
                    .sum();
            }
        }
        phi = next;
    }

    let full = 1usize << cascade_iterations;
    let n_pts = (len - 1) * full + 1;
    let mut psi: Vec<f64> = (0..n_pts)
        .map(|k| {
            (0..len)
                .filter_map(|i| {
                    let g = if i % 2 == 0 { h[len - 1 - i] } else { -h[len - 1 - i] };
                    (2 * k).checked_sub(i * full).and_then(|j| phi.get(j)).map(|&p| s2 * g * p)
                })
                .sum()
        })
        .collect();

    let dx = 1.0 / full as f64;
    let support = (len - 1) as f64;
    let mean = psi.iter().sum::<f64>() * dx / support;
    psi.iter_mut().for_each(|v| *v -= mean);
    let norm = (psi.iter().map(|v| v * v).sum::<f64>() * dx).sqrt();
    psi.iter_mut().for_each(|v| *v /= norm);

    let argmax = psi
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best })
        .0;

    let sign = psi[argmax].signum();
    let lo = (0..argmax).rev().take_while(|&i| psi[i] * sign > 0.0).last().unwrap_or(argmax);
    let hi = (argmax..n_pts).take_while(|&i| psi[i] * sign > 0.0).last().unwrap_or(argmax);
    let (moment, mass) =
        (lo..=hi).fold((0.0, 0.0), |(m, w), i| (m + i as f64 * dx * psi[i].abs(), w + psi[i].abs()));

    Ok(WaveletTable {
        name,
        iterations: cascade_iterations,
        values: psi.into_iter().map(T::of).collect(),
        peak: T::of(argmax as f64 * dx),
        center: T::of(moment / mass),
    })
}

/// A wavelet dilated to `scale` samples per unit of natural time.
#[derive(Debug, Clone)]
pub struct ScaledKernel<T> {
    scale: T,
    taps: Vec<T>,
    center: usize,
}

impl<T: Real> ScaledKernel<T> {
    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Tap aligned with the analysed sample.
    pub fn center(&self) -> usize {
        self.center
    }

    pub fn energy(&self) -> T {
        self.taps.iter().map(|&v| v * v).sum()
    }
}

/// Samples `psi(n / scale)` for `n = 0..=scale * support`, then removes the
/// residual sampling mean and rescales to unit energy, which is what the
/// `1/sqrt(scale)` factor achieves in the continuous limit.
pub fn scale_kernel<T: Real>(table: &WaveletTable<T>, scale_a: T, fs: f64) -> Result<ScaledKernel<T>> {
    if !(scale_a > T::zero() && scale_a.is_finite()) {
        return Err(Error::Scale(format!("scale must be positive, got {scale_a}")));
    }
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::Scale(format!("sampling rate must be positive, got {fs}")));
    }
    let support = table.support().1;
    let len = (scale_a * support).floor().to_usize().unwrap_or(usize::MAX).saturating_add(1);
    let max_len = (MAX_KERNEL_S * fs).floor() as usize;
    if len > max_len {
        return Err(Error::Scale(format!(
            "kernel at scale {scale_a} spans {len} samples, longer than a {MAX_KERNEL_S} s window ({max_len} samples)"
        )));
    }
    let mut taps: Vec<T> = (0..len).map(|n| table.value_at(T::of(n as f64) / scale_a)).collect();
    let mean = taps.iter().copied().sum::<T>() / T::of(len as f64);
    taps.iter_mut().for_each(|v| *v -= mean);
    let energy: T = taps.iter().map(|&v| v * v).sum();
    if !(energy > T::zero()) {
        return Err(Error::Scale(format!("scale {scale_a} is too small to resolve the wavelet")));
    }
    let inv = energy.sqrt().recip();
    taps.iter_mut().for_each(|v| *v *= inv);
    let center = (table.center() * scale_a).round().to_usize().unwrap_or(0).min(len - 1);
    Ok(ScaledKernel { scale: scale_a, taps, center })
}

/// Wavelet coefficients aligned sample-for-sample with the analysed segment.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector<T> {
    pub scale: T,
    pub coefficients: Vec<T>,
    /// Number of samples at each end computed against zero padding.
    pub boundary: usize,
}

impl<T: Real> CoefficientVector<T> {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        i < self.boundary || i + self.boundary >= self.coefficients.len()
    }

    /// Index range unaffected by zero padding.
    pub fn interior(&self) -> std::ops::Range<usize> {
        let n = self.coefficients.len();
        self.boundary.min(n)..n.saturating_sub(self.boundary).max(self.boundary.min(n))
    }
}

/// `c[tau] = sum_n x[tau + n - center] * k[n]`, with `x` zero outside the
/// segment. A segment shorter than the kernel is all boundary.
pub fn cwt<T: Real>(segment: &[T], kernel: &ScaledKernel<T>) -> Result<CoefficientVector<T>> {
    let n = segment.len();
    let m = kernel.len();
    if n == 0 {
        return Err(Error::Input("empty segment".into()));
    }
    let taps = kernel.taps();
    let c = kernel.center;
    let mut out = Vec::with_capacity(n);
    for tau in 0..n {
        // x index = tau + j - c must lie in [0, n)
        let j_lo = c.saturating_sub(tau);
        let j_hi = m.min(n + c - tau);
        if j_lo >= j_hi {
            out.push(T::zero());
            continue;
        }
        let x0 = tau + j_lo - c;
        let acc = taps[j_lo..j_hi]
            .iter()
            .zip(&segment[x0..x0 + (j_hi - j_lo)])
            .fold(T::zero(), |acc, (&k, &x)| acc + k * x);
        out.push(acc);
    }
    // padding reaches `c` samples into the left end and `m - 1 - c` into the right
    Ok(CoefficientVector { scale: kernel.scale, coefficients: out, boundary: c.max(m - 1 - c) })
}

/// Rescales a scale menu expressed at [`REFERENCE_FS_HZ`] to `fs`, rounding to
/// whole samples.
pub fn scales_for<T: Real>(menu: &[f64], fs: f64) -> Vec<T> {
    let mut out: Vec<f64> = menu.iter().map(|&s| (s * fs / REFERENCE_FS_HZ).round().max(1.0)).collect();
    out.dedup();
    out.into_iter().map(T::of).collect()
}

/// Default scale menu adapted to the sampling rate.
pub fn select_scales<T: Real>(fs: f64) -> Vec<T> {
    scales_for(&DEFAULT_SCALES, fs)
}

#[cfg(test)]
mod tests {
    use super::*;

    // tabulated coefficients carry about eleven correct digits for the longest filters
    #[test]
    fn scaling_filters_are_orthonormal_lowpass() {
        for w in WaveletName::ALL {
            let h = w.scaling_filter();
            let sum: f64 = h.iter().sum();
            let alt: f64 = h.iter().enumerate().map(|(k, v)| if k % 2 == 0 { *v } else { -v }).sum();
            let energy: f64 = h.iter().map(|v| v * v).sum();
            assert!((sum - std::f64::consts::SQRT_2).abs() < 1e-10, "{w}: sum {sum}");
            assert!(alt.abs() < 1e-10, "{w}: alternating sum {alt}");
            assert!((energy - 1.0).abs() < 1e-10, "{w}: energy {energy}");
        }
    }

    #[test]
    fn db2_support_and_shape() {
        let t = build_wavelet_table::<f64>(WaveletName::Db2, 8).unwrap();
        assert_eq!(t.support(), (0.0, 3.0));
        assert_eq!(t.values().len(), 3 * 256 + 1);
        assert!(t.values()[0].abs() < 1e-9 && t.values()[3 * 256].abs() < 1e-9);
        // Dominant positive lobe peaks at t = 1.5 with its centroid near 1.35,
        // matching the usual db2 plot.
        assert!((t.peak() - 1.5).abs() < 1e-9);
        assert!((t.center() - 1.35).abs() < 0.01);
        assert!(t.value_at(1.5) > 1.5);
        assert_eq!(t.value_at(-0.1), 0.0);
        assert_eq!(t.value_at(3.5), 0.0);
    }

    #[test]
    fn every_table_is_zero_mean_unit_norm() {
        for w in WaveletName::ALL {
            let t = build_wavelet_table::<f64>(w, 10).unwrap();
            assert!(t.mean().abs() < 1e-6, "{w}: mean {}", t.mean());
            assert!((t.l2_norm() - 1.0).abs() < 1e-6, "{w}: norm {}", t.l2_norm());
        }
    }

    #[test]
    fn cascade_refinement_converges() {
        let coarse = build_wavelet_table::<f64>(WaveletName::Db2, 8).unwrap();
        let fine = build_wavelet_table::<f64>(WaveletName::Db2, 10).unwrap();
        let sup = coarse
            .values()
            .iter()
            .enumerate()
            .map(|(k, v)| (v - fine.values()[4 * k]).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-3, "sup-norm change {sup}");
    }

    #[test]
    fn rejects_bad_table_requests() {
        assert!(matches!("haar".parse::<WaveletName>(), Err(Error::Config { .. })));
        assert!(build_wavelet_table::<f64>(WaveletName::Db2, 5).is_err());
    }

    #[test]
    fn kernel_dilation() {
        let t = build_wavelet_table::<f64>(WaveletName::Db2, 10).unwrap();
        let k4 = scale_kernel(&t, 4.0, 200.0).unwrap();
        let k8 = scale_kernel(&t, 8.0, 200.0).unwrap();
        assert!((k8.len() as isize - 2 * k4.len() as isize).abs() <= 1);
        for s in [2.0, 4.0, 10.0, 20.0, 30.0, 60.0] {
            let k = scale_kernel(&t, s, 200.0).unwrap();
            assert!((k.energy().sqrt() - 1.0).abs() < 0.01);
            assert!(k.taps().iter().sum::<f64>().abs() < 1e-12);
            assert_eq!(k.center(), (t.center() * s).round() as usize);
        }
        assert!(matches!(scale_kernel(&t, 400.0, 100.0), Err(Error::Scale(_))));
        assert!(matches!(scale_kernel(&t, -1.0, 100.0), Err(Error::Scale(_))));
    }

    #[test]
    fn cwt_basic_properties() {
        let t = build_wavelet_table::<f64>(WaveletName::Db2, 10).unwrap();
        let k = scale_kernel(&t, 4.0, 200.0).unwrap();

        let zeros = vec![0.0; 64];
        assert!(cwt(&zeros, &k).unwrap().coefficients.iter().all(|&c| c == 0.0));

        let own = k.taps().to_vec();
        let c = cwt(&own, &k).unwrap();
        let argmax = (0..c.len()).max_by(|&i, &j| c.coefficients[i].total_cmp(&c.coefficients[j])).unwrap();
        assert_eq!(argmax, k.center());
        assert!((c.coefficients[argmax] - 1.0).abs() < 1e-12);

        assert!(matches!(cwt(&[], &k), Err(Error::Input(_))));
        let short = cwt(&own[..5], &k).unwrap();
        assert!((0..5).all(|i| short.is_boundary(i)));
        assert_eq!(c.boundary, k.center().max(k.len() - 1 - k.center()));
    }

    #[test]
    fn scale_menu_follows_sampling_rate() {
        assert_eq!(select_scales::<f64>(200.0), vec![4.0, 10.0, 20.0, 30.0]);
        assert_eq!(select_scales::<f64>(100.0), vec![2.0, 5.0, 10.0, 15.0]);
        assert_eq!(select_scales::<f64>(400.0), vec![8.0, 20.0, 40.0, 60.0]);
    }
}
