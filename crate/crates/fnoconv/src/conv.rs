//! The two implementations of periodic 2-D convolution: spatial kernels
//! applied as circular convolution, and spectral kernels applied as pointwise
//! multiplication of Fourier coefficients.
//!
//! On even grids the spectral path follows the odd-neighbor pipeline: the
//! input is trigonometrically lifted to `N+1`, the kernel is Nyquist-split,
//! the odd-dimension product is taken, and the result is resampled back. The
//! implementation fuses these steps into one diagonal multiplier per channel
//! pair; `conv_spectral_via_pipeline` is the literal step-by-step route and
//! the two agree to machine precision.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grids::{fft2, freq_to_bin, FreqIndexSet, Lambda, RealGrid, Spectrum};
use crate::resample::{
    adapt_spectrum, even_to_odd, nyquist_average, odd_to_even, pad_spectrum_odd, trig_resample,
    truncate_spectrum_odd,
};

/// Spatial kernels larger than this use the FFT evaluation path.
const DIRECT_CONV_MAX_M: usize = 7;

/// A bank of real spatial kernels, one `M x M` tap grid per `(c_out, c_in)`
/// pair. Taps are interpreted as centered circular offsets
/// `o in {-ceil((M-1)/2), ..., floor((M-1)/2)}^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialKernel {
    m: usize,
    c_out: usize,
    c_in: usize,
    weights: Vec<f64>,
}

impl SpatialKernel {
    pub fn zeros(m: usize, c_out: usize, c_in: usize) -> Self {
        assert!(m >= 1 && c_out >= 1 && c_in >= 1);
        Self {
            m,
            c_out,
            c_in,
            weights: vec![0.0; c_out * c_in * m * m],
        }
    }

    pub fn from_weights(m: usize, c_out: usize, c_in: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != c_out * c_in * m * m || m == 0 {
            return Err(Error::InvalidDimension(format!(
                "spatial kernel weight length {} does not match {}x{}x{}x{}",
                weights.len(),
                c_out,
                c_in,
                m,
                m
            )));
        }
        if !weights.iter().all(|w| w.is_finite()) {
            return Err(Error::InvalidDimension("kernel weights must be finite".into()));
        }
        Ok(Self { m, c_out, c_in, weights })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    /// Smallest centered offset, `-ceil((M-1)/2)`.
    pub fn omin(&self) -> i64 {
        -((self.m / 2) as i64)
    }

    pub fn omax(&self) -> i64 {
        ((self.m - 1) / 2) as i64
    }

    pub fn offsets(&self) -> impl Iterator<Item = (i64, i64)> {
        let (lo, hi) = (self.omin(), self.omax());
        (lo..=hi).flat_map(move |a| (lo..=hi).map(move |b| (a, b)))
    }

    #[inline]
    pub fn idx(&self, co: usize, ci: usize, o: (i64, i64)) -> usize {
        let lo = self.omin();
        let r = (o.0 - lo) as usize;
        let c = (o.1 - lo) as usize;
        ((co * self.c_in + ci) * self.m + r) * self.m + c
    }

    #[inline]
    pub fn get(&self, co: usize, ci: usize, o: (i64, i64)) -> f64 {
        self.weights[self.idx(co, ci, o)]
    }

    #[inline]
    pub fn set(&mut self, co: usize, ci: usize, o: (i64, i64), v: f64) {
        let i = self.idx(co, ci, o);
        self.weights[i] = v;
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Lay one kernel slice out on `J_n` with offsets mapped by `o mod n`.
    pub fn as_grid(&self, co: usize, ci: usize, n: usize) -> Vec<f64> {
        assert!(self.m <= n);
        let mut g = vec![0.0; n * n];
        for o in self.offsets() {
            let r = o.0.rem_euclid(n as i64) as usize;
            let c = o.1.rem_euclid(n as i64) as usize;
            g[r * n + c] = self.get(co, ci, o);
        }
        g
    }
}

/// Zero-pad a spatial kernel to a larger centered support; existing offsets
/// keep their values.
pub fn pad_kernel_spatial(k: &SpatialKernel, n: usize) -> Result<SpatialKernel> {
    if n < k.m() {
        return Err(Error::InvalidDimension(format!(
            "spatial kernels cannot be truncated ({} -> {})",
            k.m(),
            n
        )));
    }
    let mut out = SpatialKernel::zeros(n, k.c_out(), k.c_in());
    for co in 0..k.c_out() {
        for ci in 0..k.c_in() {
            for o in k.offsets() {
                out.set(co, ci, o, k.get(co, ci, o));
            }
        }
    }
    Ok(out)
}

/// A bank of spectral kernels: complex coefficients over `I_M` per channel
/// pair, each slice Hermitian-symmetric in the aliased sense.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralKernel {
    m: usize,
    c_out: usize,
    c_in: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralKernel {
    pub fn zeros(m: usize, c_out: usize, c_in: usize) -> Self {
        assert!(m >= 1 && c_out >= 1 && c_in >= 1);
        Self {
            m,
            c_out,
            c_in,
            coeffs: vec![Complex64::new(0.0, 0.0); c_out * c_in * m * m],
        }
    }

    pub fn from_coeffs(
        m: usize,
        c_out: usize,
        c_in: usize,
        coeffs: Vec<Complex64>,
    ) -> Result<Self> {
        if coeffs.len() != c_out * c_in * m * m || m == 0 {
            return Err(Error::InvalidDimension(format!(
                "spectral kernel coefficient length {} does not match {}x{}x{}x{}",
                coeffs.len(),
                c_out,
                c_in,
                m,
                m
            )));
        }
        let k = Self { m, c_out, c_in, coeffs };
        let dev = k.hermitian_deviation();
        if dev > 1e-10 {
            return Err(Error::NonHermitian { max_dev: dev });
        }
        Ok(k)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn index_set(&self) -> FreqIndexSet {
        FreqIndexSet::new(self.m).expect("m >= 1")
    }

    #[inline]
    pub fn idx(&self, co: usize, ci: usize, k: (i64, i64)) -> usize {
        let lo = -((self.m / 2) as i64);
        let r = (k.0 - lo) as usize;
        let c = (k.1 - lo) as usize;
        ((co * self.c_in + ci) * self.m + r) * self.m + c
    }

    #[inline]
    pub fn get(&self, co: usize, ci: usize, k: (i64, i64)) -> Complex64 {
        self.coeffs[self.idx(co, ci, k)]
    }

    #[inline]
    pub fn set(&mut self, co: usize, ci: usize, k: (i64, i64), v: Complex64) {
        let i = self.idx(co, ci, k);
        self.coeffs[i] = v;
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// One channel pair viewed as a single-channel [`Spectrum`].
    pub fn pair_spectrum(&self, co: usize, ci: usize) -> Spectrum {
        let mut s = Spectrum::zeros(self.m, 1, Lambda::Full);
        let base = (co * self.c_in + ci) * self.m * self.m;
        s.data_mut()
            .copy_from_slice(&self.coeffs[base..base + self.m * self.m]);
        s
    }

    pub fn set_pair_spectrum(&mut self, co: usize, ci: usize, s: &Spectrum) {
        assert_eq!(s.n(), self.m);
        let base = (co * self.c_in + ci) * self.m * self.m;
        self.coeffs[base..base + self.m * self.m].copy_from_slice(s.data());
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let set = self.index_set();
        let mut dev: f64 = 0.0;
        for co in 0..self.c_out {
            for ci in 0..self.c_in {
                for k in set.iter() {
                    let p = set.alias_partner(k);
                    dev = dev.max((self.get(co, ci, k) - self.get(co, ci, p).conj()).norm());
                }
            }
        }
        dev
    }
}

// ---------------------------------------------------------------------------
// Spatial convolution

fn check_channels(c_in: usize, v: &RealGrid) -> Result<()> {
    if v.channels() != c_in {
        return Err(Error::ChannelMismatch {
            expected: c_in,
            got: v.channels(),
        });
    }
    Ok(())
}

/// Circular convolution with a bank of spatial kernels:
/// `out[co]_j = sum_ci sum_o k[co][ci]_o v[ci]_{(j-o) mod N}`.
pub fn conv_spatial(k: &SpatialKernel, v: &RealGrid) -> Result<RealGrid> {
    check_channels(k.c_in(), v)?;
    let n = v.n();
    if k.m() > n {
        return Err(Error::KernelTooLarge { m: k.m(), n });
    }
    if k.m() <= DIRECT_CONV_MAX_M {
        Ok(conv_spatial_direct(k, v))
    } else {
        Ok(conv_spatial_fft(k, v))
    }
}

fn conv_spatial_direct(k: &SpatialKernel, v: &RealGrid) -> RealGrid {
    let n = v.n() as i64;
    let mut out = RealGrid::zeros(v.n(), k.c_out());
    for co in 0..k.c_out() {
        for ci in 0..k.c_in() {
            let src = v.channel(ci);
            let dst = out.channel_mut(co);
            for o in k.offsets() {
                let w = k.get(co, ci, o);
                if w == 0.0 {
                    continue;
                }
                for j1 in 0..n {
                    let s1 = (j1 - o.0).rem_euclid(n) as usize;
                    for j2 in 0..n {
                        let s2 = (j2 - o.1).rem_euclid(n) as usize;
                        dst[(j1 * n + j2) as usize] += w * src[s1 * n as usize + s2];
                    }
                }
            }
        }
    }
    out
}

fn grid_fft(channel: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = channel.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft2(&mut buf, n, true);
    buf
}

fn conv_spatial_fft(k: &SpatialKernel, v: &RealGrid) -> RealGrid {
    let n = v.n();
    let nn = n * n;
    let vhat: Vec<Vec<Complex64>> = (0..k.c_in()).map(|ci| grid_fft(v.channel(ci), n)).collect();
    let mut out = RealGrid::zeros(n, k.c_out());
    let inv_nn = 1.0 / nn as f64;
    for co in 0..k.c_out() {
        let mut acc = vec![Complex64::new(0.0, 0.0); nn];
        for ci in 0..k.c_in() {
            let khat = grid_fft(&k.as_grid(co, ci, n), n);
            for ((a, kh), vh) in acc.iter_mut().zip(&khat).zip(&vhat[ci]) {
                *a += kh * vh;
            }
        }
        fft2(&mut acc, n, false);
        for (o, a) in out.channel_mut(co).iter_mut().zip(&acc) {
            *o = a.re * inv_nn;
        }
    }
    out
}

/// Gradients of `conv_spatial` with respect to the kernel taps and the input,
/// given the upstream cotangent `g` over the output.
pub fn conv_spatial_backward(
    k: &SpatialKernel,
    v: &RealGrid,
    g: &RealGrid,
) -> Result<(SpatialKernel, RealGrid)> {
    check_channels(k.c_in(), v)?;
    check_channels(k.c_out(), g)?;
    if g.n() != v.n() {
        return Err(Error::InvalidDimension(format!(
            "cotangent grid {} does not match input grid {}",
            g.n(),
            v.n()
        )));
    }
    if k.m() <= DIRECT_CONV_MAX_M {
        Ok(conv_spatial_backward_direct(k, v, g))
    } else {
        Ok(conv_spatial_backward_fft(k, v, g))
    }
}

fn conv_spatial_backward_direct(
    k: &SpatialKernel,
    v: &RealGrid,
    g: &RealGrid,
) -> (SpatialKernel, RealGrid) {
    let n = v.n() as i64;
    let nu = v.n();
    let mut dk = SpatialKernel::zeros(k.m(), k.c_out(), k.c_in());
    let mut dv = RealGrid::zeros(nu, k.c_in());
    for co in 0..k.c_out() {
        let up = g.channel(co);
        for ci in 0..k.c_in() {
            let src = v.channel(ci);
            let dsrc = dv.channel_mut(ci);
            for o in k.offsets() {
                let mut acc = 0.0;
                let w = k.get(co, ci, o);
                for j1 in 0..n {
                    let s1 = (j1 - o.0).rem_euclid(n) as usize;
                    for j2 in 0..n {
                        let s2 = (j2 - o.1).rem_euclid(n) as usize;
                        let gj = up[(j1 * n + j2) as usize];
                        acc += gj * src[s1 * nu + s2];
                        dsrc[s1 * nu + s2] += w * gj;
                    }
                }
                dk.set(co, ci, o, dk.get(co, ci, o) + acc);
            }
        }
    }
    (dk, dv)
}

fn conv_spatial_backward_fft(
    k: &SpatialKernel,
    v: &RealGrid,
    g: &RealGrid,
) -> (SpatialKernel, RealGrid) {
    let n = v.n();
    let nn = n * n;
    let inv_nn = 1.0 / nn as f64;
    let vhat: Vec<Vec<Complex64>> = (0..k.c_in()).map(|ci| grid_fft(v.channel(ci), n)).collect();
    let ghat: Vec<Vec<Complex64>> = (0..k.c_out()).map(|co| grid_fft(g.channel(co), n)).collect();
    let mut dk = SpatialKernel::zeros(k.m(), k.c_out(), k.c_in());
    let mut dacc: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); nn]; k.c_in()];
    for co in 0..k.c_out() {
        for ci in 0..k.c_in() {
            // dk_o = sum_j g_j v_{j-o}: cross-correlation of g with v.
            let mut corr: Vec<Complex64> = ghat[co]
                .iter()
                .zip(&vhat[ci])
                .map(|(gh, vh)| gh * vh.conj())
                .collect();
            fft2(&mut corr, n, false);
            for o in k.offsets() {
                let r = o.0.rem_euclid(n as i64) as usize;
                let c = o.1.rem_euclid(n as i64) as usize;
                dk.set(co, ci, o, corr[r * n + c].re * inv_nn);
            }
            let khat = grid_fft(&k.as_grid(co, ci, n), n);
            for ((a, kh), gh) in dacc[ci].iter_mut().zip(&khat).zip(&ghat[co]) {
                *a += kh.conj() * gh;
            }
        }
    }
    let mut dv = RealGrid::zeros(n, k.c_in());
    for (ci, mut acc) in dacc.into_iter().enumerate() {
        fft2(&mut acc, n, false);
        for (o, a) in dv.channel_mut(ci).iter_mut().zip(&acc) {
            *o = a.re * inv_nn;
        }
    }
    (dk, dv)
}

// ---------------------------------------------------------------------------
// Spectral convolution

/// The effective diagonal multiplier of one kernel slice on grid dimension
/// `n`, in natural FFT bin order. Composition of: Nyquist split for even
/// kernel dimensions, zero-padding (or restriction) on the odd neighbor grid,
/// and Nyquist averaging back onto even grids.
fn pair_multiplier(k: &SpectralKernel, co: usize, ci: usize, n: usize) -> Vec<Complex64> {
    let s = k.pair_spectrum(co, ci);
    let n_odd = if n % 2 == 0 { n + 1 } else { n };
    let mut cur = if s.n() % 2 == 0 { even_to_odd(&s, 0.5) } else { s };
    cur = if n_odd >= cur.n() {
        pad_spectrum_odd(&cur, n_odd).expect("odd pad")
    } else {
        truncate_spectrum_odd(&cur, n_odd)
    };
    if n % 2 == 0 {
        cur = nyquist_average(&cur);
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for kk in cur.index_set().iter() {
        let br = freq_to_bin(kk.0, n);
        let bc = freq_to_bin(kk.1, n);
        out[br * n + bc] = cur.get(0, kk);
    }
    out
}

/// Forward pass state reused by [`conv_spectral_backward`].
pub struct SpectralConvCache {
    n: usize,
    /// Full-normalized input spectra, natural bin order, one per `c_in`.
    vhat: Vec<Vec<Complex64>>,
    /// Effective multipliers, one per `(c_out, c_in)` pair.
    mults: Vec<Vec<Complex64>>,
}

/// Spectral (FNO) convolution of `v` by a bank of spectral kernels.
pub fn conv_spectral(k: &SpectralKernel, v: &RealGrid) -> Result<RealGrid> {
    let (out, _) = conv_spectral_cached(k, v)?;
    Ok(out)
}

/// As [`conv_spectral`] but also returns the cache needed for gradients.
pub fn conv_spectral_cached(
    k: &SpectralKernel,
    v: &RealGrid,
) -> Result<(RealGrid, SpectralConvCache)> {
    check_channels(k.c_in(), v)?;
    let n = v.n();
    let nn = n * n;
    let inv_nn = 1.0 / nn as f64;
    let vhat: Vec<Vec<Complex64>> = (0..k.c_in())
        .map(|ci| {
            let mut h = grid_fft(v.channel(ci), n);
            for z in h.iter_mut() {
                *z *= inv_nn;
            }
            h
        })
        .collect();
    let mut mults = Vec::with_capacity(k.c_out() * k.c_in());
    for co in 0..k.c_out() {
        for ci in 0..k.c_in() {
            mults.push(pair_multiplier(k, co, ci, n));
        }
    }
    let mut out = RealGrid::zeros(n, k.c_out());
    for co in 0..k.c_out() {
        let mut acc = vec![Complex64::new(0.0, 0.0); nn];
        for ci in 0..k.c_in() {
            let mult = &mults[co * k.c_in() + ci];
            for ((a, m), vh) in acc.iter_mut().zip(mult).zip(&vhat[ci]) {
                *a += m * vh;
            }
        }
        fft2(&mut acc, n, false);
        for (o, a) in out.channel_mut(co).iter_mut().zip(&acc) {
            *o = a.re;
        }
    }
    Ok((
        out,
        SpectralConvCache { n, vhat, mults },
    ))
}

/// Gradients of `conv_spectral`.
///
/// The kernel gradient is returned in the conjugate-pair parametrization:
/// for a canonical index `k` the entry holds `dL/dRe + i dL/dIm` of the
/// coefficient (with its aliased partner moving conjugately), the partner
/// entry holds the conjugate, and self-paired entries are real. Subtracting
/// a multiple of this gradient therefore preserves Hermitian symmetry.
pub fn conv_spectral_backward(
    k: &SpectralKernel,
    cache: &SpectralConvCache,
    g: &RealGrid,
) -> Result<(SpectralKernel, RealGrid)> {
    check_channels(k.c_out(), g)?;
    let n = cache.n;
    if g.n() != n {
        return Err(Error::InvalidDimension(format!(
            "cotangent grid {} does not match cached grid {}",
            g.n(),
            n
        )));
    }
    let nn = n * n;
    let inv_nn = 1.0 / nn as f64;
    let ghat: Vec<Vec<Complex64>> = (0..k.c_out())
        .map(|co| {
            let mut h = grid_fft(g.channel(co), n);
            for z in h.iter_mut() {
                *z *= inv_nn;
            }
            h
        })
        .collect();

    // Input cotangent: conj(multiplier) applied to the upstream spectrum.
    let mut dv = RealGrid::zeros(n, k.c_in());
    for ci in 0..k.c_in() {
        let mut acc = vec![Complex64::new(0.0, 0.0); nn];
        for co in 0..k.c_out() {
            let mult = &cache.mults[co * k.c_in() + ci];
            for ((a, m), gh) in acc.iter_mut().zip(mult).zip(&ghat[co]) {
                *a += m.conj() * gh;
            }
        }
        fft2(&mut acc, n, false);
        for (o, a) in dv.channel_mut(ci).iter_mut().zip(&acc) {
            *o = a.re;
        }
    }

    // Kernel cotangent: Wirtinger-style sensitivities of the multiplier,
    // pulled back through the (real-linear) lift and paired into the
    // symmetry-preserving gradient.
    let mut dk = SpectralKernel::zeros(k.m(), k.c_out(), k.c_in());
    let set_m = dk.index_set();
    for co in 0..k.c_out() {
        for ci in 0..k.c_in() {
            let mut d = Spectrum::zeros(n, 1, Lambda::Full);
            for br in 0..n {
                for bc in 0..n {
                    let b = br * n + bc;
                    let val =
                        cache.vhat[ci][b] * (nn as f64) * ghat[co][b].conj();
                    let kk = (
                        crate::grids::bin_to_freq(br, n),
                        crate::grids::bin_to_freq(bc, n),
                    );
                    d.set(0, kk, val);
                }
            }
            let pulled = kernel_lift_transpose(&d, k.m());
            for kk in set_m.iter() {
                let p = set_m.alias_partner(kk);
                if p == kk {
                    dk.set(co, ci, kk, Complex64::new(pulled.get(0, kk).re, 0.0));
                } else if kk < p {
                    let a = pulled.get(0, kk);
                    let b = pulled.get(0, p);
                    let gx = a.re + b.re;
                    let gy = -a.im + b.im;
                    dk.set(co, ci, kk, Complex64::new(gx, gy));
                    dk.set(co, ci, p, Complex64::new(gx, -gy));
                }
            }
        }
    }
    Ok((dk, dv))
}

/// Transpose of the kernel lift used in [`pair_multiplier`].
fn kernel_lift_transpose(d: &Spectrum, m: usize) -> Spectrum {
    let n = d.n();
    let mut cur = if n % 2 == 0 {
        even_to_odd(d, 0.5) // average^T = split
    } else {
        d.clone()
    };
    let m_odd = if m % 2 == 0 { m + 1 } else { m };
    cur = if m_odd >= cur.n() {
        pad_spectrum_odd(&cur, m_odd).expect("odd pad") // truncate^T
    } else {
        truncate_spectrum_odd(&cur, m_odd) // pad^T
    };
    if m % 2 == 0 {
        cur = odd_to_even(&cur, 0.5); // split^T = average
    }
    cur
}

/// The literal odd-neighbor pipeline for spectral convolution, used to verify
/// that the fused implementation is faithful.
pub fn conv_spectral_via_pipeline(k: &SpectralKernel, v: &RealGrid) -> Result<RealGrid> {
    check_channels(k.c_in(), v)?;
    let n = v.n();
    if n % 2 == 1 {
        return conv_spectral_odd(k, v);
    }
    let lifted = trig_resample(v, n + 1);
    let out = conv_spectral_odd(k, &lifted)?;
    Ok(trig_resample(&out, n))
}

fn conv_spectral_odd(k: &SpectralKernel, v: &RealGrid) -> Result<RealGrid> {
    let n = v.n();
    debug_assert!(n % 2 == 1);
    let vhat = crate::grids::dft(v, Lambda::Full);
    let mut prod = Spectrum::zeros(n, k.c_out(), Lambda::Full);
    for co in 0..k.c_out() {
        for ci in 0..k.c_in() {
            let s = k.pair_spectrum(co, ci);
            let g = adapt_spectrum(&s, n);
            for kk in g.index_set().iter() {
                let val = g.get(0, kk) * vhat.get(ci, kk);
                prod.add(co, kk, val);
            }
        }
    }
    crate::grids::idft(&prod, Lambda::Full)
}
