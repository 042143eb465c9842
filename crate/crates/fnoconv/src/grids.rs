//! Index sets, grid/spectrum containers and the discrete Fourier transform
//! pair on square periodic 2-D grids.
//!
//! Frequencies live on the centered index set `I_N = {-ceil((N-1)/2), ...,
//! floor((N-1)/2)}^2`, spatial samples on `J_N = {0, ..., N-1}^2`. Spectra of
//! real grids satisfy aliased Hermitian symmetry: `s_k = conj(s_{(-k) mod N})`.

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};

/// Normalization convention for the transform pair: the forward transform
/// divides by `lambda`, the inverse multiplies by `lambda / |J_N|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lambda {
    /// `lambda = 1`
    Unit,
    /// `lambda = sqrt(|J_N|) = N`
    Sqrt,
    /// `lambda = |J_N| = N^2` (default; spectra approximate function-space
    /// Fourier coefficients, stable across grid sizes)
    Full,
}

impl Lambda {
    pub fn value(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            Lambda::Unit => 1.0,
            Lambda::Sqrt => nf,
            Lambda::Full => nf * nf,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Lambda::Unit => "unit",
            Lambda::Sqrt => "sqrt",
            Lambda::Full => "full",
        }
    }
}

/// The centered 2-D frequency index set `I_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreqIndexSet {
    n: usize,
}

impl FreqIndexSet {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension(
                "frequency index set requires n >= 1".into(),
            ));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Smallest frequency component, `-ceil((N-1)/2)`.
    pub fn kmin(&self) -> i64 {
        -((self.n / 2) as i64)
    }

    /// Largest frequency component, `floor((N-1)/2)`.
    pub fn kmax(&self) -> i64 {
        ((self.n - 1) / 2) as i64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: (i64, i64)) -> bool {
        let (lo, hi) = (self.kmin(), self.kmax());
        k.0 >= lo && k.0 <= hi && k.1 >= lo && k.1 <= hi
    }

    /// Row-major iteration over all of `I_N`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64)> {
        let (lo, hi) = (self.kmin(), self.kmax());
        (lo..=hi).flat_map(move |a| (lo..=hi).map(move |b| (a, b)))
    }

    /// Reduce an arbitrary integer frequency component into `I_N` modulo N.
    pub fn reduce(&self, c: i64) -> i64 {
        let n = self.n as i64;
        let r = c.rem_euclid(n);
        if r > self.kmax() {
            r - n
        } else {
            r
        }
    }

    /// The aliased negation partner of `k`: `(-k) mod N` per component,
    /// reduced back into `I_N`.
    pub fn alias_partner(&self, k: (i64, i64)) -> (i64, i64) {
        (self.reduce(-k.0), self.reduce(-k.1))
    }
}

/// Real-valued samples over `J_N` with one or more channels.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid {
    n: usize,
    channels: usize,
    data: Vec<f64>,
}

impl RealGrid {
    pub fn zeros(n: usize, channels: usize) -> Self {
        assert!(n >= 1 && channels >= 1);
        Self {
            n,
            channels,
            data: vec![0.0; channels * n * n],
        }
    }

    pub fn from_vec(n: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || channels == 0 || data.len() != channels * n * n {
            return Err(Error::InvalidDimension(format!(
                "grid data length {} does not match {} channel(s) of {}x{}",
                data.len(),
                channels,
                n,
                n
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidDimension("grid contains non-finite values".into()));
        }
        Ok(Self { n, channels, data })
    }

    pub fn from_fn(n: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut g = Self::zeros(n, channels);
        for c in 0..channels {
            for r in 0..n {
                for col in 0..n {
                    let v = f(c, r, col);
                    g.set(c, r, col, v);
                }
            }
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn idx(&self, c: usize, r: usize, col: usize) -> usize {
        (c * self.n + r) * self.n + col
    }

    #[inline]
    pub fn get(&self, c: usize, r: usize, col: usize) -> f64 {
        self.data[self.idx(c, r, col)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, r: usize, col: usize, v: f64) {
        let i = self.idx(c, r, col);
        self.data[i] = v;
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.n * self.n..(c + 1) * self.n * self.n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let nn = self.n * self.n;
        &mut self.data[c * nn..(c + 1) * nn]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn max_abs_diff(&self, other: &RealGrid) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Complex Fourier coefficients over `I_N`, stored centered and row-major
/// (row index `k1 - kmin`).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    n: usize,
    channels: usize,
    lambda: Lambda,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(n: usize, channels: usize, lambda: Lambda) -> Self {
        assert!(n >= 1 && channels >= 1);
        Self {
            n,
            channels,
            lambda,
            data: vec![Complex64::new(0.0, 0.0); channels * n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn lambda(&self) -> Lambda {
        self.lambda
    }

    pub fn index_set(&self) -> FreqIndexSet {
        FreqIndexSet { n: self.n }
    }

    #[inline]
    fn offset(&self, k: (i64, i64)) -> usize {
        let lo = -((self.n / 2) as i64);
        let r = (k.0 - lo) as usize;
        let c = (k.1 - lo) as usize;
        r * self.n + c
    }

    #[inline]
    pub fn get(&self, c: usize, k: (i64, i64)) -> Complex64 {
        self.data[c * self.n * self.n + self.offset(k)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, k: (i64, i64), v: Complex64) {
        let i = c * self.n * self.n + self.offset(k);
        self.data[i] = v;
    }

    #[inline]
    pub fn add(&mut self, c: usize, k: (i64, i64), v: Complex64) {
        let i = c * self.n * self.n + self.offset(k);
        self.data[i] += v;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Largest violation of aliased Hermitian symmetry over all channels.
    pub fn hermitian_deviation(&self) -> f64 {
        let set = self.index_set();
        let mut dev: f64 = 0.0;
        for c in 0..self.channels {
            for k in set.iter() {
                let p = set.alias_partner(k);
                let d = (self.get(c, k) - self.get(c, p).conj()).norm();
                dev = dev.max(d);
            }
        }
        dev
    }
}

/// True iff `s` satisfies aliased Hermitian symmetry within `tol`.
pub fn is_hermitian(s: &Spectrum, tol: f64) -> bool {
    s.hermitian_deviation() <= tol
}

// Plan cache; rustfft plans are immutable and shareable.
static PLANS: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = PLANS.lock().unwrap();
    cache
        .entry((n, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            }
        })
        .clone()
}

/// In-place unnormalized 2-D FFT of an `n x n` row-major complex buffer.
/// Forward uses `e^{-2 pi i}`, inverse `e^{+2 pi i}`; no scaling either way.
pub(crate) fn fft2(buf: &mut [Complex64], n: usize, forward: bool) {
    debug_assert_eq!(buf.len(), n * n);
    let fft = plan(n, forward);
    for row in buf.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = buf[r * n + c];
        }
        fft.process(&mut col);
        for r in 0..n {
            buf[r * n + c] = col[r];
        }
    }
}

/// Map a natural FFT bin `b in {0,..,N-1}` to its centered frequency in `I_N`.
#[inline]
pub(crate) fn bin_to_freq(b: usize, n: usize) -> i64 {
    let half = ((n - 1) / 2) as i64;
    let b = b as i64;
    if b <= half {
        b
    } else {
        b - n as i64
    }
}

/// Map a centered frequency component to its natural FFT bin.
#[inline]
pub(crate) fn freq_to_bin(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Discrete Fourier transform of a real grid:
/// `(Fv)_k = (1/lambda) sum_j v_j e^{-2 pi i <k, j/N>}` for `k` in `I_N`.
pub fn dft(v: &RealGrid, lambda: Lambda) -> Spectrum {
    let n = v.n();
    let scale = 1.0 / lambda.value(n);
    let mut out = Spectrum::zeros(n, v.channels(), lambda);
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    for c in 0..v.channels() {
        for (b, x) in buf.iter_mut().zip(v.channel(c)) {
            *b = Complex64::new(*x, 0.0);
        }
        fft2(&mut buf, n, true);
        for br in 0..n {
            for bc in 0..n {
                let k = (bin_to_freq(br, n), bin_to_freq(bc, n));
                out.set(c, k, buf[br * n + bc] * scale);
            }
        }
    }
    out
}

/// Inverse transform: `(F^{-1} s)_j = (lambda/|J_N|) sum_k s_k e^{2 pi i <k, j/N>}`.
///
/// The input must be Hermitian-symmetric (aliased sense) within `1e-10`;
/// the tiny imaginary residue of the inverse is discarded.
pub fn idft(s: &Spectrum, lambda: Lambda) -> Result<RealGrid> {
    let dev = s.hermitian_deviation();
    if dev > 1e-10 {
        return Err(Error::NonHermitian { max_dev: dev });
    }
    Ok(idft_unchecked(s, lambda))
}

/// Inverse transform without the symmetry check; the real part is returned.
pub(crate) fn idft_unchecked(s: &Spectrum, lambda: Lambda) -> RealGrid {
    let n = s.n();
    let scale = lambda.value(n) / ((n * n) as f64);
    let mut out = RealGrid::zeros(n, s.channels());
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    for c in 0..s.channels() {
        for b in buf.iter_mut() {
            *b = Complex64::new(0.0, 0.0);
        }
        let set = s.index_set();
        for k in set.iter() {
            let br = freq_to_bin(k.0, n);
            let bc = freq_to_bin(k.1, n);
            buf[br * n + bc] = s.get(c, k);
        }
        fft2(&mut buf, n, false);
        for (o, b) in out.channel_mut(c).iter_mut().zip(&buf) {
            *o = b.re * scale;
        }
    }
    out
}
