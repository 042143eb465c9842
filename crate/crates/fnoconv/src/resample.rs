//! Spectral zero-padding, Nyquist splitting/merging, real-valued trigonometric
//! resampling and a periodic bilinear baseline.
//!
//! Even grid dimensions are always routed through the odd neighbor dimension:
//! a coefficient at a Nyquist component `-N/2` is divided equally between
//! `-N/2` and `+N/2` of the odd grid when going up, and the pair is summed
//! back onto `-N/2` when going down. This keeps every resampled grid exactly
//! real, which plain zero-padding of even spectra does not.


use crate::error::{Error, Result};
use crate::grids::{dft, idft, Lambda, RealGrid, Spectrum};

/// Lift an even-dimension spectrum to dimension `N+1`, giving weight `w` to
/// each of the two Nyquist images per dimension (`w = 1/2`: split, `w = 1`:
/// duplicate).
pub(crate) fn even_to_odd(s: &Spectrum, w: f64) -> Spectrum {
    let n = s.n();
    debug_assert!(n % 2 == 0);
    let nyq = -((n / 2) as i64);
    let mut out = Spectrum::zeros(n + 1, s.channels(), s.lambda());
    let targets = |c: i64| -> Vec<(i64, f64)> {
        if c == nyq {
            vec![(nyq, w), (-nyq, w)]
        } else {
            vec![(c, 1.0)]
        }
    };
    for ch in 0..s.channels() {
        for k in s.index_set().iter() {
            let v = s.get(ch, k);
            for (t0, w0) in targets(k.0) {
                for (t1, w1) in targets(k.1) {
                    out.add(ch, (t0, t1), v * (w0 * w1));
                }
            }
        }
    }
    out
}

/// Project an odd-dimension spectrum over `I_{N+1}` down to even `I_N`,
/// weighting each Nyquist image by `w` before accumulating onto `-N/2`
/// (`w = 1`: aliasing sum, `w = 1/2`: average).
pub(crate) fn odd_to_even(s: &Spectrum, w: f64) -> Spectrum {
    let m = s.n();
    debug_assert!(m % 2 == 1 && m >= 3);
    let n = m - 1;
    let half = (n / 2) as i64;
    let mut out = Spectrum::zeros(n, s.channels(), s.lambda());
    let target = |c: i64| -> (i64, f64) {
        if c == half || c == -half {
            (-half, w)
        } else {
            (c, 1.0)
        }
    };
    for ch in 0..s.channels() {
        for k in s.index_set().iter() {
            let (t0, w0) = target(k.0);
            let (t1, w1) = target(k.1);
            out.add(ch, (t0, t1), s.get(ch, k) * (w0 * w1));
        }
    }
    out
}

/// Nyquist splitting: lift a Hermitian spectrum over even `I_N` to `I_{N+1}`
/// so that its trigonometric interpolant is real-valued and agrees with the
/// input's samples on `J_N`.
pub fn nyquist_split(s: &Spectrum) -> Result<Spectrum> {
    if s.n() % 2 != 0 {
        return Err(Error::Parity(format!(
            "nyquist_split requires an even dimension, got {}",
            s.n()
        )));
    }
    Ok(even_to_odd(s, 0.5))
}

/// Inverse of [`nyquist_split`] on its image: coefficients at `+/-N/2`
/// components are summed (aliased) back onto `-N/2`.
pub fn nyquist_merge(s: &Spectrum) -> Result<Spectrum> {
    if s.n() % 2 != 1 || s.n() < 3 {
        return Err(Error::Parity(format!(
            "nyquist_merge requires an odd dimension >= 3, got {}",
            s.n()
        )));
    }
    Ok(odd_to_even(s, 1.0))
}

/// Duplication lift (transpose of the aliasing sum): each Nyquist coefficient
/// is copied to both `+/-N/2`. Used for representing even-grid convolution
/// multipliers on the odd neighbor grid without magnitude loss.
pub(crate) fn nyquist_duplicate(s: &Spectrum) -> Spectrum {
    debug_assert!(s.n() % 2 == 0);
    even_to_odd(s, 1.0)
}

/// Averaging projection (transpose of splitting): Nyquist image pairs are
/// averaged onto `-N/2`.
pub(crate) fn nyquist_average(s: &Spectrum) -> Spectrum {
    debug_assert!(s.n() % 2 == 1 && s.n() >= 3);
    odd_to_even(s, 0.5)
}

/// Plain zero-embedding of an odd-dimension spectrum into a larger odd one.
pub fn pad_spectrum_odd(s: &Spectrum, n: usize) -> Result<Spectrum> {
    if s.n() % 2 != 1 || n % 2 != 1 {
        return Err(Error::Parity(format!(
            "pad_spectrum_odd requires odd dimensions, got {} -> {}",
            s.n(),
            n
        )));
    }
    if n < s.n() {
        return Err(Error::InvalidDimension(format!(
            "pad_spectrum_odd target {} smaller than source {}",
            n,
            s.n()
        )));
    }
    let mut out = Spectrum::zeros(n, s.channels(), s.lambda());
    for ch in 0..s.channels() {
        for k in s.index_set().iter() {
            out.set(ch, k, s.get(ch, k));
        }
    }
    Ok(out)
}

/// Restriction of an odd-dimension spectrum to a smaller odd index set.
pub(crate) fn truncate_spectrum_odd(s: &Spectrum, n: usize) -> Spectrum {
    debug_assert!(s.n() % 2 == 1 && n % 2 == 1 && n <= s.n());
    let mut out = Spectrum::zeros(n, s.channels(), s.lambda());
    for ch in 0..s.channels() {
        for k in out.index_set().iter() {
            out.set(ch, k, s.get(ch, k));
        }
    }
    out
}

/// Spectrum-level resampling pipeline `I_M -> I_n`: every even endpoint is
/// routed through its odd neighbor (split upward, aliasing-merge downward).
pub(crate) fn adapt_spectrum(s: &Spectrum, n: usize) -> Spectrum {
    let mut cur = if s.n() % 2 == 0 {
        even_to_odd(s, 0.5)
    } else {
        s.clone()
    };
    let t = if n % 2 == 0 { n + 1 } else { n };
    cur = if t >= cur.n() {
        pad_spectrum_odd(&cur, t).expect("odd pad")
    } else {
        truncate_spectrum_odd(&cur, t)
    };
    if n % 2 == 0 {
        cur = odd_to_even(&cur, 1.0);
    }
    cur
}

/// Transpose of [`adapt_spectrum`] for the same `(M, n)` pair, mapping
/// spectra over `I_n` back to `I_M`.
pub(crate) fn adapt_spectrum_transpose(s: &Spectrum, m: usize) -> Spectrum {
    let n = s.n();
    // Reverse of: [split if M even] -> pad/trunc odd -> [merge if n even].
    let mut cur = if n % 2 == 0 {
        even_to_odd(s, 1.0) // merge^T = duplicate
    } else {
        s.clone()
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

/// Real-valued trigonometric resampling of `v` from `J_M` to `J_n`.
pub fn trig_resample(v: &RealGrid, n: usize) -> RealGrid {
    if n == v.n() {
        return v.clone();
    }
    let s = dft(v, Lambda::Full);
    let r = adapt_spectrum(&s, n);
    idft(&r, Lambda::Full).expect("resampled spectrum stays Hermitian")
}

/// Adjoint of the linear map `v -> trig_resample(v, n)`, taking a cotangent
/// over `J_n` back to `J_m`.
pub fn trig_resample_adjoint(g: &RealGrid, m: usize) -> RealGrid {
    if m == g.n() {
        return g.clone();
    }
    let n = g.n();
    let s = dft(g, Lambda::Full);
    let r = adapt_spectrum_transpose(&s, m);
    let mut out = idft(&r, Lambda::Full).expect("transposed spectrum stays Hermitian");
    let scale = (n * n) as f64 / ((m * m) as f64);
    for x in out.data_mut() {
        *x *= scale;
    }
    out
}

/// Periodic bilinear resampling; sample positions map by `j -> j * M / n`
/// with torus wrap-around for the right/bottom neighbor.
pub fn bilinear_resample(v: &RealGrid, n: usize) -> RealGrid {
    let m = v.n();
    if n == m {
        return v.clone();
    }
    let ratio = m as f64 / n as f64;
    RealGrid::from_fn(n, v.channels(), |c, r, col| {
        let y = r as f64 * ratio;
        let x = col as f64 * ratio;
        let y0 = y.floor() as usize % m;
        let x0 = x.floor() as usize % m;
        let y1 = (y0 + 1) % m;
        let x1 = (x0 + 1) % m;
        let fy = y - y.floor();
        let fx = x - x.floor();
        v.get(c, y0, x0) * (1.0 - fy) * (1.0 - fx)
            + v.get(c, y0, x1) * (1.0 - fy) * fx
            + v.get(c, y1, x0) * fy * (1.0 - fx)
            + v.get(c, y1, x1) * fy * fx
    })
}
