//! Exact conversion between the spatial and spectral kernel parametrizations
//! and the accompanying gradient-scaling relation.
//!
//! On matching odd dimensions the map `T(theta) = lambda F(theta)` is a
//! bijection between real spatial tap banks and Hermitian spectral
//! coefficient banks, and convolving with either parametrization gives the
//! same operator. Even evaluation grids route through the odd neighbor: the
//! exact multiplier is duplicated across Nyquist aliasing classes so that the
//! averaging step of the spectral convolution recovers it unchanged.

use num_complex::Complex64;

use crate::conv::{
    conv_spatial, conv_spectral, pad_kernel_spatial, SpatialKernel, SpectralKernel,
};
use crate::error::{Error, Result};
use crate::grids::{dft, idft, Lambda, RealGrid, Spectrum};
use crate::resample::{adapt_spectrum, nyquist_duplicate};

/// `T(theta)`: the spectral kernel on `I_M` equivalent to `theta` on `J_M`.
/// Per channel pair the coefficients are the unnormalized DFT of the kernel
/// laid out on the grid with centered offsets mapped by `o mod M`.
pub fn cnn_to_fno(k: &SpatialKernel) -> SpectralKernel {
    let m = k.m();
    let lambda = (m * m) as f64;
    let mut out = SpectralKernel::zeros(m, k.c_out(), k.c_in());
    for co in 0..k.c_out() {
        for ci in 0..k.c_in() {
            let grid = RealGrid::from_vec(m, 1, k.as_grid(co, ci, m)).expect("finite taps");
            let mut s = dft(&grid, Lambda::Full);
            for z in s.data_mut() {
                *z *= lambda;
            }
            out.set_pair_spectrum(co, ci, &s);
        }
    }
    out
}

/// `T^{-1}`: the spatial kernel on `J_n` (n odd) whose convolution equals the
/// spectral convolution by `khat` lifted to `I_n`.
pub fn fno_to_cnn(khat: &SpectralKernel, n: usize) -> Result<SpatialKernel> {
    if n % 2 == 0 {
        return Err(Error::Parity(format!(
            "fno_to_cnn target dimension must be odd, got {}",
            n
        )));
    }
    if n < khat.m() {
        return Err(Error::InvalidDimension(format!(
            "fno_to_cnn target {} below kernel dimension {}",
            n,
            khat.m()
        )));
    }
    let mut out = SpatialKernel::zeros(n, khat.c_out(), khat.c_in());
    for co in 0..khat.c_out() {
        for ci in 0..khat.c_in() {
            let lifted = adapt_spectrum(&khat.pair_spectrum(co, ci), n);
            // Unit lambda makes idft divide the raw multipliers by n^2.
            let mut s = Spectrum::zeros(n, 1, Lambda::Unit);
            s.data_mut().copy_from_slice(lifted.data());
            let grid = idft(&s, Lambda::Unit)?;
            for o in out.offsets() {
                let r = o.0.rem_euclid(n as i64) as usize;
                let c = o.1.rem_euclid(n as i64) as usize;
                out.set(co, ci, o, grid.get(0, r, c));
            }
        }
    }
    Ok(out)
}

/// Spectral kernel that reproduces `conv_spatial(k, .)` exactly on grids of
/// dimension `n`. Odd `n` is plain `cnn_to_fno` of the padded kernel; even
/// `n` duplicates the exact `I_n` multiplier onto its odd neighbor so that
/// the spectral convolution's Nyquist averaging recovers it.
pub fn cnn_to_fno_at(k: &SpatialKernel, n: usize) -> Result<SpectralKernel> {
    if k.m() > n {
        return Err(Error::KernelTooLarge { m: k.m(), n });
    }
    let padded = pad_kernel_spatial(k, n)?;
    let exact = cnn_to_fno(&padded);
    if n % 2 == 1 {
        return Ok(exact);
    }
    let mut out = SpectralKernel::zeros(n + 1, k.c_out(), k.c_in());
    for co in 0..k.c_out() {
        for ci in 0..k.c_in() {
            let dup = nyquist_duplicate(&exact.pair_spectrum(co, ci));
            out.set_pair_spectrum(co, ci, &dup);
        }
    }
    Ok(out)
}

/// Restrict a spectral kernel to `modes x modes` coefficients (odd `modes`).
/// Even source dimensions are Nyquist-split first, matching the lift the
/// spectral convolution applies, so truncation to the full odd neighbor is
/// lossless.
pub fn truncate_modes(khat: &SpectralKernel, modes: usize) -> Result<SpectralKernel> {
    if modes % 2 == 0 {
        return Err(Error::Parity(format!(
            "mode truncation target must be odd, got {}",
            modes
        )));
    }
    let m_odd = if khat.m() % 2 == 0 { khat.m() + 1 } else { khat.m() };
    if modes > m_odd {
        return Err(Error::InvalidDimension(format!(
            "mode count {} exceeds kernel dimension {}",
            modes, m_odd
        )));
    }
    let mut out = SpectralKernel::zeros(modes, khat.c_out(), khat.c_in());
    for co in 0..khat.c_out() {
        for ci in 0..khat.c_in() {
            let s = adapt_spectrum(&khat.pair_spectrum(co, ci), modes);
            out.set_pair_spectrum(co, ci, &s);
        }
    }
    Ok(out)
}

/// Evaluate both sides of the gradient-scaling relation
/// `grad_khat K(khat)(v) = (1/|J_N|) T(grad_theta C(theta)(v))`
/// at `khat = T(theta)` and return the largest entrywise deviation.
///
/// Both Jacobians are computed through the convolution implementations
/// themselves: the spatial one by unit-tap evaluations, the spectral one by
/// Hermitian-paired unit coefficients probed along the real and imaginary
/// axes.
pub fn grad_convert_check(theta: &SpatialKernel, v: &RealGrid) -> Result<f64> {
    let n = theta.m();
    if n % 2 == 0 {
        return Err(Error::Parity(format!(
            "grad_convert_check requires odd dimension, got {}",
            n
        )));
    }
    if v.n() != n {
        return Err(Error::InvalidDimension(format!(
            "input grid {} does not match kernel grid {}",
            v.n(),
            n
        )));
    }
    if v.channels() != theta.c_in() {
        return Err(Error::ChannelMismatch {
            expected: theta.c_in(),
            got: v.channels(),
        });
    }
    let nn = n * n;
    let (c_out, c_in) = (theta.c_out(), theta.c_in());
    let set = theta_index_set(theta);
    let mut max_dev: f64 = 0.0;
    for co in 0..c_out {
        for ci in 0..c_in {
            // Spatial Jacobian rows: d out[co, j] / d theta[co, ci, o].
            let mut rows = vec![vec![0.0f64; nn]; nn];
            for (oi, o) in theta.offsets().enumerate() {
                let mut unit = SpatialKernel::zeros(n, c_out, c_in);
                unit.set(co, ci, o, 1.0);
                let out = conv_spatial(&unit, v)?;
                for (j, row) in rows.iter_mut().enumerate() {
                    row[oi] = out.channel(co)[j];
                }
            }
            // Right-hand side: full-normalized DFT of each row, i.e.
            // (1/|J_N|) T applied to the spatial gradient.
            let rhs: Vec<Spectrum> = rows
                .iter()
                .map(|row| {
                    let grid = offsets_to_grid(theta, row, n);
                    dft(&grid, Lambda::Full)
                })
                .collect();
            // Left-hand side: Wirtinger-style spectral Jacobian.
            for k in set.iter() {
                let p = set.alias_partner(k);
                if p < k {
                    continue;
                }
                let mut ux = SpectralKernel::zeros(n, c_out, c_in);
                ux.set(co, ci, k, Complex64::new(1.0, 0.0));
                if p != k {
                    ux.set(co, ci, p, Complex64::new(1.0, 0.0));
                }
                let kx = conv_spectral(&ux, v)?;
                let ky = if p != k {
                    let mut uy = SpectralKernel::zeros(n, c_out, c_in);
                    uy.set(co, ci, k, Complex64::new(0.0, 1.0));
                    uy.set(co, ci, p, Complex64::new(0.0, -1.0));
                    Some(conv_spectral(&uy, v)?)
                } else {
                    None
                };
                for j in 0..nn {
                    let lhs = match &ky {
                        Some(ky) => {
                            Complex64::new(kx.channel(co)[j], ky.channel(co)[j]) * 0.5
                        }
                        None => Complex64::new(kx.channel(co)[j], 0.0),
                    };
                    max_dev = max_dev.max((lhs - rhs[j].get(0, k)).norm());
                }
            }
        }
    }
    Ok(max_dev)
}

fn theta_index_set(theta: &SpatialKernel) -> crate::grids::FreqIndexSet {
    crate::grids::FreqIndexSet::new(theta.m()).expect("m >= 1")
}

fn offsets_to_grid(theta: &SpatialKernel, row: &[f64], n: usize) -> RealGrid {
    let mut grid = RealGrid::zeros(n, 1);
    for (oi, o) in theta.offsets().enumerate() {
        let r = o.0.rem_euclid(n as i64) as usize;
        let c = o.1.rem_euclid(n as i64) as usize;
        grid.set(0, r, c, row[oi]);
    }
    grid
}
