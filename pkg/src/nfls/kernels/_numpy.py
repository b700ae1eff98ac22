"""Pure-numpy reference implementations of the hot kernels."""

import numpy as np


def projection_power_nearfield(px, py, thetas, rs, wavelength, include_amplitude, basis):
    """Projection power of spherical-wavefront steering vectors onto a basis.

    For every grid cell (theta_i, r_j) builds the near-field response
    a_n = amp * exp(-2j*pi*(r_n - r)/wavelength) and returns

      power[i, j] = || basis^H a ||^2    and    anorm2[i, j] = || a ||^2.

    basis is an (N, C) complex matrix; amp is r/r_n when include_amplitude
    else 1.
    """
    nt, nr = thetas.size, rs.size
    power = np.empty((nt, nr))
    anorm2 = np.empty((nt, nr))
    k = 2.0 * np.pi / wavelength
    for i in range(nt):
        ct, st = np.cos(thetas[i]), np.sin(thetas[i])
        proj = px * ct + py * st  # (N,)
        snorm2 = px * px + py * py
        rn = np.sqrt(rs[None, :] ** 2 - 2.0 * rs[None, :] * proj[:, None] + snorm2[:, None])
        a = np.exp(-1j * k * (rn - rs[None, :]))
        if include_amplitude:
            a *= rs[None, :] / rn
        power[i] = np.abs(basis.conj().T @ a).__pow__(2).sum(axis=0)
        anorm2[i] = np.abs(a).__pow__(2).sum(axis=0)
    return power, anorm2


def projection_power_phase(mvec, xs, basis):
    """Same as above for 1-D phase-ramp steering a_m = exp(1j * mvec[m] * x)."""
    a = np.exp(1j * np.outer(mvec, xs))
    power = np.abs(basis.conj().T @ a).__pow__(2).sum(axis=0)
    return power, np.full(xs.size, float(mvec.size))


def moving_dml_objective(px, py, wavelength, thetas, rs, vrs, vths, times, y,
                         include_amplitude):
    """Projection objective of moving-target snapshots on a 4-D state grid.

    obj[t, r, p, q] = sum_l |(a(theta,r) o d(vr,vth, times[l]))^H y[:, l]|^2
                      / ||a||^2
    """
    k = 2.0 * np.pi / wavelength
    nt, nr, nvr, nvt, nl = thetas.size, rs.size, vrs.size, vths.size, times.size
    obj = np.empty((nt, nr, nvr, nvt))
    for it in range(nt):
        ct, st = np.cos(thetas[it]), np.sin(thetas[it])
        proj = px * ct + py * st
        perp = -px * st + py * ct
        for ir in range(nr):
            r = rs[ir]
            rn = np.sqrt(r * r - 2.0 * r * proj + px * px + py * py)
            a = np.exp(-1j * k * (rn - r))
            if include_amplitude:
                a = a * (r / rn)
            alpha = (r - proj) / rn
            beta = -perp / rn
            m = a.conj()[:, None] * y  # (N, L)
            # v_n over all velocity pairs: (N, nvr, nvt)
            vn = alpha[:, None, None] * vrs[None, :, None] + beta[:, None, None] * vths[None, None, :]
            acc = np.zeros((nvr, nvt))
            for il in range(nl):
                dconj = np.exp(1j * k * vn * times[il])
                s = np.einsum("npq,n->pq", dconj, m[:, il])
                acc += np.abs(s) ** 2
            obj[it, ir] = acc / np.abs(a).__pow__(2).sum()
    return obj
