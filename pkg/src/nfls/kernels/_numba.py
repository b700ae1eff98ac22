"""Numba-compiled hot kernels (see _numpy.py for the reference semantics)."""

import numpy as np
from numba import njit


@njit(cache=True)
def projection_power_nearfield(px, py, thetas, rs, wavelength, include_amplitude, basis):
    n = px.size
    nt, nr = thetas.size, rs.size
    nc = basis.shape[1]
    power = np.empty((nt, nr))
    anorm2 = np.empty((nt, nr))
    k = 2.0 * np.pi / wavelength
    a = np.empty(n, dtype=np.complex128)
    acc = np.empty(nc, dtype=np.complex128)
    for i in range(nt):
        ct = np.cos(thetas[i])
        st = np.sin(thetas[i])
        for j in range(nr):
            r = rs[j]
            nrm = 0.0
            for m in range(n):
                proj = px[m] * ct + py[m] * st
                rn = np.sqrt(r * r - 2.0 * r * proj + px[m] * px[m] + py[m] * py[m])
                amp = (r / rn) if include_amplitude else 1.0
                ph = -k * (rn - r)
                a[m] = amp * (np.cos(ph) + 1j * np.sin(ph))
                nrm += amp * amp
            for c in range(nc):
                s = 0.0 + 0.0j
                for m in range(n):
                    s += np.conj(basis[m, c]) * a[m]
                acc[c] = s
            p = 0.0
            for c in range(nc):
                p += acc[c].real * acc[c].real + acc[c].imag * acc[c].imag
            power[i, j] = p
            anorm2[i, j] = nrm
    return power, anorm2


@njit(cache=True)
def projection_power_phase(mvec, xs, basis):
    ns = mvec.size
    ng = xs.size
    nc = basis.shape[1]
    power = np.empty(ng)
    anorm2 = np.full(ng, float(ns))
    a = np.empty(ns, dtype=np.complex128)
    for g in range(ng):
        x = xs[g]
        for m in range(ns):
            ph = mvec[m] * x
            a[m] = np.cos(ph) + 1j * np.sin(ph)
        p = 0.0
        for c in range(nc):
            s = 0.0 + 0.0j
            for m in range(ns):
                s += np.conj(basis[m, c]) * a[m]
            p += s.real * s.real + s.imag * s.imag
        power[g] = p
    return power, anorm2


@njit(cache=True)
def moving_dml_objective(px, py, wavelength, thetas, rs, vrs, vths, times, y,
                         include_amplitude):
    k = 2.0 * np.pi / wavelength
    n = px.size
    nt, nr, nvr, nvt, nl = thetas.size, rs.size, vrs.size, vths.size, times.size
    obj = np.empty((nt, nr, nvr, nvt))
    a = np.empty(n, dtype=np.complex128)
    alpha = np.empty(n)
    beta = np.empty(n)
    for it in range(nt):
        ct = np.cos(thetas[it])
        st = np.sin(thetas[it])
        for ir in range(nr):
            r = rs[ir]
            nrm = 0.0
            for m in range(n):
                proj = px[m] * ct + py[m] * st
                perp = -px[m] * st + py[m] * ct
                rn = np.sqrt(r * r - 2.0 * r * proj + px[m] * px[m] + py[m] * py[m])
                amp = (r / rn) if include_amplitude else 1.0
                ph = -k * (rn - r)
                a[m] = amp * (np.cos(ph) + 1j * np.sin(ph))
                nrm += amp * amp
                alpha[m] = (r - proj) / rn
                beta[m] = -perp / rn
            for p in range(nvr):
                for q in range(nvt):
                    total = 0.0
                    for il in range(nl):
                        s = 0.0 + 0.0j
                        t = times[il]
                        for m in range(n):
                            vph = k * (alpha[m] * vrs[p] + beta[m] * vths[q]) * t
                            # conj(a_m * e^{-j vph}) * y = conj(a_m) e^{+j vph} y
                            s += np.conj(a[m]) * (np.cos(vph) + 1j * np.sin(vph)) * y[m, il]
                        total += s.real * s.real + s.imag * s.imag
                    obj[it, ir, p, q] = total / nrm
    return obj
