"""Independent reference values computed with mpmath at high precision.

Nothing here imports the package; the tests compare against these.
"""
import mpmath as mp

mp.mp.dps = 40


def h_flat(n, x):
    """``exp(n^2 (1 - (1 + (x/n)^(2n))^(1/n)))``."""
    x = mp.mpf(x)
    return mp.e ** (n * n * (1 - (1 + (x / n) ** (2 * n)) ** (mp.mpf(1) / n)))


def k_flat(n, x):
    return mp.e ** (-(mp.mpf(x) ** (2 * n)))


def bump(x, p):
    x = mp.mpf(x)
    if abs(x) >= 1:
        return mp.mpf(0)
    return mp.e ** (-(1 - x * x) ** (-p))


def bump_derivative(x, p, a):
    return mp.diff(lambda t: bump(t, p), mp.mpf(x), a)


def bump_fourier(xi, p):
    """``int_{-1}^{1} beta(x) cos(x xi) dx``."""
    f = lambda x: bump(x, p) * mp.cos(x * xi)
    pts = mp.linspace(-1, 1, max(9, int(abs(xi)) // 2 + 9))
    return mp.quad(f, pts)


def lemma_root(m, rho):
    """Root ``t`` of ``log t + 1/(2t) = log(rho)/m``, with ``R - 1/2 - t``."""
    R = mp.e ** (mp.log(rho) / m)
    t = mp.findroot(lambda t: mp.log(t) + 1 / (2 * t) - mp.log(rho) / m, R - mp.mpf(1) / 2)
    return t, R - mp.mpf(1) / 2 - t


def log_phi(t, m, rho):
    t = mp.mpf(t)
    return -t * mp.log(rho) + m * (t + mp.mpf(1) / 2) * mp.log(t) - m * t


def laurent_boundary_max(coeffs, r, n_theta=2048):
    """Brute-force ``max_theta |sum c_k r^k e^{ik theta}|`` for a dict ``{k: c_k}``."""
    best = mp.mpf(0)
    for j in range(n_theta):
        th = 2 * mp.pi * j / n_theta
        s = mp.fsum(c * mp.mpf(r) ** k * mp.expj(k * th) for k, c in coeffs.items())
        best = max(best, abs(s))
    return best
