"""Smooth compactly supported bump shapes shared by kernels, perturbed
drift models and the lower-bound hypothesis construction."""

import numpy as np


def smooth_bump(u):
    """Even C^inf bump exp(-1/(1-4u^2)) on |u| < 1/2, zero outside."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 0.5
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - 4.0 * ui * ui))
    return out if out.ndim else float(out)


def odd_bump(u):
    """Odd C^inf bump u * exp(-1/(1-4u^2)); integrates to zero and vanishes at 0."""
    u = np.asarray(u, dtype=float)
    return u * smooth_bump(u)


def odd_bump_prime(u):
    """Derivative of ``odd_bump``, in closed form."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 0.5
    ui = u[inside]
    q = 1.0 - 4.0 * ui * ui
    out[inside] = np.exp(-1.0 / q) * (1.0 - 8.0 * ui * ui / (q * q))
    return out if out.ndim else float(out)
