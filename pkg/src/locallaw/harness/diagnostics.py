"""Control quantities of one sampled matrix: entrywise errors, averaged error and Z_mu."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParameterError
from ..laws import mp_stieltjes, psi_from_im
from ..resolvent import SpectralDecomposition, decompose

__all__ = ["ControlDiagnostics", "covariance_decomposition", "z_fluctuations", "z_fluctuations_direct", "control_diagnostics"]


@dataclass(frozen=True)
class ControlDiagnostics:
    """Random control parameters at one spectral point.

    ``Lambda`` is the larger of ``max_mu |R_mumu - m_phi|`` and ``Lambda_o``,
    the largest off-diagonal ``|R_munu|``.  ``Theta = |m_R - m_phi|`` with
    ``m_R = tr R / N``.  ``G_dev`` is ``max_ij |G_ij - delta_ij m_{1/phi}|``.
    """

    z: complex
    N: int
    M: int
    Lambda: float
    Lambda_o: float
    Lambda_d: float
    Theta: float
    m_R: complex
    Psi: float
    Psi_Theta: float
    Z_mu: np.ndarray
    Z_avg: complex
    G_dev: float
    trace_defect: float

    def as_metrics(self) -> dict:
        return {
            "Lambda": self.Lambda,
            "Lambda_o": self.Lambda_o,
            "Lambda_d": self.Lambda_d,
            "Theta": self.Theta,
            "Psi": self.Psi,
            "Psi_Theta": self.Psi_Theta,
            "Lambda_over_Psi": self.Lambda / self.Psi,
            "Theta_N_eta": self.Theta * self.N * self.z.imag,
            "G_ratio": self.G_dev * (self.M / self.N) / self.Psi,
            "Z_max": float(np.max(np.abs(self.Z_mu))),
            "Z_avg_abs": abs(self.Z_avg),
            "Lambda_log_N": self.Lambda * math.log(self.N),
            "trace_defect": self.trace_defect,
        }


def covariance_decomposition(X) -> SpectralDecomposition:
    """Decomposition of ``X* X``, symmetrized against rounding."""
    X = np.asarray(X)
    A = X.conj().T @ X
    return decompose((A + A.conj().T) / 2)


def z_fluctuations(decomp: SpectralDecomposition, z, M: int) -> np.ndarray:
    """All ``Z_mu`` from one decomposition of ``X* X``.

    Uses ``1/R_mumu = -z - (z~/N) tr G^[mu] - Z_mu`` together with
    ``tr G^[mu] = tr R - (R^2)_mumu / R_mumu - (M - N + 1)/z``, where the
    second relation counts the ``M - N + 1`` extra zero eigenvalues of the
    ``M x M`` matrix with column ``mu`` removed.
    """
    z = complex(z)
    N = decomp.dim
    W = np.abs(decomp.eigenvectors) ** 2
    inv = 1.0 / (decomp.eigenvalues - z)
    Rd = W @ inv
    R2 = W @ inv**2
    trG = np.sum(inv) - R2 / Rd - (M - N + 1) / z
    zt = z / math.sqrt(M / N)
    return -z - 1.0 / Rd - zt / N * trG


def z_fluctuations_direct(X, z, mus) -> np.ndarray:
    """``Z_mu`` from the defining quadratic form, one linear solve per ``mu``."""
    X = np.asarray(X)
    M, N = X.shape
    z = complex(z)
    zt = z / math.sqrt(M / N)
    out = []
    for mu in mus:
        Xm = X.copy()
        Xm[:, mu] = 0
        A = Xm @ Xm.conj().T - z * np.eye(M)
        x = X[:, mu]
        Gx = np.linalg.solve(A, x)
        Ginv = np.linalg.inv(A)
        out.append(z * (x.conj() @ Gx) - zt / N * np.trace(Ginv))
    return np.array(out)


def control_diagnostics(X, z, decomp: SpectralDecomposition | None = None) -> ControlDiagnostics:
    """Compute :class:`ControlDiagnostics` for ``X`` at ``z`` (``Im z > 0``)."""
    X = np.asarray(X)
    M, N = X.shape
    z = complex(z)
    if z.imag <= 0:
        raise InvalidParameterError("diagnostics require Im z > 0")
    if decomp is None:
        decomp = covariance_decomposition(X)
    phi = M / N
    m = complex(mp_stieltjes(z, phi))
    m_dual = complex(mp_stieltjes(z, 1.0 / phi))
    U = decomp.eigenvectors
    inv = 1.0 / (decomp.eigenvalues - z)
    R = (U * inv) @ U.conj().T
    d = np.diag(R)
    Lambda_d = float(np.max(np.abs(d - m)))
    off = R - np.diag(d)
    Lambda_o = float(np.max(np.abs(off))) if N > 1 else 0.0
    tr_eig = complex(np.sum(inv))
    tr_diag = complex(np.sum(d))
    m_R = tr_eig / N
    Theta = abs(m_R - m)
    eta = z.imag
    Psi = psi_from_im(m.imag, N, eta)
    Psi_Theta = math.sqrt((m.imag + Theta) / (N * eta))
    # G = (X R X* - I) / z
    G = (X @ R @ X.conj().T - np.eye(M)) / z
    G_dev = float(np.max(np.abs(G - m_dual * np.eye(M))))
    Z = z_fluctuations(decomp, z, M)
    return ControlDiagnostics(
        z=z,
        N=N,
        M=M,
        Lambda=max(Lambda_d, Lambda_o),
        Lambda_o=Lambda_o,
        Lambda_d=Lambda_d,
        Theta=Theta,
        m_R=m_R,
        Psi=Psi,
        Psi_Theta=Psi_Theta,
        Z_mu=Z,
        Z_avg=complex(np.mean(Z)),
        G_dev=G_dev,
        trace_defect=abs(tr_eig - tr_diag),
    )
