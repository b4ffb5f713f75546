"""Autocorrelation vectors and the linear maps linking them to the PSD.

Layout and index conventions (the one place they are defined):

* An autocorrelation vector of half length L is stored in the zero-leading
  lag layout ``[0, r(-L+1), ..., r(0), ..., r(L-1)]``: slot k holds lag
  k - L, and slot 0 (lag -L, not measurable from an L-sample frame) is
  exactly 0.  ``AutocorrVector.lag(j)`` reads slot L + j.
* All matrix formulas below are transcribed from 1-based conventions;
  internal storage is 0-based.  Row i (1-based) of a matrix is ``mat[i-1]``.
* ``build_idft`` returns the plain inverse-DFT matrix (row k has exponent
  +2*pi*k*l/2N).  The zero-leading lag layout indexes rows by lag k - N, so
  the dictionary used on measured data is built with the *lag-centered*
  variant (rows rolled by N, exponent +2*pi*(k-N)*l/2N); that is the unique
  row indexing under which a nonnegative per-bin PSD reproduces the stored
  autocorrelation of the synthesized frames.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import hankel, toeplitz

from .model import WidebandScene, analytic_autocorrelation, frames_as_array
from .sampling import MeasurementMatrix


@dataclass(frozen=True)
class AutocorrVector:
    """Length-2L autocorrelation vector in the zero-leading lag layout."""

    half_len: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (2 * self.half_len,):
            raise ValueError("values must have length 2 * half_len")
        if v[0] != 0:
            raise ValueError("slot 0 (lag -L) must be exactly 0")
        object.__setattr__(self, "values", v)

    def lag(self, j: int) -> complex:
        if not -self.half_len < j < self.half_len:
            raise ValueError(f"lag {j} outside (-{self.half_len}, {self.half_len})")
        return self.values[self.half_len + j]

    def conjugate_symmetry_error(self) -> float:
        """max_j |r(-j) - conj(r(j))|."""
        pos = self.values[self.half_len + 1 :]
        neg = self.values[1 : self.half_len][::-1]
        return float(np.abs(neg - np.conj(pos)).max()) if pos.size else 0.0


def _assemble(half_len: int, positive_lags: np.ndarray) -> AutocorrVector:
    """Build the zero-leading layout from r(0..L-1); negative lags by conjugation."""
    values = np.zeros(2 * half_len, dtype=complex)
    values[half_len:] = positive_lags
    values[1:half_len] = np.conj(positive_lags[1:][::-1])
    return AutocorrVector(half_len=half_len, values=values)


def estimate_autocorr(frames, half_len: int, estimator: str = "biased") -> AutocorrVector:
    """Average lag products over frames assuming a jointly stationary stream.

    biased:   r(j) = mean over frames of (1/L) sum_n x[n] x*[n-j]
    unbiased: same sums with 1/(L-j) normalization.
    """
    if estimator not in ("biased", "unbiased"):
        raise ValueError(f"unknown estimator {estimator!r}")
    y = frames_as_array(frames)
    n_frames, length = y.shape
    if length != half_len:
        raise ValueError(f"half_len {half_len} != frame length {length}")
    spec = np.fft.fft(y, n=2 * length, axis=1)
    corr = np.fft.ifft(spec * np.conj(spec), axis=1)[:, :length]
    mean = corr.mean(axis=0)
    if estimator == "biased":
        mean = mean / length
    else:
        mean = mean / (length - np.arange(length))
    return _assemble(half_len, mean)


def estimate_cav(phi: MeasurementMatrix, frames, estimator: str = "gap") -> AutocorrVector:
    """Compressive autocorrelation vector from subsampled frames.

    gap (default): slot for "lag" a averages every sample pair whose
        underlying Nyquist index gap equals selected_rows[a] - selected_rows[0];
        its expectation matches the link-matrix model exactly.
    stream: treats the compressive stream as stationary and averages lag-a
        products (biased); systematically biased under subsampling, kept for
        comparison.
    """
    y = frames_as_array(frames)
    if y.shape[1] != phi.m:
        raise ValueError("frame length does not match the measurement count")
    if estimator == "stream":
        return estimate_autocorr(frames, phi.m, estimator="biased")
    if estimator != "gap":
        raise ValueError(f"unknown estimator {estimator!r}")
    sel = phi.selected_rows
    gaps = sel - sel[0]
    gram = (y.T @ np.conj(y)) / y.shape[0]  # gram[i, j] = mean_f y_i conj(y_j)
    diff = sel[:, None] - sel[None, :]
    pos = np.searchsorted(gaps, diff)
    pos_c = np.clip(pos, 0, phi.m - 1)
    valid = gaps[pos_c] == diff
    slot = pos_c[valid]
    vals = gram[valid]
    counts = np.bincount(slot, minlength=phi.m)
    sums = np.bincount(slot, weights=vals.real, minlength=phi.m) + 1j * np.bincount(
        slot, weights=vals.imag, minlength=phi.m
    )
    return _assemble(phi.m, sums / counts)


def _as_dense(phi) -> np.ndarray:
    if isinstance(phi, MeasurementMatrix):
        return phi.dense().astype(complex)
    return np.asarray(phi, dtype=complex)


def build_phi_bar(phi) -> np.ndarray:
    """M x N companion matrix: row 0 is zero, row i is the conjugate of row M-i."""
    p = _as_dense(phi)
    m = p.shape[0]
    out = np.zeros_like(p)
    for i in range(1, m):
        out[i] = np.conj(p[m - i])
    return out


def build_block_matrices(phi) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """The four N x N hankel/toeplitz blocks built from the first row of phi.

    With f the first row of phi (entries phi[0, :]):
      b1 = hankel(0_N, [0, f_1 .. f_{N-1}])
      b2 = hankel([f_1 .. f_N], [f_N, 0 .. 0])
      b3 = toeplitz(0_N, [0, conj(f_N) .. conj(f_2)])
      b4 = toeplitz([conj(f_1) .. conj(f_N)], [conj(f_1), 0 .. 0])
    """
    p = _as_dense(phi)
    n = p.shape[1]
    f = p[0]
    zeros_col = np.zeros(n, dtype=complex)
    b1 = hankel(zeros_col, np.concatenate(([0.0], f[: n - 1])))
    b2 = hankel(f, np.concatenate(([f[n - 1]], np.zeros(n - 1))))
    g = np.conj(f)
    b3 = toeplitz(zeros_col, np.concatenate(([0.0], g[:0:-1])))
    b4 = toeplitz(g, np.concatenate(([g[0]], np.zeros(n - 1))))
    return b1, b2, b3, b4


@dataclass(frozen=True)
class LinkMatrix:
    """2M x 2N map from Nyquist to compressive autocorrelation vectors."""

    a: np.ndarray
    blocks: dict

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex)
        object.__setattr__(self, "a", a)

    @property
    def shape(self) -> tuple[int, int]:
        return self.a.shape


def build_link_matrix(phi) -> LinkMatrix:
    """Assemble the 2M x 2N block matrix [[pb @ b1, pb @ b2], [phi @ b3, phi @ b4]]."""
    p = _as_dense(phi)
    pb = build_phi_bar(p)
    b1, b2, b3, b4 = build_block_matrices(p)
    blocks = {
        "top_left": pb @ b1,
        "top_right": pb @ b2,
        "bottom_left": p @ b3,
        "bottom_right": p @ b4,
    }
    a = np.block(
        [
            [blocks["top_left"], blocks["top_right"]],
            [blocks["bottom_left"], blocks["bottom_right"]],
        ]
    )
    return LinkMatrix(a=a, blocks=blocks)


def link_matrix_entrywise(phi) -> np.ndarray:
    """Reference construction of the link matrix, expanding the index rules inline.

    Never forms the companion/hankel/toeplitz sub-matrices; each output block
    is a direct sum over the scalar index arithmetic.  Kept as the slow dual
    implementation used by the self-test gate.
    """
    p = _as_dense(phi)
    m, n = p.shape
    i = np.arange(1, m + 1)[:, None, None]  # output row, 1-based
    j = np.arange(1, n + 1)[None, :, None]  # output col, 1-based
    k = np.arange(1, n + 1)[None, None, :]  # summation index, 1-based

    def entry(mat, r_idx, c_idx, mask):
        r = np.clip(r_idx, 1, mat.shape[0]) - 1
        c = np.clip(c_idx, 1, mat.shape[1]) - 1
        return np.where(mask, mat[r, c], 0.0)

    row_sel = np.broadcast_to(m + 2 - i, (m, n, n))
    left = np.where(
        np.broadcast_to(i != 1, (m, n, n)),
        entry(np.conj(p), row_sel, np.broadcast_to(k, (m, n, n)), (row_sel >= 2) & (row_sel <= m)),
        0.0,
    )
    c1 = k + j - n - 1
    tl = (left * entry(p, np.ones_like(c1), c1, (c1 >= 1) & (c1 <= n - 1))).sum(axis=2)
    c2 = k + j - 1
    tr = (left * entry(p, np.ones_like(c2), c2, c2 <= n)).sum(axis=2)

    bottom = np.broadcast_to(p[:, None, :], (m, n, n))
    c3 = n - (j - k)
    bl = (bottom * entry(np.conj(p), np.ones_like(c3), c3 + 1, (j - k >= 1) & (c3 + 1 >= 2))).sum(axis=2)
    c4 = k - j + 1
    br = (bottom * entry(np.conj(p), np.ones_like(c4), c4, (k >= j) & (c4 >= 1))).sum(axis=2)

    out = np.zeros((2 * m, 2 * n), dtype=complex)
    out[:m, :n] = tl
    out[:m, n:] = tr
    out[m:, :n] = bl
    out[m:, n:] = br
    return out


def build_idft(two_n: int) -> np.ndarray:
    """Inverse DFT matrix: psi[k, l] = (1/2N) exp(+2i pi k l / 2N)."""
    if two_n < 2 or two_n % 2:
        raise ValueError("two_n must be even and >= 2")
    k = np.arange(two_n)
    return np.exp(2j * np.pi * np.outer(k, k) / two_n) / two_n


def build_lag_centered_idft(two_n: int) -> np.ndarray:
    """Inverse DFT with rows indexed by lag k - N (rows of build_idft rolled by N).

    Row k evaluates the autocorrelation at lag k - N, matching the
    zero-leading layout slot k; see the module docstring.
    """
    return np.roll(build_idft(two_n), two_n // 2, axis=0)


@dataclass(frozen=True)
class DictionaryBundle:
    """Link matrix, inverse-DFT basis, and their product d = a @ psi."""

    a: np.ndarray
    psi: np.ndarray
    d: np.ndarray

    def stacked(self, t_periods: int) -> "StackedDictionary":
        return build_stacked_operator(self.d, t_periods)


def build_dictionary(a, psi: np.ndarray) -> DictionaryBundle:
    """Compose the link matrix with an inverse-DFT basis."""
    a_mat = a.a if isinstance(a, LinkMatrix) else np.asarray(a, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    if a_mat.shape[1] != psi.shape[0]:
        raise ValueError(f"inner dimensions disagree: {a_mat.shape} x {psi.shape}")
    return DictionaryBundle(a=a_mat, psi=psi, d=a_mat @ psi)


def sensing_dictionary(phi: MeasurementMatrix) -> DictionaryBundle:
    """Dictionary used on measured data: link matrix times the lag-centered IDFT."""
    a = build_link_matrix(phi)
    psi = build_lag_centered_idft(2 * phi.n)
    return build_dictionary(a, psi)


class StackedDictionary:
    """Block operator applying d to every column of a 2N x T matrix.

    Acts on column-major stacked vectors: action(vec(P)) = vec(D P), i.e. the
    dense form is kron(I_T, d).  Materialized only on demand.
    """

    def __init__(self, d: np.ndarray, t_periods: int):
        if t_periods < 1:
            raise ValueError("t_periods must be >= 1")
        self.d = np.asarray(d, dtype=complex)
        self.t = t_periods

    @property
    def shape(self) -> tuple[int, int]:
        return (self.t * self.d.shape[0], self.t * self.d.shape[1])

    def matvec(self, pbar: np.ndarray) -> np.ndarray:
        cols = self.d.shape[1]
        p = np.asarray(pbar).reshape(self.t, cols).T
        return np.ravel(self.d @ p, order="F")

    def rmatvec(self, rbar: np.ndarray) -> np.ndarray:
        rows = self.d.shape[0]
        r = np.asarray(rbar).reshape(self.t, rows).T
        return np.ravel(self.d.conj().T @ r, order="F")

    def to_dense(self) -> np.ndarray:
        return np.kron(np.eye(self.t), self.d)


def build_stacked_operator(d: np.ndarray, t_periods: int) -> StackedDictionary:
    return StackedDictionary(d, t_periods)


def analytic_nav(scene: WidebandScene, include_noise: bool = False) -> AutocorrVector:
    """Exact Nyquist autocorrelation vector of a scene, in the stored layout."""
    n = scene.plan.nyquist_n
    lags = np.arange(n)
    return _assemble(n, analytic_autocorrelation(scene, lags, include_noise))


def analytic_cav(scene: WidebandScene, phi: MeasurementMatrix, include_noise: bool = False) -> AutocorrVector:
    """Exact compressive autocorrelation vector (gap reads of the analytic NAV)."""
    gaps = phi.selected_rows - phi.selected_rows[0]
    return _assemble(phi.m, analytic_autocorrelation(scene, gaps, include_noise))


def model_psd(scene: WidebandScene, include_noise: bool = False) -> np.ndarray:
    """PSD vector p with sensing_dictionary(phi) @ p == analytic_cav exactly.

    The frame synthesis carries per-frame energy sum(true_psd), which puts a
    factor 2 between the unit-energy scene PSD and the dictionary-scale PSD;
    white noise adds a flat floor of one noise variance per bin.
    """
    from .model import noise_variance

    p = 2.0 * scene.true_psd
    if include_noise:
        p = p + noise_variance(scene)
    return p


def save_matrix(path, mat: np.ndarray) -> None:
    """Write a matrix as flat row-major little-endian complex64 plus a JSON sidecar."""
    path = Path(path)
    arr = np.ascontiguousarray(np.asarray(mat, dtype=complex)).astype("<c8")
    path.write_bytes(arr.tobytes())
    sidecar = {"rows": int(mat.shape[0]), "cols": int(mat.shape[1]), "dtype": "complex64"}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar))


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    flat = np.frombuffer(path.read_bytes(), dtype="<c8")
    return flat.reshape(sidecar["rows"], sidecar["cols"]).astype(complex)
