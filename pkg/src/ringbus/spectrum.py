"""Coupled Duffing-oscillator spectra.

Energies are in Hz (E/h). The exchange Hamiltonian

    H = sum_i w_i n_i + (d_i/2) n_i (n_i - 1) + sum_{i<j} J_ij (a_i^+ a_j + a_j^+ a_i)

conserves the total excitation number, so the truncated basis splits into
independent blocks of fixed total excitation; each block is diagonalized on
its own and dressed states are labeled within their block.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize_scalar

from ._validation import check_positive, parallel_map
from .exceptions import AmbiguousLabel, DimensionOverflow, ValidationError

MAX_BASIS = 200_000
AMBIGUITY_THRESHOLD = 0.5


@dataclass(frozen=True)
class TransmonSpec:
    omega_hz: float
    anharmonicity_hz: float
    label: str = ""

    def __post_init__(self):
        check_positive(self.omega_hz, "omega_hz")
        if not abs(self.anharmonicity_hz) < self.omega_hz:
            raise ValidationError(f"|anharmonicity| must be below the qubit frequency for {self.label or 'transmon'}")


@dataclass(frozen=True)
class TruncationPolicy:
    levels: int = 8
    max_total: int = 8
    max_dim: int = MAX_BASIS

    def __post_init__(self):
        if self.levels < 2 or self.max_total < 2:
            raise ValidationError("truncation needs at least 2 levels and 2 total excitations")


def coupling_matrix(n, pairs=None, matrix=None):
    """Symmetric zero-diagonal J matrix from ``{(i, j): J}`` or an explicit array."""
    if matrix is not None:
        j = np.array(matrix, dtype=float)
        if j.shape != (n, n):
            raise ValidationError(f"coupling matrix must be {n}x{n}, got {j.shape}")
        if not np.allclose(j, j.T, rtol=0, atol=0) or np.any(np.diag(j) != 0):
            raise ValidationError("coupling matrix must be symmetric with zero diagonal")
        return j
    j = np.zeros((n, n))
    for (a, b), value in (pairs or {}).items():
        if a == b:
            raise ValidationError("a qubit cannot couple to itself")
        j[a, b] = j[b, a] = value
    return j


def count_basis_states(n_modes, levels, max_total):
    """Number of occupation vectors with entries below ``levels`` and sum at most ``max_total``."""
    counts = np.zeros(max_total + 1, dtype=object)
    counts[0] = 1
    for _ in range(n_modes):
        nxt = np.zeros_like(counts)
        for total in range(max_total + 1):
            nxt[total] = sum(counts[total - n] for n in range(min(levels - 1, total) + 1))
        counts = nxt
    return int(sum(counts))


def occupation_basis(n_modes, policy):
    """Rows of occupation numbers, grouped by total excitation then lexicographic."""
    dim = count_basis_states(n_modes, policy.levels, policy.max_total)
    if dim > policy.max_dim:
        raise DimensionOverflow(f"basis of {dim} states exceeds the cap of {policy.max_dim}")
    states = np.zeros((1, 0), dtype=np.int64)
    for _ in range(n_modes):
        used = states.sum(axis=1)
        room = np.minimum(policy.levels - 1, policy.max_total - used)
        reps = room + 1
        prefix = np.repeat(states, reps, axis=0)
        last = np.concatenate([np.arange(r) for r in reps])
        states = np.column_stack([prefix, last])
    totals = states.sum(axis=1)
    order = np.lexsort(tuple(states[:, ::-1].T) + (totals,))
    return states[order]


class HamiltonianModel:
    """Truncated basis plus the pieces of H that do not depend on J.

    ``matrix(J)`` is cheap once the model exists, which is what repeated
    forward evaluations in a fit need.
    """

    def __init__(self, specs, policy=None):
        self.specs = list(specs)
        if not self.specs:
            raise ValidationError("need at least one transmon")
        self.policy = policy or TruncationPolicy()
        self.basis = occupation_basis(len(self.specs), self.policy)
        n = self.basis
        w = np.array([s.omega_hz for s in self.specs])
        d = np.array([s.anharmonicity_hz for s in self.specs])
        self.diagonal = (n * w).sum(axis=1) + (0.5 * d * n * (n - 1)).sum(axis=1)
        self.totals = n.sum(axis=1)
        radix = self.policy.levels ** np.arange(len(self.specs))
        self._radix = radix
        self._keys = n @ radix
        self._sorter = np.argsort(self._keys)
        self._hop = {}
        self._blocks = {}

    @property
    def dim(self):
        return len(self.basis)

    def index_of(self, occupation):
        key = int(np.asarray(occupation) @ self._radix)
        pos = np.searchsorted(self._keys, key, sorter=self._sorter)
        if pos < self.dim and self._keys[self._sorter[pos]] == key:
            return int(self._sorter[pos])
        raise KeyError(f"state {tuple(occupation)} not in the truncated basis")

    def hopping(self, i, j):
        """Sparse a_i^+ a_j + a_j^+ a_i on the truncated basis."""
        key = (min(i, j), max(i, j))
        if key not in self._hop:
            i, j = key
            n = self.basis
            mask = (n[:, j] > 0) & (n[:, i] < self.policy.levels - 1)
            src = np.nonzero(mask)[0]
            dst_keys = self._keys[src] + self._radix[i] - self._radix[j]
            dst = self._sorter[np.searchsorted(self._keys, dst_keys, sorter=self._sorter)]
            amp = np.sqrt(n[src, j] * (n[src, i] + 1.0))
            op = sp.coo_matrix((amp, (dst, src)), shape=(self.dim, self.dim)).tocsr()
            self._hop[key] = op + op.T
        return self._hop[key]

    def _block_parts(self, total):
        if total not in self._blocks:
            idx = np.nonzero(self.totals == total)[0]
            n = len(self.specs)
            hops = {
                (a, b): self.hopping(a, b)[idx][:, idx].toarray()
                for a in range(n)
                for b in range(a + 1, n)
            }
            self._blocks[total] = (idx, self.diagonal[idx], hops)
        return self._blocks[total]

    def block(self, j_matrix, total):
        """Dense H restricted to states with ``total`` excitations, and their basis indices."""
        idx, diag, hops = self._block_parts(total)
        h = np.diag(diag)
        for (a, b), op in hops.items():
            if j_matrix[a, b] != 0.0:
                h += j_matrix[a, b] * op
        return idx, h

    def matrix(self, j_matrix):
        j_matrix = coupling_matrix(len(self.specs), matrix=j_matrix)
        h = sp.diags(self.diagonal).tocsr()
        n = len(self.specs)
        for a in range(n):
            for b in range(a + 1, n):
                if j_matrix[a, b] != 0.0:
                    h = h + j_matrix[a, b] * self.hopping(a, b)
        return h


@dataclass
class Hamiltonian:
    """H for one coupling matrix; the sparse full matrix is assembled on first access."""

    model: HamiltonianModel
    j_matrix: np.ndarray

    @property
    def basis(self):
        return self.model.basis

    @cached_property
    def matrix(self):
        h = self.model.matrix(self.j_matrix).tocsr()
        if (h - h.T).count_nonzero():
            raise ValidationError("Hamiltonian is not Hermitian")
        return h


def build_hamiltonian(specs, j_matrix, policy=None, model=None):
    """Hermitian H over the truncated occupation basis."""
    model = model or HamiltonianModel(specs, policy)
    return Hamiltonian(model, coupling_matrix(len(model.specs), matrix=j_matrix))


@dataclass
class DressedSpectrum:
    """Eigenvalues (Hz, ascending) with bare-state labels and overlap weights."""

    energies: np.ndarray
    labels: list
    weights: np.ndarray
    ambiguous: np.ndarray
    blocks: list = field(repr=False)
    basis: np.ndarray = field(repr=False)

    @cached_property
    def _by_label(self):
        return {lab: k for k, lab in enumerate(self.labels)}

    def index(self, occupation):
        try:
            return self._by_label[tuple(int(v) for v in occupation)]
        except KeyError:
            raise AmbiguousLabel(f"no dressed state labeled {tuple(occupation)}") from None

    def energy(self, occupation, strict=True):
        k = self.index(occupation)
        if strict and self.ambiguous[k]:
            raise AmbiguousLabel(
                f"state {tuple(occupation)} has max overlap {self.weights[k]:.3f} below {AMBIGUITY_THRESHOLD}"
            )
        return float(self.energies[k])

    def vector(self, k):
        """Dressed state ``k`` as a dense vector on the full basis."""
        out = np.zeros(len(self.basis))
        for idx, vecs, sorted_pos in self.blocks:
            hit = np.nonzero(sorted_pos == k)[0]
            if hit.size:
                out[idx] = vecs[:, hit[0]]
                return out
        raise IndexError(k)


def _assign_labels(overlaps, energies):
    """Greedy max-overlap matching; ties go to the lower energy."""
    rows, cols = np.indices(overlaps.shape).reshape(2, -1)
    order = np.lexsort((energies[cols], -overlaps[rows, cols]))
    label_of = np.full(overlaps.shape[1], -1)
    used = np.zeros(overlaps.shape[0], bool)
    for r, c in zip(rows[order], cols[order]):
        if label_of[c] < 0 and not used[r]:
            label_of[c] = r
            used[r] = True
    return label_of


def diagonalize(ham, max_excitation=None):
    """Dressed spectrum, solved per excitation-number block.

    ``max_excitation`` limits which blocks are solved (all by default).
    """
    model = ham.model
    totals = model.totals
    top = totals.max() if max_excitation is None else min(max_excitation, totals.max())
    energies, labels, weights, blocks = [], [], [], []
    offset = 0
    for total in range(top + 1):
        idx, block = model.block(ham.j_matrix, total)
        vals, vecs = np.linalg.eigh(block)
        overlaps = vecs**2
        label_of = _assign_labels(overlaps, vals)
        energies.append(vals)
        labels += [tuple(int(v) for v in model.basis[idx[r]]) for r in label_of]
        weights.append(overlaps[label_of, np.arange(len(vals))])
        blocks.append((idx, offset, vecs))
        offset += len(idx)
    energies = np.concatenate(energies)
    weights = np.concatenate(weights)
    order = np.argsort(energies, kind="stable")
    sorted_pos = np.empty_like(order)
    sorted_pos[order] = np.arange(len(order))
    return DressedSpectrum(
        energies[order],
        [labels[k] for k in order],
        weights[order],
        weights[order] < AMBIGUITY_THRESHOLD,
        [(idx, vecs, sorted_pos[off : off + len(idx)]) for idx, off, vecs in blocks],
        model.basis,
    )


def _unit(n, *modes):
    v = [0] * n
    for m in modes:
        v[m] += 1
    return tuple(v)


def cross_kerr(spectrum, i, j):
    """E(1_i 1_j) - E(1_i) - E(1_j) + E(0) in Hz, spectators in ground."""
    n = spectrum.basis.shape[1]
    if i == j:
        raise ValidationError("cross-Kerr needs two distinct transmons")
    return (
        spectrum.energy(_unit(n, i, j))
        - spectrum.energy(_unit(n, i))
        - spectrum.energy(_unit(n, j))
        + spectrum.energy(_unit(n))
    )


def ramsey_shift(spectrum, i, j):
    """Conditional-Ramsey frequency shift as tabulated experimentally: ``-cross_kerr/2``."""
    return -0.5 * cross_kerr(spectrum, i, j)


def pairwise_ramsey_shifts(specs, j_matrix, pairs, policy=None, model=None):
    ham = build_hamiltonian(specs, j_matrix, policy, model)
    spec = diagonalize(ham, max_excitation=2)
    return np.array([ramsey_shift(spec, a, b) for a, b in pairs])


def single_excitation_frequencies(specs, j_matrix):
    """Dressed one-excitation energies and eigenvectors (columns) of the bare-qubit basis."""
    w = np.array([s.omega_hz for s in specs])
    h = np.diag(w) + coupling_matrix(len(specs), matrix=j_matrix)
    return np.linalg.eigh(h)


@dataclass
class AvoidedCrossing:
    sweep_hz: np.ndarray
    lower_hz: np.ndarray
    upper_hz: np.ndarray
    min_gap_hz: float
    min_gap_at_hz: float

    @property
    def gap_hz(self):
        return self.upper_hz - self.lower_hz


def _pair_branches(specs, j_matrix, sweep_index, partner_index, freq, policy):
    specs = list(specs)
    specs[sweep_index] = replace(specs[sweep_index], omega_hz=freq)
    ham = build_hamiltonian(specs, j_matrix, policy)
    spec = diagonalize(ham, max_excitation=1)
    n = len(specs)
    basis = spec.basis
    a = int(np.nonzero((basis == _unit(n, sweep_index)).all(axis=1))[0][0])
    b = int(np.nonzero((basis == _unit(n, partner_index)).all(axis=1))[0][0])
    idx, vecs, sorted_pos = spec.blocks[1]
    ia, ib = int(np.nonzero(idx == a)[0][0]), int(np.nonzero(idx == b)[0][0])
    weight = vecs[ia] ** 2 + vecs[ib] ** 2
    top2 = np.sort(np.argsort(-weight, kind="stable")[:2])
    e = np.sort(spec.energies[sorted_pos[top2]])
    return e[0], e[1]


def avoided_crossing_scan(specs, j_matrix, sweep_index, partner_index, freq_grid, policy=None):
    """Track the two levels of a pair's single-excitation manifold while one qubit is swept."""
    if sweep_index == partner_index:
        raise ValidationError("sweep and partner must differ")
    policy = policy or TruncationPolicy(levels=3, max_total=2)
    grid = np.asarray(freq_grid, dtype=float)
    if grid.size < 3:
        raise ValidationError("sweep grid needs at least 3 points")
    branches = parallel_map(lambda f: _pair_branches(specs, j_matrix, sweep_index, partner_index, f, policy), grid)
    lower = np.array([b[0] for b in branches])
    upper = np.array([b[1] for b in branches])
    gap = upper - lower
    k = int(np.argmin(gap))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]

    def g(f):
        a, b = _pair_branches(specs, j_matrix, sweep_index, partner_index, f, policy)
        return b - a

    res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1.0})
    min_gap, at = (res.fun, res.x) if res.fun < gap[k] else (gap[k], grid[k])
    return AvoidedCrossing(grid, lower, upper, float(min_gap), float(at))


@dataclass
class StarkMap:
    shifts_hz: np.ndarray
    frequencies_hz: np.ndarray  # (n_shift, n_qubits) dressed one-excitation energies
    weights: np.ndarray  # (n_shift, n_qubits, n_qubits): weight of bare qubit q in mode m

    def branch_weight(self, qubit):
        return self.weights[:, :, qubit]


def stark_map(specs, j_matrix, qubit, shift_grid):
    """One-excitation spectrum versus a frequency shift applied to ``qubit``."""
    shifts = np.asarray(shift_grid, dtype=float)
    freqs, weights = [], []
    for s in shifts:
        shifted = list(specs)
        shifted[qubit] = replace(shifted[qubit], omega_hz=shifted[qubit].omega_hz + s)
        vals, vecs = single_excitation_frequencies(shifted, j_matrix)
        freqs.append(vals)
        weights.append((vecs**2).T)
    return StarkMap(shifts, np.array(freqs), np.array(weights))


def dispersive_shift(omega_a, omega_b, j):
    """Second-order level shift of qubit ``a`` from exchange with ``b``."""
    delta = omega_a - omega_b
    if delta == 0:
        raise ValidationError("dispersive shift undefined on resonance")
    return j * j / delta
