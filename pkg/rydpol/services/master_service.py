# rydpol/services/master_service.py
"""
Lindblad model assembly and solution.

Density matrices are vectorized column-major: vec(rho)[b*N + a] = rho[a, b],
so vec(A X B) = (B^T kron A) vec(X). Hamiltonians are in units of hbar (rad/s).
"""
import logging
import math
import time
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from rydpol.config.engine_config import engine_settings
from rydpol.exceptions import DomainError, IntegratorError, SolverError
from rydpol.models.fields import FieldConfig
from rydpol.models.master import (
    CollapseOperator,
    DecayRates,
    DissipatorSpec,
    Hamiltonian,
    PoleExpansion,
    SteadyState,
)
from rydpol.models.quantum import LEVEL_ORDER, HyperfineBasis, LadderSpec
from rydpol.services.basis_service import BasisService
from rydpol.services.coupling_service import SPHERICAL_COMPONENTS, CouplingService

logger = logging.getLogger("rydpol.master")

# Systems up to this dimension also get a dense rank check in steady_state
_DENSE_RANK_LIMIT = 400

# Relative mismatch allowed between a pole expansion and a direct solve at v = 0
_POLE_CHECK_TOL = 1e-6

# Poles whose residue is below this fraction of the largest one are dropped
_NEGLIGIBLE_RESIDUE = 1e-12


def _basis_of(ladder: Union[LadderSpec, HyperfineBasis]) -> HyperfineBasis:
    if isinstance(ladder, HyperfineBasis):
        return ladder
    return BasisService.enumerate_basis(ladder)


def detuning_diagonal(basis: HyperfineBasis, probe: float, coupling: float, rf: float) -> np.ndarray:
    """Diagonal of H from the detunings: 0 (g), -dp (i), -(dp+dc) (r1), -(dp+dc+drf) (r2), 0 (dummy)."""
    values = {"g": 0.0, "i": -probe, "r1": -(probe + coupling), "r2": -(probe + coupling + rf)}
    diagonal = np.zeros(basis.size)
    for label in LEVEL_ORDER:
        diagonal[basis.level_slice(label)] = values[label]
    return diagonal


class MasterService:
    @staticmethod
    def build_hamiltonian(
        ladder: Union[LadderSpec, HyperfineBasis],
        probe: FieldConfig,
        coupling: FieldConfig,
        rf: FieldConfig,
    ) -> Hamiltonian:
        """
        Assemble the block Hamiltonian over the ladder basis.

        Off-diagonal blocks are Omega/2 between adjacent levels (lower row,
        upper column) and their conjugates; the dummy row and column stay zero.
        """
        basis = _basis_of(ladder)
        spec = basis.ladder
        I = spec.nuclear_spin
        H = np.zeros((basis.size, basis.size), dtype=complex)
        H[np.diag_indices(basis.size)] = detuning_diagonal(basis, probe.detuning, coupling.detuning, rf.detuning)

        for field, lower, upper in ((probe, "g", "i"), (coupling, "i", "r1"), (rf, "r1", "r2")):
            block = CouplingService.coupling_operator(field, spec.level(lower), spec.level(upper), I).matrix
            lo, up = basis.level_slice(lower), basis.level_slice(upper)
            H[lo, up] = 0.5 * block.T
            H[up, lo] = 0.5 * block.conj()
        return Hamiltonian(matrix=H, basis=basis)

    @staticmethod
    def build_collapse_operators(
        ladder: Union[LadderSpec, HyperfineBasis],
        rates: DecayRates,
        dummy_rate_factor: Optional[float] = None,
    ) -> DissipatorSpec:
        """
        Collapse operators of the model.

        - three radiative i -> g operators (q = -1, 0, +1) at gamma_i
        - one operator per excited (and, with ground relaxation, ground) state
          into the dummy state
        - one operator per g sublevel out of the dummy state, sharing gamma_dummy equally

        Raises:
            DomainError: a negative rate
        """
        for name, value in zip(
            ("gamma_i", "gamma_transit", "gamma_collision", "gamma_r1_rad", "gamma_r2_rad", "gamma_dummy"),
            (rates.gamma_i, rates.gamma_transit, rates.gamma_collision, rates.gamma_r1_rad,
             rates.gamma_r2_rad, rates.gamma_dummy),
        ):
            if value is not None and (value < 0 or not math.isfinite(value)):
                raise DomainError(f"Decay rate {name} must be non-negative, got {value}")

        basis = _basis_of(ladder)
        spec = basis.ladder
        N = basis.size
        operators: List[CollapseOperator] = []

        g_slice, i_slice = basis.level_slice("g"), basis.level_slice("i")
        amplitude = math.sqrt(2 * spec.i.L + 1)
        for q in SPHERICAL_COMPONENTS:
            u = CouplingService.angular_matrix(spec.g, spec.i, q, spec.nuclear_spin).matrix
            if not np.any(u):
                continue
            L = np.zeros((N, N))
            # Jump from an i state (column) into a g state (row)
            L[g_slice, i_slice] = amplitude * u.T
            operators.append(CollapseOperator(label=f"radiative_q{q:+d}", matrix=L, rate=rates.gamma_i))

        dummy = basis.dummy_index
        if dummy is None:
            logger.warning("⚠️ Ladder has no dummy state: incoherent decay and repopulation are omitted")
        else:
            for label in LEVEL_ORDER:
                rate = rates.level_rate(label)
                if rate <= 0:
                    continue
                for n in range(basis.level_slice(label).start, basis.level_slice(label).stop):
                    L = np.zeros((N, N))
                    L[dummy, n] = 1.0
                    operators.append(CollapseOperator(label=f"incoherent_{label}_{n}", matrix=L, rate=rate))

            factor = engine_settings.dummy_rate_factor if dummy_rate_factor is None else dummy_rate_factor
            dummy_rate = rates.resolved_dummy_rate(factor)
            g_indices = range(g_slice.start, g_slice.stop)
            if dummy_rate > 0:
                for n in g_indices:
                    L = np.zeros((N, N))
                    L[n, dummy] = 1.0
                    operators.append(
                        CollapseOperator(label=f"repopulate_g_{n}", matrix=L, rate=dummy_rate / len(g_indices))
                    )

        return DissipatorSpec(operators=operators, dimension=N)

    @staticmethod
    def dissipator_superoperator(D: DissipatorSpec) -> sp.csr_matrix:
        N = D.dimension
        identity = sp.identity(N, dtype=complex, format="csr")
        total = sp.csr_matrix((N * N, N * N), dtype=complex)
        for op in D.operators:
            if op.rate == 0:
                continue
            L = sp.csr_matrix(op.matrix, dtype=complex)
            LdL = (L.conj().T @ L).tocsr()
            term = 2 * sp.kron(L.conj(), L) - sp.kron(identity, LdL) - sp.kron(LdL.T, identity)
            total = total + 0.5 * op.rate * term
        return total.tocsr()

    @staticmethod
    def liouvillian(H: Hamiltonian, D: DissipatorSpec) -> sp.csr_matrix:
        """Superoperator acting on column-major vec(rho): -i[H, rho] plus the Lindblad dissipator."""
        N = H.dimension
        if D.dimension != N:
            raise DomainError(f"Hamiltonian dimension {N} does not match dissipator dimension {D.dimension}")
        identity = sp.identity(N, dtype=complex, format="csr")
        Hs = sp.csr_matrix(H.matrix)
        coherent = -1j * (sp.kron(identity, Hs) - sp.kron(Hs.T, identity))
        return (coherent + MasterService.dissipator_superoperator(D)).tocsr()

    @staticmethod
    def steady_state(L: sp.spmatrix, residual_tol: Optional[float] = None) -> SteadyState:
        """
        Solve L vec(rho) = 0 with trace(rho) = 1.

        The first row of the system (the rho[0, 0] equation, redundant by trace
        preservation) is replaced by a weighted trace constraint and the square
        system is solved by sparse LU factorization.

        Raises:
            SolverError: singular system (non-unique steady state), non-finite
                solution, or residual above tolerance
        """
        tol = engine_settings.steady_state_residual_tol if residual_tol is None else residual_tol
        L = sp.csr_matrix(L)
        dim = L.shape[0]
        N = int(round(math.sqrt(dim)))
        if N * N != dim:
            raise DomainError(f"Liouvillian dimension {dim} is not a square")

        nonzero = np.abs(L.data[L.data != 0])
        weight = float(nonzero.mean()) if nonzero.size else 1.0
        trace_row = sp.csr_matrix(
            (np.full(N, weight, dtype=complex), (np.zeros(N, dtype=int), np.arange(N) * (N + 1))),
            shape=(1, dim),
        )
        A = sp.vstack([trace_row, L[1:]], format="csc")
        b = np.zeros(dim, dtype=complex)
        b[0] = weight

        diagnostics: Dict[str, float] = {"dimension": N}
        if dim <= _DENSE_RANK_LIMIT:
            rank = int(np.linalg.matrix_rank(A.toarray()))
            diagnostics["rank"] = rank
            if rank < dim:
                raise SolverError(
                    f"Steady state is not unique: constrained system has rank {rank} < {dim}",
                    diagnostics,
                )

        try:
            x = spla.splu(A).solve(b)
        except RuntimeError as e:
            raise SolverError(f"Steady-state factorization failed: {e}", diagnostics)
        if not np.all(np.isfinite(x)):
            raise SolverError("Steady-state solution is not finite", diagnostics)

        raw = x.reshape((N, N), order="F")
        rho = 0.5 * (raw + raw.conj().T)
        vec = rho.reshape(-1, order="F")
        norm_L = float(abs(L).max()) if L.nnz else 1.0
        residual = float(np.linalg.norm(L @ vec, ord=np.inf)) / max(norm_L, 1e-300)
        diagnostics.update(
            {
                "residual": residual,
                "trace_error": float(abs(np.trace(rho) - 1.0)),
                "hermiticity": float(np.max(np.abs(raw - raw.conj().T))),
                "min_eigenvalue": float(np.linalg.eigvalsh(rho).min()),
                "weight": weight,
            }
        )
        if residual > tol:
            raise SolverError(f"Steady-state residual {residual:.3e} exceeds tolerance {tol:.1e}", diagnostics)
        return SteadyState(rho=rho, diagnostics=diagnostics)

    @staticmethod
    def time_evolve(
        H: Hamiltonian,
        D: DissipatorSpec,
        rho0: np.ndarray,
        t: Union[float, Sequence[float]],
    ) -> Union[np.ndarray, List[np.ndarray]]:
        """
        Integrate the master equation from rho0 with qutip's mesolve.

        Args:
            H (Hamiltonian): model Hamiltonian
            D (DissipatorSpec): collapse operators and rates
            rho0 (np.ndarray): initial density matrix
            t: final time, or an increasing sequence of times starting at or after 0

        Returns:
            rho(t), or a list of rho at each requested time

        Raises:
            IntegratorError: negative time or integration failure
        """
        import qutip

        times = np.atleast_1d(np.asarray(t, dtype=float))
        single = np.ndim(t) == 0
        if np.any(times < 0):
            raise IntegratorError(f"Times must be non-negative, got {times.min()}")
        if single and times[0] == 0:
            return np.array(rho0, dtype=complex, copy=True)

        tlist = times if times[0] == 0 else np.concatenate([[0.0], times])
        c_ops = [qutip.Qobj(math.sqrt(op.rate) * op.matrix) for op in D.operators if op.rate > 0]
        options = {"method": "bdf", "atol": 1e-10, "rtol": 1e-8, "nsteps": 1_000_000, "store_states": True}
        started = time.time()
        try:
            result = qutip.mesolve(qutip.Qobj(H.matrix), qutip.Qobj(np.asarray(rho0, dtype=complex)), tlist,
                                   c_ops=c_ops, options=options)
        except Exception as e:
            logger.error(f"❌ Master-equation integration failed: {str(e)}")
            raise IntegratorError(f"Master-equation integration failed: {e}")
        logger.debug(f"Integrated {len(tlist)} time points in {time.time() - started:.2f} s")

        states = [np.asarray(s.full()) for s in result.states]
        if times[0] != 0:
            states = states[1:]
        return states[-1] if single else states


class LiouvillianTemplate:
    """
    Static part of the Liouvillian for fixed fields and rates.

    Detunings only touch the Hamiltonian diagonal, which enters the
    superoperator as a diagonal update, so velocity classes and detuning
    grid points reuse the same template.
    """

    def __init__(
        self,
        ladder: Union[LadderSpec, HyperfineBasis],
        probe: FieldConfig,
        coupling: FieldConfig,
        rf: FieldConfig,
        rates: DecayRates,
        dummy_rate_factor: Optional[float] = None,
    ):
        self.basis = _basis_of(ladder)
        self.probe, self.coupling, self.rf = probe, coupling, rf
        self.static_hamiltonian = MasterService.build_hamiltonian(
            self.basis, probe.with_detuning(0.0), coupling.with_detuning(0.0), rf.with_detuning(0.0)
        )
        self.dissipator = MasterService.build_collapse_operators(self.basis, rates, dummy_rate_factor)
        self.static = MasterService.liouvillian(self.static_hamiltonian, self.dissipator)

        N = self.basis.size
        self._masks = {}
        for label in LEVEL_ORDER:
            indicator = np.zeros(N)
            indicator[self.basis.level_slice(label)] = 1.0
            self._masks[label] = indicator

    def _diagonal(self, probe: float, coupling: float, rf: float) -> np.ndarray:
        d = (
            -probe * self._masks["i"]
            - (probe + coupling) * self._masks["r1"]
            - (probe + coupling + rf) * self._masks["r2"]
        )
        N = d.shape[0]
        # index b*N + a carries -i (d[a] - d[b])
        return -1j * (np.tile(d, N) - np.repeat(d, N))

    def at(self, probe_detuning: float, coupling_detuning: float, rf_detuning: Optional[float] = None) -> sp.csr_matrix:
        rf = self.rf.detuning if rf_detuning is None else rf_detuning
        return (self.static + sp.diags(self._diagonal(probe_detuning, coupling_detuning, rf))).tocsr()

    def hamiltonian(self, probe_detuning: float, coupling_detuning: float, rf_detuning: Optional[float] = None) -> Hamiltonian:
        rf = self.rf.detuning if rf_detuning is None else rf_detuning
        H = self.static_hamiltonian.matrix.copy()
        H[np.diag_indices(self.basis.size)] = detuning_diagonal(self.basis, probe_detuning, coupling_detuning, rf)
        return Hamiltonian(matrix=H, basis=self.basis)

    def steady_state(
        self, probe_detuning: float, coupling_detuning: float, rf_detuning: Optional[float] = None
    ) -> SteadyState:
        return MasterService.steady_state(self.at(probe_detuning, coupling_detuning, rf_detuning))


class ProbeResponse:
    """
    Steady state to first order in the probe field.

    At zeroth order only the ground manifold and the dummy state are
    populated. The coherences rho[e, g] between excited states e (i, r1, r2)
    and ground states g then obey a closed linear system sourced by the
    ground populations, which splits into independent components. Detunings
    only move its diagonal, so a velocity class v adds v * D with D diagonal
    and every observable linear in those coherences is a sum of simple poles
    in v.
    """

    def __init__(self, template: LiouvillianTemplate):
        basis = template.basis
        N = basis.size
        self.basis = basis
        g = basis.level_slice("g")
        ground = list(range(g.start, g.stop))
        excited, labels = [], []
        for label in ("i", "r1", "r2"):
            block = basis.level_slice(label)
            excited.extend(range(block.start, block.stop))
            labels.extend([label] * (block.stop - block.start))

        self._index = np.array([b * N + a for b in ground for a in excited], dtype=int)
        per_entry = np.array(labels * len(ground))
        self._excited = np.ones(self._index.size)
        self._rydberg = np.isin(per_entry, ("r1", "r2")).astype(float)
        self._upper = (per_entry == "r2").astype(float)

        static = template.static
        self.rho0 = self._probe_off_state(static)
        self._source = np.asarray(static[self._index] @ self.rho0.reshape(-1, order="F")).ravel()
        self._block = static[self._index][:, self._index].tocsr()
        self._rf_detuning = template.rf.detuning

        count, membership = connected_components(abs(self._block), directed=False)
        self._components = [
            members
            for members in (np.flatnonzero(membership == c) for c in range(count))
            if np.any(self._source[members] != 0)
        ]
        logger.debug(
            f"First-order block: {self._index.size} coherences, {len(self._components)} sourced components"
        )

    def _probe_off_state(self, static: sp.csr_matrix) -> np.ndarray:
        basis = self.basis
        N = basis.size
        if basis.dummy_index is None:
            return initial_ground_state(basis)
        g = basis.level_slice("g")
        closed = list(range(g.start, g.stop)) + [basis.dummy_index]
        index = [b * N + a for b in closed for a in closed]
        steady = MasterService.steady_state(static[index][:, index])
        rho = np.zeros((N, N), dtype=complex)
        rho[np.ix_(closed, closed)] = steady.rho
        return rho

    def weights(self, observable: np.ndarray) -> np.ndarray:
        """
        Weights u over the first-order coherences such that
        sum Im(rho[a, b] * observable[a, b]) = Im(u . x).
        """
        O = np.asarray(observable, dtype=complex)
        N = self.basis.size
        rows, cols = self._index % N, self._index // N
        return O[rows, cols] - np.conj(O[cols, rows])

    def _matrix(self, members: np.ndarray, probe_detuning: float, coupling_detuning: float) -> np.ndarray:
        shift = 1j * (
            probe_detuning * self._excited[members]
            + coupling_detuning * self._rydberg[members]
            + self._rf_detuning * self._upper[members]
        )
        return self._block[members][:, members].toarray() + np.diag(shift)

    def coherences(self, probe_detuning: float, coupling_detuning: float) -> np.ndarray:
        """
        First-order coherences x with rho[e, g] = x at one velocity class.

        Raises:
            SolverError: singular first-order system
        """
        x = np.zeros(self._index.size, dtype=complex)
        for members in self._components:
            try:
                x[members] = np.linalg.solve(
                    self._matrix(members, probe_detuning, coupling_detuning), -self._source[members]
                )
            except np.linalg.LinAlgError as e:
                raise SolverError(f"First-order probe response is singular: {e}", {"component_size": members.size})
        return x

    def value(self, weights: np.ndarray, probe_detuning: float, coupling_detuning: float) -> float:
        return float(np.imag(np.dot(weights, self.coherences(probe_detuning, coupling_detuning))))

    def density_matrix(self, probe_detuning: float, coupling_detuning: float) -> np.ndarray:
        """Zeroth plus first-order density matrix."""
        N = self.basis.size
        rho = self.rho0.copy()
        x = self.coherences(probe_detuning, coupling_detuning)
        rows, cols = self._index % N, self._index // N
        rho[rows, cols] += x
        rho[cols, rows] += np.conj(x)
        return rho

    def pole_expansion(
        self,
        weights: np.ndarray,
        probe_detuning: float,
        coupling_detuning: float,
        probe_wavenumber: float,
        coupling_wavenumber: float,
    ) -> PoleExpansion:
        """
        Observable Im(u . x) as a function of velocity for counter-propagating
        beams: the probe sees dp - k_p v and the coupling laser dc + k_c v.

        Raises:
            DomainError: k_p = 0 or k_p = k_c, so velocity does not move every coherence
            SolverError: the eigenbasis of a component is too ill-conditioned to use
        """
        D = 1j * (-probe_wavenumber * self._excited + coupling_wavenumber * self._rydberg)
        if np.any(np.abs(D) == 0):
            raise DomainError("Velocity averaging needs k_p != 0 and k_p != k_c")

        residues, poles = [], []
        for members in self._components:
            A = self._matrix(members, probe_detuning, coupling_detuning)
            d = D[members]
            lam, R = np.linalg.eig(A / d[:, None])
            try:
                y = np.linalg.solve(R, -self._source[members] / d)
            except np.linalg.LinAlgError as e:
                raise SolverError(f"Defective first-order eigenbasis: {e}", {"component_size": members.size})
            r = (weights[members] @ R) * y
            # Cross-check the expansion at v = 0 against a direct solve
            direct = np.dot(weights[members], np.linalg.solve(A, -self._source[members]))
            expanded = np.sum(r / lam)
            if abs(expanded - direct) > _POLE_CHECK_TOL * max(abs(direct), np.sum(np.abs(r / lam)), 1e-300):
                raise SolverError(
                    "Ill-conditioned first-order eigenbasis",
                    {"component_size": members.size, "direct": abs(direct), "expanded": abs(expanded)},
                )
            residues.append(r)
            poles.append(lam)

        if not residues:
            return PoleExpansion(residues=np.zeros(0, dtype=complex), poles=np.zeros(0, dtype=complex))
        r, lam = np.concatenate(residues), np.concatenate(poles)
        keep = np.abs(r) > _NEGLIGIBLE_RESIDUE * max(float(np.max(np.abs(r))), 1e-300)
        if np.any(np.abs(lam[keep].imag) == 0):
            raise SolverError("Undamped first-order mode", {"poles": int(np.sum(keep))})
        return PoleExpansion(residues=r[keep], poles=lam[keep])


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of a - b."""
    difference = np.asarray(a) - np.asarray(b)
    difference = 0.5 * (difference + difference.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(difference))))


def initial_ground_state(basis: HyperfineBasis) -> np.ndarray:
    """Equal populations across the ground manifold."""
    rho = np.zeros((basis.size, basis.size), dtype=complex)
    g = basis.level_slice("g")
    count = g.stop - g.start
    rho[g, g] = np.eye(count) / count
    return rho


def populations(rho: np.ndarray, basis: HyperfineBasis) -> Dict[str, float]:
    diagonal = np.real(np.diag(rho))
    result = {label: float(diagonal[basis.level_slice(label)].sum()) for label in LEVEL_ORDER}
    if basis.dummy_index is not None:
        result["dummy"] = float(diagonal[basis.dummy_index])
    return result
