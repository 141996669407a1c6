"""
Robust LMI Builder
Deterministic counterparts of the uncertain eavesdropper constraints, the supporting
vec/Kronecker algebra, the Hermitian-to-real cone lowering and the conic backend
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import cvxpy as cp
import numpy as np
from rich.console import Console

from .config import *
from .errors import LmiError, SolverError

console = Console()

Affine = Union[np.ndarray, cp.Expression]

STATUS_MAP = {
    cp.OPTIMAL: "optimal",
    cp.OPTIMAL_INACCURATE: "optimal",
    cp.INFEASIBLE: "infeasible",
    cp.INFEASIBLE_INACCURATE: "infeasible",
    cp.UNBOUNDED: "unbounded",
    cp.UNBOUNDED_INACCURATE: "unbounded",
}


@dataclass
class AuxiliaryVars:
    """Auxiliary and multiplier values of the robust reformulation (noise-normalised units)"""
    psi_S: np.ndarray
    psi_J: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    t_k: np.ndarray
    phi: float = 0.0
    psi_JD: float = 0.0
    t_JD: float = 1.0
    t_RD: float = 1.0
    iota_A: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iota_R: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def initial(cls, n_eves: int) -> "AuxiliaryVars":
        zeros = np.zeros(n_eves)
        return cls(psi_S=zeros.copy(), psi_J=zeros.copy(), rho1=zeros.copy(),
                   rho2=zeros.copy(), eta1=zeros.copy(), eta2=zeros.copy(),
                   t_k=np.ones(n_eves))

    def copy(self) -> "AuxiliaryVars":
        return AuxiliaryVars(**{k: (v.copy() if isinstance(v, np.ndarray) else v)
                                for k, v in self.__dict__.items()})

    def validate(self, tol: float = 1e-6):
        for name in ("rho1", "rho2", "eta1", "eta2", "psi_J", "iota_A", "iota_R"):
            if np.any(np.asarray(getattr(self, name)) < -tol):
                raise LmiError(f"auxiliary {name} is negative: {getattr(self, name)}")
        if self.phi < -tol or self.psi_JD < -tol:
            raise LmiError("epigraph variables must be non-negative")
        if min(self.t_JD, self.t_RD) <= 0 or np.any(self.t_k <= 0):
            raise LmiError("linearisation auxiliaries must be positive")


@dataclass
class LmiBlock:
    """Labelled matrix expression constrained to the PSD cone

    The expression is affine in the cvxpy variables it references; numeric blocks
    are plain constant expressions.
    """
    label: str
    expr: cp.Expression
    cone: str = "PSD"
    real: bool = False

    @property
    def size(self) -> int:
        return self.expr.shape[0]

    def variables(self) -> List[cp.Variable]:
        return self.expr.variables()

    def value(self) -> np.ndarray:
        """Numeric matrix at the variables' current values"""
        value = self.expr.value
        if value is None:
            raise LmiError(f"block '{self.label}' has unassigned variables")
        return np.asarray(value)

    def min_eigenvalue(self) -> float:
        value = self.value()
        return float(np.linalg.eigvalsh(0.5 * (value + value.conj().T)).min())

    def hermitian_residual(self, draws: int = 3, seed: int = 0) -> float:
        """Largest |H - H^H| entry over random assignments of the block's variables"""
        variables = self.variables()
        if not variables:
            value = np.asarray(self.expr.value)
            return float(np.abs(value - value.conj().T).max())
        saved = [v.value for v in variables]
        rng = np.random.default_rng(seed)
        worst = 0.0
        try:
            for _ in range(draws):
                for v in variables:
                    v.value = _random_assignment(v, rng)
                value = np.asarray(self.expr.value)
                scale = max(1.0, float(np.abs(value).max()))
                worst = max(worst, float(np.abs(value - value.conj().T).max()) / scale)
        finally:
            for v, old in zip(variables, saved):
                v.value = old
        return worst

    def affine_coefficients(self) -> Dict[int, np.ndarray]:
        """Map coordinate index -> coefficient matrix; index 0 is the constant term

        Coordinates enumerate the real degrees of freedom of every variable in the block
        (see coordinate_map).
        """
        variables = self.variables()
        saved = [v.value for v in variables]
        try:
            for v in variables:
                v.value = np.zeros(v.shape, dtype=complex if v.is_complex() else float)
            constant = np.asarray(self.expr.value, dtype=complex if not self.real else float)
            coefficients = {0: constant}
            index = 1
            for v in variables:
                for basis in _coordinate_basis(v):
                    v.value = basis
                    coefficients[index] = np.asarray(self.expr.value) - constant
                    index += 1
                v.value = np.zeros(v.shape, dtype=complex if v.is_complex() else float)
        finally:
            for v, old in zip(variables, saved):
                v.value = old
        return coefficients

    def constraint(self) -> cp.Constraint:
        block = self if self.real else realify(self)
        sym = 0.5 * (block.expr + block.expr.T)
        return sym >> 0


def _coordinate_basis(var: cp.Variable):
    """Real basis of the variable's value space (Hermitian structure respected)"""
    dtype = complex if var.is_complex() else float
    if len(var.shape) == 2 and (var.attributes.get("hermitian") or var.attributes.get("symmetric")):
        n = var.shape[0]
        for i in range(n):
            for j in range(i, n):
                e = np.zeros(var.shape, dtype=dtype)
                e[i, j] = e[j, i] = 1.0
                yield e
                if i != j and var.is_complex():
                    e = np.zeros(var.shape, dtype=dtype)
                    e[i, j], e[j, i] = 1j, -1j
                    yield e
        return
    for idx in np.ndindex(*var.shape) if var.shape else [()]:
        e = np.zeros(var.shape, dtype=dtype)
        e[idx] = 1.0
        yield e
        if var.is_complex():
            e = np.zeros(var.shape, dtype=dtype)
            e[idx] = 1j
            yield e


def _random_assignment(var: cp.Variable, rng: np.random.Generator) -> np.ndarray:
    value = np.zeros(var.shape, dtype=complex if var.is_complex() else float)
    for basis in _coordinate_basis(var):
        value = value + rng.standard_normal() * basis
    return value


def coordinate_map(blocks: Sequence[LmiBlock]) -> List[str]:
    """Human-readable names of the real coordinates used by affine_coefficients"""
    names = []
    for block in blocks:
        for v in block.variables():
            for k, basis in enumerate(_coordinate_basis(v)):
                idx = np.argwhere(basis != 0)[0] if basis.ndim else []
                part = "im" if np.iscomplexobj(basis) and np.any(basis.imag != 0) else "re"
                names.append(f"{v.name()}{list(map(int, idx))}.{part}")
    return names


# Elementary algebra


def as_expr(x) -> cp.Expression:
    return x if isinstance(x, cp.Expression) else cp.Constant(np.asarray(x))


def is_variable(x) -> bool:
    return isinstance(x, cp.Expression) and not x.is_constant()


def herm_inner(theta, h: np.ndarray):
    """theta^H h for a numeric or cvxpy phase vector"""
    if isinstance(theta, cp.Expression):
        return cp.conj(theta) @ h
    return np.vdot(theta, h)


def _mat(x, shape) -> cp.Expression:
    if isinstance(x, cp.Expression):
        return cp.reshape(x, shape, order="C")
    return cp.Constant(np.reshape(np.asarray(x), shape))


def _row(theta) -> cp.Expression:
    """theta^H as a 1 x N row"""
    n = theta.shape[0]
    if isinstance(theta, cp.Expression):
        return cp.reshape(cp.conj(theta), (1, n), order="C")
    return cp.Constant(np.asarray(theta).conj().reshape(1, n))


def _col(theta) -> cp.Expression:
    return _mat(theta, (theta.shape[0], 1))


def augmented_phase(theta_R) -> Affine:
    """[1; theta_R]"""
    if isinstance(theta_R, cp.Expression):
        return cp.hstack([np.ones(1), theta_R])
    return np.concatenate([[1.0 + 0j], np.asarray(theta_R)])


def stacked_channel(h_J: np.ndarray, H_JR: np.ndarray) -> np.ndarray:
    """vec([h_J, H_JR^H]) in column-major order; the first M entries are h_J"""
    return np.concatenate([np.asarray(h_J), np.asarray(H_JR).conj().reshape(-1)])


def vec_kron_identity_check(A: np.ndarray, B: np.ndarray, C: np.ndarray, D: np.ndarray) -> float:
    """|Tr(A^H B C D) - vec(A)^H (D^T kron B) vec(C)|"""
    A, B, C, D = (np.atleast_2d(np.asarray(x, dtype=complex)) for x in (A, B, C, D))
    try:
        product = A.conj().T @ B @ C @ D
    except ValueError as e:
        raise LmiError(f"non-conformable operands: {e}") from e
    if product.shape[0] != product.shape[1]:
        raise LmiError(f"A^H B C D must be square, got {product.shape}")
    lhs = np.trace(product)
    rhs = A.reshape(-1, order="F").conj() @ np.kron(D.T, B) @ C.reshape(-1, order="F")
    return float(abs(lhs - rhs))


@dataclass
class SelectorMatrices:
    """Selectors and stacked quantities of the jamming S-procedure for one eavesdropper"""
    upsilon_J: np.ndarray
    upsilon_JR: np.ndarray
    h_tilde_hat: np.ndarray
    theta_tilde: Affine

    @classmethod
    def build(cls, h_J_hat: np.ndarray, H_JR_hat: np.ndarray, theta_R) -> "SelectorMatrices":
        m = h_J_hat.shape[0]
        n_r = H_JR_hat.shape[0]
        if H_JR_hat.shape != (n_r, m):
            raise LmiError(f"H_JR has shape {H_JR_hat.shape}, expected ({n_r}, {m})")
        mask = np.zeros(m * (1 + n_r))
        mask[:m] = 1.0
        return cls(upsilon_J=np.diag(mask), upsilon_JR=np.diag(1.0 - mask),
                   h_tilde_hat=stacked_channel(h_J_hat, H_JR_hat),
                   theta_tilde=augmented_phase(theta_R))


def omega_matrix(theta_R, Z) -> Affine:
    """(theta~ theta~^H)^T kron Z; affine in Z when theta_R is fixed"""
    if is_variable(theta_R):
        raise LmiError("omega_matrix is quadratic in theta_R; use xi_matrix instead")
    tt = augmented_phase(np.asarray(theta_R))
    outer = np.outer(tt, tt.conj()).T
    if isinstance(Z, cp.Expression):
        return cp.kron(outer, Z)
    return np.kron(outer, np.asarray(Z))


def psi_r_linearization(theta_R, theta_R0: np.ndarray) -> Affine:
    """theta~0 theta~^H + theta~ theta~0^H - theta~0 theta~0^H"""
    tt0 = augmented_phase(theta_R0)
    outer0 = np.outer(tt0, tt0.conj())
    if isinstance(theta_R, cp.Expression):
        tt = cp.reshape(augmented_phase(theta_R), (tt0.size, 1), order="C")
        cross = cp.Constant(tt0.reshape(-1, 1)) @ cp.conj(tt).T
        return cross + cp.conj(cross).T - outer0
    tt = augmented_phase(np.asarray(theta_R))
    return np.outer(tt0, tt.conj()) + np.outer(tt, tt0.conj()) - outer0


def xi_matrix(theta_R, theta_R0: np.ndarray, Z: np.ndarray) -> Affine:
    """Psi_R^T kron Z, a lower bound on omega_matrix that touches it at theta_R0"""
    Z = np.asarray(Z)
    if not isinstance(theta_R, cp.Expression):
        return np.kron(psi_r_linearization(theta_R, theta_R0).T, Z)
    m = Z.shape[0]
    tt0 = augmented_phase(theta_R0)
    tt = augmented_phase(theta_R)
    eye = np.eye(m)
    left = cp.Constant(np.kron(tt0.conj().reshape(-1, 1), eye) @ Z)
    right = cp.hstack([tt[n] * eye for n in range(tt0.size)])
    term = left @ right
    return term + cp.conj(term).T - omega_matrix(theta_R0, Z)


def _check_eps(*values):
    for v in values:
        if np.any(np.asarray(v) < 0):
            raise LmiError(f"uncertainty bound must be non-negative, got {v}")


def schur_signal_bound(theta_A, theta_R, psi_S, h_SA: np.ndarray, h_SR: np.ndarray,
                       label: str = "signal") -> LmiBlock:
    """[[psi, a], [a*, 1]] >= 0  <=>  psi >= |theta_A^H h_SA + theta_R^H h_SR|^2"""
    if theta_A.shape[0] != h_SA.shape[0] or theta_R.shape[0] != h_SR.shape[0]:
        raise LmiError(f"{label}: phase/channel dimension mismatch")
    a = herm_inner(theta_A, h_SA) + herm_inner(theta_R, h_SR)
    a11 = _mat(a, (1, 1))
    expr = cp.bmat([[_mat(psi_S, (1, 1)), a11],
                    [cp.conj(a11), cp.Constant(np.ones((1, 1)))]])
    return LmiBlock(label, expr)


def sign_definiteness_lmi(theta_A, theta_R, psi_S, rho1, rho2, h_SA_hat: np.ndarray,
                          h_SR_hat: np.ndarray, eps_SA: float, eps_SR: float,
                          label: str = "sign-definiteness") -> LmiBlock:
    """Certifies psi_S >= |theta_A^H (h_SA + d_A) + theta_R^H (h_SR + d_R)|^2
    for every ||d_A||^2 <= eps_SA and ||d_R||^2 <= eps_SR
    """
    _check_eps(eps_SA, eps_SR)
    n_a, n_r = h_SA_hat.shape[0], h_SR_hat.shape[0]
    if theta_A.shape[0] != n_a or theta_R.shape[0] != n_r:
        raise LmiError(f"{label}: phase/channel dimension mismatch")
    a = _mat(herm_inner(theta_A, h_SA_hat) + herm_inner(theta_R, h_SR_hat), (1, 1))
    s_a, s_r = np.sqrt(eps_SA), np.sqrt(eps_SR)
    z = lambda r, c: cp.Constant(np.zeros((r, c)))
    top = _mat(psi_S, (1, 1)) - _mat(rho1, (1, 1)) - _mat(rho2, (1, 1))
    expr = cp.bmat([
        [top, a, z(1, n_a), z(1, n_r)],
        [cp.conj(a), cp.Constant(np.ones((1, 1))), s_a * _row(theta_A), s_r * _row(theta_R)],
        [z(n_a, 1), s_a * _col(theta_A), _scaled_eye(rho1, n_a), z(n_a, n_r)],
        [z(n_r, 1), s_r * _col(theta_R), z(n_r, n_a), _scaled_eye(rho2, n_r)],
    ])
    return LmiBlock(label, expr)


def _scaled_eye(scalar, n: int) -> cp.Expression:
    if isinstance(scalar, cp.Expression):
        if scalar.shape:
            scalar = scalar[0]
        return scalar * np.eye(n)
    return cp.Constant(float(scalar) * np.eye(n))


def sproc_jamming_lmi(omega: Affine, eta1, eta2, psi_J, h_J_hat: np.ndarray,
                      H_JR_hat: np.ndarray, eps_J: float, eps_JR: float,
                      label: str = "s-procedure", scale: float = 1.0) -> LmiBlock:
    """Certifies vec(H~)^H omega vec(H~) >= psi_J over both error balls

    omega is either the exact Kronecker operator (numeric, or affine in Z) or its
    linearisation in theta_R. The block is divided by scale, which leaves the cone unchanged.
    Error coordinates with a zero radius are dropped, so with both radii zero the block
    is the exact nominal inequality.
    """
    _check_eps(eps_J, eps_JR)
    sel = SelectorMatrices.build(np.asarray(h_J_hat), np.asarray(H_JR_hat), np.zeros(H_JR_hat.shape[0]))
    h = sel.h_tilde_hat
    n = h.size
    if omega.shape != (n, n):
        raise LmiError(f"{label}: omega has shape {omega.shape}, expected {(n, n)}")
    if not isinstance(omega, cp.Expression):
        omega = np.asarray(omega)
        herm = 0.5 * (omega + omega.conj().T)
        magnitude = max(1.0, float(np.abs(herm).max()))
        if np.linalg.eigvalsh(herm).min() < -1e-9 * magnitude:
            raise LmiError(f"{label}: numeric omega is not positive semidefinite")
    omega_e = as_expr(omega)
    corner = (cp.real(cp.sum(cp.multiply(h.conj(), omega_e @ h))) - as_expr(psi_J)
              - as_expr(eta1) * eps_J - as_expr(eta2) * eps_JR)
    keep = ((np.diag(sel.upsilon_J) > 0) & (eps_J > 0)) | ((np.diag(sel.upsilon_JR) > 0) & (eps_JR > 0))
    if not keep.any():
        expr = _mat(corner, (1, 1))
        return LmiBlock(label, expr / scale if scale != 1.0 else expr)
    P = np.eye(n)[:, keep]
    d = P.shape[1]
    top = (cp.Constant(P.T) @ omega_e @ cp.Constant(P) + _mul(eta1, P.T @ sel.upsilon_J @ P)
           + _mul(eta2, P.T @ sel.upsilon_JR @ P))
    off = cp.reshape(cp.Constant(P.T) @ (omega_e @ h), (d, 1), order="C")
    expr = cp.bmat([[top, off], [cp.conj(off).T, _mat(corner, (1, 1))]])
    return LmiBlock(label, expr / scale if scale != 1.0 else expr)


def _mul(scalar, matrix: np.ndarray) -> cp.Expression:
    if isinstance(scalar, cp.Expression):
        return scalar * matrix
    return cp.Constant(float(scalar) * matrix)


def realify(H):
    """[[Re H, -Im H], [Im H, Re H]] for numeric arrays, expressions or LmiBlocks

    Raises LmiError when the input is not Hermitian (residual above tolerance).
    """
    if isinstance(H, LmiBlock):
        if H.real:
            return H
        residual = H.hermitian_residual()
        if residual > HERMITIAN_TOLERANCE:
            raise LmiError(f"block '{H.label}' is not Hermitian (residual {residual:.2e})")
        return LmiBlock(H.label, realify(H.expr), H.cone, real=True)
    if isinstance(H, cp.Expression):
        re, im = cp.real(H), cp.imag(H)
        return cp.bmat([[re, -im], [im, re]])
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise LmiError(f"realify needs a square matrix, got shape {H.shape}")
    scale = max(1.0, float(np.abs(H).max()))
    if float(np.abs(H - H.conj().T).max()) > HERMITIAN_TOLERANCE * scale:
        raise LmiError("matrix is not Hermitian")
    H = 0.5 * (H + H.conj().T)
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


# Conic backend


@dataclass
class ConicResult:
    status: str
    value: Optional[float]
    solver: str
    violated_block: Optional[str] = None
    min_eigenvalues: Dict[str, float] = field(default_factory=dict)
    inaccurate: bool = False

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def raise_for_status(self, context: str = ""):
        if not self.ok:
            raise SolverError(self.status, context, self.violated_block)


def _solver_options(name: str) -> dict:
    if name == "CLARABEL":
        return {"max_iter": SOLVER_MAX_ITERS, "tol_gap_abs": SOLVER_TOLERANCE,
                "tol_gap_rel": SOLVER_TOLERANCE, "tol_feas": SOLVER_TOLERANCE}
    if name == "SCS":
        return {"max_iters": 100 * SOLVER_MAX_ITERS, "eps_abs": 1e-7, "eps_rel": 1e-7}
    return {}


def _run(problem: cp.Problem, solvers: Iterable[str]):
    """Try each backend in turn; returns (status, solver, inaccurate)"""
    last = ("numerical_failure", "none", False)
    for name in solvers:
        if name not in cp.installed_solvers():
            continue
        try:
            problem.solve(solver=name, **_solver_options(name))
        except (cp.error.SolverError, ArithmeticError, ValueError) as e:
            if VERBOSE:
                console.print(f"[dim]{name} failed: {e}[/dim]")
            last = ("numerical_failure", name, False)
            continue
        status = STATUS_MAP.get(problem.status, "numerical_failure")
        inaccurate = problem.status in (cp.OPTIMAL_INACCURATE, cp.INFEASIBLE_INACCURATE,
                                        cp.UNBOUNDED_INACCURATE)
        if status == "optimal" and not inaccurate:
            return status, name, False
        last = (status, name, inaccurate)
    return last


def solve_conic(objective: cp.Expression, blocks: Sequence[LmiBlock],
                constraints: Sequence[cp.Constraint] = (), maximize: bool = True,
                solver: Optional[str] = None, dump_path: Optional[Union[str, Path]] = None,
                locate_violation: bool = True) -> ConicResult:
    """Solve max/min objective subject to PSD blocks (lowered to real cones) and extra constraints

    Variable values are left assigned on the cvxpy variables. A non-optimal status is
    returned in the result, never swallowed; on infeasibility the first block whose
    removal restores feasibility is reported.
    """
    real_blocks = [realify(b) for b in blocks]
    if dump_path is not None:
        dump_conic(dump_path, real_blocks)
    sense = cp.Maximize if maximize else cp.Minimize
    problem = cp.Problem(sense(objective), [b.constraint() for b in real_blocks] + list(constraints))
    solvers = [solver] if solver else [SOLVER, FALLBACK_SOLVER]
    status, name, inaccurate = _run(problem, solvers)

    result = ConicResult(status=status, value=problem.value if status == "optimal" else None,
                         solver=name, inaccurate=inaccurate)
    if status == "optimal":
        for block in blocks:
            try:
                result.min_eigenvalues[block.label] = block.min_eigenvalue()
            except LmiError:
                continue
        worst = min(result.min_eigenvalues.items(), key=lambda kv: kv[1], default=None)
        if worst is not None and worst[1] < -1e-6:
            result.violated_block = worst[0]
        if inaccurate:
            console.print(f"[yellow]Warning: {name} returned an inaccurate optimum[/yellow]")
    elif status == "infeasible" and locate_violation and len(blocks) > 1:
        result.violated_block = _locate_violation(objective, real_blocks, constraints, maximize, solvers)
    return result


def _locate_violation(objective, real_blocks, constraints, maximize, solvers) -> Optional[str]:
    sense = cp.Maximize if maximize else cp.Minimize
    for i, block in enumerate(real_blocks):
        rest = [b.constraint() for j, b in enumerate(real_blocks) if j != i]
        problem = cp.Problem(sense(objective), rest + list(constraints))
        status, _, _ = _run(problem, solvers)
        if status in ("optimal", "unbounded"):
            return block.label
    return None


def dump_conic(path: Union[str, Path], blocks: Sequence[LmiBlock]):
    """Write the realified LMI blocks as sparse text

    Each data row is 'block i j var value': var 0 is the constant term and var k >= 1 the
    k-th real coordinate listed in the '# var' header lines.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    real_blocks = [realify(b) for b in blocks]
    lines = ["# realified LMI blocks: block i j var value (0-based block, i, j)"]
    for b_idx, block in enumerate(real_blocks):
        lines.append(f"# block {b_idx} {block.label} size {block.size}")
        variables = block.variables()
        names = coordinate_map([block]) if variables else []
        for k, name in enumerate(names, start=1):
            lines.append(f"# var {b_idx} {k} {name}")
        for var_idx, coeff in block.affine_coefficients().items():
            coeff = np.real_if_close(coeff)
            for i, j in zip(*np.nonzero(np.abs(coeff) > 1e-15)):
                lines.append(f"{b_idx} {i} {j} {var_idx} {float(np.real(coeff[i, j])):.17g}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    console.print(f"💾 Conic problem dumped to [cyan]{path}[/cyan]")
