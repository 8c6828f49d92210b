"""Reference eigenvalue problems and the h-refinement study harness.

Three problems are wired in:

* ``qho`` -- harmonic potential on the square ]-10,10[^2 with homogeneous
  Dirichlet conditions (the Gaussian decay of the eigenfunctions makes
  the truncation error negligible against discretization error). The
  exact spectrum is 1, 2, 3, ... with multiplicity equal to the value;
  the study tracks the first five distinct values.
* ``laplace_square`` -- zero potential on the unit square (the "atom in
  a box" sanity case) with spectrum pi^2 (m^2 + n^2) / 2.
* ``dauge`` -- zero potential, Neumann conditions, and a checkerboard
  diffusivity on (-1,1)^2: K = I on the even quadrants and I/delta on the
  odd ones. Meshes are generated quadrant-aligned so no cell straddles
  the interface; the zero mode is deflated; the first eight nonzero
  eigenvalues are tracked against frozen fine-mesh reference values
  (analytic values for delta = 1).
"""

import csv
import logging
from dataclasses import dataclass

import numpy as np

from . import mesh as meshmod
from .eigsolve import (
    cluster_match,
    filter_zero_modes,
    solve_dense,
    solve_shift_invert,
)
from .forms import ProblemCoefficients
from .system import apply_dirichlet, assemble, deflate_constants

logger = logging.getLogger(__name__)


class StudyError(Exception):
    pass


PI2 = np.pi ** 2

DAUGE_DELTAS = (0.50, 0.10, 0.01, 1e-8)

# First eight nonzero eigenvalues of the checkerboard Neumann problem on
# (-1,1)^2, K = I on {xy<0} and I/delta on {xy>0}. delta = 1 is the
# analytic Neumann Laplace spectrum pi^2 (m^2+n^2)/4; the others are
# self-computed oracles frozen from locally-Voronoi meshes at h = 1/8,
# 1/16, 1/32 with k = 3, Richardson-extrapolated over the two finest
# levels with per-index observed rates (the delta = 1 run reproduces the
# analytic spectrum to 9 digits, validating the procedure).
DAUGE_REFERENCE = {
    1.0: [
        PI2 / 4, PI2 / 4, PI2 / 2, PI2, PI2, 5 * PI2 / 4, 5 * PI2 / 4,
        2 * PI2,
    ],
    0.5: [
        3.31754892, 3.36627720, 6.18638956, 13.92632333, 15.08299097,
        15.77886666, 18.64328289, 25.79753115,
    ],
    0.1: [
        4.53385188, 6.20487575, 7.03707420, 22.34193734, 22.67919234,
        26.08898848, 26.50900638, 40.48783529,
    ],
    0.01: [
        4.89319332, 7.20667543, 17.93179445, 24.46225025, 24.48745602,
        27.75724061, 30.03902484, 44.24890379,
    ],
    1e-8: [
        4.93480294, 7.22829531, 24.67395762, 24.67400559, 24.67400712,
        27.87002041, 44.41325340, 44.74564637,
    ],
}


@dataclass(frozen=True)
class Problem:
    """A concrete eigenvalue problem the study harness can run."""

    name: str
    box: tuple
    coefficients: ProblemCoefficients
    tracked_clusters: tuple  # ((value, multiplicity), ...) or ()
    track_count: int = 0  # when no exact clusters: track first n nonzero
    mesh_split: tuple = None  # quadrant split point for aligned meshes
    reference: tuple = ()  # frozen per-index reference values
    delta: float = None

    @property
    def n_tracked(self):
        return len(self.tracked_clusters) or self.track_count

    def nev_needed(self):
        if self.tracked_clusters:
            return int(sum(m for _, m in self.tracked_clusters)) + 3
        return self.track_count + 3


def _qho_potential(points):
    return 0.5 * (points[:, 0] ** 2 + points[:, 1] ** 2)


def _checkerboard(delta):
    inv = 1.0 / delta

    def diffusivity(points):
        out = np.zeros((len(points), 2, 2))
        odd = points[:, 0] * points[:, 1] > 0
        diag = np.where(odd, inv, 1.0)
        out[:, 0, 0] = diag
        out[:, 1, 1] = diag
        return out

    return diffusivity


def get_problem(name, delta=None):
    if name == "qho":
        return Problem(
            name="qho",
            box=(-10.0, -10.0, 10.0, 10.0),
            coefficients=ProblemCoefficients(
                potential=_qho_potential, bc="dirichlet", potential_degree=2
            ),
            tracked_clusters=tuple((float(n), n) for n in range(1, 6)),
        )
    if name == "laplace_square":
        return Problem(
            name="laplace_square",
            box=(0.0, 0.0, 1.0, 1.0),
            coefficients=ProblemCoefficients(potential=None, bc="dirichlet"),
            tracked_clusters=(
                (PI2, 1),
                (2.5 * PI2, 2),
                (4 * PI2, 1),
                (5 * PI2, 2),
                (6.5 * PI2, 2),
            ),
        )
    if name == "dauge":
        if delta is None:
            raise StudyError("dauge problem needs a delta value")
        delta = float(delta)
        ref = DAUGE_REFERENCE.get(delta, ())
        return Problem(
            name="dauge",
            box=(-1.0, -1.0, 1.0, 1.0),
            coefficients=ProblemCoefficients(
                potential=None,
                diffusivity=_checkerboard(delta),
                bc="neumann",
                potential_degree=0,
            ),
            tracked_clusters=(),
            track_count=8,
            mesh_split=(0.0, 0.0),
            reference=tuple(ref),
            delta=delta,
        )
    raise StudyError(f"unknown problem {name!r}")


# Levels whose mesh size best matches the nominal halving ladders of the
# experiments: h ~ 2.5 .. 0.31 for the big square, h ~ 1/2 .. 1/16 for
# the checkerboard domain.
DEFAULT_LEVELS = {
    ("qho", "hexagonal"): (1, 2, 3, 4),
    ("qho", "nonconvex_octagon"): (2, 3, 4, 5),
    ("qho", "randomized_quad"): (2, 3, 4, 5),
    ("qho", "voronoi"): (3, 4, 5, 6),
    ("laplace_square", "hexagonal"): (0, 1, 2, 3),
    ("laplace_square", "nonconvex_octagon"): (1, 2, 3, 4),
    ("laplace_square", "randomized_quad"): (1, 2, 3, 4),
    ("laplace_square", "voronoi"): (2, 3, 4, 5),
    ("dauge", "voronoi"): (2, 3, 4, 5),
}


def default_levels(problem, family):
    try:
        return DEFAULT_LEVELS[(problem, family)]
    except KeyError:
        raise StudyError(f"no default levels for ({problem}, {family})")


@dataclass(frozen=True)
class StudySpec:
    problem: str
    family: str
    k: int
    levels: tuple
    nev: int = 0  # 0: derive from the problem
    mass_variant: str = "plain"
    seed: int = 0
    delta: float = None
    cluster_tol: float = 0.1
    dense_cap: int = 3000
    solver_tol: float = 1e-10


@dataclass
class LevelResult:
    level: int
    h: float
    ndof: int
    computed: np.ndarray  # reported spectrum (zero mode already filtered)
    tracked: np.ndarray  # per-tracked-index representative values
    errors: np.ndarray  # relative errors per tracked index (nan: no ref)
    cluster_ok: bool
    residual_max: float


@dataclass
class ConvergenceReport:
    spec: StudySpec
    exact: np.ndarray  # per tracked index (nan when unknown)
    levels: list
    slopes: np.ndarray  # per tracked index, fitted over the last 3 levels
    expected_rate: float

    def level_errors(self, track):
        return np.array([lv.errors[track] for lv in self.levels])

    def level_h(self):
        return np.array([lv.h for lv in self.levels])


_mesh_cache = {}


def family_mesh(family, level, box, seed=0, split_at=None):
    """Cached mesh generation (studies reuse meshes across orders)."""
    key = (family, int(level), tuple(float(b) for b in box), int(seed),
           tuple(split_at) if split_at else None)
    if key not in _mesh_cache:
        _mesh_cache[key] = meshmod.generate_family(
            family, level, box, seed=seed, split_at=split_at
        )
    return _mesh_cache[key]


def check_quadrant_alignment(mesh, split, tol_rel=1e-9):
    """Reject meshes with cells straddling the interface lines."""
    xs, ys = split
    x0, y0, x1, y1 = mesh.domain_box
    tol = tol_rel * max(x1 - x0, y1 - y0)
    for ci in range(mesh.n_cells):
        verts = mesh.cell_vertices(ci)
        for axis, val in ((0, xs), (1, ys)):
            c = verts[:, axis] - val
            if (c > tol).any() and (c < -tol).any():
                raise StudyError(
                    f"cell {ci} straddles the interface line "
                    f"{'xy'[axis]} = {val}"
                )


def solve_eigenproblem(gsys, nev, dense_cap=3000, tol=1e-10, sigma=None):
    """Reduce, solve, and filter one assembled system.

    Returns (EigenSolution, deflation_active, reduced_size).
    """
    red = apply_dirichlet(gsys)
    defl = deflate_constants(gsys, red)
    if red.ndof == 0:
        raise StudyError("no interior dofs; nothing to solve")
    extra = 1 if defl.active else 0
    if red.ndof <= dense_cap:
        sol = solve_dense(red.A, red.B, min(nev + extra, red.ndof))
        if defl.active:
            sol = filter_zero_modes(sol)
    else:
        sol = solve_shift_invert(
            red.A, red.B, nev, deflation=defl, tol=tol, sigma=sigma
        )
    return sol, defl.active, red.ndof


def run_study(spec):
    """Run an h-refinement study and fit per-eigenvalue rates."""
    problem = get_problem(spec.problem, delta=spec.delta)
    if problem.name == "dauge" and spec.mass_variant != "stabilized":
        raise StudyError("the checkerboard study uses the stabilized mass form")
    nev = spec.nev or problem.nev_needed()
    ntrack = problem.n_tracked

    if problem.tracked_clusters:
        exact = np.array([v for v, _ in problem.tracked_clusters])
    elif problem.reference:
        exact = np.array(problem.reference, dtype=float)
    else:
        exact = np.full(ntrack, np.nan)

    results = []
    for level in spec.levels:
        mesh = family_mesh(
            spec.family,
            level,
            problem.box,
            seed=spec.seed,
            split_at=problem.mesh_split,
        )
        if problem.mesh_split is not None:
            check_quadrant_alignment(mesh, problem.mesh_split)
        h = meshmod.mesh_diameter(mesh)
        gsys = assemble(
            mesh, spec.k, problem.coefficients, mass_variant=spec.mass_variant
        )
        sol, _, ndof = solve_eigenproblem(
            gsys, nev, dense_cap=spec.dense_cap, tol=spec.solver_tol
        )
        computed = sol.values

        if problem.tracked_clusters:
            # only values inside the tracked range take part in matching;
            # anything below the top cluster's acceptance edge that fails
            # to match is a genuine spurious candidate
            vmax = exact[-1] * (1.0 + spec.cluster_tol)
            match = cluster_match(
                computed[computed <= vmax],
                problem.tracked_clusters,
                tol=spec.cluster_tol,
            )
            tracked = match.cluster_means()
            cluster_ok = match.ok
            if not match.ok:
                logger.warning(
                    "level %d: cluster mismatch (counts %s, expected %s, "
                    "%d spurious)",
                    level, match.counts, match.multiplicities,
                    len(match.spurious),
                )
        else:
            tracked = computed[:ntrack]
            cluster_ok = len(tracked) == ntrack
            if len(tracked) < ntrack:
                tracked = np.concatenate(
                    [tracked, np.full(ntrack - len(tracked), np.nan)]
                )
        with np.errstate(invalid="ignore", divide="ignore"):
            errors = np.abs(tracked - exact) / np.abs(exact)
        results.append(
            LevelResult(
                level=int(level),
                h=float(h),
                ndof=int(ndof),
                computed=computed,
                tracked=np.asarray(tracked, dtype=float),
                errors=errors,
                cluster_ok=cluster_ok,
                residual_max=float(sol.residuals.max()) if sol.nconv else np.nan,
            )
        )
        logger.info(
            "%s %s k=%d level=%d h=%.4g ndof=%d tracked=%s",
            spec.problem, spec.family, spec.k, level, h, ndof,
            np.array2string(np.asarray(tracked), precision=6),
        )

    hs = np.array([r.h for r in results])
    slopes = np.empty(ntrack)
    for t in range(ntrack):
        errs = np.array([r.errors[t] for r in results])
        tail = slice(-3, None) if len(hs) >= 3 else slice(None)
        slopes[t] = fit_rates(hs[tail], errs[tail])
    return ConvergenceReport(
        spec=spec,
        exact=exact,
        levels=results,
        slopes=slopes,
        expected_rate=2.0 * spec.k,
    )


def run_qho(spec):
    if spec.problem != "qho":
        raise StudyError("spec.problem must be 'qho'")
    return run_study(spec)


def run_laplace_square(spec):
    if spec.problem != "laplace_square":
        raise StudyError("spec.problem must be 'laplace_square'")
    return run_study(spec)


def run_dauge(spec):
    if spec.problem != "dauge":
        raise StudyError("spec.problem must be 'dauge'")
    return run_study(spec)


def fit_rates(h, errors):
    """Least-squares slope of log(error) against log(h).

    Nonpositive or non-finite errors are excluded (with a log note); the
    slope is nan when fewer than two usable points remain.
    """
    h = np.asarray(h, dtype=float)
    errors = np.asarray(errors, dtype=float)
    ok = np.isfinite(errors) & (errors > 0) & np.isfinite(h) & (h > 0)
    if (~ok).any():
        logger.info("fit_rates: excluded %d nonpositive/invalid points",
                    int((~ok).sum()))
    if ok.sum() < 2:
        return float("nan")
    slope = np.polyfit(np.log(h[ok]), np.log(errors[ok]), 1)[0]
    return float(slope)


CSV_COLUMNS = (
    "problem", "family", "k", "level", "h", "eig_index", "exact",
    "computed", "rel_error", "slope",
)


def emit_report(report, path):
    """Write the per-(level, eigenvalue) rows as CSV.

    Output is bit-stable for identical inputs: floats are rendered with
    repr, which round-trips exactly.
    """
    spec = report.spec
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for lv in report.levels:
            for t in range(len(report.exact)):
                writer.writerow(
                    [
                        spec.problem,
                        spec.family,
                        spec.k,
                        lv.level,
                        repr(lv.h),
                        t,
                        repr(float(report.exact[t])),
                        repr(float(lv.tracked[t])),
                        repr(float(lv.errors[t])),
                        repr(float(report.slopes[t])),
                    ]
                )


def read_report(path):
    """Parse an emitted CSV back into a list of row dicts."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
