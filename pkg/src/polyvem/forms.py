"""Local stiffness and mass matrices with diagonal stabilization.

The discrete energy form on one element is

    0.5-weighted (or tensor-weighted) Gram of the projected gradients
    + potential-weighted Gram of the L2 projections
    + sigma * |(I - D pi_nabla) u|^2-type stabilization,

and the stabilized mass form adds tau * h^2 times the analogous
(I - D pi0) sandwich. sigma is the mean eigenvalue of the element's
gradient consistency matrix and tau the mean eigenvalue of the mass
consistency matrix divided by h^2, so both stabilizations scale with the
element automatically. The "plain_dof" stabilization variant (the raw
sigma * u.v form without projecting out the polynomial part) is kept only
for A/B diagnostics: it breaks k-consistency and is never the default.
"""

from dataclasses import dataclass

import numpy as np

from .polyquad import n_monomials

STABILIZATIONS = ("projected", "plain_dof")

BOUNDARY_CONDITIONS = ("dirichlet", "neumann")


class FormError(Exception):
    pass


@dataclass(frozen=True)
class ProblemCoefficients:
    """Problem data: potential V, diffusivity tensor K, boundary condition.

    potential : callable mapping an (n, 2) point array to (n,) values, or
        None for V = 0.
    diffusivity : callable mapping points to (n, 2, 2) SPD tensors, a
        constant 2x2 array, or None for the Schrodinger default K = I/2.
    potential_degree : polynomial degree with which V is integrated
        exactly (the quadrature runs at degree 2k + potential_degree).
    """

    potential: object = None
    diffusivity: object = None
    bc: str = "dirichlet"
    potential_degree: int = 2

    def __post_init__(self):
        if self.bc not in BOUNDARY_CONDITIONS:
            raise ValueError(f"bc must be one of {BOUNDARY_CONDITIONS}")

    def potential_at(self, points):
        if self.potential is None:
            return None
        return np.asarray(self.potential(points), dtype=float).reshape(len(points))

    def diffusivity_at(self, points):
        n = len(points)
        if self.diffusivity is None:
            out = np.zeros((n, 2, 2))
            out[:, 0, 0] = 0.5
            out[:, 1, 1] = 0.5
            return out
        if callable(self.diffusivity):
            return np.asarray(self.diffusivity(points), dtype=float).reshape(n, 2, 2)
        const = np.asarray(self.diffusivity, dtype=float).reshape(2, 2)
        return np.broadcast_to(const, (n, 2, 2)).copy()

    @property
    def quadrature_extra_degree(self):
        return self.potential_degree if self.potential is not None else 0


@dataclass(frozen=True)
class LocalForms:
    """Element matrices of the discrete forms, all symmetric.

    stiffness() returns A_cons + A_pot + S; mass(variant) returns the
    consistency mass alone ("plain") or with its stabilization
    ("stabilized").
    """

    A_cons: np.ndarray
    A_pot: np.ndarray
    S: np.ndarray
    M_cons: np.ndarray
    Ms: np.ndarray
    sigma: float
    tau: float

    def stiffness(self):
        return self.A_cons + self.A_pot + self.S

    def mass(self, variant="plain"):
        if variant == "plain":
            return self.M_cons
        if variant == "stabilized":
            return self.M_cons + self.Ms
        raise ValueError(f"unknown mass variant {variant!r}")


def _sym(m):
    return 0.5 * (m + m.T)


def build_local_forms(ps, coefficients, stabilization="projected"):
    """Assemble the local matrices from an element's ProjectorSet.

    The quadrature stored on the ProjectorSet must have been built with
    the coefficients' extra degree (system.assemble takes care of that).
    """
    if stabilization not in STABILIZATIONS:
        raise ValueError(f"unknown stabilization {stabilization!r}")
    nodes = ps.quad.nodes
    w = ps.quad.weights
    nk1 = n_monomials(ps.k - 1)
    vq = ps.basis_values
    vq1 = vq[:, :nk1]

    kt = coefficients.diffusivity_at(nodes)
    gram = np.empty((2 * nk1, 2 * nk1))
    gram[:nk1, :nk1] = vq1.T @ ((w * kt[:, 0, 0])[:, None] * vq1)
    gram[:nk1, nk1:] = vq1.T @ ((w * kt[:, 0, 1])[:, None] * vq1)
    gram[nk1:, :nk1] = vq1.T @ ((w * kt[:, 1, 0])[:, None] * vq1)
    gram[nk1:, nk1:] = vq1.T @ ((w * kt[:, 1, 1])[:, None] * vq1)
    a_cons = _sym(ps.pi0_grad.T @ gram @ ps.pi0_grad)

    vvals = coefficients.potential_at(nodes)
    if vvals is None:
        a_pot = np.zeros_like(a_cons)
    else:
        a_pot = _sym(ps.pi0.T @ (vq.T @ ((w * vvals)[:, None] * vq)) @ ps.pi0)

    ndof = ps.ndof
    sigma = float(np.trace(a_cons)) / ndof
    if sigma <= 0.0:
        raise FormError(
            f"nonpositive stabilization scale sigma={sigma:g} "
            "(degenerate element or vanishing diffusivity)"
        )
    if stabilization == "projected":
        q = np.eye(ndof) - ps.D @ ps.pi_nabla
        s_mat = sigma * _sym(q.T @ q)
    else:
        s_mat = sigma * np.eye(ndof)

    m_cons = _sym(ps.pi0.T @ ps.H @ ps.pi0)
    h2 = ps.diameter ** 2
    tau = float(np.trace(m_cons)) / (h2 * ndof)
    if stabilization == "projected":
        q0 = np.eye(ndof) - ps.D @ ps.pi0
        ms = (tau * h2) * _sym(q0.T @ q0)
    else:
        ms = (tau * h2) * np.eye(ndof)

    return LocalForms(
        A_cons=a_cons, A_pot=a_pot, S=s_mat, M_cons=m_cons, Ms=ms,
        sigma=sigma, tau=tau,
    )


def local_stiffness(cell_projectors, coefficients, stabilization="projected"):
    """Full local stiffness (consistency + potential + stabilization)
    together with the stabilization scale sigma."""
    lf = build_local_forms(cell_projectors, coefficients, stabilization)
    return lf.stiffness(), lf.sigma


def local_mass_plain(cell_projectors):
    """Consistency mass matrix (k-consistent, positive semidefinite)."""
    lf = build_local_forms(cell_projectors, ProblemCoefficients())
    return lf.M_cons


def local_mass_stabilized(cell_projectors, stabilization="projected"):
    """Stabilized mass matrix and its scale tau."""
    lf = build_local_forms(
        cell_projectors, ProblemCoefficients(), stabilization
    )
    return lf.mass("stabilized"), lf.tau
