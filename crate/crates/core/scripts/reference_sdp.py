"""Reference values for the ANM dual program, solved with an interior-point
conic solver. Writes tests/fixtures/anm_reference.json.

    python scripts/reference_sdp.py

Each instance draws a model echo (random directions, random gains, noise)
with a random-phase schedule, normalizes C and R to unit scale, and picks a
beta at a fraction of the unconstrained peak of ‖Cᴴb(ω)‖·√N so that
the spectral constraint binds.
"""

import json
import pathlib

import cvxpy as cp
import numpy as np

M, N, L = 4, 8, 8
INSTANCES = 5


def steering(n, omega):
    return np.exp(-1j * np.arange(n) * omega)


def instance(seed):
    rng = np.random.default_rng(seed)
    k = rng.integers(1, 4)
    theta = rng.uniform(-1.2, 1.2, size=k)
    theta_bi = np.deg2rad(-60.0)
    b = np.stack([steering(M, np.pi * np.sin(t)) for t in theta], axis=1)
    q = np.stack([steering(N, np.pi * (np.sin(t) - np.sin(theta_bi))) for t in theta], axis=1)
    gains = rng.normal(size=k) + 1j * rng.normal(size=k)
    d = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(N, L)))
    noise = 0.3 * (rng.normal(size=(M, L)) + 1j * rng.normal(size=(M, L)))
    y = b @ np.diag(gains) @ q.conj().T @ d + noise

    c = y @ d.conj().T
    r = np.linalg.inv(d @ d.conj().T)
    r = 0.5 * (r + r.conj().T)
    c = c / np.linalg.norm(c, 2)
    r = r / np.mean(np.linalg.eigvalsh(r))
    rho = float(rng.uniform(0.5, 4.0))
    omega = np.linspace(-np.pi, np.pi, 20001)
    peak = max(np.linalg.norm(c.conj().T @ steering(M, w)) for w in omega)
    beta = float(rng.uniform(0.3, 0.6) * np.sqrt(N) * peak)
    return c, r, beta, rho


def solve(c, r, beta, rho):
    w = cp.Variable((M, M), hermitian=True)
    g = cp.Variable((M, N), complex=True)
    s = cp.bmat([[w, g], [g.H, rho * np.eye(N)]])
    cons = [s >> 0, cp.real(cp.trace(w)) == beta**2 / (rho * N)]
    for v in range(1, M):
        cons.append(sum(w[i, i + v] for i in range(M - v)) == 0)
    chol = np.linalg.cholesky(r)
    prob = cp.Problem(cp.Minimize(cp.sum_squares((c - g) @ chol)), cons)
    prob.solve(
        solver=cp.CLARABEL,
        tol_gap_abs=1e-9,
        tol_gap_rel=1e-9,
        tol_feas=1e-9,
        max_iter=500,
    )
    assert prob.status == cp.OPTIMAL, prob.status
    return float(prob.value), g.value


def cplx(a):
    return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}


def main():
    out = []
    for seed in range(INSTANCES):
        c, r, beta, rho = instance(seed)
        objective, g = solve(c, r, beta, rho)
        # the constraint must bind, otherwise G = C and the test is trivial
        assert objective > 1e-3, objective
        out.append(
            {
                "seed": seed,
                "n_ses": M,
                "n_res": N,
                "beta": beta,
                "rho": rho,
                "c": cplx(c),
                "r": cplx(r),
                "objective": objective,
                "g": cplx(g),
            }
        )
        print(f"instance {seed}: objective {objective:.12e}")
    path = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "anm_reference.json"
    path.write_text(json.dumps({"solver": f"cvxpy {cp.__version__} / CLARABEL", "instances": out}, indent=1))


if __name__ == "__main__":
    main()
