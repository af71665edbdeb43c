"""Independent dense reference values for the p = 2 discretization.

Assembles the collocation kernel from scratch with numpy and solves every
linear or spectral problem with scipy. Run from the repository root:

    python3 oracle/oracle.py > tests/oracle_values.hpp
"""
import numpy as np
import scipy.linalg as sl
from scipy.optimize import fsolve

S = 0.4
LEFT, RIGHT = -1.0, 1.0


def assemble(n, s=S, p=2.0):
    w = (RIGHT - LEFT) / (n + 1)
    x = LEFT + w * np.arange(1, n + 1)
    d = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(d, 1.0)
    K = w * w / d ** (1 + s * p)
    np.fill_diagonal(K, 0.0)
    tail = 2 * w * ((x - LEFT) ** (-s * p) + (RIGHT - x) ** (-s * p)) / (s * p)
    G = -2 * K
    G[np.diag_indices(n)] = 2 * K.sum(1) + tail
    rho = np.minimum(x - LEFT, RIGHT - x)
    return w, x, G, rho


def spectrum(G, mass):
    ev, V = sl.eigh(G, mass)
    return ev, V


def emit(name, value):
    print(f"inline constexpr double {name} = {float(value)!r};")


def emit_array(name, values):
    body = ", ".join(repr(float(v)) for v in values)
    print(f"inline constexpr std::array<double, {len(values)}> {name} = {{{body}}};")


def main():
    print("#pragma once")
    print("// Generated by oracle/oracle.py; do not edit.")
    print("#include <array>")
    print("namespace oracle {")

    n = 64
    w, x, G, rho = assemble(n)
    M = w * np.eye(n)
    ev, V = spectrum(G, M)
    emit_array("lambda_h1", ev[:6])

    ev_sing, _ = spectrum(G, w * np.diag(rho ** -0.3))
    emit_array("lambda_rho03", ev_sing[:6])

    # Fredholm: (G - lambda M) u = w f with f = 1 + x
    f = 1.0 + x
    for tag, lam in (("half", 0.5 * ev[0]), ("mid", 0.5 * (ev[0] + ev[1]))):
        u = sl.solve(G - lam * M, w * f)
        emit(f"fredholm_{tag}_lambda", lam)
        emit(f"fredholm_{tag}_sup", np.abs(u).max())
        emit(f"fredholm_{tag}_l2", np.sqrt(w * (u @ u)))
        emit(f"fredholm_{tag}_u0", u[0])
        emit(f"fredholm_{tag}_umid", u[n // 2])

    # small solutions of G u = w |u|^{-1/2} u near c phi_k
    sups, energies = [], []
    for k in range(3):
        v = V[:, k]
        u0 = v / np.abs(v).max() * ev[k] ** -2.0
        F = lambda u: G @ u - w * np.sign(u) * np.sqrt(np.abs(u))
        u = fsolve(F, u0, xtol=1e-13)
        assert np.linalg.norm(F(u)) < 1e-12
        sups.append(np.abs(u).max())
        energies.append(0.5 * u @ G @ u - w * np.sum(np.abs(u) ** 1.5) / 1.5)
    emit_array("small_sup", sups)
    emit_array("small_energy", energies)

    # bifurcation: G u = lambda w u - w u^3 at lambda = lambda_1 + 0.05
    lam = ev[0] + 0.05
    v = V[:, 0]
    F = lambda u: G @ u - lam * w * u + w * u ** 3
    amp = np.sqrt(0.05 / (np.sum(v ** 4) / np.sum(v ** 2)))
    u = fsolve(F, amp * v, xtol=1e-13)
    assert np.linalg.norm(F(u)) < 1e-12
    emit("branch_lambda", lam)
    emit("branch_norm", np.sqrt(u @ G @ u))

    # Hardy supremum: max of [sum w u^2 / rho^{sp}] / u^T G u
    for m in (64, 128):
        wm, xm, Gm, rhom = assemble(m)
        hv = sl.eigh(wm * np.diag(rhom ** (-S * 2.0)), Gm, eigvals_only=True)
        emit(f"hardy_sup_n{m}", hv.max())

    print("}  // namespace oracle")


if __name__ == "__main__":
    main()
