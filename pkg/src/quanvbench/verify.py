"""Self-contained oracle suites behind the `verify` CLI command.

Each check exercises a production code path against an independent
reference: the statevector kernels against dense Kronecker-product
matrices, both gradient paths against central finite differences, and the
attack implementations against their algebraic reduction identities and
containment guarantees.  A corrupted gate, a broken chain rule, or a
mis-projected attack step fails loudly here before any experiment runs.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import nn, qsim, quanv
from .ansatz import AnsatzKind, build_ansatz
from .attacks import AttackConfig, AttackKind, SurrogateSource, attack, fgsm, mim, pgd
from .nn import Architecture
from .quanv import QuanvConfig


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _random_circuit(n_qubits, n_gates, rng):
    gates = []
    for _ in range(n_gates):
        roll = rng.integers(7)
        q = int(rng.integers(n_qubits))
        theta = float(rng.uniform(0, 2 * np.pi))
        if roll == 0:
            gates.append(qsim.rx(q, theta))
        elif roll == 1:
            gates.append(qsim.ry(q, theta))
        elif roll == 2:
            gates.append(qsim.rz(q, theta))
        elif roll == 3:
            gates.append(qsim.rot(q, *rng.uniform(0, 2 * np.pi, 3)))
        elif roll == 4:
            gates.append(qsim.h(q))
        elif n_qubits >= 2:
            pair = rng.choice(n_qubits, 2, replace=False)
            if roll == 5:
                gates.append(qsim.cnot(int(pair[0]), int(pair[1])))
            else:
                gates.append(qsim.zz(int(pair[0]), int(pair[1]), theta))
    return qsim.Circuit(n_qubits, tuple(gates))


def check_statevector_oracle() -> tuple[bool, str]:
    """apply_circuit vs dense Kronecker-product matrices, 100 random pairs."""
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 5))
        c = _random_circuit(n, int(rng.integers(1, 25)), rng)
        amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
        amps /= np.linalg.norm(amps)
        fast = qsim.apply_circuit(qsim.StateVector(n, amps), c).amps
        dense = qsim.dense_unitary_oracle(c) @ amps
        worst = max(worst, float(np.max(np.abs(fast - dense))))
    return worst < 1e-9, f"max elementwise error {worst:.2e} (tolerance 1e-9)"


def check_parameter_shift_gradients() -> tuple[bool, str]:
    """Quanvolution input gradients vs finite differences, every ansatz kind."""
    rng = np.random.default_rng(202)
    h = 1e-5
    worst = 0.0
    for kind in AnsatzKind:
        cfg = QuanvConfig(circuit=build_ansatz(kind, 4, seed=303))
        img = rng.uniform(0.05, 0.95, (6, 6, 1))
        upstream = rng.normal(size=(3, 3, 4))
        exact = quanv.input_gradient(img, cfg, upstream)
        for flat in rng.choice(img.size, 20, replace=False):
            idx = np.unravel_index(flat, img.shape)
            plus, minus = img.copy(), img.copy()
            plus[idx] += h
            minus[idx] -= h
            fd = (
                np.sum(upstream * quanv.quanvolve_image(plus, cfg, validate=False))
                - np.sum(upstream * quanv.quanvolve_image(minus, cfg, validate=False))
            ) / (2 * h)
            rel = abs(exact[idx] - fd) / max(1.0, abs(fd))
            worst = max(worst, rel)
        if worst >= 1e-5:
            return False, f"{kind.value}: relative error {worst:.2e} (tolerance 1e-5)"
    return True, f"all 5 ansatz kinds, max relative error {worst:.2e} (tolerance 1e-5)"


def check_backprop_gradients() -> tuple[bool, str]:
    """Model input gradients vs finite differences through conv/dense/relu."""
    rng = np.random.default_rng(404)
    h = 1e-4
    worst = 0.0
    for arch, dataset in ((Architecture.CLASSICAL_CNN, "mnist"), (Architecture.QUNN, "fmnist")):
        model = nn.build_model(arch, dataset, seed=505)
        x = rng.uniform(0, 1, model.input_shape)
        label = int(rng.integers(10))
        grad = nn.input_gradient(model, x, label)
        for flat in rng.choice(x.size, 50, replace=False):
            idx = np.unravel_index(flat, x.shape)
            plus, minus = x.copy(), x.copy()
            plus[idx] += h
            minus[idx] -= h
            fd = (nn.loss(model, plus, label) - nn.loss(model, minus, label)) / (2 * h)
            rel = abs(grad[idx] - fd) / max(1.0, abs(fd))
            worst = max(worst, rel)
        if worst >= 1e-4:
            return False, f"{arch.value}: relative error {worst:.2e} (tolerance 1e-4)"
    return True, f"conv and dense stacks, max relative error {worst:.2e} (tolerance 1e-4)"


def _toy_source() -> SurrogateSource:
    rng = np.random.default_rng(606)
    model = nn.build_model(Architecture.CLASSICAL_CNN, "mnist", seed=606)
    xs = rng.uniform(0, 1, (16, 28, 28, 1))
    ys = rng.integers(0, 10, 16)
    nn.train(model, xs, ys, nn.TrainConfig(epochs=3, seed=606))
    return SurrogateSource(model)


def check_attack_reductions() -> tuple[bool, str]:
    """PGD(1 step, alpha=eps) == FGSM, MIM(decay 0) == PGD, bit for bit."""
    rng = np.random.default_rng(707)
    source = _toy_source()
    for trial in range(5):
        img = rng.uniform(0, 1, (28, 28, 1))
        label = int(rng.integers(10))
        eps = float(rng.uniform(0.05, 0.5))
        a = fgsm(source, img, label, eps)
        b = pgd(source, img, label, AttackConfig(AttackKind.PGD, eps, steps=1, step_size=eps))
        if a.tobytes() != b.tobytes():
            return False, f"PGD single-step differs from FGSM at eps={eps:.3f}"
        alpha = eps / 3
        p = pgd(source, img, label, AttackConfig(AttackKind.PGD, eps, steps=6, step_size=alpha))
        m = mim(source, img, label,
                AttackConfig(AttackKind.MIM, eps, steps=6, step_size=alpha, decay=0.0))
        if p.tobytes() != m.tobytes():
            return False, f"MIM with zero decay differs from PGD at eps={eps:.3f}"
        f1 = fgsm(source, img, label, alpha)
        m1 = mim(source, img, label,
                 AttackConfig(AttackKind.MIM, eps, steps=1, step_size=alpha, decay=0.9))
        if f1.tobytes() != m1.tobytes():
            return False, f"MIM single step differs from FGSM step at alpha={alpha:.3f}"
    return True, "5 random configs, all three identities bit-exact"


def check_epsilon_ball() -> tuple[bool, str]:
    """Containment |adv - x|_inf <= eps under fuzzing, 100 runs per attack."""
    rng = np.random.default_rng(808)
    source = _toy_source()
    worst = 0.0
    for kind in AttackKind:
        for _ in range(100):
            img = rng.uniform(0, 1, (28, 28, 1))
            label = int(rng.integers(10))
            cfg = AttackConfig(
                kind,
                epsilon=float(rng.uniform(0, 2)),
                steps=int(rng.integers(1, 6)),
                step_size=float(rng.uniform(0.01, 1.0)),
                decay=float(rng.uniform(0, 1.5)),
                clamp=(0.0, 1.0) if rng.random() < 0.5 else None,
            )
            adv = attack(source, img, label, cfg)
            overshoot = float(np.max(np.abs(adv - img))) - cfg.epsilon
            worst = max(worst, overshoot)
            if overshoot > 1e-9:
                return False, f"{kind.value}: ball exceeded by {overshoot:.2e}"
            if cfg.clamp is not None and (np.any(adv < 0.0) or np.any(adv > 1.0)):
                return False, f"{kind.value}: clamp violated"
    return True, f"300 fuzzed attacks contained (worst overshoot {worst:.2e})"


CHECKS = (
    ("statevector vs dense-matrix oracle", check_statevector_oracle),
    ("parameter-shift vs finite-difference gradients", check_parameter_shift_gradients),
    ("backprop vs finite-difference gradients", check_backprop_gradients),
    ("attack reduction identities", check_attack_reductions),
    ("epsilon-ball containment", check_epsilon_ball),
)


def run_all() -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        passed, detail = fn()
        results.append(CheckResult(name, passed, detail, time.perf_counter() - t0))
    return results
