#!/usr/bin/env python3
"""Fits the tanh initializations for the rational and SIREN nonlinearities.

Writes data/tanh_rational.json and data/tanh_siren.json. Each file holds the
fitted tensors plus oracle outputs on a fixed grid, evaluated here in float64,
which the C++ tests compare against. Run from the repository root:

    python3 tools/fit/fit_tanh.py
"""

import argparse
import json
import pathlib

import numpy as np
import scipy.optimize
import torch

FIT_POINTS = 4096
FIT_RANGE = 4.0
ORACLE_POINTS = 601
ORACLE_RANGE = 3.0

NUM_ORDER = 6
DEN_ORDER = 5

SIREN_HIDDEN = 32
SIREN_LAYERS = 3
SIREN_OMEGA = 30.0
SIREN_INPUT_SCALE = 4.0


def rational(coeffs, x):
    a = coeffs[: NUM_ORDER + 1]
    b = coeffs[NUM_ORDER + 1 :]
    num = np.polynomial.polynomial.polyval(x, a)
    den = 1.0 + x * np.polynomial.polynomial.polyval(x, b)
    return num / den


def fit_rational(x, y):
    # tanh is odd, so only odd numerator and even denominator terms are fitted;
    # the rest stay exactly zero. An unconstrained fit puts a pole near |x| = 4.
    free = np.array([i % 2 == 1 for i in range(NUM_ORDER + 1)] + [j % 2 == 0 for j in range(1, DEN_ORDER + 1)])

    def expand(c):
        full = np.zeros(free.size)
        full[free] = c
        return full

    # Linearized least squares: P(x) - y * (Q(x) - 1) = y.
    cols = [x**i for i in range(NUM_ORDER + 1)] + [-y * x**j for j in range(1, DEN_ORDER + 1)]
    init, *_ = np.linalg.lstsq(np.stack(cols, axis=1)[:, free], y, rcond=None)
    res = scipy.optimize.least_squares(lambda c: rational(expand(c), x) - y, init, xtol=1e-15, ftol=1e-15,
                                       gtol=1e-15)
    coeffs = expand(res.x)
    den = np.polynomial.polynomial.Polynomial(np.concatenate([[1.0], coeffs[NUM_ORDER + 1 :]]))
    real_roots = [r.real for r in den.roots() if abs(r.imag) < 1e-9 and abs(r.real) <= 8.0]
    if real_roots:
        raise RuntimeError(f"denominator vanishes inside [-8, 8]: {real_roots}")
    return coeffs


class Siren(torch.nn.Module):
    def __init__(self):
        super().__init__()
        sizes = [1] + [SIREN_HIDDEN] * SIREN_LAYERS + [1]
        self.layers = torch.nn.ModuleList(torch.nn.Linear(i, o) for i, o in zip(sizes[:-1], sizes[1:]))
        with torch.no_grad():
            self.layers[0].weight.uniform_(-1.0, 1.0)
            for layer in self.layers[1:]:
                bound = np.sqrt(6.0 / layer.in_features)
                layer.weight.uniform_(-bound, bound)

    def forward(self, x):
        h = x / SIREN_INPUT_SCALE
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i + 1 < len(self.layers):
                h = torch.sin((SIREN_OMEGA if i == 0 else 1.0) * h)
        return h


def fit_siren(x, y, seed):
    torch.manual_seed(seed)
    net = Siren().double()
    xt = torch.tensor(x).unsqueeze(1)
    yt = torch.tensor(y).unsqueeze(1)
    opt = torch.optim.Adam(net.parameters(), lr=1e-3)
    for _ in range(4000):
        opt.zero_grad()
        loss = torch.mean((net(xt) - yt) ** 2)
        loss.backward()
        opt.step()
    lbfgs = torch.optim.LBFGS(net.parameters(), max_iter=2000, tolerance_grad=1e-14, tolerance_change=1e-16,
                              history_size=50, line_search_fn="strong_wolfe")

    def closure():
        lbfgs.zero_grad()
        loss = torch.mean((net(xt) - yt) ** 2)
        loss.backward()
        return loss

    for _ in range(5):
        lbfgs.step(closure)
    return net


def tensor_entry(name, array):
    array = np.asarray(array, dtype=np.float64)
    return {"name": name, "shape": list(array.shape), "data": array.reshape(-1).tolist()}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="data")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    x = np.linspace(-FIT_RANGE, FIT_RANGE, FIT_POINTS)
    y = np.tanh(x)
    grid = np.linspace(-ORACLE_RANGE, ORACLE_RANGE, ORACLE_POINTS)

    coeffs = fit_rational(x, y)
    r_grid = rational(coeffs, grid)
    print(f"rational: max |R - tanh| on [-3, 3] = {np.max(np.abs(r_grid - np.tanh(grid))):.3e}")
    doc = {
        "format": "deffx-prefit-v1",
        "kind": "rational",
        "fit": {"points": FIT_POINTS, "range": [-FIT_RANGE, FIT_RANGE]},
        "tensors": [
            tensor_entry("numerator", coeffs[: NUM_ORDER + 1]),
            tensor_entry("denominator", coeffs[NUM_ORDER + 1 :]),
        ],
        "oracle": {"x": grid.tolist(), "y": r_grid.tolist()},
    }
    (out / "tanh_rational.json").write_text(json.dumps(doc, indent=1) + "\n")

    net = fit_siren(x, y, args.seed)
    with torch.no_grad():
        s_grid = net(torch.tensor(grid).unsqueeze(1)).squeeze(1).numpy()
    print(f"siren: max |f - tanh| on [-3, 3] = {np.max(np.abs(s_grid - np.tanh(grid))):.3e}")
    tensors = []
    for i, layer in enumerate(net.layers):
        tensors.append(tensor_entry(f"layers.{i}.weight", layer.weight.detach().numpy()))
        tensors.append(tensor_entry(f"layers.{i}.bias", layer.bias.detach().numpy().reshape(-1, 1)))
    doc = {
        "format": "deffx-prefit-v1",
        "kind": "siren",
        "fit": {"points": FIT_POINTS, "range": [-FIT_RANGE, FIT_RANGE]},
        "config": {
            "hidden": SIREN_HIDDEN,
            "hidden_layers": SIREN_LAYERS,
            "first_omega": SIREN_OMEGA,
            "input_scale": SIREN_INPUT_SCALE,
        },
        "tensors": tensors,
        "oracle": {"x": grid.tolist(), "y": s_grid.tolist()},
    }
    (out / "tanh_siren.json").write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
