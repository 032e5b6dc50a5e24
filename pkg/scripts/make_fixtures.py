#!/usr/bin/env python3
"""Regenerate the bundled calibration and layer fixtures.

Cell models A-C are calibrated from the two endpoints of their
conductance/energy range. D shares C's transistor and capacitances, so it
reuses C's calibration and adds the 2.215 ohm wire segments; its crossbar
behaviour comes from the circuit solve rather than from the cell fit.
"""

import json
from pathlib import Path

from xbar_energy.cli import main as cli
from xbar_energy.workload import ConvSpec, gen_conv_layer, write_fixture

DATA = Path(__file__).resolve().parents[1] / "src" / "xbar_energy" / "data"

# id: (g_min_us, g_max_us, e_min_fj, e_max_fj, c_wire_ff)
TABLE = {
    "A": (8.89, 107.77, 1.69, 19.64, 0.0),
    "B": (9.37, 265.41, 1.94, 48.75, 0.0),
    "C": (9.37, 265.41, 5.32, 52.13, 2.0),
}

LAYERS = [
    # name, spec, weight sigma, activation sparsity
    ("conv1", ConvSpec(16, 16, 3, 3, 3, 16, stride=1, padding=1), 0.25, 0.30),
    ("conv2", ConvSpec(16, 16, 16, 3, 3, 32, stride=2, padding=1), 0.125, 0.50),
    ("conv3", ConvSpec(8, 8, 32, 3, 3, 32, stride=1, padding=1), 0.0625, 0.65),
    ("conv4", ConvSpec(8, 8, 32, 1, 1, 64, stride=1, padding=0), 0.0625, 0.80),
]


def make_cells():
    for cid, (g0, g1, e0, e1, cw) in TABLE.items():
        sweep = DATA / f"sweep-{cid}.csv"
        sweep.write_text(f"g_us,e_fj\n{g0},{e0}\n{g1},{e1}\n")
        args = [str(sweep), "--name", cid, "--out", str(DATA / f"config-{cid}.json")]
        args += ["--c-bl", str(cw), "--c-wl", str(cw), "--c-sl", str(cw)]
        assert cli(["calibrate", *args]) == 0
    args = [str(DATA / "sweep-C.csv"), "--name", "D", "--r-wire", "2.215",
            "--c-bl", "2", "--c-wl", "2", "--c-sl", "2", "--out", str(DATA / "config-D.json")]
    assert cli(["calibrate", *args]) == 0


def make_layers():
    out = DATA / "fixtures"
    out.mkdir(exist_ok=True)
    entries = []
    for k, (name, spec, sigma, sparsity) in enumerate(LAYERS):
        x, w = gen_conv_layer(spec, seed=100 + k, sigma=sigma, act_sparsity=sparsity)
        write_fixture(out / f"{name}.w.xbwl", w.astype("int8"))
        write_fixture(out / f"{name}.x.xbwl", x.astype("uint8"))
        entries.append({"name": name, "weights": f"{name}.w.xbwl", "input": f"{name}.x.xbwl",
                        "stride": spec.stride, "padding": spec.padding,
                        "weight_bits": spec.weight_bits, "activation_bits": spec.activation_bits})
    (out / "layers.json").write_text(json.dumps({"layers": entries}, indent=2) + "\n")


if __name__ == "__main__":
    make_cells()
    make_layers()
