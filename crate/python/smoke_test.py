"""Smoke test for the pyhamlab extension module."""

import json
import math

import pyhamlab


IDENTITY = {
    "qubits": {"ancilla": 1, "proof1": 1, "proof2": 0},
    "accept_qubit": 0,
    "gates": [{"kind": "unitary", "targets": [0], "matrix": [[1, 0], [0, 0], [0, 0], [1, 0]]}],
}

ANTISYMMETRIC = {
    "qubits": 2,
    "partition": {"A": [0], "B": [1]},
    "a": 0.05,
    "b": 0.45,
    "terms": [
        {
            "support": [0, 1],
            "matrix": [
                [0, 0], [0, 0], [0, 0], [0, 0],
                [0, 0], [0.5, 0], [-0.5, 0], [0, 0],
                [0, 0], [-0.5, 0], [0.5, 0], [0, 0],
                [0, 0], [0, 0], [0, 0], [0, 0],
            ],
        }
    ],
}


def main():
    c = pyhamlab.Circuit.from_json(json.dumps(IDENTITY))
    assert c.steps == 1 and c.witness_qubits == 1
    # The accept qubit is the ancilla, which stays |0>.
    assert c.acceptance_probability([1, 0]) == 0.0

    h = c.compile()
    witness = [1 / math.sqrt(2), 1j / math.sqrt(2)]
    energy = h.history_energy(witness)
    assert abs(energy - 0.5) < 1e-12, energy
    groups = [t["group"] for t in json.loads(h.to_json())["terms"]]
    assert groups == ["in", "prop", "out"], groups
    assert len(h.eigenvalues()) == h.dim

    cos_sq, bound, holds = c.clock_angle()
    assert holds and cos_sq <= bound + 1e-9

    pt = pyhamlab.Circuit.product_test([1, 1])
    # H, CSWAP, H per register plus the accept gate
    assert pt.steps == 7
    identical = [1] + [0] * 15
    assert abs(pt.acceptance_probability(identical) - 1.0) < 1e-12

    inst = pyhamlab.SlhInstance.from_json(json.dumps(ANTISYMMETRIC))
    value, left, right = inst.min_product(restarts=10, seed=1)
    assert abs(value) < 1e-9 and len(left) == 2 and len(right) == 2
    assert abs(inst.ground_energy()) < 1e-12
    assert inst.decide() == "yes"
    verdict = inst.verify(seed=2)
    assert verdict["accept"] and verdict["side_a"] == "consistent", verdict
    assert json.loads(inst.to_json())["qubits"] == 2

    try:
        pyhamlab.Circuit.from_json("{")
    except ValueError as e:
        assert "parse" in str(e)
    else:
        raise AssertionError("malformed circuit accepted")

    assert [i for i, _ in pyhamlab.criteria()] == list(range(1, 13))
    print("pyhamlab smoke test passed")


if __name__ == "__main__":
    main()
