"""Walk through the exact network calculus.

Builds two small networks, composes them, runs them side by side, adds
them and multiplies them with the product gadget, printing the size and
the error of every result.

    python3 demos/calculus_tour.py
"""

import numpy as np

from reluflow.calculus import MulConfig, affine_net, multiply_nets, parallelize, sparse_concat, sum_nets
from reluflow.network import deserialize, realize, serialize
from reluflow.props import random_network


def show(label, net):
    rep = net.size()
    print(f"{label:<28} W={rep.weights:<5} N={rep.neurons:<4} L={rep.layers}")


rng = np.random.default_rng(7)
inner = random_network(rng, 2, 1, 3, 4)
outer = random_network(rng, 1, 1, 2, 3)
show("inner", inner)
show("outer", outer)

comp = sparse_concat(outer, inner)
show("outer after inner", comp)
x = rng.uniform(-1, 1, size=(5, 2))
print("  composition error:", np.max(np.abs(realize(comp, x) - realize(outer, realize(inner, x)))))

par = parallelize([inner, random_network(rng, 2, 1, 2, 5)])
show("side by side", par)

total = sum_nets(inner, affine_net([[1.0, -1.0]]))
show("inner + (x0 - x1)", total)

prod = multiply_nets(inner, affine_net([[0.5, 0.0]]), MulConfig(1e-3, 4.0))
show("inner * x0/2 (eps 1e-3)", prod)
ref = realize(inner, x)[:, 0] * 0.5 * x[:, 0]
print("  product error:", np.max(np.abs(realize(prod, x)[:, 0] - ref)))

# the text format round-trips to the bit
again = deserialize(serialize(comp))
print("  round trip identical:", np.array_equal(realize(again, x), realize(comp, x)))
