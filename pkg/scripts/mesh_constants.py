"""Discrete Korn constant and trace constant of the unit cube under refinement.

    python3 scripts/mesh_constants.py [n ...]

Both constants depend on the mesh only, so the reference material is used.
"""

import sys

from viscontact.assembly import assemble, estimate_korn_constant, trace_constant
from viscontact.geometry import make_box_mesh
from viscontact.material import MaterialParams


def main(levels) -> None:
    p = MaterialParams(1.0, 1.0, 0.1, 1.0, 0.05)
    print(f"{'n':>3} {'dofs':>6} {'c0':>10} {'trace c':>10}")
    for n in levels:
        sys_ = assemble(make_box_mesh([0, 0, 0], [1, 1, 1], (n, n, n)), p)
        print(f"{n:>3} {sys_.n:>6} {estimate_korn_constant(sys_):>10.5f} {trace_constant(sys_):>10.5f}")


if __name__ == "__main__":
    main([int(a) for a in sys.argv[1:]] or [1, 2, 4, 8])
