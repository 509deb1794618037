"""Peak velocity norm max_n |v_n|_M on the reference scenario for several kappa and dt.

    python3 scripts/velocity_peaks.py

Prints one row per (dt, kappa) with the time of the peak and the ratio of the
largest to the smallest peak at that dt.
"""

import numpy as np

from viscontact.assembly import assemble
from viscontact.dynamics import ForceSpec, ProblemData, TimeGrid, simulate
from viscontact.geometry import make_box_mesh
from viscontact.material import MaterialParams

KAPPAS = (1e-2, 1e-3, 1e-4, 1e-5)


def main() -> None:
    sys_ = assemble(make_box_mesh([0, 0, 0], [1, 1, 1], (4, 4, 4)), MaterialParams(1.0, 1.0, 0.1, 1.0, 0.05))
    data = ProblemData.zero(sys_, ForceSpec((0.0, 0.0, -0.5), 1.0))
    for dt in (1e-3, 5e-4):
        peaks = []
        for kappa in KAPPAS:
            traj = simulate(sys_, data, TimeGrid(4.0, dt, 1.0), kappa)
            norms = np.sqrt(np.einsum("ij,ij->i", traj.V, (sys_.M @ traj.V.T).T))
            k = int(np.argmax(norms))
            peaks.append(norms[k])
            print(f"dt={dt:g} kappa={kappa:g} peak={norms[k]:.5f} at t={traj.times[k]:.3f}")
        print(f"dt={dt:g} max/min peak ratio {max(peaks) / min(peaks):.3f}")


if __name__ == "__main__":
    main()
