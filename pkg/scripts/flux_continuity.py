"""|log tau(eps) - log tau(0)| for the T2 mass model as the 2-form flux shrinks."""
import numpy as np

from torsionlab import corpus as C
from torsionlab.torsion import flux_continuity


def main():
    eps = (0.2, 0.1, 0.05, 0.025, 0.0125)
    rep = flux_continuity(lambda e: C.t2_mass(flux=e), eps)
    print("eps,deviation")
    for e, d in zip(rep.eps, rep.deviations):
        print(f"{e},{d:.6e}")
    print(f"# log-log slope {rep.slope:.4f}, monotone {rep.monotone}")
    local = np.diff(np.log(rep.deviations)) / np.diff(np.log(rep.eps))
    print("# local slopes " + " ".join(f"{x:.3f}" for x in local))


if __name__ == "__main__":
    main()
