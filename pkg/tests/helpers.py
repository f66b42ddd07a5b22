"""Random test fields shared by the test modules."""
import numpy as np

from fracinf.fields import FunctionField, GaussianBumps, Growth


def random_bumps(rng, dim=2, k=3):
    """Smooth bounded field: a sum of Gaussian bumps with random signs and widths."""
    return GaussianBumps(rng.uniform(-1, 1, k), rng.uniform(-1, 1, (k, dim)), rng.uniform(0.5, 1.5, k))


def cosine_field(rng, x0, k=3):
    """``sum a_i cos(w_i . (x - x0))``: C^{1,1}, bounded, zero gradient at ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    a = rng.uniform(-1, 1, k)
    W = rng.normal(size=(k, dim)) * rng.uniform(0.5, 2.0, (k, 1))

    def f(pts):
        return np.cos((pts - x0) @ W.T) @ a

    def grad(x):
        return -(np.sin(W @ (x - x0)) * a) @ W

    c11 = float(np.sum(np.abs(a) * np.sum(W * W, axis=1))) / 2
    return FunctionField(f, dim, Growth("bounded", float(np.sum(np.abs(a)))), grad=grad,
                         c11=lambda x: c11)


# summary lines of the acceptance criteria, printed by conftest at the end of the run
ACCEPTANCE = []
