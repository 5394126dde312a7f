import numpy as np
import pytest

from swsgd import measures as ms
from swsgd import network as nw


@pytest.fixture
def toy_net():
    """Scale-by-u network in one dimension: T(u, x) = u * x inside the plateau."""
    return nw.NetworkSpec.dense((1, 1), "identity", R_u=4.0, R_x=4.0, eps=0.5, bias=False)


@pytest.fixture
def toy_measures():
    mx = ms.DiscreteMeasure.uniform([[0.5], [1.0], [1.5], [2.0]])
    my = ms.DiscreteMeasure.uniform([[1.0], [2.0], [3.0], [4.0]])
    return mx, my


@pytest.fixture
def tanh_net():
    return nw.NetworkSpec.dense((2, 3, 2), "tanh", R_u=6.0, R_x=6.0, eps=1.0)


@pytest.fixture
def relu_net():
    return nw.NetworkSpec.dense((2, 3, 2), "relu", R_u=6.0, R_x=6.0, eps=1.0)


def random_unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def kink_free_batch(net, u, batch, margin=1e-3):
    """All pre-activations away from relu kinks and all projected values of the
    network outputs separated from each other and from the target projections."""
    from swsgd.network import _base_pass, forward_batch

    if net.activation in ("relu", "leaky_relu"):
        for row in batch.X:
            _, zs = _base_pass(net, u, row)
            if min(float(np.abs(z).min()) for z in zs[1:]) < margin:
                return False
    Tx = forward_batch(net, u, batch.X)
    for theta in batch.thetas:
        px = np.sort(Tx @ theta)
        if px.shape[0] > 1 and float(np.diff(px).min()) < margin:
            return False
        py = batch.Y @ theta
        if float(np.abs(px[:, None] - py[None, :]).min()) < margin:
            return False
    return True
