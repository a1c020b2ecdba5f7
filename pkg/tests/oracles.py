"""Independent reference implementations used to compute expected values.

Everything here is deliberately naive (central differences, scalar loops,
brute-force span matching) and never calls into the library's own
implementation paths it is used to check.
"""

import numpy as np


def fd_gradient(f, args, wrt, h=1e-5):
    """Central finite-difference gradient of scalar f(*args) w.r.t. args[wrt].

    ``f`` takes plain numpy arrays and returns a float.
    """
    x = np.array(args[wrt], dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = f(*[x if j == wrt else args[j] for j in range(len(args))])
        flat[i] = orig - h
        lo = f(*[x if j == wrt else args[j] for j in range(len(args))])
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * h)
    return grad


def rel_error(approx, exact):
    num = np.abs(approx - exact)
    den = np.maximum(np.abs(approx) + np.abs(exact), 1e-8)
    return float((num / den).max())


class ScalarAdamaxRef:
    """Reference Adamax on a single scalar parameter, written from the
    update equations directly (decoupled from any array code)."""

    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = 0.0
        self.u = 0.0
        self.t = 0

    def step(self, theta, grad, lr, weight_decay=0.0):
        self.t += 1
        g = grad + weight_decay * theta
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.u = max(self.beta2 * self.u, abs(g))
        correction = 1.0 - self.beta1 ** self.t
        return theta - lr * self.m / (correction * (self.u + self.eps))


def bio_spans_bruteforce(tags):
    """All (type, start, end) entity spans of a BIO sequence, by enumerating
    every candidate span and testing whether the tags spell it out exactly.

    Lenient decoding: an I-X that does not continue an open X run acts as a
    span start. A span [s, e) of type X is an entity iff position s starts a
    run of X (B-X, or I-X not preceded by B-X/I-X), positions s+1..e-1 are
    all I-X, and position e does not continue the run with I-X.
    """
    n = len(tags)

    def kind(i):
        if tags[i] == "O":
            return None, None
        prefix, etype = tags[i].split("-", 1)
        return prefix, etype

    def starts_run(i):
        prefix, etype = kind(i)
        if prefix is None:
            return False
        if prefix == "B":
            return True
        prev_prefix, prev_type = (None, None) if i == 0 else kind(i - 1)
        return prev_prefix is None or prev_type != etype

    spans = set()
    for s in range(n):
        if not starts_run(s):
            continue
        _, etype = kind(s)
        e = s + 1
        while e < n and kind(e) == ("I", etype):
            e += 1
        spans.add((etype, s, e))
    return spans


def pearson_closed_form(xs, ys):
    """Sample Pearson r via the explicit covariance/variance formula."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    xc = x - x.mean()
    yc = y - y.mean()
    return float((xc * yc).sum() / np.sqrt((xc * xc).sum() * (yc * yc).sum()))
