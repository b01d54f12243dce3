import numpy as np
import pytest

from erproute import _kernels_py

try:
    from erproute import _kernels_cy
except ImportError:
    _kernels_cy = None

KERNEL_IMPLS = [pytest.param(_kernels_py, id="py")]
if _kernels_cy is not None:
    KERNEL_IMPLS.append(pytest.param(_kernels_cy, id="native"))


@pytest.fixture(params=KERNEL_IMPLS)
def kernel_impl(request):
    return request.param


def auroc_bruteforce(scores, labels) -> float:
    """Exhaustive positive/negative pair enumeration with half credit for ties."""
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


def ridge_oracle(embeddings, targets, beta) -> np.ndarray:
    """Independent ridge solve: SVD least squares on the stacked
    [design; sqrt(beta) I] system (bias column last)."""
    design = np.hstack([embeddings, np.ones((len(embeddings), 1))])
    stacked = np.vstack([design, np.sqrt(beta) * np.eye(design.shape[1])])
    rhs = np.concatenate([targets, np.zeros(design.shape[1])])
    coef, *_ = np.linalg.lstsq(stacked, rhs, rcond=None)
    return coef


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    label = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    print(f"\n[acceptance] {status} {label}", flush=True)
