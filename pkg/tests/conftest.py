import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from latcorr import BindingMap, derive_unique_sets  # noqa: E402

TOY_DENSE = "lower,H1,H2\nv1,1,0\nv2,1,0\nv3,0,1\nv4,0,1\nv5,1,1\n"
TOY_SPARSE = "lower,higher\nv1,H1\nv2,H1\nv3,H2\nv4,H2\nv5,H1\nv5,H2\n"


def make_sets(a, lower=None, higher=None):
    a = np.asarray(a)
    q, p = a.shape
    bmap = BindingMap(a, lower or [f"v{j + 1}" for j in range(q)], higher or [f"H{l + 1}" for l in range(p)])
    return bmap, derive_unique_sets(bmap)


@pytest.fixture
def toy_files(tmp_path):
    dense = tmp_path / "dense.csv"
    sparse = tmp_path / "sparse.csv"
    dense.write_text(TOY_DENSE)
    sparse.write_text(TOY_SPARSE)
    return dense, sparse


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[key])
