import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    # exposes the call-phase outcome to fixtures during teardown
    if rep.when == "call":
        item.rep_call = rep
    return rep
