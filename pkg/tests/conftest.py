import os

import pytest


@pytest.fixture(scope="session", autouse=True)
def _table_cache(tmp_path_factory):
    # tables are expensive; share them across the session unless the caller set a cache
    if "SPLINELAB_CACHE" not in os.environ:
        os.environ["SPLINELAB_CACHE"] = str(tmp_path_factory.mktemp("slcache"))
    yield
