import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bosonic_saddle import beam_splitter, tritter


@pytest.fixture(scope="session")
def bs():
    return beam_splitter()


@pytest.fixture(scope="session")
def tt():
    return tritter()


@pytest.fixture(scope="session")
def matrix_files(tmp_path_factory, bs, tt):
    from bosonic_saddle.matrixio import save_matrix_csv, save_matrix_json

    d = tmp_path_factory.mktemp("matrices")
    save_matrix_json(d / "bs.json", bs)
    save_matrix_csv(d / "bs.csv", bs)
    save_matrix_json(d / "tritter.json", tt)
    return d
