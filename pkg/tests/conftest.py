import pytest

from undertext.stack import normalize_stack
from undertext.synthetic import make_palimpsest, write_page_fixture


@pytest.fixture(scope="session")
def small_page():
    """A 96x96, 6-band page: fast enough for every test that needs imagery."""
    return make_palimpsest(96, 96, bands=6, seed=1, eval_per_class=40)


@pytest.fixture(scope="session")
def small_stack(small_page):
    return normalize_stack(small_page.stack)


@pytest.fixture(scope="session")
def page_dir(tmp_path_factory, small_page):
    """The same page written to disk the way the CLI consumes it."""
    directory = tmp_path_factory.mktemp("page")
    paths = write_page_fixture(small_page, directory)
    return directory, paths
