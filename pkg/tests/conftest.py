import csv

import numpy as np
import pytest

from localsurrogate.dataset import BINARY, CATEGORICAL, NUMERIC, FeatureSchema, from_columns


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)
    return path


@pytest.fixture
def csv_writer(tmp_path):
    def _write(header, rows, name="data.csv"):
        return write_csv(tmp_path / name, header, rows)
    return _write


def random_mixed(n, seed, n_num=2, cat_sizes=(3,), n_bin=1):
    """Random mixed-type dataset with a noisy linear target."""
    rng = np.random.default_rng(seed)
    feats, cols = [], {}
    y = rng.normal(0, 0.1, n)
    for j in range(n_num):
        name = f"n{j}"
        feats.append((name, NUMERIC))
        cols[name] = rng.normal(0, 1, n)
        y += (j + 1) * cols[name]
    for j, k in enumerate(cat_sizes):
        name = f"c{j}"
        feats.append((name, CATEGORICAL))
        codes = rng.integers(0, k, n)
        cols[name] = [f"v{c}" for c in codes]
        y += codes
    for j in range(n_bin):
        name = f"b{j}"
        feats.append((name, BINARY))
        cols[name] = rng.integers(0, 2, n)
        y -= cols[name]
    cols["y"] = y
    return from_columns(FeatureSchema(tuple(feats), "y"), cols)


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "ran": 0})
    if rep.failed or rep.skipped:
        entry["ok"] = False
    if rep.when == "call" and rep.passed:
        entry["ran"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["ok"] and entry["ran"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {entry['title']}")
