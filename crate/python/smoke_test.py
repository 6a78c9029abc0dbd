"""Smoke test for the calcaudit Python extension.

Build first:
    cargo build -p calcaudit-python --features extension-module
then run:
    python3 python/smoke_test.py
Set CALCAUDIT_LIB to point at a different build of the shared library.
"""

import hashlib
import json
import os
import shutil
import sys
import sysconfig
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"


def find_library():
    if os.environ.get("CALCAUDIT_LIB"):
        return Path(os.environ["CALCAUDIT_LIB"])
    for profile in ("debug", "release"):
        for name in ("libcalcaudit_py.so", "libcalcaudit_py.dylib", "calcaudit_py.dll"):
            candidate = REPO / "target" / profile / name
            if candidate.exists():
                return candidate
    sys.exit("extension not built: cargo build -p calcaudit-python --features extension-module")


def load_module(workdir):
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy(find_library(), Path(workdir) / f"calcaudit{suffix}")
    sys.path.insert(0, workdir)
    import calcaudit

    return calcaudit


def sha256(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def main():
    with tempfile.TemporaryDirectory() as workdir:
        ca = load_module(workdir)
        fixture = FIXTURES / "cashflow.ods"
        before = sha256(fixture)

        wb = ca.Workbook.open(str(fixture))
        assert wb.recording == "enabled"
        assert wb.source_digest == before
        assert len(wb) == 23

        records = wb.changes()
        k22 = next(r for r in records if r.location == "K22")
        assert k22.author == "Neil Smith"
        assert k22.detail == "<empty> -> =K8-K18-K20 {$5,150 (currency)}", k22.detail
        assert len(wb.changes(["+kind=row-insert"])) == 1
        assert len(wb.changes(["-transition=empty->any"])) == 15
        try:
            wb.changes(["+colour=red"])
        except ValueError:
            pass
        else:
            raise AssertionError("invalid filter accepted")

        assert wb.summary().startswith("23 Change Records between: 2003-03-28 and 2003-03-28")
        assert wb.cell("Cash Flow", "E18", at="2003-03-28T21:55:00") == "=SUM(E11:E16)"
        assert wb.cell("Cash Flow", "E18") == "=SUM(E11:E17)"

        boundary = [f for f in wb.scan(at="2003-03-28T21:55:00") if f.check_id == "SA4-range-boundary"]
        assert [f.location for f in boundary] == ["N18"], boundary
        assert json.loads(boundary[0].evidence)["adjacent"] == "N17"

        constant = ca.Workbook.open(str(FIXTURES / "constant.ods")).scan()
        assert constant[0].message == "constant formula evaluates to 6"

        lines = wb.export_changes().splitlines()
        assert len(lines) == 23 and json.loads(lines[0])["author"] == "Neil Smith"

        assert ca.match_wildcard("J* Doe", "Jane Doe")
        assert ca.match_wildcard("J* Doe", "john doe", ignore_case=True)
        assert ca.canonical_formula("=sum( b11 : b17 )") == "=SUM(B11:B17)"
        assert ca.relative_shape("=SUM(B11:B17)", "B18") == ca.relative_shape("=SUM(C11:C17)", "C18")

        nohistory = ca.Workbook.open(str(FIXTURES / "nohistory.ods"))
        assert nohistory.recording == "no-history-found"
        try:
            ca.Workbook.open(str(REPO / "README.md"))
        except OSError:
            pass
        else:
            raise AssertionError("non-spreadsheet accepted")

        assert sha256(fixture) == before
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
