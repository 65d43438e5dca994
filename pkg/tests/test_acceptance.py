"""Acceptance gate: criteria 1-14 at the default profile and stated tolerances.

Each test prints one line "criterion N [STATUS] ..." and the lines are
repeated in the terminal summary.  Runtime is checked against the budget in
verify.RUNTIME_BUDGET (single core).
"""

from __future__ import annotations

import pytest

from halfspace_jump_lab.verify import CRITERIA, RUNTIME_BUDGET, Profile, run_criterion

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.acceptance


@pytest.mark.parametrize("cid", sorted(CRITERIA))
def test_criterion(cid):
    res = run_criterion(cid, Profile())
    ok = res.status == "pass" and res.runtime_s <= RUNTIME_BUDGET[cid]
    line = f"{'PASS' if ok else 'FAIL'}  {res.line()}  budget {RUNTIME_BUDGET[cid]}s"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert res.status == "pass", res.details
    assert res.runtime_s <= RUNTIME_BUDGET[cid]
