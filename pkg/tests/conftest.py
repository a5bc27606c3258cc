"""Collects acceptance outcomes and prints one line per criterion at the end of the session."""

CRITERIA = {
    1: "operator identities on random periodic grid functions",
    2: "banded solver against dense elimination and large-n residual",
    3: "per-step energy ledger and periodic mass conservation",
    4: "one-soliton error table magnitude and rates",
    5: "first-order self-convergence for N >= 2000",
    6: "two-soliton overtaking profile and error range",
    7: "L2-data refinement differences and local smoothing budget",
    8: "exact solutions satisfy KdV to finite-difference accuracy",
    9: "cell entropy inequality on random stable states",
}

RESULTS: dict = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    RESULTS[criterion] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k, title in CRITERIA.items():
        if k in RESULTS:
            ok, detail = RESULTS[k]
            tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {k}: {title} | {detail}")
        else:
            tr.write_line(f"[NOT RUN] criterion {k}: {title}")
