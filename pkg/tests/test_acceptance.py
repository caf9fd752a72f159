"""End-to-end acceptance run: the desk suite at seed 7, executed twice.

Each criterion prints one PASS/FAIL line. Hard records must pass; soft
records are only reported. Run directly with ``python3 tests/test_acceptance.py``
or through pytest (the lines then appear in the terminal summary).
"""
from __future__ import annotations

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import pytest

SEED = 7

# criterion number -> (title, claim prefixes)
CRITERIA = {
    1: ("two-sampler equivalence", ("sampler-equivalence",)),
    2: ("Haar limit of the moment approximation", ("haar-limit",)),
    3: ("relative-error trend in the background rank", ("relerr-",)),
    4: ("rescaled Porter-Thomas moments", ("pt-",)),
    5: ("Wishart joint moments", ("wishart-",)),
    6: ("quantized output CMI", ("cmi-",)),
    7: ("subentropy bounds and Gaussian identity", ("subentropy-",)),
    8: ("noiseless outputs far in TVD", ("tvd-far",)),
    9: ("readout noise collapses the TVD", ("noise-collapse",)),
    10: ("subsystem collapse", ("subsystem-",)),
    11: ("laws of the Haar weight r", ("rdist-",)),
    12: ("entropy property suite", ("entropy-", "sstar-")),
    13: ("cardinality lower bound", ("cardinality-",)),
}

REPORT: list[str] = []


def run_suite(out_dir: Path) -> int:
    cmd = [sys.executable, "-m", "scrooge.cli", "suite", "--level", "desk", "--seed", str(SEED), "--out-dir", str(out_dir)]
    return subprocess.run(cmd, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL).returncode


def load_records(out_dir: Path) -> list[dict]:
    return [json.loads(line) for line in (out_dir / "suite.jsonl").read_text().splitlines()]


def select(records: list[dict], prefixes) -> list[dict]:
    return [r for r in records if r["claim"].startswith(tuple(prefixes))]


def line_for(num: int, title: str, recs: list[dict]) -> str:
    hard = [r for r in recs if r["hard"]]
    bad = [r["claim"] for r in hard if not r["pass"]]
    soft_bad = [r["claim"] for r in recs if not r["hard"] and not r["pass"]]
    tag = "PASS" if hard and not bad else "FAIL"
    msg = f"{tag} criterion {num:2d} {title}: {len(hard) - len(bad)}/{len(hard)} hard records pass"
    if bad:
        msg += f"; failing {', '.join(bad)}"
    if soft_bad:
        msg += f"; soft misses {len(soft_bad)}"
    return msg


def identical_outputs(a: Path, b: Path) -> list[str]:
    """Names of files that differ (or are missing) between two output directories."""
    names = sorted({p.name for p in a.iterdir()} | {p.name for p in b.iterdir()})
    return [n for n in names if not (a / n).exists() or not (b / n).exists() or (a / n).read_bytes() != (b / n).read_bytes()]


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("acceptance")
    codes = [run_suite(base / "run1"), run_suite(base / "run2")]
    return base / "run1", base / "run2", codes


@pytest.mark.parametrize("num", sorted(CRITERIA))
def test_criterion(runs, num):
    run1, _, codes = runs
    assert codes[0] in (0, 1), f"suite exited with {codes[0]}"
    title, prefixes = CRITERIA[num]
    recs = select(load_records(run1), prefixes)
    line = line_for(num, title, recs)
    REPORT.append(line)
    print(line)
    assert recs, f"no records for criterion {num}"
    failing = [r["claim"] for r in recs if r["hard"] and not r["pass"]]
    assert not failing, failing


def test_criterion_14_determinism(runs):
    run1, run2, codes = runs
    diff = identical_outputs(run1, run2)
    ok = not diff and codes[0] == codes[1]
    line = f"{'PASS' if ok else 'FAIL'} criterion 14 determinism: {len(list(run1.iterdir()))} output files byte-identical across two runs"
    if diff:
        line += f"; differing {', '.join(diff)}"
    REPORT.append(line)
    print(line)
    assert ok, diff


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        base = Path(tmp)
        codes = [run_suite(base / "run1"), run_suite(base / "run2")]
        records = load_records(base / "run1")
        ok = True
        for num, (title, prefixes) in CRITERIA.items():
            line = line_for(num, title, select(records, prefixes))
            ok &= line.startswith("PASS")
            print(line)
        diff = identical_outputs(base / "run1", base / "run2")
        same = not diff and codes[0] == codes[1]
        ok &= same
        print(f"{'PASS' if same else 'FAIL'} criterion 14 determinism" + (f": differing {', '.join(diff)}" if diff else ""))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
