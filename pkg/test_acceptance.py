"""
Acceptance-size runs of every preset and probe; enable with --runslow
"""
import pytest

from bridge_trunc.core.presets import PRESETS, run_preset
from bridge_trunc.core.probes import ProbeKind, moment_probe

pytestmark = pytest.mark.slow

SEED = 42
CENTRE = (0.5, 0.5)


def _centre_comparison(report):
    return next(c for c in report.comparisons if c.p == c.q and c.p[0] == 0.5 and c.p[1] in (0.0, 0.5))


@pytest.mark.parametrize("name", [name for name in PRESETS])
def test_preset_passes(name):
    report = run_preset(name, {"master_seed": SEED}, threads=4)
    assert report.verdict, report.model_dump_json(indent=2)


@pytest.mark.parametrize("name,ensemble,expected", [
    ("lemma-3.1", "orthogonal", 0.5),
    ("thm-3.2-annealed", "unitary", 0.5),
    ("thm-3.2-annealed", "orthogonal", 0.75),
    ("thm-3.2-quenched", "orthogonal", 0.5),
    ("thm-3.4-det", "orthogonal", 0.125),
    ("thm-3.5-quenched", "orthogonal", 0.125),
    ("thm-3.5-annealed", "orthogonal", 0.125),
])
def test_orthogonal_prefactors(name, ensemble, expected):
    report = run_preset(name, {"master_seed": SEED, "ensemble": ensemble}, threads=4)
    assert report.verdict
    assert _centre_comparison(report).limit == pytest.approx(expected)


def test_copula_for_identity_and_random_permutation():
    for identity in (True, False):
        report = run_preset("sec-5.3-copula", {"master_seed": SEED, "identity_permutation": identity}, 4)
        assert report.verdict


@pytest.mark.parametrize("kind,ensemble,n,replicates", [
    (ProbeKind.FOURTH_MOMENT, "unitary", 100, 10_000),
    (ProbeKind.FOURTH_MOMENT, "orthogonal", 100, 10_000),
    (ProbeKind.SIXTH_MOMENT, "unitary", 100, 10_000),
    (ProbeKind.QUADRATIC_FORM, "unitary", 200, 2000),
    (ProbeKind.CONDITIONAL_VARIANCE, "unitary", 100, 100_000),
])
def test_moment_probes(kind, ensemble, n, replicates):
    report = moment_probe(kind, n, SEED, ensemble, replicates, threads=4)
    assert report.verdict
    assert not report.warnings


@pytest.mark.parametrize("name", ["thm-3.3-dft", "thm-3.7-annealed", "prop-4.1-subordination"])
def test_thread_count_does_not_change_reports(name):
    single = run_preset(name, {"master_seed": SEED}, threads=1)
    many = run_preset(name, {"master_seed": SEED}, threads=8)
    assert single.model_dump_json() == many.model_dump_json()
