import io

from floquet_lie import run_selftest
from floquet_lie.selftest import flipped_ad_star


def test_quick_suite_passes():
    stream = io.StringIO()
    results = run_selftest(stream, quick=True)
    assert results
    assert all(r.passed for r in results), [r.name for r in results if not r.passed]
    assert stream.getvalue().splitlines()[-1] == f"{len(results)}/{len(results)} checks passed"


def test_table_is_deterministic():
    first, second = io.StringIO(), io.StringIO()
    run_selftest(first, quick=True)
    run_selftest(second, quick=True)
    assert first.getvalue() == second.getvalue()


def test_flipped_coadjoint_sign_is_caught():
    stream = io.StringIO()
    with flipped_ad_star():
        results = run_selftest(stream, quick=True)
    failed = {r.name for r in results if not r.passed}
    assert {"SO3 kirillov antisymmetry", "SL2R kirillov antisymmetry"} <= failed
    assert "FAIL" in stream.getvalue()
    # the sign is restored on exit
    assert all(r.passed for r in run_selftest(io.StringIO(), quick=True))


def test_full_suite_includes_the_pipeline():
    results = run_selftest(io.StringIO())
    names = [r.name for r in results]
    assert "splitting k = k_dyn + k_geom" in names
    assert all(r.passed for r in results), [r.name for r in results if not r.passed]
