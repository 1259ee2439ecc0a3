"""End-to-end acceptance suite.

Each criterion runs at its stated scale and tolerance, records one PASS/FAIL
line (printed in the terminal summary), and asserts. Run alone with
``pytest tests/test_acceptance.py -v``.
"""

import json

import pytest

from lcmbrown import analytics as an
from lcmbrown.cli import main
from lcmbrown.experiments import ExperimentConfig, run
from lcmbrown.oracle import enumerate_log_u_tilde

RESULTS: dict[int, tuple[bool, str]] = {}


def record(k: int, ok: bool, detail: str) -> None:
    RESULTS[k] = (ok, detail)
    print(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
    assert ok, detail


def _metric(report, name, t=None):
    for m in report.metrics:
        if m.metric == name and (t is None or m.t == t):
            return m
    raise KeyError(name)


@pytest.fixture(scope="module")
def clt_report(table):
    cfg = ExperimentConfig("clt", n=10**6, m=10**3, grid=(0.5, 1.0, 2.0), replicas=10_000, seed=7, case="A")
    return run(cfg, table)


def test_criterion_01_cesaro(table):
    rep = run(ExperimentConfig("verify-cesaro", n=10**6, replicas=10**6, seed=1), table)
    m = _metric(rep, "reciprocal_gcd_mean")
    record(1, m.passed, f"E 1/gcd = {m.estimate:.5f}, target {an.CESARO_CONSTANT:.5f} +- 0.003")


def test_criterion_02_subset_uniformity(table):
    rep = run(ExperimentConfig("verify-subset-uniformity", n=5, m=2, replicas=10**5, seed=2), table)
    m = _metric(rep, "chi_square")
    ok = m.estimate < 27.88 and rep.meta["df"] == 9
    record(2, ok, f"chi-square {m.estimate:.3f} < 27.88 on 9 df")


def test_criterion_03_coupon_moments(table):
    rep = run(ExperimentConfig("verify-tau", n=100, m=20, replicas=10**5, seed=7), table)
    bad = [m.metric for m in rep.metrics if not m.passed]
    record(3, not bad, "tau mean/variance and path vs geometric agree within 3 SE" + (f"; failing {bad}" if bad else ""))


def test_criterion_04_oracle_equivalence(table):
    bad = []
    for n, m in [(8, 3), (10, 2), (6, 6), (2, 2)]:
        rep = run(ExperimentConfig("oracle-check", n=n, m=m, replicas=10**5, seed=4), table)
        names = {x.metric for x in rep.metrics}
        if not {"iid_mean", "iid_variance", "subset_mean", "subset_variance"} <= names:
            bad.append((n, m, "missing"))
        bad += [(n, m, x.metric) for x in rep.metrics if not x.passed]
    worst = 0.0
    for n in range(2, 51):
        for mm in range(1, n):
            em, ev = enumerate_log_u_tilde(n, mm, table)
            worst = max(
                worst,
                abs(em - an.exact_mean_log_u_tilde(n, mm, table)),
                abs(ev - an.exact_variance_log_u_tilde(n, mm, table)),
            )
    ok = not bad and worst <= 1e-12
    record(4, ok, f"Monte Carlo within 3 SE of enumeration (failures {bad}); U-tilde formula max error {worst:.2e}")


def test_criterion_05_variance_asymptotics(table):
    ratios = {}
    for n, m in [(10**6, 10**3), (10**6, 10**4), (10**6, 10**5)]:
        ratios[m] = an.exact_variance_log_u_tilde(n, m, table) / an.asymptotic_variance(n, m)
    ok = all(0.7 < r < 1.3 for r in ratios.values())
    text = ", ".join(f"m={m}: {r:.4f}" for m, r in ratios.items())
    record(5, ok, f"exact/asymptotic variance in (0.7, 1.3): {text}")


def test_criterion_06_clt_case_a(clt_report):
    mean = _metric(clt_report, "standardized_mean", 1.0)
    var = _metric(clt_report, "standardized_variance", 1.0)
    ks = _metric(clt_report, "ks_normal", 1.0)
    ok = abs(mean.estimate) < 0.1 and 0.75 < var.estimate < 1.25 and ks.estimate < 0.05
    record(
        6,
        ok,
        f"mean {mean.estimate:.4f} (|.|<0.1), variance {var.estimate:.4f} in (0.75,1.25), KS {ks.estimate:.4f} (<0.05)",
    )


def test_criterion_07_covariance(clt_report):
    m = _metric(clt_report, "covariance_max_abs_deviation")
    record(7, m.estimate < 0.2, f"max |cov - min(s,t)| on (0.5, 1, 2) = {m.estimate:.4f} < 0.2")


def test_criterion_08_clt_subset(table):
    rep = run(ExperimentConfig("clt-subset", n=10**6, m=10**3, replicas=10_000, seed=7), table)
    mean = _metric(rep, "standardized_mean", 1.0)
    var = _metric(rep, "standardized_variance", 1.0)
    ks = _metric(rep, "ks_normal", 1.0)
    ok = abs(mean.estimate) < 0.1 and 0.75 < var.estimate < 1.25 and ks.estimate < 0.05
    record(
        8,
        ok,
        f"mean {mean.estimate:.4f} (|.|<0.1), variance {var.estimate:.4f} in (0.75,1.25), KS {ks.estimate:.4f} (<0.05)",
    )


def test_criterion_09_gap(table):
    vals = {}
    for n, m in [(10**4, 10**2), (10**6, 10**3)]:
        rep = run(ExperimentConfig("gap", n=n, m=m, replicas=2000, seed=9), table)
        vals[(n, m)] = _metric(rep, "gap_mean_over_sqrt_m").estimate
        assert _metric(rep, "z_exceeds_y_count").estimate == 0
    a, b = vals.values()
    factor = max(a, b) / min(a, b)
    ok = factor < 3 and max(a, b) < 10
    record(9, ok, f"gap/sqrt(m) = {a:.3f}, {b:.3f}; factor {factor:.3f} < 3, cap 10")


def test_criterion_10_geometric_model(table):
    rep = run(ExperimentConfig("geom-model", n=10**6, m=10**3, replicas=10_000, seed=10), table)
    vb = _metric(rep, "var_over_b").estimate
    va = _metric(rep, "var_over_a").estimate
    ok = 0.7 < vb < 1.3 and va > 2
    record(10, ok, f"Var Y-hat / b_n = {vb:.4f} in (0.7,1.3); Var Y-hat / a_n = {va:.4f} > 2")


def test_criterion_11_lipschitz(table):
    m = 100
    grid = tuple(k / m for k in range(m + 1))
    rep = run(ExperimentConfig("lipschitz", n=10**4, m=m, grid=grid, replicas=1000, seed=11), table)
    v = _metric(rep, "violations")
    record(11, v.estimate == 0, f"{int(v.estimate)} violations over 1000 paths x {m} consecutive steps")


def test_criterion_12_log_moments(table):
    rep = run(ExperimentConfig("log-moments", n=10**6, replicas=10**6, seed=12), table)
    c2, c4 = _metric(rep, "central2"), _metric(rep, "central4")
    ok = c2.passed and c4.passed
    record(12, ok, f"central2 {c2.estimate:.4f} (1 +- {c2.tolerance:.4f}), central4 {c4.estimate:.4f} (9 +- {c4.tolerance:.4f})")


SMALL = {
    "exact": ["--what", "tau_var", "--n", "100", "--m", "20"],
    "verify-tau": ["--n", "100", "--m", "20", "--replicas", "20000"],
    "verify-subset-uniformity": ["--n", "5", "--m", "2", "--replicas", "20000"],
    "verify-cesaro": ["--n", "1000000", "--replicas", "300000"],
    "clt": ["--n", "100000", "--m", "300", "--t", "0.5,1,2", "--replicas", "2000"],
    "clt-subset": ["--n", "100000", "--m", "300", "--t", "0.5,1", "--replicas", "2000"],
    "gap": ["--n", "100000", "--m", "300", "--replicas", "1000"],
    "geom-model": ["--n", "100000", "--m", "300", "--replicas", "2000"],
    "fixed-m": ["--n", "100000", "--m", "3", "--replicas", "30000", "--p-max", "10000"],
    "oracle-check": ["--n", "8", "--m", "3", "--replicas", "30000"],
    "log-moments": ["--n", "100000", "--replicas", "300000"],
    "lipschitz": ["--n", "10000", "--m", "50", "--t", "0.5,1,1.5,2", "--replicas", "200"],
}


def _report(path):
    text = path.read_text()
    return text[: text.index('"runtime"')], json.loads(text)["runtime"]


def test_criterion_13_determinism(tmp_path, capsys):
    problems = []
    jobs = [(k, v) for k, v in SMALL.items()]
    jobs.append(("clt", ["--case", "A", "--n", "1000000", "--m", "1000", "--t", "1", "--replicas", "10000"]))
    for i, (sub, args) in enumerate(jobs):
        base = [sub, *args, "--seed", "7"]
        heads = []
        for run_id, th in enumerate(("1", "1", "4", "8")):
            out = tmp_path / f"{i}_{run_id}.json"
            main(base + ["--threads", th, "--out", str(out)])
            head, runtime = _report(out)
            assert runtime["threads"] == int(th)
            heads.append(head)
        if heads[0] != heads[1]:
            problems.append(f"{sub}: repeat differs")
        if not heads[0] == heads[2] == heads[3]:
            problems.append(f"{sub}: thread count changes results")
    capsys.readouterr()
    record(13, not problems, f"{len(jobs)} configurations byte-identical across repeats and threads 1/4/8" + (f"; {problems}" if problems else ""))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
