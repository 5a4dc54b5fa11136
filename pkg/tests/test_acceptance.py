"""Acceptance criteria; each test prints one PASS/FAIL line (also summarised at session end)."""

import os
import random
import time

import numpy as np
import pytest

import oracle
from conftest import FIXTURES, GOLDEN_DIR, WORKED_FIXTURES, fixture_path
from expected import LEAF_COUNTS, RECALL, STEP1
from scencomplex.analysis import ElementFinding, analyze, score
from scencomplex.cli import main
from scencomplex.coverage import coverage, default_rules, gaps, generate_skeletons, violations
from scencomplex.detectors import DetectorConfig, _runs, detect_occlusions, occlusion_mask
from scencomplex.scenario import ScenarioSyntaxError, parse_scenario, parse_scenario_file, sample_times
from scencomplex.taxonomy import DIMENSIONS, NORMATIVE_PATHS, load_catalog, validate_catalog
from scenes import random_scene


def report(name, ok, detail):
    print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, detail


@pytest.mark.acceptance("catalog completeness")
def test_catalog_completeness(capsys):
    from importlib import resources

    start = time.perf_counter()
    cat = load_catalog(resources.files("scencomplex").joinpath("data/catalog.yaml").read_bytes())
    problems = validate_catalog(cat)
    code = main(["taxonomy", "list"])
    listed = capsys.readouterr().out.split()
    parts = {p: sum(1 for e in cat.entries.values() if e.part == p) for p in ("static_env", "tmz", "actor", "env")}
    elapsed = time.perf_counter() - start
    ok = (
        not problems and code == 0 and listed == sorted(NORMATIVE_PATHS) and len(listed) == 46
        and parts == {"static_env": 17, "tmz": 4, "actor": 23, "env": 2} and elapsed < 1.0
    )
    with capsys.disabled():
        report("catalog completeness", ok, f"{len(listed)} paths, parts {parts}, {len(problems)} problems, {elapsed:.3f} s")


@pytest.mark.acceptance("golden step-1 fidelity")
def test_golden_fidelity(capsys):
    details, ok = [], True
    for name in WORKED_FIXTURES:
        start = time.perf_counter()
        runs = []
        for _ in range(2):
            code = main(["analyze", fixture_path(name), "--format", "markdown", "--no-detect"])
            runs.append((code, capsys.readouterr().out.encode("utf-8")))
        elapsed = time.perf_counter() - start
        with open(os.path.join(GOLDEN_DIR, name + ".md"), "rb") as fh:
            golden = fh.read()
        r = analyze(parse_scenario_file(fixture_path(name)), _catalog(), detect=False)
        leaves = sorted({f.path for f in r.findings})
        good = (
            runs[0][0] == 0 and runs[0] == runs[1] and runs[0][1] == golden
            and leaves == sorted(STEP1[name]) and len(leaves) == LEAF_COUNTS[name]
            and len(r.findings) == sum(STEP1[name].values()) and elapsed / 2 < 1.0
        )
        ok &= good
        details.append(f"{name} {len(leaves)} leaves/{len(r.findings)} findings {elapsed / 2:.3f} s")
    with capsys.disabled():
        report("golden step-1 fidelity", ok, "; ".join(details))


def _catalog():
    from scencomplex.taxonomy import default_catalog

    return default_catalog()


def _raw_runs(s, cfg):
    times = sample_times(s, cfg.dt_sample)
    out = {}
    for target in (a.id for a in s.actors if a.id != "ego"):
        full, _, _ = occlusion_mask(s, "ego", target, times)
        out[target] = [(float(times[i]), float(times[j])) for i, j in _runs(full)]
    return out


@pytest.mark.acceptance("detector-oracle equivalence")
def test_detector_oracle_equivalence(capsys):
    cfg = DetectorConfig()
    start = time.perf_counter()
    problems, events = [], 0
    scenes = [(n, parse_scenario_file(fixture_path(n))) for n in FIXTURES]
    scenes += [(f"random{seed}", random_scene(seed)) for seed in range(1000)]
    for name, s in scenes:
        evs = detect_occlusions(s, cfg)
        events += len(evs)
        truth = oracle.occlusion_runs(s, "ego", cfg.dt_sample)
        problems += [f"{name}: {p}" for p in oracle.compare(_raw_runs(s, cfg), truth, cfg.dt_sample, cfg.occlusion_min_duration)]
        for ev in evs:
            if not any(abs(ev.t0 - a) <= cfg.dt_sample + 1e-9 and abs(ev.t1 - b) <= cfg.dt_sample + 1e-9 for a, b in truth[ev.actors[2]]):
                problems.append(f"{name}: event {ev.t0}-{ev.t1} on {ev.actors[2]} has no oracle run")
    elapsed = time.perf_counter() - start
    ok = not problems and elapsed < 30.0
    with capsys.disabled():
        detail = f"{len(scenes)} scenes, {events} events, {len(problems)} mismatches, {elapsed:.1f} s"
        report("detector-oracle equivalence", ok, detail + ("; first: " + problems[0] if problems else ""))


@pytest.mark.acceptance("detection recall")
def test_detection_recall(capsys):
    missing, found = [], 0
    for name, items in RECALL.items():
        r = analyze(parse_scenario_file(fixture_path(name)), _catalog(), DetectorConfig())
        for path, variant, actor in items:
            hit = [f for f in r.findings if f.path == path and f.variant == variant and actor in f.actors]
            if hit and hit[0].provenance == "both":
                found += 1
            else:
                missing.append(f"{name}:{path}[{variant}]@{actor}")
    total = sum(len(v) for v in RECALL.values())
    with capsys.disabled():
        report("detection recall", not missing, f"{found}/{total} rediscovered" + (f"; missing {missing}" if missing else ""))


@pytest.mark.acceptance("score properties")
def test_score_properties(capsys):
    cat = _catalog()
    paths = list(cat.entries)
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    failures = 0
    for _ in range(10_000):
        n = int(rng.integers(0, 8))
        findings = [ElementFinding(paths[i], None, (f"a{k}",), "declared") for k, i in enumerate(rng.integers(0, 46, n))]
        extra = ElementFinding(paths[int(rng.integers(0, 46))], None, ("extra",), "declared")
        w = {d: float(x) for d, x in zip(DIMENSIONS, rng.uniform(0, 5, 6))}
        c = float(rng.uniform(0.01, 100))
        base, more = score(findings, cat, w), score(findings + [extra], cat, w)
        scaled = score(findings, cat, {d: c * v for d, v in w.items()})
        unit = score(findings, cat)
        ok = (
            all(more.per_dimension[d] >= base.per_dimension[d] for d in DIMENSIONS) and more.total >= base.total
            and abs(scaled.weighted_total - c * base.weighted_total) <= 1e-9 * max(1.0, abs(c * base.weighted_total))
            and scaled.per_dimension == base.per_dimension == unit.per_dimension
            and scaled.primary_hits == base.primary_hits == unit.primary_hits
            and unit.total == sum(unit.per_dimension.values()) and unit.weighted_total == unit.total
        )
        failures += not ok
    elapsed = time.perf_counter() - start
    with capsys.disabled():
        report("score properties", failures == 0 and elapsed < 10.0, f"10000 sets, {failures} violations, {elapsed:.2f} s")


@pytest.mark.acceptance("coverage closure")
def test_coverage_closure(capsys):
    cat = _catalog()
    start = time.perf_counter()
    reports = [analyze(parse_scenario_file(fixture_path(n)), cat) for n in FIXTURES]
    cov = coverage(reports, cat)
    gap_list = gaps(cov, cat)
    rules = default_rules(cat)
    results = []
    for seed in (0, 7, 42):
        a = generate_skeletons(gap_list, cat, rules, seed, 4, cov.per_variant)
        b = generate_skeletons(gap_list, cat, rules, seed, 4, cov.per_variant)
        union = set(cov.covered) | {p for sk in a for p in sk.paths}
        results.append(
            a == b and union == set(NORMATIVE_PATHS)
            and all(violations(sk.paths, rules) == [] and len(sk.elements) <= 4 for sk in a)
            and all(any(p in gap_list for p in sk.paths) for sk in a)
        )
    elapsed = time.perf_counter() - start
    ok = all(results) and elapsed < 5.0
    with capsys.disabled():
        report("coverage closure", ok, f"{len(cov.covered)} covered + {len(gap_list)} gaps closed for seeds 0/7/42, {elapsed:.2f} s")


def _mutate(text, rng):
    lines = text.split("\n")
    op = rng.randrange(9)
    if op == 0 and text:  # delete a character
        i = rng.randrange(len(text))
        return text[:i] + text[i + 1:]
    if op == 1:  # insert a nasty character
        i = rng.randrange(len(text) + 1)
        return text[:i] + rng.choice(['"', "=", "#", "\\", " ", "\n", "x", "-", ".", "\t", "\x00", "é", "1e999"]) + text[i:]
    if op == 2 and text:  # replace a character
        i = rng.randrange(len(text))
        return text[:i] + chr(rng.randrange(32, 127)) + text[i + 1:]
    if op == 3:  # duplicate a line
        i = rng.randrange(len(lines))
        return "\n".join(lines[: i + 1] + [lines[i]] + lines[i + 1:])
    if op == 4:  # drop a line
        i = rng.randrange(len(lines))
        return "\n".join(lines[:i] + lines[i + 1:])
    if op == 5:  # swap two lines
        i, j = rng.randrange(len(lines)), rng.randrange(len(lines))
        lines[i], lines[j] = lines[j], lines[i]
        return "\n".join(lines)
    if op == 6:  # corrupt a value
        i = rng.randrange(len(lines))
        words = lines[i].split(" ")
        k = rng.randrange(len(words))
        if "=" in words[k]:
            key = words[k].split("=", 1)[0]
            words[k] = key + "=" + rng.choice(["", "nan", "-1", "inf", "0", '"', "a,b,,c", "1:0", "3x", "x", "1e308", "0x0"])
        lines[i] = " ".join(words)
        return "\n".join(lines)
    if op == 7:  # truncate
        return text[: rng.randrange(len(text) + 1)]
    # byte noise
    i = rng.randrange(len(text) + 1)
    return text[:i] + "".join(chr(rng.randrange(0, 0x3000)) for _ in range(rng.randrange(1, 5))) + text[i:]


@pytest.mark.acceptance("parser totality")
def test_parser_totality(capsys):
    rng = random.Random(99)
    corpus = [open(fixture_path(n), encoding="utf-8").read() for n in FIXTURES]
    crashes, unpositioned, rejected = [], 0, 0
    start = time.perf_counter()
    for _ in range(10_000):
        text = rng.choice(corpus)
        for _ in range(rng.randrange(1, 4)):
            text = _mutate(text, rng)
        data = text.encode("utf-8", errors="surrogatepass") if rng.random() < 0.5 else text
        if isinstance(data, bytes) and rng.random() < 0.1:
            data = data + bytes([rng.randrange(128, 256)])
        try:
            parse_scenario(data)
        except ScenarioSyntaxError as exc:
            rejected += 1
            if not exc.diagnostics or any(d.line is None or d.column is None for d in exc.diagnostics):
                unpositioned += 1
        except Exception as exc:  # noqa: BLE001 - any other exception is a crash
            crashes.append(f"{type(exc).__name__}: {exc}")
    elapsed = time.perf_counter() - start
    ok = not crashes and unpositioned == 0
    with capsys.disabled():
        detail = f"10000 mutants, {rejected} rejected with diagnostics, {unpositioned} unpositioned, {len(crashes)} crashes, {elapsed:.1f} s"
        report("parser totality", ok, detail + (f"; first: {crashes[0]}" if crashes else ""))
