import math

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from conftest import FIXTURES, fixture_path
from scencomplex.scenario import (
    ScenarioSyntaxError,
    parse_scenario,
    parse_scenario_file,
    pose_at,
    sample_times,
    serialize_scenario,
    tokenize_line,
    validate_scenario,
)

BASE = """scenario "t1" "Test"
road lanes=2 lane_width=3.5
actor id=ego class=vehicle subtype=car dims=4.5x1.8
track actor=ego t=0 x=0 y=1.75
track actor=ego t=2 x=20 y=1.75
"""


def _errors(text):
    with pytest.raises(ScenarioSyntaxError) as exc:
        parse_scenario(text)
    return exc.value.diagnostics


def test_minimal_scenario():
    s = parse_scenario(BASE)
    assert s.id == "t1" and s.title == "Test"
    assert s.road.width == 7.0
    assert s.time_domain == (0.0, 2.0)
    assert [a.id for a in s.actors] == ["ego"]


@pytest.mark.parametrize("name", FIXTURES)
def test_fixtures_parse_and_validate(name, catalog):
    s = parse_scenario_file(fixture_path(name))
    assert validate_scenario(s, catalog) == []
    assert parse_scenario(serialize_scenario(s)) == s


def test_missing_header_road_and_ego():
    diags = _errors("actor id=a class=vehicle subtype=car dims=1x1\ntrack actor=a t=0 x=0 y=0\n")
    messages = [d.message for d in diags]
    assert "missing scenario header" in messages
    assert "missing road statement" in messages
    assert any("missing ego" in m for m in messages)


def test_ego_must_be_vehicle():
    text = BASE.replace("class=vehicle", "class=pedestrian")
    assert any("ego must have class vehicle" in d.message for d in _errors(text))


def test_actor_without_samples():
    diags = _errors(BASE + "actor id=v class=vehicle subtype=car dims=4x2\n")
    assert any(d.message == "actor 'v' has no track samples" and d.line == 6 for d in diags)


def test_undeclared_actor_reference():
    diags = _errors(BASE + "track actor=ghost t=0 x=1 y=1\nelement path=env.other actors=ghost2\n")
    messages = " ".join(d.message for d in diags)
    assert "undeclared actor 'ghost'" in messages and "undeclared actor 'ghost2'" in messages


def test_track_time_must_increase():
    diags = _errors(BASE + "track actor=ego t=2 x=30 y=1.75\n")
    assert diags[0].line == 6 and "must increase" in diags[0].message
    assert diags[0].column == 17


def test_signal_time_must_increase():
    text = BASE + "signal t=1 approach=a phase=red\nsignal t=1 approach=a phase=green\n"
    assert any("must increase" in d.message for d in _errors(text))


def test_duplicate_stopline():
    text = BASE + "stopline approach=a x=1\nstopline approach=a x=2\n"
    assert any("duplicate stopline" in d.message for d in _errors(text))


def test_bad_values_are_positioned():
    diags = _errors(BASE + "road lanes=0 lane_width=-1 junction=maybe\n")
    cols = {d.message.split(" ")[0]: d.column for d in diags if d.line == 6}
    assert cols["lanes"] == 6
    assert cols["lane_width"] == 14


def test_all_diagnostics_collected():
    text = BASE + "bogus x=1\nactor id=1bad class=car subtype=x dims=0x1\n"
    diags = _errors(text)
    assert len(diags) >= 4
    assert diags == sorted(diags, key=lambda d: (d.line, d.column, d.message))


def test_lexer_unterminated_string():
    diags = []
    tokenize_line('note "abc', 3, diags)
    assert diags[0].message == "unterminated string" and diags[0].column == 6
    diags = []
    tokenize_line('element path=env.other note="x', 1, diags)
    assert diags[0].message == "unterminated string"


def test_lexer_tokens_need_whitespace():
    diags = []
    tokenize_line('note "a""b"', 1, diags)
    assert diags


def test_strings_and_comments():
    s = parse_scenario(BASE + 'note "say \\"hi\\" # not a comment"  # comment\n')
    assert s.notes == ('say "hi" # not a comment',)


def test_invalid_utf8():
    with pytest.raises(ScenarioSyntaxError) as exc:
        parse_scenario(BASE.encode() + b"\xff\n")
    assert exc.value.diagnostics[0].line == 6


def test_validate_unknown_path_and_class_mismatch(catalog):
    s = parse_scenario(BASE + "element path=actor.pedestrian.type actors=ego\nelement path=env.visib\n"
                       "element path=env.visibility variant=fog\n")
    messages = [d.message for d in validate_scenario(s, catalog)]
    assert any("expects a pedestrian actor" in m for m in messages)
    assert any("unknown element path env.visib" in m and "env.visibility" in m for m in messages)
    assert any("variant 'fog'" in m for m in messages)


# Kinematics ------------------------------------------------------------------------------

def test_pose_interpolation_and_clamping():
    s = parse_scenario(BASE)
    assert pose_at(s, "ego", 1.0).x == pytest.approx(10.0)
    assert pose_at(s, "ego", 1.0).speed == pytest.approx(10.0)
    assert pose_at(s, "ego", -5).x == 0.0
    assert pose_at(s, "ego", 9).x == 20.0
    assert pose_at(s, "ego", 1.0).heading == pytest.approx(0.0)


def test_single_sample_is_static_with_explicit_heading():
    s = parse_scenario(BASE + "actor id=v class=vehicle subtype=car dims=4x2\ntrack actor=v t=0 x=5 y=5 heading=1.5\n")
    p = pose_at(s, "v", 1.0)
    assert (p.x, p.y, p.heading, p.speed) == (5.0, 5.0, 1.5, 0.0)


def test_explicit_heading_interpolated():
    text = BASE + ("actor id=v class=vehicle subtype=car dims=4x2\n"
                   "track actor=v t=0 x=0 y=0 heading=0\ntrack actor=v t=1 x=1 y=0 heading=1\n")
    assert pose_at(parse_scenario(text), "v", 0.5).heading == pytest.approx(0.5)


def test_sample_times_grid():
    s = parse_scenario(BASE)
    t = sample_times(s, 0.1)
    assert len(t) == 21 and t[0] == 0.0 and t[-1] == pytest.approx(2.0)


@pytest.mark.parametrize("name", FIXTURES)
def test_positions_are_continuous(name):
    s = parse_scenario_file(fixture_path(name))
    times = np.linspace(*s.time_domain, 2001)
    step = times[1] - times[0]
    for a in s.actors:
        x, y = s.kinematics(a.id).xy(times)
        jumps = np.hypot(np.diff(x), np.diff(y))
        vmax = max([smp.speed or 0 for smp in s.tracks[a.id]] + [60.0])
        assert np.all(jumps <= vmax * step + 1e-9)


# Round trip -------------------------------------------------------------------------------

_ident = st.from_regex(r"[a-z][a-z0-9_]{0,6}", fullmatch=True)
_num = st.floats(-1e4, 1e4, allow_nan=False, allow_infinity=False)
_text = st.text(st.characters(blacklist_categories=("Cs", "Cc")), max_size=20)


@st.composite
def scenarios(draw):
    lines = [f'scenario "{draw(_ident)}" {serialize_str(draw(_text))}',
             f"road lanes={draw(st.integers(1, 6))} lane_width={draw(st.floats(0.5, 5))!r}"]
    ids = ["ego"] + sorted(set(draw(st.lists(_ident, max_size=3))) - {"ego"})
    for i, actor in enumerate(ids):
        cls = "vehicle" if actor == "ego" else draw(st.sampled_from(["vehicle", "pedestrian", "object"]))
        lines.append(f"actor id={actor} class={cls} subtype=x{i} dims={draw(st.floats(0.1, 20))!r}x{draw(st.floats(0.1, 5))!r}")
        times = sorted(set(draw(st.lists(st.floats(0, 100), min_size=1, max_size=4))))
        for t in times:
            extra = ""
            if draw(st.booleans()):
                extra += f" heading={draw(st.floats(-3.1, 3.1))!r}"
            if draw(st.booleans()):
                extra += f" speed={draw(st.floats(0, 40))!r}"
            lines.append(f"track actor={actor} t={t!r} x={draw(_num)!r} y={draw(_num)!r}{extra}")
    for _ in range(draw(st.integers(0, 2))):
        lines.append(f"element path=env.other actors={draw(st.sampled_from(ids))} note={serialize_str(draw(_text))}")
    if draw(st.booleans()):
        lines.append(f"note {serialize_str(draw(_text))}")
    return "\n".join(lines) + "\n"


def serialize_str(text):
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


@settings(max_examples=150, deadline=None)
@given(scenarios())
def test_round_trip_property(text):
    s = parse_scenario(text)
    again = parse_scenario(serialize_scenario(s))
    assert again == s
    assert serialize_scenario(again) == serialize_scenario(s)


@settings(max_examples=100, deadline=None)
@given(scenarios(), st.floats(-10, 120))
@example(BASE + "actor id=c class=vehicle subtype=x dims=1x1\ntrack actor=c t=0 x=0 y=0\n"
         "track actor=c t=5e-324 x=0 y=1\n", 0.0)
def test_pose_is_finite(text, t):
    s = parse_scenario(text)
    for a in s.actors:
        p = pose_at(s, a.id, t)
        assert all(math.isfinite(v) for v in p)
