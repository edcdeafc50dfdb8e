import math

import pytest
from hypothesis import given, strategies as st

from cooldown.schedule import (
    COSINE, LINEAR, MIRROR_COSINE, ONE_MINUS_SQRT, ONE_MINUS_SQUARE, CooldownShape, ScheduleError,
    ScheduleSpec, check, fmt_float, lr_at, read_table_csv, schedule_table, shape_multiplier, table_to_csv, validate,
)

SHAPES = [LINEAR, ONE_MINUS_SQRT, COSINE, MIRROR_COSINE, ONE_MINUS_SQUARE, CooldownShape("power", 0.3),
          CooldownShape("power", 1.0)]

shapes = st.sampled_from(SHAPES) | st.floats(0.01, 1.0).map(lambda a: CooldownShape("power", a))


def test_shape_examples():
    assert shape_multiplier(LINEAR, 0.5) == 0.5
    assert shape_multiplier(ONE_MINUS_SQRT, 0.25) == 0.5
    assert shape_multiplier(ONE_MINUS_SQUARE, 0.5) == 0.75


@pytest.mark.parametrize("shape", SHAPES, ids=str)
def test_shape_endpoints(shape):
    assert shape_multiplier(shape, 0.0) == 1.0
    assert shape_multiplier(shape, 1.0) == 0.0


@pytest.mark.parametrize("x", [-1e-12, 1.0 + 1e-12, 2.0])
def test_shape_domain(x):
    with pytest.raises(ScheduleError):
        shape_multiplier(LINEAR, x)


@given(shapes, st.floats(0, 1), st.floats(0, 1))
def test_shapes_non_increasing(shape, x, y):
    lo, hi = min(x, y), max(x, y)
    assert shape_multiplier(shape, hi) <= shape_multiplier(shape, lo) + 1e-15


@given(st.floats(0, 1))
def test_power_half_is_one_minus_sqrt(x):
    assert shape_multiplier(CooldownShape("power", 0.5), x) == shape_multiplier(ONE_MINUS_SQRT, x)


@given(st.floats(0, 1))
def test_mirror_cosine_is_reflection(x):
    lhs = shape_multiplier(MIRROR_COSINE, x) + shape_multiplier(COSINE, x)
    assert lhs == pytest.approx(2 * shape_multiplier(LINEAR, x), abs=1e-15)


def test_power_one_is_linear():
    xs = [i / 1000 for i in range(1001)]
    dev = max(abs(shape_multiplier(CooldownShape("power", 1.0), x) - (1 - x)) for x in xs)
    assert dev < 1e-6


def test_shape_parse_roundtrip():
    for s in SHAPES:
        assert CooldownShape.parse(str(s)) == s
    with pytest.raises(ScheduleError):
        CooldownShape.parse("power:1.5")
    with pytest.raises(ScheduleError):
        CooldownShape.parse("quadratic")


def test_lr_examples():
    cd = ScheduleSpec("constant_cooldown", 1e-3, 1000, 300, 200, shape=ONE_MINUS_SQRT)
    assert lr_at(cd, 150) == pytest.approx(5e-4, rel=1e-15)
    assert lr_at(cd, 850) == pytest.approx(0.5e-3, rel=1e-15)
    for n in range(301, 801):
        assert lr_at(cd, n) == 1e-3
    cos = ScheduleSpec("cosine", 1e-3, 1000, 300, final_lr_fraction=0.1)
    assert lr_at(cos, 1000) == pytest.approx(1e-4, rel=1e-12)


def test_lr_domain():
    spec = ScheduleSpec("constant", 1e-3, 100, 10)
    for bad in (-1, 101):
        with pytest.raises(ScheduleError):
            lr_at(spec, bad)


specs = st.builds(
    lambda kind, peak, n, wfrac, dfrac, frac, shape: ScheduleSpec(
        kind, peak, n, int(wfrac * (n - 1)),
        int(dfrac * (n - int(wfrac * (n - 1)))) if kind == "constant_cooldown" else 0,
        frac, shape),
    st.sampled_from(["cosine", "constant", "constant_cooldown"]),
    st.floats(1e-6, 10), st.integers(1, 3000), st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.99), shapes,
)


@given(specs)
def test_generated_specs_valid(spec):
    assert validate(spec) == []


@given(specs)
def test_warmup_up_then_down(spec):
    lrs = [lr_at(spec, n) for n in range(spec.total_steps + 1)]
    w = spec.warmup_steps
    assert all(a <= b for a, b in zip(lrs[: w + 1], lrs[1 : w + 1]))
    assert all(b <= a for a, b in zip(lrs[w:], lrs[w + 1 :]))
    assert all(x >= 0 for x in lrs)


@given(specs)
def test_phase_boundaries_exact(spec):
    assert lr_at(spec, spec.warmup_steps) == spec.peak_lr
    if spec.kind == "constant_cooldown":
        assert lr_at(spec, spec.decay_start) == spec.peak_lr


@given(st.floats(1e-6, 1), st.integers(2, 500), st.data())
def test_zero_decay_equals_constant(peak, n, data):
    w = data.draw(st.integers(0, n - 1))
    a = ScheduleSpec("constant_cooldown", peak, n, w, 0)
    b = ScheduleSpec("constant", peak, n, w)
    assert [lr_at(a, i) for i in range(n + 1)] == [lr_at(b, i) for i in range(n + 1)]


def test_cosine_to_zero():
    spec = ScheduleSpec("cosine", 3e-3, 500, 50, final_lr_fraction=0.0)
    assert lr_at(spec, 500) == pytest.approx(0.0, abs=1e-18)


def test_validate_examples():
    codes = lambda s: [v.code for v in validate(s)]
    assert "warmup_exceeds_total" in codes(ScheduleSpec("constant", 1e-3, 100, 100))
    assert [v.message for v in validate(ScheduleSpec("constant", 0.0, 100, 10))] == ["non-positive peak"]
    assert validate(ScheduleSpec("constant_cooldown", 1e-3, 100, 10, 90)) == []
    assert "decay_exceeds_available" in codes(ScheduleSpec("constant_cooldown", 1e-3, 100, 10, 91))
    assert "decay_not_applicable" in codes(ScheduleSpec("cosine", 1e-3, 100, 10, 5))
    assert "unknown_kind" in codes(ScheduleSpec("wsd", 1e-3, 100, 10))
    assert "bad_final_fraction" in codes(ScheduleSpec("cosine", 1e-3, 100, 10, final_lr_fraction=1.0))
    # several problems are all reported, none raised
    assert len(validate(ScheduleSpec("nope", -1.0, 100, -3, -1))) >= 3
    with pytest.raises(ScheduleError):
        check(ScheduleSpec("constant", 1e-3, 0, 0))


def test_table():
    spec = ScheduleSpec("constant_cooldown", 1e-3, 1000, 300, 200)
    assert [n for n, _ in schedule_table(spec, 1000)] == [0, 1000]
    t = schedule_table(spec, 1)
    assert len(t) == 1001
    assert all(lr == lr_at(spec, n) for n, lr in t)
    t7 = schedule_table(spec, 7)
    assert t7[-1][0] == 1000 and t7[-2][0] == 994
    with pytest.raises(ScheduleError):
        schedule_table(spec, 0)


def test_table_csv_roundtrip():
    spec = ScheduleSpec("cosine", 1e-3, 777, 31)
    rows = schedule_table(spec, 5)
    text = table_to_csv(rows)
    assert text.startswith("step,lr\n") and "\r" not in text
    assert read_table_csv(text) == rows


@given(st.floats(min_value=1e-30, max_value=1e30, allow_subnormal=False))
def test_fmt_float_roundtrip_and_digits(x):
    s = fmt_float(x)
    assert float(s) == x
    assert "e" not in s.lower()
    digits = s.replace(".", "").replace("-", "").lstrip("0")
    assert len(digits) >= 12
