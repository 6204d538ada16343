import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segeo.geometry import Mode
from segeo.stimuli import (
    GENERATORS,
    CapacityError,
    Stimulus,
    StimulusError,
    StimulusParseError,
    gen_collinear_segments,
    gen_contrast_square,
    gen_curve_line,
    gen_fhh,
    gen_kanizsa_bar,
    gen_kanizsa_square,
    gen_kanizsa_triangle,
    gen_zigzag,
    is_mouth_edge,
    parse_stimulus,
    serialize_stimulus,
)


def axial_diff(a, b, period=math.pi):
    """Smallest difference between two line orientations (mod ``period``)."""
    d = (a - b) % period
    return min(d, period - d)


def chains(s):
    """Mouth-edge chains keyed by label."""
    out = {}
    for i, lab in enumerate(s.labels):
        if is_mouth_edge(lab):
            out.setdefault(lab, []).append(i)
    return out


def line_residual(s, idx_a, idx_b):
    """Worst angular deviation (degrees) of two chains from one common line."""
    pts = np.column_stack([s.xs, s.ys])
    worst = 0.0
    for i in idx_a:
        for j in idx_b:
            d = pts[j] - pts[i]
            direction = math.atan2(d[1], d[0])
            worst = max(worst, axial_diff(s.thetas[i], s.thetas[j]), axial_diff(s.thetas[i], direction),
                        axial_diff(s.thetas[j], direction))
    return math.degrees(worst)


def inducer_of(label):
    return int(label.split("-")[1])


def facing_pairs(s):
    """For each chain, the chain of another inducer that best continues it."""
    ch = chains(s)
    pairs = set()
    for a in ch:
        others = [b for b in ch if inducer_of(b) != inducer_of(a)]
        best = min(others, key=lambda b: line_residual(s, ch[a], ch[b]))
        pairs.add(tuple(sorted((a, best))))
    return pairs, ch


# --------------------------------------------------------------------------
# contour in noise


def test_fhh_zero_turn_is_collinear():
    s, _ = gen_fhh(angle_step=0, n_background=5, seed=2)
    path = sorted(s.indices("path"))
    assert len(path) == 12
    assert all(s.thetas[i] == s.thetas[path[0]] for i in path)
    x0, y0, t0 = s.elements[path[0]]
    for i in path:
        dx, dy = s.xs[i] - x0, s.ys[i] - y0
        assert abs(-math.sin(t0) * dx + math.cos(t0) * dy) < 1e-9


def test_fhh_total_turning_matches_turn_sequence():
    s, turns = gen_fhh(n_path=12, angle_step=30, n_background=0, turn_signs="positive", seed=4)
    th = np.unwrap(s.thetas)
    steps = np.diff(th)
    assert np.allclose(steps, turns, atol=1e-12)
    assert abs(sum(turns)) == pytest.approx(math.radians(11 * 30), abs=1e-12)


def test_fhh_alternating_and_random_signs():
    _, alt = gen_fhh(n_background=0, seed=0)
    assert np.all(np.sign(alt[:-1]) == -np.sign(alt[1:]))
    _, rnd = gen_fhh(n_background=0, seed=0, turn_signs="random")
    assert set(np.abs(np.round(np.degrees(rnd), 9))) == {15.0}
    with pytest.raises(StimulusError):
        gen_fhh(turn_signs="sideways")


def test_fhh_steps_are_cocircular():
    s, _ = gen_fhh(angle_step=40, n_background=0, seed=1)
    for i in range(len(s) - 1):
        d = math.atan2(s.ys[i + 1] - s.ys[i], s.xs[i + 1] - s.xs[i])
        mid = s.thetas[i] + 0.5 * axial_signed(s.thetas[i + 1], s.thetas[i])
        assert axial_diff(d, mid, 2 * math.pi) < 1e-9
        assert math.hypot(s.xs[i + 1] - s.xs[i], s.ys[i + 1] - s.ys[i]) == pytest.approx(6.0)


def axial_signed(a, b):
    return (a - b + math.pi) % (2 * math.pi) - math.pi


def test_fhh_deterministic_and_separated():
    a, _ = gen_fhh(seed=9)
    b, _ = gen_fhh(seed=9)
    assert a == b
    assert a != gen_fhh(seed=10)[0]
    pts = np.column_stack([a.xs, a.ys])
    bg = sorted(a.indices("background"))
    for i in bg:
        d = np.hypot(*(pts - pts[i]).T)
        d[i] = np.inf
        assert d.min() >= 6.0


def test_fhh_capacity_error():
    with pytest.raises(CapacityError):
        gen_fhh(n_background=400, field=(40, 40), min_sep=6, max_tries=50)
    with pytest.raises(StimulusError):
        gen_fhh(n_path=1)


# --------------------------------------------------------------------------
# inducer figures


def test_square_aligned_edges_collinear():
    s = gen_kanizsa_square()
    pairs, ch = facing_pairs(s)
    assert len(ch) == 8
    assert len(pairs) == 4
    for a, b in pairs:
        assert line_residual(s, ch[a], ch[b]) < 1e-7
        # facing elements share their orientation exactly
        assert axial_diff(s.thetas[ch[a][0]], s.thetas[ch[b][0]], 2 * math.pi) < 1e-9


def test_square_mouth_angle_bends_edges():
    s0 = gen_kanizsa_square()
    pairs, _ = facing_pairs(s0)
    s = gen_kanizsa_square(mouth_angle=20)
    ch = chains(s)
    for a, b in pairs:
        d = axial_diff(s.thetas[ch[a][0]], s.thetas[ch[b][0]], 2 * math.pi)
        assert math.degrees(d) == pytest.approx(40.0, abs=1e-9)


def test_square_rotation_jitter_breaks_alignment():
    s = gen_kanizsa_square(rotation_jitter=45)
    ch = chains(s)
    worst_best = min(
        line_residual(s, ch[a], ch[b]) for a, b in itertools.combinations(ch, 2) if inducer_of(a) != inducer_of(b)
    )
    assert worst_best > 10.0


def test_square_and_triangle_validation():
    with pytest.raises(StimulusError):
        gen_kanizsa_square(side=50, inducer_radius=30)
    with pytest.raises(StimulusError):
        gen_kanizsa_square(elements_per_edge=0)
    with pytest.raises(StimulusError):
        gen_kanizsa_square(mouth_angle=45)
    with pytest.raises(StimulusError):
        gen_kanizsa_triangle(side=60, inducer_radius=40)


def test_triangle_six_chains_pairwise_collinear():
    s = gen_kanizsa_triangle()
    pairs, ch = facing_pairs(s)
    assert len(ch) == 6
    assert len(pairs) == 3
    for a, b in pairs:
        assert inducer_of(a) != inducer_of(b)
        assert line_residual(s, ch[a], ch[b]) < 1e-7


def test_bar_aligned_and_offset():
    s = gen_kanizsa_bar()
    pairs, ch = facing_pairs(s)
    assert len(ch) == 4 and len(pairs) == 2
    for a, b in pairs:
        assert line_residual(s, ch[a], ch[b]) < 1e-9
    s10 = gen_kanizsa_bar(offset=10)
    ch10 = chains(s10)
    for a, b in pairs:
        ya = {round(s10.ys[i], 9) for i in ch10[a]}
        yb = {round(s10.ys[i], 9) for i in ch10[b]}
        assert len(ya) == len(yb) == 1
        assert abs(ya.pop() - yb.pop()) == pytest.approx(10.0)
        assert all(axial_diff(s10.thetas[i], s10.thetas[ch10[a][0]]) < 1e-12 for i in ch10[a] + ch10[b])


# --------------------------------------------------------------------------
# polarity cartoon


def test_contrast_square_unpolarized_shares_orientation():
    s = gen_contrast_square(mode="unpolarized")
    upper = sorted(s.indices("upper-"))
    assert len({s.thetas[i] for i in upper}) == 1


def test_contrast_square_polarized_opposite():
    s = gen_contrast_square(mode="polarized")
    black = sorted(s.indices("upper-black"))
    white = sorted(s.indices("upper-white"))
    assert black and white
    for i in black:
        for j in white:
            assert axial_diff(s.thetas[i], s.thetas[j], 2 * math.pi) == pytest.approx(math.pi, abs=1e-12)


def test_semicircle_steps_equal_arc_step():
    n = 9
    s = gen_contrast_square(semicircle_elements=n)
    semi = sorted(s.indices("semicircle"))
    assert len(semi) == n
    th = np.unwrap(s.thetas[semi])
    assert np.allclose(np.diff(th), math.pi / n, atol=1e-12)


# --------------------------------------------------------------------------
# probes


def test_segments_and_zigzag_geometry():
    s = gen_collinear_segments(counts=(2, 3), spacing=3, gap=20)
    assert list(s.xs) == pytest.approx([-14.5, -11.5, 8.5, 11.5, 14.5])
    assert set(s.labels) == {"segment-0", "segment-1"}
    z = gen_zigzag(n=5, turn=90, gap=3)
    assert np.allclose(np.diff(np.unwrap(z.thetas)), [math.pi / 2, -math.pi / 2] * 2)
    steps = np.hypot(np.diff(z.xs), np.diff(z.ys))
    assert np.allclose(steps, 3.0)


def test_curve_line_perturbation_only_tilts_curve():
    a = gen_curve_line()
    b = gen_curve_line(perturb=math.pi / 18)
    assert np.array_equal(a.xs, b.xs) and np.array_equal(a.ys, b.ys)
    curve = sorted(a.indices("curve"))
    other = [i for i in range(len(a)) if i not in curve]
    assert np.array_equal(a.thetas[other], b.thetas[other])
    tilt = [axial_diff(a.thetas[i], b.thetas[i], 2 * math.pi) for i in curve]
    assert np.allclose(tilt, math.pi / 18)


# --------------------------------------------------------------------------
# invariants over every generator


@pytest.mark.parametrize("name", sorted(GENERATORS))
@pytest.mark.parametrize("mode", list(Mode))
def test_generators_canonical_and_labelled(name, mode):
    s = GENERATORS[name](mode=mode)
    assert s.mode is mode
    assert all(0 <= t < mode.period for t in s.thetas)
    assert s.labels is not None and len(s.labels) == len(s)
    assert GENERATORS[name](mode=mode) == s


# --------------------------------------------------------------------------
# text format


def test_parse_minimal():
    s = parse_stimulus("mode polarized\n0 0 0\n")
    assert len(s) == 1 and s.elements[0] == (0, 0, 0)
    assert s.labels is None


def test_parse_comments_and_labels():
    s = parse_stimulus("# header comment\nmode unpolarized\n# c\n1 2 0.5 edge\n\n3 4 1.0 edge\n")
    assert s.mode is Mode.UNPOLARIZED and s.labels == ("edge", "edge")


def test_parse_range_violation():
    with pytest.raises(StimulusError) as e:
        parse_stimulus("mode unpolarized\n0 0 4.0\n")
    assert not isinstance(e.value, StimulusParseError)


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("0 0 0\n", 1),
        ("mode polarized\n0 0\n", 2),
        ("mode polarized\n0 0 0\n1 x 0\n", 3),
        ("mode sideways\n", 1),
        ("mode polarized\n0 0 0 a b\n", 2),
    ],
)
def test_parse_errors_carry_line_numbers(text, lineno):
    with pytest.raises(StimulusParseError) as e:
        parse_stimulus(text)
    assert e.value.lineno == lineno


def test_parse_rejects_mixed_labels_and_empty():
    with pytest.raises(StimulusError):
        parse_stimulus("mode polarized\n0 0 0 a\n1 1 0\n")
    with pytest.raises(StimulusError):
        parse_stimulus("mode polarized\n")


@pytest.mark.parametrize("name", sorted(GENERATORS))
def test_round_trip_generated(name):
    s = GENERATORS[name]()
    assert parse_stimulus(serialize_stimulus(s)) == s


@settings(max_examples=100)
@given(
    st.lists(
        st.tuples(st.floats(-1e3, 1e3, allow_nan=False), st.floats(-1e3, 1e3, allow_nan=False),
                  st.floats(0, 2 * math.pi, exclude_max=True)),
        min_size=1, max_size=20,
    )
)
def test_round_trip_property(elements):
    s = Stimulus(tuple(elements), Mode.POLARIZED)
    back = parse_stimulus(serialize_stimulus(s))
    assert back == s


def test_stimulus_validation():
    with pytest.raises(StimulusError):
        Stimulus((), Mode.POLARIZED)
    with pytest.raises(StimulusError):
        Stimulus(((0, 0, 3.5),), Mode.UNPOLARIZED)
    with pytest.raises(StimulusError):
        Stimulus(((0, 0, 0),), Mode.POLARIZED, ("a b",))
    with pytest.raises(StimulusError):
        Stimulus(((0, 0, 0),), Mode.POLARIZED, ("a", "b"))
