import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from vcm_residual.sift import Keypoint, KeypointSet
from vcm_residual.synthetic import textured_frame

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def textured128():
    return textured_frame(np.random.default_rng(12345), 128, 128)


f32 = dict(width=32, allow_nan=False, allow_infinity=False)

keypoints = st.builds(
    Keypoint,
    x=st.floats(0, 63.5, **f32),
    y=st.floats(0, 63.5, **f32),
    size=st.floats(0.5, 40, **f32),
    orientation=st.floats(0, 360, exclude_max=True, **f32).filter(lambda a: a < 360),
    response=st.floats(0, 0.25, **f32),
)


def keypoint_sets(frame_id=0, max_size=30):
    return st.lists(keypoints, max_size=max_size).map(lambda kps: KeypointSet.canonical(frame_id, kps))


def kp(x, y, size=4.0, orientation=90.0, response=0.05):
    return Keypoint(x, y, size, orientation, response)


@st.composite
def degraded_pairs(draw, max_size=30):
    """An original set and a perturbed copy: drops, jitter, parameter drift, spurious points."""
    orig = draw(keypoint_sets(max_size=max_size))
    dec = []
    for k in orig:
        action = draw(st.sampled_from(["keep", "drop", "jitter", "move", "drift"]))
        if action == "drop":
            continue
        x, y, s, o, r = k.as_tuple()
        if action == "jitter":
            x = min(63.9, max(0.0, x + draw(st.floats(-0.9, 0.9))))
            y = min(63.9, max(0.0, y + draw(st.floats(-0.9, 0.9))))
        elif action == "move":
            x = min(63.9, max(0.0, x + draw(st.floats(-3.4, 3.4))))
            y = min(63.9, max(0.0, y + draw(st.floats(-3.4, 3.4))))
        elif action == "drift":
            s = s * draw(st.floats(0.8, 1.2))
            o = (o + draw(st.floats(-40, 40))) % 360.0
            r = r * draw(st.floats(0.8, 1.2))
        if o >= 360.0:
            o = 0.0
        dec.append(Keypoint(x, y, s, o, r))
    dec += draw(st.lists(keypoints, max_size=5))
    return orig, KeypointSet.canonical(0, dec)
