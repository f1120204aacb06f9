import numpy as np
import pytest

from ctxhar.config import RunConfig
from ctxhar.context import load_rules
from ctxhar.ingest import (
    ActivityProfile,
    ContextGenerator,
    SensorMotion,
    SynthesisProfile,
    builtin_profile,
    generate_synthetic,
)


def tiny_profile(minutes=None, sample_hz=10.0, seed=7, sensors=("accelerometer",)):
    """Three activities with clearly different motion, low sample rate."""
    minutes = minutes or {"walking": 6.0, "sitting": 6.0, "running": 6.0}
    motions = {
        "gait": {s: SensorMotion((0.5, 9.8, 1.0), (2.0, 3.0, 1.5), (0.5, 0.5, 0.5), 1.9) for s in sensors},
        "seated": {s: SensorMotion((6.5, 2.0, 7.0), (0.0, 0.0, 0.0), (0.1, 0.1, 0.1), 0.2) for s in sensors},
        "run": {s: SensorMotion((-6.0, 6.0, -4.0), (6.0, 9.0, 4.0), (1.0, 1.0, 1.0), 2.8) for s in sensors},
        "still": {s: SensorMotion((0.2, 9.75, 0.4), (0.0, 0.0, 0.0), (0.1, 0.1, 0.1), 0.3) for s in sensors},
    }
    motion_of = {"walking": "gait", "stairs_up": "gait", "sitting": "seated", "running": "run",
                 "standing": "still", "elevator_up": "still", "cycling": "run"}
    speeds = {"sitting": (0.0, 0.2), "standing": (0.0, 0.2), "elevator_up": (0.0, 0.2),
              "running": (2.0, 5.0), "cycling": (3.0, 7.0)}

    def ctx(activity):
        return ContextGenerator(
            semantic_place={"street": 0.5, "office_building": 0.5},
            weather={"clear": 1.0},
            speed_mps=speeds.get(activity, (0.5, 1.4)),
            height_variation_m=(-0.1, 0.1),
            p_unknown=0.1,
        )

    return SynthesisProfile(
        motions=motions,
        activities={a: ActivityProfile(motion_of[a], ctx(a), m) for a, m in minutes.items()},
        sensors=tuple(sensors),
        sample_hz=sample_hz,
        seed=seed,
    )


@pytest.fixture
def tiny():
    return tiny_profile()


@pytest.fixture(scope="session")
def default_kb():
    return load_rules()


@pytest.fixture(scope="session")
def confusable_records():
    return generate_synthetic(builtin_profile("confusable"), 3)


@pytest.fixture(scope="session")
def confusable_config():
    prof = builtin_profile("confusable")
    return RunConfig(seed=1, activities=tuple(sorted(prof.activities)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report: test_acceptance.py appends (number, passed, detail)
ACCEPTANCE_RESULTS: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
