import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dysvc.dsp import Waveform

settings.register_profile(
    "dysvc",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("dysvc")

SR = 16000


def sine(freq, dur_s, sr=SR, amp=0.5, phase=0.0):
    t = np.arange(int(round(dur_s * sr))) / sr
    return Waveform(amp * np.sin(2 * np.pi * freq * t + phase), sr)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    from dysvc.synth import SynthConfig, synth_corpus

    out = tmp_path_factory.mktemp("corpus")
    synth_corpus(out, SynthConfig(n_words=4, seed=3))
    return out


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
