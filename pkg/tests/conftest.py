import numpy as np
import pytest

from chan2chan.core import Domain, Frame, VideoSequence


def marked_frame(t: int, domain: Domain, size: int = 16, value: float | None = None) -> Frame:
    """A frame whose pixels encode its time index, for window bookkeeping tests."""
    if value is None:
        value = (t % 19) / 20.0
    return Frame(np.full((size, size), value, dtype=np.float32), t, domain)


def marked_pair(T: int, size: int = 16) -> tuple[VideoSequence, VideoSequence]:
    u = VideoSequence(tuple(marked_frame(t, Domain.U, size) for t in range(T)), Domain.U)
    v = VideoSequence(tuple(marked_frame(t, Domain.V, size, (t % 19) / 20.0 + 0.01)
                            for t in range(T)), Domain.V)
    return u, v


def random_sequence(rng: np.random.Generator, T: int, size: int,
                    domain: Domain = Domain.U) -> VideoSequence:
    arr = rng.uniform(-0.9, 0.9, size=(T, size, size)).astype(np.float32)
    return VideoSequence.from_array(arr, domain)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
