import numpy as np
import pytest


def _install_mini_app_polis_stubs() -> None:
    """
    Inject a no-op logger into the real `mini_app_polis` package when the
    installed version of common-python-utils does not expose get_logger.
    """
    import mini_app_polis as _real  # noqa: F401

    # ── mini_app_polis.logger ────────────────────────────────────────────────
    import mini_app_polis.logger as _logger_mod  # noqa: F401

    if not hasattr(_logger_mod, "get_logger"):

        class _DummyLogger:
            def info(self, *_args, **_kwargs) -> None:
                return None

            def debug(self, *_args, **_kwargs) -> None:
                return None

            def warning(self, *_args, **_kwargs) -> None:
                return None

            def error(self, *_args, **_kwargs) -> None:
                return None

            def exception(self, *_args, **_kwargs) -> None:
                return None

        _logger_mod.get_logger = lambda: _DummyLogger()  # type: ignore[attr-defined]


_install_mini_app_polis_stubs()


# Pixel prototypes for the hand-built OCR fixture: each letter lights a
# different band of the 16×8 raster.
def _letter_pixels(letter: str, rng: np.random.Generator) -> list[int]:
    base = np.zeros(128, dtype=int)
    k = ord(letter) - ord("a")
    base[(k * 16) % 128 : (k * 16) % 128 + 16] = 1
    noise = rng.random(128) < 0.02
    return [int(v) for v in np.where(noise, 1 - base, base)]


def write_ocr_file(path, words: dict[str, int], seed: int = 0) -> None:
    """Write a letter file holding `count` instances of each word."""
    rng = np.random.default_rng(seed)
    lines = []
    letter_id = 1
    word_id = 1
    for word, count in words.items():
        for _ in range(count):
            for pos, letter in enumerate(word):
                next_id = letter_id + 1 if pos < len(word) - 1 else -1
                fields = [
                    str(letter_id),
                    letter,
                    str(next_id),
                    str(word_id),
                    str(pos + 1),
                    str(word_id % 10),
                    *map(str, _letter_pixels(letter, rng)),
                ]
                lines.append("\t".join(fields))
                letter_id += 1
            word_id += 1
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@pytest.fixture
def ocr_file(tmp_path):
    path = tmp_path / "letter.data"
    write_ocr_file(path, {"cat": 12, "dog": 12, "bee": 12, "go": 6})
    return path


@pytest.fixture
def ocr_writer():
    return write_ocr_file
