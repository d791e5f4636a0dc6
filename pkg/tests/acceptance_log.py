"""Collects one verdict line per acceptance criterion for the terminal summary."""

LINES: dict[str, str] = {}


def record(key: str, ok: bool, detail: str) -> bool:
    line = f"criterion {key}: {'PASS' if ok else 'FAIL'} - {detail}"
    LINES[key] = line
    print(line)
    return ok
