"""Collects one PASS/FAIL line per acceptance criterion for the run summary."""

LINES: list[str] = []


def record(number: int, ok: bool, detail: str) -> None:
    line = f"AC{number} {'PASS' if ok else 'FAIL'}: {detail}"
    LINES.append(line)
    print(line)
