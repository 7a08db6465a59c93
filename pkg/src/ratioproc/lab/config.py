"""Flat config format: ``[section]`` headers over ``key = value`` lines,
UTF-8, ``#`` comments.  Parse errors carry line numbers; emit/parse
round-trips to the identical spec."""

from __future__ import annotations

from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


STUDY_KINDS = ("ratio-scaling", "clt-premise", "margin", "erm", "bound-table", "verify", "oracle")


@dataclass
class StudySpec:
    kind: str
    n_grid: tuple = ()
    reps: int = 200
    seed: int = 20240601
    workers: int = 1
    clazz: dict = field(default_factory=dict)
    weight: dict = field(default_factory=dict)
    range: dict = field(default_factory=dict)
    problem: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in STUDY_KINDS:
            raise ConfigError(f"unknown study kind {self.kind!r}")
        self.n_grid = tuple(int(n) for n in self.n_grid)
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n grid must be strictly increasing")
        if self.reps < 1:
            raise ConfigError("reps >= 1 required")


def _parse_scalar(text: str):
    if "," in text or " " in text.strip() and all(p.strip() for p in text.replace(",", " ").split()):
        parts = [p for p in text.replace(",", " ").split() if p]
        if len(parts) > 1:
            return tuple(_parse_scalar(p) for p in parts)
    t = text.strip()
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    if t.lower() in ("true", "false"):
        return t.lower() == "true"
    return t


def parse_config(text: str) -> StudySpec:
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, val = line.split("=", 1)
        sections[current][key.strip()] = _parse_scalar(val)
    study = sections.get("study", {})
    if "kind" not in study:
        raise ConfigError("no study specified ([study] kind = ... missing)")
    n = study.get("n", ())
    if not isinstance(n, tuple):
        n = (n,) if n != () else ()
    return StudySpec(
        kind=str(study["kind"]),
        n_grid=n,
        reps=int(study.get("reps", 200)),
        seed=int(study.get("seed", 20240601)),
        workers=int(study.get("workers", 1)),
        clazz=sections.get("class", {}),
        weight=sections.get("weight", {}),
        range=sections.get("range", {}),
        problem=sections.get("problem", {}),
        output=sections.get("output", {}),
        extras=sections.get("extras", {}),
    )


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def emit_config(spec: StudySpec) -> str:
    lines = ["[study]", f"kind = {spec.kind}"]
    if spec.n_grid:
        lines.append(f"n = {_fmt(spec.n_grid)}")
    lines.append(f"reps = {spec.reps}")
    lines.append(f"seed = {spec.seed}")
    lines.append(f"workers = {spec.workers}")
    for name, data in (("class", spec.clazz), ("weight", spec.weight), ("range", spec.range),
                       ("problem", spec.problem), ("output", spec.output), ("extras", spec.extras)):
        if data:
            lines.append("")
            lines.append(f"[{name}]")
            for k, v in data.items():
                lines.append(f"{k} = {_fmt(v)}")
    return "\n".join(lines) + "\n"
