import json
from pathlib import Path
from typing import IO, Any, List, Literal

import yaml

SerFormat = Literal["json", "yaml"]


class SerUtils:
    _FORMATS = {"json", "yaml"}

    _FMT_TO_UNMARSHALLER = {
        "json": lambda r: json.load(r),
        "yaml": lambda r: yaml.safe_load(r)
    }

    _FMT_TO_MARSHALLER = {
        "json": lambda obj, w: w.write(json.dumps(obj, indent=2, sort_keys=True) + "\n"),
        "yaml": lambda obj, w: yaml.safe_dump(obj, w, sort_keys=True)
    }

    _FMT_TO_EXTS = {
        "json": {".json"},
        "yaml": {".yaml", ".yml"}
    }

    @classmethod
    def unmarshall(cls, read_stream: IO, formats: List[SerFormat]) -> Any:
        for fmt in formats:
            try:
                read_stream.seek(0)
                return cls._FMT_TO_UNMARSHALLER[fmt](read_stream)
            except Exception:
                pass
        raise RuntimeError(f"could not unmarshall readable stream into any of following formats: {formats}")

    @classmethod
    def format_of(cls, path: Path, default: SerFormat = "json") -> SerFormat:
        for fmt, exts in cls._FMT_TO_EXTS.items():
            if path.suffix in exts:
                return fmt  # type: ignore[return-value]
        return default

    @classmethod
    def from_file(cls, path: Path, formats: List[SerFormat]) -> Any:
        preferred = cls.format_of(path, formats[0])
        if preferred in formats:
            formats = [preferred] + [f for f in formats if f != preferred]

        with open(path) as f:
            return cls.unmarshall(f, formats)

    @classmethod
    def to_file(cls, obj: Any, path: Path, fmt: SerFormat | None = None) -> Path:
        """Write `obj` with sorted keys so identical inputs give identical bytes."""
        fmt = fmt or cls.format_of(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as f:
            cls._FMT_TO_MARSHALLER[fmt](obj, f)
        return path

    @classmethod
    def dumps(cls, obj: Any) -> str:
        """Canonical compact JSON, the input of every content hash."""
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))
