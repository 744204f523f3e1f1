"""Pipeline configuration and the on-disk stage cache."""

from __future__ import annotations

import hashlib
import json
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .algebra import SpectralAlgebra, build_algebra
from .errors import InvalidArgument
from .frames import FormCalculus, TruncationConfig
from .kernel import KernelConfig, SpectralBasis, estimate_basis, load_basis, save_basis
from .synth import PointCloud, from_spec, load_csv

__all__ = ["SCHEMA_VERSION", "PipelineConfig", "Pipeline", "cache_dir", "parse_bandwidth", "atomic_write"]

SCHEMA_VERSION = 1


def cache_dir() -> Path:
    env = os.environ.get("DIFFGEO_CACHE_DIR")
    return Path(env) if env else Path.home() / ".cache" / "diffgeo"


def parse_bandwidth(text) -> tuple[float | str, float]:
    """``"auto"``, a positive number, or ``"<k>x"`` for ``k`` times the automatic value."""
    s = str(text).strip().lower()
    if s == "auto":
        return "auto", 1.0
    try:
        if s.endswith("x"):
            k = float(s[:-1])
            if not k > 0:
                raise ValueError
            return "auto", k
        t = float(s)
        if not t > 0:
            raise ValueError
        return t, 1.0
    except ValueError:
        raise InvalidArgument(f"bandwidth must be 'auto', a positive number or '<k>x', got {text!r}") from None


def atomic_write(path: Path, data: bytes) -> None:
    """Write to a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_spec(text):
    if text is None:
        return None
    p = Path(text)
    if not text.lstrip().startswith("{") and p.exists():
        text = p.read_text()
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"--shape-spec is neither a JSON object nor a readable file: {exc}") from None
    if not isinstance(spec, dict):
        raise InvalidArgument("--shape-spec must be a JSON object")
    return spec


@dataclass(frozen=True)
class PipelineConfig:
    input: str | None = None
    shape_spec: dict | None = None
    kernel: KernelConfig = field(default_factory=KernelConfig)
    trunc: TruncationConfig = field(default_factory=TruncationConfig)
    tau: float = 1e-8
    epsilon: float | None = None
    out: str = "diffgeo_out"

    def __post_init__(self):
        if (self.input is None) == (self.shape_spec is None):
            raise InvalidArgument("give exactly one of --input and --shape-spec")
        if not self.tau > 0:
            raise InvalidArgument("tau must be positive")
        if self.epsilon is not None and self.epsilon < 0:
            raise InvalidArgument("epsilon must be >= 0")
        if self.trunc.n0 != self.kernel.n0:
            raise InvalidArgument("kernel and truncation disagree on n0")

    @classmethod
    def from_args(cls, args) -> "PipelineConfig":
        spec = _load_spec(args.shape_spec)
        if spec is not None and args.seed is not None:
            spec = {**spec, "seed": args.seed}
        bw, scale = parse_bandwidth(args.bandwidth)
        kernel = KernelConfig(bandwidth=bw, alpha=args.alpha, knn=args.knn, n0=args.n0, bandwidth_scale=scale)
        n1 = min(10, args.n0) if args.n1 is None else args.n1
        n2 = min(4, args.n0 - 1) if args.n2 is None else args.n2
        trunc = TruncationConfig(args.n0, n1, n2)
        return cls(args.input, spec, kernel, trunc, args.tau, args.epsilon, args.out)

    def describe(self) -> dict:
        return {
            "input": self.input,
            "shape_spec": self.shape_spec,
            "kernel": asdict(self.kernel),
            "trunc": asdict(self.trunc),
            "tau": self.tau,
            "epsilon": self.epsilon,
        }


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:24]


class Pipeline:
    """Lazily computes and caches the stages for one configuration."""

    def __init__(self, config: PipelineConfig, cache: Path | None = None, log=None):
        self.config = config
        self.cache = Path(cache) if cache is not None else cache_dir()
        self.log = log or (lambda msg: print(msg, file=sys.stderr))
        self._cloud = None
        self._basis = None
        self._algebra = None
        self._calc = None

    @property
    def cloud(self) -> PointCloud:
        if self._cloud is None:
            cfg = self.config
            if cfg.input is not None:
                if not Path(cfg.input).is_file():
                    raise InvalidArgument(f"input file not found: {cfg.input}")
                self._cloud = load_csv(cfg.input)
            else:
                self._cloud = from_spec(cfg.shape_spec)
        return self._cloud

    def _basis_key(self):
        pts = np.ascontiguousarray(self.cloud.points)
        data = hashlib.sha256(pts.tobytes() + str(pts.shape).encode()).hexdigest()
        meta = {"stage": "basis", "schema_version": SCHEMA_VERSION, "data": data, "kernel": asdict(self.config.kernel)}
        return _digest(meta), meta

    @property
    def basis(self) -> SpectralBasis:
        if self._basis is None:
            key, meta = self._basis_key()
            npz, side = self.cache / f"basis-{key}.npz", self.cache / f"basis-{key}.json"
            if npz.exists() and side.exists():
                try:
                    stored = json.loads(side.read_text())
                except (OSError, json.JSONDecodeError):
                    stored = None
                if stored == json.loads(json.dumps(meta, default=str)):
                    self._basis = load_basis(npz)
                else:
                    self.log(f"notice: cached basis {key} does not match this configuration; recomputing")
            if self._basis is None:
                self._basis = estimate_basis(self.cloud, self.config.kernel)
                self._store_basis(npz, side, meta)
        return self._basis

    def _store_basis(self, npz, side, meta):
        try:
            self.cache.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=self.cache, prefix=".tmp-", suffix=".npz")
            os.close(fd)
            save_basis(self._basis, tmp)
            os.replace(tmp, npz)
            atomic_write(side, json.dumps(meta, default=str, sort_keys=True).encode())
        except OSError as exc:
            self.log(f"notice: could not write cache in {self.cache}: {exc}")

    @property
    def algebra(self) -> SpectralAlgebra:
        if self._algebra is None:
            self._algebra = build_algebra(self.basis)
        return self._algebra

    @property
    def calc(self) -> FormCalculus:
        if self._calc is None:
            n0 = self.basis.n0
            t = self.config.trunc
            trunc = TruncationConfig(n0, min(t.n1, n0), min(t.n2, n0 - 1))
            self._calc = FormCalculus(self.algebra, trunc, tau=self.config.tau)
        return self._calc

    def out_path(self, name) -> Path:
        p = Path(self.config.out)
        p.mkdir(parents=True, exist_ok=True)
        return p / name

    def write_json(self, name, payload: dict) -> Path:
        body = {"schema_version": SCHEMA_VERSION, **payload}
        path = self.out_path(name)
        atomic_write(path, (json.dumps(body, indent=2, sort_keys=True) + "\n").encode())
        return path
