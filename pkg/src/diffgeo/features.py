"""Geometric feature vectors and a PCA projection for biomarker curves."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidArgument, MissingArtifact
from .exterior import gradient
from .frames import FormCalculus
from .hodge import HodgeSpectrum, cup_norm, hodge_spectrum
from .kernel import SpectralBasis
from .second_order import hessian_eval

__all__ = [
    "FeatureConfig",
    "FeatureVector",
    "PCAResult",
    "BIOMARKER",
    "build_features",
    "biomarker_value",
    "pca_project",
    "features_to_csv",
]


@dataclass(frozen=True)
class FeatureConfig:
    """Declarative feature schedule.

    ``inner_products = (a, b)`` adds ``|<alpha_i, d phi_j>|`` for the first
    ``a`` eigenforms and ``1 <= j <= b``.  ``cup_forms = m`` adds cup norms
    of all pairs among the first ``m`` eigenforms.  ``hessian = h`` adds
    ``int H(phi_a)(grad phi_b, grad phi_b)`` for ``1 <= a, b <= h``.
    ``normalize`` divides every eigenvalue and Dirichlet energy by the first
    nonzero function eigenvalue, which makes those entries dimensionless and
    so unchanged by a global rescale of the cloud.
    """

    f0: int = 8
    heat_times0: tuple = (1.0, 10.0, 50.0)
    f1: int = 0
    heat_times1: tuple = (1.0, 10.0)
    dirichlet: int = 0
    inner_products: tuple = (0, 0)
    cup_forms: int = 0
    hessian: int = 0
    degenerate_gap: float = 0.01
    normalize: bool = False

    def __post_init__(self):
        for name in ("f0", "f1", "dirichlet", "cup_forms", "hessian"):
            if getattr(self, name) < 0:
                raise InvalidArgument(f"{name} must be >= 0")
        if len(self.inner_products) != 2 or min(self.inner_products) < 0:
            raise InvalidArgument("inner_products must be a pair of non-negative counts")
        object.__setattr__(self, "heat_times0", tuple(float(t) for t in self.heat_times0))
        object.__setattr__(self, "heat_times1", tuple(float(t) for t in self.heat_times1))
        object.__setattr__(self, "inner_products", tuple(int(c) for c in self.inner_products))

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidArgument(f"unknown feature config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def needs_forms(self) -> bool:
        return bool(self.f1 or self.dirichlet or self.inner_products[0] or self.cup_forms or self.hessian)

    @property
    def eigenvalue_only(self) -> bool:
        return not (self.inner_products[0] or self.cup_forms or self.hessian)


EMPTY = FeatureConfig(f0=0, heat_times0=(), heat_times1=())
# Entries used by the sparsified biomarker preset.
BIOMARKER = FeatureConfig(f0=3, heat_times0=(1.0, 10.0, 50.0), f1=1, heat_times1=(1.0, 10.0), dirichlet=2)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    names: tuple
    values: np.ndarray
    excluded: tuple = field(default=())

    def __post_init__(self):
        if len(self.names) != len(self.values):
            raise InvalidArgument("names and values differ in length")

    def __len__(self):
        return len(self.values)

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def to_dict(self) -> dict:
        return {n: float(v) for n, v in zip(self.names, self.values)}

    def to_json(self) -> str:
        return json.dumps({"names": list(self.names), "values": [float(v) for v in self.values], "excluded": list(self.excluded)})


def _simple(lam, i, gap):
    """Whether eigenvalue ``i`` is separated from its neighbours by a relative gap."""
    lo = lam[i - 1] if i > 0 else -np.inf
    hi = lam[i + 1] if i + 1 < len(lam) else np.inf
    scale = max(abs(lam[i]), np.finfo(float).tiny)
    return (lam[i] - lo) > gap * scale and (hi - lam[i]) > gap * scale


def _unit(lam):
    nz = lam[lam > 1e-8 * max(lam.max(), np.finfo(float).tiny)]
    if nz.size == 0:
        raise InvalidArgument("normalize needs a nonzero function eigenvalue")
    return float(nz[0])


def build_features(
    basis: SpectralBasis,
    config: FeatureConfig = FeatureConfig(),
    calc: FormCalculus | None = None,
    spectrum: HodgeSpectrum | None = None,
) -> FeatureVector:
    """Stack spectral and form-derived scalars into a fixed-order vector.

    Entries that depend on eigenfunction or eigenform choices are set to 0
    and listed in ``excluded`` when the relevant spectrum is degenerate.
    """
    names, vals, excluded = [], [], []

    def put(name, value, ok=True):
        names.append(name)
        if ok:
            vals.append(float(value))
        else:
            vals.append(0.0)
            excluded.append(name)

    lam0 = basis.eigenvalues
    if config.f0 > len(lam0):
        raise InvalidArgument(f"f0={config.f0} exceeds the basis size {len(lam0)}")
    unit = _unit(lam0) if config.normalize else 1.0
    lam0 = lam0 / unit
    for i in range(config.f0):
        put(f"lambda0_{i}", lam0[i])
    for t in config.heat_times0:
        for i in range(config.f0):
            put(f"heat0_t{t:g}_{i}", np.exp(-t * lam0[i]))

    if config.needs_forms and calc is None:
        raise MissingArtifact("form features need a FormCalculus: run the 'forms' stage (or pass calc=)")
    if (config.f1 or config.inner_products[0] or config.cup_forms) and spectrum is None:
        m = max(config.f1, config.inner_products[0], config.cup_forms)
        spectrum = hodge_spectrum(calc, 1, m)
    if spectrum is not None and spectrum.degree != 1:
        raise InvalidArgument("spectrum must be the 1-form Hodge spectrum")

    if config.f1:
        lam1 = spectrum.eigenvalues / unit
        if config.f1 > len(lam1):
            raise MissingArtifact(f"only {len(lam1)} 1-form eigenvalues available, f1={config.f1}: rerun 'hodge' with more --num-eigs")
        for i in range(config.f1):
            put(f"lambda1_{i}", lam1[i])
        for t in config.heat_times1:
            for i in range(config.f1):
                put(f"heat1_t{t:g}_{i}", np.exp(-t * lam1[i]))

    if config.dirichlet:
        alg = calc.algebra
        if config.dirichlet >= alg.n0:
            raise InvalidArgument("dirichlet count exceeds the basis")
        for i in range(1, config.dirichlet + 1):
            put(f"dirichlet_{i}", alg.gamma.values[i, i, 0] / alg.c.phi0 / unit)

    na, nb = config.inner_products
    if na:
        forms = spectrum.forms
        lam1 = spectrum.eigenvalues
        space = forms[0].space
        for a in range(na):
            for b in range(1, nb + 1):
                ok = _simple(lam1, a, config.degenerate_gap) and _simple(lam0, b, config.degenerate_gap)
                e = np.zeros(b + 1)
                e[b] = 1.0
                dphi = gradient(calc, e)
                value = abs(space.inner(forms[a].v, dphi.v)) if dphi.space is space else 0.0
                put(f"inner_a{a}_dphi{b}", value, ok)

    if config.cup_forms:
        forms = spectrum.forms
        for a in range(config.cup_forms):
            for b in range(a + 1, config.cup_forms):
                put(f"cup_{a}_{b}", cup_norm(forms[a], forms[b]))

    if config.hessian:
        alg = calc.algebra
        for a in range(1, config.hessian + 1):
            for b in range(1, config.hessian + 1):
                ok = _simple(lam0, a, config.degenerate_gap) and _simple(lam0, b, config.degenerate_gap)
                ea = np.zeros(a + 1)
                ea[a] = 1.0
                eb = np.zeros(b + 1)
                eb[b] = 1.0
                grad = gradient(calc, eb)
                h = hessian_eval(ea, grad, grad)
                put(f"hessian_{a}_{b}", h[0] / alg.c.phi0, ok)

    return FeatureVector(tuple(names), np.asarray(vals, dtype=float), tuple(excluded))


def biomarker_value(fv: FeatureVector) -> float:
    """The sparsified PCA feature reported for the infiltration model.

    ``|d phi_1|^2 + |d phi_2|^2 + [l0_1 - e^-l0_1 - e^-10 l0_1 - e^-50 l0_1]
    + l0_2 + [l1_1 - e^-l1_1 - e^-10 l1_1]`` where ``l0_i`` are function
    eigenvalues (``l0_0 = 0``) and ``l1_1`` is the smallest 1-form eigenvalue.
    Requires a vector built with at least the ``BIOMARKER`` schedule.
    """
    try:
        return (
            fv["dirichlet_1"]
            + fv["dirichlet_2"]
            + fv["lambda0_1"]
            - fv["heat0_t1_1"]
            - fv["heat0_t10_1"]
            - fv["heat0_t50_1"]
            + fv["lambda0_2"]
            + fv["lambda1_0"]
            - fv["heat1_t1_0"]
            - fv["heat1_t10_0"]
        )
    except ValueError as exc:
        raise MissingArtifact("feature vector lacks biomarker entries: build it with features.BIOMARKER") from exc


@dataclass(frozen=True, eq=False)
class PCAResult:
    scores: np.ndarray
    components: np.ndarray
    weights: np.ndarray
    sparse_weights: np.ndarray
    names: tuple
    kept: np.ndarray
    explained: np.ndarray


def pca_project(vectors, dim: int = 1, keep: int | None = None) -> PCAResult:
    """Standardise, project on the top ``dim`` principal directions.

    ``weights`` is the first direction over all input columns (zero for
    dropped constant columns); ``sparse_weights`` keeps its ``keep``
    largest-magnitude entries.  Each direction is signed so that its
    largest-magnitude weight is positive.
    """
    vectors = list(vectors)
    if len(vectors) < 2:
        raise InvalidArgument("pca_project needs at least two vectors")
    names = vectors[0].names
    if any(v.names != names for v in vectors):
        raise InvalidArgument("feature vectors have different schedules")
    X = np.stack([v.values for v in vectors])
    if not 1 <= dim <= X.shape[1]:
        raise InvalidArgument(f"dim must lie in [1, {X.shape[1]}], got {dim}")
    sd = X.std(axis=0)
    kept = sd > 1e-12 * np.maximum(np.abs(X).max(axis=0), 1.0)
    if not kept.all():
        dropped = [n for n, k in zip(names, kept) if not k]
        warnings.warn(f"dropping constant feature columns: {dropped}", RuntimeWarning, stacklevel=2)
    if not kept.any():
        raise InvalidArgument("all feature columns are constant")
    Z = (X[:, kept] - X[:, kept].mean(axis=0)) / sd[kept]
    dim = min(dim, int(kept.sum()))
    _, s, Vt = np.linalg.svd(Z, full_matrices=False)
    comps = Vt[:dim]
    idx = np.argmax(np.abs(comps), axis=1)
    comps = comps * np.sign(comps[np.arange(dim), idx])[:, None]
    full = np.zeros((dim, X.shape[1]))
    full[:, kept] = comps
    w = full[0]
    sparse = w.copy()
    if keep is not None:
        if keep < 1:
            raise InvalidArgument("keep must be >= 1")
        order = np.argsort(-np.abs(w), kind="stable")
        sparse[order[keep:]] = 0.0
    var = s**2
    return PCAResult(Z @ comps.T, full, w, sparse, names, kept, var[:dim] / var.sum())


def features_to_csv(vectors, path, labels=None) -> None:
    """One row per cloud with a header of feature names."""
    vectors = list(vectors)
    if not vectors:
        raise InvalidArgument("no feature vectors to write")
    names = vectors[0].names
    labels = labels or [str(i) for i in range(len(vectors))]
    with open(path, "w") as fh:
        fh.write(",".join(["label", *names]) + "\n")
        for lab, v in zip(labels, vectors):
            fh.write(",".join([lab, *(repr(float(x)) for x in v.values)]) + "\n")
