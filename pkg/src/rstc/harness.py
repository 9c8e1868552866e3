"""Experiment configuration, Monte Carlo rate-distortion sweeps and result files.

A sweep walks a grid of total rates. At each point it splits the budget with
the analytic model, then (unless only planning) pushes channels through the
whole chain: KLT, water-filling allocation, scalar quantization, basis RVQ
once per coherence block, mismatched reconstruction and the exact T1/T2/T3
decomposition.
"""

import csv
import dataclasses
import functools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    ChannelBatch, eig_hermitian, exp_correlation, kron_eigenbasis, kron_order,
    sample_channels,
)
from .dump import ingest_channels
from .errors import CapacityError, FormatError, ValidationError
from .mismatch import (
    TAIL_KNOWN, TAIL_MODES, TAIL_ZEROED, DistortionReport, MismatchModel, d0_model,
    distortion_terms, estimate_cn, reconstruction_basis,
)
from .quantizers import (
    KINDS, QuantizerConfig, RVQ_MAX_BITS, quantize_basis, quantize_coeffs, quantize_columns,
)
from .ratesplit import INACTIVE, RateSplit, effective_rate, optimal_split
from .rng import CHANNEL, DITHER, check_seed, stream
from .rwf import dq, water_level

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

BASIS_MODES = ("perfect", "full", "kron")
SYNTHETIC = "synthetic"


@dataclass
class ExperimentConfig:
    """Sweep configuration. Every field is also a config-file key.

    ``basis`` selects how the decoder learns the eigenbasis: ``perfect``
    (shared exactly), ``full`` (RVQ of the ``p`` dominant columns of the
    effective basis on G(N,1)) or ``kron`` (RVQ of ``p_s`` columns of U_s and
    ``p_f`` of U_f). ``c_n`` is a number, ``"default"`` for ``(N-1)/N`` or
    ``"estimate"`` for a Monte Carlo fit over ``cn_bits``. ``tail`` sets how
    columns beyond the quantized ones are treated: ``known`` (exact at the
    decoder), ``zeroed`` (their coefficients are not sent) or
    ``reorthonormalized`` (taken from the unitary re-orthonormalized basis).
    """

    nt: int = 8
    nc: int = 8
    rho_s: float = 0.8
    rho_f: float = 0.8
    tau: int = 10_000
    basis: str = "full"
    p: int = 2
    p_s: int = 1
    p_f: int = 1
    factor_share: float | None = None
    tail: str = TAIL_KNOWN
    c_n: float | str = "default"
    cn_bits: list = field(default_factory=lambda: [2, 4, 6, 8, 10])
    cn_trials: int = 2000
    quantizer: str = "uniform_dithered"
    post_scale: bool = True
    rates: list = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 11)])
    trials: int = 10_000
    seed: int = 0
    source: str = SYNTHETIC
    b_update: float = 0.0
    max_bits_per_column: int = 20
    clamp_basis_bits: bool = True
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("nt", "nc", "tau", "trials", "cn_trials", "workers"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        for name in ("p", "p_s", "p_f"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 0:
                raise ValidationError(f"{name} must be a non-negative integer, got {v!r}")
        for name in ("rho_s", "rho_f"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValidationError(f"{name} must lie in [0, 1)")
        if self.basis not in BASIS_MODES:
            raise ValidationError(f"basis must be one of {BASIS_MODES}, got {self.basis!r}")
        if self.tail not in TAIL_MODES:
            raise ValidationError(f"tail must be one of {TAIL_MODES}, got {self.tail!r}")
        if self.quantizer not in KINDS:
            raise ValidationError(f"quantizer must be one of {KINDS}, got {self.quantizer!r}")
        if isinstance(self.c_n, str):
            if self.c_n not in ("default", "estimate"):
                raise ValidationError(f"c_n must be a number, 'default' or 'estimate'")
        elif not self.c_n > 0:
            raise ValidationError("c_n must be positive")
        rates = [float(r) for r in self.rates]
        if not rates or any(r < 0 or not math.isfinite(r) for r in rates):
            raise ValidationError("rates must be a non-empty list of non-negative numbers")
        if any(b < a for a, b in zip(rates, rates[1:])):
            raise ValidationError("rates must be sorted ascending")
        self.rates = rates
        if self.factor_share is not None and not 0.0 <= self.factor_share <= 1.0:
            raise ValidationError("factor_share must lie in [0, 1]")
        if self.b_update < 0:
            raise ValidationError("b_update must be >= 0")
        if not 0 <= self.max_bits_per_column <= RVQ_MAX_BITS:
            raise ValidationError(f"max_bits_per_column must be in [0, {RVQ_MAX_BITS}]")
        self.seed = check_seed(self.seed)

    @property
    def synthetic(self):
        return self.source == SYNTHETIC

    @property
    def model_p(self):
        return self.p_s + self.p_f if self.basis == "kron" else self.p


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def load_config(path):
    """Read a flat TOML file of ``ExperimentConfig`` keys."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise FormatError(f"{path}: cannot read config ({exc.strerror or exc})") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    return data


def make_config(mapping=None, **overrides):
    """Build a config from a mapping plus keyword overrides (``None`` values are ignored)."""
    values = dict(mapping or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(values) - set(_FIELDS))
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    for k, v in values.items():
        if isinstance(v, dict):
            raise ValidationError(f"config key {k!r} must be flat, not a table")
    return ExperimentConfig(**values)


# --------------------------------------------------------------------------
# source statistics
# --------------------------------------------------------------------------


def sample_covariance(batch):
    """``(1/count) sum h h^H`` over the batch."""
    h = batch.realizations if isinstance(batch, ChannelBatch) else np.asarray(batch, complex)
    if h.ndim != 2 or h.shape[0] == 0:
        raise ValidationError("empty batch")
    r = h.T @ h.conj() / h.shape[0]
    return (r + r.conj().T) / 2


@dataclass(frozen=True, eq=False)
class Source:
    spectrum: np.ndarray
    basis: np.ndarray
    factors: tuple | None = None        # (us, ls, uf, lf, order) for synthetic sources
    channels: ChannelBatch | None = None

    @property
    def n(self):
        return self.spectrum.size


def prepare_source(config: ExperimentConfig, batch=None):
    """Eigenbasis and spectrum for the configured source.

    Synthetic sources use the Kronecker exponential model. Ingested dumps
    are moment-matched: their sample covariance defines the Gaussian
    benchmark, and the dumped realizations are what the simulation encodes.
    """
    if config.synthetic:
        us, ls = eig_hermitian(exp_correlation(config.nt, config.rho_s))
        uf, lf = eig_hermitian(exp_correlation(config.nc, config.rho_f))
        u, lam = kron_eigenbasis(us, ls, uf, lf)
        return Source(lam, u, (us, ls, uf, lf, kron_order(ls, lf)))
    if config.basis == "kron":
        raise ValidationError("kron basis quantization needs a synthetic Kronecker source")
    if batch is None:
        batch = ingest_channels(config.source)
    u, lam = eig_hermitian(sample_covariance(batch))
    return Source(lam, u, None, batch)


@functools.lru_cache(maxsize=32)
def _estimate_cn(n, bits, trials, seed):
    return estimate_cn(n, bits, trials, seed)


def resolve_model(config, source):
    p = config.model_p
    if p > source.n:
        raise ValidationError(f"p={p} exceeds the channel dimension {source.n}")
    if config.c_n == "estimate":
        c_n = _estimate_cn(source.n, tuple(config.cn_bits), config.cn_trials, config.seed)
    elif config.c_n == "default":
        c_n = None
    else:
        c_n = float(config.c_n)
    return MismatchModel(source.n, p, config.tau, c_n)


# --------------------------------------------------------------------------
# results
# --------------------------------------------------------------------------


@dataclass
class ResultRecord:
    """One row of a rate-distortion table.

    ``r_q``/``r_0`` are the rates actually used after rounding the basis
    budget to whole bits per column; ``r_0_opt`` is the analytic optimum.
    Empirical fields stay ``None`` when only the plan was computed.
    """

    r_total: float
    r_eff: float
    r_q: float
    r_0: float
    r_0_opt: float
    regime: str
    p: int
    bits_per_column: int
    basis_clamped: bool
    analytic_dq: float
    analytic_d0: float
    analytic_e2e: float
    empirical_t1: float | None = None
    empirical_t2: float | None = None
    empirical_t3: float | None = None
    empirical_e2e: float | None = None
    measured_rate: float | None = None
    mean_chordal_sq: float | None = None
    trials: int = 0
    wall_time: float = 0.0


COLUMNS = tuple(f.name for f in dataclasses.fields(ResultRecord))


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results(records, fh, fmt="csv"):
    """Write records to an open text file; see :func:`emit_results`."""
    records = list(records)
    if not records:
        raise ValidationError("no records to write")
    if fmt not in ("csv", "jsonl"):
        raise ValidationError(f"unknown format {fmt!r}")
    rows = [dataclasses.asdict(r) for r in records]
    if fmt == "csv":
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in rows:
            w.writerow([_cell(row[c]) for c in COLUMNS])
    else:
        for row in rows:
            fh.write(json.dumps({c: row[c] for c in COLUMNS}) + "\n")


def emit_results(records, path, fmt="csv"):
    """Write records as CSV (header row first) or JSON lines, columns in ``COLUMNS`` order."""
    records = list(records)
    if not records:
        raise ValidationError("no records to write")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write_results(records, fh, fmt)
    except OSError as exc:
        raise FormatError(f"{path}: cannot write results ({exc.strerror or exc})") from exc


def read_results(path, fmt="csv"):
    """Parse a file written by :func:`emit_results` back into dicts."""
    with open(path, encoding="utf-8") as fh:
        if fmt == "jsonl":
            return [json.loads(line) for line in fh if line.strip()]
        return list(csv.DictReader(fh))


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------


def structured_complexity(nt, nc, p=None):
    """Parameter and FLOP count of the separable transform.

    Parameters are the ``nt² + nc²`` complex entries of the two factor bases.
    FLOPs count applying ``(U_s ⊗ U_f)^H`` as two factor-wise products,
    ``nt*nc*(nt + nc)`` complex multiply-accumulates, at 2 FLOPs per MAC.
    ``p`` does not change either count: the full factor transforms are applied.
    """
    if min(nt, nc) < 1:
        raise ValidationError("dimensions must be positive")
    params = nt * nt + nc * nc
    cmacs = nt * nc * (nt + nc)
    return params, 2 * cmacs


def _basis_bits(config, model, r0):
    """Whole bits per quantized column for amortized rate ``r0``."""
    if config.basis == "perfect" or model.p == 0:
        return 0, False
    bits = int(math.floor(model.bits_per_column(r0) + 1e-9))
    if bits > config.max_bits_per_column:
        if not config.clamp_basis_bits:
            raise CapacityError(
                f"optimal split needs {bits} bits per column, above the limit "
                f"{config.max_bits_per_column}; enable clamp_basis_bits or lower tau"
            )
        return config.max_bits_per_column, True
    return bits, False


def _factor_bits(config, bits):
    """Split ``bits * (p_s + p_f)`` basis bits into per-column counts for each factor."""
    total = bits * (config.p_s + config.p_f)
    if config.factor_share is None or not config.p_s or not config.p_f:
        return bits, bits
    b_s = int(math.floor(total * config.factor_share / config.p_s))
    b_f = int(math.floor(total * (1 - config.factor_share) / config.p_f))
    return min(b_s, RVQ_MAX_BITS), min(b_f, RVQ_MAX_BITS)


def plan_point(config, source, model, r_total):
    """Analytic part of one rate point: split, rounded basis bits, model values."""
    lam = source.spectrum
    r_eff = effective_rate(r_total, config.b_update, source.n, config.tau)
    if config.basis == "perfect" or model.p == 0:
        split = RateSplit(r_eff, r_eff, 0.0, INACTIVE)
    else:
        split = optimal_split(lam, model, r_eff)
    bits, clamped = _basis_bits(config, model, split.r_0)
    r0 = model.basis_rate(bits) if config.basis != "perfect" and model.p else 0.0
    r0 = min(r0, r_eff)
    rq = max(0.0, r_eff - r0)
    a_dq = dq(lam, rq)
    # with no coefficient bits the decoder outputs zero whatever its basis
    a_d0 = 0.0 if config.basis == "perfect" or rq == 0.0 else d0_model(lam, model, r0)
    return ResultRecord(
        r_total=float(r_total), r_eff=r_eff, r_q=rq, r_0=r0, r_0_opt=split.r_0,
        regime=split.regime, p=model.p, bits_per_column=bits, basis_clamped=clamped,
        analytic_dq=a_dq, analytic_d0=a_d0, analytic_e2e=a_dq + a_d0,
    )


def _channels(config, source, count):
    if source.channels is not None:
        return source.channels.realizations[:count]
    blocks = []
    for b, start in enumerate(range(0, count, config.tau)):
        n_b = min(config.tau, count - start)
        rng = stream(config.seed, CHANNEL, b)
        blocks.append(sample_channels(source.basis, source.spectrum, n_b, config.seed, rng).realizations)
    return np.concatenate(blocks)


def _basis_for_block(config, source, bits, point, block):
    """Decoder basis for one coherence block and the chordal errors behind it."""
    if config.basis == "perfect":
        return source.basis, None
    key = (point, block)
    if config.basis == "full":
        qb = quantize_columns(source.basis, config.p, bits, config.seed, key=key)
        return reconstruction_basis(source.basis, qb, config.tail), qb.column_chordal_sq
    us, _, uf, _, order = source.factors
    qb = quantize_basis(us, uf, config.p_s, config.p_f, _factor_bits(config, bits),
                        config.seed, order=order, key=key)
    qs, qf = qb.factors
    u_hat = np.kron(reconstruction_basis(us, qs, config.tail),
                    reconstruction_basis(uf, qf, config.tail))[:, np.asarray(order)]
    return u_hat, qb.column_chordal_sq


def _sent_modes(config, source):
    """Effective-basis columns built only from quantized factor columns."""
    if config.basis == "full":
        return np.arange(config.p)
    _, ls, _, lf, order = source.factors
    i_s, i_f = np.divmod(np.asarray(order), lf.size)
    return np.flatnonzero((i_s < config.p_s) & (i_f < config.p_f))


def simulate_point(config, source, record, point):
    """Monte Carlo part of one rate point; fills the empirical fields of ``record``."""
    t0 = time.perf_counter()
    h = _channels(config, source, config.trials)
    count = h.shape[0]
    coeffs = h @ source.basis.conj()
    alloc = water_level(source.spectrum, record.r_q)
    qcfg = QuantizerConfig(config.quantizer, config.post_scale)
    cw = quantize_coeffs(coeffs, alloc, qcfg, rng=stream(config.seed, DITHER, point))
    ht_hat = cw.reconstruction
    if config.tail == TAIL_ZEROED and config.basis != "perfect":
        keep = np.zeros(source.n, bool)
        keep[_sent_modes(config, source)] = True
        ht_hat = np.where(keep[None, :], ht_hat, 0.0)

    terms, chordal = [], []
    for b, start in enumerate(range(0, count, config.tau)):
        stop = min(start + config.tau, count)
        u_hat, ch = _basis_for_block(config, source, record.bits_per_column, point, b)
        if ch is not None and ch.size:
            chordal.append(ch)
        terms.append(distortion_terms(h[start:stop], source.basis, u_hat,
                                      ht_hat[start:stop]))
    rep = DistortionReport.from_terms(np.concatenate(terms))
    record = dataclasses.replace(
        record,
        empirical_t1=rep.empirical_t1, empirical_t2=rep.empirical_t2,
        empirical_t3=rep.empirical_t3, empirical_e2e=rep.empirical_e2e,
        measured_rate=cw.measured_rate,
        mean_chordal_sq=float(np.mean(np.concatenate(chordal))) if chordal else None,
        trials=count,
    )
    record.wall_time = record.wall_time + time.perf_counter() - t0
    return record


def _run_point(args):
    config, source, model, point, r_total, simulate = args
    t0 = time.perf_counter()
    rec = plan_point(config, source, model, r_total)
    rec.wall_time = time.perf_counter() - t0
    if simulate:
        rec = simulate_point(config, source, rec, point)
    return rec


def run_rd_sweep(config: ExperimentConfig, simulate=True, source=None, model=None):
    """Rate-distortion sweep over ``config.rates``.

    Results are a deterministic function of the config (wall time aside):
    every random draw comes from a stream keyed by the seed and the rate
    point or coherence block, so ``workers`` does not change the output.
    """
    source = source or prepare_source(config)
    model = model or resolve_model(config, source)
    jobs = [(config, source, model, i, r, simulate) for i, r in enumerate(config.rates)]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_run_point, jobs))
    return [_run_point(j) for j in jobs]


def run_p_sweep(config: ExperimentConfig, p_values, simulate=True):
    """``run_rd_sweep`` repeated for each dominant-column count in ``p_values``.

    In ``kron`` mode each value is used for both ``p_s`` and ``p_f``.
    Records are concatenated in ``p_values`` order.
    """
    p_values = [int(p) for p in p_values]
    if not p_values:
        raise ValidationError("p_values must be non-empty")
    base = prepare_source(config)
    records = []
    for p in p_values:
        if config.basis == "kron":
            cfg = dataclasses.replace(config, p_s=p, p_f=p)
        else:
            cfg = dataclasses.replace(config, p=p)
        records.extend(run_rd_sweep(cfg, simulate, base, resolve_model(cfg, base)))
    return records
