"""Monte-Carlo experiments behind the command-line subcommands.

Block ``i`` of a run draws its data bits and its noise realization from
substreams keyed by ``(master_seed, i)``, so any block can be re-run alone and
results do not depend on the number of workers.  Files are written by the
parent process in block (or SNR) order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io as tio
from . import rng as _rng
from .channel import sample_realization, scale_to_gamma, transmit
from .codec import TurboCodeConfig, build_interleaver, parse_octal, turbo_encode
from .decoder import DecoderTrace, StopReason, decode, digest
from .dynamics import (
    DEFAULT_MAX_PERIOD,
    DEFAULT_WINDOW,
    DYNAMICS_CAP,
    analyze_point,
    frange,
    phase_points,
    sweep_gamma,
)
from .siso import bcjr_extrinsic, build_trellis, map_oracle_extrinsic
from .stopping import StoppingPolicy, genie_best_iteration, zcrease_spread


@dataclass(frozen=True)
class ExperimentConfig:
    code: TurboCodeConfig = field(default_factory=TurboCodeConfig)
    policy: StoppingPolicy = field(default_factory=StoppingPolicy)
    gamma_db: float = 1.0
    grid: tuple[float, ...] = tuple(frange(0.5, 1.5, 0.01))
    block_count: int = 100
    master_seed: int = 1
    realization_seed: int = 1
    dynamics_cap: int = DYNAMICS_CAP
    window: int = DEFAULT_WINDOW
    max_period: int = DEFAULT_MAX_PERIOD
    burn_in: int = 10
    noiseless: bool = False
    workers: int = 1
    svg: bool = False
    output_dir: str = "out"

    def echo(self) -> dict[str, object]:
        """Flat key/value view; the same keys a config file accepts."""
        out: dict[str, object] = dict(self.code.header())
        out["k"] = self.code.k
        p = self.policy
        out.update(
            theta_min=float(p.theta_min),
            theta_mean=p.theta_mean,
            max_half_iterations=p.max_half_iterations,
            policy_enabled=p.enabled,
            buffer_candidates=p.buffer_candidates,
        )
        for f in fields(self):
            if f.name in ("code", "policy"):
                continue
            v = getattr(self, f.name)
            out[f.name] = format_grid(v) if f.name == "grid" else v
        return out


def format_grid(grid: Sequence[float]) -> str:
    return ",".join(repr(float(g)) for g in grid)


def parse_grid(text: str) -> tuple[float, ...]:
    """``lo:hi:step`` (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        lo, hi, step = (float(t) for t in text.split(":"))
        return tuple(frange(lo, hi, step))
    return tuple(float(t) for t in text.split(",") if t.strip())


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_CODE_KEYS = {
    "k": int,
    "feedback_poly": parse_octal,
    "feedforward_poly": parse_octal,
    "interleaver_seed": int,
    "llr_saturation": float,
    "max_log": _bool,
}
_POLICY_KEYS = {
    "theta_min": float,
    "theta_mean": lambda t: None if str(t).strip().lower() in ("", "none") else float(t),
    "max_half_iterations": int,
    "policy_enabled": _bool,
    "buffer_candidates": _bool,
}
_RUN_KEYS = {
    "gamma_db": float,
    "grid": parse_grid,
    "block_count": int,
    "master_seed": int,
    "realization_seed": int,
    "dynamics_cap": int,
    "window": int,
    "max_period": int,
    "burn_in": int,
    "noiseless": _bool,
    "workers": int,
    "svg": _bool,
    "output_dir": str,
}
CONFIG_KEYS = sorted({**_CODE_KEYS, **_POLICY_KEYS, **_RUN_KEYS})


def build_config(values: dict[str, object], base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Apply string (or already typed) overrides to ``base``."""
    base = base or ExperimentConfig()
    unknown = set(values) - set(CONFIG_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")

    def conv(table):
        return {k: (table[k](v) if isinstance(v, str) else v) for k, v in values.items() if k in table}

    code = replace(base.code, **conv(_CODE_KEYS))
    pol = conv(_POLICY_KEYS)
    if "policy_enabled" in pol:
        pol["enabled"] = pol.pop("policy_enabled")
    policy = replace(base.policy, **pol)
    return replace(base, code=code, policy=policy, **conv(_RUN_KEYS))


# -- per-block simulation ---------------------------------------------------


@dataclass
class BlockResult:
    block_id: int
    data_seed: int
    noise_seed: int
    trace: DecoderTrace
    cap_trace: DecoderTrace
    errors_at_stop: int
    spread: int
    zcrease: bool

    def row(self, gamma_db: float) -> list:
        t, c = self.trace, self.cap_trace
        genie_n, genie_e = genie_best_iteration(c)
        return [
            self.block_id,
            gamma_db,
            t.stop_reason.value,
            t.stop_half_iteration,
            self.errors_at_stop,
            genie_n,
            genie_e,
            c.stats[-1].errors,
            self.spread,
            t.half_iterations,
            t.decision_half_iteration,
            t.stats[-1].errors,
            t.stats[t.decision_half_iteration].decisions_digest,
            digest(t.final_decisions),
            int(self.zcrease),
            self.data_seed,
            self.noise_seed,
        ]


STOPPING_COLUMNS = [
    "block_id",
    "gamma_db",
    "stop_reason",
    "stop_half_iteration",
    "errors_at_stop",
    "genie_half_iteration",
    "genie_errors",
    "cap_errors",
    "spread",
    "half_iterations",
    "decision_half_iteration",
    "errors_at_detection",
    "decision_digest",
    "final_digest",
    "zcrease",
    "data_seed",
    "noise_seed",
]
WAVE_COLUMNS = ["n", "mean_abs", "min_abs", "errors", "decisions_digest"]


def block_seeds(master_seed: int, block_id: int) -> tuple[int, int]:
    return (
        _rng.substream_seed(master_seed, block_id, _rng.STREAM_DATA),
        _rng.substream_seed(master_seed, block_id, _rng.STREAM_NOISE),
    )


def run_block(cfg: ExperimentConfig, block_id: int) -> BlockResult:
    """Decode one block under the policy and under a plain iteration cap."""
    code = cfg.code
    k = code.k
    data_seed, noise_seed = block_seeds(cfg.master_seed, block_id)
    bits = _rng.generator(data_seed, _rng.STREAM_DATA).integers(0, 2, size=k).astype(np.uint8)
    interleaver = build_interleaver(code.interleaver_seed, k)
    cw = turbo_encode(bits, code, interleaver)
    if cfg.noiseless:
        z = np.zeros(3 * k)
    else:
        z = scale_to_gamma(sample_realization(noise_seed, k), cfg.gamma_db, k)
    obs = transmit(cw, z, cfg.gamma_db)
    trace = decode(obs, code, cfg.policy, bits, interleaver=interleaver)
    cap = StoppingPolicy.disabled(cfg.policy.max_half_iterations)
    cap_trace = decode(obs, code, cap, bits, interleaver=interleaver)
    errs = cap_trace.errors
    burn = min(cfg.burn_in, len(errs) - 1)
    rises = any(b > a for a, b in zip(errs[burn:], errs[burn + 1 :]))
    return BlockResult(
        block_id=block_id,
        data_seed=data_seed,
        noise_seed=noise_seed,
        trace=trace,
        cap_trace=cap_trace,
        errors_at_stop=int(np.count_nonzero(trace.final_decisions != bits)),
        spread=zcrease_spread(cap_trace, burn),
        zcrease=rises,
    )


def _run_block_task(args):
    return run_block(*args)


def run_blocks(cfg: ExperimentConfig, block_ids: Sequence[int] | None = None) -> list[BlockResult]:
    ids = list(range(cfg.block_count)) if block_ids is None else list(block_ids)
    tasks = [(cfg, i) for i in ids]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_run_block_task, tasks, chunksize=max(1, len(tasks) // (4 * cfg.workers))))
    return [_run_block_task(t) for t in tasks]


# -- summaries --------------------------------------------------------------

SUMMARY_COLUMNS = ["metric", "value"]


def summarize_rows(rows: Sequence[dict], k: int) -> dict[str, object]:
    """Summary over stopping.csv rows (``dict`` of strings or typed values).

    Works identically on freshly computed rows and on rows read back from
    disk, which is what makes the summary verifiable.
    """
    n = len(rows)
    if n == 0:
        return {
            "blocks": 0,
            "avg_ber": float("nan"),
            "avg_half_iterations": float("nan"),
            "worst_block_errors": 0,
            "zcrease_incidence": float("nan"),
            "cap_ber": float("nan"),
            "genie_ber": float("nan"),
            "traceback_count": 0,
            "converged_count": 0,
        }
    stop_errors = [int(r["errors_at_stop"]) for r in rows]
    return {
        "blocks": n,
        "avg_ber": sum(stop_errors) / (n * k),
        "avg_half_iterations": sum(int(r["half_iterations"]) for r in rows) / n,
        "worst_block_errors": max(stop_errors),
        "zcrease_incidence": sum(int(r["zcrease"]) for r in rows) / n,
        "cap_ber": sum(int(r["cap_errors"]) for r in rows) / (n * k),
        "genie_ber": sum(int(r["genie_errors"]) for r in rows) / (n * k),
        "traceback_count": sum(r["stop_reason"] == StopReason.ZCREASE_TRACEBACK.value for r in rows),
        "converged_count": sum(r["stop_reason"] == StopReason.CONVERGED.value for r in rows),
    }


def _header(cfg: ExperimentConfig, **extra) -> dict[str, object]:
    h = cfg.echo()
    # execution details; outputs must not depend on them
    for key in ("grid", "workers", "output_dir", "svg"):
        h.pop(key)
    h.update(extra)
    return h


def _rows_as_dicts(results: Sequence[BlockResult], gamma_db: float) -> list[dict]:
    return [dict(zip(STOPPING_COLUMNS, r.row(gamma_db))) for r in results]


def write_block_outputs(cfg: ExperimentConfig, results: Sequence[BlockResult], out: Path) -> dict[str, object]:
    rows = [r.row(cfg.gamma_db) for r in results]
    tio.write_csv(out / "stopping.csv", _header(cfg), STOPPING_COLUMNS, rows)
    for r in results:
        hdr = _header(cfg, block_id=r.block_id, data_seed=r.data_seed, noise_seed=r.noise_seed)
        tio.write_csv(out / "waves" / f"block_{r.block_id:05d}.csv", hdr, WAVE_COLUMNS, wave_rows(r.trace))
    summary = summarize_rows(_rows_as_dicts(results, cfg.gamma_db), cfg.code.k)
    tio.write_csv(out / "summary.csv", _header(cfg), SUMMARY_COLUMNS, list(summary.items()))
    return summary


def wave_rows(trace: DecoderTrace) -> list[list]:
    return [[s.n, s.mean_abs, s.min_abs, s.errors, s.decisions_digest] for s in trace.stats]


def cmd_simulate(cfg: ExperimentConfig) -> dict[str, object]:
    out = Path(cfg.output_dir)
    results = run_blocks(cfg)
    return write_block_outputs(cfg, results, out)


def stopping_report(cfg: ExperimentConfig, results: Sequence[BlockResult]) -> dict[str, object]:
    """Policy vs fixed cap vs genie, plus traceback diagnostics."""
    k = cfg.code.k
    n = len(results)
    fired = [r for r in results if r.trace.stop_reason is StopReason.ZCREASE_TRACEBACK]
    improved = [r for r in fired if r.trace.stats[r.trace.decision_half_iteration].errors <= r.trace.stats[-1].errors]
    digest_ok = [r for r in fired if digest(r.trace.final_decisions) == r.trace.stats[r.trace.decision_half_iteration].decisions_digest]
    genie = [genie_best_iteration(r.cap_trace) for r in results]
    cap_half = cfg.policy.max_half_iterations
    report = {
        "blocks": n,
        "policy_ber": sum(r.errors_at_stop for r in results) / (n * k) if n else float("nan"),
        "policy_avg_half_iterations": sum(r.trace.half_iterations for r in results) / n if n else float("nan"),
        "policy_worst_block_errors": max((r.errors_at_stop for r in results), default=0),
        "cap_ber": sum(r.cap_trace.stats[-1].errors for r in results) / (n * k) if n else float("nan"),
        "cap_avg_half_iterations": float(cap_half) if n else float("nan"),
        "cap_worst_block_errors": max((r.cap_trace.stats[-1].errors for r in results), default=0),
        "genie_ber": sum(e for _, e in genie) / (n * k) if n else float("nan"),
        "genie_avg_half_iterations": sum(h + 1 for h, _ in genie) / n if n else float("nan"),
        "genie_worst_block_errors": max((e for _, e in genie), default=0),
        "traceback_fired": len(fired),
        "traceback_not_worse": len(improved),
        "traceback_digest_match": len(digest_ok),
        "converged_stops": sum(r.trace.stop_reason is StopReason.CONVERGED for r in results),
    }
    return report


def cmd_stopping_eval(cfg: ExperimentConfig) -> dict[str, object]:
    out = Path(cfg.output_dir)
    results = run_blocks(cfg)
    write_block_outputs(cfg, results, out)
    report = stopping_report(cfg, results)
    table = [
        [name, report[f"{name}_ber"], report[f"{name}_avg_half_iterations"], report[f"{name}_worst_block_errors"]]
        for name in ("policy", "cap", "genie")
    ]
    tio.write_csv(out / "comparison.csv", _header(cfg), ["scheme", "ber", "avg_half_iterations", "worst_block_errors"], table)
    return report


# -- dynamics ---------------------------------------------------------------


def cmd_sweep(cfg: ExperimentConfig):
    out = Path(cfg.output_dir)
    u = sample_realization(cfg.realization_seed, cfg.code.k)
    res = sweep_gamma(u, cfg.grid, cfg.code, cfg.dynamics_cap, cfg.window, cfg.max_period, workers=cfg.workers)
    hdr = _header(cfg, grid=format_grid(cfg.grid))
    bif = [
        [p.gamma_db, i, float(x), p.label.tag]
        for p in res.points
        for i, x in enumerate(p.tail)
    ]
    tio.write_csv(out / "bifurcation.csv", hdr, ["gamma_db", "sample_index", "x_value", "label"], bif)
    labels = [
        [
            p.gamma_db,
            p.label.tag,
            p.label.kind.value,
            p.label.subkind,
            p.label.period,
            p.label.sensitive,
            p.label.transient_length,
            p.label.tail_errors,
            p.label.best_period,
            p.label.residual,
            p.label.describe(),
        ]
        for p in res.points
    ]
    tio.write_csv(
        out / "labels.csv",
        hdr,
        ["gamma_db", "label", "kind", "subkind", "period", "sensitive", "transient_length", "tail_errors", "best_period", "residual", "description"],
        labels,
    )
    low, mid, high = res.regions()
    tio.write_csv(
        out / "regions.csv",
        hdr,
        ["metric", "value"],
        [
            ["gamma1_hat", res.gamma1_hat],
            ["gamma2_hat", res.gamma2_hat],
            ["low_points", len(low)],
            ["middle_points", len(mid)],
            ["high_points", len(high)],
        ],
    )
    if cfg.svg:
        tio.svg_plot(
            out / "bifurcation.svg",
            [([p.gamma_db] * len(p.tail), list(map(float, p.tail))) for p in res.points],
            title=f"bifurcation diagram, realization {cfg.realization_seed}",
            xlabel="gamma (dB)",
            ylabel="E|m|",
            scatter=True,
        )
    return res


def cmd_trace(cfg: ExperimentConfig, gamma_db: float | None = None, seed: int | None = None):
    """Wave and phase data for the all-zero block under one realization."""
    gamma_db = cfg.gamma_db if gamma_db is None else gamma_db
    seed = cfg.realization_seed if seed is None else seed
    out = Path(cfg.output_dir)
    u = sample_realization(seed, cfg.code.k)
    trace, label = analyze_point(u, gamma_db, cfg.code, cfg.dynamics_cap, cfg.window, cfg.max_period)
    hdr = _header(cfg, gamma_db=gamma_db, realization_seed=seed, label=label.tag)
    tio.write_csv(out / "wave.csv", hdr, WAVE_COLUMNS, wave_rows(trace))
    phase = [[n, a, b] for n, (a, b) in enumerate(phase_points(trace))]
    tio.write_csv(out / "phase.csv", hdr, ["n", "x_n", "x_np1"], phase)
    if cfg.svg:
        ns = [s.n for s in trace.stats]
        tio.svg_plot(
            out / "wave.svg",
            [(ns, [s.mean_abs for s in trace.stats]), (ns, [s.min_abs for s in trace.stats])],
            title=f"wave, gamma={gamma_db} dB ({label.describe()})",
            xlabel="half iteration",
            ylabel="E|m|, min|m|",
        )
        tio.svg_plot(
            out / "phase.svg",
            [([p[1] for p in phase], [p[2] for p in phase])],
            title=f"trajectory, gamma={gamma_db} dB",
            xlabel="x_n",
            ylabel="x_n+1",
        )
    return trace, label


def oracle_check(k: int, trials: int, seed: int, config: TurboCodeConfig | None = None) -> float:
    """Largest ``|bcjr - oracle|`` over random instances of length ``k``."""
    code = replace(config or TurboCodeConfig(k=k), k=k)
    trellis = build_trellis(code)
    g = _rng.generator(seed, k)
    worst = 0.0
    for _ in range(trials):
        ls, lp = g.normal(0.0, 2.0, size=(2, k))
        la = g.normal(0.0, 1.0, size=k)
        a = bcjr_extrinsic(ls, lp, la, trellis, saturation=None, max_log=False)
        b = map_oracle_extrinsic(ls, lp, la, code)
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst


def defaults_text() -> str:
    return "\n".join(f"{k} = {tio.fmt(v)}" for k, v in ExperimentConfig().echo().items()) + "\n"
