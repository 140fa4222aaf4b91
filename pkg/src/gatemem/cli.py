"""Command-line pipeline: simulate, reconstruct, analyze, scan, and
report.

Commands compose through files: ``simulate`` writes count records,
``tomo`` turns a records file into a channel file, ``analyze``/``scan``/
``ptensor`` consume channel files and the model, and ``errors`` runs the
uncertainty analyses.  Outputs are deterministic for a fixed seed and
configuration; exit codes are 0 (success), 2 (validation), 3
(numerical), 4 (I/O).
"""

from __future__ import annotations

import functools
import glob
import json
import os
import sys

import click
import numpy as np

from . import errprop, nonmarkov, pipeline, serialize
from .channels import GateLabel
from .exceptions import (
    ConvergenceError,
    DimensionError,
    IncompleteDataError,
    LabelError,
    SingularChannelError,
    SolverError,
    SupportError,
    ValidationError,
)
from .nonmarkov import DEFAULT_AVG_SAMPLES, DEFAULT_SCAN_NMAX
from .simulator import (
    DEFAULT_COUPLING,
    SEModel,
    SpamSpec,
    build_default_model,
    cji_circuit,
    extract_channel,
)
from .tomography import build_frame

_VALIDATION_ERRORS = (ValidationError, DimensionError, LabelError, IncompleteDataError)
_NUMERICAL_ERRORS = (SolverError, ConvergenceError, SingularChannelError, SupportError)


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _VALIDATION_ERRORS as err:
            click.echo(f"validation error: {err}", err=True)
            if isinstance(err, IncompleteDataError):
                click.echo(f"missing: {err.missing}", err=True)
            sys.exit(2)
        except _NUMERICAL_ERRORS as err:
            click.echo(f"numerical error: {err}", err=True)
            sys.exit(3)
        except (OSError, json.JSONDecodeError) as err:
            click.echo(f"i/o error: {err}", err=True)
            sys.exit(4)

    return wrapper


def _load_model(path: str) -> tuple[SEModel, dict]:
    spec = serialize.load_json(path)
    spam_cfg = spec.get("spam", {})
    spam = SpamSpec(
        prep_strength=float(spam_cfg.get("prep", 0.0)),
        meas_strength=float(spam_cfg.get("meas", 0.0)),
        seed=int(spam_cfg.get("seed", 0)),
    )
    env_initial = None
    if "env_initial" in spec:
        env_initial = serialize.decode_matrix(spec["env_initial"])
    model = build_default_model(
        labels=spec["gates"],
        coupling=float(spec.get("coupling", DEFAULT_COUPLING)),
        reset_policy=spec.get("reset_policy", "persistent"),
        sys_qubits=spec.get("sys_qubits"),
        env_omega=float(spec.get("env_omega", 0.7)),
        durations=spec.get("durations"),
        env_initial=env_initial,
        spam=spam,
    )
    return model, spec


def _parse_sequences(text: str) -> list[tuple[GateLabel, ...]]:
    """Sequences are ';'-separated; gates within one are ','-separated.
    Wire indices use '.' (e.g. 'CX@1.0,H@1;X')."""
    sequences = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        sequences.append(tuple(GateLabel.parse(tok) for tok in chunk.split(",")))
    if not sequences:
        raise ValidationError("no gate sequences given")
    return sequences


def _sequence_slug(gates) -> str:
    return "-".join(f"{g.name}{''.join(str(q) for q in g.qubits)}" for g in gates)


def _gate_tokens(gates) -> list[str]:
    return [str(g) for g in gates]


@click.group()
def main():
    """Memory analysis for gate sequences: tomography, conditional-map
    tests, channel distances, and error propagation."""


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--gates", required=True, help="semicolon-separated gate sequences, e.g. 'X;Z;X,Z'")
@click.option("--shots", default=1024, show_default=True, type=int)
@click.option("--exact", is_flag=True, help="emit exact probabilities instead of counts")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
@_exit_codes
def simulate(model_path, gates, shots, exact, seed, out_dir):
    """Sample tomography count records for each gate sequence."""
    model, model_spec = _load_model(model_path)
    sequences = _parse_sequences(gates)
    cfg = {
        "command": "simulate",
        "model": model_spec,
        "gates": gates,
        "shots": None if exact else shots,
        "seed": seed,
    }
    cfg_hash = serialize.config_hash(cfg)
    frame = build_frame(model.sys_qubits)
    for index, sequence in enumerate(sequences):
        records = pipeline.simulate_records(
            model, sequence, None if exact else shots, seed=seed + index, frame=frame
        )
        payload = serialize.records_payload(records, model.sys_qubits, cfg_hash, seed)
        payload["gates"] = _gate_tokens(sequence)
        path = os.path.join(out_dir, f"records_{_sequence_slug(sequence)}.json")
        serialize.dump_json(path, payload)
        click.echo(f"wrote {path} ({len(records)} records)")


@main.command()
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@_exit_codes
def tomo(records_path, out_path):
    """Reconstruct a channel from a records file."""
    payload = serialize.load_json(records_path)
    records = serialize.records_from_payload(payload)
    frame = build_frame(payload["n_qubits"])
    gates = payload.get("gates", [])
    result = pipeline.reconstruct_channel(records, frame, provenance="+".join(gates))
    cfg = {"command": "tomo", "records": payload}
    out = serialize.channel_payload(
        result.channel,
        gates=gates,
        shots=records[0].shots,
        cfg_hash=serialize.config_hash(cfg),
        seed=payload.get("seed"),
    )
    out["loglik"] = {k: float(v) for k, v in result.loglik.items()}
    out["iterations"] = {k: int(v) for k, v in result.iterations.items()}
    serialize.dump_json(out_path, out)
    click.echo(f"wrote {out_path}")


def _load_channel_dir(channels_dir: str):
    """Split channel files into single-gate marginals and two-gate joints."""
    marginals, joints = {}, {}
    paths = sorted(glob.glob(os.path.join(channels_dir, "channel_*.json")))
    if not paths:
        raise IncompleteDataError(f"no channel files in {channels_dir}", [channels_dir])
    for path in paths:
        payload = serialize.load_json(path)
        chan = serialize.channel_from_payload(payload)
        gates = [GateLabel.parse(tok) for tok in payload.get("gates", [])]
        if len(gates) == 1:
            marginals[str(gates[0])] = chan
        elif len(gates) == 2:
            joints[(str(gates[0]), str(gates[1]))] = chan
    return marginals, joints


@main.command()
@click.option("--channels", "channels_dir", required=True, type=click.Path(exists=True))
@click.option("--baseline", "baseline_dir", type=click.Path(exists=True), default=None,
              help="channel files of a memoryless run at the same shot count")
@click.option("--metric", type=click.Choice(["avg", "diamond", "both"]), default="avg",
              show_default=True)
@click.option("--samples", default=DEFAULT_AVG_SAMPLES, show_default=True, type=int)
@click.option("--scale-figure", is_flag=True, help="apply display scalings to matrix output")
@click.option("--pair", default=None, help="U,V pair for the distance histogram")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
@_exit_codes
def analyze(channels_dir, baseline_dir, metric, samples, scale_figure, pair, seed, out_dir):
    """Conditional-map analyses over a set of reconstructed channels."""
    marginals, joints = _load_channel_dir(channels_dir)
    if not joints:
        raise IncompleteDataError("no two-gate channel files found", ["joints"])
    cfg = {
        "command": "analyze",
        "channels": sorted(marginals) + [f"{u},{v}" for u, v in sorted(joints)],
        "metric": metric,
        "samples": samples,
        "scale_figure": scale_figure,
        "pair": pair,
        "seed": seed,
    }
    cfg_hash = serialize.config_hash(cfg)
    metrics = ["avg", "diamond"] if metric == "both" else [metric]
    os.makedirs(out_dir, exist_ok=True)

    u_labels = sorted({u for u, _ in joints})
    v_labels = sorted({v for _, v in joints})
    missing = [f"{u},{v}" for u in u_labels for v in v_labels if (u, v) not in joints]
    missing += [g for g in sorted(set(u_labels) | set(v_labels)) if g not in marginals]
    if missing:
        raise IncompleteDataError(f"channel grid is incomplete: {missing}", missing)

    # CP-violation matrix of the conditioned maps
    cpv = np.zeros((len(u_labels), len(v_labels)))
    conditionals_by_v = {v: {} for v in v_labels}
    for i, u in enumerate(u_labels):
        for j, v in enumerate(v_labels):
            cm = nonmarkov.conditional_map(joints[(u, v)], marginals[u])
            cpv[i, j] = nonmarkov.cp_violation(cm)
            conditionals_by_v[v][u] = cm
    cp_matrix = nonmarkov.DistanceMatrix(
        tuple(u_labels), tuple(v_labels), cpv, metric="cp-violation"
    )
    serialize.atomic_write_text(
        os.path.join(out_dir, "cp_violation.csv"), serialize.matrix_csv(cp_matrix, cfg_hash, seed)
    )
    serialize.dump_json(
        os.path.join(out_dir, "cp_violation.json"),
        serialize.matrix_payload(cp_matrix, cfg_hash, seed),
    )

    for m in metrics:
        rng = np.random.default_rng(seed)
        cvm = nonmarkov.conditional_vs_marginal_matrix(
            marginals, joints, metric=m, m_samples=samples, rng=rng,
            scale_figure=scale_figure,
        )
        serialize.atomic_write_text(
            os.path.join(out_dir, f"cond_vs_marginal_{m}.csv"),
            serialize.matrix_csv(cvm, cfg_hash, seed),
        )
        serialize.dump_json(
            os.path.join(out_dir, f"cond_vs_marginal_{m}.json"),
            serialize.matrix_payload(cvm, cfg_hash, seed),
        )
        for v in v_labels:
            if len(conditionals_by_v[v]) < 2:
                continue
            rng = np.random.default_rng(seed + 1)
            gdm = nonmarkov.gate_dependence_matrix(
                conditionals_by_v[v], metric=m, m_samples=samples, rng=rng,
                scale_figure=scale_figure, target_label=v,
            )
            slug = v.replace("@", "").replace(".", "").replace(",", "_")
            serialize.atomic_write_text(
                os.path.join(out_dir, f"gate_dependence_{slug}_{m}.csv"),
                serialize.matrix_csv(gdm, cfg_hash, seed),
            )

    # per-sample distance histogram for one pair, with optional baseline
    if pair is None:
        pair_u, pair_v = u_labels[0], v_labels[0]
    else:
        tokens = [str(GateLabel.parse(t)) for t in pair.split(",")]
        pair_u, pair_v = tokens[0], tokens[1]
    if (pair_u, pair_v) in joints:
        rng = np.random.default_rng(seed + 2)
        cm = nonmarkov.conditional_map(joints[(pair_u, pair_v)], marginals[pair_u])
        dist = nonmarkov.avg_trace_distance(cm.channel, marginals[pair_v], samples, rng)
        payload = {
            "schema": f"gatemem.histogram/{serialize.SCHEMA_VERSION}",
            "config_hash": cfg_hash,
            "seed": seed,
            "pair": [pair_u, pair_v],
            "mean": dist.mean,
            "stderr": dist.stderr,
            "samples": [float(x) for x in dist.samples],
        }
        if baseline_dir is not None:
            base_marg, base_joints = _load_channel_dir(baseline_dir)
            if (pair_u, pair_v) in base_joints:
                rng = np.random.default_rng(seed + 2)
                base_cm = nonmarkov.conditional_map(
                    base_joints[(pair_u, pair_v)], base_marg[pair_u]
                )
                base = nonmarkov.avg_trace_distance(
                    base_cm.channel, base_marg[pair_v], samples, rng
                )
                payload["baseline_mean"] = base.mean
                payload["baseline_stderr"] = base.stderr
                payload["baseline_samples"] = [float(x) for x in base.samples]
        slug = f"{pair_u}_{pair_v}".replace("@", "").replace(".", "").replace(",", "_")
        serialize.dump_json(os.path.join(out_dir, f"histogram_{slug}.json"), payload)
    click.echo(f"wrote analysis to {out_dir}")


@main.command()
@click.option("--channels", "channels_dir", required=True, type=click.Path(exists=True))
@click.option("--nmax", default=DEFAULT_SCAN_NMAX, show_default=True, type=int)
@click.option("--metric", type=click.Choice(["avg", "diamond", "both"]), default="avg",
              show_default=True)
@click.option("--samples", default=DEFAULT_AVG_SAMPLES, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
@_exit_codes
def scan(channels_dir, nmax, metric, samples, seed, out_dir):
    """Memory-length scan over channels for repeated gate applications."""
    paths = sorted(glob.glob(os.path.join(channels_dir, "channel_*.json")))
    by_length = {}
    for path in paths:
        payload = serialize.load_json(path)
        n = len(payload.get("gates", []))
        if 1 <= n <= nmax:
            by_length[n] = serialize.channel_from_payload(payload)
    missing = [str(n) for n in range(1, nmax + 1) if n not in by_length]
    if missing:
        raise IncompleteDataError(f"missing sequence lengths: {missing}", missing)
    cfg = {"command": "scan", "nmax": nmax, "metric": metric, "samples": samples, "seed": seed}
    cfg_hash = serialize.config_hash(cfg)
    metrics = ("avg", "diamond") if metric == "both" else (metric,)
    rng = np.random.default_rng(seed)
    result = nonmarkov.memory_scan(
        [by_length[n] for n in range(1, nmax + 1)],
        metrics=metrics, m_samples=samples, rng=rng,
    )
    os.makedirs(out_dir, exist_ok=True)
    for m in metrics:
        serialize.atomic_write_text(
            os.path.join(out_dir, f"scan_{m}.csv"), serialize.scan_csv(result, m, cfg_hash, seed)
        )
    serialize.dump_json(
        os.path.join(out_dir, "scan.json"), serialize.scan_payload(result, cfg_hash, seed)
    )
    click.echo(f"wrote scan to {out_dir}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--gates", default="S,T", show_default=True, help="U,V pair for the two-step circuit")
@click.option("--shots", default=None, type=int, help="shot count for the reference maps")
@click.option("--exact", is_flag=True, help="exact-statistics reference maps")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@_exit_codes
def ptensor(model_path, gates, shots, exact, seed, out_path):
    """Two-step process state against its memoryless reference."""
    model, model_spec = _load_model(model_path)
    tokens = [GateLabel.parse(t) for t in gates.split(",")]
    if len(tokens) != 2:
        raise ValidationError("ptensor needs exactly two gates, e.g. --gates S,T")
    u_gate, v_gate = tokens
    shots_val = None if (exact or shots is None) else int(shots)
    cfg = {
        "command": "ptensor", "model": model_spec, "gates": gates,
        "shots": shots_val, "seed": seed,
    }
    measured = cji_circuit(model, u_gate, v_gate)
    if shots_val is None:
        chan_u = extract_channel(model, [u_gate])
        chan_v = extract_channel(model, [v_gate])
    else:
        chan_u = pipeline.reconstruct_from_model(model, [u_gate], shots_val, seed).channel
        chan_v = pipeline.reconstruct_from_model(model, [v_gate], shots_val, seed + 1).channel
    reference = nonmarkov.markovian_choi_reference(chan_u, chan_v)
    value = nonmarkov.process_tensor_proxy(measured, reference)
    payload = {
        "schema": f"gatemem.ptensor/{serialize.SCHEMA_VERSION}",
        "config_hash": serialize.config_hash(cfg),
        "seed": seed,
        "gates": _gate_tokens(tokens),
        "shots": shots_val,
        "relative_entropy": float(value),
        "regularization": 1e-12,
        "measured": serialize.encode_matrix(measured.data),
        "reference": serialize.encode_matrix(reference),
    }
    serialize.dump_json(out_path, payload)
    click.echo(f"relative entropy to memoryless reference: {value:.6f}")
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--records", "records_path", type=click.Path(exists=True), default=None)
@click.option("--trials", default=200, show_default=True, type=int)
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--gate", default=None, help="gate token for the SPAM scaling study")
@click.option("--eps-grid", default="0,1e-4,3e-4,1e-3,3e-3,1e-2", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@_exit_codes
def errors(records_path, trials, model_path, gate, eps_grid, seed, out_path):
    """Uncertainty reports: statistical propagation or SPAM scaling."""
    if records_path is not None:
        payload = serialize.load_json(records_path)
        records = serialize.records_from_payload(payload)
        frame = build_frame(payload["n_qubits"])
        point = pipeline.reconstruct_channel(records, frame)

        def metric(trial_records) -> float:
            result = pipeline.reconstruct_channel(trial_records, frame)
            return float(
                np.linalg.norm(result.channel.superop - point.channel.superop)
            )

        rng = np.random.default_rng(seed)
        report = errprop.propagate_statistics(
            records, metric, trials, rng, metric_name="frobenius-to-point-estimate"
        )
        cfg = {"command": "errors", "records": payload, "trials": trials, "seed": seed}
        out = {
            "schema": f"gatemem.uncertainty/{serialize.SCHEMA_VERSION}",
            "config_hash": serialize.config_hash(cfg),
            "seed": seed,
            "metric": report.metric_name,
            "point_estimate": report.point_estimate,
            "std": report.std,
            "trials": report.trials,
            "failed_trials": report.failed_trials,
            "shots": report.shots,
            "values": list(report.values),
        }
        serialize.dump_json(out_path, out)
        click.echo(f"{report.metric_name}: std={report.std:.6g} over {report.trials} trials")
        click.echo(f"wrote {out_path}")
        return

    if model_path is None or gate is None:
        raise ValidationError("need either --records or both --model and --gate")
    model, model_spec = _load_model(model_path)
    strengths = [float(tok) for tok in eps_grid.split(",")]
    decomposition = errprop.spam_scaling(model, GateLabel.parse(gate), strengths)
    cfg = {
        "command": "errors-spam", "model": model_spec, "gate": gate,
        "eps_grid": eps_grid, "seed": seed,
    }
    out = {
        "schema": f"gatemem.spamscaling/{serialize.SCHEMA_VERSION}",
        "config_hash": serialize.config_hash(cfg),
        "seed": seed,
        "gate": gate,
        "strengths": list(decomposition.strengths),
        "errors": list(decomposition.errors),
        "slope": decomposition.slope,
        "intercept": decomposition.intercept,
        "r_squared": decomposition.r_squared,
    }
    serialize.dump_json(out_path, out)
    click.echo(
        f"error vs strength: slope={decomposition.slope:.3f} "
        f"r^2={decomposition.r_squared:.4f}"
    )
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
