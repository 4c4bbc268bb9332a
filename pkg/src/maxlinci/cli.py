"""Command line front end: JSON models in, JSON/CSV/DOT verdicts out.

Model files are ``{"nodes": [...], "edges": [{"from","to","weight"}]}``
with weights given as strings ("p/q" or a finite decimal) so they parse
exactly.  Context files are ``{"observed": {label: value-string}}``.
Exit codes: 0 on success (always, for ``ci`` verdicts), 2 on usage or
validation errors, 3 when the observed context is impossible.  Output is
deterministic: identical inputs and seed give byte-identical bytes.
"""

from __future__ import annotations

import json
import os
from fractions import Fraction
from typing import Any, Optional, Sequence

import click

from . import impact as impact_mod
from .context import (
    Context,
    ImpossibleContext,
    analyze,
    compatible_impact_graphs,
    partition,
    source_dag,
)
from .impact import Galaxy, TieDetected, TooLarge, enumerate_impact_graphs, realized_impact_graph
from .network import WeightedDag, dot_digraph, evaluate
from .representation import (
    DegenerateBlock,
    InnovationDist,
    build_representation,
    conditional_sampler,
)
from .separation import (
    SetsNotDisjoint,
    ci_context,
    ci_fixed_c,
    ci_fixed_c_complete,
    ci_generic,
    d_separated,
)
from .trop import Rat, as_rat, trop_mul

SCHEMA = "maxlin-ci/1"


class CliError(click.ClickException):
    exit_code = 2


class ImpossibleContextError(click.ClickException):
    exit_code = 3


def _apply_guard_env() -> None:
    raw = os.environ.get("MAXLIN_GUARD")
    if raw is None:
        return
    try:
        guard = int(raw)
    except ValueError:
        raise CliError(f"MAXLIN_GUARD must be an integer, got {raw!r}")
    if guard < 1:
        raise CliError("MAXLIN_GUARD must be positive")
    impact_mod.ENUMERATION_GUARD = guard


# -- file parsing ---------------------------------------------------------


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror or exc}")


def _load_json(path: str) -> tuple[Any, str]:
    text = _read_text(path)
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}: {exc.msg}")


def _line_of(text: str, needle: str, occurrence: int = 0) -> Optional[int]:
    at = -1
    for _ in range(occurrence + 1):
        at = text.find(needle, at + 1)
        if at < 0:
            return None
    return text.count("\n", 0, at) + 1


def _anchored(path: str, text: str, message: str, needle: str, occurrence: int = 0) -> CliError:
    line = _line_of(text, needle, occurrence)
    where = f"{path}:{line}" if line is not None else path
    return CliError(f"{where}: {message}")


def parse_model(path: str) -> WeightedDag:
    """Load and validate a model file, anchoring errors to source lines."""
    doc, text = _load_json(path)
    if not isinstance(doc, dict):
        raise CliError(f"{path}:1: model file must be a JSON object")
    nodes = doc.get("nodes")
    if not isinstance(nodes, list) or not all(isinstance(l, str) for l in nodes):
        raise _anchored(path, text, '"nodes" must be a list of label strings', '"nodes"')
    if not nodes:
        raise _anchored(path, text, "model declares no nodes", '"nodes"')
    seen: set[str] = set()
    for lab in nodes:
        if lab in seen:
            raise _anchored(path, text, f"duplicate node label {lab!r}", f'"{lab}"', 1)
        seen.add(lab)
    raw_edges = doc.get("edges", [])
    if not isinstance(raw_edges, list):
        raise _anchored(path, text, '"edges" must be a list', '"edges"')
    triples: list[tuple[str, str, Rat]] = []
    pairs: set[tuple[str, str]] = set()
    for k, entry in enumerate(raw_edges):
        def bad(message: str) -> CliError:
            return _anchored(path, text, f"edge #{k + 1}: {message}", '"from"', k)

        if not isinstance(entry, dict):
            raise bad("must be an object with from/to/weight")
        missing = [key for key in ("from", "to", "weight") if key not in entry]
        if missing:
            raise bad(f"missing {', '.join(missing)}")
        frm, to, weight = entry["from"], entry["to"], entry["weight"]
        if not isinstance(frm, str) or not isinstance(to, str):
            raise bad("from/to must be label strings")
        if frm not in seen:
            raise bad(f"undeclared label {frm!r}")
        if to not in seen:
            raise bad(f"undeclared label {to!r}")
        if frm == to:
            raise bad(f"self-loop at {frm!r}")
        if (frm, to) in pairs:
            raise bad(f"duplicate edge {frm!r} -> {to!r}")
        pairs.add((frm, to))
        if isinstance(weight, float):
            raise bad('weight must be a string such as "1/2" or "0.5", not a JSON float')
        if not isinstance(weight, (str, int)):
            raise bad("weight must be a rational string")
        try:
            w = as_rat(weight)
        except (ValueError, ZeroDivisionError, TypeError):
            raise bad(f"cannot parse weight {weight!r} as a rational")
        if w <= 0:
            raise bad(f"weight must be positive, got {w}")
        triples.append((frm, to, w))
    try:
        return WeightedDag(nodes, triples)
    except ValueError as exc:
        # the per-edge checks above leave only whole-model failures (cycles)
        raise _anchored(path, text, str(exc), '"edges"')


def parse_context(path: str, model: WeightedDag) -> Context:
    doc, text = _load_json(path)
    if not isinstance(doc, dict) or not isinstance(doc.get("observed"), dict):
        raise CliError(f'{path}:1: context file must be {{"observed": {{label: value}}}}')
    observed = doc["observed"]
    if not observed:
        raise _anchored(path, text, "context observes no nodes", '"observed"')
    values: dict[str, Any] = {}
    for lab, raw in observed.items():
        def bad(message: str) -> CliError:
            return _anchored(path, text, message, f'"{lab}"')

        if lab not in model.labels:
            raise bad(f"observed label {lab!r} is not a model node")
        if isinstance(raw, float):
            raise bad(f"value for {lab!r} must be a string, not a JSON float")
        if not isinstance(raw, (str, int)):
            raise bad(f"value for {lab!r} must be a rational string")
        try:
            val = as_rat(raw)
        except (ValueError, ZeroDivisionError, TypeError):
            raise bad(f"cannot parse value {raw!r} for {lab!r} as a rational")
        if val <= 0:
            raise bad(f"value for {lab!r} must be positive, got {val}")
        values[lab] = val
    return Context.from_mapping(values)


# -- rendering ------------------------------------------------------------


def _num(value: Rat) -> dict[str, str]:
    f = Fraction(value)
    return {"fraction": str(f), "decimal": repr(float(f))}


def _num_map(items: Sequence[tuple[str, Rat]]) -> dict[str, dict[str, str]]:
    return {lab: _num(val) for lab, val in sorted(items)}


def _edge_list(edges) -> list[list[str]]:
    return [[frm, to] for frm, to in sorted(edges)]


def _galaxy_json(g: Galaxy) -> dict[str, Any]:
    return {"roots": sorted(g.roots), "edges": _edge_list(g.edges)}


def _context_json(context: Context) -> dict[str, Any]:
    return {"observed": _num_map(context.pins)}


def _dump(payload: dict[str, Any]) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        click.echo(text, nl=False)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _labels_option(_ctx, param, value: Optional[str]) -> tuple[str, ...]:
    if value is None:
        return ()
    labels = tuple(part.strip() for part in value.split(",") if part.strip())
    if not labels:
        raise CliError(f"--{param.name} needs at least one label")
    return labels


def _check_labels(model: WeightedDag, labels: Sequence[str], flag: str) -> frozenset[str]:
    for lab in labels:
        if lab not in model.labels:
            raise CliError(f"--{flag}: {lab!r} is not a model node")
    return frozenset(labels)


# -- commands -------------------------------------------------------------


@click.group()
def main() -> None:
    """Exact conditional independence engine for max-linear networks."""
    _apply_guard_env()


_model_arg = click.argument("model_file", type=click.Path(exists=True, dir_okay=False))
_out_opt = click.option("--out", type=click.Path(dir_okay=False), default=None,
                        help="Write output to a file instead of stdout.")


@main.command()
@_model_arg
@_out_opt
def kleene(model_file: str, out: Optional[str]) -> None:
    """Print the Kleene star of the model's coefficient matrix."""
    model = parse_model(model_file)
    cs = model.closure
    payload = {
        "schema": SCHEMA,
        "command": "kleene",
        "labels": list(model.labels),
        "matrix": [[_num(cs[i, j]) for j in range(model.n)] for i in range(model.n)],
    }
    _emit(_dump(payload), out)


@main.command()
@_model_arg
@click.option("--context", "context_file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Restrict to impact graphs compatible with an observation.")
@_out_opt
def impact(model_file: str, context_file: Optional[str], out: Optional[str]) -> None:
    """List the valid impact graphs, optionally those compatible with a context."""
    model = parse_model(model_file)
    try:
        if context_file is None:
            graphs = enumerate_impact_graphs(model)
            payload: dict[str, Any] = {"schema": SCHEMA, "command": "impact"}
        else:
            context = parse_context(context_file, model)
            graphs = compatible_impact_graphs(model, context)
            payload = {
                "schema": SCHEMA,
                "command": "impact",
                "context": _context_json(context),
            }
    except TooLarge as exc:
        raise CliError(str(exc))
    except ImpossibleContext as exc:
        raise ImpossibleContextError(str(exc))
    payload["count"] = len(graphs)
    payload["graphs"] = [_galaxy_json(g) for g in sorted(graphs, key=lambda g: sorted(g.edges))]
    _emit(_dump(payload), out)


@main.command("source-dag")
@_model_arg
@click.option("--context", "context_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--dot", "as_dot", is_flag=True, help="Emit DOT instead of JSON.")
@_out_opt
def source_dag_cmd(model_file: str, context_file: str, as_dot: bool, out: Optional[str]) -> None:
    """Context-specific source DAG: where observed extremes can come from."""
    model = parse_model(model_file)
    context = parse_context(context_file, model)
    try:
        dag = source_dag(model, context)
        info = analyze(model, context)
    except TooLarge as exc:
        raise CliError(str(exc))
    except ImpossibleContext as exc:
        raise ImpossibleContextError(str(exc))
    if as_dot:
        conditioned = set(dag.conditioning)
        constant = set(info.frozen) - conditioned
        text = dot_digraph(
            model.labels,
            sorted(dag.edges),
            red=conditioned,
            shaded=constant,
            dashed=sorted(dag.removed),
            name="source_dag",
        )
        _emit(text, out)
        return
    payload = {
        "schema": SCHEMA,
        "command": "source-dag",
        "context": _context_json(context),
        "edges": _edge_list(dag.edges),
        "removed": _edge_list(dag.removed),
        "total_impact": _edge_list(dag.total_impact),
        "constant": _num_map(info.frozen_values),
    }
    _emit(_dump(payload), out)


@main.command("partition")
@_model_arg
@click.option("--context", "context_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@_out_opt
def partition_cmd(model_file: str, context_file: str, out: Optional[str]) -> None:
    """Conditional node roles: active, tied, self-sourced, linked (with blocks)."""
    model = parse_model(model_file)
    context = parse_context(context_file, model)
    try:
        part = partition(model, context)
    except TooLarge as exc:
        raise CliError(str(exc))
    except ImpossibleContext as exc:
        raise ImpossibleContextError(str(exc))
    payload = {
        "schema": SCHEMA,
        "command": "partition",
        "context": _context_json(context),
        "active": sorted(part.active),
        "tied": sorted(part.tied),
        "self_sourced": sorted(part.self_sourced),
        "linked": sorted(part.linked),
        "blocks": [sorted(b) for b in sorted(part.blocks, key=sorted)],
        "constant": _num_map(part.values),
    }
    _emit(_dump(payload), out)


_CI_MODES = ("dsep", "dstar", "critical", "effective", "context")


@main.command("ci")
@_model_arg
@click.option("--mode", type=click.Choice(_CI_MODES), required=True)
@click.option("--i", "i_labels", callback=_labels_option, required=True,
              help="Comma-separated labels of the first set.")
@click.option("--j", "j_labels", callback=_labels_option, required=True,
              help="Comma-separated labels of the second set.")
@click.option("--k", "k_labels", callback=_labels_option, default=None,
              help="Comma-separated conditioning labels (not with --mode context).")
@click.option("--context", "context_file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Observed values (required for --mode context).")
@_out_opt
def ci_cmd(model_file: str, mode: str, i_labels: tuple[str, ...], j_labels: tuple[str, ...],
           k_labels: tuple[str, ...], context_file: Optional[str], out: Optional[str]) -> None:
    """Conditional independence verdict under the chosen criterion.

    Verdicts always exit 0; the result lives in the JSON.
    """
    model = parse_model(model_file)
    i_set = _check_labels(model, i_labels, "i")
    j_set = _check_labels(model, j_labels, "j")
    payload: dict[str, Any] = {
        "schema": SCHEMA,
        "command": "ci",
        "mode": mode,
        "i": sorted(i_set),
        "j": sorted(j_set),
    }
    try:
        if mode == "context":
            if k_labels:
                raise CliError("--k is not allowed with --mode context; the context conditions")
            if context_file is None:
                raise CliError("--mode context requires --context")
            context = parse_context(context_file, model)
            payload["k"] = sorted(context.nodes)
            payload["context"] = _context_json(context)
            verdict = ci_context(model, context, i_set, j_set)
        else:
            if context_file is not None:
                raise CliError(f"--context is only for --mode context, not {mode!r}")
            k_set = _check_labels(model, k_labels, "k")
            payload["k"] = sorted(k_set)
            if mode == "dsep":
                separated = d_separated(model, i_set, j_set, k_set)
                payload["result"] = "independent" if separated else "dependent"
                payload["witness"] = None
                payload["notes"] = ["classical d-separation on the model DAG"]
                _emit(_dump(payload), out)
                return
            crit = {"dstar": ci_generic, "critical": ci_fixed_c, "effective": ci_fixed_c_complete}
            verdict = crit[mode](model, i_set, j_set, k_set)
    except SetsNotDisjoint as exc:
        raise CliError(str(exc))
    except ImpossibleContext as exc:
        raise ImpossibleContextError(str(exc))
    except TooLarge as exc:
        raise CliError(str(exc))
    payload["result"] = verdict.result
    if verdict.witness_path is None:
        payload["witness"] = None
    else:
        payload["witness"] = {
            "shape": verdict.witness_path.shape,
            "nodes": list(verdict.witness_path.nodes),
        }
    if verdict.witness_weights is not None:
        payload["witness_weights"] = {
            f"{frm}->{to}": _num(w) for (frm, to), w in sorted(verdict.witness_weights)
        }
    payload["notes"] = list(verdict.notes)
    _emit(_dump(payload), out)


@main.command("sample")
@_model_arg
@click.option("--context", "context_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--n", "n_draws", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dist", type=click.Choice(("frechet", "lognormal", "pareto")),
              default="frechet", show_default=True)
@_out_opt
def sample_cmd(model_file: str, context_file: str, n_draws: int, seed: int,
               dist: str, out: Optional[str]) -> None:
    """Draw from the conditional law given the observation; CSV of X rows."""
    if n_draws < 1:
        raise CliError("--n must be at least 1")
    model = parse_model(model_file)
    context = parse_context(context_file, model)
    try:
        rep = build_representation(model, context)
        draws = conditional_sampler(rep, InnovationDist.named(dist), n_draws, seed)
    except ImpossibleContext as exc:
        raise ImpossibleContextError(str(exc))
    except (TooLarge, DegenerateBlock) as exc:
        raise CliError(str(exc))
    lines = [",".join(model.labels)]
    for row in range(draws.n):
        lines.append(",".join(repr(float(v)) for v in draws.x[row]))
    _emit("\n".join(lines) + "\n", out)


@main.command("validate")
@_model_arg
@click.option("--context", "context_file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Also check the conditional machinery for this observation.")
@click.option("--n", "n_draws", type=int, default=20000, show_default=True,
              help="Monte Carlo draws for the realization check.")
@click.option("--seed", type=int, default=0, show_default=True)
@_out_opt
def validate_cmd(model_file: str, context_file: Optional[str], n_draws: int,
                 seed: int, out: Optional[str]) -> None:
    """Cross-check the engine against Monte Carlo on one model.

    Exact enumeration vs realized galaxies, exact vs floating evaluation,
    and, given a context, the conditional sampler's pinning invariants.
    """
    from .oracle import mc_sample_batch

    model = parse_model(model_file)
    checks: list[dict[str, Any]] = []

    def record(name: str, passed: bool, detail: str) -> None:
        checks.append({"name": name, "passed": bool(passed), "detail": detail})

    cs = model.closure
    record("kleene-idempotent", trop_mul(cs, cs) == cs, "C* (.) C* = C*")

    try:
        graphs = enumerate_impact_graphs(model)
    except TooLarge as exc:
        raise CliError(str(exc))
    batch = mc_sample_batch(model, n=n_draws, seed=seed)
    realized = {g for g in batch.galaxies if g is not None}
    stray = realized - graphs
    record(
        "mc-support",
        not stray,
        f"{len(realized)} of {len(graphs)} enumerated galaxies realized, {len(stray)} stray",
    )

    rows = min(200, batch.n)
    worst = 0.0
    for r in range(rows):
        exact = evaluate(model, [Fraction(v) for v in batch.z[r]])
        err = max(abs(float(e) - float(f)) / float(e) for e, f in zip(exact, batch.x[r]))
        worst = max(worst, err)
    record("float-agreement", worst <= 1e-9,
           f"max relative error {worst:.3e} over {rows} draws")

    payload: dict[str, Any] = {"schema": SCHEMA, "command": "validate"}
    if context_file is not None:
        context = parse_context(context_file, model)
        try:
            info = analyze(model, context)
        except ImpossibleContext as exc:
            raise ImpossibleContextError(str(exc))
        record("context-possible", True,
               f"{len(info.compatible)} compatible impact graphs")
        rep = build_representation(model, context)
        draws = conditional_sampler(rep, InnovationDist.frechet(), min(200, n_draws), seed)
        frozen = dict(info.frozen_values)
        bad_pin = 0
        bad_active = 0
        stray_graphs = 0
        ties = 0
        for r in range(draws.n):
            pins = draws.exact_row(r)
            z_exact = [
                pins.get(lab, Fraction(float(draws.z[r, idx])))
                for idx, lab in enumerate(model.labels)
            ]
            x_exact = evaluate(model, z_exact)
            for idx, lab in enumerate(model.labels):
                if lab in frozen:
                    if x_exact[idx] != frozen[lab]:
                        bad_pin += 1
                elif abs(float(x_exact[idx]) - float(draws.x[r, idx])) > 1e-9 * float(x_exact[idx]):
                    bad_active += 1
            try:
                if realized_impact_graph(model, z_exact) not in info.compatible:
                    stray_graphs += 1
            except TieDetected:
                ties += 1
        record("sampler-pins", bad_pin == 0,
               f"{bad_pin} frozen-coordinate mismatches over {draws.n} draws")
        record("sampler-active", bad_active == 0,
               f"{bad_active} active-coordinate mismatches over {draws.n} draws")
        record("sampler-compatible", stray_graphs == 0,
               f"{stray_graphs} draws realized a non-compatible galaxy ({ties} ties skipped)")
        payload["context"] = _context_json(context)

    payload["checks"] = checks
    payload["passed"] = all(c["passed"] for c in checks)
    _emit(_dump(payload), out)
    if not payload["passed"]:
        raise SystemExit(2)


if __name__ == "__main__":
    main()
