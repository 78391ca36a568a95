"""Command-line pipeline: ingest -> fuse -> decompose -> select ->
build-pairs -> (external inference or stub-predict) -> parse -> evaluate
-> report -> serve.

Exit codes: 0 success, 1 usage/config error, 2 data validation error,
3 external-endpoint failure. Option precedence is flags > environment
(ABGROUND_<OPTION>) > config file (--config, JSON always, TOML on
Python 3.11+). All stub randomness flows from --seed; identical inputs
and seeds reproduce data artifacts byte for byte.
"""

from __future__ import annotations

import json
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import click

from . import __version__
from .dataset import (
    AnnotationFormatError,
    ClassMapError,
    ClassMap,
    DatasetSplit,
    apply_class_map,
    apply_split_manifest,
    class_distribution,
    fuse_records,
    load_annotations,
    read_split_manifest,
    shipped_class_map,
    write_split_manifest,
)
from .evalrun import assemble_cases, load_report_dict, run_digest, write_run_dir
from .knowledge import (
    GenerationParams,
    HTTPClient,
    ReplayClient,
    SelectionError,
    SelectionLedger,
    StubClient,
    TransportError,
    auto_select_index,
    export_prompt_dictionary,
    generate_all_candidates,
    load_definition_store,
    load_pool,
    load_prompt_dictionary,
    select_candidate,
    shipped_definition_store,
    shipped_prompt_dictionary,
)
from .metrics import (
    MetricsError,
    build_report,
    render_text_report,
    report_from_dict,
)
from .outparse import (
    normalize_predictions,
    parse_output,
    read_raw_predictions,
    write_parsed_dump,
    write_raw_predictions,
)
from .promptgen import (
    Attribute,
    CoverageError,
    WireFormat,
    build_eval_set,
    read_pairs_jsonl,
    write_pairs_jsonl,
)
from .service import AppState, class_slug, serve as serve_app
from .stubpred import stub_predict

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ENDPOINT = 3

_FORMAT_CHOICES = ("loc_token", "json_box", "both")
_MASK_CHOICES = tuple(a.value for a in Attribute)


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise click.UsageError(f"config file not found: {p}")
    if p.suffix.lower() == ".toml":
        try:
            import tomllib
        except ImportError as exc:
            raise click.UsageError(
                "TOML config needs Python 3.11+; use a JSON config"
            ) from exc
        return tomllib.loads(p.read_text(encoding="utf-8"))
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise click.UsageError(f"config file is not valid JSON: {exc}") from exc


def _resolve(ctx, name: str, flag_value, default=None, cast=None):
    """Option precedence: flag > ABGROUND_<NAME> env > config file > default."""
    if flag_value is not None:
        return flag_value
    env = os.environ.get(f"ABGROUND_{name.upper()}")
    if env is not None:
        return cast(env) if cast else env
    cfg = (ctx.obj or {}).get(name)
    if cfg is not None:
        return cast(cfg) if cast else cfg
    return default


def _require_file(path: str | None, what: str) -> Path:
    if path is None:
        raise click.UsageError(f"missing required {what}")
    p = Path(path)
    if not p.exists():
        raise click.UsageError(f"{what} not found: {p}")
    return p


@contextmanager
def _path_lock(target: Path):
    """Advisory single-writer lock next to the mutated path."""
    lock = Path(str(target) + ".lock")
    lock.parent.mkdir(parents=True, exist_ok=True)
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        try:
            pid = int(lock.read_text().strip() or "0")
        except ValueError:
            pid = 0
        alive = False
        if pid > 0:
            try:
                os.kill(pid, 0)
                alive = True
            except OSError:
                alive = False
        if alive:
            raise click.UsageError(
                f"{target} is locked by running process {pid}; "
                "only one command may mutate it at a time"
            ) from None
        lock.unlink(missing_ok=True)
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _load_split(split_path: str, split_name: str) -> DatasetSplit:
    splits = read_split_manifest(_require_file(split_path, "split manifest"))
    if split_name not in splits:
        raise click.UsageError(
            f"split {split_name!r} not in manifest "
            f"(available: {', '.join(sorted(splits))})"
        )
    return splits[split_name]


def _load_dictionary(spec_value: str) -> dict[str, str]:
    if spec_value == "shipped:vindr":
        return shipped_prompt_dictionary("vindr")
    if spec_value == "shipped:padchest":
        return shipped_prompt_dictionary("padchest")
    return load_prompt_dictionary(_require_file(spec_value, "prompt dictionary"))


def _load_class_map(value: str | None) -> ClassMap:
    if value in (None, "shipped"):
        return shipped_class_map()
    payload = json.loads(_require_file(value, "class map").read_text(encoding="utf-8"))
    return ClassMap.from_dict(payload)


@click.group(name="abground")
@click.version_option(version=__version__, prog_name="abground",
                      message="%(prog)s %(version)s")
@click.option("--config", "config_path", type=str, default=None,
              help="JSON (or TOML on Python 3.11+) config file; flags and "
                   "ABGROUND_* environment variables take precedence.")
@click.pass_context
def cli(ctx, config_path):
    """Abnormality grounding toolkit."""
    ctx.obj = _load_config_file(config_path)


@cli.command()
@click.option("--annotations", required=False, help="Annotation CSV/JSON file.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
@click.option("--out", type=str, default=None,
              help="Write validated rows as a normalized JSON array.")
@click.option("--strict", is_flag=True, help="Exit 2 when any row is invalid.")
@click.pass_context
def ingest(ctx, annotations, fmt, out, strict):
    """Validate an annotation file and report row-level problems."""
    path = _require_file(annotations, "--annotations file")
    result = load_annotations(path, _resolve(ctx, "format", fmt))
    for err in result.errors:
        click.echo(f"row {err.line}: {err.message}", err=True)
    click.echo(f"loaded {len(result.records)} records, "
               f"{len(result.errors)} invalid rows")
    if out:
        rows = [{
            "image_id": r.image_id, "class_name": r.class_name,
            "x_min": r.box.x1, "y_min": r.box.y1,
            "x_max": r.box.x2, "y_max": r.box.y2,
            "width": r.dims.width, "height": r.dims.height,
            "rater_id": r.rater_id,
        } for r in result.records]
        Path(out).write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
        click.echo(f"wrote {out}")
    if strict and result.errors:
        raise AnnotationFormatError(f"{len(result.errors)} invalid rows")


@cli.command()
@click.option("--annotations", required=False)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
@click.option("--wbf-iou", type=float, default=None,
              help="IoU threshold for weighted box fusion (default 0.4).")
@click.option("--split-manifest", type=str, default=None,
              help="JSON {split_name: [image_id, ...]}; omitted = one "
                   "'all' split.")
@click.option("--class-map", "class_map_path", type=str, default=None,
              help="Partition into known/unknown splits using a class map "
                   "('shipped' for the bundled PadChest-GR map).")
@click.option("--out", required=True, help="Output split manifest JSON.")
@click.pass_context
def fuse(ctx, annotations, fmt, wbf_iou, split_manifest, class_map_path, out):
    """Fuse multi-rater boxes into instances and emit split manifests."""
    path = _require_file(annotations, "--annotations file")
    wbf_iou = _resolve(ctx, "wbf_iou", wbf_iou, default=0.4, cast=float)
    result = load_annotations(path, _resolve(ctx, "format", fmt))
    for err in result.errors:
        click.echo(f"row {err.line}: {err.message}", err=True)
    instances = fuse_records(result.records, wbf_iou)

    if class_map_path is not None:
        known, unknown = apply_class_map(instances, _load_class_map(class_map_path))
        splits = {known.name: known, unknown.name: unknown}
    elif split_manifest is not None:
        manifest = json.loads(
            _require_file(split_manifest, "split manifest").read_text(encoding="utf-8"))
        splits = apply_split_manifest(instances, manifest)
    else:
        splits = {"all": DatasetSplit("all", instances)}

    write_split_manifest(splits, out)
    click.echo(f"wbf_iou={wbf_iou}  instances={len(instances)}")
    for name in sorted(splits):
        split = splits[name]
        click.echo(f"  {name}: {len(split)} instances, "
                   f"{len(class_distribution(split))} classes")
    click.echo(f"wrote {out}")


@cli.command()
@click.option("--definitions", type=str, default=None,
              help="Definition store JSON ('shipped:vindr' for the bundled "
                   "example store).")
@click.option("--out-dir", required=True, type=str)
@click.option("--client", "client_kind",
              type=click.Choice(["http", "stub", "replay"]), default=None)
@click.option("--stub", "stub_flag", is_flag=True,
              help="Shorthand for --client stub.")
@click.option("--replay-transcript", type=str, default=None)
@click.option("--endpoint", type=str, default=None)
@click.option("--model", type=str, default=None)
@click.option("--api-key", type=str, default=None)
@click.option("--n-candidates", type=int, default=None)
@click.option("--temperature", type=float, default=None)
@click.option("--top-p", type=float, default=None)
@click.option("--repetition-penalty", type=float, default=None)
@click.option("--max-tokens", type=int, default=None)
@click.option("--max-in-flight", type=int, default=None,
              help="Concurrent classes in flight (default 4).")
@click.pass_context
def decompose(ctx, definitions, out_dir, client_kind, stub_flag,
              replay_transcript, endpoint, model, api_key, n_candidates,
              temperature, top_p, repetition_penalty, max_tokens,
              max_in_flight):
    """Generate candidate visual descriptions for every class."""
    if definitions == "shipped:vindr":
        defs = shipped_definition_store()
    else:
        defs = load_definition_store(_require_file(definitions, "--definitions file"))

    params = GenerationParams(
        temperature=_resolve(ctx, "temperature", temperature, 0.7, float),
        top_p=_resolve(ctx, "top_p", top_p, 0.7, float),
        repetition_penalty=_resolve(ctx, "repetition_penalty",
                                    repetition_penalty, 1.1, float),
        max_tokens=_resolve(ctx, "max_tokens", max_tokens, 1024, int),
        n=_resolve(ctx, "n_candidates", n_candidates, 5, int),
    )

    kind = "stub" if stub_flag else _resolve(ctx, "client", client_kind)
    if kind is None:
        kind = "http" if _resolve(ctx, "endpoint", endpoint) else None
    if kind is None:
        raise click.UsageError(
            "no completion client configured: pass --stub, --client replay, "
            "or set --endpoint / ABGROUND_ENDPOINT")
    if kind == "stub":
        client = StubClient(_builtin_stub_responses)
    elif kind == "replay":
        client = ReplayClient(_require_file(replay_transcript,
                                            "--replay-transcript file"))
    else:
        client = HTTPClient(
            endpoint=_resolve(ctx, "endpoint", endpoint),
            model=_resolve(ctx, "model", model, ""),
            api_key=_resolve(ctx, "api_key", api_key, ""),
        )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = params.as_dict()
    click.echo(f"decoding params: temperature={p['temperature']} "
               f"top_p={p['top_p']} repetition_penalty={p['repetition_penalty']} "
               f"max_tokens={p['max_tokens']} n={p['n']}")
    with _path_lock(out):
        pools, failures = generate_all_candidates(
            defs, client, params, out_dir=out,
            pool_filename=lambda name: f"{class_slug(name)}.json",
            max_in_flight=_resolve(ctx, "max_in_flight", max_in_flight, 4, int))
    for definition in defs:
        name = definition.class_name
        if name in pools:
            click.echo(f"  {name}: {len(pools[name].candidates)} candidates "
                       f"-> {class_slug(name)}.json")
        else:
            click.echo(f"  {name}: FAILED ({failures[name]})", err=True)
    if failures:
        raise TransportError(
            f"{len(failures)} classes failed: " + ", ".join(sorted(failures)),
            attempts=[str(exc) for exc in failures.values()])
    click.echo(f"wrote {len(pools)} pools to {out}")


def _builtin_stub_responses(prompt: str, idx: int) -> str:
    flavors = ["well-defined rounded", "irregular patchy", "dense consolidated",
               "subtle hazy", "linear branching"]
    flavor = flavors[idx % len(flavors)]
    return (f"A {flavor} area whose shape, intensity, density, and location "
            "stand out against the surrounding anatomy.")


@cli.command()
@click.option("--pool-dir", required=True, type=str)
@click.option("--ledger", "ledger_path", required=True, type=str)
@click.option("--class", "class_name", type=str, default=None)
@click.option("--index", type=int, default=None)
@click.option("--auto-select", "auto", is_flag=True,
              help="Pick every class automatically by attribute-term overlap.")
@click.pass_context
def select(ctx, pool_dir, ledger_path, class_name, index, auto):
    """Record selections without the UI (single class or --auto-select)."""
    pool_root = Path(_require_file(pool_dir, "--pool-dir"))
    ledger = SelectionLedger(Path(ledger_path))
    with _path_lock(ledger.path):
        if auto:
            pools = sorted(pool_root.glob("*.json"))
            if not pools:
                raise click.UsageError(f"no pool files in {pool_root}")
            for pool_path in pools:
                pool = load_pool(pool_path)
                chosen = auto_select_index(pool)
                prompt = select_candidate(pool, chosen, "auto", ledger)
                click.echo(f"{prompt.class_name}: candidate {chosen} (auto)")
            return
        if class_name is None or index is None:
            raise click.UsageError("pass --class and --index, or --auto-select")
        pool_path = pool_root / f"{class_slug(class_name)}.json"
        if not pool_path.exists():
            raise click.UsageError(f"no pool for class {class_name!r}")
        prompt = select_candidate(load_pool(pool_path), index, "human", ledger)
        click.echo(f"{prompt.class_name}: candidate {index} (human)")


@cli.command(name="export-dict")
@click.option("--ledger", "ledger_path", required=True, type=str)
@click.option("--definitions", type=str, default=None,
              help="Class set source ('shipped:vindr' or a store file).")
@click.option("--out", required=True, type=str)
def export_dict(ledger_path, definitions, out):
    """Export the selected prompt dictionary for a class set."""
    ledger = SelectionLedger(_require_file(ledger_path, "--ledger file"))
    if definitions == "shipped:vindr":
        defs = shipped_definition_store()
    else:
        defs = load_definition_store(_require_file(definitions, "--definitions file"))
    payload = export_prompt_dictionary(ledger, [d.class_name for d in defs])
    Path(out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
    click.echo(f"wrote {len(payload['prompts'])} prompts to {out}")


@cli.command(name="build-pairs")
@click.option("--split", "split_path", required=True, type=str)
@click.option("--split-name", default="all", show_default=True)
@click.option("--dict", "dict_path", type=str, default=None,
              help="Prompt dictionary ('shipped:vindr', 'shipped:padchest', "
                   "or a file). Omit for base, knowledge-free pairs.")
@click.option("--with-knowledge/--no-knowledge", default=True,
              help="Append the class's visual description to the prompt.")
@click.option("--format", "fmt", type=click.Choice(_FORMAT_CHOICES), default=None)
@click.option("--mask", type=click.Choice(_MASK_CHOICES), default=None,
              help="Mask one visual attribute in every description.")
@click.option("--out", required=True, type=str)
@click.pass_context
def build_pairs(ctx, split_path, split_name, dict_path, with_knowledge,
                fmt, mask, out):
    """Build prompt/answer pairs for a split in one or both wire formats."""
    split = _load_split(split_path, split_name)
    fmt = _resolve(ctx, "format", fmt, default="loc_token")
    dictionary = None
    if with_knowledge and dict_path is not None:
        dictionary = _load_dictionary(dict_path)
    elif with_knowledge and mask is not None:
        raise click.UsageError("--mask needs a dictionary (--dict)")

    formats = [WireFormat.LOC_TOKEN, WireFormat.JSON_BOX] if fmt == "both" \
        else [WireFormat(fmt)]
    out_path = Path(out)
    for wire in formats:
        pairs = build_eval_set(split.instances, dictionary, wire,
                               masked_attribute=mask)
        target = out_path if len(formats) == 1 else \
            out_path.with_name(f"{out_path.stem}.{wire.value}{out_path.suffix}")
        n = write_pairs_jsonl(pairs, target)
        click.echo(f"wrote {n} pairs ({wire.value}) to {target}")


@cli.command(name="stub-predict")
@click.option("--pairs", "pairs_path", required=True, type=str)
@click.option("--jitter", type=float, default=0.0, show_default=True,
              help="Shift each box by this fraction of its diagonal.")
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=str)
@click.pass_context
def stub_predict_cmd(ctx, pairs_path, jitter, seed, out):
    """Generate deterministic predictions from a pairs file (no model)."""
    rows = read_pairs_jsonl(_require_file(pairs_path, "--pairs file"))
    seed = _resolve(ctx, "seed", seed, default=0, cast=int)
    predictions = stub_predict(rows, jitter=jitter, seed=seed)
    n = write_raw_predictions(predictions, out)
    click.echo(f"wrote {n} predictions (jitter={jitter}, seed={seed}) to {out}")


@cli.command(name="parse")
@click.option("--predictions", "pred_path", required=True, type=str)
@click.option("--split", "split_path", required=True, type=str,
              help="Split manifest supplying per-image dims.")
@click.option("--split-name", default="all", show_default=True)
@click.option("--json-coords", type=click.Choice(["normalized", "pixels"]),
              default=None,
              help="Coordinate contract of JSON-format outputs.")
@click.option("--out", required=True, type=str)
@click.pass_context
def parse_cmd(ctx, pred_path, split_path, split_name, json_coords, out):
    """Parse raw model outputs into a normalized prediction dump."""
    rows = read_raw_predictions(_require_file(pred_path, "--predictions file"))
    split = _load_split(split_path, split_name)
    json_coords = _resolve(ctx, "json_coords", json_coords, "normalized")
    dims_by_image = {i.image_id: i.dims for i in split.instances}

    entries = []
    n_fatal = 0
    n_orphan = 0
    for row in rows:
        dims = dims_by_image.get(str(row["image_id"]))
        if dims is None:
            n_orphan += 1
            continue
        fmt = WireFormat(row["format"])
        report = parse_output(str(row.get("raw_output", "")), fmt)
        n_fatal += 1 if report.fatal else 0
        preds = normalize_predictions(report, dims, fmt, json_coords)
        entries.append({
            "image_id": row["image_id"],
            "class_name": row["class_name"],
            "predictions": [
                {"label": p.label, "box": list(p.box.corners()), "score": p.score}
                for p in preds
            ],
        })
    n = write_parsed_dump(entries, out)
    click.echo(f"parsed {n} rows ({n_fatal} unparsable, {n_orphan} without "
               f"dims) to {out}")


@cli.command()
@click.option("--predictions", "pred_path", required=True, type=str)
@click.option("--split", "split_path", required=True, type=str)
@click.option("--split-name", default="all", show_default=True)
@click.option("--group-by", type=click.Choice(["class", "known_vs_unknown"]),
              default="class", show_default=True)
@click.option("--class-map", "class_map_path", type=str, default=None,
              help="Class map for known_vs_unknown grouping ('shipped' = "
                   "bundled PadChest-GR map).")
@click.option("--ap-interp", type=click.Choice(["101", "all"]), default=None)
@click.option("--json-coords", type=click.Choice(["normalized", "pixels"]),
              default=None)
@click.option("--iou-thresholds", type=str, default=None,
              help="Extra AP thresholds beyond the standard family, "
                   "comma-separated (e.g. '0.4,0.6'); reported as "
                   "AP@t / mAP@t columns.")
@click.option("--runs-dir", type=str, default="runs", show_default=True)
@click.option("--run-id", type=str, default=None,
              help="Defaults to a digest of the inputs, so identical runs "
                   "land in the same directory.")
@click.pass_context
def evaluate(ctx, pred_path, split_path, split_name, group_by, class_map_path,
             ap_interp, json_coords, iou_thresholds, runs_dir, run_id):
    """Evaluate predictions against a split; writes a run directory."""
    pred_file = _require_file(pred_path, "--predictions file")
    split = _load_split(split_path, split_name)
    rows = read_raw_predictions(pred_file)
    json_coords = _resolve(ctx, "json_coords", json_coords, "normalized")
    ap_interp = _resolve(ctx, "ap_interp", ap_interp, "101")

    cases, stats = assemble_cases(split, rows, json_coords)
    if stats.n_predictions == 0:
        click.echo("WARNING: zero parseable predictions; all metrics are "
                   "zero", err=True)

    extra = []
    if iou_thresholds:
        try:
            extra = [float(part) for part in iou_thresholds.split(",") if part]
        except ValueError as exc:
            raise click.UsageError(
                f"--iou-thresholds must be comma-separated floats: {exc}")

    class_map = _load_class_map(class_map_path) \
        if group_by == "known_vs_unknown" else None
    report = build_report(cases, group_by=group_by, class_map=class_map,
                          interp=ap_interp, extra_thresholds=extra,
                          metadata={"parse_stats": stats.as_dict(),
                                    "split": split_name})

    if run_id is None:
        run_id = run_digest(pred_file.read_bytes(),
                            Path(split_path).read_bytes(),
                            split_name, group_by, ap_interp, json_coords)
    config = {"predictions": str(pred_path), "split": str(split_path),
              "split_name": split_name, "group_by": group_by,
              "ap_interp": ap_interp, "json_coords": json_coords}
    with _path_lock(Path(runs_dir) / run_id):
        run_dir = write_run_dir(runs_dir, run_id, report, config)
    click.echo(render_text_report(report))
    click.echo(f"run written to {run_dir}")


@cli.command(name="report")
@click.option("--run-dir", "run_dir", required=True, type=str)
def report_cmd(run_dir):
    """Re-render the text tables of a stored run."""
    run_path = Path(run_dir)
    if not (run_path / "report.json").exists():
        raise click.UsageError(f"no report.json under {run_path}")
    report = report_from_dict(load_report_dict(run_path))
    click.echo(render_text_report(report), nl=False)


@cli.command(name="serve")
@click.option("--definitions", type=str, default=None)
@click.option("--pool-dir", type=str, default=None)
@click.option("--ledger", "ledger_path", type=str, default=None)
@click.option("--runs-dir", type=str, default=None)
@click.option("--images-dir", type=str, default=None)
@click.option("--ui-dir", type=str, default=None)
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=None, help="Default 7700.")
@click.pass_context
def serve_cmd(ctx, definitions, pool_dir, ledger_path, runs_dir, images_dir,
              ui_dir, host, port):
    """Serve the review API (and UI bundle, when built) on loopback."""
    port = _resolve(ctx, "port", port, default=7700, cast=int)
    if definitions == "shipped:vindr":
        definitions = None
        defs_path = _shipped_definitions_path()
    else:
        defs_path = Path(definitions) if definitions else None
    if ui_dir is None:
        packaged = Path(__file__).parent / "ui"
        ui_dir = str(packaged) if packaged.is_dir() else None
    state = AppState(
        definitions_path=defs_path,
        pools_dir=Path(pool_dir) if pool_dir else None,
        ledger_path=Path(ledger_path) if ledger_path else None,
        runs_dir=Path(runs_dir) if runs_dir else None,
        images_dir=Path(images_dir) if images_dir else None,
        ui_dir=Path(ui_dir) if ui_dir else None,
    )
    serve_app(state, host=host, port=port)


def _shipped_definitions_path() -> Path:
    from importlib import resources

    # the package installs as a plain directory, so the traversable is a
    # real filesystem path
    return Path(str(resources.files("abground.data")
                    .joinpath("vindr_definitions.json")))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="abground", standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except TransportError as exc:
        click.echo(f"endpoint error: {exc}", err=True)
        for line in exc.attempts:
            click.echo(f"  {line}", err=True)
        return EXIT_ENDPOINT
    except (AnnotationFormatError, ClassMapError, CoverageError,
            SelectionError, MetricsError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA
    except (json.JSONDecodeError, ValueError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA
    except OSError as exc:
        click.echo(f"filesystem error: {exc}", err=True)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
