"""Command-line interface: buffer builds, detection, evaluation, sweeps, serving."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .buffers import build_multimodal_buffer, build_speech_buffer, save_buffer
from .config import build_detector, load_engine_config
from .detection import DetectionError
from .evaluation import (
    TABLE_HEADER,
    evaluate,
    export_finetune as export_finetune_records,
    grid_range,
    split_dataset,
    sweep as run_sweep,
)
from .embeddings import provider_from_config
from .service import ServiceConfig, run_service, save_scenarios
from .synthetic import generate_annotation_scenarios, generate_corpus
from .types import DetectionInput, dump_records, load_records


@click.group()
def main():
    """Conflict detection and preference-aware resolution for robot tasks."""


@main.command("build-buffer")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["speech", "multimodal", "unified"]),
              required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--include-noise", is_flag=True, default=False,
              help="Store normal-labeled noise utterances in the speech buffer.")
def build_buffer(config_path, records_path, kind, out_path, include_noise):
    """Embed a JSONL dataset into a retrieval buffer file."""
    config = load_engine_config(config_path)
    records = load_records(records_path)
    text_provider = provider_from_config(config.text_provider)
    image_provider = provider_from_config(config.image_provider)
    if kind == "speech":
        buffer = build_speech_buffer(records, text_provider, include_noise=include_noise)
    else:
        buffer = build_multimodal_buffer(
            records, text_provider, image_provider, unified=(kind == "unified")
        )
    save_buffer(buffer, out_path)
    click.echo(f"wrote {kind} buffer with {len(buffer)} entries to {out_path}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--image", required=True)
@click.option("--task", required=True)
@click.option("--step", required=True)
@click.option("--speech", default=None)
def detect(config_path, image, task, step, speech):
    """Run one detection tick and print the result as JSON."""
    detector = build_detector(load_engine_config(config_path))
    tick = DetectionInput(image=image, task=task, step=step, speech=speech)
    try:
        result = detector.detect(tick)
    except DetectionError as exc:
        click.echo(json.dumps({"error": str(exc)}), err=True)
        sys.exit(1)
    click.echo(json.dumps(result.to_dict(), indent=2))


@main.command("eval")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True))
@click.option("--json-out", "json_out", type=click.Path(), default=None)
def eval_command(config_path, test_path, json_out):
    """Evaluate detection accuracy and latency over a JSONL test set."""
    config = load_engine_config(config_path)
    detector = build_detector(config)
    records = load_records(test_path)
    metrics = evaluate(records, detector.detect, parallelism=config.eval_parallelism)
    click.echo(TABLE_HEADER)
    click.echo(metrics.table_row("detect"))
    payload = json.dumps(metrics.to_dict(), indent=2)
    if json_out:
        Path(json_out).write_text(payload + "\n", encoding="utf-8")
    else:
        click.echo(payload)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True))
@click.option("--param", type=click.Choice(["w", "tau_s", "tau_t"]), required=True)
@click.option("--grid", default=None,
              help="Comma-separated values, or start:stop:step. Defaults: w 0..1 "
                   "step 0.01, taus 0.5..1 step 0.01.")
@click.option("--csv-out", "csv_out", type=click.Path(), default=None)
@click.option("--json-out", "json_out", type=click.Path(), default=None)
def sweep(config_path, test_path, param, grid, csv_out, json_out):
    """Sweep one parameter and report the selected value."""
    config = load_engine_config(config_path)
    records = load_records(test_path)
    if grid is None:
        values = grid_range(0.0, 1.0, 0.01) if param == "w" else grid_range(0.5, 1.0, 0.01)
    elif ":" in grid:
        start, stop, step = (float(x) for x in grid.split(":"))
        values = grid_range(start, stop, step)
    else:
        values = [float(x) for x in grid.split(",")]

    base = build_detector(config)

    def factory(detection_config):
        from .detection import ConflictDetector

        return ConflictDetector(
            detection_config,
            text_provider=base.text_provider,
            image_provider=base.image_provider,
            speech_buffer=base.speech_buffer,
            multimodal_buffer=base.multimodal_buffer,
            backend=base.backend,
        ).detect

    result = run_sweep(param, values, records, config.detection, factory,
                       parallelism=config.eval_parallelism)
    click.echo(f"selected {param} = {result.selected}")
    if csv_out:
        Path(csv_out).write_text(result.to_csv(), encoding="utf-8")
        click.echo(f"wrote CSV to {csv_out}")
    payload = json.dumps(result.to_dict(), indent=2)
    if json_out:
        Path(json_out).write_text(payload + "\n", encoding="utf-8")
    else:
        click.echo(payload)


@main.command("export-finetune")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def export_finetune(records_path, out_path):
    """Export instruction-tuning lines for the detection backend."""
    count = export_finetune_records(load_records(records_path), out_path)
    click.echo(f"wrote {count} lines to {out_path}")


@main.command("split-dataset")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--train-out", required=True, type=click.Path())
@click.option("--test-out", required=True, type=click.Path())
@click.option("--trajectories", "trajectory_ids", default=None,
              help="Comma-separated hold-out trajectory ids.")
@click.option("--n-trajectories", default=2, show_default=True)
@click.option("--n-static", default=32, show_default=True)
@click.option("--seed", default=0, show_default=True)
def split_command(records_path, train_out, test_out, trajectory_ids,
                  n_trajectories, n_static, seed):
    """Split a dataset into buffer-construction and test JSONL files."""
    records = load_records(records_path)
    split = split_dataset(
        records,
        holdout_trajectory_ids=trajectory_ids.split(",") if trajectory_ids else None,
        n_trajectories=n_trajectories,
        n_static=n_static,
        seed=seed,
    )
    dump_records(split.buffer_train, train_out)
    dump_records(split.test, test_out)
    click.echo(f"train: {len(split.buffer_train)} records -> {train_out}")
    click.echo(f"test: {len(split.test)} records -> {test_out}")


@main.command("gen-data")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--trajectories", default="30,30,24,24",
              help="Comma-separated frame counts, one per trajectory.")
@click.option("--n-static", default=24, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--scenarios/--no-scenarios", default=True,
              help="Also write the 20-scenario annotation set.")
def gen_data(out_dir, trajectories, n_static, seed, scenarios):
    """Generate a synthetic dataset (records + images + annotation scenarios)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lengths = [int(x) for x in trajectories.split(",") if x]
    records = generate_corpus(out_dir / "images", trajectory_lengths=lengths,
                              n_static=n_static, seed=seed)
    dump_records(records, out_dir / "records.jsonl")
    click.echo(f"wrote {len(records)} records to {out_dir / 'records.jsonl'}")
    if scenarios:
        scenario_set = generate_annotation_scenarios(out_dir / "images", seed=seed + 100)
        save_scenarios(scenario_set, out_dir)
        click.echo(f"wrote {len(scenario_set)} annotation scenarios to "
                   f"{out_dir / 'scenarios.jsonl'}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def serve(config_path):
    """Run the HTTP service (port/data dir overridable via CONFLICTKIT_PORT,
    CONFLICTKIT_DATA_DIR)."""
    run_service(ServiceConfig.from_file(config_path))


if __name__ == "__main__":
    main()
