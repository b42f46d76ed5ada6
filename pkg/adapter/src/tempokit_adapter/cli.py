"""adapter scores|detect: batch inference to tempokit's JSON schemas."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .backends import AudioReadError, ModelLoadError, make_backend
from .jobs import AdapterJob, run_job


def _load_config(path: str | None) -> dict:
    if not path:
        return {"backend": "tone"}
    return json.loads(Path(path).read_text())


@click.group()
def main():
    """Emit per-segment scores or per-clip detections for tempokit."""


@main.command()
@click.option("--audio-list", required=True, type=click.Path(exists=True),
              help="JSON array of {segment_id, audio_path, event_label}.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="Backend config JSON (backend kind, checkpoint, hash).")
def scores(audio_list, out_path, config_path):
    """Write the scores.json consumed by tempokit curate."""
    items = json.loads(Path(audio_list).read_text())
    backend = make_backend(_load_config(config_path))
    run_job(AdapterJob(mode="scores", items=items, out_path=out_path), backend)
    click.echo(f"wrote scores for {len(items)} segments to {out_path}", err=True)


@main.command()
@click.option("--audio-list", required=True, type=click.Path(exists=True),
              help="JSON array of {clip_id, audio_path, labels}.")
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
def detect(audio_list, threshold, out_path, config_path):
    """Write the detections.json consumed by tempokit evaluate."""
    items = json.loads(Path(audio_list).read_text())
    backend = make_backend(_load_config(config_path))
    run_job(AdapterJob(mode="detect", items=items, threshold=threshold,
                       out_path=out_path), backend)
    click.echo(f"wrote detections for {len(items)} clips to {out_path}", err=True)


def run():
    try:
        main(standalone_mode=False)
    except click.ClickException as e:
        e.show()
        sys.exit(e.exit_code)
    except click.Abort:
        sys.exit(1)
    except (ModelLoadError, AudioReadError, ValueError,
            FileNotFoundError, json.JSONDecodeError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    run()
