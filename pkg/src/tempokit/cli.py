"""Pipeline commands: curate -> simulate -> caption -> evaluate."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import SCHEMA_VERSION
from . import caption_engine as ce
from . import scene_simulator as sim
from . import segment_bank as sb
from . import steam
from .metadata import SignalType, load_metadata

_SIGNALS = [s.value for s in SignalType]


@click.group()
def main():
    """Build temporally-aligned audio-text corpora and score temporal control."""


@main.command()
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True),
              help="Strong labels, JSON lines.")
@click.option("--scores", "scores_path", type=click.Path(exists=True),
              help="Per-segment CLAP/grounding scores JSON.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output segment bank JSON.")
@click.option("--clap-threshold", default=0.3, show_default=True)
@click.option("--atg-threshold", default=0.6, show_default=True)
@click.option("--guard-margin", default=0.0, show_default=True)
@click.option("--audio-dir", type=click.Path(exists=True),
              help="Source clip WAVs; segment audio is cut when given.")
@click.option("--segments-dir", type=click.Path(),
              help="Where cut segment WAVs go (with --audio-dir).")
@click.option("--report", "report_path", type=click.Path(),
              help="Optional curation stats JSON.")
def curate(labels_path, scores_path, out_path, clap_threshold, atg_threshold,
           guard_margin, audio_dir, segments_dir, report_path):
    """Extract single-sound segments and filter them by the score gates."""
    config = sb.CurationConfig(clap_threshold=clap_threshold,
                               atg_threshold=atg_threshold,
                               guard_margin=guard_margin)
    labels = sb.load_strong_labels(labels_path)
    segments = sb.extract_single_sound_segments(labels, config.guard_margin)
    if scores_path:
        segments = sb.load_scores(segments, scores_path)
        segments, stats = sb.apply_filters(segments, config)
    else:
        stats = sb.CurationStats(
            categories_extracted=len({s.event_label.strip() for s in segments}),
            segments_extracted=len(segments),
            categories_kept=len({s.event_label.strip() for s in segments}),
            segments_kept=len(segments),
        )
    if audio_dir:
        if not segments_dir:
            raise click.UsageError("--segments-dir is required with --audio-dir")
        segments = sb.cut_segment_audio(segments, audio_dir, segments_dir)
    sb.save_bank(segments, out_path)
    click.echo(f"curated: {stats.summary()}", err=True)
    if report_path:
        Path(report_path).write_text(
            json.dumps(sb.stats_to_json(stats), indent=2, sort_keys=True))


@main.command()
@click.option("--bank", "bank_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--signal", required=True, type=click.Choice(_SIGNALS))
@click.option("--count", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--clip-length", default=10.0, show_default=True)
@click.option("--sample-rate", default=sim.DEFAULT_SAMPLE_RATE, show_default=True)
@click.option("--noise-floor-db", type=float, default=None,
              help="Optional constant noise floor in dBFS.")
@click.option("--no-render", is_flag=True, help="Plan metadata only, skip WAVs.")
def simulate(bank_path, out_dir, signal, count, seed, clip_length, sample_rate,
             noise_floor_db, no_render):
    """Simulate clips for one control signal; write WAVs and metadata.json."""
    bank = sb.load_bank(bank_path)
    config = sim.PlannerConfig(clip_length=clip_length)
    metas = sim.simulate_corpus(
        bank, SignalType(signal), count, seed, out_dir, config=config,
        sample_rate=sample_rate, noise_floor_db=noise_floor_db,
        render=not no_render)
    click.echo(f"simulated {len(metas)} {signal} clips into {out_dir}", err=True)


@main.command()
@click.option("--metadata", "metadata_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--backend", type=click.Choice(["template", "http"]),
              default="template", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--max-rounds", default=5, show_default=True)
@click.option("--endpoint", help="Chat-completion endpoint URL (http backend).")
@click.option("--model", help="Model name (http backend).")
@click.option("--token-env", default="TEMPOKIT_API_TOKEN", show_default=True,
              help="Env var holding the API token (http backend).")
@click.option("--timeout", default=60.0, show_default=True)
@click.option("--concurrency", default=4, show_default=True)
def caption(metadata_path, out_path, backend, seed, max_rounds, endpoint,
            model, token_env, timeout, concurrency):
    """Generate captions for a metadata corpus."""
    metas = load_metadata(metadata_path)
    if backend == "template":
        gen_factory = lambda: ce.TemplateGenerator(seed)
        disc_factory = lambda: ce.RuleDiscriminator()
        concurrency = 1
    else:
        if not endpoint or not model:
            raise click.UsageError("--endpoint and --model are required for http")
        http = ce.HttpChatBackend(ce.HttpBackendConfig(
            endpoint=endpoint, model=model, token_env=token_env,
            timeout=timeout, max_concurrency=concurrency))
        gen_factory = lambda: ce.HttpGenerator(http)
        disc_factory = lambda: ce.HttpDiscriminator(http)
    records = ce.caption_corpus(metas, gen_factory, disc_factory,
                                max_rounds=max_rounds, concurrency=concurrency)
    ce.save_captions(records, out_path)
    click.echo(f"captioned {len(records)} clips", err=True)


@main.command()
@click.option("--metadata", "metadata_path", required=True,
              type=click.Path(exists=True))
@click.option("--detections", "detections_path", required=True,
              type=click.Path(exists=True))
@click.option("--segment-length", default=1.0, show_default=True)
@click.option("--report", "report_path", type=click.Path(),
              help="Optional metric report JSON.")
def evaluate(metadata_path, detections_path, segment_length, report_path):
    """Score detections against reference metadata and print the metric row."""
    refs = load_metadata(metadata_path)
    dets = steam.load_detections(detections_path)
    signals = {r.signal for r in refs}
    if len(signals) != 1:
        raise click.ClickException(
            "metadata file mixes signal types; evaluate one signal at a time")
    config = steam.EvalConfig(segment_length=segment_length)
    report = steam.evaluate(signals.pop(), refs, dets, config)
    click.echo(steam.format_report_table([report]))
    if report_path:
        Path(report_path).write_text(
            json.dumps(steam.report_to_json(report), indent=2, sort_keys=True))


def run():
    """Console entry point: map module errors to a clean non-zero exit."""
    try:
        main(standalone_mode=False)
    except click.ClickException as e:
        e.show()
        sys.exit(e.exit_code)
    except click.Abort:
        sys.exit(1)
    except (sb.BankError, sim.PlanningError, sim.RenderError,
            steam.SteamError, ce.CaptionRejected, ce.BackendError,
            FileNotFoundError, json.JSONDecodeError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    run()
