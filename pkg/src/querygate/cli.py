"""Command-line entry points: simulate, replay, serve, train, catalog, analytics."""

from __future__ import annotations

import json
import sys
from datetime import date

import click

from querygate import analytics as qa
from querygate.config import load_config
from querygate.gateway import Gateway, read_decision_log
from querygate.model import (
    Hyperparameters,
    load_model,
    read_dataset,
    save_model,
    train as train_model,
)
from querygate.rules import read_rules
from querygate.simulator import (
    EventSpec,
    StreamConfig,
    generate_stream,
    read_stream,
    write_stream,
)
from querygate.taxonomy import export_catalog, category_catalog


@click.group()
def main():
    """Sensitive-query moderation gateway toolkit."""


@main.command()
@click.option("--days", default=70, show_default=True)
@click.option("--peak", default=10_000, show_default=True, help="Peak daily volume.")
@click.option("--seed", default=0, show_default=True)
@click.option("--start-date", default="2025-01-01", show_default=True)
@click.option("--variants", default=50, show_default=True, help="Noise vocabulary size.")
@click.option("--event", "events", multiple=True,
              help="Event as start_day:duration:category=factor[,category=factor] pairs.")
@click.option("--out", required=True, type=click.Path(), help="Stream file (one record per line).")
@click.option("--labels", required=True, type=click.Path(), help="Planted-label sidecar file.")
def simulate(days, peak, seed, start_date, variants, events, out, labels):
    """Emit a synthetic query stream plus its planted-label sidecar."""
    specs = []
    for raw in events:
        start_day, duration, muls = raw.split(":", 2)
        multipliers = {}
        for pair in muls.split(","):
            cid, factor = pair.split("=")
            multipliers[cid] = float(factor)
        specs.append(EventSpec(start_day=int(start_day), duration=int(duration),
                               multipliers=multipliers, label=raw))
    config = StreamConfig(
        days=days, peak_daily_volume=peak, seed=seed,
        start_date=date.fromisoformat(start_date),
        events=tuple(specs), text_variants=variants,
    )
    items = generate_stream(config)
    write_stream(out, labels, items)
    click.echo(f"wrote {len(items)} queries to {out} (labels in {labels})")


@main.command()
@click.option("--stream", required=True, type=click.Path(exists=True))
@click.option("--labels", required=True, type=click.Path(exists=True))
@click.option("--base-url", default=None, help="Replay against a running gateway.")
@click.option("--model", "model_path", default=None, type=click.Path(exists=True),
              help="Or run a local gateway with this model file.")
@click.option("--rules", "rules_path", default=None, type=click.Path(exists=True))
@click.option("--log", "log_path", default="replay-decisions.log", type=click.Path())
@click.option("--limit", default=None, type=int, help="Replay only the first N queries.")
def replay(stream, labels, base_url, model_path, rules_path, log_path, limit):
    """Replay a stream and print the planted-vs-decided confusion."""
    items = read_stream(stream, labels)
    if limit:
        items = items[:limit]

    if base_url:
        import httpx
        def decide(item):
            resp = httpx.post(f"{base_url}/v1/decide",
                              json={"query_id": item.record.query_id, "text": item.record.text})
            resp.raise_for_status()
            return resp.json()["label"]
    elif model_path:
        weights = load_model(model_path)
        rule_list = read_rules(rules_path) if rules_path else []
        gw = Gateway(log_path, weights=weights, rules=rule_list)
        def decide(item):
            return gw.decide(item.record).label.id
    else:
        raise click.UsageError("provide --base-url or --model")

    catalog = category_catalog()
    index = {c.id: c.ordinal for c in catalog}
    confusion = [[0] * len(catalog) for _ in catalog]
    for item in items:
        decided = decide(item)
        confusion[item.planted.ordinal][index[decided]] += 1

    click.echo("planted \\ decided")
    header = "".join(f"{c.id[:10]:>12}" for c in catalog)
    click.echo(f"{'':28}{header}")
    total = correct = 0
    for c in catalog:
        row = confusion[c.ordinal]
        total += sum(row)
        correct += row[c.ordinal]
        click.echo(f"{c.id:>28}" + "".join(f"{n:>12}" for n in row))
    click.echo(f"agreement: {correct}/{total} ({correct / total:.1%})")


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def serve(config_path):
    """Run the gateway API server."""
    import uvicorn
    from querygate.api import create_app

    cfg = load_config(config_path)
    weights = load_model(cfg.model_path) if cfg.model_path else None
    rule_list = read_rules(cfg.rules_path) if cfg.rules_path else []
    gateway = Gateway(
        cfg.log_path, weights=weights, rules=rule_list,
        sentence_terminators=cfg.sentence_terminators,
    )
    app = create_app(gateway, sample_size=cfg.sample_size, operator_token=cfg.operator_token)
    uvicorn.run(app, host=cfg.listen_host, port=cfg.listen_port)


@main.command()
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--epochs", default=100, show_default=True)
@click.option("--lr", default=0.1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--version", "model_version", default="v1", show_default=True)
def train(dataset, out, epochs, lr, seed, model_version):
    """Train the linear head on a labeled dataset file."""
    examples = read_dataset(dataset)
    hp = Hyperparameters(learning_rate=lr, epochs=epochs, seed=seed)
    weights = train_model(examples, hp, model_version=model_version)
    save_model(out, weights)
    click.echo(f"trained on {len(examples)} examples -> {out}")


@main.command()
def catalog():
    """Print the category catalog and reference distribution as JSON."""
    click.echo(export_catalog())


@main.group()
def analytics():
    """Analytics over a decision log."""


@analytics.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--what", type=click.Choice(["overall", "buckets", "correlation", "volume"]),
              default="overall", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
def export(log_path, what, fmt):
    """Export analytics series as CSV or JSON."""
    decisions = read_decision_log(log_path)
    buckets = qa.bucketize(decisions)
    if what == "overall":
        snap = qa.distribution(buckets, "overall")
        if fmt == "csv":
            sys.stdout.write(qa.distribution_csv(snap))
        else:
            click.echo(json.dumps({"scope": snap.scope, "shares": snap.shares}))
    elif what == "buckets":
        if fmt == "csv":
            sys.stdout.write(qa.buckets_csv(buckets))
        else:
            click.echo(json.dumps([
                {"date": b.date.isoformat(), "total": b.total_queries,
                 "sensitive": b.sensitive_queries, "counts": b.category_counts}
                for b in buckets
            ]))
    elif what == "correlation":
        matrix = qa.category_correlation(buckets)
        click.echo(json.dumps({"matrix": matrix}))
    else:
        ratio = qa.daily_volume_ratio(buckets)
        sens = qa.sensitive_ratio(buckets)
        if fmt == "csv":
            click.echo("date,volume_ratio,sensitive_percent")
            for d in sorted(ratio):
                s = sens[d]
                click.echo(f"{d.isoformat()},{ratio[d]:.4f},{'' if s is None else f'{s:.4f}'}")
        else:
            click.echo(json.dumps({
                "ratio": {d.isoformat(): v for d, v in ratio.items()},
                "sensitive_percent": {d.isoformat(): v for d, v in sens.items()},
            }))


@analytics.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
def plot(log_path, out_dir):
    """Emit the standard analytics figures as PNG files."""
    import pathlib

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    decisions = read_decision_log(log_path)
    buckets = qa.bucketize(decisions)

    # daily volume ratio, colored by day of week
    ratio = qa.daily_volume_ratio(buckets)
    dates = sorted(ratio)
    colors = plt.cm.tab10(np.array([d.weekday() for d in dates]) / 10.0)
    fig, ax = plt.subplots(figsize=(12, 4))
    ax.bar(range(len(dates)), [ratio[d] for d in dates], color=colors)
    ax.set_ylabel("volume / max daily volume")
    fig.savefig(out / "volume_ratio.png", dpi=120, bbox_inches="tight")
    plt.close(fig)

    # stacked daily category distribution
    from querygate.taxonomy import sensitive_categories
    cats = sensitive_categories()
    shares = np.zeros((len(cats), len(dates)))
    for j, d in enumerate(dates):
        b = next(x for x in buckets if x.date == d)
        if b.sensitive_queries:
            for i, c in enumerate(cats):
                shares[i, j] = b.category_counts[c.id] / b.sensitive_queries * 100
    fig, ax = plt.subplots(figsize=(12, 5))
    bottom = np.zeros(len(dates))
    for i, c in enumerate(cats):
        ax.bar(range(len(dates)), shares[i], bottom=bottom, label=c.id)
        bottom += shares[i]
    ax.legend(fontsize=6, ncol=3)
    ax.set_ylabel("share of sensitive queries (%)")
    fig.savefig(out / "daily_distribution.png", dpi=120, bbox_inches="tight")
    plt.close(fig)

    # correlation heatmap
    if len(buckets) >= 2:
        matrix = qa.category_correlation(buckets)
        arr = np.array([[x if x is not None else np.nan for x in row] for row in matrix])
        fig, ax = plt.subplots(figsize=(7, 6))
        im = ax.imshow(arr, vmin=-1, vmax=1, cmap="coolwarm")
        ax.set_xticks(range(len(cats)), [c.id for c in cats], rotation=90, fontsize=6)
        ax.set_yticks(range(len(cats)), [c.id for c in cats], fontsize=6)
        fig.colorbar(im)
        fig.savefig(out / "correlation.png", dpi=120, bbox_inches="tight")
        plt.close(fig)

    click.echo(f"figures written to {out}")


if __name__ == "__main__":
    main()
