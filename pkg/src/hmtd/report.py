"""Analysis reports: delimited tables plus rendered figures.

``write_analysis_report`` takes the interaction models and the device
referential and writes, into one output directory:

* ``continuity.csv``        per-model perceptual-continuity scores
* ``configurations.csv``    derived minimal device configurations
* ``continuity.png``        score comparison bar chart
* ``coverage.png``          device / modality coverage matrix
* ``irvo_<name>.png``       one diagram per interaction model
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import FancyArrowPatch, FancyBboxPatch

from .taskmodel import (
    Channel,
    CttNode,
    DeviceDescriptor,
    EntityKind,
    IrvoModel,
    Modality,
    PERCEPTUAL_CHANNELS,
    continuity_score,
    derive_configurations,
)

_COLUMN_BY_KIND = {
    EntityKind.USER: 0.0,
    EntityKind.REAL_TOOL: 1.0,
    EntityKind.REAL_OBJECT: 1.0,
    EntityKind.SENSOR: 2.0,
    EntityKind.EFFECTOR: 2.0,
    EntityKind.VIRTUAL_TOOL: 3.0,
    EntityKind.VIRTUAL_OBJECT: 3.0,
}

_KIND_COLOR = {
    EntityKind.USER: "#ffd9a0",
    EntityKind.REAL_TOOL: "#c8e6c9",
    EntityKind.REAL_OBJECT: "#c8e6c9",
    EntityKind.VIRTUAL_TOOL: "#bbdefb",
    EntityKind.VIRTUAL_OBJECT: "#bbdefb",
    EntityKind.SENSOR: "#e1bee7",
    EntityKind.EFFECTOR: "#e1bee7",
}


def _layout(model: IrvoModel) -> dict[str, tuple[float, float]]:
    columns: dict[float, list[str]] = {}
    for e in model.entities:
        columns.setdefault(_COLUMN_BY_KIND[e.kind], []).append(e.entity_id)
    pos = {}
    for x, ids in columns.items():
        for i, eid in enumerate(ids):
            y = -(i - (len(ids) - 1) / 2.0) * 1.6
            pos[eid] = (x * 2.6, y)
    return pos


def render_irvo_figure(model: IrvoModel, title: str, path: Path) -> None:
    pos = _layout(model)
    by_id = model.entity_map()
    fig, ax = plt.subplots(figsize=(9, 6))
    ax.set_title(title)
    ax.axis("off")

    for frame in model.fusion_frames:
        xs = [pos[m][0] for m in frame if m in pos]
        ys = [pos[m][1] for m in frame if m in pos]
        if not xs:
            continue
        pad = 0.55
        box = FancyBboxPatch(
            (min(xs) - pad, min(ys) - pad),
            (max(xs) - min(xs)) + 2 * pad,
            (max(ys) - min(ys)) + 2 * pad,
            boxstyle="round,pad=0.12",
            linestyle="--",
            edgecolor="#555555",
            facecolor="none",
            linewidth=1.2,
        )
        ax.add_patch(box)
        ax.annotate(
            "+", (max(xs) + pad, max(ys) + pad), fontsize=14, fontweight="bold", color="#555555"
        )

    for a in model.arrows:
        if a.from_id not in pos or a.to_id not in pos:
            continue
        start, end = pos[a.from_id], pos[a.to_id]
        perceptual = a.channel in PERCEPTUAL_CHANNELS
        patch = FancyArrowPatch(
            start,
            end,
            arrowstyle="-|>",
            mutation_scale=14,
            linewidth=1.4 if perceptual else 1.0,
            color="#1565c0" if perceptual else "#777777",
            linestyle="-" if a.channel is not Channel.DATA else ":",
            shrinkA=18,
            shrinkB=18,
            connectionstyle="arc3,rad=0.12",
        )
        ax.add_patch(patch)
        mx, my = (start[0] + end[0]) / 2, (start[1] + end[1]) / 2
        ax.annotate(a.channel.value[0], (mx, my), fontsize=8, color="#333333")

    for e in model.entities:
        x, y = pos[e.entity_id]
        ax.scatter([x], [y], s=1600, marker="o", color=_KIND_COLOR[e.kind], zorder=3,
                   edgecolors="#333333", linewidths=1.0)
        ax.annotate(e.entity_id, (x, y), ha="center", va="center", fontweight="bold", zorder=4)
        if e.label:
            ax.annotate(e.label, (x, y - 0.62), ha="center", va="top", fontsize=7, zorder=4)

    xs = [p[0] for p in pos.values()]
    ys = [p[1] for p in pos.values()]
    ax.set_xlim(min(xs) - 1.6, max(xs) + 1.6)
    ax.set_ylim(min(ys) - 1.6, max(ys) + 1.6)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_continuity_chart(scores: dict[str, int], path: Path) -> None:
    names = list(scores)
    values = [scores[n] for n in names]
    fig, ax = plt.subplots(figsize=(5.5, 4))
    bars = ax.bar(names, values, color=["#c62828" if v == max(values) else "#2e7d32" for v in values])
    ax.bar_label(bars)
    ax.set_ylabel("distinct perception sources (lower is better)")
    ax.set_title("Perceptual continuity by configuration")
    ax.set_ylim(0, max(values) + 1)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_coverage_matrix(
    referential: list[DeviceDescriptor], needs: frozenset[Modality], path: Path
) -> None:
    modalities = sorted(needs, key=lambda m: m.value) or sorted(Modality, key=lambda m: m.value)
    devices = sorted(referential, key=lambda d: d.device_id)
    grid = [
        [1.0 if m in d.provides else 0.0 for m in modalities]
        for d in devices
    ]
    fig, ax = plt.subplots(figsize=(1.2 + len(modalities) * 1.1, 1.0 + len(devices) * 0.6))
    ax.imshow(grid, cmap="Greens", vmin=0, vmax=1.4, aspect="auto")
    ax.set_xticks(range(len(modalities)), [m.value for m in modalities], rotation=30, ha="right")
    ax.set_yticks(range(len(devices)), [d.device_id for d in devices])
    for i, row in enumerate(grid):
        for j, v in enumerate(row):
            if v:
                ax.annotate("✓", (j, i), ha="center", va="center", color="#1b5e20")
    ax.set_title("Device / modality coverage")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_analysis_report(
    models: dict[str, IrvoModel],
    tree: CttNode | None,
    referential: list[DeviceDescriptor] | None,
    out_dir: Path | str,
) -> list[Path]:
    """Render the full analysis bundle; returns the files written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    scores = {name: continuity_score(m) for name, m in models.items()}
    csv_path = out / "continuity.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "continuity-score", "entities", "arrows", "fusion-frames"])
        for name, model in models.items():
            writer.writerow(
                [name, scores[name], len(model.entities), len(model.arrows), len(model.fusion_frames)]
            )
    written.append(csv_path)

    if scores:
        chart = out / "continuity.png"
        render_continuity_chart(scores, chart)
        written.append(chart)

    for name, model in models.items():
        fig_path = out / f"irvo_{name}.png"
        render_irvo_figure(model, f"Interaction model: {name} (score {scores[name]})", fig_path)
        written.append(fig_path)

    if tree is not None and referential is not None:
        configs = derive_configurations(tree, referential)
        cfg_path = out / "configurations.csv"
        with open(cfg_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["configuration", "size", "devices", "covered-needs"])
            for i, cfg in enumerate(configs, start=1):
                writer.writerow(
                    [
                        f"config-{i}",
                        len(cfg.devices),
                        ";".join(cfg.devices),
                        ";".join(sorted(m.value for m in cfg.covered_needs)),
                    ]
                )
        written.append(cfg_path)
        coverage = out / "coverage.png"
        render_coverage_matrix(referential, tree.needs(), coverage)
        written.append(coverage)

    return written
