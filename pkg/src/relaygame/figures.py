"""Matplotlib renderings of networks and structure-transition diagrams.

All figures are written straight to files (headless backend) with metadata
stripped, so repeated runs of the same configuration produce byte-identical
images.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.lines import Line2D
from matplotlib.patches import FancyArrowPatch

from .coalitions import CoalitionStructure, Move, TransitionGraph, omega_labels
from .linkgame import NetworkGraph
from .model import Scenario

__all__ = ["plot_network", "plot_transition_graph"]

_SP_MARKERS = ["o", "v", "^", "D", "P", "X"]
_SP_COLORS = ["tab:blue", "tab:orange", "tab:green", "tab:purple", "tab:brown", "tab:cyan"]

_SAVE_OPTS = {"dpi": 150, "metadata": {"Software": None}}


def _sp_style(sp_id: int) -> tuple[str, str]:
    index = (sp_id - 1) % len(_SP_MARKERS)
    return _SP_MARKERS[index], _SP_COLORS[index]


def plot_network(
    scenario: Scenario,
    graph: NetworkGraph,
    path: str | Path,
    *,
    title: str = "relay network",
) -> Path:
    """Scatter of stations and devices with arrows along the formed links."""
    fig, ax = plt.subplots(figsize=(9, 5))
    for station in scenario.stations:
        ax.plot(
            station.position.x,
            station.position.y,
            marker="s",
            markersize=13,
            color="black",
        )
        ax.annotate(
            f"BS{station.id}",
            (station.position.x, station.position.y),
            textcoords="offset points",
            xytext=(0, 10),
            ha="center",
            fontsize=9,
        )
    for device in scenario.devices:
        marker, color = _sp_style(device.owner)
        ax.plot(
            device.position.x,
            device.position.y,
            marker=marker,
            markersize=7,
            markerfacecolor=color if device.is_source else "none",
            markeredgecolor=color,
            linestyle="none",
        )
        ax.annotate(
            str(device.id),
            (device.position.x, device.position.y),
            textcoords="offset points",
            xytext=(4, 4),
            fontsize=7,
            color="dimgray",
        )
    for td_id, target in graph.edges():
        start = scenario.device(td_id).position
        end = scenario.node_position(target)
        ax.add_patch(
            FancyArrowPatch(
                (start.x, start.y),
                (end.x, end.y),
                arrowstyle="-|>",
                mutation_scale=11,
                color="gray",
                linewidth=1.0,
                shrinkA=6,
                shrinkB=8,
            )
        )
    handles = [
        Line2D([], [], marker="s", color="black", linestyle="none", label="station"),
    ]
    for provider in scenario.providers:
        marker, color = _sp_style(provider.id)
        handles.append(
            Line2D(
                [],
                [],
                marker=marker,
                color=color,
                linestyle="none",
                label=f"SP{provider.id} (filled = source)",
            )
        )
    ax.legend(handles=handles, loc="upper right", fontsize=8)
    ax.set_xlim(-50, scenario.area[0] + 50)
    ax.set_ylim(-50, scenario.area[1] + 50)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title)
    ax.set_aspect("equal")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, **_SAVE_OPTS)
    plt.close(fig)
    return out


def plot_transition_graph(
    graph: TransitionGraph,
    path: str | Path,
    *,
    labels: Mapping[CoalitionStructure, str] | None = None,
    moves: Sequence[Move] | None = None,
    title: str = "structure transitions",
) -> Path:
    """Circular layout; absorbing structures get a double ring.

    Merge moves are drawn solid, splits dashed; arrows curve so opposite
    directions between the same pair stay distinguishable.
    """
    labels = labels or omega_labels(graph.states)
    shown = graph.moves if moves is None else tuple(moves)
    count = len(graph.states)
    positions = {}
    for index, state in enumerate(graph.states):
        angle = math.pi / 2 - 2 * math.pi * index / max(count, 1)
        positions[state] = (math.cos(angle), math.sin(angle))

    fig, ax = plt.subplots(figsize=(7.5, 7.5))
    for state, (x, y) in positions.items():
        absorbing = state in graph.absorbing
        ax.add_patch(plt.Circle((x, y), 0.13, fill=True, color="white", ec="black", zorder=3))
        if absorbing:
            ax.add_patch(plt.Circle((x, y), 0.165, fill=False, ec="black", zorder=3))
        ax.text(x, y, labels[state], ha="center", va="center", fontsize=9, zorder=4)
        ax.text(
            x * 1.32,
            y * 1.32,
            state.serialize(),
            ha="center",
            va="center",
            fontsize=7,
            color="dimgray",
            zorder=4,
        )
    seen_pairs = set()
    for move in sorted(
        shown, key=lambda m: (labels[m.source], labels[m.target], m.actor, m.kind)
    ):
        if move.source == move.target:
            continue
        key = (move.source, move.target, move.kind)
        if key in seen_pairs:
            continue  # one arrow per direction and kind keeps the figure legible
        seen_pairs.add(key)
        start, end = positions[move.source], positions[move.target]
        ax.add_patch(
            FancyArrowPatch(
                start,
                end,
                connectionstyle="arc3,rad=0.15",
                arrowstyle="-|>",
                mutation_scale=13,
                linewidth=1.1,
                linestyle="-" if move.kind == "merge" else "--",
                color="tab:blue" if move.kind == "merge" else "tab:red",
                shrinkA=16,
                shrinkB=16,
                zorder=2,
            )
        )
    handles = [
        Line2D([], [], color="tab:blue", label="merge"),
        Line2D([], [], color="tab:red", linestyle="--", label="split"),
        Line2D(
            [],
            [],
            marker="o",
            color="black",
            markerfacecolor="white",
            linestyle="none",
            label="double ring = absorbing",
        ),
    ]
    ax.legend(handles=handles, loc="lower left", fontsize=8)
    ax.set_xlim(-1.6, 1.6)
    ax.set_ylim(-1.6, 1.6)
    ax.set_aspect("equal")
    ax.axis("off")
    ax.set_title(title)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, **_SAVE_OPTS)
    plt.close(fig)
    return out
