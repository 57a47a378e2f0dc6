"""Optional plotly charts for experiment tables, written as standalone HTML."""
import logging
from pathlib import Path

import numpy as np
import plotly.graph_objects as go

logger = logging.getLogger(__name__)

LAYOUT = dict(
    height=450,
    margin=dict(l=40, r=20, t=40, b=40),
    template="plotly_white",
)


def error_profile_figure(frame, title="Shadowing error"):
    fig = go.Figure()
    fig.add_trace(go.Scatter(
        x=frame["i"], y=frame["e_norm"],
        mode="lines+markers",
        line=dict(color="#1f77b4", width=2),
        name="|v_i - v_i(exact)|",
    ))
    fig.update_layout(title=title, xaxis_title="i", yaxis_title="error norm",
                      yaxis_type="log", **LAYOUT)
    return fig


def sweep_figure(frame, title="d<J>/ds: least squares shadowing vs finite differences"):
    fig = go.Figure()
    for n, group in frame.groupby("n", sort=True):
        fig.add_trace(go.Scatter(
            x=group["s"], y=group["lss_estimate"],
            mode="markers", name=f"LSS n={n}",
        ))
    fd = frame.drop_duplicates("s")
    fig.add_trace(go.Scatter(
        x=fd["s"], y=fd["fd_estimate"],
        mode="markers",
        marker=dict(color="black", symbol="line-ew-open", size=12),
        error_y=dict(type="data", array=fd["fd_ci3"], visible=True),
        name="finite difference (3 sigma)",
    ))
    fig.update_layout(title=title, xaxis_title="s", yaxis_title="d<J>/ds", **LAYOUT)
    return fig


def convergence_figure(means, title="Error against trajectory length"):
    n = means["n"].to_numpy(dtype=float)
    err = means["mean_abs_error"].to_numpy(dtype=float)
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=n, y=err, mode="markers", marker=dict(size=9), name="mean |error|"))

    # reference rates anchored at the first point
    for rate, dash, label in ((1.0, "dash", "O(1/n)"), (0.5, "dot", "O(1/sqrt(n))")):
        fig.add_trace(go.Scatter(
            x=n, y=err[0] * (n / n[0]) ** -rate,
            mode="lines", line=dict(color="gray", dash=dash), name=label,
        ))
    fig.update_layout(title=title, xaxis_title="n", yaxis_title="mean |error|",
                      xaxis_type="log", yaxis_type="log", **LAYOUT)
    return fig


def attractor_figure(frame, title="Attractor"):
    cols = list(frame.columns)
    if len(cols) >= 3:
        trace = go.Scatter3d(x=frame[cols[0]], y=frame[cols[1]], z=frame[cols[2]],
                             mode="markers", marker=dict(size=1.5))
    elif len(cols) == 2:
        trace = go.Scattergl(x=frame[cols[0]], y=frame[cols[1]], mode="markers",
                             marker=dict(size=2))
    else:
        trace = go.Scatter(x=np.arange(len(frame)), y=frame[cols[0]], mode="markers")
    fig = go.Figure(data=[trace])
    fig.update_layout(title=title, showlegend=False, **LAYOUT)
    return fig


def write_chart(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.write_html(str(path), include_plotlyjs="cdn")
    logger.info("wrote chart %s", path)
    return path
