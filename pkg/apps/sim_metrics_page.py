import altair as alt
import numpy as np
import pandas as pd
import streamlit as st

from data.artifact_store import list_artifacts
from models.sim.metrics import percentile


@st.cache_data
def load_arm(path: str) -> tuple[pd.DataFrame, pd.DataFrame]:
    return pd.read_csv(f"{path}/metrics.csv"), pd.read_csv(f"{path}/summary.csv")


def arms_of(run_dir) -> list:
    if (run_dir / "metrics.csv").exists():
        return [run_dir]
    return sorted(p for p in run_dir.iterdir() if (p / "metrics.csv").exists())


def main():
    runs = list_artifacts("runs")
    if not runs:
        st.warning("No runs yet. Use `python -m scripts.cli --config ... sim run` or `sim compare`.")
        return
    run_dir = st.sidebar.selectbox("Run", runs, format_func=lambda p: p.name)
    frames, summaries = [], []
    for arm in arms_of(run_dir):
        windows, summary = load_arm(str(arm))
        windows["arm"] = arm.name
        summary["arm"] = arm.name
        frames.append(windows)
        summaries.append(summary)
    if not frames:
        st.warning("This run directory holds no metrics.")
        return
    df = pd.concat(frames, ignore_index=True)
    df["ue"] = "UE " + df["ue_id"].astype(str)

    metric = st.radio("Series", ["throughput_mbps", "rtt_ms"], horizontal=True)
    chart = (
        alt.Chart(df.dropna(subset=[metric]))
        .mark_line(point=True)
        .encode(
            x=alt.X("t_start_ms:Q", title="Window start (ms)"),
            y=alt.Y(f"{metric}:Q", title=metric),
            color=alt.Color("arm:N", title="Protocol"),
            strokeDash=alt.StrokeDash("ue:N", title="UE"),
            tooltip=["arm", "ue", "t_start_ms", alt.Tooltip(metric, format=".2f")],
        )
        .properties(height=380)
    )
    st.altair_chart(chart, use_container_width=True)

    rows = []
    for arm, grp in df.groupby("arm"):
        for col in ("throughput_mbps", "rtt_ms"):
            vals = grp[col].to_numpy(dtype=float)
            rows.append({"arm": arm, "series": col, "p10": percentile(vals, 10),
                         "median": percentile(vals, 50), "p90": percentile(vals, 90),
                         "mean": float(np.nanmean(vals)) if np.isfinite(vals).any() else np.nan})
    st.subheader("Percentiles")
    st.dataframe(pd.DataFrame(rows), hide_index=True)

    st.subheader("Counters")
    counters = pd.concat(summaries).pivot(index="metric", columns="arm", values="value")
    st.dataframe(counters)

    compare_csv = run_dir / "compare.csv"
    if compare_csv.exists():
        st.subheader("Deltas against the first protocol")
        st.dataframe(pd.read_csv(compare_csv), hide_index=True)


main()
