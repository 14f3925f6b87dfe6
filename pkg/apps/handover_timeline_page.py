import altair as alt
import pandas as pd
import streamlit as st

from data.artifact_store import list_artifacts
from data.trace_io import read_trace, rsrp_table
from models.sim.metrics import split_tag

PROTOCOL_TAGS = ["ho-decision", "ho-command", "ho-complete", "revert", "reattach", "attach"]


@st.cache_data
def load(path: str):
    trace = read_trace(path)
    tags = trace["event"].map(lambda e: split_tag(e)[0])
    rsrp = rsrp_table(trace)
    events = trace.loc[tags.isin(PROTOCOL_TAGS), ["t_ms", "ue_id", "gnb_id"]].assign(event=tags[tags.isin(PROTOCOL_TAGS)])
    gaps = trace.loc[tags.str.startswith("blackout"), ["t_ms", "ue_id"]].assign(event=tags[tags.str.startswith("blackout")])
    return rsrp, events, gaps


def main():
    traces = list_artifacts("runs", "*/trace.csv") + list_artifacts("traces", "*.csv")
    path = st.sidebar.selectbox("Trace", traces, format_func=lambda p: f"{p.parent.name}/{p.name}")
    if path is None:
        st.warning("No traces yet. `sim run` writes one per run.")
        return
    rsrp, events, gaps = load(str(path))
    ues = sorted(rsrp["ue_id"].unique())
    ue = st.sidebar.selectbox("UE", ues)
    step = st.sidebar.slider("Plot every n-th ms", 1, 50, 10)

    sel = rsrp[(rsrp["ue_id"] == ue) & (rsrp["t_ms"] % step == 0)].copy()
    sel = sel[sel["rsrp_dbm"].abs() != float("inf")]
    sel["link"] = "gNB " + sel["gnb_id"].astype(str) + " / " + sel["path"]
    lines = (
        alt.Chart(sel)
        .mark_line()
        .encode(
            x=alt.X("t_ms:Q", title="Time (ms)"),
            y=alt.Y("rsrp_dbm:Q", title="RSRP (dBm)"),
            color=alt.Color("link:N", title="Link"),
        )
    )
    ev = events[events["ue_id"].isin([ue, -1])]
    rules = alt.Chart(ev).mark_rule(strokeDash=[4, 3]).encode(
        x="t_ms:Q", color=alt.value("#543FDD"), tooltip=["event", "gnb_id", "t_ms"])
    st.altair_chart((lines + rules).properties(height=420), use_container_width=True)

    g = gaps[gaps["ue_id"] == ue]
    st.write(f"Interrupted ticks for UE {ue}: {len(g)} "
             f"(scan {int((g['event'] == 'blackout-scan').sum())}, RACH {int((g['event'] == 'blackout-rach').sum())})")
    st.dataframe(ev.reset_index(drop=True), hide_index=True)


main()
