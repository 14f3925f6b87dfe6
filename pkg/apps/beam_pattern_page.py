import altair as alt
import pandas as pd
import streamlit as st

from data.artifact_store import list_artifacts
from models.codebook import load_codebook
from models.surface_model import EVAL_GRID, SurfaceConfig, beam_pattern


@st.cache_data
def load_book(path: str):
    cb = load_codebook(path)
    return cb, [k.label for k in cb.keys()]


def pattern_frame(config, geometry, incident: float) -> pd.DataFrame:
    bp = beam_pattern(config, geometry, incident, EVAL_GRID)
    return pd.concat([
        pd.DataFrame({"angle_deg": bp.angles, "gain_db": bp.gain_t, "side": "transmissive"}),
        pd.DataFrame({"angle_deg": bp.angles, "gain_db": bp.gain_r, "side": "reflective"}),
    ], ignore_index=True)


def main():
    books = list_artifacts("codebooks", "*.jsonl")
    path = st.sidebar.text_input("Codebook file", str(books[-1]) if books else "")
    if not path:
        st.warning("No codebook yet. Synthesize one with `python -m scripts.cli codebook synth`.")
        return
    cb, labels = load_book(path)
    keys = cb.keys()
    choice = st.sidebar.selectbox("Entry", ["surface off"] + labels)
    incident = st.sidebar.slider("Incident angle (deg)", -60.0, 60.0, float(cb.incident_angle), 5.0)

    if choice == "surface off":
        config = SurfaceConfig.off(cb.geometry.n_elements)
        st.write("Unprogrammed surface: the reflective side acts as a specular mirror.")
    else:
        entry = cb.entries[keys[labels.index(choice)]]
        config = entry.config
        c1, c2, c3, c4 = st.columns(4)
        c1.metric("G_w,tra", f"{entry.g_w_tra:.2f} dB")
        c2.metric("G_w,ref", f"{entry.g_w_ref:.2f} dB")
        c3.metric("Objective", f"{entry.objective_db:.2f} dB")
        c4.metric("Sidelobe margin", f"{entry.sidelobe_margin:.2f} dB")

    df = pattern_frame(config, cb.geometry, incident)
    chart = (
        alt.Chart(df)
        .mark_line()
        .encode(
            x=alt.X("angle_deg:Q", title="Angle (deg)"),
            y=alt.Y("gain_db:Q", title="Normalized gain (dB)", scale=alt.Scale(domain=[-40, 0], clamp=True)),
            color=alt.Color("side:N", title="Side"),
            tooltip=["side", "angle_deg", alt.Tooltip("gain_db", format=".2f")],
        )
        .properties(height=420)
    )
    st.altair_chart(chart, use_container_width=True)


main()
