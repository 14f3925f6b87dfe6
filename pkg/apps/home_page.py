import streamlit as st

from config import env
from data.artifact_store import KINDS, artifact_root, list_artifacts

st.title("Home")

st.write(
    "Vehicular mmWave handover with an on-vehicle metasurface: codebooks of dual-beam "
    "surface configurations, and a millisecond simulator comparing the standalone "
    "baseline with surface-assisted make-before-break handover."
)

pages = [
    ("Beam Patterns", "Transmissive and reflective patterns of stored codebook entries."),
    ("Meta-Atom Response", "Coefficient surfaces over the bias-voltage square."),
    ("Run Metrics", "Throughput and RTT windows of simulation runs and comparisons."),
    ("Handover Timeline", "RSRP over time with handover and interruption events."),
]
for page_name, desc in pages:
    st.markdown(f"**{page_name}**: *{desc}*")

st.subheader(f"Artifacts ({env})")
st.code(str(artifact_root()))
for kind in KINDS:
    st.write(f"{kind}: {len(list_artifacts(kind))} item(s)")
st.caption("Produce artifacts with `python -m scripts.cli codebook synth` and `python -m scripts.cli sim run`.")
