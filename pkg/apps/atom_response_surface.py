import numpy as np
import plotly.graph_objects as go
import streamlit as st

from data.atom_grid import load_atom_grid
from models.surface_model import DEFAULT_ATOM_MODEL, VOLTAGE_MAX, VOLTAGE_MIN

QUANTITIES = {
    "|c_t|": lambda c_t, c_r: np.abs(c_t),
    "|c_r|": lambda c_t, c_r: np.abs(c_r),
    "arg c_t (deg)": lambda c_t, c_r: np.degrees(np.angle(c_t)),
    "arg c_r (deg)": lambda c_t, c_r: np.degrees(np.angle(c_r)),
}


@st.cache_data
def response_grid(grid_path: str, f_ghz: float, steps: int):
    model = load_atom_grid(grid_path) if grid_path else DEFAULT_ATOM_MODEL
    v = np.linspace(VOLTAGE_MIN, VOLTAGE_MAX, steps)
    u_m, u_e = np.meshgrid(v, v, indexing="ij")
    c_t, c_r = model.coefficients(u_m, u_e, f_ghz)
    return v, c_t, c_r


grid_path = st.sidebar.text_input("Measured grid CSV (empty: analytic resonator model)", "")
f_ghz = st.sidebar.slider("Frequency (GHz)", 25.0, 27.0, 26.0, 0.1)
quantity = st.sidebar.selectbox("Quantity", list(QUANTITIES))
steps = st.sidebar.select_slider("Grid resolution", options=[17, 33, 65, 129], value=65)

v, c_t, c_r = response_grid(grid_path, f_ghz, steps)
z = QUANTITIES[quantity](c_t, c_r)

fig = go.Figure(data=[go.Surface(x=v, y=v, z=z, colorscale="Viridis")])
fig.update_layout(
    title=f"{quantity} at {f_ghz:.1f} GHz",
    scene=dict(
        xaxis_title="u_e (V)",
        yaxis_title="u_m (V)",
        zaxis_title=quantity,
    ),
    autosize=True,
    height=700,
)
st.plotly_chart(fig, use_container_width=True)

st.caption(f"Passivity check: max |c_t|² + |c_r|² = {float(np.max(np.abs(c_t) ** 2 + np.abs(c_r) ** 2)):.4f}")
