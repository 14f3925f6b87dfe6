import sys
from pathlib import Path

import altair as alt
import streamlit as st
from st_pages import add_page_title, get_nav_from_toml

sys.path.append(str(Path(__file__).resolve().parent.parent))

st.set_page_config(layout="wide")

# chart palette, kept in step with the [theme] block that app.sh writes
INK = "#2E2E38"
RULE = "#D6D6D6"
FONT = "Inter"


@alt.theme.register('hms', enable=True)
def hms_theme():
    text = {"labelColor": INK, "titleColor": INK, "labelFont": FONT, "titleFont": FONT}
    return {
        "config": {
            "background": "#FFFFFF",
            "axis": {"domainColor": RULE, "gridColor": RULE, **text},
            "legend": text,
            "title": {"color": INK, "font": FONT},
        }
    }


# Load navigation from .streamlit/pages.toml
nav = get_nav_from_toml()

pg = st.navigation(nav)
add_page_title(pg)

pg.run()
