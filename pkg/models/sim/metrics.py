"""
Run metrics as a pure function of the trace, so a written trace reproduces them exactly.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
import pandas as pd

from models.errors import DomainError
from models.sim.goodput import block_bits
from models.sim.scenario import LinkParams, window_bounds

TRACE_COLUMNS = ["t_ms", "ue_id", "gnb_id", "path", "gnb_beam", "surf_t_deg", "surf_r_deg", "alpha",
                 "rsrp_dbm", "sinr_db", "per", "event"]

SENT_TAGS = {"deliver", "hold", "dup", "loss"}
BLACKOUT_TAGS = {"blackout-scan", "blackout-rach"}
DATA_TAGS = SENT_TAGS | BLACKOUT_TAGS | {"outage"}

WINDOW_COLUMNS = ["t_start_ms", "t_end_ms", "ue_id", "throughput_mbps", "rtt_ms", "per",
                  "delivered_bits", "sent_blocks", "lost_blocks"]
LINK_WINDOW_COLUMNS = ["t_start_ms", "t_end_ms", "ue_id", "gnb_id", "copies", "lost", "per", "combined_per"]
PER_UE_COLUMNS = ["ue_id", "sent_bits", "delivered_bits", "lost_bits", "in_flight_bits", "outage_ms",
                  "outage_fraction", "interruption_ms", "scan_interruption_ms"]


def split_tag(event: str) -> tuple[str, float]:
    """'deliver*0.8' -> ('deliver', 0.8); untagged factors are 1."""
    base, _, factor = str(event).partition("*")
    return base, float(factor) if factor else 1.0


def percentile(values, q: float) -> float:
    """Inverted-CDF percentile: the smallest sample with at least q% of samples at or below it."""
    v = np.asarray([x for x in values if not math.isnan(x)], dtype=float)
    if v.size == 0:
        return math.nan
    return float(np.percentile(v, q, method="inverted_cdf"))


@dataclass(frozen=True, eq=False)
class Metrics:
    windows: pd.DataFrame
    link_windows: pd.DataFrame
    per_ue: pd.DataFrame
    summary: dict

    def __eq__(self, other):
        if not isinstance(other, Metrics):
            return NotImplemented
        return (self.summary == other.summary and self.windows.equals(other.windows)
                and self.link_windows.equals(other.link_windows) and self.per_ue.equals(other.per_ue))

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"metric": list(self.summary), "value": list(self.summary.values())})

    def throughput(self, ue_id: int) -> np.ndarray:
        return self.windows.loc[self.windows["ue_id"] == ue_id, "throughput_mbps"].to_numpy()


@dataclass
class _Block:
    t_send: int
    bits: float
    state: str  # deliver | hold | loss
    t_deliver: int | None = None


def _blocks(data: pd.DataFrame, link: LinkParams):
    """Per (ue, t_send) block, plus per-UE outage and interruption tick sets."""
    ticks = defaultdict(list)
    for row in data.itertuples(index=False):
        ticks[(int(row.ue_id), int(row.t_ms))].append(row)

    blocks: dict[int, dict[int, _Block]] = defaultdict(dict)
    outage, blackout, scan_blackout = defaultdict(set), defaultdict(set), defaultdict(set)
    copies = []
    for (ue, t), rows in sorted(ticks.items()):
        tags = [r.tag for r in rows]
        if all(tag == "outage" for tag in tags):
            outage[ue].add(t)
            continue
        if any(tag in BLACKOUT_TAGS for tag in tags):
            blackout[ue].add(t)
            if "blackout-scan" in tags:
                scan_blackout[ue].add(t)
        carrying = [r for r in rows if r.tag in SENT_TAGS]
        if not carrying:
            continue
        sinr = max(float(r.sinr_db) for r in carrying)
        factor = max(float(r.factor) for r in carrying)
        bits = block_bits(sinr, link.bandwidth_hz, link.efficiency, factor)
        if "deliver" in tags:
            blocks[ue][t] = _Block(t, bits, "deliver", t)
        elif "hold" in tags:
            blocks[ue][t] = _Block(t, bits, "hold")
        else:
            blocks[ue][t] = _Block(t, bits, "loss")
        if len(carrying) > 1:
            copies.extend((ue, int(r.gnb_id), t, r.tag == "loss") for r in carrying)
    return blocks, outage, blackout, scan_blackout, copies


def _apply_releases(trace: pd.DataFrame, blocks) -> None:
    rel = trace[trace["tag"].str.startswith("release@")]
    for row in rel.itertuples(index=False):
        t_send = int(row.tag.split("@", 1)[1])
        block = blocks[int(row.ue_id)].get(t_send)
        if block is None:
            raise DomainError(f"release of unknown block sent at {t_send} ms for UE {row.ue_id}")
        block.state, block.t_deliver = "deliver", int(row.t_ms)


def _ping_pongs(protocol: pd.DataFrame, window_ms: int) -> int:
    count = 0
    serving, last_ho = {}, {}
    for row in protocol.itertuples(index=False):
        entity, gnb, t = int(row.ue_id), int(row.gnb_id), int(row.t_ms)
        if row.tag in ("attach", "reattach"):
            serving[entity] = gnb
            last_ho.pop(entity, None)
        elif row.tag == "ho-complete":
            prev = last_ho.get(entity)
            if prev is not None and gnb == prev[1] and t - prev[0] <= window_ms:
                count += 1
            last_ho[entity] = (t, serving.get(entity), gnb)
            serving[entity] = gnb
    return count


def metrics_from_trace(trace: pd.DataFrame, link: LinkParams, duration_ms: int, window_ms: int = 100,
                       ping_pong_ms: int = 1000, data_start_ms: int = 80) -> Metrics:
    df = trace.copy()
    split = df["event"].astype(str).map(split_tag)
    df["tag"] = [s[0] for s in split]
    df["factor"] = [s[1] for s in split]

    data = df[df["tag"].isin(DATA_TAGS) & (df["ue_id"] >= 0)]
    blocks, outage, blackout, scan_blackout, copies = _blocks(data, link)
    _apply_releases(df, blocks)

    ue_ids = sorted(set(int(u) for u in df.loc[df["event"] == "idle", "ue_id"]) | set(blocks) | set(outage))
    bounds = window_bounds(duration_ms, window_ms)

    rows = []
    for ue in ue_ids:
        ue_blocks = list(blocks[ue].values())
        for start, end in bounds:
            delivered = [b for b in ue_blocks if b.t_deliver is not None and start <= b.t_deliver < end]
            sent = [b for b in ue_blocks if start <= b.t_send < end]
            lost = [b for b in sent if b.state == "loss"]
            bits = math.fsum(b.bits for b in delivered)
            thr = bits / ((end - start) / 1000.0) / 1e6
            loss_frac = len(lost) / len(sent) if sent else 0.0
            if delivered and thr > 0:
                hold = float(np.mean([b.t_deliver - b.t_send for b in delivered]))
                rtt = link.base_rtt_ms + link.packet_bits / (thr * 1e3) + hold + link.retx_penalty_ms * loss_frac
            else:
                rtt = math.nan
            rows.append((start, end, ue, thr, rtt, len(lost) / len(sent) if sent else math.nan,
                         bits, len(sent), len(lost)))
    windows = pd.DataFrame(rows, columns=WINDOW_COLUMNS)

    link_rows = []
    if copies:
        cp = pd.DataFrame(copies, columns=["ue_id", "gnb_id", "t", "lost"])
        cp["w"] = cp["t"] // window_ms
        combined = {}
        for (ue, w), grp in cp.groupby(["ue_id", "w"]):
            ticks = grp.groupby("t")["lost"].all()
            combined[(ue, w)] = float(ticks.mean())
        for (ue, gnb, w), grp in cp.groupby(["ue_id", "gnb_id", "w"]):
            start = int(w) * window_ms
            link_rows.append((start, min(start + window_ms, duration_ms), int(ue), int(gnb), len(grp),
                              int(grp["lost"].sum()), float(grp["lost"].mean()), combined[(ue, w)]))
    link_windows = pd.DataFrame(link_rows, columns=LINK_WINDOW_COLUMNS)

    data_ms = max(duration_ms - data_start_ms, 1)
    per_ue_rows = []
    for ue in ue_ids:
        b = list(blocks[ue].values())
        per_ue_rows.append((
            ue,
            math.fsum(x.bits for x in b),
            math.fsum(x.bits for x in b if x.state == "deliver"),
            math.fsum(x.bits for x in b if x.state == "loss"),
            math.fsum(x.bits for x in b if x.state == "hold"),
            len(outage[ue]), len(outage[ue]) / data_ms, len(blackout[ue]), len(scan_blackout[ue]),
        ))
    per_ue = pd.DataFrame(per_ue_rows, columns=PER_UE_COLUMNS)

    protocol = df[df["tag"].isin({"attach", "reattach", "ho-decision", "ho-command", "ho-complete", "revert"})]
    summary = {
        "ho_count": int((protocol["tag"] == "ho-complete").sum()),
        "ho_command_count": int((protocol["tag"] == "ho-command").sum()),
        "ho_decision_count": int((protocol["tag"] == "ho-decision").sum()),
        "revert_count": int((protocol["tag"] == "revert").sum()),
        "ping_pong_count": _ping_pongs(protocol, ping_pong_ms),
        "outage_ms": int(per_ue["outage_ms"].sum()),
        "interruption_ms": int(per_ue["interruption_ms"].sum()),
        "scan_interruption_ms": int(per_ue["scan_interruption_ms"].sum()),
        "sent_bits": float(per_ue["sent_bits"].sum()),
        "delivered_bits": float(per_ue["delivered_bits"].sum()),
        "lost_bits": float(per_ue["lost_bits"].sum()),
        "in_flight_bits": float(per_ue["in_flight_bits"].sum()),
    }
    return Metrics(windows, link_windows, per_ue, summary)


def delivered_sequence(trace: pd.DataFrame, ue_id: int) -> pd.DataFrame:
    """Sequence numbers of one UE's blocks in delivery order."""
    split = trace["event"].astype(str).map(split_tag)
    tags = pd.Series([s[0] for s in split], index=trace.index)
    mine = trace["ue_id"] == ue_id
    sent_ticks = sorted(set(trace.loc[mine & tags.isin(SENT_TAGS), "t_ms"].astype(int)))
    seq_of = {t: i for i, t in enumerate(sent_ticks)}
    immediate = trace.loc[mine & (tags == "deliver"), "t_ms"].astype(int)
    out = [(t, t, seq_of[t]) for t in sorted(set(immediate))]
    for t, tag in zip(trace.loc[mine, "t_ms"], tags[mine]):
        if tag.startswith("release@"):
            t_send = int(tag.split("@", 1)[1])
            out.append((int(t), t_send, seq_of[t_send]))
    out.sort()
    return pd.DataFrame(out, columns=["t_deliver_ms", "t_send_ms", "seq"])


COMPARE_METRICS = ("throughput_p10", "throughput_median", "throughput_p90", "rtt_p10", "rtt_median",
                   "rtt_p90", "ho_count", "ho_command_count", "ping_pong_count", "revert_count",
                   "outage_ms", "interruption_ms")


def headline(metrics: Metrics) -> dict[str, float]:
    thr = metrics.windows["throughput_mbps"].tolist()
    rtt = metrics.windows["rtt_ms"].tolist()
    out = {
        "throughput_p10": percentile(thr, 10), "throughput_median": percentile(thr, 50),
        "throughput_p90": percentile(thr, 90), "rtt_p10": percentile(rtt, 10),
        "rtt_median": percentile(rtt, 50), "rtt_p90": percentile(rtt, 90),
    }
    out.update({k: float(metrics.summary[k]) for k in COMPARE_METRICS if k in metrics.summary})
    return out


def delta_table(arms: list[tuple[str, Metrics]]) -> pd.DataFrame:
    """Long table (metric, arm, protocol, value, delta); deltas are against the first arm."""
    if len(arms) < 2:
        raise DomainError("a comparison needs at least two arms")
    heads = [(label, headline(m)) for label, m in arms]
    base = heads[0][1]
    rows = []
    for metric in COMPARE_METRICS:
        for i, (label, h) in enumerate(heads):
            value, ref = h[metric], base[metric]
            # undefined on both arms, such as RTT with nothing delivered, is no change
            delta = 0.0 if math.isnan(value) and math.isnan(ref) else value - ref
            rows.append((metric, i, label, value, delta))
    return pd.DataFrame(rows, columns=["metric", "arm", "protocol", "value", "delta"])
