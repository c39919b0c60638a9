"""Cross-standard QoS vocabulary: 3GPP QCI rows, DiffServ PHBs, 802.11 EDCA ACs, 802.1D UPs.

The nine QCI rows are frozen at import time. DSCP numbers follow the IANA
registry (EF = 46, AFxy = 8x + 2y, default = 0).

``export_marking`` bridges an incentive-model marking (delay class, drop
priority) onto these vocabularies. The bridge is lossy on purpose: delay
class and drop priority are independent axes, and a single PHB/UP pair
cannot carry both.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from types import MappingProxyType

from .errors import UnknownDscp, UnknownPhb, UnknownQci

TRAFFIC_CLASSES = ("Conversational", "Streaming", "Interactive", "Background")
PHBS = ("EF", "AF41", "AF31", "AF21", "AF11", "BE")
EDCA_ACS = ("AC_VO", "AC_VI", "AC_BE", "AC_BK")

DEFAULT_PRIMARY_QCIS = (2, 4, 6, 8)


@dataclass(frozen=True)
class QciRow:
    qci: int
    traffic_class: str
    thp: int | None
    phb: str
    edca_ac: str
    up: int
    primary_class_flag: bool = False
    # the printed class label sits between rows; 1 and 3 are assigned by grouping
    label_ambiguous: bool = False

    def __post_init__(self):
        if (self.thp is not None) != (self.traffic_class == "Interactive"):
            raise ValueError(f"QCI {self.qci}: THP present iff Interactive")


def _rows(primary=DEFAULT_PRIMARY_QCIS):
    p = set(primary)
    return (
        QciRow(1, "Conversational", None, "EF", "AC_VO", 7, 1 in p, label_ambiguous=True),
        QciRow(2, "Conversational", None, "EF", "AC_VO", 6, 2 in p),
        QciRow(3, "Conversational", None, "EF", "AC_VI", 5, 3 in p, label_ambiguous=True),
        QciRow(4, "Streaming", None, "AF41", "AC_VI", 4, 4 in p),
        QciRow(5, "Interactive", 1, "AF31", "AC_BE", 3, 5 in p),
        QciRow(6, "Interactive", 2, "AF21", "AC_BE", 3, 6 in p),
        QciRow(7, "Interactive", 3, "AF11", "AC_BE", 0, 7 in p),
        QciRow(8, "Background", None, "BE", "AC_BK", 2, 8 in p),
        QciRow(9, "Background", None, "BE", "AC_BK", 1, 9 in p),
    )


QCI_ROWS: tuple[QciRow, ...] = _rows()
_BY_QCI = MappingProxyType({r.qci: r for r in QCI_ROWS})


def row_for_qci(qci: int) -> QciRow:
    try:
        return _BY_QCI[qci]
    except (KeyError, TypeError):
        raise UnknownQci(qci) from None


def qci_table(primary_qcis=DEFAULT_PRIMARY_QCIS) -> tuple[QciRow, ...]:
    """All nine rows, with the primary-class flag set on ``primary_qcis``."""
    for q in primary_qcis:
        row_for_qci(q)
    p = set(primary_qcis)
    return tuple(replace(r, primary_class_flag=r.qci in p) for r in QCI_ROWS)


_DSCP = MappingProxyType({"EF": 46, "BE": 0, **{
    f"AF{x}{y}": 8 * x + 2 * y for x in range(1, 5) for y in range(1, 4)}})
_PHB_BY_DSCP = MappingProxyType({v: k for k, v in _DSCP.items()})


def dscp_for_phb(phb: str) -> int:
    """EF -> 46, BE -> 0, AFxy -> 8x + 2y."""
    try:
        return _DSCP[phb]
    except (KeyError, TypeError):
        raise UnknownPhb(phb) from None


def phb_for_dscp(dscp: int) -> str:
    try:
        return _PHB_BY_DSCP[dscp]
    except (KeyError, TypeError):
        raise UnknownDscp(dscp) from None


def ac_for_up(up: int) -> str:
    if not 0 <= up <= 7:
        raise ValueError(f"user priority out of range: {up}")
    if up >= 6:
        return "AC_VO"
    if up >= 4:
        return "AC_VI"
    if up in (0, 3):
        return "AC_BE"
    return "AC_BK"


# class 2 bands, highest first: (min priority, phb, up)
_CLASS2_BANDS = ((6, "AF31", 3), (4, "AF21", 3), (2, "AF11", 0), (0, "BE", 1))


def export_marking(delay_class: int, drop_priority: int) -> tuple[str, int]:
    """Lossy export of an incentive-model marking to a (PHB, UP) pair."""
    if not 0 <= drop_priority <= 7:
        raise ValueError(f"drop priority out of range: {drop_priority}")
    if delay_class == 0:
        return "EF", 7
    if delay_class == 1:
        return ("EF", 6) if drop_priority >= 4 else ("AF41", 5)
    if delay_class == 2:
        for lo, phb, up in _CLASS2_BANDS:
            if drop_priority >= lo:
                return phb, up
    raise ValueError(f"unknown delay class: {delay_class}")


def table_csv(rows=QCI_ROWS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["traffic_class", "thp", "qci", "phb", "dscp", "edca_ac", "up", "primary"])
    for r in rows:
        w.writerow([r.traffic_class, "N/A" if r.thp is None else r.thp, r.qci, r.phb,
                    dscp_for_phb(r.phb), r.edca_ac, r.up, int(r.primary_class_flag)])
    return buf.getvalue()


def table_text(rows=QCI_ROWS) -> str:
    head = f"{'Traffic class':<15}{'THP':<5}{'QCI':<5}{'PHB':<6}{'DSCP':<6}{'EDCA AC':<9}{'UP':<4}"
    lines = [head]
    for r in rows:
        thp = "N/A" if r.thp is None else str(r.thp)
        mark = "*" if r.primary_class_flag else ""
        lines.append(f"{r.traffic_class:<15}{thp:<5}{r.qci:<5}{r.phb:<6}"
                     f"{dscp_for_phb(r.phb):<6}{r.edca_ac:<9}{r.up:<4}{mark}")
    return "\n".join(lines) + "\n"
