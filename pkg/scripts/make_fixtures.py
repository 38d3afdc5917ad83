"""Write the small CSV/XES logs bundled with the tests (tests/data/).

Fifty claims from the simulator with resources added, so the readers see
every column role. The XES copy holds the same traces.
"""
import sys
import xml.etree.ElementTree as ET
from dataclasses import replace
from pathlib import Path

from ppm_retrain.eventlog import EventLog, write_csv
from ppm_retrain.generator import generate_claim_log

STAFF = ("anna", "bert", "carla", "dmitri")


def build() -> EventLog:
    log_ = generate_claim_log(50, "none", seed=11)
    out = []
    for i, t in enumerate(log_):
        events = [replace(e, resource=STAFF[(i + j) % len(STAFF)]) for j, e in enumerate(t.events)]
        out.append(replace(t, events=events))
    return EventLog(out)


def to_xes(log_: EventLog) -> bytes:
    root = ET.Element("log", {"xes.version": "1.0", "xmlns": "http://www.xes-standard.org/"})
    for t in log_:
        tr = ET.SubElement(root, "trace")
        ET.SubElement(tr, "string", key="concept:name", value=t.case_id)
        for k, v in sorted(t.attributes.items()):
            tag = "int" if isinstance(v, int) else "string"
            ET.SubElement(tr, tag, key=k, value=str(v))
        ET.SubElement(tr, "string", key="label", value="true" if t.label else "false")
        for e in t.events:
            ev = ET.SubElement(tr, "event")
            ET.SubElement(ev, "string", key="concept:name", value=e.activity)
            ET.SubElement(ev, "date", key="time:timestamp", value=e.timestamp.isoformat())
            ET.SubElement(ev, "string", key="org:resource", value=e.resource)
            for k, v in sorted(e.attributes.items()):
                ET.SubElement(ev, "string", key=k, value=str(v))
    ET.indent(root)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def main(dest="tests/data"):
    d = Path(dest)
    d.mkdir(parents=True, exist_ok=True)
    log_ = build()
    write_csv(log_, d / "claims50.csv")
    (d / "claims50.xes").write_bytes(to_xes(log_))


if __name__ == "__main__":
    main(*sys.argv[1:])
