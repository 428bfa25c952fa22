"""Machine-readable check records and the verification report writer."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass


@dataclass
class CheckRecord:
    id: str
    params: dict
    status: str  # pass | fail | outside-hypothesis | info
    residual: str = "0"
    millis: int = 0

    @property
    def ok(self):
        return self.status != "fail"

    def as_json(self, timing=True):
        obj = {
            "id": self.id,
            "params": {k: str(v) for k, v in sorted(self.params.items())},
            "status": self.status,
            "residual": self.residual,
        }
        if timing:
            obj["millis"] = self.millis
        return json.dumps(obj, sort_keys=True)


class Reporter:
    """Collects records; one json line per check, assembly serialized."""

    def __init__(self):
        self.records = []
        self._t0 = None

    def start(self):
        self._t0 = time.monotonic()

    def add(self, id, params, ok, residual="0", outside=False, status=None):
        millis = 0
        if self._t0 is not None:
            millis = int(1000 * (time.monotonic() - self._t0))
            self._t0 = time.monotonic()
        if status is None:
            status = "outside-hypothesis" if outside else ("pass" if ok else "fail")
        rec = CheckRecord(id, params, status, residual, millis)
        self.records.append(rec)
        return rec

    def add_residual(self, res):
        """Record a series-residual object, honoring its hypothesis flag."""
        ok = res.ok
        outside = not getattr(res, "within_hypothesis", True)
        summary = "0"
        if not ok:
            v = res.first_violation()
            summary = "nonzero at %s: %s" % (v[0], v[1]) if v else "nonzero"
        r = self.add(
            res.name,
            dict(res.params, order=res.certified_order),
            ok or outside,
            summary,
            outside=outside,
        )
        return r

    @property
    def failed(self):
        return [r for r in self.records if r.status == "fail"]

    def write(self, path, timing=True):
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(r.as_json(timing) + "\n")

    def summary(self):
        npass = sum(1 for r in self.records if r.status == "pass")
        nfail = len(self.failed)
        nout = sum(1 for r in self.records if r.status == "outside-hypothesis")
        ncap = sum(1 for r in self.records if r.status == "window-capped")
        line = "%d checks: %d pass, %d fail, %d outside hypothesis" % (
            len(self.records),
            npass,
            nfail,
            nout,
        )
        if ncap:
            line += ", %d window-capped" % ncap
        return line
