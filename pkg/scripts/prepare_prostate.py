#!/usr/bin/env python3
"""Prepare the Byar & Greene prostate cancer trial data for crisk.

The trial randomized 502 prostate cancer patients to placebo or one of
three doses of diethylstilbestrol. The analysis here keeps the placebo arm
(a=0) and the high-dose 5.0 mg estrogen arm (a=1), follows patients in
monthly intervals through month 60, and treats prostate cancer death as the
event of interest and death from any other cause as the competing event.

Input: the public patient-level CSV (one row per patient). A copy is
distributed, among other places, at https://hbiostat.org/data/ as
``prostate``; export it to CSV first if you have the .rda or .xls form.
Expected columns (extra columns are ignored, case-insensitive):

  patno   patient number (any unique id works)
  rx      treatment: 'placebo', '0.2 mg estrogen', '1.0 mg estrogen',
          '5.0 mg estrogen'
  dtime   months of follow-up
  status  'alive', 'dead - prostatic ca', or any other 'dead - ...' value
  age     age in years
  hg      serum hemoglobin (g/100ml)
  pf      daily activity: 'normal activity' or a reduced-activity level
  hx      history of cardiovascular disease (0/1)

Output: a long-format person-time CSV with columns
subject_id,k,a,activity,age,hg,hx,c_next,d_next,y_next where each subject
contributes one record per month at risk (k = 0..59), truncated at the
first of loss to follow-up, death, or month 60. ``activity`` is 1 for
normal daily activity and 0 otherwise; ``hx`` is the cardiovascular-disease
history indicator; ``age`` and ``hg`` stay continuous (the analysis config
cuts age at 60 and 75 and hemoglobin at 12).

Usage:
  python scripts/prepare_prostate.py <input.csv> <output.csv>
"""

from __future__ import annotations

import csv
import sys

K_MAX = 59  # months k = 0..59, risks through month K+1 = 60

ARM = {"placebo": 0, "5.0 mg estrogen": 1}
EVENT_STATUS = "dead - prostatic ca"


def _norm(text: str) -> str:
    return " ".join(text.strip().lower().split())


def prepare(in_path: str, out_path: str) -> dict:
    with open(in_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SystemExit("input file has no header row")
        fields = {_norm(name): name for name in reader.fieldnames}
        required = ["rx", "dtime", "status", "age", "hg", "pf", "hx"]
        missing = [c for c in required if c not in fields]
        if missing:
            raise SystemExit(f"input is missing columns: {missing}")
        id_field = fields.get("patno")
        rows = list(reader)

    counts = {0: {"event": 0, "competing": 0, "censored": 0, "n": 0},
              1: {"event": 0, "competing": 0, "censored": 0, "n": 0}}
    out_rows = []
    for i, row in enumerate(rows):
        arm = ARM.get(_norm(row[fields["rx"]]))
        if arm is None:
            continue  # 0.2 mg and 1.0 mg arms are excluded from this analysis
        sid = row[id_field].strip() if id_field else str(i)
        status = _norm(row[fields["status"]])
        dtime = int(float(row[fields["dtime"]]))
        age = float(row[fields["age"]])
        hg = float(row[fields["hg"]])
        activity = 1 if _norm(row[fields["pf"]]) == "normal activity" else 0
        hx = int(float(row[fields["hx"]]))

        # month of the terminal event; deaths recorded at month 0 count in
        # the first interval
        month = max(dtime, 1)
        if status == "alive":
            kind = None if month > K_MAX else "censored"
        elif status.startswith("dead"):
            kind = "event" if status == EVENT_STATUS else "competing"
            if month > K_MAX + 1:
                kind = None  # death after the 60-month horizon
        else:
            raise SystemExit(f"unrecognized status {row[fields['status']]!r}")

        counts[arm]["n"] += 1
        # a terminal event at month m yields m records (k = 0..m-1) with the
        # terminal indicator set on the last one
        last_k = K_MAX if kind is None else min(month, K_MAX + 1) - 1
        if kind is not None:
            counts[arm][kind] += 1

        for k in range(last_k + 1):
            terminal = k == last_k and kind is not None
            out_rows.append({
                "subject_id": f"p{sid}", "k": k, "a": arm,
                "activity": activity, "age": age, "hg": hg, "hx": hx,
                "c_next": int(terminal and kind == "censored"),
                "d_next": int(terminal and kind == "competing"),
                "y_next": int(terminal and kind == "event"),
            })

    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=[
            "subject_id", "k", "a", "activity", "age", "hg", "hx",
            "c_next", "d_next", "y_next"])
        writer.writeheader()
        writer.writerows(out_rows)
    return counts


def main() -> None:
    if len(sys.argv) != 3:
        raise SystemExit(__doc__)
    counts = prepare(sys.argv[1], sys.argv[2])
    for arm in (1, 0):
        c = counts[arm]
        print(f"arm {arm}: {c['n']} patients, {c['event']} events, "
              f"{c['competing']} competing, {c['censored']} lost")


if __name__ == "__main__":
    main()
