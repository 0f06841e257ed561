"""Let simulation pick between two candidate closed forms.

Two transforms have a pair of competing closed forms each. One pair is for the
squared radial OU process, the other for a squared Bessel process with constant
negative drift rate. A single Monte Carlo estimate is scored against both
candidates, and the one within three standard errors wins.

The runs here use 200k paths so the script finishes in well under a minute. The
acceptance suite uses a million.

    python3 demos/competing_formulas.py
"""

from dataclasses import replace

from fkmatch import check_identity
from fkmatch.identities import default_config

for name in ("SROU_DISCREPANCY", "JJ31_DISCREPANCY"):
    cfg = replace(default_config(name), n_paths=200_000)
    report = check_identity(name, cfg)
    ev = report.evidence
    print(name)
    for label, cand in ev["candidates"].items():
        print(f"  {label:<10} value={cand['value']:.6f}  z={cand['z']:+9.2f}")
    print(f"  winner: {ev['winner']}  (decisive: {ev['decisive']})\n")
