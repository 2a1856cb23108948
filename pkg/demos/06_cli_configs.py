"""Driving the command line tool from Python.

Writes small configs under demos/configs/ and runs every subcommand,
equivalent to `qmllab <cmd> --config demos/configs/<cmd>.json --out runs/<cmd>`.
"""
# %%
import json
from pathlib import Path

from qmllab.cli import main

HERE = Path(__file__).parent
OUT = Path("runs")

# %%
for cmd in ("calibrate", "learn", "qmlh", "owsg"):
    code = main([cmd, "--config", str(HERE / "configs" / f"{cmd}.json"), "--out", str(OUT / cmd),
                 "--seed", "7"])
    print(cmd, "exit", code, sorted(p.name for p in (OUT / cmd).iterdir()))

# %%
report = json.loads((OUT / "learn" / "learn_report.json").read_text())
agg = report["aggregate"]
print({k: v for k, v in agg.items() if not isinstance(v, (dict, list))})
